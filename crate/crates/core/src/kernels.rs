//! The confluent hypergeometric limit function `0F1` and the Riemann function
//! of `u_xy + c u`.
//!
//! For the operator `L u = u_xy + c u` with constant `c` the Riemann function is
//! `R(ξ, η; x, y) = 0F1(1; -c (ξ - x)(η - y))`. It equals `J_0(2 √(c s))` for
//! `c s > 0` and `I_0(2 √(-c s))` for `c s < 0`, with `s = (ξ - x)(η - y)`.

use crate::error::{Error, Result};

/// Largest `|z|` accepted by [`hyp0f1`]. Beyond this the alternating series
/// loses all accuracy and the caller should refine the mesh.
pub const Z_MAX: f64 = 1.0e4;

const MAX_TERMS: usize = 500;

/// `0F1(; b; z) = Σ z^k / ((b)_k k!)`, summed until the next term drops below
/// `1e-17` of the running maximum partial-sum magnitude.
pub fn hyp0f1(b: f64, z: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "0F1 parameter b = {b} must be positive"
        )));
    }
    if !(z.abs() <= Z_MAX) {
        return Err(Error::KernelRange { z, max: Z_MAX });
    }
    Ok(hyp0f1_series(b, z))
}

#[inline]
fn hyp0f1_series(b: f64, z: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut peak = 1.0f64;
    for k in 0..MAX_TERMS {
        term *= z / ((b + k as f64) * (k + 1) as f64);
        sum += term;
        peak = peak.max(sum.abs());
        if term.abs() <= 1e-17 * peak {
            break;
        }
    }
    sum
}

/// Riemann function of `u_xy + c u` for a frozen coefficient `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannKernel {
    pub c: f64,
}

impl RiemannKernel {
    pub fn new(c: f64) -> Self {
        Self { c }
    }

    fn arg(&self, dxi: f64, deta: f64) -> f64 {
        -(dxi * deta) * self.c
    }

    /// `R(ξ, η; x, y)`.
    pub fn value(&self, xi: f64, eta: f64, x: f64, y: f64) -> Result<f64> {
        self.value_offset(xi - x, eta - y)
    }

    /// `∂R/∂ξ = c (y - η) 0F1(2; z)`.
    pub fn d1(&self, xi: f64, eta: f64, x: f64, y: f64) -> Result<f64> {
        self.d1_offset(xi - x, eta - y)
    }

    /// `∂R/∂η = c (x - ξ) 0F1(2; z)`.
    pub fn d2(&self, xi: f64, eta: f64, x: f64, y: f64) -> Result<f64> {
        self.d2_offset(xi - x, eta - y)
    }

    /// `R` in terms of the offsets `ξ - x`, `η - y`.
    pub fn value_offset(&self, dxi: f64, deta: f64) -> Result<f64> {
        hyp0f1(1.0, self.arg(dxi, deta))
    }

    pub fn d1_offset(&self, dxi: f64, deta: f64) -> Result<f64> {
        if self.c == 0.0 {
            return Ok(0.0);
        }
        Ok(-self.c * deta * hyp0f1(2.0, self.arg(dxi, deta))?)
    }

    pub fn d2_offset(&self, dxi: f64, deta: f64) -> Result<f64> {
        if self.c == 0.0 {
            return Ok(0.0);
        }
        Ok(-self.c * dxi * hyp0f1(2.0, self.arg(dxi, deta))?)
    }
}

/// `R(ξ, η; x, y)` for the kernel's coefficient.
pub fn riemann(kernel: RiemannKernel, xi: f64, eta: f64, x: f64, y: f64) -> Result<f64> {
    kernel.value(xi, eta, x, y)
}

pub fn riemann_d1(kernel: RiemannKernel, xi: f64, eta: f64, x: f64, y: f64) -> Result<f64> {
    kernel.d1(xi, eta, x, y)
}

pub fn riemann_d2(kernel: RiemannKernel, xi: f64, eta: f64, x: f64, y: f64) -> Result<f64> {
    kernel.d2(xi, eta, x, y)
}
