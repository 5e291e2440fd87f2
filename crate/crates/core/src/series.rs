//! Truncated power series and Adomian polynomials.
//!
//! The Adomian polynomial `A_n(N; v_0, ..., v_n)` is the `n`-th Taylor
//! coefficient in `τ` of `N(v_0 + v_1 τ + v_2 τ² + ...)`. The solver obtains
//! all of `A_0..A_K` at once by composing the Taylor expansion of `N` about
//! `v_0` with the tail series `v - v_0` ([`compose_nonlinearity`]). The explicit
//! sum over partitions ([`adomian_partition`]) is exponential in `n` and is
//! kept as an independent cross-check.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// Largest Taylor order any [`Nonlinearity`] will produce.
pub const MAX_TAYLOR_ORDER: usize = 64;

/// Largest `n` accepted by [`adomian_partition`].
pub const MAX_PARTITION_ORDER: usize = 10;

/// Coefficients `c_0..c_K` of `Σ c_k τ^k`, truncated after order `K`.
///
/// Binary operations return a series of order `min(K_a, K_b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSeries {
    coeffs: Vec<f64>,
}

impl TruncatedSeries {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument("series needs at least one coefficient".into()));
        }
        if let Some(k) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!("series coefficient {k} is not finite")));
        }
        Ok(Self { coeffs })
    }

    pub fn zeros(order: usize) -> Self {
        Self {
            coeffs: vec![0.0; order + 1],
        }
    }

    pub fn constant(value: f64, order: usize) -> Self {
        let mut s = Self::zeros(order);
        s.coeffs[0] = value;
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.order());
        Self {
            coeffs: self.coeffs[..=order].to_vec(),
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// Horner evaluation of the truncated polynomial at `tau`.
    pub fn eval(&self, tau: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * tau + c)
    }

    /// Cauchy product truncated at `min(order a, order b)`.
    pub fn mul(&self, other: &Self) -> Self {
        let order = self.order().min(other.order());
        let a = &self.coeffs;
        let b = &other.coeffs;
        let coeffs = (0..=order).map(|k| (0..=k).map(|i| a[i] * b[k - i]).sum()).collect();
        Self { coeffs }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let order = self.order().min(other.order());
        let coeffs = (0..=order).map(|k| f(self.coeffs[k], other.coeffs[k])).collect();
        Self { coeffs }
    }
}

impl Add for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn add(self, rhs: Self) -> TruncatedSeries {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn sub(self, rhs: Self) -> TruncatedSeries {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn mul(self, rhs: Self) -> TruncatedSeries {
        TruncatedSeries::mul(self, rhs)
    }
}

/// The multiplier `N` of a nonlinearity written as `𝔑(u) = N(u) u`.
#[derive(Debug, Clone, PartialEq)]
pub enum Nonlinearity {
    /// `N(u) = Σ ν_s u^s` with a finite coefficient list. The list is taken
    /// as an exact polynomial, so recentering by binomial re-expansion is
    /// exact; a truncated infinite series is only as good as its truncation.
    Polynomial(Vec<f64>),
    /// `N(u) = (1 - e^{2u}) / u`, i.e. `𝔑(u) = 1 - e^{2u}`. With `f ≡ 1` this
    /// turns `u_xy + N(u) u = f` into Liouville's equation `u_xy = e^{2u}`.
    /// Global coefficients are `ν_k = -2^{k+1} / (k+1)!`.
    Liouville,
}

impl Nonlinearity {
    /// Constant multiplier, i.e. a linear `𝔑`.
    pub fn constant(value: f64) -> Self {
        Self::Polynomial(vec![value])
    }

    /// Global power-series coefficients `ν_0..ν_{len-1}`.
    pub fn series_coeffs(&self, len: usize) -> Vec<f64> {
        match self {
            Self::Polynomial(nu) => (0..len).map(|s| nu.get(s).copied().unwrap_or(0.0)).collect(),
            Self::Liouville => {
                let mut out = Vec::with_capacity(len);
                // 2^{k+1}/(k+1)!, built incrementally
                let mut t = 2.0;
                for k in 0..len {
                    out.push(-t);
                    t *= 2.0 / (k + 2) as f64;
                }
                out
            }
        }
    }

    /// Taylor coefficients of `N` about `center` up to `order` inclusive.
    pub fn taylor_at(&self, center: f64, order: usize) -> Result<Vec<f64>> {
        if order > MAX_TAYLOR_ORDER {
            return Err(Error::TaylorOrder {
                requested: order + 1,
                available: MAX_TAYLOR_ORDER + 1,
            });
        }
        if !center.is_finite() {
            return Err(Error::InvalidArgument(format!("Taylor center {center} is not finite")));
        }
        Ok(match self {
            Self::Polynomial(nu) => recenter_polynomial(nu, center, order),
            Self::Liouville => (0..=order).map(|n| liouville_coeff(center, n)).collect(),
        })
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Self::Polynomial(nu) => nu.iter().rev().fold(0.0, |acc, c| acc * u + c),
            Self::Liouville => liouville_coeff(u, 0),
        }
    }

    pub fn deriv(&self, u: f64) -> f64 {
        match self {
            Self::Polynomial(nu) => nu
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (s, c)| acc * u + s as f64 * c),
            Self::Liouville => liouville_coeff(u, 1),
        }
    }

    /// `𝔑(u) = N(u) u`.
    pub fn full(&self, u: f64) -> f64 {
        self.eval(u) * u
    }
}

fn recenter_polynomial(nu: &[f64], center: f64, order: usize) -> Vec<f64> {
    // Synthetic division: repeated Horner passes give the shifted coefficients.
    let mut work = nu.to_vec();
    let mut out = vec![0.0; order + 1];
    for slot in out.iter_mut() {
        if work.is_empty() {
            break;
        }
        for s in (0..work.len() - 1).rev() {
            work[s] += center * work[s + 1];
        }
        *slot = work[0];
        work.remove(0);
    }
    out
}

/// n-th Taylor coefficient of `(1 - e^{2u})/u` about `u0`.
///
/// `N(u0 + t) = -2 ∫_0^1 e^{2s(u0+t)} ds`, so the coefficient is
/// `-2^{n+1}/n! · I_n(2u0)` with `I_n(a) = ∫_0^1 s^n e^{as} ds`. Every branch
/// below sums positive terms only and is smooth through `u0 = 0`.
fn liouville_coeff(u0: f64, n: usize) -> f64 {
    let a = 2.0 * u0;
    let pow2 = 2f64.powi(n as i32 + 1);
    if a > 0.0 {
        // I_n(a) = Σ_j a^j / (j! (n+j+1))
        let mut term = 1.0;
        let mut sum = 0.0;
        for j in 0..2000 {
            let add = term / (n + j + 1) as f64;
            sum += add;
            if add <= 1e-17 * sum {
                break;
            }
            term *= a / (j + 1) as f64;
        }
        -pow2 * sum / factorial(n)
    } else if a >= -400.0 {
        // I_n(a)/n! = e^{a} Σ_k b^k / (n+k+1)!,  b = -a
        let b = -a;
        let mut term = 1.0 / factorial(n + 1);
        let mut sum = 0.0;
        for k in 0..2000 {
            sum += term;
            if term <= 1e-17 * sum && k as f64 > b {
                break;
            }
            term *= b / (n + k + 2) as f64;
        }
        -pow2 * a.exp() * sum
    } else {
        // Forward recurrence I_k = (e^a - k I_{k-1})/a is contracting for |a| > k.
        let ea = a.exp();
        let mut i_k = (ea - 1.0) / a;
        for k in 1..=n {
            i_k = (ea - k as f64 * i_k) / a;
        }
        -pow2 * i_k / factorial(n)
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// `N(Σ v_s τ^s)` truncated at the order of `v`; coefficient `n` is the
/// Adomian polynomial `A_n(N; v_0, ..., v_n)`.
pub fn compose_nonlinearity(n: &Nonlinearity, v: &TruncatedSeries) -> Result<TruncatedSeries> {
    let order = v.order();
    let taylor = n.taylor_at(v.coeff(0), order)?;
    let mut tail = v.clone();
    tail.coeffs[0] = 0.0;
    let mut acc = TruncatedSeries::constant(taylor[order], order);
    for &t in taylor[..order].iter().rev() {
        acc = acc.mul(&tail);
        acc.coeffs[0] += t;
    }
    Ok(acc)
}

/// Adomian polynomials `A_0..A_K` for the slots `v_0..v_K`.
pub fn adomian(n: &Nonlinearity, v: &[f64]) -> Result<Vec<f64>> {
    let series = TruncatedSeries::new(v.to_vec())?;
    Ok(compose_nonlinearity(n, &series)?.coeffs)
}

/// `A_n` for `n = v.len() - 1` by direct enumeration of the partition sum
/// over `α_1 ≥ ... ≥ α_n ≥ α_{n+1} = 0`, `α_1 + ... + α_n = n`.
pub fn adomian_partition(nl: &Nonlinearity, v: &[f64]) -> Result<f64> {
    let Some(n) = v.len().checked_sub(1) else {
        return Err(Error::InvalidArgument("adomian_partition needs v_0".into()));
    };
    if n > MAX_PARTITION_ORDER {
        return Err(Error::PartitionOrder {
            n,
            max: MAX_PARTITION_ORDER,
        });
    }
    let taylor = nl.taylor_at(v[0], n)?;
    if n == 0 {
        return Ok(taylor[0]);
    }
    let derivs: Vec<f64> = taylor.iter().enumerate().map(|(k, c)| c * factorial(k)).collect();

    let mut alpha = vec![0usize; n + 1];
    let mut total = 0.0;
    enumerate_partitions(n, n, 0, &mut alpha, &mut |alpha| {
        let mut term = derivs[alpha[0]];
        for i in 0..n {
            let d = alpha[i] - alpha[i + 1];
            term *= v[i + 1].powi(d as i32) / factorial(d);
        }
        total += term;
    });
    Ok(total)
}

/// Fills `alpha[pos..n]` with non-increasing entries bounded by `cap` that sum to `remaining`.
fn enumerate_partitions(
    remaining: usize,
    cap: usize,
    pos: usize,
    alpha: &mut [usize],
    visit: &mut impl FnMut(&[usize]),
) {
    let n = alpha.len() - 1;
    if pos == n {
        if remaining == 0 {
            visit(alpha);
        }
        return;
    }
    let slots = n - pos;
    for a in (0..=cap.min(remaining)).rev() {
        // the remaining slots cannot absorb more than a each
        if a * slots < remaining {
            break;
        }
        alpha[pos] = a;
        enumerate_partitions(remaining - a, a, pos + 1, alpha, visit);
    }
    alpha[pos] = 0;
}
