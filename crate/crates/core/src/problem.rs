use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::series::Nonlinearity;

pub type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// `u_xy + N(u) u = f(x, y)` on `[0, X] × [0, Y]` with `u(x, 0) = ψ(x)`,
/// `u(0, y) = φ(y)`.
#[derive(Clone)]
pub struct GoursatProblem {
    pub name: String,
    pub x_max: f64,
    pub y_max: f64,
    pub psi: Fn1,
    pub phi: Fn1,
    pub source: Fn2,
    pub nonlinearity: Nonlinearity,
    /// Closed-form solution, when one is known.
    pub exact: Option<Fn2>,
}

impl fmt::Debug for GoursatProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GoursatProblem")
            .field("name", &self.name)
            .field("x_max", &self.x_max)
            .field("y_max", &self.y_max)
            .field("nonlinearity", &self.nonlinearity)
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

impl GoursatProblem {
    pub fn new(
        name: impl Into<String>,
        x_max: f64,
        y_max: f64,
        psi: Fn1,
        phi: Fn1,
        source: Fn2,
        nonlinearity: Nonlinearity,
    ) -> Result<Self> {
        if !(x_max > 0.0 && y_max > 0.0 && x_max.is_finite() && y_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "domain extents {x_max} x {y_max} must be positive"
            )));
        }
        let (psi0, phi0) = (psi(0.0), phi(0.0));
        if !((psi0 - phi0).abs() <= 1e-12 * (1.0 + psi0.abs())) {
            return Err(Error::Incompatible { psi0, phi0 });
        }
        Ok(Self {
            name: name.into(),
            x_max,
            y_max,
            psi,
            phi,
            source,
            nonlinearity,
            exact: None,
        })
    }

    pub fn with_exact(mut self, exact: Fn2) -> Self {
        self.exact = Some(exact);
        self
    }

    /// Liouville's equation `u_xy = e^{2u}` on `[0, 4]²`, written as
    /// `u_xy + N(u) u = 1` with `N(u) = (1 - e^{2u}) / u`. Exact solution
    /// `u*(x, y) = (x + y)/2 - ln(e^x + e^y)`.
    pub fn pr1() -> Self {
        let edge = |t: f64| t / 2.0 - t.exp().ln_1p();
        Self::new(
            "pr1",
            4.0,
            4.0,
            Arc::new(edge),
            Arc::new(edge),
            Arc::new(|_, _| 1.0),
            Nonlinearity::Liouville,
        )
        .expect("pr1 data is compatible")
        .with_exact(Arc::new(pr1_exact))
    }

    /// Look up a built-in problem by name.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "pr1" => Some(Self::pr1()),
            _ => None,
        }
    }

    pub fn preset_names() -> &'static [&'static str] {
        &["pr1"]
    }
}

pub fn pr1_exact(x: f64, y: f64) -> f64 {
    let hi = x.max(y);
    let lo = x.min(y);
    (x + y) / 2.0 - hi - (lo - hi).exp().ln_1p()
}
