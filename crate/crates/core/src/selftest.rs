//! Randomised property suites that can run outside the test harness, e.g.
//! from the command line on a fresh build.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::{cheb_nodes, integrate_1d, EdgeTrace, Grid, PiecewiseField, Rect};
use crate::harness::{mu_bound_check, mu_explicit, mu_recurrence};
use crate::kernels::{hyp0f1, RiemannKernel};
use crate::problem::GoursatProblem;
use crate::series::{adomian, adomian_partition, Nonlinearity};
use crate::solver::{picard_cell_oracle, solve_cell_linear, FdExpansion, SolverOptions, PICARD_MAX_ITER, PICARD_TOL};

pub const DEFAULT_SEED: u64 = 0x5eed_f00d;

/// Pass/fail tally of one suite. `failures` keeps a message per failed check.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuiteReport {
    pub name: String,
    pub passed: usize,
    pub failed: usize,
    pub failures: Vec<String>,
}

impl SuiteReport {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            ..Self::default()
        }
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
            self.failures.push(msg());
        }
    }

    fn fail(&mut self, msg: String) {
        self.failed += 1;
        self.failures.push(msg);
    }

    pub fn ok(&self) -> bool {
        self.failed == 0
    }
}

/// Composition vs partition sum for `A_0..A_5` on random polynomial `N`,
/// the top-slot identity `A_n(.., v_n) - A_n(.., 0) = N'(v_0) v_n`, and the
/// degenerate-tail identity `Σ A_k = N(u)` for `v = (u, 0, ...)`.
pub fn adomian_suite(instances: usize, seed: u64) -> SuiteReport {
    let mut rep = SuiteReport::new("adomian");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..instances {
        let nu: Vec<f64> = (0..rng.gen_range(1..=8)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..rng.gen_range(1..=6)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nl = Nonlinearity::Polynomial(nu);
        let composed = match adomian(&nl, &v) {
            Ok(a) => a,
            Err(e) => {
                rep.fail(format!("instance {t}: {e}"));
                continue;
            }
        };
        for n in 0..v.len().min(6) {
            let part = adomian_partition(&nl, &v[..=n]).unwrap_or(f64::NAN);
            rep.check((composed[n] - part).abs() <= 1e-12, || {
                format!("instance {t}, n = {n}: composition {} vs partition {part}", composed[n])
            });
        }
        let n = v.len() - 1;
        if n >= 1 {
            let mut zeroed = v.clone();
            zeroed[n] = 0.0;
            let lower = adomian(&nl, &zeroed).map(|a| a[n]).unwrap_or(f64::NAN);
            let want = nl.deriv(v[0]) * v[n];
            let got = composed[n] - lower;
            rep.check((got - want).abs() <= 1e-12, || {
                format!("instance {t}: top slot {got} vs {want}")
            });
        }
        let mut tail = vec![0.0; v.len()];
        tail[0] = v[0];
        let sum: f64 = adomian(&nl, &tail).map(|a| a.iter().sum()).unwrap_or(f64::NAN);
        rep.check((sum - nl.eval(v[0])).abs() <= 1e-12, || {
            format!("instance {t}: tail sum {sum}")
        });
    }
    rep
}

/// Fourth-order central approximation of `w_xy` with step `h`.
fn mixed_fd(w: impl Fn(f64, f64) -> f64, x: f64, y: f64, h: f64) -> f64 {
    const ST: [(f64, f64); 4] = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];
    let mut s = 0.0;
    for (a, ca) in ST {
        for (b, cb) in ST {
            s += ca * cb * w(x + a * h, y + b * h);
        }
    }
    s / (144.0 * h * h)
}

/// Kernel derivatives against central differences, the homogeneous equation
/// `w_xy + c w = 0`, and the listed special values.
pub fn kernel_suite(samples: usize, seed: u64) -> SuiteReport {
    let mut rep = SuiteReport::new("kernels");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specials = [
        (1.0, 0.0, 1.0, 0.0),
        (2.0, 0.0, 1.0, 0.0),
        (1.0, -1.445_796_490_736_696, 0.0, 1e-10),
        (1.0, 1.0, 2.2795853023360673, 1e-15),
    ];
    for (b, z, want, tol) in specials {
        let got = hyp0f1(b, z).unwrap_or(f64::NAN);
        rep.check((got - want).abs() <= tol, || {
            format!("0F1({b}; {z}) = {got}, want {want}")
        });
    }
    let one = RiemannKernel::new(1.0);
    let j0 = one.value(0.0, 0.0, 1.0, 1.0).unwrap_or(f64::NAN);
    rep.check((j0 - 0.22389077914123567).abs() <= 1e-15, || format!("J0(2) = {j0}"));
    for t in 0..samples {
        let c = rng.gen_range(-10.0..10.0);
        let k = RiemannKernel::new(c);
        let [xi, eta, x, y]: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
        let r = |xi: f64, eta: f64| k.value(xi, eta, x, y).unwrap_or(f64::NAN);
        let h = 1e-6;
        let fd1 = (r(xi + h, eta) - r(xi - h, eta)) / (2.0 * h);
        let fd2 = (r(xi, eta + h) - r(xi, eta - h)) / (2.0 * h);
        let d1 = k.d1(xi, eta, x, y).unwrap_or(f64::NAN);
        let d2 = k.d2(xi, eta, x, y).unwrap_or(f64::NAN);
        rep.check((d1 - fd1).abs() <= 1e-7, || {
            format!("sample {t}: d1 {d1} vs {fd1} (c = {c})")
        });
        rep.check((d2 - fd2).abs() <= 1e-7, || {
            format!("sample {t}: d2 {d2} vs {fd2} (c = {c})")
        });
        let w = |x: f64, y: f64| k.value(xi, eta, x, y).unwrap_or(f64::NAN);
        let w0 = w(x, y);
        let res = mixed_fd(w, x, y, 1e-4) + c * w0;
        rep.check(res.abs() <= 1e-7 * (1.0 + w0.abs()), || {
            format!("sample {t}: PDE residual {res} (c = {c})")
        });
    }
    rep
}

/// Quadrature exactness on random polynomials and spectral interpolation of
/// `e^{x+y}` on one cell.
pub fn field_suite(samples: usize, seed: u64) -> SuiteReport {
    let mut rep = SuiteReport::new("field");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..samples {
        let p = rng.gen_range(2..=16);
        let coeffs: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = rng.gen_range(-1.0..1.0);
        let b = a + rng.gen_range(0.1..2.0);
        let poly = |x: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
        let anti = |x: f64| {
            coeffs
                .iter()
                .enumerate()
                .rev()
                .fold(0.0, |acc, (k, c)| acc * x + c / (k + 1) as f64)
                * x
        };
        let want = anti(b) - anti(a);
        let got = integrate_1d(poly, a, b, p).unwrap_or(f64::NAN);
        let scale =
            coeffs.iter().map(|c| c.abs()).sum::<f64>() * (b - a) * a.abs().max(b.abs()).max(1.0).powi(p as i32);
        rep.check((got - want).abs() <= 1e-14 * scale, || {
            format!("sample {t}: quadrature {got} vs {want}")
        });
    }
    match Grid::new(1.0, 1.0, 1, 1).and_then(|g| PiecewiseField::sample(g, 12, |x, y| (x + y).exp())) {
        Ok(f) => {
            for t in 0..samples {
                let (x, y) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
                let got = f.eval(x, y).unwrap_or(f64::NAN);
                let want: f64 = (x + y).exp();
                rep.check((got - want).abs() <= 1e-12 * want, || {
                    format!("point {t}: {got} vs {want}")
                });
            }
        }
        Err(e) => rep.fail(format!("sampling failed: {e}")),
    }
    let nodes = cheb_nodes(5, 0.0, 1.0).unwrap_or_default();
    rep.check(nodes.get(2) == Some(&0.5), || format!("P = 5 midpoint node: {nodes:?}"));
    rep
}

/// One random cell problem: `|c| ≤ 5`, sides up to 0.25, polynomial traces
/// of degree ≤ 6 sharing the corner value, and a smooth right-hand side.
pub struct RandomCell {
    pub c: f64,
    pub rect: Rect,
    pub left: Vec<f64>,
    pub bottom: Vec<f64>,
    pub corner: f64,
    pub rhs: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl RandomCell {
    pub fn draw(rng: &mut impl Rng, p: usize) -> Self {
        let c = rng.gen_range(-5.0..5.0);
        let (x0, y0) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let rect = Rect::new(x0, x0 + rng.gen_range(0.02..0.25), y0, y0 + rng.gen_range(0.02..0.25));
        let corner = rng.gen_range(-1.0..1.0);
        let mut poly = |deg: usize| -> Vec<f64> { (0..deg).map(|_| rng.gen_range(-2.0..2.0)).collect() };
        let (dl, db) = (poly(6), poly(6));
        let eval = |cs: &[f64], t: f64| corner + cs.iter().rev().fold(0.0, |acc, c| (acc + c) * t);
        let left = cheb_nodes(p, rect.y0, rect.y1)
            .unwrap()
            .iter()
            .map(|&y| eval(&dl, y - rect.y0))
            .collect();
        let bottom = cheb_nodes(p, rect.x0, rect.x1)
            .unwrap()
            .iter()
            .map(|&x| eval(&db, x - rect.x0))
            .collect();
        let [a, kx, ky, e]: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
        let rhs = Arc::new(move |x: f64, y: f64| a * (kx * x + ky * y).sin() + (e * x * y).exp());
        Self {
            c,
            rect,
            left,
            bottom,
            corner,
            rhs,
        }
    }

    pub fn traces(&self) -> (EdgeTrace, EdgeTrace) {
        (
            EdgeTrace::new(self.rect.y0, self.rect.y1, self.left.clone()).unwrap(),
            EdgeTrace::new(self.rect.x0, self.rect.x1, self.bottom.clone()).unwrap(),
        )
    }
}

/// Riemann-representation cell solve vs Picard iteration on random cells;
/// returns the suite and the largest disagreement seen. Agreement is
/// required to `max(1e-10, 10 picard_tol)`.
pub fn cell_oracle_suite(cells: usize, seed: u64, picard_tol: f64) -> (SuiteReport, f64) {
    let agree = (10.0 * picard_tol).max(1e-10);
    let mut rep = SuiteReport::new("cell-oracle");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = crate::solver::DEFAULT_P;
    let mut worst = 0.0f64;
    for t in 0..cells {
        let cell = RandomCell::draw(&mut rng, p);
        let (left, bottom) = cell.traces();
        let rhs = cell.rhs.clone();
        let direct = solve_cell_linear(cell.c, &left, &bottom, cell.corner, &*rhs, cell.rect, p);
        let picard = picard_cell_oracle(
            cell.c,
            &left,
            &bottom,
            cell.corner,
            &*rhs,
            cell.rect,
            p,
            picard_tol,
            PICARD_MAX_ITER,
        );
        match (direct, picard) {
            (Ok(u), Ok(v)) => {
                let d = u.iter().zip(&v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                worst = worst.max(d);
                rep.check(d <= agree, || {
                    format!("cell {t}: sup difference {d:e} (c = {})", cell.c)
                });
            }
            (Err(e), _) | (_, Err(e)) => rep.fail(format!("cell {t}: {e}")),
        }
    }
    (rep, worst)
}

/// Interior-node residuals of the basic problem and corrections `1..=k_max`
/// for pr1 on an `n × n` mesh, against `tol`.
pub fn residual_suite(n: usize, p: usize, k_max: usize, tol: f64) -> SuiteReport {
    let mut rep = SuiteReport::new("residuals");
    let prob = GoursatProblem::pr1();
    let run = || -> crate::Result<FdExpansion> {
        let grid = Grid::new(prob.x_max, prob.y_max, n, n)?;
        let mut fd = FdExpansion::solve_basic(&prob, grid, SolverOptions::new(p)?)?;
        fd.extend_to(k_max)?;
        Ok(fd)
    };
    let fd = match run() {
        Ok(fd) => fd,
        Err(e) => {
            rep.fail(format!("solve failed: {e}"));
            return rep;
        }
    };
    let basic = fd.residual_basic().into_iter().fold(0.0f64, f64::max);
    rep.check(basic <= tol, || format!("basic residual {basic:e}"));
    for k in 1..=k_max {
        match fd.residual_correction(k) {
            Ok(r) => {
                let r = r.into_iter().fold(0.0f64, f64::max);
                rep.check(r <= tol, || format!("correction {k} residual {r:e}"));
            }
            Err(e) => rep.fail(format!("correction {k}: {e}")),
        }
    }
    rep
}

/// μ recurrence vs explicit sum, and the growth bound with `h₁ ≤ h₂`.
pub fn mu_suite(sets: usize, seed: u64) -> SuiteReport {
    let mut rep = SuiteReport::new("mu");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..sets {
        let [a, b, c]: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.0..2.0));
        let (n1, n2) = (rng.gen_range(1..=20), rng.gen_range(1..=20));
        let mu = mu_recurrence(a, b, c, n1, n2);
        let mut worst = 0.0f64;
        for (i, row) in mu.iter().enumerate() {
            for (j, &r) in row.iter().enumerate() {
                let e = mu_explicit(a, b, c, i, j);
                let scale = r.abs().max(e.abs());
                if scale > 0.0 {
                    worst = worst.max((r - e).abs() / scale);
                }
            }
        }
        rep.check(worst <= 1e-10, || format!("set {t}: relative gap {worst:e}"));

        let [a1, b1, c1]: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.0..2.0));
        // h1 ≤ h2 on the unit square means N1 ≥ N2
        let n2 = rng.gen_range(1..=20);
        let n1 = rng.gen_range(n2..=20);
        let (h1, h2) = (1.0 / n1 as f64, 1.0 / n2 as f64);
        let h = h1.hypot(h2);
        match mu_bound_check(a1, b1, c1, h, 1.0, 1.0, n1, n2) {
            Ok(holds) => rep.check(holds, || {
                format!("set {t}: bound fails for {a1}, {b1}, {c1}, {n1} x {n2}")
            }),
            Err(e) => rep.fail(format!("set {t}: {e}")),
        }
    }
    rep
}

/// All suites at their default sizes.
pub fn run_all(seed: u64) -> Vec<SuiteReport> {
    run_all_with(seed, PICARD_TOL)
}

/// [`run_all`] with a custom Picard tolerance for the cell cross-check.
pub fn run_all_with(seed: u64, picard_tol: f64) -> Vec<SuiteReport> {
    vec![
        adomian_suite(200, seed),
        kernel_suite(200, seed),
        field_suite(100, seed),
        cell_oracle_suite(100, seed, picard_tol).0,
        // the h = 0.5 mesh of the reference sweep
        residual_suite(8, crate::solver::DEFAULT_P, 3, 1e-8),
        mu_suite(50, seed),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass() {
        for rep in run_all(DEFAULT_SEED) {
            assert!(rep.ok(), "{}: {:?}", rep.name, rep.failures);
            assert!(rep.passed > 0);
        }
    }

    #[test]
    fn failures_are_counted() {
        let mut rep = SuiteReport::new("x");
        rep.check(true, || unreachable!());
        rep.check(false, || "bad".into());
        assert_eq!((rep.passed, rep.failed), (1, 1));
        assert_eq!(rep.failures, vec!["bad".to_string()]);
        assert!(!rep.ok());
    }

    #[test]
    fn seeds_are_reproducible() {
        assert_eq!(adomian_suite(20, 7), adomian_suite(20, 7));
    }

    #[test]
    fn random_cells_have_consistent_corners() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let c = RandomCell::draw(&mut rng, 8);
            assert_eq!(c.left[0], c.corner);
            assert_eq!(c.bottom[0], c.corner);
            assert!(c.c.abs() * c.rect.width() * c.rect.height() < 1.0);
        }
    }
}
