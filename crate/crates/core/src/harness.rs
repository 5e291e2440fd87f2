//! Full solves, error metrics and convergence sweeps.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{Grid, PiecewiseField};
use crate::problem::{Fn2, GoursatProblem};
use crate::solver::{FdExpansion, SolverOptions};

/// Largest rank a study may request.
pub const MAX_STUDY_RANK: usize = 16;

/// Interior samples per cell direction added to the cell nodes.
pub const DEFAULT_SUB_SAMPLES: usize = 5;

/// Meshes of the reference sweep on `[0, 4]²`: `h = 0.5, 0.2, 0.1, 0.05`.
pub const PR1_MESHES: [usize; 4] = [8, 20, 40, 80];

#[derive(Debug, Clone)]
pub struct StudySpec {
    pub problem: GoursatProblem,
    pub meshes: Vec<(usize, usize)>,
    pub max_rank: usize,
    pub p: usize,
    pub sub_samples: usize,
}

impl StudySpec {
    pub fn new(problem: GoursatProblem, meshes: Vec<(usize, usize)>, max_rank: usize, p: usize) -> Result<Self> {
        let spec = Self {
            problem,
            meshes,
            max_rank,
            p,
            sub_samples: DEFAULT_SUB_SAMPLES,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The pr1 sweep over [`PR1_MESHES`] and ranks `0..=7`.
    pub fn pr1_table(p: usize) -> Result<Self> {
        Self::new(
            GoursatProblem::pr1(),
            PR1_MESHES.iter().map(|&n| (n, n)).collect(),
            7,
            p,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.meshes.is_empty() {
            return Err(Error::InvalidArgument("study needs at least one mesh".into()));
        }
        if let Some(&(n1, n2)) = self.meshes.iter().find(|&&(a, b)| a == 0 || b == 0) {
            return Err(Error::InvalidArgument(format!(
                "mesh {n1} x {n2} must have positive cell counts"
            )));
        }
        if self.max_rank > MAX_STUDY_RANK {
            return Err(Error::InvalidArgument(format!(
                "rank {} exceeds the study limit {MAX_STUDY_RANK}",
                self.max_rank
            )));
        }
        if self.sub_samples == 0 {
            return Err(Error::InvalidArgument("sub_samples must be positive".into()));
        }
        SolverOptions::new(self.p).map(|_| ())
    }
}

/// One `(mesh, rank)` entry of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub n1: usize,
    pub n2: usize,
    pub h1: f64,
    pub h2: f64,
    pub m: usize,
    pub delta: f64,
    pub norm1_delta: f64,
    /// Solve time up to and including rank `m`.
    pub wall_ms: f64,
    pub p: usize,
}

/// A mesh whose solve failed; the rest of the sweep is unaffected.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyFailure {
    pub n1: usize,
    pub n2: usize,
    pub error: Error,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorReport {
    pub rows: Vec<ReportRow>,
    pub failures: Vec<StudyFailure>,
}

impl ErrorReport {
    pub fn delta(&self, n1: usize, n2: usize, m: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.n1 == n1 && r.n2 == n2 && r.m == m)
            .map(|r| r.delta)
    }

    /// Deltas of one mesh ordered by rank.
    pub fn column(&self, n1: usize, n2: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.n1 == n1 && r.n2 == n2)
            .map(|r| r.delta)
            .collect()
    }
}

/// Solves the basic problem and corrections `1..=m`.
pub fn fd_solve(problem: &GoursatProblem, n1: usize, n2: usize, m: usize, p: usize) -> Result<FdExpansion> {
    let grid = Grid::new(problem.x_max, problem.y_max, n1, n2)?;
    let mut fd = FdExpansion::solve_basic(problem, grid, SolverOptions::new(p)?)?;
    fd.extend_to(m)?;
    Ok(fd)
}

/// Unit-cell coordinates of the interior sample points, `(k + 1/2) / n`.
fn sub_fractions(n: usize) -> Vec<f64> {
    (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect()
}

/// Sup of `|field - g|` over all cell nodes and an `n × n` uniform interior
/// refinement of every cell.
pub fn sup_error(field: &PiecewiseField, g: impl Fn(f64, f64) -> f64, sub_samples: usize) -> f64 {
    let grid = *field.grid();
    let p = field.p();
    let basis = field.basis();
    let fr = sub_fractions(sub_samples);
    let rows: Vec<Vec<f64>> = fr.iter().map(|&s| basis.lagrange_row(s)).collect();
    let mut worst = 0.0f64;
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            let cell = field.cell(i, j);
            let (xs, ys) = field.cell_nodes(i, j);
            for (a, &x) in xs.iter().enumerate() {
                for (b, &y) in ys.iter().enumerate() {
                    worst = worst.max((cell[a * p + b] - g(x, y)).abs());
                }
            }
            let r = grid.cell(i, j);
            // contract along y first, then along x
            let along_y: Vec<Vec<f64>> = rows
                .iter()
                .map(|ry| (0..p).map(|a| (0..p).map(|b| ry[b] * cell[a * p + b]).sum()).collect())
                .collect();
            for (ix, rx) in rows.iter().enumerate() {
                let x = r.x0 + fr[ix] * r.width();
                for (iy, col) in along_y.iter().enumerate() {
                    let y = r.y0 + fr[iy] * r.height();
                    let v: f64 = rx.iter().zip(col).map(|(w, c)| w * c).sum();
                    worst = worst.max((v - g(x, y)).abs());
                }
            }
        }
    }
    worst
}

/// `δ = sup |u^(0) + ... + u^(m) - exact|` over the default sample set.
pub fn error_vs_exact(fd: &FdExpansion, exact: impl Fn(f64, f64) -> f64, m: usize) -> f64 {
    sup_error(&fd.partial_sum(m), exact, DEFAULT_SUB_SAMPLES)
}

/// `δ` against another approximation, evaluated through its own cells.
pub fn error_vs_reference(fd: &FdExpansion, reference: &PiecewiseField, m: usize) -> Result<f64> {
    if reference.grid().x_max != fd.grid().x_max || reference.grid().y_max != fd.grid().y_max {
        return Err(Error::InvalidArgument("reference covers a different domain".into()));
    }
    Ok(sup_error(
        &fd.partial_sum(m),
        |x, y| reference.eval(x, y).unwrap_or(f64::NAN),
        DEFAULT_SUB_SAMPLES,
    ))
}

/// `max{ sup|f|, max over cells of (sup|f_x|² + sup|f_y|²)^½ }` with the
/// value sup over the sample set and derivative sups over the cell nodes.
pub fn norm1(field: &PiecewiseField, sub_samples: usize) -> f64 {
    let grid = *field.grid();
    let mut worst = sup_error(field, |_, _| 0.0, sub_samples);
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            let (dx, dy) = field.cell_gradient(i, j);
            let sx = dx.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let sy = dy.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            worst = worst.max(sx.hypot(sy));
        }
    }
    worst
}

/// [`norm1`] of `u^(0) + ... + u^(m) - exact`, with `exact` sampled on the
/// same cell nodes.
pub fn norm1_error(fd: &FdExpansion, exact: impl Fn(f64, f64) -> f64, m: usize) -> f64 {
    let sum = fd.partial_sum(m);
    let mut err = sum.clone();
    for i in 0..fd.grid().n1 {
        for j in 0..fd.grid().n2 {
            let (xs, ys) = sum.cell_nodes(i, j);
            let cell = err.cell_mut(i, j);
            let p = ys.len();
            for (a, &x) in xs.iter().enumerate() {
                for (b, &y) in ys.iter().enumerate() {
                    cell[a * p + b] -= exact(x, y);
                }
            }
        }
    }
    norm1(&err, DEFAULT_SUB_SAMPLES)
}

fn study_mesh(spec: &StudySpec, exact: &Fn2, n1: usize, n2: usize) -> Result<Vec<ReportRow>> {
    let grid = Grid::new(spec.problem.x_max, spec.problem.y_max, n1, n2)?;
    let start = Instant::now();
    let mut fd = FdExpansion::solve_basic(&spec.problem, grid, SolverOptions::new(spec.p)?)?;
    let mut times = vec![start.elapsed().as_secs_f64() * 1e3];
    while fd.rank() < spec.max_rank {
        fd.extend()?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let mut sum = fd.correction(0).clone();
    let mut rows = Vec::with_capacity(spec.max_rank + 1);
    for m in 0..=spec.max_rank {
        if m > 0 {
            sum.add_assign(fd.correction(m));
        }
        rows.push(ReportRow {
            n1,
            n2,
            h1: grid.h1(),
            h2: grid.h2(),
            m,
            delta: sup_error(&sum, |x, y| exact(x, y), spec.sub_samples),
            norm1_delta: norm1_error(&fd, |x, y| exact(x, y), m),
            wall_ms: times[m],
            p: spec.p,
        });
    }
    Ok(rows)
}

/// Runs every mesh of `spec` up to its rank. A failing mesh is recorded in
/// [`ErrorReport::failures`] and the remaining meshes still run.
pub fn convergence_study(spec: &StudySpec) -> Result<ErrorReport> {
    spec.validate()?;
    let exact = spec
        .problem
        .exact
        .clone()
        .ok_or_else(|| Error::InvalidArgument(format!("problem {} has no exact solution", spec.problem.name)))?;
    let results: Vec<_> = spec
        .meshes
        .par_iter()
        .map(|&(n1, n2)| (n1, n2, study_mesh(spec, &exact, n1, n2)))
        .collect();
    let mut report = ErrorReport::default();
    for (n1, n2, r) in results {
        match r {
            Ok(rows) => report.rows.extend(rows),
            Err(error) => report.failures.push(StudyFailure { n1, n2, error }),
        }
    }
    Ok(report)
}

/// `μ_{i,j} = a μ_{i-1,j} + b μ_{i,j-1} + c` with zero values on both axes,
/// returned as `(N1 + 1)` rows of `N2 + 1` entries.
pub fn mu_recurrence(a: f64, b: f64, c: f64, n1: usize, n2: usize) -> Vec<Vec<f64>> {
    let mut mu = vec![vec![0.0; n2 + 1]; n1 + 1];
    for i in 1..=n1 {
        for j in 1..=n2 {
            mu[i][j] = a * mu[i - 1][j] + b * mu[i][j - 1] + c;
        }
    }
    mu
}

/// `μ_{i,j} = c Σ_{k<j} Σ_{p<i} C(k+p, p) a^p b^k`, binomials built up
/// term by term.
pub fn mu_explicit(a: f64, b: f64, c: f64, i: usize, j: usize) -> f64 {
    if i == 0 || j == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut bk = 1.0;
    for k in 0..j {
        let mut t = bk;
        sum += t;
        for p in 1..i {
            t *= a * (k + p) as f64 / p as f64;
            sum += t;
        }
        bk *= b;
    }
    c * sum
}

/// Checks `max μ_{i,j} ≤ h X c₁ exp((X + Y) b₁ + X a₁)` for
/// `a = 1 + h₁ a₁`, `b = h₁ b₁`, `c = h₁ h c₁`. Requires `h₁ ≤ h₂`.
#[allow(clippy::too_many_arguments)]
pub fn mu_bound_check(a1: f64, b1: f64, c1: f64, h: f64, x_max: f64, y_max: f64, n1: usize, n2: usize) -> Result<bool> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidArgument("cell counts must be positive".into()));
    }
    if [a1, b1, c1, h].iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidArgument("a1, b1, c1 and h must be non-negative".into()));
    }
    let h1 = x_max / n1 as f64;
    let h2 = y_max / n2 as f64;
    if h1 > h2 {
        return Err(Error::InvalidArgument(format!(
            "bound needs h1 <= h2, got h1 = {h1}, h2 = {h2}"
        )));
    }
    let mu = mu_recurrence(1.0 + h1 * a1, h1 * b1, h1 * h * c1, n1, n2);
    let max = mu.iter().flatten().fold(0.0f64, |m, &v| m.max(v));
    let bound = h * x_max * c1 * ((x_max + y_max) * b1 + x_max * a1).exp();
    Ok(max <= bound)
}

/// Source in characteristic variables: `f(x, y) = Φ(x - y, x + y)`.
///
/// The argument order follows `t = x - y`, `ξ = x + y`. Any sign change
/// between the wave operator and `u_xy` is left to the caller.
pub fn characteristic_transform(phi: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Fn2 {
    Arc::new(move |x, y| phi(x - y, x + y))
}
