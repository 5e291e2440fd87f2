//! Cell marching for the basic problem and the linear correction problems.
//!
//! On cell `[x0, x1] × [y0, y1]` with frozen coefficient `c` the solution of
//! `u_xy + c u = g` is
//!
//! ```text
//! u(x, y) = u(x0, y) + ∫_{x0}^{x} R(ξ, y0; x, y) ∂_ξ u(ξ, y0) dξ
//!                    - ∫_{y0}^{y} ∂_η R(x0, η; x, y) u(x0, η) dη
//!                    + ∫_{x0}^{x} ∫_{y0}^{y} R(ξ, η; x, y) g(ξ, η) dη dξ
//! ```
//!
//! Cells are visited in anti-diagonal order so the left and bottom traces, and
//! therefore the corner value that fixes `c`, always come from finished cells
//! or from the axis data.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{ChebBasis, CornerTable, EdgeTrace, Grid, PiecewiseField, Rect, Side};
use crate::kernels::RiemannKernel;
use crate::problem::GoursatProblem;
use crate::series::{adomian, Nonlinearity};

pub const DEFAULT_P: usize = 12;
pub const MIN_P: usize = 4;
pub const MAX_P: usize = 24;

/// Relative tolerance for trace/corner agreement at a cell's lower-left node.
const CORNER_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverOptions {
    /// Chebyshev nodes per direction in every cell.
    pub p: usize,
    /// Clenshaw–Curtis nodes for the variable-limit integrals.
    pub quad: usize,
}

impl SolverOptions {
    pub fn new(p: usize) -> Result<Self> {
        if !(MIN_P..=MAX_P).contains(&p) {
            return Err(Error::InvalidArgument(format!("P = {p} outside {MIN_P}..={MAX_P}")));
        }
        Ok(Self {
            p,
            quad: default_quad(p),
        })
    }
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            p: DEFAULT_P,
            quad: default_quad(DEFAULT_P),
        }
    }
}

pub fn default_quad(p: usize) -> usize {
    p + 4
}

/// Precomputed interpolation and quadrature data for one cell shape.
///
/// For target node `t_i` the integral over `[0, t_i]` uses the quadrature
/// points `s_a t_i`; `interp[i]` maps the `P` node values onto them.
#[derive(Debug, Clone)]
pub struct CellStencil {
    basis: Arc<ChebBasis>,
    h1: f64,
    h2: f64,
    quad_nodes: Vec<f64>,
    quad_weights: Vec<f64>,
    interp: Vec<Vec<f64>>,
    /// `moments[k][i * P + m] = Σ_a w_a α_ia^k interp[i][a, m]` with
    /// `α_ia = t_i (1 - s_a)`.
    moments: Vec<Vec<f64>>,
}

/// Moment matrices kept per stencil. Cells whose kernel series needs more
/// terms fall back to direct kernel evaluation.
const SEPARABLE_TERMS: usize = 48;

impl CellStencil {
    pub fn new(basis: Arc<ChebBasis>, quad: usize, h1: f64, h2: f64) -> Result<Self> {
        let rule = ChebBasis::new(quad)?;
        let quad_nodes = rule.nodes().to_vec();
        let quad_weights = rule.weights().to_vec();
        let interp = basis
            .nodes()
            .iter()
            .map(|&t| quad_nodes.iter().flat_map(|&s| basis.lagrange_row(s * t)).collect())
            .collect::<Vec<Vec<f64>>>();
        let p = basis.len();
        let t = basis.nodes();
        let mut moments = Vec::with_capacity(SEPARABLE_TERMS);
        let mut powers: Vec<Vec<f64>> = (0..p).map(|_| quad_weights.clone()).collect();
        for _ in 0..SEPARABLE_TERMS {
            let mut v = vec![0.0; p * p];
            for i in 0..p {
                for (a, row) in interp[i].chunks_exact(p).enumerate() {
                    for m in 0..p {
                        v[i * p + m] += powers[i][a] * row[m];
                    }
                }
                for (a, pw) in powers[i].iter_mut().enumerate() {
                    *pw *= t[i] * (1.0 - quad_nodes[a]);
                }
            }
            moments.push(v);
        }
        Ok(Self {
            basis,
            h1,
            h2,
            quad_nodes,
            quad_weights,
            interp,
            moments,
        })
    }

    pub fn p(&self) -> usize {
        self.basis.len()
    }

    fn q(&self) -> usize {
        self.quad_nodes.len()
    }

    /// `interp[i] · v` for a vector of node values.
    fn apply(&self, i: usize, v: &[f64]) -> Vec<f64> {
        let p = self.p();
        self.interp[i]
            .chunks_exact(p)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Number of kernel series terms for `C = c h1 h2`, or `None` when the
    /// stored moments do not cover it.
    fn separable_terms(cc: f64) -> Option<usize> {
        let mut term = 1.0f64;
        for k in 0..SEPARABLE_TERMS {
            if term <= 1e-18 {
                return Some(k.max(1));
            }
            term *= cc.abs() / ((k + 1) * (k + 1)) as f64;
        }
        None
    }

    /// Riemann-representation solve on one cell, without snapping the edges
    /// back to the input traces.
    ///
    /// With `z = -C α β` the kernel series `Σ (-C)^k α^k β^k / (k!)²`
    /// separates, so every integral becomes a sum over `k` of products with
    /// the moment matrices.
    fn solve_raw(&self, c: f64, left: &[f64], bottom: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
        let cc = c * self.h1 * self.h2;
        if !(cc.abs() <= crate::kernels::Z_MAX) {
            return Err(Error::KernelRange {
                z: cc,
                max: crate::kernels::Z_MAX,
            });
        }
        let Some(terms) = Self::separable_terms(cc) else {
            return self.solve_raw_direct(c, left, bottom, rhs);
        };
        let p = self.p();
        let t = self.basis.nodes();
        let du: Vec<f64> = self
            .basis
            .differentiate(bottom)
            .into_iter()
            .map(|d| d / self.h1)
            .collect();

        let mut along_x = vec![0.0; p * p];
        let mut along_y = vec![0.0; p * p];
        let mut area = vec![0.0; p * p];
        let mut tmp = vec![0.0; p * p];
        // gamma_k = (-C)^k / (k!)^2, beta_k = (-C)^k / ((k+1)! k!)
        let mut gamma = 1.0;
        let mut beta = 1.0;
        let mut t_pow = vec![1.0; p];
        for k in 0..terms {
            let v = &self.moments[k];
            let vd = mat_vec(v, &du, p);
            let vl = mat_vec(v, left, p);
            // tmp = V rhs, area += gamma (V rhs) V^T
            for i in 0..p {
                for n in 0..p {
                    tmp[i * p + n] = (0..p).map(|m| v[i * p + m] * rhs[m * p + n]).sum();
                }
            }
            for i in 0..p {
                for j in 0..p {
                    let s: f64 = (0..p).map(|n| tmp[i * p + n] * v[j * p + n]).sum();
                    area[i * p + j] += gamma * s;
                    along_x[i * p + j] += gamma * t_pow[j] * vd[i];
                    along_y[i * p + j] += beta * t_pow[i] * vl[j];
                }
            }
            for (tp, &tn) in t_pow.iter_mut().zip(t) {
                *tp *= tn;
            }
            gamma *= -cc / ((k + 1) * (k + 1)) as f64;
            beta *= -cc / ((k + 1) * (k + 2)) as f64;
        }

        let mut u = vec![0.0; p * p];
        for i in 0..p {
            let dx = self.h1 * t[i];
            for j in 0..p {
                let dy = self.h2 * t[j];
                let n = i * p + j;
                u[n] = left[j] + dx * along_x[n] - dy * c * dx * along_y[n] + dx * dy * area[n];
            }
        }
        Ok(u)
    }

    /// Same as [`Self::solve_raw`] with the kernel evaluated at every
    /// quadrature point.
    fn solve_raw_direct(&self, c: f64, left: &[f64], bottom: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
        let p = self.p();
        let q = self.q();
        let kernel = RiemannKernel::new(c);
        let nodes = self.basis.nodes();
        let w = &self.quad_weights;
        let s = &self.quad_nodes;

        let du: Vec<f64> = self
            .basis
            .differentiate(bottom)
            .into_iter()
            .map(|d| d / self.h1)
            .collect();
        let du_q: Vec<Vec<f64>> = (0..p).map(|i| self.apply(i, &du)).collect();
        let left_q: Vec<Vec<f64>> = (0..p).map(|j| self.apply(j, left)).collect();

        // rhs interpolated along x for every target column: h_x[i][a * p + b]
        let h_x: Vec<Vec<f64>> = (0..p)
            .map(|i| {
                let mut out = vec![0.0; q * p];
                for (a, row) in self.interp[i].chunks_exact(p).enumerate() {
                    for (k, &l) in row.iter().enumerate() {
                        if l != 0.0 {
                            for b in 0..p {
                                out[a * p + b] += l * rhs[k * p + b];
                            }
                        }
                    }
                }
                out
            })
            .collect();

        let mut u = vec![0.0; p * p];
        let mut g = vec![0.0; q * q];
        for i in 0..p {
            let dx = self.h1 * nodes[i];
            for j in 0..p {
                let dy = self.h2 * nodes[j];
                if dx == 0.0 || dy == 0.0 {
                    // degenerate rectangle: only the first line integral survives
                    let mut along = 0.0;
                    if dx != 0.0 {
                        for a in 0..q {
                            along += w[a] * du_q[i][a];
                        }
                    }
                    u[i * p + j] = left[j] + dx * along;
                    continue;
                }

                let mut along_x = 0.0;
                for a in 0..q {
                    along_x += w[a] * kernel.value_offset(dx * (s[a] - 1.0), -dy)? * du_q[i][a];
                }
                let mut along_y = 0.0;
                for b in 0..q {
                    along_y += w[b] * kernel.d2_offset(-dx, dy * (s[b] - 1.0))? * left_q[j][b];
                }

                // g = h_x[i] · interp[j]^T
                for a in 0..q {
                    let hrow = &h_x[i][a * p..(a + 1) * p];
                    for (b, lrow) in self.interp[j].chunks_exact(p).enumerate() {
                        g[a * q + b] = hrow.iter().zip(lrow).map(|(x, y)| x * y).sum();
                    }
                }
                let mut area = 0.0;
                for a in 0..q {
                    let mut inner = 0.0;
                    for b in 0..q {
                        inner += w[b] * kernel.value_offset(dx * (s[a] - 1.0), dy * (s[b] - 1.0))? * g[a * q + b];
                    }
                    area += w[a] * inner;
                }

                u[i * p + j] = left[j] + dx * along_x - dy * along_y + dx * dy * area;
            }
        }
        Ok(u)
    }

    /// Solves one cell and copies the input traces onto its left and bottom edges.
    pub fn solve(&self, c: f64, left: &[f64], bottom: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
        let p = self.p();
        let mut u = self.solve_raw(c, left, bottom, rhs)?;
        u[..p].copy_from_slice(&left[..p]);
        for i in 0..p {
            u[i * p] = bottom[i];
        }
        Ok(u)
    }
}

fn mat_vec(m: &[f64], v: &[f64], p: usize) -> Vec<f64> {
    m.chunks_exact(p)
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn check_corner(left: &[f64], bottom: &[f64], corner: f64) -> Result<()> {
    let tol = CORNER_TOL * (1.0 + corner.abs());
    if (left[0] - corner).abs() > tol || (bottom[0] - corner).abs() > tol {
        return Err(Error::CornerMismatch {
            left: left[0],
            bottom: bottom[0],
            corner,
        });
    }
    Ok(())
}

fn check_traces(left: &EdgeTrace, bottom: &EdgeTrace, rect: Rect, p: usize) -> Result<()> {
    if left.values.len() != p || bottom.values.len() != p {
        return Err(Error::InvalidArgument(format!("traces must carry {p} samples")));
    }
    let tol = 1e-12 * (1.0 + rect.width().abs() + rect.height().abs());
    if (left.a - rect.y0).abs() > tol
        || (left.b - rect.y1).abs() > tol
        || (bottom.a - rect.x0).abs() > tol
        || (bottom.b - rect.x1).abs() > tol
    {
        return Err(Error::InvalidArgument("trace intervals do not match the cell".into()));
    }
    Ok(())
}

fn sample_rhs(rhs: &dyn Fn(f64, f64) -> f64, basis: &ChebBasis, rect: Rect) -> Vec<f64> {
    let xs = crate::field::map_nodes_unit(basis.nodes(), rect.x0, rect.x1);
    let ys = crate::field::map_nodes_unit(basis.nodes(), rect.y0, rect.y1);
    xs.iter().flat_map(|&x| ys.iter().map(move |&y| rhs(x, y))).collect()
}

/// Solves `u_xy + c u = rhs` on `rect` from its left and bottom traces via the
/// Riemann representation. Returns the `P × P` node tensor (x-major).
pub fn solve_cell_linear(
    c: f64,
    left: &EdgeTrace,
    bottom: &EdgeTrace,
    corner: f64,
    rhs: &dyn Fn(f64, f64) -> f64,
    rect: Rect,
    p: usize,
) -> Result<Vec<f64>> {
    check_traces(left, bottom, rect, p)?;
    check_corner(&left.values, &bottom.values, corner)?;
    let basis = Arc::new(ChebBasis::new(p)?);
    let stencil = CellStencil::new(basis.clone(), default_quad(p), rect.width(), rect.height())?;
    let f = sample_rhs(rhs, &basis, rect);
    stencil.solve(c, &left.values, &bottom.values, &f)
}

pub const PICARD_TOL: f64 = 1e-13;
pub const PICARD_MAX_ITER: usize = 100;

/// Independent check of [`solve_cell_linear`]: fixed-point iteration of
/// `u = B + ∬ (rhs - c u)` with spectral cumulative integration, where
/// `B(x, y) = u(x0, y) + u(x, y0) - u(x0, y0)`.
#[allow(clippy::too_many_arguments)]
pub fn picard_cell_oracle(
    c: f64,
    left: &EdgeTrace,
    bottom: &EdgeTrace,
    corner: f64,
    rhs: &dyn Fn(f64, f64) -> f64,
    rect: Rect,
    p: usize,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    check_traces(left, bottom, rect, p)?;
    check_corner(&left.values, &bottom.values, corner)?;
    let contraction = c.abs() * rect.width() * rect.height();
    if !(contraction < 1.0) {
        return Err(Error::NoConvergence(format!(
            "|c| h1 h2 = {contraction} is not below 1"
        )));
    }
    let basis = ChebBasis::new(p)?;
    // cumulative integration on [0, 1]: cum[a][k] = ∫_0^{t_a} ℓ_k
    let mut cum = vec![0.0; p * p];
    for a in 0..p {
        let t = basis.nodes()[a];
        for k in 0..p {
            cum[a * p + k] = crate::field::integrate_1d(|s| basis.lagrange_row(s)[k], 0.0, t, p)?;
        }
    }
    let f = sample_rhs(rhs, &basis, rect);
    let base: Vec<f64> = (0..p * p)
        .map(|n| left.values[n % p] + bottom.values[n / p] - corner)
        .collect();

    let mut u = base.clone();
    let mut tmp = vec![0.0; p * p];
    for _ in 0..max_iter {
        let g: Vec<f64> = f.iter().zip(&u).map(|(f, u)| f - c * u).collect();
        // integrate along y, then along x
        for a in 0..p {
            for b in 0..p {
                tmp[a * p + b] = (0..p).map(|k| cum[b * p + k] * g[a * p + k]).sum::<f64>() * rect.height();
            }
        }
        let mut change = 0.0f64;
        for a in 0..p {
            for b in 0..p {
                let v = base[a * p + b] + (0..p).map(|k| cum[a * p + k] * tmp[k * p + b]).sum::<f64>() * rect.width();
                change = change.max((v - u[a * p + b]).abs());
                u[a * p + b] = v;
            }
        }
        if change <= tol {
            return Ok(u);
        }
    }
    Err(Error::NoConvergence(format!("no convergence in {max_iter} iterations")))
}

/// Visits cells in anti-diagonal order. `boundary_left(j)` and
/// `boundary_bottom(i)` supply axis traces; `solve(i, j, left, bottom)` returns
/// the cell tensor. Cells of one diagonal run in parallel.
fn march<L, B, S>(
    grid: Grid,
    basis: Arc<ChebBasis>,
    boundary_left: L,
    boundary_bottom: B,
    solve: S,
) -> Result<PiecewiseField>
where
    L: Fn(usize) -> Vec<f64> + Sync,
    B: Fn(usize) -> Vec<f64> + Sync,
    S: Fn(usize, usize, &[f64], &[f64]) -> Result<Vec<f64>> + Sync,
{
    let mut field = PiecewiseField::zeros(grid, basis);
    let mut done = vec![false; grid.n1 * grid.n2];
    for d in 0..grid.n1 + grid.n2 - 1 {
        let lo = d.saturating_sub(grid.n2 - 1);
        let hi = d.min(grid.n1 - 1);
        let cells: Vec<(usize, usize)> = (lo..=hi).map(|i| (i, d - i)).collect();
        let field_ref = &field;
        let done_ref = &done;
        let solved: Vec<Vec<f64>> = cells
            .par_iter()
            .map(|&(i, j)| {
                let left = if i == 0 {
                    boundary_left(j)
                } else {
                    assert!(
                        done_ref[(i - 1) * grid.n2 + j],
                        "cell ({i}, {j}) read before its left neighbour"
                    );
                    field_ref.edge_trace(i - 1, j, Side::Right).values
                };
                let mut bottom = if j == 0 {
                    boundary_bottom(i)
                } else {
                    assert!(
                        done_ref[i * grid.n2 + j - 1],
                        "cell ({i}, {j}) read before its lower neighbour"
                    );
                    field_ref.edge_trace(i, j - 1, Side::Top).values
                };
                check_corner(&left, &bottom, left[0]).map_err(|e| e.at_cell(i, j))?;
                bottom[0] = left[0];
                solve(i, j, &left, &bottom).map_err(|e| e.at_cell(i, j))
            })
            .collect::<Result<_>>()?;
        for ((i, j), tensor) in cells.into_iter().zip(solved) {
            field.cell_mut(i, j).copy_from_slice(&tensor);
            done[i * grid.n2 + j] = true;
        }
    }
    Ok(field)
}

/// The corrections `u^(0..=m)` of the FD expansion together with the data
/// each later correction reads: corner tables and frozen cell coefficients.
#[derive(Debug, Clone)]
pub struct FdExpansion {
    problem: GoursatProblem,
    grid: Grid,
    opts: SolverOptions,
    stencil: CellStencil,
    corrections: Vec<PiecewiseField>,
    corners: Vec<CornerTable>,
    cell_coeffs: Vec<f64>,
}

impl FdExpansion {
    /// Solves the basic problem (rank 0).
    pub fn solve_basic(problem: &GoursatProblem, grid: Grid, opts: SolverOptions) -> Result<Self> {
        if grid.x_max != problem.x_max || grid.y_max != problem.y_max {
            return Err(Error::InvalidArgument(
                "grid extents differ from the problem domain".into(),
            ));
        }
        let basis = Arc::new(ChebBasis::new(opts.p)?);
        let stencil = CellStencil::new(basis.clone(), opts.quad, grid.h1(), grid.h2())?;
        let nl = &problem.nonlinearity;
        let proto = PiecewiseField::zeros(grid, basis.clone());

        let u0 = march(
            grid,
            basis,
            |j| proto.cell_nodes(0, j).1.into_iter().map(|y| (problem.phi)(y)).collect(),
            |i| proto.cell_nodes(i, 0).0.into_iter().map(|x| (problem.psi)(x)).collect(),
            |i, j, left, bottom| {
                let c = nl.eval(left[0]);
                let (xs, ys) = proto.cell_nodes(i, j);
                let f: Vec<f64> = xs
                    .iter()
                    .flat_map(|&x| ys.iter().map(move |&y| (problem.source)(x, y)))
                    .collect();
                stencil.solve(c, left, bottom, &f)
            },
        )?;

        let table = CornerTable::from_field(&u0);
        let cell_coeffs = (0..grid.n1)
            .flat_map(|i| (0..grid.n2).map(move |j| (i, j)))
            .map(|(i, j)| nl.eval(table.get(i, j)))
            .collect();
        Ok(Self {
            problem: problem.clone(),
            grid,
            opts,
            stencil,
            corrections: vec![u0],
            corners: vec![table],
            cell_coeffs,
        })
    }

    pub fn problem(&self) -> &GoursatProblem {
        &self.problem
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn options(&self) -> SolverOptions {
        self.opts
    }

    /// Highest correction index computed so far.
    pub fn rank(&self) -> usize {
        self.corrections.len() - 1
    }

    pub fn corrections(&self) -> &[PiecewiseField] {
        &self.corrections
    }

    pub fn correction(&self, k: usize) -> &PiecewiseField {
        &self.corrections[k]
    }

    pub fn corner_table(&self, k: usize) -> &CornerTable {
        &self.corners[k]
    }

    /// Frozen coefficient `N(u^(0)(x_i, y_j))` of cell `(i, j)`.
    pub fn cell_coeff(&self, i: usize, j: usize) -> f64 {
        self.cell_coeffs[i * self.grid.n2 + j]
    }

    /// `u^(0) + ... + u^(m)`.
    pub fn partial_sum(&self, m: usize) -> PiecewiseField {
        assert!(m <= self.rank(), "rank {m} not computed (have {})", self.rank());
        let mut sum = self.corrections[0].clone();
        for c in &self.corrections[1..=m] {
            sum.add_assign(c);
        }
        sum
    }

    fn nl(&self) -> &Nonlinearity {
        &self.problem.nonlinearity
    }

    /// Adomian polynomials of the corner values `u⊥^(0..k-1)` with a zero
    /// top slot: `A_0..A_k`.
    fn corner_adomian(&self, k: usize, i: usize, j: usize) -> Result<Vec<f64>> {
        let mut perp: Vec<f64> = (0..k).map(|s| self.corners[s].get(i, j)).collect();
        perp.push(0.0);
        adomian(self.nl(), &perp)
    }

    /// `F^(k)` given the corner Adomian values and the continuous values `u^(0..k-1)(x, y)`.
    fn source_from(&self, k: usize, a_perp: &[f64], cont: &[f64]) -> Result<f64> {
        let a_cont = adomian(self.nl(), cont)?;
        let mut f = 0.0;
        for s in 1..k {
            f -= a_perp[k - s] * cont[s];
        }
        for s in 0..k {
            f += (a_perp[k - 1 - s] - a_cont[k - 1 - s]) * cont[s];
        }
        f -= a_perp[k] * cont[0];
        Ok(f)
    }

    /// Right-hand side `F^(k)(x, y)` of the k-th correction problem on cell
    /// `(i, j)`. Needs corrections `0..k-1`.
    pub fn correction_rhs(&self, k: usize, i: usize, j: usize, x: f64, y: f64) -> Result<f64> {
        if k == 0 || k > self.corrections.len() {
            return Err(Error::InvalidArgument(format!("F^({k}) needs corrections 0..{k}")));
        }
        let rect = self.grid.cell(i, j);
        if !(rect.x0 <= x && x <= rect.x1 && rect.y0 <= y && y <= rect.y1) {
            return Err(Error::OutOfDomain { x, y });
        }
        let a_perp = self.corner_adomian(k, i, j)?;
        let cont: Vec<f64> = self.corrections[..k]
            .iter()
            .map(|u| u.eval_in_cell(i, j, x, y))
            .collect();
        self.source_from(k, &a_perp, &cont)
    }

    /// Cell-node samples of the full source of correction `k`:
    /// `F^(k) - N'(u⊥^(0)) u⊥^(k) u^(0)`.
    fn correction_cell_source(&self, k: usize, i: usize, j: usize, corner_k: f64) -> Result<Vec<f64>> {
        let p = self.opts.p;
        let a_perp = self.corner_adomian(k, i, j)?;
        let slope = self.nl().deriv(self.corners[0].get(i, j)) * corner_k;
        let cells: Vec<&[f64]> = self.corrections[..k].iter().map(|u| u.cell(i, j)).collect();
        let mut cont = vec![0.0; k];
        let mut out = Vec::with_capacity(p * p);
        for n in 0..p * p {
            for (s, cell) in cells.iter().enumerate() {
                cont[s] = cell[n];
            }
            out.push(self.source_from(k, &a_perp, &cont)? - slope * cont[0]);
        }
        Ok(out)
    }

    /// Sup of `|F^(k)|` over all cell nodes.
    pub fn source_norm(&self, k: usize) -> Result<f64> {
        if k == 0 || k > self.corrections.len() {
            return Err(Error::InvalidArgument(format!("F^({k}) needs corrections 0..{k}")));
        }
        let p = self.opts.p;
        let mut worst = 0.0f64;
        let mut cont = vec![0.0; k];
        for i in 0..self.grid.n1 {
            for j in 0..self.grid.n2 {
                let a_perp = self.corner_adomian(k, i, j)?;
                for n in 0..p * p {
                    for (s, u) in self.corrections[..k].iter().enumerate() {
                        cont[s] = u.cell(i, j)[n];
                    }
                    worst = worst.max(self.source_from(k, &a_perp, &cont)?.abs());
                }
            }
        }
        Ok(worst)
    }

    /// Computes `u^(k)` from corrections `0..k-1`; `k` may not exceed `rank + 1`.
    pub fn solve_correction(&self, k: usize) -> Result<PiecewiseField> {
        if k == 0 || k > self.corrections.len() {
            return Err(Error::InvalidArgument(format!(
                "correction {k} needs corrections 0..{k}, have 0..={}",
                self.rank()
            )));
        }
        let p = self.opts.p;
        march(
            self.grid,
            self.corrections[0].basis().clone(),
            |_| vec![0.0; p],
            |_| vec![0.0; p],
            |i, j, left, bottom| {
                let g = self.correction_cell_source(k, i, j, left[0])?;
                self.stencil.solve(self.cell_coeff(i, j), left, bottom, &g)
            },
        )
    }

    /// Appends the next correction.
    pub fn extend(&mut self) -> Result<()> {
        let next = self.solve_correction(self.corrections.len())?;
        self.corners.push(CornerTable::from_field(&next));
        self.corrections.push(next);
        Ok(())
    }

    /// Extends the expansion up to rank `m`.
    pub fn extend_to(&mut self, m: usize) -> Result<()> {
        while self.rank() < m {
            self.extend()?;
        }
        Ok(())
    }

    /// Per-cell sup over interior nodes of `|u_xy + c u - f|` for `u^(0)`.
    pub fn residual_basic(&self) -> Vec<f64> {
        let u = &self.corrections[0];
        self.cell_residuals(
            |i, j| {
                let (xs, ys) = u.cell_nodes(i, j);
                xs.iter()
                    .flat_map(|&x| ys.iter().map(move |&y| (self.problem.source)(x, y)))
                    .collect()
            },
            0,
        )
    }

    /// Per-cell sup over interior nodes of the residual of correction `k ≥ 1`:
    /// `|u_xy + c u + N'(u⊥^(0)) u⊥^(k) u^(0) - F^(k)|`.
    pub fn residual_correction(&self, k: usize) -> Result<Vec<f64>> {
        if k == 0 || k > self.rank() {
            return Err(Error::InvalidArgument(format!("correction {k} not available")));
        }
        let mut sources = Vec::with_capacity(self.grid.n1 * self.grid.n2);
        for i in 0..self.grid.n1 {
            for j in 0..self.grid.n2 {
                sources.push(self.correction_cell_source(k, i, j, self.corners[k].get(i, j))?);
            }
        }
        Ok(self.cell_residuals(|i, j| sources[i * self.grid.n2 + j].clone(), k))
    }

    fn cell_residuals(&self, source: impl Fn(usize, usize) -> Vec<f64>, k: usize) -> Vec<f64> {
        let p = self.opts.p;
        let u = &self.corrections[k];
        let mut out = Vec::with_capacity(self.grid.n1 * self.grid.n2);
        for i in 0..self.grid.n1 {
            for j in 0..self.grid.n2 {
                let c = self.cell_coeff(i, j);
                let uxy = u.cell_mixed_derivative(i, j);
                let vals = u.cell(i, j);
                let g = source(i, j);
                let mut worst = 0.0f64;
                for a in 1..p - 1 {
                    for b in 1..p - 1 {
                        let n = a * p + b;
                        worst = worst.max((uxy[n] + c * vals[n] - g[n]).abs());
                    }
                }
                out.push(worst);
            }
        }
        out
    }
}

/// Solves the basic problem; see [`FdExpansion::solve_basic`].
pub fn solve_basic(problem: &GoursatProblem, grid: Grid, opts: SolverOptions) -> Result<FdExpansion> {
    FdExpansion::solve_basic(problem, grid, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::hyp0f1;

    fn zero_trace(a: f64, b: f64, p: usize) -> EdgeTrace {
        EdgeTrace::new(a, b, vec![0.0; p]).unwrap()
    }

    #[test]
    fn zero_data_gives_zero() {
        let r = Rect::new(0.0, 0.3, 0.1, 0.4);
        let u = solve_cell_linear(
            2.3,
            &zero_trace(0.1, 0.4, 8),
            &zero_trace(0.0, 0.3, 8),
            0.0,
            &|_, _| 0.0,
            r,
            8,
        )
        .unwrap();
        assert!(u.iter().all(|&v| v == 0.0));
        let v = picard_cell_oracle(
            2.3,
            &zero_trace(0.1, 0.4, 8),
            &zero_trace(0.0, 0.3, 8),
            0.0,
            &|_, _| 0.0,
            r,
            8,
            1e-13,
            100,
        )
        .unwrap();
        assert!(v.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn double_integration_when_uncoupled() {
        let h = 0.4;
        let p = 12;
        let r = Rect::new(0.0, h, 0.0, h);
        let u = solve_cell_linear(
            0.0,
            &zero_trace(0.0, h, p),
            &zero_trace(0.0, h, p),
            0.0,
            &|_, _| 1.0,
            r,
            p,
        )
        .unwrap();
        let nodes = crate::field::cheb_nodes(p, 0.0, h).unwrap();
        for a in 0..p {
            for b in 0..p {
                assert!((u[a * p + b] - nodes[a] * nodes[b]).abs() <= 1e-12);
            }
        }
        // Picard with c = 0 needs a single sweep to land on B + ∬ rhs
        let v = picard_cell_oracle(
            0.0,
            &zero_trace(0.0, h, p),
            &zero_trace(0.0, h, p),
            0.0,
            &|_, _| 1.0,
            r,
            p,
            1e-13,
            2,
        )
        .unwrap();
        for (a, b) in u.iter().zip(&v) {
            assert!((a - b).abs() <= 1e-13);
        }
    }

    #[test]
    fn unit_data_reproduces_kernel() {
        let p = 12;
        let r = Rect::new(0.0, 0.5, 0.0, 0.5);
        let one = EdgeTrace::new(0.0, 0.5, vec![1.0; p]).unwrap();
        let u = solve_cell_linear(1.0, &one, &one, 1.0, &|_, _| 0.0, r, p).unwrap();
        let nodes = crate::field::cheb_nodes(p, 0.0, 0.5).unwrap();
        for a in 0..p {
            for b in 0..p {
                let want = hyp0f1(1.0, -nodes[a] * nodes[b]).unwrap();
                assert!((u[a * p + b] - want).abs() <= 1e-10, "{} vs {want}", u[a * p + b]);
            }
        }
    }

    #[test]
    fn separable_sum_matches_direct_kernel() {
        let p = 12;
        let basis = Arc::new(ChebBasis::new(p).unwrap());
        let left: Vec<f64> = basis.nodes().iter().map(|y| 0.3 + y.sin()).collect();
        let bottom: Vec<f64> = basis.nodes().iter().map(|x| 0.3 + x * x - 2.0 * x).collect();
        let rhs: Vec<f64> = (0..p * p)
            .map(|n| ((n % p) as f64 * 0.3).cos() + (n / p) as f64 * 0.1)
            .collect();
        for &(c, h) in &[(-2.0, 0.05), (4.7, 0.25), (-30.0, 1.0), (90.0, 1.5)] {
            let st = CellStencil::new(basis.clone(), default_quad(p), h, 0.8 * h).unwrap();
            let a = st.solve_raw(c, &left, &bottom, &rhs).unwrap();
            let b = st.solve_raw_direct(c, &left, &bottom, &rhs).unwrap();
            let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let d = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            assert!(d <= 1e-13 * scale, "c = {c}, h = {h}: {d:e}");
        }
        assert!(CellStencil::separable_terms(90.0 * 1.5 * 1.2).is_none());
        assert!(CellStencil::separable_terms(0.0) == Some(1));
    }

    #[test]
    fn representation_is_exact_on_edges() {
        let p = 10;
        let basis = Arc::new(ChebBasis::new(p).unwrap());
        let st = CellStencil::new(basis.clone(), default_quad(p), 0.25, 0.2).unwrap();
        let t = basis.nodes();
        let left: Vec<f64> = t.iter().map(|s| 1.0 + (0.2 * s).sin()).collect();
        let bottom: Vec<f64> = t.iter().map(|s| 1.0 + 0.25 * s * 0.25 * s - 0.25 * s).collect();
        let rhs: Vec<f64> = (0..p * p).map(|n| (n as f64 * 0.01).cos()).collect();
        let u = st.solve_raw(-3.0, &left, &bottom, &rhs).unwrap();
        for k in 0..p {
            assert!((u[k] - left[k]).abs() <= 1e-10);
            assert!((u[k * p] - bottom[k]).abs() <= 1e-10);
        }
    }

    #[test]
    fn corner_mismatch_rejected() {
        let r = Rect::new(0.0, 0.5, 0.0, 0.5);
        let one = EdgeTrace::new(0.0, 0.5, vec![1.0; 6]).unwrap();
        let err = solve_cell_linear(1.0, &one, &one, 1.1, &|_, _| 0.0, r, 6).unwrap_err();
        assert!(matches!(err, Error::CornerMismatch { .. }));
        let big = Rect::new(0.0, 2.0, 0.0, 2.0);
        let two = EdgeTrace::new(0.0, 2.0, vec![1.0; 6]).unwrap();
        assert!(matches!(
            picard_cell_oracle(1.0, &two, &two, 1.0, &|_, _| 0.0, big, 6, 1e-13, 100),
            Err(Error::NoConvergence(_))
        ));
    }

    fn linear_problem(c: f64) -> GoursatProblem {
        GoursatProblem::new(
            "linear",
            1.0,
            1.0,
            Arc::new(|x| x.sin()),
            Arc::new(|y| 2.0 * y),
            Arc::new(|x, y| x + y),
            Nonlinearity::constant(c),
        )
        .unwrap()
    }

    #[test]
    fn zero_problem_stays_zero() {
        let zero = GoursatProblem::new(
            "zero",
            1.0,
            1.0,
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
            Arc::new(|_, _| 0.0),
            Nonlinearity::Polynomial(vec![0.0, 0.0]),
        )
        .unwrap();
        let grid = Grid::new(1.0, 1.0, 3, 3).unwrap();
        let mut e = solve_basic(&zero, grid, SolverOptions::new(6).unwrap()).unwrap();
        e.extend_to(2).unwrap();
        assert!(e.partial_sum(2).values().iter().all(|&v| v == 0.0));
        assert!(e.residual_basic().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn linear_nonlinearity_has_vanishing_corrections() {
        let grid = Grid::new(1.0, 1.0, 3, 2).unwrap();
        let mut e = solve_basic(&linear_problem(1.7), grid, SolverOptions::new(8).unwrap()).unwrap();
        e.extend_to(3).unwrap();
        for k in 1..=3 {
            assert!(
                e.correction(k).max_abs() == 0.0,
                "u^({k}) = {}",
                e.correction(k).max_abs()
            );
            assert_eq!(e.correction_rhs(k, 1, 1, 0.5, 0.7).unwrap(), 0.0);
        }
        assert!(e.residual_basic().iter().all(|&r| r <= 1e-8));
    }

    #[test]
    fn manufactured_bilinear_solution() {
        let prob = GoursatProblem::new(
            "xy",
            1.0,
            2.0,
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
            Arc::new(|_, _| 1.0),
            Nonlinearity::constant(0.0),
        )
        .unwrap();
        let grid = Grid::new(1.0, 2.0, 2, 3).unwrap();
        let e = solve_basic(&prob, grid, SolverOptions::new(6).unwrap()).unwrap();
        assert!(e.residual_basic().iter().all(|&r| r <= 1e-12));
        let u = e.correction(0);
        assert!((u.eval(0.77, 1.31).unwrap() - 0.77 * 1.31).abs() <= 1e-12);
    }

    #[test]
    fn boundary_data_and_corner_invariants() {
        let prob = GoursatProblem::pr1();
        let grid = Grid::new(4.0, 4.0, 4, 4).unwrap();
        let mut e = solve_basic(&prob, grid, SolverOptions::default()).unwrap();
        e.extend_to(2).unwrap();
        let u0 = e.correction(0);
        for j in 0..4 {
            let t = u0.edge_trace(0, j, Side::Left);
            for (v, y) in t.values.iter().zip(t.nodes()) {
                assert!((v - (prob.phi)(y)).abs() <= 1e-12);
            }
        }
        for i in 0..4 {
            let t = u0.edge_trace(i, 0, Side::Bottom);
            for (v, x) in t.values.iter().zip(t.nodes()) {
                assert!((v - (prob.psi)(x)).abs() <= 1e-12);
            }
        }
        for k in 1..=2 {
            let uk = e.correction(k);
            for j in 0..4 {
                assert!(uk.edge_trace(0, j, Side::Left).values.iter().all(|v| v.abs() <= 1e-12));
                assert!(uk
                    .edge_trace(j, 0, Side::Bottom)
                    .values
                    .iter()
                    .all(|v| v.abs() <= 1e-12));
            }
        }
        for k in 0..=2 {
            let f = e.correction(k);
            assert!(f.edge_mismatch() <= 1e-10 * (1.0 + f.max_abs()));
            let t = e.corner_table(k);
            for i in 0..=4 {
                for j in 0..=4 {
                    let v = f.eval(grid.x(i), grid.y(j)).unwrap();
                    assert!((t.get(i, j) - v).abs() <= 1e-12 * v.abs().max(1e-300));
                }
            }
        }
        // frozen coefficients are negative for pr1: modified Bessel branch
        for i in 0..4 {
            for j in 0..4 {
                assert!(e.cell_coeff(i, j) < 0.0);
            }
        }
        let s = e.partial_sum(2);
        let manual = e.correction(0).eval(1.3, 2.9).unwrap()
            + e.correction(1).eval(1.3, 2.9).unwrap()
            + e.correction(2).eval(1.3, 2.9).unwrap();
        assert!((s.eval(1.3, 2.9).unwrap() - manual).abs() <= 1e-14);
    }

    #[test]
    fn first_correction_source_vanishes_at_corner() {
        let grid = Grid::new(4.0, 4.0, 4, 4).unwrap();
        let mut e = solve_basic(&GoursatProblem::pr1(), grid, SolverOptions::default()).unwrap();
        e.extend().unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(e.correction_rhs(1, i, j, grid.x(i), grid.y(j)).unwrap(), 0.0);
            }
        }
        assert!(e.solve_correction(5).is_err());
        assert!(e.correction_rhs(3, 0, 0, 0.1, 0.1).is_err());
    }

    #[test]
    fn bit_identical_across_worker_counts() {
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let grid = Grid::new(4.0, 4.0, 12, 9).unwrap();
                let mut e = solve_basic(&GoursatProblem::pr1(), grid, SolverOptions::new(8).unwrap()).unwrap();
                e.extend_to(3).unwrap();
                e.partial_sum(3)
                    .values()
                    .iter()
                    .map(|v| v.to_bits())
                    .collect::<Vec<_>>()
            })
        };
        let one = run(1);
        assert_eq!(one, run(3));
        assert_eq!(one, run(1));
    }

    proptest::proptest! {
        #[test]
        fn riemann_solve_matches_picard(
            seed in 0u64..u64::MAX,
        ) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let cell = crate::selftest::RandomCell::draw(&mut rng, DEFAULT_P);
            proptest::prop_assume!(cell.c.abs() * cell.rect.width() * cell.rect.height() <= 0.5);
            let (left, bottom) = cell.traces();
            let u = solve_cell_linear(cell.c, &left, &bottom, cell.corner, &*cell.rhs, cell.rect, DEFAULT_P).unwrap();
            let v = picard_cell_oracle(
                cell.c, &left, &bottom, cell.corner, &*cell.rhs, cell.rect, DEFAULT_P, PICARD_TOL, PICARD_MAX_ITER,
            )
            .unwrap();
            let gap = u.iter().zip(&v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            proptest::prop_assert!(gap <= 1e-10, "gap {gap:e}");
        }
    }
}
