//! Uniform mesh and per-cell Chebyshev representation of functions on the
//! rectangle `[0, X] × [0, Y]`.
//!
//! Every cell carries a `P × P` tensor of samples at Chebyshev–Gauss–Lobatto
//! nodes. Nodes include the cell edges, so neighbouring cells share their edge
//! samples and a field is continuous whenever those samples agree.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};

pub const MIN_NODES: usize = 2;

/// `P` Chebyshev–Gauss–Lobatto points on `[a, b]`, ascending, endpoints exact.
pub fn cheb_nodes(p: usize, a: f64, b: f64) -> Result<Vec<f64>> {
    if p < MIN_NODES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_NODES} nodes, got {p}"
        )));
    }
    if !(a < b) {
        return Err(Error::InvalidArgument(format!("empty interval [{a}, {b}]")));
    }
    Ok(map_nodes(&reference_nodes(p), a, b))
}

/// CGL points on `[-1, 1]` in the symmetric sine form, so mirrored nodes are
/// exact negatives of each other.
fn reference_nodes(p: usize) -> Vec<f64> {
    let n = (p - 1) as f64;
    (0..p).map(|k| (PI * (2.0 * k as f64 - n) / (2.0 * n)).sin()).collect()
}

fn map_nodes(s: &[f64], a: f64, b: f64) -> Vec<f64> {
    let last = s.len() - 1;
    s.iter()
        .enumerate()
        .map(|(k, &s)| match k {
            0 => a,
            k if k == last => b,
            _ => a + (b - a) * 0.5 * (1.0 + s),
        })
        .collect()
}

/// Clenshaw–Curtis weights on `[-1, 1]` for the CGL points of [`reference_nodes`].
fn clenshaw_curtis_weights(p: usize) -> Vec<f64> {
    let n = p - 1;
    if n == 0 {
        return vec![2.0];
    }
    let nf = n as f64;
    let mut w = vec![0.0; p];
    for (k, wk) in w.iter_mut().enumerate() {
        let theta = PI * k as f64 / nf;
        let mut v = 1.0;
        for j in 1..=n / 2 {
            let b = if 2 * j == n { 1.0 } else { 2.0 };
            v -= b * (2.0 * j as f64 * theta).cos() / (4.0 * (j * j) as f64 - 1.0);
        }
        let c = if k == 0 || k == n { 1.0 } else { 2.0 };
        *wk = c * v / nf;
    }
    // formula is written for descending cos nodes; the rule is symmetric
    w
}

/// Nodes, barycentric weights, differentiation and quadrature on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebBasis {
    p: usize,
    nodes: Vec<f64>,
    bary: Vec<f64>,
    diff: Vec<f64>,
    quad: Vec<f64>,
}

impl ChebBasis {
    pub fn new(p: usize) -> Result<Self> {
        if p < MIN_NODES {
            return Err(Error::InvalidArgument(format!(
                "need at least {MIN_NODES} nodes, got {p}"
            )));
        }
        let nodes = map_nodes(&reference_nodes(p), 0.0, 1.0);
        let bary: Vec<f64> = (0..p)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                if k == 0 || k == p - 1 {
                    0.5 * sign
                } else {
                    sign
                }
            })
            .collect();
        let mut diff = vec![0.0; p * p];
        for i in 0..p {
            let mut row_sum = 0.0;
            for j in 0..p {
                if i != j {
                    let d = (bary[j] / bary[i]) / (nodes[i] - nodes[j]);
                    diff[i * p + j] = d;
                    row_sum += d;
                }
            }
            diff[i * p + i] = -row_sum;
        }
        let quad = clenshaw_curtis_weights(p).into_iter().map(|w| 0.5 * w).collect();
        Ok(Self {
            p,
            nodes,
            bary,
            diff,
            quad,
        })
    }

    pub fn len(&self) -> usize {
        self.p
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Nodes on `[0, 1]`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Quadrature weights on `[0, 1]`.
    pub fn weights(&self) -> &[f64] {
        &self.quad
    }

    /// Row-major differentiation matrix on `[0, 1]`.
    pub fn diff_matrix(&self) -> &[f64] {
        &self.diff
    }

    /// Values of the `P` Lagrange basis polynomials at `s ∈ [0, 1]`.
    pub fn lagrange_row(&self, s: f64) -> Vec<f64> {
        let mut row = vec![0.0; self.p];
        if let Some(k) = self.nodes.iter().position(|&t| t == s) {
            row[k] = 1.0;
            return row;
        }
        let mut denom = 0.0;
        for k in 0..self.p {
            let t = self.bary[k] / (s - self.nodes[k]);
            row[k] = t;
            denom += t;
        }
        for r in row.iter_mut() {
            *r /= denom;
        }
        row
    }

    /// Barycentric interpolation of node `values` at `s ∈ [0, 1]`.
    pub fn interpolate(&self, values: &[f64], s: f64) -> f64 {
        debug_assert_eq!(values.len(), self.p);
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..self.p {
            let d = s - self.nodes[k];
            if d == 0.0 {
                return values[k];
            }
            let t = self.bary[k] / d;
            num += t * values[k];
            den += t;
        }
        num / den
    }

    /// Derivative values on `[0, 1]`.
    pub fn differentiate(&self, values: &[f64]) -> Vec<f64> {
        (0..self.p)
            .map(|i| {
                self.diff[i * self.p..(i + 1) * self.p]
                    .iter()
                    .zip(values)
                    .map(|(d, v)| d * v)
                    .sum()
            })
            .collect()
    }
}

/// Clenshaw–Curtis quadrature of `g` on `[a, b]` with `p` nodes. Exact for
/// polynomials of degree `p - 1`; an empty interval gives exactly zero.
pub fn integrate_1d(g: impl Fn(f64) -> f64, a: f64, b: f64, p: usize) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a < b) {
        return Err(Error::InvalidArgument(format!(
            "integration limits [{a}, {b}] reversed"
        )));
    }
    let nodes = cheb_nodes(p, a, b)?;
    let w = clenshaw_curtis_weights(p);
    let half = 0.5 * (b - a);
    Ok(nodes.iter().zip(&w).map(|(&x, &w)| w * g(x)).sum::<f64>() * half)
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

/// Tensor Clenshaw–Curtis quadrature over `rect` with `p × p` nodes.
pub fn integrate_2d(g: impl Fn(f64, f64) -> f64, rect: Rect, p: usize) -> Result<f64> {
    if !(rect.y0 <= rect.y1) {
        return Err(Error::InvalidArgument(format!(
            "integration limits [{}, {}] reversed",
            rect.y0, rect.y1
        )));
    }
    if p < MIN_NODES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_NODES} nodes, got {p}"
        )));
    }
    // inner integral cannot fail once the limits are checked
    integrate_1d(
        |x| integrate_1d(|y| g(x, y), rect.y0, rect.y1, p).unwrap_or(0.0),
        rect.x0,
        rect.x1,
        p,
    )
}

/// Uniform mesh `x_i = i h1`, `y_j = j h2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x_max: f64,
    pub y_max: f64,
    pub n1: usize,
    pub n2: usize,
}

impl Grid {
    pub fn new(x_max: f64, y_max: f64, n1: usize, n2: usize) -> Result<Self> {
        if !(x_max > 0.0 && y_max > 0.0 && x_max.is_finite() && y_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "domain extents {x_max} x {y_max} must be positive"
            )));
        }
        if n1 == 0 || n2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "cell counts must be positive, got {n1} x {n2}"
            )));
        }
        Ok(Self { x_max, y_max, n1, n2 })
    }

    pub fn h1(&self) -> f64 {
        self.x_max / self.n1 as f64
    }

    pub fn h2(&self) -> f64 {
        self.y_max / self.n2 as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.n1 {
            self.x_max
        } else {
            i as f64 * self.h1()
        }
    }

    pub fn y(&self, j: usize) -> f64 {
        if j == self.n2 {
            self.y_max
        } else {
            j as f64 * self.h2()
        }
    }

    pub fn cell(&self, i: usize, j: usize) -> Rect {
        Rect::new(self.x(i), self.x(i + 1), self.y(j), self.y(j + 1))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let tol_x = 1e-12 * self.x_max;
        let tol_y = 1e-12 * self.y_max;
        x >= -tol_x && x <= self.x_max + tol_x && y >= -tol_y && y <= self.y_max + tol_y
    }

    /// Owning cell of `(x, y)`; points on a shared edge go to the lower index.
    pub fn locate(&self, x: f64, y: f64) -> Result<(usize, usize)> {
        if !self.contains(x, y) {
            return Err(Error::OutOfDomain { x, y });
        }
        let idx = |v: f64, h: f64, n: usize, node: &dyn Fn(usize) -> f64| {
            let mut k = ((v / h).floor().max(0.0) as usize).min(n - 1);
            if k > 0 && v <= node(k) {
                k -= 1;
            }
            if k + 1 < n && v > node(k + 1) {
                k += 1;
            }
            k
        };
        Ok((
            idx(x, self.h1(), self.n1, &|i| self.x(i)),
            idx(y, self.h2(), self.n2, &|j| self.y(j)),
        ))
    }
}

/// Which side of a cell an [`EdgeTrace`] is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Bottom,
    Right,
    Top,
}

/// A one-dimensional function given by its samples at the CGL nodes of `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeTrace {
    pub a: f64,
    pub b: f64,
    pub values: Vec<f64>,
    basis: Arc<ChebBasis>,
}

impl EdgeTrace {
    pub fn new(a: f64, b: f64, values: Vec<f64>) -> Result<Self> {
        let basis = Arc::new(ChebBasis::new(values.len())?);
        Self::with_basis(a, b, values, basis)
    }

    pub(crate) fn with_basis(a: f64, b: f64, values: Vec<f64>, basis: Arc<ChebBasis>) -> Result<Self> {
        if !(a < b) {
            return Err(Error::InvalidArgument(format!("empty trace interval [{a}, {b}]")));
        }
        if values.len() != basis.len() {
            return Err(Error::InvalidArgument("trace length does not match the basis".into()));
        }
        Ok(Self { a, b, values, basis })
    }

    /// Samples `g` at the `p` CGL nodes of `[a, b]`.
    pub fn sample(g: impl Fn(f64) -> f64, a: f64, b: f64, p: usize) -> Result<Self> {
        let values = cheb_nodes(p, a, b)?.into_iter().map(g).collect();
        Self::new(a, b, values)
    }

    pub fn nodes(&self) -> Vec<f64> {
        map_nodes(&reference_nodes(self.values.len()), self.a, self.b)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.basis.interpolate(&self.values, (t - self.a) / (self.b - self.a))
    }

    pub fn derivative(&self) -> EdgeTrace {
        let scale = 1.0 / (self.b - self.a);
        let values = self
            .basis
            .differentiate(&self.values)
            .into_iter()
            .map(|d| d * scale)
            .collect();
        Self {
            a: self.a,
            b: self.b,
            values,
            basis: self.basis.clone(),
        }
    }
}

/// Derivative of a trace on its interval.
pub fn edge_derivative(trace: &EdgeTrace) -> EdgeTrace {
    trace.derivative()
}

/// A function on the mesh stored as per-cell `P × P` CGL tensors.
///
/// Cell `(i, j)` covers `[x_i, x_{i+1}] × [y_j, y_{j+1}]`; its tensor is
/// row-major in the x-node index, i.e. sample `(a, b)` sits at `a * P + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseField {
    grid: Grid,
    basis: Arc<ChebBasis>,
    values: Vec<f64>,
}

impl PiecewiseField {
    pub fn zeros(grid: Grid, basis: Arc<ChebBasis>) -> Self {
        let p = basis.len();
        Self {
            grid,
            basis,
            values: vec![0.0; grid.n1 * grid.n2 * p * p],
        }
    }

    /// Samples `g` at every cell node.
    pub fn sample(grid: Grid, p: usize, g: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let basis = Arc::new(ChebBasis::new(p)?);
        let mut field = Self::zeros(grid, basis);
        for i in 0..grid.n1 {
            for j in 0..grid.n2 {
                let (xs, ys) = field.cell_nodes(i, j);
                let cell = field.cell_mut(i, j);
                for (a, &x) in xs.iter().enumerate() {
                    for (b, &y) in ys.iter().enumerate() {
                        cell[a * p + b] = g(x, y);
                    }
                }
            }
        }
        Ok(field)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn basis(&self) -> &Arc<ChebBasis> {
        &self.basis
    }

    pub fn p(&self) -> usize {
        self.basis.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        assert!(i < self.grid.n1 && j < self.grid.n2, "cell ({i}, {j}) outside the mesh");
        (i * self.grid.n2 + j) * self.p() * self.p()
    }

    pub fn cell(&self, i: usize, j: usize) -> &[f64] {
        let o = self.offset(i, j);
        &self.values[o..o + self.p() * self.p()]
    }

    pub fn cell_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let o = self.offset(i, j);
        let n = self.p() * self.p();
        &mut self.values[o..o + n]
    }

    /// Physical node coordinates of cell `(i, j)`.
    pub fn cell_nodes(&self, i: usize, j: usize) -> (Vec<f64>, Vec<f64>) {
        let r = self.grid.cell(i, j);
        let xs = map_nodes_unit(self.basis.nodes(), r.x0, r.x1);
        let ys = map_nodes_unit(self.basis.nodes(), r.y0, r.y1);
        (xs, ys)
    }

    /// Interpolated value at `(x, y)` using the owning cell.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        let (i, j) = self.grid.locate(x, y)?;
        Ok(self.eval_in_cell(i, j, x, y))
    }

    pub(crate) fn eval_in_cell(&self, i: usize, j: usize, x: f64, y: f64) -> f64 {
        let r = self.grid.cell(i, j);
        let sx = (x - r.x0) / r.width();
        let sy = (y - r.y0) / r.height();
        let p = self.p();
        let cell = self.cell(i, j);
        let along_y: Vec<f64> = (0..p)
            .map(|a| self.basis.interpolate(&cell[a * p..(a + 1) * p], sy))
            .collect();
        self.basis.interpolate(&along_y, sx)
    }

    /// Samples on one side of cell `(i, j)`, ordered by increasing coordinate.
    pub fn edge_trace(&self, i: usize, j: usize, side: Side) -> EdgeTrace {
        let p = self.p();
        let r = self.grid.cell(i, j);
        let cell = self.cell(i, j);
        let (a, b, values): (f64, f64, Vec<f64>) = match side {
            Side::Left => (r.y0, r.y1, cell[..p].to_vec()),
            Side::Right => (r.y0, r.y1, cell[(p - 1) * p..].to_vec()),
            Side::Bottom => (r.x0, r.x1, (0..p).map(|a| cell[a * p]).collect()),
            Side::Top => (r.x0, r.x1, (0..p).map(|a| cell[a * p + p - 1]).collect()),
        };
        EdgeTrace {
            a,
            b,
            values,
            basis: self.basis.clone(),
        }
    }

    /// Largest disagreement between samples on shared cell edges.
    pub fn edge_mismatch(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.grid.n1 {
            for j in 0..self.grid.n2 {
                if i + 1 < self.grid.n1 {
                    let a = self.edge_trace(i, j, Side::Right);
                    let b = self.edge_trace(i + 1, j, Side::Left);
                    worst = a
                        .values
                        .iter()
                        .zip(&b.values)
                        .fold(worst, |w, (u, v)| w.max((u - v).abs()));
                }
                if j + 1 < self.grid.n2 {
                    let a = self.edge_trace(i, j, Side::Top);
                    let b = self.edge_trace(i, j + 1, Side::Bottom);
                    worst = a
                        .values
                        .iter()
                        .zip(&b.values)
                        .fold(worst, |w, (u, v)| w.max((u - v).abs()));
                }
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Pointwise sum; both fields must share mesh and order.
    pub fn add_assign(&mut self, other: &PiecewiseField) {
        assert_eq!(self.grid, other.grid);
        assert_eq!(self.p(), other.p());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    /// Per-cell spectral partial derivatives `(∂x, ∂y)` at the cell nodes.
    pub fn cell_gradient(&self, i: usize, j: usize) -> (Vec<f64>, Vec<f64>) {
        let p = self.p();
        let r = self.grid.cell(i, j);
        let cell = self.cell(i, j);
        let d = self.basis.diff_matrix();
        let mut dx = vec![0.0; p * p];
        let mut dy = vec![0.0; p * p];
        for a in 0..p {
            for b in 0..p {
                let mut sx = 0.0;
                let mut sy = 0.0;
                for k in 0..p {
                    sx += d[a * p + k] * cell[k * p + b];
                    sy += d[b * p + k] * cell[a * p + k];
                }
                dx[a * p + b] = sx / r.width();
                dy[a * p + b] = sy / r.height();
            }
        }
        (dx, dy)
    }

    /// Spectral mixed derivative `∂²/∂x∂y` at the nodes of cell `(i, j)`.
    pub fn cell_mixed_derivative(&self, i: usize, j: usize) -> Vec<f64> {
        let p = self.p();
        let r = self.grid.cell(i, j);
        let (dx, _) = self.cell_gradient(i, j);
        let d = self.basis.diff_matrix();
        let mut out = vec![0.0; p * p];
        for a in 0..p {
            for b in 0..p {
                let s: f64 = (0..p).map(|k| d[b * p + k] * dx[a * p + k]).sum();
                out[a * p + b] = s / r.height();
            }
        }
        out
    }
}

pub(crate) fn map_nodes_unit(unit: &[f64], a: f64, b: f64) -> Vec<f64> {
    let last = unit.len() - 1;
    unit.iter()
        .enumerate()
        .map(|(k, &t)| match k {
            0 => a,
            k if k == last => b,
            _ => a + (b - a) * t,
        })
        .collect()
}

/// Free-function form of [`PiecewiseField::eval`].
pub fn eval_field(f: &PiecewiseField, x: f64, y: f64) -> Result<f64> {
    f.eval(x, y)
}

/// Corner samples `u(x_i, y_j)` of one field, `(N1 + 1) × (N2 + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CornerTable {
    n1: usize,
    n2: usize,
    values: Vec<f64>,
}

impl CornerTable {
    /// Reads the corners from the owning cell of each mesh node (lower index wins).
    pub fn from_field(field: &PiecewiseField) -> Self {
        let g = field.grid();
        let p = field.p();
        let mut values = Vec::with_capacity((g.n1 + 1) * (g.n2 + 1));
        for i in 0..=g.n1 {
            for j in 0..=g.n2 {
                let (ci, a) = if i == 0 { (0, 0) } else { (i - 1, p - 1) };
                let (cj, b) = if j == 0 { (0, 0) } else { (j - 1, p - 1) };
                values.push(field.cell(ci, cj)[a * p + b]);
            }
        }
        Self {
            n1: g.n1,
            n2: g.n2,
            values,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i <= self.n1 && j <= self.n2);
        self.values[i * (self.n2 + 1) + j]
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n1 + 1, self.n2 + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn node_examples() {
        assert_eq!(cheb_nodes(2, 0.0, 1.0).unwrap(), vec![0.0, 1.0]);
        assert_eq!(cheb_nodes(3, -1.0, 1.0).unwrap(), vec![-1.0, 0.0, 1.0]);
        let five = cheb_nodes(5, 0.0, 1.0).unwrap();
        assert_eq!(five[2], 0.5);
        assert_abs_diff_eq!(five[1], (1.0 - 0.5f64.sqrt()) / 2.0, epsilon = 1e-16);
        assert!(five.windows(2).all(|w| w[0] < w[1]));
        assert!(cheb_nodes(1, 0.0, 1.0).is_err());
        assert!(cheb_nodes(4, 1.0, 1.0).is_err());
    }

    #[test]
    fn quadrature_examples() {
        assert_eq!(integrate_1d(|_| 1.0, 0.0, 1.0, 2).unwrap(), 1.0);
        assert_eq!(integrate_1d(|x| x.exp(), 0.3, 0.3, 7).unwrap(), 0.0);
        assert_abs_diff_eq!(
            integrate_2d(|x, y| x * y, Rect::new(0.0, 1.0, 0.0, 1.0), 6).unwrap(),
            0.25,
            epsilon = 1e-14
        );
        assert!(integrate_1d(|x| x, 1.0, 0.0, 4).is_err());
    }

    proptest! {
        #[test]
        fn quadrature_exact_to_degree_p_minus_one(
            p in 2usize..20,
            coeffs in prop::collection::vec(-1.0f64..1.0, 20),
            a in -1.0f64..1.0, len in 0.1f64..2.0,
        ) {
            let b = a + len;
            let deg = p - 1;
            let poly = |x: f64| coeffs[..=deg].iter().rev().fold(0.0, |acc, c| acc * x + c);
            let anti = |x: f64| coeffs[..=deg].iter().enumerate().map(|(k, c)| c * x.powi(k as i32 + 1) / (k + 1) as f64).sum::<f64>();
            let exact = anti(b) - anti(a);
            let got = integrate_1d(poly, a, b, p).unwrap();
            let scale: f64 = coeffs[..=deg].iter().map(|c| c.abs()).sum::<f64>() * len * 3f64.powi(deg as i32);
            prop_assert!((got - exact).abs() <= 1e-14 * scale.max(1.0), "{got} vs {exact}");
        }

        #[test]
        fn bilinear_reproduced(x in 0.0f64..2.0, y in 0.0f64..1.5) {
            let grid = Grid::new(2.0, 1.5, 3, 2).unwrap();
            let f = PiecewiseField::sample(grid, 6, |x, y| x * y).unwrap();
            prop_assert!((f.eval(x, y).unwrap() - x * y).abs() <= 1e-12);
        }

        #[test]
        fn exponential_interpolation(x in 0.0f64..0.5, y in 0.0f64..0.5) {
            let grid = Grid::new(0.5, 0.5, 1, 1).unwrap();
            let f = PiecewiseField::sample(grid, 12, |x, y| (x + y).exp()).unwrap();
            prop_assert!((f.eval(x, y).unwrap() - (x + y).exp()).abs() <= 1e-12);
        }
    }

    #[test]
    fn field_evaluation() {
        let grid = Grid::new(1.0, 2.0, 4, 5).unwrap();
        let one = PiecewiseField::sample(grid, 5, |_, _| 1.0).unwrap();
        assert_eq!(one.eval(0.37, 1.21).unwrap(), 1.0);
        let g = PiecewiseField::sample(grid, 7, |x, y| (x * 3.0).sin() + y * y).unwrap();
        let (xs, ys) = g.cell_nodes(2, 3);
        assert_eq!(g.eval_in_cell(2, 3, xs[3], ys[4]), g.cell(2, 3)[3 * 7 + 4]);
        assert!(g.eval(1.5, 0.2).is_err());
        assert!(g.eval(-0.1, 0.2).is_err());
        assert!(g.edge_mismatch() <= 1e-14);
    }

    #[test]
    fn locate_prefers_lower_index() {
        let grid = Grid::new(4.0, 4.0, 4, 8).unwrap();
        assert_eq!(grid.locate(1.0, 0.5).unwrap(), (0, 0));
        assert_eq!(grid.locate(1.0000001, 0.5000001).unwrap(), (1, 1));
        assert_eq!(grid.locate(0.0, 0.0).unwrap(), (0, 0));
        assert_eq!(grid.locate(4.0, 4.0).unwrap(), (3, 7));
        assert_eq!(grid.x(4), 4.0);
        let g = Grid::new(4.0, 4.0, 80, 80).unwrap();
        for i in 1..80 {
            assert_eq!(g.locate(g.x(i), g.y(i)).unwrap(), (i - 1, i - 1));
        }
    }

    #[test]
    fn traces_and_derivatives() {
        let grid = Grid::new(1.0, 1.0, 1, 1).unwrap();
        let c = PiecewiseField::sample(grid, 8, |_, _| 2.5).unwrap();
        let t = c.edge_trace(0, 0, Side::Left);
        assert!(t.values.iter().all(|&v| v == 2.5));
        assert!(t.derivative().values.iter().all(|v| v.abs() <= 1e-12));

        let x = PiecewiseField::sample(grid, 8, |x, _| x).unwrap();
        let b = x.edge_trace(0, 0, Side::Bottom);
        assert_eq!(b.values, b.nodes());
        assert!(b.derivative().values.iter().all(|v| (v - 1.0).abs() <= 1e-12));

        let s = EdgeTrace::sample(f64::sin, 0.0, 0.5, 10).unwrap();
        for (d, x) in edge_derivative(&s).values.iter().zip(s.nodes()) {
            assert_abs_diff_eq!(*d, x.cos(), epsilon = 1e-11);
        }
    }

    #[test]
    fn corner_table_matches_evaluation() {
        let grid = Grid::new(2.0, 1.0, 3, 2).unwrap();
        let f = PiecewiseField::sample(grid, 6, |x, y| (x - y).exp()).unwrap();
        let t = CornerTable::from_field(&f);
        assert_eq!(t.dims(), (4, 3));
        for i in 0..=3 {
            for j in 0..=2 {
                let e = f.eval(grid.x(i), grid.y(j)).unwrap();
                assert!((t.get(i, j) - e).abs() <= 1e-12 * e.abs());
            }
        }
    }

    #[test]
    fn mixed_derivative_of_polynomial() {
        let grid = Grid::new(1.0, 1.0, 2, 2).unwrap();
        let f = PiecewiseField::sample(grid, 6, |x, y| x * x * y + 3.0 * x * y).unwrap();
        let (xs, _) = f.cell_nodes(1, 1);
        let m = f.cell_mixed_derivative(1, 1);
        for a in 0..6 {
            for b in 0..6 {
                assert_abs_diff_eq!(m[a * 6 + b], 2.0 * xs[a] + 3.0, epsilon = 1e-11);
            }
        }
    }
}
