//! Finite-propagation operators on `L²(ℝ)`: multiplication by `f` and the
//! generators `S_{f,g} u(x) = f(x) ∫ g(y) u(x - y) dy`, plus a midpoint-grid
//! discretization that serves as the norm oracle.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::piecewise::PiecewisePolynomial;
use crate::window::format_float;

/// Certified sup error allowed when capping convolution degrees.
pub const REDUCE_TOL: f64 = 1e-10;

/// Relative stopping tolerance of the power iteration.
pub const POWER_TOL: f64 = 1e-10;

/// Iteration cap of the power iteration.
pub const POWER_CAP: usize = 100_000;

/// Half-width of the tent bumps used by [`propagation_probe`].
pub const BUMP_HALF_WIDTH: f64 = 0.125;

/// `π(f)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicationOp {
    pub f: PiecewisePolynomial,
}

impl MultiplicationOp {
    pub fn new(f: PiecewisePolynomial) -> Self {
        Self { f }
    }

    pub fn apply(&self, u: &PiecewisePolynomial) -> PiecewisePolynomial {
        self.f.mul(u)
    }
}

/// `S_{f,g}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvKernelOp {
    pub f: PiecewisePolynomial,
    pub g: PiecewisePolynomial,
}

impl ConvKernelOp {
    pub fn new(f: PiecewisePolynomial, g: PiecewisePolynomial) -> Self {
        Self { f, g }
    }

    /// Tents of height 1 on `[-1, 1]` for both `f` and `g`.
    pub fn reference() -> Self {
        let tent = PiecewisePolynomial::tent(0.0, 1.0, 1.0);
        Self::new(tent.clone(), tent)
    }

    pub fn is_zero(&self) -> bool {
        self.f.is_zero() || self.g.is_zero()
    }

    /// `max |y|` over `supp g`.
    pub fn propagation(&self) -> f64 {
        match self.g.support() {
            Some((a, b)) if !self.is_zero() => a.abs().max(b.abs()),
            _ => 0.0,
        }
    }

    /// Kernel `f(x) g(x - z)`.
    pub fn kernel(&self, x: f64, z: f64) -> f64 {
        let fx = self.f.eval(x);
        if fx == 0.0 {
            return 0.0;
        }
        fx * self.g.eval(x - z)
    }

    /// Hull of `supp f ∪ (supp f - supp g)`: everything the operator reads or writes.
    pub fn reach(&self) -> Option<(f64, f64)> {
        if self.is_zero() {
            return None;
        }
        let (fa, fb) = self.f.support()?;
        let (ga, gb) = self.g.support()?;
        Some(((fa - gb).min(fa), (fb - ga).max(fb)))
    }

    /// `sup|f| · ∫|g|`, a Schur-test bound on the norm.
    pub fn schur_bound(&self) -> f64 {
        self.f.sup_abs_bound() * self.g.abs_integral()
    }

    /// `S_{f,g} u` with the convolution capped at degree 3; returns the function and
    /// the certified sup error of the capping step (before multiplication by `f`).
    pub fn apply(&self, u: &PiecewisePolynomial) -> (PiecewisePolynomial, f64) {
        conv_apply(self, u)
    }
}

/// Exact `f · (g ⋆ u)` up to the certified degree-capping error.
pub fn conv_apply(s: &ConvKernelOp, u: &PiecewisePolynomial) -> (PiecewisePolynomial, f64) {
    if s.is_zero() || u.is_zero() {
        return (PiecewisePolynomial::zero(), 0.0);
    }
    let conv = s.g.convolve(u);
    let (capped, cert) = conv.reduce_degree(3, REDUCE_TOL);
    (s.f.mul(&capped), cert)
}

/// A finite linear combination `Σ c_i S_{f_i, g_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSum {
    pub terms: Vec<(f64, ConvKernelOp)>,
}

impl GeneratorSum {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|(c, s)| *c == 0.0 || s.is_zero())
    }

    pub fn propagation(&self) -> f64 {
        self.active().map(|(_, s)| s.propagation()).fold(0.0, f64::max)
    }

    pub fn reach(&self) -> Option<(f64, f64)> {
        self.active().filter_map(|(_, s)| s.reach()).reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)))
    }

    pub fn kernel(&self, x: f64, z: f64) -> f64 {
        self.active().map(|(c, s)| c * s.kernel(x, z)).sum()
    }

    pub fn schur_bound(&self) -> f64 {
        self.active().map(|(c, s)| c.abs() * s.schur_bound()).sum()
    }

    pub fn apply(&self, u: &PiecewisePolynomial) -> (PiecewisePolynomial, f64) {
        let mut out = PiecewisePolynomial::zero();
        let mut cert = 0.0;
        for (c, s) in self.active() {
            let (v, e) = conv_apply(s, u);
            out = out.add_scaled(&v, *c);
            cert += c.abs() * s.f.sup_abs_bound() * e;
        }
        (out, cert)
    }

    pub(crate) fn active(&self) -> impl Iterator<Item = &(f64, ConvKernelOp)> {
        self.terms.iter().filter(|(c, s)| *c != 0.0 && !s.is_zero())
    }
}

impl From<ConvKernelOp> for GeneratorSum {
    fn from(s: ConvKernelOp) -> Self {
        Self { terms: vec![(1.0, s)] }
    }
}

/// Midpoint grid `x_i = a + (i + 1/2) h`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub a: f64,
    pub h: f64,
    pub n: usize,
}

impl Grid {
    /// Covers `[a, b]` with `⌈(b - a)/h⌉` cells.
    pub fn new(a: f64, b: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !(b > a) {
            return Err(Error::Dimension(format!("grid needs h > 0 and a < b, got h={h}, [{a}, {b}]")));
        }
        let n = ((b - a) / h - 1e-9).ceil().max(1.0) as usize;
        Ok(Self { a, h, n })
    }

    pub fn b(&self) -> f64 {
        self.a + self.n as f64 * self.h
    }

    pub fn node(&self, i: usize) -> f64 {
        self.a + (i as f64 + 0.5) * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    pub fn sample(&self, f: &PiecewisePolynomial) -> DVector<f64> {
        DVector::from_iterator(self.n, (0..self.n).map(|i| f.eval(self.node(i))))
    }

    /// Discrete L² norm with weight `h`.
    pub fn l2_norm(&self, v: &DVector<f64>) -> f64 {
        (self.h * v.norm_squared()).sqrt()
    }
}

/// An operator sampled on a midpoint grid: entries `K(x_i, x_j) · h`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOperator {
    pub grid: Grid,
    pub matrix: DMatrix<f64>,
}

impl GridOperator {
    /// Dense CSV with an `# a=..., h=..., n=...` line, a header, one row per node.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# a={} h={} n={}", self.grid.a, self.grid.h, self.grid.n)?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let mut header = vec!["x".to_string()];
        header.extend((0..self.grid.n).map(|j| format_float(self.grid.node(j))));
        w.write_record(&header)?;
        for i in 0..self.grid.n {
            let mut rec = vec![format_float(self.grid.node(i))];
            rec.extend(self.matrix.row(i).iter().map(|v| format_float(*v)));
            w.write_record(&rec)?;
        }
        w.flush()
    }
}

/// Samples `S` on the grid of `[a, b]`, which must contain the reach of `S`
/// inflated by `2h`.
pub fn grid_discretize(s: &GeneratorSum, a: f64, b: f64, h: f64) -> Result<GridOperator> {
    let grid = Grid::new(a, b, h)?;
    if let Some((ra, rb)) = s.reach() {
        let (need_a, need_b) = (ra - 2.0 * h, rb + 2.0 * h);
        if a > need_a || b < need_b {
            return Err(Error::IntervalTooSmall { a, b, need_a, need_b });
        }
    }
    Ok(sample_kernel(grid, |x, z| s.kernel(x, z)))
}

fn sample_kernel(grid: Grid, k: impl Fn(f64, f64) -> f64 + Sync) -> GridOperator {
    let n = grid.n;
    let nodes = grid.nodes();
    let rows: Vec<Vec<f64>> = nodes
        .par_iter()
        .map(|&x| nodes.iter().map(|&z| k(x, z) * grid.h).collect())
        .collect();
    let matrix = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    GridOperator { grid, matrix }
}

/// Largest singular value of the grid matrix.
pub fn op_norm_oracle(g: &GridOperator) -> Result<f64> {
    power_norm(&g.matrix)
}

/// Power iteration on `MᵀM` from the all-ones vector, with a ramp restart if
/// the start happens to lie in the kernel.
pub fn power_norm(m: &DMatrix<f64>) -> Result<f64> {
    let n = m.ncols();
    if n == 0 || m.nrows() == 0 {
        return Ok(0.0);
    }
    let starts = [
        DVector::from_element(n, 1.0),
        DVector::from_fn(n, |i, _| 1.0 + i as f64 / n as f64),
    ];
    for start in starts {
        let mut x = start.normalize();
        let mut y = m * &x;
        if y.norm() == 0.0 {
            continue;
        }
        let mut sigma = y.norm();
        for _ in 0..POWER_CAP {
            let z = m.tr_mul(&y);
            let zn = z.norm();
            if zn == 0.0 {
                return Ok(sigma);
            }
            x = z / zn;
            y = m * &x;
            let next = y.norm();
            let done = (next - sigma).abs() <= POWER_TOL * next;
            sigma = next;
            if done {
                return Ok(sigma);
            }
        }
        return Err(Error::PowerIterationCap { last: sigma, iterations: POWER_CAP });
    }
    // both starts annihilated: fall back to the exact answer
    Ok(crate::window::spectral_norm(m))
}

/// Grid-oracle norm of `S` at spacing `h` and `h/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleNorm {
    /// Richardson extrapolation of the two grid norms (second-order scheme).
    pub value: f64,
    /// `|norm(h/2) - norm(h)|`.
    pub increment: f64,
    pub coarse: f64,
    pub fine: f64,
    pub h: f64,
}

impl OracleNorm {
    /// Reported uncertainty: twice the convergence increment.
    pub fn tolerance(&self) -> f64 {
        2.0 * self.increment
    }
}

/// Norm of `S` from grids at `h` and `h/2` over the reach inflated by `4h`.
pub fn norm_oracle(s: &GeneratorSum, h: f64) -> Result<OracleNorm> {
    let Some((ra, rb)) = s.reach() else {
        return Ok(OracleNorm { value: 0.0, increment: 0.0, coarse: 0.0, fine: 0.0, h });
    };
    let (a, b) = (ra - 4.0 * h, rb + 4.0 * h);
    let coarse = op_norm_oracle(&grid_discretize(s, a, b, h)?)?;
    let fine = op_norm_oracle(&grid_discretize(s, a, b, 0.5 * h)?)?;
    Ok(OracleNorm {
        value: fine + (fine - coarse) / 3.0,
        increment: (fine - coarse).abs(),
        coarse,
        fine,
        h,
    })
}

/// `max ‖π(φ) S π(ψ)‖` over tent bumps of half-width 1/8 whose supports are
/// `separation` apart, with `φ` centered on a 1/8-grid across `supp f` and `ψ`
/// on either side. The norm is taken on a grid of spacing 1/64.
pub fn propagation_probe(s: &GeneratorSum, separation: f64) -> Result<f64> {
    assert!(separation > 0.0, "separation must be positive");
    let Some((fa, fb)) = s.active().filter_map(|(_, t)| t.f.support()).reduce(|a, b| (a.0.min(b.0), a.1.max(b.1))) else {
        return Ok(0.0);
    };
    let h = 1.0 / 64.0;
    let step = BUMP_HALF_WIDTH;
    let count = ((fb - fa) / step).ceil() as usize + 2;
    let offset = separation + 2.0 * BUMP_HALF_WIDTH;
    let mut pairs = Vec::with_capacity(2 * count);
    for i in 0..=count {
        let c = fa - step + i as f64 * step;
        pairs.push((c, c - offset));
        pairs.push((c, c + offset));
    }
    let norms = pairs
        .par_iter()
        .map(|&(cphi, cpsi)| {
            let phi = PiecewisePolynomial::tent(cphi, BUMP_HALF_WIDTH, 1.0);
            let psi = PiecewisePolynomial::tent(cpsi, BUMP_HALF_WIDTH, 1.0);
            // nodes of a common lattice h·(k + 1/2) inside each bump
            let nodes = |c: f64| -> Vec<f64> {
                let lo = ((c - BUMP_HALF_WIDTH) / h - 0.5).ceil() as i64;
                let hi = ((c + BUMP_HALF_WIDTH) / h - 0.5).floor() as i64;
                (lo..=hi).map(|k| (k as f64 + 0.5) * h).collect()
            };
            let xs = nodes(cphi);
            let zs = nodes(cpsi);
            let m = DMatrix::from_fn(xs.len(), zs.len(), |i, j| {
                phi.eval(xs[i]) * s.kernel(xs[i], zs[j]) * psi.eval(zs[j]) * h
            });
            power_norm(&m)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(norms.into_iter().fold(0.0, f64::max))
}

/// Numerical rank of `op ∘ π(f)` on a grid: the columns are `op` applied to
/// `f(x_j) e_j` for the nodes where `f` does not vanish, and the rank counts
/// singular values above `rank_tol` times the largest.
pub fn local_compactness_probe<F>(grid: &Grid, op: F, f: &MultiplicationOp, rank_tol: f64) -> usize
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Sync,
{
    let cols: Vec<usize> = (0..grid.n).filter(|&j| f.f.eval(grid.node(j)) != 0.0).collect();
    if cols.is_empty() {
        return 0;
    }
    let columns: Vec<DVector<f64>> = cols
        .par_iter()
        .map(|&j| {
            let mut e = DVector::zeros(grid.n);
            e[j] = f.f.eval(grid.node(j));
            op(&e)
        })
        .collect();
    let rows = columns[0].len();
    let m = DMatrix::from_fn(rows, columns.len(), |i, j| columns[j][i]);
    numerical_rank(&m, rank_tol)
}

/// Singular values above `tol · σ_max`.
pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let top = sv.iter().fold(0.0f64, |a, b| a.max(*b));
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > tol * top).count()
}
