//! Compactly supported piecewise polynomials.
//!
//! Each piece stores ascending coefficients in the local coordinate
//! `x - breakpoints[i]`. Inputs are limited to degree 3 per piece; products
//! and convolutions derived inside the crate may carry higher degree, up to
//! the exact-integration limit of the order-8 Gauss rule.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{compensated_sum, gauss8, integrate_partition, partition_within, EXACT_DEGREE};

/// Highest per-piece degree accepted from callers.
pub const MAX_INPUT_DEGREE: usize = 3;

/// A compactly supported piecewise polynomial; zero outside its breakpoints.
///
/// Evaluation at an interior breakpoint uses the piece to its right; the last
/// breakpoint uses the left limit of the final piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPiecewise", into = "RawPiecewise")]
pub struct PiecewisePolynomial {
    breakpoints: Vec<f64>,
    pieces: Vec<Vec<f64>>,
}

impl PiecewisePolynomial {
    /// Validated constructor for caller-supplied data (degree ≤ 3 per piece).
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Vec<f64>>) -> Result<Self> {
        let pp = Self::with_degree_limit(breakpoints, pieces, MAX_INPUT_DEGREE)?;
        Ok(pp)
    }

    fn with_degree_limit(breakpoints: Vec<f64>, pieces: Vec<Vec<f64>>, max_degree: usize) -> Result<Self> {
        if breakpoints.is_empty() && pieces.is_empty() {
            return Ok(Self::zero());
        }
        if breakpoints.len() < 2 {
            return Err(Error::InvalidPolynomial("need at least two breakpoints".into()));
        }
        if pieces.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidPolynomial(format!(
                "{} breakpoints require {} pieces, got {}",
                breakpoints.len(),
                breakpoints.len() - 1,
                pieces.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidPolynomial("non-finite breakpoint".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPolynomial("breakpoints must be strictly increasing".into()));
        }
        for (i, p) in pieces.iter().enumerate() {
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidPolynomial(format!("non-finite coefficient in piece {i}")));
            }
            if trimmed_len(p) > max_degree + 1 {
                return Err(Error::InvalidPolynomial(format!(
                    "piece {i} has degree {} > {max_degree}",
                    trimmed_len(p) - 1
                )));
            }
        }
        Ok(Self { breakpoints, pieces })
    }

    /// Internal constructor for derived functions (products, convolutions).
    pub(crate) fn derived(breakpoints: Vec<f64>, pieces: Vec<Vec<f64>>) -> Self {
        debug_assert!(breakpoints.windows(2).all(|w| w[1] > w[0]));
        debug_assert!(breakpoints.is_empty() || pieces.len() + 1 == breakpoints.len());
        Self { breakpoints, pieces }
    }

    pub fn zero() -> Self {
        Self { breakpoints: Vec::new(), pieces: Vec::new() }
    }

    /// Continuous piecewise-linear function through `(x, y)` nodes, zero outside.
    pub fn linear_through(nodes: &[(f64, f64)]) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidPolynomial("need at least two nodes".into()));
        }
        let breakpoints: Vec<f64> = nodes.iter().map(|n| n.0).collect();
        let pieces = nodes
            .windows(2)
            .map(|w| {
                let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                vec![w[0].1, slope]
            })
            .collect();
        Self::new(breakpoints, pieces)
    }

    /// Tent of the given height centered at `center`, supported on `center ± half_width`.
    pub fn tent(center: f64, half_width: f64, height: f64) -> Self {
        assert!(half_width > 0.0, "tent half-width must be positive");
        Self::linear_through(&[
            (center - half_width, 0.0),
            (center, height),
            (center + half_width, 0.0),
        ])
        .expect("tent nodes are increasing")
    }

    /// Indicator-free constant on `[a, b]`.
    pub fn constant(a: f64, b: f64, value: f64) -> Result<Self> {
        Self::new(vec![a, b], vec![vec![value]])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Vec<f64>] {
        &self.pieces
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(|p| p.iter().all(|c| *c == 0.0))
    }

    /// `[first breakpoint, last breakpoint]`, or `None` for the empty function.
    pub fn support(&self) -> Option<(f64, f64)> {
        match (self.breakpoints.first(), self.breakpoints.last()) {
            (Some(a), Some(b)) => Some((*a, *b)),
            _ => None,
        }
    }

    pub fn degree(&self) -> usize {
        self.pieces.iter().map(|p| trimmed_len(p).saturating_sub(1)).max().unwrap_or(0)
    }

    fn piece_index(&self, x: f64) -> Option<usize> {
        let (a, b) = self.support()?;
        if !(x >= a && x <= b) {
            return None;
        }
        let n = self.pieces.len();
        // number of breakpoints <= x, minus one
        let idx = self.breakpoints.partition_point(|bp| *bp <= x) - 1;
        Some(idx.min(n - 1))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.piece_index(x) {
            Some(i) => horner(&self.pieces[i], x - self.breakpoints[i]),
            None => 0.0,
        }
    }

    /// Coefficients of the piece containing `x0`, re-expanded about `x0`.
    fn local_at(&self, x0: f64, probe: f64) -> Vec<f64> {
        match self.piece_index(probe) {
            Some(i) => taylor_shift(&self.pieces[i], x0 - self.breakpoints[i]),
            None => Vec::new(),
        }
    }

    pub fn translate(&self, shift: f64) -> Self {
        Self::derived(
            self.breakpoints.iter().map(|b| b + shift).collect(),
            self.pieces.clone(),
        )
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::derived(
            self.breakpoints.clone(),
            self.pieces.iter().map(|p| p.iter().map(|x| c * x).collect()).collect(),
        )
    }

    /// Pointwise product, supported on the intersection of supports.
    pub fn mul(&self, other: &Self) -> Self {
        let (Some((a1, b1)), Some((a2, b2))) = (self.support(), other.support()) else {
            return Self::zero();
        };
        let lo = a1.max(a2);
        let hi = b1.min(b2);
        if hi <= lo {
            return Self::zero();
        }
        let cells = partition_within(
            self.breakpoints.iter().chain(&other.breakpoints).copied(),
            lo,
            hi,
        );
        let mut pieces = Vec::with_capacity(cells.len() - 1);
        for w in cells.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let p = self.local_at(w[0], mid);
            let q = other.local_at(w[0], mid);
            pieces.push(poly_mul(&p, &q));
        }
        Self::derived(cells, pieces)
    }

    /// `self + c * other`, supported on the hull of both supports.
    pub fn add_scaled(&self, other: &Self, c: f64) -> Self {
        let sa = self.support();
        let sb = other.support();
        let (lo, hi) = match (sa, sb) {
            (None, None) => return Self::zero(),
            (Some(_), None) => return self.clone(),
            (None, Some(_)) => return other.scale(c),
            (Some((a1, b1)), Some((a2, b2))) => (a1.min(a2), b1.max(b2)),
        };
        let cells = partition_within(
            self.breakpoints.iter().chain(&other.breakpoints).copied(),
            lo,
            hi,
        );
        let mut pieces = Vec::with_capacity(cells.len() - 1);
        for w in cells.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let p = self.local_at(w[0], mid);
            let q = other.local_at(w[0], mid);
            let n = p.len().max(q.len());
            let mut r = vec![0.0; n];
            for (k, v) in p.iter().enumerate() {
                r[k] += v;
            }
            for (k, v) in q.iter().enumerate() {
                r[k] += c * v;
            }
            pieces.push(r);
        }
        Self::derived(cells, pieces)
    }

    pub fn derivative(&self) -> Self {
        Self::derived(
            self.breakpoints.clone(),
            self.pieces
                .iter()
                .map(|p| p.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect())
                .collect(),
        )
    }

    /// Exact integral over the support.
    pub fn integral(&self) -> f64 {
        compensated_sum(self.pieces.iter().enumerate().map(|(i, p)| {
            let w = self.breakpoints[i + 1] - self.breakpoints[i];
            p.iter()
                .enumerate()
                .map(|(k, c)| c * w.powi(k as i32 + 1) / (k as f64 + 1.0))
                .sum::<f64>()
        }))
    }

    /// L² inner product by Gauss quadrature on the merged partition.
    pub fn inner(&self, other: &Self) -> f64 {
        integrate_product(&[self, other])
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    /// Upper bound on `sup |f|`: dense sampling plus a derivative margin.
    pub fn sup_abs_bound(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (i, p) in self.pieces.iter().enumerate() {
            let w = self.breakpoints[i + 1] - self.breakpoints[i];
            let dp: Vec<f64> = p.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
            let dmax: f64 = dp.iter().enumerate().map(|(k, c)| c.abs() * w.powi(k as i32)).sum();
            const N: usize = 256;
            let h = w / N as f64;
            let mut m: f64 = 0.0;
            for j in 0..=N {
                m = m.max(horner(p, j as f64 * h).abs());
            }
            best = best.max(m + 0.5 * h * dmax);
        }
        best
    }

    /// `∫ |f|`, integrating each piece on 64 sub-cells.
    pub fn abs_integral(&self) -> f64 {
        let rule = gauss8();
        compensated_sum(self.pieces.iter().enumerate().map(|(i, p)| {
            let a = self.breakpoints[i];
            let w = self.breakpoints[i + 1] - a;
            let n = 64;
            (0..n)
                .map(|j| {
                    let lo = w * j as f64 / n as f64;
                    let hi = w * (j + 1) as f64 / n as f64;
                    rule.integrate(lo, hi, |s| horner(p, s).abs())
                })
                .sum::<f64>()
        }))
    }

    /// Largest `|f'|` bound over the pieces (a Lipschitz constant when `f` is continuous).
    pub fn lipschitz_bound(&self) -> f64 {
        self.derivative().sup_abs_bound()
    }

    /// Exact convolution `(self ⋆ other)(x) = ∫ self(y) other(x - y) dy`.
    ///
    /// The result is piecewise polynomial of degree `deg self + deg other + 1`
    /// with breakpoints at sums of the operands' breakpoints; each piece is
    /// recovered from exact samples at Chebyshev nodes.
    pub fn convolve(&self, other: &Self) -> Self {
        let (Some((a1, b1)), Some((a2, b2))) = (self.support(), other.support()) else {
            return Self::zero();
        };
        assert!(
            self.degree() + other.degree() <= EXACT_DEGREE,
            "convolution integrand degree exceeds the exact Gauss range"
        );
        let lo = a1 + a2;
        let hi = b1 + b2;
        let scale = 1.0 + lo.abs().max(hi.abs());
        let mut sums: Vec<f64> = Vec::new();
        for b in &self.breakpoints {
            for c in &other.breakpoints {
                sums.push(b + c);
            }
        }
        sums.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut cells: Vec<f64> = Vec::with_capacity(sums.len());
        for s in sums {
            match cells.last() {
                Some(last) if s - last <= 1e-12 * scale => {}
                _ => cells.push(s),
            }
        }
        if let Some(last) = cells.last_mut() {
            *last = hi;
        }
        cells[0] = lo;
        let degree = self.degree() + other.degree() + 1;
        let nodes = chebyshev_unit(degree + 1);
        let vander = DMatrix::from_fn(degree + 1, degree + 1, |i, j| nodes[i].powi(j as i32));
        let lu = vander.lu();
        let mut pieces = Vec::with_capacity(cells.len() - 1);
        for w in cells.windows(2) {
            let width = w[1] - w[0];
            let rhs = DVector::from_iterator(
                degree + 1,
                nodes.iter().map(|s| convolution_at(self, other, w[0] + s * width)),
            );
            let sol = lu.solve(&rhs).expect("Chebyshev Vandermonde is nonsingular");
            pieces.push(
                sol.iter()
                    .enumerate()
                    .map(|(k, c)| c / width.powi(k as i32))
                    .collect(),
            );
        }
        Self::derived(cells, pieces)
    }

    /// Re-approximates every piece of degree above `max_degree` by cubic-or-lower
    /// interpolants on bisected cells until the certified sup error is at most
    /// `tol`. Returns the new function and the certified error.
    pub fn reduce_degree(&self, max_degree: usize, tol: f64) -> (Self, f64) {
        let mut bps = Vec::new();
        let mut pieces = Vec::new();
        let mut cert: f64 = 0.0;
        for (i, p) in self.pieces.iter().enumerate() {
            let a = self.breakpoints[i];
            let w = self.breakpoints[i + 1] - a;
            reduce_piece(p, a, w, max_degree, tol, 0, &mut bps, &mut pieces, &mut cert);
        }
        if let Some(last) = self.breakpoints.last() {
            bps.push(*last);
        }
        (Self::derived(bps, pieces), cert)
    }
}

#[allow(clippy::too_many_arguments)]
fn reduce_piece(
    p: &[f64],
    a: f64,
    w: f64,
    max_degree: usize,
    tol: f64,
    depth: usize,
    bps: &mut Vec<f64>,
    pieces: &mut Vec<Vec<f64>>,
    cert: &mut f64,
) {
    let n = trimmed_len(p);
    if n <= max_degree + 1 {
        bps.push(a);
        pieces.push(p[..n].to_vec());
        return;
    }
    let nodes = chebyshev_unit(max_degree + 1);
    let vander = DMatrix::from_fn(max_degree + 1, max_degree + 1, |i, j| nodes[i].powi(j as i32));
    let rhs = DVector::from_iterator(max_degree + 1, nodes.iter().map(|s| horner(p, s * w)));
    let sol = vander.lu().solve(&rhs).expect("Chebyshev Vandermonde is nonsingular");
    let q: Vec<f64> = sol.iter().enumerate().map(|(k, c)| c / w.powi(k as i32)).collect();
    let bound: f64 = (0..n)
        .map(|k| {
            let d = p[k] - q.get(k).copied().unwrap_or(0.0);
            d.abs() * w.powi(k as i32)
        })
        .sum();
    if bound <= tol || depth >= 48 {
        bps.push(a);
        pieces.push(q);
        *cert = cert.max(bound);
        return;
    }
    let half = 0.5 * w;
    let right = taylor_shift(p, half);
    reduce_piece(p, a, half, max_degree, tol, depth + 1, bps, pieces, cert);
    reduce_piece(&right, a + half, half, max_degree, tol, depth + 1, bps, pieces, cert);
}

/// Exact value of `(g ⋆ u)(x)` by Gauss quadrature over the kink-split `y` range.
pub fn convolution_at(g: &PiecewisePolynomial, u: &PiecewisePolynomial, x: f64) -> f64 {
    let rule = gauss8();
    let mut acc = crate::quadrature::NeumaierSum::default();
    let gb = &g.breakpoints;
    let ub = &u.breakpoints;
    for (j, q) in u.pieces.iter().enumerate() {
        // y such that x - y lies in [ub[j], ub[j+1]]
        let ylo = x - ub[j + 1];
        let yhi = x - ub[j];
        for (i, p) in g.pieces.iter().enumerate() {
            let lo = ylo.max(gb[i]);
            let hi = yhi.min(gb[i + 1]);
            if hi <= lo {
                continue;
            }
            let (gi, uj) = (gb[i], ub[j]);
            acc.add(rule.integrate(lo, hi, |y| horner(p, y - gi) * horner(q, x - y - uj)));
        }
    }
    acc.value()
}

/// `∫ Π f_i` over the intersection of supports, split at all breakpoints.
pub fn integrate_product(factors: &[&PiecewisePolynomial]) -> f64 {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for f in factors {
        match f.support() {
            Some((a, b)) => {
                lo = lo.max(a);
                hi = hi.min(b);
            }
            None => return 0.0,
        }
    }
    if hi <= lo {
        return 0.0;
    }
    debug_assert!(factors.iter().map(|f| f.degree()).sum::<usize>() <= EXACT_DEGREE);
    let cells = partition_within(
        factors.iter().flat_map(|f| f.breakpoints.iter().copied()),
        lo,
        hi,
    );
    integrate_partition(&cells, |x| factors.iter().map(|f| f.eval(x)).product())
}

pub(crate) fn horner(p: &[f64], s: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * s + c)
}

fn trimmed_len(p: &[f64]) -> usize {
    let mut n = p.len();
    while n > 0 && p[n - 1] == 0.0 {
        n -= 1;
    }
    n
}

/// Coefficients of `p(s + d)` in powers of `s`.
pub(crate) fn taylor_shift(p: &[f64], d: f64) -> Vec<f64> {
    let mut c = p.to_vec();
    if d == 0.0 {
        return c;
    }
    let n = c.len();
    for i in 0..n {
        for j in (i..n.saturating_sub(1)).rev() {
            c[j] += d * c[j + 1];
        }
    }
    c
}

fn poly_mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    if p.is_empty() || q.is_empty() {
        return Vec::new();
    }
    let mut r = vec![0.0; p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            r[i + j] += a * b;
        }
    }
    r
}

/// Chebyshev points of the first kind mapped to `(0, 1)`.
fn chebyshev_unit(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let theta = std::f64::consts::PI * (2 * k + 1) as f64 / (2 * n) as f64;
            0.5 * (1.0 - theta.cos())
        })
        .collect()
}

/// A decimal or rational (`p/q`) literal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Literal(pub f64);

impl FromStr for Literal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || Error::InvalidLiteral(s.to_string());
        let v = match t.split_once('/') {
            Some((num, den)) => {
                let n: f64 = num.trim().parse().map_err(|_| bad())?;
                let d: f64 = den.trim().parse().map_err(|_| bad())?;
                if d == 0.0 {
                    return Err(bad());
                }
                n / d
            }
            None => t.parse().map_err(|_| bad())?,
        };
        if !v.is_finite() {
            return Err(bad());
        }
        Ok(Literal(v))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RawLiteral {
    Number(f64),
    Text(String),
}

impl RawLiteral {
    fn value(&self) -> Result<f64> {
        match self {
            RawLiteral::Number(v) => Ok(*v),
            RawLiteral::Text(s) => s.parse::<Literal>().map(|l| l.0),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawPiecewise {
    breakpoints: Vec<RawLiteral>,
    pieces: Vec<Vec<RawLiteral>>,
}

impl TryFrom<RawPiecewise> for PiecewisePolynomial {
    type Error = Error;

    fn try_from(raw: RawPiecewise) -> Result<Self> {
        let bps = raw.breakpoints.iter().map(RawLiteral::value).collect::<Result<Vec<_>>>()?;
        let pieces = raw
            .pieces
            .iter()
            .map(|p| p.iter().map(RawLiteral::value).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        PiecewisePolynomial::new(bps, pieces)
    }
}

impl From<PiecewisePolynomial> for RawPiecewise {
    fn from(pp: PiecewisePolynomial) -> Self {
        RawPiecewise {
            breakpoints: pp.breakpoints.into_iter().map(RawLiteral::Number).collect(),
            pieces: pp
                .pieces
                .into_iter()
                .map(|p| p.into_iter().map(RawLiteral::Number).collect())
                .collect(),
        }
    }
}

impl fmt::Display for PiecewisePolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pieces.is_empty() {
            return write!(f, "0");
        }
        for (i, p) in self.pieces.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "[{}, {}]: {:?}", self.breakpoints[i], self.breakpoints[i + 1], p)?;
        }
        Ok(())
    }
}
