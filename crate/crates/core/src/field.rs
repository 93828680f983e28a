//! Experiments over the field parameter `t`: norm profiles of `t ↦ β_t(S)`,
//! continuity scans, and norms of field elements `a = h + β^S`, where the
//! fiber at `t = 0` is `S` itself with its grid-oracle norm.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compression::{beta, beta_window, standard_transition, Compressed, PsiFrame};
use crate::error::{Error, Result};
use crate::lattice::LatticeScale;
use crate::line_ops::{norm_oracle, GeneratorSum, OracleNorm};
use crate::toeplitz::CoeffSequence;
use crate::window::{format_float, WindowMatrix, WindowSpec};

/// Largest window (rows) any compression may use.
pub const WINDOW_CAP: usize = 1025;

/// Guards the desk-scale resource bound on window sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowRule {
    pub cap: usize,
}

impl Default for WindowRule {
    fn default() -> Self {
        Self { cap: WINDOW_CAP }
    }
}

impl WindowRule {
    pub fn window(&self, op: &GeneratorSum, t: LatticeScale, order: usize) -> Result<WindowSpec> {
        let w = beta_window(op, t, order);
        if w.len() > self.cap {
            return Err(Error::WindowCap { required: w.len(), cap: self.cap });
        }
        Ok(w)
    }
}

/// Transition data and window rule shared by every experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldLab {
    pub transition: CoeffSequence,
    pub rule: WindowRule,
}

impl Default for FieldLab {
    fn default() -> Self {
        Self { transition: standard_transition().clone(), rule: WindowRule::default() }
    }
}

/// One sample `(t, value, certificate)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub t: f64,
    pub value: f64,
    pub certificate: f64,
}

/// `t ↦ ‖β_t(S)‖` on a grid, with the oracle `‖S‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormProfile {
    pub samples: Vec<ProfileSample>,
    pub oracle: OracleNorm,
}

impl NormProfile {
    /// Largest drop of the value as `t` decreases (0 when nondecreasing).
    pub fn max_decrease(&self) -> f64 {
        let mut s = self.samples.clone();
        s.sort_by(|a, b| b.t.partial_cmp(&a.t).expect("finite t"));
        s.windows(2).map(|w| w[0].value - w[1].value).fold(0.0, f64::max)
    }

    /// `oracle - value` per sample, in grid order.
    pub fn gaps(&self) -> Vec<f64> {
        self.samples.iter().map(|s| self.oracle.value - s.value).collect()
    }

    /// Largest amount by which a sample exceeds the oracle.
    pub fn max_excess(&self) -> f64 {
        self.samples.iter().map(|s| s.value - self.oracle.value).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Columns `t,value,certificate,gap`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv_writer(out);
        w.write_record(["t", "value", "certificate", "gap"])?;
        for (s, g) in self.samples.iter().zip(self.gaps()) {
            w.write_record([format_float(s.t), format_float(s.value), format_float(s.certificate), format_float(g)])?;
        }
        w.flush()
    }
}

/// `‖β_t(S) - β_{t0}(S)‖` for `t = t0 - δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub t0: f64,
    pub deltas: Vec<f64>,
    pub differences: Vec<f64>,
    pub certificates: Vec<f64>,
    /// `(constant, exponent)` of `difference ≈ constant · δ^exponent`.
    pub fitted_modulus: Option<(f64, f64)>,
}

impl ContinuityReport {
    /// Differences strictly decrease along the (decreasing) deltas.
    pub fn is_monotone(&self) -> bool {
        self.differences.windows(2).all(|w| w[1] < w[0])
    }

    pub fn final_difference(&self) -> Option<f64> {
        self.differences.last().copied()
    }

    /// Columns `delta,value,certificate`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv_writer(out);
        w.write_record(["delta", "value", "certificate"])?;
        for i in 0..self.deltas.len() {
            w.write_record([
                format_float(self.deltas[i]),
                format_float(self.differences[i]),
                format_float(self.certificates[i]),
            ])?;
        }
        w.flush()
    }
}

pub(crate) fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

/// Least-squares line through `(ln x, ln y)` over the positive pairs.
pub fn log_log_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    Some(((my - slope * mx).exp(), slope))
}

/// A continuous path `t ↦ M(t)` of band matrices, piecewise linear between
/// nodes, with `M(0) = 0` and constant beyond the last node.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPath {
    nodes: Vec<(f64, WindowMatrix)>,
}

impl MatrixPath {
    pub fn zero() -> Self {
        Self { nodes: Vec::new() }
    }

    /// Nodes must have strictly increasing `t` in `(0, 1]`.
    pub fn new(nodes: Vec<(f64, WindowMatrix)>) -> Result<Self> {
        if nodes.iter().any(|(t, _)| !(*t > 0.0 && *t <= 1.0)) {
            return Err(Error::Precondition("path nodes must lie in (0, 1]".into()));
        }
        if nodes.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Precondition("path nodes must be strictly increasing in t".into()));
        }
        Ok(Self { nodes })
    }

    /// `t ↦ h(t) · m` for a piecewise-linear `h` through `(t, h)` nodes, `h(0) = 0`.
    pub fn scaled(h_nodes: &[(f64, f64)], m: &WindowMatrix) -> Result<Self> {
        Self::new(h_nodes.iter().map(|(t, h)| (*t, m.scale(*h))).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.nodes.iter().all(|(_, m)| m.matrix().iter().all(|v| *v == 0.0))
    }

    /// `M(t)`, or `None` where the path vanishes identically.
    pub fn at(&self, t: f64) -> Option<WindowMatrix> {
        if t <= 0.0 || self.nodes.is_empty() {
            return None;
        }
        let i = self.nodes.partition_point(|(s, _)| *s < t);
        if i == self.nodes.len() {
            return Some(self.nodes[i - 1].1.clone());
        }
        let (t1, m1) = &self.nodes[i];
        if *t1 == t {
            return Some(m1.clone());
        }
        let (t0, m0) = if i == 0 { (0.0, m1.scale(0.0)) } else { (self.nodes[i - 1].0, self.nodes[i - 1].1.clone()) };
        let w = (t - t0) / (t1 - t0);
        Some(m0.scale(1.0 - w).add_scaled(m1, w))
    }

    /// `sup_t ‖M(t)‖`, attained at a node for a piecewise-linear path.
    pub fn max_norm(&self) -> f64 {
        self.nodes.iter().map(|(_, m)| m.op_norm()).fold(0.0, f64::max)
    }
}

/// A section `a = h + β^S` with fibers `π_t(a) = h(t) + β_t(S)` and `π_0(a) = S`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldElement {
    pub path: MatrixPath,
    pub generator: GeneratorSum,
    pub oracle: OracleNorm,
}

impl FieldElement {
    /// Computes the grid oracle for `S` at spacing `oracle_h`.
    pub fn new(path: MatrixPath, generator: GeneratorSum, oracle_h: f64) -> Result<Self> {
        let oracle = norm_oracle(&generator, oracle_h)?;
        Ok(Self { path, generator, oracle })
    }
}

impl FieldLab {
    pub fn frame(&self, op: &GeneratorSum, t: LatticeScale) -> Result<PsiFrame> {
        let w = self.rule.window(op, t, self.transition.order())?;
        PsiFrame::new(t, self.transition.clone(), w)
    }

    /// `β_t(S)` on its natural window, subject to the window cap.
    pub fn compress(&self, op: &GeneratorSum, t: LatticeScale) -> Result<Compressed> {
        beta(op, &self.frame(op, t)?)
    }

    /// `‖β_t(S)‖` over `t_grid`, computed in parallel and returned in grid order.
    pub fn norm_profile(&self, op: &GeneratorSum, t_grid: &[f64], oracle: OracleNorm) -> Result<NormProfile> {
        let ts = scales(t_grid)?;
        let samples = ts
            .par_iter()
            .map(|&t| {
                let b = self.compress(op, t)?;
                let value = b.matrix.interior_norm();
                let rounding = b.matrix.len() as f64 * f64::EPSILON * value;
                Ok(ProfileSample { t: t.get(), value, certificate: b.certificate + rounding })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NormProfile { samples, oracle })
    }

    /// Differences `‖β_{t0-δ}(S) - β_{t0}(S)‖` on the union of both windows.
    pub fn continuity_scan(&self, op: &GeneratorSum, t0: f64, deltas: &[f64]) -> Result<ContinuityReport> {
        if !(0.25..=1.0).contains(&t0) {
            return Err(Error::Precondition(format!("t0 = {t0} must lie in [1/4, 1]")));
        }
        if let Some(d) = deltas.iter().find(|d| !(**d >= 0.0 && **d <= 0.5 * t0)) {
            return Err(Error::Precondition(format!("delta = {d} must lie in [0, t0/2]")));
        }
        let base = self.compress(op, LatticeScale::new(t0)?)?;
        let rows = deltas
            .par_iter()
            .map(|&d| {
                let b = self.compress(op, LatticeScale::new(t0 - d)?)?;
                let diff = b.matrix.add_scaled(&base.matrix, -1.0);
                let value = diff.op_norm();
                let rounding = diff.len() as f64 * f64::EPSILON * (value + base.matrix.op_norm());
                Ok((value, b.certificate + base.certificate + rounding))
            })
            .collect::<Result<Vec<_>>>()?;
        let differences: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let certificates = rows.iter().map(|r| r.1).collect();
        Ok(ContinuityReport {
            t0,
            deltas: deltas.to_vec(),
            fitted_modulus: log_log_fit(deltas, &differences),
            differences,
            certificates,
        })
    }

    /// `‖π_t(a)‖`: the oracle `‖S‖` at `t = 0`, otherwise `‖h(t) + β_t(S)‖`.
    pub fn field_norm(&self, a: &FieldElement, t: f64) -> Result<f64> {
        Ok(self.field_sample(a, t)?.value)
    }

    /// `field_norm` with its certificate: the oracle tolerance at `t = 0`,
    /// the compression certificate plus rounding elsewhere.
    pub fn field_sample(&self, a: &FieldElement, t: f64) -> Result<ProfileSample> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidScale(t));
        }
        if t == 0.0 {
            return Ok(ProfileSample { t, value: a.oracle.value, certificate: a.oracle.tolerance() });
        }
        let scale = LatticeScale::new(t)?;
        let b = if a.generator.is_zero() { None } else { Some(self.compress(&a.generator, scale)?) };
        let cert = b.as_ref().map_or(0.0, |b| b.certificate);
        let total = match (a.path.at(t), b.map(|b| b.matrix)) {
            (None, None) => return Ok(ProfileSample { t, value: 0.0, certificate: 0.0 }),
            (Some(p), None) => p,
            (None, Some(b)) => b,
            (Some(p), Some(b)) => p.add_scaled(&b, 1.0),
        };
        let value = total.op_norm();
        Ok(ProfileSample { t, value, certificate: cert + total.len() as f64 * f64::EPSILON * value })
    }

    /// `field_norm` over a grid, in grid order.
    pub fn field_profile(&self, a: &FieldElement, t_grid: &[f64]) -> Result<Vec<f64>> {
        t_grid.par_iter().map(|&t| self.field_norm(a, t)).collect()
    }

    /// Whether the fiber norms on `t_grid ∪ {0}` classify `a` correctly:
    /// they all fall below `tol` exactly when both `‖S‖` and `sup‖h‖` do.
    pub fn faithfulness_check(&self, a: &FieldElement, t_grid: &[f64], tol: f64) -> Result<bool> {
        let mut grid = t_grid.to_vec();
        if !grid.contains(&0.0) {
            grid.push(0.0);
        }
        let norms = self.field_profile(a, &grid)?;
        let vanishes = norms.iter().all(|n| *n <= tol);
        let components_vanish = a.oracle.value <= tol && a.path.max_norm() <= tol;
        Ok(vanishes == components_vanish)
    }
}

fn scales(t_grid: &[f64]) -> Result<Vec<LatticeScale>> {
    if t_grid.is_empty() {
        return Err(Error::Precondition("t-grid is empty".into()));
    }
    t_grid.iter().map(|t| LatticeScale::new(*t)).collect()
}
