//! The frame change `γ_t`, the orthonormal family `ψ_n^t = Σ_m C_{mn} φ_m^t`,
//! and the maps between operators on the line and band matrices:
//! the compression `β_t(S) = U_t* S U_t` and the embedding `α_t(T) = U_t T U_t*`.
//!
//! Everything is expressed in φ-coordinates: a vector `x` stands for
//! `Σ x_n φ_n^t`, so `U_t` is the matrix `C`, `L²` inner products are `xᵀGy`,
//! and `γ_t(A)` is the matrix `A` itself.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{hat_eval, hat_function, HatIndex, LatticeScale};
use crate::line_ops::{GeneratorSum, Grid};
use crate::piecewise::{integrate_product, PiecewisePolynomial};
use crate::toeplitz::{gram_coeffs, inv_sqrt_coeffs, matrix_power, BandToeplitz, CoeffSequence};
use crate::window::{spectral_norm, LatticeVector, WindowMatrix, WindowSpec};

/// Transition order used unless a caller supplies its own sequence.
pub const STANDARD_ORDER: usize = 64;

/// Trapezoid nodes for the standard transition coefficients.
pub const STANDARD_QUAD_POINTS: usize = 4096;

/// Extra rows/columns beyond `K` kept around a band matrix before measuring
/// frame norms; `C^{-1}` and `G^{±1/2}` decay like `0.27^k`, so 40 is ample.
pub const FRAME_SLACK: usize = 40;

/// `C` at order 64 from 4096 trapezoid nodes, computed once.
pub fn standard_transition() -> &'static CoeffSequence {
    static SEQ: OnceLock<CoeffSequence> = OnceLock::new();
    SEQ.get_or_init(|| inv_sqrt_coeffs(STANDARD_ORDER, STANDARD_QUAD_POINTS).expect("standard parameters are valid"))
}

/// The family `ψ_n^t` over an index window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiFrame {
    t: LatticeScale,
    transition: CoeffSequence,
    window: WindowSpec,
}

impl PsiFrame {
    pub fn new(t: LatticeScale, transition: CoeffSequence, window: WindowSpec) -> Result<Self> {
        if window.is_empty() || 2 * window.pad >= window.len() {
            return Err(Error::Dimension(format!(
                "window [{}, {}] with pad {} has an empty interior",
                window.lo, window.hi, window.pad
            )));
        }
        Ok(Self { t, transition, window })
    }

    /// Standard transition, interior `[lo, hi]`, pad `K`.
    pub fn standard(t: LatticeScale, lo: i64, hi: i64) -> Self {
        let c = standard_transition().clone();
        let window = WindowSpec::around(lo, hi, c.order());
        Self { t, transition: c, window }
    }

    /// Frame whose window is exactly the support of `β_t(S)` for this transition.
    pub fn for_operator(op: &GeneratorSum, t: LatticeScale, transition: CoeffSequence) -> Self {
        let window = beta_window(op, t, transition.order());
        Self { t, transition, window }
    }

    pub fn t(&self) -> LatticeScale {
        self.t
    }

    pub fn transition(&self) -> &CoeffSequence {
        &self.transition
    }

    pub fn window(&self) -> WindowSpec {
        self.window
    }

    pub fn order(&self) -> usize {
        self.transition.order()
    }

    fn check_interior(&self, n: i64) -> Result<()> {
        let (lo, hi) = self.window.interior();
        if n < lo || n > hi {
            return Err(Error::NotInterior { index: n, lo, hi });
        }
        Ok(())
    }

    /// `ψ_n` as a piecewise-linear function through `(tj, C_{jn}/√t)`.
    pub fn psi_function(&self, n: i64) -> PiecewisePolynomial {
        let t = self.t.get();
        let k = self.order() as i64 + 1;
        let s = 1.0 / t.sqrt();
        let nodes: Vec<(f64, f64)> = (n - k..=n + k)
            .map(|j| (t * j as f64, s * self.transition.at(j - n)))
            .collect();
        PiecewisePolynomial::linear_through(&nodes).expect("lattice nodes are increasing")
    }

    /// `ψ_n(x)` without the interior check.
    fn psi_value(&self, n: i64, x: f64) -> f64 {
        let t = self.t.get();
        let j = (x / t).floor() as i64;
        self.transition.at(j - n) * hat_eval(HatIndex(j), self.t, x)
            + self.transition.at(j + 1 - n) * hat_eval(HatIndex(j + 1), self.t, x)
    }

    /// `ψ_n(x)`; `n` must lie in the certified interior.
    pub fn psi_eval(&self, n: i64, x: f64) -> Result<f64> {
        self.check_interior(n)?;
        Ok(self.psi_value(n, x))
    }

    /// `⟨ψ_n, ψ_m⟩` over the whole window by exact piecewise quadrature.
    pub fn psi_gram(&self) -> WindowMatrix {
        let w = self.window;
        let psis: Vec<PiecewisePolynomial> = (w.lo..=w.hi).map(|n| self.psi_function(n)).collect();
        let reach = 2 * self.order() as i64 + 2;
        let rows: Vec<Vec<f64>> = (0..psis.len())
            .into_par_iter()
            .map(|i| {
                (0..psis.len())
                    .map(|j| {
                        if (i as i64 - j as i64).abs() > reach {
                            0.0
                        } else {
                            integrate_product(&[&psis[i], &psis[j]])
                        }
                    })
                    .collect()
            })
            .collect();
        WindowMatrix::from_fn(w, |n, m| rows[(n - w.lo) as usize][(m - w.lo) as usize])
    }

    /// The same Gram matrix from the symbol calculus: entries of `C G C`.
    pub fn psi_gram_algebraic(&self) -> WindowMatrix {
        let c = &self.transition;
        let ccg = c.compose(c).compose(&gram_coeffs());
        WindowMatrix::toeplitz(&ccg, self.window)
    }
}

/// `γ_t(A)x` in φ-coordinates. The support of `x` must stay `bandwidth(A)`
/// away from the edges of `A`'s window.
pub fn gamma_apply(a: &WindowMatrix, x: &LatticeVector) -> Result<LatticeVector> {
    let bw = bandwidth(a) as i64;
    let (min, max) = (a.lo() + bw, a.hi() - bw);
    if let Some((lo, hi)) = x.support() {
        if lo < min || hi > max {
            return Err(Error::SupportViolation { lo, hi, min, max });
        }
    }
    a.apply(x)
}

/// Largest `|n - m|` with a nonzero entry.
pub fn bandwidth(a: &WindowMatrix) -> usize {
    let m = a.matrix();
    let mut bw = 0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if m[(i, j)] != 0.0 {
                bw = bw.max(i.abs_diff(j));
            }
        }
    }
    bw
}

/// `‖Σ y_n φ_n^t‖²` for `y = Ax` two ways: exact quadrature of the function,
/// and `(2/3)‖y‖² + (1/6)⟨y, (S + S*)y⟩` with `S` the shift.
pub fn gamma_quadratic_forms(a: &WindowMatrix, x: &LatticeVector, t: LatticeScale) -> Result<(f64, f64)> {
    let y = gamma_apply(a, x)?;
    let tt = t.get();
    let s = 1.0 / tt.sqrt();
    let mut nodes = vec![(tt * (y.lo - 1) as f64, 0.0)];
    nodes.extend(y.values.iter().enumerate().map(|(i, v)| (tt * (y.lo + i as i64) as f64, s * v)));
    nodes.push((tt * (y.hi() + 1) as f64, 0.0));
    let f = PiecewisePolynomial::linear_through(&nodes)?;
    let quad = integrate_product(&[&f, &f]);
    let sq: f64 = y.values.iter().map(|v| v * v).sum();
    let cross: f64 = y.values.windows(2).map(|w| w[0] * w[1]).sum();
    Ok((quad, 2.0 / 3.0 * sq + 1.0 / 6.0 * 2.0 * cross))
}

/// Norm on `H_t` of the operator with φ-coordinate matrix `X`:
/// `‖G^{1/2} X G^{-1/2}‖`, with `G` truncated to `X`'s window.
///
/// Exact up to edge effects when `X` is negligible within ~30 indices of the
/// window edges.
pub fn frame_norm(x: &WindowMatrix) -> Result<f64> {
    let g = WindowMatrix::toeplitz(&gram_coeffs(), x.spec());
    let range = (1.0 / 3.0 - 1e-12, 1.0 + 1e-12);
    let half = matrix_power(g.matrix(), 0.5, range)?;
    let inv_half = matrix_power(g.matrix(), -0.5, range)?;
    Ok(spectral_norm(&(half * x.matrix() * inv_half)))
}

/// `‖γ_t(A)‖` for a finitely supported `A`.
pub fn gamma_norm(a: &WindowMatrix) -> Result<f64> {
    let spec = WindowSpec::around(a.lo(), a.hi(), FRAME_SLACK);
    frame_norm(&a.embed(spec)?)
}

/// Window that holds every nonzero entry of `β_t(S)` for a transition of order `K`.
pub fn beta_window(op: &GeneratorSum, t: LatticeScale, order: usize) -> WindowSpec {
    match pairing_ranges(op, t) {
        None => WindowSpec { lo: 0, hi: 0, pad: 0 },
        Some(((klo, khi), (llo, lhi))) => {
            let k = order as i64;
            WindowSpec { lo: klo.min(llo) - k, hi: khi.max(lhi) + k, pad: 0 }
        }
    }
}

/// Index ranges `(k, l)` for which `⟨φ_k, S φ_l⟩` can be nonzero, with one index of margin.
fn pairing_ranges(op: &GeneratorSum, t: LatticeScale) -> Option<((i64, i64), (i64, i64))> {
    let tt = t.get();
    op.active()
        .filter_map(|(_, s)| {
            let (fa, fb) = s.f.support()?;
            let (ga, gb) = s.g.support()?;
            let k = ((fa / tt).ceil() as i64 - 2, (fb / tt).floor() as i64 + 2);
            let l = (((fa - gb) / tt).ceil() as i64 - 2, ((fb - ga) / tt).floor() as i64 + 2);
            Some((k, l))
        })
        .reduce(|a, b| ((a.0 .0.min(b.0 .0), a.0 .1.max(b.0 .1)), (a.1 .0.min(b.1 .0), a.1 .1.max(b.1 .1))))
}

/// The φ-pairings `P_{kl} = ⟨φ_k, S φ_l⟩ = ∫ φ_k f (g ⋆ φ_l)` on their natural ranges.
///
/// `g ⋆ φ_0^t` is formed once as an exact piecewise polynomial; each pairing
/// is then a product of three piecewise polynomials integrated exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Pairings {
    pub k_lo: i64,
    pub l_lo: i64,
    pub matrix: DMatrix<f64>,
}

pub fn pairings(op: &GeneratorSum, t: LatticeScale) -> Option<Pairings> {
    let ((klo, khi), (llo, lhi)) = pairing_ranges(op, t)?;
    let tt = t.get();
    let nk = (khi - klo + 1) as usize;
    let nl = (lhi - llo + 1) as usize;
    let mut total = DMatrix::zeros(nk, nl);
    for (c, s) in op.active() {
        let conv = s.g.convolve(&hat_function(HatIndex(0), t));
        let (ga, gb) = s.g.support().expect("active terms have support");
        let rows: Vec<Vec<f64>> = (klo..=khi)
            .into_par_iter()
            .map(|k| {
                let phi = hat_function(HatIndex(k), t);
                let mut row = vec![0.0; nl];
                // supp(g ⋆ φ_l) = [t(l-1) + ga, t(l+1) + gb] must meet [t(k-1), t(k+1)]
                let lmin = (k as f64 - 2.0 - gb / tt).floor() as i64 - 1;
                let lmax = (k as f64 + 2.0 - ga / tt).ceil() as i64 + 1;
                for l in lmin.max(llo)..=lmax.min(lhi) {
                    let shifted = conv.translate(tt * l as f64);
                    row[(l - llo) as usize] = integrate_product(&[&phi, &s.f, &shifted]);
                }
                row
            })
            .collect();
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                total[(i, j)] += c * v;
            }
        }
    }
    Some(Pairings { k_lo: klo, l_lo: llo, matrix: total })
}

/// `β_t(S)` over a window, with a bound on its distance to the untruncated compression.
#[derive(Debug, Clone, PartialEq)]
pub struct Compressed {
    pub matrix: WindowMatrix,
    pub certificate: f64,
}

/// `β_t(S)_{nm} = Σ_{k,l} C_{kn} C_{lm} ⟨φ_k, S φ_l⟩` over the frame's window.
///
/// The window must contain [`beta_window`]; the entries outside it vanish
/// identically for the order-`K` transition. The certificate bounds the effect
/// of the transition's tail plus accumulated rounding.
pub fn beta(op: &GeneratorSum, frame: &PsiFrame) -> Result<Compressed> {
    let w = frame.window();
    let need = beta_window(op, frame.t(), frame.order());
    let Some(p) = pairings(op, frame.t()) else {
        return Ok(Compressed { matrix: WindowMatrix::zeros(w), certificate: 0.0 });
    };
    if w.lo > need.lo || w.hi < need.hi {
        return Err(Error::WindowTooSmall { lo: w.lo, hi: w.hi, need_lo: need.lo, need_hi: need.hi });
    }
    let c = frame.transition();
    let nk = p.matrix.nrows();
    let nl = p.matrix.ncols();
    let n = w.len();
    let ck = DMatrix::from_fn(nk, n, |i, j| c.at(p.k_lo + i as i64 - (w.lo + j as i64)));
    let cl = DMatrix::from_fn(nl, n, |i, j| c.at(p.l_lo + i as i64 - (w.lo + j as i64)));
    let b = ck.tr_mul(&(&p.matrix * cl));
    let pf = p.matrix.norm();
    let delta = 2.0 * c.tail_bound.unwrap_or(0.0);
    let l1 = c.l1_norm();
    let rounding = (nk + nl) as f64 * f64::EPSILON * l1 * l1 * pf;
    Ok(Compressed {
        matrix: WindowMatrix::new(w.lo, w.hi, w.pad, b)?,
        certificate: pf * delta * (2.0 * l1 + delta) + rounding,
    })
}

/// `β_t(S)` on its own natural window.
pub fn beta_natural(op: &GeneratorSum, t: LatticeScale, transition: &CoeffSequence) -> Result<Compressed> {
    beta(op, &PsiFrame::for_operator(op, t, transition.clone()))
}

/// φ-coordinate matrix of `α_t(T)` on `H_t`: `C T C^{-1}`, on `T`'s window
/// widened by `margin`. `C^{-1}` comes from a dense solve on that window.
pub fn alpha_coordinates(t_mat: &WindowMatrix, c: &CoeffSequence, margin: usize) -> Result<WindowMatrix> {
    let spec = WindowSpec::around(t_mat.lo(), t_mat.hi(), margin);
    let te = t_mat.embed(spec)?;
    let cw = WindowMatrix::toeplitz(c, spec);
    let inv = cw.matrix().clone().lu().try_inverse().ok_or(Error::Singular)?;
    WindowMatrix::new(spec.lo, spec.hi, spec.pad, cw.matrix() * te.matrix() * inv)
}

/// `‖β_t(α_t(T)) - T‖` over `T`'s window.
///
/// `α_t(T)` is realized through its φ-coordinate matrix `A = C T C^{-1}`, its
/// pairings are `G A`, and the compression applies `C` on both sides.
pub fn roundtrip(t_mat: &WindowMatrix, frame: &PsiFrame) -> Result<f64> {
    let c = frame.transition();
    let margin = c.order() + 2;
    let a = alpha_coordinates(t_mat, c, margin)?;
    let spec = a.spec();
    let cw = WindowMatrix::toeplitz(c, spec);
    let gw = WindowMatrix::toeplitz(&gram_coeffs(), spec);
    let back = cw.matrix() * gw.matrix() * a.matrix() * cw.matrix();
    let back = WindowMatrix::new(spec.lo, spec.hi, spec.pad, back)?;
    let t_spec = t_mat.spec();
    let diff = back.restrict(WindowSpec { pad: 0, ..t_spec })?.add_scaled(&t_mat.restrict(WindowSpec { pad: 0, ..t_spec })?, -1.0);
    Ok(diff.op_norm())
}

/// Banded approximation `T̃_ε = C_ε T C_ε^{-1}` of `α_t(T)` and its defect.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaApprox {
    pub band: BandToeplitz,
    /// φ-coordinate matrix of `T̃_ε`.
    pub approximant: WindowMatrix,
    /// `‖α_t(T) - T̃_ε‖` on `H_t`.
    pub defect: f64,
}

/// [`approx_alpha_with`] using the band approximant of the frame's transition at `eps`.
pub fn approx_alpha(t_mat: &WindowMatrix, frame: &PsiFrame, eps: f64) -> Result<AlphaApprox> {
    let band = frame.transition().band_approximant(eps)?;
    approx_alpha_with(t_mat, frame, band)
}

/// Defect of `C_ε T C_ε^{-1}` against `C T C^{-1}`, measured in the `H_t` norm.
///
/// The symbol of `C` is at least 1, so `C_ε` stays invertible while its
/// error is below 1.
pub fn approx_alpha_with(t_mat: &WindowMatrix, frame: &PsiFrame, band: BandToeplitz) -> Result<AlphaApprox> {
    if band.error >= 1.0 {
        return Err(Error::NotInvertible { eps: band.error, limit: 1.0 });
    }
    let margin = frame.order() + FRAME_SLACK;
    let exact = alpha_coordinates(t_mat, frame.transition(), margin)?;
    let approximant = alpha_coordinates(t_mat, &band.base, margin)?;
    let defect = frame_norm(&exact.add_scaled(&approximant, -1.0))?;
    Ok(AlphaApprox { band, approximant, defect })
}

/// `α_t(T)u` for grid samples `u`: `Σ T_{nm} ψ_n ⟨ψ_m, u⟩` with the inner
/// products taken by the midpoint rule. `T`'s window must lie inside the
/// frame's certified interior.
pub fn alpha_apply(t_mat: &WindowMatrix, frame: &PsiFrame, grid: &Grid, u: &DVector<f64>) -> Result<DVector<f64>> {
    let psi = psi_samples(t_mat, frame, grid)?;
    let v = psi.tr_mul(u) * grid.h;
    Ok(&psi * (t_mat.matrix() * v))
}

/// Grid matrix of `α_t(T)`: `Ψ T Ψᵀ h`.
pub fn alpha_grid_matrix(t_mat: &WindowMatrix, frame: &PsiFrame, grid: &Grid) -> Result<DMatrix<f64>> {
    let psi = psi_samples(t_mat, frame, grid)?;
    Ok(&psi * t_mat.matrix() * psi.transpose() * grid.h)
}

fn psi_samples(t_mat: &WindowMatrix, frame: &PsiFrame, grid: &Grid) -> Result<DMatrix<f64>> {
    let (lo, hi) = frame.window().interior();
    if t_mat.lo() < lo || t_mat.hi() > hi {
        return Err(Error::WindowTooSmall { lo, hi, need_lo: t_mat.lo(), need_hi: t_mat.hi() });
    }
    let nodes = grid.nodes();
    Ok(DMatrix::from_fn(grid.n, t_mat.len(), |i, j| frame.psi_value(t_mat.lo() + j as i64, nodes[i])))
}

/// `p_t u` as a piecewise-linear function: φ-coefficients `C² b` with `b_k = ⟨φ_k, u⟩`.
pub fn project(u: &PiecewisePolynomial, frame: &PsiFrame) -> PiecewisePolynomial {
    let Some((a, b)) = u.support() else {
        return PiecewisePolynomial::zero();
    };
    let t = frame.t();
    let tt = t.get();
    let klo = (a / tt).ceil() as i64 - 1;
    let khi = (b / tt).floor() as i64 + 1;
    let moments: Vec<f64> = (klo..=khi)
        .map(|k| integrate_product(&[&hat_function(HatIndex(k), t), u]))
        .collect();
    let c2 = frame.transition().compose(frame.transition());
    let reach = c2.order() as i64;
    let s = 1.0 / tt.sqrt();
    let mut nodes = vec![(tt * (klo - reach - 1) as f64, 0.0)];
    for j in klo - reach..=khi + reach {
        let y: f64 = (klo..=khi).map(|k| c2.at(j - k) * moments[(k - klo) as usize]).sum();
        nodes.push((tt * j as f64, s * y));
    }
    nodes.push((tt * (khi + reach + 1) as f64, 0.0));
    PiecewisePolynomial::linear_through(&nodes).expect("lattice nodes are increasing")
}

/// `‖u - p_t u‖_{L²}`, exact for the piecewise-linear projection.
pub fn projection_residual(u: &PiecewisePolynomial, frame: &PsiFrame) -> f64 {
    u.add_scaled(&project(u, frame), -1.0).l2_norm()
}
