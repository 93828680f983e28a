//! Symbol calculus for bi-infinite symmetric Toeplitz operators.
//!
//! A symmetric Toeplitz operator with diagonals `a_{|n-m|}` acts on `ℓ²(ℤ)` as
//! multiplication by its symbol `a_0 + 2 Σ_{k≥1} a_k cos(kx)` on the circle.
//! The Gram matrix of the hat family has symbol `2/3 + cos(x)/3`, and the
//! transition operator `C = G^{-1/2}` is obtained from the Fourier
//! coefficients of `(2/3 + cos(x)/3)^{-1/2}`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{compensated_sum, NeumaierSum};
use crate::window::{WindowMatrix, WindowSpec};

/// Coefficients below this magnitude are excluded from decay fits.
pub const FIT_FLOOR: f64 = 1e-14;

/// Multiplier applied to the geometric tail extrapolation.
pub const TAIL_SAFETY: f64 = 10.0;

/// Order used internally to fit the decay when the requested `K` is small.
const MIN_FIT_ORDER: usize = 32;

/// Finite symmetric coefficient sequence `a_0, …, a_K` with an optional
/// certified bound on `Σ_{k>K} |a_k|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffSequence {
    pub coeffs: Vec<f64>,
    pub tail_bound: Option<f64>,
}

impl CoeffSequence {
    pub fn new(coeffs: Vec<f64>, tail_bound: Option<f64>) -> Self {
        assert!(!coeffs.is_empty(), "coefficient sequence needs a_0");
        assert!(tail_bound.is_none_or(|t| t >= 0.0), "tail bound must be non-negative");
        Self { coeffs, tail_bound }
    }

    /// Band data with no tail.
    pub fn exact(coeffs: Vec<f64>) -> Self {
        Self::new(coeffs, Some(0.0))
    }

    /// The identity operator.
    pub fn identity() -> Self {
        Self::exact(vec![1.0])
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Entry at signed offset `k`.
    pub fn at(&self, k: i64) -> f64 {
        self.coeffs.get(k.unsigned_abs() as usize).copied().unwrap_or(0.0)
    }

    fn tail(&self) -> f64 {
        self.tail_bound.unwrap_or(0.0)
    }

    /// `|a_0| + 2 Σ |a_k|`, plus the two-sided tail; bounds the operator norm.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs[0].abs() + 2.0 * compensated_sum(self.coeffs[1..].iter().map(|a| a.abs())) + 2.0 * self.tail()
    }

    pub fn symbol(&self) -> SymbolFunction {
        SymbolFunction::Cosine(self.coeffs.clone())
    }

    /// Coefficients of the product operator (two-sided convolution), kept to
    /// order `K_self + K_other`.
    pub fn compose(&self, other: &Self) -> Self {
        let k = self.order() + other.order();
        let ka = self.order() as i64;
        let mut out = Vec::with_capacity(k + 1);
        for d in 0..=k as i64 {
            let s = compensated_sum((-ka..=ka).map(|j| self.at(j) * other.at(d - j)));
            out.push(s);
        }
        let la = self.l1_norm();
        let lb = other.l1_norm();
        let ta = 2.0 * self.tail();
        let tb = 2.0 * other.tail();
        let tail = match (self.tail_bound, other.tail_bound) {
            (Some(_), Some(_)) => Some(0.5 * (la * tb + lb * ta + ta * tb)),
            _ => None,
        };
        Self { coeffs: out, tail_bound: tail }
    }

    /// `self - c · identity`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs[0] -= c;
        Self { coeffs, tail_bound: self.tail_bound }
    }

    /// Least-squares fit `log|a_k| ≈ log A + k log r` over the contiguous run
    /// `k ≥ 1` with `|a_k| > 1e-14`.
    pub fn decay_fit(&self) -> Result<DecayFit> {
        let usable: Vec<(f64, f64)> = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .take_while(|(_, a)| a.abs() > FIT_FLOOR)
            .map(|(k, a)| (k as f64, a.abs().ln()))
            .collect();
        if self.order() < 16 || usable.len() < 3 {
            return Err(Error::FitRefused { nonzeros: usable.len() });
        }
        let n = usable.len() as f64;
        let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
        let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = usable.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = usable.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let ratio = slope.exp();
        if ratio >= 1.0 {
            return Err(Error::NotDecaying { ratio });
        }
        Ok(DecayFit { amplitude: intercept.exp(), ratio, points: usable.len() })
    }

    /// Minimal band `M` whose certified operator-norm error is below `eps`.
    ///
    /// The certificate is the ℓ¹ bound `2(Σ_{M<k≤K} |a_k| + tail)`.
    pub fn truncate(&self, eps: f64) -> Result<BandToeplitz> {
        assert!(eps > 0.0, "eps must be positive");
        let tail = self.tail_bound.ok_or(Error::MissingTail)?;
        if 2.0 * tail >= eps {
            return Err(Error::IncreaseK { eps, tail: 2.0 * tail });
        }
        let dropped = self.dropped_mass();
        let m = (0..=self.order())
            .find(|&m| 2.0 * (dropped[m] + tail) < eps)
            .expect("m = K always satisfies the bound");
        let coeffs = self.coeffs[..=m].to_vec();
        Ok(BandToeplitz {
            base: CoeffSequence::exact(coeffs),
            propagation: m,
            error: 2.0 * (dropped[m] + tail),
        })
    }

    /// Banded approximant whose certified error equals `0.999·eps`.
    ///
    /// Starts from the band of [`truncate`](Self::truncate) and keeps only part
    /// of its outermost diagonal, so the error varies continuously with `eps`.
    pub fn band_approximant(&self, eps: f64) -> Result<BandToeplitz> {
        let band = self.truncate(eps)?;
        let m = band.propagation;
        let target = 0.999 * eps;
        if m == 0 || band.error >= target {
            return Ok(band);
        }
        let tail = self.tail();
        let dropped = self.dropped_mass();
        let am = self.coeffs[m];
        // 2 (θ|a_M| + dropped_M + tail) = target
        let theta = ((0.5 * target - dropped[m] - tail) / am.abs()).clamp(0.0, 1.0);
        let mut coeffs = band.base.coeffs.clone();
        coeffs[m] = am * (1.0 - theta);
        let error = 2.0 * (theta * am.abs() + dropped[m] + tail);
        Ok(BandToeplitz { base: CoeffSequence::exact(coeffs), propagation: m, error })
    }

    /// `dropped[m] = Σ_{m<k≤K} |a_k|`.
    fn dropped_mass(&self) -> Vec<f64> {
        let k = self.order();
        let mut out = vec![0.0; k + 1];
        let mut acc = NeumaierSum::default();
        for m in (0..k).rev() {
            acc.add(self.coeffs[m + 1].abs());
            out[m] = acc.value();
        }
        out
    }
}

/// Fitted geometric decay `|a_k| ≈ amplitude · ratio^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub amplitude: f64,
    pub ratio: f64,
    pub points: usize,
}

impl DecayFit {
    /// `TAIL_SAFETY · Σ_{k>K} amplitude · ratio^k`.
    pub fn tail_beyond(&self, k: usize) -> f64 {
        TAIL_SAFETY * self.amplitude * self.ratio.powi(k as i32 + 1) / (1.0 - self.ratio)
    }
}

/// Banded Toeplitz approximant `C_ε` with propagation `M` and certified
/// `‖C - C_ε‖ ≤ error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandToeplitz {
    pub base: CoeffSequence,
    pub propagation: usize,
    pub error: f64,
}

/// Smooth, even, 2π-periodic real function.
#[derive(Debug, Clone, PartialEq)]
pub enum SymbolFunction {
    /// `a_0 + 2 Σ a_k cos(kx)`.
    Cosine(Vec<f64>),
    /// `s(x)^{-1/2}` for a positive symbol `s`.
    InverseSqrt(Box<SymbolFunction>),
}

impl SymbolFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            SymbolFunction::Cosine(a) => {
                let tail = compensated_sum(a.iter().enumerate().skip(1).map(|(k, c)| 2.0 * c * (k as f64 * x).cos()));
                a.first().copied().unwrap_or(0.0) + tail
            }
            SymbolFunction::InverseSqrt(s) => s.eval(x).powf(-0.5),
        }
    }

    /// `(min, max)` over `points` equispaced samples of `[0, π]` (both ends included).
    pub fn range_on_grid(&self, points: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in 0..points {
            let x = PI * j as f64 / (points - 1) as f64;
            let v = self.eval(x);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// `(1/2π)∫ s(x) cos(kx) dx` for `k = 0..=order` by the periodic trapezoid rule.
    pub fn fourier_coeffs(&self, order: usize, quad_points: usize) -> Result<Vec<f64>> {
        if !quad_points.is_power_of_two() || quad_points < 4 * order.max(1) {
            return Err(Error::Aliasing { order, quad_points });
        }
        let samples: Vec<f64> = (0..quad_points)
            .map(|j| self.eval(2.0 * PI * j as f64 / quad_points as f64))
            .collect();
        Ok((0..=order)
            .map(|k| {
                let s = compensated_sum(samples.iter().enumerate().map(|(j, v)| {
                    // exact integer reduction of the phase keeps cos accurate for large k
                    let phase = (k * j) % quad_points;
                    v * (2.0 * PI * phase as f64 / quad_points as f64).cos()
                }));
                s / quad_points as f64
            })
            .collect())
    }
}

/// `G_{nm}`: `(2/3, 1/6)`, band of width 1 with zero tail.
pub fn gram_coeffs() -> CoeffSequence {
    CoeffSequence::exact(vec![2.0 / 3.0, 1.0 / 6.0])
}

/// Coefficients `a_0..a_K` of `C = G^{-1/2}` with a tail certificate.
///
/// The certificate sums the computed coefficients between `K` and an internal
/// fit order (at least 32), then adds the geometric extrapolation of the fitted
/// decay beyond it, multiplied by [`TAIL_SAFETY`].
pub fn inv_sqrt_coeffs(order: usize, quad_points: usize) -> Result<CoeffSequence> {
    let symbol = SymbolFunction::InverseSqrt(Box::new(gram_coeffs().symbol()));
    let a = symbol.fourier_coeffs(order, quad_points)?;
    let fit_order = order.max(MIN_FIT_ORDER);
    let wide = if fit_order == order {
        a.clone()
    } else {
        symbol.fourier_coeffs(fit_order, quad_points.max((4 * fit_order).next_power_of_two()))?
    };
    let fit = CoeffSequence::new(wide.clone(), None).decay_fit()?;
    let between = compensated_sum(wide[order + 1..].iter().map(|v| v.abs()));
    let tail = between + fit.tail_beyond(fit_order);
    Ok(CoeffSequence::new(a, Some(tail)))
}

/// Toeplitz operator norm bracket: `lower` is the symbol's sup on a grid of
/// `[0, π]`, `upper` the ℓ¹ bound.
pub fn toeplitz_norm(c: &CoeffSequence) -> (f64, f64) {
    let (lo, hi) = c.symbol().range_on_grid(1 << 14 | 1);
    (lo.abs().max(hi.abs()), c.l1_norm())
}

/// `G_N^{-1/2}` on the window `[-N, N]` by symmetric eigendecomposition of the
/// truncated tridiagonal Gram matrix.
pub fn dense_inv_sqrt_oracle(n: usize) -> Result<WindowMatrix> {
    assert!(n >= 8, "oracle window half-width must be at least 8");
    let spec = WindowSpec { lo: -(n as i64), hi: n as i64, pad: n / 2 };
    let g = WindowMatrix::toeplitz(&gram_coeffs(), spec);
    let root = matrix_power(g.matrix(), -0.5, (1.0 / 3.0, 1.0))?;
    WindowMatrix::new(spec.lo, spec.hi, spec.pad, root)
}

/// `A^p` for symmetric `A` whose spectrum must lie in the open interval `range`.
pub fn matrix_power(a: &DMatrix<f64>, p: f64, range: (f64, f64)) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(a.clone());
    for &l in eig.eigenvalues.iter() {
        if !(l > range.0 && l < range.1) {
            return Err(Error::Spectrum(l));
        }
    }
    let mut v = eig.eigenvectors.clone();
    for (j, l) in eig.eigenvalues.iter().enumerate() {
        let s = l.powf(p);
        v.column_mut(j).scale_mut(s);
    }
    Ok(v * eig.eigenvectors.transpose())
}
