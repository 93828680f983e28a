//! Scaled hat functions `φ_n^t(x) = t^{-1/2} φ_0(x/t - n)` on the lattice `tℤ`.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::piecewise::{integrate_product, PiecewisePolynomial};

/// Lattice spacing `t ∈ (0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct LatticeScale(f64);

impl LatticeScale {
    pub fn new(t: f64) -> Result<Self> {
        if t > 0.0 && t <= 1.0 {
            Ok(Self(t))
        } else {
            Err(Error::InvalidScale(t))
        }
    }

    /// `2^{-k}`.
    pub fn dyadic(k: u32) -> Self {
        Self(0.5f64.powi(k as i32))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for LatticeScale {
    type Error = Error;
    fn try_from(t: f64) -> Result<Self> {
        Self::new(t)
    }
}

impl From<LatticeScale> for f64 {
    fn from(t: LatticeScale) -> f64 {
        t.0
    }
}

/// Lattice index `n` of `φ_n^t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HatIndex(pub i64);

/// The unit tent `φ_0`.
fn unit_hat(s: f64) -> f64 {
    let a = s.abs();
    if a <= 1.0 {
        1.0 - a
    } else {
        0.0
    }
}

/// `φ_n^t(x)`.
pub fn hat_eval(n: HatIndex, t: LatticeScale, x: f64) -> f64 {
    let t = t.get();
    unit_hat(x / t - n.0 as f64) / t.sqrt()
}

/// `φ_n^t` as a piecewise-linear function with breakpoints `t(n-1), tn, t(n+1)`.
pub fn hat_function(n: HatIndex, t: LatticeScale) -> PiecewisePolynomial {
    let t = t.get();
    let peak = 1.0 / t.sqrt();
    let k = n.0 as f64;
    PiecewisePolynomial::linear_through(&[
        (t * (k - 1.0), 0.0),
        (t * k, peak),
        (t * (k + 1.0), 0.0),
    ])
    .expect("hat nodes are increasing")
}

/// Closed-form Gram entry `⟨φ_n, φ_m⟩`; the same for every `t`.
pub fn hat_inner(n: HatIndex, m: HatIndex) -> f64 {
    match (n.0 - m.0).abs() {
        0 => 2.0 / 3.0,
        1 => 1.0 / 6.0,
        _ => 0.0,
    }
}

/// `⟨φ_n^t, φ_m^t⟩` by Gauss–Legendre quadrature on the merged breakpoints.
pub fn hat_inner_quadrature(n: HatIndex, m: HatIndex, t: LatticeScale) -> f64 {
    integrate_product(&[&hat_function(n, t), &hat_function(m, t)])
}

/// Coefficients expressing `φ_n^{2t}` in the family `{φ_k^t}`.
///
/// Pointwise evaluation at the nodes `2tn` and `t(2n ± 1)` forces
/// `√2/2` on the center and `√2/4` on the two neighbours.
pub fn refine(n: HatIndex) -> [(HatIndex, f64); 3] {
    let c = SQRT_2 / 2.0;
    let s = SQRT_2 / 4.0;
    [
        (HatIndex(2 * n.0), c),
        (HatIndex(2 * n.0 - 1), s),
        (HatIndex(2 * n.0 + 1), s),
    ]
}

/// Maximum of `|φ_n^{2t}(x) - Σ c_k φ_k^t(x)|` over a uniform grid of
/// `samples` points on `[2t(n-1) - t, 2t(n+1) + t]`.
pub fn refinement_residual(n: HatIndex, t: LatticeScale, coeffs: &[(HatIndex, f64)], samples: usize) -> f64 {
    let tt = t.get();
    let coarse = 2.0 * tt;
    let lo = coarse * (n.0 as f64 - 1.0) - tt;
    let hi = coarse * (n.0 as f64 + 1.0) + tt;
    let mut worst: f64 = 0.0;
    for i in 0..=samples {
        let x = lo + (hi - lo) * i as f64 / samples as f64;
        let lhs = unit_hat(x / coarse - n.0 as f64) / coarse.sqrt();
        let rhs: f64 = coeffs.iter().map(|(k, c)| c * hat_eval(*k, t, x)).sum();
        worst = worst.max((lhs - rhs).abs());
    }
    worst
}

/// The piecewise-linear `g_t` with `g_t(tn) = f(tn)` for every `n`.
pub fn interpolate_on_lattice(f: &PiecewisePolynomial, t: LatticeScale) -> PiecewisePolynomial {
    let Some((a, b)) = f.support() else {
        return PiecewisePolynomial::zero();
    };
    let tt = t.get();
    // nodes strictly inside (a - t, b + t); the two end nodes carry value 0
    let first = (a / tt).ceil() as i64;
    let last = (b / tt).floor() as i64;
    let mut nodes: Vec<(f64, f64)> = Vec::new();
    nodes.push((tt * (first - 1) as f64, 0.0));
    for n in first..=last {
        let x = tt * n as f64;
        nodes.push((x, f.eval(x)));
    }
    nodes.push((tt * (last + 1) as f64, 0.0));
    PiecewisePolynomial::linear_through(&nodes).expect("lattice nodes are increasing")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: f64) -> LatticeScale {
        LatticeScale::new(v).unwrap()
    }

    #[test]
    fn scale_bounds() {
        assert!(LatticeScale::new(0.0).is_err());
        assert!(LatticeScale::new(-0.5).is_err());
        assert!(LatticeScale::new(1.5).is_err());
        assert!(LatticeScale::new(f64::NAN).is_err());
        assert_eq!(LatticeScale::new(1.0).unwrap().get(), 1.0);
        assert_eq!(LatticeScale::dyadic(3).get(), 0.125);
    }

    #[test]
    fn hat_eval_examples() {
        assert_eq!(hat_eval(HatIndex(0), t(1.0), 0.0), 1.0);
        assert_eq!(hat_eval(HatIndex(0), t(1.0), 2.0), 0.0);
        assert_eq!(hat_eval(HatIndex(3), t(0.25), 0.75), 2.0);
        // support is exactly [t(n-1), t(n+1)]
        assert_eq!(hat_eval(HatIndex(3), t(0.25), 0.5), 0.0);
        assert_eq!(hat_eval(HatIndex(3), t(0.25), 1.0), 0.0);
        assert!(hat_eval(HatIndex(3), t(0.25), 0.5 + 1e-9) > 0.0);
    }

    #[test]
    fn piecewise_form_agrees_with_formula() {
        let tt = t(0.3);
        let h = hat_function(HatIndex(-2), tt);
        for i in 0..100 {
            let x = -1.0 + 0.9 * i as f64 / 100.0;
            assert!((h.eval(x) - hat_eval(HatIndex(-2), tt, x)).abs() < 1e-14);
        }
    }

    #[test]
    fn closed_form_gram() {
        assert_eq!(hat_inner(HatIndex(0), HatIndex(0)), 2.0 / 3.0);
        assert_eq!(hat_inner(HatIndex(5), HatIndex(6)), 1.0 / 6.0);
        assert_eq!(hat_inner(HatIndex(0), HatIndex(2)), 0.0);
    }

    #[test]
    fn quadrature_gram() {
        assert!((hat_inner_quadrature(HatIndex(0), HatIndex(0), t(1.0)) - 2.0 / 3.0).abs() < 1e-12);
        assert!((hat_inner_quadrature(HatIndex(0), HatIndex(1), t(0.5)) - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(hat_inner_quadrature(HatIndex(0), HatIndex(3), t(1.0)), 0.0);
        assert_eq!(hat_inner_quadrature(HatIndex(4), HatIndex(2), t(0.37)), 0.0);
    }

    #[test]
    fn refinement_examples() {
        let r = refine(HatIndex(4));
        let idx: Vec<i64> = r.iter().map(|(k, _)| k.0).collect();
        assert_eq!(idx, vec![8, 7, 9]);
        let half = t(0.5);
        assert!(refinement_residual(HatIndex(0), half, &refine(HatIndex(0)), 4000) <= 1e-12);
        // norm of the refined combination
        let combo = refine(HatIndex(0))
            .iter()
            .fold(PiecewisePolynomial::zero(), |acc, (k, c)| acc.add_scaled(&hat_function(*k, half), *c));
        assert!((combo.l2_norm() - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn displayed_coefficients_fail_pointwise() {
        let wrong = [
            (HatIndex(0), SQRT_2),
            (HatIndex(-1), SQRT_2 / 2.0),
            (HatIndex(1), SQRT_2 / 2.0),
        ];
        let res = refinement_residual(HatIndex(0), t(0.5), &wrong, 4000);
        // the doubled combination overshoots the peak 1/√(2t) = 1 by exactly 1
        assert!((res - 1.0).abs() < 1e-12, "{res}");
    }

    #[test]
    fn interpolation_fixed_point_and_error() {
        let f = hat_function(HatIndex(0), t(1.0));
        let g = interpolate_on_lattice(&f, t(1.0));
        assert!(f.add_scaled(&g, -1.0).l2_norm() < 1e-15);

        let ramp = PiecewisePolynomial::new(vec![0.0, 1.0], vec![vec![0.0, 1.0]]).unwrap();
        let g = interpolate_on_lattice(&ramp, t(0.25));
        let err = ramp.add_scaled(&g, -1.0).l2_norm();
        // only [1, 1.25] contributes: ∫_0^{1/4} (1 - 4s)^2 ds = 1/12
        assert!((err - (1.0f64 / 12.0).sqrt()).abs() < 1e-14);
        assert!(err <= 0.25 * 3f64.sqrt());
        for n in -2..8 {
            let x = 0.25 * n as f64;
            assert!((g.eval(x) - ramp.eval(x)).abs() < 1e-15);
        }
        let (lo, hi) = g.support().unwrap();
        assert!(lo >= -0.25 && hi <= 1.25);
    }
}
