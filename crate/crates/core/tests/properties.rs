use proptest::prelude::*;
use roe_field::compression::{gamma_norm, roundtrip, PsiFrame};
use roe_field::lattice::{hat_function, hat_inner, hat_inner_quadrature, refine, refinement_residual};
use roe_field::line_ops::{grid_discretize, op_norm_oracle, propagation_probe, ConvKernelOp, GeneratorSum};
use roe_field::toeplitz::inv_sqrt_coeffs;
use roe_field::{CoeffSequence, HatIndex, LatticeScale, PiecewisePolynomial, WindowMatrix, WindowSpec};

fn scale() -> impl Strategy<Value = LatticeScale> {
    (1e-3f64..=1.0).prop_map(|t| LatticeScale::new(t).unwrap())
}

fn tent() -> impl Strategy<Value = PiecewisePolynomial> {
    (-1.0f64..1.0, 0.05f64..1.0, -2.0f64..2.0).prop_map(|(c, w, h)| PiecewisePolynomial::tent(c, w, h))
}

fn cubic_pieces() -> impl Strategy<Value = PiecewisePolynomial> {
    (-2.0f64..0.0, prop::collection::vec((0.05f64..0.8, prop::collection::vec(-1.0f64..1.0, 1..=4)), 1..4)).prop_map(
        |(start, pieces)| {
            let mut bps = vec![start];
            for (w, _) in &pieces {
                bps.push(bps.last().unwrap() + w);
            }
            PiecewisePolynomial::new(bps, pieces.into_iter().map(|p| p.1).collect()).unwrap()
        },
    )
}

fn band_matrix(half: i64, band: i64) -> impl Strategy<Value = WindowMatrix> {
    let n = (2 * half + 1) as usize;
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
        let spec = WindowSpec { lo: -half, hi: half, pad: 0 };
        WindowMatrix::from_fn(spec, |i, j| {
            if (i - j).abs() <= band {
                v[((i + half) as usize) * n + (j + half) as usize]
            } else {
                0.0
            }
        })
    })
}

fn transition() -> &'static CoeffSequence {
    roe_field::compression::standard_transition()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hats_have_norm_sqrt_two_thirds(n in -1000i64..1000, t in scale()) {
        let p = hat_function(HatIndex(n), t);
        prop_assert!((p.l2_norm() - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gram_entries_do_not_depend_on_t(n in -50i64..50, d in -3i64..=3, s in scale(), t in scale()) {
        let (a, b) = (HatIndex(n), HatIndex(n + d));
        let qs = hat_inner_quadrature(a, b, s);
        let qt = hat_inner_quadrature(a, b, t);
        prop_assert!((qs - qt).abs() < 1e-12);
        prop_assert!((qs - hat_inner(a, b)).abs() < 1e-12);
    }

    #[test]
    fn forced_refinement_is_exact(n in -100i64..100, t in 1e-3f64..=0.5) {
        let t = LatticeScale::new(t).unwrap();
        let r = refinement_residual(HatIndex(n), t, &refine(HatIndex(n)), 500);
        prop_assert!(r <= 1e-12 * (2.0 * t.get()).powf(-0.5));
    }

    #[test]
    fn products_and_convolutions_respect_supports(f in cubic_pieces(), g in tent()) {
        let (fa, fb) = f.support().unwrap();
        let (ga, gb) = g.support().unwrap();
        if let Some((a, b)) = f.mul(&g).support() {
            prop_assert!(a >= fa.max(ga) - 1e-12 && b <= fb.min(gb) + 1e-12);
        }
        let c = f.convolve(&g);
        if let Some((a, b)) = c.support() {
            prop_assert!(a >= fa + ga - 1e-12 && b <= fb + gb + 1e-12);
        }
        // convolution integrates to the product of integrals
        prop_assert!((c.integral() - f.integral() * g.integral()).abs() < 1e-10);
    }

    #[test]
    fn no_propagation_beyond_the_kernel(f in tent(), g in tent()) {
        let op: GeneratorSum = ConvKernelOp::new(f, g).into();
        let p = op.propagation();
        prop_assert!(propagation_probe(&op, p).unwrap() <= 1e-12);
        prop_assert!(propagation_probe(&op, p + 0.1).unwrap() <= 1e-12);
    }

    #[test]
    fn schur_bound_dominates_grid_norm(f in cubic_pieces(), g in tent()) {
        let s = ConvKernelOp::new(f, g);
        let op: GeneratorSum = s.clone().into();
        let Some((a, b)) = op.reach() else { return Ok(()); };
        let h = 1.0 / 64.0;
        let norm = op_norm_oracle(&grid_discretize(&op, a - 4.0 * h, b + 4.0 * h, h).unwrap()).unwrap();
        prop_assert!(norm <= s.schur_bound() * 1.01 + 1e-12, "{} > {}", norm, s.schur_bound());
    }

    #[test]
    fn frame_ratio_within_bounds(a in band_matrix(5, 2)) {
        let n = a.op_norm();
        prop_assume!(n > 1e-6);
        let r = gamma_norm(&a).unwrap() / n;
        prop_assert!(r >= 1.0 / 3f64.sqrt() - 1e-9 && r <= 3f64.sqrt() + 1e-9, "{}", r);
    }

    #[test]
    fn round_trip_recovers_band_matrices(a in band_matrix(3, 3), t in scale()) {
        let frame = PsiFrame::new(t, transition().clone(), WindowSpec::around(-3, 3, 64)).unwrap();
        prop_assert!(roundtrip(&a, &frame).unwrap() <= 1e-8 * a.op_norm().max(1.0));
    }

    #[test]
    fn composition_multiplies_symbols(a in prop::collection::vec(-1.0f64..1.0, 1..6), b in prop::collection::vec(-1.0f64..1.0, 1..6), x in 0.0f64..3.1) {
        let (a, b) = (CoeffSequence::exact(a), CoeffSequence::exact(b));
        let ab = a.compose(&b);
        let (sa, sb, sab) = (a.symbol(), b.symbol(), ab.symbol());
        prop_assert!((sab.eval(x) - sa.eval(x) * sb.eval(x)).abs() < 1e-12);
        prop_assert_eq!(ab, b.compose(&a));
    }
}

#[test]
fn inv_sqrt_is_stable_in_quadrature() {
    let a = inv_sqrt_coeffs(32, 256).unwrap();
    let b = inv_sqrt_coeffs(32, 4096).unwrap();
    for k in 0..=32 {
        assert!((a.at(k) - b.at(k)).abs() < 1e-14, "{k}");
    }
}
