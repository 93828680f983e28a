//! The orthonormal family `psi_n = sum_m C_{mn} phi_m`, the frame bounds of
//! `gamma_t`, and the round trip `beta_t(alpha_t(T)) = T`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roe_field::compression::{gamma_norm, roundtrip, PsiFrame};
use roe_field::{LatticeScale, WindowMatrix, WindowSpec};

fn main() -> roe_field::Result<()> {
    for t in [1.0, 0.125] {
        let frame = PsiFrame::standard(LatticeScale::new(t)?, -4, 4);
        let gram = frame.psi_gram();
        let dev = gram.add_scaled(&WindowMatrix::identity(frame.window()), -1.0).interior_matrix().amax();
        println!("t = {t:<6} interior psi-Gram deviation {dev:.3e}");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let spec = WindowSpec { lo: -6, hi: 6, pad: 0 };
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..20 {
        let a = WindowMatrix::from_fn(spec, |n, m| if (n - m).abs() <= 2 { rng.random_range(-1.0..1.0) } else { 0.0 });
        let r = gamma_norm(&a)? / a.op_norm();
        lo = lo.min(r);
        hi = hi.max(r);
    }
    println!("\n|gamma(A)| / |A| over 20 band matrices: [{lo:.4}, {hi:.4}] within [{:.4}, {:.4}]", 1.0 / 3f64.sqrt(), 3f64.sqrt());

    let frame = PsiFrame::standard(LatticeScale::new(0.5)?, -3, 3);
    let tspec = WindowSpec { lo: -3, hi: 3, pad: 0 };
    println!("\nround trip, identity: {:.3e}", roundtrip(&WindowMatrix::identity(tspec), &frame)?);
    println!("round trip, shift:    {:.3e}", roundtrip(&WindowMatrix::shift(tspec), &frame)?);
    Ok(())
}
