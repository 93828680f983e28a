//! Fourier coefficients of `G^{-1/2}` from the symbol, checked against a
//! dense eigendecomposition, plus their decay and band truncations.

use roe_field::toeplitz::{dense_inv_sqrt_oracle, gram_coeffs, inv_sqrt_coeffs, toeplitz_norm};

fn main() -> roe_field::Result<()> {
    let g = gram_coeffs();
    let (lo, hi) = toeplitz_norm(&g.shifted(2.0 / 3.0));
    println!("|2/3 I - G| in [{lo}, {hi}]");

    let c = inv_sqrt_coeffs(64, 4096)?;
    let dense = dense_inv_sqrt_oracle(256)?;
    println!("\n k  coefficient               dense oracle");
    for k in [0, 1, 2, 5, 10, 20] {
        println!("{k:>2}  {:+.17e}  {:+.17e}", c.at(k), dense.get(0, k));
    }

    let fit = c.decay_fit()?;
    println!("\nfitted |a_k| ~ {:.3} * {:.4}^k over {} points (2 - sqrt 3 = {:.4})", fit.amplitude, fit.ratio, fit.points, 2.0 - 3f64.sqrt());
    println!("tail bound beyond K = 64: {:.3e}", c.tail_bound.unwrap_or(f64::NAN));

    let id = c.compose(&c).compose(&g).shifted(1.0);
    let worst = (0..=id.order() as i64).map(|k| id.at(k).abs()).fold(0.0, f64::max);
    println!("C * C * G - I: largest coefficient {worst:.3e}");

    println!("\n eps      band  certified error");
    for eps in [1e-2, 1e-4, 1e-8] {
        let b = c.truncate(eps)?;
        println!("{eps:.0e}  {:>5}  {:.3e}", b.propagation, b.error);
    }
    Ok(())
}
