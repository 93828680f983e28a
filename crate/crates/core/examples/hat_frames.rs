//! Scaled hats: Gram entries two ways, the refinement identity, and lattice
//! interpolation of a smooth bump.

use roe_field::lattice::{hat_function, hat_inner, hat_inner_quadrature, interpolate_on_lattice, refine, refinement_residual};
use roe_field::report::Refinement;
use roe_field::{HatIndex, LatticeScale, PiecewisePolynomial};

fn main() -> roe_field::Result<()> {
    for t in [1.0, 0.25] {
        let t = LatticeScale::new(t)?;
        for m in 0..3 {
            let q = hat_inner_quadrature(HatIndex(0), HatIndex(m), t);
            println!("t={:<5} <phi_0, phi_{m}> = {q:.15} (exact {:.15})", t.get(), hat_inner(HatIndex(0), HatIndex(m)));
        }
        let p = hat_function(HatIndex(3), t);
        println!("          |phi_3| = {:.15}", p.l2_norm());
    }

    let t = LatticeScale::new(0.5)?;
    println!("\nrefinement of phi_1 at 2t = 1:");
    for (k, c) in refine(HatIndex(1)) {
        println!("  {c:.6} * phi_{}", k.0);
    }
    for r in [Refinement::Forced, Refinement::Doubled] {
        let res = refinement_residual(HatIndex(1), t, &r.coeffs(HatIndex(1)), 4000);
        println!("  {r:?} coefficients: max residual {res:.3e}");
    }

    // a C^1 cubic bump on [-1, 1]; pieces are in local coordinates
    let bump = PiecewisePolynomial::new(vec![-1.0, 0.0, 1.0], vec![vec![0.0, 0.0, 3.0, -2.0], vec![1.0, 0.0, -3.0, 2.0]])?;
    println!("\ninterpolation error of a C^1 bump:");
    for k in 1..=6 {
        let t = LatticeScale::dyadic(k);
        let err = bump.add_scaled(&interpolate_on_lattice(&bump, t), -1.0).l2_norm();
        println!("  t = 2^-{k}: {err:.3e}");
    }
    Ok(())
}
