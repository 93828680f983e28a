//! Generators `S_{f,g} u(x) = f(x) (g * u)(x)`: exact application to a
//! piecewise polynomial, the grid oracle for the norm, and propagation.

use roe_field::line_ops::{norm_oracle, propagation_probe, ConvKernelOp, GeneratorSum};
use roe_field::PiecewisePolynomial;

fn main() -> roe_field::Result<()> {
    let s = ConvKernelOp::reference();
    let u = PiecewisePolynomial::tent(0.5, 0.25, 1.0);
    let (su, cert) = s.apply(&u);
    println!("S u at x = 0.5: {:.12} (degree reduction certificate {cert:.1e})", su.eval(0.5));
    println!("reach {:?}, propagation {}, Schur bound {}", s.reach(), s.propagation(), s.schur_bound());

    let op: GeneratorSum = s.into();
    for h in [1.0 / 32.0, 1.0 / 128.0] {
        let o = norm_oracle(&op, h)?;
        println!("h = {h:<9} |S| ~ {:.10} (increment {:.2e})", o.value, o.increment);
    }

    let narrow = ConvKernelOp::new(PiecewisePolynomial::tent(0.0, 1.0, 1.0), PiecewisePolynomial::tent(0.0, 0.25, 4.0));
    let op: GeneratorSum = narrow.into();
    println!("\nnarrow kernel, propagation {}:", op.propagation());
    for sep in [0.125, 0.25, 0.5, 1.0] {
        println!("  |chi_A S chi_B| at separation {sep}: {:.3e}", propagation_probe(&op, sep)?);
    }
    Ok(())
}
