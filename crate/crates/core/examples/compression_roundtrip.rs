//! `beta_t(S)` for the reference generator, its band structure, and how the
//! banded approximant of `alpha_t(T)` degrades with the band tolerance.

use roe_field::compression::{approx_alpha, beta_natural, standard_transition, PsiFrame};
use roe_field::line_ops::{ConvKernelOp, GeneratorSum};
use roe_field::{LatticeScale, WindowMatrix, WindowSpec};

fn main() -> roe_field::Result<()> {
    let op: GeneratorSum = ConvKernelOp::reference().into();
    let t = LatticeScale::new(0.5)?;
    let b = beta_natural(&op, t, standard_transition())?;
    let m = &b.matrix;
    println!("beta_t(S) at t = 1/2: window [{}, {}], norm {:.10}, certificate {:.2e}", m.lo(), m.hi(), m.op_norm(), b.certificate);
    for d in [0, 4, 16, 64] {
        println!("  largest entry {d} or more off the band: {:.3e}", m.off_band_max(d));
    }

    let spec = WindowSpec { lo: -3, hi: 3, pad: 0 };
    let shift = WindowMatrix::shift(spec);
    let frame = PsiFrame::standard(LatticeScale::new(1.0)?, -3, 3);
    println!("\n eps        band  defect     defect/eps");
    for eps in [1e-2, 5e-3, 2.5e-3, 1.25e-3] {
        let a = approx_alpha(&shift, &frame, eps)?;
        println!("{eps:.2e}  {:>4}  {:.3e}  {:.3}", a.band.propagation, a.defect, a.defect / eps);
    }
    Ok(())
}
