//! `|beta_{t0 - d}(S) - beta_{t0}(S)|` as `d` shrinks, with a fitted modulus.

use roe_field::field::FieldLab;
use roe_field::line_ops::{ConvKernelOp, GeneratorSum};

fn main() -> roe_field::Result<()> {
    let op: GeneratorSum = ConvKernelOp::reference().into();
    let t0 = 0.5;
    let deltas: Vec<f64> = (3..=9).map(|k| t0 * 0.5f64.powi(k)).collect();
    let r = FieldLab::default().continuity_scan(&op, t0, &deltas)?;
    for (d, v) in r.deltas.iter().zip(&r.differences) {
        println!("delta = {d:<12} difference = {v:.4e}  ratio = {:.3}", v / d);
    }
    if let Some((c, p)) = r.fitted_modulus {
        println!("fit: difference ~ {c:.3} * delta^{p:.3}");
    }
    println!("monotone: {}", r.is_monotone());
    Ok(())
}
