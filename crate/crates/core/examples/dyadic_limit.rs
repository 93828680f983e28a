//! `|beta_t(S)|` along `t = 2^-k` creeping up to the grid oracle `|S|`.

use roe_field::field::FieldLab;
use roe_field::line_ops::{norm_oracle, ConvKernelOp, GeneratorSum};

fn main() -> roe_field::Result<()> {
    let op: GeneratorSum = ConvKernelOp::reference().into();
    let oracle = norm_oracle(&op, 1.0 / 256.0)?;
    let grid: Vec<f64> = (0..=6).map(|k| 0.5f64.powi(k)).collect();
    let profile = FieldLab::default().norm_profile(&op, &grid, oracle)?;
    println!("oracle |S| = {:.12} +- {:.1e}", oracle.value, oracle.tolerance());
    println!(" t          |beta_t(S)|      gap");
    for (s, gap) in profile.samples.iter().zip(profile.gaps()) {
        println!("{:<9}  {:.12}  {gap:.3e}", s.t, s.value);
    }
    profile.write_csv(std::io::stdout()).map_err(|e| roe_field::Error::Precondition(e.to_string()))?;
    Ok(())
}
