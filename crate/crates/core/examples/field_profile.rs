//! Norms of three sections `t -> h(t) + beta_t(S)` across the dyadic grid
//! and at `t = 0`.

use roe_field::field::{FieldElement, FieldLab, MatrixPath};
use roe_field::line_ops::{ConvKernelOp, GeneratorSum};
use roe_field::{WindowMatrix, WindowSpec};

fn main() -> roe_field::Result<()> {
    let lab = FieldLab::default();
    let op: GeneratorSum = ConvKernelOp::reference().into();
    let spec = WindowSpec { lo: -3, hi: 3, pad: 0 };
    let m = WindowMatrix::identity(spec).add_scaled(&WindowMatrix::shift(spec), 0.5).scale(0.4);
    let path = MatrixPath::scaled(&[(1.0, 1.0)], &m)?;
    let grid: Vec<f64> = (0..=6).map(|k| 0.5f64.powi(k)).chain([0.0]).collect();

    let elements = [
        ("path", FieldElement::new(path.clone(), GeneratorSum::zero(), 1.0 / 256.0)?),
        ("generator", FieldElement::new(MatrixPath::zero(), op.clone(), 1.0 / 256.0)?),
        ("mixed", FieldElement::new(path, op, 1.0 / 256.0)?),
    ];
    print!("{:<10}", "t");
    for t in &grid {
        print!("{t:>11.6}");
    }
    println!();
    for (name, a) in &elements {
        print!("{name:<10}");
        for v in lab.field_profile(a, &grid)? {
            print!("{v:>11.6}");
        }
        println!();
    }
    Ok(())
}
