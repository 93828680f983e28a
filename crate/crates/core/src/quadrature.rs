//! Fixed-order Gauss–Legendre rules and compensated summation.
//!
//! Every 1D integral in the crate is split at the union of the operands'
//! breakpoints and integrated cell by cell with [`GAUSS_ORDER`] nodes, which
//! is exact for polynomial integrands of degree `2 * GAUSS_ORDER - 1 = 15`.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes per cell.
pub const GAUSS_ORDER: usize = 8;

/// Highest polynomial degree integrated exactly by one cell.
pub const EXACT_DEGREE: usize = 2 * GAUSS_ORDER - 1;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the `n`-point rule by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// The shared order-8 rule.
pub fn gauss8() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(GAUSS_ORDER))
}

/// Integrates `f` over each cell of a sorted partition. Zero-width cells are skipped.
pub fn integrate_partition<F: FnMut(f64) -> f64>(partition: &[f64], mut f: F) -> f64 {
    let rule = gauss8();
    let mut sum = NeumaierSum::default();
    for w in partition.windows(2) {
        if w[1] > w[0] {
            sum.add(rule.integrate(w[0], w[1], &mut f));
        }
    }
    sum.value()
}

/// Sorts and removes exact duplicates; keeps only points inside `[lo, hi]`
/// and always includes both ends.
pub fn partition_within(points: impl IntoIterator<Item = f64>, lo: f64, hi: f64) -> Vec<f64> {
    let mut pts: Vec<f64> = points
        .into_iter()
        .filter(|p| *p > lo && *p < hi)
        .collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    pts.dedup();
    pts
}

/// Kahan–Babuška–Neumaier compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Compensated sum of an iterator.
pub fn compensated_sum(iter: impl IntoIterator<Item = f64>) -> f64 {
    iter.into_iter().collect::<NeumaierSum>().value()
}

/// Composite Simpson rule on `n` (even) panels. Used as a test oracle only.
pub fn simpson<F: FnMut(f64) -> f64>(a: f64, b: f64, n: usize, mut f: F) -> f64 {
    assert!(n >= 2 && n.is_multiple_of(2), "Simpson needs an even panel count");
    let h = (b - a) / n as f64;
    let mut acc = NeumaierSum::default();
    acc.add(f(a));
    acc.add(f(b));
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc.add(w * f(a + i as f64 * h));
    }
    acc.value() * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        let r = gauss8();
        let s: f64 = r.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn exact_through_degree_fifteen() {
        let r = gauss8();
        for deg in 0..=EXACT_DEGREE as i32 {
            let got = r.integrate(0.0, 1.0, |x| x.powi(deg));
            let want = 1.0 / (deg as f64 + 1.0);
            assert!((got - want).abs() < 1e-14, "degree {deg}: {got} vs {want}");
        }
        // degree 16 is no longer exact
        let got = r.integrate(0.0, 1.0, |x| x.powi(16));
        assert!((got - 1.0 / 17.0).abs() > 1e-12);
    }

    #[test]
    fn known_nodes() {
        let r = GaussLegendre::new(2);
        assert!((r.nodes[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        let r3 = GaussLegendre::new(3);
        assert!((r3.weights[1] - 8.0 / 9.0).abs() < 1e-15);
        assert!(r3.nodes[1].abs() < 1e-15);
    }

    #[test]
    fn compensation_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
    }

    #[test]
    fn simpson_exact_for_cubics() {
        let v = simpson(-1.0, 2.0, 6, |x| x * x * x - x);
        assert!((v - (4.0 - 0.25 - 1.5)).abs() < 1e-13);
    }
}
