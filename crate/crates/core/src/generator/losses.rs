//! Batch-level auxiliary losses with analytic gradients.

use super::GeneratorError;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

/// `MSE(mean(gen), alpha·mean(real) + (1-alpha)·global)` and its gradient
/// with respect to `gen`.
pub fn mean_loss(
    gen: ArrayView2<f64>,
    real: ArrayView2<f64>,
    global_mean: ArrayView1<f64>,
    alpha: f64,
) -> Result<(f64, Array2<f64>), GeneratorError> {
    let (n, w) = gen.dim();
    if n == 0 || real.nrows() == 0 {
        return Err(GeneratorError::EmptyBatch);
    }
    if w == 0 {
        return Ok((0.0, Array2::zeros((n, 0))));
    }
    let target = alpha * &real.mean_axis(Axis(0)).unwrap() + (1.0 - alpha) * &global_mean;
    let diff = gen.mean_axis(Axis(0)).unwrap() - &target;
    let loss = diff.mapv(|d| d * d).sum() / w as f64;
    let row = diff.mapv(|d| 2.0 * d / (w as f64 * n as f64));
    let grad = Array2::from_shape_fn((n, w), |(_, j)| row[j]);
    Ok((loss, grad))
}

/// Adjusted correlation `sign(R)·sqrt(max(0, 1-(1-R²)(n-1)/(n-2)))`.
pub fn adjust(r: f64, n: usize) -> f64 {
    let c = (n as f64 - 1.0) / (n as f64 - 2.0);
    r.signum() * (1.0 - (1.0 - r * r) * c).max(0.0).sqrt()
}

/// Adjusted correlation matrix; entries involving a constant column are NaN.
pub fn adjusted_corr(x: ArrayView2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let centred = &x - &x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()));
    let ss: Array1<f64> = centred.map_axis(Axis(0), |c| c.dot(&c));
    let cross = centred.t().dot(&centred);
    Array2::from_shape_fn(cross.raw_dim(), |(a, b)| {
        let den = (ss[a] * ss[b]).sqrt();
        if den <= 1e-12 * n.max(1) as f64 {
            f64::NAN
        } else {
            adjust((cross[[a, b]] / den).clamp(-1.0, 1.0), n)
        }
    })
}

#[derive(Debug, Clone)]
pub struct CorrTerms {
    /// Leading dimensions that belong to the known span.
    pub known_width: usize,
    /// Source column of every dimension; pairs within one column are skipped.
    pub column: Vec<usize>,
    pub alpha: f64,
    pub threshold: f64,
}

impl CorrTerms {
    /// Pairs `(a, b)`, `a < b`, that survive term selection for the given
    /// reference matrix.
    pub fn select(&self, reference: &Array2<f64>) -> Vec<(usize, usize)> {
        let w = self.column.len();
        let mut out = Vec::new();
        for a in 0..w {
            for b in a + 1..w {
                if b < self.known_width || self.column[a] == self.column[b] {
                    continue;
                }
                let r = reference[[a, b]];
                if r.is_nan() || r.abs() < self.threshold {
                    continue;
                }
                out.push((a, b));
            }
        }
        out
    }

    pub fn reference(&self, real: ArrayView2<f64>, global: &Array2<f64>) -> Array2<f64> {
        self.alpha * &adjusted_corr(real) + (1.0 - self.alpha) * global
    }
}

/// MAE between the adjusted correlations of `gen` and the reference over the
/// selected pairs, plus the gradient with respect to `gen`. `gen` and `real`
/// hold full rows (known then unknown dimensions).
pub fn corr_loss(
    gen: ArrayView2<f64>,
    real: ArrayView2<f64>,
    global: &Array2<f64>,
    terms: &CorrTerms,
) -> (f64, Array2<f64>) {
    let (n, w) = gen.dim();
    let mut grad = Array2::zeros((n, w));
    if n < 3 {
        return (0.0, grad);
    }
    let reference = terms.reference(real, global);
    let pairs: Vec<(usize, usize, f64)> = terms
        .select(&reference)
        .into_iter()
        .map(|(a, b)| (a, b, reference[[a, b]]))
        .collect();
    let centred = &gen - &gen.mean_axis(Axis(0)).unwrap();
    let ss: Array1<f64> = centred.map_axis(Axis(0), |c| c.dot(&c));
    let c = (n as f64 - 1.0) / (n as f64 - 2.0);
    let mut total = 0.0;
    let mut count = 0usize;
    let mut per_pair: Vec<(usize, usize, f64, f64)> = Vec::new();
    for (a, b, r_ref) in pairs {
        let den = (ss[a] * ss[b]).sqrt();
        if den <= 1e-12 * n as f64 {
            continue; // NaN in the generated batch
        }
        let r = centred.column(a).dot(&centred.column(b)) / den;
        let q = 1.0 - (1.0 - r * r) * c;
        let ra = r.signum() * q.max(0.0).sqrt();
        let diff = ra - r_ref;
        total += diff.abs();
        count += 1;
        let dra_dr = if q > 0.0 { r.abs() * c / q.sqrt() } else { 0.0 };
        per_pair.push((a, b, r, diff.signum() * dra_dr));
    }
    if count == 0 {
        return (0.0, grad);
    }
    let scale = 1.0 / count as f64;
    for (a, b, r, outer) in per_pair {
        let (ca, cb) = (centred.column(a), centred.column(b));
        let root = (ss[a] * ss[b]).sqrt();
        let k = outer * scale;
        // dR/da_i = (b_i - b̄)/sqrt(SaaSbb) - R (a_i - ā)/Saa, and symmetric
        for i in 0..n {
            grad[[i, a]] += k * (cb[i] / root - r * ca[i] / ss[a]);
            grad[[i, b]] += k * (ca[i] / root - r * cb[i] / ss[b]);
        }
    }
    (total * scale, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mean_loss_example() {
        let gen = array![[0.5]];
        let real = array![[0.3]];
        let (l, _) = mean_loss(gen.view(), real.view(), array![0.1].view(), 0.5).unwrap();
        assert!((l - 0.09).abs() < 1e-12);
    }

    #[test]
    fn mean_loss_limits() {
        let a = array![[0.1, 2.0], [0.7, -1.0], [0.4, 0.0]];
        let g = array![5.0, 5.0];
        assert_eq!(mean_loss(a.view(), a.view(), g.view(), 1.0).unwrap().0, 0.0);
        // alpha = 0 targets the global mean exactly
        let at_global = array![[5.0, 5.0]];
        assert_eq!(mean_loss(at_global.view(), a.view(), g.view(), 0.0).unwrap().0, 0.0);
        let empty = Array2::<f64>::zeros((0, 2));
        assert!(matches!(
            mean_loss(empty.view(), a.view(), g.view(), 0.5),
            Err(GeneratorError::EmptyBatch)
        ));
    }

    #[test]
    fn adjusted_corr_shrinks_towards_zero() {
        assert_eq!(adjust(1.0, 10), 1.0);
        assert_eq!(adjust(-1.0, 10), -1.0);
        assert_eq!(adjust(0.1, 10), 0.0);
        let r: f64 = 0.8;
        let expected = (1.0 - (1.0 - r * r) * 9.0 / 8.0).sqrt();
        assert!((adjust(0.8, 10) - expected).abs() < 1e-15);
    }

    fn terms(known: usize, w: usize) -> CorrTerms {
        CorrTerms {
            known_width: known,
            column: (0..w).collect(),
            alpha: 0.5,
            threshold: 0.5,
        }
    }

    #[test]
    fn reproduced_reference_gives_zero() {
        let x = array![[0.0, 0.1, 1.0], [1.0, 0.9, 0.2], [2.0, 2.2, 0.5], [3.0, 2.8, -1.0], [4.0, 4.1, 0.0]];
        let global = adjusted_corr(x.view());
        let (l, _) = corr_loss(x.view(), x.view(), &global, &terms(1, 3));
        assert!(l.abs() < 1e-12);
    }

    #[test]
    fn constant_generated_column_is_excluded() {
        let real = array![[0.0, 0.0], [1.0, 1.1], [2.0, 1.9], [3.0, 3.2]];
        let global = adjusted_corr(real.view());
        let mut gen = real.clone();
        gen.column_mut(1).fill(0.5);
        let (l, g) = corr_loss(gen.view(), real.view(), &global, &terms(1, 2));
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|v| *v == 0.0));
        assert!(adjusted_corr(gen.view())[[0, 1]].is_nan());
    }

    #[test]
    fn selection_drops_known_pairs_same_columns_and_weak_references() {
        let mut reference = Array2::from_elem((4, 4), 0.9);
        reference[[1, 3]] = 0.3;
        reference[[0, 2]] = f64::NAN;
        let t = CorrTerms {
            known_width: 2,
            column: vec![0, 1, 2, 2],
            alpha: 0.5,
            threshold: 0.5,
        };
        // (0,1) known-known, (2,3) same column, (1,3) weak, (0,2) NaN
        assert_eq!(t.select(&reference), vec![(0, 3), (1, 2)]);
        assert_eq!(t.select(&reference), t.select(&reference.clone()));
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    #[test]
    fn mean_loss_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let gen = Array2::from_shape_fn((7, 4), |_| rng.gen_range(-1.0..1.0));
            let real = Array2::from_shape_fn((7, 4), |_| rng.gen_range(-1.0..1.0));
            let global = Array1::from_shape_fn(4, |_| rng.gen_range(-1.0..1.0));
            let (_, g) = mean_loss(gen.view(), real.view(), global.view(), 0.5).unwrap();
            for idx in [(0, 0), (3, 2), (6, 3)] {
                let h = 1e-5;
                let (mut p, mut m) = (gen.clone(), gen.clone());
                p[idx] += h;
                m[idx] -= h;
                let fd = (mean_loss(p.view(), real.view(), global.view(), 0.5).unwrap().0
                    - mean_loss(m.view(), real.view(), global.view(), 0.5).unwrap().0)
                    / (2.0 * h);
                assert!(rel_err(fd, g[idx]) <= 1e-4, "{fd} vs {}", g[idx]);
            }
        }
    }

    #[test]
    fn corr_loss_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let t = CorrTerms {
            threshold: 0.0,
            ..terms(1, 4)
        };
        for _ in 0..20 {
            // correlated columns so the adjusted coefficients stay away from 0
            let base = Array1::from_shape_fn(12, |_| rng.gen_range(-1.0..1.0));
            let gen = Array2::from_shape_fn((12, 4), |(i, j)| base[i] * (j as f64 + 1.0) + 0.3 * rng.gen_range(-1.0..1.0));
            let real = Array2::from_shape_fn((12, 4), |(i, j)| base[i] * (2.0 - j as f64 * 0.5) + 0.3 * rng.gen_range(-1.0..1.0));
            let global = adjusted_corr(real.view());
            let (_, g) = corr_loss(gen.view(), real.view(), &global, &t);
            for idx in [(0, 1), (5, 2), (11, 3), (4, 0)] {
                let h = 1e-5;
                let (mut p, mut m) = (gen.clone(), gen.clone());
                p[idx] += h;
                m[idx] -= h;
                let fd = (corr_loss(p.view(), real.view(), &global, &t).0
                    - corr_loss(m.view(), real.view(), &global, &t).0)
                    / (2.0 * h);
                assert!(rel_err(fd, g[idx]) <= 1e-4, "{idx:?}: {fd} vs {}", g[idx]);
            }
        }
    }
}
