//! Multi-output ridge regression with an unpenalized intercept.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

pub const DEFAULT_LAMBDA: f64 = 1e-6;
const REFINE_STEPS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ridge {
    /// `inputs x outputs`
    pub weights: Array2<f64>,
    pub intercept: Array1<f64>,
}

impl Ridge {
    /// Fit `y ≈ x·W + b`. An empty design (no rows) yields a zero model; with
    /// no input columns the model is the column mean of `y`.
    pub fn fit(x: ArrayView2<f64>, y: ArrayView2<f64>, lambda: f64) -> Self {
        let (n, d) = x.dim();
        let k = y.ncols();
        if n == 0 {
            return Ridge {
                weights: Array2::zeros((d, k)),
                intercept: Array1::zeros(k),
            };
        }
        let x_mean = x.mean_axis(Axis(0)).unwrap();
        let y_mean = y.mean_axis(Axis(0)).unwrap();
        if d == 0 {
            return Ridge {
                weights: Array2::zeros((0, k)),
                intercept: y_mean,
            };
        }
        let xc = &x - &x_mean;
        let yc = &y - &y_mean;
        let gram = xc.t().dot(&xc);
        let rhs = xc.t().dot(&yc);
        let rhs = DMatrix::from_fn(d, k, |r, c| rhs[[r, c]]);
        let mut lam = lambda.max(0.0);
        let g = DMatrix::from_fn(d, d, |r, c| gram[[r, c]]);
        let ch = loop {
            let a = DMatrix::from_fn(d, d, |r, c| gram[[r, c]] + if r == c { lam } else { 0.0 });
            if let Some(ch) = a.cholesky() {
                break ch;
            }
            // numerically singular: strengthen the penalty until it factors
            lam = if lam == 0.0 { 1e-10 } else { lam * 10.0 };
        };
        let mut solution = ch.solve(&rhs);
        // iterated Tikhonov: removes the shrinkage bias along well-determined
        // directions while null-space components stay at zero
        for _ in 0..REFINE_STEPS {
            let residual = &rhs - &g * &solution;
            solution += ch.solve(&residual);
        }
        let weights = Array2::from_shape_fn((d, k), |(r, c)| solution[(r, c)]);
        let intercept = &y_mean - &x_mean.dot(&weights);
        Ridge { weights, intercept }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weights) + &self.intercept
    }

    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn recovers_exact_linear_map() {
        let x = array![[0.0, 1.0], [1.0, 0.0], [2.0, 1.0], [3.0, 5.0], [1.5, -2.0]];
        let y = x.map_axis(Axis(1), |r| 3.0 * r[0] - 2.0 * r[1] + 0.5).insert_axis(Axis(1));
        let m = Ridge::fit(x.view(), y.view(), 0.0);
        let pred = m.predict(x.view());
        for (a, b) in pred.iter().zip(y.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((m.intercept[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn collinear_design_still_solves() {
        let x = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        let y = array![[1.0], [2.0], [3.0]];
        let m = Ridge::fit(x.view(), y.view(), 0.0);
        let pred = m.predict(x.view());
        for (a, b) in pred.iter().zip(y.iter()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn no_features_predicts_mean() {
        let x = Array2::<f64>::zeros((4, 0));
        let y = array![[1.0], [2.0], [3.0], [6.0]];
        let m = Ridge::fit(x.view(), y.view(), 1e-6);
        assert_eq!(m.predict(x.view()).column(0).to_vec(), vec![3.0; 4]);
    }
}
