//! Degree models: how many child rows each potential-context row yields.

pub mod matching;
pub mod restructure;
pub mod rounding;

pub use matching::{fit_match_plan, generate_pairs, selection_weights, MatchPlan, DEFAULT_K_FACTOR};
pub use restructure::{reconstruct, restructure_multi_fk, stage_tables, Key, StageLeft, StageSpec, StageTable};
pub use rounding::{round_degrees, round_to_range, sum_bounds};

use crate::linear::{Ridge, DEFAULT_LAMBDA};
use crate::nn::{Activation, Adam, AdamConfig, Mlp};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DegreeError {
    #[error("design has {rows} rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("model expects {expected} input features, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("child table has no rows with complete foreign keys")]
    DegenerateChild,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegressorKind {
    Linear,
    /// One hidden ReLU layer trained full-batch with Adam on standardised
    /// inputs and targets.
    Hidden { width: usize, epochs: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressorConfig {
    pub kind: RegressorKind,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for RegressorConfig {
    fn default() -> Self {
        RegressorConfig {
            kind: RegressorKind::Linear,
            lambda: DEFAULT_LAMBDA,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Backend {
    Linear(Ridge),
    Hidden {
        net: Mlp,
        x_mean: Array1<f64>,
        x_scale: Array1<f64>,
        y_mean: f64,
        y_scale: f64,
    },
}

/// Point regressor plus the training residuals, which are resampled and
/// added back at prediction time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeRegressor {
    pub backend: Backend,
    pub inputs: usize,
    pub residuals: Vec<f64>,
}

pub fn fit_degree_regressor(
    x: ArrayView2<f64>,
    y: &[f64],
    config: &RegressorConfig,
) -> Result<DegreeRegressor, DegreeError> {
    if x.nrows() != y.len() {
        return Err(DegreeError::LengthMismatch {
            rows: x.nrows(),
            targets: y.len(),
        });
    }
    let target = Array2::from_shape_vec((y.len(), 1), y.to_vec()).expect("column vector");
    let backend = match config.kind {
        RegressorKind::Linear => Backend::Linear(Ridge::fit(x, target.view(), config.lambda)),
        RegressorKind::Hidden { width, epochs } => fit_hidden(x, &target, width, epochs, config.seed),
    };
    let mut model = DegreeRegressor {
        backend,
        inputs: x.ncols(),
        residuals: Vec::new(),
    };
    let fitted = model.predict_point(x)?;
    model.residuals = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    Ok(model)
}

fn fit_hidden(x: ArrayView2<f64>, y: &Array2<f64>, width: usize, epochs: usize, seed: u64) -> Backend {
    let n = x.nrows().max(1) as f64;
    let x_mean = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()));
    let x_scale = x
        .var_axis(Axis(0), 0.0)
        .mapv(|v| if v > 1e-12 { v.sqrt() } else { 1.0 });
    let y_mean = y.mean().unwrap_or(0.0);
    let y_std = y.var(0.0).sqrt();
    let y_scale = if y_std > 1e-12 { y_std } else { 1.0 };
    let xs = (&x - &x_mean) / &x_scale;
    let ys = y.mapv(|v| (v - y_mean) / y_scale);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Mlp::new(&[x.ncols(), width, 1], Activation::Relu, Activation::Identity, &mut rng);
    let mut opt = Adam::new(&net, AdamConfig { lr: 1e-2, beta1: 0.9, beta2: 0.999, eps: 1e-8 });
    if x.nrows() > 0 {
        for _ in 0..epochs {
            let cache = net.forward_cached(xs.view());
            let grad = (cache.output() - &ys) / n;
            let (g, _) = net.backward(&cache, &grad);
            opt.step(&mut net, &g);
        }
    }
    Backend::Hidden {
        net,
        x_mean,
        x_scale,
        y_mean,
        y_scale,
    }
}

impl DegreeRegressor {
    pub fn predict_point(&self, x: ArrayView2<f64>) -> Result<Vec<f64>, DegreeError> {
        if x.ncols() != self.inputs {
            return Err(DegreeError::WidthMismatch {
                expected: self.inputs,
                got: x.ncols(),
            });
        }
        let out = match &self.backend {
            Backend::Linear(r) => r.predict(x),
            Backend::Hidden {
                net,
                x_mean,
                x_scale,
                y_mean,
                y_scale,
            } => net
                .forward(((&x - x_mean) / x_scale).view())
                .mapv(|v| v * y_scale + y_mean),
        };
        Ok(out.column(0).to_vec())
    }

    /// Point prediction plus a residual drawn uniformly (with replacement)
    /// from the training pool, independently per row.
    pub fn predict_raw<R: Rng + ?Sized>(&self, x: ArrayView2<f64>, rng: &mut R) -> Result<Vec<f64>, DegreeError> {
        let mut out = self.predict_point(x)?;
        if !self.residuals.is_empty() {
            for v in &mut out {
                *v += self.residuals[rng.gen_range(0..self.residuals.len())];
            }
        }
        Ok(out)
    }
}
