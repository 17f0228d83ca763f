//! Conditional generation of a table's unknown columns given its known
//! context.

pub mod gan;
pub mod losses;
pub mod ridge;

pub use gan::CondGan;
pub use losses::{adjusted_corr, corr_loss, mean_loss, CorrTerms};
pub use ridge::RidgeGenerator;

use crate::encoding::{ColumnCodec, TableCodec};
use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::ops::Range;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("expected {expected} columns, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("known and unknown parts have {known} and {unknown} rows")]
    RowMismatch { known: usize, unknown: usize },
    #[error("nothing to generate: the unknown part has no columns")]
    EmptyUnknown,
    #[error("no training rows")]
    NoRows,
    #[error("non-finite {what} loss at epoch {epoch}")]
    NonFinite { epoch: usize, what: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Adversarial,
    /// Ridge regression per dimension plus bootstrapped residual rows.
    Ridge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub backend: BackendKind,
    /// Weight of the batch statistics against the global ones.
    pub alpha: f64,
    pub corr_threshold: f64,
    pub mse_weight: f64,
    pub mean_weight: f64,
    pub corr_weight: f64,
    /// `None` picks `min(256, rows/4)` floored at 8.
    pub batch_size: Option<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub noise_dim: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
    /// Sample categories from the softmax at this temperature instead of
    /// taking the argmax.
    pub temperature: Option<f64>,
    /// Straight-through Gumbel head for the adversarial backend: categorical
    /// logits get Gumbel noise (relaxed at this temperature), the
    /// discriminator sees the hard one-hot sample, and generation takes the
    /// argmax of the perturbed logits. `None` keeps the plain softmax.
    pub gumbel_tau: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            backend: BackendKind::Adversarial,
            alpha: 0.5,
            corr_threshold: 0.5,
            mse_weight: 1.0,
            mean_weight: 1.0,
            corr_weight: 0.1,
            batch_size: None,
            epochs: 100,
            lr: 2e-4,
            noise_dim: 128,
            hidden: vec![256, 256],
            seed: 0,
            temperature: None,
            gumbel_tau: Some(1.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        let unit = |v: f64, name: &str| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(GeneratorError::Config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit(self.alpha, "alpha")?;
        unit(self.corr_threshold, "corr_threshold")?;
        for (v, name) in [
            (self.mse_weight, "mse_weight"),
            (self.mean_weight, "mean_weight"),
            (self.corr_weight, "corr_weight"),
            (self.lr, "lr"),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(GeneratorError::Config(format!("{name} must be a non-negative number")));
            }
        }
        for (t, name) in [(self.temperature, "temperature"), (self.gumbel_tau, "gumbel_tau")] {
            if matches!(t, Some(t) if !(t > 0.0)) {
                return Err(GeneratorError::Config(format!("{name} must be positive")));
            }
        }
        if self.batch_size == Some(0) {
            return Err(GeneratorError::Config("batch_size must be positive".into()));
        }
        Ok(())
    }

    pub fn batch_for(&self, rows: usize) -> usize {
        self.batch_size.unwrap_or_else(|| (rows / 4).clamp(8, 256)).min(rows.max(1))
    }
}

/// Output structure of the unknown part: softmax groups and bounded scalars.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputLayout {
    pub width: usize,
    pub softmax: Vec<Range<usize>>,
    pub values: Vec<usize>,
    /// Source column index of every dimension.
    pub column: Vec<usize>,
}

impl OutputLayout {
    pub fn from_codec(codec: &TableCodec) -> Self {
        let mut out = OutputLayout {
            width: codec.width,
            softmax: Vec::new(),
            values: Vec::new(),
            column: vec![0; codec.width],
        };
        for (c, col) in codec.columns.iter().enumerate() {
            let span = col.span();
            out.column[span.clone()].iter_mut().for_each(|v| *v = c);
            if let ColumnCodec::Numerical(_) = col.codec {
                out.values.push(span.start);
            }
            for r in col.codec.one_hot_ranges() {
                if !r.is_empty() {
                    out.softmax.push(span.start + r.start..span.start + r.end);
                }
            }
        }
        out
    }

    /// Softmax per group and tanh for scalars, applied in place.
    pub fn apply(&self, raw: &mut Array2<f64>) {
        for r in &self.softmax {
            let mut block = raw.slice_mut(ndarray::s![.., r.clone()]);
            for mut row in block.rows_mut() {
                let top = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                row.mapv_inplace(|v| (v - top).exp());
                let s = row.sum();
                row.mapv_inplace(|v| v / s);
            }
        }
        for &v in &self.values {
            raw.column_mut(v).mapv_inplace(f64::tanh);
        }
    }

    /// Chain `grad` (w.r.t. the head outputs `out`) back to the raw outputs.
    pub fn backprop(&self, out: &Array2<f64>, grad: &Array2<f64>) -> Array2<f64> {
        let mut g = grad.clone();
        for r in &self.softmax {
            for i in 0..out.nrows() {
                let p = out.slice(ndarray::s![i, r.clone()]);
                let gi = grad.slice(ndarray::s![i, r.clone()]);
                let dot = p.dot(&gi);
                for (k, j) in r.clone().enumerate() {
                    g[[i, j]] = p[k] * (gi[k] - dot);
                }
            }
        }
        for &v in &self.values {
            for i in 0..out.nrows() {
                g[[i, v]] = grad[[i, v]] * (1.0 - out[[i, v]] * out[[i, v]]);
            }
        }
        g
    }

    /// Turn every softmax group into a one-hot vector (argmax, or a draw at
    /// `temperature`) and clamp scalars to `[-1, 1]`.
    pub fn discretize<R: Rng + ?Sized>(&self, x: &mut Array2<f64>, temperature: Option<f64>, rng: &mut R) {
        for r in &self.softmax {
            for i in 0..x.nrows() {
                let mut row = x.slice_mut(ndarray::s![i, r.clone()]);
                let pick = match temperature {
                    None => crate::encoding::gmm::argmax(&row.to_vec()),
                    Some(t) => {
                        let logits: Vec<f64> = row.iter().map(|p| p.max(1e-300).ln() / t).collect();
                        let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let w: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
                        let mut u = rng.gen::<f64>() * w.iter().sum::<f64>();
                        let mut k = w.len() - 1;
                        for (j, wj) in w.iter().enumerate() {
                            if u < *wj {
                                k = j;
                                break;
                            }
                            u -= wj;
                        }
                        k
                    }
                };
                row.fill(0.0);
                row[pick] = 1.0;
            }
        }
        for &v in &self.values {
            x.column_mut(v).mapv_inplace(|y| y.clamp(-1.0, 1.0));
        }
    }
}

/// Per-epoch averages of the training losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct LossReport {
    pub epoch: usize,
    pub discriminator: f64,
    pub adversarial: f64,
    pub prediction: f64,
    pub mean: f64,
    pub correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GeneratorModel {
    Adversarial(CondGan),
    Ridge(RidgeGenerator),
}

fn check_inputs(known: ArrayView2<f64>, unknown: ArrayView2<f64>, layout: &OutputLayout) -> Result<(), GeneratorError> {
    if unknown.ncols() != layout.width {
        return Err(GeneratorError::WidthMismatch {
            expected: layout.width,
            got: unknown.ncols(),
        });
    }
    if layout.width == 0 {
        return Err(GeneratorError::EmptyUnknown);
    }
    if known.nrows() != unknown.nrows() {
        return Err(GeneratorError::RowMismatch {
            known: known.nrows(),
            unknown: unknown.nrows(),
        });
    }
    if known.nrows() == 0 {
        return Err(GeneratorError::NoRows);
    }
    Ok(())
}

/// Train the configured backend on aligned known/unknown rows.
pub fn fit_generator(
    known: ArrayView2<f64>,
    unknown: ArrayView2<f64>,
    layout: &OutputLayout,
    config: &TrainConfig,
) -> Result<(GeneratorModel, Vec<LossReport>), GeneratorError> {
    config.validate()?;
    check_inputs(known, unknown, layout)?;
    match config.backend {
        BackendKind::Adversarial => {
            let (g, history) = gan::fit_gan(known, unknown, layout, config)?;
            Ok((GeneratorModel::Adversarial(g), history))
        }
        BackendKind::Ridge => Ok((
            GeneratorModel::Ridge(ridge::fit_ridge_generator(known, unknown, layout, config)),
            Vec::new(),
        )),
    }
}

impl GeneratorModel {
    pub fn known_width(&self) -> usize {
        match self {
            GeneratorModel::Adversarial(g) => g.known_width,
            GeneratorModel::Ridge(r) => r.model.inputs(),
        }
    }

    pub fn layout(&self) -> &OutputLayout {
        match self {
            GeneratorModel::Adversarial(g) => &g.layout,
            GeneratorModel::Ridge(r) => &r.layout,
        }
    }

    /// Encoded unknown rows for each known row; deterministic per seed.
    pub fn generate_unknown(&self, known: ArrayView2<f64>, seed: u64) -> Result<Array2<f64>, GeneratorError> {
        if known.ncols() != self.known_width() {
            return Err(GeneratorError::WidthMismatch {
                expected: self.known_width(),
                got: known.ncols(),
            });
        }
        Ok(match self {
            GeneratorModel::Adversarial(g) => g.generate(known, seed),
            GeneratorModel::Ridge(r) => r.generate(known, seed),
        })
    }
}

pub(crate) fn column_means(x: ArrayView2<f64>) -> ndarray::Array1<f64> {
    x.mean_axis(Axis(0)).unwrap_or_else(|| ndarray::Array1::zeros(x.ncols()))
}
