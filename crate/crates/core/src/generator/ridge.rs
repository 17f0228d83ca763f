use super::{OutputLayout, TrainConfig};
use crate::linear::{Ridge, DEFAULT_LAMBDA};
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Non-adversarial backend: linear prediction of every unknown dimension plus
/// a residual row drawn from training, then projected onto valid encodings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeGenerator {
    pub model: Ridge,
    pub residuals: Array2<f64>,
    pub layout: OutputLayout,
    pub temperature: Option<f64>,
}

pub(super) fn fit_ridge_generator(
    known: ArrayView2<f64>,
    unknown: ArrayView2<f64>,
    layout: &OutputLayout,
    cfg: &TrainConfig,
) -> RidgeGenerator {
    let model = Ridge::fit(known, unknown, DEFAULT_LAMBDA);
    let residuals = &unknown - &model.predict(known);
    RidgeGenerator {
        model,
        residuals,
        layout: layout.clone(),
        temperature: cfg.temperature,
    }
}

impl RidgeGenerator {
    pub fn generate(&self, known: ArrayView2<f64>, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.model.predict(known);
        let pool = self.residuals.nrows();
        if pool > 0 {
            for mut row in out.rows_mut() {
                row += &self.residuals.row(rng.gen_range(0..pool));
            }
        }
        self.layout.discretize(&mut out, None, &mut rng);
        out
    }
}
