use super::MetricsError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreRange {
    /// `[0, 1]`
    Unit,
    /// `(-inf, 0)`
    Negative,
    /// `(-inf, inf)`
    Unbounded,
    /// `[0, inf)`
    NonNegative,
    /// `[0, |t|]`, e.g. a row count
    Count,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Goal {
    Max,
    Min,
}

/// Map raw score `s` to `[0, 1]` relative to the real-vs-real score `hat`.
pub fn normalize(s: f64, hat: f64, range: ScoreRange, goal: Goal) -> Result<f64, MetricsError> {
    use ScoreRange::*;
    let v = match (range, goal) {
        (Unit, Goal::Max) => {
            if hat != 0.0 {
                s.min(hat) / hat
            } else {
                1.0
            }
        }
        (Unit, Goal::Min) => {
            if hat != 1.0 {
                (1.0 - s.max(hat)) / (1.0 - hat)
            } else {
                1.0
            }
        }
        (Negative | Unbounded, Goal::Max) => (s.min(hat) - hat).exp(),
        (NonNegative | Count, Goal::Min) => (hat - s.max(hat)).exp(),
        (range, goal) => {
            return Err(MetricsError::Config(format!(
                "no normalisation for range {range:?} with goal {goal:?}"
            )))
        }
    };
    Ok(v.clamp(0.0, 1.0))
}

/// Harmonic mean; 0 if any score is 0, `None` for an empty list.
pub fn aggregate_harmonic(scores: &[f64]) -> Option<f64> {
    if scores.is_empty() {
        return None;
    }
    if scores.iter().any(|&s| s <= 0.0) {
        return Some(0.0);
    }
    Some(scores.len() as f64 / scores.iter().map(|s| 1.0 / s).sum::<f64>())
}
