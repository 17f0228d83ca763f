//! Scores comparing a synthetic database against the real one.

pub mod classify;
pub mod normalize;
pub mod rules;
pub mod stats;

pub use normalize::{aggregate_harmonic, normalize, Goal, ScoreRange};
pub use rules::{parse_rules, rule_violations, Predicate, RuleSpec};
pub use stats::{chi_squared_p, ks_statistic};

use crate::data::{ColumnData, Database, Table};
use crate::encoding::{encode, fit_codec, gmm, EncodingError};
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Rules(String),
    #[error("table `{0}` is missing from one of the databases")]
    MissingTable(String),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
}

/// Rows used per side by the discrimination and GM scores.
pub const SAMPLE_CAP: usize = 5000;
const GM_MAX_COMPONENTS: usize = 10;
const CODEC_MODES: usize = 5;
const KNN_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub name: String,
    pub raw: f64,
    pub real_self: f64,
    pub normalized: f64,
    pub range: ScoreRange,
    pub goal: Goal,
}

impl MetricScore {
    pub fn new(name: &str, raw: f64, real_self: f64, range: ScoreRange, goal: Goal) -> Result<Self, MetricsError> {
        Ok(MetricScore {
            name: name.to_string(),
            raw,
            real_self,
            normalized: normalize(raw, real_self, range, goal)?,
            range,
            goal,
        })
    }
}

/// Columns other than primary and foreign keys.
pub fn value_columns(db: &Database, table: usize) -> Vec<String> {
    let keys = db.schema.key_columns(table);
    db.schema.tables[table]
        .columns
        .iter()
        .map(|c| c.name.clone())
        .filter(|c| !keys.contains(c))
        .collect()
}

/// `(CS, KS)`: mean chi-squared p-value over categorical columns and mean
/// `1 - KS statistic` over numerical ones.
pub fn marginal_scores(real: &Table, synth: &Table, columns: &[String]) -> (Option<f64>, Option<f64>) {
    let (mut cs, mut ks) = (Vec::new(), Vec::new());
    for name in columns {
        let (Some(r), Some(s)) = (real.column(name), synth.column(name)) else {
            continue;
        };
        match (&r.data, &s.data) {
            (ColumnData::Categorical(a), ColumnData::Categorical(b)) => {
                if let Some(p) = chi_squared_p(&stats::counts(a), &stats::counts(b)) {
                    cs.push(p);
                }
            }
            (ColumnData::Numerical(a), ColumnData::Numerical(b)) => {
                let a: Vec<f64> = a.iter().flatten().copied().collect();
                let b: Vec<f64> = b.iter().flatten().copied().collect();
                if let Some(d) = ks_statistic(&a, &b) {
                    ks.push(1.0 - d);
                }
            }
            _ => {}
        }
    }
    let mean = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    (mean(cs), mean(ks))
}

fn numeric_rows(t: &Table, columns: &[String]) -> Array2<f64> {
    let cols: Vec<&Vec<Option<f64>>> = columns
        .iter()
        .filter_map(|c| match t.column(c).map(|c| &c.data) {
            Some(ColumnData::Numerical(v)) => Some(v),
            _ => None,
        })
        .collect();
    let rows: Vec<Vec<f64>> = (0..t.row_count)
        .filter_map(|r| cols.iter().map(|c| c[r]).collect::<Option<Vec<f64>>>())
        .collect();
    let mut out = Array2::zeros((rows.len(), cols.len()));
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[[i, j]] = *v;
        }
    }
    out
}

/// Mean log-likelihood of synthetic rows under a diagonal GMM fitted on the
/// real numerical columns (rows with nulls skipped).
pub fn gm_score(real: &Table, synth: &Table, columns: &[String], seed: u64) -> Option<f64> {
    let r = numeric_rows(real, columns);
    let s = numeric_rows(synth, columns);
    if r.ncols() == 0 || r.nrows() == 0 || s.nrows() == 0 {
        return None;
    }
    let r = subsample(&r, SAMPLE_CAP, seed);
    let floors = r
        .columns()
        .into_iter()
        .map(|c| {
            let (lo, hi) = c.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            1e-6 * if hi > lo { hi - lo } else { 1.0 }
        })
        .collect();
    let model = gmm::fit_gmm(r.view(), GM_MAX_COMPONENTS, seed, &gmm::EmConfig::new(floors));
    Some(model.mean_log_likelihood(subsample(&s, SAMPLE_CAP, seed).view()))
}

fn subsample(x: &Array2<f64>, cap: usize, seed: u64) -> Array2<f64> {
    if x.nrows() <= cap {
        return x.clone();
    }
    let mut idx: Vec<usize> = (0..x.nrows()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx.truncate(cap);
    idx.sort_unstable();
    x.select(Axis(0), &idx)
}

/// Both tables encoded with a codec fitted on the real one.
fn encode_pair(real: &Table, synth: &Table, columns: &[String], seed: u64) -> Result<(Array2<f64>, Array2<f64>), MetricsError> {
    let names: Vec<&str> = columns.iter().map(String::as_str).collect();
    let r = real.project(&names)?;
    let s = synth.project(&names)?;
    let codec = fit_codec(&r, CODEC_MODES, seed)?;
    Ok((encode(&codec, &r)?, encode(&codec, &s)?))
}

/// `2·max(AUC − 0.5, 0)` of a logistic classifier separating real from
/// synthetic rows on a held-out 30%. Both sides are subsampled to the same
/// size with the same index stream, so identical inputs score exactly 0.
pub fn disc_score(real: &Table, synth: &Table, columns: &[String], seed: u64) -> Result<Option<f64>, MetricsError> {
    if columns.is_empty() || real.row_count < 2 || synth.row_count < 2 {
        return Ok(None);
    }
    let (r, s) = encode_pair(real, synth, columns, seed)?;
    let m = r.nrows().min(s.nrows()).min(SAMPLE_CAP);
    let pick = |x: &Array2<f64>| {
        let mut idx: Vec<usize> = (0..x.nrows()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        idx.truncate(m);
        x.select(Axis(0), &idx)
    };
    let (r, s) = (pick(&r), pick(&s));
    let cut = ((m as f64 * 0.7).round() as usize).clamp(1, m - 1);
    let train = ndarray::concatenate![Axis(0), r.slice(ndarray::s![..cut, ..]), s.slice(ndarray::s![..cut, ..])];
    let test = ndarray::concatenate![Axis(0), r.slice(ndarray::s![cut.., ..]), s.slice(ndarray::s![cut.., ..])];
    let ytrain: Vec<bool> = (0..2 * cut).map(|i| i >= cut).collect();
    let ytest: Vec<bool> = (0..2 * (m - cut)).map(|i| i >= m - cut).collect();
    let model = classify::Logistic::fit(train.view(), &ytrain);
    let auc = classify::roc_auc(&model.predict_proba(test.view()), &ytest);
    Ok(auc.map(|a| 2.0 * (a - 0.5).max(0.0)))
}

/// Relative table-size error.
pub fn card_score(real_rows: usize, synth_rows: usize) -> Option<f64> {
    (real_rows > 0).then(|| (synth_rows as f64 - real_rows as f64).abs() / real_rows as f64)
}

/// Child-row count of every parent row through FK `fk`.
pub fn degree_distribution(db: &Database, fk: usize) -> Result<Vec<f64>, MetricsError> {
    let spec = &db.schema.fks[fk];
    let parent = &db.tables[spec.parent];
    let child = &db.tables[spec.child];
    let mut counts: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    for k in parent.key_tuples(&spec.parent_columns())?.into_iter().flatten() {
        counts.insert(k, 0);
    }
    for k in child.key_tuples(&spec.child_columns())?.into_iter().flatten() {
        if let Some(c) = counts.get_mut(&k) {
            *c += 1;
        }
    }
    Ok(counts.into_values().map(|c| c as f64).collect())
}

pub fn deg_score(real: &[f64], synth: &[f64]) -> Option<f64> {
    ks_statistic(real, synth).map(|d| 1.0 - d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlScores {
    /// Trained on synthetic rows, tested on held-out real rows.
    pub logistic_f1: f64,
    pub knn_f1: f64,
    /// Trained on the real training split instead.
    pub baseline_logistic_f1: f64,
    pub baseline_knn_f1: f64,
}

/// Macro-F1 of logistic regression and kNN predicting `target` from the
/// other `columns`, trained on `synth` and evaluated on 30% of `real`.
pub fn ml_efficacy(real: &Table, synth: &Table, target: &str, columns: &[String], seed: u64) -> Result<Option<MlScores>, MetricsError> {
    let label_of = |t: &Table| -> Result<Vec<Option<String>>, MetricsError> {
        match &t.require(target)?.data {
            ColumnData::Categorical(v) => Ok(v.clone()),
            ColumnData::Numerical(_) => Err(MetricsError::Config(format!("ML target `{target}` must be categorical"))),
        }
    };
    let real_labels = label_of(real)?;
    let synth_labels = label_of(synth)?;
    let mut classes: Vec<Option<String>> = real_labels.clone();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 || real.row_count < 4 || synth.row_count == 0 {
        return Ok(None);
    }
    let class_of = |v: &Option<String>| classes.binary_search(v).ok();
    let features: Vec<String> = columns.iter().filter(|c| c.as_str() != target).cloned().collect();
    let (rx, sx) = if features.is_empty() {
        (Array2::zeros((real.row_count, 0)), Array2::zeros((synth.row_count, 0)))
    } else {
        encode_pair(real, synth, &features, seed)?
    };
    let mut idx: Vec<usize> = (0..real.row_count).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((real.row_count as f64) * 0.7).round() as usize;
    let (train_idx, test_idx) = idx.split_at(cut.clamp(1, real.row_count - 1));
    let test_x = rx.select(Axis(0), test_idx);
    let test_y: Vec<usize> = test_idx.iter().map(|&i| class_of(&real_labels[i]).unwrap_or(0)).collect();

    // synthetic rows whose label never occurs in the real data cannot be scored
    let synth_keep: Vec<usize> = (0..synth.row_count).filter(|&i| class_of(&synth_labels[i]).is_some()).collect();
    let synth_keep = cap_indices(synth_keep, seed);
    let sx = sx.select(Axis(0), &synth_keep);
    let sy: Vec<usize> = synth_keep.iter().map(|&i| class_of(&synth_labels[i]).unwrap_or(0)).collect();
    let train_idx = cap_indices(train_idx.to_vec(), seed);
    let bx = rx.select(Axis(0), &train_idx);
    let by: Vec<usize> = train_idx.iter().map(|&i| class_of(&real_labels[i]).unwrap_or(0)).collect();
    let k = classes.len();
    let score = |x: &Array2<f64>, y: &[usize]| -> (f64, f64) {
        if y.is_empty() {
            return (0.0, 0.0);
        }
        (
            classify::macro_f1(&test_y, &classify::logistic_ovr(x.view(), y, k, test_x.view())),
            classify::macro_f1(&test_y, &classify::knn(x.view(), y, k, test_x.view(), KNN_K)),
        )
    };
    let (logistic_f1, knn_f1) = score(&sx, &sy);
    let (baseline_logistic_f1, baseline_knn_f1) = score(&bx, &by);
    Ok(Some(MlScores {
        logistic_f1,
        knn_f1,
        baseline_logistic_f1,
        baseline_knn_f1,
    }))
}

fn cap_indices(mut idx: Vec<usize>, seed: u64) -> Vec<usize> {
    if idx.len() > SAMPLE_CAP {
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
        idx.truncate(SAMPLE_CAP);
        idx.sort_unstable();
    }
    idx
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EvaluateOptions {
    pub rules: Vec<RuleSpec>,
    /// `table.column` used as the ML efficacy target.
    pub ml_target: Option<String>,
    pub seed: u64,
    /// Include per-column data series (category counts, numeric quantiles).
    pub series: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSeries {
    pub column: String,
    /// Category -> `(real, synthetic)` counts.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts: Option<BTreeMap<String, (usize, usize)>>,
    /// Quantiles at 0, 0.05, .., 1 for `(real, synthetic)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantiles: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub table: String,
    pub real_rows: usize,
    pub synth_rows: usize,
    pub scores: Vec<MetricScore>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rule_violations: Vec<(String, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ml: Option<MlScores>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub series: Vec<ColumnSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub tables: Vec<TableReport>,
    /// Degree score per foreign key.
    pub foreign_keys: Vec<(String, MetricScore)>,
    /// Harmonic mean of each metric's normalised scores.
    pub per_metric: BTreeMap<String, f64>,
    /// Harmonic mean of the per-metric aggregates.
    pub aggregate: Option<f64>,
    pub not_computed: Vec<String>,
}

impl MetricReport {
    pub fn all_scores(&self) -> impl Iterator<Item = &MetricScore> {
        self.tables
            .iter()
            .flat_map(|t| t.scores.iter())
            .chain(self.foreign_keys.iter().map(|f| &f.1))
    }
}

fn both<T>(f: impl Fn(&Table) -> T, real: &Table, synth: &Table) -> (T, T) {
    (f(real), f(synth))
}

fn quantiles(v: &[Option<f64>]) -> Vec<f64> {
    let mut x: Vec<f64> = v.iter().flatten().copied().collect();
    x.sort_by(f64::total_cmp);
    if x.is_empty() {
        return Vec::new();
    }
    (0..=20)
        .map(|q| x[((q as f64 / 20.0) * (x.len() - 1) as f64).round() as usize])
        .collect()
}

fn series_for(real: &Table, synth: &Table, columns: &[String]) -> Vec<ColumnSeries> {
    columns
        .iter()
        .filter_map(|c| {
            let (r, s) = both(|t| t.column(c).map(|c| c.data.clone()), real, synth);
            match (r?, s?) {
                (ColumnData::Categorical(a), ColumnData::Categorical(b)) => {
                    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
                    let key = |v: &Option<String>| v.clone().unwrap_or_else(|| "<null>".into());
                    a.iter().for_each(|v| counts.entry(key(v)).or_default().0 += 1);
                    b.iter().for_each(|v| counts.entry(key(v)).or_default().1 += 1);
                    Some(ColumnSeries { column: c.clone(), counts: Some(counts), quantiles: None })
                }
                (ColumnData::Numerical(a), ColumnData::Numerical(b)) => Some(ColumnSeries {
                    column: c.clone(),
                    counts: None,
                    quantiles: Some((quantiles(&a), quantiles(&b))),
                }),
                _ => None,
            }
        })
        .collect()
}

/// Raw scores of one table pair, by metric name.
fn table_raw(real: &Table, synth: &Table, columns: &[String], seed: u64) -> Result<Vec<(&'static str, f64, ScoreRange, Goal)>, MetricsError> {
    let mut out = Vec::new();
    let (cs, ks) = marginal_scores(real, synth, columns);
    if let Some(v) = cs {
        out.push(("CS", v, ScoreRange::Unit, Goal::Max));
    }
    if let Some(v) = ks {
        out.push(("KS", v, ScoreRange::Unit, Goal::Max));
    }
    if let Some(v) = gm_score(real, synth, columns, seed) {
        out.push(("GM", v, ScoreRange::Unbounded, Goal::Max));
    }
    if let Some(v) = disc_score(real, synth, columns, seed)? {
        out.push(("Disc", v, ScoreRange::Unit, Goal::Min));
    }
    if let Some(v) = card_score(real.row_count, synth.row_count) {
        out.push(("Card", v, ScoreRange::NonNegative, Goal::Min));
    }
    Ok(out)
}

/// Evaluate `synth` against `real` (same schema). Every raw score `S` is
/// normalised against the same scorer applied to `(real, real)`.
pub fn evaluate(real: &Database, synth: &Database, options: &EvaluateOptions) -> Result<MetricReport, MetricsError> {
    let schema = &real.schema;
    let mut tables = Vec::new();
    let mut per_metric: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (i, spec) in schema.tables.iter().enumerate() {
        let r = &real.tables[i];
        let s = synth
            .table(&spec.name)
            .ok_or_else(|| MetricsError::MissingTable(spec.name.clone()))?;
        let columns = value_columns(real, i);
        let raw = table_raw(r, s, &columns, options.seed)?;
        let hat: BTreeMap<&str, f64> = table_raw(r, r, &columns, options.seed)?
            .into_iter()
            .map(|(n, v, _, _)| (n, v))
            .collect();
        let mut scores = Vec::new();
        for (name, v, range, goal) in raw {
            let h = hat.get(name).copied().unwrap_or(v);
            scores.push(MetricScore::new(name, v, h, range, goal)?);
        }
        let table_rules: Vec<&RuleSpec> = options.rules.iter().filter(|r| r.table == spec.name).collect();
        let mut violations = Vec::new();
        if !table_rules.is_empty() {
            let got = rule_violations(s, &table_rules)?;
            let base = rule_violations(r, &table_rules)?;
            for (k, rule) in table_rules.iter().enumerate() {
                let label = rule.label(k);
                scores.push(MetricScore::new(
                    &format!("Rule:{label}"),
                    got[k] as f64,
                    base[k] as f64,
                    ScoreRange::Count,
                    Goal::Min,
                )?);
                violations.push((label, got[k]));
            }
        }
        let mut ml = None;
        if let Some((t, c)) = options.ml_target.as_deref().and_then(|m| m.split_once('.')) {
            if t == spec.name {
                let target_cols: Vec<String> = columns.clone();
                ml = ml_efficacy(r, s, c, &target_cols, options.seed)?;
                let hat_ml = ml_efficacy(r, r, c, &target_cols, options.seed)?;
                if let (Some(m), Some(h)) = (ml, hat_ml) {
                    scores.push(MetricScore::new("ML:logistic", m.logistic_f1, h.logistic_f1, ScoreRange::Unit, Goal::Max)?);
                    scores.push(MetricScore::new("ML:knn", m.knn_f1, h.knn_f1, ScoreRange::Unit, Goal::Max)?);
                }
            }
        }
        for sc in &scores {
            let key = sc.name.split(':').next().unwrap_or(&sc.name).to_string();
            per_metric.entry(key).or_default().push(sc.normalized);
        }
        tables.push(TableReport {
            table: spec.name.clone(),
            real_rows: r.row_count,
            synth_rows: s.row_count,
            scores,
            rule_violations: violations,
            ml,
            series: if options.series { series_for(r, s, &columns) } else { Vec::new() },
        });
    }
    let synth_aligned = Database {
        schema: real.schema.clone(),
        tables: schema
            .tables
            .iter()
            .map(|t| synth.table(&t.name).cloned().ok_or_else(|| MetricsError::MissingTable(t.name.clone())))
            .collect::<Result<_, _>>()?,
    };
    let mut foreign_keys = Vec::new();
    for (f, spec) in schema.fks.iter().enumerate() {
        let dr = degree_distribution(real, f)?;
        let ds = degree_distribution(&synth_aligned, f)?;
        if let (Some(v), Some(h)) = (deg_score(&dr, &ds), deg_score(&dr, &dr)) {
            let sc = MetricScore::new("Deg", v, h, ScoreRange::Unit, Goal::Max)?;
            per_metric.entry("Deg".into()).or_default().push(sc.normalized);
            foreign_keys.push((spec.label(), sc));
        }
    }
    let per_metric: BTreeMap<String, f64> = per_metric
        .into_iter()
        .filter_map(|(k, v)| aggregate_harmonic(&v).map(|a| (k, a)))
        .collect();
    let aggregate = aggregate_harmonic(&per_metric.values().copied().collect::<Vec<_>>());
    Ok(MetricReport {
        tables,
        foreign_keys,
        per_metric,
        aggregate,
        not_computed: vec!["BN".into()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Column;
    use rand::Rng;

    fn table(name: &str, cats: Vec<&str>, nums: Vec<f64>) -> Table {
        Table::new(
            name,
            vec![
                Column {
                    name: "c".into(),
                    data: ColumnData::Categorical(cats.into_iter().map(|s| Some(s.to_string())).collect()),
                },
                Column {
                    name: "x".into(),
                    data: ColumnData::Numerical(nums.into_iter().map(Some).collect()),
                },
            ],
        )
    }

    fn random_table(n: usize, shift: f64, seed: u64) -> Table {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cats: Vec<&str> = (0..n).map(|_| if rng.gen::<f64>() < 0.4 { "a" } else { "b" }).collect();
        let nums: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal) + shift).collect();
        table("t", cats, nums)
    }

    fn cols() -> Vec<String> {
        vec!["c".into(), "x".into()]
    }

    #[test]
    fn real_vs_real_marginals_are_one() {
        let t = random_table(200, 0.0, 1);
        assert_eq!(marginal_scores(&t, &t, &cols()), (Some(1.0), Some(1.0)));
    }

    #[test]
    fn disjoint_numeric_support_scores_zero() {
        let a = table("t", vec!["a"; 3], vec![1.0, 2.0, 3.0]);
        let b = table("t", vec!["a"; 3], vec![10.0, 20.0, 30.0]);
        assert_eq!(marginal_scores(&a, &b, &cols()).1, Some(0.0));
    }

    #[test]
    fn gm_of_standard_normal_at_mean() {
        let real = random_table(4000, 0.0, 2);
        let at_mean = table("t", vec!["a"], vec![0.0]);
        let v = gm_score(&real, &at_mean, &cols(), 0).unwrap();
        // a fitted mixture on N(0,1) data is close to the true density
        assert!((v - (-0.5 * (2.0 * std::f64::consts::PI).ln())).abs() < 0.05, "{v}");
        let far = table("t", vec!["a"], vec![50.0]);
        assert!(gm_score(&real, &far, &cols(), 0).unwrap() < -100.0);
        let self_ll = gm_score(&real, &real, &cols(), 0).unwrap();
        assert!(self_ll.is_finite());
    }

    #[test]
    fn disc_extremes() {
        let t = random_table(300, 0.0, 3);
        assert_eq!(disc_score(&t, &t, &cols(), 0).unwrap(), Some(0.0));
        let other_half = random_table(300, 0.0, 4);
        assert!(disc_score(&t, &other_half, &cols(), 0).unwrap().unwrap() <= 0.1);
        let shifted = random_table(300, 100.0, 5);
        assert!(disc_score(&t, &shifted, &cols(), 0).unwrap().unwrap() > 0.95);
    }

    #[test]
    fn card_values() {
        assert_eq!(card_score(100, 100), Some(0.0));
        assert!((card_score(100, 105).unwrap() - 0.05).abs() < 1e-12);
        assert_eq!(card_score(0, 5), None);
        assert_eq!(deg_score(&[0.0, 1.0, 2.0], &[2.0, 1.0, 0.0]), Some(1.0));
    }

    fn separable(n: usize, seed: u64, noise_labels: bool) -> Table {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cats = Vec::new();
        let mut nums = Vec::new();
        for _ in 0..n {
            let pos = rng.gen::<bool>();
            let x = if pos { 3.0 } else { -3.0 } + rng.gen_range(-1.0..1.0);
            let label = if noise_labels { rng.gen::<bool>() } else { pos };
            cats.push(if label { "yes" } else { "no" });
            nums.push(x);
        }
        table("t", cats, nums)
    }

    #[test]
    fn ml_efficacy_reference_points() {
        let real = separable(400, 6, false);
        let copy = ml_efficacy(&real, &real, "c", &cols(), 0).unwrap().unwrap();
        assert!((copy.logistic_f1 - copy.baseline_logistic_f1).abs() <= 0.05);
        assert!((copy.knn_f1 - copy.baseline_knn_f1).abs() <= 0.05);
        assert!(copy.logistic_f1 > 0.95);
        let noise = separable(400, 7, true);
        let bad = ml_efficacy(&real, &noise, "c", &cols(), 0).unwrap().unwrap();
        assert!(bad.logistic_f1 < 0.75, "{bad:?}");
        let single = table("t", vec!["a"; 10], (0..10).map(f64::from).collect());
        assert_eq!(ml_efficacy(&single, &single, "c", &cols(), 0).unwrap(), None);
    }
}
