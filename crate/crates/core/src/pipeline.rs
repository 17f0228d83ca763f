//! Fit and generate whole databases, one table at a time, and persist the
//! fitted models.
//!
//! Fitting visits tables in order: build the extended table, fit a degree
//! model when the table has foreign keys, then fit the conditional generator
//! of its non-key columns. Generation replays the order against the tables
//! synthesised so far and never touches real rows.

use crate::data::{Column, ColumnData, Database, DataError, Table};
use crate::degree::{
    fit_degree_regressor, fit_match_plan, generate_pairs, restructure_multi_fk, round_degrees, stage_tables,
    DegreeError, DegreeRegressor, Key, MatchPlan, RegressorConfig, StageSpec, DEFAULT_K_FACTOR,
};
use crate::encoding::{decode, fit_codec, EncodingError, TableCodec};
use crate::generator::{fit_generator, GeneratorError, GeneratorModel, LossReport, OutputLayout, TrainConfig};
use crate::schema::{ColumnKind, SchemaError, SchemaGraph, TableOrder};
use crate::variants::{
    build_extended, build_potential_context, compute_degrees, context_for_tuples, fk_column_list, fk_contexts,
    FkContext, TableSource, VariantError, VariantOptions,
};
use ndarray::{concatenate, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;
pub const BUNDLE_FILE: &str = "bundle.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid order: {0}")]
    Order(#[source] SchemaError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("table `{table}`: {source}")]
    Variant {
        table: String,
        #[source]
        source: VariantError,
    },
    #[error("table `{table}`: {source}")]
    Encoding {
        table: String,
        #[source]
        source: EncodingError,
    },
    #[error("table `{table}`: {source}")]
    Degree {
        table: String,
        #[source]
        source: DegreeError,
    },
    #[error("table `{table}`: {source}")]
    Generator {
        table: String,
        #[source]
        source: GeneratorError,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("corrupt model bundle: {0}")]
    CorruptBundle(String),
    #[error("bundle format version {found} is newer than the supported version {supported}")]
    VersionError { found: u32, supported: u32 },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub train: TrainConfig,
    /// Relative slack allowed on each generated table size.
    pub eps: f64,
    pub max_modes: usize,
    pub regressor: RegressorConfig,
    pub k_factor: f64,
    /// Largest potential context (rows) built for a single-FK table.
    pub context_cap: u64,
    pub variants: VariantOptions,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            train: TrainConfig::default(),
            eps: 0.05,
            max_modes: 10,
            regressor: RegressorConfig::default(),
            k_factor: DEFAULT_K_FACTOR,
            context_cap: 1 << 22,
            variants: VariantOptions::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Deterministic ridge generator instead of the adversarial one.
    pub fn fast() -> Self {
        let mut c = PipelineConfig::default();
        c.train.backend = crate::generator::BackendKind::Ridge;
        c
    }

    /// Parse a JSON or YAML document.
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let cfg: PipelineConfig = match serde_json::from_str(text) {
            Ok(c) => c,
            Err(_) => serde_yaml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.eps >= 0.0 && self.eps < 1.0) {
            return Err(PipelineError::Config(format!("eps must lie in [0, 1), got {}", self.eps)));
        }
        if self.max_modes == 0 {
            return Err(PipelineError::Config("max_modes must be positive".into()));
        }
        if !(self.k_factor > 1.0) {
            return Err(PipelineError::Config("k_factor must exceed 1".into()));
        }
        self.train
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))
    }
}

/// One stage of a multi-FK chain. Intermediate stages link each left row to
/// its partners once; only the last stage carries real degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedStage {
    pub spec: StageSpec,
    pub plan: MatchPlan,
    /// Rows (last stage) or distinct pairs (earlier stages) seen in training.
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DegreeModel {
    /// One foreign key: degree per parent context row.
    Single { regressor: DegreeRegressor, total: u64 },
    /// Two or more foreign keys, restructured into `f - 1` matching stages.
    Matched { fks: Vec<usize>, stages: Vec<FittedStage> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedTableModel {
    pub table: usize,
    pub name: String,
    /// Codec of the non-key columns.
    pub codec: TableCodec,
    /// Present iff the table has foreign keys.
    pub degree: Option<DegreeModel>,
    /// Training row count.
    pub rows: usize,
    /// Absent when the table has no non-key columns.
    pub generator: Option<GeneratorModel>,
    pub history: Vec<LossReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub schema: SchemaGraph,
    pub order: TableOrder,
    pub config: PipelineConfig,
    /// Indexed by table.
    pub tables: Vec<FittedTableModel>,
}

fn value_column_names(schema: &SchemaGraph, i: usize) -> Vec<&str> {
    let keys = schema.key_columns(i);
    schema.tables[i]
        .columns
        .iter()
        .map(|c| c.name.as_str())
        .filter(|c| !keys.contains(*c))
        .collect()
}

fn table_seed(seed: u64, table: usize) -> u64 {
    seed ^ (table as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Fit every table model. `order` must place parents before children.
pub fn fit_database(db: &Database, order: &TableOrder, config: &PipelineConfig) -> Result<ModelBundle, PipelineError> {
    let schema = &*db.schema;
    order.validate(schema).map_err(PipelineError::Order)?;
    config.validate()?;
    let codecs = fit_codecs(db, config)?;
    let mut models: Vec<Option<FittedTableModel>> = vec![None; schema.len()];
    for &i in order.sequence() {
        let name = schema.tables[i].name.clone();
        log::info!("fitting `{name}`");
        let var_err = |source| PipelineError::Variant { table: name.clone(), source };
        let ext = build_extended(db, schema, &codecs, i, order, config.variants).map_err(var_err)?;
        let degree = fit_degree_model(db, &codecs, i, order, config).map_err(|e| annotate(e, &name))?;
        let (generator, history) = if codecs[i].width == 0 {
            (None, Vec::new())
        } else {
            let mut train = config.train.clone();
            train.seed = table_seed(config.seed, i);
            let layout = OutputLayout::from_codec(&codecs[i]);
            let (g, h) = fit_generator(ext.known_values(), ext.unknown_values(), &layout, &train)
                .map_err(|source| PipelineError::Generator { table: name.clone(), source })?;
            (Some(g), h)
        };
        models[i] = Some(FittedTableModel {
            table: i,
            name,
            codec: codecs[i].clone(),
            degree,
            rows: db.tables[i].row_count,
            generator,
            history,
        });
    }
    Ok(ModelBundle {
        format_version: FORMAT_VERSION,
        schema: schema.clone(),
        order: order.clone(),
        config: config.clone(),
        tables: models.into_iter().map(|m| m.expect("order covers every table")).collect(),
    })
}

fn fit_codecs(db: &Database, config: &PipelineConfig) -> Result<Vec<TableCodec>, PipelineError> {
    let schema = &*db.schema;
    (0..schema.len())
        .map(|i| {
            let name = &schema.tables[i].name;
            let projected = db.tables[i].project(&value_column_names(schema, i))?;
            fit_codec(&projected, config.max_modes, table_seed(config.seed, i)).map_err(|source| {
                PipelineError::Encoding { table: name.clone(), source }
            })
        })
        .collect()
}

fn annotate(e: PipelineError, table: &str) -> PipelineError {
    match e {
        PipelineError::Variant { source, .. } => PipelineError::Variant { table: table.into(), source },
        PipelineError::Degree { source, .. } => PipelineError::Degree { table: table.into(), source },
        other => other,
    }
}

fn degree_err(source: DegreeError) -> PipelineError {
    PipelineError::Degree { table: String::new(), source }
}

fn variant_err(source: VariantError) -> PipelineError {
    PipelineError::Variant { table: String::new(), source }
}

fn regressor_config(config: &PipelineConfig, i: usize, stage: usize) -> RegressorConfig {
    RegressorConfig {
        seed: table_seed(config.seed, i).wrapping_add(stage as u64),
        ..config.regressor
    }
}

fn fit_degree_model(
    db: &Database,
    codecs: &[TableCodec],
    i: usize,
    order: &TableOrder,
    config: &PipelineConfig,
) -> Result<Option<DegreeModel>, PipelineError> {
    let schema = &*db.schema;
    let fks: Vec<usize> = schema.fks_of(i).map(|(f, _)| f).collect();
    match fks.len() {
        0 => Ok(None),
        1 => {
            let pc = build_potential_context(db, schema, codecs, i, order, config.variants, config.context_cap as u128)
                .map_err(variant_err)?;
            let degrees = compute_degrees(&pc, &db.tables[i]).map_err(variant_err)?;
            let y: Vec<f64> = degrees.counts.iter().map(|&c| c as f64).collect();
            let regressor = fit_degree_regressor(pc.values.view(), &y, &regressor_config(config, i, 0)).map_err(degree_err)?;
            Ok(Some(DegreeModel::Single { regressor, total: degrees.total() }))
        }
        _ => {
            let contexts = contexts_by_fk(db, schema, codecs, i, order, &fks)?;
            let index: Vec<HashMap<&Key, usize>> = contexts
                .iter()
                .map(|c| c.keys.iter().enumerate().map(|(r, k)| (k, r)).collect())
                .collect();
            // child rows with every FK present, one key per FK
            let per_fk: Vec<Vec<Option<Key>>> = fks
                .iter()
                .map(|&f| db.tables[i].key_tuples(&schema.fks[f].child_columns()))
                .collect::<Result<_, _>>()?;
            let rows: Vec<Vec<Key>> = (0..db.tables[i].row_count)
                .filter_map(|r| per_fk.iter().map(|col| col[r].clone()).collect())
                .collect();
            let specs = restructure_multi_fk(&fks);
            let tables = stage_tables(&rows, &specs);
            let mut stages = Vec::with_capacity(specs.len());
            let mut left: Array2<f64> = contexts[0].values.clone();
            let last = specs.len() - 1;
            for (s, (spec, table)) in specs.iter().zip(&tables).enumerate() {
                let right = &contexts[s + 1].values;
                let lookup = |fk_pos: usize, key: &Key| {
                    index[fk_pos].get(key).copied().ok_or_else(|| {
                        variant_err(VariantError::InternalInconsistency(format!(
                            "key {key:?} missing from parent `{}`",
                            schema.fks[fks[fk_pos]].parent_table
                        )))
                    })
                };
                let mut distinct = Vec::with_capacity(table.prefixes.len());
                for (k, prefix) in table.prefixes.iter().enumerate() {
                    let l = if s == 0 { lookup(0, &prefix[0])? } else { table.left_ids[k] };
                    distinct.push((l, lookup(s + 1, &prefix[s + 1])?));
                }
                let pairs: Vec<(usize, usize)> = if s == last {
                    distinct
                        .iter()
                        .zip(&table.counts)
                        .flat_map(|(&p, &c)| std::iter::repeat_n(p, c as usize))
                        .collect()
                } else {
                    distinct.clone()
                };
                let plan = fit_match_plan(left.view(), right.view(), &pairs, &regressor_config(config, i, s), config.k_factor)
                    .map_err(degree_err)?;
                stages.push(FittedStage {
                    spec: *spec,
                    plan,
                    total: pairs.len() as u64,
                });
                if s < last {
                    left = joint_rows(&left, right, &distinct);
                }
            }
            Ok(Some(DegreeModel::Matched { fks, stages }))
        }
    }
}

/// `[left[l] | right[r]]` for each pair.
fn joint_rows(left: &Array2<f64>, right: &Array2<f64>, pairs: &[(usize, usize)]) -> Array2<f64> {
    let li: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let ri: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    concatenate![Axis(1), left.select(Axis(0), &li), right.select(Axis(0), &ri)]
}

fn contexts_by_fk(
    source: &dyn TableSource,
    schema: &SchemaGraph,
    codecs: &[TableCodec],
    i: usize,
    order: &TableOrder,
    fks: &[usize],
) -> Result<Vec<FkContext>, PipelineError> {
    let mut all = fk_contexts(source, schema, codecs, i, order).map_err(variant_err)?;
    fks.iter()
        .map(|f| {
            let pos = all.iter().position(|c| c.fk == *f).ok_or_else(|| {
                variant_err(VariantError::InternalInconsistency(format!("no context for foreign key {f}")))
            })?;
            Ok(all.swap_remove(pos))
        })
        .collect()
}

/// Synthesise a database from `bundle` with table sizes scaled by `scale`.
pub fn generate_database(bundle: &ModelBundle, scale: f64, seed: u64) -> Result<Database, PipelineError> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(PipelineError::Config(format!("scale must be positive, got {scale}")));
    }
    let schema = &bundle.schema;
    let order = &bundle.order;
    order.validate(schema).map_err(PipelineError::Order)?;
    if bundle.tables.len() != schema.len() {
        return Err(PipelineError::CorruptBundle(format!(
            "{} table models for {} tables",
            bundle.tables.len(),
            schema.len()
        )));
    }
    let codecs: Vec<TableCodec> = bundle.tables.iter().map(|m| m.codec.clone()).collect();
    let mut synth: Vec<Option<Table>> = vec![None; schema.len()];
    for &i in order.sequence() {
        let model = &bundle.tables[i];
        let name = schema.tables[i].name.clone();
        log::info!("generating `{name}`");
        let mut rng = ChaCha8Rng::seed_from_u64(table_seed(seed, i));
        let fk_cols = fk_column_list(schema, i);
        let (tuples, known) = match &model.degree {
            None => {
                let n = (model.rows as f64 * scale).round() as usize;
                (Vec::new(), Array2::zeros((n, 0)))
            }
            Some(DegreeModel::Single { regressor, total }) => {
                let pc = build_potential_context(&synth, schema, &codecs, i, order, bundle.config.variants, bundle.config.context_cap as u128)
                    .map_err(|source| PipelineError::Variant { table: name.clone(), source })?;
                let raw = regressor
                    .predict_raw(pc.values.view(), &mut rng)
                    .map_err(|source| PipelineError::Degree { table: name.clone(), source })?;
                let counts = round_degrees(&raw, *total as f64 * scale, bundle.config.eps, &mut rng);
                let rows: Vec<usize> = counts
                    .iter()
                    .enumerate()
                    .flat_map(|(r, &c)| std::iter::repeat_n(r, c as usize))
                    .collect();
                let tuples = rows.iter().map(|&r| pc.fk_tuples[r].clone()).collect();
                (tuples, pc.values.select(Axis(0), &rows))
            }
            Some(DegreeModel::Matched { fks, stages }) => {
                let tuples = generate_matched(&synth, bundle, i, fks, stages, scale, &mut rng)
                    .map_err(|e| annotate(e, &name))?;
                let known = if tuples.is_empty() {
                    Array2::zeros((0, 0))
                } else {
                    context_for_tuples(&synth, schema, &codecs, i, order, bundle.config.variants, &tuples)
                        .map_err(|source| PipelineError::Variant { table: name.clone(), source })?
                        .values
                };
                (tuples, known)
            }
        };
        let n = known.nrows();
        let values = match (&model.generator, n) {
            (Some(g), n) if n > 0 => {
                let unknown = g
                    .generate_unknown(known.view(), table_seed(seed, i) ^ 0xA5A5)
                    .map_err(|source| PipelineError::Generator { table: name.clone(), source })?;
                Some(decode(&model.codec, unknown.view()).map_err(|source| PipelineError::Encoding { table: name.clone(), source })?)
            }
            _ => None,
        };
        synth[i] = Some(assemble(schema, i, n, &fk_cols, &tuples, values.as_ref())?);
    }
    Ok(Database {
        schema: Arc::new(schema.clone()),
        tables: synth.into_iter().map(|t| t.expect("order covers every table")).collect(),
    })
}

/// FK tuples (ordered as `fk_column_list`) for a multi-FK table.
#[allow(clippy::ptr_arg)]
fn generate_matched(
    synth: &Vec<Option<Table>>,
    bundle: &ModelBundle,
    i: usize,
    fks: &[usize],
    stages: &[FittedStage],
    scale: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<String>>, PipelineError> {
    let schema = &bundle.schema;
    let codecs: Vec<TableCodec> = bundle.tables.iter().map(|m| m.codec.clone()).collect();
    let contexts = contexts_by_fk(synth, schema, &codecs, i, &bundle.order, fks)?;
    let eps = bundle.config.eps;
    let mut left = contexts[0].values.clone();
    let mut prefixes: Vec<Vec<&Key>> = contexts[0].keys.iter().map(|k| vec![k]).collect();
    let mut rows: Vec<Vec<&Key>> = Vec::new();
    let last = stages.len() - 1;
    for (s, stage) in stages.iter().enumerate() {
        let right = &contexts[s + 1];
        let triples = generate_pairs(&stage.plan, left.view(), right.values.view(), stage.total as f64 * scale, eps, rng)
            .map_err(degree_err)?;
        let extend = |l: usize, r: usize| {
            let mut p = prefixes[l].clone();
            p.push(&right.keys[r]);
            p
        };
        if s == last {
            for &(l, r, d) in &triples {
                let p = extend(l, r);
                rows.extend(std::iter::repeat_n(p, d as usize));
            }
        } else {
            let pairs: Vec<(usize, usize)> = triples.iter().map(|t| (t.0, t.1)).collect();
            let next: Vec<Vec<&Key>> = pairs.iter().map(|&(l, r)| extend(l, r)).collect();
            left = joint_rows(&left, &right.values, &pairs);
            prefixes = next;
        }
    }
    let fk_cols = fk_column_list(schema, i);
    let positions: Vec<Vec<usize>> = fks
        .iter()
        .map(|&f| {
            schema.fks[f]
                .child_columns()
                .iter()
                .map(|c| fk_cols.iter().position(|x| x == c).unwrap_or_default())
                .collect()
        })
        .collect();
    Ok(rows
        .into_iter()
        .map(|keys| {
            let mut t = vec![String::new(); fk_cols.len()];
            for (pos, key) in positions.iter().zip(keys) {
                for (&p, v) in pos.iter().zip(key) {
                    t[p] = v.clone();
                }
            }
            t
        })
        .collect())
}

fn key_column(kind: ColumnKind, values: impl Iterator<Item = String>) -> ColumnData {
    match kind {
        ColumnKind::Categorical => ColumnData::Categorical(values.map(Some).collect()),
        ColumnKind::Numerical => ColumnData::Numerical(values.map(|v| v.parse().ok()).collect()),
    }
}

/// Output table in schema column order: FK columns from `tuples`, remaining
/// primary-key columns as fresh sequential integers, the rest from `values`.
fn assemble(
    schema: &SchemaGraph,
    i: usize,
    n: usize,
    fk_cols: &[String],
    tuples: &[Vec<String>],
    values: Option<&Table>,
) -> Result<Table, PipelineError> {
    let spec = &schema.tables[i];
    let mut columns = Vec::with_capacity(spec.columns.len());
    for c in &spec.columns {
        let data = if let Some(p) = fk_cols.iter().position(|f| *f == c.name) {
            key_column(c.kind, tuples.iter().map(|t| t[p].clone()))
        } else if spec.primary_key.contains(&c.name) {
            key_column(c.kind, (0..n).map(|r| r.to_string()))
        } else {
            match values {
                Some(t) => t.require(&c.name)?.data.clone(),
                None => ColumnData::nulls(c.kind, n),
            }
        };
        columns.push(Column { name: c.name.clone(), data });
    }
    let mut t = Table::new(spec.name.clone(), columns);
    t.row_count = n;
    Ok(t)
}

#[derive(Deserialize)]
struct Header {
    format_version: u32,
}

/// Write `bundle` as `<dir>/bundle.json`.
pub fn save_bundle(bundle: &ModelBundle, dir: &Path) -> Result<(), PipelineError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| PipelineError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let path = dir.join(BUNDLE_FILE);
    let text = serde_json::to_string(bundle).map_err(|e| PipelineError::CorruptBundle(e.to_string()))?;
    std::fs::write(&path, text).map_err(io(&path))
}

pub fn load_bundle(dir: &Path) -> Result<ModelBundle, PipelineError> {
    let path = dir.join(BUNDLE_FILE);
    let text = std::fs::read_to_string(&path).map_err(|source| PipelineError::Io { path: path.clone(), source })?;
    let header: Header = serde_json::from_str(&text).map_err(|e| PipelineError::CorruptBundle(e.to_string()))?;
    if header.format_version > FORMAT_VERSION {
        return Err(PipelineError::VersionError {
            found: header.format_version,
            supported: FORMAT_VERSION,
        });
    }
    let bundle: ModelBundle = serde_json::from_str(&text).map_err(|e| PipelineError::CorruptBundle(e.to_string()))?;
    bundle.order.validate(&bundle.schema).map_err(|e| PipelineError::CorruptBundle(e.to_string()))?;
    if bundle.tables.len() != bundle.schema.len() {
        return Err(PipelineError::CorruptBundle("table models do not cover the schema".into()));
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::{demo_database, DemoSize, DEMO_ORDER};

    fn small() -> Database {
        demo_database(DemoSize { users: 120, activities: 12 }, 3)
    }

    fn fitted() -> (Database, ModelBundle) {
        let db = small();
        let order = db.schema.order_from_names(&DEMO_ORDER).unwrap();
        let bundle = fit_database(&db, &order, &PipelineConfig::fast()).unwrap();
        (db, bundle)
    }

    #[test]
    fn degree_models_follow_foreign_keys() {
        let (_, b) = fitted();
        assert!(b.tables[0].degree.is_none() && b.tables[1].degree.is_none());
        assert!(matches!(&b.tables[2].degree, Some(DegreeModel::Matched { stages, .. }) if stages.len() == 1));
        assert!(matches!(b.tables[3].degree, Some(DegreeModel::Single { .. })));
    }

    #[test]
    fn generated_database_is_consistent() {
        let (db, b) = fitted();
        let synth = generate_database(&b, 1.0, 11).unwrap();
        assert!(synth.integrity_violations().is_empty());
        for (r, s) in db.tables.iter().zip(&synth.tables) {
            let names = |t: &Table| t.columns.iter().map(|c| (c.name.clone(), c.data.kind())).collect::<Vec<_>>();
            assert_eq!(names(r), names(s));
            let err = (s.row_count as f64 - r.row_count as f64).abs() / r.row_count as f64;
            assert!(err <= 0.05 + 1e-12, "{}: {} vs {}", r.name, s.row_count, r.row_count);
        }
        assert_eq!(synth.tables[0].row_count, 120);
        assert_eq!(synth, generate_database(&b, 1.0, 11).unwrap());
        assert_ne!(synth, generate_database(&b, 1.0, 12).unwrap());
        let double = generate_database(&b, 2.0, 11).unwrap();
        assert_eq!(double.tables[0].row_count, 240);
        assert!(double.integrity_violations().is_empty());
    }

    #[test]
    fn invalid_order_is_rejected() {
        let db = small();
        let bad = TableOrder::from_sequence(vec![2, 0, 1, 3]);
        assert!(matches!(fit_database(&db, &bad, &PipelineConfig::fast()), Err(PipelineError::Order(_))));
    }

    #[test]
    fn bundle_round_trip_and_failures() {
        let (_, b) = fitted();
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&b, dir.path()).unwrap();
        let back = load_bundle(dir.path()).unwrap();
        assert_eq!(generate_database(&back, 1.0, 5).unwrap(), generate_database(&b, 1.0, 5).unwrap());

        let path = dir.path().join(BUNDLE_FILE);
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load_bundle(dir.path()), Err(PipelineError::CorruptBundle(_))));

        let mut newer = b.clone();
        newer.format_version = FORMAT_VERSION + 1;
        save_bundle(&newer, dir.path()).unwrap();
        assert!(matches!(load_bundle(dir.path()), Err(PipelineError::VersionError { .. })));
    }

    #[test]
    fn config_parses_yaml_and_json() {
        let c = PipelineConfig::parse("eps: 0.1\ntrain:\n  backend: ridge\n  epochs: 3\n").unwrap();
        assert_eq!(c.eps, 0.1);
        assert_eq!(c.train.epochs, 3);
        let j = PipelineConfig::parse(r#"{"max_modes": 4}"#).unwrap();
        assert_eq!(j.max_modes, 4);
        assert!(PipelineConfig::parse("eps: 2").is_err());
    }
}
