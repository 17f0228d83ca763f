//! Column normalisation: one-hot categoricals and mode-specific encoding of
//! numerical columns, plus the group-mean aggregation used to roll child
//! rows up onto their parents.
//!
//! A numerical column encodes to `[value, mode_1 .. mode_K, (null)]`, where
//! `value = (x - mean_k) / (4 * std_k)` clamped to `[-1, 1]` for the most
//! likely mode `k`. The value dimension is meaningless across modes, so it is
//! the only dimension flagged non-aggregable.

pub mod gmm;

use std::collections::BTreeMap;
use std::ops::Range;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Column, ColumnData, Table};
use crate::schema::ColumnKind;
use gmm::{EmConfig, GaussianMixture};

/// Scale applied to the standardised within-mode value.
pub const MODE_SCALE: f64 = 4.0;
pub const CLAMP: (f64, f64) = (-1.0, 1.0);

/// Encoded rows, `rows x encoded width`.
pub type EncodedMatrix = Array2<f64>;

#[derive(Debug, Error, PartialEq)]
pub enum EncodingError {
    #[error("column `{0}` has no non-null values to fit")]
    NoData(String),
    #[error("table `{table}` lacks encoded column `{column}`")]
    MissingColumn { table: String, column: String },
    #[error("column `{column}` is {found:?} but the codec expects {expected:?}")]
    KindMismatch {
        column: String,
        expected: ColumnKind,
        found: ColumnKind,
    },
    #[error("matrix width {found} does not match codec width {expected}")]
    WidthMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalCodec {
    pub categories: Vec<String>,
    /// Extra slot for nulls, present when nulls occurred while fitting.
    pub null_slot: bool,
    /// Slot of the most frequent category; unseen values encode here.
    pub fallback: usize,
}

impl CategoricalCodec {
    pub fn width(&self) -> usize {
        self.categories.len() + usize::from(self.null_slot)
    }

    fn slot(&self, value: Option<&str>) -> usize {
        match value {
            Some(v) => self
                .categories
                .iter()
                .position(|c| c == v)
                .unwrap_or(self.fallback),
            None if self.null_slot => self.categories.len(),
            None => self.fallback,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCodec {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub null_slot: bool,
}

impl ModeCodec {
    pub fn n_modes(&self) -> usize {
        self.weights.len()
    }

    pub fn width(&self) -> usize {
        1 + self.n_modes() + usize::from(self.null_slot)
    }

    fn mixture(&self) -> GaussianMixture {
        GaussianMixture {
            weights: self.weights.clone(),
            means: self.means.iter().map(|&m| vec![m]).collect(),
            stds: self.stds.iter().map(|&s| vec![s]).collect(),
        }
    }

    /// `(mode, clamped within-mode value)` for a present value.
    pub fn encode_value(&self, x: f64) -> (usize, f64) {
        let mode = self.mixture().most_likely_component(ndarray::arr1(&[x]).view());
        let v = (x - self.means[mode]) / (MODE_SCALE * self.stds[mode]);
        (mode, v.clamp(CLAMP.0, CLAMP.1))
    }

    pub fn decode_value(&self, mode: usize, v: f64) -> f64 {
        self.means[mode] + MODE_SCALE * self.stds[mode] * v.clamp(CLAMP.0, CLAMP.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnCodec {
    Categorical(CategoricalCodec),
    Numerical(ModeCodec),
}

impl ColumnCodec {
    pub fn width(&self) -> usize {
        match self {
            ColumnCodec::Categorical(c) => c.width(),
            ColumnCodec::Numerical(m) => m.width(),
        }
    }

    pub fn kind(&self) -> ColumnKind {
        match self {
            ColumnCodec::Categorical(_) => ColumnKind::Categorical,
            ColumnCodec::Numerical(_) => ColumnKind::Numerical,
        }
    }

    /// Ranges (relative to the column start) that hold a one-hot block.
    pub fn one_hot_ranges(&self) -> Vec<Range<usize>> {
        match self {
            ColumnCodec::Categorical(c) => vec![0..c.width()],
            ColumnCodec::Numerical(m) => vec![1..m.width()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedColumn {
    pub name: String,
    pub codec: ColumnCodec,
    pub start: usize,
}

impl EncodedColumn {
    pub fn span(&self) -> Range<usize> {
        self.start..self.start + self.codec.width()
    }
}

/// Per-column codecs with contiguous spans covering the encoded width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCodec {
    pub table: String,
    pub columns: Vec<EncodedColumn>,
    pub width: usize,
}

impl TableCodec {
    /// Per encoded dimension: may it be averaged over a group?
    pub fn aggregable_mask(&self) -> Vec<bool> {
        let mut mask = vec![true; self.width];
        for c in &self.columns {
            if let ColumnCodec::Numerical(_) = c.codec {
                mask[c.start] = false;
            }
        }
        mask
    }

    pub fn column(&self, name: &str) -> Option<&EncodedColumn> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn span_map(&self) -> BTreeMap<String, Range<usize>> {
        self.columns.iter().map(|c| (c.name.clone(), c.span())).collect()
    }
}

/// Fit codecs for every column of `table`.
pub fn fit_codec(table: &Table, max_modes: usize, seed: u64) -> Result<TableCodec, EncodingError> {
    let mut columns = Vec::with_capacity(table.columns.len());
    let mut start = 0;
    for (i, col) in table.columns.iter().enumerate() {
        let codec = match &col.data {
            ColumnData::Categorical(values) => fit_categorical(&col.name, values)?,
            ColumnData::Numerical(values) => {
                fit_numerical(&col.name, values, max_modes, seed.wrapping_add(i as u64))?
            }
        };
        let width = codec.width();
        columns.push(EncodedColumn {
            name: col.name.clone(),
            codec,
            start,
        });
        start += width;
    }
    Ok(TableCodec {
        table: table.name.clone(),
        columns,
        width: start,
    })
}

fn fit_categorical(name: &str, values: &[Option<String>]) -> Result<ColumnCodec, EncodingError> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut nulls = 0;
    for v in values {
        match v {
            Some(v) => *counts.entry(v.as_str()).or_default() += 1,
            None => nulls += 1,
        }
    }
    if counts.is_empty() && nulls == 0 {
        return Err(EncodingError::NoData(name.to_string()));
    }
    let categories: Vec<String> = counts.keys().map(|s| s.to_string()).collect();
    let fallback = counts
        .values()
        .enumerate()
        .fold((0, 0), |best, (i, &c)| if c > best.1 { (i, c) } else { best })
        .0;
    let null_slot = nulls > 0;
    Ok(ColumnCodec::Categorical(CategoricalCodec {
        fallback: if categories.is_empty() { 0 } else { fallback },
        categories,
        null_slot,
    }))
}

fn fit_numerical(
    name: &str,
    values: &[Option<f64>],
    max_modes: usize,
    seed: u64,
) -> Result<ColumnCodec, EncodingError> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(EncodingError::NoData(name.to_string()));
    }
    let (lo, hi) = present
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let range = if hi > lo { hi - lo } else { 1.0 };
    let floor = 1e-6 * range;
    let data = Array2::from_shape_vec((present.len(), 1), present).expect("column shape");
    let model = gmm::fit_gmm(data.view(), max_modes, seed, &EmConfig::new(vec![floor]));
    Ok(ColumnCodec::Numerical(ModeCodec {
        weights: model.weights,
        means: model.means.iter().map(|m| m[0]).collect(),
        stds: model.stds.iter().map(|s| s[0]).collect(),
        null_slot: values.iter().any(Option::is_none),
    }))
}

/// Encode `table`, which must carry every codec column with a matching kind.
pub fn encode(codec: &TableCodec, table: &Table) -> Result<EncodedMatrix, EncodingError> {
    let mut out = Array2::zeros((table.row_count, codec.width));
    for ec in &codec.columns {
        let col = table
            .column(&ec.name)
            .ok_or_else(|| EncodingError::MissingColumn {
                table: table.name.clone(),
                column: ec.name.clone(),
            })?;
        match (&ec.codec, &col.data) {
            (ColumnCodec::Categorical(c), ColumnData::Categorical(values)) => {
                for (r, v) in values.iter().enumerate() {
                    out[[r, ec.start + c.slot(v.as_deref())]] = 1.0;
                }
            }
            (ColumnCodec::Numerical(m), ColumnData::Numerical(values)) => {
                for (r, v) in values.iter().enumerate() {
                    match v {
                        Some(x) => {
                            let (mode, value) = m.encode_value(*x);
                            out[[r, ec.start]] = value;
                            out[[r, ec.start + 1 + mode]] = 1.0;
                        }
                        None if m.null_slot => out[[r, ec.start + 1 + m.n_modes()]] = 1.0,
                        None => {
                            let mode = gmm::argmax(&m.weights);
                            out[[r, ec.start + 1 + mode]] = 1.0;
                        }
                    }
                }
            }
            (expected, found) => {
                return Err(EncodingError::KindMismatch {
                    column: ec.name.clone(),
                    expected: expected.kind(),
                    found: found.kind(),
                })
            }
        }
    }
    Ok(out)
}

fn argmax_view(v: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Invert [`encode`]: argmax over one-hot blocks, rescaled within-mode values.
pub fn decode(codec: &TableCodec, matrix: ArrayView2<f64>) -> Result<Table, EncodingError> {
    if matrix.ncols() != codec.width {
        return Err(EncodingError::WidthMismatch {
            expected: codec.width,
            found: matrix.ncols(),
        });
    }
    let n = matrix.nrows();
    let columns = codec
        .columns
        .iter()
        .map(|ec| {
            let block = matrix.slice(ndarray::s![.., ec.span()]);
            let data = match &ec.codec {
                ColumnCodec::Categorical(c) => ColumnData::Categorical(
                    (0..n)
                        .map(|r| {
                            let slot = argmax_view(block.row(r));
                            c.categories.get(slot).cloned()
                        })
                        .collect(),
                ),
                ColumnCodec::Numerical(m) => ColumnData::Numerical(
                    (0..n)
                        .map(|r| {
                            let row = block.row(r);
                            let slot = argmax_view(row.slice(ndarray::s![1..]));
                            (slot < m.n_modes()).then(|| m.decode_value(slot, row[0]))
                        })
                        .collect(),
                ),
            };
            Column {
                name: ec.name.clone(),
                data,
            }
        })
        .collect();
    Ok(Table::new(codec.table.clone(), columns))
}

/// Mean of the aggregable dimensions over each group; an empty group yields
/// a zero row. Output columns are the `true` entries of `mask`, in order.
pub fn aggregate_mean(
    matrix: ArrayView2<f64>,
    groups: &[Vec<usize>],
    mask: &[bool],
) -> EncodedMatrix {
    let dims: Vec<usize> = (0..mask.len()).filter(|&d| mask[d]).collect();
    let mut out = Array2::zeros((groups.len(), dims.len()));
    for (g, rows) in groups.iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        let inv = 1.0 / rows.len() as f64;
        for &r in rows {
            for (o, &d) in dims.iter().enumerate() {
                out[[g, o]] += matrix[[r, d]];
            }
        }
        out.row_mut(g).mapv_inplace(|x| x * inv);
    }
    out
}
