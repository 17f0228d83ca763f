//! Table variants built from a database and its codecs: extended tables,
//! their known/unknown split, potential contexts, and degrees.
//!
//! Construction follows a depth-first walk over foreign keys in both
//! directions starting from the target table `i`. Parents are left-joined;
//! children are grouped by the foreign key, averaged over their aggregable
//! encoded dimensions, and joined back. Only children placed before `i` in
//! the order are visited, and no foreign key is traversed twice on one walk,
//! so the walk reaches exactly the tables connected to `i` in the order prefix
//! ending at `i`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::Range;

use ndarray::{s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Column, ColumnData, DataError, Table};
use crate::encoding::{self, ColumnCodec, EncodingError, TableCodec};
use crate::schema::{SchemaGraph, TableOrder};

#[derive(Debug, Error)]
pub enum VariantError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error("potential context of `{table}` would hold {rows} rows, above the cap of {cap}")]
    CapExceeded { table: String, rows: u128, cap: u128 },
    #[error("table `{0}` has no foreign keys")]
    NoForeignKey(String),
    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpanKind {
    /// A raw key column; carried for provenance with zero encoded width.
    Key,
    Categorical,
    /// `[value, modes..]`: the first dimension is not aggregable.
    Numerical,
    /// Group means of one-hot or presence dimensions.
    Aggregated,
    /// 1 when the parent row had at least one child row through this key.
    Presence,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub table: String,
    pub column: String,
    /// Foreign keys walked from the base table, `join:<fk>` or `agg:<fk>`.
    pub path: Vec<String>,
    pub kind: SpanKind,
    pub start: usize,
    pub width: usize,
}

impl Span {
    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.width
    }

    pub fn is_aggregated(&self) -> bool {
        self.path.iter().any(|p| p.starts_with("agg:"))
    }

    /// Name used in dumps, e.g. `users.gender` or `user_activities.hours-a`.
    pub fn display_name(&self) -> String {
        let suffix = if self.is_aggregated() { "-a" } else { "" };
        if self.kind == SpanKind::Presence {
            format!("{}.<present>{suffix}", self.table)
        } else {
            format!("{}.{}{suffix}", self.table, self.column)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Layout {
    pub spans: Vec<Span>,
    pub width: usize,
}

impl Layout {
    pub fn aggregable_mask(&self) -> Vec<bool> {
        let mut mask = vec![true; self.width];
        for sp in &self.spans {
            if sp.kind == SpanKind::Numerical {
                mask[sp.start] = false;
            }
        }
        mask
    }

    fn push(&mut self, mut span: Span) {
        span.start = self.width;
        self.width += span.width;
        self.spans.push(span);
    }

    /// Split after the first `n_spans` spans; the second half is rebased to zero.
    pub fn split_at(&self, n_spans: usize) -> (Layout, Layout) {
        let head: Vec<Span> = self.spans[..n_spans].to_vec();
        let cut = head.last().map_or(0, |sp| sp.start + sp.width);
        let tail = self.spans[n_spans..]
            .iter()
            .map(|sp| Span {
                start: sp.start - cut,
                ..sp.clone()
            })
            .collect();
        (
            Layout {
                spans: head,
                width: cut,
            },
            Layout {
                spans: tail,
                width: self.width - cut,
            },
        )
    }

    /// `(origin table, origin column)` pairs, ignoring presence flags.
    pub fn provenance(&self) -> BTreeSet<(String, String)> {
        self.spans
            .iter()
            .filter(|sp| sp.kind != SpanKind::Presence)
            .map(|sp| (sp.table.clone(), sp.column.clone()))
            .collect()
    }

    pub fn tables(&self) -> BTreeSet<String> {
        self.spans.iter().map(|sp| sp.table.clone()).collect()
    }
}

/// Rows of one base table with appended context.
#[derive(Debug, Clone)]
pub struct Frame {
    pub table: usize,
    /// Raw key columns of the base table, by column name.
    pub keys: BTreeMap<String, Vec<Option<String>>>,
    pub values: Array2<f64>,
    pub layout: Layout,
}

impl Frame {
    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    fn key_tuples(&self, columns: &[&str]) -> Result<Vec<Option<Vec<String>>>, VariantError> {
        let cols = columns
            .iter()
            .map(|c| {
                self.keys.get(*c).ok_or_else(|| {
                    VariantError::InternalInconsistency(format!("frame lacks key column `{c}`"))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok((0..self.rows())
            .map(|r| cols.iter().map(|c| c[r].clone()).collect())
            .collect())
    }

    fn append(&mut self, block: Array2<f64>, spans: Vec<Span>) {
        let mut values = Array2::zeros((self.rows(), self.values.ncols() + block.ncols()));
        values.slice_mut(s![.., ..self.values.ncols()]).assign(&self.values);
        values.slice_mut(s![.., self.values.ncols()..]).assign(&block);
        self.values = values;
        for sp in spans {
            self.layout.push(sp);
        }
    }

    /// Drop non-base spans whose `(table, column)` provenance already appeared.
    fn dedup(&mut self) -> usize {
        let mut seen = BTreeSet::new();
        let mut keep_dims = Vec::new();
        let mut layout = Layout::default();
        let mut dropped = 0;
        for sp in &self.layout.spans {
            let id = (sp.table.clone(), sp.column.clone(), sp.kind == SpanKind::Presence);
            if !seen.insert(id) && !sp.path.is_empty() {
                dropped += 1;
                continue;
            }
            keep_dims.extend(sp.range());
            layout.push(sp.clone());
        }
        self.values = self.values.select(Axis(1), &keep_dims);
        self.layout = layout;
        dropped
    }
}

/// Where table rows come from while building variants.
pub trait TableSource {
    fn table(&self, index: usize) -> Option<&Table>;
}

impl TableSource for crate::data::Database {
    fn table(&self, index: usize) -> Option<&Table> {
        self.tables.get(index)
    }
}

impl TableSource for [Option<Table>] {
    fn table(&self, index: usize) -> Option<&Table> {
        self.get(index).and_then(Option::as_ref)
    }
}

impl TableSource for Vec<Option<Table>> {
    fn table(&self, index: usize) -> Option<&Table> {
        self.get(index).and_then(Option::as_ref)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantOptions {
    /// Collapse spans repeating an already-included `(table, column)`.
    pub dedup_provenance: bool,
}

/// parents) or aggregated (towards children) from each visited table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanNode {
    pub table: usize,
    /// `(fk index, parent subtree)`
    pub parents: Vec<(usize, PlanNode)>,
    /// `(fk index, child subtree)`
    pub children: Vec<(usize, PlanNode)>,
}

impl PlanNode {
    /// Every table index reached by the walk, including the root.
    pub fn tables(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::from([self.table]);
        for (_, n) in self.parents.iter().chain(&self.children) {
            out.extend(n.tables());
        }
        out
    }
}

/// Walk plan for the extended table of `target` under `order`.
pub fn extension_plan(schema: &SchemaGraph, target: usize, order: &TableOrder) -> PlanNode {
    let limit = order.position(target);
    let parents = schema
        .fks_of(target)
        .map(|(f, fk)| (f, extend_till(schema, order, fk.parent, limit, &mut vec![f])))
        .collect();
    PlanNode {
        table: target,
        parents,
        children: Vec::new(),
    }
}

fn extend_till(
    schema: &SchemaGraph,
    order: &TableOrder,
    table: usize,
    limit: usize,
    used: &mut Vec<usize>,
) -> PlanNode {
    let parent_fks: Vec<(usize, usize)> = schema.fks_of(table).map(|(f, fk)| (f, fk.parent)).collect();
    let child_fks: Vec<(usize, usize)> = schema
        .fks_into(table)
        .map(|(f, fk)| (f, fk.child))
        .filter(|&(_, child)| order.position(child) < limit)
        .collect();
    let parents = walk(schema, order, parent_fks, limit, used);
    let children = walk(schema, order, child_fks, limit, used);
    PlanNode {
        table,
        parents,
        children,
    }
}

fn walk(
    schema: &SchemaGraph,
    order: &TableOrder,
    edges: Vec<(usize, usize)>,
    limit: usize,
    used: &mut Vec<usize>,
) -> Vec<(usize, PlanNode)> {
    let mut out = Vec::new();
    for (f, next) in edges {
        if used.contains(&f) {
            continue;
        }
        used.push(f);
        out.push((f, extend_till(schema, order, next, limit, used)));
        used.pop();
    }
    out
}

struct BuildCtx<'a> {
    schema: &'a SchemaGraph,
    codecs: &'a [TableCodec],
    source: &'a dyn TableSource,
}

impl BuildCtx<'_> {
    fn table(&self, index: usize) -> Result<&Table, VariantError> {
        self.source.table(index).ok_or_else(|| {
            VariantError::InternalInconsistency(format!(
                "table `{}` is not materialised yet",
                self.schema.tables[index].name
            ))
        })
    }

    /// Base frame: `[pk-only key spans][encoded columns][fk key spans]`.
    /// Returns the frame and the number of leading spans that are unknown.
    fn base_frame(
        &self,
        index: usize,
        rows: &Table,
        encode_values: bool,
        path: &[String],
    ) -> Result<(Frame, usize), VariantError> {
        let spec = &self.schema.tables[index];
        let fk_cols = self.schema.fk_columns(index);
        let mut keys = BTreeMap::new();
        for k in self.schema.key_columns(index) {
            if let Some(col) = rows.column(&k) {
                keys.insert(
                    k.clone(),
                    (0..rows.row_count).map(|r| col.data.text(r)).collect(),
                );
            }
        }
        let key_span = |column: &str| Span {
            table: spec.name.clone(),
            column: column.to_string(),
            path: path.to_vec(),
            kind: SpanKind::Key,
            start: 0,
            width: 0,
        };
        let mut layout = Layout::default();
        let mut n_unknown = 0;
        if encode_values {
            for k in spec.primary_key.iter().filter(|k| !fk_cols.contains(*k)) {
                layout.push(key_span(k));
                n_unknown += 1;
            }
        }
        let codec = &self.codecs[index];
        let values = if encode_values {
            for c in &codec.columns {
                layout.push(Span {
                    table: spec.name.clone(),
                    column: c.name.clone(),
                    path: path.to_vec(),
                    kind: match c.codec {
                        ColumnCodec::Categorical(_) => SpanKind::Categorical,
                        ColumnCodec::Numerical(_) => SpanKind::Numerical,
                    },
                    start: 0,
                    width: c.codec.width(),
                });
                n_unknown += 1;
            }
            encoding::encode(codec, rows)?
        } else {
            Array2::zeros((rows.row_count, 0))
        };
        for k in fk_column_list(self.schema, index) {
            layout.push(key_span(&k));
        }
        Ok((
            Frame {
                table: index,
                keys,
                values,
                layout,
            },
            n_unknown,
        ))
    }

    fn execute(&self, node: &PlanNode, path: &[String]) -> Result<Frame, VariantError> {
        let rows = self.table(node.table)?;
        let (mut frame, _) = self.base_frame(node.table, rows, true, path)?;
        self.attach(&mut frame, node, path)?;
        Ok(frame)
    }

    /// Join parents and aggregate children of `node` onto `frame`.
    fn attach(&self, frame: &mut Frame, node: &PlanNode, path: &[String]) -> Result<(), VariantError> {
        for (f, sub) in &node.parents {
            let fk = &self.schema.fks[*f];
            let step = extend_path(path, format!("join:{}", fk.label()));
            let parent = self.execute(sub, &step)?;
            let index = unique_tuples(&parent, &fk.parent_columns(), &fk.parent_table)?;
            let matches: Vec<Option<usize>> = frame
                .key_tuples(&fk.child_columns())?
                .into_iter()
                .map(|k| k.and_then(|k| index.get(&k).copied()))
                .collect();
            let mut block = Array2::zeros((frame.rows(), parent.values.ncols()));
            for (r, m) in matches.iter().enumerate() {
                if let Some(m) = m {
                    block.row_mut(r).assign(&parent.values.row(*m));
                }
            }
            frame.append(block, parent.layout.spans);
        }
        for (f, sub) in &node.children {
            let fk = &self.schema.fks[*f];
            let step = extend_path(path, format!("agg:{}", fk.label()));
            let child = self.execute(sub, &step)?;
            let mut groups: HashMap<Vec<String>, Vec<usize>> = HashMap::new();
            for (r, k) in child.key_tuples(&fk.child_columns())?.into_iter().enumerate() {
                if let Some(k) = k {
                    groups.entry(k).or_default().push(r);
                }
            }
            let ordered: Vec<Vec<usize>> = frame
                .key_tuples(&fk.parent_columns())?
                .into_iter()
                .map(|k| k.and_then(|k| groups.get(&k).cloned()).unwrap_or_default())
                .collect();
            let mask = child.layout.aggregable_mask();
            let means = encoding::aggregate_mean(child.values.view(), &ordered, &mask);
            let mut block = Array2::zeros((frame.rows(), means.ncols() + 1));
            block.slice_mut(s![.., ..means.ncols()]).assign(&means);
            for (r, g) in ordered.iter().enumerate() {
                block[[r, means.ncols()]] = if g.is_empty() { 0.0 } else { 1.0 };
            }
            let mut spans: Vec<Span> = child
                .layout
                .spans
                .into_iter()
                .map(|sp| {
                    let (kind, width) = match sp.kind {
                        SpanKind::Key => (SpanKind::Key, 0),
                        SpanKind::Numerical => (SpanKind::Aggregated, sp.width - 1),
                        _ => (SpanKind::Aggregated, sp.width),
                    };
                    Span { kind, width, ..sp }
                })
                .collect();
            spans.push(Span {
                table: self.schema.tables[fk.child].name.clone(),
                column: "<present>".into(),
                path: step,
                kind: SpanKind::Presence,
                start: 0,
                width: 1,
            });
            frame.append(block, spans);
        }
        Ok(())
    }
}

fn extend_path(path: &[String], step: String) -> Vec<String> {
    let mut p = path.to_vec();
    p.push(step);
    p
}

fn unique_tuples(
    frame: &Frame,
    columns: &[&str],
    table: &str,
) -> Result<HashMap<Vec<String>, usize>, VariantError> {
    let mut index = HashMap::with_capacity(frame.rows());
    for (r, k) in frame.key_tuples(columns)?.into_iter().enumerate() {
        if let Some(k) = k {
            if index.insert(k.clone(), r).is_some() {
                return Err(DataError::DuplicateKey {
                    table: table.to_string(),
                    key: k,
                }
                .into());
            }
        }
    }
    Ok(index)
}

/// Distinct FK columns of table `i`, in declaration order.
pub fn fk_column_list(schema: &SchemaGraph, i: usize) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for (_, fk) in schema.fks_of(i) {
        for (c, _) in &fk.column_pairs {
            if !out.contains(c) {
                out.push(c.clone());
            }
        }
    }
    out
}

/// A table joined and aggregated with every table affecting it.
///
/// Layout: the unknown part (the table's own non-FK columns) comes first,
/// followed by the known part (FK columns and all context).
#[derive(Debug, Clone)]
pub struct ExtendedTable {
    pub base: usize,
    pub frame: Frame,
    pub n_unknown_spans: usize,
    pub unknown: Range<usize>,
    pub known: Range<usize>,
}

impl ExtendedTable {
    pub fn rows(&self) -> usize {
        self.frame.rows()
    }

    pub fn known_values(&self) -> ArrayView2<'_, f64> {
        self.frame.values.slice(s![.., self.known.clone()])
    }

    pub fn unknown_values(&self) -> ArrayView2<'_, f64> {
        self.frame.values.slice(s![.., self.unknown.clone()])
    }

    /// `(unknown layout, known layout)`, each rebased to zero.
    pub fn layouts(&self) -> (Layout, Layout) {
        self.frame.layout.split_at(self.n_unknown_spans)
    }

    /// Column provenance as structured text, for debugging.
    pub fn provenance_dump(&self) -> serde_json::Value {
        let (unknown, known) = self.layouts();
        let describe = |l: &Layout| {
            l.spans
                .iter()
                .map(|sp| {
                    serde_json::json!({
                        "name": sp.display_name(),
                        "kind": sp.kind,
                        "path": sp.path,
                        "start": sp.start,
                        "width": sp.width,
                    })
                })
                .collect::<Vec<_>>()
        };
        serde_json::json!({
            "rows": self.rows(),
            "unknown": describe(&unknown),
            "known": describe(&known),
        })
    }
}

/// Build the extended table of table `i` from materialised tables.
pub fn build_extended(
    source: &dyn TableSource,
    schema: &SchemaGraph,
    codecs: &[TableCodec],
    i: usize,
    order: &TableOrder,
    options: VariantOptions,
) -> Result<ExtendedTable, VariantError> {
    let ctx = BuildCtx {
        schema,
        codecs,
        source,
    };
    let plan = extension_plan(schema, i, order);
    let rows = ctx.table(i)?;
    let (mut frame, n_unknown) = ctx.base_frame(i, rows, true, &[])?;
    ctx.attach(&mut frame, &plan, &[])?;
    if options.dedup_provenance {
        frame.dedup();
    }
    let cut = frame.layout.split_at(n_unknown).0.width;
    let width = frame.layout.width;
    Ok(ExtendedTable {
        base: i,
        frame,
        n_unknown_spans: n_unknown,
        unknown: 0..cut,
        known: cut..width,
    })
}

/// Column-level view of the unknown/known split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnownUnknownSplit {
    /// Base-table columns the generator must produce (all non-FK columns).
    pub unknown_columns: Vec<String>,
    /// Display names of every other column: FK columns and context.
    pub known_columns: Vec<String>,
    pub unknown: Range<usize>,
    pub known: Range<usize>,
}

pub fn split_known_unknown(ext: &ExtendedTable, schema: &SchemaGraph) -> KnownUnknownSplit {
    let (unknown, known) = ext.layouts();
    let fk_cols = schema.fk_columns(ext.base);
    let mut unknown_columns: Vec<String> = unknown.spans.iter().map(|sp| sp.column.clone()).collect();
    // the order of the declared columns, not of the layout
    let declared: Vec<&str> = schema.tables[ext.base]
        .columns
        .iter()
        .map(|c| c.name.as_str())
        .filter(|c| !fk_cols.contains(*c))
        .collect();
    unknown_columns.sort_by_key(|c| declared.iter().position(|d| d == c));
    KnownUnknownSplit {
        unknown_columns,
        known_columns: known.spans.iter().map(Span::display_name).collect(),
        unknown: ext.unknown.clone(),
        known: ext.known.clone(),
    }
}

/// One context row per candidate FK tuple.
#[derive(Debug, Clone)]
pub struct PotentialContext {
    pub values: Array2<f64>,
    pub layout: Layout,
    /// FK column names, matching each entry of `fk_tuples`.
    pub fk_columns: Vec<String>,
    pub fk_tuples: Vec<Vec<String>>,
}

impl PotentialContext {
    pub fn rows(&self) -> usize {
        self.values.nrows()
    }
}

/// Known-part rows of table `i` for explicit FK tuples (ordered as
/// [`fk_column_list`]). Tuples may repeat; rows follow the input order.
pub fn context_for_tuples(
    source: &dyn TableSource,
    schema: &SchemaGraph,
    codecs: &[TableCodec],
    i: usize,
    order: &TableOrder,
    options: VariantOptions,
    tuples: &[Vec<String>],
) -> Result<PotentialContext, VariantError> {
    let fk_columns = fk_column_list(schema, i);
    if fk_columns.is_empty() {
        return Err(VariantError::NoForeignKey(schema.tables[i].name.clone()));
    }
    let pseudo = Table::new(
        schema.tables[i].name.clone(),
        fk_columns
            .iter()
            .enumerate()
            .map(|(c, name)| Column {
                name: name.clone(),
                data: ColumnData::Categorical(tuples.iter().map(|t| Some(t[c].clone())).collect()),
            })
            .collect(),
    );
    let ctx = BuildCtx {
        schema,
        codecs,
        source,
    };
    let plan = extension_plan(schema, i, order);
    let (mut frame, _) = ctx.base_frame(i, &pseudo, false, &[])?;
    ctx.attach(&mut frame, &plan, &[])?;
    if options.dedup_provenance {
        // table `i` never reappears in its own context, so this matches the
        // collapse applied to the extended table's known part
        frame.dedup();
    }
    Ok(PotentialContext {
        values: frame.values,
        layout: frame.layout,
        fk_columns,
        fk_tuples: tuples.to_vec(),
    })
}


/// Context rows of every parent row reachable through one FK of table `i`.
#[derive(Debug, Clone)]
pub struct FkContext {
    pub fk: usize,
    /// Parent key tuple of each row, aligned with the FK's child columns.
    pub keys: Vec<Vec<String>>,
    pub values: Array2<f64>,
}

/// Per-FK parent context blocks for table `i`, in declaration order.
pub fn fk_contexts(
    source: &dyn TableSource,
    schema: &SchemaGraph,
    codecs: &[TableCodec],
    i: usize,
    order: &TableOrder,
) -> Result<Vec<FkContext>, VariantError> {
    let ctx = BuildCtx {
        schema,
        codecs,
        source,
    };
    let plan = extension_plan(schema, i, order);
    plan.parents
        .iter()
        .map(|(f, sub)| {
            let fk = &schema.fks[*f];
            let frame = ctx.execute(sub, &[format!("join:{}", fk.label())])?;
            let keys = frame
                .key_tuples(&fk.parent_columns())?
                .into_iter()
                .map(|k| {
                    k.ok_or_else(|| {
                        VariantError::InternalInconsistency(format!(
                            "null primary key in `{}`",
                            fk.parent_table
                        ))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(FkContext {
                fk: *f,
                keys,
                values: frame.values,
            })
        })
        .collect()
}

/// Potential context of table `i`: one row per parent key (single FK) or per
/// combination of parent keys (several FKs). Fails with `CapExceeded` when the
/// combination count exceeds `cap`.
pub fn build_potential_context(
    source: &dyn TableSource,
    schema: &SchemaGraph,
    codecs: &[TableCodec],
    i: usize,
    order: &TableOrder,
    options: VariantOptions,
    cap: u128,
) -> Result<PotentialContext, VariantError> {
    let fk_columns = fk_column_list(schema, i);
    let mut candidates: Vec<(Vec<usize>, Vec<Vec<String>>)> = Vec::new();
    for (_, fk) in schema.fks_of(i) {
        let parent = source.table(fk.parent).ok_or_else(|| {
            VariantError::InternalInconsistency(format!("parent `{}` missing", fk.parent_table))
        })?;
        let positions = fk
            .child_columns()
            .iter()
            .map(|c| fk_columns.iter().position(|x| x == c).unwrap_or_default())
            .collect();
        let mut keys: Vec<Vec<String>> = parent
            .key_tuples(&fk.parent_columns())?
            .into_iter()
            .flatten()
            .collect();
        let mut seen = BTreeSet::new();
        keys.retain(|k| seen.insert(k.clone()));
        candidates.push((positions, keys));
    }
    if candidates.is_empty() {
        return Err(VariantError::NoForeignKey(schema.tables[i].name.clone()));
    }
    let total: u128 = candidates.iter().map(|(_, k)| k.len() as u128).product();
    if total > cap {
        return Err(VariantError::CapExceeded {
            table: schema.tables[i].name.clone(),
            rows: total,
            cap,
        });
    }
    let mut tuples: Vec<Vec<Option<String>>> = vec![vec![None; fk_columns.len()]];
    for (positions, keys) in &candidates {
        let mut next = Vec::with_capacity(tuples.len() * keys.len());
        for t in &tuples {
            'key: for k in keys {
                let mut t = t.clone();
                for (&p, v) in positions.iter().zip(k) {
                    match &t[p] {
                        Some(existing) if existing != v => continue 'key,
                        _ => t[p] = Some(v.clone()),
                    }
                }
                next.push(t);
            }
        }
        tuples = next;
    }
    let tuples: Vec<Vec<String>> = tuples
        .into_iter()
        .map(|t| t.into_iter().map(Option::unwrap_or_default).collect())
        .collect();
    context_for_tuples(source, schema, codecs, i, order, options, &tuples)
}

/// Number of rows of the actual table per potential-context row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeColumn {
    pub counts: Vec<u64>,
}

impl DegreeColumn {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Count the rows of `table` (table `i`) per potential-context row. Rows with
/// a null FK part are not counted.
pub fn compute_degrees(
    pc: &PotentialContext,
    table: &Table,
) -> Result<DegreeColumn, VariantError> {
    let slots: HashMap<&[String], usize> = pc
        .fk_tuples
        .iter()
        .enumerate()
        .map(|(r, t)| (t.as_slice(), r))
        .collect();
    let cols: Vec<&str> = pc.fk_columns.iter().map(String::as_str).collect();
    let mut counts = vec![0u64; pc.rows()];
    for key in table.key_tuples(&cols)?.into_iter().flatten() {
        let slot = slots.get(key.as_slice()).ok_or_else(|| {
            VariantError::InternalInconsistency(format!(
                "`{}` row key {key:?} is missing from its potential context",
                table.name
            ))
        })?;
        counts[*slot] += 1;
    }
    Ok(DegreeColumn { counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Database;
    use crate::encoding::fit_codec;
    use crate::schema::parse_schema;
    use std::sync::Arc;

    const SCHEMA: &str = r#"{"tables": [
        {"name": "U", "columns": [{"name": "id", "kind": "categorical"}, {"name": "g", "kind": "categorical"}], "primary_key": ["id"]},
        {"name": "A", "columns": [{"name": "id", "kind": "categorical"}, {"name": "a", "kind": "categorical"}], "primary_key": ["id"]},
        {"name": "UA", "columns": [{"name": "id", "kind": "categorical"}, {"name": "u", "kind": "categorical"}, {"name": "a", "kind": "categorical"}, {"name": "d", "kind": "numerical"}],
         "primary_key": ["id"],
         "foreign_keys": [{"columns": ["u"], "parent": "U", "parent_columns": ["id"]}, {"columns": ["a"], "parent": "A", "parent_columns": ["id"]}]},
        {"name": "S", "columns": [{"name": "id", "kind": "categorical"}, {"name": "u", "kind": "categorical"}, {"name": "s", "kind": "numerical"}, {"name": "y", "kind": "categorical"}],
         "primary_key": ["id"],
         "foreign_keys": [{"columns": ["u"], "parent": "U", "parent_columns": ["id"]}]}
    ]}"#;

    fn cat(name: &str, v: &[&str]) -> Column {
        Column {
            name: name.into(),
            data: ColumnData::Categorical(v.iter().map(|s| Some(s.to_string())).collect()),
        }
    }

    fn num(name: &str, v: &[f64]) -> Column {
        Column {
            name: name.into(),
            data: ColumnData::Numerical(v.iter().map(|&x| Some(x)).collect()),
        }
    }

    fn example() -> (Database, Vec<TableCodec>, TableOrder) {
        let schema = parse_schema(SCHEMA).unwrap();
        let order = schema.order_from_names(&["U", "A", "UA", "S"]).unwrap();
        let tables = vec![
            Table::new("U", vec![cat("id", &["u1", "u2", "u3"]), cat("g", &["M", "F", "F"])]),
            Table::new("A", vec![cat("id", &["a1", "a2"]), cat("a", &["run", "swim"])]),
            Table::new(
                "UA",
                vec![
                    cat("id", &["x1", "x2", "x3", "x4", "x5"]),
                    cat("u", &["u1", "u1", "u2", "u2", "u2"]),
                    cat("a", &["a1", "a2", "a1", "a1", "a2"]),
                    num("d", &[1.0, 2.0, 3.0, 4.0, 5.0]),
                ],
            ),
            Table::new(
                "S",
                vec![
                    cat("id", &["s1", "s2", "s3"]),
                    cat("u", &["u1", "u1", "u2"]),
                    num("s", &[3.0, 4.0, 5.0]),
                    cat("y", &["2019", "2020", "2020"]),
                ],
            ),
        ];
        let codecs = tables
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let keys = schema.key_columns(i);
                let cols: Vec<&str> = t
                    .columns
                    .iter()
                    .map(|c| c.name.as_str())
                    .filter(|c| !keys.contains(*c))
                    .collect();
                fit_codec(&t.project(&cols).unwrap(), 2, 0).unwrap()
            })
            .collect();
        let db = Database {
            schema: Arc::new(schema),
            tables,
        };
        (db, codecs, order)
    }

    fn pairs(set: &[(&str, &str)]) -> BTreeSet<(String, String)> {
        set.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn extended_ua_joins_both_parents() {
        let (db, codecs, order) = example();
        let ext = build_extended(&db, &db.schema, &codecs, 2, &order, VariantOptions::default()).unwrap();
        assert_eq!(ext.rows(), 5);
        assert_eq!(
            ext.frame.layout.provenance(),
            pairs(&[
                ("UA", "id"), ("UA", "u"), ("UA", "a"), ("UA", "d"),
                ("U", "id"), ("U", "g"), ("A", "id"), ("A", "a"),
            ])
        );
        assert!(ext.frame.layout.spans.iter().all(|sp| !sp.is_aggregated()));
        // row 0 is u1 (M) doing a1 (run)
        let (_, known) = ext.layouts();
        let g = known.spans.iter().find(|sp| sp.table == "U" && sp.column == "g").unwrap();
        let row = ext.known_values().row(0).to_vec();
        let gcodec = codecs[0].column("g").unwrap();
        let ColumnCodec::Categorical(c) = &gcodec.codec else { panic!() };
        let m_slot = c.categories.iter().position(|x| x == "M").unwrap();
        assert_eq!(row[g.start + m_slot], 1.0);
    }

    #[test]
    fn extended_s_matches_variant_columns() {
        let (db, codecs, order) = example();
        let ext = build_extended(&db, &db.schema, &codecs, 3, &order, VariantOptions::default()).unwrap();
        assert_eq!(ext.rows(), 3);
        assert_eq!(
            ext.frame.layout.provenance(),
            pairs(&[
                ("U", "id"), ("U", "g"),
                ("A", "id"), ("A", "a"),
                ("UA", "id"), ("UA", "u"), ("UA", "a"), ("UA", "d"),
                ("S", "id"), ("S", "u"), ("S", "s"), ("S", "y"),
            ])
        );
        for sp in &ext.frame.layout.spans {
            if sp.table == "UA" || sp.table == "A" {
                assert!(sp.is_aggregated(), "{}", sp.display_name());
            }
            if sp.table == "U" {
                assert!(!sp.is_aggregated());
            }
        }
        let split = split_known_unknown(&ext, &db.schema);
        assert_eq!(split.unknown_columns, vec!["id", "s", "y"]);
        // u1 has activities a1, a2 -> aggregated activity one-hot is [0.5, 0.5]
        let (_, known) = ext.layouts();
        let agg_a = known.spans.iter().find(|sp| sp.table == "A" && sp.column == "a").unwrap();
        let row = ext.known_values().row(0).to_vec();
        assert_eq!(&row[agg_a.range()], &[0.5, 0.5]);
    }

    #[test]
    fn extended_rows_project_back_to_the_table() {
        let (db, codecs, order) = example();
        for i in 0..4 {
            let ext = build_extended(&db, &db.schema, &codecs, i, &order, VariantOptions::default()).unwrap();
            let back = encoding::decode(&codecs[i], ext.unknown_values()).unwrap();
            for c in &back.columns {
                assert_eq!(&db.tables[i].column(&c.name).unwrap().data, &c.data);
            }
        }
    }

    #[test]
    fn no_fk_table_has_empty_known_part() {
        let (db, codecs, order) = example();
        let ext = build_extended(&db, &db.schema, &codecs, 0, &order, VariantOptions::default()).unwrap();
        assert!(ext.known.is_empty());
        assert_eq!(ext.unknown.len(), codecs[0].width);
        let split = split_known_unknown(&ext, &db.schema);
        assert_eq!(split.unknown_columns, vec!["id", "g"]);
        assert!(split.known_columns.is_empty());
    }

    #[test]
    fn ua_known_part_has_both_fk_columns() {
        let (db, codecs, order) = example();
        let ext = build_extended(&db, &db.schema, &codecs, 2, &order, VariantOptions::default()).unwrap();
        let split = split_known_unknown(&ext, &db.schema);
        assert_eq!(split.unknown_columns, vec!["id", "d"]);
        for name in ["UA.u", "UA.a", "U.id", "U.g", "A.id", "A.a"] {
            assert!(split.known_columns.iter().any(|k| k == name), "{name}");
        }
    }

    #[test]
    fn potential_context_and_degrees() {
        let (db, codecs, order) = example();
        let opts = VariantOptions::default();
        let pc = build_potential_context(&db, &db.schema, &codecs, 3, &order, opts, 1 << 20).unwrap();
        assert_eq!(pc.rows(), 3);
        let ext = build_extended(&db, &db.schema, &codecs, 3, &order, opts).unwrap();
        assert_eq!(pc.layout, ext.layouts().1);
        let d = compute_degrees(&pc, &db.tables[3]).unwrap();
        assert_eq!(d.counts, vec![2, 1, 0]);
        assert_eq!(d.total(), 3);

        let pc2 = build_potential_context(&db, &db.schema, &codecs, 2, &order, opts, 1 << 20).unwrap();
        assert_eq!(pc2.rows(), 6);
        let d2 = compute_degrees(&pc2, &db.tables[2]).unwrap();
        assert_eq!(d2.total(), 5);
        assert!(matches!(
            build_potential_context(&db, &db.schema, &codecs, 2, &order, opts, 5),
            Err(VariantError::CapExceeded { rows: 6, .. })
        ));
    }

    #[test]
    fn known_rows_of_extended_match_potential_context_rows() {
        let (db, codecs, order) = example();
        let opts = VariantOptions::default();
        let ext = build_extended(&db, &db.schema, &codecs, 3, &order, opts).unwrap();
        let tuples: Vec<Vec<String>> = db.tables[3]
            .key_tuples(&["u"])
            .unwrap()
            .into_iter()
            .flatten()
            .collect();
        let pc = context_for_tuples(&db, &db.schema, &codecs, 3, &order, opts, &tuples).unwrap();
        assert_eq!(pc.values.view(), ext.known_values());
    }

    #[test]
    fn degree_for_missing_tuple_is_inconsistent() {
        let (db, codecs, order) = example();
        let pc = context_for_tuples(&db, &db.schema, &codecs, 3, &order, VariantOptions::default(), &[vec!["u1".into()]]).unwrap();
        assert!(matches!(
            compute_degrees(&pc, &db.tables[3]),
            Err(VariantError::InternalInconsistency(_))
        ));
    }

    #[test]
    fn dedup_keeps_layouts_aligned() {
        let (db, codecs, order) = example();
        let opts = VariantOptions { dedup_provenance: true };
        let ext = build_extended(&db, &db.schema, &codecs, 3, &order, opts).unwrap();
        let pc = build_potential_context(&db, &db.schema, &codecs, 3, &order, opts, 100).unwrap();
        assert_eq!(pc.layout, ext.layouts().1);
        let names: Vec<String> = ext.frame.layout.spans.iter().map(Span::display_name).collect();
        let unique: BTreeSet<&String> = names.iter().collect();
        assert_eq!(unique.len(), names.len());
    }
}
