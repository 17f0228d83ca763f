//! Columnar tables, CSV ingestion, and the left-join / group-by primitives
//! used to build extended tables.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::schema::{ColumnKind, ForeignKeySpec, SchemaGraph};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing data file {0}")]
    MissingFile(PathBuf),
    #[error("table `{table}` row {row} column `{column}`: cannot read `{token}` as a number")]
    Coercion {
        table: String,
        row: usize,
        column: String,
        token: String,
    },
    #[error("table `{table}` has no column `{column}`")]
    MissingColumn { table: String, column: String },
    #[error("table `{table}` row {row} column `{column}` is empty but the column is not nullable")]
    UnexpectedNull {
        table: String,
        row: usize,
        column: String,
    },
    #[error("{} referential-integrity violation(s), first: {}", .0.len(), .0[0])]
    ForeignKeyViolation(Vec<FkViolation>),
    #[error("key {key:?} occurs more than once in `{table}`")]
    DuplicateKey { table: String, key: Vec<String> },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One child row whose foreign key has no matching parent row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FkViolation {
    /// Index into `SchemaGraph::fks`.
    pub fk: usize,
    pub child_table: String,
    pub parent_table: String,
    pub row: usize,
    pub key: Vec<String>,
}

impl std::fmt::Display for FkViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} row {} references missing {} key {:?}",
            self.child_table, self.row, self.parent_table, self.key
        )
    }
}

/// What to do with child rows whose FK value has no parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FkPolicy {
    #[default]
    Reject,
    /// Replace the dangling key by nulls and report it.
    NullOut,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Categorical(Vec<Option<String>>),
    Numerical(Vec<Option<f64>>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Categorical(v) => v.len(),
            ColumnData::Numerical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> ColumnKind {
        match self {
            ColumnData::Categorical(_) => ColumnKind::Categorical,
            ColumnData::Numerical(_) => ColumnKind::Numerical,
        }
    }

    pub fn is_null(&self, row: usize) -> bool {
        match self {
            ColumnData::Categorical(v) => v[row].is_none(),
            ColumnData::Numerical(v) => v[row].is_none(),
        }
    }

    /// Canonical text of a cell; numbers use the shortest round-trip form.
    pub fn text(&self, row: usize) -> Option<String> {
        match self {
            ColumnData::Categorical(v) => v[row].clone(),
            ColumnData::Numerical(v) => v[row].map(format_number),
        }
    }

    pub fn take(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Categorical(v) => {
                ColumnData::Categorical(rows.iter().map(|&r| v[r].clone()).collect())
            }
            ColumnData::Numerical(v) => ColumnData::Numerical(rows.iter().map(|&r| v[r]).collect()),
        }
    }

    pub fn nulls(kind: ColumnKind, n: usize) -> ColumnData {
        match kind {
            ColumnKind::Categorical => ColumnData::Categorical(vec![None; n]),
            ColumnKind::Numerical => ColumnData::Numerical(vec![None; n]),
        }
    }

    /// Take `rows`, where `None` yields a null cell.
    fn take_optional(&self, rows: &[Option<usize>]) -> ColumnData {
        match self {
            ColumnData::Categorical(v) => ColumnData::Categorical(
                rows.iter().map(|r| r.and_then(|r| v[r].clone())).collect(),
            ),
            ColumnData::Numerical(v) => {
                ColumnData::Numerical(rows.iter().map(|r| r.and_then(|r| v[r])).collect())
            }
        }
    }
}

pub fn format_number(x: f64) -> String {
    format!("{x}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
    pub row_count: usize,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Self {
        let row_count = columns.first().map_or(0, |c| c.data.len());
        debug_assert!(columns.iter().all(|c| c.data.len() == row_count));
        Table {
            name: name.into(),
            columns,
            row_count,
        }
    }

    /// An empty table with the columns of `spec`.
    pub fn empty(spec: &crate::schema::TableSpec) -> Self {
        Table {
            name: spec.name.clone(),
            columns: spec
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    data: ColumnData::nulls(c.kind, 0),
                })
                .collect(),
            row_count: 0,
        }
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Column, DataError> {
        self.column(name).ok_or_else(|| DataError::MissingColumn {
            table: self.name.clone(),
            column: name.to_string(),
        })
    }

    /// Key tuple of `row` over `columns`, `None` when any part is null.
    pub fn key_tuple(&self, row: usize, columns: &[&Column]) -> Option<Vec<String>> {
        columns.iter().map(|c| c.data.text(row)).collect()
    }

    pub fn key_tuples(&self, names: &[&str]) -> Result<Vec<Option<Vec<String>>>, DataError> {
        let cols = names
            .iter()
            .map(|n| self.require(n))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((0..self.row_count).map(|r| self.key_tuple(r, &cols)).collect())
    }

    pub fn take_rows(&self, rows: &[usize]) -> Table {
        Table {
            name: self.name.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    data: c.data.take(rows),
                })
                .collect(),
            row_count: rows.len(),
        }
    }

    pub fn project(&self, names: &[&str]) -> Result<Table, DataError> {
        let columns = names
            .iter()
            .map(|n| self.require(n).cloned())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Table {
            name: self.name.clone(),
            columns,
            row_count: self.row_count,
        })
    }
}

/// A database: one table per schema table, in schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct Database {
    pub schema: Arc<SchemaGraph>,
    pub tables: Vec<Table>,
}

impl Database {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.schema.table_index(name).map(|i| &self.tables[i])
    }

    /// Child rows whose FK tuple is absent from the parent key set.
    pub fn integrity_violations(&self) -> Vec<FkViolation> {
        let mut out = Vec::new();
        for (fk_index, fk) in self.schema.fks.iter().enumerate() {
            let parent_keys: HashSet<Vec<String>> = self.tables[fk.parent]
                .key_tuples(&fk.parent_columns())
                .unwrap_or_default()
                .into_iter()
                .flatten()
                .collect();
            let child = &self.tables[fk.child];
            for (row, key) in child
                .key_tuples(&fk.child_columns())
                .unwrap_or_default()
                .into_iter()
                .enumerate()
            {
                if let Some(key) = key {
                    if !parent_keys.contains(&key) {
                        out.push(FkViolation {
                            fk: fk_index,
                            child_table: fk.child_table.clone(),
                            parent_table: fk.parent_table.clone(),
                            row,
                            key,
                        });
                    }
                }
            }
        }
        out
    }
}

/// Load one `<table>.csv` per schema table from `dir`.
///
/// Returns the database and the FK violations that were nulled out (always
/// empty under [`FkPolicy::Reject`], which errors instead).
pub fn load_database(
    dir: &Path,
    schema: &SchemaGraph,
    policy: FkPolicy,
) -> Result<(Database, Vec<FkViolation>), DataError> {
    let mut tables = Vec::with_capacity(schema.len());
    for spec in &schema.tables {
        let path = dir.join(format!("{}.csv", spec.name));
        if !path.exists() {
            return Err(DataError::MissingFile(path));
        }
        tables.push(read_table(&path, spec)?);
    }
    let mut db = Database {
        schema: Arc::new(schema.clone()),
        tables,
    };
    for t in &db.tables {
        let spec = &schema.tables[schema.table_index(&t.name).unwrap_or_default()];
        if !spec.primary_key.is_empty() {
            let pk: Vec<&str> = spec.primary_key.iter().map(String::as_str).collect();
            check_unique(t, &pk)?;
        }
    }
    let violations = db.integrity_violations();
    if violations.is_empty() {
        return Ok((db, violations));
    }
    match policy {
        FkPolicy::Reject => Err(DataError::ForeignKeyViolation(violations)),
        FkPolicy::NullOut => {
            for v in &violations {
                let fk = &schema.fks[v.fk];
                null_out(&mut db.tables[fk.child], fk, v.row);
            }
            Ok((db, violations))
        }
    }
}

fn null_out(table: &mut Table, fk: &ForeignKeySpec, row: usize) {
    for (cc, _) in &fk.column_pairs {
        if let Some(col) = table.columns.iter_mut().find(|c| &c.name == cc) {
            match &mut col.data {
                ColumnData::Categorical(v) => v[row] = None,
                ColumnData::Numerical(v) => v[row] = None,
            }
        }
    }
}

fn check_unique(t: &Table, key: &[&str]) -> Result<(), DataError> {
    let mut seen = HashSet::with_capacity(t.row_count);
    for k in t.key_tuples(key)?.into_iter().flatten() {
        if !seen.insert(k.clone()) {
            return Err(DataError::DuplicateKey {
                table: t.name.clone(),
                key: k,
            });
        }
    }
    Ok(())
}

fn read_table(path: &Path, spec: &crate::schema::TableSpec) -> Result<Table, DataError> {
    let csv_err = |source| DataError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let mut positions = Vec::with_capacity(spec.columns.len());
    for c in &spec.columns {
        let pos = headers
            .iter()
            .position(|h| h == c.name)
            .ok_or_else(|| DataError::MissingColumn {
                table: spec.name.clone(),
                column: c.name.clone(),
            })?;
        positions.push(pos);
    }
    let mut data: Vec<ColumnData> = spec
        .columns
        .iter()
        .map(|c| ColumnData::nulls(c.kind, 0))
        .collect();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        for ((c, &pos), column) in spec.columns.iter().zip(&positions).zip(data.iter_mut()) {
            let token = record.get(pos).unwrap_or("");
            if token.is_empty() && !c.nullable {
                return Err(DataError::UnexpectedNull {
                    table: spec.name.clone(),
                    row,
                    column: c.name.clone(),
                });
            }
            match column {
                ColumnData::Categorical(v) => {
                    v.push((!token.is_empty()).then(|| token.to_string()));
                }
                ColumnData::Numerical(v) => {
                    if token.is_empty() {
                        v.push(None);
                    } else {
                        let x = token.trim().parse::<f64>().ok().filter(|x| x.is_finite());
                        let x = x.ok_or_else(|| DataError::Coercion {
                            table: spec.name.clone(),
                            row,
                            column: c.name.clone(),
                            token: token.to_string(),
                        })?;
                        v.push(Some(x));
                    }
                }
            }
        }
    }
    let columns = spec
        .columns
        .iter()
        .zip(data)
        .map(|(c, data)| Column {
            name: c.name.clone(),
            data,
        })
        .collect();
    Ok(Table::new(spec.name.clone(), columns))
}

/// Write every table as `<dir>/<table>.csv`.
pub fn write_database(db: &Database, dir: &Path) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(|source| DataError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for t in &db.tables {
        write_table(t, &dir.join(format!("{}.csv", t.name)))?;
    }
    Ok(())
}

pub fn write_table(t: &Table, path: &Path) -> Result<(), DataError> {
    let csv_err = |source| DataError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(t.columns.iter().map(|c| c.name.as_str()))
        .map_err(csv_err)?;
    for r in 0..t.row_count {
        w.write_record(t.columns.iter().map(|c| c.data.text(r).unwrap_or_default()))
            .map_err(csv_err)?;
    }
    w.flush().map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Left join `parent` onto `child` through `fk`, appending parent columns
/// (except the referenced key columns) named `<prefix><column>`.
pub fn left_join(
    child: &Table,
    parent: &Table,
    fk: &ForeignKeySpec,
    prefix: &str,
) -> Result<Table, DataError> {
    let index = unique_index(parent, &fk.parent_columns())?;
    let matches: Vec<Option<usize>> = child
        .key_tuples(&fk.child_columns())?
        .into_iter()
        .map(|k| k.and_then(|k| index.get(&k).copied()))
        .collect();
    let referenced: HashSet<&str> = fk.parent_columns().into_iter().collect();
    let mut columns = child.columns.clone();
    for c in &parent.columns {
        if referenced.contains(c.name.as_str()) {
            continue;
        }
        columns.push(Column {
            name: format!("{prefix}{}", c.name),
            data: c.data.take_optional(&matches),
        });
    }
    Ok(Table {
        name: child.name.clone(),
        columns,
        row_count: child.row_count,
    })
}

/// Map from key tuple to row; errors when a key repeats.
pub fn unique_index(
    table: &Table,
    key_columns: &[&str],
) -> Result<HashMap<Vec<String>, usize>, DataError> {
    let mut index = HashMap::with_capacity(table.row_count);
    for (row, key) in table.key_tuples(key_columns)?.into_iter().enumerate() {
        if let Some(key) = key {
            if index.insert(key.clone(), row).is_some() {
                return Err(DataError::DuplicateKey {
                    table: table.name.clone(),
                    key,
                });
            }
        }
    }
    Ok(index)
}

/// Rows sharing one key value; null key parts stay `None`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub key: Vec<Option<String>>,
    pub rows: Vec<usize>,
}

/// Groups in order of first occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Grouping {
    pub groups: Vec<Group>,
}

impl Grouping {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn get(&self, key: &[Option<String>]) -> Option<&[usize]> {
        self.groups
            .iter()
            .find(|g| g.key == key)
            .map(|g| g.rows.as_slice())
    }

    pub fn as_map(&self) -> BTreeMap<Vec<Option<String>>, Vec<usize>> {
        self.groups
            .iter()
            .map(|g| (g.key.clone(), g.rows.clone()))
            .collect()
    }
}

pub fn group_by_key(table: &Table, key_columns: &[&str]) -> Result<Grouping, DataError> {
    let cols = key_columns
        .iter()
        .map(|n| table.require(n))
        .collect::<Result<Vec<_>, _>>()?;
    let mut slots: HashMap<Vec<Option<String>>, usize> = HashMap::new();
    let mut groups: Vec<Group> = Vec::new();
    for row in 0..table.row_count {
        let key: Vec<Option<String>> = cols.iter().map(|c| c.data.text(row)).collect();
        match slots.get(&key) {
            Some(&g) => groups[g].rows.push(row),
            None => {
                slots.insert(key.clone(), groups.len());
                groups.push(Group {
                    key,
                    rows: vec![row],
                });
            }
        }
    }
    Ok(Grouping { groups })
}
