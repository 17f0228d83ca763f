//! Relational schema graph: tables, typed columns, foreign keys, and the
//! two partial orders over tables that drive the generation order.
//!
//! Tables are addressed by their index in [`SchemaGraph::tables`]. A
//! [`TableOrder`] is a permutation of those indices in which every parent
//! precedes its children.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SchemaError {
    #[error("schema document could not be parsed: {0}")]
    Parse(String),
    #[error("foreign keys form a cycle through tables {0:?}")]
    CyclicSchema(Vec<String>),
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("unknown column `{column}` in table `{table}`")]
    UnknownColumn { table: String, column: String },
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("foreign key {child}({child_column}) -> {parent}({parent_column}) pairs a {child_kind:?} column with a {parent_kind:?} column")]
    KindMismatch {
        child: String,
        child_column: String,
        parent: String,
        parent_column: String,
        child_kind: ColumnKind,
        parent_kind: ColumnKind,
    },
    #[error("foreign key from `{child}` must reference the full primary key of `{parent}`")]
    NotPrimaryKey { child: String, parent: String },
    #[error("table `{0}` references itself")]
    SelfReference(String),
    #[error("foreign key from `{0}` has no column pairs")]
    EmptyForeignKey(String),
    #[error("invalid order: {0}")]
    InvalidOrder(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Categorical,
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default)]
    pub nullable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSpec {
    pub name: String,
    pub columns: Vec<ColumnSpec>,
    #[serde(default)]
    pub primary_key: Vec<String>,
}

impl TableSpec {
    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }
}

/// One foreign-key constraint, child columns paired with parent columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForeignKeySpec {
    pub child_table: String,
    pub parent_table: String,
    pub column_pairs: Vec<(String, String)>,
    pub child: usize,
    pub parent: usize,
}

impl ForeignKeySpec {
    pub fn child_columns(&self) -> Vec<&str> {
        self.column_pairs.iter().map(|(c, _)| c.as_str()).collect()
    }

    pub fn parent_columns(&self) -> Vec<&str> {
        self.column_pairs.iter().map(|(_, p)| p.as_str()).collect()
    }

    /// Short label used in provenance paths, e.g. `surveys(user_id)`.
    pub fn label(&self) -> String {
        format!("{}({})", self.child_table, self.child_columns().join(","))
    }
}

// On-disk layout of the schema document.
#[derive(Debug, Deserialize, Serialize)]
struct SchemaDoc {
    tables: Vec<TableDoc>,
}

#[derive(Debug, Deserialize, Serialize)]
struct TableDoc {
    name: String,
    columns: Vec<ColumnSpec>,
    #[serde(default)]
    primary_key: Vec<String>,
    #[serde(default)]
    foreign_keys: Vec<ForeignKeyDoc>,
}

#[derive(Debug, Deserialize, Serialize)]
struct ForeignKeyDoc {
    columns: Vec<String>,
    parent: String,
    parent_columns: Vec<String>,
}

/// Validated schema with its foreign-key DAG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaGraph {
    pub tables: Vec<TableSpec>,
    pub fks: Vec<ForeignKeySpec>,
    /// `adjacency[p]` holds the children of table `p` (one entry per child table,
    /// however many constraints link the pair).
    pub adjacency: Vec<BTreeSet<usize>>,
}

/// Parse a schema document (JSON, or YAML when it is not JSON).
pub fn parse_schema(document: &str) -> Result<SchemaGraph, SchemaError> {
    let doc: SchemaDoc = match serde_json::from_str(document) {
        Ok(doc) => doc,
        Err(json_err) => serde_yaml::from_str(document).map_err(|yaml_err| {
            SchemaError::Parse(format!("not JSON ({json_err}) nor YAML ({yaml_err})"))
        })?,
    };
    let mut tables = Vec::with_capacity(doc.tables.len());
    let mut fk_docs = Vec::new();
    for t in doc.tables {
        fk_docs.push((t.name.clone(), t.foreign_keys));
        tables.push(TableSpec {
            name: t.name,
            columns: t.columns,
            primary_key: t.primary_key,
        });
    }
    let mut fks = Vec::new();
    for (child, docs) in fk_docs {
        for fk in docs {
            if fk.columns.len() != fk.parent_columns.len() {
                return Err(SchemaError::Parse(format!(
                    "foreign key of `{child}` pairs {} columns with {}",
                    fk.columns.len(),
                    fk.parent_columns.len()
                )));
            }
            fks.push((
                child.clone(),
                fk.parent,
                fk.columns.into_iter().zip(fk.parent_columns).collect(),
            ));
        }
    }
    SchemaGraph::new(tables, fks)
}

impl SchemaGraph {
    /// Build and validate a graph from table specs and `(child, parent, pairs)` triples.
    pub fn new(
        tables: Vec<TableSpec>,
        fks: Vec<(String, String, Vec<(String, String)>)>,
    ) -> Result<Self, SchemaError> {
        let mut index = BTreeMap::new();
        for (i, t) in tables.iter().enumerate() {
            if index.insert(t.name.clone(), i).is_some() {
                return Err(SchemaError::DuplicateName(t.name.clone()));
            }
            let mut seen = BTreeSet::new();
            for c in &t.columns {
                if !seen.insert(c.name.as_str()) {
                    return Err(SchemaError::DuplicateName(format!("{}.{}", t.name, c.name)));
                }
            }
            for k in &t.primary_key {
                if t.column(k).is_none() {
                    return Err(SchemaError::UnknownColumn {
                        table: t.name.clone(),
                        column: k.clone(),
                    });
                }
            }
        }
        let mut specs = Vec::with_capacity(fks.len());
        for (child_name, parent_name, pairs) in fks {
            let child = *index
                .get(&child_name)
                .ok_or_else(|| SchemaError::UnknownTable(child_name.clone()))?;
            let parent = *index
                .get(&parent_name)
                .ok_or_else(|| SchemaError::UnknownTable(parent_name.clone()))?;
            if child == parent {
                return Err(SchemaError::SelfReference(child_name));
            }
            if pairs.is_empty() {
                return Err(SchemaError::EmptyForeignKey(child_name));
            }
            let (ct, pt) = (&tables[child], &tables[parent]);
            for (cc, pc) in &pairs {
                let ccol = ct.column(cc).ok_or_else(|| SchemaError::UnknownColumn {
                    table: ct.name.clone(),
                    column: cc.clone(),
                })?;
                let pcol = pt.column(pc).ok_or_else(|| SchemaError::UnknownColumn {
                    table: pt.name.clone(),
                    column: pc.clone(),
                })?;
                if ccol.kind != pcol.kind {
                    return Err(SchemaError::KindMismatch {
                        child: ct.name.clone(),
                        child_column: cc.clone(),
                        parent: pt.name.clone(),
                        parent_column: pc.clone(),
                        child_kind: ccol.kind,
                        parent_kind: pcol.kind,
                    });
                }
            }
            let referenced: BTreeSet<&str> = pairs.iter().map(|(_, p)| p.as_str()).collect();
            let pk: BTreeSet<&str> = pt.primary_key.iter().map(String::as_str).collect();
            if referenced != pk || referenced.len() != pairs.len() {
                return Err(SchemaError::NotPrimaryKey {
                    child: ct.name.clone(),
                    parent: pt.name.clone(),
                });
            }
            specs.push(ForeignKeySpec {
                child_table: child_name,
                parent_table: parent_name,
                column_pairs: pairs,
                child,
                parent,
            });
        }
        let mut adjacency = vec![BTreeSet::new(); tables.len()];
        for fk in &specs {
            adjacency[fk.parent].insert(fk.child);
        }
        let graph = SchemaGraph {
            tables,
            fks: specs,
            adjacency,
        };
        if let Some(cycle) = graph.find_cycle() {
            return Err(SchemaError::CyclicSchema(
                cycle.into_iter().map(|i| graph.tables[i].name.clone()).collect(),
            ));
        }
        Ok(graph)
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn table_index(&self, name: &str) -> Option<usize> {
        self.tables.iter().position(|t| t.name == name)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(BTreeSet::len).sum()
    }

    /// Foreign keys declared on table `i` (its Φ set).
    pub fn fks_of(&self, i: usize) -> impl Iterator<Item = (usize, &ForeignKeySpec)> {
        self.fks.iter().enumerate().filter(move |(_, f)| f.child == i)
    }

    /// Foreign keys whose parent is table `i`.
    pub fn fks_into(&self, i: usize) -> impl Iterator<Item = (usize, &ForeignKeySpec)> {
        self.fks.iter().enumerate().filter(move |(_, f)| f.parent == i)
    }

    pub fn parents(&self, i: usize) -> BTreeSet<usize> {
        self.fks_of(i).map(|(_, f)| f.parent).collect()
    }

    /// Columns of table `i` taking part in any of its own foreign keys.
    pub fn fk_columns(&self, i: usize) -> BTreeSet<String> {
        self.fks_of(i)
            .flat_map(|(_, f)| f.column_pairs.iter().map(|(c, _)| c.clone()))
            .collect()
    }

    /// Columns carried as raw keys rather than modelled: primary key and FK columns.
    pub fn key_columns(&self, i: usize) -> BTreeSet<String> {
        let mut keys = self.fk_columns(i);
        keys.extend(self.tables[i].primary_key.iter().cloned());
        keys
    }

    fn find_cycle(&self) -> Option<Vec<usize>> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let n = self.tables.len();
        let mut state = vec![0u8; n];
        let mut stack: Vec<usize> = Vec::new();
        fn visit(
            g: &SchemaGraph,
            v: usize,
            state: &mut [u8],
            stack: &mut Vec<usize>,
        ) -> Option<Vec<usize>> {
            state[v] = 1;
            stack.push(v);
            for &c in &g.adjacency[v] {
                if state[c] == 1 {
                    let start = stack.iter().position(|&x| x == c).unwrap_or(0);
                    return Some(stack[start..].to_vec());
                }
                if state[c] == 0 {
                    if let Some(cycle) = visit(g, c, state, stack) {
                        return Some(cycle);
                    }
                }
            }
            stack.pop();
            state[v] = 2;
            None
        }
        for v in 0..n {
            if state[v] == 0 {
                if let Some(c) = visit(self, v, &mut state, &mut stack) {
                    return Some(c);
                }
            }
        }
        None
    }

    /// Ascend-or-equal: `i == j` or `i` is an ancestor of `j` through FK parent chains.
    pub fn ascends_or_equal(&self, i: usize, j: usize) -> bool {
        if i == j {
            return true;
        }
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::from([i]);
        while let Some(v) = queue.pop_front() {
            for &c in &self.adjacency[v] {
                if c == j {
                    return true;
                }
                if !seen[c] {
                    seen[c] = true;
                    queue.push_back(c);
                }
            }
        }
        false
    }

    /// Strict ascend: `i` is a proper ancestor of `j`.
    pub fn ascends(&self, i: usize, j: usize) -> bool {
        i != j && self.ascends_or_equal(i, j)
    }

    /// Affect-or-equal under `order`: `i` sits no later than `j` and both are
    /// connected, ignoring edge direction, in the subgraph on the order prefix
    /// ending at `j`.
    pub fn affects_or_equal(&self, i: usize, j: usize, order: &TableOrder) -> bool {
        order.position(i) <= order.position(j) && self.is_connected_in_prefix(i, j, order)
    }

    /// Strict affect: affect-or-equal with `i != j`.
    pub fn affects(&self, i: usize, j: usize, order: &TableOrder) -> bool {
        i != j && self.affects_or_equal(i, j, order)
    }

    /// Whether `i` and `j` are connected (undirected) in the subgraph induced by
    /// the tables at order positions `0..=max(pos(i), pos(j))`.
    pub fn is_connected_in_prefix(&self, i: usize, j: usize, order: &TableOrder) -> bool {
        if i == j {
            return true;
        }
        let limit = order.position(i).max(order.position(j));
        let inside = |t: usize| order.position(t) <= limit;
        let mut seen = vec![false; self.len()];
        seen[i] = true;
        let mut queue = VecDeque::from([i]);
        while let Some(v) = queue.pop_front() {
            let neighbours = self
                .fks
                .iter()
                .filter_map(|f| match (f.child == v, f.parent == v) {
                    (true, _) => Some(f.parent),
                    (_, true) => Some(f.child),
                    _ => None,
                });
            for w in neighbours {
                if !seen[w] && inside(w) {
                    if w == j {
                        return true;
                    }
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        false
    }

    /// All topological orders, at most `cap`, enumerated depth-first choosing
    /// available tables in lexicographic name order.
    pub fn enumerate_topological_orders(&self, cap: usize) -> Vec<TableOrder> {
        let n = self.len();
        let mut indegree = vec![0usize; n];
        for children in &self.adjacency {
            for &c in children {
                indegree[c] += 1;
            }
        }
        let mut by_name: Vec<usize> = (0..n).collect();
        by_name.sort_by(|&a, &b| self.tables[a].name.cmp(&self.tables[b].name));

        let mut out = Vec::new();
        let mut current = Vec::with_capacity(n);
        let mut used = vec![false; n];
        self.enumerate_rec(&by_name, &mut indegree, &mut used, &mut current, &mut out, cap);
        out
    }

    fn enumerate_rec(
        &self,
        by_name: &[usize],
        indegree: &mut [usize],
        used: &mut [bool],
        current: &mut Vec<usize>,
        out: &mut Vec<TableOrder>,
        cap: usize,
    ) {
        if out.len() >= cap {
            return;
        }
        if current.len() == by_name.len() {
            out.push(TableOrder::from_sequence(current.clone()));
            return;
        }
        for &t in by_name {
            if used[t] || indegree[t] != 0 {
                continue;
            }
            used[t] = true;
            current.push(t);
            for &c in &self.adjacency[t] {
                indegree[c] -= 1;
            }
            self.enumerate_rec(by_name, indegree, used, current, out, cap);
            for &c in &self.adjacency[t] {
                indegree[c] += 1;
            }
            current.pop();
            used[t] = false;
            if out.len() >= cap {
                return;
            }
        }
    }

    /// First order of the enumeration.
    pub fn default_order(&self) -> TableOrder {
        self.enumerate_topological_orders(1)
            .pop()
            .unwrap_or_else(|| TableOrder::from_sequence(Vec::new()))
    }

    /// Build an order from table names, validating it against the graph.
    pub fn order_from_names<S: AsRef<str>>(&self, names: &[S]) -> Result<TableOrder, SchemaError> {
        let seq = names
            .iter()
            .map(|n| {
                self.table_index(n.as_ref())
                    .ok_or_else(|| SchemaError::UnknownTable(n.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let order = TableOrder::from_sequence(seq);
        order.validate(self)?;
        Ok(order)
    }
}

/// A generation order: a permutation of table indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<usize>", into = "Vec<usize>")]
pub struct TableOrder {
    sequence: Vec<usize>,
    positions: Vec<usize>,
}

impl From<Vec<usize>> for TableOrder {
    fn from(sequence: Vec<usize>) -> Self {
        TableOrder::from_sequence(sequence)
    }
}

impl From<TableOrder> for Vec<usize> {
    fn from(order: TableOrder) -> Self {
        order.sequence
    }
}

impl TableOrder {
    pub fn from_sequence(sequence: Vec<usize>) -> Self {
        let n = sequence.iter().copied().max().map_or(0, |m| m + 1).max(sequence.len());
        let mut positions = vec![usize::MAX; n];
        for (p, &t) in sequence.iter().enumerate() {
            positions[t] = p;
        }
        TableOrder {
            sequence,
            positions,
        }
    }

    pub fn sequence(&self) -> &[usize] {
        &self.sequence
    }

    /// Position of table `t` in the order; `usize::MAX` when absent.
    pub fn position(&self, t: usize) -> usize {
        self.positions.get(t).copied().unwrap_or(usize::MAX)
    }

    pub fn names<'a>(&self, g: &'a SchemaGraph) -> Vec<&'a str> {
        self.sequence.iter().map(|&i| g.tables[i].name.as_str()).collect()
    }

    /// Check the order is a permutation of the tables with parents first.
    pub fn validate(&self, g: &SchemaGraph) -> Result<(), SchemaError> {
        let n = g.len();
        let distinct: BTreeSet<usize> = self.sequence.iter().copied().collect();
        if self.sequence.len() != n || distinct.len() != n || distinct.iter().any(|&t| t >= n) {
            return Err(SchemaError::InvalidOrder(format!(
                "expected a permutation of {n} tables, got {:?}",
                self.sequence
            )));
        }
        for fk in &g.fks {
            if self.position(fk.parent) > self.position(fk.child) {
                return Err(SchemaError::InvalidOrder(format!(
                    "`{}` is placed before its parent `{}`",
                    fk.child_table, fk.parent_table
                )));
            }
        }
        Ok(())
    }
}
