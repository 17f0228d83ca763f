//! Rewrite a table with `f > 2` foreign keys as a chain of `f - 1` tables
//! with two foreign keys each: stage `s` links the distinct key prefixes of
//! stage `s - 1` (or the first parent) with parent `s + 1`.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

/// Key tuple of one foreign key.
pub type Key = Vec<String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StageLeft {
    /// Rows of the parent referenced by this FK.
    Parent(usize),
    /// Rows of an earlier stage.
    Stage(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSpec {
    pub left: StageLeft,
    /// FK whose parent supplies the right-hand rows.
    pub right: usize,
    /// Number of leading FKs whose keys the stage's rows carry.
    pub prefix_len: usize,
}

/// Stage chain for a table whose FKs are `fks` (in declaration order).
/// Two FKs give a single stage, i.e. no restructuring.
pub fn restructure_multi_fk(fks: &[usize]) -> Vec<StageSpec> {
    if fks.len() < 2 {
        return Vec::new();
    }
    (1..fks.len())
        .map(|s| StageSpec {
            left: if s == 1 {
                StageLeft::Parent(fks[0])
            } else {
                StageLeft::Stage(s - 2)
            },
            right: fks[s],
            prefix_len: s + 1,
        })
        .collect()
}

/// Rows of one stage: distinct key prefixes, the left row each extends, and
/// how many child rows share the prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageTable {
    pub prefixes: Vec<Vec<Key>>,
    /// Index into the previous stage's `prefixes`; for the first stage the
    /// first FK's key is the left identity and this is unused (`usize::MAX`).
    pub left_ids: Vec<usize>,
    pub counts: Vec<u64>,
}

/// Materialise every stage from child rows given as one key per FK.
pub fn stage_tables(rows: &[Vec<Key>], stages: &[StageSpec]) -> Vec<StageTable> {
    let mut out: Vec<StageTable> = Vec::with_capacity(stages.len());
    for spec in stages {
        let mut index: HashMap<&[Key], usize> = HashMap::new();
        let mut table = StageTable {
            prefixes: Vec::new(),
            left_ids: Vec::new(),
            counts: Vec::new(),
        };
        let prev: Option<HashMap<&[Key], usize>> = out.last().map(|p| {
            p.prefixes
                .iter()
                .enumerate()
                .map(|(k, pre)| (pre.as_slice(), k))
                .collect()
        });
        for row in rows {
            let prefix = &row[..spec.prefix_len];
            match index.get(prefix) {
                Some(&k) => table.counts[k] += 1,
                None => {
                    index.insert(prefix, table.prefixes.len());
                    table.prefixes.push(prefix.to_vec());
                    table.counts.push(1);
                    table.left_ids.push(
                        prev.as_ref()
                            .map_or(usize::MAX, |p| p[&prefix[..spec.prefix_len - 1]]),
                    );
                }
            }
        }
        out.push(table);
    }
    out
}

/// Distinct FK tuples described by the last stage, followed back through
/// the chain of left ids.
pub fn reconstruct(tables: &[StageTable]) -> BTreeSet<Vec<Key>> {
    let Some(last) = tables.last() else {
        return BTreeSet::new();
    };
    (0..last.prefixes.len())
        .map(|mut k| {
            let mut rev: Vec<Key> = Vec::new();
            for (s, t) in tables.iter().enumerate().rev() {
                let p = &t.prefixes[k];
                rev.push(p[p.len() - 1].clone());
                if s == 0 {
                    rev.push(p[0].clone());
                } else {
                    k = t.left_ids[k];
                }
            }
            rev.reverse();
            rev
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn stage_counts() {
        assert!(restructure_multi_fk(&[0]).is_empty());
        assert_eq!(restructure_multi_fk(&[4, 7]).len(), 1);
        assert_eq!(restructure_multi_fk(&[0, 1, 2]).len(), 2);
        assert_eq!(restructure_multi_fk(&[0, 1, 2, 3, 4]).len(), 4);
    }

    #[test]
    fn two_fks_is_identity() {
        let st = restructure_multi_fk(&[3, 5]);
        assert_eq!(
            st,
            vec![StageSpec {
                left: StageLeft::Parent(3),
                right: 5,
                prefix_len: 2
            }]
        );
    }

    #[test]
    fn chain_links_previous_stage() {
        let st = restructure_multi_fk(&[0, 1, 2, 3]);
        assert_eq!(st[1].left, StageLeft::Stage(0));
        assert_eq!(st[2].left, StageLeft::Stage(1));
        assert_eq!(st.iter().map(|s| s.right).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    fn k(v: u8) -> Key {
        vec![v.to_string()]
    }

    proptest! {
        #[test]
        fn reconstruction_is_exact(
            f in 3usize..6,
            raw in proptest::collection::vec(proptest::collection::vec(0u8..4, 5), 1..40),
        ) {
            let rows: Vec<Vec<Key>> = raw.iter().map(|r| r[..f].iter().map(|&v| k(v)).collect()).collect();
            let stages = restructure_multi_fk(&(0..f).collect::<Vec<_>>());
            prop_assert_eq!(stages.len(), f - 1);
            let tables = stage_tables(&rows, &stages);
            let expected: BTreeSet<Vec<Key>> = rows.iter().cloned().collect();
            prop_assert_eq!(reconstruct(&tables), expected);
            prop_assert_eq!(tables.last().unwrap().counts.iter().sum::<u64>(), rows.len() as u64);
        }
    }
}
