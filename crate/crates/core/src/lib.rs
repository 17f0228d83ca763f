//! Synthetic relational databases, generated one table at a time.
//!
//! Tables are visited in a topological order of the foreign-key graph. For
//! every table the library builds an *extended* table holding the table's own
//! columns plus the joined and aggregated context of every earlier table that
//! can influence it, learns how many child rows each context row produces
//! (its *degree*), and trains a conditional generator for the non-key
//! columns given that context. Generation replays the same steps against the
//! tables synthesised so far, so foreign keys always point at existing rows.
//!
//! | module | role |
//! |---|---|
//! | [`schema`] | schema parsing, FK graph, partial orders, order enumeration |
//! | [`data`] | columnar tables, CSV I/O, left join, group-by |
//! | [`encoding`] | one-hot and mode-specific column codecs, group means |
//! | [`variants`] | extended tables, known/unknown split, potential contexts, degrees |
//! | [`degree`] | degree regression, rounding, two-FK matching, multi-FK restructuring |
//! | [`generator`] | conditional generator and its losses |
//! | [`metrics`] | statistical, classifier, size and rule scores; normalisation |
//! | [`pipeline`] | fit / generate orchestration and model bundles |

pub mod data;
pub mod degree;
pub mod encoding;
pub mod fixture;
pub mod generator;
pub mod linear;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod schema;
pub mod variants;
