//! Write the seeded demo database and its schema to a directory.
//!
//!     cargo run --example demo_data -- /tmp/demo

use relsynth::data::write_database;
use relsynth::fixture::{demo_database, DemoSize, DEMO_SCHEMA};
use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "demo".into()));
    let db = demo_database(DemoSize::default(), 42);
    write_database(&db, &dir.join("data"))?;
    std::fs::write(dir.join("schema.json"), DEMO_SCHEMA)?;
    for t in &db.tables {
        println!("{:<16} {:>5} rows", t.name, t.row_count);
    }
    println!("schema and CSVs written under {}", dir.display());
    Ok(())
}
