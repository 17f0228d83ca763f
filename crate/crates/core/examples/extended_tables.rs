//! Build the extended table of every demo table and print the provenance of
//! its known and unknown parts.
//!
//!     cargo run --example extended_tables

use relsynth::encoding::fit_codec;
use relsynth::fixture::{demo_database, DemoSize, DEMO_ORDER};
use relsynth::variants::{build_extended, split_known_unknown, VariantOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let db = demo_database(DemoSize { users: 50, activities: 8 }, 2);
    let schema = &db.schema;
    let order = schema.order_from_names(&DEMO_ORDER)?;
    let codecs = (0..schema.len())
        .map(|i| {
            let keys = schema.key_columns(i);
            let cols: Vec<&str> = schema.tables[i]
                .columns
                .iter()
                .map(|c| c.name.as_str())
                .filter(|c| !keys.contains(*c))
                .collect();
            fit_codec(&db.tables[i].project(&cols)?, 3, 0).map_err(Into::into)
        })
        .collect::<Result<Vec<_>, Box<dyn std::error::Error>>>()?;
    for &i in order.sequence() {
        let ext = build_extended(&db, schema, &codecs, i, &order, VariantOptions::default())?;
        let split = split_known_unknown(&ext, schema);
        println!("{} ({} rows, width {})", schema.tables[i].name, ext.rows(), ext.frame.values.ncols());
        println!("  unknown: {:?}", split.unknown_columns);
        println!("  known:   {:?}", split.known_columns);
    }
    Ok(())
}
