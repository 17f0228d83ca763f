//! Parse the demo schema, list its valid generation orders and show which
//! tables can influence which under one order.
//!
//!     cargo run --example schema_orders

use relsynth::fixture::{demo_schema, DEMO_ORDER};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = demo_schema();
    for fk in &schema.fks {
        println!("fk {:<28} -> {}", fk.label(), fk.parent_table);
    }
    println!("\nvalid orders:");
    for order in schema.enumerate_topological_orders(100) {
        println!("  {}", order.names(&schema).join(" -> "));
    }
    let order = schema.order_from_names(&DEMO_ORDER)?;
    println!("\nunder {}:", DEMO_ORDER.join(", "));
    for j in order.sequence() {
        let affecting: Vec<&str> = order
            .sequence()
            .iter()
            .filter(|&&i| i != *j && schema.affects(i, *j, &order))
            .map(|&i| schema.tables[i].name.as_str())
            .collect();
        println!("  {:<16} is affected by {:?}", schema.tables[*j].name, affecting);
    }
    match schema.order_from_names(&["user_activities", "users", "activities", "surveys"]) {
        Err(e) => println!("\nrejected: {e}"),
        Ok(_) => unreachable!("child before parent"),
    }
    Ok(())
}
