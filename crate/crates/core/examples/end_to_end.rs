//! Fit on the demo database, save and reload the bundle, generate at two
//! scales, and evaluate.
//!
//!     cargo run --release --example end_to_end [-- --fast]

use relsynth::fixture::{demo_database, DemoSize, DEMO_ORDER};
use relsynth::metrics::{evaluate, EvaluateOptions};
use relsynth::pipeline::{fit_database, generate_database, load_bundle, save_bundle, PipelineConfig};
use std::time::Instant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fast = std::env::args().any(|a| a == "--fast");
    let real = demo_database(DemoSize::default(), 42);
    let order = real.schema.order_from_names(&DEMO_ORDER)?;
    let config = if fast { PipelineConfig::fast() } else { PipelineConfig::default() };
    let start = Instant::now();
    let bundle = fit_database(&real, &order, &config)?;
    println!("fit in {:.1?}", start.elapsed());

    let dir = tempfile::tempdir()?;
    save_bundle(&bundle, dir.path())?;
    let bundle = load_bundle(dir.path())?;

    for scale in [1.0, 2.0] {
        let synth = generate_database(&bundle, scale, 7)?;
        let sizes: Vec<String> = synth.tables.iter().map(|t| format!("{}={}", t.name, t.row_count)).collect();
        println!("scale {scale}: {} (FK violations: {})", sizes.join(" "), synth.integrity_violations().len());
    }
    let synth = generate_database(&bundle, 1.0, 7)?;
    let report = evaluate(&real, &synth, &EvaluateOptions::default())?;
    for (metric, v) in &report.per_metric {
        println!("  {metric:<5} {v:.3}");
    }
    println!("  aggregate {:?}", report.aggregate);
    Ok(())
}
