//! Learn per-user survey counts from user context and round predicted
//! degrees so the generated table size stays within 5% of the target.
//!
//!     cargo run --example degree_rounding

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relsynth::degree::{fit_degree_regressor, round_degrees, sum_bounds, RegressorConfig};
use relsynth::pipeline::{fit_database, PipelineConfig};
use relsynth::fixture::{demo_database, DemoSize, DEMO_ORDER};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // rounding alone
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let d = [0.4, 1.6, 2.2, 0.9, 3.7];
    let total = 9.0;
    let r = round_degrees(&d, total, 0.05, &mut rng);
    println!("{d:?} -> {r:?} (sum {}, allowed {:?})", r.iter().sum::<u64>(), sum_bounds(total, 0.05));

    // a regressor on a toy design
    let x = ndarray::Array2::from_shape_fn((6, 1), |(i, _)| i as f64);
    let y = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
    let reg = fit_degree_regressor(x.view(), &y, &RegressorConfig::default())?;
    println!("point predictions {:?}", reg.predict_point(x.view())?);

    // the degree model the pipeline fits for surveys
    let db = demo_database(DemoSize::default(), 3);
    let order = db.schema.order_from_names(&DEMO_ORDER)?;
    let bundle = fit_database(&db, &order, &PipelineConfig::fast())?;
    for m in &bundle.tables {
        let kind = match &m.degree {
            None => "none (no foreign key)".to_string(),
            Some(relsynth::pipeline::DegreeModel::Single { total, .. }) => format!("single FK, {total} rows"),
            Some(relsynth::pipeline::DegreeModel::Matched { stages, .. }) => format!("{} matching stage(s)", stages.len()),
        };
        println!("{:<16} degree model: {kind}", m.name);
    }
    Ok(())
}
