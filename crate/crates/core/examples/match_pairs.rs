//! Two-FK matching and multi-FK restructuring on toy data.
//!
//!     cargo run --example match_pairs

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relsynth::degree::{
    fit_match_plan, generate_pairs, reconstruct, restructure_multi_fk, stage_tables, RegressorConfig, DEFAULT_K_FACTOR,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // left row i tends to pair with right rows near i
    let left = Array2::from_shape_fn((10, 1), |(i, _)| i as f64);
    let right = Array2::from_shape_fn((10, 1), |(i, _)| i as f64);
    let mut pairs = Vec::new();
    for i in 0..10 {
        pairs.push((i, i));
        pairs.push((i, i));
        pairs.push((i, (i + 1) % 10));
    }
    let plan = fit_match_plan(left.view(), right.view(), &pairs, &RegressorConfig::default(), DEFAULT_K_FACTOR)?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let out = generate_pairs(&plan, left.view(), right.view(), 30.0, 0.05, &mut rng)?;
    let rows: u64 = out.iter().map(|t| t.2).sum();
    println!("{} pairs, {rows} rows", out.len());
    for (l, r, d) in out.iter().take(6) {
        println!("  left {l} right {r} degree {d}");
    }

    // a table with four foreign keys becomes a chain of three stages
    let stages = restructure_multi_fk(&[0, 1, 2, 3]);
    let key = |s: &str| vec![s.to_string()];
    let rows = vec![
        vec![key("a"), key("x"), key("p"), key("1")],
        vec![key("a"), key("x"), key("q"), key("1")],
        vec![key("b"), key("y"), key("p"), key("2")],
    ];
    let tables = stage_tables(&rows, &stages);
    for (s, t) in stages.iter().zip(&tables) {
        println!("stage {:?}: {} rows", s.left, t.prefixes.len());
    }
    println!("reconstructed {} distinct tuples", reconstruct(&tables).len());
    Ok(())
}
