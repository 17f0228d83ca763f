//! Score a perturbed copy of the demo database against the original,
//! including an if/then rule and machine-learning efficacy.
//!
//!     cargo run --release --example evaluate_metrics

use relsynth::data::ColumnData;
use relsynth::fixture::{demo_database, DemoSize};
use relsynth::metrics::{evaluate, parse_rules, EvaluateOptions};

const RULES: &str = r#"
- name: adults_only
  table: users
  if: {op: is_null, column: gender}
  then: {op: ge, column: age, value: 18}
- name: young_not_over_80
  table: users
  if: {op: lt, column: age, value: 30}
  then: {op: le, column: age, value: 80}
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let real = demo_database(DemoSize::default(), 5);
    let mut synth = real.clone();
    // age the synthetic users by ten years
    if let ColumnData::Numerical(age) = &mut synth.tables[0].columns[2].data {
        age.iter_mut().flatten().for_each(|a| *a += 10.0);
    }
    let options = EvaluateOptions {
        rules: parse_rules(RULES)?,
        ml_target: Some("surveys.year".into()),
        seed: 0,
        series: false,
    };
    for (label, other) in [("real vs real", &real), ("real vs aged", &synth)] {
        let report = evaluate(&real, other, &options)?;
        println!("{label}");
        for t in &report.tables {
            let scores: Vec<String> = t.scores.iter().map(|s| format!("{}={:.3}", s.name, s.normalized)).collect();
            println!("  {:<16} {}", t.table, scores.join(" "));
        }
        println!("  aggregate {:?}", report.aggregate);
    }
    Ok(())
}
