use clap::{Parser, Subcommand};
use relsynth::data::{load_database, write_database, FkPolicy};
use relsynth::metrics::{evaluate, parse_rules, EvaluateOptions};
use relsynth::pipeline::{fit_database, generate_database, load_bundle, save_bundle, PipelineConfig};
use relsynth::schema::{parse_schema, SchemaGraph};
use std::error::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "relsynth", version, about = "Synthesise relational databases table by table")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit models on a database and write a model bundle.
    Fit {
        #[arg(long)]
        schema: PathBuf,
        /// Directory holding one `<table>.csv` per table.
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated table names, parents first.
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<String>>,
        /// JSON or YAML pipeline configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic database from a bundle.
    Generate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a synthetic database against the real one.
    Evaluate {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        synth: PathBuf,
        /// JSON or YAML list of if/then rules.
        #[arg(long)]
        rules: Option<PathBuf>,
        /// `table.column` to predict for the machine-learning score.
        #[arg(long)]
        ml_target: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Include per-column distribution series in the report.
        #[arg(long)]
        series: bool,
        #[arg(long)]
        report: PathBuf,
    },
}

fn read(path: &Path) -> Result<String, Box<dyn Error>> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()).into())
}

fn load_schema(path: &Path) -> Result<SchemaGraph, Box<dyn Error>> {
    Ok(parse_schema(&read(path)?)?)
}

fn run(cli: Cli) -> Result<(), Box<dyn Error>> {
    match cli.command {
        Command::Fit { schema, data, order, config, out } => {
            let schema = load_schema(&schema)?;
            let order = match order {
                Some(names) => schema.order_from_names(&names)?,
                None => schema.default_order(),
            };
            let config = match config {
                Some(p) => PipelineConfig::parse(&read(&p)?)?,
                None => PipelineConfig::default(),
            };
            let (db, _) = load_database(&data, &schema, FkPolicy::Reject)?;
            let bundle = fit_database(&db, &order, &config)?;
            save_bundle(&bundle, &out)?;
            eprintln!("fitted {} tables -> {}", bundle.tables.len(), out.display());
        }
        Command::Generate { model, scale, seed, out } => {
            let bundle = load_bundle(&model)?;
            let db = generate_database(&bundle, scale, seed)?;
            write_database(&db, &out)?;
            for t in &db.tables {
                eprintln!("{}: {} rows", t.name, t.row_count);
            }
        }
        Command::Evaluate { schema, real, synth, rules, ml_target, seed, series, report } => {
            let schema = load_schema(&schema)?;
            let (real, _) = load_database(&real, &schema, FkPolicy::Reject)?;
            let (synth, _) = load_database(&synth, &schema, FkPolicy::Reject)?;
            let rules = match rules {
                Some(p) => parse_rules(&read(&p)?)?,
                None => Vec::new(),
            };
            let options = EvaluateOptions { rules, ml_target, seed, series };
            let result = evaluate(&real, &synth, &options)?;
            std::fs::write(&report, serde_json::to_string_pretty(&result)?)
                .map_err(|e| format!("cannot write {}: {e}", report.display()))?;
            for (metric, v) in &result.per_metric {
                println!("{metric:<6} {v:.4}");
            }
            if let Some(a) = result.aggregate {
                println!("{:<6} {a:.4}", "all");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = e.source();
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
