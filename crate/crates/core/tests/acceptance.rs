//! Acceptance checks. Each criterion prints one `PASS`/`FAIL` line with the
//! measured values; the process exits nonzero if any gating check fails.
//!
//!     cargo test --test acceptance

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use relsynth::data::{Column, ColumnData, Database, Table};
use relsynth::degree::{reconstruct, restructure_multi_fk, round_degrees, stage_tables, Key, StageLeft};
use relsynth::encoding::gmm::{fit_em, EmConfig};
use relsynth::encoding::{decode, encode, fit_codec, ColumnCodec, CLAMP, MODE_SCALE};
use relsynth::fixture::{demo_database, DemoSize, DEMO_ORDER};
use relsynth::generator::losses::{corr_loss, mean_loss, CorrTerms};
use relsynth::generator::{fit_generator, OutputLayout, TrainConfig};
use relsynth::metrics::{aggregate_harmonic, evaluate, normalize, EvaluateOptions, Goal, ScoreRange};
use relsynth::pipeline::{fit_database, generate_database, PipelineConfig};
use relsynth::schema::{ColumnKind, ColumnSpec, SchemaGraph, TableOrder, TableSpec};
use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

struct Outcome {
    pass: bool,
    /// A failing non-gating check is reported but does not fail the run.
    gating: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, gating: true, detail }
    }
}

// ---------------------------------------------------------------- fixtures

fn demo() -> &'static Database {
    static DB: OnceLock<Database> = OnceLock::new();
    DB.get_or_init(|| demo_database(DemoSize::default(), 42))
}

struct Run {
    synth: Database,
    repeat: Database,
    elapsed: Duration,
}

fn fit_and_generate(config: &PipelineConfig) -> (Database, Duration) {
    let db = demo();
    let start = Instant::now();
    let order = db.schema.order_from_names(&DEMO_ORDER).expect("demo order");
    let bundle = fit_database(db, &order, config).expect("fit");
    let synth = generate_database(&bundle, 1.0, 5).expect("generate");
    (synth, start.elapsed())
}

fn run(config: &PipelineConfig) -> Run {
    let (synth, elapsed) = fit_and_generate(config);
    let (repeat, _) = fit_and_generate(config);
    Run { synth, repeat, elapsed }
}

fn fast_run() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| run(&PipelineConfig::fast()))
}

fn card(real: &Table, synth: &Table) -> f64 {
    (synth.row_count as f64 - real.row_count as f64).abs() / real.row_count as f64
}

// ------------------------------------------------------- 1. partial orders

fn random_schema(rng: &mut ChaCha8Rng) -> (SchemaGraph, Vec<(usize, usize)>) {
    let n = rng.gen_range(1..=8);
    // generate a DAG over ranks, then give tables shuffled indices
    let mut label: Vec<usize> = (0..n).collect();
    label.shuffle(rng);
    let mut edges = Vec::new();
    for child in 1..n {
        for parent in 0..child {
            if rng.gen::<f64>() < 0.35 {
                edges.push((label[child], label[parent]));
            }
        }
    }
    let mut tables: Vec<TableSpec> = (0..n)
        .map(|t| TableSpec {
            name: format!("t{t}"),
            columns: vec![ColumnSpec { name: "id".into(), kind: ColumnKind::Categorical, nullable: false }],
            primary_key: vec!["id".into()],
        })
        .collect();
    let mut fks = Vec::new();
    for (k, &(c, p)) in edges.iter().enumerate() {
        let col = format!("fk{k}");
        tables[c].columns.push(ColumnSpec { name: col.clone(), kind: ColumnKind::Categorical, nullable: false });
        fks.push((format!("t{c}"), format!("t{p}"), vec![(col, "id".to_string())]));
    }
    (SchemaGraph::new(tables, fks).expect("random schema is valid"), edges)
}

fn random_topological_order(n: usize, edges: &[(usize, usize)], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut placed = vec![false; n];
    let mut seq = Vec::with_capacity(n);
    while seq.len() < n {
        let ready: Vec<usize> = (0..n)
            .filter(|&t| !placed[t] && edges.iter().all(|&(c, p)| c != t || placed[p]))
            .collect();
        let t = *ready.choose(rng).expect("acyclic");
        placed[t] = true;
        seq.push(t);
    }
    seq
}

/// Union-find over the edges whose endpoints both sit at or before `limit`.
fn connected_oracle(n: usize, edges: &[(usize, usize)], pos: &[usize], i: usize, j: usize) -> bool {
    let limit = pos[i].max(pos[j]);
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for &(a, b) in edges {
        if pos[a] <= limit && pos[b] <= limit {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
    }
    find(&mut parent, i) == find(&mut parent, j)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut failures = 0usize;
    let mut pairs = 0usize;
    for _ in 0..200 {
        let (g, edges) = random_schema(&mut rng);
        let n = g.len();
        let seq = random_topological_order(n, &edges, &mut rng);
        let order = TableOrder::from_sequence(seq.clone());
        if order.validate(&g).is_err() {
            failures += 1;
            continue;
        }
        let mut pos = vec![0; n];
        for (p, &t) in seq.iter().enumerate() {
            pos[t] = p;
        }
        let le = |a: usize, b: usize| g.affects_or_equal(a, b, &order);
        for a in 0..n {
            failures += usize::from(!le(a, a));
            for b in 0..n {
                pairs += 1;
                let expected = pos[a] <= pos[b] && connected_oracle(n, &edges, &pos, a, b);
                failures += usize::from(le(a, b) != expected);
                failures += usize::from(a != b && le(a, b) && le(b, a));
                for c in 0..n {
                    failures += usize::from(le(a, b) && le(b, c) && !le(a, c));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    Outcome::new(
        failures == 0 && elapsed < Duration::from_secs(10),
        format!("200 schemas, {pairs} pairs, {failures} failures, {:.2}s", elapsed.as_secs_f64()),
    )
}

// ------------------------------------------------------------ 2. rounding

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut failures = 0;
    for _ in 0..1000 {
        let len = rng.gen_range(1..300);
        let spread = rng.gen_range(0.1..20.0);
        let d: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..spread)).collect();
        let total = rng.gen_range(0..20_000u64) as f64;
        let eps = if rng.gen::<f64>() < 0.1 { 0.0 } else { rng.gen_range(0.0..0.3) };
        let out = round_degrees(&d, total, eps, &mut rng);
        let sum: u64 = out.iter().sum();
        let ok = out.len() == len
            && (sum as f64) >= (1.0 - eps) * total - 1e-9
            && (sum as f64) <= (1.0 + eps) * total + 1e-9;
        failures += usize::from(!ok);
    }
    let real = demo();
    let synth = &fast_run().synth;
    let cards: Vec<f64> = (2..4).map(|i| card(&real.tables[i], &synth.tables[i])).collect();
    let cards_ok = cards.iter().all(|&c| c <= 0.05 + 1e-12);
    Outcome::new(
        failures == 0 && cards_ok,
        format!("1000 fuzzed instances, {failures} failures; child Card {cards:.4?} (<= 0.05)"),
    )
}

// ------------------------------------------------------------ 3. encoding

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut cat_fail = 0;
    let mut worst_rel = 0.0f64;
    let mut checked = 0usize;
    let mut em_fail = 0;
    for trial in 0..50 {
        let n = rng.gen_range(20..200);
        let k = rng.gen_range(1..8);
        let cats: Vec<Option<String>> = (0..n)
            .map(|_| {
                if rng.gen::<f64>() < 0.05 {
                    None
                } else {
                    Some(format!("c{}", rng.gen_range(0..k)))
                }
            })
            .collect();
        let modes: Vec<(f64, f64)> = (0..rng.gen_range(1..4))
            .map(|_| (rng.gen_range(-50.0..50.0), rng.gen_range(0.1..5.0)))
            .collect();
        let nums: Vec<Option<f64>> = (0..n)
            .map(|_| {
                let (m, s) = modes[rng.gen_range(0..modes.len())];
                Some(Normal::new(m, s).unwrap().sample(&mut rng))
            })
            .collect();
        let table = Table::new(
            "t",
            vec![
                Column { name: "c".into(), data: ColumnData::Categorical(cats.clone()) },
                Column { name: "x".into(), data: ColumnData::Numerical(nums.clone()) },
            ],
        );
        let codec = fit_codec(&table, 10, trial).expect("codec");
        let matrix = encode(&codec, &table).expect("encode");
        let back = decode(&codec, matrix.view()).expect("decode");
        cat_fail += usize::from(back.column("c").unwrap().data != table.column("c").unwrap().data);
        let ColumnCodec::Numerical(m) = &codec.column("x").unwrap().codec else {
            panic!("numeric codec expected")
        };
        let ColumnData::Numerical(decoded) = &back.column("x").unwrap().data else {
            panic!("numeric column expected")
        };
        for (orig, dec) in nums.iter().zip(decoded) {
            let x = orig.unwrap();
            let (mode, _) = m.encode_value(x);
            let raw = (x - m.means[mode]) / (MODE_SCALE * m.stds[mode]);
            if raw <= CLAMP.0 || raw >= CLAMP.1 {
                continue;
            }
            checked += 1;
            let y = dec.expect("present value decodes");
            worst_rel = worst_rel.max((y - x).abs() / x.abs().max(1.0));
        }

        // EM on a fresh multivariate dataset
        let dims = rng.gen_range(1..4);
        let data = Array2::from_shape_fn((n, dims), |_| {
            let (m, s) = modes[rng.gen_range(0..modes.len())];
            m + s * rng.gen_range(-1.0..1.0)
        });
        let comps = rng.gen_range(1..6).min(n);
        let run = fit_em(data.view(), comps, trial, &EmConfig::new(vec![1e-3; dims]));
        let ll = &run.log_likelihoods;
        if ll.windows(2).any(|w| w[1] < w[0] - 1e-9 * w[0].abs().max(1.0)) {
            em_fail += 1;
        }
    }
    Outcome::new(
        cat_fail == 0 && worst_rel <= 1e-9 && em_fail == 0,
        format!(
            "categorical mismatches {cat_fail}; numeric worst rel err {worst_rel:.2e} over {checked} values; \
             EM decreases {em_fail}/50"
        ),
    )
}

// ----------------------------------------------------------- 4. gradients

fn rel_err(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let diff = (a - b).mapv(|v| v * v).sum().sqrt();
    let scale = a.mapv(|v| v * v).sum().sqrt().max(b.mapv(|v| v * v).sum().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn numeric_grad(x: &Array2<f64>, f: impl Fn(ArrayView2<f64>) -> f64) -> Array2<f64> {
    let h = 1e-5;
    let mut g = Array2::zeros(x.raw_dim());
    let mut probe = x.clone();
    for idx in ndarray::indices(x.raw_dim()) {
        let orig = probe[idx];
        probe[idx] = orig + h;
        let up = f(probe.view());
        probe[idx] = orig - h;
        let down = f(probe.view());
        probe[idx] = orig;
        g[idx] = (up - down) / (2.0 * h);
    }
    g
}

/// Rows driven by a shared latent factor, so columns correlate strongly.
fn correlated(n: usize, w: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let load: Vec<f64> = (0..w).map(|_| rng.gen_range(0.6..1.5) * if rng.gen() { 1.0 } else { -1.0 }).collect();
    let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Array2::from_shape_fn((n, w), |(i, j)| load[j] * z[i] + 0.3 * rng.gen_range(-1.0..1.0))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_mean, mut worst_corr) = (0.0f64, 0.0f64);
    let mut empty_corr = 0;
    for _ in 0..20 {
        let n = rng.gen_range(6..24);
        let w = rng.gen_range(2..7);
        let gen = correlated(n, w, &mut rng);
        let real = correlated(n + 5, w, &mut rng);
        let global = Array1::from_shape_fn(w, |_| rng.gen_range(-1.0..1.0));
        let alpha = rng.gen_range(0.0..1.0);
        let (_, analytic) = mean_loss(gen.view(), real.view(), global.view(), alpha).unwrap();
        let numeric = numeric_grad(&gen, |g| mean_loss(g, real.view(), global.view(), alpha).unwrap().0);
        worst_mean = worst_mean.max(rel_err(&analytic, &numeric));

        let terms = CorrTerms {
            known_width: 1,
            column: (0..w).collect(),
            alpha: 1.0,
            threshold: 0.0,
        };
        let global_corr = Array2::zeros((w, w));
        let (loss, analytic) = corr_loss(gen.view(), real.view(), &global_corr, &terms);
        if loss == 0.0 {
            empty_corr += 1;
        }
        let numeric = numeric_grad(&gen, |g| corr_loss(g, real.view(), &global_corr, &terms).0);
        worst_corr = worst_corr.max(rel_err(&analytic, &numeric));
    }
    Outcome::new(
        worst_mean <= 1e-4 && worst_corr <= 1e-4 && empty_corr == 0,
        format!("20 batches; worst rel err mean {worst_mean:.2e}, corr {worst_corr:.2e} (<= 1e-4)"),
    )
}

// ------------------------------------------------------- 5. normalization

fn criterion_5() -> Outcome {
    use Goal::*;
    use ScoreRange::*;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let formulas = [(Unit, Max), (Unit, Min), (Negative, Max), (Unbounded, Max), (NonNegative, Min), (Count, Min)];
    let mut not_one = 0;
    for &(range, goal) in &formulas {
        for _ in 0..200 {
            let hat = match range {
                Unit => rng.gen_range(0.0..=1.0),
                Negative => -rng.gen_range(1e-6..100.0),
                Unbounded => rng.gen_range(-100.0..100.0),
                NonNegative | Count => rng.gen_range(0.0..1000.0),
            };
            not_one += usize::from(normalize(hat, hat, range, goal).unwrap() != 1.0);
        }
    }
    let a = normalize(0.8, 1.0, Unit, Max).unwrap();
    let b = normalize(-2.0, -1.0, Unbounded, Max).unwrap();
    let hand = (a - 0.8).abs() <= 1e-12 && (b - (-1f64).exp()).abs() <= 1e-12;
    let harmonic = aggregate_harmonic(&[1.0; 7]) == Some(1.0);
    Outcome::new(
        not_one == 0 && hand && harmonic,
        format!("{} self-scores not 1: {not_one}; 0.8 case {a:.12}, e^-1 case {b:.12}", formulas.len() * 200),
    )
}

// --------------------------------------------------------- 6. end to end

fn check_run(real: &Database, run: &Run, limit: Duration) -> (bool, String) {
    let violations = run.synth.integrity_violations().len();
    let shape = |db: &Database| -> Vec<(String, Vec<(String, ColumnKind)>)> {
        db.tables
            .iter()
            .map(|t| (t.name.clone(), t.columns.iter().map(|c| (c.name.clone(), c.data.kind())).collect()))
            .collect()
    };
    let same_schema = shape(real) == shape(&run.synth) && *real.schema == *run.synth.schema;
    let deterministic = run.synth == run.repeat;
    let rows: Vec<usize> = run.synth.tables.iter().map(|t| t.row_count).collect();
    (
        violations == 0 && same_schema && deterministic && run.elapsed < limit,
        format!(
            "rows {rows:?}, integrity violations {violations}, schema equal {same_schema}, \
             deterministic {deterministic}, fit+generate {:.1}s (< {}s)",
            run.elapsed.as_secs_f64(),
            limit.as_secs()
        ),
    )
}

fn criterion_6() -> Outcome {
    let real = demo();
    let sizes: Vec<usize> = real.tables.iter().map(|t| t.row_count).collect();
    let (fast_ok, fast) = check_run(real, fast_run(), Duration::from_secs(30));
    let adversarial = run(&PipelineConfig::default());
    let (adv_ok, adv) = check_run(real, &adversarial, Duration::from_secs(600));
    Outcome::new(
        fast_ok && adv_ok,
        format!("real rows {sizes:?}; deterministic backend: {fast}; adversarial backend: {adv}"),
    )
}

// ------------------------------------------------ 7. conditional generation

fn criterion_7() -> Outcome {
    let (n, k) = (300, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let classes: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
    let known = Array2::from_shape_fn((n, k), |(i, j)| f64::from(u8::from(classes[i] == j)));
    let unknown = Array2::from_shape_fn((n, k), |(i, j)| f64::from(u8::from((classes[i] + 1) % k == j)));
    let layout = OutputLayout { width: k, softmax: vec![0..k], values: vec![], column: vec![0; k] };
    let cfg = TrainConfig { epochs: 200, ..Default::default() };
    let train = || {
        let (model, _) = fit_generator(known.view(), unknown.view(), &layout, &cfg).expect("fit");
        model.generate_unknown(known.view(), 1).expect("generate")
    };
    let (first, second) = (train(), train());
    let deterministic = first == second;
    let hits = (0..n).filter(|&i| first[[i, (classes[i] + 1) % k]] == 1.0).count();
    let accuracy = hits as f64 / n as f64;
    let pass = deterministic && accuracy >= 0.9;
    Outcome {
        pass,
        gating: !deterministic,
        detail: format!("accuracy {accuracy:.3} (>= 0.9, non-gating), deterministic {deterministic}"),
    }
}

// --------------------------------------------------------- 8. real vs real

fn criterion_8() -> Outcome {
    let real = demo();
    let options = EvaluateOptions { ml_target: Some("users.gender".into()), ..Default::default() };
    let report = evaluate(real, real, &options).expect("evaluate");
    let raw = |name: &str| -> Vec<f64> {
        report.all_scores().filter(|s| s.name == name).map(|s| s.raw).collect()
    };
    let (cs, ks, disc) = (raw("CS"), raw("KS"), raw("Disc"));
    let worst_disc = disc.iter().copied().fold(0.0, f64::max);
    let not_one: Vec<String> = report
        .all_scores()
        .filter(|s| s.normalized != 1.0)
        .map(|s| format!("{}={}", s.name, s.normalized))
        .collect();
    let per_metric_ok = report.per_metric.values().all(|&v| v == 1.0);
    let pass = !cs.is_empty()
        && cs.iter().all(|&v| v == 1.0)
        && ks.iter().all(|&v| v == 1.0)
        && worst_disc <= 0.1
        && not_one.is_empty()
        && per_metric_ok
        && report.aggregate == Some(1.0);
    Outcome::new(
        pass,
        format!(
            "CS {cs:?}, KS {ks:?}, worst Disc {worst_disc:.3} (<= 0.1), normalized != 1: {not_one:?}, \
             per-metric {:?}, aggregate {:?}",
            report.per_metric, report.aggregate
        ),
    )
}

// -------------------------------------------------------- 9. restructuring

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut failures = 0;
    for _ in 0..100 {
        let f = rng.gen_range(3..=5);
        let fks: Vec<usize> = (0..f).map(|k| k * 2 + rng.gen_range(0..2)).collect();
        let stages = restructure_multi_fk(&fks);
        let chain_ok = stages.len() == f - 1
            && stages.iter().enumerate().all(|(s, st)| {
                st.right == fks[s + 1]
                    && st.prefix_len == s + 2
                    && st.left == if s == 0 { StageLeft::Parent(fks[0]) } else { StageLeft::Stage(s - 1) }
            });
        let parents: Vec<usize> = (0..f).map(|_| rng.gen_range(1..6)).collect();
        let rows: Vec<Vec<Key>> = (0..rng.gen_range(1..80))
            .map(|_| {
                parents
                    .iter()
                    .enumerate()
                    .map(|(k, &m)| {
                        // composite keys on some FKs
                        let v = rng.gen_range(0..m);
                        if k % 2 == 0 { vec![format!("p{k}_{v}")] } else { vec![format!("{v}"), format!("x{k}")] }
                    })
                    .collect()
            })
            .collect();
        let tables = stage_tables(&rows, &stages);
        let expected: BTreeSet<Vec<Key>> = rows.iter().cloned().collect();
        let counts_ok = tables.last().is_some_and(|t| t.counts.iter().sum::<u64>() == rows.len() as u64);
        if !(chain_ok && counts_ok && reconstruct(&tables) == expected) {
            failures += 1;
        }
    }
    Outcome::new(failures == 0, format!("100 instances with 3-5 FKs, {failures} failures"))
}

// ------------------------------------------------------------------- main

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("partial orders", criterion_1),
        ("rounding", criterion_2),
        ("encoding", criterion_3),
        ("gradients", criterion_4),
        ("normalization", criterion_5),
        ("end to end", criterion_6),
        ("conditional generation", criterion_7),
        ("real vs real", criterion_8),
        ("restructuring", criterion_9),
    ];
    let mut gating_failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::new(false, format!("panicked: {msg}"))
        });
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("criterion {} ({name}): {verdict}  {}", i + 1, outcome.detail);
        if !outcome.pass && outcome.gating {
            gating_failures += 1;
        }
    }
    if gating_failures > 0 {
        eprintln!("{gating_failures} gating criteria failed");
        std::process::exit(1);
    }
}
