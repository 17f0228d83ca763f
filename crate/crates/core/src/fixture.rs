//! A small seeded demo database: users, activities, user activities (two
//! foreign keys) and yearly surveys (one foreign key).

use crate::data::{Column, ColumnData, Database, Table};
use crate::schema::{parse_schema, SchemaGraph};
use rand::distributions::WeightedIndex;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use std::sync::Arc;

pub const DEMO_SCHEMA: &str = r#"{
  "tables": [
    {"name": "users", "primary_key": ["id"], "columns": [
      {"name": "id", "kind": "categorical"},
      {"name": "gender", "kind": "categorical"},
      {"name": "age", "kind": "numerical"}]},
    {"name": "activities", "primary_key": ["id"], "columns": [
      {"name": "id", "kind": "categorical"},
      {"name": "category", "kind": "categorical"},
      {"name": "intensity", "kind": "numerical"}]},
    {"name": "user_activities", "primary_key": ["id"], "columns": [
      {"name": "id", "kind": "categorical"},
      {"name": "user_id", "kind": "categorical"},
      {"name": "activity_id", "kind": "categorical"},
      {"name": "hours", "kind": "numerical"}],
     "foreign_keys": [
      {"columns": ["user_id"], "parent": "users", "parent_columns": ["id"]},
      {"columns": ["activity_id"], "parent": "activities", "parent_columns": ["id"]}]},
    {"name": "surveys", "primary_key": ["id"], "columns": [
      {"name": "id", "kind": "categorical"},
      {"name": "user_id", "kind": "categorical"},
      {"name": "year", "kind": "categorical"},
      {"name": "satisfaction", "kind": "numerical"}],
     "foreign_keys": [
      {"columns": ["user_id"], "parent": "users", "parent_columns": ["id"]}]}
  ]
}"#;

/// Generation order: parents, then activities, then surveys.
pub const DEMO_ORDER: [&str; 4] = ["users", "activities", "user_activities", "surveys"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DemoSize {
    pub users: usize,
    pub activities: usize,
}

impl Default for DemoSize {
    fn default() -> Self {
        DemoSize { users: 500, activities: 50 }
    }
}

pub fn demo_schema() -> SchemaGraph {
    parse_schema(DEMO_SCHEMA).expect("demo schema is valid")
}

fn cat(name: &str, v: Vec<String>) -> Column {
    Column {
        name: name.into(),
        data: ColumnData::Categorical(v.into_iter().map(Some).collect()),
    }
}

fn num(name: &str, v: Vec<f64>) -> Column {
    Column {
        name: name.into(),
        data: ColumnData::Numerical(v.into_iter().map(Some).collect()),
    }
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// About 4 activity rows and 1.6 surveys per user. Older users favour low
/// intensity activities; survey satisfaction tracks the intensity of the
/// user's activities.
pub fn demo_database(size: DemoSize, seed: u64) -> Database {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let categories = ["cardio", "strength", "mind", "team"];

    let mut a_cat = Vec::new();
    let mut intensity = Vec::new();
    for k in 0..size.activities {
        let c = k % categories.len();
        a_cat.push(categories[c].to_string());
        let base = [7.0, 6.0, 2.0, 5.0][c];
        intensity.push(round2((base + rng.gen_range(-1.5..1.5f64)).clamp(0.5, 10.0)));
    }

    let age_dist: Normal<f64> = Normal::new(40.0, 12.0).expect("valid normal");
    let mut gender = Vec::new();
    let mut age = Vec::new();
    for _ in 0..size.users {
        gender.push(if rng.gen::<f64>() < 0.52 { "F" } else { "M" }.to_string());
        age.push(age_dist.sample(&mut rng).clamp(18.0, 85.0).round());
    }

    let partners = Poisson::new(1.8).expect("valid rate");
    let (mut ua_u, mut ua_a, mut hours) = (Vec::new(), Vec::new(), Vec::new());
    let mut per_user_intensity = vec![(0.0, 0usize); size.users];
    for u in 0..size.users {
        let m = (1 + partners.sample(&mut rng) as usize).min(size.activities);
        // older users draw from the calmer half of the activity list more often
        let calm = age[u] > 50.0 && rng.gen::<f64>() < 0.7;
        let chosen: Vec<usize> = if calm {
            sample(&mut rng, size.activities, m)
                .into_iter()
                .map(|a| (a / categories.len()) * categories.len() + 2)
                .map(|a| a.min(size.activities - 1))
                .collect()
        } else {
            sample(&mut rng, size.activities, m).into_vec()
        };
        for a in chosen {
            let repeats = 1 + usize::from(rng.gen::<f64>() < 0.5);
            for _ in 0..repeats {
                ua_u.push(format!("u{u}"));
                ua_a.push(format!("a{a}"));
                hours.push(round2((12.0 - intensity[a]).max(0.5) * rng.gen_range(0.5..1.5)));
                per_user_intensity[u].0 += intensity[a];
                per_user_intensity[u].1 += 1;
            }
        }
    }

    // 0..=3 surveys, mean 1.6
    let surveys = WeightedIndex::new([0.15, 0.3, 0.35, 0.2]).expect("valid weights");
    let (mut s_u, mut year, mut satisfaction) = (Vec::new(), Vec::new(), Vec::new());
    for u in 0..size.users {
        let n = surveys.sample(&mut rng);
        let (sum, count) = per_user_intensity[u];
        let mean = if count > 0 { sum / count as f64 } else { 5.0 };
        for y in 0..n {
            s_u.push(format!("u{u}"));
            year.push(format!("{}", 2019 + y));
            satisfaction.push(round2((2.0 + 0.6 * mean + rng.gen_range(-1.0..1.0f64)).clamp(1.0, 10.0)));
        }
    }

    let ids = |prefix: &str, n: usize| (0..n).map(|k| format!("{prefix}{k}")).collect::<Vec<_>>();
    let tables = vec![
        Table::new(
            "users",
            vec![cat("id", ids("u", size.users)), cat("gender", gender), num("age", age)],
        ),
        Table::new(
            "activities",
            vec![cat("id", ids("a", size.activities)), cat("category", a_cat), num("intensity", intensity)],
        ),
        Table::new(
            "user_activities",
            vec![
                cat("id", ids("ua", ua_u.len())),
                cat("user_id", ua_u),
                cat("activity_id", ua_a),
                num("hours", hours),
            ],
        ),
        Table::new(
            "surveys",
            vec![
                cat("id", ids("s", s_u.len())),
                cat("user_id", s_u),
                cat("year", year),
                num("satisfaction", satisfaction),
            ],
        ),
    ];
    Database {
        schema: Arc::new(demo_schema()),
        tables,
    }
}
