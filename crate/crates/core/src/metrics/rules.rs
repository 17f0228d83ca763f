//! Row-level consistency rules: `if <predicate> then <predicate>`.

use super::MetricsError;
use crate::data::{ColumnData, Table};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Predicate {
    Eq { column: String, value: Literal },
    Ne { column: String, value: Literal },
    In { column: String, values: Vec<Literal> },
    NotIn { column: String, values: Vec<Literal> },
    Lt { column: String, value: f64 },
    Le { column: String, value: f64 },
    Gt { column: String, value: f64 },
    Ge { column: String, value: f64 },
    IsNull { column: String },
    All { of: Vec<Predicate> },
    Any { of: Vec<Predicate> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub table: String,
    #[serde(rename = "if")]
    pub antecedent: Predicate,
    #[serde(rename = "then")]
    pub consequent: Predicate,
}

impl RuleSpec {
    pub fn label(&self, index: usize) -> String {
        self.name.clone().unwrap_or_else(|| format!("rule{index}"))
    }
}

/// Parse a JSON or YAML list of rules.
pub fn parse_rules(text: &str) -> Result<Vec<RuleSpec>, MetricsError> {
    serde_json::from_str(text).or_else(|_| {
        serde_yaml::from_str(text).map_err(|e| MetricsError::Rules(format!("cannot parse rules: {e}")))
    })
}

fn literal_matches(data: &ColumnData, row: usize, lit: &Literal) -> bool {
    match (data, lit) {
        (ColumnData::Numerical(v), Literal::Number(x)) => v[row] == Some(*x),
        (ColumnData::Numerical(v), Literal::Text(t)) => t.parse::<f64>().ok().is_some_and(|x| v[row] == Some(x)),
        (ColumnData::Categorical(v), Literal::Text(t)) => v[row].as_deref() == Some(t.as_str()),
        (ColumnData::Categorical(v), Literal::Number(x)) => v[row].as_deref() == Some(crate::data::format_number(*x).as_str()),
    }
}

fn number(data: &ColumnData, row: usize) -> Option<f64> {
    match data {
        ColumnData::Numerical(v) => v[row],
        ColumnData::Categorical(v) => v[row].as_deref().and_then(|s| s.parse().ok()),
    }
}

impl Predicate {
    fn check_columns(&self, table: &Table) -> Result<(), MetricsError> {
        match self {
            Predicate::All { of } | Predicate::Any { of } => of.iter().try_for_each(|p| p.check_columns(table)),
            Predicate::Eq { column, .. }
            | Predicate::Ne { column, .. }
            | Predicate::In { column, .. }
            | Predicate::NotIn { column, .. }
            | Predicate::Lt { column, .. }
            | Predicate::Le { column, .. }
            | Predicate::Gt { column, .. }
            | Predicate::Ge { column, .. }
            | Predicate::IsNull { column } => table
                .column(column)
                .map(|_| ())
                .ok_or_else(|| MetricsError::Rules(format!("table `{}` has no column `{column}`", table.name))),
        }
    }

    /// Nulls satisfy only `is_null`, `ne` and `not_in`.
    pub fn holds(&self, table: &Table, row: usize) -> bool {
        let col = |c: &str| &table.column(c).expect("columns checked").data;
        let cmp = |c: &str, f: &dyn Fn(f64) -> bool| number(col(c), row).is_some_and(f);
        match self {
            Predicate::Eq { column, value } => literal_matches(col(column), row, value),
            Predicate::Ne { column, value } => !literal_matches(col(column), row, value),
            Predicate::In { column, values } => values.iter().any(|v| literal_matches(col(column), row, v)),
            Predicate::NotIn { column, values } => !values.iter().any(|v| literal_matches(col(column), row, v)),
            Predicate::Lt { column, value } => cmp(column, &|x| x < *value),
            Predicate::Le { column, value } => cmp(column, &|x| x <= *value),
            Predicate::Gt { column, value } => cmp(column, &|x| x > *value),
            Predicate::Ge { column, value } => cmp(column, &|x| x >= *value),
            Predicate::IsNull { column } => col(column).is_null(row),
            Predicate::All { of } => of.iter().all(|p| p.holds(table, row)),
            Predicate::Any { of } => of.iter().any(|p| p.holds(table, row)),
        }
    }
}

/// Number of rows satisfying the antecedent but not the consequent, per rule.
/// Every rule must target `table`.
pub fn rule_violations(table: &Table, rules: &[&RuleSpec]) -> Result<Vec<usize>, MetricsError> {
    rules
        .iter()
        .map(|r| {
            r.antecedent.check_columns(table)?;
            r.consequent.check_columns(table)?;
            Ok((0..table.row_count)
                .filter(|&i| r.antecedent.holds(table, i) && !r.consequent.holds(table, i))
                .count())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Column;

    fn people(rows: &[(&str, &str, f64)]) -> Table {
        Table::new(
            "people",
            vec![
                Column {
                    name: "citizenship".into(),
                    data: ColumnData::Categorical(rows.iter().map(|r| Some(r.0.to_string())).collect()),
                },
                Column {
                    name: "residency".into(),
                    data: ColumnData::Categorical(rows.iter().map(|r| Some(r.1.to_string())).collect()),
                },
                Column {
                    name: "age".into(),
                    data: ColumnData::Numerical(rows.iter().map(|r| Some(r.2)).collect()),
                },
            ],
        )
    }

    fn citizen_rule() -> RuleSpec {
        parse_rules(
            r#"[{"table": "people", "if": {"op": "eq", "column": "citizenship", "value": "SG"},
                 "then": {"op": "eq", "column": "residency", "value": "Citizen"}}]"#,
        )
        .unwrap()
        .remove(0)
    }

    #[test]
    fn counts_violating_rows() {
        let t = people(&[("SG", "Citizen", 20.0), ("SG", "PR", 30.0), ("MY", "PR", 40.0)]);
        assert_eq!(rule_violations(&t, &[&citizen_rule()]).unwrap(), vec![1]);
    }

    #[test]
    fn empty_table_and_unsatisfiable_antecedent() {
        let t = people(&[]);
        assert_eq!(rule_violations(&t, &[&citizen_rule()]).unwrap(), vec![0]);
        let t = people(&[("MY", "PR", 1.0)]);
        assert_eq!(rule_violations(&t, &[&citizen_rule()]).unwrap(), vec![0]);
    }

    #[test]
    fn yaml_rules_with_comparisons() {
        let rules = parse_rules(
            "- name: adults-only\n  table: people\n  if: {op: all, of: [{op: in, column: residency, values: [PR, Citizen]}]}\n  then: {op: ge, column: age, value: 18}\n",
        )
        .unwrap();
        let t = people(&[("SG", "Citizen", 12.0), ("SG", "PR", 30.0), ("MY", "Visitor", 5.0)]);
        assert_eq!(rules[0].label(0), "adults-only");
        assert_eq!(rule_violations(&t, &[&rules[0]]).unwrap(), vec![1]);
    }

    #[test]
    fn missing_column_is_reported() {
        let mut r = citizen_rule();
        r.consequent = Predicate::IsNull { column: "nope".into() };
        assert!(matches!(rule_violations(&people(&[]), &[&r]), Err(MetricsError::Rules(_))));
    }
}
