use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{Group, GroupCollection};
use crate::error::{Error, Result};

/// Column-major table of raw attribute strings, one column per field.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeTable {
    names: Vec<String>,
    columns: Vec<Vec<String>>,
    rows: usize,
}

impl AttributeTable {
    pub fn new(names: Vec<String>, columns: Vec<Vec<String>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Schema(format!("{} names for {} columns", names.len(), columns.len())));
        }
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Schema("attribute columns have different lengths".into()));
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(Error::Schema(format!("duplicate attribute column {a}")));
            }
        }
        Ok(Self { names, columns, rows })
    }

    /// A table with `rows` rows and no columns.
    pub fn empty(rows: usize) -> Self {
        Self { names: Vec::new(), columns: Vec::new(), rows }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[String]> {
        self.names.iter().position(|n| n == name).map(|k| self.columns[k].as_slice())
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = &str> + '_ {
        self.columns.iter().map(move |c| c[i].as_str())
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| indices.iter().map(|&i| c[i].clone()).collect()).collect(),
            rows: indices.len(),
        }
    }
}

/// Membership rule over attribute columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupPredicate {
    /// Exact match; numeric cells compare numerically when both sides parse.
    Equals { field: String, value: String },
    ThresholdGt { field: String, value: f64 },
    ThresholdLt { field: String, value: f64 },
    /// Case-insensitive containment.
    Substring { field: String, pattern: String },
    /// Both clauses hold. Clauses may not themselves be conjunctions.
    Conjunction { clauses: Vec<GroupPredicate> },
}

impl GroupPredicate {
    pub fn validate(&self) -> Result<()> {
        if let GroupPredicate::Conjunction { clauses } = self {
            if clauses.len() != 2 {
                return Err(Error::Config(format!("conjunction has {} clauses, expected 2", clauses.len())));
            }
            if clauses.iter().any(|c| matches!(c, GroupPredicate::Conjunction { .. })) {
                return Err(Error::Config("conjunction clauses must be simple predicates".into()));
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, table: &AttributeTable) -> Result<Vec<bool>> {
        self.validate()?;
        let column = |field: &str| {
            table.column(field).ok_or_else(|| Error::Schema(format!("unknown attribute field {field}")))
        };
        let numeric = |field: &str, cell: &str, row: usize| {
            cell.trim().parse::<f64>().map_err(|_| {
                Error::Schema(format!("field {field} row {row}: {cell:?} is not numeric"))
            })
        };
        Ok(match self {
            GroupPredicate::Equals { field, value } => {
                let target = value.trim().parse::<f64>().ok();
                column(field)?
                    .iter()
                    .map(|c| match (target, c.trim().parse::<f64>()) {
                        (Some(t), Ok(x)) => x == t,
                        _ => c.trim() == value.trim(),
                    })
                    .collect()
            }
            GroupPredicate::ThresholdGt { field, value } => column(field)?
                .iter()
                .enumerate()
                .map(|(i, c)| numeric(field, c, i).map(|x| x > *value))
                .collect::<Result<_>>()?,
            GroupPredicate::ThresholdLt { field, value } => column(field)?
                .iter()
                .enumerate()
                .map(|(i, c)| numeric(field, c, i).map(|x| x < *value))
                .collect::<Result<_>>()?,
            GroupPredicate::Substring { field, pattern } => {
                let p = pattern.to_lowercase();
                column(field)?.iter().map(|c| c.to_lowercase().contains(&p)).collect()
            }
            GroupPredicate::Conjunction { clauses } => {
                let a = clauses[0].evaluate(table)?;
                let b = clauses[1].evaluate(table)?;
                a.into_iter().zip(b).map(|(x, y)| x && y).collect()
            }
        })
    }
}

impl fmt::Display for GroupPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupPredicate::Equals { field, value } => write!(f, "{field} == {value}"),
            GroupPredicate::ThresholdGt { field, value } => write!(f, "{field} > {value}"),
            GroupPredicate::ThresholdLt { field, value } => write!(f, "{field} < {value}"),
            GroupPredicate::Substring { field, pattern } => write!(f, "{field} contains {pattern:?}"),
            GroupPredicate::Conjunction { clauses } => {
                let parts: Vec<String> = clauses.iter().map(|c| format!("({c})")).collect();
                write!(f, "{}", parts.join(" and "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub name: String,
    pub predicate: GroupPredicate,
}

impl GroupSpec {
    pub fn new(name: impl Into<String>, predicate: GroupPredicate) -> Self {
        Self { name: name.into(), predicate }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuiltGroups {
    pub collection: GroupCollection,
    /// Names of groups at or below the minimum fraction, in declaration order.
    pub dropped: Vec<String>,
}

/// Evaluates every predicate and keeps the groups holding more than `gamma` of the rows.
pub fn build_groups(specs: &[GroupSpec], table: &AttributeTable, gamma: f64) -> Result<BuiltGroups> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Config(format!("gamma {gamma} outside [0, 1)")));
    }
    for (i, s) in specs.iter().enumerate() {
        if specs[..i].iter().any(|o| o.name == s.name) {
            return Err(Error::Config(format!("duplicate group name {}", s.name)));
        }
    }
    let n = table.rows();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for s in specs {
        let members = s.predicate.evaluate(table)?;
        let size = members.iter().filter(|&&m| m).count();
        if n > 0 && size as f64 / n as f64 > gamma {
            kept.push(Group { name: s.name.clone(), predicate: s.predicate.to_string(), members });
        } else {
            dropped.push(s.name.clone());
        }
    }
    Ok(BuiltGroups { collection: GroupCollection::new(kept, gamma)?, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(cols: &[(&str, &[&str])]) -> AttributeTable {
        AttributeTable::new(
            cols.iter().map(|(n, _)| n.to_string()).collect(),
            cols.iter().map(|(_, c)| c.iter().map(|s| s.to_string()).collect()).collect(),
        )
        .unwrap()
    }

    fn gt(field: &str, value: f64) -> GroupPredicate {
        GroupPredicate::ThresholdGt { field: field.into(), value }
    }

    fn eq(field: &str, value: &str) -> GroupPredicate {
        GroupPredicate::Equals { field: field.into(), value: value.into() }
    }

    #[test]
    fn strict_mass_rule_at_the_boundary() {
        let cells: Vec<String> = (0..1000).map(|i| i.to_string()).collect();
        let t = AttributeTable::new(vec!["id".into()], vec![cells]).unwrap();
        let specs = [
            GroupSpec::new("five", GroupPredicate::ThresholdLt { field: "id".into(), value: 5.0 }),
            GroupSpec::new("six", GroupPredicate::ThresholdLt { field: "id".into(), value: 6.0 }),
        ];
        let built = build_groups(&specs, &t, 0.005).unwrap();
        assert_eq!(built.dropped, vec!["five"]);
        assert_eq!(built.collection.names(), vec!["six"]);
        assert_eq!(built.collection.groups()[0].size(), 6);
    }

    #[test]
    fn conjunction_intersects_masks() {
        let t = table(&[("age", &["35", "45", "50", "62"]), ("education", &["HS", "HS", "BA", "HS"])]);
        let p = GroupPredicate::Conjunction { clauses: vec![gt("age", 40.0), eq("education", "HS")] };
        assert_eq!(p.evaluate(&t).unwrap(), vec![false, true, false, true]);
        assert_eq!(p.to_string(), "(age > 40) and (education == HS)");
    }

    #[test]
    fn substring_ignores_case() {
        let t = table(&[("title", &["Bookstore", "a BOOK", "boo", "notebooks"])]);
        let p = GroupPredicate::Substring { field: "title".into(), pattern: "book".into() };
        assert_eq!(p.evaluate(&t).unwrap(), vec![true, true, false, true]);
    }

    #[test]
    fn equals_compares_numbers_numerically() {
        let t = table(&[("k", &["1", "1.0", "01", "x"])]);
        assert_eq!(eq("k", "1").evaluate(&t).unwrap(), vec![true, true, true, false]);
        assert_eq!(eq("k", "x").evaluate(&t).unwrap(), vec![false, false, false, true]);
    }

    #[test]
    fn unknown_field_is_a_schema_error() {
        let t = table(&[("age", &["1"])]);
        assert!(matches!(gt("height", 1.0).evaluate(&t), Err(Error::Schema(_))));
        let bad = table(&[("age", &["old"])]);
        assert!(matches!(gt("age", 1.0).evaluate(&bad), Err(Error::Schema(_))));
    }

    #[test]
    fn conjunctions_need_two_simple_clauses() {
        let t = table(&[("a", &["1"])]);
        let one = GroupPredicate::Conjunction { clauses: vec![gt("a", 0.0)] };
        assert!(one.evaluate(&t).is_err());
        let nested = GroupPredicate::Conjunction { clauses: vec![gt("a", 0.0), one] };
        assert!(nested.evaluate(&t).is_err());
    }

    #[test]
    fn predicates_parse_from_toml() {
        let s: GroupSpec = toml::from_str(
            r#"
            name = "older_hs"
            predicate = { kind = "conjunction", clauses = [
                { kind = "threshold_gt", field = "age", value = 40 },
                { kind = "equals", field = "education", value = "HS" },
            ] }
            "#,
        )
        .unwrap();
        assert_eq!(s.predicate, GroupPredicate::Conjunction { clauses: vec![gt("age", 40.0), eq("education", "HS")] });
    }
}
