//! Categorical datasets: CSV ingestion, schema handling, margin projection
//! and the longitudinal outcome transforms.

use std::collections::BTreeSet;
use std::io::Read;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariableRole {
    TimeInvariantCovariate,
    TimedCovariate,
    TimedOutcome,
    Other,
}

impl VariableRole {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "time-invariant-covariate" => Ok(Self::TimeInvariantCovariate),
            "timed-covariate" => Ok(Self::TimedCovariate),
            "timed-outcome" => Ok(Self::TimedOutcome),
            "other" => Ok(Self::Other),
            _ => Err(Error::Parse(format!("unknown variable role '{s}'"))),
        }
    }

    pub fn is_timed(self) -> bool {
        matches!(self, Self::TimedCovariate | Self::TimedOutcome)
    }
}

/// One variable of a dataset: its name, ordered category labels and role.
#[derive(Debug, Clone)]
pub struct VariableSchema {
    pub name: String,
    pub categories: Vec<String>,
    pub role: VariableRole,
    pub time_index: Option<u32>,
}

impl VariableSchema {
    pub fn new(name: impl Into<String>, categories: Vec<String>) -> Self {
        VariableSchema {
            name: name.into(),
            categories,
            role: VariableRole::Other,
            time_index: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.categories.is_empty() {
            return Err(Error::Validation(format!(
                "variable '{}' has no categories",
                self.name
            )));
        }
        let distinct: BTreeSet<_> = self.categories.iter().collect();
        if distinct.len() != self.categories.len() {
            return Err(Error::Validation(format!(
                "variable '{}' has duplicate categories",
                self.name
            )));
        }
        match (self.role.is_timed(), self.time_index) {
            (true, None) => Err(Error::Validation(format!(
                "timed variable '{}' is missing a time index",
                self.name
            ))),
            (false, Some(_)) => Err(Error::Validation(format!(
                "non-timed variable '{}' carries a time index",
                self.name
            ))),
            (true, Some(t)) if t < 1 => Err(Error::Validation(format!(
                "variable '{}' has time index {t} < 1",
                self.name
            ))),
            _ => Ok(()),
        }
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == label)
    }
}

/// A columnar categorical table. Cell values are stored as indexes into the
/// variable's category list; `None` marks a missing value.
#[derive(Debug, Clone)]
pub struct Dataset {
    schema: Vec<VariableSchema>,
    rows: Vec<Vec<Option<usize>>>,
}

impl Dataset {
    pub fn new(schema: Vec<VariableSchema>, rows: Vec<Vec<Option<usize>>>) -> Result<Self> {
        for v in &schema {
            v.validate()?;
        }
        let names: BTreeSet<_> = schema.iter().map(|v| &v.name).collect();
        if names.len() != schema.len() {
            return Err(Error::Validation("duplicate variable names".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(Error::Validation(format!(
                    "row {} has {} entries, expected {}",
                    i + 1,
                    row.len(),
                    schema.len()
                )));
            }
            for (v, cell) in schema.iter().zip(row) {
                if let Some(c) = cell {
                    if *c >= v.categories.len() {
                        return Err(Error::Validation(format!(
                            "row {} holds an out-of-range value for '{}'",
                            i + 1,
                            v.name
                        )));
                    }
                }
            }
        }
        Ok(Dataset { schema, rows })
    }

    pub fn schema(&self) -> &[VariableSchema] {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Option<usize>>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn variable_index(&self, name: &str) -> Result<usize> {
        self.schema
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::Argument(format!("unknown variable '{name}'")))
    }

    pub fn label(&self, var: usize, cell: Option<usize>) -> Option<&str> {
        cell.map(|c| self.schema[var].categories[c].as_str())
    }
}

/// An ordered subset of variable names used to project a dataset.
#[derive(Debug, Clone)]
pub struct MarginSpec {
    pub variables: Vec<String>,
}

impl MarginSpec {
    pub fn new(variables: Vec<String>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::Argument("empty margin".into()));
        }
        let distinct: BTreeSet<_> = variables.iter().collect();
        if distinct.len() != variables.len() {
            return Err(Error::Argument("margin lists a variable twice".into()));
        }
        Ok(MarginSpec { variables })
    }
}

/// Reads a UTF-8 CSV stream with a header row into a [`Dataset`]. Categories
/// are inferred per column and sorted lexicographically unless an explicit
/// schema is supplied; empty cells become missing values.
pub fn load_dataset(source: impl Read, schema_override: Option<&[VariableSchema]>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse(format!("cannot read header: {e}")))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(Error::Parse("empty input: no header row".into()));
    }

    let mut raw_rows: Vec<Vec<Option<String>>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("row {}: {e}", i + 2)))?;
        if record.len() != header.len() {
            return Err(Error::Parse(format!(
                "row {}: expected {} fields, found {}",
                i + 2,
                header.len(),
                record.len()
            )));
        }
        raw_rows.push(
            record
                .iter()
                .map(|cell| {
                    let cell = cell.trim();
                    if cell.is_empty() {
                        None
                    } else {
                        Some(cell.to_string())
                    }
                })
                .collect(),
        );
    }

    let schema: Vec<VariableSchema> = match schema_override {
        Some(given) => header
            .iter()
            .map(|name| {
                given
                    .iter()
                    .find(|v| &v.name == name)
                    .cloned()
                    .ok_or_else(|| {
                        Error::Validation(format!("schema override misses variable '{name}'"))
                    })
            })
            .collect::<Result<_>>()?,
        None => header
            .iter()
            .enumerate()
            .map(|(col, name)| {
                let cats: BTreeSet<String> = raw_rows
                    .iter()
                    .filter_map(|r| r[col].clone())
                    .collect();
                VariableSchema::new(name.clone(), cats.into_iter().collect())
            })
            .collect(),
    };

    let mut rows = Vec::with_capacity(raw_rows.len());
    for (i, raw) in raw_rows.iter().enumerate() {
        let mut row = Vec::with_capacity(schema.len());
        for (v, cell) in schema.iter().zip(raw) {
            match cell {
                None => row.push(None),
                Some(label) => match v.category_index(label) {
                    Some(c) => row.push(Some(c)),
                    None => {
                        return Err(Error::Validation(format!(
                            "row {}: '{}' is not a category of '{}'",
                            i + 2,
                            label,
                            v.name
                        )))
                    }
                },
            }
        }
        rows.push(row);
    }
    Dataset::new(schema, rows)
}

/// Parses the flat key-value schema override format:
///
/// ```text
/// variable Treatment
/// categories new,standard
/// role time-invariant-covariate
///
/// variable Week1
/// categories A,N
/// role timed-outcome
/// time-index 1
/// ```
pub fn parse_schema_file(text: &str) -> Result<Vec<VariableSchema>> {
    let mut out: Vec<VariableSchema> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| Error::Parse(format!("schema line {}: missing value", lineno + 1)))?;
        let value = value.trim();
        match key {
            "variable" => out.push(VariableSchema::new(value, Vec::new())),
            _ => {
                let var = out.last_mut().ok_or_else(|| {
                    Error::Parse(format!("schema line {}: '{key}' before any variable", lineno + 1))
                })?;
                match key {
                    "categories" => {
                        var.categories = value.split(',').map(|c| c.trim().to_string()).collect()
                    }
                    "role" => var.role = VariableRole::parse(value)?,
                    "time-index" => {
                        var.time_index = Some(value.parse().map_err(|_| {
                            Error::Parse(format!("schema line {}: bad time index", lineno + 1))
                        })?)
                    }
                    _ => {
                        return Err(Error::Parse(format!(
                            "schema line {}: unknown key '{key}'",
                            lineno + 1
                        )))
                    }
                }
            }
        }
    }
    for v in &out {
        v.validate()?;
    }
    Ok(out)
}

/// Restricts a dataset to the margin's variables, in margin order. The number
/// of rows is unchanged.
pub fn project_margin(data: &Dataset, margin: &MarginSpec) -> Result<Dataset> {
    let cols: Vec<usize> = margin
        .variables
        .iter()
        .map(|name| data.variable_index(name))
        .collect::<Result<_>>()?;
    let schema = cols.iter().map(|&c| data.schema[c].clone()).collect();
    let rows = data
        .rows
        .iter()
        .map(|r| cols.iter().map(|&c| r[c]).collect())
        .collect();
    Dataset::new(schema, rows)
}

/// Appends binary increasing/decreasing outcome variables built from pairs of
/// integer-valued count variables. A strictly larger later count is
/// `increasing`; no change counts as `decreasing`. A missing operand makes the
/// derived value missing.
pub fn transform_difference_outcome(
    data: &Dataset,
    count_vars: &[String],
    pairs: &[(usize, usize)],
) -> Result<Dataset> {
    let cols: Vec<usize> = count_vars
        .iter()
        .map(|n| data.variable_index(n))
        .collect::<Result<_>>()?;
    let mut parsed: Vec<Vec<i64>> = Vec::new();
    for &c in &cols {
        let v = &data.schema[c];
        let ints: Vec<i64> = v
            .categories
            .iter()
            .map(|cat| {
                cat.parse::<i64>().map_err(|_| {
                    Error::Validation(format!(
                        "category '{}' of '{}' is not an integer",
                        cat, v.name
                    ))
                })
            })
            .collect::<Result<_>>()?;
        parsed.push(ints);
    }
    for &(i, j) in pairs {
        if i >= j {
            return Err(Error::Argument(format!("pair ({i},{j}) must have i < j")));
        }
        if j >= cols.len() {
            return Err(Error::Argument(format!("pair index {j} out of range")));
        }
    }

    let mut schema = data.schema.clone();
    let mut rows = data.rows.clone();
    for &(i, j) in pairs {
        let name = format!("{}_{}_change", count_vars[i], count_vars[j]);
        schema.push(VariableSchema::new(
            name,
            vec!["decreasing".to_string(), "increasing".to_string()],
        ));
        for row in rows.iter_mut() {
            let value = match (row[cols[i]], row[cols[j]]) {
                (Some(a), Some(b)) => {
                    let delta = parsed[j][b] - parsed[i][a];
                    Some(if delta > 0 { 1 } else { 0 })
                }
                _ => None,
            };
            row.push(value);
        }
    }
    Dataset::new(schema, rows)
}

/// Appends running-count variables over a sequence of binary variables: the
/// t-th appended variable counts occurrences of `positive_label` among the
/// first t inputs. Missing values propagate from the first missing onward.
pub fn transform_cumulative_sum(
    data: &Dataset,
    binary_var_names: &[String],
    positive_label: &str,
) -> Result<Dataset> {
    let cols: Vec<usize> = binary_var_names
        .iter()
        .map(|n| data.variable_index(n))
        .collect::<Result<_>>()?;
    let mut positive_index = Vec::new();
    for &c in &cols {
        let v = &data.schema[c];
        if v.categories.len() != 2 {
            return Err(Error::Validation(format!(
                "variable '{}' is not binary",
                v.name
            )));
        }
        let p = v.category_index(positive_label).ok_or_else(|| {
            Error::Argument(format!(
                "'{positive_label}' is not a category of '{}'",
                v.name
            ))
        })?;
        positive_index.push(p);
    }

    let mut schema = data.schema.clone();
    let mut rows = data.rows.clone();
    for (t, &c) in cols.iter().enumerate() {
        let name = format!("{}_cum", data.schema[c].name);
        // categories 0..=t+1 in numeric order
        let cats = (0..=t + 1).map(|k| k.to_string()).collect();
        schema.push(VariableSchema::new(name, cats));
    }
    for row in rows.iter_mut() {
        let mut running: Option<usize> = Some(0);
        let mut sums = Vec::with_capacity(cols.len());
        for (t, &c) in cols.iter().enumerate() {
            running = match (running, row[c]) {
                (Some(acc), Some(v)) => Some(acc + usize::from(v == positive_index[t])),
                _ => None,
            };
            sums.push(running);
        }
        row.extend(sums);
    }
    Dataset::new(schema, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(text: &str) -> Dataset {
        load_dataset(text.as_bytes(), None).unwrap()
    }

    #[test]
    fn load_infers_sorted_categories() {
        let d = csv("V1,V2\nA,N\nA,A\nB,N\n");
        assert_eq!(d.schema().len(), 2);
        assert_eq!(d.schema()[0].categories, vec!["A", "B"]);
        assert_eq!(d.schema()[1].categories, vec!["A", "N"]);
        assert_eq!(d.n_rows(), 3);
    }

    #[test]
    fn empty_cell_is_missing() {
        let d = csv("V1,V2\nA,\nB,N\n");
        assert_eq!(d.rows()[0][1], None);
        assert_eq!(d.n_rows(), 2);
    }

    #[test]
    fn wrong_arity_is_parse_error_with_row() {
        let err = load_dataset("V1,V2\nA\n".as_bytes(), None).unwrap_err();
        assert_eq!(err.category(), "parse");
        assert!(err.to_string().contains("row 2"), "{err}");
    }

    #[test]
    fn unknown_category_under_explicit_schema() {
        let schema = vec![
            VariableSchema::new("V1", vec!["A".into()]),
            VariableSchema::new("V2", vec!["N".into()]),
        ];
        let err = load_dataset("V1,V2\nA,X\n".as_bytes(), Some(&schema)).unwrap_err();
        assert_eq!(err.category(), "validation");
    }

    #[test]
    fn empty_input_is_parse_error() {
        let err = load_dataset("".as_bytes(), None).unwrap_err();
        assert_eq!(err.category(), "parse");
    }

    #[test]
    fn projection_identity() {
        let d = csv("V1,V2\nA,N\nB,A\n");
        let m = MarginSpec::new(vec!["V1".into(), "V2".into()]).unwrap();
        let p = project_margin(&d, &m).unwrap();
        assert_eq!(p.n_rows(), d.n_rows());
        assert_eq!(p.rows(), d.rows());
    }

    #[test]
    fn projection_reorders_columns() {
        let d = csv("V1,V2\nA,N\nB,A\n");
        let m = MarginSpec::new(vec!["V2".into()]).unwrap();
        let p = project_margin(&d, &m).unwrap();
        assert_eq!(p.schema()[0].name, "V2");
        assert_eq!(p.rows()[0], vec![Some(1)]);
    }

    #[test]
    fn projection_unknown_variable() {
        let d = csv("V1,V2\nA,N\n");
        let m = MarginSpec::new(vec!["V3".into()]).unwrap();
        assert_eq!(project_margin(&d, &m).unwrap_err().category(), "argument");
    }

    #[test]
    fn difference_outcome_rules() {
        let d = csv("I1,I2,I3\n2,3,3\n3,3,3\n5,4,4\n");
        let vars = vec!["I1".to_string(), "I2".to_string(), "I3".to_string()];
        let out = transform_difference_outcome(&d, &vars, &[(0, 1), (1, 2)]).unwrap();
        let v = out.variable_index("I1_I2_change").unwrap();
        let labels: Vec<_> = out.rows().iter().map(|r| out.label(v, r[v]).unwrap().to_string()).collect();
        assert_eq!(labels, vec!["increasing", "decreasing", "decreasing"]);
        let v23 = out.variable_index("I2_I3_change").unwrap();
        assert!(out.rows().iter().all(|r| out.label(v23, r[v23]) == Some("decreasing")));
    }

    #[test]
    fn difference_outcome_missing_and_errors() {
        let d = csv("I1,I2\n2,\nx,1\n");
        let vars = vec!["I1".to_string(), "I2".to_string()];
        let err = transform_difference_outcome(&d, &vars, &[(0, 1)]).unwrap_err();
        assert_eq!(err.category(), "validation");

        let d = csv("I1,I2\n2,\n1,3\n");
        let out = transform_difference_outcome(&d, &vars, &[(0, 1)]).unwrap();
        let v = out.variable_index("I1_I2_change").unwrap();
        assert_eq!(out.rows()[0][v], None);
        assert_eq!(out.label(v, out.rows()[1][v]), Some("increasing"));
    }

    #[test]
    fn cumulative_sum_rules() {
        let d = csv(
            "H1,H2,H3\nInadequate,Inadequate,Inadequate\nAdequate,Adequate,Adequate\nAdequate,,Inadequate\n",
        );
        let vars: Vec<String> = ["H1", "H2", "H3"].iter().map(|s| s.to_string()).collect();
        let out = transform_cumulative_sum(&d, &vars, "Inadequate").unwrap();
        let v: Vec<usize> = ["H1_cum", "H2_cum", "H3_cum"]
            .iter()
            .map(|n| out.variable_index(n).unwrap())
            .collect();
        let row = |i: usize| -> Vec<Option<&str>> { v.iter().map(|&c| out.label(c, out.rows()[i][c])).collect() };
        assert_eq!(row(0), vec![Some("1"), Some("2"), Some("3")]);
        assert_eq!(row(1), vec![Some("0"), Some("0"), Some("0")]);
        assert_eq!(row(2), vec![Some("0"), None, None]);
    }

    #[test]
    fn cumulative_sum_rejects_non_binary() {
        let d = csv("H1\nA\nB\nC\n");
        let err = transform_cumulative_sum(&d, &["H1".to_string()], "A").unwrap_err();
        assert_eq!(err.category(), "validation");
    }

    #[test]
    fn transforms_are_deterministic() {
        let d = csv("I1,I2\n1,2\n3,1\n");
        let vars = vec!["I1".to_string(), "I2".to_string()];
        let a = transform_difference_outcome(&d, &vars, &[(0, 1)]).unwrap();
        let b = transform_difference_outcome(&d, &vars, &[(0, 1)]).unwrap();
        assert_eq!(a.rows(), b.rows());
    }

    #[test]
    fn schema_file_roundtrip() {
        let text = "variable Treatment\ncategories new,standard\nrole time-invariant-covariate\n\nvariable Week1\ncategories A,N\nrole timed-outcome\ntime-index 1\n";
        let schema = parse_schema_file(text).unwrap();
        assert_eq!(schema.len(), 2);
        assert_eq!(schema[1].time_index, Some(1));
        assert!(schema[0].validate().is_ok());
    }
}
