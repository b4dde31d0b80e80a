//! Tabular data model: feature schemas, datasets, CSV ingestion, fold
//! splitting, the equicorrelated Gaussian simulator and rank correlation.

mod correlation;
mod csv_io;
mod folds;
mod simulate;

pub use correlation::{pearson, spearman, spearman_correlation_matrix, OrdinalMap};
pub use csv_io::{format_schema, load_csv, parse_schema, read_csv, write_csv, write_csv_to};
pub use folds::{kfold_split, FoldSplit};
pub use simulate::{simulate_correlated_gaussian, SimulationConfig};

use std::collections::HashSet;

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    Continuous,
    Discrete,
    Categorical,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Continuous => "continuous",
            FeatureKind::Discrete => "discrete",
            FeatureKind::Categorical => "categorical",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "continuous" => Ok(FeatureKind::Continuous),
            "discrete" => Ok(FeatureKind::Discrete),
            "categorical" => Ok(FeatureKind::Categorical),
            other => Err(Error::Schema(format!("unknown feature kind `{other}`"))),
        }
    }

    pub fn is_numeric(self) -> bool {
        !matches!(self, FeatureKind::Categorical)
    }
}

/// One column of the feature matrix. Categorical values are stored in the
/// matrix as the index of the category in `categories`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSchema {
    pub name: String,
    pub kind: FeatureKind,
    pub categories: Vec<String>,
}

impl FeatureSchema {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Continuous,
            categories: Vec::new(),
        }
    }

    pub fn discrete(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Discrete,
            categories: Vec::new(),
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let schema = Self {
            name: name.into(),
            kind: FeatureKind::Categorical,
            categories: categories.into_iter().map(Into::into).collect(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Schema("feature name must not be empty".into()));
        }
        match self.kind {
            FeatureKind::Categorical => {
                if self.categories.is_empty() {
                    return Err(Error::Schema(format!(
                        "categorical feature `{}` has no categories",
                        self.name
                    )));
                }
                let mut seen = HashSet::new();
                for c in &self.categories {
                    if !seen.insert(c.as_str()) {
                        return Err(Error::Schema(format!(
                            "feature `{}` lists category `{c}` twice",
                            self.name
                        )));
                    }
                }
            }
            _ => {
                if !self.categories.is_empty() {
                    return Err(Error::Schema(format!(
                        "non-categorical feature `{}` must not list categories",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == label)
    }

    /// Checks a stored cell value against the schema.
    pub fn accepts(&self, value: f64) -> bool {
        if !value.is_finite() {
            return false;
        }
        match self.kind {
            FeatureKind::Categorical => {
                value >= 0.0 && value.fract() == 0.0 && (value as usize) < self.categories.len()
            }
            _ => true,
        }
    }
}

pub(crate) fn validate_schema_list(schema: &[FeatureSchema]) -> Result<()> {
    if schema.is_empty() {
        return Err(Error::Schema("at least one feature is required".into()));
    }
    let mut names = HashSet::new();
    for f in schema {
        f.validate()?;
        if !names.insert(f.name.as_str()) {
            return Err(Error::Schema(format!("duplicate feature name `{}`", f.name)));
        }
    }
    Ok(())
}

/// Feature matrix plus target, with a per-column schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Vec<FeatureSchema>,
    rows: Array2<f64>,
    target: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(
        schema: Vec<FeatureSchema>,
        rows: Array2<f64>,
        target: Vec<f64>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        validate_schema_list(&schema)?;
        let (n, p) = rows.dim();
        if n == 0 {
            return Err(Error::Empty("dataset has no rows".into()));
        }
        if p != schema.len() {
            return Err(Error::Schema(format!(
                "feature matrix has {p} columns but the schema lists {}",
                schema.len()
            )));
        }
        if target.len() != n {
            return Err(invalid(format!(
                "target has {} entries for {n} rows",
                target.len()
            )));
        }
        if let Some(w) = &weights {
            if w.len() != n {
                return Err(invalid(format!("weights have {} entries for {n} rows", w.len())));
            }
        }
        for (i, row) in rows.outer_iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !schema[j].accepts(v) {
                    return Err(Error::Cell {
                        row: i,
                        column: schema[j].name.clone(),
                        message: format!("value {v} does not conform to the schema"),
                    });
                }
            }
            if !target[i].is_finite() {
                return Err(Error::Cell {
                    row: i,
                    column: "<target>".into(),
                    message: "target is not finite".into(),
                });
            }
        }
        Ok(Self {
            schema,
            rows,
            target,
            weights,
        })
    }

    pub fn schema(&self) -> &[FeatureSchema] {
        &self.schema
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.rows.ncols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.rows
            .row(i)
            .to_slice()
            .expect("dataset rows are stored in standard layout")
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.rows.column(j)
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.schema.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.schema
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| Error::Schema(format!("unknown feature `{name}`")))
    }

    /// Sorted distinct values observed in column `j`.
    pub fn unique_values(&self, j: usize) -> Vec<f64> {
        let mut values: Vec<f64> = self.rows.column(j).to_vec();
        values.sort_by(f64::total_cmp);
        values.dedup();
        values
    }

    /// Rows `indices` in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Empty("subset selects no rows".into()));
        }
        let rows = self.rows.select(Axis(0), indices);
        let target = indices.iter().map(|&i| self.target[i]).collect();
        let weights = self
            .weights
            .as_ref()
            .map(|w| indices.iter().map(|&i| w[i]).collect());
        Ok(Self {
            schema: self.schema.clone(),
            rows: standard_layout(rows),
            target,
            weights,
        })
    }

    /// Same rows and schema with a replacement target.
    pub fn with_target(&self, target: Vec<f64>) -> Result<Self> {
        Self::new(self.schema.clone(), self.rows.clone(), target, self.weights.clone())
    }
}

fn standard_layout(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}
