use crate::data::{Dataset, FeatureKind};
use crate::error::{invalid, Error, Result};

/// How a grid was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridSource {
    AllUnique,
    Quantile(usize),
    Explicit,
}

/// Requested grid policy; `Explicit` carries the values.
#[derive(Debug, Clone, PartialEq)]
pub enum GridPolicy {
    AllUnique,
    Quantile(usize),
    Explicit(Vec<f64>),
}

impl GridPolicy {
    /// Quantiles for continuous features, every observed value otherwise.
    pub fn default_for(kind: FeatureKind, quantiles: usize) -> Self {
        match kind {
            FeatureKind::Continuous => GridPolicy::Quantile(quantiles),
            _ => GridPolicy::AllUnique,
        }
    }
}

/// Ordered grid `V_j` for one feature.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub feature: String,
    pub feature_index: usize,
    pub kind: FeatureKind,
    pub values: Vec<f64>,
    pub source: GridSource,
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Position of an exact grid value.
    pub fn position(&self, value: f64) -> Option<usize> {
        self.values.iter().position(|&v| v == value)
    }
}

/// Type-7 (linear interpolation) empirical quantile of sorted data.
pub fn type7_quantile(sorted: &[f64], prob: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Nearest entry of a sorted slice; the lower one wins ties.
fn snap(sorted_unique: &[f64], x: f64) -> f64 {
    match sorted_unique.binary_search_by(|v| v.total_cmp(&x)) {
        Ok(i) => sorted_unique[i],
        Err(0) => sorted_unique[0],
        Err(i) if i == sorted_unique.len() => sorted_unique[i - 1],
        Err(i) => {
            let (a, b) = (sorted_unique[i - 1], sorted_unique[i]);
            if x - a <= b - x {
                a
            } else {
                b
            }
        }
    }
}

pub fn select_grid(dataset: &Dataset, feature: &str, policy: &GridPolicy) -> Result<GridSpec> {
    let j = dataset.feature_index(feature)?;
    let schema = &dataset.schema()[j];
    let (values, source) = match policy {
        GridPolicy::AllUnique => (dataset.unique_values(j), GridSource::AllUnique),
        GridPolicy::Quantile(q) => {
            if schema.kind == FeatureKind::Categorical {
                return Err(invalid(format!(
                    "quantile grid requested for categorical feature `{feature}`"
                )));
            }
            if *q == 0 {
                return Err(invalid("quantile grid needs at least one point"));
            }
            let mut sorted = dataset.column(j).to_vec();
            sorted.sort_by(f64::total_cmp);
            let mut unique = sorted.clone();
            unique.dedup();
            let mut values: Vec<f64> = (0..*q)
                .map(|k| {
                    let prob = if *q == 1 { 0.5 } else { k as f64 / (*q - 1) as f64 };
                    snap(&unique, type7_quantile(&sorted, prob))
                })
                .collect();
            values.dedup();
            (values, GridSource::Quantile(*q))
        }
        GridPolicy::Explicit(values) => {
            if values.is_empty() {
                return Err(invalid("explicit grid is empty"));
            }
            for &v in values {
                if !schema.accepts(v) {
                    return Err(Error::Schema(format!(
                        "grid value {v} is not valid for feature `{feature}`"
                    )));
                }
            }
            let ordered = match schema.kind {
                FeatureKind::Categorical => {
                    let mut seen = values.clone();
                    seen.sort_by(f64::total_cmp);
                    seen.windows(2).all(|w| w[0] != w[1])
                }
                _ => values.windows(2).all(|w| w[0] < w[1]),
            };
            if !ordered {
                return Err(invalid(format!(
                    "explicit grid for `{feature}` must be strictly increasing (distinct for categories)"
                )));
            }
            (values.clone(), GridSource::Explicit)
        }
    };
    Ok(GridSpec {
        feature: feature.to_string(),
        feature_index: j,
        kind: schema.kind,
        values,
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureSchema;
    use ndarray::Array2;

    fn single(kind: FeatureSchema, col: Vec<f64>) -> Dataset {
        let n = col.len();
        Dataset::new(vec![kind], Array2::from_shape_vec((n, 1), col).unwrap(), vec![0.0; n], None)
            .unwrap()
    }

    #[test]
    fn all_unique_on_discrete_ages() {
        let ages: Vec<f64> = (0..500).map(|i| 18.0 + (i * 37 % 73) as f64).collect();
        let ds = single(FeatureSchema::discrete("age"), ages);
        let g = select_grid(&ds, "age", &GridPolicy::AllUnique).unwrap();
        assert_eq!(g.values, (18..=90).map(f64::from).collect::<Vec<_>>());
        assert_eq!(g.source, GridSource::AllUnique);
    }

    #[test]
    fn constant_column_quantiles_collapse() {
        let ds = single(FeatureSchema::continuous("v"), vec![5.0, 5.0, 5.0]);
        let g = select_grid(&ds, "v", &GridPolicy::Quantile(3)).unwrap();
        assert_eq!(g.values, vec![5.0]);
    }

    #[test]
    fn quantile_values_are_observed() {
        let col: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64 * 0.37 + 0.01).collect();
        let ds = single(FeatureSchema::continuous("v"), col.clone());
        let g = select_grid(&ds, "v", &GridPolicy::Quantile(20)).unwrap();
        assert_eq!(g.values.len(), 20);
        assert!(g.values.windows(2).all(|w| w[0] < w[1]));
        assert!(g.values.iter().all(|v| col.contains(v)));
        assert_eq!(g.values[0], col.iter().cloned().fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn type7_matches_hand_values() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(type7_quantile(&s, 0.0), 1.0);
        assert_eq!(type7_quantile(&s, 0.5), 2.5);
        assert_eq!(type7_quantile(&s, 1.0), 4.0);
        assert!((type7_quantile(&s, 0.1) - 1.3).abs() < 1e-12);
    }

    #[test]
    fn categorical_rules() {
        let ds = single(FeatureSchema::categorical("c", ["a", "b", "c"]).unwrap(), vec![2.0, 0.0, 2.0]);
        assert!(select_grid(&ds, "c", &GridPolicy::Quantile(3)).is_err());
        let g = select_grid(&ds, "c", &GridPolicy::AllUnique).unwrap();
        assert_eq!(g.values, vec![0.0, 2.0]);
        assert!(select_grid(&ds, "c", &GridPolicy::Explicit(vec![2.0, 0.0])).is_ok());
        assert!(select_grid(&ds, "c", &GridPolicy::Explicit(vec![3.0])).is_err());
        assert!(select_grid(&ds, "nope", &GridPolicy::AllUnique).is_err());
    }

    #[test]
    fn explicit_numeric_must_increase() {
        let ds = single(FeatureSchema::continuous("v"), vec![1.0, 2.0]);
        assert!(select_grid(&ds, "v", &GridPolicy::Explicit(vec![2.0, 1.0])).is_err());
        let g = select_grid(&ds, "v", &GridPolicy::Explicit(vec![0.5, 7.0])).unwrap();
        assert_eq!(g.source, GridSource::Explicit);
    }
}
