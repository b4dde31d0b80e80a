use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, FeatureKind};
use crate::error::{invalid, Error, Result};

/// Synthetic rows with every column drawn on its own, which breaks the
/// dependence between features and so lands mostly in the extrapolation
/// domain.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentingSample {
    pub rows: Array2<f64>,
    pub multiplier: usize,
    pub seed: u64,
}

/// 30 copies for large data, 100 otherwise.
pub fn default_multiplier(n_rows: usize) -> usize {
    if n_rows >= 50_000 {
        30
    } else {
        100
    }
}

/// Draws `multiplier · n` rows; each cell is uniform over the column's
/// observed unique values (all categories for categorical columns).
pub fn generate_augmenting_sample(
    dataset: &Dataset,
    multiplier: usize,
    seed: u64,
) -> Result<AugmentingSample> {
    if multiplier == 0 {
        return Err(invalid("augmenting multiplier must be at least 1"));
    }
    let n = dataset.n_rows();
    if n == 0 {
        return Err(Error::Empty("cannot augment an empty dataset".into()));
    }
    let pools: Vec<Vec<f64>> = dataset
        .schema()
        .iter()
        .enumerate()
        .map(|(j, s)| match s.kind {
            FeatureKind::Categorical => (0..s.categories.len()).map(|c| c as f64).collect(),
            _ => dataset.unique_values(j),
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_aug = n * multiplier;
    let p = pools.len();
    let mut rows = Array2::zeros((n_aug, p));
    for mut row in rows.rows_mut() {
        for (cell, pool) in row.iter_mut().zip(&pools) {
            *cell = pool[rng.random_range(0..pool.len())];
        }
    }
    Ok(AugmentingSample {
        rows,
        multiplier,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{pearson, FeatureSchema};
    use ndarray::Array2;

    fn column_dataset(values: Vec<f64>) -> Dataset {
        let n = values.len();
        let rows = Array2::from_shape_vec((n, 1), values).unwrap();
        Dataset::new(vec![FeatureSchema::discrete("a")], rows, vec![0.0; n], None).unwrap()
    }

    #[test]
    fn size_and_support() {
        let values: Vec<f64> = (0..1000).map(|i| (i % 7) as f64).collect();
        let ds = column_dataset(values);
        let aug = generate_augmenting_sample(&ds, 30, 1).unwrap();
        assert_eq!(aug.rows.nrows(), 30_000);
        assert!(aug.rows.iter().all(|v| (0.0..7.0).contains(v) && v.fract() == 0.0));
        assert_eq!(aug, generate_augmenting_sample(&ds, 30, 1).unwrap());
        assert_ne!(aug, generate_augmenting_sample(&ds, 30, 2).unwrap());
    }

    #[test]
    fn single_column_frequencies_pass_chi_square() {
        // 4 unique values, uniform over uniques; chi-square with 3 dof,
        // critical value at p = 0.01 is 11.345
        let ds = column_dataset(vec![1.0, 2.0, 3.0, 4.0, 4.0, 4.0]);
        let aug = generate_augmenting_sample(&ds, 2000, 9).unwrap();
        let n = aug.rows.nrows() as f64;
        let chi: f64 = [1.0, 2.0, 3.0, 4.0]
            .iter()
            .map(|v| {
                let obs = aug.rows.iter().filter(|x| *x == v).count() as f64;
                let exp = n / 4.0;
                (obs - exp).powi(2) / exp
            })
            .sum();
        assert!(chi < 11.345, "chi-square {chi}");
    }

    #[test]
    fn correlated_columns_become_independent() {
        let schema = vec![FeatureSchema::continuous("a"), FeatureSchema::continuous("b")];
        let rows = Array2::from_shape_fn((200, 2), |(i, _)| i as f64);
        let ds = Dataset::new(schema, rows, vec![0.0; 200], None).unwrap();
        let aug = generate_augmenting_sample(&ds, 100, 3).unwrap();
        let a = aug.rows.column(0).to_vec();
        let b = aug.rows.column(1).to_vec();
        assert!(pearson(&a, &b).abs() <= 0.02);
    }

    #[test]
    fn categorical_draws_all_categories_and_rejects_bad_input() {
        let schema = vec![FeatureSchema::categorical("c", ["x", "y", "z"]).unwrap()];
        let ds = Dataset::new(schema, Array2::zeros((5, 1)), vec![0.0; 5], None).unwrap();
        let aug = generate_augmenting_sample(&ds, 100, 0).unwrap();
        for c in [0.0, 1.0, 2.0] {
            assert!(aug.rows.iter().any(|v| *v == c));
        }
        assert!(generate_augmenting_sample(&ds, 0, 0).is_err());
        assert_eq!(default_multiplier(49_999), 100);
        assert_eq!(default_multiplier(50_000), 30);
    }
}
