use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};

/// Assignment of every row to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    assignments: Vec<usize>,
    k: usize,
}

impl FoldSplit {
    pub fn from_assignments(assignments: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(invalid("fold count must be positive"));
        }
        let mut sizes = vec![0usize; k];
        for &a in &assignments {
            if a >= k {
                return Err(invalid(format!("fold index {a} out of range for k={k}")));
            }
            sizes[a] += 1;
        }
        if sizes.contains(&0) {
            return Err(invalid("every fold must contain at least one row"));
        }
        Ok(Self { assignments, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    /// Row indices held out in `fold`, ascending.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    /// Row indices used for training when `fold` is held out, ascending.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }
}

/// Shuffles row indices with a seeded generator and deals them round-robin,
/// so fold sizes differ by at most one.
pub fn kfold_split(n_rows: usize, k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 || k > n_rows {
        return Err(invalid(format!(
            "fold count {k} must be between 2 and the row count {n_rows}"
        )));
    }
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignments = vec![0; n_rows];
    for (pos, &row) in order.iter().enumerate() {
        assignments[row] = pos % k;
    }
    FoldSplit::from_assignments(assignments, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_division() {
        let split = kfold_split(10, 5, 1).unwrap();
        assert_eq!(split.fold_sizes(), vec![2; 5]);
    }

    #[test]
    fn remainder_is_spread() {
        let split = kfold_split(11, 5, 1).unwrap();
        let mut sizes = split.fold_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 2, 2, 2, 3]);
    }

    #[test]
    fn deterministic_given_seed() {
        assert_eq!(kfold_split(50, 5, 9).unwrap(), kfold_split(50, 5, 9).unwrap());
        assert_ne!(kfold_split(50, 5, 9).unwrap(), kfold_split(50, 5, 10).unwrap());
    }

    #[test]
    fn k_out_of_range() {
        assert!(kfold_split(10, 1, 0).is_err());
        assert!(kfold_split(3, 4, 0).is_err());
    }

    proptest! {
        #[test]
        fn test_folds_partition_rows(n in 2usize..200, k in 2usize..10, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let split = kfold_split(n, k, seed).unwrap();
            let mut seen = vec![0u32; n];
            for f in 0..k {
                let test = split.test_indices(f);
                let train = split.train_indices(f);
                prop_assert_eq!(test.len() + train.len(), n);
                for i in test { seen[i] += 1; }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            let sizes = split.fold_sizes();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }
}
