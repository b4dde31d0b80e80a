use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::grid::type7_quantile;
use super::pd::mean_in_row_order;
use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::learner::{predict_batch, Predictor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Mse,
    /// Binary log loss on class-1 probabilities, clipped to [1e-15, 1 - 1e-15].
    CrossEntropy,
}

impl LossKind {
    fn mean_loss(self, predictions: &[f64], target: &[f64]) -> f64 {
        match self {
            LossKind::Mse => mean_in_row_order(
                predictions.iter().zip(target).map(|(p, y)| (p - y) * (p - y)),
            ),
            LossKind::CrossEntropy => mean_in_row_order(predictions.iter().zip(target).map(
                |(p, y)| {
                    let p = p.clamp(1e-15, 1.0 - 1e-15);
                    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
                },
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImportance {
    pub feature: String,
    /// One loss increase per repeat.
    pub estimates: Vec<f64>,
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
}

impl FeatureImportance {
    fn new(feature: String, estimates: Vec<f64>) -> Self {
        let mut sorted = estimates.clone();
        sorted.sort_by(f64::total_cmp);
        Self {
            feature,
            median: type7_quantile(&sorted, 0.5),
            p10: type7_quantile(&sorted, 0.1),
            p90: type7_quantile(&sorted, 0.9),
            estimates,
        }
    }

    /// Width of the 10th-90th percentile band.
    pub fn spread(&self) -> f64 {
        self.p90 - self.p10
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PfiResult {
    pub baseline_loss: f64,
    pub features: Vec<FeatureImportance>,
}

impl PfiResult {
    pub fn get(&self, feature: &str) -> Option<&FeatureImportance> {
        self.features.iter().find(|f| f.feature == feature)
    }

    /// Rank of each feature by median importance, 1 = most important.
    pub fn median_ranks(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.features.len()).collect();
        order.sort_by(|&a, &b| self.features[b].median.total_cmp(&self.features[a].median));
        let mut ranks = vec![0; order.len()];
        for (r, &i) in order.iter().enumerate() {
            ranks[i] = r + 1;
        }
        ranks
    }

    pub fn rank_of(&self, feature: &str) -> Option<usize> {
        let i = self.features.iter().position(|f| f.feature == feature)?;
        Some(self.median_ranks()[i])
    }
}

/// Loss increase after shuffling each column, repeated `repeats` times.
///
/// Repeat `r` shuffles with the permutation drawn from stream `r` of the
/// seeded generator, shared by all features, so a feature's estimates do not
/// depend on which other columns exist or how they are ordered.
pub fn compute_pfi(
    model: &dyn Predictor,
    dataset: &Dataset,
    loss: LossKind,
    repeats: usize,
    seed: u64,
) -> Result<PfiResult> {
    if repeats == 0 {
        return Err(invalid("permutation importance needs at least one repeat"));
    }
    let target = dataset.target();
    let baseline_loss = loss.mean_loss(&predict_batch(model, dataset.rows())?, target);
    let n = dataset.n_rows();
    let permutations: Vec<Vec<usize>> = (0..repeats)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            perm
        })
        .collect();

    let mut features = Vec::with_capacity(dataset.n_features());
    for (j, schema) in dataset.schema().iter().enumerate() {
        let mut estimates = Vec::with_capacity(repeats);
        for perm in &permutations {
            let mut rows = dataset.rows().clone();
            let column = dataset.column(j);
            for (i, &src) in perm.iter().enumerate() {
                rows[[i, j]] = column[src];
            }
            let shuffled = loss.mean_loss(&predict_batch(model, &rows)?, target);
            estimates.push(shuffled - baseline_loss);
        }
        features.push(FeatureImportance::new(schema.name.clone(), estimates));
    }
    Ok(PfiResult {
        baseline_loss,
        features,
    })
}
