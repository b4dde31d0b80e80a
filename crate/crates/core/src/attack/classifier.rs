use std::sync::Arc;

use ndarray::{concatenate, Array2, Axis};

use super::augment::AugmentingSample;
use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::explain::PermutedPdData;
use crate::learner::{predict_batch, train_mlp, MlpConfig, Predictor, Task};

/// Binary model scoring how likely a row is an extrapolated one, plus the
/// cut-off above which the row is treated as such.
#[derive(Debug, Clone)]
pub struct ExtrapolationClassifier {
    model: Arc<dyn Predictor>,
    threshold: f64,
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(invalid(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    Ok(())
}

impl ExtrapolationClassifier {
    pub fn new(model: Arc<dyn Predictor>, threshold: f64) -> Result<Self> {
        check_threshold(threshold)?;
        Ok(Self { model, threshold })
    }

    pub fn with_threshold(&self, threshold: f64) -> Result<Self> {
        Self::new(self.model.clone(), threshold)
    }

    pub fn model(&self) -> &Arc<dyn Predictor> {
        &self.model
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn probability(&self, row: &[f64]) -> f64 {
        self.model.predict(row)
    }

    /// A probability equal to the threshold counts as extrapolation.
    pub fn flags_probability(&self, probability: f64) -> bool {
        probability >= self.threshold
    }

    pub fn is_extrapolation(&self, row: &[f64]) -> bool {
        self.flags_probability(self.probability(row))
    }

    pub fn probabilities(&self, rows: &Array2<f64>) -> Result<Vec<f64>> {
        predict_batch(self.model.as_ref(), rows)
    }
}

/// Trains the binary model on real rows (label 0) and augmenting rows
/// (label 1). Class weights come from `config`.
pub fn train_extrapolation_classifier(
    dataset: &Dataset,
    augmenting: &AugmentingSample,
    config: &MlpConfig,
    threshold: f64,
) -> Result<ExtrapolationClassifier> {
    check_threshold(threshold)?;
    if config.task != Task::Binary {
        return Err(invalid("the extrapolation classifier must use the binary task"));
    }
    if augmenting.rows.ncols() != dataset.n_features() {
        return Err(Error::FeatureMismatch {
            expected: dataset.n_features(),
            got: augmenting.rows.ncols(),
        });
    }
    let rows = concatenate(Axis(0), &[dataset.rows().view(), augmenting.rows.view()])
        .map_err(|e| invalid(e.to_string()))?;
    let mut target = vec![0.0; dataset.n_rows()];
    target.resize(rows.nrows(), 1.0);
    let train = Dataset::new(dataset.schema().to_vec(), rows, target, None)?;
    let model = train_mlp(&train, config)?;
    ExtrapolationClassifier::new(model.into_arc(), threshold)
}

/// Index of the allocator's class for real rows.
pub const G_NO: usize = 0;

/// Multiclass model routing a flagged row to targeted feature `k`
/// (classes `1..=q`) or back to the original model (class 0).
#[derive(Debug, Clone)]
pub struct AllocatorClassifier {
    model: Arc<dyn Predictor>,
    n_targets: usize,
}

impl AllocatorClassifier {
    pub fn new(model: Arc<dyn Predictor>, n_targets: usize) -> Result<Self> {
        if n_targets == 0 {
            return Err(invalid("an allocator needs at least one targeted feature"));
        }
        Ok(Self { model, n_targets })
    }

    pub fn model(&self) -> &Arc<dyn Predictor> {
        &self.model
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    pub fn n_classes(&self) -> usize {
        self.n_targets + 1
    }

    /// Predicted class; anything outside `0..=q` is treated as [`G_NO`].
    pub fn allocate(&self, row: &[f64]) -> usize {
        let k = self.model.predict(row);
        if k >= 0.0 && k.fract() == 0.0 && (k as usize) <= self.n_targets {
            k as usize
        } else {
            G_NO
        }
    }
}

/// Labels for the allocator's training rows: every real row gets [`G_NO`],
/// every permuted row of target `k` flagged by `c` gets `k + 1`.
pub fn allocator_training_set(
    dataset: &Dataset,
    permuted_sets: &[PermutedPdData<'_>],
    c: &ExtrapolationClassifier,
) -> Result<Dataset> {
    let mut parts = vec![dataset.rows().clone()];
    let mut target = vec![G_NO as f64; dataset.n_rows()];
    for (k, permuted) in permuted_sets.iter().enumerate() {
        let mut flagged_total = 0;
        for p in 0..permuted.grid().len() {
            let block = permuted.block(p);
            let probs = c.probabilities(&block)?;
            let keep: Vec<usize> = (0..block.nrows())
                .filter(|&i| c.flags_probability(probs[i]))
                .collect();
            flagged_total += keep.len();
            target.extend(std::iter::repeat_n((k + 1) as f64, keep.len()));
            parts.push(block.select(Axis(0), &keep));
        }
        if flagged_total == 0 {
            return Err(Error::Unmanipulable(permuted.grid().feature.clone()));
        }
    }
    let views: Vec<_> = parts.iter().map(|a| a.view()).collect();
    let rows = concatenate(Axis(0), &views).map_err(|e| invalid(e.to_string()))?;
    Dataset::new(dataset.schema().to_vec(), rows, target, None)
}

pub fn train_allocator(
    dataset: &Dataset,
    permuted_sets: &[PermutedPdData<'_>],
    c: &ExtrapolationClassifier,
    config: &MlpConfig,
) -> Result<AllocatorClassifier> {
    let q = permuted_sets.len();
    if q < 2 {
        return Err(invalid(format!("an allocator needs at least 2 targeted features, got {q}")));
    }
    if config.task != Task::Multiclass(q + 1) {
        return Err(invalid(format!(
            "the allocator must use the multiclass({}) task, got {}",
            q + 1,
            config.task
        )));
    }
    let train = allocator_training_set(dataset, permuted_sets, c)?;
    let model = train_mlp(&train, config)?;
    AllocatorClassifier::new(model.into_arc(), q)
}
