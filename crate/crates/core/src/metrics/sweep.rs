use std::io::Write;

use rayon::prelude::*;

use super::{accuracy_from_values, Norm};
use crate::attack::{solve_gamma, PermutedScores, TargetPd};
use crate::error::{invalid, Result};

pub const SWEEP_THRESHOLDS: [f64; 11] = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95];

/// Cached scores for one (fold, targeted feature): the classifier's
/// probabilities and the original model's outputs on the training fold's
/// permuted rows (to fit the compensation), on the held-out fold's permuted
/// rows (to measure the attack) and on the held-out rows themselves (for
/// the TPR).
#[derive(Debug, Clone)]
pub struct SweepInput {
    pub fold: usize,
    pub target: TargetPd,
    pub fitting: PermutedScores,
    pub held_out: PermutedScores,
    pub test_probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub threshold: f64,
    pub fold: usize,
    pub feature: String,
    pub tpr: f64,
    /// `None` when the compensation could not be solved; see `failure`.
    pub accuracy: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub thresholds: Vec<f64>,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// CSV rows `threshold,fold,feature,tpr,accuracy,status`; failed
    /// points leave `accuracy` empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["threshold", "fold", "feature", "tpr", "accuracy", "status"])?;
        for p in &self.points {
            w.write_record([
                p.threshold.to_string(),
                p.fold.to_string(),
                p.feature.clone(),
                p.tpr.to_string(),
                p.accuracy.map(|a| a.to_string()).unwrap_or_default(),
                p.failure.clone().unwrap_or_else(|| "ok".into()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn for_fold_feature<'a>(&'a self, fold: usize, feature: &'a str) -> impl Iterator<Item = &'a SweepPoint> {
        self.points.iter().filter(move |p| p.fold == fold && p.feature == feature)
    }
}

fn sweep_point(input: &SweepInput, threshold: f64, norm: Norm) -> SweepPoint {
    let n_test = input.test_probabilities.len();
    let kept = input.test_probabilities.iter().filter(|&&p| p < threshold).count();
    let tpr = kept as f64 / n_test as f64;
    let lr = input.fitting.lambda_rho(threshold);
    let outcome = solve_gamma(&input.target, &lr).and_then(|comp| {
        let adversarial = input.held_out.adversarial_pd(threshold, &comp.gammas());
        accuracy_from_values(&input.held_out.original_pd(), &adversarial, &input.target.desired, norm)
    });
    let (accuracy, failure) = match outcome {
        Ok(a) => (Some(a), None),
        Err(e) => (None, Some(e.to_string())),
    };
    SweepPoint {
        threshold,
        fold: input.fold,
        feature: input.target.feature.clone(),
        tpr,
        accuracy,
        failure,
    }
}

/// Re-thresholds cached probabilities at every threshold: the compensation
/// is refitted per point, the classifier is not retrained. Points whose
/// target is unreachable are recorded as failed.
pub fn threshold_sweep(inputs: &[SweepInput], thresholds: &[f64], norm: Norm) -> Result<SweepResult> {
    if thresholds.is_empty() || thresholds.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(invalid("sweep thresholds must be non-empty and inside (0, 1)"));
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("sweep thresholds must be strictly increasing"));
    }
    for input in inputs {
        if input.test_probabilities.is_empty() {
            return Err(invalid(format!("fold {} has no held-out rows", input.fold)));
        }
        let same_grid = input.fitting.grid.values == input.target.grid.values
            && input.held_out.grid.values == input.target.grid.values;
        if !same_grid {
            return Err(invalid(format!("fold {} scores are on a different grid than the target", input.fold)));
        }
    }
    let points = thresholds
        .par_iter()
        .flat_map_iter(|&t| inputs.iter().map(move |input| sweep_point(input, t, norm)))
        .collect();
    Ok(SweepResult {
        thresholds: thresholds.to_vec(),
        points,
    })
}
