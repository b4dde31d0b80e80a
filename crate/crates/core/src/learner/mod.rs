//! Trainable predictors and the `Predictor` abstraction every explanation
//! and attack routine consumes.

mod linear;
mod mlp;
mod network;
mod registry;
pub mod model_file;

pub use linear::{train_linear, LinearModel};
pub use mlp::{train_mlp, MlpConfig, TrainedMlp};
pub use network::{Gradients, Network};
pub use registry::{Learner, LearnerRegistry, LearnerSpec, LinearLearner, MlpLearner};

use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// What a model's output means.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Regression,
    Binary,
    Multiclass(usize),
}

impl Task {
    pub fn output_width(self) -> usize {
        match self {
            Task::Regression | Task::Binary => 1,
            Task::Multiclass(k) => k,
        }
    }

    pub fn n_classes(self) -> Option<usize> {
        match self {
            Task::Regression => None,
            Task::Binary => Some(2),
            Task::Multiclass(k) => Some(k),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "regression" => Ok(Task::Regression),
            "binary" => Ok(Task::Binary),
            _ => s
                .strip_prefix("multiclass(")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|k| k.parse().ok())
                .filter(|&k: &usize| k >= 2)
                .map(Task::Multiclass)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown task `{s}`"))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::Regression => f.write_str("regression"),
            Task::Binary => f.write_str("binary"),
            Task::Multiclass(k) => write!(f, "multiclass({k})"),
        }
    }
}

/// A fitted model over rows of `n_features()` values.
///
/// `predict` returns the regression output, the class-1 probability for
/// binary models, or the most probable class index for multiclass models.
/// Implementations must be deterministic.
pub trait Predictor: Send + Sync + fmt::Debug {
    fn n_features(&self) -> usize;

    fn predict(&self, row: &[f64]) -> f64;

    /// Class probabilities; `None` for regressors.
    fn predict_class_distribution(&self, _row: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Text encoding readable by [`LearnerRegistry::load`].
    fn to_model_text(&self) -> Result<String> {
        Err(Error::ModelFormat(format!(
            "{self:?} does not support serialization"
        )))
    }
}

impl<P: Predictor + ?Sized> Predictor for Arc<P> {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }
    fn predict(&self, row: &[f64]) -> f64 {
        (**self).predict(row)
    }
    fn predict_class_distribution(&self, row: &[f64]) -> Option<Vec<f64>> {
        (**self).predict_class_distribution(row)
    }
    fn to_model_text(&self) -> Result<String> {
        (**self).to_model_text()
    }
}

pub(crate) fn check_width(model: &dyn Predictor, width: usize) -> Result<()> {
    if model.n_features() != width {
        return Err(Error::FeatureMismatch {
            expected: model.n_features(),
            got: width,
        });
    }
    Ok(())
}

/// Row-wise predictions; element `i` is exactly `model.predict(row i)`.
pub fn predict_batch(model: &dyn Predictor, rows: &Array2<f64>) -> Result<Vec<f64>> {
    if rows.nrows() == 0 {
        return Ok(Vec::new());
    }
    check_width(model, rows.ncols())?;
    let rows = rows.as_standard_layout();
    Ok(rows
        .as_slice()
        .expect("standard layout")
        .par_chunks(rows.ncols())
        .map(|r| model.predict(r))
        .collect())
}

/// Row-wise class distributions for classifiers.
pub fn predict_distribution_batch(
    model: &dyn Predictor,
    rows: &Array2<f64>,
) -> Result<Vec<Vec<f64>>> {
    if rows.nrows() == 0 {
        return Ok(Vec::new());
    }
    check_width(model, rows.ncols())?;
    let rows = rows.as_standard_layout();
    rows.as_slice()
        .expect("standard layout")
        .par_chunks(rows.ncols())
        .map(|r| {
            model.predict_class_distribution(r).ok_or_else(|| {
                Error::InvalidArgument("model does not produce class distributions".into())
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug)]
    struct Sum;
    impl Predictor for Sum {
        fn n_features(&self) -> usize {
            2
        }
        fn predict(&self, row: &[f64]) -> f64 {
            row[0] + row[1]
        }
    }

    #[test]
    fn batch_contracts() {
        assert!(predict_batch(&Sum, &Array2::zeros((0, 2))).unwrap().is_empty());
        let rows = ndarray::array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]];
        assert_eq!(predict_batch(&Sum, &rows).unwrap(), vec![3.0; 3]);
        let bad = ndarray::array![[1.0, 2.0, 3.0]];
        assert!(matches!(
            predict_batch(&Sum, &bad),
            Err(Error::FeatureMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn task_text_round_trip() {
        for t in [Task::Regression, Task::Binary, Task::Multiclass(3)] {
            assert_eq!(Task::parse(&t.to_string()).unwrap(), t);
        }
        assert!(Task::parse("multiclass(1)").is_err());
    }
}
