use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;

use super::classifier::{AllocatorClassifier, ExtrapolationClassifier, G_NO};
use super::compensation::CompensationTable;
use crate::error::{invalid, Error, Result};
use crate::learner::{check_width, Predictor};

/// What the composite does with one row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Not flagged by the extrapolation classifier.
    Real,
    /// Flagged, but the allocator sent it back to the original model.
    Released,
    /// Compensated with targeted feature `k` (0-based, in targeting order).
    Compensated(usize),
}

impl Route {
    pub fn passes_through(self) -> bool {
        !matches!(self, Route::Compensated(_))
    }
}

/// The original model with compensating outputs on flagged rows.
#[derive(Debug, Clone)]
pub struct AdversarialModel {
    original: Arc<dyn Predictor>,
    extrapolation: ExtrapolationClassifier,
    allocator: Option<AllocatorClassifier>,
    compensation: CompensationTable,
    targeted: Vec<String>,
    // compensation position of each targeted feature
    slots: Vec<usize>,
}

fn check_models(f: &dyn Predictor, c: &ExtrapolationClassifier) -> Result<()> {
    check_width(c.model().as_ref(), f.n_features())
}

impl AdversarialModel {
    fn assemble(
        original: Arc<dyn Predictor>,
        extrapolation: ExtrapolationClassifier,
        allocator: Option<AllocatorClassifier>,
        compensation: CompensationTable,
        targeted: Vec<String>,
    ) -> Result<Self> {
        check_models(original.as_ref(), &extrapolation)?;
        if targeted.is_empty() {
            return Err(invalid("no targeted features"));
        }
        let mut slots = Vec::with_capacity(targeted.len());
        for name in &targeted {
            let slot = compensation
                .position(name)
                .ok_or_else(|| invalid(format!("no compensation for targeted feature `{name}`")))?;
            let idx = compensation.features()[slot].feature_index;
            if idx >= original.n_features() {
                return Err(Error::FeatureMismatch {
                    expected: original.n_features(),
                    got: idx + 1,
                });
            }
            slots.push(slot);
        }
        Ok(Self {
            original,
            extrapolation,
            allocator,
            compensation,
            targeted,
            slots,
        })
    }

    pub fn original(&self) -> &Arc<dyn Predictor> {
        &self.original
    }

    pub fn extrapolation(&self) -> &ExtrapolationClassifier {
        &self.extrapolation
    }

    pub fn allocator(&self) -> Option<&AllocatorClassifier> {
        self.allocator.as_ref()
    }

    pub fn compensation(&self) -> &CompensationTable {
        &self.compensation
    }

    pub fn targeted_features(&self) -> &[String] {
        &self.targeted
    }

    pub fn route(&self, row: &[f64]) -> Route {
        if !self.extrapolation.is_extrapolation(row) {
            return Route::Real;
        }
        match &self.allocator {
            None => Route::Compensated(0),
            Some(a) => match a.allocate(row) {
                G_NO => Route::Released,
                k => Route::Compensated(k - 1),
            },
        }
    }

    pub fn try_predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.original.n_features() {
            return Err(Error::FeatureMismatch {
                expected: self.original.n_features(),
                got: row.len(),
            });
        }
        match self.route(row) {
            Route::Real | Route::Released => Ok(self.original.predict(row)),
            Route::Compensated(k) => {
                let comp = &self.compensation.features()[self.slots[k]];
                comp.gamma_at(row[comp.feature_index])
            }
        }
    }
}

/// Single-feature composite: every flagged row takes `feature`'s
/// compensating output.
pub fn build_adversarial_single(
    f: Arc<dyn Predictor>,
    c: ExtrapolationClassifier,
    comp: CompensationTable,
    feature: &str,
) -> Result<AdversarialModel> {
    AdversarialModel::assemble(f, c, None, comp, vec![feature.to_string()])
}

/// Multi-feature composite: flagged rows are routed by the allocator.
pub fn build_adversarial_multi(
    f: Arc<dyn Predictor>,
    c: ExtrapolationClassifier,
    allocator: AllocatorClassifier,
    comp: CompensationTable,
    targeted: Vec<String>,
) -> Result<AdversarialModel> {
    if allocator.n_targets() != targeted.len() {
        return Err(invalid(format!(
            "allocator has {} target classes for {} targeted features",
            allocator.n_targets(),
            targeted.len()
        )));
    }
    AdversarialModel::assemble(f, c, Some(allocator), comp, targeted)
}

/// Errors (an off-domain categorical value, a width mismatch) come back as
/// NaN here; use [`adversarial_predict_batch`] to see them.
impl Predictor for AdversarialModel {
    fn n_features(&self) -> usize {
        self.original.n_features()
    }

    fn predict(&self, row: &[f64]) -> f64 {
        self.try_predict(row).unwrap_or(f64::NAN)
    }
}

pub fn adversarial_predict_batch(a: &AdversarialModel, rows: &Array2<f64>) -> Result<Vec<f64>> {
    if rows.nrows() == 0 {
        return Ok(Vec::new());
    }
    check_width(a.original.as_ref(), rows.ncols())?;
    let rows = rows.as_standard_layout();
    rows.as_slice()
        .expect("standard layout")
        .par_chunks(rows.ncols())
        .map(|r| a.try_predict(r))
        .collect()
}

/// Route of every row, in order.
pub fn route_batch(a: &AdversarialModel, rows: &Array2<f64>) -> Result<Vec<Route>> {
    if rows.nrows() == 0 {
        return Ok(Vec::new());
    }
    check_width(a.original.as_ref(), rows.ncols())?;
    let rows = rows.as_standard_layout();
    Ok(rows
        .as_slice()
        .expect("standard layout")
        .par_chunks(rows.ncols())
        .map(|r| a.route(r))
        .collect())
}
