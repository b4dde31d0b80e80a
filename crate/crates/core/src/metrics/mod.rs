//! How well an attack hits its targets and how much of the original model
//! it keeps.

mod sweep;

pub use sweep::{threshold_sweep, SweepInput, SweepPoint, SweepResult, SWEEP_THRESHOLDS};

use ndarray::Array2;

use crate::attack::{route_batch, AdversarialModel};
use crate::error::{invalid, Error, Result};
use crate::explain::PdCurve;
use crate::learner::{predict_batch, Predictor};

/// Norm used for curve distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Norm {
    #[default]
    L2,
    L1,
    Linf,
}

impl Norm {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l2" => Ok(Norm::L2),
            "l1" => Ok(Norm::L1),
            "linf" => Ok(Norm::Linf),
            other => Err(invalid(format!("unknown norm `{other}` (expected l2, l1 or linf)"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Norm::L2 => "l2",
            Norm::L1 => "l1",
            Norm::Linf => "linf",
        }
    }

    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            Norm::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Norm::L1 => diffs.sum(),
            Norm::Linf => diffs.fold(0.0, f64::max),
        }
    }
}

/// `1 - |adversarial - target| / |original - target|`.
///
/// When the original already equals the target the ratio is undefined:
/// the result is 1 if the adversarial curve also equals it, otherwise
/// [`Error::DegenerateTarget`].
pub fn accuracy_from_values(original: &[f64], adversarial: &[f64], target: &[f64], norm: Norm) -> Result<f64> {
    if original.len() != target.len() || adversarial.len() != target.len() {
        return Err(invalid("curves must share one grid"));
    }
    let num = norm.distance(adversarial, target);
    let den = norm.distance(original, target);
    if den == 0.0 {
        return if num == 0.0 { Ok(1.0) } else { Err(Error::DegenerateTarget) };
    }
    Ok(1.0 - num / den)
}

pub fn accuracy_of_attack(original: &PdCurve, adversarial: &PdCurve, target: &PdCurve, norm: Norm) -> Result<f64> {
    if original.grid.values != target.grid.values || adversarial.grid.values != target.grid.values {
        return Err(invalid(format!("curves for `{}` are on different grids", target.feature)));
    }
    accuracy_from_values(&original.values, &adversarial.values, &target.values, norm)
}

/// Share of rows the composite leaves with the original model.
pub fn true_positive_rate(a: &AdversarialModel, rows: &Array2<f64>) -> Result<f64> {
    if rows.nrows() == 0 {
        return Err(Error::Empty("true positive rate of an empty test set".into()));
    }
    let routes = route_batch(a, rows)?;
    Ok(routes.iter().filter(|r| r.passes_through()).count() as f64 / rows.nrows() as f64)
}

/// TPR next to the share of rows where the composite's output is bitwise
/// the original's; the two agree by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fidelity {
    pub n_rows: usize,
    pub tpr: f64,
    pub unchanged: f64,
}

pub fn fidelity_report(a: &AdversarialModel, f: &dyn Predictor, rows: &Array2<f64>) -> Result<Fidelity> {
    let tpr = true_positive_rate(a, rows)?;
    let adversarial = predict_batch(a, rows)?;
    let original = predict_batch(f, rows)?;
    let same = adversarial
        .iter()
        .zip(&original)
        .filter(|(x, y)| x.to_bits() == y.to_bits())
        .count();
    Ok(Fidelity {
        n_rows: rows.nrows(),
        tpr,
        unchanged: same as f64 / rows.nrows() as f64,
    })
}

/// One targeted feature's curves and score at one operating point.
#[derive(Debug, Clone)]
pub struct FeatureReport {
    pub feature: String,
    pub original: PdCurve,
    pub adversarial: PdCurve,
    pub target: PdCurve,
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct AttackReport {
    pub fold: usize,
    pub threshold: f64,
    pub tpr: f64,
    pub features: Vec<FeatureReport>,
}

impl AttackReport {
    /// CSV rows `fold,threshold,feature,tpr,accuracy`.
    pub fn write_csv<W: std::io::Write>(reports: &[AttackReport], writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["fold", "threshold", "feature", "tpr", "accuracy"])?;
        for r in reports {
            for f in &r.features {
                w.write_record([
                    r.fold.to_string(),
                    r.threshold.to_string(),
                    f.feature.clone(),
                    r.tpr.to_string(),
                    f.accuracy.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
