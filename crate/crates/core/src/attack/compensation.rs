use rayon::prelude::*;

use super::classifier::ExtrapolationClassifier;
use super::target::TargetPd;
use crate::data::FeatureKind;
use crate::error::{invalid, Error, Result};
use crate::explain::{mean_in_row_order, GridSpec, PermutedPdData};
use crate::learner::{predict_batch, Predictor};

/// Share of permuted rows flagged at one grid value, and the mean
/// prediction over the rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaRho {
    pub lambda: f64,
    /// Meaningless when every row is flagged; stored as 0 there and always
    /// multiplied by `1 - lambda = 0`.
    pub rho: f64,
}

/// Classifier probabilities and model outputs on every permuted block,
/// kept so the split can be recomputed for any threshold without
/// re-predicting.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutedScores {
    pub grid: GridSpec,
    /// `probabilities[p][i]`: classifier score of row `i` at grid value `p`.
    pub probabilities: Vec<Vec<f64>>,
    pub predictions: Vec<Vec<f64>>,
}

impl PermutedScores {
    pub fn compute(
        permuted: &PermutedPdData<'_>,
        classifier: &dyn Predictor,
        original: &dyn Predictor,
    ) -> Result<Self> {
        let grid = permuted.grid().clone();
        let per_block: Vec<(Vec<f64>, Vec<f64>)> = (0..grid.len())
            .into_par_iter()
            .map(|p| {
                let block = permuted.block(p);
                let probs = predict_batch(classifier, &block)?;
                let preds = predict_batch(original, &block)?;
                if let Some(row) = preds.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinitePrediction {
                        grid_index: p,
                        grid_value: grid.values[p],
                        row,
                    });
                }
                Ok((probs, preds))
            })
            .collect::<Result<_>>()?;
        let (probabilities, predictions) = per_block.into_iter().unzip();
        Ok(Self {
            grid,
            probabilities,
            predictions,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.predictions.first().map_or(0, Vec::len)
    }

    /// λ̂ and ρ̂ at every grid value for the given cut-off.
    pub fn lambda_rho(&self, threshold: f64) -> Vec<LambdaRho> {
        self.probabilities
            .iter()
            .zip(&self.predictions)
            .map(|(probs, preds)| {
                let n = preds.len();
                let flagged = probs.iter().filter(|&&p| p >= threshold).count();
                let kept = preds
                    .iter()
                    .zip(probs)
                    .filter(|(_, &p)| p < threshold)
                    .map(|(f, _)| *f);
                let rho = if flagged == n {
                    0.0
                } else {
                    kept.sum::<f64>() / (n - flagged) as f64
                };
                LambdaRho {
                    lambda: flagged as f64 / n as f64,
                    rho,
                }
            })
            .collect()
    }

    /// PD of the single-feature composite on these rows: flagged rows take
    /// `gamma[p]`, the rest keep the original prediction.
    pub fn adversarial_pd(&self, threshold: f64, gamma: &[f64]) -> Vec<f64> {
        self.probabilities
            .iter()
            .zip(&self.predictions)
            .zip(gamma)
            .map(|((probs, preds), &g)| {
                mean_in_row_order(
                    preds
                        .iter()
                        .zip(probs)
                        .map(|(&f, &p)| if p >= threshold { g } else { f }),
                )
            })
            .collect()
    }

    pub fn original_pd(&self) -> Vec<f64> {
        self.predictions
            .iter()
            .map(|preds| mean_in_row_order(preds.iter().copied()))
            .collect()
    }
}

pub fn estimate_lambda_rho(
    permuted: &PermutedPdData<'_>,
    c: &ExtrapolationClassifier,
    f: &dyn Predictor,
) -> Result<Vec<LambdaRho>> {
    Ok(PermutedScores::compute(permuted, c.model().as_ref(), f)?.lambda_rho(c.threshold()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompensationEntry {
    pub value: f64,
    pub lambda: f64,
    pub rho: f64,
    pub gamma: f64,
    pub desired: f64,
}

impl CompensationEntry {
    /// `(1 - λ̂)·ρ̂ + λ̂·γ̂`, the PD value the entry produces.
    pub fn achieved(&self) -> f64 {
        (1.0 - self.lambda) * self.rho + self.lambda * self.gamma
    }
}

/// Compensating outputs for one targeted feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCompensation {
    pub feature: String,
    pub feature_index: usize,
    pub kind: FeatureKind,
    /// Sorted by grid value.
    pub entries: Vec<CompensationEntry>,
}

/// γ̂ from the target and the fitted split; λ̂ = 0 anywhere is an error.
pub fn solve_gamma(target: &TargetPd, lambda_rho: &[LambdaRho]) -> Result<FeatureCompensation> {
    if lambda_rho.len() != target.grid.len() {
        return Err(invalid(format!(
            "{} lambda/rho pairs for a grid of {} values",
            lambda_rho.len(),
            target.grid.len()
        )));
    }
    let mut entries = Vec::with_capacity(lambda_rho.len());
    for ((&value, &desired), lr) in target.grid.values.iter().zip(&target.desired).zip(lambda_rho) {
        if !(lr.lambda > 0.0) {
            return Err(Error::UnreachableTarget {
                feature: target.feature.clone(),
                grid_value: value,
            });
        }
        let gamma = (desired - (1.0 - lr.lambda) * lr.rho) / lr.lambda;
        entries.push(CompensationEntry {
            value,
            lambda: lr.lambda,
            rho: lr.rho,
            gamma,
            desired,
        });
    }
    FeatureCompensation::new(
        target.feature.clone(),
        target.grid.feature_index,
        target.grid.kind,
        entries,
    )
}

impl FeatureCompensation {
    pub fn new(
        feature: String,
        feature_index: usize,
        kind: FeatureKind,
        entries: Vec<CompensationEntry>,
    ) -> Result<Self> {
        if entries.is_empty() {
            return Err(invalid(format!("no compensation entries for `{feature}`")));
        }
        if entries.windows(2).any(|w| !(w[0].value < w[1].value)) {
            return Err(invalid(format!("grid of `{feature}` is not strictly increasing")));
        }
        for e in &entries {
            let finite = [e.value, e.lambda, e.rho, e.gamma, e.desired].iter().all(|v| v.is_finite());
            if !finite || !(e.lambda > 0.0 && e.lambda <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "bad compensation entry for `{feature}` at {}: lambda {} gamma {}",
                    e.value, e.lambda, e.gamma
                )));
            }
        }
        Ok(Self {
            feature,
            feature_index,
            kind,
            entries,
        })
    }

    pub fn grid_values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.gamma).collect()
    }

    pub fn desired(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.desired).collect()
    }

    /// Compensating output at `x`: exact on grid values; numeric features
    /// interpolate linearly between neighbours and clamp beyond the ends;
    /// categorical values must be on the grid.
    pub fn gamma_at(&self, x: f64) -> Result<f64> {
        let e = &self.entries;
        let i = e.partition_point(|en| en.value < x);
        if i < e.len() && e[i].value == x {
            return Ok(e[i].gamma);
        }
        if self.kind == FeatureKind::Categorical || !x.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "`{}` value {x} has no compensating output",
                self.feature
            )));
        }
        if i == 0 {
            return Ok(e[0].gamma);
        }
        if i == e.len() {
            return Ok(e[e.len() - 1].gamma);
        }
        let (lo, hi) = (&e[i - 1], &e[i]);
        let t = (x - lo.value) / (hi.value - lo.value);
        Ok(lo.gamma + t * (hi.gamma - lo.gamma))
    }

    /// Largest `|achieved - desired|` over the grid.
    pub fn max_identity_error(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| (e.achieved() - e.desired).abs())
            .fold(0.0, f64::max)
    }

    /// Grid values whose γ̂ falls outside `[lo, hi]`.
    pub fn out_of_range(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.entries
            .iter()
            .filter(|e| e.gamma < lo || e.gamma > hi)
            .map(|e| e.value)
            .collect()
    }
}

/// Compensation for every targeted feature, in targeting order.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensationTable {
    features: Vec<FeatureCompensation>,
}

impl CompensationTable {
    pub fn new(features: Vec<FeatureCompensation>) -> Result<Self> {
        for (i, f) in features.iter().enumerate() {
            if features[..i].iter().any(|g| g.feature == f.feature) {
                return Err(invalid(format!("feature `{}` compensated twice", f.feature)));
            }
        }
        Ok(Self { features })
    }

    pub fn features(&self) -> &[FeatureCompensation] {
        &self.features
    }

    pub fn get(&self, feature: &str) -> Option<&FeatureCompensation> {
        self.features.iter().find(|f| f.feature == feature)
    }

    pub fn position(&self, feature: &str) -> Option<usize> {
        self.features.iter().position(|f| f.feature == feature)
    }

    pub fn max_identity_error(&self) -> f64 {
        self.features
            .iter()
            .map(FeatureCompensation::max_identity_error)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, FeatureSchema};
    use crate::explain::{build_permuted_pd_data, compute_pd, select_grid, GridPolicy, GridSource};
    use ndarray::array;
    use proptest::prelude::*;
    use std::sync::Arc;

    struct Rule<F>(usize, F);

    impl<F: Fn(&[f64]) -> f64 + Send + Sync> Predictor for Rule<F> {
        fn n_features(&self) -> usize {
            self.0
        }
        fn predict(&self, row: &[f64]) -> f64 {
            (self.1)(row)
        }
    }

    impl<F> std::fmt::Debug for Rule<F> {
        fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
            write!(f, "Rule")
        }
    }

    fn grid(values: Vec<f64>, kind: FeatureKind) -> GridSpec {
        GridSpec {
            feature: "x".into(),
            feature_index: 0,
            kind,
            values,
            source: GridSource::Explicit,
        }
    }

    fn four_rows() -> Dataset {
        let schema = vec![FeatureSchema::continuous("x"), FeatureSchema::continuous("z")];
        Dataset::new(schema, array![[0.0, 1.0], [0.0, 2.0], [0.0, 3.0], [0.0, 4.0]], vec![0.0; 4], None)
            .unwrap()
    }

    fn c_of(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> ExtrapolationClassifier {
        ExtrapolationClassifier::new(Arc::new(Rule(2, f)), 0.5).unwrap()
    }

    #[test]
    fn brute_force_on_four_rows() {
        let ds = four_rows();
        let g = select_grid(&ds, "x", &GridPolicy::Explicit(vec![1.0, 2.0])).unwrap();
        let perm = build_permuted_pd_data(&ds, &g).unwrap();
        let f = Rule(2, |r: &[f64]| r[0] * 10.0 + r[1]);
        // flags exactly the row with z = 4
        let c = c_of(|r| if r[1] == 4.0 { 1.0 } else { 0.0 });
        let lr = estimate_lambda_rho(&perm, &c, &f).unwrap();
        for (p, v) in [1.0, 2.0].iter().enumerate() {
            assert_eq!(lr[p].lambda, 0.25);
            let naive = ((v * 10.0 + 1.0) + (v * 10.0 + 2.0) + (v * 10.0 + 3.0)) / 3.0;
            assert_eq!(lr[p].rho, naive);
        }
    }

    #[test]
    fn never_and_always_flagged() {
        let ds = four_rows();
        let g = select_grid(&ds, "x", &GridPolicy::Explicit(vec![1.0, 2.0])).unwrap();
        let perm = build_permuted_pd_data(&ds, &g).unwrap();
        let f = Rule(2, |r: &[f64]| r[0] * r[1]);
        let pd = compute_pd(&f, &perm).unwrap();
        let never = estimate_lambda_rho(&perm, &c_of(|_| 0.0), &f).unwrap();
        for (lr, v) in never.iter().zip(&pd.values) {
            assert_eq!((lr.lambda, lr.rho), (0.0, *v));
        }
        let always = estimate_lambda_rho(&perm, &c_of(|_| 1.0), &f).unwrap();
        assert!(always.iter().all(|lr| lr.lambda == 1.0 && lr.rho.is_finite()));

        let target = TargetPd::flat_at(g.clone(), 0.7).unwrap();
        let comp = solve_gamma(&target, &always).unwrap();
        assert_eq!(comp.gammas(), vec![0.7, 0.7]);
        let err = solve_gamma(&target, &never).unwrap_err();
        assert!(matches!(err, Error::UnreachableTarget { grid_value, .. } if grid_value == 1.0));
    }

    #[test]
    fn hand_substitution() {
        let g = grid(vec![0.0], FeatureKind::Continuous);
        let t = TargetPd::flat_at(g.clone(), 0.5).unwrap();
        let comp = solve_gamma(&t, &[LambdaRho { lambda: 0.4, rho: 0.6 }]).unwrap();
        assert!((comp.entries[0].gamma - 0.35).abs() < 1e-15);
        // a target already met by the unflagged rows needs gamma = rho
        let t = TargetPd::flat_at(g, 0.6).unwrap();
        let comp = solve_gamma(&t, &[LambdaRho { lambda: 0.3, rho: 0.6 }]).unwrap();
        assert!((comp.entries[0].gamma - 0.6).abs() < 1e-15);
    }

    #[test]
    fn interpolation_and_clamping() {
        let t = TargetPd::explicit(grid(vec![0.0, 1.0, 3.0], FeatureKind::Continuous), vec![1.0, 3.0, 0.0])
            .unwrap();
        let full = vec![LambdaRho { lambda: 1.0, rho: 0.0 }; 3];
        let comp = solve_gamma(&t, &full).unwrap();
        assert_eq!(comp.gamma_at(0.5).unwrap(), 2.0);
        assert_eq!(comp.gamma_at(-4.0).unwrap(), 1.0);
        assert_eq!(comp.gamma_at(9.0).unwrap(), 0.0);
        assert_eq!(comp.gamma_at(2.0).unwrap(), 1.5);

        let t = TargetPd::explicit(grid(vec![0.0, 1.0], FeatureKind::Categorical), vec![1.0, 3.0]).unwrap();
        let comp = solve_gamma(&t, &full[..2]).unwrap();
        assert_eq!(comp.gamma_at(1.0).unwrap(), 3.0);
        assert!(comp.gamma_at(0.5).is_err());
        assert!(comp.gamma_at(2.0).is_err());
    }

    #[test]
    fn lower_threshold_flags_more() {
        let ds = four_rows();
        let g = select_grid(&ds, "x", &GridPolicy::Explicit(vec![1.0, 2.0, 3.0])).unwrap();
        let perm = build_permuted_pd_data(&ds, &g).unwrap();
        let f = Rule(2, |r: &[f64]| r[0] + r[1]);
        let c = Rule(2, |r: &[f64]| (r[0] * r[1] / 12.0).min(1.0));
        let scores = PermutedScores::compute(&perm, &c, &f).unwrap();
        let mut prev = vec![0.0; 3];
        for t in [0.95, 0.8, 0.5, 0.3, 0.1, 0.05] {
            let now: Vec<f64> = scores.lambda_rho(t).iter().map(|l| l.lambda).collect();
            assert!(now.iter().zip(&prev).all(|(a, b)| a >= b));
            prev = now;
        }
    }

    proptest! {
        #[test]
        fn identity_holds_for_any_split(
            lambdas in proptest::collection::vec(0.01f64..=1.0, 1..8),
            rhos in proptest::collection::vec(-5.0f64..5.0, 8),
            desired in proptest::collection::vec(-5.0f64..5.0, 8),
        ) {
            let m = lambdas.len();
            let g = grid((0..m).map(|i| i as f64).collect(), FeatureKind::Continuous);
            let t = TargetPd::explicit(g, desired[..m].to_vec()).unwrap();
            let lr: Vec<LambdaRho> = lambdas.iter().zip(&rhos)
                .map(|(&lambda, &rho)| LambdaRho { lambda, rho: if lambda == 1.0 { 0.0 } else { rho } })
                .collect();
            let comp = solve_gamma(&t, &lr).unwrap();
            prop_assert!(comp.max_identity_error() <= 1e-9);
        }
    }
}
