//! End-to-end checks through the public API on a small simulated study.

use std::collections::BTreeMap;

use ndarray::Array2;
use pdfool::attack::{AttackManifest, TargetSpec};
use pdfool::data::{kfold_split, simulate_correlated_gaussian, FeatureKind, SimulationConfig};
use pdfool::explain::{build_permuted_pd_data, compute_ice, compute_pd, GridSource, GridSpec, PermutedPdData};
use pdfool::learner::{predict_batch, LearnerRegistry, Predictor, Task};
use pdfool::metrics::{fidelity_report, true_positive_rate, Norm};
use pdfool::study::{run_fold, stage_seed, FoldRun, ModelSource, StudyConfig};
use proptest::prelude::*;

fn small_run(targets: Vec<(String, TargetSpec)>) -> FoldRun {
    let data = simulate_correlated_gaussian(&SimulationConfig { n_rows: 300, seed: 11, ..SimulationConfig::default() }).unwrap();
    let quick: BTreeMap<String, String> = [("max_epochs".to_string(), "3".to_string())].into();
    let config = StudyConfig {
        model: ModelSource::Learn { learner: "linear".into(), options: BTreeMap::new() },
        task: Task::Regression,
        extrapolation: quick.clone(),
        allocator: quick,
        threshold: 0.5,
        multiplier: Some(20),
        grid_points: 8,
        targets,
        folds: 3,
        seed: 5,
    };
    let split = kfold_split(300, 3, stage_seed(5, "folds", 0)).unwrap();
    run_fold(&data, &split, 1, &config, &LearnerRegistry::with_builtins()).unwrap()
}

#[test]
fn single_feature_run_meets_its_target_in_sample() {
    let run = small_run(vec![("x1".into(), TargetSpec::Flat(Some(0.5)))]);
    assert!(run.in_sample_identity_error() < 1e-9);
    let report = run.report(Norm::L2).unwrap();
    assert_eq!(report.features.len(), 1);
    assert!((0.0..=1.0).contains(&report.tpr));
    let fid = fidelity_report(&run.attack, run.original.as_ref(), run.test.rows()).unwrap();
    assert_eq!(fid.unchanged, fid.tpr);
}

#[test]
fn saved_attack_rebuilds_to_the_same_predictions() {
    let run = small_run(vec![
        ("x1".into(), TargetSpec::Flat(None)),
        ("x6".into(), TargetSpec::Linear { slope: 2.0, intercept: None }),
    ]);
    let allocator = run.allocator.as_ref().expect("two targets train an allocator");
    let manifest = AttackManifest {
        threshold: run.extrapolation.threshold(),
        original: "f".into(),
        extrapolation: "c".into(),
        allocator: Some("g".into()),
        targets: run.attack.targeted_features().to_vec(),
        compensation: run.compensation.clone(),
    };
    let texts: BTreeMap<&str, String> = [
        ("f", run.original.to_model_text().unwrap()),
        ("c", run.extrapolation.model().to_model_text().unwrap()),
        ("g", allocator.model().to_model_text().unwrap()),
    ]
    .into();
    let registry = LearnerRegistry::with_builtins();
    let parsed = AttackManifest::parse(&manifest.to_text()).unwrap();
    let rebuilt = parsed.build(|name| registry.load(&texts[name])).unwrap();
    let a = predict_batch(&run.attack, run.test.rows()).unwrap();
    let b = predict_batch(&rebuilt, run.test.rows()).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_eq!(
        true_positive_rate(&run.attack, run.test.rows()).unwrap(),
        true_positive_rate(&rebuilt, run.test.rows()).unwrap()
    );
}

#[test]
fn pd_of_the_composite_on_held_out_rows_is_finite() {
    let run = small_run(vec![("x6".into(), TargetSpec::Linear { slope: 1.0, intercept: Some(0.0) })]);
    let permuted = build_permuted_pd_data(&run.test, &run.targets[0].grid).unwrap();
    let pd = compute_pd(&run.attack, &permuted).unwrap();
    assert!(pd.values.iter().all(|v| v.is_finite()));
    let ice = compute_ice(&run.attack, &permuted).unwrap();
    assert_eq!(ice.pd(), pd.values);
}

#[derive(Debug)]
struct Weighted(Vec<f64>);

impl Predictor for Weighted {
    fn n_features(&self) -> usize {
        self.0.len()
    }
    fn predict(&self, row: &[f64]) -> f64 {
        row.iter().zip(&self.0).map(|(x, w)| (x * w).tanh()).sum()
    }
}

fn grid(values: Vec<f64>) -> GridSpec {
    GridSpec {
        feature: "x1".into(),
        feature_index: 0,
        kind: FeatureKind::Continuous,
        values,
        source: GridSource::Explicit,
    }
}

#[derive(Debug)]
struct Mix(f64, Weighted, Weighted);

impl Predictor for Mix {
    fn n_features(&self) -> usize {
        self.1.n_features()
    }
    fn predict(&self, row: &[f64]) -> f64 {
        self.0 * self.1.predict(row) + self.2.predict(row)
    }
}

fn rows_from(cells: &[f64]) -> Array2<f64> {
    let n = cells.len() / 3;
    Array2::from_shape_vec((n, 3), cells[..n * 3].to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pd_is_linear_in_the_model(
        cells in prop::collection::vec(-3.0f64..3.0, 3..60),
        values in prop::collection::vec(-3.0f64..3.0, 1..8),
        wa in prop::collection::vec(-2.0f64..2.0, 3),
        wb in prop::collection::vec(-2.0f64..2.0, 3),
        alpha in -2.0f64..2.0,
    ) {
        let rows = rows_from(&cells);
        let permuted = PermutedPdData::new(&rows, grid(values)).unwrap();
        let pa = compute_pd(&Weighted(wa.clone()), &permuted).unwrap().values;
        let pb = compute_pd(&Weighted(wb.clone()), &permuted).unwrap().values;
        let mix = Mix(alpha, Weighted(wa), Weighted(wb));
        let pm = compute_pd(&mix, &permuted).unwrap().values;
        for k in 0..pm.len() {
            prop_assert!((pm[k] - (alpha * pa[k] + pb[k])).abs() < 1e-12);
        }
        prop_assert_eq!(compute_ice(&mix, &permuted).unwrap().pd(), pm);
    }

    #[test]
    fn pd_is_flat_when_the_model_ignores_the_feature(
        cells in prop::collection::vec(-3.0f64..3.0, 3..60),
        values in prop::collection::vec(-3.0f64..3.0, 1..8),
        w in prop::collection::vec(-2.0f64..2.0, 2),
    ) {
        let rows = rows_from(&cells);
        let permuted = PermutedPdData::new(&rows, grid(values)).unwrap();
        let pd = compute_pd(&Weighted(vec![0.0, w[0], w[1]]), &permuted).unwrap().values;
        prop_assert!(pd.iter().all(|v| v.to_bits() == pd[0].to_bits()));
    }
}
