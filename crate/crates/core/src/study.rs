//! One fold of the full attack: fit the original model, train the
//! classifiers, solve the compensation and score everything needed for
//! reports and sweeps.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::attack::{
    build_adversarial_multi, build_adversarial_single, default_multiplier, generate_augmenting_sample,
    solve_gamma, train_allocator, train_extrapolation_classifier, AdversarialModel, AllocatorClassifier,
    CompensationTable, ExtrapolationClassifier, PermutedScores, TargetPd, TargetSpec,
};
use crate::data::{Dataset, FoldSplit};
use crate::error::{invalid, Result};
use crate::explain::{
    build_permuted_pd_data, compute_pd, mean_in_row_order, select_grid, CurveKind, GridPolicy, PdCurve,
};
use crate::learner::{predict_batch, LearnerRegistry, LearnerSpec, MlpLearner, Predictor, Task};
use crate::metrics::{accuracy_of_attack, true_positive_rate, AttackReport, FeatureReport, Norm, SweepInput};

/// Where the original model comes from.
#[derive(Debug, Clone)]
pub enum ModelSource {
    /// Fit a registered learner on each training fold.
    Learn { learner: String, options: BTreeMap<String, String> },
    /// Use one already-trained model for every fold.
    Fixed(Arc<dyn Predictor>),
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub model: ModelSource,
    pub task: Task,
    /// MLP options for the extrapolation classifier (binary task implied).
    pub extrapolation: BTreeMap<String, String>,
    /// MLP options for the allocator (multiclass task implied).
    pub allocator: BTreeMap<String, String>,
    pub threshold: f64,
    /// `None` picks 30 or 100 from the training size.
    pub multiplier: Option<usize>,
    /// Quantile points for continuous grids.
    pub grid_points: usize,
    pub targets: Vec<(String, TargetSpec)>,
    pub folds: usize,
    pub seed: u64,
}

impl StudyConfig {
    pub fn validate(&self, dataset: &Dataset) -> Result<()> {
        if self.targets.is_empty() {
            return Err(invalid("no targeted features"));
        }
        for (i, (name, _)) in self.targets.iter().enumerate() {
            dataset.feature_index(name)?;
            if self.targets[..i].iter().any(|(n, _)| n == name) {
                return Err(invalid(format!("feature `{name}` targeted twice")));
            }
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(invalid(format!("threshold must lie in (0, 1), got {}", self.threshold)));
        }
        if self.folds < 2 {
            return Err(invalid("need at least 2 folds"));
        }
        if self.grid_points < 2 {
            return Err(invalid("need at least 2 grid points"));
        }
        if self.multiplier == Some(0) {
            return Err(invalid("augmenting multiplier must be at least 1"));
        }
        Ok(())
    }
}

/// Per-stage seed derived from the root seed (SplitMix64 finalizer).
pub fn stage_seed(root: u64, stage: &str, fold: usize) -> u64 {
    let mut z = root ^ (fold as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    for b in stage.bytes() {
        z = (z ^ b as u64).wrapping_mul(0x100_0000_01B3);
    }
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct FoldRun {
    pub fold: usize,
    pub original: Arc<dyn Predictor>,
    pub extrapolation: ExtrapolationClassifier,
    pub allocator: Option<AllocatorClassifier>,
    pub targets: Vec<TargetPd>,
    pub compensation: CompensationTable,
    /// Multi-feature composite when two or more features are targeted.
    pub attack: AdversarialModel,
    /// Scores on the training fold's permuted rows, one per target.
    pub fitting: Vec<PermutedScores>,
    /// Scores on the held-out fold's permuted rows, one per target.
    pub held_out: Vec<PermutedScores>,
    /// Classifier probabilities on the held-out rows.
    pub test_probabilities: Vec<f64>,
    pub train: Dataset,
    pub test: Dataset,
}

pub fn run_fold(
    dataset: &Dataset,
    split: &FoldSplit,
    fold: usize,
    config: &StudyConfig,
    registry: &LearnerRegistry,
) -> Result<FoldRun> {
    config.validate(dataset)?;
    let train = dataset.subset(&split.train_indices(fold))?;
    let test = dataset.subset(&split.test_indices(fold))?;
    let seed = |stage| stage_seed(config.seed, stage, fold);

    let original = match &config.model {
        ModelSource::Fixed(m) => m.clone(),
        ModelSource::Learn { learner, options } => {
            let spec = LearnerSpec {
                task: config.task,
                seed: seed("model"),
                options: options.clone(),
            };
            registry.fit(learner, &train, &spec)?
        }
    };

    let multiplier = config.multiplier.unwrap_or_else(|| default_multiplier(train.n_rows()));
    let augmenting = generate_augmenting_sample(&train, multiplier, seed("augment"))?;
    let c_config = MlpLearner::config(&LearnerSpec {
        task: Task::Binary,
        seed: seed("extrapolation"),
        options: config.extrapolation.clone(),
    })?;
    let extrapolation = train_extrapolation_classifier(&train, &augmenting, &c_config, config.threshold)?;
    drop(augmenting);

    let mean_prediction = mean_in_row_order(predict_batch(original.as_ref(), train.rows())?);
    let mut targets = Vec::new();
    let mut fitting = Vec::new();
    let mut held_out = Vec::new();
    let mut comps = Vec::new();
    let mut permuted_sets = Vec::new();
    for (name, spec) in &config.targets {
        let j = train.feature_index(name)?;
        let policy = GridPolicy::default_for(train.schema()[j].kind, config.grid_points);
        let grid = select_grid(&train, name, &policy)?;
        let feature_mean = mean_in_row_order(train.column(j).iter().copied());
        let target = spec.resolve(grid.clone(), mean_prediction, feature_mean)?;
        let permuted = build_permuted_pd_data(&train, &grid)?;
        let scores = PermutedScores::compute(&permuted, extrapolation.model().as_ref(), original.as_ref())?;
        comps.push(solve_gamma(&target, &scores.lambda_rho(config.threshold))?);
        let test_permuted = build_permuted_pd_data(&test, &grid)?;
        held_out.push(PermutedScores::compute(
            &test_permuted,
            extrapolation.model().as_ref(),
            original.as_ref(),
        )?);
        fitting.push(scores);
        permuted_sets.push(permuted);
        targets.push(target);
    }
    let compensation = CompensationTable::new(comps)?;
    let names: Vec<String> = config.targets.iter().map(|(n, _)| n.clone()).collect();

    let (allocator, attack) = if names.len() == 1 {
        let a = build_adversarial_single(original.clone(), extrapolation.clone(), compensation.clone(), &names[0])?;
        (None, a)
    } else {
        let q = names.len();
        let mut a_config = MlpLearner::config(&LearnerSpec {
            task: Task::Multiclass(q + 1),
            seed: seed("allocator"),
            options: config.allocator.clone(),
        })?;
        a_config.task = Task::Multiclass(q + 1);
        let allocator = train_allocator(&train, &permuted_sets, &extrapolation, &a_config)?;
        let a = build_adversarial_multi(
            original.clone(),
            extrapolation.clone(),
            allocator.clone(),
            compensation.clone(),
            names,
        )?;
        (Some(allocator), a)
    };
    drop(permuted_sets);

    let test_probabilities = extrapolation.probabilities(test.rows())?;
    Ok(FoldRun {
        fold,
        original,
        extrapolation,
        allocator,
        targets,
        compensation,
        attack,
        fitting,
        held_out,
        test_probabilities,
        train,
        test,
    })
}

impl FoldRun {
    /// Largest gap between the target and the PD of the single-feature
    /// composite on the rows the compensation was fitted on.
    pub fn in_sample_identity_error(&self) -> f64 {
        let t = self.extrapolation.threshold();
        self.fitting
            .iter()
            .zip(self.compensation.features())
            .zip(&self.targets)
            .flat_map(|((scores, comp), target)| {
                let pd = scores.adversarial_pd(t, &comp.gammas());
                pd.into_iter()
                    .zip(&target.desired)
                    .map(|(a, d)| (a - d).abs())
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }

    /// Held-out curves and scores for the composite.
    pub fn report(&self, norm: Norm) -> Result<AttackReport> {
        let mut features = Vec::new();
        for (target, scores) in self.targets.iter().zip(&self.held_out) {
            let permuted = build_permuted_pd_data(&self.test, &target.grid)?;
            let original = PdCurve::new(target.grid.clone(), scores.original_pd(), CurveKind::Original)?;
            let mut adversarial = compute_pd(&self.attack, &permuted)?;
            adversarial.kind = CurveKind::Adversarial;
            let target_curve = target.curve();
            let accuracy = accuracy_of_attack(&original, &adversarial, &target_curve, norm)?;
            features.push(FeatureReport {
                feature: target.feature.clone(),
                original,
                adversarial,
                target: target_curve,
                accuracy,
            });
        }
        Ok(AttackReport {
            fold: self.fold,
            threshold: self.extrapolation.threshold(),
            tpr: true_positive_rate(&self.attack, self.test.rows())?,
            features,
        })
    }

    pub fn sweep_inputs(&self) -> Vec<SweepInput> {
        self.targets
            .iter()
            .zip(&self.fitting)
            .zip(&self.held_out)
            .map(|((target, fitting), held_out)| SweepInput {
                fold: self.fold,
                target: target.clone(),
                fitting: fitting.clone(),
                held_out: held_out.clone(),
                test_probabilities: self.test_probabilities.clone(),
            })
            .collect()
    }
}
