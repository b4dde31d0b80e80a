//! Building a composite model whose PD plots show attacker-chosen curves
//! while it agrees with the original model on realistic rows.

mod augment;
mod classifier;
mod compensation;
mod manifest;
mod model;
mod target;

pub use augment::{default_multiplier, generate_augmenting_sample, AugmentingSample};
pub use classifier::{
    allocator_training_set, train_allocator, train_extrapolation_classifier, AllocatorClassifier,
    ExtrapolationClassifier, G_NO,
};
pub use compensation::{
    estimate_lambda_rho, solve_gamma, CompensationEntry, CompensationTable, FeatureCompensation,
    LambdaRho, PermutedScores,
};
pub use manifest::AttackManifest;
pub use model::{
    adversarial_predict_batch, build_adversarial_multi, build_adversarial_single, route_batch,
    AdversarialModel, Route,
};
pub use target::{TargetPd, TargetSpec};
