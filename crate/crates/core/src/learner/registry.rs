//! Learners registered by name so configuration files can pick one at run time.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::mlp::{train_mlp, MlpConfig};
use super::{model_file, train_linear, Predictor, Task};
use crate::data::Dataset;
use crate::error::{invalid, Error, Result};

/// Task, seed and free-form `key = value` options for one fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerSpec {
    pub task: Task,
    pub seed: u64,
    pub options: BTreeMap<String, String>,
}

impl LearnerSpec {
    pub fn new(task: Task, seed: u64) -> Self {
        Self {
            task,
            seed,
            options: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.options.insert(key.to_string(), value.to_string());
        self
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.options
            .get(key)
            .map(|v| {
                v.trim()
                    .parse()
                    .map_err(|_| invalid(format!("option `{key}`: cannot parse `{v}`")))
            })
            .transpose()
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.options
            .get(key)
            .map(|v| {
                v.split(',')
                    .map(|t| {
                        t.trim()
                            .parse()
                            .map_err(|_| invalid(format!("option `{key}`: cannot parse `{t}`")))
                    })
                    .collect()
            })
            .transpose()
    }
}

pub trait Learner: Send + Sync {
    fn name(&self) -> &'static str;

    fn fit(&self, data: &Dataset, spec: &LearnerSpec) -> Result<Arc<dyn Predictor>>;

    /// Rebuilds a model from the text written by `Predictor::to_model_text`.
    fn decode(&self, text: &str) -> Result<Arc<dyn Predictor>>;
}

pub struct MlpLearner;

impl MlpLearner {
    /// Resolves options on top of the `preset` architecture (`small` by default).
    pub fn config(spec: &LearnerSpec) -> Result<MlpConfig> {
        let mut cfg = match spec.options.get("preset").map(|s| s.trim()) {
            None | Some("small") => MlpConfig::small(spec.task),
            Some("large") => MlpConfig::large(spec.task),
            Some(other) => return Err(invalid(format!("unknown mlp preset `{other}`"))),
        };
        if let Some(hidden) = spec.list::<usize>("hidden")? {
            cfg.layer_widths = hidden;
            cfg.layer_widths.push(spec.task.output_width());
        }
        if let Some(v) = spec.parsed("dropout")? {
            cfg.dropout_rate = v;
        }
        if let Some(v) = spec.parsed("learn_rate")? {
            cfg.learn_rate = v;
        }
        if let Some(v) = spec.parsed("momentum")? {
            cfg.momentum = v;
        }
        if let Some(v) = spec.parsed("batch_size")? {
            cfg.batch_size = v;
        }
        if let Some(v) = spec.parsed("max_epochs")? {
            cfg.max_epochs = v;
        }
        if let Some(v) = spec.parsed("patience")? {
            cfg.early_stop_patience = v;
        }
        if let Some(v) = spec.parsed("validation_fraction")? {
            cfg.validation_fraction = v;
        }
        cfg.class_weights = spec.list("class_weights")?;
        cfg.seed = spec.seed;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Learner for MlpLearner {
    fn name(&self) -> &'static str {
        "mlp"
    }

    fn fit(&self, data: &Dataset, spec: &LearnerSpec) -> Result<Arc<dyn Predictor>> {
        Ok(Arc::new(train_mlp(data, &Self::config(spec)?)?))
    }

    fn decode(&self, text: &str) -> Result<Arc<dyn Predictor>> {
        Ok(Arc::new(model_file::decode_mlp(text)?))
    }
}

/// Least-squares regression; ignores options.
pub struct LinearLearner;

impl Learner for LinearLearner {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn fit(&self, data: &Dataset, spec: &LearnerSpec) -> Result<Arc<dyn Predictor>> {
        if spec.task != Task::Regression {
            return Err(invalid("the linear learner only supports regression"));
        }
        Ok(Arc::new(train_linear(data)?))
    }

    fn decode(&self, text: &str) -> Result<Arc<dyn Predictor>> {
        Ok(Arc::new(model_file::decode_linear(text)?))
    }
}

pub struct LearnerRegistry {
    learners: BTreeMap<&'static str, Box<dyn Learner>>,
}

impl Default for LearnerRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl LearnerRegistry {
    pub fn empty() -> Self {
        Self {
            learners: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(MlpLearner)).expect("fresh registry");
        reg.register(Box::new(LinearLearner)).expect("fresh registry");
        reg
    }

    pub fn register(&mut self, learner: Box<dyn Learner>) -> Result<()> {
        let name = learner.name();
        if self.learners.contains_key(name) {
            return Err(invalid(format!("learner `{name}` already registered")));
        }
        self.learners.insert(name, learner);
        Ok(())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.learners.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn Learner> {
        self.learners
            .get(name)
            .map(|l| &**l)
            .ok_or_else(|| invalid(format!("no learner named `{name}` (have: {:?})", self.names())))
    }

    pub fn fit(&self, name: &str, data: &Dataset, spec: &LearnerSpec) -> Result<Arc<dyn Predictor>> {
        self.get(name)?.fit(data, spec)
    }

    /// Dispatches on the `kind` line of a model file.
    pub fn load(&self, text: &str) -> Result<Arc<dyn Predictor>> {
        let kind = model_file::model_kind(text)?;
        self.get(&kind)
            .map_err(|_| Error::ModelFormat(format!("no learner can read model kind `{kind}`")))?
            .decode(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureSchema;
    use ndarray::Array2;

    #[test]
    fn builtins_and_duplicates() {
        let mut reg = LearnerRegistry::with_builtins();
        assert_eq!(reg.names(), vec!["linear", "mlp"]);
        assert!(reg.register(Box::new(MlpLearner)).is_err());
        assert!(reg.get("xgboost").is_err());
    }

    #[test]
    fn options_resolve_onto_preset() {
        let spec = LearnerSpec::new(Task::Binary, 4)
            .with("hidden", "16, 8")
            .with("class_weights", "10,1")
            .with("dropout", 0.1);
        let cfg = MlpLearner::config(&spec).unwrap();
        assert_eq!(cfg.layer_widths, vec![16, 8, 1]);
        assert_eq!(cfg.class_weights, Some(vec![10.0, 1.0]));
        assert_eq!(cfg.dropout_rate, 0.1);
        assert_eq!(cfg.seed, 4);
        let large = MlpLearner::config(&LearnerSpec::new(Task::Multiclass(3), 0).with("preset", "large")).unwrap();
        assert_eq!(large.layer_widths, vec![40, 20, 10, 3]);
        assert!(MlpLearner::config(&LearnerSpec::new(Task::Binary, 0).with("dropout", "x")).is_err());
    }

    #[test]
    fn fit_and_load_through_registry() {
        let reg = LearnerRegistry::with_builtins();
        let rows = Array2::from_shape_fn((30, 1), |(i, _)| i as f64);
        let target = (0..30).map(|i| 3.0 * i as f64 - 1.0).collect();
        let ds = Dataset::new(vec![FeatureSchema::continuous("a")], rows, target, None).unwrap();
        let model = reg.fit("linear", &ds, &LearnerSpec::new(Task::Regression, 0)).unwrap();
        let back = reg.load(&model.to_model_text().unwrap()).unwrap();
        assert_eq!(back.predict(&[4.0]).to_bits(), model.predict(&[4.0]).to_bits());
        assert!(reg.fit("linear", &ds, &LearnerSpec::new(Task::Binary, 0)).is_err());
    }
}
