//! Mini-batch SGD training for the dense network: momentum 0.9, input
//! standardization, inverted dropout, learning rate halved on validation
//! plateaus, early stopping with best-weight restore.

use std::sync::Arc;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::{Dense, Network};
use super::{Predictor, Task};
use crate::data::Dataset;
use crate::error::{invalid, Error, Result};

/// Epochs without validation improvement before the learning rate is halved.
const PLATEAU_EPOCHS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    /// Hidden widths followed by the output width.
    pub layer_widths: Vec<usize>,
    pub task: Task,
    pub dropout_rate: f64,
    pub learn_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub class_weights: Option<Vec<f64>>,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl MlpConfig {
    pub fn new(layer_widths: Vec<usize>, task: Task) -> Self {
        Self {
            layer_widths,
            task,
            dropout_rate: 0.0,
            learn_rate: 0.01,
            momentum: 0.9,
            batch_size: 256,
            max_epochs: 60,
            early_stop_patience: 6,
            class_weights: None,
            validation_fraction: 0.1,
            seed: 0,
        }
    }

    /// `[20, 10, out]` with dropout 0.2, the small-data architecture.
    pub fn small(task: Task) -> Self {
        Self {
            dropout_rate: 0.2,
            ..Self::new(vec![20, 10, task.output_width()], task)
        }
    }

    /// `[40, 20, 10, out]` with dropout 0.2, for larger tabular data.
    pub fn large(task: Task) -> Self {
        Self {
            dropout_rate: 0.2,
            ..Self::new(vec![40, 20, 10, task.output_width()], task)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.is_empty() || self.layer_widths.contains(&0) {
            return Err(invalid("layer widths must be non-empty and positive"));
        }
        if *self.layer_widths.last().unwrap() != self.task.output_width() {
            return Err(invalid(format!(
                "final layer width {} does not match task {}",
                self.layer_widths.last().unwrap(),
                self.task
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(invalid("dropout rate must be in [0, 1)"));
        }
        if !(self.learn_rate > 0.0 && self.learn_rate.is_finite()) {
            return Err(invalid("learn rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid("momentum must be in [0, 1)"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(invalid("batch size and max epochs must be positive"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(invalid("validation fraction must be in (0, 1)"));
        }
        match (&self.class_weights, self.task.n_classes()) {
            (Some(_), None) => return Err(invalid("class weights need a classification task")),
            (Some(w), Some(k)) => {
                if w.len() != k || w.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                    return Err(invalid(format!("need {k} positive class weights")));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub train_loss: f64,
    pub validation_loss: f64,
    pub learn_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedMlp {
    config: MlpConfig,
    network: Network,
    input_mean: Vec<f64>,
    input_sd: Vec<f64>,
    /// Regression outputs are `raw * target_scale + target_shift`.
    target_shift: f64,
    target_scale: f64,
    training_log: Vec<EpochLog>,
}

impl TrainedMlp {
    pub fn from_parts(
        config: MlpConfig,
        network: Network,
        input_mean: Vec<f64>,
        input_sd: Vec<f64>,
        target_shift: f64,
        target_scale: f64,
    ) -> Result<Self> {
        let p = network.input_width();
        if input_mean.len() != p || input_sd.len() != p {
            return Err(invalid("standardization width differs from network input"));
        }
        if input_sd.iter().any(|&s| !(s > 0.0)) {
            return Err(invalid("standardization sds must be positive"));
        }
        if network.task() != config.task {
            return Err(invalid("network head differs from configured task"));
        }
        Ok(Self {
            config,
            network,
            input_mean,
            input_sd,
            target_shift,
            target_scale,
            training_log: Vec::new(),
        })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn input_mean(&self) -> &[f64] {
        &self.input_mean
    }

    pub fn input_sd(&self) -> &[f64] {
        &self.input_sd
    }

    pub fn target_shift(&self) -> f64 {
        self.target_shift
    }

    pub fn target_scale(&self) -> f64 {
        self.target_scale
    }

    pub fn training_log(&self) -> &[EpochLog] {
        &self.training_log
    }

    pub fn into_arc(self) -> Arc<dyn Predictor> {
        Arc::new(self)
    }

    fn head_output(&self, row: &[f64]) -> Vec<f64> {
        let x: Vec<f64> = row
            .iter()
            .zip(&self.input_mean)
            .zip(&self.input_sd)
            .map(|((v, m), s)| (v - m) / s)
            .collect();
        self.network.forward_row(&x)
    }
}

impl Predictor for TrainedMlp {
    fn n_features(&self) -> usize {
        self.input_mean.len()
    }

    fn predict(&self, row: &[f64]) -> f64 {
        let out = self.head_output(row);
        match self.config.task {
            Task::Regression => out[0] * self.target_scale + self.target_shift,
            Task::Binary => out[0],
            Task::Multiclass(_) => argmax(&out) as f64,
        }
    }

    fn predict_class_distribution(&self, row: &[f64]) -> Option<Vec<f64>> {
        match self.config.task {
            Task::Regression => None,
            Task::Binary => {
                let p = self.head_output(row)[0];
                Some(vec![1.0 - p, p])
            }
            Task::Multiclass(_) => Some(self.head_output(row)),
        }
    }

    fn to_model_text(&self) -> Result<String> {
        Ok(super::model_file::encode_mlp(self))
    }
}

/// Index of the largest entry; the first one wins ties.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn check_targets(task: Task, target: &[f64]) -> Result<()> {
    for (i, &y) in target.iter().enumerate() {
        let ok = match task {
            Task::Regression => y.is_finite(),
            Task::Binary => y == 0.0 || y == 1.0,
            Task::Multiclass(k) => y >= 0.0 && y.fract() == 0.0 && (y as usize) < k,
        };
        if !ok {
            return Err(Error::Cell {
                row: i,
                column: "<target>".into(),
                message: format!("target {y} is not valid for task {task}"),
            });
        }
    }
    Ok(())
}

fn mean_sd(column: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = column.clone().count() as f64;
    let mean = column.clone().sum::<f64>() / n;
    let var = column.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    (mean, if sd > 1e-12 { sd } else { 1.0 })
}

pub fn train_mlp(dataset: &Dataset, config: &MlpConfig) -> Result<TrainedMlp> {
    config.validate()?;
    let n = dataset.n_rows();
    if n < 20 {
        return Err(invalid(format!("training needs at least 20 rows, got {n}")));
    }
    check_targets(config.task, dataset.target())?;
    let p = dataset.n_features();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_val = ((n as f64 * config.validation_fraction).round() as usize).clamp(1, n - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();

    let rows = dataset.rows();
    let stats: Vec<(f64, f64)> = (0..p)
        .map(|j| mean_sd(train_idx.iter().map(|&i| rows[[i, j]])))
        .collect();
    let input_mean: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let input_sd: Vec<f64> = stats.iter().map(|s| s.1).collect();
    let mut xs = rows.to_owned();
    for mut r in xs.axis_iter_mut(Axis(0)) {
        for j in 0..p {
            r[j] = (r[j] - input_mean[j]) / input_sd[j];
        }
    }

    let (target_shift, target_scale) = match config.task {
        Task::Regression => mean_sd(train_idx.iter().map(|&i| dataset.target()[i])),
        _ => (0.0, 1.0),
    };
    let ys: Vec<f64> = dataset
        .target()
        .iter()
        .map(|&y| (y - target_shift) / target_scale)
        .collect();

    let x_val = xs.select(Axis(0), val_idx);
    let y_val: Vec<f64> = val_idx.iter().map(|&i| ys[i]).collect();
    let cw = config.class_weights.as_deref();

    let mut network = Network::new(p, &config.layer_widths, config.task, &mut rng)?;
    let mut velocity: Vec<(Array2<f64>, Array1<f64>)> = network
        .layers()
        .iter()
        .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.bias.raw_dim())))
        .collect();

    let mut learn_rate = config.learn_rate;
    let mut best: Option<(f64, Vec<Dense>)> = None;
    let mut since_best = 0;
    let mut since_decay = 0;
    let mut log = Vec::new();
    let dropout = config.dropout_rate;

    for epoch in 0..config.max_epochs {
        train_idx.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in train_idx.chunks(config.batch_size) {
            let xb = xs.select(Axis(0), batch);
            let yb: Vec<f64> = batch.iter().map(|&i| ys[i]).collect();
            let (loss, grads) = network.pass(&xb, &yb, cw, Some((dropout, &mut rng)));
            loss_sum += loss * batch.len() as f64;
            for (l, layer) in network.layers_mut().iter_mut().enumerate() {
                let (vw, vb) = &mut velocity[l];
                vw.zip_mut_with(&grads.weights[l], |v, &g| {
                    *v = config.momentum * *v - learn_rate * g
                });
                vb.zip_mut_with(&grads.biases[l], |v, &g| {
                    *v = config.momentum * *v - learn_rate * g
                });
                layer.weights += &*vw;
                layer.bias += &*vb;
            }
        }
        let train_loss = loss_sum / train_idx.len() as f64;
        let (validation_loss, _) =
            network.loss_from_logits(&network.logits(&x_val), &y_val, cw, false);
        if !train_loss.is_finite() || !validation_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        log.push(EpochLog {
            train_loss,
            validation_loss,
            learn_rate,
        });

        let improved = match &best {
            None => true,
            Some((b, _)) => validation_loss < b - 1e-4 * b.abs(),
        };
        if improved {
            best = Some((validation_loss, network.layers().to_vec()));
            since_best = 0;
            since_decay = 0;
        } else {
            since_best += 1;
            since_decay += 1;
            if since_best >= config.early_stop_patience {
                break;
            }
            if since_decay >= PLATEAU_EPOCHS {
                learn_rate *= 0.5;
                since_decay = 0;
            }
        }
    }
    if let Some((_, layers)) = best {
        network = Network::from_layers(layers, config.task)?;
    }

    Ok(TrainedMlp {
        config: config.clone(),
        network,
        input_mean,
        input_sd,
        target_shift,
        target_scale,
        training_log: log,
    })
}
