//! Dense ReLU network with an identity, sigmoid or softmax head, trained by
//! hand-written backpropagation.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::Task;
use crate::error::{invalid, Result};

/// One affine layer; `weights` is `inputs × outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Dense>,
    task: Task,
}

/// Parameter gradients, laid out like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            weights: net.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
            biases: net.layers.iter().map(|l| Array1::zeros(l.bias.raw_dim())).collect(),
        }
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

impl Network {
    /// Glorot-uniform weights in ±sqrt(6 / (fan_in + fan_out)), zero biases.
    pub fn new(input_width: usize, widths: &[usize], task: Task, rng: &mut ChaCha8Rng) -> Result<Self> {
        if widths.is_empty() || input_width == 0 || widths.contains(&0) {
            return Err(invalid("network widths must be non-empty and positive"));
        }
        if *widths.last().unwrap() != task.output_width() {
            return Err(invalid(format!(
                "final layer width {} does not match task {task}",
                widths.last().unwrap()
            )));
        }
        let mut layers = Vec::with_capacity(widths.len());
        let mut fan_in = input_width;
        for &fan_out in widths {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights =
                Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-limit..limit));
            layers.push(Dense {
                weights,
                bias: Array1::zeros(fan_out),
            });
            fan_in = fan_out;
        }
        Ok(Self { layers, task })
    }

    pub fn from_layers(layers: Vec<Dense>, task: Task) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid("network needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].weights.ncols() != pair[1].weights.nrows() {
                return Err(invalid("consecutive layer shapes do not chain"));
            }
        }
        for l in &layers {
            if l.bias.len() != l.weights.ncols() {
                return Err(invalid("bias length differs from layer width"));
            }
        }
        if layers.last().unwrap().weights.ncols() != task.output_width() {
            return Err(invalid("final layer width does not match task"));
        }
        Ok(Self { layers, task })
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    /// Single-row inference with the head applied (identity, sigmoid, softmax).
    pub fn forward_row(&self, x: &[f64]) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let mut a = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut out = layer.bias.to_vec();
            for (i, &ai) in a.iter().enumerate() {
                if ai == 0.0 {
                    continue;
                }
                let w = layer.weights.row(i);
                for (o, &wio) in out.iter_mut().zip(w.iter()) {
                    *o += ai * wio;
                }
            }
            if l < last {
                for v in out.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            a = out;
        }
        match self.task {
            Task::Regression => a,
            Task::Binary => vec![sigmoid(a[0])],
            Task::Multiclass(_) => {
                softmax_in_place(&mut a);
                a
            }
        }
    }

    /// Output-layer pre-activations for a batch, no dropout.
    pub fn logits(&self, x: &Array2<f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut a = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weights) + &layer.bias;
            if l < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            a = z;
        }
        a
    }

    /// Mean (class-weighted) loss and its derivative with respect to the logits.
    /// Regression: squared error. Binary/multiclass: cross-entropy.
    pub fn loss_from_logits(
        &self,
        logits: &Array2<f64>,
        y: &[f64],
        class_weights: Option<&[f64]>,
        want_grad: bool,
    ) -> (f64, Option<Array2<f64>>) {
        let n = logits.nrows() as f64;
        let weight = |label: f64| class_weights.map_or(1.0, |w| w[label as usize]);
        let mut loss = 0.0;
        let mut delta = want_grad.then(|| Array2::<f64>::zeros(logits.raw_dim()));
        match self.task {
            Task::Regression => {
                for (i, &yi) in y.iter().enumerate() {
                    let r = logits[[i, 0]] - yi;
                    loss += r * r;
                    if let Some(d) = delta.as_mut() {
                        d[[i, 0]] = 2.0 * r / n;
                    }
                }
            }
            Task::Binary => {
                for (i, &yi) in y.iter().enumerate() {
                    let z = logits[[i, 0]];
                    let w = weight(yi);
                    loss += w * (softplus(z) - yi * z);
                    if let Some(d) = delta.as_mut() {
                        d[[i, 0]] = w * (sigmoid(z) - yi) / n;
                    }
                }
            }
            Task::Multiclass(_) => {
                let mut probs = Vec::new();
                for (i, &yi) in y.iter().enumerate() {
                    let row = logits.row(i);
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
                    let label = yi as usize;
                    let w = weight(yi);
                    loss += w * (lse - row[label]);
                    if let Some(d) = delta.as_mut() {
                        probs.clear();
                        probs.extend(row.iter().copied());
                        softmax_in_place(&mut probs);
                        for (k, &p) in probs.iter().enumerate() {
                            let target = if k == label { 1.0 } else { 0.0 };
                            d[[i, k]] = w * (p - target) / n;
                        }
                    }
                }
            }
        }
        (loss / n, delta)
    }

    /// Loss and analytic parameter gradients on a batch without dropout.
    pub fn loss_and_gradients(
        &self,
        x: &Array2<f64>,
        y: &[f64],
        class_weights: Option<&[f64]>,
    ) -> (f64, Gradients) {
        self.pass(x, y, class_weights, None)
    }

    /// Forward and backward pass; `dropout` applies inverted dropout to
    /// hidden activations.
    pub(crate) fn pass(
        &self,
        x: &Array2<f64>,
        y: &[f64],
        class_weights: Option<&[f64]>,
        mut dropout: Option<(f64, &mut ChaCha8Rng)>,
    ) -> (f64, Gradients) {
        let last = self.layers.len() - 1;
        let mut inputs: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        // d(activation)/d(pre-activation) for each hidden layer, dropout included
        let mut factors: Vec<Array2<f64>> = Vec::with_capacity(last);
        let mut a = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weights) + &layer.bias;
            inputs.push(a);
            if l < last {
                let mut factor = z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
                if let Some((rate, rng)) = dropout.as_mut() {
                    if *rate > 0.0 {
                        let keep_scale = 1.0 / (1.0 - *rate);
                        factor.mapv_inplace(|f| {
                            if rng.random::<f64>() < *rate {
                                0.0
                            } else {
                                f * keep_scale
                            }
                        });
                    }
                }
                z *= &factor;
                factors.push(factor);
            }
            a = z;
        }
        let (loss, delta) = self.loss_from_logits(&a, y, class_weights, true);
        let mut delta = delta.expect("gradient requested");

        let mut grads = Gradients::zeros_like(self);
        for l in (0..=last).rev() {
            grads.weights[l] = inputs[l].t().dot(&delta);
            grads.biases[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.layers[l].weights.t());
                back *= &factors[l - 1];
                delta = back;
            }
        }
        (loss, grads)
    }
}
