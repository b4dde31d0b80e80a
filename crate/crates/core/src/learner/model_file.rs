//! Versioned plain-text model files.
//!
//! ```text
//! pdfool-model 1
//! kind mlp
//! ...
//! ```
//!
//! Floats are written in their shortest round-trip decimal form, so a loaded
//! model reproduces the saved model's predictions bit for bit.

use ndarray::{Array1, Array2};

use super::mlp::{MlpConfig, TrainedMlp};
use super::network::{Dense, Network};
use super::{LinearModel, Task};
use crate::error::{Error, Result};

pub const MAGIC: &str = "pdfool-model";
pub const VERSION: u32 = 1;

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn header(kind: &str) -> String {
    format!("{MAGIC} {VERSION}\nkind {kind}\n")
}

pub fn encode_mlp(model: &TrainedMlp) -> String {
    let cfg = model.config();
    let mut s = header("mlp");
    s += &format!("task {}\n", cfg.task);
    s += &format!(
        "widths {}\n",
        cfg.layer_widths.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(" ")
    );
    s += &format!(
        "training dropout={} learn_rate={} momentum={} batch_size={} max_epochs={} patience={} validation_fraction={} seed={}\n",
        cfg.dropout_rate,
        cfg.learn_rate,
        cfg.momentum,
        cfg.batch_size,
        cfg.max_epochs,
        cfg.early_stop_patience,
        cfg.validation_fraction,
        cfg.seed
    );
    if let Some(w) = &cfg.class_weights {
        s += &format!("class_weights {}\n", join(w.iter().copied()));
    }
    s += &format!("input_mean {}\n", join(model.input_mean().iter().copied()));
    s += &format!("input_sd {}\n", join(model.input_sd().iter().copied()));
    s += &format!("target {} {}\n", model.target_shift(), model.target_scale());
    for (l, layer) in model.network().layers().iter().enumerate() {
        let (rows, cols) = layer.weights.dim();
        s += &format!("layer {l} {rows} {cols}\n");
        s += &format!("weights {}\n", join(layer.weights.iter().copied()));
        s += &format!("bias {}\n", join(layer.bias.iter().copied()));
    }
    s
}

pub fn encode_linear(model: &LinearModel) -> String {
    let mut s = header("linear");
    s += &format!("intercept {}\n", model.intercept);
    s += &format!("coefficients {}\n", join(model.coefficients.iter().copied()));
    s
}

/// Returns the `kind` named in a model file's header.
pub fn model_kind(text: &str) -> Result<String> {
    let mut lines = Lines::new(text);
    lines.expect_header()?;
    Ok(lines.field("kind")?.to_string())
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::ModelFormat(format!("line {}: {}", line + 1, msg.into()))
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
        }
    }

    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            if !line.trim().is_empty() {
                return Ok((i, line.trim()));
            }
        }
        Err(Error::ModelFormat("unexpected end of model file".into()))
    }

    fn expect_header(&mut self) -> Result<()> {
        let (i, line) = self.next_line()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(MAGIC) {
            return Err(bad(i, "not a pdfool model file"));
        }
        match parts.next().and_then(|v| v.parse::<u32>().ok()) {
            Some(VERSION) => Ok(()),
            Some(v) => Err(bad(i, format!("unsupported model file version {v}"))),
            None => Err(bad(i, "missing version")),
        }
    }

    /// Next line, which must start with `key`; returns the rest.
    fn field(&mut self, key: &str) -> Result<&'a str> {
        let (i, line) = self.next_line()?;
        match line.split_once(char::is_whitespace) {
            Some((k, rest)) if k == key => Ok(rest.trim()),
            None if line == key => Ok(""),
            _ => Err(bad(i, format!("expected `{key}`"))),
        }
    }

    fn optional_field(&mut self, key: &str) -> Result<Option<&'a str>> {
        let snapshot = self.inner.clone();
        match self.field(key) {
            Ok(v) => Ok(Some(v)),
            Err(_) => {
                self.inner = snapshot;
                Ok(None)
            }
        }
    }

    fn floats(&mut self, key: &str) -> Result<Vec<f64>> {
        let rest = self.field(key)?;
        parse_floats(rest, key)
    }
}

fn parse_floats(rest: &str, key: &str) -> Result<Vec<f64>> {
    rest.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::ModelFormat(format!("`{key}`: bad number `{t}`")))
        })
        .collect()
}

fn parse_kv<T: std::str::FromStr>(rest: &str, key: &str) -> Result<T> {
    rest.split_whitespace()
        .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::ModelFormat(format!("training line lacks `{key}`")))
}

pub fn decode_mlp(text: &str) -> Result<TrainedMlp> {
    let mut lines = Lines::new(text);
    lines.expect_header()?;
    if lines.field("kind")? != "mlp" {
        return Err(Error::ModelFormat("not an mlp model".into()));
    }
    let task = Task::parse(lines.field("task")?)?;
    let widths: Vec<usize> = lines
        .field("widths")?
        .split_whitespace()
        .map(|w| w.parse().map_err(|_| Error::ModelFormat(format!("bad width `{w}`"))))
        .collect::<Result<_>>()?;
    let training = lines.field("training")?;
    let mut config = MlpConfig::new(widths.clone(), task);
    config.dropout_rate = parse_kv(training, "dropout")?;
    config.learn_rate = parse_kv(training, "learn_rate")?;
    config.momentum = parse_kv(training, "momentum")?;
    config.batch_size = parse_kv(training, "batch_size")?;
    config.max_epochs = parse_kv(training, "max_epochs")?;
    config.early_stop_patience = parse_kv(training, "patience")?;
    config.validation_fraction = parse_kv(training, "validation_fraction")?;
    config.seed = parse_kv(training, "seed")?;
    if let Some(rest) = lines.optional_field("class_weights")? {
        config.class_weights = Some(parse_floats(rest, "class_weights")?);
    }
    let input_mean = lines.floats("input_mean")?;
    let input_sd = lines.floats("input_sd")?;
    let target = lines.floats("target")?;
    if target.len() != 2 {
        return Err(Error::ModelFormat("`target` needs shift and scale".into()));
    }
    let mut layers = Vec::with_capacity(widths.len());
    for l in 0..widths.len() {
        let dims: Vec<usize> = lines
            .field("layer")?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::ModelFormat("bad layer header".into())))
            .collect::<Result<_>>()?;
        if dims.len() != 3 || dims[0] != l {
            return Err(Error::ModelFormat(format!("bad header for layer {l}")));
        }
        let weights = lines.floats("weights")?;
        let weights = Array2::from_shape_vec((dims[1], dims[2]), weights)
            .map_err(|_| Error::ModelFormat(format!("layer {l} weight count mismatch")))?;
        let bias = Array1::from(lines.floats("bias")?);
        layers.push(Dense { weights, bias });
    }
    let network = Network::from_layers(layers, task)
        .map_err(|e| Error::ModelFormat(e.to_string()))?;
    config.validate().map_err(|e| Error::ModelFormat(e.to_string()))?;
    TrainedMlp::from_parts(config, network, input_mean, input_sd, target[0], target[1])
        .map_err(|e| Error::ModelFormat(e.to_string()))
}

pub fn decode_linear(text: &str) -> Result<LinearModel> {
    let mut lines = Lines::new(text);
    lines.expect_header()?;
    if lines.field("kind")? != "linear" {
        return Err(Error::ModelFormat("not a linear model".into()));
    }
    let intercept = lines.floats("intercept")?;
    if intercept.len() != 1 {
        return Err(Error::ModelFormat("`intercept` needs one value".into()));
    }
    Ok(LinearModel {
        intercept: intercept[0],
        coefficients: lines.floats("coefficients")?,
    })
}
