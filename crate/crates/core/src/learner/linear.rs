use nalgebra::{DMatrix, DVector};

use super::Predictor;
use crate::data::Dataset;
use crate::error::{invalid, Result};

/// Ordinary least squares with an intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl Predictor for LinearModel {
    fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    fn predict(&self, row: &[f64]) -> f64 {
        let mut y = self.intercept;
        for (c, x) in self.coefficients.iter().zip(row) {
            y += c * x;
        }
        y
    }

    fn to_model_text(&self) -> Result<String> {
        Ok(super::model_file::encode_linear(self))
    }
}

/// Solves the normal equations; constant columns get a zero coefficient.
pub fn train_linear(dataset: &Dataset) -> Result<LinearModel> {
    let (n, p) = dataset.rows().dim();
    let varying: Vec<usize> = (0..p)
        .filter(|&j| {
            let c = dataset.column(j);
            c.iter().any(|&v| v != c[0])
        })
        .collect();
    let k = varying.len() + 1;
    if n < k {
        return Err(invalid(format!("{n} rows cannot identify {k} linear parameters")));
    }
    let design = DMatrix::from_fn(n, k, |i, j| {
        if j == 0 {
            1.0
        } else {
            dataset.rows()[[i, varying[j - 1]]]
        }
    });
    let y = DVector::from_column_slice(dataset.target());
    let xtx = design.transpose() * &design;
    let xty = design.transpose() * y;
    let beta = xtx
        .cholesky()
        .map(|c| c.solve(&xty))
        .ok_or_else(|| invalid("design matrix is rank deficient"))?;
    let mut coefficients = vec![0.0; p];
    for (slot, &j) in varying.iter().enumerate() {
        coefficients[j] = beta[slot + 1];
    }
    Ok(LinearModel {
        intercept: beta[0],
        coefficients,
    })
}
