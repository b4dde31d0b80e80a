use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{Dataset, FeatureSchema};
use crate::error::{invalid, Result};

/// Equicorrelated standard-normal features with a linear noisy target.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub n_rows: usize,
    pub n_features: usize,
    pub pairwise_correlation: f64,
    pub noise_sd: f64,
    pub coefficients: Vec<f64>,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_rows: 100_000,
            n_features: 6,
            pairwise_correlation: 0.3,
            noise_sd: 0.5,
            coefficients: vec![1.0, 1.0, 1.0, 1.0, 1.0, 0.0],
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_rows == 0 {
            return Err(invalid("simulation needs at least one row"));
        }
        if self.n_features == 0 {
            return Err(invalid("simulation needs at least one feature"));
        }
        if self.coefficients.len() != self.n_features {
            return Err(invalid(format!(
                "{} coefficients given for {} features",
                self.coefficients.len(),
                self.n_features
            )));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return Err(invalid("noise_sd must be positive"));
        }
        let r = self.pairwise_correlation;
        let lower = if self.n_features > 1 {
            -1.0 / (self.n_features as f64 - 1.0)
        } else {
            -1.0
        };
        if !(r > lower && r < 1.0) {
            return Err(invalid(format!(
                "pairwise correlation {r} does not give a positive definite covariance \
                 (needs {lower} < r < 1)"
            )));
        }
        Ok(())
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let p = self.n_features;
        DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { self.pairwise_correlation })
    }

    /// Plain `key=value` lines recording how a simulated file was produced.
    pub fn sidecar(&self) -> String {
        let coefs: Vec<String> = self.coefficients.iter().map(|c| c.to_string()).collect();
        format!(
            "seed={}\nn={}\nfeatures={}\ncorrelation={}\nnoise_sd={}\ncoefficients={}\n",
            self.seed,
            self.n_rows,
            self.n_features,
            self.pairwise_correlation,
            self.noise_sd,
            coefs.join(",")
        )
    }
}

/// Features are named `x1..xp`; the target is `coefficients · x + N(0, noise_sd²)`.
pub fn simulate_correlated_gaussian(config: &SimulationConfig) -> Result<Dataset> {
    config.validate()?;
    let p = config.n_features;
    let chol = config
        .covariance()
        .cholesky()
        .ok_or_else(|| invalid("covariance matrix is not positive definite"))?;
    let lower = chol.l();
    let noise = Normal::new(0.0, config.noise_sd).map_err(|e| invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut cells = Vec::with_capacity(config.n_rows * p);
    let mut target = Vec::with_capacity(config.n_rows);
    let mut z = DVector::<f64>::zeros(p);
    for _ in 0..config.n_rows {
        for k in 0..p {
            z[k] = StandardNormal.sample(&mut rng);
        }
        let x = &lower * &z;
        let mut y = 0.0;
        for k in 0..p {
            y += config.coefficients[k] * x[k];
            cells.push(x[k]);
        }
        y += noise.sample(&mut rng);
        target.push(y);
    }
    let schema = (1..=p)
        .map(|k| FeatureSchema::continuous(format!("x{k}")))
        .collect();
    let rows = Array2::from_shape_vec((config.n_rows, p), cells)
        .expect("cell count is rows times features");
    Dataset::new(schema, rows, target, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::pearson;

    fn mean_sd(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, var.sqrt())
    }

    #[test]
    fn default_correlation_is_recovered() {
        let cfg = SimulationConfig { seed: 3, ..Default::default() };
        let ds = simulate_correlated_gaussian(&cfg).unwrap();
        for a in 0..6 {
            let col_a = ds.column(a).to_vec();
            let (m, sd) = mean_sd(&col_a);
            assert!(m.abs() < 0.02, "mean {m}");
            assert!((sd - 1.0).abs() < 0.02, "sd {sd}");
            for b in (a + 1)..6 {
                let r = pearson(&col_a, &ds.column(b).to_vec());
                assert!((r - 0.3).abs() < 0.02, "corr({a},{b}) = {r}");
            }
        }
        let r12 = pearson(&ds.column(0).to_vec(), &ds.column(1).to_vec());
        assert!((r12 - 0.3).abs() < 0.01);
    }

    #[test]
    fn noise_only_variance() {
        let cfg = SimulationConfig {
            n_rows: 50_000,
            pairwise_correlation: 0.0,
            coefficients: vec![0.0; 6],
            seed: 11,
            ..Default::default()
        };
        let ds = simulate_correlated_gaussian(&cfg).unwrap();
        let (_, sd) = mean_sd(ds.target());
        assert!((sd * sd - 0.25).abs() < 0.25 * 0.05);
    }

    #[test]
    fn ols_recovers_coefficients() {
        let cfg = SimulationConfig { n_rows: 20_000, seed: 5, ..Default::default() };
        let ds = simulate_correlated_gaussian(&cfg).unwrap();
        // Closed-form least squares with an intercept column.
        let n = ds.n_rows();
        let design = DMatrix::from_fn(n, 7, |i, j| if j == 0 { 1.0 } else { ds.row(i)[j - 1] });
        let y = DVector::from_column_slice(ds.target());
        let xtx = design.transpose() * &design;
        let xty = design.transpose() * y;
        let beta = xtx.cholesky().unwrap().solve(&xty);
        for (k, want) in cfg.coefficients.iter().enumerate() {
            assert!((beta[k + 1] - want).abs() < 0.05, "beta{k} = {}", beta[k + 1]);
        }
    }

    #[test]
    fn rejects_non_positive_definite() {
        let cfg = SimulationConfig { pairwise_correlation: -0.25, ..Default::default() };
        assert!(simulate_correlated_gaussian(&cfg).is_err());
        let cfg = SimulationConfig { n_rows: 0, ..Default::default() };
        assert!(simulate_correlated_gaussian(&cfg).is_err());
    }

    #[test]
    fn deterministic_and_sidecar() {
        let cfg = SimulationConfig { n_rows: 100, seed: 8, ..Default::default() };
        assert_eq!(
            simulate_correlated_gaussian(&cfg).unwrap(),
            simulate_correlated_gaussian(&cfg).unwrap()
        );
        let side = cfg.sidecar();
        assert!(side.contains("correlation=0.3\n"));
        assert!(side.contains("coefficients=1,1,1,1,1,0\n"));
    }
}
