use ndarray::Array2;

use super::grid::GridSpec;
use super::permuted::PermutedPdData;
use crate::error::{Error, Result};
use crate::learner::{predict_batch, Predictor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Original,
    Adversarial,
    Target,
    /// Mean of the original model over rows the extrapolation classifier
    /// leaves alone.
    ConditionalRho,
}

impl CurveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CurveKind::Original => "original",
            CurveKind::Adversarial => "adversarial",
            CurveKind::Target => "target",
            CurveKind::ConditionalRho => "conditional_rho",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdCurve {
    pub feature: String,
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub kind: CurveKind,
}

impl PdCurve {
    pub fn new(grid: GridSpec, values: Vec<f64>, kind: CurveKind) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} curve values for a grid of {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinitePrediction {
                grid_index: p,
                grid_value: grid.values[p],
                row: 0,
            });
        }
        Ok(Self {
            feature: grid.feature.clone(),
            grid,
            values,
            kind,
        })
    }

    /// Least-squares slope of the curve against its grid values.
    pub fn slope(&self) -> f64 {
        let x = &self.grid.values;
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = self.values.iter().sum::<f64>() / n;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (a, b) in x.iter().zip(&self.values) {
            sxy += (a - mx) * (b - my);
            sxx += (a - mx) * (a - mx);
        }
        if sxx == 0.0 {
            0.0
        } else {
            sxy / sxx
        }
    }
}

/// ICE curves: row `i` is observation `i`'s prediction across the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IceBundle {
    pub feature: String,
    pub grid: GridSpec,
    pub curves: Array2<f64>,
}

impl IceBundle {
    /// Column means in ascending row order; identical to `compute_pd`.
    pub fn pd(&self) -> Vec<f64> {
        (0..self.grid.len())
            .map(|p| mean_in_row_order(self.curves.column(p).iter().copied()))
            .collect()
    }

    /// Per-grid-point empirical quantile across observations (type 7).
    pub fn quantile_curve(&self, prob: f64) -> Vec<f64> {
        (0..self.grid.len())
            .map(|p| {
                let mut col = self.curves.column(p).to_vec();
                col.sort_by(f64::total_cmp);
                super::type7_quantile(&col, prob)
            })
            .collect()
    }
}

/// Plain left-to-right sum divided by the count. All averages over rows go
/// through here so PD and ICE means agree bit for bit.
pub fn mean_in_row_order(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v;
        n += 1;
    }
    sum / n as f64
}

fn block_predictions(model: &dyn Predictor, permuted: &PermutedPdData<'_>, p: usize) -> Result<Vec<f64>> {
    let preds = predict_batch(model, &permuted.block(p))?;
    if let Some(row) = preds.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinitePrediction {
            grid_index: p,
            grid_value: permuted.grid().values[p],
            row,
        });
    }
    Ok(preds)
}

pub fn compute_pd(model: &dyn Predictor, permuted: &PermutedPdData<'_>) -> Result<PdCurve> {
    let values = (0..permuted.grid().len())
        .map(|p| block_predictions(model, permuted, p).map(mean_in_row_order))
        .collect::<Result<Vec<_>>>()?;
    PdCurve::new(permuted.grid().clone(), values, CurveKind::Original)
}

pub fn compute_ice(model: &dyn Predictor, permuted: &PermutedPdData<'_>) -> Result<IceBundle> {
    let n = permuted.n_source_rows();
    let m = permuted.grid().len();
    let mut curves = Array2::zeros((n, m));
    for p in 0..m {
        let preds = block_predictions(model, permuted, p)?;
        for (i, v) in preds.into_iter().enumerate() {
            curves[[i, p]] = v;
        }
    }
    Ok(IceBundle {
        feature: permuted.grid().feature.clone(),
        grid: permuted.grid().clone(),
        curves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, FeatureSchema};
    use crate::explain::{build_permuted_pd_data, select_grid, GridPolicy};
    use ndarray::array;

    struct Closure<F: Fn(&[f64]) -> f64 + Send + Sync>(usize, F);
    impl<F: Fn(&[f64]) -> f64 + Send + Sync> Predictor for Closure<F> {
        fn n_features(&self) -> usize {
            self.0
        }
        fn predict(&self, row: &[f64]) -> f64 {
            (self.1)(row)
        }
    }
    impl<F: Fn(&[f64]) -> f64 + Send + Sync> std::fmt::Debug for Closure<F> {
        fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
            f.write_str("Closure")
        }
    }

    fn two_col(rows: Array2<f64>) -> Dataset {
        let n = rows.nrows();
        let schema = vec![FeatureSchema::continuous("x1"), FeatureSchema::continuous("x2")];
        Dataset::new(schema, rows, vec![0.0; n], None).unwrap()
    }

    #[test]
    fn sum_model_brute_force() {
        let ds = two_col(array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        let grid = select_grid(&ds, "x1", &GridPolicy::Explicit(vec![1.0])).unwrap();
        let perm = build_permuted_pd_data(&ds, &grid).unwrap();
        let pd = compute_pd(&Closure(2, |r: &[f64]| r[0] + r[1]), &perm).unwrap();
        assert_eq!(pd.values, vec![5.0]);
    }

    #[test]
    fn constant_model_is_flat() {
        let ds = two_col(array![[1.0, 2.0], [3.0, 4.0]]);
        let grid = select_grid(&ds, "x2", &GridPolicy::AllUnique).unwrap();
        let perm = build_permuted_pd_data(&ds, &grid).unwrap();
        let pd = compute_pd(&Closure(2, |_: &[f64]| 7.5), &perm).unwrap();
        assert_eq!(pd.values, vec![7.5, 7.5]);
        assert_eq!(pd.slope(), 0.0);
    }

    #[test]
    fn product_model_ice() {
        let ds = two_col(array![[9.0, 1.0], [9.0, 2.0]]);
        let grid = select_grid(&ds, "x1", &GridPolicy::Explicit(vec![0.0, 1.0])).unwrap();
        let perm = build_permuted_pd_data(&ds, &grid).unwrap();
        let model = Closure(2, |r: &[f64]| r[0] * r[1]);
        let ice = compute_ice(&model, &perm).unwrap();
        assert_eq!(ice.curves, array![[0.0, 1.0], [0.0, 2.0]]);
        assert_eq!(ice.pd(), vec![0.0, 1.5]);
        assert_eq!(compute_pd(&model, &perm).unwrap().values, ice.pd());
    }

    #[test]
    fn single_row_ice_equals_pd() {
        let ds = two_col(array![[0.3, -1.2]]);
        let grid = select_grid(&ds, "x2", &GridPolicy::Explicit(vec![-1.0, 0.0, 2.5])).unwrap();
        let perm = build_permuted_pd_data(&ds, &grid).unwrap();
        let model = Closure(2, |r: &[f64]| (r[0] * r[1]).sin());
        let ice = compute_ice(&model, &perm).unwrap();
        assert_eq!(ice.curves.row(0).to_vec(), compute_pd(&model, &perm).unwrap().values);
    }

    #[test]
    fn non_finite_prediction_is_located() {
        let ds = two_col(array![[1.0, 2.0], [3.0, 0.0]]);
        let grid = select_grid(&ds, "x1", &GridPolicy::Explicit(vec![1.0, 2.0])).unwrap();
        let perm = build_permuted_pd_data(&ds, &grid).unwrap();
        let err = compute_pd(&Closure(2, |r: &[f64]| r[0] / r[1]), &perm).unwrap_err();
        assert!(matches!(err, Error::NonFinitePrediction { grid_index: 0, row: 1, .. }));
    }

    #[test]
    fn additive_recovery_up_to_constant() {
        let rows = Array2::from_shape_fn((40, 2), |(i, j)| ((i * 13 + j * 7) % 17) as f64 * 0.3 - 2.0);
        let ds = two_col(rows);
        let h1 = |x: f64| x * x - 3.0 * x;
        let model = Closure(2, move |r: &[f64]| h1(r[0]) + (r[1] * 2.0).cos());
        let grid = select_grid(&ds, "x1", &GridPolicy::AllUnique).unwrap();
        let pd = compute_pd(&model, &build_permuted_pd_data(&ds, &grid).unwrap()).unwrap();
        let h: Vec<f64> = grid.values.iter().map(|&v| h1(v)).collect();
        let (mp, mh) = (mean_in_row_order(pd.values.clone()), mean_in_row_order(h.clone()));
        for (a, b) in pd.values.iter().zip(&h) {
            assert!(((a - mp) - (b - mh)).abs() < 1e-9);
        }
    }
}
