use ndarray::Array2;

use super::grid::GridSpec;
use crate::data::Dataset;
use crate::error::{Error, Result};

/// The `n × m` permuted copies of a dataset used for one feature's PD plot:
/// block `p` is the source rows with the feature column set to grid value
/// `p`. Blocks are materialized one at a time, grid-major and row-minor.
#[derive(Debug, Clone)]
pub struct PermutedPdData<'a> {
    rows: &'a Array2<f64>,
    grid: GridSpec,
}

pub fn build_permuted_pd_data<'a>(dataset: &'a Dataset, grid: &GridSpec) -> Result<PermutedPdData<'a>> {
    PermutedPdData::new(dataset.rows(), grid.clone())
}

impl<'a> PermutedPdData<'a> {
    pub fn new(rows: &'a Array2<f64>, grid: GridSpec) -> Result<Self> {
        if grid.feature_index >= rows.ncols() {
            return Err(Error::Schema(format!(
                "grid feature `{}` is outside the data's {} columns",
                grid.feature,
                rows.ncols()
            )));
        }
        Ok(Self { rows, grid })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn source_rows(&self) -> &'a Array2<f64> {
        self.rows
    }

    pub fn n_source_rows(&self) -> usize {
        self.rows.nrows()
    }

    /// Conceptual size `n · m`.
    pub fn len(&self) -> usize {
        self.rows.nrows() * self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Source rows with the feature column overwritten by grid value `p`.
    pub fn block(&self, p: usize) -> Array2<f64> {
        let mut block = self.rows.as_standard_layout().into_owned();
        block
            .column_mut(self.grid.feature_index)
            .fill(self.grid.values[p]);
        block
    }

    pub fn blocks(&self) -> impl Iterator<Item = (f64, Array2<f64>)> + '_ {
        (0..self.grid.len()).map(move |p| (self.grid.values[p], self.block(p)))
    }
}
