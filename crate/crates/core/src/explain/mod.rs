//! Grid selection, permuted-dataset construction, and the permutation-based
//! explanations: partial dependence, ICE curves, permutation importance.

mod export;
mod grid;
mod pd;
mod permuted;
mod pfi;

pub use export::{
    read_curves_csv, write_curves_csv, write_ice_csv, write_pfi_csv, CurveRecord,
};
pub use grid::{select_grid, type7_quantile, GridPolicy, GridSource, GridSpec};
pub use pd::{compute_ice, compute_pd, mean_in_row_order, CurveKind, IceBundle, PdCurve};
pub use permuted::{build_permuted_pd_data, PermutedPdData};
pub use pfi::{compute_pfi, FeatureImportance, LossKind, PfiResult};
