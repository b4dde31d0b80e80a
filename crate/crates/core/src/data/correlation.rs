use std::collections::BTreeMap;

use ndarray::Array2;

use super::{Dataset, FeatureKind};
use crate::error::{Error, Result};

/// Category labels listed from lowest to highest rank, used to treat a
/// nominal feature as ordinal for rank correlation.
pub type OrdinalMap = Vec<String>;

/// Average ranks (1-based); tied values share the mean of their positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end (0-based) share rank mean((start+1)..=end)
        let rank = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

/// Sample Pearson correlation. Returns 0 when either input is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "pearson inputs differ in length");
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&average_ranks(a), &average_ranks(b))
}

/// Spearman matrix over the dataset's features. Categorical features must
/// either appear in `ordinal_maps` or be listed in `exclude`; excluded
/// features are dropped from the result. Returns the kept feature names and
/// the symmetric matrix.
pub fn spearman_correlation_matrix(
    dataset: &Dataset,
    ordinal_maps: &BTreeMap<String, OrdinalMap>,
    exclude: &[&str],
) -> Result<(Vec<String>, Array2<f64>)> {
    let mut names = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (j, f) in dataset.schema().iter().enumerate() {
        if exclude.contains(&f.name.as_str()) {
            continue;
        }
        let col = dataset.column(j).to_vec();
        let col = if f.kind == FeatureKind::Categorical {
            let order = ordinal_maps.get(&f.name).ok_or_else(|| {
                Error::Schema(format!(
                    "categorical feature `{}` needs an ordinal map or must be excluded",
                    f.name
                ))
            })?;
            let position: Vec<f64> = f
                .categories
                .iter()
                .map(|c| {
                    order.iter().position(|o| o == c).map(|p| p as f64).ok_or_else(|| {
                        Error::Schema(format!(
                            "ordinal map for `{}` does not rank category `{c}`",
                            f.name
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            col.iter().map(|&v| position[v as usize]).collect()
        } else {
            col
        };
        names.push(f.name.clone());
        columns.push(average_ranks(&col));
    }
    let p = columns.len();
    let mut m = Array2::<f64>::eye(p);
    for a in 0..p {
        for b in (a + 1)..p {
            let r = pearson(&columns[a], &columns[b]);
            m[[a, b]] = r;
            m[[b, a]] = r;
        }
    }
    Ok((names, m))
}
