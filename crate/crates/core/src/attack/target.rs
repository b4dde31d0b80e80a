use std::fmt;

use crate::error::{invalid, Result};
use crate::explain::{CurveKind, GridSpec, PdCurve};

/// The PD curve the attacker wants to show for one feature.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetPd {
    pub feature: String,
    pub grid: GridSpec,
    pub desired: Vec<f64>,
}

impl TargetPd {
    pub fn explicit(grid: GridSpec, desired: Vec<f64>) -> Result<Self> {
        if desired.len() != grid.len() {
            return Err(invalid(format!(
                "target for `{}` has {} values but the grid has {}",
                grid.feature,
                desired.len(),
                grid.len()
            )));
        }
        if let Some(v) = desired.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("target for `{}` contains {v}", grid.feature)));
        }
        Ok(Self {
            feature: grid.feature.clone(),
            grid,
            desired,
        })
    }

    pub fn flat_at(grid: GridSpec, level: f64) -> Result<Self> {
        let desired = vec![level; grid.len()];
        Self::explicit(grid, desired)
    }

    /// `intercept + slope · v` at each grid value.
    pub fn linear(grid: GridSpec, slope: f64, intercept: f64) -> Result<Self> {
        let desired = grid.values.iter().map(|v| intercept + slope * v).collect();
        Self::explicit(grid, desired)
    }

    pub fn curve(&self) -> PdCurve {
        PdCurve::new(self.grid.clone(), self.desired.clone(), CurveKind::Target)
            .expect("validated on construction")
    }
}

/// A target written before the grid and the model are known.
///
/// `flat` without a level sits at the mean prediction of the original model;
/// `linear` without an intercept passes through that mean at the feature's
/// mean value.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    Flat(Option<f64>),
    Linear { slope: f64, intercept: Option<f64> },
    Explicit(Vec<f64>),
}

impl TargetSpec {
    pub fn resolve(&self, grid: GridSpec, mean_prediction: f64, feature_mean: f64) -> Result<TargetPd> {
        match self {
            TargetSpec::Flat(level) => TargetPd::flat_at(grid, level.unwrap_or(mean_prediction)),
            TargetSpec::Linear { slope, intercept } => {
                let b = intercept.unwrap_or(mean_prediction - slope * feature_mean);
                TargetPd::linear(grid, *slope, b)
            }
            TargetSpec::Explicit(values) => TargetPd::explicit(grid, values.clone()),
        }
    }

    /// Parses `flat`, `flat(L)`, `linear(S)`, `linear(S,B)` or
    /// `values(v1;v2;...)`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (name, args) = match text.split_once('(') {
            Some((name, rest)) => {
                let inner = rest
                    .strip_suffix(')')
                    .ok_or_else(|| invalid(format!("unclosed parenthesis in target `{text}`")))?;
                (name.trim(), Some(inner))
            }
            None => (text, None),
        };
        let numbers = |s: &str, sep: char| -> Result<Vec<f64>> {
            s.split(sep)
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| invalid(format!("bad number `{}` in target `{text}`", t.trim())))
                })
                .collect()
        };
        match (name, args) {
            ("flat", None) => Ok(TargetSpec::Flat(None)),
            ("flat", Some(a)) => match numbers(a, ',')?.as_slice() {
                [level] => Ok(TargetSpec::Flat(Some(*level))),
                _ => Err(invalid(format!("flat takes one level, got `{text}`"))),
            },
            ("linear", Some(a)) => match numbers(a, ',')?.as_slice() {
                [slope] => Ok(TargetSpec::Linear { slope: *slope, intercept: None }),
                [slope, b] => Ok(TargetSpec::Linear { slope: *slope, intercept: Some(*b) }),
                _ => Err(invalid(format!("linear takes a slope and optional intercept, got `{text}`"))),
            },
            ("values", Some(a)) => Ok(TargetSpec::Explicit(numbers(a, ';')?)),
            _ => Err(invalid(format!(
                "unknown target `{text}` (expected flat, flat(L), linear(S), linear(S,B) or values(...))"
            ))),
        }
    }
}

impl fmt::Display for TargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetSpec::Flat(None) => write!(f, "flat"),
            TargetSpec::Flat(Some(l)) => write!(f, "flat({l})"),
            TargetSpec::Linear { slope, intercept: None } => write!(f, "linear({slope})"),
            TargetSpec::Linear { slope, intercept: Some(b) } => write!(f, "linear({slope},{b})"),
            TargetSpec::Explicit(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "values({})", parts.join(";"))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureKind;
    use crate::explain::GridSource;

    fn grid(values: Vec<f64>) -> GridSpec {
        GridSpec {
            feature: "x".into(),
            feature_index: 0,
            kind: FeatureKind::Continuous,
            values,
            source: GridSource::Explicit,
        }
    }

    #[test]
    fn builders() {
        let g = grid(vec![-1.0, 0.0, 2.0]);
        assert_eq!(TargetPd::flat_at(g.clone(), 0.3).unwrap().desired, vec![0.3; 3]);
        assert_eq!(TargetPd::linear(g.clone(), 2.0, 1.0).unwrap().desired, vec![-1.0, 1.0, 5.0]);
        assert!(TargetPd::explicit(g.clone(), vec![1.0]).is_err());
        assert!(TargetPd::explicit(g.clone(), vec![1.0, f64::NAN, 0.0]).is_err());
        let centred = TargetSpec::Linear { slope: 2.0, intercept: None }
            .resolve(g.clone(), 10.0, 1.0)
            .unwrap();
        assert_eq!(centred.desired, vec![6.0, 8.0, 12.0]);
        assert_eq!(TargetSpec::Flat(None).resolve(g, 4.0, 0.0).unwrap().desired, vec![4.0; 3]);
    }

    #[test]
    fn parse_and_display_round_trip() {
        for text in ["flat", "flat(0.25)", "linear(2)", "linear(2,-0.5)", "values(1;2.5;3)"] {
            let spec = TargetSpec::parse(text).unwrap();
            assert_eq!(spec.to_string(), text);
            assert_eq!(TargetSpec::parse(&spec.to_string()).unwrap(), spec);
        }
        for bad in ["", "flat(", "linear", "linear(a)", "curvy(1)", "flat(1,2)"] {
            assert!(TargetSpec::parse(bad).is_err(), "{bad}");
        }
    }
}
