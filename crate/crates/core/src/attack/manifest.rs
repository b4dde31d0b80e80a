//! Versioned plain-text description of a built attack.
//!
//! ```text
//! pdfool-attack 1
//! mode multi
//! threshold 0.955
//! original f.model
//! extrapolation c.model
//! allocator g.model
//! targets x1,x6
//! compensation x1 index=0 kind=continuous points=2
//! -1.5 0.62 0.01 -0.3 0.0
//! ...
//! ```
//!
//! Each compensation row is `value lambda rho gamma desired`. Model entries
//! are file names resolved by the caller.

use std::sync::Arc;

use super::classifier::{AllocatorClassifier, ExtrapolationClassifier};
use super::compensation::{CompensationEntry, CompensationTable, FeatureCompensation};
use super::model::{build_adversarial_multi, build_adversarial_single, AdversarialModel};
use crate::data::FeatureKind;
use crate::error::{Error, Result};
use crate::learner::Predictor;

const HEADER: &str = "pdfool-attack 1";

#[derive(Debug, Clone, PartialEq)]
pub struct AttackManifest {
    pub threshold: f64,
    pub original: String,
    pub extrapolation: String,
    pub allocator: Option<String>,
    pub targets: Vec<String>,
    pub compensation: CompensationTable,
}

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::ModelFormat(format!("attack manifest line {line}: {msg}"))
}

fn num(line: usize, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| bad(line, format!("`{s}` is not a finite number")))
}

impl AttackManifest {
    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER}\n");
        let mode = if self.allocator.is_some() { "multi" } else { "single" };
        out.push_str(&format!("mode {mode}\nthreshold {}\n", self.threshold));
        out.push_str(&format!("original {}\nextrapolation {}\n", self.original, self.extrapolation));
        if let Some(a) = &self.allocator {
            out.push_str(&format!("allocator {a}\n"));
        }
        out.push_str(&format!("targets {}\n", self.targets.join(",")));
        for fc in self.compensation.features() {
            out.push_str(&format!(
                "compensation {} index={} kind={} points={}\n",
                fc.feature,
                fc.feature_index,
                fc.kind.as_str(),
                fc.entries.len()
            ));
            for e in &fc.entries {
                out.push_str(&format!("{} {} {} {} {}\n", e.value, e.lambda, e.rho, e.gamma, e.desired));
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        let mut next = |what: &str| -> Result<(usize, &str)> {
            lines.next().ok_or_else(|| Error::ModelFormat(format!("attack manifest ends before `{what}`")))
        };
        let (n, first) = next("header")?;
        if first != HEADER {
            return Err(bad(n, format!("expected `{HEADER}`")));
        }
        let mut field = |key: &str| -> Result<(usize, String)> {
            let (n, l) = next(key)?;
            match l.split_once(' ') {
                Some((k, v)) if k == key => Ok((n, v.trim().to_string())),
                _ => Err(bad(n, format!("expected `{key} ...`"))),
            }
        };
        let (n, mode) = field("mode")?;
        let multi = match mode.as_str() {
            "single" => false,
            "multi" => true,
            other => return Err(bad(n, format!("unknown mode `{other}`"))),
        };
        let (n, t) = field("threshold")?;
        let threshold = num(n, &t)?;
        let original = field("original")?.1;
        let extrapolation = field("extrapolation")?.1;
        let allocator = if multi { Some(field("allocator")?.1) } else { None };
        let targets: Vec<String> = field("targets")?.1.split(',').map(|s| s.trim().to_string()).collect();

        let mut features = Vec::new();
        while let Some((n, l)) = lines.next() {
            let parts: Vec<&str> = l.split_whitespace().collect();
            let (name, index, kind, points) = match parts.as_slice() {
                ["compensation", name, index, kind, points] => (*name, *index, *kind, *points),
                _ => return Err(bad(n, "expected `compensation <feature> index=.. kind=.. points=..`")),
            };
            let value_of = |s: &str, key: &str| -> Result<String> {
                s.strip_prefix(key)
                    .and_then(|r| r.strip_prefix('='))
                    .map(str::to_string)
                    .ok_or_else(|| bad(n, format!("expected `{key}=`")))
            };
            let index: usize = value_of(index, "index")?.parse().map_err(|_| bad(n, "bad index"))?;
            let kind = FeatureKind::parse(&value_of(kind, "kind")?).map_err(|e| bad(n, e))?;
            let points: usize = value_of(points, "points")?.parse().map_err(|_| bad(n, "bad points"))?;
            let mut entries = Vec::with_capacity(points);
            for _ in 0..points {
                let (n, l) = lines
                    .next()
                    .ok_or_else(|| Error::ModelFormat(format!("compensation of `{name}` is cut short")))?;
                let v: Vec<f64> = l.split_whitespace().map(|s| num(n, s)).collect::<Result<_>>()?;
                match v.as_slice() {
                    &[value, lambda, rho, gamma, desired] => entries.push(CompensationEntry {
                        value,
                        lambda,
                        rho,
                        gamma,
                        desired,
                    }),
                    _ => return Err(bad(n, "expected `value lambda rho gamma desired`")),
                }
            }
            features.push(FeatureCompensation::new(name.to_string(), index, kind, entries)?);
        }
        Ok(Self {
            threshold,
            original,
            extrapolation,
            allocator,
            targets,
            compensation: CompensationTable::new(features)?,
        })
    }

    /// Rebuilds the composite, loading each referenced model through `load`.
    pub fn build(
        &self,
        mut load: impl FnMut(&str) -> Result<Arc<dyn Predictor>>,
    ) -> Result<AdversarialModel> {
        let f = load(&self.original)?;
        let c = ExtrapolationClassifier::new(load(&self.extrapolation)?, self.threshold)?;
        match &self.allocator {
            None => {
                let [target] = self.targets.as_slice() else {
                    return Err(Error::ModelFormat("single mode needs exactly one target".into()));
                };
                build_adversarial_single(f, c, self.compensation.clone(), target)
            }
            Some(a) => {
                let alloc = AllocatorClassifier::new(load(a)?, self.targets.len())?;
                build_adversarial_multi(f, c, alloc, self.compensation.clone(), self.targets.clone())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(allocator: Option<&str>) -> AttackManifest {
        let entries = vec![
            CompensationEntry { value: -1.25, lambda: 0.1, rho: 0.2, gamma: 1.0 / 3.0, desired: 0.2 },
            CompensationEntry { value: 0.5, lambda: 1.0, rho: 0.0, gamma: -7.5e-12, desired: 0.4 },
        ];
        let fc = FeatureCompensation::new("x1".into(), 0, FeatureKind::Continuous, entries).unwrap();
        AttackManifest {
            threshold: 0.955,
            original: "f.model".into(),
            extrapolation: "c.model".into(),
            allocator: allocator.map(str::to_string),
            targets: vec!["x1".into()],
            compensation: CompensationTable::new(vec![fc]).unwrap(),
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        for m in [manifest(None), manifest(Some("g.model"))] {
            let text = m.to_text();
            assert!(text.starts_with("pdfool-attack 1\n"));
            assert_eq!(AttackManifest::parse(&text).unwrap(), m);
        }
    }

    #[test]
    fn damaged_files_are_rejected() {
        let text = manifest(None).to_text();
        assert!(AttackManifest::parse(&text.replace("pdfool-attack 1", "pdfool-attack 2")).is_err());
        assert!(AttackManifest::parse(&text.replace("points=2", "points=3")).is_err());
        assert!(AttackManifest::parse(&text.replace("mode single", "mode triple")).is_err());
        let err = AttackManifest::parse(&text.replace("0.955", "x")).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }
}
