//! CSV exchange for curves and importances.
//!
//! Curves: `feature,grid_value,series,value`, where `series` is a curve kind
//! (`original`, `adversarial`, `target`, `conditional_rho`) or, for ICE
//! rows, `row:<index>`.

use std::io::{Read, Write};

use super::pd::{IceBundle, PdCurve};
use super::pfi::PfiResult;
use crate::error::{Error, Result};

pub const CURVE_HEADER: [&str; 4] = ["feature", "grid_value", "series", "value"];

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRecord {
    pub feature: String,
    pub grid_value: f64,
    pub series: String,
    pub value: f64,
}

pub fn write_curves_csv<W: Write>(curves: &[&PdCurve], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(CURVE_HEADER)?;
    for c in curves {
        for (g, v) in c.grid.values.iter().zip(&c.values) {
            wtr.write_record([
                c.feature.as_str(),
                &g.to_string(),
                c.kind.as_str(),
                &v.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_ice_csv<W: Write>(ice: &IceBundle, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(CURVE_HEADER)?;
    for (i, row) in ice.curves.rows().into_iter().enumerate() {
        let series = format!("row:{i}");
        for (g, v) in ice.grid.values.iter().zip(row.iter()) {
            wtr.write_record([ice.feature.as_str(), &g.to_string(), &series, &v.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_pfi_csv<W: Write>(pfi: &PfiResult, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["feature", "repeat", "importance"])?;
    for f in &pfi.features {
        for (r, v) in f.estimates.iter().enumerate() {
            wtr.write_record([f.feature.as_str(), &r.to_string(), &v.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a curves file; errors name the 1-based line.
pub fn read_curves_csv<R: Read>(reader: R) -> Result<Vec<CurveRecord>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().map(str::trim).ne(CURVE_HEADER) {
        return Err(Error::Cell {
            row: 0,
            column: "header".into(),
            message: format!("line 1: expected header {}", CURVE_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let bad = |column: &str, msg: String| Error::Cell {
            row: i,
            column: column.into(),
            message: format!("line {line}: {msg}"),
        };
        if rec.len() != 4 {
            return Err(bad("*", format!("expected 4 fields, found {}", rec.len())));
        }
        let num = |k: usize, name: &str| -> Result<f64> {
            rec[k]
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(name, format!("`{}` is not a finite number", &rec[k])))
        };
        out.push(CurveRecord {
            feature: rec[0].trim().to_string(),
            grid_value: num(1, "grid_value")?,
            series: rec[2].trim().to_string(),
            value: num(3, "value")?,
        });
    }
    if out.is_empty() {
        return Err(Error::Empty("curves file has no rows".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::{CurveKind, GridSource, GridSpec};
    use crate::data::FeatureKind;

    fn grid() -> GridSpec {
        GridSpec {
            feature: "age".into(),
            feature_index: 0,
            kind: FeatureKind::Discrete,
            values: vec![18.0, 19.5],
            source: GridSource::Explicit,
        }
    }

    #[test]
    fn curves_round_trip() {
        let c = PdCurve::new(grid(), vec![0.1, 1.0 / 3.0], CurveKind::Adversarial).unwrap();
        let mut buf = Vec::new();
        write_curves_csv(&[&c], &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("feature,grid_value,series,value\nage,18,adversarial,0.1\n"));
        let recs = read_curves_csv(buf.as_slice()).unwrap();
        assert_eq!(recs[1].value, 1.0 / 3.0);
    }

    #[test]
    fn malformed_lines_are_named() {
        let err = read_curves_csv("feature,grid_value,series,value\na,1,original,2\na,x,original,3\n".as_bytes())
            .unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(read_curves_csv("a,b\n".as_bytes()).is_err());
    }
}
