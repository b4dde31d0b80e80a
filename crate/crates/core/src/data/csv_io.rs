//! Comma-delimited CSV with a mandatory header row and `.` decimal separator.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{validate_schema_list, Dataset, FeatureKind, FeatureSchema};
use crate::error::{Error, Result};

pub fn load_csv(
    path: impl AsRef<Path>,
    schema: &[FeatureSchema],
    target_column: &str,
) -> Result<Dataset> {
    let file = File::open(path.as_ref())?;
    read_csv(file, schema, target_column, None)
}

/// Parses a dataset from any reader. `weight_column`, when given, is carried
/// as the dataset's weight vector.
pub fn read_csv<R: Read>(
    reader: R,
    schema: &[FeatureSchema],
    target_column: &str,
    weight_column: Option<&str>,
) -> Result<Dataset> {
    validate_schema_list(schema)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .delimiter(b',')
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::Empty("CSV file is empty".into()));
    }
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("column `{name}` missing from CSV header")))
    };
    let feature_cols: Vec<usize> = schema.iter().map(|f| find(&f.name)).collect::<Result<_>>()?;
    let target_col = find(target_column)?;
    let weight_col = weight_column.map(find).transpose()?;

    let p = schema.len();
    let mut cells = Vec::new();
    let mut target = Vec::new();
    let mut weights = weight_col.map(|_| Vec::new());
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        for (f, &c) in schema.iter().zip(&feature_cols) {
            let raw = record.get(c).unwrap_or("").trim();
            cells.push(parse_feature_cell(f, raw, i)?);
        }
        let raw = record.get(target_col).unwrap_or("").trim();
        target.push(parse_number(raw, i, target_column)?);
        if let (Some(w), Some(c)) = (weights.as_mut(), weight_col) {
            let raw = record.get(c).unwrap_or("").trim();
            w.push(parse_number(raw, i, weight_column.unwrap_or_default())?);
        }
    }
    if target.is_empty() {
        return Err(Error::Empty("CSV file has a header but no data rows".into()));
    }
    let rows = Array2::from_shape_vec((target.len(), p), cells)
        .expect("cell count is rows times schema width");
    Dataset::new(schema.to_vec(), rows, target, weights)
}

fn parse_feature_cell(f: &FeatureSchema, raw: &str, row: usize) -> Result<f64> {
    match f.kind {
        FeatureKind::Categorical => f
            .category_index(raw)
            .map(|k| k as f64)
            .ok_or_else(|| Error::Cell {
                row,
                column: f.name.clone(),
                message: format!("unknown category `{raw}`"),
            }),
        _ => parse_number(raw, row, &f.name),
    }
}

fn parse_number(raw: &str, row: usize, column: &str) -> Result<f64> {
    let cell_err = |message: String| Error::Cell {
        row,
        column: column.to_string(),
        message,
    };
    if raw.is_empty() {
        return Err(cell_err("missing value".into()));
    }
    let v: f64 = raw
        .parse()
        .map_err(|_| cell_err(format!("cannot parse `{raw}` as a number")))?;
    if !v.is_finite() {
        return Err(cell_err(format!("`{raw}` is not a finite number")));
    }
    Ok(v)
}

pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>, target_column: &str) -> Result<()> {
    let mut file = File::create(path.as_ref())?;
    write_csv_to(dataset, &mut file, target_column)?;
    file.flush()?;
    Ok(())
}

/// Writes features (categorical as labels) followed by the target column.
/// Floats use the shortest representation that parses back to the same bits.
pub fn write_csv_to<W: Write>(dataset: &Dataset, writer: W, target_column: &str) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().from_writer(writer);
    let mut header: Vec<&str> = dataset.feature_names();
    header.push(target_column);
    wtr.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for i in 0..dataset.n_rows() {
        record.clear();
        for (f, &v) in dataset.schema().iter().zip(dataset.row(i)) {
            record.push(match f.kind {
                FeatureKind::Categorical => f.categories[v as usize].clone(),
                _ => v.to_string(),
            });
        }
        record.push(dataset.target()[i].to_string());
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Schema files hold one feature per line: `name,kind` or
/// `name,categorical,A|B|C`. Blank lines and `#` comments are ignored.
pub fn parse_schema(text: &str) -> Result<Vec<FeatureSchema>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.splitn(3, ',').map(str::trim).collect();
        let bad = |m: &str| Error::Schema(format!("schema line {}: {m}", lineno + 1));
        if parts.len() < 2 {
            return Err(bad("expected `name,kind`"));
        }
        let kind = FeatureKind::parse(parts[1])?;
        let feature = match kind {
            FeatureKind::Categorical => {
                let cats = parts
                    .get(2)
                    .ok_or_else(|| bad("categorical feature needs a `A|B|...` category list"))?;
                FeatureSchema::categorical(parts[0], cats.split('|').map(str::trim))?
            }
            _ => {
                if parts.len() > 2 {
                    return Err(bad("only categorical features take a category list"));
                }
                FeatureSchema {
                    name: parts[0].to_string(),
                    kind,
                    categories: Vec::new(),
                }
            }
        };
        out.push(feature);
    }
    validate_schema_list(&out)?;
    Ok(out)
}

pub fn format_schema(schema: &[FeatureSchema]) -> String {
    let mut s = String::new();
    for f in schema {
        s.push_str(&f.name);
        s.push(',');
        s.push_str(f.kind.as_str());
        if f.kind == FeatureKind::Categorical {
            s.push(',');
            s.push_str(&f.categories.join("|"));
        }
        s.push('\n');
    }
    s
}
