use std::io::{Read, Write};
use std::path::Path;

use super::dataset::{Column, Dataset};
use super::schema::{AttrKind, Attribute, Schema};
use crate::error::{Error, Result};

/// Reads an RFC 4180 CSV file with a header row.
///
/// Kinds come from `schema_hint` where it names an attribute; the remaining
/// columns are inferred, trying binary, then continuous, then categorical.
/// Empty cells are rejected.
pub fn load_csv(path: impl AsRef<Path>, schema_hint: Option<&Schema>) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(file), schema_hint)
}

pub fn read_csv<R: Read>(reader: R, schema_hint: Option<&Schema>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_owned()).collect();
    if let Some(hint) = schema_hint {
        for attr in hint.attributes() {
            if !header.contains(&attr.name) {
                return Err(Error::MissingColumn(attr.name.clone()));
            }
        }
    }
    let width = header.len();
    let mut raw: Vec<Vec<String>> = vec![Vec::new(); width];
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != width {
            return Err(Error::RaggedRow {
                row,
                found: record.len(),
                expected: width,
            });
        }
        for (c, field) in record.iter().enumerate() {
            let field = field.trim();
            if field.is_empty() {
                return Err(Error::UnparseableValue {
                    row,
                    column: header[c].clone(),
                    value: String::new(),
                });
            }
            raw[c].push(field.to_owned());
        }
    }

    let mut attributes = Vec::with_capacity(width);
    let mut columns = Vec::with_capacity(width);
    for (c, values) in raw.into_iter().enumerate() {
        let name = header[c].clone();
        let kind = match schema_hint.and_then(|h| h.get(&name)) {
            Some(attr) => attr.kind,
            None => infer_kind(&values),
        };
        columns.push(parse_column(&name, kind, &values)?);
        attributes.push(Attribute { name, kind });
    }
    Dataset::from_columns(Schema::new(attributes)?, columns)
}

fn infer_kind(values: &[String]) -> AttrKind {
    let parsed: Option<Vec<f64>> = values.iter().map(|v| v.parse::<f64>().ok()).collect();
    match parsed {
        Some(nums) if nums.iter().all(|&x| x == 0.0 || x == 1.0) => AttrKind::NumericBinary,
        Some(nums) if nums.iter().all(|x| x.is_finite()) => AttrKind::NumericContinuous,
        _ => AttrKind::Categorical,
    }
}

fn parse_column(name: &str, kind: AttrKind, values: &[String]) -> Result<Column> {
    match kind {
        AttrKind::Categorical => Ok(Column::categorical_from(values)),
        AttrKind::NumericContinuous | AttrKind::NumericBinary => {
            let mut out = Vec::with_capacity(values.len());
            for (row, v) in values.iter().enumerate() {
                let x = v.parse::<f64>().ok().filter(|x| {
                    x.is_finite() && (kind != AttrKind::NumericBinary || *x == 0.0 || *x == 1.0)
                });
                match x {
                    Some(x) => out.push(x),
                    None => {
                        return Err(Error::UnparseableValue {
                            row,
                            column: name.to_owned(),
                            value: v.clone(),
                        })
                    }
                }
            }
            Ok(Column::Numeric(out))
        }
    }
}

/// Writes `rows` (all rows when `None`) as CSV. With `id_column`, a leading
/// column carries each row's tuple index.
pub fn write_csv<W: Write>(
    dataset: &Dataset,
    writer: W,
    rows: Option<&[usize]>,
    id_column: Option<&str>,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = Vec::with_capacity(dataset.schema().len() + 1);
    if let Some(id) = id_column {
        header.push(id);
    }
    header.extend(dataset.schema().attributes().iter().map(|a| a.name.as_str()));
    wtr.write_record(&header)?;
    let all: Vec<usize>;
    let rows = match rows {
        Some(r) => r,
        None => {
            all = (0..dataset.n()).collect();
            &all
        }
    };
    let width = dataset.schema().len();
    let mut record = Vec::with_capacity(width + 1);
    for &row in rows {
        record.clear();
        if id_column.is_some() {
            record.push(row.to_string());
        }
        for c in 0..width {
            record.push(match dataset.column(c) {
                Column::Numeric(v) => format!("{}", v[row]),
                Column::Categorical { .. } => dataset.value_string(row, c),
            });
        }
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}
