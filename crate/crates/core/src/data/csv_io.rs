use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::nn::Matrix;

use super::schema::LABEL_COLUMN;
use super::{DataError, Dataset, DatasetSchema};

/// What to do with empty or non-numeric feature cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Fail, listing every offending data row (1-based, header excluded).
    #[default]
    Reject,
    /// Replace with the mean of the column's parseable cells in the same file.
    MeanImpute,
}

/// Reads a header-first CSV, mapping columns to `schema` by name.
///
/// The `rating` column is optional; when present every row must carry a
/// label, given either as a class name or as a class index.
pub fn load_csv(
    path: impl AsRef<Path>,
    schema: Arc<DatasetSchema>,
    policy: MissingPolicy,
) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    read_csv(file, schema, policy)
}

pub fn read_csv<R: std::io::Read>(
    reader: R,
    schema: Arc<DatasetSchema>,
    policy: MissingPolicy,
) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();

    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        // Completely empty input: no rows, nothing labeled.
        return Ok(Dataset::empty(schema, false));
    }

    let mut feature_col = vec![None; schema.num_features()];
    let mut label_col = None;
    for (c, name) in header.iter().enumerate() {
        if name == LABEL_COLUMN {
            if label_col.replace(c).is_some() {
                return Err(DataError::Schema(format!("column {name:?} appears twice")));
            }
            continue;
        }
        match schema.feature_names().iter().position(|f| f == name) {
            Some(j) => {
                if feature_col[j].replace(c).is_some() {
                    return Err(DataError::Schema(format!("column {name:?} appears twice")));
                }
            }
            None => return Err(DataError::UnknownColumn(name.to_string())),
        }
    }
    if let Some(j) = feature_col.iter().position(Option::is_none) {
        return Err(DataError::Schema(format!(
            "missing feature column {:?}",
            schema.feature_names()[j]
        )));
    }
    let feature_col: Vec<usize> = feature_col.into_iter().map(Option::unwrap).collect();

    let f = schema.num_features();
    let mut values: Vec<Option<f64>> = Vec::new();
    let mut labels = label_col.map(|_| Vec::new());
    let mut bad_rows = Vec::new();
    let mut n = 0;
    for (i, rec) in rdr.records().enumerate() {
        let row_no = i + 1;
        let rec = rec.map_err(csv_err)?;
        if rec.len() != header.len() {
            return Err(DataError::Arity {
                row: row_no,
                found: rec.len(),
                expected: header.len(),
            });
        }
        let mut row_bad = false;
        for &c in &feature_col {
            let v = rec[c].parse::<f64>().ok().filter(|v| v.is_finite());
            row_bad |= v.is_none();
            values.push(v);
        }
        if row_bad {
            bad_rows.push(row_no);
        }
        if let (Some(c), Some(labels)) = (label_col, labels.as_mut()) {
            let raw = &rec[c];
            let k = schema.parse_label(raw).ok_or_else(|| DataError::UnknownLabel {
                row: row_no,
                value: raw.to_string(),
            })?;
            labels.push(k);
        }
        n += 1;
    }

    if !bad_rows.is_empty() && policy == MissingPolicy::Reject {
        return Err(DataError::MissingValues { rows: bad_rows });
    }

    let mut data = Vec::with_capacity(n * f);
    if bad_rows.is_empty() {
        data.extend(values.iter().map(|v| v.unwrap()));
    } else {
        let mut sums = vec![0.0; f];
        let mut counts = vec![0usize; f];
        for (idx, v) in values.iter().enumerate() {
            if let Some(v) = v {
                sums[idx % f] += v;
                counts[idx % f] += 1;
            }
        }
        let means: Vec<f64> = sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
            .collect();
        data.extend(
            values
                .iter()
                .enumerate()
                .map(|(idx, v)| v.unwrap_or(means[idx % f])),
        );
        log::warn!("imputed missing values in {} rows", bad_rows.len());
    }
    let rows = Matrix::from_vec(n, f, data).expect("row-major buffer sized n*f");
    Dataset::new(schema, rows, labels)
}

/// Writes a dataset with a header row. Labels, when present, are written by
/// class name in a trailing `rating` column. Values use the shortest decimal
/// form that parses back to the same `f64`.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    let schema = ds.schema();
    let mut header: Vec<&str> = schema.feature_names().iter().map(String::as_str).collect();
    if ds.is_labeled() {
        header.push(LABEL_COLUMN);
    }
    w.write_record(&header).map_err(csv_err)?;
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for (i, row) in ds.rows().iter_rows().enumerate() {
        record.clear();
        record.extend(row.iter().map(|v| v.to_string()));
        if let Some(labels) = ds.labels() {
            record.push(schema.label_names()[labels[i]].clone());
        }
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush().map_err(|e| DataError::Io {
        path: "<csv writer>".into(),
        source: e,
    })?;
    Ok(())
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    write_csv(ds, std::io::BufWriter::new(file))
}

fn csv_err(e: csv::Error) -> DataError {
    DataError::Csv(e.to_string())
}
