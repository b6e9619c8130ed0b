use std::fmt;

use super::{canonicalize_classes, Dataset, DatasetError};
use crate::matrix::Matrix;

/// Which CSV column carries the class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
    Last,
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Name(n) => write!(f, "{n:?}"),
            Self::Index(i) => write!(f, "#{i}"),
            Self::Last => f.write_str("<last>"),
        }
    }
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => Self::Index(i),
            Err(_) => Self::Name(s.to_string()),
        })
    }
}

/// Parses a comma-delimited file with a header row. Every non-label cell
/// must be numeric; the label column is canonicalized like KEEL classes
/// (rarer value becomes `1`, ties go to the value seen first).
pub fn parse_csv(text: &str, label: LabelColumn) -> Result<Dataset, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| DatasetError::MalformedHeader(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(DatasetError::MalformedHeader("missing header row".into()));
    }
    let label_idx = match &label {
        LabelColumn::Name(n) => headers.iter().position(|h| h == n),
        LabelColumn::Index(i) => Some(*i).filter(|&i| i < headers.len()),
        LabelColumn::Last => Some(headers.len() - 1),
    }
    .ok_or_else(|| DatasetError::UnknownLabelColumn(label.to_string()))?;
    if headers.len() < 2 {
        return Err(DatasetError::MalformedHeader("need at least one feature column".into()));
    }

    let attribute_names: Vec<String> =
        headers.iter().enumerate().filter(|(i, _)| *i != label_idx).map(|(_, h)| h.clone()).collect();
    let d = attribute_names.len();
    let mut data = Vec::new();
    let mut raw = Vec::new();
    for (r, record) in reader.records().enumerate() {
        // header is line 1
        let line = r + 2;
        let record = record.map_err(|e| DatasetError::Invalid(format!("line {line}: {e}")))?;
        if record.len() != headers.len() {
            return Err(DatasetError::Invalid(format!(
                "line {line}: expected {} fields, found {}",
                headers.len(),
                record.len()
            )));
        }
        for (i, cell) in record.iter().enumerate() {
            if i == label_idx {
                raw.push(cell.to_string());
                continue;
            }
            let v = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                DatasetError::NonNumericValue { line, column: headers[i].clone(), value: cell.to_string() }
            })?;
            data.push(v);
        }
    }
    if raw.is_empty() {
        return Err(DatasetError::EmptyData);
    }
    let (labels, [neg, pos]) = canonicalize_classes(&raw, &[])?;
    let n = raw.len();
    Ok(Dataset::new("", Matrix::from_vec(n, d, data), labels, attribute_names)?.with_class_names(neg, pos))
}

/// Writes features followed by a `class` column holding the original class values.
pub fn write_csv(ds: &Dataset) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = ds.attribute_names().iter().map(String::as_str).collect();
    header.push("class");
    w.write_record(&header).expect("in-memory csv write");
    for (row, &label) in ds.features().iter_rows().zip(ds.labels()) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(ds.class_names()[label as usize].clone());
        w.write_record(&rec).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
}
