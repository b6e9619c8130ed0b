//! KEEL `.dat` reader and writer.

use std::fmt::Write as _;

use super::{canonicalize_classes, Dataset, DatasetError, NominalExpansion};
use crate::matrix::Matrix;

#[derive(Debug, Clone)]
enum AttrKind {
    Numeric,
    Nominal(Vec<String>),
}

#[derive(Debug, Clone)]
struct Attribute {
    name: String,
    kind: AttrKind,
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    for q in ['\'', '"'] {
        if s.len() >= 2 && s.starts_with(q) && s.ends_with(q) {
            return &s[1..s.len() - 1];
        }
    }
    s
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(|v| unquote(v).to_string()).filter(|v| !v.is_empty()).collect()
}

/// Splits `@directive rest` into a lowercase directive and the remainder.
fn directive(line: &str) -> (String, &str) {
    let end = line.find(|c: char| c.is_whitespace() || c == '{').unwrap_or(line.len());
    (line[..end].to_ascii_lowercase(), line[end..].trim())
}

fn parse_attribute(rest: &str) -> Result<Attribute, DatasetError> {
    let rest = rest.trim();
    let (name, tail) = if let Some(q) = rest.chars().next().filter(|c| *c == '\'' || *c == '"') {
        let close = rest[1..]
            .find(q)
            .ok_or_else(|| DatasetError::MalformedHeader(format!("unterminated quote in @attribute {rest}")))?;
        (&rest[1..close + 1], rest[close + 2..].trim())
    } else {
        let end = rest.find(|c: char| c.is_whitespace() || c == '{').unwrap_or(rest.len());
        (&rest[..end], rest[end..].trim())
    };
    if name.is_empty() {
        return Err(DatasetError::MalformedHeader("@attribute without a name".into()));
    }
    let kind = if let Some(body) = tail.strip_prefix('{') {
        let body = body
            .split('}')
            .next()
            .filter(|_| body.contains('}'))
            .ok_or_else(|| DatasetError::MalformedHeader(format!("unterminated value list for {name}")))?;
        AttrKind::Nominal(split_list(body))
    } else {
        let ty = tail.split(|c: char| c.is_whitespace() || c == '[').next().unwrap_or("").to_ascii_lowercase();
        match ty.as_str() {
            "real" | "integer" | "numeric" => AttrKind::Numeric,
            other => {
                return Err(DatasetError::MalformedHeader(format!(
                    "attribute {name} has unsupported type {other:?}"
                )))
            }
        }
    };
    Ok(Attribute { name: name.to_string(), kind })
}

fn is_missing(cell: &str) -> bool {
    cell == "?" || cell.eq_ignore_ascii_case("<null>")
}

/// Parses KEEL text into a canonical dataset.
///
/// Numeric attributes map to one column each; nominal inputs are one-hot
/// expanded in declared value order. The class attribute is named by
/// `@outputs`, or is the last attribute.
pub fn parse_keel(text: &str) -> Result<Dataset, DatasetError> {
    let mut relation = String::new();
    let mut attributes: Vec<Attribute> = Vec::new();
    let mut inputs: Option<Vec<String>> = None;
    let mut output: Option<String> = None;
    let mut in_data = false;
    let mut rows: Vec<(usize, Vec<&str>)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if in_data {
            rows.push((lineno + 1, line.split(',').map(str::trim).collect()));
            continue;
        }
        if !line.starts_with('@') {
            return Err(DatasetError::MalformedHeader(format!(
                "line {}: unexpected content before @data: {line:?}",
                lineno + 1
            )));
        }
        let (dir, rest) = directive(line);
        match dir.as_str() {
            "@relation" => relation = unquote(rest).to_string(),
            "@attribute" => attributes.push(parse_attribute(rest)?),
            "@inputs" | "@input" => inputs = Some(split_list(rest)),
            "@outputs" | "@output" => {
                let outs = split_list(rest);
                if outs.len() != 1 {
                    return Err(DatasetError::MalformedHeader(format!("expected one @outputs attribute, got {outs:?}")));
                }
                output = outs.into_iter().next();
            }
            "@data" => in_data = true,
            other => return Err(DatasetError::MalformedHeader(format!("unknown directive {other}"))),
        }
    }
    if !in_data {
        return Err(DatasetError::MalformedHeader("missing @data".into()));
    }
    if attributes.len() < 2 {
        return Err(DatasetError::MalformedHeader(
            "need at least one input @attribute and a class @attribute".into(),
        ));
    }
    let class_idx = match &output {
        Some(name) => attributes
            .iter()
            .position(|a| &a.name == name)
            .ok_or_else(|| DatasetError::MalformedHeader(format!("@outputs names unknown attribute {name}")))?,
        None => attributes.len() - 1,
    };
    let input_idx: Vec<usize> = (0..attributes.len())
        .filter(|&i| i != class_idx)
        .filter(|&i| inputs.as_ref().is_none_or(|ins| ins.contains(&attributes[i].name)))
        .collect();
    if input_idx.is_empty() {
        return Err(DatasetError::MalformedHeader("no input attributes".into()));
    }
    if rows.is_empty() {
        return Err(DatasetError::EmptyData);
    }

    let mut attribute_names = Vec::new();
    let mut encoding = Vec::new();
    for &i in &input_idx {
        let a = &attributes[i];
        match &a.kind {
            AttrKind::Numeric => attribute_names.push(a.name.clone()),
            AttrKind::Nominal(values) => {
                encoding.push(NominalExpansion {
                    attribute: a.name.clone(),
                    values: values.clone(),
                    first_column: attribute_names.len(),
                });
                attribute_names.extend(values.iter().map(|v| format!("{}={}", a.name, v)));
            }
        }
    }

    let d = attribute_names.len();
    let mut data = Vec::with_capacity(rows.len() * d);
    let mut raw_classes = Vec::with_capacity(rows.len());
    for (line, cells) in &rows {
        if cells.len() != attributes.len() {
            return Err(DatasetError::Invalid(format!(
                "line {line}: expected {} fields, found {}",
                attributes.len(),
                cells.len()
            )));
        }
        for &i in &input_idx {
            let cell = unquote(cells[i]);
            let a = &attributes[i];
            let bad = || DatasetError::NonNumericValue {
                line: *line,
                column: a.name.clone(),
                value: cell.to_string(),
            };
            if is_missing(cell) {
                return Err(bad());
            }
            match &a.kind {
                AttrKind::Numeric => {
                    let v: f64 = cell.parse().map_err(|_| bad())?;
                    if !v.is_finite() {
                        return Err(bad());
                    }
                    data.push(v);
                }
                AttrKind::Nominal(values) => {
                    let hit = values.iter().position(|v| v == cell).ok_or_else(bad)?;
                    data.extend((0..values.len()).map(|k| if k == hit { 1.0 } else { 0.0 }));
                }
            }
        }
        let class = unquote(cells[class_idx]);
        if is_missing(class) {
            return Err(DatasetError::NonNumericValue {
                line: *line,
                column: attributes[class_idx].name.clone(),
                value: class.to_string(),
            });
        }
        raw_classes.push(class.to_string());
    }

    let declared = match &attributes[class_idx].kind {
        AttrKind::Nominal(v) => v.clone(),
        AttrKind::Numeric => Vec::new(),
    };
    let (labels, class_names) = canonicalize_classes(&raw_classes, &declared)?;
    let n = rows.len();
    let [neg, pos] = class_names;
    Ok(Dataset::new(relation, Matrix::from_vec(n, d, data), labels, attribute_names)?
        .with_class_names(neg, pos)
        .with_source_encoding(encoding))
}

fn quote_name(name: &str) -> String {
    if name.chars().any(|c| c.is_whitespace() || matches!(c, ',' | '{' | '}' | '\'' | '%')) {
        format!("'{name}'")
    } else {
        name.to_string()
    }
}

/// Whether every row holds exactly one `1.0` and otherwise `0.0` in the group.
fn one_hot_intact(ds: &Dataset, group: &NominalExpansion) -> bool {
    let width = group.values.len();
    ds.features().iter_rows().all(|row| {
        let cells = &row[group.first_column..group.first_column + width];
        cells.iter().filter(|&&v| v == 1.0).count() == 1 && cells.iter().all(|&v| v == 0.0 || v == 1.0)
    })
}

/// Writes a dataset as KEEL text. One-hot groups that are still intact are
/// collapsed back to their nominal attribute.
pub fn serialize_keel(ds: &Dataset) -> String {
    let groups: Vec<&NominalExpansion> = ds.source_encoding().iter().filter(|g| one_hot_intact(ds, g)).collect();
    let d = ds.n_features();
    let feats = ds.features();

    // Each entry: (attribute name, Some(group) for collapsed nominal, column).
    let mut layout: Vec<(String, Option<&NominalExpansion>, usize)> = Vec::new();
    let mut col = 0;
    while col < d {
        if let Some(g) = groups.iter().find(|g| g.first_column == col) {
            layout.push((g.attribute.clone(), Some(g), col));
            col += g.values.len();
        } else {
            layout.push((ds.attribute_names()[col].clone(), None, col));
            col += 1;
        }
    }

    let mut out = String::new();
    let _ = writeln!(out, "@relation {}", quote_name(&ds.name));
    for (name, group, col) in &layout {
        match group {
            Some(g) => {
                let vals: Vec<String> = g.values.iter().map(|v| quote_name(v)).collect();
                let _ = writeln!(out, "@attribute {} {{{}}}", quote_name(name), vals.join(", "));
            }
            None => {
                let (lo, hi) = feats
                    .iter_rows()
                    .map(|r| r[*col])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                let _ = writeln!(out, "@attribute {} real [{lo}, {hi}]", quote_name(name));
            }
        }
    }
    let [neg, pos] = ds.class_names();
    // Positive first so an exact tie re-parses to the same labels.
    let _ = writeln!(out, "@attribute Class {{{}, {}}}", quote_name(pos), quote_name(neg));
    let names: Vec<String> = layout.iter().map(|(n, _, _)| quote_name(n)).collect();
    let _ = writeln!(out, "@inputs {}", names.join(", "));
    let _ = writeln!(out, "@outputs Class");
    let _ = writeln!(out, "@data");
    for (row, &label) in feats.iter_rows().zip(ds.labels()) {
        let mut cells: Vec<String> = Vec::with_capacity(layout.len() + 1);
        for (_, group, col) in &layout {
            match group {
                Some(g) => {
                    let hit = (0..g.values.len()).find(|&k| row[col + k] == 1.0).unwrap_or(0);
                    cells.push(quote_name(&g.values[hit]));
                }
                None => cells.push(format!("{}", row[*col])),
            }
        }
        cells.push(quote_name(&ds.class_names()[label as usize]));
        let _ = writeln!(out, "{}", cells.join(", "));
    }
    out
}
