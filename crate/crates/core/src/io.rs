//! CSV input and output.
//!
//! Every file has a header row. Missing or non-numeric values are errors
//! that name the line they occur on.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::filter::SelectionResult;
use crate::partition::GroupPartition;

/// A numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub values: DMatrix<f64>,
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_err(path, 1, format!("{other:?}")),
        })
}

fn record_line(record: &csv::StringRecord) -> usize {
    record.position().map_or(0, |p| p.line() as usize)
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut rdr = reader(path)?;
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(parse_err(path, 1, "missing header row"));
    }
    let width = names.len();
    let mut values = Vec::new();
    let mut rows = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = record_line(&record);
        if record.len() != width {
            return Err(parse_err(
                path,
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        for (col, field) in record.iter().enumerate() {
            if field.is_empty() {
                return Err(parse_err(path, line, format!("missing value in column '{}'", names[col])));
            }
            let v: f64 = field.parse().map_err(|_| {
                parse_err(path, line, format!("'{field}' in column '{}' is not a number", names[col]))
            })?;
            if !v.is_finite() {
                return Err(parse_err(path, line, format!("non-finite value in column '{}'", names[col])));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(parse_err(path, 2, "no data rows"));
    }
    Ok(Table {
        names,
        values: DMatrix::from_row_slice(rows, width, &values),
    })
}

/// A single-column response file.
pub fn read_response(path: &Path) -> Result<Vec<f64>> {
    let table = read_table(path)?;
    if table.names.len() != 1 {
        return Err(parse_err(
            path,
            1,
            format!("response file must have one column, found {}", table.names.len()),
        ));
    }
    Ok(table.values.column(0).iter().copied().collect())
}

/// `(feature, group)` rows of a group map file.
pub fn read_group_map(path: &Path) -> Result<Vec<(String, String)>> {
    let mut rdr = reader(path)?;
    let width = rdr.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.len();
    if width != 2 {
        return Err(parse_err(path, 1, format!("group map needs 2 columns, found {width}")));
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = record_line(&record);
        if record.len() != 2 || record[0].is_empty() || record[1].is_empty() {
            return Err(parse_err(path, line, "expected 'feature,group'"));
        }
        rows.push((record[0].to_string(), record[1].to_string()));
    }
    Ok(rows)
}

/// Partition of `features` induced by a group map, plus the group ids in
/// partition order. Every feature must be mapped exactly once and the map
/// may not name unknown features.
pub fn partition_from_map(features: &[String], map: &[(String, String)]) -> Result<(GroupPartition, Vec<String>)> {
    let mut labels: Vec<Option<&str>> = vec![None; features.len()];
    for (feature, group) in map {
        let Some(idx) = features.iter().position(|f| f == feature) else {
            return Err(Error::InvalidPartition(format!(
                "group map names unknown feature '{feature}'"
            )));
        };
        if labels[idx].is_some() {
            return Err(Error::InvalidPartition(format!(
                "feature '{feature}' is mapped more than once"
            )));
        }
        labels[idx] = Some(group);
    }
    let labels: Vec<&str> = labels
        .iter()
        .zip(features)
        .map(|(l, f)| l.ok_or_else(|| Error::InvalidPartition(format!("feature '{f}' has no group"))))
        .collect::<Result<_>>()?;
    let partition = GroupPartition::from_labels(&labels)?;
    let ids = partition
        .groups()
        .iter()
        .map(|g| labels[g[0]].to_string())
        .collect();
    Ok((partition, ids))
}

/// Values are written with the shortest representation that parses back to
/// the same `f64`.
pub fn write_table<W: Write>(mut out: W, names: &[String], values: &DMatrix<f64>) -> std::io::Result<()> {
    writeln!(out, "{}", names.join(","))?;
    for row in values.row_iter() {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

pub fn write_table_file(path: &Path, names: &[String], values: &DMatrix<f64>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_table(&mut w, names, values).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// `group,w,selected` for every group, in partition order.
pub fn write_selection<W: Write>(mut out: W, group_ids: &[String], result: &SelectionResult) -> std::io::Result<()> {
    writeln!(out, "group,w,selected")?;
    for (j, id) in group_ids.iter().enumerate() {
        writeln!(out, "{},{},{}", id, result.w[j], result.selected.contains(&j))?;
    }
    Ok(())
}
