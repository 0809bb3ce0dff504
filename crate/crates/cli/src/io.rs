//! CSV and JSON readers/writers. Numbers are written with 12 significant
//! digits; an empty cell (or `NA`/`NaN`) reads as missing.

use std::fs;
use std::path::Path;

use omicsfuse::numkernel::RealMatrix;
use omicsfuse::preprocess::{OmicsKind, OmicsMatrix};
use omicsfuse::survival::SurvivalRecord;
use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return String::new();
    }
    let r = round_sig(x);
    if r == 0.0 {
        return "0".to_string();
    }
    let exp = r.abs().log10().floor();
    if !(-5.0..15.0).contains(&exp) {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

fn is_missing_cell(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "NaN" | "nan" | "na")
}

fn parse_num(path: &Path, line: usize, cell: &str) -> Result<f64> {
    cell.parse::<f64>()
        .map_err(|_| CliError::parse(path, format!("line {line}: `{cell}` is not a number")))
}

/// Header plus rows of a comma-separated file.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.first().map(String::as_str) != Some("sample_id") {
        return Err(CliError::parse(path, "first column must be `sample_id`"));
    }
    let mut rows: Vec<Vec<String>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        rows.push(rec.iter().map(|c| c.trim().to_string()).collect());
    }
    let mut seen = std::collections::HashSet::new();
    for row in &rows {
        let id = &row[0];
        if !seen.insert(id.clone()) {
            return Err(CliError::parse(path, format!("duplicate sample id `{id}`")));
        }
    }
    Ok(Table { header, rows })
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::io(path, source),
        other => CliError::parse(path, format!("{other:?}")),
    }
}

pub fn read_omics_csv(path: &Path, kind: OmicsKind) -> Result<OmicsMatrix> {
    let table = read_table(path)?;
    let features = table.header[1..].to_vec();
    let mut data = Vec::with_capacity(table.rows.len() * features.len());
    let mut ids = Vec::with_capacity(table.rows.len());
    for (i, row) in table.rows.iter().enumerate() {
        ids.push(row[0].clone());
        for cell in &row[1..] {
            data.push(if is_missing_cell(cell) {
                f64::NAN
            } else {
                parse_num(path, i + 2, cell)?
            });
        }
    }
    let values = RealMatrix::from_vec(ids.len(), features.len(), data)
        .map_err(|e| CliError::parse(path, e.to_string()))?;
    OmicsMatrix::new(values, ids, features, kind).map_err(|e| CliError::parse(path, e.to_string()))
}

pub fn write_omics_csv(path: &Path, m: &OmicsMatrix) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["sample_id".to_string()];
    header.extend(m.feature_ids().iter().cloned());
    write_record(&mut w, path, &header)?;
    for (i, id) in m.sample_ids().iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend((0..m.n_features()).map(|j| {
            if m.is_missing(i, j) {
                String::new()
            } else {
                fmt_num(m.values().row(i)[j])
            }
        }));
        write_record(&mut w, path, &rec)?;
    }
    flush(w, path)
}

/// Reads `sample_id,time,event` rows.
pub fn read_survival_csv(path: &Path) -> Result<(Vec<String>, Vec<SurvivalRecord>)> {
    let table = read_table(path)?;
    let col = |name: &str| {
        table
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::parse(path, format!("missing column `{name}`")))
    };
    let (t, e) = (col("time")?, col("event")?);
    let mut ids = Vec::new();
    let mut records = Vec::new();
    for (i, row) in table.rows.iter().enumerate() {
        let line = i + 2;
        let time = parse_num(path, line, &row[t])?;
        let event = match row[e].as_str() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(CliError::parse(path, format!("line {line}: event `{other}` is not 0/1")))
            }
        };
        let rec = SurvivalRecord::new(time, event)
            .map_err(|err| CliError::parse(path, format!("line {line}: {err}")))?;
        ids.push(row[0].clone());
        records.push(rec);
    }
    Ok((ids, records))
}

pub fn write_survival_csv(path: &Path, ids: &[String], records: &[SurvivalRecord]) -> Result<()> {
    let mut w = writer(path)?;
    write_record(&mut w, path, ["sample_id", "time", "event"])?;
    for (id, r) in ids.iter().zip(records) {
        let event = if r.event { "1" } else { "0" };
        write_record(&mut w, path, [id.as_str(), &fmt_num(r.time), event])?;
    }
    flush(w, path)
}

/// One labeling per column after `sample_id`.
pub struct Labelings {
    pub sample_ids: Vec<String>,
    pub columns: Vec<(String, Vec<String>)>,
}

pub fn read_labels_csv(path: &Path) -> Result<Labelings> {
    let table = read_table(path)?;
    if table.header.len() < 2 {
        return Err(CliError::parse(path, "no label columns"));
    }
    let sample_ids = table.rows.iter().map(|r| r[0].clone()).collect();
    let columns = table.header[1..]
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let values = table.rows.iter().map(|r| r[j + 1].clone()).collect();
            (name.clone(), values)
        })
        .collect();
    Ok(Labelings { sample_ids, columns })
}

pub fn write_labels_csv(path: &Path, ids: &[String], columns: &[(String, Vec<usize>)]) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["sample_id".to_string()];
    header.extend(columns.iter().map(|(name, _)| name.clone()));
    write_record(&mut w, path, &header)?;
    for (i, id) in ids.iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(columns.iter().map(|(_, l)| l[i].to_string()));
        write_record(&mut w, path, &rec)?;
    }
    flush(w, path)
}

/// Square sample × sample matrix with a `sample_id` header row and column.
pub fn write_sample_matrix_csv(path: &Path, ids: &[String], m: &RealMatrix) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["sample_id".to_string()];
    header.extend(ids.iter().cloned());
    write_record(&mut w, path, &header)?;
    for (id, row) in ids.iter().zip(m.row_iter()) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|&x| fmt_num(x)));
        write_record(&mut w, path, &rec)?;
    }
    flush(w, path)
}

pub fn read_sample_matrix_csv(path: &Path) -> Result<(Vec<String>, RealMatrix)> {
    let table = read_table(path)?;
    let ids: Vec<String> = table.rows.iter().map(|r| r[0].clone()).collect();
    if table.header[1..] != ids[..] {
        return Err(CliError::parse(path, "row and column sample ids differ"));
    }
    let mut data = Vec::with_capacity(ids.len() * ids.len());
    for (i, row) in table.rows.iter().enumerate() {
        for cell in &row[1..] {
            data.push(parse_num(path, i + 2, cell)?);
        }
    }
    let m = RealMatrix::from_vec(ids.len(), ids.len(), data)
        .map_err(|e| CliError::parse(path, e.to_string()))?;
    Ok((ids, m))
}

/// Writes a flat table whose cells are already formatted.
pub fn write_rows<S: AsRef<str>>(path: &Path, header: &[&str], rows: &[Vec<S>]) -> Result<()> {
    let mut w = writer(path)?;
    write_record(&mut w, path, header)?;
    for row in rows {
        write_record(&mut w, path, row.iter().map(AsRef::as_ref))?;
    }
    flush(w, path)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            if let Some(x) = n.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round_sig(x)) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut v = serde_json::to_value(value).map_err(|e| CliError::parse(path, e.to_string()))?;
    round_value(&mut v);
    let mut text = serde_json::to_string_pretty(&v).map_err(|e| CliError::parse(path, e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(path, e.to_string()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
        }
        _ => Ok(()),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    ensure_parent(path)?;
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn write_record<I, T>(w: &mut csv::Writer<fs::File>, path: &Path, rec: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: AsRef<[u8]>,
{
    w.write_record(rec).map_err(|e| csv_error(path, e))
}

fn flush(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(2.0), "2");
        assert_eq!(fmt_num(-1234567.891234567), "-1234567.89123");
        assert_eq!(fmt_num(1e-20 / 3.0), "3.33333333333e-21");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(f64::NAN), "");
    }

    #[test]
    fn json_floats_rounded() {
        let mut v = serde_json::json!({"a": [0.1 + 0.2, 3], "b": {"c": 2.0 / 3.0}});
        round_value(&mut v);
        assert_eq!(v.to_string(), r#"{"a":[0.3,3],"b":{"c":0.666666666667}}"#);
    }
}
