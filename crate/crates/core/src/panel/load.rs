use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::panel::types::{is_valid_occ1, CzTable, PanelRow};

/// Canonical column order expected in panel files. A [`Schema`] can remap any
/// of these to a different header name in the source file.
pub const REQUIRED_COLUMNS: [&str; 10] = [
    "worker_id",
    "year",
    "firm_id",
    "establishment_id",
    "occ1",
    "cz_id",
    "gross_annual_wage",
    "hours",
    "age",
    "gender",
];

pub const OPTIONAL_COLUMNS: [&str; 1] = ["hourly_wage"];

/// Maps canonical field names to the header names used in a source file.
#[derive(Debug, Clone, Default)]
pub struct Schema {
    renames: BTreeMap<String, String>,
}

impl Schema {
    pub fn identity() -> Self {
        Schema::default()
    }

    pub fn rename(mut self, canonical: &str, source: &str) -> Self {
        self.renames
            .insert(canonical.to_string(), source.to_string());
        self
    }

    fn source_name<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.renames
            .get(canonical)
            .map(String::as_str)
            .unwrap_or(canonical)
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub rows_read: u64,
    pub rows_ok: u64,
    pub row_errors: u64,
    /// First few parse errors, for diagnostics.
    pub error_samples: Vec<String>,
}

fn parse_opt<T: std::str::FromStr>(field: &str, raw: &str, row: u64) -> Result<Option<T>> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Ok(None);
    }
    trimmed.parse::<T>().map(Some).map_err(|_| Error::RowParse {
        row,
        message: format!("cannot parse `{trimmed}` as {field}"),
    })
}

/// Loads a delimited panel file. Empty fields parse as missing (the sample
/// filter counts and drops them); malformed fields count against
/// `row_error_budget`, and exceeding it is a hard error naming the first
/// offending row.
pub fn load_panel(
    path: &Path,
    schema: &Schema,
    row_error_budget: u64,
) -> Result<(Vec<PanelRow>, LoadReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)?;

    let headers = reader.headers()?.clone();
    let mut index = BTreeMap::new();
    for (i, h) in headers.iter().enumerate() {
        index.insert(h.trim().to_string(), i);
    }

    let mut columns = BTreeMap::new();
    for canonical in REQUIRED_COLUMNS {
        let source = schema.source_name(canonical);
        match index.get(source) {
            Some(&i) => {
                columns.insert(canonical, i);
            }
            None => return Err(Error::MissingColumn(source.to_string())),
        }
    }
    for canonical in OPTIONAL_COLUMNS {
        let source = schema.source_name(canonical);
        if let Some(&i) = index.get(source) {
            columns.insert(canonical, i);
        }
    }

    let get = |record: &csv::StringRecord, canonical: &str| -> String {
        columns
            .get(canonical)
            .and_then(|&i| record.get(i))
            .unwrap_or("")
            .to_string()
    };

    let mut rows = Vec::new();
    let mut report = LoadReport::default();
    for (i, record) in reader.records().enumerate() {
        let source_row = i as u64 + 1;
        report.rows_read += 1;
        let record = record?;
        let parsed: Result<PanelRow> = (|| {
            let occ1: Option<u8> = parse_opt("occ1", &get(&record, "occ1"), source_row)?;
            if let Some(code) = occ1 {
                if !is_valid_occ1(code) {
                    return Err(Error::RowParse {
                        row: source_row,
                        message: format!("invalid occ1 code {code}"),
                    });
                }
            }
            Ok(PanelRow {
                worker_id: parse_opt("worker_id", &get(&record, "worker_id"), source_row)?,
                year: parse_opt("year", &get(&record, "year"), source_row)?,
                firm_id: parse_opt("firm_id", &get(&record, "firm_id"), source_row)?,
                establishment_id: parse_opt(
                    "establishment_id",
                    &get(&record, "establishment_id"),
                    source_row,
                )?,
                occ1,
                cz_id: parse_opt("cz_id", &get(&record, "cz_id"), source_row)?,
                gross_annual_wage: parse_opt(
                    "gross_annual_wage",
                    &get(&record, "gross_annual_wage"),
                    source_row,
                )?,
                hours: parse_opt("hours", &get(&record, "hours"), source_row)?,
                age: parse_opt("age", &get(&record, "age"), source_row)?,
                gender: parse_opt("gender", &get(&record, "gender"), source_row)?,
                hourly_wage: if columns.contains_key("hourly_wage") {
                    parse_opt("hourly_wage", &get(&record, "hourly_wage"), source_row)?
                } else {
                    None
                },
                source_row,
            })
        })();
        match parsed {
            Ok(row) => {
                report.rows_ok += 1;
                rows.push(row);
            }
            Err(e) => {
                report.row_errors += 1;
                if report.error_samples.len() < 10 {
                    report.error_samples.push(e.to_string());
                }
                if report.row_errors > row_error_budget {
                    return Err(Error::RowBudgetExceeded {
                        errors: report.row_errors,
                        budget: row_error_budget,
                        first: report.error_samples.first().cloned().unwrap_or_default(),
                    });
                }
            }
        }
    }
    Ok((rows, report))
}

fn is_header_like(fields: &[&str]) -> bool {
    fields
        .iter()
        .any(|f| f.trim().parse::<f64>().is_err() && !f.trim().is_empty())
}

fn read_two_column(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, ',');
        let a = parts.next().unwrap_or("").trim().to_string();
        let b = parts
            .next()
            .ok_or_else(|| Error::RowParse {
                row: i as u64 + 1,
                message: "expected two comma-separated fields".to_string(),
            })?
            .trim()
            .to_string();
        if i == 0 && is_header_like(&[&a, &b]) {
            continue;
        }
        out.push((a, b));
    }
    Ok(out)
}

/// Loads a two-column (cz_id, population) table; a header row is skipped when
/// present.
pub fn load_cz_table(path: &Path) -> Result<CzTable> {
    let mut entries = Vec::new();
    for (a, b) in read_two_column(path)? {
        let cz_id = a
            .parse::<u32>()
            .map_err(|_| Error::InvalidCzTable(format!("bad cz id `{a}`")))?;
        let population = b
            .parse::<f64>()
            .map_err(|_| Error::InvalidCzTable(format!("bad population `{b}`")))?;
        entries.push((cz_id, population));
    }
    CzTable::new(entries)
}

/// Loads a two-column (year, index) CPI table; a header row is skipped when
/// present.
pub fn load_cpi_table(path: &Path) -> Result<BTreeMap<i32, f64>> {
    let mut out = BTreeMap::new();
    for (a, b) in read_two_column(path)? {
        let year = a.parse::<i32>().map_err(|_| Error::Data(format!(
            "CPI table: bad year `{a}`"
        )))?;
        let index = b.parse::<f64>().map_err(|_| Error::Data(format!(
            "CPI table: bad index `{b}`"
        )))?;
        if index <= 0.0 || !index.is_finite() {
            return Err(Error::Data(format!("CPI table: non-positive index for year {year}")));
        }
        out.insert(year, index);
    }
    Ok(out)
}
