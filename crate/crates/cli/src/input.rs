//! Firm-panel CSV ingestion and export.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use sizeshare_core::market_structure::FirmRecord;

use crate::error::{CliError, CliResult, Diagnostic};

pub const REQUIRED_COLUMNS: [&str; 8] = [
    "firm_id",
    "year",
    "region",
    "industry",
    "output",
    "labor",
    "capital",
    "wage_bill",
];
pub const OPTIONAL_COLUMNS: [&str; 1] = ["value_added"];

struct Columns {
    required: [usize; 8],
    value_added: Option<usize>,
}

fn locate_columns(headers: &csv::StringRecord) -> CliResult<Columns> {
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let mut required = [0; 8];
    let mut missing = Vec::new();
    for (slot, name) in required.iter_mut().zip(REQUIRED_COLUMNS) {
        match find(name) {
            Some(i) => *slot = i,
            None => missing.push(name),
        }
    }
    if !missing.is_empty() {
        return Err(CliError::Schema(format!("missing required column(s): {}", missing.join(", "))));
    }
    Ok(Columns {
        required,
        value_added: find(OPTIONAL_COLUMNS[0]),
    })
}

fn number(field: &str, name: &str) -> Result<f64, String> {
    let s = field.trim();
    s.parse::<f64>()
        .map_err(|_| format!("{name}: cannot parse {s:?} as a number"))
}

fn parse_row(row: &csv::StringRecord, cols: &Columns) -> Result<FirmRecord, String> {
    let get = |k: usize| row.get(cols.required[k]).unwrap_or("");
    let text = |k: usize| -> Result<String, String> {
        let s = get(k).trim();
        if s.is_empty() {
            Err(format!("{}: empty", REQUIRED_COLUMNS[k]))
        } else {
            Ok(s.to_string())
        }
    };
    let year = get(1)
        .trim()
        .parse::<i32>()
        .map_err(|_| format!("year: cannot parse {:?} as an integer", get(1).trim()))?;
    let value_added = match cols.value_added.and_then(|i| row.get(i)).map(str::trim) {
        None | Some("") => None,
        Some(s) => Some(number(s, "value_added")?),
    };
    let record = FirmRecord {
        firm_id: text(0)?,
        year,
        region: text(2)?,
        industry: text(3)?,
        output: number(get(4), "output")?,
        labor: number(get(5), "labor")?,
        capital: number(get(6), "capital")?,
        wage_bill: number(get(7), "wage_bill")?,
        value_added,
    };
    record.validate().map_err(|e| e.to_string())?;
    Ok(record)
}

/// Parse firm rows, collecting a diagnostic for every rejected row.
pub fn parse_firm_csv_from<R: Read>(reader: R) -> CliResult<Vec<FirmRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Schema(format!("cannot read header row: {e}")))?
        .clone();
    if headers.is_empty() {
        return Err(CliError::Schema("header row is empty".into()));
    }
    let cols = locate_columns(&headers)?;
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    let mut seen = HashSet::new();
    for row in rdr.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                diagnostics.push(Diagnostic {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        match parse_row(&row, &cols) {
            Ok(rec) => {
                if seen.insert((rec.firm_id.clone(), rec.year)) {
                    records.push(rec);
                } else {
                    diagnostics.push(Diagnostic {
                        line,
                        message: format!("duplicate firm-year ({}, {})", rec.firm_id, rec.year),
                    });
                }
            }
            Err(message) => diagnostics.push(Diagnostic { line, message }),
        }
    }
    if !diagnostics.is_empty() {
        return Err(CliError::Rows(diagnostics));
    }
    Ok(records)
}

pub fn parse_firm_csv(path: &Path) -> CliResult<Vec<FirmRecord>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path.display(), e))?;
    parse_firm_csv_from(std::io::BufReader::new(file))
}

/// Write records in the ingestion schema. Numbers use the shortest
/// representation that round-trips.
pub fn write_firm_csv<W: Write>(records: &[FirmRecord], writer: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| CliError::io("csv output", e);
    let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
    header.extend(OPTIONAL_COLUMNS);
    w.write_record(&header).map_err(io)?;
    for r in records {
        w.write_record([
            r.firm_id.clone(),
            r.year.to_string(),
            r.region.clone(),
            r.industry.clone(),
            r.output.to_string(),
            r.labor.to_string(),
            r.capital.to_string(),
            r.wage_bill.to_string(),
            r.value_added.map(|v| v.to_string()).unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io("csv output", e))?;
    Ok(())
}
