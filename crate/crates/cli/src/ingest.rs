//! CSV ingestion: map the public booking-dataset schema onto
//! [`BookingRecord`] with line-numbered diagnostics.

use hierglm_core::BookingRecord;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot open {path}: {source}")]
    FileNotFound {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("missing required column `{0}` in header")]
    SchemaError(String),
    #[error("line {line}, column `{column}`: cannot interpret value `{value}`")]
    ParseError {
        line: usize,
        column: String,
        value: String,
    },
    #[error("csv error: {0}")]
    Malformed(#[from] csv::Error),
}

/// Source-column names for each record field; defaults follow the public
/// dataset schema.
#[derive(Debug, Clone)]
pub struct ColumnMap {
    pub is_canceled: String,
    pub lead_time: String,
    pub special_requests: String,
    pub parking: String,
    pub hotel: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            is_canceled: "is_canceled".into(),
            lead_time: "lead_time".into(),
            special_requests: "total_of_special_requests".into(),
            parking: "required_car_parking_spaces".into(),
            hotel: "hotel".into(),
        }
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize, IngestError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| IngestError::SchemaError(name.to_string()))
}

/// Read booking records from a CSV file. `special_requests` values above 5
/// are clipped with a warning on stderr; `parking` is binarized from the
/// spaces count.
pub fn ingest_csv(path: &Path, map: &ColumnMap) -> Result<Vec<BookingRecord>, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::FileNotFound {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let headers = reader.headers()?.clone();
    let idx_canceled = column_index(&headers, &map.is_canceled)?;
    let idx_lead = column_index(&headers, &map.lead_time)?;
    let idx_requests = column_index(&headers, &map.special_requests)?;
    let idx_parking = column_index(&headers, &map.parking)?;
    let idx_hotel = column_index(&headers, &map.hotel)?;

    let mut records = Vec::new();
    let mut clipped = 0usize;
    for (row_idx, row) in reader.records().enumerate() {
        let line = row_idx + 2; // header is line 1
        let row = row?;
        let field = |idx: usize, column: &str| -> Result<&str, IngestError> {
            row.get(idx).ok_or_else(|| IngestError::ParseError {
                line,
                column: column.to_string(),
                value: "<missing>".to_string(),
            })
        };
        let parse_err = |column: &str, value: &str| IngestError::ParseError {
            line,
            column: column.to_string(),
            value: value.to_string(),
        };

        let canceled_raw = field(idx_canceled, &map.is_canceled)?;
        let is_canceled: u8 = match canceled_raw.trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(parse_err(&map.is_canceled, other)),
        };

        let lead_raw = field(idx_lead, &map.lead_time)?;
        let lead_time: f64 = lead_raw
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite() && *v >= 0.0)
            .ok_or_else(|| parse_err(&map.lead_time, lead_raw))?;

        let requests_raw = field(idx_requests, &map.special_requests)?;
        let mut special_requests: u8 = requests_raw
            .trim()
            .parse::<i64>()
            .ok()
            .filter(|v| *v >= 0)
            .map(|v| v.min(u8::MAX as i64) as u8)
            .ok_or_else(|| parse_err(&map.special_requests, requests_raw))?;
        if special_requests > 5 {
            clipped += 1;
            special_requests = 5;
        }

        let parking_raw = field(idx_parking, &map.parking)?;
        let spaces: i64 = parking_raw
            .trim()
            .parse()
            .ok()
            .filter(|v| *v >= 0)
            .ok_or_else(|| parse_err(&map.parking, parking_raw))?;
        let parking = (spaces > 0) as u8;

        let hotel_raw = field(idx_hotel, &map.hotel)?;
        let hotel: u8 = match hotel_raw.trim() {
            "Resort Hotel" => 0,
            "City Hotel" => 1,
            other => return Err(parse_err(&map.hotel, other)),
        };

        records.push(BookingRecord {
            is_canceled,
            lead_time,
            special_requests,
            parking,
            hotel,
        });
    }
    if clipped > 0 {
        eprintln!("warning: clipped {clipped} special_requests value(s) above 5");
    }
    Ok(records)
}

/// Uniform subsample of `n` records without replacement, deterministic in
/// `seed`; input order is preserved.
pub fn subsample(records: &[BookingRecord], n: usize, seed: u64) -> Vec<BookingRecord> {
    if n >= records.len() {
        return records.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, records.len(), n).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| records[i].clone()).collect()
}

/// Write records back out in the ingest schema (used by `simulate`).
pub fn write_records_csv(path: &Path, records: &[BookingRecord]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "hotel",
        "is_canceled",
        "lead_time",
        "total_of_special_requests",
        "required_car_parking_spaces",
    ])
    .map_err(csv_io)?;
    for r in records {
        let hotel = if r.hotel == 0 {
            "Resort Hotel"
        } else {
            "City Hotel"
        };
        w.write_record([
            hotel,
            &r.is_canceled.to_string(),
            &format_lead_time(r.lead_time),
            &r.special_requests.to_string(),
            &r.parking.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()
}

fn format_lead_time(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn csv_io(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}
