//! Raw booking records and the standardized design data the models consume.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("no records supplied")]
    EmptyData,
    #[error("lead_time has zero sample variance; cannot standardize")]
    ZeroVariance,
    #[error("need at least 2 records to standardize, got {0}")]
    TooFewRecords(usize),
    #[error("record {index}: {reason}")]
    InvalidRecord { index: usize, reason: String },
}

/// One booking as ingested, before any transformation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BookingRecord {
    /// 1 if the booking was canceled.
    pub is_canceled: u8,
    /// Days between booking and arrival.
    pub lead_time: f64,
    /// Number of special requests, 0..=5.
    pub special_requests: u8,
    /// 1 if parking was requested.
    pub parking: u8,
    /// 0 = resort hotel, 1 = city hotel.
    pub hotel: u8,
}

impl BookingRecord {
    pub fn validate(&self) -> Result<(), String> {
        if self.is_canceled > 1 {
            return Err(format!(
                "is_canceled must be 0 or 1, got {}",
                self.is_canceled
            ));
        }
        if self.parking > 1 {
            return Err(format!("parking must be 0 or 1, got {}", self.parking));
        }
        if self.hotel > 1 {
            return Err(format!("hotel must be 0 or 1, got {}", self.hotel));
        }
        if self.special_requests > 5 {
            return Err(format!(
                "special_requests must be in [0, 5], got {}",
                self.special_requests
            ));
        }
        if !self.lead_time.is_finite() || self.lead_time < 0.0 {
            return Err(format!(
                "lead_time must be finite and >= 0, got {}",
                self.lead_time
            ));
        }
        Ok(())
    }
}

/// Mean/SD used to standardize lead time, kept so the same transform can be
/// replayed on new data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub sd: f64,
}

/// Design data ready for likelihood evaluation: standardized lead time plus
/// the remaining covariates in their original scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedData {
    /// Standardized lead time.
    pub x1: Vec<f64>,
    /// Special-request count, raw scale.
    pub x2: Vec<f64>,
    /// Parking indicator.
    pub x3: Vec<f64>,
    /// Hotel group: 0 = resort, 1 = city.
    pub h: Vec<u8>,
    /// Outcome.
    pub y: Vec<u8>,
    pub standardization: Standardization,
}

/// One design row, as consumed by the linear predictor.
#[derive(Debug, Clone, Copy)]
pub struct Row {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub h: u8,
}

impl PreparedData {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> Row {
        Row {
            x1: self.x1[i],
            x2: self.x2[i],
            x3: self.x3[i],
            h: self.h[i],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = Row> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }

    pub fn observed_rate(&self) -> f64 {
        self.y.iter().map(|&v| v as f64).sum::<f64>() / self.len() as f64
    }
}

/// Standardize lead time (sample mean, sample SD with denominator n-1) and
/// copy the remaining columns through unchanged.
pub fn prepare(records: &[BookingRecord]) -> Result<PreparedData, DataError> {
    if records.is_empty() {
        return Err(DataError::EmptyData);
    }
    if records.len() < 2 {
        return Err(DataError::TooFewRecords(records.len()));
    }
    for (i, r) in records.iter().enumerate() {
        r.validate()
            .map_err(|reason| DataError::InvalidRecord { index: i, reason })?;
    }
    let n = records.len() as f64;
    let mean = records.iter().map(|r| r.lead_time).sum::<f64>() / n;
    let ss = records
        .iter()
        .map(|r| (r.lead_time - mean).powi(2))
        .sum::<f64>();
    let sd = (ss / (n - 1.0)).sqrt();
    if sd == 0.0 {
        return Err(DataError::ZeroVariance);
    }
    Ok(prepare_with(records, Standardization { mean, sd }))
}

/// Apply an already-fitted standardization. Used to score or simulate against
/// the constants recorded from a fit.
pub fn prepare_with(records: &[BookingRecord], standardization: Standardization) -> PreparedData {
    let Standardization { mean, sd } = standardization;
    PreparedData {
        x1: records.iter().map(|r| (r.lead_time - mean) / sd).collect(),
        x2: records.iter().map(|r| r.special_requests as f64).collect(),
        x3: records.iter().map(|r| r.parking as f64).collect(),
        h: records.iter().map(|r| r.hotel).collect(),
        y: records.iter().map(|r| r.is_canceled).collect(),
        standardization,
    }
}
