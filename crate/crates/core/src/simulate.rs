//! Generative substitute for the booking dataset: draws covariates from a
//! configurable profile and outcomes from a chosen model at a chosen truth.

use crate::data::{BookingRecord, Row};
use crate::model::{linear_predictor, ModelError, ModelKind, ModelSpec, ParameterVector};
use crate::posterior::inv_logit;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SimulateError {
    #[error("invalid covariate profile: {0}")]
    InvalidProfile(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("n must be >= 1")]
    EmptyRequest,
}

/// Marginal covariate generators. Lead time is normal on the day scale
/// (truncated at zero and rounded to whole days); special requests follow a
/// geometric distribution truncated to 0..=5; parking and hotel are Bernoulli.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariateProfile {
    pub lead_time_mean: f64,
    pub lead_time_sd: f64,
    /// Success probability of the geometric special-request count;
    /// p = 0.625 gives mean ~0.6 before truncation.
    pub special_requests_p: f64,
    pub parking_rate: f64,
    pub city_rate: f64,
}

impl Default for CovariateProfile {
    fn default() -> Self {
        CovariateProfile {
            lead_time_mean: 200.0,
            lead_time_sd: 45.0,
            special_requests_p: 0.625,
            parking_rate: 0.06,
            city_rate: 0.665,
        }
    }
}

impl CovariateProfile {
    fn validate(&self) -> Result<(), SimulateError> {
        let check_rate = |name: &str, v: f64| {
            if !(0.0..=1.0).contains(&v) {
                Err(SimulateError::InvalidProfile(format!(
                    "{name} = {v} outside [0, 1]"
                )))
            } else {
                Ok(())
            }
        };
        check_rate("parking_rate", self.parking_rate)?;
        check_rate("city_rate", self.city_rate)?;
        if !(self.special_requests_p > 0.0 && self.special_requests_p <= 1.0) {
            return Err(SimulateError::InvalidProfile(format!(
                "special_requests_p = {} outside (0, 1]",
                self.special_requests_p
            )));
        }
        let sd_ok = self.lead_time_sd.is_finite() && self.lead_time_sd > 0.0;
        if !sd_ok || !self.lead_time_mean.is_finite() {
            return Err(SimulateError::InvalidProfile(format!(
                "lead time profile ({}, {}) invalid",
                self.lead_time_mean, self.lead_time_sd
            )));
        }
        Ok(())
    }

    /// Geometric pmf on {0..5}, renormalized.
    fn special_request_weights(&self) -> [f64; 6] {
        let p = self.special_requests_p;
        let mut w = [0.0; 6];
        for (k, slot) in w.iter_mut().enumerate() {
            *slot = p * (1.0 - p).powi(k as i32);
        }
        let total: f64 = w.iter().sum();
        for slot in &mut w {
            *slot /= total;
        }
        w
    }
}

/// Simulate `n` booking records from `spec` at `true_theta`. Deterministic
/// given `seed`.
pub fn simulate_dataset(
    spec: &ModelSpec,
    true_theta: &ParameterVector,
    n: usize,
    profile: &CovariateProfile,
    seed: u64,
) -> Result<Vec<BookingRecord>, SimulateError> {
    if n == 0 {
        return Err(SimulateError::EmptyRequest);
    }
    profile.validate()?;
    if true_theta.kind != spec.kind {
        return Err(ModelError::DimensionMismatch {
            expected: spec.dim(),
            got: true_theta.dim(),
        }
        .into());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sr_weights = profile.special_request_weights();
    let parking = Bernoulli::new(profile.parking_rate)
        .map_err(|e| SimulateError::InvalidProfile(e.to_string()))?;
    let city = Bernoulli::new(profile.city_rate)
        .map_err(|e| SimulateError::InvalidProfile(e.to_string()))?;

    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        let lead_time = loop {
            let z: f64 = StandardNormal.sample(&mut rng);
            let days = (profile.lead_time_mean + profile.lead_time_sd * z).round();
            if days >= 0.0 {
                break days;
            }
        };
        let special_requests = sample_weighted(&sr_weights, &mut rng);
        let row = Row {
            x1: (lead_time - profile.lead_time_mean) / profile.lead_time_sd,
            x2: special_requests as f64,
            x3: if parking.sample(&mut rng) { 1.0 } else { 0.0 },
            h: city.sample(&mut rng) as u8,
        };
        let p = inv_logit(linear_predictor(spec, true_theta, row)?);
        if !(0.0..=1.0).contains(&p) {
            return Err(SimulateError::InvalidProfile(format!(
                "cancel probability {p} outside [0, 1]"
            )));
        }
        let y = rng.random_bool(p) as u8;
        records.push(BookingRecord {
            is_canceled: y,
            lead_time,
            special_requests,
            parking: row.x3 as u8,
            hotel: row.h,
        });
    }
    Ok(records)
}

fn sample_weighted(weights: &[f64; 6], rng: &mut ChaCha8Rng) -> u8 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k as u8;
        }
    }
    5
}

/// Model 1 posterior means from the booking analysis; the default truth for
/// recovery experiments.
pub fn table4_truth() -> ParameterVector {
    ParameterVector::new(ModelKind::Simple, vec![-0.150, 0.600, -0.642, -3.879])
        .expect("static truth has the right dimension")
}
