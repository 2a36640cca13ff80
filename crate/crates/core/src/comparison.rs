//! WAIC per model and multi-model ranking.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ComparisonError {
    #[error("WAIC needs at least 2 draws, got {0}")]
    TooFewDraws(usize),
    #[error("log-likelihood matrix contains a non-finite entry")]
    NonFinite,
    #[error("log-likelihood matrix rows have unequal lengths")]
    RaggedMatrix,
    #[error("models were scored on different observation counts")]
    MismatchedData,
    #[error("need at least 2 models to compare, got {0}")]
    TooFewModels(usize),
}

/// Predictive score of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaicResult {
    pub model: String,
    /// Expected log pointwise predictive density, WAIC-penalized.
    pub elpd_waic: f64,
    /// Effective parameter count (variance form).
    pub p_waic: f64,
    /// Standard error over pointwise contributions.
    pub se: f64,
    pub pointwise: Vec<f64>,
}

/// One row of the model-comparison table, ordered best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub rank: usize,
    pub model: String,
    pub elpd_waic: f64,
    pub p_waic: f64,
    pub se: f64,
    /// elpd difference to the best model (0 for the best).
    pub elpd_diff: f64,
    /// SE of that difference from paired pointwise terms.
    pub d_se: f64,
}

/// Compute WAIC from a draws x observations matrix of pointwise
/// log-likelihoods.
pub fn waic(model: &str, log_lik: &[Vec<f64>]) -> Result<WaicResult, ComparisonError> {
    let n_draws = log_lik.len();
    if n_draws < 2 {
        return Err(ComparisonError::TooFewDraws(n_draws));
    }
    let n_obs = log_lik[0].len();
    if log_lik.iter().any(|row| row.len() != n_obs) {
        return Err(ComparisonError::RaggedMatrix);
    }
    if log_lik.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ComparisonError::NonFinite);
    }

    let s = n_draws as f64;
    let mut pointwise = Vec::with_capacity(n_obs);
    let mut p_waic = 0.0;
    for i in 0..n_obs {
        // log-mean-exp with max subtraction.
        let max = log_lik
            .iter()
            .map(|row| row[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = log_lik.iter().map(|row| (row[i] - max).exp()).sum();
        let lppd = max + (sum_exp / s).ln();

        let min = log_lik
            .iter()
            .map(|row| row[i])
            .fold(f64::INFINITY, f64::min);
        let mean: f64 = log_lik.iter().map(|row| row[i]).sum::<f64>() / s;
        // Exactly zero penalty when every draw agrees, regardless of the
        // rounding of the mean.
        let var: f64 = if min == max {
            0.0
        } else {
            log_lik
                .iter()
                .map(|row| (row[i] - mean).powi(2))
                .sum::<f64>()
                / (s - 1.0)
        };
        p_waic += var;
        pointwise.push(lppd - var);
    }

    let elpd_waic: f64 = pointwise.iter().sum();
    let se = standard_error(&pointwise);
    Ok(WaicResult {
        model: model.to_string(),
        elpd_waic,
        p_waic,
        se,
        pointwise,
    })
}

fn standard_error(pointwise: &[f64]) -> f64 {
    let n = pointwise.len() as f64;
    if pointwise.len() < 2 {
        return 0.0;
    }
    let mean = pointwise.iter().sum::<f64>() / n;
    let var = pointwise.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (n * var).sqrt()
}

/// Rank models by elpd, best first, with paired-difference standard errors
/// against the winner.
pub fn compare(results: &[WaicResult]) -> Result<Vec<ComparisonRow>, ComparisonError> {
    if results.len() < 2 {
        return Err(ComparisonError::TooFewModels(results.len()));
    }
    let n = results[0].pointwise.len();
    if results.iter().any(|r| r.pointwise.len() != n) {
        return Err(ComparisonError::MismatchedData);
    }
    let mut order: Vec<usize> = (0..results.len()).collect();
    order.sort_by(|&a, &b| {
        results[b]
            .elpd_waic
            .total_cmp(&results[a].elpd_waic)
            .then(results[a].model.cmp(&results[b].model))
    });
    let best = &results[order[0]];
    Ok(order
        .iter()
        .enumerate()
        .map(|(rank, &idx)| {
            let r = &results[idx];
            let diffs: Vec<f64> = r
                .pointwise
                .iter()
                .zip(&best.pointwise)
                .map(|(a, b)| a - b)
                .collect();
            ComparisonRow {
                rank: rank + 1,
                model: r.model.clone(),
                elpd_waic: r.elpd_waic,
                p_waic: r.p_waic,
                se: r.se,
                elpd_diff: r.elpd_waic - best.elpd_waic,
                d_se: if idx == order[0] {
                    0.0
                } else {
                    standard_error(&diffs)
                },
            }
        })
        .collect())
}
