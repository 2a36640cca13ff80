//! Fit-diagnose-compare pipeline producing a serializable artifact bundle.

use hierglm_core::{
    compare, log_likelihood_pointwise, posterior_predictive, prepare, run_chains, summarize,
    tail_probability, waic, BookingRecord, ChainDraws, ComparisonRow, ModelKind, ModelSpec,
    ParameterVector, PredictiveSummary, SamplerConfig, Standardization, SummaryRow, TailDirection,
    WaicResult,
};
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("need at least 100 valid records, got {0}")]
    TooFewRecords(usize),
    #[error("data preparation failed: {0}")]
    Data(String),
    #[error("model {model}: {message}")]
    Model {
        model: &'static str,
        message: String,
    },
}

/// Everything needed to reproduce a run, plus wall-clock bookkeeping.
/// Timings vary between invocations, so the manifest is the one output file
/// excluded from byte-level determinism comparisons.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub input: InputRecipe,
    pub models: Vec<ModelKind>,
    pub config: SamplerConfig,
    pub standardization: Standardization,
    pub n_records: usize,
    pub fit_seconds: Vec<(ModelKind, f64)>,
    pub divergences: Vec<(ModelKind, usize)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputRecipe {
    Csv {
        path: String,
        sample_n: Option<usize>,
    },
    Simulation {
        model: ModelKind,
        truth: Vec<f64>,
        n: usize,
        seed: u64,
    },
}

/// Odds-ratio view of one parameter: e^mean with exponentiated HDI bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsRatioRow {
    pub parameter: String,
    pub odds_ratio: f64,
    pub hdi_low: f64,
    pub hdi_high: f64,
}

/// Posterior sign probabilities of one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailProbRow {
    pub parameter: String,
    pub prob_positive: f64,
    pub prob_negative: f64,
}

/// Per-model artifacts: draws plus every derived table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelArtifacts {
    pub kind: ModelKind,
    pub summary: Vec<SummaryRow>,
    pub odds_ratios: Vec<OddsRatioRow>,
    pub tail_probs: Vec<TailProbRow>,
    pub divergences: usize,
    pub waic: WaicResult,
    pub ppc: PredictiveSummary,
    pub draws: ChainDraws,
}

/// Whole-run artifact bundle; serialized as `bundle.json` so reports can be
/// re-emitted without refitting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bundle {
    pub manifest: RunManifest,
    pub models: Vec<ModelArtifacts>,
    /// Present only when more than one model was fitted.
    pub comparison: Option<Vec<ComparisonRow>>,
}

fn spec_for(kind: ModelKind) -> ModelSpec {
    match kind {
        ModelKind::Simple => ModelSpec::simple(),
        ModelKind::Hierarchical => ModelSpec::hierarchical(),
        ModelKind::Interaction => ModelSpec::interaction(),
    }
}

/// Fit every requested model and assemble the bundle.
pub fn run_pipeline(
    records: &[BookingRecord],
    config: &SamplerConfig,
    models: &[ModelKind],
    input: InputRecipe,
) -> Result<Bundle, PipelineError> {
    if records.len() < 100 {
        return Err(PipelineError::TooFewRecords(records.len()));
    }
    let data = prepare(records).map_err(|e| PipelineError::Data(e.to_string()))?;

    let mut artifacts = Vec::with_capacity(models.len());
    let mut fit_seconds = Vec::new();
    let mut divergences = Vec::new();
    for &kind in models {
        let spec = spec_for(kind);
        let label = kind.label();
        let started = Instant::now();
        let draws = run_chains(&spec, &data, config).map_err(|e| PipelineError::Model {
            model: label,
            message: e.to_string(),
        })?;
        fit_seconds.push((kind, started.elapsed().as_secs_f64()));

        let summary = summarize(&draws, 0.95).map_err(|e| PipelineError::Model {
            model: label,
            message: e.to_string(),
        })?;
        let odds_ratios = summary
            .iter()
            .map(|row| OddsRatioRow {
                parameter: row.parameter.clone(),
                odds_ratio: row.mean.exp(),
                hdi_low: row.hdi_low.exp(),
                hdi_high: row.hdi_high.exp(),
            })
            .collect();
        let tail_probs = (0..draws.n_params())
            .map(|i| {
                let flat = draws.param_flat(i);
                TailProbRow {
                    parameter: draws.param_names[i].clone(),
                    prob_positive: tail_probability(&flat, TailDirection::Greater, 0.0),
                    prob_negative: tail_probability(&flat, TailDirection::Less, 0.0),
                }
            })
            .collect();

        let log_lik: Vec<Vec<f64>> = draws
            .draws
            .iter()
            .flatten()
            .map(|values| {
                let theta = ParameterVector::new(kind, values.clone())
                    .expect("stored draws match the model dimension");
                log_likelihood_pointwise(&spec, &theta, &data).map_err(|e| PipelineError::Model {
                    model: label,
                    message: e.to_string(),
                })
            })
            .collect::<Result<_, _>>()?;
        let waic_result = waic(label, &log_lik).map_err(|e| PipelineError::Model {
            model: label,
            message: e.to_string(),
        })?;

        let ppc = posterior_predictive(&draws, &spec, &data, config.seed, draws.total_draws())
            .map_err(|e| PipelineError::Model {
                model: label,
                message: e.to_string(),
            })?;

        divergences.push((kind, draws.divergence_count()));
        artifacts.push(ModelArtifacts {
            kind,
            summary,
            odds_ratios,
            tail_probs,
            divergences: draws.divergence_count(),
            waic: waic_result,
            ppc,
            draws,
        });
    }

    let comparison = if artifacts.len() > 1 {
        let results: Vec<WaicResult> = artifacts.iter().map(|a| a.waic.clone()).collect();
        Some(compare(&results).map_err(|e| PipelineError::Data(e.to_string()))?)
    } else {
        None
    };

    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        input,
        models: models.to_vec(),
        config: *config,
        standardization: data.standardization,
        n_records: records.len(),
        fit_seconds,
        divergences,
    };
    Ok(Bundle {
        manifest,
        models: artifacts,
        comparison,
    })
}
