//! Bayesian logistic regression engine for hotel-booking cancellation
//! analysis: three model specifications, a from-scratch No-U-Turn sampler,
//! convergence diagnostics, WAIC model comparison, and predictive checks.

pub mod comparison;
pub mod data;
pub mod diagnostics;
pub mod model;
pub mod posterior;
pub mod predictive;
pub mod sampler;
pub mod simulate;

pub use comparison::{compare, waic, ComparisonRow, WaicResult};
pub use data::{prepare, prepare_with, BookingRecord, PreparedData, Row, Standardization};
pub use diagnostics::{
    ess_bulk, ess_tail, hdi, split_rhat, summarize, tail_probability, SummaryRow, TailDirection,
};
pub use model::{linear_predictor, log_prior, ModelKind, ModelSpec, ParameterVector, PriorSpec};
pub use posterior::{inv_logit, log_likelihood_pointwise, log_posterior_and_grad, PosteriorTarget};
pub use predictive::{posterior_predictive, prior_predictive, PredictiveSummary};
pub use sampler::{run_chains, ChainDraws, DrawStats, SamplerConfig, SamplerError};
pub use simulate::{simulate_dataset, table4_truth, CovariateProfile};
