//! The three model specifications: parameter layout, priors, linear
//! predictor, and the constrained/unconstrained bijection.
//!
//! Constrained parameter order:
//! - Simple:       `beta0, beta1, beta2, beta3`
//! - Hierarchical: `mu_alpha, sigma_alpha, alpha[0], alpha[1], beta1, beta2, beta3`
//! - Interaction:  `beta0 ..= beta6`
//!
//! The hierarchical model is sampled non-centered: the unconstrained vector
//! carries `(mu_alpha, ln sigma_alpha, alpha_raw[0], alpha_raw[1], beta1..3)`
//! with `alpha[j] = mu_alpha + sigma_alpha * alpha_raw[j]`.

use crate::data::Row;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("parameter vector has dimension {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("parameter out of support: {0}")]
    OutOfSupport(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Simple,
    Hierarchical,
    Interaction,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Simple => "simple",
            ModelKind::Hierarchical => "hierarchical",
            ModelKind::Interaction => "interaction",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Prior attached to one constrained parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PriorSpec {
    Normal {
        location: f64,
        scale: f64,
    },
    HalfNormal {
        scale: f64,
    },
    /// Normal(mu_alpha, sigma_alpha): the partially pooled group intercepts.
    GroupNormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// (parameter name, prior), in constrained parameter order.
    pub priors: Vec<(String, PriorSpec)>,
    /// Number of hotel groups; 2 for the hierarchical model, otherwise unused.
    pub group_count: usize,
}

fn normal(location: f64, scale: f64) -> PriorSpec {
    PriorSpec::Normal { location, scale }
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        let priors: Vec<(String, PriorSpec)> = match kind {
            ModelKind::Simple => vec![
                ("beta0".into(), normal(0.0, 2.5)),
                ("beta1".into(), normal(0.0, 1.0)),
                ("beta2".into(), normal(-0.5, 1.0)),
                ("beta3".into(), normal(-0.5, 1.0)),
            ],
            ModelKind::Hierarchical => vec![
                ("mu_alpha".into(), normal(0.0, 2.5)),
                ("sigma_alpha".into(), PriorSpec::HalfNormal { scale: 1.0 }),
                ("alpha[0]".into(), PriorSpec::GroupNormal),
                ("alpha[1]".into(), PriorSpec::GroupNormal),
                ("beta1".into(), normal(0.0, 1.0)),
                ("beta2".into(), normal(-0.5, 1.0)),
                ("beta3".into(), normal(-0.5, 1.0)),
            ],
            ModelKind::Interaction => vec![
                ("beta0".into(), normal(-0.15, 1.0)),
                ("beta1".into(), normal(0.6, 0.5)),
                ("beta2".into(), normal(-0.6, 0.5)),
                ("beta3".into(), normal(-3.5, 1.0)),
                ("beta4".into(), normal(0.7, 0.5)),
                ("beta5".into(), normal(0.0, 0.5)),
                ("beta6".into(), normal(0.0, 0.5)),
            ],
        };
        let group_count = if kind == ModelKind::Hierarchical {
            2
        } else {
            0
        };
        ModelSpec {
            kind,
            priors,
            group_count,
        }
    }

    pub fn simple() -> Self {
        Self::new(ModelKind::Simple)
    }

    pub fn hierarchical() -> Self {
        Self::new(ModelKind::Hierarchical)
    }

    pub fn interaction() -> Self {
        Self::new(ModelKind::Interaction)
    }

    pub fn dim(&self) -> usize {
        self.priors.len()
    }

    pub fn param_names(&self) -> Vec<String> {
        self.priors.iter().map(|(name, _)| name.clone()).collect()
    }
}

/// Named constrained parameter values, ordered per [`ModelSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub kind: ModelKind,
    pub values: Vec<f64>,
}

impl ParameterVector {
    pub fn new(kind: ModelKind, values: Vec<f64>) -> Result<Self, ModelError> {
        let expected = ModelSpec::new(kind).dim();
        if values.len() != expected {
            return Err(ModelError::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        Ok(ParameterVector { kind, values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Map to the unconstrained sampling space. Identity except for the
    /// hierarchical model where `sigma_alpha -> ln sigma_alpha` and the group
    /// intercepts become standardized offsets.
    pub fn to_unconstrained(&self) -> Result<Vec<f64>, ModelError> {
        match self.kind {
            ModelKind::Simple | ModelKind::Interaction => Ok(self.values.clone()),
            ModelKind::Hierarchical => {
                let [mu, sigma, a0, a1, b1, b2, b3] = self.values[..] else {
                    unreachable!("dimension enforced at construction");
                };
                if sigma <= 0.0 {
                    return Err(ModelError::OutOfSupport(format!(
                        "sigma_alpha must be > 0, got {sigma}"
                    )));
                }
                Ok(vec![
                    mu,
                    sigma.ln(),
                    (a0 - mu) / sigma,
                    (a1 - mu) / sigma,
                    b1,
                    b2,
                    b3,
                ])
            }
        }
    }

    /// Inverse of [`to_unconstrained`](Self::to_unconstrained).
    pub fn from_unconstrained(kind: ModelKind, z: &[f64]) -> Result<Self, ModelError> {
        let expected = ModelSpec::new(kind).dim();
        if z.len() != expected {
            return Err(ModelError::DimensionMismatch {
                expected,
                got: z.len(),
            });
        }
        let values = match kind {
            ModelKind::Simple | ModelKind::Interaction => z.to_vec(),
            ModelKind::Hierarchical => {
                let (mu, sigma) = (z[0], z[1].exp());
                vec![
                    mu,
                    sigma,
                    mu + sigma * z[2],
                    mu + sigma * z[3],
                    z[4],
                    z[5],
                    z[6],
                ]
            }
        };
        Ok(ParameterVector { kind, values })
    }
}

/// Evaluate the linear predictor for one design row.
pub fn linear_predictor(
    spec: &ModelSpec,
    theta: &ParameterVector,
    row: Row,
) -> Result<f64, ModelError> {
    if theta.kind != spec.kind || theta.dim() != spec.dim() {
        return Err(ModelError::DimensionMismatch {
            expected: spec.dim(),
            got: theta.dim(),
        });
    }
    let v = &theta.values;
    let eta = match spec.kind {
        ModelKind::Simple => v[0] + v[1] * row.x1 + v[2] * row.x2 + v[3] * row.x3,
        ModelKind::Hierarchical => {
            let alpha = if row.h == 0 { v[2] } else { v[3] };
            alpha + v[4] * row.x1 + v[5] * row.x2 + v[6] * row.x3
        }
        ModelKind::Interaction => {
            let h = row.h as f64;
            v[0] + v[1] * row.x1
                + v[2] * row.x2
                + v[3] * row.x3
                + v[4] * h
                + v[5] * (row.x1 * h)
                + v[6] * (row.x2 * h)
        }
    };
    Ok(eta)
}

pub(crate) fn normal_logpdf(x: f64, location: f64, scale: f64) -> f64 {
    let z = (x - location) / scale;
    -0.5 * (2.0 * PI).ln() - scale.ln() - 0.5 * z * z
}

pub(crate) fn half_normal_logpdf(x: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    0.5 * (2.0 / PI).ln() - scale.ln() - 0.5 * (x / scale).powi(2)
}

/// Joint log-density of every prior in the spec at a constrained point.
/// Returns -inf outside the support (`sigma_alpha <= 0`).
pub fn log_prior(spec: &ModelSpec, theta: &ParameterVector) -> Result<f64, ModelError> {
    if theta.kind != spec.kind || theta.dim() != spec.dim() {
        return Err(ModelError::DimensionMismatch {
            expected: spec.dim(),
            got: theta.dim(),
        });
    }
    let mut total = 0.0;
    for (i, (_, prior)) in spec.priors.iter().enumerate() {
        let x = theta.values[i];
        total += match *prior {
            PriorSpec::Normal { location, scale } => normal_logpdf(x, location, scale),
            PriorSpec::HalfNormal { scale } => half_normal_logpdf(x, scale),
            PriorSpec::GroupNormal => {
                let (mu, sigma) = (theta.values[0], theta.values[1]);
                if sigma <= 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                normal_logpdf(x, mu, sigma)
            }
        };
    }
    Ok(total)
}
