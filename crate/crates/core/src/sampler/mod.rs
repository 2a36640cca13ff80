//! From-scratch No-U-Turn sampler with dual-averaging step-size adaptation
//! and windowed diagonal mass estimation.

mod adapt;
mod leapfrog;
mod nuts;

pub use adapt::{warmup_adapt, DualAveraging, WarmupSchedule};
pub use leapfrog::{kinetic_energy, leapfrog, PhaseState};
pub use nuts::{nuts_transition, TransitionStat};

use crate::data::PreparedData;
use crate::model::{ModelSpec, ParameterVector};
use crate::posterior::PosteriorTarget;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Energy error beyond which a transition is flagged divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("adaptation failed on chain {chain}: {reason}")]
    AdaptationFailed { chain: usize, reason: String },
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
}

/// A differentiable unnormalized log-density the sampler can explore.
/// `None` from [`logp_and_grad`](Target::logp_and_grad) marks a non-finite
/// evaluation and is treated as a divergence.
pub trait Target: Sync {
    fn dim(&self) -> usize;
    fn logp_and_grad(&self, z: &[f64]) -> Option<(f64, Vec<f64>)>;
}

/// MCMC run settings. Defaults reproduce the reference analysis: 2 chains,
/// 1000 draws after 500 warmup iterations, target acceptance 0.90, seed 42.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub chains: usize,
    pub draws: usize,
    pub warmup: usize,
    pub target_accept: f64,
    pub max_tree_depth: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            chains: 2,
            draws: 1000,
            warmup: 500,
            target_accept: 0.90,
            max_tree_depth: 10,
            seed: 42,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.chains < 1 || self.draws < 1 || self.warmup < 1 {
            return Err(SamplerError::InvalidConfig(
                "chains, draws and warmup must all be >= 1".into(),
            ));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(SamplerError::InvalidConfig(format!(
                "target_accept must be in (0, 1), got {}",
                self.target_accept
            )));
        }
        if self.max_tree_depth < 1 {
            return Err(SamplerError::InvalidConfig(
                "max_tree_depth must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-draw sampler statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrawStats {
    pub divergent: bool,
    pub accept_stat: f64,
    pub tree_depth: usize,
    pub energy: f64,
    pub step_size: f64,
}

/// Frozen adaptation result for one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainAdaptation {
    pub step_size: f64,
    pub inv_mass_diag: Vec<f64>,
}

/// Posterior draws in constrained space, chain x draw x parameter, plus the
/// per-draw statistics and adaptation record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDraws {
    pub param_names: Vec<String>,
    pub draws: Vec<Vec<Vec<f64>>>,
    pub stats: Vec<Vec<DrawStats>>,
    pub adaptation: Vec<ChainAdaptation>,
}

impl ChainDraws {
    pub fn n_chains(&self) -> usize {
        self.draws.len()
    }

    pub fn n_draws(&self) -> usize {
        self.draws.first().map_or(0, |c| c.len())
    }

    pub fn n_params(&self) -> usize {
        self.param_names.len()
    }

    pub fn total_draws(&self) -> usize {
        self.n_chains() * self.n_draws()
    }

    /// chain x draw matrix for one parameter.
    pub fn param_matrix(&self, param: usize) -> Vec<Vec<f64>> {
        self.draws
            .iter()
            .map(|chain| chain.iter().map(|d| d[param]).collect())
            .collect()
    }

    /// All draws of one parameter pooled, chain-major.
    pub fn param_flat(&self, param: usize) -> Vec<f64> {
        self.draws
            .iter()
            .flat_map(|chain| chain.iter().map(move |d| d[param]))
            .collect()
    }

    pub fn divergence_count(&self) -> usize {
        self.stats.iter().flatten().filter(|s| s.divergent).count()
    }
}

/// Unconstrained-space output of [`sample`], before any model-specific
/// transform is applied.
#[derive(Debug, Clone)]
pub struct RawDraws {
    pub draws: Vec<Vec<Vec<f64>>>,
    pub stats: Vec<Vec<DrawStats>>,
    pub adaptation: Vec<ChainAdaptation>,
}

/// Run warmup and sampling for every chain of `config` against an arbitrary
/// target. Chains run in parallel; each derives its own RNG stream from
/// `(seed, chain index)`, so output is identical regardless of scheduling.
pub fn sample<T: Target>(target: &T, config: &SamplerConfig) -> Result<RawDraws, SamplerError> {
    config.validate()?;
    let results: Vec<_> = (0..config.chains)
        .into_par_iter()
        .map(|chain| run_single_chain(target, config, chain))
        .collect();

    let mut draws = Vec::with_capacity(config.chains);
    let mut stats = Vec::with_capacity(config.chains);
    let mut adaptation = Vec::with_capacity(config.chains);
    for result in results {
        let (d, s, a) = result?;
        draws.push(d);
        stats.push(s);
        adaptation.push(a);
    }
    Ok(RawDraws {
        draws,
        stats,
        adaptation,
    })
}

type ChainResult = Result<(Vec<Vec<f64>>, Vec<DrawStats>, ChainAdaptation), SamplerError>;

fn run_single_chain<T: Target>(target: &T, config: &SamplerConfig, chain: usize) -> ChainResult {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(chain as u64 + 1);
    let dim = target.dim();

    // Initial point: small jitter around the unconstrained origin.
    let mut state = None;
    for _ in 0..100 {
        let q: Vec<f64> = (0..dim)
            .map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        if let Some((logp, grad)) = target.logp_and_grad(&q) {
            state = Some(PhaseState {
                q,
                p: vec![0.0; dim],
                grad,
                logp,
            });
            break;
        }
    }
    let state = state.ok_or_else(|| SamplerError::AdaptationFailed {
        chain,
        reason: "could not find a finite initial point".into(),
    })?;

    let adapted = warmup_adapt(target, state, config, &mut rng)
        .map_err(|reason| SamplerError::AdaptationFailed { chain, reason })?;
    let (mut state, step_size, inv_mass) = adapted;

    let mut draws = Vec::with_capacity(config.draws);
    let mut stats = Vec::with_capacity(config.draws);
    for _ in 0..config.draws {
        let (next, stat) = nuts_transition(
            target,
            state,
            step_size,
            &inv_mass,
            config.max_tree_depth,
            &mut rng,
        );
        state = next;
        draws.push(state.q.clone());
        stats.push(DrawStats {
            divergent: stat.divergent,
            accept_stat: stat.accept_stat,
            tree_depth: stat.tree_depth,
            energy: stat.energy,
            step_size,
        });
    }
    Ok((
        draws,
        stats,
        ChainAdaptation {
            step_size,
            inv_mass_diag: inv_mass,
        },
    ))
}

/// Fit a model: sample its unconstrained posterior and store constrained
/// draws with parameter names.
pub fn run_chains(
    spec: &ModelSpec,
    data: &PreparedData,
    config: &SamplerConfig,
) -> Result<ChainDraws, SamplerError> {
    let target = PosteriorTarget { spec, data };
    let raw = sample(&target, config)?;
    let draws = raw
        .draws
        .into_iter()
        .map(|chain| {
            chain
                .into_iter()
                .map(|z| {
                    ParameterVector::from_unconstrained(spec.kind, &z)
                        .expect("sampler preserves dimension")
                        .values
                })
                .collect()
        })
        .collect();
    Ok(ChainDraws {
        param_names: spec.param_names(),
        draws,
        stats: raw.stats,
        adaptation: raw.adaptation,
    })
}

pub(crate) fn draw_momentum(inv_mass: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    inv_mass
        .iter()
        .map(|&im| rng.sample::<f64, _>(StandardNormal) / im.sqrt())
        .collect()
}
