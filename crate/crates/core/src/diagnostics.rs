//! Convergence diagnostics and posterior summaries: rank-normalized split
//! R-hat, bulk/tail effective sample size, highest-density intervals, and
//! tail probabilities.

use crate::sampler::ChainDraws;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("need at least {needed} draws per chain, got {got}")]
    TooFewDraws { needed: usize, got: usize },
    #[error("chains have unequal lengths")]
    MismatchedChains,
    #[error("no chains supplied")]
    NoChains,
    #[error("chain is constant; diagnostic undefined")]
    ConstantChain,
    #[error("probability must be in (0, 1], got {0}")]
    InvalidProb(f64),
}

/// Per-parameter posterior summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub parameter: String,
    pub mean: f64,
    pub sd: f64,
    pub hdi_low: f64,
    pub hdi_high: f64,
    pub rhat: f64,
    pub ess_bulk: f64,
    pub ess_tail: f64,
}

/// Direction of a posterior tail-probability statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailDirection {
    Greater,
    Less,
}

/// ESS is capped at this multiple of the total draw count; antithetic chains
/// can be super-efficient but noisy autocovariance tails should not produce
/// absurd values.
pub const ESS_CAP_FACTOR: f64 = 1.5;

/// Inverse standard normal CDF (Wichura's AS 241, double precision).
#[allow(clippy::excessive_precision)]
pub fn normal_quantile(p: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p));
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        const A: [f64; 8] = [
            3.387_132_872_796_366_5,
            133.141_667_891_784_4,
            1_971.590_950_306_551_3,
            13_731.693_765_509_461,
            45_921.953_931_549_87,
            67_265.770_927_008_7,
            33_430.575_583_588_13,
            2_509.080_928_730_122_7,
        ];
        const B: [f64; 8] = [
            1.0,
            42.313_330_701_600_91,
            687.187_007_492_057_9,
            5_394.196_021_424_751,
            21_213.794_301_586_597,
            39_307.895_800_092_71,
            28_729.085_735_721_943,
            5_226.495_278_852_854_5,
        ];
        return q * horner(&A, r) / horner(&B, r);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let value = if r <= 5.0 {
        let r = r - 1.6;
        const C: [f64; 8] = [
            1.423_437_110_749_683_5,
            4.630_337_846_156_546,
            5.769_497_221_460_691,
            3.647_848_324_763_204_5,
            1.270_458_252_452_368_4,
            0.241_780_725_177_450_6,
            0.022_723_844_989_269_184,
            7.745_450_142_783_414e-4,
        ];
        const D: [f64; 8] = [
            1.0,
            2.053_191_626_637_758_8,
            1.676_384_830_183_803_8,
            0.689_767_334_985_1,
            0.148_103_976_427_480_08,
            0.015_198_666_563_616_457,
            5.475_938_084_995_345e-4,
            1.050_750_071_644_416_9e-9,
        ];
        horner(&C, r) / horner(&D, r)
    } else {
        let r = r - 5.0;
        const E: [f64; 8] = [
            6.657_904_643_501_103,
            5.463_784_911_164_114,
            1.784_826_539_917_291_3,
            0.296_560_571_828_504_9,
            0.026_532_189_526_576_124,
            0.001_242_660_947_388_078_4,
            2.711_555_568_743_487_6e-5,
            2.010_334_399_292_288e-7,
        ];
        const F: [f64; 8] = [
            1.0,
            0.599_832_206_555_888,
            0.136_929_880_922_735_8,
            0.014_875_361_290_850_615,
            7.868_691_311_456_133e-4,
            1.846_318_317_510_054_8e-5,
            1.421_511_758_316_446e-7,
            2.044_263_103_389_939_7e-15,
        ];
        horner(&E, r) / horner(&F, r)
    };
    if q < 0.0 {
        -value
    } else {
        value
    }
}

fn horner(coeffs: &[f64; 8], r: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c)
}

fn validate_chains(chains: &[Vec<f64>]) -> Result<(), DiagnosticsError> {
    if chains.is_empty() {
        return Err(DiagnosticsError::NoChains);
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(DiagnosticsError::MismatchedChains);
    }
    if n < 4 {
        return Err(DiagnosticsError::TooFewDraws { needed: 4, got: n });
    }
    let first = chains[0][0];
    if chains.iter().flatten().all(|&v| v == first) {
        return Err(DiagnosticsError::ConstantChain);
    }
    Ok(())
}

/// Split every chain into halves (the middle draw is dropped for odd
/// lengths).
fn split_chains(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut halves = Vec::with_capacity(2 * chains.len());
    for chain in chains {
        let half = chain.len() / 2;
        halves.push(chain[..half].to_vec());
        halves.push(chain[chain.len() - half..].to_vec());
    }
    halves
}

/// Replace draws by normal scores of their pooled average ranks
/// (offset-3/8 rule). Ties receive the average rank.
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = chains.len();
    let n = chains[0].len();
    let total = m * n;
    let mut indexed: Vec<(f64, usize)> = chains
        .iter()
        .enumerate()
        .flat_map(|(c, chain)| chain.iter().enumerate().map(move |(i, &v)| (v, c * n + i)))
        .collect();
    indexed.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut ranks = vec![0.0; total];
    let mut start = 0;
    while start < total {
        let mut end = start + 1;
        while end < total && indexed[end].0 == indexed[start].0 {
            end += 1;
        }
        // 1-based average rank of the tied run.
        let avg_rank = (start + 1 + end) as f64 / 2.0;
        for item in &indexed[start..end] {
            ranks[item.1] = avg_rank;
        }
        start = end;
    }

    let denom = total as f64 + 0.25;
    (0..m)
        .map(|c| {
            (0..n)
                .map(|i| normal_quantile((ranks[c * n + i] - 0.375) / denom))
                .collect()
        })
        .collect()
}

/// Classic potential scale reduction over a set of equal-length chains.
fn classic_rhat(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len() as f64;
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = n * means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>() / (m - 1.0);
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}

/// Rank-normalized split R-hat for one parameter.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64, DiagnosticsError> {
    validate_chains(chains)?;
    let halves = split_chains(chains);
    let ranked = rank_normalize(&halves);
    Ok(classic_rhat(&ranked))
}

/// ESS over already-prepared chains, via averaged per-chain autocovariances
/// and Geyer's initial monotone positive-pair truncation.
fn ess_from_chains(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len() as f64;
    let n = chains[0].len();
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / nf).collect();

    // Biased (divide by n) autocovariances per chain.
    let acov = |chain: &[f64], mean: f64, lag: usize| -> f64 {
        (0..n - lag)
            .map(|i| (chain[i] - mean) * (chain[i + lag] - mean))
            .sum::<f64>()
            / nf
    };

    let chain_acov0: Vec<f64> = chains
        .iter()
        .zip(&means)
        .map(|(c, &mu)| acov(c, mu, 0))
        .collect();
    let mean_var = chain_acov0.iter().sum::<f64>() / m * nf / (nf - 1.0);
    let var_plus = if chains.len() > 1 {
        let grand = means.iter().sum::<f64>() / m;
        let b_over_n = means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>() / (m - 1.0);
        mean_var * (nf - 1.0) / nf + b_over_n
    } else {
        mean_var * (nf - 1.0) / nf
    };
    if var_plus <= 0.0 {
        return f64::NAN;
    }

    let rho = |lag: usize| -> f64 {
        let mean_acov = chains
            .iter()
            .zip(&means)
            .map(|(c, &mu)| acov(c, mu, lag))
            .sum::<f64>()
            / m;
        1.0 - (mean_var - mean_acov) / var_plus
    };

    // Geyer pairs: sum rho_{2k} + rho_{2k+1} while positive, forced monotone.
    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = rho(lag) + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        lag += 2;
    }
    let total = m * nf;
    let ess = total / tau.max(1.0 / ESS_CAP_FACTOR / 10.0);
    ess.min(ESS_CAP_FACTOR * total)
}

/// Bulk effective sample size: ESS of the rank-normalized split chains.
pub fn ess_bulk(chains: &[Vec<f64>]) -> Result<f64, DiagnosticsError> {
    validate_chains(chains)?;
    let halves = split_chains(chains);
    Ok(ess_from_chains(&rank_normalize(&halves)))
}

/// Tail effective sample size: the smaller of the ESS of the 5% and 95%
/// quantile-indicator sequences.
pub fn ess_tail(chains: &[Vec<f64>]) -> Result<f64, DiagnosticsError> {
    validate_chains(chains)?;
    let mut pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    pooled.sort_by(|a, b| a.total_cmp(b));
    let quantile = |q: f64| -> f64 {
        let idx = (q * (pooled.len() - 1) as f64).round() as usize;
        pooled[idx]
    };
    let halves = split_chains(chains);
    let ess_indicator = |threshold: f64| -> f64 {
        let indicators: Vec<Vec<f64>> = halves
            .iter()
            .map(|c| {
                c.iter()
                    .map(|&v| if v <= threshold { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        ess_from_chains(&indicators)
    };
    let lower = ess_indicator(quantile(0.05));
    let upper = ess_indicator(quantile(0.95));
    Ok(lower.min(upper))
}

/// Shortest interval containing `prob` of the sample mass.
pub fn hdi(samples: &[f64], prob: f64) -> Result<(f64, f64), DiagnosticsError> {
    if !(prob > 0.0 && prob <= 1.0) {
        return Err(DiagnosticsError::InvalidProb(prob));
    }
    if samples.len() < 10 {
        return Err(DiagnosticsError::TooFewDraws {
            needed: 10,
            got: samples.len(),
        });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    let window = ((prob * n as f64).ceil() as usize).clamp(2, n);
    let mut best = (sorted[0], sorted[window - 1]);
    let mut best_width = best.1 - best.0;
    for start in 1..=n - window {
        let width = sorted[start + window - 1] - sorted[start];
        if width < best_width {
            best_width = width;
            best = (sorted[start], sorted[start + window - 1]);
        }
    }
    Ok(best)
}

/// Monte Carlo fraction of draws beyond a threshold.
pub fn tail_probability(samples: &[f64], direction: TailDirection, threshold: f64) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let count = samples
        .iter()
        .filter(|&&v| match direction {
            TailDirection::Greater => v > threshold,
            TailDirection::Less => v < threshold,
        })
        .count();
    count as f64 / samples.len() as f64
}

/// Full per-parameter summary of a posterior sample. Degenerate (constant)
/// parameters get NaN diagnostics rather than aborting the report.
pub fn summarize(chain_draws: &ChainDraws, prob: f64) -> Result<Vec<SummaryRow>, DiagnosticsError> {
    let mut rows = Vec::with_capacity(chain_draws.n_params());
    for (idx, name) in chain_draws.param_names.iter().enumerate() {
        let matrix = chain_draws.param_matrix(idx);
        let flat = chain_draws.param_flat(idx);
        let n = flat.len() as f64;
        let mean = flat.iter().sum::<f64>() / n;
        let sd = if flat.len() > 1 {
            (flat.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let (hdi_low, hdi_high) = match hdi(&flat, prob) {
            Ok(interval) => interval,
            Err(DiagnosticsError::TooFewDraws { .. }) if !flat.is_empty() => {
                let min = flat.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = flat.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (min, max)
            }
            Err(e) => return Err(e),
        };
        let allow_nan = |r: Result<f64, DiagnosticsError>| match r {
            Ok(v) => Ok(v),
            Err(DiagnosticsError::ConstantChain) => Ok(f64::NAN),
            Err(e) => Err(e),
        };
        rows.push(SummaryRow {
            parameter: name.clone(),
            mean,
            sd,
            hdi_low,
            hdi_high,
            rhat: allow_nan(split_rhat(&matrix))?,
            ess_bulk: allow_nan(ess_bulk(&matrix))?,
            ess_tail: allow_nan(ess_tail(&matrix))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_chain(rng: &mut ChaCha8Rng, n: usize, mean: f64) -> Vec<f64> {
        (0..n)
            .map(|_| mean + rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    #[test]
    fn normal_quantile_known_values() {
        assert!((normal_quantile(0.5)).abs() < 1e-15);
        assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((normal_quantile(0.05) + 1.644_853_626_951_472).abs() < 1e-12);
        assert!((normal_quantile(1e-10) + 6.361_340_902_404_056).abs() < 1e-9);
    }

    #[test]
    fn iid_chains_have_rhat_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let chains = vec![
            normal_chain(&mut rng, 10_000, 0.0),
            normal_chain(&mut rng, 10_000, 0.0),
        ];
        let r = split_rhat(&chains).unwrap();
        assert!((r - 1.0).abs() < 0.01, "rhat {r}");
    }

    #[test]
    fn separated_chains_have_large_rhat() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // Two fully separated chains: rank normalization bounds split R-hat
        // near sqrt(1.213 / (1 - 2/pi)) ~ 1.83; assert it is far above the
        // 1.01 convergence threshold and close to that saturation level.
        let chains = vec![
            normal_chain(&mut rng, 2000, 0.0),
            normal_chain(&mut rng, 2000, 10.0),
        ];
        let r = split_rhat(&chains).unwrap();
        assert!(r > 1.7, "rhat {r}");
        // Four chains at distinct locations push it past 2.
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|k| normal_chain(&mut rng, 2000, 10.0 * k as f64))
            .collect();
        let r = split_rhat(&chains).unwrap();
        assert!(r > 2.0, "rhat {r}");
    }

    #[test]
    fn constant_chains_are_flagged() {
        let chains = vec![vec![3.0; 100], vec![3.0; 100]];
        assert_eq!(
            split_rhat(&chains).unwrap_err(),
            DiagnosticsError::ConstantChain
        );
        assert_eq!(
            ess_bulk(&chains).unwrap_err(),
            DiagnosticsError::ConstantChain
        );
    }

    #[test]
    fn rhat_is_invariant_under_monotone_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let chains = vec![
            normal_chain(&mut rng, 500, 0.2),
            normal_chain(&mut rng, 500, -0.1),
        ];
        let transformed: Vec<Vec<f64>> = chains
            .iter()
            .map(|c| c.iter().map(|&v| (v * 0.5).exp() + v.powi(3)).collect())
            .collect();
        assert_eq!(
            split_rhat(&chains).unwrap(),
            split_rhat(&transformed).unwrap()
        );
    }

    #[test]
    fn iid_ess_is_near_total_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let chains = vec![
            normal_chain(&mut rng, 5000, 0.0),
            normal_chain(&mut rng, 5000, 0.0),
        ];
        let ess = ess_bulk(&chains).unwrap();
        assert!((ess - 10_000.0).abs() < 1000.0, "ess {ess}");
    }

    #[test]
    fn ar1_ess_matches_analytic_value() {
        let phi = 0.9;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut make_chain = |n: usize| {
            let mut x = 0.0;
            let noise_sd = (1.0 - phi * phi_f64()).sqrt();
            (0..n)
                .map(|_| {
                    x = phi * x + noise_sd * rng.sample::<f64, _>(StandardNormal);
                    x
                })
                .collect::<Vec<_>>()
        };
        fn phi_f64() -> f64 {
            0.9
        }
        let n = 20_000;
        let chains = vec![make_chain(n), make_chain(n)];
        let ess = ess_bulk(&chains).unwrap();
        let expected = 2.0 * n as f64 * (1.0 - phi) / (1.0 + phi);
        let rel = (ess - expected).abs() / expected;
        assert!(rel < 0.20, "ess {ess}, expected {expected}");
    }

    #[test]
    fn antithetic_chain_ess_exceeds_n_up_to_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let chains: Vec<Vec<f64>> = (0..2)
            .map(|_| {
                (0..4000)
                    .map(|i| {
                        let noise: f64 = StandardNormal.sample(&mut rng);
                        if i % 2 == 0 {
                            1.0 + 0.1 * noise
                        } else {
                            -1.0 + 0.1 * noise
                        }
                    })
                    .collect()
            })
            .collect();
        let ess = ess_bulk(&chains).unwrap();
        assert!(ess > 8000.0, "ess {ess}");
        assert!(ess <= 1.5 * 8000.0 + 1e-9, "ess {ess} above cap");
    }

    #[test]
    fn ess_is_invariant_under_positive_affine_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let chains = vec![
            normal_chain(&mut rng, 1000, 0.0),
            normal_chain(&mut rng, 1000, 0.0),
        ];
        let scaled: Vec<Vec<f64>> = chains
            .iter()
            .map(|c| c.iter().map(|&v| 3.0 * v + 7.0).collect())
            .collect();
        let a = ess_bulk(&chains).unwrap();
        let b = ess_bulk(&scaled).unwrap();
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn hdi_full_probability_is_the_range() {
        let samples: Vec<f64> = (0..50).map(|i| i as f64).collect();
        assert_eq!(hdi(&samples, 1.0).unwrap(), (0.0, 49.0));
    }

    #[test]
    fn hdi_of_standard_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let samples: Vec<f64> = (0..100_000)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let (low, high) = hdi(&samples, 0.95).unwrap();
        assert!((low + 1.96).abs() < 0.05, "low {low}");
        assert!((high - 1.96).abs() < 0.05, "high {high}");
    }

    #[test]
    fn hdi_of_exponential_hugs_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let samples: Vec<f64> = (0..100_000).map(|_| -rng.random::<f64>().ln()).collect();
        let (low, high) = hdi(&samples, 0.95).unwrap();
        assert!(low < 0.01, "low {low}");
        assert!((high - 3.0).abs() < 0.1, "high {high}");
    }

    #[test]
    fn hdi_is_never_wider_than_the_equal_tailed_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let samples: Vec<f64> = (0..2000)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z.exp() // skewed
                })
                .collect();
            let (low, high) = hdi(&samples, 0.9).unwrap();
            let mut sorted = samples.clone();
            sorted.sort_by(|a, b| a.total_cmp(b));
            let eq_low = sorted[(0.05 * 2000.0) as usize];
            let eq_high = sorted[(0.95 * 2000.0) as usize - 1];
            assert!(high - low <= eq_high - eq_low + 1e-12);
        }
    }

    #[test]
    fn tail_probability_basics() {
        let all_positive = vec![0.1, 2.0, 5.0, 0.4];
        assert_eq!(
            tail_probability(&all_positive, TailDirection::Greater, 0.0),
            1.0
        );
        let symmetric = vec![-2.0, 2.0, -1.0, 1.0];
        assert_eq!(
            tail_probability(&symmetric, TailDirection::Greater, 0.0),
            0.5
        );
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal: Vec<f64> = (0..100_000)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let p = tail_probability(&normal, TailDirection::Greater, 1.645);
        assert!((p - 0.05).abs() < 0.005, "p {p}");
    }

    #[test]
    fn too_few_draws_is_an_error() {
        assert!(matches!(
            split_rhat(&[vec![1.0, 2.0]]),
            Err(DiagnosticsError::TooFewDraws { .. })
        ));
        assert!(matches!(
            hdi(&[1.0, 2.0], 0.9),
            Err(DiagnosticsError::TooFewDraws { .. })
        ));
    }
}
