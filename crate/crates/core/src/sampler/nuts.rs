//! NUTS transition: trajectory tree doubling with multinomial state
//! selection and a generalized u-turn criterion.

use super::leapfrog::{leapfrog, PhaseState};
use super::{draw_momentum, Target, DIVERGENCE_THRESHOLD};
use rand::Rng;

/// Statistics of one NUTS transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionStat {
    pub divergent: bool,
    pub accept_stat: f64,
    pub tree_depth: usize,
    pub energy: f64,
}

struct Subtree {
    /// Trajectory boundaries: `left` is backward-most, `right` forward-most.
    left: PhaseState,
    right: PhaseState,
    proposal: PhaseState,
    log_sum_weight: f64,
    /// Sum of momenta over the subtree.
    rho: Vec<f64>,
    divergent: bool,
    turning: bool,
    accept_sum: f64,
    n_leapfrog: usize,
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Generalized u-turn check: the trajectory keeps extending only while the
/// mass-weighted momentum sum points away from both boundaries.
fn is_turning(left: &PhaseState, right: &PhaseState, rho: &[f64], inv_mass: &[f64]) -> bool {
    let mut forward = 0.0;
    let mut backward = 0.0;
    for i in 0..rho.len() {
        let weighted = inv_mass[i] * rho[i];
        forward += weighted * right.p[i];
        backward += weighted * left.p[i];
    }
    forward <= 0.0 || backward <= 0.0
}

#[allow(clippy::too_many_arguments)]
fn build_tree<T: Target, R: Rng>(
    target: &T,
    from: &PhaseState,
    direction: f64,
    depth: usize,
    step_size: f64,
    inv_mass: &[f64],
    h0: f64,
    rng: &mut R,
) -> Subtree {
    if depth == 0 {
        return match leapfrog(target, from, direction * step_size, inv_mass) {
            Some(next) => {
                let delta_h = next.energy(inv_mass) - h0;
                let divergent = !delta_h.is_finite() || delta_h > DIVERGENCE_THRESHOLD;
                let accept = if delta_h.is_finite() {
                    (-delta_h).exp().min(1.0)
                } else {
                    0.0
                };
                let log_weight = if divergent {
                    f64::NEG_INFINITY
                } else {
                    -delta_h
                };
                Subtree {
                    left: next.clone(),
                    right: next.clone(),
                    rho: next.p.clone(),
                    proposal: next,
                    log_sum_weight: log_weight,
                    divergent,
                    turning: false,
                    accept_sum: accept,
                    n_leapfrog: 1,
                }
            }
            None => Subtree {
                left: from.clone(),
                right: from.clone(),
                rho: vec![0.0; from.q.len()],
                proposal: from.clone(),
                log_sum_weight: f64::NEG_INFINITY,
                divergent: true,
                turning: false,
                accept_sum: 0.0,
                n_leapfrog: 1,
            },
        };
    }

    let first = build_tree(
        target,
        from,
        direction,
        depth - 1,
        step_size,
        inv_mass,
        h0,
        rng,
    );
    if first.divergent || first.turning {
        return first;
    }
    let grow_from = if direction > 0.0 {
        &first.right
    } else {
        &first.left
    };
    let second = build_tree(
        target,
        grow_from,
        direction,
        depth - 1,
        step_size,
        inv_mass,
        h0,
        rng,
    );

    let accept_sum = first.accept_sum + second.accept_sum;
    let n_leapfrog = first.n_leapfrog + second.n_leapfrog;
    if second.divergent || second.turning {
        return Subtree {
            accept_sum,
            n_leapfrog,
            divergent: second.divergent,
            turning: second.turning,
            ..first
        };
    }

    let log_sum_weight = log_add_exp(first.log_sum_weight, second.log_sum_weight);
    // Multinomial selection between the two halves.
    let take_second = rng.random::<f64>() < (second.log_sum_weight - log_sum_weight).exp();
    let proposal = if take_second {
        second.proposal
    } else {
        first.proposal
    };
    let rho: Vec<f64> = first
        .rho
        .iter()
        .zip(&second.rho)
        .map(|(a, b)| a + b)
        .collect();
    let (left, right) = if direction > 0.0 {
        (first.left, second.right)
    } else {
        (second.left, first.right)
    };
    let turning = is_turning(&left, &right, &rho, inv_mass);
    Subtree {
        left,
        right,
        proposal,
        log_sum_weight,
        rho,
        divergent: false,
        turning,
        accept_sum,
        n_leapfrog,
    }
}

/// One NUTS draw: resample momentum, double the trajectory until a u-turn,
/// divergence, or the depth limit, and select the next state by multinomial
/// weighting over the trajectory.
pub fn nuts_transition<T: Target, R: Rng>(
    target: &T,
    current: PhaseState,
    step_size: f64,
    inv_mass: &[f64],
    max_tree_depth: usize,
    rng: &mut R,
) -> (PhaseState, TransitionStat) {
    let mut state = current;
    state.p = draw_momentum(inv_mass, rng);
    let h0 = state.energy(inv_mass);

    let mut left = state.clone();
    let mut right = state.clone();
    let mut proposal = state.clone();
    let mut rho = state.p.clone();
    let mut log_sum_weight = 0.0_f64;
    let mut divergent = false;
    let mut accept_sum = 0.0;
    let mut n_leapfrog = 0usize;
    let mut depth = 0usize;

    while depth < max_tree_depth {
        let direction: f64 = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let from = if direction > 0.0 { &right } else { &left };
        let subtree = build_tree(target, from, direction, depth, step_size, inv_mass, h0, rng);
        accept_sum += subtree.accept_sum;
        n_leapfrog += subtree.n_leapfrog;
        divergent |= subtree.divergent;
        if subtree.divergent || subtree.turning {
            break;
        }

        // Biased progressive sampling: favor the fresh half of the trajectory.
        let accept_prob = (subtree.log_sum_weight - log_sum_weight).exp();
        if rng.random::<f64>() < accept_prob {
            proposal = subtree.proposal.clone();
        }
        log_sum_weight = log_add_exp(log_sum_weight, subtree.log_sum_weight);
        rho.iter_mut().zip(&subtree.rho).for_each(|(r, s)| *r += s);
        if direction > 0.0 {
            right = subtree.right;
        } else {
            left = subtree.left;
        }
        depth += 1;
        if is_turning(&left, &right, &rho, inv_mass) {
            break;
        }
    }

    let energy = proposal.energy(inv_mass);
    let accept_stat = if n_leapfrog > 0 {
        accept_sum / n_leapfrog as f64
    } else {
        0.0
    };
    (
        proposal,
        TransitionStat {
            divergent,
            accept_stat,
            tree_depth: depth,
            energy,
        },
    )
}
