//! Warmup adaptation: dual-averaging step size plus windowed diagonal mass
//! estimation.

use super::leapfrog::{leapfrog, PhaseState};
use super::nuts::nuts_transition;
use super::{SamplerConfig, Target};
use rand::Rng;

const MIN_STEP_SIZE: f64 = 1e-10;

/// Nesterov dual averaging of the log step size toward a target acceptance
/// statistic. Shrinkage constants gamma = 0.05, t0 = 10, kappa = 0.75.
#[derive(Debug, Clone)]
pub struct DualAveraging {
    mu: f64,
    log_step: f64,
    log_step_avg: f64,
    h_bar: f64,
    count: u64,
    target_accept: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    pub fn new(initial_step: f64, target_accept: f64) -> Self {
        DualAveraging {
            mu: (10.0 * initial_step).ln(),
            log_step: initial_step.ln(),
            log_step_avg: initial_step.ln(),
            h_bar: 0.0,
            count: 0,
            target_accept,
        }
    }

    /// Feed one acceptance statistic; returns the step size for the next
    /// iteration.
    pub fn update(&mut self, accept_stat: f64) -> f64 {
        self.count += 1;
        let m = self.count as f64;
        let eta_h = 1.0 / (m + Self::T0);
        self.h_bar = (1.0 - eta_h) * self.h_bar + eta_h * (self.target_accept - accept_stat);
        self.log_step = self.mu - m.sqrt() / Self::GAMMA * self.h_bar;
        let eta = m.powf(-Self::KAPPA);
        self.log_step_avg = eta * self.log_step + (1.0 - eta) * self.log_step_avg;
        self.log_step.exp()
    }

    pub fn current(&self) -> f64 {
        self.log_step.exp()
    }

    /// The smoothed step size to freeze for the sampling phase.
    pub fn finalized(&self) -> f64 {
        self.log_step_avg.exp()
    }
}

/// Warmup phase layout: a fast start for step-size tuning, expanding slow
/// windows for mass estimation, and a fast tail to re-tune the step size
/// against the final mass.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmupSchedule {
    pub init_buffer: usize,
    /// Iteration indices (relative to warmup start) at which a slow window
    /// closes and the mass matrix is updated.
    pub window_ends: Vec<usize>,
    pub term_start: usize,
    pub total: usize,
}

impl WarmupSchedule {
    pub fn new(warmup: usize) -> Self {
        let mut init_buffer = 15;
        let mut term_buffer = (warmup as f64 * 0.10).round() as usize;
        if init_buffer + term_buffer + 25 > warmup {
            // Cramped budget: shrink the buffers and keep one slow window.
            init_buffer = warmup / 5;
            term_buffer = warmup / 5;
        }
        let term_start = warmup - term_buffer;
        let mut window_ends = Vec::new();
        let mut window = 25usize;
        let mut pos = init_buffer;
        while pos < term_start {
            let mut end = pos + window;
            // If the next doubling would overrun the slow region, absorb the
            // remainder into this window.
            if end + 2 * window > term_start {
                end = term_start;
            }
            window_ends.push(end.min(term_start));
            pos = end;
            window *= 2;
        }
        WarmupSchedule {
            init_buffer,
            window_ends,
            term_start,
            total: warmup,
        }
    }

    fn in_slow_window(&self, iter: usize) -> bool {
        iter >= self.init_buffer && iter < self.term_start
    }

    fn window_closes_at(&self, iter: usize) -> bool {
        self.window_ends.contains(&(iter + 1))
    }
}

/// Streaming mean/variance (Welford).
#[derive(Debug, Clone)]
struct VarianceAccumulator {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl VarianceAccumulator {
    fn new(dim: usize) -> Self {
        VarianceAccumulator {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((xi, mean), m2) in x.iter().zip(&mut self.mean).zip(&mut self.m2) {
            let delta = xi - *mean;
            *mean += delta / n;
            *m2 += delta * (xi - *mean);
        }
    }

    /// Regularized variance estimate, shrunk toward unit scale when the
    /// window is short.
    fn regularized_variance(&self) -> Vec<f64> {
        let n = self.n as f64;
        let shrink = n / (n + 5.0);
        self.m2
            .iter()
            .map(|m2| {
                let var = if self.n > 1 { m2 / (n - 1.0) } else { 1.0 };
                (shrink * var + 1e-3 * (1.0 - shrink)).max(1e-10)
            })
            .collect()
    }
}

/// Coarse step-size search: double or halve until the one-step acceptance
/// probability crosses 1/2.
fn find_initial_step_size<T: Target>(
    target: &T,
    state: &PhaseState,
    inv_mass: &[f64],
    rng: &mut impl Rng,
) -> f64 {
    let mut step = 1.0;
    let mut trial = state.clone();
    trial.p = super::draw_momentum(inv_mass, rng);
    let h0 = trial.energy(inv_mass);
    let log_ratio = |s: f64, trial: &PhaseState| -> f64 {
        match leapfrog(target, trial, s, inv_mass) {
            Some(next) => h0 - next.energy(inv_mass),
            None => f64::NEG_INFINITY,
        }
    };
    let going_up = log_ratio(step, &trial) > (0.5f64).ln();
    for _ in 0..100 {
        let crossed = if going_up {
            step *= 2.0;
            log_ratio(step, &trial) <= (0.5f64).ln()
        } else {
            step *= 0.5;
            log_ratio(step, &trial) > (0.5f64).ln()
        };
        if crossed || !(MIN_STEP_SIZE..=1e7).contains(&step) {
            break;
        }
    }
    step.clamp(MIN_STEP_SIZE, 10.0)
}

/// Run the warmup phase: returns the final state, the frozen step size, and
/// the inverse mass diagonal for the sampling phase.
#[allow(clippy::type_complexity)]
pub fn warmup_adapt<T: Target>(
    target: &T,
    mut state: PhaseState,
    config: &SamplerConfig,
    rng: &mut impl Rng,
) -> Result<(PhaseState, f64, Vec<f64>), String> {
    if config.warmup < 20 {
        return Err(format!(
            "warmup must be >= 20 for adaptation, got {}",
            config.warmup
        ));
    }
    let dim = target.dim();
    let schedule = WarmupSchedule::new(config.warmup);
    let mut inv_mass = vec![1.0; dim];
    let mut step_size = find_initial_step_size(target, &state, &inv_mass, rng);
    let mut averaging = DualAveraging::new(step_size, config.target_accept);
    let mut accumulator = VarianceAccumulator::new(dim);

    for iter in 0..config.warmup {
        let (next, stat) = nuts_transition(
            target,
            state,
            step_size,
            &inv_mass,
            config.max_tree_depth,
            rng,
        );
        state = next;
        step_size = averaging.update(stat.accept_stat);
        if step_size < MIN_STEP_SIZE {
            return Err(format!(
                "step size underflow ({step_size:.3e}) during adaptation"
            ));
        }
        if schedule.in_slow_window(iter) {
            accumulator.push(&state.q);
            if schedule.window_closes_at(iter) {
                inv_mass = accumulator.regularized_variance();
                accumulator = VarianceAccumulator::new(dim);
                // Re-anchor the step size against the new metric.
                step_size = find_initial_step_size(target, &state, &inv_mass, rng);
                averaging = DualAveraging::new(step_size, config.target_accept);
            }
        }
    }

    let final_step = averaging.finalized();
    if !final_step.is_finite() || final_step < MIN_STEP_SIZE {
        return Err(format!("adapted step size {final_step:.3e} is unusable"));
    }
    Ok((state, final_step, inv_mass))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct ScaledGaussian(Vec<f64>);
    impl Target for ScaledGaussian {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn logp_and_grad(&self, z: &[f64]) -> Option<(f64, Vec<f64>)> {
            let logp = -0.5 * z.iter().zip(&self.0).map(|(v, s)| v * v / s).sum::<f64>();
            Some((logp, z.iter().zip(&self.0).map(|(v, s)| -v / s).collect()))
        }
    }

    fn initial(target: &impl Target, q: Vec<f64>) -> PhaseState {
        let (logp, grad) = target.logp_and_grad(&q).unwrap();
        let dim = q.len();
        PhaseState {
            q,
            p: vec![0.0; dim],
            grad,
            logp,
        }
    }

    #[test]
    fn schedule_covers_warmup_exactly() {
        let s = WarmupSchedule::new(500);
        assert_eq!(s.init_buffer, 15);
        assert_eq!(s.term_start, 450);
        assert_eq!(*s.window_ends.last().unwrap(), 450);
        // Windows expand: 25, 50, then the remainder.
        assert_eq!(s.window_ends, vec![40, 90, 190, 450]);
        for w in [20, 50, 100, 1000] {
            let s = WarmupSchedule::new(w);
            assert!(s.init_buffer < s.term_start, "warmup {w}: {s:?}");
            assert_eq!(*s.window_ends.last().unwrap(), s.term_start);
        }
    }

    #[test]
    fn short_warmup_is_refused() {
        let target = ScaledGaussian(vec![1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let config = SamplerConfig {
            warmup: 10,
            ..SamplerConfig::default()
        };
        let state = initial(&target, vec![0.0]);
        assert!(warmup_adapt(&target, state, &config, &mut rng).is_err());
    }

    #[test]
    fn acceptance_lands_near_target_on_gaussian() {
        let target = ScaledGaussian(vec![1.0, 1.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let config = SamplerConfig::default();
        let state = initial(&target, vec![0.1, -0.1, 0.2]);
        let (mut state, step, inv_mass) = warmup_adapt(&target, state, &config, &mut rng).unwrap();
        let mut total = 0.0;
        let n = 1000;
        for _ in 0..n {
            let (next, stat) = nuts_transition(&target, state, step, &inv_mass, 10, &mut rng);
            state = next;
            total += stat.accept_stat;
        }
        let mean_accept = total / n as f64;
        assert!(
            (0.85..=0.95).contains(&mean_accept),
            "mean acceptance {mean_accept} at step {step}"
        );
    }

    #[test]
    fn mass_matrix_tracks_coordinate_variances() {
        let target = ScaledGaussian(vec![1.0, 100.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let config = SamplerConfig {
            warmup: 1000,
            ..SamplerConfig::default()
        };
        let state = initial(&target, vec![0.1, 0.5]);
        let (_, _, inv_mass) = warmup_adapt(&target, state, &config, &mut rng).unwrap();
        let ratio = inv_mass[1] / inv_mass[0];
        assert!(
            (50.0..=200.0).contains(&ratio),
            "variance ratio {ratio}, inv_mass {inv_mass:?}"
        );
    }

    #[test]
    fn dual_averaging_converges_toward_target() {
        // Feed a synthetic acceptance curve that decreases in the step size;
        // the adapted step should settle where acceptance matches the target.
        let mut da = DualAveraging::new(1.0, 0.8);
        let mut step = 1.0;
        for _ in 0..2000 {
            let accept = (-step / 2.0_f64).exp(); // accept(step), monotone down
            step = da.update(accept);
        }
        let final_step = da.finalized();
        let achieved = (-final_step / 2.0_f64).exp();
        assert!(
            (achieved - 0.8).abs() < 0.02,
            "achieved {achieved} at step {final_step}"
        );
    }
}
