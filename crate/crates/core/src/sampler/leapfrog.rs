//! Stormer-Verlet integrator for the Hamiltonian flow.

use super::Target;

/// Position, momentum, and the cached gradient/log-density at the position.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub grad: Vec<f64>,
    pub logp: f64,
}

pub fn kinetic_energy(p: &[f64], inv_mass: &[f64]) -> f64 {
    0.5 * p
        .iter()
        .zip(inv_mass)
        .map(|(pi, im)| pi * pi * im)
        .sum::<f64>()
}

impl PhaseState {
    pub fn energy(&self, inv_mass: &[f64]) -> f64 {
        -self.logp + kinetic_energy(&self.p, inv_mass)
    }
}

/// One leapfrog step: momentum half-kick, position drift scaled by the
/// inverse mass, momentum half-kick. `None` when the target evaluates
/// non-finite at the new position. The arithmetic order is fixed so repeated
/// runs are bit-identical.
pub fn leapfrog<T: Target>(
    target: &T,
    state: &PhaseState,
    step_size: f64,
    inv_mass: &[f64],
) -> Option<PhaseState> {
    let half = 0.5 * step_size;
    let p_half: Vec<f64> = state
        .p
        .iter()
        .zip(&state.grad)
        .map(|(p, g)| p + half * g)
        .collect();
    let q: Vec<f64> = state
        .q
        .iter()
        .zip(p_half.iter().zip(inv_mass))
        .map(|(q, (p, im))| q + step_size * im * p)
        .collect();
    let (logp, grad) = target.logp_and_grad(&q)?;
    let p: Vec<f64> = p_half
        .iter()
        .zip(&grad)
        .map(|(p, g)| p + half * g)
        .collect();
    Some(PhaseState { q, p, grad, logp })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Standard normal in `dim` dimensions.
    pub struct Gaussian(pub usize);

    impl Target for Gaussian {
        fn dim(&self) -> usize {
            self.0
        }
        fn logp_and_grad(&self, z: &[f64]) -> Option<(f64, Vec<f64>)> {
            let logp = -0.5 * z.iter().map(|v| v * v).sum::<f64>();
            Some((logp, z.iter().map(|v| -v).collect()))
        }
    }

    fn state_at(q: Vec<f64>, p: Vec<f64>) -> PhaseState {
        let target = Gaussian(q.len());
        let (logp, grad) = target.logp_and_grad(&q).unwrap();
        PhaseState { q, p, grad, logp }
    }

    #[test]
    fn vanishing_step_size_is_the_identity() {
        let target = Gaussian(2);
        let state = state_at(vec![1.0, -0.5], vec![0.3, 0.8]);
        let next = leapfrog(&target, &state, 1e-300, &[1.0, 1.0]).unwrap();
        for (a, b) in next.q.iter().zip(&state.q) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in next.p.iter().zip(&state.p) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn harmonic_oscillator_matches_taylor_expansion() {
        // Standard Gaussian target, unit mass: exact flow from (q,p) = (1,0)
        // is q(t) = cos t, p(t) = -sin t. One leapfrog step of size eps agrees
        // to O(eps^3).
        let target = Gaussian(1);
        let eps = 0.1;
        let state = state_at(vec![1.0], vec![0.0]);
        let next = leapfrog(&target, &state, eps, &[1.0]).unwrap();
        assert!(
            (next.q[0] - eps.cos()).abs() < eps.powi(3),
            "q {}",
            next.q[0]
        );
        assert!(
            (next.p[0] - (-eps.sin())).abs() < eps.powi(3),
            "p {}",
            next.p[0]
        );
    }

    #[test]
    fn reversibility_round_trip() {
        let target = Gaussian(3);
        let inv_mass = [1.0, 0.5, 2.0];
        let initial = state_at(vec![0.7, -1.1, 0.4], vec![0.2, 0.9, -0.6]);
        let steps = 25;
        let eps = 0.05;
        let mut state = initial.clone();
        for _ in 0..steps {
            state = leapfrog(&target, &state, eps, &inv_mass).unwrap();
        }
        state.p.iter_mut().for_each(|p| *p = -*p);
        for _ in 0..steps {
            state = leapfrog(&target, &state, eps, &inv_mass).unwrap();
        }
        for (a, b) in state.q.iter().zip(&initial.q) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        for (a, b) in state.p.iter().zip(&initial.p) {
            assert!((a + b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn energy_uses_inverse_mass_weighting() {
        let state = state_at(vec![0.0], vec![2.0]);
        assert_eq!(state.energy(&[0.25]), 0.5);
    }
}
