//! The classical pure-jump process U(t) for momentum-eigenstate initial
//! conditions.

use crate::error::{Error, Result};
use crate::physics::{total_rate, GasSpec};
use crate::sampling::{sample_momentum_transfer, sample_waiting_time, RngStream};
use nalgebra::Vector3;

/// Piecewise-constant record of one realization: (jump time, scaled
/// momentum) pairs starting at t = 0, right-continuous at jumps. The final
/// segment extends to `t_final` implicitly.
#[derive(Debug, Clone)]
pub struct JumpTrajectory {
    events: Vec<(f64, Vector3<f64>)>,
    t_final: f64,
}

impl JumpTrajectory {
    pub fn events(&self) -> &[(f64, Vector3<f64>)] {
        &self.events
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_jumps(&self) -> usize {
        self.events.len() - 1
    }

    /// Momentum at time `t`: the value of the last event with time ≤ t.
    pub fn evaluate_at(&self, t: f64) -> Result<Vector3<f64>> {
        if !(0.0..=self.t_final).contains(&t) {
            return Err(Error::parameter(
                "t",
                format!("time {t} outside [0, {}]", self.t_final),
            ));
        }
        let idx = self.events.partition_point(|&(time, _)| time <= t);
        Ok(self.events[idx - 1].1)
    }
}

/// Generate one realization of the pure jump process over [0, t_f]:
/// exponential waiting times at rate Γ(|U|), jumps U → U + (m*/M) K with K
/// drawn from R(K,ξ).
pub fn simulate_eigenstate_trajectory(
    u0: Vector3<f64>,
    t_f: f64,
    spec: &GasSpec,
    rng: &mut RngStream,
) -> Result<JumpTrajectory> {
    if !(t_f > 0.0) {
        return Err(Error::parameter("t_f", format!("must be positive, got {t_f}")));
    }
    let recoil = spec.reduced_mass_ratio();
    let mut u = u0;
    let mut t = 0.0;
    let mut events = vec![(0.0, u)];
    loop {
        let rate = total_rate(u.norm(), spec.cross_section);
        t += sample_waiting_time(rate, rng)?;
        if t > t_f {
            break;
        }
        let transfer = sample_momentum_transfer(u, spec.cross_section, rng)?;
        u += recoil * transfer.k_vec;
        events.push((t, u));
    }
    Ok(JumpTrajectory { events, t_final: t_f })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::CrossSectionModel;
    use approx::assert_abs_diff_eq;

    fn spec(mass_ratio: f64) -> GasSpec {
        GasSpec::new(mass_ratio, CrossSectionModel::Constant, 0.0).unwrap()
    }

    #[test]
    fn evaluate_at_is_right_continuous() {
        let traj = JumpTrajectory {
            events: vec![
                (0.0, Vector3::new(1.0, 0.0, 0.0)),
                (0.5, Vector3::new(2.0, 0.0, 0.0)),
                (1.2, Vector3::new(3.0, 0.0, 0.0)),
            ],
            t_final: 2.0,
        };
        assert_eq!(traj.evaluate_at(0.0).unwrap().x, 1.0);
        assert_eq!(traj.evaluate_at(0.3).unwrap().x, 1.0);
        // post-jump value at the jump time itself
        assert_eq!(traj.evaluate_at(0.5).unwrap().x, 2.0);
        assert_eq!(traj.evaluate_at(0.7).unwrap().x, 2.0);
        assert_eq!(traj.evaluate_at(2.0).unwrap().x, 3.0);
        assert!(traj.evaluate_at(-0.1).is_err());
        assert!(traj.evaluate_at(2.1).is_err());
    }

    #[test]
    fn trajectory_invariants() {
        let mut rng = RngStream::new(21, 0);
        let spec = spec(1.0);
        let traj =
            simulate_eigenstate_trajectory(Vector3::new(1.0, 0.0, 0.0), 20.0, &spec, &mut rng)
                .unwrap();
        assert!(traj.n_jumps() > 5);
        let recoil = spec.reduced_mass_ratio();
        for w in traj.events().windows(2) {
            assert!(w[1].0 > w[0].0, "times must strictly increase");
            assert!(w[1].0 <= traj.t_final());
            let dk = (w[1].1 - w[0].1) / recoil;
            assert!(dk.norm() > 0.0, "momentum must change at a jump");
        }
        assert_eq!(traj.events()[0].0, 0.0);
    }

    #[test]
    fn vanishing_recoil_freezes_momentum() {
        let mut rng = RngStream::new(4, 0);
        let u0 = Vector3::new(1.0, 0.0, 0.0);
        let traj = simulate_eigenstate_trajectory(u0, 5.0, &spec(1e-9), &mut rng).unwrap();
        let drift = (traj.evaluate_at(5.0).unwrap() - u0).norm();
        assert!(drift < 1e-7, "displacement {drift}");
    }

    #[test]
    fn jump_count_is_poissonian_at_fixed_rate() {
        // With a vanishing mass ratio U never moves, so the clock runs at
        // the constant rate Γ(|U0|) and the jump count is Poisson(Γ t_f).
        let spec = spec(1e-12);
        let u0 = Vector3::new(1.0, 0.0, 0.0);
        let t_f = 0.5;
        let lambda = total_rate(1.0, spec.cross_section) * t_f;
        let n = 20_000;
        let mut total = 0usize;
        for i in 0..n {
            let mut rng = RngStream::new(99, i as u64);
            total += simulate_eigenstate_trajectory(u0, t_f, &spec, &mut rng)
                .unwrap()
                .n_jumps();
        }
        let mean = total as f64 / n as f64;
        let se = (lambda / n as f64).sqrt();
        assert!((mean - lambda).abs() < 3.0 * se, "mean {mean} vs λ {lambda}");
    }

    #[test]
    fn reaches_equilibrium_scale() {
        // m/M = 1: a few kicks bring U to the equilibrium scale ⟨U²⟩ = 1.5.
        let spec = spec(1.0);
        let n = 4000;
        let mut sum_sq = 0.0;
        for i in 0..n {
            let mut rng = RngStream::new(17, i as u64);
            let traj =
                simulate_eigenstate_trajectory(Vector3::new(1.0, 0.0, 0.0), 4.0, &spec, &mut rng)
                    .unwrap();
            sum_sq += traj.evaluate_at(4.0).unwrap().norm_squared();
        }
        let mean_sq = sum_sq / n as f64;
        assert!((mean_sq - 1.5).abs() < 0.1, "⟨U²⟩ = {mean_sq}");
    }

    #[test]
    fn deterministic_given_stream() {
        let spec = spec(0.5);
        let u0 = Vector3::new(0.2, -0.4, 1.0);
        let mut rng_a = RngStream::new(1234, 77);
        let mut rng_b = RngStream::new(1234, 77);
        let a = simulate_eigenstate_trajectory(u0, 10.0, &spec, &mut rng_a).unwrap();
        let b = simulate_eigenstate_trajectory(u0, 10.0, &spec, &mut rng_b).unwrap();
        assert_eq!(a.events().len(), b.events().len());
        for (ea, eb) in a.events().iter().zip(b.events()) {
            assert_eq!(ea.0.to_bits(), eb.0.to_bits());
            assert_eq!(ea.1, eb.1);
        }
        assert_abs_diff_eq!(a.t_final(), 10.0);
    }
}
