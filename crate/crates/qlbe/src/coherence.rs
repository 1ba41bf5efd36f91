//! Superposition-state process: N momentum branches with complex
//! amplitudes, deterministic drift, branch-correlated jumps, and the
//! pairwise coherence observable.
//!
//! Amplitudes are carried in log-modulus + phase form. The jump factors
//! e^{−(K/2 + K̂·U)²} underflow for well-separated branches, so all
//! normalizations go through log-sum-exp.

use crate::error::{Error, Result};
use crate::physics::{total_rate, GasSpec};
use crate::sampling::{sample_momentum_transfer, sample_waiting_time_mixture, RngStream};
use nalgebra::{Complex, Vector3};

/// N scaled momenta plus N complex amplitudes with unit total weight.
#[derive(Debug, Clone)]
pub struct SuperpositionState {
    momenta: Vec<Vector3<f64>>,
    log_moduli: Vec<f64>,
    phases: Vec<f64>,
    time: f64,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

impl SuperpositionState {
    pub fn new(momenta: Vec<Vector3<f64>>, amplitudes: &[Complex<f64>]) -> Result<Self> {
        if momenta.is_empty() || momenta.len() != amplitudes.len() {
            return Err(Error::parameter(
                "amplitudes",
                format!(
                    "need N ≥ 1 momenta with matching amplitudes, got {} and {}",
                    momenta.len(),
                    amplitudes.len()
                ),
            ));
        }
        let total: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::parameter(
                "amplitudes",
                format!("total weight must be 1, got {total}"),
            ));
        }
        let mut state = SuperpositionState {
            momenta,
            log_moduli: amplitudes.iter().map(|a| a.norm().ln()).collect(),
            phases: amplitudes.iter().map(|a| a.arg()).collect(),
            time: 0.0,
        };
        state.renormalize();
        Ok(state)
    }

    /// Balanced superposition of opposite sharp momenta ±u0 with real
    /// amplitudes √w₁ and √(1−w₁).
    pub fn opposite_pair(u0: Vector3<f64>, weight_first: f64) -> Result<Self> {
        if !(weight_first > 0.0 && weight_first < 1.0) {
            return Err(Error::parameter(
                "weight_first",
                format!("must lie in (0,1), got {weight_first}"),
            ));
        }
        Ok(SuperpositionState {
            momenta: vec![u0, -u0],
            log_moduli: vec![0.5 * weight_first.ln(), 0.5 * (1.0 - weight_first).ln()],
            phases: vec![0.0, 0.0],
            time: 0.0,
        })
    }

    pub fn branch_count(&self) -> usize {
        self.momenta.len()
    }

    pub fn momenta(&self) -> &[Vector3<f64>] {
        &self.momenta
    }

    pub fn log_moduli(&self) -> &[f64] {
        &self.log_moduli
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn amplitudes(&self) -> Vec<Complex<f64>> {
        self.log_moduli
            .iter()
            .zip(&self.phases)
            .map(|(&l, &p)| Complex::from_polar(l.exp(), p))
            .collect()
    }

    /// |Σ|αᵢ|² − 1|; zero up to rounding after every operation.
    pub fn normalization_defect(&self) -> f64 {
        let total: f64 = self.log_moduli.iter().map(|&l| (2.0 * l).exp()).sum();
        (total - 1.0).abs()
    }

    fn renormalize(&mut self) {
        let doubled: Vec<f64> = self.log_moduli.iter().map(|&l| 2.0 * l).collect();
        let half_lse = 0.5 * log_sum_exp(&doubled);
        for l in &mut self.log_moduli {
            *l -= half_lse;
        }
    }

    fn branch_rates(&self, spec: &GasSpec) -> Vec<f64> {
        self.momenta
            .iter()
            .map(|u| total_rate(u.norm(), spec.cross_section))
            .collect()
    }

    fn drifted_with_rates(&self, rates: &[f64], tau: f64, kappa: f64) -> Self {
        let mut next = self.clone();
        for (i, l) in next.log_moduli.iter_mut().enumerate() {
            *l -= 0.5 * rates[i] * tau;
        }
        for (i, p) in next.phases.iter_mut().enumerate() {
            *p -= kappa * next.momenta[i].norm_squared() * tau;
        }
        next.renormalize();
        next.time += tau;
        next
    }
}

/// Deterministic inter-jump evolution over τ: phases advance by −κUᵢ²τ,
/// moduli decay by e^{−Γᵢτ/2} and renormalize; momenta are unchanged.
pub fn drift(state: &SuperpositionState, tau: f64, spec: &GasSpec) -> SuperpositionState {
    assert!(tau > 0.0, "drift step must be positive");
    state.drifted_with_rates(&state.branch_rates(spec), tau, spec.phase_const)
}

/// Jump with momentum transfer `k_vec`: every branch shifts by (m*/M)K and
/// the amplitudes pick up the correlated factors fᵢ.
pub fn jump(state: &SuperpositionState, k_vec: Vector3<f64>, spec: &GasSpec) -> SuperpositionState {
    let k = k_vec.norm();
    assert!(k > 0.0, "jump requires a nonzero momentum transfer");
    let recoil = spec.reduced_mass_ratio();
    let mut next = state.clone();
    for (i, l) in next.log_moduli.iter_mut().enumerate() {
        let y = k / 2.0 + k_vec.dot(&state.momenta[i]) / k;
        *l -= 0.5 * y * y;
    }
    next.renormalize();
    for u in &mut next.momenta {
        *u += recoil * k_vec;
    }
    next
}

/// Probability of selecting branch i for the transfer draw after a waiting
/// time τ: pᵢ ∝ |αᵢ|² e^{−Γᵢτ} Γᵢ, evaluated on the pre-drift state.
pub fn branch_probabilities(state: &SuperpositionState, tau: f64, spec: &GasSpec) -> Vec<f64> {
    assert!(tau > 0.0, "waiting time must be positive");
    branch_probabilities_from(state.log_moduli(), &state.branch_rates(spec), tau)
}

fn branch_probabilities_from(log_moduli: &[f64], rates: &[f64], tau: f64) -> Vec<f64> {
    let logs: Vec<f64> = log_moduli
        .iter()
        .zip(rates)
        .map(|(&l, &g)| 2.0 * l - g * tau + g.ln())
        .collect();
    let lse = log_sum_exp(&logs);
    let mut probs: Vec<f64> = logs.iter().map(|&x| (x - lse).exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    probs
}

/// Per-realization coherence contribution |α₁||α₂| of a two-branch state;
/// the ensemble layer normalizes by the initial product.
pub fn coherence(state: &SuperpositionState) -> Result<f64> {
    if state.branch_count() != 2 {
        return Err(Error::parameter(
            "state",
            format!("coherence requires N = 2 branches, got {}", state.branch_count()),
        ));
    }
    Ok((state.log_moduli[0] + state.log_moduli[1]).exp())
}

/// Simulate the superposition process over [0, t_f], recording the state
/// at each output time (drift-interpolated from the last jump; snapshots
/// at a jump time are post-jump).
pub fn simulate_superposition(
    state0: &SuperpositionState,
    t_f: f64,
    output_times: &[f64],
    spec: &GasSpec,
    rng: &mut RngStream,
) -> Result<Vec<SuperpositionState>> {
    if !(t_f > 0.0) {
        return Err(Error::parameter("t_f", format!("must be positive, got {t_f}")));
    }
    if output_times.windows(2).any(|w| w[1] < w[0])
        || output_times.iter().any(|&t| !(0.0..=t_f).contains(&t))
    {
        return Err(Error::parameter(
            "output_times",
            "must be sorted and contained in [0, t_f]".to_string(),
        ));
    }
    if state0.time != 0.0 {
        return Err(Error::parameter("state0", "initial state must start at t = 0".to_string()));
    }

    let n = state0.branch_count();
    let mut state = state0.clone();
    let mut snapshots = Vec::with_capacity(output_times.len());
    let mut out_idx = 0;
    let snapshot_at = |s: &SuperpositionState, t: f64, spec: &GasSpec| {
        let dt = t - s.time();
        if dt > 0.0 {
            drift(s, dt, spec)
        } else {
            s.clone()
        }
    };

    loop {
        let weights: Vec<f64> = state.log_moduli.iter().map(|&l| (2.0 * l).exp()).collect();
        let rates = state.branch_rates(spec);
        let tau = sample_waiting_time_mixture(&weights, &rates, rng)?;
        let t_jump = state.time + tau;

        let horizon = t_jump.min(t_f);
        while out_idx < output_times.len() && output_times[out_idx] < horizon {
            snapshots.push(snapshot_at(&state, output_times[out_idx], spec));
            out_idx += 1;
        }
        if t_jump > t_f {
            while out_idx < output_times.len() {
                snapshots.push(snapshot_at(&state, output_times[out_idx], spec));
                out_idx += 1;
            }
            return Ok(snapshots);
        }

        let branch = if n == 1 {
            0
        } else {
            let probs = branch_probabilities_from(state.log_moduli(), &rates, tau);
            let r = rng.uniform_open01();
            let mut cum = 0.0;
            let mut chosen = n - 1;
            for (i, &p) in probs.iter().enumerate() {
                cum += p;
                if r < cum {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        let branch_u = state.momenta[branch];
        state = drift(&state, tau, spec);
        let transfer = sample_momentum_transfer(branch_u, spec.cross_section, rng)?;
        state = jump(&state, transfer.k_vec, spec);

        while out_idx < output_times.len() && output_times[out_idx] == state.time() {
            snapshots.push(state.clone());
            out_idx += 1;
        }
    }
}
