//! Random-variate generation for the jump process: reproducible RNG
//! streams, waiting times, momentum transfers from R(K,ξ), and unit
//! vectors.

use crate::error::{Error, Result};
use crate::physics::{total_rate, CrossSectionModel, SQRT_PI};
use nalgebra::Vector3;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Open01, StandardNormal, UnitSphere};

/// Reproducible counter-based RNG stream. Streams constructed from the
/// same (master_seed, stream_index) are identical; distinct stream
/// indices select independent ChaCha streams under the same key.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha12Rng,
    master_seed: u64,
    stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut key = [0u8; 32];
        let mut state = master_seed;
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha12Rng::from_seed(key);
        rng.set_stream(stream_index);
        RngStream {
            rng,
            master_seed,
            stream_index,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Uniform draw from the open interval (0, 1).
    pub fn uniform_open01(&mut self) -> f64 {
        Open01.sample(&mut self.rng)
    }

    /// Standard normal draw.
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

/// SplitMix64 step; expands the master seed into the ChaCha key.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Exponential waiting time τ = −ln(η)/Γ for a single jump rate (units of
/// Γ₀⁻¹).
pub fn sample_waiting_time(rate: f64, rng: &mut RngStream) -> Result<f64> {
    if !(rate > 0.0) {
        return Err(Error::parameter("rate", format!("must be positive, got {rate}")));
    }
    Ok(waiting_time_from_uniform(rate, rng.uniform_open01()))
}

fn waiting_time_from_uniform(rate: f64, eta: f64) -> f64 {
    -eta.ln() / rate
}

/// Residual target for the mixture survival-probability inversion.
const MIXTURE_RESIDUAL: f64 = 1e-13;

/// Waiting time for a mixture survival function Σᵢ wᵢ e^{−Γᵢτ}; solves
/// Σᵢ wᵢ e^{−Γᵢτ} = η by safeguarded Newton iteration.
pub fn sample_waiting_time_mixture(
    weights: &[f64],
    rates: &[f64],
    rng: &mut RngStream,
) -> Result<f64> {
    let eta = rng.uniform_open01();
    mixture_time_from_uniform(weights, rates, eta)
}

fn mixture_time_from_uniform(weights: &[f64], rates: &[f64], eta: f64) -> Result<f64> {
    if weights.is_empty() || weights.len() != rates.len() {
        return Err(Error::parameter(
            "weights",
            format!("need equal nonempty lists, got {} and {}", weights.len(), rates.len()),
        ));
    }
    if weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::parameter("weights", "weights must be nonnegative".to_string()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::parameter(
            "weights",
            format!("weights must sum to 1, got {total}"),
        ));
    }
    if rates.iter().any(|&g| !(g > 0.0)) {
        return Err(Error::parameter("rates", "rates must be positive".to_string()));
    }

    let g_min = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let g_max = rates.iter().cloned().fold(0.0_f64, f64::max);
    if g_max - g_min < 1e-15 * g_max {
        return Ok(waiting_time_from_uniform(g_min, eta));
    }

    let survival = |t: f64| -> f64 {
        weights
            .iter()
            .zip(rates)
            .map(|(&w, &g)| w * (-g * t).exp())
            .sum()
    };
    // S(τ) is sandwiched between e^{−Γmax τ} and e^{−Γmin τ}.
    let mut lo = -eta.ln() / g_max;
    let mut hi = -eta.ln() / g_min;
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let s = survival(t);
        let resid = s - eta;
        if resid.abs() < MIXTURE_RESIDUAL {
            return Ok(t);
        }
        if resid > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let ds: f64 = weights
            .iter()
            .zip(rates)
            .map(|(&w, &g)| -w * g * (-g * t).exp())
            .sum();
        let newton = t - resid / ds;
        t = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::numeric(
        "waiting_time_mixture",
        format!("no convergence solving survival = {eta}"),
    ))
}

/// Normalized joint density R(K,ξ) of the momentum-transfer magnitude and
/// the cosine of its angle with U.
pub fn jump_density(k: f64, xi: f64, u: f64, model: CrossSectionModel) -> f64 {
    assert!(k >= 0.0 && (-1.0..=1.0).contains(&xi) && u >= 0.0, "jump_density domain");
    let y = k / 2.0 + u * xi;
    k * model.relative_sigma(k) * (-y * y).exp() / (2.0 * SQRT_PI * total_rate(u, model))
}

/// A sampled momentum transfer: magnitude, angle cosine, assembled vector.
#[derive(Debug, Clone, Copy)]
pub struct MomentumTransferSample {
    pub k: f64,
    pub xi: f64,
    pub k_vec: Vector3<f64>,
}

/// Safety cap on rejection proposals; the envelope acceptance rate is
/// bounded well away from zero for every workload, so this never fires.
const REJECTION_CAP: usize = 1_000_000;

/// Below this |U| the direction of K is drawn isotropically (R is exactly
/// isotropic at U = 0 and the K∥/K⊥ decomposition is 0/0).
const ISOTROPIC_U: f64 = 1e-12;

/// Draw a momentum transfer K distributed per `jump_density` for a
/// particle with scaled momentum `u_vec`, assembled into a 3-vector with
/// uniform azimuth about `u_vec`.
pub fn sample_momentum_transfer(
    u_vec: Vector3<f64>,
    model: CrossSectionModel,
    rng: &mut RngStream,
) -> Result<MomentumTransferSample> {
    let u = u_vec.norm();
    let (k, xi) = sample_k_xi(u, model.width(), rng)?;
    if u < ISOTROPIC_U {
        return Ok(MomentumTransferSample {
            k,
            xi,
            k_vec: k * random_unit_vector(rng),
        });
    }
    let u_hat = u_vec / u;
    // Perpendicular direction U×e/|U×e| from a uniform unit vector e;
    // redraw the degenerate e ∥ U case.
    let perp = loop {
        let e = random_unit_vector(rng);
        let c = u_hat.cross(&e);
        let n = c.norm();
        if n > 1e-12 {
            break c / n;
        }
    };
    let k_vec = k * xi * u_hat + k * (1.0 - xi * xi).max(0.0).sqrt() * perp;
    Ok(MomentumTransferSample { k, xi, k_vec })
}

/// Rejection sampler for (K, ξ) ∝ K σ(K)/σ · exp[−(K/2+Uξ)²].
///
/// The envelope is flat in ξ and piecewise in K:
///   K ≤ 2U:  K e^{−aK²/4}                      (exact inverse CDF)
///   K > 2U:  (s + 2U) e^{−(1+a)s²/4 − aU²},  s = K − 2U
///            = Rayleigh + half-normal mixture components.
/// Both pieces dominate the target pointwise, so the acceptance factor is
/// ≤ 1 by construction; the acceptance rate is 1 at U = 0 and decays only
/// as 1/U.
fn sample_k_xi(u: f64, a: f64, rng: &mut RngStream) -> Result<(f64, f64)> {
    let q = (1.0 + a) / 4.0;
    let damp = (-a * u * u).exp();
    let m1 = if u == 0.0 {
        0.0
    } else if a == 0.0 {
        2.0 * u * u
    } else {
        2.0 / a * (1.0 - damp)
    };
    let m2 = damp / (2.0 * q);
    let m3 = damp * u * (std::f64::consts::PI / q).sqrt();
    let total = m1 + m2 + m3;

    for _ in 0..REJECTION_CAP {
        let r = rng.uniform_open01() * total;
        let k = if r < m1 {
            let eta = rng.uniform_open01();
            if a == 0.0 {
                2.0 * u * eta.sqrt()
            } else {
                2.0 * (-(1.0 - eta * (1.0 - damp)).ln() / a).sqrt()
            }
        } else if r < m1 + m2 {
            2.0 * u + (-rng.uniform_open01().ln() / q).sqrt()
        } else {
            2.0 * u + rng.standard_normal().abs() / (2.0 * q).sqrt()
        };
        let xi = 2.0 * rng.uniform_open01() - 1.0;
        let y = k / 2.0 + u * xi;
        let log_accept = if k <= 2.0 * u {
            -y * y
        } else {
            let s = k - 2.0 * u;
            let d = k / 2.0 - u;
            -a * s * u + d * d - y * y
        };
        if rng.uniform_open01().ln() < log_accept {
            return Ok((k, xi));
        }
    }
    Err(Error::numeric(
        "sample_momentum_transfer",
        format!("rejection cap exceeded at U = {u}"),
    ))
}

/// Uniformly distributed random unit vector.
pub fn random_unit_vector(rng: &mut RngStream) -> Vector3<f64> {
    let v: [f64; 3] = UnitSphere.sample(&mut rng.rng);
    Vector3::from(v)
}

/// Thermal-equilibrium scaled momentum: components i.i.d. N(0, (m/M)/2),
/// so that ⟨U²⟩ = 3m/2M.
pub fn sample_equilibrium_momentum(mass_ratio: f64, rng: &mut RngStream) -> Vector3<f64> {
    let sd = (mass_ratio / 2.0).sqrt();
    Vector3::new(
        sd * rng.standard_normal(),
        sd * rng.standard_normal(),
        sd * rng.standard_normal(),
    )
}
