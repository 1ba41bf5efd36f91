//! Structure factors, transition rates, relaxation and decoherence rates.
//!
//! Everything here is a pure function. Rates are expressed in units of the
//! reference scattering rate Γ₀ = n_gas v_mp 4πσ and momenta in the scaled
//! variables U = P/(M v_mp), K = Q/(m* v_mp), so no dimensional constants
//! appear anywhere.

use crate::error::{Error, Result};
use crate::quad::integrate_panels;
use nalgebra::Vector3;

pub const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Below this |U| the closed-form rates switch to their Taylor expansions
/// (erf(U)/U is 0/0 at U = 0).
const SMALL_U: f64 = 1e-4;

/// Scattering cross section as a function of the scaled momentum transfer,
/// relative to the constant σ that defines Γ₀.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CrossSectionModel {
    Constant,
    /// σ(K) = σ exp(−aK²/4), a > 0.
    Gaussian { a: f64 },
}

impl CrossSectionModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CrossSectionModel::Constant => Ok(()),
            CrossSectionModel::Gaussian { a } if a > 0.0 && a.is_finite() => Ok(()),
            CrossSectionModel::Gaussian { a } => Err(Error::parameter(
                "a",
                format!("Gaussian cross-section width must be positive, got {a}"),
            )),
        }
    }

    /// σ(K)/σ.
    pub fn relative_sigma(&self, k: f64) -> f64 {
        match *self {
            CrossSectionModel::Constant => 1.0,
            CrossSectionModel::Gaussian { a } => (-a * k * k / 4.0).exp(),
        }
    }

    /// Gaussian width parameter; 0 for the constant model. The rate and
    /// density formulas below are uniform in this value.
    pub(crate) fn width(&self) -> f64 {
        match *self {
            CrossSectionModel::Constant => 0.0,
            CrossSectionModel::Gaussian { a } => a,
        }
    }
}

/// Dimensionless physical configuration of the gas/test-particle system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasSpec {
    /// m/M, the gas-particle to test-particle mass ratio.
    pub mass_ratio: f64,
    pub cross_section: CrossSectionModel,
    /// κ = M v_mp²/(2ħΓ₀); scales the deterministic drift phase.
    pub phase_const: f64,
}

impl GasSpec {
    pub fn new(mass_ratio: f64, cross_section: CrossSectionModel, phase_const: f64) -> Result<Self> {
        if !(mass_ratio > 0.0 && mass_ratio.is_finite()) {
            return Err(Error::parameter(
                "mass_ratio",
                format!("must be positive, got {mass_ratio}"),
            ));
        }
        if !(phase_const >= 0.0 && phase_const.is_finite()) {
            return Err(Error::parameter(
                "phase_const",
                format!("must be nonnegative, got {phase_const}"),
            ));
        }
        cross_section.validate()?;
        Ok(GasSpec {
            mass_ratio,
            cross_section,
            phase_const,
        })
    }

    /// m*/M = (m/M)/(1 + m/M) ∈ (0, 1); the recoil factor per jump.
    pub fn reduced_mass_ratio(&self) -> f64 {
        self.mass_ratio / (1.0 + self.mass_ratio)
    }

    /// ⟨U²⟩ at thermal equilibrium, 3m/2M.
    pub fn equilibrium_u_squared(&self) -> f64 {
        1.5 * self.mass_ratio
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistics {
    Bose,
    Fermi,
}

/// Parameters of a free Bose or Fermi gas (ħ = 1 units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoseFermiParams {
    pub statistics: Statistics,
    pub fugacity: f64,
    pub inverse_temperature: f64,
    pub gas_mass: f64,
    pub gas_density: f64,
}

impl BoseFermiParams {
    pub fn new(
        statistics: Statistics,
        fugacity: f64,
        inverse_temperature: f64,
        gas_mass: f64,
        gas_density: f64,
    ) -> Result<Self> {
        let z_ok = match statistics {
            Statistics::Bose => fugacity > 0.0 && fugacity < 1.0,
            Statistics::Fermi => fugacity > 0.0,
        };
        if !z_ok || !fugacity.is_finite() {
            return Err(Error::parameter(
                "fugacity",
                format!("requires z > 0 (Bose additionally z < 1), got {fugacity}"),
            ));
        }
        for (name, v) in [
            ("inverse_temperature", inverse_temperature),
            ("gas_mass", gas_mass),
            ("gas_density", gas_density),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::parameter(name, format!("must be positive, got {v}")));
            }
        }
        Ok(BoseFermiParams {
            statistics,
            fugacity,
            inverse_temperature,
            gas_mass,
            gas_density,
        })
    }
}

/// Energy gained by the test particle in a collision with momentum
/// transfer `q`: E(Q,P) = Q²/2M + P·Q/M.
pub fn energy_transfer(q: Vector3<f64>, p: Vector3<f64>, mass: f64) -> f64 {
    assert!(mass > 0.0, "test-particle mass must be positive");
    q.norm_squared() / (2.0 * mass) + p.dot(&q) / mass
}

/// Maxwell-Boltzmann dynamic structure factor S(Q, E).
pub fn structure_factor_mb(q: f64, e: f64, beta: f64, m: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::parameter("q", format!("requires Q > 0, got {q}")));
    }
    if !(beta > 0.0) {
        return Err(Error::parameter("beta", format!("requires β > 0, got {beta}")));
    }
    if !(m > 0.0) {
        return Err(Error::parameter("m", format!("requires m > 0, got {m}")));
    }
    let arg = 2.0 * m * e + q * q;
    Ok((beta * m / (2.0 * std::f64::consts::PI)).sqrt() / q
        * (-(beta / (8.0 * m)) * arg * arg / (q * q)).exp())
}

/// Below this |βE| the Bose/Fermi factor is evaluated through its analytic
/// E → 0 limit.
const BF_SMALL_X: f64 = 1e-6;

/// Dynamic structure factor of a free Bose or Fermi gas (ħ = 1).
///
/// The exponents in the log are written as G(E) ∓ βE/2 with the even part
/// G(E) = −βmE²/2Q² − βQ²/8m shared between numerator and denominator,
/// which keeps detailed balance exact to rounding.
pub fn structure_factor_bf(q: f64, e: f64, params: &BoseFermiParams) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::parameter("q", format!("requires Q > 0, got {q}")));
    }
    let BoseFermiParams {
        statistics,
        fugacity: z,
        inverse_temperature: beta,
        gas_mass: m,
        gas_density: n_gas,
    } = *params;
    let sg = match statistics {
        Statistics::Bose => 1.0,
        Statistics::Fermi => -1.0,
    };
    let two_pi = 2.0 * std::f64::consts::PI;
    let prefactor = two_pi * m * m / (n_gas * beta * q) / two_pi.powi(3);
    let g_even = -beta * m * e * e / (2.0 * q * q) - beta * q * q / (8.0 * m);
    let w = z * g_even.exp();
    let x = beta * e;
    if x.abs() < BF_SMALL_X {
        // (∓1)/(1−e^{βE}) → ±1/(βE) combined with the first-order expansion
        // of the log: S → prefactor · w/(1 ∓ w).
        return Ok(prefactor * w / (1.0 - sg * w));
    }
    let log_num = (-sg * w * (-0.5 * x).exp()).ln_1p();
    let log_den = (-sg * w * (0.5 * x).exp()).ln_1p();
    Ok(prefactor * (-sg) / (-x.exp_m1()) * (log_num - log_den))
}

/// |S(Q,E) − e^{−βE} S(Q,−E)| / S(Q,E) for the Maxwell-Boltzmann factor.
/// S depends on Q only through its magnitude, so S(−Q,−E) = S(Q,−E).
pub fn detailed_balance_residual(q: f64, e: f64, beta: f64, m: f64) -> Result<f64> {
    let s_pos = structure_factor_mb(q, e, beta, m)?;
    let s_neg = structure_factor_mb(q, -e, beta, m)?;
    Ok((s_pos - (-beta * e).exp() * s_neg).abs() / s_pos)
}

/// Total transition rate Γ(U)/Γ₀ for a particle with scaled momentum
/// magnitude `u`.
pub fn total_rate(u: f64, model: CrossSectionModel) -> f64 {
    assert!(u >= 0.0, "scaled momentum magnitude must be nonnegative");
    let a = model.width();
    if u < SMALL_U {
        return total_rate_series(u, a);
    }
    match model {
        CrossSectionModel::Constant => {
            (1.0 + 2.0 * u * u) * libm::erf(u) / (2.0 * u) + (-u * u).exp() / SQRT_PI
        }
        CrossSectionModel::Gaussian { a } => {
            let s = (a + 1.0).sqrt();
            (libm::erf(u) - libm::erf(u / s) / s * (-a * u * u / (a + 1.0)).exp()) / (a * u)
        }
    }
}

/// Fourth-order Taylor expansion of Γ(U)/Γ₀ about U = 0, uniform in the
/// Gaussian width (a = 0 recovers the constant model).
fn total_rate_series(u: f64, a: f64) -> f64 {
    let one_a = 1.0 + a;
    let u2 = u * u;
    2.0 / SQRT_PI
        * (1.0 / one_a
            + (1.0 - a) * u2 / (3.0 * one_a * one_a)
            + (3.0 * a * a - 6.0 * a - 1.0) * u2 * u2 / (30.0 * one_a * one_a * one_a))
}

/// Default tolerance and cutoff of the rate quadrature; the integrand is
/// Gaussian-suppressed beyond K/2 ± U ≈ 6.
const QUAD_TOL: f64 = 1e-10;

/// Γ(U)/Γ₀ by adaptive quadrature of (1/4U) ∫ dK K σ(K) [erf(K/2+U) − erf(K/2−U)]
/// for an arbitrary relative cross section σ(K)/σ.
pub fn total_rate_quadrature<F: Fn(f64) -> f64>(u: f64, sigma_of_k: F) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::parameter("u", format!("requires U ≥ 0, got {u}")));
    }
    if u < 1e-8 {
        // ξ-unintegrated U → 0 limit: (1/√π) ∫ dK K σ(K) e^{−K²/4}.
        let v = integrate_panels(|k| k * sigma_of_k(k) * (-k * k / 4.0).exp(), 0.0, 12.0, QUAD_TOL)?;
        return Ok(v / SQRT_PI);
    }
    let k_max = 2.0 * u + 12.0;
    let v = integrate_panels(
        |k| k * sigma_of_k(k) * (libm::erf(k / 2.0 + u) - libm::erf(k / 2.0 - u)),
        0.0,
        k_max,
        QUAD_TOL,
    )?;
    Ok(v / (4.0 * u))
}

/// Momentum relaxation rate γ_R/Γ₀ in the m/M ≪ 1 approximation.
pub fn relaxation_rate(spec: &GasSpec) -> f64 {
    let base = 16.0 / (3.0 * SQRT_PI) * spec.mass_ratio;
    match spec.cross_section {
        CrossSectionModel::Constant => base,
        CrossSectionModel::Gaussian { a } => base / ((1.0 + a) * (1.0 + a)),
    }
}

/// Analytic momentum-space decoherence rate γ_D/Γ₀ for a balanced ±U₀
/// superposition: Γ(U₀) − Γ₀ erf(U₀)/U₀ · 1/(1+a).
pub fn decoherence_rate_analytic(u0: f64, model: CrossSectionModel) -> f64 {
    assert!(u0 >= 0.0, "initial momentum magnitude must be nonnegative");
    let a = model.width();
    if u0 < SMALL_U {
        // Leading order of the difference; both terms tend to 2/(√π(1+a)).
        return 4.0 / (3.0 * SQRT_PI) * u0 * u0 / ((1.0 + a) * (1.0 + a));
    }
    total_rate(u0, model) - libm::erf(u0) / (u0 * (1.0 + a))
}

/// (γ_D/γ_R, η_D/γ_R): decoherence-to-relaxation rate ratios for momentum-
/// and position-space superpositions.
pub fn rate_ratios(spec: &GasSpec, u0: f64) -> (f64, f64) {
    let gamma_r = relaxation_rate(spec);
    let gamma_d = decoherence_rate_analytic(u0, spec.cross_section);
    (gamma_d / gamma_r, 3.0 / (8.0 * spec.mass_ratio))
}
