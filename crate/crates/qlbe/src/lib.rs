//! Three-dimensional Monte Carlo wave-function simulator for a tracer
//! particle colliding with an ideal gas, via a piecewise-deterministic
//! jump unraveling of the translation-covariant quantum linear Boltzmann
//! equation.
//!
//! All rates are in units of Γ₀ = n_gas v_mp 4πσ, all times in Γ₀⁻¹, and
//! momenta are the scaled variables U = P/(M v_mp), K = Q/(m* v_mp).

pub mod coherence;
pub mod config;
pub mod error;
pub mod physics;
pub mod quad;
pub mod runner;
pub mod sampling;
pub mod stats;
pub mod trajectory;
