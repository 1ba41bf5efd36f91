//! Shared test oracles: goodness-of-fit p-values and quadrature of the
//! jump density, independent of the implementation paths they check.

#![allow(dead_code)]

use qlbe::physics::CrossSectionModel;
use qlbe::quad::{adaptive_simpson, integrate_panels};
use qlbe::sampling::jump_density;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Survival p-value of a χ² statistic.
pub fn chi_squared_p(stat: f64, dof: usize) -> f64 {
    1.0 - ChiSquared::new(dof as f64).unwrap().cdf(stat)
}

/// Kolmogorov-Smirnov p-value via the asymptotic series with Stephens'
/// small-sample correction.
pub fn ks_p(d: f64, n: usize) -> f64 {
    let sqrt_n = (n as f64).sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS statistic for sorted samples against CDF values evaluated
/// at those samples.
pub fn ks_statistic(cdf_at_sorted: &[f64]) -> f64 {
    let n = cdf_at_sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &f) in cdf_at_sorted.iter().enumerate() {
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// Brute-force erf by composite Simpson of the Gaussian; independent of
/// the libm implementation under test.
pub fn erf_oracle(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let n = 40_000;
    let h = x / n as f64;
    let f = |t: f64| (-t * t).exp();
    let mut sum = f(0.0) + f(x);
    for i in 1..n {
        let t = i as f64 * h;
        sum += if i % 2 == 1 { 4.0 * f(t) } else { 2.0 * f(t) };
    }
    2.0 / std::f64::consts::PI.sqrt() * sum * h / 3.0
}

/// Probability mass of R(K,ξ) over a (K, ξ) rectangle, by nested
/// adaptive quadrature of the density itself.
pub fn bin_probability(
    k_lo: f64,
    k_hi: f64,
    xi_lo: f64,
    xi_hi: f64,
    u: f64,
    model: CrossSectionModel,
) -> f64 {
    adaptive_simpson(
        |k| adaptive_simpson(|xi| jump_density(k, xi, u, model), xi_lo, xi_hi, 1e-11).unwrap(),
        k_lo,
        k_hi,
        1e-10,
    )
    .unwrap()
}

/// Marginal density of K, by quadrature over ξ.
pub fn k_marginal(k: f64, u: f64, model: CrossSectionModel) -> f64 {
    adaptive_simpson(|xi| jump_density(k, xi, u, model), -1.0, 1.0, 1e-11).unwrap()
}

/// Marginal density of ξ, by quadrature over K.
pub fn xi_marginal(xi: f64, u: f64, model: CrossSectionModel) -> f64 {
    let k_max = 2.0 * u + 14.0;
    integrate_panels(|k| jump_density(k, xi, u, model), 0.0, k_max, 1e-11).unwrap()
}

/// CDF lookup table over [lo, hi] built by integrating `density` on a
/// uniform grid, for interpolated evaluation at sample points.
pub struct CdfTable {
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl CdfTable {
    pub fn build<F: Fn(f64) -> f64>(density: F, lo: f64, hi: f64, cells: usize) -> Self {
        let step = (hi - lo) / cells as f64;
        let mut values = Vec::with_capacity(cells + 1);
        values.push(0.0);
        let mut acc = 0.0;
        for i in 0..cells {
            let a = lo + i as f64 * step;
            acc += adaptive_simpson(&density, a, a + step, 1e-11).unwrap();
            values.push(acc);
        }
        // normalize away the residual tail mass
        let total = *values.last().unwrap();
        for v in &mut values {
            *v /= total;
        }
        CdfTable { lo, step, values }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let pos = (x - self.lo) / self.step;
        if pos <= 0.0 {
            return 0.0;
        }
        let idx = pos.floor() as usize;
        if idx + 1 >= self.values.len() {
            return 1.0;
        }
        let frac = pos - idx as f64;
        self.values[idx] + frac * (self.values[idx + 1] - self.values[idx])
    }
}

/// χ² goodness-of-fit of (K, ξ) samples against `jump_density` on a
/// `bins`×`bins` grid over [0, k_max]×[−1, 1]; cells with expectation
/// below 10 are pooled. Returns (statistic, degrees of freedom, p).
pub fn chi_squared_k_xi(
    samples: &[(f64, f64)],
    u: f64,
    model: CrossSectionModel,
    bins: usize,
    k_max: f64,
) -> (f64, usize, f64) {
    let n = samples.len() as f64;
    let dk = k_max / bins as f64;
    let dxi = 2.0 / bins as f64;
    let mut counts = vec![0u64; bins * bins];
    let mut overflow = 0u64;
    for &(k, xi) in samples {
        let bi = (k / dk).floor() as usize;
        let bj = ((xi + 1.0) / dxi).floor() as usize;
        if bi >= bins {
            overflow += 1;
        } else {
            counts[bi * bins + bj.min(bins - 1)] += 1;
        }
    }

    let mut stat = 0.0;
    let mut kept = 0usize;
    let mut pooled_count = overflow as f64;
    let mut pooled_expect = 0.0;
    let mut covered = 0.0;
    for bi in 0..bins {
        for bj in 0..bins {
            let p = bin_probability(
                bi as f64 * dk,
                (bi + 1) as f64 * dk,
                -1.0 + bj as f64 * dxi,
                -1.0 + (bj + 1) as f64 * dxi,
                u,
                model,
            );
            covered += p;
            let expect = p * n;
            let observed = counts[bi * bins + bj] as f64;
            if expect < 10.0 {
                pooled_expect += expect;
                pooled_count += observed;
            } else {
                stat += (observed - expect).powi(2) / expect;
                kept += 1;
            }
        }
    }
    pooled_expect += (1.0 - covered) * n;
    if pooled_expect >= 10.0 {
        stat += (pooled_count - pooled_expect).powi(2) / pooled_expect;
        kept += 1;
    }
    let dof = kept - 1;
    (stat, dof, chi_squared_p(stat, dof))
}
