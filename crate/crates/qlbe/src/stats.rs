//! Ensemble estimators: moments with standard errors, component-summed
//! cumulants κ₂–κ₄, coherence curves, and exponential rate fits.

use crate::error::{Error, Result};
use nalgebra::{Matrix3, Vector3};

/// First and second moments of a momentum sample with standard errors.
#[derive(Debug, Clone, Copy)]
pub struct Moments {
    pub mean: Vector3<f64>,
    pub mean_se: Vector3<f64>,
    /// ⟨U⟩² = |mean|².
    pub mean_sq: f64,
    /// Delta-method SE of ⟨U⟩²: 2|mean|·SE(mean along the mean direction).
    pub mean_sq_se: f64,
    /// ⟨U²⟩ = mean of |U|².
    pub norm_sq: f64,
    pub norm_sq_se: f64,
}

/// Unbiased mean and the two squared-momentum observables of an ensemble.
/// Two-pass: central moments are accumulated about the sample mean.
pub fn moments(samples: &[Vector3<f64>]) -> Result<Moments> {
    if samples.len() < 2 {
        return Err(Error::parameter(
            "samples",
            format!("need at least 2 samples, got {}", samples.len()),
        ));
    }
    let n = samples.len() as f64;
    let mut mean = Vector3::zeros();
    let mut norm_sq = 0.0;
    for u in samples {
        mean += u;
        norm_sq += u.norm_squared();
    }
    mean /= n;
    norm_sq /= n;
    let mut cov = Matrix3::zeros();
    let mut norm_sq_var = 0.0;
    for u in samples {
        let d = u - mean;
        cov += d * d.transpose();
        norm_sq_var += (u.norm_squared() - norm_sq).powi(2);
    }
    cov /= n - 1.0;
    norm_sq_var /= n - 1.0;
    Ok(finish_moments(mean, cov, norm_sq, norm_sq_var, n))
}

fn finish_moments(
    mean: Vector3<f64>,
    cov: Matrix3<f64>,
    norm_sq: f64,
    norm_sq_var: f64,
    n: f64,
) -> Moments {
    let mean_se = Vector3::new(
        (cov[(0, 0)].max(0.0) / n).sqrt(),
        (cov[(1, 1)].max(0.0) / n).sqrt(),
        (cov[(2, 2)].max(0.0) / n).sqrt(),
    );
    let norm = mean.norm();
    let dir = if norm > 0.0 { mean / norm } else { Vector3::x() };
    let var_along = (dir.transpose() * cov * dir)[(0, 0)].max(0.0);
    Moments {
        mean,
        mean_se,
        mean_sq: mean.norm_squared(),
        mean_sq_se: 2.0 * norm * (var_along / n).sqrt(),
        norm_sq,
        norm_sq_se: (norm_sq_var.max(0.0) / n).sqrt(),
    }
}

/// Moments from raw power sums (streaming path of [`GridAccumulator`]).
fn assemble_moments(
    sum: Vector3<f64>,
    sum_outer: Matrix3<f64>,
    sum_norm_sq: f64,
    sum_norm_4: f64,
    n: f64,
) -> Moments {
    let mean = sum / n;
    let cov = (sum_outer - n * mean * mean.transpose()) / (n - 1.0);
    let norm_sq = sum_norm_sq / n;
    let norm_sq_var = (sum_norm_4 - n * norm_sq * norm_sq) / (n - 1.0);
    finish_moments(mean, cov, norm_sq, norm_sq_var, n)
}

/// Component-summed cumulants (κ₂, κ₃, κ₄) from plain central-moment
/// estimators.
pub fn cumulants(samples: &[Vector3<f64>]) -> Result<(f64, f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::parameter(
            "samples",
            format!("need at least 2 samples, got {}", samples.len()),
        ));
    }
    let n = samples.len() as f64;
    let mut mean = Vector3::zeros();
    for u in samples {
        mean += u;
    }
    mean /= n;
    let (mut k2, mut k3, mut k4) = (0.0, 0.0, 0.0);
    for i in 0..3 {
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for u in samples {
            let d = u[i] - mean[i];
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        m2 /= n;
        m3 /= n;
        m4 /= n;
        k2 += m2;
        k3 += m3;
        k4 += m4 - 3.0 * m2 * m2;
    }
    Ok((k2, k3, k4))
}

/// Ensemble coherence curve C(t) = 2·mean(|α₁α₂|) with standard errors,
/// from per-realization contribution series sharing one time grid.
pub fn coherence_curve(series: &[Vec<f64>], n_times: usize) -> Result<Vec<(f64, f64)>> {
    if series.len() < 2 {
        return Err(Error::parameter(
            "series",
            format!("need at least 2 realizations, got {}", series.len()),
        ));
    }
    if series.iter().any(|s| s.len() != n_times) {
        return Err(Error::parameter("series", "realizations use mismatched time grids".to_string()));
    }
    let n = series.len() as f64;
    let mut out = Vec::with_capacity(n_times);
    for t in 0..n_times {
        let sum: f64 = series.iter().map(|s| s[t]).sum();
        let mean = sum / n;
        let var: f64 = series.iter().map(|s| (s[t] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        out.push((2.0 * mean, 2.0 * (var / n).sqrt()));
    }
    Ok(out)
}

/// Result of an exponential least-squares fit ln(v) = intercept − rate·t.
#[derive(Debug, Clone, Copy)]
pub struct ExpFit {
    /// Decay rate (positive for decaying data).
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Points inside the fit window.
    pub n_points: usize,
}

/// Ordinary least squares of ln(values) against time, restricted to the
/// window from t = 0 until the first crossing below `fit_floor`·values[0].
pub fn fit_exponential_rate(times: &[f64], values: &[f64], fit_floor: f64) -> Result<ExpFit> {
    if times.len() != values.len() {
        return Err(Error::parameter("values", "times and values must have equal length".to_string()));
    }
    if !(fit_floor > 0.0 && fit_floor < 1.0) {
        return Err(Error::parameter(
            "fit_floor",
            format!("must lie in (0,1), got {fit_floor}"),
        ));
    }
    let first = *values.first().ok_or_else(|| {
        Error::parameter("values", "empty series".to_string())
    })?;
    let threshold = fit_floor * first;
    let window = values
        .iter()
        .position(|&v| v < threshold)
        .unwrap_or(values.len());
    if window < 3 {
        return Err(Error::parameter(
            "values",
            format!("fit window holds {window} points; need at least 3"),
        ));
    }
    if values[..window].iter().any(|&v| !(v > 0.0)) {
        return Err(Error::parameter(
            "values",
            "nonpositive values inside the fit window".to_string(),
        ));
    }

    let n = window as f64;
    let logs: Vec<f64> = values[..window].iter().map(|v| v.ln()).collect();
    let t_mean = times[..window].iter().sum::<f64>() / n;
    let l_mean = logs.iter().sum::<f64>() / n;
    let mut s_tt = 0.0;
    let mut s_tl = 0.0;
    for (t, l) in times[..window].iter().zip(&logs) {
        s_tt += (t - t_mean) * (t - t_mean);
        s_tl += (t - t_mean) * (l - l_mean);
    }
    if s_tt == 0.0 {
        return Err(Error::parameter("times", "degenerate time grid".to_string()));
    }
    let slope = s_tl / s_tt;
    let intercept = l_mean - slope * t_mean;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (t, l) in times[..window].iter().zip(&logs) {
        ss_res += (l - (intercept + slope * t)).powi(2);
        ss_tot += (l - l_mean).powi(2);
    }
    let r_squared = if ss_tot > 1e-300 {
        1.0 - ss_res / ss_tot
    } else if ss_res < 1e-300 {
        1.0
    } else {
        0.0
    };
    Ok(ExpFit {
        rate: -slope,
        intercept,
        r_squared,
        n_points: window,
    })
}

/// Per-time ensemble statistics assembled by [`GridAccumulator`].
#[derive(Debug, Clone, Copy)]
pub struct TimePointStats {
    pub moments: Moments,
    pub k2: f64,
    pub k2_se: f64,
    pub k3: f64,
    pub k3_se: f64,
    pub k4: f64,
    pub k4_se: f64,
}

/// Time grid with per-time observables and standard errors.
#[derive(Debug, Clone)]
pub struct EnsembleSeries {
    pub times: Vec<f64>,
    pub points: Vec<TimePointStats>,
    pub n_realizations: usize,
}

/// Streaming ensemble reducer over a fixed output-time grid.
///
/// Means and second moments accumulate exactly over all realizations;
/// cumulants use index-partitioned blocks, reported as the block mean with
/// SE = sd(blocks)/√B. Accumulation order is fixed by realization index,
/// so results are independent of scheduling.
#[derive(Debug, Clone)]
pub struct GridAccumulator {
    n_times: usize,
    n_blocks: usize,
    n_total: usize,
    sum: Vec<Vector3<f64>>,
    sum_outer: Vec<Matrix3<f64>>,
    sum_norm_sq: Vec<f64>,
    sum_norm_4: Vec<f64>,
    // per time × block: componentwise power sums Σu, Σu², Σu³, Σu⁴
    block_pow: Vec<[Vector3<f64>; 4]>,
    block_n: Vec<usize>,
}

impl GridAccumulator {
    pub fn new(n_times: usize, n_realizations: usize) -> Self {
        let n_blocks = suggested_blocks(n_realizations);
        GridAccumulator {
            n_times,
            n_blocks,
            n_total: n_realizations,
            sum: vec![Vector3::zeros(); n_times],
            sum_outer: vec![Matrix3::zeros(); n_times],
            sum_norm_sq: vec![0.0; n_times],
            sum_norm_4: vec![0.0; n_times],
            block_pow: vec![[Vector3::zeros(); 4]; n_times * n_blocks],
            block_n: vec![0; n_blocks],
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    /// Block index of a realization, by its ensemble index.
    pub fn block_of(&self, realization: usize) -> usize {
        realization * self.n_blocks / self.n_total
    }

    /// Fold in one realization's momentum series (one value per grid time).
    pub fn add(&mut self, realization: usize, series: &[Vector3<f64>]) {
        assert_eq!(series.len(), self.n_times);
        let block = self.block_of(realization);
        self.block_n[block] += 1;
        for (t, u) in series.iter().enumerate() {
            self.sum[t] += u;
            self.sum_outer[t] += u * u.transpose();
            let nsq = u.norm_squared();
            self.sum_norm_sq[t] += nsq;
            self.sum_norm_4[t] += nsq * nsq;
            let pow = &mut self.block_pow[t * self.n_blocks + block];
            let u2 = u.component_mul(u);
            pow[0] += u;
            pow[1] += u2;
            pow[2] += u2.component_mul(u);
            pow[3] += u2.component_mul(&u2);
        }
    }

    pub fn finalize(&self, times: &[f64]) -> Result<EnsembleSeries> {
        assert_eq!(times.len(), self.n_times);
        let counted: usize = self.block_n.iter().sum();
        if counted != self.n_total || self.n_total < 2 {
            return Err(Error::parameter(
                "realizations",
                format!("accumulated {counted} of {} realizations", self.n_total),
            ));
        }
        let n = self.n_total as f64;
        let b = self.n_blocks as f64;
        let mut points = Vec::with_capacity(self.n_times);
        for t in 0..self.n_times {
            let moments = assemble_moments(
                self.sum[t],
                self.sum_outer[t],
                self.sum_norm_sq[t],
                self.sum_norm_4[t],
                n,
            );
            let mut acc = [(0.0, 0.0); 3]; // (Σ over blocks, Σ of squares) for κ₂,κ₃,κ₄
            for block in 0..self.n_blocks {
                let nb = self.block_n[block] as f64;
                let pow = &self.block_pow[t * self.n_blocks + block];
                let (mut k2, mut k3, mut k4) = (0.0, 0.0, 0.0);
                for i in 0..3 {
                    let mu = pow[0][i] / nb;
                    let m2 = (pow[1][i] / nb - mu * mu).max(0.0);
                    let m3 = pow[2][i] / nb - 3.0 * mu * pow[1][i] / nb + 2.0 * mu.powi(3);
                    let m4 = pow[3][i] / nb - 4.0 * mu * pow[2][i] / nb
                        + 6.0 * mu * mu * pow[1][i] / nb
                        - 3.0 * mu.powi(4);
                    k2 += m2;
                    k3 += m3;
                    k4 += m4 - 3.0 * m2 * m2;
                }
                for (slot, k) in acc.iter_mut().zip([k2, k3, k4]) {
                    slot.0 += k;
                    slot.1 += k * k;
                }
            }
            let stat = |&(s, sq): &(f64, f64)| {
                let mean = s / b;
                let var = ((sq - b * mean * mean) / (b - 1.0)).max(0.0);
                (mean, (var / b).sqrt())
            };
            let (k2, k2_se) = stat(&acc[0]);
            let (k3, k3_se) = stat(&acc[1]);
            let (k4, k4_se) = stat(&acc[2]);
            points.push(TimePointStats {
                moments,
                k2,
                k2_se,
                k3,
                k3_se,
                k4,
                k4_se,
            });
        }
        Ok(EnsembleSeries {
            times: times.to_vec(),
            points,
            n_realizations: self.n_total,
        })
    }
}

fn suggested_blocks(n_realizations: usize) -> usize {
    (n_realizations / 200).clamp(2, 50)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample_equilibrium_momentum, RngStream};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn moments_degenerate_and_symmetric() {
        let u = Vector3::new(0.4, -1.0, 2.0);
        let m = moments(&vec![u; 5]).unwrap();
        assert_eq!(m.mean, u);
        assert!(m.mean_se.norm() < 1e-12);
        assert!(m.mean_sq_se < 1e-12);
        assert!(m.norm_sq_se < 1e-12);

        let pair = [Vector3::new(1.0, 0.0, 0.0), Vector3::new(-1.0, 0.0, 0.0)];
        let m = moments(&pair).unwrap();
        assert_abs_diff_eq!(m.mean_sq, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.norm_sq, 1.0, epsilon = 1e-15);
        assert!(moments(&pair[..1]).is_err());
    }

    #[test]
    fn moments_of_equilibrium_draws() {
        let mut rng = RngStream::new(13, 0);
        let samples: Vec<_> = (0..100_000)
            .map(|_| sample_equilibrium_momentum(1.0, &mut rng))
            .collect();
        let m = moments(&samples).unwrap();
        assert!((m.norm_sq - 1.5).abs() < 3.0 * m.norm_sq_se, "⟨U²⟩ = {}", m.norm_sq);
        // ⟨U⟩² is positively biased by ~3σ²/n; the 3-SE delta band absorbs it
        assert!(m.mean_sq < 3.0 * m.mean_sq_se.max(1e-4), "⟨U⟩² = {}", m.mean_sq);
    }

    #[test]
    fn cumulants_two_point_law() {
        let a = 0.7;
        let samples = [Vector3::new(a, a, a), Vector3::new(-a, -a, -a)];
        let (k2, k3, k4) = cumulants(&samples).unwrap();
        assert_relative_eq!(k2, 3.0 * a * a, max_relative = 1e-14);
        assert_abs_diff_eq!(k3, 0.0, epsilon = 1e-14);
        assert_relative_eq!(k4, -6.0 * a.powi(4), max_relative = 1e-14);

        let (k2, k3, k4) = cumulants(&vec![Vector3::new(1.0, 2.0, 3.0); 4]).unwrap();
        assert_eq!((k2, k3, k4), (0.0, 0.0, 0.0));
    }

    #[test]
    fn cumulants_vanish_for_gaussian_draws() {
        let n = 100_000;
        let mut rng = RngStream::new(14, 0);
        let samples: Vec<_> = (0..n)
            .map(|_| sample_equilibrium_momentum(1.0, &mut rng))
            .collect();
        let (k2, k3, k4) = cumulants(&samples).unwrap();
        // Gaussian asymptotics with σ² = 1/2: var(κ₃) = 3·6σ⁶/n, var(κ₄) = 3·96σ⁸/n
        let se3 = (18.0 * 0.125 / n as f64).sqrt();
        let se4 = (288.0 * 0.0625 / n as f64).sqrt();
        assert!((k2 - 1.5).abs() < 0.05, "κ₂ = {k2}");
        assert!(k3.abs() < 3.0 * se3, "κ₃ = {k3}");
        assert!(k4.abs() < 3.0 * se4, "κ₄ = {k4}");
    }

    #[test]
    fn coherence_curve_basics() {
        let series = vec![vec![0.5, 0.2], vec![0.5, 0.3]];
        let curve = coherence_curve(&series, 2).unwrap();
        assert_abs_diff_eq!(curve[0].0, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(curve[0].1, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(curve[1].0, 0.5, epsilon = 1e-15);
        assert!(curve[1].1 > 0.0);
        assert!(coherence_curve(&[vec![0.5], vec![0.5, 0.2]], 2).is_err());
    }

    #[test]
    fn fit_recovers_exact_exponential() {
        let times: Vec<f64> = (0..100).map(|i| i as f64 * 0.05).collect();
        let values: Vec<f64> = times.iter().map(|t| (-2.0 * t).exp()).collect();
        let fit = fit_exponential_rate(&times, &values, 0.01).unwrap();
        assert_relative_eq!(fit.rate, 2.0, max_relative = 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
        // window stops at the 1% crossing: e^{-2t} < 0.01 at t > 2.303
        assert_eq!(fit.n_points, 47);

        let flat = vec![0.7; 50];
        let fit = fit_exponential_rate(&times[..50], &flat, 0.01).unwrap();
        assert_abs_diff_eq!(fit.rate, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn fit_with_multiplicative_noise() {
        let mut rng = RngStream::new(15, 0);
        let gamma = 3.875;
        let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.01).collect();
        let values: Vec<f64> = times
            .iter()
            .map(|t| (-gamma * t).exp() * (1.0 + 0.01 * rng.standard_normal()))
            .collect();
        let fit = fit_exponential_rate(&times, &values, 0.01).unwrap();
        assert!((fit.rate - gamma).abs() / gamma < 0.02, "rate {}", fit.rate);
    }

    #[test]
    fn fit_window_errors() {
        let times = [0.0, 1.0, 2.0, 3.0];
        assert!(fit_exponential_rate(&times, &[1.0, 1e-9, 1e-9, 1e-9], 0.01).is_err());
        assert!(fit_exponential_rate(&times, &[1.0, 0.5, -0.2, 0.1], 0.01).is_err());
        assert!(fit_exponential_rate(&times, &[1.0, 0.5], 0.01).is_err());
        assert!(fit_exponential_rate(&times, &[1.0, 0.5, 0.4, 0.3], 1.5).is_err());
    }

    #[test]
    fn accumulator_matches_direct_estimators() {
        let n = 500;
        let n_times = 3;
        let mut rng = RngStream::new(16, 0);
        let all: Vec<Vec<Vector3<f64>>> = (0..n)
            .map(|_| {
                (0..n_times)
                    .map(|_| sample_equilibrium_momentum(0.5, &mut rng))
                    .collect()
            })
            .collect();
        let mut acc = GridAccumulator::new(n_times, n);
        for (i, series) in all.iter().enumerate() {
            acc.add(i, series);
        }
        let series = acc.finalize(&[0.0, 0.5, 1.0]).unwrap();
        for t in 0..n_times {
            let column: Vec<Vector3<f64>> = all.iter().map(|s| s[t]).collect();
            let direct = moments(&column).unwrap();
            let p = &series.points[t];
            assert_relative_eq!(p.moments.norm_sq, direct.norm_sq, max_relative = 1e-12);
            assert_relative_eq!(p.moments.mean_sq, direct.mean_sq, max_relative = 1e-10);
            assert_relative_eq!(p.moments.norm_sq_se, direct.norm_sq_se, max_relative = 1e-10);
            let (k2, k3, k4) = cumulants(&column).unwrap();
            // block means approach the full-sample estimators at O(1/n_b)
            assert_relative_eq!(p.k2, k2, max_relative = 0.05);
            assert!(p.k2 >= 0.0);
            assert!((p.k3 - k3).abs() < 5.0 * p.k3_se.max(0.01));
            assert!((p.k4 - k4).abs() < 5.0 * p.k4_se.max(0.02));
            assert!(p.moments.norm_sq >= p.moments.mean_sq);
        }
    }
}
