//! Experiment orchestration: deterministic parallel ensemble execution,
//! stats reduction on the output-time grid, and CSV emission.
//!
//! Work is partitioned by realization index with stream_index = index, and
//! the reduction folds results in index order, so output bytes do not
//! depend on the worker count.

use crate::coherence::{coherence, simulate_superposition, SuperpositionState};
use crate::config::{Experiment, InitialCondition, RunConfig};
use crate::error::{Error, Result};
use crate::physics::{decoherence_rate_analytic, relaxation_rate, total_rate, CrossSectionModel};
use crate::sampling::{sample_equilibrium_momentum, RngStream};
use crate::stats::{fit_exponential_rate, EnsembleSeries, ExpFit, GridAccumulator};
use crate::trajectory::simulate_eigenstate_trajectory;
use nalgebra::Vector3;
use rayon::prelude::*;

/// Realizations simulated per parallel batch before the sequential fold.
const BATCH: usize = 512;

/// Time-indexed result rows plus reproduction metadata and an optional fit
/// summary, serialized as CSV with `#`-prefixed metadata lines.
#[derive(Debug, Clone)]
pub struct ResultTable {
    /// Config echo plus code version, one `key=value` per line.
    pub metadata: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Trailing fit summary lines, `key=value`.
    pub fit_lines: Vec<String>,
}

/// 17 significant digits: lossless f64 round-trip.
fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

impl ResultTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for line in &self.metadata {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| fmt_float(v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        for line in &self.fit_lines {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out
    }

    /// The config-echo portion of the metadata (drops the version line).
    pub fn config_echo(&self) -> String {
        self.metadata
            .iter()
            .filter(|l| !l.starts_with("version="))
            .map(|l| format!("{l}\n"))
            .collect()
    }
}

/// Execute the configured experiment on a dedicated worker pool.
pub fn run(config: &RunConfig) -> Result<ResultTable> {
    validate_initial(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.n_workers)
        .build()
        .map_err(|e| Error::numeric("thread_pool", e.to_string()))?;
    pool.install(|| match config.experiment {
        Experiment::Rates => run_rates(config),
        Experiment::Relax | Experiment::Cumulants => run_trajectory_ensemble(config),
        Experiment::Decohere => run_decoherence(config),
    })
}

fn validate_initial(config: &RunConfig) -> Result<()> {
    let is_superposition = matches!(config.initial, InitialCondition::Superposition { .. });
    match config.experiment {
        Experiment::Decohere if !is_superposition => Err(Error::Config(
            "init: decohere requires init=superposition".to_string(),
        )),
        Experiment::Relax | Experiment::Cumulants if is_superposition => Err(Error::Config(
            "init: trajectory experiments require init=sharp or init=equilibrium".to_string(),
        )),
        _ => Ok(()),
    }
}

fn base_metadata(config: &RunConfig) -> Vec<String> {
    let mut md: Vec<String> = config.echo().lines().map(str::to_string).collect();
    md.push(format!("version={}", env!("CARGO_PKG_VERSION")));
    md
}

fn run_rates(config: &RunConfig) -> Result<ResultTable> {
    let n = config.n_output_times;
    let du = config.u_max / (n - 1) as f64;
    let gauss = CrossSectionModel::Gaussian { a: config.gaussian_a };
    let rows = (0..n)
        .map(|i| {
            let u = if i == n - 1 { config.u_max } else { i as f64 * du };
            vec![
                u,
                total_rate(u, CrossSectionModel::Constant),
                total_rate(u, gauss),
            ]
        })
        .collect();
    Ok(ResultTable {
        metadata: base_metadata(config),
        columns: vec!["U".into(), "gamma_constant".into(), "gamma_gaussian".into()],
        rows,
        fit_lines: Vec::new(),
    })
}

/// One realization of the classical process, sampled on the output grid.
fn trajectory_series(config: &RunConfig, index: usize, times: &[f64]) -> Result<Vec<Vector3<f64>>> {
    let mut rng = RngStream::new(config.master_seed, index as u64);
    let u0 = match config.initial {
        InitialCondition::Sharp(u0) => u0,
        InitialCondition::Equilibrium => {
            sample_equilibrium_momentum(config.gas.mass_ratio, &mut rng)
        }
        InitialCondition::Superposition { .. } => unreachable!("validated in run()"),
    };
    let traj = simulate_eigenstate_trajectory(u0, config.t_final, &config.gas, &mut rng)?;
    times.iter().map(|&t| traj.evaluate_at(t)).collect()
}

fn run_trajectory_ensemble(config: &RunConfig) -> Result<ResultTable> {
    let times = config.output_times();
    let n = config.n_realizations;
    let mut acc = GridAccumulator::new(times.len(), n);
    let mut start = 0;
    while start < n {
        let end = (start + BATCH).min(n);
        let batch: Result<Vec<Vec<Vector3<f64>>>> = (start..end)
            .into_par_iter()
            .map(|i| trajectory_series(config, i, &times))
            .collect();
        for (offset, series) in batch?.iter().enumerate() {
            acc.add(start + offset, series);
        }
        start = end;
    }
    let series = acc.finalize(&times)?;
    Ok(trajectory_table(config, &series))
}

fn trajectory_table(config: &RunConfig, series: &EnsembleSeries) -> ResultTable {
    let gamma_r = relaxation_rate(&config.gas);
    let u_sq_eq = config.gas.equilibrium_u_squared();
    let mean_sq_0 = series.points[0].moments.mean_sq;
    let norm_sq_0 = series.points[0].moments.norm_sq;

    let columns: Vec<String> = [
        "time",
        "mean_Ux",
        "mean_Uy",
        "mean_Uz",
        "meanU_sq",
        "mean_Usq",
        "k2",
        "k3",
        "k4",
        "mean_Ux_se",
        "mean_Uy_se",
        "mean_Uz_se",
        "meanU_sq_se",
        "mean_Usq_se",
        "k2_se",
        "k3_se",
        "k4_se",
        "approx_meanU_sq",
        "approx_mean_Usq",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();

    let rows: Vec<Vec<f64>> = series
        .times
        .iter()
        .zip(&series.points)
        .map(|(&t, p)| {
            let decay = (-gamma_r * t).exp();
            let m = &p.moments;
            vec![
                t,
                m.mean.x,
                m.mean.y,
                m.mean.z,
                m.mean_sq,
                m.norm_sq,
                p.k2,
                p.k3,
                p.k4,
                m.mean_se.x,
                m.mean_se.y,
                m.mean_se.z,
                m.mean_sq_se,
                m.norm_sq_se,
                p.k2_se,
                p.k3_se,
                p.k4_se,
                mean_sq_0 * decay,
                (norm_sq_0 - u_sq_eq) * decay + u_sq_eq,
            ]
        })
        .collect();

    let mut fit_lines = vec![format!("gamma_R_analytic={}", fmt_float(gamma_r))];
    let mean_sq: Vec<f64> = series.points.iter().map(|p| p.moments.mean_sq).collect();
    push_fit(
        &mut fit_lines,
        "momentum",
        fit_exponential_rate(&series.times, &mean_sq, config.fit_floor),
    );
    // energy relaxation: |⟨U²⟩ − ⟨U²⟩_eq|, truncated before the first
    // sign change caused by ensemble noise
    let sign = if norm_sq_0 >= u_sq_eq { 1.0 } else { -1.0 };
    let energy: Vec<f64> = series
        .points
        .iter()
        .map(|p| sign * (p.moments.norm_sq - u_sq_eq))
        .take_while(|&v| v > 0.0)
        .collect();
    push_fit(
        &mut fit_lines,
        "energy",
        fit_exponential_rate(&series.times[..energy.len()], &energy, config.fit_floor),
    );

    ResultTable {
        metadata: base_metadata(config),
        columns,
        rows,
        fit_lines,
    }
}

fn push_fit(lines: &mut Vec<String>, label: &str, fit: Result<ExpFit>) {
    match fit {
        Ok(fit) => {
            lines.push(format!("fit_gamma_{label}={}", fmt_float(fit.rate)));
            lines.push(format!("fit_r_squared_{label}={}", fmt_float(fit.r_squared)));
            lines.push(format!("fit_n_points_{label}={}", fit.n_points));
        }
        Err(err) => lines.push(format!("fit_note_{label}={err}")),
    }
}

/// One realization of the superposition process: normalized coherence
/// contribution at each output time.
fn coherence_series(
    config: &RunConfig,
    state0: &SuperpositionState,
    index: usize,
    times: &[f64],
) -> Result<Vec<f64>> {
    let mut rng = RngStream::new(config.master_seed, index as u64);
    let snaps = simulate_superposition(state0, config.t_final, times, &config.gas, &mut rng)?;
    snaps.iter().map(coherence).collect()
}

fn run_decoherence(config: &RunConfig) -> Result<ResultTable> {
    let times = config.output_times();
    let n = config.n_realizations;
    let (u0, weight_first) = match config.initial {
        InitialCondition::Superposition { u0, weight_first } => (u0, weight_first),
        _ => unreachable!("validated in run()"),
    };
    let state0 = SuperpositionState::opposite_pair(u0, weight_first)?;
    let initial_product = (weight_first * (1.0 - weight_first)).sqrt();

    let mut sum = vec![0.0; times.len()];
    let mut sum_sq = vec![0.0; times.len()];
    let mut start = 0;
    while start < n {
        let end = (start + BATCH).min(n);
        let batch: Result<Vec<Vec<f64>>> = (start..end)
            .into_par_iter()
            .map(|i| coherence_series(config, &state0, i, &times))
            .collect();
        for series in batch? {
            for (t, x) in series.into_iter().enumerate() {
                sum[t] += x;
                sum_sq[t] += x * x;
            }
        }
        start = end;
    }

    let nf = n as f64;
    let rows: Vec<Vec<f64>> = times
        .iter()
        .enumerate()
        .map(|(t, &time)| {
            let mean = sum[t] / nf;
            let var = ((sum_sq[t] - nf * mean * mean) / (nf - 1.0)).max(0.0);
            vec![
                time,
                mean / initial_product,
                (var / nf).sqrt() / initial_product,
            ]
        })
        .collect();

    let gamma_d = decoherence_rate_analytic(u0.norm(), config.gas.cross_section);
    let mut fit_lines = vec![format!("gamma_D_analytic={}", fmt_float(gamma_d))];
    let c_values: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    push_fit(
        &mut fit_lines,
        "decoherence",
        fit_exponential_rate(&times, &c_values, config.fit_floor),
    );

    Ok(ResultTable {
        metadata: base_metadata(config),
        columns: vec!["time".into(), "C".into(), "C_se".into()],
        rows,
        fit_lines,
    })
}
