//! Run configuration: flat `key=value` text format with `#` comments,
//! override support for CLI flags, and a lossless echo used in output
//! metadata.

use crate::error::{Error, Result};
use crate::physics::{CrossSectionModel, GasSpec};
use nalgebra::Vector3;
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Rates,
    Relax,
    Cumulants,
    Decohere,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Rates => "rates",
            Experiment::Relax => "relax",
            Experiment::Cumulants => "cumulants",
            Experiment::Decohere => "decohere",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "rates" => Ok(Experiment::Rates),
            "relax" => Ok(Experiment::Relax),
            "cumulants" => Ok(Experiment::Cumulants),
            "decohere" => Ok(Experiment::Decohere),
            other => Err(Error::Config(format!(
                "experiment: expected rates|relax|cumulants|decohere, got `{other}`"
            ))),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    /// Momentum eigenstate at a fixed U₀.
    Sharp(Vector3<f64>),
    /// U₀ drawn from the thermal distribution per realization.
    Equilibrium,
    /// Two-branch superposition of ±U₀ with |α₁|² = weight_first.
    Superposition {
        u0: Vector3<f64>,
        weight_first: f64,
    },
}

/// Fully validated run configuration. `n_workers` and `out` are execution
/// details: they do not affect results and are excluded from the echo.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub gas: GasSpec,
    /// Width parameter backing the `gamma_gaussian` column of the rates
    /// table, kept even when the run itself uses the constant model.
    pub gaussian_a: f64,
    pub n_realizations: usize,
    pub t_final: f64,
    pub n_output_times: usize,
    pub initial: InitialCondition,
    pub master_seed: u64,
    pub fit_floor: f64,
    pub u_max: f64,
    pub n_workers: usize,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Uniform output grid including t = 0 and t_final.
    pub fn output_times(&self) -> Vec<f64> {
        let n = self.n_output_times;
        let dt = self.t_final / (n - 1) as f64;
        (0..n)
            .map(|i| if i == n - 1 { self.t_final } else { i as f64 * dt })
            .collect()
    }

    /// Config echo in the flat key=value format; re-parses to an equal
    /// config (with default n_workers/out).
    pub fn echo(&self) -> String {
        let (init, u0, weight1) = match self.initial {
            InitialCondition::Sharp(u0) => ("sharp", u0, 0.5),
            InitialCondition::Equilibrium => ("equilibrium", Vector3::new(1.0, 0.0, 0.0), 0.5),
            InitialCondition::Superposition { u0, weight_first } => {
                ("superposition", u0, weight_first)
            }
        };
        let cross_section = match self.gas.cross_section {
            CrossSectionModel::Constant => "constant",
            CrossSectionModel::Gaussian { .. } => "gaussian",
        };
        format!(
            "experiment={}\n\
             mass_ratio={}\n\
             cross_section={}\n\
             a={}\n\
             phase_const={}\n\
             n_realizations={}\n\
             t_final={}\n\
             n_output_times={}\n\
             init={}\n\
             u0={},{},{}\n\
             weight1={}\n\
             master_seed={}\n\
             fit_floor={}\n\
             u_max={}\n",
            self.experiment,
            self.gas.mass_ratio,
            cross_section,
            self.gaussian_a,
            self.gas.phase_const,
            self.n_realizations,
            self.t_final,
            self.n_output_times,
            init,
            u0.x,
            u0.y,
            u0.z,
            weight1,
            self.master_seed,
            self.fit_floor,
            self.u_max,
        )
    }
}

const KNOWN_KEYS: &[&str] = &[
    "experiment",
    "mass_ratio",
    "cross_section",
    "a",
    "phase_const",
    "n_realizations",
    "t_final",
    "n_output_times",
    "init",
    "u0",
    "weight1",
    "master_seed",
    "fit_floor",
    "u_max",
    "n_workers",
    "out",
];

/// Parse a config text in the flat key=value format.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_with_overrides(text, &[])
}

/// Parse a config text, then apply `overrides` (CLI flags win over file
/// keys), then validate everything.
pub fn parse_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key=value, got `{line}`", lineno + 1))
        })?;
        let key = key.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    for (key, value) in overrides {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        map.insert(key.clone(), value.clone());
    }
    build(&map)
}

fn build(map: &BTreeMap<String, String>) -> Result<RunConfig> {
    let experiment = Experiment::parse(
        map.get("experiment")
            .ok_or_else(|| Error::Config("missing required key `experiment`".to_string()))?,
    )?;

    let mass_ratio = parse_f64(map, "mass_ratio", 1.0)?;
    let gaussian_a = parse_f64(map, "a", 1.0)?;
    let cross_section = match map.get("cross_section").map(String::as_str) {
        None | Some("constant") => CrossSectionModel::Constant,
        Some("gaussian") => CrossSectionModel::Gaussian { a: gaussian_a },
        Some(other) => {
            return Err(Error::Config(format!(
                "cross_section: expected constant|gaussian, got `{other}`"
            )))
        }
    };
    let phase_const = parse_f64(map, "phase_const", 0.0)?;
    let gas = GasSpec::new(mass_ratio, cross_section, phase_const)?;
    if !(gaussian_a > 0.0 && gaussian_a.is_finite()) {
        return Err(Error::Config(format!("a: must be positive, got {gaussian_a}")));
    }

    let n_realizations = parse_usize(map, "n_realizations", 10_000)?;
    if n_realizations < 2 {
        return Err(Error::Config(format!(
            "n_realizations: need at least 2, got {n_realizations}"
        )));
    }
    let t_final = parse_f64(
        map,
        "t_final",
        match experiment {
            Experiment::Decohere => 3.0,
            _ => 10.0,
        },
    )?;
    if !(t_final > 0.0) {
        return Err(Error::Config(format!("t_final: must be positive, got {t_final}")));
    }
    let n_output_times = parse_usize(map, "n_output_times", 101)?;
    if n_output_times < 2 {
        return Err(Error::Config(format!(
            "n_output_times: need at least 2, got {n_output_times}"
        )));
    }

    let default_u0 = match experiment {
        Experiment::Decohere => Vector3::new(0.0, 0.0, 4.0),
        _ => Vector3::new(1.0, 0.0, 0.0),
    };
    let u0 = match map.get("u0") {
        None => default_u0,
        Some(s) => parse_vector(s)?,
    };
    let weight1 = parse_f64(map, "weight1", 0.5)?;
    if !(weight1 > 0.0 && weight1 < 1.0) {
        return Err(Error::Config(format!("weight1: must lie in (0,1), got {weight1}")));
    }
    let default_init = match experiment {
        Experiment::Decohere => "superposition",
        _ => "sharp",
    };
    let initial = match map.get("init").map(String::as_str).unwrap_or(default_init) {
        "sharp" => InitialCondition::Sharp(u0),
        "equilibrium" => InitialCondition::Equilibrium,
        "superposition" => InitialCondition::Superposition {
            u0,
            weight_first: weight1,
        },
        other => {
            return Err(Error::Config(format!(
                "init: expected sharp|equilibrium|superposition, got `{other}`"
            )))
        }
    };

    let master_seed = match map.get("master_seed") {
        None => 42,
        Some(s) => s
            .parse::<u64>()
            .map_err(|_| Error::Config(format!("master_seed: expected u64, got `{s}`")))?,
    };
    let fit_floor = parse_f64(map, "fit_floor", 0.01)?;
    if !(fit_floor > 0.0 && fit_floor < 1.0) {
        return Err(Error::Config(format!("fit_floor: must lie in (0,1), got {fit_floor}")));
    }
    let u_max = parse_f64(map, "u_max", 10.0)?;
    if !(u_max > 0.0) {
        return Err(Error::Config(format!("u_max: must be positive, got {u_max}")));
    }
    let n_workers = parse_usize(map, "n_workers", 0)?;
    let out = map.get("out").map(PathBuf::from);

    Ok(RunConfig {
        experiment,
        gas,
        gaussian_a,
        n_realizations,
        t_final,
        n_output_times,
        initial,
        master_seed,
        fit_floor,
        u_max,
        n_workers,
        out,
    })
}

fn parse_f64(map: &BTreeMap<String, String>, key: &str, default: f64) -> Result<f64> {
    match map.get(key) {
        None => Ok(default),
        Some(s) => s
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("{key}: expected a number, got `{s}`"))),
    }
}

fn parse_usize(map: &BTreeMap<String, String>, key: &str, default: usize) -> Result<usize> {
    match map.get(key) {
        None => Ok(default),
        Some(s) => s
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("{key}: expected a nonnegative integer, got `{s}`"))),
    }
}

fn parse_vector(s: &str) -> Result<Vector3<f64>> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("u0: expected x,y,z got `{s}`")));
    }
    let mut v = [0.0; 3];
    for (slot, part) in v.iter_mut().zip(&parts) {
        *slot = part
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("u0: expected a number, got `{part}`")))?;
    }
    Ok(Vector3::from(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config("experiment=relax\n").unwrap();
        assert_eq!(cfg.experiment, Experiment::Relax);
        assert_eq!(cfg.gas.mass_ratio, 1.0);
        assert_eq!(cfg.gas.cross_section, CrossSectionModel::Constant);
        assert_eq!(cfg.n_realizations, 10_000);
        assert_eq!(cfg.initial, InitialCondition::Sharp(Vector3::new(1.0, 0.0, 0.0)));
        assert_eq!(cfg.master_seed, 42);
        assert_eq!(cfg.n_workers, 0);
        assert!(cfg.out.is_none());
    }

    #[test]
    fn decohere_defaults() {
        let cfg = parse_config("experiment=decohere\n").unwrap();
        assert_eq!(
            cfg.initial,
            InitialCondition::Superposition {
                u0: Vector3::new(0.0, 0.0, 4.0),
                weight_first: 0.5
            }
        );
        assert_eq!(cfg.t_final, 3.0);
    }

    #[test]
    fn comments_and_whitespace() {
        let text = "# full line comment\nexperiment = relax  # trailing\n\n  mass_ratio = 0.5\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.gas.mass_ratio, 0.5);
    }

    #[test]
    fn errors_name_the_key() {
        let err = parse_config("experiment=relax\nmass_ratio=-1\n").unwrap_err();
        assert!(err.to_string().contains("mass_ratio"), "{err}");
        let err = parse_config("experiment=relax\nbogus=1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let err = parse_config("mass_ratio=1\n").unwrap_err();
        assert!(err.to_string().contains("experiment"), "{err}");
        let err = parse_config("experiment=relax\nu0=1,2\n").unwrap_err();
        assert!(err.to_string().contains("u0"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn overrides_win() {
        let text = "experiment=relax\nmass_ratio=0.1\n";
        let overrides = vec![
            ("mass_ratio".to_string(), "2.5".to_string()),
            ("master_seed".to_string(), "7".to_string()),
        ];
        let cfg = parse_with_overrides(text, &overrides).unwrap();
        assert_eq!(cfg.gas.mass_ratio, 2.5);
        assert_eq!(cfg.master_seed, 7);
    }

    #[test]
    fn echo_round_trips() {
        let text = "experiment=decohere\nmass_ratio=0.25\ncross_section=gaussian\na=1.5\n\
                    n_realizations=500\nt_final=2.75\nn_output_times=33\nu0=0.1,0.2,4\n\
                    weight1=0.375\nmaster_seed=99\nfit_floor=0.02\nu_max=6\nphase_const=1.25\n";
        let cfg = parse_config(text).unwrap();
        let reparsed = parse_config(&cfg.echo()).unwrap();
        assert_eq!(cfg, reparsed);

        // equilibrium variant
        let cfg = parse_config("experiment=relax\ninit=equilibrium\nmass_ratio=0.3\n").unwrap();
        assert_eq!(cfg, parse_config(&cfg.echo()).unwrap());
    }

    #[test]
    fn output_grid_includes_endpoints() {
        let cfg = parse_config("experiment=relax\nt_final=5\nn_output_times=11\n").unwrap();
        let times = cfg.output_times();
        assert_eq!(times.len(), 11);
        assert_eq!(times[0], 0.0);
        assert_eq!(*times.last().unwrap(), 5.0);
        assert!((times[1] - 0.5).abs() < 1e-15);
    }
}
