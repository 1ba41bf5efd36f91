use clap::{Args, Parser, Subcommand};
use qlbe::config::parse_with_overrides;
use qlbe::error::{Error, Result};
use qlbe::runner;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

/// Monte Carlo simulator for a tracer particle in an ideal gas, built on a
/// jump unraveling of the quantum linear Boltzmann equation. Emits CSV
/// tables of rates, relaxation curves, cumulants, and coherence decay.
#[derive(Parser)]
#[command(name = "qlbe", version)]
struct Cli {
    #[command(subcommand)]
    experiment: ExperimentCmd,
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Tabulate Γ(U)/Γ₀ for the constant and Gaussian cross sections on a
    /// uniform U grid
    Rates(RunArgs),
    /// Momentum and energy relaxation of an eigenstate ensemble
    Relax(RunArgs),
    /// Cumulant dynamics (κ₂–κ₄) of an eigenstate ensemble
    Cumulants(RunArgs),
    /// Coherence decay of a balanced ±U₀ momentum superposition
    Decohere(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file, flat key=value lines with `#` comments; flags below
    /// override file keys
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for the reproducible RNG streams [default: 42]
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 = all cores [default: 0]
    #[arg(long)]
    workers: Option<usize>,
    /// Output CSV path [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Gas-to-particle mass ratio m/M [default: 1]
    #[arg(long, allow_negative_numbers = true)]
    mass_ratio: Option<f64>,
    /// Cross-section model [default: constant]
    #[arg(long, value_name = "constant|gaussian")]
    cross_section: Option<String>,
    /// Gaussian cross-section width parameter [default: 1]
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    /// Initial scaled momentum [default: 1,0,0; decohere: 0,0,4]
    #[arg(long, value_name = "x,y,z")]
    u0: Option<String>,
    /// Number of realizations [default: 10000]
    #[arg(long = "n-real")]
    n_real: Option<usize>,
    /// Final time in units of 1/Γ₀ [default: 10; decohere: 3]
    #[arg(long, allow_negative_numbers = true)]
    t_final: Option<f64>,
}

fn main() {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let (name, args) = match &cli.experiment {
        ExperimentCmd::Rates(a) => ("rates", a),
        ExperimentCmd::Relax(a) => ("relax", a),
        ExperimentCmd::Cumulants(a) => ("cumulants", a),
        ExperimentCmd::Decohere(a) => ("decohere", a),
    };

    let text = match &args.config {
        Some(path) => fs::read_to_string(path)?,
        None => String::new(),
    };

    let mut overrides = vec![("experiment".to_string(), name.to_string())];
    let mut push = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            overrides.push((key.to_string(), v));
        }
    };
    push("master_seed", args.seed.map(|v| v.to_string()));
    push("n_workers", args.workers.map(|v| v.to_string()));
    push("out", args.out.as_ref().map(|p| p.display().to_string()));
    push("mass_ratio", args.mass_ratio.map(|v| v.to_string()));
    push("cross_section", args.cross_section.clone());
    push("a", args.a.map(|v| v.to_string()));
    push("u0", args.u0.clone());
    push("n_realizations", args.n_real.map(|v| v.to_string()));
    push("t_final", args.t_final.map(|v| v.to_string()));

    let config = parse_with_overrides(&text, &overrides)?;
    let table = runner::run(&config)?;
    let csv = table.to_csv();
    match &config.out {
        Some(path) => fs::write(path, csv).map_err(Error::Io)?,
        None => std::io::stdout().write_all(csv.as_bytes()).map_err(Error::Io)?,
    }
    Ok(())
}
