use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use defectlab::defect_sim::{Model, SimConfig};
use defectlab_cli::algebra::{verify_algebra, AlgebraOptions};
use defectlab_cli::backlund::{backlund_bosonic, backlund_super};
use defectlab_cli::config::{Sector, StateConfig};
use defectlab_cli::kmatrix::{kmatrix, KKind};
use defectlab_cli::simulate::{simulate, SimulateOptions};
use defectlab_cli::{unix_now, write_outputs, CliError, Outcome};

#[derive(Parser)]
#[command(name = "defectlab", version, about = "Checks and simulations for Liouville and super-Liouville defects")]
struct Cli {
    /// Directory for the report, data files and manifest.
    #[arg(long, global = true, default_value = "defectlab-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// osp(1,2) relations and the randomized Grassmann property suite.
    VerifyAlgebra {
        #[arg(long, default_value_t = 6)]
        generators: usize,
        #[arg(long, default_value_t = 1000)]
        cases: usize,
        /// Perturb one generator entry; the run must then fail.
        #[arg(long)]
        perturb: bool,
    },
    /// Integrate type-II Bäcklund states and tabulate residual convergence.
    Backlund {
        #[arg(value_enum)]
        kind: BacklundKind,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of grid levels.
        #[arg(long)]
        refine: Option<usize>,
        /// Bosonic: the defect κ.  Super: the κ compared against κ = −1 in the SUSY check.
        #[arg(long, allow_negative_numbers = true)]
        kappa: Option<f64>,
    },
    /// Defect-matrix intertwining residuals on integrated states.
    Kmatrix {
        #[arg(value_enum)]
        kind: KArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        refine: Option<usize>,
    },
    /// Evolve across the defect and monitor the charges.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Reference scenario used when no config is given.
        #[arg(long, value_enum, default_value_t = ModelArg::BosonicType2)]
        model: ModelArg,
        /// Number of resolutions ending at the configured one.
        #[arg(long, default_value_t = 1)]
        refine: usize,
        /// Monitor the charges without their defect contributions (negative control).
        #[arg(long)]
        disable_defect_terms: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BacklundKind {
    Bosonic,
    Super,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum KArg {
    BosonicFirst,
    BosonicPrime,
    Super,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ModelArg {
    BosonicType1,
    BosonicType2,
    SuperType2,
}

fn json<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("serializable")
}

fn state_config(sector: Sector, path: &Option<PathBuf>, refine: Option<usize>) -> Result<StateConfig, CliError> {
    let mut cfg = StateConfig::load(sector, path.as_deref())?;
    if let Some(k) = refine {
        cfg.levels = k;
    }
    Ok(cfg)
}

fn dispatch(command: &Command) -> Result<(&'static str, serde_json::Value, Outcome), CliError> {
    match command {
        Command::VerifyAlgebra { generators, cases, perturb } => {
            let opts = AlgebraOptions { generators: *generators, cases: *cases, perturb: *perturb, ..AlgebraOptions::default() };
            Ok(("verify-algebra", json(&opts), verify_algebra(&opts)?))
        }
        Command::Backlund { kind, config, refine, kappa } => match kind {
            BacklundKind::Bosonic => {
                let mut cfg = state_config(Sector::Bosonic, config, *refine)?;
                if let Some(k) = kappa {
                    cfg.kappa = *k;
                }
                Ok(("backlund bosonic", json(&cfg), backlund_bosonic(&cfg)?))
            }
            BacklundKind::Super => {
                let cfg = state_config(Sector::Super, config, *refine)?;
                let compare = kappa.unwrap_or(0.0);
                let snapshot = serde_json::json!({ "state": cfg, "kappa_compare": compare });
                Ok(("backlund super", snapshot, backlund_super(&cfg, compare)?))
            }
        },
        Command::Kmatrix { kind, config, refine } => {
            let kind = match kind {
                KArg::BosonicFirst => KKind::BosonicFirst,
                KArg::BosonicPrime => KKind::BosonicPrime,
                KArg::Super => KKind::Super,
            };
            let cfg = state_config(kind.sector(), config, *refine)?;
            let name = match kind {
                KKind::BosonicFirst => "kmatrix bosonic_first",
                KKind::BosonicPrime => "kmatrix bosonic_prime",
                KKind::Super => "kmatrix super",
            };
            Ok((name, json(&cfg), kmatrix(kind, &cfg)?))
        }
        Command::Simulate { config, model, refine, disable_defect_terms } => {
            let cfg = match config {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                    SimConfig::from_toml_str(&text)?
                }
                None => SimConfig::reference(match model {
                    ModelArg::BosonicType1 => Model::BosonicType1,
                    ModelArg::BosonicType2 => Model::BosonicType2,
                    ModelArg::SuperType2 => Model::SuperType2,
                }),
            };
            let opts = SimulateOptions { refine: *refine, disable_defect_terms: *disable_defect_terms };
            Ok(("simulate", json(&cfg), simulate(&cfg, opts)?))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = unix_now();
    let (name, config, outcome) = match dispatch(&cli.command) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("defectlab: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    for c in &outcome.checks {
        let tag = c.criterion.map(|k| format!("[{k}] ")).unwrap_or_default();
        println!("{} {tag}{}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    match write_outputs(&cli.out, name, config, started, &outcome) {
        Ok(m) => {
            println!("manifest: {}", cli.out.join(defectlab_cli::MANIFEST_NAME).display());
            ExitCode::from(if m.pass { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("defectlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
