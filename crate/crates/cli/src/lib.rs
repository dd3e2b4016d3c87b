//! Command-line front end for the compartmental tree-network simulator:
//! parses a strict TOML configuration, runs the selected experiment, and
//! emits CSV trajectories plus `key=value` reports.
//!
//! Exit codes: 0 when the experiment's property holds, 1 on property
//! failure or runtime error, 2 on configuration errors.

pub mod config;
pub mod experiments;
pub mod report;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use config::{ConfigFile, ExperimentKind, ExperimentSection, Model};
use experiments::Outcome;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "FIFO_SIM_OUT";

#[derive(Parser)]
#[command(
    name = "fifo-sim",
    version,
    about = "Simulate FIFO-diverging tree networks and verify cone-order monotonicity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// Override the integration step size.
    #[arg(long)]
    dt: Option<f64>,
    /// Override the simulation horizon.
    #[arg(long)]
    horizon: Option<f64>,
    /// Override the experiment seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the sample stride.
    #[arg(long)]
    record_every: Option<usize>,
    /// Output directory (default: $FIFO_SIM_OUT, then the current directory).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a configured network and export the trajectory.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the built-in ten-cell reference experiment.
    Example1 {
        #[command(flatten)]
        overrides: Overrides,
        /// Also write the generated reference configuration to this path.
        #[arg(long)]
        write_config: Option<PathBuf>,
    },
    /// Randomized order preservation over generated ordered pairs.
    PropertyTest {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Finite-difference sign check of the transformed dynamics.
    KmCheck {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Constructive counterexample to componentwise monotonicity.
    OrthantWitness {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check the cumulative-flow identity on a draining run.
    CumulativeCheck {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

/// Flag beats environment beats current directory.
pub fn resolve_out_dir(flag: Option<PathBuf>, env_value: Option<OsString>) -> PathBuf {
    flag.or_else(|| env_value.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn prepare_out_dir(overrides: &Overrides) -> Result<PathBuf, String> {
    let dir = resolve_out_dir(overrides.out_dir.clone(), std::env::var_os(OUT_DIR_ENV));
    std::fs::create_dir_all(&dir)
        .map_err(|e| format!("cannot create output directory {}: {e}", dir.display()))?;
    Ok(dir)
}

fn load_model(
    path: &Path,
    expected: ExperimentKind,
    overrides: &Overrides,
) -> Result<(Model, ExperimentSection), String> {
    let mut config = ConfigFile::load(path).map_err(|e| e.to_string())?;
    if config.experiment.kind != expected {
        return Err(format!(
            "configuration error: config declares experiment `{}`, subcommand expects `{expected}`",
            config.experiment.kind
        ));
    }
    if let Some(dt) = overrides.dt {
        config.sim.dt = dt;
    }
    if let Some(horizon) = overrides.horizon {
        config.sim.horizon = horizon;
    }
    if let Some(record_every) = overrides.record_every {
        config.sim.record_every = record_every;
    }
    if let Some(seed) = overrides.seed {
        config.experiment.seed = Some(seed);
    }
    let experiment = config.experiment.clone();
    let model = config.build_model().map_err(|e| e.to_string())?;
    Ok((model, experiment))
}

fn finish(outcome: Outcome, experiment: &str, out_dir: &Path) -> u8 {
    if outcome.pass {
        println!(
            "{experiment}: PASS - {} (reports in {})",
            outcome.headline,
            out_dir.display()
        );
        EXIT_PASS
    } else {
        eprintln!(
            "{experiment}: FAIL - {} (reports in {})",
            outcome.headline,
            out_dir.display()
        );
        EXIT_FAIL
    }
}

fn dispatch(command: Command) -> u8 {
    // configuration problems exit 2; runtime or property problems exit 1
    macro_rules! config_try {
        ($result:expr) => {
            match $result {
                Ok(value) => value,
                Err(message) => {
                    eprintln!("{message}");
                    return EXIT_CONFIG;
                }
            }
        };
    }
    macro_rules! run_try {
        ($result:expr) => {
            match $result {
                Ok(value) => value,
                Err(error) => {
                    eprintln!("error: {error}");
                    return EXIT_FAIL;
                }
            }
        };
    }

    match command {
        Command::Simulate { config, overrides } => {
            let out_dir = config_try!(prepare_out_dir(&overrides));
            let (model, experiment) =
                config_try!(load_model(&config, ExperimentKind::Simulate, &overrides));
            let outcome = run_try!(experiments::run_simulate(&model, &experiment, &out_dir));
            finish(outcome, "simulate", &out_dir)
        }
        Command::Example1 {
            overrides,
            write_config,
        } => {
            let out_dir = config_try!(prepare_out_dir(&overrides));
            if let Some(path) = &write_config {
                run_try!(experiments::write_example1_config(path));
                println!("wrote reference configuration to {}", path.display());
            }
            let sim = fifo_sim_core::sim::SimConfig::new(
                overrides.dt.unwrap_or(1e-4),
                overrides.horizon.unwrap_or(1.0),
            )
            .with_record_every(overrides.record_every.unwrap_or(10));
            let outcome = run_try!(experiments::run_example1(&sim, &out_dir));
            finish(outcome, "example1", &out_dir)
        }
        Command::PropertyTest { config, overrides } => {
            let out_dir = config_try!(prepare_out_dir(&overrides));
            let (model, experiment) = config_try!(load_model(
                &config,
                ExperimentKind::PropertyTest,
                &overrides
            ));
            let outcome = run_try!(experiments::run_property_test(
                &model,
                &experiment,
                &out_dir
            ));
            finish(outcome, "property-test", &out_dir)
        }
        Command::KmCheck { config, overrides } => {
            let out_dir = config_try!(prepare_out_dir(&overrides));
            let (model, experiment) =
                config_try!(load_model(&config, ExperimentKind::KmCheck, &overrides));
            let outcome = run_try!(experiments::run_km_check(&model, &experiment, &out_dir));
            finish(outcome, "km-check", &out_dir)
        }
        Command::OrthantWitness { config, overrides } => {
            let out_dir = config_try!(prepare_out_dir(&overrides));
            let (model, experiment) = config_try!(load_model(
                &config,
                ExperimentKind::OrthantWitness,
                &overrides
            ));
            let outcome = run_try!(experiments::run_orthant_witness(
                &model,
                &experiment,
                &out_dir
            ));
            finish(outcome, "orthant-witness", &out_dir)
        }
        Command::CumulativeCheck { config, overrides } => {
            let out_dir = config_try!(prepare_out_dir(&overrides));
            let (model, experiment) = config_try!(load_model(
                &config,
                ExperimentKind::CumulativeCheck,
                &overrides
            ));
            let outcome = run_try!(experiments::run_cumulative_check(
                &model,
                &experiment,
                &out_dir
            ));
            finish(outcome, "cumulative-check", &out_dir)
        }
    }
}

/// Parses `argv` and runs the selected experiment; returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => dispatch(cli.command),
        Err(error) => {
            let code = match error.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_PASS,
                _ => EXIT_CONFIG,
            };
            let _ = error.print();
            code
        }
    }
}
