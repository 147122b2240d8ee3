//! `microrev`: single transitions, figure sweeps, oracle validation and
//! simulated heterodyne experiments.
//!
//! Exit codes: 0 success, 1 failed check or computation, 2 usage error.

mod error;
mod experiment;
mod oracle;
mod output;
mod record;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use microrev::{BathSpec, BeamSplitterSpec, ComplexAmplitude, TransitionQuery};

use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "microrev",
    version,
    about = "Microscopic reversibility of coherent states exchanging heat with a thermal bath"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one forward/backward transition and print a JSON record.
    Ratio(RatioArgs),
    /// Log-ratio sweep against the predicted value (CSV).
    SweepFig3(SweepArgs),
    /// Modification-factor sweep over coherence and temperature (CSV).
    SweepUpsilon(SweepArgs),
    /// Run the Fock-oracle validation suites and print a JSON report.
    OracleCheck(OracleArgs),
    /// Emulate the heterodyne measurement protocol for one transition.
    Experiment(ExperimentArgs),
}

/// Flags describing a single transition.
#[derive(Args, Debug, Clone)]
struct QueryArgs {
    /// Initial coherent amplitude, "a+bi" or a bare real.
    #[arg(long, allow_hyphen_values = true)]
    alpha_i: ComplexAmplitude,
    /// Final coherent amplitude.
    #[arg(long, allow_hyphen_values = true)]
    alpha_f: ComplexAmplitude,
    /// Mean thermal occupation of the bath.
    #[arg(
        long,
        allow_negative_numbers = true,
        conflicts_with = "beta",
        required_unless_present = "beta"
    )]
    nth: Option<f64>,
    /// Dimensionless inverse temperature (energy unit: one quantum).
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// Beam-splitter transmissivity seen by the system.
    #[arg(long, allow_negative_numbers = true)]
    tau: f64,
}

impl QueryArgs {
    fn query(&self) -> Result<TransitionQuery, CliError> {
        let bath = match (self.nth, self.beta) {
            (Some(n), _) => BathSpec::from_nth(n)?,
            (None, Some(b)) => BathSpec::from_beta(b)?,
            (None, None) => return Err(CliError::Usage("one of --nth or --beta is required".into())),
        };
        if !bath.is_finite_temperature() {
            return Err(CliError::Usage(format!(
                "bath must have 0 < beta < inf, got beta = {}",
                bath.beta()
            )));
        }
        Ok(TransitionQuery::new(
            self.alpha_i,
            self.alpha_f,
            bath,
            BeamSplitterSpec::from_tau(self.tau)?,
        )?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Engine {
    Analytic,
    Fock,
    Montecarlo,
}

#[derive(Args, Debug)]
struct RatioArgs {
    #[command(flatten)]
    query: QueryArgs,
    #[arg(long, value_enum, default_value = "analytic")]
    engine: Engine,
    /// Fock cutoff per mode (fock engine).
    #[arg(long, default_value_t = 40)]
    dim: usize,
    /// Neglected Fock-tail probability allowed (fock engine).
    #[arg(long, default_value_t = microrev::fock::DEFAULT_BUDGET)]
    budget: f64,
    /// Heterodyne samples per direction (montecarlo engine).
    #[arg(long, default_value_t = 50_000)]
    samples: usize,
    /// RNG seed (montecarlo engine).
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Default)]
struct SweepArgs {
    /// JSON sweep configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated initial amplitudes.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
    amplitudes_i: Option<Vec<ComplexAmplitude>>,
    /// Comma-separated final amplitudes.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
    amplitudes_f: Option<Vec<ComplexAmplitude>>,
    /// Comma-separated bath occupations.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, num_args = 0..)]
    nth_list: Option<Vec<f64>>,
    /// Comma-separated inverse temperatures, swept alongside --nth-list.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, num_args = 0..)]
    beta_list: Option<Vec<f64>>,
    /// Comma-separated transmissivities; default maps n_th = 1.62 to 0.15
    /// and everything else to 0.30.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, num_args = 0..)]
    tau_list: Option<Vec<f64>>,
    /// How the amplitude lists combine.
    #[arg(long, value_enum)]
    pairing: Option<sweep::Pairing>,
    /// Heterodyne samples per direction for Monte Carlo rows (0 disables).
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    base_seed: Option<u64>,
    /// Output CSV path.
    #[arg(long = "output")]
    output_path: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Fock cutoff per mode.
    #[arg(long, default_value_t = 40)]
    dim: usize,
    /// Acceptance threshold for the cross-engine comparisons; also caps
    /// the structural checks when tighter than their own thresholds.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[command(flatten)]
    query: QueryArgs,
    /// Heterodyne samples per direction.
    #[arg(long, default_value_t = 50_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bootstrap resamples.
    #[arg(long, default_value_t = 1000)]
    resamples: usize,
    /// Points per bootstrap resample (capped at --samples).
    #[arg(long, default_value_t = 1000)]
    resample_size: usize,
    /// Output CSV path; the JSON summary is written next to it.
    #[arg(long, default_value = "experiment.csv")]
    output: PathBuf,
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Ratio(args) => record::cmd_ratio(&args),
        Command::SweepFig3(args) => sweep::cmd_sweep_fig3(args),
        Command::SweepUpsilon(args) => sweep::cmd_sweep_upsilon(args),
        Command::OracleCheck(args) => oracle::cmd_oracle_check(&args),
        Command::Experiment(args) => experiment::cmd_experiment(&args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("microrev: {e}");
            e.exit_code()
        }
    }
}
