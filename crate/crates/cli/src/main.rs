use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand as ClapSubcommand};
use mfg_pow::experiments::SweepParam;
use mfg_pow_cli::{run, CliError, Invocation, Subcommand};

/// Master-equation solvers for the mean-field game of Proof-of-Work mining.
///
/// Every subcommand reads an optional JSON config (defaults reproduce the
/// baseline calibration), writes CSV/JSON artifacts and a manifest.json
/// into the output directory, and exits 0 on success, 2 on a config
/// error, 3 on a solver failure and 4 on an I/O error.
#[derive(Debug, Parser)]
#[command(name = "mfg-pow", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// JSON config file (a previous run's manifest.json also works).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override one config value by dotted path, e.g. model.delta=0.3.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output directory [default: $MFG_POW_OUT, else ./mfg-pow-out].
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Cap on worker threads for sweeps and ensembles.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Seed for stochastic subcommands.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Write null instead of the wall time into manifest.json.
    #[arg(long, global = true)]
    mask_timing: bool,
}

#[derive(Debug, ClapSubcommand)]
enum Cmd {
    /// Solve the one-population master equation on a grid.
    Solve1d,
    /// Closed-form stationary state K*, U*, Π*.
    Stationary,
    /// Equilibrium hashrate paths from the solved value.
    Trajectory,
    /// Common-noise master equation, attractor curve and seeded SDE paths.
    Noise,
    /// Two competing populations: value pair, stationary state, path.
    Twopop,
    /// Two populations under a stochastic exchange rate.
    TwopopNoise,
    /// Free-entry obstacle problem and its trajectories.
    Obstacle,
    /// Penalized approximations and their convergence table.
    Penalized,
    /// Compare the planner potential's gradient with the master solution.
    HjbCheck,
    /// Comparative statics along λ or δ.
    Sweep {
        /// Swept parameter, `lambda` or `delta` (falls back to sweep.param)
        #[arg(long, value_name = "NAME", value_parser = parse_param)]
        param: Option<SweepParam>,
    },
    /// Load a timestamp,hashrate CSV and derive the real hashrate.
    Ingest {
        /// Hashrate CSV with header `timestamp,hashrate` (falls back to ingest.path)
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,
    },
}

fn parse_param(s: &str) -> Result<SweepParam, String> {
    s.parse().map_err(|e: mfg_pow::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::config("argv", e.to_string().trim_end());
            eprintln!("{}", err.record());
            return ExitCode::from(2);
        }
    };
    let (cmd, param, input) = match cli.cmd {
        Cmd::Solve1d => (Subcommand::Solve1d, None, None),
        Cmd::Stationary => (Subcommand::Stationary, None, None),
        Cmd::Trajectory => (Subcommand::Trajectory, None, None),
        Cmd::Noise => (Subcommand::Noise, None, None),
        Cmd::Twopop => (Subcommand::TwoPop, None, None),
        Cmd::TwopopNoise => (Subcommand::TwoPopNoise, None, None),
        Cmd::Obstacle => (Subcommand::Obstacle, None, None),
        Cmd::Penalized => (Subcommand::Penalized, None, None),
        Cmd::HjbCheck => (Subcommand::HjbCheck, None, None),
        Cmd::Sweep { param } => (Subcommand::Sweep, param, None),
        Cmd::Ingest { input } => (Subcommand::Ingest, None, input),
    };
    let inv = Invocation {
        cmd,
        config: cli.config,
        overrides: cli.set,
        out: cli.out,
        jobs: cli.jobs,
        seed: cli.seed,
        mask_timing: cli.mask_timing,
        param,
        input,
    };
    match run(&inv) {
        Ok(report) => {
            println!("{}", report.out_dir.join("manifest.json").display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
