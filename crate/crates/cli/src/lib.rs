//! Library side of the `mfg-pow` command-line tool: configuration
//! loading, subcommand dispatch and artifact/manifest writing.

pub mod commands;
pub mod config;
pub mod error;

use std::path::{Path, PathBuf};
use std::time::Instant;

use mfg_pow::experiments::SweepParam;
use serde_json::{json, Value};

pub use commands::{execute, Outcome, Subcommand};
pub use config::RunConfig;
pub use error::{CliError, CliResult};

/// Output directory used when neither `--out`, the config, nor
/// `MFG_POW_OUT` names one.
pub const DEFAULT_OUT: &str = "mfg-pow-out";

/// Everything the command line contributes to one run.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub cmd: Subcommand,
    pub config: Option<PathBuf>,
    pub overrides: Vec<String>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    /// Write `null` for the wall time so that manifests are byte-stable.
    pub mask_timing: bool,
    pub param: Option<SweepParam>,
    pub input: Option<PathBuf>,
}

impl Invocation {
    pub fn new(cmd: Subcommand) -> Self {
        Self {
            cmd,
            config: None,
            overrides: vec![],
            out: None,
            jobs: None,
            seed: None,
            mask_timing: false,
            param: None,
            input: None,
        }
    }
}

/// Files written by a successful run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub summary: Value,
}

/// Resolves the configuration with the flags folded in, so that the echo
/// in the manifest reproduces the run on its own.
pub fn resolve_config(inv: &Invocation) -> CliResult<RunConfig> {
    let mut cfg = config::load(inv.config.as_deref(), &inv.overrides)?;
    if let Some(seed) = inv.seed {
        cfg.seed = seed;
    }
    if let Some(param) = inv.param {
        cfg.sweep.param = Some(param);
    }
    if let Some(input) = &inv.input {
        cfg.ingest.path = Some(input.clone());
    }
    Ok(cfg)
}

/// `--out`, then the config's `out`, then `MFG_POW_OUT`, then
/// [`DEFAULT_OUT`].
pub fn resolve_out_dir(inv: &Invocation, cfg: &RunConfig) -> PathBuf {
    inv.out
        .clone()
        .or_else(|| cfg.out.clone())
        .or_else(|| std::env::var_os("MFG_POW_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Runs one subcommand end to end and writes its artifacts plus
/// `manifest.json` into the output directory.
pub fn run(inv: &Invocation) -> CliResult<RunReport> {
    let cfg = resolve_config(inv)?;
    let out_dir = resolve_out_dir(inv, &cfg);
    if inv.jobs == Some(0) {
        return Err(CliError::config("--jobs", "must be >= 1"));
    }
    let start = Instant::now();
    let outcome = match inv.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::config("--jobs", e.to_string()))?
            .install(|| execute(inv.cmd, &cfg))?,
        None => execute(inv.cmd, &cfg)?,
    };
    let elapsed = start.elapsed().as_secs_f64();

    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
    for (name, bytes) in &outcome.files {
        write(&out_dir.join(name), bytes)?;
    }
    let files: Vec<String> = outcome.files.keys().cloned().collect();
    let manifest = json!({
        "subcommand": inv.cmd.name(),
        "versions": {
            "mfg-pow": mfg_pow::VERSION,
            "mfg-pow-cli": env!("CARGO_PKG_VERSION"),
        },
        "config": cfg,
        "results": outcome.summary,
        "outputs": files,
        "wall_time_seconds": if inv.mask_timing { Value::Null } else { json!(elapsed) },
    });
    let mut buf = Vec::new();
    mfg_pow::io::write_json(&mut buf, &manifest)?;
    write(&out_dir.join("manifest.json"), &buf)?;
    Ok(RunReport {
        out_dir,
        files,
        summary: outcome.summary,
    })
}
