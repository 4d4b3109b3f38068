//! Run configuration: a JSON document layered over built-in defaults.
//!
//! Loading proceeds in three steps: the defaults are serialized to a JSON
//! tree, the user's file is merged into it object by object, and each
//! `--set a.b.c=value` override replaces one leaf. The merged tree is then
//! deserialized with unknown keys rejected, so typos surface as config
//! errors naming the offending path.

use std::path::{Path, PathBuf};

use mfg_pow::experiments::SweepParam;
use mfg_pow::noise::{PriceDrift, PriceProcess, RewardMap};
use mfg_pow::twopop_noise::{ExchangeRate, Lambda2Form};
use mfg_pow::{ModelParams, SolverOptions, TwoPopParams};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

/// Uniform grid on `[0, k_max]`; `k_max = null` selects the model default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub k_max: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: 4000,
            k_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoryConfig {
    /// Initial hashrates; `null` means `[0, 2K*]`.
    pub k0: Option<Vec<f64>>,
    pub horizon: f64,
    pub dt: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            k0: None,
            horizon: 250.0,
            dt: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub price: PriceProcess<f64>,
    pub n_k: usize,
    pub n_p: usize,
    pub k_max: Option<f64>,
    pub k0: f64,
    pub p0: f64,
    pub horizon: f64,
    /// Euler–Maruyama step; `null` selects `1e-3 / max(δ, |b|)`.
    pub dt: Option<f64>,
    /// Number of sample paths, seeded `seed, seed + 1, ...`.
    pub paths: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            price: PriceProcess {
                drift: PriceDrift::Affine { a: 0.0, b: -0.5 },
                nu: 0.05,
                reward: RewardMap::ExpCapped { cap: 2.0 },
                p_min: -1.5,
                p_max: 1.5,
            },
            n_k: 801,
            n_p: 21,
            k_max: None,
            k0: 0.0,
            p0: 0.0,
            horizon: 100.0,
            dt: None,
            paths: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoPopConfig {
    pub params: TwoPopParams<f64>,
    pub n: usize,
    pub k_max: Option<f64>,
    pub k0: f64,
    pub l0: f64,
    pub horizon: f64,
    pub dt: f64,
}

impl Default for TwoPopConfig {
    fn default() -> Self {
        Self {
            params: TwoPopParams::from_model(&ModelParams::baseline(), 0.3),
            n: 251,
            k_max: None,
            k0: 1.0,
            l0: 1.0,
            horizon: 250.0,
            dt: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoPopNoiseConfig {
    pub params: TwoPopParams<f64>,
    /// Only drift, diffusion and bounds are used.
    pub price: PriceProcess<f64>,
    pub exchange_rate: ExchangeRate<f64>,
    pub lambda2_form: Lambda2Form,
    pub n: usize,
    pub n_p: usize,
    pub k_max: Option<f64>,
    /// Replaces the top-level solver options for this subcommand.
    pub solver: SolverOptions<f64>,
}

impl Default for TwoPopNoiseConfig {
    fn default() -> Self {
        Self {
            params: TwoPopParams::from_model(&ModelParams::baseline(), 0.03),
            price: PriceProcess {
                drift: PriceDrift::Affine { a: 0.0, b: -0.5 },
                nu: 0.05,
                reward: RewardMap::Identity,
                p_min: -0.5,
                p_max: 0.5,
            },
            exchange_rate: ExchangeRate::ExpCapped {
                floor: 0.1,
                cap: 10.0,
            },
            lambda2_form: Lambda2Form::Multiply,
            n: 41,
            n_p: 11,
            k_max: None,
            solver: SolverOptions {
                tol: 1e-6,
                ..SolverOptions::default()
            },
        }
    }
}

/// Shared by the obstacle and penalized subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntryConfig {
    pub n: usize,
    pub k_max: f64,
    pub k0: Vec<f64>,
    pub horizon: f64,
    pub dt: f64,
}

impl Default for EntryConfig {
    fn default() -> Self {
        Self {
            n: 3001,
            k_max: 150.0,
            k0: vec![10.0, 100.0],
            horizon: 20.0,
            dt: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenalizedConfig {
    pub etas: Vec<f64>,
    pub n: usize,
    pub k_max: f64,
    pub k0: Vec<f64>,
    pub horizon: f64,
    pub dt: f64,
}

impl PenalizedConfig {
    pub fn entry(&self) -> EntryConfig {
        EntryConfig {
            n: self.n,
            k_max: self.k_max,
            k0: self.k0.clone(),
            horizon: self.horizon,
            dt: self.dt,
        }
    }
}

impl Default for PenalizedConfig {
    fn default() -> Self {
        let e = EntryConfig::default();
        Self {
            etas: vec![1e-2, 1e-4, 1e-6],
            n: e.n,
            k_max: e.k_max,
            k0: e.k0,
            horizon: e.horizon,
            dt: e.dt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HjbConfig {
    pub n: usize,
    /// Machine size used for the check in place of `model.eps`; the
    /// logarithmic planner reward needs `ε > 0`.
    pub eps: f64,
    pub k_max: Option<f64>,
}

impl Default for HjbConfig {
    fn default() -> Self {
        Self {
            n: 4000,
            eps: 1e-3,
            k_max: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeConfig {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub spacing: Spacing,
}

impl RangeConfig {
    pub fn values(&self) -> Vec<f64> {
        match self.spacing {
            Spacing::Linear => mfg_pow::experiments::lin_space(self.lo, self.hi, self.n),
            Spacing::Log => mfg_pow::experiments::log_space(self.lo, self.hi, self.n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Set by `sweep --param`.
    pub param: Option<SweepParam>,
    pub lambda: RangeConfig,
    pub delta: RangeConfig,
    /// Re-solve sample points with the master-equation solver.
    pub pde_check: bool,
    pub pde_samples: usize,
    pub pde_n: usize,
    /// Bracket for the profit-maximizing δ.
    pub argmax_bracket: [f64; 2],
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            param: None,
            lambda: RangeConfig {
                lo: 0.1,
                hi: 10.0,
                n: 41,
                spacing: Spacing::Log,
            },
            delta: RangeConfig {
                lo: 0.05,
                hi: 2.0,
                n: 40,
                spacing: Spacing::Linear,
            },
            pde_check: false,
            pde_samples: 10,
            pde_n: 2000,
            argmax_bracket: [0.05, 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestConfig {
    /// `timestamp,hashrate` CSV; also settable with `ingest --input`.
    pub path: Option<PathBuf>,
    /// Progress rate of the real series; `null` uses `model.delta`.
    pub delta: Option<f64>,
}

/// Complete configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelParams<f64>,
    pub grid: GridConfig,
    pub solver: SolverOptions<f64>,
    pub trajectory: TrajectoryConfig,
    pub noise: NoiseConfig,
    pub twopop: TwoPopConfig,
    pub twopop_noise: TwoPopNoiseConfig,
    pub obstacle: EntryConfig,
    pub penalized: PenalizedConfig,
    pub hjb: HjbConfig,
    pub sweep: SweepConfig,
    pub ingest: IngestConfig,
    pub seed: u64,
    /// Output directory; not echoed into manifests.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelParams::baseline(),
            grid: GridConfig::default(),
            solver: SolverOptions::default(),
            trajectory: TrajectoryConfig::default(),
            noise: NoiseConfig::default(),
            twopop: TwoPopConfig::default(),
            twopop_noise: TwoPopNoiseConfig::default(),
            obstacle: EntryConfig::default(),
            penalized: PenalizedConfig::default(),
            hjb: HjbConfig::default(),
            sweep: SweepConfig::default(),
            ingest: IngestConfig::default(),
            seed: 0,
            out: None,
        }
    }
}

/// Recursively overlays `top` onto `base`. Objects carrying a `kind` tag
/// (enum variants) replace the base value wholesale so that fields of a
/// different variant cannot leak through.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                let tagged = v.as_object().is_some_and(|o| o.contains_key("kind"));
                match b.get_mut(&k) {
                    Some(slot) if !tagged => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, t) => *slot = t,
    }
}

/// Applies one `a.b.c=value` override. The value is parsed as JSON when
/// possible and taken as a string otherwise.
pub fn apply_override(tree: &mut Value, assignment: &str) -> CliResult<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::config(assignment, "override must look like KEY=VALUE"))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::config(key, "empty path segment"));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for (depth, part) in parts.iter().enumerate() {
        if !node.is_object() {
            let path = parts[..depth].join(".");
            return Err(CliError::config(
                path,
                "cannot index into a non-object value",
            ));
        }
        let map = node.as_object_mut().expect("checked above");
        if depth + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!("the loop returns on the last segment")
}

/// Deserializes a merged tree, reporting the path of the first bad field.
pub fn from_tree(tree: Value) -> CliResult<RunConfig> {
    serde_path_to_error::deserialize(tree).map_err(|e| {
        let path = e.path().to_string();
        CliError::config(path, e.into_inner().to_string())
    })
}

/// Reads a config file. A run manifest is accepted too, in which case its
/// echoed `config` block is used.
pub fn read_file(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::config(path.display().to_string(), e.to_string()))?;
    if let Some(obj) = value.as_object_mut() {
        if obj.contains_key("subcommand") && obj.get("config").is_some_and(Value::is_object) {
            return Ok(obj.remove("config").expect("checked above"));
        }
    }
    Ok(value)
}

/// Defaults, then the file (if any), then the overrides.
pub fn load(path: Option<&Path>, overrides: &[String]) -> CliResult<RunConfig> {
    let mut tree = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
    if let Some(path) = path {
        merge(&mut tree, read_file(path)?);
    }
    for assignment in overrides {
        apply_override(&mut tree, assignment)?;
    }
    from_tree(tree)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = load(None, &[]).unwrap();
        assert_eq!(cfg, RunConfig::default());
        let tree = serde_json::to_value(&cfg).unwrap();
        assert_eq!(from_tree(tree).unwrap(), cfg);
    }

    #[test]
    fn dotted_override() {
        let cfg = load(None, &["model.delta=0.3".into(), "grid.n=11".into()]).unwrap();
        assert_eq!(cfg.model.delta, 0.3);
        assert_eq!(cfg.grid.n, 11);
        assert_eq!(cfg.model.r, 0.05);
    }

    #[test]
    fn bad_field_reports_path() {
        match load(None, &["model.delta=\"fast\"".into()]) {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "model.delta"),
            other => panic!("{other:?}"),
        }
        match load(None, &["model.detla=0.3".into()]) {
            Err(CliError::Config { path, message }) => {
                assert_eq!(path, "model.detla");
                assert!(message.contains("detla"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        assert!(load(None, &["novalue".into()]).is_err());
    }

    #[test]
    fn tagged_blocks_are_replaced() {
        let cfg = load(
            None,
            &[r#"noise.price.drift={"kind":"constant","a":0.1}"#.into()],
        )
        .unwrap();
        assert_eq!(cfg.noise.price.drift, PriceDrift::Constant { a: 0.1 });
    }

    #[test]
    fn manifest_is_accepted_as_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let cfg = RunConfig {
            seed: 7,
            ..Default::default()
        };
        let manifest = serde_json::json!({ "subcommand": "noise", "config": cfg });
        std::fs::write(&path, manifest.to_string()).unwrap();
        assert_eq!(load(Some(&path), &[]).unwrap().seed, 7);
    }
}
