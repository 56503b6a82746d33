//! Experiment harness: declarative TOML specs resolved against presets
//! and command-line overrides, per-kind runners, and deterministic result
//! files.
//!
//! A run is described by an [`ExperimentSpec`]: the experiment kind, a
//! preset supplying every physical/learner default, the mandatory master
//! seed, and per-kind tables. Resolution layers, later wins:
//!
//! 1. the preset base (`full` or `desk`) — everything except the seed;
//! 2. the spec file, if any;
//! 3. repeated `--override key=value` flags (dotted paths into the
//!    spec, e.g. `system.num_ports=2`);
//! 4. the `--seed` / `--out` flags.
//!
//! The seed never has a default: a spec that ends up without one is
//! rejected, so every result is traceable to an explicit seed. Unknown
//! keys anywhere in the resolved spec are hard errors naming the key.
//!
//! Every runner writes into the output directory: `config_echo.toml`
//! (the fully resolved spec) first, then its CSV/SVG results, then
//! `manifest.toml` (seed, kind, wall time, format versions, file list).
//! Wall time is confined to the manifest so repeated runs of the same
//! spec and seed produce byte-identical result files.

pub mod outputs;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{
    evaluate_policy, load_checkpoint, random_search, restore_policy, run_training,
    save_checkpoint, AgentConfig, AgentError, PlacementMode,
};
use crate::channel::{draw_channel_set, sample_geometry};
use crate::config::SystemConfig;
use crate::env::{decode_action, RawAction};
use crate::flsim::{
    aligned_link, load_csv, run_fl, ChannelPolicy, FlConfig, FlError,
};
use crate::metrics::{airfl_mse, monte_carlo};
use crate::seeds;

pub use outputs::{
    write_csv, write_line_chart, write_manifest, Series, FORMAT_VERSIONS,
};

// ---------------------------------------------------------------------------
// Spec types

/// The five experiment kinds the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    /// Train the recurrent policy-gradient agent and checkpoint it.
    Train,
    /// Roll out a checkpointed actor without exploration noise.
    Eval,
    /// Sweep one system parameter across values/ports/placement modes.
    Sweep,
    /// Verify the closed-form MSE and received power against Monte Carlo.
    MseVerify,
    /// Run the federated-learning loop over an ideal or analog uplink.
    Fl,
}

impl Kind {
    /// The kebab-case name used in spec files and the CLI.
    pub fn name(self) -> &'static str {
        match self {
            Kind::Train => "train",
            Kind::Eval => "eval",
            Kind::Sweep => "sweep",
            Kind::MseVerify => "mse-verify",
            Kind::Fl => "fl",
        }
    }
}

/// Named base configurations a spec starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Full-scale urban system and reference learner (hours of training).
    Full,
    /// Normalized desk-scale system and scaled-down learner (minutes).
    Desk,
}

impl Preset {
    /// The system and learner configuration this preset stands for.
    pub fn base(self) -> (SystemConfig, AgentConfig) {
        match self {
            Preset::Full => (SystemConfig::default(), AgentConfig::default()),
            Preset::Desk => (SystemConfig::desk(), AgentConfig::desk()),
        }
    }
}

/// Parameters of an `eval` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSpec {
    /// Checkpoint file to roll out (required for `eval` runs). The
    /// environment and architecture come from the checkpoint itself.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    /// Number of noise-free evaluation episodes.
    pub episodes: usize,
}

impl Default for EvalSpec {
    fn default() -> Self {
        EvalSpec { checkpoint: None, episodes: 100 }
    }
}

/// Port-placement mode of a sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// Positions searched together with the other controls.
    Fluid,
    /// Positions frozen at the uniform grid (fixed-antenna baseline).
    FixedGrid,
}

impl SweepMode {
    /// The kebab-case name used in result files.
    pub fn name(self) -> &'static str {
        match self {
            SweepMode::Fluid => "fluid",
            SweepMode::FixedGrid => "fixed-grid",
        }
    }

    fn placement(self) -> PlacementMode {
        match self {
            SweepMode::Fluid => PlacementMode::Fluid,
            SweepMode::FixedGrid => PlacementMode::FixedGrid,
        }
    }
}

/// Parameters of a `sweep` run: random-search performance across a grid
/// of system variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    /// System field to vary (a field name of the `[system]` table,
    /// e.g. `sic_residual` or `csi_error_var`).
    pub parameter: String,
    /// Values the parameter takes, in output order.
    pub values: Vec<f64>,
    /// Port counts to cross with the values; empty means the system's
    /// own `num_ports`.
    pub ports: Vec<usize>,
    /// Placement modes to cross with the values.
    pub modes: Vec<SweepMode>,
    /// Random-search candidates per scene.
    pub budget: usize,
    /// Independent scenes averaged per point.
    pub seeds: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            parameter: "sic_residual".to_string(),
            values: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            ports: Vec::new(),
            modes: vec![SweepMode::Fluid],
            budget: 2000,
            seeds: 50,
        }
    }
}

/// Parameters of an `mse-verify` run: the closed-form-versus-Monte-Carlo
/// verification gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MseVerifySpec {
    /// Randomized configurations to check.
    pub configs: usize,
    /// Monte-Carlo samples per configuration.
    pub samples: usize,
    /// Maximum allowed relative error for both the MSE and the received
    /// power (dimensionless).
    pub tolerance: f64,
}

impl Default for MseVerifySpec {
    fn default() -> Self {
        MseVerifySpec { configs: 20, samples: 100_000, tolerance: 0.02 }
    }
}

/// How FL gradients reach the server in an `fl` run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    /// Noise-free aggregation (the exact mean).
    Ideal,
    /// Analog over-the-air aggregation through the configured uplink.
    Airfl,
}

/// Where the analog uplink's decision comes from in an `fl` run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkSource {
    /// Hand-aligned unit-gain link (frozen; `redraw` does not apply).
    Aligned,
    /// Best decision from a random search on one reference scene.
    Search,
    /// Actor loaded from `checkpoint`, mapping each round's geometry to
    /// a decision (always redraws; the environment comes from the
    /// checkpoint).
    Checkpoint,
}

/// Parameters of an `fl` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlRunSpec {
    /// Labeled corpus (CSV with a trailing `label` column).
    pub dataset: PathBuf,
    /// Aggregation transport.
    pub coupling: Coupling,
    /// Decision source for the analog transport.
    pub link: LinkSource,
    /// Random-search budget when `link = "search"`.
    pub budget: usize,
    /// Redraw geometry and fading each round (block fading) instead of
    /// freezing one realization. Applies to the searched link only.
    pub redraw: bool,
    /// Actor checkpoint when `link = "checkpoint"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

impl Default for FlRunSpec {
    fn default() -> Self {
        FlRunSpec {
            dataset: PathBuf::from("data/digits.csv"),
            coupling: Coupling::Ideal,
            link: LinkSource::Search,
            budget: 2000,
            redraw: true,
            checkpoint: None,
        }
    }
}

/// One fully resolved experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// What to run.
    pub kind: Kind,
    /// The preset the defaults came from (informational after resolution).
    pub preset: Preset,
    /// Master seed; every random stream in the run derives from it.
    pub seed: u64,
    /// Output directory; required to run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Physical and protocol constants.
    pub system: SystemConfig,
    /// Learner hyperparameters.
    pub agent: AgentConfig,
    /// Federated-learning parameters.
    pub fl: FlConfig,
    /// `eval`-specific parameters.
    pub eval: EvalSpec,
    /// `sweep`-specific parameters.
    pub sweep: SweepSpec,
    /// `mse-verify`-specific parameters.
    #[serde(rename = "mse-verify")]
    pub mse_verify: MseVerifySpec,
    /// `fl`-specific parameters.
    #[serde(rename = "fl-run")]
    pub fl_run: FlRunSpec,
}

/// Harness failures. [`HarnessError::Validation`] and
/// [`HarnessError::Parse`] are user errors (CLI exit code 1); the rest
/// are runtime failures.
#[derive(Debug, Error)]
pub enum HarnessError {
    /// The resolved spec is inconsistent or incomplete.
    #[error("invalid experiment spec: {0}")]
    Validation(String),
    /// A spec file or override could not be parsed.
    #[error("spec parse error: {0}")]
    Parse(String),
    /// File-system failure while reading specs or writing results.
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// Learner failure (training, checkpoint, numeric).
    #[error(transparent)]
    Agent(#[from] AgentError),
    /// Federated-simulation failure.
    #[error(transparent)]
    Fl(#[from] FlError),
}

// ---------------------------------------------------------------------------
// Spec resolution

/// Inserts `new` at a dotted `path` inside a TOML value, creating
/// intermediate tables as needed. Errors when the path crosses a
/// non-table value.
fn set_path(root: &mut toml::Value, path: &str, new: toml::Value) -> Result<(), HarnessError> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(HarnessError::Validation(format!(
            "override path `{path}` has an empty segment"
        )));
    }
    let (last, parents) = parts.split_last().expect("non-empty by construction");
    let mut cursor = root;
    for (i, part) in parents.iter().enumerate() {
        let table = cursor.as_table_mut().ok_or_else(|| {
            HarnessError::Validation(format!(
                "override path `{path}`: `{}` is not a table",
                parts[..i].join(".")
            ))
        })?;
        cursor = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::map::Map::new()));
    }
    let table = cursor.as_table_mut().ok_or_else(|| {
        HarnessError::Validation(format!(
            "override path `{path}`: `{}` is not a table",
            parents.join(".")
        ))
    })?;
    table.insert((*last).to_string(), new);
    Ok(())
}

/// Applies one `key=value` override. The value is parsed as a TOML
/// literal (so `3`, `0.5`, `true`, `[1, 2]` and `"text"` all work); text
/// that is not valid TOML is taken as a bare string.
fn apply_override(root: &mut toml::Value, entry: &str) -> Result<(), HarnessError> {
    let (path, raw) = entry.split_once('=').ok_or_else(|| {
        HarnessError::Validation(format!("override `{entry}` is not of the form key=value"))
    })?;
    let (path, raw) = (path.trim(), raw.trim());
    if path.is_empty() {
        return Err(HarnessError::Validation(format!(
            "override `{entry}` has an empty key"
        )));
    }
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut table) => table.remove("v").expect("just inserted"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    set_path(root, path, value)
}

/// Recursively overlays `over` onto `base`; tables merge key-wise,
/// anything else is replaced wholesale.
fn deep_merge(base: toml::Value, over: toml::Value) -> toml::Value {
    match (base, over) {
        (toml::Value::Table(mut b), toml::Value::Table(o)) => {
            for (key, value) in o {
                let merged = match b.remove(&key) {
                    Some(existing) => deep_merge(existing, value),
                    None => value,
                };
                b.insert(key, merged);
            }
            toml::Value::Table(b)
        }
        (_, over) => over,
    }
}

/// Reads an optional enum-like key (`kind`, `preset`) from a raw value.
fn read_key<T: for<'de> Deserialize<'de>>(
    value: &toml::Value,
    key: &str,
) -> Result<Option<T>, HarnessError> {
    value
        .get(key)
        .map(|v| {
            v.clone()
                .try_into::<T>()
                .map_err(|e| HarnessError::Parse(format!("`{key}`: {e}")))
        })
        .transpose()
}

/// The preset base as a raw TOML value: every table fully populated, the
/// seed deliberately absent.
fn preset_base(kind: Kind, preset: Preset) -> toml::Value {
    fn to_value<T: Serialize>(what: &T) -> toml::Value {
        toml::Value::try_from(what).expect("defaults serialize")
    }
    let (system, agent) = preset.base();
    let mut base = toml::map::Map::new();
    base.insert("kind".into(), toml::Value::String(kind.name().into()));
    base.insert(
        "preset".into(),
        toml::Value::String(match preset {
            Preset::Full => "full".into(),
            Preset::Desk => "desk".into(),
        }),
    );
    base.insert("system".into(), to_value(&system));
    base.insert("agent".into(), to_value(&agent));
    base.insert("fl".into(), to_value(&FlConfig::default()));
    base.insert("eval".into(), to_value(&EvalSpec::default()));
    base.insert("sweep".into(), to_value(&SweepSpec::default()));
    base.insert("mse-verify".into(), to_value(&MseVerifySpec::default()));
    base.insert("fl-run".into(), to_value(&FlRunSpec::default()));
    toml::Value::Table(base)
}

/// Resolves a spec from a file plus command-line layers and validates it.
///
/// `kind` is the CLI subcommand (if any); when the file also names a
/// kind the two must agree. The seed must arrive through the file or the
/// `--seed` flag — there is no default seed.
pub fn resolve_spec(
    kind: Option<Kind>,
    spec_path: Option<&Path>,
    overrides: &[String],
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<ExperimentSpec, HarnessError> {
    let mut raw = match spec_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let table = text.parse::<toml::Table>().map_err(|e| {
                HarnessError::Parse(format!("{}: {e}", path.display()))
            })?;
            toml::Value::Table(table)
        }
        None => toml::Value::Table(toml::map::Map::new()),
    };

    for entry in overrides {
        apply_override(&mut raw, entry)?;
    }
    if let Some(seed) = seed {
        let seed = i64::try_from(seed).map_err(|_| {
            HarnessError::Validation(format!(
                "seed {seed} exceeds the TOML integer range"
            ))
        })?;
        set_path(&mut raw, "seed", toml::Value::Integer(seed))?;
    }
    if let Some(out) = out {
        set_path(
            &mut raw,
            "out",
            toml::Value::String(out.to_string_lossy().into_owned()),
        )?;
    }

    let file_kind: Option<Kind> = read_key(&raw, "kind")?;
    let kind = match (kind, file_kind) {
        (Some(cli), Some(file)) if cli != file => {
            return Err(HarnessError::Validation(format!(
                "kind mismatch: command says `{}`, spec says `{}`",
                cli.name(),
                file.name()
            )));
        }
        (Some(cli), _) => cli,
        (None, Some(file)) => file,
        (None, None) => {
            return Err(HarnessError::Validation(
                "no experiment kind: pass a subcommand or set `kind`".to_string(),
            ));
        }
    };
    let preset: Preset = read_key(&raw, "preset")?.unwrap_or(Preset::Full);

    let merged = deep_merge(preset_base(kind, preset), raw);
    let spec: ExperimentSpec = merged
        .try_into()
        .map_err(|e| HarnessError::Validation(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

impl ExperimentSpec {
    /// Checks the resolved spec: embedded configurations first, then the
    /// requirements of the selected kind.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let invalid = |msg: String| Err(HarnessError::Validation(msg));
        self.system
            .validate()
            .map_err(|e| HarnessError::Validation(e.to_string()))?;
        self.agent
            .validate()
            .map_err(|e| HarnessError::Validation(e.to_string()))?;
        self.fl
            .validate()
            .map_err(|e| HarnessError::Validation(e.to_string()))?;
        if self.out.is_none() {
            return invalid(
                "no output directory: pass --out or set `out`".to_string(),
            );
        }
        match self.kind {
            Kind::Train => {}
            Kind::Eval => {
                if self.eval.checkpoint.is_none() {
                    return invalid("eval needs `eval.checkpoint`".to_string());
                }
                if self.eval.episodes == 0 {
                    return invalid("eval.episodes must be at least 1".to_string());
                }
            }
            Kind::Sweep => {
                let s = &self.sweep;
                if s.values.is_empty() || s.modes.is_empty() {
                    return invalid(
                        "sweep.values and sweep.modes must be non-empty".to_string(),
                    );
                }
                if s.budget == 0 || s.seeds == 0 {
                    return invalid(
                        "sweep.budget and sweep.seeds must be at least 1".to_string(),
                    );
                }
                // Surface a bad parameter name before any work happens.
                let ports = s.ports.first().copied().unwrap_or(self.system.num_ports);
                sweep_point(&self.system, &s.parameter, s.values[0], ports)?;
            }
            Kind::MseVerify => {
                let m = &self.mse_verify;
                if m.configs == 0 {
                    return invalid("mse-verify.configs must be at least 1".to_string());
                }
                if m.samples < 10_000 {
                    return invalid(format!(
                        "mse-verify.samples {} too small to resolve percent-level \
                         tolerances; use at least 10000",
                        m.samples
                    ));
                }
                if m.tolerance.is_nan() || m.tolerance < 0.0 {
                    return invalid(format!(
                        "mse-verify.tolerance {} must be non-negative",
                        m.tolerance
                    ));
                }
            }
            Kind::Fl => {
                let f = &self.fl_run;
                if f.coupling == Coupling::Airfl
                    && f.link != LinkSource::Checkpoint
                    && self.system.num_airfl != self.fl.clients
                {
                    return invalid(format!(
                        "analog aggregation needs fl.clients == system.num_airfl \
                         ({} vs {})",
                        self.fl.clients, self.system.num_airfl
                    ));
                }
                if f.link == LinkSource::Checkpoint && f.checkpoint.is_none() {
                    return invalid(
                        "fl-run.link = \"checkpoint\" needs `fl-run.checkpoint`"
                            .to_string(),
                    );
                }
                if f.budget == 0 {
                    return invalid("fl-run.budget must be at least 1".to_string());
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Running

/// What a finished run produced.
#[derive(Debug)]
pub struct RunReport {
    /// The directory the files were written to.
    pub out_dir: PathBuf,
    /// File names inside `out_dir`, in write order (manifest excluded).
    pub outputs: Vec<String>,
    /// False only when a verification gate failed (CLI exit code 2).
    pub gate_passed: bool,
    /// One-line human summary.
    pub summary: String,
}

/// Runs a validated spec: creates the output directory, echoes the
/// resolved spec, dispatches on the kind, and writes the manifest.
pub fn run(spec: &ExperimentSpec) -> Result<RunReport, HarnessError> {
    spec.validate()?;
    let out_dir = spec.out.clone().expect("validate checks out");
    std::fs::create_dir_all(&out_dir)?;

    let echo = toml::to_string_pretty(spec)
        .map_err(|e| HarnessError::Parse(format!("spec echo: {e}")))?;
    std::fs::write(out_dir.join("config_echo.toml"), echo)?;

    let started = Instant::now();
    let (files, gate_passed, summary) = match spec.kind {
        Kind::Train => run_train(spec, &out_dir)?,
        Kind::Eval => run_eval(spec, &out_dir)?,
        Kind::Sweep => run_sweep(spec, &out_dir)?,
        Kind::MseVerify => run_mse_verify(spec, &out_dir)?,
        Kind::Fl => run_fl_experiment(spec, &out_dir)?,
    };

    let mut outputs = vec!["config_echo.toml".to_string()];
    outputs.extend(files);
    write_manifest(
        &out_dir,
        spec.kind.name(),
        spec.seed,
        started.elapsed().as_secs_f64(),
        gate_passed,
        &outputs,
    )?;
    Ok(RunReport { out_dir, outputs, gate_passed, summary })
}

type RunnerOutput = (Vec<String>, bool, String);

/// `train`: full training loop, reward curves, checkpoint.
fn run_train(spec: &ExperimentSpec, dir: &Path) -> Result<RunnerOutput, HarnessError> {
    let run = run_training(&spec.system, &spec.agent, spec.seed)?;

    let rows: Vec<String> = run
        .episode_rewards
        .iter()
        .zip(&run.moving_average)
        .enumerate()
        .map(|(i, (reward, avg))| format!("{},{reward},{avg}", i + 1))
        .collect();
    write_csv(
        &dir.join("train_curve.csv"),
        "episode,mean_reward,moving_avg_100",
        &rows,
    )?;

    let as_points = |ys: &[f64]| -> Vec<(f64, f64)> {
        ys.iter().enumerate().map(|(i, &y)| ((i + 1) as f64, y)).collect()
    };
    write_line_chart(
        &dir.join("train_curve.svg"),
        "Training reward",
        "episode",
        "mean reward per step",
        &[
            Series { label: "episode mean".into(), points: as_points(&run.episode_rewards) },
            Series { label: "moving avg (100)".into(), points: as_points(&run.moving_average) },
        ],
    )?;

    save_checkpoint(&dir.join("checkpoint.bin"), &spec.system, &spec.agent, &run.policy)?;

    let final_avg = run.moving_average.last().copied().unwrap_or(0.0);
    Ok((
        vec!["train_curve.csv".into(), "train_curve.svg".into(), "checkpoint.bin".into()],
        true,
        format!(
            "trained {} episodes; final 100-episode moving average {final_avg:.6}",
            run.episode_rewards.len()
        ),
    ))
}

/// `eval`: noise-free rollouts of a checkpointed actor. The environment
/// and learner settings come from the checkpoint, not from the spec, so
/// the policy always faces the system it was trained for.
fn run_eval(spec: &ExperimentSpec, dir: &Path) -> Result<RunnerOutput, HarnessError> {
    let path = spec.eval.checkpoint.as_ref().expect("validate checks eval");
    let (config, policy) = restore_policy(&load_checkpoint(path)?)?;

    let rewards = evaluate_policy(
        &policy.actor,
        &config.system,
        spec.eval.episodes,
        config.agent.episode_length,
        config.agent.trajectory_len,
        spec.seed,
    );
    let rows: Vec<String> = rewards
        .iter()
        .enumerate()
        .map(|(i, reward)| format!("{},{reward}", i + 1))
        .collect();
    write_csv(&dir.join("eval.csv"), "episode,reward", &rows)?;

    let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
    Ok((
        vec!["eval.csv".into()],
        true,
        format!("evaluated {} episodes; mean reward {mean:.6}", rewards.len()),
    ))
}

/// `base` with the named numeric field replaced, not yet validated. The
/// value is written as a TOML float and, if the field is integral,
/// retried as an integer.
fn replace_field(
    base: &SystemConfig,
    field: &str,
    value: f64,
) -> Result<SystemConfig, HarnessError> {
    let raw = toml::Value::try_from(base)
        .map_err(|e| HarnessError::Parse(format!("system table: {e}")))?;

    let with = |v: toml::Value| -> Result<Result<SystemConfig, toml::de::Error>, HarnessError> {
        let mut t = raw.clone();
        set_path(&mut t, field, v)?;
        Ok(t.try_into::<SystemConfig>())
    };
    match with(toml::Value::Float(value))? {
        Ok(cfg) => Ok(cfg),
        Err(as_float) if value.fract() == 0.0 && value.abs() < 2f64.powi(53) => {
            with(toml::Value::Integer(value as i64))?
                .map_err(|_| HarnessError::Validation(format!("field `{field}`: {as_float}")))
        }
        Err(e) => Err(HarnessError::Validation(format!("field `{field}`: {e}"))),
    }
}

/// Returns `base` with the named numeric field set to `value`, validated.
/// Integral fields accept integral floats (`num_noma = 3.0`); array
/// fields are out of scope (replace whole configs over TOML instead).
pub fn with_system_field(
    base: &SystemConfig,
    field: &str,
    value: f64,
) -> Result<SystemConfig, HarnessError> {
    let cfg = replace_field(base, field, value)?;
    cfg.validate()
        .map_err(|e| HarnessError::Validation(format!("{field} = {value}: {e}")))?;
    Ok(cfg)
}

/// One sweep-point system: the base with `parameter` set to `value` and
/// the port count replaced; validated only after both edits so a value
/// infeasible under the base port count but feasible under the swept one
/// still passes.
fn sweep_point(
    base: &SystemConfig,
    parameter: &str,
    value: f64,
    ports: usize,
) -> Result<SystemConfig, HarnessError> {
    let mut cfg = replace_field(base, parameter, value)?;
    cfg.num_ports = ports;
    cfg.validate().map_err(|e| {
        HarnessError::Validation(format!(
            "sweep point ({parameter} = {value}, ports = {ports}): {e}"
        ))
    })?;
    Ok(cfg)
}

/// `sweep`: random-search performance over the value × ports × modes
/// grid, averaged across `seeds` independent scenes per point. Points run
/// in parallel on derived streams; row order is value-major and fully
/// deterministic.
fn run_sweep(spec: &ExperimentSpec, dir: &Path) -> Result<RunnerOutput, HarnessError> {
    let sweep = &spec.sweep;
    let ports = if sweep.ports.is_empty() {
        vec![spec.system.num_ports]
    } else {
        sweep.ports.clone()
    };

    struct Point {
        value: f64,
        ports: usize,
        mode: SweepMode,
        cfg: SystemConfig,
    }
    let mut points = Vec::new();
    for &value in &sweep.values {
        for &l in &ports {
            for &mode in &sweep.modes {
                let cfg = sweep_point(&spec.system, &sweep.parameter, value, l)?;
                points.push(Point { value, ports: l, mode, cfg });
            }
        }
    }

    let seeds_per_point = sweep.seeds;
    let tasks: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|pi| (0..seeds_per_point).map(move |si| (pi, si)))
        .collect();
    let results: Vec<(f64, f64)> = tasks
        .par_iter()
        .map(|&(pi, si)| {
            let point = &points[pi];
            let seed = seeds::derive_indexed(spec.seed, &format!("sweep-p{pi}"), si);
            let best = random_search(&point.cfg, sweep.budget, seed, point.mode.placement());
            let hybrid = best.metrics.as_ref().map_or(0.0, |m| m.hybrid_rate);
            (hybrid, best.reward)
        })
        .collect();

    let means: Vec<(f64, f64)> = results
        .chunks_exact(seeds_per_point as usize)
        .map(|chunk| {
            let n = chunk.len() as f64;
            let (h, r) = chunk
                .iter()
                .fold((0.0, 0.0), |(h, r), &(ch, cr)| (h + ch, r + cr));
            (h / n, r / n)
        })
        .collect();

    let rows: Vec<String> = points
        .iter()
        .zip(&means)
        .map(|(p, &(hybrid, reward))| {
            format!(
                "{},{},{},{},{hybrid},{reward}",
                sweep.parameter,
                p.value,
                p.ports,
                p.mode.name()
            )
        })
        .collect();
    write_csv(
        &dir.join("sweep.csv"),
        "parameter,value,ports,mode,mean_hybrid_rate,mean_reward",
        &rows,
    )?;

    // One series per (ports, mode) combination across the value axis.
    let mut series = Vec::new();
    for (li, &l) in ports.iter().enumerate() {
        for (mi, _) in sweep.modes.iter().enumerate() {
            let label = format!("L={l} {}", sweep.modes[mi].name());
            let points_in_series: Vec<(f64, f64)> = sweep
                .values
                .iter()
                .enumerate()
                .map(|(vi, &value)| {
                    let idx = (vi * ports.len() + li) * sweep.modes.len() + mi;
                    (value, means[idx].1)
                })
                .collect();
            series.push(Series { label, points: points_in_series });
        }
    }
    write_line_chart(
        &dir.join("sweep.svg"),
        &format!("Random-search reward vs {}", sweep.parameter),
        &sweep.parameter,
        "mean reward",
        &series,
    )?;

    Ok((
        vec!["sweep.csv".into(), "sweep.svg".into()],
        true,
        format!(
            "swept {} = {:?} over {} point(s), {} scene(s) each",
            sweep.parameter,
            sweep.values,
            points.len(),
            seeds_per_point
        ),
    ))
}

/// `mse-verify`: for each randomized configuration, compare the
/// closed-form aggregation MSE and received power against a direct
/// Monte-Carlo simulation of the residual superposition. The gate passes
/// only when every configuration is within tolerance on both quantities.
fn run_mse_verify(spec: &ExperimentSpec, dir: &Path) -> Result<RunnerOutput, HarnessError> {
    let verify = &spec.mse_verify;

    struct Row {
        index: usize,
        cfg: SystemConfig,
        closed_mse: f64,
        mc_mse: f64,
        mse_rel: f64,
        closed_power: f64,
        mc_power: f64,
        power_rel: f64,
        pass: bool,
    }
    let rows: Vec<Result<Row, HarnessError>> = (0..verify.configs)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeds::stream_indexed(spec.seed, "mse-verify", i as u64);
            let mut cfg = spec.system.clone();
            cfg.num_airfl = rng.random_range(1..=5);
            cfg.num_noma = rng.random_range(1..=3);
            cfg.num_ports = rng.random_range(2..=6);
            cfg.sic_residual = rng.random_range(0.0..=1.0);
            cfg.csi_error_var = rng.random_range(0.0..=0.1);
            cfg.validate().map_err(|e| {
                HarnessError::Validation(format!("mse-verify config {i}: {e}"))
            })?;

            let geometry = sample_geometry(&cfg, &mut rng);
            let raw = RawAction(
                (0..cfg.action_dim()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            );
            let decision = decode_action(&raw, &cfg);
            let channels = draw_channel_set(&cfg, &geometry, &decision.positions, &mut rng);

            let closed = airfl_mse(&decision, &channels.h_est, &cfg);
            let mc = monte_carlo::simulate_mse(
                &decision,
                &channels.h_est,
                &cfg,
                verify.samples,
                &mut rng,
            );
            let mse_rel = (mc.mse - closed.total).abs() / closed.total;
            let power_rel =
                (mc.received_power - closed.received_power).abs() / closed.received_power;
            Ok(Row {
                index: i,
                cfg,
                closed_mse: closed.total,
                mc_mse: mc.mse,
                mse_rel,
                closed_power: closed.received_power,
                mc_power: mc.received_power,
                power_rel,
                pass: mse_rel <= verify.tolerance && power_rel <= verify.tolerance,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<Row>, _>>()?;

    let lines: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.index,
                r.cfg.num_airfl,
                r.cfg.num_noma,
                r.cfg.num_ports,
                r.cfg.sic_residual,
                r.cfg.csi_error_var,
                r.closed_mse,
                r.mc_mse,
                r.mse_rel,
                r.closed_power,
                r.mc_power,
                r.power_rel,
                if r.pass { "pass" } else { "FAIL" }
            )
        })
        .collect();
    write_csv(
        &dir.join("mse_verify.csv"),
        "config,k,n,l,eps_b,sigma_h2,closed_mse,mc_mse,mse_rel_err,\
         closed_power,mc_power,power_rel_err,verdict",
        &lines,
    )?;

    let passed = rows.iter().filter(|r| r.pass).count();
    let gate = passed == rows.len();
    Ok((
        vec!["mse_verify.csv".into()],
        gate,
        format!(
            "{passed}/{} configurations within {:.3}% on MSE and received power",
            rows.len(),
            verify.tolerance * 100.0
        ),
    ))
}

/// `fl`: the federated loop over the configured transport, with the
/// analog link's decision coming from an aligned construction, a random
/// search, or a checkpointed actor.
fn run_fl_experiment(spec: &ExperimentSpec, dir: &Path) -> Result<RunnerOutput, HarnessError> {
    let fl_run = &spec.fl_run;
    let corpus = load_csv(&fl_run.dataset)?;
    let system = &spec.system;

    let run = match fl_run.coupling {
        Coupling::Ideal => run_fl(&corpus, &spec.fl, &ChannelPolicy::Ideal, spec.seed)?,
        Coupling::Airfl => match fl_run.link {
            LinkSource::Aligned => {
                let (decision, channels) = aligned_link(system);
                let policy = ChannelPolicy::Fixed {
                    decision: &decision,
                    channels: &channels,
                    system,
                };
                run_fl(&corpus, &spec.fl, &policy, spec.seed)?
            }
            LinkSource::Search => {
                let best = random_search(
                    system,
                    fl_run.budget,
                    seeds::derive(spec.seed, "fl-link"),
                    PlacementMode::Fluid,
                );
                if fl_run.redraw {
                    let policy =
                        ChannelPolicy::Redraw { decision: &best.decision, system };
                    run_fl(&corpus, &spec.fl, &policy, spec.seed)?
                } else {
                    let mut rng = seeds::stream(spec.seed, "fl-link-freeze");
                    let geometry = sample_geometry(system, &mut rng);
                    let channels = draw_channel_set(
                        system,
                        &geometry,
                        &best.decision.positions,
                        &mut rng,
                    );
                    let policy = ChannelPolicy::Fixed {
                        decision: &best.decision,
                        channels: &channels,
                        system,
                    };
                    run_fl(&corpus, &spec.fl, &policy, spec.seed)?
                }
            }
            LinkSource::Checkpoint => {
                let path = fl_run.checkpoint.as_ref().expect("validate checks fl");
                let (config, policy) = restore_policy(&load_checkpoint(path)?)?;
                if config.system.num_airfl != spec.fl.clients {
                    return Err(HarnessError::Validation(format!(
                        "checkpoint system has {} AirFL users but fl.clients is {}",
                        config.system.num_airfl, spec.fl.clients
                    )));
                }
                let policy = ChannelPolicy::Actor {
                    actor: &policy.actor,
                    system: &config.system,
                };
                run_fl(&corpus, &spec.fl, &policy, spec.seed)?
            }
        },
    };

    let rows: Vec<String> = run
        .accuracy
        .iter()
        .zip(&run.train_loss)
        .enumerate()
        .map(|(i, (acc, loss))| format!("{},{acc},{loss}", i + 1))
        .collect();
    write_csv(
        &dir.join("fl_curve.csv"),
        "round,test_accuracy,train_loss",
        &rows,
    )?;

    let as_points = |ys: &[f64]| -> Vec<(f64, f64)> {
        ys.iter().enumerate().map(|(i, &y)| ((i + 1) as f64, y)).collect()
    };
    write_line_chart(
        &dir.join("fl_accuracy.svg"),
        "Federated test accuracy",
        "round",
        "test accuracy",
        &[Series { label: "accuracy".into(), points: as_points(&run.accuracy) }],
    )?;
    write_line_chart(
        &dir.join("fl_loss.svg"),
        "Federated training loss",
        "round",
        "mean local training loss",
        &[Series { label: "loss".into(), points: as_points(&run.train_loss) }],
    )?;

    let final_acc = run.accuracy.last().copied().unwrap_or(0.0);
    Ok((
        vec!["fl_curve.csv".into(), "fl_accuracy.svg".into(), "fl_loss.svg".into()],
        true,
        format!(
            "federated run finished: {} rounds, final test accuracy {final_acc:.4}",
            run.accuracy.len()
        ),
    ))
}

// ---------------------------------------------------------------------------
