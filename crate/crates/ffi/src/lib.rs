//! C ABI over the simulator so non-Rust callers can embed it.
//!
//! The surface follows one set of conventions, mirrored in the generated
//! header (`include/airnoma.h`):
//!
//! * every fallible call returns [`AnStatus`]; `Ok` is zero;
//! * on failure, a thread-local message is readable through
//!   [`an_last_error_message`] until the next failing call on the same
//!   thread;
//! * handles ([`AnSystem`], [`AnScene`], [`AnPolicy`]) are opaque boxes
//!   created through out-pointers; each kind has exactly one
//!   `an_*_free`, and every free accepts null;
//! * out-pointers are written only when the call returns `Ok`;
//! * strings returned through out-pointers are UTF-8, NUL-terminated,
//!   owned by the caller, and released with [`an_string_free`].
//!
//! Panics never unwind across the boundary: every entry point runs under
//! a catch-all guard that converts a panic into [`AnStatus::Runtime`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use num_complex::Complex64;

use airnoma::agent::checkpoint::CheckpointConfig;
use airnoma::agent::{
    evaluate_policy, load_checkpoint, random_search, restore_policy, PlacementMode,
    RecurrentPolicy,
};
use airnoma::channel::{self, Fading, UserGeometry, UserKind};
use airnoma::env::{self, RawAction, StepInfo};
use airnoma::flsim::{load_csv, run_fl, ChannelPolicy, FlConfig, PartitionMode};
use airnoma::harness::with_system_field;
use airnoma::metrics::check_constraints;
use airnoma::{seeds, SystemConfig};

// ---------------------------------------------------------------------------
// Status codes and the per-thread error message

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnStatus {
    /// Success; out-pointers have been written.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument failed validation (range, length, or parse error).
    InvalidArgument = 2,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 3,
    /// An underlying file operation failed.
    Io = 4,
    /// An internal invariant failed; the message has details.
    Runtime = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

/// Records `message` for the calling thread and passes `status` through.
fn fail(status: AnStatus, message: impl std::fmt::Display) -> AnStatus {
    let text = message.to_string().replace('\0', "?");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(text).expect("NUL bytes replaced above");
    });
    status
}

/// Message of the most recent failing call on this thread; the empty
/// string before any failure. The pointer stays valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn an_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string (never freed).
#[no_mangle]
pub extern "C" fn an_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Frees a string previously returned through an out-pointer. Null is a
/// no-op.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library's
/// string-returning calls, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn an_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------------------
// Guard rails shared by every entry point

/// Runs an entry-point body, converting a panic into [`AnStatus::Runtime`].
fn guarded(body: impl FnOnce() -> AnStatus) -> AnStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(AnStatus::Runtime, "internal panic"),
    }
}

macro_rules! ffi_try {
    ($e:expr) => {
        match $e {
            Ok(value) => value,
            Err(status) => return status,
        }
    };
}

/// Null-checked shared reference.
unsafe fn req<'a, T>(p: *const T, what: &str) -> Result<&'a T, AnStatus> {
    p.as_ref()
        .ok_or_else(|| fail(AnStatus::NullPointer, format!("{what} is null")))
}

/// Null-checked mutable reference.
unsafe fn req_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, AnStatus> {
    p.as_mut()
        .ok_or_else(|| fail(AnStatus::NullPointer, format!("{what} is null")))
}

/// Null- and UTF-8-checked C string.
unsafe fn req_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, AnStatus> {
    if p.is_null() {
        return Err(fail(AnStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(AnStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// Required output buffer of an exact expected length.
unsafe fn req_buffer<'a, T>(
    p: *mut T,
    len: usize,
    expected: usize,
    what: &str,
) -> Result<&'a mut [T], AnStatus> {
    if p.is_null() {
        return Err(fail(AnStatus::NullPointer, format!("{what} is null")));
    }
    if len != expected {
        return Err(fail(
            AnStatus::InvalidArgument,
            format!("{what} has length {len}, expected {expected}"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// Nullable output buffer of an exact expected length.
unsafe fn opt_buffer<'a, T>(
    p: *mut T,
    len: usize,
    expected: usize,
    what: &str,
) -> Result<Option<&'a mut [T]>, AnStatus> {
    if p.is_null() {
        return Ok(None);
    }
    req_buffer(p, len, expected, what).map(Some)
}

// ---------------------------------------------------------------------------
// Flat value types

/// One complex number (Cartesian form).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnComplex {
    /// Real part.
    pub re: f64,
    /// Imaginary part.
    pub im: f64,
}

impl From<Complex64> for AnComplex {
    fn from(z: Complex64) -> AnComplex {
        AnComplex { re: z.re, im: z.im }
    }
}

/// Port-placement mode for the built-in random search.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnPlacement {
    /// Port positions come from the searched action (fluid antenna).
    Fluid = 0,
    /// Port positions stay frozen at the uniform grid (fixed antenna).
    FixedGrid = 1,
}

impl From<AnPlacement> for PlacementMode {
    fn from(mode: AnPlacement) -> PlacementMode {
        match mode {
            AnPlacement::Fluid => PlacementMode::Fluid,
            AnPlacement::FixedGrid => PlacementMode::FixedGrid,
        }
    }
}

/// Headline metrics of one evaluated decision. When the decision was
/// degenerate (`penalized` and the rates are NaN) only `reward` is
/// meaningful.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnMetrics {
    /// Slot reward: bandwidth-normalized hybrid rate, or the penalty.
    pub reward: f64,
    /// Weighted mixture of data and computation rates in bit/s.
    pub hybrid_rate: f64,
    /// Sum of the NOMA user rates in bit/s.
    pub noma_sum_rate: f64,
    /// Computation rate of the aggregation in bit/s.
    pub airfl_rate: f64,
    /// Total aggregation mean squared error.
    pub mse_total: f64,
    /// Received power `E|ŝ|²` of the reconstructed aggregate.
    pub received_power: f64,
    /// Every constraint (rates, distortion, geometry, power) holds.
    pub feasible: bool,
    /// The reward is the penalty reward.
    pub penalized: bool,
}

/// Metrics for a degenerate (penalized, metric-free) decision.
fn penalized_metrics(reward: f64) -> AnMetrics {
    AnMetrics {
        reward,
        hybrid_rate: f64::NAN,
        noma_sum_rate: f64::NAN,
        airfl_rate: f64::NAN,
        mse_total: f64::NAN,
        received_power: f64::NAN,
        feasible: false,
        penalized: true,
    }
}

fn step_metrics(reward: f64, info: &StepInfo) -> AnMetrics {
    match (&info.metrics, &info.constraints) {
        (Some(bundle), Some(report)) => AnMetrics {
            reward,
            hybrid_rate: bundle.hybrid_rate,
            noma_sum_rate: bundle.noma_sum_rate,
            airfl_rate: bundle.airfl_rate,
            mse_total: bundle.mse.total,
            received_power: bundle.mse.received_power,
            feasible: report.all_ok,
            penalized: info.penalized,
        },
        _ => penalized_metrics(reward),
    }
}

// ---------------------------------------------------------------------------
// AnSystem — system-configuration handle

/// Opaque system configuration (user counts, ports, impairments, QoS).
pub struct AnSystem(SystemConfig);

unsafe fn new_system(cfg: SystemConfig, out: *mut *mut AnSystem) -> AnStatus {
    let out = ffi_try!(req_mut(out, "out"));
    *out = Box::into_raw(Box::new(AnSystem(cfg)));
    AnStatus::Ok
}

/// Creates the reference system configuration.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn an_system_default(out: *mut *mut AnSystem) -> AnStatus {
    guarded(|| new_system(SystemConfig::default(), out))
}

/// Creates the scaled-down desk configuration (fewer users and ports,
/// meant for fast experiments).
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn an_system_desk(out: *mut *mut AnSystem) -> AnStatus {
    guarded(|| new_system(SystemConfig::desk(), out))
}

/// Parses a system configuration from TOML text. Absent fields keep
/// their defaults; unknown fields and invalid values are rejected.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn an_system_from_toml(
    text: *const c_char,
    out: *mut *mut AnSystem,
) -> AnStatus {
    guarded(|| {
        let text = ffi_try!(req_str(text, "text"));
        let cfg: SystemConfig = match toml::from_str(text) {
            Ok(cfg) => cfg,
            Err(e) => return fail(AnStatus::InvalidArgument, format!("system TOML: {e}")),
        };
        if let Err(e) = cfg.validate() {
            return fail(AnStatus::InvalidArgument, e);
        }
        new_system(cfg, out)
    })
}

/// Serializes the configuration to TOML. The returned string is owned by
/// the caller; release it with [`an_string_free`].
///
/// # Safety
/// `sys` must be a live handle; `out_text` must be writable.
#[no_mangle]
pub unsafe extern "C" fn an_system_to_toml(
    sys: *const AnSystem,
    out_text: *mut *mut c_char,
) -> AnStatus {
    guarded(|| {
        let sys = ffi_try!(req(sys, "sys"));
        let out_text = ffi_try!(req_mut(out_text, "out_text"));
        let text = match toml::to_string_pretty(&sys.0) {
            Ok(text) => text,
            Err(e) => return fail(AnStatus::Runtime, format!("serialization: {e}")),
        };
        let c = CString::new(text).expect("TOML never contains NUL");
        *out_text = c.into_raw();
        AnStatus::Ok
    })
}

/// Sets one numeric field by name (e.g. `"sic_residual"`, `"num_ports"`)
/// and re-validates the configuration. Integral fields accept integral
/// values; array fields are set through [`an_system_from_toml`] instead.
///
/// # Safety
/// `sys` must be a live handle; `field` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn an_system_set(
    sys: *mut AnSystem,
    field: *const c_char,
    value: f64,
) -> AnStatus {
    guarded(|| {
        let sys = ffi_try!(req_mut(sys, "sys"));
        let field = ffi_try!(req_str(field, "field"));
        match with_system_field(&sys.0, field, value) {
            Ok(cfg) => {
                sys.0 = cfg;
                AnStatus::Ok
            }
            Err(e) => fail(AnStatus::InvalidArgument, e),
        }
    })
}

/// Reads one numeric field by name. Array fields are read through
/// [`an_system_to_toml`] instead.
///
/// # Safety
/// `sys` must be a live handle; `field` must be NUL-terminated; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn an_system_get(
    sys: *const AnSystem,
    field: *const c_char,
    out: *mut f64,
) -> AnStatus {
    guarded(|| {
        let sys = ffi_try!(req(sys, "sys"));
        let field = ffi_try!(req_str(field, "field"));
        let out = ffi_try!(req_mut(out, "out"));
        let table = toml::Value::try_from(&sys.0).expect("config serializes");
        let value = match table.get(field) {
            Some(toml::Value::Float(f)) => *f,
            Some(toml::Value::Integer(i)) => *i as f64,
            Some(_) => {
                return fail(
                    AnStatus::InvalidArgument,
                    format!("field `{field}` is not numeric; use an_system_to_toml"),
                )
            }
            None => {
                return fail(
                    AnStatus::InvalidArgument,
                    format!("no field named `{field}`"),
                )
            }
        };
        *out = value;
        AnStatus::Ok
    })
}

/// Reports the dimensions a caller needs to size buffers: observation
/// length, action length, user count `K+N`, and port count `L`. Each
/// out-pointer may be null to skip that value.
///
/// # Safety
/// `sys` must be a live handle; non-null out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn an_system_dims(
    sys: *const AnSystem,
    out_state_dim: *mut usize,
    out_action_dim: *mut usize,
    out_users: *mut usize,
    out_ports: *mut usize,
) -> AnStatus {
    guarded(|| {
        let sys = ffi_try!(req(sys, "sys"));
        if let Some(d) = out_state_dim.as_mut() {
            *d = sys.0.state_dim();
        }
        if let Some(d) = out_action_dim.as_mut() {
            *d = sys.0.action_dim();
        }
        if let Some(d) = out_users.as_mut() {
            *d = sys.0.num_users();
        }
        if let Some(d) = out_ports.as_mut() {
            *d = sys.0.num_ports;
        }
        AnStatus::Ok
    })
}

/// Frees a system handle. Null is a no-op.
///
/// # Safety
/// `sys` must be null or a live handle, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn an_system_free(sys: *mut AnSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

// ---------------------------------------------------------------------------
// AnScene — one frozen scenario (geometry + block fading)

/// Opaque scenario: user geometry and one block-fading realization,
/// frozen at sampling time together with a snapshot of the system.
pub struct AnScene {
    cfg: SystemConfig,
    geometry: Vec<UserGeometry>,
    fading: Fading,
}

/// Samples the scenario that [`an_search`] with the same seed optimizes
/// over: user geometry and block fading on a derived stream. The scene
/// snapshots the system, so later edits to `sys` do not affect it.
///
/// # Safety
/// `sys` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn an_scene_sample(
    sys: *const AnSystem,
    seed: u64,
    out: *mut *mut AnScene,
) -> AnStatus {
    guarded(|| {
        let sys = ffi_try!(req(sys, "sys"));
        let out = ffi_try!(req_mut(out, "out"));
        let cfg = sys.0.clone();
        let mut rng = seeds::stream(seed, "search-scene");
        let geometry = channel::sample_geometry(&cfg, &mut rng);
        let fading = channel::draw_fading(&cfg, &mut rng);
        *out = Box::into_raw(Box::new(AnScene {
            cfg,
            geometry,
            fading,
        }));
        AnStatus::Ok
    })
}

/// Reads one user's placement: distance in meters, angle of arrival in
/// radians, and population flag. Each out-pointer may be null.
///
/// # Safety
/// `scene` must be a live handle; non-null out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn an_scene_user(
    scene: *const AnScene,
    index: usize,
    out_distance: *mut f64,
    out_angle: *mut f64,
    out_is_airfl: *mut bool,
) -> AnStatus {
    guarded(|| {
        let scene = ffi_try!(req(scene, "scene"));
        let Some(user) = scene.geometry.get(index) else {
            return fail(
                AnStatus::InvalidArgument,
                format!(
                    "user index {index} out of range ({} users)",
                    scene.geometry.len()
                ),
            );
        };
        if let Some(d) = out_distance.as_mut() {
            *d = user.distance;
        }
        if let Some(a) = out_angle.as_mut() {
            *a = user.angle;
        }
        if let Some(k) = out_is_airfl.as_mut() {
            *k = user.kind == UserKind::AirFl;
        }
        AnStatus::Ok
    })
}

/// Scores one raw action on the scene: the action (entries in [−1, 1],
/// length = action dimension) is decoded into a decision, channels are
/// composed for its port positions from the frozen fading, and the slot
/// reward plus headline metrics are written to `out`. Evaluations do not
/// consume randomness, so any number of actions can be compared on one
/// scene — an external optimizer's counterpart of [`an_search`].
///
/// # Safety
/// `scene` must be a live handle; `action` must point to `action_len`
/// doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn an_scene_evaluate(
    scene: *const AnScene,
    action: *const f64,
    action_len: usize,
    out: *mut AnMetrics,
) -> AnStatus {
    guarded(|| {
        let scene = ffi_try!(req(scene, "scene"));
        let out = ffi_try!(req_mut(out, "out"));
        if action.is_null() {
            return fail(AnStatus::NullPointer, "action is null");
        }
        let dim = scene.cfg.action_dim();
        let raw = RawAction(std::slice::from_raw_parts(action, action_len).to_vec());
        if !raw.in_box(&scene.cfg) {
            return fail(
                AnStatus::InvalidArgument,
                format!("action must have length {dim} with entries in [-1, 1]"),
            );
        }
        let decision = env::decode_action(&raw, &scene.cfg);
        let channels = channel::compose_channel_set(
            &scene.cfg,
            &scene.geometry,
            &decision.positions,
            &scene.fading,
        );
        let (reward, info) = env::score(decision, channels, &scene.cfg);
        *out = step_metrics(reward, &info);
        AnStatus::Ok
    })
}

/// Frees a scene handle. Null is a no-op.
///
/// # Safety
/// `scene` must be null or a live handle, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn an_scene_free(scene: *mut AnScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

// ---------------------------------------------------------------------------
// Random search

/// Uniform random search over `budget` candidate decisions on the scene
/// derived from `seed` (see [`an_scene_sample`]). Writes the best
/// candidate's metrics and, through the nullable buffers, its decision:
/// beamformer (length = ports), port positions in wavelengths (length =
/// ports), and per-user transmit powers in watts (length = users, AirFL
/// users first). Non-null buffers must have exactly the stated lengths.
///
/// # Safety
/// `sys` must be a live handle; non-null out-pointers must point to
/// writable storage of the declared lengths.
#[no_mangle]
pub unsafe extern "C" fn an_search(
    sys: *const AnSystem,
    budget: usize,
    seed: u64,
    mode: AnPlacement,
    out_metrics: *mut AnMetrics,
    out_beamformer: *mut AnComplex,
    beamformer_len: usize,
    out_positions: *mut f64,
    positions_len: usize,
    out_powers: *mut f64,
    powers_len: usize,
) -> AnStatus {
    guarded(|| {
        let sys = ffi_try!(req(sys, "sys"));
        if budget == 0 {
            return fail(AnStatus::InvalidArgument, "budget must be at least 1");
        }
        let cfg = &sys.0;
        let ports = cfg.num_ports;
        let users = cfg.num_users();
        let beam = ffi_try!(opt_buffer(
            out_beamformer,
            beamformer_len,
            ports,
            "out_beamformer"
        ));
        let positions = ffi_try!(opt_buffer(
            out_positions,
            positions_len,
            ports,
            "out_positions"
        ));
        let powers = ffi_try!(opt_buffer(out_powers, powers_len, users, "out_powers"));

        let result = random_search(cfg, budget, seed, mode.into());

        if let Some(metrics) = out_metrics.as_mut() {
            *metrics = match &result.metrics {
                Some(bundle) => {
                    let report = check_constraints(&result.decision, bundle, cfg);
                    AnMetrics {
                        reward: result.reward,
                        hybrid_rate: bundle.hybrid_rate,
                        noma_sum_rate: bundle.noma_sum_rate,
                        airfl_rate: bundle.airfl_rate,
                        mse_total: bundle.mse.total,
                        received_power: bundle.mse.received_power,
                        feasible: report.all_ok,
                        penalized: result.reward == cfg.penalty_reward,
                    }
                }
                None => penalized_metrics(result.reward),
            };
        }
        if let Some(beam) = beam {
            for (slot, &w) in beam.iter_mut().zip(&result.decision.beamformer) {
                *slot = w.into();
            }
        }
        if let Some(positions) = positions {
            positions.copy_from_slice(&result.decision.positions);
        }
        if let Some(powers) = powers {
            powers.copy_from_slice(&result.decision.powers);
        }
        AnStatus::Ok
    })
}

// ---------------------------------------------------------------------------
// AnPolicy — trained-policy handle

/// Opaque trained policy: the checkpoint's networks plus the system and
/// learner configuration it was trained for.
pub struct AnPolicy {
    config: CheckpointConfig,
    policy: RecurrentPolicy,
}

/// Loads a policy checkpoint written by the trainer.
///
/// # Safety
/// `path` must be a NUL-terminated file path; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn an_policy_load(path: *const c_char, out: *mut *mut AnPolicy) -> AnStatus {
    guarded(|| {
        let path = ffi_try!(req_str(path, "path"));
        let out = ffi_try!(req_mut(out, "out"));
        let checkpoint = match load_checkpoint(Path::new(path)) {
            Ok(ck) => ck,
            Err(airnoma::agent::AgentError::Io(e)) => return fail(AnStatus::Io, e),
            Err(e) => return fail(AnStatus::Runtime, e),
        };
        let (config, policy) = match restore_policy(&checkpoint) {
            Ok(pair) => pair,
            Err(e) => return fail(AnStatus::Runtime, e),
        };
        *out = Box::into_raw(Box::new(AnPolicy { config, policy }));
        AnStatus::Ok
    })
}

/// Copies the system configuration the policy was trained for into a new
/// [`AnSystem`] handle (evaluation must run on that environment).
///
/// # Safety
/// `policy` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn an_policy_system(
    policy: *const AnPolicy,
    out: *mut *mut AnSystem,
) -> AnStatus {
    guarded(|| {
        let policy = ffi_try!(req(policy, "policy"));
        new_system(policy.config.system.clone(), out)
    })
}

/// Noise-free evaluation rollouts on the trained-for environment: writes
/// each episode's mean reward into `out_rewards` (length = `episodes`).
/// Deterministic per seed.
///
/// # Safety
/// `policy` must be a live handle; `out_rewards` must point to
/// `rewards_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn an_policy_evaluate(
    policy: *const AnPolicy,
    episodes: usize,
    seed: u64,
    out_rewards: *mut f64,
    rewards_len: usize,
) -> AnStatus {
    guarded(|| {
        let policy = ffi_try!(req(policy, "policy"));
        if episodes == 0 {
            return fail(AnStatus::InvalidArgument, "episodes must be at least 1");
        }
        let rewards = ffi_try!(req_buffer(out_rewards, rewards_len, episodes, "out_rewards"));
        let per_episode = evaluate_policy(
            &policy.policy.actor,
            &policy.config.system,
            episodes,
            policy.config.agent.episode_length,
            policy.config.agent.trajectory_len,
            seed,
        );
        rewards.copy_from_slice(&per_episode);
        AnStatus::Ok
    })
}

/// Frees a policy handle. Null is a no-op.
///
/// # Safety
/// `policy` must be null or a live handle, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn an_policy_free(policy: *mut AnPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

// ---------------------------------------------------------------------------
// Federated learning

/// Runs the federated loop over an ideal (noise-free) aggregation channel
/// on a CSV corpus (header `f0,...,fD,label`; one sample per row, integer
/// class label in the final column) and writes the per-round test
/// accuracy into `out_accuracy` (length = `rounds`).
/// `iid` selects the sharding: uniform shuffle, or label-skewed shards
/// with 3 distinct labels per client. Other federated parameters stay at
/// their defaults; richer setups (analog aggregation, trained links) are
/// reachable through the `fl` subcommand of the CLI.
///
/// # Safety
/// `dataset_path` must be a NUL-terminated file path; `out_accuracy`
/// must point to `accuracy_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn an_fl_run_ideal(
    dataset_path: *const c_char,
    rounds: usize,
    clients: usize,
    iid: bool,
    seed: u64,
    out_accuracy: *mut f64,
    accuracy_len: usize,
) -> AnStatus {
    guarded(|| {
        let path = ffi_try!(req_str(dataset_path, "dataset_path"));
        let accuracy = ffi_try!(req_buffer(out_accuracy, accuracy_len, rounds, "out_accuracy"));
        let corpus = match load_csv(Path::new(path)) {
            Ok(corpus) => corpus,
            Err(airnoma::flsim::FlError::Io(e)) => return fail(AnStatus::Io, e),
            Err(e) => return fail(AnStatus::InvalidArgument, e),
        };
        let cfg = FlConfig {
            rounds,
            clients,
            partition: if iid {
                PartitionMode::Iid
            } else {
                PartitionMode::NonIid
            },
            ..FlConfig::default()
        };
        let run = match run_fl(&corpus, &cfg, &ChannelPolicy::Ideal, seed) {
            Ok(run) => run,
            Err(airnoma::flsim::FlError::Config(e)) => return fail(AnStatus::InvalidArgument, e),
            Err(e) => return fail(AnStatus::Runtime, e),
        };
        accuracy.copy_from_slice(&run.accuracy);
        AnStatus::Ok
    })
}

// ---------------------------------------------------------------------------
