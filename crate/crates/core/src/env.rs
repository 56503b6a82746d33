//! The decision environment: normalized observations, a box-constrained
//! raw action space, and a reward built from the hybrid rate.
//!
//! One step of the environment is one communication slot:
//!
//! 1. the raw action in `[−1,1]^(3L+K+N)` is decoded into a feasible
//!    [`Decision`] (see [`decode_action`] — positions are feasible **by
//!    construction**, so the learner never has to discover the geometry
//!    constraints);
//! 2. channels are drawn for the current user geometry at the decoded
//!    port positions;
//! 3. metrics are evaluated; the reward is the hybrid rate normalized by
//!    bandwidth, or the penalty reward when the rate/MSE constraints are
//!    missed (or when some NOMA user sees numerically zero gain, which
//!    would make its SINR undefined);
//! 4. the next observation is a freshly drawn geometry — slots are
//!    independent, and temporal structure reaches a recurrent learner
//!    through its own action/reward history.

use rand_chacha::ChaCha8Rng;

use crate::channel::{self, ChannelSet, UserGeometry, UserKind};
use crate::config::SystemConfig;
use crate::metrics::{self, ConstraintReport, Decision, MetricsBundle};

/// Gains at or below this magnitude are treated as zero when guarding the
/// SINR computation (exact zeros have measure zero under continuous
/// actions; this tolerance catches the numerically degenerate shell).
pub const ZERO_GAIN_TOL: f64 = 1e-12;

/// Normalized observation: per-user distance over the largest configured
/// distance (entries in `[0,1]`) and angle over π/2 (entries in `[−1,1]`),
/// AirFL users first.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    /// Distances divided by [`SystemConfig::max_distance`].
    pub d_norm: Vec<f64>,
    /// Angles divided by π/2.
    pub phi_norm: Vec<f64>,
}

impl State {
    /// Builds the normalized observation from explicit geometry.
    pub fn from_geometry(geometry: &[UserGeometry], cfg: &SystemConfig) -> State {
        let d_max = cfg.max_distance();
        State {
            d_norm: geometry.iter().map(|g| g.distance / d_max).collect(),
            phi_norm: geometry
                .iter()
                .map(|g| g.angle / std::f64::consts::FRAC_PI_2)
                .collect(),
        }
    }

    /// Reconstructs the geometry the observation encodes. Inverse of
    /// [`State::from_geometry`] up to floating-point rounding.
    pub fn to_geometry(&self, cfg: &SystemConfig) -> Vec<UserGeometry> {
        let d_max = cfg.max_distance();
        self.d_norm
            .iter()
            .zip(&self.phi_norm)
            .enumerate()
            .map(|(i, (&d, &phi))| UserGeometry {
                distance: d * d_max,
                angle: phi * std::f64::consts::FRAC_PI_2,
                kind: if i < cfg.num_airfl {
                    UserKind::AirFl
                } else {
                    UserKind::Noma
                },
            })
            .collect()
    }

    /// Flat feature vector: all normalized distances, then all normalized
    /// angles.
    pub fn features(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.d_norm.len() + self.phi_norm.len());
        out.extend_from_slice(&self.d_norm);
        out.extend_from_slice(&self.phi_norm);
        out
    }
}

/// Raw continuous action in the box `[−1,1]^(3L+K+N)` with fixed layout:
/// beamformer real parts (`L`), beamformer imaginary parts (`L`), position
/// controls (`L`), power controls (`K+N`).
#[derive(Debug, Clone, PartialEq)]
pub struct RawAction(pub Vec<f64>);

impl RawAction {
    /// Expected length for a configuration.
    pub fn dim(cfg: &SystemConfig) -> usize {
        cfg.action_dim()
    }

    /// True when the length matches and every entry is inside the box.
    pub fn in_box(&self, cfg: &SystemConfig) -> bool {
        self.0.len() == cfg.action_dim() && self.0.iter().all(|v| (-1.0..=1.0).contains(v))
    }
}

/// One experience tuple for replay.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: State,
    pub action: RawAction,
    pub reward: f64,
    pub next_state: State,
    /// Step index within its episode.
    pub step_index: usize,
}

/// Everything observable about one environment step besides the reward.
#[derive(Debug, Clone)]
pub struct StepInfo {
    /// The decoded decision the slot was evaluated under.
    pub decision: Decision,
    /// The channels drawn for the slot.
    pub channels: ChannelSet,
    /// Metrics, absent when the zero-gain guard tripped.
    pub metrics: Option<MetricsBundle>,
    /// Constraint report, absent when the zero-gain guard tripped.
    pub constraints: Option<ConstraintReport>,
    /// True when the reward is the penalty reward.
    pub penalized: bool,
}

// ---------------------------------------------------------------------------

/// Decodes a raw box action into a feasible decision:
///
/// * beamformer `w_l = raw[l] + j·raw[L+l]`;
/// * positions: controls map to `u_l = (raw[2L+l]+1)/2`, whose ascending
///   order statistics place port `l` (0-based) at
///   `x_l = u_(l)·(X−(L−1)·X0) + l·X0` — inside the aperture, ascending,
///   and spaced at least `X0`, for every input;
/// * powers `p_i = P_max·(raw[3L+i]+1)/2`.
pub fn decode_action(raw: &RawAction, cfg: &SystemConfig) -> Decision {
    assert!(
        raw.in_box(cfg),
        "raw action outside the box or of wrong length"
    );
    let l = cfg.num_ports;
    let v = &raw.0;

    let beamformer = (0..l)
        .map(|i| num_complex::Complex64::new(v[i], v[l + i]))
        .collect();

    let span = cfg.position_span();
    let mut u: Vec<f64> = v[2 * l..3 * l].iter().map(|c| (c + 1.0) / 2.0).collect();
    u.sort_by(f64::total_cmp);
    let positions = u
        .iter()
        .enumerate()
        .map(|(i, ui)| ui * span + i as f64 * cfg.min_spacing)
        .collect();

    let powers = v[3 * l..]
        .iter()
        .map(|c| cfg.max_power * (c + 1.0) / 2.0)
        .collect();

    Decision {
        beamformer,
        positions,
        powers,
    }
}

/// Draws a fresh observation (user geometry) for a new slot.
pub fn reset(cfg: &SystemConfig, rng: &mut ChaCha8Rng) -> State {
    State::from_geometry(&channel::sample_geometry(cfg, rng), cfg)
}

/// Advances the environment by one slot. Consumes randomness in a fixed
/// order — channel fading first, then the next geometry — so a fixed
/// stream makes the step fully reproducible.
pub fn step(
    state: &State,
    raw: &RawAction,
    cfg: &SystemConfig,
    rng: &mut ChaCha8Rng,
) -> (State, f64, StepInfo) {
    let decision = decode_action(raw, cfg);
    let geometry = state.to_geometry(cfg);
    let channels = channel::draw_channel_set(cfg, &geometry, &decision.positions, rng);
    let next_state = reset(cfg, rng);
    let (reward, info) = score(decision, channels, cfg);
    (next_state, reward, info)
}

/// Scores a decision on already-drawn channels with the slot-reward
/// semantics: the penalty reward when any NOMA user's beamformed
/// estimated gain is numerically zero, when the metrics are undefined, or
/// when a QoS constraint (per-user rate, aggregation distortion) is
/// violated; otherwise the bandwidth-normalized hybrid rate.
pub fn score(decision: Decision, channels: ChannelSet, cfg: &SystemConfig) -> (f64, StepInfo) {
    // Zero-gain guard: a NOMA user whose beamformed estimated gain is
    // numerically zero has an undefined (or meaningless) SINR.
    let zero_gain = (cfg.num_airfl..cfg.num_users()).any(|u| {
        metrics::beam_gain(&decision.beamformer, &channels.h_est[u]).norm() <= ZERO_GAIN_TOL
    });

    let evaluated = if zero_gain {
        None
    } else {
        metrics::evaluate(&decision, &channels, cfg).ok()
    };

    match evaluated {
        None => {
            let info = StepInfo {
                decision,
                channels,
                metrics: None,
                constraints: None,
                penalized: true,
            };
            (cfg.penalty_reward, info)
        }
        Some(bundle) => {
            let report = metrics::check_constraints(&decision, &bundle, cfg);
            let qos_ok = report.per_user_rate_ok.iter().all(|&b| b) && report.mse_ok;
            let reward = if qos_ok {
                bundle.hybrid_rate / cfg.bandwidth
            } else {
                cfg.penalty_reward
            };
            let info = StepInfo {
                decision,
                channels,
                metrics: Some(bundle),
                constraints: Some(report),
                penalized: !qos_ok,
            };
            (reward, info)
        }
    }
}

// ---------------------------------------------------------------------------
