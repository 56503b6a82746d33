//! Seedable simulator and optimization harness for a fluid-antenna (FA)
//! uplink in which two user populations share the same radio resources:
//!
//! * **NOMA data users** whose symbols the base station recovers with
//!   successive interference cancellation (SIC), and
//! * **federated-learning users** whose gradient updates are aggregated
//!   over the air (analog superposition) in the same slot.
//!
//! The base station owns a linear fluid antenna: `L` movable ports on a
//! finite aperture whose positions are part of the optimization variable,
//! together with a receive beamformer and per-user transmit powers. Channel
//! estimates are imperfect (additive Gaussian CSI error) and SIC is
//! imperfect (a residual interference coefficient), and every metric in
//! this crate models both impairments explicitly.
//!
//! Module map:
//!
//! * [`config`] — system parameters, presets, validation.
//! * [`seeds`] — derivation of independent named RNG streams from one seed.
//! * [`channel`] — geometry, line-of-sight steering, Rician draws, CSI error.
//! * [`metrics`] — SIC ordering, per-user SINR/rates, aggregation error
//!   (MSE) closed form plus its Monte-Carlo oracle, constraint checks.
//! * [`env`] — the decision environment: state/action encoding, the
//!   action-to-decision decoder, reward shaping.
//! * [`nn`] — from-scratch dense + LSTM layers with explicit
//!   forward/backward passes and an Adam optimizer.
//! * [`agent`] — recurrent deterministic policy-gradient learner, replay
//!   buffer, baselines (random policy/search, fixed antenna grid),
//!   checkpointing.
//! * [`flsim`] — federated-learning simulation whose per-round gradient
//!   aggregation runs through the same analog channel model.
//! * [`harness`] — experiment specs (TOML), CSV/SVG emission, sweeps,
//!   the verification gate used by the CLI.
//!
//! Everything stochastic draws from [`rand_chacha::ChaCha8Rng`] streams
//! derived via [`seeds`], so any result in this crate is reproducible from
//! a single `u64` seed.

pub mod agent;
pub mod channel;
pub mod config;
pub mod env;
pub mod flsim;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod seeds;

pub use config::SystemConfig;
