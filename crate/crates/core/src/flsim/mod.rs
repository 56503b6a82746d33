//! Federated learning through the over-the-air aggregation uplink.
//!
//! Emulates the full loop — broadcast, local full-batch gradients,
//! analog (or ideal) aggregation, global update — on a labeled corpus,
//! producing test-accuracy and training-loss curves. The aggregation
//! distortion comes from the same receiver model the `metrics` module
//! prices in closed form, so learning curves and rate metrics describe
//! one and the same channel.

pub mod data;
pub mod model;
pub mod ota;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use data::{
    load_csv, parse_csv, partition, train_test_split, Dataset, PartitionMode,
};
pub use model::{local_gradient, Classifier};
pub use ota::{
    aligned_link, encode_messages, genie_stats, ota_aggregate, transmit,
    AnalogChannel, GradientMessage, NormStats, Transport,
};

use crate::agent::{act, Network};
use crate::channel::{compose_channel_set, draw_fading, sample_geometry, ChannelSet};
use crate::config::SystemConfig;
use crate::env::{decode_action, State};
use crate::metrics::Decision;
use crate::seeds::{stream, stream_indexed};

// ---------------------------------------------------------------------------
// Configuration

/// Federated-run parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlConfig {
    /// Communication rounds `T`.
    pub rounds: usize,
    /// Participating clients `K` (must match the system's AirFL user
    /// count when the analog channel is in the loop).
    pub clients: usize,
    /// Global step size `λ_fl` for the Eq. 4-style update (no decay).
    pub learning_rate: f64,
    /// How the corpus is sharded across clients.
    pub partition: PartitionMode,
    /// Distinct labels per client in non-IID mode (3 or 4).
    pub classes_per_client: usize,
    /// Hidden width of the classifier (two hidden layers by default).
    pub hidden_width: usize,
    /// Number of hidden layers.
    pub hidden_layers: usize,
    /// Fraction of samples held out for testing.
    pub test_fraction: f64,
    /// Divisor applied to raw features (16 for 4-bit pixel corpora).
    pub feature_scale: f64,
}

impl Default for FlConfig {
    fn default() -> Self {
        FlConfig {
            rounds: 200,
            clients: 5,
            learning_rate: 0.05,
            partition: PartitionMode::Iid,
            classes_per_client: 3,
            hidden_width: 200,
            hidden_layers: 2,
            test_fraction: 0.1,
            feature_scale: 16.0,
        }
    }
}

impl FlConfig {
    /// Checks field ranges; non-IID mode additionally pins
    /// `classes_per_client` to the supported {3, 4}.
    pub fn validate(&self) -> Result<(), FlError> {
        let bad = |msg: String| Err(FlError::Config(msg));
        if self.rounds == 0 {
            return bad("rounds must be at least 1".into());
        }
        if self.clients == 0 {
            return bad("clients must be at least 1".into());
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return bad(format!("learning_rate {} must be ≥ 0", self.learning_rate));
        }
        if self.partition == PartitionMode::NonIid
            && !(self.classes_per_client == 3 || self.classes_per_client == 4)
        {
            return bad(format!(
                "classes_per_client {} must be 3 or 4",
                self.classes_per_client
            ));
        }
        if self.hidden_width == 0 || self.hidden_layers == 0 {
            return bad("classifier needs at least one nonempty hidden layer".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!(
                "test_fraction {} outside (0, 1)",
                self.test_fraction
            ));
        }
        if self.feature_scale.is_nan() || self.feature_scale <= 0.0 {
            return bad(format!("feature_scale {} must be > 0", self.feature_scale));
        }
        Ok(())
    }
}

/// Federated-simulation failures.
#[derive(Debug, Error)]
pub enum FlError {
    /// A configuration field is out of range.
    #[error("invalid FL configuration: {0}")]
    Config(String),
    /// The corpus file is malformed.
    #[error("corpus parse error: {0}")]
    Parse(String),
    /// Not enough samples for the requested split or sharding.
    #[error("dataset too small: {0}")]
    TooSmall(String),
    /// Message dimensions or statistics disagree.
    #[error("inconsistent aggregation inputs: {0}")]
    Inconsistent(String),
    /// A numeric quantity left the finite range.
    #[error("non-finite value: {0}")]
    NonFinite(String),
    /// Corpus file could not be read.
    #[error("corpus I/O error: {0}")]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// Channel policy

/// Where each round's aggregation channel comes from.
pub enum ChannelPolicy<'a> {
    /// Noise-free aggregation: the exact mean reaches the server.
    Ideal,
    /// One fixed link reused every round.
    Fixed {
        /// Beamformer/positions/powers in force.
        decision: &'a Decision,
        /// The frozen channel realization.
        channels: &'a ChannelSet,
        /// Physical constants.
        system: &'a SystemConfig,
    },
    /// A fixed decision over freshly drawn geometry and fading each
    /// round (block fading across rounds).
    Redraw {
        /// Beamformer/positions/powers in force.
        decision: &'a Decision,
        /// Physical constants.
        system: &'a SystemConfig,
    },
    /// A trained actor maps each round's fresh geometry to a decision.
    Actor {
        /// Deterministic policy network (used without exploration noise).
        actor: &'a Network,
        /// Physical constants.
        system: &'a SystemConfig,
    },
}

// ---------------------------------------------------------------------------
// Federated loop

/// One finished federated run.
#[derive(Debug, Clone)]
pub struct FlRun {
    /// Test accuracy after each round's global update, length `rounds`.
    pub accuracy: Vec<f64>,
    /// Mean of the clients' local training losses at the start of each
    /// round (equal shard sizes make this the pooled training loss).
    pub train_loss: Vec<f64>,
    /// The final global model.
    pub model: Classifier,
}

/// Runs the federated loop: split, shard, then per round broadcast →
/// local full-batch gradients → aggregate → global update. Deterministic
/// per seed; client gradients are computed in parallel and reduced in
/// client order.
pub fn run_fl(
    corpus: &Dataset,
    cfg: &FlConfig,
    policy: &ChannelPolicy,
    seed: u64,
) -> Result<FlRun, FlError> {
    cfg.validate()?;
    let mut scaled = corpus.clone();
    scaled.scale_features(cfg.feature_scale);

    let (train, test) =
        train_test_split(&scaled, cfg.test_fraction, &mut stream(seed, "fl-split"))?;
    let shards = partition(
        &train,
        cfg.clients,
        cfg.partition,
        cfg.classes_per_client,
        &mut stream(seed, "fl-partition"),
    )?;

    let mut dims = vec![scaled.feature_dim()];
    dims.extend(std::iter::repeat_n(cfg.hidden_width, cfg.hidden_layers));
    dims.push(scaled.num_classes);
    let mut model = Classifier::new(&dims, &mut stream(seed, "fl-init"));

    let mut accuracy = Vec::with_capacity(cfg.rounds);
    let mut train_loss = Vec::with_capacity(cfg.rounds);
    for round in 0..cfg.rounds {
        let mut rng = stream_indexed(seed, "fl-round", round as u64);

        let locals: Vec<(f64, Vec<f64>)> = shards
            .par_iter()
            .map(|shard| local_gradient(&model, shard))
            .collect::<Result<_, _>>()?;
        train_loss
            .push(locals.iter().map(|(l, _)| l).sum::<f64>() / locals.len() as f64);
        let messages =
            encode_messages(locals.into_iter().map(|(_, g)| g).collect());

        let estimate = match policy {
            ChannelPolicy::Ideal => {
                ota_aggregate(&messages, Transport::Ideal, &mut rng)?
            }
            ChannelPolicy::Fixed { decision, channels, system } => {
                let link = AnalogChannel { decision, channels, system };
                ota_aggregate(&messages, Transport::Analog(link), &mut rng)?
            }
            ChannelPolicy::Redraw { decision, system } => {
                let geometry = sample_geometry(system, &mut rng);
                let fading = draw_fading(system, &mut rng);
                let channels =
                    compose_channel_set(system, &geometry, &decision.positions, &fading);
                let link = AnalogChannel { decision, channels: &channels, system };
                ota_aggregate(&messages, Transport::Analog(link), &mut rng)?
            }
            ChannelPolicy::Actor { actor, system } => {
                let geometry = sample_geometry(system, &mut rng);
                let state = State::from_geometry(&geometry, system);
                let action = act(actor, &[state], 0.0, &mut rng);
                let decision = decode_action(&action, system);
                let fading = draw_fading(system, &mut rng);
                let channels =
                    compose_channel_set(system, &geometry, &decision.positions, &fading);
                let link =
                    AnalogChannel { decision: &decision, channels: &channels, system };
                ota_aggregate(&messages, Transport::Analog(link), &mut rng)?
            }
        };

        model.apply_flat_update(&estimate, cfg.learning_rate);
        accuracy.push(model.accuracy(&test.features, &test.labels));
    }
    Ok(FlRun { accuracy, train_loss, model })
}

// ---------------------------------------------------------------------------
