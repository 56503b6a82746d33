//! Analog over-the-air gradient aggregation.
//!
//! Clients map gradient coordinates to unit-variance symbols with
//! genie-shared standardization statistics, transmit them simultaneously,
//! and the receiver reads the superposed signal through its beamformer —
//! misaligned effective gains, residual NOMA interference, CSI error and
//! receiver noise included — then de-normalizes the estimate. Each
//! coordinate is one independent use of the round's block-fading channel.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::FlError;
use crate::channel::{ChannelSet, UserGeometry, UserKind};
use crate::config::SystemConfig;
use crate::metrics::{beam_gain, Decision};

// ---------------------------------------------------------------------------
// Messages

/// Per-round standardization statistics, shared identically by every
/// client (genie-aided: computed from all clients' raw gradients).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormStats {
    /// Pooled mean of all clients' gradient entries.
    pub mean: f64,
    /// Pooled population standard deviation of the same entries.
    pub std: f64,
}

/// One client's uplink payload: its raw gradient plus the shared
/// normalization statistics used for the symbol mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMessage {
    /// Flat real gradient, length `Q`.
    pub values: Vec<f64>,
    /// Round statistics, identical across clients.
    pub stats: NormStats,
}

/// Pooled scalar mean/std over every entry of every client's gradient.
///
/// Scalar (rather than per-coordinate across clients) statistics keep
/// the scheme non-degenerate: a per-coordinate across-client mean would
/// already *be* the aggregation target, leaving nothing to transmit.
pub fn genie_stats(gradients: &[Vec<f64>]) -> NormStats {
    let count: usize = gradients.iter().map(Vec::len).sum();
    let mean = gradients.iter().flatten().sum::<f64>() / count as f64;
    let var = gradients
        .iter()
        .flatten()
        .map(|&g| (g - mean) * (g - mean))
        .sum::<f64>()
        / count as f64;
    NormStats { mean, std: var.sqrt() }
}

/// Attaches the shared genie statistics to each client's raw gradient.
pub fn encode_messages(gradients: Vec<Vec<f64>>) -> Vec<GradientMessage> {
    let stats = genie_stats(&gradients);
    gradients
        .into_iter()
        .map(|values| GradientMessage { values, stats })
        .collect()
}

// ---------------------------------------------------------------------------
// Channel

/// The concrete link a round's symbols travel through.
#[derive(Debug, Clone, Copy)]
pub struct AnalogChannel<'a> {
    /// Beamformer, port positions and transmit powers in force.
    pub decision: &'a Decision,
    /// Estimated channels the receiver combines with (`ĥ_i`).
    pub channels: &'a ChannelSet,
    /// Physical constants: noise power, CSI error variance, SIC residual.
    pub system: &'a SystemConfig,
}

/// Aggregation transport: noise-free averaging or the analog uplink.
#[derive(Debug, Clone, Copy)]
pub enum Transport<'a> {
    /// Exact arithmetic mean (fixed client-order summation).
    Ideal,
    /// Superposed analog transmission through a concrete link.
    Analog(AnalogChannel<'a>),
}

/// Builds a hand-aligned link for the given system: `ĥ_i = e_1` for
/// every user, `w = e_1`, grid positions, unit powers — every effective
/// gain is exactly 1, so the only distortion left is what the system's
/// noise, CSI-error and SIC-residual settings inject. Useful as a
/// minimal-distortion reference channel.
pub fn aligned_link(system: &SystemConfig) -> (Decision, ChannelSet) {
    let ports = system.num_ports;
    let users = system.num_users();
    let mut unit = vec![Complex64::ZERO; ports];
    unit[0] = Complex64::ONE;
    let decision = Decision {
        beamformer: unit.clone(),
        positions: (0..ports).map(|i| i as f64 * system.min_spacing).collect(),
        powers: vec![1.0; users],
    };
    let geometry = (0..users)
        .map(|i| UserGeometry {
            distance: 1.0,
            angle: 0.0,
            kind: if i < system.num_airfl { UserKind::AirFl } else { UserKind::Noma },
        })
        .collect();
    let channels = ChannelSet {
        geometry,
        h_est: vec![unit.clone(); users],
        h_true: vec![unit; users],
        positions_used: decision.positions.clone(),
    };
    (decision, channels)
}

/// Draws one circularly-symmetric complex Gaussian scalar with total
/// variance `var` (split evenly between real and imaginary parts).
fn cn_scalar(var: f64, rng: &mut ChaCha8Rng) -> Complex64 {
    let scale = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}

/// Simulates the per-coordinate received aggregate `ŝ[q]` for `K` rows
/// of unit-variance symbols (`symbols[k][q]`).
///
/// Per coordinate the receiver output is
/// `(1/K)·[Σ_k (wᴴĥ_k + wᴴe_k)·√p_k·s_k + √ε_b·Σ_n (wᴴĥ_n + wᴴe_n)·√p_n·u_n + wᴴz]`
/// with fresh CSI error, fresh independent unit-variance NOMA symbols
/// `u_n` and fresh receiver noise per coordinate; the beamformed error
/// and noise projections are drawn directly as scalars
/// (`wᴴe ~ CN(0, σ_h²‖w‖²)`, `wᴴz ~ CN(0, σ²‖w‖²)`), which matches the
/// entry-wise draw in distribution. Draw order per coordinate: AirFL
/// CSI errors (k ascending), then per NOMA user its CSI error and
/// symbol, then the noise projection.
pub fn transmit(
    symbols: &[Vec<f64>],
    link: &AnalogChannel,
    rng: &mut ChaCha8Rng,
) -> Vec<Complex64> {
    let sys = link.system;
    let (k_users, n_users) = (sys.num_airfl, sys.num_noma);
    assert_eq!(symbols.len(), k_users, "one symbol row per AirFL user");
    let q_len = symbols.first().map_or(0, Vec::len);

    let w = &link.decision.beamformer;
    let w_norm_sq: f64 = w.iter().map(Complex64::norm_sqr).sum();
    let gain = |i: usize| {
        beam_gain(w, &link.channels.h_est[i]) * link.decision.powers[i].sqrt()
    };
    let fl_gains: Vec<Complex64> = (0..k_users).map(&gain).collect();
    let noma_gains: Vec<Complex64> =
        (k_users..k_users + n_users).map(&gain).collect();
    let fl_err_var: Vec<f64> = (0..k_users)
        .map(|k| sys.csi_error_var * w_norm_sq * link.decision.powers[k])
        .collect();
    let noma_err_var: Vec<f64> = (k_users..k_users + n_users)
        .map(|i| sys.csi_error_var * w_norm_sq * link.decision.powers[i])
        .collect();
    let sqrt_residual = sys.sic_residual.sqrt();
    let noise_var = sys.noise_power * w_norm_sq;

    let mut received = Vec::with_capacity(q_len);
    for q in 0..q_len {
        let mut y = Complex64::ZERO;
        for ((&gain, &err_var), sym) in fl_gains.iter().zip(&fl_err_var).zip(symbols) {
            y += (gain + cn_scalar(err_var, rng)) * sym[q];
        }
        for (&gain, &err_var) in noma_gains.iter().zip(&noma_err_var) {
            let gain_n = gain + cn_scalar(err_var, rng);
            y += sqrt_residual * gain_n * cn_scalar(1.0, rng);
        }
        y += cn_scalar(noise_var, rng);
        received.push(y / k_users as f64);
    }
    received
}

// ---------------------------------------------------------------------------
// Aggregation

/// Fixed-order arithmetic mean of the raw messages.
fn exact_mean(messages: &[GradientMessage]) -> Vec<f64> {
    let q_len = messages[0].values.len();
    let k = messages.len() as f64;
    (0..q_len)
        .map(|q| messages.iter().map(|m| m.values[q]).sum::<f64>() / k)
        .collect()
}

/// Produces the global gradient estimate `ĝ` from `K` client messages.
///
/// Ideal transport returns the exact arithmetic mean. Analog transport
/// standardizes each coordinate with the shared statistics
/// (`s_k = (g_k[q] − μ)/ν`), simulates the received `ŝ[q]` with
/// [`transmit`], and applies the plain inverse map
/// `ĝ[q] = μ + ν·K·Re(ŝ[q])/K̃` with `K̃ = K` (the receiver divides by
/// the client count exactly; the imaginary residue is pure distortion
/// and is discarded). A zero standard deviation means every client sent
/// the same constant gradient, so transmission is bypassed and the
/// exact value is used.
pub fn ota_aggregate(
    messages: &[GradientMessage],
    transport: Transport,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>, FlError> {
    let first = messages
        .first()
        .ok_or_else(|| FlError::Inconsistent("no messages to aggregate".into()))?;
    for m in messages {
        if m.values.len() != first.values.len() {
            return Err(FlError::Inconsistent(format!(
                "gradient lengths differ: {} vs {}",
                m.values.len(),
                first.values.len()
            )));
        }
        if m.stats != first.stats {
            return Err(FlError::Inconsistent(
                "normalization statistics differ across clients".into(),
            ));
        }
    }

    let link = match transport {
        Transport::Ideal => return Ok(exact_mean(messages)),
        Transport::Analog(link) => link,
    };
    if messages.len() != link.system.num_airfl {
        return Err(FlError::Inconsistent(format!(
            "{} messages for {} AirFL users",
            messages.len(),
            link.system.num_airfl
        )));
    }
    if link.channels.num_users() != link.system.num_users() {
        return Err(FlError::Inconsistent(format!(
            "channel set covers {} users, system has {}",
            link.channels.num_users(),
            link.system.num_users()
        )));
    }

    let NormStats { mean, std } = first.stats;
    if std == 0.0 {
        return Ok(exact_mean(messages));
    }

    let symbols: Vec<Vec<f64>> = messages
        .iter()
        .map(|m| m.values.iter().map(|&g| (g - mean) / std).collect())
        .collect();
    let received = transmit(&symbols, &link, rng);
    let estimate: Vec<f64> =
        received.iter().map(|s| mean + std * s.re).collect();
    if let Some(bad) = estimate.iter().find(|v| !v.is_finite()) {
        return Err(FlError::NonFinite(format!("aggregate entry {bad}")));
    }
    Ok(estimate)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channel_set, sample_geometry};
    use crate::env::{decode_action, RawAction};
    use crate::metrics::airfl_mse;
    use crate::seeds::stream;
    use rand::Rng;

    fn random_messages(
        clients: usize,
        q_len: usize,
        rng: &mut ChaCha8Rng,
    ) -> Vec<GradientMessage> {
        let gradients = (0..clients)
            .map(|_| (0..q_len).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        encode_messages(gradients)
    }

    #[test]
    fn ideal_mode_is_the_exact_arithmetic_mean() {
        let mut rng = stream(4, "ota-ideal");
        let messages = random_messages(5, 64, &mut rng);
        let out = ota_aggregate(&messages, Transport::Ideal, &mut rng).unwrap();
        for (q, &estimate) in out.iter().enumerate() {
            let manual =
                messages.iter().map(|m| m.values[q]).sum::<f64>() / 5.0;
            assert_eq!(estimate, manual, "coordinate {q} not bitwise-equal");
        }
    }

    #[test]
    fn zero_spread_gradients_bypass_the_channel() {
        let system = SystemConfig::desk();
        let (decision, channels) = aligned_link(&system);
        let constant = vec![vec![0.75; 32]; system.num_airfl];
        let messages = encode_messages(constant);
        assert_eq!(messages[0].stats.std, 0.0);
        let mut rng = stream(8, "ota-bypass");
        let link = AnalogChannel { decision: &decision, channels: &channels, system: &system };
        let out = ota_aggregate(&messages, Transport::Analog(link), &mut rng).unwrap();
        assert_eq!(out, vec![0.75; 32]);
    }

    #[test]
    fn perfect_channel_reproduces_the_exact_mean() {
        let mut system = SystemConfig::desk();
        system.csi_error_var = 0.0;
        system.sic_residual = 0.0;
        system.noise_power = 1e-30;
        let (decision, channels) = aligned_link(&system);

        let mut rng = stream(21, "ota-perfect");
        let messages = random_messages(system.num_airfl, 128, &mut rng);
        let ideal = ota_aggregate(&messages, Transport::Ideal, &mut rng).unwrap();
        let link = AnalogChannel { decision: &decision, channels: &channels, system: &system };
        let analog =
            ota_aggregate(&messages, Transport::Analog(link), &mut rng).unwrap();
        for (a, b) in analog.iter().zip(&ideal) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn empirical_distortion_matches_the_closed_form_mse() {
        let mut system = SystemConfig::desk();
        system.csi_error_var = 0.05;
        system.sic_residual = 0.5;
        let mut rng = stream(33, "ota-oracle");

        // A generic random decision and freshly drawn channels.
        let raw: Vec<f64> = (0..system.action_dim())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let decision = decode_action(&RawAction(raw), &system);
        let geometry = sample_geometry(&system, &mut rng);
        let channels =
            draw_channel_set(&system, &geometry, &decision.positions, &mut rng);

        // Independent unit-variance symbols, Q coordinates.
        let q_len = 20_000;
        let symbols: Vec<Vec<f64>> = (0..system.num_airfl)
            .map(|_| {
                (0..q_len)
                    .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                    .collect()
            })
            .collect();
        let link = AnalogChannel { decision: &decision, channels: &channels, system: &system };
        let received = transmit(&symbols, &link, &mut rng);

        let k = system.num_airfl as f64;
        let empirical = (0..q_len)
            .map(|q| {
                let target: f64 =
                    symbols.iter().map(|s| s[q]).sum::<f64>() / k;
                (received[q] - target).norm_sqr()
            })
            .sum::<f64>()
            / q_len as f64;
        let closed = airfl_mse(&decision, &channels.h_est, &system).total;
        let rel = (empirical - closed).abs() / closed;
        assert!(rel < 0.05, "empirical {empirical} vs closed-form {closed} ({rel:.4})");
    }

    #[test]
    fn transmission_is_deterministic_per_stream() {
        let system = SystemConfig::desk();
        let (decision, channels) = aligned_link(&system);
        let link = AnalogChannel { decision: &decision, channels: &channels, system: &system };
        let symbols =
            vec![vec![0.5; 16], vec![-0.25; 16], vec![1.0; 16]];
        let a = transmit(&symbols, &link, &mut stream(5, "ota-det"));
        let b = transmit(&symbols, &link, &mut stream(5, "ota-det"));
        assert_eq!(a, b);
    }

    #[test]
    fn mismatched_messages_are_rejected() {
        let mut rng = stream(6, "ota-err");
        assert!(matches!(
            ota_aggregate(&[], Transport::Ideal, &mut rng),
            Err(FlError::Inconsistent(_))
        ));
        let mut messages = random_messages(3, 8, &mut rng);
        messages[1].values.pop();
        assert!(matches!(
            ota_aggregate(&messages, Transport::Ideal, &mut rng),
            Err(FlError::Inconsistent(_))
        ));
    }
}
