//! Closed-form performance metrics of the shared uplink and their
//! feasibility checks.
//!
//! One [`Decision`] (beamformer `w`, port positions `x`, powers `p`)
//! against one [`ChannelSet`] yields:
//!
//! * the SIC decode order — users ranked by ascending estimated channel
//!   norm; interference from users ranked **above** (stronger, already
//!   decoded) survives only through the residual fraction `eps_b`, while
//!   users ranked below contribute in full;
//! * per-NOMA-user SINR on the **true** channels:
//!   `γ_n = p_n|wᴴh_n|² / (Σ_weaker p_i|wᴴh_i|² + eps_b·Σ_stronger p_i|wᴴh_i|² + ‖w‖²σ²)`;
//! * the aggregation error of the over-the-air sum on the **estimated**
//!   channels, split into five additive terms (see [`MseBreakdown`]);
//! * computation and hybrid rates, and a constraint report.
//!
//! [`monte_carlo`] estimates the same MSE and received power by simulating
//! the residual superposition signal directly — an independent oracle for
//! the closed forms.

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::ChannelSet;
use crate::config::SystemConfig;

/// Absolute slack used when checking decoded geometry against the
/// aperture/spacing bounds; covers the rounding of the decode map
/// (positions are O(1–10) wavelengths, so this is ~1 part in 10^9).
pub const GEOMETRY_TOL: f64 = 1e-9;

/// One joint resource-allocation decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    /// Receive beamformer `w`, length `L`.
    pub beamformer: Vec<Complex64>,
    /// Port positions `x` in wavelengths, ascending, length `L`.
    pub positions: Vec<f64>,
    /// Per-user transmit powers in watts, AirFL users first, length `K+N`.
    pub powers: Vec<f64>,
}

/// The five additive error terms of the aggregation MSE, their sum, and
/// the received power of the reconstructed signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseBreakdown {
    /// `(1/K²)·Σ_k |wᴴĥ_k·√p_k − 1|²` — signal misalignment.
    pub misalignment: f64,
    /// `(eps_b/K²)·Σ_n p_n·|wᴴĥ_n|²` — residual NOMA interference.
    pub sic_term: f64,
    /// `(1/K²)·Σ_k p_k·‖w‖²·σ_h²` — estimation error on AirFL users.
    pub csi_term: f64,
    /// `(eps_b/K²)·Σ_n p_n·‖w‖²·σ_h²` — estimation error carried by the
    /// residual NOMA interference.
    pub sic_csi_term: f64,
    /// `‖w‖²σ²/K²` — receiver noise.
    pub noise_term: f64,
    /// Sum of the five terms.
    pub total: f64,
    /// `E|ŝ|²` of the reconstructed aggregate.
    pub received_power: f64,
}

/// Everything computed for one decision on one channel set.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsBundle {
    /// SIC rank permutation: `order[r]` is the global user index holding
    /// rank `r` (rank 0 = smallest estimated norm, decoded last).
    pub order: Vec<usize>,
    /// Per-NOMA-user SINR, indexed by NOMA-local index `n` (global `K+n`).
    pub sinr: Vec<f64>,
    /// Per-NOMA-user rates in bit/s.
    pub rates: Vec<f64>,
    /// Sum of the NOMA rates.
    pub noma_sum_rate: f64,
    /// Aggregation error breakdown.
    pub mse: MseBreakdown,
    /// Computation rate of the aggregation in bit/s.
    pub airfl_rate: f64,
    /// Weighted mixture of data and computation rates in bit/s.
    pub hybrid_rate: f64,
}

/// Feasibility report for one decision and its metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    /// Per NOMA user: achieved rate ≥ the configured minimum.
    pub per_user_rate_ok: Vec<bool>,
    /// Aggregation MSE within the configured cap.
    pub mse_ok: bool,
    /// Positions inside the aperture, ascending, spacing at least the
    /// configured minimum (within [`GEOMETRY_TOL`]).
    pub geometry_ok: bool,
    /// All powers within `[0, max_power]`.
    pub power_ok: bool,
    /// The SIC rank permutation the metrics were computed under.
    pub order: Vec<usize>,
    /// Conjunction of every flag above.
    pub all_ok: bool,
}

/// Metric evaluation failures.
#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    /// The beamformer is exactly zero: SINR is 0/0-undefined. Callers
    /// translate this into the penalty reward.
    #[error("beamformer is zero; SINR undefined")]
    ZeroBeamformer,
    /// The MSE vanished (requires zero noise power, which configuration
    /// validation excludes), so the computation-rate ratio is undefined.
    #[error("aggregation MSE is zero; computation rate undefined")]
    DegenerateMse,
}

// ---------------------------------------------------------------------------
// Elementary pieces

/// `wᴴh` for one channel vector.
pub fn beam_gain(w: &[Complex64], h: &[Complex64]) -> Complex64 {
    debug_assert_eq!(w.len(), h.len());
    w.iter().zip(h).map(|(wi, hi)| wi.conj() * hi).sum()
}

/// `‖w‖²`.
fn norm_sq(w: &[Complex64]) -> f64 {
    w.iter().map(|wi| wi.norm_sqr()).sum()
}

/// SIC rank permutation: user indices sorted by ascending `‖ĥ_i‖²`, ties
/// broken by ascending index. `order[r]` holds rank `r`; the strongest
/// user (last entry) is decoded first.
pub fn sic_order(h_est: &[Vec<Complex64>]) -> Vec<usize> {
    assert!(!h_est.is_empty(), "sic_order needs at least one user");
    let norms: Vec<f64> = h_est.iter().map(|h| norm_sq(h)).collect();
    let mut order: Vec<usize> = (0..h_est.len()).collect();
    order.sort_by(|&a, &b| norms[a].total_cmp(&norms[b]).then(a.cmp(&b)));
    order
}

/// Per-NOMA-user SINR on true channels under the given decode order.
///
/// Users ranked below a NOMA user interfere at full power (not yet
/// decoded); users ranked above have been decoded and leave only the
/// `sic_residual` fraction. Entry `n` of the result is for global user
/// `K+n`.
pub fn noma_sinr(
    dec: &Decision,
    h_true: &[Vec<Complex64>],
    order: &[usize],
    cfg: &SystemConfig,
) -> Result<Vec<f64>, MetricsError> {
    let users = h_true.len();
    assert_eq!(dec.powers.len(), users, "powers/user count mismatch");
    assert_eq!(order.len(), users, "order/user count mismatch");

    let w_sq = norm_sq(&dec.beamformer);
    if w_sq == 0.0 {
        return Err(MetricsError::ZeroBeamformer);
    }

    // Received power of each user through the beamformer.
    let rx: Vec<f64> = (0..users)
        .map(|i| dec.powers[i] * beam_gain(&dec.beamformer, &h_true[i]).norm_sqr())
        .collect();

    // Prefix sums over the ranked sequence: prefix[r] = Σ_{rank < r} rx.
    let mut prefix = Vec::with_capacity(users + 1);
    prefix.push(0.0);
    for &u in order {
        prefix.push(prefix.last().unwrap() + rx[u]);
    }
    let total: f64 = prefix[users];

    let mut rank = vec![0usize; users];
    for (r, &u) in order.iter().enumerate() {
        rank[u] = r;
    }

    let noise = w_sq * cfg.noise_power;
    let sinr = (cfg.num_airfl..users)
        .map(|u| {
            let r = rank[u];
            let weaker = prefix[r];
            let stronger = total - prefix[r + 1];
            rx[u] / (weaker + cfg.sic_residual * stronger + noise)
        })
        .collect();
    Ok(sinr)
}

/// Shannon rates per NOMA user and their sum, in bit/s.
pub fn noma_rates(sinr: &[f64], cfg: &SystemConfig) -> (Vec<f64>, f64) {
    let rates: Vec<f64> = sinr
        .iter()
        .map(|&g| {
            debug_assert!(g >= 0.0);
            cfg.bandwidth * (1.0 + g).log2()
        })
        .collect();
    let sum = rates.iter().sum();
    (rates, sum)
}

/// Closed-form aggregation error of the over-the-air sum, on estimated
/// channels, together with the received power `E|ŝ|²`.
pub fn airfl_mse(dec: &Decision, h_est: &[Vec<Complex64>], cfg: &SystemConfig) -> MseBreakdown {
    let k = cfg.num_airfl;
    let users = h_est.len();
    assert_eq!(dec.powers.len(), users, "powers/user count mismatch");
    assert!(k >= 1 && k <= users, "AirFL count out of range");

    let k_sq = (k * k) as f64;
    let w_sq = norm_sq(&dec.beamformer);

    let mut misalignment = 0.0;
    let mut airfl_power_sum = 0.0; // Σ_k p_k
    let mut airfl_rx = 0.0; // Σ_k p_k |wᴴĥ_k|²
    for (h, &p) in h_est.iter().zip(&dec.powers).take(k) {
        let g = beam_gain(&dec.beamformer, h);
        misalignment += (g * p.sqrt() - 1.0).norm_sqr();
        airfl_power_sum += p;
        airfl_rx += p * g.norm_sqr();
    }

    let mut noma_power_sum = 0.0; // Σ_n p_n
    let mut noma_rx = 0.0; // Σ_n p_n |wᴴĥ_n|²
    for (h, &p) in h_est.iter().zip(&dec.powers).skip(k) {
        let g = beam_gain(&dec.beamformer, h);
        noma_power_sum += p;
        noma_rx += p * g.norm_sqr();
    }

    let eps_b = cfg.sic_residual;
    let sigma_h2 = cfg.csi_error_var;
    let misalignment = misalignment / k_sq;
    let sic_term = eps_b * noma_rx / k_sq;
    let csi_term = airfl_power_sum * w_sq * sigma_h2 / k_sq;
    let sic_csi_term = eps_b * noma_power_sum * w_sq * sigma_h2 / k_sq;
    let noise_term = w_sq * cfg.noise_power / k_sq;
    let received_power = (airfl_rx
        + airfl_power_sum * w_sq * sigma_h2
        + eps_b * (noma_rx + noma_power_sum * w_sq * sigma_h2)
        + w_sq * cfg.noise_power)
        / k_sq;

    MseBreakdown {
        misalignment,
        sic_term,
        csi_term,
        sic_csi_term,
        noise_term,
        total: misalignment + sic_term + csi_term + sic_csi_term + noise_term,
        received_power,
    }
}

/// Computation rate of the aggregation:
/// `B·log2(max(E|ŝ|²/MSE, 1))`. The clamp keeps the rate at zero when the
/// reconstruction carries less structure than its own error.
pub fn airfl_rate(mb: &MseBreakdown, cfg: &SystemConfig) -> Result<f64, MetricsError> {
    if mb.total.is_nan() || mb.total <= 0.0 {
        return Err(MetricsError::DegenerateMse);
    }
    let ratio = (mb.received_power / mb.total).max(1.0);
    Ok(cfg.bandwidth * ratio.log2())
}

/// Weighted mixture of the data sum rate and the computation rate.
pub fn hybrid_rate(r_noma: f64, r_airfl: f64, cfg: &SystemConfig) -> f64 {
    (1.0 - cfg.hybrid_weight) * r_noma + cfg.hybrid_weight * r_airfl
}

/// Computes the full metrics bundle for one decision on one channel set.
pub fn evaluate(
    dec: &Decision,
    channels: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<MetricsBundle, MetricsError> {
    let order = sic_order(&channels.h_est);
    let sinr = noma_sinr(dec, &channels.h_true, &order, cfg)?;
    let (rates, noma_sum_rate) = noma_rates(&sinr, cfg);
    let mse = airfl_mse(dec, &channels.h_est, cfg);
    let airfl = airfl_rate(&mse, cfg)?;
    let hybrid = hybrid_rate(noma_sum_rate, airfl, cfg);
    Ok(MetricsBundle {
        order,
        sinr,
        rates,
        noma_sum_rate,
        mse,
        airfl_rate: airfl,
        hybrid_rate: hybrid,
    })
}

/// Checks every constraint of the optimization problem for one decision
/// and the metrics computed from it.
pub fn check_constraints(
    dec: &Decision,
    bundle: &MetricsBundle,
    cfg: &SystemConfig,
) -> ConstraintReport {
    let per_user_rate_ok: Vec<bool> = bundle.rates.iter().map(|&r| r >= cfg.rate_min).collect();
    let mse_ok = bundle.mse.total <= cfg.mse_limit;

    let x = &dec.positions;
    let mut geometry_ok = x.len() == cfg.num_ports
        && x.first().is_some_and(|&x0| x0 >= -GEOMETRY_TOL)
        && x.last().is_some_and(|&xl| xl <= cfg.aperture + GEOMETRY_TOL);
    for pair in x.windows(2) {
        geometry_ok &= pair[1] - pair[0] >= cfg.min_spacing - GEOMETRY_TOL;
    }

    let power_ok = dec.powers.len() == cfg.num_users()
        && dec.powers.iter().all(|&p| (0.0..=cfg.max_power).contains(&p));

    let all_ok = per_user_rate_ok.iter().all(|&b| b) && mse_ok && geometry_ok && power_ok;
    ConstraintReport {
        per_user_rate_ok,
        mse_ok,
        geometry_ok,
        power_ok,
        order: bundle.order.clone(),
        all_ok,
    }
}

// ---------------------------------------------------------------------------

/// Direct simulation of the residual aggregation signal — the independent
/// oracle for [`airfl_mse`].
pub mod monte_carlo {
    use super::*;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Sample moments of the reconstructed aggregate.
    #[derive(Debug, Clone, Copy)]
    pub struct McEstimate {
        /// Empirical `E|ŝ − s|²`.
        pub mse: f64,
        /// Empirical `E|ŝ|²`.
        pub received_power: f64,
    }

    fn cn_scalar(variance: f64, rng: &mut ChaCha8Rng) -> Complex64 {
        let s = (variance / 2.0).sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(s * re, s * im)
    }

    /// Simulates the residual superposition
    /// `ŷ = Σ_k wᴴ(ĥ_k+e_k)√p_k·s_k + √eps_b·Σ_n wᴴ(ĥ_n+e_n)√p_n·s_n + wᴴz`
    /// with unit-variance complex symbols, full fresh CSI-error vectors and
    /// receiver noise per sample, and returns the sample moments of
    /// `ŝ = ŷ/K` against the ideal mean `s = (1/K)Σ_k s_k`.
    ///
    /// This path shares no algebra with [`airfl_mse`]: the error enters as
    /// an explicit `L`-vector through the beamformer, not as a variance
    /// term.
    pub fn simulate_mse(
        dec: &Decision,
        h_est: &[Vec<Complex64>],
        cfg: &SystemConfig,
        samples: usize,
        rng: &mut ChaCha8Rng,
    ) -> McEstimate {
        assert!(samples > 0);
        let k = cfg.num_airfl;
        let users = h_est.len();
        let w = &dec.beamformer;
        let ports = w.len();

        // Deterministic parts.
        let est_gain: Vec<Complex64> = h_est.iter().map(|h| beam_gain(w, h)).collect();
        let amp: Vec<f64> = dec.powers.iter().map(|p| p.sqrt()).collect();
        let residual_amp = cfg.sic_residual.sqrt();

        let project_fresh_error = |rng: &mut ChaCha8Rng| -> Complex64 {
            // wᴴe with e ~ CN(0, σ_h²·I) drawn entry by entry.
            let mut acc = Complex64::new(0.0, 0.0);
            for wl in w.iter().take(ports) {
                acc += wl.conj() * cn_scalar(cfg.csi_error_var, rng);
            }
            acc
        };

        let mut acc_mse = 0.0;
        let mut acc_pow = 0.0;
        for _ in 0..samples {
            let mut y = Complex64::new(0.0, 0.0);
            let mut ideal = Complex64::new(0.0, 0.0);
            for u in 0..users {
                let symbol = cn_scalar(1.0, rng);
                let gain = est_gain[u] + project_fresh_error(rng);
                if u < k {
                    y += gain * amp[u] * symbol;
                    ideal += symbol;
                } else {
                    y += residual_amp * gain * amp[u] * symbol;
                }
            }
            // Receiver noise through the beamformer, entry by entry.
            for wl in w.iter().take(ports) {
                y += wl.conj() * cn_scalar(cfg.noise_power, rng);
            }
            let s_hat = y / k as f64;
            let s_bar = ideal / k as f64;
            acc_mse += (s_hat - s_bar).norm_sqr();
            acc_pow += s_hat.norm_sqr();
        }
        McEstimate {
            mse: acc_mse / samples as f64,
            received_power: acc_pow / samples as f64,
        }
    }
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channel_set, sample_geometry};
    use crate::seeds;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// A random in-box decision for the desk configuration.
    fn random_decision(cfg: &SystemConfig, rng: &mut ChaCha8Rng) -> Decision {
        let l = cfg.num_ports;
        let beamformer = (0..l)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let mut positions: Vec<f64> = (0..l).map(|_| rng.random_range(0.0..1.0)).collect();
        positions.sort_by(f64::total_cmp);
        let span = cfg.position_span();
        let positions = positions
            .iter()
            .enumerate()
            .map(|(i, u)| u * span + i as f64 * cfg.min_spacing)
            .collect();
        let powers = (0..cfg.num_users())
            .map(|_| rng.random_range(0.0..cfg.max_power))
            .collect();
        Decision {
            beamformer,
            positions,
            powers,
        }
    }

    fn random_case(seed: u64) -> (SystemConfig, Decision, ChannelSet) {
        let mut cfg = SystemConfig::desk();
        let mut rng = seeds::stream(seed, "metrics-case");
        cfg.sic_residual = rng.random_range(0.0..=1.0);
        cfg.csi_error_var = rng.random_range(0.0..0.1);
        let geom = sample_geometry(&cfg, &mut rng);
        let dec = random_decision(&cfg, &mut rng);
        let channels = draw_channel_set(&cfg, &geom, &dec.positions, &mut rng);
        (cfg, dec, channels)
    }

    // -- SIC order ----------------------------------------------------------

    #[test]
    fn sic_order_sorts_ascending_with_index_ties() {
        let h = vec![
            vec![c(0.5, 0.0)], // norm² 0.25
            vec![c(0.0, 2.0)], // norm² 4.0
            vec![c(1.0, 0.0)], // norm² 1.0
        ];
        assert_eq!(sic_order(&h), vec![0, 2, 1]);

        let equal = vec![vec![c(1.0, 0.0)]; 4];
        assert_eq!(sic_order(&equal), vec![0, 1, 2, 3]);
    }

    #[test]
    fn sic_order_matches_selection_sort_oracle() {
        let mut rng = seeds::stream(17, "sic-oracle");
        for _ in 0..50 {
            let users = rng.random_range(1..9);
            let ports = rng.random_range(1..5);
            let h: Vec<Vec<Complex64>> = (0..users)
                .map(|_| {
                    (0..ports)
                        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                        .collect()
                })
                .collect();

            // Independent oracle: repeatedly select the lowest-norm (then
            // lowest-index) remaining user.
            let norms: Vec<f64> = h
                .iter()
                .map(|v| v.iter().map(|x| x.norm_sqr()).sum::<f64>())
                .collect();
            let mut remaining: Vec<usize> = (0..users).collect();
            let mut expect = Vec::new();
            while !remaining.is_empty() {
                let (pos, _) = remaining
                    .iter()
                    .enumerate()
                    .min_by(|(_, &a), (_, &b)| norms[a].total_cmp(&norms[b]).then(a.cmp(&b)))
                    .unwrap();
                expect.push(remaining.remove(pos));
            }
            assert_eq!(sic_order(&h), expect);
        }
    }

    // -- SINR ----------------------------------------------------------------

    #[test]
    fn single_user_sinr_collapses_to_snr() {
        // One user total (treated as NOMA by setting the AirFL count to 0
        // for the formula check): γ = p|wᴴh|²/(‖w‖²σ²) = 4.
        let cfg = SystemConfig {
            num_airfl: 0,
            num_noma: 1,
            noise_power: 1.0,
            sic_residual: 0.0,
            ..SystemConfig::default()
        };
        let dec = Decision {
            beamformer: vec![c(1.0, 0.0)],
            positions: vec![0.0],
            powers: vec![1.0],
        };
        let h = vec![vec![c(2.0, 0.0)]];
        let order = sic_order(&h);
        let sinr = noma_sinr(&dec, &h, &order, &cfg).unwrap();
        assert_relative_eq!(sinr[0], 4.0, max_relative = 1e-12);
    }

    #[test]
    fn sinr_is_scale_invariant_in_the_beamformer() {
        let (cfg, dec, channels) = random_case(23);
        let order = sic_order(&channels.h_est);
        let base = noma_sinr(&dec, &channels.h_true, &order, &cfg).unwrap();
        for scale in [-3.0, 0.01, 10.0] {
            let scaled = Decision {
                beamformer: dec.beamformer.iter().map(|w| w * scale).collect(),
                ..dec.clone()
            };
            let got = noma_sinr(&scaled, &channels.h_true, &order, &cfg).unwrap();
            for (a, b) in got.iter().zip(&base) {
                assert_relative_eq!(a, b, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn sinr_matches_interference_set_enumeration() {
        // Oracle that builds the interference sets explicitly from the
        // rank permutation instead of using prefix sums.
        for seed in [1u64, 2, 3, 4, 5] {
            let (cfg, dec, channels) = random_case(seed);
            let order = sic_order(&channels.h_est);
            let got = noma_sinr(&dec, &channels.h_true, &order, &cfg).unwrap();

            let users = cfg.num_users();
            let mut rank = vec![0; users];
            for (r, &u) in order.iter().enumerate() {
                rank[u] = r;
            }
            let w_sq: f64 = dec.beamformer.iter().map(|w| w.norm_sqr()).sum();
            for (n, &sinr_n) in got.iter().enumerate() {
                let u = cfg.num_airfl + n;
                let mut weaker = 0.0;
                let mut stronger = 0.0;
                for j in 0..users {
                    if j == u {
                        continue;
                    }
                    let rx =
                        dec.powers[j] * beam_gain(&dec.beamformer, &channels.h_true[j]).norm_sqr();
                    if rank[j] < rank[u] {
                        weaker += rx;
                    } else {
                        stronger += rx;
                    }
                }
                let num = dec.powers[u] * beam_gain(&dec.beamformer, &channels.h_true[u]).norm_sqr();
                let expect =
                    num / (weaker + cfg.sic_residual * stronger + w_sq * cfg.noise_power);
                assert_relative_eq!(sinr_n, expect, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn zero_beamformer_is_an_error() {
        let (cfg, mut dec, channels) = random_case(29);
        for w in dec.beamformer.iter_mut() {
            *w = c(0.0, 0.0);
        }
        let order = sic_order(&channels.h_est);
        assert_eq!(
            noma_sinr(&dec, &channels.h_true, &order, &cfg),
            Err(MetricsError::ZeroBeamformer)
        );
    }

    #[test]
    fn sinr_is_non_increasing_in_the_sic_residual() {
        let (mut cfg, dec, channels) = random_case(31);
        let order = sic_order(&channels.h_est);
        let mut last: Option<Vec<f64>> = None;
        for eps in [0.0, 0.25, 0.5, 0.75, 1.0] {
            cfg.sic_residual = eps;
            let sinr = noma_sinr(&dec, &channels.h_true, &order, &cfg).unwrap();
            if let Some(prev) = &last {
                for (now, before) in sinr.iter().zip(prev) {
                    assert!(now <= before);
                }
            }
            last = Some(sinr);
        }
    }

    // -- Rates ----------------------------------------------------------------

    #[test]
    fn rate_reference_points() {
        let cfg = SystemConfig { bandwidth: 1.0, ..SystemConfig::default() };
        let (rates, sum) = noma_rates(&[4.0, 0.0], &cfg);
        assert_relative_eq!(rates[0], 5f64.log2(), max_relative = 1e-15);
        assert_eq!(rates[1], 0.0);
        assert_relative_eq!(sum, 5f64.log2(), max_relative = 1e-15);
    }

    #[test]
    fn rates_scale_linearly_in_bandwidth() {
        let mut cfg = SystemConfig { bandwidth: 1.0, ..SystemConfig::default() };
        let (unit, _) = noma_rates(&[0.7, 4.0, 11.0], &cfg);
        cfg.bandwidth = 1e6;
        let (scaled, _) = noma_rates(&[0.7, 4.0, 11.0], &cfg);
        for (s, u) in scaled.iter().zip(&unit) {
            assert_eq!(*s, 1e6 * u);
        }
    }

    // -- MSE -------------------------------------------------------------------

    /// The perfectly aligned single-user instance: all terms but noise are 0.
    fn aligned_instance() -> (SystemConfig, Decision, Vec<Vec<Complex64>>) {
        let cfg = SystemConfig {
            num_airfl: 1,
            num_noma: 1,
            num_ports: 1,
            noise_power: 0.01,
            sic_residual: 0.0,
            csi_error_var: 0.0,
            ..SystemConfig::default()
        };
        let dec = Decision {
            beamformer: vec![c(1.0, 0.0)],
            positions: vec![0.0],
            powers: vec![1.0, 0.0],
        };
        let h_est = vec![vec![c(1.0, 0.0)], vec![c(0.3, 0.1)]];
        (cfg, dec, h_est)
    }

    #[test]
    fn mse_perfect_alignment_leaves_noise_only() {
        let (cfg, dec, h_est) = aligned_instance();
        let mb = airfl_mse(&dec, &h_est, &cfg);
        assert_eq!(mb.misalignment, 0.0);
        assert_eq!(mb.sic_term, 0.0);
        assert_eq!(mb.csi_term, 0.0);
        assert_eq!(mb.sic_csi_term, 0.0);
        assert_relative_eq!(mb.noise_term, 0.01, max_relative = 1e-15);
        assert_relative_eq!(mb.total, 0.01, max_relative = 1e-15);
        assert_relative_eq!(mb.received_power, 1.01, max_relative = 1e-15);
    }

    #[test]
    fn perfect_sic_zeroes_the_sic_terms() {
        let (mut cfg, dec, channels) = random_case(37);
        cfg.sic_residual = 0.0;
        let mb = airfl_mse(&dec, &channels.h_est, &cfg);
        assert_eq!(mb.sic_term, 0.0);
        assert_eq!(mb.sic_csi_term, 0.0);
    }

    #[test]
    fn mse_total_is_the_sum_of_terms() {
        for seed in 40..48 {
            let (cfg, dec, channels) = random_case(seed);
            let mb = airfl_mse(&dec, &channels.h_est, &cfg);
            let sum =
                mb.misalignment + mb.sic_term + mb.csi_term + mb.sic_csi_term + mb.noise_term;
            assert_relative_eq!(mb.total, sum, max_relative = 1e-12);
            assert!(mb.misalignment >= 0.0 && mb.sic_term >= 0.0);
            assert!(mb.csi_term >= 0.0 && mb.sic_csi_term >= 0.0 && mb.noise_term >= 0.0);
        }
    }

    #[test]
    fn mse_terms_are_monotone_in_the_impairments() {
        let (mut cfg, dec, channels) = random_case(51);
        let mut last_total = -1.0;
        for eps in [0.0, 0.3, 0.6, 1.0] {
            cfg.sic_residual = eps;
            let mb = airfl_mse(&dec, &channels.h_est, &cfg);
            assert!(mb.total >= last_total);
            last_total = mb.total;
        }

        cfg.sic_residual = 0.5;
        cfg.csi_error_var = 0.02;
        let base = airfl_mse(&dec, &channels.h_est, &cfg);
        cfg.csi_error_var = 0.05;
        let bumped = airfl_mse(&dec, &channels.h_est, &cfg);
        assert!(bumped.csi_term > base.csi_term);
        assert!(bumped.sic_csi_term > base.sic_csi_term);
        // Linearity in σ_h²: term ratios equal the variance ratio.
        assert_relative_eq!(bumped.csi_term / base.csi_term, 2.5, max_relative = 1e-9);
        assert_relative_eq!(bumped.sic_csi_term / base.sic_csi_term, 2.5, max_relative = 1e-9);
    }

    #[test]
    fn degenerate_perfect_case_is_pure_noise() {
        // σ_h² = 0, eps_b = 0, wᴴĥ_k·√p_k = 1 for all k ⇒ MSE = ‖w‖²σ²/K².
        let cfg = SystemConfig {
            num_airfl: 3,
            num_noma: 1,
            num_ports: 2,
            noise_power: 0.25,
            sic_residual: 0.0,
            csi_error_var: 0.0,
            ..SystemConfig::default()
        };
        let w = vec![c(0.6, 0.0), c(0.8, 0.0)]; // ‖w‖² = 1
        let h_unit = vec![c(0.6, 0.0), c(0.8, 0.0)]; // wᴴĥ = 1
        let dec = Decision {
            beamformer: w,
            positions: vec![0.0, 0.5],
            powers: vec![1.0, 1.0, 1.0, 0.7],
        };
        let h_est = vec![h_unit.clone(), h_unit.clone(), h_unit.clone(), h_unit];
        let mb = airfl_mse(&dec, &h_est, &cfg);
        assert_relative_eq!(mb.total, 0.25 / 9.0, max_relative = 1e-12);
    }

    #[test]
    fn closed_form_matches_monte_carlo_oracle() {
        let (cfg, dec, channels) = random_case(61);
        let mb = airfl_mse(&dec, &channels.h_est, &cfg);
        let mut rng = seeds::stream(62, "mse-mc");
        let est = monte_carlo::simulate_mse(&dec, &channels.h_est, &cfg, 100_000, &mut rng);
        assert_relative_eq!(est.mse, mb.total, max_relative = 0.02);
        assert_relative_eq!(est.received_power, mb.received_power, max_relative = 0.02);
    }

    // -- Rates from MSE, hybrid --------------------------------------------------

    #[test]
    fn airfl_rate_reference_points() {
        let (cfg, dec, h_est) = aligned_instance();
        let mut unit_cfg = cfg.clone();
        unit_cfg.bandwidth = 1.0;
        let mb = airfl_mse(&dec, &h_est, &unit_cfg);
        let rate = airfl_rate(&mb, &unit_cfg).unwrap();
        assert_relative_eq!(rate, 101f64.log2(), max_relative = 1e-12);

        // Received power equal to the MSE: clamped to zero rate.
        let flat = MseBreakdown {
            misalignment: 0.0,
            sic_term: 0.0,
            csi_term: 0.0,
            sic_csi_term: 0.0,
            noise_term: 0.5,
            total: 0.5,
            received_power: 0.5,
        };
        assert_eq!(airfl_rate(&flat, &unit_cfg).unwrap(), 0.0);

        let zero = MseBreakdown { total: 0.0, ..flat };
        assert_eq!(airfl_rate(&zero, &unit_cfg), Err(MetricsError::DegenerateMse));
    }

    #[test]
    fn airfl_rate_matches_the_snr_form() {
        // 1 + (E|ŝ|² − MSE)/MSE must equal E|ŝ|²/MSE.
        for seed in 70..75 {
            let (mut cfg, dec, channels) = random_case(seed);
            cfg.bandwidth = 1.0;
            let mb = airfl_mse(&dec, &channels.h_est, &cfg);
            if mb.received_power <= mb.total {
                continue;
            }
            let direct = airfl_rate(&mb, &cfg).unwrap();
            let snr_form = (1.0 + (mb.received_power - mb.total) / mb.total).log2();
            assert_relative_eq!(direct, snr_form, max_relative = 1e-12);
        }
    }

    #[test]
    fn hybrid_rate_boundaries_are_exact() {
        let mut cfg = SystemConfig::default();
        let r_noma = 2.321_928_094_887_362;
        let r_airfl = 6.65821148275179;
        cfg.hybrid_weight = 0.0;
        assert_eq!(hybrid_rate(r_noma, r_airfl, &cfg), r_noma);
        cfg.hybrid_weight = 1.0;
        assert_eq!(hybrid_rate(r_noma, r_airfl, &cfg), r_airfl);
        cfg.hybrid_weight = 0.5;
        assert_relative_eq!(
            hybrid_rate(r_noma, r_airfl, &cfg),
            4.490069788819576,
            max_relative = 1e-12
        );
    }

    // -- Constraints ---------------------------------------------------------------

    #[test]
    fn constraint_report_agrees_with_direct_reevaluation() {
        for seed in 80..90 {
            let (cfg, dec, channels) = random_case(seed);
            let bundle = evaluate(&dec, &channels, &cfg).unwrap();
            let report = check_constraints(&dec, &bundle, &cfg);

            for (n, &flag) in report.per_user_rate_ok.iter().enumerate() {
                assert_eq!(flag, bundle.rates[n] >= cfg.rate_min);
            }
            assert_eq!(report.mse_ok, bundle.mse.total <= cfg.mse_limit);
            let spacing_ok = dec
                .positions
                .windows(2)
                .all(|p| p[1] - p[0] >= cfg.min_spacing - GEOMETRY_TOL);
            let inside = dec.positions[0] >= -GEOMETRY_TOL
                && *dec.positions.last().unwrap() <= cfg.aperture + GEOMETRY_TOL;
            assert_eq!(report.geometry_ok, spacing_ok && inside);
            assert_eq!(
                report.power_ok,
                dec.powers.iter().all(|&p| (0.0..=cfg.max_power).contains(&p))
            );
            let expect_all = report.per_user_rate_ok.iter().all(|&b| b)
                && report.mse_ok
                && report.geometry_ok
                && report.power_ok;
            assert_eq!(report.all_ok, expect_all);
            assert_eq!(report.order, bundle.order);
        }
    }

    #[test]
    fn raising_the_rate_floor_fails_the_report() {
        let (mut cfg, dec, channels) = random_case(91);
        let bundle = evaluate(&dec, &channels, &cfg).unwrap();
        cfg.rate_min = bundle.rates.iter().cloned().fold(0.0, f64::max) * 2.0 + 1.0;
        let report = check_constraints(&dec, &bundle, &cfg);
        assert!(report.per_user_rate_ok.iter().any(|&b| !b));
        assert!(!report.all_ok);
    }
}
