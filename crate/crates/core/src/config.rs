//! System configuration: every physical and protocol constant of the
//! simulated uplink, with validation and two ready-made presets.
//!
//! Conventions:
//!
//! * All radio quantities are stored in **linear** units (watts, Hz,
//!   dimensionless gains). Helpers [`db_to_linear`] / [`dbm_to_watts`]
//!   convert the dB/dBm figures usually quoted in link budgets.
//! * Antenna-port positions, the aperture and the minimum spacing are
//!   expressed in carrier wavelengths (`wavelength` defaults to 1), while
//!   user distances are in meters; the two scales never mix — positions
//!   only enter steering phases, distances only enter path loss.
//! * Users are indexed with the federated-learning (AirFL) users first:
//!   global indices `0..num_airfl` are AirFL, `num_airfl..num_users()`
//!   are NOMA.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Converts a dB figure to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a dBm figure to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// All physical and protocol constants of one simulated uplink.
///
/// `Default` is the full-scale urban setup; [`SystemConfig::desk`] is a
/// small normalized setup for fast experiments and tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Number of AirFL (over-the-air aggregation) users, `K`.
    pub num_airfl: usize,
    /// Number of NOMA data users, `N`.
    pub num_noma: usize,
    /// Number of fluid-antenna ports at the receiver, `L`.
    pub num_ports: usize,

    /// Aperture: total admissible span of port positions, in wavelengths (`X`).
    pub aperture: f64,
    /// Minimum spacing between adjacent ports, in wavelengths (`X0`).
    pub min_spacing: f64,
    /// Carrier wavelength; positions are quoted in multiples of this.
    pub wavelength: f64,

    /// Rician factor `kappa_r` (linear): LoS-to-NLoS power ratio.
    pub rician_k: f64,
    /// Reference path gain of the LoS component at 1 m (`A_L`, linear).
    pub gain_los: f64,
    /// Reference path gain of the NLoS component at 1 m (`A_N`, linear).
    pub gain_nlos: f64,
    /// LoS path-loss exponent `alpha_L`.
    pub alpha_los: f64,
    /// NLoS path-loss exponent `alpha_N`.
    pub alpha_nlos: f64,

    /// Distance interval for NOMA users, meters `[lo, hi]`.
    pub d_noma_range: [f64; 2],
    /// Distance interval for AirFL users, meters `[lo, hi]`.
    pub d_airfl_range: [f64; 2],

    /// Bandwidth in Hz (`B`).
    pub bandwidth: f64,
    /// Receiver noise power in watts (`sigma2`).
    pub noise_power: f64,
    /// Per-user maximum transmit power in watts (`P_max`).
    pub max_power: f64,

    /// Residual interference fraction after SIC, `eps_b` in [0, 1]
    /// (0 = perfect cancellation, 1 = no cancellation).
    pub sic_residual: f64,
    /// Per-entry variance of the additive channel-estimation error,
    /// `sigma_h2` (shared by all users).
    pub csi_error_var: f64,

    /// Hybrid objective weight `lambda_w` in [0, 1]: 0 = pure NOMA sum
    /// rate, 1 = pure AirFL computation rate.
    pub hybrid_weight: f64,
    /// Per-NOMA-user minimum rate in bit/s (`R_min`).
    pub rate_min: f64,
    /// Maximum allowed aggregation MSE (`eps0`).
    pub mse_limit: f64,
    /// Reward issued when the quality-of-service constraints fail (`r_p`).
    pub penalty_reward: f64,
}

impl Default for SystemConfig {
    /// Full-scale urban setup: kilometer-class path loss, 1 MHz band,
    /// −114 dBm noise, 36 dBm transmit power, 21.98 dB reference loss.
    fn default() -> Self {
        SystemConfig {
            num_airfl: 5,
            num_noma: 3,
            num_ports: 6,
            aperture: 8.0,
            min_spacing: 0.5,
            wavelength: 1.0,
            rician_k: 7.0,
            gain_los: db_to_linear(-21.98),
            gain_nlos: db_to_linear(-21.98),
            alpha_los: 2.09,
            alpha_nlos: 3.67,
            d_noma_range: [20.0, 40.0],
            d_airfl_range: [40.0, 100.0],
            bandwidth: 1e6,
            noise_power: dbm_to_watts(-114.0),
            max_power: dbm_to_watts(36.0),
            sic_residual: 0.0,
            csi_error_var: 0.0,
            hybrid_weight: 0.5,
            rate_min: 1e6,
            mse_limit: 1.0,
            penalty_reward: -1.0,
        }
    }
}

impl SystemConfig {
    /// Small normalized setup for fast experiments, sweeps and tests:
    /// unit reference gains, meter-class distances and unit bandwidth so
    /// that beamformers with O(1) entries can actually align the
    /// aggregation signal. Counts are reduced to 4 ports / 3 AirFL /
    /// 2 NOMA users.
    pub fn desk() -> Self {
        SystemConfig {
            num_airfl: 3,
            num_noma: 2,
            num_ports: 4,
            gain_los: 1.0,
            gain_nlos: 1.0,
            d_noma_range: [2.0, 4.0],
            d_airfl_range: [4.0, 10.0],
            bandwidth: 1.0,
            noise_power: 1e-8,
            max_power: 1.0,
            rate_min: 0.1,
            ..SystemConfig::default()
        }
    }

    /// Total user count `K + N`.
    pub fn num_users(&self) -> usize {
        self.num_airfl + self.num_noma
    }

    /// Dimension of the raw action box: `3L` (beamformer re/im + position
    /// controls) plus one power control per user.
    pub fn action_dim(&self) -> usize {
        3 * self.num_ports + self.num_users()
    }

    /// Dimension of the observation vector: normalized distance and angle
    /// per user.
    pub fn state_dim(&self) -> usize {
        2 * self.num_users()
    }

    /// Largest configured user distance; used to normalize observations.
    pub fn max_distance(&self) -> f64 {
        self.d_noma_range[1].max(self.d_airfl_range[1])
    }

    /// Span left for the position order statistics after reserving the
    /// minimum spacing between adjacent ports: `X − (L−1)·X0`.
    pub fn position_span(&self) -> f64 {
        self.aperture - (self.num_ports as f64 - 1.0) * self.min_spacing
    }

    /// Checks every documented invariant, reporting the first violation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn ensure(ok: bool, what: &str) -> Result<(), ConfigError> {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Invalid(what.to_string()))
            }
        }
        ensure(self.num_airfl >= 1, "num_airfl must be at least 1")?;
        ensure(self.num_noma >= 1, "num_noma must be at least 1")?;
        ensure(self.num_ports >= 1, "num_ports must be at least 1")?;
        ensure(
            self.aperture.is_finite() && self.aperture > 0.0,
            "aperture must be positive",
        )?;
        ensure(
            self.min_spacing.is_finite() && self.min_spacing > 0.0,
            "min_spacing must be positive",
        )?;
        ensure(
            self.position_span() >= 0.0,
            "aperture must admit num_ports ports at min_spacing: X >= (L-1)*X0",
        )?;
        ensure(self.wavelength > 0.0, "wavelength must be positive")?;
        ensure(self.rician_k >= 0.0, "rician_k must be non-negative")?;
        ensure(self.gain_los > 0.0, "gain_los must be positive")?;
        ensure(self.gain_nlos > 0.0, "gain_nlos must be positive")?;
        ensure(self.alpha_los > 0.0, "alpha_los must be positive")?;
        ensure(self.alpha_nlos > 0.0, "alpha_nlos must be positive")?;
        let range_ok = |r: [f64; 2]| r[0] > 0.0 && r[0] <= r[1] && r[1].is_finite();
        ensure(
            range_ok(self.d_noma_range),
            "d_noma_range must satisfy 0 < lo <= hi",
        )?;
        ensure(
            range_ok(self.d_airfl_range),
            "d_airfl_range must satisfy 0 < lo <= hi",
        )?;
        ensure(self.bandwidth > 0.0, "bandwidth must be positive")?;
        ensure(self.noise_power > 0.0, "noise_power must be positive")?;
        ensure(self.max_power > 0.0, "max_power must be positive")?;
        ensure(
            (0.0..=1.0).contains(&self.sic_residual),
            "sic_residual must lie in [0, 1]",
        )?;
        ensure(
            self.csi_error_var >= 0.0,
            "csi_error_var must be non-negative",
        )?;
        ensure(
            (0.0..=1.0).contains(&self.hybrid_weight),
            "hybrid_weight must lie in [0, 1]",
        )?;
        ensure(self.rate_min >= 0.0, "rate_min must be non-negative")?;
        ensure(self.mse_limit > 0.0, "mse_limit must be positive")?;
        ensure(
            self.penalty_reward.is_finite(),
            "penalty_reward must be finite",
        )?;
        Ok(())
    }
}

/// Configuration rejection with a human-readable reason.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

// ---------------------------------------------------------------------------
