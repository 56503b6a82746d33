//! User geometry and position-dependent Rician channels with imperfect CSI.
//!
//! Each user `i` sits at distance `d_i` (meters) and angle of arrival
//! `phi_i` (radians, in [−π/2, π/2]) from the receiver's linear
//! fluid-antenna array. The estimated channel to the `L` array ports at
//! positions `x` (wavelengths) is Rician:
//!
//! ```text
//! ĥ_i = sqrt(A_L · d_i^(−α_L) · κ/(κ+1)) · a(x, phi_i)
//!     + sqrt(A_N · d_i^(−α_N) · 1/(κ+1)) · g_i ,
//! ```
//!
//! where `a(x, phi)` is the line-of-sight steering vector with entries
//! `exp(j·2π/λ·x_l·cos(phi))` and `g_i` has i.i.d. standard
//! circularly-symmetric complex Gaussian entries. The true channel adds an
//! independent estimation error: `h_i = ĥ_i + e_i`,
//! `e_i ~ CN(0, σ_h²·I_L)`.
//!
//! The NLoS and error realizations do not depend on the port positions,
//! so moving ports only rotates the LoS component. [`Fading`] captures
//! one set of realizations explicitly; [`compose_channel_set`] rebuilds
//! channels at any positions from them, which is what position optimizers
//! need to evaluate many placements against one fading state.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

use crate::config::SystemConfig;

/// Which population a user belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UserKind {
    /// Over-the-air aggregation user (indices `0..K`).
    AirFl,
    /// Orthogonal-data user decoded through SIC (indices `K..K+N`).
    Noma,
}

/// Placement of one user relative to the array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserGeometry {
    /// Distance to the receiver in meters.
    pub distance: f64,
    /// Angle of arrival in radians, within [−π/2, π/2].
    pub angle: f64,
    /// User population.
    pub kind: UserKind,
}

/// One block-fading realization for every user: the parts of the channel
/// that do **not** depend on port positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Fading {
    /// Per-user NLoS vector `g_i` (length `L`, standard complex Gaussian).
    pub nlos: Vec<Vec<Complex64>>,
    /// Per-user estimation error `e_i` (length `L`, variance σ_h² per entry).
    pub csi_error: Vec<Vec<Complex64>>,
}

/// Paired (estimated, true) channels for every user in one time slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// User placements, AirFL users first.
    pub geometry: Vec<UserGeometry>,
    /// Estimated channels `ĥ_i`, each of length `L`.
    pub h_est: Vec<Vec<Complex64>>,
    /// True channels `h_i = ĥ_i + e_i`, each of length `L`.
    pub h_true: Vec<Vec<Complex64>>,
    /// Port positions the set was generated for (wavelengths).
    pub positions_used: Vec<f64>,
}

impl ChannelSet {
    /// Total number of users covered by this set.
    pub fn num_users(&self) -> usize {
        self.geometry.len()
    }
}

// ---------------------------------------------------------------------------
// Sampling

/// Draws one standard normal.
fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Draws a circularly-symmetric complex Gaussian vector with the given
/// per-entry variance (split evenly between real and imaginary parts).
fn cn_vector(len: usize, variance: f64, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let scale = (variance / 2.0).sqrt();
    (0..len)
        .map(|_| Complex64::new(scale * gauss(rng), scale * gauss(rng)))
        .collect()
}

/// Samples fresh user geometry: `K` AirFL users (indices `0..K`) followed
/// by `N` NOMA users, distances uniform in the per-population interval and
/// angles uniform in [−π/2, π/2].
pub fn sample_geometry(cfg: &SystemConfig, rng: &mut ChaCha8Rng) -> Vec<UserGeometry> {
    let mut users = Vec::with_capacity(cfg.num_users());
    let draw = |range: [f64; 2], kind, rng: &mut ChaCha8Rng| UserGeometry {
        distance: rng.random_range(range[0]..=range[1]),
        angle: rng.random_range(-PI / 2.0..=PI / 2.0),
        kind,
    };
    for _ in 0..cfg.num_airfl {
        users.push(draw(cfg.d_airfl_range, UserKind::AirFl, rng));
    }
    for _ in 0..cfg.num_noma {
        users.push(draw(cfg.d_noma_range, UserKind::Noma, rng));
    }
    users
}

/// Line-of-sight steering vector: entry `l` is
/// `exp(j · 2π/wavelength · positions[l] · cos(phi))`. Every entry has
/// unit modulus.
pub fn los_steering(positions: &[f64], phi: f64, wavelength: f64) -> Vec<Complex64> {
    let spatial_freq = 2.0 * PI / wavelength * phi.cos();
    positions
        .iter()
        .map(|&x| Complex64::cis(spatial_freq * x))
        .collect()
}

/// Amplitudes of the LoS and NLoS components for a user at distance `d`:
/// `(sqrt(A_L·d^−α_L·κ/(κ+1)), sqrt(A_N·d^−α_N/(κ+1)))`.
pub fn component_amplitudes(cfg: &SystemConfig, distance: f64) -> (f64, f64) {
    let k = cfg.rician_k;
    let los = (cfg.gain_los * distance.powf(-cfg.alpha_los) * k / (k + 1.0)).sqrt();
    let nlos = (cfg.gain_nlos * distance.powf(-cfg.alpha_nlos) / (k + 1.0)).sqrt();
    (los, nlos)
}

/// Composes one user's estimated channel from a given NLoS realization.
fn compose_estimate(
    cfg: &SystemConfig,
    geo: &UserGeometry,
    positions: &[f64],
    nlos: &[Complex64],
) -> Vec<Complex64> {
    let (a_los, a_nlos) = component_amplitudes(cfg, geo.distance);
    let steer = los_steering(positions, geo.angle, cfg.wavelength);
    steer
        .iter()
        .zip(nlos)
        .map(|(s, g)| a_los * s + a_nlos * g)
        .collect()
}

/// Draws one user's estimated Rician channel at the given port positions.
///
/// The NLoS realization is drawn before positions are consulted, so with a
/// fixed stream the same realization underlies any placement.
pub fn draw_estimated_channel(
    cfg: &SystemConfig,
    geo: &UserGeometry,
    positions: &[f64],
    rng: &mut ChaCha8Rng,
) -> Vec<Complex64> {
    let nlos = cn_vector(positions.len(), 1.0, rng);
    compose_estimate(cfg, geo, positions, &nlos)
}

/// Adds an independent estimation error to an estimated channel, producing
/// the true channel `h = ĥ + e`, `e ~ CN(0, sigma_h2·I)`.
pub fn apply_csi_error(
    h_est: &[Complex64],
    sigma_h2: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Complex64> {
    assert!(sigma_h2 >= 0.0, "CSI error variance must be non-negative");
    let err = cn_vector(h_est.len(), sigma_h2, rng);
    h_est.iter().zip(&err).map(|(h, e)| h + e).collect()
}

/// Draws the position-independent fading state for every user: per user,
/// first the NLoS vector, then the estimation error (the same stream
/// order [`draw_channel_set`] consumes).
pub fn draw_fading(cfg: &SystemConfig, rng: &mut ChaCha8Rng) -> Fading {
    let users = cfg.num_users();
    let ports = cfg.num_ports;
    let mut nlos = Vec::with_capacity(users);
    let mut csi_error = Vec::with_capacity(users);
    for _ in 0..users {
        nlos.push(cn_vector(ports, 1.0, rng));
        csi_error.push(cn_vector(ports, cfg.csi_error_var, rng));
    }
    Fading { nlos, csi_error }
}

/// Rebuilds the full channel set at arbitrary port positions from a fixed
/// fading state. Pure: no randomness involved.
pub fn compose_channel_set(
    cfg: &SystemConfig,
    geometry: &[UserGeometry],
    positions: &[f64],
    fading: &Fading,
) -> ChannelSet {
    assert_eq!(geometry.len(), cfg.num_users(), "geometry/user count mismatch");
    assert_eq!(positions.len(), cfg.num_ports, "positions/port count mismatch");
    assert_eq!(fading.nlos.len(), cfg.num_users(), "fading/user count mismatch");
    let mut h_est = Vec::with_capacity(geometry.len());
    let mut h_true = Vec::with_capacity(geometry.len());
    for (i, geo) in geometry.iter().enumerate() {
        let est = compose_estimate(cfg, geo, positions, &fading.nlos[i]);
        let tru: Vec<Complex64> = est
            .iter()
            .zip(&fading.csi_error[i])
            .map(|(h, e)| h + e)
            .collect();
        h_est.push(est);
        h_true.push(tru);
    }
    ChannelSet {
        geometry: geometry.to_vec(),
        h_est,
        h_true,
        positions_used: positions.to_vec(),
    }
}

/// Draws paired (estimated, true) channels for every user at the given
/// port positions: one fading state, composed once.
pub fn draw_channel_set(
    cfg: &SystemConfig,
    geometry: &[UserGeometry],
    positions: &[f64],
    rng: &mut ChaCha8Rng,
) -> ChannelSet {
    let fading = draw_fading(cfg, rng);
    compose_channel_set(cfg, geometry, positions, &fading)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn test_cfg() -> SystemConfig {
        SystemConfig::default()
    }

    #[test]
    fn steering_reference_points() {
        // Zero position: zero phase regardless of angle.
        let v = los_steering(&[0.0], 0.7, 1.0);
        assert_abs_diff_eq!(v[0].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[0].im, 0.0, epsilon = 1e-15);

        // Broadside arrival: cos(π/2) = 0 kills the phase.
        let v = los_steering(&[0.5], PI / 2.0, 1.0);
        assert_abs_diff_eq!(v[0].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[0].im, 0.0, epsilon = 1e-12);

        // Quarter-wavelength offset at head-on arrival: phase π/2.
        let v = los_steering(&[0.25], 0.0, 1.0);
        assert_abs_diff_eq!(v[0].re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[0].im, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn component_amplitudes_reference_value() {
        let cfg = test_cfg();
        let (a_los, _) = component_amplitudes(&cfg, 30.0);
        let expect = (10f64.powf(-2.198) * 30f64.powf(-2.09) * 7.0 / 8.0).sqrt();
        assert_relative_eq!(a_los, expect, max_relative = 1e-12);
    }

    #[test]
    fn strong_rician_factor_collapses_to_los() {
        let mut cfg = test_cfg();
        cfg.rician_k = 1e12;
        let geo = UserGeometry {
            distance: 30.0,
            angle: 0.4,
            kind: UserKind::Noma,
        };
        let positions = [0.0, 0.5, 1.25, 2.0, 3.0, 4.0];
        let mut rng = seeds::stream(1, "rician-limit");
        let h = draw_estimated_channel(&cfg, &geo, &positions, &mut rng);
        let amp = (cfg.gain_los * 30f64.powf(-cfg.alpha_los)).sqrt();
        let steer = los_steering(&positions, geo.angle, cfg.wavelength);
        for (hl, sl) in h.iter().zip(&steer) {
            let expect = amp * sl;
            assert!(
                (hl - expect).norm() <= 1e-4 * expect.norm(),
                "entry {hl} deviates from the LoS limit {expect}"
            );
        }
    }

    #[test]
    fn channel_second_moment_matches_analytic_power() {
        // Sample-mean oracle: per-entry power must match the analytic
        // Rician moment A_L·d^−αL·κ/(κ+1) + A_N·d^−αN/(κ+1).
        let cfg = test_cfg();
        let geo = UserGeometry {
            distance: 30.0,
            angle: -0.9,
            kind: UserKind::Noma,
        };
        let positions: Vec<f64> = vec![0.0, 1.0, 2.5, 4.0];
        let mut rng = seeds::stream(7, "channel-moment");
        let draws = 100_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let h = draw_estimated_channel(&cfg, &geo, &positions, &mut rng);
            acc += h.iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
        let per_entry = acc / (draws as f64 * positions.len() as f64);
        let (a_los, a_nlos) = component_amplitudes(&cfg, geo.distance);
        let expect = a_los * a_los + a_nlos * a_nlos;
        assert_relative_eq!(per_entry, expect, max_relative = 0.02);
    }

    #[test]
    fn csi_error_zero_variance_is_identity() {
        let mut rng = seeds::stream(3, "csi-zero");
        let h = vec![Complex64::new(0.3, -0.2), Complex64::new(-1.0, 0.7)];
        let out = apply_csi_error(&h, 0.0, &mut rng);
        assert_eq!(h, out);
    }

    #[test]
    fn csi_error_variance_matches_target() {
        let mut rng = seeds::stream(11, "csi-var");
        let h = vec![Complex64::new(0.0, 0.0); 4];
        let sigma_h2 = 0.05;
        let draws = 100_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let out = apply_csi_error(&h, sigma_h2, &mut rng);
            acc += out.iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
        let per_entry = acc / (draws as f64 * h.len() as f64);
        assert_relative_eq!(per_entry, sigma_h2, max_relative = 0.02);
    }

    #[test]
    fn geometry_respects_ranges_and_index_convention() {
        let cfg = test_cfg();
        let mut rng = seeds::stream(5, "geometry");
        for _ in 0..10_000 {
            let users = sample_geometry(&cfg, &mut rng);
            assert_eq!(users.len(), cfg.num_users());
            for (i, u) in users.iter().enumerate() {
                let (kind, range) = if i < cfg.num_airfl {
                    (UserKind::AirFl, cfg.d_airfl_range)
                } else {
                    (UserKind::Noma, cfg.d_noma_range)
                };
                assert_eq!(u.kind, kind);
                assert!(u.distance >= range[0] && u.distance <= range[1]);
                assert!(u.angle >= -PI / 2.0 && u.angle <= PI / 2.0);
            }
        }
    }

    #[test]
    fn degenerate_distance_range_is_exact() {
        let mut cfg = test_cfg();
        cfg.d_noma_range = [30.0, 30.0];
        cfg.d_airfl_range = [50.0, 50.0];
        let mut rng = seeds::stream(9, "geometry-degenerate");
        for u in sample_geometry(&cfg, &mut rng) {
            let expect = match u.kind {
                UserKind::AirFl => 50.0,
                UserKind::Noma => 30.0,
            };
            assert_eq!(u.distance, expect);
        }
    }

    #[test]
    fn draws_are_deterministic_and_bit_identical() {
        let cfg = test_cfg();
        let geom = sample_geometry(&cfg, &mut seeds::stream(2, "geometry-fixed"));
        let positions = [0.0, 0.5, 1.0, 2.0, 3.0, 4.5];
        let a = draw_channel_set(&cfg, &geom, &positions, &mut seeds::stream(4, "fading"));
        let b = draw_channel_set(&cfg, &geom, &positions, &mut seeds::stream(4, "fading"));
        assert_eq!(a, b);
    }

    #[test]
    fn per_user_ops_and_bundle_share_the_stream_order() {
        // draw_channel_set must consume randomness exactly like the
        // per-user operations called in index order.
        let mut cfg = test_cfg();
        cfg.csi_error_var = 0.04;
        let geom = sample_geometry(&cfg, &mut seeds::stream(21, "geometry-order"));
        let positions = [0.0, 0.5, 1.0, 2.0, 3.0, 4.5];

        let set = draw_channel_set(&cfg, &geom, &positions, &mut seeds::stream(22, "fade"));

        let mut rng = seeds::stream(22, "fade");
        for (i, geo) in geom.iter().enumerate() {
            let est = draw_estimated_channel(&cfg, geo, &positions, &mut rng);
            let tru = apply_csi_error(&est, cfg.csi_error_var, &mut rng);
            assert_eq!(set.h_est[i], est);
            assert_eq!(set.h_true[i], tru);
        }
    }

    #[test]
    fn moving_ports_changes_only_the_los_component() {
        let mut cfg = test_cfg();
        cfg.csi_error_var = 0.02;
        let geom = sample_geometry(&cfg, &mut seeds::stream(31, "geometry-move"));
        let fading = draw_fading(&cfg, &mut seeds::stream(32, "fade-move"));
        let pos_a = [0.0, 0.5, 1.0, 2.0, 3.0, 4.5];
        let pos_b = [0.5, 1.5, 2.5, 4.0, 5.5, 8.0];
        let set_a = compose_channel_set(&cfg, &geom, &pos_a, &fading);
        let set_b = compose_channel_set(&cfg, &geom, &pos_b, &fading);
        for (i, geo) in geom.iter().enumerate() {
            let (a_los, _) = component_amplitudes(&cfg, geo.distance);
            let steer_a = los_steering(&pos_a, geo.angle, cfg.wavelength);
            let steer_b = los_steering(&pos_b, geo.angle, cfg.wavelength);
            for l in 0..cfg.num_ports {
                // Subtracting the LoS part must leave the same NLoS value
                // up to floating-point rounding of the one addition.
                let res_a = set_a.h_est[i][l] - a_los * steer_a[l];
                let res_b = set_b.h_est[i][l] - a_los * steer_b[l];
                assert_relative_eq!(res_a.re, res_b.re, max_relative = 1e-10, epsilon = 1e-14);
                assert_relative_eq!(res_a.im, res_b.im, max_relative = 1e-10, epsilon = 1e-14);
            }
        }
    }

    proptest! {
        #[test]
        fn steering_entries_have_unit_modulus(
            positions in proptest::collection::vec(-10.0f64..10.0, 1..8),
            phi in -PI / 2.0..PI / 2.0,
        ) {
            for entry in los_steering(&positions, phi, 1.0) {
                prop_assert!((entry.norm() - 1.0).abs() < 1e-12);
            }
        }
    }
}
