//! Strapdown inertial propagation (the estimator's prediction step without
//! any correction): gyro delta angles update the attitude quaternion, the
//! rotated accelerometer delta velocities plus gravity update velocity, and
//! velocity is integrated to position.

use alloc::vec::Vec;
use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::log::{EkfState, FlightLog};

/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.80665;
/// Earth rotation rate, rad/s.
pub const EARTH_RATE: f64 = 7.292115e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeadReckonConfig {
    pub gravity_mps2: f64,
    pub home_lat_deg: f64,
    pub apply_earth_rate: bool,
    pub gyro_bias: [f64; 3],
    pub accel_bias: [f64; 3],
}

impl Default for DeadReckonConfig {
    fn default() -> Self {
        DeadReckonConfig {
            gravity_mps2: STANDARD_GRAVITY,
            home_lat_deg: 0.0,
            apply_earth_rate: false,
            gyro_bias: [0.0; 3],
            accel_bias: [0.0; 3],
        }
    }
}

impl DeadReckonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gravity_mps2 > 0.0) {
            return Err(Error::Config("gravity must be positive".into()));
        }
        if !(libm::fabs(self.home_lat_deg) <= 90.0) {
            return Err(Error::Config("home latitude outside [-90, 90]".into()));
        }
        Ok(())
    }

    /// Earth rotation vector resolved in NED at the home latitude.
    pub fn earth_rate_ned(&self) -> Vector3<f64> {
        let lat = self.home_lat_deg.to_radians();
        Vector3::new(EARTH_RATE * libm::cos(lat), 0.0, -EARTH_RATE * libm::sin(lat))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavState {
    pub t_us: i64,
    /// Body-to-NED rotation, scalar first.
    pub quat: [f64; 4],
    pub vel_ned: [f64; 3],
    pub pos_ned: [f64; 3],
}

impl NavState {
    pub fn from_ekf(s: &EkfState) -> NavState {
        let q = to_unit(s.quat);
        NavState {
            t_us: s.t_us,
            quat: from_unit(&q),
            vel_ned: s.vel_ned,
            pos_ned: s.pos_ned,
        }
    }

    pub fn attitude(&self) -> UnitQuaternion<f64> {
        to_unit(self.quat)
    }

    pub fn to_ekf(&self) -> EkfState {
        EkfState {
            t_us: self.t_us,
            quat: self.quat,
            vel_ned: self.vel_ned,
            pos_ned: self.pos_ned,
        }
    }
}

pub(crate) fn to_unit(q: [f64; 4]) -> UnitQuaternion<f64> {
    UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]))
}

pub(crate) fn from_unit(q: &UnitQuaternion<f64>) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

pub(crate) fn v3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

pub(crate) fn arr(v: &Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn attitude_step(state: &NavState, gyro: [f64; 3], dt: f64, cfg: &DeadReckonConfig) -> NavState {
    let q = state.attitude();
    let mut delta_angle = (v3(gyro) - v3(cfg.gyro_bias)) * dt;
    if cfg.apply_earth_rate {
        delta_angle -= q.inverse_transform_vector(&cfg.earth_rate_ned()) * dt;
    }
    let dq = UnitQuaternion::from_scaled_axis(delta_angle);
    let q_new = UnitQuaternion::new_normalize((q * dq).into_inner());
    NavState {
        quat: from_unit(&q_new),
        ..*state
    }
}

fn translation_step(state: &NavState, accel: [f64; 3], dt: f64, cfg: &DeadReckonConfig) -> NavState {
    let q = state.attitude();
    let dv_body = (v3(accel) - v3(cfg.accel_bias)) * dt;
    let dv_ned = q.transform_vector(&dv_body) + Vector3::new(0.0, 0.0, cfg.gravity_mps2) * dt;
    let v_old = v3(state.vel_ned);
    let v_new = v_old + dv_ned;
    let p_new = v3(state.pos_ned) + (v_old + v_new) * (0.5 * dt);
    NavState {
        vel_ned: arr(&v_new),
        pos_ned: arr(&p_new),
        ..*state
    }
}

/// Rotates the attitude by the debiased gyro delta angle using the exact
/// quaternion exponential, then renormalises.
pub fn propagate_attitude(state: &NavState, gyro: [f64; 3], dt: f64, cfg: &DeadReckonConfig) -> NavState {
    debug_assert!(dt > 0.0);
    attitude_step(state, gyro, dt, cfg)
}

/// Adds the rotated, debiased delta velocity and gravity to the velocity and
/// integrates position with the trapezoidal rule.
pub fn propagate_velocity_position(
    state: &NavState,
    accel: [f64; 3],
    dt: f64,
    cfg: &DeadReckonConfig,
) -> NavState {
    debug_assert!(dt > 0.0);
    translation_step(state, accel, dt, cfg)
}

/// One full strapdown step: attitude first, then velocity/position with the
/// updated attitude.
pub fn propagate(state: &NavState, gyro: [f64; 3], accel: [f64; 3], dt: f64, cfg: &DeadReckonConfig) -> NavState {
    let s = attitude_step(state, gyro, dt, cfg);
    translation_step(&s, accel, dt, cfg)
}

/// Output of [`dead_reckon`].
#[derive(Debug, Clone, PartialEq)]
pub struct DeadReckonTrack {
    /// Initial state followed by one state per consumed IMU sample.
    pub states: Vec<NavState>,
    /// States interpolated onto the EKF timestamps.
    pub at_ekf: Vec<NavState>,
}

/// Propagates over the whole IMU stream starting from the first EKF sample.
pub fn dead_reckon(log: &FlightLog, cfg: &DeadReckonConfig) -> Result<DeadReckonTrack> {
    cfg.validate()?;
    if log.imu.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let first = log
        .ekf
        .first()
        .ok_or_else(|| Error::Validation("EKF stream is empty".into()))?;
    for w in log.imu.windows(2) {
        if w[1].t_us <= w[0].t_us {
            return Err(Error::Validation("IMU timestamps are not strictly increasing".into()));
        }
    }
    for w in log.ekf.windows(2) {
        if w[1].t_us <= w[0].t_us {
            return Err(Error::Validation("EKF timestamps are not strictly increasing".into()));
        }
    }

    let mut state = NavState::from_ekf(first);
    let mut states = Vec::with_capacity(log.imu.len() + 1);
    states.push(state);
    for s in log.imu.iter().filter(|s| s.t_us > first.t_us) {
        let dt = (s.t_us - state.t_us) as f64 * 1e-6;
        state = propagate(&state, s.gyro, s.accel, dt, cfg);
        state.t_us = s.t_us;
        states.push(state);
    }

    let at_ekf = resample(&states, log.ekf.iter().map(|e| e.t_us));
    Ok(DeadReckonTrack { states, at_ekf })
}

/// Linear interpolation of velocity and position (slerp for attitude) onto
/// the given timestamps; times outside the track are clamped to its ends.
pub fn resample<I: IntoIterator<Item = i64>>(states: &[NavState], times: I) -> Vec<NavState> {
    let mut out = Vec::new();
    if states.is_empty() {
        return out;
    }
    let mut j = 0usize;
    for t in times {
        while j + 1 < states.len() && states[j + 1].t_us <= t {
            j += 1;
        }
        let a = &states[j];
        if t <= a.t_us || j + 1 == states.len() {
            out.push(NavState { t_us: t, ..*a });
            continue;
        }
        let b = &states[j + 1];
        let frac = (t - a.t_us) as f64 / (b.t_us - a.t_us) as f64;
        let lerp = |x: [f64; 3], y: [f64; 3]| {
            [
                x[0] + (y[0] - x[0]) * frac,
                x[1] + (y[1] - x[1]) * frac,
                x[2] + (y[2] - x[2]) * frac,
            ]
        };
        let q = a.attitude().slerp(&b.attitude(), frac);
        out.push(NavState {
            t_us: t,
            quat: from_unit(&q),
            vel_ned: lerp(a.vel_ned, b.vel_ned),
            pos_ned: lerp(a.pos_ned, b.pos_ned),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn at_rest() -> NavState {
        NavState {
            t_us: 0,
            quat: [1.0, 0.0, 0.0, 0.0],
            vel_ned: [0.0; 3],
            pos_ned: [0.0; 3],
        }
    }

    fn yaw_of(q: &UnitQuaternion<f64>) -> f64 {
        q.euler_angles().2
    }

    #[test]
    fn zero_rate_keeps_attitude() {
        let cfg = DeadReckonConfig::default();
        let s = NavState {
            quat: from_unit(&UnitQuaternion::from_euler_angles(0.1, -0.2, 0.7)),
            ..at_rest()
        };
        let out = propagate_attitude(&s, [0.0; 3], 0.01, &cfg);
        for k in 0..4 {
            assert!((out.quat[k] - s.quat[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn quarter_turn_yaw() {
        let cfg = DeadReckonConfig::default();
        let mut s = at_rest();
        for _ in 0..20 {
            s = propagate_attitude(&s, [0.0, 0.0, FRAC_PI_2], 0.05, &cfg);
        }
        assert!((yaw_of(&s.attitude()) - FRAC_PI_2).abs() < 1e-6);
    }

    #[test]
    fn quaternion_norm_after_many_random_steps() {
        let cfg = DeadReckonConfig {
            apply_earth_rate: true,
            home_lat_deg: 47.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = at_rest();
        for _ in 0..1_000_000 {
            let g = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            s = propagate_attitude(&s, g, 0.012, &cfg);
        }
        let n: f64 = s.quat.iter().map(|q| q * q).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hover_is_static_equilibrium() {
        let cfg = DeadReckonConfig::default();
        let mut s = at_rest();
        for _ in 0..1000 {
            s = propagate(&s, [0.0; 3], [0.0, 0.0, -STANDARD_GRAVITY], 0.012, &cfg);
        }
        assert_eq!(s.vel_ned, [0.0; 3]);
        assert_eq!(s.pos_ned, [0.0; 3]);
    }

    #[test]
    fn constant_north_acceleration() {
        let cfg = DeadReckonConfig::default();
        let mut s = at_rest();
        for _ in 0..1000 {
            s = propagate_velocity_position(&s, [1.0, 0.0, -STANDARD_GRAVITY], 0.01, &cfg);
        }
        assert!((s.vel_ned[0] - 10.0).abs() < 1e-9);
        assert!((s.pos_ned[0] - 50.0).abs() < 1e-9);
        assert!(s.vel_ned[2].abs() < 1e-9);
    }

    #[test]
    fn accel_bias_drift_law() {
        let cfg = DeadReckonConfig::default();
        let b = 0.05;
        let mut s = at_rest();
        let dt = 1.0 / 84.0;
        let steps = (60.0 / dt) as usize;
        for _ in 0..steps {
            s = propagate(&s, [0.0; 3], [b, 0.0, -STANDARD_GRAVITY], dt, &cfg);
        }
        let t = steps as f64 * dt;
        let expected = 0.5 * b * t * t;
        assert!((s.pos_ned[0] - expected).abs() / expected < 0.05);
    }

    #[test]
    fn configured_bias_cancels_measured_bias() {
        let cfg = DeadReckonConfig {
            accel_bias: [0.05, -0.02, 0.01],
            gyro_bias: [0.001, 0.0, -0.002],
            ..Default::default()
        };
        let mut s = at_rest();
        for _ in 0..500 {
            s = propagate(
                &s,
                [0.001, 0.0, -0.002],
                [0.05, -0.02, 0.01 - STANDARD_GRAVITY],
                0.01,
                &cfg,
            );
        }
        assert!(s.pos_ned.iter().all(|p| p.abs() < 1e-9));
    }

    #[test]
    fn reversal_returns_to_start() {
        let cfg = DeadReckonConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let inputs: Vec<([f64; 3], [f64; 3])> = (0..40)
            .map(|_| {
                (
                    [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)],
                    [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-11.0..-8.0)],
                )
            })
            .collect();
        let start = NavState {
            vel_ned: [1.0, -2.0, 0.5],
            ..at_rest()
        };
        let dt = 0.01;
        let mut s = start;
        for (g, a) in &inputs {
            s = propagate(&s, *g, *a, dt, &cfg);
        }
        // Walk back: undo translation with the attitude it was computed at, then the rotation.
        for (g, a) in inputs.iter().rev() {
            s = translation_step(&s, *a, -dt, &cfg);
            s = attitude_step(&s, *g, -dt, &cfg);
        }
        for k in 0..4 {
            assert!((s.quat[k] - start.quat[k]).abs() < 1e-12);
        }
        for k in 0..3 {
            assert!((s.vel_ned[k] - start.vel_ned[k]).abs() < 1e-9);
            assert!((s.pos_ned[k] - start.pos_ned[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn earth_rate_rotates_static_vehicle_slowly() {
        let cfg = DeadReckonConfig {
            apply_earth_rate: true,
            home_lat_deg: 90.0,
            ..Default::default()
        };
        let mut s = at_rest();
        for _ in 0..1000 {
            s = propagate_attitude(&s, [0.0; 3], 1.0, &cfg);
        }
        // At the pole the earth rate is purely about -D; a gyro reading zero
        // means the body counter-rotates by +D relative to NED.
        let yaw = yaw_of(&s.attitude());
        assert!((yaw - EARTH_RATE * 1000.0).abs() < 1e-9);
    }

    #[test]
    fn latitude_out_of_range_rejected() {
        let cfg = DeadReckonConfig {
            home_lat_deg: 91.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn resample_interpolates_linearly() {
        let a = at_rest();
        let b = NavState {
            t_us: 1000,
            vel_ned: [2.0, 0.0, 0.0],
            pos_ned: [10.0, 0.0, -4.0],
            ..a
        };
        let out = resample(&[a, b], [250, 1000, 5000]);
        assert!((out[0].pos_ned[0] - 2.5).abs() < 1e-12);
        assert!((out[0].pos_ned[2] + 1.0).abs() < 1e-12);
        assert_eq!(out[1].pos_ned, b.pos_ned);
        assert_eq!(out[2].pos_ned, b.pos_ned);
        assert_eq!(out[2].t_us, 5000);
    }
}
