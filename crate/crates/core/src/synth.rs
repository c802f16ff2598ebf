//! Synthetic flights: smooth ground-truth trajectories plus the multi-rate
//! sensor readings that produce them.
//!
//! The trajectory is a clamped cubic spline per NED axis (and for yaw)
//! through profile waypoints, so position, velocity and acceleration are all
//! analytic. Attitude follows a multirotor thrust model: the body z axis is
//! opposite to the thrust vector `a - g + k v` (rotor drag `k`) and the yaw
//! comes from the yaw spline.
//!
//! IMU samples carry the interval-mean angular rate and specific force over
//! `(t_{k-1}, t_k]` (what a delta-angle/delta-velocity IMU reports), derived
//! from the trajectory's attitude and velocity at the sample instants. With
//! zero noise the strapdown step in [`crate::deadreckon`] therefore
//! reproduces the truth velocity exactly at IMU instants and position up to
//! the trapezoidal-rule error.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::deadreckon::{arr, from_unit, v3, STANDARD_GRAVITY};
use crate::error::{Error, Result};
use crate::log::{BaroSample, EkfState, FlightLog, ImuSample, LogSource, MagSample, VehicleType};
use crate::spline::CubicSpline;

/// Earth magnetic field in NED, gauss.
pub const EARTH_FIELD_NED: [f64; 3] = [0.22, 0.0, 0.42];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Hover,
    SurveyLawnmower,
    Circle,
    WaypointPolyline,
    AggressiveManual,
}

impl Profile {
    pub const ALL: [Profile; 5] = [
        Profile::Hover,
        Profile::SurveyLawnmower,
        Profile::Circle,
        Profile::WaypointPolyline,
        Profile::AggressiveManual,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Profile::Hover => "hover",
            Profile::SurveyLawnmower => "survey_lawnmower",
            Profile::Circle => "circle",
            Profile::WaypointPolyline => "waypoint_polyline",
            Profile::AggressiveManual => "aggressive_manual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorRates {
    pub imu: f64,
    pub baro: f64,
    pub mag: f64,
    pub ekf: f64,
}

impl Default for SensorRates {
    fn default() -> Self {
        SensorRates {
            imu: 84.0,
            baro: 67.0,
            mag: 45.0,
            ekf: 5.0,
        }
    }
}

/// White Gaussian noise plus a constant per-flight bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub gyro_std: f64,
    pub accel_std: f64,
    pub gyro_bias: [f64; 3],
    pub accel_bias: [f64; 3],
    pub baro_std: f64,
    pub mag_std: f64,
}

impl NoiseConfig {
    pub fn zero() -> NoiseConfig {
        NoiseConfig {
            gyro_std: 0.0,
            accel_std: 0.0,
            gyro_bias: [0.0; 3],
            accel_bias: [0.0; 3],
            baro_std: 0.0,
            mag_std: 0.0,
        }
    }

    /// Magnitudes typical of a consumer MEMS IMU (ICM-20689 class) sampled
    /// near 84 Hz, a hobby-grade barometer and magnetometer.
    pub fn low_cost() -> NoiseConfig {
        NoiseConfig {
            gyro_std: 0.003,
            accel_std: 0.04,
            gyro_bias: [0.002, -0.0015, 0.001],
            accel_bias: [0.05, -0.04, 0.06],
            baro_std: 0.3,
            mag_std: 0.004,
        }
    }

    /// Same white-noise levels as `self` with each bias axis redrawn from
    /// `N(0, |bias|)` of the corresponding axis.
    pub fn with_random_bias(&self, seed: u64) -> NoiseConfig {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_b1a5);
        let mut draw = |scale: f64| scale * rng.sample::<f64, _>(rand_distr::StandardNormal);
        NoiseConfig {
            gyro_bias: self.gyro_bias.map(|b| draw(libm::fabs(b))),
            accel_bias: self.accel_bias.map(|b| draw(libm::fabs(b))),
            ..*self
        }
    }

    fn validate(&self) -> Result<()> {
        let stds = [self.gyro_std, self.accel_std, self.baro_std, self.mag_std];
        if stds.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::Config("noise std must be finite and >= 0".into()));
        }
        if self.gyro_bias.iter().chain(&self.accel_bias).any(|b| !b.is_finite()) {
            return Err(Error::Config("bias must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Airborne part of the flight, seconds.
    pub duration_s: f64,
    pub profile: Profile,
    #[serde(default)]
    pub rates_hz: SensorRates,
    pub noise: NoiseConfig,
    /// Idle time on the ground both before takeoff and after landing.
    #[serde(default)]
    pub ground_time_s: f64,
    /// Spurious EKF horizontal drift speed while on the ground, m/s.
    #[serde(default)]
    pub ground_ekf_drift_mps: f64,
    /// Rotor drag coefficient, 1/s; tilts the thrust with airspeed.
    #[serde(default = "default_rotor_drag")]
    pub rotor_drag: f64,
    #[serde(default = "default_vehicle")]
    pub vehicle_type: VehicleType,
    #[serde(default)]
    pub home_lat_deg: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub log_id: Option<String>,
}

fn default_rotor_drag() -> f64 {
    0.35
}

fn default_vehicle() -> VehicleType {
    VehicleType::Quadrotor
}

impl SynthConfig {
    pub fn new(profile: Profile, duration_s: f64, seed: u64) -> SynthConfig {
        SynthConfig {
            duration_s,
            profile,
            rates_hz: SensorRates::default(),
            noise: NoiseConfig::zero(),
            ground_time_s: 0.0,
            ground_ekf_drift_mps: 0.0,
            rotor_drag: default_rotor_drag(),
            vehicle_type: VehicleType::Quadrotor,
            home_lat_deg: None,
            seed,
            log_id: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return Err(Error::Config("duration_s must be > 0".into()));
        }
        let r = self.rates_hz;
        if [r.imu, r.baro, r.mag, r.ekf].iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(Error::Config("sensor rates must be > 0".into()));
        }
        if !(self.ground_time_s >= 0.0) || !(self.rotor_drag >= 0.0) {
            return Err(Error::Config("ground time and rotor drag must be >= 0".into()));
        }
        self.noise.validate()
    }

    /// Total log length, seconds.
    pub fn total_duration_s(&self) -> f64 {
        self.duration_s + 2.0 * self.ground_time_s
    }

    pub fn id(&self) -> String {
        self.log_id
            .clone()
            .unwrap_or_else(|| format!("{}-{:016x}", self.profile.as_str(), self.seed))
    }
}

/// Analytic ground-truth trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    axes: [CubicSpline; 3],
    yaw: CubicSpline,
    takeoff_s: f64,
    gravity: f64,
    rotor_drag: f64,
}

/// Kinematic state of the trajectory at one instant.
#[derive(Debug, Clone, Copy)]
pub struct Kinematics {
    pub pos: Vector3<f64>,
    pub vel: Vector3<f64>,
    pub acc: Vector3<f64>,
    pub attitude: UnitQuaternion<f64>,
}

impl Trajectory {
    pub fn takeoff_s(&self) -> f64 {
        self.takeoff_s
    }

    pub fn landing_s(&self) -> f64 {
        self.takeoff_s + (self.axes[0].end() - self.axes[0].start())
    }

    pub fn at(&self, t: f64) -> Kinematics {
        let local = t - self.takeoff_s;
        let [x, y, z] = [self.axes[0].eval(local), self.axes[1].eval(local), self.axes[2].eval(local)];
        let pos = Vector3::new(x.0, y.0, z.0);
        let vel = Vector3::new(x.1, y.1, z.1);
        let acc = Vector3::new(x.2, y.2, z.2);
        let yaw = self.yaw.eval(local).0;
        let thrust = acc - Vector3::new(0.0, 0.0, self.gravity) + vel * self.rotor_drag;
        KinematicsBuilder { thrust, yaw }.finish(pos, vel, acc)
    }
}

struct KinematicsBuilder {
    thrust: Vector3<f64>,
    yaw: f64,
}

impl KinematicsBuilder {
    fn finish(self, pos: Vector3<f64>, vel: Vector3<f64>, acc: Vector3<f64>) -> Kinematics {
        let z_body = -self.thrust.normalize();
        let heading = Vector3::new(libm::cos(self.yaw), libm::sin(self.yaw), 0.0);
        let y_body = z_body.cross(&heading).normalize();
        let x_body = y_body.cross(&z_body);
        let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x_body, y_body, z_body]));
        Kinematics {
            pos,
            vel,
            acc,
            attitude: UnitQuaternion::from_rotation_matrix(&rot),
        }
    }
}

struct Waypoints {
    t: Vec<f64>,
    pos: [Vec<f64>; 3],
    yaw: Vec<f64>,
}

impl Waypoints {
    fn push(&mut self, t: f64, p: [f64; 3], yaw: f64) {
        self.t.push(t);
        for k in 0..3 {
            self.pos[k].push(p[k]);
        }
        self.yaw.push(yaw);
    }
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
}

/// Horizontal path parametrised by arc length: returns (north, east, heading).
trait Path {
    fn at(&self, s: f64) -> (f64, f64, f64);
}

struct Circle {
    radius: f64,
}

impl Path for Circle {
    fn at(&self, s: f64) -> (f64, f64, f64) {
        let th = s / self.radius;
        // Starts at the origin heading north, turning right about (0, r).
        let n = self.radius * libm::sin(th);
        let e = self.radius * (1.0 - libm::cos(th));
        (n, e, th)
    }
}

/// Polyline through vertices with constant-heading legs.
struct Polyline {
    vertices: Vec<(f64, f64)>,
}

impl Path for Polyline {
    fn at(&self, mut s: f64) -> (f64, f64, f64) {
        for w in self.vertices.windows(2) {
            let (dn, de) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            let len = libm::hypot(dn, de);
            if s <= len || len == 0.0 {
                let f = if len > 0.0 { s / len } else { 0.0 };
                return (w[0].0 + dn * f, w[0].1 + de * f, libm::atan2(de, dn));
            }
            s -= len;
        }
        let w = &self.vertices[self.vertices.len() - 2..];
        let (dn, de) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
        (w[1].0, w[1].1, libm::atan2(de, dn))
    }
}

/// Back-and-forth survey legs joined by semicircular turns.
struct Lawnmower {
    leg: f64,
    spacing: f64,
}

impl Path for Lawnmower {
    fn at(&self, s: f64) -> (f64, f64, f64) {
        let r = self.spacing / 2.0;
        let turn = PI * r;
        let period = self.leg + turn;
        let idx = libm::floor(s / period) as i64;
        let rem = s - idx as f64 * period;
        let dir = if idx % 2 == 0 { 1.0 } else { -1.0 };
        let east0 = idx as f64 * self.spacing;
        let start_n = if dir > 0.0 { 0.0 } else { self.leg };
        if rem <= self.leg {
            let heading = if dir > 0.0 { 0.0 } else { PI };
            return (start_n + dir * rem, east0, heading);
        }
        let th = (rem - self.leg) / r;
        let n_center = start_n + dir * self.leg;
        let n = n_center + dir * r * libm::sin(th);
        let e = east0 + r * (1.0 - libm::cos(th));
        let heading = if dir > 0.0 { th } else { PI - th };
        (n, e, heading)
    }
}

fn unwrap_angles(angles: &mut [f64]) {
    for i in 1..angles.len() {
        let mut d = angles[i] - angles[i - 1];
        while d > PI {
            d -= 2.0 * PI;
        }
        while d < -PI {
            d += 2.0 * PI;
        }
        angles[i] = angles[i - 1] + d;
    }
}

fn build_trajectory(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Trajectory> {
    let d = cfg.duration_s;
    let altitude: f64 = rng.gen_range(10.0..30.0);
    // Climb and descent take at most a fifth of the flight each.
    let climb = (altitude / 2.0).min(d / 5.0);
    let cruise_start = climb;
    let cruise_end = d - climb;
    let cruise = (cruise_end - cruise_start).max(0.0);

    let (path, speed, knot_dt, yaw_offset_amp): (Option<alloc::boxed::Box<dyn Path>>, f64, f64, f64) =
        match cfg.profile {
            Profile::Hover => (None, 0.0, 1.0, 0.0),
            Profile::Circle => {
                let radius = rng.gen_range(15.0..40.0);
                (Some(alloc::boxed::Box::new(Circle { radius })), rng.gen_range(3.0..7.0), 0.5, 0.0)
            }
            Profile::SurveyLawnmower => {
                let leg = rng.gen_range(40.0..100.0);
                let spacing = rng.gen_range(10.0..25.0);
                (
                    Some(alloc::boxed::Box::new(Lawnmower { leg, spacing })),
                    rng.gen_range(3.0..6.0),
                    0.5,
                    0.0,
                )
            }
            Profile::WaypointPolyline => {
                let mut vertices = alloc::vec![(0.0, 0.0)];
                for _ in 0..12 {
                    vertices.push((rng.gen_range(-120.0..120.0), rng.gen_range(-120.0..120.0)));
                }
                (Some(alloc::boxed::Box::new(Polyline { vertices })), rng.gen_range(4.0..8.0), 3.0, 0.0)
            }
            Profile::AggressiveManual => {
                let mut vertices = alloc::vec![(0.0, 0.0)];
                let (mut n, mut e) = (0.0, 0.0);
                for _ in 0..60 {
                    n += rng.gen_range(-40.0..40.0);
                    e += rng.gen_range(-40.0..40.0);
                    vertices.push((n, e));
                }
                (Some(alloc::boxed::Box::new(Polyline { vertices })), rng.gen_range(8.0..14.0), 1.5, 0.6)
            }
        };

    let mut wp = Waypoints {
        t: Vec::new(),
        pos: [Vec::new(), Vec::new(), Vec::new()],
        yaw: Vec::new(),
    };
    let yaw0 = rng.gen_range(-PI..PI);
    let ramp = 4.0f64.min(cruise / 4.0).max(1e-3);

    // Distance covered after `t` seconds of cruise with smooth speed ramps at both ends.
    let cruise_distance = |t: f64| -> f64 {
        if cruise <= 0.0 {
            return 0.0;
        }
        let t = t.clamp(0.0, cruise);
        let integrate = |u: f64| {
            let u = u.clamp(0.0, 1.0);
            // Integral of the quintic smoothstep over [0, u].
            u * u * u * u * (2.5 + u * (-3.0 + u))
        };
        let up = ramp * integrate(t / ramp);
        let flat = (t.min(cruise - ramp) - ramp).max(0.0);
        let down = if t > cruise - ramp {
            ramp * (integrate(1.0) - integrate(1.0 - (t - (cruise - ramp)) / ramp))
        } else {
            0.0
        };
        speed * (up + flat + down)
    };

    let horizontal = |s: f64| -> (f64, f64, f64) {
        match &path {
            Some(p) => p.at(s),
            None => (0.0, 0.0, 0.0),
        }
    };

    let n_knots = libm::ceil(d / knot_dt) as usize;
    let mut alt_jitter = 0.0;
    for k in 0..=n_knots {
        let t = (k as f64 * knot_dt).min(d);
        if wp.t.last().is_some_and(|&last| t <= last) {
            continue;
        }
        let s = cruise_distance(t - cruise_start);
        let (n, e, heading) = horizontal(s);
        let z = if t < cruise_start {
            -altitude * smoothstep(t / climb)
        } else if t > cruise_end {
            -altitude * smoothstep((d - t) / climb)
        } else {
            if cfg.profile == Profile::AggressiveManual {
                alt_jitter = (alt_jitter + rng.gen_range(-1.5f64..1.5)).clamp(-8.0, 8.0);
            }
            -altitude + alt_jitter * smoothstep((t - cruise_start) / ramp) * smoothstep((cruise_end - t) / ramp)
        };
        let yaw = match cfg.profile {
            Profile::Hover => yaw0 + 0.4 * libm::sin(2.0 * PI * t / 40.0),
            _ => {
                let jitter = if yaw_offset_amp > 0.0 {
                    rng.gen_range(-yaw_offset_amp..yaw_offset_amp)
                } else {
                    0.0
                };
                heading + jitter
            }
        };
        wp.push(t, [n, e, z], yaw);
    }
    unwrap_angles(&mut wp.yaw);

    let axes = [
        CubicSpline::clamped(&wp.t, &wp.pos[0])?,
        CubicSpline::clamped(&wp.t, &wp.pos[1])?,
        CubicSpline::clamped(&wp.t, &wp.pos[2])?,
    ];
    let yaw = CubicSpline::clamped(&wp.t, &wp.yaw)?;
    Ok(Trajectory {
        axes,
        yaw,
        takeoff_s: cfg.ground_time_s,
        gravity: STANDARD_GRAVITY,
        rotor_drag: cfg.rotor_drag,
    })
}

/// Builds the ground-truth trajectory for a configuration (without sensors).
pub fn trajectory(cfg: &SynthConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    build_trajectory(cfg, &mut rng)
}

fn sample_times(rate_hz: f64, total_s: f64) -> impl Iterator<Item = i64> {
    let end_us = libm::round(total_s * 1e6) as i64;
    (0i64..)
        .map(move |k| libm::round(k as f64 * 1e6 / rate_hz) as i64)
        .take_while(move |t| *t <= end_us)
}

struct Gaussian {
    dist: Option<Normal<f64>>,
}

impl Gaussian {
    fn new(std: f64) -> Gaussian {
        Gaussian {
            dist: if std > 0.0 { Normal::new(0.0, std).ok() } else { None },
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        self.dist.as_ref().map_or(0.0, |d| d.sample(rng))
    }

    fn draw3(&self, rng: &mut ChaCha8Rng) -> Vector3<f64> {
        Vector3::new(self.draw(rng), self.draw(rng), self.draw(rng))
    }
}

/// Generates a complete synthetic flight log; deterministic given `cfg`.
pub fn generate_flight(cfg: &SynthConfig) -> Result<FlightLog> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let traj = build_trajectory(cfg, &mut rng)?;
    let total = cfg.total_duration_s();
    let g = Vector3::new(0.0, 0.0, STANDARD_GRAVITY);
    let noise = cfg.noise;

    let mut imu_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let gyro_noise = Gaussian::new(noise.gyro_std);
    let accel_noise = Gaussian::new(noise.accel_std);
    let period = 1.0 / cfg.rates_hz.imu;
    let mut imu = Vec::new();
    let mut prev_t = -libm::round(period * 1e6) as i64;
    let mut prev = traj.at(prev_t as f64 * 1e-6);
    for t_us in sample_times(cfg.rates_hz.imu, total) {
        let now = traj.at(t_us as f64 * 1e-6);
        let dt = (t_us - prev_t) as f64 * 1e-6;
        let rate = (prev.attitude.inverse() * now.attitude).scaled_axis() / dt;
        let specific_force = now.attitude.inverse_transform_vector(&((now.vel - prev.vel) / dt - g));
        let gyro = rate + v3(noise.gyro_bias) + gyro_noise.draw3(&mut imu_rng);
        let accel = specific_force + v3(noise.accel_bias) + accel_noise.draw3(&mut imu_rng);
        imu.push(ImuSample {
            t_us,
            gyro: arr(&gyro),
            accel: arr(&accel),
        });
        prev = now;
        prev_t = t_us;
    }

    let mut baro_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
    let baro_noise = Gaussian::new(noise.baro_std);
    let baro = sample_times(cfg.rates_hz.baro, total)
        .map(|t_us| {
            let k = traj.at(t_us as f64 * 1e-6);
            let alt = -k.pos.z;
            BaroSample {
                t_us,
                temp_c: 25.0 - 0.0065 * alt,
                alt_m: alt + baro_noise.draw(&mut baro_rng),
            }
        })
        .collect();

    let mut mag_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(3));
    let mag_noise = Gaussian::new(noise.mag_std);
    let field = v3(EARTH_FIELD_NED);
    let mag = sample_times(cfg.rates_hz.mag, total)
        .map(|t_us| {
            let k = traj.at(t_us as f64 * 1e-6);
            let m = k.attitude.inverse_transform_vector(&field) + mag_noise.draw3(&mut mag_rng);
            MagSample { t_us, mag: arr(&m) }
        })
        .collect();

    let drift_dir = rng.gen_range(-PI..PI);
    let drift = Vector3::new(libm::cos(drift_dir), libm::sin(drift_dir), 0.0) * cfg.ground_ekf_drift_mps;
    let (takeoff, landing) = (traj.takeoff_s(), traj.landing_s());
    let ekf = sample_times(cfg.rates_hz.ekf, total)
        .map(|t_us| {
            let t = t_us as f64 * 1e-6;
            let k = traj.at(t);
            let (mut pos, mut vel) = (k.pos, k.vel);
            if t < takeoff {
                pos += drift * (t - takeoff);
                vel += drift;
            } else if t > landing {
                pos += drift * (t - landing);
                vel += drift;
            }
            EkfState {
                t_us,
                quat: from_unit(&k.attitude),
                vel_ned: arr(&vel),
                pos_ned: arr(&pos),
            }
        })
        .collect();

    Ok(FlightLog {
        log_id: cfg.id(),
        vehicle_type: cfg.vehicle_type,
        source: LogSource::Synthetic,
        home_lat_deg: cfg.home_lat_deg,
        imu,
        baro,
        mag,
        ekf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deadreckon::{dead_reckon, DeadReckonConfig};

    #[test]
    fn hover_zero_noise_is_static_on_ground() {
        let mut cfg = SynthConfig::new(Profile::Hover, 30.0, 1);
        cfg.ground_time_s = 5.0;
        let log = generate_flight(&cfg).unwrap();
        let ground: Vec<_> = log.ekf.iter().filter(|s| s.t_us < 5_000_000).collect();
        assert!(!ground.is_empty());
        for s in ground {
            assert_eq!(s.vel_ned, [0.0; 3]);
        }
        for s in log.imu.iter().filter(|s| s.t_us < 5_000_000) {
            // Level attitude with the yaw the hover profile starts from.
            assert!(s.accel[0].abs() < 1e-9 && s.accel[1].abs() < 1e-9);
            assert!((s.accel[2] + STANDARD_GRAVITY).abs() < 1e-9);
            assert!(s.gyro.iter().all(|w| w.abs() < 1e-9));
        }
    }

    #[test]
    fn table_rates_and_sizes() {
        let cfg = SynthConfig::new(Profile::Circle, 360.0, 7);
        let log = generate_flight(&cfg).unwrap();
        assert_eq!(log.imu.len(), 360 * 84 + 1);
        assert_eq!(log.baro.len(), 360 * 67 + 1);
        assert_eq!(log.mag.len(), 360 * 45 + 1);
        assert_eq!(log.ekf.len(), 360 * 5 + 1);
        assert!(log.check_invariants().is_ok());
    }

    #[test]
    fn same_seed_same_log() {
        let mut cfg = SynthConfig::new(Profile::AggressiveManual, 40.0, 99);
        cfg.noise = NoiseConfig::low_cost();
        assert_eq!(generate_flight(&cfg).unwrap(), generate_flight(&cfg).unwrap());
        let mut other = cfg.clone();
        other.seed = 100;
        assert_ne!(generate_flight(&cfg).unwrap().imu, generate_flight(&other).unwrap().imu);
    }

    #[test]
    fn every_profile_round_trips_through_dead_reckoning() {
        for profile in Profile::ALL {
            let cfg = SynthConfig::new(profile, 60.0, 5);
            let log = generate_flight(&cfg).unwrap();
            let track = dead_reckon(&log, &DeadReckonConfig::default()).unwrap();
            let mut worst_pos: f64 = 0.0;
            let mut worst_vel: f64 = 0.0;
            for (dr, truth) in track.at_ekf.iter().zip(&log.ekf) {
                worst_pos = worst_pos.max((v3(dr.pos_ned) - v3(truth.pos_ned)).norm());
                worst_vel = worst_vel.max((v3(dr.vel_ned) - v3(truth.vel_ned)).norm());
            }
            assert!(worst_pos < 0.1, "{profile:?}: position error {worst_pos}");
            assert!(worst_vel < 0.01, "{profile:?}: velocity error {worst_vel}");
        }
    }

    #[test]
    fn profiles_actually_move() {
        for profile in [Profile::Circle, Profile::SurveyLawnmower, Profile::WaypointPolyline, Profile::AggressiveManual] {
            let log = generate_flight(&SynthConfig::new(profile, 120.0, 3)).unwrap();
            let max_speed = log
                .ekf
                .iter()
                .map(|s| v3(s.vel_ned).norm())
                .fold(0.0, f64::max);
            assert!(max_speed > 2.0, "{profile:?} max speed {max_speed}");
            assert!(max_speed < 25.0, "{profile:?} max speed {max_speed}");
        }
    }

    #[test]
    fn magnetometer_matches_rotated_field() {
        let log = generate_flight(&SynthConfig::new(Profile::Circle, 20.0, 2)).unwrap();
        for m in &log.mag {
            let n: f64 = m.mag.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - v3(EARTH_FIELD_NED).norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = SynthConfig::new(Profile::Hover, 0.0, 1);
        assert!(generate_flight(&cfg).is_err());
        cfg.duration_s = 10.0;
        cfg.noise.gyro_std = -1.0;
        assert!(generate_flight(&cfg).is_err());
    }
}
