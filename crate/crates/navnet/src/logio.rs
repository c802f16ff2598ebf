//! Flight-log container: a directory holding `manifest.json` and one CSV per
//! stream.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use navnet_core::log::{BaroSample, EkfState, FlightLog, ImuSample, LogSource, MagSample, VehicleType};
use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub const IMU_HEADER: &str = "t_us,gx,gy,gz,ax,ay,az";
pub const BARO_HEADER: &str = "t_us,temp_c,alt_m";
pub const MAG_HEADER: &str = "t_us,mx,my,mz";
pub const EKF_HEADER: &str = "t_us,q1,q2,q3,q4,vn,ve,vd,pn,pe,pd";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogManifest {
    pub schema_version: u32,
    pub log_id: String,
    pub vehicle_type: String,
    pub source: LogSource,
    pub home_lat_deg: Option<f64>,
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_rows<I>(path: &Path, header: &str, rows: I) -> Result<()>
where
    I: IntoIterator<Item = (i64, Vec<f64>)>,
{
    let file = File::create(path).map_err(|e| NavError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let emit = || -> std::io::Result<()> {
        writeln!(w, "{header}")?;
        for (t, values) in rows {
            write!(w, "{t}")?;
            for v in values {
                write!(w, ",{}", fmt_f64(v))?;
            }
            w.write_all(b"\n")?;
        }
        w.flush()
    };
    emit().map_err(|e| NavError::io(path, e))
}

pub fn write_flight_log(log: &FlightLog, dir: &Path) -> Result<()> {
    log.check_invariants()?;
    fs::create_dir_all(dir).map_err(|e| NavError::io(dir, e))?;
    let manifest = LogManifest {
        schema_version: SCHEMA_VERSION,
        log_id: log.log_id.clone(),
        vehicle_type: log.vehicle_type.as_str().into(),
        source: log.source,
        home_lat_deg: log.home_lat_deg,
    };
    crate::write_json(&dir.join("manifest.json"), &manifest)?;
    write_rows(
        &dir.join("imu.csv"),
        IMU_HEADER,
        log.imu.iter().map(|s| (s.t_us, [s.gyro, s.accel].concat())),
    )?;
    write_rows(&dir.join("baro.csv"), BARO_HEADER, log.baro.iter().map(|s| (s.t_us, vec![s.temp_c, s.alt_m])))?;
    write_rows(&dir.join("mag.csv"), MAG_HEADER, log.mag.iter().map(|s| (s.t_us, s.mag.to_vec())))?;
    write_rows(
        &dir.join("ekf.csv"),
        EKF_HEADER,
        log.ekf.iter().map(|s| (s.t_us, [&s.quat[..], &s.vel_ned, &s.pos_ned].concat())),
    )
}

fn read_rows<const N: usize>(path: &Path, header: &str) -> Result<Vec<(i64, [f64; N])>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| NavError::format(path, e.to_string()))?;
    let got = reader.headers().map_err(|e| NavError::format(path, e.to_string()))?;
    let got: Vec<&str> = got.iter().collect();
    if got.join(",") != header {
        return Err(NavError::format(path, format!("expected header `{header}`, found `{}`", got.join(","))));
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| NavError::format(path, format!("line {line}: {e}")))?;
        if record.len() != N + 1 {
            return Err(NavError::format(path, format!("line {line}: expected {} fields, got {}", N + 1, record.len())));
        }
        let t: i64 = record[0]
            .parse()
            .map_err(|_| NavError::format(path, format!("line {line}: bad timestamp `{}`", &record[0])))?;
        let mut values = [0.0f64; N];
        for (k, v) in values.iter_mut().enumerate() {
            let field = &record[k + 1];
            *v = field
                .parse()
                .map_err(|_| NavError::format(path, format!("line {line}: bad number `{field}`")))?;
            if !v.is_finite() {
                return Err(NavError::format(path, format!("line {line}: non-finite value")));
            }
        }
        out.push((t, values));
    }
    Ok(out)
}

pub fn read_flight_log(dir: &Path) -> Result<FlightLog> {
    let manifest: LogManifest = crate::read_json(&dir.join("manifest.json"))?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(NavError::format(
            dir.join("manifest.json"),
            format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", manifest.schema_version),
        ));
    }
    let imu = read_rows::<6>(&dir.join("imu.csv"), IMU_HEADER)?
        .into_iter()
        .map(|(t_us, v)| ImuSample { t_us, gyro: [v[0], v[1], v[2]], accel: [v[3], v[4], v[5]] })
        .collect();
    let baro = read_rows::<2>(&dir.join("baro.csv"), BARO_HEADER)?
        .into_iter()
        .map(|(t_us, v)| BaroSample { t_us, temp_c: v[0], alt_m: v[1] })
        .collect();
    let mag = read_rows::<3>(&dir.join("mag.csv"), MAG_HEADER)?
        .into_iter()
        .map(|(t_us, mag)| MagSample { t_us, mag })
        .collect();
    let ekf = read_rows::<10>(&dir.join("ekf.csv"), EKF_HEADER)?
        .into_iter()
        .map(|(t_us, v)| EkfState {
            t_us,
            quat: [v[0], v[1], v[2], v[3]],
            vel_ned: [v[4], v[5], v[6]],
            pos_ned: [v[7], v[8], v[9]],
        })
        .collect();
    let log = FlightLog {
        log_id: manifest.log_id,
        vehicle_type: VehicleType::parse(&manifest.vehicle_type),
        source: manifest.source,
        home_lat_deg: manifest.home_lat_deg,
        imu,
        baro,
        mag,
        ekf,
    };
    log.check_invariants().map_err(|e| NavError::format(dir, e.to_string()))?;
    Ok(log)
}

/// Writes a state trajectory with the EKF column layout.
pub fn write_trajectory_csv(path: &Path, states: &[EkfState]) -> Result<()> {
    write_rows(path, EKF_HEADER, states.iter().map(|s| (s.t_us, [&s.quat[..], &s.vel_ned, &s.pos_ned].concat())))
}
