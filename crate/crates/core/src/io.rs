//! CSV log formats. Column names carry their units.
//!
//! | log            | columns |
//! |----------------|---------|
//! | sensor         | `t_s, delta_rad, a_x_mps2, a_y_mps2, v_x_meas_mps, psidot_meas_radps` |
//! | truth          | `t_s, X_m, Y_m, psi_rad, v_x_mps, v_y_mps, psidot_radps, a_y_mps2` |
//! | estimate       | `t_s, X_m, Y_m, psi_rad, v_x_mps, v_y_mps, psidot_radps, var_v_x, var_v_y, var_psidot` |
//! | pose reset     | `t_s, X_m, Y_m, psi_rad` |
//! | marker         | `t_s, x_front_m, y_front_m, x_rear_m, y_rear_m` |
//! | circular run   | marker columns + `a_y_mps2, psidot_radps, v_mps, delta_rad` |
//!
//! Empty measurement cells in the sensor log mean "no measurement"; empty
//! covariance cells in the estimate log mean "not tracked".
//! The pendulum log holds one cycle timestamp (s) per line; blank lines and
//! lines starting with `#` are ignored.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param_id::{CircularRunData, MarkerRecord};
use crate::sim::{SensorRecord, TruthRecord};
use crate::types::{Pose, VelocityState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorRow {
    pub t_s: f64,
    pub delta_rad: f64,
    pub a_x_mps2: f64,
    pub a_y_mps2: f64,
    pub v_x_meas_mps: Option<f64>,
    pub psidot_meas_radps: Option<f64>,
}

impl From<&SensorRecord> for SensorRow {
    fn from(r: &SensorRecord) -> Self {
        SensorRow {
            t_s: r.t,
            delta_rad: r.delta,
            a_x_mps2: r.a_x,
            a_y_mps2: r.a_y,
            v_x_meas_mps: r.v_x_meas,
            psidot_meas_radps: r.psidot_meas,
        }
    }
}

impl From<SensorRow> for SensorRecord {
    fn from(r: SensorRow) -> Self {
        SensorRecord {
            t: r.t_s,
            delta: r.delta_rad,
            a_x: r.a_x_mps2,
            a_y: r.a_y_mps2,
            v_x_meas: r.v_x_meas_mps,
            psidot_meas: r.psidot_meas_radps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub t_s: f64,
    #[serde(rename = "X_m")]
    pub x_m: f64,
    #[serde(rename = "Y_m")]
    pub y_m: f64,
    pub psi_rad: f64,
    pub v_x_mps: f64,
    pub v_y_mps: f64,
    pub psidot_radps: f64,
    pub a_y_mps2: f64,
}

impl From<&TruthRecord> for TruthRow {
    fn from(r: &TruthRecord) -> Self {
        TruthRow {
            t_s: r.t,
            x_m: r.pose.x,
            y_m: r.pose.y,
            psi_rad: r.pose.psi,
            v_x_mps: r.vel.v_x,
            v_y_mps: r.vel.v_y,
            psidot_radps: r.vel.psi_dot,
            a_y_mps2: r.a_y,
        }
    }
}

impl TruthRow {
    pub fn pose(&self) -> Pose {
        Pose::new(self.x_m, self.y_m, self.psi_rad)
    }

    pub fn vel(&self) -> VelocityState {
        VelocityState::new(self.v_x_mps, self.v_y_mps, self.psidot_radps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub t_s: f64,
    #[serde(rename = "X_m")]
    pub x_m: f64,
    #[serde(rename = "Y_m")]
    pub y_m: f64,
    pub psi_rad: f64,
    pub v_x_mps: f64,
    pub v_y_mps: f64,
    pub psidot_radps: f64,
    pub var_v_x: Option<f64>,
    pub var_v_y: Option<f64>,
    pub var_psidot: Option<f64>,
}

impl EstimateRow {
    pub fn pose(&self) -> Pose {
        Pose::new(self.x_m, self.y_m, self.psi_rad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRow {
    pub t_s: f64,
    #[serde(rename = "X_m")]
    pub x_m: f64,
    #[serde(rename = "Y_m")]
    pub y_m: f64,
    pub psi_rad: f64,
}

impl PoseRow {
    pub fn pose(&self) -> Pose {
        Pose::new(self.x_m, self.y_m, self.psi_rad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkerRow {
    pub t_s: f64,
    pub x_front_m: f64,
    pub y_front_m: f64,
    pub x_rear_m: f64,
    pub y_rear_m: f64,
}

impl From<&MarkerRecord> for MarkerRow {
    fn from(m: &MarkerRecord) -> Self {
        MarkerRow {
            t_s: m.t,
            x_front_m: m.front[0],
            y_front_m: m.front[1],
            x_rear_m: m.rear[0],
            y_rear_m: m.rear[1],
        }
    }
}

impl From<MarkerRow> for MarkerRecord {
    fn from(r: MarkerRow) -> Self {
        MarkerRecord {
            t: r.t_s,
            front: [r.x_front_m, r.y_front_m],
            rear: [r.x_rear_m, r.y_rear_m],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircularRunRow {
    pub t_s: f64,
    pub x_front_m: f64,
    pub y_front_m: f64,
    pub x_rear_m: f64,
    pub y_rear_m: f64,
    pub a_y_mps2: f64,
    pub psidot_radps: f64,
    pub v_mps: f64,
    pub delta_rad: f64,
}

pub fn circular_run_rows(run: &CircularRunData) -> Vec<CircularRunRow> {
    (0..run.len())
        .map(|i| {
            let m = MarkerRow::from(&run.markers[i]);
            CircularRunRow {
                t_s: m.t_s,
                x_front_m: m.x_front_m,
                y_front_m: m.y_front_m,
                x_rear_m: m.x_rear_m,
                y_rear_m: m.y_rear_m,
                a_y_mps2: run.a_y[i],
                psidot_radps: run.psi_dot[i],
                v_mps: run.v[i],
                delta_rad: run.delta[i],
            }
        })
        .collect()
}

pub fn circular_run_from_rows(rows: &[CircularRunRow]) -> CircularRunData {
    let mut run = CircularRunData::default();
    for r in rows {
        run.markers.push(MarkerRecord {
            t: r.t_s,
            front: [r.x_front_m, r.y_front_m],
            rear: [r.x_rear_m, r.y_rear_m],
        });
        run.a_y.push(r.a_y_mps2);
        run.psi_dot.push(r.psidot_radps);
        run.v.push(r.v_mps);
        run.delta.push(r.delta_rad);
    }
    run
}

/// Reads every row of a headed CSV document.
pub fn read_csv<T: DeserializeOwned, R: Read>(reader: R) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_csv<T: Serialize, W: Write>(writer: W, rows: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_csv_file<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_csv(File::open(path)?)
}

pub fn write_csv_file<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_csv(File::create(path)?, rows)
}

pub fn read_sensor_log(path: &Path) -> Result<Vec<SensorRecord>> {
    Ok(read_csv_file::<SensorRow>(path)?
        .into_iter()
        .map(SensorRecord::from)
        .collect())
}

pub fn write_sensor_log(path: &Path, records: &[SensorRecord]) -> Result<()> {
    let rows: Vec<SensorRow> = records.iter().map(SensorRow::from).collect();
    write_csv_file(path, &rows)
}

pub fn write_truth_log(path: &Path, records: &[TruthRecord]) -> Result<()> {
    let rows: Vec<TruthRow> = records.iter().map(TruthRow::from).collect();
    write_csv_file(path, &rows)
}

/// Parses a pendulum log: one timestamp per line.
pub fn read_cycle_times<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let value: f64 = text.parse().map_err(|_| Error::Parse {
            location: format!("line {}", i + 1),
            message: format!("expected a timestamp, found `{text}`"),
        })?;
        out.push(value);
    }
    Ok(out)
}
