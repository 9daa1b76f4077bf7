//! On-disk formats. Floats are written in shortest round-trip form, so
//! reading a file back reproduces the in-memory values exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use uip_core::ekf::FilteredFrame;
use uip_core::imu::{OrientationEstimate, SensorFrame};
use uip_core::math::{Quaternion, Vec3};
use uip_core::pipeline::{RangeCalibration, TruthFrame};
use uip_core::posenet::{PoseNetConfig, PoseNetParams, Tensor, TrainConfig};
use uip_core::skeleton::JointPose;
use uip_core::uwb::{AffineCalibration, RawDistanceFrame};
use uip_core::{sensor_pairs, NUM_PAIRS, NUM_SENSORS};

use crate::error::{CliError, CliResult};

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_text(path, &(serde_json::to_string_pretty(value).expect("serializable") + "\n"))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::io(path, e))
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> CliResult<()> {
    let mut text = String::new();
    for r in rows {
        text += &serde_json::to_string(&r).expect("serializable");
        text.push('\n');
    }
    write_text(path, &text)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| CliError::io(path, format!("line {}: {e}", n + 1)))?);
    }
    Ok(out)
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<BufWriter<File>>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let f = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    csv::Reader::from_reader(BufReader::new(f))
        .deserialize()
        .enumerate()
        .map(|(n, r)| r.map_err(|e| CliError::io(path, format!("row {}: {e}", n + 1))))
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PoseRecord {
    pub p: [f64; 3],
    pub q: [f64; 4],
}

impl From<&JointPose> for PoseRecord {
    fn from(j: &JointPose) -> Self {
        Self { p: j.position.to_array(), q: j.orientation.to_array() }
    }
}

impl From<&PoseRecord> for JointPose {
    fn from(r: &PoseRecord) -> Self {
        JointPose { position: Vec3::from_array(r.p), orientation: Quaternion::from_array(r.q) }
    }
}

/// One line of `truth.jsonl`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthRecord {
    pub t: f64,
    pub joints: Vec<PoseRecord>,
    pub sensors: Vec<PoseRecord>,
}

pub fn write_truth(path: &Path, truth: &[TruthFrame]) -> CliResult<()> {
    write_jsonl(
        path,
        truth.iter().map(|f| TruthRecord {
            t: f.t,
            joints: f.joints.iter().map(PoseRecord::from).collect(),
            sensors: f.sensors.iter().map(PoseRecord::from).collect(),
        }),
    )
}

pub fn read_truth(path: &Path) -> CliResult<Vec<TruthFrame>> {
    read_jsonl::<TruthRecord>(path)?
        .into_iter()
        .map(|r| {
            if r.sensors.len() != NUM_SENSORS {
                return Err(CliError::io(path, format!("expected {NUM_SENSORS} sensors at t = {}", r.t)));
            }
            Ok(TruthFrame {
                t: r.t,
                joints: r.joints.iter().map(JointPose::from).collect(),
                sensors: core::array::from_fn(|s| JointPose::from(&r.sensors[s])),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ImuRow {
    pub t: f64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
    pub gx: f64,
    pub gy: f64,
    pub gz: f64,
}

pub fn write_imu(path: &Path, frames: &[SensorFrame]) -> CliResult<()> {
    write_csv(
        path,
        frames.iter().map(|f| ImuRow {
            t: f.t,
            ax: f.accel.x,
            ay: f.accel.y,
            az: f.accel.z,
            gx: f.gyro.x,
            gy: f.gyro.y,
            gz: f.gyro.z,
        }),
    )
}

pub fn read_imu(path: &Path) -> CliResult<Vec<SensorFrame>> {
    Ok(read_csv::<ImuRow>(path)?
        .into_iter()
        .map(|r| SensorFrame { t: r.t, accel: Vec3::new(r.ax, r.ay, r.az), gyro: Vec3::new(r.gx, r.gy, r.gz) })
        .collect())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RangingRow {
    pub round: usize,
    pub t: f64,
    pub i: usize,
    pub j: usize,
    pub d_raw: f64,
    pub valid: u8,
}

pub fn write_ranging(path: &Path, frames: &[RawDistanceFrame]) -> CliResult<()> {
    write_csv(
        path,
        frames.iter().flat_map(|f| {
            sensor_pairs().into_iter().map(move |(i, j)| RangingRow {
                round: f.round,
                t: f.t,
                i,
                j,
                d_raw: f.d[i][j],
                valid: f.valid[i][j] as u8,
            })
        }),
    )
}

pub fn read_ranging(path: &Path) -> CliResult<Vec<RawDistanceFrame>> {
    let rows = read_csv::<RangingRow>(path)?;
    if rows.len() % NUM_PAIRS != 0 {
        return Err(CliError::io(path, format!("{} rows is not a whole number of rounds", rows.len())));
    }
    rows.chunks(NUM_PAIRS)
        .map(|c| {
            let mut f = RawDistanceFrame {
                round: c[0].round,
                t: c[0].t,
                d: [[0.0; NUM_SENSORS]; NUM_SENSORS],
                valid: core::array::from_fn(|i| core::array::from_fn(|j| i == j)),
            };
            for r in c {
                if r.round != f.round || r.i >= NUM_SENSORS || r.j >= NUM_SENSORS || r.i == r.j || r.valid > 1 {
                    return Err(CliError::io(path, format!("malformed row in round {}", f.round)));
                }
                f.d[r.i][r.j] = r.d_raw;
                f.d[r.j][r.i] = r.d_raw;
                f.valid[r.i][r.j] = r.valid == 1;
                f.valid[r.j][r.i] = r.valid == 1;
            }
            Ok(f)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PairCalibrationRecord {
    pub i: usize,
    pub j: usize,
    pub scale: f64,
    pub bias: f64,
    pub inliers: usize,
    /// Inlier residual std, used as the range noise of the pair's filter (m).
    pub sigma: f64,
}

pub fn write_calibration(path: &Path, c: &RangeCalibration) -> CliResult<()> {
    let rows: Vec<PairCalibrationRecord> = sensor_pairs()
        .into_iter()
        .enumerate()
        .map(|(k, (i, j))| PairCalibrationRecord {
            i,
            j,
            scale: c.pairs[k].scale,
            bias: c.pairs[k].bias,
            inliers: c.pairs[k].inliers,
            sigma: c.sigma[k],
        })
        .collect();
    write_json(path, &rows)
}

pub fn read_calibration(path: &Path) -> CliResult<RangeCalibration> {
    let rows: Vec<PairCalibrationRecord> = read_json(path)?;
    if rows.len() != NUM_PAIRS {
        return Err(CliError::io(path, format!("expected {NUM_PAIRS} pairs, got {}", rows.len())));
    }
    Ok(RangeCalibration {
        pairs: core::array::from_fn(|k| AffineCalibration {
            scale: rows[k].scale,
            bias: rows[k].bias,
            inliers: rows[k].inliers,
        }),
        sigma: core::array::from_fn(|k| rows[k].sigma),
    })
}

/// One line of `distances.jsonl`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceRecord {
    pub t: f64,
    #[serde(rename = "D")]
    pub d: [[f64; NUM_SENSORS]; NUM_SENSORS],
    pub mask: [[bool; NUM_SENSORS]; NUM_SENSORS],
}

pub fn write_distances(path: &Path, frames: &[FilteredFrame]) -> CliResult<()> {
    write_jsonl(path, frames.iter().map(|f| DistanceRecord { t: f.t, d: f.d, mask: f.mask }))
}

pub fn read_distances(path: &Path) -> CliResult<Vec<FilteredFrame>> {
    Ok(read_jsonl::<DistanceRecord>(path)?
        .into_iter()
        .map(|r| FilteredFrame { t: r.t, d: r.d, mask: r.mask })
        .collect())
}

/// One line of `orientations.jsonl`: global attitude and acceleration per sensor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrientationRecord {
    pub t: f64,
    pub q: [[f64; 4]; NUM_SENSORS],
    pub a: [[f64; 3]; NUM_SENSORS],
}

/// `estimates[s][t]` to one record per frame.
pub fn write_orientations(path: &Path, estimates: &[Vec<OrientationEstimate>]) -> CliResult<()> {
    let n = estimates.first().map_or(0, Vec::len);
    write_jsonl(
        path,
        (0..n).map(|t| OrientationRecord {
            t: t as f64 * uip_core::IMU_DT,
            q: core::array::from_fn(|s| estimates[s][t].q.to_array()),
            a: core::array::from_fn(|s| estimates[s][t].accel.to_array()),
        }),
    )
}

pub fn read_orientations(path: &Path) -> CliResult<Vec<Vec<OrientationEstimate>>> {
    let rows = read_jsonl::<OrientationRecord>(path)?;
    Ok((0..NUM_SENSORS)
        .map(|s| {
            rows.iter()
                .map(|r| OrientationEstimate { q: Quaternion::from_array(r.q[s]), accel: Vec3::from_array(r.a[s]) })
                .collect()
        })
        .collect())
}

pub const CHECKPOINT_FORMAT: &str = "uip-posenet";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub epochs: usize,
    pub use_distances: bool,
    pub model: PoseNetConfig,
    pub train: TrainConfig,
    pub tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn new(params: &PoseNetParams, train: &TrainConfig, seed: u64, epochs: usize) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            seed,
            epochs,
            use_distances: train.use_distances,
            model: params.config.clone(),
            train: train.clone(),
            tensors: params.tensors.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let v: serde_json::Value = read_json(path)?;
        let format = v.get("format").and_then(|f| f.as_str()).unwrap_or_default();
        if format != CHECKPOINT_FORMAT {
            return Err(CliError::Data(format!("{}: not a pose network checkpoint", path.display())));
        }
        let version = v.get("version").and_then(|f| f.as_u64()).unwrap_or(0);
        if version != CHECKPOINT_VERSION as u64 {
            return Err(CliError::Data(format!(
                "{}: checkpoint version {version} is not supported by this build (expects {CHECKPOINT_VERSION}); retrain with `uip train` to upgrade",
                path.display()
            )));
        }
        let c: Checkpoint = serde_json::from_value(v).map_err(|e| CliError::io(path, e))?;
        c.params()?;
        Ok(c)
    }

    pub fn params(&self) -> CliResult<PoseNetParams> {
        let p = PoseNetParams { config: self.model.clone(), tensors: self.tensors.clone() };
        p.validate()?;
        Ok(p)
    }
}
