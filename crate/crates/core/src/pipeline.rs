//! In-memory glue: motion clip → raw sensor streams → calibrated, filtered
//! model inputs, plus the ground-truth targets the network trains against.

use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods exist only when std is in the build graph
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::ekf::{init_from_tpose, run_pair_filters, EkfConfig, FilteredFrame, GateTable, PairFilterBank};
use crate::imu::{
    apply_offsets, orientation_filter, synthesize_accel, synthesize_raw_imu, tpose_calibrate, ImuNoiseModel,
    OrientationEstimate, SensorFrame, DEFAULT_GAIN,
};
use crate::math::{Quaternion, Rng, Vec3};
use crate::skeleton::{
    sensor_occlusion, JointPose, MotionClip, MotionKind, SensorPlacement, Skeleton, L_ANKLE, NUM_JOINTS, R_ANKLE,
    TPOSE_HOLD_S,
};
use crate::uwb::{
    ransac_affine_calibrate, simulate_ranging, AffineCalibration, NodeClock, PairCalibration, RawDistanceFrame,
    OCCLUSION_THRESHOLD, SIGMA_LOS, SIGMA_NLOS,
};
use crate::{sensor_pairs, Error, Result, IMU_DT, NUM_PAIRS, NUM_SENSORS};

/// Clips with mean sensor acceleration at or below this are "slow" (m/s²).
pub const SLOW_ACCEL_THRESHOLD: f64 = 1.0;
/// Ankle height above its T-pose value, and speed, below which a foot is in contact.
pub const CONTACT_HEIGHT: f64 = 0.03;
pub const CONTACT_SPEED: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub sigma_los: f64,
    pub sigma_nlos: f64,
    pub accel_noise: f64,
    pub gyro_noise: f64,
    /// Std of the per-clip turn-on biases.
    pub gyro_bias_sigma: f64,
    pub accel_bias_sigma: f64,
    /// Node skews are drawn uniformly from ±this (ppm).
    pub clock_skew_ppm: f64,
    /// Node antenna delays are drawn uniformly from this range (ns).
    pub antenna_delay_ns: (f64, f64),
    pub drop_prob: f64,
    pub occlusion_resolution: usize,
    pub accel_stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            sigma_los: SIGMA_LOS,
            sigma_nlos: SIGMA_NLOS,
            accel_noise: 0.02,
            gyro_noise: 0.002,
            gyro_bias_sigma: 0.005,
            accel_bias_sigma: 0.05,
            clock_skew_ppm: 0.0,
            antenna_delay_ns: (0.2, 0.8),
            drop_prob: 0.01,
            occlusion_resolution: 64,
            accel_stride: 1,
        }
    }
}

impl SimConfig {
    /// No sensor noise, delays or drops.
    pub fn noiseless() -> Self {
        Self {
            sigma_los: 0.0,
            sigma_nlos: 0.0,
            accel_noise: 0.0,
            gyro_noise: 0.0,
            gyro_bias_sigma: 0.0,
            accel_bias_sigma: 0.0,
            clock_skew_ppm: 0.0,
            antenna_delay_ns: (0.0, 0.0),
            drop_prob: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |k: &str| Err(Error::Config(alloc::format!("invalid value for `{k}`")));
        if !(self.sigma_los >= 0.0 && self.sigma_nlos >= 0.0) {
            return bad("sigma_los/sigma_nlos");
        }
        if !(self.accel_noise >= 0.0 && self.gyro_noise >= 0.0) {
            return bad("accel_noise/gyro_noise");
        }
        if !(self.gyro_bias_sigma >= 0.0 && self.accel_bias_sigma >= 0.0) {
            return bad("gyro_bias_sigma/accel_bias_sigma");
        }
        if !(0.0..=crate::uwb::MAX_SKEW_PPM).contains(&self.clock_skew_ppm) {
            return bad("clock_skew_ppm");
        }
        let (lo, hi) = self.antenna_delay_ns;
        if !(lo >= 0.0 && hi >= lo) {
            return bad("antenna_delay_ns");
        }
        if !(0.0..1.0).contains(&self.drop_prob) {
            return bad("drop_prob");
        }
        if self.occlusion_resolution < crate::skeleton::MIN_OCCLUSION_RESOLUTION {
            return bad("occlusion_resolution");
        }
        if self.accel_stride == 0 {
            return bad("accel_stride");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub orientation_gain: f64,
    pub ekf: EkfConfig,
    pub ransac_iters: usize,
    pub ransac_tol: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { orientation_gain: DEFAULT_GAIN, ekf: EkfConfig::default(), ransac_iters: 300, ransac_tol: 0.25 }
    }
}

/// The simulated radios, fixed for a whole dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hardware {
    pub clocks: [NodeClock; NUM_SENSORS],
}

impl Hardware {
    pub fn sample(cfg: &SimConfig, rng: &mut Rng) -> Self {
        let clocks = core::array::from_fn(|_| {
            let skew =
                if cfg.clock_skew_ppm > 0.0 { rng.uniform_range(-cfg.clock_skew_ppm, cfg.clock_skew_ppm) } else { 0.0 };
            let offset = rng.uniform_range(0.0, 100.0);
            let (lo, hi) = cfg.antenna_delay_ns;
            let delay = if hi > lo { rng.uniform_range(lo, hi) } else { lo };
            NodeClock::new(skew, offset, delay * 1e-9)
        });
        Self { clocks }
    }
}

/// Ground truth of one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFrame {
    pub t: f64,
    pub joints: Vec<JointPose>,
    pub sensors: [JointPose; NUM_SENSORS],
}

/// Everything the sensors would have recorded for one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawClip {
    pub name: String,
    pub kind: MotionKind,
    pub truth: Vec<TruthFrame>,
    /// `imu[s][t]`.
    pub imu: Vec<Vec<SensorFrame>>,
    pub ranging: Vec<RawDistanceFrame>,
}

pub fn truth_frames(skel: &Skeleton, clip: &MotionClip, placement: &SensorPlacement) -> Vec<TruthFrame> {
    (0..clip.frame_count())
        .map(|t| {
            let joints = skel.pose(clip.root_translation[t], &clip.local_rotations[t]);
            let sensors = placement.sensor_poses(&joints);
            TruthFrame { t: t as f64 * IMU_DT, joints, sensors }
        })
        .collect()
}

/// Synthesizes raw IMU and ranging streams for `clip`.
pub fn synthesize_clip(
    skel: &Skeleton,
    placement: &SensorPlacement,
    clip: &MotionClip,
    hw: &Hardware,
    cfg: &SimConfig,
    rng: &mut Rng,
) -> Result<RawClip> {
    cfg.validate()?;
    let truth = truth_frames(skel, clip, placement);
    let mut imu = Vec::with_capacity(NUM_SENSORS);
    for s in 0..NUM_SENSORS {
        let p: Vec<Vec3> = truth.iter().map(|f| f.sensors[s].position).collect();
        let q: Vec<Quaternion> = truth.iter().map(|f| f.sensors[s].orientation).collect();
        let noise = ImuNoiseModel {
            accel_sigma: cfg.accel_noise,
            gyro_sigma: cfg.gyro_noise,
            gyro_bias: Vec3::new(rng.normal(), rng.normal(), rng.normal()) * cfg.gyro_bias_sigma,
            accel_bias: Vec3::new(rng.normal(), rng.normal(), rng.normal()) * cfg.accel_bias_sigma,
        };
        imu.push(synthesize_raw_imu(&p, &q, &noise, rng, cfg.accel_stride)?);
    }
    let positions: Vec<[Vec3; NUM_SENSORS]> =
        truth.iter().map(|f| core::array::from_fn(|s| f.sensors[s].position)).collect();
    let sigma = |round: usize, i: usize, j: usize| {
        let k = ((round as f64 * crate::uwb::ROUND_PERIOD / IMU_DT).round() as usize).min(truth.len() - 1);
        let c = sensor_occlusion(skel, &truth[k].joints, placement, i, j, cfg.occlusion_resolution);
        if c < OCCLUSION_THRESHOLD {
            cfg.sigma_los
        } else {
            cfg.sigma_nlos
        }
    };
    let rounds = simulate_ranging(&positions, IMU_DT, &hw.clocks, cfg.drop_prob, sigma, rng);
    Ok(RawClip {
        name: clip.name.clone(),
        kind: clip.kind,
        truth,
        imu,
        ranging: rounds.iter().map(RawDistanceFrame::from).collect(),
    })
}

/// Ground-truth distance of every pair at the IMU frame nearest `t`.
pub fn truth_distances(truth: &[TruthFrame], t: f64) -> [[f64; NUM_SENSORS]; NUM_SENSORS] {
    let k = ((t / IMU_DT).round() as usize).min(truth.len() - 1);
    let s = &truth[k].sensors;
    core::array::from_fn(|i| core::array::from_fn(|j| s[i].position.distance(s[j].position)))
}

/// Per-pair range calibration and the residual spread of its inliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeCalibration {
    pub pairs: PairCalibration,
    /// Std of calibrated inlier residuals (m), used as the EKF range noise.
    pub sigma: [f64; NUM_PAIRS],
}

impl RangeCalibration {
    /// Identity maps with the given noise.
    pub fn identity(sigma: f64) -> Self {
        Self { pairs: [AffineCalibration::IDENTITY; NUM_PAIRS], sigma: [sigma; NUM_PAIRS] }
    }

    pub fn apply(&self, frame: &RawDistanceFrame) -> RawDistanceFrame {
        let mut out = frame.clone();
        for (k, (i, j)) in sensor_pairs().into_iter().enumerate() {
            let d = self.pairs[k].correct(frame.d[i][j]);
            out.d[i][j] = d;
            out.d[j][i] = d;
        }
        out
    }
}

/// Smallest range noise the EKF is allowed to assume (m).
pub const MIN_RANGE_SIGMA: f64 = 0.005;

/// Below this std of true distance (m) a pair's scale is not identifiable
/// and only a bias is fitted.
pub const MIN_CALIBRATION_SPREAD: f64 = 0.05;

fn spread(xs: &[f64]) -> f64 {
    let n = xs.len().max(1) as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt()
}

/// Unit scale with the median offset, refined as the mean over samples within `tol` of it.
fn bias_only(raw: &[f64], truth: &[f64], tol: f64) -> Result<AffineCalibration> {
    let mut diff: Vec<f64> = raw.iter().zip(truth).map(|(r, t)| r - t).collect();
    if diff.is_empty() {
        return Err(Error::CalibrationFailed("no valid ranges".into()));
    }
    diff.sort_by(f64::total_cmp);
    let med = diff[diff.len() / 2];
    let near: Vec<f64> = diff.iter().copied().filter(|d| (d - med).abs() < tol).collect();
    let bias = near.iter().sum::<f64>() / near.len() as f64;
    Ok(AffineCalibration { scale: 1.0, bias, inliers: near.len() })
}

/// Fits `raw = scale·truth + bias` per pair over recordings with known truth.
pub fn calibrate_ranging(recordings: &[&RawClip], cfg: &FilterConfig, rng: &mut Rng) -> Result<RangeCalibration> {
    let mut pairs = [AffineCalibration::IDENTITY; NUM_PAIRS];
    let mut sigma = [0.0; NUM_PAIRS];
    for (k, (i, j)) in sensor_pairs().into_iter().enumerate() {
        let mut raw = Vec::new();
        let mut gt = Vec::new();
        for rec in recordings {
            for f in rec.ranging.iter().filter(|f| f.valid[i][j]) {
                raw.push(f.d[i][j]);
                gt.push(truth_distances(&rec.truth, f.t)[i][j]);
            }
        }
        let cal = if spread(&gt) >= MIN_CALIBRATION_SPREAD {
            ransac_affine_calibrate(&raw, &gt, cfg.ransac_iters, cfg.ransac_tol, rng)?
        } else {
            bias_only(&raw, &gt, cfg.ransac_tol)?
        };
        let res: Vec<f64> =
            raw.iter().zip(&gt).map(|(r, g)| cal.correct(*r) - g).filter(|e| e.abs() < cfg.ransac_tol).collect();
        let n = res.len().max(1) as f64;
        let mean = res.iter().sum::<f64>() / n;
        sigma[k] = (res.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n).sqrt().max(MIN_RANGE_SIGMA);
        pairs[k] = cal;
    }
    Ok(RangeCalibration { pairs, sigma })
}

/// Filter output for one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredClip {
    /// `estimates[s][t]`.
    pub estimates: Vec<Vec<OrientationEstimate>>,
    pub distances: Vec<FilteredFrame>,
    /// Post-update `d̂` at each ranging round.
    pub round_distances: Vec<[[f64; NUM_SENSORS]; NUM_SENSORS]>,
    /// The calibrated ranges fed to the EKF.
    pub calibrated: Vec<RawDistanceFrame>,
}

/// IMU calibration over the T-pose hold, attitude filtering and the 15 pair
/// EKFs. `tpose` holds the known sensor orientations during the hold.
pub fn filter_clip(
    imu: &[Vec<SensorFrame>],
    ranging: &[RawDistanceFrame],
    tpose: &[Quaternion; NUM_SENSORS],
    skel: &Skeleton,
    placement: &SensorPlacement,
    calibration: &RangeCalibration,
    cfg: &FilterConfig,
) -> Result<FilteredClip> {
    if imu.len() != NUM_SENSORS {
        return Err(Error::Shape(alloc::format!("expected {NUM_SENSORS} IMU streams, got {}", imu.len())));
    }
    let hold = (TPOSE_HOLD_S / IMU_DT) as usize;
    let mut estimates = Vec::with_capacity(NUM_SENSORS);
    for (s, frames) in imu.iter().enumerate() {
        if frames.len() != imu[0].len() {
            return Err(Error::Shape("IMU streams differ in length".into()));
        }
        let n = hold.min(frames.len());
        let offsets = tpose_calibrate(&frames[..n], tpose[s])?;
        let corrected = apply_offsets(frames, &offsets);
        estimates.push(orientation_filter(&corrected, cfg.orientation_gain, tpose[s]));
    }
    let calibrated: Vec<RawDistanceFrame> = ranging.iter().map(|f| calibration.apply(f)).collect();
    let init = init_from_tpose(skel, placement)?;
    let mut bank = PairFilterBank::new(init, GateTable::anthropometric(), calibration.sigma, cfg.ekf);
    let (distances, round_distances) = run_pair_filters(&mut bank, &estimates, &calibrated, IMU_DT);
    if bank.any_diverged() {
        return Err(Error::Diverged);
    }
    Ok(FilteredClip { estimates, distances, round_distances, calibrated })
}

/// Per-pair RMSE against truth at the ranging rounds, for calibrated raw
/// ranges (valid rounds only) and for the filter output (same rounds).
pub fn distance_rmse(raw: &RawClip, filtered: &FilteredClip) -> ([f64; NUM_PAIRS], [f64; NUM_PAIRS]) {
    let mut raw_se = [0.0; NUM_PAIRS];
    let mut filt_se = [0.0; NUM_PAIRS];
    let mut n = [0usize; NUM_PAIRS];
    for (r, f) in filtered.calibrated.iter().enumerate() {
        let gt = truth_distances(&raw.truth, f.t);
        for (k, (i, j)) in sensor_pairs().into_iter().enumerate() {
            if f.valid[i][j] {
                raw_se[k] += (f.d[i][j] - gt[i][j]).powi(2);
                filt_se[k] += (filtered.round_distances[r][i][j] - gt[i][j]).powi(2);
                n[k] += 1;
            }
        }
    }
    let rmse = |se: [f64; NUM_PAIRS]| core::array::from_fn(|k| (se[k] / n[k].max(1) as f64).sqrt());
    (rmse(raw_se), rmse(filt_se))
}

/// One frame of network input: global attitude and acceleration estimates
/// plus the filtered distance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelInputFrame {
    pub q: [Quaternion; NUM_SENSORS],
    pub a: [Vec3; NUM_SENSORS],
    pub d: [[f64; NUM_SENSORS]; NUM_SENSORS],
    pub mask: [[bool; NUM_SENSORS]; NUM_SENSORS],
}

pub fn model_inputs(filtered: &FilteredClip) -> Vec<ModelInputFrame> {
    filtered
        .distances
        .iter()
        .enumerate()
        .map(|(t, f)| ModelInputFrame {
            q: core::array::from_fn(|s| filtered.estimates[s][t].q),
            a: core::array::from_fn(|s| filtered.estimates[s][t].accel),
            d: f.d,
            mask: f.mask,
        })
        .collect()
}

/// Training target for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetFrame {
    /// Sensor positions relative to the pelvis sensor, in its frame (m).
    pub positions: [Vec3; NUM_SENSORS],
    /// Local rotations of joints 1..16 (the root's comes from the pelvis sensor).
    pub local_rotations: Vec<Quaternion>,
    /// Left and right foot contact.
    pub contacts: [bool; 2],
}

pub fn targets(truth: &[TruthFrame], skel: &Skeleton) -> Vec<TargetFrame> {
    let ankle_rest = truth.first().map(|f| [f.joints[L_ANKLE].position.z, f.joints[R_ANKLE].position.z]);
    truth
        .iter()
        .enumerate()
        .map(|(t, f)| {
            let root = f.sensors[0];
            let positions =
                core::array::from_fn(|s| root.orientation.conjugate().rotate(f.sensors[s].position - root.position));
            let local_rotations = (1..NUM_JOINTS)
                .map(|k| {
                    let p = skel.joints()[k].parent.expect("non-root joint has a parent");
                    quat_local(f.joints[p].orientation, f.joints[k].orientation)
                })
                .collect();
            let contacts = core::array::from_fn(|side| {
                let ankle = [L_ANKLE, R_ANKLE][side];
                let (a, b) = (t.saturating_sub(1), (t + 1).min(truth.len() - 1));
                let speed = if b > a {
                    truth[b].joints[ankle].position.distance(truth[a].joints[ankle].position)
                        / ((b - a) as f64 * IMU_DT)
                } else {
                    0.0
                };
                let rest = ankle_rest.map_or(0.0, |r| r[side]);
                f.joints[ankle].position.z < rest + CONTACT_HEIGHT && speed < CONTACT_SPEED
            });
            TargetFrame { positions, local_rotations, contacts }
        })
        .collect()
}

fn quat_local(parent: Quaternion, child: Quaternion) -> Quaternion {
    (parent.conjugate() * child).normalized().canonical()
}

/// Mean over frames and sensors of the true world acceleration norm.
pub fn mean_acceleration(truth: &[TruthFrame]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for s in 0..NUM_SENSORS {
        let p: Vec<Vec3> = truth.iter().map(|f| f.sensors[s].position).collect();
        if let Ok(a) = synthesize_accel(&p, 1) {
            sum += a.iter().map(|v| v.norm()).sum::<f64>();
            n += a.len();
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// A clip ready for the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedClip {
    pub name: String,
    pub kind: MotionKind,
    pub inputs: Vec<ModelInputFrame>,
    pub targets: Vec<TargetFrame>,
    pub truth: Vec<TruthFrame>,
    pub mean_accel: f64,
}

impl PreparedClip {
    pub fn is_slow(&self) -> bool {
        self.mean_accel <= SLOW_ACCEL_THRESHOLD
    }
}

pub fn prepare(raw: &RawClip, filtered: &FilteredClip, skel: &Skeleton) -> PreparedClip {
    PreparedClip {
        name: raw.name.clone(),
        kind: raw.kind,
        inputs: model_inputs(filtered),
        targets: targets(&raw.truth, skel),
        truth: raw.truth.clone(),
        mean_accel: mean_acceleration(&raw.truth),
    }
}

/// Known T-pose sensor orientations, taken from the first truth frame.
pub fn tpose_orientations(truth: &[TruthFrame]) -> [Quaternion; NUM_SENSORS] {
    core::array::from_fn(|s| truth[0].sensors[s].orientation)
}

/// Seed stream ids so that each stage draws from its own generator.
pub mod streams {
    pub const HARDWARE: u64 = 0x4857;
    pub const CALIBRATION: u64 = 0x43414c;
    pub const CLIP_BASE: u64 = 0x1000;
    pub const RANSAC: u64 = 0x52414e;
}

/// Whole dataset in memory: motion suite, hardware, calibration recording,
/// range calibration, and every clip filtered and prepared.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub raw: Vec<RawClip>,
    pub filtered: Vec<FilteredClip>,
    pub prepared: Vec<PreparedClip>,
    pub calibration: RangeCalibration,
    pub hardware: Hardware,
}

/// Convenience for tests and the acceptance suite.
pub fn build_dataset(
    seed: u64,
    clips: &[MotionClip],
    skel: &Skeleton,
    placement: &SensorPlacement,
    sim: &SimConfig,
    filt: &FilterConfig,
) -> Result<Dataset> {
    let hardware = Hardware::sample(sim, &mut Rng::derive(seed, streams::HARDWARE));
    let cal_clip = calibration_clip(seed, skel)?;
    let cal_raw =
        synthesize_clip(skel, placement, &cal_clip, &hardware, sim, &mut Rng::derive(seed, streams::CALIBRATION))?;
    let calibration = calibrate_ranging(&[&cal_raw], filt, &mut Rng::derive(seed, streams::RANSAC))?;
    let mut raw = Vec::new();
    let mut filtered = Vec::new();
    let mut prepared = Vec::new();
    for (k, clip) in clips.iter().enumerate() {
        let r = synthesize_clip(
            skel,
            placement,
            clip,
            &hardware,
            sim,
            &mut Rng::derive(seed, streams::CLIP_BASE + k as u64),
        )?;
        let f = filter_clip(&r.imu, &r.ranging, &tpose_orientations(&r.truth), skel, placement, &calibration, filt)?;
        prepared.push(prepare(&r, &f, skel));
        raw.push(r);
        filtered.push(f);
    }
    Ok(Dataset { raw, filtered, prepared, calibration, hardware })
}

/// Duration of the ranging calibration recording (s).
pub const CALIBRATION_CLIP_S: f64 = 40.0;

/// A motion recording with varied inter-sensor distances for range calibration.
pub fn calibration_clip(seed: u64, skel: &Skeleton) -> Result<MotionClip> {
    let mut clips = crate::skeleton::generate_motion_suite(seed ^ 0xca1, &["mixed"], skel, CALIBRATION_CLIP_S)?;
    let mut c = clips.remove(0);
    c.name = "calibration".into();
    Ok(c)
}
