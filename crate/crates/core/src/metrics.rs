//! Evaluation metrics: SIP error, root-aligned joint position error, jitter,
//! and their slow/fast split by mean acceleration.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[allow(unused_imports)] // inherent float methods exist only when std is in the build graph
use num_traits::Float;

use crate::math::{Quaternion, Vec3};
use crate::pipeline::SLOW_ACCEL_THRESHOLD;
use crate::skeleton::{JointPose, SensorPlacement, Skeleton, SIP_JOINTS};
use crate::{Error, Result, NUM_PAIRS};

/// Mean geodesic angle (degrees) between predicted and true global
/// orientations of the upper arms and upper legs, over frames.
pub fn sip_error(pred: &[Vec<JointPose>], truth: &[Vec<JointPose>]) -> f64 {
    sip_sum(pred, truth) / pred.len().max(1) as f64
}

fn sip_frame(pred: &[JointPose], truth: &[JointPose]) -> f64 {
    assert!(pred.len() > SIP_JOINTS[3] && truth.len() > SIP_JOINTS[3], "sip_error: missing joints");
    let angle = |a: Quaternion, b: Quaternion| if a == b { 0.0 } else { a.angle_to(b) };
    let s: f64 = SIP_JOINTS.iter().map(|&j| angle(pred[j].orientation, truth[j].orientation)).sum();
    (s / SIP_JOINTS.len() as f64).to_degrees()
}

fn sip_sum(pred: &[Vec<JointPose>], truth: &[Vec<JointPose>]) -> f64 {
    assert_eq!(pred.len(), truth.len(), "sip_error: frame count mismatch");
    pred.iter().zip(truth).map(|(p, t)| sip_frame(p, t)).sum()
}

/// Moves `pred` so its root (joint 0) coincides with the truth root pose.
pub fn align_root(pred: &[JointPose], truth_root: &JointPose) -> Vec<Vec3> {
    if pred[0] == *truth_root {
        return pred.iter().map(|j| j.position).collect();
    }
    let r = truth_root.orientation * pred[0].orientation.conjugate();
    pred.iter().map(|j| truth_root.position + r.rotate(j.position - pred[0].position)).collect()
}

fn position_frame(pred: &[JointPose], truth: &[JointPose]) -> f64 {
    assert_eq!(pred.len(), truth.len(), "position_error: joint count mismatch");
    let aligned = align_root(pred, &truth[0]);
    let s: f64 = aligned.iter().zip(truth).map(|(a, t)| a.distance(t.position)).sum();
    100.0 * s / truth.len() as f64
}

/// Mean joint distance (cm) after per-frame alignment of the root position
/// and orientation.
pub fn position_error(pred: &[Vec<JointPose>], truth: &[Vec<JointPose>]) -> f64 {
    assert_eq!(pred.len(), truth.len(), "position_error: frame count mismatch");
    let s: f64 = pred.iter().zip(truth).map(|(p, t)| position_frame(p, t)).sum();
    s / pred.len().max(1) as f64
}

/// Sum and count of per-joint jerk magnitudes (m/s³).
fn jerk_sum(positions: &[Vec<Vec3>], rate: f64) -> Result<(f64, usize)> {
    if positions.len() < 4 {
        return Err(Error::TooShort { need: 3, got: positions.len() });
    }
    let r3 = rate * rate * rate;
    let mut sum = 0.0;
    let mut n = 0;
    for t in 1..positions.len() - 2 {
        let (a, b, c, d) = (&positions[t - 1], &positions[t], &positions[t + 1], &positions[t + 2]);
        for k in 0..b.len() {
            let j = (d[k] - c[k] * 3.0 + b[k] * 3.0 - a[k]) * r3;
            sum += j.norm();
            n += 1;
        }
    }
    Ok((sum, n))
}

/// Mean jerk magnitude over joints and frames, in km/s³.
pub fn jitter(positions: &[Vec<Vec3>], rate: f64) -> Result<f64> {
    let (s, n) = jerk_sum(positions, rate)?;
    Ok(s / n.max(1) as f64 / 1000.0)
}

/// Joint poses from the decoder: true root position, estimated root
/// orientation, predicted locals for joints 1..16.
pub fn predicted_joints(
    skel: &Skeleton,
    placement: &SensorPlacement,
    root_position: Vec3,
    pelvis_sensor: Quaternion,
    locals: &[Quaternion],
) -> Vec<JointPose> {
    let root = (pelvis_sensor * placement.mounts()[0].mounting.conjugate()).normalized();
    let mut all = Vec::with_capacity(locals.len() + 1);
    all.push(root);
    all.extend_from_slice(locals);
    skel.pose(root_position, &all)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Overall,
    Slow,
    Fast,
}

/// Additive per-clip sums so that splits combine by frame weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipMetrics {
    pub name: alloc::string::String,
    pub mean_accel: f64,
    pub frames: usize,
    pub sip_sum: f64,
    pub pos_sum: f64,
    pub jerk_sum: f64,
    pub jerk_count: usize,
    pub dist_se: [f64; NUM_PAIRS],
    pub dist_n: [usize; NUM_PAIRS],
}

impl ClipMetrics {
    pub fn compute(
        name: &str,
        mean_accel: f64,
        pred: &[Vec<JointPose>],
        truth: &[Vec<JointPose>],
        rate: f64,
    ) -> Result<Self> {
        let positions: Vec<Vec<Vec3>> = pred.iter().map(|f| f.iter().map(|j| j.position).collect()).collect();
        let (jerk_sum, jerk_count) = jerk_sum(&positions, rate)?;
        Ok(Self {
            name: name.into(),
            mean_accel,
            frames: pred.len(),
            sip_sum: sip_sum(pred, truth),
            pos_sum: pred.iter().zip(truth).map(|(p, t)| position_frame(p, t)).sum(),
            jerk_sum,
            jerk_count,
            dist_se: [0.0; NUM_PAIRS],
            dist_n: [0; NUM_PAIRS],
        })
    }

    pub fn with_distance_errors(mut self, se: [f64; NUM_PAIRS], n: [usize; NUM_PAIRS]) -> Self {
        self.dist_se = se;
        self.dist_n = n;
        self
    }

    pub fn is_slow(&self) -> bool {
        self.mean_accel <= SLOW_ACCEL_THRESHOLD
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub split: Split,
    pub clips: usize,
    pub frames: usize,
    /// Degrees.
    pub sip_error: f64,
    /// Centimetres.
    pub pos_error: f64,
    /// km/s³.
    pub jitter: f64,
    /// Per-pair filtered distance RMSE (m); `None` for pairs never observed.
    pub distance_rmse: [Option<f64>; NUM_PAIRS],
}

impl MetricReport {
    /// Frame-weighted combination; `None` for an empty set.
    pub fn combine(split: Split, clips: &[&ClipMetrics]) -> Option<Self> {
        let frames: usize = clips.iter().map(|c| c.frames).sum();
        if clips.is_empty() || frames == 0 {
            return None;
        }
        let jc: usize = clips.iter().map(|c| c.jerk_count).sum();
        let mut rmse = [None; NUM_PAIRS];
        for (k, r) in rmse.iter_mut().enumerate() {
            let n: usize = clips.iter().map(|c| c.dist_n[k]).sum();
            if n > 0 {
                *r = Some((clips.iter().map(|c| c.dist_se[k]).sum::<f64>() / n as f64).sqrt());
            }
        }
        Some(Self {
            split,
            clips: clips.len(),
            frames,
            sip_error: clips.iter().map(|c| c.sip_sum).sum::<f64>() / frames as f64,
            pos_error: clips.iter().map(|c| c.pos_sum).sum::<f64>() / frames as f64,
            jitter: clips.iter().map(|c| c.jerk_sum).sum::<f64>() / jc.max(1) as f64 / 1000.0,
            distance_rmse: rmse,
        })
    }
}

/// Overall, slow (mean ‖a‖ ≤ 1 m/s²) and fast reports. Empty partitions are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub overall: Option<MetricReport>,
    pub slow: Option<MetricReport>,
    pub fast: Option<MetricReport>,
}

pub fn split_by_acceleration(clips: &[ClipMetrics]) -> SplitReport {
    let all: Vec<&ClipMetrics> = clips.iter().collect();
    let slow: Vec<&ClipMetrics> = clips.iter().filter(|c| c.is_slow()).collect();
    let fast: Vec<&ClipMetrics> = clips.iter().filter(|c| !c.is_slow()).collect();
    SplitReport {
        overall: MetricReport::combine(Split::Overall, &all),
        slow: MetricReport::combine(Split::Slow, &slow),
        fast: MetricReport::combine(Split::Fast, &fast),
    }
}

/// Runs the network over a prepared clip and scores it against the truth.
pub fn evaluate_clip(
    params: &crate::posenet::PoseNetParams,
    clip: &crate::pipeline::PreparedClip,
    skel: &Skeleton,
    placement: &SensorPlacement,
    use_distances: bool,
) -> Result<(Vec<crate::posenet::PoseOutput>, ClipMetrics)> {
    let out = crate::posenet::infer(params, &clip.inputs, use_distances)?;
    let pred: Vec<Vec<JointPose>> = out
        .iter()
        .zip(&clip.inputs)
        .zip(&clip.truth)
        .map(|((o, i), t)| predicted_joints(skel, placement, t.joints[0].position, i.q[0], &o.local_rotations()))
        .collect();
    let truth: Vec<Vec<JointPose>> = clip.truth.iter().map(|t| t.joints.clone()).collect();
    let m = ClipMetrics::compute(&clip.name, clip.mean_accel, &pred, &truth, crate::IMU_RATE_HZ)?;
    Ok((out, m))
}
