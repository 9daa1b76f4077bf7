//! Articulated capsule body, forward kinematics, virtual sensors and a
//! procedural motion suite.
//!
//! The body is a 16-joint tree rooted at the pelvis. Each joint stores a fixed
//! offset from its parent expressed in the parent's frame; a joint's local
//! rotation rotates its own frame relative to the parent. Capsules between
//! joints approximate the body volume for line-of-sight queries.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::str::FromStr;

#[allow(unused_imports)] // inherent float methods exist only when std is in the build graph
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::math::{Quaternion, Rng, Vec3};
use crate::{Error, Result, IMU_DT, NUM_SENSORS};

pub const PELVIS: usize = 0;
pub const SPINE: usize = 1;
pub const NECK: usize = 2;
pub const HEAD: usize = 3;
pub const L_SHOULDER: usize = 4;
pub const L_ELBOW: usize = 5;
pub const L_WRIST: usize = 6;
pub const R_SHOULDER: usize = 7;
pub const R_ELBOW: usize = 8;
pub const R_WRIST: usize = 9;
pub const L_HIP: usize = 10;
pub const L_KNEE: usize = 11;
pub const L_ANKLE: usize = 12;
pub const R_HIP: usize = 13;
pub const R_KNEE: usize = 14;
pub const R_ANKLE: usize = 15;
pub const NUM_JOINTS: usize = 16;

/// Joints whose global orientation enters the SIP error: upper arms and upper legs.
pub const SIP_JOINTS: [usize; 4] = [L_SHOULDER, R_SHOULDER, L_HIP, R_HIP];

/// Body height the standard proportions are defined at.
pub const REFERENCE_HEIGHT: f64 = 1.70;
/// Supported body height range in metres.
pub const HEIGHT_RANGE: (f64, f64) = (1.5, 2.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    /// Offset from the parent joint, in the parent's frame (m).
    pub offset: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capsule {
    pub a: usize,
    pub b: usize,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    joints: Vec<Joint>,
    height: f64,
    capsules: Vec<Capsule>,
    /// Root height above the floor in the neutral standing pose.
    standing_root_height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointPose {
    pub position: Vec3,
    pub orientation: Quaternion,
}

impl Skeleton {
    /// Builds a skeleton, checking that parents precede children and that
    /// there is a single root at index 0.
    pub fn new(joints: Vec<Joint>, height: f64, capsules: Vec<Capsule>, standing_root_height: f64) -> Result<Self> {
        if !(HEIGHT_RANGE.0..=HEIGHT_RANGE.1).contains(&height) {
            return Err(Error::Config(alloc::format!(
                "body height {height} m outside [{}, {}]",
                HEIGHT_RANGE.0,
                HEIGHT_RANGE.1
            )));
        }
        for (i, j) in joints.iter().enumerate() {
            match (i, j.parent) {
                (0, None) => {}
                (0, Some(_)) => return Err(Error::Config("joint 0 must be the root".into())),
                (_, None) => return Err(Error::Config(alloc::format!("joint {i} has no parent"))),
                (_, Some(p)) if p >= i => {
                    return Err(Error::Config(alloc::format!("joint {i} precedes its parent {p}")))
                }
                _ => {}
            }
        }
        for c in &capsules {
            if c.a >= joints.len() || c.b >= joints.len() || c.radius <= 0.0 {
                return Err(Error::Config("invalid capsule".into()));
            }
        }
        Ok(Self { joints, height, capsules, standing_root_height })
    }

    /// The 16-joint body scaled to `height` metres.
    pub fn standard(height: f64) -> Result<Self> {
        let s = height / REFERENCE_HEIGHT;
        let j = |name: &str, parent: Option<usize>, x: f64, y: f64, z: f64| Joint {
            name: name.to_string(),
            parent,
            offset: Vec3::new(x, y, z) * s,
        };
        let joints = vec![
            j("pelvis", None, 0.0, 0.0, 0.0),
            j("spine", Some(PELVIS), 0.0, 0.0, 0.25),
            j("neck", Some(SPINE), 0.0, 0.0, 0.25),
            j("head", Some(NECK), 0.0, 0.0, 0.12),
            j("l_shoulder", Some(SPINE), -0.18, 0.0, 0.22),
            j("l_elbow", Some(L_SHOULDER), -0.28, 0.0, 0.0),
            j("l_wrist", Some(L_ELBOW), -0.25, 0.0, 0.0),
            j("r_shoulder", Some(SPINE), 0.18, 0.0, 0.22),
            j("r_elbow", Some(R_SHOULDER), 0.28, 0.0, 0.0),
            j("r_wrist", Some(R_ELBOW), 0.25, 0.0, 0.0),
            j("l_hip", Some(PELVIS), -0.09, 0.0, -0.05),
            j("l_knee", Some(L_HIP), 0.0, 0.0, -0.42),
            j("l_ankle", Some(L_KNEE), 0.0, 0.0, -0.41),
            j("r_hip", Some(PELVIS), 0.09, 0.0, -0.05),
            j("r_knee", Some(R_HIP), 0.0, 0.0, -0.42),
            j("r_ankle", Some(R_KNEE), 0.0, 0.0, -0.41),
        ];
        let c = |a, b, r: f64| Capsule { a, b, radius: r * s };
        let capsules = vec![
            c(PELVIS, NECK, 0.14),
            c(NECK, HEAD, 0.10),
            c(L_HIP, R_HIP, 0.10),
            c(L_SHOULDER, L_ELBOW, 0.05),
            c(L_ELBOW, L_WRIST, 0.04),
            c(R_SHOULDER, R_ELBOW, 0.05),
            c(R_ELBOW, R_WRIST, 0.04),
            c(L_HIP, L_KNEE, 0.08),
            c(L_KNEE, L_ANKLE, 0.06),
            c(R_HIP, R_KNEE, 0.08),
            c(R_KNEE, R_ANKLE, 0.06),
        ];
        // ankle sits 7 cm above the floor
        Self::new(joints, height, capsules, (0.05 + 0.42 + 0.41 + 0.07) * s)
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn capsules(&self) -> &[Capsule] {
        &self.capsules
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn standing_root_height(&self) -> f64 {
        self.standing_root_height
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn bone_length(&self, joint: usize) -> f64 {
        self.joints[joint].offset.norm()
    }

    /// Returns a copy with every capsule radius multiplied by `k`.
    pub fn with_capsule_scale(&self, k: f64) -> Skeleton {
        let mut out = self.clone();
        for c in &mut out.capsules {
            c.radius *= k;
        }
        out
    }

    /// Global joint poses for a root pose and per-joint local rotations.
    /// `locals[0]` is the root's global orientation.
    pub fn pose(&self, root_position: Vec3, locals: &[Quaternion]) -> Vec<JointPose> {
        assert_eq!(locals.len(), self.joints.len(), "pose: one local rotation per joint");
        let mut out: Vec<JointPose> = Vec::with_capacity(self.joints.len());
        for (i, joint) in self.joints.iter().enumerate() {
            let pose = match joint.parent {
                None => JointPose { position: root_position, orientation: locals[i] },
                Some(p) => {
                    let parent = out[p];
                    JointPose {
                        position: parent.position + parent.orientation.rotate(joint.offset),
                        orientation: parent.orientation * locals[i],
                    }
                }
            };
            out.push(pose);
        }
        out
    }

    /// Joint indices on the tree path from `a` to `b`, excluding the lowest common ancestor.
    fn path_joints(&self, a: usize, b: usize) -> Vec<usize> {
        let ancestors = |mut j: usize| {
            let mut v = vec![j];
            while let Some(p) = self.joints[j].parent {
                v.push(p);
                j = p;
            }
            v
        };
        let (pa, pb) = (ancestors(a), ancestors(b));
        let mut out: Vec<usize> = pa.iter().take_while(|j| !pb.contains(j)).copied().collect();
        out.extend(pb.iter().take_while(|j| !pa.contains(j)));
        out
    }

    /// Upper bound on the distance between two points attached to joints `a`
    /// and `b` at the given offsets: the summed bone lengths along the tree path.
    pub fn max_reach(&self, a: usize, offset_a: Vec3, b: usize, offset_b: Vec3) -> f64 {
        let bones: f64 = self.path_joints(a, b).iter().map(|&j| self.bone_length(j)).sum();
        bones + offset_a.norm() + offset_b.norm()
    }
}

/// Forward kinematics for frame `t` of `clip`.
pub fn forward_kinematics(skel: &Skeleton, clip: &MotionClip, t: usize) -> Result<Vec<JointPose>> {
    if t >= clip.frame_count() {
        return Err(Error::Range { index: t, len: clip.frame_count() });
    }
    Ok(skel.pose(clip.root_translation[t], &clip.local_rotations[t]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorMount {
    pub joint: usize,
    /// Offset from the joint, in the joint frame (m).
    pub offset: Vec3,
    /// Sensor frame relative to the joint frame.
    pub mounting: Quaternion,
    /// Capsule the sensor sits on; ignored for its own line-of-sight queries.
    pub capsule: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorPlacement {
    mounts: [SensorMount; NUM_SENSORS],
}

/// Sensor order: pelvis (root), head, left wrist, right wrist, left knee, right knee.
pub const SENSOR_NAMES: [&str; NUM_SENSORS] = ["pelvis", "head", "l_wrist", "r_wrist", "l_knee", "r_knee"];
pub const SENSOR_PELVIS: usize = 0;
pub const SENSOR_HEAD: usize = 1;

impl SensorPlacement {
    pub fn new(mounts: [SensorMount; NUM_SENSORS]) -> Result<Self> {
        if mounts[0].joint != PELVIS {
            return Err(Error::Config("sensor 0 must be attached to the root joint".into()));
        }
        Ok(Self { mounts })
    }

    /// Pelvis, head, wrists and knees, mounted on the body surface.
    pub fn standard(skel: &Skeleton) -> Self {
        let s = skel.height() / REFERENCE_HEIGHT;
        let m = |joint, x: f64, y: f64, z: f64, mounting, capsule| SensorMount {
            joint,
            offset: Vec3::new(x, y, z) * s,
            mounting,
            capsule,
        };
        let rx = |deg: f64| Quaternion::from_axis_angle(Vec3::X, deg.to_radians());
        let rz = |deg: f64| Quaternion::from_axis_angle(Vec3::Z, deg.to_radians());
        Self {
            mounts: [
                m(PELVIS, 0.0, -0.17, 0.0, rz(180.0), 2),
                m(HEAD, 0.0, 0.0, 0.12, Quaternion::IDENTITY, 1),
                m(L_WRIST, 0.0, 0.0, 0.055, rx(90.0), 4),
                m(R_WRIST, 0.0, 0.0, 0.055, rx(-90.0), 6),
                m(L_KNEE, 0.0, 0.10, 0.0, rz(90.0), 8),
                m(R_KNEE, 0.0, 0.10, 0.0, rz(-90.0), 10),
            ],
        }
    }

    pub fn mounts(&self) -> &[SensorMount; NUM_SENSORS] {
        &self.mounts
    }

    pub fn sensor_pose(&self, joints: &[JointPose], sensor: usize) -> JointPose {
        let m = &self.mounts[sensor];
        let jp = joints[m.joint];
        JointPose {
            position: jp.position + jp.orientation.rotate(m.offset),
            orientation: (jp.orientation * m.mounting).normalized(),
        }
    }

    pub fn sensor_poses(&self, joints: &[JointPose]) -> [JointPose; NUM_SENSORS] {
        core::array::from_fn(|s| self.sensor_pose(joints, s))
    }
}

/// Per-frame ground-truth sensor poses.
pub fn sensor_truth(skel: &Skeleton, clip: &MotionClip, placement: &SensorPlacement) -> Vec<[JointPose; NUM_SENSORS]> {
    (0..clip.frame_count())
        .map(|t| placement.sensor_poses(&skel.pose(clip.root_translation[t], &clip.local_rotations[t])))
        .collect()
}

fn point_segment_distance(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 < 1e-18 { 0.0 } else { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) };
    (p - (a + ab * t)).norm()
}

/// Minimum number of samples for [`occlusion_ratio`].
pub const MIN_OCCLUSION_RESOLUTION: usize = 32;

/// Fraction of `resolution` evenly spaced samples on the segment `p_i → p_j`
/// lying inside any capsule not listed in `exclude`.
///
/// Segments shorter than 1 mm return 0. Panics if `resolution < 32`.
pub fn occlusion_ratio(
    skel: &Skeleton,
    pose: &[JointPose],
    p_i: Vec3,
    p_j: Vec3,
    resolution: usize,
    exclude: &[usize],
) -> f64 {
    assert!(resolution >= MIN_OCCLUSION_RESOLUTION, "occlusion_ratio: resolution {resolution} < 32");
    if (p_j - p_i).norm() < 1e-3 {
        return 0.0;
    }
    // canonical endpoint order makes the sample set identical for (i, j) and (j, i)
    let (a, b) = if (p_i.x, p_i.y, p_i.z) <= (p_j.x, p_j.y, p_j.z) { (p_i, p_j) } else { (p_j, p_i) };
    let capsules: Vec<(Vec3, Vec3, f64)> = skel
        .capsules()
        .iter()
        .enumerate()
        .filter(|(k, _)| !exclude.contains(k))
        .map(|(_, c)| (pose[c.a].position, pose[c.b].position, c.radius))
        .collect();
    let inside = (0..resolution)
        .filter(|&k| {
            let s = (k as f64 + 0.5) / resolution as f64;
            let p = a + (b - a) * s;
            capsules.iter().any(|&(ca, cb, r)| point_segment_distance(p, ca, cb) <= r)
        })
        .count();
    inside as f64 / resolution as f64
}

/// Occlusion ratio between two sensors, ignoring the capsules they sit on.
pub fn sensor_occlusion(
    skel: &Skeleton,
    pose: &[JointPose],
    placement: &SensorPlacement,
    i: usize,
    j: usize,
    resolution: usize,
) -> f64 {
    let pi = placement.sensor_pose(pose, i).position;
    let pj = placement.sensor_pose(pose, j).position;
    let exclude = [placement.mounts()[i].capsule, placement.mounts()[j].capsule];
    occlusion_ratio(skel, pose, pi, pj, resolution, &exclude)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MotionKind {
    Walk,
    Squat,
    ArmSwing,
    SitStand,
    Idle,
    /// Cross-fades between walk, squat, arm-swing and sit-stand segments.
    Mixed,
}

impl MotionKind {
    pub const ALL: [MotionKind; 6] = [
        MotionKind::Walk,
        MotionKind::Squat,
        MotionKind::ArmSwing,
        MotionKind::SitStand,
        MotionKind::Idle,
        MotionKind::Mixed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MotionKind::Walk => "walk",
            MotionKind::Squat => "squat",
            MotionKind::ArmSwing => "arm-swing",
            MotionKind::SitStand => "sit-stand",
            MotionKind::Idle => "idle",
            MotionKind::Mixed => "mixed",
        }
    }
}

impl FromStr for MotionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MotionKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| Error::UnknownMotion(s.to_string()))
    }
}

/// Ground-truth motion sampled at 100 Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionClip {
    pub name: String,
    pub kind: MotionKind,
    pub rate_hz: f64,
    /// `[frame][joint]` local rotations; joint 0 holds the root's global orientation.
    pub local_rotations: Vec<Vec<Quaternion>>,
    pub root_translation: Vec<Vec3>,
}

impl MotionClip {
    pub fn frame_count(&self) -> usize {
        self.local_rotations.len()
    }

    pub fn duration(&self) -> f64 {
        self.frame_count() as f64 / self.rate_hz
    }

    /// Largest local joint rotation between consecutive frames, in radians.
    pub fn max_interframe_rotation(&self) -> f64 {
        self.local_rotations
            .windows(2)
            .flat_map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| a.angle_to(*b)))
            .fold(0.0, f64::max)
    }

    /// A clip holding the T-pose (all local rotations identity) for `frames` frames.
    pub fn static_tpose(skel: &Skeleton, frames: usize) -> Self {
        Self {
            name: "tpose".into(),
            kind: MotionKind::Idle,
            rate_hz: 1.0 / IMU_DT,
            local_rotations: vec![vec![Quaternion::IDENTITY; skel.len()]; frames],
            root_translation: vec![Vec3::new(0.0, 0.0, skel.standing_root_height()); frames],
        }
    }
}

/// Seconds of T-pose at the start of every generated clip.
pub const TPOSE_HOLD_S: f64 = 1.0;
/// Seconds over which the clip blends from T-pose into its motion.
pub const TPOSE_BLEND_S: f64 = 1.0;

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

fn rx(a: f64) -> Quaternion {
    Quaternion::from_axis_angle(Vec3::X, a)
}
fn ry(a: f64) -> Quaternion {
    Quaternion::from_axis_angle(Vec3::Y, a)
}
fn rz(a: f64) -> Quaternion {
    Quaternion::from_axis_angle(Vec3::Z, a)
}

/// Joint angles of one frame, in radians. Zero everywhere is the T-pose.
#[derive(Debug, Clone, Copy, Default)]
struct Angles {
    root_yaw: f64,
    root_pitch: f64,
    root_roll: f64,
    spine_pitch: f64,
    spine_roll: f64,
    neck_pitch: f64,
    neck_yaw: f64,
    // positive = arm lowered towards the body
    l_arm_down: f64,
    r_arm_down: f64,
    // positive = arm swung forward
    l_arm_swing: f64,
    r_arm_swing: f64,
    l_elbow: f64,
    r_elbow: f64,
    l_hip: f64,
    r_hip: f64,
    l_hip_abd: f64,
    r_hip_abd: f64,
    l_knee: f64,
    r_knee: f64,
    l_ankle: f64,
    r_ankle: f64,
    /// root displacement from the standing position
    root_offset: Vec3,
}

impl Angles {
    fn scaled(&self, k: f64) -> Angles {
        Angles {
            root_yaw: self.root_yaw * k,
            root_pitch: self.root_pitch * k,
            root_roll: self.root_roll * k,
            spine_pitch: self.spine_pitch * k,
            spine_roll: self.spine_roll * k,
            neck_pitch: self.neck_pitch * k,
            neck_yaw: self.neck_yaw * k,
            l_arm_down: self.l_arm_down * k,
            r_arm_down: self.r_arm_down * k,
            l_arm_swing: self.l_arm_swing * k,
            r_arm_swing: self.r_arm_swing * k,
            l_elbow: self.l_elbow * k,
            r_elbow: self.r_elbow * k,
            l_hip: self.l_hip * k,
            r_hip: self.r_hip * k,
            l_hip_abd: self.l_hip_abd * k,
            r_hip_abd: self.r_hip_abd * k,
            l_knee: self.l_knee * k,
            r_knee: self.r_knee * k,
            l_ankle: self.l_ankle * k,
            r_ankle: self.r_ankle * k,
            root_offset: self.root_offset * k,
        }
    }

    fn add_scaled(&mut self, o: &Angles, k: f64) {
        macro_rules! acc {
            ($($f:ident),*) => { $(self.$f += o.$f * k;)* };
        }
        acc!(
            root_yaw,
            root_pitch,
            root_roll,
            spine_pitch,
            spine_roll,
            neck_pitch,
            neck_yaw,
            l_arm_down,
            r_arm_down,
            l_arm_swing,
            r_arm_swing,
            l_elbow,
            r_elbow,
            l_hip,
            r_hip,
            l_hip_abd,
            r_hip_abd,
            l_knee,
            r_knee,
            l_ankle,
            r_ankle
        );
        self.root_offset += o.root_offset * k;
    }

    fn locals(&self) -> Vec<Quaternion> {
        let mut q = vec![Quaternion::IDENTITY; NUM_JOINTS];
        q[PELVIS] = rz(self.root_yaw) * rx(self.root_pitch) * ry(self.root_roll);
        q[SPINE] = rx(self.spine_pitch) * ry(self.spine_roll);
        q[NECK] = rz(self.neck_yaw) * rx(self.neck_pitch);
        q[L_SHOULDER] = rx(self.l_arm_swing) * ry(-self.l_arm_down);
        q[R_SHOULDER] = rx(self.r_arm_swing) * ry(self.r_arm_down);
        q[L_ELBOW] = rz(-self.l_elbow);
        q[R_ELBOW] = rz(self.r_elbow);
        q[L_HIP] = rx(self.l_hip) * ry(-self.l_hip_abd);
        q[R_HIP] = rx(self.r_hip) * ry(self.r_hip_abd);
        q[L_KNEE] = rx(-self.l_knee);
        q[R_KNEE] = rx(-self.r_knee);
        q[L_ANKLE] = rx(self.l_ankle);
        q[R_ANKLE] = rx(self.r_ankle);
        q
    }
}

/// Randomized parameters of one clip.
struct Script {
    kind: MotionKind,
    p: [f64; 12],
    phase: [f64; 4],
    sit_schedule: Vec<(f64, f64)>,
    /// Mixed only: segment scripts in play order.
    parts: Vec<Script>,
    /// Mixed only: walked time ∫ w_walk dτ sampled every `IMU_DT`.
    walk_time: Vec<f64>,
}

/// Segment length and cross-fade of mixed clips (s).
const MIXED_SEGMENT_S: f64 = 10.0;
const MIXED_FADE_S: f64 = 2.0;

fn sin(x: f64) -> f64 {
    x.sin()
}

impl Script {
    fn new(kind: MotionKind, rng: &mut Rng, duration: f64) -> Self {
        let mut p = [0.0; 12];
        for v in &mut p {
            *v = rng.uniform();
        }
        let mut phase = [0.0; 4];
        for v in &mut phase {
            *v = rng.uniform_range(0.0, 2.0 * PI);
        }
        // alternating stand/sit intervals: (start of descent, seated hold length)
        let mut sit_schedule = Vec::new();
        if kind == MotionKind::SitStand {
            let mut t = rng.uniform_range(1.0, 2.5);
            while t < duration {
                let hold = rng.uniform_range(2.5, 5.0);
                sit_schedule.push((t, hold));
                t += 2.0 * SIT_TRANSITION_S + hold + rng.uniform_range(2.0, 4.0);
            }
        }
        let mut parts = Vec::new();
        let mut walk_time = Vec::new();
        if kind == MotionKind::Mixed {
            let mut order = [MotionKind::Walk, MotionKind::Squat, MotionKind::ArmSwing, MotionKind::SitStand];
            rng.shuffle(&mut order);
            parts = order.iter().map(|&k| Script::new(k, rng, duration)).collect();
            let walk = order.iter().position(|&k| k == MotionKind::Walk).unwrap_or(0);
            let n = (duration / IMU_DT).ceil() as usize + 2;
            let mut acc = 0.0;
            for f in 0..n {
                walk_time.push(acc);
                acc += IMU_DT * Self::segment_weights(f as f64 * IMU_DT, parts.len())[walk];
            }
        }
        Self { kind, p, phase, sit_schedule, parts, walk_time }
    }

    /// Blend weight of each of `n` cycling segments at time `tau`.
    fn segment_weights(tau: f64, n: usize) -> Vec<f64> {
        let mut w = vec![0.0; n];
        let seg = (tau / MIXED_SEGMENT_S).floor();
        let cur = seg as usize % n;
        let into = tau - seg * MIXED_SEGMENT_S;
        let fade = smoothstep((into - (MIXED_SEGMENT_S - MIXED_FADE_S)) / MIXED_FADE_S);
        w[cur] += 1.0 - fade;
        w[(cur + 1) % n] += fade;
        w
    }

    fn lerp(&self, k: usize, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.p[k]
    }

    /// Angles at motion time `tau` (seconds since the end of the T-pose hold).
    fn angles(&self, skel: &Skeleton, tau: f64) -> Angles {
        let deg = |d: f64| d.to_radians();
        let thigh = skel.bone_length(L_KNEE);
        let shank = skel.bone_length(L_ANKLE);
        let mut a = Angles { l_arm_down: deg(78.0), r_arm_down: deg(78.0), ..Default::default() };
        let w = |f: f64| 2.0 * PI * f * tau;
        match self.kind {
            MotionKind::Mixed => {
                let weights = Self::segment_weights(tau, self.parts.len());
                a = Angles::default();
                for (part, &k) in self.parts.iter().zip(&weights) {
                    if k > 0.0 {
                        a.add_scaled(&part.angles(skel, tau), k);
                    }
                    if part.kind == MotionKind::Walk {
                        // forward progress only accrues while walking
                        let speed = part.angles(skel, 1.0).root_offset.y - part.angles(skel, 0.0).root_offset.y;
                        let walked = part.angles(skel, tau).root_offset.y;
                        a.root_offset.y -= k * walked;
                        let x = tau / IMU_DT;
                        let i = (x.floor() as usize).min(self.walk_time.len() - 2);
                        let fr = x - i as f64;
                        a.root_offset.y += speed * (self.walk_time[i] * (1.0 - fr) + self.walk_time[i + 1] * fr);
                    }
                }
            }
            MotionKind::Idle => {
                let f = self.lerp(0, 0.08, 0.2);
                a.spine_pitch = deg(self.lerp(1, 1.0, 3.0)) * sin(w(f) + self.phase[0]);
                a.spine_roll = deg(1.5) * sin(w(f * 0.7) + self.phase[1]);
                a.neck_yaw = deg(self.lerp(2, 5.0, 15.0)) * sin(w(f * 0.5) + self.phase[2]);
                a.l_arm_swing = deg(3.0) * sin(w(f) + self.phase[3]);
                a.r_arm_swing = deg(3.0) * sin(w(f * 1.1) + self.phase[0]);
                a.l_elbow = deg(self.lerp(3, 5.0, 25.0));
                a.r_elbow = deg(self.lerp(4, 5.0, 25.0));
                a.root_yaw = deg(3.0) * sin(w(f * 0.4) + self.phase[1]);
            }
            MotionKind::Walk => {
                let f = self.lerp(0, 0.8, 1.0);
                let amp = deg(self.lerp(1, 20.0, 30.0));
                let knee = deg(self.lerp(2, 40.0, 60.0));
                let ph = self.phase[0];
                a.l_hip = amp * sin(w(f) + ph);
                a.r_hip = -amp * sin(w(f) + ph);
                a.l_knee = knee * (0.5 - 0.5 * (w(f) + ph + 0.6).cos());
                a.r_knee = knee * (0.5 - 0.5 * (w(f) + ph + PI + 0.6).cos());
                a.l_ankle = 0.3 * a.l_knee;
                a.r_ankle = 0.3 * a.r_knee;
                let arm = deg(self.lerp(3, 15.0, 25.0));
                a.l_arm_swing = -arm * sin(w(f) + ph);
                a.r_arm_swing = arm * sin(w(f) + ph);
                a.l_elbow = deg(self.lerp(4, 10.0, 30.0));
                a.r_elbow = deg(self.lerp(5, 10.0, 30.0));
                a.root_yaw = deg(3.0) * sin(w(f) + ph);
                a.root_roll = deg(2.0) * sin(w(f) + ph);
                a.spine_pitch = -deg(3.0);
                let speed = 2.0 * (thigh + shank) * amp.sin() * f;
                a.root_offset = Vec3::new(0.0, speed * tau, -0.02 + 0.015 * (2.0 * w(f) + 2.0 * ph).cos());
            }
            MotionKind::Squat => {
                let period = self.lerp(0, 3.0, 5.0);
                let depth = deg(self.lerp(1, 60.0, 90.0));
                let th = depth * (0.5 - 0.5 * (2.0 * PI * tau / period).cos());
                a.l_hip = th;
                a.r_hip = th;
                a.l_knee = 1.5 * th;
                a.r_knee = 1.5 * th;
                a.l_ankle = 0.5 * th;
                a.r_ankle = 0.5 * th;
                a.spine_pitch = -0.4 * th;
                a.l_arm_swing = self.lerp(2, 0.5, 1.0) * th;
                a.r_arm_swing = self.lerp(2, 0.5, 1.0) * th;
                a.l_elbow = deg(10.0);
                a.r_elbow = deg(10.0);
                let drop = thigh * (1.0 - th.cos()) + shank * (1.0 - (0.5 * th).cos());
                let back = thigh * th.sin() - shank * (0.5 * th).sin();
                a.root_offset = Vec3::new(0.0, -back, -drop);
            }
            MotionKind::SitStand => {
                let mut s = 0.0;
                let mut lean = 0.0;
                for &(start, hold) in &self.sit_schedule {
                    let down = (tau - start) / SIT_TRANSITION_S;
                    let up = (tau - start - SIT_TRANSITION_S - hold) / SIT_TRANSITION_S;
                    if tau >= start && tau < start + 2.0 * SIT_TRANSITION_S + hold {
                        s = smoothstep(down) - smoothstep(up);
                        let tr = |x: f64| if (0.0..=1.0).contains(&x) { sin(PI * x) } else { 0.0 };
                        lean = tr(down) + tr(up);
                    }
                }
                let th = deg(self.lerp(0, 80.0, 95.0)) * s;
                a.l_hip = th;
                a.r_hip = th;
                a.l_knee = th;
                a.r_knee = th;
                a.spine_pitch = -deg(30.0) * lean - deg(5.0) * s;
                a.l_hip_abd = deg(self.lerp(1, 0.0, 10.0)) * s;
                a.r_hip_abd = deg(self.lerp(1, 0.0, 10.0)) * s;
                a.l_arm_swing = deg(self.lerp(2, 20.0, 50.0)) * s + deg(4.0) * sin(w(0.15) + self.phase[0]);
                a.r_arm_swing = deg(self.lerp(3, 20.0, 50.0)) * s + deg(4.0) * sin(w(0.12) + self.phase[1]);
                a.l_elbow = deg(self.lerp(4, 10.0, 60.0)) * s + deg(10.0);
                a.r_elbow = deg(self.lerp(5, 10.0, 60.0)) * s + deg(10.0);
                a.neck_yaw = deg(10.0) * sin(w(0.07) + self.phase[2]);
                a.root_offset = Vec3::new(0.0, -thigh * th.sin(), -thigh * (1.0 - th.cos()));
            }
            MotionKind::ArmSwing => {
                let f = self.lerp(0, 0.5, 1.0);
                let amp = deg(self.lerp(1, 40.0, 80.0));
                a.l_arm_swing = amp * sin(w(f) + self.phase[0]);
                a.r_arm_swing = amp * sin(w(f * self.lerp(2, 0.8, 1.2)) + self.phase[1]);
                a.l_arm_down = deg(78.0) - deg(self.lerp(3, 10.0, 40.0)) * (0.5 - 0.5 * (w(f * 0.5)).cos());
                a.r_arm_down = deg(78.0) - deg(self.lerp(4, 10.0, 40.0)) * (0.5 - 0.5 * (w(f * 0.6)).cos());
                a.l_elbow = deg(self.lerp(5, 20.0, 90.0)) * (0.5 - 0.5 * (w(f) + self.phase[2]).cos());
                a.r_elbow = deg(self.lerp(6, 20.0, 90.0)) * (0.5 - 0.5 * (w(f) + self.phase[3]).cos());
                a.spine_roll = deg(4.0) * sin(w(f) + self.phase[0]);
                a.root_yaw = deg(self.lerp(7, 5.0, 15.0)) * sin(w(f * 0.5));
                a.l_knee = deg(5.0) * (0.5 - 0.5 * (w(f)).cos());
                a.r_knee = a.l_knee;
            }
        }
        a
    }
}

const SIT_TRANSITION_S: f64 = 1.6;

/// Generates one clip of `duration_s` seconds: a T-pose hold, a blend, then the motion.
pub fn generate_clip(skel: &Skeleton, kind: MotionKind, rng: &mut Rng, duration_s: f64, name: &str) -> MotionClip {
    let frames = (duration_s / IMU_DT).round() as usize;
    let script = Script::new(kind, rng, duration_s);
    let base = Vec3::new(0.0, 0.0, skel.standing_root_height());
    let mut local_rotations = Vec::with_capacity(frames);
    let mut root_translation = Vec::with_capacity(frames);
    for f in 0..frames {
        let t = f as f64 * IMU_DT;
        let tau = (t - TPOSE_HOLD_S).max(0.0);
        let beta = smoothstep(tau / TPOSE_BLEND_S);
        let a = script.angles(skel, tau).scaled(beta);
        local_rotations.push(a.locals());
        root_translation.push(base + a.root_offset);
    }
    MotionClip { name: name.to_string(), kind, rate_hz: 1.0 / IMU_DT, local_rotations, root_translation }
}

/// One clip per catalog entry, deterministic for a fixed seed.
pub fn generate_motion_suite(seed: u64, catalog: &[&str], skel: &Skeleton, duration_s: f64) -> Result<Vec<MotionClip>> {
    if catalog.is_empty() {
        return Err(Error::Config("motion catalog is empty".into()));
    }
    let kinds = catalog.iter().map(|s| s.parse::<MotionKind>()).collect::<Result<Vec<_>>>()?;
    if duration_s < TPOSE_HOLD_S + TPOSE_BLEND_S {
        return Err(Error::Config(alloc::format!("clip duration {duration_s} s is shorter than the T-pose lead-in")));
    }
    Ok(kinds
        .iter()
        .enumerate()
        .map(|(i, &kind)| {
            let mut rng = Rng::derive(seed, i as u64);
            generate_clip(skel, kind, &mut rng, duration_s, &alloc::format!("{:02}-{}", i, kind.as_str()))
        })
        .collect())
}
