//! Pair-wise EKF fusing dead-reckoned relative motion with gated UWB ranges.
//!
//! State per pair `(i, j)`: relative position `x = p_j − p_i` and velocity
//! `v` in the world frame, with a 6×6 covariance. The relative orientation
//! `q_ij` is overwritten from the attitude estimates every prediction and
//! carries no covariance.

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods exist only when std is in the build graph
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::imu::OrientationEstimate;
use crate::math::{quat_relative, Mat, Quaternion, Vec3};
use crate::skeleton::{JointPose, SensorPlacement, Skeleton, HEIGHT_RANGE};
use crate::uwb::RawDistanceFrame;
use crate::{sensor_pairs, Result, NUM_PAIRS, NUM_SENSORS};

pub const INIT_SIGMA_X: f64 = 0.05;
pub const INIT_SIGMA_V: f64 = 0.01;
pub const GATE_MARGIN: f64 = 1.05;
/// Norms below this use a zero Jacobian row.
pub const MIN_NORM: f64 = 1e-3;
/// Ranges older than this (s) mark a pair invalid in the output mask.
pub const MASK_STALE_S: f64 = 1.0;
/// Longest gap between accepted ranges (s) for a range-rate speed measurement.
pub const RANGE_RATE_MAX_GAP: f64 = 0.2;

/// Source of the speed component of the measurement vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpeedMeasurement {
    /// Distance only.
    Off,
    /// The predicted speed `‖v‖` itself: zero innovation, covariance-only effect.
    #[default]
    PredictedSpeed,
    /// |Δd|/Δt of consecutive accepted ranges, a soft damping target.
    RangeRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub a_i: Vec3,
    pub a_j: Vec3,
    pub q_i: Quaternion,
    pub q_j: Quaternion,
}

impl ControlInput {
    pub fn from_estimates(e_i: &OrientationEstimate, e_j: &OrientationEstimate) -> Self {
        Self { a_i: e_i.accel, a_j: e_j.accel, q_i: e_i.q, q_j: e_j.q }
    }

    /// `[a_i, a_j, vec(q_i), vec(q_j)]`, the 12 inputs `Σ_u` refers to.
    pub fn to_array(&self) -> [f64; 12] {
        let mut u = [0.0; 12];
        let parts = [self.a_i, self.a_j, self.q_i.vector(), self.q_j.vector()];
        for (k, p) in parts.iter().enumerate() {
            u[3 * k..3 * k + 3].copy_from_slice(&p.to_array());
        }
        u
    }

    fn is_finite(&self) -> bool {
        self.a_i.is_finite() && self.a_j.is_finite() && self.q_i.is_finite() && self.q_j.is_finite()
    }
}

/// Why an update did or did not change the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpdateEvent {
    Applied,
    Gated,
    SingularInnovation,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairState {
    pub i: usize,
    pub j: usize,
    pub x: Vec3,
    pub v: Vec3,
    pub q: Quaternion,
    pub p: Mat,
    pub diverged: bool,
    /// Time and value of the last accepted range, for range-rate speed.
    last_range: Option<(f64, f64)>,
}

/// `f(s, u)` of the constant-acceleration relative motion model.
pub fn process_model(s: &[f64; 6], u: &[f64; 12], dt: f64) -> [f64; 6] {
    let mut out = [0.0; 6];
    for k in 0..3 {
        let da = u[3 + k] - u[k];
        out[k] = s[k] + dt * s[3 + k] + 0.5 * dt * dt * da;
        out[3 + k] = s[3 + k] + dt * da;
    }
    out
}

/// `(F, W)`: Jacobians of [`process_model`] w.r.t. state (6×6) and input (6×12).
pub fn process_jacobians(dt: f64) -> (Mat, Mat) {
    let mut f = Mat::identity(6);
    let mut w = Mat::zeros(6, 12);
    for k in 0..3 {
        f[(k, 3 + k)] = dt;
        w[(k, k)] = -0.5 * dt * dt;
        w[(k, 3 + k)] = 0.5 * dt * dt;
        w[(3 + k, k)] = -dt;
        w[(3 + k, 3 + k)] = dt;
    }
    (f, w)
}

/// `h(s) = [‖x‖, ‖v‖]`.
pub fn measurement_model(s: &[f64; 6]) -> [f64; 2] {
    let x = Vec3::new(s[0], s[1], s[2]);
    let v = Vec3::new(s[3], s[4], s[5]);
    [x.norm(), v.norm()]
}

/// 2×6 Jacobian of [`measurement_model`]; rows for near-zero norms are zero.
pub fn measurement_jacobian(s: &[f64; 6]) -> Mat {
    let mut h = Mat::zeros(2, 6);
    for row in 0..2 {
        let v = Vec3::new(s[3 * row], s[3 * row + 1], s[3 * row + 2]);
        let n = v.norm();
        if n >= MIN_NORM {
            for k in 0..3 {
                h[(row, 3 * row + k)] = v[k] / n;
            }
        }
    }
    h
}

/// Diagonal `Σ_u` from per-axis acceleration and quaternion-vector noise.
pub fn input_covariance(accel_sigma: f64, quat_sigma: f64) -> Mat {
    let mut d = [0.0; 12];
    d[..6].fill(accel_sigma * accel_sigma);
    d[6..].fill(quat_sigma * quat_sigma);
    Mat::diag(&d)
}

impl PairState {
    /// State from the two sensor poses: `x = p_j − p_i`, `v = 0`.
    pub fn from_poses(i: usize, j: usize, pose_i: &JointPose, pose_j: &JointPose) -> Self {
        let sx = INIT_SIGMA_X * INIT_SIGMA_X;
        let sv = INIT_SIGMA_V * INIT_SIGMA_V;
        Self {
            i,
            j,
            x: pose_j.position - pose_i.position,
            v: Vec3::ZERO,
            q: quat_relative(pose_i.orientation, pose_j.orientation),
            p: Mat::diag(&[sx, sx, sx, sv, sv, sv]),
            diverged: false,
            last_range: None,
        }
    }

    pub fn state_vector(&self) -> [f64; 6] {
        [self.x.x, self.x.y, self.x.z, self.v.x, self.v.y, self.v.z]
    }

    fn set_state_vector(&mut self, s: &[f64]) {
        self.x = Vec3::new(s[0], s[1], s[2]);
        self.v = Vec3::new(s[3], s[4], s[5]);
    }

    /// `d̂ = ‖x‖`.
    pub fn distance_estimate(&self) -> f64 {
        self.x.norm()
    }

    /// Dead-reckoning step. Non-finite inputs mark the filter diverged.
    pub fn predict(&self, u: &ControlInput, dt: f64, sigma_u: &Mat) -> PairState {
        let mut out = self.clone();
        if self.diverged {
            return out;
        }
        if !u.is_finite() || !dt.is_finite() {
            out.diverged = true;
            return out;
        }
        let s = process_model(&self.state_vector(), &u.to_array(), dt);
        out.set_state_vector(&s);
        out.q = quat_relative(u.q_i.normalized(), u.q_j.normalized());
        let (f, w) = process_jacobians(dt);
        let q = &(&w * sigma_u) * &w.transpose();
        out.p = (&(&(&f * &self.p) * &f.transpose()) + &q).symmetrized();
        if !out.p.is_finite() {
            out.diverged = true;
        }
        out
    }

    /// Range correction at time `t` with measurement covariance `r` (2×2;
    /// only `r[(0,0)]` is used when speed is off). Ranges outside `gate`
    /// return the state unchanged.
    pub fn update(
        &self,
        t: f64,
        d_raw: f64,
        gate: (f64, f64),
        r: &Mat,
        speed: SpeedMeasurement,
    ) -> (PairState, UpdateEvent) {
        if self.diverged {
            return (self.clone(), UpdateEvent::Diverged);
        }
        if !(d_raw >= gate.0 && d_raw <= gate.1) {
            return (self.clone(), UpdateEvent::Gated);
        }
        let s = self.state_vector();
        let pred = measurement_model(&s);
        let h_full = measurement_jacobian(&s);
        let speed_z = match speed {
            SpeedMeasurement::Off => None,
            SpeedMeasurement::PredictedSpeed => Some(pred[1]),
            SpeedMeasurement::RangeRate => self
                .last_range
                .filter(|(t0, _)| t > *t0 && t - *t0 <= RANGE_RATE_MAX_GAP)
                .map(|(t0, d0)| (d_raw - d0).abs() / (t - t0)),
        };
        let (h, r_m, innov) = match speed_z {
            None => {
                (Mat::from_vec(1, 6, h_full.row(0).to_vec()), Mat::diag(&[r[(0, 0)]]), alloc::vec![d_raw - pred[0]])
            }
            Some(z) => (h_full, r.clone(), alloc::vec![d_raw - pred[0], z - pred[1]]),
        };
        let ht = h.transpose();
        let pht = &self.p * &ht;
        let s_cov = &(&h * &pht) + &r_m;
        let Some(s_inv) = s_cov.inverse() else {
            return (self.clone(), UpdateEvent::SingularInnovation);
        };
        let k = &pht * &s_inv;
        let dx = k.mat_vec(&innov);
        let mut out = self.clone();
        let mut sv = s;
        for (a, b) in sv.iter_mut().zip(&dx) {
            *a += b;
        }
        out.set_state_vector(&sv);
        // Joseph form keeps P symmetric PSD under rounding
        let ikh = &Mat::identity(6) - &(&k * &h);
        out.p = (&(&(&ikh * &self.p) * &ikh.transpose()) + &(&(&k * &r_m) * &k.transpose())).symmetrized();
        out.last_range = Some((t, d_raw));
        if !out.p.is_finite() || !out.x.is_finite() || !out.v.is_finite() {
            out.diverged = true;
            return (out, UpdateEvent::Diverged);
        }
        (out, UpdateEvent::Applied)
    }
}

/// Initial states for all 15 pairs from the T-pose (identity local rotations).
pub fn init_from_tpose(skel: &Skeleton, placement: &SensorPlacement) -> Result<Vec<PairState>> {
    if !(HEIGHT_RANGE.0..=HEIGHT_RANGE.1).contains(&skel.height()) {
        return Err(crate::Error::Config("skeleton height outside gating assumption".into()));
    }
    let locals = alloc::vec![Quaternion::IDENTITY; skel.len()];
    let joints = skel.pose(Vec3::new(0.0, 0.0, skel.standing_root_height()), &locals);
    let poses = placement.sensor_poses(&joints);
    Ok(sensor_pairs().iter().map(|&(i, j)| PairState::from_poses(i, j, &poses[i], &poses[j])).collect())
}

/// Per-pair admissible raw-range windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateTable {
    pub bounds: [(f64, f64); NUM_PAIRS],
}

impl GateTable {
    /// Bounds from the tallest admissible body: maximal reach × 1.05, lower bound 0.
    pub fn anthropometric() -> Self {
        let skel = Skeleton::standard(HEIGHT_RANGE.1).expect("tallest standard skeleton is valid");
        Self::from_skeleton(&skel, &SensorPlacement::standard(&skel))
    }

    pub fn from_skeleton(skel: &Skeleton, placement: &SensorPlacement) -> Self {
        let m = placement.mounts();
        let mut bounds = [(0.0, 0.0); NUM_PAIRS];
        for (k, (i, j)) in sensor_pairs().into_iter().enumerate() {
            bounds[k] = (0.0, GATE_MARGIN * skel.max_reach(m[i].joint, m[i].offset, m[j].joint, m[j].offset));
        }
        Self { bounds }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EkfConfig {
    /// Per-axis std of each world acceleration input (m/s²).
    pub accel_sigma: f64,
    /// Per-component std of the quaternion inputs; has no effect on the (x, v) block.
    pub quat_sigma: f64,
    pub speed: SpeedMeasurement,
    /// Std of the speed measurement (m/s).
    pub speed_sigma: f64,
    pub output: DistanceOutput,
}

/// How `d̂` is sampled onto the IMU grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceOutput {
    /// Captured at measurement ticks and held in between.
    #[default]
    Held,
    /// Read from the propagated state every tick.
    Continuous,
}

impl Default for EkfConfig {
    fn default() -> Self {
        Self {
            accel_sigma: 0.3,
            quat_sigma: 0.01,
            speed: SpeedMeasurement::default(),
            speed_sigma: 0.5,
            output: DistanceOutput::Held,
        }
    }
}

/// Filtered distances on the IMU grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredFrame {
    pub t: f64,
    pub d: [[f64; NUM_SENSORS]; NUM_SENSORS],
    pub mask: [[bool; NUM_SENSORS]; NUM_SENSORS],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateCounts {
    pub applied: usize,
    pub gated: usize,
    pub singular: usize,
    pub diverged: usize,
}

/// The 15 pair filters advanced together.
#[derive(Debug, Clone)]
pub struct PairFilterBank {
    pub pairs: Vec<PairState>,
    gates: GateTable,
    range_sigma: [f64; NUM_PAIRS],
    config: EkfConfig,
    sigma_u: Mat,
    last_accept: [Option<f64>; NUM_PAIRS],
    /// `d̂` captured at the last measurement tick, held in between.
    held: [f64; NUM_PAIRS],
    pub counts: UpdateCounts,
}

impl PairFilterBank {
    pub fn new(init: Vec<PairState>, gates: GateTable, range_sigma: [f64; NUM_PAIRS], config: EkfConfig) -> Self {
        assert_eq!(init.len(), NUM_PAIRS, "one initial state per pair");
        let held = core::array::from_fn(|k| init[k].distance_estimate());
        Self {
            pairs: init,
            gates,
            range_sigma,
            sigma_u: input_covariance(config.accel_sigma, config.quat_sigma),
            config,
            last_accept: [None; NUM_PAIRS],
            held,
            counts: UpdateCounts::default(),
        }
    }

    pub fn predict(&mut self, est: &[OrientationEstimate; NUM_SENSORS], dt: f64) {
        for p in &mut self.pairs {
            let u = ControlInput::from_estimates(&est[p.i], &est[p.j]);
            *p = p.predict(&u, dt, &self.sigma_u);
        }
        if self.config.output == DistanceOutput::Continuous {
            for (k, p) in self.pairs.iter().enumerate() {
                self.held[k] = p.distance_estimate();
            }
        }
    }

    /// Applies every valid range of a (calibrated) frame and refreshes the held distances.
    pub fn update(&mut self, frame: &RawDistanceFrame) {
        let sv = self.config.speed_sigma * self.config.speed_sigma;
        for (k, p) in self.pairs.iter_mut().enumerate() {
            let (i, j) = (p.i, p.j);
            if frame.valid[i][j] {
                let sd = self.range_sigma[k];
                let r = Mat::diag(&[sd * sd, sv]);
                let (next, ev) = p.update(frame.t, frame.d[i][j], self.gates.bounds[k], &r, self.config.speed);
                *p = next;
                match ev {
                    UpdateEvent::Applied => {
                        self.counts.applied += 1;
                        self.last_accept[k] = Some(frame.t);
                    }
                    UpdateEvent::Gated => self.counts.gated += 1,
                    UpdateEvent::SingularInnovation => self.counts.singular += 1,
                    UpdateEvent::Diverged => self.counts.diverged += 1,
                }
            }
            self.held[k] = p.distance_estimate();
        }
    }

    pub fn any_diverged(&self) -> bool {
        self.pairs.iter().any(|p| p.diverged)
    }

    /// Held distance matrix and validity at time `t`.
    pub fn output(&self, t: f64) -> FilteredFrame {
        let mut d = [[0.0; NUM_SENSORS]; NUM_SENSORS];
        let mut mask = [[false; NUM_SENSORS]; NUM_SENSORS];
        for (k, p) in self.pairs.iter().enumerate() {
            let ok = !p.diverged && self.last_accept[k].is_some_and(|ta| t - ta <= MASK_STALE_S);
            d[p.i][p.j] = self.held[k];
            d[p.j][p.i] = self.held[k];
            mask[p.i][p.j] = ok;
            mask[p.j][p.i] = ok;
        }
        FilteredFrame { t, d, mask }
    }
}

/// Runs the bank over 100 Hz attitude estimates (`estimates[s][t]`) and a
/// calibrated 25 Hz range stream. Each IMU tick predicts, then applies any
/// round whose epoch falls on that tick. Returns one frame per IMU tick and
/// the post-update distances of every round, `(round index, d̂ matrix)`.
pub fn run_pair_filters(
    bank: &mut PairFilterBank,
    estimates: &[Vec<OrientationEstimate>],
    ranges: &[RawDistanceFrame],
    dt: f64,
) -> (Vec<FilteredFrame>, Vec<[[f64; NUM_SENSORS]; NUM_SENSORS]>) {
    assert_eq!(estimates.len(), NUM_SENSORS, "one estimate stream per sensor");
    let n = estimates[0].len();
    let mut frames = Vec::with_capacity(n);
    let mut at_rounds = Vec::with_capacity(ranges.len());
    let mut next = 0;
    for t in 0..n {
        let est: [OrientationEstimate; NUM_SENSORS] = core::array::from_fn(|s| estimates[s][t]);
        if t > 0 {
            bank.predict(&est, dt);
        }
        let now = t as f64 * dt;
        while next < ranges.len() && (ranges[next].t / dt).round() as usize <= t {
            bank.update(&ranges[next]);
            at_rounds.push(bank.output(now).d);
            next += 1;
        }
        frames.push(bank.output(now));
    }
    (frames, at_rounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Rng;

    fn pose(p: Vec3) -> JointPose {
        JointPose { position: p, orientation: Quaternion::IDENTITY }
    }

    fn state(x: Vec3, v: Vec3) -> PairState {
        let mut s = PairState::from_poses(0, 1, &pose(Vec3::ZERO), &pose(x));
        s.v = v;
        s
    }

    fn rest_input() -> ControlInput {
        ControlInput { a_i: Vec3::ZERO, a_j: Vec3::ZERO, q_i: Quaternion::IDENTITY, q_j: Quaternion::IDENTITY }
    }

    #[test]
    fn rest_prediction_only_grows_covariance() {
        let s = state(Vec3::new(0.3, 0.2, 0.1), Vec3::ZERO);
        let su = input_covariance(0.1, 0.01);
        let n = s.predict(&rest_input(), 0.01, &su);
        assert_eq!(n.x, s.x);
        let (_, w) = process_jacobians(0.01);
        let q = &(&w * &su) * &w.transpose();
        // F P Fᵀ with v-variance 1e-4 adds dt²·σ_v² to the x block
        let mut expect = (&s.p + &q).clone();
        for k in 0..3 {
            expect[(k, k)] += 1e-4 * INIT_SIGMA_V * INIT_SIGMA_V;
            expect[(k, 3 + k)] += 0.01 * INIT_SIGMA_V * INIT_SIGMA_V;
            expect[(3 + k, k)] += 0.01 * INIT_SIGMA_V * INIT_SIGMA_V;
        }
        assert!(n.p.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn constant_velocity_shift() {
        let s = state(Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0));
        let n = s.predict(&rest_input(), 0.01, &input_covariance(0.1, 0.0));
        assert!((n.x - Vec3::new(1.01, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn prediction_overwrites_relative_orientation() {
        let mut u = rest_input();
        u.q_j = Quaternion::from_axis_angle(Vec3::X, 0.5);
        let n = state(Vec3::X, Vec3::ZERO).predict(&u, 0.01, &input_covariance(0.1, 0.0));
        assert!(n.q.angle_to(u.q_j) < 1e-12);
    }

    #[test]
    fn non_finite_input_diverges() {
        let mut u = rest_input();
        u.a_i.x = f64::NAN;
        let n = state(Vec3::X, Vec3::ZERO).predict(&u, 0.01, &input_covariance(0.1, 0.0));
        assert!(n.diverged);
        let (m, ev) = n.update(0.0, 1.0, (0.0, 2.0), &Mat::diag(&[0.01, 0.01]), SpeedMeasurement::Off);
        assert_eq!(ev, UpdateEvent::Diverged);
        assert_eq!(m, n);
    }

    #[test]
    fn zero_innovation_keeps_distance_and_shrinks_covariance() {
        let s = state(Vec3::new(0.6, 0.8, 0.0), Vec3::ZERO);
        let (n, ev) = s.update(0.0, 1.0, (0.0, 2.0), &Mat::diag(&[1e-6, 1e-2]), SpeedMeasurement::PredictedSpeed);
        assert_eq!(ev, UpdateEvent::Applied);
        assert!((n.distance_estimate() - 1.0).abs() < 1e-9);
        let tr = |m: &Mat| (0..6).map(|k| m[(k, k)]).sum::<f64>();
        assert!(tr(&n.p) < tr(&s.p));
    }

    #[test]
    fn out_of_gate_range_is_ignored() {
        let s = state(Vec3::new(1.2, 0.0, 0.3), Vec3::new(0.1, 0.0, 0.0));
        let gates = GateTable::anthropometric();
        let k = sensor_pairs().iter().position(|&p| p == (2, 3)).unwrap();
        assert!(gates.bounds[k].1 < 9.0);
        let (n, ev) = s.update(0.0, 9.0, gates.bounds[k], &Mat::diag(&[0.01, 0.01]), SpeedMeasurement::PredictedSpeed);
        assert_eq!(ev, UpdateEvent::Gated);
        assert_eq!(n, s);
    }

    #[test]
    fn distance_estimate_is_norm() {
        assert_eq!(state(Vec3::new(3.0, 4.0, 0.0), Vec3::ZERO).distance_estimate(), 5.0);
        assert_eq!(state(Vec3::ZERO, Vec3::ZERO).distance_estimate(), 0.0);
    }

    #[test]
    fn measurement_jacobian_matches_finite_differences() {
        let mut rng = Rng::seed_from(3);
        for _ in 0..200 {
            let s: [f64; 6] = core::array::from_fn(|_| rng.uniform_range(-2.0, 2.0));
            let h = measurement_jacobian(&s);
            for c in 0..6 {
                let (mut a, mut b) = (s, s);
                a[c] += 1e-6;
                b[c] -= 1e-6;
                let (ha, hb) = (measurement_model(&a), measurement_model(&b));
                for r in 0..2 {
                    let fd = (ha[r] - hb[r]) / 2e-6;
                    assert!((h[(r, c)] - fd).abs() < 1e-6);
                }
            }
        }
        let z = measurement_jacobian(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(z.row(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn static_pair_filter_halves_raw_error() {
        let mut rng = Rng::seed_from(12);
        let sigma = 0.083;
        let mut s = state(Vec3::new(0.0, 1.0, 0.0), Vec3::ZERO);
        let su = input_covariance(0.05, 0.0);
        let r = Mat::diag(&[sigma * sigma, 0.25]);
        let (mut raw_se, mut filt_se, mut n) = (0.0, 0.0, 0.0);
        for t in 0..3000 {
            s = s.predict(&rest_input(), 0.01, &su);
            if t % 4 == 0 {
                let d = 1.0 + rng.gaussian(0.0, sigma);
                s = s.update(t as f64 * 0.01, d, (0.0, 3.0), &r, SpeedMeasurement::PredictedSpeed).0;
                raw_se += (d - 1.0) * (d - 1.0);
                filt_se += (s.distance_estimate() - 1.0).powi(2);
                n += 1.0;
            }
        }
        let (raw, filt) = ((raw_se / n).sqrt(), (filt_se / n).sqrt());
        assert!(filt < raw / 2.0, "filtered {filt} raw {raw}");
    }

    #[test]
    fn tpose_init_geometry() {
        let skel = Skeleton::standard(1.7).unwrap();
        let placement = SensorPlacement::standard(&skel);
        let init = init_from_tpose(&skel, &placement).unwrap();
        let joints =
            skel.pose(Vec3::new(0.0, 0.0, skel.standing_root_height()), &alloc::vec![Quaternion::IDENTITY; 16]);
        let poses = placement.sensor_poses(&joints);
        assert_eq!((init[0].i, init[0].j), (0, 1));
        let want = poses[0].position.distance(poses[1].position);
        assert!((init[0].distance_estimate() - want).abs() < 1e-12);
        for p in &init {
            assert_eq!(p.v, Vec3::ZERO);
        }
        let back = PairState::from_poses(1, 0, &poses[1], &poses[0]);
        assert_eq!(back.x, -init[0].x);
    }
}
