//! Raw IMU synthesis, T-pose calibration and orientation estimation.
//!
//! Accelerometer convention: a stationary sensor measures the gravity
//! reaction `+g` along world z, rotated into the sensor frame. Gyroscope sample
//! `t` is the body rate that carries orientation `t` to orientation `t + 1`.

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods exist only when std is in the build graph
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::math::{Quaternion, Rng, Vec3, GRAVITY_REACTION};
use crate::{Error, Result, IMU_DT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub t: f64,
    /// Specific force in the sensor frame (m/s²).
    pub accel: Vec3,
    /// Angular rate in the sensor frame (rad/s).
    pub gyro: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuNoiseModel {
    pub accel_sigma: f64,
    pub gyro_sigma: f64,
    pub gyro_bias: Vec3,
    pub accel_bias: Vec3,
}

impl ImuNoiseModel {
    pub const NONE: ImuNoiseModel =
        ImuNoiseModel { accel_sigma: 0.0, gyro_sigma: 0.0, gyro_bias: Vec3::ZERO, accel_bias: Vec3::ZERO };
}

impl Default for ImuNoiseModel {
    /// White noise typical of a consumer 6-DoF IMU at 100 Hz, no bias.
    fn default() -> Self {
        Self { accel_sigma: 0.02, gyro_sigma: 0.002, gyro_bias: Vec3::ZERO, accel_bias: Vec3::ZERO }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientationEstimate {
    /// Sensor-to-world orientation.
    pub q: Quaternion,
    /// Gravity-compensated world-frame acceleration (m/s²).
    pub accel: Vec3,
}

/// World-frame acceleration by the strided central difference
/// `(p[t+n] − 2p[t] + p[t−n]) / (nΔt)²`, with the first and last `n` samples
/// replicated from their nearest interior neighbour.
pub fn synthesize_accel(positions: &[Vec3], n: usize) -> Result<Vec<Vec3>> {
    assert!(n >= 1, "synthesize_accel: stride must be at least 1");
    if positions.len() <= 2 * n {
        return Err(Error::TooShort { need: 2 * n, got: positions.len() });
    }
    let h2 = (n as f64 * IMU_DT) * (n as f64 * IMU_DT);
    let len = positions.len();
    let interior = |t: usize| (positions[t + n] - positions[t] * 2.0 + positions[t - n]) / h2;
    Ok((0..len).map(|t| interior(t.clamp(n, len - n - 1))).collect())
}

/// Body-frame angular rate `ω_t = 2·log(q_t⁻¹ q_{t+1}) / Δt`; the last sample is replicated.
///
/// Panics if consecutive orientations are more than 90° apart.
pub fn synthesize_gyro(orientations: &[Quaternion]) -> Vec<Vec3> {
    let mut out: Vec<Vec3> = orientations
        .windows(2)
        .map(|w| {
            let rel = w[0].conjugate() * w[1];
            assert!(
                rel.angle() <= core::f64::consts::FRAC_PI_2,
                "synthesize_gyro: consecutive orientations more than 90° apart"
            );
            rel.to_rotation_vector() / IMU_DT
        })
        .collect();
    if let Some(&last) = out.last() {
        out.push(last);
    } else if !orientations.is_empty() {
        out.push(Vec3::ZERO);
    }
    out
}

/// Raw sensor-frame IMU stream for one sensor trajectory.
pub fn synthesize_raw_imu(
    positions: &[Vec3],
    orientations: &[Quaternion],
    noise: &ImuNoiseModel,
    rng: &mut Rng,
    stride: usize,
) -> Result<Vec<SensorFrame>> {
    if positions.len() != orientations.len() {
        return Err(Error::Shape("positions and orientations differ in length".into()));
    }
    let accel = synthesize_accel(positions, stride)?;
    let gyro = synthesize_gyro(orientations);
    let mut noisy = |sigma: f64| Vec3::new(rng.normal(), rng.normal(), rng.normal()) * sigma;
    Ok(orientations
        .iter()
        .enumerate()
        .map(|(t, q)| {
            let f = q.conjugate().rotate(accel[t] + GRAVITY_REACTION);
            SensorFrame {
                t: t as f64 * IMU_DT,
                accel: f + noise.accel_bias + noisy(noise.accel_sigma),
                gyro: gyro[t] + noise.gyro_bias + noisy(noise.gyro_sigma),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuOffsets {
    pub gyro: Vec3,
    pub accel: Vec3,
}

/// Gyro std above which the calibration window is considered moving (rad/s).
pub const CALIBRATION_MAX_GYRO_STD: f64 = 0.05;

/// Estimates gyro and accelerometer offsets from a stationary T-pose window.
///
/// `tpose_orientation` is the sensor's known world orientation while held in T-pose.
pub fn tpose_calibrate(frames: &[SensorFrame], tpose_orientation: Quaternion) -> Result<ImuOffsets> {
    let need = (1.0 / IMU_DT).round() as usize;
    if frames.len() < need {
        return Err(Error::CalibrationFailed(alloc::format!(
            "need at least {need} stationary frames, got {}",
            frames.len()
        )));
    }
    let n = frames.len() as f64;
    let mean = |f: &dyn Fn(&SensorFrame) -> Vec3| frames.iter().fold(Vec3::ZERO, |acc, fr| acc + f(fr)) / n;
    let gyro_mean = mean(&|f| f.gyro);
    let accel_mean = mean(&|f| f.accel);
    let var = frames.iter().map(|f| (f.gyro - gyro_mean).norm_squared()).sum::<f64>() / n;
    // per-axis std from the summed variance of three axes
    let gyro_std = (var / 3.0).sqrt();
    if gyro_std > CALIBRATION_MAX_GYRO_STD {
        return Err(Error::CalibrationFailed(alloc::format!(
            "sensor moved during calibration (gyro std {gyro_std:.4} rad/s)"
        )));
    }
    let expected = tpose_orientation.conjugate().rotate(GRAVITY_REACTION);
    Ok(ImuOffsets { gyro: gyro_mean, accel: accel_mean - expected })
}

pub fn apply_offsets(frames: &[SensorFrame], offsets: &ImuOffsets) -> Vec<SensorFrame> {
    frames.iter().map(|f| SensorFrame { t: f.t, accel: f.accel - offsets.accel, gyro: f.gyro - offsets.gyro }).collect()
}

/// A per-sensor attitude estimator producing orientation and world acceleration.
pub trait AttitudeFilter {
    fn step(&mut self, frame: &SensorFrame) -> OrientationEstimate;
}

/// Accelerometer norm window (m/s²) inside which tilt correction is applied.
pub const ACCEL_GATE: (f64, f64) = (8.5, 11.0);

/// Default time constant of the world-frame force low-pass (s).
pub const DEFAULT_FORCE_TAU: f64 = 3.0;
/// Default tilt-correction gain per 100 Hz step.
pub const DEFAULT_GAIN: f64 = 0.002;

/// Gyro integration with gated accelerometer tilt correction.
///
/// Each step integrates the previous gyro sample and rotates the measured
/// specific force into the world frame, where it is low-passed so that
/// body accelerations average out. When the filtered force norm is inside
/// [`ACCEL_GATE`] the estimate is rotated by `gain` of the tilt that aligns it
/// with world up. The correction axis is horizontal, so heading is never touched.
#[derive(Debug, Clone)]
pub struct ComplementaryFilter {
    q: Quaternion,
    gain: f64,
    tau: f64,
    prev_gyro: Option<Vec3>,
    // low-passed world-frame specific force
    force_lp: Option<Vec3>,
}

impl ComplementaryFilter {
    /// Panics unless `0 < gain < 1`.
    pub fn new(gain: f64, init: Quaternion) -> Self {
        assert!(gain > 0.0 && gain < 1.0, "orientation filter gain must be in (0, 1)");
        Self { q: init.normalized(), gain, tau: DEFAULT_FORCE_TAU, prev_gyro: None, force_lp: None }
    }

    /// Time constant of the world-frame force low-pass; 0 disables it.
    pub fn with_force_time_constant(mut self, tau: f64) -> Self {
        self.tau = tau.max(0.0);
        self
    }

    pub fn orientation(&self) -> Quaternion {
        self.q
    }
}

impl AttitudeFilter for ComplementaryFilter {
    fn step(&mut self, frame: &SensorFrame) -> OrientationEstimate {
        if let Some(w) = self.prev_gyro {
            self.q = (self.q * Quaternion::from_rotation_vector(w * IMU_DT)).normalized();
        }
        self.prev_gyro = Some(frame.gyro);
        let force = self.q.rotate(frame.accel);
        let alpha = if self.tau > 0.0 { (IMU_DT / self.tau).min(1.0) } else { 1.0 };
        let lp = match self.force_lp {
            Some(lp) => lp + (force - lp) * alpha,
            None => force,
        };
        self.force_lp = Some(lp);
        let norm = lp.norm();
        if norm > ACCEL_GATE.0 && norm < ACCEL_GATE.1 {
            let up = lp / norm;
            let axis = up.cross(Vec3::Z);
            let angle = axis.norm().atan2(up.dot(Vec3::Z));
            if angle > 1e-12 {
                let corr = Quaternion::from_axis_angle(axis, self.gain * angle);
                self.q = (corr * self.q).normalized();
                // keep the filtered force consistent with the corrected frame
                self.force_lp = Some(corr.rotate(lp));
            }
        }
        OrientationEstimate { q: self.q, accel: self.q.rotate(frame.accel) - GRAVITY_REACTION }
    }
}

/// Runs a [`ComplementaryFilter`] over a calibrated stream.
pub fn orientation_filter(frames: &[SensorFrame], gain: f64, init: Quaternion) -> Vec<OrientationEstimate> {
    let mut f = ComplementaryFilter::new(gain, init);
    frames.iter().map(|fr| f.step(fr)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::{FRAC_PI_2, PI};

    fn stationary(q: Quaternion, n: usize, noise: &ImuNoiseModel, seed: u64) -> Vec<SensorFrame> {
        let mut rng = Rng::seed_from(seed);
        synthesize_raw_imu(&vec![Vec3::ZERO; n], &vec![q; n], noise, &mut rng, 1).unwrap()
    }

    #[test]
    fn accel_exact_on_quadratic() {
        let g = Vec3::new(0.0, 0.0, -9.81);
        let p: Vec<Vec3> = (0..50).map(|t| g * (0.5 * (t as f64 * IMU_DT).powi(2))).collect();
        for a in synthesize_accel(&p, 4).unwrap() {
            assert!((a - g).norm() < 1e-9, "{a:?}");
        }
        let c = synthesize_accel(&vec![Vec3::new(1.0, 2.0, 3.0); 10], 1).unwrap();
        assert!(c.iter().all(|a| *a == Vec3::ZERO));
        assert!(matches!(synthesize_accel(&[Vec3::ZERO; 8], 4), Err(Error::TooShort { .. })));
    }

    #[test]
    fn accel_second_order_on_sine() {
        let p: Vec<Vec3> = (0..200).map(|t| Vec3::new((2.0 * PI * t as f64 * IMU_DT).sin(), 0.0, 0.0)).collect();
        let a = synthesize_accel(&p, 1).unwrap();
        for t in 1..199 {
            let exact = -(2.0 * PI).powi(2) * (2.0 * PI * t as f64 * IMU_DT).sin();
            // truncation error of the central difference is h²/12 · p'''' ≤ (2π)⁴ h² / 12
            let bound = (2.0 * PI).powi(4) * IMU_DT * IMU_DT / 12.0 + 1e-9;
            assert!((a[t].x - exact).abs() <= bound);
        }
    }

    #[test]
    fn gyro_cases() {
        let q = Quaternion::from_axis_angle(Vec3::new(1.0, 1.0, 0.0), 0.4);
        assert!(synthesize_gyro(&[q; 5]).iter().all(|w| w.norm() < 1e-12));
        let spin: Vec<Quaternion> =
            (0..101).map(|t| Quaternion::from_axis_angle(Vec3::Z, FRAC_PI_2 * t as f64 * IMU_DT)).collect();
        for w in synthesize_gyro(&spin) {
            assert!((w - Vec3::new(0.0, 0.0, FRAC_PI_2)).norm() < 1e-9);
        }
    }

    #[test]
    fn gyro_reintegration_round_trip() {
        let mut rng = Rng::seed_from(2);
        let (a, b, c) = (rng.normal(), rng.normal(), rng.normal());
        let qs: Vec<Quaternion> = (0..101)
            .map(|t| {
                let s = t as f64 * IMU_DT;
                Quaternion::from_rotation_vector(Vec3::new(a * s.sin(), b * (2.0 * s).cos(), c * s * s))
            })
            .collect();
        let w = synthesize_gyro(&qs);
        let mut q = qs[0];
        for wt in &w[..100] {
            q = q * Quaternion::from_rotation_vector(*wt * IMU_DT);
        }
        assert!(q.angle_to(qs[100]).to_degrees() < 0.1);
    }

    #[test]
    #[should_panic(expected = "90°")]
    fn gyro_rejects_large_jumps() {
        synthesize_gyro(&[Quaternion::IDENTITY, Quaternion::from_axis_angle(Vec3::X, 2.0)]);
    }

    #[test]
    fn calibration_recovers_bias() {
        let mount = Quaternion::from_axis_angle(Vec3::new(0.3, -1.0, 0.2), 1.1);
        let bias = ImuNoiseModel {
            accel_sigma: 0.0,
            gyro_sigma: 0.0,
            gyro_bias: Vec3::new(0.01, -0.02, 0.005),
            accel_bias: Vec3::new(0.1, 0.05, -0.2),
        };
        let off = tpose_calibrate(&stationary(mount, 150, &bias, 1), mount).unwrap();
        assert!((off.gyro - bias.gyro_bias).norm() < 1e-12);
        assert!((off.accel - bias.accel_bias).norm() < 1e-12);

        let noisy = ImuNoiseModel { accel_sigma: 0.01, gyro_sigma: 0.01, ..bias };
        let off = tpose_calibrate(&stationary(mount, 200, &noisy, 9), mount).unwrap();
        let tol = 3.0 * 0.01 / 200f64.sqrt();
        for k in 0..3 {
            assert!((off.gyro[k] - bias.gyro_bias[k]).abs() < tol);
            assert!((off.accel[k] - bias.accel_bias[k]).abs() < tol);
        }
    }

    #[test]
    fn calibration_rejects_motion_and_short_windows() {
        let spin: Vec<Quaternion> =
            (0..150).map(|t| Quaternion::from_axis_angle(Vec3::Z, (t as f64 * 0.05).sin())).collect();
        let mut rng = Rng::seed_from(3);
        let frames = synthesize_raw_imu(&vec![Vec3::ZERO; 150], &spin, &ImuNoiseModel::NONE, &mut rng, 1).unwrap();
        assert!(matches!(tpose_calibrate(&frames, Quaternion::IDENTITY), Err(Error::CalibrationFailed(_))));
        let short = stationary(Quaternion::IDENTITY, 50, &ImuNoiseModel::NONE, 1);
        assert!(matches!(tpose_calibrate(&short, Quaternion::IDENTITY), Err(Error::CalibrationFailed(_))));
    }

    #[test]
    fn stationary_fixed_point() {
        let q = Quaternion::from_axis_angle(Vec3::new(1.0, 2.0, 3.0), 0.8);
        let est = orientation_filter(&stationary(q, 300, &ImuNoiseModel::NONE, 1), 0.01, q);
        for e in est {
            assert!(e.q.angle_to(q) < 1e-9);
            assert!(e.accel.norm() < 1e-9);
        }
    }

    #[test]
    fn roll_converges_from_tilted_init() {
        let q = Quaternion::IDENTITY;
        let init = Quaternion::from_axis_angle(Vec3::X, 10f64.to_radians());
        let est = orientation_filter(&stationary(q, 500, &ImuNoiseModel::NONE, 1), 0.01, init);
        assert!(est.last().unwrap().q.angle_to(q).to_degrees() < 1.0);
    }

    #[test]
    fn gravity_compensation_under_noise() {
        let noise = ImuNoiseModel { accel_sigma: 0.05, gyro_sigma: 0.002, ..ImuNoiseModel::NONE };
        let q = Quaternion::from_axis_angle(Vec3::Y, 0.3);
        let est = orientation_filter(&stationary(q, 1000, &noise, 4), 0.01, q);
        let mean = est.iter().fold(Vec3::ZERO, |a, e| a + e.accel) / est.len() as f64;
        assert!(mean.norm() < 3.0 * noise.accel_sigma);
    }

    #[test]
    #[should_panic(expected = "gain")]
    fn filter_rejects_bad_gain() {
        ComplementaryFilter::new(1.0, Quaternion::IDENTITY);
    }
}
