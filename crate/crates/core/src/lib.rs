//! Sensing, filtering and pose-estimation core for sparse-IMU + UWB motion capture.
//!
//! The crate is `no_std` (it only needs `alloc`) and contains no IO. It covers:
//!
//! * [`math`]: vectors, quaternions, small dense matrices, a seedable RNG, and a
//!   scalar reverse-mode autodiff tape with a finite-difference checker.
//! * [`skeleton`]: an articulated 16-joint capsule body, forward kinematics,
//!   virtual sensor placement, occlusion ratios and a procedural motion suite.
//! * [`imu`]: raw IMU synthesis, T-pose calibration and an orientation filter.
//! * [`uwb`]: an event-driven broadcast two-way ranging simulator, ToF
//!   resolution, occlusion-dependent noise and RANSAC affine calibration.
//! * [`ekf`]: the pair-wise EKF that fuses dead reckoning with gated ranges.
//! * [`posenet`]: the LSTM + distance-attention GCN position estimator, fusion,
//!   kinematics decoder, losses and an Adam training loop.
//! * [`metrics`]: SIP error, root-aligned position error, jitter and splits.
//! * [`pipeline`]: in-memory glue from a motion clip to model inputs.
#![no_std]

extern crate alloc;

pub mod ekf;
pub mod error;
pub mod imu;
pub mod math;
pub mod metrics;
pub mod pipeline;
pub mod posenet;
pub mod skeleton;
pub mod uwb;

pub use error::{Error, Result};

/// Number of body-worn sensors.
pub const NUM_SENSORS: usize = 6;
/// Number of unordered sensor pairs.
pub const NUM_PAIRS: usize = NUM_SENSORS * (NUM_SENSORS - 1) / 2;
/// IMU sample rate in Hz.
pub const IMU_RATE_HZ: f64 = 100.0;
/// IMU sample period in seconds.
pub const IMU_DT: f64 = 0.01;

/// All unordered sensor pairs `(i, j)` with `i < j`, in row-major order.
pub fn sensor_pairs() -> [(usize, usize); NUM_PAIRS] {
    let mut out = [(0, 0); NUM_PAIRS];
    let mut k = 0;
    for i in 0..NUM_SENSORS {
        for j in (i + 1)..NUM_SENSORS {
            out[k] = (i, j);
            k += 1;
        }
    }
    out
}
