use uip_core::imu::*;
use uip_core::math::{Quaternion, Rng, Vec3};
use uip_core::skeleton::*;

#[test]
fn zero_noise_round_trip_on_sixty_second_clips() {
    let skel = Skeleton::standard(1.7).unwrap();
    let placement = SensorPlacement::standard(&skel);
    let kinds = ["walk", "squat", "arm-swing", "sit-stand", "idle"];
    let clips = generate_motion_suite(11, &kinds, &skel, 60.0).unwrap();
    for clip in &clips {
        let truth = sensor_truth(&skel, clip, &placement);
        for s in 0..6 {
            let p: Vec<Vec3> = truth.iter().map(|f| f[s].position).collect();
            let q: Vec<Quaternion> = truth.iter().map(|f| f[s].orientation).collect();
            let frames = synthesize_raw_imu(&p, &q, &ImuNoiseModel::NONE, &mut Rng::seed_from(0), 1).unwrap();
            let acc = synthesize_accel(&p, 1).unwrap();
            let est = orientation_filter(&frames, DEFAULT_GAIN, q[0]);
            let mut worst = 0.0f64;
            let mut accel_err = 0.0;
            for (t, e) in est.iter().enumerate() {
                worst = worst.max(e.q.angle_to(q[t]).to_degrees());
                accel_err += (e.accel - acc[t]).norm();
            }
            accel_err /= est.len() as f64;
            assert!(worst < 0.5, "{} sensor {s}: orientation error {worst:.3}°", clip.name);
            assert!(accel_err < 0.05, "{} sensor {s}: mean accel error {accel_err:.4}", clip.name);
        }
    }
}

#[test]
fn yaw_drift_is_linear_in_gyro_bias() {
    let bias = 0.002;
    let n = 6000;
    let noise = ImuNoiseModel { gyro_bias: Vec3::new(0.0, 0.0, bias), ..ImuNoiseModel::default() };
    let q = Quaternion::IDENTITY;
    let frames = synthesize_raw_imu(&vec![Vec3::ZERO; n], &vec![q; n], &noise, &mut Rng::seed_from(4), 1).unwrap();
    let est = orientation_filter(&frames, DEFAULT_GAIN, q);
    let ts: Vec<f64> = frames.iter().map(|f| f.t).collect();
    let yaw: Vec<f64> = est.iter().map(|e| e.q.yaw()).collect();

    let mt = ts.iter().sum::<f64>() / n as f64;
    let my = yaw.iter().sum::<f64>() / n as f64;
    let sxy: f64 = ts.iter().zip(&yaw).map(|(t, y)| (t - mt) * (y - my)).sum();
    let sxx: f64 = ts.iter().map(|t| (t - mt).powi(2)).sum();
    let syy: f64 = yaw.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = sxy * sxy / (sxx * syy);
    println!("yaw drift {:.3}°/min, R² {r2:.5}", slope.to_degrees() * 60.0);
    // line fit to integrated white gyro noise: var(slope) ≈ 1.2·σ²·Δt / T
    let duration = n as f64 * 0.01;
    let slope_sd = (1.2 * noise.gyro_sigma.powi(2) * 0.01 / duration).sqrt();
    assert!((slope - bias).abs() < 4.0 * slope_sd, "slope {slope}, sd {slope_sd}");
    assert!(r2 > 0.99, "R² {r2}");
}

#[test]
fn stationary_gravity_compensation_within_three_sigma() {
    let noise = ImuNoiseModel::default();
    for (seed, q) in [
        (1, Quaternion::IDENTITY),
        (2, Quaternion::from_axis_angle(Vec3::X, 1.2)),
        (3, Quaternion::from_axis_angle(Vec3::new(1.0, -2.0, 0.5), 2.5)),
    ] {
        let n = 2000;
        let frames =
            synthesize_raw_imu(&vec![Vec3::ZERO; n], &vec![q; n], &noise, &mut Rng::seed_from(seed), 1).unwrap();
        let est = orientation_filter(&frames, DEFAULT_GAIN, q);
        let mean = est.iter().map(|e| e.accel.norm()).sum::<f64>() / n as f64;
        assert!(mean < 3.0 * noise.accel_sigma, "mean |â| {mean}");
    }
}

#[test]
fn tpose_calibration_recovers_bias_statistically() {
    let sigma = 0.01;
    let bias = Vec3::new(0.03, -0.02, 0.05);
    let q = Quaternion::from_axis_angle(Vec3::Y, 0.7);
    let noise = ImuNoiseModel { accel_sigma: sigma, gyro_sigma: sigma, gyro_bias: bias, accel_bias: bias };
    let n = 200;
    let frames = synthesize_raw_imu(&vec![Vec3::ZERO; n], &vec![q; n], &noise, &mut Rng::seed_from(9), 1).unwrap();
    let off = tpose_calibrate(&frames, q).unwrap();
    let tol = 3.0 * sigma / (n as f64).sqrt();
    for k in 0..3 {
        assert!((off.gyro[k] - bias[k]).abs() < tol);
        assert!((off.accel[k] - bias[k]).abs() < tol);
    }
}
