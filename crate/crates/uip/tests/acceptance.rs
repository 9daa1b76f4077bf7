//! Acceptance suite. Each test prints one line of the form
//! `criterion N PASS|FAIL <name>: <detail>` before asserting.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use uip::manifest::Manifest;
use uip_core::ekf::*;
use uip_core::math::{grad_check, Mat, Quaternion, Rng, Vec3};
use uip_core::metrics::*;
use uip_core::pipeline::*;
use uip_core::posenet::loss::FrameTarget;
use uip_core::posenet::train::{bind, window_loss};
use uip_core::posenet::*;
use uip_core::skeleton::*;
use uip_core::uwb::*;
use uip_core::{sensor_pairs, NUM_PAIRS, NUM_SENSORS};

fn verdict(n: usize, name: &str, ok: bool, detail: String) {
    println!("criterion {n} {} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} ({name}) failed: {detail}");
}

fn body() -> (Skeleton, SensorPlacement) {
    let skel = Skeleton::standard(1.75).unwrap();
    let placement = SensorPlacement::standard(&skel);
    (skel, placement)
}

fn random_quat(rng: &mut Rng) -> Quaternion {
    Quaternion::new(rng.normal(), rng.normal(), rng.normal(), rng.normal()).normalized()
}

fn random_vec(rng: &mut Rng, s: f64) -> Vec3 {
    Vec3::new(rng.normal(), rng.normal(), rng.normal()) * s
}

#[test]
fn c01_twr_exactness() {
    let (skel, placement) = body();
    let clip = &generate_motion_suite(1, &["walk"], &skel, 10.0).unwrap()[0];
    let positions: Vec<[Vec3; NUM_SENSORS]> =
        sensor_truth(&skel, clip, &placement).iter().map(|f| core::array::from_fn(|s| f[s].position)).collect();
    let mut rng = Rng::seed_from(1);
    let clocks: [NodeClock; NUM_SENSORS] =
        core::array::from_fn(|_| NodeClock::new(0.0, rng.uniform_range(0.0, 100.0), 0.0));
    let start = Instant::now();
    let rounds = simulate_ranging(&positions, 0.01, &clocks, 0.0, |_, _, _| 0.0, &mut rng);
    let elapsed = start.elapsed();
    let mut worst = 0.0f64;
    let mut complete = true;
    for r in &rounds {
        let k = (r.t / 0.01).round() as usize;
        for (i, j) in sensor_pairs() {
            complete &= r.valid[i][j];
            worst = worst.max((r.distances[i][j] - positions[k][i].distance(positions[k][j])).abs());
        }
    }
    let ok = rounds.len() == 250 && complete && worst < 1e-6 && elapsed < Duration::from_secs(1);
    verdict(1, "TWR exactness", ok, format!("{} rounds, max error {worst:.3e} m, {elapsed:?}", rounds.len()));
}

#[test]
fn c02_twr_rate() {
    let frames = vec![[Vec3::ZERO; NUM_SENSORS]; 1000];
    let rounds =
        simulate_ranging(&frames, 0.01, &[NodeClock::IDEAL; NUM_SENSORS], 0.0, |_, _, _| 0.0, &mut Rng::seed_from(2));
    let complete = rounds.iter().filter(|r| r.valid_pairs() == NUM_PAIRS).count();
    let ok = rounds.len() == 250 && complete == 250;
    verdict(2, "TWR rate", ok, format!("{} rounds in 10 s, {complete} complete", rounds.len()));
}

#[test]
fn c03_ransac_calibration() {
    let mut passed = 0;
    let mut worst = (0.0f64, 0.0f64);
    for trial in 0..100 {
        let mut rng = Rng::seed_from(3000 + trial);
        let truth: Vec<f64> = (0..400).map(|_| rng.uniform_range(0.2, 2.0)).collect();
        let raw: Vec<f64> = truth
            .iter()
            .map(|&x| {
                let base = 1.02 * x + 0.35 + rng.gaussian(0.0, 0.01);
                if rng.bernoulli(0.1) {
                    base + rng.uniform_range(0.5, 3.0)
                } else {
                    base
                }
            })
            .collect();
        let c = ransac_affine_calibrate(&raw, &truth, 200, 0.05, &mut rng).unwrap();
        let (es, eb) = ((c.scale - 1.02).abs(), (c.bias - 0.35).abs());
        worst = (worst.0.max(es), worst.1.max(eb));
        passed += (es < 0.005 && eb < 0.02) as usize;
    }
    verdict(
        3,
        "RANSAC calibration",
        passed == 100,
        format!("{passed}/100 trials, worst |Δscale| {:.4}, |Δbias| {:.4} m", worst.0, worst.1),
    );
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / n.abs().max(1.0)
}

#[test]
fn c04_ekf_jacobians_and_covariance() {
    let mut rng = Rng::seed_from(4);
    let eps = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let dt = rng.uniform_range(0.001, 0.05);
        let s: [f64; 6] = core::array::from_fn(|_| rng.uniform_range(-3.0, 3.0));
        let u: [f64; 12] = core::array::from_fn(|_| rng.uniform_range(-20.0, 20.0));
        let (f, w) = process_jacobians(dt);
        for c in 0..6 {
            let (mut a, mut b) = (s, s);
            a[c] += eps;
            b[c] -= eps;
            let (fa, fb) = (process_model(&a, &u, dt), process_model(&b, &u, dt));
            for r in 0..6 {
                worst = worst.max(rel_err(f[(r, c)], (fa[r] - fb[r]) / (2.0 * eps)));
            }
        }
        for c in 0..12 {
            let (mut a, mut b) = (u, u);
            a[c] += eps;
            b[c] -= eps;
            let (fa, fb) = (process_model(&s, &a, dt), process_model(&s, &b, dt));
            for r in 0..6 {
                worst = worst.max(rel_err(w[(r, c)], (fa[r] - fb[r]) / (2.0 * eps)));
            }
        }
    }

    let su = input_covariance(0.3, 0.01);
    let pose = |p| JointPose { position: p, orientation: Quaternion::IDENTITY };
    let mut s = PairState::from_poses(0, 1, &pose(Vec3::ZERO), &pose(Vec3::new(0.5, 0.2, 0.4)));
    let mut min_eig = f64::INFINITY;
    let mut symmetric = true;
    for step in 0..100_000 {
        if step % 4 == 3 {
            let d = rng.uniform_range(0.0, 2.5);
            let sd = rng.uniform_range(0.01, 0.1);
            let r = Mat::diag(&[sd * sd, 0.25]);
            s = s.update(step as f64 * 0.01, d, (0.0, 2.5), &r, SpeedMeasurement::default()).0;
        } else {
            let u = ControlInput {
                a_i: random_vec(&mut rng, 3.0),
                a_j: random_vec(&mut rng, 3.0),
                q_i: random_quat(&mut rng),
                q_j: random_quat(&mut rng),
            };
            s = s.predict(&u, 0.01, &su);
        }
        for r in 0..6 {
            for c in 0..r {
                symmetric &= s.p[(r, c)] == s.p[(c, r)];
            }
        }
        if step % 10 == 0 {
            min_eig = min_eig.min(s.p.symmetric_eigenvalues()[0]);
        }
        if s.x.norm() > 10.0 || s.v.norm() > 10.0 {
            s.x = Vec3::new(0.5, 0.2, 0.4);
            s.v = Vec3::ZERO;
        }
    }
    let ok = worst < 1e-6 && symmetric && min_eig > -1e-9 && !s.diverged;
    verdict(
        4,
        "EKF Jacobian oracle",
        ok,
        format!("max rel. error {worst:.2e} over 1000 states; 1e5 steps, min eigenvalue {min_eig:.3e}, symmetric {symmetric}"),
    );
}

#[test]
fn c05_filtering_benefit() {
    let (skel, placement) = body();
    let start = Instant::now();
    let clips = generate_motion_suite(5, &["mixed"], &skel, 60.0).unwrap();
    let sim = SimConfig::default();
    assert_eq!((sim.sigma_los, sim.sigma_nlos), (0.051, 0.083));
    let ds = build_dataset(5, &clips, &skel, &placement, &sim, &FilterConfig::default()).unwrap();
    let (raw, filt) = distance_rmse(&ds.raw[0], &ds.filtered[0]);
    let elapsed = start.elapsed();
    let mean = filt.iter().sum::<f64>() / NUM_PAIRS as f64;
    let better = (0..NUM_PAIRS).filter(|&k| filt[k] < raw[k]).count();
    let ok = better == NUM_PAIRS && mean < 0.06 && elapsed < Duration::from_secs(10);
    verdict(
        5,
        "filtering benefit",
        ok,
        format!("{better}/15 pairs filtered < raw, mean filtered RMSE {mean:.4} m, {elapsed:?}"),
    );
}

/// Seeded frames with distances from random sensor layouts and one pair dropped.
fn input_frames(n: usize, seed: u64) -> Vec<uip_core::pipeline::ModelInputFrame> {
    let mut rng = Rng::seed_from(seed);
    (0..n)
        .map(|_| {
            let pos: [Vec3; NUM_SENSORS] = core::array::from_fn(|_| random_vec(&mut rng, 0.4));
            let mut d = [[0.0; NUM_SENSORS]; NUM_SENSORS];
            let mut mask = [[false; NUM_SENSORS]; NUM_SENSORS];
            let dropped = sensor_pairs()[rng.below(NUM_PAIRS)];
            for (i, j) in sensor_pairs() {
                let v = pos[i].distance(pos[j]) + 0.02;
                d[i][j] = v;
                d[j][i] = v;
                mask[i][j] = (i, j) != dropped;
                mask[j][i] = (i, j) != dropped;
            }
            uip_core::pipeline::ModelInputFrame {
                q: core::array::from_fn(|_| random_quat(&mut rng)),
                a: core::array::from_fn(|_| random_vec(&mut rng, 4.0)),
                d,
                mask,
            }
        })
        .collect()
}

#[test]
fn c06_gradient_suite() {
    let cfg = PoseNetConfig {
        lstm_hidden: 3,
        lstm_layers: 2,
        gcn_width: 4,
        gcn_layers: 2,
        decoder_hidden: 5,
        ..PoseNetConfig::default()
    };
    let feats = features_for(&input_frames(3, 6), true).unwrap();
    let mut rng = Rng::seed_from(60);
    let targets: Vec<FrameTarget> = (0..3)
        .map(|_| {
            let mut positions: [Vec3; NUM_SENSORS] = core::array::from_fn(|_| random_vec(&mut rng, 0.4));
            positions[0] = Vec3::ZERO;
            FrameTarget {
                positions,
                rot6d: (0..NUM_LOCAL).flat_map(|_| to_6d(random_quat(&mut rng))).collect(),
                contacts: [rng.bernoulli(0.5), rng.bernoulli(0.5)],
            }
        })
        .collect();
    let w = LossWeights::default();
    let params = PoseNetParams::init(&cfg, &mut Rng::seed_from(61));
    let e = grad_check(
        |tape, leaves| window_loss(tape, &bind(&params, leaves), &feats, &targets, &w),
        &params.flat(),
        1e-6,
    )
    .unwrap();
    verdict(
        6,
        "gradient suite",
        e < 1e-4 && w.lambda == 0.01,
        format!("{} parameters, max rel. error {e:.2e}, lambda {}", params.num_parameters(), w.lambda),
    );
}

#[test]
fn c07_scale_invariance() {
    let params = PoseNetParams::init(&PoseNetConfig::compact(), &mut Rng::seed_from(7));
    let bound = Bound::from_params(&params);
    let mut checked = 0;
    let mut same = 0;
    for frame in input_frames(50, 70) {
        let base = dagcn_branch(&mut Eval, &bound, &features(&frame, true).unwrap());
        for k in [0.5, 1.3, 2.0] {
            let mut scaled = frame;
            scaled.d.iter_mut().flatten().for_each(|v| *v *= k);
            let ps = dagcn_branch(&mut Eval, &bound, &features(&scaled, true).unwrap());
            checked += 1;
            same += (ps.iter().flatten().zip(base.iter().flatten()).all(|(a, b)| a.to_bits() == b.to_bits())) as usize;
        }
    }
    verdict(7, "DA-GCN scale invariance", same == checked, format!("{same}/{checked} scaled frames bitwise identical"));
}

#[test]
fn c08_fusion_table() {
    let cfg = PoseNetConfig::default();
    let mut rng = Rng::seed_from(8);
    let pt: [Vec3; NUM_SENSORS] = core::array::from_fn(|_| random_vec(&mut rng, 1.0));
    let ps: [Vec3; NUM_SENSORS] = core::array::from_fn(|_| random_vec(&mut rng, 1.0));
    let at = |a: f64| fuse_positions(&pt, &ps, &[a; NUM_SENSORS], cfg.accel_low, cfg.accel_high);
    let blend: [Vec3; NUM_SENSORS] = core::array::from_fn(|s| pt[s] * 0.5 + ps[s] * 0.5);
    let rows = [(1.0, at(1.0) == ps, "P_s"), (5.0, at(5.0) == blend, "0.5/0.5"), (8.0, at(8.0) == pt, "P_t")];
    let ok = (cfg.accel_low, cfg.accel_high) == (2.0, 8.0) && rows.iter().all(|r| r.1);
    let detail = rows
        .iter()
        .map(|(a, ok, want)| format!("|a|={a}: {want} {}", if *ok { "exact" } else { "mismatch" }))
        .collect::<Vec<_>>();
    verdict(8, "fusion rule table", ok, detail.join(", "));
}

const TRAIN_KINDS: [&str; 10] =
    ["walk", "squat", "arm-swing", "sit-stand", "idle", "mixed", "squat", "sit-stand", "arm-swing", "walk"];
const TEST_KINDS: [&str; 3] = ["squat", "sit-stand", "idle"];

#[test]
fn c09_distances_help_on_slow_motion() {
    let (skel, placement) = body();
    let start = Instant::now();
    let mut sip_wins = 0;
    let mut jitter_wins = 0;
    let mut lines = Vec::new();
    for seed in 1..=5u64 {
        let clips = generate_motion_suite(seed, &TRAIN_KINDS, &skel, 20.0).unwrap();
        let train_set =
            build_dataset(seed, &clips, &skel, &placement, &SimConfig::default(), &FilterConfig::default()).unwrap();
        let held_out = generate_motion_suite(seed + 100, &TEST_KINDS, &skel, 20.0).unwrap();
        let test_set =
            build_dataset(seed + 100, &held_out, &skel, &placement, &SimConfig::default(), &FilterConfig::default())
                .unwrap();
        let mut slow = Vec::new();
        for use_distances in [true, false] {
            let cfg = TrainConfig { epochs: 50, windows_per_epoch: 256, use_distances, ..TrainConfig::default() };
            let (params, _) = train(&train_set.prepared, &[], &PoseNetConfig::compact(), &cfg, seed).unwrap();
            let metrics: Vec<ClipMetrics> = test_set
                .prepared
                .iter()
                .map(|c| evaluate_clip(&params, c, &skel, &placement, use_distances).unwrap().1)
                .collect();
            slow.push(split_by_acceleration(&metrics).slow.expect("held-out set has slow clips"));
        }
        let (full, ablation) = (&slow[0], &slow[1]);
        sip_wins += (full.sip_error < ablation.sip_error) as usize;
        jitter_wins += (full.jitter < ablation.jitter) as usize;
        let line = format!(
            "seed {seed}: SIP {:.2} vs {:.2} deg, jitter {:.3} vs {:.3} km/s3",
            full.sip_error, ablation.sip_error, full.jitter, ablation.jitter
        );
        println!("  {line}");
        lines.push(line);
    }
    let elapsed = start.elapsed();
    let ok = sip_wins >= 4 && jitter_wins == 5 && elapsed < Duration::from_secs(30 * 60);
    verdict(
        9,
        "distances help on slow motion",
        ok,
        format!(
            "SIP lower in {sip_wins}/5 seeds, jitter lower in {jitter_wins}/5 seeds, {:.0} s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c10_metric_oracles() {
    // x = t³ sampled at 64 Hz is exact in binary, so the third difference is too
    let cubic: Vec<Vec<Vec3>> = (0..200).map(|k| vec![Vec3::new((k as f64 / 64.0).powi(3), 0.0, 0.0)]).collect();
    let j = jitter(&cubic, 64.0).unwrap();

    let mut rng = Rng::seed_from(10);
    let frame = |rng: &mut Rng| -> Vec<JointPose> {
        (0..16).map(|_| JointPose { position: random_vec(rng, 1.0), orientation: random_quat(rng) }).collect()
    };
    let truth: Vec<Vec<JointPose>> = (0..50).map(|_| frame(&mut rng)).collect();
    let tilted: Vec<Vec<JointPose>> = truth
        .iter()
        .map(|f| {
            f.iter()
                .map(|p| {
                    let d = Quaternion::from_axis_angle(random_vec(&mut rng, 1.0), 10f64.to_radians());
                    JointPose { position: p.position, orientation: p.orientation * d }
                })
                .collect()
        })
        .collect();
    let sip = sip_error(&tilted, &truth);

    let mut worst_align = 0.0f64;
    for _ in 0..200 {
        let truth: Vec<Vec<JointPose>> = (0..3).map(|_| frame(&mut rng)).collect();
        let moved: Vec<Vec<JointPose>> = truth
            .iter()
            .map(|f| {
                let r = random_quat(&mut rng);
                let t = random_vec(&mut rng, 5.0);
                f.iter()
                    .map(|p| JointPose { position: r.rotate(p.position) + t, orientation: r * p.orientation })
                    .collect()
            })
            .collect();
        worst_align = worst_align.max(position_error(&moved, &truth));
    }
    let ok = j == 0.006 && (sip - 10.0).abs() < 1e-9 && worst_align < 1e-9;
    verdict(
        10,
        "metric oracles",
        ok,
        format!("cubic jitter {j} km/s3, SIP {sip:.12} deg, worst aligned error {worst_align:.2e} cm"),
    );
}

fn uip(args: &[&str]) {
    let o = Command::new(env!("CARGO_BIN_EXE_uip")).args(args).output().expect("binary runs");
    assert!(o.status.success(), "uip {args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn run_pipeline(root: &Path, cfg: &str) -> Vec<(String, Manifest)> {
    let dirs = ["data", "filtered", "model", "eval"].map(|d| root.join(d));
    let [data, filt, model, eval] = dirs.each_ref().map(|p| p.to_str().unwrap());
    uip(&["synth", "--config", cfg, "--seed", "11", "--out", data]);
    uip(&["filter", "--config", cfg, "--data", data, "--out", filt]);
    uip(&["train", "--config", cfg, "--seed", "11", "--data", data, "--filtered", filt, "--out", model]);
    uip(&["eval", "--config", cfg, "--checkpoint", model, "--data", data, "--filtered", filt, "--out", eval]);
    dirs.iter()
        .zip(["synth", "filter", "train", "eval"])
        .map(|(d, kind)| (uip::manifest::digest(d).unwrap(), Manifest::verify(d, kind).unwrap()))
        .collect()
}

#[test]
fn c11_cli_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{
  "catalog": ["walk", "squat"],
  "clip_duration_s": 8.0,
  "model": { "lstm_hidden": 24, "lstm_layers": 2, "gcn_width": 16, "gcn_layers": 2, "decoder_hidden": 48 },
  "train": { "epochs": 1, "windows_per_epoch": 32 }
}"#,
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let a = run_pipeline(&tmp.path().join("a"), cfg);
    let b = run_pipeline(&tmp.path().join("b"), cfg);
    let files: usize = a.iter().map(|(_, m)| m.files.len()).sum();
    let same = a == b;
    verdict(
        11,
        "CLI determinism",
        same,
        format!("synth/filter/train/eval run twice, {files} files, identical digests: {same}"),
    );
}
