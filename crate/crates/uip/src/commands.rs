//! The five pipeline stages. Each reads verified upstream directories and
//! writes one output directory with its own manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use uip_core::ekf::FilteredFrame;
use uip_core::imu::{OrientationEstimate, SensorFrame};
use uip_core::math::{Rng, Vec3};
use uip_core::metrics::{evaluate_clip, split_by_acceleration, MetricReport, SplitReport};
use uip_core::pipeline::{
    calibrate_ranging, calibration_clip, distance_rmse, filter_clip, mean_acceleration, model_inputs, streams,
    synthesize_clip, targets, tpose_orientations, FilteredClip, Hardware, PreparedClip, RawClip, TruthFrame,
};
use uip_core::posenet::Trainer;
use uip_core::skeleton::{generate_motion_suite, MotionKind, SensorPlacement, Skeleton, SENSOR_NAMES};
use uip_core::uwb::RawDistanceFrame;
use uip_core::{sensor_pairs, NUM_PAIRS, NUM_SENSORS};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::formats::*;
use crate::manifest::{digest, Manifest, MANIFEST_FILE};

pub const CALIBRATION_DIR: &str = "calibration";

/// One entry of `clips.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipInfo {
    pub name: String,
    pub kind: MotionKind,
    pub frames: usize,
    pub rounds: usize,
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

/// Makes `out` an empty directory. A previous stage output (one with a
/// manifest) is replaced; any other non-empty directory is refused.
fn prepare_output(out: &Path, inputs: &[&Path]) -> CliResult<()> {
    for i in inputs {
        if same_dir(out, i) {
            return Err(CliError::Config(format!("output directory {} is also an input", out.display())));
        }
    }
    if out.exists() {
        if !out.is_dir() {
            return Err(CliError::Config(format!("{} is not a directory", out.display())));
        }
        let empty = std::fs::read_dir(out).map_err(|e| CliError::io(out, e))?.next().is_none();
        if !empty {
            if !out.join(MANIFEST_FILE).exists() {
                return Err(CliError::Config(format!("{} is not empty and was not written by uip", out.display())));
            }
            std::fs::remove_dir_all(out).map_err(|e| CliError::io(out, e))?;
        }
    }
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))
}

fn body(height: f64) -> CliResult<(Skeleton, SensorPlacement)> {
    let skel = Skeleton::standard(height)?;
    let placement = SensorPlacement::standard(&skel);
    Ok((skel, placement))
}

fn write_raw(dir: &Path, clip: &RawClip) -> CliResult<()> {
    write_truth(&dir.join("truth.jsonl"), &clip.truth)?;
    for (s, frames) in clip.imu.iter().enumerate() {
        write_imu(&dir.join(format!("imu_{}.csv", SENSOR_NAMES[s])), frames)?;
    }
    write_ranging(&dir.join("ranging.csv"), &clip.ranging)
}

fn read_raw(dir: &Path, name: &str, kind: MotionKind) -> CliResult<RawClip> {
    let truth = read_truth(&dir.join("truth.jsonl"))?;
    let imu: Vec<Vec<SensorFrame>> =
        SENSOR_NAMES.iter().map(|s| read_imu(&dir.join(format!("imu_{s}.csv")))).collect::<CliResult<_>>()?;
    if truth.is_empty() || imu.iter().any(|f| f.len() != truth.len()) {
        return Err(CliError::Data(format!("{}: IMU and truth lengths differ", dir.display())));
    }
    let ranging = read_ranging(&dir.join("ranging.csv"))?;
    Ok(RawClip { name: name.into(), kind, truth, imu, ranging })
}

/// Simulates the motion catalog and the range calibration recording.
pub fn synth(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    cfg.validate()?;
    prepare_output(out, &[])?;
    let (skel, placement) = body(cfg.height)?;
    let catalog: Vec<&str> = cfg.catalog.iter().map(String::as_str).collect();
    let clips = generate_motion_suite(cfg.seed, &catalog, &skel, cfg.clip_duration_s)?;
    let hw = Hardware::sample(&cfg.sim, &mut Rng::derive(cfg.seed, streams::HARDWARE));
    let cal = calibration_clip(cfg.seed, &skel)?;
    let cal_raw =
        synthesize_clip(&skel, &placement, &cal, &hw, &cfg.sim, &mut Rng::derive(cfg.seed, streams::CALIBRATION))?;
    write_raw(&out.join(CALIBRATION_DIR), &cal_raw)?;
    let mut infos = Vec::new();
    for (k, clip) in clips.iter().enumerate() {
        let rng = &mut Rng::derive(cfg.seed, streams::CLIP_BASE + k as u64);
        let raw = synthesize_clip(&skel, &placement, clip, &hw, &cfg.sim, rng)?;
        write_raw(&out.join(&raw.name), &raw)?;
        infos.push(ClipInfo {
            name: raw.name.clone(),
            kind: raw.kind,
            frames: raw.truth.len(),
            rounds: raw.ranging.len(),
        });
        eprintln!("synth: {} ({} frames, {} rounds)", raw.name, raw.truth.len(), raw.ranging.len());
    }
    write_json(&out.join("clips.json"), &infos)?;
    write_text(&out.join("config.json"), &cfg.to_json())?;
    Manifest::write(out, "synth", cfg.seed, vec![])?;
    Ok(())
}

/// A verified synth directory.
pub struct DataDir {
    pub dir: PathBuf,
    pub config: RunConfig,
    pub clips: Vec<ClipInfo>,
    pub digest: String,
}

impl DataDir {
    pub fn open(dir: &Path) -> CliResult<Self> {
        Manifest::verify(dir, "synth")?;
        let config = RunConfig::from_json(&read_text(&dir.join("config.json"))?)
            .map_err(|e| CliError::Data(format!("{}: {e}", dir.join("config.json").display())))?;
        let clips = read_json(&dir.join("clips.json"))?;
        Ok(Self { dir: dir.to_path_buf(), config, clips, digest: digest(dir)? })
    }

    pub fn raw(&self, info: &ClipInfo) -> CliResult<RawClip> {
        read_raw(&self.dir.join(&info.name), &info.name, info.kind)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DiagnosticRow {
    clip: String,
    i: usize,
    j: usize,
    raw_rmse: f64,
    filtered_rmse: f64,
}

/// Range calibration, attitude filtering and the pair EKFs for every clip.
/// RANSAC draws from the dataset seed so the result matches an in-memory run.
pub fn filter(cfg: &RunConfig, data: &Path, out: &Path) -> CliResult<()> {
    cfg.validate()?;
    let ds = DataDir::open(data)?;
    prepare_output(out, &[data])?;
    let (skel, placement) = body(ds.config.height)?;
    let seed = ds.config.seed;
    let cal_raw = read_raw(&data.join(CALIBRATION_DIR), CALIBRATION_DIR, MotionKind::Mixed)?;
    let calibration = calibrate_ranging(&[&cal_raw], &cfg.filter, &mut Rng::derive(seed, streams::RANSAC))?;
    write_calibration(&out.join("calibration.json"), &calibration)?;
    let mut diag = Vec::new();
    for info in &ds.clips {
        let raw = ds.raw(info)?;
        let f = filter_clip(
            &raw.imu,
            &raw.ranging,
            &tpose_orientations(&raw.truth),
            &skel,
            &placement,
            &calibration,
            &cfg.filter,
        )?;
        let dir = out.join(&info.name);
        write_orientations(&dir.join("orientations.jsonl"), &f.estimates)?;
        write_distances(&dir.join("distances.jsonl"), &f.distances)?;
        let (r, e) = distance_rmse(&raw, &f);
        for (k, (i, j)) in sensor_pairs().into_iter().enumerate() {
            diag.push(DiagnosticRow { clip: info.name.clone(), i, j, raw_rmse: r[k], filtered_rmse: e[k] });
        }
        let mean = |x: [f64; NUM_PAIRS]| x.iter().sum::<f64>() / NUM_PAIRS as f64;
        eprintln!("filter: {} range RMSE raw {:.4} m, filtered {:.4} m", info.name, mean(r), mean(e));
    }
    write_csv(&out.join("diagnostics.csv"), &diag)?;
    write_text(&out.join("config.json"), &cfg.to_json())?;
    Manifest::write(out, "filter", seed, vec![ds.digest])?;
    Ok(())
}

/// A verified filter directory derived from `data`.
fn open_filtered(filtered: &Path, data: &DataDir) -> CliResult<String> {
    let m = Manifest::verify(filtered, "filter")?;
    if m.sources != [data.digest.clone()] {
        return Err(CliError::Data(format!(
            "{} was not filtered from {} (source digest mismatch, rerun `uip filter`)",
            filtered.display(),
            data.dir.display()
        )));
    }
    digest(filtered)
}

fn load_filtered(filtered: &Path, info: &ClipInfo) -> CliResult<(Vec<Vec<OrientationEstimate>>, Vec<FilteredFrame>)> {
    let dir = filtered.join(&info.name);
    let est = read_orientations(&dir.join("orientations.jsonl"))?;
    let dist = read_distances(&dir.join("distances.jsonl"))?;
    if dist.len() != info.frames || est.iter().any(|e| e.len() != info.frames) {
        return Err(CliError::Data(format!("{}: expected {} frames", dir.display(), info.frames)));
    }
    Ok((est, dist))
}

fn prepared(
    truth: Vec<TruthFrame>,
    info: &ClipInfo,
    est: Vec<Vec<OrientationEstimate>>,
    dist: Vec<FilteredFrame>,
    skel: &Skeleton,
) -> PreparedClip {
    let f = FilteredClip {
        estimates: est,
        distances: dist,
        round_distances: vec![],
        calibrated: Vec::<RawDistanceFrame>::new(),
    };
    PreparedClip {
        name: info.name.clone(),
        kind: info.kind,
        inputs: model_inputs(&f),
        targets: targets(&truth, skel),
        mean_accel: mean_acceleration(&truth),
        truth,
    }
}

/// Prepared clips of a (data, filtered) pair, with the digests of both.
fn load_prepared(
    data: &Path,
    filtered: &Path,
) -> CliResult<(Vec<PreparedClip>, Vec<String>, Skeleton, SensorPlacement)> {
    let ds = DataDir::open(data)?;
    let fd = open_filtered(filtered, &ds)?;
    let (skel, placement) = body(ds.config.height)?;
    let mut clips = Vec::new();
    for info in &ds.clips {
        let truth = read_truth(&data.join(&info.name).join("truth.jsonl"))?;
        let (est, dist) = load_filtered(filtered, info)?;
        clips.push(prepared(truth, info, est, dist, &skel));
    }
    Ok((clips, vec![ds.digest, fd], skel, placement))
}

pub struct TrainArgs<'a> {
    pub data: &'a Path,
    pub filtered: &'a Path,
    pub val: Option<(&'a Path, &'a Path)>,
    pub no_distances: bool,
    pub out: &'a Path,
}

pub const CHECKPOINT_FILE: &str = "checkpoint.json";

pub fn train(cfg: &RunConfig, a: &TrainArgs) -> CliResult<()> {
    cfg.validate()?;
    let (clips, mut sources, _, _) = load_prepared(a.data, a.filtered)?;
    let val = match a.val {
        Some((d, f)) => {
            let (v, s, _, _) = load_prepared(d, f)?;
            sources.extend(s);
            v
        }
        None => vec![],
    };
    let mut inputs = vec![a.data, a.filtered];
    if let Some((d, f)) = a.val {
        inputs.extend([d, f]);
    }
    prepare_output(a.out, &inputs)?;
    let mut tc = cfg.train.clone();
    if a.no_distances {
        tc.use_distances = false;
    }
    let mut trainer = Trainer::new(&clips, &val, &cfg.model, &tc, cfg.seed)?;
    for _ in 0..tc.epochs {
        let e = trainer.run_epoch()?;
        eprintln!("train: epoch {} lr {:.2e} loss {:.4} monitor {:.4}", e.epoch, e.lr, e.train_loss, e.monitor_loss);
    }
    let epochs = trainer.epoch();
    let (params, log) = trainer.finish();
    if !params.is_finite() {
        return Err(CliError::Divergence("parameters became non-finite".into()));
    }
    Checkpoint::new(&params, &tc, cfg.seed, epochs).save(&a.out.join(CHECKPOINT_FILE))?;
    write_jsonl(&a.out.join("train_log.jsonl"), &log.epochs)?;
    let mut saved = cfg.clone();
    saved.train = tc;
    write_text(&a.out.join("config.json"), &saved.to_json())?;
    Manifest::write(a.out, "train", cfg.seed, sources)?;
    Ok(())
}

/// One row of `clips.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRow {
    pub clip: String,
    pub kind: MotionKind,
    pub split: String,
    pub mean_accel: f64,
    pub frames: usize,
    pub sip_error: f64,
    pub pos_error: f64,
    pub jitter: f64,
}

/// One row of `report.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub run: String,
    pub split: String,
    pub clips: usize,
    pub frames: usize,
    pub sip_error: f64,
    pub pos_error: f64,
    pub jitter: f64,
    /// Mean over observed pairs of the filtered distance RMSE (m).
    pub distance_rmse: Option<f64>,
}

impl ReportRow {
    fn new(run: &str, r: &MetricReport) -> Self {
        let seen: Vec<f64> = r.distance_rmse.iter().flatten().copied().collect();
        Self {
            run: run.into(),
            split: format!("{:?}", r.split).to_lowercase(),
            clips: r.clips,
            frames: r.frames,
            sip_error: r.sip_error,
            pos_error: r.pos_error,
            jitter: r.jitter,
            distance_rmse: (!seen.is_empty()).then(|| seen.iter().sum::<f64>() / seen.len() as f64),
        }
    }
}

fn report_rows(run: &str, r: &SplitReport) -> Vec<ReportRow> {
    [&r.overall, &r.slow, &r.fast].into_iter().flatten().map(|m| ReportRow::new(run, m)).collect()
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub use_distances: bool,
    pub epochs: usize,
    pub report: SplitReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PredictionRecord {
    t: f64,
    /// Fused sensor positions relative to the pelvis sensor (m).
    p: [[f64; 3]; NUM_SENSORS],
    contacts: [f64; 2],
}

/// Filtered distance squared error per pair over frames the mask keeps.
fn distance_errors(clip: &PreparedClip) -> ([f64; NUM_PAIRS], [usize; NUM_PAIRS]) {
    let mut se = [0.0; NUM_PAIRS];
    let mut n = [0; NUM_PAIRS];
    for (f, t) in clip.inputs.iter().zip(&clip.truth) {
        for (k, (i, j)) in sensor_pairs().into_iter().enumerate() {
            if f.mask[i][j] {
                let e = f.d[i][j] - t.sensors[i].position.distance(t.sensors[j].position);
                se[k] += e * e;
                n[k] += 1;
            }
        }
    }
    (se, n)
}

pub fn eval(cfg: &RunConfig, checkpoint: &Path, data: &Path, filtered: &Path, out: &Path) -> CliResult<()> {
    cfg.validate()?;
    Manifest::verify(checkpoint, "train")?;
    let ck = Checkpoint::load(&checkpoint.join(CHECKPOINT_FILE))?;
    let params = ck.params()?;
    let (clips, mut sources, skel, placement) = load_prepared(data, filtered)?;
    sources.insert(0, digest(checkpoint)?);
    prepare_output(out, &[checkpoint, data, filtered])?;
    let mut metrics = Vec::new();
    let mut rows = Vec::new();
    for clip in &clips {
        let (outputs, m) = evaluate_clip(&params, clip, &skel, &placement, ck.use_distances)?;
        let (se, n) = distance_errors(clip);
        let m = m.with_distance_errors(se, n);
        if !(m.sip_sum.is_finite() && m.pos_sum.is_finite() && m.jerk_sum.is_finite()) {
            return Err(CliError::Divergence(format!("non-finite metrics on {}", clip.name)));
        }
        let r = MetricReport::combine(uip_core::metrics::Split::Overall, &[&m]).expect("non-empty clip");
        rows.push(ClipRow {
            clip: clip.name.clone(),
            kind: clip.kind,
            split: if m.is_slow() { "slow" } else { "fast" }.into(),
            mean_accel: m.mean_accel,
            frames: m.frames,
            sip_error: r.sip_error,
            pos_error: r.pos_error,
            jitter: r.jitter,
        });
        write_jsonl(
            &out.join("predictions").join(format!("{}.jsonl", clip.name)),
            outputs.iter().zip(&clip.truth).map(|(o, t)| PredictionRecord {
                t: t.t,
                p: o.p.map(Vec3::to_array),
                contacts: o.contacts,
            }),
        )?;
        eprintln!(
            "eval: {} SIP {:.2} deg, pos {:.2} cm, jitter {:.4} km/s3",
            clip.name, r.sip_error, r.pos_error, r.jitter
        );
        metrics.push(m);
    }
    let report = split_by_acceleration(&metrics);
    write_csv(&out.join("clips.csv"), &rows)?;
    write_csv(&out.join("report.csv"), report_rows("eval", &report))?;
    write_json(&out.join("report.json"), &EvalReport { use_distances: ck.use_distances, epochs: ck.epochs, report })?;
    write_text(&out.join("config.json"), &cfg.to_json())?;
    Manifest::write(out, "eval", ck.seed, sources)?;
    Ok(())
}

/// Side-by-side table of several eval directories.
pub fn report(evals: &[PathBuf], out: &Path) -> CliResult<()> {
    if evals.is_empty() {
        return Err(CliError::Config("`report` needs at least one --eval directory".into()));
    }
    let mut rows = Vec::new();
    let mut sources = Vec::new();
    for dir in evals {
        Manifest::verify(dir, "eval")?;
        let r: EvalReport = read_json(&dir.join("report.json"))?;
        let name = dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
        let label = if r.use_distances { name } else { format!("{name} (no distances)") };
        rows.extend(report_rows(&label, &r.report));
        sources.push(digest(dir)?);
    }
    let inputs: Vec<&Path> = evals.iter().map(PathBuf::as_path).collect();
    prepare_output(out, &inputs)?;
    write_csv(&out.join("report.csv"), &rows)?;
    let mut md =
        String::from("| run | split | clips | SIP (deg) | pos (cm) | jitter (km/s3) |\n|---|---|---|---|---|---|\n");
    for r in &rows {
        md += &format!(
            "| {} | {} | {} | {:.2} | {:.2} | {:.4} |\n",
            r.run, r.split, r.clips, r.sip_error, r.pos_error, r.jitter
        );
    }
    write_text(&out.join("report.md"), &md)?;
    for r in rows.iter().filter(|r| r.split == "overall") {
        println!("{}: SIP {:.2} deg, pos {:.2} cm, jitter {:.4} km/s3", r.run, r.sip_error, r.pos_error, r.jitter);
    }
    Manifest::write(out, "report", 0, sources)?;
    Ok(())
}
