//! Adam training over fixed-length windows.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[allow(unused_imports)] // inherent float methods exist only when std is in the build graph
use num_traits::Float;

use super::loss::{frame_loss, FrameTarget, LossWeights};
use super::{features_for, forward_window, Bound, Eval, FrameFeatures, Graph, PoseNetConfig, PoseNetParams};
use crate::math::{Rng, Tape, Var};
use crate::pipeline::PreparedClip;
use crate::{Error, Result};

/// Batch size used by the original large-scale training.
pub const PAPER_BATCH_SIZE: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Windows per Adam step.
    pub batch_size: usize,
    pub windows_per_epoch: usize,
    /// Fixed windows scored before training and after every epoch.
    pub monitor_windows: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub lr_decay_every: usize,
    pub lambda: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// `false` trains the ablation that never sees inter-sensor distances.
    pub use_distances: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 16,
            windows_per_epoch: 128,
            monitor_windows: 32,
            learning_rate: 1e-3,
            lr_decay: 0.33,
            lr_decay_every: 20,
            lambda: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            use_distances: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (k, v) in [
            ("batch_size", self.batch_size),
            ("windows_per_epoch", self.windows_per_epoch),
            ("lr_decay_every", self.lr_decay_every),
        ] {
            if v == 0 {
                return Err(Error::Config(alloc::format!("{k} must be positive")));
            }
        }
        if !(self.learning_rate > 0.0 && self.lr_decay > 0.0 && self.lambda >= 0.0) {
            return Err(Error::Config("learning_rate and lr_decay must be positive, lambda non-negative".into()));
        }
        Ok(())
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights { lambda: self.lambda, ..LossWeights::default() }
    }
}

/// Step schedule; `epoch` counts from 1.
pub fn learning_rate(cfg: &TrainConfig, epoch: usize) -> f64 {
    let steps = epoch.saturating_sub(1) / cfg.lr_decay_every;
    cfg.learning_rate * cfg.lr_decay.powi(steps as i32)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    /// Mean loss over the epoch's batches (0 for the initial entry).
    pub train_loss: f64,
    /// Loss on the fixed monitor windows after the epoch.
    pub monitor_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Entry 0 scores the initial parameters.
    pub epochs: Vec<EpochLog>,
}

/// A clip as the trainer sees it.
#[derive(Debug, Clone)]
pub struct TrainingClip {
    pub features: Vec<FrameFeatures>,
    pub targets: Vec<FrameTarget>,
}

impl TrainingClip {
    pub fn new(clip: &PreparedClip, use_distances: bool) -> Result<Self> {
        Ok(Self {
            features: features_for(&clip.inputs, use_distances)?,
            targets: clip.targets.iter().map(FrameTarget::from).collect(),
        })
    }
}

/// Mean frame loss over one window.
pub fn window_loss<G: Graph>(
    g: &mut G,
    p: &Bound<G::V>,
    feats: &[FrameFeatures],
    targets: &[FrameTarget],
    w: &LossWeights,
) -> G::V {
    let outs = forward_window(g, p, feats);
    let losses: Vec<G::V> = outs.iter().zip(feats).zip(targets).map(|((o, f), t)| frame_loss(g, o, f, t, w)).collect();
    let s = g.sum(&losses);
    g.scale(s, 1.0 / losses.len() as f64)
}

/// Binds a flat slice of graph values in the tensor order of `params`.
pub fn bind<V: Copy>(params: &PoseNetParams, flat: &[V]) -> Bound<V> {
    let mut k = 0;
    let tensors = params
        .tensors
        .iter()
        .map(|t| {
            let v = flat[k..k + t.len()].to_vec();
            k += t.len();
            v
        })
        .collect();
    Bound { tensors, layout: params.layout(), config: params.config.clone() }
}

/// Loss and flat gradient of one window.
pub fn window_gradient(
    tape: &mut Tape,
    params: &PoseNetParams,
    feats: &[FrameFeatures],
    targets: &[FrameTarget],
    w: &LossWeights,
) -> (f64, Vec<f64>) {
    tape.clear();
    let flat = params.flat();
    let leaves: Vec<Var> = tape.leaves(&flat);
    let bound = bind(params, &leaves);
    let loss = window_loss(tape, &bound, feats, targets, w);
    let grads = tape.backward(loss);
    (tape.value(loss), leaves.iter().map(|&v| grads.wrt(v)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Window {
    clip: usize,
    start: usize,
    len: usize,
}

fn sample_windows(clips: &[TrainingClip], n: usize, size: usize, rng: &mut Rng) -> Vec<Window> {
    (0..n)
        .map(|_| {
            let clip = rng.below(clips.len());
            let frames = clips[clip].features.len();
            let len = size.min(frames);
            let start = rng.below(frames - len + 1);
            Window { clip, start, len }
        })
        .collect()
}

fn score(params: &PoseNetParams, clips: &[TrainingClip], windows: &[Window], w: &LossWeights) -> f64 {
    if windows.is_empty() {
        return 0.0;
    }
    let bound = Bound::from_params(params);
    let total: f64 = windows
        .iter()
        .map(|win| {
            let c = &clips[win.clip];
            let r = win.start..win.start + win.len;
            window_loss(&mut Eval, &bound, &c.features[r.clone()], &c.targets[r], w)
        })
        .sum();
    total / windows.len() as f64
}

/// Stateful trainer, one epoch at a time.
pub struct Trainer {
    pub params: PoseNetParams,
    pub config: TrainConfig,
    pub log: TrainLog,
    clips: Vec<TrainingClip>,
    val: Vec<TrainingClip>,
    monitor: Vec<Window>,
    val_windows: Vec<Window>,
    m: Vec<f64>,
    v: Vec<f64>,
    step: usize,
    epoch: usize,
    rng: Rng,
    tape: Tape,
}

mod stream {
    pub const INIT: u64 = 1;
    pub const MONITOR: u64 = 2;
    pub const SHUFFLE: u64 = 3;
}

impl Trainer {
    pub fn new(
        train: &[PreparedClip],
        val: &[PreparedClip],
        net: &PoseNetConfig,
        cfg: &TrainConfig,
        seed: u64,
    ) -> Result<Self> {
        net.validate()?;
        cfg.validate()?;
        let params = PoseNetParams::init(net, &mut Rng::derive(seed, stream::INIT));
        Self::resume(params, train, val, cfg, seed)
    }

    /// Starts from existing parameters (fresh optimizer state).
    pub fn resume(
        params: PoseNetParams,
        train: &[PreparedClip],
        val: &[PreparedClip],
        cfg: &TrainConfig,
        seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        if train.is_empty() || train.iter().any(|c| c.inputs.is_empty()) {
            return Err(Error::TooShort { need: 0, got: 0 });
        }
        let clips: Vec<TrainingClip> =
            train.iter().map(|c| TrainingClip::new(c, cfg.use_distances)).collect::<Result<_>>()?;
        let val: Vec<TrainingClip> =
            val.iter().map(|c| TrainingClip::new(c, cfg.use_distances)).collect::<Result<_>>()?;
        let mut mrng = Rng::derive(seed, stream::MONITOR);
        let window = params.config.window;
        let monitor = sample_windows(&clips, cfg.monitor_windows, window, &mut mrng);
        let val_windows =
            if val.is_empty() { Vec::new() } else { sample_windows(&val, cfg.monitor_windows, window, &mut mrng) };
        let n = params.num_parameters();
        let mut t = Trainer {
            params,
            config: cfg.clone(),
            log: TrainLog::default(),
            clips,
            val,
            monitor,
            val_windows,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            epoch: 0,
            rng: Rng::derive(seed, stream::SHUFFLE),
            tape: Tape::new(),
        };
        let entry = t.evaluate(0, 0.0, 0.0);
        t.log.epochs.push(entry);
        Ok(t)
    }

    fn evaluate(&self, epoch: usize, lr: f64, train_loss: f64) -> EpochLog {
        let w = self.config.loss_weights();
        let monitor_loss = score(&self.params, &self.clips, &self.monitor, &w);
        let val_loss = (!self.val.is_empty()).then(|| score(&self.params, &self.val, &self.val_windows, &w));
        EpochLog { epoch, lr, train_loss, monitor_loss, val_loss }
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn run_epoch(&mut self) -> Result<&EpochLog> {
        self.epoch += 1;
        let epoch = self.epoch;
        let lr = learning_rate(&self.config, epoch);
        let w = self.config.loss_weights();
        let windows =
            sample_windows(&self.clips, self.config.windows_per_epoch, self.params.config.window, &mut self.rng);
        let n = self.params.num_parameters();
        let mut total = 0.0;
        let mut batches = 0usize;
        for (b, batch) in windows.chunks(self.config.batch_size).enumerate() {
            let mut grad = vec![0.0; n];
            let mut loss = 0.0;
            for win in batch {
                let c = &self.clips[win.clip];
                let r = win.start..win.start + win.len;
                let (l, g) = window_gradient(&mut self.tape, &self.params, &c.features[r.clone()], &c.targets[r], &w);
                loss += l;
                grad.iter_mut().zip(&g).for_each(|(a, x)| *a += x);
            }
            let k = 1.0 / batch.len() as f64;
            loss *= k;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, batch: b, param_norm: self.params.norm() });
            }
            self.adam_step(&grad, k, lr);
            total += loss;
            batches += 1;
        }
        if !self.params.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: batches, param_norm: self.params.norm() });
        }
        let entry = self.evaluate(epoch, lr, total / batches.max(1) as f64);
        self.log.epochs.push(entry);
        Ok(self.log.epochs.last().expect("just pushed"))
    }

    fn adam_step(&mut self, grad: &[f64], k: f64, lr: f64) {
        self.step += 1;
        let (b1, b2, eps) = (self.config.beta1, self.config.beta2, self.config.epsilon);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        let mut flat = self.params.flat();
        for i in 0..flat.len() {
            let g = grad[i] * k;
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
            flat[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + eps);
        }
        self.params.set_flat(&flat);
    }

    pub fn finish(self) -> (PoseNetParams, TrainLog) {
        (self.params, self.log)
    }
}

/// Trains for `cfg.epochs` epochs from a seeded initialization.
pub fn train(
    train: &[PreparedClip],
    val: &[PreparedClip],
    net: &PoseNetConfig,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(PoseNetParams, TrainLog)> {
    let mut t = Trainer::new(train, val, net, cfg, seed)?;
    for _ in 0..cfg.epochs {
        t.run_epoch()?;
    }
    Ok(t.finish())
}
