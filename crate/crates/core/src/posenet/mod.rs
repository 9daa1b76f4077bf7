//! Pose network: an LSTM branch and a distance-attention graph branch that both
//! regress root-relative sensor positions, an acceleration-gated fusion of the
//! two, and a decoder to local joint rotations and foot contacts.
//!
//! The model is written once against [`Graph`] so the same code trains on the
//! autodiff tape and runs inference on plain floats.

pub mod graph;
pub mod loss;
pub mod params;
pub mod rot6d;
pub mod train;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[allow(unused_imports)] // inherent float methods exist only when std is in the build graph
use num_traits::Float;

pub use graph::{Eval, Graph};
pub use loss::{distance_aware_loss, frame_loss, LossWeights};
pub use params::{PoseNetParams, Tensor};
pub use rot6d::{from_6d, to_6d};
pub use train::{learning_rate, train, TrainConfig, TrainLog, Trainer};

use crate::math::{Quaternion, Vec3};
use crate::pipeline::ModelInputFrame;
use crate::skeleton::NUM_JOINTS;
use crate::{sensor_pairs, Error, Result, NUM_PAIRS, NUM_SENSORS};
use params::Layout;

pub const ROT6D: usize = 6;
/// Per-frame LSTM input: 6D orientation and acceleration per sensor.
pub const LSTM_INPUT: usize = NUM_SENSORS * (ROT6D + 3);
pub const OUT_POSITIONS: usize = NUM_SENSORS * 3;
/// Local rotations predicted by the decoder (every joint but the root).
pub const NUM_LOCAL: usize = NUM_JOINTS - 1;
/// Decoder input: fused positions, orientations, accelerations, the upper
/// triangle of the normalized distances and its mask.
pub const DECODER_INPUT: usize = OUT_POSITIONS + NUM_SENSORS * ROT6D + NUM_SENSORS * 3 + 2 * NUM_PAIRS;
/// Accelerations enter the network in units of 10 m/s².
pub const ACCEL_INPUT_SCALE: f64 = 0.1;
/// Head–pelvis distance below which normalization is refused (m).
pub const MIN_REFERENCE_DISTANCE: f64 = 0.01;
/// Normalized distances are rounded to this grid so that uniform scaling of
/// the raw matrix cancels exactly.
pub const DISTANCE_QUANTUM: f64 = 1.0 / 4_294_967_296.0;
/// Row mass under which a masked attention row is left empty.
pub const MIN_ROW_MASS: f64 = 1e-12;

/// How the distance attention matrix is masked before aggregation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskStrategy {
    /// Zero the diagonal and invalid entries, take magnitudes, rows sum to 1.
    #[default]
    RowNormalized,
    /// Zero the diagonal and invalid entries only.
    ZeroOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoseNetConfig {
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
    pub gcn_width: usize,
    pub gcn_layers: usize,
    pub decoder_hidden: usize,
    /// Fusion thresholds on ‖â‖ (m/s²): pure graph branch at or below `accel_low`,
    /// pure LSTM at or above `accel_high`.
    pub accel_low: f64,
    pub accel_high: f64,
    pub mask: MaskStrategy,
    /// LSTM context in frames, for training windows and sliding inference.
    pub window: usize,
}

impl Default for PoseNetConfig {
    fn default() -> Self {
        Self {
            lstm_hidden: 128,
            lstm_layers: 2,
            gcn_width: 64,
            gcn_layers: 2,
            decoder_hidden: 128,
            accel_low: 2.0,
            accel_high: 8.0,
            mask: MaskStrategy::RowNormalized,
            window: 16,
        }
    }
}

impl PoseNetConfig {
    /// Small sizes for fast training runs on one core.
    pub fn compact() -> Self {
        Self { lstm_hidden: 24, lstm_layers: 2, gcn_width: 16, gcn_layers: 2, decoder_hidden: 48, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lstm_hidden", self.lstm_hidden),
            ("lstm_layers", self.lstm_layers),
            ("gcn_width", self.gcn_width),
            ("gcn_layers", self.gcn_layers),
            ("decoder_hidden", self.decoder_hidden),
            ("window", self.window),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(Error::Config(alloc::format!("{k} must be positive")));
            }
        }
        if !(self.accel_low >= 0.0 && self.accel_high > self.accel_low) {
            return Err(Error::Config("accel_low must be non-negative and below accel_high".into()));
        }
        Ok(())
    }
}

/// Network-ready view of one [`ModelInputFrame`], expressed in the pelvis
/// sensor frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameFeatures {
    /// 6D orientation per sensor: heading-free root attitude for sensor 0,
    /// root-relative orientation for the others.
    pub r6: [[f64; ROT6D]; NUM_SENSORS],
    /// Root-frame acceleration for sensor 0, root-relative for the others (m/s²).
    pub acc: [[f64; 3]; NUM_SENSORS],
    /// World acceleration magnitude per sensor, used by the fusion gate.
    pub acc_norm: [f64; NUM_SENSORS],
    /// Head–pelvis normalized distances, zero where invalid.
    pub d_norm: [[f64; NUM_SENSORS]; NUM_SENSORS],
    /// Metric distances, zero where invalid.
    pub d: [[f64; NUM_SENSORS]; NUM_SENSORS],
    pub mask: [[bool; NUM_SENSORS]; NUM_SENSORS],
}

/// Divides every entry by the head–pelvis distance and rounds to
/// [`DISTANCE_QUANTUM`]. Invalid entries become zero. With no valid entry the
/// result is all zeros regardless of the reference.
pub fn normalize_distances(
    d: &[[f64; NUM_SENSORS]; NUM_SENSORS],
    mask: &[[bool; NUM_SENSORS]; NUM_SENSORS],
) -> Result<[[f64; NUM_SENSORS]; NUM_SENSORS]> {
    let mut out = [[0.0; NUM_SENSORS]; NUM_SENSORS];
    if !mask.iter().flatten().any(|&m| m) {
        return Ok(out);
    }
    let reference = d[0][1];
    if !(reference > MIN_REFERENCE_DISTANCE) {
        return Err(Error::Normalization(reference));
    }
    for i in 0..NUM_SENSORS {
        for j in 0..NUM_SENSORS {
            if mask[i][j] && i != j {
                let x = d[i][j] / reference;
                out[i][j] = (x / DISTANCE_QUANTUM).round() * DISTANCE_QUANTUM;
            }
        }
    }
    Ok(out)
}

fn heading_free(q: Quaternion) -> Quaternion {
    let h = Quaternion::from_axis_angle(Vec3::Z, q.yaw());
    (h.conjugate() * q).normalized()
}

/// Builds features for one frame. `use_distances = false` drops every range.
pub fn features(frame: &ModelInputFrame, use_distances: bool) -> Result<FrameFeatures> {
    let root = frame.q[0];
    let inv = root.conjugate();
    let r6 =
        core::array::from_fn(
            |s| if s == 0 { to_6d(heading_free(root)) } else { to_6d((inv * frame.q[s]).normalized()) },
        );
    let acc = core::array::from_fn(|s| {
        let a = if s == 0 { frame.a[0] } else { frame.a[s] - frame.a[0] };
        inv.rotate(a).to_array()
    });
    let acc_norm = core::array::from_fn(|s| frame.a[s].norm());
    let mask = if use_distances { frame.mask } else { [[false; NUM_SENSORS]; NUM_SENSORS] };
    let d_norm = normalize_distances(&frame.d, &mask)?;
    let d = core::array::from_fn(|i| core::array::from_fn(|j| if mask[i][j] && i != j { frame.d[i][j] } else { 0.0 }));
    Ok(FrameFeatures { r6, acc, acc_norm, d_norm, d, mask })
}

pub fn features_for(frames: &[ModelInputFrame], use_distances: bool) -> Result<Vec<FrameFeatures>> {
    frames.iter().map(|f| features(f, use_distances)).collect()
}

impl FrameFeatures {
    pub fn lstm_input(&self) -> [f64; LSTM_INPUT] {
        let mut x = [0.0; LSTM_INPUT];
        for s in 0..NUM_SENSORS {
            let o = s * (ROT6D + 3);
            x[o..o + ROT6D].copy_from_slice(&self.r6[s]);
            for k in 0..3 {
                x[o + ROT6D + k] = self.acc[s][k] * ACCEL_INPUT_SCALE;
            }
        }
        x
    }

    /// Constant part of the decoder input (everything after the positions).
    pub fn decoder_context(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(DECODER_INPUT - OUT_POSITIONS);
        self.r6.iter().for_each(|r| v.extend_from_slice(r));
        self.acc.iter().for_each(|a| v.extend(a.iter().map(|x| x * ACCEL_INPUT_SCALE)));
        for (i, j) in sensor_pairs() {
            v.push(self.d_norm[i][j]);
        }
        for (i, j) in sensor_pairs() {
            v.push(if self.mask[i][j] { 1.0 } else { 0.0 });
        }
        v
    }
}

/// Parameters bound into a graph: one slice of values per tensor.
pub struct Bound<V> {
    pub tensors: Vec<Vec<V>>,
    pub layout: Layout,
    pub config: PoseNetConfig,
}

impl Bound<f64> {
    pub fn from_params(p: &PoseNetParams) -> Self {
        Bound {
            tensors: p.tensors.iter().map(|t| t.data.clone()).collect(),
            layout: p.layout(),
            config: p.config.clone(),
        }
    }
}

impl<V: Copy> Bound<V> {
    fn t(&self, k: usize) -> &[V] {
        &self.tensors[k]
    }

    fn row(&self, k: usize, r: usize, cols: usize) -> &[V] {
        &self.tensors[k][r * cols..(r + 1) * cols]
    }
}

pub type Positions<V> = [[V; 3]; NUM_SENSORS];

/// Runs the LSTM from zero state over `xs` and returns the position readout at
/// every step.
pub fn lstm_branch<G: Graph>(g: &mut G, p: &Bound<G::V>, xs: &[[f64; LSTM_INPUT]]) -> Vec<Positions<G::V>> {
    let h_size = p.config.lstm_hidden;
    let layers = p.layout.lstm.len();
    let mut h: Vec<Option<Vec<G::V>>> = alloc::vec![None; layers];
    let mut c: Vec<Option<Vec<G::V>>> = alloc::vec![None; layers];
    let mut out = Vec::with_capacity(xs.len());
    for x in xs {
        let mut below: Option<Vec<G::V>> = None;
        for l in 0..layers {
            let (wi, bi) = p.layout.lstm[l];
            let input = if l == 0 { LSTM_INPUT } else { h_size };
            let cols = input + h_size;
            let mut gates = Vec::with_capacity(4 * h_size);
            for r in 0..4 * h_size {
                let w = p.row(wi, r, cols);
                let b = p.t(bi)[r];
                let mut v = match &below {
                    None => g.affine_c(&w[..input], x, b),
                    Some(xv) => g.affine(&w[..input], xv, b),
                };
                if let Some(hp) = &h[l] {
                    v = g.affine(&w[input..], hp, v);
                }
                gates.push(v);
            }
            let mut hn = Vec::with_capacity(h_size);
            let mut cn = Vec::with_capacity(h_size);
            for k in 0..h_size {
                let i = g.sigmoid(gates[k]);
                let gg = g.tanh(gates[2 * h_size + k]);
                let mut cell = g.mul(i, gg);
                if let Some(cp) = &c[l] {
                    let f = g.sigmoid(gates[h_size + k]);
                    let keep = g.mul(f, cp[k]);
                    cell = g.add(keep, cell);
                }
                let o = g.sigmoid(gates[3 * h_size + k]);
                let tc = g.tanh(cell);
                hn.push(g.mul(o, tc));
                cn.push(cell);
            }
            below = Some(hn.clone());
            h[l] = Some(hn);
            c[l] = Some(cn);
        }
        let top = below.expect("at least one layer");
        let (wo, bo) = p.layout.lstm_out;
        out.push(core::array::from_fn(|s| {
            core::array::from_fn(|k| {
                let r = 3 * s + k;
                g.affine(p.row(wo, r, h_size), &top, p.t(bo)[r])
            })
        }));
    }
    out
}

/// Row-major index of `(i, j)`, `i ≠ j`, among the off-diagonal entries.
pub fn off_diagonal_index(i: usize, j: usize) -> usize {
    debug_assert_ne!(i, j);
    i * (NUM_SENSORS - 1) + if j < i { j } else { j - 1 }
}

/// Post-mask attention matrix of one layer. Empty entries are `None`.
pub fn masked_attention<G: Graph>(
    g: &mut G,
    a: &[G::V],
    b: &[G::V],
    f: &FrameFeatures,
    strategy: MaskStrategy,
) -> [[Option<G::V>; NUM_SENSORS]; NUM_SENSORS] {
    let mut c = [[None; NUM_SENSORS]; NUM_SENSORS];
    for i in 0..NUM_SENSORS {
        let mut row = Vec::new();
        for j in 0..NUM_SENSORS {
            if i != j && f.mask[i][j] {
                let k = off_diagonal_index(i, j);
                let ad = g.scale(a[k], f.d_norm[i][j]);
                let v = g.add(ad, b[k]);
                row.push((j, v));
            }
        }
        match strategy {
            MaskStrategy::ZeroOnly => row.iter().for_each(|&(j, v)| c[i][j] = Some(v)),
            MaskStrategy::RowNormalized => {
                let mags: Vec<G::V> = row.iter().map(|&(_, v)| g.abs(v)).collect();
                if mags.is_empty() {
                    continue;
                }
                let mass = g.sum(&mags);
                if g.val(mass) < MIN_ROW_MASS {
                    continue;
                }
                for (&(j, _), &m) in row.iter().zip(&mags) {
                    c[i][j] = Some(g.div(m, mass));
                }
            }
        }
    }
    c
}

/// Distance-attention graph branch for one frame.
pub fn dagcn_branch<G: Graph>(g: &mut G, p: &Bound<G::V>, f: &FrameFeatures) -> Positions<G::V> {
    let width = p.config.gcn_width;
    let (we, be) = p.layout.embed;
    let embed: Vec<Vec<G::V>> = (0..NUM_SENSORS)
        .map(|s| (0..width).map(|k| g.affine_c(p.row(we, k, ROT6D), &f.r6[s], p.t(be)[k])).collect())
        .collect();
    let mut h = embed.clone();
    for layer in p.layout.gcn.clone() {
        let c = masked_attention(g, p.t(layer.a), p.t(layer.b), f, p.config.mask);
        let z: Vec<Vec<G::V>> = (0..NUM_SENSORS)
            .map(|j| {
                (0..width)
                    .map(|k| {
                        let wh = g.dot(p.row(layer.w, k, width), &h[j]);
                        g.mul(p.t(layer.m)[j * width + k], wh)
                    })
                    .collect()
            })
            .collect();
        let mut next = Vec::with_capacity(NUM_SENSORS);
        for i in 0..NUM_SENSORS {
            let nbrs: Vec<(usize, G::V)> = (0..NUM_SENSORS).filter_map(|j| c[i][j].map(|v| (j, v))).collect();
            let coef: Vec<G::V> = nbrs.iter().map(|&(_, v)| v).collect();
            let row: Vec<G::V> = (0..width)
                .map(|k| {
                    let y = if nbrs.is_empty() {
                        g.constant(0.0)
                    } else {
                        let zk: Vec<G::V> = nbrs.iter().map(|&(j, _)| z[j][k]).collect();
                        g.dot(&coef, &zk)
                    };
                    let pre = g.affine(&[p.t(layer.gamma)[k]], &[y], p.t(layer.beta)[k]);
                    let act = g.tanh(pre);
                    g.add(act, embed[i][k])
                })
                .collect();
            next.push(row);
        }
        h = next;
    }
    let (wo, bo) = p.layout.gcn_out;
    core::array::from_fn(|s| core::array::from_fn(|k| g.affine(p.row(wo, k, width), &h[s], p.t(bo)[k])))
}

/// LSTM weight of one sensor given its acceleration magnitude.
pub fn fusion_weight(acc_norm: f64, low: f64, high: f64) -> f64 {
    if acc_norm <= low {
        0.0
    } else if acc_norm >= high {
        1.0
    } else {
        (acc_norm - low) / (high - low)
    }
}

pub fn fuse<G: Graph>(
    g: &mut G,
    pt: &Positions<G::V>,
    ps: &Positions<G::V>,
    acc_norm: &[f64; NUM_SENSORS],
    low: f64,
    high: f64,
) -> Positions<G::V> {
    core::array::from_fn(|s| {
        let w = fusion_weight(acc_norm[s], low, high);
        core::array::from_fn(|k| {
            if w == 0.0 {
                ps[s][k]
            } else if w == 1.0 {
                pt[s][k]
            } else {
                g.lincomb(&[w, 1.0 - w], &[pt[s][k], ps[s][k]])
            }
        })
    })
}

/// Per-sensor blend of the temporal (`pt`) and spatial (`ps`) estimates.
pub fn fuse_positions(
    pt: &[Vec3; NUM_SENSORS],
    ps: &[Vec3; NUM_SENSORS],
    acc_norm: &[f64; NUM_SENSORS],
    low: f64,
    high: f64,
) -> [Vec3; NUM_SENSORS] {
    let a = pt.map(|v| v.to_array());
    let b = ps.map(|v| v.to_array());
    fuse(&mut Eval, &a, &b, acc_norm, low, high).map(Vec3::from_array)
}

/// Decoder heads: returns the 15 local rotations (6D) and two contact logits.
pub fn decoder<G: Graph>(
    g: &mut G,
    p: &Bound<G::V>,
    pos: &Positions<G::V>,
    f: &FrameFeatures,
) -> (Vec<G::V>, [G::V; 2]) {
    let hd = p.config.decoder_hidden;
    let ctx = f.decoder_context();
    let pv: Vec<G::V> = pos.iter().flatten().copied().collect();
    let (wh, bh) = p.layout.dec_hidden;
    let hidden: Vec<G::V> = (0..hd)
        .map(|r| {
            let w = p.row(wh, r, DECODER_INPUT);
            let partial = g.affine_c(&w[OUT_POSITIONS..], &ctx, p.t(bh)[r]);
            let pre = g.affine(&w[..OUT_POSITIONS], &pv, partial);
            g.tanh(pre)
        })
        .collect();
    let (wr, br) = p.layout.dec_rot;
    let rot = (0..NUM_LOCAL * ROT6D).map(|r| g.affine(p.row(wr, r, hd), &hidden, p.t(br)[r])).collect();
    let (wc, bc) = p.layout.dec_contact;
    let contact = core::array::from_fn(|r| g.affine(p.row(wc, r, hd), &hidden, p.t(bc)[r]));
    (rot, contact)
}

/// All graph outputs for one frame.
pub struct FrameOutput<V> {
    pub pt: Positions<V>,
    pub ps: Positions<V>,
    pub p: Positions<V>,
    pub rot: Vec<V>,
    pub contact_logits: [V; 2],
}

/// Forward pass over a window: the LSTM runs from zero state over the whole
/// window and every frame gets its outputs.
pub fn forward_window<G: Graph>(g: &mut G, p: &Bound<G::V>, frames: &[FrameFeatures]) -> Vec<FrameOutput<G::V>> {
    let xs: Vec<[f64; LSTM_INPUT]> = frames.iter().map(FrameFeatures::lstm_input).collect();
    let pts = lstm_branch(g, p, &xs);
    frames
        .iter()
        .zip(pts)
        .map(|(f, pt)| {
            let ps = dagcn_branch(g, p, f);
            let fused = fuse(g, &pt, &ps, &f.acc_norm, p.config.accel_low, p.config.accel_high);
            let (rot, contact_logits) = decoder(g, p, &fused, f);
            FrameOutput { pt, ps, p: fused, rot, contact_logits }
        })
        .collect()
}

/// Network output for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseOutput {
    pub pt: [Vec3; NUM_SENSORS],
    pub ps: [Vec3; NUM_SENSORS],
    pub p: [Vec3; NUM_SENSORS],
    /// Raw 6D local rotations of joints 1..16.
    pub rot6d: Vec<[f64; ROT6D]>,
    pub contacts: [f64; 2],
}

impl PoseOutput {
    /// Orthonormalized local rotations of joints 1..16.
    pub fn local_rotations(&self) -> Vec<Quaternion> {
        self.rot6d.iter().map(from_6d).collect()
    }
}

fn to_output(o: &FrameOutput<f64>) -> PoseOutput {
    let v = |p: &Positions<f64>| p.map(Vec3::from_array);
    PoseOutput {
        pt: v(&o.pt),
        ps: v(&o.ps),
        p: v(&o.p),
        rot6d: o.rot.chunks(ROT6D).map(|c| core::array::from_fn(|k| c[k])).collect(),
        contacts: o.contact_logits.map(crate::math::autodiff::sigmoid),
    }
}

/// Causal inference: frame `t` sees the last `window` frames through the LSTM,
/// started from zero state exactly as in training.
pub fn infer(params: &PoseNetParams, inputs: &[ModelInputFrame], use_distances: bool) -> Result<Vec<PoseOutput>> {
    params.validate()?;
    let feats = features_for(inputs, use_distances)?;
    Ok(infer_features(params, &feats))
}

pub fn infer_features(params: &PoseNetParams, feats: &[FrameFeatures]) -> Vec<PoseOutput> {
    let bound = Bound::from_params(params);
    let w = params.config.window;
    let mut g = Eval;
    let xs: Vec<[f64; LSTM_INPUT]> = feats.iter().map(FrameFeatures::lstm_input).collect();
    (0..feats.len())
        .map(|t| {
            let start = (t + 1).saturating_sub(w);
            let pt = *lstm_branch(&mut g, &bound, &xs[start..=t]).last().expect("non-empty window");
            let f = &feats[t];
            let ps = dagcn_branch(&mut g, &bound, f);
            let p = fuse(&mut g, &pt, &ps, &f.acc_norm, bound.config.accel_low, bound.config.accel_high);
            let (rot, contact_logits) = decoder(&mut g, &bound, &p, f);
            to_output(&FrameOutput { pt, ps, p, rot, contact_logits })
        })
        .collect()
}

/// Post-mask attention matrix as plain numbers, zero where empty.
pub fn attention_matrix(
    a: &[f64],
    b: &[f64],
    f: &FrameFeatures,
    strategy: MaskStrategy,
) -> [[f64; NUM_SENSORS]; NUM_SENSORS] {
    masked_attention(&mut Eval, a, b, f, strategy).map(|row| row.map(|c| c.unwrap_or(0.0)))
}
