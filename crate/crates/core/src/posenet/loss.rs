//! Training losses.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{to_6d, FrameFeatures, FrameOutput, Graph, Positions, NUM_LOCAL, ROT6D};
use crate::math::Vec3;
use crate::pipeline::TargetFrame;
use crate::{sensor_pairs, NUM_SENSORS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Weight of the pairwise-distance L1 term.
    pub lambda: f64,
    pub rotation: f64,
    pub contact: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { lambda: 0.01, rotation: 1.0, contact: 1.0 }
    }
}

/// Flattened regression targets for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTarget {
    pub positions: [Vec3; NUM_SENSORS],
    pub rot6d: Vec<f64>,
    pub contacts: [bool; 2],
}

impl From<&TargetFrame> for FrameTarget {
    fn from(t: &TargetFrame) -> Self {
        assert_eq!(t.local_rotations.len(), NUM_LOCAL, "one target rotation per non-root joint");
        Self {
            positions: t.positions,
            rot6d: t.local_rotations.iter().flat_map(|q| to_6d(*q)).collect(),
            contacts: t.contacts,
        }
    }
}

fn norm<G: Graph>(g: &mut G, v: &[G::V]) -> Option<G::V> {
    let ss = g.dot(v, v);
    if g.val(ss) > 0.0 {
        Some(g.sqrt(ss))
    } else {
        None
    }
}

/// `mean(1 − cos(P̂ᵢ, P̃ᵢ)) + λ Σ |‖P̂ᵢ − P̂ⱼ‖ − Dᵢⱼ|` over valid pairs.
/// Sensors where either vector has zero length are left out of the mean.
pub fn distance_aware_loss<G: Graph>(
    g: &mut G,
    p_hat: &Positions<G::V>,
    p_true: &[Vec3; NUM_SENSORS],
    d: &[[f64; NUM_SENSORS]; NUM_SENSORS],
    mask: &[[bool; NUM_SENSORS]; NUM_SENSORS],
    lambda: f64,
) -> G::V {
    let mut cos_terms = Vec::new();
    for s in 0..NUM_SENSORS {
        let t = p_true[s];
        let tn = t.norm();
        if tn == 0.0 {
            continue;
        }
        let Some(n) = norm(g, &p_hat[s]) else { continue };
        let d = g.lincomb(&t.to_array(), &p_hat[s]);
        let nt = g.scale(n, tn);
        let cos = g.div(d, nt);
        let one_minus = g.offset(cos, -1.0);
        cos_terms.push(g.scale(one_minus, -1.0));
    }
    let mut parts = Vec::new();
    if !cos_terms.is_empty() {
        let k = 1.0 / cos_terms.len() as f64;
        let s = g.sum(&cos_terms);
        parts.push(g.scale(s, k));
    }
    let mut l1 = Vec::new();
    for (i, j) in sensor_pairs() {
        if !mask[i][j] {
            continue;
        }
        let diff: Vec<G::V> = (0..3).map(|k| g.sub(p_hat[i][k], p_hat[j][k])).collect();
        let dist = match norm(g, &diff) {
            Some(n) => n,
            None => g.constant(0.0),
        };
        let e = g.offset(dist, -d[i][j]);
        l1.push(g.abs(e));
    }
    if !l1.is_empty() {
        let s = g.sum(&l1);
        parts.push(g.scale(s, lambda));
    }
    if parts.is_empty() {
        g.constant(0.0)
    } else {
        g.sum(&parts)
    }
}

/// `L_d(P_t) + L_d(P_s) + w_rot · MSE(6D) + w_contact · BCE`.
pub fn frame_loss<G: Graph>(
    g: &mut G,
    out: &FrameOutput<G::V>,
    f: &FrameFeatures,
    target: &FrameTarget,
    w: &LossWeights,
) -> G::V {
    let lt = distance_aware_loss(g, &out.pt, &target.positions, &f.d, &f.mask, w.lambda);
    let ls = distance_aware_loss(g, &out.ps, &target.positions, &f.d, &f.mask, w.lambda);
    let sq: Vec<G::V> = out
        .rot
        .iter()
        .zip(&target.rot6d)
        .map(|(&r, &t)| {
            let e = g.offset(r, -t);
            g.square(e)
        })
        .collect();
    let rot_sum = g.sum(&sq);
    let rot = g.scale(rot_sum, w.rotation / (NUM_LOCAL * ROT6D) as f64);
    let bce: Vec<G::V> = (0..2)
        .map(|k| {
            let z = out.contact_logits[k];
            if target.contacts[k] {
                g.log_sigmoid(z)
            } else {
                let nz = g.scale(z, -1.0);
                g.log_sigmoid(nz)
            }
        })
        .collect();
    let bce_sum = g.sum(&bce);
    let contact = g.scale(bce_sum, -w.contact / 2.0);
    g.sum(&[lt, ls, rot, contact])
}
