//! Broadcast two-way ranging between the six nodes.
//!
//! One round: node 0 broadcasts a request, then responders 1..5 reply in
//! fixed slots. Every node timestamps every message it hears, so each pair
//! `(i, j)` with `i < j` has the four timestamps needed for a two-way
//! exchange: `i` sent first, `j` heard it, `j` sent later, `i` heard that.
//!
//! Event times inside a round are kept relative to the round epoch so the
//! resolved distances stay exact to well under a micrometre.

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods exist only when std is in the build graph
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::math::{Rng, Vec3};
use crate::{sensor_pairs, Error, Result, NUM_PAIRS, NUM_SENSORS};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Period between ranging rounds (s); gives the 25 Hz stream.
pub const ROUND_PERIOD: f64 = 0.040;
/// Gap between consecutive responder reply slots, in responder local time (s).
pub const REPLY_SLOT: f64 = 0.002;
pub const INITIATOR: usize = 0;
pub const MAX_SKEW_PPM: f64 = 50.0;

/// Line-of-sight range noise (m).
pub const SIGMA_LOS: f64 = 0.051;
/// Occluded range noise (m).
pub const SIGMA_NLOS: f64 = 0.083;
/// Occlusion ratio at and above which a link counts as occluded.
pub const OCCLUSION_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeClock {
    /// Frequency error in parts per million.
    pub skew_ppm: f64,
    /// Local reading at true time zero (s).
    pub offset: f64,
    /// Total tx + rx antenna delay (s), split evenly between the two.
    pub antenna_delay: f64,
}

impl NodeClock {
    pub const IDEAL: NodeClock = NodeClock { skew_ppm: 0.0, offset: 0.0, antenna_delay: 0.0 };

    /// Panics if `|skew| > 50 ppm` or the delay is negative.
    pub fn new(skew_ppm: f64, offset: f64, antenna_delay: f64) -> Self {
        assert!(skew_ppm.abs() <= MAX_SKEW_PPM, "clock skew beyond ±50 ppm");
        assert!(antenna_delay >= 0.0, "negative antenna delay");
        Self { skew_ppm, offset, antenna_delay }
    }

    pub fn rate(&self) -> f64 {
        1.0 + self.skew_ppm * 1e-6
    }

    /// Local clock reading at true time `t`.
    pub fn local(&self, t: f64) -> f64 {
        self.offset + self.rate() * t
    }
}

/// One transmitted message and everyone's view of it. Timestamps are local
/// clock readings relative to each node's own reading of the round epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub sender: usize,
    pub tx: f64,
    /// Receive timestamp per node; `None` for the sender and for drops.
    pub rx: [Option<f64>; NUM_SENSORS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangingRound {
    pub index: usize,
    /// True time of the round epoch (s).
    pub t: f64,
    pub initiator: usize,
    /// Each node's local clock reading at the epoch.
    pub epoch_local: [f64; NUM_SENSORS],
    /// In transmission order: the request, then replies from nodes 1..5 that heard it.
    pub messages: Vec<MessageRecord>,
    pub distances: [[f64; NUM_SENSORS]; NUM_SENSORS],
    pub valid: [[bool; NUM_SENSORS]; NUM_SENSORS],
}

impl RangingRound {
    pub fn valid_pairs(&self) -> usize {
        sensor_pairs().iter().filter(|&&(i, j)| self.valid[i][j]).count()
    }
}

/// Time of flight from one two-way exchange: `i` sends, `j` receives, `j`
/// sends, `i` receives. Negative results are returned as is.
pub fn resolve_tof(t_i_sent: f64, t_i_received: f64, t_j_received: f64, t_j_sent: f64) -> f64 {
    0.5 * ((t_i_received - t_i_sent) - (t_j_sent - t_j_received))
}

pub fn tof_to_distance(tof: f64) -> f64 {
    tof * SPEED_OF_LIGHT
}

/// Range noise for an occlusion ratio `c`.
pub fn occlusion_noise_sigma(c: f64) -> f64 {
    if c < OCCLUSION_THRESHOLD {
        SIGMA_LOS
    } else {
        SIGMA_NLOS
    }
}

/// Simulates one round at true epoch `t`. `sigma(i, j)` gives the range noise
/// for pair `i < j`; it is injected as timestamp noise on the two receptions
/// that belong to the pair, scaled so the resolved distance has that σ.
/// Nodes are treated as static for the ~10 ms the round takes.
#[allow(clippy::too_many_arguments)]
pub fn run_ranging_round(
    index: usize,
    t: f64,
    positions: &[Vec3; NUM_SENSORS],
    clocks: &[NodeClock; NUM_SENSORS],
    drop_prob: f64,
    mut sigma: impl FnMut(usize, usize) -> f64,
    rng: &mut Rng,
) -> RangingRound {
    assert!((0.0..1.0).contains(&drop_prob), "drop probability must be in [0, 1)");
    let mut sig = [[0.0; NUM_SENSORS]; NUM_SENSORS];
    for (i, j) in sensor_pairs() {
        let s = sigma(i, j);
        sig[i][j] = s;
        sig[j][i] = s;
    }

    // Broadcast from `sender` whose timestamp is taken at round-relative true time `t_tx`.
    let broadcast = |sender: usize, t_tx: f64, rng: &mut Rng| {
        let mut rx = [None; NUM_SENSORS];
        for (m, slot) in rx.iter_mut().enumerate() {
            if m == sender {
                continue;
            }
            let dropped = drop_prob > 0.0 && rng.bernoulli(drop_prob);
            let noise = rng.normal() * core::f64::consts::SQRT_2 * sig[sender][m] / SPEED_OF_LIGHT;
            if dropped {
                continue;
            }
            let arrive = t_tx
                + 0.5 * clocks[sender].antenna_delay
                + positions[sender].distance(positions[m]) / SPEED_OF_LIGHT
                + 0.5 * clocks[m].antenna_delay;
            *slot = Some(clocks[m].rate() * arrive + noise);
        }
        MessageRecord { sender, tx: clocks[sender].rate() * t_tx, rx }
    };

    let mut messages = Vec::with_capacity(NUM_SENSORS);
    let request = broadcast(INITIATOR, 0.0, rng);
    for k in 1..NUM_SENSORS {
        if let Some(heard) = request.rx[k] {
            let tx_local = heard + k as f64 * REPLY_SLOT;
            messages.push(broadcast(k, tx_local / clocks[k].rate(), rng));
        }
    }
    messages.insert(0, request);

    let mut distances = [[0.0; NUM_SENSORS]; NUM_SENSORS];
    let mut valid = [[false; NUM_SENSORS]; NUM_SENSORS];
    for i in 0..NUM_SENSORS {
        valid[i][i] = true;
    }
    let from = |n: usize| messages.iter().find(|m| m.sender == n);
    for (i, j) in sensor_pairs() {
        let (Some(mi), Some(mj)) = (from(i), from(j)) else { continue };
        let (Some(rj), Some(ri)) = (mi.rx[j], mj.rx[i]) else { continue };
        let d = tof_to_distance(resolve_tof(mi.tx, ri, rj, mj.tx));
        distances[i][j] = d;
        distances[j][i] = d;
        valid[i][j] = true;
        valid[j][i] = true;
    }

    let mut epoch_local = [0.0; NUM_SENSORS];
    for (e, c) in epoch_local.iter_mut().zip(clocks) {
        *e = c.local(t);
    }
    RangingRound { index, t, initiator: INITIATOR, epoch_local, messages, distances, valid }
}

/// One row of the 25 Hz raw distance stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDistanceFrame {
    pub round: usize,
    pub t: f64,
    pub d: [[f64; NUM_SENSORS]; NUM_SENSORS],
    pub valid: [[bool; NUM_SENSORS]; NUM_SENSORS],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawDistanceStream {
    pub frames: Vec<RawDistanceFrame>,
}

impl From<&RangingRound> for RawDistanceFrame {
    fn from(r: &RangingRound) -> Self {
        Self { round: r.index, t: r.t, d: r.distances, valid: r.valid }
    }
}

impl RawDistanceStream {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Raw ranges of one pair as `(round index, value)` for valid rounds.
    pub fn pair_series(&self, i: usize, j: usize) -> Vec<(usize, f64)> {
        self.frames.iter().enumerate().filter(|(_, f)| f.valid[i][j]).map(|(k, f)| (k, f.d[i][j])).collect()
    }
}

/// Number of rounds whose epoch falls inside `[0, duration)`.
pub fn round_count(duration: f64) -> usize {
    // tolerate representation error in duration, e.g. 1000 × 0.01
    ((duration / ROUND_PERIOD) - 1e-9).ceil().max(0.0) as usize
}

/// Ranging over a sampled trajectory. `positions[k]` holds all node positions
/// at frame `k` (spacing `frame_dt`); round `r` uses the frame nearest its
/// epoch. `sigma(round, i, j)` supplies per-pair noise.
pub fn simulate_ranging(
    positions: &[[Vec3; NUM_SENSORS]],
    frame_dt: f64,
    clocks: &[NodeClock; NUM_SENSORS],
    drop_prob: f64,
    mut sigma: impl FnMut(usize, usize, usize) -> f64,
    rng: &mut Rng,
) -> Vec<RangingRound> {
    let rounds = round_count(positions.len() as f64 * frame_dt);
    (0..rounds)
        .map(|r| {
            let t = r as f64 * ROUND_PERIOD;
            let k = ((t / frame_dt).round() as usize).min(positions.len() - 1);
            run_ranging_round(r, t, &positions[k], clocks, drop_prob, |i, j| sigma(r, i, j), rng)
        })
        .collect()
}

/// Affine model `raw = scale·truth + bias` of a ranging link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineCalibration {
    pub scale: f64,
    pub bias: f64,
    pub inliers: usize,
}

impl AffineCalibration {
    pub const IDENTITY: AffineCalibration = AffineCalibration { scale: 1.0, bias: 0.0, inliers: 0 };

    /// Maps a raw range back to metric distance.
    pub fn correct(&self, raw: f64) -> f64 {
        (raw - self.bias) / self.scale
    }
}

fn least_squares(xs: &[f64], ys: &[f64], idx: &[usize]) -> Option<(f64, f64)> {
    let n = idx.len() as f64;
    let mx = idx.iter().map(|&k| xs[k]).sum::<f64>() / n;
    let my = idx.iter().map(|&k| ys[k]).sum::<f64>() / n;
    let sxx: f64 = idx.iter().map(|&k| (xs[k] - mx) * (xs[k] - mx)).sum();
    let sxy: f64 = idx.iter().map(|&k| (xs[k] - mx) * (ys[k] - my)).sum();
    if !(sxx > 1e-12) {
        return None;
    }
    let a = sxy / sxx;
    Some((a, my - a * mx))
}

fn inliers_of(truth: &[f64], raw: &[f64], a: f64, b: f64, tol: f64) -> (Vec<usize>, f64) {
    let mut idx = Vec::new();
    let mut cost = 0.0;
    for (k, (&x, &y)) in truth.iter().zip(raw).enumerate() {
        let r = (y - (a * x + b)).abs();
        if r < tol {
            idx.push(k);
            cost += r;
        }
    }
    (idx, cost)
}

/// RANSAC fit of `raw = scale·truth + bias` from two-point hypotheses, keeping
/// the one with most inliers (ties: smallest inlier residual sum), then
/// refitting by least squares on its inlier set.
pub fn ransac_affine_calibrate(
    raw: &[f64],
    truth: &[f64],
    iters: usize,
    inlier_tol: f64,
    rng: &mut Rng,
) -> Result<AffineCalibration> {
    if raw.len() != truth.len() {
        return Err(Error::Shape("raw and truth differ in length".into()));
    }
    let n = raw.len();
    if n < 2 {
        return Err(Error::CalibrationFailed("need at least two samples".into()));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..iters {
        let p = rng.below(n);
        let q = rng.below(n);
        let dx = truth[q] - truth[p];
        if dx.abs() < 1e-9 {
            continue;
        }
        let a = (raw[q] - raw[p]) / dx;
        let b = raw[p] - a * truth[p];
        let (idx, cost) = inliers_of(truth, raw, a, b, inlier_tol);
        let better = match &best {
            None => true,
            Some((bi, bc)) => idx.len() > bi.len() || (idx.len() == bi.len() && cost < *bc),
        };
        if better {
            best = Some((idx, cost));
        }
    }
    let Some((idx, _)) = best else {
        return Err(Error::CalibrationFailed("all samples degenerate".into()));
    };
    let (a, b) =
        least_squares(truth, raw, &idx).ok_or_else(|| Error::CalibrationFailed("degenerate inlier set".into()))?;
    // one re-selection pass with the refined model
    let (idx2, _) = inliers_of(truth, raw, a, b, inlier_tol);
    let (a, b, count) = match least_squares(truth, raw, &idx2) {
        Some((a2, b2)) if idx2.len() >= idx.len() => (a2, b2, idx2.len()),
        _ => (a, b, idx.len()),
    };
    Ok(AffineCalibration { scale: a, bias: b, inliers: count })
}

/// Per-pair calibrations in [`sensor_pairs`] order.
pub type PairCalibration = [AffineCalibration; NUM_PAIRS];

#[cfg(test)]
mod tests {
    use super::*;

    fn ideal() -> [NodeClock; NUM_SENSORS] {
        [NodeClock::IDEAL; NUM_SENSORS]
    }

    fn line(spacing: f64) -> [Vec3; NUM_SENSORS] {
        core::array::from_fn(|k| Vec3::new(k as f64 * spacing, 0.0, 0.0))
    }

    #[test]
    fn resolve_tof_arithmetic() {
        let tau = resolve_tof(0.0, 120e-9, 10e-9, 110e-9);
        assert!((tau - 10e-9).abs() < 1e-21);
        assert!((tof_to_distance(tau) - 2.99792458).abs() < 1e-9);
        assert!((resolve_tof(0.0, 2.0 * 7e-9, 7e-9, 7e-9) - 7e-9).abs() < 1e-22);
        assert_eq!(resolve_tof(5.0, 5.0, 3.0, 3.0), 0.0);
    }

    #[test]
    fn resolve_tof_cancels_offsets() {
        // offsets chosen exactly representable so the identity is exact
        let (a, b, c, d) = (0.0, 2f64.powi(-19), 2f64.powi(-21), 2f64.powi(-20));
        let base = resolve_tof(a, b, c, d);
        assert_eq!(resolve_tof(a + 64.0, b + 64.0, c - 8.0, d - 8.0), base);
    }

    #[test]
    fn colocated_nodes_give_zero() {
        let r =
            run_ranging_round(0, 0.0, &[Vec3::ZERO; NUM_SENSORS], &ideal(), 0.0, |_, _| 0.0, &mut Rng::seed_from(0));
        for (i, j) in sensor_pairs() {
            assert!(r.valid[i][j]);
            assert_eq!(r.distances[i][j], 0.0);
        }
    }

    #[test]
    fn three_metre_pair_matches_hand_computation() {
        let mut pos = [Vec3::ZERO; NUM_SENSORS];
        pos[1] = Vec3::new(3.0, 0.0, 0.0);
        let r = run_ranging_round(0, 0.0, &pos, &ideal(), 0.0, |_, _| 0.0, &mut Rng::seed_from(0));
        let tau = 3.0 / SPEED_OF_LIGHT;
        assert!((tau * 1e9 - 10.007).abs() < 1e-3);
        let req = &r.messages[0];
        let rep = &r.messages[1];
        assert!((rep.tx - (tau + REPLY_SLOT)).abs() < 1e-18);
        assert!((req.rx[1].unwrap() - tau).abs() < 1e-18);
        assert!((r.distances[0][1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn schedule_fits_in_one_period() {
        let r = run_ranging_round(0, 0.0, &line(0.5), &ideal(), 0.0, |_, _| 0.0, &mut Rng::seed_from(0));
        assert_eq!(r.messages.len(), NUM_SENSORS);
        let last = r.messages.last().unwrap().rx.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
        assert!(last < ROUND_PERIOD);
        assert_eq!(r.valid_pairs(), NUM_PAIRS);
    }

    #[test]
    fn offsets_do_not_change_distances() {
        let pos = line(0.4);
        let a = run_ranging_round(3, 0.12, &pos, &ideal(), 0.0, |_, _| 0.0, &mut Rng::seed_from(0));
        let clocks: [NodeClock; NUM_SENSORS] =
            core::array::from_fn(|k| NodeClock::new(0.0, 1e3 * k as f64 - 77.7, 0.0));
        let b = run_ranging_round(3, 0.12, &pos, &clocks, 0.0, |_, _| 0.0, &mut Rng::seed_from(0));
        assert_eq!(a.distances, b.distances);
        assert_ne!(a.epoch_local, b.epoch_local);
    }

    #[test]
    fn skew_error_within_closed_form_bound() {
        let mut pos = [Vec3::ZERO; NUM_SENSORS];
        for (k, p) in pos.iter_mut().enumerate().skip(1) {
            *p = Vec3::new(0.0, 0.0, 3.0 + 0.01 * k as f64);
        }
        pos[1] = Vec3::new(3.0, 0.0, 0.0);
        let skew = 40.0;
        let mut clocks = ideal();
        clocks[1] = NodeClock::new(skew, 0.0, 0.0);
        let r = run_ranging_round(0, 0.0, &pos, &clocks, 0.0, |_, _| 0.0, &mut Rng::seed_from(0));
        // initiator measures reply time with a perfect clock; responder's interval is short by skew
        let reply = REPLY_SLOT / clocks[1].rate();
        let bound = skew * 1e-6 * reply * SPEED_OF_LIGHT;
        let err = (r.distances[0][1] - 3.0).abs();
        assert!(err <= bound, "{err} > {bound}");
        assert!(err > 0.4 * bound, "skew effect should be visible: {err}");
        // pairs not involving node 1 are untouched
        assert!((r.distances[0][2] - pos[2].norm()).abs() < 1e-6);
    }

    #[test]
    fn antenna_delay_is_constant_bias() {
        let pos = line(0.3);
        let clocks: [NodeClock; NUM_SENSORS] =
            core::array::from_fn(|k| NodeClock::new(0.0, 0.0, (k as f64 + 1.0) * 1e-10));
        let r = run_ranging_round(0, 0.0, &pos, &clocks, 0.0, |_, _| 0.0, &mut Rng::seed_from(0));
        for (i, j) in sensor_pairs() {
            let bias = 0.5 * (clocks[i].antenna_delay + clocks[j].antenna_delay) * SPEED_OF_LIGHT;
            assert!((r.distances[i][j] - pos[i].distance(pos[j]) - bias).abs() < 1e-6);
        }
    }

    #[test]
    fn drops_invalidate_only_affected_pairs() {
        let mut rng = Rng::seed_from(5);
        let mut total = 0;
        for k in 0..500 {
            let r = run_ranging_round(k, 0.0, &line(0.3), &ideal(), 0.1, |_, _| 0.0, &mut rng);
            for (i, j) in sensor_pairs() {
                if r.valid[i][j] {
                    assert!((r.distances[i][j] - 0.3 * (j - i) as f64).abs() < 1e-6);
                }
            }
            for i in 0..NUM_SENSORS {
                assert!(r.valid[i][i]);
            }
            total += r.valid_pairs();
        }
        // each pair needs two receptions and both transmitters to be live
        let frac = total as f64 / (500 * NUM_PAIRS) as f64;
        assert!(frac > 0.6 && frac < 0.85, "{frac}");
    }

    #[test]
    fn occlusion_sigma_table() {
        assert_eq!(occlusion_noise_sigma(0.0), 0.051);
        assert_eq!(occlusion_noise_sigma(0.1), 0.051);
        assert_eq!(occlusion_noise_sigma(0.2), 0.083);
        assert_eq!(occlusion_noise_sigma(0.5), 0.083);
    }

    #[test]
    fn round_count_rate() {
        assert_eq!(round_count(10.0), 250);
        assert_eq!(round_count(1000.0 * 0.01), 250);
        assert_eq!(round_count(0.0), 0);
        assert_eq!(round_count(0.041), 2);
    }

    #[test]
    fn ransac_identity_and_degenerate() {
        let truth: Vec<f64> = (0..30).map(|k| 0.2 + 0.05 * k as f64).collect();
        let c = ransac_affine_calibrate(&truth, &truth, 100, 0.01, &mut Rng::seed_from(1)).unwrap();
        assert!((c.scale - 1.0).abs() < 1e-12 && c.bias.abs() < 1e-12);
        assert_eq!(c.inliers, 30);
        assert!(ransac_affine_calibrate(&[1.0], &[1.0], 100, 0.01, &mut Rng::seed_from(1)).is_err());
        assert!(ransac_affine_calibrate(&[1.0; 25], &[2.0; 25], 100, 0.01, &mut Rng::seed_from(1)).is_err());
    }

    #[test]
    fn ransac_prefers_majority_family() {
        let mut rng = Rng::seed_from(8);
        let mut raw = Vec::new();
        let mut truth = Vec::new();
        for k in 0..100 {
            let x = rng.uniform_range(0.2, 2.0);
            truth.push(x);
            raw.push(if k % 5 < 3 { 1.1 * x + 0.2 } else { 0.8 * x - 0.4 });
        }
        let c = ransac_affine_calibrate(&raw, &truth, 200, 0.02, &mut Rng::seed_from(2)).unwrap();
        assert!((c.scale - 1.1).abs() < 1e-9 && (c.bias - 0.2).abs() < 1e-9);
        assert_eq!(c.inliers, 60);
    }
}
