//! Named parameter tensors and their seeded initialization.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[allow(unused_imports)] // inherent float methods exist only when std is in the build graph
use num_traits::Float;

use super::{PoseNetConfig, DECODER_INPUT, LSTM_INPUT, NUM_LOCAL, OUT_POSITIONS, ROT6D};
use crate::math::Rng;
use crate::{Error, Result, NUM_SENSORS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(name: &str, shape: &[usize]) -> Self {
        Self { name: name.into(), shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Indices of every tensor inside [`PoseNetParams::tensors`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    /// `(w, b)` per LSTM layer; `w` is `4H × (in + H)`, gate order i, f, g, o.
    pub lstm: Vec<(usize, usize)>,
    pub lstm_out: (usize, usize),
    pub embed: (usize, usize),
    pub gcn: Vec<GcnLayer>,
    pub gcn_out: (usize, usize),
    pub dec_hidden: (usize, usize),
    pub dec_rot: (usize, usize),
    pub dec_contact: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GcnLayer {
    pub a: usize,
    pub b: usize,
    pub m: usize,
    pub w: usize,
    pub gamma: usize,
    pub beta: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseNetParams {
    pub config: PoseNetConfig,
    pub tensors: Vec<Tensor>,
}

fn shapes(cfg: &PoseNetConfig) -> Vec<(String, Vec<usize>)> {
    let h = cfg.lstm_hidden;
    let f = cfg.gcn_width;
    let s = NUM_SENSORS;
    let mut v = Vec::new();
    for l in 0..cfg.lstm_layers {
        let input = if l == 0 { LSTM_INPUT } else { h };
        v.push((format!("lstm.{l}.w"), vec![4 * h, input + h]));
        v.push((format!("lstm.{l}.b"), vec![4 * h]));
    }
    v.push(("lstm.out.w".into(), vec![OUT_POSITIONS, h]));
    v.push(("lstm.out.b".into(), vec![OUT_POSITIONS]));
    v.push(("gcn.embed.w".into(), vec![f, ROT6D]));
    v.push(("gcn.embed.b".into(), vec![f]));
    for l in 0..cfg.gcn_layers {
        // off-diagonal entries only; the mask always removes the diagonal
        v.push((format!("gcn.{l}.A"), vec![s, s - 1]));
        v.push((format!("gcn.{l}.B"), vec![s, s - 1]));
        v.push((format!("gcn.{l}.M"), vec![s, f]));
        v.push((format!("gcn.{l}.W"), vec![f, f]));
        v.push((format!("gcn.{l}.gamma"), vec![f]));
        v.push((format!("gcn.{l}.beta"), vec![f]));
    }
    v.push(("gcn.out.w".into(), vec![3, f]));
    v.push(("gcn.out.b".into(), vec![3]));
    v.push(("dec.hidden.w".into(), vec![cfg.decoder_hidden, DECODER_INPUT]));
    v.push(("dec.hidden.b".into(), vec![cfg.decoder_hidden]));
    v.push(("dec.rot.w".into(), vec![NUM_LOCAL * ROT6D, cfg.decoder_hidden]));
    v.push(("dec.rot.b".into(), vec![NUM_LOCAL * ROT6D]));
    v.push(("dec.contact.w".into(), vec![2, cfg.decoder_hidden]));
    v.push(("dec.contact.b".into(), vec![2]));
    v
}

impl Layout {
    pub fn new(cfg: &PoseNetConfig) -> Self {
        let names: Vec<String> = shapes(cfg).into_iter().map(|(n, _)| n).collect();
        let at = |n: &str| names.iter().position(|x| x == n).expect("tensor name in layout");
        let pair = |p: &str| (at(&format!("{p}.w")), at(&format!("{p}.b")));
        Layout {
            lstm: (0..cfg.lstm_layers).map(|l| pair(&format!("lstm.{l}"))).collect(),
            lstm_out: pair("lstm.out"),
            embed: pair("gcn.embed"),
            gcn: (0..cfg.gcn_layers)
                .map(|l| GcnLayer {
                    a: at(&format!("gcn.{l}.A")),
                    b: at(&format!("gcn.{l}.B")),
                    m: at(&format!("gcn.{l}.M")),
                    w: at(&format!("gcn.{l}.W")),
                    gamma: at(&format!("gcn.{l}.gamma")),
                    beta: at(&format!("gcn.{l}.beta")),
                })
                .collect(),
            gcn_out: pair("gcn.out"),
            dec_hidden: pair("dec.hidden"),
            dec_rot: pair("dec.rot"),
            dec_contact: pair("dec.contact"),
        }
    }
}

impl PoseNetParams {
    pub fn zeros(config: &PoseNetConfig) -> Self {
        let tensors = shapes(config).iter().map(|(n, s)| Tensor::zeros(n, s)).collect();
        Self { config: config.clone(), tensors }
    }

    /// Xavier-uniform weights, zero biases except the LSTM forget gate (1),
    /// distance attention `A ≈ 1`, `B ≈ 0`, modulation `M ≈ 1`, scale 1, shift 0.
    pub fn init(config: &PoseNetConfig, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(config);
        let h = config.lstm_hidden;
        for t in &mut p.tensors {
            let name = t.name.as_str();
            if name.ends_with(".A") || name.ends_with(".M") {
                t.data.iter_mut().for_each(|v| *v = 1.0 + 0.1 * rng.uniform_range(-1.0, 1.0));
            } else if name.ends_with(".B") {
                t.data.iter_mut().for_each(|v| *v = 0.1 * rng.uniform_range(-1.0, 1.0));
            } else if name.ends_with(".gamma") {
                t.data.iter_mut().for_each(|v| *v = 1.0);
            } else if name.starts_with("lstm.") && name.ends_with(".b") && name != "lstm.out.b" {
                t.data[h..2 * h].iter_mut().for_each(|v| *v = 1.0);
            } else if t.shape.len() == 2 {
                let (rows, cols) = (t.shape[0], t.shape[1]);
                let bound = (6.0 / (cols + rows) as f64).sqrt();
                t.data.iter_mut().for_each(|v| *v = rng.uniform_range(-bound, bound));
            }
        }
        p
    }

    pub fn layout(&self) -> Layout {
        Layout::new(&self.config)
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.data.iter().copied()).collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_parameters(), "flat parameter length");
        let mut k = 0;
        for t in &mut self.tensors {
            let n = t.data.len();
            t.data.copy_from_slice(&flat[k..k + n]);
            k += n;
        }
    }

    pub fn norm(&self) -> f64 {
        self.tensors.iter().flat_map(|t| t.data.iter()).map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Checks names, shapes and sizes against the config.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let want = shapes(&self.config);
        if want.len() != self.tensors.len() {
            return Err(Error::Shape(format!("expected {} tensors, got {}", want.len(), self.tensors.len())));
        }
        for ((n, s), t) in want.iter().zip(&self.tensors) {
            if *n != t.name || *s != t.shape || t.data.len() != s.iter().product::<usize>() {
                return Err(Error::Shape(format!("tensor {} has shape {:?}, expected {n} {s:?}", t.name, t.shape)));
            }
        }
        if !self.is_finite() {
            return Err(Error::NonFinite(0));
        }
        Ok(())
    }
}
