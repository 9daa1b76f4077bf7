//! Scalar reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every scalar node in creation order. Each node stores its
//! value and a list of `(parent, ∂node/∂parent)` edges, so creation order is a
//! topological order and the backward pass is a single reverse sweep.
//!
//! Fused n-ary nodes (`sum`, `dot`, `affine`) keep linear layers to one node per
//! output instead of one per multiply-add.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods exist only when std is in the build graph
use num_traits::Float;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    values: Vec<f64>,
    offsets: Vec<u32>,
    parents: Vec<u32>,
    partials: Vec<f64>,
}

/// Adjoints of every node, indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients(Vec<f64>);

impl Gradients {
    pub fn wrt(&self, v: Var) -> f64 {
        self.0[v.index()]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl Tape {
    pub fn new() -> Self {
        Self { offsets: vec![0], ..Default::default() }
    }

    pub fn with_capacity(nodes: usize, edges: usize) -> Self {
        let mut offsets = Vec::with_capacity(nodes + 1);
        offsets.push(0);
        Self {
            values: Vec::with_capacity(nodes),
            offsets,
            parents: Vec::with_capacity(edges),
            partials: Vec::with_capacity(edges),
        }
    }

    /// Drops every node but keeps the allocations.
    pub fn clear(&mut self) {
        self.values.clear();
        self.offsets.clear();
        self.offsets.push(0);
        self.parents.clear();
        self.partials.clear();
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, v: Var) -> f64 {
        self.values[v.index()]
    }

    fn finish(&mut self, value: f64) -> Var {
        let id = self.values.len() as u32;
        self.values.push(value);
        self.offsets.push(self.parents.len() as u32);
        Var(id)
    }

    fn edge(&mut self, p: Var, d: f64) {
        self.parents.push(p.0);
        self.partials.push(d);
    }

    /// Independent variable (parameter, input or constant).
    pub fn leaf(&mut self, value: f64) -> Var {
        self.finish(value)
    }

    pub fn leaves(&mut self, values: &[f64]) -> Vec<Var> {
        values.iter().map(|&v| self.leaf(v)).collect()
    }

    pub fn unary(&mut self, a: Var, value: f64, da: f64) -> Var {
        self.edge(a, da);
        self.finish(value)
    }

    pub fn binary(&mut self, a: Var, b: Var, value: f64, da: f64, db: f64) -> Var {
        self.edge(a, da);
        self.edge(b, db);
        self.finish(value)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.binary(a, b, v, 1.0, 1.0)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.binary(a, b, v, 1.0, -1.0)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        self.binary(a, b, x * y, y, x)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        self.binary(a, b, x / y, 1.0 / y, -x / (y * y))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let v = -self.value(a);
        self.unary(a, v, -1.0)
    }

    /// `k · a` for a constant `k`.
    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = k * self.value(a);
        self.unary(a, v, k)
    }

    /// `a + k` for a constant `k`.
    pub fn offset(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) + k;
        self.unary(a, v, 1.0)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let x = self.value(a);
        self.unary(a, x * x, 2.0 * x)
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let s = self.value(a).sqrt();
        self.unary(a, s, 0.5 / s)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let d = if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.unary(a, x.abs(), d)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let e = self.value(a).exp();
        self.unary(a, e, e)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let x = self.value(a);
        self.unary(a, x.ln(), 1.0 / x)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = self.value(a).tanh();
        self.unary(a, t, 1.0 - t * t)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let s = sigmoid(self.value(a));
        self.unary(a, s, s * (1.0 - s))
    }

    /// `log(sigmoid(a))`, stable for large |a|.
    pub fn log_sigmoid(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let v = if x >= 0.0 { -(-x).exp().ln_1p() } else { x - x.exp().ln_1p() };
        self.unary(a, v, 1.0 - sigmoid(x))
    }

    pub fn sum(&mut self, xs: &[Var]) -> Var {
        let mut v = 0.0;
        for &x in xs {
            v += self.value(x);
            self.edge(x, 1.0);
        }
        self.finish(v)
    }

    /// `Σ aᵢ bᵢ` as a single node.
    pub fn dot(&mut self, a: &[Var], b: &[Var]) -> Var {
        assert_eq!(a.len(), b.len(), "Tape::dot: length mismatch");
        let mut v = 0.0;
        for (&x, &y) in a.iter().zip(b) {
            let (xv, yv) = (self.value(x), self.value(y));
            v += xv * yv;
            self.edge(x, yv);
            self.edge(y, xv);
        }
        self.finish(v)
    }

    /// `Σ wᵢ xᵢ + b` with variable weights/inputs and a variable bias.
    pub fn affine(&mut self, w: &[Var], x: &[Var], b: Var) -> Var {
        assert_eq!(w.len(), x.len(), "Tape::affine: length mismatch");
        let mut v = self.value(b);
        self.edge(b, 1.0);
        for (&wi, &xi) in w.iter().zip(x) {
            let (wv, xv) = (self.value(wi), self.value(xi));
            v += wv * xv;
            self.edge(wi, xv);
            self.edge(xi, wv);
        }
        self.finish(v)
    }

    /// `Σ wᵢ xᵢ + b` where the inputs `x` are constants.
    pub fn affine_const_input(&mut self, w: &[Var], x: &[f64], b: Var) -> Var {
        assert_eq!(w.len(), x.len(), "Tape::affine_const_input: length mismatch");
        let mut v = self.value(b);
        self.edge(b, 1.0);
        for (&wi, &xv) in w.iter().zip(x) {
            v += self.value(wi) * xv;
            self.edge(wi, xv);
        }
        self.finish(v)
    }

    /// `Σ cᵢ xᵢ` with constant coefficients.
    pub fn linear_combination(&mut self, c: &[f64], x: &[Var]) -> Var {
        assert_eq!(c.len(), x.len());
        let mut v = 0.0;
        for (&ci, &xi) in c.iter().zip(x) {
            v += ci * self.value(xi);
            self.edge(xi, ci);
        }
        self.finish(v)
    }

    /// Reverse sweep from `output`. Every node is visited once, in reverse creation order.
    pub fn backward(&self, output: Var) -> Gradients {
        let mut adj = vec![0.0; output.index() + 1];
        adj[output.index()] = 1.0;
        for node in (0..=output.index()).rev() {
            let g = adj[node];
            if g == 0.0 {
                continue;
            }
            let (s, e) = (self.offsets[node] as usize, self.offsets[node + 1] as usize);
            for k in s..e {
                adj[self.parents[k] as usize] += g * self.partials[k];
            }
        }
        adj.resize(self.values.len(), 0.0);
        Gradients(adj)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
