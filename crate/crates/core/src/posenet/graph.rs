//! One model definition, two backends: the autodiff [`Tape`] for training and
//! plain `f64` evaluation for inference.

use crate::math::autodiff::sigmoid;
use crate::math::{Tape, Var};

#[allow(unused_imports)] // inherent float methods exist only when std is in the build graph
use num_traits::Float;

pub trait Graph {
    type V: Copy;

    fn constant(&mut self, x: f64) -> Self::V;
    fn val(&self, v: Self::V) -> f64;

    fn add(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn sub(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn mul(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn div(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn scale(&mut self, a: Self::V, k: f64) -> Self::V;
    fn offset(&mut self, a: Self::V, k: f64) -> Self::V;
    fn square(&mut self, a: Self::V) -> Self::V;
    fn sqrt(&mut self, a: Self::V) -> Self::V;
    fn abs(&mut self, a: Self::V) -> Self::V;
    fn tanh(&mut self, a: Self::V) -> Self::V;
    fn sigmoid(&mut self, a: Self::V) -> Self::V;
    fn log_sigmoid(&mut self, a: Self::V) -> Self::V;
    fn sum(&mut self, xs: &[Self::V]) -> Self::V;
    fn dot(&mut self, a: &[Self::V], b: &[Self::V]) -> Self::V;
    /// `w·x + b`.
    fn affine(&mut self, w: &[Self::V], x: &[Self::V], b: Self::V) -> Self::V;
    /// `w·x + b` with constant `x`.
    fn affine_c(&mut self, w: &[Self::V], x: &[f64], b: Self::V) -> Self::V;
    /// `c·x` with constant `c`.
    fn lincomb(&mut self, c: &[f64], x: &[Self::V]) -> Self::V;
}

impl Graph for Tape {
    type V = Var;

    fn constant(&mut self, x: f64) -> Var {
        self.leaf(x)
    }
    fn val(&self, v: Var) -> f64 {
        self.value(v)
    }
    fn add(&mut self, a: Var, b: Var) -> Var {
        Tape::add(self, a, b)
    }
    fn sub(&mut self, a: Var, b: Var) -> Var {
        Tape::sub(self, a, b)
    }
    fn mul(&mut self, a: Var, b: Var) -> Var {
        Tape::mul(self, a, b)
    }
    fn div(&mut self, a: Var, b: Var) -> Var {
        Tape::div(self, a, b)
    }
    fn scale(&mut self, a: Var, k: f64) -> Var {
        Tape::scale(self, a, k)
    }
    fn offset(&mut self, a: Var, k: f64) -> Var {
        Tape::offset(self, a, k)
    }
    fn square(&mut self, a: Var) -> Var {
        Tape::square(self, a)
    }
    fn sqrt(&mut self, a: Var) -> Var {
        Tape::sqrt(self, a)
    }
    fn abs(&mut self, a: Var) -> Var {
        Tape::abs(self, a)
    }
    fn tanh(&mut self, a: Var) -> Var {
        Tape::tanh(self, a)
    }
    fn sigmoid(&mut self, a: Var) -> Var {
        Tape::sigmoid(self, a)
    }
    fn log_sigmoid(&mut self, a: Var) -> Var {
        Tape::log_sigmoid(self, a)
    }
    fn sum(&mut self, xs: &[Var]) -> Var {
        Tape::sum(self, xs)
    }
    fn dot(&mut self, a: &[Var], b: &[Var]) -> Var {
        Tape::dot(self, a, b)
    }
    fn affine(&mut self, w: &[Var], x: &[Var], b: Var) -> Var {
        Tape::affine(self, w, x, b)
    }
    fn affine_c(&mut self, w: &[Var], x: &[f64], b: Var) -> Var {
        Tape::affine_const_input(self, w, x, b)
    }
    fn lincomb(&mut self, c: &[f64], x: &[Var]) -> Var {
        Tape::linear_combination(self, c, x)
    }
}

/// Plain floating-point evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Eval;

impl Graph for Eval {
    type V = f64;

    fn constant(&mut self, x: f64) -> f64 {
        x
    }
    fn val(&self, v: f64) -> f64 {
        v
    }
    fn add(&mut self, a: f64, b: f64) -> f64 {
        a + b
    }
    fn sub(&mut self, a: f64, b: f64) -> f64 {
        a - b
    }
    fn mul(&mut self, a: f64, b: f64) -> f64 {
        a * b
    }
    fn div(&mut self, a: f64, b: f64) -> f64 {
        a / b
    }
    fn scale(&mut self, a: f64, k: f64) -> f64 {
        k * a
    }
    fn offset(&mut self, a: f64, k: f64) -> f64 {
        a + k
    }
    fn square(&mut self, a: f64) -> f64 {
        a * a
    }
    fn sqrt(&mut self, a: f64) -> f64 {
        a.sqrt()
    }
    fn abs(&mut self, a: f64) -> f64 {
        a.abs()
    }
    fn tanh(&mut self, a: f64) -> f64 {
        a.tanh()
    }
    fn sigmoid(&mut self, a: f64) -> f64 {
        sigmoid(a)
    }
    fn log_sigmoid(&mut self, x: f64) -> f64 {
        if x >= 0.0 {
            -(-x).exp().ln_1p()
        } else {
            x - x.exp().ln_1p()
        }
    }
    fn sum(&mut self, xs: &[f64]) -> f64 {
        let mut v = 0.0;
        for &x in xs {
            v += x;
        }
        v
    }
    fn dot(&mut self, a: &[f64], b: &[f64]) -> f64 {
        let mut v = 0.0;
        for (x, y) in a.iter().zip(b) {
            v += x * y;
        }
        v
    }
    fn affine(&mut self, w: &[f64], x: &[f64], b: f64) -> f64 {
        let mut v = b;
        for (wi, xi) in w.iter().zip(x) {
            v += wi * xi;
        }
        v
    }
    fn affine_c(&mut self, w: &[f64], x: &[f64], b: f64) -> f64 {
        self.affine(w, x, b)
    }
    fn lincomb(&mut self, c: &[f64], x: &[f64]) -> f64 {
        self.dot(c, x)
    }
}
