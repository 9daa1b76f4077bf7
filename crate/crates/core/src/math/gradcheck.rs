use alloc::vec::Vec;

use super::{Tape, Var};
use crate::{Error, Result};

/// Compares reverse-mode gradients of a scalar function against central differences.
///
/// `f` receives a fresh tape and the parameter leaves and returns the scalar output.
/// Returns `max |analytic − numeric| / max(1, |numeric|)` over all parameters.
pub fn grad_check<F>(f: F, params: &[f64], eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    assert!((1e-7..=1e-3).contains(&eps), "grad_check: eps {eps} outside [1e-7, 1e-3]");
    let mut tape = Tape::new();
    let leaves = tape.leaves(params);
    let out = f(&mut tape, &leaves);
    if !tape.value(out).is_finite() {
        return Err(Error::NonFinite(usize::MAX));
    }
    let grads = tape.backward(out);
    let analytic: Vec<f64> = leaves.iter().map(|&v| grads.wrt(v)).collect();

    let eval = |p: &[f64], tape: &mut Tape| {
        tape.clear();
        let leaves = tape.leaves(p);
        let out = f(tape, &leaves);
        tape.value(out)
    };
    let mut work = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        let orig = work[i];
        work[i] = orig + eps;
        let up = eval(&work, &mut tape);
        work[i] = orig - eps;
        let down = eval(&work, &mut tape);
        work[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(i));
        }
        let numeric = (up - down) / (2.0 * eps);
        let err = (analytic[i] - numeric).abs() / numeric.abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_is_exact() {
        let err = grad_check(|t, p| t.square(p[0]), &[3.0], 1e-5).unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn constant_function_has_zero_error() {
        let err = grad_check(|t, _| t.leaf(4.2), &[1.0, 2.0], 1e-5).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn composed_ops_match() {
        let f = |t: &mut Tape, p: &[Var]| {
            let a = t.tanh(p[0]);
            let b = t.sigmoid(p[1]);
            let c = t.mul(a, b);
            let d = t.div(c, p[2]);
            let e = t.exp(d);
            let s = t.square(p[3]);
            let s = t.offset(s, 1.0);
            let r = t.sqrt(s);
            let l = t.ln(r);
            let dot = t.dot(&p[..2], &p[2..]);
            let ls = t.log_sigmoid(dot);
            t.sum(&[e, l, ls])
        };
        let err = grad_check(f, &[0.3, -0.7, 1.9, 0.4], 1e-5).unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn non_finite_is_reported() {
        let f = |t: &mut Tape, p: &[Var]| t.ln(p[0]);
        assert!(matches!(grad_check(f, &[0.0], 1e-5), Err(Error::NonFinite(_))));
    }
}
