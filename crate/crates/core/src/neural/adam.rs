//! Adam with bias correction.

use super::params::Layout;
use super::NeuralError;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Number of steps taken.
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }
}

/// One in-place Adam update. A non-finite gradient aborts before anything is
/// modified; `layout` (if given) names the offending block.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    layout: Option<&Layout>,
) -> Result<(), NeuralError> {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        let block = layout
            .and_then(|l| l.blocks.iter().find(|b| b.range().contains(&i)))
            .map_or_else(|| format!("index {i}"), |b| b.name.clone());
        return Err(NeuralError::NonFiniteGradient { step: state.t + 1, block });
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for ((p, &g), (m, v)) in params.iter_mut().zip(grads).zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        let mhat = *m / c1;
        let vhat = *v / c2;
        *p -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = vec![1.0, -2.0];
        let mut s = AdamState::new(2);
        for _ in 0..5 {
            adam_step(&mut p, &[0.0, 0.0], &mut s, 0.1, None).unwrap();
        }
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let mut p = vec![0.0, 0.0, 0.0];
        let mut s = AdamState::new(3);
        let g = [0.3, -5.0, 1e-3];
        adam_step(&mut p, &g, &mut s, 0.01, None).unwrap();
        for (x, g) in p.iter().zip(g) {
            let exact = -0.01 * g / (g.abs() + ADAM_EPS);
            assert!((x - exact).abs() < 1e-15);
            assert!((x + 0.01 * g.signum()).abs() < 1e-7);
        }
    }

    #[test]
    fn constant_gradient_step_tends_to_lr() {
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        let mut prev = 0.0;
        let mut step = 0.0;
        for _ in 0..1000 {
            adam_step(&mut p, &[-0.7], &mut s, 0.002, None).unwrap();
            step = p[0] - prev;
            prev = p[0];
        }
        assert!((step - 0.002).abs() < 1e-9);
    }

    #[test]
    fn non_finite_gradient_aborts_untouched() {
        let mut p = vec![1.0, 2.0];
        let mut s = AdamState::new(2);
        let err = adam_step(&mut p, &[0.1, f64::NAN], &mut s, 0.1, None).unwrap_err();
        assert!(matches!(err, NeuralError::NonFiniteGradient { step: 1, .. }));
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(s.t, 0);
    }
}
