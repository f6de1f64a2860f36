//! Adaptive-moment optimizer and the step-halving learning-rate schedule.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(n: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// One bias-corrected update. Parameters are untouched if any gradient is non-finite.
pub fn optimizer_step(params: &mut [f64], grads: &[f64], state: &mut OptimizerState, hyper: &AdamHyper) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { index });
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - hyper.beta1.powi(t);
    let c2 = 1.0 - hyper.beta2.powi(t);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = hyper.beta1 * *m + (1.0 - hyper.beta1) * g;
        *v = hyper.beta2 * *v + (1.0 - hyper.beta2) * g * g;
        let mhat = *m / c1;
        let vhat = *v / c2;
        *p -= hyper.lr * mhat / (vhat.sqrt() + hyper.eps);
    }
    Ok(())
}

/// `lr0 * 0.5^floor(epoch / period)`.
pub fn lr_schedule(epoch: usize, lr0: f64, period: usize) -> f64 {
    lr0 * 0.5f64.powi((epoch / period.max(1)) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = vec![1.0, -2.0];
        let mut s = OptimizerState::new(2);
        optimizer_step(&mut p, &[0.0, 0.0], &mut s, &AdamHyper::default()).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_unit_gradient() {
        let h = AdamHyper { lr: 1e-3, ..Default::default() };
        let mut p = vec![0.5];
        let mut s = OptimizerState::new(1);
        optimizer_step(&mut p, &[1.0], &mut s, &h).unwrap();
        let expected = 0.5 - 1e-3 * 1.0 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_reports_index() {
        let mut p = vec![0.0; 3];
        let mut s = OptimizerState::new(3);
        let e = optimizer_step(&mut p, &[0.0, 0.0, f64::NAN], &mut s, &AdamHyper::default()).unwrap_err();
        assert!(matches!(e, Error::NonFiniteGradient { index: 2 }));
        assert_eq!(s.step, 0);
    }

    #[test]
    fn deterministic_trajectory() {
        let run = || {
            let mut p = vec![0.3, -0.7, 1.1];
            let mut s = OptimizerState::new(3);
            for i in 0..20 {
                let g: Vec<f64> = p.iter().map(|x| 2.0 * x + i as f64 * 0.01).collect();
                optimizer_step(&mut p, &g, &mut s, &AdamHyper { lr: 0.05, ..Default::default() }).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn schedule_halves_every_period() {
        assert_eq!(lr_schedule(0, 1e-4, 40), 1e-4);
        assert_eq!(lr_schedule(40, 1e-4, 40), 5e-5);
        assert_eq!(lr_schedule(79, 1e-4, 40), 5e-5);
        assert_eq!(lr_schedule(80, 1e-4, 40), 2.5e-5);
    }
}
