//! Damped Newton minimization for smooth, strictly convex objectives.
//!
//! Shared by the logistic MAP fit and the multinomial classification probe.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) trait Objective {
    fn value(&self, w: &[f64]) -> f64;
    fn gradient(&self, w: &[f64]) -> Vec<f64>;
    fn hessian(&self, w: &[f64]) -> DMatrix<f64>;
}

#[derive(Debug, Clone)]
pub(crate) struct NewtonTrace {
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Objective value at the start and after every accepted step;
    /// non-increasing up to rounding.
    pub objective: Vec<f64>,
}

const MAX_HALVINGS: usize = 60;

pub(crate) fn minimize(
    obj: &impl Objective,
    start: Vec<f64>,
    max_iterations: usize,
    gradient_tolerance: f64,
) -> Result<NewtonTrace> {
    let mut w = start;
    let mut f = obj.value(&w);
    let mut history = vec![f];
    for iteration in 0..=max_iterations {
        let g = obj.gradient(&w);
        let gnorm = inf_norm(&g);
        if gnorm <= gradient_tolerance {
            return Ok(NewtonTrace {
                weights: w,
                iterations: iteration,
                gradient_norm: gnorm,
                objective: history,
            });
        }
        if iteration == max_iterations {
            return Err(Error::FitFailure {
                iterations: iteration,
                gradient_norm: gnorm,
            });
        }
        let h = obj.hessian(&w);
        let g = DVector::from_vec(g);
        let step = match h.clone().cholesky() {
            Some(chol) => chol.solve(&g),
            None => h.lu().solve(&g).ok_or(Error::FitFailure {
                iterations: iteration,
                gradient_norm: gnorm,
            })?,
        };

        // Halve the step until the objective does not increase. Near the
        // optimum the decrease drops below the rounding error of `f`; a step
        // that stays within that error is still taken if it shrinks the
        // gradient.
        let rounding = 8.0 * f64::EPSILON * f.abs().max(1.0);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let candidate: Vec<f64> = w.iter().zip(step.iter()).map(|(wi, si)| wi - alpha * si).collect();
            let fc = obj.value(&candidate);
            if fc <= f || (fc <= f + rounding && inf_norm(&obj.gradient(&candidate)) < gnorm) {
                accepted = Some((candidate, fc));
                break;
            }
            alpha *= 0.5;
        }
        let Some((next, fnext)) = accepted else {
            return Err(Error::FitFailure {
                iterations: iteration,
                gradient_norm: gnorm,
            });
        };
        w = next;
        f = fnext;
        history.push(f);
    }
    unreachable!("loop returns on its final iteration")
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// `log(1 + e^t)` without overflow.
#[inline]
pub(crate) fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

#[inline]
pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}
