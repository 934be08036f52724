//! Bias-corrected adaptive-moment optimizer.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::real::Real;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Per-parameter first/second moment accumulators plus the step counter.
pub struct AdamState<R: Real = f32> {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Matrix<R>>,
    v: Vec<Matrix<R>>,
}

impl<R: Real> AdamState<R> {
    pub fn new(config: AdamConfig, shapes: &[(usize, usize)]) -> Self {
        AdamState {
            config,
            step: 0,
            m: shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect(),
            v: shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect(),
        }
    }

    pub fn moments(&self) -> (&[Matrix<R>], &[Matrix<R>]) {
        (&self.m, &self.v)
    }

    pub fn restore(config: AdamConfig, step: u64, m: Vec<Matrix<R>>, v: Vec<Matrix<R>>) -> Self {
        AdamState { config, step, m, v }
    }

    /// One update over the parameter list; `grads` must follow the same
    /// declared order. Gradients are zeroed after the update.
    pub fn step(&mut self, params: &mut [&mut Matrix<R>], grads: &mut [Matrix<R>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Validation(format!(
                "adam_step got {} params / {} grads for {} slots",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        self.step += 1;
        let b1 = R::from_f64(self.config.beta1);
        let b2 = R::from_f64(self.config.beta2);
        let one = R::one();
        let bc1 = R::from_f64(1.0 - self.config.beta1.powi(self.step as i32));
        let bc2 = R::from_f64(1.0 - self.config.beta2.powi(self.step as i32));
        let lr = R::from_f64(self.config.learning_rate);
        let eps = R::from_f64(self.config.epsilon);

        for i in 0..params.len() {
            let p = &mut *params[i];
            let g = &grads[i];
            if !p.same_shape(g) {
                return Err(Error::shape(
                    "adam_step",
                    format!("param {:?} vs grad {:?} at slot {i}", p.shape(), g.shape()),
                ));
            }
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let ps = p.as_mut_slice();
            let ms = m.as_mut_slice();
            let vs = v.as_mut_slice();
            let gs = g.as_slice();
            for j in 0..ps.len() {
                let gj = gs[j];
                ms[j] = b1 * ms[j] + (one - b1) * gj;
                vs[j] = b2 * vs[j] + (one - b2) * gj * gj;
                let mhat = ms[j] / bc1;
                let vhat = vs[j] / bc2;
                ps[j] = ps[j] - lr * mhat / (vhat.sqrt() + eps);
            }
        }
        for g in grads.iter_mut() {
            g.fill(R::zero());
        }
        Ok(())
    }
}
