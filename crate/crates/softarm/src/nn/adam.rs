use super::real::Real;
use super::tensor::Tensor;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam optimizer over an ordered list of parameter tensors.
///
/// Moment buffers are allocated on the first step and stay aligned with the
/// parameter order; the update is elementwise, so traversal order cannot
/// change the result.
#[derive(Clone, Debug)]
pub struct Adam<R: Real> {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<R>>,
    v: Vec<Vec<R>>,
}

impl<R: Real> Adam<R> {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Apply one bias-corrected update: `p -= lr · m̂ / (√v̂ + ε)`.
    pub fn step(&mut self, params: &mut [&mut Tensor<R>], grads: &[Tensor<R>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Shape(format!(
                "adam: {} parameter tensors but {} gradient tensors",
                params.len(),
                grads.len()
            )));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![R::zero(); p.len()]).collect();
            self.v = params.iter().map(|p| vec![R::zero(); p.len()]).collect();
        }
        self.step += 1;
        let b1 = R::from_f64(self.config.beta1);
        let b2 = R::from_f64(self.config.beta2);
        let one = R::one();
        let lr = R::from_f64(self.config.lr);
        let eps = R::from_f64(self.config.eps);
        let bc1 = R::from_f64(1.0 - self.config.beta1.powi(self.step as i32));
        let bc2 = R::from_f64(1.0 - self.config.beta2.powi(self.step as i32));

        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            if param.len() != grad.len() || param.len() != m.len() {
                return Err(Error::Shape(format!(
                    "adam: parameter/gradient/moment sizes disagree ({}, {}, {})",
                    param.len(),
                    grad.len(),
                    m.len()
                )));
            }
            let pdata = param.data_mut();
            let gdata = grad.data();
            for k in 0..pdata.len() {
                let g = gdata[k];
                m[k] = b1 * m[k] + (one - b1) * g;
                v[k] = b2 * v[k] + (one - b2) * g * g;
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                pdata[k] = pdata[k] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
