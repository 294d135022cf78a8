//! Adam with bias correction, stepping over a network's parameter buffers.

use serde::{Deserialize, Serialize};

use super::{Network, NnError, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 0.001, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First and second moments, one buffer per parameter blob.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig, params: &Network<T>) -> Self {
        let shapes: Vec<usize> = params.blobs().iter().map(|b| b.len()).collect();
        AdamState {
            config,
            step: 0,
            m: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    pub fn update(&mut self, params: &mut Network<T>, grads: &Network<T>) -> Result<()> {
        let grads = grads.blobs();
        self.update_blobs(params.blobs_mut(), &grads)
    }

    pub fn update_blobs(&mut self, params: Vec<&mut [T]>, grads: &[&[T]]) -> Result<()> {
        let same = params.len() == self.m.len()
            && grads.len() == self.m.len()
            && params.iter().zip(grads).zip(&self.m).all(|((p, g), m)| p.len() == m.len() && g.len() == m.len());
        if !same {
            return Err(NnError::ShapeError("parameter, gradient and moment shapes differ".into()));
        }
        self.step += 1;
        let c = self.config;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let (one_b1, one_b2) = (T::of(1.0 - c.beta1), T::of(1.0 - c.beta2));
        let t = self.step as i32;
        let corr1 = T::of(1.0 - c.beta1.powi(t));
        let corr2 = T::of(1.0 - c.beta2.powi(t));
        let (lr, eps) = (T::of(c.lr), T::of(c.epsilon));
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + one_b1 * g[i];
                v[i] = b2 * v[i] + one_b2 * g[i] * g[i];
                let m_hat = m[i] / corr1;
                let v_hat = v[i] / corr2;
                p[i] = p[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
