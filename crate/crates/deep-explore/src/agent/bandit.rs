//! Last-layer statistics for the myopic neural bandit baselines.
//!
//! Following the tractable variant, only the value network's last-layer
//! feature vector enters the covariance: `A = lambda I + sum phi phi'` with
//! its inverse maintained incrementally by the Sherman-Morrison identity, and
//! a response vector for the ridge-regression head.

use crate::error::{Error, Result};
use crate::nn::DenseNet;

#[derive(Debug, Clone)]
pub struct LastLayerStats {
    dim: usize,
    a: Vec<f64>,
    a_inv: Vec<f64>,
    response: Vec<f64>,
    updates: u64,
}

impl LastLayerStats {
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("feature dimension must be positive"));
        }
        if !(lambda > 0.0) {
            return Err(Error::config(format!("ridge lambda must be positive, got {lambda}")));
        }
        let mut a = vec![0.0; dim * dim];
        let mut a_inv = vec![0.0; dim * dim];
        for i in 0..dim {
            a[i * dim + i] = lambda;
            a_inv[i * dim + i] = 1.0 / lambda;
        }
        Ok(LastLayerStats { dim, a, a_inv, response: vec![0.0; dim], updates: 0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    fn check_dim(&self, feat: &[f64]) -> Result<()> {
        if feat.len() != self.dim {
            return Err(Error::shape(format!(
                "feature length {} != stats dim {}",
                feat.len(),
                self.dim
            )));
        }
        Ok(())
    }

    fn inv_times(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for i in 0..self.dim {
            let row = i * self.dim;
            let mut s = 0.0;
            for j in 0..self.dim {
                s += self.a_inv[row + j] * v[j];
            }
            out[i] = s;
        }
        out
    }

    /// Rank-1 update `A += phi phi'`, `response += reward * phi`, keeping the
    /// inverse in lock-step via Sherman-Morrison.
    pub fn update(&mut self, feat: &[f64], reward: f64) -> Result<()> {
        self.check_dim(feat)?;
        let inv_phi = self.inv_times(feat);
        let denom = 1.0 + feat.iter().zip(&inv_phi).map(|(f, v)| f * v).sum::<f64>();
        if !denom.is_finite() || denom <= 0.0 {
            return Err(Error::numeric(format!("sherman-morrison denominator {denom}")));
        }
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.a[i * self.dim + j] += feat[i] * feat[j];
                self.a_inv[i * self.dim + j] -= inv_phi[i] * inv_phi[j] / denom;
            }
            self.response[i] += reward * feat[i];
        }
        self.updates += 1;
        Ok(())
    }

    /// Quadratic form `phi' A^-1 phi`: the squared width of the confidence
    /// ellipsoid along `phi`.
    pub fn variance(&self, feat: &[f64]) -> Result<f64> {
        self.check_dim(feat)?;
        let inv_phi = self.inv_times(feat);
        Ok(feat.iter().zip(&inv_phi).map(|(f, v)| f * v).sum::<f64>().max(0.0))
    }

    /// Ridge-regression weights `A^-1 response`.
    pub fn ridge_weights(&self) -> Vec<f64> {
        self.inv_times(&self.response)
    }

    /// Posterior-mean estimate `phi' A^-1 response`.
    pub fn ridge_mean(&self, feat: &[f64]) -> Result<f64> {
        self.check_dim(feat)?;
        Ok(self.ridge_weights().iter().zip(feat).map(|(w, f)| w * f).sum())
    }

    /// Max-norm of `A * A^-1 - I`; the maintained inverse must stay tight.
    pub fn inverse_drift(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let mut s = 0.0;
                for k in 0..self.dim {
                    s += self.a[i * self.dim + k] * self.a_inv[k * self.dim + j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }
}

/// Last-layer feature vector of the value network at input `x`: the final
/// hidden representation with a bias slot, i.e. the gradient of the scalar
/// output with respect to the output layer's parameters.
pub fn last_layer_features(net: &DenseNet, x: &[f64]) -> Result<Vec<f64>> {
    let cache = net.forward(x)?;
    let mut feat = cache.last_hidden().to_vec();
    feat.push(1.0);
    Ok(feat)
}
