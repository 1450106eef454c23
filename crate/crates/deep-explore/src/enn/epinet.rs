//! EpiNet: an add-on head over a base network's last-layer representation.
//!
//! For input `x` and index `z`, the prediction is
//!
//! ```text
//! h(x, z) = f(x) + (g_head([stop(sigma(x)); z]) + prior_scale * g_prior([stop(sigma(x)); z]))' z
//! ```
//!
//! where `sigma(x)` is the trunk's last hidden representation and `stop`
//! marks a stop-gradient: the heads never push gradient back into the trunk
//! through their input. The trunk still trains through its own `f(x)` term,
//! and the prior head is frozen after construction.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{DenseNet, ForwardCache, Gradients};

#[derive(Debug, Clone)]
pub struct EpinetParams {
    trunk: DenseNet,
    head: DenseNet,
    prior_head: DenseNet,
    prior_scale: f64,
    d_z: usize,
    prior_checksum: u64,
}

/// Trunk forward pass shared across many index evaluations of one input.
#[derive(Debug, Clone)]
pub struct EpinetTrunkEval {
    cache: ForwardCache,
}

impl EpinetTrunkEval {
    pub fn output(&self) -> f64 {
        self.cache.scalar_output()
    }

    pub fn sigma(&self) -> &[f64] {
        self.cache.last_hidden()
    }
}

/// Gradients for the trainable EpiNet parameters: trunk and learnable head.
#[derive(Debug, Clone)]
pub struct EpinetGrads {
    pub trunk: Gradients,
    pub head: Gradients,
}

impl EpinetGrads {
    pub fn zeros_like(params: &EpinetParams) -> Self {
        EpinetGrads {
            trunk: Gradients::zeros_like(&params.trunk),
            head: Gradients::zeros_like(&params.head),
        }
    }

    pub fn add_assign(&mut self, other: &EpinetGrads) {
        self.trunk.add_assign(&other.trunk);
        self.head.add_assign(&other.head);
    }

    pub fn is_finite(&self) -> bool {
        self.trunk.is_finite() && self.head.is_finite()
    }
}

impl EpinetParams {
    /// Builds a trunk over `trunk_sizes` (needs at least one hidden layer so
    /// a last-layer representation exists) plus learnable and frozen heads of
    /// shape `[d_sigma + d_z, head_hidden..., d_z]`.
    pub fn init<R: Rng + ?Sized>(
        trunk_sizes: &[usize],
        d_z: usize,
        head_hidden: &[usize],
        prior_scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if trunk_sizes.len() < 3 {
            return Err(Error::config(
                "epinet trunk needs at least one hidden layer for its representation",
            ));
        }
        if d_z == 0 {
            return Err(Error::config("epistemic index dimension must be positive"));
        }
        let trunk = DenseNet::glorot(trunk_sizes, rng)?;
        let d_sigma = trunk.last_hidden_dim();
        let mut head_sizes = vec![d_sigma + d_z];
        head_sizes.extend_from_slice(head_hidden);
        head_sizes.push(d_z);
        let head = DenseNet::glorot(&head_sizes, rng)?;
        let prior_head = DenseNet::glorot(&head_sizes, rng)?;
        Self::from_parts(trunk, head, prior_head, prior_scale, d_z)
    }

    /// Assembles an EpiNet from explicit networks; shapes must be coherent.
    pub fn from_parts(
        trunk: DenseNet,
        head: DenseNet,
        prior_head: DenseNet,
        prior_scale: f64,
        d_z: usize,
    ) -> Result<Self> {
        super::validate_prior_scale(prior_scale)?;
        if trunk.output_dim() != 1 {
            return Err(Error::config("epinet trunk must have a scalar output"));
        }
        if trunk.layers().len() < 2 {
            return Err(Error::config(
                "epinet trunk needs at least one hidden layer for its representation",
            ));
        }
        let d_sigma = trunk.last_hidden_dim();
        for (name, net) in [("head", &head), ("prior head", &prior_head)] {
            if net.input_dim() != d_sigma + d_z {
                return Err(Error::shape(format!(
                    "{name} input dim {} != d_sigma + d_z = {}",
                    net.input_dim(),
                    d_sigma + d_z
                )));
            }
            if net.output_dim() != d_z {
                return Err(Error::shape(format!(
                    "{name} output dim {} != d_z = {d_z}",
                    net.output_dim()
                )));
            }
        }
        let prior_checksum = prior_head.checksum();
        Ok(EpinetParams { trunk, head, prior_head, prior_scale, d_z, prior_checksum })
    }

    pub fn d_z(&self) -> usize {
        self.d_z
    }

    pub fn prior_scale(&self) -> f64 {
        self.prior_scale
    }

    pub fn input_dim(&self) -> usize {
        self.trunk.input_dim()
    }

    pub fn sigma_dim(&self) -> usize {
        self.trunk.last_hidden_dim()
    }

    pub fn trunk(&self) -> &DenseNet {
        &self.trunk
    }

    pub fn trunk_mut(&mut self) -> &mut DenseNet {
        &mut self.trunk
    }

    pub fn head(&self) -> &DenseNet {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut DenseNet {
        &mut self.head
    }

    pub fn prior_head(&self) -> &DenseNet {
        &self.prior_head
    }

    fn check_index(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.d_z {
            return Err(Error::shape(format!(
                "index length {} != d_z = {}",
                z.len(),
                self.d_z
            )));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("epistemic index must be finite"));
        }
        Ok(())
    }

    /// Runs the trunk once; reuse the result across many `z` evaluations.
    pub fn trunk_eval(&self, x: &[f64]) -> Result<EpinetTrunkEval> {
        Ok(EpinetTrunkEval { cache: self.trunk.forward(x)? })
    }

    fn head_input(&self, sigma: &[f64], z: &[f64]) -> Vec<f64> {
        let mut c = Vec::with_capacity(sigma.len() + z.len());
        c.extend_from_slice(sigma);
        c.extend_from_slice(z);
        c
    }

    /// `h(x, z)` given a precomputed trunk evaluation.
    pub fn value_at(&self, trunk: &EpinetTrunkEval, z: &[f64]) -> Result<f64> {
        self.check_index(z)?;
        self.value_with_representation_inner(trunk.output(), trunk.sigma(), z)
    }

    /// `h(x, z)` from scratch.
    pub fn value(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        let trunk = self.trunk_eval(x)?;
        self.value_at(&trunk, z)
    }

    /// Evaluates the head terms against an externally supplied representation
    /// instead of `sigma(x)`. This is the evaluation the stop-gradient
    /// semantics differentiate: holding `sigma` fixed while trunk parameters
    /// vary. Finite-difference oracles for the stopped gradient use this.
    pub fn value_with_representation(&self, x: &[f64], sigma: &[f64], z: &[f64]) -> Result<f64> {
        self.check_index(z)?;
        if sigma.len() != self.sigma_dim() {
            return Err(Error::shape("representation length mismatch"));
        }
        let f_x = self.trunk.value(x)?;
        self.value_with_representation_inner(f_x, sigma, z)
    }

    fn value_with_representation_inner(&self, f_x: f64, sigma: &[f64], z: &[f64]) -> Result<f64> {
        let (_, correction) = self.head_eval(sigma, z)?;
        Ok(f_x + correction)
    }

    /// Evaluates both heads on `[sigma; z]`, returning the learnable head's
    /// forward cache (for backprop) and the combined correction term
    /// `(g(c) + prior_scale * g_prior(c))' z`.
    pub fn head_eval(&self, sigma: &[f64], z: &[f64]) -> Result<(ForwardCache, f64)> {
        let c = self.head_input(sigma, z);
        let head_cache = self.head.forward(&c)?;
        let gp = self.prior_head.forward(&c)?;
        let mut correction = 0.0;
        for j in 0..self.d_z {
            correction +=
                (head_cache.output()[j] + self.prior_scale * gp.output()[j]) * z[j];
        }
        Ok((head_cache, correction))
    }

    /// Gradient of `upstream * h(x, z)` over trunk and learnable head, with
    /// the stop-gradient applied: no gradient reaches the trunk through the
    /// heads' `sigma` input, and the prior head receives none at all.
    pub fn grad(&self, x: &[f64], z: &[f64], upstream: f64) -> Result<EpinetGrads> {
        self.check_index(z)?;
        let trunk_cache = self.trunk.forward(x)?;
        let (trunk_grads, _) = self.trunk.backward(&trunk_cache, &[upstream])?;
        let c = self.head_input(trunk_cache.last_hidden(), z);
        let head_cache = self.head.forward(&c)?;
        let head_upstream: Vec<f64> = z.iter().map(|zj| upstream * zj).collect();
        let (head_grads, _) = self.head.backward(&head_cache, &head_upstream)?;
        Ok(EpinetGrads { trunk: trunk_grads, head: head_grads })
    }

    /// Reference gradient without the stop-gradient: the heads' input path
    /// flows back into the trunk (through both the learnable and the frozen
    /// head). Used to verify that the stopped gradient genuinely severs that
    /// path; not used for training.
    pub fn grad_unstopped(&self, x: &[f64], z: &[f64], upstream: f64) -> Result<EpinetGrads> {
        self.check_index(z)?;
        let trunk_cache = self.trunk.forward(x)?;
        let c = self.head_input(trunk_cache.last_hidden(), z);
        let head_cache = self.head.forward(&c)?;
        let prior_cache = self.prior_head.forward(&c)?;
        let head_upstream: Vec<f64> = z.iter().map(|zj| upstream * zj).collect();
        let prior_upstream: Vec<f64> =
            z.iter().map(|zj| upstream * self.prior_scale * zj).collect();
        let (head_grads, d_c_head) = self.head.backward(&head_cache, &head_upstream)?;
        let (_, d_c_prior) = self.prior_head.backward(&prior_cache, &prior_upstream)?;
        let d_sigma: Vec<f64> = (0..self.sigma_dim())
            .map(|i| d_c_head[i] + d_c_prior[i])
            .collect();
        let sigma_layer = self.trunk.layers().len() - 1;
        let (trunk_grads, _) = self.trunk.backward_injected(
            &trunk_cache,
            &[upstream],
            &[(sigma_layer, &d_sigma)],
        )?;
        Ok(EpinetGrads { trunk: trunk_grads, head: head_grads })
    }

    pub fn prior_checksum_now(&self) -> u64 {
        self.prior_head.checksum()
    }

    pub fn priors_frozen(&self) -> bool {
        self.prior_checksum_now() == self.prior_checksum
    }

    pub fn trainable_checksum(&self) -> u64 {
        use std::collections::hash_map::DefaultHasher;
        use std::hash::{Hash, Hasher};
        let mut h = DefaultHasher::new();
        self.trunk.checksum().hash(&mut h);
        self.head.checksum().hash(&mut h);
        h.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::testutil::{finite_diff_grads, max_rel_err, min_relu_preactivation_abs};
    use crate::nn::Optimizer;
    use crate::rng::component_rng;

    fn sample_input(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn sample_z(rng: &mut impl Rng, d_z: usize) -> Vec<f64> {
        (0..d_z).map(|_| rng.random_range(-1.5..1.5)).collect()
    }

    #[test]
    fn zero_index_reduces_to_trunk_exactly() {
        let mut rng = component_rng(8, "epi", 0);
        let epi = EpinetParams::init(&[4, 12, 1], 6, &[16], 0.3, &mut rng).unwrap();
        for _ in 0..50 {
            let x = sample_input(&mut rng, 4);
            let z = vec![0.0; 6];
            assert_eq!(epi.value(&x, &z).unwrap(), epi.trunk().value(&x).unwrap());
        }
    }

    #[test]
    fn index_length_mismatch_is_shape_error() {
        let mut rng = component_rng(8, "epi", 1);
        let epi = EpinetParams::init(&[4, 12, 1], 6, &[16], 0.3, &mut rng).unwrap();
        assert!(matches!(epi.value(&[0.0; 4], &[0.0; 5]), Err(Error::Shape(_))));
    }

    /// The stopped gradient must match finite differences of the frozen-
    /// representation loss; the unstopped gradient must match finite
    /// differences of the true forward; and the two must differ on trunk
    /// parameters that feed the representation.
    #[test]
    fn stop_gradient_matches_frozen_representation_oracle() {
        let mut rng = component_rng(8, "epi", 2);
        let mut saw_difference = false;
        for trial in 0..100 {
            let epi = EpinetParams::init(&[3, 6, 1], 4, &[8], 0.3, &mut rng).unwrap();
            let (x, z) = loop {
                let x = sample_input(&mut rng, 3);
                let z = sample_z(&mut rng, 4);
                let sigma = epi.trunk_eval(&x).unwrap().sigma().to_vec();
                let c: Vec<f64> = sigma.iter().chain(&z).copied().collect();
                if min_relu_preactivation_abs(epi.trunk(), &x) > 1e-3
                    && min_relu_preactivation_abs(epi.head(), &c) > 1e-3
                    && min_relu_preactivation_abs(epi.prior_head(), &c) > 1e-3
                {
                    break (x, z);
                }
            };
            let y = rng.random_range(-1.0..1.0);

            // L = (y - h(x, z))^2, upstream dL/dh = 2 (h - y).
            let h = epi.value(&x, &z).unwrap();
            let upstream = 2.0 * (h - y);
            let stopped = epi.grad(&x, &z, upstream).unwrap();
            let unstopped = epi.grad_unstopped(&x, &z, upstream).unwrap();

            // Frozen-representation oracle for the stopped trunk gradient.
            let sigma_star = epi.trunk_eval(&x).unwrap().sigma().to_vec();
            let fd_stopped = finite_diff_grads(epi.trunk(), 1e-5, |t| {
                let var = EpinetParams::from_parts(
                    t.clone(),
                    epi.head().clone(),
                    epi.prior_head().clone(),
                    0.3,
                    4,
                )
                .unwrap();
                let pred = var.value_with_representation(&x, &sigma_star, &z).unwrap();
                (y - pred) * (y - pred)
            });
            let err = max_rel_err(&stopped.trunk, &fd_stopped);
            assert!(err <= 1e-4, "trial {trial}: stopped trunk rel err {err}");

            // True-forward oracle for the unstopped trunk gradient.
            let fd_unstopped = finite_diff_grads(epi.trunk(), 1e-5, |t| {
                let var = EpinetParams::from_parts(
                    t.clone(),
                    epi.head().clone(),
                    epi.prior_head().clone(),
                    0.3,
                    4,
                )
                .unwrap();
                let pred = var.value(&x, &z).unwrap();
                (y - pred) * (y - pred)
            });
            let err = max_rel_err(&unstopped.trunk, &fd_unstopped);
            assert!(err <= 1e-4, "trial {trial}: unstopped trunk rel err {err}");

            // Head gradients agree between the variants and match finite
            // differences of the true loss.
            let err = max_rel_err(&stopped.head, &unstopped.head);
            assert!(err <= 1e-12, "trial {trial}: head grads should be identical");
            let fd_head = finite_diff_grads(epi.head(), 1e-5, |hd| {
                let var = EpinetParams::from_parts(
                    epi.trunk().clone(),
                    hd.clone(),
                    epi.prior_head().clone(),
                    0.3,
                    4,
                )
                .unwrap();
                let pred = var.value(&x, &z).unwrap();
                (y - pred) * (y - pred)
            });
            let err = max_rel_err(&stopped.head, &fd_head);
            assert!(err <= 1e-4, "trial {trial}: head rel err {err}");

            // The severed path has to show up as a real difference somewhere.
            let mut diff = stopped.trunk.clone();
            diff.scale(-1.0);
            diff.add_assign(&unstopped.trunk);
            if diff.max_abs() > 1e-6 {
                saw_difference = true;
            }
        }
        assert!(saw_difference, "stop-gradient never changed any trunk gradient");
    }

    #[test]
    fn prior_head_stays_frozen_under_training() {
        let mut rng = component_rng(8, "epi", 3);
        let mut epi = EpinetParams::init(&[3, 8, 1], 4, &[8], 0.3, &mut rng).unwrap();
        let before = epi.prior_checksum_now();
        let mut trunk_opt = Optimizer::adam(1e-3).unwrap();
        let mut head_opt = Optimizer::adam(1e-3).unwrap();
        for _ in 0..200 {
            let x = sample_input(&mut rng, 3);
            let z = sample_z(&mut rng, 4);
            let y = rng.random_range(-1.0..1.0);
            let h = epi.value(&x, &z).unwrap();
            let g = epi.grad(&x, &z, 2.0 * (h - y)).unwrap();
            trunk_opt.step(epi.trunk_mut(), &g.trunk).unwrap();
            head_opt.step(epi.head_mut(), &g.head).unwrap();
        }
        assert!(epi.priors_frozen());
        assert_eq!(epi.prior_checksum_now(), before);
        assert_ne!(epi.trainable_checksum(), 0);
    }
}
