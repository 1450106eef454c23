//! Deep ensemble with additive frozen prior networks.
//!
//! Particle `z` predicts `f_base[z](x) + prior_scale * f_prior[z](x)`. The
//! prior networks are Glorot-initialized once and never trained; their
//! checksum is taken at construction and re-verifiable at any time.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{DenseNet, Gradients};

#[derive(Debug, Clone)]
pub struct EnsembleParams {
    base: Vec<DenseNet>,
    priors: Vec<DenseNet>,
    prior_scale: f64,
    prior_checksum: u64,
}

fn combined_checksum(nets: &[DenseNet]) -> u64 {
    let mut h = DefaultHasher::new();
    for net in nets {
        net.checksum().hash(&mut h);
    }
    h.finish()
}

impl EnsembleParams {
    /// Glorot-initializes `particles` base networks and as many frozen prior
    /// networks, all sharing `layer_sizes`.
    pub fn init<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        particles: usize,
        prior_scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if particles == 0 {
            return Err(Error::config("ensemble needs at least one particle"));
        }
        super::validate_prior_scale(prior_scale)?;
        let base: Vec<DenseNet> = (0..particles)
            .map(|_| DenseNet::glorot(layer_sizes, rng))
            .collect::<Result<_>>()?;
        let priors: Vec<DenseNet> = (0..particles)
            .map(|_| DenseNet::glorot(layer_sizes, rng))
            .collect::<Result<_>>()?;
        Self::from_parts(base, priors, prior_scale)
    }

    /// Builds an ensemble from explicit particle networks. Base and prior
    /// networks must agree pairwise on input and output dimensions.
    pub fn from_parts(base: Vec<DenseNet>, priors: Vec<DenseNet>, prior_scale: f64) -> Result<Self> {
        if base.is_empty() || base.len() != priors.len() {
            return Err(Error::config(format!(
                "ensemble needs matching particle counts, got {} base / {} prior",
                base.len(),
                priors.len()
            )));
        }
        super::validate_prior_scale(prior_scale)?;
        for (b, p) in base.iter().zip(&priors) {
            if b.input_dim() != p.input_dim() || b.output_dim() != p.output_dim() {
                return Err(Error::shape(
                    "base and prior networks must share input/output dimensions",
                ));
            }
            if b.output_dim() != 1 {
                return Err(Error::config("ensemble particles must have scalar outputs"));
            }
        }
        let prior_checksum = combined_checksum(&priors);
        Ok(EnsembleParams { base, priors, prior_scale, prior_checksum })
    }

    pub fn particles(&self) -> usize {
        self.base.len()
    }

    pub fn prior_scale(&self) -> f64 {
        self.prior_scale
    }

    pub fn input_dim(&self) -> usize {
        self.base[0].input_dim()
    }

    pub fn base(&self, particle: usize) -> &DenseNet {
        &self.base[particle]
    }

    pub fn base_mut(&mut self, particle: usize) -> &mut DenseNet {
        &mut self.base[particle]
    }

    pub fn prior(&self, particle: usize) -> &DenseNet {
        &self.priors[particle]
    }

    fn check_particle(&self, particle: usize) -> Result<()> {
        if particle >= self.base.len() {
            return Err(Error::usage(format!(
                "particle {particle} out of range for ensemble of {}",
                self.base.len()
            )));
        }
        Ok(())
    }

    /// `f_base[z](x) + prior_scale * f_prior[z](x)`.
    pub fn value(&self, x: &[f64], particle: usize) -> Result<f64> {
        self.check_particle(particle)?;
        Ok(self.base[particle].value(x)? + self.prior_scale * self.priors[particle].value(x)?)
    }

    /// Gradient of `upstream * value(x, particle)` with respect to the
    /// sampled particle's base network. All other particles and every prior
    /// receive none.
    pub fn particle_grad(&self, x: &[f64], particle: usize, upstream: f64) -> Result<Gradients> {
        self.check_particle(particle)?;
        let cache = self.base[particle].forward(x)?;
        let (grads, _) = self.base[particle].backward(&cache, &[upstream])?;
        Ok(grads)
    }

    pub fn prior_checksum_now(&self) -> u64 {
        combined_checksum(&self.priors)
    }

    pub fn priors_frozen(&self) -> bool {
        self.prior_checksum_now() == self.prior_checksum
    }

    pub fn trainable_checksum(&self) -> u64 {
        combined_checksum(&self.base)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::component_rng;

    fn xavier_input(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_prior_scale_reduces_to_base() {
        let mut rng = component_rng(4, "ens", 0);
        let ens = EnsembleParams::init(&[3, 5, 1], 4, 0.0, &mut rng).unwrap();
        let x = xavier_input(&mut rng, 3);
        for z in 0..4 {
            assert_eq!(ens.value(&x, z).unwrap(), ens.base(z).value(&x).unwrap());
        }
    }

    #[test]
    fn zero_base_leaves_scaled_prior() {
        let mut rng = component_rng(4, "ens", 1);
        let sizes = [3, 5, 1];
        let priors: Vec<DenseNet> =
            (0..4).map(|_| DenseNet::glorot(&sizes, &mut rng).unwrap()).collect();
        let base: Vec<DenseNet> = (0..4).map(|_| DenseNet::zeros(&sizes).unwrap()).collect();
        let ens = EnsembleParams::from_parts(base, priors.clone(), 0.3).unwrap();
        let x = xavier_input(&mut rng, 3);
        for z in 0..4 {
            let expect = 0.3 * priors[z].value(&x).unwrap();
            assert!((ens.value(&x, z).unwrap() - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn identical_particles_are_index_independent() {
        let mut rng = component_rng(4, "ens", 2);
        let b = DenseNet::glorot(&[3, 5, 1], &mut rng).unwrap();
        let p = DenseNet::glorot(&[3, 5, 1], &mut rng).unwrap();
        let ens =
            EnsembleParams::from_parts(vec![b.clone(); 5], vec![p.clone(); 5], 0.3).unwrap();
        let x = xavier_input(&mut rng, 3);
        let v0 = ens.value(&x, 0).unwrap();
        for z in 1..5 {
            assert_eq!(ens.value(&x, z).unwrap(), v0);
        }
    }

    #[test]
    fn particle_grad_touches_only_the_sampled_particle() {
        let mut rng = component_rng(4, "ens", 3);
        let mut ens = EnsembleParams::init(&[3, 5, 1], 4, 0.3, &mut rng).unwrap();
        let x = xavier_input(&mut rng, 3);
        let grads = ens.particle_grad(&x, 2, 1.0).unwrap();
        let before: Vec<u64> = (0..4).map(|z| ens.base(z).checksum()).collect();
        let mut opt = crate::nn::Optimizer::sgd(0.1).unwrap();
        opt.step(ens.base_mut(2), &grads).unwrap();
        for z in 0..4 {
            if z == 2 {
                assert_ne!(ens.base(z).checksum(), before[z]);
            } else {
                assert_eq!(ens.base(z).checksum(), before[z]);
            }
        }
        assert!(ens.priors_frozen());
    }

    #[test]
    fn out_of_range_particle_is_usage_error() {
        let mut rng = component_rng(4, "ens", 4);
        let ens = EnsembleParams::init(&[2, 1], 3, 0.3, &mut rng).unwrap();
        assert!(matches!(ens.value(&[0.0, 0.0], 3), Err(Error::Usage(_))));
    }

    #[test]
    fn supervised_loss_gradient_matches_finite_differences() {
        // Squared loss on a single particle per the ensemble training rule:
        // L = (y - (f_b(x) + a f_p(x)))^2, gradients on the base net only.
        use crate::nn::testutil::{finite_diff_grads, max_rel_err, min_relu_preactivation_abs};
        let mut rng = component_rng(4, "ens", 5);
        for trial in 0..100 {
            let ens = EnsembleParams::init(&[3, 6, 1], 3, 0.3, &mut rng).unwrap();
            let z = trial % 3;
            let x: Vec<f64> = loop {
                let cand = xavier_input(&mut rng, 3);
                if min_relu_preactivation_abs(ens.base(z), &cand) > 1e-3 {
                    break cand;
                }
            };
            let y = rng.random_range(-1.0..1.0);
            let y_hat = ens.value(&x, z).unwrap();
            let analytic = ens.particle_grad(&x, z, 2.0 * (y_hat - y)).unwrap();
            let prior_term = 0.3 * ens.prior(z).value(&x).unwrap();
            let fd = finite_diff_grads(ens.base(z), 1e-5, |b| {
                let pred = b.value(&x).unwrap() + prior_term;
                (y - pred) * (y - pred)
            });
            let err = max_rel_err(&analytic, &fd);
            assert!(err <= 1e-4, "trial {trial}: rel err {err}");
        }
    }
}
