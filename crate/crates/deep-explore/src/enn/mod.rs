//! Epistemic neural networks: value functions `h(x, z)` whose variation over
//! the epistemic index `z` represents a posterior over functions.
//!
//! Two realizations are provided: a deep ensemble with frozen additive prior
//! networks ([`EnsembleParams`]) and an EpiNet add-on head ([`EpinetParams`]).
//! Both sit behind the [`Enn`] enum so agents can treat them uniformly.

mod checkpoint;
mod ensemble;
mod epinet;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, SavedModel};
pub use ensemble::EnsembleParams;
pub use epinet::{EpinetGrads, EpinetParams, EpinetTrunkEval};

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::nn::Gradients;

/// The per-life-cycle sample driving deep exploration: a particle id for
/// ensembles, a Gaussian vector for EpiNets.
#[derive(Debug, Clone, PartialEq)]
pub enum EpistemicIndex {
    Particle(usize),
    Vector(Vec<f64>),
}

impl EpistemicIndex {
    /// Short printable digest for decision logs.
    pub fn digest(&self) -> String {
        match self {
            EpistemicIndex::Particle(p) => format!("p{p}"),
            EpistemicIndex::Vector(v) => {
                let mut h = DefaultHasher::new();
                for x in v {
                    x.to_bits().hash(&mut h);
                }
                format!("z{:016x}", h.finish())
            }
        }
    }
}

/// Uniform particle id in `0..particles`.
pub fn uniform_particle<R: Rng + ?Sized>(particles: usize, rng: &mut R) -> Result<EpistemicIndex> {
    if particles == 0 {
        return Err(Error::config("ensemble needs at least one particle"));
    }
    Ok(EpistemicIndex::Particle(rng.random_range(0..particles)))
}

/// Standard-normal index vector of length `d_z`.
pub fn gaussian_index<R: Rng + ?Sized>(d_z: usize, rng: &mut R) -> Result<EpistemicIndex> {
    if d_z == 0 {
        return Err(Error::config("epistemic index dimension must be positive"));
    }
    Ok(EpistemicIndex::Vector(
        (0..d_z).map(|_| rng.sample(StandardNormal)).collect(),
    ))
}

/// Gradients over the trainable parameters of an [`Enn`]. Frozen priors have
/// no entry anywhere; for an ensemble only the sampled particle participates.
#[derive(Debug, Clone)]
pub enum EnnGrads {
    Ensemble { particle: usize, grads: Gradients },
    Epinet(EpinetGrads),
}

/// A value function with an epistemic index input.
#[derive(Debug, Clone)]
pub enum Enn {
    Ensemble(EnsembleParams),
    Epinet(EpinetParams),
}

impl Enn {
    pub fn input_dim(&self) -> usize {
        match self {
            Enn::Ensemble(e) => e.input_dim(),
            Enn::Epinet(e) => e.input_dim(),
        }
    }

    /// `h(x, z)`. The index kind must match the parameter kind.
    pub fn value(&self, x: &[f64], z: &EpistemicIndex) -> Result<f64> {
        match (self, z) {
            (Enn::Ensemble(e), EpistemicIndex::Particle(p)) => e.value(x, *p),
            (Enn::Epinet(e), EpistemicIndex::Vector(v)) => e.value(x, v),
            (Enn::Ensemble(_), EpistemicIndex::Vector(_)) => {
                Err(Error::usage("ensemble expects a particle index, got a vector"))
            }
            (Enn::Epinet(_), EpistemicIndex::Particle(_)) => {
                Err(Error::usage("epinet expects a vector index, got a particle"))
            }
        }
    }

    /// Gradient of `upstream * h(x, z)` over trainable parameters only.
    pub fn grad(&self, x: &[f64], z: &EpistemicIndex, upstream: f64) -> Result<EnnGrads> {
        match (self, z) {
            (Enn::Ensemble(e), EpistemicIndex::Particle(p)) => Ok(EnnGrads::Ensemble {
                particle: *p,
                grads: e.particle_grad(x, *p, upstream)?,
            }),
            (Enn::Epinet(e), EpistemicIndex::Vector(v)) => {
                Ok(EnnGrads::Epinet(e.grad(x, v, upstream)?))
            }
            _ => Err(Error::usage("epistemic index kind does not match parameters")),
        }
    }

    /// Draws `z` from the index prior: uniform particles for ensembles, a
    /// standard Gaussian vector for EpiNets.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> EpistemicIndex {
        match self {
            Enn::Ensemble(e) => uniform_particle(e.particles(), rng).expect("validated at init"),
            Enn::Epinet(e) => gaussian_index(e.d_z(), rng).expect("validated at init"),
        }
    }

    /// The index set used for one optimization step: every particle for an
    /// ensemble, `z_count` fresh Gaussian draws for an EpiNet.
    pub fn training_indices<R: Rng + ?Sized>(
        &self,
        z_count: usize,
        rng: &mut R,
    ) -> Vec<EpistemicIndex> {
        match self {
            Enn::Ensemble(e) => (0..e.particles()).map(EpistemicIndex::Particle).collect(),
            Enn::Epinet(e) => (0..z_count)
                .map(|_| gaussian_index(e.d_z(), rng).expect("validated at init"))
                .collect(),
        }
    }

    /// Number of replay buffers this value function trains from.
    pub fn buffer_count(&self) -> usize {
        match self {
            Enn::Ensemble(e) => e.particles(),
            Enn::Epinet(_) => 1,
        }
    }

    pub fn prior_checksum_now(&self) -> u64 {
        match self {
            Enn::Ensemble(e) => e.prior_checksum_now(),
            Enn::Epinet(e) => e.prior_checksum_now(),
        }
    }

    /// True while every frozen prior parameter still matches its
    /// initialization-time checksum.
    pub fn priors_frozen(&self) -> bool {
        match self {
            Enn::Ensemble(e) => e.priors_frozen(),
            Enn::Epinet(e) => e.priors_frozen(),
        }
    }

    pub fn trainable_checksum(&self) -> u64 {
        match self {
            Enn::Ensemble(e) => e.trainable_checksum(),
            Enn::Epinet(e) => e.trainable_checksum(),
        }
    }
}

pub(crate) fn validate_prior_scale(prior_scale: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&prior_scale) {
        return Err(Error::config(format!(
            "prior scale must lie in [0, 1], got {prior_scale}"
        )));
    }
    Ok(())
}
