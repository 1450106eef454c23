//! Undiscounted temporal-difference regression.
//!
//! The loss for one update is the plain sum over the index set and the batch
//! of squared errors between the stored (possibly perturbed) reward plus the
//! bootstrapped successor value under the frozen target parameters, and the
//! online prediction. Terminal transitions bootstrap zero: when the user
//! leaves, the life-cycle's value ends.

use crate::enn::{EnsembleParams, EpinetGrads, EpinetParams};
use crate::env::seqrec::Action;
use crate::error::{Error, Result};
use crate::nn::{DenseNet, Gradients};

use super::replay::Transition;
use super::select::{input_from_parts, q_input};

fn bootstrap_plain(target: &DenseNet, t: &Transition) -> Result<f64> {
    if t.terminal {
        return Ok(0.0);
    }
    let mut best = f64::NEG_INFINITY;
    for &a in &t.next_allowed {
        best = best.max(target.value(&q_input(&t.psi, a, &t.next_xi))?);
    }
    Ok(best)
}

/// One-batch loss and gradients for a plain value network (the singleton
/// index-set case of the deep-exploration update).
pub fn plain_td(
    online: &DenseNet,
    target: &DenseNet,
    batch: &[&Transition],
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::usage("temporal-difference batch must be non-empty"));
    }
    let mut loss = 0.0;
    let mut grads = Gradients::zeros_like(online);
    for t in batch {
        let x = input_from_parts(&t.psi, &t.phi, &t.xi);
        let cache = online.forward(&x)?;
        let pred = cache.scalar_output();
        let target_val = t.perturbed_reward + bootstrap_plain(target, t)?;
        let diff = pred - target_val;
        loss += diff * diff;
        let (g, _) = online.backward(&cache, &[2.0 * diff])?;
        grads.add_assign(&g);
    }
    if !loss.is_finite() {
        return Err(Error::numeric(format!("non-finite temporal-difference loss {loss}")));
    }
    Ok((loss, grads))
}

/// Loss and base-network gradients for one ensemble particle trained on its
/// own perturbed batch. Priors contribute to values but receive no gradient.
pub fn ensemble_particle_td(
    online: &EnsembleParams,
    target: &EnsembleParams,
    particle: usize,
    batch: &[&Transition],
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::usage("temporal-difference batch must be non-empty"));
    }
    let mut loss = 0.0;
    let mut grads = Gradients::zeros_like(online.base(particle));
    for t in batch {
        let x = input_from_parts(&t.psi, &t.phi, &t.xi);
        let pred = online.value(&x, particle)?;
        let bootstrap = if t.terminal {
            0.0
        } else {
            let mut best = f64::NEG_INFINITY;
            for &a in &t.next_allowed {
                best = best.max(target.value(&q_input(&t.psi, a, &t.next_xi), particle)?);
            }
            best
        };
        let target_val = t.perturbed_reward + bootstrap;
        let diff = pred - target_val;
        loss += diff * diff;
        grads.add_assign(&online.particle_grad(&x, particle, 2.0 * diff)?);
    }
    if !loss.is_finite() {
        return Err(Error::numeric(format!("non-finite temporal-difference loss {loss}")));
    }
    Ok((loss, grads))
}

/// Loss and gradients for an EpiNet over a sampled index set. The trunk is
/// evaluated once per input and shared across indices; gradients respect the
/// stop-gradient into the heads.
pub fn epinet_td(
    online: &EpinetParams,
    target: &EpinetParams,
    batch: &[&Transition],
    indices: &[Vec<f64>],
) -> Result<(f64, EpinetGrads)> {
    if batch.is_empty() {
        return Err(Error::usage("temporal-difference batch must be non-empty"));
    }
    if indices.is_empty() {
        return Err(Error::usage("epinet update needs at least one epistemic index"));
    }
    let mut loss = 0.0;
    let mut grads = EpinetGrads::zeros_like(online);
    for t in batch {
        let x = input_from_parts(&t.psi, &t.phi, &t.xi);
        let online_cache = online.trunk().forward(&x)?;
        let f_x = online_cache.scalar_output();
        let sigma = online_cache.last_hidden().to_vec();
        // Target trunk evaluations per successor action, shared across z.
        let next: Vec<(f64, Vec<f64>)> = if t.terminal {
            Vec::new()
        } else {
            t.next_allowed
                .iter()
                .filter(|&&a| a != Action::NoOp)
                .map(|&a| {
                    let eval = target.trunk_eval(&q_input(&t.psi, a, &t.next_xi))?;
                    Ok((eval.output(), eval.sigma().to_vec()))
                })
                .collect::<Result<_>>()?
        };
        let mut trunk_upstream = 0.0;
        for z in indices {
            let (head_cache, correction) = online.head_eval(&sigma, z)?;
            let pred = f_x + correction;
            let bootstrap = if t.terminal {
                0.0
            } else {
                let mut best = f64::NEG_INFINITY;
                for (f_next, sigma_next) in &next {
                    let (_, corr) = target.head_eval(sigma_next, z)?;
                    best = best.max(f_next + corr);
                }
                best
            };
            let diff = pred - (t.perturbed_reward + bootstrap);
            loss += diff * diff;
            let upstream = 2.0 * diff;
            trunk_upstream += upstream;
            let head_upstream: Vec<f64> = z.iter().map(|zj| upstream * zj).collect();
            let (head_grads, _) = online.head().backward(&head_cache, &head_upstream)?;
            grads.head.add_assign(&head_grads);
        }
        // The trunk gradient is linear in the accumulated upstream, so one
        // backward pass per input covers every index.
        let (trunk_grads, _) = online.trunk().backward(&online_cache, &[trunk_upstream])?;
        grads.trunk.add_assign(&trunk_grads);
    }
    if !loss.is_finite() {
        return Err(Error::numeric(format!("non-finite temporal-difference loss {loss}")));
    }
    Ok((loss, grads))
}

/// Copies the online parameters into the target slot when the update counter
/// reaches a sync boundary; otherwise leaves the target untouched.
pub fn sync_target<T: Clone>(target: &mut T, online: &T, updates_done: usize, period: usize) {
    if period > 0 && updates_done % period == 0 {
        *target = online.clone();
    }
}
