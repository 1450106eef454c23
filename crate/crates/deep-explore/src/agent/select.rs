//! Action selection: greedy value maximization plus the myopic exploration
//! strategies layered on top of it. Ties always break toward the lowest
//! action id so selection is deterministic given scores.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::enn::{Enn, EpistemicIndex};
use crate::env::features::action_features;
use crate::env::seqrec::Action;
use crate::error::{Error, Result};
use crate::nn::DenseNet;

use super::bandit::{last_layer_features, LastLayerStats};

/// Value-network input: `[psi; phi(action); xi]`.
pub fn q_input(psi: &[f64], action: Action, xi: &[f64]) -> Vec<f64> {
    let phi = action_features(action);
    let mut x = Vec::with_capacity(psi.len() + phi.len() + xi.len());
    x.extend_from_slice(psi);
    x.extend_from_slice(&phi);
    x.extend_from_slice(xi);
    x
}

/// Same assembly from already-extracted action features.
pub fn input_from_parts(psi: &[f64], phi: &[f64], xi: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(psi.len() + phi.len() + xi.len());
    x.extend_from_slice(psi);
    x.extend_from_slice(phi);
    x.extend_from_slice(xi);
    x
}

/// Argmax over scored actions, lowest action id on ties.
pub fn greedy_argmax(scores: &[(Action, f64)]) -> Result<Action> {
    if scores.is_empty() {
        return Err(Error::contract("cannot select from an empty action set"));
    }
    let mut ordered: Vec<&(Action, f64)> = scores.iter().collect();
    ordered.sort_by_key(|(a, _)| a.id());
    let mut best = ordered[0];
    for cand in &ordered[1..] {
        if cand.1 > best.1 {
            best = cand;
        }
    }
    Ok(best.0)
}

/// Q-values of every allowed action under a plain value network.
pub fn q_scores(
    net: &DenseNet,
    psi: &[f64],
    xi: &[f64],
    allowed: &[Action],
) -> Result<Vec<(Action, f64)>> {
    allowed
        .iter()
        .map(|&a| Ok((a, net.value(&q_input(psi, a, xi))?)))
        .collect()
}

/// Values of every allowed action under a sampled value function `h(., z)`.
pub fn enn_scores(
    enn: &Enn,
    z: &EpistemicIndex,
    psi: &[f64],
    xi: &[f64],
    allowed: &[Action],
) -> Result<Vec<(Action, f64)>> {
    allowed
        .iter()
        .map(|&a| Ok((a, enn.value(&q_input(psi, a, xi), z)?)))
        .collect()
}

/// Greedy selection under a plain Q network.
pub fn dqn_select(net: &DenseNet, psi: &[f64], xi: &[f64], allowed: &[Action]) -> Result<Action> {
    greedy_argmax(&q_scores(net, psi, xi, allowed)?)
}

/// With probability `epsilon` a uniform action, otherwise greedy.
pub fn epsilon_greedy_select<R: Rng + ?Sized>(
    net: &DenseNet,
    psi: &[f64],
    xi: &[f64],
    allowed: &[Action],
    epsilon: f64,
    rng: &mut R,
) -> Result<Action> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::config(format!("epsilon must lie in [0, 1], got {epsilon}")));
    }
    if allowed.is_empty() {
        return Err(Error::contract("cannot select from an empty action set"));
    }
    if rng.random::<f64>() < epsilon {
        Ok(allowed[rng.random_range(0..allowed.len())])
    } else {
        dqn_select(net, psi, xi, allowed)
    }
}

/// Greedy action under the value function committed to for this life-cycle.
pub fn rvf_select(
    enn: &Enn,
    z: &EpistemicIndex,
    psi: &[f64],
    xi: &[f64],
    allowed: &[Action],
) -> Result<Action> {
    greedy_argmax(&enn_scores(enn, z, psi, xi, allowed)?)
}

/// Thompson scores: one draw per arm from
/// `Normal(Q(x_a), nu^2 * phi' A^-1 phi)`, in allowed order.
pub fn ts_scores<R: Rng + ?Sized>(
    net: &DenseNet,
    stats: &LastLayerStats,
    psi: &[f64],
    xi: &[f64],
    allowed: &[Action],
    nu: f64,
    rng: &mut R,
) -> Result<Vec<(Action, f64)>> {
    allowed
        .iter()
        .map(|&a| {
            let x = q_input(psi, a, xi);
            let mean = net.value(&x)?;
            let var = stats.variance(&last_layer_features(net, &x)?)?;
            let noise: f64 = rng.sample(StandardNormal);
            Ok((a, mean + nu * var.sqrt() * noise))
        })
        .collect()
}

pub fn neural_ts_select<R: Rng + ?Sized>(
    net: &DenseNet,
    stats: &LastLayerStats,
    psi: &[f64],
    xi: &[f64],
    allowed: &[Action],
    nu: f64,
    rng: &mut R,
) -> Result<Action> {
    greedy_argmax(&ts_scores(net, stats, psi, xi, allowed, nu, rng)?)
}

/// Optimism scores `Q(x_a) + scale * sqrt(phi' A^-1 phi)`.
pub fn ucb_scores(
    net: &DenseNet,
    stats: &LastLayerStats,
    psi: &[f64],
    xi: &[f64],
    allowed: &[Action],
    scale: f64,
) -> Result<Vec<(Action, f64)>> {
    allowed
        .iter()
        .map(|&a| {
            let x = q_input(psi, a, xi);
            let mean = net.value(&x)?;
            let var = stats.variance(&last_layer_features(net, &x)?)?;
            Ok((a, mean + scale * var.sqrt()))
        })
        .collect()
}

pub fn neural_ucb_select(
    net: &DenseNet,
    stats: &LastLayerStats,
    psi: &[f64],
    xi: &[f64],
    allowed: &[Action],
    scale: f64,
) -> Result<Action> {
    greedy_argmax(&ucb_scores(net, stats, psi, xi, allowed, scale)?)
}

/// Like the optimism scores, but the mean is the ridge head fit on observed
/// rewards over last-layer features instead of the network's own output.
pub fn linucb_scores(
    net: &DenseNet,
    stats: &LastLayerStats,
    psi: &[f64],
    xi: &[f64],
    allowed: &[Action],
    scale: f64,
) -> Result<Vec<(Action, f64)>> {
    allowed
        .iter()
        .map(|&a| {
            let x = q_input(psi, a, xi);
            let feat = last_layer_features(net, &x)?;
            let mean = stats.ridge_mean(&feat)?;
            let var = stats.variance(&feat)?;
            Ok((a, mean + scale * var.sqrt()))
        })
        .collect()
}

pub fn neural_linucb_select(
    net: &DenseNet,
    stats: &LastLayerStats,
    psi: &[f64],
    xi: &[f64],
    allowed: &[Action],
    scale: f64,
) -> Result<Action> {
    greedy_argmax(&linucb_scores(net, stats, psi, xi, allowed, scale)?)
}
