//! Learning agents: deep Q-learning with myopic exploration baselines and
//! the randomized-value-function deep-exploration agent.
//!
//! All agents share one machinery: a value model (a plain network or an
//! epistemic network), a frozen target copy synced every `target_sync`
//! updates, replay buffers, and the undiscounted temporal-difference update.
//! They differ only in how actions are selected and how stored rewards are
//! perturbed.

pub mod bandit;
pub mod replay;
pub mod select;
pub mod td;

pub use bandit::{last_layer_features, LastLayerStats};
pub use replay::{ReplayBuffer, Transition};

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::enn::{Enn, EnnGrads, EnsembleParams, EpinetParams, EpistemicIndex, SavedModel};
use crate::env::seqrec::Action;
use crate::env::UserId;
use crate::error::{Error, Result};
use crate::nn::{DenseNet, Optimizer, OptimizerKind};

/// The agent family, naming its exploration strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Random,
    EpsilonGreedy,
    NeuralTs,
    NeuralUcb,
    NeuralLinucb,
    EnsembleDe,
    EpinetDe,
}

impl AgentKind {
    pub fn label(self) -> &'static str {
        match self {
            AgentKind::Random => "random",
            AgentKind::EpsilonGreedy => "epsilon_greedy",
            AgentKind::NeuralTs => "neural_ts",
            AgentKind::NeuralUcb => "neural_ucb",
            AgentKind::NeuralLinucb => "neural_linucb",
            AgentKind::EnsembleDe => "ensemble_de",
            AgentKind::EpinetDe => "epinet_de",
        }
    }

    pub fn from_label(s: &str) -> Result<Self> {
        Ok(match s {
            "random" => AgentKind::Random,
            "epsilon_greedy" => AgentKind::EpsilonGreedy,
            "neural_ts" => AgentKind::NeuralTs,
            "neural_ucb" => AgentKind::NeuralUcb,
            "neural_linucb" => AgentKind::NeuralLinucb,
            "ensemble_de" => AgentKind::EnsembleDe,
            "epinet_de" => AgentKind::EpinetDe,
            other => return Err(Error::validation(format!("unknown agent kind '{other}'"))),
        })
    }

    /// Deep-exploration agents perturb stored rewards; baselines do not.
    pub fn perturbs_rewards(self) -> bool {
        matches!(self, AgentKind::EnsembleDe | AgentKind::EpinetDe)
    }

    pub fn uses_bandit_stats(self) -> bool {
        matches!(self, AgentKind::NeuralTs | AgentKind::NeuralUcb | AgentKind::NeuralLinucb)
    }
}

/// Hyperparameters for every agent family; unused knobs are ignored by
/// families that do not read them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentConfig {
    pub kind: AgentKind,
    /// Hidden layer widths of the value network (and of ensemble particles
    /// and the EpiNet trunk).
    #[serde(default = "defaults::hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "defaults::learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "defaults::optimizer")]
    pub optimizer: OptimizerKind,
    /// Linear epsilon schedule for the epsilon-greedy baseline.
    #[serde(default = "defaults::epsilon_start")]
    pub epsilon_start: f64,
    #[serde(default = "defaults::epsilon_end")]
    pub epsilon_end: f64,
    /// Steps over which epsilon decays; 0 lets the harness pick half the run.
    #[serde(default)]
    pub epsilon_decay_steps: usize,
    /// Reward-perturbation standard deviation for deep-exploration agents.
    #[serde(default = "defaults::sigma")]
    pub sigma: f64,
    /// Target-network sync period, counted in gradient updates.
    #[serde(default = "defaults::target_sync")]
    pub target_sync: usize,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    /// Train once per this many environment steps.
    #[serde(default = "defaults::train_every")]
    pub train_every: usize,
    /// Gradient updates per training occasion.
    #[serde(default = "defaults::updates_per_train")]
    pub updates_per_train: usize,
    /// Stored transitions required before training starts.
    #[serde(default = "defaults::warmup")]
    pub warmup: usize,
    #[serde(default = "defaults::capacity")]
    pub capacity: usize,
    /// Ridge regularizer for the bandit baselines' last-layer statistics.
    #[serde(default = "defaults::ridge_lambda")]
    pub ridge_lambda: f64,
    /// Thompson posterior scale.
    #[serde(default = "defaults::ts_scale")]
    pub ts_scale: f64,
    /// Optimism bonus scale for the UCB baselines.
    #[serde(default = "defaults::ucb_scale")]
    pub ucb_scale: f64,
    /// Ensemble cardinality.
    #[serde(default = "defaults::particles")]
    pub particles: usize,
    /// Epistemic index dimension.
    #[serde(default = "defaults::d_z")]
    pub d_z: usize,
    /// Fresh index draws per EpiNet update.
    #[serde(default = "defaults::z_per_update")]
    pub z_per_update: usize,
    /// Scale of the frozen additive prior networks.
    #[serde(default = "defaults::prior_scale")]
    pub prior_scale: f64,
    /// Hidden widths of the EpiNet heads.
    #[serde(default = "defaults::head_hidden")]
    pub head_hidden: Vec<usize>,
}

mod defaults {
    use crate::nn::OptimizerKind;

    pub fn hidden() -> Vec<usize> {
        vec![20]
    }
    pub fn learning_rate() -> f64 {
        1e-3
    }
    pub fn optimizer() -> OptimizerKind {
        OptimizerKind::Adam
    }
    pub fn epsilon_start() -> f64 {
        1.0
    }
    pub fn epsilon_end() -> f64 {
        0.05
    }
    pub fn sigma() -> f64 {
        0.1
    }
    pub fn target_sync() -> usize {
        100
    }
    pub fn batch_size() -> usize {
        64
    }
    pub fn train_every() -> usize {
        1
    }
    pub fn updates_per_train() -> usize {
        1
    }
    pub fn warmup() -> usize {
        200
    }
    pub fn capacity() -> usize {
        100_000
    }
    pub fn ridge_lambda() -> f64 {
        1.0
    }
    pub fn ts_scale() -> f64 {
        1.0
    }
    pub fn ucb_scale() -> f64 {
        1.0
    }
    pub fn particles() -> usize {
        10
    }
    pub fn d_z() -> usize {
        10
    }
    pub fn z_per_update() -> usize {
        50
    }
    pub fn prior_scale() -> f64 {
        0.3
    }
    pub fn head_hidden() -> Vec<usize> {
        vec![16]
    }
}

impl AgentConfig {
    pub fn new(kind: AgentKind) -> Self {
        AgentConfig {
            kind,
            hidden: defaults::hidden(),
            learning_rate: defaults::learning_rate(),
            optimizer: defaults::optimizer(),
            epsilon_start: defaults::epsilon_start(),
            epsilon_end: defaults::epsilon_end(),
            epsilon_decay_steps: 0,
            sigma: defaults::sigma(),
            target_sync: defaults::target_sync(),
            batch_size: defaults::batch_size(),
            train_every: defaults::train_every(),
            updates_per_train: defaults::updates_per_train(),
            warmup: defaults::warmup(),
            capacity: defaults::capacity(),
            ridge_lambda: defaults::ridge_lambda(),
            ts_scale: defaults::ts_scale(),
            ucb_scale: defaults::ucb_scale(),
            particles: defaults::particles(),
            d_z: defaults::d_z(),
            z_per_update: defaults::z_per_update(),
            prior_scale: defaults::prior_scale(),
            head_hidden: defaults::head_hidden(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma < 0.0 {
            return Err(Error::config("sigma must be non-negative"));
        }
        if self.target_sync == 0 {
            return Err(Error::config("target_sync must be >= 1"));
        }
        if self.batch_size == 0 || self.train_every == 0 || self.updates_per_train == 0 {
            return Err(Error::config("batch_size, train_every, updates_per_train must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return Err(Error::config("epsilon bounds must lie in [0, 1]"));
        }
        if self.kind == AgentKind::EnsembleDe && self.particles == 0 {
            return Err(Error::config("ensemble agent needs at least one particle"));
        }
        if self.kind == AgentKind::EpinetDe && (self.d_z == 0 || self.z_per_update == 0) {
            return Err(Error::config("epinet agent needs positive d_z and z_per_update"));
        }
        Ok(())
    }
}

/// Input feature widths the agent builds its network over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureDims {
    pub psi: usize,
    pub xi: usize,
}

impl FeatureDims {
    pub fn input_dim(&self) -> usize {
        self.psi + crate::env::features::ACTION_FEATURE_DIM + self.xi
    }
}

/// The value function backing an agent: a plain network for the baselines,
/// an epistemic network for deep exploration.
#[derive(Debug, Clone)]
pub enum ValueModel {
    Plain(DenseNet),
    Enn(Enn),
}

impl ValueModel {
    pub fn checksum(&self) -> u64 {
        match self {
            ValueModel::Plain(net) => net.checksum(),
            ValueModel::Enn(enn) => enn.trainable_checksum(),
        }
    }

    pub fn saved(&self) -> SavedModel {
        match self {
            ValueModel::Plain(net) => SavedModel::Dense(net.clone()),
            ValueModel::Enn(Enn::Ensemble(e)) => SavedModel::Ensemble(e.clone()),
            ValueModel::Enn(Enn::Epinet(e)) => SavedModel::Epinet(e.clone()),
        }
    }

    pub fn from_saved(model: SavedModel) -> ValueModel {
        match model {
            SavedModel::Dense(net) => ValueModel::Plain(net),
            SavedModel::Ensemble(e) => ValueModel::Enn(Enn::Ensemble(e)),
            SavedModel::Epinet(e) => ValueModel::Enn(Enn::Epinet(e)),
        }
    }
}

#[derive(Debug, Clone)]
enum ModelOptim {
    None,
    Plain(Optimizer),
    Ensemble(Vec<Optimizer>),
    Epinet { trunk: Optimizer, head: Optimizer },
}

/// What one selection reveals, for decision logs.
#[derive(Debug, Clone)]
pub struct Decision {
    pub action: Action,
    /// Selection scores per action, in the order they were scored; empty for
    /// forced or unscored (random) choices.
    pub scores: Vec<(Action, f64)>,
    /// Digest of the epistemic index in force, for commitment audits.
    pub index_digest: Option<String>,
}

/// One agent instance driving one run.
#[derive(Debug, Clone)]
pub struct QAgent {
    cfg: AgentConfig,
    dims: FeatureDims,
    value: ValueModel,
    target: ValueModel,
    optim: ModelOptim,
    buffers: Vec<ReplayBuffer>,
    stats: Option<LastLayerStats>,
    indices: BTreeMap<UserId, EpistemicIndex>,
    env_steps: usize,
    grad_updates: usize,
}

impl QAgent {
    pub fn build<R: Rng + ?Sized>(cfg: AgentConfig, dims: FeatureDims, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut sizes = vec![dims.input_dim()];
        sizes.extend_from_slice(&cfg.hidden);
        sizes.push(1);
        let value = match cfg.kind {
            AgentKind::Random => ValueModel::Plain(DenseNet::zeros(&sizes)?),
            AgentKind::EpsilonGreedy
            | AgentKind::NeuralTs
            | AgentKind::NeuralUcb
            | AgentKind::NeuralLinucb => ValueModel::Plain(DenseNet::glorot(&sizes, rng)?),
            AgentKind::EnsembleDe => ValueModel::Enn(Enn::Ensemble(EnsembleParams::init(
                &sizes,
                cfg.particles,
                cfg.prior_scale,
                rng,
            )?)),
            AgentKind::EpinetDe => ValueModel::Enn(Enn::Epinet(EpinetParams::init(
                &sizes,
                cfg.d_z,
                &cfg.head_hidden,
                cfg.prior_scale,
                rng,
            )?)),
        };
        let target = value.clone();
        let optim = match (&value, cfg.kind) {
            (_, AgentKind::Random) => ModelOptim::None,
            (ValueModel::Plain(_), _) => {
                ModelOptim::Plain(Optimizer::new(cfg.optimizer, cfg.learning_rate)?)
            }
            (ValueModel::Enn(Enn::Ensemble(e)), _) => ModelOptim::Ensemble(
                (0..e.particles())
                    .map(|_| Optimizer::new(cfg.optimizer, cfg.learning_rate))
                    .collect::<Result<_>>()?,
            ),
            (ValueModel::Enn(Enn::Epinet(_)), _) => ModelOptim::Epinet {
                trunk: Optimizer::new(cfg.optimizer, cfg.learning_rate)?,
                head: Optimizer::new(cfg.optimizer, cfg.learning_rate)?,
            },
        };
        let buffer_count = match (&value, cfg.kind) {
            (_, AgentKind::Random) => 0,
            (ValueModel::Enn(enn), _) => enn.buffer_count(),
            (ValueModel::Plain(_), _) => 1,
        };
        let buffers = (0..buffer_count)
            .map(|_| ReplayBuffer::new(cfg.capacity))
            .collect::<Result<_>>()?;
        let stats = if cfg.kind.uses_bandit_stats() {
            let feat_dim = match &value {
                ValueModel::Plain(net) => net.last_hidden_dim() + 1,
                ValueModel::Enn(_) => unreachable!("bandit baselines use plain networks"),
            };
            Some(LastLayerStats::new(feat_dim, cfg.ridge_lambda)?)
        } else {
            None
        };
        Ok(QAgent {
            cfg,
            dims,
            value,
            target,
            optim,
            buffers,
            stats,
            indices: BTreeMap::new(),
            env_steps: 0,
            grad_updates: 0,
        })
    }

    pub fn kind(&self) -> AgentKind {
        self.cfg.kind
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn dims(&self) -> FeatureDims {
        self.dims
    }

    pub fn value_model(&self) -> &ValueModel {
        &self.value
    }

    pub fn target_checksum(&self) -> u64 {
        self.target.checksum()
    }

    pub fn value_checksum(&self) -> u64 {
        self.value.checksum()
    }

    /// True while every frozen prior parameter is untouched (always true for
    /// prior-free agents).
    pub fn priors_frozen(&self) -> bool {
        match &self.value {
            ValueModel::Plain(_) => true,
            ValueModel::Enn(enn) => enn.priors_frozen(),
        }
    }

    pub fn buffer_lens(&self) -> Vec<usize> {
        self.buffers.iter().map(|b| b.len()).collect()
    }

    pub fn grad_updates(&self) -> usize {
        self.grad_updates
    }

    pub fn index_for(&self, user: UserId) -> Option<&EpistemicIndex> {
        self.indices.get(&user)
    }

    /// Current epsilon under the linear schedule.
    pub fn epsilon(&self) -> f64 {
        if self.cfg.kind != AgentKind::EpsilonGreedy {
            return 0.0;
        }
        let horizon = self.cfg.epsilon_decay_steps;
        if horizon == 0 {
            return self.cfg.epsilon_end;
        }
        let t = (self.env_steps as f64 / horizon as f64).min(1.0);
        self.cfg.epsilon_start + t * (self.cfg.epsilon_end - self.cfg.epsilon_start)
    }

    /// Re-draws the life-cycle index when the user is new or when their
    /// constraint set collapsed to the forced no-op (a life-cycle boundary);
    /// otherwise the committed index stays.
    pub fn refresh_lifecycle_index<R: Rng + ?Sized>(
        &mut self,
        user: UserId,
        allowed: &[Action],
        rng: &mut R,
    ) {
        if let ValueModel::Enn(enn) = &self.value {
            if !self.indices.contains_key(&user) || allowed == [Action::NoOp] {
                self.indices.insert(user, enn.sample_index(rng));
            }
        }
    }

    /// Selects an action for one user. Index refresh happens first, so a
    /// forced no-op step re-draws the index that will govern the next
    /// life-cycle.
    pub fn select<R: Rng + ?Sized>(
        &mut self,
        user: UserId,
        psi: &[f64],
        xi: &[f64],
        allowed: &[Action],
        rng: &mut R,
    ) -> Result<Decision> {
        if allowed.is_empty() {
            return Err(Error::contract("cannot select from an empty action set"));
        }
        self.refresh_lifecycle_index(user, allowed, rng);
        let index_digest = self.indices.get(&user).map(|z| z.digest());
        if allowed == [Action::NoOp] {
            return Ok(Decision { action: Action::NoOp, scores: Vec::new(), index_digest });
        }
        let (scores, action) = match (&self.value, self.cfg.kind) {
            (_, AgentKind::Random) => {
                (Vec::new(), allowed[rng.random_range(0..allowed.len())])
            }
            (ValueModel::Plain(net), AgentKind::EpsilonGreedy) => {
                let scores = select::q_scores(net, psi, xi, allowed)?;
                let action = if rng.random::<f64>() < self.epsilon() {
                    allowed[rng.random_range(0..allowed.len())]
                } else {
                    select::greedy_argmax(&scores)?
                };
                (scores, action)
            }
            (ValueModel::Plain(net), AgentKind::NeuralTs) => {
                let stats = self.stats.as_ref().expect("stats built for bandit kinds");
                let scores = select::ts_scores(net, stats, psi, xi, allowed, self.cfg.ts_scale, rng)?;
                let action = select::greedy_argmax(&scores)?;
                (scores, action)
            }
            (ValueModel::Plain(net), AgentKind::NeuralUcb) => {
                let stats = self.stats.as_ref().expect("stats built for bandit kinds");
                let scores = select::ucb_scores(net, stats, psi, xi, allowed, self.cfg.ucb_scale)?;
                let action = select::greedy_argmax(&scores)?;
                (scores, action)
            }
            (ValueModel::Plain(net), AgentKind::NeuralLinucb) => {
                let stats = self.stats.as_ref().expect("stats built for bandit kinds");
                let scores =
                    select::linucb_scores(net, stats, psi, xi, allowed, self.cfg.ucb_scale)?;
                let action = select::greedy_argmax(&scores)?;
                (scores, action)
            }
            (ValueModel::Enn(enn), AgentKind::EnsembleDe | AgentKind::EpinetDe) => {
                let z = self
                    .indices
                    .get(&user)
                    .ok_or_else(|| Error::usage("no epistemic index set for user"))?;
                let scores = select::enn_scores(enn, z, psi, xi, allowed)?;
                let action = select::greedy_argmax(&scores)?;
                (scores, action)
            }
            _ => return Err(Error::usage("agent kind and value model disagree")),
        };
        Ok(Decision { action, scores, index_digest })
    }

    /// Stores one transition: bandit statistics absorb genuine choices, and
    /// every replay buffer receives its own independently perturbed copy.
    pub fn record<R: Rng + ?Sized>(
        &mut self,
        action: Action,
        transition: Transition,
        rng: &mut R,
    ) -> Result<()> {
        if let Some(stats) = self.stats.as_mut() {
            if action != Action::NoOp {
                let net = match &self.value {
                    ValueModel::Plain(net) => net,
                    ValueModel::Enn(_) => unreachable!("bandit baselines use plain networks"),
                };
                let x = select::input_from_parts(&transition.psi, &transition.phi, &transition.xi);
                let feat = last_layer_features(net, &x)?;
                stats.update(&feat, transition.true_reward)?;
            }
        }
        let sigma = if self.cfg.kind.perturbs_rewards() { self.cfg.sigma } else { 0.0 };
        for buffer in &mut self.buffers {
            let noise: f64 = rng.sample(StandardNormal);
            buffer.push(transition.clone().with_perturbation(sigma * noise));
        }
        Ok(())
    }

    fn ready_to_train(&self) -> bool {
        if matches!(self.optim, ModelOptim::None) || self.buffers.is_empty() {
            return false;
        }
        let len = self.buffers[0].len();
        len >= self.cfg.warmup.max(1) && self.env_steps % self.cfg.train_every == 0
    }

    /// Closes one environment step: possibly trains, then syncs the target
    /// network at period boundaries. Returns the last update's loss if any
    /// training happened.
    pub fn end_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<f64>> {
        self.env_steps += 1;
        if !self.ready_to_train() {
            return Ok(None);
        }
        let mut last_loss = None;
        for _ in 0..self.cfg.updates_per_train {
            let loss = self.one_update(rng)?;
            last_loss = Some(loss);
            self.grad_updates += 1;
            td::sync_target(&mut self.target, &self.value, self.grad_updates, self.cfg.target_sync);
        }
        Ok(last_loss)
    }

    fn one_update<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<f64> {
        match (&mut self.value, &self.target, &mut self.optim) {
            (ValueModel::Plain(net), ValueModel::Plain(target), ModelOptim::Plain(opt)) => {
                let batch = self.buffers[0].sample(self.cfg.batch_size, rng)?;
                let (loss, grads) = td::plain_td(net, target, &batch)?;
                opt.step(net, &grads)?;
                Ok(loss)
            }
            (
                ValueModel::Enn(Enn::Ensemble(ens)),
                ValueModel::Enn(Enn::Ensemble(target)),
                ModelOptim::Ensemble(opts),
            ) => {
                let mut total = 0.0;
                for particle in 0..ens.particles() {
                    let batch = self.buffers[particle].sample(self.cfg.batch_size, rng)?;
                    let (loss, grads) = td::ensemble_particle_td(ens, target, particle, &batch)?;
                    opts[particle].step(ens.base_mut(particle), &grads)?;
                    total += loss;
                }
                Ok(total)
            }
            (
                ValueModel::Enn(Enn::Epinet(epi)),
                ValueModel::Enn(Enn::Epinet(target)),
                ModelOptim::Epinet { trunk, head },
            ) => {
                let batch = self.buffers[0].sample(self.cfg.batch_size, rng)?;
                let indices: Vec<Vec<f64>> = (0..self.cfg.z_per_update)
                    .map(|_| (0..epi.d_z()).map(|_| rng.sample(StandardNormal)).collect())
                    .collect();
                let (loss, grads) = td::epinet_td(epi, target, &batch, &indices)?;
                trunk.step(epi.trunk_mut(), &grads.trunk)?;
                head.step(epi.head_mut(), &grads.head)?;
                Ok(loss)
            }
            _ => Err(Error::usage("agent state is internally inconsistent")),
        }
    }

    /// Applies a gradient set produced by [`Enn::grad`] through the agent's
    /// optimizers; exposed for training loops driven outside `end_step`.
    pub fn apply_enn_grads(&mut self, grads: &EnnGrads) -> Result<()> {
        match (&mut self.value, &mut self.optim, grads) {
            (
                ValueModel::Enn(Enn::Ensemble(ens)),
                ModelOptim::Ensemble(opts),
                EnnGrads::Ensemble { particle, grads },
            ) => opts[*particle].step(ens.base_mut(*particle), grads),
            (
                ValueModel::Enn(Enn::Epinet(epi)),
                ModelOptim::Epinet { trunk, head },
                EnnGrads::Epinet(g),
            ) => {
                trunk.step(epi.trunk_mut(), &g.trunk)?;
                head.step(epi.head_mut(), &g.head)
            }
            _ => Err(Error::usage("gradient kind does not match the agent's value model")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::component_rng;

    const BOTH: [Action; 2] = [Action::A1, Action::A2];
    const DIMS: FeatureDims = FeatureDims { psi: 0, xi: 4 };

    fn engaged_transition(reward: f64) -> Transition {
        Transition::new(
            vec![],
            vec![0.0, 1.0],
            vec![-1.0, -1.0, -1.0, -1.0],
            reward,
            vec![0.0, -1.0, -1.0, -1.0],
            vec![Action::A1, Action::A2],
        )
        .unwrap()
    }

    fn build(kind: AgentKind, seed: u64) -> QAgent {
        let mut cfg = AgentConfig::new(kind);
        cfg.warmup = 8;
        cfg.batch_size = 4;
        cfg.particles = 3;
        cfg.d_z = 4;
        cfg.z_per_update = 5;
        cfg.head_hidden = vec![8];
        let mut rng = component_rng(seed, "agent-init", 0);
        QAgent::build(cfg, DIMS, &mut rng).unwrap()
    }

    #[test]
    fn fresh_user_gets_an_index_and_keeps_it_while_engaged() {
        let mut agent = build(AgentKind::EpinetDe, 1);
        let mut rng = component_rng(1, "agent", 0);
        assert!(agent.index_for(7).is_none());
        agent.select(7, &[], &[0.0; 4], &BOTH, &mut rng).unwrap();
        let first = agent.index_for(7).cloned().unwrap();
        for _ in 0..5 {
            agent.select(7, &[], &[0.0; 4], &BOTH, &mut rng).unwrap();
            assert_eq!(agent.index_for(7), Some(&first), "index changed mid-life-cycle");
        }
    }

    #[test]
    fn noop_boundary_resamples_the_index() {
        let mut agent = build(AgentKind::EpinetDe, 2);
        let mut rng = component_rng(2, "agent", 0);
        agent.select(0, &[], &[0.0; 4], &BOTH, &mut rng).unwrap();
        let before = agent.index_for(0).cloned().unwrap();
        let decision = agent.select(0, &[], &[0.0; 4], &[Action::NoOp], &mut rng).unwrap();
        assert_eq!(decision.action, Action::NoOp);
        let after = agent.index_for(0).cloned().unwrap();
        assert_ne!(before, after, "no-op boundary must redraw the index");
    }

    #[test]
    fn ensemble_appends_to_every_buffer_with_distinct_noise() {
        let mut agent = build(AgentKind::EnsembleDe, 3);
        let mut rng = component_rng(3, "agent", 0);
        agent.record(Action::A2, engaged_transition(1.0), &mut rng).unwrap();
        assert_eq!(agent.buffer_lens(), vec![1, 1, 1]);
        let stored: Vec<f64> = agent
            .buffers
            .iter()
            .map(|b| b.iter().next().unwrap().perturbed_reward)
            .collect();
        assert!(stored[0] != stored[1] && stored[1] != stored[2]);
        for (b, r) in agent.buffers.iter().zip(&stored) {
            assert_eq!(b.iter().next().unwrap().true_reward, 1.0);
            assert_ne!(*r, 1.0, "noise draw should be nonzero almost surely");
        }
    }

    #[test]
    fn epinet_appends_to_exactly_one_buffer() {
        let mut agent = build(AgentKind::EpinetDe, 4);
        let mut rng = component_rng(4, "agent", 0);
        agent.record(Action::A1, engaged_transition(0.0), &mut rng).unwrap();
        assert_eq!(agent.buffer_lens(), vec![1]);
    }

    #[test]
    fn baselines_store_unperturbed_rewards() {
        for kind in [AgentKind::EpsilonGreedy, AgentKind::NeuralTs, AgentKind::NeuralUcb] {
            let mut agent = build(kind, 5);
            let mut rng = component_rng(5, "agent", 0);
            agent.record(Action::A2, engaged_transition(1.0), &mut rng).unwrap();
            let t = agent.buffers[0].iter().next().unwrap();
            assert_eq!(t.perturbed_reward, t.true_reward);
        }
    }

    #[test]
    fn perturbation_std_tracks_sigma() {
        let mut agent = build(AgentKind::EpinetDe, 6);
        agent.cfg.sigma = 0.1;
        agent.cfg.capacity = 200_000;
        agent.buffers = vec![ReplayBuffer::new(200_000).unwrap()];
        let mut rng = component_rng(6, "agent", 0);
        for _ in 0..100_000 {
            agent.record(Action::A1, engaged_transition(0.5), &mut rng).unwrap();
        }
        let noises: Vec<f64> =
            agent.buffers[0].iter().map(|t| t.perturbed_reward - t.true_reward).collect();
        let mean = noises.iter().sum::<f64>() / noises.len() as f64;
        let var = noises.iter().map(|n| (n - mean) * (n - mean)).sum::<f64>()
            / (noises.len() - 1) as f64;
        let std = var.sqrt();
        assert!((std - 0.1).abs() < 0.005, "std {std} not within 5% of 0.1");
    }

    #[test]
    fn zero_sigma_stores_exact_rewards() {
        let mut agent = build(AgentKind::EnsembleDe, 7);
        agent.cfg.sigma = 0.0;
        let mut rng = component_rng(7, "agent", 0);
        agent.record(Action::A1, engaged_transition(1.0), &mut rng).unwrap();
        for b in &agent.buffers {
            assert_eq!(b.iter().next().unwrap().perturbed_reward, 1.0);
        }
    }

    #[test]
    fn target_stays_stale_between_syncs_and_matches_after() {
        let mut agent = build(AgentKind::EpsilonGreedy, 8);
        agent.cfg.target_sync = 5;
        agent.cfg.warmup = 4;
        agent.cfg.train_every = 1;
        let mut rng = component_rng(8, "agent", 0);
        for _ in 0..4 {
            agent.record(Action::A2, engaged_transition(1.0), &mut rng).unwrap();
        }
        let initial_target = agent.target_checksum();
        for step in 1..=10 {
            agent.end_step(&mut rng).unwrap();
            if step % 5 == 0 {
                assert_eq!(
                    agent.target_checksum(),
                    agent.value_checksum(),
                    "step {step}: target must equal online right after a sync"
                );
            }
        }
        assert_ne!(agent.target_checksum(), initial_target);
        // One more update: target now stale again while online moved.
        agent.end_step(&mut rng).unwrap();
        assert_ne!(agent.target_checksum(), agent.value_checksum());
    }

    #[test]
    fn training_waits_for_warmup() {
        let mut agent = build(AgentKind::EpsilonGreedy, 9);
        agent.cfg.warmup = 10;
        let mut rng = component_rng(9, "agent", 0);
        for _ in 0..5 {
            agent.record(Action::A1, engaged_transition(0.0), &mut rng).unwrap();
            assert!(agent.end_step(&mut rng).unwrap().is_none());
        }
        for _ in 0..5 {
            agent.record(Action::A1, engaged_transition(0.0), &mut rng).unwrap();
        }
        assert!(agent.end_step(&mut rng).unwrap().is_some());
    }

    #[test]
    fn priors_stay_frozen_through_training() {
        for kind in [AgentKind::EnsembleDe, AgentKind::EpinetDe] {
            let mut agent = build(kind, 10);
            agent.cfg.warmup = 4;
            let mut rng = component_rng(10, "agent", 0);
            for _ in 0..4 {
                agent.record(Action::A2, engaged_transition(1.0), &mut rng).unwrap();
            }
            for _ in 0..20 {
                agent.end_step(&mut rng).unwrap();
            }
            assert!(agent.priors_frozen(), "{kind:?}");
            assert!(agent.grad_updates() >= 16);
        }
    }

    #[test]
    fn exploration_knobs_at_zero_reduce_to_greedy() {
        // epsilon = 0, nu = 0, bonus scale = 0: identical selections to
        // dqn_select on the same network and inputs.
        let mut rng = component_rng(11, "agent", 0);
        for kind in [AgentKind::EpsilonGreedy, AgentKind::NeuralTs, AgentKind::NeuralUcb] {
            let mut cfg = AgentConfig::new(kind);
            cfg.epsilon_start = 0.0;
            cfg.epsilon_end = 0.0;
            cfg.ts_scale = 0.0;
            cfg.ucb_scale = 0.0;
            let mut agent = QAgent::build(cfg, DIMS, &mut rng).unwrap();
            for _ in 0..50 {
                let xi: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                let decision = agent.select(0, &[], &xi, &BOTH, &mut rng).unwrap();
                let net = match agent.value_model() {
                    ValueModel::Plain(net) => net,
                    _ => unreachable!(),
                };
                let greedy = select::dqn_select(net, &[], &xi, &BOTH).unwrap();
                assert_eq!(decision.action, greedy, "{kind:?}");
            }
        }
        // LinUCB with scale 0 and no data scores both arms 0 and tie-breaks
        // to a1, which is dqn_select's tie-break on an untrained ridge head.
        let mut cfg = AgentConfig::new(AgentKind::NeuralLinucb);
        cfg.ucb_scale = 0.0;
        let mut agent = QAgent::build(cfg, DIMS, &mut rng).unwrap();
        let decision = agent.select(0, &[], &[0.0; 4], &BOTH, &mut rng).unwrap();
        assert_eq!(decision.action, Action::A1);
    }

    #[test]
    fn random_agent_needs_no_training_machinery() {
        let mut agent = build(AgentKind::Random, 12);
        let mut rng = component_rng(12, "agent", 0);
        agent.record(Action::A1, engaged_transition(0.0), &mut rng).unwrap();
        assert!(agent.buffer_lens().is_empty());
        assert!(agent.end_step(&mut rng).unwrap().is_none());
        let d = agent.select(0, &[], &[0.0; 4], &BOTH, &mut rng).unwrap();
        assert!(BOTH.contains(&d.action));
        assert!(d.scores.is_empty());
    }

    #[test]
    fn epinet_td_gradient_matches_frozen_representation_oracle() {
        // Finite differences of the full update loss, with each sample's
        // representation frozen at its unperturbed value (the stop-gradient
        // semantics), must match the analytic gradients.
        use crate::nn::testutil::{finite_diff_grads, max_rel_err};
        let mut rng = component_rng(13, "agent", 0);
        let epi = EpinetParams::init(&[6, 6, 1], 3, &[8], 0.3, &mut rng).unwrap();
        let target = EpinetParams::init(&[6, 6, 1], 3, &[8], 0.3, &mut rng).unwrap();
        let batch: Vec<Transition> = (0..4)
            .map(|i| {
                let phi = if i % 2 == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] };
                let xi = vec![if i < 2 { -1.0 } else { 1.0 }, 0.0, -1.0, 1.0];
                let next_allowed = if i == 3 {
                    vec![Action::NoOp]
                } else {
                    vec![Action::A1, Action::A2]
                };
                Transition::new(vec![], phi, xi.clone(), 0.7, xi, next_allowed).unwrap()
            })
            .collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let indices: Vec<Vec<f64>> =
            (0..6).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let (_, analytic) = td::epinet_td(&epi, &target, &refs, &indices).unwrap();

        // Frozen representations per sample.
        let sigmas: Vec<Vec<f64>> = refs
            .iter()
            .map(|t| {
                let x = select::input_from_parts(&t.psi, &t.phi, &t.xi);
                epi.trunk_eval(&x).unwrap().sigma().to_vec()
            })
            .collect();
        let frozen_loss = |params: &EpinetParams| -> f64 {
            let mut loss = 0.0;
            for (t, sigma) in refs.iter().zip(&sigmas) {
                let x = select::input_from_parts(&t.psi, &t.phi, &t.xi);
                for z in &indices {
                    let pred = params.value_with_representation(&x, sigma, z).unwrap();
                    let bootstrap = if t.terminal {
                        0.0
                    } else {
                        t.next_allowed
                            .iter()
                            .map(|&a| {
                                target.value(&select::q_input(&t.psi, a, &t.next_xi), z).unwrap()
                            })
                            .fold(f64::NEG_INFINITY, f64::max)
                    };
                    let diff = pred - (t.perturbed_reward + bootstrap);
                    loss += diff * diff;
                }
            }
            loss
        };
        let fd_trunk = finite_diff_grads(epi.trunk(), 1e-5, |t| {
            let var = EpinetParams::from_parts(
                t.clone(),
                epi.head().clone(),
                epi.prior_head().clone(),
                0.3,
                3,
            )
            .unwrap();
            frozen_loss(&var)
        });
        let err = max_rel_err(&analytic.trunk, &fd_trunk);
        assert!(err <= 1e-4, "trunk rel err {err}");
        let fd_head = finite_diff_grads(epi.head(), 1e-5, |h| {
            let var = EpinetParams::from_parts(
                epi.trunk().clone(),
                h.clone(),
                epi.prior_head().clone(),
                0.3,
                3,
            )
            .unwrap();
            frozen_loss(&var)
        });
        let err = max_rel_err(&analytic.head, &fd_head);
        assert!(err <= 1e-4, "head rel err {err}");
    }

    #[test]
    fn ensemble_td_gradient_matches_finite_differences() {
        use crate::nn::testutil::{finite_diff_grads, max_rel_err};
        let mut rng = component_rng(14, "agent", 0);
        let ens = EnsembleParams::init(&[6, 5, 1], 2, 0.3, &mut rng).unwrap();
        let target = EnsembleParams::init(&[6, 5, 1], 2, 0.3, &mut rng).unwrap();
        let batch: Vec<Transition> = (0..4)
            .map(|i| {
                let phi = if i % 2 == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] };
                let xi = vec![0.0, 1.0, -1.0, 0.0];
                let next_allowed =
                    if i == 0 { vec![Action::NoOp] } else { vec![Action::A1, Action::A2] };
                Transition::new(vec![], phi, xi.clone(), 0.3, xi, next_allowed).unwrap()
            })
            .collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        for particle in 0..2 {
            let (_, analytic) = td::ensemble_particle_td(&ens, &target, particle, &refs).unwrap();
            let fd = finite_diff_grads(ens.base(particle), 1e-5, |b| {
                let mut bases: Vec<DenseNet> =
                    (0..2).map(|z| ens.base(z).clone()).collect();
                bases[particle] = b.clone();
                let priors: Vec<DenseNet> = (0..2).map(|z| ens.prior(z).clone()).collect();
                let var = EnsembleParams::from_parts(bases, priors, 0.3).unwrap();
                td::ensemble_particle_td(&var, &target, particle, &refs).unwrap().0
            });
            let err = max_rel_err(&analytic, &fd);
            assert!(err <= 1e-4, "particle {particle}: rel err {err}");
        }
    }
}
