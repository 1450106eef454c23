//! A sequential-recommendation environment with sparse, delayed rewards.
//!
//! Every user tracks a latent satisfaction level `Y` and a life-cycle length
//! `L`. Engaged users receive one of two content genres per step; each genre
//! shifts `Y` by a per-user amount. The user reports satisfaction (the only
//! positive reward) once `Y` reaches their target, and leaves whenever they
//! are satisfied, `Y` drops below zero, or the life-cycle exhausts their
//! engagement budget. A leaving user re-engages on the following step with a
//! reset state, starting a new life-cycle. All transitions are deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::features::{self, PREFERENCE_ENCODING_DIM};
use super::UserId;

/// The action set: two content genres plus the forced no-op offered to users
/// who are leaving. Tie-breaks order actions by id: `a1 < a2 < no-op`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    A1,
    A2,
    NoOp,
}

impl Action {
    pub fn id(self) -> u32 {
        match self {
            Action::A1 => 0,
            Action::A2 => 1,
            Action::NoOp => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Action::A1 => "a1",
            Action::A2 => "a2",
            Action::NoOp => "no-op",
        }
    }

    pub fn from_label(s: &str) -> Result<Action> {
        match s {
            "a1" => Ok(Action::A1),
            "a2" => Ok(Action::A2),
            "no-op" => Ok(Action::NoOp),
            other => Err(Error::validation(format!("unknown action label '{other}'"))),
        }
    }
}

/// What a user reveals each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeqRecObs {
    pub satisfied: bool,
    pub leave: bool,
}

/// The allowed-action set induced by an observation: both genres while the
/// user stays, only the no-op when they are leaving.
pub fn constraint(obs: SeqRecObs) -> Vec<Action> {
    if obs.leave {
        vec![Action::NoOp]
    } else {
        vec![Action::A1, Action::A2]
    }
}

/// One user's static description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UserSpec {
    pub id: UserId,
    /// Satisfaction target `b`; reaching it produces the single reward.
    pub target: f64,
    /// Engagement budget `tau`: the longest life-cycle the user tolerates.
    pub budget: usize,
    /// Satisfaction change applied by each genre.
    pub gain_a1: f64,
    pub gain_a2: f64,
    /// Static user representation offered to agents; may be empty.
    #[serde(default)]
    pub psi: Vec<f64>,
}

impl UserSpec {
    pub fn gain(&self, action: Action) -> f64 {
        match action {
            Action::A1 => self.gain_a1,
            Action::A2 => self.gain_a2,
            Action::NoOp => 0.0,
        }
    }

    /// The genre with the larger satisfaction gain.
    pub fn preferred_action(&self) -> Action {
        if self.gain_a1 >= self.gain_a2 {
            Action::A1
        } else {
            Action::A2
        }
    }
}

/// Roster plus dynamics table; loadable from TOML.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeqRecConfig {
    pub users: Vec<UserSpec>,
}

impl SeqRecConfig {
    /// The single-user configuration used throughout: target and budget 10,
    /// `a1` inert, `a2` worth one unit of satisfaction, no user features.
    pub fn toy() -> Self {
        SeqRecConfig {
            users: vec![UserSpec {
                id: 0,
                target: 10.0,
                budget: 10,
                gain_a1: 0.0,
                gain_a2: 1.0,
                psi: Vec::new(),
            }],
        }
    }

    /// Spawns `n` users with ids `0..n`, alternating preferred genres (even
    /// index prefers `a1`), target = budget = `horizon`, and representations
    /// from which the preference is linearly decodable.
    pub fn spawn<R: rand::Rng + ?Sized>(n: usize, horizon: usize, rng: &mut R) -> Result<Self> {
        Self::spawn_offset(n, horizon, 0, n, rng)
    }

    /// Spawns a held-out roster of `n` users with ids starting at `id_start`,
    /// carrying zeroed identity blocks of width `onehot_dim` so their
    /// representations stay dimension-compatible with a training roster.
    pub fn spawn_eval<R: rand::Rng + ?Sized>(
        n: usize,
        horizon: usize,
        train_n: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Self::spawn_offset(n, horizon, train_n as UserId, train_n, rng)
    }

    fn spawn_offset<R: rand::Rng + ?Sized>(
        n: usize,
        horizon: usize,
        id_start: UserId,
        onehot_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("cannot spawn an empty roster"));
        }
        if horizon == 0 {
            return Err(Error::config("horizon must be positive"));
        }
        let users = (0..n)
            .map(|i| {
                let preferred = if i % 2 == 0 { Action::A1 } else { Action::A2 };
                let id = id_start + i as UserId;
                let in_dictionary = (id as usize) < onehot_dim;
                let psi = features::user_representation(
                    in_dictionary.then_some(id as usize),
                    onehot_dim,
                    preferred,
                    rng,
                );
                UserSpec {
                    id,
                    target: horizon as f64,
                    budget: horizon,
                    gain_a1: if preferred == Action::A1 { 1.0 } else { 0.0 },
                    gain_a2: if preferred == Action::A2 { 1.0 } else { 0.0 },
                    psi,
                }
            })
            .collect();
        Ok(SeqRecConfig { users })
    }

    pub fn validate(&self) -> Result<()> {
        if self.users.is_empty() {
            return Err(Error::config("roster must contain at least one user"));
        }
        let mut seen = std::collections::BTreeSet::new();
        let psi_dim = self.users[0].psi.len();
        for u in &self.users {
            if !seen.insert(u.id) {
                return Err(Error::config(format!("duplicate user id {}", u.id)));
            }
            if u.budget == 0 {
                return Err(Error::config(format!("user {}: budget must be >= 1", u.id)));
            }
            if !(u.target > 0.0) {
                return Err(Error::config(format!("user {}: target must be > 0", u.id)));
            }
            if u.psi.len() != psi_dim {
                return Err(Error::config("all users must share one psi dimension"));
            }
        }
        Ok(())
    }

    pub fn psi_dim(&self) -> usize {
        self.users.first().map_or(0, |u| u.psi.len())
    }

    pub fn max_budget(&self) -> usize {
        self.users.iter().map(|u| u.budget).max().unwrap_or(0)
    }

    /// Expected width of a spawned representation for an `n`-user roster.
    pub fn spawned_psi_dim(n: usize) -> usize {
        n + PREFERENCE_ENCODING_DIM
    }
}

#[derive(Debug, Clone)]
struct UserState {
    satisfaction: f64,
    lifecycle_len: usize,
    satisfied: bool,
    leave: bool,
    lifecycle_actions: Vec<Action>,
}

impl UserState {
    fn fresh() -> Self {
        UserState {
            satisfaction: 0.0,
            lifecycle_len: 0,
            satisfied: false,
            leave: false,
            lifecycle_actions: Vec::new(),
        }
    }
}

/// Everything one step reveals about one user, for logs and reward wiring.
#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    pub user: UserId,
    pub obs: SeqRecObs,
    pub reward: f64,
    pub satisfaction: f64,
    pub lifecycle_len: usize,
}

#[derive(Debug, Clone)]
pub struct SeqRecEnv {
    config: SeqRecConfig,
    states: Vec<UserState>,
}

impl SeqRecEnv {
    pub fn new(config: SeqRecConfig) -> Result<Self> {
        config.validate()?;
        let states = config.users.iter().map(|_| UserState::fresh()).collect();
        Ok(SeqRecEnv { config, states })
    }

    pub fn config(&self) -> &SeqRecConfig {
        &self.config
    }

    pub fn user_ids(&self) -> Vec<UserId> {
        self.config.users.iter().map(|u| u.id).collect()
    }

    fn index_of(&self, user: UserId) -> Result<usize> {
        self.config
            .users
            .iter()
            .position(|u| u.id == user)
            .ok_or_else(|| Error::usage(format!("user {user} is not in the active set")))
    }

    pub fn user_spec(&self, user: UserId) -> Result<&UserSpec> {
        Ok(&self.config.users[self.index_of(user)?])
    }

    pub fn observe(&self, user: UserId) -> Result<SeqRecObs> {
        let s = &self.states[self.index_of(user)?];
        Ok(SeqRecObs { satisfied: s.satisfied, leave: s.leave })
    }

    /// Allowed actions for the user's current observation.
    pub fn allowed(&self, user: UserId) -> Result<Vec<Action>> {
        Ok(constraint(self.observe(user)?))
    }

    /// Latent satisfaction level, for logging.
    pub fn satisfaction(&self, user: UserId) -> Result<f64> {
        Ok(self.states[self.index_of(user)?].satisfaction)
    }

    /// Current life-cycle length, for logging.
    pub fn lifecycle_len(&self, user: UserId) -> Result<usize> {
        Ok(self.states[self.index_of(user)?].lifecycle_len)
    }

    /// Interaction features for the user's current life-cycle.
    pub fn interact_features(&self, user: UserId) -> Result<Vec<f64>> {
        let idx = self.index_of(user)?;
        Ok(features::extract_interact_features(
            &self.states[idx].lifecycle_actions,
            self.config.users[idx].budget,
        ))
    }

    pub fn psi(&self, user: UserId) -> Result<&[f64]> {
        Ok(&self.config.users[self.index_of(user)?].psi)
    }

    /// Advances every user by one step. `actions` must cover exactly the
    /// roster, in roster order, and each action must be allowed under the
    /// user's current observation.
    pub fn step(&mut self, actions: &[(UserId, Action)]) -> Result<Vec<StepOutcome>> {
        if actions.len() != self.config.users.len() {
            return Err(Error::contract(format!(
                "expected {} actions, got {}",
                self.config.users.len(),
                actions.len()
            )));
        }
        let mut outcomes = Vec::with_capacity(actions.len());
        for (pos, (user, action)) in actions.iter().enumerate() {
            let spec = &self.config.users[pos];
            if spec.id != *user {
                return Err(Error::contract(format!(
                    "actions must follow roster order: expected user {}, got {user}",
                    spec.id
                )));
            }
            let state = &mut self.states[pos];
            let allowed = constraint(SeqRecObs { satisfied: state.satisfied, leave: state.leave });
            if !allowed.contains(action) {
                return Err(Error::contract(format!(
                    "action {} not allowed for user {user} (leave={})",
                    action.label(),
                    state.leave
                )));
            }
            if state.leave {
                // Reset: the user re-engages next step with a fresh life-cycle.
                *state = UserState::fresh();
            } else {
                state.satisfaction += spec.gain(*action);
                state.lifecycle_len += 1;
                state.lifecycle_actions.push(*action);
                state.satisfied = state.satisfaction >= spec.target;
                state.leave = state.satisfied
                    || state.satisfaction < 0.0
                    || state.lifecycle_len >= spec.budget;
            }
            outcomes.push(StepOutcome {
                user: *user,
                obs: SeqRecObs { satisfied: state.satisfied, leave: state.leave },
                reward: if state.satisfied { 1.0 } else { 0.0 },
                satisfaction: state.satisfaction,
                lifecycle_len: state.lifecycle_len,
            });
        }
        Ok(outcomes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::component_rng;
    use proptest::prelude::*;

    fn toy_env() -> SeqRecEnv {
        SeqRecEnv::new(SeqRecConfig::toy()).unwrap()
    }

    fn step_single(env: &mut SeqRecEnv, action: Action) -> StepOutcome {
        env.step(&[(0, action)]).unwrap()[0]
    }

    #[test]
    fn constraint_follows_leave_flag() {
        assert_eq!(
            constraint(SeqRecObs { satisfied: false, leave: true }),
            vec![Action::NoOp]
        );
        assert_eq!(
            constraint(SeqRecObs { satisfied: true, leave: true }),
            vec![Action::NoOp]
        );
        assert_eq!(
            constraint(SeqRecObs { satisfied: false, leave: false }),
            vec![Action::A1, Action::A2]
        );
    }

    #[test]
    fn unknown_user_is_usage_error() {
        let env = toy_env();
        assert!(matches!(env.observe(42), Err(Error::Usage(_))));
        assert!(matches!(env.allowed(42), Err(Error::Usage(_))));
    }

    #[test]
    fn ten_consecutive_a2_reward_on_the_tenth() {
        let mut env = toy_env();
        for step in 0..10 {
            let out = step_single(&mut env, Action::A2);
            if step < 9 {
                assert_eq!(out.reward, 0.0, "step {step}");
                assert!(!out.obs.leave);
            } else {
                assert_eq!(out.reward, 1.0);
                assert!(out.obs.satisfied);
                assert!(out.obs.leave);
            }
        }
    }

    #[test]
    fn ten_consecutive_a1_leaves_with_no_reward() {
        let mut env = toy_env();
        let mut total = 0.0;
        for _ in 0..10 {
            let out = step_single(&mut env, Action::A1);
            total += out.reward;
        }
        assert_eq!(total, 0.0);
        assert!(env.observe(0).unwrap().leave);
        assert_eq!(env.satisfaction(0).unwrap(), 0.0);
    }

    #[test]
    fn negative_satisfaction_triggers_leave() {
        let mut env = SeqRecEnv::new(SeqRecConfig {
            users: vec![UserSpec {
                id: 0,
                target: 5.0,
                budget: 10,
                gain_a1: -1.0,
                gain_a2: 1.0,
                psi: vec![],
            }],
        })
        .unwrap();
        let out = step_single(&mut env, Action::A1);
        assert_eq!(out.satisfaction, -1.0);
        assert!(out.obs.leave);
        assert!(!out.obs.satisfied);
        assert_eq!(out.reward, 0.0);
    }

    #[test]
    fn leaving_user_reengages_fresh_next_step() {
        let mut env = toy_env();
        for _ in 0..10 {
            step_single(&mut env, Action::A2);
        }
        assert!(env.observe(0).unwrap().leave);
        let out = step_single(&mut env, Action::NoOp);
        assert!(!out.obs.leave);
        assert_eq!(out.satisfaction, 0.0);
        assert_eq!(out.lifecycle_len, 0);
        assert_eq!(env.interact_features(0).unwrap(), vec![-1.0; 10]);
    }

    #[test]
    fn disallowed_action_is_contract_violation() {
        let mut env = toy_env();
        for _ in 0..10 {
            step_single(&mut env, Action::A2);
        }
        assert!(matches!(env.step(&[(0, Action::A1)]), Err(Error::Contract(_))));
        let mut fresh = toy_env();
        assert!(matches!(fresh.step(&[(0, Action::NoOp)]), Err(Error::Contract(_))));
    }

    #[test]
    fn interact_features_track_the_lifecycle() {
        let mut env = toy_env();
        assert_eq!(env.interact_features(0).unwrap(), vec![-1.0; 10]);
        step_single(&mut env, Action::A1);
        step_single(&mut env, Action::A2);
        let xi = env.interact_features(0).unwrap();
        assert_eq!(xi[..2], [1.0, 0.0]);
        assert_eq!(&xi[2..], &[-1.0; 8][..]);
    }

    #[test]
    fn terminal_features_cover_the_full_budget() {
        let mut env = toy_env();
        for _ in 0..10 {
            step_single(&mut env, Action::A2);
        }
        let xi = env.interact_features(0).unwrap();
        assert!(xi.iter().all(|&v| v != -1.0));
    }

    #[test]
    fn spawn_alternates_preferences_and_is_deterministic() {
        let mut rng = component_rng(20, "spawn", 0);
        let cfg = SeqRecConfig::spawn(2, 10, &mut rng).unwrap();
        let preferred: Vec<Action> = cfg.users.iter().map(|u| u.preferred_action()).collect();
        assert_eq!(preferred, vec![Action::A1, Action::A2]);

        let mut rng_a = component_rng(20, "spawn", 1);
        let mut rng_b = component_rng(20, "spawn", 1);
        let a = SeqRecConfig::spawn(20, 10, &mut rng_a).unwrap();
        let b = SeqRecConfig::spawn(20, 10, &mut rng_b).unwrap();
        for (ua, ub) in a.users.iter().zip(&b.users) {
            assert_eq!(ua.psi, ub.psi);
            assert_eq!(ua.gain_a1, ub.gain_a1);
        }
    }

    #[test]
    fn spawned_preference_is_recoverable_by_least_squares_probe() {
        // Fit ridge-free least squares of the label e on the psi preference
        // block; a sign readout must classify every user correctly.
        let mut rng = component_rng(20, "spawn", 2);
        let cfg = SeqRecConfig::spawn(40, 10, &mut rng).unwrap();
        let onehot = 40;
        // Normal equations over the 4-dim encoding block (plus intercept).
        let rows: Vec<(Vec<f64>, f64)> = cfg
            .users
            .iter()
            .map(|u| {
                let mut x = vec![1.0];
                x.extend_from_slice(&u.psi[onehot..]);
                let y = if u.preferred_action() == Action::A1 { 1.0 } else { -1.0 };
                (x, y)
            })
            .collect();
        let d = 5;
        let mut ata = vec![0.0; d * d];
        let mut atb = vec![0.0; d];
        for (x, y) in &rows {
            for i in 0..d {
                atb[i] += x[i] * y;
                for j in 0..d {
                    ata[i * d + j] += x[i] * x[j];
                }
            }
        }
        // Tiny ridge for numerical safety; solve with Gauss-Jordan.
        for i in 0..d {
            ata[i * d + i] += 1e-9;
        }
        let mut aug = vec![0.0; d * (d + 1)];
        for i in 0..d {
            for j in 0..d {
                aug[i * (d + 1) + j] = ata[i * d + j];
            }
            aug[i * (d + 1) + d] = atb[i];
        }
        for col in 0..d {
            let pivot = (col..d)
                .max_by(|&a, &b| {
                    aug[a * (d + 1) + col]
                        .abs()
                        .partial_cmp(&aug[b * (d + 1) + col].abs())
                        .unwrap()
                })
                .unwrap();
            for j in 0..=d {
                aug.swap(col * (d + 1) + j, pivot * (d + 1) + j);
            }
            let diag = aug[col * (d + 1) + col];
            for j in 0..=d {
                aug[col * (d + 1) + j] /= diag;
            }
            for r in 0..d {
                if r != col {
                    let f = aug[r * (d + 1) + col];
                    for j in 0..=d {
                        aug[r * (d + 1) + j] -= f * aug[col * (d + 1) + j];
                    }
                }
            }
        }
        let w: Vec<f64> = (0..d).map(|i| aug[i * (d + 1) + d]).collect();
        for (x, y) in &rows {
            let pred: f64 = w.iter().zip(x).map(|(wi, xi)| wi * xi).sum();
            assert!(pred * y > 0.0, "probe misclassified a user");
        }
    }

    #[test]
    fn toml_roster_roundtrip() {
        let text = r#"
            [[users]]
            id = 0
            target = 10.0
            budget = 10
            gain_a1 = 0.0
            gain_a2 = 1.0

            [[users]]
            id = 1
            target = 5.0
            budget = 7
            gain_a1 = 1.0
            gain_a2 = -1.0
            psi = [0.5, -0.5]
        "#;
        let cfg: SeqRecConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.users.len(), 2);
        assert_eq!(cfg.users[1].budget, 7);
        assert_eq!(cfg.users[1].psi, vec![0.5, -0.5]);
        // psi dims differ across users -> invalid.
        assert!(cfg.validate().is_err());
    }

    proptest! {
        /// Identical states fed identical actions give identical successors.
        #[test]
        fn deterministic_transitions(actions in proptest::collection::vec(0u8..2, 1..40)) {
            let mut a = toy_env();
            let mut b = toy_env();
            for code in actions {
                let next = if a.observe(0).unwrap().leave {
                    Action::NoOp
                } else if code == 0 {
                    Action::A1
                } else {
                    Action::A2
                };
                let oa = step_single(&mut a, next);
                let ob = step_single(&mut b, next);
                prop_assert_eq!(oa.obs, ob.obs);
                prop_assert_eq!(oa.reward, ob.reward);
                prop_assert_eq!(oa.satisfaction, ob.satisfaction);
            }
        }

        /// At most one positive reward per life-cycle, and the life-cycle
        /// length never exceeds the budget.
        #[test]
        fn reward_sparsity_and_budget_bound(actions in proptest::collection::vec(0u8..2, 1..200)) {
            let mut env = toy_env();
            let mut lifecycle_reward = 0.0;
            for code in actions {
                let leave = env.observe(0).unwrap().leave;
                let next = if leave {
                    Action::NoOp
                } else if code == 0 {
                    Action::A1
                } else {
                    Action::A2
                };
                if leave {
                    lifecycle_reward = 0.0;
                }
                let out = step_single(&mut env, next);
                lifecycle_reward += out.reward;
                prop_assert!(lifecycle_reward <= 1.0);
                prop_assert!(out.lifecycle_len <= 10);
            }
        }
    }
}
