//! Declarative experiment description, loaded from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::env::seqrec::{SeqRecConfig, UserSpec};
use crate::error::{Error, Result};

/// Roster generator for spawned user populations.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpawnSpec {
    pub users: usize,
    /// Satisfaction target and engagement budget, both set to this horizon.
    pub horizon: usize,
}

/// Scripted policies for the engagement-streak environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreakPolicy {
    AlwaysSkip,
    AlwaysRecommend,
    RecommendNineSkipOne,
    Random,
}

impl StreakPolicy {
    pub fn label(self) -> &'static str {
        match self {
            StreakPolicy::AlwaysSkip => "always_skip",
            StreakPolicy::AlwaysRecommend => "always_recommend",
            StreakPolicy::RecommendNineSkipOne => "recommend_nine_skip_one",
            StreakPolicy::Random => "random",
        }
    }
}

/// Which environment a run drives.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    /// The sequential-recommendation environment: either an explicit roster
    /// or a spawned population (exactly one must be given).
    Seqrec {
        #[serde(default)]
        users: Vec<UserSpec>,
        #[serde(default)]
        spawn: Option<SpawnSpec>,
    },
    /// The engagement-streak toy driven by a scripted policy; an episode is
    /// budgeted to `steps` environment steps.
    Streak { steps: usize, policy: StreakPolicy },
}

/// Held-out roster for frozen evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSpec {
    pub spawn: SpawnSpec,
    pub life_cycles: usize,
    #[serde(default = "default_eval_seeds")]
    pub seeds: Vec<u64>,
}

fn default_eval_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub seeds: Vec<u64>,
    /// Life-cycles counted per user (episodes, for the streak environment).
    pub life_cycles: usize,
    pub env: EnvSpec,
    pub agent: AgentConfig,
    #[serde(default)]
    pub eval: Option<EvalSpec>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(&path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_alphanumeric() || c == '_') {
            return Err(Error::config(
                "name must be non-empty and alphanumeric/underscore (it names artifact files)",
            ));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if self.life_cycles == 0 {
            return Err(Error::config("life_cycles must be >= 1"));
        }
        self.agent.validate()?;
        match &self.env {
            EnvSpec::Seqrec { users, spawn } => {
                match (users.is_empty(), spawn) {
                    (true, None) => {
                        return Err(Error::config(
                            "seqrec environment needs either an explicit roster or a spawn block",
                        ))
                    }
                    (false, Some(_)) => {
                        return Err(Error::config(
                            "give either an explicit roster or a spawn block, not both",
                        ))
                    }
                    _ => {}
                }
                if let Some(s) = spawn {
                    if s.users == 0 || s.horizon == 0 {
                        return Err(Error::config("spawn needs positive users and horizon"));
                    }
                } else {
                    let roster = SeqRecConfig { users: users.clone() };
                    roster.validate()?;
                    let budget = roster.users[0].budget;
                    if roster.users.iter().any(|u| u.budget != budget) {
                        return Err(Error::config(
                            "all users must share one engagement budget (it sizes the network input)",
                        ));
                    }
                }
            }
            EnvSpec::Streak { steps, .. } => {
                if *steps == 0 {
                    return Err(Error::config("streak episodes need at least one step"));
                }
            }
        }
        if let Some(eval) = &self.eval {
            if eval.spawn.users == 0 || eval.life_cycles == 0 || eval.seeds.is_empty() {
                return Err(Error::config("eval block needs users, life_cycles, and seeds"));
            }
        }
        Ok(())
    }

    /// Materializes the roster for one seed. Spawned populations draw from a
    /// seed-specific stream so every run is self-contained.
    pub fn resolve_roster(&self, seed: u64) -> Result<SeqRecConfig> {
        match &self.env {
            EnvSpec::Seqrec { users, spawn } => {
                if let Some(s) = spawn {
                    let mut rng = crate::rng::component_rng(seed, "spawn", 0);
                    SeqRecConfig::spawn(s.users, s.horizon, &mut rng)
                } else {
                    Ok(SeqRecConfig { users: users.clone() })
                }
            }
            EnvSpec::Streak { .. } => {
                Err(Error::usage("streak runs do not carry a seqrec roster"))
            }
        }
    }

    /// The agent configuration with run-derived defaults filled in (the
    /// epsilon decay horizon defaults to half the expected run length).
    pub fn resolve_agent(&self, roster: &SeqRecConfig) -> AgentConfig {
        let mut agent = self.agent.clone();
        if agent.epsilon_decay_steps == 0 {
            let budget = roster.max_budget();
            agent.epsilon_decay_steps = (self.life_cycles * (budget + 1)).div_ceil(2).max(1);
        }
        agent
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = r#"
        name = "toy"
        seeds = [0, 1]
        life_cycles = 100

        [env]
        kind = "seqrec"
        [[env.users]]
        id = 0
        target = 10.0
        budget = 10
        gain_a1 = 0.0
        gain_a2 = 1.0

        [agent]
        kind = "epinet_de"
        hidden = [20]
    "#;

    #[test]
    fn toy_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml_str(TOY).unwrap();
        assert_eq!(cfg.seeds, vec![0, 1]);
        assert_eq!(cfg.agent.prior_scale, 0.3);
        assert_eq!(cfg.agent.d_z, 10);
        assert_eq!(cfg.agent.z_per_update, 50);
        let roster = cfg.resolve_roster(0).unwrap();
        assert_eq!(roster.users.len(), 1);
        let agent = cfg.resolve_agent(&roster);
        assert_eq!(agent.epsilon_decay_steps, 550);
    }

    #[test]
    fn spawned_roster_is_seed_deterministic() {
        let text = r#"
            name = "multi"
            seeds = [3]
            life_cycles = 10
            [env]
            kind = "seqrec"
            spawn = { users = 6, horizon = 10 }
            [agent]
            kind = "epsilon_greedy"
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        let a = cfg.resolve_roster(3).unwrap();
        let b = cfg.resolve_roster(3).unwrap();
        for (ua, ub) in a.users.iter().zip(&b.users) {
            assert_eq!(ua.psi, ub.psi);
        }
        let c = cfg.resolve_roster(4).unwrap();
        assert_ne!(a.users[0].psi, c.users[0].psi);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("").is_err());
        let no_seeds = TOY.replace("seeds = [0, 1]", "seeds = []");
        assert!(ExperimentConfig::from_toml_str(&no_seeds).is_err());
        let bad_name = TOY.replace("name = \"toy\"", "name = \"to/y\"");
        assert!(ExperimentConfig::from_toml_str(&bad_name).is_err());
        let zero_lc = TOY.replace("life_cycles = 100", "life_cycles = 0");
        assert!(ExperimentConfig::from_toml_str(&zero_lc).is_err());
    }

    #[test]
    fn streak_config_parses() {
        let text = r#"
            name = "streak"
            seeds = [0]
            life_cycles = 3
            [env]
            kind = "streak"
            steps = 200
            policy = "recommend_nine_skip_one"
            [agent]
            kind = "random"
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        match cfg.env {
            EnvSpec::Streak { steps, policy } => {
                assert_eq!(steps, 200);
                assert_eq!(policy, StreakPolicy::RecommendNineSkipOne);
            }
            _ => panic!("wrong env kind"),
        }
    }
}
