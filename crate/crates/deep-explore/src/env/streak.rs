//! A single-user engagement toy: the user stays engaged (reward 1 per step)
//! until receiving ten consecutive recommendations, which triggers exactly
//! one hundred disengaged steps (reward 0, only skipping allowed) before
//! re-engagement with the streak reset. The environment itself is unbounded;
//! any horizon comes from the caller.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StreakAction {
    Skip,
    Recommend,
}

impl StreakAction {
    pub fn label(self) -> &'static str {
        match self {
            StreakAction::Skip => "skip",
            StreakAction::Recommend => "recommend",
        }
    }
}

/// Allowed actions under an engagement observation: recommending requires an
/// engaged user.
pub fn constraint(engaged: bool) -> Vec<StreakAction> {
    if engaged {
        vec![StreakAction::Skip, StreakAction::Recommend]
    } else {
        vec![StreakAction::Skip]
    }
}

#[derive(Debug, Clone)]
pub struct StreakEnv {
    engaged: bool,
    streak: usize,
    disengaged_left: usize,
    trigger: usize,
    disengage_steps: usize,
}

impl Default for StreakEnv {
    fn default() -> Self {
        Self::new()
    }
}

impl StreakEnv {
    pub fn new() -> Self {
        StreakEnv {
            engaged: true,
            streak: 0,
            disengaged_left: 0,
            trigger: 10,
            disengage_steps: 100,
        }
    }

    /// Current observation: 1 while engaged, 0 while disengaged.
    pub fn observe(&self) -> bool {
        self.engaged
    }

    pub fn allowed(&self) -> Vec<StreakAction> {
        constraint(self.engaged)
    }

    /// Applies one action; returns the next observation and its reward
    /// (engagement itself is what the reward function counts).
    pub fn step(&mut self, action: StreakAction) -> Result<(bool, f64)> {
        if !self.engaged && action == StreakAction::Recommend {
            return Err(Error::contract(
                "cannot recommend to a disengaged user".to_string(),
            ));
        }
        if self.engaged {
            match action {
                StreakAction::Recommend => self.streak += 1,
                StreakAction::Skip => self.streak = 0,
            }
            if self.streak == self.trigger {
                self.streak = 0;
                self.disengaged_left = self.disengage_steps;
            }
        }
        if self.disengaged_left > 0 {
            self.disengaged_left -= 1;
            self.engaged = false;
        } else {
            self.engaged = true;
        }
        let reward = if self.engaged { 1.0 } else { 0.0 };
        Ok((self.engaged, reward))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constraint_forbids_recommending_while_disengaged() {
        assert_eq!(constraint(true), vec![StreakAction::Skip, StreakAction::Recommend]);
        assert_eq!(constraint(false), vec![StreakAction::Skip]);
    }

    #[test]
    fn ten_consecutive_recommendations_disengage_for_exactly_one_hundred_steps() {
        let mut env = StreakEnv::new();
        for i in 0..9 {
            let (obs, _) = env.step(StreakAction::Recommend).unwrap();
            assert!(obs, "still engaged after {} recommends", i + 1);
        }
        let (obs, reward) = env.step(StreakAction::Recommend).unwrap();
        assert!(!obs, "tenth consecutive recommendation triggers disengagement");
        assert_eq!(reward, 0.0);
        let mut disengaged = 1;
        loop {
            let (obs, _) = env.step(StreakAction::Skip).unwrap();
            if obs {
                break;
            }
            disengaged += 1;
        }
        assert_eq!(disengaged, 100);
        // Streak is reset after re-engagement.
        for _ in 0..9 {
            let (obs, _) = env.step(StreakAction::Recommend).unwrap();
            assert!(obs);
        }
    }

    #[test]
    fn nine_recommends_one_skip_stays_engaged_forever() {
        let mut env = StreakEnv::new();
        let mut total = 0.0;
        for step in 0..1000 {
            let action = if step % 10 == 9 { StreakAction::Skip } else { StreakAction::Recommend };
            let (obs, reward) = env.step(action).unwrap();
            assert!(obs, "disengaged at step {step}");
            total += reward;
        }
        assert_eq!(total, 1000.0);
    }

    #[test]
    fn always_skipping_stays_engaged() {
        let mut env = StreakEnv::new();
        for _ in 0..500 {
            let (obs, reward) = env.step(StreakAction::Skip).unwrap();
            assert!(obs);
            assert_eq!(reward, 1.0);
        }
    }

    #[test]
    fn recommending_while_disengaged_is_contract_violation() {
        let mut env = StreakEnv::new();
        for _ in 0..10 {
            env.step(StreakAction::Recommend).unwrap();
        }
        assert!(!env.observe());
        assert!(matches!(env.step(StreakAction::Recommend), Err(Error::Contract(_))));
    }
}
