//! Simulation environments with sparse, delayed feedback.
//!
//! Each environment follows the same contract: per active user it emits an
//! observation, a reward derived from that observation, and a constraint set
//! of allowed actions; a step consumes one action per active user and
//! deterministically produces the next observations. Instances are owned by
//! a single run and stepped sequentially.

pub mod features;
pub mod seqrec;
pub mod streak;

pub use features::{action_features, extract_interact_features, ACTION_FEATURE_DIM};
pub use seqrec::{Action, SeqRecConfig, SeqRecEnv, SeqRecObs, StepOutcome, UserSpec};
pub use streak::{StreakAction, StreakEnv};

/// Users are identified by small integers; rosters keep them unique.
pub type UserId = u32;
