//! Stored learning samples and the uniform replay buffer.

use rand::Rng;

use crate::env::seqrec::Action;
use crate::error::{Error, Result};

/// One stored transition. The reward kept for learning may carry an
/// exploration perturbation; the unperturbed reward is retained alongside for
/// metrics and bandit statistics.
#[derive(Debug, Clone)]
pub struct Transition {
    pub psi: Vec<f64>,
    pub phi: Vec<f64>,
    pub xi: Vec<f64>,
    pub perturbed_reward: f64,
    pub true_reward: f64,
    pub next_xi: Vec<f64>,
    pub next_allowed: Vec<Action>,
    pub terminal: bool,
}

impl Transition {
    /// Builds a transition; `terminal` is derived from the successor
    /// constraint set so the two can never disagree.
    pub fn new(
        psi: Vec<f64>,
        phi: Vec<f64>,
        xi: Vec<f64>,
        reward: f64,
        next_xi: Vec<f64>,
        next_allowed: Vec<Action>,
    ) -> Result<Self> {
        if next_allowed.is_empty() {
            return Err(Error::contract("successor constraint set cannot be empty"));
        }
        let terminal = next_allowed == [Action::NoOp];
        Ok(Transition {
            psi,
            phi,
            xi,
            perturbed_reward: reward,
            true_reward: reward,
            next_xi,
            next_allowed,
            terminal,
        })
    }

    pub fn with_perturbation(mut self, noise: f64) -> Self {
        self.perturbed_reward = self.true_reward + noise;
        self
    }
}

/// Fixed-capacity ring with uniform sampling and FIFO eviction.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    write: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("replay capacity must be positive"));
        }
        Ok(ReplayBuffer { items: Vec::new(), capacity, write: 0 })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.write] = t;
        }
        self.write = (self.write + 1) % self.capacity;
    }

    /// Uniform sample of `n` transitions, with replacement.
    pub fn sample<'a, R: Rng + ?Sized>(&'a self, n: usize, rng: &mut R) -> Result<Vec<&'a Transition>> {
        if self.items.is_empty() {
            return Err(Error::usage("cannot sample from an empty replay buffer"));
        }
        Ok((0..n)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }
}
