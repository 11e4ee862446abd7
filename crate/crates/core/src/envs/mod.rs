//! Episodic environments used by the agents.

mod cartpole;
mod chain;

pub use cartpole::{
    cartpole_reset, cartpole_step, Cartpole, CartpoleAction, CartpoleState, MAX_EPISODE_STEPS,
    THETA_THRESHOLD, X_THRESHOLD,
};
pub use chain::{chain_step, Chain, ChainAction};

use crate::error::Result;

/// Outcome of a single transition of a concrete environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult<S> {
    pub next_state: S,
    pub reward: f64,
    pub terminal: bool,
    /// The episode was cut by a length limit while still live.
    pub truncated: bool,
}

/// Observation-level step outcome; the new observation is read from
/// [`Environment::observation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub reward: f64,
    pub terminal: bool,
    pub truncated: bool,
}

impl Step {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

/// Single-owner episodic environment with discrete actions and a real-vector
/// observation.
pub trait Environment {
    fn num_actions(&self) -> usize;
    fn obs_dim(&self) -> usize;
    /// Starts a new episode. Equal seeds give equal initial states.
    fn reset(&mut self, seed: u64);
    fn observation(&self) -> &[f64];
    fn step(&mut self, action: usize) -> Result<Step>;
}
