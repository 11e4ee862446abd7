use super::{Environment, Step, StepResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainAction {
    Fwd,
    Back,
}

impl ChainAction {
    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Self::Fwd),
            1 => Some(Self::Back),
            _ => None,
        }
    }
}

/// Deterministic N-chain: `Fwd` advances one state, `Back` returns to 0.
/// Reaching state `n - 1` pays 1 and ends the episode.
pub fn chain_step(n: usize, state: usize, action: ChainAction) -> Result<StepResult<usize>> {
    if state >= n {
        return Err(Error::OutOfRange {
            index: state,
            len: n,
        });
    }
    if state == n - 1 {
        return Err(Error::EpisodeOver);
    }
    let next = match action {
        ChainAction::Fwd => state + 1,
        ChainAction::Back => 0,
    };
    let terminal = next == n - 1;
    Ok(StepResult {
        next_state: next,
        reward: if terminal { 1.0 } else { 0.0 },
        terminal,
        truncated: false,
    })
}

/// Chain episode driver with one-hot observations and an optional episode
/// length cap.
#[derive(Debug, Clone)]
pub struct Chain {
    n: usize,
    state: usize,
    obs: Vec<f64>,
    steps: u32,
    max_steps: u32,
    done: bool,
}

impl Chain {
    /// `n >= 2` states.
    pub fn new(n: usize, max_steps: u32) -> Self {
        assert!(n >= 2, "chain needs at least two states");
        Self {
            n,
            state: 0,
            obs: vec![0.0; n],
            steps: 0,
            max_steps,
            done: true,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn state(&self) -> usize {
        self.state
    }

    /// Starts an episode in an arbitrary non-terminal state.
    pub fn reset_to(&mut self, state: usize) -> Result<()> {
        if state + 1 >= self.n {
            return Err(Error::OutOfRange {
                index: state,
                len: self.n - 1,
            });
        }
        self.set_state(state);
        self.steps = 0;
        self.done = false;
        Ok(())
    }

    fn set_state(&mut self, state: usize) {
        self.obs[self.state] = 0.0;
        self.state = state;
        self.obs[state] = 1.0;
    }

    /// Optimal state values under discount `gamma`, by value iteration.
    pub fn optimal_values(&self, gamma: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.n];
        for _ in 0..10 * self.n + 100 {
            let mut next = v.clone();
            for s in 0..self.n - 1 {
                next[s] = [ChainAction::Fwd, ChainAction::Back]
                    .iter()
                    .map(|&a| {
                        let out = chain_step(self.n, s, a).unwrap();
                        let tail = if out.terminal {
                            0.0
                        } else {
                            gamma * v[out.next_state]
                        };
                        out.reward + tail
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
            }
            v = next;
        }
        v
    }
}

impl Environment for Chain {
    fn num_actions(&self) -> usize {
        2
    }

    fn obs_dim(&self) -> usize {
        self.n
    }

    fn reset(&mut self, _seed: u64) {
        self.set_state(0);
        self.steps = 0;
        self.done = false;
    }

    fn observation(&self) -> &[f64] {
        &self.obs
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        if self.done {
            return Err(Error::EpisodeOver);
        }
        let action = ChainAction::from_index(action).ok_or(Error::OutOfRange {
            index: action,
            len: 2,
        })?;
        let out = chain_step(self.n, self.state, action)?;
        self.set_state(out.next_state);
        self.steps += 1;
        let truncated = !out.terminal && self.max_steps > 0 && self.steps >= self.max_steps;
        self.done = out.terminal || truncated;
        Ok(Step {
            reward: out.reward,
            terminal: out.terminal,
            truncated,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_examples() {
        let out = chain_step(3, 1, ChainAction::Fwd).unwrap();
        assert_eq!((out.next_state, out.reward, out.terminal), (2, 1.0, true));
        let out = chain_step(3, 1, ChainAction::Back).unwrap();
        assert_eq!((out.next_state, out.reward, out.terminal), (0, 0.0, false));
        assert!(matches!(
            chain_step(3, 3, ChainAction::Fwd),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn optimal_return_from_start_is_one() {
        let chain = Chain::new(3, 0);
        assert_eq!(chain.optimal_values(1.0), vec![1.0, 1.0, 0.0]);
        let v = Chain::new(4, 0).optimal_values(0.5);
        assert_eq!(v, vec![0.25, 0.5, 1.0, 0.0]);
    }

    #[test]
    fn one_hot_observation_and_cap() {
        let mut env = Chain::new(3, 2);
        env.reset(0);
        assert_eq!(env.observation(), &[1.0, 0.0, 0.0]);
        let s = env.step(0).unwrap();
        assert_eq!(env.observation(), &[0.0, 1.0, 0.0]);
        assert!(!s.done());
        let s = env.step(1).unwrap();
        assert!(s.truncated && !s.terminal);
        assert!(env.step(0).is_err());
    }
}
