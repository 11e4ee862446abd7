//! Argmax with uniform random tie-breaking and the evaluation loop shared by
//! the tabular and deep agents.

use rand::Rng;

use crate::envs::Environment;
use crate::error::Result;
use crate::stats::Summary;

/// Index of the largest score; exact ties are broken uniformly at random.
///
/// Panics on an empty slice.
pub fn argmax_random_tie<R: Rng + ?Sized>(scores: &[f64], rng: &mut R) -> usize {
    assert!(!scores.is_empty(), "argmax over no actions");
    let mut best = 0;
    let mut ties = 1u32;
    for (i, &v) in scores.iter().enumerate().skip(1) {
        if v > scores[best] {
            best = i;
            ties = 1;
        } else if v == scores[best] {
            ties += 1;
            if rng.random_range(0..ties) == 0 {
                best = i;
            }
        }
    }
    best
}

/// Whether `action` attains the maximum of `scores`.
pub fn is_maximizer(scores: &[f64], action: usize) -> bool {
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    scores[action] >= best
}

/// Runs `episodes` full episodes with `policy`, replacing its choice by a
/// uniform random action with probability `eps`. Returns per-episode
/// undiscounted returns.
pub fn run_episodes<E, R, P>(
    env: &mut E,
    episodes: usize,
    eps: f64,
    rng: &mut R,
    mut policy: P,
) -> Result<Vec<f64>>
where
    E: Environment + ?Sized,
    R: Rng + ?Sized,
    P: FnMut(&[f64], &mut R) -> Result<usize>,
{
    let num_actions = env.num_actions();
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        env.reset(rng.random());
        let mut total = 0.0;
        loop {
            let action = if eps > 0.0 && rng.random::<f64>() < eps {
                rng.random_range(0..num_actions)
            } else {
                policy(env.observation(), rng)?
            };
            let step = env.step(action)?;
            total += step.reward;
            if step.done() {
                break;
            }
        }
        returns.push(total);
    }
    Ok(returns)
}

/// Aggregate over a batch of evaluation episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    pub returns: Vec<f64>,
    pub summary: Summary,
}

impl EpisodeStats {
    pub fn from_returns(returns: Vec<f64>) -> Self {
        let summary = Summary::of(&returns);
        Self { returns, summary }
    }

    pub fn mean(&self) -> f64 {
        self.summary.mean
    }
}
