use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Environment, Step, StepResult};
use crate::error::{Error, Result};

const GRAVITY: f64 = 9.8;
const CART_MASS: f64 = 1.0;
const POLE_MASS: f64 = 0.1;
const TOTAL_MASS: f64 = CART_MASS + POLE_MASS;
const HALF_POLE_LENGTH: f64 = 0.5;
const POLE_MASS_LENGTH: f64 = POLE_MASS * HALF_POLE_LENGTH;
const FORCE_MAG: f64 = 10.0;
const TAU: f64 = 0.02;

pub const X_THRESHOLD: f64 = 2.4;
/// 12 degrees.
pub const THETA_THRESHOLD: f64 = 12.0 * std::f64::consts::PI / 180.0;
pub const MAX_EPISODE_STEPS: u32 = 500;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CartpoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl CartpoleState {
    pub fn is_live(&self) -> bool {
        self.x.abs() <= X_THRESHOLD && self.theta.abs() <= THETA_THRESHOLD
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x, self.x_dot, self.theta, self.theta_dot]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CartpoleAction {
    Left,
    Right,
    Nothing,
}

impl CartpoleAction {
    pub const ALL: [CartpoleAction; 3] = [Self::Left, Self::Right, Self::Nothing];

    pub fn force(self) -> f64 {
        match self {
            Self::Left => -FORCE_MAG,
            Self::Right => FORCE_MAG,
            Self::Nothing => 0.0,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

/// Each component drawn uniformly from [-0.05, 0.05].
pub fn cartpole_reset(seed: u64) -> CartpoleState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || rng.random_range(-0.05..=0.05);
    CartpoleState {
        x: draw(),
        x_dot: draw(),
        theta: draw(),
        theta_dot: draw(),
    }
}

/// One explicit-Euler step of the cart-pole dynamics. The episode-length cap
/// is tracked by [`Cartpole`]; this function never reports truncation.
pub fn cartpole_step(
    state: CartpoleState,
    action: CartpoleAction,
) -> Result<StepResult<CartpoleState>> {
    if !state.is_live() {
        return Err(Error::EpisodeOver);
    }
    let CartpoleState {
        x,
        x_dot,
        theta,
        theta_dot,
    } = state;
    let (sin, cos) = theta.sin_cos();
    let temp = (action.force() + POLE_MASS_LENGTH * theta_dot * theta_dot * sin) / TOTAL_MASS;
    let theta_acc = (GRAVITY * sin - cos * temp)
        / (HALF_POLE_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / TOTAL_MASS));
    let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos / TOTAL_MASS;

    let next = CartpoleState {
        x: x + TAU * x_dot,
        x_dot: x_dot + TAU * x_acc,
        theta: theta + TAU * theta_dot,
        theta_dot: theta_dot + TAU * theta_acc,
    };
    Ok(StepResult {
        next_state: next,
        reward: 1.0,
        terminal: !next.is_live(),
        truncated: false,
    })
}

/// Cart-pole episode driver: three actions (left, right, nothing), reward 1
/// per step, truncated after [`MAX_EPISODE_STEPS`] live steps.
#[derive(Debug, Clone)]
pub struct Cartpole {
    state: CartpoleState,
    obs: [f64; 4],
    steps: u32,
    done: bool,
}

impl Cartpole {
    pub fn new() -> Self {
        Self {
            state: CartpoleState::default(),
            obs: [0.0; 4],
            steps: 0,
            done: true,
        }
    }

    pub fn state(&self) -> CartpoleState {
        self.state
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }
}

impl Default for Cartpole {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for Cartpole {
    fn num_actions(&self) -> usize {
        3
    }

    fn obs_dim(&self) -> usize {
        4
    }

    fn reset(&mut self, seed: u64) {
        self.state = cartpole_reset(seed);
        self.obs = self.state.to_array();
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
        let action = CartpoleAction::from_index(action).ok_or(Error::OutOfRange {
            index: action,
            len: 3,
        })?;
        let out = cartpole_step(self.state, action)?;
        self.state = out.next_state;
        self.obs = self.state.to_array();
        self.steps += 1;
        let truncated = !out.terminal && self.steps >= MAX_EPISODE_STEPS;
        self.done = out.terminal || truncated;
        Ok(Step {
            reward: out.reward,
            terminal: out.terminal,
            truncated,
        })
    }
}
