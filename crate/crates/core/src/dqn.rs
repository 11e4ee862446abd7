//! Deep Q-learning with a sigma-bonus exploration policy: action selection,
//! bootstrapped targets (plain or double), minibatch optimization, target
//! network synchronization and evaluation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::neural::{
    read_arrays, write_arrays, AdamConfig, AdamState, LossKind, NetConfig, ThreeStreamNet,
};
use crate::replay::{PriorityStore, SampleMode, Transition};
use crate::select::{argmax_random_tie, is_maximizer, run_episodes, EpisodeStats};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ReplayMode {
    Uniform,
    /// Importance exponent annealed linearly from `beta0` to 1 over
    /// `beta_steps` environment steps.
    Prioritized {
        omega: f64,
        beta0: f64,
        beta_steps: u64,
    },
}

impl ReplayMode {
    pub const DEFAULT_PRIORITIZED: ReplayMode = ReplayMode::Prioritized {
        omega: 0.6,
        beta0: 0.4,
        beta_steps: 100_000,
    };
}

/// Per-step epsilon decaying linearly from `init` to `final_` over
/// `decay_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepEps {
    pub init: f64,
    pub final_: f64,
    pub decay_steps: u64,
}

impl StepEps {
    pub const OFF: StepEps = StepEps {
        init: 0.0,
        final_: 0.0,
        decay_steps: 0,
    };

    pub fn at(&self, step: u64) -> f64 {
        if step >= self.decay_steps {
            return self.final_;
        }
        self.init + (self.final_ - self.init) * step as f64 / self.decay_steps as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    /// Weight of the `|sigma|` bonus in action selection.
    pub c: f64,
    pub minibatch: usize,
    /// Environment steps between target network copies.
    pub target_sync: u64,
    pub double: bool,
    pub loss: LossKind,
    pub optimize_every: u64,
    pub warmup_transitions: usize,
    pub gamma: f64,
    pub replay_capacity: usize,
    pub replay: ReplayMode,
    pub eps_p: f64,
    pub eps: StepEps,
    pub net: NetConfig,
    pub adam: AdamConfig,
}

impl AgentConfig {
    /// Desk-scale V-DQN: c = 0.1, no epsilon, double targets, prioritized
    /// replay.
    pub fn vdqn(net: NetConfig) -> Self {
        Self {
            c: 0.1,
            minibatch: 32,
            target_sync: 500,
            double: true,
            loss: LossKind::VDqn,
            optimize_every: 4,
            warmup_transitions: 1000,
            gamma: 0.99,
            replay_capacity: 100_000,
            replay: ReplayMode::DEFAULT_PRIORITIZED,
            eps_p: 1e-6,
            eps: StepEps::OFF,
            net,
            adam: AdamConfig::default(),
        }
    }

    pub fn tddqn(net: NetConfig) -> Self {
        Self {
            loss: LossKind::TdDqn,
            ..Self::vdqn(net)
        }
    }

    /// Baseline: epsilon-greedy 1.0 -> 0.01, no sigma bonus, squared TD loss.
    pub fn ddqn(net: NetConfig) -> Self {
        Self {
            c: 0.0,
            loss: LossKind::Dqn,
            eps: StepEps {
                init: 1.0,
                final_: 0.01,
                decay_steps: 10_000,
            },
            ..Self::vdqn(net)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.target_sync == 0 {
            return bad("target_sync must be positive".into());
        }
        if self.minibatch == 0 {
            return bad("minibatch must be at least 1".into());
        }
        if self.optimize_every == 0 {
            return bad("optimize_every must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if self.c.is_nan() || self.c < 0.0 {
            return bad(format!("c must be >= 0, got {}", self.c));
        }
        if self.replay_capacity == 0 || self.warmup_transitions > self.replay_capacity {
            return bad("warmup must fit inside a nonempty replay buffer".into());
        }
        if !(self.eps.init >= self.eps.final_ && self.eps.final_ >= 0.0 && self.eps.init <= 1.0) {
            return bad("epsilon schedule needs 1 >= init >= final >= 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    pub loss: f64,
    pub q_loss: f64,
    pub sigma_loss: f64,
    pub mean_abs_td: f64,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    kind: String,
    net: NetConfig,
    adam: AdamConfig,
    adam_t: u64,
    step_count: u64,
}

const CHECKPOINT_KIND: &str = "varexplore-checkpoint";

#[derive(Debug, Clone)]
pub struct DqnAgent {
    cfg: AgentConfig,
    online: ThreeStreamNet,
    target: ThreeStreamNet,
    replay: PriorityStore,
    optimizer: AdamState,
    step_count: u64,
    explored: u64,
    acted: u64,
}

impl DqnAgent {
    pub fn new(cfg: AgentConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let online = ThreeStreamNet::new(cfg.net.clone(), seed)?;
        Ok(Self {
            target: online.clone(),
            optimizer: AdamState::new(online.num_params(), cfg.adam),
            replay: PriorityStore::new(cfg.replay_capacity, cfg.eps_p),
            online,
            cfg,
            step_count: 0,
            explored: 0,
            acted: 0,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn online(&self) -> &ThreeStreamNet {
        &self.online
    }

    pub fn online_mut(&mut self) -> &mut ThreeStreamNet {
        &mut self.online
    }

    pub fn target(&self) -> &ThreeStreamNet {
        &self.target
    }

    pub fn replay(&self) -> &PriorityStore {
        &self.replay
    }

    pub fn optimizer(&self) -> &AdamState {
        &self.optimizer
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn sync_target(&mut self) {
        self.target
            .params_mut()
            .copy_from_slice(self.online.params());
    }

    fn bonus_scores(&self, obs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let out = self.online.forward(obs)?;
        let scores = out
            .q
            .iter()
            .zip(&out.sigma)
            .map(|(q, s)| q + s.abs() * self.cfg.c)
            .collect();
        Ok((scores, out.q))
    }

    /// `argmax_b q(b) + |sigma(b)| * c` from one online forward pass.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<usize> {
        let (scores, _) = self.bonus_scores(obs)?;
        Ok(argmax_random_tie(&scores, rng))
    }

    pub fn greedy_action<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<usize> {
        Ok(argmax_random_tie(&self.online.forward(obs)?.q, rng))
    }

    /// Training-time action: the epsilon schedule on top of [`act`](Self::act).
    pub fn behaviour_action<R: Rng + ?Sized>(&mut self, obs: &[f64], rng: &mut R) -> Result<usize> {
        let eps = self.cfg.eps.at(self.step_count);
        let (scores, q) = self.bonus_scores(obs)?;
        let action = if eps > 0.0 && rng.random::<f64>() < eps {
            rng.random_range(0..scores.len())
        } else {
            argmax_random_tie(&scores, rng)
        };
        self.acted += 1;
        if !is_maximizer(&q, action) {
            self.explored += 1;
        }
        Ok(action)
    }

    /// `r` if terminal; otherwise `r + gamma * Q_target(s', b*)` with `b*`
    /// chosen by the online net (double) or the target net.
    pub fn compute_target(&self, t: &Transition) -> Result<f64> {
        if t.terminal || self.cfg.gamma == 0.0 {
            return Ok(t.reward);
        }
        let q_target = self.target.forward(&t.next_obs)?.q;
        let bootstrap = if self.cfg.double {
            let q_online = self.online.forward(&t.next_obs)?.q;
            let best = first_argmax(&q_online);
            q_target[best]
        } else {
            q_target.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        };
        Ok(t.reward + self.cfg.gamma * bootstrap)
    }

    fn beta(&self) -> Option<(f64, f64)> {
        match self.cfg.replay {
            ReplayMode::Uniform => None,
            ReplayMode::Prioritized {
                omega,
                beta0,
                beta_steps,
            } => {
                let frac = if beta_steps == 0 {
                    1.0
                } else {
                    (self.step_count as f64 / beta_steps as f64).min(1.0)
                };
                Some((omega, beta0 + (1.0 - beta0) * frac))
            }
        }
    }

    /// Mean minibatch gradient of the configured loss and one Adam step.
    /// Replay priorities of the sampled entries become `|delta| + eps_p`.
    pub fn train_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<StepMetrics> {
        let (grads, metrics, indices, deltas) = self.minibatch_gradient(rng)?;
        self.optimizer.step(self.online.params_mut(), &grads);
        if matches!(self.cfg.replay, ReplayMode::Prioritized { .. }) {
            self.replay.update_priorities(&indices, &deltas)?;
        }
        Ok(metrics)
    }

    /// Samples a minibatch and returns `(gradient, metrics, indices, td errors)`
    /// without touching parameters or priorities.
    #[allow(clippy::type_complexity)]
    pub fn minibatch_gradient<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<(Vec<f64>, StepMetrics, Vec<usize>, Vec<f64>)> {
        let need = self.cfg.warmup_transitions.max(1);
        if self.replay.len() < need {
            return Err(Error::WarmupIncomplete {
                have: self.replay.len(),
                need,
            });
        }
        let mode = match self.beta() {
            None => SampleMode::Uniform,
            Some((omega, beta)) => SampleMode::Prioritized { omega, beta },
        };
        let batch = self.replay.sample(self.cfg.minibatch, mode, rng)?;
        let k = batch.len() as f64;
        let na = self.online.num_actions();
        let mut grads = vec![0.0; self.online.num_params()];
        let mut metrics = StepMetrics {
            loss: 0.0,
            q_loss: 0.0,
            sigma_loss: 0.0,
            mean_abs_td: 0.0,
        };
        let mut indices = Vec::with_capacity(batch.len());
        let mut deltas = Vec::with_capacity(batch.len());
        let (mut dq, mut dsigma) = (vec![0.0; na], vec![0.0; na]);
        for s in &batch {
            let t = s.transition;
            let g = self.compute_target(t)?;
            let (out, cache) = self.online.forward_cached(&t.obs)?;
            let q_sa = out.q[t.action];
            let terms = self
                .cfg
                .loss
                .terms(q_sa, out.sigma[t.action], g)
                .weight_q(s.is_weight);
            dq.fill(0.0);
            dsigma.fill(0.0);
            dq[t.action] = terms.dq / k;
            dsigma[t.action] = terms.dsigma / k;
            self.online.backward(&cache, &dq, &dsigma, &mut grads)?;
            metrics.q_loss += terms.q_loss / k;
            metrics.sigma_loss += terms.sigma_loss / k;
            metrics.mean_abs_td += (g - q_sa).abs() / k;
            indices.push(s.index);
            deltas.push(g - q_sa);
        }
        metrics.loss = metrics.q_loss + metrics.sigma_loss;
        Ok((grads, metrics, indices, deltas))
    }

    /// Stores a transition, optimizes every `optimize_every` steps once the
    /// replay is warm, and copies online into target every `target_sync`
    /// steps.
    pub fn observe<R: Rng + ?Sized>(
        &mut self,
        t: Transition,
        rng: &mut R,
    ) -> Result<Option<StepMetrics>> {
        if t.action >= self.online.num_actions() {
            return Err(Error::OutOfRange {
                index: t.action,
                len: self.online.num_actions(),
            });
        }
        if !t.reward.is_finite() {
            return Err(Error::NonFinite("reward"));
        }
        self.replay.push(t);
        self.step_count += 1;
        let mut metrics = None;
        if self.replay.len() >= self.cfg.warmup_transitions.max(1)
            && self.step_count.is_multiple_of(self.cfg.optimize_every)
        {
            metrics = Some(self.train_step(rng)?);
        }
        if self.step_count.is_multiple_of(self.cfg.target_sync) {
            self.sync_target();
        }
        Ok(metrics)
    }

    /// One training episode; returns the undiscounted reward.
    pub fn train_episode<E, R>(&mut self, env: &mut E, rng: &mut R) -> Result<f64>
    where
        E: Environment + ?Sized,
        R: Rng + ?Sized,
    {
        env.reset(rng.random());
        let mut total = 0.0;
        loop {
            let obs = env.observation().to_vec();
            let action = self.behaviour_action(&obs, rng)?;
            let step = env.step(action)?;
            total += step.reward;
            let t = Transition {
                obs,
                action,
                reward: step.reward,
                next_obs: env.observation().to_vec(),
                terminal: step.terminal,
            };
            self.observe(t, rng)?;
            if step.done() {
                return Ok(total);
            }
        }
    }

    /// Greedy on q (no bonus) with an `eps_eval` chance of a random action.
    pub fn evaluate<E, R>(
        &self,
        env: &mut E,
        episodes: usize,
        eps_eval: f64,
        rng: &mut R,
    ) -> Result<EpisodeStats>
    where
        E: Environment + ?Sized,
        R: Rng + ?Sized,
    {
        let returns = run_episodes(env, episodes, eps_eval, rng, |obs, rng| {
            self.greedy_action(obs, rng)
        })?;
        Ok(EpisodeStats::from_returns(returns))
    }

    /// Fraction of observations where the bonus policy picks an action that
    /// is not greedy on q.
    pub fn exploration_rate<R: Rng + ?Sized>(
        &self,
        observations: &[Vec<f64>],
        rng: &mut R,
    ) -> Result<f64> {
        if observations.is_empty() {
            return Err(Error::Config(
                "exploration rate needs at least one observation".into(),
            ));
        }
        let mut differ = 0;
        for obs in observations {
            let (scores, q) = self.bonus_scores(obs)?;
            if !is_maximizer(&q, argmax_random_tie(&scores, rng)) {
                differ += 1;
            }
        }
        Ok(differ as f64 / observations.len() as f64)
    }

    /// Fraction of training actions since the last call that were not greedy
    /// on q.
    pub fn take_exploration_rate(&mut self) -> f64 {
        let rate = if self.acted == 0 {
            0.0
        } else {
            self.explored as f64 / self.acted as f64
        };
        self.explored = 0;
        self.acted = 0;
        rate
    }

    /// Online and target parameters, Adam moments and counters.
    pub fn save_checkpoint<W: std::io::Write>(&self, w: W) -> std::io::Result<()> {
        let header = CheckpointHeader {
            kind: CHECKPOINT_KIND.into(),
            net: self.cfg.net.clone(),
            adam: self.optimizer.config,
            adam_t: self.optimizer.t,
            step_count: self.step_count,
        };
        write_arrays(
            w,
            &header,
            &[
                self.online.params(),
                self.target.params(),
                &self.optimizer.m,
                &self.optimizer.v,
            ],
        )
    }

    /// Restores a checkpoint into an agent built with a matching network
    /// configuration. The replay buffer is left as is.
    pub fn load_checkpoint<R: std::io::Read>(&mut self, r: R) -> Result<()> {
        let (header, arrays): (CheckpointHeader, _) = read_arrays(r)?;
        if header.kind != CHECKPOINT_KIND {
            return Err(Error::Format(format!(
                "not a checkpoint: {:?}",
                header.kind
            )));
        }
        if header.net != self.cfg.net {
            return Err(Error::Config(
                "checkpoint network shape differs from agent".into(),
            ));
        }
        let [online, target, m, v]: [Vec<f64>; 4] = arrays
            .try_into()
            .map_err(|_| Error::Format("checkpoint must hold four arrays".into()))?;
        if m.len() != online.len() || v.len() != online.len() {
            return Err(Error::Format(
                "optimizer moments do not match parameters".into(),
            ));
        }
        self.online.set_params(&online)?;
        self.target.set_params(&target)?;
        self.optimizer = AdamState {
            config: header.adam,
            m,
            v,
            t: header.adam_t,
        };
        self.cfg.adam = header.adam;
        self.step_count = header.step_count;
        Ok(())
    }
}

fn first_argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
