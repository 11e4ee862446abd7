use rand::Rng;

use super::{QSigmaTable, StateIndexer};
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::select::{argmax_random_tie, is_maximizer, run_episodes, EpisodeStats};
use crate::varcore::check_alpha;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExplorationMode {
    EpsGreedy,
    /// Greedy on `q + c * sigma`.
    VarianceEstimation,
}

/// Exploration rate decaying linearly per episode from `init` to `final_`
/// over `decay_episodes`, then held.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsSchedule {
    pub init: f64,
    pub final_: f64,
    pub decay_episodes: u64,
}

impl EpsSchedule {
    pub const OFF: EpsSchedule = EpsSchedule {
        init: 0.0,
        final_: 0.0,
        decay_episodes: 0,
    };

    pub fn new(init: f64, final_: f64, decay_episodes: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&init) || !(0.0..=1.0).contains(&final_) || final_ > init {
            return Err(Error::Config(format!(
                "epsilon schedule needs 1 >= init >= final >= 0, got {init} -> {final_}"
            )));
        }
        Ok(Self {
            init,
            final_,
            decay_episodes,
        })
    }

    pub fn at(&self, episode: u64) -> f64 {
        if episode >= self.decay_episodes {
            return self.final_;
        }
        let frac = episode as f64 / self.decay_episodes as f64;
        self.init + (self.final_ - self.init) * frac
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplorationConfig {
    pub mode: ExplorationMode,
    /// Weight of the sigma bonus.
    pub c: f64,
    /// Prior sigma of unvisited state-action pairs.
    pub sigma0: f64,
    pub eps: EpsSchedule,
    pub gamma: f64,
}

impl ExplorationConfig {
    /// Epsilon-greedy baseline: 1.0 -> 0.01 over 5000 episodes.
    pub fn eps_greedy() -> Self {
        Self {
            mode: ExplorationMode::EpsGreedy,
            c: 0.0,
            sigma0: 0.0,
            eps: EpsSchedule {
                init: 1.0,
                final_: 0.01,
                decay_episodes: 5000,
            },
            gamma: 1.0,
        }
    }

    /// Large prior sigma, no epsilon phase.
    pub fn ve_sigma0() -> Self {
        Self {
            mode: ExplorationMode::VarianceEstimation,
            c: 1.5,
            sigma0: 5000.0,
            eps: EpsSchedule::OFF,
            gamma: 1.0,
        }
    }

    /// Epsilon warm-up decaying to zero, zero prior sigma.
    pub fn ve_warmup() -> Self {
        Self {
            mode: ExplorationMode::VarianceEstimation,
            c: 0.5,
            sigma0: 0.0,
            eps: EpsSchedule {
                init: 1.0,
                final_: 0.0,
                decay_episodes: 5000,
            },
            gamma: 1.0,
        }
    }

    /// Epsilon warm-up together with the large prior sigma.
    pub fn ve_combined() -> Self {
        Self {
            sigma0: 5000.0,
            ..Self::ve_warmup()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c.is_nan() || self.c < 0.0 {
            return Err(Error::Config(format!(
                "bonus weight c must be >= 0, got {}",
                self.c
            )));
        }
        if self.sigma0.is_nan() || self.sigma0 < 0.0 {
            return Err(Error::Config(format!(
                "sigma0 must be >= 0, got {}",
                self.sigma0
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!(
                "gamma must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        EpsSchedule::new(self.eps.init, self.eps.final_, self.eps.decay_episodes).map(|_| ())
    }
}

/// `argmax_a q[s][a] + c * sigma[s][a]`, ties broken uniformly.
pub fn select_action_ve<R: Rng + ?Sized>(
    table: &QSigmaTable,
    s: usize,
    c: f64,
    rng: &mut R,
) -> usize {
    let scores: Vec<f64> = table
        .q_row(s)
        .iter()
        .zip(table.sigma_row(s))
        .map(|(q, sigma)| q + sigma * c)
        .collect();
    argmax_random_tie(&scores, rng)
}

/// Uniform random action with probability `eps`, otherwise greedy on q.
pub fn select_action_egreedy<R: Rng + ?Sized>(
    table: &QSigmaTable,
    s: usize,
    eps: f64,
    rng: &mut R,
) -> usize {
    if eps > 0.0 && rng.random::<f64>() < eps {
        rng.random_range(0..table.num_actions())
    } else {
        argmax_random_tie(table.q_row(s), rng)
    }
}

/// Q-learning agent over a discretized state space.
#[derive(Debug, Clone)]
pub struct TabularAgent<I> {
    table: QSigmaTable,
    indexer: I,
    cfg: ExplorationConfig,
    alpha: f64,
    episodes: u64,
    explored: u64,
    acted: u64,
}

impl<I: StateIndexer> TabularAgent<I> {
    pub fn new(indexer: I, num_actions: usize, cfg: ExplorationConfig, alpha: f64) -> Result<Self> {
        cfg.validate()?;
        check_alpha(alpha)?;
        Ok(Self {
            table: QSigmaTable::new(indexer.num_states(), num_actions, cfg.sigma0),
            indexer,
            cfg,
            alpha,
            episodes: 0,
            explored: 0,
            acted: 0,
        })
    }

    pub fn table(&self) -> &QSigmaTable {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut QSigmaTable {
        &mut self.table
    }

    pub fn config(&self) -> &ExplorationConfig {
        &self.cfg
    }

    pub fn episodes_trained(&self) -> u64 {
        self.episodes
    }

    pub fn epsilon(&self) -> f64 {
        self.cfg.eps.at(self.episodes)
    }

    fn behaviour_action<R: Rng + ?Sized>(&self, s: usize, eps: f64, rng: &mut R) -> usize {
        match self.cfg.mode {
            ExplorationMode::EpsGreedy => select_action_egreedy(&self.table, s, eps, rng),
            ExplorationMode::VarianceEstimation => {
                if eps > 0.0 && rng.random::<f64>() < eps {
                    rng.random_range(0..self.table.num_actions())
                } else {
                    select_action_ve(&self.table, s, self.cfg.c, rng)
                }
            }
        }
    }

    /// Runs one training episode and returns its undiscounted reward.
    ///
    /// The learning target is `r` on termination and
    /// `r + gamma * max_b q[s'][b]` otherwise, including at truncation.
    pub fn train_episode<E, R>(&mut self, env: &mut E, rng: &mut R) -> Result<f64>
    where
        E: Environment + ?Sized,
        R: Rng + ?Sized,
    {
        if env.num_actions() != self.table.num_actions() {
            return Err(Error::DimensionMismatch {
                expected: self.table.num_actions(),
                got: env.num_actions(),
            });
        }
        let eps = self.epsilon();
        env.reset(rng.random());
        let mut s = self.indexer.index(env.observation())?;
        let mut total = 0.0;
        loop {
            let a = self.behaviour_action(s, eps, rng);
            self.acted += 1;
            if !is_maximizer(self.table.q_row(s), a) {
                self.explored += 1;
            }
            let step = env.step(a)?;
            let s_next = self.indexer.index(env.observation())?;
            let g = if step.terminal {
                step.reward
            } else {
                step.reward + self.cfg.gamma * self.table.max_q(s_next)
            };
            self.table.update(s, a, g, self.alpha)?;
            total += step.reward;
            if step.done() {
                break;
            }
            s = s_next;
        }
        self.episodes += 1;
        Ok(total)
    }

    /// Greedy action on q, ties broken uniformly.
    pub fn greedy_action<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<usize> {
        let s = self.indexer.index(obs)?;
        Ok(argmax_random_tie(self.table.q_row(s), rng))
    }

    /// Frozen-table evaluation: greedy on q with an `eps_eval` chance of a
    /// uniform random action.
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

    /// Fraction of training actions since the last call that were not
    /// greedy with respect to q at the time they were taken.
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
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{Cartpole, Chain};
    use crate::tabular::{Discretizer, OneHotIndexer};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table_with(q: &[f64], sigma: &[f64]) -> QSigmaTable {
        let mut t = QSigmaTable::new(1, q.len(), 0.0);
        for a in 0..q.len() {
            t.set(0, a, q[a], sigma[a]);
        }
        t
    }

    #[test]
    fn ve_selection_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            select_action_ve(&table_with(&[1.0, 0.0], &[0.0, 0.0]), 0, 5.0, &mut rng),
            0
        );
        assert_eq!(
            select_action_ve(&table_with(&[1.0, 0.0], &[0.0, 20.0]), 0, 0.1, &mut rng),
            1
        );
        assert_eq!(
            select_action_ve(
                &table_with(&[0.2, 0.7, 0.1], &[9.0, 0.0, 3.0]),
                0,
                0.0,
                &mut rng
            ),
            1
        );
    }

    #[test]
    fn egreedy_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = table_with(&[0.0, 3.0, 1.0], &[0.0; 3]);
        assert_eq!(select_action_egreedy(&t, 0, 0.0, &mut rng), 1);

        let n = 10_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[select_action_egreedy(&t, 0, 1.0, &mut rng)] += 1;
        }
        let (p, nf) = (1.0 / 3.0, n as f64);
        let sd = (nf * p * (1.0 - p)).sqrt();
        assert!(
            counts
                .iter()
                .all(|&c| (c as f64 - nf * p).abs() <= 3.0 * sd),
            "{counts:?}"
        );

        let t = table_with(&[1.0, 0.0], &[0.0; 2]);
        let zeros = (0..n)
            .filter(|_| select_action_egreedy(&t, 0, 0.5, &mut rng) == 0)
            .count();
        let sd = (nf * 0.75 * 0.25).sqrt();
        assert!((zeros as f64 - 0.75 * nf).abs() <= 3.0 * sd, "{zeros}");
    }

    #[test]
    fn greedy_ve_equals_greedy_egreedy() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut t = QSigmaTable::new(50, 3, 0.0);
        for s in 0..50 {
            for a in 0..3 {
                t.set(
                    s,
                    a,
                    rng.random_range(-1.0..1.0),
                    rng.random_range(0.0..5.0),
                );
            }
        }
        for s in 0..50 {
            assert_eq!(
                select_action_ve(&t, s, 0.0, &mut rng),
                select_action_egreedy(&t, s, 0.0, &mut rng)
            );
        }
    }

    #[test]
    fn untried_actions_win_under_large_prior() {
        // q <= 500 with a visited sigma far below the prior loses to 7500
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut t = QSigmaTable::new(1, 3, 5000.0);
        t.set(0, 0, 500.0, 10.0);
        t.set(0, 2, 450.0, 100.0);
        assert_eq!(select_action_ve(&t, 0, 1.5, &mut rng), 1);
    }

    #[test]
    fn chain_values_converge_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = ExplorationConfig {
            eps: EpsSchedule {
                init: 1.0,
                final_: 1.0,
                decay_episodes: 0,
            },
            ..ExplorationConfig::eps_greedy()
        };
        let mut agent = TabularAgent::new(OneHotIndexer(3), 2, cfg, 1.0).unwrap();
        let mut env = Chain::new(3, 50);
        for _ in 0..200 {
            agent.train_episode(&mut env, &mut rng).unwrap();
        }
        let v = env.optimal_values(1.0);
        let t = agent.table();
        assert_eq!(t.q_row(0)[0], 1.0);
        assert_eq!(t.q_row(1)[0], 1.0);
        for s in 0..2 {
            assert!((t.max_q(s) - v[s]).abs() < 1e-9);
        }
    }

    #[test]
    fn cartpole_episode_returns_are_bounded_and_sigma_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut agent = TabularAgent::new(
            Discretizer::cartpole(),
            3,
            ExplorationConfig::ve_combined(),
            0.1,
        )
        .unwrap();
        let mut env = Cartpole::new();
        for _ in 0..300 {
            let r = agent.train_episode(&mut env, &mut rng).unwrap();
            assert!((1.0..=500.0).contains(&r));
        }
        let t = agent.table();
        for s in 0..t.num_states() {
            assert!(t.sigma_row(s).iter().all(|&x| x >= 0.0));
        }
        assert_eq!(agent.episodes_trained(), 300);
    }

    #[test]
    fn schedule_is_linear_then_flat() {
        let s = EpsSchedule::new(1.0, 0.01, 5000).unwrap();
        assert_eq!(s.at(0), 1.0);
        assert!((s.at(2500) - 0.505).abs() < 1e-12);
        assert_eq!(s.at(5000), 0.01);
        assert_eq!(s.at(90_000), 0.01);
        assert!(EpsSchedule::new(0.1, 0.5, 10).is_err());
    }

    #[test]
    fn evaluation_is_deterministic_for_fixed_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut agent = TabularAgent::new(
            Discretizer::cartpole(),
            3,
            ExplorationConfig::eps_greedy(),
            0.1,
        )
        .unwrap();
        let mut env = Cartpole::new();
        for _ in 0..50 {
            agent.train_episode(&mut env, &mut rng).unwrap();
        }
        let a = agent
            .evaluate(&mut env, 5, 0.0, &mut ChaCha8Rng::seed_from_u64(7))
            .unwrap();
        let b = agent
            .evaluate(&mut env, 5, 0.0, &mut ChaCha8Rng::seed_from_u64(7))
            .unwrap();
        assert_eq!(a, b);
        assert!(a.summary.min <= a.mean() && a.mean() <= a.summary.max);
    }
}
