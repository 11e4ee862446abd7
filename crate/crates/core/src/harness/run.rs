use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{BudgetUnit, EnvKind, ExperimentSpec};
use super::report::{EvalReport, SeedResult};
use crate::dqn::DqnAgent;
use crate::envs::{Cartpole, Chain, Environment, Step};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::tabular::{Discretizer, OneHotIndexer, StateIndexer, TabularAgent};

enum Indexer {
    Grid(Discretizer),
    OneHot(OneHotIndexer),
}

impl StateIndexer for Indexer {
    fn num_states(&self) -> usize {
        match self {
            Indexer::Grid(d) => d.num_states(),
            Indexer::OneHot(o) => o.num_states(),
        }
    }

    fn index(&self, obs: &[f64]) -> Result<usize> {
        match self {
            Indexer::Grid(d) => d.index(obs),
            Indexer::OneHot(o) => o.index(obs),
        }
    }
}

enum Learner {
    Tabular(Box<TabularAgent<Indexer>>),
    Deep(Box<DqnAgent>),
}

impl Learner {
    fn build(spec: &ExperimentSpec, seed: u64) -> Result<Self> {
        if spec.agent.is_tabular() {
            let (cfg, alpha) = spec.tabular_setup()?;
            let indexer = match spec.env {
                EnvKind::Cartpole => Indexer::Grid(spec.discretizer()?),
                EnvKind::Chain { n, .. } => Indexer::OneHot(OneHotIndexer(n)),
            };
            Ok(Learner::Tabular(Box::new(TabularAgent::new(
                indexer,
                spec.env.num_actions(),
                cfg,
                alpha,
            )?)))
        } else {
            Ok(Learner::Deep(Box::new(DqnAgent::new(
                spec.deep_config()?,
                seed,
            )?)))
        }
    }

    fn train_episode(&mut self, env: &mut dyn Environment, rng: &mut ChaCha8Rng) -> Result<f64> {
        match self {
            Learner::Tabular(a) => a.train_episode(env, rng),
            Learner::Deep(a) => a.train_episode(env, rng),
        }
    }

    fn evaluate(
        &self,
        env: &mut dyn Environment,
        episodes: usize,
        eps: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<f64> {
        let stats = match self {
            Learner::Tabular(a) => a.evaluate(env, episodes, eps, rng)?,
            Learner::Deep(a) => a.evaluate(env, episodes, eps, rng)?,
        };
        Ok(stats.mean())
    }

    fn take_exploration_rate(&mut self) -> f64 {
        match self {
            Learner::Tabular(a) => a.take_exploration_rate(),
            Learner::Deep(a) => a.take_exploration_rate(),
        }
    }
}

fn make_env(kind: EnvKind) -> Box<dyn Environment + Send> {
    match kind {
        EnvKind::Cartpole => Box::new(Cartpole::new()),
        EnvKind::Chain { n, max_steps } => Box::new(Chain::new(n, max_steps)),
    }
}

/// Counts environment steps across episodes.
struct Counted {
    inner: Box<dyn Environment + Send>,
    steps: u64,
}

impl Environment for Counted {
    fn num_actions(&self) -> usize {
        self.inner.num_actions()
    }

    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    fn reset(&mut self, seed: u64) {
        self.inner.reset(seed)
    }

    fn observation(&self) -> &[f64] {
        self.inner.observation()
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        let s = self.inner.step(action)?;
        self.steps += 1;
        Ok(s)
    }
}

/// Evaluation randomness depends only on (seed, point, eps_eval), so adding
/// or removing evaluation settings never perturbs the others.
fn eval_rng(seed: u64, point: u64, eps_eval: f64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ point);
    rng.set_stream(eps_eval.to_bits());
    rng
}

/// One seed: per evaluation setting, the (point, result) series.
fn run_seed(
    spec: &ExperimentSpec,
    seed: u64,
    eps_evals: &[f64],
) -> Result<Vec<Vec<(u64, SeedResult)>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut learner = Learner::build(spec, seed)?;
    let mut env = Counted {
        inner: make_env(spec.env),
        steps: 0,
    };
    let mut eval_env = make_env(spec.env);
    let mut out = vec![Vec::new(); eps_evals.len()];
    let mut episodes = 0u64;
    let mut next = spec.eval_every;
    loop {
        learner.train_episode(&mut env, &mut rng)?;
        episodes += 1;
        let progress = match spec.unit {
            BudgetUnit::Episodes => episodes,
            BudgetUnit::Steps => env.steps,
        };
        if progress >= next {
            let rate = learner.take_exploration_rate();
            let mut rets = Vec::with_capacity(eps_evals.len());
            for &eps in eps_evals {
                let mut r = eval_rng(seed, next, eps);
                rets.push(learner.evaluate(eval_env.as_mut(), spec.eval_episodes, eps, &mut r)?);
            }
            // a long episode may cross several points; they share one evaluation
            while next <= progress.min(spec.budget) {
                for (series, &ret) in out.iter_mut().zip(&rets) {
                    series.push((
                        next,
                        SeedResult {
                            seed,
                            ret,
                            exploration_rate: rate,
                        },
                    ));
                }
                next += spec.eval_every;
            }
        }
        if progress >= spec.budget {
            return Ok(out);
        }
    }
}

/// Runs every seed (in parallel under [`Execution::Parallel`]) and
/// aggregates per evaluation point, once per entry of `eps_evals`. The
/// result is fully determined by the spec.
pub fn run_experiment_evals(
    spec: &ExperimentSpec,
    eps_evals: &[f64],
    exec: Execution,
) -> Result<Vec<Vec<EvalReport>>> {
    spec.validate()?;
    if let Some(e) = eps_evals.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(Error::Config(format!(
            "eps_eval must lie in [0, 1], got {e}"
        )));
    }
    let per_seed = exec.map(spec.seeds.clone(), |seed| run_seed(spec, seed, eps_evals));
    let per_seed: Vec<_> = per_seed.into_iter().collect::<Result<_>>()?;
    let mut streams = Vec::with_capacity(eps_evals.len());
    for k in 0..eps_evals.len() {
        let points: Vec<u64> = per_seed[0][k].iter().map(|(p, _)| *p).collect();
        let mut reports = Vec::with_capacity(points.len());
        for (i, &point) in points.iter().enumerate() {
            let seeds = per_seed.iter().map(|s| s[k][i].1).collect();
            reports.push(EvalReport::from_seeds(point, seeds));
        }
        streams.push(reports);
    }
    Ok(streams)
}

/// [`run_experiment_evals`] at the spec's own `eps_eval`.
pub fn run_experiment(spec: &ExperimentSpec, exec: Execution) -> Result<Vec<EvalReport>> {
    Ok(run_experiment_evals(spec, &[spec.eps_eval], exec)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(text: &str) -> ExperimentSpec {
        ExperimentSpec::parse(text.as_bytes()).unwrap()
    }

    #[test]
    fn chain_tabular_reaches_optimum() {
        let s = spec("agent = tabular-eg\nenv = chain\nseeds = 0..9\nbudget = 300\neval_every = 100\nalpha = 1\ngamma = 0.9\neps_decay = 100\n");
        let reports = run_experiment(&s, Execution::Sequential).unwrap();
        assert_eq!(
            reports.iter().map(|r| r.eval_point).collect::<Vec<_>>(),
            vec![100, 200, 300]
        );
        assert!(reports.iter().all(|r| r.seeds.len() == 9));
        assert_eq!(reports[2].mean, 1.0);
    }

    #[test]
    fn deterministic_and_execution_independent() {
        let s = spec("agent = tabular-ve-combined\nseeds = 0,1,2\nbudget = 60\neval_every = 20\neval_episodes = 2\n");
        let a = run_experiment(&s, Execution::Parallel).unwrap();
        let b = run_experiment(&s, Execution::Sequential).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn multi_eval_matches_single() {
        let s = spec("agent = tabular-eg\nseeds = 4\nbudget = 40\neval_every = 20\neval_episodes = 3\neps_eval = 0.05\n");
        let both = run_experiment_evals(&s, &[0.0, 0.05], Execution::Sequential).unwrap();
        assert_eq!(both[1], run_experiment(&s, Execution::Sequential).unwrap());
    }

    #[test]
    fn step_budget_grid() {
        let s = spec("agent = vdqn\nenv = chain\nseeds = 0,1\nunit = steps\nbudget = 300\neval_every = 100\nwarmup = 50\ntrunk = 8\n");
        let reports = run_experiment(&s, Execution::Sequential).unwrap();
        assert_eq!(
            reports.iter().map(|r| r.eval_point).collect::<Vec<_>>(),
            vec![100, 200, 300]
        );
        for r in &reports {
            assert!(r
                .seeds
                .iter()
                .all(|x| (0.0..=1.0).contains(&x.exploration_rate)));
        }
    }

    #[test]
    fn deep_agents_run_on_cartpole() {
        for agent in ["ddqn", "tddqn"] {
            let s = spec(&format!("agent = {agent}\nseeds = 0\nbudget = 4\neval_every = 2\neval_episodes = 1\nwarmup = 20\ntrunk = 8\n"));
            let r = run_experiment(&s, Execution::Sequential).unwrap();
            assert_eq!(r.len(), 2);
            assert!(r.iter().all(|x| (1.0..=500.0).contains(&x.mean)));
        }
    }
}
