use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use crate::dqn::{AgentConfig, ReplayMode};
use crate::envs::{THETA_THRESHOLD, X_THRESHOLD};
use crate::error::{Error, Result};
use crate::neural::{Activation, NetConfig};
use crate::tabular::{Discretizer, EpsSchedule, ExplorationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    Cartpole,
    Chain { n: usize, max_steps: u32 },
}

impl EnvKind {
    pub fn obs_dim(&self) -> usize {
        match self {
            EnvKind::Cartpole => 4,
            EnvKind::Chain { n, .. } => *n,
        }
    }

    pub fn num_actions(&self) -> usize {
        match self {
            EnvKind::Cartpole => 3,
            EnvKind::Chain { .. } => 2,
        }
    }
}

/// How the variance-estimation tabular agent seeds its sigma statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VeInit {
    Sigma0,
    Warmup,
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    TabularEG,
    TabularVE(VeInit),
    DeepDDQN,
    VDQN,
    TDDQN,
}

impl AgentKind {
    pub fn is_tabular(&self) -> bool {
        matches!(self, AgentKind::TabularEG | AgentKind::TabularVE(_))
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "tabular-eg" => AgentKind::TabularEG,
            "tabular-ve-sigma0" => AgentKind::TabularVE(VeInit::Sigma0),
            "tabular-ve-warmup" => AgentKind::TabularVE(VeInit::Warmup),
            "tabular-ve-combined" => AgentKind::TabularVE(VeInit::Combined),
            "ddqn" => AgentKind::DeepDDQN,
            "vdqn" => AgentKind::VDQN,
            "tddqn" => AgentKind::TDDQN,
            _ => return Err(Error::Config(format!("unknown agent kind `{s}`"))),
        })
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgentKind::TabularEG => "tabular-eg",
            AgentKind::TabularVE(VeInit::Sigma0) => "tabular-ve-sigma0",
            AgentKind::TabularVE(VeInit::Warmup) => "tabular-ve-warmup",
            AgentKind::TabularVE(VeInit::Combined) => "tabular-ve-combined",
            AgentKind::DeepDDQN => "ddqn",
            AgentKind::VDQN => "vdqn",
            AgentKind::TDDQN => "tddqn",
        })
    }
}

/// Whether the budget and the evaluation cadence count episodes or
/// environment steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetUnit {
    Episodes,
    Steps,
}

/// A complete experiment description. Built from a flat `key = value` file
/// plus overrides; keys not consumed by the spec itself are agent
/// hyperparameters, checked when the agent is configured.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub env: EnvKind,
    pub agent: AgentKind,
    pub seeds: Vec<u64>,
    pub budget: u64,
    pub unit: BudgetUnit,
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub eps_eval: f64,
    pub overrides: BTreeMap<String, String>,
}

const TABULAR_KEYS: &[&str] = &[
    "alpha",
    "c",
    "sigma0",
    "gamma",
    "eps_init",
    "eps_final",
    "eps_decay",
    "x_dot_limit",
    "theta_dot_limit",
];

const DEEP_KEYS: &[&str] = &[
    "c",
    "gamma",
    "lr",
    "adam_eps",
    "minibatch",
    "target_sync",
    "double",
    "optimize_every",
    "warmup",
    "capacity",
    "replay",
    "omega",
    "beta0",
    "beta_steps",
    "eps_p",
    "eps_init",
    "eps_final",
    "eps_decay",
    "trunk",
    "head_hidden",
    "activation",
];

impl ExperimentSpec {
    /// Defaults for everything but the agent: Cartpole, seeds 0..5, 20k
    /// episodes, evaluation every 200 episodes over 10 greedy episodes.
    pub fn new(agent: AgentKind) -> Self {
        Self {
            env: EnvKind::Cartpole,
            agent,
            seeds: (0..5).collect(),
            budget: 20_000,
            unit: BudgetUnit::Episodes,
            eval_every: 200,
            eval_episodes: 10,
            eps_eval: 0.0,
            overrides: BTreeMap::new(),
        }
    }

    /// Reads `key = value` lines; `#` starts a comment.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io("config", e))?;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        Self::from_pairs(pairs)
    }

    /// Builds a spec from ordered pairs; later pairs win.
    pub fn from_pairs<I: IntoIterator<Item = (String, String)>>(pairs: I) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, v) in pairs {
            map.insert(k, v);
        }
        let agent: AgentKind = map
            .remove("agent")
            .ok_or_else(|| Error::Config("missing `agent`".into()))?
            .parse()?;
        let mut spec = Self::new(agent);
        let chain_n = take(&mut map, "chain_length")?.unwrap_or(3usize);
        let chain_cap = take(&mut map, "chain_max_steps")?.unwrap_or(20u32);
        if let Some(env) = map.remove("env") {
            spec.env = match env.as_str() {
                "cartpole" => EnvKind::Cartpole,
                "chain" => {
                    if chain_n < 2 {
                        return Err(Error::Config("chain_length must be at least 2".into()));
                    }
                    EnvKind::Chain {
                        n: chain_n,
                        max_steps: chain_cap,
                    }
                }
                other => return Err(Error::Config(format!("unknown env `{other}`"))),
            };
        }
        if let Some(s) = map.remove("seeds") {
            spec.seeds = parse_seeds(&s)?;
        }
        if let Some(u) = map.remove("unit") {
            spec.unit = match u.as_str() {
                "episodes" => BudgetUnit::Episodes,
                "steps" => BudgetUnit::Steps,
                other => {
                    return Err(Error::Config(format!(
                        "unit must be episodes or steps, got `{other}`"
                    )))
                }
            };
        }
        if let Some(b) = take(&mut map, "budget")? {
            spec.budget = b;
        }
        if let Some(e) = take(&mut map, "eval_every")? {
            spec.eval_every = e;
        }
        if let Some(e) = take(&mut map, "eval_episodes")? {
            spec.eval_episodes = e;
        }
        if let Some(e) = take(&mut map, "eps_eval")? {
            spec.eps_eval = e;
        }
        spec.overrides = map;
        spec.validate()?;
        Ok(spec)
    }

    /// Applies `key=value` strings on top of this spec.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut pairs = self.to_pairs();
        for o in overrides {
            let (k, v) = o.as_ref().split_once('=').ok_or_else(|| {
                Error::Config(format!("override `{}` is not key=value", o.as_ref()))
            })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        Self::from_pairs(pairs)
    }

    fn to_pairs(&self) -> Vec<(String, String)> {
        let mut p = vec![("agent".to_string(), self.agent.to_string())];
        match self.env {
            EnvKind::Cartpole => p.push(("env".into(), "cartpole".into())),
            EnvKind::Chain { n, max_steps } => {
                p.push(("env".into(), "chain".into()));
                p.push(("chain_length".into(), n.to_string()));
                p.push(("chain_max_steps".into(), max_steps.to_string()));
            }
        }
        let seeds: Vec<String> = self.seeds.iter().map(|s| s.to_string()).collect();
        p.push(("seeds".into(), seeds.join(",")));
        let unit = match self.unit {
            BudgetUnit::Episodes => "episodes",
            BudgetUnit::Steps => "steps",
        };
        p.push(("unit".into(), unit.into()));
        p.push(("budget".into(), self.budget.to_string()));
        p.push(("eval_every".into(), self.eval_every.to_string()));
        p.push(("eval_episodes".into(), self.eval_episodes.to_string()));
        p.push(("eps_eval".into(), self.eps_eval.to_string()));
        p.extend(self.overrides.iter().map(|(k, v)| (k.clone(), v.clone())));
        p
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.budget == 0 {
            return Err(Error::Config("budget must be positive".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be positive".into()));
        }
        if self.eval_episodes == 0 {
            return Err(Error::Config("eval_episodes must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.eps_eval) {
            return Err(Error::Config(format!(
                "eps_eval must lie in [0, 1], got {}",
                self.eps_eval
            )));
        }
        let allowed = if self.agent.is_tabular() {
            TABULAR_KEYS
        } else {
            DEEP_KEYS
        };
        if let Some(k) = self
            .overrides
            .keys()
            .find(|k| !allowed.contains(&k.as_str()))
        {
            return Err(Error::Config(format!(
                "`{k}` is not a setting of agent {}",
                self.agent
            )));
        }
        if self.agent.is_tabular() {
            self.tabular_setup()?;
        } else {
            self.deep_config()?;
        }
        Ok(())
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.overrides
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
            })
            .transpose()
    }

    /// Tabular exploration preset with overrides applied, plus the step
    /// size (default 0.1).
    pub fn tabular_setup(&self) -> Result<(ExplorationConfig, f64)> {
        let mut cfg = match self.agent {
            AgentKind::TabularEG => ExplorationConfig::eps_greedy(),
            AgentKind::TabularVE(VeInit::Sigma0) => ExplorationConfig::ve_sigma0(),
            AgentKind::TabularVE(VeInit::Warmup) => ExplorationConfig::ve_warmup(),
            AgentKind::TabularVE(VeInit::Combined) => ExplorationConfig::ve_combined(),
            _ => {
                return Err(Error::Config(format!(
                    "{} is not a tabular agent",
                    self.agent
                )))
            }
        };
        if let Some(c) = self.get("c")? {
            cfg.c = c;
        }
        if let Some(s) = self.get("sigma0")? {
            cfg.sigma0 = s;
        }
        if let Some(g) = self.get("gamma")? {
            cfg.gamma = g;
        }
        cfg.eps = EpsSchedule::new(
            self.get("eps_init")?.unwrap_or(cfg.eps.init),
            self.get("eps_final")?.unwrap_or(cfg.eps.final_),
            self.get("eps_decay")?.unwrap_or(cfg.eps.decay_episodes),
        )?;
        cfg.validate()?;
        let alpha = self.get("alpha")?.unwrap_or(0.1);
        crate::varcore::check_alpha(alpha)
            .map_err(|_| Error::Config(format!("alpha must lie in (0, 1], got {alpha}")))?;
        Ok((cfg, alpha))
    }

    /// Cartpole grid with the velocity clamp ranges overridable.
    pub fn discretizer(&self) -> Result<Discretizer> {
        let xd: f64 = self.get("x_dot_limit")?.unwrap_or(3.0);
        let td: f64 = self.get("theta_dot_limit")?.unwrap_or(3.5);
        Discretizer::new(
            vec![12, 8, 16, 12],
            vec![-X_THRESHOLD, -xd, -THETA_THRESHOLD, -td],
            vec![X_THRESHOLD, xd, THETA_THRESHOLD, td],
        )
    }

    pub fn deep_config(&self) -> Result<AgentConfig> {
        let mut net = NetConfig::desk(self.env.obs_dim(), self.env.num_actions());
        if let Some(t) = self.overrides.get("trunk") {
            net.trunk = parse_layers(t)?;
        }
        if let Some(h) = self.overrides.get("head_hidden") {
            net.head_hidden = parse_layers(h)?;
        }
        if let Some(a) = self.overrides.get("activation") {
            net.activation = match a.as_str() {
                "relu" => Activation::Relu,
                "tanh" => Activation::Tanh,
                "identity" => Activation::Identity,
                other => return Err(Error::Config(format!("unknown activation `{other}`"))),
            };
        }
        let mut cfg = match self.agent {
            AgentKind::DeepDDQN => AgentConfig::ddqn(net),
            AgentKind::VDQN => AgentConfig::vdqn(net),
            AgentKind::TDDQN => AgentConfig::tddqn(net),
            _ => return Err(Error::Config(format!("{} is not a deep agent", self.agent))),
        };
        macro_rules! set {
            ($key:literal, $field:expr) => {
                if let Some(v) = self.get($key)? {
                    $field = v;
                }
            };
        }
        set!("c", cfg.c);
        set!("gamma", cfg.gamma);
        set!("lr", cfg.adam.lr);
        set!("adam_eps", cfg.adam.eps);
        set!("minibatch", cfg.minibatch);
        set!("target_sync", cfg.target_sync);
        set!("double", cfg.double);
        set!("optimize_every", cfg.optimize_every);
        set!("warmup", cfg.warmup_transitions);
        set!("capacity", cfg.replay_capacity);
        set!("eps_p", cfg.eps_p);
        set!("eps_init", cfg.eps.init);
        set!("eps_final", cfg.eps.final_);
        set!("eps_decay", cfg.eps.decay_steps);
        let (mut omega, mut beta0, mut beta_steps) = match cfg.replay {
            ReplayMode::Prioritized {
                omega,
                beta0,
                beta_steps,
            } => (omega, beta0, beta_steps),
            ReplayMode::Uniform => match ReplayMode::DEFAULT_PRIORITIZED {
                ReplayMode::Prioritized {
                    omega,
                    beta0,
                    beta_steps,
                } => (omega, beta0, beta_steps),
                ReplayMode::Uniform => unreachable!(),
            },
        };
        set!("omega", omega);
        set!("beta0", beta0);
        set!("beta_steps", beta_steps);
        cfg.replay = match self.overrides.get("replay").map(String::as_str) {
            None | Some("prioritized") => ReplayMode::Prioritized {
                omega,
                beta0,
                beta_steps,
            },
            Some("uniform") => ReplayMode::Uniform,
            Some(other) => {
                return Err(Error::Config(format!(
                    "replay must be uniform or prioritized, got `{other}`"
                )))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn take<T: FromStr>(map: &mut BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    map.remove(key)
        .map(|v| {
            v.parse()
                .map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
        })
        .transpose()
}

/// `0,1,2` or a half-open range `0..5`.
fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("bad seed list `{s}`"));
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        return Ok((a..b).collect());
    }
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| bad()))
        .collect()
}

fn parse_layers(s: &str) -> Result<Vec<usize>> {
    if s.trim().is_empty() {
        return Ok(vec![]);
    }
    s.split(',')
        .map(|x| match x.trim().parse() {
            Ok(0) | Err(_) => Err(Error::Config(format!("bad layer list `{s}`"))),
            Ok(n) => Ok(n),
        })
        .collect()
}
