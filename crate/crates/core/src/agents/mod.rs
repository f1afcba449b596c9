//! DQN and A2C controllers, their self-monitoring, and the episode loop.

mod a2c;
mod dqn;
mod env;
mod monitor;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use a2c::{a2c_advantage, A2cAgent, A2cLosses};
pub use dqn::{dqn_target, select_action_dqn, DqnAgent, ReplayBuffer, Transition};
pub use env::{ConstantEnv, Environment};
pub use monitor::{indication, should_trigger, PerformanceWindow, TriggerMode, TriggerPolicy};

use crate::ne::GaTier;
use crate::neuro::{param_digest, Genome, NetTopology, NeuralNet, NeuroError};
use crate::ransim::RanError;

#[derive(Debug, Error, PartialEq)]
pub enum AgentError {
    #[error(transparent)]
    Neuro(#[from] NeuroError),
    #[error(transparent)]
    Env(#[from] RanError),
    #[error("invalid agent config: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Dqn,
    A2c,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    pub lr: f64,
    pub gamma: f64,
    #[serde(default = "one")]
    pub epsilon_start: f64,
    #[serde(default = "default_epsilon_end")]
    pub epsilon_end: f64,
    /// Episodes over which epsilon decays linearly; filled in from the run
    /// length when omitted.
    #[serde(default)]
    pub epsilon_decay_episodes: Option<u32>,
    #[serde(default = "default_buffer")]
    pub buffer_capacity: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_sync")]
    pub target_sync_every: u32,
    #[serde(default = "default_target")]
    pub target_return: f64,
    #[serde(default)]
    pub trigger: TriggerPolicy,
    #[serde(default = "default_hidden")]
    pub hidden_layers: Vec<usize>,
    /// Multiplier applied to environment rewards before they enter any loss.
    #[serde(default = "default_reward_scale")]
    pub reward_scale: f64,
    #[serde(skip, default = "default_interval")]
    pub ne_interval: usize,
    #[serde(skip)]
    pub indication_override: Option<GaTier>,
}

fn default_algorithm() -> Algorithm {
    Algorithm::Dqn
}
fn one() -> f64 {
    1.0
}
fn default_epsilon_end() -> f64 {
    0.05
}
fn default_buffer() -> usize {
    10_000
}
fn default_batch() -> usize {
    32
}
fn default_sync() -> u32 {
    10
}
fn default_target() -> f64 {
    1000.0
}
fn default_hidden() -> Vec<usize> {
    vec![64]
}
fn default_reward_scale() -> f64 {
    1e-3
}
fn default_interval() -> usize {
    125
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Dqn,
            lr: 0.005,
            gamma: 0.95,
            epsilon_start: 1.0,
            epsilon_end: default_epsilon_end(),
            epsilon_decay_episodes: None,
            buffer_capacity: default_buffer(),
            batch_size: default_batch(),
            target_sync_every: default_sync(),
            target_return: default_target(),
            trigger: TriggerPolicy::default(),
            hidden_layers: default_hidden(),
            reward_scale: default_reward_scale(),
            ne_interval: default_interval(),
            indication_override: None,
        }
    }
}

impl AgentConfig {
    /// Returns the name of the first offending field.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let fail = |k: &'static str, m: String| Err((k, m));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail("lr", format!("{} must be positive", self.lr));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail("gamma", format!("{} must lie in (0, 1)", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) {
            return fail("epsilon_start", format!("{} outside [0, 1]", self.epsilon_start));
        }
        if !(0.0..=1.0).contains(&self.epsilon_end) {
            return fail("epsilon_end", format!("{} outside [0, 1]", self.epsilon_end));
        }
        if self.buffer_capacity == 0 {
            return fail("buffer_capacity", "must be positive".into());
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return fail("batch_size", format!("{} must be in [1, buffer_capacity]", self.batch_size));
        }
        if self.target_sync_every == 0 {
            return fail("target_sync_every", "must be positive".into());
        }
        if !(self.target_return > 0.0) {
            return fail("target_return", format!("{} must be positive", self.target_return));
        }
        if self.trigger.threshold < 0.0 {
            return fail("trigger.threshold", format!("{} must be non-negative", self.trigger.threshold));
        }
        if self.hidden_layers.contains(&0) {
            return fail("hidden_layers", "widths must be positive".into());
        }
        if !(self.reward_scale > 0.0) {
            return fail("reward_scale", "must be positive".into());
        }
        if self.ne_interval == 0 {
            return fail("ne_interval", "must be at least 1".into());
        }
        Ok(())
    }

    /// Linear decay from `epsilon_start` to `epsilon_end`, then flat.
    pub fn epsilon_at(&self, episode: u64) -> f64 {
        let decay = f64::from(self.epsilon_decay_episodes.unwrap_or(1).max(1));
        let frac = (episode as f64 / decay).min(1.0);
        (self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Debug)]
enum Learner {
    Dqn(DqnAgent),
    A2c(A2cAgent),
}

/// One controller with its own generator, monitor window and staged genome.
#[derive(Clone, Debug)]
pub struct Agent {
    id: usize,
    learner: Learner,
    monitor: PerformanceWindow,
    rng: ChaCha8Rng,
    cfg: AgentConfig,
    episodes: u64,
    staged: Option<Genome>,
}

impl Agent {
    pub fn new(id: usize, cfg: &AgentConfig, observation_len: usize, actions: usize, seed: u64) -> Result<Self, AgentError> {
        cfg.validate()
            .map_err(|(k, m)| AgentError::Config(format!("{k}: {m}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let learner = match cfg.algorithm {
            Algorithm::Dqn => Learner::Dqn(DqnAgent::new(cfg, observation_len, actions, &mut rng)?),
            Algorithm::A2c => Learner::A2c(A2cAgent::new(cfg, observation_len, actions, &mut rng)?),
        };
        Ok(Self::assemble(id, cfg, learner, rng))
    }

    pub fn from_dqn(id: usize, cfg: &AgentConfig, dqn: DqnAgent, seed: u64) -> Self {
        Self::assemble(id, cfg, Learner::Dqn(dqn), ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn from_a2c(id: usize, cfg: &AgentConfig, a2c: A2cAgent, seed: u64) -> Self {
        Self::assemble(id, cfg, Learner::A2c(a2c), ChaCha8Rng::seed_from_u64(seed))
    }

    fn assemble(id: usize, cfg: &AgentConfig, learner: Learner, rng: ChaCha8Rng) -> Self {
        Self {
            id,
            learner,
            monitor: PerformanceWindow::new(cfg.ne_interval),
            rng,
            cfg: cfg.clone(),
            episodes: 0,
            staged: None,
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn algorithm(&self) -> Algorithm {
        match self.learner {
            Learner::Dqn(_) => Algorithm::Dqn,
            Learner::A2c(_) => Algorithm::A2c,
        }
    }

    pub fn monitor(&self) -> &PerformanceWindow {
        &self.monitor
    }

    pub fn monitor_mut(&mut self) -> &mut PerformanceWindow {
        &mut self.monitor
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn dqn(&self) -> Option<&DqnAgent> {
        match &self.learner {
            Learner::Dqn(d) => Some(d),
            Learner::A2c(_) => None,
        }
    }

    pub fn a2c(&self) -> Option<&A2cAgent> {
        match &self.learner {
            Learner::A2c(a) => Some(a),
            Learner::Dqn(_) => None,
        }
    }

    /// Exploration rate in effect; A2C explores through its policy and reports zero.
    pub fn epsilon(&self) -> f64 {
        match &self.learner {
            Learner::Dqn(d) => d.epsilon(),
            Learner::A2c(_) => 0.0,
        }
    }

    /// The network the optimiser evolves: DQN online net or A2C actor.
    pub fn policy_net(&self) -> &NeuralNet {
        match &self.learner {
            Learner::Dqn(d) => d.online(),
            Learner::A2c(a) => a.actor(),
        }
    }

    pub fn topology(&self) -> &NetTopology {
        self.policy_net().topology()
    }

    pub fn genome(&self) -> Genome {
        self.policy_net().flatten()
    }

    /// Digest over every parameter the agent owns.
    pub fn param_digest(&self) -> u64 {
        let (a, b) = match &self.learner {
            Learner::Dqn(d) => (d.online().flatten(), d.target().flatten()),
            Learner::A2c(a) => (a.actor().flatten(), a.critic().flatten()),
        };
        let mut all = a.values().to_vec();
        all.extend_from_slice(b.values());
        param_digest(&all)
    }

    pub fn act(&mut self, obs: &[f64]) -> usize {
        match &self.learner {
            Learner::Dqn(d) => d.select_action(obs, &mut self.rng),
            Learner::A2c(a) => a.select_action(obs, &mut self.rng),
        }
    }

    /// Policy evaluation action: argmax of the policy net's outputs.
    pub fn greedy_action(&self, obs: &[f64]) -> usize {
        crate::neuro::argmax(&self.policy_net().logits(obs).expect("observation width matches network"))
    }

    /// Swaps in `genome` when the gate passed; otherwise leaves every
    /// parameter untouched. Must only be called between episodes.
    pub fn apply_genome(&mut self, genome: &Genome, gate_passed: bool) -> Result<bool, AgentError> {
        if genome.topology().is_some_and(|t| t != self.topology()) {
            return Err(NeuroError::TopologyMismatch.into());
        }
        if genome.len() != self.topology().genome_length() {
            return Err(NeuroError::LengthMismatch {
                expected: self.topology().genome_length(),
                actual: genome.len(),
            }
            .into());
        }
        if !gate_passed {
            return Ok(false);
        }
        match &mut self.learner {
            Learner::Dqn(d) => d.load_genome(genome)?,
            Learner::A2c(a) => a.load_genome(genome)?,
        }
        Ok(true)
    }

    /// Queues a genome to be applied at the start of the next episode.
    pub fn stage_genome(&mut self, genome: Genome) -> Result<(), AgentError> {
        if genome.len() != self.topology().genome_length() {
            return Err(NeuroError::LengthMismatch {
                expected: self.topology().genome_length(),
                actual: genome.len(),
            }
            .into());
        }
        self.staged = Some(genome);
        Ok(())
    }

    fn begin_episode(&mut self) -> Result<(), AgentError> {
        if let Some(g) = self.staged.take() {
            self.apply_genome(&g, true)?;
        }
        if let Learner::Dqn(d) = &mut self.learner {
            d.set_epsilon(self.cfg.epsilon_at(self.episodes));
        }
        Ok(())
    }

    fn record(&mut self, t: Transition) {
        match &mut self.learner {
            Learner::Dqn(d) => {
                d.remember(t);
                d.update(&mut self.rng);
            }
            Learner::A2c(a) => a.remember(t),
        }
    }

    fn end_episode(&mut self, ret: f64) {
        match &mut self.learner {
            Learner::Dqn(d) => d.end_episode(),
            Learner::A2c(a) => {
                a.end_episode();
            }
        }
        self.episodes += 1;
        self.monitor.push(ret);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeStats {
    /// Mean per-step reward per agent.
    pub returns: Vec<f64>,
    /// Mean per-step action-selection latency per agent, milliseconds.
    pub decision_ms: Vec<f64>,
    /// Parameter digest of each agent as the episode started.
    pub start_digests: Vec<u64>,
    /// Exploration rate each agent used.
    pub epsilons: Vec<f64>,
}

/// Runs one episode of independent learners sharing `env`. Agent `i` acts
/// for environment agent slot `i`.
pub fn run_episode(agents: &mut [Agent], env: &mut dyn Environment) -> Result<EpisodeStats, AgentError> {
    assert_eq!(agents.len(), env.agents(), "one agent per environment slot");
    for a in agents.iter_mut() {
        a.begin_episode()?;
        if a.topology().input_width() != env.observation_len() {
            return Err(AgentError::Config(format!(
                "agent {} expects {} inputs, environment provides {}",
                a.id,
                a.topology().input_width(),
                env.observation_len()
            )));
        }
    }
    let start_digests = agents.iter().map(Agent::param_digest).collect();
    let epsilons = agents.iter().map(Agent::epsilon).collect();
    env.reset();
    let n = agents.len();
    let steps = env.episode_steps();
    let mut totals = vec![0.0; n];
    let mut decision_ns = vec![0u128; n];
    let mut obs: Vec<Vec<f64>> = (0..n).map(|i| env.observe(i)).collect();
    let mut actions = vec![0usize; n];
    for t in 0..steps {
        for (i, agent) in agents.iter_mut().enumerate() {
            let start = Instant::now();
            actions[i] = agent.act(&obs[i]);
            decision_ns[i] += start.elapsed().as_nanos();
        }
        let rewards = env.step(&actions)?;
        let terminal = t + 1 == steps;
        for (i, agent) in agents.iter_mut().enumerate() {
            let next = env.observe(i);
            totals[i] += rewards[i];
            let scale = agent.cfg.reward_scale;
            agent.record(Transition {
                state: std::mem::replace(&mut obs[i], next.clone()),
                action: actions[i],
                reward: rewards[i] * scale,
                next_state: next,
                terminal,
            });
        }
    }
    let returns: Vec<f64> = totals.iter().map(|t| t / steps as f64).collect();
    for (agent, &r) in agents.iter_mut().zip(&returns) {
        agent.end_episode(r);
    }
    Ok(EpisodeStats {
        returns,
        decision_ms: decision_ns
            .iter()
            .map(|&ns| ns as f64 / 1e6 / steps as f64)
            .collect(),
        start_digests,
        epsilons,
    })
}
