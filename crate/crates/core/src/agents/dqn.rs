use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{AgentConfig, AgentError};
use crate::neuro::{argmax, q_regression_loss, Genome, NetTopology, NeuralNet, OutputHead, QTarget};

/// Epsilon-greedy choice over the net's Q-values; ties go to the lowest index.
pub fn select_action_dqn<R: Rng + ?Sized>(net: &NeuralNet, obs: &[f64], epsilon: f64, rng: &mut R) -> usize {
    let explore: f64 = rng.random();
    let actions = net.topology().output_width();
    if explore < epsilon {
        rng.random_range(0..actions)
    } else {
        argmax(&net.logits(obs).expect("observation width matches network"))
    }
}

/// One-step Bellman target.
pub fn dqn_target(reward: f64, terminal: bool, gamma: f64, next_q: &[f64]) -> f64 {
    if terminal {
        reward
    } else {
        let max = next_q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        reward + gamma * max
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Fixed-capacity ring of transitions; the oldest entry is overwritten first.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(4096)),
            next: 0,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }
}

#[derive(Clone, Debug)]
pub struct DqnAgent {
    pub(crate) online: NeuralNet,
    pub(crate) target: NeuralNet,
    pub(crate) buffer: ReplayBuffer,
    pub(crate) epsilon: f64,
    cfg: AgentConfig,
    episodes: u64,
}

impl DqnAgent {
    pub fn new(cfg: &AgentConfig, observation_len: usize, actions: usize, rng: &mut ChaCha8Rng) -> Result<Self, AgentError> {
        let mut layers = vec![observation_len];
        layers.extend_from_slice(&cfg.hidden_layers);
        layers.push(actions);
        let topology = NetTopology::new(layers, OutputHead::Linear)?;
        let online = NeuralNet::random(&topology, rng);
        Ok(Self {
            target: online.clone(),
            online,
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            epsilon: cfg.epsilon_start,
            cfg: cfg.clone(),
            episodes: 0,
        })
    }

    pub fn from_net(cfg: &AgentConfig, online: NeuralNet) -> Self {
        Self {
            target: online.clone(),
            online,
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            epsilon: cfg.epsilon_start,
            cfg: cfg.clone(),
            episodes: 0,
        }
    }

    pub fn online(&self) -> &NeuralNet {
        &self.online
    }

    pub fn target(&self) -> &NeuralNet {
        &self.target
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn set_epsilon(&mut self, epsilon: f64) {
        self.epsilon = epsilon.clamp(0.0, 1.0);
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn select_action(&self, obs: &[f64], rng: &mut ChaCha8Rng) -> usize {
        select_action_dqn(&self.online, obs, self.epsilon, rng)
    }

    pub fn remember(&mut self, t: Transition) {
        self.buffer.push(t);
    }

    /// One gradient step on a uniformly sampled batch. `None` while the
    /// buffer holds fewer than `batch_size` transitions.
    pub fn update(&mut self, rng: &mut ChaCha8Rng) -> Option<f64> {
        let batch = self.cfg.batch_size;
        if self.buffer.len() < batch {
            return None;
        }
        let mut states = Vec::with_capacity(batch);
        let mut targets = Vec::with_capacity(batch);
        for _ in 0..batch {
            let t = self.buffer.get(rng.random_range(0..self.buffer.len()));
            let next_q = self.target.logits(&t.next_state).expect("stored states match topology");
            states.push(t.state.clone());
            targets.push(QTarget {
                action: t.action,
                target: dqn_target(t.reward, t.terminal, self.cfg.gamma, &next_q),
            });
        }
        let (loss, grad) = q_regression_loss(&self.online, &states, &targets).expect("batch matches topology");
        self.online.sgd_step(&grad, self.cfg.lr);
        Some(loss)
    }

    /// Counts the finished episode and syncs the target net on schedule.
    pub fn end_episode(&mut self) {
        self.episodes += 1;
        if self.episodes % self.cfg.target_sync_every as u64 == 0 {
            self.target = self.online.clone();
        }
    }

    /// Replaces online and target parameters together; buffer and epsilon stay.
    pub fn load_genome(&mut self, genome: &Genome) -> Result<(), AgentError> {
        let mut online = self.online.clone();
        online.load_genome(genome)?;
        self.target = online.clone();
        self.online = online;
        Ok(())
    }

    pub fn genome(&self) -> Genome {
        self.online.flatten()
    }

    pub fn topology(&self) -> &NetTopology {
        self.online.topology()
    }
}
