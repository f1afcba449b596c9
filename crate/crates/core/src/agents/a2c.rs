use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::dqn::Transition;
use super::{AgentConfig, AgentError};
use crate::neuro::{argmax, policy_loss, softmax, value_loss, Genome, NetTopology, NeuralNet, OutputHead};

/// One-step advantage `r + gamma * v_next * (1 - terminal) - v`.
pub fn a2c_advantage(reward: f64, terminal: bool, gamma: f64, v_next: f64, v: f64) -> f64 {
    let bootstrap = if terminal { 0.0 } else { gamma * v_next };
    reward + bootstrap - v
}

#[derive(Clone, Debug)]
pub struct A2cAgent {
    pub(crate) actor: NeuralNet,
    pub(crate) critic: NeuralNet,
    cfg: AgentConfig,
    trajectory: Vec<Transition>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct A2cLosses {
    pub actor: f64,
    pub critic: f64,
}

impl A2cAgent {
    pub fn new(cfg: &AgentConfig, observation_len: usize, actions: usize, rng: &mut ChaCha8Rng) -> Result<Self, AgentError> {
        let mut layers = vec![observation_len];
        layers.extend_from_slice(&cfg.hidden_layers);
        let mut actor_layers = layers.clone();
        actor_layers.push(actions);
        layers.push(1);
        let actor = NeuralNet::random(&NetTopology::new(actor_layers, OutputHead::Softmax)?, rng);
        let critic = NeuralNet::random(&NetTopology::new(layers, OutputHead::Linear)?, rng);
        Ok(Self::from_nets(cfg, actor, critic))
    }

    pub fn from_nets(cfg: &AgentConfig, actor: NeuralNet, critic: NeuralNet) -> Self {
        assert_eq!(actor.topology().output_head(), OutputHead::Softmax);
        assert_eq!(critic.topology().output_width(), 1);
        Self {
            actor,
            critic,
            cfg: cfg.clone(),
            trajectory: Vec::new(),
        }
    }

    pub fn actor(&self) -> &NeuralNet {
        &self.actor
    }

    pub fn critic(&self) -> &NeuralNet {
        &self.critic
    }

    /// Samples from the policy distribution.
    pub fn select_action(&self, obs: &[f64], rng: &mut ChaCha8Rng) -> usize {
        let probs = softmax(&self.actor.logits(obs).expect("observation width matches network"));
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        probs.len() - 1
    }

    pub fn greedy_action(&self, obs: &[f64]) -> usize {
        argmax(&self.actor.logits(obs).expect("observation width matches network"))
    }

    pub fn remember(&mut self, t: Transition) {
        self.trajectory.push(t);
    }

    /// On-policy update over the stored episode, then clears it. `None` when
    /// nothing was recorded.
    pub fn end_episode(&mut self) -> Option<A2cLosses> {
        if self.trajectory.is_empty() {
            return None;
        }
        let trajectory = std::mem::take(&mut self.trajectory);
        Some(self.update(&trajectory))
    }

    pub fn update(&mut self, trajectory: &[Transition]) -> A2cLosses {
        assert!(!trajectory.is_empty(), "empty trajectory");
        let value = |s: &[f64]| self.critic.logits(s).expect("state matches critic")[0];
        let mut states = Vec::with_capacity(trajectory.len());
        let mut actions = Vec::with_capacity(trajectory.len());
        let mut advantages = Vec::with_capacity(trajectory.len());
        let mut targets = Vec::with_capacity(trajectory.len());
        for t in trajectory {
            let v = value(&t.state);
            let v_next = value(&t.next_state);
            let adv = a2c_advantage(t.reward, t.terminal, self.cfg.gamma, v_next, v);
            states.push(t.state.clone());
            actions.push(t.action);
            advantages.push(adv);
            targets.push(adv + v);
        }
        let (actor_loss, actor_grad) = policy_loss(&self.actor, &states, &actions, &advantages).expect("actions within actor width");
        let (critic_loss, critic_grad) = value_loss(&self.critic, &states, &targets).expect("states match critic");
        self.actor.sgd_step(&actor_grad, self.cfg.lr);
        self.critic.sgd_step(&critic_grad, self.cfg.lr);
        A2cLosses {
            actor: actor_loss,
            critic: critic_loss,
        }
    }

    /// The actor is the evolved policy; the critic is kept.
    pub fn load_genome(&mut self, genome: &Genome) -> Result<(), AgentError> {
        let mut actor = self.actor.clone();
        actor.load_genome(genome)?;
        self.actor = actor;
        Ok(())
    }

    pub fn genome(&self) -> Genome {
        self.actor.flatten()
    }

    pub fn topology(&self) -> &NetTopology {
        self.actor.topology()
    }
}
