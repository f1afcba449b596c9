use crate::ransim::{RanError, RanSnapshot};

/// The control loop's view of an environment: flat observations and flat
/// discrete action indices, one of each per agent.
pub trait Environment {
    fn agents(&self) -> usize;
    fn observation_len(&self) -> usize;
    fn action_count(&self) -> usize;
    fn episode_steps(&self) -> usize;
    fn reset(&mut self);
    fn observe(&self, agent: usize) -> Vec<f64>;
    fn step(&mut self, actions: &[usize]) -> Result<Vec<f64>, RanError>;
}

impl Environment for RanSnapshot {
    fn agents(&self) -> usize {
        RanSnapshot::agents(self)
    }

    fn observation_len(&self) -> usize {
        self.config().observation_len()
    }

    fn action_count(&self) -> usize {
        self.config().action_count()
    }

    fn episode_steps(&self) -> usize {
        self.config().episode_steps
    }

    fn reset(&mut self) {
        RanSnapshot::reset(self)
    }

    fn observe(&self, agent: usize) -> Vec<f64> {
        RanSnapshot::observe(self, self.config().scope_of(agent))
    }

    fn step(&mut self, actions: &[usize]) -> Result<Vec<f64>, RanError> {
        let count = self.config().action_count();
        let decoded = actions
            .iter()
            .map(|&a| {
                if a >= count {
                    Err(RanError::InvalidAction(format!("action {a} >= {count}")))
                } else {
                    Ok(self.config().decode_action(a))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        RanSnapshot::step(self, &decoded)
    }
}

/// Fixed-reward stand-in used to pin down the control loop in tests.
#[derive(Clone, Debug)]
pub struct ConstantEnv {
    pub agents: usize,
    pub observation_len: usize,
    pub action_count: usize,
    pub episode_steps: usize,
    pub reward: f64,
    pub t: usize,
}

impl ConstantEnv {
    pub fn new(reward: f64, observation_len: usize, action_count: usize) -> Self {
        Self {
            agents: 1,
            observation_len,
            action_count,
            episode_steps: 50,
            reward,
            t: 0,
        }
    }
}

impl Environment for ConstantEnv {
    fn agents(&self) -> usize {
        self.agents
    }
    fn observation_len(&self) -> usize {
        self.observation_len
    }
    fn action_count(&self) -> usize {
        self.action_count
    }
    fn episode_steps(&self) -> usize {
        self.episode_steps
    }
    fn reset(&mut self) {
        self.t = 0;
    }
    fn observe(&self, _agent: usize) -> Vec<f64> {
        (0..self.observation_len)
            .map(|i| ((self.t + i) % 7) as f64 / 7.0)
            .collect()
    }
    fn step(&mut self, actions: &[usize]) -> Result<Vec<f64>, RanError> {
        assert_eq!(actions.len(), self.agents);
        self.t += 1;
        Ok(vec![self.reward; self.agents])
    }
}
