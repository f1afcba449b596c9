//! Scoring genomes as greedy policies on freshly built environments.

use std::sync::Arc;

use super::ga::Fitness;
use crate::agents::Environment;
use crate::neuro::{argmax, Genome, NetTopology, NeuralNet};

/// Episodes per fitness call.
pub const EVAL_EPISODES: usize = 5;

/// Builds an independent environment from an evaluation seed.
pub type EnvFactory = Arc<dyn Fn(u64) -> Box<dyn Environment> + Send + Sync>;

/// Mean per-step reward of slot `agent` over one episode, every slot acting
/// greedily with its own net.
pub fn greedy_episode(nets: &[&NeuralNet], agent: usize, env: &mut dyn Environment) -> f64 {
    assert_eq!(nets.len(), env.agents(), "one policy per environment slot");
    env.reset();
    let steps = env.episode_steps();
    let mut total = 0.0;
    let mut actions = vec![0; nets.len()];
    for _ in 0..steps {
        for (slot, net) in nets.iter().enumerate() {
            let obs = env.observe(slot);
            actions[slot] = argmax(&net.logits(&obs).expect("observation width matches network"));
        }
        let rewards = env.step(&actions).expect("greedy actions are in range");
        total += rewards[agent];
    }
    total / steps as f64
}

/// Fitness of a candidate policy for one agent slot; the other slots are
/// played by fixed peer policies.
pub struct PolicyEvaluator {
    factory: EnvFactory,
    topology: NetTopology,
    agent: usize,
    peers: Vec<Option<NeuralNet>>,
    seeds: Vec<u64>,
}

impl PolicyEvaluator {
    /// `peers[slot]` must be `Some` for every slot except `agent`.
    pub fn new(factory: EnvFactory, topology: NetTopology, agent: usize, peers: Vec<Option<NeuralNet>>, seeds: Vec<u64>) -> Self {
        assert!(!seeds.is_empty(), "at least one evaluation seed");
        assert!(peers.len() > agent && peers[agent].is_none());
        assert!(peers.iter().enumerate().all(|(i, p)| i == agent || p.is_some()));
        Self {
            factory,
            topology,
            agent,
            peers,
            seeds,
        }
    }

    /// Evaluator for a lone agent.
    pub fn single(factory: EnvFactory, topology: NetTopology, seeds: Vec<u64>) -> Self {
        Self::new(factory, topology, 0, vec![None], seeds)
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn evaluate_net(&self, net: &NeuralNet) -> f64 {
        let nets: Vec<&NeuralNet> = self
            .peers
            .iter()
            .map(|p| p.as_ref().unwrap_or(net))
            .collect();
        let total: f64 = self
            .seeds
            .iter()
            .map(|&s| {
                let mut env = (self.factory)(s);
                greedy_episode(&nets, self.agent, env.as_mut())
            })
            .sum();
        total / self.seeds.len() as f64
    }
}

impl Fitness for PolicyEvaluator {
    fn evaluate(&self, genome: &Genome) -> f64 {
        let net = NeuralNet::unflatten(genome, &self.topology).expect("candidate matches requesting topology");
        self.evaluate_net(&net)
    }
}

/// The fixed evaluation seed list derived from a base seed.
pub fn eval_seeds(base: u64, episodes: usize) -> Vec<u64> {
    (0..episodes as u64).map(|i| base.wrapping_mul(1_000_003).wrapping_add(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::ConstantEnv;
    use crate::neuro::OutputHead;
    use crate::ransim::{EnvConfig, RanSnapshot};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ran_factory(cfg: EnvConfig) -> EnvFactory {
        Arc::new(move |s| Box::new(RanSnapshot::new(cfg.clone(), s).unwrap()) as Box<dyn Environment>)
    }

    #[test]
    fn rigged_zero_reward_scores_zero() {
        let t = NetTopology::new(vec![3, 4, 2], OutputHead::Linear).unwrap();
        let factory: EnvFactory = Arc::new(|_| Box::new(ConstantEnv::new(0.0, 3, 2)));
        let eval = PolicyEvaluator::single(factory, t.clone(), eval_seeds(1, EVAL_EPISODES));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..5 {
            assert_eq!(eval.evaluate(&NeuralNet::random(&t, &mut rng).flatten()), 0.0);
        }
    }

    #[test]
    fn deterministic_on_fixed_seeds() {
        let cfg = EnvConfig::new(1, 4);
        let t = NetTopology::new(vec![cfg.observation_len(), 8, cfg.action_count()], OutputHead::Linear).unwrap();
        let eval = PolicyEvaluator::single(ran_factory(cfg), t.clone(), eval_seeds(7, EVAL_EPISODES));
        let g = NeuralNet::random(&t, &mut ChaCha8Rng::seed_from_u64(3)).flatten();
        assert_eq!(eval.evaluate(&g), eval.evaluate(&g.clone()));
    }

    #[test]
    fn matches_independent_greedy_rollout() {
        let cfg = EnvConfig::new(1, 4);
        let t = NetTopology::new(vec![cfg.observation_len(), 8, cfg.action_count()], OutputHead::Linear).unwrap();
        let net = NeuralNet::random(&t, &mut ChaCha8Rng::seed_from_u64(5));
        let seeds = eval_seeds(2, EVAL_EPISODES);
        let eval = PolicyEvaluator::single(ran_factory(cfg.clone()), t, seeds.clone());

        // Hand-rolled rollout straight against the simulator.
        let mut total = 0.0;
        for s in seeds {
            let mut env = RanSnapshot::new(cfg.clone(), s).unwrap();
            env.reset();
            let mut sum = 0.0;
            for _ in 0..cfg.episode_steps {
                let q = net.logits(&env.observe(cfg.scope_of(0))).unwrap();
                let a = cfg.decode_action(argmax(&q));
                sum += env.step(&[a]).unwrap()[0];
            }
            total += sum / cfg.episode_steps as f64;
        }
        assert_eq!(eval.evaluate_net(&net), total / EVAL_EPISODES as f64);
    }
}
