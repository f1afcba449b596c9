//! The centralised genetic-algorithm optimiser.

mod fitness;
mod ga;
mod optimizer;
mod params;

use thiserror::Error;

pub use fitness::{eval_seeds, greedy_episode, EnvFactory, PolicyEvaluator, EVAL_EPISODES};
pub use ga::{
    crossover, evolve, init_population, mutate, select, select_index, EvolveOutcome, Fitness, GenerationStats,
    Individual, Population, TOURNAMENT_SIZE,
};
pub use optimizer::{spawn_optimizer, GenerationLog, JobRecord, JobStatus, OptimizerConfig, OptimizerReport};
pub use params::{scale_params, tier_params, GaOverrides, GaParams, GaTier, MUTATION_SIGMA};

#[derive(Debug, Error, PartialEq)]
pub enum NeError {
    #[error("invalid GA parameters: {0}")]
    InvalidParams(String),
    #[error("scaling factor {0} outside [0, 1]")]
    ScalingOutOfRange(f64),
    #[error("parents differ in shape")]
    ShapeMismatch,
    #[error("fitness evaluated to {0}")]
    NonFiniteFitness(f64),
}
