//! Message fabric between the agents and the optimiser: wire codec,
//! correlation-tracked routing, resource snapshots and the deployment gate.

mod codec;
mod resources;
mod router;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use codec::{decode, encode, Envelope, FrameReader, MessageKind, Payload, HEADER_LEN};
pub use resources::{scaling_factor, ResourceProvider, ResourceSnapshot, ScriptedProvider, StaticProvider};
pub use router::{DeadLetter, Delivery, Mailbox, Router};

use crate::ne::{GaParams, GaTier};
use crate::neuro::{Genome, NetTopology, NeuroError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FederationError {
    #[error("truncated frame: declared {declared:?} bytes, {available} available")]
    Truncated {
        declared: Option<usize>,
        available: usize,
    },
    #[error("frame length {declared} does not match body length {actual}")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("unknown message kind {0:?}")]
    UnknownKind(String),
    #[error("non-finite genome value")]
    NonFinite,
    #[error("malformed body: {0}")]
    Json(String),
    #[error("frame body of {0} bytes does not fit a 32-bit length prefix")]
    Oversized(usize),
    #[error("resource fraction {0} outside [0, 1]")]
    ResourceOutOfRange(f64),
}

/// Another agent's current policy, used when scoring a candidate in a
/// shared environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeerPolicy {
    pub agent_id: u32,
    pub topology: NetTopology,
    pub genome: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizationRequest {
    pub genome: Vec<f64>,
    pub topology: NetTopology,
    pub indication: GaTier,
    pub window_returns: Vec<f64>,
    pub target_return: f64,
    /// The agent's own window average when it asked.
    pub incumbent_fitness: Option<f64>,
    #[serde(default)]
    pub peers: Vec<PeerPolicy>,
}

impl OptimizationRequest {
    pub fn genome(&self) -> Result<Genome, NeuroError> {
        Genome::new(self.genome.clone(), self.topology.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizationResponse {
    pub genome: Vec<f64>,
    pub fitness: f64,
    pub applied_params: GaParams,
    pub wall_time_ms: f64,
    /// The request genome's fitness on the optimiser's own evaluation seeds.
    pub incumbent_fitness: f64,
}

/// Non-strict fitness gate.
pub fn deploy_gate(candidate_fitness: f64, incumbent_fitness: f64) -> bool {
    candidate_fitness >= incumbent_fitness
}

/// The baseline a response is gated against: the larger of the agent's
/// window average and the optimiser's re-measurement.
pub fn gated_incumbent(request: &OptimizationRequest, response: &OptimizationResponse) -> f64 {
    request
        .incumbent_fitness
        .map_or(response.incumbent_fitness, |w| w.max(response.incumbent_fitness))
}
