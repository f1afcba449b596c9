use serde::{Deserialize, Serialize};

use super::FederationError;

/// Available share of the optimiser's CPU and memory budget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceSnapshot {
    pub cpu_available_fraction: f64,
    pub mem_available_fraction: f64,
}

impl ResourceSnapshot {
    pub fn new(cpu: f64, mem: f64) -> Result<Self, FederationError> {
        for v in [cpu, mem] {
            if !(0.0..=1.0).contains(&v) {
                return Err(FederationError::ResourceOutOfRange(v));
            }
        }
        Ok(Self {
            cpu_available_fraction: cpu,
            mem_available_fraction: mem,
        })
    }

    /// Both resources at the same level.
    pub fn uniform(level: f64) -> Result<Self, FederationError> {
        Self::new(level, level)
    }
}

/// The scarcer of the two resources bounds the GA budget.
pub fn scaling_factor(rs: &ResourceSnapshot) -> f64 {
    rs.cpu_available_fraction
        .min(rs.mem_available_fraction)
        .clamp(0.0, 1.0)
}

pub trait ResourceProvider: Send {
    fn snapshot(&mut self) -> ResourceSnapshot;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StaticProvider(pub ResourceSnapshot);

impl ResourceProvider for StaticProvider {
    fn snapshot(&mut self) -> ResourceSnapshot {
        self.0
    }
}

/// Replays a fixed sequence, one entry per query, then holds the last.
#[derive(Clone, Debug, PartialEq)]
pub struct ScriptedProvider {
    script: Vec<ResourceSnapshot>,
    next: usize,
}

impl ScriptedProvider {
    pub fn new(script: Vec<ResourceSnapshot>) -> Self {
        assert!(!script.is_empty(), "resource script needs at least one entry");
        Self { script, next: 0 }
    }
}

impl ResourceProvider for ScriptedProvider {
    fn snapshot(&mut self) -> ResourceSnapshot {
        let s = self.script[self.next.min(self.script.len() - 1)];
        self.next += 1;
        s
    }
}
