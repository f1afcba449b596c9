use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::agents::{AgentConfig, Algorithm};
use crate::federation::ResourceSnapshot;
use crate::ne::{tier_params, GaOverrides, GaTier, EVAL_EPISODES};
use crate::ransim::EnvConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    NeDqn,
    NeA2c,
    NeMarl,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalingSource {
    /// One resource level for the whole run.
    Static(f64),
    /// Snapshots handed out one per job, the last one repeating.
    Script(Vec<ResourceSnapshot>),
}

impl Default for ScalingSource {
    fn default() -> Self {
        ScalingSource::Static(1.0)
    }
}

/// When an optimiser response reaches its agent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", deny_unknown_fields)]
pub enum DeliveryMode {
    /// Applied at the boundary `lag` episodes after the request, waiting
    /// for the job if it is still running. Runs replay exactly.
    Lockstep { lag: u32 },
    /// Applied at the first boundary after it arrives; never waits.
    Async,
}

impl Default for DeliveryMode {
    fn default() -> Self {
        DeliveryMode::Lockstep { lag: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSettings {
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default = "yes")]
    pub early_exit: bool,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            eval_episodes: EVAL_EPISODES,
            early_exit: true,
        }
    }
}

fn default_eval_episodes() -> usize {
    EVAL_EPISODES
}
fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: Model,
    pub ne_interval: usize,
    #[serde(default)]
    pub indication_override: Option<GaTier>,
    #[serde(default)]
    pub scaling_source: ScalingSource,
    #[serde(default)]
    pub ga_overrides: Option<GaOverrides>,
    pub agent: AgentConfig,
    pub env: EnvConfig,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    #[serde(default = "yes")]
    pub ga_enabled: bool,
    #[serde(default)]
    pub delivery: DeliveryMode,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            HarnessError::Config {
                key: if key == "." { "<root>".into() } else { key },
                message: e.into_inner().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn algorithm(&self) -> Algorithm {
        match self.model {
            Model::NeDqn => Algorithm::Dqn,
            Model::NeA2c => Algorithm::A2c,
            Model::NeMarl => self.agent.algorithm,
        }
    }

    /// The agent settings with the run-level fields filled in.
    pub fn agent_config(&self) -> AgentConfig {
        let mut a = self.agent.clone();
        a.algorithm = self.algorithm();
        a.ne_interval = self.ne_interval;
        a.indication_override = self.indication_override;
        if a.epsilon_decay_episodes.is_none() {
            a.epsilon_decay_episodes = Some(((self.episodes as f64 * 0.3).round() as u32).max(1));
        }
        a
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |key: &str, message: String| {
            Err(HarnessError::Config {
                key: key.into(),
                message,
            })
        };
        if self.ne_interval == 0 {
            return bad("ne_interval", "must be at least 1".into());
        }
        if self.episodes < self.ne_interval {
            return bad(
                "episodes",
                format!("{} is shorter than ne_interval {}", self.episodes, self.ne_interval),
            );
        }
        if self.seeds.is_empty() {
            return bad("seeds", "at least one seed is required".into());
        }
        match (self.model, self.agent.algorithm) {
            (Model::NeDqn, Algorithm::A2c) => return bad("agent.algorithm", "ne_dqn needs a dqn agent".into()),
            (Model::NeA2c, Algorithm::Dqn) => return bad("agent.algorithm", "ne_a2c needs an a2c agent".into()),
            _ => {}
        }
        if self.model == Model::NeMarl && self.env.cells != 2 {
            return bad("env.cells", format!("ne_marl runs on 2 cells, got {}", self.env.cells));
        }
        if self.model != Model::NeMarl && self.env.cells != 1 {
            return bad("env.cells", format!("single-agent models run on 1 cell, got {}", self.env.cells));
        }
        if let Err(e) = self.env.validate() {
            return bad("env", e.to_string());
        }
        if let Err((k, m)) = self.agent_config().validate() {
            return bad(&format!("agent.{k}"), m);
        }
        match &self.scaling_source {
            ScalingSource::Static(s) if !(0.0..=1.0).contains(s) => {
                return bad("scaling_source.static", format!("{s} outside [0, 1]"));
            }
            ScalingSource::Script(v) if v.is_empty() => {
                return bad("scaling_source.script", "needs at least one snapshot".into());
            }
            ScalingSource::Script(v) => {
                for (i, s) in v.iter().enumerate() {
                    if ResourceSnapshot::new(s.cpu_available_fraction, s.mem_available_fraction).is_err() {
                        return bad(&format!("scaling_source.script[{i}]"), "fractions must lie in [0, 1]".into());
                    }
                }
            }
            _ => {}
        }
        let overrides = self.ga_overrides.unwrap_or_default();
        for tier in GaTier::ALL {
            if let Err(e) = overrides.apply(&tier_params(tier)).validate() {
                return bad("ga_overrides", format!("{} tier: {e}", tier.as_str()));
            }
        }
        if self.delivery == (DeliveryMode::Lockstep { lag: 0 }) {
            return bad("delivery.lag", "must be at least 1 episode".into());
        }
        if self.optimizer.eval_episodes == 0 {
            return bad("optimizer.eval_episodes", "must be at least 1".into());
        }
        Ok(())
    }
}

/// A bundled configuration by name (`exp1` .. `exp7`, `desk_dqn`,
/// `desk_a2c`, `desk_marl`).
pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub const BUNDLED: &[(&str, &str)] = &[
    ("exp1", include_str!("../../configs/exp1.json")),
    ("exp2", include_str!("../../configs/exp2.json")),
    ("exp3", include_str!("../../configs/exp3.json")),
    ("exp4", include_str!("../../configs/exp4.json")),
    ("exp5", include_str!("../../configs/exp5.json")),
    ("exp6", include_str!("../../configs/exp6.json")),
    ("exp7", include_str!("../../configs/exp7.json")),
    ("desk_dqn", include_str!("../../configs/desk_dqn.json")),
    ("desk_a2c", include_str!("../../configs/desk_a2c.json")),
    ("desk_marl", include_str!("../../configs/desk_marl.json")),
];
