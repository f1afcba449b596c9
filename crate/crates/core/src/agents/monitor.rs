use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::ne::GaTier;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerMode {
    /// Fire when the window average falls to or below `threshold`.
    Threshold,
    /// Fire when the window average is below target and improved by less
    /// than `min_improvement` over the previous window.
    Stagnation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerPolicy {
    pub mode: TriggerMode,
    #[serde(default)]
    pub threshold: f64,
    #[serde(default)]
    pub min_improvement: f64,
}

impl Default for TriggerPolicy {
    fn default() -> Self {
        Self {
            mode: TriggerMode::Threshold,
            threshold: 0.0,
            min_improvement: 0.0,
        }
    }
}

/// Episode returns of the current NE interval.
#[derive(Clone, Debug, PartialEq)]
pub struct PerformanceWindow {
    capacity: usize,
    returns: VecDeque<f64>,
    previous_window_avg: Option<f64>,
    episodes: u64,
}

impl PerformanceWindow {
    pub fn new(ne_interval: usize) -> Self {
        assert!(ne_interval >= 1, "NE interval must be at least one episode");
        Self {
            capacity: ne_interval,
            returns: VecDeque::with_capacity(ne_interval),
            previous_window_avg: None,
            episodes: 0,
        }
    }

    pub fn push(&mut self, ret: f64) {
        if self.returns.len() == self.capacity {
            self.returns.pop_front();
        }
        self.returns.push_back(ret);
        self.episodes += 1;
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_full(&self) -> bool {
        self.returns.len() == self.capacity
    }

    /// True after every `ne_interval`-th episode.
    pub fn at_boundary(&self) -> bool {
        self.is_full() && self.episodes % self.capacity as u64 == 0
    }

    /// Mean over a full window; `None` until the window has filled.
    pub fn average(&self) -> Option<f64> {
        self.is_full()
            .then(|| self.returns.iter().sum::<f64>() / self.capacity as f64)
    }

    pub fn previous_window_avg(&self) -> Option<f64> {
        self.previous_window_avg
    }

    pub fn returns(&self) -> impl Iterator<Item = f64> + '_ {
        self.returns.iter().copied()
    }

    /// Records the closing window's average as the baseline for the next one.
    pub fn close_window(&mut self) {
        if let Some(avg) = self.average() {
            self.previous_window_avg = Some(avg);
        }
    }
}

/// Maps the relative reward gap to an effort tier.
pub fn indication(avg: f64, target: f64) -> GaTier {
    assert!(target > 0.0, "target return must be positive");
    let gap = ((target - avg) / target).clamp(0.0, 1.0);
    if gap <= 1.0 / 3.0 {
        GaTier::Low
    } else if gap <= 2.0 / 3.0 {
        GaTier::Medium
    } else {
        GaTier::High
    }
}

/// Decides at an NE-interval boundary whether to request optimisation.
pub fn should_trigger(
    window: &PerformanceWindow,
    policy: &TriggerPolicy,
    target_return: f64,
    indication_override: Option<GaTier>,
    request_outstanding: bool,
) -> Option<GaTier> {
    if request_outstanding {
        return None;
    }
    let avg = window.average()?;
    if avg >= target_return {
        return None;
    }
    let fire = match policy.mode {
        TriggerMode::Threshold => avg <= policy.threshold,
        // With no previous window there is no evidence of improvement.
        TriggerMode::Stagnation => window
            .previous_window_avg()
            .is_none_or(|prev| avg - prev < policy.min_improvement),
    };
    fire.then(|| indication_override.unwrap_or_else(|| indication(avg, target_return)))
}
