//! Seedable multi-cell downlink simulator.
//!
//! Each step applies one discrete action per controlling agent, scores the
//! resulting allocation, then walks every UE's CQI by at most one level.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper end of the reward scale.
pub const REWARD_SCALE: f64 = 1000.0;
/// PRBs in a 10 MHz carrier.
pub const PRBS_PER_10MHZ: u32 = 50;
pub const CQI_MIN: u8 = 1;
pub const CQI_MAX: u8 = 15;

#[derive(Debug, Error, PartialEq)]
pub enum RanError {
    #[error("cqi {0} outside [1, 15]")]
    CqiOutOfRange(u8),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("expected {expected} actions, got {actual}")]
    ActionCount { expected: usize, actual: usize },
    #[error("invalid environment config: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapProfile {
    pub handover_penalty: f64,
    pub penalty_duration: u32,
}

impl Default for TrapProfile {
    fn default() -> Self {
        Self {
            handover_penalty: 400.0,
            penalty_duration: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub cells: usize,
    pub ues: usize,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_hz: f64,
    #[serde(default = "default_demand")]
    pub max_demand_bps: f64,
    #[serde(default = "default_prbs")]
    pub total_prbs: u32,
    #[serde(default = "default_walk")]
    pub cqi_walk_prob: f64,
    #[serde(default = "default_cqi_range")]
    pub initial_cqi: (u8, u8),
    #[serde(default)]
    pub trap: Option<TrapProfile>,
    #[serde(default = "default_episode_steps")]
    pub episode_steps: usize,
}

fn default_bandwidth() -> f64 {
    10e6
}
fn default_demand() -> f64 {
    1e6
}
fn default_prbs() -> u32 {
    PRBS_PER_10MHZ
}
fn default_walk() -> f64 {
    0.2
}
fn default_cqi_range() -> (u8, u8) {
    (5, 12)
}
fn default_episode_steps() -> usize {
    50
}

impl EnvConfig {
    pub fn new(cells: usize, ues: usize) -> Self {
        Self {
            cells,
            ues,
            bandwidth_hz: default_bandwidth(),
            max_demand_bps: default_demand(),
            total_prbs: default_prbs(),
            cqi_walk_prob: default_walk(),
            initial_cqi: default_cqi_range(),
            trap: None,
            episode_steps: default_episode_steps(),
        }
    }

    pub fn with_trap(mut self, trap: TrapProfile) -> Self {
        self.trap = Some(trap);
        self
    }

    pub fn validate(&self) -> Result<(), RanError> {
        let fail = |m: &str| Err(RanError::Config(m.to_string()));
        if self.cells == 0 {
            return fail("cells must be at least 1");
        }
        if self.ues == 0 {
            return fail("ues must be at least 1");
        }
        if !(self.bandwidth_hz > 0.0) {
            return fail("bandwidth_hz must be positive");
        }
        if !(self.max_demand_bps > 0.0 && self.max_demand_bps <= 1e6) {
            return fail("max_demand_bps must be in (0, 1e6]");
        }
        if self.total_prbs == 0 {
            return fail("total_prbs must be at least 1");
        }
        if !(0.0..=0.5).contains(&self.cqi_walk_prob) {
            return fail("cqi_walk_prob must be in [0, 0.5]");
        }
        let (lo, hi) = self.initial_cqi;
        if lo < CQI_MIN || hi > CQI_MAX || lo > hi {
            return fail("initial_cqi must be an ordered range within [1, 15]");
        }
        if let Some(t) = &self.trap {
            if !(t.handover_penalty >= 0.0) {
                return fail("trap.handover_penalty must be non-negative");
            }
        }
        if self.episode_steps == 0 {
            return fail("episode_steps must be at least 1");
        }
        Ok(())
    }

    /// Number of controlling agents: one for a single cell, one per cell otherwise.
    pub fn agents(&self) -> usize {
        if self.cells == 1 {
            1
        } else {
            self.cells
        }
    }

    pub fn scope_of(&self, agent: usize) -> Scope {
        if self.cells == 1 {
            Scope::Global
        } else {
            Scope::Cell(agent)
        }
    }

    /// `3 * ues + 1`: CQI, served ratio and PRB fraction per UE, plus load.
    pub fn observation_len(&self) -> usize {
        3 * self.ues + 1
    }

    pub fn verbs(&self) -> &'static [Verb] {
        if self.cells == 1 {
            &[Verb::PrbUp, Verb::PrbDown, Verb::Noop]
        } else {
            &[Verb::PrbUp, Verb::PrbDown, Verb::Handover, Verb::Noop]
        }
    }

    pub fn action_count(&self) -> usize {
        self.ues * self.verbs().len()
    }

    /// Maps a flat action index to `(ue, verb)`, UE-major.
    pub fn decode_action(&self, index: usize) -> RanAction {
        let verbs = self.verbs();
        RanAction {
            ue_index: index / verbs.len(),
            verb: verbs[index % verbs.len()],
        }
    }
}

pub fn cqi_to_efficiency(cqi: u8) -> Result<f64, RanError> {
    if !(CQI_MIN..=CQI_MAX).contains(&cqi) {
        return Err(RanError::CqiOutOfRange(cqi));
    }
    Ok(0.4 * f64::from(cqi))
}

#[derive(Clone, Debug, PartialEq)]
pub struct UeState {
    pub ue_id: usize,
    pub cell: usize,
    pub cqi: u8,
    pub demand_bps: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellState {
    pub cell_id: usize,
    pub bandwidth_hz: f64,
    pub total_prbs: u32,
    /// PRBs per attached UE, keyed by `ue_id`.
    pub prb_share: BTreeMap<usize, u32>,
}

impl CellState {
    pub fn allocated(&self) -> u32 {
        self.prb_share.values().sum()
    }

    pub fn prbs_of(&self, ue_id: usize) -> u32 {
        self.prb_share.get(&ue_id).copied().unwrap_or(0)
    }
}

/// `min(demand, (prbs / total) * bandwidth * efficiency(cqi))`.
pub fn ue_throughput(ue: &UeState, cell: &CellState) -> f64 {
    let prbs = cell.prbs_of(ue.ue_id);
    if prbs == 0 {
        return 0.0;
    }
    let eff = cqi_to_efficiency(ue.cqi).expect("UE CQI kept in range");
    let capacity = f64::from(prbs) / f64::from(cell.total_prbs) * cell.bandwidth_hz * eff;
    ue.demand_bps.min(capacity)
}

/// Jain's index `(sum x)^2 / (n * sum x^2)`; all-zero input is treated as fair.
pub fn jain_fairness(throughputs: &[f64]) -> f64 {
    assert!(!throughputs.is_empty(), "fairness of an empty allocation");
    let sum: f64 = throughputs.iter().sum();
    let sq: f64 = throughputs.iter().map(|x| x * x).sum();
    if sq == 0.0 {
        return 1.0;
    }
    let j = sum * sum / (throughputs.len() as f64 * sq);
    j.clamp(1.0 / throughputs.len() as f64, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scope {
    Global,
    Cell(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verb {
    PrbUp,
    PrbDown,
    Handover,
    Noop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RanAction {
    pub ue_index: usize,
    pub verb: Verb,
}

impl RanAction {
    pub fn noop() -> Self {
        Self {
            ue_index: 0,
            verb: Verb::Noop,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardBreakdown {
    pub served_bps: f64,
    pub demand_bps: f64,
    pub fairness: f64,
    pub penalty: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RanSnapshot {
    pub time_step: u64,
    pub ues: Vec<UeState>,
    pub cells: Vec<CellState>,
    rng: ChaCha8Rng,
    pub trap: Option<TrapProfile>,
    config: EnvConfig,
    /// Remaining penalised steps for each handover, per agent.
    penalties: Vec<Vec<u32>>,
}

impl RanSnapshot {
    pub fn new(config: EnvConfig, seed: u64) -> Result<Self, RanError> {
        config.validate()?;
        let mut snap = Self {
            time_step: 0,
            ues: Vec::new(),
            cells: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            trap: config.trap,
            penalties: vec![Vec::new(); config.agents()],
            config,
        };
        snap.reset();
        Ok(snap)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    /// Starts a new episode: round-robin attachment, equal PRB split
    /// (remainder to the lowest ids), fresh CQIs from the running generator.
    pub fn reset(&mut self) {
        let cfg = &self.config;
        let (lo, hi) = cfg.initial_cqi;
        self.ues = (0..cfg.ues)
            .map(|ue_id| UeState {
                ue_id,
                cell: ue_id % cfg.cells,
                cqi: self.rng.random_range(lo..=hi),
                demand_bps: cfg.max_demand_bps,
            })
            .collect();
        self.cells = (0..cfg.cells)
            .map(|cell_id| {
                let attached: Vec<usize> = self
                    .ues
                    .iter()
                    .filter(|u| u.cell == cell_id)
                    .map(|u| u.ue_id)
                    .collect();
                let mut prb_share = BTreeMap::new();
                if !attached.is_empty() {
                    let n = attached.len() as u32;
                    let base = cfg.total_prbs / n;
                    let rem = cfg.total_prbs % n;
                    for (k, id) in attached.iter().enumerate() {
                        prb_share.insert(*id, base + u32::from((k as u32) < rem));
                    }
                }
                CellState {
                    cell_id,
                    bandwidth_hz: cfg.bandwidth_hz,
                    total_prbs: cfg.total_prbs,
                    prb_share,
                }
            })
            .collect();
        self.penalties.iter_mut().for_each(Vec::clear);
        self.time_step = 0;
    }

    pub fn agents(&self) -> usize {
        self.penalties.len()
    }

    pub fn throughput(&self, ue: &UeState) -> f64 {
        ue_throughput(ue, &self.cells[ue.cell])
    }

    fn in_scope(ue: &UeState, scope: Scope) -> bool {
        match scope {
            Scope::Global => true,
            Scope::Cell(c) => ue.cell == c,
        }
    }

    fn agent_of(&self, scope: Scope) -> usize {
        match scope {
            Scope::Global => 0,
            Scope::Cell(c) => c.min(self.agents() - 1),
        }
    }

    fn active_penalty(&self, agent: usize) -> f64 {
        match &self.trap {
            Some(t) => t.handover_penalty * self.penalties[agent].len() as f64,
            None => 0.0,
        }
    }

    /// Throughput-times-fairness score on `[0, 1000]`, less any active trap
    /// penalty. A scope without UEs scores zero.
    pub fn reward(&self, scope: Scope) -> RewardBreakdown {
        let served: Vec<f64> = self
            .ues
            .iter()
            .filter(|u| Self::in_scope(u, scope))
            .map(|u| self.throughput(u))
            .collect();
        let demand: f64 = self
            .ues
            .iter()
            .filter(|u| Self::in_scope(u, scope))
            .map(|u| u.demand_bps)
            .sum();
        let penalty = self.active_penalty(self.agent_of(scope));
        if served.is_empty() || demand <= 0.0 {
            return RewardBreakdown {
                served_bps: 0.0,
                demand_bps: demand,
                fairness: 1.0,
                penalty,
                total: 0.0,
            };
        }
        let total_served: f64 = served.iter().sum();
        let fairness = jain_fairness(&served);
        let raw = REWARD_SCALE * (total_served / demand) * fairness;
        RewardBreakdown {
            served_bps: total_served,
            demand_bps: demand,
            fairness,
            penalty,
            total: (raw - penalty).clamp(0.0, REWARD_SCALE),
        }
    }

    pub fn observe(&self, scope: Scope) -> Vec<f64> {
        let n = self.config.ues;
        let mut obs = vec![0.0; 3 * n + 1];
        let mut connected = 0usize;
        for ue in self.ues.iter().filter(|u| Self::in_scope(u, scope)) {
            let i = ue.ue_id;
            let cell = &self.cells[ue.cell];
            obs[i] = f64::from(ue.cqi) / f64::from(CQI_MAX);
            obs[n + i] = self.throughput(ue) / ue.demand_bps;
            obs[2 * n + i] = f64::from(cell.prbs_of(i)) / f64::from(cell.total_prbs);
            connected += 1;
        }
        obs[3 * n] = connected as f64 / n as f64;
        obs
    }

    fn validate_action(&self, action: RanAction) -> Result<(), RanError> {
        if action.ue_index >= self.ues.len() {
            return Err(RanError::InvalidAction(format!(
                "ue index {} out of range ({} UEs)",
                action.ue_index,
                self.ues.len()
            )));
        }
        if action.verb == Verb::Handover && self.cells.len() == 1 {
            return Err(RanError::InvalidAction(
                "handover requires more than one cell".into(),
            ));
        }
        Ok(())
    }

    fn apply(&mut self, agent: usize, action: RanAction) {
        let scope = self.config.scope_of(agent);
        let ue = &self.ues[action.ue_index];
        if action.verb == Verb::Noop || !Self::in_scope(ue, scope) {
            return;
        }
        let (id, from) = (ue.ue_id, ue.cell);
        match action.verb {
            Verb::PrbUp => {
                let cell = &mut self.cells[from];
                if cell.allocated() < cell.total_prbs {
                    *cell.prb_share.get_mut(&id).expect("attached UE has a share") += 1;
                }
            }
            Verb::PrbDown => {
                let share = self.cells[from]
                    .prb_share
                    .get_mut(&id)
                    .expect("attached UE has a share");
                *share = share.saturating_sub(1);
            }
            Verb::Handover => {
                let to = (from + 1) % self.cells.len();
                self.cells[from].prb_share.remove(&id);
                self.cells[to].prb_share.insert(id, 0);
                self.ues[action.ue_index].cell = to;
                if let Some(t) = &self.trap {
                    if t.penalty_duration > 0 {
                        self.penalties[agent].push(t.penalty_duration);
                    }
                }
            }
            Verb::Noop => {}
        }
    }

    /// Advances one step. `actions[i]` belongs to agent `i`. Returns each
    /// agent's reward for its own scope.
    pub fn step(&mut self, actions: &[RanAction]) -> Result<Vec<f64>, RanError> {
        if actions.len() != self.agents() {
            return Err(RanError::ActionCount {
                expected: self.agents(),
                actual: actions.len(),
            });
        }
        // The whole joint action is checked before anything mutates.
        for a in actions {
            self.validate_action(*a)?;
        }
        for (agent, a) in actions.iter().enumerate() {
            self.apply(agent, *a);
        }
        let rewards = (0..self.agents())
            .map(|agent| self.reward(self.config.scope_of(agent)).total)
            .collect();
        for p in &mut self.penalties {
            p.iter_mut().for_each(|r| *r -= 1);
            p.retain(|&r| r > 0);
        }
        self.walk_cqi();
        self.time_step += 1;
        Ok(rewards)
    }

    fn walk_cqi(&mut self) {
        let p = self.config.cqi_walk_prob;
        for ue in &mut self.ues {
            let u: f64 = self.rng.random();
            if u < p {
                ue.cqi = (ue.cqi + 1).min(CQI_MAX);
            } else if u < 2.0 * p {
                ue.cqi = (ue.cqi - 1).max(CQI_MIN);
            }
        }
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        for cell in &self.cells {
            if cell.allocated() > cell.total_prbs {
                return Err(format!("cell {} over budget", cell.cell_id));
            }
            for id in cell.prb_share.keys() {
                if self.ues[*id].cell != cell.cell_id {
                    return Err(format!("cell {} holds share for detached UE {id}", cell.cell_id));
                }
            }
        }
        for ue in &self.ues {
            if ue.cell >= self.cells.len() || !self.cells[ue.cell].prb_share.contains_key(&ue.ue_id) {
                return Err(format!("UE {} not attached", ue.ue_id));
            }
            if !(CQI_MIN..=CQI_MAX).contains(&ue.cqi) {
                return Err(format!("UE {} cqi {}", ue.ue_id, ue.cqi));
            }
        }
        Ok(())
    }
}

/// Writes one CSV row per step: time step, per-UE CQI, per-UE served rate
/// and each agent's reward components.
pub struct TrajectoryWriter<W: Write> {
    out: csv::Writer<W>,
    agents: usize,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(out: W, ues: usize, agents: usize) -> csv::Result<Self> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["time_step".to_string()];
        header.extend((0..ues).map(|i| format!("cqi_{i}")));
        header.extend((0..ues).map(|i| format!("served_bps_{i}")));
        for a in 0..agents {
            for c in ["served_bps", "demand_bps", "fairness", "penalty", "total"] {
                header.push(format!("agent{a}_{c}"));
            }
        }
        w.write_record(&header)?;
        Ok(Self { out: w, agents })
    }

    pub fn record(&mut self, snap: &RanSnapshot) -> csv::Result<()> {
        let mut row = vec![snap.time_step.to_string()];
        row.extend(snap.ues.iter().map(|u| u.cqi.to_string()));
        row.extend(snap.ues.iter().map(|u| snap.throughput(u).to_string()));
        for a in 0..self.agents {
            let r = snap.reward(snap.config().scope_of(a));
            for v in [r.served_bps, r.demand_bps, r.fairness, r.penalty, r.total] {
                row.push(v.to_string());
            }
        }
        self.out.write_record(&row)
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        self.out.into_inner().map_err(|e| e.into_error())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(prbs: &[(usize, u32)]) -> CellState {
        CellState {
            cell_id: 0,
            bandwidth_hz: 10e6,
            total_prbs: 50,
            prb_share: prbs.iter().copied().collect(),
        }
    }

    fn ue(id: usize, cqi: u8) -> UeState {
        UeState {
            ue_id: id,
            cell: 0,
            cqi,
            demand_bps: 1e6,
        }
    }

    #[test]
    fn efficiency_examples() {
        assert_eq!(cqi_to_efficiency(15).unwrap(), 6.0);
        assert_eq!(cqi_to_efficiency(1).unwrap(), 0.4);
        assert_eq!(cqi_to_efficiency(10).unwrap(), 4.0);
        assert_eq!(cqi_to_efficiency(0), Err(RanError::CqiOutOfRange(0)));
        assert_eq!(cqi_to_efficiency(16), Err(RanError::CqiOutOfRange(16)));
    }

    #[test]
    fn throughput_examples() {
        assert_eq!(ue_throughput(&ue(0, 15), &cell(&[(0, 50)])), 1e6);
        assert_eq!(ue_throughput(&ue(0, 15), &cell(&[(0, 0)])), 0.0);
        let t = ue_throughput(&ue(0, 1), &cell(&[(0, 5)]));
        assert!((t - 400_000.0).abs() < 1e-6);
    }

    #[test]
    fn jain_examples() {
        assert_eq!(jain_fairness(&[5.0; 4]), 1.0);
        assert_eq!(jain_fairness(&[1.0, 0.0, 0.0, 0.0]), 0.25);
        assert!((jain_fairness(&[1.0, 3.0]) - 0.8).abs() < 1e-15);
        assert_eq!(jain_fairness(&[0.0, 0.0]), 1.0);
    }

    fn snapshot_with(prbs: &[u32], cqi: u8) -> RanSnapshot {
        let mut cfg = EnvConfig::new(1, prbs.len());
        cfg.cqi_walk_prob = 0.0;
        let mut s = RanSnapshot::new(cfg, 1).unwrap();
        for (i, u) in s.ues.iter_mut().enumerate() {
            u.cqi = cqi;
            s.cells[0].prb_share.insert(i, prbs[i]);
        }
        s
    }

    #[test]
    fn reward_examples() {
        // 4 UEs with 12 PRBs at CQI 10 each get 0.24 * 10e6 * 4 >> 1 Mbps.
        let full = snapshot_with(&[12, 12, 12, 12], 10);
        assert_eq!(full.reward(Scope::Global).total, 1000.0);

        let none = snapshot_with(&[0, 0, 0, 0], 10);
        assert_eq!(none.reward(Scope::Global).total, 0.0);

        let mut prbs = vec![0; 13];
        prbs[0] = 50;
        let one = snapshot_with(&prbs, 15);
        let r = one.reward(Scope::Global);
        assert!((r.total - 1000.0 / 169.0).abs() < 1e-9);
        assert!((r.total - 5.92).abs() < 0.01);
    }

    #[test]
    fn initial_state_layout() {
        let s = RanSnapshot::new(EnvConfig::new(2, 7), 3).unwrap();
        assert_eq!(s.ues.iter().map(|u| u.cell).collect::<Vec<_>>(), vec![0, 1, 0, 1, 0, 1, 0]);
        // Cell 0 has 4 UEs: 50 = 13 + 13 + 12 + 12.
        assert_eq!(s.cells[0].prb_share.values().copied().collect::<Vec<_>>(), vec![13, 13, 12, 12]);
        assert_eq!(s.cells[1].allocated(), 50);
        assert!(s.ues.iter().all(|u| (5..=12).contains(&u.cqi)));
        s.check_invariants().unwrap();
    }

    #[test]
    fn noop_step_without_walk_only_advances_time() {
        let mut cfg = EnvConfig::new(1, 13);
        cfg.cqi_walk_prob = 0.0;
        let mut s = RanSnapshot::new(cfg, 5).unwrap();
        let before = s.clone();
        let r0 = s.reward(Scope::Global).total;
        let r = s.step(&[RanAction::noop()]).unwrap();
        assert_eq!(r, vec![r0]);
        assert_eq!(s.time_step, before.time_step + 1);
        assert_eq!(s.ues, before.ues);
        assert_eq!(s.cells, before.cells);
    }

    #[test]
    fn prb_down_clamps_at_zero() {
        let mut s = snapshot_with(&[0, 5], 8);
        s.step(&[RanAction { ue_index: 0, verb: Verb::PrbDown }]).unwrap();
        assert_eq!(s.cells[0].prbs_of(0), 0);
        assert_eq!(s.cells[0].prbs_of(1), 5);
    }

    #[test]
    fn prb_up_respects_budget() {
        let mut s = snapshot_with(&[25, 25], 8);
        s.step(&[RanAction { ue_index: 0, verb: Verb::PrbUp }]).unwrap();
        assert_eq!(s.cells[0].allocated(), 50);
        s.step(&[RanAction { ue_index: 1, verb: Verb::PrbDown }]).unwrap();
        s.step(&[RanAction { ue_index: 0, verb: Verb::PrbUp }]).unwrap();
        assert_eq!(s.cells[0].prbs_of(0), 26);
        assert_eq!(s.cells[0].prbs_of(1), 24);
    }

    #[test]
    fn handover_rejected_in_single_cell() {
        let mut s = RanSnapshot::new(EnvConfig::new(1, 3), 0).unwrap();
        let before = s.clone();
        let err = s.step(&[RanAction { ue_index: 1, verb: Verb::Handover }]).unwrap_err();
        assert!(matches!(err, RanError::InvalidAction(_)));
        assert_eq!(s, before);
    }

    #[test]
    fn handover_moves_ue_and_applies_trap() {
        let mut cfg = EnvConfig::new(2, 4).with_trap(TrapProfile::default());
        cfg.cqi_walk_prob = 0.0;
        let mut s = RanSnapshot::new(cfg, 0).unwrap();
        let base = s.reward(Scope::Cell(0)).total;
        // UE 0 lives in cell 0, controlled by agent 0.
        let r = s
            .step(&[RanAction { ue_index: 0, verb: Verb::Handover }, RanAction::noop()])
            .unwrap();
        assert_eq!(s.ues[0].cell, 1);
        assert_eq!(s.cells[1].prbs_of(0), 0);
        assert!(!s.cells[0].prb_share.contains_key(&0));
        s.check_invariants().unwrap();
        assert_eq!(s.reward(Scope::Cell(0)).penalty, 400.0);
        assert_eq!(base, 1000.0);
        // Penalty covers the handover step and the two after it.
        assert_eq!(r[0], 600.0);
        for _ in 0..2 {
            let r = s.step(&[RanAction::noop(), RanAction::noop()]).unwrap();
            assert_eq!(r[0], 600.0);
        }
        let r = s.step(&[RanAction::noop(), RanAction::noop()]).unwrap();
        assert_eq!(r[0], 1000.0);
    }

    #[test]
    fn actions_outside_scope_are_ignored() {
        let mut cfg = EnvConfig::new(2, 4);
        cfg.cqi_walk_prob = 0.0;
        let mut s = RanSnapshot::new(cfg, 0).unwrap();
        let before = s.cells.clone();
        // UE 1 belongs to cell 1; agent 0 cannot touch it.
        s.step(&[RanAction { ue_index: 1, verb: Verb::PrbDown }, RanAction::noop()])
            .unwrap();
        assert_eq!(s.cells, before);
    }

    #[test]
    fn observation_layout() {
        let s = snapshot_with(&[0; 13], 9);
        let obs = s.observe(Scope::Global);
        assert_eq!(obs.len(), 40);
        assert!(obs[..13].iter().all(|&c| c > 0.0));
        assert!(obs[13..39].iter().all(|&v| v == 0.0));
        assert_eq!(obs[39], 1.0);
        assert_eq!(obs, s.observe(Scope::Global));
    }

    #[test]
    fn observation_zero_pads_other_cells() {
        let s = RanSnapshot::new(EnvConfig::new(2, 4), 0).unwrap();
        let obs = s.observe(Scope::Cell(1));
        assert_eq!(obs[0], 0.0);
        assert!(obs[1] > 0.0);
        assert_eq!(obs[12], 0.5);
    }

    #[test]
    fn seeded_replay_is_identical() {
        let script: Vec<RanAction> = (0..10)
            .map(|i| RanAction {
                ue_index: i % 13,
                verb: [Verb::PrbUp, Verb::PrbDown, Verb::Noop][i % 3],
            })
            .collect();
        let run = || {
            let mut s = RanSnapshot::new(EnvConfig::new(1, 13), 42).unwrap();
            for a in &script {
                s.step(&[*a]).unwrap();
            }
            s
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn trajectory_csv_rows() {
        let mut s = RanSnapshot::new(EnvConfig::new(1, 2), 0).unwrap();
        let mut w = TrajectoryWriter::new(Vec::new(), 2, 1).unwrap();
        w.record(&s).unwrap();
        s.step(&[RanAction::noop()]).unwrap();
        w.record(&s).unwrap();
        let text = String::from_utf8(w.finish().unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("time_step,cqi_0,cqi_1,served_bps_0"));
        assert!(lines[2].starts_with("1,"));
    }
}
