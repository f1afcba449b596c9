//! Wires environment, agents, router and optimiser together for one run.

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use super::config::{DeliveryMode, ExperimentConfig, ScalingSource};
use super::metrics::{summarize_returns, MetricsRecord, RunSummary, Variant};
use super::HarnessError;
use crate::agents::{run_episode, should_trigger, Agent, Environment};
use crate::federation::{
    deploy_gate, gated_incumbent, DeadLetter, Envelope, Mailbox, OptimizationRequest, OptimizationResponse, Payload,
    PeerPolicy, ResourceProvider, ResourceSnapshot, Router, ScriptedProvider, StaticProvider,
};
use crate::ne::{spawn_optimizer, EnvFactory, GenerationLog, JobRecord, OptimizerConfig};
use crate::ransim::RanSnapshot;

/// Outcome of handing one response to its agent.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GateEvent {
    pub run_seed: u64,
    /// Episode after which the response was handled.
    pub episode: u64,
    pub agent_id: u32,
    pub correlation_id: u64,
    pub candidate_fitness: f64,
    pub window_fitness: Option<f64>,
    pub optimizer_incumbent_fitness: f64,
    pub gated_incumbent: f64,
    pub accepted: bool,
    pub digest_before: String,
    pub digest_after: String,
}

pub const GATE_HEADER: &[&str] = &[
    "run_seed",
    "episode",
    "agent_id",
    "correlation_id",
    "candidate_fitness",
    "window_fitness",
    "optimizer_incumbent_fitness",
    "gated_incumbent",
    "accepted",
    "digest_before",
    "digest_after",
];

/// Wall-clock extent of one episode, milliseconds since the run epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpisodeSpan {
    pub episode: u64,
    pub start_ms: f64,
    pub end_ms: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub variant: Variant,
    pub seed: u64,
    pub metrics: Vec<MetricsRecord>,
    pub summaries: Vec<RunSummary>,
    pub jobs: Vec<JobRecord>,
    pub generations: Vec<GenerationLog>,
    pub gate_events: Vec<GateEvent>,
    pub spans: Vec<EpisodeSpan>,
    pub dead_letters: Vec<DeadLetter>,
    /// Responses that came back after the last episode and were not applied.
    pub late_responses: usize,
}

struct Pending {
    correlation_id: u64,
    request: OptimizationRequest,
    due: u64,
}

fn digest_hex(d: u64) -> String {
    format!("{d:016x}")
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03)
}

fn provider(src: &ScalingSource) -> Box<dyn ResourceProvider> {
    match src {
        ScalingSource::Static(s) => Box::new(StaticProvider(
            ResourceSnapshot::uniform(*s).expect("validated scaling level"),
        )),
        ScalingSource::Script(v) => Box::new(ScriptedProvider::new(v.clone())),
    }
}

/// Runs one seed of `cfg`. The variant follows `cfg.ga_enabled`.
pub fn run_experiment(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let variant = if cfg.ga_enabled {
        Variant::GaActivated
    } else {
        Variant::Baseline
    };
    let epoch = Instant::now();
    let ms = |t: Instant| t.duration_since(epoch).as_secs_f64() * 1e3;

    let env_cfg = cfg.env.clone();
    let mut env = RanSnapshot::new(env_cfg.clone(), derive_seed(seed, 1))?;
    let agent_cfg = cfg.agent_config();
    let mut agents = (0..env.agents())
        .map(|i| {
            Agent::new(
                i,
                &agent_cfg,
                Environment::observation_len(&env),
                Environment::action_count(&env),
                derive_seed(seed, 100 + i as u64),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;

    let router = Router::new();
    let mailboxes: Vec<Mailbox> = (0..agents.len()).map(|i| router.register_agent(i as u32)).collect();
    let optimizer = cfg.ga_enabled.then(|| {
        let factory_cfg = env_cfg.clone();
        let factory: EnvFactory = Arc::new(move |s| {
            Box::new(RanSnapshot::new(factory_cfg.clone(), s).expect("validated environment")) as Box<dyn Environment>
        });
        spawn_optimizer(
            router.clone(),
            router.register_optimizer(),
            factory,
            OptimizerConfig {
                seed: derive_seed(seed, 2),
                eval_seed_base: derive_seed(seed, 3),
                eval_episodes: cfg.optimizer.eval_episodes,
                overrides: cfg.ga_overrides.unwrap_or_default(),
                early_exit: cfg.optimizer.early_exit,
            },
            provider(&cfg.scaling_source),
            epoch,
        )
    });

    let n = agents.len();
    let mut pending: Vec<Option<Pending>> = (0..n).map(|_| None).collect();
    let mut metrics = Vec::with_capacity(cfg.episodes * n);
    let mut gate_events = Vec::new();
    let mut spans = Vec::with_capacity(cfg.episodes);
    let target = agent_cfg.target_return;

    for episode in 1..=cfg.episodes as u64 {
        let ne_active = pending.iter().any(Option::is_some);
        let start = Instant::now();
        let stats = run_episode(&mut agents, &mut env)?;
        spans.push(EpisodeSpan {
            episode,
            start_ms: ms(start),
            end_ms: ms(Instant::now()),
        });
        let first_row = metrics.len();
        for i in 0..n {
            metrics.push(MetricsRecord {
                variant,
                run_seed: seed,
                episode,
                agent_id: i as u32,
                ret: stats.returns[i],
                epsilon: stats.epsilons[i],
                drl_action_time_ms: stats.decision_ms[i],
                ne_active,
                ne_job_ms: None,
                ga_triggered: false,
                deployed: false,
                param_digest: digest_hex(stats.start_digests[i]),
            });
        }

        // Responses first, so a freed agent may ask again at this boundary.
        for i in 0..n {
            let due = match (&pending[i], cfg.delivery) {
                (None, _) => continue,
                (Some(p), DeliveryMode::Lockstep { .. }) => p.due <= episode,
                (Some(_), DeliveryMode::Async) => true,
            };
            if !due {
                continue;
            }
            let blocking = matches!(cfg.delivery, DeliveryMode::Lockstep { .. });
            let Some((cid, resp)) = receive(&mailboxes[i], blocking)? else {
                continue;
            };
            let p = pending[i].take().expect("checked above");
            if cid != p.correlation_id {
                return Err(HarnessError::Protocol(format!(
                    "agent {i} expected correlation {} but got {cid}",
                    p.correlation_id
                )));
            }
            let event = deliver(&mut agents[i], &p.request, &resp, seed, episode, cid)?;
            let row = &mut metrics[first_row + i];
            row.ne_job_ms = Some(resp.wall_time_ms);
            row.deployed = event.accepted;
            gate_events.push(event);
        }

        if cfg.ga_enabled {
            for i in 0..n {
                if !agents[i].monitor().at_boundary() {
                    continue;
                }
                let tier = should_trigger(
                    agents[i].monitor(),
                    &agent_cfg.trigger,
                    target,
                    agent_cfg.indication_override,
                    pending[i].is_some(),
                );
                if let Some(tier) = tier {
                    let request = build_request(&agents, i, tier);
                    let correlation_id = router.next_correlation_id();
                    router.route(&Envelope::request(i as u32, correlation_id, request.clone()))?;
                    let lag = match cfg.delivery {
                        DeliveryMode::Lockstep { lag } => u64::from(lag),
                        DeliveryMode::Async => 0,
                    };
                    pending[i] = Some(Pending {
                        correlation_id,
                        request,
                        due: episode + lag,
                    });
                    metrics[first_row + i].ga_triggered = true;
                }
            }
        }
        for a in agents.iter_mut() {
            if a.monitor().at_boundary() {
                a.monitor_mut().close_window();
            }
        }
    }

    // Every request gets its answer, even one that arrives after the run.
    let mut late_responses = 0;
    for (i, p) in pending.iter_mut().enumerate() {
        if let Some(p) = p.take() {
            match receive(&mailboxes[i], true)? {
                Some((cid, _)) if cid == p.correlation_id => late_responses += 1,
                _ => return Err(HarnessError::Protocol(format!("agent {i} lost its final response"))),
            }
        }
    }
    router.close_optimizer();
    let report = match optimizer {
        Some(h) => h
            .join()
            .map_err(|_| HarnessError::Protocol("optimizer thread panicked".into()))?,
        None => Default::default(),
    };

    let summaries = (0..n as u32)
        .map(|i| summarize_agent(&metrics, &report.jobs, variant, seed, i, cfg.ne_interval, target))
        .collect();
    Ok(RunOutput {
        variant,
        seed,
        metrics,
        summaries,
        jobs: report.jobs,
        generations: report.generations,
        gate_events,
        spans,
        dead_letters: router.dead_letters(),
        late_responses,
    })
}

/// Runs the configured variant and, when it is GA-activated, its baseline
/// on the same seed.
pub fn run_pair(cfg: &ExperimentConfig, seed: u64) -> Result<(RunOutput, Option<RunOutput>), HarnessError> {
    let main = run_experiment(cfg, seed)?;
    let baseline = if cfg.ga_enabled {
        let mut b = cfg.clone();
        b.ga_enabled = false;
        Some(run_experiment(&b, seed)?)
    } else {
        None
    };
    Ok((main, baseline))
}

fn receive(mailbox: &Mailbox, blocking: bool) -> Result<Option<(u64, OptimizationResponse)>, HarnessError> {
    let msg = if blocking {
        match mailbox.recv() {
            Some(m) => m,
            None => return Err(HarnessError::Protocol("router closed while waiting for a response".into())),
        }
    } else {
        match mailbox.try_recv() {
            Some(m) => m,
            None => return Ok(None),
        }
    };
    let env = msg?;
    match env.payload {
        Payload::Response(r) => Ok(Some((env.correlation_id, r))),
        Payload::Request(_) => Err(HarnessError::Protocol("agent mailbox received a request".into())),
    }
}

fn build_request(agents: &[Agent], i: usize, tier: crate::ne::GaTier) -> OptimizationRequest {
    let a = &agents[i];
    OptimizationRequest {
        genome: a.genome().values().to_vec(),
        topology: a.topology().clone(),
        indication: tier,
        window_returns: a.monitor().returns().collect(),
        target_return: a.config().target_return,
        incumbent_fitness: a.monitor().average(),
        peers: agents
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(j, p)| PeerPolicy {
                agent_id: j as u32,
                topology: p.topology().clone(),
                genome: p.genome().values().to_vec(),
            })
            .collect(),
    }
}

fn deliver(
    agent: &mut Agent,
    request: &OptimizationRequest,
    resp: &OptimizationResponse,
    seed: u64,
    episode: u64,
    correlation_id: u64,
) -> Result<GateEvent, HarnessError> {
    let incumbent = gated_incumbent(request, resp);
    let pass = resp.fitness.is_finite() && deploy_gate(resp.fitness, incumbent);
    let before = agent.param_digest();
    let genome = crate::neuro::Genome::new(resp.genome.clone(), request.topology.clone())?;
    let accepted = agent.apply_genome(&genome, pass)?;
    let after = agent.param_digest();
    log::debug!(
        "agent {} episode {episode}: candidate {:.2} vs incumbent {:.2} -> {}",
        agent.id(),
        resp.fitness,
        incumbent,
        if accepted { "deployed" } else { "rejected" }
    );
    Ok(GateEvent {
        run_seed: seed,
        episode,
        agent_id: agent.id() as u32,
        correlation_id,
        candidate_fitness: resp.fitness,
        window_fitness: request.incumbent_fitness,
        optimizer_incumbent_fitness: resp.incumbent_fitness,
        gated_incumbent: incumbent,
        accepted,
        digest_before: digest_hex(before),
        digest_after: digest_hex(after),
    })
}

fn summarize_agent(
    metrics: &[MetricsRecord],
    jobs: &[JobRecord],
    variant: Variant,
    seed: u64,
    agent: u32,
    ne_interval: usize,
    target: f64,
) -> RunSummary {
    let returns: Vec<f64> = metrics.iter().filter(|m| m.agent_id == agent).map(|m| m.ret).collect();
    let (episodes_to_target, final_window_avg, stalled) = summarize_returns(&returns, ne_interval, target);
    let mine = jobs.iter().filter(|j| j.agent_id == agent);
    RunSummary {
        variant,
        run_seed: seed,
        agent_id: agent,
        episodes: returns.len() as u64,
        episodes_to_target,
        final_window_avg,
        stalled,
        total_ne_jobs: mine.clone().count() as u64,
        total_ne_wall_ms: mine.map(|j| j.finished_ms - j.started_ms).sum(),
    }
}

/// Summaries recomputed from metrics alone, as `summarize --in` does.
pub fn summarize(metrics: &[MetricsRecord], ne_interval: usize, target: f64) -> Vec<RunSummary> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(Variant, u64, u32), Vec<&MetricsRecord>> = BTreeMap::new();
    for m in metrics {
        groups.entry((m.variant, m.run_seed, m.agent_id)).or_default().push(m);
    }
    groups
        .into_iter()
        .map(|((variant, seed, agent), mut rows)| {
            rows.sort_by_key(|m| m.episode);
            let returns: Vec<f64> = rows.iter().map(|m| m.ret).collect();
            let (episodes_to_target, final_window_avg, stalled) = summarize_returns(&returns, ne_interval, target);
            RunSummary {
                variant,
                run_seed: seed,
                agent_id: agent,
                episodes: returns.len() as u64,
                episodes_to_target,
                final_window_avg,
                stalled,
                total_ne_jobs: rows.iter().filter(|m| m.ne_job_ms.is_some()).count() as u64,
                total_ne_wall_ms: rows.iter().filter_map(|m| m.ne_job_ms).sum(),
            }
        })
        .collect()
}
