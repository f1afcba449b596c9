//! The optimiser worker: one thread draining a FIFO of requests, one job
//! at a time.

use std::thread::{self, JoinHandle};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::fitness::{eval_seeds, EnvFactory, PolicyEvaluator, EVAL_EPISODES};
use super::ga::evolve;
use super::{scale_params, tier_params, GaOverrides, GaParams, GaTier};
use crate::federation::{
    scaling_factor, Envelope, Mailbox, OptimizationRequest, OptimizationResponse, Payload, ResourceProvider, Router,
};
use crate::neuro::NeuralNet;

#[derive(Clone, Debug)]
pub struct OptimizerConfig {
    /// Root of every job's GA generator.
    pub seed: u64,
    /// Root of the fixed evaluation seed list shared by all jobs.
    pub eval_seed_base: u64,
    pub eval_episodes: usize,
    pub overrides: GaOverrides,
    /// Stop a job as soon as its best fitness reaches the request target.
    pub early_exit: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            eval_seed_base: 0,
            eval_episodes: EVAL_EPISODES,
            overrides: GaOverrides::default(),
            early_exit: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

/// One processed request. Times are milliseconds since the run epoch.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JobRecord {
    pub job_id: u64,
    pub agent_id: u32,
    pub correlation_id: u64,
    pub tier: GaTier,
    pub scaling_factor: f64,
    pub params: GaParams,
    pub status: JobStatus,
    pub started_ms: f64,
    pub finished_ms: f64,
    pub best_fitness: f64,
    pub incumbent_fitness: f64,
    pub generations_run: usize,
    pub evaluations: usize,
    pub early_exit: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GenerationLog {
    pub job_id: u64,
    pub agent_id: u32,
    pub generation: u32,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OptimizerReport {
    pub jobs: Vec<JobRecord>,
    pub generations: Vec<GenerationLog>,
}

/// Starts the worker. It serves `inbox` until the router closes the
/// optimiser endpoint, then returns its job log.
pub fn spawn_optimizer(
    router: Router,
    inbox: Mailbox,
    factory: EnvFactory,
    cfg: OptimizerConfig,
    mut resources: Box<dyn ResourceProvider>,
    epoch: Instant,
) -> JoinHandle<OptimizerReport> {
    thread::Builder::new()
        .name("ne-optimizer".into())
        .spawn(move || {
            let mut report = OptimizerReport::default();
            let ms = |t: Instant| t.duration_since(epoch).as_secs_f64() * 1e3;
            while let Some(msg) = inbox.recv() {
                let env = match msg {
                    Ok(env) => env,
                    Err(e) => {
                        log::error!("optimizer dropped undecodable frame: {e}");
                        continue;
                    }
                };
                let Payload::Request(req) = &env.payload else {
                    log::error!("optimizer received a non-request message");
                    continue;
                };
                let job_id = report.jobs.len() as u64 + 1;
                let start = Instant::now();
                let s = scaling_factor(&resources.snapshot());
                let (resp, mut rec, gens) = run_job(job_id, &env, req, s, &factory, &cfg, start);
                rec.started_ms = ms(start);
                let end = Instant::now();
                rec.finished_ms = ms(end);
                let resp = OptimizationResponse {
                    wall_time_ms: end.duration_since(start).as_secs_f64() * 1e3,
                    ..resp
                };
                log::info!(
                    "job {job_id} for agent {} done: fitness {:.2} (incumbent {:.2}) in {:.0} ms",
                    env.agent_id,
                    resp.fitness,
                    resp.incumbent_fitness,
                    resp.wall_time_ms
                );
                report.jobs.push(rec);
                report.generations.extend(gens);
                if let Err(e) = router.route(&Envelope::response(env.agent_id, env.correlation_id, resp)) {
                    log::error!("response for job {job_id} could not be encoded: {e}");
                }
            }
            report
        })
        .expect("spawn optimizer thread")
}

fn run_job(
    job_id: u64,
    env: &Envelope,
    req: &OptimizationRequest,
    s: f64,
    factory: &EnvFactory,
    cfg: &OptimizerConfig,
    start: Instant,
) -> (OptimizationResponse, JobRecord, Vec<GenerationLog>) {
    let params = scale_params(&cfg.overrides.apply(&tier_params(req.indication)), s).expect("scaling factor within [0, 1]");
    let mut rec = JobRecord {
        job_id,
        agent_id: env.agent_id,
        correlation_id: env.correlation_id,
        tier: req.indication,
        scaling_factor: s,
        params,
        status: JobStatus::Running,
        started_ms: 0.0,
        finished_ms: 0.0,
        best_fitness: f64::MIN,
        incumbent_fitness: 0.0,
        generations_run: 0,
        evaluations: 0,
        early_exit: false,
    };
    // A failed job answers with the unchanged genome and the lowest
    // representable fitness, so the gate always turns it away.
    let failed = |rec: &mut JobRecord, why: String| {
        log::error!("job {job_id} failed: {why}");
        rec.status = JobStatus::Failed;
        OptimizationResponse {
            genome: req.genome.clone(),
            fitness: f64::MIN,
            applied_params: params,
            wall_time_ms: 0.0,
            incumbent_fitness: 0.0,
        }
    };
    let seed_genome = match req.genome() {
        Ok(g) => g,
        Err(e) => return (failed(&mut rec, e.to_string()), rec, Vec::new()),
    };
    let evaluator = match evaluator_for(env.agent_id, req, factory, cfg) {
        Ok(e) => e,
        Err(e) => return (failed(&mut rec, e), rec, Vec::new()),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ env.correlation_id.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut gens = Vec::new();
    let target = cfg.early_exit.then_some(req.target_return);
    let outcome = evolve(&seed_genome, &params, &evaluator, target, &mut rng, |g| {
        gens.push(GenerationLog {
            job_id,
            agent_id: env.agent_id,
            generation: g.generation,
            best_fitness: g.best_fitness,
            mean_fitness: g.mean_fitness,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    });
    match outcome {
        Ok(out) => {
            rec.status = JobStatus::Done;
            rec.best_fitness = out.best_fitness;
            rec.incumbent_fitness = out.seed_fitness;
            rec.generations_run = out.history.len();
            rec.evaluations = out.evaluations;
            rec.early_exit = out.early_exit;
            let resp = OptimizationResponse {
                genome: out.best.values().to_vec(),
                fitness: out.best_fitness,
                applied_params: params,
                wall_time_ms: 0.0,
                incumbent_fitness: out.seed_fitness,
            };
            (resp, rec, gens)
        }
        Err(e) => (failed(&mut rec, e.to_string()), rec, gens),
    }
}

fn evaluator_for(
    agent_id: u32,
    req: &OptimizationRequest,
    factory: &EnvFactory,
    cfg: &OptimizerConfig,
) -> Result<PolicyEvaluator, String> {
    let slot = agent_id as usize;
    let slots = req
        .peers
        .iter()
        .map(|p| p.agent_id as usize + 1)
        .max()
        .unwrap_or(0)
        .max(slot + 1);
    let mut peers: Vec<Option<NeuralNet>> = vec![None; slots];
    for p in &req.peers {
        let net = NeuralNet::from_values(&p.genome, &p.topology).map_err(|e| format!("peer {}: {e}", p.agent_id))?;
        peers[p.agent_id as usize] = Some(net);
    }
    if peers.iter().enumerate().any(|(i, p)| i != slot && p.is_none()) {
        return Err("request is missing a peer policy".into());
    }
    if peers[slot].is_some() {
        return Err("peer list contains the requesting agent".into());
    }
    Ok(PolicyEvaluator::new(
        factory.clone(),
        req.topology.clone(),
        slot,
        peers,
        eval_seeds(cfg.eval_seed_base, cfg.eval_episodes),
    ))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::agents::{ConstantEnv, Environment};
    use crate::federation::{PeerPolicy, ResourceSnapshot, StaticProvider};
    use crate::neuro::{NetTopology, OutputHead};

    /// Two-slot request from `agent`, with the other slot as a zero peer.
    fn request(indication: GaTier, agent: u32) -> OptimizationRequest {
        let t = NetTopology::new(vec![2, 2], OutputHead::Linear).unwrap();
        OptimizationRequest {
            genome: vec![0.0; t.genome_length()],
            topology: t.clone(),
            indication,
            window_returns: vec![0.0; 3],
            target_return: 1000.0,
            incumbent_fitness: Some(0.0),
            peers: vec![PeerPolicy {
                agent_id: 1 - agent,
                genome: vec![0.0; t.genome_length()],
                topology: t,
            }],
        }
    }

    fn start(router: &Router, scale: f64) -> JoinHandle<OptimizerReport> {
        let factory: EnvFactory = Arc::new(|_| {
            let mut env = ConstantEnv::new(10.0, 2, 2);
            env.agents = 2;
            Box::new(env) as Box<dyn Environment>
        });
        spawn_optimizer(
            router.clone(),
            router.register_optimizer(),
            factory,
            OptimizerConfig {
                early_exit: false,
                ..OptimizerConfig::default()
            },
            Box::new(StaticProvider(ResourceSnapshot::uniform(scale).unwrap())),
            Instant::now(),
        )
    }

    #[test]
    fn fifo_and_sequential() {
        let router = Router::new();
        let a = router.register_agent(0);
        let b = router.register_agent(1);
        let worker = start(&router, 0.05);
        let ca = router.next_correlation_id();
        let cb = router.next_correlation_id();
        router.route(&Envelope::request(0, ca, request(GaTier::Low, 0))).unwrap();
        router.route(&Envelope::request(1, cb, request(GaTier::Medium, 1))).unwrap();
        let ra = a.recv().unwrap().unwrap();
        let rb = b.recv().unwrap().unwrap();
        router.close_optimizer();
        let report = worker.join().unwrap();
        assert_eq!((ra.correlation_id, rb.correlation_id), (ca, cb));
        assert_eq!(report.jobs.len(), 2);
        assert_eq!(report.jobs[0].correlation_id, ca);
        assert!(report.jobs[1].started_ms >= report.jobs[0].finished_ms);
        assert!(report.jobs.iter().all(|j| j.status == JobStatus::Done));
        // Scaled budgets: ceil(0.05 * 40) = 2, ceil(0.05 * 70) = 4.
        assert_eq!(report.jobs[0].params.population, 2);
        assert_eq!(report.jobs[1].params.population, 4);
        let Payload::Response(resp) = ra.payload else { panic!() };
        assert_eq!(resp.fitness, 10.0);
        assert_eq!(resp.incumbent_fitness, 10.0);
    }

    #[test]
    fn idle_queue_emits_nothing() {
        let router = Router::new();
        let a = router.register_agent(0);
        let worker = start(&router, 1.0);
        router.close_optimizer();
        let report = worker.join().unwrap();
        assert!(report.jobs.is_empty());
        assert!(a.try_recv().is_none());
    }
}
