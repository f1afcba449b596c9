use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fonrl::harness::{
    bundled, read_metrics, run_pair, summarize, write_outputs, write_table, ExperimentConfig, HarnessError,
    MetricsRecord, RunSummary, GATE_HEADER,
};

#[derive(Parser)]
#[command(name = "fonrl", version, about = "Neuroevolution-assisted RL controllers on a simulated RAN")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV outputs.
    Run {
        /// Config file, or the name of a bundled config such as `exp3`.
        #[arg(long)]
        config: String,
        /// Run only this seed instead of every seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Run with the optimiser switched off.
        #[arg(long)]
        baseline: bool,
        /// Override the episode count.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Check a config file and report the first problem.
    Validate {
        #[arg(long)]
        config: String,
    },
    /// Recompute summaries from a run directory.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn load(config: &str) -> Result<ExperimentConfig, HarnessError> {
    let path = Path::new(config);
    if !path.exists() {
        if let Some(text) = bundled(config) {
            return ExperimentConfig::from_json(text);
        }
    }
    ExperimentConfig::load(path)
}

fn io(path: &Path, e: impl ToString) -> HarnessError {
    HarnessError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn print_summaries(rows: &[RunSummary]) {
    println!("variant       seed agent  to_target  final_avg  stalled  jobs");
    for s in rows {
        println!(
            "{:<12} {:>5} {:>5} {:>10} {:>10.1} {:>8} {:>5}",
            s.variant.as_str(),
            s.run_seed,
            s.agent_id,
            s.episodes_to_target.map_or("-".to_string(), |e| e.to_string()),
            s.final_window_avg,
            s.stalled,
            s.total_ne_jobs
        );
    }
}

fn run(config: &str, seed: Option<u64>, out: &Path, baseline: bool, episodes: Option<usize>) -> Result<(), HarnessError> {
    let mut cfg = load(config)?;
    if let Some(e) = episodes {
        cfg.episodes = e;
    }
    if baseline {
        cfg.ga_enabled = false;
    }
    cfg.validate()?;
    let seeds = seed.map_or_else(|| cfg.seeds.clone(), |s| vec![s]);

    let mut metrics: Vec<MetricsRecord> = Vec::new();
    let mut summaries = Vec::new();
    let mut jobs = Vec::new();
    let mut generations = Vec::new();
    let mut gates = Vec::new();
    for s in seeds {
        log::info!("{}: seed {s}", cfg.name);
        let (main, base) = run_pair(&cfg, s)?;
        for r in std::iter::once(main).chain(base) {
            metrics.extend(r.metrics);
            summaries.extend(r.summaries);
            jobs.extend(r.jobs.into_iter().map(|j| (s, j)));
            generations.extend(r.generations.into_iter().map(|g| (s, g)));
            gates.extend(r.gate_events);
        }
    }

    write_outputs(&metrics, &summaries, cfg.ne_interval, out)?;
    write_table(&out.join("gate.csv"), &gates, GATE_HEADER)?;
    let job_rows: Vec<_> = jobs
        .iter()
        .map(|(s, j)| {
            (
                s,
                j.job_id,
                j.agent_id,
                j.correlation_id,
                j.tier.as_str(),
                j.scaling_factor,
                j.params.generations,
                j.params.population,
                j.started_ms,
                j.finished_ms,
                j.best_fitness,
                j.incumbent_fitness,
                j.generations_run,
            )
        })
        .collect();
    write_table(
        &out.join("jobs.csv"),
        &job_rows,
        &[
            "run_seed",
            "job_id",
            "agent_id",
            "correlation_id",
            "tier",
            "scaling_factor",
            "generations",
            "population",
            "started_ms",
            "finished_ms",
            "best_fitness",
            "incumbent_fitness",
            "generations_run",
        ],
    )?;
    let gen_rows: Vec<_> = generations
        .iter()
        .map(|(s, g)| (s, g.job_id, g.agent_id, g.generation, g.best_fitness, g.mean_fitness, g.wall_ms))
        .collect();
    write_table(
        &out.join("ne_generations.csv"),
        &gen_rows,
        &["run_seed", "job_id", "agent_id", "generation", "best_fitness", "mean_fitness", "wall_ms"],
    )?;
    let cfg_path = out.join("config.json");
    let text = serde_json::to_string_pretty(&cfg).map_err(|e| io(&cfg_path, e))?;
    fs::write(&cfg_path, text).map_err(|e| io(&cfg_path, e))?;
    print_summaries(&summaries);
    Ok(())
}

fn summarize_dir(dir: &Path) -> Result<(), HarnessError> {
    let cfg = ExperimentConfig::load(&dir.join("config.json"))?;
    let metrics = read_metrics(&dir.join("metrics.csv"))?;
    if metrics.is_empty() {
        println!("no episodes recorded");
        return Ok(());
    }
    print_summaries(&summarize(&metrics, cfg.ne_interval, cfg.agent.target_return));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            out,
            baseline,
            episodes,
        } => run(&config, seed, &out, baseline, episodes),
        Command::Validate { config } => load(&config).map(|c| println!("{}: ok", c.name)),
        Command::Summarize { input } => summarize_dir(&input),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
