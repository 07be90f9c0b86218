//! Monte Carlo orchestration: configuration, trials, aggregation and output.

mod config;
mod emit;
mod metrics;
mod replay;
mod trial;

pub use config::{parse_agents, AgentKind, ExperimentConfig};
pub use emit::{emit_results, fmt_g, resolve_out_dir, summarize, AgentHeadline, Summary, SublinearMonitor, DEFAULT_OUT_DIR, OUT_DIR_ENV};
pub use metrics::{aggregate, mean_stderr, median, paired_difference, AgentMetrics, AgentSummary, AggregateRecord, MetricsRecord, Stat};
pub use replay::{replay_csv, replay_scene, ReplayRow};
pub use trial::{run_track, run_trial, run_trial_traced, trial_seed, TrackDraws, TrackOutcome, TrialTrace};

use crate::error::{Error, Result};
use rayon::prelude::*;

/// Runs `cfg.trials` trials on a pool of `cfg.workers` threads. The records
/// come back in trial order, so the output does not depend on the pool size.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<Vec<MetricsRecord>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| trial::run_trial_inner(cfg, trial_seed(cfg.seed, t), t, None))
            .collect()
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(Vec<MetricsRecord>, AggregateRecord)> {
    let trials = run_trials(cfg)?;
    let agg = aggregate(&trials)?;
    Ok((trials, agg))
}
