//! Trace rows and per-replicate chain execution.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use pgsm::baselines::{run_chain, Budget, Chain, ChainConfig, ChainCounters, Progress, RunSummary};
use pgsm::eval::{moving_average, predictive_log_density, v_measure};
use pgsm::{ConjugateModel, PartitionPrior, PgsmError};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::seeding;

/// One line of a trace file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: u64,
    /// Cumulative sampler seconds; absent when timing output is disabled.
    pub wall_seconds: Option<f64>,
    pub cpu_seconds: Option<f64>,
    pub clusters: usize,
    /// Concentration parameter, when the prior has one.
    pub alpha: Option<f64>,
    /// Unnormalised log posterior of the training clustering.
    pub log_score: f64,
    /// Held-out predictive log-likelihood of the current sample alone.
    pub heldout_loglik: Option<f64>,
    /// Against the training labels, when present.
    pub v_measure: Option<f64>,
    pub pgsm_moves: u64,
    pub smc_generations: u64,
    pub resampling_events: u64,
    pub sams_accepts: u64,
}

/// What a finished replicate reports to the manifest.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub replicate: usize,
    pub trace: String,
    pub iterations: u64,
    pub records: u64,
    pub stopped_by_wall_clock: bool,
    pub wall_seconds: Option<f64>,
    pub cpu_seconds: Option<f64>,
    pub final_clusters: usize,
    pub pgsm_moves: u64,
    pub pgsm_changes: u64,
    pub smc_generations: u64,
    pub resampling_events: u64,
    pub sams_proposals: u64,
    pub sams_accepts: u64,
    pub gibbs_sweeps: u64,
    pub alpha_updates: u64,
}

fn heldout_loglik<M: ConjugateModel>(chain: &Chain<'_, M>, model: &M, heldout: &[M::Datum]) -> Option<f64> {
    if heldout.is_empty() {
        return None;
    }
    let empty = model.empty_stat();
    let mut scratch = Vec::new();
    Some(
        heldout
            .iter()
            .map(|y| predictive_log_density(model, chain.state(), chain.prior(), &empty, y, &mut scratch))
            .sum(),
    )
}

pub fn row_for<M: ConjugateModel>(
    chain: &Chain<'_, M>,
    model: &M,
    heldout: &[M::Datum],
    labels: Option<&[usize]>,
    progress: &Progress,
    emit_timing: bool,
) -> pgsm::Result<TraceRow> {
    let c: &ChainCounters = chain.counters();
    let v = match labels {
        Some(l) => Some(v_measure(chain.state().to_clustering().labels(), l)?),
        None => None,
    };
    Ok(TraceRow {
        iteration: progress.iteration,
        wall_seconds: emit_timing.then(|| progress.wall.as_secs_f64()),
        cpu_seconds: emit_timing.then(|| progress.cpu.as_secs_f64()),
        clusters: chain.state().num_blocks(),
        alpha: chain.alpha(),
        log_score: chain.log_score(),
        heldout_loglik: heldout_loglik(chain, model, heldout),
        v_measure: v,
        pgsm_moves: c.pgsm_moves,
        smc_generations: c.smc_generations,
        resampling_events: c.resampling_events,
        sams_accepts: c.sams_accepts,
    })
}

/// Everything one replicate needs besides the model and data.
pub struct ReplicateJob<'a> {
    pub replicate: usize,
    pub seed: u64,
    pub prior: PartitionPrior,
    pub chain: ChainConfig,
    pub budget: Budget,
    pub stride: u64,
    pub emit_timing: bool,
    pub dir: &'a Path,
}

pub fn trace_file_name(replicate: usize) -> String {
    format!("trace-{replicate}.jsonl")
}

/// Runs one replicate chain, streaming rows to its own trace file.
pub fn run_replicate<M: ConjugateModel>(
    job: &ReplicateJob<'_>,
    model: &M,
    train: &[M::Datum],
    heldout: &[M::Datum],
    labels: Option<&[usize]>,
) -> CliResult<ReplicateSummary> {
    let name = trace_file_name(job.replicate);
    let path: PathBuf = job.dir.join(&name);
    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut out = BufWriter::new(file);
    let mut rng = seeding::replicate_rng(job.seed, job.replicate);
    let mut chain = Chain::new(model, train, job.prior.clone(), job.chain.clone())?;
    let mut write_error = None;
    let run = run_chain(&mut chain, job.budget, job.stride, &mut rng, |chain, progress| {
        let row = row_for(chain, model, heldout, labels, progress, job.emit_timing)?;
        let line = serde_json::to_string(&row).expect("trace rows serialise");
        if let Err(e) = writeln!(out, "{line}") {
            write_error = Some(e);
            return Err(PgsmError::Input("trace write failed".into()));
        }
        Ok(())
    });
    if let Some(e) = write_error {
        return Err(CliError::io(&path, e));
    }
    let RunSummary {
        progress,
        records,
        stopped_by_wall_clock,
    } = run?;
    out.flush().map_err(|e| CliError::io(&path, e))?;
    let c = chain.counters();
    Ok(ReplicateSummary {
        replicate: job.replicate,
        trace: name,
        iterations: progress.iteration,
        records,
        stopped_by_wall_clock,
        wall_seconds: job.emit_timing.then(|| progress.wall.as_secs_f64()),
        cpu_seconds: job.emit_timing.then(|| progress.cpu.as_secs_f64()),
        final_clusters: chain.state().num_blocks(),
        pgsm_moves: c.pgsm_moves,
        pgsm_changes: c.pgsm_changes,
        smc_generations: c.smc_generations,
        resampling_events: c.resampling_events,
        sams_proposals: c.sams_proposals,
        sams_accepts: c.sams_accepts,
        gibbs_sweeps: c.gibbs_sweeps,
        alpha_updates: c.alpha_updates,
    })
}

pub fn read_trace(path: &Path) -> CliResult<Vec<TraceRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(k, l)| {
            serde_json::from_str(l)
                .map_err(|e| CliError::Engine(PgsmError::Input(format!("{} line {}: {e}", path.display(), k + 1))))
        })
        .collect()
}

/// A trace row with the plotted metrics smoothed by a trailing window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothedRow {
    pub iteration: u64,
    pub wall_seconds: Option<f64>,
    pub cpu_seconds: Option<f64>,
    pub clusters: usize,
    pub heldout_loglik: Option<f64>,
    pub v_measure: Option<f64>,
}

fn smooth(values: Vec<Option<f64>>, window: usize) -> Vec<Option<f64>> {
    if values.iter().any(Option::is_none) {
        return vec![None; values.len()];
    }
    let raw: Vec<f64> = values.into_iter().flatten().collect();
    moving_average(&raw, window).into_iter().map(Some).collect()
}

/// Moving averages for plotting; the samplers never see these values.
pub fn smooth_trace(rows: &[TraceRow], window: usize) -> Vec<SmoothedRow> {
    let heldout = smooth(rows.iter().map(|r| r.heldout_loglik).collect(), window);
    let vm = smooth(rows.iter().map(|r| r.v_measure).collect(), window);
    rows.iter()
        .zip(heldout.into_iter().zip(vm))
        .map(|(r, (h, v))| SmoothedRow {
            iteration: r.iteration,
            wall_seconds: r.wall_seconds,
            cpu_seconds: r.cpu_seconds,
            clusters: r.clusters,
            heldout_loglik: h,
            v_measure: v,
        })
        .collect()
}
