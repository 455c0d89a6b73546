//! `bench`: time-vs-metric series per schedule and the per-weight timing probe.

use std::path::Path;
use std::time::{Duration, Instant};

use pgsm::likelihood::NormalInverseWishart;
use pgsm::pgsm::split_merge_move;
use pgsm::{ClusterState, Clustering, PartitionPrior, PgsmConfig};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::commands::run::{create_dir, run_into, write_json, Manifest};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::seeding;
use crate::trace::{read_trace, smooth_trace, trace_file_name};

pub const DEFAULT_WINDOW: usize = 20;
pub const BENCH_FILE: &str = "bench.json";

pub fn default_schedules() -> Vec<String> {
    vec![
        "pgsm+gibbs+alpha".into(),
        "sams+gibbs+alpha".into(),
        "gibbs+alpha".into(),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Numbers of clusters outside the anchor blocks to compare.
    pub contexts: Vec<usize>,
    /// Points in the two anchor blocks together.
    pub closure: usize,
    /// Points in each outside cluster.
    pub outside_size: usize,
    pub moves_per_round: usize,
    pub rounds: usize,
    pub particles: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            contexts: vec![10, 1000],
            closure: 100,
            outside_size: 3,
            moves_per_round: 50,
            rounds: 7,
            particles: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub clusters: usize,
    /// Best round's time per incremental weight evaluation.
    pub ns_per_weight: f64,
    pub weight_evaluations: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub results: Vec<ProbeResult>,
    /// Last context's time per weight over the first context's.
    pub ratio: f64,
}

struct ProbeContext {
    data: Vec<Vec<f64>>,
    state: ClusterState<NormalInverseWishart>,
    clusters: usize,
    best: f64,
    evaluations: u64,
}

/// Times split-merge moves on two fixed anchor blocks while the number of
/// other clusters varies. Rounds alternate between contexts and the fastest
/// round of each context is reported, which filters scheduler noise.
pub fn per_weight_probe<R: Rng + ?Sized>(config: &ProbeConfig, rng: &mut R) -> CliResult<ProbeReport> {
    if config.contexts.is_empty() || config.closure < 4 || config.rounds == 0 || config.moves_per_round == 0 {
        return Err(CliError::config(
            "probe",
            "needs contexts, a closure of at least 4 points and rounds",
        ));
    }
    let noise = Normal::new(0.0, 0.3).expect("valid normal");
    let model = NormalInverseWishart::with_defaults(1);
    let prior = PartitionPrior::dirichlet_process(1.0)?;
    let pgsm = PgsmConfig {
        particles: config.particles,
        ..PgsmConfig::default()
    };
    let half = config.closure / 2;
    let mut contexts = Vec::with_capacity(config.contexts.len());
    for &clusters in &config.contexts {
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for i in 0..config.closure {
            let centre = if i < half { -1.0 } else { 1.0 };
            data.push(vec![centre + noise.sample(rng)]);
            labels.push(usize::from(i >= half));
        }
        for c in 0..clusters {
            let centre = 3.0 + c as f64 * 0.01;
            for _ in 0..config.outside_size {
                data.push(vec![centre + 0.01 * noise.sample(rng)]);
                labels.push(c + 2);
            }
        }
        let state = ClusterState::new(&model, &data, &Clustering::from_labels(&labels))?;
        contexts.push(ProbeContext {
            data,
            state,
            clusters,
            best: f64::INFINITY,
            evaluations: 0,
        });
    }
    let anchors = [0, half];
    for _ in 0..config.rounds {
        for ctx in &mut contexts {
            let mut evaluations = 0u64;
            let mut elapsed = Duration::ZERO;
            for _ in 0..config.moves_per_round {
                let t0 = Instant::now();
                let out = split_merge_move(&mut ctx.state, &model, &ctx.data, &prior, &anchors, &pgsm, rng)?;
                elapsed += t0.elapsed();
                evaluations += out.diagnostics.weight_evaluations as u64;
            }
            ctx.evaluations += evaluations;
            if evaluations > 0 {
                ctx.best = ctx.best.min(elapsed.as_nanos() as f64 / evaluations as f64);
            }
        }
    }
    let results: Vec<ProbeResult> = contexts
        .iter()
        .map(|c| ProbeResult {
            clusters: c.clusters,
            ns_per_weight: c.best,
            weight_evaluations: c.evaluations,
        })
        .collect();
    let ratio = results.last().expect("nonempty").ns_per_weight / results[0].ns_per_weight;
    Ok(ProbeReport { results, ratio })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub schedule: String,
    pub replicate: usize,
    pub trace: String,
    pub smoothed: String,
    pub iterations: u64,
    pub wall_seconds: Option<f64>,
    pub cpu_seconds: Option<f64>,
    pub final_clusters: usize,
    pub final_v_measure: Option<f64>,
    pub final_heldout_loglik: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub window: usize,
    pub series: Vec<SeriesSummary>,
    pub probe: Option<ProbeReport>,
}

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub schedules: Vec<String>,
    pub window: usize,
    pub probe: Option<ProbeConfig>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            schedules: default_schedules(),
            window: DEFAULT_WINDOW,
            probe: Some(ProbeConfig::default()),
        }
    }
}

fn schedule_dir_name(schedule: &str) -> String {
    schedule.replace('+', "-")
}

/// Runs every schedule on the same dataset and held-out split, each in its
/// own subdirectory, then writes smoothed series and `bench.json`.
pub fn bench_into(config: &ExperimentConfig, options: &BenchOptions, dir: &Path) -> CliResult<BenchReport> {
    if options.window == 0 {
        return Err(CliError::config("window", "must be at least 1"));
    }
    create_dir(dir)?;
    let mut series = Vec::new();
    for schedule in &options.schedules {
        let mut cfg = config.clone();
        cfg.sampler.schedule = schedule.clone();
        cfg.validate()?;
        let canonical = cfg.schedule()?.to_string();
        let sub = dir.join(schedule_dir_name(&canonical));
        let manifest: Manifest = run_into(&cfg, &sub)?;
        for rep in &manifest.replicates {
            let rows = read_trace(&sub.join(trace_file_name(rep.replicate)))?;
            let smoothed = smooth_trace(&rows, options.window);
            let smoothed_name = format!("smoothed-{}.jsonl", rep.replicate);
            let mut text = String::new();
            for row in &smoothed {
                text.push_str(&serde_json::to_string(row).expect("rows serialise"));
                text.push('\n');
            }
            let path = sub.join(&smoothed_name);
            std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
            let last = rows.last();
            series.push(SeriesSummary {
                schedule: canonical.clone(),
                replicate: rep.replicate,
                trace: format!("{}/{}", schedule_dir_name(&canonical), rep.trace),
                smoothed: format!("{}/{}", schedule_dir_name(&canonical), smoothed_name),
                iterations: rep.iterations,
                wall_seconds: rep.wall_seconds,
                cpu_seconds: rep.cpu_seconds,
                final_clusters: rep.final_clusters,
                final_v_measure: last.and_then(|r| r.v_measure),
                final_heldout_loglik: last.and_then(|r| r.heldout_loglik),
            });
        }
    }
    let probe = match &options.probe {
        Some(p) => {
            let mut rng = seeding::probe_rng(config.seed);
            Some(per_weight_probe(p, &mut rng)?)
        }
        None => None,
    };
    let report = BenchReport {
        window: options.window,
        series,
        probe,
    };
    write_json(&dir.join(BENCH_FILE), &report)?;
    Ok(report)
}

pub fn bench(config: &ExperimentConfig, options: &BenchOptions) -> CliResult<BenchReport> {
    bench_into(config, options, &config.output_dir())
}

/// Plain-text table for the terminal.
pub fn format_table(report: &BenchReport) -> String {
    let fmt = |v: Option<f64>, prec: usize| v.map_or("-".to_string(), |x| format!("{x:.prec$}"));
    let mut out = format!(
        "{:<20} {:>4} {:>10} {:>10} {:>10} {:>9} {:>10} {:>14}\n",
        "schedule", "rep", "iters", "wall_s", "cpu_s", "clusters", "v_measure", "heldout_ll"
    );
    for s in &report.series {
        out.push_str(&format!(
            "{:<20} {:>4} {:>10} {:>10} {:>10} {:>9} {:>10} {:>14}\n",
            s.schedule,
            s.replicate,
            s.iterations,
            fmt(s.wall_seconds, 2),
            fmt(s.cpu_seconds, 2),
            s.final_clusters,
            fmt(s.final_v_measure, 4),
            fmt(s.final_heldout_loglik, 2),
        ));
    }
    if let Some(p) = &report.probe {
        for r in &p.results {
            out.push_str(&format!(
                "probe: {:>5} clusters  {:>8.1} ns/weight  ({} weights)\n",
                r.clusters, r.ns_per_weight, r.weight_evaluations
            ));
        }
        out.push_str(&format!("probe ratio: {:.3}\n", p.ratio));
    }
    out
}
