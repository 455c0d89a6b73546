//! `run`: replicate chains with one trace file each, plus a manifest.

use std::path::{Path, PathBuf};

use pgsm::eval::Split;
use pgsm::ConjugateModel;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::data::{prepare, WorkloadVisitor};
use crate::error::{CliError, CliResult};
use crate::trace::{run_replicate, ReplicateJob, ReplicateSummary};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub schedule: String,
    pub train_points: usize,
    pub heldout_points: usize,
    pub labels: bool,
    pub config: ExperimentConfig,
    pub replicates: Vec<ReplicateSummary>,
}

/// Runs every replicate of `config` into `dir`, concurrently.
pub(crate) struct Replicates<'a> {
    pub config: &'a ExperimentConfig,
    pub dir: &'a Path,
}

impl WorkloadVisitor for Replicates<'_> {
    type Output = CliResult<Vec<ReplicateSummary>>;

    fn visit<M: ConjugateModel>(self, model: &M, split: &Split<M::Datum>) -> Self::Output {
        let chain = self.config.chain_config()?;
        let prior = self.config.prior();
        let labels = split.train_labels.as_deref();
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..self.config.replicates)
                .map(|r| {
                    let job = ReplicateJob {
                        replicate: r,
                        seed: self.config.seed,
                        prior: prior.clone(),
                        chain: chain.clone(),
                        budget: self.config.budget(),
                        stride: self.config.budget.trace_stride,
                        emit_timing: self.config.output.emit_timing,
                        dir: self.dir,
                    };
                    scope.spawn(move || run_replicate(&job, model, &split.train, &split.heldout, labels))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("replicate thread panicked"))
                .collect()
        })
    }
}

pub(crate) fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serialises");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Runs the experiment into `dir` and returns the manifest written there.
pub fn run_into(config: &ExperimentConfig, dir: &Path) -> CliResult<Manifest> {
    let workload = prepare(config)?;
    create_dir(dir)?;
    let replicates = workload.visit(Replicates { config, dir })?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        schedule: config.schedule()?.to_string(),
        train_points: workload.train_len(),
        heldout_points: workload.heldout_len(),
        labels: workload.has_labels(),
        config: config.clone(),
        replicates,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn run(config: &ExperimentConfig) -> CliResult<(PathBuf, Manifest)> {
    let dir = config.output_dir();
    let manifest = run_into(config, &dir)?;
    Ok((dir, manifest))
}
