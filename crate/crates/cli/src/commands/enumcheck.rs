//! `enumcheck`: kernels against the enumerated posterior of a tiny dataset.

use std::collections::HashMap;

use pgsm::baselines::{Chain, ChainConfig, Kernel, KernelSchedule};
use pgsm::eval::{exact_posterior, Split};
use pgsm::{ConjugateModel, PartitionPrior, PgsmError};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::data::{prepare, WorkloadVisitor};
use crate::error::{CliError, CliResult};
use crate::seeding;

/// Largest dataset the command accepts.
pub const MAX_POINTS: usize = 8;
pub const DEFAULT_TOLERANCE: f64 = 0.02;
pub const DEFAULT_ITERATIONS: u64 = 200_000;
pub const DEFAULT_BURN_IN: u64 = 1_000;

pub fn default_schedules() -> Vec<String> {
    vec!["gibbs".into(), "sams+gibbs".into(), "pgsm".into()]
}

#[derive(Clone, Debug)]
pub struct EnumcheckOptions {
    pub schedules: Vec<String>,
    pub iterations: u64,
    pub burn_in: u64,
    pub tolerance: f64,
    /// Breaks the PGSM weights to check that the comparison notices.
    pub negate_log_weights: bool,
}

impl Default for EnumcheckOptions {
    fn default() -> Self {
        Self {
            schedules: default_schedules(),
            iterations: DEFAULT_ITERATIONS,
            burn_in: DEFAULT_BURN_IN,
            tolerance: DEFAULT_TOLERANCE,
            negate_log_weights: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelCheck {
    pub schedule: String,
    pub iterations: u64,
    pub tv: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnumcheckReport {
    pub points: usize,
    pub partitions: usize,
    pub tolerance: f64,
    pub checks: Vec<KernelCheck>,
    pub pass: bool,
}

/// Empirical distribution of the chain's clusterings after burn-in, compared
/// in total variation with the exact posterior. Runs schedules concurrently.
pub fn check_kernels<M: ConjugateModel>(
    model: &M,
    data: &[M::Datum],
    prior: &PartitionPrior,
    base: &ChainConfig,
    seed: u64,
    options: &EnumcheckOptions,
) -> CliResult<EnumcheckReport> {
    if data.len() > MAX_POINTS {
        return Err(PgsmError::TooLarge {
            what: "enumeration check dataset",
            size: data.len(),
            limit: MAX_POINTS,
        }
        .into());
    }
    if !(options.tolerance >= 0.0) {
        return Err(CliError::config("tolerance", "must be nonnegative"));
    }
    let schedules = options
        .schedules
        .iter()
        .map(|s| {
            let parsed: KernelSchedule = s
                .parse()
                .map_err(|e: PgsmError| CliError::config("schedule", e.to_string()))?;
            if parsed.contains(Kernel::AlphaResample) {
                return Err(CliError::config(
                    "schedule",
                    "the exact posterior is for a fixed prior; remove alpha resampling",
                ));
            }
            Ok(parsed)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let exact = exact_posterior(model, data, prior)?;
    let results: Vec<pgsm::Result<f64>> = std::thread::scope(|scope| {
        let handles: Vec<_> = schedules
            .iter()
            .enumerate()
            .map(|(k, schedule)| {
                let mut config = base.clone();
                config.schedule = schedule.clone();
                config.pgsm.negate_log_weights = options.negate_log_weights;
                let exact = &exact;
                scope.spawn(move || -> pgsm::Result<f64> {
                    let mut rng = seeding::replicate_rng(seed, k);
                    let mut chain = Chain::new(model, data, prior.clone(), config)?;
                    for _ in 0..options.burn_in {
                        chain.step(&mut rng)?;
                    }
                    let mut counts = vec![0u64; exact.len()];
                    let mut outside = 0u64;
                    let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
                    for _ in 0..options.iterations {
                        chain.step(&mut rng)?;
                        let c = chain.state().to_clustering();
                        let slot = match seen.get(c.labels()) {
                            Some(&k) => Some(k),
                            None => {
                                let k = exact.index_of(&c);
                                if let Some(k) = k {
                                    seen.insert(c.labels().to_vec(), k);
                                }
                                k
                            }
                        };
                        match slot {
                            Some(k) => counts[k] += 1,
                            None => outside += 1,
                        }
                    }
                    Ok(exact.tv_to_counts(&counts, outside))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("check thread panicked"))
            .collect()
    });
    let mut checks = Vec::with_capacity(results.len());
    for (schedule, tv) in schedules.iter().zip(results) {
        let tv = tv?;
        checks.push(KernelCheck {
            schedule: schedule.to_string(),
            iterations: options.iterations,
            tv,
            pass: tv <= options.tolerance,
        });
    }
    Ok(EnumcheckReport {
        points: data.len(),
        partitions: exact.len(),
        tolerance: options.tolerance,
        pass: checks.iter().all(|c| c.pass),
        checks,
    })
}

struct Check<'a> {
    config: &'a ExperimentConfig,
    options: &'a EnumcheckOptions,
}

impl WorkloadVisitor for Check<'_> {
    type Output = CliResult<EnumcheckReport>;

    fn visit<M: ConjugateModel>(self, model: &M, split: &Split<M::Datum>) -> Self::Output {
        let base = self.config.chain_config()?;
        check_kernels(
            model,
            &split.train,
            &self.config.prior(),
            &base,
            self.config.seed,
            self.options,
        )
    }
}

/// Runs the check on the configured dataset. A failed comparison is reported
/// in the returned report, not as an error.
pub fn enumcheck(config: &ExperimentConfig, options: &EnumcheckOptions) -> CliResult<EnumcheckReport> {
    let workload = prepare(config)?;
    if workload.train_len() > MAX_POINTS {
        return Err(PgsmError::TooLarge {
            what: "enumeration check dataset",
            size: workload.train_len(),
            limit: MAX_POINTS,
        }
        .into());
    }
    workload.visit(Check { config, options })
}
