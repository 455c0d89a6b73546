//! Kernel schedules and the MCMC chain driver.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;

use super::concentration::{resample_concentration, GammaPrior};
use super::gibbs::gibbs_sweep;
use super::sams::sams_move;
use crate::anchors::{AnchorProposal, ProposalKind};
use crate::error::{input, PgsmError, Result};
use crate::likelihood::ConjugateModel;
use crate::partition::Clustering;
use crate::pgsm::{split_merge_move, PgsmConfig};
use crate::prior::{PartitionPrior, PriorKind};
use crate::state::ClusterState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kernel {
    Pgsm,
    Sams,
    Gibbs,
    AlphaResample,
}

impl Kernel {
    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Pgsm => "pgsm",
            Kernel::Sams => "sams",
            Kernel::Gibbs => "gibbs",
            Kernel::AlphaResample => "alpha",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = PgsmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pgsm" => Ok(Kernel::Pgsm),
            "sams" => Ok(Kernel::Sams),
            "gibbs" | "gibbs_sweep" | "gibbssweep" => Ok(Kernel::Gibbs),
            "alpha" | "alpha_resample" | "alpharesample" => Ok(Kernel::AlphaResample),
            other => input(format!(
                "unknown kernel '{other}' (expected pgsm, sams, gibbs or alpha)"
            )),
        }
    }
}

/// Kernels applied in order once per iteration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelSchedule(Vec<Kernel>);

impl KernelSchedule {
    pub fn new(kernels: Vec<Kernel>) -> Result<Self> {
        if kernels.is_empty() {
            return input("kernel schedule must not be empty");
        }
        Ok(Self(kernels))
    }

    pub fn pure_gibbs() -> Self {
        Self(vec![Kernel::Gibbs])
    }

    /// PGSM alternated with Gibbs sweeps and a concentration update.
    pub fn mixed_pgsm() -> Self {
        Self(vec![Kernel::Pgsm, Kernel::Gibbs, Kernel::AlphaResample])
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.0
    }

    pub fn contains(&self, k: Kernel) -> bool {
        self.0.contains(&k)
    }
}

impl fmt::Display for KernelSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(Kernel::name).collect();
        f.write_str(&names.join("+"))
    }
}

impl FromStr for KernelSchedule {
    type Err = PgsmError;

    fn from_str(s: &str) -> Result<Self> {
        let kernels = s
            .split(['+', ','])
            .map(str::trim)
            .filter(|k| !k.is_empty())
            .map(Kernel::from_str)
            .collect::<Result<Vec<_>>>()?;
        Self::new(kernels)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Initialization {
    #[default]
    SingleCluster,
    Singletons,
}

impl FromStr for Initialization {
    type Err = PgsmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single-cluster" | "single_cluster" => Ok(Self::SingleCluster),
            "singletons" | "all-singletons" | "all_singletons" => Ok(Self::Singletons),
            other => input(format!("unknown initialization '{other}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainConfig {
    pub schedule: KernelSchedule,
    pub pgsm: PgsmConfig,
    pub proposal: ProposalKind,
    /// Split-merge moves performed by each `Pgsm` or `Sams` entry.
    pub moves_per_kernel: usize,
    pub alpha_prior: GammaPrior,
    pub initialization: Initialization,
    /// Freeze informed anchor proposals after this many adaptation checks.
    pub adaptation_calls: Option<usize>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            schedule: KernelSchedule::mixed_pgsm(),
            pgsm: PgsmConfig::default(),
            proposal: ProposalKind::Uniform,
            moves_per_kernel: 1,
            alpha_prior: GammaPrior::default(),
            initialization: Initialization::SingleCluster,
            adaptation_calls: None,
        }
    }
}

/// Running totals over the life of a chain.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChainCounters {
    pub pgsm_moves: u64,
    pub pgsm_changes: u64,
    pub smc_generations: u64,
    pub resampling_events: u64,
    pub sams_proposals: u64,
    pub sams_accepts: u64,
    pub gibbs_sweeps: u64,
    pub gibbs_reassignments: u64,
    pub alpha_updates: u64,
}

pub struct Chain<'a, M: ConjugateModel> {
    model: &'a M,
    data: &'a [M::Datum],
    prior: PartitionPrior,
    state: ClusterState<M>,
    proposal: AnchorProposal<M::Stat>,
    config: ChainConfig,
    iteration: u64,
    counters: ChainCounters,
}

impl<'a, M: ConjugateModel> Chain<'a, M> {
    pub fn new(model: &'a M, data: &'a [M::Datum], prior: PartitionPrior, config: ChainConfig) -> Result<Self> {
        if data.is_empty() {
            return input("cannot run a chain on an empty dataset");
        }
        let init = match config.initialization {
            Initialization::SingleCluster => Clustering::single_block(data.len()),
            Initialization::Singletons => Clustering::singletons(data.len()),
        };
        Self::from_clustering(model, data, prior, config, &init)
    }

    pub fn from_clustering(
        model: &'a M,
        data: &'a [M::Datum],
        prior: PartitionPrior,
        config: ChainConfig,
        init: &Clustering,
    ) -> Result<Self> {
        config.pgsm.validate()?;
        if config.moves_per_kernel == 0 {
            return input("moves_per_kernel must be at least 1");
        }
        if config.schedule.contains(Kernel::AlphaResample) && !matches!(prior.kind(), PriorKind::Dirichlet { .. }) {
            return input("alpha resampling requires a Dirichlet process prior");
        }
        model.validate_all(data)?;
        let state = ClusterState::new(model, data, init)?;
        let mut proposal = AnchorProposal::new(config.proposal)?;
        if let Some(calls) = config.adaptation_calls {
            proposal.stop_adaptation_after_calls(calls);
        }
        Ok(Self {
            model,
            data,
            prior,
            state,
            proposal,
            config,
            iteration: 0,
            counters: ChainCounters::default(),
        })
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn state(&self) -> &ClusterState<M> {
        &self.state
    }

    pub fn prior(&self) -> &PartitionPrior {
        &self.prior
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn counters(&self) -> &ChainCounters {
        &self.counters
    }

    pub fn proposal(&self) -> &AnchorProposal<M::Stat> {
        &self.proposal
    }

    /// DP concentration, if any.
    pub fn alpha(&self) -> Option<f64> {
        self.prior.concentration()
    }

    /// Unnormalised log posterior of the current clustering.
    pub fn log_score(&self) -> f64 {
        self.state.log_score(&self.prior)
    }

    /// Applies a single kernel.
    pub fn apply<R: Rng + ?Sized>(&mut self, kernel: Kernel, rng: &mut R) -> Result<()> {
        let n = self.state.len();
        match kernel {
            Kernel::Gibbs => {
                let moved = gibbs_sweep(&mut self.state, self.model, self.data, &self.prior, rng);
                self.counters.gibbs_sweeps += 1;
                self.counters.gibbs_reassignments += moved as u64;
            }
            Kernel::Pgsm => {
                if n < self.config.pgsm.num_anchors {
                    return Ok(());
                }
                for _ in 0..self.config.moves_per_kernel {
                    self.proposal.maybe_adapt(&self.state, self.model, self.data);
                    let anchors = self.proposal.sample(
                        n,
                        self.config.pgsm.num_anchors,
                        self.model,
                        self.data,
                        &self.prior,
                        rng,
                    )?;
                    let out = split_merge_move(
                        &mut self.state,
                        self.model,
                        self.data,
                        &self.prior,
                        &anchors,
                        &self.config.pgsm,
                        rng,
                    )?;
                    self.counters.pgsm_moves += 1;
                    self.counters.pgsm_changes += u64::from(out.blocks_before != out.blocks_after);
                    self.counters.smc_generations += out.diagnostics.generations as u64;
                    self.counters.resampling_events += out.diagnostics.resample_count() as u64;
                }
            }
            Kernel::Sams => {
                if n < 2 {
                    return Ok(());
                }
                for _ in 0..self.config.moves_per_kernel {
                    self.proposal.maybe_adapt(&self.state, self.model, self.data);
                    let a = self.proposal.sample(n, 2, self.model, self.data, &self.prior, rng)?;
                    let out = sams_move(&mut self.state, self.model, self.data, &self.prior, [a[0], a[1]], rng)?;
                    self.counters.sams_proposals += 1;
                    self.counters.sams_accepts += u64::from(out.accepted);
                }
            }
            Kernel::AlphaResample => {
                let Some(alpha) = self.prior.concentration() else {
                    return input("alpha resampling requires a Dirichlet process prior");
                };
                let next = resample_concentration(alpha, self.state.num_blocks(), n, self.config.alpha_prior, rng)?;
                self.prior = self.prior.with_concentration(next)?;
                self.counters.alpha_updates += 1;
            }
        }
        Ok(())
    }

    /// One pass over the schedule.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        for k in 0..self.config.schedule.kernels().len() {
            let kernel = self.config.schedule.kernels()[k];
            self.apply(kernel, rng)?;
        }
        self.iteration += 1;
        Ok(())
    }
}

/// Thread CPU time, falling back to zero where the clock is unavailable.
pub fn thread_cpu_time() -> Duration {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return Duration::ZERO;
    }
    Duration::new(ts.tv_sec as u64, ts.tv_nsec as u32)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Budget {
    pub max_iterations: Option<u64>,
    pub max_wall: Option<Duration>,
}

impl Budget {
    pub fn iterations(n: u64) -> Self {
        Self {
            max_iterations: Some(n),
            max_wall: None,
        }
    }
}

/// Sampler time spent so far, excluding time spent in the observer.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Progress {
    pub iteration: u64,
    pub wall: Duration,
    pub cpu: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub progress: Progress,
    pub records: u64,
    pub stopped_by_wall_clock: bool,
}

/// Runs `chain` until the budget is used up, calling `observer` every
/// `stride` iterations and after the final iteration.
pub fn run_chain<M, R, F>(
    chain: &mut Chain<'_, M>,
    budget: Budget,
    stride: u64,
    rng: &mut R,
    mut observer: F,
) -> Result<RunSummary>
where
    M: ConjugateModel,
    R: Rng + ?Sized,
    F: FnMut(&Chain<'_, M>, &Progress) -> Result<()>,
{
    if stride == 0 {
        return input("trace stride must be at least 1");
    }
    if budget.max_iterations.is_none() && budget.max_wall.is_none() {
        return input("a chain needs an iteration or wall-clock budget");
    }
    let mut progress = Progress {
        iteration: chain.iteration(),
        ..Progress::default()
    };
    let mut records = 0;
    let mut last_recorded = None;
    let mut stopped_by_wall_clock = false;
    let start_iteration = chain.iteration();
    loop {
        if let Some(max) = budget.max_iterations {
            if chain.iteration() - start_iteration >= max {
                break;
            }
        }
        if let Some(limit) = budget.max_wall {
            if progress.wall >= limit {
                stopped_by_wall_clock = true;
                break;
            }
        }
        let wall0 = Instant::now();
        let cpu0 = thread_cpu_time();
        chain.step(rng)?;
        progress.wall += wall0.elapsed();
        progress.cpu += thread_cpu_time().saturating_sub(cpu0);
        progress.iteration = chain.iteration();
        if progress.iteration % stride == 0 {
            observer(chain, &progress)?;
            records += 1;
            last_recorded = Some(progress.iteration);
        }
    }
    if progress.iteration > start_iteration && last_recorded != Some(progress.iteration) {
        observer(chain, &progress)?;
        records += 1;
    }
    Ok(RunSummary {
        progress,
        records,
        stopped_by_wall_clock,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::NormalInverseWishart;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn blobs() -> Vec<Vec<f64>> {
        (0..30)
            .map(|i| {
                vec![
                    (i % 3) as f64 * 3.0 - 3.0 + 0.3 * (i as f64 * 0.37).sin(),
                    0.3 * (i as f64 * 1.3).cos(),
                ]
            })
            .collect()
    }

    #[test]
    fn schedule_parsing() {
        let s: KernelSchedule = "pgsm+gibbs+alpha".parse().unwrap();
        assert_eq!(s, KernelSchedule::mixed_pgsm());
        assert_eq!(s.to_string(), "pgsm+gibbs+alpha");
        assert!("".parse::<KernelSchedule>().is_err());
        assert!("pgsm+metropolis".parse::<KernelSchedule>().is_err());
    }

    #[test]
    fn alpha_resampling_needs_dp() {
        let model = NormalInverseWishart::with_defaults(2);
        let data = blobs();
        let prior = PartitionPrior::pitman_yor(1.0, 0.2).unwrap();
        assert!(Chain::new(&model, &data, prior, ChainConfig::default()).is_err());
    }

    #[test]
    fn replay_is_deterministic() {
        let model = NormalInverseWishart::with_defaults(2);
        let data = blobs();
        let prior = PartitionPrior::dirichlet_process(1.0).unwrap();
        let run = |seed| {
            let mut chain = Chain::new(&model, &data, prior, ChainConfig::default()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut trace = Vec::new();
            run_chain(&mut chain, Budget::iterations(25), 5, &mut rng, |c, p| {
                trace.push((p.iteration, c.state().to_clustering(), c.alpha().unwrap()));
                Ok(())
            })
            .unwrap();
            trace
        };
        let a = run(3);
        assert_eq!(a.len(), 5);
        assert_eq!(a, run(3));
        assert_ne!(a, run(4));
    }

    #[test]
    fn records_at_stride_and_at_the_end() {
        let model = NormalInverseWishart::with_defaults(2);
        let data = blobs();
        let prior = PartitionPrior::dirichlet_process(1.0).unwrap();
        let config = ChainConfig {
            schedule: KernelSchedule::pure_gibbs(),
            ..ChainConfig::default()
        };
        let mut chain = Chain::new(&model, &data, prior, config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut seen = Vec::new();
        let summary = run_chain(&mut chain, Budget::iterations(7), 3, &mut rng, |_, p| {
            seen.push(p.iteration);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![3, 6, 7]);
        assert_eq!(summary.records, 3);
        let mut none = Vec::new();
        let summary = run_chain(&mut chain, Budget::iterations(0), 3, &mut rng, |_, p| {
            none.push(p.iteration);
            Ok(())
        })
        .unwrap();
        assert!(none.is_empty());
        assert_eq!(summary.records, 0);
    }

    #[test]
    fn wall_clock_budget_stops_promptly() {
        let model = NormalInverseWishart::with_defaults(2);
        let data = blobs();
        let prior = PartitionPrior::dirichlet_process(1.0).unwrap();
        let mut chain = Chain::new(&model, &data, prior, ChainConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let limit = Duration::from_millis(50);
        let summary = run_chain(
            &mut chain,
            Budget {
                max_iterations: None,
                max_wall: Some(limit),
            },
            1_000_000,
            &mut rng,
            |_, _| Ok(()),
        )
        .unwrap();
        assert!(summary.stopped_by_wall_clock);
        assert!(summary.progress.wall >= limit);
        assert!(summary.progress.wall < limit * 4);
    }

    #[test]
    fn mixed_kernel_never_mixes_blobs() {
        let model = NormalInverseWishart::with_defaults(2);
        let data = blobs();
        let prior = PartitionPrior::dirichlet_process(1.0).unwrap();
        let mut chain = Chain::new(&model, &data, prior, ChainConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        run_chain(&mut chain, Budget::iterations(200), 1000, &mut rng, |_, _| Ok(())).unwrap();
        let c = chain.state().to_clustering();
        for i in 0..data.len() {
            for j in 0..data.len() {
                if c.block_of(i) == c.block_of(j) {
                    assert_eq!(i % 3, j % 3);
                }
            }
        }
        chain.state().check_consistency(&model, &data, 1e-8).unwrap();
        assert!(chain.counters().pgsm_moves == 200 && chain.counters().alpha_updates == 200);
    }
}
