//! Reference samplers used as baselines and mixed with split-merge moves.

pub mod chain;
pub mod concentration;
pub mod gibbs;
pub mod sams;

pub use chain::{
    run_chain, thread_cpu_time, Budget, Chain, ChainConfig, ChainCounters, Initialization, Kernel, KernelSchedule,
    Progress, RunSummary,
};
pub use concentration::{resample_concentration, GammaPrior};
pub use gibbs::gibbs_sweep;
pub use sams::{sams_move, SamsOutcome};
