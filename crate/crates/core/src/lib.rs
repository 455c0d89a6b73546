//! Particle Gibbs split-merge sampling for Bayesian mixture models.

pub mod anchors;
pub mod baselines;
pub mod error;
pub mod eval;
pub mod likelihood;
pub mod math;
pub mod partition;
pub mod pgsm;
pub mod prior;
pub mod state;

pub use error::{PgsmError, Result};
pub use likelihood::ConjugateModel;
pub use partition::{Clustering, SubPartition};
pub use pgsm::PgsmConfig;
pub use prior::{PartitionPrior, PriorKind};
pub use state::ClusterState;
