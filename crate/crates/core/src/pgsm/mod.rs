//! Particle Gibbs split-merge moves.
//!
//! A move draws anchors, restricts the clustering to the blocks containing
//! them, resamples that restricted clustering with a conditional SMC sweep,
//! and splices the result back in.

pub mod moves;
pub mod particle;
pub mod smc;
pub mod state_space;

pub use moves::{split_merge_move, MoveOutcome};
pub use particle::{annealed_log_target, Particle, Target};
pub use smc::{
    conditional_multinomial_resample, log_normalizer_estimate, pgsm_step, pgsm_sweep, relative_ess, sample_permutation,
    PgsmDiagnostics, PgsmOutput,
};
pub use state_space::{enumerate_paths, phi, phi_inverse, AllocState, MAX_ANCHORS};

use crate::error::{input, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PgsmConfig {
    /// Number of particles `N >= 2`.
    pub particles: usize,
    /// Resample when the relative ESS drops below this value; `1` resamples
    /// at every generation and `0` never does.
    pub ess_threshold: f64,
    /// Use annealed intermediate targets.
    pub anneal: bool,
    /// Anchor count `|s|`, 2 or 3.
    pub num_anchors: usize,
    /// Flips the sign of every incremental log weight. Breaks the kernel on
    /// purpose; only for checking that the oracle tests catch such faults.
    #[doc(hidden)]
    pub negate_log_weights: bool,
}

impl Default for PgsmConfig {
    fn default() -> Self {
        Self {
            particles: 20,
            ess_threshold: 0.5,
            anneal: true,
            num_anchors: 2,
            negate_log_weights: false,
        }
    }
}

impl PgsmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles < 2 {
            return input(format!("particle count must be at least 2, got {}", self.particles));
        }
        if !(0.0..=1.0).contains(&self.ess_threshold) {
            return input(format!("ESS threshold must lie in [0, 1], got {}", self.ess_threshold));
        }
        if !(2..=MAX_ANCHORS).contains(&self.num_anchors) {
            return input(format!(
                "anchor count must lie in 2..={MAX_ANCHORS}, got {}",
                self.num_anchors
            ));
        }
        Ok(())
    }
}
