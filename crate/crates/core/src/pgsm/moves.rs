//! The split-merge move on a full clustering.

use rand::Rng;
use smallvec::SmallVec;

use super::smc::{pgsm_step, PgsmDiagnostics};
use super::PgsmConfig;
use crate::error::{PgsmError, Result};
use crate::likelihood::ConjugateModel;
use crate::prior::PartitionPrior;
use crate::state::ClusterState;

#[derive(Clone, Debug, PartialEq)]
pub struct MoveOutcome {
    /// Number of anchor blocks before and after the move.
    pub blocks_before: usize,
    pub blocks_after: usize,
    pub diagnostics: PgsmDiagnostics,
}

/// Applies one split-merge move with the given anchors. Blocks without an
/// anchor are left untouched, and the work done is proportional to the size
/// of the anchor blocks only.
pub fn split_merge_move<M, R>(
    state: &mut ClusterState<M>,
    model: &M,
    data: &[M::Datum],
    prior: &PartitionPrior,
    anchors: &[usize],
    config: &PgsmConfig,
    rng: &mut R,
) -> Result<MoveOutcome>
where
    M: ConjugateModel,
    R: Rng + ?Sized,
{
    if anchors.len() != config.num_anchors {
        return Err(PgsmError::Contract(format!(
            "expected {} anchors, got {}",
            config.num_anchors,
            anchors.len()
        )));
    }
    for (k, &i) in anchors.iter().enumerate() {
        if i >= state.len() {
            return Err(PgsmError::Contract(format!("anchor {i} out of range")));
        }
        if anchors[..k].contains(&i) {
            return Err(PgsmError::Contract(format!("anchor {i} repeated")));
        }
    }
    let mut old: SmallVec<[usize; 3]> = SmallVec::new();
    for &i in anchors {
        let b = state.block_of(i);
        if !old.contains(&b) {
            old.push(b);
        }
    }
    let current: Vec<Vec<usize>> = old.iter().map(|&b| state.members(b).to_vec()).collect();
    let outside = state.num_blocks() - old.len();
    let out = pgsm_step(model, data, prior, anchors, &current, outside, config, rng)?;
    let blocks_after = out.blocks.len();
    state.replace_blocks(model, &old, out.blocks.into_iter().zip(out.stats).collect())?;
    Ok(MoveOutcome {
        blocks_before: old.len(),
        blocks_after,
        diagnostics: out.diagnostics,
    })
}
