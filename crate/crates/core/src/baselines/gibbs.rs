//! Collapsed one-at-a-time Gibbs sampling of cluster indicators.

use rand::Rng;

use crate::likelihood::ConjugateModel;
use crate::math::sample_log_categorical;
use crate::prior::PartitionPrior;
use crate::state::{BlockId, ClusterState};

/// Reassigns every point once, in index order, from its full conditional.
///
/// Existing block `b` has weight `tau2(|b|+1)/tau2(|b|) * L(y_i | y_b)`; a new
/// block has weight `tau1(C+1)/tau1(C) * tau2(1) * L(y_i)`. Returns the number
/// of points that changed block.
pub fn gibbs_sweep<M, R>(
    state: &mut ClusterState<M>,
    model: &M,
    data: &[M::Datum],
    prior: &PartitionPrior,
    rng: &mut R,
) -> usize
where
    M: ConjugateModel,
    R: Rng + ?Sized,
{
    let empty = model.empty_stat();
    let mut log_w: Vec<f64> = Vec::with_capacity(state.num_blocks() + 1);
    let mut ids: Vec<BlockId> = Vec::with_capacity(state.num_blocks());
    let mut moved = 0;
    for i in 0..state.len() {
        let y = &data[i];
        let origin = state.remove_point(model, data, i);
        log_w.clear();
        ids.clear();
        for &b in state.blocks() {
            ids.push(b);
            log_w.push(prior.log_tau2_ratio(state.size(b)) + model.log_predictive(state.stat(b), y));
        }
        log_w.push(prior.log_new_block_weight(state.num_blocks()) + model.log_predictive(&empty, y));
        let k = sample_log_categorical(&log_w, rng);
        let target = ids.get(k).copied();
        if target != origin {
            moved += 1;
        }
        state.insert_point(model, data, i, target);
    }
    moved
}
