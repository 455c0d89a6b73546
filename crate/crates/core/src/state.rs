//! Mutable clustering with cached per-block sufficient statistics.
//!
//! Blocks live in slots whose ids stay fixed while the block exists, so that
//! samplers can hold block ids across point moves. Every operation touches
//! only the blocks involved; nothing scales with the total number of blocks
//! except the explicit iteration helpers.

use crate::error::{input, PgsmError, Result};
use crate::likelihood::ConjugateModel;
use crate::partition::Clustering;
use crate::prior::PartitionPrior;

const UNASSIGNED: usize = usize::MAX;

/// Identifier of a live block.
pub type BlockId = usize;

#[derive(Clone, Debug)]
struct Slot<S> {
    members: Vec<usize>,
    stat: S,
    log_marginal: f64,
}

#[derive(Clone, Debug)]
pub struct ClusterState<M: ConjugateModel> {
    assignment: Vec<BlockId>,
    position: Vec<usize>,
    slots: Vec<Slot<M::Stat>>,
    free: Vec<BlockId>,
    active: Vec<BlockId>,
    active_index: Vec<usize>,
}

impl<M: ConjugateModel> ClusterState<M> {
    pub fn new(model: &M, data: &[M::Datum], clustering: &Clustering) -> Result<Self> {
        if clustering.len() != data.len() {
            return input(format!(
                "clustering covers {} points but the dataset has {}",
                clustering.len(),
                data.len()
            ));
        }
        let mut state = Self {
            assignment: vec![UNASSIGNED; data.len()],
            position: vec![0; data.len()],
            slots: Vec::with_capacity(clustering.num_blocks()),
            free: Vec::new(),
            active: Vec::with_capacity(clustering.num_blocks()),
            active_index: Vec::with_capacity(clustering.num_blocks()),
        };
        for block in clustering.blocks() {
            let stat = model.stat_of(block.iter().map(|&i| &data[i]));
            state.open_block(model, block.clone(), stat);
        }
        Ok(state)
    }

    pub fn single_cluster(model: &M, data: &[M::Datum]) -> Self {
        Self::new(model, data, &Clustering::single_block(data.len())).expect("sizes match")
    }

    pub fn singletons(model: &M, data: &[M::Datum]) -> Self {
        Self::new(model, data, &Clustering::singletons(data.len())).expect("sizes match")
    }

    /// Number of observations `T`.
    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn num_blocks(&self) -> usize {
        self.active.len()
    }

    /// Ids of the live blocks, in no particular order.
    pub fn blocks(&self) -> &[BlockId] {
        &self.active
    }

    /// Block currently holding `i`. Panics if `i` was removed and not reinserted.
    pub fn block_of(&self, i: usize) -> BlockId {
        let b = self.assignment[i];
        assert!(b != UNASSIGNED, "point {i} is not assigned to a block");
        b
    }

    pub fn members(&self, b: BlockId) -> &[usize] {
        &self.slots[b].members
    }

    pub fn size(&self, b: BlockId) -> usize {
        self.slots[b].members.len()
    }

    pub fn stat(&self, b: BlockId) -> &M::Stat {
        &self.slots[b].stat
    }

    /// Cached `log L(y_b)`.
    pub fn log_marginal(&self, b: BlockId) -> f64 {
        self.slots[b].log_marginal
    }

    fn open_block(&mut self, model: &M, members: Vec<usize>, stat: M::Stat) -> BlockId {
        let log_marginal = model.log_marginal(&stat);
        let id = match self.free.pop() {
            Some(id) => {
                let slot = &mut self.slots[id];
                slot.members = members;
                slot.stat = stat;
                slot.log_marginal = log_marginal;
                id
            }
            None => {
                self.slots.push(Slot {
                    members,
                    stat,
                    log_marginal,
                });
                self.active_index.push(UNASSIGNED);
                self.slots.len() - 1
            }
        };
        for (pos, &i) in self.slots[id].members.iter().enumerate() {
            self.assignment[i] = id;
            self.position[i] = pos;
        }
        self.active_index[id] = self.active.len();
        self.active.push(id);
        id
    }

    fn close_block(&mut self, id: BlockId) {
        let idx = self.active_index[id];
        self.active.swap_remove(idx);
        if idx < self.active.len() {
            self.active_index[self.active[idx]] = idx;
        }
        self.active_index[id] = UNASSIGNED;
        self.slots[id].members.clear();
        self.free.push(id);
    }

    /// Takes `i` out of its block. Returns the block id if the block survives.
    pub fn remove_point(&mut self, model: &M, data: &[M::Datum], i: usize) -> Option<BlockId> {
        let b = self.block_of(i);
        let pos = self.position[i];
        let slot = &mut self.slots[b];
        slot.members.swap_remove(pos);
        if pos < slot.members.len() {
            self.position[slot.members[pos]] = pos;
        }
        self.assignment[i] = UNASSIGNED;
        if slot.members.is_empty() {
            slot.stat = model.empty_stat();
            self.close_block(b);
            None
        } else {
            model.remove(&mut slot.stat, &data[i]);
            slot.log_marginal = model.log_marginal(&slot.stat);
            Some(b)
        }
    }

    /// Puts an unassigned point into block `target`, or into a new block.
    pub fn insert_point(&mut self, model: &M, data: &[M::Datum], i: usize, target: Option<BlockId>) -> BlockId {
        debug_assert_eq!(self.assignment[i], UNASSIGNED);
        match target {
            Some(b) => {
                let slot = &mut self.slots[b];
                self.position[i] = slot.members.len();
                self.assignment[i] = b;
                slot.members.push(i);
                model.add(&mut slot.stat, &data[i]);
                slot.log_marginal = model.log_marginal(&slot.stat);
                b
            }
            None => {
                let mut stat = model.empty_stat();
                model.add(&mut stat, &data[i]);
                self.open_block(model, vec![i], stat)
            }
        }
    }

    /// Replaces the blocks `old` by `new`, given with their statistics.
    ///
    /// The new blocks must cover exactly the points of the old ones.
    pub fn replace_blocks(
        &mut self,
        model: &M,
        old: &[BlockId],
        new: Vec<(Vec<usize>, M::Stat)>,
    ) -> Result<Vec<BlockId>> {
        let old_count: usize = old.iter().map(|&b| self.size(b)).sum();
        let new_count: usize = new.iter().map(|(m, _)| m.len()).sum();
        if old_count != new_count {
            return Err(PgsmError::Consistency(format!(
                "replacement blocks cover {new_count} points, replaced blocks cover {old_count}"
            )));
        }
        let mut claimed = std::collections::HashSet::with_capacity(new_count);
        for (members, _) in &new {
            if members.is_empty() {
                return Err(PgsmError::Consistency("replacement block is empty".into()));
            }
            for &i in members {
                if !claimed.insert(i) {
                    return Err(PgsmError::Consistency(format!("point {i} appears twice")));
                }
                if i >= self.len() || !old.contains(&self.assignment[i]) {
                    return Err(PgsmError::Consistency(format!(
                        "point {i} is not part of the replaced blocks"
                    )));
                }
            }
        }
        for &b in old {
            for k in 0..self.slots[b].members.len() {
                let i = self.slots[b].members[k];
                self.assignment[i] = UNASSIGNED;
            }
            self.close_block(b);
        }
        Ok(new
            .into_iter()
            .map(|(members, stat)| self.open_block(model, members, stat))
            .collect())
    }

    pub fn to_clustering(&self) -> Clustering {
        Clustering::from_labels(&self.assignment)
    }

    pub fn block_sizes(&self) -> impl Iterator<Item = usize> + '_ {
        self.active.iter().map(|&b| self.slots[b].members.len())
    }

    /// Unnormalised log posterior `log tau(c) + sum_b log L(y_b)`.
    pub fn log_score(&self, prior: &PartitionPrior) -> f64 {
        prior.log_prior(self.block_sizes()) + self.active.iter().map(|&b| self.slots[b].log_marginal).sum::<f64>()
    }

    /// Sum of the cached block log marginals.
    pub fn log_likelihood(&self) -> f64 {
        self.active.iter().map(|&b| self.slots[b].log_marginal).sum()
    }

    /// Rebuilds every block statistic from scratch and compares the cached
    /// marginals and index structures against it.
    pub fn check_consistency(&self, model: &M, data: &[M::Datum], rel_tol: f64) -> Result<()> {
        let mut seen = vec![false; self.len()];
        for (idx, &b) in self.active.iter().enumerate() {
            if self.active_index[b] != idx {
                return Err(PgsmError::Consistency(format!("block {b} has a stale active index")));
            }
            let slot = &self.slots[b];
            if slot.members.is_empty() {
                return Err(PgsmError::Consistency(format!("live block {b} is empty")));
            }
            for (pos, &i) in slot.members.iter().enumerate() {
                if self.assignment[i] != b || self.position[i] != pos || seen[i] {
                    return Err(PgsmError::Consistency(format!("point {i} has a stale index entry")));
                }
                seen[i] = true;
            }
            let fresh = model.log_marginal(&model.stat_of(slot.members.iter().map(|&i| &data[i])));
            let cached = slot.log_marginal;
            let current = model.log_marginal(&slot.stat);
            for v in [cached, current] {
                if (v - fresh).abs() > rel_tol * fresh.abs().max(1.0) {
                    return Err(PgsmError::Consistency(format!(
                        "block {b}: cached log marginal {v} differs from rebuilt value {fresh}"
                    )));
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(PgsmError::Consistency(format!("point {i} is not in any block")));
        }
        Ok(())
    }
}
