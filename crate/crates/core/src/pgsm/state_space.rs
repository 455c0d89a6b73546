//! Allocation states of the split-merge SMC and the bijection between
//! allocation paths and restricted clusterings.
//!
//! A state records the partition of the anchors placed so far (as restricted
//! growth labels), the number of blocks, and the block the most recent point
//! joined. With two anchors this gives four states:
//!
//! | state | anchors placed | blocks | joined |
//! |-------|----------------|--------|--------|
//! | `#1`  | 1              | 1      | 0      |
//! | `#2`  | 2              | 1      | 0      |
//! | `#3`  | 2              | 2      | 0      |
//! | `#4`  | 2              | 2      | 1      |
//!
//! Block 0 is always the block of the first permuted anchor.

use std::collections::HashMap;

use smallvec::SmallVec;

use crate::error::{PgsmError, Result};

/// Largest supported anchor count.
pub const MAX_ANCHORS: usize = 3;

pub type Successors = SmallVec<[AllocState; 4]>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AllocState {
    labels: [u8; MAX_ANCHORS],
    placed: u8,
    blocks: u8,
    joined: u8,
}

impl AllocState {
    /// The state after placing the first anchor.
    pub const fn initial() -> Self {
        Self {
            labels: [0; MAX_ANCHORS],
            placed: 1,
            blocks: 1,
            joined: 0,
        }
    }

    /// Number of anchors placed.
    pub fn placed(&self) -> usize {
        self.placed as usize
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks as usize
    }

    /// Block receiving the point allocated by the transition into this state.
    pub fn joined(&self) -> usize {
        self.joined as usize
    }

    /// Block labels of the anchors placed so far.
    pub fn anchor_labels(&self) -> &[u8] {
        &self.labels[..self.placed as usize]
    }

    /// True once every anchor has been placed into a single block: every
    /// continuation then joins block 0.
    pub fn is_absorbing(&self, num_anchors: usize) -> bool {
        self.placed as usize == num_anchors && self.blocks == 1
    }

    /// Allowed next states. Joins of existing blocks come first, in block
    /// order; while anchors remain to be placed, the new-block state is last.
    pub fn successors(&self, num_anchors: usize) -> Successors {
        let mut out = Successors::new();
        if (self.placed as usize) < num_anchors {
            for b in 0..=self.blocks {
                let mut next = *self;
                next.labels[self.placed as usize] = b;
                next.placed += 1;
                next.joined = b;
                if b == self.blocks {
                    next.blocks += 1;
                }
                out.push(next);
            }
        } else {
            for b in 0..self.blocks {
                out.push(Self { joined: b, ..*self });
            }
        }
        out
    }

    pub fn can_follow(&self, prev: &AllocState, num_anchors: usize) -> bool {
        prev.successors(num_anchors).contains(self)
    }

    /// Label `1..=4` of the two-anchor state diagram.
    pub fn two_anchor_label(&self) -> Option<u8> {
        match (self.placed, self.blocks, self.joined) {
            (1, 1, 0) => Some(1),
            (2, 1, 0) => Some(2),
            (2, 2, 0) => Some(3),
            (2, 2, 1) => Some(4),
            _ => None,
        }
    }
}

fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(PgsmError::Contract(msg.into()))
}

/// Checks that `path` starts at the initial state and follows allowed transitions.
pub fn validate_path(path: &[AllocState], num_anchors: usize) -> Result<()> {
    if !(2..=MAX_ANCHORS).contains(&num_anchors) {
        return contract(format!("anchor count {num_anchors} outside 2..={MAX_ANCHORS}"));
    }
    match path.first() {
        None => return contract("empty allocation path"),
        Some(first) if *first != AllocState::initial() => {
            return contract("allocation path does not start in the initial state")
        }
        _ => {}
    }
    for (t, w) in path.windows(2).enumerate() {
        if !w[1].can_follow(&w[0], num_anchors) {
            return contract(format!(
                "invalid transition at step {}: {:?} -> {:?}",
                t + 2,
                w[0],
                w[1]
            ));
        }
    }
    Ok(())
}

/// Maps a permutation and an allocation path to the blocks of the restricted
/// clustering, indexed by block label.
pub fn phi(sigma: &[usize], path: &[AllocState], num_anchors: usize) -> Result<Vec<Vec<usize>>> {
    if sigma.len() != path.len() {
        return contract(format!(
            "permutation has {} entries but path has {} states",
            sigma.len(),
            path.len()
        ));
    }
    validate_path(path, num_anchors)?;
    let blocks = path[path.len() - 1].num_blocks();
    let mut out = vec![Vec::new(); blocks];
    for (&i, x) in sigma.iter().zip(path) {
        out[x.joined()].push(i);
    }
    Ok(out)
}

/// Inverse of [`phi`]: the unique path whose image is `blocks`.
///
/// Every block must contain at least one of the first `num_anchors` entries of
/// `sigma`, and the blocks must cover exactly the entries of `sigma`.
pub fn phi_inverse(sigma: &[usize], blocks: &[Vec<usize>], num_anchors: usize) -> Result<Vec<AllocState>> {
    if !(2..=MAX_ANCHORS).contains(&num_anchors) {
        return contract(format!("anchor count {num_anchors} outside 2..={MAX_ANCHORS}"));
    }
    if sigma.len() < num_anchors {
        return contract("permutation is shorter than the anchor list");
    }
    let mut block_of = HashMap::with_capacity(sigma.len());
    for (b, block) in blocks.iter().enumerate() {
        for &i in block {
            if block_of.insert(i, b).is_some() {
                return contract(format!("index {i} appears in two blocks"));
            }
        }
    }
    if block_of.len() != sigma.len() {
        return contract("blocks do not cover exactly the permuted indices");
    }
    // relabel blocks by first appearance among the anchors
    let mut label = vec![u8::MAX; blocks.len()];
    let mut next_label = 0u8;
    let mut path = Vec::with_capacity(sigma.len());
    let mut state = AllocState::initial();
    for (t, &i) in sigma.iter().enumerate() {
        let Some(&b) = block_of.get(&i) else {
            return contract(format!("index {i} is not in any block"));
        };
        if label[b] == u8::MAX {
            if t >= num_anchors {
                return contract(format!("block containing {i} has no anchor"));
            }
            label[b] = next_label;
            next_label += 1;
        }
        let l = label[b];
        if t == 0 {
            state = AllocState::initial();
        } else {
            let succ = state.successors(num_anchors);
            state = *succ
                .iter()
                .find(|x| x.joined == l)
                .expect("relabelled block is always reachable");
        }
        path.push(state);
    }
    if (next_label as usize) != blocks.len() {
        return contract("a block contains no anchor");
    }
    Ok(path)
}

/// Every valid allocation path of length `n`.
pub fn enumerate_paths(n: usize, num_anchors: usize) -> Vec<Vec<AllocState>> {
    if n == 0 {
        return Vec::new();
    }
    let mut paths = vec![vec![AllocState::initial()]];
    for _ in 1..n {
        let mut grown = Vec::with_capacity(paths.len() * 2);
        for p in &paths {
            for s in p[p.len() - 1].successors(num_anchors) {
                let mut q = p.clone();
                q.push(s);
                grown.push(q);
            }
        }
        paths = grown;
    }
    paths
}
