//! Set partitions of observation indices.
//!
//! [`Clustering`] is a partition of `0..n` stored both as a label per index and
//! as per-block membership lists. Labels are canonical (first-occurrence order),
//! so derived equality is label-free set-of-sets equality.
//!
//! [`SubPartition`] is a partition of an arbitrary index subset, used for the
//! restricted clusterings a split-merge move operates on.

use std::collections::HashMap;

use crate::error::{input, PgsmError, Result};

/// Largest `n` accepted by [`enumerate_partitions`]; Bell(12) = 4 213 597.
pub const MAX_ENUMERATION_SIZE: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Clustering {
    labels: Vec<usize>,
    blocks: Vec<Vec<usize>>,
}

impl Clustering {
    /// Builds a clustering from arbitrary per-index labels.
    pub fn from_labels(raw: &[usize]) -> Self {
        let mut remap = HashMap::new();
        let mut labels = Vec::with_capacity(raw.len());
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (i, &l) in raw.iter().enumerate() {
            let next = remap.len();
            let id = *remap.entry(l).or_insert(next);
            if id == blocks.len() {
                blocks.push(Vec::new());
            }
            blocks[id].push(i);
            labels.push(id);
        }
        Self { labels, blocks }
    }

    /// Builds a clustering from explicit blocks, which must partition `0..n`.
    pub fn from_blocks(n: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        let mut raw = vec![usize::MAX; n];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return input(format!("block {b} is empty"));
            }
            for &i in block {
                if i >= n {
                    return input(format!("index {i} out of range for {n} observations"));
                }
                if raw[i] != usize::MAX {
                    return input(format!("index {i} appears in more than one block"));
                }
                raw[i] = b;
            }
        }
        if let Some(i) = raw.iter().position(|&l| l == usize::MAX) {
            return input(format!("index {i} is not covered by any block"));
        }
        Ok(Self::from_labels(&raw))
    }

    pub fn single_block(n: usize) -> Self {
        Self::from_labels(&vec![0; n])
    }

    pub fn singletons(n: usize) -> Self {
        Self::from_labels(&(0..n).collect::<Vec<_>>())
    }

    /// Number of observations `T`.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of blocks `|c|`.
    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Canonical id of the block containing `i`.
    pub fn block_of(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn block_sizes(&self) -> impl Iterator<Item = usize> + '_ {
        self.blocks.iter().map(Vec::len)
    }
}

/// A partition of a subset of `0..n`, in canonical form: every block sorted and
/// blocks ordered by their smallest element.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubPartition {
    blocks: Vec<Vec<usize>>,
}

impl SubPartition {
    pub fn new(mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for block in &mut blocks {
            if block.is_empty() {
                return input("sub-partition contains an empty block");
            }
            for &i in block.iter() {
                if !seen.insert(i) {
                    return input(format!("index {i} appears twice in a sub-partition"));
                }
            }
            block.sort_unstable();
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Sorted list of every index covered.
    pub fn indices(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.blocks.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }

    pub fn len(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Index of the block holding `i`, if any.
    pub fn block_of(&self, i: usize) -> Option<usize> {
        self.blocks.iter().position(|b| b.binary_search(&i).is_ok())
    }
}

fn check_anchors(n: usize, anchors: &[usize]) -> Result<()> {
    if anchors.len() < 2 {
        return input(format!("need at least two anchors, got {}", anchors.len()));
    }
    for (k, &a) in anchors.iter().enumerate() {
        if a >= n {
            return input(format!("anchor {a} out of range for {n} observations"));
        }
        if anchors[..k].contains(&a) {
            return input(format!("anchor {a} repeated"));
        }
    }
    Ok(())
}

/// Restricts `c` to the blocks touched by the anchors.
///
/// Returns the restricted clustering and its closure (the sorted union of the
/// touched blocks).
pub fn restrict(c: &Clustering, anchors: &[usize]) -> Result<(SubPartition, Vec<usize>)> {
    check_anchors(c.len(), anchors)?;
    let mut ids: Vec<usize> = anchors.iter().map(|&a| c.block_of(a)).collect();
    ids.sort_unstable();
    ids.dedup();
    let blocks: Vec<Vec<usize>> = ids.iter().map(|&b| c.blocks()[b].clone()).collect();
    let restricted = SubPartition::new(blocks)?;
    let closure = restricted.indices();
    Ok((restricted, closure))
}

/// Replaces the restricted blocks `old` of `c` by `new`, leaving every other
/// block untouched.
pub fn reassemble(c: &Clustering, old: &SubPartition, new: &SubPartition) -> Result<Clustering> {
    let covered = old.indices();
    if new.indices() != covered {
        return Err(PgsmError::Consistency(
            "replacement blocks do not cover exactly the restricted index set".into(),
        ));
    }
    for block in old.blocks() {
        let id = c.block_of(block[0]);
        if c.blocks()[id] != *block {
            return Err(PgsmError::Consistency(format!(
                "restricted block starting at {} is not a block of the clustering",
                block[0]
            )));
        }
    }
    let mut raw: Vec<usize> = c.labels().to_vec();
    let offset = c.num_blocks();
    for (k, block) in new.blocks().iter().enumerate() {
        for &i in block {
            raw[i] = offset + k;
        }
    }
    Ok(Clustering::from_labels(&raw))
}

/// Bell numbers by the Bell triangle. Exact for `n <= 25`.
pub fn bell_number(n: usize) -> u128 {
    let mut row = vec![1u128];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().unwrap());
        for v in &row {
            let last = *next.last().unwrap();
            next.push(last + v);
        }
        row = next;
    }
    row[0]
}

/// Iterator over the restricted growth strings of length `n`, i.e. over all
/// set partitions of `0..n` encoded as canonical label vectors.
#[derive(Clone, Debug)]
pub struct RestrictedGrowth {
    labels: Vec<usize>,
    maxima: Vec<usize>,
    done: bool,
}

impl RestrictedGrowth {
    pub fn new(n: usize) -> Self {
        Self {
            labels: vec![0; n],
            maxima: vec![0; n],
            done: false,
        }
    }
}

impl Iterator for RestrictedGrowth {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let current = self.labels.clone();
        // advance: find the rightmost position that can still grow
        let n = self.labels.len();
        let mut k = n;
        loop {
            if k <= 1 {
                self.done = true;
                break;
            }
            k -= 1;
            let bound = self.maxima[k - 1] + 1;
            if self.labels[k] < bound {
                self.labels[k] += 1;
                self.maxima[k] = self.maxima[k - 1].max(self.labels[k]);
                for j in k + 1..n {
                    self.labels[j] = 0;
                    self.maxima[j] = self.maxima[k];
                }
                break;
            }
        }
        Some(current)
    }
}

/// Every partition of `0..n`, each exactly once.
pub fn enumerate_partitions(n: usize) -> Result<impl Iterator<Item = Clustering>> {
    if n > MAX_ENUMERATION_SIZE {
        return Err(PgsmError::TooLarge {
            what: "partition enumeration",
            size: n,
            limit: MAX_ENUMERATION_SIZE,
        });
    }
    Ok(RestrictedGrowth::new(n).map(|labels| Clustering::from_labels(&labels)))
}
