//! Exact posteriors by exhaustive enumeration.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{input, PgsmError, Result};
use crate::likelihood::ConjugateModel;
use crate::math::logsumexp;
use crate::partition::{enumerate_partitions, Clustering, RestrictedGrowth, SubPartition};
use crate::pgsm::MAX_ANCHORS;
use crate::prior::PartitionPrior;

/// Largest dataset accepted by [`exact_posterior`].
pub const MAX_POSTERIOR_SIZE: usize = 10;
/// Largest restricted support accepted by [`exact_restricted_target`].
pub const MAX_RESTRICTED_SUPPORT: usize = (1 << 14) + 1;

/// A normalised distribution over finitely many outcomes.
#[derive(Clone, Debug)]
pub struct Enumerated<K> {
    outcomes: Vec<K>,
    probs: Vec<f64>,
    index: HashMap<K, usize>,
}

impl<K: Clone + Eq + Hash> Enumerated<K> {
    /// Normalises unnormalised log weights.
    pub fn from_log_weights(outcomes: Vec<K>, log_w: Vec<f64>) -> Result<Self> {
        if outcomes.len() != log_w.len() || outcomes.is_empty() {
            return input("outcomes and weights must be nonempty and of equal length");
        }
        let lse = logsumexp(&log_w);
        if !lse.is_finite() {
            return Err(PgsmError::Numerical("every outcome has zero weight".into()));
        }
        let probs = log_w.iter().map(|w| (w - lse).exp()).collect();
        let index = outcomes.iter().cloned().enumerate().map(|(k, o)| (o, k)).collect();
        Ok(Self { outcomes, probs, index })
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn outcomes(&self) -> &[K] {
        &self.outcomes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn index_of(&self, outcome: &K) -> Option<usize> {
        self.index.get(outcome).copied()
    }

    pub fn prob(&self, outcome: &K) -> f64 {
        self.index_of(outcome).map_or(0.0, |k| self.probs[k])
    }

    /// Total variation distance to the empirical distribution of `counts`
    /// (indexed like the outcomes). Mass on unknown outcomes is passed as
    /// `outside`.
    pub fn tv_to_counts(&self, counts: &[u64], outside: u64) -> f64 {
        debug_assert_eq!(counts.len(), self.len());
        let total = counts.iter().sum::<u64>() + outside;
        if total == 0 {
            return 1.0;
        }
        let total = total as f64;
        let inside: f64 = self
            .probs
            .iter()
            .zip(counts)
            .map(|(p, &c)| (p - c as f64 / total).abs())
            .sum();
        0.5 * (inside + outside as f64 / total)
    }
}

/// Posterior over every clustering of `data`.
pub fn exact_posterior<M: ConjugateModel>(
    model: &M,
    data: &[M::Datum],
    prior: &PartitionPrior,
) -> Result<Enumerated<Clustering>> {
    if data.len() > MAX_POSTERIOR_SIZE {
        return Err(PgsmError::TooLarge {
            what: "exact posterior",
            size: data.len(),
            limit: MAX_POSTERIOR_SIZE,
        });
    }
    if data.is_empty() {
        return input("exact posterior of an empty dataset");
    }
    model.validate_all(data)?;
    let mut outcomes = Vec::new();
    let mut log_w = Vec::new();
    let mut cache: HashMap<Vec<usize>, f64> = HashMap::new();
    for c in enumerate_partitions(data.len())? {
        let mut w = prior.log_prior(c.block_sizes());
        for block in c.blocks() {
            w += *cache
                .entry(block.clone())
                .or_insert_with(|| model.log_marginal(&model.stat_of(block.iter().map(|&i| &data[i]))));
        }
        outcomes.push(c);
        log_w.push(w);
    }
    Enumerated::from_log_weights(outcomes, log_w)
}

/// Number of restricted clusterings of `closure_size` points with `anchors`
/// anchors, i.e. partitions in which every block holds an anchor.
pub fn restricted_support_size(closure_size: usize, anchors: usize) -> u128 {
    // sum over anchor partitions with k blocks of k^(n - s)
    let rest = (closure_size - anchors) as u32;
    RestrictedGrowth::new(anchors)
        .map(|labels| {
            let k = labels.iter().max().map_or(0, |m| m + 1) as u128;
            k.pow(rest)
        })
        .sum()
}

/// Restricted target over the partitions of `closure` whose blocks each hold an
/// anchor, with `outside_clusters` further clusters contributing to `tau1`.
pub fn exact_restricted_target<M: ConjugateModel>(
    model: &M,
    data: &[M::Datum],
    prior: &PartitionPrior,
    anchors: &[usize],
    closure: &[usize],
    outside_clusters: usize,
) -> Result<Enumerated<SubPartition>> {
    let s = anchors.len();
    if !(2..=MAX_ANCHORS).contains(&s) {
        return input(format!("anchor count {s} outside 2..={MAX_ANCHORS}"));
    }
    for (k, a) in anchors.iter().enumerate() {
        if !closure.contains(a) {
            return input(format!("anchor {a} is not in the closure"));
        }
        if anchors[..k].contains(a) {
            return input(format!("anchor {a} repeated"));
        }
    }
    let mut sorted = closure.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != closure.len() || sorted.last().is_some_and(|&m| m >= data.len()) {
        return input("closure must hold distinct in-range indices");
    }
    let support = restricted_support_size(closure.len(), s);
    if support > MAX_RESTRICTED_SUPPORT as u128 {
        return Err(PgsmError::TooLarge {
            what: "restricted target support",
            size: usize::try_from(support).unwrap_or(usize::MAX),
            limit: MAX_RESTRICTED_SUPPORT,
        });
    }
    let others: Vec<usize> = closure.iter().copied().filter(|i| !anchors.contains(i)).collect();
    let mut outcomes = Vec::with_capacity(support as usize);
    let mut log_w = Vec::with_capacity(support as usize);
    for anchor_labels in RestrictedGrowth::new(s) {
        let k = anchor_labels.iter().max().unwrap() + 1;
        // odometer over the assignments of the other points to the k blocks
        let mut assign = vec![0usize; others.len()];
        loop {
            let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); k];
            for (a, &l) in anchors.iter().zip(&anchor_labels) {
                blocks[l].push(*a);
            }
            for (o, &l) in others.iter().zip(&assign) {
                blocks[l].push(*o);
            }
            let mut w = prior.log_tau1(k + outside_clusters);
            for b in &blocks {
                w += prior.log_tau2(b.len()) + model.log_marginal(&model.stat_of(b.iter().map(|&i| &data[i])));
            }
            outcomes.push(SubPartition::new(blocks)?);
            log_w.push(w);
            let mut pos = 0;
            while pos < assign.len() {
                assign[pos] += 1;
                if assign[pos] < k {
                    break;
                }
                assign[pos] = 0;
                pos += 1;
            }
            if pos == assign.len() {
                break;
            }
        }
    }
    Enumerated::from_log_weights(outcomes, log_w)
}
