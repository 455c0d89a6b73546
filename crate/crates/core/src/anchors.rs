//! Anchor proposals for split-merge moves.
//!
//! The informed proposals score blocks of a frozen snapshot of the clustering.
//! The snapshot is refreshed only when the number of clusters breaks its
//! previous record, and never after adaptation has been stopped, so between
//! adaptation events the proposal does not depend on the current state.

use std::time::{Duration, Instant};

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use smallvec::SmallVec;

use crate::error::{input, Result};
use crate::likelihood::ConjugateModel;
use crate::math::{logsumexp, sample_log_categorical};
use crate::prior::PartitionPrior;
use crate::state::ClusterState;

pub type Anchors = SmallVec<[usize; 3]>;

pub const DEFAULT_THRESHOLD: f64 = 0.01;

/// `count` distinct indices drawn uniformly from `0..n`.
pub fn uniform_anchors<R: Rng + ?Sized>(n: usize, count: usize, rng: &mut R) -> Result<Anchors> {
    if count < 2 {
        return input(format!("need at least 2 anchors, got {count}"));
    }
    if n < count {
        return input(format!("cannot draw {count} distinct anchors from {n} observations"));
    }
    Ok(sample_indices(rng, n, count).into_iter().collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProposalKind {
    Uniform,
    ClusterInformed,
    ThresholdInformed { threshold: f64 },
}

/// Record-breaking adaptation bookkeeping.
#[derive(Clone, Debug, Default)]
pub struct Adaptation {
    record: usize,
    stopped: bool,
    recomputations: usize,
    calls: usize,
    stop_after_calls: Option<usize>,
    stop_after: Option<(Instant, Duration)>,
}

impl Adaptation {
    /// Largest cluster count seen at an adaptation check.
    pub fn record(&self) -> usize {
        self.record
    }

    pub fn recomputations(&self) -> usize {
        self.recomputations
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }
}

#[derive(Clone, Debug)]
struct Snapshot<S> {
    block_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    stats: Vec<S>,
    /// Row-major pairwise log merge scores, cluster-informed only.
    pair_scores: Vec<f64>,
}

/// An anchor proposal `h`, generic over the statistic type of the model it scores with.
#[derive(Clone, Debug)]
pub struct AnchorProposal<S> {
    kind: ProposalKind,
    adaptation: Adaptation,
    snapshot: Option<Snapshot<S>>,
}

impl<S: Clone> AnchorProposal<S> {
    pub fn new(kind: ProposalKind) -> Result<Self> {
        if let ProposalKind::ThresholdInformed { threshold } = kind {
            if !(threshold > 0.0 && threshold < 1.0) {
                return input(format!("threshold must lie in (0, 1), got {threshold}"));
            }
        }
        Ok(Self {
            kind,
            adaptation: Adaptation::default(),
            snapshot: None,
        })
    }

    pub fn uniform() -> Self {
        Self::new(ProposalKind::Uniform).expect("uniform proposal is always valid")
    }

    pub fn kind(&self) -> ProposalKind {
        self.kind
    }

    pub fn adaptation(&self) -> &Adaptation {
        &self.adaptation
    }

    /// Freezes the proposal after `calls` adaptation checks.
    pub fn stop_adaptation_after_calls(&mut self, calls: usize) {
        self.adaptation.stop_after_calls = Some(calls);
    }

    /// Freezes the proposal once `limit` of wall-clock time has passed from now.
    pub fn stop_adaptation_after(&mut self, limit: Duration) {
        self.adaptation.stop_after = Some((Instant::now(), limit));
    }

    pub fn stop_adaptation(&mut self) {
        self.adaptation.stopped = true;
    }

    fn is_informed(&self) -> bool {
        !matches!(self.kind, ProposalKind::Uniform)
    }

    /// Refreshes the snapshot if the cluster count breaks its record. Returns
    /// whether a recomputation happened.
    pub fn maybe_adapt<M>(&mut self, state: &ClusterState<M>, model: &M, data: &[M::Datum]) -> bool
    where
        M: ConjugateModel<Stat = S>,
    {
        let a = &mut self.adaptation;
        a.calls += 1;
        if a.stop_after_calls.is_some_and(|limit| a.calls > limit)
            || a.stop_after.is_some_and(|(start, limit)| start.elapsed() >= limit)
        {
            a.stopped = true;
        }
        if a.stopped || state.num_blocks() <= a.record {
            return false;
        }
        a.record = state.num_blocks();
        if !self.is_informed() {
            return false;
        }
        self.adaptation.recomputations += 1;
        self.snapshot = Some(self.take_snapshot(state, model, data));
        true
    }

    fn take_snapshot<M>(&self, state: &ClusterState<M>, model: &M, data: &[M::Datum]) -> Snapshot<S>
    where
        M: ConjugateModel<Stat = S>,
    {
        let ids = state.blocks();
        let mut block_of = vec![0; state.len()];
        let members: Vec<Vec<usize>> = ids.iter().map(|&b| state.members(b).to_vec()).collect();
        for (k, block) in members.iter().enumerate() {
            for &i in block {
                block_of[i] = k;
            }
        }
        let stats: Vec<S> = ids.iter().map(|&b| state.stat(b).clone()).collect();
        let log_marginals: Vec<f64> = ids.iter().map(|&b| state.log_marginal(b)).collect();
        let c = ids.len();
        let mut pair_scores = Vec::new();
        if matches!(self.kind, ProposalKind::ClusterInformed) {
            pair_scores = vec![f64::NEG_INFINITY; c * c];
            for a in 0..c {
                for b in a + 1..c {
                    // add the smaller block into a copy of the larger one
                    let (big, small) = if members[a].len() >= members[b].len() {
                        (a, b)
                    } else {
                        (b, a)
                    };
                    let mut merged = stats[big].clone();
                    for &i in &members[small] {
                        model.add(&mut merged, &data[i]);
                    }
                    let score = model.log_marginal(&merged) - log_marginals[a] - log_marginals[b];
                    pair_scores[a * c + b] = score;
                    pair_scores[b * c + a] = score;
                }
            }
        }
        Snapshot {
            block_of,
            members,
            stats,
            pair_scores,
        }
    }

    /// Blocks of the current snapshot, if one has been taken.
    pub fn snapshot_blocks(&self) -> Option<&[Vec<usize>]> {
        self.snapshot.as_ref().map(|s| s.members.as_slice())
    }

    /// Normalised attachment probabilities of point `i1` to each snapshot
    /// block, and the blocks passing the threshold (threshold-informed only).
    pub fn threshold_candidates<M>(
        &self,
        i1: usize,
        model: &M,
        data: &[M::Datum],
        prior: &PartitionPrior,
    ) -> Option<(Vec<f64>, Vec<usize>)>
    where
        M: ConjugateModel<Stat = S>,
    {
        let ProposalKind::ThresholdInformed { threshold } = self.kind else {
            return None;
        };
        let snap = self.snapshot.as_ref().filter(|s| i1 < s.block_of.len())?;
        let probs = attachment_probabilities(snap, model, data, prior, i1);
        let eligible = (0..probs.len()).filter(|&b| probs[b] >= threshold).collect();
        Some((probs, eligible))
    }

    /// Draws anchors. Informed proposals need a snapshot, taken on the first
    /// call to [`Self::maybe_adapt`]; without one they fall back to uniform.
    pub fn sample<M, R>(
        &self,
        n: usize,
        num_anchors: usize,
        model: &M,
        data: &[M::Datum],
        prior: &PartitionPrior,
        rng: &mut R,
    ) -> Result<Anchors>
    where
        M: ConjugateModel<Stat = S>,
        R: Rng + ?Sized,
    {
        if n < num_anchors || n < 2 {
            return uniform_anchors(n, num_anchors, rng);
        }
        let snapshot = match (&self.snapshot, self.kind) {
            (Some(s), _) if num_anchors == 2 && s.block_of.len() == n => s,
            _ => return uniform_anchors(n, num_anchors, rng),
        };
        let drawn = match self.kind {
            ProposalKind::Uniform => None,
            ProposalKind::ClusterInformed => cluster_informed(snapshot, rng),
            ProposalKind::ThresholdInformed { threshold } => {
                threshold_informed(snapshot, model, data, prior, threshold, rng)
            }
        };
        match drawn {
            Some(pair) => Ok(pair),
            None => uniform_anchors(n, num_anchors, rng),
        }
    }
}

fn pick_other<R: Rng + ?Sized>(block: &[usize], i1: usize, rng: &mut R) -> Option<usize> {
    let candidates = block.len() - usize::from(block.contains(&i1));
    if candidates == 0 {
        return None;
    }
    let mut k = rng.random_range(0..candidates);
    for &i in block {
        if i == i1 {
            continue;
        }
        if k == 0 {
            return Some(i);
        }
        k -= 1;
    }
    None
}

fn cluster_informed<S, R: Rng + ?Sized>(snap: &Snapshot<S>, rng: &mut R) -> Option<Anchors> {
    let c = snap.members.len();
    if c < 2 {
        return None;
    }
    let n = snap.block_of.len();
    let i1 = rng.random_range(0..n);
    let own = snap.block_of[i1];
    let row = &snap.pair_scores[own * c..(own + 1) * c];
    let mut scores: Vec<f64> = row.to_vec();
    scores[own] = f64::NEG_INFINITY;
    scores[own] = logsumexp(&scores) - ((c - 1) as f64).ln();
    let b = sample_log_categorical(&scores, rng);
    let i2 = pick_other(&snap.members[b], i1, rng)?;
    Some(SmallVec::from_slice(&[i1, i2]))
}

/// Normalised attachment probabilities `p_b` of point `i1` over the snapshot blocks.
fn attachment_probabilities<M: ConjugateModel>(
    snap: &Snapshot<M::Stat>,
    model: &M,
    data: &[M::Datum],
    prior: &PartitionPrior,
    i1: usize,
) -> Vec<f64> {
    let own = snap.block_of[i1];
    let y = &data[i1];
    let mut scores: Vec<f64> = (0..snap.members.len())
        .map(|b| {
            let size = snap.members[b].len();
            if b != own {
                prior.log_tau2_ratio(size) + model.log_predictive(&snap.stats[b], y)
            } else if size == 1 {
                prior.log_tau2(1) + model.log_predictive(&model.empty_stat(), y)
            } else {
                let mut reduced = snap.stats[b].clone();
                model.remove(&mut reduced, y);
                prior.log_tau2_ratio(size - 1) + model.log_predictive(&reduced, y)
            }
        })
        .collect();
    let lse = logsumexp(&scores);
    for v in &mut scores {
        *v = (*v - lse).exp();
    }
    scores
}

fn threshold_informed<M, R>(
    snap: &Snapshot<M::Stat>,
    model: &M,
    data: &[M::Datum],
    prior: &PartitionPrior,
    threshold: f64,
    rng: &mut R,
) -> Option<Anchors>
where
    M: ConjugateModel,
    R: Rng + ?Sized,
{
    let i1 = rng.random_range(0..snap.block_of.len());
    let probs = attachment_probabilities(snap, model, data, prior, i1);
    let eligible: SmallVec<[usize; 16]> = (0..probs.len()).filter(|&b| probs[b] >= threshold).collect();
    if eligible.is_empty() {
        return None;
    }
    let b = eligible[rng.random_range(0..eligible.len())];
    let i2 = pick_other(&snap.members[b], i1, rng)?;
    Some(SmallVec::from_slice(&[i1, i2]))
}
