//! Held-out posterior predictive log-likelihood.

use crate::error::{input, Result};
use crate::likelihood::ConjugateModel;
use crate::math::logsumexp;
use crate::prior::PartitionPrior;
use crate::state::ClusterState;

/// `log p(y | c, alpha)`: the attachment-weighted mixture of block
/// predictives and the prior predictive, normalised by the total weight.
pub fn predictive_log_density<M: ConjugateModel>(
    model: &M,
    state: &ClusterState<M>,
    prior: &PartitionPrior,
    empty: &M::Stat,
    y: &M::Datum,
    scratch: &mut Vec<f64>,
) -> f64 {
    scratch.clear();
    let mut total = Vec::with_capacity(state.num_blocks() + 1);
    for &b in state.blocks() {
        let w = prior.log_tau2_ratio(state.size(b));
        total.push(w);
        scratch.push(w + model.log_predictive(state.stat(b), y));
    }
    let w_new = prior.log_new_block_weight(state.num_blocks());
    total.push(w_new);
    scratch.push(w_new + model.log_predictive(empty, y));
    logsumexp(scratch) - logsumexp(&total)
}

/// Accumulates `sum_y log mean_samples p(y | c, alpha)` over posterior samples.
#[derive(Clone, Debug)]
pub struct HeldOutPredictive {
    per_point: Vec<Vec<f64>>,
}

impl HeldOutPredictive {
    pub fn new(heldout_len: usize) -> Self {
        Self {
            per_point: vec![Vec::new(); heldout_len],
        }
    }

    pub fn samples(&self) -> usize {
        self.per_point.first().map_or(0, Vec::len)
    }

    /// Adds one posterior sample and returns its own held-out log-likelihood.
    pub fn add_sample<M: ConjugateModel>(
        &mut self,
        model: &M,
        state: &ClusterState<M>,
        prior: &PartitionPrior,
        heldout: &[M::Datum],
    ) -> Result<f64> {
        if heldout.len() != self.per_point.len() {
            return input("held-out set changed size between samples");
        }
        let empty = model.empty_stat();
        let mut scratch = Vec::new();
        let mut own = 0.0;
        for (acc, y) in self.per_point.iter_mut().zip(heldout) {
            let v = predictive_log_density(model, state, prior, &empty, y, &mut scratch);
            acc.push(v);
            own += v;
        }
        Ok(own)
    }

    /// Sum over held-out points of the log of the sample-averaged density.
    pub fn value(&self) -> Result<f64> {
        let s = self.samples();
        if s == 0 {
            return input("held-out predictive needs at least one sample");
        }
        let ln_s = (s as f64).ln();
        Ok(self.per_point.iter().map(|v| logsumexp(v) - ln_s).sum())
    }
}

/// Held-out predictive log-likelihood of a set of `(clustering, prior)` samples.
pub fn heldout_predictive_loglik<M: ConjugateModel>(
    model: &M,
    samples: &[(&ClusterState<M>, PartitionPrior)],
    heldout: &[M::Datum],
) -> Result<f64> {
    if samples.is_empty() {
        return input("held-out predictive needs at least one sample");
    }
    let mut acc = HeldOutPredictive::new(heldout.len());
    for (state, prior) in samples {
        acc.add_sample(model, state, prior, heldout)?;
    }
    acc.value()
}
