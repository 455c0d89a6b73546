//! Particles of the split-merge SMC and the intermediate targets they follow.
//!
//! The plain target after `t` points is
//! `gamma_t = tau1_bar(#blocks) * prod_b tau2(|b|) L(y_b)` over the blocks
//! built so far. The annealed target is the indicator of a valid prefix while
//! anchors are being placed, and `gamma_t * gamma_s^(rho_t - 1)` afterwards,
//! with `rho_t = (t - s) / (n - s)` rising linearly to one at `t = n`.

use smallvec::SmallVec;

use super::state_space::{AllocState, Successors, MAX_ANCHORS};
use crate::error::{input, Result};
use crate::likelihood::ConjugateModel;
use crate::prior::PartitionPrior;

pub type Ratios = SmallVec<[f64; 4]>;

/// A split-merge sub-problem: the data of the closure in permuted order.
pub struct Target<'a, M: ConjugateModel> {
    pub model: &'a M,
    pub data: &'a [M::Datum],
    pub prior: &'a PartitionPrior,
    /// Permuted closure, anchors first.
    pub sigma: &'a [usize],
    pub num_anchors: usize,
    /// Clusters outside the closure, `|c| - |c_bar|`.
    pub outside_clusters: usize,
}

impl<'a, M: ConjugateModel> Target<'a, M> {
    pub fn new(
        model: &'a M,
        data: &'a [M::Datum],
        prior: &'a PartitionPrior,
        sigma: &'a [usize],
        num_anchors: usize,
        outside_clusters: usize,
    ) -> Result<Self> {
        if !(2..=MAX_ANCHORS).contains(&num_anchors) {
            return input(format!("anchor count must lie in 2..={MAX_ANCHORS}, got {num_anchors}"));
        }
        if sigma.len() < num_anchors {
            return input("closure is smaller than the anchor set");
        }
        if let Some(&i) = sigma.iter().find(|&&i| i >= data.len()) {
            return input(format!("index {i} out of range for {} observations", data.len()));
        }
        Ok(Self {
            model,
            data,
            prior,
            sigma,
            num_anchors,
            outside_clusters,
        })
    }

    /// Number of points `n = |s_bar|`.
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// The `t`-th permuted datum, 0-based.
    pub fn datum(&self, t: usize) -> &M::Datum {
        &self.data[self.sigma[t]]
    }

    /// `log tau1_bar(k)`.
    pub fn log_tau1_bar(&self, k: usize) -> f64 {
        self.prior.log_tau1(k + self.outside_clusters)
    }

    /// Whether the annealed target sequence is usable (it needs `n > |s|`).
    pub fn can_anneal(&self) -> bool {
        self.len() > self.num_anchors
    }

    /// Annealing increment `1 / (n - |s|)`.
    pub fn delta_rho(&self) -> f64 {
        1.0 / (self.len() - self.num_anchors) as f64
    }
}

/// `log gamma_hat_t` from the plain `log gamma_t` of the same prefix and the
/// value `log gamma_s` it had when the last anchor was placed.
pub fn annealed_log_target(log_gamma_t: f64, log_gamma_anchor: f64, t: usize, n: usize, num_anchors: usize) -> f64 {
    if t <= num_anchors {
        return if log_gamma_t > f64::NEG_INFINITY {
            0.0
        } else {
            f64::NEG_INFINITY
        };
    }
    let rho = (t - num_anchors) as f64 / (n - num_anchors) as f64;
    log_gamma_t + (rho - 1.0) * log_gamma_anchor
}

/// One partial allocation of the closure with its cached block statistics.
#[derive(Debug)]
pub struct Particle<S> {
    state: AllocState,
    stats: SmallVec<[S; MAX_ANCHORS]>,
    sizes: [usize; MAX_ANCHORS],
    placed: usize,
    log_gamma: f64,
    log_gamma_anchor: f64,
}

impl<S: Clone> Clone for Particle<S> {
    fn clone(&self) -> Self {
        Self {
            state: self.state,
            stats: self.stats.clone(),
            sizes: self.sizes,
            placed: self.placed,
            log_gamma: self.log_gamma,
            log_gamma_anchor: self.log_gamma_anchor,
        }
    }

    fn clone_from(&mut self, other: &Self) {
        self.state = other.state;
        for (dst, src) in self.stats.iter_mut().zip(&other.stats) {
            dst.clone_from(src);
        }
        self.sizes = other.sizes;
        self.placed = other.placed;
        self.log_gamma = other.log_gamma;
        self.log_gamma_anchor = other.log_gamma_anchor;
    }
}

impl<S: Clone> Particle<S> {
    /// The particle holding only the first permuted anchor.
    pub fn initial<M: ConjugateModel<Stat = S>>(target: &Target<'_, M>) -> Self {
        let mut stats: SmallVec<[S; MAX_ANCHORS]> =
            (0..target.num_anchors).map(|_| target.model.empty_stat()).collect();
        target.model.add(&mut stats[0], target.datum(0));
        let log_gamma = target.log_tau1_bar(1) + target.prior.log_tau2(1) + target.model.log_marginal(&stats[0]);
        let mut sizes = [0; MAX_ANCHORS];
        sizes[0] = 1;
        Self {
            state: AllocState::initial(),
            stats,
            sizes,
            placed: 1,
            log_gamma,
            log_gamma_anchor: f64::NAN,
        }
    }

    pub fn state(&self) -> AllocState {
        self.state
    }

    /// Number of closure points allocated so far.
    pub fn placed(&self) -> usize {
        self.placed
    }

    /// Cached `log gamma_t` of the current prefix.
    pub fn log_gamma(&self) -> f64 {
        self.log_gamma
    }

    /// `log gamma_s`, available once every anchor is placed.
    pub fn log_gamma_anchor(&self) -> f64 {
        self.log_gamma_anchor
    }

    pub fn stats(&self) -> &[S] {
        &self.stats[..self.state.num_blocks()]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes[..self.state.num_blocks()]
    }

    /// Successors of the current state and `log gamma_{t+1}(succ) - log gamma_t`
    /// for each, when allocating the next permuted point. `singleton` is the
    /// log marginal of that point alone, only used while anchors are placed.
    pub fn successor_log_ratios<M: ConjugateModel<Stat = S>>(
        &self,
        target: &Target<'_, M>,
        singleton: f64,
        ratios: &mut Ratios,
    ) -> Successors {
        let succ = self.state.successors(target.num_anchors);
        let y = target.datum(self.placed);
        let blocks = self.state.num_blocks();
        ratios.clear();
        for x in &succ {
            let b = x.joined();
            let r = if b < blocks {
                target.prior.log_tau2_ratio(self.sizes[b]) + target.model.log_predictive(&self.stats[b], y)
            } else {
                target.prior.log_tau1_ratio(blocks + target.outside_clusters) + target.prior.log_tau2(1) + singleton
            };
            ratios.push(r);
        }
        succ
    }

    /// Moves to `next`, allocating the next permuted point; `log_ratio` is the
    /// matching entry from [`Self::successor_log_ratios`].
    pub fn advance<M: ConjugateModel<Stat = S>>(&mut self, target: &Target<'_, M>, next: AllocState, log_ratio: f64) {
        let b = next.joined();
        target.model.add(&mut self.stats[b], target.datum(self.placed));
        self.sizes[b] += 1;
        self.placed += 1;
        self.state = next;
        self.log_gamma += log_ratio;
        if self.placed == target.num_anchors {
            self.log_gamma_anchor = self.log_gamma;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::NormalInverseWishart;
    use crate::pgsm::state_space::phi;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Plain target evaluated from scratch on the clustering of a prefix.
    fn brute_log_gamma(
        model: &NormalInverseWishart,
        data: &[Vec<f64>],
        prior: &PartitionPrior,
        blocks: &[Vec<usize>],
        outside: usize,
    ) -> f64 {
        let nonempty: Vec<&Vec<usize>> = blocks.iter().filter(|b| !b.is_empty()).collect();
        prior.log_tau1(nonempty.len() + outside)
            + nonempty
                .iter()
                .map(|b| prior.log_tau2(b.len()) + model.log_marginal(&model.stat_of(b.iter().map(|&i| &data[i]))))
                .sum::<f64>()
    }

    #[test]
    fn cached_gamma_matches_scratch_on_random_prefixes() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let model = NormalInverseWishart::with_defaults(2);
        let data: Vec<Vec<f64>> = (0..12)
            .map(|_| vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)])
            .collect();
        let priors = [
            PartitionPrior::dirichlet_process(0.8).unwrap(),
            PartitionPrior::pitman_yor(0.5, 0.3).unwrap(),
            PartitionPrior::finite_dirichlet(1.0, 6).unwrap(),
        ];
        for prior in &priors {
            for s in 2..=3 {
                for _ in 0..50 {
                    let sigma: Vec<usize> = {
                        let mut v: Vec<usize> = (0..12).collect();
                        rand::seq::SliceRandom::shuffle(&mut v[..], &mut rng);
                        v
                    };
                    let outside = rng.random_range(0..3);
                    let target = Target::new(&model, &data, prior, &sigma, s, outside).unwrap();
                    let mut p = Particle::initial(&target);
                    let mut path = vec![p.state()];
                    let mut ratios = Ratios::new();
                    for t in 1..sigma.len() {
                        let singleton = model.log_marginal(&model.stat_of([target.datum(t)]));
                        let succ = p.successor_log_ratios(&target, singleton, &mut ratios);
                        let k = rng.random_range(0..succ.len());
                        p.advance(&target, succ[k], ratios[k]);
                        path.push(p.state());
                        let blocks = phi(&sigma[..=t], &path, s).unwrap();
                        let brute = brute_log_gamma(&model, &data, prior, &blocks, outside);
                        assert!((p.log_gamma() - brute).abs() < 1e-8 * brute.abs().max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn annealed_target_endpoints() {
        assert_eq!(annealed_log_target(-3.0, -2.0, 2, 10, 2), 0.0);
        assert_eq!(
            annealed_log_target(f64::NEG_INFINITY, -2.0, 1, 10, 2),
            f64::NEG_INFINITY
        );
        assert_eq!(annealed_log_target(-17.25, -2.5, 10, 10, 2), -17.25);
        let mid = annealed_log_target(-10.0, -4.0, 6, 10, 2);
        assert!((mid - (-10.0 + (0.5 - 1.0) * -4.0)).abs() < 1e-15);
    }
}
