//! Conditional SMC over allocation paths.
//!
//! Proposals are fully adapted: each particle moves to a successor with
//! probability proportional to the one-step target ratio, and its incremental
//! weight is the sum of those ratios, so it does not depend on the move taken.

use rand::seq::SliceRandom;
use rand::Rng;

use super::particle::{Particle, Ratios, Target};
use super::state_space::{phi, phi_inverse, AllocState};
use super::PgsmConfig;
use crate::error::{PgsmError, Result};
use crate::likelihood::ConjugateModel;
use crate::math::{logsumexp, normalize_log_weights, sample_categorical, sample_log_categorical};

/// Uniform permutation of `anchors` followed by a uniform permutation of `others`.
pub fn sample_permutation<R: Rng + ?Sized>(anchors: &[usize], others: &[usize], rng: &mut R) -> Vec<usize> {
    let mut sigma = Vec::with_capacity(anchors.len() + others.len());
    sigma.extend_from_slice(anchors);
    sigma[..].shuffle(rng);
    let start = sigma.len();
    sigma.extend_from_slice(others);
    sigma[start..].shuffle(rng);
    sigma
}

/// `(N sum_p w_p^2)^-1` for normalised weights.
pub fn relative_ess(weights: &[f64]) -> Result<f64> {
    let sq: f64 = weights.iter().map(|w| w * w).sum();
    if !(sq > 0.0) || !sq.is_finite() {
        return Err(PgsmError::Numerical("relative ESS of all-zero weights".into()));
    }
    Ok((1.0 / (weights.len() as f64 * sq)).min(1.0))
}

/// Ancestor indices for a conditional multinomial resampling step: index 0
/// keeps its own lineage, every other index draws i.i.d. from `weights`.
pub fn conditional_multinomial_resample<R: Rng + ?Sized>(weights: &[f64], rng: &mut R, ancestors: &mut Vec<usize>) {
    ancestors.clear();
    ancestors.push(0);
    for _ in 1..weights.len() {
        ancestors.push(sample_categorical(weights, rng));
    }
}

/// What happened inside one SMC sweep.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PgsmDiagnostics {
    /// Closure size `n`.
    pub closure_size: usize,
    /// Generations actually simulated (fewer than `n` after early termination).
    pub generations: usize,
    /// Relative ESS checked before each generation `t >= 2`.
    pub relative_ess: Vec<f64>,
    /// Whether resampling happened before each generation `t >= 2`.
    pub resampled: Vec<bool>,
    /// Generation at which every particle was absorbed in the merge state.
    pub early_stop: Option<usize>,
    /// Number of incremental weights computed.
    pub weight_evaluations: usize,
    /// Whether annealed targets were used.
    pub annealed: bool,
}

impl PgsmDiagnostics {
    pub fn resample_count(&self) -> usize {
        self.resampled.iter().filter(|&&r| r).count()
    }
}

/// Result of one conditional SMC sweep: the new restricted blocks with their
/// statistics, block 0 holding the first permuted anchor.
#[derive(Clone, Debug)]
pub struct PgsmOutput<S> {
    pub blocks: Vec<Vec<usize>>,
    pub stats: Vec<S>,
    pub sigma: Vec<usize>,
    pub diagnostics: PgsmDiagnostics,
}

struct Sweep<S> {
    particles: Vec<Particle<S>>,
    log_w: Vec<f64>,
    log_z: f64,
    states: Vec<AllocState>,
    ancestors: Vec<u32>,
    diagnostics: PgsmDiagnostics,
}

/// Runs the particle system over the whole permuted closure.
///
/// With `conditional` set, particle 0 is forced along that path and the sweep
/// may stop early once every particle sits in the absorbing merge state.
fn sweep<M, R>(
    target: &Target<'_, M>,
    config: &PgsmConfig,
    conditional: Option<&[AllocState]>,
    rng: &mut R,
) -> Sweep<M::Stat>
where
    M: ConjugateModel,
    R: Rng + ?Sized,
{
    let n = target.len();
    let np = config.particles;
    let s = target.num_anchors;
    let anneal = config.anneal && target.can_anneal();
    let delta_rho = if anneal { target.delta_rho() } else { 0.0 };
    let sign = if config.negate_log_weights { -1.0 } else { 1.0 };

    let first = Particle::initial(target);
    let mut log_z = if anneal { 0.0 } else { first.log_gamma() };
    let mut particles = vec![first; np];
    let mut scratch = particles.clone();
    let mut log_w = vec![0.0; np];
    let mut states = Vec::with_capacity(n * np);
    let mut ancestors: Vec<u32> = Vec::with_capacity(n * np);
    states.extend(std::iter::repeat(AllocState::initial()).take(np));
    ancestors.extend((0..np as u32).take(np));

    let mut diagnostics = PgsmDiagnostics {
        closure_size: n,
        generations: 1,
        annealed: anneal,
        ..Default::default()
    };
    let mut weights = Vec::with_capacity(np);
    let mut anc = Vec::with_capacity(np);
    let mut ratios = Ratios::new();
    let mut finite = Vec::with_capacity(4);

    for t in 1..n {
        let lse_prev = normalize_log_weights(&log_w, &mut weights);
        let ess = relative_ess(&weights).unwrap_or(0.0);
        let resample = config.ess_threshold >= 1.0 || ess < config.ess_threshold;
        diagnostics.relative_ess.push(ess);
        diagnostics.resampled.push(resample);
        let lse_prev = if resample {
            conditional_multinomial_resample(&weights, rng, &mut anc);
            for (p, &a) in anc.iter().enumerate() {
                scratch[p].clone_from(&particles[a]);
            }
            std::mem::swap(&mut particles, &mut scratch);
            log_w.iter_mut().for_each(|w| *w = 0.0);
            (np as f64).ln()
        } else {
            anc.clear();
            anc.extend(0..np);
            lse_prev
        };

        let anchor_step = t < s;
        let singleton = if anchor_step {
            target.model.log_predictive(&target.model.empty_stat(), target.datum(t))
        } else {
            f64::NAN
        };
        for (p, particle) in particles.iter_mut().enumerate() {
            let succ = particle.successor_log_ratios(target, singleton, &mut ratios);
            diagnostics.weight_evaluations += 1;
            let forced = conditional.map(|path| path[t]).filter(|_| p == 0);
            let (log_inc, k) = if anneal && anchor_step {
                finite.clear();
                finite.extend((0..succ.len()).filter(|&k| ratios[k] > f64::NEG_INFINITY));
                let k = match forced {
                    Some(x) => succ.iter().position(|y| *y == x).expect("conditional path is valid"),
                    None => finite[rng.random_range(0..finite.len())],
                };
                ((finite.len() as f64).ln(), k)
            } else {
                let mut inc = logsumexp(&ratios);
                if anneal {
                    inc += delta_rho * particle.log_gamma_anchor();
                }
                let k = match forced {
                    Some(x) => succ.iter().position(|y| *y == x).expect("conditional path is valid"),
                    None => sample_log_categorical(&ratios, rng),
                };
                (inc, k)
            };
            particle.advance(target, succ[k], ratios[k]);
            log_w[p] += sign * log_inc;
            states.push(succ[k]);
            ancestors.push(anc[p] as u32);
        }
        log_z += logsumexp(&log_w) - lse_prev;
        diagnostics.generations = t + 1;

        if conditional.is_some() && particles.iter().all(|p| p.state().is_absorbing(s)) {
            diagnostics.early_stop = Some(t + 1);
            break;
        }
    }
    Sweep {
        particles,
        log_w,
        log_z,
        states,
        ancestors,
        diagnostics,
    }
}

/// One conditional SMC sweep on the closure `sigma` (anchors first) started from
/// the restricted clustering `current`; returns a draw from a kernel that
/// leaves the restricted target invariant.
pub fn pgsm_sweep<M, R>(
    target: &Target<'_, M>,
    current: &[Vec<usize>],
    config: &PgsmConfig,
    rng: &mut R,
) -> Result<PgsmOutput<M::Stat>>
where
    M: ConjugateModel,
    R: Rng + ?Sized,
{
    config.validate()?;
    if config.num_anchors != target.num_anchors {
        return Err(PgsmError::Contract(format!(
            "target has {} anchors but the configuration asks for {}",
            target.num_anchors, config.num_anchors
        )));
    }
    let path = phi_inverse(target.sigma, current, target.num_anchors)?;
    let run = sweep(target, config, Some(&path), rng);
    let np = config.particles;
    let generations = run.diagnostics.generations;

    let mut weights = Vec::with_capacity(np);
    normalize_log_weights(&run.log_w, &mut weights);
    let mut k = sample_categorical(&weights, rng);
    let mut stats: Vec<M::Stat> = run.particles[k].stats().to_vec();

    let sigma = target.sigma.to_vec();
    let blocks = if run.diagnostics.early_stop.is_some() {
        for t in generations..target.len() {
            target.model.add(&mut stats[0], target.datum(t));
        }
        vec![sigma.clone()]
    } else {
        let mut chosen = vec![AllocState::initial(); generations];
        for t in (0..generations).rev() {
            chosen[t] = run.states[t * np + k];
            k = run.ancestors[t * np + k] as usize;
        }
        phi(&sigma, &chosen, target.num_anchors)?
    };
    Ok(PgsmOutput {
        blocks,
        stats,
        sigma,
        diagnostics: run.diagnostics,
    })
}

/// Samples a permutation of the closure and runs [`pgsm_sweep`].
///
/// `anchors` lists the anchor indices, `current` the restricted clustering
/// (every block containing an anchor), and `outside_clusters` the number of
/// clusters of the full clustering that contain no anchor.
pub fn pgsm_step<M, R>(
    model: &M,
    data: &[M::Datum],
    prior: &crate::prior::PartitionPrior,
    anchors: &[usize],
    current: &[Vec<usize>],
    outside_clusters: usize,
    config: &PgsmConfig,
    rng: &mut R,
) -> Result<PgsmOutput<M::Stat>>
where
    M: ConjugateModel,
    R: Rng + ?Sized,
{
    let others: Vec<usize> = current
        .iter()
        .flatten()
        .copied()
        .filter(|i| !anchors.contains(i))
        .collect();
    let sigma = sample_permutation(anchors, &others, rng);
    let target = Target::new(model, data, prior, &sigma, anchors.len(), outside_clusters)?;
    pgsm_sweep(&target, current, config, rng)
}

/// Unconditional SMC estimate of `log sum_{c_bar} gamma_n(c_bar)` with the same
/// proposals and weights as the conditional sweep.
pub fn log_normalizer_estimate<M, R>(target: &Target<'_, M>, config: &PgsmConfig, rng: &mut R) -> f64
where
    M: ConjugateModel,
    R: Rng + ?Sized,
{
    sweep(target, config, None, rng).log_z
}
