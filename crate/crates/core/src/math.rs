//! Small numerical helpers shared by the samplers.

use rand::Rng;

/// `log(sum(exp(xs)))`, returning `-inf` for an empty or all `-inf` input.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Normalises log weights in place into probabilities; returns the log of the
/// normalising sum.
pub fn normalize_log_weights(log_w: &[f64], out: &mut Vec<f64>) -> f64 {
    let lse = logsumexp(log_w);
    out.clear();
    out.extend(log_w.iter().map(|w| (w - lse).exp()));
    lse
}

/// Draws an index with probability proportional to `exp(log_w[i])`.
///
/// Entries equal to `-inf` are never selected. Panics if every entry is `-inf`.
pub fn sample_log_categorical<R: Rng + ?Sized>(log_w: &[f64], rng: &mut R) -> usize {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(max > f64::NEG_INFINITY, "all categorical weights are zero");
    let total: f64 = log_w.iter().map(|w| (w - max).exp()).sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, w) in log_w.iter().enumerate() {
        let p = (w - max).exp();
        if p > 0.0 {
            last = i;
            if u < p {
                return i;
            }
            u -= p;
        }
    }
    last
}

/// Draws an index with probability proportional to `weights[i]` (non-negative).
pub fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    assert!(total > 0.0, "all categorical weights are zero");
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, &p) in weights.iter().enumerate() {
        if p > 0.0 {
            last = i;
            if u < p {
                return i;
            }
            u -= p;
        }
    }
    last
}
