//! Auxiliary-variable update of a DP concentration parameter under a Gamma prior.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};

use crate::error::{input, PgsmError, Result};

/// `Gamma(shape, rate)` prior on the concentration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl Default for GammaPrior {
    fn default() -> Self {
        Self { shape: 1.0, rate: 0.1 }
    }
}

impl GammaPrior {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
            return input(format!(
                "Gamma prior needs positive shape and rate, got ({shape}, {rate})"
            ));
        }
        Ok(Self { shape, rate })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Gamma::new(self.shape, 1.0 / self.rate)
            .expect("validated parameters")
            .sample(rng)
    }
}

/// One update of `alpha` given `clusters` blocks over `n` points: draw
/// `eta ~ Beta(alpha + 1, n)`, then `alpha` from the two-component Gamma
/// mixture with shapes `a + C` and `a + C - 1` and rate `b - ln eta`.
pub fn resample_concentration<R: Rng + ?Sized>(
    alpha: f64,
    clusters: usize,
    n: usize,
    prior: GammaPrior,
    rng: &mut R,
) -> Result<f64> {
    if !(alpha > 0.0) || clusters == 0 || n == 0 {
        return input(format!(
            "invalid concentration update inputs (alpha={alpha}, C={clusters}, T={n})"
        ));
    }
    let eta = Beta::new(alpha + 1.0, n as f64)
        .map_err(|e| PgsmError::Numerical(format!("auxiliary Beta draw: {e}")))?
        .sample(rng);
    let rate = prior.rate - eta.ln();
    let a = prior.shape;
    let c = clusters as f64;
    let odds = (a + c - 1.0) / (n as f64 * rate);
    let shape = if rng.random::<f64>() < odds / (1.0 + odds) {
        a + c
    } else {
        a + c - 1.0
    };
    let draw = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| PgsmError::Numerical(format!("concentration Gamma draw: {e}")))?
        .sample(rng);
    // a draw that underflows to zero would leave the DP prior undefined
    Ok(draw.max(f64::MIN_POSITIVE))
}
