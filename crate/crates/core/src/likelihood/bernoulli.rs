//! Independent Bernoulli dimensions with a shared Beta prior.

use statrs::function::beta::ln_beta;

use super::ConjugateModel;
use crate::error::{input, Result};

#[derive(Clone, Debug)]
pub struct BetaBernoulli {
    dim: usize,
    alpha: f64,
    beta: f64,
    log_beta0: f64,
}

#[derive(Debug, PartialEq)]
pub struct BetaBernoulliStat {
    count: u32,
    ones: Vec<u32>,
}

// Hand-written so that `clone_from` reuses buffers when particles are copied.
impl Clone for BetaBernoulliStat {
    fn clone(&self) -> Self {
        Self {
            count: self.count,
            ones: self.ones.clone(),
        }
    }

    fn clone_from(&mut self, source: &Self) {
        self.count = source.count;
        self.ones.clone_from(&source.ones);
    }
}

impl BetaBernoulliStat {
    pub fn count(&self) -> usize {
        self.count as usize
    }

    pub fn ones(&self) -> &[u32] {
        &self.ones
    }
}

impl BetaBernoulli {
    pub fn new(dim: usize, alpha: f64, beta: f64) -> Result<Self> {
        if dim == 0 {
            return input("Bernoulli model needs at least one dimension");
        }
        if !(alpha > 0.0 && beta > 0.0) {
            return input(format!("Beta parameters must be positive, got ({alpha}, {beta})"));
        }
        Ok(Self {
            dim,
            alpha,
            beta,
            log_beta0: ln_beta(alpha, beta),
        })
    }

    /// `(alpha, beta) = (1, 1)`.
    pub fn with_defaults(dim: usize) -> Self {
        Self::new(dim, 1.0, 1.0).expect("default Beta parameters are valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl ConjugateModel for BetaBernoulli {
    type Datum = Vec<bool>;
    type Stat = BetaBernoulliStat;

    fn empty_stat(&self) -> BetaBernoulliStat {
        BetaBernoulliStat {
            count: 0,
            ones: vec![0; self.dim],
        }
    }

    fn add(&self, stat: &mut BetaBernoulliStat, x: &Vec<bool>) {
        debug_assert_eq!(x.len(), self.dim);
        stat.count += 1;
        for (o, &v) in stat.ones.iter_mut().zip(x) {
            *o += v as u32;
        }
    }

    fn remove(&self, stat: &mut BetaBernoulliStat, x: &Vec<bool>) {
        debug_assert!(stat.count > 0);
        stat.count -= 1;
        for (o, &v) in stat.ones.iter_mut().zip(x) {
            *o -= v as u32;
        }
    }

    /// `sum_d log[B(alpha + s_d, beta + m - s_d) / B(alpha, beta)]`.
    fn log_marginal(&self, stat: &BetaBernoulliStat) -> f64 {
        if stat.count == 0 {
            return 0.0;
        }
        let m = stat.count as f64;
        stat.ones
            .iter()
            .map(|&s| {
                let s = s as f64;
                ln_beta(self.alpha + s, self.beta + m - s) - self.log_beta0
            })
            .sum()
    }

    fn log_predictive(&self, stat: &BetaBernoulliStat, x: &Vec<bool>) -> f64 {
        let m = stat.count as f64;
        let denom = (self.alpha + self.beta + m).ln();
        stat.ones
            .iter()
            .zip(x)
            .map(|(&s, &v)| {
                let s = s as f64;
                let num = if v { self.alpha + s } else { self.beta + m - s };
                num.ln() - denom
            })
            .sum()
    }

    fn validate(&self, x: &Vec<bool>) -> Result<()> {
        if x.len() != self.dim {
            return input(format!("observation has dimension {}, expected {}", x.len(), self.dim));
        }
        Ok(())
    }
}
