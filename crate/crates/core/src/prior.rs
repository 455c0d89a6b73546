//! Exchangeable partition priors of product form
//! `tau(c) ∝ tau1(|c|) * prod_b tau2(|b|)`.
//!
//! Every function returns a logarithm. `log_tau1` is defined up to one
//! prior-wide additive constant. `log_tau2(1) == 0` for the DP and Pitman-Yor
//! families and `ln delta` for the finite Dirichlet, so that the product is the
//! usual exchangeable partition probability function of each family.

use statrs::function::gamma::ln_gamma;

use crate::error::{input, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PriorKind {
    /// Dirichlet process with concentration `alpha > 0`.
    Dirichlet { alpha: f64 },
    /// Pitman-Yor process with `0 <= discount < 1` and `alpha > -discount`.
    PitmanYor { alpha: f64, discount: f64 },
    /// Symmetric Dirichlet(`delta`) over `k` labelled components.
    FiniteDirichlet { delta: f64, k: usize },
}

/// A validated partition prior.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionPrior(PriorKind);

impl PartitionPrior {
    pub fn dirichlet_process(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return input(format!("DP concentration must be positive, got {alpha}"));
        }
        Ok(Self(PriorKind::Dirichlet { alpha }))
    }

    pub fn pitman_yor(alpha: f64, discount: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&discount) {
            return input(format!("Pitman-Yor discount must lie in [0, 1), got {discount}"));
        }
        if !(alpha > -discount && alpha.is_finite()) {
            return input(format!(
                "Pitman-Yor concentration must exceed -discount ({}), got {alpha}",
                -discount
            ));
        }
        Ok(Self(PriorKind::PitmanYor { alpha, discount }))
    }

    pub fn finite_dirichlet(delta: f64, k: usize) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return input(format!("Dirichlet weight must be positive, got {delta}"));
        }
        if k == 0 {
            return input("finite mixture needs at least one component");
        }
        Ok(Self(PriorKind::FiniteDirichlet { delta, k }))
    }

    pub fn kind(&self) -> PriorKind {
        self.0
    }

    /// DP concentration, if this is a DP prior.
    pub fn concentration(&self) -> Option<f64> {
        match self.0 {
            PriorKind::Dirichlet { alpha } => Some(alpha),
            _ => None,
        }
    }

    /// Same prior family with a new concentration parameter.
    pub fn with_concentration(&self, alpha: f64) -> Result<Self> {
        match self.0 {
            PriorKind::Dirichlet { .. } => Self::dirichlet_process(alpha),
            PriorKind::PitmanYor { discount, .. } => Self::pitman_yor(alpha, discount),
            PriorKind::FiniteDirichlet { .. } => input("finite Dirichlet prior has no concentration parameter"),
        }
    }

    /// `log(tau2(j + 1) / tau2(j))` in constant time. Requires `j >= 1`.
    #[inline]
    pub fn log_tau2_ratio(&self, j: usize) -> f64 {
        debug_assert!(j >= 1);
        let j = j as f64;
        match self.0 {
            PriorKind::Dirichlet { .. } => j.ln(),
            PriorKind::PitmanYor { discount, .. } => (j - discount).ln(),
            PriorKind::FiniteDirichlet { delta, .. } => (j + delta).ln(),
        }
    }

    /// `log tau2(j)` for `j >= 1`.
    pub fn log_tau2(&self, j: usize) -> f64 {
        debug_assert!(j >= 1);
        let j = j as f64;
        match self.0 {
            PriorKind::Dirichlet { .. } => ln_gamma(j),
            PriorKind::PitmanYor { discount, .. } => ln_gamma(j - discount) - ln_gamma(1.0 - discount),
            PriorKind::FiniteDirichlet { delta, .. } => ln_gamma(j + delta) - ln_gamma(delta),
        }
    }

    /// `log tau1(j)` up to a prior-wide constant; `-inf` where the prior puts no mass.
    pub fn log_tau1(&self, j: usize) -> f64 {
        match self.0 {
            PriorKind::Dirichlet { alpha } => j as f64 * alpha.ln(),
            PriorKind::PitmanYor { alpha, discount } => {
                // prod_{i=1}^{j-1} (alpha + i d); the leading factor alpha is the dropped constant
                (1..j).map(|i| (alpha + i as f64 * discount).ln()).sum()
            }
            PriorKind::FiniteDirichlet { k, .. } => {
                if j > k {
                    f64::NEG_INFINITY
                } else {
                    // number of ways to give j blocks distinct component labels
                    ln_gamma((k + 1) as f64) - ln_gamma((k - j + 1) as f64)
                }
            }
        }
    }

    /// `log(tau1(j + 1) / tau1(j))`.
    #[inline]
    pub fn log_tau1_ratio(&self, j: usize) -> f64 {
        match self.0 {
            PriorKind::Dirichlet { alpha } => alpha.ln(),
            PriorKind::PitmanYor { alpha, discount } => {
                if j == 0 {
                    0.0
                } else {
                    (alpha + j as f64 * discount).ln()
                }
            }
            PriorKind::FiniteDirichlet { k, .. } => {
                if j >= k {
                    f64::NEG_INFINITY
                } else {
                    ((k - j) as f64).ln()
                }
            }
        }
    }

    /// Restricted-target `log tau1_bar(j) = log tau1(j + full - restricted)`.
    pub fn log_tau1_bar(&self, j: usize, full_cluster_count: usize, restricted_count: usize) -> f64 {
        debug_assert!(full_cluster_count >= restricted_count);
        self.log_tau1(j + full_cluster_count - restricted_count)
    }

    /// Log weight for opening a new block next to `existing` blocks:
    /// `log[tau1(C + 1) / tau1(C)] + log tau2(1)`.
    #[inline]
    pub fn log_new_block_weight(&self, existing: usize) -> f64 {
        self.log_tau1_ratio(existing) + self.log_tau2(1)
    }

    /// Unnormalised log prior of a clustering given its block sizes.
    pub fn log_prior<I: IntoIterator<Item = usize>>(&self, block_sizes: I) -> f64 {
        let mut count = 0;
        let mut acc = 0.0;
        for size in block_sizes {
            count += 1;
            acc += self.log_tau2(size);
        }
        acc + self.log_tau1(count)
    }
}
