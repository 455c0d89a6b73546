//! Conjugate component models.
//!
//! A model never materialises component parameters: a block of observations is
//! summarised by a sufficient statistic that supports incremental updates, and
//! the parameter-integrated marginal likelihood is read off the statistic.

use std::fmt::Debug;

use crate::error::Result;

pub mod bernoulli;
pub mod niw;
pub mod pyclone;

pub use bernoulli::{BetaBernoulli, BetaBernoulliStat};
pub use niw::{NiwParams, NiwStat, NormalInverseWishart};
pub use pyclone::{Genotype, GenotypePrior, PyClone, PyCloneDatum, PyCloneRecord, PyCloneStat};

/// A component model whose parameters integrate out in closed form.
///
/// Implementations must satisfy, up to floating point rounding:
/// * `log_marginal` depends only on the multiset of added data;
/// * `remove(add(s, x), x)` leaves `log_marginal` unchanged;
/// * `log_predictive(s, x) == log_marginal(add(s, x)) - log_marginal(s)`;
/// * `log_marginal(empty_stat()) == 0`.
pub trait ConjugateModel: Send + Sync {
    type Datum: Clone + Debug + Send + Sync;
    type Stat: Clone + Debug + Send + Sync;

    fn empty_stat(&self) -> Self::Stat;

    /// Adds one observation to a statistic.
    fn add(&self, stat: &mut Self::Stat, x: &Self::Datum);

    /// Removes an observation previously added to the statistic.
    fn remove(&self, stat: &mut Self::Stat, x: &Self::Datum);

    /// Log marginal likelihood of the block summarised by `stat`.
    fn log_marginal(&self, stat: &Self::Stat) -> f64;

    /// Log posterior predictive density of `x` given the block.
    fn log_predictive(&self, stat: &Self::Stat, x: &Self::Datum) -> f64 {
        let mut grown = stat.clone();
        self.add(&mut grown, x);
        self.log_marginal(&grown) - self.log_marginal(stat)
    }

    /// Checks that `x` is a well-formed observation for this model.
    fn validate(&self, x: &Self::Datum) -> Result<()>;

    fn stat_of<'a, I>(&self, data: I) -> Self::Stat
    where
        I: IntoIterator<Item = &'a Self::Datum>,
        Self::Datum: 'a,
    {
        let mut stat = self.empty_stat();
        for x in data {
            self.add(&mut stat, x);
        }
        stat
    }

    /// Validates every observation of a dataset.
    fn validate_all(&self, data: &[Self::Datum]) -> Result<()> {
        data.iter().try_for_each(|x| self.validate(x))
    }
}
