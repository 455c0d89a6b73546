//! Evaluation tools: exact enumeration oracles, clustering metrics, held-out
//! predictive likelihood, datasets and small statistical tests.

pub mod datasets;
pub mod enumeration;
pub mod metrics;
pub mod predictive;
pub mod stats;

pub use datasets::{
    gen_bernoulli_mixture, gen_gaussian_mixture, heldout_mask, read_binary_csv, read_labels, read_real_csv,
    LabeledDataset, Split, Standardization, DEFAULT_HELDOUT_FRACTION,
};
pub use enumeration::{exact_posterior, exact_restricted_target, restricted_support_size, Enumerated};
pub use metrics::{total_variation, v_measure, v_measure_parts, VMeasure};
pub use predictive::{heldout_predictive_loglik, predictive_log_density, HeldOutPredictive};
pub use stats::{chi_square_test, ks_test, moving_average, KsResult};
