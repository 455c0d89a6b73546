//! Dataset ingestion, generation and model construction.

use pgsm::eval::{
    gen_bernoulli_mixture, gen_gaussian_mixture, heldout_mask, read_binary_csv, read_labels, read_real_csv,
    LabeledDataset, Split, Standardization,
};
use pgsm::likelihood::pyclone::read_pyclone_file;
use pgsm::likelihood::{BetaBernoulli, NiwParams, NormalInverseWishart, PyClone, PyCloneDatum};
use pgsm::ConjugateModel;

use crate::config::{DataSource, ExperimentConfig, ModelKind};
use crate::error::{CliError, CliResult};
use crate::seeding;

/// A model together with its train/held-out split.
pub enum Workload {
    Niw(NormalInverseWishart, Split<Vec<f64>>),
    Bernoulli(BetaBernoulli, Split<Vec<bool>>),
    PyClone(PyClone, Split<PyCloneDatum>),
}

/// Code that runs against any conjugate model.
pub trait WorkloadVisitor {
    type Output;
    fn visit<M: ConjugateModel>(self, model: &M, split: &Split<M::Datum>) -> Self::Output;
}

impl Workload {
    pub fn visit<V: WorkloadVisitor>(&self, v: V) -> V::Output {
        match self {
            Workload::Niw(m, s) => v.visit(m, s),
            Workload::Bernoulli(m, s) => v.visit(m, s),
            Workload::PyClone(m, s) => v.visit(m, s),
        }
    }

    pub fn train_len(&self) -> usize {
        match self {
            Workload::Niw(_, s) => s.train.len(),
            Workload::Bernoulli(_, s) => s.train.len(),
            Workload::PyClone(_, s) => s.train.len(),
        }
    }

    pub fn heldout_len(&self) -> usize {
        match self {
            Workload::Niw(_, s) => s.heldout.len(),
            Workload::Bernoulli(_, s) => s.heldout.len(),
            Workload::PyClone(_, s) => s.heldout.len(),
        }
    }

    pub fn has_labels(&self) -> bool {
        match self {
            Workload::Niw(_, s) => s.train_labels.is_some(),
            Workload::Bernoulli(_, s) => s.train_labels.is_some(),
            Workload::PyClone(_, s) => s.train_labels.is_some(),
        }
    }
}

fn labels(config: &ExperimentConfig) -> CliResult<Option<Vec<usize>>> {
    config
        .dataset
        .labels
        .as_deref()
        .map(read_labels)
        .transpose()
        .map_err(Into::into)
}

fn dataset_path(config: &ExperimentConfig) -> CliResult<&std::path::Path> {
    config
        .dataset
        .path
        .as_deref()
        .ok_or_else(|| CliError::config("dataset.path", "required for file datasets"))
}

/// Generated or read real-valued data, before splitting.
pub fn real_dataset(config: &ExperimentConfig) -> CliResult<LabeledDataset<Vec<f64>>> {
    let d = &config.dataset;
    match d.source {
        DataSource::Gaussian => {
            let mut rng = seeding::data_rng(config.seed);
            Ok(gen_gaussian_mixture(
                d.clusters,
                d.points,
                d.dim,
                d.separation,
                &mut rng,
            )?)
        }
        _ => Ok(LabeledDataset::new(
            read_real_csv(dataset_path(config)?)?,
            labels(config)?,
        )?),
    }
}

pub fn binary_dataset(config: &ExperimentConfig) -> CliResult<LabeledDataset<Vec<bool>>> {
    let d = &config.dataset;
    match d.source {
        DataSource::Bernoulli => {
            let mut rng = seeding::data_rng(config.seed);
            Ok(gen_bernoulli_mixture(
                d.clusters,
                d.points,
                d.dim,
                d.uninformative_fraction,
                &mut rng,
            )?)
        }
        _ => Ok(LabeledDataset::new(
            read_binary_csv(dataset_path(config)?)?,
            labels(config)?,
        )?),
    }
}

fn mask(config: &ExperimentConfig, n: usize) -> CliResult<Vec<bool>> {
    Ok(heldout_mask(
        n,
        config.dataset.heldout_fraction,
        config.dataset.heldout_seed,
    )?)
}

fn niw_model(config: &ExperimentConfig, dim: usize) -> CliResult<NormalInverseWishart> {
    let m = &config.model;
    let mut params = NiwParams::default_for_dim(dim);
    if let Some(nu) = m.nu {
        params.nu = nu;
    }
    params.r = m.r;
    if let Some(mean) = &m.mean {
        if mean.len() != dim {
            return Err(CliError::config(
                "model.mean",
                format!("expected {dim} entries, got {}", mean.len()),
            ));
        }
        params.mean = mean.clone();
    }
    if let Some(scale) = &m.scale {
        if scale.len() != dim * dim {
            return Err(CliError::config(
                "model.scale",
                format!("expected {} entries, got {}", dim * dim, scale.len()),
            ));
        }
        params.scale = scale.clone();
    }
    NormalInverseWishart::new(params).map_err(|e| CliError::config("model", e.to_string()))
}

/// Loads or generates the dataset, splits off the held-out part and builds the model.
pub fn prepare(config: &ExperimentConfig) -> CliResult<Workload> {
    match config.model.kind {
        ModelKind::Niw => {
            let data = real_dataset(config)?;
            let mut split = data.split(&mask(config, data.len())?)?;
            if split.train.is_empty() {
                return Err(CliError::config("dataset.heldout_fraction", "no training points left"));
            }
            if config.dataset.standardize {
                let z = Standardization::fit(&split.train)?;
                z.apply(&mut split.train);
                z.apply(&mut split.heldout);
            }
            let model = niw_model(config, split.train[0].len())?;
            Ok(Workload::Niw(model, split))
        }
        ModelKind::Bernoulli => {
            let data = binary_dataset(config)?;
            let split = data.split(&mask(config, data.len())?)?;
            if split.train.is_empty() {
                return Err(CliError::config("dataset.heldout_fraction", "no training points left"));
            }
            let model = BetaBernoulli::new(split.train[0].len(), config.model.beta_a, config.model.beta_b)
                .map_err(|e| CliError::config("model.beta_a", e.to_string()))?;
            Ok(Workload::Bernoulli(model, split))
        }
        ModelKind::Pyclone => {
            let model = PyClone::new(config.model.grid_size, config.model.error_rate)
                .map_err(|e| CliError::config("model.grid_size", e.to_string()))?;
            let records = read_pyclone_file(dataset_path(config)?)?;
            let observations = records
                .iter()
                .map(|r| model.precompute(r))
                .collect::<pgsm::Result<Vec<_>>>()?;
            let data = LabeledDataset::new(observations, labels(config)?)?;
            let split = data.split(&mask(config, data.len())?)?;
            if split.train.is_empty() {
                return Err(CliError::config("dataset.heldout_fraction", "no training points left"));
            }
            Ok(Workload::PyClone(model, split))
        }
    }
}
