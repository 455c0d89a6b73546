//! Experiment configuration: a TOML file plus `key=value` overrides.
//!
//! Every field has a default, so an empty file is a valid configuration. The
//! resolved configuration is written back into the run manifest.

use std::path::{Path, PathBuf};
use std::time::Duration;

use pgsm::anchors::ProposalKind;
use pgsm::baselines::{Budget, ChainConfig, GammaPrior, Initialization, KernelSchedule};
use pgsm::{PartitionPrior, PgsmConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub replicates: usize,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub prior: PriorConfig,
    pub sampler: SamplerConfig,
    pub budget: BudgetConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            replicates: 1,
            dataset: DatasetConfig::default(),
            model: ModelConfig::default(),
            prior: PriorConfig::default(),
            sampler: SamplerConfig::default(),
            budget: BudgetConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    Gaussian,
    Bernoulli,
    Csv,
    Pyclone,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub source: DataSource,
    /// Generator: number of components.
    pub clusters: usize,
    /// Generator: number of points, including held-out ones.
    pub points: usize,
    pub dim: usize,
    /// Gaussian generator: grid spacing of the component means in noise units.
    pub separation: f64,
    /// Bernoulli generator: fraction of dimensions with parameter 0.5.
    pub uninformative_fraction: f64,
    /// `csv`: observations (real or 0/1, matching the model); `pyclone`: mutation table.
    pub path: Option<PathBuf>,
    /// Optional ground-truth labels, one per line.
    pub labels: Option<PathBuf>,
    /// Z-score real data using the training part.
    pub standardize: bool,
    pub heldout_fraction: f64,
    pub heldout_seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Gaussian,
            clusters: 15,
            points: 5000,
            dim: 2,
            separation: 8.0,
            uninformative_fraction: 0.25,
            path: None,
            labels: None,
            standardize: true,
            heldout_fraction: pgsm::eval::DEFAULT_HELDOUT_FRACTION,
            heldout_seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Niw,
    Bernoulli,
    Pyclone,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// NIW degrees of freedom; defaults to `dim + 2`.
    pub nu: Option<f64>,
    /// NIW mean precision scaling.
    pub r: f64,
    /// NIW prior mean; defaults to zero.
    pub mean: Option<Vec<f64>>,
    /// NIW scale matrix, row-major; defaults to the identity.
    pub scale: Option<Vec<f64>>,
    pub beta_a: f64,
    pub beta_b: f64,
    pub grid_size: usize,
    pub error_rate: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Niw,
            nu: None,
            r: 1.0,
            mean: None,
            scale: None,
            beta_a: 1.0,
            beta_b: 1.0,
            grid_size: 101,
            error_rate: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorFamily {
    Dp,
    PitmanYor,
    FiniteDirichlet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    pub kind: PriorFamily,
    pub alpha: f64,
    pub discount: f64,
    pub delta: f64,
    pub components: usize,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            kind: PriorFamily::Dp,
            alpha: 1.0,
            discount: 0.0,
            delta: 1.0,
            components: 20,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProposalName {
    Uniform,
    ClusterInformed,
    ThresholdInformed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitName {
    SingleCluster,
    Singletons,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    /// Kernels joined by `+`, e.g. `pgsm+gibbs+alpha`.
    pub schedule: String,
    pub particles: usize,
    pub ess_threshold: f64,
    pub anneal: bool,
    pub anchors: usize,
    pub proposal: ProposalName,
    pub threshold: f64,
    pub moves_per_kernel: usize,
    pub initialization: InitName,
    pub alpha_shape: f64,
    pub alpha_rate: f64,
    pub adaptation_calls: Option<usize>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            schedule: "pgsm+gibbs+alpha".into(),
            particles: 20,
            ess_threshold: 0.5,
            anneal: true,
            anchors: 2,
            proposal: ProposalName::Uniform,
            threshold: pgsm::anchors::DEFAULT_THRESHOLD,
            moves_per_kernel: 1,
            initialization: InitName::SingleCluster,
            alpha_shape: 1.0,
            alpha_rate: 0.1,
            adaptation_calls: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetConfig {
    pub iterations: Option<u64>,
    pub wall_seconds: Option<f64>,
    pub trace_stride: u64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            iterations: Some(1000),
            wall_seconds: None,
            trace_stride: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write wall and CPU seconds into traces. Without them the trace bytes
    /// depend only on the configuration and seed.
    pub emit_timing: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("pgsm-out"),
            emit_timing: true,
        }
    }
}

/// Environment variable overriding `output.dir`.
pub const OUTPUT_DIR_ENV: &str = "PGSM_OUTPUT_DIR";

fn parse_override_value(raw: &str) -> toml::Value {
    // anything that is not a TOML literal is taken as a bare string
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Applies a dotted `key=value` override to a TOML table.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> CliResult<()> {
    let Some((key, raw)) = assignment.split_once('=') else {
        return Err(CliError::config(assignment, "override must have the form key=value"));
    };
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::config(key, "empty key segment"));
    }
    let mut cursor = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cursor
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(CliError::config(key, format!("'{part}' is not a table"))),
        };
    }
    cursor.insert(parts[parts.len() - 1].to_string(), parse_override_value(raw.trim()));
    Ok(())
}

impl ExperimentConfig {
    /// Parses TOML text and applies overrides in order.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> CliResult<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::config("<file>", e.message().to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let value = toml::Value::Table(table);
        let config: Self = serde_path_to_error::deserialize(value).map_err(|e| {
            let key = e.path().to_string();
            let message = e.inner().to_string();
            let message = message.lines().next().unwrap_or_default().to_string();
            CliError::config(if key == "." { "<root>".into() } else { key }, message)
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> CliResult<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serialises")
    }

    /// Output directory after the environment override.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output.dir.clone(),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let d = &self.dataset;
        if self.replicates == 0 {
            return Err(CliError::config("replicates", "must be at least 1"));
        }
        match d.source {
            DataSource::Gaussian | DataSource::Bernoulli => {
                if d.clusters == 0 {
                    return Err(CliError::config("dataset.clusters", "must be at least 1"));
                }
                if d.points < d.clusters {
                    return Err(CliError::config("dataset.points", "must be at least dataset.clusters"));
                }
                if d.dim == 0 {
                    return Err(CliError::config("dataset.dim", "must be at least 1"));
                }
            }
            DataSource::Csv | DataSource::Pyclone => {
                if d.path.is_none() {
                    return Err(CliError::config("dataset.path", "required for file datasets"));
                }
            }
        }
        if !(d.separation >= 0.0 && d.separation.is_finite()) {
            return Err(CliError::config("dataset.separation", "must be finite and nonnegative"));
        }
        if !(0.0..=1.0).contains(&d.uninformative_fraction) {
            return Err(CliError::config("dataset.uninformative_fraction", "must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&d.heldout_fraction) {
            return Err(CliError::config("dataset.heldout_fraction", "must lie in [0, 1)"));
        }
        let compatible = matches!(
            (d.source, self.model.kind),
            (DataSource::Gaussian, ModelKind::Niw)
                | (DataSource::Bernoulli, ModelKind::Bernoulli)
                | (DataSource::Csv, ModelKind::Niw | ModelKind::Bernoulli)
                | (DataSource::Pyclone, ModelKind::Pyclone)
        );
        if !compatible {
            return Err(CliError::config(
                "model.kind",
                format!("model {:?} cannot read a {:?} dataset", self.model.kind, d.source),
            ));
        }
        self.prior_checked()?;
        self.chain_config()?;
        let b = &self.budget;
        if b.iterations.is_none() && b.wall_seconds.is_none() {
            return Err(CliError::config(
                "budget",
                "set budget.iterations or budget.wall_seconds",
            ));
        }
        if let Some(w) = b.wall_seconds {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(CliError::config(
                    "budget.wall_seconds",
                    "must be finite and nonnegative",
                ));
            }
        }
        if b.trace_stride == 0 {
            return Err(CliError::config("budget.trace_stride", "must be at least 1"));
        }
        Ok(())
    }

    fn prior_checked(&self) -> CliResult<PartitionPrior> {
        let p = &self.prior;
        let built = match p.kind {
            PriorFamily::Dp => PartitionPrior::dirichlet_process(p.alpha).map_err(|e| ("prior.alpha", e)),
            PriorFamily::PitmanYor => {
                PartitionPrior::pitman_yor(p.alpha, p.discount).map_err(|e| ("prior.discount", e))
            }
            PriorFamily::FiniteDirichlet => {
                PartitionPrior::finite_dirichlet(p.delta, p.components).map_err(|e| ("prior.delta", e))
            }
        };
        built.map_err(|(key, e)| CliError::config(key, e.to_string()))
    }

    pub fn prior(&self) -> PartitionPrior {
        self.prior_checked().expect("validated configuration")
    }

    pub fn schedule(&self) -> CliResult<KernelSchedule> {
        self.sampler
            .schedule
            .parse()
            .map_err(|e: pgsm::PgsmError| CliError::config("sampler.schedule", e.to_string()))
    }

    pub fn pgsm_config(&self) -> PgsmConfig {
        PgsmConfig {
            particles: self.sampler.particles,
            ess_threshold: self.sampler.ess_threshold,
            anneal: self.sampler.anneal,
            num_anchors: self.sampler.anchors,
            negate_log_weights: false,
        }
    }

    pub fn chain_config(&self) -> CliResult<ChainConfig> {
        let s = &self.sampler;
        let pgsm = self.pgsm_config();
        if let Err(e) = pgsm.validate() {
            let key = if s.particles < 2 {
                "sampler.particles"
            } else if !(0.0..=1.0).contains(&s.ess_threshold) {
                "sampler.ess_threshold"
            } else {
                "sampler.anchors"
            };
            return Err(CliError::config(key, e.to_string()));
        }
        let proposal = match s.proposal {
            ProposalName::Uniform => ProposalKind::Uniform,
            ProposalName::ClusterInformed => ProposalKind::ClusterInformed,
            ProposalName::ThresholdInformed => {
                if !(s.threshold > 0.0 && s.threshold < 1.0) {
                    return Err(CliError::config("sampler.threshold", "must lie in (0, 1)"));
                }
                ProposalKind::ThresholdInformed { threshold: s.threshold }
            }
        };
        if s.moves_per_kernel == 0 {
            return Err(CliError::config("sampler.moves_per_kernel", "must be at least 1"));
        }
        let alpha_prior = GammaPrior::new(s.alpha_shape, s.alpha_rate)
            .map_err(|e| CliError::config("sampler.alpha_shape", e.to_string()))?;
        let schedule = self.schedule()?;
        if schedule.contains(pgsm::baselines::Kernel::AlphaResample) && self.prior.kind != PriorFamily::Dp {
            return Err(CliError::config(
                "sampler.schedule",
                "alpha resampling requires prior.kind = \"dp\"",
            ));
        }
        Ok(ChainConfig {
            schedule,
            pgsm,
            proposal,
            moves_per_kernel: s.moves_per_kernel,
            alpha_prior,
            initialization: match s.initialization {
                InitName::SingleCluster => Initialization::SingleCluster,
                InitName::Singletons => Initialization::Singletons,
            },
            adaptation_calls: s.adaptation_calls,
        })
    }

    pub fn budget(&self) -> Budget {
        Budget {
            max_iterations: self.budget.iterations,
            max_wall: self.budget.wall_seconds.map(Duration::from_secs_f64),
        }
    }
}
