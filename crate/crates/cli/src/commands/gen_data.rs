//! `gen-data`: writes the configured synthetic dataset as CSV.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pgsm::eval::LabeledDataset;

use crate::config::{DataSource, ExperimentConfig};
use crate::data::{binary_dataset, real_dataset};
use crate::error::{CliError, CliResult};

/// Data and label file paths written by [`gen_data`].
#[derive(Clone, Debug, PartialEq)]
pub struct Written {
    pub data: PathBuf,
    pub labels: PathBuf,
    pub rows: usize,
}

fn render<D>(data: &LabeledDataset<D>, cell: impl Fn(&D) -> Vec<String>) -> (String, String) {
    let mut rows = String::new();
    for x in &data.observations {
        rows.push_str(&cell(x).join(","));
        rows.push('\n');
    }
    let mut labels = String::new();
    for l in data.labels.iter().flatten() {
        let _ = writeln!(labels, "{l}");
    }
    (rows, labels)
}

/// Labels go next to the data with a `.labels` suffix unless given.
pub fn gen_data(config: &ExperimentConfig, out: &Path, labels: Option<&Path>) -> CliResult<Written> {
    let (rows, label_text, n) = match config.dataset.source {
        DataSource::Gaussian => {
            let d = real_dataset(config)?;
            let (r, l) = render(&d, |x| x.iter().map(|v| format!("{v:?}")).collect());
            (r, l, d.len())
        }
        DataSource::Bernoulli => {
            let d = binary_dataset(config)?;
            let (r, l) = render(&d, |x| x.iter().map(|&b| u8::from(b).to_string()).collect());
            (r, l, d.len())
        }
        _ => {
            return Err(CliError::config(
                "dataset.source",
                "gen-data needs a generator (gaussian or bernoulli)",
            ));
        }
    };
    let labels = labels.map_or_else(|| out.with_extension("labels"), Path::to_path_buf);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(out, rows).map_err(|e| CliError::io(out, e))?;
    std::fs::write(&labels, label_text).map_err(|e| CliError::io(&labels, e))?;
    Ok(Written {
        data: out.to_path_buf(),
        labels,
        rows: n,
    })
}
