//! Synthetic datasets, CSV ingestion and held-out splits.

use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{input, PgsmError, Result};

pub const DEFAULT_HELDOUT_FRACTION: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset<D> {
    pub observations: Vec<D>,
    pub labels: Option<Vec<usize>>,
}

/// Training and held-out parts of a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Split<D> {
    pub train: Vec<D>,
    pub train_labels: Option<Vec<usize>>,
    pub heldout: Vec<D>,
}

impl<D: Clone> LabeledDataset<D> {
    pub fn new(observations: Vec<D>, labels: Option<Vec<usize>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != observations.len() {
                return input(format!("{} labels for {} observations", l.len(), observations.len()));
            }
        }
        Ok(Self { observations, labels })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn split(&self, mask: &[bool]) -> Result<Split<D>> {
        if mask.len() != self.len() {
            return input("held-out mask length differs from the dataset size");
        }
        let mut split = Split {
            train: Vec::new(),
            train_labels: self.labels.as_ref().map(|_| Vec::new()),
            heldout: Vec::new(),
        };
        for (i, x) in self.observations.iter().enumerate() {
            if mask[i] {
                split.heldout.push(x.clone());
            } else {
                split.train.push(x.clone());
                if let (Some(out), Some(l)) = (&mut split.train_labels, &self.labels) {
                    out.push(l[i]);
                }
            }
        }
        Ok(split)
    }
}

/// A fixed held-out mask selecting `round(fraction * n)` points, determined by `seed`.
pub fn heldout_mask(n: usize, fraction: f64, seed: u64) -> Result<Vec<bool>> {
    if !(0.0..1.0).contains(&fraction) {
        return input(format!("held-out fraction must lie in [0, 1), got {fraction}"));
    }
    let count = (fraction * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = vec![false; n];
    for i in sample_indices(&mut rng, n, count) {
        mask[i] = true;
    }
    Ok(mask)
}

/// `k` isotropic unit-variance Gaussian components in `dim` dimensions whose
/// means sit on a grid with spacing `separation`. Point `i` has label `i % k`.
pub fn gen_gaussian_mixture<R: Rng + ?Sized>(
    k: usize,
    n: usize,
    dim: usize,
    separation: f64,
    rng: &mut R,
) -> Result<LabeledDataset<Vec<f64>>> {
    if k == 0 || n < k || dim == 0 {
        return input(format!("need k >= 1, n >= k and dim >= 1 (k={k}, n={n}, dim={dim})"));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return input(format!("separation must be finite and nonnegative, got {separation}"));
    }
    let side = (1..).find(|s: &usize| s.pow(dim as u32) >= k).expect("grid exists");
    let means: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            let mut rest = c;
            (0..dim)
                .map(|_| {
                    let coord = rest % side;
                    rest /= side;
                    coord as f64 * separation
                })
                .collect()
        })
        .collect();
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut observations = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % k;
        observations.push(means[c].iter().map(|m| m + noise.sample(rng)).collect());
        labels.push(c);
    }
    LabeledDataset::new(observations, Some(labels))
}

/// Binary data from `k` product-Bernoulli components. The first
/// `round(uninformative_fraction * dim)` dimensions have parameter 0.5 in
/// every component; the others draw a parameter per component from U(0, 1).
pub fn gen_bernoulli_mixture<R: Rng + ?Sized>(
    k: usize,
    n: usize,
    dim: usize,
    uninformative_fraction: f64,
    rng: &mut R,
) -> Result<LabeledDataset<Vec<bool>>> {
    if k == 0 || n < k || dim == 0 {
        return input(format!("need k >= 1, n >= k and dim >= 1 (k={k}, n={n}, dim={dim})"));
    }
    if !(0.0..=1.0).contains(&uninformative_fraction) {
        return input(format!(
            "uninformative fraction must lie in [0, 1], got {uninformative_fraction}"
        ));
    }
    let flat = (uninformative_fraction * dim as f64).round() as usize;
    let params: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            (0..dim)
                .map(|d| if d < flat { 0.5 } else { rng.random::<f64>() })
                .collect()
        })
        .collect();
    let mut observations = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % k;
        observations.push(params[c].iter().map(|&p| rng.random::<f64>() < p).collect());
        labels.push(c);
    }
    LabeledDataset::new(observations, Some(labels))
}

/// Per-dimension mean and standard deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardization {
    /// Estimated from `data`; constant dimensions get unit scale.
    pub fn fit(data: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = data.first() else {
            return input("cannot standardise an empty dataset");
        };
        let dim = first.len();
        let n = data.len() as f64;
        let mut mean = vec![0.0; dim];
        for x in data {
            if x.len() != dim {
                return input("rows have different dimensions");
            }
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v / n;
            }
        }
        let mut sd = vec![0.0; dim];
        for x in data {
            for d in 0..dim {
                sd[d] += (x[d] - mean[d]).powi(2) / n;
            }
        }
        for s in &mut sd {
            *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
        }
        Ok(Self { mean, sd })
    }

    pub fn apply(&self, data: &mut [Vec<f64>]) {
        for x in data {
            for d in 0..x.len() {
                x[d] = (x[d] - self.mean[d]) / self.sd[d];
            }
        }
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| PgsmError::Input(format!("cannot read {}: {e}", path.display())))
}

fn parse_rows<T>(path: &Path, parse: impl Fn(&str) -> Option<T>) -> Result<Vec<Vec<T>>> {
    let mut rows = Vec::new();
    for (line, record) in reader(path)?.records().enumerate() {
        let record = record.map_err(|e| PgsmError::Input(format!("{}: {e}", path.display())))?;
        let row = record
            .iter()
            .map(|f| {
                parse(f)
                    .ok_or_else(|| PgsmError::Input(format!("{} row {}: cannot parse '{f}'", path.display(), line + 1)))
            })
            .collect::<Result<Vec<T>>>()?;
        if let Some(first) = rows.first() {
            let first: &Vec<T> = first;
            if first.len() != row.len() {
                return input(format!(
                    "{} row {}: expected {} fields",
                    path.display(),
                    line + 1,
                    first.len()
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return input(format!("{} contains no observations", path.display()));
    }
    Ok(rows)
}

/// Headerless comma-separated real vectors, one observation per row.
pub fn read_real_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    parse_rows(path, |f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
}

/// Headerless comma-separated 0/1 vectors, one observation per row.
pub fn read_binary_csv(path: &Path) -> Result<Vec<Vec<bool>>> {
    parse_rows(path, |f| match f {
        "0" => Some(false),
        "1" => Some(true),
        _ => None,
    })
}

/// One nonnegative integer label per line.
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let rows = parse_rows(path, |f| f.parse::<usize>().ok())?;
    rows.into_iter()
        .map(|r| match r.as_slice() {
            [l] => Ok(*l),
            _ => input(format!("{}: expected one label per line", path.display())),
        })
        .collect()
}
