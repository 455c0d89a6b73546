//! Grid-discretised PyClone read-count model.
//!
//! Cellular prevalence is restricted to `M` equally spaced points of `[0, 1]`
//! (both endpoints included) with uniform prior weight. Each mutation is then
//! summarised by its log-likelihood at every grid point, and a block's
//! statistic is the elementwise sum of those vectors.

use std::path::Path;

use statrs::function::factorial::ln_binomial;

use super::ConjugateModel;
use crate::error::{input, PgsmError, Result};
use crate::math::logsumexp;

/// Copy-number genotype, e.g. `AAB`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Genotype {
    pub a: u32,
    pub b: u32,
}

impl Genotype {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return input("empty genotype");
        }
        let mut g = Genotype { a: 0, b: 0 };
        for ch in s.chars() {
            match ch {
                'A' | 'a' => g.a += 1,
                'B' | 'b' => g.b += 1,
                _ => return input(format!("invalid genotype {s:?}: only A and B alleles are allowed")),
            }
        }
        Ok(g)
    }

    /// Total copy number `c(g)`.
    pub fn copies(&self) -> u32 {
        self.a + self.b
    }

    /// Fraction of variant (`B`) alleles, clamped to `[eps, 1 - eps]`.
    pub fn variant_fraction(&self, eps: f64) -> f64 {
        (self.b as f64 / self.copies() as f64).clamp(eps, 1.0 - eps)
    }
}

/// Genotypes of normal, reference-cancer and variant-cancer cells with a prior weight.
#[derive(Clone, Debug, PartialEq)]
pub struct GenotypePrior {
    pub normal: Genotype,
    pub reference: Genotype,
    pub variant: Genotype,
    pub weight: f64,
}

/// One mutation with read counts and its truncated genotype prior.
#[derive(Clone, Debug, PartialEq)]
pub struct PyCloneRecord {
    pub id: String,
    pub b_count: u64,
    pub d_count: u64,
    pub tumour_content: f64,
    pub genotypes: Vec<GenotypePrior>,
}

/// Per-grid-point log-likelihoods `Xi_k(y)` of one mutation.
#[derive(Clone, Debug, PartialEq)]
pub struct PyCloneDatum {
    xi: Vec<f64>,
}

impl PyCloneDatum {
    pub fn from_log_likelihoods(xi: Vec<f64>) -> Result<Self> {
        if xi.iter().any(|v| !v.is_finite()) {
            return input("PyClone log-likelihood grid contains a non-finite entry");
        }
        Ok(Self { xi })
    }

    pub fn log_likelihoods(&self) -> &[f64] {
        &self.xi
    }
}

#[derive(Debug, PartialEq)]
pub struct PyCloneStat {
    count: usize,
    sum: Vec<f64>,
}

// Hand-written so that `clone_from` reuses buffers when particles are copied.
impl Clone for PyCloneStat {
    fn clone(&self) -> Self {
        Self {
            count: self.count,
            sum: self.sum.clone(),
        }
    }

    fn clone_from(&mut self, source: &Self) {
        self.count = source.count;
        self.sum.clone_from(&source.sum);
    }
}

impl PyCloneStat {
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn sum(&self) -> &[f64] {
        &self.sum
    }
}

#[derive(Clone, Debug)]
pub struct PyClone {
    grid_size: usize,
    error_rate: f64,
}

pub const DEFAULT_GRID_SIZE: usize = 101;
pub const DEFAULT_ERROR_RATE: f64 = 1e-3;

/// Probability of sampling a variant read from a mixed cell population.
pub fn variant_read_probability(psi: &GenotypePrior, prevalence: f64, tumour_content: f64, eps: f64) -> f64 {
    let t = tumour_content;
    let phi = prevalence;
    let cn = psi.normal.copies() as f64;
    let cr = psi.reference.copies() as f64;
    let cv = psi.variant.copies() as f64;
    let num = (1.0 - t) * cn * psi.normal.variant_fraction(eps)
        + t * (1.0 - phi) * cr * psi.reference.variant_fraction(eps)
        + t * phi * cv * psi.variant.variant_fraction(eps);
    let den = (1.0 - t) * cn + t * (1.0 - phi) * cr + t * phi * cv;
    num / den
}

fn log_binomial_pmf(k: u64, n: u64, p: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    ln_binomial(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()
}

impl PyClone {
    pub fn new(grid_size: usize, error_rate: f64) -> Result<Self> {
        if grid_size < 2 {
            return input(format!("PyClone grid needs at least 2 points, got {grid_size}"));
        }
        if !(error_rate > 0.0 && error_rate < 0.5) {
            return input(format!("error rate must lie in (0, 0.5), got {error_rate}"));
        }
        Ok(Self { grid_size, error_rate })
    }

    pub fn with_defaults() -> Self {
        Self::new(DEFAULT_GRID_SIZE, DEFAULT_ERROR_RATE).expect("default PyClone parameters are valid")
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    /// Grid point `k / (M - 1)`.
    pub fn grid_point(&self, k: usize) -> f64 {
        k as f64 / (self.grid_size - 1) as f64
    }

    /// `Xi_k = log sum_psi pi_psi Binomial(b | d, xi(psi, x_k, t))` for every grid point.
    pub fn precompute(&self, record: &PyCloneRecord) -> Result<PyCloneDatum> {
        if record.genotypes.is_empty() {
            return input(format!("mutation {}: empty genotype set", record.id));
        }
        if record.b_count > record.d_count {
            return input(format!(
                "mutation {}: b_count {} exceeds d_count {}",
                record.id, record.b_count, record.d_count
            ));
        }
        if !(0.0..=1.0).contains(&record.tumour_content) {
            return input(format!(
                "mutation {}: tumour content {} outside [0, 1]",
                record.id, record.tumour_content
            ));
        }
        let total: f64 = record.genotypes.iter().map(|g| g.weight).sum();
        if record.genotypes.iter().any(|g| !(g.weight >= 0.0)) || !(total > 0.0) || !total.is_finite() {
            return input(format!(
                "mutation {}: genotype weights must be non-negative with a positive sum",
                record.id
            ));
        }
        for g in &record.genotypes {
            if g.normal.copies() == 0 || g.reference.copies() == 0 || g.variant.copies() == 0 {
                return input(format!("mutation {}: genotype with zero copies", record.id));
            }
        }
        let log_pi: Vec<f64> = record.genotypes.iter().map(|g| (g.weight / total).ln()).collect();
        let mut terms = Vec::with_capacity(record.genotypes.len());
        let xi = (0..self.grid_size)
            .map(|k| {
                let x = self.grid_point(k);
                terms.clear();
                terms.extend(record.genotypes.iter().zip(&log_pi).map(|(g, lp)| {
                    let p = variant_read_probability(g, x, record.tumour_content, self.error_rate);
                    lp + log_binomial_pmf(record.b_count, record.d_count, p)
                }));
                logsumexp(&terms)
            })
            .collect();
        PyCloneDatum::from_log_likelihoods(xi)
            .map_err(|_| PgsmError::Numerical(format!("mutation {}: non-finite log-likelihood grid", record.id)))
    }
}

impl ConjugateModel for PyClone {
    type Datum = PyCloneDatum;
    type Stat = PyCloneStat;

    fn empty_stat(&self) -> PyCloneStat {
        PyCloneStat {
            count: 0,
            sum: vec![0.0; self.grid_size],
        }
    }

    fn add(&self, stat: &mut PyCloneStat, x: &PyCloneDatum) {
        stat.count += 1;
        for (s, v) in stat.sum.iter_mut().zip(&x.xi) {
            *s += v;
        }
    }

    fn remove(&self, stat: &mut PyCloneStat, x: &PyCloneDatum) {
        debug_assert!(stat.count > 0);
        stat.count -= 1;
        if stat.count == 0 {
            stat.sum.iter_mut().for_each(|s| *s = 0.0);
            return;
        }
        for (s, v) in stat.sum.iter_mut().zip(&x.xi) {
            *s -= v;
        }
    }

    fn log_marginal(&self, stat: &PyCloneStat) -> f64 {
        if stat.count == 0 {
            return 0.0;
        }
        logsumexp(&stat.sum) - (self.grid_size as f64).ln()
    }

    fn log_predictive(&self, stat: &PyCloneStat, x: &PyCloneDatum) -> f64 {
        let max = stat
            .sum
            .iter()
            .zip(&x.xi)
            .map(|(s, v)| s + v)
            .fold(f64::NEG_INFINITY, f64::max);
        let grown = max
            + stat
                .sum
                .iter()
                .zip(&x.xi)
                .map(|(s, v)| (s + v - max).exp())
                .sum::<f64>()
                .ln()
            - (self.grid_size as f64).ln();
        grown - self.log_marginal(stat)
    }

    fn validate(&self, x: &PyCloneDatum) -> Result<()> {
        if x.xi.len() != self.grid_size {
            return input(format!(
                "PyClone datum has {} grid points, model expects {}",
                x.xi.len(),
                self.grid_size
            ));
        }
        Ok(())
    }
}

/// Reads mutation records from a comma- or tab-delimited file with a header row.
///
/// Columns: `mutation_id, b_count, d_count, tumour_content`, followed by any
/// number of `(g_n, g_r, g_v, weight)` groups.
pub fn read_pyclone_file(path: &Path) -> Result<Vec<PyCloneRecord>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| PgsmError::Input(format!("reading {}: {e}", path.display())))?;
    parse_pyclone(&text)
}

pub fn parse_pyclone(text: &str) -> Result<Vec<PyCloneRecord>> {
    let header = text.lines().next().unwrap_or("");
    let delimiter = if header.contains('\t') { b'\t' } else { b',' };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(|e| PgsmError::Input(format!("line {line}: {e}")))?;
        if rec.len() < 8 || (rec.len() - 4) % 4 != 0 {
            return input(format!(
                "line {line}: expected 4 leading columns and complete (g_n, g_r, g_v, weight) groups, got {} fields",
                rec.len()
            ));
        }
        let num = |i: usize, what: &str| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|_| PgsmError::Input(format!("line {line}: invalid {what} {:?}", &rec[i])))
        };
        let count = |i: usize, what: &str| -> Result<u64> {
            rec[i]
                .parse::<u64>()
                .map_err(|_| PgsmError::Input(format!("line {line}: invalid {what} {:?}", &rec[i])))
        };
        let genotypes = (4..rec.len())
            .step_by(4)
            .map(|i| {
                Ok(GenotypePrior {
                    normal: Genotype::parse(&rec[i])?,
                    reference: Genotype::parse(&rec[i + 1])?,
                    variant: Genotype::parse(&rec[i + 2])?,
                    weight: num(i + 3, "genotype weight")?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        records.push(PyCloneRecord {
            id: rec[0].to_string(),
            b_count: count(1, "b_count")?,
            d_count: count(2, "d_count")?,
            tumour_content: num(3, "tumour_content")?,
            genotypes,
        });
    }
    Ok(records)
}
