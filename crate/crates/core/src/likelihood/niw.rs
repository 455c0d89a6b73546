//! Multivariate normal likelihood with a Normal-Inverse-Wishart prior.
//!
//! The statistic keeps the posterior mean and the Cholesky factor of the
//! posterior scale matrix. Each observation costs one rank-one Cholesky update
//! (`O(D^2)`), and the determinant is read off the factor in `O(D)`.

use std::f64::consts::PI;

use smallvec::SmallVec;
use statrs::function::gamma::ln_gamma;

use super::ConjugateModel;
use crate::error::{input, PgsmError, Result};

type Scratch = SmallVec<[f64; 16]>;

/// Prior hyperparameters `(nu, r, u, S)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NiwParams {
    pub nu: f64,
    pub r: f64,
    pub mean: Vec<f64>,
    /// Row-major `D x D` scale matrix.
    pub scale: Vec<f64>,
}

impl NiwParams {
    /// `(nu, r, u, S) = (D + 2, 1, 0, I)`.
    pub fn default_for_dim(dim: usize) -> Self {
        let mut scale = vec![0.0; dim * dim];
        for d in 0..dim {
            scale[d * dim + d] = 1.0;
        }
        Self {
            nu: dim as f64 + 2.0,
            r: 1.0,
            mean: vec![0.0; dim],
            scale,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NormalInverseWishart {
    dim: usize,
    nu0: f64,
    r0: f64,
    mean0: Vec<f64>,
    chol0: Vec<f64>,
    log_det0: f64,
    log_gamma0: f64,
}

/// Posterior summary of a block: count, posterior mean and Cholesky factor.
#[derive(Debug, PartialEq)]
pub struct NiwStat {
    count: usize,
    // [mean (D) | lower Cholesky factor, row-major (D*D)]
    buf: Vec<f64>,
}

// Hand-written so that `clone_from` reuses buffers when particles are copied.
impl Clone for NiwStat {
    fn clone(&self) -> Self {
        Self {
            count: self.count,
            buf: self.buf.clone(),
        }
    }

    fn clone_from(&mut self, source: &Self) {
        self.count = source.count;
        self.buf.clone_from(&source.buf);
    }
}

impl NiwStat {
    pub fn count(&self) -> usize {
        self.count
    }

    fn dim(&self) -> usize {
        // buf.len() = D + D^2
        let n = self.buf.len() as f64;
        ((-1.0 + (1.0 + 4.0 * n).sqrt()) / 2.0).round() as usize
    }

    /// Posterior mean `u_m`.
    pub fn mean(&self) -> &[f64] {
        &self.buf[..self.dim()]
    }

    /// Lower Cholesky factor of `S_m`, row-major.
    pub fn cholesky(&self) -> &[f64] {
        &self.buf[self.dim()..]
    }

    /// `log |S_m|` from the Cholesky diagonal.
    pub fn log_det_scale(&self) -> f64 {
        let d = self.dim();
        let chol = self.cholesky();
        2.0 * (0..d).map(|i| chol[i * d + i].ln()).sum::<f64>()
    }

    /// Reconstructs `S_m = L L^T`.
    pub fn scale_matrix(&self) -> Vec<f64> {
        let d = self.dim();
        let l = self.cholesky();
        let mut s = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let v: f64 = (0..=j).map(|k| l[i * d + k] * l[j * d + k]).sum();
                s[i * d + j] = v;
                s[j * d + i] = v;
            }
        }
        s
    }
}

/// Cholesky factorisation of a symmetric positive-definite row-major matrix.
pub fn cholesky(a: &[f64], d: usize) -> Result<Vec<f64>> {
    if a.len() != d * d {
        return input(format!("expected a {d}x{d} matrix, got {} entries", a.len()));
    }
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut sum = a[i * d + j];
            for k in 0..j {
                sum -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return Err(PgsmError::Numerical(format!(
                        "Cholesky breakdown at pivot {i} (value {sum:e}); matrix is not positive definite"
                    )));
                }
                l[i * d + i] = sum.sqrt();
            } else {
                l[i * d + j] = sum / l[j * d + j];
            }
        }
    }
    Ok(l)
}

/// In-place rank-one update `L L^T + x x^T`. Consumes `x`.
fn chol_update(l: &mut [f64], x: &mut [f64], d: usize) {
    for k in 0..d {
        let lkk = l[k * d + k];
        let r = lkk.hypot(x[k]);
        let c = r / lkk;
        let s = x[k] / lkk;
        l[k * d + k] = r;
        for i in k + 1..d {
            let lik = (l[i * d + k] + s * x[i]) / c;
            l[i * d + k] = lik;
            x[i] = c * x[i] - s * lik;
        }
    }
}

/// In-place rank-one downdate `L L^T - x x^T`. Leaves `l` unspecified on failure.
fn chol_downdate(l: &mut [f64], x: &mut [f64], d: usize) -> bool {
    for k in 0..d {
        let lkk = l[k * d + k];
        let r2 = (lkk - x[k]) * (lkk + x[k]);
        if !(r2 > 0.0) {
            return false;
        }
        let r = r2.sqrt();
        let c = r / lkk;
        let s = x[k] / lkk;
        l[k * d + k] = r;
        for i in k + 1..d {
            let lik = (l[i * d + k] - s * x[i]) / c;
            l[i * d + k] = lik;
            x[i] = c * x[i] - s * lik;
        }
    }
    true
}

/// Squared norm of `L^{-1} x` by forward substitution.
fn solve_norm_sq(l: &[f64], x: &[f64], d: usize) -> f64 {
    let mut z: Scratch = SmallVec::from_elem(0.0, d);
    let mut acc = 0.0;
    for i in 0..d {
        let mut v = x[i];
        for k in 0..i {
            v -= l[i * d + k] * z[k];
        }
        v /= l[i * d + i];
        z[i] = v;
        acc += v * v;
    }
    acc
}

impl NormalInverseWishart {
    pub fn new(params: NiwParams) -> Result<Self> {
        let dim = params.mean.len();
        if dim == 0 {
            return input("NIW model needs at least one dimension");
        }
        if params.scale.len() != dim * dim {
            return input(format!(
                "scale matrix has {} entries, expected {}",
                params.scale.len(),
                dim * dim
            ));
        }
        if !(params.nu > dim as f64 - 1.0) {
            return input(format!("nu must exceed D - 1 = {}, got {}", dim - 1, params.nu));
        }
        if !(params.r > 0.0) {
            return input(format!("r must be positive, got {}", params.r));
        }
        for i in 0..dim {
            for j in 0..i {
                if (params.scale[i * dim + j] - params.scale[j * dim + i]).abs() > 1e-12 {
                    return input("scale matrix is not symmetric");
                }
            }
        }
        let chol0 = cholesky(&params.scale, dim)?;
        let log_det0 = 2.0 * (0..dim).map(|i| chol0[i * dim + i].ln()).sum::<f64>();
        let log_gamma0 = multi_log_gamma_sum(params.nu, dim);
        Ok(Self {
            dim,
            nu0: params.nu,
            r0: params.r,
            mean0: params.mean,
            chol0,
            log_det0,
            log_gamma0,
        })
    }

    pub fn with_defaults(dim: usize) -> Self {
        Self::new(NiwParams::default_for_dim(dim)).expect("default NIW parameters are valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nu0(&self) -> f64 {
        self.nu0
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn mean0(&self) -> &[f64] {
        &self.mean0
    }

    /// Adds `y`, updating mean and Cholesky factor (`O(D^2)`).
    pub fn try_add(&self, stat: &mut NiwStat, y: &[f64]) -> Result<()> {
        if y.len() != self.dim {
            return input(format!("observation has dimension {}, expected {}", y.len(), self.dim));
        }
        let d = self.dim;
        let r_prev = self.r0 + stat.count as f64;
        let r_next = r_prev + 1.0;
        let (mean, chol) = stat.buf.split_at_mut(d);
        let scale = (r_next / r_prev).sqrt();
        let mut x: Scratch = SmallVec::with_capacity(d);
        for k in 0..d {
            mean[k] = (r_prev * mean[k] + y[k]) / r_next;
            x.push(scale * (y[k] - mean[k]));
        }
        chol_update(chol, &mut x, d);
        stat.count += 1;
        Ok(())
    }

    /// Removes `y` with a Cholesky downdate, refactorising from scratch if the
    /// downdate loses positive definiteness.
    pub fn try_remove(&self, stat: &mut NiwStat, y: &[f64]) -> Result<()> {
        if y.len() != self.dim {
            return input(format!("observation has dimension {}, expected {}", y.len(), self.dim));
        }
        if stat.count == 0 {
            return input("cannot remove an observation from an empty statistic");
        }
        if stat.count == 1 {
            *stat = self.empty_stat();
            return Ok(());
        }
        let d = self.dim;
        let r_next = self.r0 + stat.count as f64;
        let r_prev = r_next - 1.0;
        let scale = (r_next / r_prev).sqrt();
        let mut x: Scratch = (0..d).map(|k| scale * (y[k] - stat.buf[k])).collect();
        let saved: Scratch = SmallVec::from_slice(&stat.buf[d..]);
        let (mean, chol) = stat.buf.split_at_mut(d);
        if !chol_downdate(chol, &mut x, d) {
            // S_{m-1} = L L^T - x x^T, assembled densely
            chol.copy_from_slice(&saved);
            let full = NiwStat {
                count: stat.count,
                buf: [&mean[..], &saved[..]].concat(),
            };
            let mut s = full.scale_matrix();
            for i in 0..d {
                for j in 0..d {
                    let xi = scale * (y[i] - mean[i]);
                    let xj = scale * (y[j] - mean[j]);
                    s[i * d + j] -= xi * xj;
                }
            }
            let l = cholesky(&s, d)
                .map_err(|e| PgsmError::Numerical(format!("removing observation from NIW statistic: {e}")))?;
            chol.copy_from_slice(&l);
        }
        for k in 0..d {
            mean[k] = (r_next * mean[k] - y[k]) / r_prev;
        }
        stat.count -= 1;
        Ok(())
    }
}

/// `sum_{d=1}^{D} ln Gamma((nu + 1 - d) / 2)`, the multivariate log gamma
/// function at `nu / 2` without its `pi` factor.
fn multi_log_gamma_sum(nu: f64, dim: usize) -> f64 {
    (1..=dim).map(|d| ln_gamma((nu + 1.0 - d as f64) / 2.0)).sum()
}

impl ConjugateModel for NormalInverseWishart {
    type Datum = Vec<f64>;
    type Stat = NiwStat;

    fn empty_stat(&self) -> NiwStat {
        let mut buf = Vec::with_capacity(self.dim + self.dim * self.dim);
        buf.extend_from_slice(&self.mean0);
        buf.extend_from_slice(&self.chol0);
        NiwStat { count: 0, buf }
    }

    fn add(&self, stat: &mut NiwStat, x: &Vec<f64>) {
        self.try_add(stat, x).expect("NIW add");
    }

    fn remove(&self, stat: &mut NiwStat, x: &Vec<f64>) {
        self.try_remove(stat, x).expect("NIW remove");
    }

    fn log_marginal(&self, stat: &NiwStat) -> f64 {
        if stat.count == 0 {
            return 0.0;
        }
        let d = self.dim as f64;
        let m = stat.count as f64;
        let r_m = self.r0 + m;
        let nu_m = self.nu0 + m;
        -(m * d / 2.0) * PI.ln() + (d / 2.0) * (self.r0.ln() - r_m.ln()) + (self.nu0 / 2.0) * self.log_det0
            - (nu_m / 2.0) * stat.log_det_scale()
            + multi_log_gamma_sum(nu_m, self.dim)
            - self.log_gamma0
    }

    fn log_predictive(&self, stat: &NiwStat, y: &Vec<f64>) -> f64 {
        let d = self.dim;
        let df = d as f64;
        let r = self.r0 + stat.count as f64;
        let r_next = r + 1.0;
        let nu = self.nu0 + stat.count as f64;
        // S' = S + x x^T with x = sqrt(r / r') (y - u)
        let scale = (r / r_next).sqrt();
        let mean = &stat.buf[..d];
        let x: Scratch = (0..d).map(|k| scale * (y[k] - mean[k])).collect();
        let chol = &stat.buf[d..];
        let log_det = stat.log_det_scale();
        let log_det_next = log_det + solve_norm_sq(chol, &x, d).ln_1p();
        -(df / 2.0) * PI.ln() + (df / 2.0) * (r.ln() - r_next.ln()) + (nu / 2.0) * log_det
            - ((nu + 1.0) / 2.0) * log_det_next
            + ln_gamma((nu + 1.0) / 2.0)
            - ln_gamma((nu + 1.0 - df) / 2.0)
    }

    fn validate(&self, x: &Vec<f64>) -> Result<()> {
        if x.len() != self.dim {
            return input(format!("observation has dimension {}, expected {}", x.len(), self.dim));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return input("observation contains a non-finite value");
        }
        Ok(())
    }
}
