use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Vector operations PCG needs besides the scalar product.
pub trait KrylovVector: Clone {
    /// `self += a * x`
    fn axpy(&mut self, a: f64, x: &Self);
    /// `self = x + b * self`
    fn xpby(&mut self, x: &Self, b: f64);
}

impl KrylovVector for Vec<f64> {
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, &xi) in self.iter_mut().zip(x) {
            *s += a * xi;
        }
    }

    fn xpby(&mut self, x: &Self, b: f64) {
        for (s, &xi) in self.iter_mut().zip(x) {
            *s = xi + b * *s;
        }
    }
}

/// Scalar product provider. The first argument is the residual-like operand
/// (distributed in the parallel setting), the second the search-direction-like
/// operand (accumulated).
pub trait ScalarProduct<V> {
    fn dot(&mut self, a: &V, b: &V) -> Result<f64>;
}

impl<V, F: FnMut(&V, &V) -> Result<f64>> ScalarProduct<V> for F {
    fn dot(&mut self, a: &V, b: &V) -> Result<f64> {
        self(a, b)
    }
}

/// The Euclidean scalar product on `Vec<f64>`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean;

impl ScalarProduct<Vec<f64>> for Euclidean {
    fn dot(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Result<f64> {
        Ok(dot(a, b))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgOptions {
    /// Relative reduction of the preconditioned residual norm `sqrt(r^T M r)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PcgOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcgReport {
    pub iterations: usize,
    /// Preconditioned residual norms, starting with the initial one.
    pub residuals: Vec<f64>,
    pub ritz_min: f64,
    pub ritz_max: f64,
    pub condition: f64,
    pub converged: bool,
}

/// Preconditioned conjugate gradients with zero initial guess.
///
/// The CG coefficients are kept to build the Lanczos tridiagonal matrix whose
/// extreme eigenvalues estimate the spectrum of `M F`.
pub fn pcg<V, F, M, D>(mut apply_f: F, mut apply_m: M, rhs: &V, zero: V, opts: &PcgOptions, sp: &mut D) -> Result<(V, PcgReport)>
where
    V: KrylovVector,
    F: FnMut(&V) -> Result<V>,
    M: FnMut(&V) -> Result<V>,
    D: ScalarProduct<V>,
{
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("PCG tolerance must be positive, got {}", opts.tol)));
    }
    let mut x = zero;
    let mut r = rhs.clone();
    let mut z = apply_m(&r)?;
    let mut rho = sp.dot(&r, &z)?;
    if rho < 0.0 {
        return Err(Error::InvalidArgument(format!("preconditioner is not positive: r^T M r = {rho:e}")));
    }
    let r0 = rho.sqrt();
    let mut residuals = vec![r0];
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    let mut converged = r0 == 0.0;
    let mut p = z.clone();
    let mut it = 0;
    while !converged && it < opts.max_iter {
        it += 1;
        let q = apply_f(&p)?;
        let pq = sp.dot(&q, &p)?;
        if !(pq > 0.0) {
            return Err(Error::InvalidArgument(format!("operator is not positive definite: p^T F p = {pq:e}")));
        }
        let alpha = rho / pq;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &q);
        z = apply_m(&r)?;
        let rho_new = sp.dot(&r, &z)?;
        let res = rho_new.max(0.0).sqrt();
        residuals.push(res);
        alphas.push(alpha);
        if res <= opts.tol * r0 {
            converged = true;
            break;
        }
        let beta = rho_new / rho;
        betas.push(beta);
        p.xpby(&z, beta);
        rho = rho_new;
    }
    let (ritz_min, ritz_max) = lanczos_extremes(&alphas, &betas);
    let condition = if ritz_min > 0.0 { (ritz_max / ritz_min).max(1.0) } else { 1.0 };
    let report = PcgReport { iterations: it, residuals, ritz_min, ritz_max, condition, converged };
    if converged {
        Ok((x, report))
    } else {
        Err(Error::NotConverged { report: Box::new(report) })
    }
}

/// Extreme eigenvalues of the Lanczos matrix generated by CG coefficients
/// `alphas` (length m) and `betas` (length ≥ m-1).
pub fn lanczos_extremes(alphas: &[f64], betas: &[f64]) -> (f64, f64) {
    let m = alphas.len();
    if m == 0 {
        return (1.0, 1.0);
    }
    let mut diag = vec![0.0; m];
    let mut off = vec![0.0; m.saturating_sub(1)];
    for j in 0..m {
        diag[j] = 1.0 / alphas[j];
        if j > 0 {
            diag[j] += betas[j - 1] / alphas[j - 1];
        }
        if j + 1 < m {
            off[j] = betas[j].sqrt() / alphas[j];
        }
    }
    tridiagonal_extremes(&diag, &off)
}

/// Smallest and largest eigenvalue of a symmetric tridiagonal matrix by
/// Sturm-sequence bisection.
pub fn tridiagonal_extremes(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let kth = |k: usize| bisect(diag, off, k, lo, hi);
    (kth(0), kth(n - 1))
}

/// Number of eigenvalues strictly below `x`.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0f64;
    for i in 0..diag.len() {
        let b2 = if i > 0 { off[i - 1] * off[i - 1] } else { 0.0 };
        q = diag[i] - x - if i > 0 { b2 / q } else { 0.0 };
        if q == 0.0 {
            q = -f64::EPSILON * (diag[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn bisect(diag: &[f64], off: &[f64], k: usize, mut lo: f64, mut hi: f64) -> f64 {
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= f64::EPSILON * scale || mid == lo || mid == hi {
            break;
        }
        if sturm_count(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
