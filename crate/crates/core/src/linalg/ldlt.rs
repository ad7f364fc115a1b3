use super::ordering::{inverse_permutation, minimum_degree};
use super::sparse::SparseMatrix;
use crate::{Error, Result};

const NONE: usize = usize::MAX;

/// Pivots with `|d_k| <= SINGULAR_RTOL * |a_kk|` are reported as singular.
const SINGULAR_RTOL: f64 = 1e-12;

/// Sparse `P A P^T = L D L^T` with unit lower `L` stored by columns.
#[derive(Debug, Clone)]
pub struct LdltFactor {
    n: usize,
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

impl LdltFactor {
    /// Factorizes a symmetric matrix given with both triangles stored.
    ///
    /// With `require_positive` every pivot must be positive; otherwise only
    /// vanishing pivots are rejected.
    pub fn new(a: &SparseMatrix, require_positive: bool) -> Result<Self> {
        let n = a.nrows();
        let perm = minimum_degree(a.symmetric_adjacency());
        let iperm = inverse_permutation(&perm);

        // upper triangle of P A P^T in compressed columns
        let mut counts = vec![0usize; n + 1];
        for (i, j, _) in a.triplets() {
            let (pi, pj) = (iperm[i], iperm[j]);
            if pi <= pj {
                counts[pj + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let ap = counts.clone();
        let mut next = counts;
        let mut ai = vec![0; ap[n]];
        let mut ax = vec![0.0; ap[n]];
        let mut diag = vec![0.0f64; n];
        for (i, j, v) in a.triplets() {
            let (pi, pj) = (iperm[i], iperm[j]);
            if pi <= pj {
                ai[next[pj]] = pi;
                ax[next[pj]] = v;
                next[pj] += 1;
            }
            if pi == pj {
                diag[pi] = v.abs();
            }
        }

        // elimination tree and column counts
        let mut etree = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut flag = vec![NONE; n];
        for j in 0..n {
            flag[j] = j;
            for &i0 in &ai[ap[j]..ap[j + 1]] {
                let mut i = i0;
                while flag[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    flag[i] = j;
                    i = etree[i];
                }
            }
        }

        let mut lp = vec![0usize; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        let mut li = vec![0usize; lp[n]];
        let mut lx = vec![0.0; lp[n]];
        let mut d = vec![0.0; n];
        let mut used = vec![false; n];
        let mut y = vec![0.0; n];
        let mut next_in_col = lp[..n].to_vec();
        let mut y_idx: Vec<usize> = Vec::with_capacity(n);
        let mut elim: Vec<usize> = Vec::with_capacity(n);

        for k in 0..n {
            y_idx.clear();
            for p in ap[k]..ap[k + 1] {
                let b = ai[p];
                if b == k {
                    d[k] = ax[p];
                    continue;
                }
                y[b] = ax[p];
                if used[b] {
                    continue;
                }
                used[b] = true;
                elim.clear();
                elim.push(b);
                let mut c = etree[b];
                while c != NONE && c < k && !used[c] {
                    used[c] = true;
                    elim.push(c);
                    c = etree[c];
                }
                y_idx.extend(elim.iter().rev());
            }
            for &c in y_idx.iter().rev() {
                let end = next_in_col[c];
                let yc = y[c];
                for q in lp[c]..end {
                    y[li[q]] -= lx[q] * yc;
                }
                let l = yc / d[c];
                li[end] = k;
                lx[end] = l;
                d[k] -= yc * l;
                next_in_col[c] += 1;
                y[c] = 0.0;
                used[c] = false;
            }
            let scale = diag[k].max(f64::MIN_POSITIVE);
            if !d[k].is_finite() || d[k].abs() <= SINGULAR_RTOL * scale {
                return Err(Error::Singular { pivot: perm[k] });
            }
            if require_positive && d[k] < 0.0 {
                return Err(Error::NotPositiveDefinite { pivot: perm[k], value: d[k] });
            }
        }
        Ok(Self { n, perm, lp, li, lx, d })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz_factor(&self) -> usize {
        self.lx.len() + self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "ldlt solve: rhs has wrong length");
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for c in 0..self.n {
            let yc = y[c];
            if yc != 0.0 {
                for q in self.lp[c]..self.lp[c + 1] {
                    y[self.li[q]] -= self.lx[q] * yc;
                }
            }
        }
        for (yi, di) in y.iter_mut().zip(&self.d) {
            *yi /= di;
        }
        for c in (0..self.n).rev() {
            let mut s = y[c];
            for q in self.lp[c]..self.lp[c + 1] {
                s -= self.lx[q] * y[self.li[q]];
            }
            y[c] = s;
        }
        let mut x = vec![0.0; self.n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }

    /// Number of negative pivots (the inertia's negative count).
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }
}
