use super::ordering::minimum_degree;
use super::sparse::SparseMatrix;
use crate::{Error, Result};

const NONE: usize = usize::MAX;

/// Diagonal entries within this factor of the column maximum are preferred
/// as pivots, which keeps the fill-reducing symmetric ordering intact
/// whenever it is numerically acceptable.
const PIVOT_THRESHOLD: f64 = 0.1;
const SINGULAR_RTOL: f64 = 1e-13;

/// Left-looking sparse `P A Q = L U` with threshold partial pivoting.
#[derive(Debug, Clone)]
pub struct LuFactor {
    n: usize,
    q: Vec<usize>,
    pinv: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    up: Vec<usize>,
    ui: Vec<usize>,
    ux: Vec<f64>,
}

/// Column access to a CSR matrix through its transpose.
struct Csc {
    p: Vec<usize>,
    i: Vec<usize>,
    x: Vec<f64>,
}

impl LuFactor {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::ShapeMismatch { expected: n, got: a.ncols() });
        }
        let t = a.transpose();
        let csc = Csc { p: t.indptr().to_vec(), i: t.indices().to_vec(), x: t.values().to_vec() };
        let q = minimum_degree(a.symmetric_adjacency());

        let mut pinv = vec![NONE; n];
        let mut lp = Vec::with_capacity(n + 1);
        let mut up = Vec::with_capacity(n + 1);
        let cap = 4 * a.nnz() + n;
        let (mut li, mut lx) = (Vec::with_capacity(cap), Vec::with_capacity(cap));
        let (mut ui, mut ux) = (Vec::with_capacity(cap), Vec::with_capacity(cap));
        lp.push(0);
        up.push(0);
        let mut x = vec![0.0; n];
        let mut xi = vec![0usize; n];
        let mut mark = vec![NONE; n];
        let mut stack = Vec::with_capacity(n);
        let mut pstack = Vec::with_capacity(n);

        for k in 0..n {
            let col = q[k];
            // pattern of L \ A(:, col) in topological order at xi[top..n]
            let mut top = n;
            for &r in &csc.i[csc.p[col]..csc.p[col + 1]] {
                if mark[r] == k {
                    continue;
                }
                stack.clear();
                pstack.clear();
                stack.push(r);
                pstack.push(NONE);
                while let Some(&j) = stack.last() {
                    let head = stack.len() - 1;
                    let jnew = pinv[j];
                    if mark[j] != k {
                        mark[j] = k;
                        pstack[head] = if jnew == NONE { 0 } else { lp[jnew] };
                    }
                    let end = if jnew == NONE { 0 } else { lp[jnew + 1] };
                    let mut pushed = false;
                    let mut p = pstack[head];
                    while p < end {
                        let i = li[p];
                        p += 1;
                        if mark[i] != k {
                            pstack[head] = p;
                            stack.push(i);
                            pstack.push(NONE);
                            pushed = true;
                            break;
                        }
                    }
                    if !pushed {
                        stack.pop();
                        pstack.pop();
                        top -= 1;
                        xi[top] = j;
                    }
                }
            }

            let mut colmax = 0.0f64;
            for &j in &xi[top..n] {
                x[j] = 0.0;
            }
            for p in csc.p[col]..csc.p[col + 1] {
                x[csc.i[p]] = csc.x[p];
                colmax = colmax.max(csc.x[p].abs());
            }
            for &j in &xi[top..n] {
                let jn = pinv[j];
                if jn == NONE {
                    continue;
                }
                let xj = x[j];
                for p in lp[jn] + 1..lp[jn + 1] {
                    x[li[p]] -= lx[p] * xj;
                }
            }

            let mut ipiv = NONE;
            let mut amax = -1.0f64;
            for &i in &xi[top..n] {
                if pinv[i] == NONE {
                    let t = x[i].abs();
                    if t > amax {
                        amax = t;
                        ipiv = i;
                    }
                } else {
                    ui.push(pinv[i]);
                    ux.push(x[i]);
                }
            }
            if ipiv == NONE || amax <= SINGULAR_RTOL * colmax.max(f64::MIN_POSITIVE) {
                return Err(Error::Singular { pivot: col });
            }
            if pinv[col] == NONE && x[col].abs() >= amax * PIVOT_THRESHOLD {
                ipiv = col;
            }
            let pivot = x[ipiv];
            ui.push(k);
            ux.push(pivot);
            pinv[ipiv] = k;
            li.push(ipiv);
            lx.push(1.0);
            for &i in &xi[top..n] {
                if pinv[i] == NONE {
                    li.push(i);
                    lx.push(x[i] / pivot);
                }
                x[i] = 0.0;
            }
            lp.push(li.len());
            up.push(ui.len());
        }
        for r in &mut li {
            *r = pinv[*r];
        }
        Ok(Self { n, q, pinv, lp, li, lx, up, ui, ux })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz_factor(&self) -> usize {
        self.lx.len() + self.ux.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "lu solve: rhs has wrong length");
        let mut y = vec![0.0; self.n];
        for (i, &bi) in b.iter().enumerate() {
            y[self.pinv[i]] = bi;
        }
        for j in 0..self.n {
            let yj = y[j];
            if yj != 0.0 {
                for p in self.lp[j] + 1..self.lp[j + 1] {
                    y[self.li[p]] -= self.lx[p] * yj;
                }
            }
        }
        for j in (0..self.n).rev() {
            let dpos = self.up[j + 1] - 1;
            y[j] /= self.ux[dpos];
            let yj = y[j];
            if yj != 0.0 {
                for p in self.up[j]..dpos {
                    y[self.ui[p]] -= self.ux[p] * yj;
                }
            }
        }
        let mut x = vec![0.0; self.n];
        for (k, &c) in self.q.iter().enumerate() {
            x[c] = y[k];
        }
        x
    }
}
