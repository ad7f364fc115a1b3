use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::dofs::Discretization;
use super::patch::dense_solve;
use crate::{Error, Result};

/// One continuity constraint `u(plus) - u(minus) = 0` between two local dofs
/// `(patch, local dof)` of the same class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpRow {
    pub class: usize,
    pub plus: (usize, usize),
    pub minus: (usize, usize),
}

/// Entry of `B^(k)` and `B_D^(k)` for one patch, in the patch's B-ordering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalJump {
    pub row: usize,
    /// Index of `row` in the patch's row list.
    pub slot: usize,
    /// Position among the patch's B dofs.
    pub b: usize,
    /// Entry of `B` (0 where only `B_D` has one).
    pub sign: f64,
    /// Entry of `B_D`.
    pub scaled: f64,
}

/// Signed jump operator `B` and its scaled variant `B_D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpOperators {
    pub rows: Vec<JumpRow>,
    /// Per patch, its entries sorted by row.
    pub local: Vec<Vec<LocalJump>>,
    /// Per patch, the sorted multiplier ids it touches.
    pub patch_rows: Vec<Vec<usize>>,
    /// Per multiplier, the sorted patches touching it.
    pub row_patches: Vec<Vec<usize>>,
    pub n_b: Vec<usize>,
}

/// Scaling weights `rho` for the `B_D` entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    /// `rho^(k) = alpha^(k)`.
    #[default]
    Coefficient,
    /// `rho = 1`.
    Multiplicity,
}

impl std::str::FromStr for Scaling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coefficient" => Ok(Scaling::Coefficient),
            "multiplicity" => Ok(Scaling::Multiplicity),
            other => Err(Error::Config(format!("unknown scaling '{other}'"))),
        }
    }
}

/// Non-redundant jump operators: for every shared, non-Dirichlet class a
/// spanning tree of its interface couplings (BFS from the first member).
/// Classes listed in `skip` get no rows.
///
/// `rho[k]` is the scaling weight of patch `k`. For a class shared by two
/// members the `B_D` entry at one member is `delta_dagger` of the other,
/// `rho(other) / (rho(a) + rho(b))`. For larger classes the rows of the
/// class in `B_D` are `(B_c W B_c^T)^{-1} B_c W` with `W = diag(1 / rho)`,
/// which gives the same `rho`-weighted average `B_D^T B` as the full set of
/// pairwise `delta_dagger`-scaled constraints.
pub fn build_jump_operators(disc: &Discretization, rho: &[f64], skip: &BTreeSet<usize>) -> Result<JumpOperators> {
    let n = disc.num_patches();
    if rho.len() != n {
        return Err(Error::ShapeMismatch { expected: n, got: rho.len() });
    }
    if rho.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidArgument("scaling weights must be positive".into()));
    }
    let mut rows = Vec::new();
    // (row, member, B entry, B_D entry)
    let mut entries: Vec<(usize, (usize, usize), f64, f64)> = Vec::new();
    for (ci, class) in disc.classes.iter().enumerate() {
        if class.dirichlet || class.members.len() < 2 || skip.contains(&ci) {
            continue;
        }
        let m = class.members.len();
        let mut adj = vec![Vec::new(); m];
        for &(a, b) in &class.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        let mut seen = vec![false; m];
        seen[0] = true;
        let mut queue = VecDeque::from([0usize]);
        let mut tree: Vec<(usize, usize)> = Vec::new();
        while let Some(a) = queue.pop_front() {
            for &b in &adj[a] {
                if seen[b] {
                    continue;
                }
                seen[b] = true;
                queue.push_back(b);
                let (x, y) = (class.members[a], class.members[b]);
                if x.0 == y.0 {
                    return Err(Error::Unsupported(format!("dof class {ci} couples two dofs of patch {}", x.0)));
                }
                tree.push(if x < y { (a, b) } else { (b, a) });
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Topology(format!("dof class {ci} has a member with no interface partner")));
        }
        let first = rows.len();
        for &(a, b) in &tree {
            rows.push(JumpRow { class: ci, plus: class.members[a], minus: class.members[b] });
            entries.push((rows.len() - 1, class.members[a], 1.0, 0.0));
            entries.push((rows.len() - 1, class.members[b], -1.0, 0.0));
        }
        let rho_m: Vec<f64> = class.members.iter().map(|&(k, _)| rho[k]).collect();
        if m == 2 {
            let (a, b) = tree[0];
            let total = rho_m[a] + rho_m[b];
            entries.push((first, class.members[a], 0.0, rho_m[b] / total));
            entries.push((first, class.members[b], 0.0, -rho_m[a] / total));
            continue;
        }
        // B_c W B_c^T and B_c W, dense over the class
        let r = tree.len();
        let mut bw = vec![vec![0.0; m]; r];
        for (i, &(a, b)) in tree.iter().enumerate() {
            bw[i][a] = 1.0 / rho_m[a];
            bw[i][b] = -1.0 / rho_m[b];
        }
        let gram: Vec<Vec<f64>> = (0..r)
            .map(|i| {
                (0..r)
                    .map(|j| {
                        let (a, b) = tree[j];
                        bw[i][a] - bw[i][b]
                    })
                    .collect()
            })
            .collect();
        for col in 0..m {
            let rhs: Vec<f64> = (0..r).map(|i| bw[i][col]).collect();
            let x = dense_solve(gram.clone(), rhs)?;
            for (i, v) in x.into_iter().enumerate() {
                if v != 0.0 {
                    entries.push((first + i, class.members[col], 0.0, v));
                }
            }
        }
    }

    // merge per (patch, row, dof)
    entries.sort_by_key(|x| (x.1 .0, x.0, x.1 .1));
    let mut local: Vec<Vec<LocalJump>> = vec![Vec::new(); n];
    let mut patch_rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut row_patches: Vec<Vec<usize>> = vec![Vec::new(); rows.len()];
    for (r, (k, d), sign, scaled) in entries {
        let layout = &disc.layouts[k];
        let b = layout.position[d]
            .filter(|&p| p < layout.n_b())
            .ok_or_else(|| Error::Topology(format!("multiplier {r} touches dof {d} of patch {k}, which is not an interface dof")))?;
        if patch_rows[k].last() != Some(&r) {
            patch_rows[k].push(r);
            row_patches[r].push(k);
        }
        let slot = patch_rows[k].len() - 1;
        match local[k].last_mut() {
            Some(e) if e.row == r && e.b == b => {
                e.sign += sign;
                e.scaled += scaled;
            }
            _ => local[k].push(LocalJump { row: r, slot, b, sign, scaled }),
        }
    }
    for p in &mut row_patches {
        p.sort_unstable();
    }
    let n_b = disc.layouts.iter().map(|l| l.n_b()).collect();
    Ok(JumpOperators { rows, local, patch_rows, row_patches, n_b })
}

impl JumpOperators {
    pub fn num_multipliers(&self) -> usize {
        self.rows.len()
    }

    /// `B^(k)^T lambda` where `lambda` is indexed by the patch's own row list.
    pub fn apply_transpose_local(&self, k: usize, lambda_local: &[f64], scaled: bool) -> Vec<f64> {
        let mut out = vec![0.0; self.n_b[k]];
        for e in &self.local[k] {
            out[e.b] += if scaled { e.scaled } else { e.sign } * lambda_local[e.slot];
        }
        out
    }

    /// `B^(k) w`, indexed by the patch's own row list.
    pub fn apply_local(&self, k: usize, w: &[f64], scaled: bool) -> Vec<f64> {
        let mut out = vec![0.0; self.patch_rows[k].len()];
        for e in &self.local[k] {
            out[e.slot] += if scaled { e.scaled } else { e.sign } * w[e.b];
        }
        out
    }

    /// `B^T lambda` for a global multiplier vector.
    pub fn apply_transpose(&self, lambda: &[f64], scaled: bool) -> Vec<Vec<f64>> {
        (0..self.local.len())
            .map(|k| {
                let l: Vec<f64> = self.patch_rows[k].iter().map(|&r| lambda[r]).collect();
                self.apply_transpose_local(k, &l, scaled)
            })
            .collect()
    }

    /// `B w = sum_k B^(k) w^(k)`, summed in patch order.
    pub fn apply(&self, w: &[Vec<f64>], scaled: bool) -> Vec<f64> {
        let mut out = vec![0.0; self.rows.len()];
        for (k, wk) in w.iter().enumerate() {
            for (r, v) in self.patch_rows[k].iter().zip(self.apply_local(k, wk, scaled)) {
                out[*r] += v;
            }
        }
        out
    }

    /// Dense `B` (or `B_D`) with columns ordered patch by patch over B dofs.
    pub fn to_dense(&self, scaled: bool) -> Vec<Vec<f64>> {
        let offs: Vec<usize> = self
            .n_b
            .iter()
            .scan(0, |s, &n| {
                let o = *s;
                *s += n;
                Some(o)
            })
            .collect();
        let cols: usize = self.n_b.iter().sum();
        let mut m = vec![vec![0.0; cols]; self.rows.len()];
        for (k, entries) in self.local.iter().enumerate() {
            for e in entries {
                m[e.row][offs[k] + e.b] += if scaled { e.scaled } else { e.sign };
            }
        }
        m
    }
}

/// Scaling weights per patch.
pub fn scaling_weights(scaling: Scaling, alphas: &[f64]) -> Vec<f64> {
    match scaling {
        Scaling::Coefficient => alphas.to_vec(),
        Scaling::Multiplicity => vec![1.0; alphas.len()],
    }
}
