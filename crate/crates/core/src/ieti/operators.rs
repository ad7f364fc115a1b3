use crate::assembly::{Discretization, JumpOperators};
use crate::linalg::{factorize, FactorKind, Factorization, SparseMatrix, TripletBuilder};
use crate::{Error, Result};

use super::local::PatchIeti;

/// Relative size below which the jump `d` of `w = I S~^{-1} I^T g` is
/// rounding noise.
pub const NEGLIGIBLE_JUMP: f64 = 1e-12;

/// Whether `‖d‖ <= NEGLIGIBLE_JUMP ‖w‖` given both squared norms. Then
/// `lambda = 0` solves the dual problem and PCG must not iterate on noise.
pub fn negligible_jump(d2: f64, w2: f64) -> bool {
    d2 <= NEGLIGIBLE_JUMP * NEGLIGIBLE_JUMP * w2
}

/// `S_PiPi = sum_k A^(k) S_PiPi^(k) A^(k)^T`, summed in the order the blocks
/// are given; each local block is symmetrized first.
pub fn assemble_coarse<'a>(n_primal: usize, blocks: impl IntoIterator<Item = (&'a [usize], &'a crate::linalg::DenseMatrix)>) -> SparseMatrix {
    let mut t = TripletBuilder::new(n_primal, n_primal);
    for (ids, s) in blocks {
        for (a, &i) in ids.iter().enumerate() {
            for (b, &j) in ids.iter().enumerate() {
                t.push(i, j, 0.5 * (s[(a, b)] + s[(b, a)]));
            }
        }
    }
    t.build()
}

/// Factorizes the assembled coarse matrix, which must be SPD.
pub fn factorize_coarse(s: &SparseMatrix) -> Result<Factorization> {
    let hint = "the primal set does not fix the floating patches";
    factorize(s, FactorKind::Spd).map_err(|e| match e {
        Error::NotPositiveDefinite { pivot, value } => {
            Error::Config(format!("coarse matrix is not positive definite at primal {pivot} (pivot {value:e}); {hint}"))
        }
        Error::Singular { pivot } => Error::Config(format!("coarse matrix is singular at primal {pivot}; {hint}")),
        other => other,
    })
}

/// Serial realization of the IETI-DP operators over all patches; the
/// reference for the distributed implementation and for dense oracles.
#[derive(Debug, Clone)]
pub struct IetiOperators {
    pub patches: Vec<PatchIeti>,
    pub jumps: JumpOperators,
    pub n_primal: usize,
    pub s_pp: SparseMatrix,
    pub s_pp_fact: Factorization,
}

impl IetiOperators {
    pub fn new(patches: Vec<PatchIeti>, jumps: JumpOperators, n_primal: usize) -> Result<Self> {
        if patches.len() != jumps.local.len() {
            return Err(Error::ShapeMismatch { expected: jumps.local.len(), got: patches.len() });
        }
        let s_pp = assemble_coarse(n_primal, patches.iter().map(|p| (p.primal_ids.as_slice(), &p.s_pp)));
        let s_pp_fact = factorize_coarse(&s_pp)?;
        Ok(Self { patches, jumps, n_primal, s_pp, s_pp_fact })
    }

    pub fn num_multipliers(&self) -> usize {
        self.jumps.num_multipliers()
    }

    /// `w^(k) = Phi^(k) R^(k) w_Pi + w_Delta^(k)`.
    pub fn embed(&self, w_pi: &[f64], w_delta: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if w_pi.len() != self.n_primal {
            return Err(Error::ShapeMismatch { expected: self.n_primal, got: w_pi.len() });
        }
        self.patches
            .iter()
            .zip(w_delta)
            .map(|(p, wd)| {
                if wd.len() != p.n_b() {
                    return Err(Error::ShapeMismatch { expected: p.n_b(), got: wd.len() });
                }
                let local: Vec<f64> = p.primal_ids.iter().map(|&i| w_pi[i]).collect();
                Ok(p.embed(&local, wd))
            })
            .collect()
    }

    /// `(f_Pi, f_Delta)` with `f_Pi = sum_k A^(k) Phi^(k)^T f^(k)` and
    /// `f_Delta^(k) = f^(k) - C^(k)^T Phi^(k)^T f^(k)`.
    pub fn embed_adjoint(&self, f: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let mut f_pi = vec![0.0; self.n_primal];
        let mut f_delta = Vec::with_capacity(f.len());
        for (p, fk) in self.patches.iter().zip(f) {
            if fk.len() != p.n_b() {
                return Err(Error::ShapeMismatch { expected: p.n_b(), got: fk.len() });
            }
            let loc = p.primal_part(fk);
            for (&i, v) in p.primal_ids.iter().zip(&loc) {
                f_pi[i] += v;
            }
            f_delta.push(p.dual_part(fk, &loc));
        }
        Ok((f_pi, f_delta))
    }

    /// `I S~^{-1} I^T f` for per-patch functionals `f`.
    pub fn solve_tilde(&self, f: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let (f_pi, f_delta) = self.embed_adjoint(f)?;
        let w_pi = self.s_pp_fact.solve(&f_pi);
        let w_delta: Vec<Vec<f64>> = self.patches.iter().zip(&f_delta).map(|(p, fd)| p.apply_sdd_inv(fd)).collect::<Result<_>>()?;
        self.embed(&w_pi, &w_delta)
    }

    /// `F lambda = B I S~^{-1} I^T B^T lambda`.
    pub fn apply_f(&self, lambda: &[f64]) -> Result<Vec<f64>> {
        self.check(lambda)?;
        let f = self.jumps.apply_transpose(lambda, false);
        let w = self.solve_tilde(&f)?;
        Ok(self.jumps.apply(&w, false))
    }

    /// `M_sD^{-1} lambda = B_D S_e B_D^T lambda`.
    pub fn apply_msd(&self, lambda: &[f64]) -> Result<Vec<f64>> {
        self.check(lambda)?;
        let v = self.jumps.apply_transpose(lambda, true);
        let s: Vec<Vec<f64>> = self.patches.iter().zip(&v).map(|(p, vk)| p.apply_schur(vk)).collect::<Result<_>>()?;
        Ok(self.jumps.apply(&s, true))
    }

    /// `d = B I S~^{-1} I^T g`, zeroed by [`negligible_jump`].
    pub fn rhs(&self) -> Result<Vec<f64>> {
        let g: Vec<Vec<f64>> = self.patches.iter().map(|p| p.g.clone()).collect();
        let w = self.solve_tilde(&g)?;
        let mut d = self.jumps.apply(&w, false);
        let w2: f64 = w.iter().map(|wk| crate::linalg::dot(wk, wk)).sum();
        if negligible_jump(crate::linalg::dot(&d, &d), w2) {
            d.fill(0.0);
        }
        Ok(d)
    }

    /// Local solutions `[u_B; u_I]` in system order from the multipliers.
    pub fn recover(&self, lambda: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check(lambda)?;
        let bt = self.jumps.apply_transpose(lambda, false);
        let h: Vec<Vec<f64>> = self.patches.iter().zip(&bt).map(|(p, b)| p.g.iter().zip(b).map(|(g, x)| g - x).collect()).collect();
        let w = self.solve_tilde(&h)?;
        Ok(self
            .patches
            .iter()
            .zip(w)
            .map(|(p, ub)| {
                let ui = p.recover_interior(&ub);
                let mut u = ub;
                u.extend(ui);
                u
            })
            .collect())
    }

    fn check(&self, lambda: &[f64]) -> Result<()> {
        if lambda.len() != self.num_multipliers() {
            return Err(Error::ShapeMismatch { expected: self.num_multipliers(), got: lambda.len() });
        }
        Ok(())
    }
}

/// Global coefficient vector from local solutions in system order. Each
/// class takes the value of its first member; also returns the largest
/// disagreement between members.
pub fn gather_global(disc: &Discretization, local: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    let n = disc.num_patches();
    if local.len() != n {
        return Err(Error::ShapeMismatch { expected: n, got: local.len() });
    }
    let value = |k: usize, d: usize| -> Option<f64> { disc.layouts[k].position[d].map(|p| local[k][p]) };
    let mut out = vec![0.0; disc.n_global()];
    let mut mismatch: f64 = 0.0;
    for (g, &c) in disc.global_classes.iter().enumerate() {
        let members = &disc.classes[c].members;
        let (k0, d0) = members[0];
        let v0 = value(k0, d0).ok_or_else(|| Error::Consistency(format!("class {c} has no system dof")))?;
        out[g] = v0;
        for &(k, d) in &members[1..] {
            if let Some(v) = value(k, d) {
                mismatch = mismatch.max((v - v0).abs());
            }
        }
    }
    Ok((out, mismatch))
}
