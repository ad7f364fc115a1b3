use crate::assembly::PatchSystem;
use crate::linalg::{apply_schur, factorize, schur_rhs, DenseMatrix, FactorKind, Factorization, SparseMatrix, TripletBuilder};
use crate::{Error, Result};

/// Per-patch IETI-DP data: factorizations, constraint rows, the
/// energy-minimizing primal basis and the local coarse block.
#[derive(Debug, Clone)]
pub struct PatchIeti {
    pub patch: usize,
    pub system: PatchSystem,
    pub kii: Factorization,
    /// Factorization of `[K_BB K_BI C^T; K_IB K_II 0; C 0 0]`.
    pub augmented: Factorization,
    pub c: SparseMatrix,
    /// Boundary part of the primal basis, `n_B x n_Pi^(k)`.
    pub phi: DenseMatrix,
    /// `S_PiPi^(k) = -mu`.
    pub s_pp: DenseMatrix,
    /// Global primal ids `i(k, j)`.
    pub primal_ids: Vec<usize>,
    /// `g^(k) = f_B - K_BI K_II^{-1} f_I`.
    pub g: Vec<f64>,
}

/// Block matrix of the constrained local problem.
pub fn augmented_matrix(sys: &PatchSystem, c: &SparseMatrix) -> Result<SparseMatrix> {
    let (nb, ni, nc) = (sys.n_b(), sys.n_i(), c.nrows());
    if c.ncols() != nb {
        return Err(Error::ShapeMismatch { expected: nb, got: c.ncols() });
    }
    let k = sys.matrix();
    let n = nb + ni + nc;
    let mut t = TripletBuilder::with_capacity(n, n, k.nnz() + 2 * c.nnz());
    for (i, j, v) in k.triplets() {
        t.push(i, j, v);
    }
    for (i, j, v) in c.triplets() {
        t.push(nb + ni + i, j, v);
        t.push(j, nb + ni + i, v);
    }
    Ok(t.build())
}

impl PatchIeti {
    pub fn new(system: PatchSystem, c: SparseMatrix, primal_ids: Vec<usize>) -> Result<Self> {
        let patch = system.patch;
        let ctx = |e: Error| e.context(&format!("patch {patch}"));
        if c.nrows() != primal_ids.len() {
            return Err(Error::ShapeMismatch { expected: primal_ids.len(), got: c.nrows() });
        }
        let kii = factorize(&system.kii, FactorKind::Spd).map_err(ctx)?;
        let g = schur_rhs(&system, &kii)?;
        let aug = augmented_matrix(&system, &c)?;
        let augmented = factorize(&aug, FactorKind::SymmetricIndefinite).map_err(ctx)?;
        let (nb, ni, nc) = (system.n_b(), system.n_i(), c.nrows());
        let rhs: Vec<Vec<f64>> = (0..nc)
            .map(|j| {
                let mut e = vec![0.0; nb + ni + nc];
                e[nb + ni + j] = 1.0;
                e
            })
            .collect();
        let sols = augmented.solve_many(&rhs);
        let phi_cols: Vec<Vec<f64>> = sols.iter().map(|s| s[..nb].to_vec()).collect();
        let mu_cols: Vec<Vec<f64>> = sols.iter().map(|s| s[nb + ni..].iter().map(|v| -v).collect()).collect();
        let phi = DenseMatrix::from_columns(nb, &phi_cols);
        let s_pp = DenseMatrix::from_columns(nc, &mu_cols);
        Ok(Self { patch, system, kii, augmented, c, phi, s_pp, primal_ids, g })
    }

    pub fn n_b(&self) -> usize {
        self.system.n_b()
    }

    pub fn n_primal(&self) -> usize {
        self.primal_ids.len()
    }

    /// `S_e^(k) w`.
    pub fn apply_schur(&self, w: &[f64]) -> Result<Vec<f64>> {
        apply_schur(&self.system, &self.kii, w)
    }

    /// `Phi^(k)^T f`, the local primal contribution of a functional.
    pub fn primal_part(&self, f: &[f64]) -> Vec<f64> {
        self.phi.matvec_transpose(f)
    }

    /// `f - C^T Phi^T f`.
    pub fn dual_part(&self, f: &[f64], phi_t_f: &[f64]) -> Vec<f64> {
        let mut out = f.to_vec();
        let ct = self.c.matvec_transpose(phi_t_f);
        for (o, v) in out.iter_mut().zip(ct) {
            *o -= v;
        }
        out
    }

    /// `S_DeltaDelta^(k)^{-1} f`: boundary part of the constrained solve with
    /// right-hand side `(f, 0, 0)`.
    pub fn apply_sdd_inv(&self, f: &[f64]) -> Result<Vec<f64>> {
        let nb = self.n_b();
        if f.len() != nb {
            return Err(Error::ShapeMismatch { expected: nb, got: f.len() });
        }
        let mut rhs = vec![0.0; self.augmented.dim()];
        rhs[..nb].copy_from_slice(f);
        let mut x = self.augmented.solve(&rhs);
        x.truncate(nb);
        Ok(x)
    }

    /// `w = Phi^(k) w_Pi^(k) + w_Delta`.
    pub fn embed(&self, w_pi_local: &[f64], w_delta: &[f64]) -> Vec<f64> {
        let mut w = self.phi.matvec(w_pi_local);
        for (a, b) in w.iter_mut().zip(w_delta) {
            *a += b;
        }
        w
    }

    /// Interior values `u_I = K_II^{-1} (f_I - K_IB u_B)`.
    pub fn recover_interior(&self, u_b: &[f64]) -> Vec<f64> {
        if self.system.n_i() == 0 {
            return Vec::new();
        }
        let mut r = self.system.fi.clone();
        self.system.kib.matvec_add(-1.0, u_b, &mut r);
        self.kii.solve(&r)
    }
}
