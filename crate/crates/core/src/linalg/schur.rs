use super::Factorization;
use crate::assembly::PatchSystem;
use crate::{Error, Result};

/// `g = f_B - K_BI K_II^{-1} f_I`
pub fn schur_rhs(sys: &PatchSystem, kii: &Factorization) -> Result<Vec<f64>> {
    check(sys, kii)?;
    let mut g = sys.fb.clone();
    if sys.n_i() > 0 {
        let y = kii.solve(&sys.fi);
        sys.kbi.matvec_add(-1.0, &y, &mut g);
    }
    Ok(g)
}

/// `S_e w = K_BB w - K_BI K_II^{-1} K_IB w` without forming `S_e`.
pub fn apply_schur(sys: &PatchSystem, kii: &Factorization, w: &[f64]) -> Result<Vec<f64>> {
    check(sys, kii)?;
    if w.len() != sys.n_b() {
        return Err(Error::ShapeMismatch { expected: sys.n_b(), got: w.len() });
    }
    let mut out = sys.kbb.matvec(w);
    if sys.n_i() > 0 {
        let x = kii.solve(&sys.kib.matvec(w));
        sys.kbi.matvec_add(-1.0, &x, &mut out);
    }
    Ok(out)
}

fn check(sys: &PatchSystem, kii: &Factorization) -> Result<()> {
    if kii.dim() != sys.n_i() {
        return Err(Error::ShapeMismatch { expected: sys.n_i(), got: kii.dim() });
    }
    Ok(())
}
