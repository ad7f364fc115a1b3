#![allow(dead_code)]

use ietidp::assembly::{box_grid, build_topology, BoundaryKind, Discretization, Formulation};
use ietidp::harness::{Manufactured, ProblemKind};
use ietidp::ieti::{setup_serial, IetiOptions, SerialSetup};
use ietidp::linalg::SparseMatrix;
use ietidp::splines::{GeometryMap, TensorBasis};
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub struct Instance {
    pub disc: Discretization,
    pub geometries: Vec<GeometryMap>,
    pub setup: SerialSetup,
    pub opts: IetiOptions,
}

pub fn discretize(counts: &[usize], p: usize, e: usize, form: Formulation) -> (Discretization, Vec<GeometryMap>) {
    let g = box_grid(counts, &vec![1.0; counts.len()]).unwrap();
    let t = build_topology(&g, |_, _, _| BoundaryKind::Dirichlet).unwrap();
    let bases = (0..g.len()).map(|_| TensorBasis::uniform(counts.len(), p, e).unwrap()).collect();
    (Discretization::new(t, bases, form).unwrap(), g)
}

pub fn instance(counts: &[usize], p: usize, e: usize, form: Formulation) -> Instance {
    let (disc, geometries) = discretize(counts, p, e, form);
    let problem = Manufactured::new(ProblemKind::Wave, counts.len()).unwrap();
    let opts = IetiOptions::new(counts.len());
    let setup = setup_serial(&disc, &geometries, &problem, &opts).unwrap();
    Instance { disc, geometries, setup, opts }
}

pub fn dense(m: &SparseMatrix) -> DMatrix<f64> {
    let rows = m.to_dense();
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| rows[i][j])
}

pub fn dense_rows(rows: &[Vec<f64>], ncols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut StdRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Orthonormal basis of the null space of `a` from its SVD.
pub fn null_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    // pad to a square matrix so the SVD returns a full V
    let mut sq = DMatrix::zeros(n.max(a.nrows()), n);
    sq.rows_mut(0, a.nrows()).copy_from(a);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.unwrap();
    let smax = svd.singular_values.max();
    let cols: Vec<DVector<f64>> = (0..n).filter(|&i| svd.singular_values[i] <= 1e-10 * smax.max(1.0)).map(|i| vt.row(i).transpose()).collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

pub fn rank(a: &DMatrix<f64>) -> usize {
    a.ncols() - null_space(a).ncols()
}

/// Dense Schur complement `K_BB - K_BI K_II^{-1} K_IB` of patch `k`.
pub fn dense_schur(sys: &ietidp::assembly::PatchSystem) -> DMatrix<f64> {
    let kbb = dense(&sys.kbb);
    if sys.n_i() == 0 {
        return kbb;
    }
    let kii = dense(&sys.kii);
    let kib = dense(&sys.kib);
    let kbi = dense(&sys.kbi);
    kbb - &kbi * kii.lu().solve(&kib).unwrap()
}

/// Block diagonal matrix.
pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let r: usize = blocks.iter().map(|b| b.nrows()).sum();
    let c: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut m = DMatrix::zeros(r, c);
    let (mut i, mut j) = (0, 0);
    for b in blocks {
        m.view_mut((i, j), (b.nrows(), b.ncols())).copy_from(b);
        i += b.nrows();
        j += b.ncols();
    }
    m
}

pub fn concat(parts: &[Vec<f64>]) -> Vec<f64> {
    parts.iter().flatten().copied().collect()
}

pub fn split(v: &[f64], sizes: &[usize]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(sizes.len());
    let mut o = 0;
    for &n in sizes {
        out.push(v[o..o + n].to_vec());
        o += n;
    }
    out
}

/// Random dG vectors on the 2x1 patch instance against the exact extremes
/// of `a_h(u, u) / ‖u‖²_dG`.
pub struct NormRatios {
    /// Smallest and largest ratio over the samples.
    pub sampled: (f64, f64),
    /// Extreme generalized eigenvalues of the pencil (a_h, dG norm).
    pub exact: (f64, f64),
}

/// Dirichlet values vanish; every other local dof, extras included, is
/// drawn uniformly from [-1, 1].
pub fn norm_ratios(p: usize, e: usize, samples: usize, seed: u64) -> NormRatios {
    use ietidp::assembly::{assemble_all, dg_energy, dg_norm_squared, AssemblyOptions, Formulation};
    let (disc, g) = discretize(&[2, 1], p, e, Formulation::Dg);
    let problem = Manufactured::new(ProblemKind::Homogeneous, 2).unwrap();
    let asm = assemble_all(&disc, &g, &problem, &AssemblyOptions::default()).unwrap();
    let mut r = rng(seed);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..samples {
        let u: Vec<Vec<f64>> =
            disc.layouts.iter().map(|l| (0..l.n_local()).map(|d| if l.dirichlet[d] { 0.0 } else { r.random_range(-1.0..1.0) }).collect()).collect();
        let ratio = dg_energy(&asm, &u) / dg_norm_squared(&asm, &u);
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    let (mut a, mut d) = (Vec::new(), Vec::new());
    for (k, pa) in asm.iter().enumerate() {
        let l = &disc.layouts[k];
        let keep: Vec<usize> = (0..l.n_local()).filter(|&i| !l.dirichlet[i]).collect();
        a.push(dense(&pa.full.submatrix(&keep, &keep)));
        d.push(dense(&pa.stiffness.add(&pa.penalty).unwrap().submatrix(&keep, &keep)));
    }
    let l = block_diag(&d).cholesky().expect("dG norm is definite").l();
    let li = l.try_inverse().unwrap();
    let ev = (&li * block_diag(&a) * li.transpose()).symmetric_eigenvalues();
    NormRatios { sampled: (lo, hi), exact: (ev.min(), ev.max()) }
}
