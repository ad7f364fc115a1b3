use serde::{Deserialize, Serialize};

use super::dofs::{Discretization, Formulation};
use super::topology::{BoundaryKind, SideRole};
use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::splines::{for_each_element, gauss_on, GeometryMap, MapEval, PatchMesh, Side, TensorBasis};
use crate::{Error, Result};

/// Data of a second-order elliptic model problem `-div(alpha grad u) = f`.
pub trait Problem: Sync {
    fn rhs(&self, x: &[f64; 3]) -> f64;
    fn dirichlet(&self, x: &[f64; 3]) -> f64;
    /// Neumann flux `alpha du/dn` on patch `patch` with outward unit normal `n`.
    fn neumann(&self, _patch: usize, _x: &[f64; 3], _n: &[f64; 3]) -> f64 {
        0.0
    }
    fn alpha(&self, _patch: usize) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct AssemblyOptions {
    /// SIP penalty; `None` selects `4 (p + 1)^2`.
    pub delta: Option<f64>,
    /// Gauss points per direction and element; `None` selects `p + 1`.
    pub quadrature: Option<usize>,
}

impl AssemblyOptions {
    pub fn delta_for(&self, disc: &Discretization) -> f64 {
        self.delta.unwrap_or_else(|| disc.default_delta())
    }

    fn points(&self, disc: &Discretization) -> Result<usize> {
        match self.quadrature {
            Some(0) => Err(Error::InvalidArgument("quadrature order must be at least 1".into())),
            Some(q) => Ok(q),
            None => Ok(disc.degree() + 1),
        }
    }
}

/// Condensed patch system ordered `[B, I]`, Dirichlet dofs eliminated.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSystem {
    pub patch: usize,
    pub kbb: SparseMatrix,
    pub kbi: SparseMatrix,
    pub kib: SparseMatrix,
    pub kii: SparseMatrix,
    pub fb: Vec<f64>,
    pub fi: Vec<f64>,
    pub alpha: f64,
    pub h: f64,
    pub diameter: f64,
}

impl PatchSystem {
    pub fn n_b(&self) -> usize {
        self.fb.len()
    }

    pub fn n_i(&self) -> usize {
        self.fi.len()
    }

    /// Splits a matrix and load in system order into the block form.
    pub fn from_blocks(patch: usize, k: &SparseMatrix, f: &[f64], n_b: usize, alpha: f64, h: f64, diameter: f64) -> Self {
        let n = k.nrows();
        let b: Vec<usize> = (0..n_b).collect();
        let i: Vec<usize> = (n_b..n).collect();
        Self {
            patch,
            kbb: k.submatrix(&b, &b),
            kbi: k.submatrix(&b, &i),
            kib: k.submatrix(&i, &b),
            kii: k.submatrix(&i, &i),
            fb: f[..n_b].to_vec(),
            fi: f[n_b..].to_vec(),
            alpha,
            h,
            diameter,
        }
    }

    /// The full matrix `[[K_BB, K_BI], [K_IB, K_II]]`.
    pub fn matrix(&self) -> SparseMatrix {
        let nb = self.n_b();
        let mut t = TripletBuilder::new(nb + self.n_i(), nb + self.n_i());
        for (i, j, v) in self.kbb.triplets() {
            t.push(i, j, v);
        }
        for (i, j, v) in self.kbi.triplets() {
            t.push(i, nb + j, v);
        }
        for (i, j, v) in self.kib.triplets() {
            t.push(nb + i, j, v);
        }
        for (i, j, v) in self.kii.triplets() {
            t.push(nb + i, nb + j, v);
        }
        t.build()
    }

    pub fn rhs(&self) -> Vec<f64> {
        self.fb.iter().chain(&self.fi).copied().collect()
    }
}

/// What a patch sends to a neighbour across an interface in the dG setting:
/// its mesh size, its coefficient and the Dirichlet values of the mirrored
/// trace dofs (in the receiver's extra-block order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborTrace {
    pub interface: usize,
    pub from: usize,
    pub h: f64,
    pub alpha: f64,
    pub lifting: Vec<f64>,
}

impl NeighborTrace {
    /// Built by patch `from` for the extra block patch `to` holds on `interface`.
    pub fn new(disc: &Discretization, from: usize, to: usize, interface: usize, own_lifting: &[f64], h: f64, alpha: f64) -> Result<Self> {
        let blk = disc.layouts[to]
            .extras
            .iter()
            .find(|b| b.interface == interface && b.neighbor == from)
            .ok_or_else(|| Error::Topology(format!("patch {to} has no mirror of patch {from} on interface {interface}")))?;
        Ok(Self { interface, from, h, alpha, lifting: blk.mirrored.iter().map(|&m| own_lifting[m]).collect() })
    }
}

/// Everything a patch keeps after assembly.
#[derive(Debug, Clone)]
pub struct PatchAssembly {
    pub system: PatchSystem,
    /// Local matrix over all local dofs (own and extra) before elimination.
    pub full: SparseMatrix,
    /// `alpha (grad u, grad v)` over own dofs, padded to all local dofs.
    pub stiffness: SparseMatrix,
    /// Interface penalty part of the local dG form (zero for cG).
    pub penalty: SparseMatrix,
    pub load: Vec<f64>,
    pub lifting: Vec<f64>,
    pub mesh: PatchMesh,
}

fn side_point(side: Side, dim: usize, t: &[f64]) -> Vec<f64> {
    let mut xi = vec![0.0; dim];
    xi[side.dir] = side.coordinate();
    for (i, d) in side.tangential(dim).into_iter().enumerate() {
        xi[d] = t[i];
    }
    xi
}

/// Tensor Gauss rule on one element given by lower/upper corners.
pub(crate) fn element_rule(lo: &[f64], hi: &[f64], n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let rules: Vec<(Vec<f64>, Vec<f64>)> = lo.iter().zip(hi).map(|(&a, &b)| gauss_on(n, a, b)).collect();
    let dim = lo.len();
    let total = n.pow(dim as u32);
    let mut pts = Vec::with_capacity(total);
    let mut wts = Vec::with_capacity(total);
    for q in 0..total {
        let mut rest = q;
        let mut xi = vec![0.0; dim];
        let mut w = 1.0;
        for d in 0..dim {
            let i = rest % n;
            rest /= n;
            xi[d] = rules[d].0[i];
            w *= rules[d].1[i];
        }
        pts.push(xi);
        wts.push(w);
    }
    (pts, wts)
}

/// Calls `f(xi, weight)` for every Gauss point of the side, with the weight
/// in parameter space.
pub(crate) fn for_each_side_point(basis: &TensorBasis, side: Side, n: usize, mut f: impl FnMut(&[f64], f64) -> Result<()>) -> Result<()> {
    let dim = basis.dim();
    let tang = side.tangential(dim);
    let bps: Vec<Vec<f64>> = tang.iter().map(|&d| basis.knots(d).breakpoints()).collect();
    for_each_element(&bps, |lo, hi| {
        let (pts, wts) = element_rule(lo, hi, n);
        for (t, w) in pts.iter().zip(&wts) {
            f(&side_point(side, dim, t), *w)?;
        }
        Ok(())
    })
}

/// Solves `A x = b` for a small dense matrix with partial pivoting.
pub(crate) fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).expect("non-empty");
        if a[p][c].abs() < 1e-300 {
            return Err(Error::Singular { pivot: c });
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let m = a[r][c] / a[c][c];
            if m != 0.0 {
                for k in c..n {
                    a[r][k] -= m * a[c][k];
                }
                b[r] -= m * b[c];
            }
        }
    }
    for c in (0..n).rev() {
        let s: f64 = (c + 1..n).map(|k| a[c][k] * b[k]).sum();
        b[c] = (b[c] - s) / a[c][c];
    }
    Ok(b)
}

/// Coefficients of the own Dirichlet dofs of patch `k` by interpolating the
/// Dirichlet data at the Greville points of each Dirichlet side; zero
/// elsewhere. Length = number of own basis functions.
pub fn dirichlet_lifting(disc: &Discretization, k: usize, geometry: &GeometryMap, problem: &dyn Problem) -> Result<Vec<f64>> {
    let dim = disc.dim();
    let basis = &disc.bases[k];
    let mut out = vec![0.0; basis.size()];
    for side in Side::all(dim) {
        if disc.topology.role(k, side) != SideRole::Boundary(BoundaryKind::Dirichlet) {
            continue;
        }
        let tang = side.tangential(dim);
        let kvs: Vec<_> = tang.iter().map(|&d| basis.knots(d)).collect();
        let grev: Vec<Vec<f64>> = kvs.iter().map(|k| k.greville()).collect();
        let sizes: Vec<usize> = kvs.iter().map(|k| k.num_basis()).collect();
        let total: usize = sizes.iter().product();
        // values at tensor Greville points, first tangential axis fastest
        let mut vals = Vec::with_capacity(total);
        for a in 0..total {
            let t: Vec<f64> = (0..tang.len()).map(|i| grev[i][(a / sizes[..i].iter().product::<usize>()) % sizes[i]]).collect();
            let x = geometry.point(&side_point(side, dim, &t))?;
            vals.push(problem.dirichlet(&x));
        }
        // collocation matrices per tangential axis, applied as a Kronecker solve
        for (i, kv) in kvs.iter().enumerate() {
            let m = sizes[i];
            let mut a = vec![vec![0.0; m]; m];
            for (r, &g) in grev[i].iter().enumerate() {
                let (first, v) = kv.eval_basis(g)?;
                for (j, &vj) in v.iter().enumerate() {
                    a[r][first + j] = vj;
                }
            }
            let stride: usize = sizes[..i].iter().product();
            for start in 0..total {
                if !(start / stride).is_multiple_of(m) {
                    continue;
                }
                let line: Vec<f64> = (0..m).map(|j| vals[start + j * stride]).collect();
                let sol = dense_solve(a.clone(), line)?;
                for j in 0..m {
                    vals[start + j * stride] = sol[j];
                }
            }
        }
        for (a, d) in basis.side_dofs(side).into_iter().enumerate() {
            out[d] = vals[a];
        }
    }
    Ok(out)
}

fn dense_add(t: &mut TripletBuilder, idx: &[usize], m: &[f64]) {
    let n = idx.len();
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            let v = m[a * n + b];
            if v != 0.0 {
                t.push(i, j, v);
            }
        }
    }
}

/// Assembles the local system of patch `k`.
///
/// `own_lifting` comes from [`dirichlet_lifting`]; `traces` must hold one
/// entry per extra block (dG), as sent by the neighbours.
pub fn assemble_patch(
    disc: &Discretization,
    k: usize,
    geometry: &GeometryMap,
    problem: &dyn Problem,
    own_lifting: &[f64],
    traces: &[NeighborTrace],
    opts: &AssemblyOptions,
) -> Result<PatchAssembly> {
    let dim = disc.dim();
    let basis = &disc.bases[k];
    let layout = &disc.layouts[k];
    let nl = layout.n_local();
    let nq = opts.points(disc)?;
    let alpha = problem.alpha(k);
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("diffusion coefficient of patch {k} must be positive")));
    }
    let mesh = PatchMesh::new(geometry, basis)?;
    let mut stiff = TripletBuilder::new(nl, nl);
    let mut load = vec![0.0; nl];

    // volume terms
    let mut sign = 0.0f64;
    for_each_element(&mesh.breakpoints, |lo, hi| {
        let (pts, wts) = element_rule(lo, hi, nq);
        let mut local: Vec<f64> = Vec::new();
        let mut idx: Vec<usize> = Vec::new();
        for (xi, &wq) in pts.iter().zip(&wts) {
            let m = geometry.eval(xi)?;
            if sign == 0.0 {
                sign = m.det.signum();
            } else if m.det.signum() != sign {
                return Err(Error::SingularGeometry { det: m.det, point: xi.clone() });
            }
            let e = basis.eval(xi)?;
            if idx.is_empty() {
                idx = e.indices.clone();
                local = vec![0.0; idx.len() * idx.len()];
            }
            let inv_t = m.inverse_transpose(dim);
            let grads: Vec<[f64; 3]> = e.grads.iter().map(|g| MapEval::push_gradient(&inv_t, g, dim)).collect();
            let w = wq * m.det.abs();
            let n = idx.len();
            for a in 0..n {
                for b in a..n {
                    let v = alpha * w * (0..dim).map(|c| grads[a][c] * grads[b][c]).sum::<f64>();
                    local[a * n + b] += v;
                    if b != a {
                        local[b * n + a] += v;
                    }
                }
            }
            let fx = problem.rhs(&m.x) * w;
            for (a, &i) in idx.iter().enumerate() {
                load[i] += fx * e.values[a];
            }
        }
        dense_add(&mut stiff, &idx, &local);
        Ok(())
    })?;

    // Neumann sides
    for side in Side::all(dim) {
        if disc.topology.role(k, side) != SideRole::Boundary(BoundaryKind::Neumann) {
            continue;
        }
        for_each_side_point(basis, side, nq, |xi, wq| {
            let m = geometry.eval(xi)?;
            let (n, ds) = m.side_normal(side, dim);
            let g = problem.neumann(k, &m.x, &n) * wq * ds;
            let e = basis.eval(xi)?;
            for (a, &i) in e.indices.iter().enumerate() {
                load[i] += g * e.values[a];
            }
            Ok(())
        })?;
    }

    let stiffness = stiff.build();
    let mut consistency = TripletBuilder::new(nl, nl);
    let mut penalty = TripletBuilder::new(nl, nl);
    let mut lifting = vec![0.0; nl];
    lifting[..layout.n_own].copy_from_slice(own_lifting);

    // SIP interface terms
    if disc.formulation == Formulation::Dg {
        let delta = opts.delta_for(disc);
        if !(delta > 0.0) {
            return Err(Error::InvalidArgument("penalty parameter must be positive".into()));
        }
        for blk in &layout.extras {
            let tr = traces
                .iter()
                .find(|t| t.interface == blk.interface && t.from == blk.neighbor)
                .ok_or_else(|| Error::Topology(format!("patch {k}: missing trace from patch {} on interface {}", blk.neighbor, blk.interface)))?;
            if tr.lifting.len() != blk.len() {
                return Err(Error::ShapeMismatch { expected: blk.len(), got: tr.lifting.len() });
            }
            for (a, &v) in tr.lifting.iter().enumerate() {
                if layout.dirichlet[blk.offset + a] {
                    lifting[blk.offset + a] = v;
                }
            }
            let hkl = 2.0 * mesh.h * tr.h / (mesh.h + tr.h);
            let pen = delta * alpha / hkl;
            // own function index -> extra positions using it as trace shape
            let mut extra_of = std::collections::HashMap::new();
            for (a, &s) in blk.own_side.iter().enumerate() {
                extra_of.insert(s, blk.offset + a);
            }
            for_each_side_point(basis, blk.side, nq, |xi, wq| {
                let m = geometry.eval(xi)?;
                let (n, ds) = m.side_normal(blk.side, dim);
                let inv_t = m.inverse_transpose(dim);
                let e = basis.eval(xi)?;
                let w = wq * ds;
                // jump coefficient c = v^(l) - v^(k) and flux g = dv^(k)/dn per local dof
                let mut dofs: Vec<usize> = Vec::with_capacity(2 * e.indices.len());
                let mut c: Vec<f64> = Vec::with_capacity(2 * e.indices.len());
                let mut g: Vec<f64> = Vec::with_capacity(2 * e.indices.len());
                for (a, &i) in e.indices.iter().enumerate() {
                    let gr = MapEval::push_gradient(&inv_t, &e.grads[a], dim);
                    dofs.push(i);
                    c.push(-e.values[a]);
                    g.push((0..dim).map(|d| gr[d] * n[d]).sum());
                    if let Some(&x) = extra_of.get(&i) {
                        dofs.push(x);
                        c.push(e.values[a]);
                        g.push(0.0);
                    }
                }
                for r in 0..dofs.len() {
                    for s in 0..dofs.len() {
                        let sv = 0.5 * alpha * w * (g[r] * c[s] + c[r] * g[s]);
                        let pv = pen * w * c[r] * c[s];
                        if sv != 0.0 {
                            consistency.push(dofs[r], dofs[s], sv);
                        }
                        if pv != 0.0 {
                            penalty.push(dofs[r], dofs[s], pv);
                        }
                    }
                }
                Ok(())
            })?;
        }
    } else if !traces.is_empty() {
        return Err(Error::InvalidArgument("neighbour traces are only used by the dG formulation".into()));
    }

    let penalty = penalty.build();
    let full = stiffness.add(&consistency.build())?.add(&penalty)?;

    // Dirichlet elimination
    let sys = layout.system_dofs();
    let k_sys = full.submatrix(&sys, &sys);
    let kg = full.matvec(&lifting);
    let f_sys: Vec<f64> = sys.iter().map(|&d| load[d] - kg[d]).collect();
    let system = PatchSystem::from_blocks(k, &k_sys, &f_sys, layout.n_b(), alpha, mesh.h, mesh.diameter);
    Ok(PatchAssembly { system, full, stiffness, penalty, load, lifting, mesh })
}

/// Serial convenience: lifts, exchanges traces and assembles every patch.
pub fn assemble_all(disc: &Discretization, geometries: &[GeometryMap], problem: &dyn Problem, opts: &AssemblyOptions) -> Result<Vec<PatchAssembly>> {
    let n = disc.num_patches();
    if geometries.len() != n {
        return Err(Error::ShapeMismatch { expected: n, got: geometries.len() });
    }
    let lifts: Vec<Vec<f64>> = (0..n).map(|k| dirichlet_lifting(disc, k, &geometries[k], problem)).collect::<Result<_>>()?;
    let meshes: Vec<PatchMesh> = (0..n).map(|k| PatchMesh::new(&geometries[k], &disc.bases[k])).collect::<Result<_>>()?;
    (0..n)
        .map(|k| {
            let traces: Vec<NeighborTrace> = disc.layouts[k]
                .extras
                .iter()
                .map(|b| NeighborTrace::new(disc, b.neighbor, k, b.interface, &lifts[b.neighbor], meshes[b.neighbor].h, problem.alpha(b.neighbor)))
                .collect::<Result<_>>()?;
            assemble_patch(disc, k, &geometries[k], problem, &lifts[k], &traces, opts)
        })
        .collect()
}

/// Monolithic system of the coupled space, assembled by scattering the
/// condensed patch systems through the global numbering.
pub fn assemble_global(disc: &Discretization, systems: &[&PatchSystem]) -> Result<(SparseMatrix, Vec<f64>)> {
    let n = disc.n_global();
    let mut t = TripletBuilder::new(n, n);
    let mut f = vec![0.0; n];
    for (k, sys) in systems.iter().enumerate() {
        let map = disc.system_to_global(k);
        let m = sys.matrix();
        if m.nrows() != map.len() {
            return Err(Error::ShapeMismatch { expected: map.len(), got: m.nrows() });
        }
        for (i, j, v) in m.triplets() {
            t.push(map[i], map[j], v);
        }
        for (i, v) in sys.rhs().into_iter().enumerate() {
            f[map[i]] += v;
        }
    }
    Ok((t.build(), f))
}

/// Local extended coefficient vectors (own plus extras) of a coupled-space
/// vector, with Dirichlet values taken from the liftings.
pub fn local_vectors(disc: &Discretization, global: &[f64], liftings: &[&[f64]]) -> Vec<Vec<f64>> {
    (0..disc.num_patches())
        .map(|k| {
            (0..disc.layouts[k].n_local())
                .map(|d| match disc.global_index(k, d) {
                    Some(g) => global[g],
                    None => liftings[k][d],
                })
                .collect()
        })
        .collect()
}

/// `a_h(u, u)` from local extended vectors.
pub fn dg_energy(assemblies: &[PatchAssembly], u: &[Vec<f64>]) -> f64 {
    assemblies.iter().zip(u).map(|(a, v)| quad_form(&a.full, v)).sum()
}

/// `‖u‖²_dG = Σ_k α‖∇u‖² + penalty jumps` from local extended vectors.
pub fn dg_norm_squared(assemblies: &[PatchAssembly], u: &[Vec<f64>]) -> f64 {
    assemblies.iter().zip(u).map(|(a, v)| quad_form(&a.stiffness, v) + quad_form(&a.penalty, v)).sum()
}

pub(crate) fn quad_form(m: &SparseMatrix, v: &[f64]) -> f64 {
    m.matvec(v).iter().zip(v).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::topology::{box_grid, build_topology};
    use crate::linalg::{factorize, FactorKind};

    struct Poly;
    impl Problem for Poly {
        // u = x + 2y, harmonic
        fn rhs(&self, _x: &[f64; 3]) -> f64 {
            0.0
        }
        fn dirichlet(&self, x: &[f64; 3]) -> f64 {
            x[0] + 2.0 * x[1]
        }
    }

    fn setup(counts: &[usize], p: usize, e: usize, form: Formulation) -> (Discretization, Vec<GeometryMap>) {
        let g = box_grid(counts, &vec![1.0; counts.len()]).unwrap();
        let t = build_topology(&g, |_, _, _| BoundaryKind::Dirichlet).unwrap();
        let bases = (0..g.len()).map(|_| TensorBasis::uniform(counts.len(), p, e).unwrap()).collect();
        (Discretization::new(t, bases, form).unwrap(), g)
    }

    #[test]
    fn bilinear_element_stiffness() {
        let (d, g) = setup(&[1, 1], 1, 1, Formulation::Cg);
        let a = assemble_patch(&d, 0, &g[0], &Poly, &[0.0; 4], &[], &AssemblyOptions::default()).unwrap();
        let k = a.stiffness.to_dense();
        // unit square Q1: 2/3 diagonal, -1/6 edge neighbours, -1/3 opposite corner
        assert!((k[0][0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((k[0][1] + 1.0 / 6.0).abs() < 1e-14);
        assert!((k[0][2] + 1.0 / 6.0).abs() < 1e-14);
        assert!((k[0][3] + 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn greville_lifting_reproduces_linear_data() {
        let (d, g) = setup(&[1, 1], 2, 3, Formulation::Cg);
        let l = dirichlet_lifting(&d, 0, &g[0], &Poly).unwrap();
        let basis = &d.bases[0];
        for s in Side::all(2) {
            for dof in basis.side_dofs(s) {
                let m = basis.multi(dof);
                let x = basis.knots(0).greville()[m[0]];
                let y = basis.knots(1).greville()[m[1]];
                assert!((l[dof] - (x + 2.0 * y)).abs() < 1e-12);
            }
        }
    }

    fn solve_global(d: &Discretization, g: &[GeometryMap]) -> Vec<Vec<f64>> {
        let asm = assemble_all(d, g, &Poly, &AssemblyOptions::default()).unwrap();
        let sys: Vec<&PatchSystem> = asm.iter().map(|a| &a.system).collect();
        let (k, f) = assemble_global(d, &sys).unwrap();
        assert!(k.max_asymmetry() < 1e-12);
        let u = factorize(&k, FactorKind::Spd).unwrap().solve(&f);
        let lifts: Vec<&[f64]> = asm.iter().map(|a| a.lifting.as_slice()).collect();
        local_vectors(d, &u, &lifts)
    }

    #[test]
    fn linear_patch_test_cg_and_dg() {
        for form in [Formulation::Cg, Formulation::Dg] {
            let (d, g) = setup(&[2, 2], 2, 2, form);
            let u = solve_global(&d, &g);
            for k in 0..4 {
                let basis = &d.bases[k];
                let c = g[k].corner([false, false, false]);
                for dof in 0..basis.size() {
                    let m = basis.multi(dof);
                    let x = c[0] + 0.5 * basis.knots(0).greville()[m[0]];
                    let y = c[1] + 0.5 * basis.knots(1).greville()[m[1]];
                    assert!((u[k][dof] - (x + 2.0 * y)).abs() < 1e-10, "{form} patch {k}");
                }
            }
        }
    }

    #[test]
    fn dg_local_matrix_is_symmetric_and_norm_positive() {
        let (d, g) = setup(&[2, 1], 2, 2, Formulation::Dg);
        let asm = assemble_all(&d, &g, &Poly, &AssemblyOptions::default()).unwrap();
        for a in &asm {
            assert!(a.full.max_asymmetry() < 1e-12);
            assert!(a.penalty.max_asymmetry() < 1e-12);
            factorize(&a.system.kii, FactorKind::Spd).unwrap();
        }
        let u: Vec<Vec<f64>> = asm.iter().map(|a| (0..a.full.nrows()).map(|i| (i as f64).sin()).collect()).collect();
        assert!(dg_norm_squared(&asm, &u) > 0.0);
    }

    #[test]
    fn cg_two_patches_equal_single_patch() {
        let (d2, g2) = setup(&[2, 1], 2, 2, Formulation::Cg);
        let asm = assemble_all(&d2, &g2, &Poly, &AssemblyOptions::default()).unwrap();
        let sys: Vec<&PatchSystem> = asm.iter().map(|a| &a.system).collect();
        let (k2, _) = assemble_global(&d2, &sys).unwrap();
        // one patch on the unit square with 4x2 elements and a C0 line at x = 1/2
        let basis = TensorBasis::new(vec![
            crate::splines::KnotVector::new(2, vec![0.0, 0.0, 0.0, 0.25, 0.5, 0.5, 0.75, 1.0, 1.0, 1.0]).unwrap(),
            crate::splines::KnotVector::uniform(2, 2).unwrap(),
        ])
        .unwrap();
        let geo = GeometryMap::from_greville(basis.clone(), |xi| [xi[0], xi[1], 0.0]);
        let topo = build_topology(std::slice::from_ref(&geo), |_, _, _| BoundaryKind::Dirichlet).unwrap();
        let d1 = Discretization::new(topo, vec![basis], Formulation::Cg).unwrap();
        let a1 = assemble_all(&d1, &[geo], &Poly, &AssemblyOptions::default()).unwrap();
        let (k1, _) = assemble_global(&d1, &[&a1[0].system]).unwrap();
        assert_eq!(k1.nrows(), k2.nrows());
        // traces of the two operators are basis-order independent
        let tr = |m: &SparseMatrix| (0..m.nrows()).map(|i| m.get(i, i)).sum::<f64>();
        assert!((tr(&k1) - tr(&k2)).abs() < 1e-10 * tr(&k1));
        let fro = |m: &SparseMatrix| m.values().iter().map(|v| v * v).sum::<f64>();
        assert!((fro(&k1) - fro(&k2)).abs() < 1e-10 * fro(&k1));
    }
}
