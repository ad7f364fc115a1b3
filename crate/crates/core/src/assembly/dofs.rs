use serde::{Deserialize, Serialize};

use super::topology::{check_matching, BoundaryKind, MultiPatchTopology, SideRole};
use crate::splines::{Side, TensorBasis};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Cg,
    Dg,
}

impl std::fmt::Display for Formulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Formulation::Cg => "cg",
            Formulation::Dg => "dg",
        })
    }
}

impl std::str::FromStr for Formulation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cg" => Ok(Formulation::Cg),
            "dg" => Ok(Formulation::Dg),
            other => Err(Error::Config(format!("unknown formulation '{other}'"))),
        }
    }
}

/// Mirror of a neighbour's trace on one interface (dG only).
///
/// Position `a` of the block follows the own side ordering: its trace on the
/// interface has the shape of own function `own_side[a]`, and it stands for
/// the neighbour's function `mirrored[a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtraBlock {
    pub interface: usize,
    pub side: Side,
    pub neighbor: usize,
    pub offset: usize,
    pub own_side: Vec<usize>,
    pub mirrored: Vec<usize>,
}

impl ExtraBlock {
    pub fn len(&self) -> usize {
        self.own_side.len()
    }

    pub fn is_empty(&self) -> bool {
        self.own_side.is_empty()
    }
}

/// Local dof layout of one patch: own basis functions first, then the
/// extra blocks. The condensed system orders interface (B) dofs before
/// interior (I) dofs; Dirichlet dofs are eliminated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchLayout {
    pub patch: usize,
    pub n_own: usize,
    pub extras: Vec<ExtraBlock>,
    pub dirichlet: Vec<bool>,
    pub on_interface: Vec<bool>,
    pub b_dofs: Vec<usize>,
    pub i_dofs: Vec<usize>,
    /// Local dof → position in the B-then-I system ordering.
    pub position: Vec<Option<usize>>,
}

impl PatchLayout {
    pub fn n_local(&self) -> usize {
        self.dirichlet.len()
    }

    pub fn n_b(&self) -> usize {
        self.b_dofs.len()
    }

    pub fn n_i(&self) -> usize {
        self.i_dofs.len()
    }

    /// Local dofs in system order (B then I).
    pub fn system_dofs(&self) -> Vec<usize> {
        self.b_dofs.iter().chain(&self.i_dofs).copied().collect()
    }

    /// Own function whose trace gives the shape of local dof `d`.
    pub fn shape_of(&self, d: usize) -> usize {
        if d < self.n_own {
            return d;
        }
        let b = self.extras.iter().find(|b| d >= b.offset && d < b.offset + b.len()).expect("local dof in range");
        b.own_side[d - b.offset]
    }
}

/// A set of local dofs (over several patches) representing the same
/// coefficient of the coupled space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofClass {
    /// `(patch, local dof)` sorted; in dG the first member is the owner.
    pub members: Vec<(usize, usize)>,
    /// Pairs of member indices coupled directly through an interface.
    pub edges: Vec<(usize, usize)>,
    pub dirichlet: bool,
}

/// Multipatch discretization: bases, local layouts, dof classes and the
/// global numbering of the coupled space. Built from topology and bases only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub formulation: Formulation,
    pub topology: MultiPatchTopology,
    pub bases: Vec<TensorBasis>,
    pub layouts: Vec<PatchLayout>,
    pub classes: Vec<DofClass>,
    /// `class_of[k][d]`: class of local dof `d` of patch `k`.
    pub class_of: Vec<Vec<usize>>,
    /// Non-Dirichlet classes in order; the coupled-space unknowns.
    pub global_classes: Vec<usize>,
    /// `class → global index` (None for Dirichlet classes).
    pub class_global: Vec<Option<usize>>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// For the interface side `side` of a patch with `basis`, pairs each side dof
/// (in own side order) with the neighbour's dof it meets.
fn side_pairing(topo: &MultiPatchTopology, iface: usize, patch: usize, bases: &[TensorBasis]) -> Result<(Side, usize, Vec<usize>, Vec<usize>)> {
    let dim = topo.dim;
    let f = &topo.interfaces[iface];
    check_matching(f, &bases[f.k], &bases[f.l], dim)?;
    let (side, nb, nside, orient) = f.view_from(patch, dim);
    let own = bases[patch].side_dofs(side);
    let other = bases[nb].side_dofs(nside);
    let s = bases[patch].sizes();
    let tang = side.tangential(dim);
    let sizes = [s[tang[0]], if dim == 3 { s[tang[1]] } else { 1 }];
    let so = bases[nb].sizes();
    let ntang = nside.tangential(dim);
    let osizes = [so[ntang[0]], if dim == 3 { so[ntang[1]] } else { 1 }];
    let mut partner = Vec::with_capacity(own.len());
    for a in 0..own.len() {
        let ai = [a % sizes[0], a / sizes[0]];
        let b = orient.map_index(ai, sizes, dim - 1);
        partner.push(other[b[0] + osizes[0] * b[1]]);
    }
    Ok((side, nb, own, partner))
}

impl Discretization {
    pub fn new(topology: MultiPatchTopology, bases: Vec<TensorBasis>, formulation: Formulation) -> Result<Self> {
        let n = topology.num_patches;
        let dim = topology.dim;
        if bases.len() != n {
            return Err(Error::ShapeMismatch { expected: n, got: bases.len() });
        }
        if bases.iter().any(|b| b.dim() != dim) {
            return Err(Error::InvalidArgument("basis dimension differs from topology".into()));
        }
        let p0 = bases[0].max_degree();
        if bases.iter().any(|b| b.directions().iter().any(|k| k.degree() != p0)) {
            return Err(Error::Unsupported("varying degree across patches or directions".into()));
        }

        // own dofs: Dirichlet and interface flags
        let mut own_dir: Vec<Vec<bool>> = bases.iter().map(|b| vec![false; b.size()]).collect();
        let mut own_iface: Vec<Vec<bool>> = own_dir.clone();
        for k in 0..n {
            for s in Side::all(dim) {
                match topology.role(k, s) {
                    SideRole::Boundary(BoundaryKind::Dirichlet) => {
                        for d in bases[k].side_dofs(s) {
                            own_dir[k][d] = true;
                        }
                    }
                    SideRole::Interface(_) => {
                        for d in bases[k].side_dofs(s) {
                            own_iface[k][d] = true;
                        }
                    }
                    SideRole::Boundary(BoundaryKind::Neumann) => {}
                }
            }
        }

        // extra blocks (dG)
        let mut extras: Vec<Vec<ExtraBlock>> = vec![Vec::new(); n];
        let mut pairings = Vec::new();
        for (i, f) in topology.interfaces.iter().enumerate() {
            for patch in [f.k, f.l] {
                let (side, nb, own, partner) = side_pairing(&topology, i, patch, &bases)?;
                if patch == f.k {
                    pairings.push((f.k, own.clone(), nb, partner.clone()));
                }
                if formulation == Formulation::Dg {
                    let offset = bases[patch].size() + extras[patch].iter().map(ExtraBlock::len).sum::<usize>();
                    extras[patch].push(ExtraBlock { interface: i, side, neighbor: nb, offset, own_side: own, mirrored: partner });
                }
            }
        }

        // classes over all local dofs
        let n_local: Vec<usize> = (0..n).map(|k| bases[k].size() + extras[k].iter().map(ExtraBlock::len).sum::<usize>()).collect();
        let mut base = vec![0usize; n + 1];
        for k in 0..n {
            base[k + 1] = base[k] + n_local[k];
        }
        let mut uf = UnionFind((0..base[n]).collect());
        let mut links: Vec<(usize, usize)> = Vec::new();
        match formulation {
            Formulation::Cg => {
                for (k, own, l, partner) in &pairings {
                    for (a, b) in own.iter().zip(partner) {
                        let (x, y) = (base[*k] + a, base[*l] + b);
                        uf.union(x, y);
                        links.push((x, y));
                    }
                }
            }
            Formulation::Dg => {
                for k in 0..n {
                    for blk in &extras[k] {
                        for (a, &m) in blk.mirrored.iter().enumerate() {
                            let (x, y) = (base[blk.neighbor] + m, base[k] + blk.offset + a);
                            uf.union(x, y);
                            links.push((x, y));
                        }
                    }
                }
            }
        }
        let locate = |g: usize| -> (usize, usize) {
            let k = base.partition_point(|&b| b <= g) - 1;
            (k, g - base[k])
        };
        let mut root_class = vec![usize::MAX; base[n]];
        let mut classes: Vec<DofClass> = Vec::new();
        let mut class_of: Vec<Vec<usize>> = n_local.iter().map(|&m| vec![0; m]).collect();
        for g in 0..base[n] {
            let r = uf.find(g);
            if root_class[r] == usize::MAX {
                root_class[r] = classes.len();
                classes.push(DofClass { members: Vec::new(), edges: Vec::new(), dirichlet: false });
            }
            let c = root_class[r];
            let (k, d) = locate(g);
            classes[c].members.push((k, d));
            class_of[k][d] = c;
        }
        for &(x, y) in &links {
            let c = root_class[uf.find(x)];
            let (mx, my) = (locate(x), locate(y));
            let ia = classes[c].members.iter().position(|&m| m == mx).expect("member");
            let ib = classes[c].members.iter().position(|&m| m == my).expect("member");
            let e = (ia.min(ib), ia.max(ib));
            if !classes[c].edges.contains(&e) {
                classes[c].edges.push(e);
            }
        }
        if formulation == Formulation::Dg {
            // owner (the only own dof of the class) first
            for c in &mut classes {
                let owner = c.members.iter().position(|&(k, d)| d < bases[k].size()).expect("every dG class has an owner");
                if owner != 0 {
                    c.members.swap(0, owner);
                    for e in &mut c.edges {
                        let fix = |i: usize| {
                            if i == 0 {
                                owner
                            } else if i == owner {
                                0
                            } else {
                                i
                            }
                        };
                        *e = (fix(e.0).min(fix(e.1)), fix(e.0).max(fix(e.1)));
                    }
                }
            }
        }

        // Dirichlet status per class; every member must be able to provide a value
        for (ci, c) in classes.iter_mut().enumerate() {
            let own_flags: Vec<Option<bool>> = c.members.iter().map(|&(k, d)| (d < bases[k].size()).then(|| own_dir[k][d])).collect();
            c.dirichlet = own_flags.contains(&Some(true));
            if c.dirichlet && own_flags.contains(&Some(false)) {
                return Err(Error::Unsupported(format!(
                    "dof class {ci} is Dirichlet on one patch but not on a Dirichlet side of another (mixed boundary at an interface end)"
                )));
            }
        }

        let mut layouts = Vec::with_capacity(n);
        for k in 0..n {
            let nl = n_local[k];
            let n_own = bases[k].size();
            let dirichlet: Vec<bool> = (0..nl).map(|d| classes[class_of[k][d]].dirichlet).collect();
            let on_interface: Vec<bool> = (0..nl).map(|d| d >= n_own || own_iface[k][d]).collect();
            let b_dofs: Vec<usize> = (0..nl).filter(|&d| !dirichlet[d] && on_interface[d]).collect();
            let i_dofs: Vec<usize> = (0..nl).filter(|&d| !dirichlet[d] && !on_interface[d]).collect();
            let mut position = vec![None; nl];
            for (p, &d) in b_dofs.iter().chain(&i_dofs).enumerate() {
                position[d] = Some(p);
            }
            layouts.push(PatchLayout { patch: k, n_own, extras: std::mem::take(&mut extras[k]), dirichlet, on_interface, b_dofs, i_dofs, position });
        }

        let global_classes: Vec<usize> = (0..classes.len()).filter(|&c| !classes[c].dirichlet).collect();
        let mut class_global = vec![None; classes.len()];
        for (g, &c) in global_classes.iter().enumerate() {
            class_global[c] = Some(g);
        }
        Ok(Self { formulation, topology, bases, layouts, classes, class_of, global_classes, class_global })
    }

    pub fn dim(&self) -> usize {
        self.topology.dim
    }

    pub fn num_patches(&self) -> usize {
        self.topology.num_patches
    }

    pub fn degree(&self) -> usize {
        self.bases[0].max_degree()
    }

    /// Number of unknowns of the coupled (global) system.
    pub fn n_global(&self) -> usize {
        self.global_classes.len()
    }

    /// Global index of local dof `d` of patch `k`.
    pub fn global_index(&self, k: usize, d: usize) -> Option<usize> {
        self.class_global[self.class_of[k][d]]
    }

    /// Global indices of the system dofs (B then I) of patch `k`.
    pub fn system_to_global(&self, k: usize) -> Vec<usize> {
        self.layouts[k].system_dofs().into_iter().map(|d| self.global_index(k, d).expect("system dofs are not Dirichlet")).collect()
    }

    /// Default SIP penalty `4 (p + 1)^2`.
    pub fn default_delta(&self) -> f64 {
        let p = self.degree() as f64;
        4.0 * (p + 1.0) * (p + 1.0)
    }
}
