use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::assembly::{for_each_side_point, Discretization};
use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::splines::{for_each_element, gauss_on, GeometryMap, Side, TensorBasis};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimalKind {
    Vertex,
    Edge,
    Face,
}

/// How edge and face functionals weight the trace coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AverageKind {
    /// Integral mean of the trace over the physical entity.
    #[default]
    IntegralMean,
    /// Arithmetic mean of the coefficients.
    CoefficientMean,
}

impl std::str::FromStr for AverageKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "integral-mean" | "integral" => Ok(AverageKind::IntegralMean),
            "coefficient-mean" | "coefficient" => Ok(AverageKind::CoefficientMean),
            other => Err(Error::Config(format!("unknown average kind '{other}'"))),
        }
    }
}

/// Which entities carry primal variables. In 2D, patch sides are edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimalStrategy {
    pub vertices: bool,
    pub edges: bool,
    pub faces: bool,
    pub average: AverageKind,
}

impl PrimalStrategy {
    /// Vertices and edge averages in 2D, edge averages only in 3D.
    pub fn default_for(dim: usize) -> Self {
        Self { vertices: dim == 2, edges: true, faces: false, average: AverageKind::IntegralMean }
    }

    /// Parses `default` or a `+`-separated subset of `vertices`, `edges`, `faces`.
    pub fn parse(s: &str, dim: usize) -> Result<Self> {
        if s == "default" {
            return Ok(Self::default_for(dim));
        }
        let mut out = Self { vertices: false, edges: false, faces: false, average: AverageKind::IntegralMean };
        for part in s.split('+').map(str::trim) {
            match part {
                "vertices" | "v" => out.vertices = true,
                "edges" | "e" => out.edges = true,
                "faces" | "f" => out.faces = true,
                other => return Err(Error::Config(format!("unknown primal entity '{other}'"))),
            }
        }
        if out.faces && dim != 3 {
            return Err(Error::Config("face primals need a 3D domain".into()));
        }
        Ok(out)
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.vertices {
            parts.push("vertices");
        }
        if self.edges {
            parts.push("edges");
        }
        if self.faces {
            parts.push("faces");
        }
        parts.join("+")
    }
}

/// Geometric entity of one patch in parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Entity {
    Corner([bool; 3]),
    /// Patch edge in 3D running along `axis`; the other two directions are
    /// fixed at the bounds given in `fixed` (indexed by direction).
    Edge {
        axis: usize,
        fixed: [bool; 3],
    },
    Side(Side),
}

impl Entity {
    pub fn dofs(&self, basis: &TensorBasis) -> Vec<usize> {
        let sizes = basis.sizes();
        match *self {
            Entity::Corner(bits) => vec![basis.corner_dof(bits)],
            Entity::Side(side) => basis.side_dofs(side),
            Entity::Edge { axis, fixed } => (0..sizes[axis])
                .map(|i| {
                    let mut idx = [0usize; 3];
                    for d in 0..3 {
                        idx[d] = if d == axis {
                            i
                        } else if fixed[d] {
                            sizes[d] - 1
                        } else {
                            0
                        };
                    }
                    basis.flat(idx)
                })
                .collect(),
        }
    }
}

fn entities(dim: usize, kind: PrimalKind) -> Vec<Entity> {
    let corners = |n: usize| (0..1usize << n).map(move |c| [c & 1 == 1, c >> 1 & 1 == 1, c >> 2 & 1 == 1]);
    match (kind, dim) {
        (PrimalKind::Vertex, _) => corners(dim).map(Entity::Corner).collect(),
        (PrimalKind::Edge, 2) => Side::all(2).map(Entity::Side).collect(),
        (PrimalKind::Edge, _) => (0..3)
            .flat_map(|axis| {
                let others: Vec<usize> = (0..3).filter(|&d| d != axis).collect();
                (0..4).map(move |c| {
                    let mut fixed = [false; 3];
                    fixed[others[0]] = c & 1 == 1;
                    fixed[others[1]] = c >> 1 & 1 == 1;
                    Entity::Edge { axis, fixed }
                })
            })
            .collect(),
        (PrimalKind::Face, 3) => Side::all(3).map(Entity::Side).collect(),
        (PrimalKind::Face, _) => Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalPart {
    pub patch: usize,
    /// Local dofs the functional reads on this patch.
    pub dofs: Vec<usize>,
    /// Entity of this patch whose trace the dofs live on.
    pub entity: Entity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalVariable {
    pub kind: PrimalKind,
    /// Dof classes the functional involves.
    pub classes: Vec<usize>,
    pub parts: Vec<PrimalPart>,
}

/// Primal variables and the index map `i(k, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalSpec {
    pub strategy: PrimalStrategy,
    pub variables: Vec<PrimalVariable>,
    /// `per_patch[k][j] = i(k, j)`, increasing in `j`.
    pub per_patch: Vec<Vec<usize>>,
    /// `part_of[k][j]`: index into `variables[i(k, j)].parts`.
    pub part_of: Vec<Vec<usize>>,
}

impl PrimalSpec {
    /// No primal variables on `n` patches.
    pub fn empty(strategy: PrimalStrategy, n: usize) -> Self {
        Self { strategy, variables: Vec::new(), per_patch: vec![Vec::new(); n], part_of: vec![Vec::new(); n] }
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn count(&self, kind: PrimalKind) -> usize {
        self.variables.iter().filter(|v| v.kind == kind).count()
    }

    /// Classes fully fixed by vertex-type variables (one class each).
    pub fn vertex_classes(&self) -> BTreeSet<usize> {
        self.variables.iter().filter(|v| v.classes.len() == 1 && v.kind == PrimalKind::Vertex).map(|v| v.classes[0]).collect()
    }
}

/// Primal variables for a solve: none on a single patch, which has no
/// interfaces, and [`select_primals`] otherwise.
pub fn primals_for_solve(disc: &Discretization, strategy: PrimalStrategy) -> Result<PrimalSpec> {
    if disc.num_patches() == 1 {
        return Ok(PrimalSpec::empty(strategy, 1));
    }
    select_primals(disc, strategy)
}

/// Selects primal variables shared by at least two patches. Dirichlet dofs
/// and dofs already fixed by lower-dimensional primals are left out of the
/// functionals; entities with equal class sets are merged.
pub fn select_primals(disc: &Discretization, strategy: PrimalStrategy) -> Result<PrimalSpec> {
    let dim = disc.dim();
    let n = disc.num_patches();
    let mut variables: Vec<PrimalVariable> = Vec::new();
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let kinds = [(PrimalKind::Vertex, strategy.vertices), (PrimalKind::Edge, strategy.edges), (PrimalKind::Face, strategy.faces)];
    for (kind, on) in kinds {
        if !on {
            continue;
        }
        let fixed: BTreeSet<usize> = variables.iter().flat_map(|v| v.classes.iter().copied()).collect();
        for k in 0..n {
            for ent in entities(dim, kind) {
                let dofs: Vec<usize> =
                    ent.dofs(&disc.bases[k]).into_iter().filter(|&d| !disc.layouts[k].dirichlet[d] && !fixed.contains(&disc.class_of[k][d])).collect();
                let key: BTreeSet<usize> = dofs.iter().map(|&d| disc.class_of[k][d]).collect();
                if key.is_empty() || seen.contains(&key.iter().copied().collect::<Vec<_>>()) {
                    continue;
                }
                let classes: Vec<usize> = key.iter().copied().collect();
                // members of the key classes, per patch
                let mut on_patch: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
                for &c in &classes {
                    for &(l, d) in &disc.classes[c].members {
                        if on_patch.entry(l).or_default().insert(c, d).is_some() {
                            return Err(Error::Unsupported(format!("patch {l} holds dof class {c} twice")));
                        }
                    }
                }
                let mut parts = Vec::new();
                for (l, members) in on_patch {
                    if members.len() != classes.len() {
                        continue;
                    }
                    let ldofs: Vec<usize> = classes.iter().map(|c| members[c]).collect();
                    let entity = if l == k { ent } else { locate_entity(disc, l, kind, &ldofs)? };
                    parts.push(PrimalPart { patch: l, dofs: ldofs, entity });
                }
                if parts.len() < 2 {
                    continue;
                }
                seen.insert(classes.clone());
                variables.push(PrimalVariable { kind, classes, parts });
            }
        }
    }
    if variables.is_empty() {
        return Err(Error::Config(format!("primal strategy '{}' selects no primal variables; the coarse problem would be empty", strategy.label())));
    }
    let mut per_patch = vec![Vec::new(); n];
    let mut part_of = vec![Vec::new(); n];
    for (i, v) in variables.iter().enumerate() {
        for (pi, part) in v.parts.iter().enumerate() {
            per_patch[part.patch].push(i);
            part_of[part.patch].push(pi);
        }
    }
    Ok(PrimalSpec { strategy, variables, per_patch, part_of })
}

/// First entity of `kind` on patch `l` whose trace carries all of `ldofs`.
fn locate_entity(disc: &Discretization, l: usize, kind: PrimalKind, ldofs: &[usize]) -> Result<Entity> {
    let layout = &disc.layouts[l];
    let shapes: BTreeSet<usize> = ldofs.iter().map(|&d| layout.shape_of(d)).collect();
    entities(disc.dim(), kind)
        .into_iter()
        .find(|e| {
            let own: BTreeSet<usize> = e.dofs(&disc.bases[l]).into_iter().collect();
            shapes.is_subset(&own)
        })
        .ok_or_else(|| Error::Topology(format!("patch {l}: no {kind:?} entity carries the primal dofs")))
}

/// Integrals of the trace shapes of `dofs` over the physical entity, and the
/// entity measure.
fn entity_integrals(geometry: &GeometryMap, basis: &TensorBasis, entity: Entity, shapes: &[usize], nq: usize) -> Result<(Vec<f64>, f64)> {
    let dim = basis.dim();
    let mut sums = vec![0.0; shapes.len()];
    let mut measure = 0.0;
    let add = |xi: &[f64], w: f64, sums: &mut Vec<f64>| -> Result<()> {
        let e = basis.eval(xi)?;
        for (s, &f) in sums.iter_mut().zip(shapes) {
            if let Some(a) = e.indices.iter().position(|&i| i == f) {
                *s += w * e.values[a];
            }
        }
        Ok(())
    };
    match entity {
        Entity::Corner(_) => return Err(Error::InvalidArgument("vertex functionals have no integral".into())),
        Entity::Side(side) => {
            for_each_side_point(basis, side, nq, |xi, wq| {
                let m = geometry.eval(xi)?;
                let (_, ds) = m.side_normal(side, dim);
                measure += wq * ds;
                add(xi, wq * ds, &mut sums)
            })?;
        }
        Entity::Edge { axis, fixed } => {
            let bps = vec![basis.knots(axis).breakpoints()];
            for_each_element(&bps, |lo, hi| {
                let (t, w) = gauss_on(nq, lo[0], hi[0]);
                for (tq, wq) in t.iter().zip(&w) {
                    let xi: Vec<f64> = (0..dim)
                        .map(|d| {
                            if d == axis {
                                *tq
                            } else if fixed[d] {
                                1.0
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    let m = geometry.eval(&xi)?;
                    let dl = (0..dim).map(|r| m.jac[r][axis] * m.jac[r][axis]).sum::<f64>().sqrt();
                    measure += wq * dl;
                    add(&xi, wq * dl, &mut sums)?;
                }
                Ok(())
            })?;
        }
    }
    Ok((sums, measure))
}

/// Constraint matrix `C^(k)` (rows: the patch's primal variables in order,
/// columns: the patch's B dofs).
pub fn constraint_matrix(disc: &Discretization, spec: &PrimalSpec, k: usize, geometry: &GeometryMap) -> Result<SparseMatrix> {
    let layout = &disc.layouts[k];
    let basis = &disc.bases[k];
    let nq = disc.degree() + 1;
    let mut t = TripletBuilder::new(spec.per_patch[k].len(), layout.n_b());
    for (j, (&i, &pi)) in spec.per_patch[k].iter().zip(&spec.part_of[k]).enumerate() {
        let v = &spec.variables[i];
        let part = &v.parts[pi];
        let weights: Vec<f64> = match (part.entity, spec.strategy.average) {
            (Entity::Corner(_), _) => vec![1.0; part.dofs.len()],
            (_, AverageKind::CoefficientMean) => vec![1.0 / part.dofs.len() as f64; part.dofs.len()],
            (entity, AverageKind::IntegralMean) => {
                let shapes: Vec<usize> = part.dofs.iter().map(|&d| layout.shape_of(d)).collect();
                let (ints, measure) = entity_integrals(geometry, basis, entity, &shapes, nq)?;
                if !(measure > 0.0) {
                    return Err(Error::SingularGeometry { det: measure, point: Vec::new() });
                }
                ints.iter().map(|x| x / measure).collect()
            }
        };
        for (&d, w) in part.dofs.iter().zip(weights) {
            let b = layout.position[d]
                .filter(|&p| p < layout.n_b())
                .ok_or_else(|| Error::Topology(format!("primal {i} reads dof {d} of patch {k}, which is not an interface dof")))?;
            t.push(j, b, w);
        }
    }
    Ok(t.build())
}
