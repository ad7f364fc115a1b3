use serde::{Deserialize, Serialize};

use crate::splines::{GeometryMap, KnotVector, Side, TensorBasis};
use crate::{Error, Result};

/// Corner coordinates closer than this are considered identical.
pub const MATCH_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

/// How the tangential parametrization of one interface side maps onto the
/// other: tangential axis `i` of the first side runs along tangential axis
/// `perm[i]` of the second, reversed when `flip[i]` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Orientation {
    pub perm: [usize; 2],
    pub flip: [bool; 2],
}

impl Orientation {
    pub fn identity() -> Self {
        Self { perm: [0, 1], flip: [false, false] }
    }

    pub fn is_identity(&self, tangential: usize) -> bool {
        (0..tangential).all(|i| self.perm[i] == i && !self.flip[i])
    }

    /// Inverse mapping (from the second side to the first).
    pub fn inverse(&self, tangential: usize) -> Self {
        let mut inv = Self::identity();
        for i in 0..tangential {
            inv.perm[self.perm[i]] = i;
            inv.flip[self.perm[i]] = self.flip[i];
        }
        inv
    }

    /// Maps a side-local multi-index of the first side to the second.
    pub fn map_index(&self, a: [usize; 2], sizes: [usize; 2], tangential: usize) -> [usize; 2] {
        let mut b = [0; 2];
        for i in 0..tangential {
            b[self.perm[i]] = if self.flip[i] { sizes[i] - 1 - a[i] } else { a[i] };
        }
        b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interface {
    pub k: usize,
    pub l: usize,
    pub side_k: Side,
    pub side_l: Side,
    /// Maps the tangential parametrization of `side_k` onto `side_l`.
    pub orientation: Orientation,
}

impl Interface {
    /// `(own side, neighbour, neighbour side, orientation own → neighbour)`
    /// seen from `patch`.
    pub fn view_from(&self, patch: usize, dim: usize) -> (Side, usize, Side, Orientation) {
        if patch == self.k {
            (self.side_k, self.l, self.side_l, self.orientation)
        } else {
            (self.side_l, self.k, self.side_k, self.orientation.inverse(dim - 1))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SideRole {
    Interface(usize),
    Boundary(BoundaryKind),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiPatchTopology {
    pub dim: usize,
    pub num_patches: usize,
    pub interfaces: Vec<Interface>,
    /// `sides[k][side.index()]`
    pub sides: Vec<Vec<SideRole>>,
}

impl MultiPatchTopology {
    pub fn role(&self, patch: usize, side: Side) -> SideRole {
        self.sides[patch][side.index()]
    }

    /// Neighbouring patches sharing an interface, ascending.
    pub fn neighbors(&self, patch: usize) -> Vec<usize> {
        let mut n: Vec<usize> = self
            .interfaces
            .iter()
            .filter_map(|f| match patch {
                p if p == f.k => Some(f.l),
                p if p == f.l => Some(f.k),
                _ => None,
            })
            .collect();
        n.sort_unstable();
        n.dedup();
        n
    }

    /// Interfaces touching `patch`, by index.
    pub fn interfaces_of(&self, patch: usize) -> Vec<usize> {
        (0..self.interfaces.len()).filter(|&i| self.interfaces[i].k == patch || self.interfaces[i].l == patch).collect()
    }

    pub fn boundary_sides(&self, kind: BoundaryKind) -> Vec<(usize, Side)> {
        let mut out = Vec::new();
        for k in 0..self.num_patches {
            for s in Side::all(self.dim) {
                if self.role(k, s) == SideRole::Boundary(kind) {
                    out.push((k, s));
                }
            }
        }
        out
    }
}

/// Corner bits of a side: bit `i` of `c` selects the upper end of tangential
/// axis `i`.
pub(crate) fn side_corner_bits(side: Side, dim: usize, c: usize) -> [bool; 3] {
    let mut bits = [false; 3];
    bits[side.dir] = side.upper;
    for (i, t) in side.tangential(dim).into_iter().enumerate() {
        bits[t] = c >> i & 1 == 1;
    }
    bits
}

fn side_corners(g: &GeometryMap, side: Side) -> Vec<[f64; 3]> {
    let dim = g.dim();
    (0..1usize << (dim - 1)).map(|c| g.corner(side_corner_bits(side, dim, c))).collect()
}

fn close(a: &[f64; 3], b: &[f64; 3]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= MATCH_TOL)
}

/// Point on `side` at tangential parameters `t` (ascending tangential axes).
fn side_param(side: Side, dim: usize, t: &[f64]) -> Vec<f64> {
    let mut xi = vec![0.0; dim];
    xi[side.dir] = side.coordinate();
    for (i, d) in side.tangential(dim).into_iter().enumerate() {
        xi[d] = t[i];
    }
    xi
}

/// Tries to locate `y` on `side` of `g`. Returns the tangential parameters
/// when the distance is below the matching tolerance.
fn project_on_side(g: &GeometryMap, side: Side, y: &[f64; 3]) -> Option<Vec<f64>> {
    let dim = g.dim();
    let tang = side.tangential(dim);
    let nt = tang.len();
    // cheap rejection through the convex hull property of the control net
    let side_ctrl: Vec<[f64; 3]> = g.basis().side_dofs(side).into_iter().map(|i| g.control()[i]).collect();
    for a in 0..dim {
        let lo = side_ctrl.iter().map(|p| p[a]).fold(f64::INFINITY, f64::min);
        let hi = side_ctrl.iter().map(|p| p[a]).fold(f64::NEG_INFINITY, f64::max);
        if y[a] < lo - MATCH_TOL || y[a] > hi + MATCH_TOL {
            return None;
        }
    }
    let mut t = vec![0.5; nt];
    for _ in 0..50 {
        let e = g.eval(&side_param(side, dim, &t)).ok()?;
        let r: Vec<f64> = (0..dim).map(|a| y[a] - e.x[a]).collect();
        // Gauss-Newton on the tangential columns of the Jacobian
        let cols: Vec<Vec<f64>> = tang.iter().map(|&d| (0..dim).map(|a| e.jac[a][d]).collect()).collect();
        let mut m = [[0.0; 2]; 2];
        let mut rhs = [0.0; 2];
        for i in 0..nt {
            rhs[i] = cols[i].iter().zip(&r).map(|(c, v)| c * v).sum();
            for j in 0..nt {
                m[i][j] = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
            }
        }
        let step = if nt == 1 {
            vec![rhs[0] / m[0][0]]
        } else {
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            vec![(rhs[0] * m[1][1] - rhs[1] * m[0][1]) / det, (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det]
        };
        let mut moved = 0.0f64;
        for i in 0..nt {
            let nt_i = (t[i] + step[i]).clamp(0.0, 1.0);
            moved = moved.max((nt_i - t[i]).abs());
            t[i] = nt_i;
        }
        if moved < 1e-15 {
            break;
        }
    }
    let x = g.point(&side_param(side, dim, &t)).ok()?;
    close(&x, y).then_some(t)
}

/// Detects interfaces by matching side corners and labels the remaining
/// sides with `classify(patch, side, side_midpoint)`.
pub fn build_topology(patches: &[GeometryMap], classify: impl Fn(usize, Side, [f64; 3]) -> BoundaryKind) -> Result<MultiPatchTopology> {
    let n = patches.len();
    if n == 0 {
        return Err(Error::Topology("no patches".into()));
    }
    let dim = patches[0].dim();
    if !(2..=3).contains(&dim) || patches.iter().any(|g| g.dim() != dim) {
        return Err(Error::Topology(format!("patches must all have dimension 2 or 3 (first has {dim})")));
    }
    let nsides = 2 * dim;
    let corners: Vec<Vec<Vec<[f64; 3]>>> = patches.iter().map(|g| Side::all(dim).map(|s| side_corners(g, s)).collect()).collect();
    for (k, cs) in corners.iter().enumerate() {
        for (si, c) in cs.iter().enumerate() {
            for i in 0..c.len() {
                for j in i + 1..c.len() {
                    if close(&c[i], &c[j]) {
                        return Err(Error::Topology(format!("patch {k} side {si} has collapsed corners")));
                    }
                }
            }
        }
    }

    let mut roles: Vec<Vec<Option<SideRole>>> = vec![vec![None; nsides]; n];
    let mut interfaces = Vec::new();
    for k in 0..n {
        for sk in Side::all(dim) {
            for l in k + 1..n {
                for sl in Side::all(dim) {
                    let (ck, cl) = (&corners[k][sk.index()], &corners[l][sl.index()]);
                    let map: Vec<Option<usize>> = ck.iter().map(|p| cl.iter().position(|q| close(p, q))).collect();
                    if map.iter().any(Option::is_none) {
                        continue;
                    }
                    let map: Vec<usize> = map.into_iter().map(Option::unwrap).collect();
                    let orientation = derive_orientation(&map, dim)
                        .ok_or_else(|| Error::Topology(format!("patches {k} and {l}: side corners match but not as a rigid face")))?;
                    for (p, s) in [(k, sk), (l, sl)] {
                        if roles[p][s.index()].is_some() {
                            return Err(Error::Topology(format!("ambiguous matching: side {} of patch {p} matches several sides", s.index())));
                        }
                    }
                    let idx = interfaces.len();
                    roles[k][sk.index()] = Some(SideRole::Interface(idx));
                    roles[l][sl.index()] = Some(SideRole::Interface(idx));
                    interfaces.push(Interface { k, l, side_k: sk, side_l: sl, orientation });
                }
            }
        }
    }

    // unmatched sides must not overlap any other patch side (T-junctions)
    for k in 0..n {
        for sk in Side::all(dim) {
            if roles[k][sk.index()].is_some() {
                continue;
            }
            let mid = patches[k].point(&side_param(sk, dim, &vec![0.5; dim - 1]))?;
            for (l, gl) in patches.iter().enumerate() {
                if l == k {
                    continue;
                }
                for sl in Side::all(dim) {
                    if project_on_side(gl, sl, &mid).is_some() {
                        return Err(Error::Topology(format!(
                            "non-conforming contact between patch {k} side {} and patch {l} side {} (T-junction)",
                            sk.index(),
                            sl.index()
                        )));
                    }
                }
            }
            roles[k][sk.index()] = Some(SideRole::Boundary(classify(k, sk, mid)));
        }
    }
    let sides = roles.into_iter().map(|r| r.into_iter().map(|s| s.expect("every side classified")).collect()).collect();
    Ok(MultiPatchTopology { dim, num_patches: n, interfaces, sides })
}

/// `map[c]` is the corner of the second side matching corner `c` of the first.
fn derive_orientation(map: &[usize], dim: usize) -> Option<Orientation> {
    let nt = dim - 1;
    let b0 = map[0];
    let mut o = Orientation::identity();
    let mut used = [false; 2];
    for i in 0..nt {
        let diff = map[1 << i] ^ b0;
        if diff.count_ones() != 1 {
            return None;
        }
        let j = diff.trailing_zeros() as usize;
        if used[j] {
            return None;
        }
        used[j] = true;
        o.perm[i] = j;
        o.flip[i] = b0 >> j & 1 == 1;
    }
    // every corner must follow the derived affine map of bits
    for (c, &mc) in map.iter().enumerate() {
        let mut expect = 0usize;
        for i in 0..nt {
            let bit = (c >> i & 1 == 1) != o.flip[i];
            if bit {
                expect |= 1 << o.perm[i];
            }
        }
        if expect != mc {
            return None;
        }
    }
    Some(o)
}

/// Checks that the discretizations of two interface sides coincide and
/// returns the tangential knot vectors of the first side.
pub fn check_matching(f: &Interface, bk: &TensorBasis, bl: &TensorBasis, dim: usize) -> Result<Vec<KnotVector>> {
    let tk = f.side_k.tangential(dim);
    let tl = f.side_l.tangential(dim);
    let mut out = Vec::with_capacity(tk.len());
    for (i, &d) in tk.iter().enumerate() {
        let kv = bk.knots(d);
        let other = bl.knots(tl[f.orientation.perm[i]]);
        let other = if f.orientation.flip[i] { other.reversed() } else { other.clone() };
        if !kv.matches(&other, 1e-12) {
            return Err(Error::Unsupported(format!("non-matching interface discretization between patches {} and {}", f.k, f.l)));
        }
        out.push(kv.clone());
    }
    Ok(out)
}

/// Patch geometries of a structured text geometry description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryFile {
    pub patch: Vec<PatchEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchEntry {
    pub degrees: Vec<usize>,
    pub elements: Vec<usize>,
    /// Control points in lexicographic order (first direction fastest).
    pub control: Vec<Vec<f64>>,
}

impl GeometryFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_patches(patches: &[GeometryMap]) -> Self {
        let patch = patches
            .iter()
            .map(|g| PatchEntry {
                degrees: g.basis().directions().iter().map(KnotVector::degree).collect(),
                elements: g.basis().elements(),
                control: g.control().iter().map(|p| p[..g.dim()].to_vec()).collect(),
            })
            .collect();
        Self { patch }
    }

    pub fn patches(&self) -> Result<Vec<GeometryMap>> {
        self.patch
            .iter()
            .map(|e| {
                if e.degrees.len() != e.elements.len() {
                    return Err(Error::Parse("degrees and elements differ in length".into()));
                }
                let dirs = e.degrees.iter().zip(&e.elements).map(|(&p, &m)| KnotVector::uniform(p, m)).collect::<Result<_>>()?;
                let basis = TensorBasis::new(dirs)?;
                let dim = basis.dim();
                let control = e
                    .control
                    .iter()
                    .map(|c| {
                        if c.len() != dim {
                            return Err(Error::Parse(format!("control point with {} coordinates in dimension {dim}", c.len())));
                        }
                        let mut p = [0.0; 3];
                        p[..dim].copy_from_slice(c);
                        Ok(p)
                    })
                    .collect::<Result<_>>()?;
                GeometryMap::new(basis, control)
            })
            .collect()
    }
}

/// Axis-aligned grid of affine box patches covering `[0, extent]`, patch
/// index running lexicographically with the first direction fastest.
pub fn box_grid(counts: &[usize], extent: &[f64]) -> Result<Vec<GeometryMap>> {
    if counts.len() != extent.len() || counts.contains(&0) {
        return Err(Error::InvalidArgument(format!("bad patch grid {counts:?} on extent {extent:?}")));
    }
    let dim = counts.len();
    let total: usize = counts.iter().product();
    (0..total)
        .map(|mut p| {
            let mut lo = vec![0.0; dim];
            let mut hi = vec![0.0; dim];
            for d in 0..dim {
                let i = p % counts[d];
                p /= counts[d];
                lo[d] = extent[d] * i as f64 / counts[d] as f64;
                hi[d] = extent[d] * (i + 1) as f64 / counts[d] as f64;
            }
            GeometryMap::affine_box(&lo, &hi)
        })
        .collect()
}
