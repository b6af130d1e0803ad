//! Box geometry: uniform grid on `[0, side]^3`, an inner region compactly
//! contained in the box, the shell between them, boundary patches, and the
//! enclosing torus used for zero-extension transforms.
//!
//! Node indexing is lexicographic over `(i, j, k)` with `k` fastest and is
//! fixed once at construction; every matrix in the crate refers to it.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Spatial dimension of the grids in this crate.
pub const DIM: usize = 3;

/// One of the six faces of the box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Face {
    XLo,
    XHi,
    YLo,
    YHi,
    ZLo,
    ZHi,
}

pub const ALL_FACES: [Face; 6] = [Face::XLo, Face::XHi, Face::YLo, Face::YHi, Face::ZLo, Face::ZHi];

impl Face {
    pub fn axis(self) -> usize {
        match self {
            Face::XLo | Face::XHi => 0,
            Face::YLo | Face::YHi => 1,
            Face::ZLo | Face::ZHi => 2,
        }
    }

    pub fn is_upper(self) -> bool {
        matches!(self, Face::XHi | Face::YHi | Face::ZHi)
    }

    /// Outward unit normal of the face.
    pub fn outward_normal(self) -> [f64; 3] {
        let mut n = [0.0; 3];
        n[self.axis()] = if self.is_upper() { 1.0 } else { -1.0 };
        n
    }
}

/// Selection of a boundary patch: the whole boundary, a union of faces, or a
/// sub-rectangle of one face (coordinates along the two tangential axes, in
/// ascending axis order).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchSpec {
    Whole,
    Faces(Vec<Face>),
    FaceRect { face: Face, lo: [f64; 2], hi: [f64; 2] },
}

impl PatchSpec {
    fn contains(&self, face_membership: &[Face], x: [f64; 3], tol: f64) -> bool {
        match self {
            PatchSpec::Whole => true,
            PatchSpec::Faces(faces) => faces.iter().any(|f| face_membership.contains(f)),
            PatchSpec::FaceRect { face, lo, hi } => {
                if !face_membership.contains(face) {
                    return false;
                }
                let mut t = 0;
                for d in 0..DIM {
                    if d == face.axis() {
                        continue;
                    }
                    if x[d] < lo[t] - tol || x[d] > hi[t] + tol {
                        return false;
                    }
                    t += 1;
                }
                true
            }
        }
    }
}

/// Serializable description of the geometry.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometrySpec {
    /// Number of grid subdivisions per side (nodes per side = subdivisions + 1).
    pub subdivisions: usize,
    /// Box side length.
    pub side: f64,
    /// Lower corner of the inner region.
    pub omega0_lo: [f64; 3],
    /// Upper corner of the inner region.
    pub omega0_hi: [f64; 3],
    /// Patch carrying the map input data.
    pub gamma: PatchSpec,
    /// Patch carrying the map output data.
    pub sigma: PatchSpec,
    /// Enclosing torus side as a multiple of the box side.
    pub torus_factor: usize,
}

impl Default for GeometrySpec {
    fn default() -> Self {
        GeometrySpec {
            subdivisions: 16,
            side: 1.0,
            omega0_lo: [0.25; 3],
            omega0_hi: [0.75; 3],
            gamma: PatchSpec::Whole,
            sigma: PatchSpec::Whole,
            torus_factor: 2,
        }
    }
}

/// A set of grid nodes, stored as sorted global node ids plus a reverse map
/// from global node id to position within the set (`-1` when absent).
#[derive(Clone, Debug)]
pub struct NodeSet {
    ids: Vec<usize>,
    index_of: Vec<i64>,
}

impl NodeSet {
    fn from_ids(mut ids: Vec<usize>, total: usize) -> Self {
        ids.sort_unstable();
        let mut index_of = vec![-1_i64; total];
        for (p, &id) in ids.iter().enumerate() {
            index_of[id] = p as i64;
        }
        NodeSet { ids, index_of }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn contains(&self, node: usize) -> bool {
        self.index_of[node] >= 0
    }

    /// Position of a global node id within this set, if present.
    pub fn position(&self, node: usize) -> Option<usize> {
        let p = self.index_of[node];
        (p >= 0).then_some(p as usize)
    }
}

/// Discretized box domain with inner region, shell, and boundary patches.
#[derive(Debug)]
pub struct Geometry {
    spec: GeometrySpec,
    h: f64,
    nodes_per_side: usize,
    interior: NodeSet,
    boundary: NodeSet,
    omega0: NodeSet,
    omega1: NodeSet,
    /// Positions (into the boundary set) of Gamma nodes.
    gamma: Vec<usize>,
    /// Positions (into the boundary set) of Sigma nodes.
    sigma: Vec<usize>,
    /// For each boundary node (by boundary position), the faces it lies on.
    faces_of: Vec<Vec<Face>>,
}

/// Build a [`Geometry`] from its spec, checking all structural invariants.
pub fn build_geometry(spec: GeometrySpec) -> Result<Arc<Geometry>> {
    Geometry::build(spec).map(Arc::new)
}

impl Geometry {
    pub fn build(spec: GeometrySpec) -> Result<Geometry> {
        let n = spec.subdivisions;
        if n < 4 {
            return Err(Error::Geometry(format!(
                "need at least 4 subdivisions per side, got {n}"
            )));
        }
        if !(spec.side > 0.0) {
            return Err(Error::Geometry("box side must be positive".into()));
        }
        if spec.torus_factor < 2 {
            return Err(Error::Geometry(
                "torus factor must be at least 2 for zero extension".into(),
            ));
        }
        let h = spec.side / n as f64;
        let tol = 1e-12 * spec.side;
        for d in 0..DIM {
            if spec.omega0_lo[d] >= spec.omega0_hi[d]
                || spec.omega0_lo[d] < -tol
                || spec.omega0_hi[d] > spec.side + tol
            {
                return Err(Error::Geometry(format!(
                    "inner region box invalid along axis {d}"
                )));
            }
        }

        let m = n + 1;
        let total = m * m * m;
        let mut interior = Vec::new();
        let mut boundary = Vec::new();
        let mut omega0 = Vec::new();
        let mut omega1 = Vec::new();
        let idx = |i: usize, j: usize, k: usize| (i * m + j) * m + k;

        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let id = idx(i, j, k);
                    let on_boundary = i == 0 || i == n || j == 0 || j == n || k == 0 || k == n;
                    if on_boundary {
                        boundary.push(id);
                    } else {
                        interior.push(id);
                        let x = [i as f64 * h, j as f64 * h, k as f64 * h];
                        let inside0 = (0..DIM).all(|d| {
                            x[d] >= spec.omega0_lo[d] - tol && x[d] <= spec.omega0_hi[d] + tol
                        });
                        if inside0 {
                            omega0.push(id);
                        } else {
                            omega1.push(id);
                        }
                    }
                }
            }
        }

        if omega0.is_empty() {
            return Err(Error::Geometry("inner region contains no grid nodes".into()));
        }

        let interior = NodeSet::from_ids(interior, total);
        let boundary = NodeSet::from_ids(boundary, total);
        let omega0 = NodeSet::from_ids(omega0, total);
        let omega1 = NodeSet::from_ids(omega1, total);

        // 2h margin between the inner region and the boundary.
        let mut min_dist = f64::INFINITY;
        for &id in omega0.ids() {
            let (i, j, k) = Geometry::unpack(id, m);
            let x = [i as f64 * h, j as f64 * h, k as f64 * h];
            for d in 0..DIM {
                min_dist = min_dist.min(x[d]).min(spec.side - x[d]);
            }
        }
        if min_dist < 2.0 * h - tol {
            return Err(Error::MarginViolated {
                found: min_dist,
                required: 2.0 * h,
            });
        }

        // Shell connectivity (6-neighbor BFS over interior \ omega0).
        if !omega1.is_empty() {
            let start = omega1.ids()[0];
            let mut seen = vec![false; total];
            let mut stack = vec![start];
            seen[start] = true;
            let mut count = 1usize;
            while let Some(id) = stack.pop() {
                let (i, j, k) = Geometry::unpack(id, m);
                let mut push = |ni: i64, nj: i64, nk: i64| {
                    if ni < 0 || nj < 0 || nk < 0 {
                        return;
                    }
                    let (ni, nj, nk) = (ni as usize, nj as usize, nk as usize);
                    if ni >= m || nj >= m || nk >= m {
                        return;
                    }
                    let nid = idx(ni, nj, nk);
                    if !seen[nid] && omega1.contains(nid) {
                        seen[nid] = true;
                        count += 1;
                        stack.push(nid);
                    }
                };
                let (i, j, k) = (i as i64, j as i64, k as i64);
                push(i - 1, j, k);
                push(i + 1, j, k);
                push(i, j - 1, k);
                push(i, j + 1, k);
                push(i, j, k - 1);
                push(i, j, k + 1);
            }
            if count != omega1.len() {
                return Err(Error::ShellDisconnected);
            }
        }

        // Face membership and patches.
        let mut faces_of = Vec::with_capacity(boundary.len());
        for &id in boundary.ids() {
            let (i, j, k) = Geometry::unpack(id, m);
            let mut faces = Vec::new();
            if i == 0 {
                faces.push(Face::XLo);
            }
            if i == n {
                faces.push(Face::XHi);
            }
            if j == 0 {
                faces.push(Face::YLo);
            }
            if j == n {
                faces.push(Face::YHi);
            }
            if k == 0 {
                faces.push(Face::ZLo);
            }
            if k == n {
                faces.push(Face::ZHi);
            }
            faces_of.push(faces);
        }

        let patch_nodes = |p: &PatchSpec| -> Vec<usize> {
            boundary
                .ids()
                .iter()
                .enumerate()
                .filter(|(b, &id)| {
                    let (i, j, k) = Geometry::unpack(id, m);
                    let x = [i as f64 * h, j as f64 * h, k as f64 * h];
                    p.contains(&faces_of[*b], x, tol)
                })
                .map(|(b, _)| b)
                .collect()
        };
        let gamma = patch_nodes(&spec.gamma);
        let sigma = patch_nodes(&spec.sigma);
        if gamma.is_empty() {
            return Err(Error::PatchEmpty("gamma"));
        }
        if sigma.is_empty() {
            return Err(Error::PatchEmpty("sigma"));
        }

        Ok(Geometry {
            spec,
            h,
            nodes_per_side: m,
            interior,
            boundary,
            omega0,
            omega1,
            gamma,
            sigma,
            faces_of,
        })
    }

    fn unpack(id: usize, m: usize) -> (usize, usize, usize) {
        (id / (m * m), (id / m) % m, id % m)
    }

    pub fn spec(&self) -> &GeometrySpec {
        &self.spec
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn side(&self) -> f64 {
        self.spec.side
    }

    /// Grid subdivisions per side.
    pub fn n(&self) -> usize {
        self.spec.subdivisions
    }

    /// Nodes per side (subdivisions + 1).
    pub fn nodes_per_side(&self) -> usize {
        self.nodes_per_side
    }

    /// Volume element `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(DIM as i32)
    }

    /// Surface element `h^(n-1)`.
    pub fn cell_area(&self) -> f64 {
        self.h.powi(DIM as i32 - 1)
    }

    pub fn node_id(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.nodes_per_side + j) * self.nodes_per_side + k
    }

    pub fn node_coords(&self, id: usize) -> (usize, usize, usize) {
        Geometry::unpack(id, self.nodes_per_side)
    }

    pub fn node_position(&self, id: usize) -> [f64; 3] {
        let (i, j, k) = self.node_coords(id);
        [i as f64 * self.h, j as f64 * self.h, k as f64 * self.h]
    }

    pub fn interior(&self) -> &NodeSet {
        &self.interior
    }

    pub fn boundary(&self) -> &NodeSet {
        &self.boundary
    }

    pub fn omega0(&self) -> &NodeSet {
        &self.omega0
    }

    pub fn omega1(&self) -> &NodeSet {
        &self.omega1
    }

    /// Gamma patch as positions into the boundary node list.
    pub fn gamma(&self) -> &[usize] {
        &self.gamma
    }

    /// Sigma patch as positions into the boundary node list.
    pub fn sigma(&self) -> &[usize] {
        &self.sigma
    }

    pub fn sigma_is_whole_boundary(&self) -> bool {
        self.sigma.len() == self.boundary.len()
    }

    pub fn gamma_is_whole_boundary(&self) -> bool {
        self.gamma.len() == self.boundary.len()
    }

    /// Faces containing the boundary node at the given boundary position.
    pub fn faces_of_boundary_node(&self, b: usize) -> &[Face] {
        &self.faces_of[b]
    }

    /// Whether the boundary node lies in the interior of exactly one face.
    pub fn is_face_interior(&self, b: usize) -> bool {
        self.faces_of[b].len() == 1
    }

    /// Number of nodes per side of the enclosing torus grid.
    pub fn torus_m(&self) -> usize {
        self.spec.torus_factor * self.spec.subdivisions
    }

    /// Side length of the enclosing torus.
    pub fn torus_side(&self) -> f64 {
        self.spec.torus_factor as f64 * self.spec.side
    }

    /// Total number of torus grid nodes.
    pub fn torus_len(&self) -> usize {
        let m = self.torus_m();
        m * m * m
    }

    /// Torus linear index of a box node (the box occupies the torus corner).
    pub fn torus_index_of_node(&self, id: usize) -> usize {
        let (i, j, k) = self.node_coords(id);
        let mt = self.torus_m();
        (i * mt + j) * mt + k
    }

    /// Bounding box of the inner region inflated by `2h`, clamped to the box.
    pub fn inflated_inner_box(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for d in 0..DIM {
            lo[d] = (self.spec.omega0_lo[d] - 2.0 * self.h).max(0.0);
            hi[d] = (self.spec.omega0_hi[d] + 2.0 * self.h).min(self.spec.side);
        }
        (lo, hi)
    }

    /// Deterministic identifier of the geometry (hash of the spec layout).
    pub fn id(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        self.spec.subdivisions.hash(&mut hasher);
        self.spec.side.to_bits().hash(&mut hasher);
        for d in 0..DIM {
            self.spec.omega0_lo[d].to_bits().hash(&mut hasher);
            self.spec.omega0_hi[d].to_bits().hash(&mut hasher);
        }
        self.gamma.hash(&mut hasher);
        self.sigma.hash(&mut hasher);
        hasher.finish()
    }
}
