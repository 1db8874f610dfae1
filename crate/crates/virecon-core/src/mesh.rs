//! Conforming 2D triangulations of rectangles with newest-vertex bisection.
//!
//! Triangles are stored as vertex triples `[peak, a, b]` in counterclockwise
//! order, where `(a, b)` is the refinement edge: bisection inserts the
//! midpoint of `(a, b)` and the midpoint becomes the peak of both children.
//! Root triangles get their longest edge as refinement edge, which for the
//! structured generator is the cell diagonal; the two triangles of a cell
//! then share their refinement edge, so closure terminates and repeated
//! uniform bisection reproduces self-similar element shapes.
//!
//! Meshes are immutable after construction. `refine` returns a new mesh and
//! records, for every ancestor in the refinement lineage, an element-to-
//! ancestor-element map, which is what nested-space prolongation needs.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::error::{invalid, Result};
use crate::math;

static NEXT_MESH_UID: AtomicU64 = AtomicU64::new(1);

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub const UNIT: Rect = Rect {
        x0: 0.0,
        y0: 0.0,
        x1: 1.0,
        y1: 1.0,
    };

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diameter(&self) -> f64 {
        math::hypot(self.width(), self.height())
    }
}

/// Which elements to bisect.
#[derive(Debug, Clone)]
pub enum Marks<'a> {
    /// Bisect every element once (plus closure).
    All,
    /// Bisect the listed elements (plus closure).
    Elements(&'a [usize]),
}

/// Conforming triangulation with full edge topology.
#[derive(Debug, Clone)]
pub struct Mesh {
    uid: u64,
    vertices: Vec<[f64; 2]>,
    /// `[peak, a, b]`, counterclockwise; refinement edge is `(a, b)`.
    triangles: Vec<[usize; 3]>,
    /// Deduplicated edges as sorted vertex pairs.
    edges: Vec<[usize; 2]>,
    /// Adjacent elements per edge; boundary edges have one.
    edge_elements: Vec<(usize, Option<usize>)>,
    /// Edge opposite local vertex `i` of each triangle.
    element_edges: Vec<[usize; 3]>,
    boundary_vertex: Vec<bool>,
    boundary_edge: Vec<bool>,
    h_k: Vec<f64>,
    h_e: Vec<f64>,
    domain: Rect,
    /// For every ancestor mesh uid, the ancestor element of each element.
    ancestry: BTreeMap<u64, Vec<usize>>,
}

impl Mesh {
    /// Structured mesh of an `n x n` grid, each cell split along the
    /// diagonal from its lower-left to its upper-right corner.
    pub fn structured(n: usize, domain: Rect) -> Result<Mesh> {
        if n == 0 {
            return Err(invalid("structured mesh needs n >= 1"));
        }
        if !(domain.width() > 0.0) || !(domain.height() > 0.0) {
            return Err(invalid("degenerate domain rectangle"));
        }
        let np = n + 1;
        let dx = domain.width() / n as f64;
        let dy = domain.height() / n as f64;
        let mut vertices = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                vertices.push([domain.x0 + i as f64 * dx, domain.y0 + j as f64 * dy]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let a = j * np + i;
                let b = a + 1;
                let c = b + np;
                let d = a + np;
                // Diagonal (a, c) is the longest edge of both triangles and
                // becomes their shared refinement edge.
                triangles.push([b, c, a]);
                triangles.push([d, a, c]);
            }
        }
        Mesh::from_parts(vertices, triangles, domain)
    }

    /// Assemble a mesh from raw vertices and triangles.
    ///
    /// Triangles may be given in any vertex order; they are rotated so the
    /// longest edge becomes the refinement edge, and flipped to
    /// counterclockwise orientation if needed.
    pub fn from_parts(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        domain: Rect,
    ) -> Result<Mesh> {
        let mut oriented = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut v = *tri;
            for &id in &v {
                if id >= vertices.len() {
                    return Err(invalid(format!("triangle {t} references missing vertex")));
                }
            }
            if signed_area(&vertices, &v) < 0.0 {
                v.swap(1, 2);
            }
            if signed_area(&vertices, &v) <= 0.0 {
                return Err(invalid(format!("triangle {t} is degenerate")));
            }
            // Rotate the longest edge into refinement position (opposite v[0]).
            let mut best = 0usize;
            let mut best_len = -1.0;
            for i in 0..3 {
                let p = vertices[v[(i + 1) % 3]];
                let q = vertices[v[(i + 2) % 3]];
                let len = math::hypot(q[0] - p[0], q[1] - p[1]);
                if len > best_len {
                    best_len = len;
                    best = i;
                }
            }
            v.rotate_left(best);
            oriented.push(v);
        }
        Mesh::build(vertices, oriented, domain, BTreeMap::new())
    }

    fn build(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        domain: Rect,
        ancestry: BTreeMap<u64, Vec<usize>>,
    ) -> Result<Mesh> {
        let mut edge_ids: BTreeMap<[usize; 2], usize> = BTreeMap::new();
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut edge_elements: Vec<(usize, Option<usize>)> = Vec::new();
        let mut element_edges = vec![[usize::MAX; 3]; triangles.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for i in 0..3 {
                let p = tri[(i + 1) % 3];
                let q = tri[(i + 2) % 3];
                let key = [p.min(q), p.max(q)];
                let id = match edge_ids.get(&key) {
                    Some(&id) => {
                        if edge_elements[id].1.is_some() {
                            return Err(invalid(format!(
                                "edge ({}, {}) shared by more than two triangles",
                                key[0], key[1]
                            )));
                        }
                        edge_elements[id].1 = Some(t);
                        id
                    }
                    None => {
                        let id = edges.len();
                        edge_ids.insert(key, id);
                        edges.push(key);
                        edge_elements.push((t, None));
                        id
                    }
                };
                element_edges[t][i] = id;
            }
        }
        let boundary_edge: Vec<bool> = edge_elements.iter().map(|e| e.1.is_none()).collect();
        let mut boundary_vertex = vec![false; vertices.len()];
        for (e, edge) in edges.iter().enumerate() {
            if boundary_edge[e] {
                boundary_vertex[edge[0]] = true;
                boundary_vertex[edge[1]] = true;
            }
        }
        let h_e: Vec<f64> = edges
            .iter()
            .map(|e| {
                let p = vertices[e[0]];
                let q = vertices[e[1]];
                math::hypot(q[0] - p[0], q[1] - p[1])
            })
            .collect();
        let h_k: Vec<f64> = element_edges
            .iter()
            .map(|es| es.iter().map(|&e| h_e[e]).fold(0.0, f64::max))
            .collect();
        let mesh = Mesh {
            uid: NEXT_MESH_UID.fetch_add(1, Ordering::Relaxed),
            vertices,
            triangles,
            edges,
            edge_elements,
            element_edges,
            boundary_vertex,
            boundary_edge,
            h_k,
            h_e,
            domain,
            ancestry,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Newest-vertex bisection of the marked elements plus conforming closure.
    pub fn refine(&self, marks: Marks<'_>) -> Result<Mesh> {
        #[derive(Clone)]
        struct WorkTri {
            v: [usize; 3],
            ancestor: usize,
            alive: bool,
        }

        let mut verts = self.vertices.clone();
        let mut tris: Vec<WorkTri> = self
            .triangles
            .iter()
            .enumerate()
            .map(|(t, &v)| WorkTri {
                v,
                ancestor: t,
                alive: true,
            })
            .collect();
        let mut midpoint: BTreeMap<[usize; 2], usize> = BTreeMap::new();

        let mut pending: BTreeSet<usize> = match marks {
            Marks::All => (0..tris.len()).collect(),
            Marks::Elements(ids) => {
                for &id in ids {
                    if id >= self.triangles.len() {
                        return Err(invalid(format!("marked element {id} does not exist")));
                    }
                }
                ids.iter().copied().collect()
            }
        };

        loop {
            if pending.is_empty() {
                // Closure scan: any live triangle with a bisected edge must split.
                for (t, tri) in tris.iter().enumerate() {
                    if !tri.alive {
                        continue;
                    }
                    for i in 0..3 {
                        let p = tri.v[(i + 1) % 3];
                        let q = tri.v[(i + 2) % 3];
                        if midpoint.contains_key(&[p.min(q), p.max(q)]) {
                            pending.insert(t);
                            break;
                        }
                    }
                }
                if pending.is_empty() {
                    break;
                }
            }
            let work: Vec<usize> = pending.iter().copied().collect();
            pending.clear();
            for t in work {
                if !tris[t].alive {
                    continue;
                }
                let [peak, a, b] = tris[t].v;
                let key = [a.min(b), a.max(b)];
                let m = *midpoint.entry(key).or_insert_with(|| {
                    let pa = verts[a];
                    let pb = verts[b];
                    verts.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                    verts.len() - 1
                });
                let ancestor = tris[t].ancestor;
                tris[t].alive = false;
                tris.push(WorkTri {
                    v: [m, peak, a],
                    ancestor,
                    alive: true,
                });
                tris.push(WorkTri {
                    v: [m, b, peak],
                    ancestor,
                    alive: true,
                });
            }
        }

        let mut triangles = Vec::new();
        let mut ancestor_of = Vec::new();
        for tri in &tris {
            if tri.alive {
                triangles.push(tri.v);
                ancestor_of.push(tri.ancestor);
            }
        }
        let mut ancestry = BTreeMap::new();
        ancestry.insert(self.uid, ancestor_of.clone());
        for (uid, map) in &self.ancestry {
            ancestry.insert(*uid, ancestor_of.iter().map(|&a| map[a]).collect());
        }
        Mesh::build(verts, triangles, self.domain, ancestry)
    }

    /// Structural invariants: orientation, positive areas, edge sharing,
    /// h_e <= h_K, and area sum against the domain rectangle.
    pub fn validate(&self) -> Result<()> {
        let mut area_sum = 0.0;
        for t in 0..self.triangles.len() {
            let a = signed_area(&self.vertices, &self.triangles[t]);
            if !(a > 0.0) {
                return Err(invalid(format!(
                    "triangle {t} has non-positive area {a:e}"
                )));
            }
            area_sum += a;
            for &e in &self.element_edges[t] {
                if self.h_e[e] > self.h_k[t] * (1.0 + 1e-14) {
                    return Err(invalid(format!("edge longer than element diameter at {t}")));
                }
            }
        }
        let rel = math::abs(area_sum - self.domain.area()) / self.domain.area();
        if rel > 1e-12 {
            return Err(invalid(format!(
                "triangle areas sum to {area_sum}, domain area {} (rel err {rel:e})",
                self.domain.area()
            )));
        }
        for (e, adj) in self.edge_elements.iter().enumerate() {
            let n = 1 + adj.1.is_some() as usize;
            if self.boundary_edge[e] != (n == 1) {
                return Err(invalid(format!("edge {e} boundary flag inconsistent")));
            }
        }
        Ok(())
    }

    /// Exhaustive conformity check: no vertex may lie strictly inside any
    /// edge. Quadratic cost, intended for tests and `selftest`.
    pub fn validate_conforming(&self) -> Result<()> {
        self.validate()?;
        for (e, edge) in self.edges.iter().enumerate() {
            let p = self.vertices[edge[0]];
            let q = self.vertices[edge[1]];
            let len = self.h_e[e];
            for (v, x) in self.vertices.iter().enumerate() {
                if v == edge[0] || v == edge[1] {
                    continue;
                }
                let cross = (q[0] - p[0]) * (x[1] - p[1]) - (q[1] - p[1]) * (x[0] - p[0]);
                if math::abs(cross) > 1e-12 * len * len {
                    continue;
                }
                let dot = (x[0] - p[0]) * (q[0] - p[0]) + (x[1] - p[1]) * (q[1] - p[1]);
                if dot > 1e-12 * len * len && dot < len * len * (1.0 - 1e-12) {
                    return Err(invalid(format!("vertex {v} hangs on edge {e}")));
                }
            }
        }
        Ok(())
    }

    pub fn uid(&self) -> u64 {
        self.uid
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex(&self, v: usize) -> [f64; 2] {
        self.vertices[v]
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn edge(&self, e: usize) -> [usize; 2] {
        self.edges[e]
    }

    pub fn edge_elements(&self, e: usize) -> (usize, Option<usize>) {
        self.edge_elements[e]
    }

    pub fn element_edges(&self, t: usize) -> [usize; 3] {
        self.element_edges[t]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.boundary_edge[e]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    /// Element diameter (longest edge).
    pub fn h_k(&self, t: usize) -> f64 {
        self.h_k[t]
    }

    /// Edge length.
    pub fn h_e(&self, e: usize) -> f64 {
        self.h_e[e]
    }

    /// Largest element diameter.
    pub fn max_h(&self) -> f64 {
        self.h_k.iter().copied().fold(0.0, f64::max)
    }

    pub fn element_area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, &self.triangles[t])
    }

    pub fn element_vertices(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn element_centroid(&self, t: usize) -> [f64; 2] {
        let [p, q, r] = self.element_vertices(t);
        [
            (p[0] + q[0] + r[0]) / 3.0,
            (p[1] + q[1] + r[1]) / 3.0,
        ]
    }

    /// Per-element ancestor ids in the mesh with the given uid, if this mesh
    /// descends from it (identity for the mesh itself).
    pub fn ancestors_in(&self, ancestor_uid: u64) -> Option<Vec<usize>> {
        if ancestor_uid == self.uid {
            return Some((0..self.triangles.len()).collect());
        }
        self.ancestry.get(&ancestor_uid).cloned()
    }

    pub fn descends_from(&self, ancestor_uid: u64) -> bool {
        ancestor_uid == self.uid || self.ancestry.contains_key(&ancestor_uid)
    }
}

/// `(h_K per element, h_e per edge, max_h)` of a mesh.
pub fn mesh_metrics(mesh: &Mesh) -> (Vec<f64>, Vec<f64>, f64) {
    (mesh.h_k.clone(), mesh.h_e.clone(), mesh.max_h())
}

fn signed_area(vertices: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let p = vertices[tri[0]];
    let q = vertices[tri[1]];
    let r = vertices[tri[2]];
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))
}
