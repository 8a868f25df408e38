//! Conforming triangle meshes with tagged boundary edges.

mod format;
mod generate;

use std::collections::HashMap;
use std::path::PathBuf;

pub use format::{load_mesh, mesh_from_text, mesh_to_text, save_mesh};
pub use generate::{generate_offset_annulus, generate_unit_square};

use crate::error::{Error, Result};
use crate::io::Fingerprint;

pub type Point = [f64; 2];

/// Marker for "no second triangle" in edge adjacency.
pub const NONE: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Outer,
    Inner,
    Other,
}

impl BoundaryTag {
    pub fn code(self) -> u8 {
        match self {
            BoundaryTag::Outer => 0,
            BoundaryTag::Inner => 1,
            BoundaryTag::Other => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(BoundaryTag::Outer),
            1 => Some(BoundaryTag::Inner),
            2 => Some(BoundaryTag::Other),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub v: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DomainKind {
    OffsetAnnulus,
    UnitSquare,
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub r1: f64,
    pub r2: f64,
    pub c1: f64,
    pub c2: f64,
    pub refinement: usize,
}

impl DomainSpec {
    /// Unit outer disk with an off-center inner disk of radius 0.1 at (0.5, 0).
    pub fn offset_annulus(refinement: usize) -> Self {
        Self { kind: DomainKind::OffsetAnnulus, r1: 1.0, r2: 0.1, c1: 0.5, c2: 0.0, refinement }
    }

    pub fn unit_square(refinement: usize) -> Self {
        Self { kind: DomainKind::UnitSquare, r1: 0.0, r2: 0.0, c1: 0.0, c2: 0.0, refinement }
    }

    pub fn inner_center(&self) -> Point {
        [self.c1, self.c2]
    }

    pub fn validate(&self) -> Result<()> {
        if self.refinement == 0 {
            return Err(Error::InvalidSpec("refinement must be at least 1".into()));
        }
        if self.kind == DomainKind::OffsetAnnulus {
            let ok = [self.r1, self.r2, self.c1, self.c2].iter().all(|v| v.is_finite());
            if !ok || self.r2 <= 0.0 || self.r1 <= 0.0 {
                return Err(Error::InvalidSpec("radii must be positive and finite".into()));
            }
            if self.r2 >= self.r1 {
                return Err(Error::InvalidSpec(format!("r2 = {} must be below r1 = {}", self.r2, self.r1)));
            }
            if self.c1.hypot(self.c2) + self.r2 >= self.r1 {
                return Err(Error::InvalidSpec("inner disk is not strictly inside the outer disk".into()));
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Mesh> {
        match &self.kind {
            DomainKind::OffsetAnnulus => generate_offset_annulus(self),
            DomainKind::UnitSquare => {
                self.validate()?;
                Ok(generate_unit_square(self.refinement))
            }
            DomainKind::File(p) => load_mesh(p),
        }
    }
}

/// Immutable triangulation. Local edge `k` of a triangle joins local vertices `k` and `(k+1) % 3`.
#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    edges: Vec<[usize; 2]>,
    tri_edges: Vec<[usize; 3]>,
    edge_tris: Vec<[usize; 2]>,
    edge_tag: Vec<Option<BoundaryTag>>,
    boundary_edge_index: Vec<usize>,
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices
            && self.triangles == other.triangles
            && self.boundary_edges == other.boundary_edges
    }
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Smallest interior angle of a triangle in radians.
pub fn min_angle(a: Point, b: Point, c: Point) -> f64 {
    let pts = [a, b, c];
    let mut best = f64::INFINITY;
    for k in 0..3 {
        let p = pts[k];
        let q = pts[(k + 1) % 3];
        let r = pts[(k + 2) % 3];
        let u = [q[0] - p[0], q[1] - p[1]];
        let v = [r[0] - p[0], r[1] - p[1]];
        let cross = u[0] * v[1] - u[1] * v[0];
        let dotp = u[0] * v[0] + u[1] * v[1];
        best = best.min(cross.abs().atan2(dotp));
    }
    best
}

impl Mesh {
    /// Builds and validates a mesh.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, boundary_edges: Vec<BoundaryEdge>) -> Result<Self> {
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::InvariantViolation {
                    invariant: "index range",
                    detail: format!("triangle {t} references a vertex outside [0, {nv})"),
                });
            }
        }
        for (e, be) in boundary_edges.iter().enumerate() {
            if be.v.iter().any(|&v| v >= nv) {
                return Err(Error::InvariantViolation {
                    invariant: "index range",
                    detail: format!("boundary edge {e} references a vertex outside [0, {nv})"),
                });
            }
        }
        if vertices.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvariantViolation { invariant: "finite coordinates", detail: "non-finite vertex".into() });
        }
        for (t, tri) in triangles.iter().enumerate() {
            let a = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(a > 0.0) {
                return Err(Error::InvariantViolation {
                    invariant: "orientation",
                    detail: format!("triangle {t} has signed area {a:e}"),
                });
            }
        }

        let mut map: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * triangles.len() / 2 + 8);
        let mut edges = Vec::new();
        let mut edge_tris: Vec<[usize; 2]> = Vec::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [0usize; 3];
            for k in 0..3 {
                let kk = key(tri[k], tri[(k + 1) % 3]);
                let e = *map.entry(kk).or_insert_with(|| {
                    edges.push([kk.0, kk.1]);
                    edge_tris.push([NONE, NONE]);
                    edges.len() - 1
                });
                let slot = &mut edge_tris[e];
                if slot[0] == NONE {
                    slot[0] = t;
                } else if slot[1] == NONE {
                    slot[1] = t;
                } else {
                    return Err(Error::InvariantViolation {
                        invariant: "manifoldness",
                        detail: format!("edge {:?} shared by more than two triangles", kk),
                    });
                }
                te[k] = e;
            }
            tri_edges.push(te);
        }

        let mut edge_tag = vec![None; edges.len()];
        let mut boundary_edge_index = Vec::with_capacity(boundary_edges.len());
        for (i, be) in boundary_edges.iter().enumerate() {
            let e = *map.get(&key(be.v[0], be.v[1])).ok_or_else(|| Error::InvariantViolation {
                invariant: "manifoldness",
                detail: format!("boundary edge {i} {:?} is not a triangle edge", be.v),
            })?;
            if edge_tris[e][1] != NONE {
                return Err(Error::InvariantViolation {
                    invariant: "manifoldness",
                    detail: format!("boundary edge {i} {:?} belongs to two triangles", be.v),
                });
            }
            if edge_tag[e].is_some() {
                return Err(Error::InvariantViolation {
                    invariant: "manifoldness",
                    detail: format!("boundary edge {:?} listed twice", be.v),
                });
            }
            edge_tag[e] = Some(be.tag);
            boundary_edge_index.push(e);
        }
        for (e, tris) in edge_tris.iter().enumerate() {
            if tris[1] == NONE && edge_tag[e].is_none() {
                return Err(Error::InvariantViolation {
                    invariant: "manifoldness",
                    detail: format!("edge {:?} has one triangle but is not a boundary edge", edges[e]),
                });
            }
        }

        for tag in [BoundaryTag::Outer, BoundaryTag::Inner] {
            let mut degree: HashMap<usize, usize> = HashMap::new();
            for be in boundary_edges.iter().filter(|b| b.tag == tag) {
                *degree.entry(be.v[0]).or_default() += 1;
                *degree.entry(be.v[1]).or_default() += 1;
            }
            if let Some((v, d)) = degree.iter().find(|(_, &d)| d != 2) {
                return Err(Error::InvariantViolation {
                    invariant: "closed boundary loops",
                    detail: format!("vertex {v} has {d} incident {tag:?} edges"),
                });
            }
        }

        Ok(Self { vertices, triangles, boundary_edges, edges, tri_edges, edge_tris, edge_tag, boundary_edge_index })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Global edge ids of the three local edges of triangle `t`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    /// The one or two triangles sharing edge `e` (`NONE` in the second slot on the boundary).
    pub fn edge_triangles(&self, e: usize) -> [usize; 2] {
        self.edge_tris[e]
    }

    pub fn edge_tag(&self, e: usize) -> Option<BoundaryTag> {
        self.edge_tag[e]
    }

    pub fn num_interior_edges(&self) -> usize {
        self.edge_tris.iter().filter(|t| t[1] != NONE).count()
    }

    /// Neighbor across each local edge of triangle `t`.
    pub fn triangle_neighbors(&self, t: usize) -> [Option<usize>; 3] {
        let te = self.tri_edges[t];
        te.map(|e| {
            let [a, b] = self.edge_tris[e];
            let other = if a == t { b } else { a };
            (other != NONE).then_some(other)
        })
    }

    /// Owner triangle and local edge index of boundary edge `i`, oriented so the
    /// domain lies to the left of `(start, end)`.
    pub fn boundary_edge_owner(&self, i: usize) -> (usize, usize, [usize; 2]) {
        let e = self.boundary_edge_index[i];
        let t = self.edge_tris[e][0];
        let te = self.tri_edges[t];
        let k = te.iter().position(|&x| x == e).unwrap();
        let tri = self.triangles[t];
        (t, k, [tri[k], tri[(k + 1) % 3]])
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let tri = self.triangles[t];
        [self.vertices[tri[0]], self.vertices[tri[1]], self.vertices[tri[2]]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn min_angle_degrees(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| {
                let [a, b, c] = self.triangle_points(t);
                min_angle(a, b, c)
            })
            .fold(f64::INFINITY, f64::min)
            .to_degrees()
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edges
            .iter()
            .map(|&[a, b]| {
                let p = self.vertices[a];
                let q = self.vertices[b];
                (p[0] - q[0]).hypot(p[1] - q[1])
            })
            .fold(0.0, f64::max)
    }

    /// Vertices touched by a boundary edge carrying one of `tags`.
    pub fn boundary_vertices(&self, tags: &[BoundaryTag]) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .boundary_edges
            .iter()
            .filter(|b| tags.contains(&b.tag))
            .flat_map(|b| b.v)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn fingerprint(&self) -> String {
        let mut f = Fingerprint::new();
        f.usizes(&[self.vertices.len(), self.triangles.len(), self.boundary_edges.len()]);
        for p in &self.vertices {
            f.f64s(p);
        }
        for t in &self.triangles {
            f.usizes(t);
        }
        for b in &self.boundary_edges {
            f.usizes(&b.v).bytes(&[b.tag.code()]);
        }
        f.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_clockwise_triangle() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let be = vec![
            BoundaryEdge { v: [0, 1], tag: BoundaryTag::Outer },
            BoundaryEdge { v: [1, 2], tag: BoundaryTag::Outer },
            BoundaryEdge { v: [2, 0], tag: BoundaryTag::Outer },
        ];
        assert!(Mesh::new(v.clone(), vec![[0, 1, 2]], be.clone()).is_ok());
        let err = Mesh::new(v, vec![[0, 2, 1]], be).unwrap_err();
        assert!(matches!(err, Error::InvariantViolation { invariant: "orientation", .. }));
    }

    #[test]
    fn min_angle_of_right_isosceles() {
        let a = min_angle([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]);
        assert!((a - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }
}
