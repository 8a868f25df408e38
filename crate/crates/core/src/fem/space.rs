//! Degree-of-freedom maps for the vector P2 velocity and scalar P1 pressure spaces.
//!
//! Vector P2 dofs are blocked by component: dof `c * n_scalar + s` is component `c`
//! of scalar node `s`. Scalar P2 nodes are the mesh vertices followed by one node per edge.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::element::{p2_gradients, p2_values, Triangle};
use crate::mesh::{BoundaryTag, Mesh, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceKind {
    P2Vector,
    P1Scalar,
}

#[derive(Clone, Debug)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    kind: SpaceKind,
    n_scalar: usize,
    nodes_per_cell: usize,
    scalar_cells: Vec<usize>,
    coords: Vec<Point>,
    boundary: BTreeMap<BoundaryTag, Vec<usize>>,
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, kind: SpaceKind) -> Self {
        let nv = mesh.num_vertices();
        let (n_scalar, nodes_per_cell) = match kind {
            SpaceKind::P2Vector => (nv + mesh.num_edges(), 6),
            SpaceKind::P1Scalar => (nv, 3),
        };
        let mut scalar_cells = Vec::with_capacity(nodes_per_cell * mesh.num_triangles());
        for (t, tri) in mesh.triangles().iter().enumerate() {
            scalar_cells.extend_from_slice(tri);
            if kind == SpaceKind::P2Vector {
                scalar_cells.extend(mesh.triangle_edges(t).iter().map(|e| nv + e));
            }
        }
        let mut coords: Vec<Point> = mesh.vertices().to_vec();
        if kind == SpaceKind::P2Vector {
            for &[a, b] in mesh.edges() {
                let (p, q) = (mesh.vertices()[a], mesh.vertices()[b]);
                coords.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
            }
        }
        let comps = if kind == SpaceKind::P2Vector { 2 } else { 1 };
        let mut boundary: BTreeMap<BoundaryTag, Vec<usize>> = BTreeMap::new();
        for e in 0..mesh.num_edges() {
            if let Some(tag) = mesh.edge_tag(e) {
                let list = boundary.entry(tag).or_default();
                let [a, b] = mesh.edges()[e];
                let mut nodes = vec![a, b];
                if kind == SpaceKind::P2Vector {
                    nodes.push(nv + e);
                }
                for c in 0..comps {
                    list.extend(nodes.iter().map(|s| c * n_scalar + s));
                }
            }
        }
        for list in boundary.values_mut() {
            list.sort_unstable();
            list.dedup();
        }
        Self { mesh, kind, n_scalar, nodes_per_cell, scalar_cells, coords, boundary }
    }

    pub fn p2_vector(mesh: &Arc<Mesh>) -> Self {
        Self::new(mesh.clone(), SpaceKind::P2Vector)
    }

    pub fn p1_scalar(mesh: &Arc<Mesh>) -> Self {
        Self::new(mesh.clone(), SpaceKind::P1Scalar)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn components(&self) -> usize {
        match self.kind {
            SpaceKind::P2Vector => 2,
            SpaceKind::P1Scalar => 1,
        }
    }

    pub fn scalar_count(&self) -> usize {
        self.n_scalar
    }

    pub fn dof_count(&self) -> usize {
        self.n_scalar * self.components()
    }

    pub fn nodes_per_cell(&self) -> usize {
        self.nodes_per_cell
    }

    /// Scalar node ids of triangle `t`.
    #[inline]
    pub fn scalar_cell(&self, t: usize) -> &[usize] {
        &self.scalar_cells[t * self.nodes_per_cell..(t + 1) * self.nodes_per_cell]
    }

    /// All dofs of triangle `t`, component-blocked (12 for P2 vector, 3 for P1).
    pub fn cell_dofs(&self, t: usize) -> Vec<usize> {
        let s = self.scalar_cell(t);
        (0..self.components()).flat_map(|c| s.iter().map(move |&n| c * self.n_scalar + n)).collect()
    }

    /// Coordinates of scalar node `s`.
    pub fn node_coord(&self, s: usize) -> Point {
        self.coords[s]
    }

    pub fn node_coords(&self) -> &[Point] {
        &self.coords
    }

    /// Coordinate of a (possibly vector) dof.
    pub fn dof_coord(&self, d: usize) -> Point {
        self.coords[d % self.n_scalar]
    }

    pub fn boundary_dofs(&self, tags: &[BoundaryTag]) -> Vec<usize> {
        let mut v: Vec<usize> = tags.iter().filter_map(|t| self.boundary.get(t)).flatten().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Every dof on a tagged boundary edge.
    pub fn all_boundary_dofs(&self) -> Vec<usize> {
        self.boundary_dofs(&[BoundaryTag::Outer, BoundaryTag::Inner, BoundaryTag::Other])
    }

    pub fn triangle(&self, t: usize) -> Triangle {
        Triangle::new(self.mesh.triangle_points(t))
    }

    pub fn interpolate_vector(&self, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
        assert_eq!(self.kind, SpaceKind::P2Vector);
        let mut out = vec![0.0; self.dof_count()];
        for (s, &p) in self.coords.iter().enumerate() {
            let v = f(p);
            out[s] = v[0];
            out[self.n_scalar + s] = v[1];
        }
        out
    }

    pub fn interpolate_scalar(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        assert_eq!(self.kind, SpaceKind::P1Scalar);
        self.coords.iter().map(|&p| f(p)).collect()
    }

    /// Velocity value and gradient `[[du1/dx, du1/dy], [du2/dx, du2/dy]]` at a barycentric point of `t`.
    pub fn eval_vector(&self, coeff: &[f64], t: usize, tri: &Triangle, l: [f64; 3]) -> ([f64; 2], [[f64; 2]; 2]) {
        let v = p2_values(l);
        let g = p2_gradients(tri, l);
        let mut val = [0.0; 2];
        let mut grad = [[0.0; 2]; 2];
        for (k, &s) in self.scalar_cell(t).iter().enumerate() {
            for c in 0..2 {
                let a = coeff[c * self.n_scalar + s];
                val[c] += a * v[k];
                grad[c][0] += a * g[k][0];
                grad[c][1] += a * g[k][1];
            }
        }
        (val, grad)
    }

    /// Pressure value and gradient at a barycentric point of `t`.
    pub fn eval_scalar(&self, coeff: &[f64], t: usize, tri: &Triangle, l: [f64; 3]) -> (f64, [f64; 2]) {
        assert_eq!(self.kind, SpaceKind::P1Scalar);
        let mut val = 0.0;
        let mut grad = [0.0; 2];
        for (k, &s) in self.scalar_cell(t).iter().enumerate() {
            val += coeff[s] * l[k];
            grad[0] += coeff[s] * tri.grad_bary[k][0];
            grad[1] += coeff[s] * tri.grad_bary[k][1];
        }
        (val, grad)
    }
}
