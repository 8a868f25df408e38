//! Affine triangle geometry and the P1/P2 Lagrange shape functions.
//!
//! P2 local numbering: vertices 0, 1, 2, then midpoints of edges (0,1), (1,2), (2,0).

use crate::mesh::Point;

#[derive(Clone, Copy, Debug)]
pub struct Triangle {
    pub pts: [Point; 3],
    pub area: f64,
    /// Gradients of the barycentric coordinates (constant on the triangle).
    pub grad_bary: [[f64; 2]; 3],
}

impl Triangle {
    pub fn new(pts: [Point; 3]) -> Self {
        let [p0, p1, p2] = pts;
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let inv = 1.0 / det;
        let grad_bary = [
            [(p1[1] - p2[1]) * inv, (p2[0] - p1[0]) * inv],
            [(p2[1] - p0[1]) * inv, (p0[0] - p2[0]) * inv],
            [(p0[1] - p1[1]) * inv, (p1[0] - p0[0]) * inv],
        ];
        Self { pts, area: 0.5 * det, grad_bary }
    }

    pub fn point(&self, bary: [f64; 3]) -> Point {
        let [p0, p1, p2] = self.pts;
        [
            bary[0] * p0[0] + bary[1] * p1[0] + bary[2] * p2[0],
            bary[0] * p0[1] + bary[1] * p1[1] + bary[2] * p2[1],
        ]
    }

    /// Barycentric coordinates of a point.
    pub fn bary(&self, p: Point) -> [f64; 3] {
        let p0 = self.pts[0];
        let d = [p[0] - p0[0], p[1] - p0[1]];
        let l1 = self.grad_bary[1][0] * d[0] + self.grad_bary[1][1] * d[1];
        let l2 = self.grad_bary[2][0] * d[0] + self.grad_bary[2][1] * d[1];
        [1.0 - l1 - l2, l1, l2]
    }

    pub fn centroid(&self) -> Point {
        self.point([1.0 / 3.0; 3])
    }
}

/// Local vertex pairs of the P2 edge nodes.
pub const P2_EDGE_NODES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

pub fn p1_values(l: [f64; 3]) -> [f64; 3] {
    l
}

pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

pub fn p2_gradients(tri: &Triangle, l: [f64; 3]) -> [[f64; 2]; 6] {
    let g = &tri.grad_bary;
    let mut out = [[0.0; 2]; 6];
    for i in 0..3 {
        let s = 4.0 * l[i] - 1.0;
        out[i] = [s * g[i][0], s * g[i][1]];
    }
    for (k, &[a, b]) in P2_EDGE_NODES.iter().enumerate() {
        out[3 + k] = [
            4.0 * (l[a] * g[b][0] + l[b] * g[a][0]),
            4.0 * (l[a] * g[b][1] + l[b] * g[a][1]),
        ];
    }
    out
}

/// Nodal barycentric coordinates of the six P2 nodes.
pub fn p2_nodes() -> [[f64; 3]; 6] {
    [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.5, 0.5, 0.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p2_is_nodal_and_partition_of_unity() {
        for (i, n) in p2_nodes().iter().enumerate() {
            let v = p2_values(*n);
            for (j, vj) in v.iter().enumerate() {
                assert!((vj - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
        let tri = Triangle::new([[0.1, 0.2], [1.3, 0.4], [0.5, 1.1]]);
        let l = [0.2, 0.3, 0.5];
        assert!((p2_values(l).iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let g = p2_gradients(&tri, l);
        let sx: f64 = g.iter().map(|v| v[0]).sum();
        let sy: f64 = g.iter().map(|v| v[1]).sum();
        assert!(sx.abs() < 1e-13 && sy.abs() < 1e-13);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let tri = Triangle::new([[0.0, 0.0], [1.0, 0.2], [0.3, 0.9]]);
        let p = [0.4, 0.3];
        let h = 1e-6;
        let g = p2_gradients(&tri, tri.bary(p));
        for k in 0..6 {
            let fx = (p2_values(tri.bary([p[0] + h, p[1]]))[k] - p2_values(tri.bary([p[0] - h, p[1]]))[k]) / (2.0 * h);
            let fy = (p2_values(tri.bary([p[0], p[1] + h]))[k] - p2_values(tri.bary([p[0], p[1] - h]))[k]) / (2.0 * h);
            assert!((fx - g[k][0]).abs() < 1e-7 && (fy - g[k][1]).abs() < 1e-7);
        }
    }
}
