//! Assembly of mass, stiffness, divergence, convection, load and boundary operators.

use super::element::{p2_gradients, p2_values, Triangle};
use super::quadrature::{edge_gauss4, triangle_degree5};
use super::space::{FeSpace, SpaceKind};
use crate::linalg::{CsrMatrix, TripletBuilder};
use crate::mesh::{BoundaryTag, Point};

/// Scalar matrix pattern over one space with a precomputed element-to-value index map.
#[derive(Clone, Debug)]
pub struct ScalarPattern {
    pattern: CsrMatrix<f64>,
    npc: usize,
    elem_pos: Vec<usize>,
}

impl ScalarPattern {
    pub fn new(space: &FeSpace) -> Self {
        let n = space.scalar_count();
        let npc = space.nodes_per_cell();
        let nt = space.mesh().num_triangles();
        let mut b = TripletBuilder::with_capacity(n, n, nt * npc * npc);
        for t in 0..nt {
            let cell = space.scalar_cell(t);
            for &i in cell {
                for &j in cell {
                    b.push(i, j, 0.0);
                }
            }
        }
        let pattern = b.build();
        let mut elem_pos = Vec::with_capacity(nt * npc * npc);
        for t in 0..nt {
            let cell = space.scalar_cell(t);
            for &i in cell {
                for &j in cell {
                    elem_pos.push(pattern.position(i, j).unwrap());
                }
            }
        }
        Self { pattern, npc, elem_pos }
    }

    pub fn pattern(&self) -> &CsrMatrix<f64> {
        &self.pattern
    }

    /// Element `t`'s local entry `(a, b)` lives at value index `positions(t)[a * npc + b]`.
    pub fn positions(&self, t: usize) -> &[usize] {
        let k = self.npc * self.npc;
        &self.elem_pos[t * k..(t + 1) * k]
    }

    /// Sums element matrices (row-major `npc x npc`) into the pattern.
    pub fn assemble(&self, mut local: impl FnMut(usize, &mut [f64])) -> CsrMatrix<f64> {
        let mut out = self.pattern.clone();
        let k = self.npc * self.npc;
        let nt = self.elem_pos.len() / k;
        let mut buf = vec![0.0; k];
        let vals = out.vals_mut();
        for t in 0..nt {
            buf.iter_mut().for_each(|v| *v = 0.0);
            local(t, &mut buf);
            for (p, v) in self.positions(t).iter().zip(&buf) {
                vals[*p] += v;
            }
        }
        out
    }
}

/// Two-component block-diagonal matrix `diag(s, s)`.
pub fn block_diag2(s: &CsrMatrix<f64>) -> CsrMatrix<f64> {
    let n = s.rows();
    let mut row_ptr = Vec::with_capacity(2 * n + 1);
    let mut col_idx = Vec::with_capacity(2 * s.nnz());
    let mut vals = Vec::with_capacity(2 * s.nnz());
    row_ptr.push(0);
    for c in 0..2 {
        for i in 0..n {
            let (cols, v) = s.row(i);
            col_idx.extend(cols.iter().map(|j| c * n + j));
            vals.extend_from_slice(v);
            row_ptr.push(col_idx.len());
        }
    }
    CsrMatrix::from_raw(2 * n, 2 * n, row_ptr, col_idx, vals)
}

/// Applies `diag(s, s)` without forming it.
pub fn apply_block_diag2(s: &CsrMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let n = s.rows();
    let mut y = s.matvec(&x[..n]);
    y.extend(s.matvec(&x[n..]));
    y
}

#[derive(Clone, Debug)]
pub struct AssembledOperators {
    /// Velocity mass and stiffness, two-component block diagonal.
    pub m_u: CsrMatrix<f64>,
    pub s_u: CsrMatrix<f64>,
    /// Scalar P2 blocks of `m_u` and `s_u`.
    pub m_scalar: CsrMatrix<f64>,
    pub s_scalar: CsrMatrix<f64>,
    pub m_p: CsrMatrix<f64>,
    pub s_p: CsrMatrix<f64>,
    /// `B[q][v] = (div v, q)`, shape dof_p x dof_u.
    pub b: CsrMatrix<f64>,
    /// `M_p 1`, the pressure-mean functional.
    pub mean: Vec<f64>,
}

fn p2_scalar_mass_stiffness(vh: &FeSpace) -> (CsrMatrix<f64>, CsrMatrix<f64>, ScalarPattern) {
    let pat = ScalarPattern::new(vh);
    let q = triangle_degree5();
    let m = pat.assemble(|t, out| {
        let tri = vh.triangle(t);
        for p in &q {
            let v = p2_values(p.bary);
            let w = p.weight * tri.area;
            for a in 0..6 {
                for b in 0..6 {
                    out[a * 6 + b] += w * v[a] * v[b];
                }
            }
        }
    });
    let s = pat.assemble(|t, out| {
        let tri = vh.triangle(t);
        for p in &q {
            let g = p2_gradients(&tri, p.bary);
            let w = p.weight * tri.area;
            for a in 0..6 {
                for b in 0..6 {
                    out[a * 6 + b] += w * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                }
            }
        }
    });
    (m, s, pat)
}

fn p1_mass_stiffness(qh: &FeSpace) -> (CsrMatrix<f64>, CsrMatrix<f64>) {
    let pat = ScalarPattern::new(qh);
    let q = triangle_degree5();
    let m = pat.assemble(|t, out| {
        let tri = qh.triangle(t);
        for p in &q {
            let w = p.weight * tri.area;
            for a in 0..3 {
                for b in 0..3 {
                    out[a * 3 + b] += w * p.bary[a] * p.bary[b];
                }
            }
        }
    });
    let s = pat.assemble(|t, out| {
        let tri = qh.triangle(t);
        let g = tri.grad_bary;
        for a in 0..3 {
            for b in 0..3 {
                out[a * 3 + b] += tri.area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
            }
        }
    });
    (m, s)
}

fn divergence(vh: &FeSpace, qh: &FeSpace) -> CsrMatrix<f64> {
    let n = vh.scalar_count();
    let nt = vh.mesh().num_triangles();
    let mut b = TripletBuilder::with_capacity(qh.dof_count(), vh.dof_count(), nt * 36);
    let q = triangle_degree5();
    for t in 0..nt {
        let tri = vh.triangle(t);
        let vcell = vh.scalar_cell(t);
        let pcell = qh.scalar_cell(t);
        let mut local = [[[0.0; 6]; 2]; 3];
        for p in &q {
            let g = p2_gradients(&tri, p.bary);
            let w = p.weight * tri.area;
            for a in 0..3 {
                for k in 0..6 {
                    for c in 0..2 {
                        local[a][c][k] += w * p.bary[a] * g[k][c];
                    }
                }
            }
        }
        for a in 0..3 {
            for c in 0..2 {
                for k in 0..6 {
                    b.push(pcell[a], c * n + vcell[k], local[a][c][k]);
                }
            }
        }
    }
    b.build()
}

pub fn assemble_operators(vh: &FeSpace, qh: &FeSpace) -> AssembledOperators {
    assert_eq!(vh.kind(), SpaceKind::P2Vector);
    assert_eq!(qh.kind(), SpaceKind::P1Scalar);
    assert!(std::sync::Arc::ptr_eq(vh.mesh(), qh.mesh()) || vh.mesh().fingerprint() == qh.mesh().fingerprint());
    let (m_scalar, s_scalar, _) = p2_scalar_mass_stiffness(vh);
    let (m_p, s_p) = p1_mass_stiffness(qh);
    let b = divergence(vh, qh);
    let mean = m_p.matvec(&vec![1.0; qh.dof_count()]);
    AssembledOperators {
        m_u: block_diag2(&m_scalar),
        s_u: block_diag2(&s_scalar),
        m_scalar,
        s_scalar,
        m_p,
        s_p,
        b,
        mean,
    }
}

/// Assembles the skew convection operator `N(w)` with `N[i][j] = b*(w, phi_j, phi_i)`.
///
/// `N(w)` is block diagonal with one scalar block per component.
#[derive(Clone, Debug)]
pub struct ConvectionAssembler {
    pattern: ScalarPattern,
}

impl ConvectionAssembler {
    pub fn new(vh: &FeSpace) -> Self {
        Self { pattern: ScalarPattern::new(vh) }
    }

    pub fn pattern(&self) -> &ScalarPattern {
        &self.pattern
    }

    /// Scalar block `C[a][b] = 1/2 (w.grad phi_b, phi_a) - 1/2 (w.grad phi_a, phi_b)`.
    pub fn scalar_block(&self, vh: &FeSpace, w: &[f64]) -> CsrMatrix<f64> {
        let q = triangle_degree5();
        self.pattern.assemble(|t, out| {
            let tri = vh.triangle(t);
            let mut k = [0.0; 36];
            for p in &q {
                let v = p2_values(p.bary);
                let g = p2_gradients(&tri, p.bary);
                let (wv, _) = vh.eval_vector(w, t, &tri, p.bary);
                let wt = p.weight * tri.area;
                let mut adv = [0.0; 6];
                for b in 0..6 {
                    adv[b] = wv[0] * g[b][0] + wv[1] * g[b][1];
                }
                for a in 0..6 {
                    for b in 0..6 {
                        k[a * 6 + b] += wt * adv[b] * v[a];
                    }
                }
            }
            for a in 0..6 {
                for b in 0..6 {
                    out[a * 6 + b] = 0.5 * (k[a * 6 + b] - k[b * 6 + a]);
                }
            }
        })
    }

    pub fn matrix(&self, vh: &FeSpace, w: &[f64]) -> CsrMatrix<f64> {
        block_diag2(&self.scalar_block(vh, w))
    }
}

/// `b*(w, u, v)` by direct element quadrature.
pub fn apply_convection(vh: &FeSpace, w: &[f64], u: &[f64], v: &[f64]) -> f64 {
    let q = triangle_degree5();
    let mut total = 0.0;
    for t in 0..vh.mesh().num_triangles() {
        let tri = vh.triangle(t);
        for p in &q {
            let (wv, _) = vh.eval_vector(w, t, &tri, p.bary);
            let (uv, ug) = vh.eval_vector(u, t, &tri, p.bary);
            let (vv, vg) = vh.eval_vector(v, t, &tri, p.bary);
            let mut s = 0.0;
            for c in 0..2 {
                let wgu = wv[0] * ug[c][0] + wv[1] * ug[c][1];
                let wgv = wv[0] * vg[c][0] + wv[1] * vg[c][1];
                s += 0.5 * (wgu * vv[c] - wgv * uv[c]);
            }
            total += p.weight * tri.area * s;
        }
    }
    total
}

/// Load vector `(f, v)` over the vector P2 space.
pub fn assemble_load(vh: &FeSpace, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
    let n = vh.scalar_count();
    let mut out = vec![0.0; vh.dof_count()];
    let q = triangle_degree5();
    for t in 0..vh.mesh().num_triangles() {
        let tri = vh.triangle(t);
        let cell = vh.scalar_cell(t);
        for p in &q {
            let fv = f(tri.point(p.bary));
            let v = p2_values(p.bary);
            let w = p.weight * tri.area;
            for k in 0..6 {
                out[cell[k]] += w * fv[0] * v[k];
                out[n + cell[k]] += w * fv[1] * v[k];
            }
        }
    }
    out
}

/// Scalar load `(g, q)` over the P1 space.
pub fn assemble_scalar_load(qh: &FeSpace, g: impl Fn(Point) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; qh.dof_count()];
    let q = triangle_degree5();
    for t in 0..qh.mesh().num_triangles() {
        let tri = qh.triangle(t);
        let cell = qh.scalar_cell(t);
        for p in &q {
            let gv = g(tri.point(p.bary)) * p.weight * tri.area;
            for k in 0..3 {
                out[cell[k]] += gv * p.bary[k];
            }
        }
    }
    out
}

/// `(f, grad q)` over the P1 space.
pub fn assemble_load_gradient(qh: &FeSpace, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
    let mut out = vec![0.0; qh.dof_count()];
    let q = triangle_degree5();
    for t in 0..qh.mesh().num_triangles() {
        let tri = qh.triangle(t);
        let cell = qh.scalar_cell(t);
        for p in &q {
            let fv = f(tri.point(p.bary));
            let w = p.weight * tri.area;
            for k in 0..3 {
                out[cell[k]] += w * (fv[0] * tri.grad_bary[k][0] + fv[1] * tri.grad_bary[k][1]);
            }
        }
    }
    out
}

/// `A(w)[q][v] = (w . grad v, grad q)`, shape dof_p x dof_u.
pub fn assemble_advective_gradient(vh: &FeSpace, qh: &FeSpace, w: &[f64]) -> CsrMatrix<f64> {
    let n = vh.scalar_count();
    let nt = vh.mesh().num_triangles();
    let mut b = TripletBuilder::with_capacity(qh.dof_count(), vh.dof_count(), nt * 36);
    let q = triangle_degree5();
    for t in 0..nt {
        let tri = vh.triangle(t);
        let vcell = vh.scalar_cell(t);
        let pcell = qh.scalar_cell(t);
        let mut adv_int = [0.0; 6];
        for p in &q {
            let g = p2_gradients(&tri, p.bary);
            let (wv, _) = vh.eval_vector(w, t, &tri, p.bary);
            let wt = p.weight * tri.area;
            for k in 0..6 {
                adv_int[k] += wt * (wv[0] * g[k][0] + wv[1] * g[k][1]);
            }
        }
        for a in 0..3 {
            for c in 0..2 {
                let gq = tri.grad_bary[a][c];
                for k in 0..6 {
                    b.push(pcell[a], c * n + vcell[k], adv_int[k] * gq);
                }
            }
        }
    }
    b.build()
}

/// Unit tangent (domain on the left) and outward unit normal of an oriented boundary edge.
pub fn edge_frame(a: Point, b: Point) -> ([f64; 2], [f64; 2], f64) {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len = d[0].hypot(d[1]);
    let tau = [d[0] / len, d[1] / len];
    (tau, [tau[1], -tau[0]], len)
}

/// `E[q][v] = int_Gamma omega(v) d(q)/d(tau) ds` over edges carrying one of `tags`,
/// with `omega = d v2/dx - d v1/dy` taken from the owning triangle.
pub fn assemble_curl_boundary(vh: &FeSpace, qh: &FeSpace, tags: &[BoundaryTag]) -> CsrMatrix<f64> {
    let mesh = vh.mesh();
    let n = vh.scalar_count();
    let mut b = TripletBuilder::new(qh.dof_count(), vh.dof_count());
    for (i, be) in mesh.boundary_edges().iter().enumerate() {
        if !tags.contains(&be.tag) {
            continue;
        }
        let (t, _, [va, vb]) = mesh.boundary_edge_owner(i);
        let (pa, pb) = (mesh.vertices()[va], mesh.vertices()[vb]);
        let (tau, _, len) = edge_frame(pa, pb);
        let tri = vh.triangle(t);
        let vcell = vh.scalar_cell(t);
        let pcell = qh.scalar_cell(t);
        let mut omega = [[0.0; 6]; 2];
        for (s, w) in edge_gauss4() {
            let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
            let g = p2_gradients(&tri, tri.bary(x));
            for k in 0..6 {
                omega[0][k] += w * len * (-g[k][1]);
                omega[1][k] += w * len * g[k][0];
            }
        }
        for a in 0..3 {
            let dtau = tri.grad_bary[a][0] * tau[0] + tri.grad_bary[a][1] * tau[1];
            for c in 0..2 {
                for k in 0..6 {
                    b.push(pcell[a], c * n + vcell[k], omega[c][k] * dtau);
                }
            }
        }
    }
    b.build()
}

/// L2 error of a P2 vector field against an exact field.
pub fn l2_error_vector(vh: &FeSpace, u: &[f64], exact: impl Fn(Point) -> [f64; 2]) -> f64 {
    let q = triangle_degree5();
    let mut s = 0.0;
    for t in 0..vh.mesh().num_triangles() {
        let tri: Triangle = vh.triangle(t);
        for p in &q {
            let (v, _) = vh.eval_vector(u, t, &tri, p.bary);
            let e = exact(tri.point(p.bary));
            s += p.weight * tri.area * ((v[0] - e[0]).powi(2) + (v[1] - e[1]).powi(2));
        }
    }
    s.sqrt()
}

/// L2 error of a P1 field against an exact function.
pub fn l2_error_scalar(qh: &FeSpace, p_h: &[f64], exact: impl Fn(Point) -> f64) -> f64 {
    let q = triangle_degree5();
    let mut s = 0.0;
    for t in 0..qh.mesh().num_triangles() {
        let tri = qh.triangle(t);
        for p in &q {
            let (v, _) = qh.eval_scalar(p_h, t, &tri, p.bary);
            s += p.weight * tri.area * (v - exact(tri.point(p.bary))).powi(2);
        }
    }
    s.sqrt()
}
