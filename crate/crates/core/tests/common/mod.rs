#![allow(dead_code)]

pub mod manufactured;

use podrom::mesh::Point;

/// Gauss–Legendre nodes and weights on [0, 1] by Newton iteration on P_n.
pub fn gauss_legendre01(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out
}

/// Integrates `f` over the triangle with a collapsed (Duffy) tensor Gauss rule.
pub fn duffy_integrate(tri: [Point; 3], n: usize, mut f: impl FnMut(Point, [f64; 3]) -> f64) -> f64 {
    let g = gauss_legendre01(n);
    let [p0, p1, p2] = tri;
    let det = ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1])).abs();
    let mut s = 0.0;
    for &(u, wu) in &g {
        for &(v, wv) in &g {
            let l1 = u;
            let l2 = (1.0 - u) * v;
            let l0 = 1.0 - l1 - l2;
            let x = [l0 * p0[0] + l1 * p1[0] + l2 * p2[0], l0 * p0[1] + l1 * p1[1] + l2 * p2[1]];
            s += wu * wv * (1.0 - u) * det * f(x, [l0, l1, l2]);
        }
    }
    s
}

pub fn rate(e_coarse: f64, e_fine: f64, h_ratio: f64) -> f64 {
    (e_coarse / e_fine).ln() / h_ratio.ln()
}

/// Divergence-free polynomial field from the stream function x^2(1-x)^2 y^2(1-y)^2.
pub mod stream {
    pub fn s(x: f64) -> f64 {
        x * x * (1.0 - x) * (1.0 - x)
    }
    pub fn s1(x: f64) -> f64 {
        2.0 * x * (1.0 - x) * (1.0 - 2.0 * x)
    }
    pub fn s2(x: f64) -> f64 {
        2.0 - 12.0 * x + 12.0 * x * x
    }
    pub fn s3(x: f64) -> f64 {
        -12.0 + 24.0 * x
    }
    pub fn velocity(p: [f64; 2]) -> [f64; 2] {
        let [x, y] = p;
        [s(x) * s1(y), -s1(x) * s(y)]
    }
    pub fn gradient(p: [f64; 2]) -> [[f64; 2]; 2] {
        let [x, y] = p;
        [[s1(x) * s1(y), s(x) * s2(y)], [-s2(x) * s(y), -s1(x) * s1(y)]]
    }
    pub fn laplacian(p: [f64; 2]) -> [f64; 2] {
        let [x, y] = p;
        [s2(x) * s1(y) + s(x) * s3(y), -(s3(x) * s(y) + s1(x) * s2(y))]
    }
    /// (U . grad) U
    pub fn advection(p: [f64; 2]) -> [f64; 2] {
        let u = velocity(p);
        let g = gradient(p);
        [u[0] * g[0][0] + u[1] * g[0][1], u[0] * g[1][0] + u[1] * g[1][1]]
    }
}

/// Pointwise P2/P1 evaluation written out from barycentric formulas, used as a quadrature oracle.
pub struct FieldEval<'a> {
    pub mesh: &'a podrom::mesh::Mesh,
    edge_id: std::collections::HashMap<(usize, usize), usize>,
    pub ns: usize,
}

impl<'a> FieldEval<'a> {
    pub fn new(mesh: &'a podrom::mesh::Mesh) -> Self {
        let edge_id = mesh.edges().iter().enumerate().map(|(k, e)| ((e[0], e[1]), k)).collect();
        Self { mesh, edge_id, ns: mesh.num_vertices() + mesh.num_edges() }
    }

    fn nodes(&self, t: usize) -> [usize; 6] {
        let v = self.mesh.triangles()[t];
        let nv = self.mesh.num_vertices();
        let e = |a: usize, b: usize| nv + self.edge_id[&(a.min(b), a.max(b))];
        [v[0], v[1], v[2], e(v[0], v[1]), e(v[1], v[2]), e(v[2], v[0])]
    }

    fn bary_grads(&self, t: usize) -> [[f64; 2]; 3] {
        let p = self.mesh.triangles()[t].map(|k| self.mesh.vertices()[k]);
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let g = |i: usize| {
            let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
            [(a[1] - b[1]) / det, (b[0] - a[0]) / det]
        };
        [g(0), g(1), g(2)]
    }

    /// Value and gradient `grad[c][d] = d u_c / d x_d` of a P2 vector field.
    pub fn p2(&self, coeff: &[f64], t: usize, l: [f64; 3]) -> ([f64; 2], [[f64; 2]; 2]) {
        let n = self.nodes(t);
        let g = self.bary_grads(t);
        let mut phi = [0.0; 6];
        let mut dphi = [[0.0; 2]; 6];
        for i in 0..3 {
            phi[i] = l[i] * (2.0 * l[i] - 1.0);
            for d in 0..2 {
                dphi[i][d] = (4.0 * l[i] - 1.0) * g[i][d];
            }
        }
        for (k, (a, b)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
            phi[3 + k] = 4.0 * l[a] * l[b];
            for d in 0..2 {
                dphi[3 + k][d] = 4.0 * (l[a] * g[b][d] + l[b] * g[a][d]);
            }
        }
        let mut val = [0.0; 2];
        let mut grad = [[0.0; 2]; 2];
        for k in 0..6 {
            for c in 0..2 {
                let a = coeff[c * self.ns + n[k]];
                val[c] += a * phi[k];
                for d in 0..2 {
                    grad[c][d] += a * dphi[k][d];
                }
            }
        }
        (val, grad)
    }

    pub fn p1(&self, coeff: &[f64], t: usize, l: [f64; 3]) -> (f64, [f64; 2]) {
        let v = self.mesh.triangles()[t];
        let g = self.bary_grads(t);
        let mut val = 0.0;
        let mut grad = [0.0; 2];
        for i in 0..3 {
            val += coeff[v[i]] * l[i];
            grad[0] += coeff[v[i]] * g[i][0];
            grad[1] += coeff[v[i]] * g[i][1];
        }
        (val, grad)
    }

    /// Sum over triangles of a Duffy rule with `n` points per direction.
    pub fn integrate(&self, n: usize, mut f: impl FnMut(usize, Point, [f64; 3]) -> f64) -> f64 {
        (0..self.mesh.num_triangles())
            .map(|t| {
                let p = self.mesh.triangles()[t].map(|k| self.mesh.vertices()[k]);
                duffy_integrate(p, n, |x, l| f(t, x, l))
            })
            .sum()
    }

    /// `b*(w, u, v) = 1/2 (w . grad u, v) - 1/2 (w . grad v, u)`
    pub fn trilinear(&self, w: &[f64], u: &[f64], v: &[f64]) -> f64 {
        self.integrate(5, |t, _, l| {
            let (wv, _) = self.p2(w, t, l);
            let (uv, ug) = self.p2(u, t, l);
            let (vv, vg) = self.p2(v, t, l);
            let mut s = 0.0;
            for c in 0..2 {
                let wu = wv[0] * ug[c][0] + wv[1] * ug[c][1];
                let wvv = wv[0] * vg[c][0] + wv[1] * vg[c][1];
                s += 0.5 * (wu * vv[c] - wvv * uv[c]);
            }
            s
        })
    }

    pub fn l2_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.integrate(4, |t, _, l| {
            let (a, _) = self.p2(u, t, l);
            let (b, _) = self.p2(v, t, l);
            a[0] * b[0] + a[1] * b[1]
        })
    }

    pub fn h1_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.integrate(3, |t, _, l| {
            let (_, a) = self.p2(u, t, l);
            let (_, b) = self.p2(v, t, l);
            a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
        })
    }

    /// `(grad p, grad q)` for P1 fields
    pub fn h1_scalar(&self, p: &[f64], q: &[f64]) -> f64 {
        self.integrate(2, |t, _, l| {
            let (_, a) = self.p1(p, t, l);
            let (_, b) = self.p1(q, t, l);
            a[0] * b[0] + a[1] * b[1]
        })
    }

    /// `(div u, q)`
    pub fn div_pressure(&self, u: &[f64], q: &[f64]) -> f64 {
        self.integrate(3, |t, _, l| {
            let (_, g) = self.p2(u, t, l);
            let (p, _) = self.p1(q, t, l);
            (g[0][0] + g[1][1]) * p
        })
    }
}

/// A short rotational spin-up on the coarse annulus with `steps + 1` snapshots.
pub fn annulus_run(steps: usize, dt: f64) -> (podrom::fom::Discretization, podrom::fom::SnapshotSet) {
    use podrom::fom::{Discretization, FomConfig, FomSolver, Forcing, InitialCondition};
    let mesh = podrom::mesh::DomainSpec::offset_annulus(1).build().unwrap();
    let d = Discretization::new(std::sync::Arc::new(mesh));
    let cfg = FomConfig {
        nu: 0.01,
        dt,
        t_start: 0.0,
        t_snapshot_start: 0.0,
        t_end: dt * steps as f64,
        forcing: Forcing::Rotational,
        initial: InitialCondition::Rest,
        ..FomConfig::desk()
    };
    let run = FomSolver::new(&d, cfg).unwrap().run().unwrap();
    (d, run.snapshots)
}

/// `M`-orthonormal basis of the column span by two-pass modified Gram–Schmidt; columns whose
/// remainder falls below `tol` times the largest column norm are dropped.
pub fn span_basis(
    v: &podrom::linalg::DenseMatrix<f64>,
    m: &podrom::linalg::CsrMatrix<f64>,
    tol: f64,
) -> podrom::linalg::DenseMatrix<f64> {
    let scale = v.columns().map(|c| m.bilinear(c, c).sqrt()).fold(0.0, f64::max);
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut m_cols: Vec<Vec<f64>> = Vec::new();
    for c in v.columns() {
        let mut w = c.to_vec();
        for _ in 0..2 {
            for (q, mq) in cols.iter().zip(&m_cols) {
                let h = podrom::linalg::dot(mq, &w);
                w.iter_mut().zip(q).for_each(|(a, b)| *a -= h * b);
            }
        }
        let n = m.bilinear(&w, &w).sqrt();
        if n > tol * scale {
            let q: Vec<f64> = w.iter().map(|x| x / n).collect();
            m_cols.push(m.matvec(&q));
            cols.push(q);
        }
    }
    podrom::linalg::DenseMatrix::from_columns(v.rows(), &cols)
}
