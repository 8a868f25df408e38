//! Supremizer enrichment and the compatibility constants of the reduced pair.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fom::Discretization;
use crate::io::{dense_fingerprint, read_podm, write_podm, Manifest};
use crate::linalg::{
    dot, generalized_symmetric_eigen, power_iteration, singular_values, Cholesky, CsrMatrix, DenseMatrix,
};

/// Raw supremizers keeping less than this fraction of their norm under Gram–Schmidt are rejected.
pub const DEGENERACY_RATIO: f64 = 1e-10;
/// Pressure dof count above which the FE inf-sup constant is estimated on a random subspace.
pub const DENSE_INF_SUP_LIMIT: usize = 4000;
pub const RANDOM_SUBSPACE_DIM: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GsInner {
    L2,
    H1,
}

impl GsInner {
    pub fn name(self) -> &'static str {
        match self {
            GsInner::L2 => "L2",
            GsInner::H1 => "H1",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "L2" => Some(GsInner::L2),
            "H1" => Some(GsInner::H1),
            _ => None,
        }
    }

    fn matrix(self, d: &Discretization) -> &CsrMatrix<f64> {
        match self {
            GsInner::L2 => &d.ops.m_u,
            GsInner::H1 => &d.ops.s_u,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SupremizerBasis {
    /// Orthonormalized supremizers, one per column.
    pub z: DenseMatrix<f64>,
    /// Riesz representatives before orthonormalization.
    pub raw: DenseMatrix<f64>,
    pub inner: GsInner,
    pub residuals: Vec<f64>,
}

impl SupremizerBasis {
    pub fn len(&self) -> usize {
        self.z.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.z.cols() == 0
    }

    pub fn truncate(&self, m: usize) -> Self {
        Self {
            z: self.z.leading_cols(m),
            raw: self.raw.leading_cols(m),
            inner: self.inner,
            residuals: self.residuals[..m].to_vec(),
        }
    }
}

/// Solves `S_c s = -B^T psi` on the no-slip space; returns `s` and the relative residual.
pub fn riesz_supremizer(d: &Discretization, psi: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mut rhs = d.ops.b.tr_matvec(psi);
    rhs.iter_mut().for_each(|v| *v = -*v);
    d.constraint.zero(&mut rhs);
    if rhs.iter().all(|&v| v == 0.0) {
        return Ok((vec![0.0; d.n_u()], 0.0));
    }
    d.constrained_stiffness()?.solve_checked(&rhs, 1e-11)
}

/// Modified Gram–Schmidt with one reorthogonalization pass in the `g` inner product.
pub fn orthonormalize(raw: &DenseMatrix<f64>, g: &CsrMatrix<f64>) -> Result<DenseMatrix<f64>> {
    let mut q = DenseMatrix::zeros(raw.rows(), raw.cols());
    let mut gq: Vec<Vec<f64>> = Vec::with_capacity(raw.cols());
    for j in 0..raw.cols() {
        let mut v = raw.col(j).to_vec();
        let before = g.bilinear(&v, &v).max(0.0).sqrt();
        for _ in 0..2 {
            for (i, gqi) in gq.iter().enumerate() {
                let h = dot(gqi, &v);
                v.iter_mut().zip(q.col(i)).for_each(|(a, b)| *a -= h * b);
            }
        }
        let after = g.bilinear(&v, &v).max(0.0).sqrt();
        if !(after > DEGENERACY_RATIO * before) {
            return Err(Error::DegenerateSupremizer(j));
        }
        v.iter_mut().for_each(|a| *a /= after);
        gq.push(g.matvec(&v));
        q.set_col(j, &v);
    }
    Ok(q)
}

pub fn build_supremizer_basis(d: &Discretization, psi: &DenseMatrix<f64>, inner: GsInner) -> Result<SupremizerBasis> {
    d.constrained_stiffness()?;
    let solved: Vec<Result<(Vec<f64>, f64)>> =
        (0..psi.cols()).into_par_iter().map(|j| riesz_supremizer(d, psi.col(j))).collect();
    let mut cols = Vec::with_capacity(psi.cols());
    let mut residuals = Vec::with_capacity(psi.cols());
    for r in solved {
        let (s, res) = r?;
        cols.push(s);
        residuals.push(res);
    }
    let raw = DenseMatrix::from_columns(d.n_u(), &cols);
    let z = orthonormalize(&raw, inner.matrix(d))?;
    Ok(SupremizerBasis { z, raw, inner, residuals })
}

/// `beta^2 = lambda_min(G_p^{-1/2} D K^{-1} D^T G_p^{-1/2})` with `D_ij = (div zeta_j, psi_i)`,
/// `K` the H^1 Gram of the velocity space and `G_p` the L^2 Gram of the pressure space.
pub fn compute_inf_sup(
    z: &DenseMatrix<f64>,
    q: &DenseMatrix<f64>,
    s_u: &CsrMatrix<f64>,
    b: &CsrMatrix<f64>,
    m_p: &CsrMatrix<f64>,
) -> Result<f64> {
    let k = s_u.congruence(z);
    let gp = m_p.congruence(q);
    let dt = b.project(q, z).transpose();
    inf_sup_from_blocks(&k, &dt, &gp)
}

/// `k` velocity Gram, `dt = D^T` (velocity x pressure), `gp` pressure Gram.
pub fn inf_sup_from_blocks(k: &DenseMatrix<f64>, dt: &DenseMatrix<f64>, gp: &DenseMatrix<f64>) -> Result<f64> {
    let ck = Cholesky::new(k, 1e-14).map_err(|e| Error::SingularGram(format!("velocity Gram: {e}")))?;
    let w = ck.forward_matrix(dt);
    let schur = w.gram();
    let eig = generalized_symmetric_eigen(&schur, gp).map_err(|e| Error::SingularGram(format!("pressure Gram: {e}")))?;
    Ok(eig.values[0].max(0.0).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeInfSup {
    pub value: f64,
    /// True when only a random pressure subspace was searched.
    pub subspace_estimate: bool,
}

/// Inf-sup constant of the full Taylor–Hood pair on the mean-zero pressure space.
pub fn fe_inf_sup(d: &Discretization, seed: u64) -> Result<FeInfSup> {
    let np = d.n_p();
    let e = &d.ops.mean;
    let total: f64 = e.iter().sum();
    let basis = if np > DENSE_INF_SUP_LIMIT {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols: Vec<Vec<f64>> = (0..RANDOM_SUBSPACE_DIM)
            .map(|_| {
                let mut q: Vec<f64> = (0..np).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let c = dot(e, &q) / total;
                q.iter_mut().for_each(|v| *v -= c);
                q
            })
            .collect();
        DenseMatrix::from_columns(np, &cols)
    } else {
        // e_i - (e_i . M_p 1 / |Omega|) 1 for i < np - 1 spans the mean-zero space
        let mut q = DenseMatrix::zeros(np, np - 1);
        for i in 0..np - 1 {
            let c = q.col_mut(i);
            let s = e[i] / total;
            c.iter_mut().for_each(|v| *v = -s);
            c[i] += 1.0;
        }
        q
    };
    let stiff = d.constrained_stiffness()?;
    let cols: Vec<Result<Vec<f64>>> = (0..basis.cols())
        .into_par_iter()
        .map(|j| {
            let mut r = d.ops.b.tr_matvec(basis.col(j));
            d.constraint.zero(&mut r);
            let x = stiff.solve(&r)?;
            Ok(d.ops.b.matvec(&x))
        })
        .collect();
    let cols: Vec<Vec<f64>> = cols.into_iter().collect::<Result<_>>()?;
    // Q^T B S_c^{-1} B^T Q
    let mut schur = basis.tr_matmul(&DenseMatrix::from_columns(np, &cols));
    schur.symmetrize();
    let gp = d.ops.m_p.congruence(&basis);
    let eig = generalized_symmetric_eigen(&schur, &gp)?;
    Ok(FeInfSup { value: eig.values[0].max(0.0).sqrt(), subspace_estimate: np > DENSE_INF_SUP_LIMIT })
}

/// `alpha = sigma_max(Phi^T M Z)` after L^2-orthonormalizing `Z`; returns `(alpha, theta_1)`.
pub fn principal_angle(phi: &DenseMatrix<f64>, z: &DenseMatrix<f64>, m_u: &CsrMatrix<f64>) -> Result<(f64, f64)> {
    if phi.cols() == 0 || z.cols() == 0 {
        return Ok((0.0, std::f64::consts::FRAC_PI_2));
    }
    let zl = orthonormalize(z, m_u)?;
    let cross = m_u.project(phi, &zl);
    let alpha = singular_values(&cross)?[0].min(1.0);
    Ok((alpha, alpha.acos()))
}

/// `C_r^{H1} = ||grad sum_i phi_i|| = sqrt(1^T S_r 1)`
pub fn c_r_h1(phi: &DenseMatrix<f64>, s_u: &CsrMatrix<f64>) -> f64 {
    let sr = s_u.congruence(phi);
    sr.data().iter().sum::<f64>().max(0.0).sqrt()
}

/// Poincaré constant `1/sqrt(lambda_min)` of `S x = lambda M x` on the no-slip space.
pub fn poincare_constant(d: &Discretization) -> Result<f64> {
    let stiff = d.constrained_stiffness()?;
    let start = d.vh.interpolate_vector(|p| [1.0 + 0.1 * p[0], 1.0 - 0.1 * p[1]]);
    let start = d.constraint.zeroed(&start);
    let out = power_iteration(
        |x| {
            let mx = d.constraint.zeroed(&d.ops.m_u.matvec(x));
            stiff.solve(&mx)
        },
        |x| d.ops.s_u.matvec(x),
        start,
        1e-12,
        10_000,
    )?;
    Ok(out.value.sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompatibilityReport {
    pub beta_m: f64,
    pub beta_h: Option<FeInfSup>,
    pub alpha: f64,
    pub theta1: f64,
    pub c_r_h1: f64,
    pub c_p: f64,
    pub max_riesz_residual: f64,
}

impl CompatibilityReport {
    pub fn compute(
        d: &Discretization,
        phi: &DenseMatrix<f64>,
        psi: &DenseMatrix<f64>,
        sup: &SupremizerBasis,
        beta_h: Option<FeInfSup>,
    ) -> Result<Self> {
        let beta_m = compute_inf_sup(&sup.z, psi, &d.ops.s_u, &d.ops.b, &d.ops.m_p)?;
        let (alpha, theta1) = principal_angle(phi, &sup.z, &d.ops.m_u)?;
        Ok(Self {
            beta_m,
            beta_h,
            alpha,
            theta1,
            c_r_h1: c_r_h1(phi, &d.ops.s_u),
            c_p: poincare_constant(d)?,
            max_riesz_residual: sup.residuals.iter().cloned().fold(0.0, f64::max),
        })
    }

    pub fn to_manifest(&self) -> Manifest {
        let mut m = Manifest::new();
        m.set("beta_m", format!("{:?}", self.beta_m));
        match self.beta_h {
            Some(b) => {
                m.set("beta_h", format!("{:?}", b.value));
                m.set("beta_h_kind", if b.subspace_estimate { "random_subspace_estimate" } else { "dense" });
            }
            None => m.set("beta_h", "not_computed"),
        }
        m.set("alpha", format!("{:?}", self.alpha));
        m.set("theta1", format!("{:?}", self.theta1));
        m.set("c_r_h1", format!("{:?}", self.c_r_h1));
        m.set("c_p", format!("{:?}", self.c_p));
        m.set("alpha_cp_crh1", format!("{:?}", self.alpha * self.c_p * self.c_r_h1));
        m.set("max_riesz_residual", format!("{:?}", self.max_riesz_residual));
        m
    }
}

pub fn save_supremizers(sup: &SupremizerBasis, report: Option<&CompatibilityReport>, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_podm(&dir.join("zeta.podm"), &sup.z)?;
    write_podm(&dir.join("zeta_raw.podm"), &sup.raw)?;
    let mut m = Manifest::new();
    m.set("kind", "supremizer");
    m.set("count", sup.len());
    m.set("inner_product", sup.inner.name());
    m.set("zeta_hash", dense_fingerprint(&sup.z));
    m.set("residuals", sup.residuals.iter().map(|r| format!("{r:?}")).collect::<Vec<_>>().join(","));
    m.save(&dir.join("manifest.txt"))?;
    if let Some(r) = report {
        r.to_manifest().save(&dir.join("report.txt"))?;
    }
    Ok(())
}

pub fn load_supremizers(dir: &Path) -> Result<SupremizerBasis> {
    let m = Manifest::load(&dir.join("manifest.txt"))?;
    let z = read_podm(&dir.join("zeta.podm"))?;
    m.check("zeta_hash", &dense_fingerprint(&z))?;
    let raw = read_podm(&dir.join("zeta_raw.podm"))?;
    let inner = GsInner::parse(m.require("inner_product")?)
        .ok_or_else(|| Error::parse("manifest.txt", 0, "unknown inner product"))?;
    let residuals = m
        .require("residuals")?
        .split(',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::parse("manifest.txt", 0, "bad residual")))
        .collect::<Result<Vec<f64>>>()?;
    Ok(SupremizerBasis { z, raw, inner, residuals })
}
