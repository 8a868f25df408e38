//! Reduced pressure recovery from a velocity ROM trajectory: supremizer-tested momentum
//! equation (MER) and pressure Poisson equation (PPE).

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{assemble_advective_gradient, assemble_curl_boundary, assemble_load_gradient};
use crate::fom::{Discretization, Forcing};
use crate::io::{dense_fingerprint, read_csv, read_podm, write_csv, write_podm, Fingerprint, Manifest};
use crate::linalg::{dot, norm2, singular_values, symmetric_eigen, Cholesky, DenseLu, DenseMatrix};
use crate::mesh::BoundaryTag;
use crate::rom::{convection_tensor, RomTrajectory, Tensor3};

/// Smallest admissible singular value of the MER divergence block.
pub const MIN_SIGMA_D: f64 = 1e-10;
/// Smallest admissible eigenvalue ratio of the reduced pressure stiffness.
pub const MIN_KP_RATIO: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Mer,
    Ppe,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mer => "MER",
            Method::Ppe => "PPE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "MER" => Some(Method::Mer),
            "PPE" => Some(Method::Ppe),
            _ => None,
        }
    }

    fn file(self) -> &'static str {
        match self {
            Method::Mer => "B_mer.podm",
            Method::Ppe => "B_ppe.podm",
        }
    }
}

/// Reduced load, steady or one entry per step (entry `n` at `t_{n+1}`).
#[derive(Clone, Debug)]
pub enum ReducedLoad {
    Steady(Vec<f64>),
    PerStep(Vec<Vec<f64>>),
}

impl ReducedLoad {
    fn at(&self, n: usize) -> &[f64] {
        match self {
            ReducedLoad::Steady(v) => v,
            ReducedLoad::PerStep(v) => &v[n],
        }
    }

    fn build(forcing: &Forcing, times: &[f64], reduce: impl Fn(&dyn Fn(crate::mesh::Point) -> [f64; 2]) -> Vec<f64>) -> Self {
        if forcing.is_steady() {
            ReducedLoad::Steady(reduce(&|p| forcing.eval(p, 0.0, 0.0)))
        } else {
            ReducedLoad::PerStep(
                times.windows(2).map(|w| reduce(&|p| forcing.eval(p, w[1], w[1] - w[0]))).collect(),
            )
        }
    }
}

#[derive(Clone, Debug)]
pub struct MerSystem {
    /// `D[j][i] = (psi_i, div zeta_j)`
    pub d: DenseMatrix<f64>,
    /// `G_t[j][i] = (zeta_j, phi_i)`
    pub gt: DenseMatrix<f64>,
    /// `H[k][j][i] = b*(phi_k, phi_i, zeta_j)`
    pub h: Tensor3,
    /// `(grad zeta_j, grad phi_i)`, only used to monitor the omitted viscous term.
    pub viscous: DenseMatrix<f64>,
    pub zeta_grad: Vec<f64>,
    pub stiffness_r: DenseMatrix<f64>,
    pub load: ReducedLoad,
    pub sigma_min: f64,
    lu: DenseLu<f64>,
}

fn sub_block(a: &DenseMatrix<f64>, rows: usize, cols: usize) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(rows, cols, |i, j| a[(i, j)])
}

fn sub_tensor(t: &Tensor3, n0: usize, n1: usize, n2: usize) -> Tensor3 {
    let mut out = Tensor3::zeros(n0, n1, n2);
    for a in 0..n0 {
        for b in 0..n1 {
            for c in 0..n2 {
                out.data[(a * n1 + b) * n2 + c] = t.get(a, b, c);
            }
        }
    }
    out
}

impl ReducedLoad {
    fn leading(&self, k: usize) -> Self {
        match self {
            ReducedLoad::Steady(v) => ReducedLoad::Steady(v[..k].to_vec()),
            ReducedLoad::PerStep(v) => ReducedLoad::PerStep(v.iter().map(|x| x[..k].to_vec()).collect()),
        }
    }
}

impl MerSystem {
    pub fn r(&self) -> usize {
        self.gt.cols()
    }

    pub fn m(&self) -> usize {
        self.d.rows()
    }

    /// The system on the leading `r` velocity modes and `m` pressure modes and supremizers.
    pub fn truncate(&self, r: usize, m: usize) -> Result<Self> {
        if r > self.r() || m > self.m() {
            return Err(Error::RankDeficient { requested: r.max(m), available: self.r().min(self.m()) });
        }
        let d = self.d.leading_block(m);
        let sigma_min = singular_values(&d)?.last().copied().unwrap_or(0.0);
        if !(sigma_min >= MIN_SIGMA_D) {
            return Err(Error::NearSingularD(sigma_min));
        }
        Ok(Self {
            lu: DenseLu::new(&d)?,
            d,
            gt: sub_block(&self.gt, m, r),
            h: sub_tensor(&self.h, r, m, r),
            viscous: sub_block(&self.viscous, m, r),
            zeta_grad: self.zeta_grad[..m].to_vec(),
            stiffness_r: self.stiffness_r.leading_block(r),
            load: self.load.leading(m),
            sigma_min,
        })
    }

    pub fn fingerprint(&self) -> String {
        Fingerprint::new().dense(&self.d).dense(&self.gt).f64s(&self.h.data).finish()
    }
}

pub fn build_mer_system(
    disc: &Discretization,
    phi: &DenseMatrix<f64>,
    z: &DenseMatrix<f64>,
    psi: &DenseMatrix<f64>,
    forcing: &Forcing,
    times: &[f64],
) -> Result<MerSystem> {
    if z.cols() != psi.cols() {
        return Err(Error::Config(format!("{} supremizers for {} pressure modes", z.cols(), psi.cols())));
    }
    let d = disc.ops.b.project(psi, z).transpose();
    let sigma_min = singular_values(&d)?.last().copied().unwrap_or(0.0);
    if !(sigma_min >= MIN_SIGMA_D) {
        return Err(Error::NearSingularD(sigma_min));
    }
    let lu = DenseLu::new(&d)?;
    let gt = disc.ops.m_u.project(z, phi);
    let h = convection_tensor(disc, phi, z, phi);
    let viscous = disc.ops.s_u.project(z, phi);
    let zeta_grad = (0..z.cols()).map(|j| disc.ops.s_u.bilinear(z.col(j), z.col(j)).max(0.0).sqrt()).collect();
    let load = ReducedLoad::build(forcing, times, |f| z.tr_matvec(&crate::fem::assemble_load(&disc.vh, f)));
    Ok(MerSystem { d, gt, h, viscous, zeta_grad, stiffness_r: disc.ops.s_u.congruence(phi), load, sigma_min, lu })
}

#[derive(Clone, Debug)]
pub struct PpeSystem {
    /// `(grad psi_i, grad psi_j)`
    pub kp: DenseMatrix<f64>,
    /// `Q[k][j][i] = (phi_k . grad phi_i, grad psi_j)`
    pub q: Tensor3,
    /// `Bdy[j][i] = int_Gamma omega(phi_i) d(psi_j)/d(tau)`
    pub bdy: DenseMatrix<f64>,
    pub load: ReducedLoad,
    chol: Cholesky<f64>,
}

impl PpeSystem {
    pub fn r(&self) -> usize {
        self.bdy.cols()
    }

    pub fn m(&self) -> usize {
        self.kp.rows()
    }

    pub fn truncate(&self, r: usize, m: usize) -> Result<Self> {
        if r > self.r() || m > self.m() {
            return Err(Error::RankDeficient { requested: r.max(m), available: self.r().min(self.m()) });
        }
        let kp = self.kp.leading_block(m);
        let chol = Cholesky::new(&kp, MIN_KP_RATIO).map_err(|e| Error::SingularKp(e.to_string()))?;
        Ok(Self {
            kp,
            q: sub_tensor(&self.q, r, m, r),
            bdy: sub_block(&self.bdy, m, r),
            load: self.load.leading(m),
            chol,
        })
    }

    pub fn fingerprint(&self) -> String {
        Fingerprint::new().dense(&self.kp).dense(&self.bdy).f64s(&self.q.data).finish()
    }
}

pub fn build_ppe_system(
    disc: &Discretization,
    phi: &DenseMatrix<f64>,
    psi: &DenseMatrix<f64>,
    forcing: &Forcing,
    times: &[f64],
) -> Result<PpeSystem> {
    let kp = disc.ops.s_p.congruence(psi);
    let ev = symmetric_eigen(&kp)?.values;
    let (lo, hi) = (ev.first().copied().unwrap_or(0.0), ev.last().copied().unwrap_or(0.0));
    if !(hi > 0.0 && lo >= MIN_KP_RATIO * hi) {
        return Err(Error::SingularKp(format!("eigenvalue range [{lo:.3e}, {hi:.3e}]")));
    }
    let chol = Cholesky::new(&kp, MIN_KP_RATIO).map_err(|e| Error::SingularKp(e.to_string()))?;
    let (r, m) = (phi.cols(), psi.cols());
    let slices: Vec<DenseMatrix<f64>> = (0..r)
        .into_par_iter()
        .map(|k| assemble_advective_gradient(&disc.vh, &disc.qh, phi.col(k)).project(psi, phi))
        .collect();
    let mut q = Tensor3::zeros(r, m, r);
    for (k, s) in slices.iter().enumerate() {
        for j in 0..m {
            for i in 0..r {
                q.data[(k * m + j) * r + i] = s[(j, i)];
            }
        }
    }
    let e = assemble_curl_boundary(&disc.vh, &disc.qh, &[BoundaryTag::Outer, BoundaryTag::Inner]);
    let bdy = e.project(psi, phi);
    let load = ReducedLoad::build(forcing, times, |f| psi.tr_matvec(&assemble_load_gradient(&disc.qh, f)));
    Ok(PpeSystem { kp, q, bdy, load, chol })
}

/// `sum_{k,i} x_k y_i T[k][j][i]` for every `j`.
fn bilinear_contract(t: &Tensor3, x: &[f64], y: &[f64]) -> Vec<f64> {
    let m = t.contract_first(x);
    m.matvec(y)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RecoveryDiag {
    pub step: usize,
    pub residual: f64,
    /// `max_j |(grad u_r^{n+1}, grad zeta_j)| / ||grad u_r^{n+1}||` (MER only)
    pub viscous_defect: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PressureTrajectory {
    /// Reduced pressure coefficients, one column per time.
    pub b: DenseMatrix<f64>,
    pub method: Method,
    pub diag: Vec<RecoveryDiag>,
    /// Fingerprint of the reduced system the trajectory was solved with.
    pub system_hash: String,
}

fn relative(r: &[f64], rhs: &[f64]) -> f64 {
    let bn = norm2(rhs);
    if bn > 0.0 {
        norm2(r) / bn
    } else {
        norm2(r)
    }
}

/// MER: `D b^{n+1} = G_t (a^{n+1} - a^n)/dt + H:(a^n, a^{n+1}) - F_s^{n+1}`; column 0 is `b0`.
pub fn recover_mer(traj: &RomTrajectory, sys: &MerSystem, b0: &[f64]) -> Result<PressureTrajectory> {
    let steps = traj.a.cols() - 1;
    let diag_and_cols: Vec<(Vec<f64>, RecoveryDiag)> = (0..steps)
        .into_par_iter()
        .map(|n| {
            let (a0, a1) = (traj.a.col(n), traj.a.col(n + 1));
            let dt = traj.times[n + 1] - traj.times[n];
            let da: Vec<f64> = a1.iter().zip(a0).map(|(x, y)| (x - y) / dt).collect();
            let mut rhs = sys.gt.matvec(&da);
            let conv = bilinear_contract(&sys.h, a0, a1);
            let f = sys.load.at(n);
            for j in 0..rhs.len() {
                rhs[j] += conv[j] - f[j];
            }
            let b = sys.lu.solve(&rhs);
            let r: Vec<f64> = sys.d.matvec(&b).iter().zip(&rhs).map(|(p, q)| p - q).collect();
            let g = dot(a1, &sys.stiffness_r.matvec(a1)).max(0.0).sqrt();
            let v = sys.viscous.matvec(a1);
            let viscous_defect = if g > 0.0 { v.iter().fold(0.0f64, |m, x| m.max(x.abs())) / g } else { 0.0 };
            (b, RecoveryDiag { step: n + 1, residual: relative(&r, &rhs), viscous_defect })
        })
        .collect();
    assemble_trajectory(Method::Mer, sys.fingerprint(), b0, diag_and_cols)
}

/// PPE: `K_p b^{n+1} = -Q:(a^{n+1}, a^{n+1}) + G_f^{n+1} + nu Bdy a^{n+1}`; column 0 is `b0`.
pub fn recover_ppe(traj: &RomTrajectory, sys: &PpeSystem, nu: f64, b0: &[f64]) -> Result<PressureTrajectory> {
    let steps = traj.a.cols() - 1;
    let diag_and_cols: Vec<(Vec<f64>, RecoveryDiag)> = (0..steps)
        .into_par_iter()
        .map(|n| {
            let a1 = traj.a.col(n + 1);
            let conv = bilinear_contract(&sys.q, a1, a1);
            let bd = sys.bdy.matvec(a1);
            let f = sys.load.at(n);
            let rhs: Vec<f64> = (0..conv.len()).map(|j| -conv[j] + f[j] + nu * bd[j]).collect();
            let b = sys.chol.solve(&rhs);
            let r: Vec<f64> = sys.kp.matvec(&b).iter().zip(&rhs).map(|(p, q)| p - q).collect();
            (b, RecoveryDiag { step: n + 1, residual: relative(&r, &rhs), viscous_defect: 0.0 })
        })
        .collect();
    assemble_trajectory(Method::Ppe, sys.fingerprint(), b0, diag_and_cols)
}

fn assemble_trajectory(method: Method, system_hash: String, b0: &[f64], rows: Vec<(Vec<f64>, RecoveryDiag)>) -> Result<PressureTrajectory> {
    if let Some((b, _)) = rows.first() {
        if b.len() != b0.len() {
            return Err(Error::Config(format!("initial pressure has {} coefficients, expected {}", b0.len(), b.len())));
        }
    }
    let mut cols = Vec::with_capacity(rows.len() + 1);
    cols.push(b0.to_vec());
    let mut diag = Vec::with_capacity(rows.len());
    for (b, d) in rows {
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::Step {
                stage: "recover",
                step: d.step,
                source: Box::new(Error::SingularMatrix("non-finite pressure coefficients".into())),
            });
        }
        cols.push(b);
        diag.push(d);
    }
    Ok(PressureTrajectory { b: DenseMatrix::from_columns(b0.len(), &cols), method, diag, system_hash })
}

/// Writes `B_mer.podm` or `B_ppe.podm`, `diag.csv` and the manifest into `dir`.
pub fn save_pressure(p: &PressureTrajectory, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_podm(&dir.join(p.method.file()), &p.b)?;
    let rows: Vec<Vec<String>> = p
        .diag
        .iter()
        .map(|d| vec![d.step.to_string(), format!("{:e}", d.residual), format!("{:e}", d.viscous_defect)])
        .collect();
    write_csv(&dir.join("diag.csv"), &["step", "residual", "viscous_defect"], &rows)?;
    let mut mf = Manifest::new();
    mf.set("kind", "pressure");
    mf.set("method", p.method.name());
    mf.set("m", p.b.rows());
    mf.set("columns", p.b.cols());
    mf.set("system_hash", &p.system_hash);
    mf.set("coeff_hash", dense_fingerprint(&p.b));
    mf.save(&dir.join("manifest.txt"))
}

pub fn load_pressure(dir: &Path) -> Result<PressureTrajectory> {
    let mf = Manifest::load(&dir.join("manifest.txt"))?;
    let tag = mf.require("method")?;
    let method = Method::parse(tag).ok_or_else(|| Error::parse("manifest.txt", 0, format!("unknown method {tag}")))?;
    let b = read_podm(&dir.join(method.file()))?;
    mf.check("coeff_hash", &dense_fingerprint(&b))?;
    let diag_path = dir.join("diag.csv");
    let diag = if diag_path.exists() {
        read_csv(&diag_path)?
            .1
            .iter()
            .map(|r| RecoveryDiag { step: r[0] as usize, residual: r[1], viscous_defect: r[2] })
            .collect()
    } else {
        Vec::new()
    };
    Ok(PressureTrajectory { b, method, diag, system_hash: mf.require("system_hash")?.to_string() })
}
