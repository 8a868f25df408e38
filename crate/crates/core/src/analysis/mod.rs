//! Error norms, power-law regressions, lift and drag, time-averaged error fields and table output.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::apply_convection;
use crate::fom::{Discretization, Forcing, SnapshotSet};
use crate::io::{fmt_sig4, read_csv, write_csv, Fingerprint};
use crate::linalg::{dot, norm2, DenseMatrix};
use crate::mesh::{BoundaryTag, Point};
use crate::recovery::PressureTrajectory;
use crate::rom::{RomOperators, RomTrajectory};

/// `|||e|||_{1,0}`, `|||e|||_{2,0}` and `|||e|||_{inf,0}` of a per-step error series.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DiscreteNorms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

impl DiscreteNorms {
    /// Norms over `errs[1..]`; entry 0 is the initial time and carries no scheme error term.
    pub fn of(errs: &[f64], dt: f64) -> Self {
        let tail = errs.get(1..).unwrap_or(&[]);
        Self {
            l1: dt * tail.iter().sum::<f64>(),
            l2: (dt * tail.iter().map(|e| e * e).sum::<f64>()).sqrt(),
            linf: tail.iter().fold(0.0f64, |m, &e| m.max(e)),
        }
    }
}

/// Truncation levels and compatibility constants of a run.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunMeta {
    pub r: usize,
    pub m: usize,
    pub lambda_r: f64,
    pub lambda_m: f64,
    pub beta_m: f64,
    pub alpha: f64,
    pub c_r_h1: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ErrorReport {
    pub velocity_l2: Vec<f64>,
    pub velocity_h1: Vec<f64>,
    pub pressure_l2: Vec<f64>,
    pub u: DiscreteNorms,
    pub grad_u: DiscreteNorms,
    pub p: DiscreteNorms,
    pub dt: f64,
    pub meta: RunMeta,
}

fn expand(basis: &DenseMatrix<f64>, coeff: &[f64]) -> Vec<f64> {
    basis.matvec(coeff)
}

/// Per-step velocity and (optionally) pressure errors of a reduced run against the FOM snapshots.
pub fn error_norms(
    d: &Discretization,
    fom: &SnapshotSet,
    phi: &DenseMatrix<f64>,
    rom: &RomTrajectory,
    pressure: Option<(&DenseMatrix<f64>, &PressureTrajectory)>,
) -> Result<ErrorReport> {
    if fom.times != rom.times {
        return Err(Error::TimeGridMismatch(format!(
            "{} snapshot times vs {} reduced times",
            fom.times.len(),
            rom.times.len()
        )));
    }
    let dt = fom.spacing()?;
    let n = fom.len();
    let pairs: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut e = expand(phi, rom.a.col(k));
            e.iter_mut().zip(fom.v.col(k)).for_each(|(a, b)| *a = b - *a);
            (d.l2_norm_sq(&e).max(0.0).sqrt(), d.h1_seminorm_sq(&e).max(0.0).sqrt())
        })
        .collect();
    let (velocity_l2, velocity_h1): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let mut report = ErrorReport {
        u: DiscreteNorms::of(&velocity_l2, dt),
        grad_u: DiscreteNorms::of(&velocity_h1, dt),
        velocity_l2,
        velocity_h1,
        dt,
        meta: RunMeta { r: phi.cols(), ..RunMeta::default() },
        ..ErrorReport::default()
    };
    if let Some((psi, pres)) = pressure {
        if pres.b.cols() != n {
            return Err(Error::TimeGridMismatch(format!("{} pressure columns for {} snapshot times", pres.b.cols(), n)));
        }
        report.pressure_l2 = (0..n)
            .into_par_iter()
            .map(|k| {
                let mut e = expand(psi, pres.b.col(k));
                e.iter_mut().zip(fom.p.col(k)).for_each(|(a, b)| *a = b - *a);
                d.ops.m_p.bilinear(&e, &e).max(0.0).sqrt()
            })
            .collect();
        report.p = DiscreteNorms::of(&report.pressure_l2, dt);
        report.meta.m = psi.cols();
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionResult {
    /// `err ~ prefactor * lambda^exponent`
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub points: Vec<(f64, f64)>,
}

/// Least-squares line through `(ln lambda, ln err)`.
pub fn power_law(points: &[(f64, f64)]) -> Result<RegressionResult> {
    if points.len() < 3 {
        return Err(Error::Config(format!("power-law fit needs at least 3 points, got {}", points.len())));
    }
    if let Some(&(l, e)) = points.iter().find(|(l, e)| !(*l > 0.0 && *e > 0.0)) {
        return Err(Error::NonpositivePoint(l, e));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("power-law fit needs distinct abscissae".into()));
    }
    let q = sxy / sxx;
    let c = my - q * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - c - q * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(RegressionResult { exponent: q, prefactor: c.exp(), r_squared, points: points.to_vec() })
}

/// Drag along `(0, -1)` and lift along `(-1, 0)`.
pub const DRAG_DIRECTION: [f64; 2] = [0.0, -1.0];
pub const LIFT_DIRECTION: [f64; 2] = [-1.0, 0.0];

/// Discrete extension fields for the volume force functional: the direction vector at every
/// INNER-boundary velocity node and zero elsewhere.
#[derive(Clone, Debug)]
pub struct ForceFunctional {
    pub drag: Vec<f64>,
    pub lift: Vec<f64>,
}

impl ForceFunctional {
    pub fn new(d: &Discretization) -> Self {
        let ns = d.vh.scalar_count();
        let mut drag = vec![0.0; d.n_u()];
        let mut lift = vec![0.0; d.n_u()];
        for dof in d.vh.boundary_dofs(&[BoundaryTag::Inner]) {
            let (c, s) = (dof / ns, dof % ns);
            drag[c * ns + s] = DRAG_DIRECTION[c];
            lift[c * ns + s] = LIFT_DIRECTION[c];
        }
        Self { drag, lift }
    }

    pub fn fingerprint(&self) -> String {
        Fingerprint::new().f64s(&self.drag).f64s(&self.lift).finish()
    }

    fn evaluate(&self, d: &Discretization, v: &[f64], u_prev: &[f64], u: &[f64], p: &[f64], nu: f64, dt: f64, load: &[f64]) -> f64 {
        let du: Vec<f64> = u.iter().zip(u_prev).map(|(a, b)| (a - b) / dt).collect();
        let inertia = d.ops.m_u.bilinear(v, &du);
        let conv = apply_convection(&d.vh, u_prev, u, v);
        let visc = nu * d.ops.s_u.bilinear(v, u);
        let press = d.ops.b.bilinear(p, v);
        -(inertia + conv + visc - press - dot(load, v))
    }

    /// `(drag, lift)` from the residual of the momentum equation tested with the extension fields.
    #[allow(clippy::too_many_arguments)]
    pub fn lift_drag(&self, d: &Discretization, u: &[f64], u_prev: &[f64], p: &[f64], nu: f64, dt: f64, load: &[f64]) -> (f64, f64) {
        (
            self.evaluate(d, &self.drag, u_prev, u, p, nu, dt, load),
            self.evaluate(d, &self.lift, u_prev, u, p, nu, dt, load),
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ForceSeries {
    pub times: Vec<f64>,
    pub drag: Vec<f64>,
    pub lift: Vec<f64>,
    pub extension_hash: String,
}

impl ForceSeries {
    /// `||a - b||_2 / ||b||_2` over both components together.
    pub fn relative_difference(&self, reference: &ForceSeries) -> f64 {
        let diff: Vec<f64> = self
            .drag
            .iter()
            .zip(&reference.drag)
            .chain(self.lift.iter().zip(&reference.lift))
            .map(|(a, b)| a - b)
            .collect();
        let base: Vec<f64> = reference.drag.iter().chain(&reference.lift).copied().collect();
        norm2(&diff) / norm2(&base)
    }

    /// Time-l2 norms of the drag and lift differences.
    pub fn error_against(&self, reference: &ForceSeries) -> (f64, f64) {
        let e = |a: &[f64], b: &[f64]| norm2(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>());
        (e(&self.drag, &reference.drag), e(&self.lift, &reference.lift))
    }
}

/// Forces at `times[1..]` for full-order fields given column-wise; column `n` lives at `times[n]`.
pub fn force_series(
    d: &Discretization,
    velocity: &DenseMatrix<f64>,
    pressure: &DenseMatrix<f64>,
    times: &[f64],
    nu: f64,
    forcing: &Forcing,
) -> ForceSeries {
    let fun = ForceFunctional::new(d);
    let steady = forcing.is_steady().then(|| d.load(forcing, 0.0, 0.0));
    let values: Vec<(f64, f64)> = (1..times.len())
        .into_par_iter()
        .map(|n| {
            let dt = times[n] - times[n - 1];
            let load = steady.clone().unwrap_or_else(|| d.load(forcing, times[n], dt));
            fun.lift_drag(d, velocity.col(n), velocity.col(n - 1), pressure.col(n), nu, dt, &load)
        })
        .collect();
    let (drag, lift) = values.into_iter().unzip();
    ForceSeries { times: times[1..].to_vec(), drag, lift, extension_hash: fun.fingerprint() }
}

/// Forces of a reduced run, reconstructing `phi a` and `psi b` step by step.
pub fn reduced_force_series(
    d: &Discretization,
    phi: &DenseMatrix<f64>,
    rom: &RomTrajectory,
    psi: &DenseMatrix<f64>,
    pres: &PressureTrajectory,
    nu: f64,
    forcing: &Forcing,
) -> ForceSeries {
    let v = phi.matmul(&rom.a);
    let p = psi.matmul(&pres.b);
    force_series(d, &v, &p, &rom.times, nu, forcing)
}

pub fn save_forces(f: &ForceSeries, path: &Path) -> Result<()> {
    let rows: Vec<Vec<String>> = (0..f.times.len())
        .map(|n| vec![format!("{}", f.times[n]), format!("{:e}", f.drag[n]), format!("{:e}", f.lift[n])])
        .collect();
    write_csv(path, &["t", "drag", "lift"], &rows)
}

pub fn load_forces(path: &Path) -> Result<ForceSeries> {
    let (_, rows) = read_csv(path)?;
    Ok(ForceSeries {
        times: rows.iter().map(|r| r[0]).collect(),
        drag: rows.iter().map(|r| r[1]).collect(),
        lift: rows.iter().map(|r| r[2]).collect(),
        extension_hash: String::new(),
    })
}

/// `(1/(N+1)) sum_n |p_h^n - p_m^n|` at every pressure node.
pub fn time_averaged_error_field(fom: &DenseMatrix<f64>, reconstruction: &DenseMatrix<f64>) -> Vec<f64> {
    assert_eq!(fom.shape(), reconstruction.shape(), "field histories differ in shape");
    let cols = fom.cols().max(1) as f64;
    let mut out = vec![0.0; fom.rows()];
    for (a, b) in fom.columns().zip(reconstruction.columns()) {
        for i in 0..out.len() {
            out[i] += (a[i] - b[i]).abs();
        }
    }
    out.iter_mut().for_each(|v| *v /= cols);
    out
}

pub fn save_error_field(path: &Path, coords: &[Point], field: &[f64]) -> Result<()> {
    let rows: Vec<Vec<String>> = coords
        .iter()
        .zip(field)
        .map(|(p, v)| vec![format!("{}", p[0]), format!("{}", p[1]), format!("{v:e}")])
        .collect();
    write_csv(path, &["x", "y", "avg_abs_err"], &rows)
}

/// Width of the band around the inner circle used by [`band_ratio`].
pub const BAND_WIDTH: f64 = 0.05;

/// Lumped-mass weighted mean of `field` over nodes within `width` of the circle, divided by
/// the weighted mean over the whole domain.
pub fn band_ratio(d: &Discretization, field: &[f64], center: Point, radius: f64, width: f64) -> f64 {
    let one = vec![1.0; d.n_p()];
    let w = d.ops.m_p.matvec(&one);
    let (mut band, mut band_w, mut all, mut all_w) = (0.0, 0.0, 0.0, 0.0);
    for (s, p) in d.qh.node_coords().iter().enumerate() {
        all += w[s] * field[s];
        all_w += w[s];
        let dist = ((p[0] - center[0]).hypot(p[1] - center[1]) - radius).abs();
        if dist <= width {
            band += w[s] * field[s];
            band_w += w[s];
        }
    }
    if band_w == 0.0 || all == 0.0 {
        return 0.0;
    }
    (band / band_w) / (all / all_w)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableKind {
    /// `m, err_mer, lambda_m`
    SweepM,
    /// `r, err_mer, lambda_r`
    SweepR,
    /// `m, err_mer, err_ppe`
    MerVsPpe,
}

impl TableKind {
    pub fn header(self) -> [&'static str; 3] {
        match self {
            TableKind::SweepM => ["m", "err_mer", "lambda_m"],
            TableKind::SweepR => ["r", "err_mer", "lambda_r"],
            TableKind::MerVsPpe => ["m", "err_mer", "err_ppe"],
        }
    }

    pub fn file(self) -> &'static str {
        match self {
            TableKind::SweepM => "table_m.csv",
            TableKind::SweepR => "table_r.csv",
            TableKind::MerVsPpe => "table_mer_ppe.csv",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TableRow {
    pub index: usize,
    pub a: f64,
    pub b: f64,
}

pub fn write_table(path: &Path, kind: TableKind, rows: &[TableRow]) -> Result<()> {
    let body: Vec<Vec<String>> = rows.iter().map(|r| vec![r.index.to_string(), fmt_sig4(r.a), fmt_sig4(r.b)]).collect();
    write_csv(path, &kind.header(), &body)
}

pub fn read_table(path: &Path, kind: TableKind) -> Result<Vec<TableRow>> {
    let (header, rows) = read_csv(path)?;
    if header != kind.header() {
        return Err(Error::parse(path.display().to_string(), 1, format!("unexpected header {header:?}")));
    }
    Ok(rows.iter().map(|r| TableRow { index: r[0] as usize, a: r[1], b: r[2] }).collect())
}

/// Writes the three sweep tables from MER reports (m sweep, r sweep) and matched MER/PPE reports.
pub fn emit_tables(
    sweep_m: &[ErrorReport],
    sweep_r: &[ErrorReport],
    mer_vs_ppe: &[(ErrorReport, ErrorReport)],
    dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let m_rows: Vec<TableRow> =
        sweep_m.iter().map(|e| TableRow { index: e.meta.m, a: e.p.l1, b: e.meta.lambda_m }).collect();
    let r_rows: Vec<TableRow> =
        sweep_r.iter().map(|e| TableRow { index: e.meta.r, a: e.p.l1, b: e.meta.lambda_r }).collect();
    let c_rows: Vec<TableRow> =
        mer_vs_ppe.iter().map(|(m, p)| TableRow { index: m.meta.m, a: m.p.l1, b: p.p.l1 }).collect();
    write_table(&dir.join(TableKind::SweepM.file()), TableKind::SweepM, &m_rows)?;
    write_table(&dir.join(TableKind::SweepR.file()), TableKind::SweepR, &r_rows)?;
    write_table(&dir.join(TableKind::MerVsPpe.file()), TableKind::MerVsPpe, &c_rows)
}

/// Measured surrogate for the stability estimate of the recovered pressure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityCheck {
    /// `beta_m dt sum ||p_m^{n+1}||`
    pub lhs: f64,
    /// Right-hand side with the computed sums and the measured constants.
    pub rhs: f64,
    /// `dt sum ||grad u^n|| ||grad u^{n+1}||`
    pub convection_sum: f64,
    /// `C_stab / nu`
    pub convection_bound: f64,
    /// Largest `|b*(w,u,v)| / (|w|_1 |u|_1 |v|_1)` over random reduced triples; a lower bound.
    pub c_b_lower: f64,
}

impl StabilityCheck {
    pub fn holds(&self) -> bool {
        self.lhs.is_finite() && self.lhs <= self.rhs && self.convection_sum <= self.convection_bound
    }
}

/// Sampled lower bound for the trilinear-form constant on the reduced velocity space.
pub fn convection_constant_lower_bound(ops: &RomOperators, samples: usize, seed: u64) -> f64 {
    let r = ops.r;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> Vec<f64> { (0..r).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let grad = |a: &[f64]| dot(a, &ops.stiffness.matvec(a)).max(0.0).sqrt();
    let mut best = 0.0f64;
    for _ in 0..samples {
        let (w, u, v) = (draw(), draw(), draw());
        // tensor slot order: T[k][i][j] = b*(phi_k, phi_j, phi_i)
        let b = dot(&v, &ops.tensor.contract_first(&w).matvec(&u));
        let den = grad(&w) * grad(&u) * grad(&v);
        if den > 0.0 {
            best = best.max(b.abs() / den);
        }
    }
    best
}

/// Evaluates the computable pieces of the pressure stability estimate along a MER run.
pub fn stability_check(
    ops: &RomOperators,
    traj: &RomTrajectory,
    pres: &PressureTrajectory,
    beta_m: f64,
    alpha: f64,
    c_p: f64,
    c_r_h1: f64,
    seed: u64,
) -> StabilityCheck {
    let grad = |a: &[f64]| dot(a, &ops.stiffness.matvec(a)).max(0.0).sqrt();
    let steps = traj.a.cols() - 1;
    let (mut lhs, mut conv, mut forcing, mut visc) = (0.0, 0.0, 0.0, 0.0);
    for n in 0..steps {
        let dt = traj.times[n + 1] - traj.times[n];
        let (g0, g1) = (grad(traj.a.col(n)), grad(traj.a.col(n + 1)));
        lhs += dt * norm2(pres.b.col(n + 1));
        conv += dt * g0 * g1;
        forcing += dt * ops.forcing.at(n).1;
        visc += ops.nu * dt * g1;
    }
    let c_b_lower = convection_constant_lower_bound(ops, 1000, seed);
    let k = alpha * c_p * c_r_h1;
    StabilityCheck {
        lhs: beta_m * lhs,
        rhs: (1.0 + k) * (c_b_lower * conv + forcing) + k * visc,
        convection_sum: conv,
        convection_bound: traj.c_stab / ops.nu,
        c_b_lower,
    }
}
