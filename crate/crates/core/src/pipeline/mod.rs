//! Staged offline/online pipeline over fingerprinted artifact directories.
//!
//! Layout under the output directory: `mesh/`, `fom/`, `pod/`, `supremizer/`, `rom/r<r>/`,
//! `recover/<method>_r<r>_m<m>/`, `study/<name>/` and `verify/`. Every stage directory is
//! committed by a `stage.txt` holding the stage key; a stage whose key matches is loaded
//! instead of recomputed.

pub mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub use config::{ModeCount, PipelineConfig, Study};

use crate::analysis::{
    band_ratio, emit_tables, error_norms, force_series, power_law, reduced_force_series, save_error_field, save_forces,
    stability_check, time_averaged_error_field, write_table, ErrorReport, ForceSeries, RegressionResult, RunMeta,
    TableKind, TableRow, BAND_WIDTH,
};
use crate::error::{Error, Result};
use crate::fom::{load_snapshots, save_snapshots, Discretization, FomSolver, SnapshotSet};
use crate::io::{fmt_sig4, read_podm, sparse_fingerprint, write_csv, write_podm, Fingerprint, Manifest};
use crate::linalg::{dot, Cholesky, DenseMatrix};
use crate::mesh::{save_mesh, DomainKind};
use crate::pod::{
    gradient_spectrum, load_basis, pod_matrices, pod_modes_full, project_l2_all, save_basis, PodBasis,
    TruncationSpectrum,
};
use crate::recovery::{
    build_mer_system, build_ppe_system, recover_mer, recover_ppe, save_pressure, MerSystem, Method, PpeSystem,
    PressureTrajectory,
};
use crate::rom::{build_rom_operators, run_rom, save_trajectory, RomOperators, RomTrajectory};
use crate::supremizer::{
    build_supremizer_basis, c_r_h1, compute_inf_sup, fe_inf_sup, load_supremizers, poincare_constant,
    principal_angle, save_supremizers, CompatibilityReport, FeInfSup, SupremizerBasis,
};

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join(".lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "output directory {} is locked by another pipeline (remove {} if stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

const STAGE_FILE: &str = "stage.txt";

fn stage_ready(dir: &Path, key: &str) -> bool {
    Manifest::load(&dir.join(STAGE_FILE)).ok().and_then(|m| m.get("key").map(|k| k == key)).unwrap_or(false)
}

fn stage_begin(dir: &Path) -> Result<()> {
    if dir.exists() {
        fs::remove_dir_all(dir)?;
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

fn stage_commit(dir: &Path, key: &str) -> Result<()> {
    let mut m = Manifest::new();
    m.set("key", key);
    m.save(&dir.join(STAGE_FILE))
}

fn key(parts: &[&str]) -> String {
    let mut f = Fingerprint::new();
    for p in parts {
        f.bytes(p.as_bytes()).bytes(&[0]);
    }
    f.finish()
}

fn cached<T>(cell: &OnceLock<T>, init: impl FnOnce() -> Result<T>) -> Result<&T> {
    if let Some(v) = cell.get() {
        return Ok(v);
    }
    let v = init()?;
    let _ = cell.set(v);
    Ok(cell.get().expect("cell was just set"))
}

fn progress(msg: &str) {
    eprintln!("[podrom] {msg}");
}

/// Velocity and pressure POD bases at full rank with their truncation spectra.
#[derive(Clone, Debug)]
pub struct Bases {
    pub velocity: PodBasis,
    pub pressure: PodBasis,
    pub velocity_spectrum: TruncationSpectrum,
    pub pressure_spectrum: TruncationSpectrum,
}

impl Bases {
    pub fn rank_r(&self) -> usize {
        self.velocity.kept
    }

    pub fn rank_m(&self) -> usize {
        self.pressure.kept
    }
}

/// Pipeline state for one configuration and output directory.
pub struct Workspace {
    pub cfg: PipelineConfig,
    pub disc: Discretization,
    out: PathBuf,
    _lock: RunLock,
    snapshots: OnceLock<SnapshotSet>,
    bases: OnceLock<Bases>,
    sup: OnceLock<SupremizerBasis>,
    rom_ops: OnceLock<RomOperators>,
    mer: OnceLock<MerSystem>,
    ppe: OnceLock<PpeSystem>,
    poincare: OnceLock<f64>,
    beta_h: OnceLock<Option<FeInfSup>>,
    trajectories: Mutex<BTreeMap<usize, Arc<RomTrajectory>>>,
}

impl Workspace {
    pub fn open(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let out = cfg.out.clone();
        let lock = RunLock::acquire(&out)?;
        let mesh = match &cfg.domain.kind {
            DomainKind::File(p) if !p.exists() => return Err(Error::Config(format!("mesh file {} not found", p.display()))),
            _ => cfg.domain.build().map_err(|e| match e {
                Error::InvalidSpec(s) => Error::Config(s),
                other => other,
            })?,
        };
        let mesh_dir = out.join("mesh");
        let mesh_key = key(&["mesh", &mesh.fingerprint()]);
        if !stage_ready(&mesh_dir, &mesh_key) {
            stage_begin(&mesh_dir)?;
            save_mesh(&mesh, &mesh_dir.join("mesh.txt"))?;
            stage_commit(&mesh_dir, &mesh_key)?;
        }
        Ok(Self {
            disc: Discretization::new(Arc::new(mesh)),
            cfg,
            out,
            _lock: lock,
            snapshots: OnceLock::new(),
            bases: OnceLock::new(),
            sup: OnceLock::new(),
            rom_ops: OnceLock::new(),
            mer: OnceLock::new(),
            ppe: OnceLock::new(),
            poincare: OnceLock::new(),
            beta_h: OnceLock::new(),
            trajectories: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn out(&self) -> &Path {
        &self.out
    }

    fn fom_key(&self) -> String {
        key(&["fom", &self.cfg.fom_key(), &self.disc.mesh.fingerprint()])
    }

    fn pod_key(&self) -> String {
        key(&["pod", &self.fom_key()])
    }

    fn sup_key(&self) -> String {
        key(&["supremizer", &self.pod_key(), self.cfg.gs_inner.name()])
    }

    fn rom_key(&self, r: usize) -> String {
        key(&["rom", &self.pod_key(), &r.to_string()])
    }

    /// Full-order snapshots (stage `fom`).
    pub fn snapshots(&self) -> Result<&SnapshotSet> {
        cached(&self.snapshots, || {
            let dir = self.out.join("fom");
            let k = self.fom_key();
            if stage_ready(&dir, &k) {
                return load_snapshots(&dir, Some(&self.disc.mesh.fingerprint()));
            }
            progress(&format!("fom: {} steps, {} velocity dofs", self.cfg.fom.num_steps(), self.disc.n_u()));
            stage_begin(&dir)?;
            let run = FomSolver::new(&self.disc, self.cfg.fom.clone())?.run()?;
            save_snapshots(&run.snapshots, &dir)?;
            let rows: Vec<Vec<String>> = run
                .monitors
                .iter()
                .map(|m| {
                    vec![m.step.to_string(), format!("{:e}", m.energy), format!("{:e}", m.lhs), format!("{:e}", m.bound), format!("{:e}", m.divergence)]
                })
                .collect();
            write_csv(&dir.join("monitors.csv"), &["step", "energy", "lhs", "bound", "divergence"], &rows)?;
            stage_commit(&dir, &k)?;
            Ok(run.snapshots)
        })
    }

    /// Full-rank POD bases (stage `pod`).
    pub fn bases(&self) -> Result<&Bases> {
        cached(&self.bases, || {
            let s = self.snapshots()?;
            let d = &self.disc;
            let dir = self.out.join("pod");
            let k = self.pod_key();
            let spectrum_file = |name: &str| dir.join(format!("{name}.podm"));
            if stage_ready(&dir, &k) {
                let velocity = load_basis(&dir.join("velocity"), "phi", Some(&sparse_fingerprint(&d.ops.m_u)))?;
                let pressure = load_basis(&dir.join("pressure"), "psi", Some(&sparse_fingerprint(&d.ops.m_p)))?;
                let lv = read_podm(&spectrum_file("lambda_velocity"))?;
                let lp = read_podm(&spectrum_file("lambda_pressure"))?;
                return Ok(Bases {
                    velocity,
                    pressure,
                    velocity_spectrum: TruncationSpectrum { lambda_sq: lv.col(0).to_vec(), grad_sq: lv.col(1).to_vec() },
                    pressure_spectrum: TruncationSpectrum { lambda_sq: lp.col(0).to_vec(), grad_sq: Vec::new() },
                });
            }
            progress(&format!("pod: {} snapshots", s.len()));
            stage_begin(&dir)?;
            let velocity = pod_modes_full(&s.v, &d.ops.m_u)?;
            let pressure = pod_modes_full(&s.p, &d.ops.m_p)?;
            let velocity_spectrum = gradient_spectrum(&velocity, &s.v, &d.ops.s_u)?.truncation;
            let pressure_spectrum = TruncationSpectrum::of_pressure(&pressure);
            save_basis(&velocity, &dir.join("velocity"), "phi")?;
            save_basis(&pressure, &dir.join("pressure"), "psi")?;
            let n = velocity_spectrum.lambda_sq.len();
            write_podm(
                &spectrum_file("lambda_velocity"),
                &DenseMatrix::from_columns(n, &[velocity_spectrum.lambda_sq.clone(), velocity_spectrum.grad_sq.clone()]),
            )?;
            let n = pressure_spectrum.lambda_sq.len();
            write_podm(&spectrum_file("lambda_pressure"), &DenseMatrix::from_columns(n, &[pressure_spectrum.lambda_sq.clone()]))?;
            let mut mf = Manifest::new();
            mf.set("velocity_rank", velocity.kept);
            mf.set("pressure_rank", pressure.kept);
            mf.save(&dir.join("summary.txt"))?;
            stage_commit(&dir, &k)?;
            Ok(Bases { velocity, pressure, velocity_spectrum, pressure_spectrum })
        })
    }

    /// Supremizers for every pressure mode (stage `supremizer`).
    pub fn supremizers(&self) -> Result<&SupremizerBasis> {
        cached(&self.sup, || {
            let b = self.bases()?;
            let dir = self.out.join("supremizer");
            let k = self.sup_key();
            if stage_ready(&dir, &k) {
                return load_supremizers(&dir);
            }
            progress(&format!("supremizer: {} pressure modes", b.rank_m()));
            stage_begin(&dir)?;
            let sup = build_supremizer_basis(&self.disc, &b.pressure.modes, self.cfg.gs_inner)?;
            let (r, m) = self.rm();
            let sup_m = sup.truncate(m);
            let report = self.compatibility(r, m, &sup_m)?;
            save_supremizers(&sup, Some(&report), &dir)?;
            stage_commit(&dir, &k)?;
            Ok(sup)
        })
    }

    /// Configured `(r, m)` resolved against the snapshot ranks.
    pub fn rm(&self) -> (usize, usize) {
        let b = self.bases.get().expect("bases are built before resolving mode counts");
        (self.cfg.r.resolve(b.rank_r()), self.cfg.m.resolve(b.rank_m()))
    }

    pub fn poincare(&self) -> Result<f64> {
        cached(&self.poincare, || poincare_constant(&self.disc)).copied()
    }

    pub fn beta_h(&self) -> Result<Option<FeInfSup>> {
        cached(&self.beta_h, || if self.cfg.fe_inf_sup { fe_inf_sup(&self.disc, self.cfg.seed).map(Some) } else { Ok(None) })
            .copied()
    }

    fn compatibility(&self, r: usize, m: usize, sup_m: &SupremizerBasis) -> Result<CompatibilityReport> {
        let b = self.bases()?;
        let d = &self.disc;
        let phi = b.velocity.modes.leading_cols(r);
        let psi = b.pressure.modes.leading_cols(m);
        let beta_m = compute_inf_sup(&sup_m.z, &psi, &d.ops.s_u, &d.ops.b, &d.ops.m_p)?;
        let (alpha, theta1) = principal_angle(&phi, &sup_m.z, &d.ops.m_u)?;
        Ok(CompatibilityReport {
            beta_m,
            beta_h: self.beta_h()?,
            alpha,
            theta1,
            c_r_h1: c_r_h1(&phi, &d.ops.s_u),
            c_p: self.poincare()?,
            max_riesz_residual: sup_m.residuals.iter().cloned().fold(0.0, f64::max),
        })
    }

    /// Compatibility constants of `(r, m)`.
    pub fn compatibility_report(&self, r: usize, m: usize) -> Result<CompatibilityReport> {
        let sup = self.supremizers()?.truncate(m);
        self.compatibility(r, m, &sup)
    }

    /// Reduced operators on all velocity modes.
    pub fn rom_operators(&self) -> Result<&RomOperators> {
        cached(&self.rom_ops, || {
            let b = self.bases()?;
            let s = self.snapshots()?;
            progress(&format!("rom: assembling reduced operators, r = {}", b.rank_r()));
            build_rom_operators(&self.disc, &b.velocity.modes, &self.cfg.fom.forcing, &s.times, s.v.col(0), self.cfg.fom.nu)
        })
    }

    /// Velocity ROM trajectory with `r` modes, started from the projected first snapshot.
    pub fn trajectory(&self, r: usize) -> Result<Arc<RomTrajectory>> {
        if let Some(t) = self.trajectories.lock().unwrap().get(&r) {
            return Ok(t.clone());
        }
        let ops = self.rom_operators()?;
        let traj = if r == ops.r { run_rom(ops)? } else { run_rom(&ops.truncate(r))? };
        let traj = Arc::new(traj);
        self.trajectories.lock().unwrap().insert(r, traj.clone());
        Ok(traj)
    }

    fn mer_full(&self) -> Result<&MerSystem> {
        cached(&self.mer, || {
            let b = self.bases()?;
            let sup = self.supremizers()?;
            progress(&format!("recover: MER system r = {}, m = {}", b.rank_r(), b.rank_m()));
            build_mer_system(&self.disc, &b.velocity.modes, &sup.z, &b.pressure.modes, &self.cfg.fom.forcing, &self.snapshots()?.times)
        })
    }

    fn ppe_full(&self) -> Result<&PpeSystem> {
        cached(&self.ppe, || {
            let b = self.bases()?;
            progress(&format!("recover: PPE system r = {}, m = {}", b.rank_r(), b.rank_m()));
            build_ppe_system(&self.disc, &b.velocity.modes, &b.pressure.modes, &self.cfg.fom.forcing, &self.snapshots()?.times)
        })
    }

    /// Reduced pressure of `method` on `(r, m)` along the `r`-mode velocity ROM.
    pub fn recover(&self, method: Method, r: usize, m: usize) -> Result<PressureTrajectory> {
        let traj = self.trajectory(r)?;
        self.recover_along(method, r, m, &traj)
    }

    /// Reduced pressure for a given velocity coefficient history on the leading `r` modes.
    pub fn recover_along(&self, method: Method, r: usize, m: usize, traj: &RomTrajectory) -> Result<PressureTrajectory> {
        let b = self.bases()?;
        let s = self.snapshots()?;
        let psi = b.pressure.modes.leading_cols(m);
        let b0 = psi.tr_matvec(&self.disc.ops.m_p.matvec(s.p.col(0)));
        let full_r = b.rank_r();
        let full_m = b.rank_m();
        let step = |e: Error| Error::Step { stage: "recover", step: 0, source: Box::new(e) };
        match method {
            Method::Mer => {
                let full = self.mer_full()?;
                if r == full_r && m == full_m {
                    recover_mer(traj, full, &b0)
                } else {
                    recover_mer(traj, &full.truncate(r, m).map_err(step)?, &b0)
                }
            }
            Method::Ppe => {
                let full = self.ppe_full()?;
                if r == full_r && m == full_m {
                    recover_ppe(traj, full, self.cfg.fom.nu, &b0)
                } else {
                    recover_ppe(traj, &full.truncate(r, m).map_err(step)?, self.cfg.fom.nu, &b0)
                }
            }
        }
    }

    /// Pressure and velocity errors of `method` on `(r, m)` with truncation levels filled in.
    pub fn pressure_report(&self, method: Method, r: usize, m: usize) -> Result<(ErrorReport, PressureTrajectory)> {
        let b = self.bases()?;
        let traj = self.trajectory(r)?;
        let pres = self.recover(method, r, m)?;
        let phi = b.velocity.modes.leading_cols(r);
        let psi = b.pressure.modes.leading_cols(m);
        let mut rep = error_norms(&self.disc, self.snapshots()?, &phi, &traj, Some((&psi, &pres)))?;
        rep.meta = RunMeta {
            r,
            m,
            lambda_r: b.velocity_spectrum.lambda_r(r),
            lambda_m: b.pressure_spectrum.lambda_m(m),
            ..RunMeta::default()
        };
        Ok((rep, pres))
    }

    pub fn fom_forces(&self) -> Result<ForceSeries> {
        let s = self.snapshots()?;
        Ok(force_series(&self.disc, &s.v, &s.p, &s.times, self.cfg.fom.nu, &self.cfg.fom.forcing))
    }

    pub fn reduced_forces(&self, r: usize, pres: &PressureTrajectory) -> Result<ForceSeries> {
        let b = self.bases()?;
        let traj = self.trajectory(r)?;
        let phi = b.velocity.modes.leading_cols(r);
        let psi = b.pressure.modes.leading_cols(pres.b.rows());
        Ok(reduced_force_series(&self.disc, &phi, &traj, &psi, pres, self.cfg.fom.nu, &self.cfg.fom.forcing))
    }
}

pub fn cmd_fom(ws: &Workspace) -> Result<PathBuf> {
    ws.snapshots()?;
    Ok(ws.out.join("fom"))
}

pub fn cmd_pod(ws: &Workspace) -> Result<PathBuf> {
    ws.bases()?;
    Ok(ws.out.join("pod"))
}

pub fn cmd_supremize(ws: &Workspace) -> Result<CompatibilityReport> {
    ws.supremizers()?;
    let (r, m) = ws.rm();
    let rep = ws.compatibility_report(r, m)?;
    rep.to_manifest().save(&ws.out.join("supremizer").join(format!("report_r{r}_m{m}.txt")))?;
    Ok(rep)
}

pub fn cmd_rom(ws: &Workspace) -> Result<PathBuf> {
    ws.bases()?;
    let (r, _) = ws.rm();
    let dir = ws.out.join("rom").join(format!("r{r}"));
    let k = ws.rom_key(r);
    if !stage_ready(&dir, &k) {
        let traj = ws.trajectory(r)?;
        stage_begin(&dir)?;
        save_trajectory(&traj, &dir)?;
        stage_commit(&dir, &k)?;
    }
    Ok(dir)
}

pub fn cmd_recover(ws: &Workspace) -> Result<Vec<PathBuf>> {
    cmd_rom(ws)?;
    let (r, m) = ws.rm();
    let mut out = Vec::new();
    for &method in &ws.cfg.methods {
        let dir = ws.out.join("recover").join(format!("{}_r{r}_m{m}", method.name().to_ascii_lowercase()));
        let k = key(&["recover", &ws.sup_key(), &ws.rom_key(r), method.name(), &m.to_string()]);
        if !stage_ready(&dir, &k) {
            let pres = ws.recover(method, r, m)?;
            stage_begin(&dir)?;
            save_pressure(&pres, &dir)?;
            stage_commit(&dir, &k)?;
        }
        out.push(dir);
    }
    Ok(out)
}

/// Desk-scale acceptance bands of the three studies.
pub const CONV_M_BAND: (f64, f64) = (0.8, 1.2);
pub const CONV_R_BAND: (f64, f64) = (0.9, 1.7);
pub const MER_DECAY_FACTOR: f64 = 0.2;
pub const PPE_STAGNATION_FACTOR: f64 = 0.5;
pub const PPE_BAND_RATIO_MIN: f64 = 2.0;
pub const MER_BAND_RATIO_MAX: f64 = 2.0;

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub reports: Vec<ErrorReport>,
    pub regression: Option<RegressionResult>,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct ComparisonOutcome {
    pub mer: Vec<ErrorReport>,
    pub ppe: Vec<ErrorReport>,
    pub stagnation_passed: bool,
    pub band_ratio_mer: f64,
    pub band_ratio_ppe: f64,
    /// Time-l2 drag and lift errors against the FOM at the configured `m`.
    pub force_errors_mer: (f64, f64),
    pub force_errors_ppe: (f64, f64),
    pub force_m: usize,
}

#[derive(Clone, Debug)]
pub enum StudyOutcome {
    Sweep(SweepOutcome),
    Comparison(ComparisonOutcome),
}

fn sweep_values(list: &[usize], rank: usize) -> Vec<usize> {
    let mut v: Vec<usize> = list.iter().map(|&k| k.min(rank)).collect();
    v.dedup();
    v
}

fn write_regression(dir: &Path, fit: &Option<RegressionResult>, band: (f64, f64), passed: bool) -> Result<()> {
    let mut mf = Manifest::new();
    match fit {
        Some(f) => {
            mf.set("exponent", format!("{:?}", f.exponent));
            mf.set("prefactor", format!("{:?}", f.prefactor));
            mf.set("r_squared", format!("{:?}", f.r_squared));
            mf.set("points", f.points.len());
        }
        None => mf.set("exponent", "undefined"),
    }
    mf.set("band", format!("[{}, {}]", band.0, band.1));
    mf.set("passed", passed);
    mf.save(&dir.join("regression.txt"))
}

fn fit(reports: &[ErrorReport], abscissa: impl Fn(&ErrorReport) -> f64) -> Option<RegressionResult> {
    let pts: Vec<(f64, f64)> = reports.iter().map(|e| (abscissa(e), e.p.l1)).collect();
    power_law(&pts).ok()
}

fn in_band(fit: &Option<RegressionResult>, band: (f64, f64)) -> bool {
    fit.as_ref().map(|f| f.exponent >= band.0 && f.exponent <= band.1).unwrap_or(false)
}

pub fn cmd_study(ws: &Workspace, which: Study) -> Result<StudyOutcome> {
    let b = ws.bases()?;
    ws.supremizers()?;
    let dir = ws.out.join("study").join(which.name().to_ascii_lowercase());
    stage_begin(&dir)?;
    let mut summary = Manifest::new();
    summary.set("study", which.name());
    summary.set("velocity_rank", b.rank_r());
    summary.set("pressure_rank", b.rank_m());
    let outcome = match which {
        Study::ConvM => {
            let r = b.rank_r();
            let ms = sweep_values(&ws.cfg.m_sweep, b.rank_m());
            let mut reports = Vec::new();
            let mut curve = Vec::new();
            for &m in &ms {
                let (mut rep, _) = ws.pressure_report(Method::Mer, r, m)?;
                let c = ws.compatibility_report(r, m)?;
                rep.meta.beta_m = c.beta_m;
                rep.meta.alpha = c.alpha;
                rep.meta.c_r_h1 = c.c_r_h1;
                curve.push(vec![m.to_string(), fmt_sig4(c.beta_m), fmt_sig4(c.alpha * c.c_r_h1)]);
                progress(&format!("CONV_M: m = {m}, error {:.4e}, lambda_m {:.4e}", rep.p.l1, rep.meta.lambda_m));
                reports.push(rep);
            }
            let rows: Vec<TableRow> = reports.iter().map(|e| TableRow { index: e.meta.m, a: e.p.l1, b: e.meta.lambda_m }).collect();
            write_table(&dir.join(TableKind::SweepM.file()), TableKind::SweepM, &rows)?;
            write_csv(&dir.join("inf_sup_m.csv"), &["m", "beta_m", "alpha_c_r_h1"], &curve)?;
            let regression = fit(&reports, |e| e.meta.lambda_m);
            let passed = in_band(&regression, CONV_M_BAND);
            write_regression(&dir, &regression, CONV_M_BAND, passed)?;
            summary.set("r", r);
            summary.set("passed", passed);
            StudyOutcome::Sweep(SweepOutcome { reports, regression, passed })
        }
        Study::ConvR => {
            let m = b.rank_m();
            let rs = sweep_values(&ws.cfg.r_sweep, b.rank_r());
            let mut reports = Vec::new();
            let mut curve = Vec::new();
            for &r in &rs {
                let (mut rep, _) = ws.pressure_report(Method::Mer, r, m)?;
                let c = ws.compatibility_report(r, m)?;
                rep.meta.beta_m = c.beta_m;
                rep.meta.alpha = c.alpha;
                rep.meta.c_r_h1 = c.c_r_h1;
                curve.push(vec![r.to_string(), fmt_sig4(c.alpha), fmt_sig4(c.c_r_h1), fmt_sig4(c.alpha * c.c_r_h1)]);
                progress(&format!("CONV_R: r = {r}, error {:.4e}, lambda_r {:.4e}", rep.p.l1, rep.meta.lambda_r));
                reports.push(rep);
            }
            let rows: Vec<TableRow> = reports.iter().map(|e| TableRow { index: e.meta.r, a: e.p.l1, b: e.meta.lambda_r }).collect();
            write_table(&dir.join(TableKind::SweepR.file()), TableKind::SweepR, &rows)?;
            write_csv(&dir.join("alpha_r.csv"), &["r", "alpha", "c_r_h1", "alpha_c_r_h1"], &curve)?;
            let regression = fit(&reports, |e| e.meta.lambda_r);
            let passed = in_band(&regression, CONV_R_BAND);
            write_regression(&dir, &regression, CONV_R_BAND, passed)?;
            summary.set("m", m);
            summary.set("passed", passed);
            StudyOutcome::Sweep(SweepOutcome { reports, regression, passed })
        }
        Study::MerVsPpe => {
            let r = b.rank_r();
            let ms = sweep_values(&ws.cfg.m_sweep, b.rank_m());
            let s = ws.snapshots()?;
            let (mut mer, mut ppe) = (Vec::new(), Vec::new());
            let mut last = None;
            for &m in &ms {
                let (em, pm) = ws.pressure_report(Method::Mer, r, m)?;
                let (ep, pp) = ws.pressure_report(Method::Ppe, r, m)?;
                progress(&format!("MER_VS_PPE: m = {m}, MER {:.4e}, PPE {:.4e}", em.p.l1, ep.p.l1));
                mer.push(em);
                ppe.push(ep);
                last = Some((m, pm, pp));
            }
            let pairs: Vec<(ErrorReport, ErrorReport)> = mer.iter().cloned().zip(ppe.iter().cloned()).collect();
            emit_tables(&[], &[], &pairs, &dir)?;
            for kind in [TableKind::SweepM, TableKind::SweepR] {
                fs::remove_file(dir.join(kind.file()))?;
            }
            let mer_first = mer.first().map(|e| e.p.l1).unwrap_or(f64::NAN);
            let mer_last = mer.last().map(|e| e.p.l1).unwrap_or(f64::NAN);
            let ppe_last = ppe.last().map(|e| e.p.l1).unwrap_or(f64::NAN);
            let ppe_min = ppe.iter().map(|e| e.p.l1).fold(f64::INFINITY, f64::min);
            let stagnation_passed = mer_last <= MER_DECAY_FACTOR * mer_first && ppe_last >= PPE_STAGNATION_FACTOR * ppe_min;
            let spec = &ws.cfg.domain;
            let ratio = |m: usize, p: &PressureTrajectory| {
                let field = time_averaged_error_field(&s.p, &b.pressure.modes.leading_cols(m).matmul(&p.b));
                let q = band_ratio(&ws.disc, &field, spec.inner_center(), spec.r2, BAND_WIDTH);
                (field, q)
            };
            let (m_last, pm, pp) = last.ok_or_else(|| Error::Config("empty m sweep".into()))?;
            summary.set("sweep_end_m", m_last);
            summary.set("sweep_end_band_ratio_mer", format!("{:?}", ratio(m_last, &pm).1));
            summary.set("sweep_end_band_ratio_ppe", format!("{:?}", ratio(m_last, &pp).1));
            // error fields on the full bases
            let m_full = b.rank_m();
            let (fm, band_ratio_mer) = ratio(m_full, &ws.recover(Method::Mer, r, m_full)?);
            let (fp, band_ratio_ppe) = ratio(m_full, &ws.recover(Method::Ppe, r, m_full)?);
            save_error_field(&dir.join("error_field_mer.csv"), ws.disc.qh.node_coords(), &fm)?;
            save_error_field(&dir.join("error_field_ppe.csv"), ws.disc.qh.node_coords(), &fp)?;
            summary.set("field_m", m_full);
            // forces at the configured m
            let (_, m_cfg) = ws.rm();
            let fom_forces = ws.fom_forces()?;
            let mer_forces = ws.reduced_forces(r, &ws.recover(Method::Mer, r, m_cfg)?)?;
            let ppe_forces = ws.reduced_forces(r, &ws.recover(Method::Ppe, r, m_cfg)?)?;
            save_forces(&fom_forces, &dir.join("forces_fom.csv"))?;
            save_forces(&mer_forces, &dir.join("forces_mer.csv"))?;
            save_forces(&ppe_forces, &dir.join("forces_ppe.csv"))?;
            let err_rows: Vec<Vec<String>> = (0..fom_forces.times.len())
                .map(|n| {
                    vec![
                        format!("{}", fom_forces.times[n]),
                        format!("{:e}", (mer_forces.drag[n] - fom_forces.drag[n]).abs()),
                        format!("{:e}", (mer_forces.lift[n] - fom_forces.lift[n]).abs()),
                        format!("{:e}", (ppe_forces.drag[n] - fom_forces.drag[n]).abs()),
                        format!("{:e}", (ppe_forces.lift[n] - fom_forces.lift[n]).abs()),
                    ]
                })
                .collect();
            write_csv(&dir.join("force_errors.csv"), &["t", "drag_err_mer", "lift_err_mer", "drag_err_ppe", "lift_err_ppe"], &err_rows)?;
            let force_errors_mer = mer_forces.error_against(&fom_forces);
            let force_errors_ppe = ppe_forces.error_against(&fom_forces);
            summary.set("r", r);
            summary.set("stagnation_passed", stagnation_passed);
            summary.set("band_ratio_mer", format!("{band_ratio_mer:?}"));
            summary.set("band_ratio_ppe", format!("{band_ratio_ppe:?}"));
            summary.set("band_ratio_passed", band_ratio_ppe >= PPE_BAND_RATIO_MIN && band_ratio_mer <= MER_BAND_RATIO_MAX);
            summary.set("force_m", m_cfg);
            summary.set("drag_err_mer", format!("{:?}", force_errors_mer.0));
            summary.set("lift_err_mer", format!("{:?}", force_errors_mer.1));
            summary.set("drag_err_ppe", format!("{:?}", force_errors_ppe.0));
            summary.set("lift_err_ppe", format!("{:?}", force_errors_ppe.1));
            StudyOutcome::Comparison(ComparisonOutcome {
                mer,
                ppe,
                stagnation_passed,
                band_ratio_mer,
                band_ratio_ppe,
                force_errors_mer,
                force_errors_ppe,
                force_m: m_cfg,
            })
        }
    };
    summary.save(&dir.join("summary.txt"))?;
    Ok(outcome)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name, passed, detail: detail.into() }
    }
}

/// Invariant suite on the configured run: POD identities, compatibility constants, ROM stability,
/// MER exactness and the viscous defect.
pub fn cmd_verify(ws: &Workspace) -> Result<Vec<Check>> {
    let b = ws.bases()?;
    let s = ws.snapshots()?;
    let d = &ws.disc;
    let (r, m) = ws.rm();
    let mut checks = Vec::new();

    let n1 = s.len() as f64;
    let total: f64 = b.velocity.spectrum.iter().sum();
    let grad_total: f64 = (0..s.len()).map(|j| d.ops.s_u.bilinear(s.v.col(j), s.v.col(j))).sum::<f64>() / n1;
    let (mut worst, mut worst_grad) = (0.0f64, 0.0f64);
    for k in [1, b.rank_r() / 2, b.rank_r()] {
        let k = k.max(1);
        let basis = b.velocity.truncate(k)?;
        let a = project_l2_all(&basis, &d.ops.m_u, &s.v);
        let e = s.v.sub(&basis.modes.matmul(&a));
        let mean = |op: &crate::linalg::CsrMatrix<f64>| (0..e.cols()).map(|j| op.bilinear(e.col(j), e.col(j))).sum::<f64>() / n1;
        worst = worst.max((mean(&d.ops.m_u) - b.velocity_spectrum.lambda_sq[k]).abs() / total);
        worst_grad = worst_grad.max((mean(&d.ops.s_u) - b.velocity_spectrum.grad_sq[k]).abs() / grad_total);
    }
    checks.push(Check::new("pod_projection_identity", worst <= 1e-8, format!("max relative defect {worst:.3e}")));
    checks.push(Check::new("pod_gradient_identity", worst_grad <= 1e-8, format!("max relative defect {worst_grad:.3e}")));
    let energy: f64 = (0..s.len()).map(|j| d.ops.m_u.bilinear(s.v.col(j), s.v.col(j))).sum::<f64>() / n1;
    let trace_defect = (energy - total).abs() / total;
    checks.push(Check::new("pod_trace_identity", trace_defect <= 1e-10, format!("{trace_defect:.3e}")));
    let pm = pod_matrices(&b.velocity, &d.ops.m_u, &d.ops.s_u)?;
    let inverse_ok = (0..b.rank_r()).all(|i| pm.stiffness[(i, i)] <= pm.stiffness_norm * (1.0 + 1e-12));
    checks.push(Check::new("pod_inverse_estimate", inverse_ok, format!("||S_r|| = {:.4e}", pm.stiffness_norm)));

    let rep = ws.compatibility_report(r, m)?;
    let beta_ok = match rep.beta_h {
        Some(bh) => rep.beta_m >= bh.value * (1.0 - 1e-10),
        None => rep.beta_m > 0.0,
    };
    checks.push(Check::new(
        "inf_sup_reduced_above_fe",
        beta_ok,
        format!("beta_m = {:.4e}, beta_h = {}", rep.beta_m, rep.beta_h.map(|x| format!("{:.4e}", x.value)).unwrap_or_else(|| "n/a".into())),
    ));
    checks.push(Check::new("principal_angle_below_one", rep.alpha < 1.0, format!("alpha = {:.6}", rep.alpha)));

    let mut rng = ChaCha8Rng::seed_from_u64(ws.cfg.seed);
    let sup = ws.supremizers()?.truncate(m);
    let phi = b.velocity.modes.leading_cols(r);
    let dual = |basis: &DenseMatrix<f64>, u: &[f64]| -> Result<f64> {
        let g = basis.tr_matvec(&d.ops.m_u.matvec(u));
        let k = d.ops.s_u.congruence(basis);
        let x = Cholesky::new(&k, 1e-14)?.solve(&g);
        Ok(dot(&g, &x).max(0.0).sqrt())
    };
    let bound = rep.alpha * rep.c_p * rep.c_r_h1;
    let mut dual_ok = true;
    for _ in 0..50 {
        let a: Vec<f64> = (0..r).map(|_| StandardNormal.sample(&mut rng)).collect();
        let u = phi.matvec(&a);
        dual_ok &= dual(&sup.z, &u)? <= bound * dual(&phi, &u)? * (1.0 + 1e-10);
    }
    checks.push(Check::new("dual_norm_transfer", dual_ok, format!("alpha C_P C_r = {bound:.4e}")));

    let traj = ws.trajectory(r)?;
    let min_slack = traj.monitors.iter().map(|mm| mm.energy_slack).fold(f64::INFINITY, f64::min);
    checks.push(Check::new("rom_energy_inequality", min_slack >= -1e-9, format!("min slack {min_slack:.3e}")));

    let full = ws.trajectory(b.rank_r())?;
    let proj = project_l2_all(&b.velocity, &d.ops.m_u, &s.v);
    let n = s.len() - 1;
    let e: Vec<f64> = full.a.col(n).iter().zip(proj.col(n)).map(|(x, y)| x - y).collect();
    let rel = dot(&e, &e).sqrt() / d.l2_norm_sq(s.v.col(n)).sqrt();
    checks.push(Check::new("full_rank_rom_consistency", rel <= 1e-6, format!("terminal relative error {rel:.3e}")));

    let exact = ws.recover_along(Method::Mer, b.rank_r(), b.rank_m(), &RomTrajectory { a: proj, times: s.times.clone(), monitors: Vec::new(), c_stab: 0.0 })?;
    let p_proj = project_l2_all(&b.pressure, &d.ops.m_p, &s.p);
    let mut worst = 0.0f64;
    for k in 1..exact.b.cols() {
        let diff: Vec<f64> = exact.b.col(k).iter().zip(p_proj.col(k)).map(|(x, y)| x - y).collect();
        worst = worst.max(crate::linalg::norm2(&diff) / crate::linalg::norm2(p_proj.col(k)));
    }
    checks.push(Check::new("mer_exactness", worst <= 1e-7, format!("max relative coefficient error {worst:.3e}")));

    let pres = ws.recover(Method::Mer, r, m)?;
    let defect = pres.diag.iter().map(|x| x.viscous_defect).fold(0.0, f64::max);
    checks.push(Check::new("mer_viscous_defect", defect <= 1e-8, format!("{defect:.3e}")));

    let ops = ws.rom_operators()?.truncate(r);
    let st = stability_check(&ops, &traj, &pres, rep.beta_m, rep.alpha, rep.c_p, rep.c_r_h1, ws.cfg.seed);
    checks.push(Check::new(
        "pressure_stability_surrogate",
        st.holds(),
        format!("lhs {:.4e} <= rhs {:.4e} (C_b* lower bound {:.4e})", st.lhs, st.rhs, st.c_b_lower),
    ));

    let dir = ws.out.join("verify");
    stage_begin(&dir)?;
    let rows: Vec<Vec<String>> = checks.iter().map(|c| vec![c.name.to_string(), c.passed.to_string(), c.detail.clone()]).collect();
    let text: String = rows.iter().map(|r| format!("{} {} {}\n", if r[1] == "true" { "PASS" } else { "FAIL" }, r[0], r[2])).collect();
    fs::write(dir.join("report.txt"), text)?;
    Ok(checks)
}
