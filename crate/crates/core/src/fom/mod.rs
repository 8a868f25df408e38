//! Backward-Euler Taylor–Hood Navier–Stokes solver with lagged convection.

mod snapshots;

use std::cell::{Cell, RefCell};
use std::fmt;
use std::sync::Arc;

pub use snapshots::{load_snapshots, save_snapshots, space_fingerprint, SnapshotSet};

use crate::error::{Error, Result};
use crate::fem::{
    assemble_load, assemble_operators, constrain_dirichlet, AssembledOperators, Constraint, ConvectionAssembler,
    Factored, FeSpace, LinearSolverSpec, SaddleSolution, SaddleSystem, SolverMethod,
};
use crate::linalg::{dot, norm2, DenseMatrix, SparseLu};
use crate::mesh::{Mesh, Point};

/// Relative slack of the discrete energy inequality.
pub const ENERGY_SLACK: f64 = 1e-10;

type ForcingFn = dyn Fn(Point, f64, f64) -> [f64; 2] + Send + Sync;

/// Body force. `Manufactured` receives `(x, t_next, dt)` so that discrete forcings can be expressed.
#[derive(Clone)]
pub enum Forcing {
    Zero,
    Rotational,
    Manufactured(Arc<ForcingFn>),
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Forcing {
    pub fn name(&self) -> &'static str {
        match self {
            Forcing::Zero => "ZERO",
            Forcing::Rotational => "ROTATIONAL",
            Forcing::Manufactured(_) => "MANUFACTURED",
        }
    }

    /// `f = (-4y(1 - x^2 - y^2), 4x(1 - x^2 - y^2))`, vanishing on the unit circle.
    pub fn rotational(p: Point) -> [f64; 2] {
        let s = 1.0 - p[0] * p[0] - p[1] * p[1];
        [-4.0 * p[1] * s, 4.0 * p[0] * s]
    }

    pub fn eval(&self, p: Point, t: f64, dt: f64) -> [f64; 2] {
        match self {
            Forcing::Zero => [0.0, 0.0],
            Forcing::Rotational => Self::rotational(p),
            Forcing::Manufactured(f) => f(p, t, dt),
        }
    }

    pub fn is_steady(&self) -> bool {
        !matches!(self, Forcing::Manufactured(_))
    }
}

#[derive(Clone, Debug)]
pub enum InitialCondition {
    Rest,
    Field(Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct FomConfig {
    pub nu: f64,
    pub dt: f64,
    pub t_start: f64,
    pub t_snapshot_start: f64,
    pub t_end: f64,
    pub forcing: Forcing,
    pub initial: InitialCondition,
    pub solver: LinearSolverSpec,
    pub stride: usize,
}

impl FomConfig {
    /// Desk-scale run: spin-up from rest to t = 6, snapshots on [6, 8] at dt = 1e-3.
    pub fn desk() -> Self {
        Self {
            nu: 0.01,
            dt: 1e-3,
            t_start: 0.0,
            t_snapshot_start: 6.0,
            t_end: 8.0,
            forcing: Forcing::Rotational,
            initial: InitialCondition::Rest,
            solver: LinearSolverSpec::default(),
            stride: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) {
            return Err(Error::Config(format!("nu must be positive, got {}", self.nu)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(0.0 <= self.t_start && self.t_start <= self.t_snapshot_start && self.t_snapshot_start < self.t_end) {
            return Err(Error::Config("times must satisfy 0 <= t_start <= t_snapshot_start < t_end".into()));
        }
        if self.stride == 0 {
            return Err(Error::Config("snapshot stride must be at least 1".into()));
        }
        if self.solver.method != SolverMethod::SparseLu {
            return Err(Error::Config("the saddle system requires the sparse LU solver".into()));
        }
        self.solver.validate()
    }

    pub fn num_steps(&self) -> usize {
        ((self.t_end - self.t_start) / self.dt).round() as usize
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t_start + n as f64 * self.dt
    }

    /// Step index of the first snapshot.
    pub fn first_snapshot_step(&self) -> usize {
        ((self.t_snapshot_start - self.t_start) / self.dt).round() as usize
    }
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    /// `||B u|| / ||u||`
    pub divergence: f64,
    pub solve_residual: f64,
}

/// Per-step energy bookkeeping of the discrete stability estimate.
#[derive(Clone, Copy, Debug, Default)]
pub struct EnergyMonitor {
    pub step: usize,
    pub energy: f64,
    pub grad_norm_sq: f64,
    /// `||u^n||^2 + nu dt sum ||grad u^{k+1}||^2`
    pub lhs: f64,
    /// `||u^0||^2 + dt / nu sum ||f^{k+1}||_{-1}^2`
    pub bound: f64,
    pub divergence: f64,
    pub solve_residual: f64,
}

#[derive(Clone, Debug)]
pub struct FomRun {
    pub snapshots: SnapshotSet,
    pub monitors: Vec<EnergyMonitor>,
}

/// Assembled spaces and operators shared by every stage that works on one mesh.
pub struct Discretization {
    pub mesh: Arc<Mesh>,
    pub vh: FeSpace,
    pub qh: FeSpace,
    pub ops: AssembledOperators,
    pub conv: ConvectionAssembler,
    pub constraint: Constraint,
    stiffness: std::sync::OnceLock<Factored>,
}

impl Discretization {
    pub fn new(mesh: Arc<Mesh>) -> Self {
        let vh = FeSpace::p2_vector(&mesh);
        let qh = FeSpace::p1_scalar(&mesh);
        let ops = assemble_operators(&vh, &qh);
        let conv = ConvectionAssembler::new(&vh);
        let constraint = Constraint::new(vh.dof_count(), &vh.all_boundary_dofs());
        Self { mesh, vh, qh, ops, conv, constraint, stiffness: std::sync::OnceLock::new() }
    }

    pub fn n_u(&self) -> usize {
        self.vh.dof_count()
    }

    pub fn n_p(&self) -> usize {
        self.qh.dof_count()
    }

    /// No-slip constrained velocity stiffness, factored once.
    pub fn constrained_stiffness(&self) -> Result<&Factored> {
        if let Some(f) = self.stiffness.get() {
            return Ok(f);
        }
        let dofs = self.constraint.dofs();
        let cs = constrain_dirichlet(&self.ops.s_u, None, dofs, &vec![0.0; dofs.len()]);
        let f = Factored::new(cs.matrix)?;
        Ok(self.stiffness.get_or_init(|| f))
    }

    /// Discrete dual norm `sqrt(F^T S_c^{-1} F)` of a load vector over the constrained space.
    pub fn dual_norm(&self, load: &[f64]) -> Result<f64> {
        let f = self.constraint.zeroed(load);
        if f.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        let x = self.constrained_stiffness()?.solve(&f)?;
        Ok(dot(&f, &x).max(0.0).sqrt())
    }

    pub fn load(&self, forcing: &Forcing, t: f64, dt: f64) -> Vec<f64> {
        match forcing {
            Forcing::Zero => vec![0.0; self.n_u()],
            _ => assemble_load(&self.vh, |p| forcing.eval(p, t, dt)),
        }
    }

    pub fn l2_norm_sq(&self, u: &[f64]) -> f64 {
        self.ops.m_u.bilinear(u, u)
    }

    pub fn h1_seminorm_sq(&self, u: &[f64]) -> f64 {
        self.ops.s_u.bilinear(u, u)
    }

    /// Steady Stokes solve `-nu Lap u + grad p = f` with no-slip data.
    pub fn stokes_solve(&self, nu: f64, load: &[f64]) -> Result<SaddleSolution> {
        let sys = SaddleSystem::new(&self.vh, &self.qh, &self.ops, &self.conv, nu, 0.0, self.constraint.clone())?;
        let (m, lu) = sys.factor(None)?;
        sys.solve(&m, &lu, load)
    }
}

/// Target residual of the defect-corrected step solve.
pub const STEP_TOL: f64 = 1e-12;
const MAX_CORRECTIONS: usize = 6;

pub struct FomSolver<'a> {
    disc: &'a Discretization,
    cfg: FomConfig,
    saddle: SaddleSystem,
    lu: RefCell<Option<SparseLu>>,
    refactorizations: Cell<usize>,
}

impl<'a> FomSolver<'a> {
    pub fn new(disc: &'a Discretization, cfg: FomConfig) -> Result<Self> {
        cfg.validate()?;
        let saddle = SaddleSystem::new(
            &disc.vh,
            &disc.qh,
            &disc.ops,
            &disc.conv,
            cfg.nu,
            1.0 / cfg.dt,
            disc.constraint.clone(),
        )?;
        Ok(Self { disc, cfg, saddle, lu: RefCell::new(None), refactorizations: Cell::new(0) })
    }

    pub fn config(&self) -> &FomConfig {
        &self.cfg
    }

    /// Number of numeric factorizations performed so far.
    pub fn refactorizations(&self) -> usize {
        self.refactorizations.get()
    }

    /// One step of the lagged scheme from `u_n` with the load `f^{n+1}`. The previous
    /// factorization is reused through defect correction; it is refreshed when the
    /// correction stalls.
    pub fn step_with_load(&self, u_n: &[f64], load: &[f64]) -> Result<StepResult> {
        let d = self.disc;
        let block = d.conv.scalar_block(&d.vh, u_n);
        let m = self.saddle.matrix(Some(&block));
        let mut rhs = d.ops.m_u.matvec(u_n);
        let inv_dt = 1.0 / self.cfg.dt;
        for (r, f) in rhs.iter_mut().zip(load) {
            *r = *r * inv_dt + f;
        }
        let mut cache = self.lu.borrow_mut();
        let mut sol = None;
        if let Some(lu) = cache.as_ref() {
            sol = self.saddle.solve_refined(&m, lu, &rhs, STEP_TOL, MAX_CORRECTIONS)?;
        }
        let sol = match sol {
            Some(s) => s,
            None => {
                let lu = self.saddle.factor_matrix(&m)?;
                self.refactorizations.set(self.refactorizations.get() + 1);
                let s = self
                    .saddle
                    .solve_refined(&m, &lu, &rhs, STEP_TOL, MAX_CORRECTIONS)?
                    .ok_or_else(|| Error::SingularMatrix("saddle solve did not reach its residual target".into()))?;
                *cache = Some(lu);
                s
            }
        };
        let un = norm2(&sol.u);
        let divergence = if un > 0.0 { norm2(&d.ops.b.matvec(&sol.u)) / un } else { 0.0 };
        Ok(StepResult { u: sol.u, p: sol.p, divergence, solve_residual: sol.residual })
    }

    pub fn step(&self, u_n: &[f64], t_next: f64) -> Result<StepResult> {
        let load = self.disc.load(&self.cfg.forcing, t_next, self.cfg.dt);
        self.step_with_load(u_n, &load)
    }

    pub fn initial_velocity(&self) -> Result<Vec<f64>> {
        match &self.cfg.initial {
            InitialCondition::Rest => Ok(vec![0.0; self.disc.n_u()]),
            InitialCondition::Field(u) => {
                if u.len() != self.disc.n_u() {
                    return Err(Error::Config(format!(
                        "initial field has {} entries, expected {}",
                        u.len(),
                        self.disc.n_u()
                    )));
                }
                if self.disc.constraint.max_violation(u) != 0.0 {
                    return Err(Error::Config("initial field violates the no-slip constraint".into()));
                }
                Ok(u.clone())
            }
        }
    }

    /// Runs from `t_start` to `t_end`, collecting snapshots on the window. The pressure column at
    /// `t_start` (present only when the window starts there) is zero.
    pub fn run(&self) -> Result<FomRun> {
        let cfg = &self.cfg;
        let d = self.disc;
        let n_steps = cfg.num_steps();
        let k0 = cfg.first_snapshot_step();
        let mut u = self.initial_velocity()?;
        let mut monitors = Vec::with_capacity(n_steps);
        let mut cols_u: Vec<Vec<f64>> = Vec::new();
        let mut cols_p: Vec<Vec<f64>> = Vec::new();
        let mut times = Vec::new();
        if k0 == 0 {
            cols_u.push(u.clone());
            cols_p.push(vec![0.0; d.n_p()]);
            times.push(cfg.time(0));
        }
        let steady_load = cfg.forcing.is_steady().then(|| d.load(&cfg.forcing, 0.0, cfg.dt));
        let steady_dual = match &steady_load {
            Some(l) => Some(d.dual_norm(l)?),
            None => None,
        };
        let mut lhs_sum = 0.0;
        let mut bound = d.l2_norm_sq(&u);
        for n in 0..n_steps {
            let t_next = cfg.time(n + 1);
            let wrap = |e: Error| Error::Step { stage: "fom", step: n + 1, source: Box::new(e) };
            let (res, dual) = match &steady_load {
                Some(l) => (self.step_with_load(&u, l).map_err(wrap)?, steady_dual.unwrap()),
                None => {
                    let l = d.load(&cfg.forcing, t_next, cfg.dt);
                    let dual = d.dual_norm(&l).map_err(wrap)?;
                    (self.step_with_load(&u, &l).map_err(wrap)?, dual)
                }
            };
            let energy = d.l2_norm_sq(&res.u);
            let grad = d.h1_seminorm_sq(&res.u);
            lhs_sum += cfg.nu * cfg.dt * grad;
            bound += cfg.dt / cfg.nu * dual * dual;
            let lhs = energy + lhs_sum;
            monitors.push(EnergyMonitor {
                step: n + 1,
                energy,
                grad_norm_sq: grad,
                lhs,
                bound,
                divergence: res.divergence,
                solve_residual: res.solve_residual,
            });
            if lhs > bound * (1.0 + ENERGY_SLACK) {
                return Err(Error::MonitorViolation { step: n + 1, lhs, bound });
            }
            let k = n + 1;
            if k >= k0 && (k - k0) % cfg.stride == 0 {
                cols_u.push(res.u.clone());
                cols_p.push(res.p);
                times.push(t_next);
            }
            u = res.u;
        }
        let snapshots = SnapshotSet {
            v: DenseMatrix::from_columns(d.n_u(), &cols_u),
            p: DenseMatrix::from_columns(d.n_p(), &cols_p),
            times,
            mesh_hash: d.mesh.fingerprint(),
            space_hash: space_fingerprint(d),
            config: config_echo(cfg),
        };
        Ok(FomRun { snapshots, monitors })
    }
}

pub fn config_echo(cfg: &FomConfig) -> Vec<(String, String)> {
    vec![
        ("nu".into(), format!("{:?}", cfg.nu)),
        ("dt".into(), format!("{:?}", cfg.dt)),
        ("t_start".into(), format!("{:?}", cfg.t_start)),
        ("t_snapshot_start".into(), format!("{:?}", cfg.t_snapshot_start)),
        ("t_end".into(), format!("{:?}", cfg.t_end)),
        ("forcing".into(), cfg.forcing.name().into()),
        (
            "initial".into(),
            match cfg.initial {
                InitialCondition::Rest => "REST".into(),
                InitialCondition::Field(_) => "FILE".into(),
            },
        ),
        ("stride".into(), cfg.stride.to_string()),
    ]
}
