//! Velocity-only Galerkin ROM with lagged skew convection and backward Euler.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fom::{Discretization, Forcing};
use crate::io::{
    dense_fingerprint, read_csv, read_podm, read_podm_vector, write_csv, write_podm, write_podm_vector, Manifest,
};
use crate::linalg::{dot, norm2, DenseLu, DenseMatrix};

/// Relative slack of the reduced energy inequality.
pub const ENERGY_SLACK: f64 = 1e-9;

/// Reduced convection tensor `T[k][i][j] = b*(phi_k, phi_j, phi_i)`.
#[derive(Clone, Debug)]
pub struct Tensor3 {
    pub n0: usize,
    pub n1: usize,
    pub n2: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n0: usize, n1: usize, n2: usize) -> Self {
        Self { n0, n1, n2, data: vec![0.0; n0 * n1 * n2] }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.n1 + b) * self.n2 + c]
    }

    pub fn slice(&self, a: usize) -> &[f64] {
        &self.data[a * self.n1 * self.n2..(a + 1) * self.n1 * self.n2]
    }

    /// `sum_a w_a T[a]` as an `n1 x n2` matrix.
    pub fn contract_first(&self, w: &[f64]) -> DenseMatrix<f64> {
        let mut out = DenseMatrix::zeros(self.n1, self.n2);
        for (a, &wa) in w.iter().enumerate() {
            if wa == 0.0 {
                continue;
            }
            let s = self.slice(a);
            for b in 0..self.n1 {
                for c in 0..self.n2 {
                    out[(b, c)] += wa * s[b * self.n2 + c];
                }
            }
        }
        out
    }

    /// `max |T[a][b][c] + T[a][c][b]|` for square trailing slots.
    pub fn skew_defect(&self) -> f64 {
        let mut m = 0.0f64;
        for a in 0..self.n0 {
            for b in 0..self.n1 {
                for c in 0..self.n2 {
                    m = m.max((self.get(a, b, c) + self.get(a, c, b)).abs());
                }
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Tensor with slices `T[k] = test^T N(phi_k) trial` for every column `phi_k` of `convecting`.
pub fn convection_tensor(
    d: &Discretization,
    convecting: &DenseMatrix<f64>,
    test: &DenseMatrix<f64>,
    trial: &DenseMatrix<f64>,
) -> Tensor3 {
    let (n0, n1, n2) = (convecting.cols(), test.cols(), trial.cols());
    let slices: Vec<DenseMatrix<f64>> = (0..n0)
        .into_par_iter()
        .map(|k| {
            let n = d.conv.matrix(&d.vh, convecting.col(k));
            n.project(test, trial)
        })
        .collect();
    let mut t = Tensor3::zeros(n0, n1, n2);
    for (k, s) in slices.iter().enumerate() {
        for i in 0..n1 {
            for j in 0..n2 {
                t.data[(k * n1 + i) * n2 + j] = s[(i, j)];
            }
        }
    }
    t
}

#[derive(Clone, Debug)]
pub enum ReducedForcing {
    Steady { load: Vec<f64>, dual: f64 },
    /// Entry `n` belongs to time `t_{n+1}`.
    PerStep { loads: Vec<Vec<f64>>, duals: Vec<f64> },
}

impl ReducedForcing {
    pub fn at(&self, n: usize) -> (&[f64], f64) {
        match self {
            ReducedForcing::Steady { load, dual } => (load, *dual),
            ReducedForcing::PerStep { loads, duals } => (&loads[n], duals[n]),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RomOperators {
    pub r: usize,
    pub nu: f64,
    pub dt: f64,
    pub stiffness: DenseMatrix<f64>,
    pub mass: DenseMatrix<f64>,
    pub tensor: Tensor3,
    pub forcing: ReducedForcing,
    pub a0: Vec<f64>,
    pub times: Vec<f64>,
}

/// Assembles the reduced system on `phi` for the step times `times[0..=N]`.
pub fn build_rom_operators(
    d: &Discretization,
    phi: &DenseMatrix<f64>,
    forcing: &Forcing,
    times: &[f64],
    u0: &[f64],
    nu: f64,
) -> Result<RomOperators> {
    if times.len() < 2 {
        return Err(Error::TimeGridMismatch("a ROM run needs at least two times".into()));
    }
    let dt = times[1] - times[0];
    let stiffness = d.ops.s_u.congruence(phi);
    let mass = d.ops.m_u.congruence(phi);
    let tensor = convection_tensor(d, phi, phi, phi);
    let forcing = if forcing.is_steady() {
        let l = d.load(forcing, times[1], dt);
        ReducedForcing::Steady { load: phi.tr_matvec(&l), dual: d.dual_norm(&l)? }
    } else {
        let mut loads = Vec::with_capacity(times.len() - 1);
        let mut duals = Vec::with_capacity(times.len() - 1);
        for w in times.windows(2) {
            let l = d.load(forcing, w[1], w[1] - w[0]);
            loads.push(phi.tr_matvec(&l));
            duals.push(d.dual_norm(&l)?);
        }
        ReducedForcing::PerStep { loads, duals }
    };
    let a0 = phi.tr_matvec(&d.ops.m_u.matvec(u0));
    Ok(RomOperators { r: phi.cols(), nu, dt, stiffness, mass, tensor, forcing, a0, times: times.to_vec() })
}

impl RomOperators {
    /// Leading `r` modes of an existing operator set.
    pub fn truncate(&self, r: usize) -> Self {
        let mut t = Tensor3::zeros(r, r, r);
        for k in 0..r {
            for i in 0..r {
                for j in 0..r {
                    t.data[(k * r + i) * r + j] = self.tensor.get(k, i, j);
                }
            }
        }
        let forcing = match &self.forcing {
            ReducedForcing::Steady { load, dual } => ReducedForcing::Steady { load: load[..r].to_vec(), dual: *dual },
            ReducedForcing::PerStep { loads, duals } => ReducedForcing::PerStep {
                loads: loads.iter().map(|l| l[..r].to_vec()).collect(),
                duals: duals.clone(),
            },
        };
        Self {
            r,
            nu: self.nu,
            dt: self.dt,
            stiffness: self.stiffness.leading_block(r),
            mass: self.mass.leading_block(r),
            tensor: t,
            forcing,
            a0: self.a0[..r].to_vec(),
            times: self.times.clone(),
        }
    }

    /// `I/dt + N_r(a) + nu S_r` with `N_r(a)_ij = sum_k a_k T[k][i][j]`.
    pub fn step_matrix(&self, a: &[f64]) -> DenseMatrix<f64> {
        let mut m = self.tensor.contract_first(a);
        for j in 0..self.r {
            for i in 0..self.r {
                m[(i, j)] += self.nu * self.stiffness[(i, j)];
            }
            m[(j, j)] += 1.0 / self.dt;
        }
        m
    }
}

/// One backward-Euler step; returns `a^{n+1}` and the relative residual of the dense solve.
pub fn step_rom(ops: &RomOperators, a_n: &[f64], f: &[f64]) -> Result<(Vec<f64>, f64)> {
    if a_n.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularMatrix("non-finite reduced state".into()));
    }
    let m = ops.step_matrix(a_n);
    let rhs: Vec<f64> = f.iter().zip(a_n).map(|(f, a)| f + a / ops.dt).collect();
    let lu = DenseLu::new(&m)?;
    let x = lu.solve(&rhs);
    let r: Vec<f64> = m.matvec(&x).iter().zip(&rhs).map(|(p, q)| p - q).collect();
    let bn = norm2(&rhs);
    let res = if bn > 0.0 { norm2(&r) / bn } else { norm2(&r) };
    Ok((x, res))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RomMonitor {
    pub step: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub residual: f64,
    /// `(bound - lhs) / bound` of the energy inequality.
    pub energy_slack: f64,
}

#[derive(Clone, Debug)]
pub struct RomTrajectory {
    /// Reduced coefficients, one column per time.
    pub a: DenseMatrix<f64>,
    pub times: Vec<f64>,
    pub monitors: Vec<RomMonitor>,
    pub c_stab: f64,
}

pub fn run_rom(ops: &RomOperators) -> Result<RomTrajectory> {
    let steps = ops.times.len() - 1;
    let mut cols = Vec::with_capacity(steps + 1);
    let mut a = ops.a0.clone();
    cols.push(a.clone());
    let mut monitors = Vec::with_capacity(steps);
    let mut dissipated = 0.0;
    let mut bound = dot(&a, &a);
    for n in 0..steps {
        let (f, dual) = ops.forcing.at(n);
        let (next, residual) =
            step_rom(ops, &a, f).map_err(|e| Error::Step { stage: "rom", step: n + 1, source: Box::new(e) })?;
        let energy = dot(&next, &next);
        let grad = dot(&next, &ops.stiffness.matvec(&next));
        dissipated += ops.nu * ops.dt * grad;
        bound += ops.dt / ops.nu * dual * dual;
        let lhs = energy + dissipated;
        let slack = if bound > 0.0 { (bound - lhs) / bound } else { 0.0 };
        monitors.push(RomMonitor { step: n + 1, energy, grad_norm: grad.max(0.0).sqrt(), residual, energy_slack: slack });
        if lhs > bound * (1.0 + ENERGY_SLACK) {
            return Err(Error::MonitorViolation { step: n + 1, lhs, bound });
        }
        a = next;
        cols.push(a.clone());
    }
    Ok(RomTrajectory { a: DenseMatrix::from_columns(ops.r, &cols), times: ops.times.clone(), monitors, c_stab: bound })
}

pub fn save_trajectory(traj: &RomTrajectory, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_podm(&dir.join("A.podm"), &traj.a)?;
    write_podm_vector(&dir.join("times.podm"), &traj.times)?;
    let rows: Vec<Vec<String>> = traj
        .monitors
        .iter()
        .map(|m| {
            vec![
                m.step.to_string(),
                format!("{:e}", m.energy),
                format!("{:e}", m.grad_norm),
                format!("{:e}", m.residual),
                format!("{:e}", m.energy_slack),
            ]
        })
        .collect();
    write_csv(&dir.join("monitors.csv"), &["step", "energy", "grad_norm", "residual", "energy_slack"], &rows)?;
    let mut mf = Manifest::new();
    mf.set("kind", "rom");
    mf.set("r", traj.a.rows());
    mf.set("steps", traj.monitors.len());
    mf.set("c_stab", format!("{:?}", traj.c_stab));
    mf.set("A_hash", dense_fingerprint(&traj.a));
    mf.save(&dir.join("manifest.txt"))
}

pub fn load_trajectory(dir: &Path) -> Result<RomTrajectory> {
    let mf = Manifest::load(&dir.join("manifest.txt"))?;
    let a = read_podm(&dir.join("A.podm"))?;
    mf.check("A_hash", &dense_fingerprint(&a))?;
    let times = read_podm_vector(&dir.join("times.podm"))?;
    if times.len() != a.cols() {
        return Err(Error::TimeGridMismatch(format!("{} columns for {} times", a.cols(), times.len())));
    }
    let monitor_path = dir.join("monitors.csv");
    let monitors = if monitor_path.exists() {
        read_csv(&monitor_path)?
            .1
            .iter()
            .map(|r| RomMonitor { step: r[0] as usize, energy: r[1], grad_norm: r[2], residual: r[3], energy_slack: r[4] })
            .collect()
    } else {
        Vec::new()
    };
    Ok(RomTrajectory { a, times, monitors, c_stab: mf.require_f64("c_stab")? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contraction_sums_weighted_slices() {
        let mut t = Tensor3::zeros(2, 2, 2);
        t.data = vec![1.0, 2.0, 3.0, 4.0, 10.0, 20.0, 30.0, 40.0];
        let m = t.contract_first(&[1.0, 0.5]);
        assert_eq!(m[(0, 0)], 6.0);
        assert_eq!(m[(0, 1)], 12.0);
        assert_eq!(m[(1, 0)], 18.0);
        assert_eq!(m[(1, 1)], 24.0);
        assert_eq!(t.get(1, 0, 1), 20.0);
    }
}
