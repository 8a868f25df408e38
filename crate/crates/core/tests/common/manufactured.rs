use std::f64::consts::PI;
use std::sync::Arc;

use super::stream;
use podrom::fem::{l2_error_scalar, l2_error_vector};
use podrom::fom::{Discretization, FomConfig, FomSolver, Forcing, InitialCondition};
use podrom::mesh::DomainSpec;

pub fn square(n: usize) -> Discretization {
    Discretization::new(Arc::new(DomainSpec::unit_square(n).build().unwrap()))
}

pub fn pressure(p: [f64; 2]) -> f64 {
    (PI * p[0]).cos() * (PI * p[1]).cos()
}

pub fn pressure_gradient(p: [f64; 2]) -> [f64; 2] {
    [-PI * (PI * p[0]).sin() * (PI * p[1]).cos(), -PI * (PI * p[0]).cos() * (PI * p[1]).sin()]
}

/// Forcing for which `g(t_n) U` solves the time-discrete lagged scheme exactly.
pub fn discrete_forcing(nu: f64, g: fn(f64) -> f64) -> Forcing {
    Forcing::Manufactured(Arc::new(move |x, t, dt| {
        let (g1, g0) = (g(t), g(t - dt));
        let (u, a, l, gp) = (stream::velocity(x), stream::advection(x), stream::laplacian(x), pressure_gradient(x));
        let mut f = [0.0; 2];
        for c in 0..2 {
            f[c] = (g1 - g0) / dt * u[c] + g0 * g1 * a[c] + g1 * gp[c] - nu * g1 * l[c];
        }
        f
    }))
}

pub fn continuous_forcing(nu: f64, g: fn(f64) -> f64, dg: fn(f64) -> f64) -> Forcing {
    Forcing::Manufactured(Arc::new(move |x, t, _dt| {
        let (u, a, l, gp) = (stream::velocity(x), stream::advection(x), stream::laplacian(x), pressure_gradient(x));
        let mut f = [0.0; 2];
        for c in 0..2 {
            f[c] = dg(t) * u[c] + g(t) * g(t) * a[c] + g(t) * gp[c] - nu * g(t) * l[c];
        }
        f
    }))
}

pub fn manufactured_config(nu: f64, dt: f64, t_end: f64, forcing: Forcing, initial: InitialCondition) -> FomConfig {
    FomConfig { nu, dt, t_start: 0.0, t_snapshot_start: 0.0, t_end, forcing, initial, ..FomConfig::desk() }
}

pub fn spatial_errors(n: usize) -> (f64, f64) {
    let nu = 1.0;
    let g: fn(f64) -> f64 = |t| 1.0 + t;
    let d = square(n);
    let initial_load = podrom::fem::assemble_load(&d.vh, |x| {
        let (l, gp) = (stream::laplacian(x), pressure_gradient(x));
        [gp[0] - nu * l[0], gp[1] - nu * l[1]]
    });
    let u0 = d.stokes_solve(nu, &initial_load).unwrap().u;
    let cfg = manufactured_config(nu, 1e-3, 5e-3, discrete_forcing(nu, g), InitialCondition::Field(u0));
    let run = FomSolver::new(&d, cfg).unwrap().run().unwrap();
    let k = run.snapshots.len() - 1;
    let t = run.snapshots.times[k];
    let eu = l2_error_vector(&d.vh, &run.snapshots.v.col(k), |x| {
        let u = stream::velocity(x);
        [g(t) * u[0], g(t) * u[1]]
    });
    let ep = l2_error_scalar(&d.qh, &run.snapshots.p.col(k), |x| g(t) * pressure(x));
    (eu, ep)
}

pub fn temporal_error(dt: f64) -> f64 {
    let nu = 0.1;
    let g: fn(f64) -> f64 = |t| (3.0 * t).sin();
    let dg: fn(f64) -> f64 = |t| 3.0 * (3.0 * t).cos();
    let d = square(16);
    let cfg = manufactured_config(nu, dt, 1.0, continuous_forcing(nu, g, dg), InitialCondition::Rest);
    let run = FomSolver::new(&d, cfg).unwrap().run().unwrap();
    let k = run.snapshots.len() - 1;
    let t = run.snapshots.times[k];
    l2_error_vector(&d.vh, &run.snapshots.v.col(k), |x| {
        let u = stream::velocity(x);
        [g(t) * u[0], g(t) * u[1]]
    })
}
