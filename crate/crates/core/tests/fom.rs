mod common;

use std::sync::Arc;

use common::manufactured::{spatial_errors, square, temporal_error};
use common::rate;
use podrom::fom::{
    load_snapshots, save_snapshots, Discretization, FomConfig, FomSolver, Forcing, InitialCondition,
};
use podrom::mesh::DomainSpec;
use podrom::Error;

#[test]
fn manufactured_spatial_rates() {
    let e: Vec<(f64, f64)> = [8, 16, 32].iter().map(|&n| spatial_errors(n)).collect();
    let ru = rate(e[1].0, e[2].0, 2.0);
    let rp = rate(e[1].1, e[2].1, 2.0);
    println!("velocity rate {ru:.3}, pressure rate {rp:.3}");
    assert!((2.7..=3.3).contains(&ru), "velocity rate {ru}");
    assert!((1.7..=2.3).contains(&rp), "pressure rate {rp}");
}

#[test]
fn manufactured_temporal_rate() {
    let e: Vec<f64> = [0.1, 0.05, 0.025].iter().map(|&dt| temporal_error(dt)).collect();
    let r = rate(e[1], e[2], 2.0);
    println!("temporal rate {r:.3}");
    assert!((0.8..=1.2).contains(&r), "temporal rate {r}");
}

fn annulus() -> Discretization {
    Discretization::new(Arc::new(DomainSpec::offset_annulus(1).build().unwrap()))
}

fn short(forcing: Forcing, initial: InitialCondition, steps: usize) -> FomConfig {
    let dt = 1e-2;
    FomConfig {
        nu: 0.01,
        dt,
        t_start: 0.0,
        t_snapshot_start: 0.0,
        t_end: dt * steps as f64,
        forcing,
        initial,
        ..FomConfig::desk()
    }
}

#[test]
fn rest_with_zero_forcing_stays_at_rest() {
    let d = annulus();
    let run = FomSolver::new(&d, short(Forcing::Zero, InitialCondition::Rest, 3)).unwrap().run().unwrap();
    assert_eq!(run.snapshots.len(), 4);
    assert!(run.snapshots.v.max_abs() == 0.0);
    assert!(run.snapshots.p.max_abs() == 0.0);
}

#[test]
fn rotational_forcing_run_satisfies_monitors() {
    let d = annulus();
    let run = FomSolver::new(&d, short(Forcing::Rotational, InitialCondition::Rest, 10)).unwrap().run().unwrap();
    let s = &run.snapshots;
    assert_eq!(s.v.cols(), 11);
    for m in &run.monitors {
        assert!(m.divergence <= 1e-9, "step {}: divergence {}", m.step, m.divergence);
        assert!(m.lhs <= m.bound * (1.0 + 1e-10));
        assert!(m.solve_residual <= 1e-10);
    }
    for k in 0..s.len() {
        assert!(d.constraint.max_violation(&s.v.col(k)) == 0.0);
        let p = s.p.col(k);
        let mean: f64 = d.ops.mean.iter().zip(p).map(|(a, b)| a * b).sum();
        let pn = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(mean.abs() <= 1e-10 * pn.max(1e-300), "snapshot {k}: mean {mean}");
    }
    assert!(run.monitors.last().unwrap().energy > 0.0);
}

#[test]
fn free_decay_dissipates_energy() {
    let d = annulus();
    let spin = FomSolver::new(&d, short(Forcing::Rotational, InitialCondition::Rest, 5)).unwrap().run().unwrap();
    let u0 = spin.snapshots.v.col(spin.snapshots.len() - 1);
    let run = FomSolver::new(&d, short(Forcing::Zero, InitialCondition::Field(u0.to_vec()), 8)).unwrap().run().unwrap();
    let e: Vec<f64> = run.monitors.iter().map(|m| m.energy).collect();
    assert!(e.windows(2).all(|w| w[1] < w[0]), "{e:?}");
}

#[test]
fn snapshot_window_and_stride() {
    let d = square(4);
    let mut cfg = short(Forcing::Zero, InitialCondition::Rest, 10);
    cfg.t_snapshot_start = 0.04;
    cfg.stride = 3;
    let run = FomSolver::new(&d, cfg).unwrap().run().unwrap();
    let expect = [0.04, 0.07, 0.10];
    assert_eq!(run.snapshots.len(), expect.len());
    for (t, e) in run.snapshots.times.iter().zip(expect) {
        assert!((t - e).abs() < 1e-12);
    }
    assert!((run.snapshots.spacing().unwrap() - 0.03).abs() < 1e-12);
}

#[test]
fn invalid_configurations_are_rejected() {
    let d = square(4);
    let base = short(Forcing::Zero, InitialCondition::Rest, 2);
    for cfg in [
        FomConfig { nu: 0.0, ..base.clone() },
        FomConfig { dt: -1.0, ..base.clone() },
        FomConfig { stride: 0, ..base.clone() },
        FomConfig { t_snapshot_start: 1.0, ..base.clone() },
    ] {
        assert!(matches!(FomSolver::new(&d, cfg), Err(Error::Config(_))));
    }
    let mut bad = vec![0.0; d.n_u()];
    bad[d.constraint.dofs()[0]] = 1.0;
    let s = FomSolver::new(&d, FomConfig { initial: InitialCondition::Field(bad), ..base.clone() }).unwrap();
    assert!(matches!(s.run(), Err(Error::Config(_))));
    let s = FomSolver::new(&d, FomConfig { initial: InitialCondition::Field(vec![0.0; 3]), ..base }).unwrap();
    assert!(matches!(s.run(), Err(Error::Config(_))));
}

#[test]
fn snapshots_round_trip_and_detect_mismatch() {
    let d = square(4);
    let run = FomSolver::new(&d, short(Forcing::Manufactured(Arc::new(|x, _, _| [x[1], -x[0]])), InitialCondition::Rest, 3))
        .unwrap()
        .run()
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_snapshots(&run.snapshots, dir.path()).unwrap();
    let back = load_snapshots(dir.path(), Some(&d.mesh.fingerprint())).unwrap();
    assert_eq!(back.v.data(), run.snapshots.v.data());
    assert_eq!(back.p.data(), run.snapshots.p.data());
    assert_eq!(back.times, run.snapshots.times);
    assert_eq!(back.space_hash, run.snapshots.space_hash);
    let other = square(5).mesh.fingerprint();
    assert!(matches!(load_snapshots(dir.path(), Some(&other)), Err(Error::FingerprintMismatch { .. })));
    std::fs::remove_file(dir.path().join("P.podm")).unwrap();
    assert!(matches!(load_snapshots(dir.path(), None), Err(Error::MissingFile(_))));
    let empty = tempfile::tempdir().unwrap();
    assert!(matches!(load_snapshots(empty.path(), None), Err(Error::MissingFile(_))));
}
