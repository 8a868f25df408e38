mod common;

use std::sync::OnceLock;

use common::{annulus_run, FieldEval};
use podrom::analysis::{
    band_ratio, emit_tables, error_norms, force_series, load_forces, power_law, read_table, save_error_field,
    save_forces, stability_check, time_averaged_error_field, DiscreteNorms, ErrorReport, ForceFunctional, RunMeta,
    TableKind, TableRow,
};
use podrom::error::Error;
use podrom::fom::{Discretization, Forcing, SnapshotSet};
use podrom::linalg::DenseMatrix;
use podrom::pod::{pod_modes, project_l2_all, PodBasis};
use podrom::recovery::{build_mer_system, recover_mer};
use podrom::rom::{build_rom_operators, run_rom, RomTrajectory};
use podrom::supremizer::{build_supremizer_basis, CompatibilityReport, GsInner};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Setup {
    d: Discretization,
    s: SnapshotSet,
    phi: PodBasis,
}

fn setup() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| {
        let (d, s) = annulus_run(120, 0.01);
        let rank = pod_modes(&s.v, &d.ops.m_u, 1).unwrap().rank();
        let phi = pod_modes(&s.v, &d.ops.m_u, rank).unwrap();
        Setup { d, s, phi }
    })
}

fn trajectory(a: DenseMatrix<f64>, times: &[f64]) -> RomTrajectory {
    RomTrajectory { a, times: times.to_vec(), monitors: Vec::new(), c_stab: 0.0 }
}

#[test]
fn planted_power_law_is_recovered() {
    let pts: Vec<(f64, f64)> = [0.5, 0.1, 0.03, 0.002].iter().map(|&l: &f64| (l, 3.0 * l * l)).collect();
    let fit = power_law(&pts).unwrap();
    assert!((fit.exponent - 2.0).abs() <= 1e-12);
    assert!((fit.prefactor - 3.0).abs() <= 1e-11);
    assert!((fit.r_squared - 1.0).abs() <= 1e-12);
}

#[test]
fn regression_on_printed_m_sweep_table() {
    let table = [
        (6.533e-01, 1.596e-01),
        (1.594e-01, 4.021e-02),
        (1.028e-01, 2.495e-02),
        (5.762e-02, 1.504e-02),
        (3.494e-02, 8.767e-03),
        (2.586e-02, 6.293e-03),
        (1.928e-02, 4.482e-03),
        (1.432e-02, 3.039e-03),
        (1.002e-02, 2.253e-03),
        (7.838e-03, 1.709e-03),
    ];
    let pts: Vec<(f64, f64)> = table.iter().map(|&(e, l)| (l, e)).collect();
    let fit = power_law(&pts).unwrap();
    assert!((fit.exponent - 0.993).abs() <= 0.05, "q = {}", fit.exponent);
    assert!(fit.r_squared > 0.9 && fit.r_squared <= 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn power_law_recovers_any_planted_exponent(q in -3.0f64..3.0, c in 0.01f64..100.0, n in 3usize..12) {
        let pts: Vec<(f64, f64)> = (0..n).map(|i| {
            let l = 10f64.powf(-(i as f64) * 0.4);
            (l, c * l.powf(q))
        }).collect();
        let fit = power_law(&pts).unwrap();
        prop_assert!((fit.exponent - q).abs() <= 1e-10);
        prop_assert!((fit.prefactor / c - 1.0).abs() <= 1e-9);
        prop_assert!(fit.r_squared >= 0.0 && fit.r_squared <= 1.0);
    }

    #[test]
    fn discrete_norms_are_homogeneous_and_ordered(
        errs in proptest::collection::vec(0.0f64..10.0, 2..40),
        dt in 1e-3f64..1.0,
        s in 0.0f64..5.0,
    ) {
        let n = DiscreteNorms::of(&errs, dt);
        let t = dt * (errs.len() - 1) as f64;
        prop_assert!(n.l1 >= 0.0 && n.l2 >= 0.0 && n.linf >= 0.0);
        prop_assert!(n.linf * (1.0 + 1e-12) >= n.l1 / t);
        let scaled: Vec<f64> = errs.iter().map(|e| s * e).collect();
        let m = DiscreteNorms::of(&scaled, dt);
        prop_assert!((m.l1 - s * n.l1).abs() <= 1e-12 * (1.0 + s * n.l1));
        prop_assert!((m.l2 - s * n.l2).abs() <= 1e-12 * (1.0 + s * n.l2));
        let sum: Vec<f64> = errs.iter().zip(&scaled).map(|(a, b)| a + b).collect();
        let p = DiscreteNorms::of(&sum, dt);
        prop_assert!(p.l2 <= (n.l2 + m.l2) * (1.0 + 1e-12));
    }
}

#[test]
fn error_norms_vanish_for_identical_fields_and_scale_linearly() {
    let st = setup();
    let k = st.s.len();
    let rom = trajectory(DenseMatrix::identity(k), &st.s.times);
    let r = error_norms(&st.d, &st.s, &st.s.v, &rom, None).unwrap();
    assert!(r.velocity_l2.iter().chain(&r.velocity_h1).all(|&e| e == 0.0));
    assert_eq!(r.u, DiscreteNorms::default());
    let zero = error_norms(&st.d, &st.s, &st.s.v, &trajectory(DenseMatrix::zeros(k, k), &st.s.times), None).unwrap();
    let neg = error_norms(&st.d, &st.s, &st.s.v, &trajectory(DenseMatrix::identity(k).scaled(-1.0), &st.s.times), None).unwrap();
    assert!(zero.u.l1 > 0.0);
    assert!((neg.u.l1 - 2.0 * zero.u.l1).abs() <= 1e-12 * zero.u.l1);
    assert!((neg.u.l2 - 2.0 * zero.u.l2).abs() <= 1e-12 * zero.u.l2);
    assert!(zero.u.linf >= zero.u.l1 / (st.s.times[k - 1] - st.s.times[0]));
}

#[test]
fn projection_errors_equal_truncation_tail() {
    let st = setup();
    let total: f64 = st.phi.spectrum.iter().sum();
    let n1 = st.s.len() as f64;
    for r in [1, 3, st.phi.rank() / 2] {
        let basis = st.phi.truncate(r).unwrap();
        let a = project_l2_all(&basis, &st.d.ops.m_u, &st.s.v);
        let rep = error_norms(&st.d, &st.s, &basis.modes, &trajectory(a, &st.s.times), None).unwrap();
        let mean_sq: f64 = rep.velocity_l2.iter().map(|e| e * e).sum::<f64>() / n1;
        let tail: f64 = st.phi.spectrum[r..].iter().sum();
        assert!((mean_sq - tail).abs() <= 1e-8 * total, "r = {r}: {mean_sq} vs {tail}");
    }
}

#[test]
fn mismatched_time_grids_are_rejected() {
    let st = setup();
    let k = st.s.len();
    let mut times = st.s.times.clone();
    times[3] += 1e-12;
    let r = error_norms(&st.d, &st.s, &st.s.v, &trajectory(DenseMatrix::identity(k), &times), None);
    assert!(matches!(r, Err(Error::TimeGridMismatch(_))));
}

#[test]
fn forces_vanish_at_rest_and_for_constant_pressure() {
    let st = setup();
    let d = &st.d;
    let f = ForceFunctional::new(d);
    let zu = vec![0.0; d.n_u()];
    let zl = vec![0.0; d.n_u()];
    assert_eq!(f.lift_drag(d, &zu, &zu, &vec![0.0; d.n_p()], 0.01, 0.01, &zl), (0.0, 0.0));
    let (dr, li) = f.lift_drag(d, &zu, &zu, &vec![1.0; d.n_p()], 0.01, 0.01, &zl);
    assert!(dr.abs() <= 1e-13 && li.abs() <= 1e-13, "{dr} {li}");
    // extension fields live only on the inner cylinder
    let inner = d.vh.boundary_dofs(&[podrom::mesh::BoundaryTag::Inner]);
    assert!(f.drag.iter().enumerate().all(|(i, &v)| v == 0.0 || inner.contains(&i)));
    assert_eq!(f.drag.iter().filter(|v| **v != 0.0).count() + f.lift.iter().filter(|v| **v != 0.0).count(), inner.len());
}

#[test]
fn force_functional_matches_quadrature_oracle_and_scales() {
    let st = setup();
    let d = &st.d;
    let fe = FieldEval::new(&d.mesh);
    let f = ForceFunctional::new(d);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let u0 = st.s.v.col(40).to_vec();
    let u1: Vec<f64> = st.s.v.col(41).iter().map(|v| v + 1e-3 * rng.gen_range(-1.0..1.0)).collect();
    let p: Vec<f64> = st.s.p.col(41).to_vec();
    let (nu, dt) = (0.01, 0.01);
    let load = d.load(&Forcing::Rotational, 0.41, dt);
    let (drag, lift) = f.lift_drag(d, &u1, &u0, &p, nu, dt, &load);
    for (v, got) in [(&f.drag, drag), (&f.lift, lift)] {
        let du: Vec<f64> = u1.iter().zip(&u0).map(|(a, b)| (a - b) / dt).collect();
        let fv = fe.integrate(5, |t, x, l| {
            let (vv, _) = fe.p2(v, t, l);
            let g = Forcing::rotational(x);
            g[0] * vv[0] + g[1] * vv[1]
        });
        let want = -(fe.l2_inner(&du, v) + fe.trilinear(&u0, &u1, v) + nu * fe.h1_inner(&u1, v) - fe.div_pressure(v, &p) - fv);
        assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()), "{got} vs {want}");
    }
    // linear in p and f
    let p2: Vec<f64> = p.iter().map(|x| 2.0 * x).collect();
    let l2: Vec<f64> = load.iter().map(|x| 2.0 * x).collect();
    let (a1, _) = f.lift_drag(d, &u0, &u0, &p, nu, dt, &vec![0.0; d.n_u()]);
    let (a2, _) = f.lift_drag(d, &u0, &u0, &p2, nu, dt, &vec![0.0; d.n_u()]);
    let (b0, _) = f.lift_drag(d, &u0, &u0, &vec![0.0; d.n_p()], nu, dt, &vec![0.0; d.n_u()]);
    assert!((a2 - b0 - 2.0 * (a1 - b0)).abs() <= 1e-10 * (1.0 + a1.abs()));
    let (c1, _) = f.lift_drag(d, &u0, &u0, &vec![0.0; d.n_p()], nu, dt, &load);
    let (c2, _) = f.lift_drag(d, &u0, &u0, &vec![0.0; d.n_p()], nu, dt, &l2);
    assert!((c2 - b0 - 2.0 * (c1 - b0)).abs() <= 1e-10 * (1.0 + c1.abs()));
    // steady velocity: only convection (quadratic) and viscosity (linear) remain
    let w2: Vec<f64> = u0.iter().map(|x| 2.0 * x).collect();
    let (g2, _) = f.lift_drag(d, &w2, &w2, &vec![0.0; d.n_p()], nu, dt, &vec![0.0; d.n_u()]);
    let conv = fe.trilinear(&u0, &u0, &f.drag);
    assert!(((g2 - 2.0 * b0) + 2.0 * conv).abs() <= 1e-9 * (1.0 + conv.abs()));
}

#[test]
fn force_series_skips_initial_time_and_round_trips() {
    let st = setup();
    let fs = force_series(&st.d, &st.s.v, &st.s.p, &st.s.times, 0.01, &Forcing::Rotational);
    assert_eq!(fs.times.len(), st.s.len() - 1);
    assert_eq!(fs.times[0], st.s.times[1]);
    assert!(fs.drag.iter().chain(&fs.lift).all(|v| v.is_finite()));
    assert!(fs.drag.iter().any(|v| *v != 0.0));
    assert_eq!(fs.relative_difference(&fs), 0.0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("forces.csv");
    save_forces(&fs, &path).unwrap();
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("t,drag,lift\n"));
    let back = load_forces(&path).unwrap();
    assert_eq!((back.times, back.drag, back.lift), (fs.times.clone(), fs.drag.clone(), fs.lift.clone()));
}

#[test]
fn time_averaged_error_field_cases() {
    let st = setup();
    let d = &st.d;
    let p = &st.s.p;
    let zero = time_averaged_error_field(p, p);
    assert!(zero.iter().all(|&v| v == 0.0));
    let shifted = DenseMatrix::from_fn(p.rows(), p.cols(), |i, j| p[(i, j)] + 0.25);
    let c = time_averaged_error_field(p, &shifted);
    assert!(c.iter().all(|&v| (v - 0.25).abs() <= 1e-14));
    // nonnegative errors: the nodal average integrates to the time-averaged integral error
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let recon = DenseMatrix::from_fn(p.rows(), p.cols(), |i, j| p[(i, j)] - rng.gen_range(0.0..1.0));
    let field = time_averaged_error_field(p, &recon);
    let one = vec![1.0; d.n_p()];
    let integral = d.ops.m_p.bilinear(&one, &field);
    let per_step: f64 = (0..p.cols())
        .map(|j| {
            let e: Vec<f64> = (0..p.rows()).map(|i| p[(i, j)] - recon[(i, j)]).collect();
            d.ops.m_p.bilinear(&one, &e)
        })
        .sum::<f64>()
        / p.cols() as f64;
    assert!((integral - per_step).abs() <= 1e-12 * per_step);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("err.csv");
    save_error_field(&path, d.qh.node_coords(), &field).unwrap();
    let (header, rows) = podrom::io::read_csv(&path).unwrap();
    assert_eq!(header, ["x", "y", "avg_abs_err"]);
    assert_eq!(rows.len(), d.n_p());
    assert_eq!(rows[3][2], field[3]);
}

#[test]
fn band_ratio_detects_concentration_at_inner_cylinder() {
    let st = setup();
    let d = &st.d;
    let (c, r) = ([0.5, 0.0], 0.1);
    assert!((band_ratio(d, &vec![1.0; d.n_p()], c, r, 0.05) - 1.0).abs() <= 1e-12);
    let peaked: Vec<f64> =
        d.qh.node_coords().iter().map(|p| (-((p[0] - c[0]).hypot(p[1] - c[1]) - r).abs() / 0.02).exp()).collect();
    assert!(band_ratio(d, &peaked, c, r, 0.05) >= 2.0);
    let far: Vec<f64> = d.qh.node_coords().iter().map(|p| p[0].hypot(p[1]).powi(4)).collect();
    assert!(band_ratio(d, &far, c, r, 0.05) < 2.0);
}

#[test]
fn tables_have_fixed_schemas_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    emit_tables(&[], &[], &[], dir.path()).unwrap();
    for kind in [TableKind::SweepM, TableKind::SweepR, TableKind::MerVsPpe] {
        let text = std::fs::read_to_string(dir.path().join(kind.file())).unwrap();
        assert_eq!(text, format!("{}\n", kind.header().join(",")));
    }
    let report = |r, m, err, lr, lm| {
        let mut e = ErrorReport { meta: RunMeta { r, m, lambda_r: lr, lambda_m: lm, ..RunMeta::default() }, ..ErrorReport::default() };
        e.p.l1 = err;
        e
    };
    let sm = [report(50, 3, 6.533e-01, 0.0, 1.596e-01), report(50, 6, 1.594e-01, 0.0, 4.021e-02)];
    let sr = [report(10, 50, 2.5e-01, 19.22, 0.0)];
    let cmp = [(report(50, 3, 6.533e-01, 0.0, 0.0), report(50, 3, 6.754e-01, 0.0, 0.0))];
    emit_tables(&sm, &sr, &cmp, dir.path()).unwrap();
    assert_eq!(
        std::fs::read_to_string(dir.path().join(TableKind::SweepM.file())).unwrap(),
        "m,err_mer,lambda_m\n3,6.533e-01,1.596e-01\n6,1.594e-01,4.021e-02\n"
    );
    assert_eq!(
        std::fs::read_to_string(dir.path().join(TableKind::SweepR.file())).unwrap(),
        "r,err_mer,lambda_r\n10,2.500e-01,1.922e+01\n"
    );
    assert_eq!(
        read_table(&dir.path().join(TableKind::MerVsPpe.file()), TableKind::MerVsPpe).unwrap(),
        vec![TableRow { index: 3, a: 6.533e-01, b: 6.754e-01 }]
    );
    assert!(read_table(&dir.path().join(TableKind::SweepR.file()), TableKind::SweepM).is_err());
}

#[test]
fn pressure_stability_surrogate_holds_on_a_short_run() {
    let st = setup();
    let d = &st.d;
    let r = 8;
    let phi = st.phi.truncate(r).unwrap();
    let rank = pod_modes(&st.s.p, &d.ops.m_p, 1).unwrap().rank();
    let psi = pod_modes(&st.s.p, &d.ops.m_p, rank.min(6)).unwrap();
    let sup = build_supremizer_basis(d, &psi.modes, GsInner::L2).unwrap();
    let times = &st.s.times;
    let ops = build_rom_operators(d, &phi.modes, &Forcing::Rotational, times, st.s.v.col(0), 0.01).unwrap();
    let traj = run_rom(&ops).unwrap();
    let sys = build_mer_system(d, &phi.modes, &sup.z, &psi.modes, &Forcing::Rotational, times).unwrap();
    let pres = recover_mer(&traj, &sys, &vec![0.0; psi.modes.cols()]).unwrap();
    let rep = CompatibilityReport::compute(d, &phi.modes, &psi.modes, &sup, None).unwrap();
    let chk = stability_check(&ops, &traj, &pres, rep.beta_m, rep.alpha, rep.c_p, rep.c_r_h1, 7);
    assert!(chk.c_b_lower > 0.0 && chk.c_b_lower.is_finite());
    assert!(chk.holds(), "{chk:?}");
    let again = stability_check(&ops, &traj, &pres, rep.beta_m, rep.alpha, rep.c_p, rep.c_r_h1, 7);
    assert_eq!(chk, again);
}
