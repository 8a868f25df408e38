mod common;

use std::sync::OnceLock;

use common::{annulus_run, FieldEval};
use podrom::fom::{Discretization, SnapshotSet};
use podrom::linalg::{dot, generalized_symmetric_eigen, Cholesky, DenseMatrix};
use podrom::pod::{pod_modes, PodBasis};
use podrom::supremizer::{
    build_supremizer_basis, c_r_h1, compute_inf_sup, fe_inf_sup, load_supremizers, orthonormalize,
    poincare_constant, principal_angle, riesz_supremizer, save_supremizers, CompatibilityReport, GsInner,
    SupremizerBasis,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Setup {
    d: Discretization,
    phi: PodBasis,
    psi: PodBasis,
    sup: SupremizerBasis,
}

fn setup() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| {
        let (d, s): (Discretization, SnapshotSet) = annulus_run(200, 0.01);
        let full = |v: &DenseMatrix<f64>, m| {
            let r = pod_modes(v, m, 1).unwrap().rank();
            pod_modes(v, m, r).unwrap()
        };
        let phi = full(&s.v, &d.ops.m_u);
        let psi = full(&s.p, &d.ops.m_p);
        let sup = build_supremizer_basis(&d, &psi.modes, GsInner::L2).unwrap();
        Setup { d, phi, psi, sup }
    })
}

fn random_velocity(d: &Discretization, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..d.n_u()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    d.constraint.zeroed(&v)
}

#[test]
fn riesz_solve_is_linear_and_vanishes_on_zero() {
    let st = setup();
    let d = &st.d;
    let (z, res) = riesz_supremizer(d, &vec![0.0; d.n_p()]).unwrap();
    assert!(z.iter().all(|&v| v == 0.0) && res == 0.0);
    let (p1, p2) = (st.psi.modes.col(0), st.psi.modes.col(3));
    let (s1, _) = riesz_supremizer(d, p1).unwrap();
    let (s2, _) = riesz_supremizer(d, p2).unwrap();
    let comb: Vec<f64> = p1.iter().zip(p2).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
    let (s3, res) = riesz_supremizer(d, &comb).unwrap();
    assert!(res <= 1e-11);
    let scale = s3.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..d.n_u() {
        assert!((s3[i] - (2.0 * s1[i] - 0.5 * s2[i])).abs() <= 1e-10 * scale);
    }
}

#[test]
fn supremizer_attains_the_sup() {
    let st = setup();
    let d = &st.d;
    let psi = st.psi.modes.col(2);
    let ratio = |v: &[f64]| {
        let num = d.ops.b.bilinear(psi, v);
        num / (d.ops.s_u.bilinear(v, v).sqrt() * d.ops.m_p.bilinear(psi, psi).sqrt())
    };
    let (s, _) = riesz_supremizer(d, psi).unwrap();
    // (div s, psi) = -(grad s, grad s) < 0, so the supremum is attained by -s
    let neg: Vec<f64> = s.iter().map(|v| -v).collect();
    let best = ratio(&neg);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut sampled = f64::MIN;
    for k in 0..200 {
        let mut v = random_velocity(d, &mut rng);
        if k % 2 == 0 {
            // perturbations of the maximizer probe its neighborhood
            let eps = 1e-3 * (k as f64 + 1.0);
            let ns = s.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            v.iter_mut().zip(&neg).for_each(|(a, b)| *a = b + eps * ns * *a);
        }
        sampled = sampled.max(ratio(&v).abs());
    }
    assert!(sampled <= best + 1e-8, "sampled {sampled} vs {best}");
}

#[test]
fn basis_invariants() {
    let st = setup();
    let d = &st.d;
    let z = &st.sup.z;
    let g = d.ops.m_u.congruence(z);
    assert!(g.sub(&DenseMatrix::identity(z.cols())).max_abs() <= 1e-10);
    for j in 0..z.cols() {
        assert_eq!(d.constraint.max_violation(z.col(j)), 0.0);
        let gz = d.ops.s_u.bilinear(z.col(j), z.col(j)).sqrt();
        for i in 0..st.phi.kept {
            let p = st.phi.modes.col(i);
            let gp = d.ops.s_u.bilinear(p, p).sqrt();
            let c = d.ops.s_u.bilinear(z.col(j), p);
            assert!(c.abs() <= 1e-8 * gz * gp, "zeta {j}, phi {i}: {c}");
        }
    }
    let one = build_supremizer_basis(d, &st.psi.modes.leading_cols(1), GsInner::L2).unwrap();
    let s = &one.raw.col(0);
    let n = d.ops.m_u.bilinear(s, s).sqrt();
    for (a, b) in one.z.col(0).iter().zip(s.iter()) {
        assert!((a - b / n).abs() <= 1e-14 * (b / n).abs().max(1.0));
    }
    let h1 = build_supremizer_basis(d, &st.psi.modes.leading_cols(6), GsInner::H1).unwrap();
    assert!(d.ops.s_u.congruence(&h1.z).sub(&DenseMatrix::identity(6)).max_abs() <= 1e-10);
}

#[test]
fn inf_sup_matches_block_pencil_and_dominates_fe_constant() {
    let st = setup();
    let d = &st.d;
    let m = st.psi.kept;
    let beta = compute_inf_sup(&st.sup.z, &st.psi.modes, &d.ops.s_u, &d.ops.b, &d.ops.m_p).unwrap();
    // symmetric block pencil [0 D^T; D 0] x = sigma diag(K, G) x on the unnormalized bases
    let k = d.ops.s_u.congruence(&st.sup.raw);
    let gp = d.ops.m_p.congruence(&st.psi.modes);
    let dm = d.ops.b.project(&st.psi.modes, &st.sup.raw);
    let a = DenseMatrix::from_fn(2 * m, 2 * m, |i, j| match (i < m, j < m) {
        (true, false) => dm[(j - m, i)],
        (false, true) => dm[(i - m, j)],
        _ => 0.0,
    });
    let bm = DenseMatrix::from_fn(2 * m, 2 * m, |i, j| match (i < m, j < m) {
        (true, true) => k[(i, j)],
        (false, false) => gp[(i - m, j - m)],
        _ => 0.0,
    });
    let ev = generalized_symmetric_eigen(&a, &bm).unwrap().values;
    let oracle = ev.iter().map(|v| v.abs()).fold(f64::MAX, f64::min);
    assert!((beta - oracle).abs() <= 1e-8 * oracle.max(1.0), "{beta} vs {oracle}");

    let bh = fe_inf_sup(d, 1).unwrap();
    assert!(!bh.subspace_estimate);
    assert!(bh.value > 0.0);
    for mm in 1..=m {
        let b = compute_inf_sup(&st.sup.z.leading_cols(mm), &st.psi.modes.leading_cols(mm), &d.ops.s_u, &d.ops.b, &d.ops.m_p)
            .unwrap();
        assert!(b >= bh.value, "m = {mm}: {b} < {}", bh.value);
    }
}

#[test]
fn fe_inf_sup_matches_dense_schur_oracle_on_small_square() {
    let d = Discretization::new(std::sync::Arc::new(podrom::mesh::DomainSpec::unit_square(3).build().unwrap()));
    let bh = fe_inf_sup(&d, 0).unwrap().value;
    // eigenvalues of B_f S_f^{-1} B_f^T against M_p on free velocity dofs; the constant mode gives 0
    let free = d.constraint.free_dofs();
    let all_p: Vec<usize> = (0..d.n_p()).collect();
    let sf = d.ops.s_u.submatrix(&free, &free).to_dense();
    let bf = d.ops.b.submatrix(&all_p, &free).to_dense();
    let ch = Cholesky::new(&sf, 1e-14).unwrap();
    let w = ch.forward_matrix(&bf.transpose());
    let schur = w.gram();
    let ev = generalized_symmetric_eigen(&schur, &d.ops.m_p.to_dense()).unwrap().values;
    assert!(ev[0].abs() < 1e-10);
    assert!((bh - ev[1].sqrt()).abs() <= 1e-8, "{bh} vs {}", ev[1].sqrt());
}

#[test]
fn principal_angle_cases() {
    let st = setup();
    let d = &st.d;
    let m = &d.ops.m_u;
    let phi = st.phi.modes.leading_cols(5);
    // remove the span of phi from a few supremizers
    let mut cols = Vec::new();
    for j in 0..3 {
        let mut v = st.sup.z.col(j).to_vec();
        for i in 0..5 {
            let h = m.bilinear(phi.col(i), &v);
            v.iter_mut().zip(phi.col(i)).for_each(|(a, b)| *a -= h * b);
        }
        cols.push(v);
    }
    let w = orthonormalize(&DenseMatrix::from_columns(d.n_u(), &cols), m).unwrap();
    let (a0, t0) = principal_angle(&phi, &w, m).unwrap();
    assert!(a0 < 1e-10 && (t0 - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
    let planted: Vec<f64> = phi.col(1).iter().zip(w.col(0)).map(|(a, b)| (a + b) / 2f64.sqrt()).collect();
    let (a1, _) = principal_angle(&phi, &DenseMatrix::from_columns(d.n_u(), &[planted]), m).unwrap();
    assert!((a1 - 0.5f64.sqrt()).abs() < 1e-10);

    let z = st.sup.z.leading_cols(6);
    let (alpha, _) = principal_angle(&phi, &z, m).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut best = 0.0f64;
    for _ in 0..10_000 {
        let a: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = phi.matvec(&a);
        let v = z.matvec(&c);
        let r = m.bilinear(&u, &v).abs() / (m.bilinear(&u, &u) * m.bilinear(&v, &v)).sqrt();
        best = best.max(r);
    }
    assert!(best <= alpha + 1e-6, "{best} vs {alpha}");
    assert!(alpha < 1.0);
    let mut prev = 0.0;
    for r in [1, 2, 4, 8, 16, st.phi.kept] {
        let (a, _) = principal_angle(&st.phi.modes.leading_cols(r), &z, m).unwrap();
        assert!(a >= prev - 1e-12 && a < 1.0, "r = {r}: {a} < {prev}");
        prev = a;
    }
}

#[test]
fn c_r_h1_matches_summed_field() {
    let st = setup();
    let d = &st.d;
    let p1 = st.phi.modes.leading_cols(1);
    let g1 = d.ops.s_u.bilinear(p1.col(0), p1.col(0)).sqrt();
    assert!((c_r_h1(&p1, &d.ops.s_u) - g1).abs() <= 1e-12 * g1);
    let r = 7;
    let phi = st.phi.modes.leading_cols(r);
    let sum: Vec<f64> = (0..d.n_u()).map(|i| (0..r).map(|k| phi[(i, k)]).sum()).collect();
    let oracle = FieldEval::new(&d.mesh).h1_inner(&sum, &sum).sqrt();
    let c = c_r_h1(&phi, &d.ops.s_u);
    assert!((c - oracle).abs() <= 1e-10 * oracle, "{c} vs {oracle}");
}

#[test]
fn poincare_constant_matches_dense_eigensolve() {
    let d = Discretization::new(std::sync::Arc::new(podrom::mesh::DomainSpec::unit_square(4).build().unwrap()));
    let cp = poincare_constant(&d).unwrap();
    let free = d.constraint.free_dofs();
    let s = d.ops.s_u.submatrix(&free, &free).to_dense();
    let m = d.ops.m_u.submatrix(&free, &free).to_dense();
    let lmin = generalized_symmetric_eigen(&s, &m).unwrap().values[0];
    assert!((cp - 1.0 / lmin.sqrt()).abs() <= 1e-8 * cp, "{cp} vs {}", 1.0 / lmin.sqrt());
    // the continuous constant of the unit square is 1 / (sqrt(2) pi)
    assert!(cp <= 1.0 / (2f64.sqrt() * std::f64::consts::PI));
}

#[test]
fn dual_norm_transfer_inequality() {
    let st = setup();
    let d = &st.d;
    let r = st.phi.kept.min(12);
    let phi = st.phi.modes.leading_cols(r);
    let z = &st.sup.z;
    let report = CompatibilityReport::compute(d, &phi, &st.psi.modes, &st.sup, None).unwrap();
    let dual = |basis: &DenseMatrix<f64>, u: &[f64]| {
        let g = basis.tr_matvec(&d.ops.m_u.matvec(u));
        let k = d.ops.s_u.congruence(basis);
        let x = Cholesky::new(&k, 1e-14).unwrap().solve(&g);
        dot(&g, &x).sqrt()
    };
    let bound = report.alpha * report.c_p * report.c_r_h1;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..50 {
        let a: Vec<f64> = (0..r).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = phi.matvec(&a);
        let lhs = dual(z, &u);
        let rhs = bound * dual(&phi, &u);
        assert!(lhs <= rhs, "{lhs} > {rhs}");
    }
    assert!(report.beta_m > 0.0 && report.alpha < 1.0 && report.c_r_h1 >= 0.0);
}

#[test]
fn supremizers_round_trip() {
    let st = setup();
    let dir = tempfile::tempdir().unwrap();
    let sup = st.sup.truncate(4);
    save_supremizers(&sup, None, dir.path()).unwrap();
    let back = load_supremizers(dir.path()).unwrap();
    assert_eq!(back.z.data(), sup.z.data());
    assert_eq!(back.raw.data(), sup.raw.data());
    assert_eq!(back.residuals, sup.residuals);
    assert_eq!(back.inner, GsInner::L2);
}
