use std::f64::consts::PI;

use podrom::error::Error;
use podrom::mesh::*;
use proptest::prelude::*;

fn annulus(r: usize) -> Mesh {
    generate_offset_annulus(&DomainSpec::offset_annulus(r)).unwrap()
}

#[test]
fn annulus_boundary_vertices_lie_on_circles() {
    let m = annulus(1);
    let mut tags = std::collections::BTreeSet::new();
    for b in m.boundary_edges() {
        tags.insert(b.tag);
        for &v in &b.v {
            let [x, y] = m.vertices()[v];
            let outer = (x * x + y * y - 1.0).abs() < 1e-12;
            let inner = ((x - 0.5).powi(2) + y * y - 0.01).abs() < 1e-12;
            assert!(outer || inner, "({x}, {y})");
            match b.tag {
                BoundaryTag::Outer => assert!(outer),
                BoundaryTag::Inner => assert!(inner),
                BoundaryTag::Other => panic!("untagged boundary edge"),
            }
        }
    }
    assert_eq!(tags.len(), 2);
    assert!(m.min_angle_degrees() >= 20.0);
}

#[test]
fn invalid_annulus_specs_are_rejected() {
    let mut s = DomainSpec::offset_annulus(1);
    s.r2 = 1.5;
    assert!(matches!(generate_offset_annulus(&s), Err(Error::InvalidSpec(_))));
    let mut s = DomainSpec::offset_annulus(1);
    s.c1 = 0.95;
    assert!(matches!(generate_offset_annulus(&s), Err(Error::InvalidSpec(_))));
    let mut s = DomainSpec::offset_annulus(1);
    s.refinement = 0;
    assert!(matches!(generate_offset_annulus(&s), Err(Error::InvalidSpec(_))));
}

#[test]
fn annulus_area_defect_converges_quadratically() {
    let exact = PI * (1.0 - 0.01);
    let meshes: Vec<Mesh> = (1..=3).map(annulus).collect();
    let defects: Vec<f64> = meshes.iter().map(|m| exact - m.total_area()).collect();
    let h: Vec<f64> = meshes.iter().map(|m| m.max_edge_length()).collect();
    assert!(defects.iter().all(|d| *d > 0.0));
    for k in 0..2 {
        let r = (defects[k] / defects[k + 1]).ln() / (h[k] / h[k + 1]).ln();
        assert!(r > 1.5, "area defect rate {r}");
        assert!(h[k + 1] <= h[k], "max edge length must not grow");
    }
}

#[test]
fn unit_square_counts() {
    let m = generate_unit_square(1);
    assert_eq!((m.num_vertices(), m.num_triangles(), m.boundary_edges().len()), (4, 2, 4));
    let m = generate_unit_square(2);
    assert_eq!((m.num_vertices(), m.num_triangles()), (9, 8));
    assert_eq!(m.total_area(), 1.0);
    assert!(m.boundary_edges().iter().all(|b| b.tag == BoundaryTag::Outer));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn square_is_manifold_and_oriented(n in 1usize..12) {
        let m = generate_unit_square(n);
        for e in 0..m.num_edges() {
            let [_, t2] = m.edge_triangles(e);
            prop_assert_eq!(t2 == NONE, m.edge_tag(e).is_some());
        }
        prop_assert_eq!(m.num_interior_edges() + m.boundary_edges().len(), m.num_edges());
        for t in 0..m.num_triangles() {
            prop_assert!(m.triangle_area(t) > 0.0);
        }
        prop_assert!((m.total_area() - 1.0).abs() < 1e-14);
    }
}

#[test]
fn boundary_owner_orientation_keeps_domain_on_the_left() {
    let m = annulus(1);
    for i in 0..m.boundary_edges().len() {
        let (t, _, [a, b]) = m.boundary_edge_owner(i);
        let tri = m.triangles()[t];
        let c = *tri.iter().find(|&&v| v != a && v != b).unwrap();
        assert!(signed_area(m.vertices()[a], m.vertices()[b], m.vertices()[c]) > 0.0);
    }
}

#[test]
fn save_load_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("annulus.mesh");
    let m = annulus(1);
    save_mesh(&m, &p).unwrap();
    let back = load_mesh(&p).unwrap();
    assert_eq!(back, m);
    assert_eq!(back.vertices(), m.vertices());
    assert_eq!(back.fingerprint(), m.fingerprint());
}

#[test]
fn out_of_range_vertex_is_an_invariant_violation() {
    let text = "MESH2D 1\n3 1 3\n0 0\n1 0\n0 1\n0 1 3\n0 1 0\n1 2 0\n2 0 0\n";
    let err = mesh_from_text(text, "t").unwrap_err();
    assert!(matches!(err, Error::InvariantViolation { invariant: "index range", .. }), "{err}");
}

#[test]
fn negative_area_is_an_orientation_violation() {
    let text = "MESH2D 1\n3 1 3\n0 0\n1 0\n0 1\n0 2 1\n0 1 0\n1 2 0\n2 0 0\n";
    let err = mesh_from_text(text, "t").unwrap_err();
    assert!(matches!(err, Error::InvariantViolation { invariant: "orientation", .. }), "{err}");
}

#[test]
fn parse_errors_carry_line_numbers() {
    let text = "MESH2D 1\n3 1 3\n0 0\n1 x\n0 1\n";
    match mesh_from_text(text, "t") {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(mesh_from_text("MESH3D 1\n", "t"), Err(Error::Parse { line: 1, .. })));
}
