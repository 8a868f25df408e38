//! Structured unit-square meshes and graded offset-annulus meshes.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

use delaunator::{triangulate, Point as DPoint};

use super::{min_angle, signed_area, BoundaryEdge, BoundaryTag, DomainKind, DomainSpec, Mesh, Point};
use crate::error::{Error, Result};

const TAG_TOL: f64 = 1e-9;
const MIN_ANGLE_DEG: f64 = 20.0;
const SMOOTHING_PASSES: usize = 5;
const SQRT3_2: f64 = 0.866_025_403_784_438_6;

pub fn generate_unit_square(n: usize) -> Mesh {
    assert!(n >= 1);
    let stride = n + 1;
    let id = |i: usize, j: usize| j * stride + i;
    let h = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity(stride * stride);
    for j in 0..=n {
        for i in 0..=n {
            // endpoints exactly 0 and 1
            let x = if i == n { 1.0 } else { i as f64 * h };
            let y = if j == n { 1.0 } else { j as f64 * h };
            vertices.push([x, y]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let mut edges = Vec::with_capacity(4 * n);
    let tag = BoundaryTag::Outer;
    for i in 0..n {
        edges.push(BoundaryEdge { v: [id(i, 0), id(i + 1, 0)], tag });
    }
    for j in 0..n {
        edges.push(BoundaryEdge { v: [id(n, j), id(n, j + 1)], tag });
    }
    for i in (0..n).rev() {
        edges.push(BoundaryEdge { v: [id(i + 1, n), id(i, n)], tag });
    }
    for j in (0..n).rev() {
        edges.push(BoundaryEdge { v: [id(0, j + 1), id(0, j)], tag });
    }
    Mesh::new(vertices, triangles, edges).expect("structured square mesh is valid")
}

struct Geometry {
    r1: f64,
    r2: f64,
    c: Point,
    h_in: f64,
    h_out: f64,
}

impl Geometry {
    fn dist_inner(&self, p: Point) -> f64 {
        (p[0] - self.c[0]).hypot(p[1] - self.c[1]) - self.r2
    }

    fn dist_outer(&self, p: Point) -> f64 {
        self.r1 - p[0].hypot(p[1])
    }

    fn size(&self, p: Point) -> f64 {
        self.h_out.min(self.h_in + 0.3 * self.dist_inner(p).max(0.0))
    }
}

struct SpatialHash {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl SpatialHash {
    fn new(cell: f64) -> Self {
        Self { cell, buckets: HashMap::new() }
    }

    fn key(&self, p: Point) -> (i64, i64) {
        ((p[0] / self.cell).floor() as i64, (p[1] / self.cell).floor() as i64)
    }

    fn insert(&mut self, p: Point, id: usize) {
        let k = self.key(p);
        self.buckets.entry(k).or_default().push(id);
    }

    /// Any stored point within `r` (requires `r <= cell`).
    fn any_within(&self, pts: &[Point], p: Point, r: f64) -> bool {
        let (kx, ky) = self.key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(b) = self.buckets.get(&(kx + dx, ky + dy)) {
                    if b.iter().any(|&i| (pts[i][0] - p[0]).hypot(pts[i][1] - p[1]) < r) {
                        return true;
                    }
                }
            }
        }
        false
    }
}

fn circle_points(center: Point, radius: f64, n: usize, phase: f64) -> Vec<Point> {
    (0..n)
        .map(|k| {
            let th = 2.0 * PI * (k as f64 + phase) / n as f64;
            [center[0] + radius * th.cos(), center[1] + radius * th.sin()]
        })
        .collect()
}

fn place_points(g: &Geometry, refinement: usize) -> (Vec<Point>, usize, usize) {
    let n_out = ((2.0 * PI * g.r1 / g.h_out).ceil() as usize).max(12);
    let n_in = 24 * refinement;
    let mut pts = circle_points([0.0, 0.0], g.r1, n_out, 0.0);
    pts.extend(circle_points(g.c, g.r2, n_in, 0.0));

    let mut candidates = Vec::new();
    // graded rings around the inner circle until the far-field size is reached
    let mut rho = g.r2;
    let mut ring = 0usize;
    loop {
        let h_at = |rho: f64| g.h_out.min(g.h_in + 0.3 * (rho - g.r2));
        let mut step = SQRT3_2 * h_at(rho);
        step = SQRT3_2 * h_at(rho + 0.5 * step);
        rho += step;
        ring += 1;
        let h = h_at(rho);
        if rho > g.r1 + g.c[0].hypot(g.c[1]) {
            break;
        }
        let n = ((2.0 * PI * rho / h).round() as usize).max(6);
        candidates.extend(circle_points(g.c, rho, n, if ring % 2 == 1 { 0.5 } else { 0.0 }));
        if h >= g.h_out && rho - g.r2 > 2.0 * g.h_out + (g.h_out - g.h_in) / 0.3 {
            break;
        }
    }
    // concentric rings inward from the outer circle
    let mut big_r = g.r1;
    ring = 0;
    loop {
        big_r -= SQRT3_2 * g.h_out;
        ring += 1;
        if big_r < 0.5 * g.h_out {
            candidates.push([0.0, 0.0]);
            break;
        }
        let n = ((2.0 * PI * big_r / g.h_out).round() as usize).max(6);
        candidates.extend(circle_points([0.0, 0.0], big_r, n, if ring % 2 == 1 { 0.5 } else { 0.0 }));
    }

    let mut hash = SpatialHash::new(g.h_out);
    for (i, &p) in pts.iter().enumerate() {
        hash.insert(p, i);
    }
    for p in candidates {
        let h = g.size(p);
        if g.dist_outer(p) < 0.7 * h || g.dist_inner(p) < 0.7 * h {
            continue;
        }
        if hash.any_within(&pts, p, 0.75 * h) {
            continue;
        }
        hash.insert(p, pts.len());
        pts.push(p);
    }
    (pts, n_out, n_in)
}

/// Delaunay triangulation restricted to the annulus, counterclockwise.
fn triangulate_domain(g: &Geometry, pts: &[Point]) -> Vec<[usize; 3]> {
    let dp: Vec<DPoint> = pts.iter().map(|p| DPoint { x: p[0], y: p[1] }).collect();
    let tri = triangulate(&dp);
    let mut out = Vec::with_capacity(tri.triangles.len() / 3);
    for t in tri.triangles.chunks_exact(3) {
        let mut t = [t[0], t[1], t[2]];
        let [a, b, c] = [pts[t[0]], pts[t[1]], pts[t[2]]];
        let area = signed_area(a, b, c);
        if area == 0.0 {
            continue;
        }
        if area < 0.0 {
            t.swap(1, 2);
        }
        let cen = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
        if g.dist_inner(cen) <= 0.0 || g.dist_outer(cen) <= 0.0 {
            continue;
        }
        out.push(t);
    }
    out
}

fn vertex_neighbors(n: usize, tris: &[[usize; 3]]) -> Vec<Vec<usize>> {
    let mut nb: Vec<Vec<usize>> = vec![Vec::new(); n];
    for t in tris {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            nb[a].push(b);
            nb[b].push(a);
        }
    }
    for v in &mut nb {
        v.sort_unstable();
        v.dedup();
    }
    nb
}

fn vertex_triangles(n: usize, tris: &[[usize; 3]]) -> Vec<Vec<usize>> {
    let mut vt = vec![Vec::new(); n];
    for (i, t) in tris.iter().enumerate() {
        for &v in t {
            vt[v].push(i);
        }
    }
    vt
}

/// One pass of Laplacian smoothing; a move is kept only if the worst incident angle does not get worse.
fn smooth(pts: &mut [Point], tris: &[[usize; 3]], fixed: usize) {
    let nb = vertex_neighbors(pts.len(), tris);
    let vt = vertex_triangles(pts.len(), tris);
    let worst = |pts: &[Point], v: usize| {
        vt[v]
            .iter()
            .map(|&t| {
                let tr = tris[t];
                let (a, b, c) = (pts[tr[0]], pts[tr[1]], pts[tr[2]]);
                if signed_area(a, b, c) <= 0.0 {
                    -1.0
                } else {
                    min_angle(a, b, c)
                }
            })
            .fold(f64::INFINITY, f64::min)
    };
    for v in fixed..pts.len() {
        if nb[v].is_empty() {
            continue;
        }
        let k = nb[v].len() as f64;
        let target = [
            nb[v].iter().map(|&u| pts[u][0]).sum::<f64>() / k,
            nb[v].iter().map(|&u| pts[u][1]).sum::<f64>() / k,
        ];
        let old = pts[v];
        let before = worst(pts, v);
        pts[v] = target;
        if worst(pts, v) < before {
            pts[v] = old;
        }
    }
}

fn boundary_loops_present(tris: &[[usize; 3]], n_out: usize, n_in: usize) -> Result<()> {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in tris {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut expected = HashSet::new();
    for k in 0..n_out {
        let (a, b) = (k, (k + 1) % n_out);
        expected.insert((a.min(b), a.max(b)));
    }
    for k in 0..n_in {
        let (a, b) = (n_out + k, n_out + (k + 1) % n_in);
        expected.insert((a.min(b), a.max(b)));
    }
    for e in &expected {
        if count.get(e) != Some(&1) {
            return Err(Error::MeshQualityFailure(format!("boundary segment {e:?} is not recovered")));
        }
    }
    let boundary = count.iter().filter(|(_, &c)| c == 1).count();
    if boundary != expected.len() || count.values().any(|&c| c > 2) {
        return Err(Error::MeshQualityFailure("triangulation does not bound the annulus".into()));
    }
    Ok(())
}

fn tag_for(g: &Geometry, p: Point) -> BoundaryTag {
    if (p[0].hypot(p[1]) - g.r1).abs() < TAG_TOL {
        BoundaryTag::Outer
    } else if ((p[0] - g.c[0]).hypot(p[1] - g.c[1]) - g.r2).abs() < TAG_TOL {
        BoundaryTag::Inner
    } else {
        BoundaryTag::Other
    }
}

pub fn generate_offset_annulus(spec: &DomainSpec) -> Result<Mesh> {
    if spec.kind != DomainKind::OffsetAnnulus {
        return Err(Error::InvalidSpec("expected an offset annulus specification".into()));
    }
    spec.validate()?;
    let refinement = spec.refinement;
    let h_out = 0.09 * spec.r1 / refinement as f64;
    let n_in = 24 * refinement;
    let h_in = (2.0 * PI * spec.r2 / n_in as f64).min(h_out);
    let g = Geometry { r1: spec.r1, r2: spec.r2, c: spec.inner_center(), h_in, h_out };

    let (mut pts, n_out, n_in) = place_points(&g, refinement);
    let fixed = n_out + n_in;
    let mut tris = triangulate_domain(&g, &pts);
    boundary_loops_present(&tris, n_out, n_in)?;
    for _ in 0..SMOOTHING_PASSES {
        smooth(&mut pts, &tris, fixed);
        tris = triangulate_domain(&g, &pts);
        boundary_loops_present(&tris, n_out, n_in)?;
    }

    let worst = tris
        .iter()
        .map(|t| min_angle(pts[t[0]], pts[t[1]], pts[t[2]]))
        .fold(f64::INFINITY, f64::min)
        .to_degrees();
    if worst < MIN_ANGLE_DEG {
        return Err(Error::MeshQualityFailure(format!(
            "minimum angle {worst:.2} degrees below {MIN_ANGLE_DEG} at refinement {refinement}"
        )));
    }

    // drop vertices not used by any triangle, keeping boundary points first
    let mut used = vec![false; pts.len()];
    tris.iter().flatten().for_each(|&v| used[v] = true);
    let mut remap = vec![usize::MAX; pts.len()];
    let mut vertices = Vec::with_capacity(pts.len());
    for (i, p) in pts.iter().enumerate() {
        if used[i] {
            remap[i] = vertices.len();
            vertices.push(*p);
        }
    }
    let triangles: Vec<[usize; 3]> = tris.iter().map(|t| t.map(|v| remap[v])).collect();

    let mut edges = Vec::with_capacity(fixed);
    let mut owner: HashMap<(usize, usize), [usize; 2]> = HashMap::new();
    for t in &triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            let e = owner.entry((a.min(b), a.max(b))).or_insert([a, b]);
            if *e != [a, b] {
                *e = [usize::MAX, usize::MAX];
            }
        }
    }
    let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
    for t in &triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *counts.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut boundary: Vec<[usize; 2]> =
        counts.iter().filter(|(_, &c)| c == 1).map(|(k, _)| owner[k]).collect();
    boundary.sort_unstable();
    for v in boundary {
        let (ta, tb) = (tag_for(&g, vertices[v[0]]), tag_for(&g, vertices[v[1]]));
        let tag = if ta == tb { ta } else { BoundaryTag::Other };
        edges.push(BoundaryEdge { v, tag });
    }
    Mesh::new(vertices, triangles, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_counts() {
        let m = generate_unit_square(1);
        assert_eq!((m.num_vertices(), m.num_triangles(), m.boundary_edges().len()), (4, 2, 4));
        let m = generate_unit_square(2);
        assert_eq!((m.num_vertices(), m.num_triangles()), (9, 8));
        assert_eq!(m.total_area(), 1.0);
    }

    #[test]
    fn annulus_quality() {
        let m = generate_offset_annulus(&DomainSpec::offset_annulus(1)).unwrap();
        assert!(m.min_angle_degrees() >= 20.0);
        assert!(m.boundary_edges().iter().all(|b| b.tag != BoundaryTag::Other));
        eprintln!("V={} T={} E={} min angle {:.2}", m.num_vertices(), m.num_triangles(), m.num_edges(), m.min_angle_degrees());
    }
}
