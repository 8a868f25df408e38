//! Line-oriented ASCII mesh files.
//!
//! ```text
//! MESH2D 1
//! V T E
//! x y          (V lines)
//! i j k        (T lines)
//! i j tag      (E lines, 0 = outer, 1 = inner, 2 = other)
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{BoundaryEdge, BoundaryTag, Mesh};
use crate::error::{Error, Result};

pub fn mesh_to_text(mesh: &Mesh) -> String {
    let mut s = String::new();
    s.push_str("MESH2D 1\n");
    let _ = writeln!(s, "{} {} {}", mesh.num_vertices(), mesh.num_triangles(), mesh.boundary_edges().len());
    // Debug formatting of f64 is the shortest string that parses back to the same value
    for p in mesh.vertices() {
        let _ = writeln!(s, "{:?} {:?}", p[0], p[1]);
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    for b in mesh.boundary_edges() {
        let _ = writeln!(s, "{} {} {}", b.v[0], b.v[1], b.tag.code());
    }
    s
}

pub fn save_mesh(mesh: &Mesh, path: &Path) -> Result<()> {
    fs::write(path, mesh_to_text(mesh))?;
    Ok(())
}

pub fn load_mesh(path: &Path) -> Result<Mesh> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    mesh_from_text(&fs::read_to_string(path)?, &path.display().to_string())
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    file: &'a str,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_fields(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        loop {
            match self.iter.next() {
                Some((i, l)) => {
                    self.last = i + 1;
                    let f: Vec<&str> = l.split_whitespace().collect();
                    if !f.is_empty() {
                        return Ok((i + 1, f));
                    }
                }
                None => return Err(Error::parse(self.file, self.last + 1, format!("unexpected end of file, expected {what}"))),
            }
        }
    }

    fn numbers<T: std::str::FromStr>(&mut self, n: usize, what: &str) -> Result<Vec<T>> {
        let (line, f) = self.next_fields(what)?;
        if f.len() != n {
            return Err(Error::parse(self.file, line, format!("expected {n} fields for {what}, found {}", f.len())));
        }
        f.iter()
            .map(|s| s.parse::<T>().map_err(|_| Error::parse(self.file, line, format!("bad number `{s}` in {what}"))))
            .collect()
    }
}

pub fn mesh_from_text(text: &str, file: &str) -> Result<Mesh> {
    let mut lines = Lines { iter: text.lines().enumerate(), file, last: 0 };
    let (line, magic) = lines.next_fields("header")?;
    if magic != ["MESH2D", "1"] {
        return Err(Error::parse(file, line, "expected header `MESH2D 1`"));
    }
    let counts: Vec<usize> = lines.numbers(3, "counts")?;
    let (nv, nt, ne) = (counts[0], counts[1], counts[2]);
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let p: Vec<f64> = lines.numbers(2, "vertex")?;
        vertices.push([p[0], p[1]]);
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let t: Vec<usize> = lines.numbers(3, "triangle")?;
        triangles.push([t[0], t[1], t[2]]);
    }
    let mut edges = Vec::with_capacity(ne);
    for _ in 0..ne {
        let line_no = lines.last + 1;
        let e: Vec<usize> = lines.numbers(3, "boundary edge")?;
        let tag = u8::try_from(e[2])
            .ok()
            .and_then(BoundaryTag::from_code)
            .ok_or_else(|| Error::parse(file, line_no, format!("unknown boundary tag {}", e[2])))?;
        edges.push(BoundaryEdge { v: [e[0], e[1]], tag });
    }
    if let Some((i, l)) = lines.iter.find(|(_, l)| !l.trim().is_empty()) {
        return Err(Error::parse(file, i + 1, format!("trailing content `{}`", l.trim())));
    }
    Mesh::new(vertices, triangles, edges)
}
