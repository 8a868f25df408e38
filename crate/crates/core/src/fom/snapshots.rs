//! Velocity and pressure snapshot sets on disk.

use std::fs;
use std::path::Path;

use super::Discretization;
use crate::error::{Error, Result};
use crate::io::{dense_fingerprint, read_podm, read_podm_vector, write_podm, write_podm_vector, Fingerprint, Manifest};
use crate::linalg::DenseMatrix;

#[derive(Clone, Debug)]
pub struct SnapshotSet {
    /// Velocity snapshots, one column per time.
    pub v: DenseMatrix<f64>,
    /// Pressure snapshots aligned with `v`.
    pub p: DenseMatrix<f64>,
    pub times: Vec<f64>,
    pub mesh_hash: String,
    pub space_hash: String,
    pub config: Vec<(String, String)>,
}

impl SnapshotSet {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Uniform spacing of the snapshot times, or `TimeGridMismatch`.
    pub fn spacing(&self) -> Result<f64> {
        if self.times.len() < 2 {
            return Err(Error::TimeGridMismatch("fewer than two snapshot times".into()));
        }
        let dt = self.times[1] - self.times[0];
        for w in self.times.windows(2) {
            if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1.0) {
                return Err(Error::TimeGridMismatch(format!("nonuniform snapshot spacing near t = {}", w[0])));
            }
        }
        Ok(dt)
    }
}

pub fn space_fingerprint(d: &Discretization) -> String {
    Fingerprint::new()
        .bytes(b"P2P1")
        .bytes(d.mesh.fingerprint().as_bytes())
        .usizes(&[d.n_u(), d.n_p()])
        .usizes(d.constraint.dofs())
        .finish()
}

pub fn save_snapshots(set: &SnapshotSet, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_podm(&dir.join("V.podm"), &set.v)?;
    write_podm(&dir.join("P.podm"), &set.p)?;
    write_podm_vector(&dir.join("times.podm"), &set.times)?;
    let mut m = Manifest::new();
    m.set("kind", "snapshots");
    m.set("count", set.len());
    m.set("n_u", set.v.rows());
    m.set("n_p", set.p.rows());
    m.set("mesh_hash", &set.mesh_hash);
    m.set("space_hash", &set.space_hash);
    m.set("V_hash", dense_fingerprint(&set.v));
    m.set("P_hash", dense_fingerprint(&set.p));
    m.set("times_hash", Fingerprint::new().f64s(&set.times).finish());
    for (k, v) in &set.config {
        m.set(&format!("config.{k}"), v);
    }
    m.save(&dir.join("manifest.txt"))
}

/// Loads a snapshot directory; `expected_mesh` rejects sets computed on another mesh.
pub fn load_snapshots(dir: &Path, expected_mesh: Option<&str>) -> Result<SnapshotSet> {
    let m = Manifest::load(&dir.join("manifest.txt"))?;
    if let Some(h) = expected_mesh {
        m.check("mesh_hash", h)?;
    }
    let v = read_podm(&dir.join("V.podm"))?;
    let p = read_podm(&dir.join("P.podm"))?;
    let times = read_podm_vector(&dir.join("times.podm"))?;
    m.check("V_hash", &dense_fingerprint(&v))?;
    m.check("P_hash", &dense_fingerprint(&p))?;
    m.check("times_hash", &Fingerprint::new().f64s(&times).finish())?;
    if v.cols() != times.len() || p.cols() != times.len() {
        return Err(Error::TimeGridMismatch(format!(
            "{} velocity and {} pressure columns for {} times",
            v.cols(),
            p.cols(),
            times.len()
        )));
    }
    let config = m
        .entries()
        .iter()
        .filter_map(|(k, v)| k.strip_prefix("config.").map(|k| (k.to_string(), v.clone())))
        .collect();
    Ok(SnapshotSet {
        v,
        p,
        times,
        mesh_hash: m.require("mesh_hash")?.to_string(),
        space_hash: m.require("space_hash")?.to_string(),
        config,
    })
}
