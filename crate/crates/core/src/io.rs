//! Binary matrix files, key=value manifests, fingerprints and CSV number formatting.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, DenseMatrix};

const PODM_MAGIC: &[u8; 4] = b"PODM";
const PODM_VERSION: u32 = 1;

pub fn write_podm(path: &Path, m: &DenseMatrix<f64>) -> Result<()> {
    let rows = u32::try_from(m.rows()).map_err(|_| Error::Config("matrix too tall for PODM".into()))?;
    let cols = u32::try_from(m.cols()).map_err(|_| Error::Config("matrix too wide for PODM".into()))?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(PODM_MAGIC)?;
    w.write_all(&PODM_VERSION.to_le_bytes())?;
    w.write_all(&rows.to_le_bytes())?;
    w.write_all(&cols.to_le_bytes())?;
    for v in m.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_podm_vector(path: &Path, v: &[f64]) -> Result<()> {
    write_podm(path, &DenseMatrix::from_col_major(v.len(), 1, v.to_vec()))
}

pub fn read_podm(path: &Path) -> Result<DenseMatrix<f64>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let name = path.display().to_string();
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[..4] != PODM_MAGIC {
        return Err(Error::parse(name, 1, "missing PODM magic"));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[4 * k..4 * k + 4].try_into().unwrap());
    if word(1) != PODM_VERSION {
        return Err(Error::parse(name, 1, format!("unsupported PODM version {}", word(1))));
    }
    let (rows, cols) = (word(2) as usize, word(3) as usize);
    let expected = 16 + 8 * rows * cols;
    if bytes.len() != expected {
        return Err(Error::parse(
            name,
            1,
            format!("expected {expected} bytes for {rows}x{cols}, found {}", bytes.len()),
        ));
    }
    let data = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(DenseMatrix::from_col_major(rows, cols, data))
}

pub fn read_podm_vector(path: &Path) -> Result<Vec<f64>> {
    let m = read_podm(path)?;
    if m.cols() != 1 {
        return Err(Error::parse(path.display().to_string(), 1, "expected a single column"));
    }
    Ok(m.into_data())
}

/// Ordered `key=value` text file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        if let Some(e) = self.entries.iter_mut().find(|(k, _)| k == key) {
            e.1 = value;
        } else {
            self.entries.push((key.to_string(), value));
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Parse {
            file: "manifest.txt".into(),
            line: 0,
            msg: format!("missing key `{key}`"),
        })
    }

    pub fn require_usize(&self, key: &str) -> Result<usize> {
        let v = self.require(key)?;
        v.parse().map_err(|_| Error::parse("manifest.txt", 0, format!("`{key}` is not an integer: {v}")))
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        let v = self.require(key)?;
        v.parse().map_err(|_| Error::parse("manifest.txt", 0, format!("`{key}` is not a number: {v}")))
    }

    /// Fails with `FingerprintMismatch` unless `key` holds `expected`.
    pub fn check(&self, key: &str, expected: &str) -> Result<()> {
        let found = self.require(key)?;
        if found != expected {
            return Err(Error::FingerprintMismatch {
                what: key.to_string(),
                expected: expected.to_string(),
                found: found.to_string(),
            });
        }
        Ok(())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut m = Self::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(file, no + 1, format!("expected key=value, got `{line}`")))?;
            m.set(k.trim(), v.trim());
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::parse(&fs::read_to_string(path)?, &path.display().to_string())
    }
}

/// Incremental SHA-256 over numeric data, rendered as lowercase hex.
#[derive(Clone, Default)]
pub struct Fingerprint {
    hasher: Sha256,
}

impl Fingerprint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.hasher.update(b);
        self
    }

    pub fn f64s(&mut self, v: &[f64]) -> &mut Self {
        for x in v {
            self.hasher.update(x.to_le_bytes());
        }
        self
    }

    pub fn usizes(&mut self, v: &[usize]) -> &mut Self {
        for x in v {
            self.hasher.update((*x as u64).to_le_bytes());
        }
        self
    }

    pub fn dense(&mut self, m: &DenseMatrix<f64>) -> &mut Self {
        self.usizes(&[m.rows(), m.cols()]).f64s(m.data())
    }

    pub fn sparse(&mut self, m: &CsrMatrix<f64>) -> &mut Self {
        self.usizes(&[m.rows(), m.cols()])
            .usizes(m.row_ptr())
            .usizes(m.col_idx())
            .f64s(m.vals())
    }

    pub fn finish(&self) -> String {
        let digest = self.hasher.clone().finalize();
        let mut s = String::with_capacity(64);
        for b in digest.iter() {
            let _ = write!(s, "{b:02x}");
        }
        s
    }
}

pub fn dense_fingerprint(m: &DenseMatrix<f64>) -> String {
    Fingerprint::new().dense(m).finish()
}

pub fn sparse_fingerprint(m: &CsrMatrix<f64>) -> String {
    Fingerprint::new().sparse(m).finish()
}

/// Four significant digits with a signed two-digit exponent, e.g. `6.533e-01`.
pub fn fmt_sig4(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.3e}");
    let (mantissa, exp) = s.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// Writes a CSV with a header; numeric cells are pre-formatted strings.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        writeln!(w, "{}", r.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV written by [`write_csv`] into its header and numeric rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(&name, 1, "empty CSV"))?
        .split(',')
        .map(str::to_string)
        .collect::<Vec<_>>();
    let mut rows = Vec::new();
    for (no, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(&name, no + 2, e.to_string()))?;
        if row.len() != header.len() {
            return Err(Error::parse(&name, no + 2, "column count differs from header"));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig4_matches_table_style() {
        assert_eq!(fmt_sig4(0.6533), "6.533e-01");
        assert_eq!(fmt_sig4(19.22), "1.922e+01");
        assert_eq!(fmt_sig4(7.838e-3), "7.838e-03");
        assert_eq!(fmt_sig4(0.0), "0.000e+00");
        assert_eq!(fmt_sig4(-1.5e-120), "-1.500e-120");
    }

    #[test]
    fn podm_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.podm");
        let m = DenseMatrix::from_fn(3, 2, |i, j| (i as f64 + 0.1) / (j as f64 + 3.0));
        write_podm(&p, &m).unwrap();
        assert_eq!(read_podm(&p).unwrap(), m);
        std::fs::write(&p, b"PODX").unwrap();
        assert!(matches!(read_podm(&p), Err(Error::Parse { .. })));
    }

    #[test]
    fn manifest_round_trip() {
        let mut m = Manifest::new();
        m.set("a", 1);
        m.set("b", "x y");
        m.set("a", 2);
        let back = Manifest::parse(&m.to_text(), "m").unwrap();
        assert_eq!(back, m);
        assert_eq!(back.get("a"), Some("2"));
        assert!(back.check("b", "z").is_err());
    }
}
