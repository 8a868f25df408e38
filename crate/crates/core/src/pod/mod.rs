//! L² proper orthogonal decomposition by the method of snapshots.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{dense_fingerprint, read_podm, read_podm_vector, sparse_fingerprint, write_podm, write_podm_vector, Manifest};
use crate::linalg::{dot, power_iteration, symmetric_eigen, CsrMatrix, DenseMatrix};

/// Eigenvalues below `RANK_CUTOFF * lambda_1` are treated as zero.
pub const RANK_CUTOFF: f64 = 1e-13;

#[derive(Clone, Debug)]
pub struct PodBasis {
    /// FE coefficients of the kept modes, one per column.
    pub modes: DenseMatrix<f64>,
    /// Retained eigenvalues, descending (all above the rank cutoff).
    pub eigenvalues: Vec<f64>,
    /// Every computed eigenvalue clamped at zero, descending; used for tail sums.
    pub spectrum: Vec<f64>,
    pub kept: usize,
    /// Correlation eigenvectors of the retained eigenvalues (in memory only).
    pub eigvecs: Option<DenseMatrix<f64>>,
    pub mass_hash: String,
    pub snapshot_hash: String,
}

impl PodBasis {
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn dofs(&self) -> usize {
        self.modes.rows()
    }

    /// The leading `k` modes as a basis of their own.
    pub fn truncate(&self, k: usize) -> Result<Self> {
        if k > self.kept {
            return Err(Error::RankDeficient { requested: k, available: self.kept });
        }
        Ok(Self { modes: self.modes.leading_cols(k), kept: k, ..self.clone() })
    }

    /// `sum_{i > k} lambda_i` for `k = 0..=rank`.
    pub fn tail_sums(&self) -> Vec<f64> {
        tail_sums(&self.spectrum, self.rank())
    }
}

fn tail_sums(values: &[f64], upto: usize) -> Vec<f64> {
    let mut out = vec![0.0; upto + 1];
    let mut acc: f64 = values[upto.min(values.len())..].iter().rev().sum();
    out[upto] = acc;
    for k in (0..upto).rev() {
        acc += values[k];
        out[k] = acc;
    }
    out
}

/// `C = V^T M V / (N + 1)`, symmetrized.
pub fn build_correlation(snapshots: &DenseMatrix<f64>, m: &CsrMatrix<f64>) -> DenseMatrix<f64> {
    let n = snapshots.cols() as f64;
    let mut c = snapshots.tr_matmul(&m.mul_dense(snapshots));
    c.scale(1.0 / n);
    c.symmetrize();
    c
}

/// Flips each column so that its largest-magnitude entry is positive.
pub fn fix_signs(modes: &mut DenseMatrix<f64>) {
    for j in 0..modes.cols() {
        let c = modes.col_mut(j);
        let mut best = 0.0f64;
        for &v in c.iter() {
            if v.abs() > best.abs() {
                best = v;
            }
        }
        if best < 0.0 {
            c.iter_mut().for_each(|v| *v = -*v);
        }
    }
}

/// Modified Gram–Schmidt in the `m` inner product, two passes.
pub fn reorthonormalize(modes: &mut DenseMatrix<f64>, m: &CsrMatrix<f64>) -> Result<()> {
    for _ in 0..2 {
        for j in 0..modes.cols() {
            let mut v = modes.col(j).to_vec();
            for i in 0..j {
                let qi = modes.col(i);
                let mv = m.matvec(qi);
                let h = dot(&mv, &v);
                v.iter_mut().zip(qi).for_each(|(a, b)| *a -= h * b);
            }
            let nrm = m.bilinear(&v, &v).max(0.0).sqrt();
            if !(nrm > 0.0) {
                return Err(Error::RankDeficient { requested: modes.cols(), available: j });
            }
            v.iter_mut().for_each(|a| *a /= nrm);
            modes.set_col(j, &v);
        }
    }
    Ok(())
}

pub fn pod_modes(snapshots: &DenseMatrix<f64>, m: &CsrMatrix<f64>, keep: usize) -> Result<PodBasis> {
    pod_modes_impl(snapshots, m, Some(keep))
}

/// POD basis keeping every mode above the rank cutoff.
pub fn pod_modes_full(snapshots: &DenseMatrix<f64>, m: &CsrMatrix<f64>) -> Result<PodBasis> {
    pod_modes_impl(snapshots, m, None)
}

fn pod_modes_impl(snapshots: &DenseMatrix<f64>, m: &CsrMatrix<f64>, keep: Option<usize>) -> Result<PodBasis> {
    if snapshots.cols() == 0 {
        return Err(Error::RankDeficient { requested: keep.unwrap_or(1), available: 0 });
    }
    let c = build_correlation(snapshots, m);
    let eig = symmetric_eigen(&c)?.into_descending();
    let spectrum: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0)).collect();
    let lambda1 = spectrum[0];
    let rank = if lambda1 > 0.0 { spectrum.iter().take_while(|&&v| v > RANK_CUTOFF * lambda1).count() } else { 0 };
    let keep = keep.unwrap_or(rank);
    if keep > rank || rank == 0 {
        return Err(Error::RankDeficient { requested: keep, available: rank });
    }
    let n1 = snapshots.cols() as f64;
    let a = eig.vectors.leading_cols(rank);
    let mut coeff = a.leading_cols(keep);
    for j in 0..keep {
        let s = 1.0 / (n1 * spectrum[j]).sqrt();
        coeff.col_mut(j).iter_mut().for_each(|v| *v *= s);
    }
    let mut modes = snapshots.matmul(&coeff);
    reorthonormalize(&mut modes, m)?;
    fix_signs(&mut modes);
    Ok(PodBasis {
        modes,
        eigenvalues: spectrum[..rank].to_vec(),
        spectrum,
        kept: keep,
        eigvecs: Some(a),
        mass_hash: sparse_fingerprint(m),
        snapshot_hash: dense_fingerprint(snapshots),
    })
}

/// Truncation tails over all cut points `0..=rank`.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncationSpectrum {
    /// `sum_{i > r} lambda_i`
    pub lambda_sq: Vec<f64>,
    /// `sum_{i > r} lambda_i ||grad phi_i||^2` (velocity only, empty otherwise)
    pub grad_sq: Vec<f64>,
}

impl TruncationSpectrum {
    pub fn of_pressure(basis: &PodBasis) -> Self {
        Self { lambda_sq: basis.tail_sums(), grad_sq: Vec::new() }
    }

    /// `Lambda_r = sqrt(sum lambda_i + sum lambda_i ||grad phi_i||^2)`
    pub fn lambda_r(&self, r: usize) -> f64 {
        (self.lambda_sq[r] + self.grad_sq.get(r).copied().unwrap_or(0.0)).max(0.0).sqrt()
    }

    /// `Lambda_m = sqrt(sum sigma_i)`
    pub fn lambda_m(&self, m: usize) -> f64 {
        self.lambda_sq[m].max(0.0).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct GradientSpectrum {
    /// `lambda_i ||grad phi_i||^2` for every retained mode.
    pub weighted: Vec<f64>,
    /// `||grad phi_i||^2` for every retained mode.
    pub grad_norms_sq: Vec<f64>,
    pub truncation: TruncationSpectrum,
}

/// Gradient norms of all retained modes, from `a_i^T (V^T S V) a_i / (N + 1) = lambda_i ||grad phi_i||^2`.
pub fn gradient_spectrum(basis: &PodBasis, snapshots: &DenseMatrix<f64>, s: &CsrMatrix<f64>) -> Result<GradientSpectrum> {
    let a = basis
        .eigvecs
        .as_ref()
        .ok_or_else(|| Error::Config("gradient spectrum needs the correlation eigenvectors".into()))?;
    let k = build_correlation(snapshots, s);
    let ka = k.matmul(a);
    let rank = basis.rank();
    let weighted: Vec<f64> = (0..rank).map(|i| dot(a.col(i), ka.col(i)).max(0.0)).collect();
    let grad_norms_sq: Vec<f64> = weighted.iter().zip(&basis.eigenvalues).map(|(w, l)| w / l).collect();
    let mut grad_sq = vec![0.0; rank + 1];
    for r in (0..rank).rev() {
        grad_sq[r] = grad_sq[r + 1] + weighted[r];
    }
    Ok(GradientSpectrum {
        weighted,
        grad_norms_sq,
        truncation: TruncationSpectrum { lambda_sq: basis.tail_sums(), grad_sq },
    })
}

/// `a = Phi^T M u`
pub fn project_l2(basis: &PodBasis, m: &CsrMatrix<f64>, u: &[f64]) -> Vec<f64> {
    basis.modes.tr_matvec(&m.matvec(u))
}

/// Reduced coefficients of every column of `fields`.
pub fn project_l2_all(basis: &PodBasis, m: &CsrMatrix<f64>, fields: &DenseMatrix<f64>) -> DenseMatrix<f64> {
    m.mul_dense(&basis.modes).tr_matmul(fields)
}

#[derive(Clone, Debug)]
pub struct PodMatrices {
    pub mass: DenseMatrix<f64>,
    pub stiffness: DenseMatrix<f64>,
    /// `||S_r||_2` by power iteration.
    pub stiffness_norm: f64,
}

pub fn pod_matrices(basis: &PodBasis, m: &CsrMatrix<f64>, s: &CsrMatrix<f64>) -> Result<PodMatrices> {
    let mass = m.congruence(&basis.modes);
    let stiffness = s.congruence(&basis.modes);
    let r = stiffness.rows();
    let stiffness_norm = if r == 0 {
        0.0
    } else {
        let start: Vec<f64> = (0..r).map(|i| 1.0 + 0.01 * i as f64).collect();
        power_iteration(|x| Ok(stiffness.matvec(x)), |x| x.to_vec(), start, 1e-12, 100_000)?.value
    };
    Ok(PodMatrices { mass, stiffness, stiffness_norm })
}

pub fn save_basis(basis: &PodBasis, dir: &Path, name: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_podm(&dir.join(format!("{name}.podm")), &basis.modes)?;
    write_podm_vector(&dir.join("eigs.podm"), &basis.spectrum)?;
    let mut mf = Manifest::new();
    mf.set("kind", "pod");
    mf.set("name", name);
    mf.set("kept", basis.kept);
    mf.set("rank", basis.rank());
    mf.set("inner_product", "L2");
    mf.set("mass_hash", &basis.mass_hash);
    mf.set("snapshot_hash", &basis.snapshot_hash);
    mf.set("modes_hash", dense_fingerprint(&basis.modes));
    mf.save(&dir.join("manifest.txt"))
}

/// Loads a basis; `expected_mass` rejects bases built with another mass matrix.
pub fn load_basis(dir: &Path, name: &str, expected_mass: Option<&str>) -> Result<PodBasis> {
    let mf = Manifest::load(&dir.join("manifest.txt"))?;
    mf.check("name", name)?;
    if let Some(h) = expected_mass {
        mf.check("mass_hash", h)?;
    }
    let modes = read_podm(&dir.join(format!("{name}.podm")))?;
    mf.check("modes_hash", &dense_fingerprint(&modes))?;
    let spectrum = read_podm_vector(&dir.join("eigs.podm"))?;
    let rank = mf.require_usize("rank")?;
    let kept = mf.require_usize("kept")?;
    if kept != modes.cols() || rank > spectrum.len() {
        return Err(Error::parse("manifest.txt", 0, "mode counts disagree with the stored arrays"));
    }
    Ok(PodBasis {
        modes,
        eigenvalues: spectrum[..rank].to_vec(),
        spectrum,
        kept,
        eigvecs: None,
        mass_hash: mf.require("mass_hash")?.to_string(),
        snapshot_hash: mf.require("snapshot_hash")?.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_sums_accumulate_from_the_end() {
        let t = tail_sums(&[4.0, 2.0, 1.0, 0.5], 3);
        assert_eq!(t, vec![7.5, 3.5, 1.5, 0.5]);
    }

    #[test]
    fn signs_follow_largest_entry() {
        let mut m = DenseMatrix::from_col_major(3, 2, vec![0.1, -0.9, 0.3, 0.5, 0.2, -0.1]);
        fix_signs(&mut m);
        assert_eq!(m.col(0), &[-0.1, 0.9, -0.3]);
        assert_eq!(m.col(1), &[0.5, 0.2, -0.1]);
    }

    #[test]
    fn collinear_snapshots_give_one_mode() {
        let m = CsrMatrix::from_diagonal(&[1.0, 2.0, 1.0]);
        let e = [1.0, 0.5, -1.0];
        let v = DenseMatrix::from_columns(3, &[e.to_vec(), e.iter().map(|x| 2.0 * x).collect()]);
        let b = pod_modes(&v, &m, 1).unwrap();
        let en = m.bilinear(&e, &e);
        assert_eq!(b.rank(), 1);
        assert!((b.eigenvalues[0] - 2.5 * en).abs() < 1e-12 * en);
        for (p, q) in b.modes.col(0).iter().zip(e) {
            assert!((p - q / en.sqrt()).abs() < 1e-12);
        }
        assert!(matches!(pod_modes(&v, &m, 2), Err(Error::RankDeficient { requested: 2, available: 1 })));
    }
}
