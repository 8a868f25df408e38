//! Preconditioned conjugate gradients for sparse SPD systems.

use super::dense::{axpy, dot, norm2};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug)]
pub struct CgOptions<T> {
    pub rel_tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for CgOptions<T> {
    fn default() -> Self {
        Self { rel_tol: T::lit(1e-12), max_iter: 20_000 }
    }
}

#[derive(Clone, Debug)]
pub struct CgOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub rel_residual: T,
}

/// Jacobi-preconditioned CG starting from zero.
pub fn pcg<T: Real>(a: &CsrMatrix<T>, b: &[T], opts: CgOptions<T>) -> Result<CgOutcome<T>> {
    let n = b.len();
    assert_eq!(a.rows(), n);
    let inv_diag: Vec<T> = a
        .diagonal()
        .iter()
        .map(|&d| if d > T::zero() { T::one() / d } else { T::one() })
        .collect();
    let bnorm = norm2(b);
    let mut x = vec![T::zero(); n];
    if bnorm == T::zero() {
        return Ok(CgOutcome { x, iterations: 0, rel_residual: T::zero() });
    }
    let mut r = b.to_vec();
    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(&ri, &di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    for it in 1..=opts.max_iter {
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return Err(Error::SingularMatrix(format!("CG breakdown, p^T A p = {:.3e}", pap.to_f64_lossy())));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rel = norm2(&r) / bnorm;
        if rel <= opts.rel_tol {
            return Ok(CgOutcome { x, iterations: it, rel_residual: rel });
        }
        for ((zi, &ri), &di) in z.iter_mut().zip(&r).zip(&inv_diag) {
            *zi = ri * di;
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, &zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: (norm2(&r) / bnorm).to_f64_lossy(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sparse::TripletBuilder;

    #[test]
    fn solves_laplacian_1d() {
        let n = 50;
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, 2.0);
            if i + 1 < n {
                b.push(i, i + 1, -1.0);
                b.push(i + 1, i, -1.0);
            }
        }
        let a = b.build();
        let rhs = vec![1.0; n];
        let out = pcg(&a, &rhs, CgOptions::default()).unwrap();
        let r = a.matvec(&out.x);
        for (ri, bi) in r.iter().zip(&rhs) {
            let (ri, bi): (&f64, &f64) = (ri, bi);
            assert!((ri - bi).abs() < 1e-9);
        }
    }
}
