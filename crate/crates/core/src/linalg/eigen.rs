//! Symmetric eigenvalue problems.
//!
//! `symmetric_eigen` reduces to tridiagonal form with Householder reflections and
//! then runs implicit QL with shifts. `jacobi_eigen` is the cyclic Jacobi method,
//! slower but simple enough to serve as a cross-check.

use super::cholesky::Cholesky;
use super::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

const QL_MAX_SWEEPS: usize = 60;

/// Eigenpairs sorted by ascending eigenvalue; column `k` of `vectors` pairs with `values[k]`.
#[derive(Clone, Debug)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: DenseMatrix<T>,
}

impl<T: Real> SymmetricEigen<T> {
    /// Reorders to descending eigenvalues.
    pub fn into_descending(self) -> Self {
        let n = self.values.len();
        let idx: Vec<usize> = (0..n).rev().collect();
        Self {
            values: idx.iter().map(|&k| self.values[k]).collect(),
            vectors: self.vectors.select_cols(&idx),
        }
    }
}

pub fn symmetric_eigen<T: Real>(a: &DenseMatrix<T>) -> Result<SymmetricEigen<T>> {
    let n = a.rows();
    assert_eq!(n, a.cols(), "eigen of a non-square matrix");
    if n == 0 {
        return Ok(SymmetricEigen { values: vec![], vectors: DenseMatrix::zeros(0, 0) });
    }
    if !a.is_finite() {
        return Err(Error::NoConvergence { iterations: 0, residual: f64::NAN });
    }
    let mut v = a.clone();
    v.symmetrize();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e)?;
    Ok(SymmetricEigen { values: d, vectors: v })
}

fn tred2<T: Real>(v: &mut DenseMatrix<T>, d: &mut [T], e: &mut [T]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = T::zero();
        let mut h = T::zero();
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == T::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = T::zero();
                v[(j, i)] = T::zero();
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > T::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = T::zero();
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                let cj = v.col(j);
                for k in j + 1..i {
                    g += cj[k] * d[k];
                    e[k] += cj[k] * f;
                }
                e[j] = g;
            }
            f = T::zero();
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                let cj = v.col_mut(j);
                for k in j..i {
                    cj[k] -= f * e[k] + g * d[k];
                }
                d[j] = cj[i - 1];
                cj[i] = T::zero();
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = T::one();
        let h = d[i + 1];
        if h != T::zero() {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = T::zero();
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                let cj = v.col_mut(j);
                for k in 0..=i {
                    cj[k] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = T::zero();
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = T::zero();
    }
    v[(n - 1, n - 1)] = T::one();
    e[0] = T::zero();
}

fn tql2<T: Real>(v: &mut DenseMatrix<T>, d: &mut [T], e: &mut [T]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    let two = T::lit(2.0);
    let eps = T::epsilon();
    let mut f = T::zero();
    let mut tst1 = T::zero();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > QL_MAX_SWEEPS {
                    return Err(Error::NoConvergence {
                        iterations: iter,
                        residual: e[l].abs().to_f64_lossy(),
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (left, right) = v.data_mut().split_at_mut((i + 1) * n);
                    let ci = &mut left[i * n..];
                    let ci1 = &mut right[..n];
                    for k in 0..n {
                        let hk = ci1[k];
                        ci1[k] = s * ci[k] + c * hk;
                        ci[k] = c * ci[k] - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }
    sort_ascending(v, d);
    Ok(())
}

fn sort_ascending<T: Real>(v: &mut DenseMatrix<T>, d: &mut [T]) {
    let mut idx: Vec<usize> = (0..d.len()).collect();
    idx.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap_or(std::cmp::Ordering::Equal));
    let sorted: Vec<T> = idx.iter().map(|&k| d[k]).collect();
    d.copy_from_slice(&sorted);
    *v = v.select_cols(&idx);
}

/// Cyclic Jacobi rotations until the off-diagonal mass drops below `tol * ||A||_F`.
pub fn jacobi_eigen<T: Real>(a: &DenseMatrix<T>, tol: T, max_sweeps: usize) -> Result<SymmetricEigen<T>> {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut m = a.clone();
    m.symmetrize();
    let mut v = DenseMatrix::identity(n);
    let norm = m.frobenius();
    let off = |m: &DenseMatrix<T>| {
        let mut s = T::zero();
        for j in 0..n {
            for i in 0..j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
        (s + s).sqrt()
    };
    let mut sweeps = 0;
    while off(&m) > tol * norm {
        sweeps += 1;
        if sweeps > max_sweeps {
            return Err(Error::NoConvergence {
                iterations: sweeps,
                residual: off(&m).to_f64_lossy(),
            });
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut d: Vec<T> = (0..n).map(|i| m[(i, i)]).collect();
    sort_ascending(&mut v, &mut d);
    Ok(SymmetricEigen { values: d, vectors: v })
}

/// `A x = lambda B x` with `B` SPD; vectors are `B`-orthonormal.
pub fn generalized_symmetric_eigen<T: Real>(
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
) -> Result<SymmetricEigen<T>> {
    let chol = Cholesky::new(b, T::epsilon())?;
    // C = L^{-1} A L^{-T}
    let la = chol.forward_matrix(a);
    let c = chol.forward_matrix(&la.transpose());
    let eig = symmetric_eigen(&c)?;
    let cols: Vec<Vec<T>> = eig.vectors.columns().map(|y| chol.backward(y)).collect();
    Ok(SymmetricEigen { values: eig.values, vectors: DenseMatrix::from_columns(a.rows(), &cols) })
}

/// Singular values of `a` in descending order.
pub fn singular_values<T: Real>(a: &DenseMatrix<T>) -> Result<Vec<T>> {
    let g = if a.rows() >= a.cols() { a.gram() } else { a.transpose().gram() };
    let eig = symmetric_eigen(&g)?;
    Ok(eig.values.iter().rev().map(|&l| l.max(T::zero()).sqrt()).collect())
}
