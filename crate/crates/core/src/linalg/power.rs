//! Power and inverse power iteration on generalized symmetric pencils.

use super::dense::dot;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct PowerOutcome<T> {
    pub value: T,
    pub vector: Vec<T>,
    pub iterations: usize,
}

/// Largest eigenvalue of `M^{-1} A` (both symmetric, `M` SPD), given `apply(x) = M^{-1} A x`
/// and `m_apply(x) = M x`. The Rayleigh quotient is tracked until its relative change
/// drops below `tol`.
pub fn power_iteration<T: Real>(
    mut apply: impl FnMut(&[T]) -> Result<Vec<T>>,
    mut m_apply: impl FnMut(&[T]) -> Vec<T>,
    start: Vec<T>,
    tol: T,
    max_iter: usize,
) -> Result<PowerOutcome<T>> {
    let mut x = start;
    let mut lambda = T::zero();
    for it in 1..=max_iter {
        let mut mx = m_apply(&x);
        let nrm = dot(&x, &mx).sqrt();
        if !(nrm > T::zero()) {
            return Err(Error::SingularMatrix("power iteration collapsed to zero".into()));
        }
        x.iter_mut().for_each(|v| *v /= nrm);
        mx.iter_mut().for_each(|v| *v /= nrm);
        let y = apply(&x)?;
        // x is M-normalized, so x^T M y is the Rayleigh quotient of A
        let new = dot(&y, &mx);
        let delta = (new - lambda).abs();
        lambda = new;
        x = y;
        if it > 2 && delta <= tol * lambda.abs() {
            let mx = m_apply(&x);
            let s = dot(&x, &mx).sqrt();
            x.iter_mut().for_each(|v| *v /= s);
            return Ok(PowerOutcome { value: lambda, vector: x, iterations: it });
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: f64::NAN })
}
