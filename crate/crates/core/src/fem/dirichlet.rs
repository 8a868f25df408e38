//! Symmetric elimination of Dirichlet constraints.

use crate::linalg::CsrMatrix;

/// Dof mask for a set of constrained dofs.
#[derive(Clone, Debug)]
pub struct Constraint {
    dofs: Vec<usize>,
    mask: Vec<bool>,
}

impl Constraint {
    pub fn new(n: usize, dofs: &[usize]) -> Self {
        let mut mask = vec![false; n];
        let mut list = dofs.to_vec();
        list.sort_unstable();
        list.dedup();
        for &d in &list {
            mask[d] = true;
        }
        Self { dofs: list, mask }
    }

    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    #[inline]
    pub fn is_constrained(&self, d: usize) -> bool {
        self.mask[d]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn free_dofs(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&d| !self.mask[d]).collect()
    }

    /// Zeroes constrained entries in place.
    pub fn zero(&self, v: &mut [f64]) {
        for &d in &self.dofs {
            v[d] = 0.0;
        }
    }

    pub fn zeroed(&self, v: &[f64]) -> Vec<f64> {
        let mut w = v.to_vec();
        self.zero(&mut w);
        w
    }

    /// Largest absolute value on constrained dofs.
    pub fn max_violation(&self, v: &[f64]) -> f64 {
        self.dofs.iter().map(|&d| v[d].abs()).fold(0.0, f64::max)
    }
}

/// Result of [`constrain_dirichlet`]: the constrained matrix and the eliminated dofs.
#[derive(Clone, Debug)]
pub struct ConstrainedSystem {
    pub matrix: CsrMatrix<f64>,
    pub eliminated: Vec<usize>,
}

/// Symmetric elimination: constrained rows and columns are zeroed, their diagonal set to one,
/// `rhs` is corrected for the lifted values and set to `values` on constrained entries.
/// The sparsity pattern is unchanged (explicit zeros are kept).
pub fn constrain_dirichlet(
    a: &CsrMatrix<f64>,
    rhs: Option<&mut [f64]>,
    dofs: &[usize],
    values: &[f64],
) -> ConstrainedSystem {
    assert_eq!(dofs.len(), values.len());
    let n = a.rows();
    let c = Constraint::new(n, dofs);
    let mut g = vec![0.0; n];
    for (&d, &v) in dofs.iter().zip(values) {
        g[d] = v;
    }
    let mut m = a.clone();
    let row_ptr = m.row_ptr().to_vec();
    let cols = m.col_idx().to_vec();
    let mut rhs = rhs;
    {
        let vals = m.vals_mut();
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                let j = cols[k];
                if c.is_constrained(i) {
                    vals[k] = if i == j { 1.0 } else { 0.0 };
                } else if c.is_constrained(j) {
                    if let Some(r) = rhs.as_deref_mut() {
                        r[i] -= vals[k] * g[j];
                    }
                    vals[k] = 0.0;
                }
            }
        }
    }
    if let Some(r) = rhs {
        for &d in c.dofs() {
            r[d] = g[d];
        }
    }
    ConstrainedSystem { matrix: m, eliminated: c.dofs().to_vec() }
}
