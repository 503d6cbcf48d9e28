//! Dense matrix algebra for the semidefiniteness tests: basis
//! pseudoinverse, symmetrization of noisy data, smallest eigenvalues.
//!
//! Matrices here are at most `(k-1) x (k-1)` with `k <= 64`, so a full
//! symmetric eigendecomposition is used throughout.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// An exactly symmetric test matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TestMatrix {
    entries: DMatrix<f64>,
}

impl TestMatrix {
    /// Builds a test matrix by explicit symmetrization.
    pub fn from_symmetrizing(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!("test matrix must be square, got {} x {}", m.nrows(), m.ncols())));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("test matrix contains non-finite entries".into()));
        }
        Ok(TestMatrix {
            entries: (m + m.transpose()).scale(0.5),
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Adds `alpha` to the diagonal.
    pub fn shifted(&self, alpha: f64) -> TestMatrix {
        let mut m = self.entries.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += alpha;
        }
        TestMatrix { entries: m }
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &TestMatrix) -> f64 {
    if m.dim() == 0 {
        return 0.0;
    }
    m.entries.symmetric_eigenvalues().min()
}

/// Spectral norm of a (not necessarily symmetric) matrix via the symmetric
/// eigendecomposition of its Gram matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let gram = m.transpose() * m;
    gram.symmetric_eigenvalues().max().max(0.0).sqrt()
}

/// Moore-Penrose pseudoinverse of a full-column-rank `k x (k-1)` matrix:
/// `(I^T I)^{-1} I^T`.
pub fn pseudoinverse(imat: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram = imat.transpose() * imat;
    let eig = gram.symmetric_eigenvalues();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for &l in eig.iter() {
        lo = lo.min(l);
        hi = hi.max(l);
    }
    if !(lo > 1e-12 * hi) {
        return Err(Error::Basis("pseudoinverse of a rank-deficient basis".into()));
    }
    let inv = gram
        .lu()
        .solve(&DMatrix::identity(imat.ncols(), imat.ncols()))
        .ok_or_else(|| Error::Basis("basis Gram matrix is singular".into()))?;
    Ok(inv * imat.transpose())
}

/// Symmetrizes a noisy voltage table: removes column means, makes the
/// underlying operator `V I^+` symmetric, and maps it back to per-basis
/// voltage columns.
pub fn symmetrize_data(vtilde: &DMatrix<f64>, imat: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = imat.nrows();
    if vtilde.nrows() != k || vtilde.ncols() != k - 1 {
        return Err(Error::Dimension(format!(
            "voltage table is {} x {}, expected {} x {}",
            vtilde.nrows(),
            vtilde.ncols(),
            k,
            k - 1
        )));
    }
    let mut centered = vtilde.clone();
    for mut col in centered.column_iter_mut() {
        let mean = col.sum() / k as f64;
        col.add_scalar_mut(-mean);
    }
    let pinv = pseudoinverse(imat)?;
    let op = &centered * &pinv;
    let sym = (&op + op.transpose()).scale(0.5);
    Ok(sym * imat)
}

/// Checks the Lipschitz bound of the infimal eigenvalue: the smallest
/// eigenvalues of two symmetric matrices differ by at most the spectral
/// norm of their difference.
pub fn spectral_continuity_check(s: &TestMatrix, t: &TestMatrix) -> Result<bool> {
    if s.dim() != t.dim() {
        return Err(Error::Dimension(format!("dimensions differ: {} vs {}", s.dim(), t.dim())));
    }
    let gap = (min_eigenvalue(s) - min_eigenvalue(t)).abs();
    let norm = spectral_norm(&(s.entries() - t.entries()));
    Ok(gap <= norm + 1e-12)
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn symmetric_matrix(n: usize) -> impl Strategy<Value = TestMatrix> {
        proptest::collection::vec(-1.0e3..1.0e3_f64, n * n).prop_map(move |vals| {
            TestMatrix::from_symmetrizing(&DMatrix::from_vec(n, n, vals)).unwrap()
        })
    }

    proptest! {
        /// Shifting the diagonal moves the smallest eigenvalue by exactly
        /// the shift.
        #[test]
        fn shift_invariance(m in symmetric_matrix(6), alpha in -1.0e3..1.0e3_f64) {
            let base = min_eigenvalue(&m);
            let shifted = min_eigenvalue(&m.shifted(alpha));
            let scale = base.abs().max(alpha.abs()).max(1.0);
            prop_assert!((shifted - base - alpha).abs() <= 1e-12 * scale);
        }

        /// The eigenvalue continuity bound holds for arbitrary symmetric
        /// pairs.
        #[test]
        fn continuity_bound(a in symmetric_matrix(5), b in symmetric_matrix(5)) {
            prop_assert!(spectral_continuity_check(&a, &b).unwrap());
        }

        /// Data symmetrization is a projection: applying it twice changes
        /// nothing.
        #[test]
        fn symmetrization_is_idempotent(vals in proptest::collection::vec(-10.0..10.0_f64, 8 * 7)) {
            let basis = crate::synthdata::current_basis(crate::fem::BasisKind::GramSchmidt, 8).unwrap();
            let v = DMatrix::from_vec(8, 7, vals);
            let once = symmetrize_data(&v, basis.matrix()).unwrap();
            let twice = symmetrize_data(&once, basis.matrix()).unwrap();
            prop_assert!((&once - &twice).norm() <= 1e-10 * once.norm().max(1.0));
        }
    }
}
