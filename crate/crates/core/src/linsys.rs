//! Thin wrapper around the sparse LU factorization used by the forward
//! solvers. Assembly and factorization run single-threaded; callers
//! parallelize over right-hand sides on top of the shared factorization.

use std::sync::Once;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};

static FAER_SEQ: Once = Once::new();

fn force_sequential_backend() {
    FAER_SEQ.call_once(|| {
        faer::set_global_parallelism(faer::Par::Seq);
    });
}

/// Collects duplicate-summed triplets for a square sparse matrix.
pub struct TripletBuilder {
    n: usize,
    entries: Vec<Triplet<usize, usize, f64>>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        TripletBuilder {
            n,
            entries: Vec::new(),
        }
    }

    pub fn add(&mut self, row: usize, col: usize, val: f64) {
        debug_assert!(row < self.n && col < self.n);
        self.entries.push(Triplet::new(row, col, val));
    }

    pub fn build(self) -> Result<SparseColMat<usize, f64>> {
        SparseColMat::try_new_from_triplets(self.n, self.n, &self.entries)
            .map_err(|e| Error::Solver(format!("building sparse matrix failed: {e:?}")))
    }
}

/// A factorized sparse system that can be solved repeatedly.
pub struct Factorized {
    matrix: SparseColMat<usize, f64>,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    n: usize,
}

impl Factorized {
    pub fn new(matrix: SparseColMat<usize, f64>) -> Result<Self> {
        force_sequential_backend();
        let n = matrix.nrows();
        // The backend panics on an exactly-zero pivot instead of returning
        // an error; treat that as a singular system.
        let lu = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| matrix.sp_lu()))
            .map_err(|_| Error::Solver("sparse LU hit a zero pivot; system is singular".into()))?
            .map_err(|e| Error::Solver(format!("sparse LU factorization failed: {e:?}")))?;
        Ok(Factorized { matrix, lu, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` and verifies the relative residual.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::Dimension(format!(
                "rhs length {} does not match system dimension {}",
                b.len(),
                self.n
            )));
        }
        let mut rhs = faer::Mat::<f64>::zeros(self.n, 1);
        for (i, &v) in b.iter().enumerate() {
            rhs[(i, 0)] = v;
        }
        self.lu.solve_in_place(rhs.as_mut());
        let x: Vec<f64> = (0..self.n).map(|i| rhs[(i, 0)]).collect();

        let ax = self.matvec(&x);
        let mut res2 = 0.0;
        let mut b2 = 0.0;
        let mut x2 = 0.0;
        for i in 0..self.n {
            res2 += (ax[i] - b[i]) * (ax[i] - b[i]);
            b2 += b[i] * b[i];
            x2 += x[i] * x[i];
        }
        let scale = b2.sqrt().max(self.norm_estimate() * x2.sqrt());
        if res2.sqrt() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Solver(format!(
                "relative residual {:.3e} above 1e-10; system is numerically singular",
                res2.sqrt() / scale
            )));
        }
        Ok(x)
    }

    /// Multiplies the assembled matrix by `x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        let sym = self.matrix.symbolic();
        let col_ptr = sym.col_ptr();
        let row_idx = sym.row_idx();
        let val = self.matrix.val();
        for col in 0..self.n {
            let xj = x[col];
            for p in col_ptr[col]..col_ptr[col + 1] {
                y[row_idx[p]] += val[p] * xj;
            }
        }
        y
    }

    /// Frobenius norm of the matrix, used to scale residual checks.
    pub fn norm_estimate(&self) -> f64 {
        self.matrix.val().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest entrywise asymmetry `|a_ij - a_ji|` of the assembled matrix.
    pub fn symmetry_defect(&self) -> f64 {
        let sym = self.matrix.symbolic();
        let col_ptr = sym.col_ptr();
        let row_idx = sym.row_idx();
        let val = self.matrix.val();
        let get = |i: usize, j: usize| -> f64 {
            let range = col_ptr[j]..col_ptr[j + 1];
            match row_idx[range.clone()].binary_search(&i) {
                Ok(pos) => val[range.start + pos],
                Err(_) => 0.0,
            }
        };
        let mut worst = 0.0_f64;
        for col in 0..self.n {
            for p in col_ptr[col]..col_ptr[col + 1] {
                let row = row_idx[p];
                worst = worst.max((val[p] - get(col, row)).abs());
            }
        }
        worst
    }
}
