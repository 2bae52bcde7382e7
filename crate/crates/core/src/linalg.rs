use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Cholesky factor of a symmetric positive-definite matrix, with a cheap
/// reciprocal-condition estimate taken from the factor's diagonal.
pub(crate) struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    rcond: f64,
}

impl SpdFactor {
    /// `None` when the matrix is not numerically positive definite.
    pub(crate) fn new(matrix: DMatrix<f64>) -> Option<Self> {
        let chol = matrix.cholesky()?;
        let l = chol.l_dirty();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..l.nrows() {
            let d = l[(i, i)];
            if !d.is_finite() {
                return None;
            }
            lo = lo.min(d);
            hi = hi.max(d);
        }
        // cond(A) = cond(L)^2 and cond(L) >= max|l_ii| / min|l_ii|.
        let rcond = if l.nrows() == 0 || hi == 0.0 {
            1.0
        } else {
            (lo / hi).powi(2)
        };
        Some(SpdFactor { chol, rcond })
    }

    pub(crate) fn rcond(&self) -> f64 {
        self.rcond
    }

    pub(crate) fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub(crate) fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }
}

/// Replaces `m` by `(m + mᵀ) / 2`.
pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub(crate) fn add_to_diagonal(m: &mut DMatrix<f64>, value: f64) {
    for i in 0..m.nrows().min(m.ncols()) {
        m[(i, i)] += value;
    }
}
