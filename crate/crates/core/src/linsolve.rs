//! Direct solution of the (possibly indefinite) Newton systems.

use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Systems with fewer unknowns are factorized densely.
pub const DEFAULT_DENSE_LIMIT: usize = 600;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinearSolver {
    /// Dense LU below `dense_limit` unknowns, sparse LU above.
    Auto {
        dense_limit: usize,
    },
    Dense,
    Sparse,
}

impl Default for LinearSolver {
    fn default() -> Self {
        LinearSolver::Auto {
            dense_limit: DEFAULT_DENSE_LIMIT,
        }
    }
}

/// Square matrix in coordinate form; duplicate entries are summed.
#[derive(Clone, Debug, Default)]
pub struct TripletMatrix {
    pub size: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl TripletMatrix {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            entries: Vec::new(),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.size, self.size);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    /// Submatrix on the rows and columns marked by `index` (`Some(new)`).
    pub fn restrict(&self, index: &[Option<usize>], size: usize) -> TripletMatrix {
        let entries = self
            .entries
            .iter()
            .filter_map(|&(r, c, v)| Some((index[r]?, index[c]?, v)))
            .collect();
        TripletMatrix { size, entries }
    }
}

/// Solves `A x = b`.
pub fn solve(
    matrix: &TripletMatrix,
    rhs: &DVector<f64>,
    solver: LinearSolver,
) -> Result<DVector<f64>> {
    let n = matrix.size;
    if rhs.len() != n {
        return Err(Error::LinearSolve(format!(
            "rhs length {} for {n} unknowns",
            rhs.len()
        )));
    }
    if n == 0 {
        return Ok(DVector::zeros(0));
    }
    let dense = match solver {
        LinearSolver::Auto { dense_limit } => n < dense_limit,
        LinearSolver::Dense => true,
        LinearSolver::Sparse => false,
    };
    let x = if dense {
        solve_dense(matrix, rhs)?
    } else {
        solve_sparse(matrix, rhs)?
    };
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::LinearSolve(
            "singular system (non-finite solution)".into(),
        ))
    }
}

fn solve_dense(matrix: &TripletMatrix, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    matrix
        .to_dense()
        .lu()
        .solve(rhs)
        .ok_or_else(|| Error::LinearSolve("singular system".into()))
}

fn solve_sparse(matrix: &TripletMatrix, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let n = matrix.size;
    let triplets: Vec<Triplet<usize, usize, f64>> = matrix
        .entries
        .iter()
        .map(|&(r, c, v)| Triplet::new(r, c, v))
        .collect();
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
    let lu = a
        .sp_lu()
        .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
    let b = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
    let x = lu.solve(&b);
    Ok(DVector::from_fn(n, |i, _| x[(i, 0)]))
}
