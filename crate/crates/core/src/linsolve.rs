//! Sparse LU solves for the Newton corrector, backed by faer.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use thiserror::Error;

use crate::curvature_operator::CooMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearSolveError {
    #[error("could not assemble sparse matrix: {0}")]
    Assembly(String),
    #[error("sparse LU failed: {0}")]
    Factorization(String),
    #[error("linear solve produced non-finite values")]
    NonFinite,
    #[error("linear solve inaccurate: relative residual {0:e}")]
    Inaccurate(f64),
}

/// Relative residual accepted after at most one refinement step.
const ACCURACY: f64 = 1e-10;

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Solves `A x = b` by sparse LU with one step of iterative refinement when
/// the first residual is not already at round-off.
pub fn solve(a: &CooMatrix, b: &[f64]) -> Result<Vec<f64>, LinearSolveError> {
    let n = a.dim;
    assert_eq!(b.len(), n);
    let triplets: Vec<Triplet<usize, usize, f64>> =
        a.entries.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| LinearSolveError::Assembly(format!("{e:?}")))?;
    // faer panics on an exactly zero pivot instead of returning an error
    let lu = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| mat.sp_lu()))
        .map_err(|_| LinearSolveError::Factorization("exactly zero pivot".into()))?
        .map_err(|e| LinearSolveError::Factorization(format!("{e:?}")))?;

    let solve_once = |rhs: &[f64]| -> Result<Vec<f64>, LinearSolveError> {
        let mut x = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
        lu.solve_in_place(x.as_mut());
        let out: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(LinearSolveError::NonFinite)
        }
    };

    let bnorm = norm2(b).max(f64::MIN_POSITIVE);
    let mut x = solve_once(b)?;
    let residual = |x: &[f64]| -> Vec<f64> { a.matvec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect() };
    let mut r = residual(&x);
    if norm2(&r) / bnorm > 1e-14 {
        let dx = solve_once(&r)?;
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        r = residual(&x);
    }
    let rel = norm2(&r) / bnorm;
    if rel > ACCURACY {
        return Err(LinearSolveError::Inaccurate(rel));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_nonsymmetric_system() {
        let a = CooMatrix {
            dim: 3,
            entries: vec![(0, 0, 4.0), (0, 1, 1.0), (1, 0, -2.0), (1, 1, 3.0), (1, 2, 1.0), (2, 2, 2.0)],
        };
        let x_true = [1.0, -2.0, 0.5];
        let b = a.matvec(&x_true);
        let x = solve(&a, &b).unwrap();
        for (u, v) in x.iter().zip(x_true) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_system_is_an_error() {
        let a = CooMatrix {
            dim: 2,
            entries: vec![(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)],
        };
        assert!(solve(&a, &[1.0, 2.0]).is_err());
    }
}
