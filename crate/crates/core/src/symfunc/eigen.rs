//! Cyclic Jacobi diagonalization for small dense symmetric matrices.

use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy)]
pub struct JacobiOptions {
    /// Off-diagonal threshold relative to the Frobenius norm.
    pub relative_threshold: f64,
    pub max_sweeps: usize,
}

impl Default for JacobiOptions {
    fn default() -> Self {
        Self {
            relative_threshold: 1e-13,
            max_sweeps: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Unsorted, paired with the columns of `vectors`.
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    pub sweeps: usize,
}

/// Diagonalizes the symmetric part of `a` by cyclic Jacobi rotations.
pub fn jacobi_eigen(a: &DMatrix<f64>, opts: JacobiOptions) -> SymmetricEigen {
    let n = a.nrows();
    let mut m = (a + a.transpose()) * 0.5;
    let mut v = DMatrix::identity(n, n);
    let threshold = opts.relative_threshold * m.norm();
    let mut sweeps = 0;

    while sweeps < opts.max_sweeps {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= threshold {
            break;
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
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

    SymmetricEigen {
        values: (0..n).map(|i| m[(i, i)]).collect(),
        vectors: v,
        sweeps,
    }
}

/// Eigenvalues sorted descending.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut values = jacobi_eigen(a, JacobiOptions::default()).values;
    values.sort_by(|x, y| y.partial_cmp(x).expect("finite eigenvalues"));
    values
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn diagonal_input_needs_no_sweeps() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -2.0, 3.0]));
        let eig = jacobi_eigen(&a, JacobiOptions::default());
        assert_eq!(eig.sweeps, 0);
        assert_eq!(symmetric_eigenvalues(&a), vec![3.0, 1.0, -2.0]);
    }

    #[test]
    fn reconstructs_matrix() {
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                4.0, 1.0, -2.0, 0.5, 1.0, 2.0, 0.0, 1.0, -2.0, 0.0, 3.0, -1.5, 0.5, 1.0, -1.5, -1.0,
            ],
        );
        let eig = jacobi_eigen(&a, JacobiOptions::default());
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eig.values.clone()));
        let back = &eig.vectors * d * eig.vectors.transpose();
        assert!((back - &a).norm() < 1e-12 * a.norm());
        let nal = a.clone().symmetric_eigen();
        let mut ours = eig.values;
        let mut theirs: Vec<f64> = nal.eigenvalues.iter().copied().collect();
        ours.sort_by(|x, y| x.partial_cmp(y).unwrap());
        theirs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (x, y) in ours.iter().zip(&theirs) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn repeated_eigenvalue() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let v = symmetric_eigenvalues(&a);
        assert_relative_eq!(v[0], 2.0, epsilon = 1e-14);
        assert!(v[1].abs() < 1e-14);
    }
}
