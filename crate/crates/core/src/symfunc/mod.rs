//! Elementary symmetric functions, Gårding cone membership and sampling.
//!
//! Everything here is a pure function of its inputs. `σ_k` is evaluated by the
//! O(nk) product recurrence, never by subset enumeration.

mod eigen;
mod lemmas;
mod sample;

use std::ops::Deref;

use nalgebra::DMatrix;
use thiserror::Error;

pub use eigen::{jacobi_eigen, symmetric_eigenvalues, JacobiOptions, SymmetricEigen};
pub use lemmas::{lemma_suite, Check, LemmaReport};
pub use sample::{sample_cone, SampleConstraints};

/// Largest dimension supported by the symmetric-function machinery.
pub const MAX_DIM: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymError {
    #[error("index k = {k} outside 0..={n}")]
    Domain { k: usize, n: usize },
    #[error("curvature vector must be non-empty with finite entries")]
    InvalidVector,
    #[error("matrix is not symmetric (asymmetry {asymmetry:e} exceeds {tolerance:e})")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },
    #[error("matrix dimension {0} outside 1..={MAX_DIM}")]
    Dimension(usize),
    #[error("curvature vector is not in the Gårding cone Γ_{k} (margin {margin:e})")]
    NotInCone { k: usize, margin: f64 },
    #[error("rejection budget of {draws} draws exhausted without a feasible sample")]
    SamplingExhausted { draws: usize },
    #[error("infeasible sampling constraints: {0}")]
    InfeasibleConstraints(String),
}

/// Principal curvatures, stored in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureVector {
    values: Vec<f64>,
}

impl CurvatureVector {
    /// Sorts descending; ties keep their original order.
    pub fn new(mut values: Vec<f64>) -> Result<Self, SymError> {
        if values.is_empty() || values.iter().any(|x| !x.is_finite()) {
            return Err(SymError::InvalidVector);
        }
        values.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
        Ok(Self { values })
    }

    pub fn from_slice(values: &[f64]) -> Result<Self, SymError> {
        Self::new(values.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }

    pub fn min(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

impl Deref for CurvatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ConeMembership {
    pub in_cone: bool,
    /// `min_{m ≤ k} σ_m(κ) / C(n, m)`.
    pub margin: f64,
    pub k: usize,
}

/// Binomial coefficient as a float; exact for the small arguments used here.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// `[σ_0, σ_1, …, σ_kmax]` of the entries of `kappa`, skipping the indices in
/// `skip`.
fn sigma_table(kmax: usize, kappa: &[f64], skip: &[usize]) -> Vec<f64> {
    let mut e = vec![0.0; kmax + 1];
    e[0] = 1.0;
    let mut seen = 0usize;
    for (i, &x) in kappa.iter().enumerate() {
        if skip.contains(&i) {
            continue;
        }
        seen += 1;
        for m in (1..=kmax.min(seen)).rev() {
            e[m] += x * e[m - 1];
        }
    }
    e
}

/// `σ_k(κ)`, with `σ_0 = 1` and `σ_k = 0` for `k > n`.
pub fn sigma(k: usize, kappa: &[f64]) -> f64 {
    if k > kappa.len() {
        return 0.0;
    }
    sigma_table(k, kappa, &[])[k]
}

/// Like [`sigma`] but rejects `k > n`.
pub fn sigma_strict(k: usize, kappa: &[f64]) -> Result<f64, SymError> {
    if k > kappa.len() {
        return Err(SymError::Domain { k, n: kappa.len() });
    }
    Ok(sigma(k, kappa))
}

/// All of `σ_0..=σ_kmax` in one pass.
pub fn sigma_all(kmax: usize, kappa: &[f64]) -> Vec<f64> {
    sigma_table(kmax, kappa, &[])
}

/// `σ_m(κ | skip)`: `σ_m` of κ with the listed entries removed.
pub fn sigma_deleted(m: usize, kappa: &[f64], skip: &[usize]) -> f64 {
    sigma_table(m, kappa, skip)[m]
}

fn check_order(k: usize, n: usize) -> Result<(), SymError> {
    if k == 0 || k > n {
        Err(SymError::Domain { k, n })
    } else {
        Ok(())
    }
}

/// `∂σ_k/∂κ_i = σ_{k-1}(κ|i)` for every `i`.
pub fn sigma_gradient(k: usize, kappa: &[f64]) -> Result<Vec<f64>, SymError> {
    check_order(k, kappa.len())?;
    Ok((0..kappa.len())
        .map(|i| sigma_deleted(k - 1, kappa, &[i]))
        .collect())
}

/// `∂²σ_k/∂κ_i∂κ_j = σ_{k-2}(κ|ij)` off the diagonal, zero on it.
pub fn sigma_hessian(k: usize, kappa: &[f64]) -> Result<DMatrix<f64>, SymError> {
    let n = kappa.len();
    check_order(k, n)?;
    let mut hess = DMatrix::zeros(n, n);
    if k < 2 {
        return Ok(hess);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let v = sigma_deleted(k - 2, kappa, &[i, j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok(hess)
}

/// Membership in `Γ_k = {σ_m > 0, m = 1..k}` with a binomially normalized margin.
pub fn cone_test(k: usize, kappa: &[f64]) -> Result<ConeMembership, SymError> {
    let n = kappa.len();
    check_order(k, n)?;
    let table = sigma_all(k, kappa);
    let margin = (1..=k)
        .map(|m| table[m] / binomial(n, m))
        .fold(f64::INFINITY, f64::min);
    Ok(ConeMembership {
        in_cone: margin > 0.0,
        margin,
        k,
    })
}

/// Checks `S` for symmetry, diagonalizes it and returns `σ_k` of the sorted
/// eigenvalues.
pub fn sigma_of_shape(k: usize, shape: &DMatrix<f64>) -> Result<(f64, CurvatureVector), SymError> {
    let n = shape.nrows();
    if n == 0 || n > MAX_DIM || shape.ncols() != n {
        return Err(SymError::Dimension(n));
    }
    if k > n {
        return Err(SymError::Domain { k, n });
    }
    let norm = shape.norm();
    let tolerance = 1e-12 * norm;
    let mut asymmetry: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            asymmetry = asymmetry.max((shape[(i, j)] - shape[(j, i)]).abs());
        }
    }
    if asymmetry > tolerance {
        return Err(SymError::NotSymmetric {
            asymmetry,
            tolerance,
        });
    }
    let kappa = CurvatureVector::new(symmetric_eigenvalues(shape))?;
    Ok((sigma(k, &kappa), kappa))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn brute_sigma(k: usize, kappa: &[f64]) -> f64 {
        let n = kappa.len();
        (0u32..(1 << n))
            .filter(|mask| mask.count_ones() as usize == k)
            .map(|mask| {
                (0..n)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| kappa[i])
                    .product::<f64>()
            })
            .sum()
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma(2, &[1.0, 1.0, 1.0]), 3.0);
        assert_eq!(sigma(2, &[3.0, 2.0, 1.0]), 11.0);
        assert_eq!(sigma(3, &[2.0, 1.0, 0.0]), 0.0);
        assert_eq!(sigma(0, &[5.0]), 1.0);
        assert_eq!(sigma(4, &[1.0, 2.0]), 0.0);
        assert!(matches!(
            sigma_strict(3, &[1.0, 2.0]),
            Err(SymError::Domain { k: 3, n: 2 })
        ));
    }

    #[test]
    fn gradient_examples() {
        let g = sigma_gradient(2, &[3.0, 2.0, 1.0]).unwrap();
        assert_eq!(g, vec![3.0, 4.0, 5.0]);
        let euler: f64 = g.iter().zip([3.0, 2.0, 1.0]).map(|(a, b)| a * b).sum();
        assert_eq!(euler, 22.0);
        assert_eq!(sigma_gradient(1, &[7.0, -2.0, 0.5]).unwrap(), vec![1.0; 3]);
        assert_eq!(sigma_gradient(2, &[2.0, 1.0, 1.0]).unwrap(), vec![2.0, 3.0, 3.0]);
        assert!(sigma_gradient(0, &[1.0]).is_err());
        assert!(sigma_gradient(3, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn hessian_examples() {
        let h = sigma_hessian(2, &[0.3, -1.0, 4.0]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(h[(i, j)], if i == j { 0.0 } else { 1.0 });
            }
        }
        let h = sigma_hessian(3, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(h[(0, 1)], 3.0);
        assert_eq!(h, h.transpose());
    }

    #[test]
    fn cone_examples() {
        let c = cone_test(2, &[1.0, 1.0, -0.4]).unwrap();
        assert!(c.in_cone);
        let c = cone_test(2, &[3.0, 1.0, -1.0]).unwrap();
        assert!(!c.in_cone);
        assert_relative_eq!(c.margin, -1.0 / 3.0);
        assert!(cone_test(3, &[0.1, 2.0, 3.0]).unwrap().in_cone);
    }

    #[test]
    fn curvature_vector_sorts_and_validates() {
        let kv = CurvatureVector::new(vec![1.0, 3.0, 2.0]).unwrap();
        assert_eq!(kv.as_slice(), &[3.0, 2.0, 1.0]);
        assert!(CurvatureVector::new(vec![]).is_err());
        assert!(CurvatureVector::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn shape_examples() {
        let s = DMatrix::from_diagonal_element(3, 3, 0.7);
        let (v, kappa) = sigma_of_shape(2, &s).unwrap();
        assert_relative_eq!(v, 3.0 * 0.49, max_relative = 1e-14);
        assert!(kappa.iter().all(|&x| (x - 0.7).abs() < 1e-15));

        let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 3.0, 2.0]));
        assert_eq!(sigma_of_shape(2, &s).unwrap().0, 11.0);

        let mut s = DMatrix::identity(2, 2);
        s[(0, 1)] = 1e-3;
        assert!(matches!(
            sigma_of_shape(1, &s),
            Err(SymError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn shape_matches_characteristic_polynomial_3x3() {
        // det(S - xI) = -x^3 + c2 x^2 - c1 x + c0 with c1 = σ_2(eig) equal to
        // the sum of the principal 2x2 minors.
        let s = DMatrix::from_row_slice(3, 3, &[2.0, -0.4, 1.1, -0.4, 0.5, 0.3, 1.1, 0.3, -1.7]);
        let minor = |i: usize, j: usize| s[(i, i)] * s[(j, j)] - s[(i, j)] * s[(j, i)];
        let c1 = minor(0, 1) + minor(0, 2) + minor(1, 2);
        let (v, _) = sigma_of_shape(2, &s).unwrap();
        assert_relative_eq!(v, c1, max_relative = 1e-12);
        let (v3, _) = sigma_of_shape(3, &s).unwrap();
        assert_relative_eq!(v3, s.determinant(), max_relative = 1e-12);
    }

    fn kappa_strategy() -> impl Strategy<Value = Vec<f64>> {
        (1usize..=MAX_DIM).prop_flat_map(|n| proptest::collection::vec(-5.0f64..5.0, n))
    }

    proptest! {
        #[test]
        fn dp_matches_subset_enumeration(kappa in kappa_strategy(), k in 0usize..=MAX_DIM) {
            let fast = sigma(k, &kappa);
            let brute = if k > kappa.len() { 0.0 } else { brute_sigma(k, &kappa) };
            let scale = brute_sigma(k.min(kappa.len()), &kappa.iter().map(|x| x.abs()).collect::<Vec<_>>()).max(1.0);
            prop_assert!((fast - brute).abs() <= 1e-12 * scale);
        }

        #[test]
        fn gradient_matches_finite_differences(kappa in kappa_strategy(), k in 1usize..=MAX_DIM) {
            prop_assume!(k <= kappa.len());
            let g = sigma_gradient(k, &kappa).unwrap();
            let abs: Vec<f64> = kappa.iter().map(|x| x.abs()).collect();
            for i in 0..kappa.len() {
                let step = 1e-6 * (1.0 + kappa[i].abs());
                let mut p = kappa.clone();
                let mut m = kappa.clone();
                p[i] += step;
                m[i] -= step;
                let fd = (sigma(k, &p) - sigma(k, &m)) / (2.0 * step);
                let scale = sigma_deleted(k - 1, &abs, &[i]).max(1e-3);
                prop_assert!((fd - g[i]).abs() <= 1e-6 * scale, "i={} fd={} g={}", i, fd, g[i]);
            }
        }

        #[test]
        fn hessian_matches_gradient_differences(kappa in kappa_strategy(), k in 1usize..=MAX_DIM) {
            prop_assume!(k <= kappa.len());
            let h = sigma_hessian(k, &kappa).unwrap();
            let n = kappa.len();
            let abs: Vec<f64> = kappa.iter().map(|x| x.abs()).collect();
            for j in 0..n {
                let step = 1e-6 * (1.0 + kappa[j].abs());
                let mut p = kappa.clone();
                let mut m = kappa.clone();
                p[j] += step;
                m[j] -= step;
                let gp = sigma_gradient(k, &p).unwrap();
                let gm = sigma_gradient(k, &m).unwrap();
                for i in 0..n {
                    let fd = (gp[i] - gm[i]) / (2.0 * step);
                    let scale = if i == j || k < 2 { 1.0 } else { sigma_deleted(k - 2, &abs, &[i, j]).max(1.0) };
                    prop_assert!((fd - h[(i, j)]).abs() <= 1e-5 * scale);
                }
            }
        }

        #[test]
        fn spectral_invariance(diag in proptest::collection::vec(-3.0f64..3.0, 1..=MAX_DIM), seed in any::<u64>(), k in 0usize..=MAX_DIM) {
            let n = diag.len();
            prop_assume!(k <= n);
            let q = random_orthogonal(n, seed);
            let s = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag.clone())) * q.transpose();
            let s = (&s + s.transpose()) * 0.5;
            let (v, _) = sigma_of_shape(k, &s).unwrap();
            let exact = sigma(k, &diag);
            let scale = sigma(k, &diag.iter().map(|x| x.abs()).collect::<Vec<_>>()).max(1.0);
            prop_assert!((v - exact).abs() <= 1e-10 * scale, "v={} exact={}", v, exact);
        }
    }

    fn random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        a.qr().q()
    }
}
