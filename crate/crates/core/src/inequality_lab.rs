//! Numerical probes of the concavity-type quadratic form, the large-`κ_1`
//! pairwise inequality and the scalar `ε`–`δ` lemma.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dd::{self, Dd};
use crate::symfunc::{
    cone_test, sample_cone, sigma, sigma_deleted, sigma_gradient, sigma_hessian,
    symmetric_eigenvalues, CurvatureVector, SampleConstraints, SymError,
};

/// Eigenvalues above `-NUMERICAL_ZERO` count as non-negative.
pub const NUMERICAL_ZERO: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("degenerate pair: κ_{i} = κ_{j}")]
    DegeneratePair { i: usize, j: usize },
    #[error("witness failed its own constraint audit: {0:?}")]
    WitnessAudit(Vec<f64>),
    #[error(transparent)]
    Sym(#[from] SymError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct ConjectureInstance {
    pub n: usize,
    pub k: usize,
    #[serde(rename = "K")]
    pub big_k: f64,
    #[serde(rename = "B")]
    pub kappa1_min: f64,
    #[serde(rename = "N0")]
    pub sigma_min: f64,
    #[serde(rename = "N1")]
    pub sigma_max: f64,
}

impl ConjectureInstance {
    pub fn validate(&self) -> Result<(), LabError> {
        let Self { n, k, .. } = *self;
        if k == 0 || k > n || n > crate::symfunc::MAX_DIM {
            return Err(LabError::Precondition(format!("need 1 <= k <= n <= 8, got n={n}, k={k}")));
        }
        if n >= 2 * k {
            return Err(LabError::Precondition(format!("need n < 2k, got n={n}, k={k}")));
        }
        if !(self.big_k > 0.0 && self.kappa1_min > 0.0 && self.sigma_min > 0.0) {
            return Err(LabError::Precondition("K, B and N0 must be positive".into()));
        }
        if !(self.sigma_max >= self.sigma_min && self.sigma_max.is_finite()) {
            return Err(LabError::Precondition(format!(
                "need N0 <= N1, got [{}, {}]",
                self.sigma_min, self.sigma_max
            )));
        }
        Ok(())
    }

    pub fn constraints(&self) -> SampleConstraints {
        SampleConstraints {
            sigma_range: Some((self.sigma_min, self.sigma_max)),
            kappa1_min: self.kappa1_min,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FormReport {
    pub min_eigenvalue: f64,
    pub worst_kappa: Vec<f64>,
    pub samples_tested: usize,
    pub refinement_steps: usize,
}

impl FormReport {
    pub fn nonnegative(&self) -> bool {
        self.min_eigenvalue >= -NUMERICAL_ZERO
    }
}

fn require_cone(k: usize, kappa: &[f64]) -> Result<(), LabError> {
    let cone = cone_test(k, kappa)?;
    if cone.in_cone {
        Ok(())
    } else {
        Err(LabError::Sym(SymError::NotInCone {
            k,
            margin: cone.margin,
        }))
    }
}

/// Matrix of the quadratic form
/// `κ_1 (K (Σ_j σ_k^{jj} ξ_j)² − σ_k^{pp,qq} ξ_p ξ_q) − σ_k^{11} ξ_1² + Σ_{j≠1} a_j ξ_j²`
/// with `a_j = σ_k^{jj} + (κ_1 + κ_j) σ_k^{11,jj}`.
pub fn conjecture_form_matrix(kappa: &CurvatureVector, k: usize, big_k: f64) -> Result<DMatrix<f64>, LabError> {
    require_cone(k, kappa)?;
    let n = kappa.dim();
    let k1 = kappa[0];
    if k1 <= 0.0 {
        return Err(LabError::Precondition("κ_1 must be positive".into()));
    }
    let g = sigma_gradient(k, kappa)?;
    let h = sigma_hessian(k, kappa)?;
    let mut m = DMatrix::from_fn(n, n, |p, q| k1 * (big_k * (g[p] * g[q]) - h[(p, q)]));
    m[(0, 0)] -= g[0];
    for j in 1..n {
        m[(j, j)] += g[j] + (k1 + kappa[j]) * h[(0, j)];
    }
    Ok(m)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    *symmetric_eigenvalues(m).last().expect("non-empty matrix")
}

/// Rank-one term dominates when its weight exceeds the rest by this factor.
const DEFLATE_RATIO: f64 = 1e4;

/// `λ_min` of the form matrix, written as `R + c·g gᵀ` with `c = κ_1 K`.
///
/// For large `κ` the rank-one part dwarfs `R` and a dense eigen-solve of the
/// assembled matrix loses every digit of the small eigenvalues. In that regime
/// a Householder reflection maps `g` to `e_1`, the huge weight lands on a single
/// diagonal entry, and `λ_min` solves the bordered secular equation
/// `λ = λ_min(C − b bᵀ / (d − λ))` on the moderate trailing block `C`.
pub fn form_min_eigenvalue(kappa: &CurvatureVector, k: usize, big_k: f64) -> Result<f64, LabError> {
    let m = conjecture_form_matrix(kappa, k, big_k)?;
    let n = kappa.dim();
    let k1 = kappa[0];
    let (g, r) = form_parts(kappa, k)?;
    let gnorm = g.norm();
    let weight = k1 * big_k * gnorm * gnorm;
    if n == 1 || weight <= DEFLATE_RATIO * r.norm() {
        return Ok(min_eigenvalue(&m));
    }
    // Householder reflector Q with Q g = ∓‖g‖ e_1
    let mut v = g.clone();
    v[0] += g[0].signum() * gnorm;
    let vv = v.dot(&v);
    let q = DMatrix::identity(n, n) - (&v * v.transpose()) * (2.0 / vv);
    let rotated = &q * r * &q;
    let rotated = (&rotated + rotated.transpose()) * 0.5;
    let d = rotated[(0, 0)] + weight;
    let b = rotated.view((1, 0), (n - 1, 1)).into_owned();
    let c = rotated.view((1, 1), (n - 1, n - 1)).into_owned();
    let bbt = &b * b.transpose();
    let mut lambda = min_eigenvalue(&c);
    for _ in 0..50 {
        let next = min_eigenvalue(&(&c - &bbt / (d - lambda)));
        let done = (next - lambda).abs() <= 1e-15 * next.abs().max(f64::MIN_POSITIVE);
        lambda = next;
        if done {
            break;
        }
    }
    Ok(lambda)
}

/// `σ_k^{jj}` and the form matrix without its rank-one `κ_1 K g gᵀ` part.
fn form_parts(kappa: &CurvatureVector, k: usize) -> Result<(nalgebra::DVector<f64>, DMatrix<f64>), LabError> {
    let n = kappa.dim();
    let k1 = kappa[0];
    let g = nalgebra::DVector::from_vec(sigma_gradient(k, kappa)?);
    let h = sigma_hessian(k, kappa)?;
    let mut r = &h * (-k1);
    r[(0, 0)] -= g[0];
    for j in 1..n {
        r[(j, j)] += g[j] + (k1 + kappa[j]) * h[(0, j)];
    }
    Ok((g, r))
}

/// `λ_min` of the form matrix assembled and diagonalized in double-double.
/// Slow; used to report witnesses, not inside the descent loop.
pub fn form_min_eigenvalue_precise(kappa: &CurvatureVector, k: usize, big_k: f64) -> Result<f64, LabError> {
    conjecture_form_matrix(kappa, k, big_k)?;
    let n = kappa.dim();
    let (g, r) = form_parts(kappa, k)?;
    let weight = Dd::from(kappa[0]) * Dd::from(big_k);
    let mut m = Vec::with_capacity(n * n);
    for p in 0..n {
        for q in 0..n {
            m.push(Dd::from(r[(p, q)]) + weight * (Dd::from(g[p]) * Dd::from(g[q])));
        }
    }
    Ok(dd::symmetric_min_eigenvalue(&m, n).to_f64())
}

fn form_min(kappa: &CurvatureVector, k: usize, big_k: f64) -> f64 {
    form_min_eigenvalue(kappa, k, big_k).unwrap_or(f64::INFINITY)
}

/// SplitMix64 finalizer; used to derive per-start seeds.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn start_seed(seed: u64, start: usize) -> u64 {
    splitmix64(seed ^ splitmix64(start as u64))
}

/// Moves a candidate back into the constraint set with the scaling closest
/// to 1. `None` if the candidate left the cone or no scaling fits.
fn project(inst: &ConjectureInstance, raw: Vec<f64>) -> Option<CurvatureVector> {
    let kappa = CurvatureVector::new(raw).ok()?;
    if !cone_test(inst.k, &kappa).ok()?.in_cone {
        return None;
    }
    let s = sigma(inst.k, &kappa);
    let kf = inst.k as f64;
    let lo = (inst.sigma_min / s).powf(1.0 / kf).max(inst.kappa1_min / kappa[0]);
    let hi = (inst.sigma_max / s).powf(1.0 / kf);
    if !(lo <= hi) {
        return None;
    }
    let t = 1f64.clamp(lo, hi);
    let scaled = CurvatureVector::new(kappa.iter().map(|x| x * t).collect()).ok()?;
    (inst.constraints().admits(inst.k, &scaled) && cone_test(inst.k, &scaled).ok()?.in_cone)
        .then_some(scaled)
}

const MAX_SWEEPS_PER_START: usize = 400;
const INITIAL_STEP: f64 = 0.1;
const FINAL_STEP: f64 = 1e-7;

struct StartResult {
    value: f64,
    kappa: CurvatureVector,
    halvings: usize,
}

fn run_start(inst: &ConjectureInstance, seed: u64) -> Result<StartResult, LabError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kappa = sample_cone(inst.k, inst.n, &mut rng, &inst.constraints())?;
    let mut value = form_min(&kappa, inst.k, inst.big_k);
    let mut step = INITIAL_STEP;
    let mut halvings = 0;
    let mut sweeps = 0;
    while step > FINAL_STEP && sweeps < MAX_SWEEPS_PER_START {
        sweeps += 1;
        let mut improved = false;
        for i in 0..inst.n {
            for sign in [1.0, -1.0] {
                let mut raw = kappa.to_vec();
                raw[i] += sign * step * kappa[0].abs().max(1.0);
                if let Some(candidate) = project(inst, raw) {
                    let v = form_min(&candidate, inst.k, inst.big_k);
                    if v < value {
                        value = v;
                        kappa = candidate;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
            halvings += 1;
        }
    }
    Ok(StartResult {
        value,
        kappa,
        halvings,
    })
}

/// Multistart minimization of `λ_min` of the form matrix over the constraint
/// set. `budget` is the number of independent starts.
pub fn conjecture_search(inst: &ConjectureInstance, budget: usize, seed: u64) -> Result<FormReport, LabError> {
    inst.validate()?;
    if budget == 0 {
        return Err(LabError::Precondition("budget must be positive".into()));
    }
    let results: Vec<StartResult> = (0..budget)
        .into_par_iter()
        .map(|s| run_start(inst, start_seed(seed, s)))
        .collect::<Result<_, _>>()?;
    let refinement_steps = results.iter().map(|r| r.halvings).sum();
    let results: Vec<StartResult> = results
        .into_par_iter()
        .map(|r| {
            let value = form_min_eigenvalue_precise(&r.kappa, inst.k, inst.big_k)?;
            Ok(StartResult { value, ..r })
        })
        .collect::<Result<_, LabError>>()?;
    let worst = results
        .into_iter()
        .reduce(|a, b| if b.value < a.value { b } else { a })
        .expect("budget > 0");
    let admissible = cone_test(inst.k, &worst.kappa)?.in_cone
        && inst.constraints().admits(inst.k, &worst.kappa);
    if !admissible {
        return Err(LabError::WitnessAudit(worst.kappa.into_vec()));
    }
    Ok(FormReport {
        min_eigenvalue: worst.value,
        worst_kappa: worst.kappa.into_vec(),
        samples_tested: budget,
        refinement_steps,
    })
}

/// `(1 − e^{−x}) / x`, continuous through `x = 0`.
pub fn one_minus_exp_neg_over_x(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0
    } else {
        -(-x).exp_m1() / x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairwiseOutcome {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

/// Compares `2κ_i (1 − e^{κ_j − κ_i}) / (κ_i − κ_j) · σ_k^{jj}` with
/// `σ_k^{jj} + (κ_i + κ_j) σ_k^{ii,jj}`. Indices are 0-based into the sorted
/// vector. The inequality is only guaranteed for large `κ_1`; callers interpret.
pub fn pairwise_lemma_check(
    kappa: &CurvatureVector,
    k: usize,
    i: usize,
    j: usize,
) -> Result<PairwiseOutcome, LabError> {
    let n = kappa.dim();
    if i == j || i >= n || j >= n {
        return Err(LabError::Precondition(format!("need distinct indices < {n}, got ({i}, {j})")));
    }
    require_cone(k, kappa)?;
    let k1 = kappa[0];
    if kappa[i] < k1 - k1.sqrt() / n as f64 {
        return Err(LabError::Precondition(format!(
            "κ_i = {} below κ_1 − √κ_1/n = {}",
            kappa[i],
            k1 - k1.sqrt() / n as f64
        )));
    }
    if kappa[i] == kappa[j] {
        return Err(LabError::DegeneratePair { i, j });
    }
    let gap = kappa[i] - kappa[j];
    let sjj = sigma_deleted(k - 1, kappa, &[j]);
    let siijj = if k >= 2 { sigma_deleted(k - 2, kappa, &[i, j]) } else { 0.0 };
    let lhs = 2.0 * kappa[i] * one_minus_exp_neg_over_x(gap) * sjj;
    let rhs = sjj + (kappa[i] + kappa[j]) * siijj;
    Ok(PairwiseOutcome {
        holds: lhs >= rhs,
        lhs,
        rhs,
        slack: lhs - rhs,
    })
}

/// `f(x) = x − (1 − ε)(1 − e^{−x})(x + δ)`.
pub fn eps_delta_f(eps: f64, delta: f64, x: f64) -> f64 {
    x + (1.0 - eps) * (-x).exp_m1() * (x + delta)
}

const LOG_X_MIN: f64 = -6.0;
const LOG_X_MAX: f64 = 2.0;
const GRID_POINTS: usize = 20_000;

/// Minimum of `f` over the log grid on `[1e-6, 1e2]`, polished by golden
/// section between the neighbours of the best grid point.
pub fn eps_delta_min(eps: f64, delta: f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..GRID_POINTS)
        .map(|i| 10f64.powf(LOG_X_MIN + (LOG_X_MAX - LOG_X_MIN) * i as f64 / (GRID_POINTS - 1) as f64))
        .collect();
    let f = |x: f64| eps_delta_f(eps, delta, x);
    let (best, _) = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| (i, f(x)))
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let mut a = xs[best.saturating_sub(1)];
    let mut b = xs[(best + 1).min(GRID_POINTS - 1)];
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - ratio * (b - a);
        let d = a + ratio * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let polished = 0.5 * (a + b);
    let grid_min = f(xs[best]);
    if f(polished) < grid_min {
        (polished, f(polished))
    } else {
        (xs[best], grid_min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsDelta {
    pub epsilon: f64,
    pub delta: f64,
    pub min_f: f64,
    pub argmin_x: f64,
    /// Largest `δ ≤ 4ε` for which the sampled minimum stays positive.
    pub delta_boundary: f64,
}

/// Bisects for the feasibility boundary of `δ` in `(0, 4ε)` and returns half
/// of it together with the sampled minimum of `f`.
pub fn epsilon_delta_search(eps: f64) -> Result<EpsDelta, LabError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(LabError::Precondition(format!("need 0 < ε < 1, got {eps}")));
    }
    let feasible = |d: f64| eps_delta_min(eps, d).1 > 0.0;
    let mut lo = 0.0;
    let mut hi = 4.0 * eps;
    if feasible(hi) {
        lo = hi;
    } else {
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let delta = 0.5 * lo;
    let (argmin_x, min_f) = eps_delta_min(eps, delta);
    Ok(EpsDelta {
        epsilon: eps,
        delta,
        min_f,
        argmin_x,
        delta_boundary: lo,
    })
}
