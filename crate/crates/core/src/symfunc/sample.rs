//! Rejection sampler for `Γ_k` with optional `σ_k` range and `κ_1` floor.

use rand::Rng;

use super::{cone_test, sigma, CurvatureVector, SymError, MAX_DIM};

const MAX_DRAWS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SampleConstraints {
    /// Inclusive `[N0, N1]` window for `σ_k`.
    pub sigma_range: Option<(f64, f64)>,
    /// Lower bound `B` for the largest curvature.
    pub kappa1_min: f64,
}

impl SampleConstraints {
    pub fn validate(&self) -> Result<(), SymError> {
        if let Some((lo, hi)) = self.sigma_range {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(SymError::InfeasibleConstraints(format!(
                    "need 0 < N0 <= N1 < inf, got [{lo}, {hi}]"
                )));
            }
        }
        if !(self.kappa1_min >= 0.0 && self.kappa1_min.is_finite()) {
            return Err(SymError::InfeasibleConstraints(format!(
                "need finite B >= 0, got {}",
                self.kappa1_min
            )));
        }
        Ok(())
    }

    /// Whether a cone point satisfies the window and the floor.
    pub fn admits(&self, k: usize, kappa: &[f64]) -> bool {
        let top = kappa.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top < self.kappa1_min {
            return false;
        }
        match self.sigma_range {
            Some((lo, hi)) => {
                let s = sigma(k, kappa);
                s >= lo && s <= hi
            }
            None => true,
        }
    }

    /// Scales a cone point by `t > 0` into the constraint set, choosing `t`
    /// log-uniformly from the admissible interval. `None` when no `t` works.
    pub fn rescale<R: Rng + ?Sized>(&self, k: usize, kappa: &[f64], rng: &mut R) -> Option<Vec<f64>> {
        let s = sigma(k, kappa);
        let top = kappa.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(s > 0.0 && top > 0.0) {
            return None;
        }
        let kf = k as f64;
        let floor = self.kappa1_min / top;
        let (lo, hi) = match self.sigma_range {
            Some((n0, n1)) => ((n0 / s).powf(1.0 / kf).max(floor), (n1 / s).powf(1.0 / kf)),
            None => (floor.max(1.0), floor.max(1.0)),
        };
        if !(lo <= hi) {
            return None;
        }
        let t = if hi > lo {
            (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp()
        } else {
            lo
        };
        let scaled: Vec<f64> = kappa.iter().map(|x| x * t).collect();
        self.admits(k, &scaled).then_some(scaled)
    }
}

fn positive_entries<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let spread = rng.gen_range(0.0..3.0);
    (0..n).map(|_| 10f64.powf(-spread * rng.gen::<f64>())).collect()
}

fn tiny_tail<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut x: Vec<f64> = (0..n).map(|_| 10f64.powf(-4.0 * rng.gen::<f64>())).collect();
    x[0] = 1.0;
    x
}

/// Pushes the smallest entries down along a random direction, landing
/// somewhere between the start and the cone boundary (biased toward it).
/// Requires `k < n`.
fn boundary_push<R: Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> Vec<f64> {
    let mut x = positive_entries(n, rng);
    x.sort_by(|a, b| b.partial_cmp(a).unwrap());
    // at most n - k entries of a Γ_k point can be non-positive
    let m = rng.gen_range(1..=n - k);
    let dir: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
    let pushed = |s: f64| {
        let mut y = x.clone();
        for (j, d) in dir.iter().enumerate() {
            y[n - 1 - j] -= s * d;
        }
        y
    };
    let inside = |s: f64| cone_test(k, &pushed(s)).map(|c| c.in_cone).unwrap_or(false);
    let mut hi = 1.0;
    while inside(hi) && hi < 1e6 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let u: f64 = rng.gen();
    pushed(lo * (1.0 - u * u * u))
}

/// Draws `κ ∈ Γ_k ⊂ ℝⁿ` satisfying `constraints`; deterministic in the
/// generator state.
pub fn sample_cone<R: Rng + ?Sized>(
    k: usize,
    n: usize,
    rng: &mut R,
    constraints: &SampleConstraints,
) -> Result<CurvatureVector, SymError> {
    if n == 0 || n > MAX_DIM {
        return Err(SymError::Dimension(n));
    }
    if k == 0 || k > n {
        return Err(SymError::Domain { k, n });
    }
    constraints.validate()?;
    for _ in 0..MAX_DRAWS {
        let raw = match rng.gen_range(0..3) {
            0 => positive_entries(n, rng),
            1 if k < n => boundary_push(k, n, rng),
            _ => tiny_tail(n, rng),
        };
        if !cone_test(k, &raw)?.in_cone {
            continue;
        }
        if let Some(scaled) = constraints.rescale(k, &raw, rng) {
            if cone_test(k, &scaled)?.in_cone {
                return CurvatureVector::new(scaled);
            }
        }
    }
    Err(SymError::SamplingExhausted { draws: MAX_DRAWS })
}
