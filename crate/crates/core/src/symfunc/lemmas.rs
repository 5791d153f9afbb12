//! Classical inequalities for `σ_k` on the Gårding cone, evaluated with slack.

use serde::Serialize;

use super::{binomial, cone_test, sigma, sigma_deleted, sigma_gradient, CurvatureVector, SymError};

/// Relative rounding allowance: a check passes when `slack >= -TOL * scale`,
/// where `scale` is the same expression evaluated on `|κ|`.
const TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub holds: bool,
    /// Worst `rhs - lhs` style margin; `None` when the check is vacuous.
    pub slack: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub k: usize,
    pub kappa: Vec<f64>,
    pub checks: Vec<Check>,
    /// `σ_{k-1}(κ|k) / σ_{k-1}(κ)`, recorded only.
    pub ratio_c: f64,
}

impl LemmaReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Worst {
    name: &'static str,
    holds: bool,
    slack: Option<f64>,
}

impl Worst {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            holds: true,
            slack: None,
        }
    }

    fn record(&mut self, slack: f64, scale: f64, strict: bool) {
        let allowed = -TOL * scale.abs();
        let ok = if strict && scale == 0.0 {
            slack > 0.0
        } else {
            slack >= allowed
        };
        self.holds &= ok;
        self.slack = Some(self.slack.map_or(slack, |s: f64| s.min(slack)));
    }

    fn finish(self) -> Check {
        Check {
            name: self.name,
            holds: self.holds,
            slack: self.slack,
        }
    }
}

/// Evaluates parts (a), (b), (d), (e) and the pairwise bound for `κ ∈ Γ_k`.
pub fn lemma_suite(k: usize, kappa: &CurvatureVector) -> Result<LemmaReport, SymError> {
    let n = kappa.dim();
    let cone = cone_test(k, kappa)?;
    if !cone.in_cone {
        return Err(SymError::NotInCone {
            k,
            margin: cone.margin,
        });
    }
    let abs: Vec<f64> = kappa.iter().map(|x| x.abs()).collect();
    let sk = sigma(k, kappa);
    let mut checks = Vec::with_capacity(5);

    let mut a = Worst::new("a");
    for l in 1..k {
        let prod: f64 = kappa[..l].iter().product();
        a.record(sigma(l, kappa) - prod, sigma(l, &abs), false);
    }
    checks.push(a.finish());

    let mut b = Worst::new("b");
    let top_k: f64 = kappa[..k].iter().product();
    let cnk = binomial(n, k);
    b.record(cnk * top_k - sk, cnk * top_k.abs() + sigma(k, &abs), false);
    checks.push(b.finish());

    let mut d = Worst::new("d");
    let bound = (n - k) as f64 * kappa[0] / k as f64;
    for &x in kappa.iter().filter(|&&x| x <= 0.0) {
        d.record(bound + x, bound.abs() + x.abs(), true);
    }
    checks.push(d.finish());

    let mut e = Worst::new("e");
    let grad = sigma_gradient(k, kappa)?;
    let lhs: f64 = grad.iter().zip(kappa.iter()).map(|(g, x)| g * x * x).sum();
    let rhs = k as f64 / n as f64 * sigma(1, kappa) * sk;
    let lhs_scale: f64 = (0..n)
        .map(|i| sigma_deleted(k - 1, &abs, &[i]) * kappa[i] * kappa[i])
        .sum();
    e.record(
        lhs - rhs,
        lhs_scale + k as f64 / n as f64 * sigma(1, &abs) * sigma(k, &abs),
        false,
    );
    checks.push(e.finish());

    let mut pw = Worst::new("pairwise");
    if n >= 2 {
        let c = ((k * (n - k)) as f64 / (n - 1) as f64).sqrt();
        for i in 0..n {
            for j in 0..n {
                if i == j || kappa[i] < kappa[j] {
                    continue;
                }
                let lhs = sigma_deleted(k - 1, kappa, &[i, j]).abs();
                let rhs = c * grad[j];
                let scale = sigma_deleted(k - 1, &abs, &[i, j]) + c * sigma_deleted(k - 1, &abs, &[j]);
                pw.record(rhs - lhs, scale, false);
            }
        }
    }
    checks.push(pw.finish());

    let ratio_c = grad[k - 1] / sigma(k - 1, kappa);

    Ok(LemmaReport {
        k,
        kappa: kappa.to_vec(),
        checks,
        ratio_c,
    })
}
