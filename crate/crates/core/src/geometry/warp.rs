use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Warp function presets for `ḡ = dr² + λ(r)² g'`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WarpKind {
    /// `λ = r`
    #[default]
    Euclidean,
    /// `λ = sinh r`
    Hyperbolic,
    /// `λ = sin r`, usable only below `π/2`
    SphericalCap,
    /// `λ = Σ c_i r^i` on an explicit open interval
    Polynomial { coefficients: Vec<f64>, domain: (f64, f64) },
}

impl WarpKind {
    fn domain(&self) -> (f64, f64) {
        match self {
            WarpKind::Euclidean | WarpKind::Hyperbolic => (0.0, f64::INFINITY),
            WarpKind::SphericalCap => (0.0, std::f64::consts::PI),
            WarpKind::Polynomial { domain, .. } => *domain,
        }
    }
}

/// Values of the warp function and its companions at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpValues {
    pub lambda: f64,
    pub dlambda: f64,
    pub ddlambda: f64,
    /// `λ'/λ`
    pub zeta: f64,
    /// `Λ(r) = ∫_{r_ref}^r λ`
    pub big_lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarpProfile {
    kind: WarpKind,
    domain: (f64, f64),
    r_ref: f64,
}

const SCAN_POINTS: usize = 10_000;

impl WarpProfile {
    /// Validates the profile on the annulus `[r1, r2]`: the annulus must sit
    /// inside the open domain and `λ, λ' > 0` on a dense scan. `Λ` is
    /// referenced at `r1`.
    pub fn new(kind: WarpKind, annulus: (f64, f64)) -> Result<Self, GeometryError> {
        let (r1, r2) = annulus;
        let domain = kind.domain();
        if !(r1.is_finite() && r2.is_finite() && r1 < r2) {
            return Err(GeometryError::InvalidProfile(format!("annulus [{r1}, {r2}] is empty")));
        }
        if let WarpKind::Polynomial { coefficients, .. } = &kind {
            if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
                return Err(GeometryError::InvalidProfile("polynomial needs finite coefficients".into()));
            }
        }
        if !(domain.0 < r1 && r2 < domain.1) {
            return Err(GeometryError::InvalidProfile(format!(
                "annulus [{r1}, {r2}] not inside the warp domain ({}, {})",
                domain.0, domain.1
            )));
        }
        if kind == WarpKind::SphericalCap && r2 >= FRAC_PI_2 {
            return Err(GeometryError::InvalidProfile(format!(
                "spherical cap needs r2 < π/2 so that λ' = cos r > 0, got r2 = {r2}"
            )));
        }
        let profile = Self {
            kind,
            domain,
            r_ref: r1,
        };
        for i in 0..SCAN_POINTS {
            let r = r1 + (r2 - r1) * i as f64 / (SCAN_POINTS - 1) as f64;
            let (l, dl, _) = profile.derivatives(r);
            if !(l > 0.0 && dl > 0.0) {
                return Err(GeometryError::InvalidProfile(format!(
                    "need λ > 0 and λ' > 0 on the annulus; at r = {r}: λ = {l}, λ' = {dl}"
                )));
            }
        }
        Ok(profile)
    }

    pub fn kind(&self) -> &WarpKind {
        &self.kind
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn r_ref(&self) -> f64 {
        self.r_ref
    }

    pub fn contains(&self, r: f64) -> bool {
        self.domain.0 < r && r < self.domain.1
    }

    /// `(λ, λ', λ'')` without domain checks.
    #[inline]
    pub fn derivatives(&self, r: f64) -> (f64, f64, f64) {
        match &self.kind {
            WarpKind::Euclidean => (r, 1.0, 0.0),
            WarpKind::Hyperbolic => {
                let (s, c) = (r.sinh(), r.cosh());
                (s, c, s)
            }
            WarpKind::SphericalCap => {
                let (s, c) = r.sin_cos();
                (s, c, -s)
            }
            WarpKind::Polynomial { coefficients, .. } => {
                let (mut p, mut dp, mut ddp) = (0.0, 0.0, 0.0);
                for &c in coefficients.iter().rev() {
                    ddp = ddp * r + 2.0 * dp;
                    dp = dp * r + p;
                    p = p * r + c;
                }
                (p, dp, ddp)
            }
        }
    }

    fn primitive(&self, r: f64) -> f64 {
        let r0 = self.r_ref;
        match &self.kind {
            WarpKind::Euclidean => 0.5 * (r * r - r0 * r0),
            WarpKind::Hyperbolic => r.cosh() - r0.cosh(),
            WarpKind::SphericalCap => r0.cos() - r.cos(),
            WarpKind::Polynomial { .. } => {
                let f = |s: f64| self.derivatives(s).0;
                if r >= r0 {
                    adaptive_simpson(&f, r0, r, 1e-12)
                } else {
                    -adaptive_simpson(&f, r, r0, 1e-12)
                }
            }
        }
    }

    pub fn eval(&self, r: f64) -> Result<WarpValues, GeometryError> {
        if !self.contains(r) {
            return Err(GeometryError::Domain {
                r,
                lo: self.domain.0,
                hi: self.domain.1,
            });
        }
        let (lambda, dlambda, ddlambda) = self.derivatives(r);
        Ok(WarpValues {
            lambda,
            dlambda,
            ddlambda,
            zeta: dlambda / lambda,
            big_lambda: self.primitive(r),
        })
    }

    /// `Λ(r)` only.
    pub fn big_lambda(&self, r: f64) -> Result<f64, GeometryError> {
        Ok(self.eval(r)?.big_lambda)
    }
}

/// Adaptive Simpson quadrature with the usual Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
    }

    if a == b {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 50)
}
