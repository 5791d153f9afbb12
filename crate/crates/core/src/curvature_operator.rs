//! The discrete operator `F_t[r] = σ_k(κ(r)) − ψ̃(t, r, u)`, its sparse
//! Jacobian and the structural checks on `ψ`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    jet_from_derivatives, jet_sweep, BaseGrid, NodeDerivatives, GeometryError, HypersurfaceJet,
    RadialGraphField, WarpProfile,
};
use crate::symfunc::{binomial, cone_test, sigma, sigma_all, sigma_gradient, SymError};

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Sym(#[from] SymError),
    #[error("node {node} left the cone Γ_k: κ = {kappa:?}, margin {margin:e}")]
    Inadmissible { node: usize, kappa: Vec<f64>, margin: f64 },
    #[error("tabulated ψ queried off its grid at u = {u:?}")]
    OffGrid { u: Vec<f64> },
    #[error("invalid operator setup: {0}")]
    Setup(String),
}

/// Right-hand side presets. `β(r) = exp(s_β (r_mid − r))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsiSpec {
    /// `C_n^k ζ(r)^k β(r)`
    RadialBeta { slope: f64 },
    /// radial-beta times `1 + ε Π cos u_i`
    Angular { slope: f64, amplitude: f64 },
    /// grid function of `u`, no `r` dependence
    Tabulated { dim: usize, points: usize, values: Vec<f64> },
}

impl PsiSpec {
    pub fn tabulated(grid: &BaseGrid, values: Vec<f64>) -> Self {
        PsiSpec::Tabulated {
            dim: grid.dim(),
            points: grid.points(),
            values,
        }
    }

    pub fn validate(&self) -> Result<(), OperatorError> {
        match *self {
            PsiSpec::RadialBeta { slope } if !(slope > 0.0 && slope.is_finite()) => {
                Err(OperatorError::Setup(format!("ψ slope must be positive, got {slope}")))
            }
            PsiSpec::Angular { slope, amplitude } => {
                if !(slope > 0.0 && slope.is_finite()) {
                    return Err(OperatorError::Setup(format!("ψ slope must be positive, got {slope}")));
                }
                if !(0.0..1.0).contains(&amplitude) {
                    return Err(OperatorError::Setup(format!(
                        "angular amplitude must lie in [0, 1) to keep ψ > 0, got {amplitude}"
                    )));
                }
                Ok(())
            }
            PsiSpec::Tabulated { dim, points, ref values } => {
                let grid = BaseGrid::new(dim, points)?;
                if values.len() != grid.len() {
                    return Err(OperatorError::Setup(format!(
                        "tabulated ψ has {} values for {} nodes",
                        values.len(),
                        grid.len()
                    )));
                }
                if values.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                    return Err(OperatorError::Setup("tabulated ψ must be finite and positive".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// One member of the homotopy family
/// `σ_k = t ψ + (1 − t) φ(r) C_n^k ζ(r)^k`, `φ(r) = exp(s_φ (r_mid − r))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomotopyConfig {
    pub t: f64,
    pub phi_slope: f64,
    pub annulus: (f64, f64),
    pub n: usize,
    pub k: usize,
}

impl HomotopyConfig {
    pub fn r_mid(&self) -> f64 {
        0.5 * (self.annulus.0 + self.annulus.1)
    }

    pub fn with_t(self, t: f64) -> Self {
        Self { t, ..self }
    }

    pub fn validate(&self) -> Result<(), OperatorError> {
        let (r1, r2) = self.annulus;
        if !(0.0..=1.0).contains(&self.t) {
            return Err(OperatorError::Setup(format!("t = {} outside [0, 1]", self.t)));
        }
        if !(self.phi_slope > 0.0 && self.phi_slope.is_finite()) {
            return Err(OperatorError::Setup(format!("φ slope must be positive, got {}", self.phi_slope)));
        }
        if !(r1 < r2) {
            return Err(OperatorError::Setup(format!("empty annulus [{r1}, {r2}]")));
        }
        if self.k == 0 || self.k > self.n {
            return Err(OperatorError::Setup(format!("need 1 <= k <= n, got n={}, k={}", self.n, self.k)));
        }
        Ok(())
    }

    pub fn phi(&self, r: f64) -> f64 {
        (self.phi_slope * (self.r_mid() - r)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiValue {
    pub value: f64,
    pub d_dr: f64,
    pub d_du: [f64; 3],
}

/// `C_n^k ζ^k` and its `r`-derivative.
fn slice_curvature(profile: &WarpProfile, n: usize, k: usize, r: f64) -> (f64, f64) {
    let (l, dl, ddl) = profile.derivatives(r);
    let zeta = dl / l;
    let dzeta = ddl / l - zeta * zeta;
    let c = binomial(n, k);
    let base = c * zeta.powi(k as i32);
    let d = c * k as f64 * zeta.powi(k as i32 - 1) * dzeta;
    (base, d)
}

/// `ψ(r, u)` with analytic partials; tabulated values report zero partials.
pub fn psi_eval(
    spec: &PsiSpec,
    profile: &WarpProfile,
    config: &HomotopyConfig,
    r: f64,
    u: &[f64],
) -> Result<PsiValue, OperatorError> {
    let (n, k) = (config.n, config.k);
    let radial = |slope: f64| {
        let (base, dbase) = slice_curvature(profile, n, k, r);
        let beta = (slope * (config.r_mid() - r)).exp();
        (base * beta, (dbase - slope * base) * beta)
    };
    match spec {
        PsiSpec::RadialBeta { slope } => {
            let (value, d_dr) = radial(*slope);
            Ok(PsiValue {
                value,
                d_dr,
                d_du: [0.0; 3],
            })
        }
        PsiSpec::Angular { slope, amplitude } => {
            let (rv, rd) = radial(*slope);
            let a: f64 = u[..n].iter().map(|x| x.cos()).product();
            let factor = 1.0 + amplitude * a;
            let mut d_du = [0.0; 3];
            for (i, d) in d_du.iter_mut().enumerate().take(n) {
                let others: f64 = (0..n).filter(|&j| j != i).map(|j| u[j].cos()).product();
                *d = rv * amplitude * (-u[i].sin()) * others;
            }
            Ok(PsiValue {
                value: rv * factor,
                d_dr: rd * factor,
                d_du,
            })
        }
        PsiSpec::Tabulated { dim, points, values } => {
            let grid = BaseGrid::new(*dim, *points)?;
            let node = grid.locate(u).ok_or_else(|| OperatorError::OffGrid { u: u.to_vec() })?;
            Ok(PsiValue {
                value: values[node],
                d_dr: 0.0,
                d_du: [0.0; 3],
            })
        }
    }
}

/// `ψ̃` and `∂ψ̃/∂r` at one node.
fn psi_tilde(
    spec: &PsiSpec,
    profile: &WarpProfile,
    config: &HomotopyConfig,
    r: f64,
    u: &[f64],
) -> Result<(f64, f64), OperatorError> {
    let t = config.t;
    let psi = if t > 0.0 {
        psi_eval(spec, profile, config, r, u)?
    } else {
        PsiValue {
            value: 0.0,
            d_dr: 0.0,
            d_du: [0.0; 3],
        }
    };
    let (base, dbase) = slice_curvature(profile, config.n, config.k, r);
    let phi = config.phi(r);
    let value = t * psi.value + (1.0 - t) * phi * base;
    let d = t * psi.d_dr + (1.0 - t) * phi * (dbase - config.phi_slope * base);
    Ok((value, d))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub values: Vec<f64>,
    pub min_cone_margin: f64,
    pub min_tau: f64,
    /// `max |κ_i|`
    pub max_kappa: f64,
    /// Smallest eigenvalue of `∂σ_k/∂(shape)` over nodes.
    pub min_ellipticity: f64,
}

impl ResidualReport {
    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

fn check_setup(field: &RadialGraphField, config: &HomotopyConfig) -> Result<(), OperatorError> {
    config.validate()?;
    if field.grid.dim() != config.n {
        return Err(OperatorError::Setup(format!(
            "field dimension {} but n = {}",
            field.grid.dim(),
            config.n
        )));
    }
    Ok(())
}

/// Jets plus cone margins; fails at the node with the smallest margin when
/// any node leaves `Γ_k`.
fn admissible_jets(
    field: &RadialGraphField,
    config: &HomotopyConfig,
    profile: &WarpProfile,
) -> Result<(Vec<HypersurfaceJet>, Vec<f64>), OperatorError> {
    check_setup(field, config)?;
    let jets = jet_sweep(profile, field)?;
    let margins: Vec<f64> = jets
        .par_iter()
        .map(|j| cone_test(config.k, &j.kappa).map(|c| if c.in_cone { c.margin } else { c.margin.min(0.0) }))
        .collect::<Result<_, _>>()?;
    let (worst, &margin) = margins
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is never empty");
    if !(margin > 0.0) {
        return Err(OperatorError::Inadmissible {
            node: worst,
            kappa: jets[worst].kappa.to_vec(),
            margin,
        });
    }
    Ok((jets, margins))
}

pub fn residual(
    field: &RadialGraphField,
    config: &HomotopyConfig,
    spec: &PsiSpec,
    profile: &WarpProfile,
) -> Result<ResidualReport, OperatorError> {
    let (jets, margins) = admissible_jets(field, config, profile)?;
    let grid = field.grid;
    let k = config.k;
    let values: Vec<f64> = jets
        .par_iter()
        .enumerate()
        .map(|(node, j)| {
            let u = grid.position(node);
            let (target, _) = psi_tilde(spec, profile, config, j.r, &u[..config.n])?;
            Ok(sigma(k, &j.kappa) - target)
        })
        .collect::<Result<_, OperatorError>>()?;
    let min_ellipticity = jets
        .par_iter()
        .map(|j| {
            sigma_gradient(k, &j.kappa)
                .map(|g| g.into_iter().fold(f64::INFINITY, f64::min))
                .unwrap_or(f64::NAN)
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(ResidualReport {
        values,
        min_cone_margin: margins.iter().copied().fold(f64::INFINITY, f64::min),
        min_tau: jets.iter().map(|j| j.tau).fold(f64::INFINITY, f64::min),
        max_kappa: jets
            .iter()
            .flat_map(|j| j.kappa.iter().map(|x| x.abs()))
            .fold(0.0, f64::max),
        min_ellipticity,
    })
}

/// Square sparse matrix in coordinate form, rows sorted, columns sorted
/// within a row, no duplicate positions.
#[derive(Debug, Clone, PartialEq)]
pub struct CooMatrix {
    pub dim: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl CooMatrix {
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    pub fn row(&self, i: usize) -> &[(usize, usize, f64)] {
        let start = self.entries.partition_point(|e| e.0 < i);
        let end = self.entries.partition_point(|e| e.0 <= i);
        &self.entries[start..end]
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }
}

/// Coefficients of `dF` with respect to `r`, `∇r` and `Hess r` at one node.
struct Linearization {
    c_r: f64,
    c_p: [f64; 3],
    c_x: [[f64; 3]; 3],
}

/// `dσ_k(W) = tr(T_{k−1} dW)` with `W = g⁻¹h` and the Newton tensor
/// `T_m = σ_m I − W T_{m−1}`; `dW = g⁻¹ dh − g⁻¹ dg W`.
fn linearize(jet: &HypersurfaceJet, k: usize) -> Linearization {
    let n = jet.n;
    let w = jet.weingarten();
    let sig = sigma_all(k, &jet.kappa);
    let mut t = DMatrix::<f64>::identity(n, n);
    for s in sig.iter().take(k).skip(1) {
        t = DMatrix::from_diagonal_element(n, n, *s) - &w * &t;
    }
    let pm = &t * &jet.g_inv;
    let qm = &w * &pm;

    let p = &jet.grad[..n];
    let (l, dl, ddl, v) = (jet.lambda, jet.dlambda, jet.ddlambda, jet.v);
    let nmat = DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { l * l * dl } else { 0.0 };
        -l * jet.hess[i][j] + 2.0 * dl * p[i] * p[j] + diag
    });

    let dv_dr = l * dl / v;
    let mut c_r = 0.0;
    for i in 0..n {
        for j in 0..n {
            let diag = if i == j { 2.0 * l * dl * dl + l * l * ddl } else { 0.0 };
            let dn = -dl * jet.hess[i][j] + 2.0 * ddl * p[i] * p[j] + diag;
            let dh = dn / v - nmat[(i, j)] * dv_dr / (v * v);
            c_r += pm[(j, i)] * dh;
            if i == j {
                c_r -= qm[(j, i)] * 2.0 * l * dl;
            }
        }
    }

    let mut c_p = [0.0; 3];
    for (a, cp) in c_p.iter_mut().enumerate().take(n) {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let sym = (if i == a { p[j] } else { 0.0 }) + (if j == a { p[i] } else { 0.0 });
                let dh = 2.0 * dl * sym / v - nmat[(i, j)] * p[a] / (v * v * v);
                acc += pm[(j, i)] * dh - qm[(j, i)] * sym;
            }
        }
        *cp = acc;
    }

    let mut c_x = [[0.0; 3]; 3];
    for a in 0..n {
        for b in 0..n {
            c_x[a][b] = -(l / v) * pm[(b, a)];
        }
    }
    Linearization { c_r, c_p, c_x }
}

/// Analytic Jacobian of the residual, assembled through the difference
/// stencils. Each row couples a node to its `3ⁿ` neighbourhood.
pub fn jacobian(
    field: &RadialGraphField,
    config: &HomotopyConfig,
    spec: &PsiSpec,
    profile: &WarpProfile,
) -> Result<CooMatrix, OperatorError> {
    let (jets, _) = admissible_jets(field, config, profile)?;
    let grid = field.grid;
    let n = config.n;
    let h = grid.spacing();
    let rows: Vec<Vec<(usize, usize, f64)>> = jets
        .par_iter()
        .enumerate()
        .map(|(node, jet)| {
            let u = grid.position(node);
            let (_, dpsi) = psi_tilde(spec, profile, config, jet.r, &u[..n])?;
            let lin = linearize(jet, config.k);
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(1 + 2 * n + 2 * n * n);
            let mut center = lin.c_r - dpsi;
            for a in 0..n {
                center -= 2.0 * lin.c_x[a][a] / (h * h);
                let side = lin.c_x[a][a] / (h * h);
                row.push((grid.shift(node, a, 1), side + lin.c_p[a] / (2.0 * h)));
                row.push((grid.shift(node, a, -1), side - lin.c_p[a] / (2.0 * h)));
                for b in (a + 1)..n {
                    let w = (lin.c_x[a][b] + lin.c_x[b][a]) / (4.0 * h * h);
                    let pa = grid.shift(node, a, 1);
                    let ma = grid.shift(node, a, -1);
                    row.push((grid.shift(pa, b, 1), w));
                    row.push((grid.shift(pa, b, -1), -w));
                    row.push((grid.shift(ma, b, 1), -w));
                    row.push((grid.shift(ma, b, -1), w));
                }
            }
            row.push((node, center));
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(row.len());
            for (col, val) in row {
                match merged.last_mut() {
                    Some(last) if last.1 == col => last.2 += val,
                    _ => merged.push((node, col, val)),
                }
            }
            Ok(merged)
        })
        .collect::<Result<_, OperatorError>>()?;
    Ok(CooMatrix {
        dim: grid.len(),
        entries: rows.into_iter().flatten().collect(),
    })
}

/// Column-by-column central differences of the residual. Costs one pair of
/// residual evaluations per node; intended for debugging small grids.
pub fn jacobian_fd(
    field: &RadialGraphField,
    config: &HomotopyConfig,
    spec: &PsiSpec,
    profile: &WarpProfile,
    step: f64,
) -> Result<CooMatrix, OperatorError> {
    let dim = field.grid.len();
    let cols: Vec<Vec<(usize, usize, f64)>> = (0..dim)
        .into_par_iter()
        .map(|col| {
            let mut plus = field.clone();
            plus.values[col] += step;
            let mut minus = field.clone();
            minus.values[col] -= step;
            let fp = residual(&plus, config, spec, profile)?.values;
            let fm = residual(&minus, config, spec, profile)?.values;
            Ok(fp
                .iter()
                .zip(&fm)
                .enumerate()
                .filter_map(|(row, (a, b))| {
                    let d = (a - b) / (2.0 * step);
                    (d != 0.0).then_some((row, col, d))
                })
                .collect())
        })
        .collect::<Result<_, OperatorError>>()?;
    let mut entries: Vec<(usize, usize, f64)> = cols.into_iter().flatten().collect();
    entries.sort_by_key(|e| (e.0, e.1));
    Ok(CooMatrix { dim, entries })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionAudit {
    pub holds: bool,
    /// Smallest margin found; positive means satisfied.
    pub worst_slack: f64,
    pub at_r: f64,
    pub at_node: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    /// `ψ > C_n^k ζ^k` at `r = r₁`
    pub lower_barrier: ConditionAudit,
    /// `ψ < C_n^k ζ^k` at `r = r₂`
    pub upper_barrier: ConditionAudit,
    /// `∂_r(λ^k ψ) ≤ 0` on `(r₁, r₂)`
    pub monotonicity: ConditionAudit,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.lower_barrier.holds && self.upper_barrier.holds && self.monotonicity.holds
    }

    pub fn failing(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.lower_barrier.holds {
            out.push("lower barrier ψ > C_n^k ζ^k at r1");
        }
        if !self.upper_barrier.holds {
            out.push("upper barrier ψ < C_n^k ζ^k at r2");
        }
        if !self.monotonicity.holds {
            out.push("monotonicity ∂_r(λ^k ψ) <= 0");
        }
        out
    }
}

fn worst(samples: impl Iterator<Item = Result<(f64, f64, usize), OperatorError>>, strict: bool) -> Result<ConditionAudit, OperatorError> {
    let mut best = ConditionAudit {
        holds: true,
        worst_slack: f64::INFINITY,
        at_r: f64::NAN,
        at_node: 0,
    };
    for s in samples {
        let (slack, r, node) = s?;
        if slack < best.worst_slack || slack.is_nan() {
            best.worst_slack = slack;
            best.at_r = r;
            best.at_node = node;
        }
    }
    best.holds = if strict { best.worst_slack > 0.0 } else { best.worst_slack >= 0.0 };
    Ok(best)
}

/// Scans the barrier conditions over `grid` at `r₁` and `r₂`, and the sign
/// of `∂_r(λ^k ψ) = kλ^{k−1}λ'ψ + λ^kψ_r` on `radial_samples` interior radii.
pub fn assumption_audit(
    spec: &PsiSpec,
    profile: &WarpProfile,
    config: &HomotopyConfig,
    grid: &BaseGrid,
    radial_samples: usize,
) -> Result<AssumptionReport, OperatorError> {
    config.validate()?;
    spec.validate()?;
    let (n, k) = (config.n, config.k);
    let (r1, r2) = config.annulus;
    let nodes = 0..grid.len();
    let barrier = |r: f64, sign: f64| {
        let (base, _) = slice_curvature(profile, n, k, r);
        nodes.clone().map(move |node| {
            let u = grid.position(node);
            let psi = psi_eval(spec, profile, config, r, &u[..n])?;
            Ok((sign * (psi.value - base), r, node))
        })
    };
    let lower_barrier = worst(barrier(r1, 1.0), true)?;
    let upper_barrier = worst(barrier(r2, -1.0), true)?;
    let m = radial_samples.max(2);
    let mono = (0..m).flat_map(|i| {
        let r = r1 + (r2 - r1) * (i as f64 + 0.5) / m as f64;
        let (l, dl, _) = profile.derivatives(r);
        nodes.clone().map(move |node| {
            let u = grid.position(node);
            let psi = psi_eval(spec, profile, config, r, &u[..n])?;
            let d = k as f64 * l.powi(k as i32 - 1) * dl * psi.value + l.powi(k as i32) * psi.d_dr;
            Ok((-d, r, node))
        })
    });
    let monotonicity = worst(mono, false)?;
    Ok(AssumptionReport {
        lower_barrier,
        upper_barrier,
        monotonicity,
    })
}

/// Discrete `σ_k(κ)` of a field, for tabulating manufactured right-hand sides.
pub fn sigma_field(field: &RadialGraphField, k: usize, profile: &WarpProfile) -> Result<Vec<f64>, OperatorError> {
    Ok(jet_sweep(profile, field)?.iter().map(|j| sigma(k, &j.kappa)).collect())
}

/// `σ_k(κ)` of a smooth graph from exact derivatives, sampled on `grid`.
/// `exact(u)` returns `(r, ∇r, Hess r)`.
pub fn sigma_continuum<F>(grid: &BaseGrid, k: usize, profile: &WarpProfile, exact: F) -> Result<Vec<f64>, OperatorError>
where
    F: Fn(&[f64]) -> (f64, [f64; 3], [[f64; 3]; 3]) + Sync,
{
    let n = grid.dim();
    (0..grid.len())
        .into_par_iter()
        .map(|node| {
            let u = grid.position(node);
            let (r, grad, hess) = exact(&u[..n]);
            let d = NodeDerivatives { grad, hess };
            let jet = jet_from_derivatives(profile, n, r, &d, node)?;
            Ok(sigma(k, &jet.kappa))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WarpKind;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn euclid() -> WarpProfile {
        WarpProfile::new(WarpKind::Euclidean, (1.0, 3.0)).unwrap()
    }

    fn config(n: usize, k: usize, t: f64) -> HomotopyConfig {
        HomotopyConfig {
            t,
            phi_slope: 1.0,
            annulus: (1.0, 3.0),
            n,
            k,
        }
    }

    #[test]
    fn radial_beta_at_mid() {
        let cfg = config(2, 2, 1.0);
        let v = psi_eval(&PsiSpec::RadialBeta { slope: 1.0 }, &euclid(), &cfg, 2.0, &[0.3, 0.4]).unwrap();
        assert_relative_eq!(v.value, 0.25, max_relative = 1e-15);
    }

    #[test]
    fn angular_with_zero_amplitude_is_radial() {
        let cfg = config(3, 2, 1.0);
        let p = WarpProfile::new(WarpKind::Hyperbolic, (1.0, 3.0)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let r = rng.gen_range(1.0..3.0);
            let u = [rng.gen_range(0.0..6.28), rng.gen_range(0.0..6.28), rng.gen_range(0.0..6.28)];
            let a = psi_eval(&PsiSpec::Angular { slope: 0.7, amplitude: 0.0 }, &p, &cfg, r, &u).unwrap();
            let b = psi_eval(&PsiSpec::RadialBeta { slope: 0.7 }, &p, &cfg, r, &u).unwrap();
            assert_eq!(a.value, b.value);
            assert_eq!(a.d_dr, b.d_dr);
        }
    }

    #[test]
    fn psi_derivatives_match_differences() {
        let cfg = config(2, 2, 1.0);
        let spec = PsiSpec::Angular { slope: 1.3, amplitude: 0.2 };
        for kind in [WarpKind::Euclidean, WarpKind::Hyperbolic] {
            let p = WarpProfile::new(kind, (1.0, 3.0)).unwrap();
            let (r, u) = (1.7, [0.4, 1.1]);
            let v = psi_eval(&spec, &p, &cfg, r, &u).unwrap();
            let s = 1e-6;
            let fd = (psi_eval(&spec, &p, &cfg, r + s, &u).unwrap().value
                - psi_eval(&spec, &p, &cfg, r - s, &u).unwrap().value)
                / (2.0 * s);
            assert_relative_eq!(v.d_dr, fd, max_relative = 1e-7);
            let fd_u = (psi_eval(&spec, &p, &cfg, r, &[u[0] + s, u[1]]).unwrap().value
                - psi_eval(&spec, &p, &cfg, r, &[u[0] - s, u[1]]).unwrap().value)
                / (2.0 * s);
            assert_relative_eq!(v.d_du[0], fd_u, max_relative = 1e-7);
        }
    }

    #[test]
    fn tabulated_off_grid() {
        let g = BaseGrid::new(1, 8).unwrap();
        let spec = PsiSpec::tabulated(&g, vec![1.0; 8]);
        let cfg = config(1, 1, 1.0);
        assert!(matches!(
            psi_eval(&spec, &euclid(), &cfg, 2.0, &[0.1]),
            Err(OperatorError::OffGrid { .. })
        ));
        assert_eq!(psi_eval(&spec, &euclid(), &cfg, 2.0, &[g.spacing()]).unwrap().value, 1.0);
    }

    #[test]
    fn constant_mid_is_a_zero_for_all_t() {
        let g = BaseGrid::new(2, 16).unwrap();
        let f = RadialGraphField::constant(g, 2.0, (1.0, 3.0));
        for t in [0.0, 0.3, 1.0] {
            let res = residual(&f, &config(2, 2, t), &PsiSpec::RadialBeta { slope: 1.0 }, &euclid()).unwrap();
            assert!(res.max_norm() <= 1e-14, "{}", res.max_norm());
            assert!(res.min_ellipticity > 0.0);
        }
    }

    fn random_field(rng: &mut impl Rng, g: BaseGrid) -> RadialGraphField {
        let (a, b, c) = (rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), rng.gen_range(0.0..6.28));
        RadialGraphField::from_fn(g, (1.0, 3.0), |u| {
            let y = u.get(1).copied().unwrap_or(0.0);
            2.0 + a * (u[0] + c).sin() * y.cos() + b * (2.0 * y).sin()
        })
    }

    #[test]
    fn jacobian_matches_dense_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for (n, k, kind) in [(2, 2, WarpKind::Euclidean), (2, 1, WarpKind::Hyperbolic), (3, 2, WarpKind::Euclidean)] {
            let g = BaseGrid::new(n, 8).unwrap();
            let p = WarpProfile::new(kind, (1.0, 3.0)).unwrap();
            let f = random_field(&mut rng, g);
            let cfg = config(n, k, 0.4);
            let spec = PsiSpec::Angular { slope: 1.0, amplitude: 0.1 };
            let ja = jacobian(&f, &cfg, &spec, &p).unwrap().to_dense();
            let jf = jacobian_fd(&f, &cfg, &spec, &p, 1e-6).unwrap().to_dense();
            let err = (&ja - &jf).amax() / ja.amax();
            assert!(err < 1e-6, "n={n} k={k}: {err}");
        }
    }

    #[test]
    fn jacobian_sparsity_and_translation_invariance() {
        let g = BaseGrid::new(2, 8).unwrap();
        let f = RadialGraphField::constant(g, 2.0, (1.0, 3.0));
        let j = jacobian(&f, &config(2, 2, 0.0), &PsiSpec::RadialBeta { slope: 1.0 }, &euclid()).unwrap();
        let reference: Vec<f64> = j.row(0).iter().map(|e| e.2).collect();
        for node in 0..g.len() {
            let row = j.row(node);
            assert!(row.len() <= 10);
            let mut vals: Vec<f64> = row.iter().map(|e| e.2).collect();
            let mut refv = reference.clone();
            vals.sort_by(f64::total_cmp);
            refv.sort_by(f64::total_cmp);
            assert_eq!(vals, refv);
        }
    }

    #[test]
    fn inadmissible_field_reports_worst_node() {
        let g = BaseGrid::new(2, 16).unwrap();
        let f = RadialGraphField::from_fn(g, (1.0, 3.0), |u| 2.0 + 1.5 * (4.0 * u[0]).sin());
        match residual(&f, &config(2, 2, 0.0), &PsiSpec::RadialBeta { slope: 1.0 }, &euclid()) {
            Err(OperatorError::Inadmissible { margin, .. }) => assert!(margin <= 0.0),
            Err(OperatorError::Geometry(GeometryError::Domain { .. })) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn residual_is_shift_equivariant() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let g = BaseGrid::new(2, 16).unwrap();
        let f = random_field(&mut rng, g);
        let spec = PsiSpec::RadialBeta { slope: 1.0 };
        let cfg = config(2, 2, 0.5);
        let a = residual(&f, &cfg, &spec, &euclid()).unwrap().values;
        let b = residual(&f.translated([3, 5, 0]), &cfg, &spec, &euclid()).unwrap().values;
        for node in 0..g.len() {
            let src = g.shift(g.shift(node, 0, -3), 1, -5);
            assert_eq!(b[node], a[src]);
        }
    }

    #[test]
    fn audit_euclidean_radial_beta() {
        let g = BaseGrid::new(2, 8).unwrap();
        let cfg = config(2, 2, 1.0);
        let rep = assumption_audit(&PsiSpec::RadialBeta { slope: 1.0 }, &euclid(), &cfg, &g, 50).unwrap();
        assert!(rep.all_hold());
        // λ^kψ = β(r) for λ = r, so the slack is s_β β at the largest sampled r
        let r = rep.monotonicity.at_r;
        assert_relative_eq!(rep.monotonicity.worst_slack, (2.0 - r as f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn audit_angular_boundary_slack() {
        let g = BaseGrid::new(2, 8).unwrap();
        let cfg = config(2, 2, 1.0);
        let eps = 0.05;
        let rep = assumption_audit(&PsiSpec::Angular { slope: 1.0, amplitude: eps }, &euclid(), &cfg, &g, 50).unwrap();
        assert!(rep.all_hold());
        // ψ − ζ² at r₁ = 1: ζ = 1, β = e, worst a(u) = −1
        assert_relative_eq!(rep.lower_barrier.worst_slack, 1f64.exp() * (1.0 - eps) - 1.0, max_relative = 1e-12);
        assert_relative_eq!(rep.upper_barrier.worst_slack, (1.0 - (-1f64).exp() * (1.0 + eps)) / 9.0, max_relative = 1e-12);
        let bad = assumption_audit(&PsiSpec::Angular { slope: 0.01, amplitude: 0.5 }, &euclid(), &cfg, &g, 50).unwrap();
        assert!(!bad.lower_barrier.holds && !bad.upper_barrier.holds);
    }

    #[test]
    fn audit_spherical_cap() {
        let p = WarpProfile::new(WarpKind::SphericalCap, (0.3, 1.2)).unwrap();
        let g = BaseGrid::new(2, 8).unwrap();
        let cfg = HomotopyConfig {
            annulus: (0.3, 1.2),
            ..config(2, 2, 1.0)
        };
        let rep = assumption_audit(&PsiSpec::RadialBeta { slope: 1.0 }, &p, &cfg, &g, 50).unwrap();
        assert!(rep.monotonicity.holds && rep.monotonicity.worst_slack > 0.0);
    }
}
