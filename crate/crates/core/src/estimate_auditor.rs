//! A posteriori checks of barrier, support-function, curvature and trace
//! identity bounds on a computed or ingested field.

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::curvature_operator::{residual, HomotopyConfig, OperatorError, PsiSpec};
use crate::geometry::{
    jet_sweep, laplace_beltrami, parse_field_from_path, trace_identity_rhs, BaseGrid, GeometryError,
    RadialGraphField, WarpProfile,
};

#[derive(Debug, Error)]
pub enum AuditError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("audit produced a non-finite `{0}`")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridMeta {
    pub n: usize,
    pub points_per_dim: usize,
    pub spacing: f64,
    pub nodes: usize,
}

impl From<&BaseGrid> for GridMeta {
    fn from(g: &BaseGrid) -> Self {
        Self {
            n: g.dim(),
            points_per_dim: g.points(),
            spacing: g.spacing(),
            nodes: g.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    /// `r₁ < min r` and `max r < r₂`
    pub c0_ok: bool,
    pub r_min: f64,
    pub r_max: f64,
    /// `min r − r₁`
    pub lower_slack: f64,
    /// `r₂ − max r`
    pub upper_slack: f64,
    pub tau_min: f64,
    /// `max |κ_i|`
    pub kappa_max: f64,
    pub cone_margin_min: f64,
    pub ellipticity_min: f64,
    pub residual_max: f64,
    /// max-norm of `Δ_Σ Λ − (nλ' − τσ₁)`
    pub lambda_identity_error: f64,
    pub annulus: (f64, f64),
    pub grid: GridMeta,
}

impl AuditReport {
    /// All estimate checks hold: strict barrier, `τ > 0`, positive cone margin.
    pub fn passes(&self) -> bool {
        self.c0_ok && self.tau_min > 0.0 && self.cone_margin_min > 0.0 && self.kappa_max.is_finite()
    }
}

/// Max-norm of `Δ_Σ Λ(r) − (nλ' − τσ₁(κ))` over the grid.
pub fn lambda_identity_error(field: &RadialGraphField, profile: &WarpProfile) -> Result<f64, GeometryError> {
    let jets = jet_sweep(profile, field)?;
    let big: Vec<f64> = field
        .values
        .iter()
        .map(|&r| profile.big_lambda(r))
        .collect::<Result<_, _>>()?;
    let lap = laplace_beltrami(&field.grid, &big, &jets);
    Ok(lap
        .iter()
        .zip(&jets)
        .map(|(l, j)| (l - trace_identity_rhs(j)).abs())
        .fold(0.0, f64::max))
}

/// Recomputes the geometry of `field` from scratch and reports every bound
/// with its slack.
pub fn audit_solution(
    field: &RadialGraphField,
    config: &HomotopyConfig,
    spec: &PsiSpec,
    profile: &WarpProfile,
) -> Result<AuditReport, AuditError> {
    let res = residual(field, config, spec, profile)?;
    let lambda_identity_error = lambda_identity_error(field, profile)?;

    let (r1, r2) = config.annulus;
    let (r_min, r_max) = (field.min(), field.max());
    let report = AuditReport {
        c0_ok: r1 < r_min && r_max < r2,
        r_min,
        r_max,
        lower_slack: r_min - r1,
        upper_slack: r2 - r_max,
        tau_min: res.min_tau,
        kappa_max: res.max_kappa,
        cone_margin_min: res.min_cone_margin,
        ellipticity_min: res.min_ellipticity,
        residual_max: res.max_norm(),
        lambda_identity_error,
        annulus: config.annulus,
        grid: GridMeta::from(&field.grid),
    };
    let checks = [
        ("r_min", report.r_min),
        ("r_max", report.r_max),
        ("tau_min", report.tau_min),
        ("kappa_max", report.kappa_max),
        ("cone_margin_min", report.cone_margin_min),
        ("ellipticity_min", report.ellipticity_min),
        ("residual_max", report.residual_max),
        ("lambda_identity_error", report.lambda_identity_error),
    ];
    if let Some((name, _)) = checks.iter().find(|(_, v)| !v.is_finite()) {
        return Err(AuditError::NonFinite(name));
    }
    Ok(report)
}

/// Reads a field dump for `grid`; admissibility is left to the audit.
pub fn ingest_field(path: &Path, grid: BaseGrid, annulus: (f64, f64)) -> Result<RadialGraphField, AuditError> {
    Ok(parse_field_from_path(path, grid, annulus)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WarpKind;

    #[test]
    fn constant_solution_closed_forms() {
        let p = WarpProfile::new(WarpKind::Hyperbolic, (1.0, 3.0)).unwrap();
        let g = BaseGrid::new(2, 16).unwrap();
        let cfg = HomotopyConfig {
            t: 1.0,
            phi_slope: 1.0,
            annulus: (1.0, 3.0),
            n: 2,
            k: 2,
        };
        let f = RadialGraphField::constant(g, 2.0, (1.0, 3.0));
        let rep = audit_solution(&f, &cfg, &PsiSpec::RadialBeta { slope: 1.0 }, &p).unwrap();
        let w = p.eval(2.0).unwrap();
        assert!(rep.passes());
        assert_eq!(rep.tau_min, w.lambda);
        assert!((rep.kappa_max - w.zeta).abs() < 1e-15);
        assert_eq!(rep.lambda_identity_error, 0.0);
        assert_eq!(rep.lower_slack, 1.0);
    }

    #[test]
    fn barrier_violation_is_reported_not_raised() {
        let p = WarpProfile::new(WarpKind::Euclidean, (0.5, 4.0)).unwrap();
        let g = BaseGrid::new(1, 16).unwrap();
        let cfg = HomotopyConfig {
            t: 1.0,
            phi_slope: 1.0,
            annulus: (1.0, 3.0),
            n: 1,
            k: 1,
        };
        let f = RadialGraphField::constant(g, 3.2, (1.0, 3.0));
        let rep = audit_solution(&f, &cfg, &PsiSpec::RadialBeta { slope: 1.0 }, &p).unwrap();
        assert!(!rep.c0_ok && !rep.passes());
        assert!(rep.upper_slack < 0.0);
    }
}
