//! Entry points behind the command-line subcommands. Each returns an exit
//! code from the stable contract and writes its artifacts under `out`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::continuation_solver::{continuation_run, newton_solve, SolverError};
use crate::curvature_operator::{
    assumption_audit, residual, sigma_continuum, sigma_field, AssumptionReport, OperatorError, PsiSpec,
};
use crate::estimate_auditor::{audit_solution, ingest_field, lambda_identity_error, AuditError, AuditReport};
use crate::geometry::{dump_field_to_path, jet_sweep, GeometryError, RadialGraphField};
use crate::inequality_lab::{conjecture_search, epsilon_delta_search, start_seed, EpsDelta, FormReport, LabError};
use crate::symfunc::{lemma_suite, sample_cone, SampleConstraints};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_PATH: i32 = 4;
pub const EXIT_LINALG: i32 = 5;

/// The `ε` values probed by `lemmas`.
pub const EPSILONS: [f64; 4] = [0.01, 0.1, 0.5, 0.9];

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("cannot write artifacts: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot serialize report: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<OperatorError> for CommandError {
    fn from(e: OperatorError) -> Self {
        match e {
            OperatorError::Inadmissible { .. } => CommandError::Solver(SolverError::from(e)),
            other => CommandError::Input(other.to_string()),
        }
    }
}

impl From<GeometryError> for CommandError {
    fn from(e: GeometryError) -> Self {
        CommandError::Input(e.to_string())
    }
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Solver(SolverError::SingularLinearSystem(_)) => EXIT_LINALG,
            CommandError::Solver(SolverError::Operator(_)) => EXIT_INPUT,
            CommandError::Solver(_) => EXIT_PATH,
            _ => EXIT_INPUT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub summary: String,
}

impl Outcome {
    fn new(pass: bool, summary: String) -> Self {
        Self {
            exit_code: if pass { EXIT_OK } else { EXIT_VIOLATION },
            summary,
        }
    }
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    config: &'a RunConfig,
    #[serde(flatten)]
    body: T,
}

fn write_report<T: Serialize>(out: &Path, name: &str, config: &RunConfig, body: T) -> Result<(), CommandError> {
    fs::create_dir_all(out)?;
    let text = serde_json::to_string_pretty(&Report { config, body })?;
    fs::write(out.join(name), text)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub assumptions: AssumptionReport,
    pub t_final: f64,
    pub accepted_steps: usize,
    pub audit: AuditReport,
    pub passed: bool,
}

/// Continuation from the constant slice to `t = 1`; writes `solution.csv`,
/// `trace.json` and `audit.json`.
pub fn cmd_solve(config: &RunConfig, out: &Path) -> Result<(Outcome, SolveReport), CommandError> {
    config.validate_geometry()?;
    let grid = config.grid()?;
    let profile = config.profile()?;
    let hom = config.homotopy(1.0);
    let assumptions = assumption_audit(&config.psi, &profile, &hom, &grid, 200)?;
    if !assumptions.all_hold() {
        return Err(CommandError::Input(format!(
            "structural assumptions fail for ψ: {}",
            assumptions.failing().join("; ")
        )));
    }
    let state = continuation_run(&hom, &config.psi, &profile, grid, &config.continuation)?;
    let audit = audit_solution(&state.field, &hom, &config.psi, &profile).map_err(audit_failure)?;

    fs::create_dir_all(out)?;
    let jets = jet_sweep(&profile, &state.field)?;
    dump_field_to_path(&out.join("solution.csv"), &state.field, &jets, config.k)?;
    fs::write(out.join("trace.json"), serde_json::to_string_pretty(&state.trace)?)?;
    let passed = audit.passes() && audit.residual_max <= config.continuation.newton.tol;
    let report = SolveReport {
        assumptions,
        t_final: state.t,
        accepted_steps: state.trace.len() - 1,
        audit,
        passed,
    };
    write_report(out, "audit.json", config, &report)?;
    let summary = format!(
        "reached t = {} in {} steps; r in [{:.6}, {:.6}], min tau {:.6e}, residual {:.3e}",
        state.t, report.accepted_steps, report.audit.r_min, report.audit.r_max, report.audit.tau_min, report.audit.residual_max
    );
    Ok((Outcome::new(passed, summary), report))
}

fn audit_failure(e: AuditError) -> CommandError {
    match e {
        AuditError::Operator(op) => op.into(),
        AuditError::Geometry(g) => g.into(),
        other => CommandError::Input(other.to_string()),
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AuditOutcome {
    Audited(AuditReport),
    Inadmissible { error: String },
}

/// Audits the field dump named by `audit_field` against the `t = 1` problem.
pub fn cmd_audit(config: &RunConfig, out: &Path) -> Result<(Outcome, AuditOutcome), CommandError> {
    config.validate_geometry()?;
    let path = config
        .audit_field
        .as_ref()
        .ok_or_else(|| CommandError::Input("config has no `audit_field` to audit".into()))?;
    let grid = config.grid()?;
    let profile = config.profile()?;
    let field = ingest_field(path, grid, config.annulus).map_err(|e| CommandError::Input(e.to_string()))?;
    let result = match audit_solution(&field, &config.homotopy(1.0), &config.psi, &profile) {
        Ok(rep) => AuditOutcome::Audited(rep),
        Err(AuditError::Operator(e @ OperatorError::Inadmissible { .. }))
        | Err(AuditError::Operator(e @ OperatorError::Geometry(GeometryError::Domain { .. }))) => {
            AuditOutcome::Inadmissible { error: e.to_string() }
        }
        Err(e) => return Err(audit_failure(e)),
    };
    write_report(out, "audit.json", config, &result)?;
    let outcome = match &result {
        AuditOutcome::Audited(rep) => Outcome::new(
            rep.passes(),
            format!(
                "c0_ok = {}, min tau {:.6e}, max |kappa| {:.6e}, cone margin {:.6e}",
                rep.c0_ok, rep.tau_min, rep.kappa_max, rep.cone_margin_min
            ),
        ),
        AuditOutcome::Inadmissible { error } => Outcome::new(false, error.clone()),
    };
    Ok((outcome, result))
}

/// `(r, ∇r, Hess r)` of `r* = base + A Π sin u_i`.
pub fn manufactured_jet(base: f64, amplitude: f64, u: &[f64]) -> (f64, [f64; 3], [[f64; 3]; 3]) {
    let n = u.len();
    let (s, c): (Vec<f64>, Vec<f64>) = u.iter().map(|x| x.sin_cos()).unzip();
    let prod_except = |skip: &[usize]| -> f64 { (0..n).filter(|i| !skip.contains(i)).map(|i| s[i]).product() };
    let mut grad = [0.0; 3];
    let mut hess = [[0.0; 3]; 3];
    let full = prod_except(&[]);
    for a in 0..n {
        grad[a] = amplitude * c[a] * prod_except(&[a]);
        hess[a][a] = -amplitude * full;
        for b in (a + 1)..n {
            let v = amplitude * c[a] * c[b] * prod_except(&[a, b]);
            hess[a][b] = v;
            hess[b][a] = v;
        }
    }
    (base + amplitude * full, grad, hess)
}

#[derive(Debug, Clone, Serialize)]
pub struct MmsReport {
    pub points: usize,
    /// `ψ` from exact derivatives of `r*` instead of the discrete operator.
    pub continuum: bool,
    pub max_error: f64,
    pub newton_iters: usize,
    pub initial_residual: f64,
    pub final_residual: f64,
    /// Trace identity error of `r*` sampled on the grid.
    pub lambda_identity_error: f64,
}

/// Manufactured-solution solve at `t = 1` on `points` per dimension.
pub fn manufactured_solve(config: &RunConfig, points: usize, continuum: bool) -> Result<MmsReport, CommandError> {
    let grid = config.grid_with(points)?;
    let profile = config.profile()?;
    let m = config.mms;
    let (r1, r2) = config.annulus;
    if !(r1 < m.base - m.amplitude.abs() && m.base + m.amplitude.abs() < r2) {
        return Err(CommandError::Input(format!(
            "manufactured field base ± amplitude must lie inside ({r1}, {r2})"
        )));
    }
    let star = RadialGraphField::from_fn(grid, config.annulus, |u| manufactured_jet(m.base, m.amplitude, u).0);
    let psi_values = if continuum {
        sigma_continuum(&grid, config.k, &profile, |u| manufactured_jet(m.base, m.amplitude, u))?
    } else {
        sigma_field(&star, config.k, &profile)?
    };
    let spec = PsiSpec::tabulated(&grid, psi_values);
    let hom = config.homotopy(1.0);
    let start = RadialGraphField::new(
        grid,
        star.values.iter().map(|&r| r + m.perturbation * (m.base - r)).collect(),
        config.annulus,
    )?;
    let initial_residual = residual(&start, &hom, &spec, &profile)?.max_norm();
    let out = newton_solve(&start, &hom, &spec, &profile, &config.continuation.newton)?;
    let max_error = out
        .field
        .values
        .iter()
        .zip(&star.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(MmsReport {
        points,
        continuum,
        max_error,
        newton_iters: out.iters,
        initial_residual,
        final_residual: out.report.max_norm(),
        lambda_identity_error: lambda_identity_error(&star, &profile)?,
    })
}

/// Recovers the manufactured solution on the configured grid; `ψ` is the
/// discrete `σ_k` of `r*`, so the exact answer is `r*` itself.
pub fn cmd_mms(config: &RunConfig, out: &Path) -> Result<(Outcome, MmsReport), CommandError> {
    config.validate_geometry()?;
    let report = manufactured_solve(config, config.grid_points, false)?;
    write_report(out, "mms.json", config, &report)?;
    let pass = report.max_error <= config.mms.tolerance;
    let summary = format!(
        "N = {}: max |r - r*| = {:.3e} after {} Newton iterations",
        report.points, report.max_error, report.newton_iters
    );
    Ok((Outcome::new(pass, summary), report))
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub points: usize,
    pub max_error: f64,
    pub observed_order: f64,
    pub lambda_identity_error: f64,
    pub lambda_order: f64,
    pub newton_iters: usize,
}

fn observed_order(prev: Option<(usize, f64)>, points: usize, err: f64) -> f64 {
    match prev {
        Some((p, e)) if p != points => (e / err).ln() / (points as f64 / p as f64).ln(),
        Some(_) => {
            log::warn!("grid size {points} repeated; observed order undefined");
            f64::NAN
        }
        None => f64::NAN,
    }
}

/// Continuum-manufactured errors and trace identity errors per grid size,
/// with orders from successive pairs.
pub fn run_sweep(config: &RunConfig) -> Result<Vec<SweepRow>, CommandError> {
    config.validate_geometry()?;
    if config.sweep.points.len() < 3 {
        return Err(CommandError::Input("sweep needs at least three grid sizes".into()));
    }
    let mut rows: Vec<SweepRow> = Vec::new();
    for &points in &config.sweep.points {
        let rep = manufactured_solve(config, points, true)?;
        let prev = rows.last();
        rows.push(SweepRow {
            points,
            max_error: rep.max_error,
            observed_order: observed_order(prev.map(|r| (r.points, r.max_error)), points, rep.max_error),
            lambda_identity_error: rep.lambda_identity_error,
            lambda_order: observed_order(
                prev.map(|r| (r.points, r.lambda_identity_error)),
                points,
                rep.lambda_identity_error,
            ),
            newton_iters: rep.newton_iters,
        });
    }
    Ok(rows)
}

/// Writes `sweep.csv` (plot-ready) and `sweep.json`.
pub fn cmd_sweep(config: &RunConfig, out: &Path) -> Result<(Outcome, Vec<SweepRow>), CommandError> {
    let rows = run_sweep(config)?;
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("sweep.csv")).map_err(|e| CommandError::Input(e.to_string()))?;
    let csv_err = |e: csv::Error| CommandError::Input(e.to_string());
    w.write_record(["N", "max_error", "observed_order", "lambda_identity_error", "lambda_order"])
        .map_err(csv_err)?;
    for r in &rows {
        w.write_record([
            r.points.to_string(),
            r.max_error.to_string(),
            r.observed_order.to_string(),
            r.lambda_identity_error.to_string(),
            r.lambda_order.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    write_report(out, "sweep.json", config, serde_json::json!({ "rows": &rows }))?;
    let summary = rows
        .iter()
        .map(|r| format!("N={} err={:.3e} order={:.3}", r.points, r.max_error, r.observed_order))
        .collect::<Vec<_>>()
        .join(", ");
    Ok((Outcome::new(true, summary), rows))
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CheckStats {
    pub violations: usize,
    pub worst_slack: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaSummary {
    pub n: usize,
    pub k: usize,
    pub samples: usize,
    pub sampling_failures: usize,
    pub checks: BTreeMap<String, CheckStats>,
    pub ratio_c_min: f64,
    pub ratio_c_max: f64,
    pub epsilon_delta: Vec<EpsDelta>,
}

impl LemmaSummary {
    pub fn violations(&self) -> usize {
        self.checks.values().map(|c| c.violations).sum::<usize>()
            + self.sampling_failures
            + self
                .epsilon_delta
                .iter()
                .filter(|e| !(e.delta < 4.0 * e.epsilon && e.min_f > 0.0))
                .count()
    }
}

/// Lemma suite on `samples` cone draws plus the `ε`–`δ` search.
pub fn run_lemmas(n: usize, k: usize, samples: usize, seed: u64) -> Result<LemmaSummary, CommandError> {
    if !(1 <= k && k <= n && n <= crate::symfunc::MAX_DIM) {
        return Err(CommandError::Input(format!("need 1 <= k <= n <= 8, got n={n}, k={k}")));
    }
    let constraints = SampleConstraints::default();
    let results: Vec<Option<(Vec<crate::symfunc::Check>, f64)>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(start_seed(seed, i));
            let kappa = sample_cone(k, n, &mut rng, &constraints).ok()?;
            let rep = lemma_suite(k, &kappa).ok()?;
            Some((rep.checks, rep.ratio_c))
        })
        .collect();
    let mut checks: BTreeMap<String, CheckStats> = BTreeMap::new();
    let mut failures = 0;
    let (mut cmin, mut cmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in results {
        let Some((list, ratio)) = r else {
            failures += 1;
            continue;
        };
        cmin = cmin.min(ratio);
        cmax = cmax.max(ratio);
        for c in list {
            let e = checks.entry(c.name.to_string()).or_insert(CheckStats {
                violations: 0,
                worst_slack: None,
            });
            if !c.holds {
                e.violations += 1;
            }
            if let Some(s) = c.slack {
                e.worst_slack = Some(e.worst_slack.map_or(s, |w: f64| w.min(s)));
            }
        }
    }
    let epsilon_delta = EPSILONS
        .iter()
        .map(|&e| epsilon_delta_search(e))
        .collect::<Result<Vec<_>, LabError>>()
        .map_err(|e| CommandError::Input(e.to_string()))?;
    Ok(LemmaSummary {
        n,
        k,
        samples,
        sampling_failures: failures,
        checks,
        ratio_c_min: cmin,
        ratio_c_max: cmax,
        epsilon_delta,
    })
}

pub fn cmd_lemmas(config: &RunConfig, out: &Path) -> Result<(Outcome, LemmaSummary), CommandError> {
    let summary = run_lemmas(config.n, config.k, config.lemmas.samples, config.seed)?;
    write_report(out, "lemmas.json", config, &summary)?;
    let v = summary.violations();
    Ok((
        Outcome::new(v == 0, format!("{} samples, {v} violations", summary.samples)),
        summary,
    ))
}

pub fn cmd_conjecture(config: &RunConfig, out: &Path) -> Result<(Outcome, FormReport), CommandError> {
    let inst = config.conjecture_instance();
    let report = conjecture_search(&inst, config.conjecture.budget, config.seed).map_err(|e| match e {
        LabError::Precondition(_) | LabError::Sym(_) => CommandError::Input(e.to_string()),
        other => CommandError::Input(other.to_string()),
    })?;
    write_report(out, "conjecture.json", config, &report)?;
    let summary = format!(
        "min eigenvalue {:.6e} over {} starts at kappa = {:?}",
        report.min_eigenvalue, report.samples_tested, report.worst_kappa
    );
    Ok((Outcome::new(report.nonnegative(), summary), report))
}

/// Solution file name used by `solve`.
pub fn solution_path(out: &Path) -> std::path::PathBuf {
    out.join("solution.csv")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manufactured_jet_derivatives() {
        let u = [0.3, 1.1, 2.0];
        let (r, g, h) = manufactured_jet(2.0, 0.3, &u);
        let s = 1e-6;
        for a in 0..3 {
            let mut up = u;
            up[a] += s;
            let mut um = u;
            um[a] -= s;
            let (rp, gp, _) = manufactured_jet(2.0, 0.3, &up);
            let (rm, gm, _) = manufactured_jet(2.0, 0.3, &um);
            assert!(((rp - rm) / (2.0 * s) - g[a]).abs() < 1e-9);
            for b in 0..3 {
                assert!(((gp[b] - gm[b]) / (2.0 * s) - h[a][b]).abs() < 1e-8);
            }
        }
        assert!((r - (2.0 + 0.3 * u.iter().map(|x| x.sin()).product::<f64>())).abs() < 1e-15);
    }

    #[test]
    fn repeated_grid_size_gives_nan_order() {
        assert!(observed_order(Some((32, 1e-3)), 32, 1e-3).is_nan());
        assert!((observed_order(Some((32, 4e-3)), 64, 1e-3) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CommandError::Input("x".into()).exit_code(), EXIT_INPUT);
        assert_eq!(
            CommandError::Solver(SolverError::MaxIters { iters: 1, residual: 1.0 }).exit_code(),
            EXIT_PATH
        );
        assert_eq!(
            CommandError::Solver(SolverError::SingularLinearSystem(crate::linsolve::LinearSolveError::NonFinite))
                .exit_code(),
            EXIT_LINALG
        );
    }
}
