//! Damped Newton corrector and order-0 path following in `t`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curvature_operator::{jacobian, residual, HomotopyConfig, OperatorError, PsiSpec, ResidualReport};
use crate::geometry::{BaseGrid, GeometryError, RadialGraphField, WarpProfile};
use crate::linsolve::{self, LinearSolveError};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("admissibility lost: {0}")]
    AdmissibilityLost(String),
    #[error("barrier violated: field leaves ({r1}, {r2}), range [{min}, {max}]")]
    BarrierViolated { r1: f64, r2: f64, min: f64, max: f64 },
    #[error("Newton did not converge in {iters} iterations (residual {residual:e})")]
    MaxIters { iters: usize, residual: f64 },
    #[error("no step length decreases the residual (iteration {iters}, residual {residual:e})")]
    NoDescent { iters: usize, residual: f64 },
    #[error("singular linear system: {0}")]
    SingularLinearSystem(#[from] LinearSolveError),
    #[error("continuation step fell below {dt_min:e} at t = {last_t}: {cause}")]
    StepBelowMinimum { last_t: f64, dt_min: f64, cause: String },
    #[error("initial constant slice is not a zero of the t = 0 problem (residual {0:e})")]
    InitialResidual(f64),
    #[error(transparent)]
    Operator(OperatorError),
}

impl From<OperatorError> for SolverError {
    fn from(e: OperatorError) -> Self {
        match e {
            OperatorError::Inadmissible { .. } | OperatorError::Geometry(GeometryError::Domain { .. }) => {
                SolverError::AdmissibilityLost(e.to_string())
            }
            other => SolverError::Operator(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonOptions {
    /// Max-norm residual target.
    pub tol: f64,
    pub max_iters: usize,
    /// Initial step length of each line search.
    pub damping: f64,
    /// Smallest step length tried before giving up.
    pub min_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 30,
            damping: 1.0,
            min_step: 1.0 / 1024.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub field: RadialGraphField,
    pub iters: usize,
    pub report: ResidualReport,
}

fn barrier_error(field: &RadialGraphField) -> SolverError {
    SolverError::BarrierViolated {
        r1: field.annulus.0,
        r2: field.annulus.1,
        min: field.min(),
        max: field.max(),
    }
}

enum Rejection {
    Barrier,
    Admissibility(String),
    Increase,
}

/// Damped Newton on `F_t[r] = 0`. Each step solves `J w = −F` and halves the
/// step until the field stays inside the barrier and `Γ_k` and the max-norm
/// residual decreases.
pub fn newton_solve(
    field0: &RadialGraphField,
    config: &HomotopyConfig,
    spec: &PsiSpec,
    profile: &WarpProfile,
    opts: &NewtonOptions,
) -> Result<NewtonOutcome, SolverError> {
    if !field0.inside_barrier() {
        return Err(barrier_error(field0));
    }
    let mut field = field0.clone();
    let mut report = residual(&field, config, spec, profile)?;
    let mut norm = report.max_norm();
    let mut iters = 0;
    while norm > opts.tol {
        if iters == opts.max_iters {
            return Err(SolverError::MaxIters { iters, residual: norm });
        }
        iters += 1;
        let jac = jacobian(&field, config, spec, profile)?;
        let rhs: Vec<f64> = report.values.iter().map(|x| -x).collect();
        let w = linsolve::solve(&jac, &rhs)?;

        let mut alpha = opts.damping;
        let mut last = Rejection::Increase;
        let accepted = loop {
            if alpha < opts.min_step {
                break None;
            }
            let mut trial = field.clone();
            for (r, d) in trial.values.iter_mut().zip(&w) {
                *r += alpha * d;
            }
            if !trial.inside_barrier() {
                last = Rejection::Barrier;
            } else {
                match residual(&trial, config, spec, profile) {
                    Ok(rep) if rep.max_norm() < norm => break Some((trial, rep)),
                    Ok(_) => last = Rejection::Increase,
                    Err(e @ (OperatorError::Inadmissible { .. } | OperatorError::Geometry(GeometryError::Domain { .. }))) => {
                        last = Rejection::Admissibility(e.to_string())
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            alpha *= 0.5;
        };
        match accepted {
            Some((trial, rep)) => {
                field = trial;
                norm = rep.max_norm();
                report = rep;
            }
            None => {
                let mut overshoot = field.clone();
                for (r, d) in overshoot.values.iter_mut().zip(&w) {
                    *r += opts.min_step * d;
                }
                return Err(match last {
                    Rejection::Barrier => barrier_error(&overshoot),
                    Rejection::Admissibility(msg) => SolverError::AdmissibilityLost(msg),
                    Rejection::Increase => SolverError::NoDescent { iters, residual: norm },
                });
            }
        }
        log::debug!("newton t={} iter={iters} residual={norm:e}", config.t);
    }
    Ok(NewtonOutcome { field, iters, report })
}

/// The constant slice `r ≡ r_mid`, which solves the `t = 0` problem since
/// `φ(r_mid) = 1`.
pub fn initial_solution(
    config: &HomotopyConfig,
    profile: &WarpProfile,
    grid: BaseGrid,
) -> Result<RadialGraphField, SolverError> {
    let field = RadialGraphField::constant(grid, config.r_mid(), config.annulus);
    // ψ is not consulted at t = 0
    let rep = residual(&field, &config.with_t(0.0), &PsiSpec::RadialBeta { slope: 1.0 }, profile)?;
    if rep.max_norm() > 1e-12 {
        return Err(SolverError::InitialResidual(rep.max_norm()));
    }
    Ok(field)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuationOptions {
    pub dt0: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Growth factor after a fast Newton solve.
    pub grow: f64,
    /// A solve in at most this many iterations counts as fast.
    pub fast_iters: usize,
    pub newton: NewtonOptions,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            dt0: 0.1,
            dt_min: 1e-4,
            dt_max: 0.25,
            grow: 1.5,
            fast_iters: 5,
            newton: NewtonOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub t: f64,
    pub residual_norm: f64,
    pub min_cone_margin: f64,
    pub min_tau: f64,
    pub max_kappa: f64,
    pub newton_iters: usize,
    pub dt: f64,
}

impl TraceEntry {
    fn new(t: f64, rep: &ResidualReport, iters: usize, dt: f64) -> Self {
        Self {
            t,
            residual_norm: rep.max_norm(),
            min_cone_margin: rep.min_cone_margin,
            min_tau: rep.min_tau,
            max_kappa: rep.max_kappa,
            newton_iters: iters,
            dt,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ContinuationState {
    pub t: f64,
    pub field: RadialGraphField,
    pub dt: f64,
    pub newton_iters_last: usize,
    pub trace: Vec<TraceEntry>,
}

/// Follows the homotopy from the constant slice at `t = 0` to `t = 1`,
/// reusing each accepted solution as the next initial guess.
pub fn continuation_run(
    config: &HomotopyConfig,
    spec: &PsiSpec,
    profile: &WarpProfile,
    grid: BaseGrid,
    opts: &ContinuationOptions,
) -> Result<ContinuationState, SolverError> {
    let field = initial_solution(config, profile, grid)?;
    let rep0 = residual(&field, &config.with_t(0.0), spec, profile)?;
    let mut state = ContinuationState {
        t: 0.0,
        field,
        dt: opts.dt0,
        newton_iters_last: 0,
        trace: vec![TraceEntry::new(0.0, &rep0, 0, 0.0)],
    };
    while state.t < 1.0 {
        let dt = state.dt.min(1.0 - state.t);
        let t_next = if state.t + dt >= 1.0 - 1e-15 { 1.0 } else { state.t + dt };
        match newton_solve(&state.field, &config.with_t(t_next), spec, profile, &opts.newton) {
            Ok(out) => {
                state.trace.push(TraceEntry::new(t_next, &out.report, out.iters, dt));
                state.t = t_next;
                state.field = out.field;
                state.newton_iters_last = out.iters;
                if out.iters <= opts.fast_iters {
                    state.dt = (state.dt * opts.grow).min(opts.dt_max);
                }
                log::info!("t = {t_next:.6} accepted after {} Newton iterations", out.iters);
            }
            Err(SolverError::SingularLinearSystem(e)) => return Err(SolverError::SingularLinearSystem(e)),
            Err(e @ SolverError::Operator(_)) => return Err(e),
            Err(e) => {
                state.dt *= 0.5;
                log::info!("t = {t_next:.6} rejected ({e}); dt -> {:e}", state.dt);
                if state.dt < opts.dt_min {
                    return Err(SolverError::StepBelowMinimum {
                        last_t: state.t,
                        dt_min: opts.dt_min,
                        cause: e.to_string(),
                    });
                }
            }
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WarpKind;

    fn setup(n: usize, k: usize) -> (HomotopyConfig, WarpProfile) {
        (
            HomotopyConfig {
                t: 0.0,
                phi_slope: 1.0,
                annulus: (1.0, 3.0),
                n,
                k,
            },
            WarpProfile::new(WarpKind::Euclidean, (1.0, 3.0)).unwrap(),
        )
    }

    #[test]
    fn radial_beta_path_stays_constant() {
        let (cfg, p) = setup(2, 2);
        let g = BaseGrid::new(2, 16).unwrap();
        let st = continuation_run(&cfg, &PsiSpec::RadialBeta { slope: 1.0 }, &p, g, &ContinuationOptions::default()).unwrap();
        assert_eq!(st.t, 1.0);
        assert!(st.field.values.iter().all(|&r| (r - 2.0).abs() < 1e-12));
        let ts: Vec<f64> = st.trace.iter().map(|e| e.t).collect();
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
        assert!(st.trace.iter().all(|e| e.dt <= 0.25));
    }

    #[test]
    fn t0_newton_returns_to_constant() {
        let (cfg, p) = setup(2, 2);
        let g = BaseGrid::new(2, 32).unwrap();
        let start = RadialGraphField::from_fn(g, (1.0, 3.0), |u| 2.0 + 0.1 * u[0].sin());
        let out = newton_solve(&start, &cfg, &PsiSpec::RadialBeta { slope: 1.0 }, &p, &NewtonOptions::default()).unwrap();
        assert!(out.iters <= 8);
        assert!(out.field.values.iter().all(|&r| (r - 2.0).abs() < 1e-9));
    }

    #[test]
    fn wild_start_is_rejected() {
        let (cfg, p) = setup(2, 2);
        let g = BaseGrid::new(2, 16).unwrap();
        let start = RadialGraphField::from_fn(g, (0.0, 10.0), |u| 5.0 + 4.0 * (3.0 * u[0]).sin() * (3.0 * u[1]).cos());
        let err = newton_solve(&start, &cfg, &PsiSpec::RadialBeta { slope: 1.0 }, &p, &NewtonOptions::default());
        assert!(matches!(err, Err(SolverError::AdmissibilityLost(_))), "{err:?}");
    }

    #[test]
    fn barrier_checked_before_solving() {
        let (cfg, p) = setup(1, 1);
        let g = BaseGrid::new(1, 16).unwrap();
        let start = RadialGraphField::constant(g, 3.5, (1.0, 3.0));
        let err = newton_solve(&start, &cfg, &PsiSpec::RadialBeta { slope: 1.0 }, &p, &NewtonOptions::default());
        assert!(matches!(err, Err(SolverError::BarrierViolated { .. })));
    }
}
