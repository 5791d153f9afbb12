//! Numerical laboratory for prescribed Weingarten curvature `σ_k(κ) = ψ` of
//! star-shaped radial graphs in warped products `dr² + λ(r)² g'` over a flat
//! torus.

pub mod dd;
pub mod symfunc;
pub mod inequality_lab;
pub mod geometry;
pub mod curvature_operator;
pub mod linsolve;
pub mod continuation_solver;
pub mod estimate_auditor;
pub mod config;
pub mod commands;
