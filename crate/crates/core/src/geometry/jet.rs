use nalgebra::DMatrix;
use rayon::prelude::*;

use super::grid::{node_derivatives, NodeDerivatives, RadialGraphField};
use super::warp::WarpProfile;
use super::GeometryError;
use crate::symfunc::{symmetric_eigenvalues, CurvatureVector};

/// Geometry of the radial graph at one node. The unit normal points to
/// increasing `r`, so constant slices have `κ = ζ > 0` and `τ = λ²/v > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HypersurfaceJet {
    pub n: usize,
    pub r: f64,
    pub grad: [f64; 3],
    pub hess: [[f64; 3]; 3],
    pub lambda: f64,
    pub dlambda: f64,
    pub ddlambda: f64,
    pub v: f64,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub h: DMatrix<f64>,
    /// `G^{-1/2} H G^{-1/2}`, similar to `g⁻¹h`
    pub shape: DMatrix<f64>,
    pub kappa: CurvatureVector,
    pub tau: f64,
    pub nu_radial: f64,
    pub sqrt_det_g: f64,
}

impl HypersurfaceJet {
    pub fn grad_norm_sq(&self) -> f64 {
        self.grad[..self.n].iter().map(|x| x * x).sum()
    }

    /// `h^i_j = g^{ik} h_{kj}`, not symmetric in general.
    pub fn weingarten(&self) -> DMatrix<f64> {
        &self.g_inv * &self.h
    }
}

/// Builds the jet from `r` and its first two derivatives. `node` is only used
/// to label errors.
pub fn jet_from_derivatives(
    profile: &WarpProfile,
    n: usize,
    r: f64,
    d: &NodeDerivatives,
    node: usize,
) -> Result<HypersurfaceJet, GeometryError> {
    if !profile.contains(r) {
        let (lo, hi) = profile.domain();
        return Err(GeometryError::Domain { r, lo, hi });
    }
    let (l, dl, ddl) = profile.derivatives(r);
    let p = &d.grad[..n];
    let p2: f64 = p.iter().map(|x| x * x).sum();
    let v2 = l * l + p2;
    let v = v2.sqrt();
    let l2 = l * l;

    let g = DMatrix::from_fn(n, n, |i, j| p[i] * p[j] + if i == j { l2 } else { 0.0 });
    let g_inv = DMatrix::from_fn(n, n, |i, j| {
        ((if i == j { 1.0 } else { 0.0 }) - p[i] * p[j] / v2) / l2
    });
    let h = DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { l2 * dl } else { 0.0 };
        (-l * d.hess[i][j] + 2.0 * dl * p[i] * p[j] + diag) / v
    });

    // g has eigenvalue λ² on p⊥ and v² along p
    let g_isqrt = if p2 > 0.0 {
        let c = (1.0 / v - 1.0 / l) / p2;
        DMatrix::from_fn(n, n, |i, j| c * p[i] * p[j] + if i == j { 1.0 / l } else { 0.0 })
    } else {
        DMatrix::from_diagonal_element(n, n, 1.0 / l)
    };
    let mut shape = &g_isqrt * &h * &g_isqrt;
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (shape[(i, j)] + shape[(j, i)]);
            shape[(i, j)] = s;
            shape[(j, i)] = s;
        }
    }
    let kappa = CurvatureVector::new(symmetric_eigenvalues(&shape))
        .map_err(|_| GeometryError::NonFiniteJet { node })?;
    let nu_radial = l / v;

    Ok(HypersurfaceJet {
        n,
        r,
        grad: d.grad,
        hess: d.hess,
        lambda: l,
        dlambda: dl,
        ddlambda: ddl,
        v,
        g,
        g_inv,
        h,
        shape,
        kappa,
        tau: l * nu_radial,
        nu_radial,
        sqrt_det_g: l.powi(n as i32 - 1) * v,
    })
}

pub fn hypersurface_jet(
    profile: &WarpProfile,
    field: &RadialGraphField,
    node: usize,
) -> Result<HypersurfaceJet, GeometryError> {
    let d = node_derivatives(&field.grid, &field.values, node);
    jet_from_derivatives(profile, field.grid.dim(), field.values[node], &d, node)
}

/// Jets at every node, in node order.
pub fn jet_sweep(profile: &WarpProfile, field: &RadialGraphField) -> Result<Vec<HypersurfaceJet>, GeometryError> {
    (0..field.grid.len())
        .into_par_iter()
        .map(|node| hypersurface_jet(profile, field, node))
        .collect()
}

/// Eigenvalues of the symmetrized shape operator, sorted descending.
pub fn principal_curvatures(jet: &HypersurfaceJet) -> CurvatureVector {
    CurvatureVector::new(symmetric_eigenvalues(&jet.shape)).unwrap_or_else(|_| jet.kappa.clone())
}

/// `nλ' − τσ₁(κ)` in a form that cancels exactly when `∇r = 0` and
/// `Hess r = 0`: with `N = vh`,
/// `(1/v²)[(n−2)λ'|∇r|² + λΔr + ∇rᵀN∇r/v²]`.
pub fn trace_identity_rhs(jet: &HypersurfaceJet) -> f64 {
    let n = jet.n;
    let p = &jet.grad[..n];
    let (l, dl) = (jet.lambda, jet.dlambda);
    let p2 = jet.grad_norm_sq();
    let v2 = jet.v * jet.v;
    let lap: f64 = (0..n).map(|i| jet.hess[i][i]).sum();
    let mut pxp = 0.0;
    for i in 0..n {
        for j in 0..n {
            pxp += p[i] * jet.hess[i][j] * p[j];
        }
    }
    let pnp = -l * pxp + 2.0 * dl * p2 * p2 + l * l * dl * p2;
    ((n as f64 - 2.0) * dl * p2 + l * lap + pnp / v2) / v2
}
