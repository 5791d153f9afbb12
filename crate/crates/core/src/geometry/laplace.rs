use rayon::prelude::*;

use super::grid::BaseGrid;
use super::jet::HypersurfaceJet;

/// `Δf = (1/√det g) ∂_i(√det g · g^{ij} ∂_j f)` on the graph metric.
///
/// Diagonal fluxes use face averages of `A = √det g · g⁻¹`; mixed terms are
/// centered differences of `A^{ij} ∂_j f`. Both are second order and vanish
/// identically on constant `f`.
pub fn laplace_beltrami(grid: &BaseGrid, f: &[f64], jets: &[HypersurfaceJet]) -> Vec<f64> {
    assert_eq!(f.len(), grid.len());
    assert_eq!(jets.len(), grid.len());
    let n = grid.dim();
    let h = grid.spacing();
    let coef = |node: usize, i: usize, j: usize| jets[node].sqrt_det_g * jets[node].g_inv[(i, j)];

    (0..grid.len())
        .into_par_iter()
        .map(|node| {
            let mut acc = 0.0;
            for i in 0..n {
                let ip = grid.shift(node, i, 1);
                let im = grid.shift(node, i, -1);
                let a0 = coef(node, i, i);
                let a_plus = 0.5 * (a0 + coef(ip, i, i));
                let a_minus = 0.5 * (a0 + coef(im, i, i));
                acc += (a_plus * (f[ip] - f[node]) - a_minus * (f[node] - f[im])) / (h * h);
                for j in (0..n).filter(|&j| j != i) {
                    let dj = |c: usize| (f[grid.shift(c, j, 1)] - f[grid.shift(c, j, -1)]) / (2.0 * h);
                    acc += (coef(ip, i, j) * dj(ip) - coef(im, i, j) * dj(im)) / (2.0 * h);
                }
            }
            acc / jets[node].sqrt_det_g
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{jet_sweep, trace_identity_rhs, RadialGraphField, WarpKind, WarpProfile};

    #[test]
    fn constant_function_gives_zero() {
        let p = WarpProfile::new(WarpKind::Euclidean, (1.0, 3.0)).unwrap();
        let g = BaseGrid::new(2, 16).unwrap();
        let field = RadialGraphField::from_fn(g, (1.0, 3.0), |u| 2.0 + 0.2 * u[0].sin() * u[1].cos());
        let jets = jet_sweep(&p, &field).unwrap();
        let lap = laplace_beltrami(&g, &vec![3.5; g.len()], &jets);
        assert!(lap.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn scaled_flat_metric() {
        let p = WarpProfile::new(WarpKind::Euclidean, (1.0, 3.0)).unwrap();
        let g = BaseGrid::new(2, 64).unwrap();
        let c = 2.0;
        let field = RadialGraphField::constant(g, c, (1.0, 3.0));
        let jets = jet_sweep(&p, &field).unwrap();
        let f = g.sample(|u| u[0].sin());
        let lap = laplace_beltrami(&g, &f, &jets);
        let h2 = g.spacing().powi(2);
        for (node, x) in lap.iter().enumerate() {
            let u = g.position(node);
            assert!((x + u[0].sin() / (c * c)).abs() <= h2 / (12.0 * c * c) + 1e-14);
        }
    }

    fn identity_error(points: usize) -> f64 {
        let p = WarpProfile::new(WarpKind::Hyperbolic, (0.5, 2.5)).unwrap();
        let g = BaseGrid::new(2, points).unwrap();
        let field = RadialGraphField::from_fn(g, (0.5, 2.5), |u| 1.5 + 0.2 * u[0].sin() * u[1].sin() + 0.1 * u[1].cos());
        let jets = jet_sweep(&p, &field).unwrap();
        let big: Vec<f64> = field.values.iter().map(|&r| p.big_lambda(r).unwrap()).collect();
        let lap = laplace_beltrami(&g, &big, &jets);
        lap.iter()
            .zip(&jets)
            .map(|(l, j)| (l - trace_identity_rhs(j)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn trace_identity_second_order() {
        let (e1, e2) = (identity_error(32), identity_error(64));
        let order = (e1 / e2).log2();
        assert!((1.8..2.2).contains(&order), "{e1} {e2} {order}");
    }
}
