use std::f64::consts::TAU;

use serde::Serialize;

use super::GeometryError;

/// Uniform periodic grid on the flat torus `[0, 2π)ⁿ`. Node indices are
/// lexicographic with the first coordinate varying slowest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BaseGrid {
    dim: usize,
    points: usize,
}

impl BaseGrid {
    pub fn new(dim: usize, points: usize) -> Result<Self, GeometryError> {
        if !(1..=3).contains(&dim) {
            return Err(GeometryError::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if points < 8 || points % 2 != 0 {
            return Err(GeometryError::InvalidGrid(format!(
                "points per dimension must be even and >= 8, got {points}"
            )));
        }
        Ok(Self { dim, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        TAU / self.points as f64
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coords(&self, node: usize) -> [usize; 3] {
        let mut out = [0; 3];
        let mut rest = node;
        for axis in (0..self.dim).rev() {
            out[axis] = rest % self.points;
            rest /= self.points;
        }
        out
    }

    pub fn index(&self, coords: [usize; 3]) -> usize {
        (0..self.dim).fold(0, |acc, axis| acc * self.points + coords[axis])
    }

    /// Coordinates `u` of a node.
    pub fn position(&self, node: usize) -> [f64; 3] {
        let c = self.coords(node);
        let h = self.spacing();
        let mut u = [0.0; 3];
        for axis in 0..self.dim {
            u[axis] = c[axis] as f64 * h;
        }
        u
    }

    /// Periodic neighbour along `axis` at signed `offset`.
    #[inline]
    pub fn shift(&self, node: usize, axis: usize, offset: isize) -> usize {
        let mut c = self.coords(node);
        let n = self.points as isize;
        c[axis] = (c[axis] as isize + offset).rem_euclid(n) as usize;
        self.index(c)
    }

    /// Node at `u` if `u` lies on the grid (to `1e-9`, modulo `2π`).
    pub fn locate(&self, u: &[f64]) -> Option<usize> {
        let h = self.spacing();
        let mut c = [0; 3];
        for axis in 0..self.dim {
            let x = u.get(axis)?.rem_euclid(TAU) / h;
            let i = x.round();
            if (x - i).abs() * h > 1e-9 {
                return None;
            }
            c[axis] = (i as usize) % self.points;
        }
        Some(self.index(c))
    }

    /// Samples `f(u)` at every node.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len()).map(|i| f(&self.position(i)[..self.dim])).collect()
    }
}

/// Discrete radial graph `r(u)` with the annulus it is meant to live in.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGraphField {
    pub grid: BaseGrid,
    pub values: Vec<f64>,
    pub annulus: (f64, f64),
}

impl RadialGraphField {
    pub fn new(grid: BaseGrid, values: Vec<f64>, annulus: (f64, f64)) -> Result<Self, GeometryError> {
        if values.len() != grid.len() {
            return Err(GeometryError::InvalidGrid(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            annulus,
        })
    }

    pub fn constant(grid: BaseGrid, value: f64, annulus: (f64, f64)) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
            annulus,
        }
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: BaseGrid, annulus: (f64, f64), f: F) -> Self {
        Self {
            grid,
            values: grid.sample(f),
            annulus,
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Strictly inside the annulus at every node.
    pub fn inside_barrier(&self) -> bool {
        let (r1, r2) = self.annulus;
        self.values.iter().all(|&r| r1 < r && r < r2)
    }

    /// Periodic translation by whole grid steps.
    pub fn translated(&self, steps: [isize; 3]) -> Self {
        let g = self.grid;
        let mut values = vec![0.0; g.len()];
        for (node, v) in values.iter_mut().enumerate() {
            let mut src = node;
            for (axis, &s) in steps.iter().enumerate().take(g.dim()) {
                src = g.shift(src, axis, -s);
            }
            *v = self.values[src];
        }
        Self { values, ..self.clone() }
    }
}

/// First and second derivatives of `r` at one node; unused slots are zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NodeDerivatives {
    pub grad: [f64; 3],
    pub hess: [[f64; 3]; 3],
}

/// Second-order central differences on the periodic grid: 3-point second
/// derivatives, 4-point cross stencil for mixed partials.
pub fn node_derivatives(grid: &BaseGrid, values: &[f64], node: usize) -> NodeDerivatives {
    let h = grid.spacing();
    let n = grid.dim();
    let mut d = NodeDerivatives::default();
    let center = values[node];
    for a in 0..n {
        let plus = values[grid.shift(node, a, 1)];
        let minus = values[grid.shift(node, a, -1)];
        d.grad[a] = (plus - minus) / (2.0 * h);
        d.hess[a][a] = (plus - 2.0 * center + minus) / (h * h);
        for b in (a + 1)..n {
            let pa = grid.shift(node, a, 1);
            let ma = grid.shift(node, a, -1);
            let pp = values[grid.shift(pa, b, 1)];
            let pm = values[grid.shift(pa, b, -1)];
            let mp = values[grid.shift(ma, b, 1)];
            let mm = values[grid.shift(ma, b, -1)];
            let v = (pp - pm - mp + mm) / (4.0 * h * h);
            d.hess[a][b] = v;
            d.hess[b][a] = v;
        }
    }
    d
}

pub fn graph_derivatives(field: &RadialGraphField) -> Vec<NodeDerivatives> {
    (0..field.grid.len())
        .map(|node| node_derivatives(&field.grid, &field.values, node))
        .collect()
}
