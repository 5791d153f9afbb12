//! Double-double arithmetic (unevaluated sum of two `f64`), about 32 digits.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn sqrt(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        // one Newton step on the f64 estimate
        let x = self.hi.sqrt();
        let (p, e) = two_prod(x, x);
        let r = ((self.hi - p) - e + self.lo) / (2.0 * x);
        let (hi, lo) = quick_two_sum(x, r);
        Dd { hi, lo }
    }

    pub fn signum(self) -> f64 {
        if self.hi < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::from(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::from(q2);
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from(q3)
    }
}

/// Smallest eigenvalue of a symmetric matrix (row-major, `n × n`) by cyclic
/// Jacobi carried out in double-double.
pub fn symmetric_min_eigenvalue(a: &[Dd], n: usize) -> Dd {
    let mut m = a.to_vec();
    let at = |i: usize, j: usize| i * n + j;
    let norm = m.iter().fold(Dd::ZERO, |acc, &x| acc + x * x).sqrt();
    let threshold = norm.to_f64() * 1e-31;
    for _ in 0..60 {
        let mut off = Dd::ZERO;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off + m[at(i, j)] * m[at(i, j)];
            }
        }
        if off.sqrt().to_f64() <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[at(p, q)];
                if apq.hi == 0.0 {
                    continue;
                }
                let theta = (m[at(q, q)] - m[at(p, p)]) / (Dd::from(2.0) * apq);
                let t = Dd::from(theta.signum()) / (theta.abs() + (theta * theta + Dd::ONE).sqrt());
                let c = Dd::ONE / (t * t + Dd::ONE).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[at(k, p)];
                    let mkq = m[at(k, q)];
                    m[at(k, p)] = c * mkp - s * mkq;
                    m[at(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[at(p, k)];
                    let mqk = m[at(q, k)];
                    m[at(p, k)] = c * mpk - s * mqk;
                    m[at(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..n)
        .map(|i| m[at(i, i)])
        .fold(Dd::from(f64::INFINITY), |acc, x| if x < acc { x } else { acc })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_carries_extra_digits() {
        let third = Dd::ONE / Dd::from(3.0);
        let back = third * Dd::from(3.0) - Dd::ONE;
        assert!(back.to_f64().abs() < 1e-31);
        let two = Dd::from(2.0).sqrt();
        assert!((two * two - Dd::from(2.0)).to_f64().abs() < 1e-31);
        let tiny = (Dd::from(1.0) + Dd::from(1e-20)) - Dd::ONE;
        assert_eq!(tiny.to_f64(), 1e-20);
    }

    #[test]
    fn graded_eigenvalue() {
        // [[1e16, 1e8 - 1e-7], [1e8 - 1e-7, 1]] has determinant ≈ 2e1 so the
        // small eigenvalue is ≈ 2e-15, far below f64 resolution of the matrix.
        let b = Dd::from(1e8) - Dd::from(1e-7);
        let a = [Dd::from(1e16), b, b, Dd::ONE];
        let lam = symmetric_min_eigenvalue(&a, 2).to_f64();
        let det = (Dd::from(1e16) - b * b).to_f64();
        let expected = det / 1e16;
        assert!((lam - expected).abs() < 1e-6 * expected, "{lam} vs {expected}");
    }
}
