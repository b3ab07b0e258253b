//! Forward-mode automatic differentiation.
//!
//! [`Dual`] is generic over its own scalar, so nesting gives exact higher
//! derivatives: `Dual<Dual<f64, N>, N>` carries a full Hessian, and
//! `Dual<Dual<f64, 4>, 4>` seeded on two different variable groups yields the
//! mixed block used by the curl test.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn cst(v: f64) -> Self;
    /// Innermost real part.
    fn re(&self) -> f64;
    fn sqrt(self) -> Self;
    fn scale(self, k: f64) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn powi(self, n: i32) -> Self {
        if n < 0 {
            return Self::cst(1.0) / self.powi(-n);
        }
        let mut acc = Self::cst(1.0);
        for _ in 0..n {
            acc = acc * self;
        }
        acc
    }
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn re(&self) -> f64 {
        *self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

/// `v + Σ d[i] εᵢ` with εᵢεⱼ = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<S, const N: usize> {
    pub v: S,
    pub d: [S; N],
}

impl<S: Scalar, const N: usize> Dual<S, N> {
    pub fn constant(v: S) -> Self {
        Dual { v, d: [S::zero(); N] }
    }

    /// Independent variable `i` with value `v`.
    pub fn var(v: S, i: usize) -> Self {
        let mut d = [S::zero(); N];
        d[i] = S::cst(1.0);
        Dual { v, d }
    }

    fn chain(self, f: S, df: S) -> Self {
        Dual {
            v: f,
            d: std::array::from_fn(|i| df * self.d[i]),
        }
    }
}

impl<S: Scalar, const N: usize> Add for Dual<S, N> {
    type Output = Self;
    fn add(self, r: Self) -> Self {
        Dual {
            v: self.v + r.v,
            d: std::array::from_fn(|i| self.d[i] + r.d[i]),
        }
    }
}

impl<S: Scalar, const N: usize> Sub for Dual<S, N> {
    type Output = Self;
    fn sub(self, r: Self) -> Self {
        Dual {
            v: self.v - r.v,
            d: std::array::from_fn(|i| self.d[i] - r.d[i]),
        }
    }
}

impl<S: Scalar, const N: usize> Mul for Dual<S, N> {
    type Output = Self;
    fn mul(self, r: Self) -> Self {
        Dual {
            v: self.v * r.v,
            d: std::array::from_fn(|i| self.v * r.d[i] + self.d[i] * r.v),
        }
    }
}

impl<S: Scalar, const N: usize> Div for Dual<S, N> {
    type Output = Self;
    fn div(self, r: Self) -> Self {
        let inv = S::cst(1.0) / r.v;
        let q = self.v * inv;
        Dual {
            v: q,
            d: std::array::from_fn(|i| (self.d[i] - q * r.d[i]) * inv),
        }
    }
}

impl<S: Scalar, const N: usize> Neg for Dual<S, N> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual {
            v: -self.v,
            d: std::array::from_fn(|i| -self.d[i]),
        }
    }
}

impl<S: Scalar, const N: usize> Scalar for Dual<S, N> {
    fn cst(v: f64) -> Self {
        Dual::constant(S::cst(v))
    }
    fn re(&self) -> f64 {
        self.v.re()
    }
    fn sqrt(self) -> Self {
        let r = self.v.sqrt();
        let df = (r + r).powi(-1);
        self.chain(r, df)
    }
    fn scale(self, k: f64) -> Self {
        Dual {
            v: self.v.scale(k),
            d: std::array::from_fn(|i| self.d[i].scale(k)),
        }
    }
}

/// Value and gradient of `f` at `z`.
pub fn gradient<const N: usize>(f: impl Fn(&[Dual<f64, N>; N]) -> Dual<f64, N>, z: &[f64; N]) -> (f64, [f64; N]) {
    let vars: [Dual<f64, N>; N] = std::array::from_fn(|i| Dual::var(z[i], i));
    let out = f(&vars);
    (out.v, out.d)
}

pub type Hyper<const N: usize> = Dual<Dual<f64, N>, N>;

/// Value, gradient and Hessian of `f` at `z`.
pub fn hessian<const N: usize>(
    f: impl Fn(&[Hyper<N>; N]) -> Hyper<N>,
    z: &[f64; N],
) -> (f64, [f64; N], [[f64; N]; N]) {
    let vars: [Hyper<N>; N] = std::array::from_fn(|i| {
        let mut d = [Dual::constant(0.0); N];
        d[i] = Dual::constant(1.0);
        Dual { v: Dual::var(z[i], i), d }
    });
    let out = f(&vars);
    let h = std::array::from_fn(|i| std::array::from_fn(|j| out.d[i].d[j]));
    (out.v.v, out.v.d, h)
}

pub(crate) fn lift<S: Scalar, const N: usize>(v: &[f64; N]) -> [S; N] {
    std::array::from_fn(|i| S::cst(v[i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gradient_of_polynomial() {
        let (v, g) = gradient(|z: &[Dual<f64, 2>; 2]| z[0] * z[0] * z[1] + z[1].sqrt(), &[3.0, 4.0]);
        assert_relative_eq!(v, 38.0);
        assert_relative_eq!(g[0], 24.0);
        assert_relative_eq!(g[1], 9.0 + 0.25);
    }

    #[test]
    fn hessian_of_quotient_matches_closed_form() {
        // f = x / y, f_xx = 0, f_xy = -1/y², f_yy = 2x/y³
        let (v, g, h) = hessian(|z: &[Hyper<2>; 2]| z[0] / z[1], &[2.0, 0.5]);
        assert_relative_eq!(v, 4.0);
        assert_relative_eq!(g[0], 2.0);
        assert_relative_eq!(g[1], -8.0);
        assert_relative_eq!(h[0][0], 0.0);
        assert_relative_eq!(h[0][1], -4.0);
        assert_relative_eq!(h[1][0], -4.0);
        assert_relative_eq!(h[1][1], 32.0);
    }

    #[test]
    fn nested_sqrt_second_derivative() {
        let (_, g, h) = hessian(|z: &[Hyper<1>; 1]| z[0].sqrt(), &[4.0]);
        assert_relative_eq!(g[0], 0.25);
        assert_relative_eq!(h[0][0], -1.0 / 32.0);
    }

    #[test]
    fn powi_handles_negative_exponents() {
        let (v, g) = gradient(|z: &[Dual<f64, 1>; 1]| z[0].powi(-2), &[2.0]);
        assert_relative_eq!(v, 0.25);
        assert_relative_eq!(g[0], -0.25);
    }
}
