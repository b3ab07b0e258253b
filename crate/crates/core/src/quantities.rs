//! Dimensioned scalars over the two base measure lines, time (second) and
//! distance (meter).
//!
//! Units follow ħ = 1, so a mass value lives in `s/m²`. The relativistic model
//! additionally sets c = 1, which [`Dim::collapse_relativistic`] implements by
//! folding the length exponent into the time exponent.

use std::fmt;
use std::ops::{Div, Mul, Neg};
use std::str::FromStr;

use num_rational::Ratio;

use crate::error::{Error, Result};

/// Result-dimension assertions in evaluation paths are compiled out when the
/// `unchecked-dims` feature is enabled.
pub const DIM_CHECKS: bool = !cfg!(feature = "unchecked-dims");

pub type Exponent = Ratio<i32>;

/// Physical dimension `s^time · m^length` with exact rational exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dim {
    pub time: Exponent,
    pub length: Exponent,
}

impl Dim {
    pub const fn from_ints(time: i32, length: i32) -> Self {
        Dim {
            time: Ratio::new_raw(time, 1),
            length: Ratio::new_raw(length, 1),
        }
    }

    pub fn new(time: Exponent, length: Exponent) -> Self {
        Dim { time, length }
    }

    pub const DIMENSIONLESS: Dim = Dim::from_ints(0, 0);
    pub const SECOND: Dim = Dim::from_ints(1, 0);
    pub const METER: Dim = Dim::from_ints(0, 1);
    pub const PER_SECOND: Dim = Dim::from_ints(-1, 0);
    pub const SPEED: Dim = Dim::from_ints(-1, 1);
    /// `I / (D ⊗ D)`.
    pub const MASS: Dim = Dim::from_ints(1, -2);

    pub fn is_dimensionless(&self) -> bool {
        *self == Dim::DIMENSIONLESS
    }

    pub fn inv(self) -> Dim {
        Dim::new(-self.time, -self.length)
    }

    pub fn powi(self, n: i32) -> Dim {
        let n = Ratio::from_integer(n);
        Dim::new(self.time * n, self.length * n)
    }

    pub fn pow(self, e: Exponent) -> Dim {
        Dim::new(self.time * e, self.length * e)
    }

    pub fn sqrt(self) -> Dim {
        self.pow(Ratio::new(1, 2))
    }

    /// Identify distances with time intervals (c = 1).
    pub fn collapse_relativistic(self) -> Dim {
        Dim::new(self.time + self.length, Ratio::from_integer(0))
    }
}

impl Default for Dim {
    fn default() -> Self {
        Dim::DIMENSIONLESS
    }
}

impl Mul for Dim {
    type Output = Dim;
    fn mul(self, rhs: Dim) -> Dim {
        Dim::new(self.time + rhs.time, self.length + rhs.length)
    }
}

impl Div for Dim {
    type Output = Dim;
    fn div(self, rhs: Dim) -> Dim {
        self * rhs.inv()
    }
}

fn fmt_exp(f: &mut fmt::Formatter<'_>, base: &str, e: Exponent) -> fmt::Result {
    if e == Ratio::from_integer(1) {
        write!(f, "{base}")
    } else if e.is_integer() {
        write!(f, "{base}{}", e.to_integer())
    } else {
        write!(f, "{base}^({e})")
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let zero = Ratio::from_integer(0);
        let (t, l) = (self.time, self.length);
        if t == zero && l == zero {
            return write!(f, "dimensionless");
        }
        let mut num: Vec<(&str, Exponent)> = Vec::new();
        let mut den: Vec<(&str, Exponent)> = Vec::new();
        for (base, e) in [("s", t), ("m", l)] {
            if e > zero {
                num.push((base, e));
            } else if e < zero {
                den.push((base, -e));
            }
        }
        if num.is_empty() {
            write!(f, "1")?;
        }
        for (base, e) in &num {
            fmt_exp(f, base, *e)?;
        }
        if !den.is_empty() {
            write!(f, "/")?;
            for (base, e) in &den {
                fmt_exp(f, base, *e)?;
            }
        }
        Ok(())
    }
}

/// A real value tagged with its dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub dim: Dim,
}

impl Quantity {
    pub const fn new(value: f64, dim: Dim) -> Self {
        Quantity { value, dim }
    }

    pub const fn dimensionless(value: f64) -> Self {
        Quantity::new(value, Dim::DIMENSIONLESS)
    }

    pub const fn seconds(value: f64) -> Self {
        Quantity::new(value, Dim::SECOND)
    }

    pub const fn meters(value: f64) -> Self {
        Quantity::new(value, Dim::METER)
    }

    pub const fn mass(value: f64) -> Self {
        Quantity::new(value, Dim::MASS)
    }

    pub fn checked_add(self, rhs: Quantity) -> Result<Quantity> {
        q_add(self, rhs)
    }

    pub fn checked_sub(self, rhs: Quantity) -> Result<Quantity> {
        q_add(self, -rhs)
    }

    pub fn sqrt(self) -> Quantity {
        Quantity::new(self.value.sqrt(), self.dim.sqrt())
    }

    pub fn collapse_relativistic(self) -> Quantity {
        Quantity::new(self.value, self.dim.collapse_relativistic())
    }

    /// Require a specific dimension.
    pub fn expect_dim(self, dim: Dim) -> Result<f64> {
        if self.dim == dim {
            Ok(self.value)
        } else {
            Err(Error::DimensionMismatch { lhs: self.dim, rhs: dim })
        }
    }
}

pub fn q_add(a: Quantity, b: Quantity) -> Result<Quantity> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch { lhs: a.dim, rhs: b.dim });
    }
    Ok(Quantity::new(a.value + b.value, a.dim))
}

pub fn q_mul(a: Quantity, b: Quantity) -> Quantity {
    Quantity::new(a.value * b.value, a.dim * b.dim)
}

pub fn collapse_relativistic(d: Dim) -> Dim {
    d.collapse_relativistic()
}

impl Mul for Quantity {
    type Output = Quantity;
    fn mul(self, rhs: Quantity) -> Quantity {
        q_mul(self, rhs)
    }
}

impl Mul<f64> for Quantity {
    type Output = Quantity;
    fn mul(self, rhs: f64) -> Quantity {
        Quantity::new(self.value * rhs, self.dim)
    }
}

impl Div for Quantity {
    type Output = Quantity;
    fn div(self, rhs: Quantity) -> Quantity {
        Quantity::new(self.value / rhs.value, self.dim / rhs.dim)
    }
}

impl Neg for Quantity {
    type Output = Quantity;
    fn neg(self) -> Quantity {
        Quantity::new(-self.value, self.dim)
    }
}

/// The closed set of unit suffixes accepted in literals, longest first so
/// that prefix matching is unambiguous.
pub const UNIT_SUFFIXES: [(&str, Dim); 5] = [
    ("dimensionless", Dim::DIMENSIONLESS),
    ("s/m2", Dim::MASS),
    ("1/s", Dim::PER_SECOND),
    ("s", Dim::SECOND),
    ("m", Dim::METER),
];

pub fn unit_suffix(dim: Dim) -> Option<&'static str> {
    UNIT_SUFFIXES.iter().find(|(_, d)| *d == dim).map(|(s, _)| *s)
}

/// Split `<float><unit>` into its numeric part and optional unit.
///
/// A single space between number and unit is tolerated so that `2.5 1/s`
/// stays readable. Returns `None` for the unit when the literal is bare.
pub(crate) fn split_literal(src: &str) -> Result<(f64, Option<Dim>)> {
    let s = src.trim();
    for (suffix, dim) in UNIT_SUFFIXES {
        if let Some(num) = s.strip_suffix(suffix) {
            let num = num.trim_end();
            if num.is_empty() {
                continue;
            }
            // "1/s" must not swallow the tail of a number such as "21/s"
            // written without a separator.
            if suffix == "1/s" && !src.trim().ends_with(" 1/s") && num.ends_with(|c: char| c.is_ascii_digit() || c == '.') {
                return Err(Error::parse(format!(
                    "ambiguous literal '{src}': separate the number from '1/s' with a space"
                )));
            }
            if let Ok(v) = num.parse::<f64>() {
                return Ok((v, Some(dim)));
            }
        }
    }
    s.parse::<f64>()
        .map(|v| (v, None))
        .map_err(|_| Error::parse(format!("invalid quantity literal '{src}'")))
}

impl FromStr for Quantity {
    type Err = Error;

    /// Parses `<float><unit>` with unit in {s, m, s/m2, 1/s, dimensionless};
    /// a bare number is dimensionless.
    fn from_str(s: &str) -> Result<Self> {
        let (v, dim) = split_literal(s)?;
        Ok(Quantity::new(v, dim.unwrap_or(Dim::DIMENSIONLESS)))
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match unit_suffix(self.dim) {
            Some("dimensionless") => write!(f, "{:.16e}", self.value),
            Some("1/s") => write!(f, "{:.16e} 1/s", self.value),
            Some(u) => write!(f, "{:.16e}{u}", self.value),
            None => write!(f, "{:.16e} {}", self.value, self.dim),
        }
    }
}
