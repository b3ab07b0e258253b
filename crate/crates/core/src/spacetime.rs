//! The non-relativistic `(M, I, τ, D, b)` and relativistic `(M, I, g)`
//! spacetime models, stored in one canonical chart.
//!
//! The chart has a fixed origin `o` and a basis adapted to the model: slot 0
//! is the time axis (τ in the non-relativistic model, the future-directed unit
//! timelike vector in the relativistic one), slots 1–3 are orthonormal
//! spacelike axes. Non-relativistic displacements are measured in `(s, m, m,
//! m)`; relativistic ones in seconds throughout (c = 1). Frame independence is
//! a property of the group actions in [`crate::groups`] and is checked by
//! covariance tests rather than encoded in the storage.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::quantities::{split_literal, Dim, Quantity};

/// Minimum normalized margin for future-likeness.
pub const FUTURE_MARGIN: f64 = 1e-12;
/// Tolerance of the relativistic `g(u,u) = -1` check.
pub const V1_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    NonRelativistic,
    Relativistic,
}

impl ModelKind {
    pub fn ensure(self, expected: ModelKind) -> Result<()> {
        if self == expected {
            Ok(())
        } else {
            Err(Error::WrongModel { expected, found: self })
        }
    }

    pub fn ensure_same(self, other: ModelKind) -> Result<()> {
        other.ensure(self)
    }

    /// Dimension of chart slot `i` for a vector of scale dimension `scale`.
    pub fn slot_dim(self, scale: Dim, i: usize) -> Dim {
        match (self, i) {
            (_, 0) | (ModelKind::Relativistic, _) => scale * Dim::SECOND,
            (ModelKind::NonRelativistic, _) => scale * Dim::METER,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::NonRelativistic => write!(f, "nonrel"),
            ModelKind::Relativistic => write!(f, "rel"),
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "nonrel" | "nonrelativistic" | "galilean" => Ok(ModelKind::NonRelativistic),
            "rel" | "relativistic" | "poincare" => Ok(ModelKind::Relativistic),
            other => Err(Error::parse(format!("unknown model '{other}' (expected nonrel|rel)"))),
        }
    }
}

pub(crate) fn euclid_norm(c: &[f64; 4]) -> f64 {
    c.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Minkowski product with signature (−,+,+,+) on raw chart components.
pub fn minkowski(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    -a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

/// Future-likeness on raw components with the normalized margin.
pub fn is_future_like(model: ModelKind, c: &[f64; 4]) -> bool {
    let n = euclid_norm(c);
    if !(n.is_finite() && n > 0.0) {
        return false;
    }
    match model {
        ModelKind::NonRelativistic => c[0] > FUTURE_MARGIN * n,
        ModelKind::Relativistic => c[0] > 0.0 && -minkowski(c, c) > FUTURE_MARGIN * n * n,
    }
}

/// Element of the vector space 𝐌 (or a quotient/tensor of it with measure
/// lines), given by chart components and a scale dimension: slot 0 carries
/// `scale · s`, slots 1–3 carry `scale · m` (non-relativistic) or `scale · s`
/// (relativistic).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourVector {
    model: ModelKind,
    scale: Dim,
    comps: [f64; 4],
}

impl FourVector {
    pub fn new(model: ModelKind, scale: Dim, comps: [f64; 4]) -> Self {
        let scale = match model {
            ModelKind::Relativistic => scale.collapse_relativistic(),
            ModelKind::NonRelativistic => scale,
        };
        FourVector { model, scale, comps }
    }

    /// A displacement in 𝐌 (scale dimensionless).
    pub fn displacement(model: ModelKind, comps: [f64; 4]) -> Self {
        FourVector::new(model, Dim::DIMENSIONLESS, comps)
    }

    pub fn from_quantities(model: ModelKind, q: [Quantity; 4]) -> Result<Self> {
        let scale = match model {
            ModelKind::NonRelativistic => q[0].dim / Dim::SECOND,
            ModelKind::Relativistic => q[0].dim.collapse_relativistic() / Dim::SECOND,
        };
        for (i, qi) in q.iter().enumerate() {
            let want = model.slot_dim(scale, i);
            let got = match model {
                ModelKind::Relativistic => qi.dim.collapse_relativistic(),
                ModelKind::NonRelativistic => qi.dim,
            };
            if got != want {
                return Err(Error::DimensionMismatch { lhs: got, rhs: want });
            }
        }
        Ok(FourVector::new(model, scale, q.map(|x| x.value)))
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn scale(&self) -> Dim {
        self.scale
    }

    pub fn components(&self) -> [f64; 4] {
        self.comps
    }

    pub fn component(&self, i: usize) -> Quantity {
        Quantity::new(self.comps[i], self.model.slot_dim(self.scale, i))
    }

    pub fn is_spacelike(&self) -> bool {
        self.comps[0] == 0.0
    }

    pub fn scaled(&self, k: f64) -> Self {
        FourVector { comps: self.comps.map(|c| c * k), ..*self }
    }

    fn compatible(&self, other: &FourVector) -> Result<()> {
        self.model.ensure_same(other.model)?;
        if self.scale != other.scale {
            return Err(Error::DimensionMismatch { lhs: self.scale, rhs: other.scale });
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &FourVector) -> Result<FourVector> {
        self.compatible(other)?;
        Ok(FourVector { comps: std::array::from_fn(|i| self.comps[i] + other.comps[i]), ..*self })
    }

    pub fn checked_sub(&self, other: &FourVector) -> Result<FourVector> {
        self.checked_add(&other.scaled(-1.0))
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &FourVector, b: f64) -> Result<FourVector> {
        self.scaled(a).checked_add(&other.scaled(b))
    }
}

/// The time evaluation `𝛕 : 𝐌 → 𝐈`.
pub fn tau_of(w: &FourVector) -> Result<Quantity> {
    w.model.ensure(ModelKind::NonRelativistic)?;
    Ok(w.component(0))
}

/// The Euclidean structure `𝐛` on spacelike vectors.
pub fn b_inner(e1: &FourVector, e2: &FourVector) -> Result<Quantity> {
    e1.model.ensure(ModelKind::NonRelativistic)?;
    e2.model.ensure(ModelKind::NonRelativistic)?;
    for e in [e1, e2] {
        if !e.is_spacelike() {
            return Err(Error::NotSpacelike { tau: e.comps[0] });
        }
    }
    let v: f64 = (1..4).map(|i| e1.comps[i] * e2.comps[i]).sum();
    Ok(Quantity::new(v, e1.model.slot_dim(e1.scale, 1) * e2.model.slot_dim(e2.scale, 1)))
}

/// The Lorentz form `g` with signature (−,+,+,+).
pub fn g_inner(w1: &FourVector, w2: &FourVector) -> Result<Quantity> {
    w1.model.ensure(ModelKind::Relativistic)?;
    w2.model.ensure(ModelKind::Relativistic)?;
    Ok(Quantity::new(
        minkowski(&w1.comps, &w2.comps),
        (w1.scale * Dim::SECOND) * (w2.scale * Dim::SECOND),
    ))
}

/// Future-like vector (element of the cone N→).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FutureVector(FourVector);

impl FutureVector {
    pub fn new(w: FourVector) -> Result<Self> {
        if is_future_like(w.model, &w.comps) {
            Ok(FutureVector(w))
        } else {
            Err(Error::NotFutureLike { components: w.comps })
        }
    }

    pub fn vector(&self) -> &FourVector {
        &self.0
    }

    pub fn components(&self) -> [f64; 4] {
        self.0.comps
    }

    pub fn model(&self) -> ModelKind {
        self.0.model
    }
}

/// Absolute velocity value, an element of V(1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Velocity(FourVector);

impl Velocity {
    /// Validates the V(1) constraint of the vector's model.
    pub fn new(v: FourVector) -> Result<Self> {
        if v.scale != Dim::PER_SECOND {
            return Err(Error::DimensionMismatch { lhs: v.scale, rhs: Dim::PER_SECOND });
        }
        let c = v.comps;
        let ok = match v.model {
            ModelKind::NonRelativistic => c[0] == 1.0,
            ModelKind::Relativistic => c[0] > 0.0 && (minkowski(&c, &c) + 1.0).abs() <= V1_TOLERANCE,
        };
        if ok {
            Ok(Velocity(v))
        } else {
            Err(Error::NotFutureLike { components: c })
        }
    }

    /// Non-relativistic `(1, v)`.
    pub fn galilean(spatial: [f64; 3]) -> Self {
        Velocity(FourVector::new(
            ModelKind::NonRelativistic,
            Dim::PER_SECOND,
            [1.0, spatial[0], spatial[1], spatial[2]],
        ))
    }

    /// Relativistic `γ(1, v)` for a three-velocity with `|v| < 1`.
    pub fn lorentz(spatial: [f64; 3]) -> Result<Self> {
        let v2: f64 = spatial.iter().map(|v| v * v).sum();
        if v2 >= 1.0 {
            return Err(Error::NotFutureLike { components: [1.0, spatial[0], spatial[1], spatial[2]] });
        }
        let g = 1.0 / (1.0 - v2).sqrt();
        Velocity::new(FourVector::new(
            ModelKind::Relativistic,
            Dim::PER_SECOND,
            [g, g * spatial[0], g * spatial[1], g * spatial[2]],
        ))
    }

    pub fn rest(model: ModelKind) -> Self {
        Velocity(FourVector::new(model, Dim::PER_SECOND, [1.0, 0.0, 0.0, 0.0]))
    }

    pub fn vector(&self) -> &FourVector {
        &self.0
    }

    pub fn components(&self) -> [f64; 4] {
        self.0.comps
    }

    pub fn model(&self) -> ModelKind {
        self.0.model
    }

    pub fn as_future(&self) -> FutureVector {
        FutureVector(self.0)
    }
}

/// Project a future-like vector onto V(1).
pub fn normalize_to_v1(w: &FutureVector) -> Velocity {
    let v = w.0;
    let n = match v.model {
        ModelKind::NonRelativistic => v.comps[0],
        ModelKind::Relativistic => (-minkowski(&v.comps, &v.comps)).sqrt(),
    };
    let mut comps = v.comps.map(|c| c / n);
    if v.model == ModelKind::NonRelativistic {
        comps[0] = 1.0;
    }
    Velocity(FourVector::new(v.model, Dim::PER_SECOND, comps))
}

/// A point of the affine spacetime M, stored as its displacement from the
/// chart origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    model: ModelKind,
    coords: [f64; 4],
}

impl Event {
    pub fn new(model: ModelKind, coords: [f64; 4]) -> Self {
        Event { model, coords }
    }

    pub fn origin(model: ModelKind) -> Self {
        Event::new(model, [0.0; 4])
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn coords(&self) -> [f64; 4] {
        self.coords
    }

    pub fn displacement_from_origin(&self) -> FourVector {
        FourVector::displacement(self.model, self.coords)
    }

    /// `self − other ∈ 𝐌`.
    pub fn minus(&self, other: &Event) -> Result<FourVector> {
        self.model.ensure_same(other.model)?;
        Ok(FourVector::displacement(
            self.model,
            std::array::from_fn(|i| self.coords[i] - other.coords[i]),
        ))
    }

    pub fn plus(&self, w: &FourVector) -> Result<Event> {
        self.model.ensure_same(w.model)?;
        if !w.scale.is_dimensionless() {
            return Err(Error::DimensionMismatch { lhs: w.scale, rhs: Dim::DIMENSIONLESS });
        }
        Ok(Event::new(self.model, std::array::from_fn(|i| self.coords[i] + w.comps[i])))
    }
}

/// Parse a `[t, x, y, z]` literal. Bare numbers take the chart unit of their
/// slot for the requested scale; suffixed numbers must match it (after the
/// c = 1 collapse in the relativistic model).
pub fn parse_vector_literal(model: ModelKind, scale: Dim, src: &str) -> Result<[f64; 4]> {
    let inner = src
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| Error::parse(format!("expected '[t, x, y, z]', got '{src}'")))?;
    let parts: Vec<&str> = inner.split(',').collect();
    if parts.len() != 4 {
        return Err(Error::parse(format!("expected 4 components, got {} in '{src}'", parts.len())));
    }
    let mut out = [0.0; 4];
    for (i, part) in parts.iter().enumerate() {
        let (v, dim) = split_literal(part)?;
        if let Some(dim) = dim {
            let want = model.slot_dim(scale, i);
            let got = match model {
                ModelKind::Relativistic => dim.collapse_relativistic(),
                ModelKind::NonRelativistic => dim,
            };
            if got != want {
                return Err(Error::parse(format!(
                    "component {i} of '{src}' has unit {dim}, expected {want}"
                )));
            }
        }
        out[i] = v;
    }
    Ok(out)
}

impl Event {
    pub fn parse(model: ModelKind, src: &str) -> Result<Event> {
        Ok(Event::new(model, parse_vector_literal(model, Dim::DIMENSIONLESS, src)?))
    }
}
