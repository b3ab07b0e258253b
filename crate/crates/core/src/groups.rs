//! Proper Noether (inhomogeneous Galilean) and proper Poincaré groups: Lie
//! algebra generators, their exponentials and membership tests.
//!
//! Generators and maps are stored dimensionless in the canonical chart. In
//! the non-relativistic chart a boost entry `H^α_0` is a speed in m/s, in
//! the relativistic chart a rapidity.

use std::fmt;

use nalgebra::{DMatrix, DVector, Matrix4, Matrix5, Vector4};

use crate::dual::Scalar;
use crate::error::{Error, Result};
use crate::quantities::Dim;
use crate::spacetime::{parse_vector_literal, Event, FourVector, ModelKind};

pub const ALGEBRA_TOLERANCE: f64 = 1e-10;
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-10;
pub const SERIES_MAX_TERMS: usize = 40;

const ETA: [f64; 4] = [-1.0, 1.0, 1.0, 1.0];

fn eta() -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::from(ETA))
}

/// Algebra-constraint residual of a linear part.
fn algebra_residual(model: ModelKind, lin: &Matrix4<f64>) -> f64 {
    match model {
        ModelKind::NonRelativistic => {
            // 𝛕·𝐇 = 0 and 𝐇|𝐄 antisymmetric.
            let tau = (0..4).map(|j| lin[(0, j)].abs()).fold(0.0, f64::max);
            let mut anti: f64 = 0.0;
            for a in 1..4 {
                for b in 1..4 {
                    anti = anti.max((lin[(a, b)] + lin[(b, a)]).abs());
                }
            }
            tau.max(anti)
        }
        ModelKind::Relativistic => {
            let gh = eta() * lin;
            (gh + gh.transpose()).abs().max()
        }
    }
}

/// Element `H` of La(𝒩) or La(𝒫): `H(x) = 𝐇(x − o) + 𝐡`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generator {
    model: ModelKind,
    linear: Matrix4<f64>,
    translation: [f64; 4],
}

impl Generator {
    pub fn new(model: ModelKind, linear: Matrix4<f64>, translation: [f64; 4]) -> Result<Self> {
        let residual = algebra_residual(model, &linear);
        if !(residual <= ALGEBRA_TOLERANCE) {
            return Err(Error::AlgebraViolation { residual });
        }
        Ok(Generator { model, linear, translation })
    }

    pub fn zero(model: ModelKind) -> Self {
        Generator { model, linear: Matrix4::zeros(), translation: [0.0; 4] }
    }

    pub fn translation(model: ModelKind, h: [f64; 4]) -> Self {
        Generator { model, linear: Matrix4::zeros(), translation: h }
    }

    /// Rotation about spatial axis 1, 2 or 3 (right-handed).
    pub fn rotation(model: ModelKind, axis: usize) -> Result<Self> {
        let (a, b) = match axis {
            1 => (2, 3),
            2 => (3, 1),
            3 => (1, 2),
            _ => return Err(Error::parse(format!("rotation axis must be 1, 2 or 3, got {axis}"))),
        };
        let mut lin = Matrix4::zeros();
        lin[(a, b)] = -1.0;
        lin[(b, a)] = 1.0;
        Ok(Generator { model, linear: lin, translation: [0.0; 4] })
    }

    /// Unit boost along spatial axis 1, 2 or 3.
    pub fn boost(model: ModelKind, axis: usize) -> Result<Self> {
        if !(1..=3).contains(&axis) {
            return Err(Error::parse(format!("boost axis must be 1, 2 or 3, got {axis}")));
        }
        let mut lin = Matrix4::zeros();
        lin[(axis, 0)] = 1.0;
        if model == ModelKind::Relativistic {
            lin[(0, axis)] = 1.0;
        }
        Ok(Generator { model, linear: lin, translation: [0.0; 4] })
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn linear(&self) -> &Matrix4<f64> {
        &self.linear
    }

    pub fn translation_part(&self) -> [f64; 4] {
        self.translation
    }

    /// `H(x)` for chart coordinates `x`.
    pub fn apply<S: Scalar>(&self, x: &[S; 4]) -> [S; 4] {
        let hx = mat_vec(&self.linear, x);
        std::array::from_fn(|i| hx[i] + S::cst(self.translation[i]))
    }

    pub fn apply_linear<S: Scalar>(&self, w: &[S; 4]) -> [S; 4] {
        mat_vec(&self.linear, w)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Generator {
            model: self.model,
            linear: self.linear * k,
            translation: self.translation.map(|h| h * k),
        }
    }

    /// Linear combination with another generator of the same model.
    pub fn plus(&self, other: &Generator) -> Self {
        Generator {
            model: self.model,
            linear: self.linear + other.linear,
            translation: std::array::from_fn(|i| self.translation[i] + other.translation[i]),
        }
    }

    fn augmented(&self) -> Matrix5<f64> {
        let mut m = Matrix5::zeros();
        m.fixed_view_mut::<4, 4>(0, 0).copy_from(&self.linear);
        for i in 0..4 {
            m[(i, 4)] = self.translation[i];
        }
        m
    }

    /// Lie bracket `[A, B]` of affine generators.
    pub fn bracket(&self, other: &Generator) -> Generator {
        let (a, b) = (self.augmented(), other.augmented());
        let c = a * b - b * a;
        Generator {
            model: self.model,
            linear: c.fixed_view::<4, 4>(0, 0).into_owned(),
            translation: std::array::from_fn(|i| c[(i, 4)]),
        }
    }

    fn vectorize(&self) -> [f64; 20] {
        let mut out = [0.0; 20];
        for i in 0..4 {
            for j in 0..4 {
                out[4 * i + j] = self.linear[(i, j)];
            }
            out[16 + i] = self.translation[i];
        }
        out
    }

    /// Parse `translation [t,x,y,z]`, `rotation axis=k`, `boost axis=k` or
    /// `matrix [[..],[..],[..],[..]] [t,x,y,z]`.
    pub fn parse(model: ModelKind, src: &str) -> Result<Generator> {
        let s = src.trim();
        let (head, rest) = s.split_once(char::is_whitespace).unwrap_or((s, ""));
        let rest = rest.trim();
        let axis = |rest: &str| -> Result<usize> {
            rest.strip_prefix("axis")
                .map(str::trim_start)
                .and_then(|r| r.strip_prefix('='))
                .and_then(|r| r.trim().parse::<usize>().ok())
                .ok_or_else(|| Error::parse(format!("expected 'axis=<1|2|3>' in '{src}'")))
        };
        match head {
            "translation" => Ok(Generator::translation(
                model,
                parse_vector_literal(model, Dim::DIMENSIONLESS, rest)?,
            )),
            "rotation" => Generator::rotation(model, axis(rest)?),
            "boost" => Generator::boost(model, axis(rest)?),
            "matrix" => {
                let close = rest
                    .find("]]")
                    .ok_or_else(|| Error::parse(format!("unterminated matrix in '{src}'")))?;
                let mat = parse_matrix(&rest[..close + 2])?;
                let tail = rest[close + 2..].trim();
                let h = if tail.is_empty() {
                    [0.0; 4]
                } else {
                    parse_vector_literal(model, Dim::DIMENSIONLESS, tail)?
                };
                Generator::new(model, mat, h)
            }
            other => Err(Error::parse(format!(
                "unknown generator form '{other}' (expected translation|rotation|boost|matrix)"
            ))),
        }
    }
}

/// Parse `[[a,b,c,d],[..],[..],[..]]` into a 4×4 matrix (row major).
pub fn parse_matrix(src: &str) -> Result<Matrix4<f64>> {
    let inner = src
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| Error::parse(format!("expected a 4x4 matrix literal, got '{src}'")))?;
    let mut rows = Vec::new();
    for chunk in inner.split(']') {
        let chunk = chunk.trim().trim_start_matches(',').trim();
        if chunk.is_empty() {
            continue;
        }
        let row = chunk
            .strip_prefix('[')
            .ok_or_else(|| Error::parse(format!("malformed matrix row in '{src}'")))?;
        let vals = row
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| Error::parse(format!("bad matrix entry '{v}'"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(vals);
    }
    if rows.len() != 4 || rows.iter().any(|r| r.len() != 4) {
        return Err(Error::parse(format!("matrix must be 4x4 in '{src}'")));
    }
    Ok(Matrix4::from_fn(|i, j| rows[i][j]))
}

pub(crate) fn mat_vec<S: Scalar>(m: &Matrix4<f64>, v: &[S; 4]) -> [S; 4] {
    std::array::from_fn(|i| {
        let mut acc = S::zero();
        for j in 0..4 {
            let mij = m[(i, j)];
            if mij != 0.0 {
                acc = acc + v[j].scale(mij);
            }
        }
        acc
    })
}

/// Affine map `x ↦ 𝐋(x − o) + o + 𝐭` in chart coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    model: ModelKind,
    linear: Matrix4<f64>,
    translation: [f64; 4],
}

impl AffineMap {
    pub fn new(model: ModelKind, linear: Matrix4<f64>, translation: [f64; 4]) -> Self {
        AffineMap { model, linear, translation }
    }

    pub fn identity(model: ModelKind) -> Self {
        AffineMap::new(model, Matrix4::identity(), [0.0; 4])
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn linear(&self) -> &Matrix4<f64> {
        &self.linear
    }

    pub fn translation(&self) -> [f64; 4] {
        self.translation
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &AffineMap) -> Result<AffineMap> {
        self.model.ensure_same(other.model)?;
        let t = mat_vec(&self.linear, &other.translation);
        Ok(AffineMap::new(
            self.model,
            self.linear * other.linear,
            std::array::from_fn(|i| t[i] + self.translation[i]),
        ))
    }

    pub fn inverse(&self) -> Option<AffineMap> {
        let inv = self.linear.try_inverse()?;
        let t = mat_vec(&inv, &self.translation);
        Some(AffineMap::new(self.model, inv, t.map(|v| -v)))
    }

    pub fn apply_point<S: Scalar>(&self, x: &[S; 4]) -> [S; 4] {
        let lx = mat_vec(&self.linear, x);
        std::array::from_fn(|i| lx[i] + S::cst(self.translation[i]))
    }

    pub fn apply_vector<S: Scalar>(&self, w: &[S; 4]) -> [S; 4] {
        mat_vec(&self.linear, w)
    }

    /// Largest entry-wise difference to another map.
    pub fn distance(&self, other: &AffineMap) -> f64 {
        let dl = (self.linear - other.linear).abs().max();
        let dt = (0..4)
            .map(|i| (self.translation[i] - other.translation[i]).abs())
            .fold(0.0, f64::max);
        dl.max(dt)
    }
}

impl fmt::Display for AffineMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "linear part:")?;
        for i in 0..4 {
            let row: Vec<String> = (0..4).map(|j| format!("{:>25.16e}", self.linear[(i, j)])).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        let t: Vec<String> = self.translation.iter().map(|v| format!("{v:.16e}")).collect();
        write!(f, "translation: [{}]", t.join(", "))
    }
}

/// `e^{sH}` summed as a power series of the augmented 5×5 matrix, whose
/// upper-right column reproduces `Σ (s𝐇)^{n-1} s𝐡 / n!`.
pub fn exp_generator(h: &Generator, s: f64) -> Result<AffineMap> {
    let residual = algebra_residual(h.model, &h.linear);
    if !(residual <= ALGEBRA_TOLERANCE) {
        return Err(Error::AlgebraViolation { residual });
    }
    let a = h.augmented() * s;
    let mut sum = Matrix5::<f64>::identity();
    let mut term = Matrix5::<f64>::identity();
    let mut converged = false;
    for n in 1..=SERIES_MAX_TERMS {
        term = term * a / n as f64;
        sum += term;
        let tn = term.abs().max();
        if tn == 0.0 || tn < 1e-16 * sum.abs().max() {
            converged = true;
            break;
        }
    }
    if !converged || !sum.iter().all(|v| v.is_finite()) {
        return Err(Error::SeriesNotConverged { terms: SERIES_MAX_TERMS });
    }
    Ok(AffineMap::new(
        h.model,
        sum.fixed_view::<4, 4>(0, 0).into_owned(),
        std::array::from_fn(|i| sum[(i, 4)]),
    ))
}

/// Detailed membership diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    /// `𝛕·𝐋 = 𝛕` (nonrel) or `𝐋⁺𝐋 = id` (rel) residual.
    pub structure_residual: f64,
    /// Orthogonality of the spatial block (nonrel only; 0 for rel).
    pub orthogonality_residual: f64,
    pub determinant: f64,
    /// Time orientation: `L⁰₀` must be positive.
    pub arrow_preserved: bool,
}

impl Membership {
    pub fn is_member(&self) -> bool {
        self.structure_residual <= MEMBERSHIP_TOLERANCE
            && self.orthogonality_residual <= MEMBERSHIP_TOLERANCE
            && (self.determinant - 1.0).abs() <= MEMBERSHIP_TOLERANCE
            && self.arrow_preserved
    }
}

pub fn membership(l: &AffineMap) -> Membership {
    let m = &l.linear;
    match l.model {
        ModelKind::NonRelativistic => {
            let row0 = [1.0, 0.0, 0.0, 0.0];
            let structure = (0..4).map(|j| (m[(0, j)] - row0[j]).abs()).fold(0.0, f64::max);
            let r = m.fixed_view::<3, 3>(1, 1).into_owned();
            let ortho = (r.transpose() * r - nalgebra::Matrix3::identity()).abs().max();
            Membership {
                structure_residual: structure,
                orthogonality_residual: ortho,
                determinant: r.determinant(),
                arrow_preserved: m[(0, 0)] > 0.0,
            }
        }
        ModelKind::Relativistic => {
            let e = eta();
            let structure = (m.transpose() * e * m - e).abs().max();
            let scale = m.abs().max().max(1.0);
            Membership {
                structure_residual: structure / (scale * scale),
                orthogonality_residual: 0.0,
                determinant: m.determinant(),
                arrow_preserved: m[(0, 0)] > 0.0,
            }
        }
    }
}

pub fn is_member(l: &AffineMap) -> bool {
    membership(l).is_member()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedGenerator {
    pub name: String,
    pub generator: Generator,
}

/// Four translations, three rotations and three boosts.
pub fn standard_basis(model: ModelKind) -> Vec<NamedGenerator> {
    let mut out = Vec::with_capacity(10);
    for (i, axis) in ["t", "x", "y", "z"].iter().enumerate() {
        let mut h = [0.0; 4];
        h[i] = 1.0;
        out.push(NamedGenerator { name: format!("translation_{axis}"), generator: Generator::translation(model, h) });
    }
    for axis in 1..=3 {
        out.push(NamedGenerator {
            name: format!("rotation_{axis}"),
            generator: Generator::rotation(model, axis).expect("valid axis"),
        });
    }
    for axis in 1..=3 {
        out.push(NamedGenerator {
            name: format!("boost_{axis}"),
            generator: Generator::boost(model, axis).expect("valid axis"),
        });
    }
    out
}

/// Generator with the given coordinates in the standard basis.
pub fn combine_basis(model: ModelKind, coeffs: &[f64; 10]) -> Generator {
    standard_basis(model)
        .iter()
        .zip(coeffs)
        .fold(Generator::zero(model), |acc, (g, &c)| acc.plus(&g.generator.scaled(c)))
}

fn basis_matrix(basis: &[NamedGenerator]) -> DMatrix<f64> {
    DMatrix::from_fn(20, basis.len(), |r, c| basis[c].generator.vectorize()[r])
}

/// Numerical rank of a set of generators (SVD, threshold 1e−8·σ_max).
pub fn generator_rank(basis: &[NamedGenerator]) -> usize {
    if basis.is_empty() {
        return 0;
    }
    let sv = basis_matrix(basis).singular_values();
    let smax = sv.max();
    sv.iter().filter(|&&s| s > 1e-8 * smax).count()
}

/// Largest residual of re-expanding pairwise brackets in the basis.
pub fn closure_residual(basis: &[NamedGenerator]) -> f64 {
    let a = basis_matrix(basis);
    let svd = a.clone().svd(true, true);
    let mut worst: f64 = 0.0;
    for gi in basis {
        for gj in basis {
            let c = gi.generator.bracket(&gj.generator);
            let b = DVector::from_row_slice(&c.vectorize());
            let coeffs = svd.solve(&b, 1e-12).expect("svd computed with u and v");
            let r = (&a * coeffs - &b).amax();
            worst = worst.max(r);
        }
    }
    worst
}

pub fn apply_affine(l: &AffineMap, x: &Event) -> Result<Event> {
    l.model.ensure_same(x.model())?;
    Ok(Event::new(l.model, l.apply_point(&x.coords())))
}

pub fn apply_linear(l: &AffineMap, w: &FourVector) -> Result<FourVector> {
    l.model.ensure_same(w.model())?;
    Ok(FourVector::new(l.model, w.scale(), l.apply_vector(&w.components())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spacetime::{g_inner, minkowski, tau_of, Velocity};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    const NR: ModelKind = ModelKind::NonRelativistic;
    const R: ModelKind = ModelKind::Relativistic;

    fn random_generator(model: ModelKind, rng: &mut ChaCha8Rng) -> Generator {
        let c: [f64; 10] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        combine_basis(model, &c)
    }

    #[test]
    fn translation_series_truncates() {
        let h = Generator::translation(NR, [1.0, 2.0, 0.0, 0.0]);
        let l = exp_generator(&h, 1.0).unwrap();
        assert_eq!(*l.linear(), Matrix4::identity());
        assert_eq!(l.translation(), [1.0, 2.0, 0.0, 0.0]);
        let x = Event::new(NR, [0.5, 0.5, 0.5, 0.5]);
        assert_eq!(apply_affine(&l, &x).unwrap().coords(), [1.5, 2.5, 0.5, 0.5]);
        let w = FourVector::displacement(NR, [1.0, 1.0, 1.0, 1.0]);
        assert_eq!(apply_linear(&l, &w).unwrap(), w);
    }

    #[test]
    fn z_rotation_matches_closed_form() {
        let h = Generator::rotation(NR, 3).unwrap();
        let l = exp_generator(&h, FRAC_PI_2).unwrap();
        let (c, s) = (FRAC_PI_2.cos(), FRAC_PI_2.sin());
        let want = Matrix4::new(1.0, 0.0, 0.0, 0.0, 0.0, c, -s, 0.0, 0.0, s, c, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((l.linear() - want).abs().max() < 1e-13);
    }

    #[test]
    fn rapidity_boost_matches_closed_form() {
        let h = Generator::boost(R, 1).unwrap();
        let l = exp_generator(&h, 0.5).unwrap();
        let (ch, sh) = (0.5f64.cosh(), 0.5f64.sinh());
        let want = Matrix4::new(ch, sh, 0.0, 0.0, sh, ch, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((l.linear() - want).abs().max() < 1e-13);
    }

    #[test]
    fn galilean_boost_is_shear() {
        let h = Generator::boost(NR, 2).unwrap();
        let l = exp_generator(&h, 0.7).unwrap();
        let mut want = Matrix4::identity();
        want[(2, 0)] = 0.7;
        assert!((l.linear() - want).abs().max() < 1e-15);
        let u = Velocity::galilean([0.1, 0.2, 0.3]);
        let lu = l.apply_vector(&u.components());
        assert_relative_eq!(lu[2], 0.9, epsilon = 1e-15);
    }

    #[test]
    fn algebra_violations_are_rejected() {
        let mut m = Matrix4::zeros();
        m[(0, 1)] = 1.0;
        assert!(matches!(Generator::new(NR, m, [0.0; 4]), Err(Error::AlgebraViolation { .. })));
        // a Galilean boost is not in the Lorentz algebra
        let mut m = Matrix4::zeros();
        m[(1, 0)] = 1.0;
        assert!(Generator::new(R, m, [0.0; 4]).is_err());
        assert!(Generator::new(NR, m, [0.0; 4]).is_ok());
    }

    #[test]
    fn membership_examples() {
        assert!(is_member(&AffineMap::identity(NR)));
        assert!(is_member(&AffineMap::identity(R)));
        let reflect = Matrix4::from_diagonal(&Vector4::new(1.0, -1.0, 1.0, 1.0));
        assert!(!is_member(&AffineMap::new(NR, reflect, [0.0; 4])));
        assert!(!is_member(&AffineMap::new(R, reflect, [0.0; 4])));
        let time_flip = Matrix4::from_diagonal(&Vector4::new(-1.0, -1.0, 1.0, 1.0));
        assert!(!is_member(&AffineMap::new(R, time_flip, [0.0; 4])));
        let dilation = Matrix4::identity() * 2.0;
        assert!(!is_member(&AffineMap::new(NR, dilation, [0.0; 4])));
    }

    #[test]
    fn basis_is_ten_dimensional_and_closed() {
        for model in [NR, R] {
            let basis = standard_basis(model);
            assert_eq!(basis.len(), 10);
            for g in &basis {
                assert!(Generator::new(model, g.generator.linear, g.generator.translation).is_ok(), "{}", g.name);
            }
            assert_eq!(generator_rank(&basis), 10);
            assert!(closure_residual(&basis) < 1e-10);
        }
    }

    #[test]
    fn rotation_alone_is_not_closed_with_boost_missing() {
        // [rotation, boost] leaves the span {rotation_3, boost_1}
        let basis = vec![
            NamedGenerator { name: "r".into(), generator: Generator::rotation(R, 3).unwrap() },
            NamedGenerator { name: "b".into(), generator: Generator::boost(R, 1).unwrap() },
        ];
        assert!(closure_residual(&basis) > 0.5);
    }

    #[test]
    fn compose_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for model in [NR, R] {
            let a = exp_generator(&random_generator(model, &mut rng), 1.0).unwrap();
            let inv = a.inverse().unwrap();
            assert!(a.compose(&inv).unwrap().distance(&AffineMap::identity(model)) < 1e-12);
            let x = Event::new(model, [0.3, -1.0, 2.0, 0.5]);
            let y = Event::new(model, [1.3, 0.0, 2.5, -0.5]);
            let lhs = apply_linear(&a, &y.minus(&x).unwrap()).unwrap();
            let rhs = apply_affine(&a, &y).unwrap().minus(&apply_affine(&a, &x).unwrap()).unwrap();
            for i in 0..4 {
                assert_relative_eq!(lhs.components()[i], rhs.components()[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn parse_generator_literals() {
        let g = Generator::parse(NR, "rotation axis=3").unwrap();
        assert_eq!(g, Generator::rotation(NR, 3).unwrap());
        let g = Generator::parse(R, "boost axis = 2").unwrap();
        assert_eq!(g, Generator::boost(R, 2).unwrap());
        let g = Generator::parse(NR, "translation [1s, 0, 0, 0]").unwrap();
        assert_eq!(g.translation_part(), [1.0, 0.0, 0.0, 0.0]);
        let g = Generator::parse(NR, "matrix [[0,0,0,0],[0,0,-1,0],[0,1,0,0],[0,0,0,0]] [0,1m,0,0]").unwrap();
        assert_eq!(g.linear(), Generator::rotation(NR, 3).unwrap().linear());
        assert_eq!(g.translation_part(), [0.0, 1.0, 0.0, 0.0]);
        assert!(Generator::parse(NR, "rotation axis=4").is_err());
        assert!(Generator::parse(NR, "twist axis=1").is_err());
        assert!(Generator::parse(NR, "matrix [[1,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0]]").is_err());
    }

    #[test]
    fn boosted_velocity_stays_in_v1() {
        let u = Velocity::lorentz([0.3, -0.2, 0.1]).unwrap();
        let l = exp_generator(&Generator::boost(R, 1).unwrap(), 1.3).unwrap();
        let lu = apply_linear(&l, u.vector()).unwrap();
        assert!(Velocity::new(lu).is_ok());
        assert_relative_eq!(minkowski(&lu.components(), &lu.components()), -1.0, epsilon = 1e-13);
    }

    #[test]
    fn exponentials_are_members_and_one_parameter_subgroups() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for model in [NR, R] {
            for _ in 0..100 {
                let h = random_generator(model, &mut rng);
                let (s, t) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                let ls = exp_generator(&h, s).unwrap();
                assert!(is_member(&ls), "{:?}", membership(&ls));
                let lst = exp_generator(&h, s + t).unwrap();
                let prod = ls.compose(&exp_generator(&h, t).unwrap()).unwrap();
                assert!(lst.distance(&prod) < 1e-10);
                assert!((ls.linear().determinant() - 1.0).abs() < 1e-10);
                let w: [f64; 4] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
                let lw = ls.apply_vector(&w);
                match model {
                    NR => {
                        let a = tau_of(&FourVector::displacement(model, w)).unwrap().value;
                        let b = tau_of(&FourVector::displacement(model, lw)).unwrap().value;
                        assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
                    }
                    R => {
                        let v = FourVector::displacement(model, w);
                        let a = g_inner(&v, &v).unwrap().value;
                        let lv = FourVector::displacement(model, lw);
                        let b = g_inner(&lv, &lv).unwrap().value;
                        let scale: f64 = w.iter().map(|x| x * x).sum();
                        assert!((a - b).abs() <= 1e-12 * scale.max(1.0) * 10.0);
                    }
                }
            }
        }
    }
}
