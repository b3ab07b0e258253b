//! Lagrangians on the future cone and full time-derivatives.
//!
//! Every Lagrangian is stored by its restriction to V(1) and evaluated through
//! the positively homogeneous extension, so `eval(x, λw) = λ eval(x, w)` holds
//! by construction. The extension uses `n(w) = w⁰` in the non-relativistic
//! model and the Minkowski length `|w|` in the relativistic one.

mod expr;

pub use expr::{Expr, UserExpression};

use nalgebra::Matrix4;
use rayon::prelude::*;

use crate::dual::{lift, Dual, Scalar};
use crate::error::{Error, Result};
use crate::groups::mat_vec;
use crate::quantities::{Dim, Quantity};
use crate::sampling::{sample_points, SamplingConfig};
use crate::spacetime::{euclid_norm, minkowski, Event, FourVector, FutureVector, ModelKind, Velocity};

/// Relativistic vectors with `|w| < NEAR_CONE · ‖w‖` are refused.
pub const NEAR_CONE: f64 = 1e-9;

/// A scalar function of `(x, w)` on raw chart components that can be
/// evaluated over any [`Scalar`], which is what the derivative-based checks
/// need.
pub trait PhaseFunction: Sync {
    fn model(&self) -> ModelKind;
    fn value<S: Scalar>(&self, x: &[S; 4], w: &[S; 4]) -> S;
}

/// Velocity part of a counterexample Lagrangian.
#[derive(Debug, Clone, PartialEq)]
pub enum Phi {
    /// `½ m |u − c|²` on V(1).
    Kinetic { m: f64, c: [f64; 3] },
    /// `m |w|`, relativistic only.
    ProperTime { m: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum LagrangianKind {
    FreeNonRel { m: Quantity, c: Velocity },
    FreeRel { m: Quantity },
    /// `(x − o)ᵀ B w + φ(w)` with antisymmetric `B`.
    CounterexampleB { o: Event, b: Matrix4<f64>, phi: Phi },
    UserExpr(UserExpression),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianSpec {
    model: ModelKind,
    kind: LagrangianKind,
}

fn cone_norm<S: Scalar>(model: ModelKind, w: &[S; 4]) -> S {
    match model {
        ModelKind::NonRelativistic => w[0],
        ModelKind::Relativistic => (w[0] * w[0] - w[1] * w[1] - w[2] * w[2] - w[3] * w[3]).sqrt(),
    }
}

fn kinetic<S: Scalar>(m: f64, c: &[f64; 3], w: &[S; 4]) -> S {
    let mut acc = S::zero();
    for k in 0..3 {
        let d = w[k + 1] - w[0].scale(c[k]);
        acc = acc + d * d;
    }
    (acc / w[0]).scale(0.5 * m)
}

impl LagrangianSpec {
    pub fn free_nonrel(m: Quantity, c: Velocity) -> Result<Self> {
        c.model().ensure(ModelKind::NonRelativistic)?;
        if m.dim != Dim::MASS {
            return Err(Error::DimensionMismatch { lhs: m.dim, rhs: Dim::MASS });
        }
        Ok(LagrangianSpec {
            model: ModelKind::NonRelativistic,
            kind: LagrangianKind::FreeNonRel { m, c },
        })
    }

    /// Accepts the mass either as `1/s` or as `s/m2` (equal after `c = 1`).
    pub fn free_rel(m: Quantity) -> Result<Self> {
        let d = m.dim.collapse_relativistic();
        if d != Dim::PER_SECOND {
            return Err(Error::DimensionMismatch { lhs: m.dim, rhs: Dim::PER_SECOND });
        }
        Ok(LagrangianSpec {
            model: ModelKind::Relativistic,
            kind: LagrangianKind::FreeRel { m: Quantity::new(m.value, d) },
        })
    }

    pub fn counterexample_b(o: Event, b: Matrix4<f64>, phi: Phi) -> Result<Self> {
        let residual = (b + b.transpose()).abs().max();
        if residual != 0.0 {
            return Err(Error::NotAntisymmetric { residual });
        }
        if matches!(phi, Phi::ProperTime { .. }) {
            o.model().ensure(ModelKind::Relativistic)?;
        }
        Ok(LagrangianSpec {
            model: o.model(),
            kind: LagrangianKind::CounterexampleB { o, b, phi },
        })
    }

    /// Lagrangian given by an expression on V(1); it must have dimension 1/s.
    pub fn user_expr(model: ModelKind, src: &str) -> Result<Self> {
        let e = UserExpression::parse(src)?;
        let d = e.dimension(model)?;
        if d != Dim::PER_SECOND {
            return Err(Error::WrongLagrangianDim { found: d });
        }
        Ok(LagrangianSpec { model, kind: LagrangianKind::UserExpr(e) })
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn kind(&self) -> &LagrangianKind {
        &self.kind
    }

    /// Same kind with the mass multiplied by `k`; `None` for user expressions.
    pub fn with_mass_scaled(&self, k: f64) -> Option<Self> {
        let kind = match &self.kind {
            LagrangianKind::FreeNonRel { m, c } => LagrangianKind::FreeNonRel { m: *m * k, c: *c },
            LagrangianKind::FreeRel { m } => LagrangianKind::FreeRel { m: *m * k },
            LagrangianKind::CounterexampleB { o, b, phi } => {
                let phi = match phi {
                    Phi::Kinetic { m, c } => Phi::Kinetic { m: m * k, c: *c },
                    Phi::ProperTime { m } => Phi::ProperTime { m: m * k },
                };
                LagrangianKind::CounterexampleB { o: *o, b: *b, phi }
            }
            LagrangianKind::UserExpr(_) => return None,
        };
        Some(LagrangianSpec { model: self.model, kind })
    }

    fn check_args(&self, x: &Event, w: &FutureVector) -> Result<()> {
        x.model().ensure(self.model)?;
        w.model().ensure(self.model)?;
        check_cone(self.model, &w.components())
    }

    /// `L(x, w)`; the result carries the scale dimension of `w`, so a
    /// velocity gives `1/s` and a displacement a pure number.
    pub fn eval(&self, x: &Event, w: &FutureVector) -> Result<Quantity> {
        self.check_args(x, w)?;
        let v = self.value(&x.coords(), &w.components());
        Ok(Quantity::new(v, w.vector().scale()))
    }

    pub fn grad_x(&self, x: &Event, w: &FutureVector) -> Result<[f64; 4]> {
        self.check_args(x, w)?;
        Ok(self.gradients(&x.coords(), &w.components()).1)
    }

    pub fn grad_w(&self, x: &Event, w: &FutureVector) -> Result<[f64; 4]> {
        self.check_args(x, w)?;
        Ok(self.gradients(&x.coords(), &w.components()).2)
    }

    /// Value, `∂L/∂x` and `∂L/∂w` on raw components, unchecked.
    pub fn gradients(&self, x: &[f64; 4], w: &[f64; 4]) -> (f64, [f64; 4], [f64; 4]) {
        let xs: [Dual<f64, 8>; 4] = std::array::from_fn(|i| Dual::var(x[i], i));
        let ws: [Dual<f64, 8>; 4] = std::array::from_fn(|i| Dual::var(w[i], i + 4));
        let out = self.value(&xs, &ws);
        let gx = std::array::from_fn(|i| out.d[i]);
        let gw = std::array::from_fn(|i| out.d[i + 4]);
        (out.v, gx, gw)
    }
}

impl PhaseFunction for LagrangianSpec {
    fn model(&self) -> ModelKind {
        self.model
    }

    fn value<S: Scalar>(&self, x: &[S; 4], w: &[S; 4]) -> S {
        match &self.kind {
            LagrangianKind::FreeNonRel { m, c } => {
                let c = c.components();
                kinetic(m.value, &[c[1], c[2], c[3]], w)
            }
            LagrangianKind::FreeRel { m } => cone_norm(ModelKind::Relativistic, w).scale(m.value),
            LagrangianKind::CounterexampleB { o, b, phi } => {
                let o = o.coords();
                let d: [S; 4] = std::array::from_fn(|i| x[i] - S::cst(o[i]));
                let bw = mat_vec(b, w);
                let mut acc = S::zero();
                for i in 0..4 {
                    acc = acc + d[i] * bw[i];
                }
                acc + match phi {
                    Phi::Kinetic { m, c } => kinetic(*m, c, w),
                    Phi::ProperTime { m } => cone_norm(ModelKind::Relativistic, w).scale(*m),
                }
            }
            LagrangianKind::UserExpr(e) => {
                let n = cone_norm(self.model, w);
                let u: [S; 4] = std::array::from_fn(|i| w[i] / n);
                e.expr().eval(x, &u) * n
            }
        }
    }
}

/// Refuse vectors outside the cone or too close to its boundary.
pub fn check_cone(model: ModelKind, w: &[f64; 4]) -> Result<()> {
    let n = euclid_norm(w);
    let ok = n.is_finite()
        && n > 0.0
        && match model {
            ModelKind::NonRelativistic => w[0] > 0.0,
            ModelKind::Relativistic => w[0] > 0.0 && (-minkowski(w, w)).max(0.0).sqrt() >= NEAR_CONE * n,
        };
    if ok {
        Ok(())
    } else {
        Err(Error::NotFutureLike { components: *w })
    }
}

pub fn eval(l: &LagrangianSpec, x: &Event, w: &FutureVector) -> Result<Quantity> {
    l.eval(x, w)
}

pub fn grad_x(l: &LagrangianSpec, x: &Event, w: &FutureVector) -> Result<[f64; 4]> {
    l.grad_x(x, w)
}

pub fn grad_w(l: &LagrangianSpec, x: &Event, w: &FutureVector) -> Result<[f64; 4]> {
    l.grad_w(x, w)
}

/// `f(x, w) = Dφ(x)·w` for the potential
/// `φ(x) = k·(x − o) + ½ (x − o)ᵀ S (x − o)` with symmetric `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullTimeDerivative {
    model: ModelKind,
    o: [f64; 4],
    k: [f64; 4],
    s: Matrix4<f64>,
}

impl FullTimeDerivative {
    pub fn new(model: ModelKind, o: [f64; 4], k: [f64; 4], s: Matrix4<f64>) -> Result<Self> {
        let residual = (s - s.transpose()).abs().max();
        if residual > 0.0 {
            return Err(Error::InvalidPath(format!("potential Hessian is not symmetric ({residual:e})")));
        }
        Ok(FullTimeDerivative { model, o, k, s })
    }

    /// `f(x, w) = k·w`.
    pub fn constant(model: ModelKind, k: [f64; 4]) -> Self {
        FullTimeDerivative { model, o: [0.0; 4], k, s: Matrix4::zeros() }
    }

    pub fn potential<S: Scalar>(&self, x: &[S; 4]) -> S {
        let d: [S; 4] = std::array::from_fn(|i| x[i] - S::cst(self.o[i]));
        let sd = mat_vec(&self.s, &d);
        let mut acc = S::zero();
        for i in 0..4 {
            acc = acc + d[i].scale(self.k[i]) + (d[i] * sd[i]).scale(0.5);
        }
        acc
    }

    /// `Dφ(x)` on raw components.
    pub fn gradient(&self, x: &[f64; 4]) -> [f64; 4] {
        let d: [f64; 4] = std::array::from_fn(|i| x[i] - self.o[i]);
        let sd = mat_vec(&self.s, &d);
        std::array::from_fn(|i| self.k[i] + sd[i])
    }
}

impl PhaseFunction for FullTimeDerivative {
    fn model(&self) -> ModelKind {
        self.model
    }

    fn value<S: Scalar>(&self, x: &[S; 4], w: &[S; 4]) -> S {
        // directional derivative of φ along w
        let xe: [Dual<S, 1>; 4] = std::array::from_fn(|i| Dual { v: x[i], d: [w[i]] });
        self.potential(&xe).d[0]
    }
}

/// `f(x, w) = (x − o)ᵀ M w` for an arbitrary matrix `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearForm {
    pub model: ModelKind,
    pub o: [f64; 4],
    pub m: Matrix4<f64>,
}

impl PhaseFunction for BilinearForm {
    fn model(&self) -> ModelKind {
        self.model
    }

    fn value<S: Scalar>(&self, x: &[S; 4], w: &[S; 4]) -> S {
        let mw = mat_vec(&self.m, w);
        let mut acc = S::zero();
        for i in 0..4 {
            acc = acc + (x[i] - S::cst(self.o[i])) * mw[i];
        }
        acc
    }
}

/// `a(x, w) − b(x, w)`.
pub struct Difference<'a, A, B> {
    pub a: &'a A,
    pub b: &'a B,
}

impl<A: PhaseFunction, B: PhaseFunction> PhaseFunction for Difference<'_, A, B> {
    fn model(&self) -> ModelKind {
        self.a.model()
    }

    fn value<S: Scalar>(&self, x: &[S; 4], w: &[S; 4]) -> S {
        self.a.value(x, w) - self.b.value(x, w)
    }
}

/// `a(x) = ∇_w f(x, ·)` at sample points.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Witness {
    pub points: Vec<[f64; 4]>,
    pub gradients: Vec<[f64; 4]>,
}

impl Witness {
    /// Largest Euclidean norm of `a(x)` over the samples.
    pub fn norm(&self) -> f64 {
        self.gradients.iter().map(euclid_norm).fold(0.0, f64::max)
    }

    /// Largest component-wise spread of `a(x)` across samples.
    pub fn spread(&self) -> f64 {
        let Some(first) = self.gradients.first() else { return 0.0 };
        self.gradients
            .iter()
            .flat_map(|a| (0..4).map(move |i| (a[i] - first[i]).abs()))
            .fold(0.0, f64::max)
    }
}

/// Gradient of `f` with respect to `w` at `x`, evaluated at `w`.
pub fn witness_at<F: PhaseFunction>(f: &F, x: &[f64; 4], w: &[f64; 4]) -> [f64; 4] {
    let xs: [Dual<f64, 4>; 4] = lift(x);
    let ws: [Dual<f64, 4>; 4] = std::array::from_fn(|i| Dual::var(w[i], i));
    f.value(&xs, &ws).d
}

/// Residuals of the full-time-derivative test on a sampling box.
#[derive(Debug, Clone, PartialEq)]
pub struct FtdAnalysis {
    /// Max `|f(αw₁+βw₂) − αf(w₁) − βf(w₂)|`, relative to `scale`.
    pub lin_residual: f64,
    /// Max `|∂aᵢ/∂xʲ − ∂aⱼ/∂xⁱ|·R·W`, relative to `scale`.
    pub curl_residual: f64,
    /// Max `|f|` over the samples, relative to `scale`.
    pub exactness: f64,
    pub max_abs: f64,
    pub scale: f64,
    pub worst_point: [f64; 4],
    pub worst_velocity: [f64; 4],
    pub witness: Witness,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub lin_residual: f64,
    pub curl_residual: f64,
    pub worst_point: [f64; 4],
    pub worst_velocity: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub enum FtdOutcome {
    Yes(Witness),
    No(Violation),
}

impl FtdOutcome {
    pub fn is_yes(&self) -> bool {
        matches!(self, FtdOutcome::Yes(_))
    }
}

impl FtdAnalysis {
    pub fn passes(&self) -> bool {
        self.passes_at(self.tol)
    }

    pub fn passes_at(&self, tol: f64) -> bool {
        self.lin_residual <= tol && self.curl_residual <= tol
    }

    pub fn outcome(self) -> FtdOutcome {
        if self.passes() {
            FtdOutcome::Yes(self.witness)
        } else {
            FtdOutcome::No(Violation {
                lin_residual: self.lin_residual,
                curl_residual: self.curl_residual,
                worst_point: self.worst_point,
                worst_velocity: self.worst_velocity,
            })
        }
    }
}

struct PointStats {
    max_abs: f64,
    lin: f64,
    curl: f64,
    worst_w: [f64; 4],
    wnorm: f64,
    a: [f64; 4],
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

type Nested4 = Dual<Dual<f64, 4>, 4>;

fn point_stats<F: PhaseFunction>(f: &F, x: &[f64; 4], dirs: &[[f64; 4]], coeffs: &[(f64, f64)]) -> PointStats {
    let n = dirs.len();
    let vals: Vec<f64> = dirs.iter().map(|w| f.value(x, w)).collect();
    let mut st = PointStats { max_abs: 0.0, lin: 0.0, curl: 0.0, worst_w: dirs[0], wnorm: 0.0, a: [0.0; 4] };
    for j in 0..n {
        st.max_abs = st.max_abs.max(finite_or_inf(vals[j].abs()));
        st.wnorm = st.wnorm.max(euclid_norm(&dirs[j]));
        let k = (j + 1) % n;
        let (al, be) = coeffs[j];
        let mix: [f64; 4] = std::array::from_fn(|i| al * dirs[j][i] + be * dirs[k][i]);
        let r = finite_or_inf((f.value(x, &mix) - al * vals[j] - be * vals[k]).abs());
        if r > st.lin {
            st.lin = r;
            st.worst_w = mix;
        }
    }
    // outer level differentiates in x, inner level in w
    let xs: [Nested4; 4] = std::array::from_fn(|j| {
        let mut d = [Dual::constant(0.0); 4];
        d[j] = Dual::constant(1.0);
        Dual { v: Dual::constant(x[j]), d }
    });
    let ws: [Nested4; 4] = std::array::from_fn(|i| Dual::constant(Dual::var(dirs[0][i], i)));
    let out = f.value(&xs, &ws);
    st.a = out.v.d;
    for i in 0..4 {
        for j in 0..i {
            let r = finite_or_inf((out.d[j].d[i] - out.d[i].d[j]).abs());
            st.curl = st.curl.max(r);
        }
    }
    st
}

/// Sample `f` on the box of `cfg` and measure linearity in `w` and the curl
/// of `a(x) = ∇_w f`. Residuals are divided by `scale`, which defaults to the
/// largest sampled `|f|`.
pub fn ftd_analysis<F: PhaseFunction>(f: &F, cfg: &SamplingConfig, scale: Option<f64>) -> Result<FtdAnalysis> {
    let pts = sample_points(f.model(), cfg)?;
    let stats: Vec<PointStats> = pts.par_iter().map(|p| point_stats(f, &p.x, &p.dirs, &p.coeffs)).collect();

    let max_abs = stats.iter().map(|s| s.max_abs).fold(0.0, f64::max);
    let wmax = stats.iter().map(|s| s.wnorm).fold(0.0, f64::max);
    let scale = scale.unwrap_or(max_abs);
    let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
    let reach = cfg.half_width * wmax / scale;

    let mut worst = 0;
    let mut worst_r = -1.0;
    let mut lin: f64 = 0.0;
    let mut curl: f64 = 0.0;
    for (i, s) in stats.iter().enumerate() {
        let (l, c) = (s.lin / scale, s.curl * reach);
        lin = lin.max(l);
        curl = curl.max(c);
        if l.max(c) > worst_r {
            worst_r = l.max(c);
            worst = i;
        }
    }
    Ok(FtdAnalysis {
        lin_residual: lin,
        curl_residual: curl,
        exactness: max_abs / scale,
        max_abs,
        scale,
        worst_point: pts[worst].x,
        worst_velocity: stats[worst].worst_w,
        witness: Witness {
            points: pts.iter().map(|p| p.x).collect(),
            gradients: stats.iter().map(|s| s.a).collect(),
        },
        samples: pts.len(),
        seed: cfg.seed,
        tol: cfg.tol,
    })
}

pub fn is_full_time_derivative<F: PhaseFunction>(f: &F, cfg: &SamplingConfig) -> Result<FtdOutcome> {
    Ok(ftd_analysis(f, cfg, None)?.outcome())
}

/// Largest `|L|` over the sampling box.
pub fn lagrangian_scale<F: PhaseFunction>(l: &F, cfg: &SamplingConfig) -> Result<f64> {
    let pts = sample_points(l.model(), cfg)?;
    Ok(pts
        .par_iter()
        .map(|p| p.dirs.iter().map(|w| finite_or_inf(l.value(&p.x, w).abs())).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max))
}

/// Full-time-derivative analysis of `l2 − l1`, scaled by the larger of the
/// two Lagrangians.
pub fn equivalence_analysis(l1: &LagrangianSpec, l2: &LagrangianSpec, cfg: &SamplingConfig) -> Result<FtdAnalysis> {
    l1.model.ensure_same(l2.model)?;
    let scale = lagrangian_scale(l1, cfg)?.max(lagrangian_scale(l2, cfg)?);
    ftd_analysis(&Difference { a: l2, b: l1 }, cfg, Some(scale))
}

pub fn are_equivalent(l1: &LagrangianSpec, l2: &LagrangianSpec, cfg: &SamplingConfig) -> Result<bool> {
    Ok(equivalence_analysis(l1, l2, cfg)?.passes())
}

/// Chart vector `w` as a typed future-like velocity-scale vector.
pub fn future(model: ModelKind, w: [f64; 4]) -> Result<FutureVector> {
    FutureVector::new(FourVector::new(model, Dim::PER_SECOND, w))
}
