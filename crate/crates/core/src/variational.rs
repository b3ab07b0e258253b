//! Discretized fixed-endpoint actions and their stationary points.
//!
//! A path is a list of nodes over a parameter grid; the action uses the
//! midpoint rule `Σ L(midᵢ, chordᵢ/Δsᵢ) Δsᵢ`. Because every Lagrangian is
//! evaluated through its homogeneous extension, the discrete action does not
//! depend on the parameter grid at all.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dual::{gradient, hessian, Scalar};
use crate::error::{Error, Result};
use crate::groups::AffineMap;
use crate::lagrangians::{check_cone, LagrangianSpec, PhaseFunction};
use crate::linalg::Banded;
use crate::quantities::Quantity;
use crate::spacetime::{euclid_norm, minkowski, Event, ModelKind};

pub const DEFAULT_N: usize = 200;
pub const MIN_N: usize = 8;
/// Weight of the uniform-chord gauge penalty.
pub const GAUGE_PENALTY: f64 = 1e3;

#[derive(Debug, Clone, PartialEq)]
pub struct WorldPath {
    model: ModelKind,
    nodes: Vec<[f64; 4]>,
    params: Vec<f64>,
}

fn uniform_params(n_nodes: usize) -> Vec<f64> {
    let n = (n_nodes - 1) as f64;
    (0..n_nodes).map(|i| i as f64 / n).collect()
}

fn chord(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    std::array::from_fn(|i| b[i] - a[i])
}

fn validate_chords(model: ModelKind, nodes: &[[f64; 4]]) -> Result<()> {
    for (i, w) in nodes.windows(2).enumerate() {
        if check_cone(model, &chord(&w[0], &w[1])).is_err() {
            return Err(Error::ChordNotFutureLike { index: i });
        }
    }
    Ok(())
}

impl WorldPath {
    /// Nodes on the uniform grid `sᵢ = i/N`.
    pub fn new(model: ModelKind, nodes: Vec<[f64; 4]>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidPath(format!("{} nodes, need at least 2", nodes.len())));
        }
        let params = uniform_params(nodes.len());
        WorldPath::with_params(model, nodes, params)
    }

    pub fn with_params(model: ModelKind, nodes: Vec<[f64; 4]>, params: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || params.len() != nodes.len() {
            return Err(Error::InvalidPath(format!("{} nodes with {} parameters", nodes.len(), params.len())));
        }
        if !params.iter().all(|s| s.is_finite()) || params.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPath("parameters must be finite and strictly increasing".into()));
        }
        if !nodes.iter().flatten().all(|c| c.is_finite()) {
            return Err(Error::InvalidPath("non-finite node coordinate".into()));
        }
        validate_chords(model, &nodes)?;
        Ok(WorldPath { model, nodes, params })
    }

    pub fn from_events(events: &[Event]) -> Result<Self> {
        let model = events.first().ok_or_else(|| Error::InvalidPath("empty path".into()))?.model();
        for e in events {
            e.model().ensure(model)?;
        }
        WorldPath::new(model, events.iter().map(|e| e.coords()).collect())
    }

    /// `N` equal segments from `x0` to `x1`.
    pub fn straight(x0: &Event, x1: &Event, n: usize) -> Result<Self> {
        x0.model().ensure_same(x1.model())?;
        if n == 0 {
            return Err(Error::InvalidPath("need at least one segment".into()));
        }
        let (a, b) = (x0.coords(), x1.coords());
        let nodes = (0..=n)
            .map(|i| {
                let s = i as f64 / n as f64;
                std::array::from_fn(|k| a[k] + s * (b[k] - a[k]))
            })
            .collect();
        WorldPath::new(x0.model(), nodes)
    }

    /// Same nodes over another strictly increasing parameter grid.
    pub fn remap(&self, params: Vec<f64>) -> Result<Self> {
        WorldPath::with_params(self.model, self.nodes.clone(), params)
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn nodes(&self) -> &[[f64; 4]] {
        &self.nodes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn segments(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn event(&self, i: usize) -> Event {
        Event::new(self.model, self.nodes[i])
    }

    pub fn chord(&self, i: usize) -> [f64; 4] {
        chord(&self.nodes[i], &self.nodes[i + 1])
    }

    pub fn transformed(&self, f: &AffineMap) -> Result<Self> {
        self.model.ensure_same(f.model())?;
        let nodes = self.nodes.iter().map(|x| f.apply_point(x)).collect();
        WorldPath::with_params(self.model, nodes, self.params.clone())
    }

    /// Chords scaled to V(1): `c/c⁰` or `c/|c|`.
    pub fn unit_velocities(&self) -> Vec<[f64; 4]> {
        (0..self.segments())
            .map(|i| {
                let c = self.chord(i);
                let n = match self.model {
                    ModelKind::NonRelativistic => c[0],
                    ModelKind::Relativistic => (-minkowski(&c, &c)).sqrt(),
                };
                c.map(|v| v / n)
            })
            .collect()
    }

    /// Largest Euclidean chart distance of a node from the straight segment
    /// between the endpoints.
    pub fn max_deviation_from_chord(&self) -> f64 {
        let (a, b) = (self.nodes[0], self.nodes[self.segments()]);
        self.nodes.iter().map(|p| point_segment_distance(p, &a, &b)).fold(0.0, f64::max)
    }

    pub fn max_node_distance(&self, other: &WorldPath) -> f64 {
        assert_eq!(self.nodes.len(), other.nodes.len(), "paths with different node counts");
        self.nodes
            .iter()
            .zip(&other.nodes)
            .map(|(p, q)| euclid_norm(&chord(p, q)))
            .fold(0.0, f64::max)
    }

    /// Hausdorff distance between the two polylines, measured at nodes.
    pub fn polyline_distance(&self, other: &WorldPath) -> f64 {
        fn one_way(p: &WorldPath, q: &WorldPath) -> f64 {
            p.nodes
                .iter()
                .map(|x| {
                    q.nodes
                        .windows(2)
                        .map(|w| point_segment_distance(x, &w[0], &w[1]))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(0.0, f64::max)
        }
        one_way(self, other).max(one_way(other, self))
    }

    /// `n` segments of equal Euclidean chart length along the polyline.
    pub fn resample_arclength(&self, n: usize) -> Result<WorldPath> {
        let mut cum = vec![0.0];
        for i in 0..self.segments() {
            let l = cum[i] + euclid_norm(&self.chord(i));
            cum.push(l);
        }
        let total = cum[self.segments()];
        let mut nodes = Vec::with_capacity(n + 1);
        let mut seg = 0;
        for k in 0..=n {
            let target = total * k as f64 / n as f64;
            while seg + 1 < self.segments() && cum[seg + 1] < target {
                seg += 1;
            }
            let len = cum[seg + 1] - cum[seg];
            let t = if len > 0.0 { ((target - cum[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
            let (a, b) = (self.nodes[seg], self.nodes[seg + 1]);
            nodes.push(std::array::from_fn(|i| a[i] + t * (b[i] - a[i])));
        }
        nodes[n] = self.nodes[self.segments()];
        WorldPath::new(self.model, nodes)
    }
}

fn point_segment_distance(p: &[f64; 4], a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let ab = chord(a, b);
    let ap = chord(a, p);
    let l2: f64 = ab.iter().map(|v| v * v).sum();
    let t = if l2 > 0.0 { (0..4).map(|i| ap[i] * ab[i]).sum::<f64>() / l2 } else { 0.0 };
    let t = t.clamp(0.0, 1.0);
    let d: [f64; 4] = std::array::from_fn(|i| ap[i] - t * ab[i]);
    euclid_norm(&d)
}

fn segment_value<F: PhaseFunction, S: Scalar>(l: &F, a: &[S; 4], b: &[S; 4], ds: f64) -> S {
    let mid: [S; 4] = std::array::from_fn(|i| (a[i] + b[i]).scale(0.5));
    let v: [S; 4] = std::array::from_fn(|i| (b[i] - a[i]) / S::cst(ds));
    l.value(&mid, &v) * S::cst(ds)
}

fn split8<S: Copy>(z: &[S; 8]) -> ([S; 4], [S; 4]) {
    (std::array::from_fn(|i| z[i]), std::array::from_fn(|i| z[i + 4]))
}

fn join8(a: &[f64; 4], b: &[f64; 4]) -> [f64; 8] {
    std::array::from_fn(|i| if i < 4 { a[i] } else { b[i - 4] })
}

fn check_path(l: &LagrangianSpec, p: &WorldPath) -> Result<()> {
    l.model().ensure_same(p.model)?;
    validate_chords(p.model, &p.nodes)
}

pub fn action(l: &LagrangianSpec, p: &WorldPath) -> Result<f64> {
    check_path(l, p)?;
    Ok((0..p.segments())
        .map(|i| segment_value(l, &p.nodes[i], &p.nodes[i + 1], p.params[i + 1] - p.params[i]))
        .sum())
}

/// Exact derivative of the discrete action with respect to the interior
/// nodes, all four components.
pub fn action_gradient(l: &LagrangianSpec, p: &WorldPath) -> Result<Vec<[f64; 4]>> {
    check_path(l, p)?;
    let n = p.segments();
    let mut g = vec![[0.0; 4]; n - 1];
    for j in 0..n {
        let ds = p.params[j + 1] - p.params[j];
        let (_, g8) = gradient(
            |z| {
                let (a, b) = split8(z);
                segment_value(l, &a, &b, ds)
            },
            &join8(&p.nodes[j], &p.nodes[j + 1]),
        );
        scatter_gradient(&mut g, j, n, &g8);
    }
    Ok(g)
}

fn scatter_gradient(g: &mut [[f64; 4]], j: usize, n: usize, g8: &[f64; 8]) {
    if j >= 1 {
        for k in 0..4 {
            g[j - 1][k] += g8[k];
        }
    }
    if j + 1 < n {
        for k in 0..4 {
            g[j][k] += g8[k + 4];
        }
    }
}

/// Components that the solver varies: spatial ones in the non-relativistic
/// model (node times stay on the grid), all four in the relativistic one.
fn varied(model: ModelKind) -> std::ops::Range<usize> {
    match model {
        ModelKind::NonRelativistic => 1..4,
        ModelKind::Relativistic => 0..4,
    }
}

/// Discrete Euler–Lagrange residual per interior node:
/// `‖∂S/∂pᵢ‖ / Δ̄sᵢ`, which is
/// `½(Δs₋ ∂ₓL₋ + Δs₊ ∂ₓL₊) − (∂_wL₊ − ∂_wL₋)` over the mean spacing.
pub fn el_residual(l: &LagrangianSpec, p: &WorldPath) -> Result<Vec<f64>> {
    let g = action_gradient(l, p)?;
    Ok(g.iter()
        .enumerate()
        .map(|(i, gi)| {
            let ds = 0.5 * (p.params[i + 2] - p.params[i]);
            varied(p.model).map(|k| gi[k] * gi[k]).sum::<f64>().sqrt() / ds
        })
        .collect())
}

/// `∂L/∂w` at each segment's midpoint and chord velocity.
pub fn momentum_series(l: &LagrangianSpec, p: &WorldPath) -> Result<Vec<[f64; 4]>> {
    check_path(l, p)?;
    Ok((0..p.segments())
        .map(|i| {
            let (a, b) = (p.nodes[i], p.nodes[i + 1]);
            let ds = p.params[i + 1] - p.params[i];
            let mid = std::array::from_fn(|k| 0.5 * (a[k] + b[k]));
            let v = std::array::from_fn(|k| (b[k] - a[k]) / ds);
            l.gradients(&mid, &v).2
        })
        .collect())
}

/// Max pairwise distance of the momenta relative to their mean norm.
pub fn momentum_deviation(series: &[[f64; 4]]) -> f64 {
    let mean = series.iter().map(euclid_norm).sum::<f64>() / series.len().max(1) as f64;
    let mut dev: f64 = 0.0;
    for (i, a) in series.iter().enumerate() {
        for b in &series[..i] {
            dev = dev.max(euclid_norm(&chord(a, b)));
        }
    }
    if mean > 0.0 {
        dev / mean
    } else {
        dev
    }
}

/// `Σ √(−g(chordᵢ, chordᵢ))`.
pub fn proper_time(p: &WorldPath) -> Result<Quantity> {
    p.model.ensure(ModelKind::Relativistic)?;
    validate_chords(p.model, &p.nodes)?;
    let t = (0..p.segments())
        .map(|i| {
            let c = p.chord(i);
            (-minkowski(&c, &c)).sqrt()
        })
        .sum();
    Ok(Quantity::seconds(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GaugeOption {
    /// Penalty `μ Σ (|chordᵢ| − mean)²`.
    #[default]
    UniformChord,
    /// Newton steps restricted to the complement of each node's tangent.
    Projection,
}

impl fmt::Display for GaugeOption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GaugeOption::UniformChord => write!(f, "uniform-chord"),
            GaugeOption::Projection => write!(f, "projection"),
        }
    }
}

impl FromStr for GaugeOption {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "uniform-chord" | "uniform_chord" | "penalty" | "a" => Ok(GaugeOption::UniformChord),
            "projection" | "b" => Ok(GaugeOption::Projection),
            other => Err(Error::parse(format!("unknown gauge '{other}' (expected uniform-chord|projection)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub n: usize,
    pub gauge: GaugeOption,
    pub max_iter: usize,
    /// Stop when the gauge-fixed gradient is below `tol · (1 + |S|)`.
    pub tol: f64,
    pub penalty: f64,
    pub fallback_iters: usize,
    /// Amplitude of a smooth random bump added to the initial straight
    /// chord, relative to the endpoint distance.
    pub perturbation: f64,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            n: DEFAULT_N,
            gauge: GaugeOption::UniformChord,
            max_iter: 100,
            tol: 1e-9,
            penalty: GAUGE_PENALTY,
            fallback_iters: 50,
            perturbation: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionReport {
    pub action: f64,
    /// `‖∂S‖` over the components the solver varies.
    pub gradient_norm: f64,
    pub el_residuals: Vec<f64>,
    pub momenta: Vec<[f64; 4]>,
    pub momentum_deviation: f64,
    pub proper_time: Option<f64>,
    pub iterations: usize,
    pub residual_trace: Vec<f64>,
}

impl ActionReport {
    pub fn max_el_residual(&self) -> f64 {
        self.el_residuals.iter().copied().fold(0.0, f64::max)
    }
}

pub fn action_report(l: &LagrangianSpec, p: &WorldPath) -> Result<ActionReport> {
    let g = action_gradient(l, p)?;
    let gradient_norm = g.iter().flat_map(|gi| varied(p.model).map(move |k| gi[k] * gi[k])).sum::<f64>().sqrt();
    let momenta = momentum_series(l, p)?;
    Ok(ActionReport {
        action: action(l, p)?,
        gradient_norm,
        el_residuals: el_residual(l, p)?,
        momentum_deviation: momentum_deviation(&momenta),
        momenta,
        proper_time: match p.model {
            ModelKind::Relativistic => Some(proper_time(p)?.value),
            ModelKind::NonRelativistic => None,
        },
        iterations: 0,
        residual_trace: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub path: WorldPath,
    pub report: ActionReport,
}

fn chord_length<S: Scalar>(c: &[S; 4]) -> S {
    (c[0] * c[0] - c[1] * c[1] - c[2] * c[2] - c[3] * c[3]).sqrt()
}

/// Segment action plus the frozen-mean gauge penalty `μ(|c| − m̄)²`.
fn penalized_segment<F: PhaseFunction, S: Scalar>(l: &F, z: &[S; 8], ds: f64, pen: Option<(f64, f64)>) -> S {
    let (a, b) = split8(z);
    let mut v = segment_value(l, &a, &b, ds);
    if let Some((mu, m)) = pen {
        let c: [S; 4] = std::array::from_fn(|i| b[i] - a[i]);
        let d = chord_length(&c) - S::cst(m);
        v = v + (d * d).scale(mu);
    }
    v
}

struct Assembly {
    action: f64,
    /// `∂F/∂pᵢ` on interior nodes.
    grad: Vec<[f64; 4]>,
    diag: Vec<Matrix4<f64>>,
    off: Vec<Matrix4<f64>>,
    /// Rank-one correction `−β u uᵀ` of the penalty Hessian.
    u: Vec<[f64; 4]>,
    beta: f64,
}

struct Problem<'a> {
    l: &'a LagrangianSpec,
    model: ModelKind,
    params: Vec<f64>,
    penalty: Option<f64>,
    gauge: GaugeOption,
}

impl Problem<'_> {
    fn assemble(&self, nodes: &[[f64; 4]], with_hessian: bool) -> Option<Assembly> {
        if validate_chords(self.model, nodes).is_err() {
            return None;
        }
        let n = nodes.len() - 1;
        let mean = self.penalty.map(|_| {
            (0..n).map(|j| chord_length(&chord(&nodes[j], &nodes[j + 1]))).sum::<f64>() / n as f64
        });
        let mu = self.penalty.unwrap_or(0.0);
        let mut asm = Assembly {
            action: 0.0,
            grad: vec![[0.0; 4]; n - 1],
            diag: vec![Matrix4::zeros(); if with_hessian { n - 1 } else { 0 }],
            off: vec![Matrix4::zeros(); if with_hessian { n.saturating_sub(2) } else { 0 }],
            u: vec![[0.0; 4]; if mean.is_some() { n - 1 } else { 0 }],
            beta: 2.0 * mu / n as f64,
        };
        for j in 0..n {
            let ds = self.params[j + 1] - self.params[j];
            let (a, b) = (&nodes[j], &nodes[j + 1]);
            asm.action += segment_value(self.l, a, b, ds);
            let z = join8(a, b);
            let pen = mean.map(|m| (mu, m));
            let g8 = if with_hessian {
                let (_, g8, h) = hessian(|z| penalized_segment(self.l, z, ds, pen), &z);
                let blk = |r: usize, c: usize| Matrix4::from_fn(|i, k| h[r + i][c + k]);
                if j >= 1 {
                    asm.diag[j - 1] += blk(0, 0);
                }
                if j + 1 < n {
                    asm.diag[j] += blk(4, 4);
                }
                if j >= 1 && j + 1 < n {
                    asm.off[j - 1] += blk(0, 4);
                }
                g8
            } else {
                gradient(|z| penalized_segment(self.l, z, ds, pen), &z).1
            };
            scatter_gradient(&mut asm.grad, j, n, &g8);
            if mean.is_some() {
                let c = chord(a, b);
                let len = chord_length(&c);
                let dn = [c[0] / len, -c[1] / len, -c[2] / len, -c[3] / len];
                scatter_gradient(&mut asm.u, j, n, &join8(&dn.map(|v| -v), &dn));
            }
        }
        Some(asm)
    }

    /// Per-node 4×d bases of the varied directions.
    fn frames(&self, nodes: &[[f64; 4]]) -> Vec<DMatrix<f64>> {
        let n = nodes.len() - 1;
        (1..n)
            .map(|i| match (self.model, self.gauge) {
                (ModelKind::NonRelativistic, _) => DMatrix::from_fn(4, 3, |r, c| if r == c + 1 { 1.0 } else { 0.0 }),
                (ModelKind::Relativistic, GaugeOption::UniformChord) => DMatrix::identity(4, 4),
                (ModelKind::Relativistic, GaugeOption::Projection) => {
                    tangent_complement(&chord(&nodes[i - 1], &nodes[i + 1]))
                }
            })
            .collect()
    }

    fn reduce(frames: &[DMatrix<f64>], v: &[[f64; 4]]) -> Vec<f64> {
        frames
            .iter()
            .zip(v)
            .flat_map(|(e, vi)| (0..e.ncols()).map(move |c| (0..4).map(|r| e[(r, c)] * vi[r]).sum::<f64>()))
            .collect()
    }

    fn band(frames: &[DMatrix<f64>], asm: &Assembly) -> Banded {
        let d = frames[0].ncols();
        let m = frames.len();
        let mut a = Banded::zeros(m * d, 2 * d - 1, 2 * d - 1);
        let to_dm = |x: &Matrix4<f64>| DMatrix::from_fn(4, 4, |r, c| x[(r, c)]);
        for i in 0..m {
            let r = frames[i].transpose() * to_dm(&asm.diag[i]) * &frames[i];
            for p in 0..d {
                for q in 0..d {
                    a.add(i * d + p, i * d + q, r[(p, q)]);
                }
            }
            if i + 1 < m {
                let r = frames[i].transpose() * to_dm(&asm.off[i]) * &frames[i + 1];
                for p in 0..d {
                    for q in 0..d {
                        a.add(i * d + p, (i + 1) * d + q, r[(p, q)]);
                        a.add((i + 1) * d + q, i * d + p, r[(p, q)]);
                    }
                }
            }
        }
        a
    }

    fn apply_step(frames: &[DMatrix<f64>], nodes: &[[f64; 4]], step: &[f64], alpha: f64) -> Vec<[f64; 4]> {
        let mut out = nodes.to_vec();
        let mut off = 0;
        for (i, e) in frames.iter().enumerate() {
            for c in 0..e.ncols() {
                for r in 0..4 {
                    out[i + 1][r] += alpha * e[(r, c)] * step[off + c];
                }
            }
            off += e.ncols();
        }
        out
    }

    /// Gauge-fixed gradient at `nodes`.
    fn reduced_gradient(&self, nodes: &[[f64; 4]]) -> Option<(f64, Vec<f64>)> {
        let asm = self.assemble(nodes, false)?;
        Some((asm.action, Self::reduce(&self.frames(nodes), &asm.grad)))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal basis (4×3) of the Euclidean complement of `t`.
fn tangent_complement(t: &[f64; 4]) -> DMatrix<f64> {
    let tn = euclid_norm(t);
    let mut basis: Vec<[f64; 4]> = vec![t.map(|v| v / tn)];
    let mut used = [false; 4];
    while basis.len() < 4 {
        // the axis with the largest residual after projection
        let mut best = (0, -1.0, [0.0; 4]);
        for k in (0..4).filter(|&k| !used[k]) {
            let mut v = [0.0; 4];
            v[k] = 1.0;
            for _ in 0..2 {
                for b in &basis {
                    let p: f64 = (0..4).map(|i| v[i] * b[i]).sum();
                    for i in 0..4 {
                        v[i] -= p * b[i];
                    }
                }
            }
            let r = euclid_norm(&v);
            if r > best.1 {
                best = (k, r, v);
            }
        }
        used[best.0] = true;
        basis.push(best.2.map(|v| v / best.1));
    }
    DMatrix::from_fn(4, 3, |r, c| basis[c + 1][r])
}

fn initial_guess(x0: &Event, x1: &Event, opts: &SolveOptions) -> Result<Vec<[f64; 4]>> {
    let straight = WorldPath::straight(x0, x1, opts.n)?;
    if opts.perturbation == 0.0 {
        return Ok(straight.nodes);
    }
    let model = x0.model();
    let dist = euclid_norm(&chord(&x0.coords(), &x1.coords()));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut dir = || -> [f64; 4] {
        let mut d: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        if model == ModelKind::NonRelativistic {
            d[0] = 0.0;
        }
        d
    };
    let (d1, d2) = (dir(), dir());
    let mut amp = opts.perturbation * dist;
    for _ in 0..30 {
        let nodes: Vec<[f64; 4]> = straight
            .nodes
            .iter()
            .zip(&straight.params)
            .map(|(p, &s)| {
                let (b1, b2) = ((std::f64::consts::PI * s).sin(), (2.0 * std::f64::consts::PI * s).sin());
                std::array::from_fn(|k| p[k] + amp * (b1 * d1[k] + 0.5 * b2 * d2[k]))
            })
            .collect();
        if validate_chords(model, &nodes).is_ok() {
            return Ok(nodes);
        }
        amp *= 0.5;
    }
    Ok(straight.nodes)
}

/// Newton direction for `∇F = 0`, including the rank-one penalty term by
/// Sherman–Morrison. Also returns the unfactored band for Hessian products.
fn newton_direction(frames: &[DMatrix<f64>], asm: &Assembly, g: &[f64]) -> (Banded, Vec<f64>, Option<Vec<f64>>) {
    let a = Problem::band(frames, asm);
    let u = if asm.u.is_empty() { Vec::new() } else { Problem::reduce(frames, &asm.u) };
    let mut rhs = vec![g.to_vec()];
    if !u.is_empty() {
        rhs.push(u.clone());
    }
    let step = a.clone().solve(&mut rhs).and_then(|_| {
        let mut x = rhs[0].clone();
        if !u.is_empty() {
            let (ag, au) = (&rhs[0], &rhs[1]);
            let den = 1.0 - asm.beta * dot(&u, au);
            if den.abs() < 1e-14 {
                return None;
            }
            let k = asm.beta * dot(&u, ag) / den;
            for (xi, aui) in x.iter_mut().zip(au) {
                *xi += k * aui;
            }
        }
        x.iter().all(|v| v.is_finite()).then(|| x.iter().map(|v| -v).collect())
    });
    (a, u, step)
}

struct NewtonRun {
    nodes: Vec<[f64; 4]>,
    iterations: usize,
    trace: Vec<f64>,
    converged: bool,
}

fn newton(prob: &Problem, mut nodes: Vec<[f64; 4]>, opts: &SolveOptions) -> NewtonRun {
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut polish = 0;
    let mut fallback_left = opts.fallback_iters;

    while iterations < opts.max_iter {
        let Some(asm) = prob.assemble(&nodes, true) else { break };
        let frames = prob.frames(&nodes);
        let g = Problem::reduce(&frames, &asm.grad);
        let gn = norm(&g);
        trace.push(gn);
        if gn <= opts.tol * (1.0 + asm.action.abs()) {
            converged = true;
            // a couple of extra steps while they still help
            if polish >= 2 || gn == 0.0 {
                break;
            }
        } else if converged {
            break;
        }
        let merit = 0.5 * gn * gn;
        let (a, u, dir) = newton_direction(&frames, &asm, &g);
        let mut accepted = None;
        if let Some(step) = &dir {
            let mut alpha = 1.0;
            for _ in 0..40 {
                let trial = Problem::apply_step(&frames, &nodes, step, alpha);
                if let Some((_, gt)) = prob.reduced_gradient(&trial) {
                    if 0.5 * dot(&gt, &gt) <= (1.0 - 1e-4 * alpha) * merit {
                        accepted = Some(trial);
                        break;
                    }
                }
                alpha *= 0.5;
            }
        }
        iterations += 1;
        if converged {
            polish += 1;
            match accepted {
                Some(t) => {
                    nodes = t;
                    continue;
                }
                None => break,
            }
        }
        if let Some(t) = accepted {
            nodes = t;
            continue;
        }
        // merit descent along −H g
        if fallback_left == 0 {
            break;
        }
        fallback_left -= 1;
        let hprod = |v: &[f64]| -> Vec<f64> {
            let mut r = a.mul_vec(v);
            if !u.is_empty() {
                let k = asm.beta * dot(&u, v);
                for (ri, ui) in r.iter_mut().zip(&u) {
                    *ri -= k * ui;
                }
            }
            r
        };
        let hg = hprod(&g);
        let hhg = hprod(&hg);
        let slope = dot(&hg, &hg);
        let curv = dot(&hhg, &hhg);
        if !(slope > 0.0 && curv > 0.0) {
            break;
        }
        let step: Vec<f64> = hg.iter().map(|v| -v).collect();
        let mut alpha = slope / curv;
        let mut moved = false;
        for _ in 0..40 {
            let trial = Problem::apply_step(&frames, &nodes, &step, alpha);
            if let Some((_, gt)) = prob.reduced_gradient(&trial) {
                if 0.5 * dot(&gt, &gt) <= merit - 1e-4 * alpha * slope {
                    nodes = trial;
                    moved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
    }
    NewtonRun { nodes, iterations, trace, converged }
}

pub fn solve_stationary(l: &LagrangianSpec, x0: &Event, x1: &Event, n: usize, gauge: GaugeOption) -> Result<Solution> {
    solve_stationary_with(l, x0, x1, &SolveOptions { n, gauge, ..Default::default() })
}

/// Damped Newton on the gauge-fixed stationarity system with the merit
/// `½‖∇F‖²`; steps that break future-likeness of a chord are shortened.
/// When Newton fails (singular system or no acceptable step) a bounded run of
/// merit descent takes over.
pub fn solve_stationary_with(l: &LagrangianSpec, x0: &Event, x1: &Event, opts: &SolveOptions) -> Result<Solution> {
    let model = l.model();
    x0.model().ensure(model)?;
    x1.model().ensure(model)?;
    check_cone(model, &chord(&x0.coords(), &x1.coords()))?;
    if opts.n < MIN_N {
        return Err(Error::InvalidPath(format!("N = {} is below the minimum {MIN_N}", opts.n)));
    }
    let mut nodes = initial_guess(x0, x1, opts)?;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let penalized = model == ModelKind::Relativistic && opts.gauge == GaugeOption::UniformChord;
    if penalized {
        // The penalty makes the system stiff far from the solution, so the
        // path shape is converged first with tangential steps removed.
        let pre = Problem { l, model, params: uniform_params(opts.n + 1), penalty: None, gauge: GaugeOption::Projection };
        let run = newton(&pre, nodes.clone(), opts);
        iterations += run.iterations;
        trace.extend(run.trace);
        if run.converged {
            nodes = run.nodes;
        }
    }
    let prob = Problem {
        l,
        model,
        params: uniform_params(opts.n + 1),
        penalty: penalized.then_some(opts.penalty),
        gauge: opts.gauge,
    };
    let run = newton(&prob, nodes, opts);
    iterations += run.iterations;
    trace.extend(run.trace);
    if !run.converged {
        let residual = trace.last().copied().unwrap_or(f64::NAN);
        return Err(Error::NoConvergence { iterations, residual, trace });
    }
    let nodes = run.nodes;
    let path = WorldPath::new(model, nodes)?;
    let mut report = action_report(l, &path)?;
    report.iterations = iterations;
    report.residual_trace = trace;
    Ok(Solution { path, report })
}

/// Plot-ready dump, one row per node. Segment quantities (`|chord|`,
/// momentum) belong to the segment starting at the node; the EL residual is
/// empty at the endpoints.
pub fn path_csv(l: &LagrangianSpec, p: &WorldPath) -> Result<String> {
    let el = el_residual(l, p)?;
    let mom = momentum_series(l, p)?;
    let mut s = String::from("s,t,x,y,z,chord_norm,el_residual,p0,p1,p2,p3\n");
    for (i, x) in p.nodes.iter().enumerate() {
        let _ = write!(s, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", p.params[i], x[0], x[1], x[2], x[3]);
        if i < p.segments() {
            let c = p.chord(i);
            let len = match p.model {
                ModelKind::Relativistic => (-minkowski(&c, &c)).sqrt(),
                ModelKind::NonRelativistic => euclid_norm(&[0.0, c[1], c[2], c[3]]),
            };
            let _ = write!(s, ",{len:.16e}");
        } else {
            s.push(',');
        }
        if i >= 1 && i < p.segments() {
            let _ = write!(s, ",{:.16e}", el[i - 1]);
        } else {
            s.push(',');
        }
        if i < p.segments() {
            for v in mom[i] {
                let _ = write!(s, ",{v:.16e}");
            }
        } else {
            s.push_str(",,,,");
        }
        s.push('\n');
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangians::Phi;
    use crate::quantities::Dim;
    use crate::spacetime::Velocity;
    use approx::assert_relative_eq;

    const NR: ModelKind = ModelKind::NonRelativistic;
    const R: ModelKind = ModelKind::Relativistic;

    fn free_rel(m: f64) -> LagrangianSpec {
        LagrangianSpec::free_rel(Quantity::new(m, Dim::PER_SECOND)).unwrap()
    }

    fn free_nr(m: f64, c: [f64; 3]) -> LagrangianSpec {
        LagrangianSpec::free_nonrel(Quantity::mass(m), Velocity::galilean(c)).unwrap()
    }

    fn ev(model: ModelKind, c: [f64; 4]) -> Event {
        Event::new(model, c)
    }

    #[test]
    fn straight_rel_action_is_mass_times_proper_time() {
        let p = WorldPath::straight(&Event::origin(R), &ev(R, [5.0, 3.0, 0.0, 0.0]), 7).unwrap();
        assert_relative_eq!(action(&free_rel(2.0), &p).unwrap(), 8.0, max_relative = 1e-14);
        assert_relative_eq!(proper_time(&p).unwrap().value, 4.0, max_relative = 1e-14);
    }

    #[test]
    fn twin_path_ages_less() {
        let twin = WorldPath::new(R, vec![[0.0; 4], [2.5, 2.0, 0.0, 0.0], [5.0, 0.0, 0.0, 0.0]]).unwrap();
        let t = proper_time(&twin).unwrap().value;
        assert_relative_eq!(t, 3.0, max_relative = 1e-14);
        assert!(t < 5.0);
        assert!(proper_time(&WorldPath::straight(&Event::origin(NR), &ev(NR, [1.0; 4]), 3).unwrap()).is_err());
    }

    #[test]
    fn free_nonrel_straight_action() {
        let p = WorldPath::straight(&Event::origin(NR), &ev(NR, [1.0, 1.0, 0.0, 0.0]), 100).unwrap();
        assert_relative_eq!(action(&free_nr(1.0, [0.0; 3]), &p).unwrap(), 0.5, max_relative = 1e-13);
    }

    #[test]
    fn invalid_paths() {
        assert!(matches!(
            WorldPath::new(R, vec![[0.0; 4], [1.0, 2.0, 0.0, 0.0]]),
            Err(Error::ChordNotFutureLike { index: 0 })
        ));
        assert!(matches!(
            WorldPath::new(NR, vec![[0.0; 4], [1.0, 2.0, 0.0, 0.0], [1.0, 3.0, 0.0, 0.0]]),
            Err(Error::ChordNotFutureLike { index: 1 })
        ));
        let p = WorldPath::straight(&Event::origin(NR), &ev(NR, [1.0; 4]), 4).unwrap();
        assert!(p.remap(vec![0.0, 0.5, 0.4, 0.8, 1.0]).is_err());
        assert!(p.remap(vec![0.0, 0.5, 1.0]).is_err());
    }

    #[test]
    fn remap_leaves_action_unchanged() {
        let l = free_nr(1.3, [0.1, 0.0, -0.2]);
        let nodes: Vec<[f64; 4]> = (0..=10).map(|i| {
            let t = i as f64 / 10.0;
            [t, t * t, (3.0 * t).sin(), 0.5 * t]
        }).collect();
        let p = WorldPath::new(NR, nodes).unwrap();
        let q = p.remap((0..=10).map(|i| (i as f64 / 10.0).powi(3) + i as f64).collect()).unwrap();
        let (a, b) = (action(&l, &p).unwrap(), action(&l, &q).unwrap());
        assert!((a - b).abs() <= 1e-12 * a.abs());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut b = Matrix4::zeros();
        b[(1, 2)] = 0.7;
        b[(2, 1)] = -0.7;
        b[(0, 1)] = 0.3;
        b[(1, 0)] = -0.3;
        let l = LagrangianSpec::counterexample_b(ev(NR, [0.0, 0.5, 0.0, 0.0]), b, Phi::Kinetic { m: 1.0, c: [0.0; 3] }).unwrap();
        let nodes: Vec<[f64; 4]> = (0..=12).map(|i| {
            let t = i as f64 / 12.0;
            [t + 0.01 * (7.0 * t).sin(), t.cos(), t * t, -t]
        }).collect();
        let p = WorldPath::new(NR, nodes.clone()).unwrap();
        let g = action_gradient(&l, &p).unwrap();
        let h = 1e-6;
        for i in 1..12 {
            for k in 0..4 {
                let (mut a, mut c) = (nodes.clone(), nodes.clone());
                a[i][k] += h;
                c[i][k] -= h;
                let fd = (action(&l, &WorldPath::new(NR, a).unwrap()).unwrap()
                    - action(&l, &WorldPath::new(NR, c).unwrap()).unwrap())
                    / (2.0 * h);
                assert!((fd - g[i - 1][k]).abs() <= 1e-6 * (1.0 + fd.abs()), "{i} {k}: {fd} vs {}", g[i - 1][k]);
            }
        }
    }

    #[test]
    fn straight_free_path_has_zero_el_residual() {
        let l = free_nr(2.0, [0.0; 3]);
        let p = WorldPath::straight(&Event::origin(NR), &ev(NR, [2.0, 1.0, -1.0, 3.0]), 50).unwrap();
        assert!(el_residual(&l, &p).unwrap().iter().all(|r| *r < 1e-10));
        let bent = WorldPath::new(NR, vec![[0.0; 4], [0.5, 1.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]]).unwrap();
        assert!(el_residual(&l, &bent).unwrap()[0] > 0.1);
    }

    #[test]
    fn banded_frames_are_orthonormal() {
        let e = tangent_complement(&[0.3, -2.0, 0.1, 0.7]);
        let t = [0.3, -2.0, 0.1, 0.7];
        for c in 0..3 {
            let dt: f64 = (0..4).map(|r| e[(r, c)] * t[r]).sum();
            assert!(dt.abs() < 1e-14);
            for c2 in 0..3 {
                let d: f64 = (0..4).map(|r| e[(r, c)] * e[(r, c2)]).sum();
                assert!((d - if c == c2 { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn solves_free_nonrel_from_perturbed_start() {
        let l = free_nr(1.0, [0.2, 0.0, 0.0]);
        let opts = SolveOptions { n: 40, perturbation: 0.2, seed: 3, ..Default::default() };
        let sol = solve_stationary_with(&l, &Event::origin(NR), &ev(NR, [2.0, 1.0, 2.0, -1.0]), &opts).unwrap();
        assert!(sol.report.iterations > 0);
        assert!(sol.path.max_deviation_from_chord() < 1e-8);
        assert!(sol.report.momentum_deviation < 1e-9);
    }

    #[test]
    fn solves_free_rel_in_both_gauges() {
        let l = free_rel(1.0);
        let x1 = ev(R, [5.0, 1.0, 2.0, -0.5]);
        for gauge in [GaugeOption::UniformChord, GaugeOption::Projection] {
            let opts = SolveOptions { n: 30, gauge, perturbation: 0.05, seed: 9, ..Default::default() };
            let sol = solve_stationary_with(&l, &Event::origin(R), &x1, &opts).unwrap();
            assert!(sol.path.max_deviation_from_chord() < 1e-7, "{gauge}");
            assert!(sol.report.gradient_norm < 1e-9 * (1.0 + sol.report.action.abs()), "{gauge}");
        }
    }

    #[test]
    fn solver_preconditions() {
        let l = free_rel(1.0);
        assert!(matches!(
            solve_stationary(&l, &Event::origin(R), &ev(R, [1.0, 2.0, 0.0, 0.0]), 20, GaugeOption::default()),
            Err(Error::NotFutureLike { .. })
        ));
        assert!(matches!(
            solve_stationary(&l, &Event::origin(R), &ev(R, [1.0, 0.0, 0.0, 0.0]), 4, GaugeOption::default()),
            Err(Error::InvalidPath(_))
        ));
    }

    #[test]
    fn csv_has_one_row_per_node() {
        let l = free_rel(1.0);
        let p = WorldPath::straight(&Event::origin(R), &ev(R, [5.0, 3.0, 0.0, 0.0]), 4).unwrap();
        let csv = path_csv(&l, &p).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 6);
        assert!(lines.iter().all(|l| l.split(',').count() == 11));
    }

    #[test]
    fn arclength_resampling_preserves_line() {
        let p = WorldPath::with_params(R, vec![[0.0; 4], [1.0, 0.5, 0.0, 0.0], [4.0, 2.0, 0.0, 0.0]], vec![0.0, 0.1, 1.0]).unwrap();
        let q = p.resample_arclength(8).unwrap();
        assert_eq!(q.nodes().len(), 9);
        assert!(q.max_deviation_from_chord() < 1e-15);
        assert!(p.polyline_distance(&q) < 1e-15);
        assert_relative_eq!(q.nodes()[4][0], 2.0, epsilon = 1e-14);
    }
}
