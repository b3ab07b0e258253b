//! Scenario files: TOML with fixed sections, validated into typed values.
//!
//! ```toml
//! [scenario]
//! name = "free-rel"
//! model = "rel"
//!
//! [lagrangian]
//! kind = "free-rel"
//! mass = "2 1/s"
//!
//! [endpoints]
//! start = "[0, 0, 0, 0]"
//! end = "[5 s, 3 s, 0, 0]"
//!
//! [expect]
//! action_is_mass_times_proper_time = true
//! ```

use std::fmt;
use std::ops::Range;
use std::path::Path;

use nalgebra::Matrix4;
use noether_lab::groups::parse_matrix;
use noether_lab::spacetime::parse_vector_literal;
use noether_lab::variational::{GaugeOption, SolveOptions, MIN_N};
use noether_lab::{Dim, Event, LagrangianSpec, ModelKind, Phi, Quantity, SamplingConfig, Velocity};
use serde::Deserialize;
use toml::{Spanned, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub file: String,
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.file)?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
        }
        if let Some(field) = &self.field {
            write!(f, ": field `{field}`")?;
        }
        write!(f, ": {}", self.message)
    }
}

type Field<T> = Option<Spanned<T>>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    scenario: Option<RawScenario>,
    lagrangian: Option<RawLagrangian>,
    compare: Option<RawLagrangian>,
    endpoints: Option<RawEndpoints>,
    solver: Option<RawSolver>,
    sampling: Option<RawSampling>,
    certify: Option<RawCertify>,
    expect: Option<RawExpect>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Field<String>,
    model: Field<String>,
    seed: Field<u64>,
    out: Field<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLagrangian {
    kind: Field<String>,
    mass: Field<Value>,
    velocity: Field<Value>,
    origin: Field<Value>,
    coupling: Field<Value>,
    phi: Field<String>,
    expression: Field<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEndpoints {
    start: Field<Value>,
    end: Field<Value>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    n: Field<i64>,
    gauge: Field<String>,
    max_iter: Field<i64>,
    tol: Field<f64>,
    penalty: Field<f64>,
    perturbation: Field<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampling {
    center: Field<Value>,
    half_width: Field<f64>,
    points: Field<i64>,
    directions: Field<i64>,
    tol: Field<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCertify {
    random_elements: Field<i64>,
    coefficient_range: Field<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExpect {
    pass: Field<Value>,
    fail: Field<Value>,
    straight: Field<bool>,
    min_momentum_deviation: Field<f64>,
    max_momentum_deviation: Field<f64>,
    max_el_residual: Field<f64>,
    action_is_mass_times_proper_time: Field<bool>,
    equivalent: Field<bool>,
}

/// Which certification records an expectation refers to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selector {
    All,
    Translations,
    Rotations,
    Boosts,
    Random,
    Name(String),
}

impl Selector {
    fn parse(s: &str) -> Option<Selector> {
        let name_ok = |p: &str, lo: u32, hi: u32| {
            s.strip_prefix(p).and_then(|r| r.parse::<u32>().ok()).is_some_and(|k| (lo..=hi).contains(&k))
        };
        Some(match s {
            "all" => Selector::All,
            "translations" => Selector::Translations,
            "rotations" => Selector::Rotations,
            "boosts" => Selector::Boosts,
            "random" => Selector::Random,
            "translation_t" | "translation_x" | "translation_y" | "translation_z" => Selector::Name(s.into()),
            _ if name_ok("rotation_", 1, 3) || name_ok("boost_", 1, 3) || name_ok("element_", 0, 999) => {
                Selector::Name(s.into())
            }
            _ => return None,
        })
    }

    pub fn matches(&self, record: &str) -> bool {
        match self {
            Selector::All => true,
            Selector::Translations => record.starts_with("translation_"),
            Selector::Rotations => record.starts_with("rotation_"),
            Selector::Boosts => record.starts_with("boost_"),
            Selector::Random => record.starts_with("element_"),
            Selector::Name(n) => n == record,
        }
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::All => write!(f, "all"),
            Selector::Translations => write!(f, "translations"),
            Selector::Rotations => write!(f, "rotations"),
            Selector::Boosts => write!(f, "boosts"),
            Selector::Random => write!(f, "random"),
            Selector::Name(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Expect {
    pub pass: Vec<Selector>,
    pub fail: Vec<Selector>,
    pub straight: Option<bool>,
    pub min_momentum_deviation: Option<f64>,
    pub max_momentum_deviation: Option<f64>,
    pub max_el_residual: Option<f64>,
    pub action_is_mass_times_proper_time: Option<bool>,
    pub equivalent: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub model: ModelKind,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub lagrangian: Option<LagrangianSpec>,
    pub compare: Option<LagrangianSpec>,
    pub endpoints: Option<(Event, Event)>,
    pub solver: SolveOptions,
    pub sampling: SamplingConfig,
    pub random_elements: usize,
    pub coefficient_range: f64,
    pub expect: Expect,
}

struct Ctx<'a> {
    file: &'a str,
    src: &'a str,
}

impl Ctx<'_> {
    fn line_of(&self, span: Range<usize>) -> usize {
        self.src[..span.start.min(self.src.len())].matches('\n').count() + 1
    }

    fn err<T>(&self, span: Range<usize>, field: &str, message: impl Into<String>) -> Result<T, ConfigError> {
        Err(ConfigError {
            file: self.file.into(),
            line: Some(self.line_of(span)),
            field: Some(field.into()),
            message: message.into(),
        })
    }

    fn missing<T>(&self, field: &str) -> Result<T, ConfigError> {
        Err(ConfigError {
            file: self.file.into(),
            line: None,
            field: Some(field.into()),
            message: "required field is missing".into(),
        })
    }

    fn wrap<T, E: fmt::Display>(&self, v: &Spanned<Value>, field: &str, r: Result<T, E>) -> Result<T, ConfigError> {
        r.or_else(|e| self.err(v.span(), field, e.to_string()))
    }

    fn count(&self, v: &Field<i64>, field: &str, min: usize, default: usize) -> Result<usize, ConfigError> {
        match v {
            None => Ok(default),
            Some(s) if *s.get_ref() >= min as i64 => Ok(*s.get_ref() as usize),
            Some(s) => self.err(s.span(), field, format!("must be at least {min}, got {}", s.get_ref())),
        }
    }

    fn positive(&self, v: &Field<f64>, field: &str, default: f64) -> Result<f64, ConfigError> {
        match v {
            None => Ok(default),
            Some(s) if *s.get_ref() > 0.0 && s.get_ref().is_finite() => Ok(*s.get_ref()),
            Some(s) => self.err(s.span(), field, format!("must be positive and finite, got {}", s.get_ref())),
        }
    }

    /// A `"[t, x, y, z]"` literal with optional units, or an array of four
    /// numbers in chart units.
    fn vec4(&self, v: &Spanned<Value>, field: &str, model: ModelKind) -> Result<[f64; 4], ConfigError> {
        match v.get_ref() {
            Value::String(s) => self.wrap(v, field, parse_vector_literal(model, Dim::DIMENSIONLESS, s)),
            Value::Array(a) => match numbers(a).as_deref() {
                Some(&[t, x, y, z]) => Ok([t, x, y, z]),
                _ => self.err(v.span(), field, "expected four numbers"),
            },
            _ => self.err(v.span(), field, "expected a vector literal or an array of four numbers"),
        }
    }

    fn mass(&self, v: &Spanned<Value>, field: &str, model: ModelKind) -> Result<Quantity, ConfigError> {
        let chart = match model {
            ModelKind::NonRelativistic => Dim::MASS,
            ModelKind::Relativistic => Dim::PER_SECOND,
        };
        let q = match v.get_ref() {
            Value::String(s) => {
                let q: Quantity = self.wrap(v, field, s.parse())?;
                if q.dim.is_dimensionless() {
                    Quantity::new(q.value, chart)
                } else {
                    q
                }
            }
            Value::Float(x) => Quantity::new(*x, chart),
            Value::Integer(i) => Quantity::new(*i as f64, chart),
            _ => return self.err(v.span(), field, "expected a mass such as \"1 s/m2\" or a number"),
        };
        let dim = match model {
            ModelKind::NonRelativistic => q.dim,
            ModelKind::Relativistic => q.dim.collapse_relativistic(),
        };
        if dim != chart {
            return self.err(v.span(), field, format!("mass has unit {}, expected {chart}", q.dim));
        }
        if !(q.value > 0.0 && q.value.is_finite()) {
            return self.err(v.span(), field, "mass must be positive");
        }
        Ok(q)
    }

    fn matrix(&self, v: &Spanned<Value>, field: &str) -> Result<Matrix4<f64>, ConfigError> {
        match v.get_ref() {
            Value::String(s) => self.wrap(v, field, parse_matrix(s)),
            Value::Array(rows) => {
                let rows: Option<Vec<Vec<f64>>> =
                    rows.iter().map(|r| r.as_array().and_then(|a| numbers(a))).collect();
                match rows {
                    Some(r) if r.len() == 4 && r.iter().all(|row| row.len() == 4) => {
                        Ok(Matrix4::from_fn(|i, j| r[i][j]))
                    }
                    _ => self.err(v.span(), field, "expected a 4x4 array of numbers"),
                }
            }
            _ => self.err(v.span(), field, "expected a 4x4 matrix"),
        }
    }

    fn selectors(&self, v: &Field<Value>, field: &str) -> Result<Vec<Selector>, ConfigError> {
        let Some(v) = v else { return Ok(Vec::new()) };
        let items: Vec<&str> = match v.get_ref() {
            Value::String(s) => s.split(',').map(str::trim).filter(|s| !s.is_empty()).collect(),
            Value::Array(a) => match a.iter().map(Value::as_str).collect::<Option<Vec<_>>>() {
                Some(items) => items,
                None => return self.err(v.span(), field, "expected a list of generator names"),
            },
            _ => return self.err(v.span(), field, "expected a list of generator names"),
        };
        items
            .into_iter()
            .map(|s| {
                Selector::parse(s).map_or_else(
                    || {
                        self.err(
                            v.span(),
                            field,
                            format!(
                                "unknown selector '{s}' (all, translations, rotations, boosts, random, or a record name)"
                            ),
                        )
                    },
                    Ok,
                )
            })
            .collect()
    }

    fn lagrangian(&self, raw: &RawLagrangian, section: &str, model: ModelKind) -> Result<LagrangianSpec, ConfigError> {
        let f = |k: &str| format!("{section}.{k}");
        let Some(kind) = &raw.kind else { return self.missing(&f("kind")) };
        let lib = |r: noether_lab::Result<LagrangianSpec>, span: Range<usize>| {
            r.or_else(|e| self.err(span, &f("kind"), e.to_string()))
        };
        match kind.get_ref().as_str() {
            "free-nonrel" => {
                if model != ModelKind::NonRelativistic {
                    return self.err(kind.span(), &f("kind"), "free-nonrel needs model = \"nonrel\"");
                }
                let Some(m) = &raw.mass else { return self.missing(&f("mass")) };
                let m = self.mass(m, &f("mass"), model)?;
                let c = match &raw.velocity {
                    None => [0.0; 3],
                    Some(v) => self.velocity(v, &f("velocity"))?,
                };
                lib(LagrangianSpec::free_nonrel(m, Velocity::galilean(c)), kind.span())
            }
            "free-rel" => {
                if model != ModelKind::Relativistic {
                    return self.err(kind.span(), &f("kind"), "free-rel needs model = \"rel\"");
                }
                let Some(m) = &raw.mass else { return self.missing(&f("mass")) };
                lib(LagrangianSpec::free_rel(self.mass(m, &f("mass"), model)?), kind.span())
            }
            "counterexample-b" => {
                let o = match &raw.origin {
                    None => [0.0; 4],
                    Some(v) => self.vec4(v, &f("origin"), model)?,
                };
                let Some(b) = &raw.coupling else { return self.missing(&f("coupling")) };
                let bm = self.matrix(b, &f("coupling"))?;
                let Some(m) = &raw.mass else { return self.missing(&f("mass")) };
                let mq = self.mass(m, &f("mass"), model)?;
                let default_phi = match model {
                    ModelKind::NonRelativistic => "kinetic",
                    ModelKind::Relativistic => "proper-time",
                };
                let phi = match raw.phi.as_ref().map_or(default_phi, |p| p.get_ref().as_str()) {
                    "kinetic" => {
                        let c = match &raw.velocity {
                            None => [0.0; 3],
                            Some(v) => self.velocity(v, &f("velocity"))?,
                        };
                        Phi::Kinetic { m: mq.value, c }
                    }
                    "proper-time" => Phi::ProperTime { m: mq.value },
                    other => {
                        let span = raw.phi.as_ref().map(|p| p.span()).unwrap_or(kind.span());
                        return self.err(span, &f("phi"), format!("unknown phi '{other}' (kinetic|proper-time)"));
                    }
                };
                LagrangianSpec::counterexample_b(Event::new(model, o), bm, phi)
                    .or_else(|e| self.err(b.span(), &f("coupling"), e.to_string()))
            }
            "expression" => {
                let Some(e) = &raw.expression else { return self.missing(&f("expression")) };
                LagrangianSpec::user_expr(model, e.get_ref())
                    .or_else(|err| self.err(e.span(), &f("expression"), err.to_string()))
            }
            other => self.err(
                kind.span(),
                &f("kind"),
                format!("unknown kind '{other}' (free-nonrel|free-rel|counterexample-b|expression)"),
            ),
        }
    }

    fn velocity(&self, v: &Spanned<Value>, field: &str) -> Result<[f64; 3], ConfigError> {
        match v.get_ref() {
            Value::Array(a) => match numbers(a).as_deref() {
                Some(&[x, y, z]) => Ok([x, y, z]),
                _ => self.err(v.span(), field, "expected three numbers (m/s)"),
            },
            _ => self.err(v.span(), field, "expected an array of three numbers (m/s)"),
        }
    }
}

fn numbers(a: &[Value]) -> Option<Vec<f64>> {
    a.iter()
        .map(|v| match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        })
        .collect()
}

pub fn parse(file: &str, src: &str) -> Result<Scenario, ConfigError> {
    let raw: Raw = toml::from_str(src).map_err(|e| ConfigError {
        file: file.into(),
        line: e.span().map(|s| src[..s.start.min(src.len())].matches('\n').count() + 1),
        field: None,
        message: e.message().trim().to_string(),
    })?;
    let cx = Ctx { file, src };

    let stem = Path::new(file).file_stem().and_then(|s| s.to_str()).unwrap_or("scenario").to_string();
    let sc = raw.scenario.as_ref();
    let name = sc.and_then(|s| s.name.as_ref()).map_or(stem, |n| n.get_ref().clone());
    if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
        let span = sc.and_then(|s| s.name.as_ref()).map_or(0..0, |n| n.span());
        return cx.err(span, "scenario.name", "must be a plain, non-empty file name");
    }
    let model = match sc.and_then(|s| s.model.as_ref()) {
        None => return cx.missing("scenario.model"),
        Some(m) => m.get_ref().parse().or_else(|e: noether_lab::Error| cx.err(m.span(), "scenario.model", e.to_string()))?,
    };

    let lagrangian = raw.lagrangian.as_ref().map(|l| cx.lagrangian(l, "lagrangian", model)).transpose()?;
    let compare = raw.compare.as_ref().map(|l| cx.lagrangian(l, "compare", model)).transpose()?;

    let endpoints = match &raw.endpoints {
        None => None,
        Some(e) => {
            let (Some(a), Some(b)) = (&e.start, &e.end) else {
                return cx.missing(if e.start.is_none() { "endpoints.start" } else { "endpoints.end" });
            };
            Some((
                Event::new(model, cx.vec4(a, "endpoints.start", model)?),
                Event::new(model, cx.vec4(b, "endpoints.end", model)?),
            ))
        }
    };

    let mut solver = SolveOptions::default();
    if let Some(s) = &raw.solver {
        solver.n = cx.count(&s.n, "solver.n", MIN_N, solver.n)?;
        solver.max_iter = cx.count(&s.max_iter, "solver.max_iter", 1, solver.max_iter)?;
        solver.tol = cx.positive(&s.tol, "solver.tol", solver.tol)?;
        solver.penalty = cx.positive(&s.penalty, "solver.penalty", solver.penalty)?;
        if let Some(p) = &s.perturbation {
            if !(p.get_ref().is_finite() && *p.get_ref() >= 0.0) {
                return cx.err(p.span(), "solver.perturbation", "must be non-negative");
            }
            solver.perturbation = *p.get_ref();
        }
        if let Some(g) = &s.gauge {
            solver.gauge = g
                .get_ref()
                .parse::<GaugeOption>()
                .or_else(|e| cx.err(g.span(), "solver.gauge", e.to_string()))?;
        }
    }

    let mut sampling = SamplingConfig::default();
    if let Some(s) = &raw.sampling {
        if let Some(c) = &s.center {
            sampling.center = cx.vec4(c, "sampling.center", model)?;
        }
        sampling.half_width = cx.positive(&s.half_width, "sampling.half_width", sampling.half_width)?;
        sampling.points = cx.count(&s.points, "sampling.points", sampling.min_points, sampling.points)?;
        sampling.directions = cx.count(&s.directions, "sampling.directions", 2, sampling.directions)?;
        sampling.tol = cx.positive(&s.tol, "sampling.tol", sampling.tol)?;
    }

    let (mut random_elements, mut coefficient_range) = (20, 0.5);
    if let Some(c) = &raw.certify {
        random_elements = cx.count(&c.random_elements, "certify.random_elements", 0, random_elements)?;
        coefficient_range = cx.positive(&c.coefficient_range, "certify.coefficient_range", coefficient_range)?;
    }

    let mut expect = Expect::default();
    if let Some(e) = &raw.expect {
        expect.pass = cx.selectors(&e.pass, "expect.pass")?;
        expect.fail = cx.selectors(&e.fail, "expect.fail")?;
        let get = |v: &Field<f64>| v.as_ref().map(|s| *s.get_ref());
        let flag = |v: &Field<bool>| v.as_ref().map(|s| *s.get_ref());
        expect.straight = flag(&e.straight);
        expect.min_momentum_deviation = get(&e.min_momentum_deviation);
        expect.max_momentum_deviation = get(&e.max_momentum_deviation);
        expect.max_el_residual = get(&e.max_el_residual);
        expect.action_is_mass_times_proper_time = flag(&e.action_is_mass_times_proper_time);
        expect.equivalent = flag(&e.equivalent);
    }

    Ok(Scenario {
        name,
        model,
        seed: sc.and_then(|s| s.seed.as_ref()).map(|s| *s.get_ref()),
        out: sc.and_then(|s| s.out.as_ref()).map(|s| s.get_ref().clone()),
        lagrangian,
        compare,
        endpoints,
        solver,
        sampling,
        random_elements,
        coefficient_range,
        expect,
    })
}
