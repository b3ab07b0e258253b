use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use noether_lab::groups::membership;
use noether_lab::lagrangians::{equivalence_analysis, LagrangianKind};
use noether_lab::symmetry::{certify_free, CertifyOptions, CertifyReport};
use noether_lab::variational::{path_csv, proper_time, solve_stationary_with, Solution, WorldPath};
use noether_lab::{exp_generator, Error, Event, Generator, LagrangianSpec, ModelKind};

use crate::config::{Expect, Scenario};

pub const OK: u8 = 0;
pub const VIOLATED: u8 = 1;
pub const CONFIG: u8 = 2;
pub const NUMERIC: u8 = 3;

/// Straight-line flag threshold on the largest node distance from the chord.
pub const STRAIGHT_TOL: f64 = 1e-8;

/// Result of one command on one scenario. Text is collected rather than
/// printed so that parallel runs report in input order.
#[derive(Debug, Default)]
pub struct Outcome {
    pub code: u8,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn fail(code: u8, msg: impl Into<String>) -> Self {
        Outcome { code, stdout: String::new(), stderr: msg.into() }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NoConvergence { .. } | Error::SeriesNotConverged { .. } => NUMERIC,
        _ => CONFIG,
    }
}

fn lib_failure(scenario: &str, e: &Error) -> Outcome {
    Outcome::fail(exit_code(e), format!("{scenario}: {e}"))
}

fn write(dir: &Path, file: &str, body: &str) -> Result<PathBuf, Outcome> {
    fs::create_dir_all(dir).map_err(|e| Outcome::fail(CONFIG, format!("cannot create {}: {e}", dir.display())))?;
    let p = dir.join(file);
    fs::write(&p, body).map_err(|e| Outcome::fail(CONFIG, format!("cannot write {}: {e}", p.display())))?;
    Ok(p)
}

fn need<'a, T>(v: &'a Option<T>, scenario: &str, what: &str) -> Result<&'a T, Outcome> {
    v.as_ref().ok_or_else(|| Outcome::fail(CONFIG, format!("{scenario}: this command needs {what}")))
}

fn finish(mut out: Outcome, violations: Vec<String>) -> Outcome {
    if violations.is_empty() {
        out.stdout.push_str("expectations: met\n");
    } else {
        out.code = VIOLATED;
        for v in &violations {
            let _ = writeln!(out.stdout, "expectation violated: {v}");
        }
    }
    out
}

pub fn certify(sc: &Scenario, seed: u64, dir: &Path) -> Outcome {
    let l = match need(&sc.lagrangian, &sc.name, "a [lagrangian] section") {
        Ok(l) => l,
        Err(o) => return o,
    };
    let opts = CertifyOptions {
        sampling: sc.sampling.clone().with_seed(seed),
        random_elements: sc.random_elements,
        coefficient_range: sc.coefficient_range,
        seed,
        ..Default::default()
    };
    let report = match certify_free(l, &opts) {
        Ok(r) => r,
        Err(e) => return lib_failure(&sc.name, &e),
    };
    let text = format!("scenario: {}\n{report}", sc.name);
    for (file, body) in [("certify.txt", text.as_str()), ("certify.csv", report.to_csv().as_str())] {
        if let Err(o) = write(dir, file, body) {
            return o;
        }
    }
    let out = Outcome { code: OK, stdout: text, stderr: String::new() };
    finish(out, certify_violations(&report, &sc.expect))
}

fn certify_violations(report: &CertifyReport, expect: &Expect) -> Vec<String> {
    let mut v = Vec::new();
    for (sels, want) in [(&expect.pass, true), (&expect.fail, false)] {
        for sel in sels.iter() {
            let hits: Vec<_> = report.records.iter().filter(|r| sel.matches(&r.name)).collect();
            if hits.is_empty() {
                v.push(format!("no record matches '{sel}'"));
            }
            for r in hits {
                if r.verdict.is_symmetry() != want {
                    v.push(format!(
                        "{} expected to {} but is {}",
                        r.name,
                        if want { "pass" } else { "fail" },
                        r.verdict.status.label()
                    ));
                }
            }
        }
    }
    v
}

fn free_rel_mass(l: &LagrangianSpec) -> Option<f64> {
    match l.kind() {
        LagrangianKind::FreeRel { m } => Some(m.value),
        _ => None,
    }
}

pub fn solve(sc: &Scenario, seed: u64, dir: &Path) -> Outcome {
    let (l, (x0, x1)) = match (
        need(&sc.lagrangian, &sc.name, "a [lagrangian] section"),
        need(&sc.endpoints, &sc.name, "an [endpoints] section"),
    ) {
        (Ok(l), Ok(e)) => (l, e),
        (Err(o), _) | (_, Err(o)) => return o,
    };
    let opts = noether_lab::variational::SolveOptions { seed, ..sc.solver.clone() };
    let sol = match solve_stationary_with(l, x0, x1, &opts) {
        Ok(s) => s,
        Err(Error::NoConvergence { iterations, residual, trace }) => {
            let mut body = String::from("iteration,residual\n");
            for (i, r) in trace.iter().enumerate() {
                let _ = writeln!(body, "{i},{r:.16e}");
            }
            let path = match write(dir, "residual_trace.csv", &body) {
                Ok(p) => p,
                Err(o) => return o,
            };
            return Outcome::fail(
                NUMERIC,
                format!(
                    "{}: solver did not converge after {iterations} iterations (residual {residual:.16e}); trace in {}",
                    sc.name,
                    path.display()
                ),
            );
        }
        Err(e) => return lib_failure(&sc.name, &e),
    };
    let csv = match path_csv(l, &sol.path) {
        Ok(c) => c,
        Err(e) => return lib_failure(&sc.name, &e),
    };
    let text = solve_report(sc, l, &opts, &sol);
    for (file, body) in [("path.csv", csv.as_str()), ("report.txt", text.as_str())] {
        if let Err(o) = write(dir, file, body) {
            return o;
        }
    }

    let r = &sol.report;
    let e = &sc.expect;
    let mut v = Vec::new();
    let deviation = sol.path.max_deviation_from_chord();
    if let Some(want) = e.straight {
        if (deviation < STRAIGHT_TOL) != want {
            v.push(format!("straight = {want}, but the largest deviation from the chord is {deviation:.3e}"));
        }
    }
    if let Some(min) = e.min_momentum_deviation {
        if !(r.momentum_deviation > min) {
            v.push(format!("momentum deviation {:.3e} is not above {min:e}", r.momentum_deviation));
        }
    }
    if let Some(max) = e.max_momentum_deviation {
        if !(r.momentum_deviation < max) {
            v.push(format!("momentum deviation {:.3e} is not below {max:e}", r.momentum_deviation));
        }
    }
    if let Some(max) = e.max_el_residual {
        if !(r.max_el_residual() < max) {
            v.push(format!("EL residual {:.3e} is not below {max:e}", r.max_el_residual()));
        }
    }
    if let Some(want) = e.action_is_mass_times_proper_time {
        let holds = match (free_rel_mass(l), r.proper_time) {
            (Some(m), Some(tau)) => (r.action - m * tau).abs() <= 1e-12 * r.action.abs(),
            _ => false,
        };
        if holds != want {
            v.push(format!("action_is_mass_times_proper_time = {want} does not hold"));
        }
    }
    finish(Outcome { code: OK, stdout: text, stderr: String::new() }, v)
}

fn solve_report(sc: &Scenario, l: &LagrangianSpec, opts: &noether_lab::variational::SolveOptions, sol: &Solution) -> String {
    let r = &sol.report;
    let deviation = sol.path.max_deviation_from_chord();
    let mut s = String::new();
    let _ = writeln!(s, "scenario = {}", sc.name);
    let _ = writeln!(s, "model = {}", sc.model);
    let _ = writeln!(s, "n = {}", opts.n);
    if sc.model == ModelKind::Relativistic {
        let _ = writeln!(s, "gauge = {}", opts.gauge);
    }
    let _ = writeln!(s, "seed = {}", opts.seed);
    let _ = writeln!(s, "iterations = {}", r.iterations);
    let _ = writeln!(s, "action = {:.16e}", r.action);
    if let Some(tau) = r.proper_time {
        let _ = writeln!(s, "proper_time = {tau:.16e}");
        if let Some(m) = free_rel_mass(l) {
            let _ = writeln!(s, "mass_times_proper_time = {:.16e}", m * tau);
        }
    }
    let _ = writeln!(s, "gradient_norm = {:.16e}", r.gradient_norm);
    let _ = writeln!(s, "max_el_residual = {:.16e}", r.max_el_residual());
    let _ = writeln!(s, "momentum_deviation = {:.16e}", r.momentum_deviation);
    let _ = writeln!(s, "max_deviation_from_chord = {deviation:.16e}");
    let _ = writeln!(s, "straight_line = {}", deviation < STRAIGHT_TOL);
    s
}

pub fn equiv(sc: &Scenario, seed: u64, dir: &Path) -> Outcome {
    let (a, b) = match (
        need(&sc.lagrangian, &sc.name, "a [lagrangian] section"),
        need(&sc.compare, &sc.name, "a [compare] section"),
    ) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(o), _) | (_, Err(o)) => return o,
    };
    let cfg = sc.sampling.clone().with_seed(seed);
    let an = match equivalence_analysis(a, b, &cfg) {
        Ok(an) => an,
        Err(e) => return lib_failure(&sc.name, &e),
    };
    let equivalent = an.passes();
    let mut text = String::new();
    let _ = writeln!(text, "scenario = {}", sc.name);
    let _ = writeln!(text, "seed = {seed}");
    let _ = writeln!(text, "samples = {}", an.samples);
    let _ = writeln!(text, "lin_residual = {:.16e}", an.lin_residual);
    let _ = writeln!(text, "curl_residual = {:.16e}", an.curl_residual);
    let _ = writeln!(text, "scale = {:.16e}", an.scale);
    let _ = writeln!(text, "equivalent = {equivalent}");
    if let Err(o) = write(dir, "equiv.txt", &text) {
        return o;
    }
    let mut v = Vec::new();
    if let Some(want) = sc.expect.equivalent {
        if want != equivalent {
            v.push(format!("equivalent = {want}, but the analysis says {equivalent}"));
        }
    }
    finish(Outcome { code: OK, stdout: text, stderr: String::new() }, v)
}

pub fn exp(model: ModelKind, generator: &str, s: f64) -> Outcome {
    let h = match Generator::parse(model, generator) {
        Ok(h) => h,
        Err(e) => return Outcome::fail(exit_code(&e), e.to_string()),
    };
    let f = match exp_generator(&h, s) {
        Ok(f) => f,
        Err(e) => return Outcome::fail(exit_code(&e), e.to_string()),
    };
    let m = membership(&f);
    let mut text = format!("{f}\n");
    let _ = writeln!(text, "structure_residual = {:.16e}", m.structure_residual);
    if model == ModelKind::NonRelativistic {
        let _ = writeln!(text, "orthogonality_residual = {:.16e}", m.orthogonality_residual);
    }
    let _ = writeln!(text, "determinant = {:.16e}", m.determinant);
    let _ = writeln!(text, "arrow_preserved = {}", m.arrow_preserved);
    let _ = writeln!(text, "is_member = {}", m.is_member());
    Outcome { code: OK, stdout: text, stderr: String::new() }
}

pub fn proper_time_of(model: ModelKind, events: &[String]) -> Outcome {
    let events: Result<Vec<Event>, Error> = events.iter().map(|e| Event::parse(model, e)).collect();
    let path = events.and_then(|ev| WorldPath::from_events(&ev));
    let tau = path.as_ref().map_err(Clone::clone).and_then(|p| Ok((proper_time(p)?, p)));
    match tau {
        Ok((tau, p)) => {
            let mut text = String::new();
            for i in 0..p.segments() {
                let c = p.chord(i);
                let seg = (c[0] * c[0] - c[1] * c[1] - c[2] * c[2] - c[3] * c[3]).sqrt();
                let _ = writeln!(text, "segment {i} = {seg:.16e} s");
            }
            let _ = writeln!(text, "proper_time = {:.16e} s", tau.value);
            Outcome { code: OK, stdout: text, stderr: String::new() }
        }
        Err(e) => Outcome::fail(exit_code(&e), e.to_string()),
    }
}
