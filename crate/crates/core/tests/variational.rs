use nalgebra::Matrix4;
use noether_lab::symmetry::random_group_element;
use noether_lab::variational::{
    action, el_residual, proper_time, solve_stationary_with, GaugeOption, SolveOptions, WorldPath,
};
use noether_lab::{exp_generator, Dim, Event, Generator, LagrangianSpec, ModelKind, Phi, Quantity, Velocity};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const NR: ModelKind = ModelKind::NonRelativistic;
const R: ModelKind = ModelKind::Relativistic;

fn antisym(entries: &[(usize, usize, f64)]) -> Matrix4<f64> {
    let mut b = Matrix4::zeros();
    for &(i, j, v) in entries {
        b[(i, j)] = v;
        b[(j, i)] = -v;
    }
    b
}

/// Spatial B-block in the x-y plane plus a small time-space entry.
fn magnetic() -> (LagrangianSpec, Matrix4<f64>, f64) {
    let b = antisym(&[(1, 2, 0.5), (0, 1, 0.2)]);
    let m = 1.0;
    let o = Event::new(NR, [0.0, 0.3, -0.2, 0.0]);
    let l = LagrangianSpec::counterexample_b(o, b, Phi::Kinetic { m, c: [0.0; 3] }).unwrap();
    (l, b, m)
}

// m r̈ = 2 (B (1, ṙ))_spatial, integrated with classical RK4.
fn accel(b: &Matrix4<f64>, m: f64, u: &[f64; 3]) -> [f64; 3] {
    let w = [1.0, u[0], u[1], u[2]];
    std::array::from_fn(|i| 2.0 / m * (0..4).map(|k| b[(i + 1, k)] * w[k]).sum::<f64>())
}

fn rk4_step(b: &Matrix4<f64>, m: f64, y: [f64; 6], h: f64) -> [f64; 6] {
    let f = |y: &[f64; 6]| -> [f64; 6] {
        let a = accel(b, m, &[y[3], y[4], y[5]]);
        [y[3], y[4], y[5], a[0], a[1], a[2]]
    };
    let add = |y: &[f64; 6], k: &[f64; 6], s: f64| -> [f64; 6] { std::array::from_fn(|i| y[i] + s * k[i]) };
    let k1 = f(&y);
    let k2 = f(&add(&y, &k1, 0.5 * h));
    let k3 = f(&add(&y, &k2, 0.5 * h));
    let k4 = f(&add(&y, &k3, h));
    std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Positions at `n + 1` uniform times, `sub` RK4 steps per interval.
fn trajectory(b: &Matrix4<f64>, m: f64, r0: [f64; 3], u0: [f64; 3], t: f64, n: usize, sub: usize) -> Vec<[f64; 3]> {
    let h = t / (n * sub) as f64;
    let mut y = [r0[0], r0[1], r0[2], u0[0], u0[1], u0[2]];
    let mut out = vec![r0];
    for _ in 0..n {
        for _ in 0..sub {
            y = rk4_step(b, m, y, h);
        }
        out.push([y[0], y[1], y[2]]);
    }
    out
}

/// Shooting on the initial velocity; the flow is affine in it, so Newton
/// with a unit-step difference Jacobian is exact up to round-off.
fn shoot(b: &Matrix4<f64>, m: f64, x0: [f64; 4], x1: [f64; 4], n: usize) -> Vec<[f64; 4]> {
    let t = x1[0] - x0[0];
    let r0 = [x0[1], x0[2], x0[3]];
    let target = [x1[1], x1[2], x1[3]];
    let end = |u: [f64; 3]| *trajectory(b, m, r0, u, t, 1, 4000).last().unwrap();
    let mut u: [f64; 3] = std::array::from_fn(|i| (target[i] - r0[i]) / t);
    for _ in 0..3 {
        let e = end(u);
        let res: [f64; 3] = std::array::from_fn(|i| e[i] - target[i]);
        let mut j = nalgebra::Matrix3::zeros();
        for c in 0..3 {
            let mut up = u;
            up[c] += 1.0;
            let ep = end(up);
            for r in 0..3 {
                j[(r, c)] = ep[r] - e[r];
            }
        }
        let du = j.lu().solve(&nalgebra::Vector3::from(res)).unwrap();
        for i in 0..3 {
            u[i] -= du[i];
        }
    }
    trajectory(b, m, r0, u, t, n, (4000 / n).max(4))
        .into_iter()
        .enumerate()
        .map(|(i, r)| [x0[0] + t * i as f64 / n as f64, r[0], r[1], r[2]])
        .collect()
}

fn max_dist(a: &[[f64; 4]], b: &[[f64; 4]]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (0..4).map(|k| (p[k] - q[k]).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

const X0: [f64; 4] = [0.0, 0.0, 0.0, 0.0];
const X1: [f64; 4] = [1.5, 1.0, 0.5, 0.2];

#[test]
fn magnetic_solution_matches_shooting_oracle() {
    let (l, b, m) = magnetic();
    let n = 400;
    let opts = SolveOptions { n, ..Default::default() };
    let sol = solve_stationary_with(&l, &Event::new(NR, X0), &Event::new(NR, X1), &opts).unwrap();
    let oracle = shoot(&b, m, X0, X1, n);
    let d = max_dist(sol.path.nodes(), &oracle);
    assert!(d < 1e-5, "distance to oracle {d:e}");
    // and the path is genuinely curved
    assert!(sol.path.max_deviation_from_chord() > 1e-2);
}

#[test]
fn discrete_solution_converges_at_second_order() {
    let (l, b, m) = magnetic();
    let errs: Vec<f64> = [50, 100, 200]
        .iter()
        .map(|&n| {
            let opts = SolveOptions { n, ..Default::default() };
            let sol = solve_stationary_with(&l, &Event::new(NR, X0), &Event::new(NR, X1), &opts).unwrap();
            max_dist(sol.path.nodes(), &shoot(&b, m, X0, X1, n))
        })
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..=4.5).contains(&ratio), "errors {errs:?}");
    }
}

#[test]
fn el_residual_of_exact_solution_is_second_order() {
    let (l, b, m) = magnetic();
    let res: Vec<f64> = [100, 200, 400]
        .iter()
        .map(|&n| {
            let p = WorldPath::new(NR, shoot(&b, m, X0, X1, n)).unwrap();
            el_residual(&l, &p).unwrap().into_iter().fold(0.0, f64::max)
        })
        .collect();
    for w in res.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..=4.5).contains(&ratio), "residuals {res:?}");
    }
}

fn free_nr() -> LagrangianSpec {
    LagrangianSpec::free_nonrel(Quantity::mass(1.5), Velocity::galilean([0.1, -0.2, 0.0])).unwrap()
}

fn free_rel() -> LagrangianSpec {
    LagrangianSpec::free_rel(Quantity::new(2.0, Dim::PER_SECOND)).unwrap()
}

fn covariance_gap(l: &LagrangianSpec, x0: [f64; 4], x1: [f64; 4], f: &noether_lab::AffineMap, opts: &SolveOptions) -> f64 {
    let model = l.model();
    let (e0, e1) = (Event::new(model, x0), Event::new(model, x1));
    let moved = solve_stationary_with(l, &e0, &e1, opts).unwrap().path.transformed(f).unwrap();
    let direct = solve_stationary_with(
        l,
        &Event::new(model, f.apply_point(&x0)),
        &Event::new(model, f.apply_point(&x1)),
        opts,
    )
    .unwrap()
    .path;
    moved.max_node_distance(&direct)
}

#[test]
fn free_solutions_are_covariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let opts = SolveOptions { n: 32, perturbation: 0.1, seed: 5, ..Default::default() };
    for (l, x1) in [(free_nr(), [2.0, 1.0, -0.5, 0.3]), (free_rel(), [3.0, 1.0, 0.5, -1.0])] {
        for _ in 0..4 {
            let f = random_group_element(l.model(), 0.5, &mut rng).unwrap();
            let gap = covariance_gap(&l, X0, x1, &f, &opts);
            assert!(gap < 1e-7, "{:?}: {gap:e}", l.model());
        }
    }
}

#[test]
fn counterexample_is_covariant_only_under_its_symmetries() {
    let (l, _, _) = magnetic();
    let opts = SolveOptions { n: 64, ..Default::default() };
    let shift = exp_generator(&Generator::translation(NR, [0.3, -1.0, 0.5, 2.0]), 1.0).unwrap();
    assert!(covariance_gap(&l, X0, X1, &shift, &opts) < 1e-7);
    let turn = exp_generator(&Generator::rotation(NR, 1).unwrap(), 0.7).unwrap();
    assert!(covariance_gap(&l, X0, X1, &turn, &opts) > 1e-3);
}

#[test]
fn relativistic_gauges_agree_on_free_paths() {
    let l = free_rel();
    let x1 = Event::new(R, [4.0, 1.5, -0.5, 1.0]);
    let paths: Vec<WorldPath> = [GaugeOption::UniformChord, GaugeOption::Projection]
        .into_iter()
        .map(|gauge| {
            let opts = SolveOptions { n: 40, gauge, perturbation: 0.15, seed: 2, ..Default::default() };
            solve_stationary_with(&l, &Event::origin(R), &x1, &opts).unwrap().path.resample_arclength(40).unwrap()
        })
        .collect();
    assert!(paths[0].polyline_distance(&paths[1]) < 1e-7);
    assert!(paths[0].max_node_distance(&paths[1]) < 1e-7);
}

#[test]
// On curved paths the projection gauge leaves a small tangential gradient,
// so node placement, and with it the polyline, differs at first order.
fn relativistic_gauges_agree_to_discretization_order_on_curved_paths() {
    let b = antisym(&[(1, 2, 0.3), (0, 3, 0.1)]);
    let l = LagrangianSpec::counterexample_b(Event::origin(R), b, Phi::ProperTime { m: 1.0 }).unwrap();
    let x1 = Event::new(R, [4.0, 1.0, 0.5, 0.0]);
    let gap = |n: usize| {
        let p: Vec<WorldPath> = [GaugeOption::UniformChord, GaugeOption::Projection]
            .into_iter()
            .map(|gauge| {
                let opts = SolveOptions { n, gauge, ..Default::default() };
                solve_stationary_with(&l, &Event::origin(R), &x1, &opts).unwrap().path
            })
            .collect();
        p[0].polyline_distance(&p[1])
    };
    let (g1, g2) = (gap(40), gap(80));
    assert!(g2 < 1e-5 && g2 < 0.6 * g1, "{g1:e} {g2:e}");
}


/// Relativistic path from per-segment spatial velocities (|v| < 1) and
/// time steps.
fn rel_path(steps: &[([f64; 3], f64)]) -> WorldPath {
    let mut nodes = vec![[0.0; 4]];
    for (v, dt) in steps {
        let p = *nodes.last().unwrap();
        nodes.push([p[0] + dt, p[1] + dt * v[0], p[2] + dt * v[1], p[3] + dt * v[2]]);
    }
    WorldPath::new(R, nodes).unwrap()
}

fn slow_velocity() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-0.55f64..0.55)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn action_ignores_node_relabeling(
        steps in prop::collection::vec((slow_velocity(), 0.05f64..1.0), 3..25),
        gaps in prop::collection::vec(1e-3f64..3.0, 25),
        start in -5.0f64..5.0,
    ) {
        let p = rel_path(&steps);
        let b = antisym(&[(1, 2, 0.3), (0, 3, 0.1)]);
        let l = LagrangianSpec::counterexample_b(Event::origin(R), b, Phi::ProperTime { m: 1.0 }).unwrap();
        let mut acc = start;
        let params: Vec<f64> = std::iter::once(start)
            .chain(gaps.iter().take(steps.len()).map(|g| { acc += g; acc }))
            .collect();
        let q = p.remap(params).unwrap();
        let (a, c) = (action(&l, &p).unwrap(), action(&l, &q).unwrap());
        prop_assert!((a - c).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn free_rel_action_is_mass_times_proper_time(
        steps in prop::collection::vec((slow_velocity(), 0.05f64..1.0), 1..25),
        m in 0.1f64..10.0,
    ) {
        let p = rel_path(&steps);
        let l = LagrangianSpec::free_rel(Quantity::new(m, Dim::PER_SECOND)).unwrap();
        let (s, tau) = (action(&l, &p).unwrap(), proper_time(&p).unwrap().value);
        prop_assert!((s - m * tau).abs() <= 1e-12 * s);
    }
}
