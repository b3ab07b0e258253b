use nalgebra::Matrix4;
use noether_lab::symmetry::{
    certify_free, check_finite_symmetry_with, check_infinitesimal_symmetry_with, CertifyOptions, SymmetryStatus,
    Tolerances,
};
use noether_lab::{
    are_equivalent, exp_generator, standard_basis, Dim, Event, LagrangianSpec, ModelKind, Phi, Quantity,
    SamplingConfig, Velocity,
};

const NR: ModelKind = ModelKind::NonRelativistic;
const R: ModelKind = ModelKind::Relativistic;

fn cfg() -> SamplingConfig {
    SamplingConfig { points: 48, directions: 8, ..Default::default() }
}

fn free_nr(m: f64, c: [f64; 3]) -> LagrangianSpec {
    LagrangianSpec::free_nonrel(Quantity::mass(m), Velocity::galilean(c)).unwrap()
}

fn coupling() -> Matrix4<f64> {
    let mut b = Matrix4::zeros();
    for (i, j, v) in [(0, 2, 0.1), (1, 2, 0.4), (1, 3, -0.25)] {
        b[(i, j)] = v;
        b[(j, i)] = -v;
    }
    b
}

fn counterexample(model: ModelKind, o: [f64; 4]) -> LagrangianSpec {
    let phi = match model {
        NR => Phi::Kinetic { m: 1.0, c: [0.0; 3] },
        R => Phi::ProperTime { m: 1.0 },
    };
    LagrangianSpec::counterexample_b(Event::new(model, o), coupling(), phi).unwrap()
}

fn builtins() -> Vec<LagrangianSpec> {
    vec![
        free_nr(1.0, [0.0; 3]),
        free_nr(2.5, [0.3, -0.7, 0.1]),
        LagrangianSpec::free_rel(Quantity::new(1.5, Dim::PER_SECOND)).unwrap(),
        counterexample(NR, [0.0; 4]),
        counterexample(R, [0.0, 1.0, 0.0, 0.0]),
    ]
}

#[test]
fn finite_and_infinitesimal_verdicts_agree() {
    let tol = Tolerances::default();
    for l in builtins() {
        for g in standard_basis(l.model()) {
            let inf = check_infinitesimal_symmetry_with(&l, &g.generator, &cfg(), tol).unwrap();
            for s in [1e-3, 1e-2] {
                let f = exp_generator(&g.generator, s).unwrap();
                let fin = check_finite_symmetry_with(&l, &f, &cfg(), tol).unwrap();
                assert_eq!(
                    fin.is_symmetry(),
                    inf.is_symmetry(),
                    "{:?} {} s={s}: finite {} vs infinitesimal {}",
                    l.model(),
                    g.name,
                    fin.status.label(),
                    inf.status.label()
                );
            }
        }
    }
}

#[test]
fn verdicts_are_invariant_under_equivalence() {
    let opts = CertifyOptions { sampling: cfg(), random_elements: 4, ..Default::default() };
    let pairs = [
        (free_nr(1.2, [0.0; 3]), free_nr(1.2, [0.5, 0.2, -0.4])),
        (counterexample(NR, [0.0; 4]), counterexample(NR, [1.0, -2.0, 0.5, 3.0])),
        (counterexample(R, [0.0; 4]), counterexample(R, [0.5, 0.0, -1.0, 2.0])),
    ];
    for (a, b) in pairs {
        assert!(are_equivalent(&a, &b, &cfg()).unwrap());
        let (ra, rb) = (certify_free(&a, &opts).unwrap(), certify_free(&b, &opts).unwrap());
        for (x, y) in ra.basis_records().zip(rb.basis_records()) {
            assert_eq!(x.verdict.is_symmetry(), y.verdict.is_symmetry(), "{:?} {}", a.model(), x.name);
        }
    }
}

#[test]
fn free_nonrel_statuses_by_direction() {
    let l = free_nr(1.0, [0.0; 3]);
    let tol = Tolerances::default();
    for g in standard_basis(NR) {
        let v = check_infinitesimal_symmetry_with(&l, &g.generator, &cfg(), tol).unwrap();
        if g.name.starts_with("boost") {
            let SymmetryStatus::UpToFullTimeDerivative(w) = &v.status else { panic!("{}: {}", g.name, v.status.label()) };
            assert!(w.norm() > 0.1);
        } else {
            assert_eq!(v.status, SymmetryStatus::ExactInvariance, "{}", g.name);
        }
    }
}

#[test]
fn free_rel_is_exactly_invariant() {
    let l = LagrangianSpec::free_rel(Quantity::new(1.0, Dim::PER_SECOND)).unwrap();
    let opts = CertifyOptions { sampling: cfg(), random_elements: 6, ..Default::default() };
    let report = certify_free(&l, &opts).unwrap();
    assert!(report.records.iter().all(|r| r.verdict.status == SymmetryStatus::ExactInvariance));
}

#[test]
fn report_csv_is_stable_across_runs() {
    let l = counterexample(NR, [0.0; 4]);
    let opts = CertifyOptions { sampling: cfg(), random_elements: 3, seed: 99, ..Default::default() };
    let a = certify_free(&l, &opts).unwrap().to_csv();
    let b = certify_free(&l, &opts).unwrap().to_csv();
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 1 + 10 + 3);
    assert!(a.lines().skip(1).all(|l| l.split(',').count() == 6));
}
