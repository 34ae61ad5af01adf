use ellopt_core::catalog::{LaplaceMs, ProblemSpec, RankOneGap, RegionFree, TwoPhase};
use ellopt_core::optimality::OptimalityContext;
use ellopt_core::problem::{PointData, Reaction, RunningCost};
use ellopt_core::semilinear::{evaluate_cost, solve_adjoint, solve_relaxed_state, solve_state, solve_state_with, solve_variational, NewtonOptions};
use ellopt_core::{ControlField, Problem};

fn catalog() -> Vec<ProblemSpec> {
    vec![
        ProblemSpec::LaplaceMs(LaplaceMs { a1: 1.0, a2: 2.0, c: 1.0, gamma: 1.0 }),
        ProblemSpec::TwoPhase(TwoPhase::default()),
        ProblemSpec::RegionFree(RegionFree::default()),
        ProblemSpec::RankOneGap(RankOneGap::default()),
    ]
}

#[test]
fn newton_converges_quickly_on_every_catalog_problem() {
    for spec in catalog() {
        let inst = spec.build::<f64>(24).unwrap();
        for v in 0..inst.problem.num_labels() {
            let u = ControlField::constant(&inst.problem, v).unwrap();
            let (_, rep) = solve_state_with(&inst.problem, &u, &NewtonOptions::default()).unwrap();
            assert!(rep.iterations <= 12, "{} label {v}: {} steps", spec.name(), rep.iterations);
            let h = &rep.residual_history;
            assert!(h.last().unwrap() <= &(1e-10 * h[0].max(1e-300)), "{}: {h:?}", spec.name());
        }
    }
}

#[test]
fn reaction_and_cost_derivatives_match_differences() {
    let f = Reaction::new(2.0, 1.5, 0.7);
    let g = RunningCost::new(0.3, -0.4, 1.2, 0.25);
    let h = 1e-5;
    for y in [-1.3, -0.2, 0.0, 0.6, 2.1] {
        let fd = |k: &dyn Fn(f64) -> f64| (k(y + h) - k(y - h)) / (2.0 * h);
        assert!((fd(&|t| f.value(t)) - f.dy(y)).abs() < 1e-8);
        assert!((fd(&|t| f.dy(t)) - f.dyy(y)).abs() < 1e-8);
        assert!((fd(&|t| g.value(t)) - g.dy(y)).abs() < 1e-8);
        assert!((fd(&|t| g.dy(t)) - g.dyy(y)).abs() < 1e-8);
        assert!(f.dy(y) <= 0.0);
    }
    let m = f.mix(&Reaction::new(-1.0, 0.5, 0.1), 0.25);
    assert!((m.value(0.8) - (0.75 * f.value(0.8) + 0.25 * Reaction::new(-1.0, 0.5, 0.1).value(0.8))).abs() < 1e-14);
}

/// Same problem with the source of label `ubar` raised by `delta * bump(e)`.
fn with_source_shift(problem: &Problem<f64>, ubar: &ControlField, bump: &[f64], delta: f64) -> Problem<f64> {
    let nl = problem.num_labels();
    let data: Vec<PointData<f64>> = (0..problem.num_elements() * nl)
        .map(|k| {
            let (e, v) = (k / nl, k % nl);
            let mut d = *problem.data(e, v);
            if v == ubar.label(e) {
                d.f.source += delta * bump[e];
            }
            d
        })
        .collect();
    Problem::new(problem.name(), problem.mesh().clone(), nl, data).unwrap()
}

#[test]
fn adjoint_gives_source_sensitivity_of_the_cost() {
    for spec in [ProblemSpec::TwoPhase(TwoPhase::default()), ProblemSpec::RegionFree(RegionFree { gamma: 0.5, ..Default::default() })] {
        let inst = spec.build::<f64>(16).unwrap();
        let (p, u) = (&inst.problem, &inst.reference);
        let mesh = p.mesh();
        let y = solve_state(p, u).unwrap();
        let psi = solve_adjoint(p, u, &y).unwrap();
        let bump: Vec<f64> = (0..mesh.num_elements())
            .map(|e| {
                let [x, z] = mesh.centroid(e);
                (3.0 * x).sin() + z * z
            })
            .collect();
        let cost = |d: f64| {
            let q = with_source_shift(p, u, &bump, d);
            evaluate_cost(&q, u, &solve_state(&q, u).unwrap())
        };
        let h = 1e-4;
        let fd = (cost(h) - cost(-h)) / (2.0 * h);
        let pairing: f64 = (0..mesh.num_elements()).map(|e| mesh.area(e) * mesh.centroid_value(e, &psi) * bump[e]).sum();
        assert!((fd + pairing).abs() <= 1e-6 * (1.0 + fd.abs()), "{}: fd {fd} vs -<psi,g> {}", spec.name(), -pairing);
    }
}

#[test]
fn rank_one_adjoint_is_a_multiple_of_the_state() {
    let spec = RankOneGap { p: 0.7, ..Default::default() };
    let inst = ProblemSpec::RankOneGap(spec).build::<f64>(20).unwrap();
    let y = solve_state(&inst.problem, &inst.reference).unwrap();
    let psi = solve_adjoint(&inst.problem, &inst.reference, &y).unwrap();
    let ymax = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(ymax > 0.1);
    assert!(y.iter().zip(psi.iter()).all(|(a, b)| (b + 0.7 * a).abs() <= 1e-9 * ymax));
}

#[test]
fn relaxed_state_interpolates_between_endpoints() {
    let inst = ProblemSpec::TwoPhase(TwoPhase::default()).build::<f64>(16).unwrap();
    let p = &inst.problem;
    let ubar = ControlField::constant(p, 0).unwrap();
    let u = ControlField::constant(p, 1).unwrap();
    let ctx = OptimalityContext::new(p, ubar.clone()).unwrap();
    let ell = ctx.selected_directions(p, &u).unwrap();
    let y0 = solve_relaxed_state(p, &ubar, &u, &ell, 0.0).unwrap();
    let y1 = solve_relaxed_state(p, &ubar, &u, &ell, 1.0).unwrap();
    let ya = solve_state(p, &ubar).unwrap();
    let yb = solve_state(p, &u).unwrap();
    assert!(y0.iter().zip(ya.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
    assert!(y1.iter().zip(yb.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
    assert!(solve_relaxed_state(p, &ubar, &u, &ell, 1.5).is_err());
}

#[test]
fn variational_state_is_the_derivative_of_the_relaxed_state() {
    let inst = ProblemSpec::TwoPhase(TwoPhase::default()).build::<f64>(16).unwrap();
    let p = &inst.problem;
    let ubar = inst.reference.clone();
    let u = ControlField::constant(p, 1).unwrap();
    let ctx = OptimalityContext::new(p, ubar.clone()).unwrap();
    let ell = ctx.selected_directions(p, &u).unwrap();
    let yv = solve_variational(p, &ubar, &ctx.ybar, &u, &ell).unwrap();
    let (l2, _) = ellopt_core::fem::norms(p.mesh(), &yv);
    assert!(l2 > 1e-3);
    let errs: Vec<f64> = [1e-1, 3e-2, 1e-2, 3e-3]
        .iter()
        .map(|&a| {
            let ya = solve_relaxed_state(p, &ubar, &u, &ell, a).unwrap();
            let diff: Vec<f64> = ya.iter().zip(ctx.ybar.iter()).zip(yv.iter()).map(|((y, yb), v)| (y - yb) / a - v).collect();
            ellopt_core::fem::norms(p.mesh(), &diff).0
        })
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!(ratio > 2.4 && ratio < 4.0, "{errs:?}");
    }
    assert!(errs[3] < 0.05 * l2);
}
