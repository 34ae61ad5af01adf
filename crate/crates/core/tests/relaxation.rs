use ellopt_core::catalog::{ProblemSpec, TwoPhase};
use ellopt_core::optimality::OptimalityContext;
use ellopt_core::relaxation::{effective_aalpha, expansion_probe, relaxed_cost, theta};
use ellopt_core::tensor::{arithmetic_mean, harmonic_mean};
use ellopt_core::{ControlField, Mat, SpdMatrix, UnitVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_spd(r: &mut ChaCha8Rng) -> SpdMatrix<f64> {
    let (a, b, c) = (r.gen_range(-1.5..1.5), r.gen_range(-1.5..1.5), r.gen_range(-1.5..1.5));
    SpdMatrix::new(Mat::from_rows(&[&[a * a + b * b + 0.1, a * c], &[a * c, c * c + 0.1]]).unwrap()).unwrap()
}

#[test]
fn theta_is_the_derivative_at_zero() {
    let mut r = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..200 {
        let (au, ab) = (random_spd(&mut r), random_spd(&mut r));
        let ell = UnitVector::from_angle(r.gen_range(0.0..std::f64::consts::PI));
        let h = 1e-6;
        let fd = (*effective_aalpha(&au, &ab, &ell, h).unwrap().mat() - *ab.mat()).scale(1.0 / h);
        let th = theta(&au, &ab, &ell);
        assert!((fd - th).frobenius_norm() <= 1e-4 * (1.0 + th.frobenius_norm()));
    }
}

#[test]
fn relaxed_coefficient_lies_between_the_means() {
    let mut r = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..200 {
        let (au, ab) = (random_spd(&mut r), random_spd(&mut r));
        let ell = UnitVector::from_angle(r.gen_range(0.0..std::f64::consts::PI));
        let alpha = r.gen_range(0.0..1.0);
        let a = effective_aalpha(&au, &ab, &ell, alpha).unwrap();
        let lo = *a.mat() - *harmonic_mean(&au, &ab, alpha).mat();
        let hi = *arithmetic_mean(&au, &ab, alpha).mat() - *a.mat();
        assert!(lo.min_eigenvalue() >= -1e-10 && hi.min_eigenvalue() >= -1e-10);
    }
    let (au, ab) = (random_spd(&mut r), random_spd(&mut r));
    let ell = UnitVector::basis(2, 1);
    assert_eq!(effective_aalpha(&au, &ab, &ell, 0.0).unwrap(), ab);
    assert_eq!(effective_aalpha(&au, &ab, &ell, 1.0).unwrap(), au);
    assert!(effective_aalpha(&au, &ab, &ell, -0.1).is_err());
}

#[test]
fn probe_validates_weights_and_reduces_to_the_cost() {
    let inst = ProblemSpec::TwoPhase(TwoPhase::default()).build::<f64>(12).unwrap();
    let p = &inst.problem;
    let ctx = OptimalityContext::new(p, inst.reference.clone()).unwrap();
    let u = ControlField::constant(p, 1).unwrap();
    let ell = ctx.selected_directions(p, &u).unwrap();
    assert!((relaxed_cost(p, &ctx, &u, &ell, 0.0).unwrap() - ctx.cost).abs() < 1e-12);
    assert!(expansion_probe(p, &ctx, &u, &ell, &[]).is_err());
    assert!(expansion_probe(p, &ctx, &u, &ell, &[0.1, 0.2]).is_err());
    assert!(expansion_probe(p, &ctx, &u, &ell, &[1.0]).is_err());
    let table = expansion_probe(p, &ctx, &u, &ell, &[0.2, 0.1]).unwrap();
    let r = &table.rows[1];
    let j = r.j_alpha.unwrap();
    assert!((r.first_order.unwrap() - (j - table.j_bar) / 0.1).abs() < 1e-10);
    assert!((r.second_order.unwrap() - (j - table.j_bar - 0.1 * table.j1) / 0.01).abs() < 1e-8);
}
