use ellopt_core::tensor::{
    arithmetic_mean, e417_identity_residual, harmonic_mean, lemma41_matrix, loewner_margin, pair_max_bilinear, spd_inverse,
    spd_sqrt,
};
use ellopt_core::{Mat, SpdMatrix, TensorError, UnitVector, Vector};
use proptest::prelude::*;

fn spd_from(dim: usize, g: &[f64]) -> SpdMatrix<f64> {
    let rows: Vec<Vec<f64>> = (0..dim).map(|i| g[i * dim..(i + 1) * dim].to_vec()).collect();
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let g = Mat::from_rows(&refs).unwrap();
    SpdMatrix::new((g.transpose().matmul(&g) + Mat::identity(dim).scale(0.05)).symmetrize()).unwrap()
}

fn spd_strategy() -> impl Strategy<Value = SpdMatrix<f64>> {
    (2usize..=3).prop_flat_map(|d| prop::collection::vec(-2.0f64..2.0, d * d).prop_map(move |g| spd_from(d, &g)))
}

fn pair_strategy() -> impl Strategy<Value = (SpdMatrix<f64>, SpdMatrix<f64>)> {
    (2usize..=3).prop_flat_map(|d| {
        (prop::collection::vec(-2.0f64..2.0, d * d), prop::collection::vec(-2.0f64..2.0, d * d))
            .prop_map(move |(a, b)| (spd_from(d, &a), spd_from(d, &b)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn sqrt_squares_back_and_inverse_inverts(m in spd_strategy()) {
        let d = m.dim();
        let s = spd_sqrt(m.mat()).unwrap();
        prop_assert!((s.mat().matmul(s.mat()) - *m.mat()).frobenius_norm() <= 1e-10 * (1.0 + m.mat().frobenius_norm()));
        let inv = spd_inverse(m.mat()).unwrap();
        prop_assert!((inv.mat().matmul(m.mat()) - Mat::identity(d)).frobenius_norm() <= 1e-10 * (1.0 + m.mat().frobenius_norm()));
    }

    #[test]
    fn laminate_matrix_lies_between_the_means(
        (b1, b2) in pair_strategy(),
        alpha in 0.001f64..0.999,
        mu in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let d = b1.dim();
        let mu = Vector::from_slice(&mu[..d]);
        prop_assume!(mu.norm() > 1e-3);
        let g = lemma41_matrix(&b1, &b2, alpha, &mu).unwrap();
        let h = harmonic_mean(&b1, &b2, alpha);
        let a = arithmetic_mean(&b1, &b2, alpha);
        prop_assert!(loewner_margin(g.mat(), h.mat()) >= -1e-10);
        prop_assert!(loewner_margin(a.mat(), g.mat()) >= -1e-10);
        prop_assert!(e417_identity_residual(&b1, &b2, alpha) <= 1e-10 * (1.0 + a.mat().frobenius_norm()));
    }

    #[test]
    fn laminate_matrix_ignores_direction_scale((b1, b2) in pair_strategy(), alpha in 0.01f64..0.99, c in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0]) {
        let mu = Vector::basis(b1.dim(), 0) + Vector::basis(b1.dim(), 1).scale(0.3);
        let g1 = lemma41_matrix(&b1, &b2, alpha, &mu).unwrap();
        let g2 = lemma41_matrix(&b1, &b2, alpha, &mu.scale(c)).unwrap();
        prop_assert!((*g1.mat() - *g2.mat()).frobenius_norm() <= 1e-12 * g1.mat().frobenius_norm());
    }

    #[test]
    fn sphere_maximum_beats_every_sampled_direction(xi in prop::collection::vec(-3.0f64..3.0, 2), eta in prop::collection::vec(-3.0f64..3.0, 2)) {
        let (xi, eta) = (Vector::from_slice(&xi), Vector::from_slice(&eta));
        let (m, ell) = pair_max_bilinear(&xi, &eta).unwrap();
        prop_assert!((xi.dot(ell.vector()) * eta.dot(ell.vector()) - m).abs() <= 1e-12 * (1.0 + m.abs()));
        let n = 100_000;
        let grid = (0..n)
            .map(|k| {
                let t = std::f64::consts::PI * k as f64 / n as f64;
                let l = Vector::from_slice(&[t.cos(), t.sin()]);
                xi.dot(&l) * eta.dot(&l)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(m >= grid - 1e-12);
        prop_assert!(m - grid <= 1e-6);
    }
}

#[test]
fn sphere_maximum_closed_form_in_three_dimensions() {
    let xi = Vector::<f64>::from_slice(&[1.0, 2.0, -0.5]);
    let eta = Vector::from_slice(&[0.3, -1.0, 2.0]);
    let (m, ell) = pair_max_bilinear(&xi, &eta).unwrap();
    let expected = 0.5 * (xi.norm() * eta.norm() + xi.dot(&eta));
    assert!((m - expected).abs() < 1e-12);
    assert!((xi.dot(ell.vector()) * eta.dot(ell.vector()) - m).abs() < 1e-12);
}

#[test]
fn sphere_maximum_degenerate_inputs() {
    let z = Vector::<f64>::zeros(2);
    let x = Vector::from_slice(&[1.0, 0.0]);
    assert_eq!(pair_max_bilinear(&z, &x).unwrap().0, 0.0);
    let (m, ell) = pair_max_bilinear(&x, &x.scale(-2.0)).unwrap();
    assert_eq!(m, 0.0);
    assert!(x.dot(ell.vector()).abs() < 1e-15);
    let (m, _) = pair_max_bilinear(&x, &x).unwrap();
    assert!((m - 1.0).abs() < 1e-15);
}

#[test]
fn laminate_matrix_worked_example() {
    let b1 = SpdMatrix::scalar(2, 4.0).unwrap();
    let b2 = SpdMatrix::identity(2);
    let g = lemma41_matrix(&b1, &b2, 0.5, &Vector::basis(2, 0)).unwrap();
    assert!((*g.mat() - Mat::diag(&[1.6, 2.5])).frobenius_norm() < 1e-14);
    let same = lemma41_matrix(&b2, &b2, 0.3, &Vector::basis(2, 1)).unwrap();
    assert_eq!(same, b2);
    assert_eq!(lemma41_matrix(&b1, &b2, 0.5, &Vector::zeros(2)), Err(TensorError::ZeroVector));
}

#[test]
fn spd_construction_rejects_bad_input() {
    let asym = Mat::from_rows(&[&[1.0, 0.5], &[0.0, 1.0]]).unwrap();
    assert!(matches!(SpdMatrix::new(asym), Err(TensorError::NotSymmetric(_))));
    let indefinite = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
    assert!(matches!(SpdMatrix::new(indefinite), Err(TensorError::NotPositiveDefinite { .. })));
    let nearly_singular = Mat::diag(&[1.0, 1e-13]);
    assert!(SpdMatrix::new(nearly_singular).is_err());
    assert!(UnitVector::try_new(Vector::from_slice(&[1.0, 1.0])).is_err());
    assert!(UnitVector::<f64>::normalize(Vector::zeros(3)).is_err());
}

#[test]
fn single_precision_laminate_matches_double() {
    let b1 = SpdMatrix::<f32>::diag(&[2.0, 1.0]).unwrap();
    let b2 = SpdMatrix::<f32>::identity(2);
    let g = lemma41_matrix(&b1, &b2, 0.25, &Vector::from_slice(&[1.0, 1.0])).unwrap();
    let b1d = SpdMatrix::<f64>::diag(&[2.0, 1.0]).unwrap();
    let gd = lemma41_matrix(&b1d, &SpdMatrix::identity(2), 0.25, &Vector::from_slice(&[1.0, 1.0])).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert!((g.mat().get(i, j) as f64 - gd.mat().get(i, j)).abs() < 1e-6);
        }
    }
}
