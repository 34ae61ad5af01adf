//! Quick internal consistency checks, runnable from the command line.

use ellopt_core::catalog::{LaplaceMs, ProblemSpec};
use ellopt_core::fem::error_norms;
use ellopt_core::homogenization::{corrector_1d, decimal_measure, hlimit_matrix};
use ellopt_core::semilinear::solve_state;
use ellopt_core::tensor::{e417_identity_residual, pair_max_bilinear};
use ellopt_core::{Mat, SpdMatrix, UnitVector, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn check(name: &'static str, value: f64, tolerance: f64) -> Check {
    Check { name, value, tolerance, pass: value <= tolerance }
}

fn random_spd(r: &mut ChaCha8Rng) -> SpdMatrix<f64> {
    let g = Mat::from_rows(&[&[r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)], &[r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)]])
        .expect("2x2");
    SpdMatrix::new((g.transpose().matmul(&g) + Mat::identity(2).scale(0.1)).symmetrize()).expect("shifted Gram matrix")
}

pub fn run(seed: u64) -> Vec<Check> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_identity = 0.0f64;
    let mut worst_corrector = 0.0f64;
    for _ in 0..100 {
        let (b, c) = (random_spd(&mut r), random_spd(&mut r));
        let a = r.gen_range(0.05..0.95);
        worst_identity = worst_identity.max(e417_identity_residual(&b, &c, a));
        let mu = UnitVector::from_angle(r.gen_range(0.0..std::f64::consts::PI));
        let k = corrector_1d(&b, &c, a, &mu);
        let g = hlimit_matrix(&b, &c, a, mu.vector()).expect("nonzero direction");
        worst_corrector = worst_corrector.max(k.closure(a).norm()).max((k.reconstruct(&b, &c, a, &mu) - *g.mat()).frobenius_norm());
    }

    let mut worst_sphere = 0.0f64;
    for _ in 0..20 {
        let xi = Vector::from_slice(&[r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)]);
        let eta = Vector::from_slice(&[r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)]);
        let (m, _) = pair_max_bilinear(&xi, &eta).expect("planar");
        let grid = (0..20_000)
            .map(|k| {
                let l = UnitVector::from_angle(std::f64::consts::PI * k as f64 / 20_000.0);
                xi.dot(l.vector()) * eta.dot(l.vector())
            })
            .fold(f64::NEG_INFINITY, f64::max);
        worst_sphere = worst_sphere.max(m - grid);
    }

    let measure = decimal_measure::<f64>(&[1, 2], 0.3, 400).map_or(f64::INFINITY, |v| (v - 0.3).abs());

    let pi = std::f64::consts::PI;
    let errs: Vec<f64> = [8, 16]
        .iter()
        .map(|&m| {
            let inst = ProblemSpec::LaplaceMs(LaplaceMs::default()).build::<f64>(m).expect("catalog");
            let y = solve_state(&inst.problem, &inst.reference).expect("solve");
            error_norms(inst.problem.mesh(), &y, |x, y| (pi * x).sin() * (pi * y).sin(), |_, _| [0.0, 0.0]).0
        })
        .collect();
    let order = (errs[0] / errs[1]).log2();

    vec![
        check("laminate identity residual", worst_identity, 1e-10),
        check("sphere maximum above grid search", worst_sphere.max(0.0), 1e-6),
        check("decimal measure deviation", measure, 5e-3),
        check("corrector closure and reconstruction", worst_corrector, 1e-10),
        check("L2 order deficit below 1.8", (1.8 - order).max(0.0), 0.0),
    ]
}
