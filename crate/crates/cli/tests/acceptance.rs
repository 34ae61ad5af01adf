//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ellopt::{improve_control, ImproveOptions};
use ellopt_core::catalog::{LaplaceMs, ProblemSpec, RankOneGap, RegionFree, TwoPhase};
use ellopt_core::fem::error_norms;
use ellopt_core::homogenization::{corrector_1d, decimal_measure, epsilon_sweep, hlimit_laminate};
use ellopt_core::optimality::{classify, verify_pontryagin, OptimalityContext};
use ellopt_core::relaxation::{expansion_probe, soc_value, soc_value_control_free_coefficient, soc_value_singular};
use ellopt_core::semilinear::solve_state;
use ellopt_core::tensor::{arithmetic_mean, e417_identity_residual, harmonic_mean, lemma41_matrix, loewner_margin, pair_max_bilinear};
use ellopt_core::{ControlField, Laminate, Mat, Mesh, RationalDirection, SpdMatrix, UnitVector, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_spd(r: &mut ChaCha8Rng, n: usize) -> SpdMatrix<f64> {
    let g: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
    let rows: Vec<&[f64]> = g.iter().map(|v| v.as_slice()).collect();
    let g = Mat::from_rows(&rows).unwrap();
    SpdMatrix::new((g.transpose().matmul(&g) + Mat::identity(n).scale(0.05)).symmetrize()).unwrap()
}

fn random_unit(r: &mut ChaCha8Rng, n: usize) -> UnitVector<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        if let Ok(u) = UnitVector::normalize(Vector::from_slice(&v)) {
            return u;
        }
    }
}

fn algebraic_identities() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let (mut residual, mut margin) = (0.0f64, f64::INFINITY);
    for n in [2, 3] {
        for _ in 0..1000 {
            let (b1, b2) = (random_spd(&mut r, n), random_spd(&mut r, n));
            let alpha = r.gen_range(0.01..0.99);
            residual = residual.max(e417_identity_residual(&b1, &b2, alpha));
            let mu = random_unit(&mut r, n);
            let g = lemma41_matrix(&b1, &b2, alpha, mu.vector()).unwrap();
            margin = margin.min(loewner_margin(g.mat(), harmonic_mean(&b1, &b2, alpha).mat()));
            margin = margin.min(loewner_margin(arithmetic_mean(&b1, &b2, alpha).mat(), g.mat()));
        }
    }
    ensure(residual <= 1e-10 && margin >= -1e-10, format!("identity residual {residual:.2e}, smallest bound margin {margin:.2e}"))
}

fn sphere_maximum() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let grid: Vec<[f64; 2]> = (0..100_000)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / 100_000.0;
            [t.cos(), t.sin()]
        })
        .collect();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let xi = [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
        let eta = [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
        let (m, _) = pair_max_bilinear(&Vector::from_slice(&xi), &Vector::from_slice(&eta)).unwrap();
        let searched = grid
            .iter()
            .map(|l| (xi[0] * l[0] + xi[1] * l[1]) * (eta[0] * l[0] + eta[1] * l[1]))
            .fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max((m - searched).abs());
    }
    ensure(worst <= 1e-5, format!("largest closed-form vs grid difference {worst:.2e}"))
}

fn decimal_measures() -> Outcome {
    let mut worst = 0.0f64;
    for nu in [[1, 2], [3, 1], [2, -3]] {
        for alpha in [0.25, 0.5, 0.7] {
            worst = worst.max((decimal_measure::<f64>(&nu, alpha, 1000).unwrap() - alpha).abs());
        }
    }
    ensure(worst <= 2e-3, format!("largest |measure − α| {worst:.2e} at N = 1000"))
}

fn fem_convergence() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for (label, spec) in [
        ("linear", LaplaceMs::default()),
        ("semilinear", LaplaceMs { a1: 1.0, a2: 2.0, c: 1.0, gamma: 1.0 }),
    ] {
        let errs: Vec<(f64, f64)> = [8, 16, 32, 64]
            .iter()
            .map(|&m| {
                let inst = ProblemSpec::LaplaceMs(spec.clone()).build::<f64>(m).unwrap();
                let y = solve_state(&inst.problem, &inst.reference).unwrap();
                error_norms(
                    inst.problem.mesh(),
                    &y,
                    |x, y| (PI * x).sin() * (PI * y).sin(),
                    |x, y| [PI * (PI * x).cos() * (PI * y).sin(), PI * (PI * x).sin() * (PI * y).cos()],
                )
            })
            .collect();
        let l2 = errs.windows(2).map(|w| (w[0].0 / w[1].0).log2()).fold(f64::INFINITY, f64::min);
        let h1 = errs.windows(2).map(|w| (w[0].1 / w[1].1).log2()).fold(f64::INFINITY, f64::min);
        ok &= l2 >= 1.8 && h1 >= 0.9;
        detail.push(format!("{label}: min L2 order {l2:.3}, min H1 order {h1:.3}"));
    }
    ensure(ok, detail.join("; "))
}

fn homogenization() -> Outcome {
    let mesh = Mesh::<f64>::new(256).unwrap();
    let (b, c) = (SpdMatrix::<f64>::identity(2), SpdMatrix::scalar(2, 4.0).unwrap());
    let lam = Laminate::uniform(b, c, 0.5, RationalDirection::from_integers(&[1, 0]).unwrap(), mesh.num_elements()).unwrap();
    let limit = hlimit_laminate(&lam, mesh.num_elements()).unwrap();
    let diag = limit
        .iter()
        .map(|a| {
            let m = a.mat();
            (m.get(0, 0) - 1.6).abs().max((m.get(1, 1) - 2.5).abs()).max(m.get(0, 1).abs()).max(m.get(1, 0).abs())
        })
        .fold(0.0f64, f64::max);
    let g = vec![1.0; mesh.num_elements()];
    let rows = epsilon_sweep(&lam, &mesh, &g, &[0.125, 0.0625, 0.03125]).unwrap();
    let errs: Vec<f64> = rows.iter().map(|r| r.l2_error).collect();
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    ensure(
        decreasing && errs[2] <= 0.5 * errs[0] && diag <= 1e-12,
        format!("L2 errors {:.3e}, {:.3e}, {:.3e}; limit deviation from diag(1.6, 2.5) {diag:.1e}", errs[0], errs[1], errs[2]),
    )
}

fn improved_two_phase() -> (ellopt_core::Problem<f64>, ControlField) {
    let inst = ProblemSpec::TwoPhase(TwoPhase::default()).build::<f64>(64).unwrap();
    let report = improve_control(&inst.problem, inst.reference.clone(), &ImproveOptions::default()).unwrap();
    (inst.problem, report.control)
}

fn first_order_condition() -> Outcome {
    let (p, u) = improved_two_phase();
    let ctx = OptimalityContext::new(&p, u).unwrap();
    let v = verify_pontryagin(&p, &ctx).unwrap().max_violation;
    ensure(v <= 1e-6, format!("Pontryagin violation {v:.2e} after improvement"))
}

fn first_order_expansion() -> Outcome {
    let (p, ubar) = improved_two_phase();
    let ctx = OptimalityContext::new(&p, ubar.clone()).unwrap();
    let flip = ControlField::new(&p, ubar.labels().iter().map(|&v| 1 - v).collect()).unwrap();
    let ell = ctx.selected_directions(&p, &flip).unwrap();
    let table = expansion_probe(&p, &ctx, &flip, &ell, &[0.1, 0.05, 0.025, 0.0125, 0.00625]).unwrap();
    let fit = table.first_order_fit.unwrap();
    let rel = (fit - table.j1).abs() / table.j1.abs();
    let min_inc = table.min_increment.unwrap();
    ensure(
        rel <= 0.02 && min_inc >= -1e-6,
        format!("J1 {:.6}, fitted slope {fit:.6} (relative {rel:.1e}); min J^a - J {min_inc:.3e}", table.j1),
    )
}

fn weak_singularity() -> Outcome {
    let inst = ProblemSpec::RankOneGap(RankOneGap::default()).build::<f64>(32).unwrap();
    let p = &inst.problem;
    let ctx = OptimalityContext::new(p, inst.reference.clone()).unwrap();
    let u = ControlField::constant(p, 1).unwrap();
    let tol = ctx.singularity_tolerance(p);
    let rep = classify(p, &ctx, "rank-one", &u, tol).unwrap();
    let ell = ctx.selected_directions(p, &u).unwrap();
    let table = expansion_probe(p, &ctx, &u, &ell, &[0.2, 0.1, 0.05, 0.025, 0.0125]).unwrap();
    let (soc, _) = soc_value(p, &ctx, &u, &ell).unwrap();
    let lim = table.second_order_limit.unwrap();
    let rel = (lim - soc.value).abs() / soc.value.abs();
    ensure(
        rep.all_weakly_singular && table.j1.abs() <= tol && rel <= 0.05 && soc.value >= -soc.tol_soc,
        format!(
            "weakly singular {}, |J1| {:.1e} (tol {tol:.1e}), soc {:.5} vs extrapolated {lim:.5} (relative {rel:.1e})",
            rep.all_weakly_singular,
            table.j1.abs(),
            soc.value
        ),
    )
}

fn singular_reduction() -> Outcome {
    let inst = ProblemSpec::RegionFree(RegionFree::default()).build::<f64>(32).unwrap();
    let p = &inst.problem;
    let ctx = OptimalityContext::new(p, inst.reference.clone()).unwrap();
    let u = inst.reference.with_labels(&inst.region, 1);
    let ell = ctx.selected_directions(p, &u).unwrap();
    let table = expansion_probe(p, &ctx, &u, &ell, &[0.2, 0.1, 0.05, 0.025, 0.0125]).unwrap();
    let (soc, _) = soc_value_singular(p, &ctx, &u).unwrap();
    let (cf, _) = soc_value_control_free_coefficient(p, &ctx, &u).unwrap();
    let lim = table.second_order_limit.unwrap();
    let rel = (lim - soc.value).abs() / soc.value.abs();
    let gap = (soc.value - cf).abs();
    ensure(rel <= 0.05 && gap <= 1e-10, format!("singular soc {:.6e} vs extrapolated {lim:.6e} (relative {rel:.1e}); control-free gap {gap:.1e}", soc.value))
}

fn corrector_closure() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (b, c) = (random_spd(&mut r, 2), random_spd(&mut r, 2));
        let alpha = r.gen_range(0.01..0.99);
        let mu = random_unit(&mut r, 2);
        let k = corrector_1d(&b, &c, alpha, &mu);
        let g = lemma41_matrix(&b, &c, alpha, mu.vector()).unwrap();
        worst = worst.max(k.closure(alpha).norm()).max((k.reconstruct(&b, &c, alpha, &mu) - *g.mat()).frobenius_norm());
    }
    ensure(worst <= 1e-10, format!("largest zero-mean or reconstruction residual {worst:.2e}"))
}

fn run_demo(config: &Path, out: &Path) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_ellopt"))
        .arg("run")
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&o.stderr).into_owned())
    }
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| matches!(p.extension().and_then(|x| x.to_str()), Some("csv" | "json")))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let config = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/rank-one-gap.json");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_demo(&config, a.path())?;
    run_demo(&config, b.path())?;
    let (fa, fb) = (artifacts(a.path()), artifacts(b.path()));
    let differing: Vec<&str> = fa.iter().zip(&fb).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
    ensure(
        fa.len() == fb.len() && fa.len() > 5 && differing.is_empty(),
        format!("{} CSV/JSON artifacts compared, differing: {differing:?}", fa.len()),
    )
}

fn main() {
    let criteria: [(u32, &str, u64, fn() -> Outcome); 11] = [
        (1, "algebraic identities", 5, algebraic_identities),
        (2, "sphere maximum", 5, sphere_maximum),
        (3, "decimal measure", 10, decimal_measures),
        (4, "FEM convergence", 30, fem_convergence),
        (5, "laminate homogenization", 60, homogenization),
        (6, "first-order condition", 30, first_order_condition),
        (7, "first-order expansion", 60, first_order_expansion),
        (8, "weak-singularity pipeline", 60, weak_singularity),
        (9, "singular reduction", 60, singular_reduction),
        (10, "corrector closure", 5, corrector_closure),
        (11, "determinism", 120, determinism),
    ];
    let mut failed = 0;
    for (n, name, budget, f) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or(e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let (ok, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        let timing = if in_time { format!("{:.2}s", elapsed.as_secs_f64()) } else { format!("{:.2}s over {budget}s budget", elapsed.as_secs_f64()) };
        println!("{} criterion {n} ({name}): {detail} [{timing}]", if ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    println!("{} of 11 criteria passed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
