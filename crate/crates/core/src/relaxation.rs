//! Relaxed coefficients and costs, expansion probes in the relaxation
//! weight, and the second-order integrals.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::StateField;
use crate::optimality::{hamiltonian_gap, quotient, OptimalityContext};
use crate::problem::{ControlField, DirectionField, Problem};
use crate::scalar::Scalar;
use crate::semilinear::{solve_relaxed_state, solve_variational, solve_variational_singular};
use crate::tensor::{lemma41_matrix, Mat, SpdMatrix, UnitVector};

/// `A^α = αA(u) + (1−α)A(ū) − α(1−α) ΔA ℓℓᵀ ΔA / [(1−α)ℓᵀA(u)ℓ + αℓᵀA(ū)ℓ]`
/// with `ΔA = A(u) − A(ū)`. Returns the endpoints exactly at `α ∈ {0, 1}`.
pub fn effective_aalpha<T: Scalar>(
    au: &SpdMatrix<T>,
    aubar: &SpdMatrix<T>,
    ell: &UnitVector<T>,
    alpha: T,
) -> Result<SpdMatrix<T>> {
    if !(alpha >= T::zero() && alpha <= T::one()) {
        return Err(Error::invalid(format!("relaxation weight {alpha} outside [0, 1]")));
    }
    if alpha == T::zero() {
        return Ok(*aubar);
    }
    if alpha == T::one() {
        return Ok(*au);
    }
    Ok(lemma41_matrix(au, aubar, alpha, ell.vector())?)
}

/// `Θ = ΔA − ΔA ℓℓᵀ ΔA / ℓᵀA(u)ℓ`, the `α`-derivative of `A^α` at 0.
pub fn theta<T: Scalar>(au: &SpdMatrix<T>, aubar: &SpdMatrix<T>, ell: &UnitVector<T>) -> Mat<T> {
    let d = *au.mat() - *aubar.mat();
    let w = d.mat_vec(ell.vector());
    (d - w.outer(&w).scale(T::one() / au.quad_form(ell.vector()))).symmetrize()
}

/// `J^α = ∫ α f⁰(y^α, u) + (1−α) f⁰(y^α, ū)`.
pub fn relaxed_cost<T: Scalar>(
    problem: &Problem<T>,
    ctx: &OptimalityContext<T>,
    u: &ControlField,
    ell: &DirectionField<T>,
    alpha: T,
) -> Result<T> {
    let y = solve_relaxed_state(problem, &ctx.ubar, u, ell, alpha)?;
    Ok(relaxed_cost_of(problem, &ctx.ubar, u, &y, alpha))
}

fn relaxed_cost_of<T: Scalar>(problem: &Problem<T>, ubar: &ControlField, u: &ControlField, y: &[T], alpha: T) -> T {
    let mesh = problem.mesh();
    (0..mesh.num_elements())
        .map(|e| {
            let yc = mesh.centroid_value(e, y);
            let (v, vbar) = (u.label(e), ubar.label(e));
            let c = if v == vbar {
                problem.data(e, vbar).f0.value(yc)
            } else {
                alpha * problem.data(e, v).f0.value(yc) + (T::one() - alpha) * problem.data(e, vbar).f0.value(yc)
            };
            mesh.area(e) * c
        })
        .sum()
}

/// Per-element integrand of the first-order coefficient:
/// `H(ū) − H(u) − quotient(ℓ)`.
pub fn first_order_integrand<T: Scalar>(
    problem: &Problem<T>,
    ctx: &OptimalityContext<T>,
    u: &ControlField,
    ell: &DirectionField<T>,
) -> Result<Vec<T>> {
    problem.check_control(u)?;
    problem.check_directions(ell)?;
    (0..problem.num_elements())
        .into_par_iter()
        .map(|e| {
            let (v, vbar) = (u.label(e), ctx.ubar.label(e));
            if v == vbar {
                return Ok(T::zero());
            }
            let cell = ctx.cell(problem, e);
            Ok(hamiltonian_gap(&cell, vbar, v)? - quotient(&cell, vbar, v, ell.get(e))?)
        })
        .collect()
}

/// `J¹ = ∫ [H(ū) − H(u) − quotient(ℓ)]`, the slope of `J^α` at `α = 0`.
pub fn first_order_coefficient<T: Scalar>(
    problem: &Problem<T>,
    ctx: &OptimalityContext<T>,
    u: &ControlField,
    ell: &DirectionField<T>,
) -> Result<T> {
    let g = first_order_integrand(problem, ctx, u, ell)?;
    Ok(crate::fem::integrate(problem.mesh(), &g))
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Scalar + Serialize")]
pub struct ExpansionRow<T> {
    pub alpha: T,
    pub j_alpha: Option<T>,
    /// `(J^α − J(ū)) / α`.
    pub first_order: Option<T>,
    /// `(J^α − J(ū) − α J¹) / α²`.
    pub second_order: Option<T>,
    /// Linear extrapolation of the second-order column to `α = 0` from this
    /// row and the previous one.
    pub second_order_limit: Option<T>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Scalar + Serialize")]
pub struct ExpansionTable<T> {
    pub j_bar: T,
    pub j1: T,
    pub rows: Vec<ExpansionRow<T>>,
    /// Intercept of the least-squares line through the first-order column.
    pub first_order_fit: Option<T>,
    /// Extrapolated value from the two smallest `α`.
    pub second_order_limit: Option<T>,
    /// `min_α (J^α − J(ū))`.
    pub min_increment: Option<T>,
}

/// Tabulates `J^α` over a strictly decreasing list of weights in `(0, 1)`.
/// Rows are independent and solved concurrently; a failed solve is recorded
/// on its row.
pub fn expansion_probe<T: Scalar>(
    problem: &Problem<T>,
    ctx: &OptimalityContext<T>,
    u: &ControlField,
    ell: &DirectionField<T>,
    alphas: &[T],
) -> Result<ExpansionTable<T>> {
    if alphas.is_empty() {
        return Err(Error::invalid("empty list of relaxation weights"));
    }
    if alphas.iter().any(|&a| !(a > T::zero() && a < T::one())) {
        return Err(Error::invalid("relaxation weights must lie in (0, 1)"));
    }
    if alphas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("relaxation weights must be strictly decreasing"));
    }
    let j1 = first_order_coefficient(problem, ctx, u, ell)?;
    let j_bar = ctx.cost;
    let solved: Vec<Result<T>> = alphas.par_iter().map(|&a| relaxed_cost(problem, ctx, u, ell, a)).collect();

    let mut rows: Vec<ExpansionRow<T>> = alphas
        .iter()
        .zip(solved)
        .map(|(&alpha, r)| match r {
            Ok(j) => ExpansionRow {
                alpha,
                j_alpha: Some(j),
                first_order: Some((j - j_bar) / alpha),
                second_order: Some((j - j_bar - alpha * j1) / (alpha * alpha)),
                second_order_limit: None,
                error: None,
            },
            Err(e) => ExpansionRow {
                alpha,
                j_alpha: None,
                first_order: None,
                second_order: None,
                second_order_limit: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    for k in 1..rows.len() {
        if let (Some(prev), Some(cur)) = (rows[k - 1].second_order, rows[k].second_order) {
            let (a0, a1) = (rows[k - 1].alpha, rows[k].alpha);
            rows[k].second_order_limit = Some(cur + (cur - prev) * a1 / (a0 - a1));
        }
    }

    let pts: Vec<(T, T)> = rows.iter().filter_map(|r| r.first_order.map(|f| (r.alpha, f))).collect();
    let first_order_fit = line_intercept(&pts);
    let second_order_limit = rows.last().and_then(|r| r.second_order_limit);
    let min_increment = rows
        .iter()
        .filter_map(|r| r.j_alpha.map(|j| j - j_bar))
        .fold(None, |m: Option<T>, d| Some(m.map_or(d, |m| m.min(d))));
    Ok(ExpansionTable { j_bar, j1, rows, first_order_fit, second_order_limit, min_increment })
}

/// Intercept of the least-squares line `s + q·x` through `pts`.
fn line_intercept<T: Scalar>(pts: &[(T, T)]) -> Option<T> {
    match pts.len() {
        0 => None,
        1 => Some(pts[0].1),
        _ => {
            let n = T::from_count(pts.len());
            let mx = pts.iter().map(|p| p.0).sum::<T>() / n;
            let my = pts.iter().map(|p| p.1).sum::<T>() / n;
            let sxx: T = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
            let sxy: T = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let slope = if sxx > T::zero() { sxy / sxx } else { T::zero() };
            Some(my - slope * mx)
        }
    }
}

/// Term-by-term value of a second-order integral.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Scalar + Serialize")]
pub struct SocReport<T> {
    pub value: T,
    /// `∫ [H(ū) − H(u)] ℓᵀA(ū)ℓ / ℓᵀA(u)ℓ`.
    pub hamiltonian_ratio: T,
    /// `∫ [H_y(ū) − H_y(u)] Y`.
    pub hy_difference: T,
    /// `−½ ∫ H_yy(ū) Y²`.
    pub hyy: T,
    /// `∫ ⟨[A(u) − A(ū)]∇ψ̄, ∇Y⟩`.
    pub coefficient_pairing: T,
    /// `−∫ ⟨ΔAℓ,∇Y⟩⟨ΔAℓ,∇ψ̄⟩ / ℓᵀA(u)ℓ`: the difference between pairing
    /// `∇Y` with `Θ∇ψ̄` rather than `ΔA∇ψ̄`. It vanishes where the
    /// orthogonality `⟨ΔA∇ψ̄,ℓ⟩ = 0` holds and is not part of `value`.
    pub polarization_correction: T,
    pub tol_soc: T,
    pub pass: bool,
    pub precondition_ok: bool,
    pub warnings: Vec<String>,
}

impl<T: Scalar> SocReport<T> {
    fn finish(mut self) -> Self {
        self.value = self.hamiltonian_ratio + self.hy_difference + self.hyy + self.coefficient_pairing;
        let scale = self.hamiltonian_ratio.abs() + self.hy_difference.abs() + self.hyy.abs() + self.coefficient_pairing.abs();
        self.tol_soc = T::lit(1e-6) * (T::one() + scale);
        self.pass = self.value >= -self.tol_soc;
        self
    }

    /// `value + polarization_correction`, the exact second derivative of the
    /// relaxed cost when the first-order integrand vanishes pointwise.
    pub fn corrected_value(&self) -> T {
        self.value + self.polarization_correction
    }
}

struct SocTerms<T> {
    ratio: T,
    hy: T,
    hyy: T,
    pairing: T,
    correction: T,
}

fn soc_terms<T: Scalar>(
    problem: &Problem<T>,
    ctx: &OptimalityContext<T>,
    u: &ControlField,
    ell: Option<&DirectionField<T>>,
    y_var: &[T],
) -> Result<SocTerms<T>> {
    let mesh = problem.mesh();
    let per_element = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let (v, vbar) = (u.label(e), ctx.ubar.label(e));
            let area = mesh.area(e);
            let yc = mesh.centroid_value(e, &ctx.ybar);
            let psi = mesh.centroid_value(e, &ctx.psibar);
            let yv = mesh.centroid_value(e, y_var);
            let (db, du) = (problem.data(e, vbar), problem.data(e, v));
            let hy = |d: &crate::problem::PointData<T>| psi * d.f.dy(yc) - d.f0.dy(yc);
            let hyy = psi * db.f.dyy(yc) - db.f0.dyy(yc);
            let mut t = [T::zero(); 5];
            t[1] = area * (hy(db) - hy(du)) * yv;
            t[2] = -T::lit(0.5) * area * hyy * yv * yv;
            if v != vbar {
                let grad_psi = mesh.gradient(e, &ctx.psibar);
                let grad_yv = mesh.gradient(e, y_var);
                let d = *du.a.mat() - *db.a.mat();
                t[3] = area * d.bilinear(&grad_yv, &grad_psi);
                if let Some(ell) = ell {
                    let l = ell.get(e).vector();
                    let cell = ctx.cell(problem, e);
                    let (au, ab) = (du.a.quad_form(l), db.a.quad_form(l));
                    t[0] = area * hamiltonian_gap(&cell, vbar, v)? * ab / au;
                    let w = d.mat_vec(l);
                    t[4] = -area * w.dot(&grad_yv) * w.dot(&grad_psi) / au;
                }
            }
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    let sum = |k: usize| per_element.iter().map(|t| t[k]).sum::<T>();
    Ok(SocTerms { ratio: sum(0), hy: sum(1), hyy: sum(2), pairing: sum(3), correction: sum(4) })
}

fn report<T: Scalar>(t: SocTerms<T>, precondition_ok: bool, warnings: Vec<String>) -> SocReport<T> {
    SocReport {
        value: T::zero(),
        hamiltonian_ratio: t.ratio,
        hy_difference: t.hy,
        hyy: t.hyy,
        coefficient_pairing: t.pairing,
        polarization_correction: t.correction,
        tol_soc: T::zero(),
        pass: false,
        precondition_ok,
        warnings,
    }
    .finish()
}

/// Second-order integral for a weakly singular pair `(u, ℓ)`, with `Y` from
/// the variational equation.
pub fn soc_value<T: Scalar>(
    problem: &Problem<T>,
    ctx: &OptimalityContext<T>,
    u: &ControlField,
    ell: &DirectionField<T>,
) -> Result<(SocReport<T>, StateField<T>)> {
    let y_var = solve_variational(problem, &ctx.ubar, &ctx.ybar, u, ell)?;
    let terms = soc_terms(problem, ctx, u, Some(ell), &y_var)?;
    let tol = ctx.singularity_tolerance(problem);
    let integrand = first_order_integrand(problem, ctx, u, ell)?;
    let worst = integrand.iter().fold(T::zero(), |m, g| m.max(g.abs()));
    let mut warnings = Vec::new();
    let ok = worst <= tol;
    if !ok {
        warnings.push(format!(
            "first-order integrand reaches {:e}, above the singularity tolerance {:e}",
            worst.to_f64_lossy(),
            tol.to_f64_lossy()
        ));
    }
    Ok((report(terms, ok, warnings), y_var))
}

/// Second-order integral for a singular candidate: no Hamiltonian-ratio term
/// and `Y` from the singular variational equation. The value is computed even
/// when the candidate is not singular, with a warning.
pub fn soc_value_singular<T: Scalar>(
    problem: &Problem<T>,
    ctx: &OptimalityContext<T>,
    u: &ControlField,
) -> Result<(SocReport<T>, StateField<T>)> {
    let y_var = solve_variational_singular(problem, &ctx.ubar, &ctx.ybar, u)?;
    let terms = soc_terms(problem, ctx, u, None, &y_var)?;
    let tol = ctx.singularity_tolerance(problem);
    let mut warnings = Vec::new();
    let mut worst = T::zero();
    for e in ctx.ubar.diff(u) {
        let cell = ctx.cell(problem, e);
        worst = worst.max(hamiltonian_gap(&cell, ctx.ubar.label(e), u.label(e))?.abs());
    }
    let ok = worst <= tol;
    if !ok {
        let msg = format!(
            "reference control is not singular at the candidate: Hamiltonian gap reaches {:e} (tolerance {:e})",
            worst.to_f64_lossy(),
            tol.to_f64_lossy()
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok((report(terms, ok, warnings), y_var))
}

/// Two-term integral `∫ [ℋ_y(ū) − ℋ_y(u)] Y − ½ ℋ_yy(ū) Y²` with
/// `ℋ = ψ f − f⁰`, valid when the coefficient does not depend on the control.
/// `Y` solves `−∇·(A∇Y) = f_y Y + f(ȳ,u) − f(ȳ,ū)`, assembled directly.
pub fn soc_value_control_free_coefficient<T: Scalar>(
    problem: &Problem<T>,
    ctx: &OptimalityContext<T>,
    u: &ControlField,
) -> Result<(T, StateField<T>)> {
    problem.check_control(u)?;
    let mesh = problem.mesh();
    for e in 0..mesh.num_elements() {
        for v in 1..problem.num_labels() {
            if problem.data(e, v).a != problem.data(e, 0).a {
                return Err(Error::invalid(format!("coefficient depends on the control at element {e}")));
            }
        }
    }
    let jump: Vec<T> = (0..mesh.num_elements())
        .map(|e| {
            let y = mesh.centroid_value(e, &ctx.ybar);
            problem.data(e, u.label(e)).f.value(y) - problem.data(e, ctx.ubar.label(e)).f.value(y)
        })
        .collect();
    let rhs = crate::fem::load_scalar(mesh, &jump)?;
    let op = crate::semilinear::linearized_operator(problem, &ctx.ubar, &ctx.ybar)?;
    let system = crate::fem::LinearSystem::new(mesh, op, &rhs)?;
    let y_var = crate::fem::solve_cg(mesh, &system)?;
    let t = soc_terms(problem, ctx, u, None, &y_var)?;
    Ok((t.hy + t.hyy, y_var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Vector;

    #[test]
    fn aalpha_endpoints_and_laminate_means() {
        let au = SpdMatrix::scalar(2, 4.0).unwrap();
        let ab = SpdMatrix::identity(2);
        let e1 = UnitVector::basis(2, 0);
        assert_eq!(effective_aalpha(&au, &ab, &e1, 0.0).unwrap(), ab);
        assert_eq!(effective_aalpha(&au, &ab, &e1, 1.0).unwrap(), au);
        let half = effective_aalpha(&au, &ab, &e1, 0.5).unwrap();
        assert!((*half.mat() - Mat::diag(&[1.6, 2.5])).frobenius_norm() < 1e-14);
    }

    #[test]
    fn theta_rank_one_example() {
        let sigma = 0.7;
        let e1 = Vector::from_slice(&[1.0, 0.0]);
        let au = SpdMatrix::new(Mat::identity(2) + e1.outer(&e1).scale(sigma)).unwrap();
        let th = theta(&au, &SpdMatrix::identity(2), &UnitVector::basis(2, 0));
        let expect = e1.outer(&e1).scale(sigma / (1.0 + sigma));
        assert!((th - expect).frobenius_norm() < 1e-15);
    }

    #[test]
    fn intercept_of_exact_line() {
        let pts: Vec<(f64, f64)> = [0.1, 0.03, 0.01].iter().map(|&a| (a, 2.0 - 3.0 * a)).collect();
        assert!((line_intercept(&pts).unwrap() - 2.0).abs() < 1e-14);
    }
}
