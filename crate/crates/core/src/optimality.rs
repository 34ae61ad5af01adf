//! Pointwise Hamiltonian machinery: first-order gaps, direction selection
//! and singularity classification of candidate controls.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::StateField;
use crate::problem::{ControlField, DirectionField, Problem};
use crate::scalar::Scalar;
use crate::semilinear::{evaluate_cost, solve_adjoint, solve_state};
use crate::tensor::{pair_max_bilinear, SpdMatrix, UnitVector, Vector};

/// Everything the Hamiltonian needs on one element.
#[derive(Debug, Clone, PartialEq)]
pub struct CellData<T> {
    pub element: usize,
    pub y: T,
    pub psi: T,
    pub grad_y: Vector<T>,
    pub grad_psi: Vector<T>,
    /// `A(·, v)`, `f(·, ȳ, v)` and `f⁰(·, ȳ, v)` for every label `v`.
    pub a: Vec<SpdMatrix<T>>,
    pub f: Vec<T>,
    pub f0: Vec<T>,
}

impl<T: Scalar> CellData<T> {
    pub fn from_fields(problem: &Problem<T>, ybar: &[T], psibar: &[T], e: usize) -> Self {
        let mesh = problem.mesh();
        let y = mesh.centroid_value(e, ybar);
        let labels = 0..problem.num_labels();
        Self {
            element: e,
            y,
            psi: mesh.centroid_value(e, psibar),
            grad_y: mesh.gradient(e, ybar),
            grad_psi: mesh.gradient(e, psibar),
            a: labels.clone().map(|v| problem.data(e, v).a).collect(),
            f: labels.clone().map(|v| problem.data(e, v).f.value(y)).collect(),
            f0: labels.map(|v| problem.data(e, v).f0.value(y)).collect(),
        }
    }

    pub fn num_labels(&self) -> usize {
        self.a.len()
    }

    fn check(&self, v: usize) -> Result<()> {
        if v < self.num_labels() {
            Ok(())
        } else {
            Err(Error::UnknownLabel { label: v, size: self.num_labels() })
        }
    }
}

/// `H = ψ f − f⁰ − ⟨A(v)∇ȳ, ∇ψ̄⟩`.
pub fn hamiltonian<T: Scalar>(cell: &CellData<T>, v: usize) -> Result<T> {
    cell.check(v)?;
    Ok(cell.psi * cell.f[v] - cell.f0[v] - cell.a[v].mat().bilinear(&cell.grad_psi, &cell.grad_y))
}

/// `H(ū) − H(v)`.
pub fn hamiltonian_gap<T: Scalar>(cell: &CellData<T>, ubar: usize, v: usize) -> Result<T> {
    if ubar == v {
        cell.check(v)?;
        return Ok(T::zero());
    }
    Ok(hamiltonian(cell, ubar)? - hamiltonian(cell, v)?)
}

fn jumps<T: Scalar>(cell: &CellData<T>, ubar: usize, v: usize) -> (Vector<T>, Vector<T>) {
    let d = *cell.a[ubar].mat() - *cell.a[v].mat();
    (d.mat_vec(&cell.grad_y), d.mat_vec(&cell.grad_psi))
}

/// `⟨[A(ū)−A(v)]∇ȳ,ℓ⟩⟨[A(ū)−A(v)]∇ψ̄,ℓ⟩ / ℓᵀA(v)ℓ`.
pub fn quotient<T: Scalar>(cell: &CellData<T>, ubar: usize, v: usize, ell: &UnitVector<T>) -> Result<T> {
    cell.check(ubar)?;
    cell.check(v)?;
    let (jy, jp) = jumps(cell, ubar, v);
    let l = ell.vector();
    Ok(jy.dot(l) * jp.dot(l) / cell.a[v].quad_form(l))
}

/// Maximum of the quotient over the unit circle, with a maximizer.
///
/// With `ξ' = A(v)^{-1/2}[A(ū)−A(v)]∇ȳ` and `η'` likewise for `∇ψ̄`, the
/// substitution `μ = A(v)^{-1/2}ν` turns the quotient into `⟨ν,ξ'⟩⟨ν,η'⟩`.
pub fn max_quotient<T: Scalar>(cell: &CellData<T>, ubar: usize, v: usize) -> Result<(T, UnitVector<T>)> {
    cell.check(ubar)?;
    cell.check(v)?;
    let (jy, jp) = jumps(cell, ubar, v);
    let root = cell.a[v].inv_sqrt();
    let (value, nu) = pair_max_bilinear(&root.mat_vec(&jy), &root.mat_vec(&jp))?;
    let ell = UnitVector::normalize(root.mat_vec(nu.vector()))?;
    Ok((value, ell))
}

/// `H(ū) − H(v) − max_μ quotient(μ)`; nonnegative for every `v` at an
/// optimal control. Exactly zero for `v = ū`.
pub fn foc_gap<T: Scalar>(cell: &CellData<T>, ubar: usize, v: usize) -> Result<T> {
    if ubar == v {
        cell.check(v)?;
        return Ok(T::zero());
    }
    Ok(hamiltonian_gap(cell, ubar, v)? - max_quotient(cell, ubar, v)?.0)
}

/// Direction attaining the maximal quotient.
pub fn select_direction<T: Scalar>(cell: &CellData<T>, ubar: usize, v: usize) -> Result<UnitVector<T>> {
    Ok(max_quotient(cell, ubar, v)?.1)
}

/// Reference control with its state, adjoint and cost. Rebuild it whenever
/// the reference control changes.
#[derive(Debug, Clone)]
pub struct OptimalityContext<T> {
    pub ubar: ControlField,
    pub ybar: StateField<T>,
    pub psibar: StateField<T>,
    pub cost: T,
}

impl<T: Scalar> OptimalityContext<T> {
    pub fn new(problem: &Problem<T>, ubar: ControlField) -> Result<Self> {
        let ybar = solve_state(problem, &ubar)?;
        let psibar = solve_adjoint(problem, &ubar, &ybar)?;
        let cost = evaluate_cost(problem, &ubar, &ybar);
        Ok(Self { ubar, ybar, psibar, cost })
    }

    pub fn cell(&self, problem: &Problem<T>, e: usize) -> CellData<T> {
        CellData::from_fields(problem, &self.ybar, &self.psibar, e)
    }

    pub fn cells(&self, problem: &Problem<T>) -> Vec<CellData<T>> {
        (0..problem.num_elements()).into_par_iter().map(|e| self.cell(problem, e)).collect()
    }

    /// Directions from [`select_direction`] for the candidate `u`; the first
    /// basis vector where `u = ū`.
    pub fn selected_directions(&self, problem: &Problem<T>, u: &ControlField) -> Result<DirectionField<T>> {
        problem.check_control(u)?;
        let dirs = (0..problem.num_elements())
            .into_par_iter()
            .map(|e| {
                let (v, vbar) = (u.label(e), self.ubar.label(e));
                if v == vbar {
                    Ok(UnitVector::basis(2, 0))
                } else {
                    select_direction(&self.cell(problem, e), vbar, v)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        DirectionField::new(dirs)
    }

    /// `tol_sing = max(1e-8, 1e-6 · max |H|)` over elements and labels.
    pub fn singularity_tolerance(&self, problem: &Problem<T>) -> T {
        let scale = (0..problem.num_elements())
            .into_par_iter()
            .map(|e| {
                let cell = self.cell(problem, e);
                (0..cell.num_labels()).map(|v| hamiltonian(&cell, v).map_or(T::zero(), |h| h.abs())).fold(T::zero(), T::max)
            })
            .reduce(T::zero, T::max);
        T::tol(1e-8, 64.0).max(T::lit(1e-6) * scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementStatus {
    Strict,
    Singular,
    WeaklySingular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GlobalClass {
    Nonsingular,
    PartiallySingular,
    FullySingular,
    PartiallyWeaklySingular,
    FullyWeaklySingular,
}

/// Per-element verdicts for one candidate control.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Scalar + Serialize")]
pub struct CandidateReport<T> {
    pub name: String,
    /// The candidate coincides with `ū`.
    pub trivial: bool,
    pub status: Vec<ElementStatus>,
    pub singular: Vec<bool>,
    pub weakly_singular: Vec<bool>,
    /// Both `⟨[A(ū)−A(u)]∇ȳ,ℓ⟩` and `⟨[A(ū)−A(u)]∇ψ̄,ℓ⟩` vanish.
    pub orthogonal: Vec<bool>,
    pub directions: DirectionField<T>,
    pub hamiltonian_gap: Vec<T>,
    pub quotient: Vec<T>,
    pub all_singular: bool,
    pub all_weakly_singular: bool,
    pub all_orthogonal: bool,
    pub differing_elements: usize,
    /// `max(0, −foc_gap)` over the candidate's elements.
    pub max_violation: T,
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Scalar + Serialize")]
pub struct SingularityReport<T> {
    pub global: GlobalClass,
    pub tol_sing: T,
    pub max_violation: T,
    pub candidates: Vec<CandidateReport<T>>,
    pub notes: Vec<String>,
}

/// Classifies one candidate against `ū` element by element.
pub fn classify<T: Scalar>(
    problem: &Problem<T>,
    ctx: &OptimalityContext<T>,
    name: &str,
    u: &ControlField,
    tol_sing: T,
) -> Result<CandidateReport<T>> {
    problem.check_control(u)?;
    struct Row<T> {
        status: ElementStatus,
        singular: bool,
        weak: bool,
        orthogonal: bool,
        ell: UnitVector<T>,
        gap: T,
        quotient: T,
        violation: T,
    }
    let rows = (0..problem.num_elements())
        .into_par_iter()
        .map(|e| {
            let (v, vbar) = (u.label(e), ctx.ubar.label(e));
            let cell = ctx.cell(problem, e);
            let gap = hamiltonian_gap(&cell, vbar, v)?;
            let (q, ell) = if v == vbar { (T::zero(), UnitVector::basis(2, 0)) } else { max_quotient(&cell, vbar, v)? };
            let foc = gap - q;
            let singular = gap.abs() <= tol_sing;
            let weak = foc.abs() <= tol_sing;
            let (jy, jp) = jumps(&cell, vbar, v);
            let l = ell.vector();
            let orth_tol = |j: &Vector<T>| T::tol(1e-8, 64.0) * T::one().max(j.norm());
            let orthogonal = jy.dot(l).abs() <= orth_tol(&jy) && jp.dot(l).abs() <= orth_tol(&jp);
            let status = if singular {
                ElementStatus::Singular
            } else if weak {
                ElementStatus::WeaklySingular
            } else {
                ElementStatus::Strict
            };
            Ok(Row { status, singular, weak, orthogonal, ell, gap, quotient: q, violation: (-foc).max(T::zero()) })
        })
        .collect::<Result<Vec<_>>>()?;

    let differing = ctx.ubar.diff(u).len();
    Ok(CandidateReport {
        name: name.to_owned(),
        trivial: differing == 0,
        all_singular: rows.iter().all(|r| r.singular),
        all_weakly_singular: rows.iter().all(|r| r.weak),
        all_orthogonal: rows.iter().all(|r| r.orthogonal),
        max_violation: rows.iter().map(|r| r.violation).fold(T::zero(), T::max),
        status: rows.iter().map(|r| r.status).collect(),
        singular: rows.iter().map(|r| r.singular).collect(),
        weakly_singular: rows.iter().map(|r| r.weak).collect(),
        orthogonal: rows.iter().map(|r| r.orthogonal).collect(),
        directions: DirectionField::new(rows.iter().map(|r| r.ell).collect())?,
        hamiltonian_gap: rows.iter().map(|r| r.gap).collect(),
        quotient: rows.iter().map(|r| r.quotient).collect(),
        differing_elements: differing,
    })
}

/// Classifies `ū` relative to a list of named candidates.
///
/// A candidate counts as singular (weakly singular) when every element
/// passes the corresponding pointwise test. The global label is relative to
/// the probe set; candidates equal to `ū` carry no information.
pub fn classify_candidates<T: Scalar>(
    problem: &Problem<T>,
    ctx: &OptimalityContext<T>,
    candidates: &[(String, ControlField)],
) -> Result<SingularityReport<T>> {
    classify_candidates_with(problem, ctx, candidates, None)
}

/// As [`classify_candidates`], with an explicit singularity tolerance.
pub fn classify_candidates_with<T: Scalar>(
    problem: &Problem<T>,
    ctx: &OptimalityContext<T>,
    candidates: &[(String, ControlField)],
    tol_sing: Option<T>,
) -> Result<SingularityReport<T>> {
    let tol_sing = tol_sing.unwrap_or_else(|| ctx.singularity_tolerance(problem));
    let reports = candidates
        .iter()
        .map(|(name, u)| classify(problem, ctx, name, u, tol_sing))
        .collect::<Result<Vec<_>>>()?;
    let mut notes = Vec::new();
    let informative: Vec<&CandidateReport<T>> = reports.iter().filter(|r| !r.trivial).collect();
    for r in reports.iter().filter(|r| r.trivial) {
        notes.push(format!("candidate '{}' equals the reference control; every element is trivially singular", r.name));
    }
    let global = if informative.is_empty() {
        notes.push("no candidate differs from the reference control".to_owned());
        GlobalClass::Nonsingular
    } else if informative.iter().all(|r| r.all_singular) {
        GlobalClass::FullySingular
    } else if informative.iter().all(|r| r.all_weakly_singular) {
        GlobalClass::FullyWeaklySingular
    } else if informative.iter().any(|r| r.all_singular) {
        GlobalClass::PartiallySingular
    } else if informative.iter().any(|r| r.all_weakly_singular) {
        GlobalClass::PartiallyWeaklySingular
    } else {
        GlobalClass::Nonsingular
    };
    let max_violation = reports.iter().map(|r| r.max_violation).fold(T::zero(), T::max);
    Ok(SingularityReport { global, tol_sing, max_violation, candidates: reports, notes })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PontryaginCheck<T> {
    pub max_violation: T,
    pub worst_element: usize,
    pub worst_label: usize,
}

/// `max(0, max_{e,v} −foc_gap)` with its location.
pub fn verify_pontryagin<T: Scalar>(problem: &Problem<T>, ctx: &OptimalityContext<T>) -> Result<PontryaginCheck<T>> {
    let worst = (0..problem.num_elements())
        .into_par_iter()
        .map(|e| {
            let cell = ctx.cell(problem, e);
            let vbar = ctx.ubar.label(e);
            let mut best = (T::zero(), e, vbar);
            for v in 0..cell.num_labels() {
                let viol = -foc_gap(&cell, vbar, v)?;
                if viol > best.0 {
                    best = (viol, e, v);
                }
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((T::zero(), 0, ctx.ubar.label(0)), |acc, x| if x.0 > acc.0 { x } else { acc });
    Ok(PontryaginCheck { max_violation: worst.0, worst_element: worst.1, worst_label: worst.2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Mat;

    fn cell(a: Vec<SpdMatrix<f64>>, psi: f64, gy: [f64; 2], gp: [f64; 2]) -> CellData<f64> {
        let n = a.len();
        CellData {
            element: 0,
            y: 0.0,
            psi,
            grad_y: Vector::from_slice(&gy),
            grad_psi: Vector::from_slice(&gp),
            a,
            f: vec![0.0; n],
            f0: vec![0.0; n],
        }
    }

    #[test]
    fn hamiltonian_examples() {
        let c = cell(vec![SpdMatrix::identity(2)], 0.0, [1.0, 0.0], [1.0, 0.0]);
        assert_eq!(hamiltonian(&c, 0).unwrap(), -1.0);
        let z = cell(vec![SpdMatrix::identity(2)], 0.0, [0.0, 0.0], [0.0, 0.0]);
        assert_eq!(hamiltonian(&z, 0).unwrap(), 0.0);
        assert!(matches!(hamiltonian(&z, 3), Err(Error::UnknownLabel { label: 3, size: 1 })));
    }

    #[test]
    fn gap_vanishes_on_reference_and_without_coefficient_control() {
        let a = SpdMatrix::new(Mat::from_rows(&[&[2.0, 0.3], &[0.3, 1.0]]).unwrap()).unwrap();
        let mut c = cell(vec![a, SpdMatrix::scalar(2, 3.0).unwrap()], 0.4, [1.0, -2.0], [0.5, 0.7]);
        assert_eq!(foc_gap(&c, 1, 1).unwrap(), 0.0);
        c.a[1] = a;
        c.f = vec![1.0, 2.0];
        c.f0 = vec![0.5, 0.1];
        let h = hamiltonian_gap(&c, 0, 1).unwrap();
        assert!((foc_gap(&c, 0, 1).unwrap() - h).abs() < 1e-15);
    }

    #[test]
    fn selected_direction_attains_maximum() {
        let c = cell(
            vec![SpdMatrix::identity(2), SpdMatrix::diag(&[1.0, 4.0]).unwrap()],
            0.0,
            [0.3, -1.1],
            [0.9, 0.2],
        );
        let (m, ell) = max_quotient(&c, 0, 1).unwrap();
        assert!((quotient(&c, 0, 1, &ell).unwrap() - m).abs() < 1e-12);
    }
}
