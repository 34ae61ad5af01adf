//! Newton solver for the semilinear state equation and the linear solves
//! built on its linearization: adjoint, variational and relaxed equations.

use log::debug;

use crate::error::{Error, Result};
use crate::fem::{assemble, load_divergence, load_scalar, solve_cg_with, LinearSystem, StateField};
use crate::mesh::Mesh;
use crate::problem::{ControlField, DirectionField, Problem, Reaction};
use crate::relaxation::{effective_aalpha, theta};
use crate::scalar::Scalar;
use crate::sparse::{norm, CgOptions};
use crate::tensor::{Mat, SpdMatrix};

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions<T> {
    /// Stop once the residual drops below `rtol` times the initial one.
    pub rtol: T,
    /// Residual level accepted when damping can no longer decrease it.
    pub accept: T,
    pub max_iter: usize,
    pub cg: CgOptions<T>,
}

impl<T: Scalar> Default for NewtonOptions<T> {
    fn default() -> Self {
        Self { rtol: T::tol(1e-12, 64.0), accept: T::tol(1e-9, 1024.0), max_iter: 50, cg: CgOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

const MAX_HALVINGS: usize = 40;

fn residual<T: Scalar>(
    mesh: &Mesh<T>,
    k: &LinearSystem<T>,
    reaction: &impl Fn(usize) -> Reaction<T>,
    y: &StateField<T>,
) -> Result<Vec<T>> {
    let g: Vec<T> = (0..mesh.num_elements()).map(|e| reaction(e).value(mesh.centroid_value(e, y))).collect();
    let load = load_scalar(mesh, &g)?;
    let yi = y.interior(mesh);
    let ky = k.matrix.mul(&yi);
    Ok((0..mesh.num_interior()).map(|d| ky[d] - load[mesh.node_of_dof(d)]).collect())
}

/// Damped Newton for `−∇·(A∇y) = F(x, y)` with the given coefficient field
/// and per-element reaction of the catalog form (so `F_y ≤ 0`).
pub fn newton_solve<T: Scalar>(
    mesh: &Mesh<T>,
    coeff: &[SpdMatrix<T>],
    reaction: impl Fn(usize) -> Reaction<T>,
    opts: &NewtonOptions<T>,
) -> Result<(StateField<T>, NewtonReport)> {
    let ne = mesh.num_elements();
    let zero = vec![T::zero(); ne];
    let stiffness = LinearSystem { matrix: assemble(mesh, coeff, &zero)?, rhs: Vec::new() };
    let mut y = StateField::zeros(mesh);
    let mut r = residual(mesh, &stiffness, &reaction, &y)?;
    let r0 = norm(&r);
    let mut rnorm = r0;
    let mut history = vec![r0.to_f64_lossy()];
    if r0 == T::zero() {
        return Ok((y, NewtonReport { iterations: 0, residual_history: history }));
    }
    let fail = |iterations: usize, history: Vec<f64>| Error::NewtonFailed { iterations, history };
    for it in 1..=opts.max_iter {
        let slope: Vec<T> = (0..ne).map(|e| -reaction(e).dy(mesh.centroid_value(e, &y))).collect();
        let jac = assemble(mesh, coeff, &slope)?;
        let rhs: Vec<T> = r.iter().map(|&x| -x).collect();
        let (step, _) = crate::sparse::pcg(&jac, &rhs, &opts.cg).map_err(|_| fail(it, history.clone()))?;
        let step = StateField::from_interior(mesh, &step)?;

        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial = y.axpy(t, &step);
            let rt = residual(mesh, &stiffness, &reaction, &trial)?;
            let n = norm(&rt);
            if n < rnorm {
                accepted = Some((trial, rt, n));
                break;
            }
            t = t * T::lit(0.5);
        }
        let Some((trial, rt, n)) = accepted else {
            if rnorm <= opts.accept * r0 {
                debug!("newton: stagnated at relative residual {:e}", (rnorm / r0).to_f64_lossy());
                return Ok((y, NewtonReport { iterations: it - 1, residual_history: history }));
            }
            return Err(fail(it, history));
        };
        y = trial;
        r = rt;
        rnorm = n;
        history.push(rnorm.to_f64_lossy());
        if rnorm <= opts.rtol * r0 {
            debug!("newton: converged in {it} steps, relative residual {:e}", (rnorm / r0).to_f64_lossy());
            return Ok((y, NewtonReport { iterations: it, residual_history: history }));
        }
    }
    if rnorm <= opts.accept * r0 {
        return Ok((y, NewtonReport { iterations: opts.max_iter, residual_history: history }));
    }
    Err(fail(opts.max_iter, history))
}

/// State `ȳ` for the control `u`.
pub fn solve_state<T: Scalar>(problem: &Problem<T>, u: &ControlField) -> Result<StateField<T>> {
    solve_state_with(problem, u, &NewtonOptions::default()).map(|(y, _)| y)
}

pub fn solve_state_with<T: Scalar>(
    problem: &Problem<T>,
    u: &ControlField,
    opts: &NewtonOptions<T>,
) -> Result<(StateField<T>, NewtonReport)> {
    problem.check_control(u)?;
    let coeff = problem.coeff_field(u);
    newton_solve(problem.mesh(), &coeff, |e| problem.data(e, u.label(e)).f, opts)
}

/// `−∇·(A(ū)∇·) − f_y(ȳ, ū)` over interior nodes.
pub fn linearized_operator<T: Scalar>(
    problem: &Problem<T>,
    ubar: &ControlField,
    ybar: &[T],
) -> Result<crate::sparse::CsrMatrix<T>> {
    let mesh = problem.mesh();
    let slope: Vec<T> = (0..mesh.num_elements())
        .map(|e| -problem.data(e, ubar.label(e)).f.dy(mesh.centroid_value(e, ybar)))
        .collect();
    assemble(mesh, &problem.coeff_field(ubar), &slope)
}

fn solve_linearized<T: Scalar>(
    problem: &Problem<T>,
    ubar: &ControlField,
    ybar: &[T],
    full_rhs: &[T],
) -> Result<StateField<T>> {
    let mesh = problem.mesh();
    let system = LinearSystem::new(mesh, linearized_operator(problem, ubar, ybar)?, full_rhs)?;
    solve_cg_with(mesh, &system, &CgOptions::default()).map(|(y, _)| y)
}

/// Adjoint `−∇·(A(ū)∇ψ) = f_y ψ − f⁰_y`.
pub fn solve_adjoint<T: Scalar>(problem: &Problem<T>, ubar: &ControlField, ybar: &[T]) -> Result<StateField<T>> {
    problem.check_control(ubar)?;
    let mesh = problem.mesh();
    let g: Vec<T> = (0..mesh.num_elements())
        .map(|e| -problem.data(e, ubar.label(e)).f0.dy(mesh.centroid_value(e, ybar)))
        .collect();
    solve_linearized(problem, ubar, ybar, &load_scalar(mesh, &g)?)
}

/// `J = ∫ f⁰(x, y, u)` by the centroid rule.
pub fn evaluate_cost<T: Scalar>(problem: &Problem<T>, u: &ControlField, y: &[T]) -> T {
    let mesh = problem.mesh();
    (0..mesh.num_elements())
        .map(|e| mesh.area(e) * problem.data(e, u.label(e)).f0.value(mesh.centroid_value(e, y)))
        .sum()
}

/// `Θ` per element; zero where `u = ū`.
pub fn theta_field<T: Scalar>(
    problem: &Problem<T>,
    ubar: &ControlField,
    u: &ControlField,
    ell: &DirectionField<T>,
) -> Vec<Mat<T>> {
    (0..problem.num_elements())
        .map(|e| {
            let (v, vbar) = (u.label(e), ubar.label(e));
            if v == vbar {
                Mat::zeros(2)
            } else {
                theta(&problem.data(e, v).a, &problem.data(e, vbar).a, ell.get(e))
            }
        })
        .collect()
}

fn reaction_jump<T: Scalar>(problem: &Problem<T>, ubar: &ControlField, u: &ControlField, ybar: &[T]) -> Vec<T> {
    let mesh = problem.mesh();
    (0..mesh.num_elements())
        .map(|e| {
            let y = mesh.centroid_value(e, ybar);
            problem.data(e, u.label(e)).f.value(y) - problem.data(e, ubar.label(e)).f.value(y)
        })
        .collect()
}

/// Variational state `−∇·(A(ū)∇Y) = f_y Y + ∇·(Θ∇ȳ) + f(ȳ,u) − f(ȳ,ū)`.
pub fn solve_variational<T: Scalar>(
    problem: &Problem<T>,
    ubar: &ControlField,
    ybar: &[T],
    u: &ControlField,
    ell: &DirectionField<T>,
) -> Result<StateField<T>> {
    problem.check_control(ubar)?;
    problem.check_control(u)?;
    problem.check_directions(ell)?;
    let mesh = problem.mesh();
    let th = theta_field(problem, ubar, u, ell);
    let mut rhs = load_divergence(mesh, &th, ybar)?;
    let jump = load_scalar(mesh, &reaction_jump(problem, ubar, u, ybar))?;
    rhs.iter_mut().zip(&jump).for_each(|(a, b)| *a += *b);
    solve_linearized(problem, ubar, ybar, &rhs)
}

/// Variant for singular candidates:
/// `−∇·(A(ū)∇Y) = f_y Y + ∇·(A(u)∇ȳ) + f(ȳ,u)`.
pub fn solve_variational_singular<T: Scalar>(
    problem: &Problem<T>,
    ubar: &ControlField,
    ybar: &[T],
    u: &ControlField,
) -> Result<StateField<T>> {
    problem.check_control(ubar)?;
    problem.check_control(u)?;
    let mesh = problem.mesh();
    let au: Vec<Mat<T>> = problem.coeff_field(u).iter().map(|a| *a.mat()).collect();
    let mut rhs = load_divergence(mesh, &au, ybar)?;
    let g: Vec<T> = (0..mesh.num_elements())
        .map(|e| problem.data(e, u.label(e)).f.value(mesh.centroid_value(e, ybar)))
        .collect();
    let load = load_scalar(mesh, &g)?;
    rhs.iter_mut().zip(&load).for_each(|(a, b)| *a += *b);
    solve_linearized(problem, ubar, ybar, &rhs)
}

/// `A^α` per element; `A(ū)` where `u = ū`.
pub fn relaxed_coeff_field<T: Scalar>(
    problem: &Problem<T>,
    ubar: &ControlField,
    u: &ControlField,
    ell: &DirectionField<T>,
    alpha: T,
) -> Result<Vec<SpdMatrix<T>>> {
    (0..problem.num_elements())
        .map(|e| {
            let (v, vbar) = (u.label(e), ubar.label(e));
            let abar = problem.data(e, vbar).a;
            if v == vbar {
                Ok(abar)
            } else {
                effective_aalpha(&problem.data(e, v).a, &abar, ell.get(e), alpha)
            }
        })
        .collect()
}

/// Relaxed state `−∇·(A^α∇y) = (1−α) f(y,ū) + α f(y,u)`.
pub fn solve_relaxed_state<T: Scalar>(
    problem: &Problem<T>,
    ubar: &ControlField,
    u: &ControlField,
    ell: &DirectionField<T>,
    alpha: T,
) -> Result<StateField<T>> {
    solve_relaxed_state_with(problem, ubar, u, ell, alpha, &NewtonOptions::default()).map(|(y, _)| y)
}

pub fn solve_relaxed_state_with<T: Scalar>(
    problem: &Problem<T>,
    ubar: &ControlField,
    u: &ControlField,
    ell: &DirectionField<T>,
    alpha: T,
    opts: &NewtonOptions<T>,
) -> Result<(StateField<T>, NewtonReport)> {
    if !(alpha >= T::zero() && alpha <= T::one()) {
        return Err(Error::invalid(format!("relaxation weight {alpha} outside [0, 1]")));
    }
    problem.check_control(ubar)?;
    problem.check_control(u)?;
    problem.check_directions(ell)?;
    let coeff = relaxed_coeff_field(problem, ubar, u, ell, alpha)?;
    newton_solve(
        problem.mesh(),
        &coeff,
        |e| problem.data(e, ubar.label(e)).f.mix(&problem.data(e, u.label(e)).f, alpha),
        opts,
    )
}
