//! Pointwise fixed-point improvement of a control field.

use ellopt_core::optimality::{foc_gap, hamiltonian, OptimalityContext};
use ellopt_core::semilinear::{evaluate_cost, solve_state};
use ellopt_core::{ControlField, Problem, Scalar};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy)]
pub struct ImproveOptions {
    pub max_rounds: usize,
    /// Relative slack for the monotonicity monitor, scaled by `max(1, |J|)`.
    pub tol_j: f64,
    /// Accept a round only if it lowers the cost; rules out cycles.
    pub strict: bool,
    /// Relative threshold below which a gap counts as a tie, scaled by `max(1, max |H|)`.
    pub tie: f64,
    /// Halvings of the switched set tried before declaring a monotonicity failure.
    pub max_backtracks: usize,
}

impl Default for ImproveOptions {
    fn default() -> Self {
        Self { max_rounds: 100, tol_j: 1e-6, strict: true, tie: 1e-9, max_backtracks: 12 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundLog {
    pub round: usize,
    pub cost: f64,
    pub switched: usize,
    pub backtracks: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImproveReport {
    #[serde(skip)]
    pub control: ControlField,
    pub converged: bool,
    pub rounds: Vec<RoundLog>,
    pub final_cost: f64,
    pub warnings: Vec<String>,
}

/// Repeatedly solves state and adjoint and moves every element to the label
/// minimizing the first-order gap, keeping the incumbent on ties. Rounds
/// that would raise the cost are shrunk by halving the switched set, most
/// negative gaps first.
pub fn improve_control<T: Scalar>(
    problem: &Problem<T>,
    u0: ControlField,
    opts: &ImproveOptions,
) -> Result<ImproveReport, CliError> {
    problem.check_control(&u0)?;
    let mut u = u0;
    let mut history: Vec<ControlField> = vec![u.clone()];
    let mut rounds = Vec::new();
    let mut warnings = Vec::new();
    let mut ctx = OptimalityContext::new(problem, u.clone())?;
    for round in 0..opts.max_rounds {
        let cells = ctx.cells(problem);
        let scale = cells
            .par_iter()
            .map(|c| (0..c.num_labels()).map(|v| hamiltonian(c, v).map_or(T::zero(), |h| h.abs())).fold(T::zero(), T::max))
            .reduce(T::zero, T::max);
        let tie = -T::lit(opts.tie) * T::one().max(scale);
        let mut moves = cells
            .par_iter()
            .map(|c| {
                let vbar = u.label(c.element);
                let mut best = (T::zero(), vbar);
                for v in 0..c.num_labels() {
                    let g = foc_gap(c, vbar, v)?;
                    if g < tie && g < best.0 {
                        best = (g, v);
                    }
                }
                Ok((c.element, best.0, best.1))
            })
            .collect::<Result<Vec<_>, ellopt_core::Error>>()?;
        moves.retain(|&(e, _, v)| v != u.label(e));
        if moves.is_empty() {
            let final_cost = ctx.cost.to_f64_lossy();
            rounds.push(RoundLog { round, cost: final_cost, switched: 0, backtracks: 0 });
            return Ok(ImproveReport { control: u, converged: true, rounds, final_cost, warnings });
        }
        moves.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));

        let j = ctx.cost;
        let slack = T::lit(opts.tol_j) * T::one().max(j.abs());
        let mut take = moves.len();
        let mut backtracks = 0;
        let next = loop {
            let mut trial = u.clone();
            for &(e, _, v) in &moves[..take] {
                trial.set(e, v);
            }
            let y = solve_state(problem, &trial)?;
            let cost = evaluate_cost(problem, &trial, &y);
            if cost < j || (!opts.strict && cost <= j + slack) {
                break trial;
            }
            if backtracks == opts.max_backtracks || take == 1 {
                return Err(CliError::NotMonotone {
                    round,
                    before: j.to_f64_lossy(),
                    after: cost.to_f64_lossy(),
                    switched: take,
                });
            }
            backtracks += 1;
            take = take.div_ceil(2);
        };
        log::debug!("round {round}: J = {:e}, switched {take} of {} ({backtracks} backtracks)", j.to_f64_lossy(), moves.len());
        rounds.push(RoundLog { round, cost: j.to_f64_lossy(), switched: take, backtracks });

        if let Some(k) = history.iter().rev().take(4).position(|h| *h == next) {
            return Err(CliError::Oscillation { period: k + 1, previous: Box::new(u), current: Box::new(next) });
        }
        history.push(next.clone());
        u = next;
        ctx = OptimalityContext::new(problem, u.clone())?;
    }
    let msg = format!("improver stopped after {} rounds without reaching a fixed point", opts.max_rounds);
    log::warn!("{msg}");
    warnings.push(msg);
    let final_cost = ctx.cost.to_f64_lossy();
    Ok(ImproveReport { control: u, converged: false, rounds, final_cost, warnings })
}
