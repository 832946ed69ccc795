//! Initial bounds.
//!
//! The lower bound is the value of player 1's uniform stage strategy played
//! forever (a minimising MDP for player 2). The upper bound is the value of
//! the perfect-information variant of the game, computed by Shapley value
//! iteration with one matrix game per state.

use std::time::Duration;

use web_time::Instant;

use crate::bounds::{AlphaVector, BoundsError, LowerBound, UpperBound, UpperPoint};
use crate::game::{utility_bounds, Game};
use crate::lp::{solve_lp, LpError, LpModel, LpStatus, Relation, Sense};

/// Outcome of an initialisation run.
#[derive(Debug, Clone, PartialEq)]
pub struct InitReport {
    /// Value per state after the final sweep.
    pub values: Vec<f64>,
    /// Sup-norm change of every sweep, in order.
    pub residuals: Vec<f64>,
    /// False when the time limit stopped the iteration.
    pub converged: bool,
}

impl InitReport {
    pub fn sweeps(&self) -> usize {
        self.residuals.len()
    }
}

fn run_vi(
    n: usize,
    start: f64,
    beta: f64,
    time_limit: Option<Duration>,
    mut backup: impl FnMut(usize, &[f64]) -> Result<f64, LpError>,
) -> Result<InitReport, LpError> {
    let t0 = Instant::now();
    let mut values = vec![start; n];
    let mut residuals = Vec::new();
    loop {
        let mut next = Vec::with_capacity(n);
        for s in 0..n {
            next.push(backup(s, &values)?);
        }
        let res = values
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        values = next;
        residuals.push(res);
        if res < beta {
            return Ok(InitReport {
                values,
                residuals,
                converged: true,
            });
        }
        if time_limit.is_some_and(|l| t0.elapsed() >= l) {
            return Ok(InitReport {
                values,
                residuals,
                converged: false,
            });
        }
    }
}

fn q_value(game: &Game, s: usize, a1: usize, a2: usize, v: &[f64]) -> f64 {
    let cont: f64 = game
        .outcomes(s, a1, a2)
        .iter()
        .map(|o| o.prob * v[o.next])
        .sum();
    game.reward(s, a1, a2) + game.gamma() * cont
}

/// Value iteration for the uniform player-1 strategy, started from `L`.
pub fn lb_init_report(game: &Game, beta: f64, time_limit: Option<Duration>) -> InitReport {
    let lower = utility_bounds(game).lower;
    let n1 = game.num_actions1() as f64;
    run_vi(game.num_states(), lower, beta, time_limit, |s, v| {
        let mut best = f64::INFINITY;
        for a2 in 0..game.num_actions2() {
            let total: f64 = (0..game.num_actions1())
                .map(|a1| q_value(game, s, a1, a2, v))
                .sum();
            best = best.min(total / n1);
        }
        Ok(best)
    })
    .expect("uniform backup never fails")
}

/// Shapley value iteration on the perfect-information game, started from `U`.
pub fn ub_init_report(
    game: &Game,
    beta: f64,
    time_limit: Option<Duration>,
) -> Result<InitReport, LpError> {
    let upper = utility_bounds(game).upper;
    let (n1, n2) = (game.num_actions1(), game.num_actions2());
    let mut matrix = vec![vec![0.0; n2]; n1];
    run_vi(game.num_states(), upper, beta, time_limit, |s, v| {
        for (a1, row) in matrix.iter_mut().enumerate() {
            for (a2, x) in row.iter_mut().enumerate() {
                *x = q_value(game, s, a1, a2, v);
            }
        }
        matrix_game_value(&matrix)
    })
}

/// Lower bound per block: one α-vector holding the uniform-strategy values.
pub fn lb_init(
    game: &Game,
    beta: f64,
    time_limit: Option<Duration>,
) -> Result<(LowerBound, InitReport), BoundsError> {
    let report = lb_init_report(game, beta, time_limit);
    let range = utility_bounds(game);
    let part = game.partition();
    let sizes: Vec<usize> = (0..part.num_blocks())
        .map(|k| part.states(k).len())
        .collect();
    let mut lb = LowerBound::new(sizes, range);
    for k in 0..part.num_blocks() {
        let values = part
            .states(k)
            .iter()
            .map(|&s| report.values[s].clamp(range.lower, range.upper))
            .collect();
        lb.insert(AlphaVector::new(k, values))?;
    }
    Ok((lb, report))
}

/// Upper bound per block: the vertices of the simplex with the
/// perfect-information values.
pub fn ub_init(
    game: &Game,
    beta: f64,
    time_limit: Option<Duration>,
) -> Result<(UpperBound, InitReport), InitError> {
    let report = ub_init_report(game, beta, time_limit)?;
    let range = utility_bounds(game);
    let part = game.partition();
    let sizes: Vec<usize> = (0..part.num_blocks())
        .map(|k| part.states(k).len())
        .collect();
    let mut ub = UpperBound::new(sizes, range);
    for k in 0..part.num_blocks() {
        let states = part.states(k);
        for (i, &s) in states.iter().enumerate() {
            let mut belief = vec![0.0; states.len()];
            belief[i] = 1.0;
            ub.push(
                k,
                UpperPoint {
                    belief,
                    value: report.values[s].clamp(range.lower, range.upper),
                },
            )?;
        }
    }
    ub.reset_prune_baseline();
    Ok((ub, report))
}

#[derive(Debug, thiserror::Error)]
pub enum InitError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

/// Value of the zero-sum matrix game `m` (row player maximises).
pub fn matrix_game_value(m: &[Vec<f64>]) -> Result<f64, LpError> {
    let n1 = m.len();
    let n2 = m[0].len();
    // pure saddle point: maximin equals minimax
    let maximin = m
        .iter()
        .map(|row| row.iter().cloned().fold(f64::INFINITY, f64::min))
        .fold(f64::NEG_INFINITY, f64::max);
    let minimax = (0..n2)
        .map(|j| m.iter().map(|row| row[j]).fold(f64::NEG_INFINITY, f64::max))
        .fold(f64::INFINITY, f64::min);
    if minimax - maximin <= 1e-12 * (1.0 + maximin.abs()) {
        return Ok(maximin);
    }
    // solve on payoffs rescaled to [0, 1] to keep the LP well conditioned
    let lo = m.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    let hi = m
        .iter()
        .flatten()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let scale = hi - lo;
    let mut lp = LpModel::new(Sense::Maximize);
    let v = lp.add_free("v");
    let x: Vec<_> = (0..n1).map(|i| lp.add_nonneg(format!("x{i}"))).collect();
    lp.add_constraint(
        "sum",
        x.iter().map(|&xi| (xi, 1.0)).collect(),
        Relation::Eq,
        1.0,
    );
    for j in 0..n2 {
        let mut terms: Vec<_> = x
            .iter()
            .zip(m)
            .map(|(&xi, row)| (xi, -(row[j] - lo) / scale))
            .collect();
        terms.push((v, 1.0));
        lp.add_constraint("", terms, Relation::Le, 0.0);
    }
    lp.set_objective(vec![(v, 1.0)]);
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(LpError::NumericalFailure(format!(
            "matrix game: {:?}",
            sol.status
        )));
    }
    // the LP value is only accurate to solver tolerance; keep it inside the
    // pure-strategy bracket
    Ok((lo + scale * sol.objective_value).clamp(maximin, minimax))
}
