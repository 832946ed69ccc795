//! Stage games of the Bellman operator, solved as linear programs.
//!
//! * [`solve_stage_lb`] maximises over player 1's stage strategy and convex
//!   combinations of the lower-bound α-vectors in every subgame; the duals of
//!   its best-response rows give player 2's strategy.
//! * [`solve_stage_lb_dual`] is the explicit dual of the same program.
//! * [`solve_stage_ub`] minimises over player 2's strategy against the
//!   point-set upper bound; player 1's strategy comes from the duals.
//! * [`resolve_gadget`] adds per-state lower bounds on the composed value,
//!   which is what continual resolving needs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{AlphaVector, BoundsError, LowerBound, UpperBound};
use crate::game::{Belief, Game, StageStrategy1, StageStrategy2};
use crate::lp::{solve_lp, LpError, LpModel, LpSolution, LpStatus, Relation, Sense, VarId};

/// States whose belief is at most this are left out of the stage LPs.
pub const ACTIVE_BELIEF: f64 = 1e-10;
/// Slack on gadget rows so that the resolving LP keeps an interior.
pub const GADGET_SLACK: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum StageError {
    #[error("no continuation α-vector for action {a1} and observation {o}")]
    MissingSubgameAlpha { a1: usize, o: usize },
    #[error("gadget constraints cannot be met")]
    InfeasibleGadget,
    #[error("stage LP ended with status {0:?}")]
    Unsolved(LpStatus),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

/// One continuation α-vector per `(a1, o)` subgame, if defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Continuations {
    n_obs: usize,
    slots: Vec<Option<AlphaVector>>,
}

impl Continuations {
    pub fn new(n_actions1: usize, n_obs: usize) -> Self {
        Self {
            n_obs,
            slots: vec![None; n_actions1 * n_obs],
        }
    }

    pub fn get(&self, a1: usize, o: usize) -> Option<&AlphaVector> {
        self.slots[a1 * self.n_obs + o].as_ref()
    }

    pub fn set(&mut self, a1: usize, o: usize, alpha: AlphaVector) {
        self.slots[a1 * self.n_obs + o] = Some(alpha);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSolutionLB {
    pub value: f64,
    pub pi1: StageStrategy1,
    pub pi2: StageStrategy2,
    /// Convex weights over the successor block's Γ for each `(a1, o)`.
    pub alpha_selection: Vec<Option<Vec<f64>>>,
    pub continuations: Continuations,
    /// `valcomp(pi1, continuations)`, the certificate inserted into Γ.
    pub composed_alpha: AlphaVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSolutionUB {
    pub value: f64,
    pub pi1: StageStrategy1,
    pub pi2: StageStrategy2,
}

/// Value and strategies of the explicit dual of the lower-bound stage LP.
#[derive(Debug, Clone, PartialEq)]
pub struct StageDualLB {
    pub value: f64,
    pub pi1: StageStrategy1,
    pub pi2: StageStrategy2,
}

/// Composes player 1's stage strategy with continuation vectors into the
/// α-vector of the resulting strategy against a best-responding player 2.
pub fn valcomp(
    game: &Game,
    pi1: &StageStrategy1,
    conts: &Continuations,
    block: usize,
) -> Result<AlphaVector, StageError> {
    let part = game.partition();
    let gamma = game.gamma();
    let states = part.states(block);
    let mut values = Vec::with_capacity(states.len());
    for &s in states {
        let mut best = f64::INFINITY;
        for a2 in 0..game.num_actions2() {
            let mut total = 0.0;
            for (a1, &p) in pi1.probs.iter().enumerate() {
                if p <= 0.0 {
                    continue;
                }
                let mut cont = 0.0;
                for out in game.outcomes(s, a1, a2) {
                    let alpha = conts
                        .get(a1, out.obs)
                        .ok_or(StageError::MissingSubgameAlpha { a1, o: out.obs })?;
                    cont += out.prob * alpha.values[part.local_index(out.next)];
                }
                total += p * (game.reward(s, a1, a2) + gamma * cont);
            }
            best = best.min(total);
        }
        values.push(best);
    }
    Ok(AlphaVector::new(block, values))
}

fn active_states(b: &Belief) -> Vec<usize> {
    (0..b.len())
        .filter(|&i| b.probs[i] > ACTIVE_BELIEF)
        .collect()
}

fn check_optimal(sol: &LpSolution) -> Result<(), StageError> {
    match sol.status {
        LpStatus::Optimal => Ok(()),
        s => Err(StageError::Unsolved(s)),
    }
}

/// Clips negatives and renormalises.
fn simplex_clean(v: Vec<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = v.into_iter().map(|x| x.max(0.0)).collect();
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    } else {
        let n = v.len() as f64;
        v.iter_mut().for_each(|x| *x = 1.0 / n);
    }
    v
}

/// `(a1, o)` pairs reachable from the given local states, with the set of
/// successor states (local indices in the successor block) they can hit.
struct Reach {
    n_obs: usize,
    /// Indexed `a1 * n_obs + o`: successor block and reachable local states.
    pairs: Vec<Option<(usize, Vec<usize>)>>,
}

impl Reach {
    fn new(game: &Game, block: usize, locals: &[usize]) -> Self {
        let part = game.partition();
        let n_obs = game.num_observations();
        let states = part.states(block);
        let mut pairs: Vec<Option<(usize, Vec<bool>)>> = vec![None; game.num_actions1() * n_obs];
        for &i in locals {
            let s = states[i];
            for a1 in 0..game.num_actions1() {
                for a2 in 0..game.num_actions2() {
                    for out in game.outcomes(s, a1, a2) {
                        let nb = part.block_of(out.next);
                        let slot = pairs[a1 * n_obs + out.obs]
                            .get_or_insert_with(|| (nb, vec![false; part.states(nb).len()]));
                        slot.1[part.local_index(out.next)] = true;
                    }
                }
            }
        }
        let pairs = pairs
            .into_iter()
            .map(|p| {
                p.map(|(nb, hit)| {
                    let idx = hit
                        .iter()
                        .enumerate()
                        .filter(|(_, h)| **h)
                        .map(|(i, _)| i)
                        .collect();
                    (nb, idx)
                })
            })
            .collect();
        Self { n_obs, pairs }
    }

    fn get(&self, a1: usize, o: usize) -> Option<&(usize, Vec<usize>)> {
        self.pairs[a1 * self.n_obs + o].as_ref()
    }
}

/// Successor belief of `(a1, o)` from the uniform belief over the block with
/// a uniform player 2, used to pick continuations in subgames that the
/// optimisation leaves undetermined.
fn uniform_successor(game: &Game, block: usize, a1: usize, o: usize) -> Option<Belief> {
    let n = game.block_states(block).len();
    let b = Belief::uniform(block, n);
    let p2 = StageStrategy2::uniform(n, game.num_actions2());
    crate::game::belief_update(game, &b, a1, &p2, o).ok()
}

fn fallback_alpha(
    game: &Game,
    lb: &LowerBound,
    block: usize,
    a1: usize,
    o: usize,
    next_block: usize,
) -> Result<AlphaVector, StageError> {
    let set = lb.vectors(next_block);
    if set.is_empty() {
        return Err(BoundsError::EmptyBound(next_block).into());
    }
    let idx = match uniform_successor(game, block, a1, o) {
        Some(b) => lb.argmax(&b)?,
        None => 0,
    };
    Ok(set[idx].clone())
}

/// Variables of the lower-bound stage program.
struct Lp13 {
    model: LpModel,
    pi1: Vec<VarId>,
    /// Per pair `a1 * n_obs + o`: successor block and λ̂ variables over Γ.
    lam: Vec<Option<(usize, Vec<VarId>)>>,
    /// Best-response rows `(local state, a2)` for states entering the
    /// objective.
    br_rows: Vec<(usize, usize, crate::lp::ConId)>,
}

/// Builds the lower-bound stage LP. Best-response rows are created for the
/// active states; with a gadget, lower-bound rows are added for every state
/// of the block.
fn build_lp13(
    game: &Game,
    b: &Belief,
    lb: &LowerBound,
    gadget: Option<&AlphaVector>,
) -> Result<Lp13, StageError> {
    let part = game.partition();
    let gamma = game.gamma();
    let n_obs = game.num_observations();
    let n1 = game.num_actions1();
    let states = part.states(b.block);
    let active = active_states(b);
    let row_states: Vec<usize> = if gadget.is_some() {
        (0..states.len()).collect()
    } else {
        active.clone()
    };
    let reach = Reach::new(game, b.block, &row_states);

    let mut m = LpModel::new(Sense::Maximize);
    let pi1: Vec<VarId> = (0..n1).map(|a| m.add_nonneg(format!("pi1_{a}"))).collect();
    m.add_constraint(
        "pi1_sum",
        pi1.iter().map(|&v| (v, 1.0)).collect(),
        Relation::Eq,
        1.0,
    );

    let mut lam: Vec<Option<(usize, Vec<VarId>)>> = vec![None; n1 * n_obs];
    // α̂ variables per pair, indexed by successor local state
    let mut ahat: Vec<Vec<Option<VarId>>> = vec![Vec::new(); n1 * n_obs];
    for a1 in 0..n1 {
        for o in 0..n_obs {
            let Some((nb, hit)) = reach.get(a1, o) else {
                continue;
            };
            let set = lb.vectors(*nb);
            if set.is_empty() {
                return Err(BoundsError::EmptyBound(*nb).into());
            }
            let vars: Vec<VarId> = (0..set.len()).map(|_| m.add_nonneg("")).collect();
            let mut sum: Vec<(VarId, f64)> = vars.iter().map(|&v| (v, 1.0)).collect();
            sum.push((pi1[a1], -1.0));
            m.add_constraint("", sum, Relation::Eq, 0.0);
            let mut row = vec![None; part.states(*nb).len()];
            for &j in hit {
                let av = m.add_free("");
                let mut terms: Vec<(VarId, f64)> = vars
                    .iter()
                    .zip(set)
                    .map(|(&v, alpha)| (v, -alpha.values[j]))
                    .collect();
                terms.push((av, 1.0));
                m.add_constraint("", terms, Relation::Eq, 0.0);
                row[j] = Some(av);
            }
            ahat[a1 * n_obs + o] = row;
            lam[a1 * n_obs + o] = Some((*nb, vars));
        }
    }

    // Σ_a1 π1 R + γ Σ T α̂ as a linear expression for state s and action a2
    let payoff = |s: usize, a2: usize| -> Vec<(VarId, f64)> {
        let mut terms = Vec::new();
        for a1 in 0..n1 {
            let r = game.reward(s, a1, a2);
            if r != 0.0 {
                terms.push((pi1[a1], r));
            }
            for out in game.outcomes(s, a1, a2) {
                let v = ahat[a1 * n_obs + out.obs][part.local_index(out.next)]
                    .expect("reachable successor has a variable");
                terms.push((v, gamma * out.prob));
            }
        }
        terms
    };

    let mut objective = Vec::new();
    let mut br_rows = Vec::new();
    for &i in &active {
        let v = m.add_free(format!("V_{i}"));
        objective.push((v, b.probs[i]));
        for a2 in 0..game.num_actions2() {
            let mut terms: Vec<(VarId, f64)> = payoff(states[i], a2)
                .into_iter()
                .map(|(x, c)| (x, -c))
                .collect();
            terms.push((v, 1.0));
            let c = m.add_constraint(format!("br_{i}_{a2}"), terms, Relation::Le, 0.0);
            br_rows.push((i, a2, c));
        }
    }
    if let Some(rho) = gadget {
        for &i in &row_states {
            for a2 in 0..game.num_actions2() {
                m.add_constraint(
                    format!("gadget_{i}_{a2}"),
                    payoff(states[i], a2),
                    Relation::Ge,
                    rho.values[i] - GADGET_SLACK,
                );
            }
        }
    }
    m.set_objective(objective);
    Ok(Lp13 {
        model: m,
        pi1,
        lam,
        br_rows,
    })
}

/// Reads `(pi1, λ̂ weights, continuations)` from a solved LP 13.
fn extract_lp13(
    game: &Game,
    b: &Belief,
    lb: &LowerBound,
    lp: &Lp13,
    sol: &LpSolution,
) -> Result<(StageStrategy1, Vec<Option<Vec<f64>>>, Continuations), StageError> {
    let n_obs = game.num_observations();
    let pi1 = StageStrategy1 {
        probs: simplex_clean(lp.pi1.iter().map(|&v| sol.value(v)).collect()),
    };
    let mut weights = vec![None; lp.lam.len()];
    let mut conts = Continuations::new(game.num_actions1(), n_obs);
    for (k, slot) in lp.lam.iter().enumerate() {
        let Some((nb, vars)) = slot else { continue };
        let (a1, o) = (k / n_obs, k % n_obs);
        let raw: Vec<f64> = vars.iter().map(|&v| sol.value(v).max(0.0)).collect();
        let total: f64 = raw.iter().sum();
        let alpha = if total > 1e-12 {
            let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let set = lb.vectors(*nb);
            let mut values = vec![0.0; set[0].values.len()];
            for (wi, alpha) in w.iter().zip(set) {
                if *wi > 0.0 {
                    for (v, a) in values.iter_mut().zip(&alpha.values) {
                        *v += wi * a;
                    }
                }
            }
            weights[k] = Some(w);
            AlphaVector::new(*nb, values)
        } else {
            fallback_alpha(game, lb, b.block, a1, o, *nb)?
        };
        conts.set(a1, o, alpha);
    }
    Ok((pi1, weights, conts))
}

/// Fills continuations for subgames reachable only from states the LP left
/// out, so that the composed vector is defined on the whole block.
fn complete_continuations(
    game: &Game,
    block: usize,
    lb: &LowerBound,
    pi1: &StageStrategy1,
    conts: &mut Continuations,
) -> Result<(), StageError> {
    let part = game.partition();
    let all: Vec<usize> = (0..part.states(block).len()).collect();
    let reach = Reach::new(game, block, &all);
    for (a1, &p) in pi1.probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        for o in 0..game.num_observations() {
            if conts.get(a1, o).is_some() {
                continue;
            }
            if let Some((nb, _)) = reach.get(a1, o) {
                let alpha = fallback_alpha(game, lb, block, a1, o, *nb)?;
                conts.set(a1, o, alpha);
            }
        }
    }
    Ok(())
}

/// `[H uv](b)`: lower-bound stage game with strategies for both players.
pub fn solve_stage_lb(
    game: &Game,
    b: &Belief,
    lb: &LowerBound,
) -> Result<StageSolutionLB, StageError> {
    let lp = build_lp13(game, b, lb, None)?;
    let sol = solve_lp(&lp.model)?;
    check_optimal(&sol)?;
    let (pi1, alpha_selection, mut continuations) = extract_lp13(game, b, lb, &lp, &sol)?;
    complete_continuations(game, b.block, lb, &pi1, &mut continuations)?;
    let composed_alpha = valcomp(game, &pi1, &continuations, b.block)?;

    let n = b.len();
    let n2 = game.num_actions2();
    let mut joint = vec![vec![0.0; n2]; n];
    for &(i, a2, c) in &lp.br_rows {
        joint[i][a2] = sol.dual(c).max(0.0);
    }
    let pi2 = StageStrategy2::from_joint(&joint, &b.probs, 0.0);
    Ok(StageSolutionLB {
        value: sol.objective_value,
        pi1,
        pi2,
        alpha_selection,
        continuations,
        composed_alpha,
    })
}

/// Explicit dual of the lower-bound stage LP: player 2 minimises over joint
/// `pi2(s and a2)` against player 1 best responses.
pub fn solve_stage_lb_dual(
    game: &Game,
    b: &Belief,
    lb: &LowerBound,
) -> Result<StageDualLB, StageError> {
    let part = game.partition();
    let gamma = game.gamma();
    let n_obs = game.num_observations();
    let n1 = game.num_actions1();
    let n2 = game.num_actions2();
    let states = part.states(b.block);
    let active = active_states(b);
    let reach = Reach::new(game, b.block, &active);

    let mut m = LpModel::new(Sense::Minimize);
    let v = m.add_free("V");
    m.set_objective(vec![(v, 1.0)]);
    let mut pi2 = vec![vec![None; n2]; states.len()];
    for &i in &active {
        let vars: Vec<VarId> = (0..n2)
            .map(|a| m.add_nonneg(format!("pi2_{i}_{a}")))
            .collect();
        m.add_constraint(
            "",
            vars.iter().map(|&x| (x, 1.0)).collect(),
            Relation::Eq,
            b.probs[i],
        );
        for (a2, x) in vars.into_iter().enumerate() {
            pi2[i][a2] = Some(x);
        }
    }
    let mut vhat: Vec<Option<VarId>> = vec![None; n1 * n_obs];
    for a1 in 0..n1 {
        for o in 0..n_obs {
            let Some((nb, hit)) = reach.get(a1, o) else {
                continue;
            };
            // unnormalised successor belief as a linear form in pi2
            let mut tau: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); part.states(*nb).len()];
            for &i in &active {
                for a2 in 0..n2 {
                    for out in game.outcomes(states[i], a1, a2) {
                        if out.obs == o {
                            tau[part.local_index(out.next)]
                                .push((pi2[i][a2].expect("active"), out.prob));
                        }
                    }
                }
            }
            let set = lb.vectors(*nb);
            if set.is_empty() {
                return Err(BoundsError::EmptyBound(*nb).into());
            }
            let vh = m.add_free("");
            for alpha in set {
                let mut terms = vec![(vh, 1.0)];
                for &j in hit {
                    for &(x, p) in &tau[j] {
                        terms.push((x, -p * alpha.values[j]));
                    }
                }
                m.add_constraint("", terms, Relation::Ge, 0.0);
            }
            vhat[a1 * n_obs + o] = Some(vh);
        }
    }
    let mut br = Vec::with_capacity(n1);
    for a1 in 0..n1 {
        let mut terms = vec![(v, 1.0)];
        for &i in &active {
            for a2 in 0..n2 {
                let r = game.reward(states[i], a1, a2);
                if r != 0.0 {
                    terms.push((pi2[i][a2].expect("active"), -r));
                }
            }
        }
        for o in 0..n_obs {
            if let Some(vh) = vhat[a1 * n_obs + o] {
                terms.push((vh, -gamma));
            }
        }
        br.push(m.add_constraint(format!("br_{a1}"), terms, Relation::Ge, 0.0));
    }
    let sol = solve_lp(&m)?;
    check_optimal(&sol)?;
    let pi1 = StageStrategy1 {
        probs: simplex_clean(br.iter().map(|&c| sol.dual(c)).collect()),
    };
    let joint: Vec<Vec<f64>> = pi2
        .iter()
        .map(|row| {
            row.iter()
                .map(|x| x.map_or(0.0, |x| sol.value(x)))
                .collect()
        })
        .collect();
    Ok(StageDualLB {
        value: sol.objective_value,
        pi1,
        pi2: StageStrategy2::from_joint(&joint, &b.probs, 0.0),
    })
}

/// `[H ov](b)`: upper-bound stage game. Player 2's strategy is primal,
/// player 1's comes from the duals of the best-response rows.
pub fn solve_stage_ub(
    game: &Game,
    b: &Belief,
    ub: &UpperBound,
) -> Result<StageSolutionUB, StageError> {
    let part = game.partition();
    let gamma = game.gamma();
    let delta = ub.delta();
    let n_obs = game.num_observations();
    let n1 = game.num_actions1();
    let n2 = game.num_actions2();
    let states = part.states(b.block);
    let active = active_states(b);
    let reach = Reach::new(game, b.block, &active);

    let mut m = LpModel::new(Sense::Minimize);
    let v = m.add_free("V");
    m.set_objective(vec![(v, 1.0)]);
    let mut pi2 = vec![vec![None; n2]; states.len()];
    for &i in &active {
        let vars: Vec<VarId> = (0..n2)
            .map(|a| m.add_nonneg(format!("pi2_{i}_{a}")))
            .collect();
        m.add_constraint(
            "",
            vars.iter().map(|&x| (x, 1.0)).collect(),
            Relation::Eq,
            b.probs[i],
        );
        for (a2, x) in vars.into_iter().enumerate() {
            pi2[i][a2] = Some(x);
        }
    }

    // continuation value terms per a1, accumulated over observations
    let mut cont_terms: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); n1];
    for a1 in 0..n1 {
        for o in 0..n_obs {
            let Some((nb, _)) = reach.get(a1, o) else {
                continue;
            };
            let points = ub.points(*nb);
            if points.is_empty() {
                return Err(BoundsError::EmptyBound(*nb).into());
            }
            let width = part.states(*nb).len();
            let mut tau: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); width];
            for &i in &active {
                for a2 in 0..n2 {
                    for out in game.outcomes(states[i], a1, a2) {
                        if out.obs == o {
                            tau[part.local_index(out.next)]
                                .push((pi2[i][a2].expect("active"), out.prob));
                        }
                    }
                }
            }
            let lam: Vec<VarId> = (0..points.len()).map(|_| m.add_nonneg("")).collect();
            // Σ λ = Σ τ̂
            let mut mass: Vec<(VarId, f64)> = lam.iter().map(|&x| (x, 1.0)).collect();
            for t in &tau {
                mass.extend(t.iter().map(|&(x, p)| (x, -p)));
            }
            m.add_constraint("", mass, Relation::Eq, 0.0);
            for j in 0..width {
                // Σ λ_i b_i(j) - τ̂(j) = Δ⁺_j - Δ⁻_j
                let plus = m.add_nonneg("");
                let minus = m.add_nonneg("");
                let mut row = vec![(plus, -1.0), (minus, 1.0)];
                for (&x, p) in lam.iter().zip(points) {
                    if p.belief[j] != 0.0 {
                        row.push((x, p.belief[j]));
                    }
                }
                row.extend(tau[j].iter().map(|&(x, p)| (x, -p)));
                m.add_constraint("", row, Relation::Eq, 0.0);
                cont_terms[a1].push((plus, gamma * delta));
                cont_terms[a1].push((minus, gamma * delta));
            }
            for (&x, p) in lam.iter().zip(points) {
                cont_terms[a1].push((x, gamma * p.value));
            }
        }
    }
    let mut br = Vec::with_capacity(n1);
    for a1 in 0..n1 {
        let mut terms = vec![(v, 1.0)];
        for &i in &active {
            for a2 in 0..n2 {
                let r = game.reward(states[i], a1, a2);
                if r != 0.0 {
                    terms.push((pi2[i][a2].expect("active"), -r));
                }
            }
        }
        terms.extend(cont_terms[a1].iter().map(|&(x, c)| (x, -c)));
        br.push(m.add_constraint(format!("br_{a1}"), terms, Relation::Ge, 0.0));
    }
    let sol = solve_lp(&m)?;
    check_optimal(&sol)?;
    let pi1 = StageStrategy1 {
        probs: simplex_clean(br.iter().map(|&c| sol.dual(c)).collect()),
    };
    let joint: Vec<Vec<f64>> = pi2
        .iter()
        .map(|row| {
            row.iter()
                .map(|x| x.map_or(0.0, |x| sol.value(x)))
                .collect()
        })
        .collect();
    Ok(StageSolutionUB {
        value: sol.objective_value,
        pi1,
        pi2: StageStrategy2::from_joint(&joint, &b.probs, 0.0),
    })
}

/// Resolving step of continual resolving: the best stage strategy whose
/// composition with the chosen continuations stays above `rho` in every
/// state of the block.
pub fn resolve_gadget(
    game: &Game,
    b: &Belief,
    rho: &AlphaVector,
    lb: &LowerBound,
) -> Result<(StageStrategy1, Continuations), StageError> {
    let lp = build_lp13(game, b, lb, Some(rho))?;
    let sol = solve_lp(&lp.model)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(StageError::InfeasibleGadget),
        s => return Err(StageError::Unsolved(s)),
    }
    let (pi1, _, mut conts) = extract_lp13(game, b, lb, &lp, &sol)?;
    complete_continuations(game, b.block, lb, &pi1, &mut conts)?;
    Ok((pi1, conts))
}
