//! Brute-force reference values for tiny games.
//!
//! These routines share nothing with the stage LPs of the solver. The
//! finite-horizon value comes from one LP over player 1's realisation plan
//! of action-observation sequences, with player 2's best response written
//! as a minimum per `(sequence, state)`; player 2 sees everything, so its
//! continuation depends only on player 1's sequence and the current state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::game::{validate_game, Belief, Game, GameError, Outcome, RawGame};
use crate::lp::{solve_lp, LpError, LpModel, LpStatus, Relation, Sense, VarId};

/// Size limits of the finite-horizon oracle.
pub const MAX_STATES: usize = 4;
pub const MAX_ACTIONS: usize = 3;
pub const MAX_OBSERVATIONS: usize = 3;
pub const MAX_HORIZON: usize = 4;
/// Cap on the `(sequence, state)` nodes of one finite-horizon LP.
pub const MAX_NODES: usize = 2_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("game too large for the oracle: {0}")]
    SizeLimitExceeded(String),
    #[error("player 2 must have exactly one action, has {0}")]
    NotSinglePlayer(usize),
    #[error("oracle LP ended with status {0:?}")]
    Unsolved(LpStatus),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Game(#[from] GameError),
}

fn check_size(game: &Game, horizon: usize) -> Result<(), OracleError> {
    let limits = [
        ("states", game.num_states(), MAX_STATES),
        ("player-1 actions", game.num_actions1(), MAX_ACTIONS),
        ("player-2 actions", game.num_actions2(), MAX_ACTIONS),
        ("observations", game.num_observations(), MAX_OBSERVATIONS),
        ("horizon", horizon, MAX_HORIZON),
    ];
    for (what, got, max) in limits {
        if got > max {
            return Err(OracleError::SizeLimitExceeded(format!(
                "{got} {what}, at most {max} supported"
            )));
        }
    }
    Ok(())
}

/// Belief as a dense vector over all states.
fn dense(game: &Game, b: &Belief) -> Vec<f64> {
    let mut d = vec![0.0; game.num_states()];
    for (i, &s) in game.block_states(b.block).iter().enumerate() {
        d[s] = b.probs[i];
    }
    d
}

/// Player-1 sequence node: states it can be reached in and its parent
/// realisation weight.
struct SeqNode {
    depth: usize,
    states: Vec<bool>,
    /// `x(parent, a1)` leading here; `None` at the root.
    parent_weight: Option<VarId>,
}

/// Value of the `horizon`-stage game from `b` (player 1 maximises).
pub fn finite_horizon_value(game: &Game, b: &Belief, horizon: usize) -> Result<f64, OracleError> {
    check_size(game, horizon)?;
    if horizon == 0 {
        return Ok(0.0);
    }
    let (ns, n1, n2, no) = (
        game.num_states(),
        game.num_actions1(),
        game.num_actions2(),
        game.num_observations(),
    );
    let gamma = game.gamma();
    let b = dense(game, b);

    let mut m = LpModel::new(Sense::Maximize);
    let mut nodes = vec![SeqNode {
        depth: 0,
        states: b.iter().map(|&p| p > 0.0).collect(),
        parent_weight: None,
    }];
    // x(node, a1) and the child node per (a1, o)
    let mut weights: Vec<Vec<VarId>> = Vec::new();
    let mut children: Vec<Vec<Option<usize>>> = Vec::new();
    let mut k = 0;
    while k < nodes.len() {
        let x: Vec<VarId> = (0..n1).map(|a| m.add_nonneg(format!("x{k}_{a}"))).collect();
        let mut sum: Vec<(VarId, f64)> = x.iter().map(|&v| (v, 1.0)).collect();
        match nodes[k].parent_weight {
            Some(p) => {
                sum.push((p, -1.0));
                m.add_constraint("", sum, Relation::Eq, 0.0);
            }
            None => {
                m.add_constraint("", sum, Relation::Eq, 1.0);
            }
        }
        let mut kids = vec![None; n1 * no];
        if nodes[k].depth + 1 < horizon {
            for a1 in 0..n1 {
                for o in 0..no {
                    let mut reach = vec![false; ns];
                    for s in (0..ns).filter(|&s| nodes[k].states[s]) {
                        for a2 in 0..n2 {
                            for out in game.outcomes(s, a1, a2) {
                                if out.obs == o {
                                    reach[out.next] = true;
                                }
                            }
                        }
                    }
                    if reach.iter().any(|&r| r) {
                        kids[a1 * no + o] = Some(nodes.len());
                        nodes.push(SeqNode {
                            depth: nodes[k].depth + 1,
                            states: reach,
                            parent_weight: Some(x[a1]),
                        });
                    }
                }
            }
        }
        let count: usize = nodes.iter().map(|n| n.states.iter().filter(|&&r| r).count()).sum();
        if count > MAX_NODES {
            return Err(OracleError::SizeLimitExceeded(format!(
                "more than {MAX_NODES} sequence-state nodes"
            )));
        }
        weights.push(x);
        children.push(kids);
        k += 1;
    }

    // u(node, s): player 2's best-response value weighted by player 1's
    // realisation probability
    let u: Vec<Vec<Option<VarId>>> = nodes
        .iter()
        .enumerate()
        .map(|(k, n)| {
            (0..ns)
                .map(|s| n.states[s].then(|| m.add_free(format!("u{k}_{s}"))))
                .collect()
        })
        .collect();
    for k in 0..nodes.len() {
        for s in 0..ns {
            let Some(us) = u[k][s] else { continue };
            for a2 in 0..n2 {
                let mut terms = vec![(us, 1.0)];
                for a1 in 0..n1 {
                    let r = game.reward(s, a1, a2);
                    if r != 0.0 {
                        terms.push((weights[k][a1], -r));
                    }
                    for out in game.outcomes(s, a1, a2) {
                        if let Some(c) = children[k][a1 * no + out.obs] {
                            let child = u[c][out.next].expect("reachable child state");
                            terms.push((child, -gamma * out.prob));
                        }
                    }
                }
                m.add_constraint("", terms, Relation::Le, 0.0);
            }
        }
    }
    let objective = (0..ns)
        .filter_map(|s| u[0][s].map(|v| (v, b[s])))
        .collect();
    m.set_objective(objective);
    let sol = solve_lp(&m)?;
    if sol.status != LpStatus::Optimal {
        return Err(OracleError::Unsolved(sol.status));
    }
    Ok(sol.objective_value)
}

/// Finite-horizon POMDP value of a game where player 2 has a single action,
/// by backward induction over reachable beliefs.
pub fn pomdp_reduction_value(game: &Game, b: &Belief, horizon: usize) -> Result<f64, OracleError> {
    if game.num_actions2() != 1 {
        return Err(OracleError::NotSinglePlayer(game.num_actions2()));
    }
    check_size(game, horizon)?;
    Ok(pomdp_value(game, &dense(game, b), horizon))
}

fn pomdp_value(game: &Game, b: &[f64], t: usize) -> f64 {
    if t == 0 {
        return 0.0;
    }
    let ns = game.num_states();
    let no = game.num_observations();
    let mut best = f64::NEG_INFINITY;
    for a1 in 0..game.num_actions1() {
        let mut value = 0.0;
        let mut next = vec![vec![0.0; ns]; no];
        for s in (0..ns).filter(|&s| b[s] > 0.0) {
            value += b[s] * game.reward(s, a1, 0);
            for out in game.outcomes(s, a1, 0) {
                next[out.obs][out.next] += b[s] * out.prob;
            }
        }
        for mut nb in next {
            let z: f64 = nb.iter().sum();
            if z > 0.0 {
                nb.iter_mut().for_each(|p| *p /= z);
                value += game.gamma() * z * pomdp_value(game, &nb, t - 1);
            }
        }
        best = best.max(value);
    }
    best
}

/// Value player 2 can hold player 1 to over `horizon` stages when player 1
/// follows `policy`, a behaviour strategy over its `(a1, o)` histories.
/// Player 2 best-responds with full information.
pub fn best_response_value(
    game: &Game,
    b: &Belief,
    horizon: usize,
    policy: &mut dyn FnMut(&[(usize, usize)]) -> Result<Vec<f64>, OracleError>,
) -> Result<f64, OracleError> {
    let b = dense(game, b);
    let reach: Vec<bool> = b.iter().map(|&p| p > 0.0).collect();
    let values = br_node(game, &reach, &mut Vec::new(), horizon, policy, &mut 0)?;
    Ok((0..game.num_states()).map(|s| b[s] * values[s]).sum())
}

/// Best-response values per state at the history `hist`.
fn br_node(
    game: &Game,
    reach: &[bool],
    hist: &mut Vec<(usize, usize)>,
    t: usize,
    policy: &mut dyn FnMut(&[(usize, usize)]) -> Result<Vec<f64>, OracleError>,
    visited: &mut usize,
) -> Result<Vec<f64>, OracleError> {
    let ns = game.num_states();
    if t == 0 {
        return Ok(vec![0.0; ns]);
    }
    *visited += 1;
    if *visited > 100_000 {
        return Err(OracleError::SizeLimitExceeded(
            "more than 100000 player-1 histories".into(),
        ));
    }
    let pi1 = policy(hist)?;
    let (n2, no) = (game.num_actions2(), game.num_observations());
    // continuation values per (a1, o), for reachable states only
    let mut cont: Vec<Option<Vec<f64>>> = vec![None; pi1.len() * no];
    for (a1, &p) in pi1.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        for o in 0..no {
            let mut next = vec![false; ns];
            for s in (0..ns).filter(|&s| reach[s]) {
                for a2 in 0..n2 {
                    for out in game.outcomes(s, a1, a2) {
                        if out.obs == o {
                            next[out.next] = true;
                        }
                    }
                }
            }
            if next.iter().any(|&r| r) {
                hist.push((a1, o));
                cont[a1 * no + o] = Some(br_node(game, &next, hist, t - 1, policy, visited)?);
                hist.pop();
            }
        }
    }
    let mut values = vec![0.0; ns];
    for s in (0..ns).filter(|&s| reach[s]) {
        let mut best = f64::INFINITY;
        for a2 in 0..n2 {
            let mut total = 0.0;
            for (a1, &p) in pi1.iter().enumerate() {
                if p <= 0.0 {
                    continue;
                }
                let mut future = 0.0;
                for out in game.outcomes(s, a1, a2) {
                    let c = cont[a1 * no + out.obs].as_ref().expect("reachable branch");
                    future += out.prob * c[out.next];
                }
                total += p * (game.reward(s, a1, a2) + game.gamma() * future);
            }
            best = best.min(total);
        }
        values[s] = best;
    }
    Ok(values)
}

/// Shape of a random tiny game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TinyGameSpec {
    pub states: usize,
    pub actions1: usize,
    pub actions2: usize,
    pub observations: usize,
    pub gamma: f64,
}

/// Random single-block game with rewards in `[-1, 1]` and at most three
/// outcomes per transition row.
pub fn random_tiny_game(spec: TinyGameSpec, seed: u64) -> Result<Game, GameError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = |p: &str, n: usize| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    let mut raw = RawGame::new(
        names("s", spec.states),
        names("a", spec.actions1),
        names("b", spec.actions2),
        names("o", spec.observations),
        spec.gamma,
    );
    for s in 0..spec.states {
        for a1 in 0..spec.actions1 {
            for a2 in 0..spec.actions2 {
                let k = rng.gen_range(1..=3);
                let mut w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
                let z: f64 = w.iter().sum();
                w.iter_mut().for_each(|x| *x /= z);
                let mut out: Vec<Outcome> = Vec::new();
                for p in w {
                    let obs = rng.gen_range(0..spec.observations);
                    let next = rng.gen_range(0..spec.states);
                    match out.iter_mut().find(|o| o.obs == obs && o.next == next) {
                        Some(o) => o.prob += p,
                        None => out.push(Outcome { obs, next, prob: p }),
                    }
                }
                raw.set_transition(s, a1, a2, out);
                let r = (rng.gen_range(-1.0..1.0) * 100.0_f64).round() / 100.0;
                raw.set_reward(s, a1, a2, r);
            }
        }
    }
    let mut init: Vec<f64> = (0..spec.states).map(|_| rng.gen_range(0.1..1.0)).collect();
    let z: f64 = init.iter().sum();
    init.iter_mut().for_each(|x| *x /= z);
    raw.initial_belief = init;
    validate_game(raw)
}
