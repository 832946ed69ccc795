//! Patrolling game on a random graph.
//!
//! The patroller (player 1) walks the edges of an Erdős–Rényi graph. The
//! attacker (player 2) sees the patroller and may start an attack on any
//! vertex `v`. The attack succeeds, costing the patroller `C(v)`, unless the
//! patroller steps onto `v` within `attack_time` moves. Costs are scaled so
//! that the worst discounted payoff is -100. The patroller never observes
//! whether an attack is under way.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{build, check_gamma, DomainError, Next, Spec, Step};
use crate::game::Game;

/// Connected-graph attempts before giving up.
const GRAPH_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct PatrollingParams {
    pub vertices: usize,
    pub edge_prob: f64,
    pub attack_time: usize,
    /// Relative target values; drawn from the seed when absent.
    pub costs: Option<Vec<f64>>,
    pub gamma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Pos {
    patroller: u8,
    /// Attacked vertex and the number of patroller moves left.
    attack: Option<(u8, u8)>,
}

/// Adjacency lists of the first connected `G(n, p)` sample starting at
/// `seed`, together with the seed that produced it.
pub fn erdos_renyi_connected(
    n: usize,
    p: f64,
    seed: u64,
) -> Result<(Vec<Vec<usize>>, u64), DomainError> {
    for attempt in 0..GRAPH_ATTEMPTS as u64 {
        let s = seed.wrapping_add(attempt);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let mut adj = vec![Vec::new(); n];
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(p) {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        if connected(&adj) {
            return Ok((adj, s));
        }
    }
    Err(DomainError::DisconnectedGraph {
        attempts: GRAPH_ATTEMPTS,
    })
}

fn connected(adj: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    seen.iter().all(|&x| x)
}

pub fn gen_patrolling(params: &PatrollingParams) -> Result<Game, DomainError> {
    let &PatrollingParams {
        vertices: n,
        edge_prob,
        attack_time,
        gamma,
        seed,
        ..
    } = params;
    check_gamma(gamma)?;
    if !(2..=64).contains(&n) {
        return Err(DomainError::InvalidParameter(format!(
            "vertex count must lie in 2..=64, got {n}"
        )));
    }
    if !(1..=32).contains(&attack_time) {
        return Err(DomainError::InvalidParameter(format!(
            "attack time must lie in 1..=32, got {attack_time}"
        )));
    }
    if !(edge_prob > 0.0 && edge_prob <= 1.0) {
        return Err(DomainError::InvalidParameter(format!(
            "edge probability must lie in (0, 1], got {edge_prob}"
        )));
    }
    let (adj, graph_seed) = erdos_renyi_connected(n, edge_prob, seed)?;
    let raw_costs = match &params.costs {
        Some(c) => {
            if c.len() != n || c.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(DomainError::InvalidParameter(
                    "costs must be positive, one per vertex".into(),
                ));
            }
            c.clone()
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(graph_seed ^ 0x9e37_79b9_7f4a_7c15);
            (0..n).map(|_| rng.gen_range(0.2..=1.0)).collect()
        }
    };
    let top = raw_costs.iter().cloned().fold(0.0, f64::max);
    let scale = 100.0 / gamma.powi(attack_time as i32) / top;
    let costs: Vec<f64> = raw_costs.iter().map(|c| c * scale).collect();

    let step_to = |p: usize, u: usize| if u == p || adj[p].contains(&u) { u } else { p };
    let mut actions2 = vec!["wait".to_string()];
    actions2.extend((0..n).map(|v| format!("attack{v}")));
    let spec = Spec {
        actions1: (0..n).map(|u| format!("goto{u}")).collect(),
        actions2,
        observations: vec!["none".into(), "end".into()],
        gamma,
        terminal_name: "end",
        terminal_obs: 1,
    };
    let at = attack_time as u8;
    build(
        spec,
        Pos {
            patroller: 0,
            attack: None,
        },
        |s, a1, a2| {
            let p = step_to(s.patroller as usize, a1) as u8;
            let attack = match s.attack {
                Some((v, 0)) => return Step::det(-costs[v as usize], 1, Next::Terminal),
                Some((v, k)) => Some((v, k - 1)),
                None if a2 == 0 => None,
                None => Some(((a2 - 1) as u8, at - 1)),
            };
            match attack {
                Some((v, _)) if v == p => Step::det(0.0, 1, Next::Terminal),
                attack => Step::det(
                    0.0,
                    0,
                    Next::State(Pos {
                        patroller: p,
                        attack,
                    }),
                ),
            }
        },
        |s| match s.attack {
            None => format!("at{}", s.patroller),
            Some((v, k)) => format!("at{}_attack{}_left{}", s.patroller, v, k),
        },
        |s| (s.patroller, format!("at{}", s.patroller)),
    )
}
