//! Benchmark game generators.
//!
//! Every generator enumerates the states reachable from the start state
//! breadth first, so the output is a deterministic function of the
//! parameters (and seed, where one is taken).

use std::collections::HashMap;
use std::hash::Hash;

use thiserror::Error;

use crate::game::{validate_game, Game, GameError, Outcome, RawBlock, RawGame};

mod patrolling;
mod pennies;
mod pursuit;
mod search;

pub use patrolling::{erdos_renyi_connected, gen_patrolling, PatrollingParams};
pub use pennies::gen_matching_pennies;
pub use pursuit::gen_pursuit;
pub use search::{gen_search, SearchConfig};

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no connected graph found after {attempts} attempts")]
    DisconnectedGraph { attempts: usize },
    #[error(transparent)]
    Game(#[from] GameError),
}

pub(crate) enum Next<K> {
    State(K),
    Terminal,
}

/// Result of one `(state, a1, a2)` step in a generator.
pub(crate) struct Step<K> {
    pub reward: f64,
    pub outcomes: Vec<(usize, Next<K>, f64)>,
}

impl<K> Step<K> {
    pub fn det(reward: f64, obs: usize, next: Next<K>) -> Self {
        Self {
            reward,
            outcomes: vec![(obs, next, 1.0)],
        }
    }
}

/// Shape of the game being enumerated.
pub(crate) struct Spec<'a> {
    pub actions1: Vec<String>,
    pub actions2: Vec<String>,
    pub observations: Vec<String>,
    pub gamma: f64,
    pub terminal_name: &'a str,
    /// Observation emitted by the absorbing terminal state.
    pub terminal_obs: usize,
}

/// Enumerates reachable states and assembles the game. States sharing a
/// `block` key form one partition block; the terminal state gets its own.
pub(crate) fn build<K, B>(
    spec: Spec<'_>,
    init: K,
    step: impl Fn(&K, usize, usize) -> Step<K>,
    name: impl Fn(&K) -> String,
    block: impl Fn(&K) -> (B, String),
) -> Result<Game, DomainError>
where
    K: Clone + Eq + Hash,
    B: Eq + Hash,
{
    let n1 = spec.actions1.len();
    let n2 = spec.actions2.len();
    let mut index: HashMap<K, usize> = HashMap::new();
    let mut keys: Vec<K> = vec![init.clone()];
    index.insert(init, 0);
    let mut steps: Vec<Vec<(f64, Vec<(usize, Option<usize>, f64)>)>> = Vec::new();
    let mut terminal_used = false;
    let mut head = 0;
    while head < keys.len() {
        let key = keys[head].clone();
        let mut rows = Vec::with_capacity(n1 * n2);
        for a1 in 0..n1 {
            for a2 in 0..n2 {
                let st = step(&key, a1, a2);
                let mut outs = Vec::with_capacity(st.outcomes.len());
                for (o, next, p) in st.outcomes {
                    let target = match next {
                        Next::Terminal => {
                            terminal_used = true;
                            None
                        }
                        Next::State(k) => {
                            let id = match index.get(&k) {
                                Some(&id) => id,
                                None => {
                                    keys.push(k.clone());
                                    index.insert(k, keys.len() - 1);
                                    keys.len() - 1
                                }
                            };
                            Some(id)
                        }
                    };
                    outs.push((o, target, p));
                }
                rows.push((st.reward, outs));
            }
        }
        steps.push(rows);
        head += 1;
    }

    let n = keys.len();
    let terminal = n;
    let total = n + usize::from(terminal_used);
    let mut names: Vec<String> = keys.iter().map(&name).collect();
    if terminal_used {
        names.push(spec.terminal_name.to_string());
    }
    let mut raw = RawGame::new(
        names,
        spec.actions1,
        spec.actions2,
        spec.observations,
        spec.gamma,
    );
    for (s, rows) in steps.into_iter().enumerate() {
        for (k, (r, outs)) in rows.into_iter().enumerate() {
            let (a1, a2) = (k / n2, k % n2);
            raw.set_reward(s, a1, a2, r);
            raw.set_transition(
                s,
                a1,
                a2,
                outs.into_iter()
                    .map(|(obs, t, prob)| Outcome {
                        obs,
                        next: t.unwrap_or(terminal),
                        prob,
                    })
                    .collect(),
            );
        }
    }
    if terminal_used {
        for a1 in 0..n1 {
            for a2 in 0..n2 {
                raw.set_transition(
                    terminal,
                    a1,
                    a2,
                    vec![Outcome {
                        obs: spec.terminal_obs,
                        next: terminal,
                        prob: 1.0,
                    }],
                );
            }
        }
    }
    raw.initial_belief = vec![0.0; total];
    raw.initial_belief[0] = 1.0;

    let mut block_ids: HashMap<B, usize> = HashMap::new();
    let mut blocks: Vec<RawBlock> = Vec::new();
    for (s, key) in keys.iter().enumerate() {
        let (bk, bname) = block(key);
        let id = *block_ids.entry(bk).or_insert_with(|| {
            blocks.push(RawBlock {
                name: bname,
                states: Vec::new(),
                successors: Vec::new(),
            });
            blocks.len() - 1
        });
        blocks[id].states.push(s);
    }
    if terminal_used {
        blocks.push(RawBlock {
            name: spec.terminal_name.to_string(),
            states: vec![terminal],
            successors: Vec::new(),
        });
    }
    raw.partitions = Some(blocks);
    Ok(validate_game(raw)?)
}

pub(crate) fn check_gamma(gamma: f64) -> Result<(), DomainError> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(DomainError::InvalidParameter(format!(
            "gamma must lie in (0, 1), got {gamma}"
        )))
    }
}
