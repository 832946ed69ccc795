//! Game and bounds files.
//!
//! Both are JSON documents. Games refer to states, actions, observations and
//! blocks by name; transitions and rewards are sparse lists. Floats are
//! written in shortest round-trip form, so reading a file back reproduces
//! every value bit for bit.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bounds::{AlphaVector, BoundsError, LowerBound, UpperBound, UpperPoint};
use crate::game::{utility_bounds, validate_game, Game, GameError, Outcome, RawBlock, RawGame};
use crate::hsvi::{SolveStatus, SolverConfig};

/// Version tag of the bounds format.
pub const BOUNDS_FORMAT: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown {kind} {name:?}")]
    UnknownName { kind: &'static str, name: String },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error("bounds were computed for game {expected}, this game hashes to {got}")]
    HashMismatch { expected: String, got: String },
    #[error("unsupported bounds format {0}")]
    Format(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessorEntry {
    pub a1: String,
    pub o: String,
    pub block: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub block: String,
    pub states: Vec<String>,
    #[serde(default)]
    pub successors: Vec<SuccessorEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeEntry {
    pub o: String,
    pub s2: String,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionEntry {
    pub s: String,
    pub a1: String,
    pub a2: String,
    pub out: Vec<OutcomeEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardEntry {
    pub s: String,
    pub a1: String,
    pub a2: String,
    pub r: f64,
}

/// On-disk game document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameFile {
    pub states: Vec<String>,
    pub actions1: Vec<String>,
    pub actions2: Vec<String>,
    pub observations: Vec<String>,
    pub gamma: f64,
    /// Only states with positive probability are listed.
    pub initial_belief: std::collections::BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partitions: Option<Vec<BlockEntry>>,
    pub transitions: Vec<TransitionEntry>,
    #[serde(default)]
    pub rewards: Vec<RewardEntry>,
}

impl GameFile {
    pub fn from_game(game: &Game) -> Self {
        let raw = game.to_raw();
        let (n1, n2) = (raw.actions1.len(), raw.actions2.len());
        let mut transitions = Vec::new();
        let mut rewards = Vec::new();
        for s in 0..raw.states.len() {
            for a1 in 0..n1 {
                for a2 in 0..n2 {
                    let k = raw.key(s, a1, a2);
                    let out = &raw.transitions[k];
                    if !out.is_empty() {
                        transitions.push(TransitionEntry {
                            s: raw.states[s].clone(),
                            a1: raw.actions1[a1].clone(),
                            a2: raw.actions2[a2].clone(),
                            out: out
                                .iter()
                                .map(|o| OutcomeEntry {
                                    o: raw.observations[o.obs].clone(),
                                    s2: raw.states[o.next].clone(),
                                    p: o.prob,
                                })
                                .collect(),
                        });
                    }
                    if raw.rewards[k] != 0.0 {
                        rewards.push(RewardEntry {
                            s: raw.states[s].clone(),
                            a1: raw.actions1[a1].clone(),
                            a2: raw.actions2[a2].clone(),
                            r: raw.rewards[k],
                        });
                    }
                }
            }
        }
        let partitions = raw.partitions.as_ref().map(|blocks| {
            blocks
                .iter()
                .map(|b| BlockEntry {
                    block: b.name.clone(),
                    states: b.states.iter().map(|&s| raw.states[s].clone()).collect(),
                    successors: b
                        .successors
                        .iter()
                        .map(|&(a1, o, t)| SuccessorEntry {
                            a1: raw.actions1[a1].clone(),
                            o: raw.observations[o].clone(),
                            block: blocks[t].name.clone(),
                        })
                        .collect(),
                })
                .collect()
        });
        Self {
            initial_belief: raw
                .states
                .iter()
                .zip(&raw.initial_belief)
                .filter(|(_, &p)| p > 0.0)
                .map(|(s, &p)| (s.clone(), p))
                .collect(),
            states: raw.states,
            actions1: raw.actions1,
            actions2: raw.actions2,
            observations: raw.observations,
            gamma: raw.gamma,
            partitions,
            transitions,
            rewards,
        }
    }

    pub fn to_raw(&self) -> Result<RawGame, IoError> {
        let index = |names: &[String]| -> HashMap<String, usize> {
            names
                .iter()
                .enumerate()
                .map(|(i, n)| (n.clone(), i))
                .collect()
        };
        let (si, a1i, a2i, oi) = (
            index(&self.states),
            index(&self.actions1),
            index(&self.actions2),
            index(&self.observations),
        );
        let look = |map: &HashMap<String, usize>, kind: &'static str, name: &str| {
            map.get(name).copied().ok_or_else(|| IoError::UnknownName {
                kind,
                name: name.to_string(),
            })
        };
        let mut raw = RawGame::new(
            self.states.clone(),
            self.actions1.clone(),
            self.actions2.clone(),
            self.observations.clone(),
            self.gamma,
        );
        for (name, &p) in &self.initial_belief {
            raw.initial_belief[look(&si, "state", name)?] = p;
        }
        for t in &self.transitions {
            let (s, a1, a2) = (
                look(&si, "state", &t.s)?,
                look(&a1i, "player-1 action", &t.a1)?,
                look(&a2i, "player-2 action", &t.a2)?,
            );
            let mut out = Vec::with_capacity(t.out.len());
            for o in &t.out {
                out.push(Outcome {
                    obs: look(&oi, "observation", &o.o)?,
                    next: look(&si, "state", &o.s2)?,
                    prob: o.p,
                });
            }
            let k = raw.key(s, a1, a2);
            if !raw.transitions[k].is_empty() {
                return Err(GameError::Malformed(format!(
                    "transition ({}, {}, {}) listed twice",
                    t.s, t.a1, t.a2
                ))
                .into());
            }
            raw.transitions[k] = out;
        }
        for r in &self.rewards {
            let (s, a1, a2) = (
                look(&si, "state", &r.s)?,
                look(&a1i, "player-1 action", &r.a1)?,
                look(&a2i, "player-2 action", &r.a2)?,
            );
            raw.set_reward(s, a1, a2, r.r);
        }
        if let Some(blocks) = &self.partitions {
            let names: Vec<String> = blocks.iter().map(|b| b.block.clone()).collect();
            let bi = index(&names);
            let mut out = Vec::with_capacity(blocks.len());
            for b in blocks {
                let states = b
                    .states
                    .iter()
                    .map(|s| look(&si, "state", s))
                    .collect::<Result<_, _>>()?;
                let successors = b
                    .successors
                    .iter()
                    .map(|e| {
                        Ok((
                            look(&a1i, "player-1 action", &e.a1)?,
                            look(&oi, "observation", &e.o)?,
                            look(&bi, "block", &e.block)?,
                        ))
                    })
                    .collect::<Result<_, IoError>>()?;
                out.push(RawBlock {
                    name: b.block.clone(),
                    states,
                    successors,
                });
            }
            raw.partitions = Some(out);
        }
        Ok(raw)
    }
}

pub fn game_to_json(game: &Game) -> String {
    serde_json::to_string_pretty(&GameFile::from_game(game)).expect("game serialises")
}

pub fn game_from_json(text: &str) -> Result<Game, IoError> {
    let file: GameFile = serde_json::from_str(text)?;
    Ok(validate_game(file.to_raw()?)?)
}

/// Git-style content hash: SHA-256 of `blob <len>\0` followed by the
/// compact JSON form of the game.
pub fn game_hash(game: &Game) -> String {
    let body = serde_json::to_string(&GameFile::from_game(game)).expect("game serialises");
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", body.len()).as_bytes());
    h.update(body.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsMeta {
    pub format: u32,
    pub game_hash: String,
    pub gamma: f64,
    pub delta: f64,
    /// Utility range `L` of the game.
    pub lower: f64,
    /// Utility range `U` of the game.
    pub upper: f64,
    /// Gap at the initial belief when the bounds were written.
    pub epsilon_achieved: f64,
    pub status: SolveStatus,
    pub config: SolverConfig,
    pub prune_growth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockBounds {
    pub block: String,
    pub gamma_set: Vec<Vec<f64>>,
    pub upsilon_set: Vec<UpperPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsFile {
    pub meta: BoundsMeta,
    pub blocks: Vec<BlockBounds>,
}

impl BoundsFile {
    pub fn new(
        game: &Game,
        lb: &LowerBound,
        ub: &UpperBound,
        status: SolveStatus,
        epsilon_achieved: f64,
        config: &SolverConfig,
    ) -> Self {
        let range = utility_bounds(game);
        let part = game.partition();
        let blocks = (0..part.num_blocks())
            .map(|k| BlockBounds {
                block: part.block_name(k).to_string(),
                gamma_set: lb.vectors(k).iter().map(|a| a.values.clone()).collect(),
                upsilon_set: ub.points(k).to_vec(),
            })
            .collect();
        Self {
            meta: BoundsMeta {
                format: BOUNDS_FORMAT,
                game_hash: game_hash(game),
                gamma: game.gamma(),
                delta: range.delta,
                lower: range.lower,
                upper: range.upper,
                epsilon_achieved,
                status,
                config: config.clone(),
                prune_growth: ub.prune_growth(),
            },
            blocks,
        }
    }

    /// Rebuilds both bounds for `game`, refusing files written for another
    /// game.
    pub fn bounds(&self, game: &Game) -> Result<(LowerBound, UpperBound), IoError> {
        if self.meta.format != BOUNDS_FORMAT {
            return Err(IoError::Format(self.meta.format));
        }
        let got = game_hash(game);
        if got != self.meta.game_hash {
            return Err(IoError::HashMismatch {
                expected: self.meta.game_hash.clone(),
                got,
            });
        }
        let range = utility_bounds(game);
        let part = game.partition();
        let sizes: Vec<usize> = (0..part.num_blocks())
            .map(|k| part.states(k).len())
            .collect();
        if self.blocks.len() != sizes.len() {
            return Err(GameError::Malformed(format!(
                "bounds list {} blocks, game has {}",
                self.blocks.len(),
                sizes.len()
            ))
            .into());
        }
        let gamma_sets = self
            .blocks
            .iter()
            .enumerate()
            .map(|(k, b)| {
                b.gamma_set
                    .iter()
                    .map(|v| AlphaVector::new(k, v.clone()))
                    .collect()
            })
            .collect();
        let upsilon_sets = self.blocks.iter().map(|b| b.upsilon_set.clone()).collect();
        let lb = LowerBound::from_sets(sizes.clone(), range, gamma_sets)?;
        let ub = UpperBound::from_sets(sizes, range, upsilon_sets, self.meta.prune_growth)?;
        Ok((lb, ub))
    }
}

pub fn bounds_to_json(file: &BoundsFile) -> String {
    serde_json::to_string(file).expect("bounds serialise")
}

pub fn bounds_from_json(text: &str) -> Result<BoundsFile, IoError> {
    Ok(serde_json::from_str(text)?)
}
