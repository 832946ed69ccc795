//! Finite one-sided partially observable stochastic games.
//!
//! Player 1 (the maximiser) sees only its own actions and the observations;
//! player 2 sees everything. States can be split into partition blocks so that
//! player 1 always knows which block the game is in; beliefs are then vectors
//! over the states of a single block.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when validating transition rows and beliefs.
pub const PROB_TOL: f64 = 1e-9;
/// Tolerance for sums of derived distributions.
pub const SUM_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("negative probability {p} in transition ({s}, {a1}, {a2})")]
    NegativeProbability {
        s: usize,
        a1: usize,
        a2: usize,
        p: f64,
    },
    #[error("transition row ({s}, {a1}, {a2}) sums to {sum}")]
    RowSumMismatch {
        s: usize,
        a1: usize,
        a2: usize,
        sum: f64,
    },
    #[error("partition leak: state {state} reached from block {block} via ({a1}, {o}) lies outside the successor block")]
    PartitionLeak {
        block: usize,
        a1: usize,
        o: usize,
        state: usize,
    },
    #[error("discount factor {0} is not inside (0, 1)")]
    GammaOutOfRange(f64),
    #[error("invalid belief: {0}")]
    InvalidBelief(String),
    #[error("observation {o} after action {a1} has zero probability")]
    ZeroProbabilityObservation { a1: usize, o: usize },
    #[error("malformed game: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub obs: usize,
    pub next: usize,
    pub prob: f64,
}

/// A partition block as supplied by a generator or a game file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawBlock {
    pub name: String,
    pub states: Vec<usize>,
    /// `(a1, o, successor block)`; left empty, successors are inferred.
    pub successors: Vec<(usize, usize, usize)>,
}

/// Unvalidated game description with dense `(s, a1, a2)` indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct RawGame {
    pub states: Vec<String>,
    pub actions1: Vec<String>,
    pub actions2: Vec<String>,
    pub observations: Vec<String>,
    pub gamma: f64,
    pub initial_belief: Vec<f64>,
    pub transitions: Vec<Vec<Outcome>>,
    pub rewards: Vec<f64>,
    pub partitions: Option<Vec<RawBlock>>,
}

impl RawGame {
    pub fn new(
        states: Vec<String>,
        actions1: Vec<String>,
        actions2: Vec<String>,
        observations: Vec<String>,
        gamma: f64,
    ) -> Self {
        let keys = states.len() * actions1.len() * actions2.len();
        let n = states.len();
        Self {
            states,
            actions1,
            actions2,
            observations,
            gamma,
            initial_belief: vec![0.0; n],
            transitions: vec![Vec::new(); keys],
            rewards: vec![0.0; keys],
            partitions: None,
        }
    }

    pub fn key(&self, s: usize, a1: usize, a2: usize) -> usize {
        (s * self.actions1.len() + a1) * self.actions2.len() + a2
    }

    pub fn set_transition(&mut self, s: usize, a1: usize, a2: usize, out: Vec<Outcome>) {
        let k = self.key(s, a1, a2);
        self.transitions[k] = out;
    }

    pub fn set_reward(&mut self, s: usize, a1: usize, a2: usize, r: f64) {
        let k = self.key(s, a1, a2);
        self.rewards[k] = r;
    }
}

/// Disjoint cover of the state space with the block-transition map.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    names: Vec<String>,
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
    local: Vec<usize>,
    successor: Vec<Option<usize>>,
    n_actions1: usize,
    n_obs: usize,
}

impl Partition {
    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_name(&self, block: usize) -> &str {
        &self.names[block]
    }

    pub fn states(&self, block: usize) -> &[usize] {
        &self.blocks[block]
    }

    pub fn block_of(&self, state: usize) -> usize {
        self.block_of[state]
    }

    /// Position of `state` within its block.
    pub fn local_index(&self, state: usize) -> usize {
        self.local[state]
    }

    /// Block reached after `(a1, o)` from `block`, if any transition leads there.
    pub fn successor(&self, block: usize, a1: usize, o: usize) -> Option<usize> {
        self.successor[(block * self.n_actions1 + a1) * self.n_obs + o]
    }
}

/// Probability vector over the states of one partition block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub block: usize,
    pub probs: Vec<f64>,
}

impl Belief {
    pub fn new(block: usize, probs: Vec<f64>) -> Result<Self, GameError> {
        if probs.iter().any(|p| !(*p >= -PROB_TOL) || !p.is_finite()) {
            return Err(GameError::InvalidBelief(format!(
                "negative entry in {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(GameError::InvalidBelief(format!("entries sum to {sum}")));
        }
        Ok(Self { block, probs })
    }

    pub fn point(block: usize, index: usize, len: usize) -> Self {
        let mut probs = vec![0.0; len];
        probs[index] = 1.0;
        Self { block, probs }
    }

    pub fn uniform(block: usize, len: usize) -> Self {
        Self {
            block,
            probs: vec![1.0 / len as f64; len],
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn l1_distance(&self, other: &Belief) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

/// Player 1's distribution over actions for the current stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStrategy1 {
    pub probs: Vec<f64>,
}

impl StageStrategy1 {
    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn pure(n: usize, a: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[a] = 1.0;
        Self { probs }
    }

    /// Clips tiny or negative entries to zero and renormalises.
    pub fn cleaned(mut probs: Vec<f64>, threshold: f64) -> Self {
        clean_distribution(&mut probs, threshold);
        Self { probs }
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        is_distribution(&self.probs, tol)
    }
}

/// Player 2's stage strategy `pi2(a2 | s)`, one row per block-local state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStrategy2 {
    pub rows: Vec<Vec<f64>>,
}

impl StageStrategy2 {
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            rows: vec![vec![1.0 / n_actions as f64; n_actions]; n_states],
        }
    }

    /// Same pure action in every state.
    pub fn pure(n_states: usize, n_actions: usize, a2: usize) -> Self {
        let mut row = vec![0.0; n_actions];
        row[a2] = 1.0;
        Self {
            rows: vec![row; n_states],
        }
    }

    /// Conditions a joint `pi2(s and a2)` on the belief; rows of states with
    /// (numerically) zero belief become uniform.
    pub fn from_joint(joint: &[Vec<f64>], belief: &[f64], threshold: f64) -> Self {
        let rows = joint
            .iter()
            .zip(belief)
            .map(|(row, &bs)| {
                let mass: f64 = row.iter().map(|v| v.max(0.0)).sum();
                if bs > 1e-9 && mass > 0.0 {
                    let mut r: Vec<f64> = row.iter().map(|v| v.max(0.0) / mass).collect();
                    clean_distribution(&mut r, threshold);
                    r
                } else {
                    vec![1.0 / row.len() as f64; row.len()]
                }
            })
            .collect();
        Self { rows }
    }

    pub fn joint(&self, belief: &[f64]) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .zip(belief)
            .map(|(row, &bs)| row.iter().map(|p| p * bs).collect())
            .collect()
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.rows.iter().all(|r| is_distribution(r, tol))
    }
}

pub(crate) fn is_distribution(p: &[f64], tol: f64) -> bool {
    p.iter().all(|&x| x >= -tol) && (p.iter().sum::<f64>() - 1.0).abs() <= tol
}

pub(crate) fn clean_distribution(p: &mut [f64], threshold: f64) {
    for x in p.iter_mut() {
        if !(*x > threshold) {
            *x = 0.0;
        }
    }
    let sum: f64 = p.iter().sum();
    if sum > 0.0 {
        for x in p.iter_mut() {
            *x /= sum;
        }
    } else {
        let n = p.len() as f64;
        for x in p.iter_mut() {
            *x = 1.0 / n;
        }
    }
}

/// Payoff range `[lower, upper]` of any play and the Lipschitz constant
/// `delta = (upper - lower) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityBounds {
    pub lower: f64,
    pub upper: f64,
    pub delta: f64,
}

/// A validated game. Immutable and freely shareable.
#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    states: Vec<String>,
    actions1: Vec<String>,
    actions2: Vec<String>,
    observations: Vec<String>,
    gamma: f64,
    transitions: Vec<Vec<Outcome>>,
    rewards: Vec<f64>,
    initial_belief: Belief,
    partition: Partition,
    declared_partition: bool,
}

/// Validates a raw description and builds the immutable game.
pub fn validate_game(raw: RawGame) -> Result<Game, GameError> {
    let RawGame {
        states,
        actions1,
        actions2,
        observations,
        gamma,
        initial_belief,
        mut transitions,
        rewards,
        partitions,
    } = raw;
    let (ns, n1, n2, no) = (
        states.len(),
        actions1.len(),
        actions2.len(),
        observations.len(),
    );
    if ns == 0 || n1 == 0 || n2 == 0 || no == 0 {
        return Err(GameError::Malformed(
            "states, actions and observations must be non-empty".into(),
        ));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(GameError::GammaOutOfRange(gamma));
    }
    let keys = ns * n1 * n2;
    if transitions.len() != keys || rewards.len() != keys || initial_belief.len() != ns {
        return Err(GameError::Malformed(
            "table sizes do not match |S|x|A1|x|A2|".into(),
        ));
    }
    if let Some(r) = rewards.iter().find(|r| !r.is_finite()) {
        return Err(GameError::Malformed(format!("non-finite reward {r}")));
    }

    for s in 0..ns {
        for a1 in 0..n1 {
            for a2 in 0..n2 {
                let row = &mut transitions[(s * n1 + a1) * n2 + a2];
                let mut sum = 0.0;
                for out in row.iter() {
                    if out.obs >= no || out.next >= ns {
                        return Err(GameError::Malformed(format!(
                            "transition ({s}, {a1}, {a2}) references an unknown index"
                        )));
                    }
                    if !(out.prob >= 0.0) {
                        return Err(GameError::NegativeProbability {
                            s,
                            a1,
                            a2,
                            p: out.prob,
                        });
                    }
                    sum += out.prob;
                }
                if (sum - 1.0).abs() > PROB_TOL {
                    return Err(GameError::RowSumMismatch { s, a1, a2, sum });
                }
                row.retain(|o| o.prob > 0.0);
                for out in row.iter_mut() {
                    out.prob /= sum;
                }
                // merge duplicate (o, s') entries
                row.sort_by_key(|o| (o.obs, o.next));
                row.dedup_by(|b, a| {
                    if a.obs == b.obs && a.next == b.next {
                        a.prob += b.prob;
                        true
                    } else {
                        false
                    }
                });
            }
        }
    }

    let declared_partition = partitions.is_some();
    let raw_blocks = partitions.unwrap_or_else(|| {
        vec![RawBlock {
            name: "all".into(),
            states: (0..ns).collect(),
            successors: Vec::new(),
        }]
    });
    let nb = raw_blocks.len();
    let mut block_of = vec![usize::MAX; ns];
    let mut local = vec![0; ns];
    let mut blocks = Vec::with_capacity(nb);
    let mut names = Vec::with_capacity(nb);
    for (bi, blk) in raw_blocks.iter().enumerate() {
        if blk.states.is_empty() {
            return Err(GameError::Malformed(format!("block {} is empty", blk.name)));
        }
        for (li, &s) in blk.states.iter().enumerate() {
            if s >= ns {
                return Err(GameError::Malformed(format!(
                    "block {} has unknown state",
                    blk.name
                )));
            }
            if block_of[s] != usize::MAX {
                return Err(GameError::Malformed(format!(
                    "state {} appears in more than one block",
                    states[s]
                )));
            }
            block_of[s] = bi;
            local[s] = li;
        }
        blocks.push(blk.states.clone());
        names.push(blk.name.clone());
    }
    if let Some(s) = block_of.iter().position(|&b| b == usize::MAX) {
        return Err(GameError::Malformed(format!(
            "state {} is not covered by any block",
            states[s]
        )));
    }

    let mut successor: Vec<Option<usize>> = vec![None; nb * n1 * no];
    for (bi, blk) in raw_blocks.iter().enumerate() {
        for &(a1, o, target) in &blk.successors {
            if a1 >= n1 || o >= no || target >= nb {
                return Err(GameError::Malformed(format!(
                    "block {} has an invalid successor entry",
                    blk.name
                )));
            }
            successor[(bi * n1 + a1) * no + o] = Some(target);
        }
    }
    // Infer undeclared successors from the first reachable state, then check
    // that every reachable state stays inside the successor block.
    for bi in 0..nb {
        for &s in &blocks[bi] {
            for a1 in 0..n1 {
                for a2 in 0..n2 {
                    for out in &transitions[(s * n1 + a1) * n2 + a2] {
                        let slot = &mut successor[(bi * n1 + a1) * no + out.obs];
                        let target = *slot.get_or_insert(block_of[out.next]);
                        if block_of[out.next] != target {
                            return Err(GameError::PartitionLeak {
                                block: bi,
                                a1,
                                o: out.obs,
                                state: out.next,
                            });
                        }
                    }
                }
            }
        }
    }

    let support: Vec<usize> = (0..ns).filter(|&s| initial_belief[s] > 0.0).collect();
    let Some(&first) = support.first() else {
        return Err(GameError::InvalidBelief(
            "initial belief has empty support".into(),
        ));
    };
    let init_block = block_of[first];
    if support.iter().any(|&s| block_of[s] != init_block) {
        return Err(GameError::InvalidBelief(
            "initial belief support spans several blocks".into(),
        ));
    }
    let probs: Vec<f64> = blocks[init_block]
        .iter()
        .map(|&s| initial_belief[s])
        .collect();
    let initial_belief = Belief::new(init_block, probs)?;

    Ok(Game {
        states,
        actions1,
        actions2,
        observations,
        gamma,
        transitions,
        rewards,
        initial_belief,
        partition: Partition {
            names,
            blocks,
            block_of,
            local,
            successor,
            n_actions1: n1,
            n_obs: no,
        },
        declared_partition,
    })
}

/// One atom `(s, a1, a2, o, s')` of the one-step distribution, global indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageEvent {
    pub state: usize,
    pub a1: usize,
    pub a2: usize,
    pub obs: usize,
    pub next: usize,
    pub prob: f64,
}

impl Game {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions1(&self) -> usize {
        self.actions1.len()
    }

    pub fn num_actions2(&self) -> usize {
        self.actions2.len()
    }

    pub fn num_observations(&self) -> usize {
        self.observations.len()
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn action1_names(&self) -> &[String] {
        &self.actions1
    }

    pub fn action2_names(&self) -> &[String] {
        &self.actions2
    }

    pub fn observation_names(&self) -> &[String] {
        &self.observations
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn initial_belief(&self) -> &Belief {
        &self.initial_belief
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    /// Whether the partition came from the description rather than defaulting
    /// to a single block.
    pub fn has_declared_partition(&self) -> bool {
        self.declared_partition
    }

    pub fn block_states(&self, block: usize) -> &[usize] {
        self.partition.states(block)
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.iter().map(Vec::len).sum()
    }

    #[inline]
    pub fn outcomes(&self, s: usize, a1: usize, a2: usize) -> &[Outcome] {
        &self.transitions[(s * self.actions1.len() + a1) * self.actions2.len() + a2]
    }

    #[inline]
    pub fn reward(&self, s: usize, a1: usize, a2: usize) -> f64 {
        self.rewards[(s * self.actions1.len() + a1) * self.actions2.len() + a2]
    }

    /// Initial belief as a dense vector over all states.
    pub fn initial_distribution(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.num_states()];
        for (i, &s) in self
            .block_states(self.initial_belief.block)
            .iter()
            .enumerate()
        {
            d[s] = self.initial_belief.probs[i];
        }
        d
    }

    /// Returns a raw description equal to this game.
    pub fn to_raw(&self) -> RawGame {
        let partitions = if self.declared_partition {
            let p = &self.partition;
            Some(
                (0..p.num_blocks())
                    .map(|b| {
                        let mut successors = Vec::new();
                        for a1 in 0..self.num_actions1() {
                            for o in 0..self.num_observations() {
                                if let Some(t) = p.successor(b, a1, o) {
                                    successors.push((a1, o, t));
                                }
                            }
                        }
                        RawBlock {
                            name: p.names[b].clone(),
                            states: p.blocks[b].clone(),
                            successors,
                        }
                    })
                    .collect(),
            )
        } else {
            None
        };
        RawGame {
            states: self.states.clone(),
            actions1: self.actions1.clone(),
            actions2: self.actions2.clone(),
            observations: self.observations.clone(),
            gamma: self.gamma,
            initial_belief: self.initial_distribution(),
            transitions: self.transitions.clone(),
            rewards: self.rewards.clone(),
            partitions,
        }
    }

    /// State is absorbing with zero reward under every action pair.
    pub fn is_absorbing_zero(&self, s: usize) -> bool {
        (0..self.num_actions1()).all(|a1| {
            (0..self.num_actions2()).all(|a2| {
                self.reward(s, a1, a2) == 0.0
                    && self.outcomes(s, a1, a2).iter().all(|o| o.next == s)
            })
        })
    }
}

/// Joint distribution over `(s, a1, a2, o, s')` for one stage.
pub fn stage_distribution(
    game: &Game,
    b: &Belief,
    p1: &StageStrategy1,
    p2: &StageStrategy2,
) -> Vec<StageEvent> {
    let mut events = Vec::new();
    for (i, &s) in game.block_states(b.block).iter().enumerate() {
        let bs = b.probs[i];
        if bs <= 0.0 {
            continue;
        }
        for (a1, &pa1) in p1.probs.iter().enumerate() {
            if pa1 <= 0.0 {
                continue;
            }
            for (a2, &pa2) in p2.rows[i].iter().enumerate() {
                if pa2 <= 0.0 {
                    continue;
                }
                for out in game.outcomes(s, a1, a2) {
                    events.push(StageEvent {
                        state: s,
                        a1,
                        a2,
                        obs: out.obs,
                        next: out.next,
                        prob: bs * pa1 * pa2 * out.prob,
                    });
                }
            }
        }
    }
    events
}

/// Probability of observing `o` after playing `a1`, i.e. the `(a1, o)`
/// marginal without the player-1 factor `pi1(a1)`.
pub fn observation_probability(
    game: &Game,
    b: &Belief,
    a1: usize,
    p2: &StageStrategy2,
    o: usize,
) -> f64 {
    let mut total = 0.0;
    for (i, &s) in game.block_states(b.block).iter().enumerate() {
        let bs = b.probs[i];
        if bs <= 0.0 {
            continue;
        }
        for (a2, &pa2) in p2.rows[i].iter().enumerate() {
            if pa2 <= 0.0 {
                continue;
            }
            for out in game.outcomes(s, a1, a2) {
                if out.obs == o {
                    total += bs * pa2 * out.prob;
                }
            }
        }
    }
    total
}

/// `Pr[a1, o]` under belief `b` and stage strategies `p1`, `p2`.
pub fn prob_action_obs(
    game: &Game,
    b: &Belief,
    p1: &StageStrategy1,
    p2: &StageStrategy2,
    a1: usize,
    o: usize,
) -> f64 {
    if p1.probs[a1] <= 0.0 {
        return 0.0;
    }
    p1.probs[a1] * observation_probability(game, b, a1, p2, o)
}

/// Bayesian update of player 1's belief after `(a1, o)` assuming player 2
/// played `p2`.
pub fn belief_update(
    game: &Game,
    b: &Belief,
    a1: usize,
    p2: &StageStrategy2,
    o: usize,
) -> Result<Belief, GameError> {
    let Some(next_block) = game.partition().successor(b.block, a1, o) else {
        return Err(GameError::ZeroProbabilityObservation { a1, o });
    };
    let part = game.partition();
    let mut probs = vec![0.0; part.states(next_block).len()];
    for (i, &s) in game.block_states(b.block).iter().enumerate() {
        let bs = b.probs[i];
        if bs <= 0.0 {
            continue;
        }
        for (a2, &pa2) in p2.rows[i].iter().enumerate() {
            if pa2 <= 0.0 {
                continue;
            }
            for out in game.outcomes(s, a1, a2) {
                if out.obs == o {
                    probs[part.local_index(out.next)] += bs * pa2 * out.prob;
                }
            }
        }
    }
    let z: f64 = probs.iter().sum();
    if !(z > 0.0) {
        return Err(GameError::ZeroProbabilityObservation { a1, o });
    }
    for p in &mut probs {
        *p /= z;
    }
    Ok(Belief {
        block: next_block,
        probs,
    })
}

/// All observations with positive probability after `a1`, with their
/// probability (excluding the `pi1(a1)` factor) and the updated belief.
pub fn successor_beliefs(
    game: &Game,
    b: &Belief,
    a1: usize,
    p2: &StageStrategy2,
) -> Vec<(usize, f64, Belief)> {
    let part = game.partition();
    let mut per_obs: Vec<Option<Vec<f64>>> = vec![None; game.num_observations()];
    for (i, &s) in game.block_states(b.block).iter().enumerate() {
        let bs = b.probs[i];
        if bs <= 0.0 {
            continue;
        }
        for (a2, &pa2) in p2.rows[i].iter().enumerate() {
            if pa2 <= 0.0 {
                continue;
            }
            for out in game.outcomes(s, a1, a2) {
                let nb = part.block_of(out.next);
                let v = per_obs[out.obs].get_or_insert_with(|| vec![0.0; part.states(nb).len()]);
                v[part.local_index(out.next)] += bs * pa2 * out.prob;
            }
        }
    }
    per_obs
        .into_iter()
        .enumerate()
        .filter_map(|(o, v)| {
            let mut v = v?;
            let z: f64 = v.iter().sum();
            if !(z > 0.0) {
                return None;
            }
            for p in &mut v {
                *p /= z;
            }
            let block = part.successor(b.block, a1, o)?;
            Some((o, z, Belief { block, probs: v }))
        })
        .collect()
}

pub fn utility_bounds(game: &Game) -> UtilityBounds {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &r in &game.rewards {
        lo = lo.min(r);
        hi = hi.max(r);
    }
    let lower = lo / (1.0 - game.gamma);
    let upper = hi / (1.0 - game.gamma);
    UtilityBounds {
        lower,
        upper,
        delta: (upper - lower) / 2.0,
    }
}
