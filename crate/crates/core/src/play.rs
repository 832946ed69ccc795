//! Playing the computed strategies.
//!
//! Player 1 uses continual resolving: every stage re-solves the lower-bound
//! stage game under the constraint that the composed value stays above the
//! running certificate (the gadget), then moves the gadget to the
//! continuation of the realised `(a1, o)`. Player 2 replays the upper-bound
//! stage game at player 1's belief, which it tracks exactly because it knows
//! its own stage strategy.

use std::collections::HashMap;
use std::io::{self, Write};
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{AlphaVector, BoundsError, LowerBound, UpperBound};
use crate::game::{
    belief_update, utility_bounds, Belief, Game, GameError, StageStrategy1, StageStrategy2,
};
use crate::stage::{resolve_gadget, solve_stage_lb, solve_stage_ub, Continuations, StageError};

#[derive(Debug, Error)]
pub enum PlayError {
    #[error("gadget constraints cannot be met at belief {belief:?} (block {block})")]
    InfeasibleGadget { block: usize, belief: Vec<f64> },
    #[error(transparent)]
    Stage(StageError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("invalid simulation setup: {0}")]
    InvalidConfig(String),
}

fn stage_error(b: &Belief) -> impl FnOnce(StageError) -> PlayError + '_ {
    move |e| match e {
        StageError::InfeasibleGadget => PlayError::InfeasibleGadget {
            block: b.block,
            belief: b.probs.clone(),
        },
        e => PlayError::Stage(e),
    }
}

/// Player 1's stage decision at one `(belief, gadget)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct P1Decision {
    pub pi1: StageStrategy1,
    /// Player 2's strategy assumed for the belief update.
    pub assumed_pi2: StageStrategy2,
    /// Next gadget for every `(a1, o)` with `pi1(a1) > 0`.
    pub continuations: Continuations,
}

/// Continual-resolving state of player 1.
#[derive(Debug, Clone)]
pub struct P1Session<'a> {
    game: &'a Game,
    lb: &'a LowerBound,
    pub belief: Belief,
    pub gadget: AlphaVector,
    /// Observations that were impossible under the assumed strategy.
    pub resets: usize,
    /// States consistent with the history under any player-2 play.
    possible: Vec<bool>,
}

/// Starts continual resolving at `b_init` with the best vector of `Γ` there.
pub fn p1_start<'a>(
    game: &'a Game,
    lb: &'a LowerBound,
    b_init: &Belief,
) -> Result<P1Session<'a>, PlayError> {
    let i = lb.argmax(b_init)?;
    let mut possible = vec![false; game.num_states()];
    for (&s, &p) in game.block_states(b_init.block).iter().zip(&b_init.probs) {
        possible[s] = p > 0.0;
    }
    Ok(P1Session {
        game,
        lb,
        belief: b_init.clone(),
        gadget: lb.vectors(b_init.block)[i].clone(),
        resets: 0,
        possible,
    })
}

impl P1Session<'_> {
    /// Resolves the current stage.
    pub fn decide(&self) -> Result<P1Decision, PlayError> {
        let (pi1, continuations) = resolve_gadget(self.game, &self.belief, &self.gadget, self.lb)
            .map_err(stage_error(&self.belief))?;
        let assumed_pi2 = solve_stage_lb(self.game, &self.belief, self.lb)
            .map_err(stage_error(&self.belief))?
            .pi2;
        Ok(P1Decision {
            pi1,
            assumed_pi2,
            continuations,
        })
    }

    /// Moves to the subgame after playing `a1` and observing `o`. An
    /// observation the assumed strategy rules out resets the gadget to the
    /// best vector at the uniform belief over the states still possible;
    /// returns true in that case.
    pub fn advance(&mut self, d: &P1Decision, a1: usize, o: usize) -> Result<bool, PlayError> {
        let game = self.game;
        let mut possible = vec![false; game.num_states()];
        for s in (0..game.num_states()).filter(|&s| self.possible[s]) {
            for a2 in 0..game.num_actions2() {
                for out in game.outcomes(s, a1, a2) {
                    if out.obs == o && out.prob > 0.0 {
                        possible[out.next] = true;
                    }
                }
            }
        }
        let Some(first) = possible.iter().position(|&p| p) else {
            return Err(GameError::ZeroProbabilityObservation { a1, o }.into());
        };
        self.possible = possible;
        let next = belief_update(game, &self.belief, a1, &d.assumed_pi2, o);
        if let (Ok(next), Some(alpha)) = (&next, d.continuations.get(a1, o)) {
            self.belief = next.clone();
            self.gadget = alpha.clone();
            return Ok(false);
        }
        let block = game.partition().block_of(first);
        let states = game.block_states(block);
        let count = states.iter().filter(|&&s| self.possible[s]).count() as f64;
        let probs = states
            .iter()
            .map(|&s| if self.possible[s] { 1.0 / count } else { 0.0 })
            .collect();
        let next = Belief::new(block, probs)?;
        let i = self.lb.argmax(&next)?;
        self.gadget = self.lb.vectors(block)[i].clone();
        self.belief = next;
        self.resets += 1;
        Ok(true)
    }
}

/// Stage-game replay state of player 2.
#[derive(Debug, Clone)]
pub struct P2Session<'a> {
    game: &'a Game,
    ub: &'a UpperBound,
    /// Player 1's belief as tracked by player 2.
    pub belief: Belief,
}

pub fn p2_start<'a>(game: &'a Game, ub: &'a UpperBound, b_init: &Belief) -> P2Session<'a> {
    P2Session {
        game,
        ub,
        belief: b_init.clone(),
    }
}

impl P2Session<'_> {
    /// Player 2's optimal strategy in the upper-bound stage game.
    pub fn decide(&self) -> Result<StageStrategy2, PlayError> {
        Ok(solve_stage_ub(self.game, &self.belief, self.ub)
            .map_err(stage_error(&self.belief))?
            .pi2)
    }

    /// Tracks player 1's belief after `(a1, o)` given the strategy played.
    pub fn advance(&mut self, pi2: &StageStrategy2, a1: usize, o: usize) -> Result<(), PlayError> {
        self.belief = match belief_update(self.game, &self.belief, a1, pi2, o) {
            Ok(b) => b,
            Err(GameError::ZeroProbabilityObservation { .. }) => {
                let n = self.belief.len();
                let uniform = StageStrategy2::uniform(n, self.game.num_actions2());
                belief_update(self.game, &self.belief, a1, &uniform, o)?
            }
            Err(e) => return Err(e.into()),
        };
        Ok(())
    }
}

/// Player 1 in a simulation.
#[derive(Debug, Clone, Copy)]
pub enum Player1<'a> {
    Resolving(&'a LowerBound),
    Uniform,
}

/// Player 2 in a simulation.
#[derive(Debug, Clone, Copy)]
pub enum Player2<'a> {
    Replay(&'a UpperBound),
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub horizon: usize,
    pub episodes: usize,
    pub seed: u64,
    pub keep_trajectories: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub state: usize,
    pub a1: usize,
    pub a2: usize,
    pub obs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    /// Discounted reward over the first `steps` stages.
    pub payoff: f64,
    pub steps: usize,
    pub trajectory: Option<Vec<TrajectoryStep>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub episodes: usize,
    pub horizon: usize,
    pub mean: f64,
    pub std_error: f64,
    pub min: f64,
    pub max: f64,
    /// `γ^T (U - L)`: how far a truncated payoff can be from the full one.
    pub truncation: f64,
    /// Gadget resets of player 1 over all episodes.
    pub p1_resets: usize,
    pub results: Vec<EpisodeResult>,
}

/// Smallest horizon with `γ^T (U - L) <= 0.5`.
pub fn default_horizon(game: &Game) -> usize {
    truncation_horizon(game, 0.5)
}

/// Smallest horizon with `γ^T (U - L) <= tol`.
pub fn truncation_horizon(game: &Game, tol: f64) -> usize {
    let u = utility_bounds(game);
    let mut width = u.upper - u.lower;
    let mut t = 0;
    while width > tol && t < 100_000 {
        width *= game.gamma();
        t += 1;
    }
    t
}

pub fn truncation_error(game: &Game, horizon: usize) -> f64 {
    let u = utility_bounds(game);
    game.gamma().powi(horizon as i32) * (u.upper - u.lower)
}

type Key = (usize, Vec<u64>, Vec<u64>);

fn key(b: &Belief, extra: &[f64]) -> Key {
    (
        b.block,
        b.probs.iter().map(|x| x.to_bits()).collect(),
        extra.iter().map(|x| x.to_bits()).collect(),
    )
}

fn sample(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Plays `episodes` games of `horizon` stages from the initial belief and
/// reports statistics of the truncated discounted payoff. Episode `k` draws
/// from its own random stream, so results depend only on the seed. Stage
/// decisions are memoised on the exact session state.
pub fn simulate(
    game: &Game,
    p1: Player1,
    p2: Player2,
    cfg: &SimulationConfig,
) -> Result<SimulationReport, PlayError> {
    if cfg.episodes == 0 {
        return Err(PlayError::InvalidConfig("at least one episode needed".into()));
    }
    let b0 = game.initial_belief();
    let n1 = game.num_actions1();
    let n2 = game.num_actions2();
    let absorbing: Vec<bool> = (0..game.num_states())
        .map(|s| game.is_absorbing_zero(s))
        .collect();
    let p1_root = match p1 {
        Player1::Resolving(lb) => Some(p1_start(game, lb, b0)?),
        Player1::Uniform => None,
    };
    let p2_root = match p2 {
        Player2::Replay(ub) => Some(p2_start(game, ub, b0)),
        Player2::Uniform => None,
    };
    let mut p1_memo: HashMap<Key, Rc<P1Decision>> = HashMap::new();
    let mut p2_memo: HashMap<Key, Rc<StageStrategy2>> = HashMap::new();
    let uniform1 = StageStrategy1::uniform(n1);

    let mut results = Vec::with_capacity(cfg.episodes);
    let mut resets = 0;
    for ep in 0..cfg.episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(ep as u64);
        let states = game.block_states(b0.block);
        let mut s = states[sample(&mut rng, &b0.probs)];
        let mut s1 = p1_root.clone();
        let mut s2 = p2_root.clone();
        let mut payoff = 0.0;
        let mut discount = 1.0;
        let mut trajectory = cfg.keep_trajectories.then(Vec::new);
        let mut steps = 0;
        while steps < cfg.horizon && !absorbing[s] {
            let d1 = match &s1 {
                Some(sess) => {
                    let k = key(&sess.belief, &sess.gadget.values);
                    match p1_memo.get(&k) {
                        Some(d) => Some(d.clone()),
                        None => {
                            let d = Rc::new(sess.decide()?);
                            p1_memo.insert(k, d.clone());
                            Some(d)
                        }
                    }
                }
                None => None,
            };
            let pi2 = match &s2 {
                Some(sess) => {
                    let k = key(&sess.belief, &[]);
                    match p2_memo.get(&k) {
                        Some(d) => Some(d.clone()),
                        None => {
                            let d = Rc::new(sess.decide()?);
                            p2_memo.insert(k, d.clone());
                            Some(d)
                        }
                    }
                }
                None => None,
            };
            let a1 = sample(&mut rng, &d1.as_ref().map_or(&uniform1, |d| &d.pi1).probs);
            let a2 = match &pi2 {
                Some(pi2) => {
                    let local = game.partition().local_index(s);
                    sample(&mut rng, &pi2.rows[local])
                }
                None => rng.gen_range(0..n2),
            };
            payoff += discount * game.reward(s, a1, a2);
            let outs = game.outcomes(s, a1, a2);
            let probs: Vec<f64> = outs.iter().map(|o| o.prob).collect();
            let out = outs[sample(&mut rng, &probs)];
            if let (Some(sess), Some(d)) = (&mut s1, &d1) {
                if sess.advance(d, a1, out.obs)? {
                    resets += 1;
                }
            }
            if let (Some(sess), Some(pi2)) = (&mut s2, &pi2) {
                sess.advance(pi2, a1, out.obs)?;
            }
            if let Some(t) = &mut trajectory {
                t.push(TrajectoryStep {
                    state: s,
                    a1,
                    a2,
                    obs: out.obs,
                });
            }
            s = out.next;
            discount *= game.gamma();
            steps += 1;
        }
        results.push(EpisodeResult {
            payoff,
            steps,
            trajectory,
        });
    }

    let m = results.len() as f64;
    let mean = results.iter().map(|r| r.payoff).sum::<f64>() / m;
    let var = if results.len() > 1 {
        results
            .iter()
            .map(|r| (r.payoff - mean).powi(2))
            .sum::<f64>()
            / (m - 1.0)
    } else {
        0.0
    };
    Ok(SimulationReport {
        episodes: results.len(),
        horizon: cfg.horizon,
        mean,
        std_error: (var / m).sqrt(),
        min: results.iter().map(|r| r.payoff).fold(f64::INFINITY, f64::min),
        max: results
            .iter()
            .map(|r| r.payoff)
            .fold(f64::NEG_INFINITY, f64::max),
        truncation: truncation_error(game, cfg.horizon),
        p1_resets: resets,
        results,
    })
}

/// Writes one JSON record per episode.
pub fn write_trajectories(mut w: impl Write, results: &[EpisodeResult]) -> io::Result<()> {
    for (i, r) in results.iter().enumerate() {
        let line = serde_json::json!({
            "episode": i,
            "payoff": r.payoff,
            "steps": r.steps,
            "trajectory": r.trajectory,
        });
        writeln!(w, "{line}")?;
    }
    Ok(())
}
