//! Heuristic search value iteration for one-sided POSGs.
//!
//! Trials descend from the initial belief, each step solving the two stage
//! games, refining both bounds at the current belief and following the
//! `(a1, o)` branch with the largest probability-weighted excess gap. Bounds
//! are refined once more on the way back up.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use web_time::Instant;

use crate::bounds::{BoundsError, LowerBound, UpperBound};
use crate::game::{successor_beliefs, utility_bounds, Belief, Game};
use crate::init::{lb_init, ub_init, InitError};
use crate::stage::{solve_stage_lb, solve_stage_ub, StageError, StageSolutionLB, StageSolutionUB};

/// Improvement below this is not worth a new vector or point.
const UPDATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Target gap at the initial belief.
    pub epsilon: f64,
    /// Neighbourhood parameter `D`; `None` picks `0.9 (1-γ) ε / (2δ)`.
    pub neighborhood: Option<f64>,
    /// Weight of the per-trial tightening schedule.
    pub eta: f64,
    /// Additive constant of the per-trial tightening schedule.
    pub epsilon_floor: f64,
    pub max_trial_depth: Option<usize>,
    /// Wall-clock budget for the search, initialisation excluded.
    pub time_limit: Option<Duration>,
    pub init_beta: f64,
    /// Budget of each of the two initialisation runs.
    pub init_time_limit: Option<Duration>,
    pub prune_growth: f64,
    /// Recorded with the results; the search itself is deterministic.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            neighborhood: None,
            eta: 0.9,
            epsilon_floor: 0.25,
            max_trial_depth: None,
            time_limit: None,
            init_beta: 0.025,
            init_time_limit: Some(Duration::from_secs(1200)),
            prune_growth: 0.10,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("initialisation failed: {0}")]
    Init(#[from] InitError),
    #[error("stage game at belief {belief:?} (block {block}) failed: {source}")]
    Stage {
        block: usize,
        belief: Vec<f64>,
        source: StageError,
    },
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    WallClockExceeded,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Converged => "converged",
            SolveStatus::WallClockExceeded => "wall_clock_exceeded",
        })
    }
}

/// Per-trial progress record, one line of the progress log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressRecord {
    pub trial: usize,
    pub depth: usize,
    pub gap: f64,
    pub lower: f64,
    pub upper: f64,
    pub gamma_size: usize,
    pub upsilon_size: usize,
    pub elapsed: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub init: f64,
    pub lb_lp: f64,
    pub ub_lp: f64,
    pub prune: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub trials: usize,
    pub updates: usize,
    pub final_gap: f64,
    pub lower: f64,
    pub upper: f64,
    pub neighborhood: f64,
    pub trial_depths: Vec<usize>,
    /// Gap at the initial belief after each trial.
    pub gap_trace: Vec<f64>,
    pub gamma_sizes: Vec<usize>,
    pub upsilon_sizes: Vec<usize>,
    pub init_sweeps: (usize, usize),
    pub init_converged: (bool, bool),
    pub timing: Timing,
}

pub struct SolveResult {
    pub lb: LowerBound,
    pub ub: UpperBound,
    pub stats: SolveStats,
    pub status: SolveStatus,
}

/// Stage solutions computed by one point-based update.
pub struct PointUpdate {
    pub lb_stage: StageSolutionLB,
    pub ub_stage: StageSolutionUB,
    pub lb_inserted: bool,
    pub ub_inserted: bool,
}

/// `ρ(t)` from `ρ(0)`: `ρ(t+1) = (ρ(t) - 2δD) / γ`.
pub fn rho(t: usize, rho0: f64, gamma: f64, delta: f64, d: f64) -> f64 {
    let mut r = rho0;
    for _ in 0..t {
        r = (r - 2.0 * delta * d) / gamma;
    }
    r
}

/// Smallest depth at which `ρ` reaches the full value range.
pub fn max_depth(rho0: f64, gamma: f64, delta: f64, d: f64, range: f64) -> Option<usize> {
    let mut r = rho0;
    for t in 0..100_000 {
        if r >= range {
            return Some(t);
        }
        let next = (r - 2.0 * delta * d) / gamma;
        if next <= r {
            return None;
        }
        r = next;
    }
    None
}

/// `ov(b) - uv(b) - ρ`.
pub fn excess(
    b: &Belief,
    lb: &LowerBound,
    ub: &UpperBound,
    rho_t: f64,
) -> Result<f64, BoundsError> {
    Ok(ub.value(b)? - lb.value(b)? - rho_t)
}

/// Default neighbourhood parameter, strictly inside the admissible range.
pub fn default_neighborhood(gamma: f64, epsilon: f64, delta: f64) -> f64 {
    if delta > 0.0 {
        0.9 * (1.0 - gamma) * epsilon / (2.0 * delta)
    } else {
        0.0
    }
}

/// `ρ(0)` for a trial started when the gap at the initial belief is `gap`.
///
/// The tightened target `floor + η (gap - floor)` is used while it stays
/// below the gap; it is never allowed under the midpoint between `ε` and
/// the fixpoint `2δD / (1-γ)` of the ρ recursion, so ρ keeps growing.
pub fn trial_rho0(gap: f64, cfg: &SolverConfig, gamma: f64, delta: f64, d: f64) -> f64 {
    let eps = cfg.epsilon;
    let fix = 2.0 * delta * d / (1.0 - gamma);
    let lowest = fix + 0.5 * (eps - fix);
    let imm = cfg.epsilon_floor + cfg.eta * (gap - cfg.epsilon_floor);
    if imm < gap {
        imm.max(lowest)
    } else {
        eps
    }
}

/// Cheap upper estimate of `ov(b)`: any feasible point of the projection LP.
struct CornerCache {
    corners: Vec<Vec<f64>>,
}

impl CornerCache {
    fn new(ub: &UpperBound) -> Self {
        let corners = (0..ub.num_blocks())
            .map(|k| {
                let n = ub.block_sizes()[k];
                let mut c = vec![f64::INFINITY; n];
                for p in ub.points(k) {
                    if let Some(i) = p.belief.iter().position(|&x| x == 1.0) {
                        c[i] = c[i].min(p.value);
                    }
                }
                c
            })
            .collect();
        Self { corners }
    }

    fn estimate(&self, ub: &UpperBound, b: &Belief) -> f64 {
        let corner: f64 = self.corners[b.block]
            .iter()
            .zip(&b.probs)
            .map(|(c, p)| if *p > 0.0 { c * p } else { 0.0 })
            .sum();
        let delta = ub.delta();
        ub.points(b.block)
            .iter()
            .map(|p| {
                let d: f64 = p
                    .belief
                    .iter()
                    .zip(&b.probs)
                    .map(|(x, y)| (x - y).abs())
                    .sum();
                p.value + delta * d
            })
            .fold(corner, f64::min)
    }
}

/// Picks the `(a1, o)` branch with the largest positive weighted excess.
#[allow(clippy::too_many_arguments)]
pub fn select_exploration(
    game: &Game,
    b: &Belief,
    pi1_ub: &crate::game::StageStrategy1,
    pi2_lb: &crate::game::StageStrategy2,
    lb: &LowerBound,
    ub: &UpperBound,
    rho_next: f64,
) -> Result<Option<(usize, usize, Belief)>, BoundsError> {
    select_with(game, b, pi1_ub, pi2_lb, lb, ub, rho_next, None)
}

#[allow(clippy::too_many_arguments)]
fn select_with(
    game: &Game,
    b: &Belief,
    pi1_ub: &crate::game::StageStrategy1,
    pi2_lb: &crate::game::StageStrategy2,
    lb: &LowerBound,
    ub: &UpperBound,
    rho_next: f64,
    corners: Option<&CornerCache>,
) -> Result<Option<(usize, usize, Belief)>, BoundsError> {
    let mut cands = Vec::new();
    for (a1, &p) in pi1_ub.probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        for (o, w, tau) in successor_beliefs(game, b, a1, pi2_lb) {
            let weight = p * w;
            if weight <= 0.0 {
                continue;
            }
            let low = lb.value(&tau)?;
            let optimistic = match corners {
                Some(c) => weight * (c.estimate(ub, &tau) - low - rho_next),
                None => f64::INFINITY,
            };
            cands.push((a1, o, tau, weight, low, optimistic));
        }
    }
    // most promising first so the exact LPs of hopeless branches are skipped
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&i, &j| cands[j].5.total_cmp(&cands[i].5).then(i.cmp(&j)));
    let mut best: Option<(usize, f64)> = None;
    for i in order {
        let (_, _, ref tau, weight, low, optimistic) = cands[i];
        if optimistic <= 0.0 {
            break;
        }
        if let Some((bi, bs)) = best {
            if optimistic < bs || (optimistic == bs && i > bi) {
                break;
            }
        }
        let score = weight * (ub.value(tau)? - low - rho_next);
        if score <= 0.0 {
            continue;
        }
        match best {
            Some((bi, bs)) if score < bs || (score == bs && i > bi) => {}
            _ => best = Some((i, score)),
        }
    }
    Ok(best.map(|(i, _)| {
        let (a1, o, tau, ..) = cands.swap_remove(i);
        (a1, o, tau)
    }))
}

fn stage_err(b: &Belief) -> impl FnOnce(StageError) -> SolveError + '_ {
    move |source| SolveError::Stage {
        block: b.block,
        belief: b.probs.clone(),
        source,
    }
}

/// Solves both stage games at `b` and refines both bounds there.
pub fn point_update(
    game: &Game,
    b: &Belief,
    lb: &mut LowerBound,
    ub: &mut UpperBound,
) -> Result<PointUpdate, SolveError> {
    let mut timing = Timing::default();
    point_update_timed(game, b, lb, ub, &mut timing)
}

fn point_update_timed(
    game: &Game,
    b: &Belief,
    lb: &mut LowerBound,
    ub: &mut UpperBound,
    timing: &mut Timing,
) -> Result<PointUpdate, SolveError> {
    let t = Instant::now();
    let lb_stage = solve_stage_lb(game, b, lb).map_err(stage_err(b))?;
    timing.lb_lp += t.elapsed().as_secs_f64();
    let t = Instant::now();
    let ub_stage = solve_stage_ub(game, b, ub).map_err(stage_err(b))?;
    let current_ub = ub.value(b)?;
    timing.ub_lp += t.elapsed().as_secs_f64();

    let lb_inserted = lb_stage.composed_alpha.eval(b) > lb.value(b)? + UPDATE_TOL;
    if lb_inserted {
        lb.insert(lb_stage.composed_alpha.clone())?;
    }
    let ub_inserted = ub_stage.value < current_ub - UPDATE_TOL;
    if ub_inserted {
        let t = Instant::now();
        ub.insert(b, ub_stage.value)?;
        timing.prune += t.elapsed().as_secs_f64();
    }
    Ok(PointUpdate {
        lb_stage,
        ub_stage,
        lb_inserted,
        ub_inserted,
    })
}

struct Search<'a> {
    game: &'a Game,
    cfg: &'a SolverConfig,
    lb: LowerBound,
    ub: UpperBound,
    corners: CornerCache,
    gamma: f64,
    delta: f64,
    d: f64,
    start: Instant,
    updates: usize,
    timing: Timing,
    out_of_time: bool,
}

impl Search<'_> {
    fn time_up(&mut self) -> bool {
        if let Some(limit) = self.cfg.time_limit {
            if self.start.elapsed() >= limit {
                self.out_of_time = true;
            }
        }
        self.out_of_time
    }

    fn update(&mut self, b: &Belief) -> Result<PointUpdate, SolveError> {
        self.updates += 1;
        point_update_timed(self.game, b, &mut self.lb, &mut self.ub, &mut self.timing)
    }

    /// Returns the depth reached.
    fn explore(&mut self, b: &Belief, t: usize, rho_t: f64) -> Result<usize, SolveError> {
        if self.time_up() {
            return Ok(t);
        }
        let up = self.update(b)?;
        if self.cfg.max_trial_depth.is_some_and(|m| t >= m) {
            return Ok(t);
        }
        let rho_next = (rho_t - 2.0 * self.delta * self.d) / self.gamma;
        let t0 = Instant::now();
        let next = select_with(
            self.game,
            b,
            &up.ub_stage.pi1,
            &up.lb_stage.pi2,
            &self.lb,
            &self.ub,
            rho_next,
            Some(&self.corners),
        )?;
        self.timing.ub_lp += t0.elapsed().as_secs_f64();
        let Some((_, _, tau)) = next else {
            return Ok(t);
        };
        let depth = self.explore(&tau, t + 1, rho_next)?;
        if !self.out_of_time {
            self.update(b)?;
        }
        Ok(depth)
    }
}

pub fn solve(game: &Game, cfg: &SolverConfig) -> Result<SolveResult, SolveError> {
    solve_with_progress(game, cfg, &mut |_| {})
}

/// Runs the initialisation and HSVI trials until the gap at the initial
/// belief is at most `ε`, calling `progress` after every trial.
pub fn solve_with_progress(
    game: &Game,
    cfg: &SolverConfig,
    progress: &mut dyn FnMut(&ProgressRecord),
) -> Result<SolveResult, SolveError> {
    let range = utility_bounds(game);
    let (gamma, delta) = (game.gamma(), range.delta);
    if !(cfg.epsilon > 0.0) {
        return Err(SolveError::InvalidConfig("epsilon must be positive".into()));
    }
    if !(cfg.eta > 0.0 && cfg.eta <= 1.0) {
        return Err(SolveError::InvalidConfig("eta must lie in (0, 1]".into()));
    }
    if !(cfg.prune_growth > 0.0) {
        return Err(SolveError::InvalidConfig(
            "prune growth must be positive".into(),
        ));
    }
    let d = cfg
        .neighborhood
        .unwrap_or_else(|| default_neighborhood(gamma, cfg.epsilon, delta));
    if delta > 0.0 && !(d > 0.0 && d < (1.0 - gamma) * cfg.epsilon / (2.0 * delta)) {
        return Err(SolveError::InvalidConfig(format!(
            "neighborhood {d} must lie strictly inside (0, {})",
            (1.0 - gamma) * cfg.epsilon / (2.0 * delta)
        )));
    }

    let t_init = Instant::now();
    let (lb, lrep) = lb_init(game, cfg.init_beta, cfg.init_time_limit)?;
    let (ub, urep) = ub_init(game, cfg.init_beta, cfg.init_time_limit)?;
    let ub = ub.with_prune_growth(cfg.prune_growth);
    let init_secs = t_init.elapsed().as_secs_f64();

    let corners = CornerCache::new(&ub);
    let mut search = Search {
        game,
        cfg,
        lb,
        ub,
        corners,
        gamma,
        delta,
        d,
        start: Instant::now(),
        updates: 0,
        timing: Timing {
            init: init_secs,
            ..Timing::default()
        },
        out_of_time: false,
    };
    let b0 = game.initial_belief().clone();
    let mut stats = SolveStats {
        trials: 0,
        updates: 0,
        final_gap: f64::INFINITY,
        lower: 0.0,
        upper: 0.0,
        neighborhood: d,
        trial_depths: Vec::new(),
        gap_trace: Vec::new(),
        gamma_sizes: Vec::new(),
        upsilon_sizes: Vec::new(),
        init_sweeps: (lrep.sweeps(), urep.sweeps()),
        init_converged: (lrep.converged, urep.converged),
        timing: Timing::default(),
    };
    let status = loop {
        let lower = search.lb.value(&b0)?;
        let upper = search.ub.value(&b0)?;
        let gap = upper - lower;
        stats.lower = lower;
        stats.upper = upper;
        stats.final_gap = gap;
        if gap <= cfg.epsilon {
            break SolveStatus::Converged;
        }
        if search.time_up() {
            break SolveStatus::WallClockExceeded;
        }
        let rho0 = trial_rho0(gap, cfg, gamma, delta, d);
        let depth = search.explore(&b0, 0, rho0)?;
        stats.trials += 1;
        stats.trial_depths.push(depth);
        let (lower, upper) = (search.lb.value(&b0)?, search.ub.value(&b0)?);
        stats.gap_trace.push(upper - lower);
        stats.gamma_sizes.push(search.lb.size());
        stats.upsilon_sizes.push(search.ub.size());
        progress(&ProgressRecord {
            trial: stats.trials,
            depth,
            gap: upper - lower,
            lower,
            upper,
            gamma_size: search.lb.size(),
            upsilon_size: search.ub.size(),
            elapsed: search.start.elapsed().as_secs_f64() + init_secs,
        });
    };
    stats.updates = search.updates;
    stats.timing = search.timing.clone();
    stats.timing.total = init_secs + search.start.elapsed().as_secs_f64();
    Ok(SolveResult {
        lb: search.lb,
        ub: search.ub,
        stats,
        status,
    })
}
