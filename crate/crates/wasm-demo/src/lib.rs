//! Browser bindings: generate a benchmark game, solve it, then simulate the
//! extracted strategies. Results cross the boundary as JSON strings.

use std::time::Duration;

use osposg::bounds::{LowerBound, UpperBound};
use osposg::domains::{
    gen_matching_pennies, gen_patrolling, gen_pursuit, gen_search, PatrollingParams, SearchConfig,
};
use osposg::game::{utility_bounds, Game};
use osposg::hsvi::{solve, SolverConfig};
use osposg::play::{default_horizon, simulate, Player1, Player2, SimulationConfig};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Generator parameters; fields a family does not use are ignored.
#[derive(Debug, Deserialize)]
#[serde(default)]
struct Params {
    gamma: f64,
    rows: usize,
    cols: usize,
    pursuers: usize,
    width: usize,
    two_one: bool,
    vertices: usize,
    p: f64,
    attack_time: usize,
    seed: u64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            rows: 3,
            cols: 3,
            pursuers: 2,
            width: 3,
            two_one: false,
            vertices: 7,
            p: 0.25,
            attack_time: 3,
            seed: 1,
        }
    }
}

#[derive(Serialize)]
struct Summary {
    states: usize,
    actions1: usize,
    actions2: usize,
    observations: usize,
    transitions: usize,
    gamma: f64,
    lower: f64,
    upper: f64,
}

#[derive(Serialize)]
struct SolveSummary {
    converged: bool,
    lower: f64,
    upper: f64,
    gap: f64,
    trials: usize,
    gamma_size: usize,
    upsilon_size: usize,
    seconds: f64,
    gap_trace: Vec<f64>,
}

#[derive(Serialize)]
struct Step {
    state: String,
    a1: String,
    a2: String,
    obs: String,
}

#[derive(Serialize)]
struct PlaySummary {
    episodes: usize,
    horizon: usize,
    mean: f64,
    std_error: f64,
    truncation: f64,
    lower: f64,
    upper: f64,
    /// First episode, by name.
    sample: Vec<Step>,
}

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn json(value: &impl Serialize) -> String {
    serde_json::to_string(value).expect("summary serialises")
}

#[wasm_bindgen]
pub struct Demo {
    game: Game,
    bounds: Option<(LowerBound, UpperBound)>,
}

#[wasm_bindgen]
impl Demo {
    /// Builds a `pursuit`, `search`, `patrolling` or `pennies` game from a
    /// JSON parameter object.
    #[wasm_bindgen(constructor)]
    pub fn new(family: &str, params: &str) -> Result<Demo, JsError> {
        let p: Params = serde_json::from_str(params).map_err(js)?;
        let game = match family {
            "pursuit" => gen_pursuit(p.rows, p.cols, p.pursuers, p.gamma),
            "search" => {
                let config = if p.two_one {
                    SearchConfig::TwoOne
                } else {
                    SearchConfig::OneOne
                };
                gen_search(p.width, config, p.gamma)
            }
            "patrolling" => gen_patrolling(&PatrollingParams {
                vertices: p.vertices,
                edge_prob: p.p,
                attack_time: p.attack_time,
                costs: None,
                gamma: p.gamma,
                seed: p.seed,
            }),
            "pennies" => gen_matching_pennies(p.gamma),
            other => return Err(JsError::new(&format!("unknown family {other:?}"))),
        }
        .map_err(js)?;
        Ok(Demo { game, bounds: None })
    }

    /// Size and value range of the game.
    pub fn summary(&self) -> String {
        let g = &self.game;
        let range = utility_bounds(g);
        json(&Summary {
            states: g.num_states(),
            actions1: g.num_actions1(),
            actions2: g.num_actions2(),
            observations: g.num_observations(),
            transitions: g.num_transitions(),
            gamma: g.gamma(),
            lower: range.lower,
            upper: range.upper,
        })
    }

    /// Runs the solver for at most `seconds` (initialisation included) and
    /// keeps the bounds for `play`.
    pub fn solve(&mut self, epsilon: f64, seconds: f64) -> Result<String, JsError> {
        let budget = Duration::try_from_secs_f64(seconds).map_err(js)?;
        let cfg = SolverConfig {
            epsilon,
            time_limit: Some(budget),
            init_time_limit: Some(budget / 4),
            ..SolverConfig::default()
        };
        let r = solve(&self.game, &cfg).map_err(js)?;
        let s = &r.stats;
        let out = json(&SolveSummary {
            converged: s.final_gap <= epsilon,
            lower: s.lower,
            upper: s.upper,
            gap: s.final_gap,
            trials: s.trials,
            gamma_size: r.lb.size(),
            upsilon_size: r.ub.size(),
            seconds: s.timing.total,
            gap_trace: s.gap_trace.clone(),
        });
        self.bounds = Some((r.lb, r.ub));
        Ok(out)
    }

    /// Simulates `selfplay`, `p1-vs-uniform` or `uniform-vs-p2` with the
    /// strategies of the last `solve`.
    pub fn play(&self, mode: &str, episodes: usize, seed: u32) -> Result<String, JsError> {
        let Some((lb, ub)) = &self.bounds else {
            return Err(JsError::new("solve the game first"));
        };
        let (p1, p2) = match mode {
            "selfplay" => (Player1::Resolving(lb), Player2::Replay(ub)),
            "p1-vs-uniform" => (Player1::Resolving(lb), Player2::Uniform),
            "uniform-vs-p2" => (Player1::Uniform, Player2::Replay(ub)),
            other => return Err(JsError::new(&format!("unknown mode {other:?}"))),
        };
        let g = &self.game;
        let cfg = SimulationConfig {
            horizon: default_horizon(g),
            episodes,
            seed: seed.into(),
            keep_trajectories: true,
        };
        let r = simulate(g, p1, p2, &cfg).map_err(js)?;
        let sample = r.results[0]
            .trajectory
            .iter()
            .flatten()
            .map(|t| Step {
                state: g.state_names()[t.state].clone(),
                a1: g.action1_names()[t.a1].clone(),
                a2: g.action2_names()[t.a2].clone(),
                obs: g.observation_names()[t.obs].clone(),
            })
            .collect();
        let b0 = g.initial_belief();
        Ok(json(&PlaySummary {
            episodes: r.episodes,
            horizon: r.horizon,
            mean: r.mean,
            std_error: r.std_error,
            truncation: r.truncation,
            lower: lb.value(b0).map_err(js)?,
            upper: ub.value(b0).map_err(js)?,
            sample,
        }))
    }
}
