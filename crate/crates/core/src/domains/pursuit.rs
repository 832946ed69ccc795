//! Pursuit-evasion on a grid.
//!
//! `K` pursuers (player 1) start in the top-left cell, the evader (player 2)
//! in the bottom-right one. All units move simultaneously one cell left,
//! right, up or down, so every unit changes cell each step: a move that
//! would leave the grid goes the opposite way instead (a unit stays only
//! when neither neighbour exists on that axis). The
//! pursuers always know their own positions but never see the evader. When a
//! pursuer ends a move on the evader's cell the pursuers receive 100 and the
//! game ends.

use super::{build, check_gamma, DomainError, Next, Spec, Step};
use crate::game::Game;

const MOVES: [(&str, i32, i32); 4] = [
    ("left", 0, -1),
    ("right", 0, 1),
    ("up", -1, 0),
    ("down", 1, 0),
];
const CAPTURE_REWARD: f64 = 100.0;

type Cell = (u8, u8);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Pos {
    pursuers: Vec<Cell>,
    evader: Cell,
}

pub fn gen_pursuit(
    rows: usize,
    cols: usize,
    pursuers: usize,
    gamma: f64,
) -> Result<Game, DomainError> {
    check_gamma(gamma)?;
    if rows < 1 || cols < 1 || rows * cols < 2 || rows > 16 || cols > 16 {
        return Err(DomainError::InvalidParameter(format!(
            "grid {rows}x{cols} must have at least two cells and sides of at most 16"
        )));
    }
    if !(1..=4).contains(&pursuers) {
        return Err(DomainError::InvalidParameter(format!(
            "between 1 and 4 pursuers supported, got {pursuers}"
        )));
    }
    let step_cell = |c: Cell, m: usize| -> Cell {
        let r = c.0 as i32 + MOVES[m].1;
        let k = c.1 as i32 + MOVES[m].2;
        if r >= 0 && k >= 0 && r < rows as i32 && k < cols as i32 {
            (r as u8, k as u8)
        } else {
            let r = c.0 as i32 - MOVES[m].1;
            let k = c.1 as i32 - MOVES[m].2;
            if r >= 0 && k >= 0 && r < rows as i32 && k < cols as i32 {
                (r as u8, k as u8)
            } else {
                c
            }
        }
    };
    let n_joint = 4usize.pow(pursuers as u32);
    let joint_moves = move |a1: usize| -> Vec<usize> {
        (0..pursuers)
            .map(|k| (a1 / 4usize.pow(k as u32)) % 4)
            .collect()
    };
    let actions1 = (0..n_joint)
        .map(|a| {
            joint_moves(a)
                .iter()
                .map(|&m| MOVES[m].0)
                .collect::<Vec<_>>()
                .join("+")
        })
        .collect();
    let spec = Spec {
        actions1,
        actions2: MOVES.iter().map(|m| m.0.to_string()).collect(),
        observations: vec!["none".into(), "captured".into()],
        gamma,
        terminal_name: "captured",
        terminal_obs: 1,
    };
    let init = Pos {
        pursuers: vec![(0, 0); pursuers],
        evader: ((rows - 1) as u8, (cols - 1) as u8),
    };
    build(
        spec,
        init,
        |s, a1, a2| {
            let moves = joint_moves(a1);
            let ps: Vec<Cell> = s
                .pursuers
                .iter()
                .zip(&moves)
                .map(|(&c, &m)| step_cell(c, m))
                .collect();
            let e = step_cell(s.evader, a2);
            if ps.contains(&e) {
                Step::det(CAPTURE_REWARD, 1, Next::Terminal)
            } else {
                Step::det(
                    0.0,
                    0,
                    Next::State(Pos {
                        pursuers: ps,
                        evader: e,
                    }),
                )
            }
        },
        |s| {
            let ps: Vec<String> = s
                .pursuers
                .iter()
                .map(|c| format!("{}{}", c.0, c.1))
                .collect();
            format!("p{}_e{}{}", ps.join("-"), s.evader.0, s.evader.1)
        },
        |s| {
            let ps: Vec<String> = s
                .pursuers
                .iter()
                .map(|c| format!("{}{}", c.0, c.1))
                .collect();
            (s.pursuers.clone(), format!("p{}", ps.join("-")))
        },
    )
}
