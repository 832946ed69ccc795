//! Intrusion search game.
//!
//! The attacker (player 2) starts at node `A` and tries to reach the target
//! `T` through two checkpoint zones of `width` nodes each. From `A` every
//! node of the first zone is reachable; node `i` of the first zone leads to
//! nodes `i-1..=i+1` of the second; every node of the second zone leads to
//! `T`. Each turn the attacker either waits or advances to node `j` of the
//! next layer (an impossible move means waiting). Defender units (player 1)
//! patrol their own zone, moving one node left, right or staying. A unit
//! ending its move on the attacker's node catches the attacker and the game ends
//! with reward 0; reaching `T` costs the defender 100. The defender only
//! sees its own units.

use super::{build, check_gamma, DomainError, Next, Spec, Step};
use crate::game::Game;

const UNIT_MOVES: [(&str, i32); 3] = [("left", -1), ("stay", 0), ("right", 1)];
const BREACH_REWARD: f64 = -100.0;

/// Number of defender units in the first and second zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchConfig {
    OneOne,
    TwoOne,
}

impl SearchConfig {
    fn units(self) -> (usize, usize) {
        match self {
            SearchConfig::OneOne => (1, 1),
            SearchConfig::TwoOne => (2, 1),
        }
    }
}

impl std::str::FromStr for SearchConfig {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1-1" => Ok(SearchConfig::OneOne),
            "2-1" => Ok(SearchConfig::TwoOne),
            _ => Err(DomainError::InvalidParameter(format!(
                "unknown search configuration {s:?}, expected 1-1 or 2-1"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Attacker {
    Start,
    Zone1(u8),
    Zone2(u8),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Pos {
    attacker: Attacker,
    /// Units of the first zone followed by units of the second.
    units: Vec<u8>,
}

fn spread(count: usize, width: usize) -> Vec<u8> {
    if count == 1 {
        vec![(width / 2) as u8]
    } else {
        (0..count)
            .map(|k| (k * (width - 1) / (count - 1)) as u8)
            .collect()
    }
}

pub fn gen_search(width: usize, config: SearchConfig, gamma: f64) -> Result<Game, DomainError> {
    check_gamma(gamma)?;
    if !(2..=16).contains(&width) {
        return Err(DomainError::InvalidParameter(format!(
            "zone width must lie in 2..=16, got {width}"
        )));
    }
    let (z1, z2) = config.units();
    let n_units = z1 + z2;
    let n_joint = 3usize.pow(n_units as u32);
    let unit_moves = move |a1: usize| -> Vec<usize> {
        (0..n_units)
            .map(|k| (a1 / 3usize.pow(k as u32)) % 3)
            .collect()
    };
    let actions1 = (0..n_joint)
        .map(|a| {
            unit_moves(a)
                .iter()
                .map(|&m| UNIT_MOVES[m].0)
                .collect::<Vec<_>>()
                .join("+")
        })
        .collect();
    let mut actions2 = vec!["wait".to_string()];
    actions2.extend((0..width).map(|j| format!("move{j}")));
    let spec = Spec {
        actions1,
        actions2,
        observations: vec!["none".into(), "end".into()],
        gamma,
        terminal_name: "end",
        terminal_obs: 1,
    };
    let mut units = spread(z1, width);
    units.extend(spread(z2, width));
    let init = Pos {
        attacker: Attacker::Start,
        units,
    };
    let w = width as i32;
    build(
        spec,
        init,
        |s, a1, a2| {
            let moves = unit_moves(a1);
            let units: Vec<u8> = s
                .units
                .iter()
                .zip(&moves)
                .map(|(&u, &m)| (u as i32 + UNIT_MOVES[m].1).clamp(0, w - 1) as u8)
                .collect();
            let target = a2.checked_sub(1);
            let attacker = match (s.attacker, target) {
                (a, None) => a,
                (Attacker::Start, Some(j)) => Attacker::Zone1(j as u8),
                (Attacker::Zone1(i), Some(j)) if (i as i32 - j as i32).abs() <= 1 => {
                    Attacker::Zone2(j as u8)
                }
                (Attacker::Zone1(i), Some(_)) => Attacker::Zone1(i),
                (Attacker::Zone2(_), Some(_)) => {
                    return Step::det(BREACH_REWARD, 1, Next::Terminal)
                }
            };
            let caught = match attacker {
                Attacker::Start => false,
                Attacker::Zone1(i) => units[..z1].contains(&i),
                Attacker::Zone2(i) => units[z1..].contains(&i),
            };
            if caught {
                Step::det(0.0, 1, Next::Terminal)
            } else {
                Step::det(0.0, 0, Next::State(Pos { attacker, units }))
            }
        },
        |s| {
            let a = match s.attacker {
                Attacker::Start => "A".to_string(),
                Attacker::Zone1(i) => format!("z1_{i}"),
                Attacker::Zone2(i) => format!("z2_{i}"),
            };
            let u: Vec<String> = s.units.iter().map(|u| u.to_string()).collect();
            format!("{a}_d{}", u.join("-"))
        },
        |s| {
            let u: Vec<String> = s.units.iter().map(|u| u.to_string()).collect();
            (s.units.clone(), format!("d{}", u.join("-")))
        },
    )
}
