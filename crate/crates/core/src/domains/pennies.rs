//! Matching pennies played as a two-stage game.
//!
//! Player 2 places a coin in the first stage (player 1's action is ignored
//! there), player 1 guesses it in the second. A correct guess pays `1/γ`, a
//! wrong one `-1/γ`, so the discounted payoff is ±1.

use super::{build, check_gamma, DomainError, Next, Spec, Step};
use crate::game::Game;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Coin {
    Start,
    Heads,
    Tails,
}

pub fn gen_matching_pennies(gamma: f64) -> Result<Game, DomainError> {
    check_gamma(gamma)?;
    let hit = 1.0 / gamma;
    let spec = Spec {
        actions1: vec!["H".into(), "T".into()],
        actions2: vec!["H".into(), "T".into()],
        observations: vec!["none".into()],
        gamma,
        terminal_name: "s_inf",
        terminal_obs: 0,
    };
    build(
        spec,
        Coin::Start,
        |s, a1, a2| match s {
            Coin::Start => {
                let next = if a2 == 0 { Coin::Heads } else { Coin::Tails };
                Step::det(0.0, 0, Next::State(next))
            }
            Coin::Heads => Step::det(if a1 == 0 { hit } else { -hit }, 0, Next::Terminal),
            Coin::Tails => Step::det(if a1 == 1 { hit } else { -hit }, 0, Next::Terminal),
        },
        |s| match s {
            Coin::Start => "s0".into(),
            Coin::Heads => "sH".into(),
            Coin::Tails => "sT".into(),
        },
        |s| match s {
            Coin::Start => (0, "place".into()),
            _ => (1, "guess".into()),
        },
    )
}
