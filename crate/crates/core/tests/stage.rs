//! Stage games of both bounds, value composition and resolving.

mod common;

use common::{random_belief, random_lb_for, random_probs, sup_distance};
use osposg::bounds::{AlphaVector, LowerBound, UpperBound};
use osposg::domains::gen_matching_pennies;
use osposg::game::{
    utility_bounds, validate_game, Belief, Game, Outcome, RawGame, StageStrategy1,
};
use osposg::init::{lb_init, ub_init};
use osposg::oracle::{random_tiny_game, TinyGameSpec};
use osposg::stage::{
    resolve_gadget, solve_stage_lb, solve_stage_lb_dual, solve_stage_ub, valcomp, Continuations,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn block_sizes(game: &Game) -> Vec<usize> {
    (0..game.partition().num_blocks())
        .map(|k| game.block_states(k).len())
        .collect()
}

fn state(game: &Game, name: &str) -> usize {
    game.state_names().iter().position(|s| s == name).unwrap()
}

/// One state, one action per side, self-loop with reward `r`.
fn self_loop(r: f64, gamma: f64) -> Game {
    let mut raw = RawGame::new(
        vec!["s".into()],
        vec!["a".into()],
        vec!["b".into()],
        vec!["o".into()],
        gamma,
    );
    raw.set_transition(0, 0, 0, vec![Outcome { obs: 0, next: 0, prob: 1.0 }]);
    raw.set_reward(0, 0, 0, r);
    raw.initial_belief = vec![1.0];
    validate_game(raw).unwrap()
}

fn tiny(seed: u64, states: usize) -> Game {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let spec = TinyGameSpec {
        states,
        actions1: rng.gen_range(1..=3),
        actions2: rng.gen_range(1..=3),
        observations: rng.gen_range(1..=3),
        gamma: rng.gen_range(0.5..0.95),
    };
    random_tiny_game(spec, seed).unwrap()
}

#[test]
fn degenerate_game_stage_values() {
    let g = self_loop(2.0, 0.5);
    // wider than the game's own (degenerate) range so v and y can differ
    let r = common::range(0.0, 10.0);
    let mut lb = LowerBound::new(vec![1], r);
    lb.insert(AlphaVector::new(0, vec![4.0])).unwrap();
    let b = g.initial_belief();
    let s = solve_stage_lb(&g, b, &lb).unwrap();
    assert!((s.value - (2.0 + 0.5 * 4.0)).abs() < 1e-7);
    assert_eq!(s.pi1.probs, vec![1.0]);
    assert_eq!(s.pi2.rows, vec![vec![1.0]]);

    let mut ub = UpperBound::new(vec![1], r);
    ub.insert(b, 3.0).unwrap();
    let u = solve_stage_ub(&g, b, &ub).unwrap();
    assert!((u.value - (2.0 + 0.5 * 3.0)).abs() < 1e-7);
}

#[test]
fn pennies_second_stage_composition_is_zero() {
    let g = gen_matching_pennies(0.9).unwrap();
    let part = g.partition();
    let guess = part.block_of(state(&g, "sH"));
    let end = part.block_of(state(&g, "s_inf"));
    let mut c = Continuations::new(2, 1);
    for a1 in 0..2 {
        c.set(a1, 0, AlphaVector::new(end, vec![0.0]));
    }
    let a = valcomp(&g, &StageStrategy1::uniform(2), &c, guess).unwrap();
    for v in a.values {
        assert!(v.abs() < 1e-12);
    }
}

#[test]
fn pennies_resolving_with_zero_gadget_is_uniform() {
    let g = gen_matching_pennies(0.9).unwrap();
    let part = g.partition();
    let guess = part.block_of(state(&g, "sH"));
    let end = part.block_of(state(&g, "s_inf"));
    let mut lb = LowerBound::new(block_sizes(&g), utility_bounds(&g));
    lb.insert(AlphaVector::new(end, vec![0.0])).unwrap();
    let b = Belief::uniform(guess, 2);
    let rho = AlphaVector::new(guess, vec![0.0, 0.0]);
    let (pi1, conts) = resolve_gadget(&g, &b, &rho, &lb).unwrap();
    for p in &pi1.probs {
        assert!((p - 0.5).abs() < 1e-4, "{:?}", pi1.probs);
    }
    let comp = valcomp(&g, &pi1, &conts, guess).unwrap();
    assert!(comp.values.iter().all(|&v| v >= -1e-6));
    // on a grid of pi1 only the uniform mixture keeps both states at 0
    for i in 0..=100 {
        let p = i as f64 / 100.0;
        let hit = 1.0 / 0.9;
        let (vh, vt) = (p * hit - (1.0 - p) * hit, (1.0 - p) * hit - p * hit);
        assert_eq!(vh >= -1e-12 && vt >= -1e-12, i == 50);
    }
}

#[test]
fn resolving_examples_on_random_games() {
    for seed in 0..20 {
        let g = tiny(seed, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lb = random_lb_for(&g, &mut rng, 4);
        let b = random_belief(&mut rng, 0, 3);
        let s = solve_stage_lb(&g, &b, &lb).unwrap();
        // own certificate is feasible and keeps the value
        let (pi1, conts) = resolve_gadget(&g, &b, &s.composed_alpha, &lb).unwrap();
        let comp = valcomp(&g, &pi1, &conts, 0).unwrap();
        for (c, r) in comp.values.iter().zip(&s.composed_alpha.values) {
            assert!(c >= &(r - 1e-6));
        }
        assert!(comp.eval(&b) >= s.composed_alpha.eval(&b) - 1e-6);
        // a vacuous gadget reaches the unconstrained value
        let low = AlphaVector::constant(0, 3, utility_bounds(&g).lower);
        let (pi1, conts) = resolve_gadget(&g, &b, &low, &lb).unwrap();
        let comp = valcomp(&g, &pi1, &conts, 0).unwrap();
        assert!((comp.eval(&b) - s.value).abs() <= 1e-6 * (1.0 + s.value.abs()));
    }
}

/// Eq.-style brute force of the composition: min over a2 per state.
fn valcomp_direct(g: &Game, pi1: &[f64], alphas: &[Vec<Vec<f64>>]) -> Vec<f64> {
    (0..g.num_states())
        .map(|s| {
            (0..g.num_actions2())
                .map(|a2| {
                    let mut v = 0.0;
                    for (a1, &p) in pi1.iter().enumerate() {
                        let mut cont = 0.0;
                        for out in g.outcomes(s, a1, a2) {
                            cont += out.prob * alphas[a1][out.obs][out.next];
                        }
                        v += p * (g.reward(s, a1, a2) + g.gamma() * cont);
                    }
                    v
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn valcomp_matches_direct_sum_and_range(seed in any::<u64>(), n in 1usize..=3) {
        let g = tiny(seed, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = utility_bounds(&g);
        let pi1 = random_probs(&mut rng, g.num_actions1());
        let mut conts = Continuations::new(g.num_actions1(), g.num_observations());
        let mut raw = vec![vec![vec![0.0; n]; g.num_observations()]; g.num_actions1()];
        for (a1, per_o) in raw.iter_mut().enumerate() {
            for (o, v) in per_o.iter_mut().enumerate() {
                *v = (0..n).map(|_| rng.gen_range(r.lower..=r.upper)).collect();
                conts.set(a1, o, AlphaVector::new(0, v.clone()));
            }
        }
        let a = valcomp(&g, &StageStrategy1 { probs: pi1.clone() }, &conts, 0).unwrap();
        let want = valcomp_direct(&g, &pi1, &raw);
        for (x, y) in a.values.iter().zip(&want) {
            prop_assert!((x - y).abs() <= 1e-9);
            prop_assert!(*x >= r.lower - 1e-9 && *x <= r.upper + 1e-9);
        }
    }

    #[test]
    fn lb_stage_strong_duality_and_valid_strategies(seed in any::<u64>(), n in 1usize..=3) {
        let g = tiny(seed, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lb = random_lb_for(&g, &mut rng, 3);
        let b = random_belief(&mut rng, 0, n);
        let s = solve_stage_lb(&g, &b, &lb).unwrap();
        let d = solve_stage_lb_dual(&g, &b, &lb).unwrap();
        prop_assert!((s.value - d.value).abs() <= 1e-6 * (1.0 + s.value.abs()),
            "primal {} dual {}", s.value, d.value);
        prop_assert!((s.composed_alpha.eval(&b) - s.value).abs() <= 1e-6 * (1.0 + s.value.abs()));
        prop_assert!(s.pi1.is_valid(1e-6));
        prop_assert!(s.pi2.is_valid(1e-6));
    }

    #[test]
    fn ub_stage_is_in_range_and_above_lb_stage(seed in any::<u64>(), n in 1usize..=3) {
        let g = tiny(seed, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lb, _) = lb_init(&g, 1e-6, None).unwrap();
        let (ub, _) = ub_init(&g, 1e-6, None).unwrap();
        let r = utility_bounds(&g);
        for _ in 0..5 {
            let b = random_belief(&mut rng, 0, n);
            let u = solve_stage_ub(&g, &b, &ub).unwrap();
            let l = solve_stage_lb(&g, &b, &lb).unwrap();
            prop_assert!(u.value >= r.lower - 1e-6 && u.value <= r.upper + 1e-6);
            prop_assert!(u.value >= l.value - 1e-6, "ub {} lb {}", u.value, l.value);
            prop_assert!(u.pi1.is_valid(1e-6));
            prop_assert!(u.pi2.is_valid(1e-6));
        }
    }

    #[test]
    fn bellman_operator_is_monotone(seed in any::<u64>(), n in 1usize..=3) {
        let g = tiny(seed, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let small = random_lb_for(&g, &mut rng, 2);
        // adding vectors can only raise the PWLC function
        let mut large = small.clone();
        for _ in 0..2 {
            let r = utility_bounds(&g);
            let v = (0..n).map(|_| rng.gen_range(r.lower..=r.upper)).collect();
            large.insert(AlphaVector::new(0, v)).unwrap();
        }
        for _ in 0..5 {
            let b = random_belief(&mut rng, 0, n);
            let x = solve_stage_lb(&g, &b, &small).unwrap().value;
            let y = solve_stage_lb(&g, &b, &large).unwrap().value;
            prop_assert!(x <= y + 1e-6, "{x} > {y}");
        }
    }

    #[test]
    fn bellman_operator_contracts(seed in any::<u64>(), n in 1usize..=3) {
        let g = tiny(seed, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v1 = random_lb_for(&g, &mut rng, 3);
        let v2 = random_lb_for(&g, &mut rng, 3);
        let sup = sup_distance(&v1, &v2, n);
        for _ in 0..10 {
            let b = random_belief(&mut rng, 0, n);
            let h1 = solve_stage_lb(&g, &b, &v1).unwrap().value;
            let h2 = solve_stage_lb(&g, &b, &v2).unwrap().value;
            prop_assert!((h1 - h2).abs() <= g.gamma() * sup + 1e-5);
        }
    }
}
