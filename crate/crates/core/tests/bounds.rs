//! Evaluation, insertion and pruning of both bounds.

mod common;

use common::{l1, random_belief, random_lb, random_ub, range};
use osposg::bounds::{AlphaVector, LowerBound, UpperBound, UpperPoint};
use osposg::game::Belief;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn b2(p: f64) -> Belief {
    Belief::new(0, vec![p, 1.0 - p]).unwrap()
}

#[test]
fn lb_value_examples() {
    let r = range(-10.0, 10.0);
    let mut lb = LowerBound::new(vec![2], r);
    lb.insert(AlphaVector::constant(0, 2, 5.0)).unwrap();
    for p in [0.0, 0.3, 1.0] {
        assert_eq!(lb.value(&b2(p)).unwrap(), 5.0);
    }

    let mut lb = LowerBound::new(vec![2], r);
    lb.insert(AlphaVector::new(0, vec![0.0, 0.0])).unwrap();
    lb.insert(AlphaVector::new(0, vec![1.0, 1.0])).unwrap();
    assert_eq!(lb.vectors(0).len(), 1);
    assert_eq!(lb.value(&b2(0.4)).unwrap(), 1.0);

    let mut lb = LowerBound::new(vec![2], r);
    lb.insert(AlphaVector::new(0, vec![1.0, 0.0])).unwrap();
    lb.insert(AlphaVector::new(0, vec![0.0, 1.0])).unwrap();
    assert_eq!(lb.vectors(0).len(), 2);
    assert!((lb.value(&b2(0.3)).unwrap() - 0.7).abs() < 1e-12);
}

#[test]
fn ub_value_examples() {
    let r = range(-1000.0, 1000.0);
    let mut ub = UpperBound::new(vec![2], r);
    ub.push(0, UpperPoint { belief: vec![1.0, 0.0], value: 0.0 }).unwrap();
    ub.push(0, UpperPoint { belief: vec![0.0, 1.0], value: 2.0 }).unwrap();
    assert!((ub.value(&b2(0.5)).unwrap() - 1.0).abs() < 1e-7);

    let r = range(-1.0, 1.0);
    let mut ub = UpperBound::new(vec![2], r);
    ub.push(0, UpperPoint { belief: vec![1.0, 0.0], value: 0.0 }).unwrap();
    assert!((ub.value(&b2(0.0)).unwrap() - 2.0).abs() < 1e-7);

    let mut ub = UpperBound::new(vec![2], r);
    ub.push(0, UpperPoint { belief: vec![0.3, 0.7], value: 0.25 }).unwrap();
    assert!((ub.value(&b2(0.3)).unwrap() - 0.25).abs() < 1e-9);
}

#[test]
fn ub_insert_examples() {
    let r = range(0.0, 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ub = random_ub(&mut rng, 3, r, 6);
    let probes: Vec<Belief> = (0..50).map(|_| random_belief(&mut rng, 0, 3)).collect();
    let before: Vec<f64> = probes.iter().map(|b| ub.value(b).unwrap()).collect();

    let dup = ub.points(0)[2].clone();
    ub.insert(&Belief::new(0, dup.belief.clone()).unwrap(), dup.value).unwrap();
    for (b, v) in probes.iter().zip(&before) {
        assert!((ub.value(b).unwrap() - v).abs() <= 1e-6);
    }

    let b = &probes[0];
    let old = ub.value(b).unwrap();
    ub.insert(b, old - 1.0).unwrap();
    let new = ub.value(b).unwrap();
    assert!(new <= old + 1e-9 && new >= old - 1.0 - 1e-6);
}

#[test]
fn prune_examples() {
    let r = range(0.0, 100.0);
    let mut ub = UpperBound::new(vec![2], r);
    ub.push(0, UpperPoint { belief: vec![0.5, 0.5], value: 7.0 }).unwrap();
    assert_eq!(ub.prune().unwrap(), 0);
    assert_eq!(ub.points(0).len(), 1);

    ub.push(0, UpperPoint { belief: vec![1.0, 0.0], value: 0.0 }).unwrap();
    ub.push(0, UpperPoint { belief: vec![0.0, 1.0], value: 0.0 }).unwrap();
    assert_eq!(ub.prune().unwrap(), 1);
    assert!(ub.points(0).iter().all(|p| p.value == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ub_is_delta_lipschitz(seed in any::<u64>(), n in 1usize..=4, k in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = range(-rng.gen_range(0.0..50.0), rng.gen_range(0.0..50.0));
        let ub = random_ub(&mut rng, n, r, k);
        for _ in 0..20 {
            let (x, y) = (random_belief(&mut rng, 0, n), random_belief(&mut rng, 0, n));
            let diff = (ub.value(&x).unwrap() - ub.value(&y).unwrap()).abs();
            prop_assert!(diff <= r.delta * l1(&x, &y) + 1e-6, "{diff} vs {}", r.delta * l1(&x, &y));
        }
    }

    #[test]
    fn lb_insert_never_decreases(seed in any::<u64>(), n in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = range(-5.0, 5.0);
        let mut lb = random_lb(&mut rng, n, r, 20);
        let probes: Vec<Belief> = (0..100).map(|_| random_belief(&mut rng, 0, n)).collect();
        let before: Vec<f64> = probes.iter().map(|b| lb.value(b).unwrap()).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..=5.0)).collect();
        lb.insert(AlphaVector::new(0, v)).unwrap();
        for (b, old) in probes.iter().zip(&before) {
            prop_assert!(lb.value(b).unwrap() >= old - 1e-12);
        }
        // the new vector is kept and nothing it weakly dominates survives
        let set = lb.vectors(0);
        let new = set.last().unwrap();
        for a in &set[..set.len() - 1] {
            prop_assert!(a.values.iter().zip(&new.values).any(|(x, y)| x > y));
        }
    }

    #[test]
    fn ub_insert_never_increases(seed in any::<u64>(), n in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = range(0.0, 10.0);
        let mut ub = random_ub(&mut rng, n, r, 6);
        let probes: Vec<Belief> = (0..100).map(|_| random_belief(&mut rng, 0, n)).collect();
        let before: Vec<f64> = probes.iter().map(|b| ub.value(b).unwrap()).collect();
        let b = random_belief(&mut rng, 0, n);
        ub.insert(&b, rng.gen_range(0.0..=10.0)).unwrap();
        for (b, old) in probes.iter().zip(&before) {
            prop_assert!(ub.value(b).unwrap() <= old + 1e-6);
        }
    }

    #[test]
    fn pruning_preserves_values(seed in any::<u64>(), n in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = range(0.0, 10.0);
        let mut ub = random_ub(&mut rng, n, r, 12);
        let probes: Vec<Belief> = (0..100).map(|_| random_belief(&mut rng, 0, n)).collect();
        let before: Vec<f64> = probes.iter().map(|b| ub.value(b).unwrap()).collect();
        ub.prune().unwrap();
        for (b, old) in probes.iter().zip(&before) {
            prop_assert!((ub.value(b).unwrap() - old).abs() <= 1e-6);
        }
    }
}

#[test]
fn cross_block_evaluation_is_an_error() {
    let r = range(0.0, 1.0);
    let lb = LowerBound::new(vec![2, 3], r);
    assert!(lb.value(&Belief::uniform(0, 2)).is_err());
    assert!(lb.value(&Belief::uniform(1, 2)).is_err());
    let ub = UpperBound::new(vec![2], r);
    assert!(ub.value(&Belief::uniform(4, 2)).is_err());
}
