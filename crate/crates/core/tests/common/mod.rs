//! Random beliefs and bounds shared by the integration tests.
#![allow(dead_code)]

use osposg::bounds::{AlphaVector, LowerBound, UpperBound, UpperPoint};
use osposg::game::{utility_bounds, Belief, Game, UtilityBounds};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn range(lower: f64, upper: f64) -> UtilityBounds {
    UtilityBounds {
        lower,
        upper,
        delta: (upper - lower) / 2.0,
    }
}

/// Random point of the simplex: uniform (normalised exponentials), with a
/// chance of a vertex or a face.
pub fn random_probs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    match rng.gen_range(0..10) {
        0 => {
            let mut v = vec![0.0; n];
            v[rng.gen_range(0..n)] = 1.0;
            v
        }
        1 if n > 1 => {
            let mut v: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
            v[rng.gen_range(0..n)] = 0.0;
            let z: f64 = v.iter().sum();
            v.iter().map(|x| x / z).collect()
        }
        _ => {
            let v: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
            let z: f64 = v.iter().sum();
            v.iter().map(|x| x / z).collect()
        }
    }
}

pub fn random_belief(rng: &mut ChaCha8Rng, block: usize, n: usize) -> Belief {
    Belief::new(block, random_probs(rng, n)).unwrap()
}

pub fn random_lb(rng: &mut ChaCha8Rng, n: usize, r: UtilityBounds, k: usize) -> LowerBound {
    let mut lb = LowerBound::new(vec![n], r);
    for _ in 0..k {
        let v = (0..n).map(|_| rng.gen_range(r.lower..=r.upper)).collect();
        lb.insert(AlphaVector::new(0, v)).unwrap();
    }
    lb
}

/// Upper bound with `k` random points, appended without pruning.
pub fn random_ub(rng: &mut ChaCha8Rng, n: usize, r: UtilityBounds, k: usize) -> UpperBound {
    let mut ub = UpperBound::new(vec![n], r);
    for _ in 0..k {
        let point = UpperPoint {
            belief: random_probs(rng, n),
            value: rng.gen_range(r.lower..=r.upper),
        };
        ub.push(0, point).unwrap();
    }
    ub
}

pub fn l1(a: &Belief, b: &Belief) -> f64 {
    a.probs.iter().zip(&b.probs).map(|(x, y)| (x - y).abs()).sum()
}

/// Lower bound over a single-block game with `k` random vectors.
pub fn random_lb_for(game: &Game, rng: &mut ChaCha8Rng, k: usize) -> LowerBound {
    random_lb(rng, game.num_states(), utility_bounds(game), k)
}

/// All beliefs of an `n`-simplex on a regular grid with `steps` divisions.
pub fn grid(n: usize, steps: usize) -> Vec<Belief> {
    fn rec(n: usize, left: usize, steps: usize, cur: &mut Vec<usize>, out: &mut Vec<Belief>) {
        if cur.len() == n - 1 {
            let mut p: Vec<f64> = cur.iter().map(|&c| c as f64 / steps as f64).collect();
            p.push(left as f64 / steps as f64);
            out.push(Belief::new(0, p).unwrap());
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(n, left - c, steps, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, steps, steps, &mut Vec::new(), &mut out);
    out
}

/// Solves the square system `a x = r` by Gauss-Jordan elimination with
/// partial pivoting; `None` when it is singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, p);
        r.swap(c, p);
        for i in (0..n).filter(|&i| i != c) {
            let f = a[i][c] / a[c][c];
            for k in 0..n {
                a[i][k] -= f * a[c][k];
            }
            r[i] -= f * r[c];
        }
    }
    Some((0..n).map(|i| r[i] / a[i][i]).collect())
}

/// Sup distance of two single-block lower bounds over simplices of up to
/// three states. The difference is linear on every cell of the arrangement
/// cut by the pairwise vector differences and the simplex facets, so its
/// maximum sits on a vertex of that arrangement; the grid is added as well.
pub fn sup_distance(v1: &LowerBound, v2: &LowerBound, n: usize) -> f64 {
    assert!((1..=3).contains(&n), "arrangement enumeration handles up to three states");
    let mut planes: Vec<Vec<f64>> = (0..n)
        .map(|k| (0..n).map(|i| if i == k { 1.0 } else { 0.0 }).collect())
        .collect();
    let all: Vec<&[f64]> = v1
        .vectors(0)
        .iter()
        .chain(v2.vectors(0))
        .map(|a| a.values.as_slice())
        .collect();
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            planes.push(all[i].iter().zip(all[j]).map(|(x, y)| x - y).collect());
        }
    }
    let mut candidates = grid(n, 50);
    let mut push = |b: Vec<f64>| {
        if b.iter().all(|&x| x >= -1e-12) {
            let b: Vec<f64> = b.iter().map(|x| x.max(0.0)).collect();
            let z: f64 = b.iter().sum();
            candidates.push(Belief::new(0, b.iter().map(|x| x / z).collect()).unwrap());
        }
    };
    let ones = vec![1.0; n];
    // every choice of n-1 hyperplanes together with the simplex equation
    for i in 0..planes.len() {
        if n == 2 {
            if let Some(b) = solve_square(vec![planes[i].clone(), ones.clone()], vec![0.0, 1.0]) {
                push(b);
            }
        }
        for j in i + 1..planes.len() {
            if n == 3 {
                let a = vec![planes[i].clone(), planes[j].clone(), ones.clone()];
                if let Some(b) = solve_square(a, vec![0.0, 0.0, 1.0]) {
                    push(b);
                }
            }
        }
    }
    candidates
        .iter()
        .map(|b| (v1.value(b).unwrap() - v2.value(b).unwrap()).abs())
        .fold(0.0, f64::max)
}
