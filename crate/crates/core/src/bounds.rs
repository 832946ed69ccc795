//! Lower bound as a set of α-vectors, upper bound as a δ-Lipschitz point set.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Belief, UtilityBounds};
use crate::lp::{solve_lp, LpError, LpModel, Relation, Sense};

/// Slack allowed when checking that values lie inside `[L, U]`.
pub const RANGE_TOL: f64 = 1e-6;
/// Strictness margin of the dominance tests used when pruning.
pub const PRUNE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("no vectors or points stored for block {0}")]
    EmptyBound(usize),
    #[error("value {value} outside [{lower}, {upper}]")]
    RangeViolation { value: f64, lower: f64, upper: f64 },
    #[error("block {block} expects {expected} entries, got {got}")]
    DimensionMismatch {
        block: usize,
        expected: usize,
        got: usize,
    },
    #[error("unknown block {0}")]
    UnknownBlock(usize),
    #[error("projection LP failed: {0}")]
    Lp(#[from] LpError),
}

/// Linear function over the belief simplex of one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaVector {
    pub block: usize,
    pub values: Vec<f64>,
}

impl AlphaVector {
    pub fn new(block: usize, values: Vec<f64>) -> Self {
        Self { block, values }
    }

    pub fn constant(block: usize, len: usize, v: f64) -> Self {
        Self {
            block,
            values: vec![v; len],
        }
    }

    pub fn dot(&self, b: &[f64]) -> f64 {
        self.values.iter().zip(b).map(|(a, p)| a * p).sum()
    }

    pub fn eval(&self, b: &Belief) -> f64 {
        self.dot(&b.probs)
    }

    /// `self(s) >= other(s) - tol` for every state.
    pub fn dominates(&self, other: &AlphaVector, tol: f64) -> bool {
        self.values
            .iter()
            .zip(&other.values)
            .all(|(a, b)| *a >= *b - tol)
    }
}

/// Pointwise maximum over α-vectors, stored per partition block.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBound {
    sets: Vec<Vec<AlphaVector>>,
    block_sizes: Vec<usize>,
    range: UtilityBounds,
}

impl LowerBound {
    pub fn new(block_sizes: Vec<usize>, range: UtilityBounds) -> Self {
        Self {
            sets: vec![Vec::new(); block_sizes.len()],
            block_sizes,
            range,
        }
    }

    pub fn range(&self) -> UtilityBounds {
        self.range
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn num_blocks(&self) -> usize {
        self.sets.len()
    }

    pub fn vectors(&self, block: usize) -> &[AlphaVector] {
        &self.sets[block]
    }

    pub fn size(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }

    fn check(&self, block: usize, len: usize) -> Result<(), BoundsError> {
        let expected = *self
            .block_sizes
            .get(block)
            .ok_or(BoundsError::UnknownBlock(block))?;
        if expected != len {
            return Err(BoundsError::DimensionMismatch {
                block,
                expected,
                got: len,
            });
        }
        Ok(())
    }

    /// Rebuilds a bound from stored vector sets, keeping their order.
    pub fn from_sets(
        block_sizes: Vec<usize>,
        range: UtilityBounds,
        sets: Vec<Vec<AlphaVector>>,
    ) -> Result<Self, BoundsError> {
        let lb = Self {
            sets,
            block_sizes,
            range,
        };
        if lb.sets.len() != lb.block_sizes.len() {
            return Err(BoundsError::UnknownBlock(lb.sets.len()));
        }
        for (block, set) in lb.sets.iter().enumerate() {
            for alpha in set {
                if alpha.block != block {
                    return Err(BoundsError::UnknownBlock(alpha.block));
                }
                lb.check(block, alpha.values.len())?;
                for &v in &alpha.values {
                    check_range(v, range)?;
                }
            }
        }
        Ok(lb)
    }

    /// Index of the maximising vector at `b`; the first one wins ties.
    pub fn argmax(&self, b: &Belief) -> Result<usize, BoundsError> {
        self.check(b.block, b.len())?;
        let set = &self.sets[b.block];
        if set.is_empty() {
            return Err(BoundsError::EmptyBound(b.block));
        }
        let mut best = (0, f64::NEG_INFINITY);
        for (i, a) in set.iter().enumerate() {
            let v = a.eval(b);
            if v > best.1 {
                best = (i, v);
            }
        }
        Ok(best.0)
    }

    pub fn value(&self, b: &Belief) -> Result<f64, BoundsError> {
        let i = self.argmax(b)?;
        Ok(self.sets[b.block][i].eval(b))
    }

    /// Inserts `alpha` after removing every stored vector it weakly dominates.
    pub fn insert(&mut self, mut alpha: AlphaVector) -> Result<(), BoundsError> {
        self.check(alpha.block, alpha.values.len())?;
        let UtilityBounds { lower, upper, .. } = self.range;
        for v in &mut alpha.values {
            if !(*v >= lower - RANGE_TOL && *v <= upper + RANGE_TOL) {
                return Err(BoundsError::RangeViolation {
                    value: *v,
                    lower,
                    upper,
                });
            }
            *v = v.clamp(lower, upper);
        }
        let set = &mut self.sets[alpha.block];
        set.retain(|old| {
            old.values
                .iter()
                .zip(&alpha.values)
                .any(|(o, n)| *o > *n + PRUNE_TOL)
        });
        set.push(alpha);
        Ok(())
    }
}

fn check_range(value: f64, range: UtilityBounds) -> Result<(), BoundsError> {
    if value >= range.lower - RANGE_TOL && value <= range.upper + RANGE_TOL {
        Ok(())
    } else {
        Err(BoundsError::RangeViolation {
            value,
            lower: range.lower,
            upper: range.upper,
        })
    }
}

pub fn lb_value(lb: &LowerBound, b: &Belief) -> Result<f64, BoundsError> {
    lb.value(b)
}

pub fn lb_insert(lb: &mut LowerBound, alpha: AlphaVector) -> Result<(), BoundsError> {
    lb.insert(alpha)
}

/// One `(belief, value)` pair of the upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperPoint {
    pub belief: Vec<f64>,
    pub value: f64,
}

/// Lower δ-Lipschitz envelope of the convex interpolation of a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperBound {
    sets: Vec<Vec<UpperPoint>>,
    pruned_at: Vec<usize>,
    block_sizes: Vec<usize>,
    range: UtilityBounds,
    prune_growth: f64,
}

impl UpperBound {
    pub fn new(block_sizes: Vec<usize>, range: UtilityBounds) -> Self {
        Self {
            sets: vec![Vec::new(); block_sizes.len()],
            pruned_at: vec![0; block_sizes.len()],
            block_sizes,
            range,
            prune_growth: 0.10,
        }
    }

    /// Relative growth of a block's point set that triggers pruning.
    pub fn with_prune_growth(mut self, growth: f64) -> Self {
        self.prune_growth = growth;
        self
    }

    pub fn prune_growth(&self) -> f64 {
        self.prune_growth
    }

    pub fn range(&self) -> UtilityBounds {
        self.range
    }

    pub fn delta(&self) -> f64 {
        self.range.delta
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn num_blocks(&self) -> usize {
        self.sets.len()
    }

    pub fn points(&self, block: usize) -> &[UpperPoint] {
        &self.sets[block]
    }

    pub fn size(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }

    fn check(&self, block: usize, len: usize) -> Result<(), BoundsError> {
        let expected = *self
            .block_sizes
            .get(block)
            .ok_or(BoundsError::UnknownBlock(block))?;
        if expected != len {
            return Err(BoundsError::DimensionMismatch {
                block,
                expected,
                got: len,
            });
        }
        Ok(())
    }

    pub fn value(&self, b: &Belief) -> Result<f64, BoundsError> {
        self.check(b.block, b.len())?;
        envelope(&self.sets[b.block], None, &b.probs, self.range.delta)
            .ok_or(BoundsError::EmptyBound(b.block))?
    }

    /// Rebuilds a bound from stored point sets, keeping their order. The
    /// current sizes become the pruning baseline.
    pub fn from_sets(
        block_sizes: Vec<usize>,
        range: UtilityBounds,
        sets: Vec<Vec<UpperPoint>>,
        prune_growth: f64,
    ) -> Result<Self, BoundsError> {
        if sets.len() != block_sizes.len() {
            return Err(BoundsError::UnknownBlock(sets.len()));
        }
        let ub = Self {
            pruned_at: sets.iter().map(Vec::len).collect(),
            sets,
            block_sizes,
            range,
            prune_growth,
        };
        for (block, set) in ub.sets.iter().enumerate() {
            for p in set {
                ub.check(block, p.belief.len())?;
                check_range(p.value, range)?;
            }
        }
        Ok(ub)
    }

    /// Appends a point without triggering pruning.
    pub fn push(&mut self, block: usize, point: UpperPoint) -> Result<(), BoundsError> {
        self.check(block, point.belief.len())?;
        let UtilityBounds { lower, upper, .. } = self.range;
        let value = point.value;
        if !(value >= lower - RANGE_TOL && value <= upper + RANGE_TOL) {
            return Err(BoundsError::RangeViolation {
                value,
                lower,
                upper,
            });
        }
        self.sets[block].push(UpperPoint {
            belief: point.belief,
            value: value.clamp(lower, upper),
        });
        Ok(())
    }

    /// Appends a point; prunes the block when it grew enough since the last
    /// prune. Returns whether a prune ran.
    pub fn insert(&mut self, b: &Belief, value: f64) -> Result<bool, BoundsError> {
        self.push(
            b.block,
            UpperPoint {
                belief: b.probs.clone(),
                value,
            },
        )?;
        let len = self.sets[b.block].len();
        let base = self.pruned_at[b.block];
        if len as f64 >= base as f64 * (1.0 + self.prune_growth) && len > base {
            self.prune_block(b.block)?;
            return Ok(true);
        }
        Ok(false)
    }

    /// Marks the current sizes as the pruning baseline.
    pub fn reset_prune_baseline(&mut self) {
        for (p, s) in self.pruned_at.iter_mut().zip(&self.sets) {
            *p = s.len();
        }
    }

    /// Removes points lying strictly above the envelope of the remaining
    /// ones. A single pass; the represented function does not change.
    pub fn prune_block(&mut self, block: usize) -> Result<usize, BoundsError> {
        let delta = self.range.delta;
        let set = &mut self.sets[block];
        let mut removed = 0;
        let mut i = 0;
        while i < set.len() {
            if set.len() == 1 {
                break;
            }
            let others =
                envelope(set, Some(i), &set[i].belief, delta).expect("set has other points")?;
            if set[i].value > others + PRUNE_TOL {
                set.remove(i);
                removed += 1;
            } else {
                i += 1;
            }
        }
        self.pruned_at[block] = set.len();
        Ok(removed)
    }

    pub fn prune(&mut self) -> Result<usize, BoundsError> {
        let mut total = 0;
        for block in 0..self.sets.len() {
            total += self.prune_block(block)?;
        }
        Ok(total)
    }
}

/// Solves the projection LP over `points` (skipping index `skip`). `None`
/// when no point is available.
fn envelope(
    points: &[UpperPoint],
    skip: Option<usize>,
    b: &[f64],
    delta: f64,
) -> Option<Result<f64, BoundsError>> {
    let used: Vec<&UpperPoint> = points
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(_, p)| p)
        .collect();
    if used.is_empty() {
        return None;
    }
    // a single point forces b' onto its belief, no LP needed
    if used.len() == 1 {
        let p = used[0];
        let dist: f64 = p.belief.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
        return Some(Ok(p.value + delta * dist));
    }
    Some(projection_lp(&used, b, delta))
}

fn projection_lp(points: &[&UpperPoint], b: &[f64], delta: f64) -> Result<f64, BoundsError> {
    let n = b.len();
    let mut m = LpModel::new(Sense::Minimize);
    let lambda: Vec<_> = (0..points.len()).map(|_| m.add_nonneg("")).collect();
    // |Σ λ_i b_i(s) - b(s)| split as Δ⁺_s + Δ⁻_s
    let plus: Vec<_> = (0..n).map(|_| m.add_nonneg("")).collect();
    let minus: Vec<_> = (0..n).map(|_| m.add_nonneg("")).collect();
    let mut obj: Vec<_> = lambda
        .iter()
        .zip(points)
        .map(|(&v, p)| (v, p.value))
        .collect();
    obj.extend(plus.iter().chain(&minus).map(|&d| (d, delta)));
    m.set_objective(obj);
    m.add_constraint(
        "simplex",
        lambda.iter().map(|&v| (v, 1.0)).collect(),
        Relation::Eq,
        1.0,
    );
    for s in 0..n {
        let mut row: Vec<_> = lambda
            .iter()
            .zip(points)
            .filter(|(_, p)| p.belief[s] != 0.0)
            .map(|(&v, p)| (v, p.belief[s]))
            .collect();
        row.push((plus[s], -1.0));
        row.push((minus[s], 1.0));
        m.add_constraint("", row, Relation::Eq, b[s]);
    }
    let sol = solve_lp(&m)?;
    if !sol.is_optimal() {
        return Err(BoundsError::Lp(LpError::NumericalFailure(format!(
            "projection LP ended with status {:?}",
            sol.status
        ))));
    }
    Ok(sol.objective_value)
}

pub fn ub_value(ub: &UpperBound, b: &Belief) -> Result<f64, BoundsError> {
    ub.value(b)
}

pub fn ub_insert(ub: &mut UpperBound, b: &Belief, value: f64) -> Result<bool, BoundsError> {
    ub.insert(b, value)
}

pub fn ub_prune(ub: &mut UpperBound) -> Result<usize, BoundsError> {
    ub.prune()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn range(lower: f64, upper: f64) -> UtilityBounds {
        UtilityBounds {
            lower,
            upper,
            delta: (upper - lower) / 2.0,
        }
    }

    fn bel(p: &[f64]) -> Belief {
        Belief::new(0, p.to_vec()).unwrap()
    }

    #[test]
    fn lb_examples() {
        let mut lb = LowerBound::new(vec![2], range(-10.0, 10.0));
        assert!(matches!(
            lb.value(&bel(&[1.0, 0.0])),
            Err(BoundsError::EmptyBound(0))
        ));
        lb.insert(AlphaVector::constant(0, 2, 5.0)).unwrap();
        assert_eq!(lb.value(&bel(&[0.2, 0.8])).unwrap(), 5.0);

        let mut lb = LowerBound::new(vec![2], range(-10.0, 10.0));
        lb.insert(AlphaVector::new(0, vec![0.0, 0.0])).unwrap();
        lb.insert(AlphaVector::new(0, vec![1.0, 1.0])).unwrap();
        assert_eq!(lb.vectors(0).len(), 1);
        assert_eq!(lb.value(&bel(&[0.5, 0.5])).unwrap(), 1.0);

        let mut lb = LowerBound::new(vec![2], range(-10.0, 10.0));
        lb.insert(AlphaVector::new(0, vec![1.0, 0.0])).unwrap();
        lb.insert(AlphaVector::new(0, vec![0.0, 1.0])).unwrap();
        assert_eq!(lb.vectors(0).len(), 2);
        assert!((lb.value(&bel(&[0.3, 0.7])).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn equal_vector_replaces_tie() {
        let mut lb = LowerBound::new(vec![2], range(-10.0, 10.0));
        lb.insert(AlphaVector::new(0, vec![1.0, 2.0])).unwrap();
        lb.insert(AlphaVector::new(0, vec![1.0, 2.0])).unwrap();
        assert_eq!(lb.vectors(0).len(), 1);
    }

    #[test]
    fn lb_range_violation() {
        let mut lb = LowerBound::new(vec![1], range(0.0, 1.0));
        let r = lb.insert(AlphaVector::new(0, vec![2.0]));
        assert!(matches!(r, Err(BoundsError::RangeViolation { .. })));
    }

    #[test]
    fn ub_exact_point() {
        let mut ub = UpperBound::new(vec![2], range(-10.0, 10.0));
        ub.insert(&bel(&[1.0, 0.0]), 1.0).unwrap();
        ub.insert(&bel(&[0.0, 1.0]), 3.0).unwrap();
        ub.insert(&bel(&[0.4, 0.6]), 0.5).unwrap();
        assert!((ub.value(&bel(&[0.4, 0.6])).unwrap() - 0.5).abs() < 1e-7);
    }

    #[test]
    fn ub_interpolation_beats_detour() {
        let mut ub = UpperBound::new(vec![2], range(-1000.0, 1000.0));
        ub.push(
            0,
            UpperPoint {
                belief: vec![1.0, 0.0],
                value: 0.0,
            },
        )
        .unwrap();
        ub.push(
            0,
            UpperPoint {
                belief: vec![0.0, 1.0],
                value: 2.0,
            },
        )
        .unwrap();
        assert!((ub.value(&bel(&[0.5, 0.5])).unwrap() - 1.0).abs() < 1e-7);
    }

    #[test]
    fn ub_single_point_detour() {
        let mut ub = UpperBound::new(vec![2], range(-1.0, 1.0));
        ub.push(
            0,
            UpperPoint {
                belief: vec![1.0, 0.0],
                value: 0.0,
            },
        )
        .unwrap();
        assert!((ub.value(&bel(&[0.0, 1.0])).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ub_lipschitz_detour_when_delta_small() {
        // steep interpolation, cheap detour: value at the middle is
        // min(0 + 1 * 1.0, interpolation 50) = 1
        let mut ub = UpperBound::new(vec![2], range(-1.0, 1.0));
        ub.push(
            0,
            UpperPoint {
                belief: vec![1.0, 0.0],
                value: 0.0,
            },
        )
        .unwrap();
        ub.push(
            0,
            UpperPoint {
                belief: vec![0.0, 1.0],
                value: 1.0,
            },
        )
        .unwrap();
        let mid = ub.value(&bel(&[0.5, 0.5])).unwrap();
        assert!((mid - 0.5).abs() < 1e-7, "{mid}");
    }

    #[test]
    fn prune_drops_point_above_envelope() {
        let mut ub = UpperBound::new(vec![2], range(-1000.0, 1000.0));
        ub.push(
            0,
            UpperPoint {
                belief: vec![1.0, 0.0],
                value: 0.0,
            },
        )
        .unwrap();
        ub.push(
            0,
            UpperPoint {
                belief: vec![0.0, 1.0],
                value: 0.0,
            },
        )
        .unwrap();
        ub.push(
            0,
            UpperPoint {
                belief: vec![0.5, 0.5],
                value: 5.0,
            },
        )
        .unwrap();
        assert_eq!(ub.prune().unwrap(), 1);
        assert_eq!(ub.points(0).len(), 2);
    }

    #[test]
    fn prune_single_point_is_noop() {
        let mut ub = UpperBound::new(vec![2], range(-1.0, 1.0));
        ub.push(
            0,
            UpperPoint {
                belief: vec![0.5, 0.5],
                value: 0.3,
            },
        )
        .unwrap();
        assert_eq!(ub.prune().unwrap(), 0);
        assert_eq!(ub.points(0).len(), 1);
    }

    #[test]
    fn insert_triggers_prune_on_growth() {
        let mut ub = UpperBound::new(vec![2], range(-1000.0, 1000.0));
        ub.push(
            0,
            UpperPoint {
                belief: vec![1.0, 0.0],
                value: 0.0,
            },
        )
        .unwrap();
        ub.push(
            0,
            UpperPoint {
                belief: vec![0.0, 1.0],
                value: 0.0,
            },
        )
        .unwrap();
        ub.reset_prune_baseline();
        // 2 -> 3 is a 50% growth, so the useless point is pruned at once
        let pruned = ub.insert(&bel(&[0.5, 0.5]), 7.0).unwrap();
        assert!(pruned);
        assert_eq!(ub.points(0).len(), 2);
    }

    #[test]
    fn wrong_dimension_rejected() {
        let ub = UpperBound::new(vec![3], range(-1.0, 1.0));
        let r = ub.value(&bel(&[0.5, 0.5]));
        assert!(matches!(r, Err(BoundsError::DimensionMismatch { .. })));
    }
}
