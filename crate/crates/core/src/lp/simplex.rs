//! Dense bounded-variable primal simplex.
//!
//! Every row `i` reads `A_i x - s_i = 0`, where the logical `s_i` carries the
//! row bounds. The start basis holds the logicals; free columns are pivoted
//! onto equality rows first. Any basic variable left outside its bounds is
//! swapped for an artificial copy of its column, and phase one drives the
//! artificials to zero before phase two optimises the objective. Degenerate
//! stalls are broken by randomly relaxing the bounds of the basic variables;
//! the relaxation is removed at the end and the basis repaired.
//!
//! The basis inverse is stored densely (column-major) and updated after each
//! pivot; it is rebuilt periodically and whenever the residual check fails.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimisation problem in bounded form.
pub(crate) struct Problem {
    pub cols: Vec<Vec<(usize, f64)>>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub row_lower: Vec<f64>,
    pub row_upper: Vec<f64>,
}

pub(crate) enum Outcome {
    /// Structural values and row duals `d obj / d row bound`.
    Optimal {
        x: Vec<f64>,
        y: Vec<f64>,
    },
    Infeasible,
    Unbounded,
}

/// Bound violation tolerated on basic variables, relative to `1 + |bound|`.
const PRIMAL_TOL: f64 = 1e-9;
/// Violation that triggers a repair of the basis.
const REPAIR_TOL: f64 = 1e-8;
/// Residual artificial mass, relative to the problem scale, that proves
/// infeasibility.
const INFEASIBLE_TOL: f64 = 1e-7;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;
/// Consecutive degenerate pivots before bounds are relaxed.
const STALL_PERTURB: usize = 10;
/// Consecutive degenerate pivots before Bland's rule takes over.
const STALL_BLAND: usize = 50;
/// Relative size of the random bound relaxation.
const PERTURBATION: f64 = 1e-7;
/// Repair rounds after which the solve is abandoned.
const MAX_ROUNDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
    /// Free variable resting at zero.
    Zero,
    Fixed,
}

enum End {
    Optimal,
    Unbounded,
}

struct Simplex<'a> {
    p: &'a Problem,
    m: usize,
    n: usize,
    /// Explicit columns of the artificials, indexed from `n + m`.
    art_cols: Vec<Vec<(usize, f64)>>,
    lo: Vec<f64>,
    up: Vec<f64>,
    orig_lo: Vec<f64>,
    orig_up: Vec<f64>,
    shifted: Vec<bool>,
    perturbed: bool,
    allow_perturb: bool,
    rng: ChaCha8Rng,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    since_refactor: usize,
    iterations: usize,
    limit: usize,
    scale: f64,
}

pub(crate) fn solve(p: &Problem) -> Result<Outcome, String> {
    let mut s = Simplex::start(p);
    s.repair();
    for _ in 0..MAX_ROUNDS {
        if s.has_active_artificials() {
            let cost = s.phase1_cost();
            s.run(&cost)?;
            let mass: f64 = s.active_artificials().map(|j| s.x[j].max(0.0)).sum();
            if mass > INFEASIBLE_TOL * (1.0 + s.scale) {
                return Ok(Outcome::Infeasible);
            }
            s.fix_artificials();
        }
        let cost = s.phase2_cost();
        if let End::Unbounded = s.run(&cost)? {
            return Ok(Outcome::Unbounded);
        }
        if s.perturbed {
            s.unperturb()?;
        }
        if !s.repair() {
            return Ok(Outcome::Optimal {
                x: s.x[..s.n].to_vec(),
                y: s.btran(&cost),
            });
        }
    }
    Err(format!("no clean basis after {MAX_ROUNDS} repair rounds"))
}

impl<'a> Simplex<'a> {
    fn start(p: &'a Problem) -> Self {
        let n = p.cols.len();
        let m = p.row_lower.len();
        let mut lo = p.lower.clone();
        let mut up = p.upper.clone();
        lo.extend_from_slice(&p.row_lower);
        up.extend_from_slice(&p.row_upper);
        let scale = lo
            .iter()
            .chain(&up)
            .filter(|v| v.is_finite())
            .fold(1.0_f64, |a, v| a.max(v.abs()));
        let mut x = vec![0.0; n + m];
        let mut state = vec![State::Basic; n + m];
        for j in 0..n {
            (x[j], state[j]) = resting(lo[j], up[j]);
        }
        for (j, col) in p.cols.iter().enumerate() {
            if x[j] != 0.0 {
                for &(i, a) in col {
                    x[n + i] += a * x[j];
                }
            }
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = -1.0;
        }
        let mut s = Self {
            p,
            m,
            n,
            art_cols: Vec::new(),
            orig_lo: lo.clone(),
            orig_up: up.clone(),
            lo,
            up,
            shifted: vec![false; n + m],
            perturbed: false,
            allow_perturb: true,
            rng: ChaCha8Rng::seed_from_u64(0x5eed),
            x,
            state,
            basis: (n..n + m).collect(),
            binv,
            since_refactor: 0,
            iterations: 0,
            limit: 50 * (2 * m + n) + 10_000,
            scale,
        };
        s.crash_free_columns();
        s
    }

    /// Pivots free columns into basis slots held by equality-row logicals.
    /// Free basics never leave, so each such row is settled for good.
    fn crash_free_columns(&mut self) {
        for j in 0..self.n {
            if self.state[j] != State::Zero {
                continue;
            }
            let alpha = self.ftran(j);
            let peak = alpha.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
            let mut slot: Option<usize> = None;
            for (i, &a) in alpha.iter().enumerate() {
                let b = self.basis[i];
                if b >= self.n
                    && self.lo[b] == self.up[b]
                    && a.abs() > PIVOT_TOL.max(1e-3 * peak)
                    && slot.map_or(true, |r| a.abs() > alpha[r].abs())
                {
                    slot = Some(i);
                }
            }
            if let Some(r) = slot {
                // move the free column until the logical sits on its value
                let out = self.basis[r];
                let theta = (self.x[out] - self.lo[out]) / alpha[r];
                self.shift(j, 1.0, theta, &alpha);
                self.x[out] = self.lo[out];
                self.state[out] = State::Fixed;
                self.state[j] = State::Basic;
                self.basis[r] = j;
                self.pivot(r, &alpha);
            }
        }
    }

    /// Replaces every basic variable outside its bounds by an artificial
    /// copy of its column carrying the violation. The basis matrix changes
    /// by a column sign only, so no other value moves. Returns true when an
    /// artificial was added.
    fn repair(&mut self) -> bool {
        let mut added = false;
        for r in 0..self.m {
            let j = self.basis[r];
            let (lo, up, x) = (self.lo[j], self.up[j], self.x[j]);
            let bound = if x < lo - REPAIR_TOL * (1.0 + lo.abs()) {
                lo
            } else if x > up + REPAIR_TOL * (1.0 + up.abs()) {
                up
            } else {
                continue;
            };
            let sign = if x > bound { 1.0 } else { -1.0 };
            let mut col = Vec::new();
            self.for_col(j, |i, a| col.push((i, sign * a)));
            self.art_cols.push(col);
            self.x[j] = bound;
            self.state[j] = if lo == up {
                State::Fixed
            } else if bound == lo {
                State::Lower
            } else {
                State::Upper
            };
            // sign * a_j * value = a_j * (x - bound)
            self.x.push((x - bound).abs());
            self.lo.push(0.0);
            self.up.push(f64::INFINITY);
            self.orig_lo.push(0.0);
            self.orig_up.push(f64::INFINITY);
            self.shifted.push(false);
            self.state.push(State::Basic);
            self.basis[r] = self.x.len() - 1;
            let m = self.m;
            for k in 0..m {
                self.binv[k * m + r] *= sign;
            }
            added = true;
        }
        added
    }

    fn active_artificials(&self) -> impl Iterator<Item = usize> + '_ {
        (self.n + self.m..self.x.len()).filter(|&j| self.orig_up[j] > 0.0)
    }

    fn has_active_artificials(&self) -> bool {
        self.active_artificials().next().is_some()
    }

    fn phase1_cost(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.x.len()];
        for j in self.active_artificials() {
            c[j] = 1.0;
        }
        c
    }

    fn phase2_cost(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.x.len()];
        c[..self.n].copy_from_slice(&self.p.cost);
        c
    }

    /// Pins every artificial to zero for good.
    fn fix_artificials(&mut self) {
        for j in self.n + self.m..self.x.len() {
            self.orig_lo[j] = 0.0;
            self.orig_up[j] = 0.0;
            if !self.shifted[j] {
                self.lo[j] = 0.0;
                self.up[j] = 0.0;
            } else {
                self.up[j] = self.lo[j].abs();
            }
            if self.state[j] != State::Basic {
                self.state[j] = State::Fixed;
                self.x[j] = 0.0;
                self.lo[j] = 0.0;
                self.up[j] = 0.0;
            }
        }
    }

    fn for_col(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            for &(i, a) in &self.p.cols[j] {
                f(i, a);
            }
        } else if j < self.n + self.m {
            f(j - self.n, -1.0);
        } else {
            for &(i, a) in &self.art_cols[j - self.n - self.m] {
                f(i, a);
            }
        }
    }

    fn col_dot(&self, j: usize, y: &[f64]) -> f64 {
        let mut d = 0.0;
        self.for_col(j, |i, a| d += a * y[i]);
        d
    }

    /// `y' = c_B' B^-1` for the cost vector `cost` over all columns.
    fn btran(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let cb: Vec<f64> = self.basis.iter().map(|&j| cost[j]).collect();
        (0..m)
            .map(|k| {
                let col = &self.binv[k * m..(k + 1) * m];
                col.iter().zip(&cb).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// `B^-1 a_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        self.for_col(j, |k, a| {
            let col = &self.binv[k * m..(k + 1) * m];
            for (o, b) in out.iter_mut().zip(col) {
                *o += a * b;
            }
        });
        out
    }

    fn tol(bound: f64) -> f64 {
        PRIMAL_TOL * (1.0 + bound.abs())
    }

    fn run(&mut self, cost: &[f64]) -> Result<End, String> {
        let cscale = cost.iter().fold(1.0_f64, |a, c| a.max(c.abs()));
        let dtol = DUAL_TOL * cscale;
        let mut stall = 0;
        let mut checks = 0;
        loop {
            self.iterations += 1;
            if self.iterations > self.limit {
                return Err(format!("iteration limit {} reached", self.limit));
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            if stall >= STALL_PERTURB && self.allow_perturb && self.perturb() {
                stall = 0;
            }
            let bland = stall > STALL_BLAND;
            let y = self.btran(cost);
            let mut enter: Option<(usize, f64)> = None;
            let mut best_score = 0.0;
            for j in 0..self.x.len() {
                let st = self.state[j];
                if st == State::Basic || st == State::Fixed {
                    continue;
                }
                let d = cost[j] - self.col_dot(j, &y);
                let dir = match st {
                    State::Lower if d < -dtol => 1.0,
                    State::Upper if d > dtol => -1.0,
                    State::Zero if d.abs() > dtol => -d.signum(),
                    _ => continue,
                };
                if bland {
                    enter = Some((j, dir));
                    break;
                }
                if d.abs() > best_score {
                    best_score = d.abs();
                    enter = Some((j, dir));
                }
            }
            let Some((q, dir)) = enter else {
                // confirm on a fresh factorisation before concluding
                if checks < 2 && self.residual() > PRIMAL_TOL * (1.0 + self.scale) {
                    checks += 1;
                    self.refactor()?;
                    continue;
                }
                return Ok(End::Optimal);
            };
            let alpha = self.ftran(q);
            match self.step(q, dir, &alpha, bland) {
                None => return Ok(End::Unbounded),
                Some(theta) if theta * best_score.max(1.0) <= 1e-12 => stall += 1,
                Some(_) => stall = 0,
            }
        }
    }

    /// Moves entering variable `q` in direction `dir`. Returns the step
    /// length, or `None` when nothing blocks an infinite step.
    fn step(&mut self, q: usize, dir: f64, alpha: &[f64], bland: bool) -> Option<f64> {
        // (bound the basic may reach, remaining room, rate of travel)
        let blocking = |i: usize| -> Option<(f64, f64, f64)> {
            let rate = dir * alpha[i];
            if rate.abs() <= PIVOT_TOL {
                return None;
            }
            let j = self.basis[i];
            let (lo, up, x) = (self.lo[j], self.up[j], self.x[j]);
            let bound = if rate > 0.0 { lo } else { up };
            if !bound.is_finite() {
                return None;
            }
            let room = if rate > 0.0 { x - bound } else { bound - x };
            Some((bound, room.max(0.0), rate.abs()))
        };
        let range = self.up[q] - self.lo[q];
        let mut leave: Option<(usize, f64)> = None;
        if bland {
            // textbook ratio test, ties broken by the smallest variable index
            for i in 0..alpha.len() {
                let Some((_, room, rate)) = blocking(i) else {
                    continue;
                };
                let ratio = room / rate;
                let better = match leave {
                    None => true,
                    Some((k, best)) => {
                        ratio < best - 1e-12 * (1.0 + best)
                            || (ratio <= best + 1e-12 * (1.0 + best)
                                && self.basis[i] < self.basis[k])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        } else {
            // Harris pass one: largest step keeping every basic within tolerance
            let mut theta_max = f64::INFINITY;
            for i in 0..alpha.len() {
                if let Some((bound, room, rate)) = blocking(i) {
                    theta_max = theta_max.min((room + Self::tol(bound)) / rate);
                }
            }
            // pass two: among blocking rows pick the largest pivot
            let mut best_pivot = 0.0;
            for i in 0..alpha.len() {
                if let Some((_, room, rate)) = blocking(i) {
                    let ratio = room / rate;
                    if ratio <= theta_max && rate > best_pivot {
                        best_pivot = rate;
                        leave = Some((i, ratio));
                    }
                }
            }
        }
        let theta = match leave {
            Some((_, ratio)) if ratio < range => ratio,
            _ if range.is_finite() => {
                // bound flip of the entering variable
                self.shift(q, dir, range, alpha);
                self.state[q] = if dir > 0.0 {
                    State::Upper
                } else {
                    State::Lower
                };
                self.x[q] = if dir > 0.0 { self.up[q] } else { self.lo[q] };
                return Some(range);
            }
            _ => return None,
        };
        let (r, _) = leave.expect("leaving row chosen");
        let out = self.basis[r];
        let (bound, _, _) = blocking(r).expect("leaving row blocks");
        self.shift(q, dir, theta, alpha);
        self.x[out] = bound;
        self.state[out] = if self.lo[out] == self.up[out] {
            State::Fixed
        } else if bound == self.lo[out] {
            State::Lower
        } else {
            State::Upper
        };
        self.state[q] = State::Basic;
        self.basis[r] = q;
        self.pivot(r, alpha);
        Some(theta)
    }

    fn shift(&mut self, q: usize, dir: f64, theta: f64, alpha: &[f64]) {
        if theta == 0.0 {
            return;
        }
        self.x[q] += dir * theta;
        for (i, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                self.x[self.basis[i]] -= dir * theta * a;
            }
        }
    }

    fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let ar = alpha[r];
        for k in 0..m {
            let col = &mut self.binv[k * m..(k + 1) * m];
            let t = col[r] / ar;
            if t != 0.0 {
                for (c, &a) in col.iter_mut().zip(alpha) {
                    *c -= a * t;
                }
            }
            col[r] = t;
        }
        self.since_refactor += 1;
    }

    /// Relaxes the finite bounds of basic variables not relaxed yet by a
    /// random amount. Returns false when nothing was left to relax.
    fn perturb(&mut self) -> bool {
        let mut any = false;
        for i in 0..self.m {
            let j = self.basis[i];
            if self.shifted[j] {
                continue;
            }
            self.shifted[j] = true;
            if self.lo[j].is_finite() {
                self.lo[j] -=
                    PERTURBATION * (1.0 + self.lo[j].abs()) * self.rng.gen_range(0.5..1.0);
                any = true;
            }
            if self.up[j].is_finite() {
                self.up[j] +=
                    PERTURBATION * (1.0 + self.up[j].abs()) * self.rng.gen_range(0.5..1.0);
                any = true;
            }
        }
        self.perturbed |= any;
        any
    }

    /// Restores the original bounds, moves nonbasic variables back onto them
    /// and forbids further relaxation.
    fn unperturb(&mut self) -> Result<(), String> {
        self.lo.clone_from(&self.orig_lo);
        self.up.clone_from(&self.orig_up);
        for j in 0..self.x.len() {
            if self.state[j] == State::Basic || self.state[j] == State::Zero {
                continue;
            }
            let (lo, up) = (self.lo[j], self.up[j]);
            (self.x[j], self.state[j]) = if lo == up {
                (lo, State::Fixed)
            } else if (self.state[j] == State::Upper && up.is_finite()) || !lo.is_finite() {
                (up, State::Upper)
            } else {
                (lo, State::Lower)
            };
        }
        self.perturbed = false;
        self.allow_perturb = false;
        self.refactor()
    }

    /// Rebuilds `B^-1` from scratch and recomputes the basic values.
    fn refactor(&mut self) -> Result<(), String> {
        let m = self.m;
        // row-major B augmented with the identity
        let w = 2 * m;
        let mut aug = vec![0.0; m * w];
        for (pos, &j) in self.basis.iter().enumerate() {
            self.for_col(j, |i, a| aug[i * w + pos] = a);
        }
        for i in 0..m {
            aug[i * w + m + i] = 1.0;
        }
        for c in 0..m {
            let piv = (c..m)
                .max_by(|&a, &b| aug[a * w + c].abs().total_cmp(&aug[b * w + c].abs()))
                .expect("non-empty pivot range");
            if aug[piv * w + c].abs() < 1e-12 {
                return Err("singular basis".into());
            }
            if piv != c {
                for k in 0..w {
                    aug.swap(piv * w + k, c * w + k);
                }
            }
            let d = aug[c * w + c];
            for k in 0..w {
                aug[c * w + k] /= d;
            }
            for i in 0..m {
                if i == c {
                    continue;
                }
                let f = aug[i * w + c];
                if f != 0.0 {
                    for k in 0..w {
                        aug[i * w + k] -= f * aug[c * w + k];
                    }
                }
            }
        }
        // row i of the inverse is basis position i, column k is row k
        for i in 0..m {
            for k in 0..m {
                self.binv[k * m + i] = aug[i * w + m + k];
            }
        }
        let mut rhs = vec![0.0; m];
        for j in 0..self.x.len() {
            if self.state[j] != State::Basic && self.x[j] != 0.0 {
                let v = self.x[j];
                self.for_col(j, |i, a| rhs[i] -= a * v);
            }
        }
        for i in 0..m {
            let v: f64 = (0..m).map(|k| self.binv[k * m + i] * rhs[k]).sum();
            self.x[self.basis[i]] = v;
        }
        self.since_refactor = 0;
        Ok(())
    }

    /// Largest row residual of `A x - s = 0`.
    fn residual(&self) -> f64 {
        let mut r = vec![0.0; self.m];
        for j in 0..self.x.len() {
            let v = self.x[j];
            if v != 0.0 {
                self.for_col(j, |i, a| r[i] += a * v);
            }
        }
        r.iter().fold(0.0, |a, b| a.max(b.abs()))
    }
}

fn resting(lo: f64, up: f64) -> (f64, State) {
    if lo == up {
        (lo, State::Fixed)
    } else if lo.is_finite() {
        (lo, State::Lower)
    } else if up.is_finite() {
        (up, State::Upper)
    } else {
        (0.0, State::Zero)
    }
}
