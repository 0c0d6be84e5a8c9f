//! Dense bounded-variable simplex on the tableau `T = B^-1 [A | -I]`.
//!
//! Rows are written as `A x - s = 0` with one logical `s_i` per row carrying
//! the row bounds, so every column has explicit bounds and the all-logical
//! basis is always available. The dual simplex is the main algorithm; bound
//! changes between solves keep the basis dual feasible, which is what a
//! branch-and-bound tree needs. A primal phase 2 cleans up after artificial
//! bounds on free columns are removed.

use std::time::Instant;

use crate::model::{MilpModel, Sense};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Dual simplex stopped because the objective passed the cutoff.
    Cutoff,
    IterationLimit,
    TimeLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Basic,
    Lower,
    Upper,
    /// Nonbasic strictly between its bounds (free columns, or after an
    /// artificial bound was dropped).
    Between,
}

pub struct LpSolver<S: Scalar> {
    m: usize,
    n: usize,
    width: usize,
    tab: Vec<S>,
    lower: Vec<S>,
    upper: Vec<S>,
    true_lower: Vec<S>,
    true_upper: Vec<S>,
    artificial: Vec<bool>,
    cost: Vec<S>,
    value: Vec<S>,
    d: Vec<S>,
    slot: Vec<Slot>,
    basis: Vec<usize>,
    rows: Vec<Vec<(usize, S)>>,
    sign: S,
    offset: S,
    big: S,
    cutoff: Option<S>,
    iterations: u64,
    since_refactor: usize,
    refactor_every: usize,
    iteration_limit: u64,
    deadline: Option<Instant>,
    pivot_row: Vec<(usize, S)>,
    pivot_col: Vec<(usize, S)>,
    ptol: S,
    dtol: S,
    pivtol: S,
    droptol: S,
}

impl<S: Scalar> LpSolver<S> {
    /// LP relaxation of `model`: binaries become `[0, 1]` columns.
    pub fn new(model: &MilpModel<S>) -> Self {
        let n = model.num_vars();
        let m = model.num_constraints();
        let width = n + m;
        let sign = match model.sense {
            Sense::Minimize => S::one(),
            Sense::Maximize => -S::one(),
        };
        let mut lower = Vec::with_capacity(width);
        let mut upper = Vec::with_capacity(width);
        let mut cost = Vec::with_capacity(width);
        for v in &model.vars {
            lower.push(v.lower);
            upper.push(v.upper);
            cost.push(sign * v.objective);
        }
        let mut rows = Vec::with_capacity(m);
        for c in &model.constraints {
            lower.push(c.lower);
            upper.push(c.upper);
            cost.push(S::zero());
            let mut r: Vec<(usize, S)> = Vec::with_capacity(c.terms.len());
            for &(v, a) in &c.terms {
                if let Some(e) = r.iter_mut().find(|e| e.0 == v.index()) {
                    e.1 += a;
                } else {
                    r.push((v.index(), a));
                }
            }
            r.retain(|e| e.1 != S::zero());
            rows.push(r);
        }
        let mut lp = Self {
            m,
            n,
            width,
            tab: vec![S::zero(); m * width],
            true_lower: lower.clone(),
            true_upper: upper.clone(),
            lower,
            upper,
            artificial: vec![false; width],
            cost,
            value: vec![S::zero(); width],
            d: vec![S::zero(); width],
            slot: vec![Slot::Lower; width],
            basis: (n..width).collect(),
            rows,
            sign,
            offset: model.objective_offset,
            big: S::lit(1e7),
            cutoff: None,
            iterations: 0,
            since_refactor: 0,
            refactor_every: 100 + m / 2,
            iteration_limit: 0,
            deadline: None,
            pivot_row: Vec::new(),
            pivot_col: Vec::new(),
            ptol: S::lit(S::PRIMAL_TOL),
            dtol: S::lit(S::DUAL_TOL),
            pivtol: S::lit(S::PIVOT_TOL),
            droptol: S::lit(S::DROP_TOL),
        };
        for j in 0..n {
            lp.value[j] = lp.resting_value(j);
            lp.slot[j] = lp.slot_of(j);
        }
        for i in 0..m {
            lp.slot[n + i] = Slot::Basic;
        }
        lp.refactor();
        lp
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn num_cols(&self) -> usize {
        self.n
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    /// Objective value in the model's own sense.
    pub fn objective(&self) -> S {
        self.sign * self.min_objective() + self.offset
    }

    /// Structural column values.
    pub fn primal(&self) -> &[S] {
        &self.value[..self.n]
    }

    /// Marginal change of the objective per unit increase of the active
    /// bound of each row; zero for rows whose logical is basic.
    pub fn row_duals(&self) -> Vec<S> {
        (0..self.m)
            .map(|i| {
                if self.slot[self.n + i] == Slot::Basic {
                    S::zero()
                } else {
                    self.sign * self.d[self.n + i]
                }
            })
            .collect()
    }

    pub fn reduced_costs(&self) -> Vec<S> {
        (0..self.n).map(|j| self.sign * self.d[j]).collect()
    }

    pub fn bounds(&self, j: usize) -> (S, S) {
        (self.true_lower[j], self.true_upper[j])
    }

    /// Stops the dual simplex once the objective is provably no better than
    /// `value` (model sense).
    pub fn set_cutoff(&mut self, value: Option<S>) {
        self.cutoff = value.map(|v| self.sign * (v - self.offset));
    }

    pub fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.deadline = deadline;
    }

    /// Caps the simplex iterations of each subsequent `solve` call; 0 means
    /// a generous size-based default.
    pub fn set_iteration_limit(&mut self, limit: u64) {
        self.iteration_limit = limit;
    }

    /// Changes the bounds of structural column `j`, keeping the basis.
    pub fn set_bounds(&mut self, j: usize, lower: S, upper: S) {
        debug_assert!(j < self.n);
        self.true_lower[j] = lower;
        self.true_upper[j] = upper;
        self.lower[j] = lower;
        self.upper[j] = upper;
        self.artificial[j] = false;
        if self.slot[j] != Slot::Basic {
            let target = if self.d[j] > self.dtol && lower.is_finite() {
                lower
            } else if self.d[j] < -self.dtol && upper.is_finite() {
                upper
            } else {
                self.resting_value_near(j, self.value[j])
            };
            self.shift(j, target);
        }
    }

    pub fn solve(&mut self) -> LpStatus {
        let limit = if self.iteration_limit > 0 {
            self.iteration_limit
        } else {
            50 * (self.width as u64 + self.m as u64) + 1000
        };
        let stop_at = self.iterations + limit;
        for _round in 0..8 {
            self.make_dual_feasible();
            let status = self.dual(stop_at);
            match status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible if self.any_artificial() => {
                    self.big = self.big * S::lit(1e3);
                    if self.big > S::lit(1e16) {
                        return LpStatus::Infeasible;
                    }
                    self.widen_artificial();
                    continue;
                }
                other => return other,
            }
            if self.drop_artificial() {
                match self.primal_phase(stop_at) {
                    LpStatus::Optimal => {}
                    other => return other,
                }
            }
            if self.max_primal_infeasibility() <= self.ptol && self.max_dual_infeasibility() <= self.dtol
            {
                if self.since_refactor > 0 && self.residual() > S::lit(1e-9) {
                    self.refactor();
                    continue;
                }
                return LpStatus::Optimal;
            }
            self.refactor();
        }
        LpStatus::IterationLimit
    }

    // ---- internals ----

    #[inline]
    fn at(&self, i: usize, j: usize) -> S {
        self.tab[i * self.width + j]
    }

    fn min_objective(&self) -> S {
        self.cost
            .iter()
            .zip(&self.value)
            .fold(S::zero(), |acc, (&c, &x)| acc + c * x)
    }

    fn slot_of(&self, j: usize) -> Slot {
        let x = self.value[j];
        if x == self.lower[j] {
            Slot::Lower
        } else if x == self.upper[j] {
            Slot::Upper
        } else {
            Slot::Between
        }
    }

    /// Value a nonbasic column takes when nothing else decides: the bound
    /// favoured by its cost, else any finite bound, else zero.
    fn resting_value(&self, j: usize) -> S {
        let (l, u) = (self.lower[j], self.upper[j]);
        let c = self.cost[j];
        if c > S::zero() && l.is_finite() {
            l
        } else if c < S::zero() && u.is_finite() {
            u
        } else if l.is_finite() {
            l
        } else if u.is_finite() {
            u
        } else {
            S::zero()
        }
    }

    fn resting_value_near(&self, j: usize, x: S) -> S {
        let (l, u) = (self.lower[j], self.upper[j]);
        match (l.is_finite(), u.is_finite()) {
            (true, true) => {
                if (x - l).abs() <= (u - x).abs() {
                    l
                } else {
                    u
                }
            }
            (true, false) => l,
            (false, true) => u,
            (false, false) => x,
        }
    }

    /// Moves nonbasic column `j` to `target`, updating the basic values.
    fn shift(&mut self, j: usize, target: S) {
        let delta = target - self.value[j];
        if delta != S::zero() {
            for i in 0..self.m {
                let a = self.at(i, j);
                if a != S::zero() {
                    let b = self.basis[i];
                    self.value[b] -= a * delta;
                }
            }
        }
        self.value[j] = target;
        self.slot[j] = self.slot_of(j);
    }

    fn any_artificial(&self) -> bool {
        self.artificial.iter().any(|&a| a)
    }

    fn widen_artificial(&mut self) {
        for j in 0..self.width {
            if self.artificial[j] {
                if !self.true_lower[j].is_finite() {
                    self.lower[j] = -self.big;
                }
                if !self.true_upper[j].is_finite() {
                    self.upper[j] = self.big;
                }
                if self.slot[j] != Slot::Basic {
                    let t = if self.slot[j] == Slot::Upper {
                        self.upper[j]
                    } else {
                        self.lower[j]
                    };
                    self.shift(j, t);
                }
            }
        }
    }

    /// Restores infinite bounds; returns true when some nonbasic column was
    /// left off its bounds and a primal pass is needed.
    fn drop_artificial(&mut self) -> bool {
        let mut moved = false;
        for j in 0..self.width {
            if self.artificial[j] {
                self.artificial[j] = false;
                self.lower[j] = self.true_lower[j];
                self.upper[j] = self.true_upper[j];
                if self.slot[j] != Slot::Basic {
                    self.slot[j] = self.slot_of(j);
                    if self.slot[j] == Slot::Between {
                        moved = true;
                    }
                }
            }
        }
        moved
    }

    /// Puts every nonbasic column on the bound its reduced cost asks for,
    /// introducing artificial bounds where that bound is infinite.
    fn make_dual_feasible(&mut self) {
        for j in 0..self.width {
            if self.slot[j] == Slot::Basic {
                continue;
            }
            let dj = self.d[j];
            let (l, u) = (self.lower[j], self.upper[j]);
            if l == u {
                if self.value[j] != l {
                    self.shift(j, l);
                }
                continue;
            }
            let want = if dj > self.dtol {
                Slot::Lower
            } else if dj < -self.dtol {
                Slot::Upper
            } else {
                continue;
            };
            if self.slot[j] == want {
                continue;
            }
            let target = match want {
                Slot::Lower => {
                    if !l.is_finite() {
                        self.artificial[j] = true;
                        self.lower[j] = (-self.big).min(self.value[j] - self.big);
                    }
                    self.lower[j]
                }
                _ => {
                    if !u.is_finite() {
                        self.artificial[j] = true;
                        self.upper[j] = self.big.max(self.value[j] + self.big);
                    }
                    self.upper[j]
                }
            };
            self.shift(j, target);
        }
    }

    fn infeasibility(&self, i: usize) -> S {
        let b = self.basis[i];
        let x = self.value[b];
        if x < self.lower[b] - self.ptol {
            self.lower[b] - x
        } else if x > self.upper[b] + self.ptol {
            x - self.upper[b]
        } else {
            S::zero()
        }
    }

    fn max_primal_infeasibility(&self) -> S {
        (0..self.m)
            .map(|i| self.infeasibility(i))
            .fold(S::zero(), S::max)
    }

    fn max_dual_infeasibility(&self) -> S {
        let mut worst = S::zero();
        for j in 0..self.width {
            let dj = self.d[j];
            let bad = match self.slot[j] {
                Slot::Basic => S::zero(),
                _ if self.lower[j] == self.upper[j] => S::zero(),
                Slot::Lower => (-dj).max(S::zero()),
                Slot::Upper => dj.max(S::zero()),
                Slot::Between => dj.abs(),
            };
            worst = worst.max(bad);
        }
        worst
    }

    /// Largest row residual `|a_i x - s_i|` of the current point.
    fn residual(&self) -> S {
        let mut worst = S::zero();
        for (i, row) in self.rows.iter().enumerate() {
            let mut act = S::zero();
            let mut scale = S::one();
            for &(j, a) in row {
                let t = a * self.value[j];
                act += t;
                scale = scale.max(t.abs());
            }
            worst = worst.max((act - self.value[self.n + i]).abs() / scale);
        }
        worst
    }

    fn out_of_budget(&self, stop_at: u64) -> Option<LpStatus> {
        if self.iterations >= stop_at {
            return Some(LpStatus::IterationLimit);
        }
        if self.iterations % 64 == 0 {
            if let Some(dl) = self.deadline {
                if Instant::now() >= dl {
                    return Some(LpStatus::TimeLimit);
                }
            }
        }
        None
    }

    /// Pivots column `q` into the basis at row `r`. Updates the tableau, the
    /// reduced costs and the basis map; values are the caller's business.
    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.width;
        let piv = self.tab[r * w + q];
        let inv = S::one() / piv;
        self.pivot_row.clear();
        {
            let row = &mut self.tab[r * w..(r + 1) * w];
            for (j, a) in row.iter_mut().enumerate() {
                if *a != S::zero() {
                    *a *= inv;
                    self.pivot_row.push((j, *a));
                }
            }
            row[q] = S::one();
        }
        for e in self.pivot_row.iter_mut() {
            if e.0 == q {
                e.1 = S::one();
            }
        }
        self.pivot_col.clear();
        for i in 0..self.m {
            if i != r {
                let a = self.tab[i * w + q];
                if a != S::zero() {
                    self.pivot_col.push((i, a));
                }
            }
        }
        let droptol = self.droptol;
        for &(i, f) in &self.pivot_col {
            let row = &mut self.tab[i * w..(i + 1) * w];
            for &(j, a) in &self.pivot_row {
                let v = row[j] - f * a;
                row[j] = if v.abs() < droptol { S::zero() } else { v };
            }
            row[q] = S::zero();
        }
        let dq = self.d[q];
        if dq != S::zero() {
            for &(j, a) in &self.pivot_row {
                self.d[j] -= dq * a;
            }
        }
        self.d[q] = S::zero();
        self.basis[r] = q;
        self.since_refactor += 1;
    }

    /// Moves nonbasic `q` by `delta`, pivots it in at row `r`, and parks the
    /// leaving column at `bound` with slot `leave_slot`.
    fn step(&mut self, r: usize, q: usize, delta: S, bound: S, leave_slot: Slot) {
        let leaving = self.basis[r];
        if delta != S::zero() {
            for i in 0..self.m {
                let a = self.at(i, q);
                if a != S::zero() {
                    let b = self.basis[i];
                    self.value[b] -= a * delta;
                }
            }
            self.value[q] += delta;
        }
        self.pivot(r, q);
        self.value[leaving] = bound;
        self.slot[leaving] = leave_slot;
        self.slot[q] = Slot::Basic;
        self.iterations += 1;
    }

    fn dual(&mut self, stop_at: u64) -> LpStatus {
        let mut degenerate = 0usize;
        let mut bland = false;
        let mut retried = false;
        loop {
            if let Some(s) = self.out_of_budget(stop_at) {
                return s;
            }
            if self.since_refactor >= self.refactor_every {
                self.refactor();
            }
            if let Some(cut) = self.cutoff {
                if !self.any_artificial() && self.min_objective() > cut + self.dtol * (S::one() + cut.abs())
                {
                    return LpStatus::Cutoff;
                }
            }
            // Leaving row: largest bound violation, or lowest column index
            // under the anti-cycling rule.
            let mut r = usize::MAX;
            let mut best = S::zero();
            for i in 0..self.m {
                let inf = self.infeasibility(i);
                if inf > S::zero() {
                    let better = if bland {
                        r == usize::MAX || self.basis[i] < self.basis[r]
                    } else {
                        inf > best
                    };
                    if better {
                        r = i;
                        best = inf;
                    }
                }
            }
            if r == usize::MAX {
                return LpStatus::Optimal;
            }
            let b = self.basis[r];
            let (bound, up, leave_slot) = if self.value[b] < self.lower[b] {
                (self.lower[b], S::one(), Slot::Lower)
            } else {
                (self.upper[b], -S::one(), Slot::Upper)
            };
            let Some(q) = self.dual_ratio(r, up, bland) else {
                if !retried && self.since_refactor > 0 {
                    retried = true;
                    self.refactor();
                    continue;
                }
                return LpStatus::Infeasible;
            };
            retried = false;
            let alpha = self.at(r, q);
            let delta = (self.value[b] - bound) / alpha;
            let dq = self.d[q];
            if dq.abs() <= self.dtol {
                degenerate += 1;
                if degenerate > 50 + self.m {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }
            self.step(r, q, delta, bound, leave_slot);
        }
    }

    /// Harris two-pass dual ratio test on row `r`; `up` is +1 when the
    /// leaving basic must increase.
    fn dual_ratio(&self, r: usize, up: S, bland: bool) -> Option<usize> {
        let w = self.width;
        let row = &self.tab[r * w..(r + 1) * w];
        let mut cands: Vec<(usize, S, S)> = Vec::new();
        for (j, &a) in row.iter().enumerate() {
            if a.abs() < self.pivtol {
                continue;
            }
            let dj = self.d[j];
            let slack = match self.slot[j] {
                Slot::Basic => continue,
                _ if self.lower[j] == self.upper[j] => continue,
                Slot::Lower if a * up < S::zero() => dj,
                Slot::Upper if a * up > S::zero() => -dj,
                Slot::Between => dj.abs(),
                _ => continue,
            };
            cands.push((j, slack.max(S::zero()), a.abs()));
        }
        if cands.is_empty() {
            return None;
        }
        if bland {
            let mut best: Option<(usize, S)> = None;
            for &(j, s, a) in &cands {
                let ratio = s / a;
                if best.map_or(true, |(_, br)| ratio < br) {
                    best = Some((j, ratio));
                }
            }
            return best.map(|(j, _)| j);
        }
        let theta = cands
            .iter()
            .map(|&(_, s, a)| (s + self.dtol) / a)
            .fold(S::infinity(), S::min);
        let mut pick: Option<(usize, S)> = None;
        for &(j, s, a) in &cands {
            if s / a <= theta && pick.map_or(true, |(_, pa)| a > pa) {
                pick = Some((j, a));
            }
        }
        pick.map(|(j, _)| j)
    }

    fn primal_phase(&mut self, stop_at: u64) -> LpStatus {
        let mut degenerate = 0usize;
        let mut bland = false;
        loop {
            if let Some(s) = self.out_of_budget(stop_at) {
                return s;
            }
            if self.since_refactor >= self.refactor_every {
                self.refactor();
                if self.max_primal_infeasibility() > self.ptol {
                    return LpStatus::Optimal;
                }
            }
            // Entering column: most attractive reduced cost.
            let mut q = usize::MAX;
            let mut best = S::zero();
            let mut dir = S::zero();
            for j in 0..self.width {
                if self.lower[j] == self.upper[j] {
                    continue;
                }
                let dj = self.d[j];
                let (gain, dj_dir) = match self.slot[j] {
                    Slot::Basic => continue,
                    Slot::Lower if dj < -self.dtol => (-dj, S::one()),
                    Slot::Upper if dj > self.dtol => (dj, -S::one()),
                    Slot::Between if dj.abs() > self.dtol => {
                        (dj.abs(), if dj < S::zero() { S::one() } else { -S::one() })
                    }
                    _ => continue,
                };
                if (bland && q == usize::MAX) || (!bland && gain > best) {
                    q = j;
                    best = gain;
                    dir = dj_dir;
                }
            }
            if q == usize::MAX {
                return LpStatus::Optimal;
            }
            // Ratio test over the basic columns, Harris style.
            let mut theta = S::infinity();
            let mut limits: Vec<(usize, S, S)> = Vec::new();
            for i in 0..self.m {
                let a = self.at(i, q);
                if a.abs() < self.pivtol {
                    continue;
                }
                let rate = -a * dir;
                let b = self.basis[i];
                let x = self.value[b];
                let room = if rate < S::zero() {
                    if !self.lower[b].is_finite() {
                        continue;
                    }
                    x - self.lower[b]
                } else {
                    if !self.upper[b].is_finite() {
                        continue;
                    }
                    self.upper[b] - x
                };
                let room = room.max(S::zero());
                theta = theta.min((room + self.ptol) / rate.abs());
                limits.push((i, room / rate.abs(), rate.abs()));
            }
            let flip = if self.lower[q].is_finite() && self.upper[q].is_finite() {
                self.upper[q] - self.lower[q]
            } else {
                S::infinity()
            };
            let mut pick: Option<(usize, S, S)> = None;
            for &(i, t, a) in &limits {
                if bland {
                    if pick.map_or(true, |(_, pt, _)| t < pt) {
                        pick = Some((i, t, a));
                    }
                } else if t <= theta && pick.map_or(true, |(_, _, pa)| a > pa) {
                    pick = Some((i, t, a));
                }
            }
            match pick {
                Some((_, t, _)) if flip <= t => {
                    self.bound_flip(q, dir);
                    degenerate = 0;
                }
                None if flip.is_finite() => {
                    self.bound_flip(q, dir);
                    degenerate = 0;
                }
                None => return LpStatus::Unbounded,
                Some((r, t, _)) => {
                    let b = self.basis[r];
                    let rate = -self.at(r, q) * dir;
                    let (bound, leave_slot) = if rate < S::zero() {
                        (self.lower[b], Slot::Lower)
                    } else {
                        (self.upper[b], Slot::Upper)
                    };
                    if t <= self.ptol {
                        degenerate += 1;
                        if degenerate > 50 + self.m {
                            bland = true;
                        }
                    } else {
                        degenerate = 0;
                        bland = false;
                    }
                    self.step(r, q, dir * t, bound, leave_slot);
                }
            }
        }
    }

    fn bound_flip(&mut self, q: usize, dir: S) {
        let target = if dir > S::zero() {
            self.upper[q]
        } else {
            self.lower[q]
        };
        self.shift(q, target);
        self.iterations += 1;
    }

    /// Rebuilds the tableau for the current basis from the original rows and
    /// recomputes values and reduced costs. Columns that turn out dependent
    /// are dropped from the basis in favour of a logical.
    fn refactor(&mut self) {
        let w = self.width;
        let (m, n) = (self.m, self.n);
        let target = self.basis.clone();
        let mut in_target = vec![false; w];
        for &b in &target {
            in_target[b] = true;
        }
        self.tab.iter_mut().for_each(|v| *v = S::zero());
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                self.tab[i * w + j] = -a;
            }
            self.tab[i * w + n + i] = S::one();
        }
        self.basis = (n..w).collect();
        self.d.copy_from_slice(&self.cost);
        let mut structurals: Vec<usize> = target.iter().copied().filter(|&b| b < n).collect();
        structurals.sort_unstable();
        for j in structurals {
            let mut best_row = usize::MAX;
            let mut best = S::zero();
            for i in 0..m {
                let cur = self.basis[i];
                if cur >= n && !in_target[cur] {
                    let a = self.tab[i * w + j].abs();
                    if a > best {
                        best = a;
                        best_row = i;
                    }
                }
            }
            if best_row == usize::MAX || best < S::lit(1e-7) {
                in_target[j] = false;
                continue;
            }
            self.pivot(best_row, j);
        }
        for j in 0..w {
            if self.slot[j] == Slot::Basic && !self.basis.contains(&j) {
                let x = self.value[j].max(self.lower[j]).min(self.upper[j]);
                let t = self.resting_value_near(j, x);
                self.value[j] = t;
                self.slot[j] = self.slot_of(j);
            }
        }
        for &b in &self.basis {
            self.slot[b] = Slot::Basic;
        }
        let nonbasic: Vec<(usize, S)> = (0..w)
            .filter(|&j| self.slot[j] != Slot::Basic && self.value[j] != S::zero())
            .map(|j| (j, self.value[j]))
            .collect();
        for i in 0..m {
            let row = &self.tab[i * w..(i + 1) * w];
            let x = nonbasic
                .iter()
                .fold(S::zero(), |acc, &(j, v)| acc - row[j] * v);
            let b = self.basis[i];
            self.value[b] = x;
        }
        self.since_refactor = 0;
    }
}
