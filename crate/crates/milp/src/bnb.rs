//! Branch-and-bound over the binaries of a [`MilpModel`].
//!
//! One warm [`LpSolver`] is shared by the whole tree; moving between nodes
//! only changes binary bounds, so every node LP starts dual feasible. Both
//! children are solved as soon as their parent is expanded and are queued
//! with their own LP bound. Before the first incumbent the deepest node is
//! expanded next (a dive). Afterwards the search plunges: it follows the
//! preferred child of the node just expanded until that path is pruned,
//! then resumes from the node with the best bound.
//!
//! Branching candidates are binaries whose complementarity pair is
//! violated by the LP point. They are ranked by pseudo-costs learned from
//! the children already solved (the most violated pair wins until there is
//! history); binaries without a pair fall back to most-fractional.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::error::MilpError;
use crate::model::{MilpModel, Sense};
use crate::scalar::Scalar;
use crate::simplex::{LpSolver, LpStatus};

/// Relative gap the search treats as optimal unless told otherwise.
pub const DEFAULT_GAP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    /// Gap closed to within the default tolerance.
    Optimal,
    /// Gap closed to within a user tolerance looser than the default.
    GapLimit,
    TimeLimit,
    NodeLimit,
    Infeasible,
    Unbounded,
}

impl SolveStatus {
    pub fn is_proven(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::GapLimit)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverLimits {
    pub time_limit: Option<Duration>,
    pub gap_tolerance: f64,
    pub node_limit: Option<u64>,
}

impl Default for SolverLimits {
    fn default() -> Self {
        Self {
            time_limit: None,
            gap_tolerance: DEFAULT_GAP,
            node_limit: None,
        }
    }
}

impl SolverLimits {
    pub fn with_time_limit(mut self, seconds: f64) -> Self {
        self.time_limit = Some(Duration::from_secs_f64(seconds));
        self
    }

    pub fn with_node_limit(mut self, nodes: u64) -> Self {
        self.node_limit = Some(nodes);
        self
    }

    pub fn with_gap(mut self, gap: f64) -> Self {
        self.gap_tolerance = gap;
        self
    }
}

/// Snapshot of the search, recorded whenever the incumbent changes and
/// periodically otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub nodes: u64,
    pub bound: f64,
    pub incumbent: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub nodes: u64,
    pub lp_iterations: u64,
    pub incumbents: u32,
    pub wall_time: f64,
    pub trace: Vec<Progress>,
}

#[derive(Clone, Debug)]
pub struct SolveResult<S> {
    pub status: SolveStatus,
    pub objective: Option<S>,
    pub values: Option<Vec<S>>,
    pub best_bound: S,
    pub gap: Option<S>,
    pub stats: SolveStats,
}

/// Domain hooks into the search.
pub trait IncumbentHook<S: Scalar> {
    /// Last check on a candidate that already satisfies the model rows. May
    /// return a polished copy; `None` rejects it.
    fn verify(&mut self, _model: &MilpModel<S>, values: &[S]) -> Option<Vec<S>> {
        Some(values.to_vec())
    }

    /// Full candidate built from a node LP point, checked by the engine.
    fn propose(&mut self, _model: &MilpModel<S>, _lp_values: &[S]) -> Option<Vec<S>> {
        None
    }
}

/// Hook that accepts every row-feasible candidate and proposes nothing.
pub struct NoHook;

impl<S: Scalar> IncumbentHook<S> for NoHook {}

struct Fix {
    var: usize,
    up: bool,
    parent: Option<Rc<Fix>>,
}

struct Open<S> {
    score: S,
    depth: u32,
    fixes: Option<Rc<Fix>>,
    branch: usize,
    prefer_up: bool,
    /// LP value of the branching binary.
    value: S,
}

#[derive(Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

type HeapEntry = (Key, Key, Reverse<usize>);

enum Verdict<S> {
    Branch { var: usize, prefer_up: bool },
    /// The node's LP point repaired to this integral candidate.
    Integral(Vec<S>),
    /// Nothing left to branch on and no acceptable candidate.
    Dead,
}

struct Search<'a, S: Scalar, H: IncumbentHook<S> + ?Sized> {
    model: &'a MilpModel<S>,
    hook: &'a mut H,
    lp: LpSolver<S>,
    /// `+1` for maximize, `-1` for minimize: scores are always maximized.
    dir: S,
    binaries: Vec<usize>,
    pair_of: Vec<Option<usize>>,
    fixed: Vec<Option<bool>>,
    incumbent: Option<(S, Vec<S>)>,
    gap_tol: S,
    feas_tol: S,
    stats: SolveStats,
    started: Instant,
    deadline: Option<Instant>,
    /// Best score among nodes closed by the incumbent; part of the bound.
    pruned: S,
    /// Best score among nodes that could not be explored.
    unexplored: S,
    new_incumbent: bool,
    /// Per variable, summed unit score loss and count for the down and up
    /// branch.
    pseudo: Vec<[(S, u32); 2]>,
}

pub fn solve<S: Scalar>(model: &MilpModel<S>, limits: &SolverLimits) -> Result<SolveResult<S>, MilpError> {
    solve_with(model, limits, &mut NoHook, None)
}

/// Runs the search with domain hooks and an optional warm-start point.
/// A warm start that fails the row, integrality or complementarity checks
/// is dropped with a warning and the search proceeds unseeded.
pub fn solve_with<S: Scalar, H: IncumbentHook<S> + ?Sized>(
    model: &MilpModel<S>,
    limits: &SolverLimits,
    hook: &mut H,
    warm_start: Option<&[S]>,
) -> Result<SolveResult<S>, MilpError> {
    model.validate()?;
    let started = Instant::now();
    let deadline = limits.time_limit.map(|t| started + t);
    let mut pair_of = vec![None; model.num_vars()];
    for (k, p) in model.pairs.iter().enumerate() {
        pair_of[p.binary.index()] = Some(k);
    }
    let mut lp = LpSolver::new(model);
    lp.set_deadline(deadline);
    let mut search = Search {
        model,
        hook,
        lp,
        dir: match model.sense {
            Sense::Maximize => S::one(),
            Sense::Minimize => -S::one(),
        },
        binaries: model.binaries().map(|v| v.index()).collect(),
        pair_of,
        fixed: vec![None; model.num_vars()],
        incumbent: None,
        gap_tol: S::lit(limits.gap_tolerance.max(0.0)),
        feas_tol: S::lit(1e-7),
        stats: SolveStats::default(),
        started,
        deadline,
        pruned: S::neg_infinity(),
        unexplored: S::neg_infinity(),
        new_incumbent: false,
        pseudo: vec![[(S::zero(), 0); 2]; model.num_vars()],
    };
    if let Some(w) = warm_start {
        match search.check_warm(w) {
            Ok(()) => {
                let w = w.to_vec();
                if let Some(v) = search.hook.verify(model, &w) {
                    search.offer(v);
                } else {
                    warn!("warm start rejected by verification hook");
                }
            }
            Err(e) => warn!("{e}"),
        }
    }
    Ok(search.run(limits))
}

impl<'a, S: Scalar, H: IncumbentHook<S> + ?Sized> Search<'a, S, H> {
    fn check_warm(&self, w: &[S]) -> Result<(), MilpError> {
        if w.len() != self.model.num_vars() {
            return Err(MilpError::WarmStart(format!(
                "expected {} values, got {}",
                self.model.num_vars(),
                w.len()
            )));
        }
        if let Some(v) = self.model.worst_violation(w, self.feas_tol) {
            return Err(MilpError::WarmStart(v.to_string()));
        }
        let res = self.model.complementarity_residual(w);
        if res > self.feas_tol {
            return Err(MilpError::WarmStart(format!(
                "complementarity residual {res} above tolerance"
            )));
        }
        Ok(())
    }

    fn score(&self, objective: S) -> S {
        self.dir * objective
    }

    fn incumbent_score(&self) -> Option<S> {
        self.incumbent.as_ref().map(|(s, _)| *s)
    }

    /// Scores at or below this are not worth exploring.
    fn prune_level(&self) -> Option<S> {
        self.incumbent_score()
            .map(|s| s + self.gap_tol * S::one().max(s.abs()))
    }

    fn gap(&self, bound: S) -> Option<S> {
        self.incumbent_score()
            .map(|s| ((bound - s) / S::one().max(s.abs())).max(S::zero()))
    }

    /// Takes `values` as incumbent if it is row feasible and better.
    fn offer(&mut self, values: Vec<S>) -> bool {
        if self.model.worst_violation(&values, self.feas_tol).is_some() {
            return false;
        }
        let score = self.score(self.model.objective_value(&values));
        if self.incumbent_score().map_or(true, |s| score > s) {
            debug!("incumbent {} at node {}", (self.dir * score).as_f64(), self.stats.nodes);
            self.incumbent = Some((score, values));
            self.stats.incumbents += 1;
            self.new_incumbent = true;
            self.lp.set_cutoff(Some(self.dir * score));
            return true;
        }
        false
    }

    fn trace(&mut self, bound: S) {
        self.stats.trace.push(Progress {
            nodes: self.stats.nodes,
            bound: (self.dir * bound).as_f64(),
            incumbent: self.incumbent_score().map(|s| (self.dir * s).as_f64()),
        });
    }

    fn apply_fixes(&mut self, fixes: &Option<Rc<Fix>>) {
        let mut want: Vec<Option<bool>> = vec![None; self.fixed.len()];
        let mut cur = fixes.as_ref();
        while let Some(f) = cur {
            want[f.var] = Some(f.up);
            cur = f.parent.as_ref();
        }
        for &b in &self.binaries {
            if want[b] != self.fixed[b] {
                let var = &self.model.vars[b];
                let (l, u) = match want[b] {
                    Some(true) => (S::one(), S::one()),
                    Some(false) => (S::zero(), S::zero()),
                    None => (var.lower, var.upper),
                };
                self.lp.set_bounds(b, l, u);
                self.fixed[b] = want[b];
            }
        }
    }

    /// Solves the node LP under the current fixings, retrying from a cold
    /// solver if the warm one runs into numerical trouble.
    fn solve_node_lp(&mut self) -> LpStatus {
        let before = self.lp.iterations();
        let mut status = self.lp.solve();
        self.stats.lp_iterations += self.lp.iterations() - before;
        if status == LpStatus::IterationLimit {
            warn!("node LP hit its iteration limit, rebuilding the LP");
            let mut fresh = LpSolver::new(self.model);
            fresh.set_deadline(self.deadline);
            fresh.set_cutoff(self.incumbent_score().map(|c| self.dir * c));
            for &b in &self.binaries {
                if let Some(up) = self.fixed[b] {
                    let v = if up { S::one() } else { S::zero() };
                    fresh.set_bounds(b, v, v);
                }
            }
            status = fresh.solve();
            self.stats.lp_iterations += fresh.iterations();
            self.lp = fresh;
        }
        status
    }

    fn classify(&mut self, x: &[S]) -> Verdict<S> {
        let tiny = S::lit(1e-9);
        let mut best: Option<(usize, S)> = None;
        let avg = self.average_pseudo();
        for &b in &self.binaries {
            if self.fixed[b].is_some() {
                continue;
            }
            if let Some(k) = self.pair_of[b] {
                let p = &self.model.pairs[k];
                let on = p.on.eval(x) / p.on_scale;
                let off = p.off.eval(x) / p.off_scale;
                if on > tiny && off > tiny {
                    let v = match avg {
                        Some(avg) => self.branch_score(b, x[b], avg) * (on * off).sqrt(),
                        None => on * off,
                    };
                    if best.map_or(true, |(_, bv)| v > bv) {
                        best = Some((b, v));
                    }
                }
            }
        }
        if let Some((b, _)) = best {
            let p = &self.model.pairs[self.pair_of[b].unwrap()];
            let prefer_up = p.on.eval(x) / p.on_scale >= p.off.eval(x) / p.off_scale;
            return Verdict::Branch { var: b, prefer_up };
        }
        // All pairs hold: snap each binary to the side its pair allows.
        let mut cand = x.to_vec();
        for &b in &self.binaries {
            cand[b] = match (self.fixed[b], self.pair_of[b]) {
                (Some(up), _) => {
                    if up {
                        S::one()
                    } else {
                        S::zero()
                    }
                }
                (None, Some(k)) => self.model.pairs[k].implied_binary(x),
                (None, None) => x[b].round(),
            };
        }
        let lp_score = self.score(self.model.objective_value(x));
        let cand_ok = self.model.worst_violation(&cand, self.feas_tol).is_none()
            && self.score(self.model.objective_value(&cand)) >= lp_score - self.feas_tol * S::one().max(lp_score.abs());
        if cand_ok {
            return Verdict::Integral(cand);
        }
        let half = S::lit(0.5);
        let mut frac: Option<(usize, S)> = None;
        for &b in &self.binaries {
            if self.fixed[b].is_none() {
                let f = (x[b] - x[b].floor()).min(x[b].ceil() - x[b]);
                if f > tiny && frac.map_or(true, |(_, bf)| f > bf) {
                    frac = Some((b, f));
                }
            }
        }
        match frac {
            Some((b, _)) => Verdict::Branch {
                var: b,
                prefer_up: x[b] >= half,
            },
            None => {
                if self.model.worst_violation(x, self.feas_tol).is_none() {
                    Verdict::Integral(x.to_vec())
                } else {
                    Verdict::Dead
                }
            }
        }
    }

    /// Mean unit loss per direction over variables with history.
    fn average_pseudo(&self) -> Option<[S; 2]> {
        let mut out = [S::zero(); 2];
        for d in 0..2 {
            let (sum, n) = self
                .pseudo
                .iter()
                .filter(|p| p[d].1 > 0)
                .fold((S::zero(), 0u32), |(s, n), p| (s + p[d].0 / S::lit(p[d].1 as f64), n + 1));
            if n == 0 {
                return None;
            }
            out[d] = sum / S::lit(n as f64);
        }
        Some(out)
    }

    /// Product of the estimated score losses of both children.
    fn branch_score(&self, var: usize, value: S, avg: [S; 2]) -> S {
        let unit = |d: usize| {
            let (sum, n) = self.pseudo[var][d];
            if n > 0 {
                sum / S::lit(n as f64)
            } else {
                avg[d]
            }
        };
        let eps = S::lit(1e-6);
        let down = unit(0) * value;
        let up = unit(1) * (S::one() - value);
        down.max(eps) * up.max(eps)
    }

    /// Records the score loss of one child of a node branched on `var`.
    fn learn(&mut self, var: usize, value: S, up: bool, loss: S) {
        let dist = if up { S::one() - value } else { value };
        if dist <= S::lit(1e-9) || !loss.is_finite() {
            return;
        }
        let slot = &mut self.pseudo[var][up as usize];
        slot.0 += loss.max(S::zero()) / dist;
        slot.1 += 1;
    }

    /// Solves the LP of a freshly created node and either closes it or
    /// returns it ready for the queue.
    fn evaluate(&mut self, fixes: Option<Rc<Fix>>, depth: u32, parent_score: S) -> Result<Option<Open<S>>, LpStatus> {
        self.apply_fixes(&fixes);
        self.stats.nodes += 1;
        match self.solve_node_lp() {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Ok(None),
            LpStatus::Cutoff => {
                // The LP cutoff sits at the incumbent itself.
                return Ok(None);
            }
            other => return Err(other),
        }
        let score = self.score(self.lp.objective()).min(parent_score);
        let x = self.lp.primal().to_vec();
        if let Some(cand) = self.hook.propose(self.model, &x) {
            if cand.len() == x.len() && self.model.worst_violation(&cand, self.feas_tol).is_none() {
                if let Some(v) = self.hook.verify(self.model, &cand) {
                    self.offer(v);
                }
            }
        }
        if self.prune_level().map_or(false, |p| score <= p) {
            self.pruned = self.pruned.max(score);
            return Ok(None);
        }
        let open = |var: usize, prefer_up: bool, fixes| {
            Ok(Some(Open {
                score,
                depth,
                fixes,
                branch: var,
                prefer_up,
                value: x[var],
            }))
        };
        match self.classify(&x) {
            Verdict::Branch { var, prefer_up } => open(var, prefer_up, fixes),
            Verdict::Integral(cand) => match self.hook.verify(self.model, &cand) {
                Some(v) => {
                    self.offer(v);
                    if self.prune_level().map_or(false, |p| score <= p) {
                        self.pruned = self.pruned.max(score);
                        Ok(None)
                    } else {
                        // The repaired point fell short of the LP bound; the
                        // node stays open on any free binary.
                        match self.first_free() {
                            Some(var) => open(var, cand[var] >= S::lit(0.5), fixes),
                            None => {
                                self.unexplored = self.unexplored.max(score);
                                Ok(None)
                            }
                        }
                    }
                }
                None => match self.first_free() {
                    Some(var) => open(var, cand[var] >= S::lit(0.5), fixes),
                    None => {
                        warn!("integral node rejected by verification");
                        Ok(None)
                    }
                },
            },
            Verdict::Dead => {
                warn!("node with no branching candidate and no feasible repair dropped");
                self.unexplored = self.unexplored.max(score);
                Ok(None)
            }
        }
    }

    fn first_free(&self) -> Option<usize> {
        self.binaries.iter().copied().find(|&b| self.fixed[b].is_none())
    }

    fn open_bound(&self, heap: &BinaryHeap<HeapEntry>, slab: &[Option<Open<S>>]) -> S {
        let open = heap
            .iter()
            .filter_map(|(_, _, Reverse(i))| slab[*i].as_ref())
            .map(|n| n.score)
            .fold(S::neg_infinity(), S::max);
        let inc = self.incumbent_score().unwrap_or(S::neg_infinity());
        open.max(self.pruned).max(self.unexplored).max(inc)
    }

    fn run(mut self, limits: &SolverLimits) -> SolveResult<S> {
        if let Some(s) = self.incumbent_score() {
            self.lp.set_cutoff(Some(self.dir * s));
        }
        let mut slab: Vec<Option<Open<S>>> = Vec::new();
        let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();
        let mut diving = self.incumbent.is_none();
        let mut stopped: Option<SolveStatus> = None;
        let mut plunge: Option<usize> = None;

        let key = |node: &Open<S>, diving: bool| {
            if diving {
                (Key(node.depth as f64), Key(node.score.as_f64()))
            } else {
                (Key(node.score.as_f64()), Key(node.depth as f64))
            }
        };

        match self.evaluate(None, 0, S::infinity()) {
            Ok(Some(root)) => {
                let (a, b) = key(&root, diving);
                slab.push(Some(root));
                heap.push((a, b, Reverse(0)));
            }
            Ok(None) => {}
            Err(LpStatus::Unbounded) => return self.finish(SolveStatus::Unbounded, S::infinity()),
            Err(LpStatus::TimeLimit) => {
                stopped = Some(SolveStatus::TimeLimit);
                self.unexplored = S::infinity();
            }
            Err(_) => {
                warn!("root LP failed numerically");
                self.unexplored = S::infinity();
            }
        }
        let b = self.open_bound(&heap, &slab);
        self.trace(b);
        self.new_incumbent = false;

        let mut last_log = Instant::now();
        while stopped.is_none() {
            if diving && self.incumbent.is_some() {
                diving = false;
                let entries: Vec<usize> = heap.drain().map(|(_, _, Reverse(i))| i).collect();
                for i in entries {
                    if let Some(n) = &slab[i] {
                        let (a, b) = key(n, false);
                        heap.push((a, b, Reverse(i)));
                    }
                }
            }
            let plunged = plunge.take().filter(|&i| slab[i].is_some());
            let idx = match plunged {
                Some(i) => i,
                None => match heap.pop() {
                    Some((_, _, Reverse(i))) => i,
                    None => break,
                },
            };
            let Some(node) = slab[idx].take() else { continue };
            if self.prune_level().map_or(false, |p| node.score <= p) {
                self.pruned = self.pruned.max(node.score);
                continue;
            }
            if !diving && plunged.is_none() && self.gap(node.score).map_or(false, |g| g <= self.gap_tol) {
                // Best-first: this node carries the global bound.
                self.unexplored = self.unexplored.max(node.score);
                break;
            }
            let out_of_time = self.deadline.map_or(false, |d| Instant::now() >= d);
            let out_of_nodes = limits.node_limit.map_or(false, |l| self.stats.nodes >= l);
            if out_of_time || out_of_nodes {
                stopped = Some(if out_of_time {
                    SolveStatus::TimeLimit
                } else {
                    SolveStatus::NodeLimit
                });
                self.unexplored = self.unexplored.max(node.score);
                break;
            }
            let order = if node.prefer_up { [true, false] } else { [false, true] };
            for up in order {
                let fixes = Some(Rc::new(Fix {
                    var: node.branch,
                    up,
                    parent: node.fixes.clone(),
                }));
                match self.evaluate(fixes, node.depth + 1, node.score) {
                    Ok(Some(child)) => {
                        self.learn(node.branch, node.value, up, node.score - child.score);
                        let (a, b) = key(&child, diving);
                        slab.push(Some(child));
                        heap.push((a, b, Reverse(slab.len() - 1)));
                        if !diving && plunge.is_none() {
                            plunge = Some(slab.len() - 1);
                        }
                    }
                    Ok(None) => {
                        if let Some(inc) = self.incumbent_score() {
                            self.learn(node.branch, node.value, up, node.score - inc);
                        }
                    }
                    Err(LpStatus::TimeLimit) => {
                        stopped = Some(SolveStatus::TimeLimit);
                        self.unexplored = self.unexplored.max(node.score);
                        break;
                    }
                    Err(_) => {
                        warn!("node LP failed numerically; keeping its parent bound");
                        self.unexplored = self.unexplored.max(node.score);
                    }
                }
            }
            let log_due = last_log.elapsed() >= Duration::from_secs(5);
            if self.new_incumbent || self.stats.nodes % 256 == 0 || log_due {
                self.new_incumbent = false;
                let bound = self.open_bound(&heap, &slab);
                self.trace(bound);
                if log_due {
                    last_log = Instant::now();
                    info!(
                        "node {} bound {:.6} incumbent {} gap {}",
                        self.stats.nodes,
                        (self.dir * bound).as_f64(),
                        self.incumbent_score()
                            .map_or("-".to_string(), |s| format!("{:.6}", (self.dir * s).as_f64())),
                        self.gap(bound)
                            .map_or("-".to_string(), |g| format!("{:.3e}", g.as_f64()))
                    );
                }
            }
        }
        let bound = self.open_bound(&heap, &slab);
        let status = match stopped {
            Some(s) => s,
            None if self.incumbent.is_none() => SolveStatus::Infeasible,
            None => {
                if self.gap(bound).unwrap_or(S::zero()) <= S::lit(DEFAULT_GAP * (1.0 + 1e-9)) {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::GapLimit
                }
            }
        };
        self.finish(status, bound)
    }

    fn finish(mut self, status: SolveStatus, bound: S) -> SolveResult<S> {
        self.stats.wall_time = self.started.elapsed().as_secs_f64();
        let final_bound = if status == SolveStatus::Infeasible {
            S::neg_infinity()
        } else {
            bound
        };
        self.trace(final_bound);
        let gap = self.gap(final_bound);
        let dir = self.dir;
        let (objective, values) = match self.incumbent.take() {
            Some((s, v)) => (Some(dir * s), Some(v)),
            None => (None, None),
        };
        SolveResult {
            status,
            objective,
            values,
            best_bound: dir * final_bound,
            gap,
            stats: self.stats,
        }
    }
}
