//! Single-level MIP for the pricing problem.
//!
//! The follower's LP is replaced by its primal rows, its dual rows and
//! big-M linearized complementary slackness. Strong duality turns the
//! bilinear revenue `sum p x` into the linear objective
//! `-sum beta w + sum E v - sum C x - kappa Gamma`
//! (minus `sum (p_bar + C) x_bar` in the competitive model).
//!
//! Sizes, with `H` the horizon and `T_j` the available slots of job `j`:
//!
//! | model | variables | rows |
//! |-------|-----------|------|
//! | monopoly | `H + 1 + sum_j (4 T_j + 2)` | `H + sum_j (6 T_j + 3)` |
//! | competitive | `H + 1 + sum_j (6 T_j + 2)` | `H + sum_j (9 T_j + 3)` |
//!
//! Per job the monopoly rows are `T_j` capacity rows, one demand row,
//! `T_j` dual rows and two rows per complementarity pair (`xi`, `psi` per
//! slot, `epsilon` per job). The competitive model adds the competitor's
//! dual row and a `psi_bar` pair per slot; its capacity rows cover
//! `x + x_bar`. With [`MipOptions::value_cuts`] each job gets two more
//! rows.

use peakgrid_milp::{ComplementarityPair, LinExpr, MilpModel, Sense, VarId, Violation};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::follower::{best_response, follower_objective, kkt_certificate, optimistic_response};
use crate::model::{peak, validate, Instance, JobView, ModelError, Schedule};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReformError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("instance fails validation: {0}")]
    Invalid(String),
    #[error("assignment has length {got}, model has {want} variables")]
    Length { got: usize, want: usize },
    #[error("assignment violates the model: {0}")]
    Infeasible(String),
    #[error("peak variable {gamma} differs from the peak load {load}")]
    Peak { gamma: f64, load: f64 },
}

/// Big-M constants of one job.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BigM<S> {
    /// Largest unit cost a slot can reach.
    pub vmax: S,
    /// Bounds `x` and the dual slack.
    pub m1: S,
    /// Bounds `v` and the demand surplus.
    pub m2: S,
    /// Bounds `w` and the spare capacity.
    pub m3: S,
}

fn job_big_m<S: Scalar>(job: &JobView<S>, cap: &[S], competitor: Option<&[S]>) -> BigM<S> {
    let vmax = job
        .slots
        .iter()
        .zip(&job.cost)
        .map(|(&h, &c)| competitor.map_or(cap[h], |pb| cap[h].max(pb[h])) + c)
        .fold(S::zero(), S::max);
    let two = S::lit(2.0);
    let width = S::lit(job.slots.len() as f64);
    BigM {
        vmax,
        m1: job.beta.max(two * vmax),
        m2: vmax.max(width * job.beta - job.demand),
        m3: vmax.max(job.beta),
    }
}

impl<S: Scalar> BigM<S> {
    fn scaled(self, f: S) -> Self {
        Self {
            vmax: self.vmax,
            m1: self.m1 * f,
            m2: self.m2 * f,
            m3: self.m3 * f,
        }
    }
}

/// Builder knobs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MipOptions<S> {
    /// Multiplies every big-M.
    pub m_scale: S,
    /// Bound the duals by the follower's marginal cost at zero and at cap
    /// prices and cap each linearization row at the natural bound of its
    /// own side.
    pub tighten: bool,
    /// Per job, bound the follower's value between its optimum at zero and
    /// at cap prices, and the leader's revenue by cap prices.
    pub value_cuts: bool,
}

impl<S: Scalar> Default for MipOptions<S> {
    fn default() -> Self {
        Self {
            m_scale: S::one(),
            tighten: true,
            value_cuts: false,
        }
    }
}

/// Per-job big-Ms. Competitor prices, when present, raise the cost bound.
pub fn compute_big_ms<S: Scalar>(inst: &Instance<S>) -> Vec<BigM<S>> {
    let pb = inst.competitor_prices.as_deref();
    inst.jobs().iter().map(|j| job_big_m(j, &inst.price_cap, pb)).collect()
}

/// Variables of one job.
#[derive(Clone, Debug)]
pub struct JobVars {
    pub v: VarId,
    pub epsilon: VarId,
    pub x: Vec<VarId>,
    pub x_bar: Option<Vec<VarId>>,
    pub w: Vec<VarId>,
    pub psi: Vec<VarId>,
    pub psi_bar: Option<Vec<VarId>>,
    pub xi: Vec<VarId>,
}

#[derive(Clone, Debug)]
pub struct MipIndex {
    pub prices: Vec<VarId>,
    pub gamma: VarId,
    pub jobs: Vec<JobVars>,
}

/// A built model together with the data needed to read it back.
#[derive(Clone, Debug)]
pub struct BilevelMip<S> {
    pub model: MilpModel<S>,
    pub index: MipIndex,
    pub big_m: Vec<BigM<S>>,
    pub instance: Instance<S>,
    pub jobs: Vec<JobView<S>>,
}

impl<S: Scalar> BilevelMip<S> {
    pub fn competitive(&self) -> bool {
        self.instance.competitor_prices.is_some()
    }
}

/// Follower marginal cost and optimal value of one job at zero leader
/// prices and at cap prices. Both grow with the prices, so any price
/// vector in between keeps them in range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FollowerRange<S> {
    pub v_lo: S,
    pub v_hi: S,
    pub f_lo: S,
    pub f_hi: S,
}

fn greedy<S: Scalar>(job: &JobView<S>, mut costs: Vec<S>) -> (S, S) {
    costs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (mut left, mut v, mut f) = (job.demand, S::zero(), S::zero());
    for c in costs {
        if left <= S::zero() {
            break;
        }
        let q = job.beta.min(left);
        left -= q;
        v = c;
        f += c * q;
    }
    (v, f)
}

pub fn follower_range<S: Scalar>(job: &JobView<S>, cap: &[S], competitor: Option<&[S]>) -> FollowerRange<S> {
    let (v_lo, f_lo) = greedy(job, job.cost.clone());
    let at_cap = job
        .slots
        .iter()
        .zip(&job.cost)
        .map(|(&h, &c)| competitor.map_or(cap[h], |pb| cap[h].min(pb[h])) + c)
        .collect();
    let (v_hi, f_hi) = greedy(job, at_cap);
    FollowerRange { v_lo, v_hi, f_lo, f_hi }
}

/// Closed-form variable and row counts.
pub fn expected_size<S: Scalar>(inst: &Instance<S>, competitive: bool, opts: &MipOptions<S>) -> (usize, usize) {
    let (per_var, per_row) = if competitive { (6, 9) } else { (4, 6) };
    let cuts = if opts.value_cuts { 2 } else { 0 };
    inst.jobs().iter().fold((inst.horizon + 1, inst.horizon), |(v, r), j| {
        let t = j.slots.len();
        (v + per_var * t + 2, r + per_row * t + 3 + cuts)
    })
}

fn checked<S: Scalar>(inst: &Instance<S>) -> Result<(), ReformError> {
    let bad = validate(inst);
    if bad.is_empty() {
        Ok(())
    } else {
        let msg: Vec<String> = bad.iter().map(|v| v.to_string()).collect();
        Err(ReformError::Invalid(msg.join("; ")))
    }
}

/// Monopoly model. The instance must not carry competitor prices.
pub fn build_mp_mip<S: Scalar>(inst: &Instance<S>) -> Result<BilevelMip<S>, ReformError> {
    build_mp_mip_with(inst, &MipOptions::default())
}

pub fn build_mp_mip_with<S: Scalar>(inst: &Instance<S>, opts: &MipOptions<S>) -> Result<BilevelMip<S>, ReformError> {
    if inst.competitor_prices.is_some() {
        return Err(ModelError::CompetitorPricesPresent.into());
    }
    checked(inst)?;
    Ok(build(inst, None, opts))
}

/// Competitive model against the instance's fixed competitor prices.
pub fn build_cp_mip<S: Scalar>(inst: &Instance<S>) -> Result<BilevelMip<S>, ReformError> {
    build_cp_mip_with(inst, &MipOptions::default())
}

pub fn build_cp_mip_with<S: Scalar>(inst: &Instance<S>, opts: &MipOptions<S>) -> Result<BilevelMip<S>, ReformError> {
    let pb = inst.competitor()?.to_vec();
    checked(inst)?;
    Ok(build(inst, Some(&pb), opts))
}

/// Builds whichever model the instance calls for.
pub fn build_mip<S: Scalar>(inst: &Instance<S>) -> Result<BilevelMip<S>, ReformError> {
    if inst.competitor_prices.is_some() {
        build_cp_mip(inst)
    } else {
        build_mp_mip(inst)
    }
}

fn build<S: Scalar>(inst: &Instance<S>, pb: Option<&[S]>, opts: &MipOptions<S>) -> BilevelMip<S> {
    let zero = S::zero();
    let one = S::one();
    let inf = S::infinity();
    let name = if pb.is_some() { "cp" } else { "mp" };
    let mut m = MilpModel::new(name, Sense::Maximize);
    let prices: Vec<VarId> = (0..inst.horizon)
        .map(|h| m.add_continuous(format!("p[{h}]"), zero, inst.price_cap[h], zero))
        .collect();
    let gamma = m.add_continuous("gamma", zero, inf, -inst.kappa);
    let jobs = inst.jobs();
    let mut big_m = Vec::with_capacity(jobs.len());
    let mut vars = Vec::with_capacity(jobs.len());
    let mut load: Vec<Vec<(VarId, S)>> = vec![Vec::new(); inst.horizon];

    for (j, job) in jobs.iter().enumerate() {
        let bm = job_big_m(job, &inst.price_cap, pb);
        let t = job.slots.len();
        let beta = job.beta;
        let tag = |s: &str, h: usize| format!("{s}[{j},{h}]");
        let bm = bm.scaled(opts.m_scale);
        // Side bounds: the follower always has an optimal dual with
        // v in [v_lo, v_hi] and w[h] = max(0, v - c[h]), c[h] the cheaper
        // supplier's unit cost, so each row may use the smaller of its
        // big-M and the bound that dual implies.
        let side = |m: S, natural: S| if opts.tighten { m.min(natural.max(zero)) } else { m };
        let range = follower_range(job, &inst.price_cap, pb);
        let v_lo = if opts.tighten { range.v_lo } else { zero };
        let m_v = side(bm.m2, range.v_hi);
        let m_surplus = side(bm.m2, S::lit(t as f64) * beta - job.demand);
        let v = m.add_continuous(format!("v[{j}]"), v_lo, m_v, job.demand);
        let epsilon = m.add_binary(format!("eps[{j}]"), zero);
        let mut jv = JobVars {
            v,
            epsilon,
            x: Vec::with_capacity(t),
            x_bar: pb.map(|_| Vec::with_capacity(t)),
            w: Vec::with_capacity(t),
            psi: Vec::with_capacity(t),
            psi_bar: pb.map(|_| Vec::with_capacity(t)),
            xi: Vec::with_capacity(t),
        };
        for (&h, &c) in job.slots.iter().zip(&job.cost) {
            let x = m.add_continuous(tag("x", h), zero, beta, -c);
            let w = m.add_continuous(tag("w", h), zero, side(bm.m3, range.v_hi - c), -beta);
            let psi = m.add_binary(tag("psi", h), zero);
            let xi = m.add_binary(tag("xi", h), zero);
            load[h].push((x, one));
            jv.x.push(x);
            jv.w.push(w);
            jv.psi.push(psi);
            jv.xi.push(xi);
            if let Some(pb) = pb {
                let xb = m.add_continuous(tag("xbar", h), zero, beta, -(pb[h] + c));
                let psib = m.add_binary(tag("psibar", h), zero);
                jv.x_bar.as_mut().unwrap().push(xb);
                jv.psi_bar.as_mut().unwrap().push(psib);
            }
        }

        let supply = |k: usize| -> Vec<(VarId, S)> {
            let mut s = vec![(jv.x[k], one)];
            if let Some(xb) = &jv.x_bar {
                s.push((xb[k], one));
            }
            s
        };
        let vscale = bm.vmax.max(one);
        let bscale = beta.max(one);
        for (k, (&h, &c)) in job.slots.iter().zip(&job.cost).enumerate() {
            let m_w = side(bm.m3, range.v_hi - c);
            let m_spare = side(bm.m3, beta);
            let m_x = side(bm.m1, beta);
            // Slack p + C + w - v = max(p + C - v, p - min(p, pbar)).
            let m_slack = side(
                bm.m1,
                (inst.price_cap[h] + c - v_lo).max(pb.map_or(zero, |pb| inst.price_cap[h] - pb[h])),
            );
            m.add_le(tag("cap", h), supply(k), beta);
            m.add_le(tag("dual", h), vec![(jv.w[k], -one), (v, one), (prices[h], -one)], c);

            // xi = 1: slot full; xi = 0: w = 0.
            let mut spare_row: Vec<(VarId, S)> = supply(k).into_iter().map(|(id, _)| (id, -one)).collect();
            spare_row.push((jv.xi[k], m_spare));
            m.add_le(tag("xi_on", h), vec![(jv.w[k], one), (jv.xi[k], -m_w)], zero);
            m.add_le(tag("xi_off", h), spare_row, m_spare - beta);
            let mut spare = LinExpr::new().offset(beta);
            for (id, _) in supply(k) {
                spare = spare.plus(id, -one);
            }
            m.add_pair(ComplementarityPair {
                binary: jv.xi[k],
                on: LinExpr::var(jv.w[k]),
                on_scale: vscale,
                off: spare,
                off_scale: bscale,
            })
            .expect("fresh binary");

            // psi = 1: dual row tight; psi = 0: x = 0.
            m.add_le(tag("psi_on", h), vec![(jv.x[k], one), (jv.psi[k], -m_x)], zero);
            m.add_le(
                tag("psi_off", h),
                vec![(jv.w[k], one), (v, -one), (prices[h], one), (jv.psi[k], m_slack)],
                m_slack - c,
            );
            m.add_pair(ComplementarityPair {
                binary: jv.psi[k],
                on: LinExpr::var(jv.x[k]),
                on_scale: bscale,
                off: LinExpr::var(jv.w[k]).plus(v, -one).plus(prices[h], one).offset(c),
                off_scale: vscale,
            })
            .expect("fresh binary");

            if let (Some(pb), Some(xb), Some(psib)) = (pb, &jv.x_bar, &jv.psi_bar) {
                let cb = pb[h] + c;
                let m_slack_bar = side(bm.m1, (cb - v_lo).max(pb[h]));
                m.add_le(tag("dualbar", h), vec![(jv.w[k], -one), (v, one)], cb);
                m.add_le(tag("psibar_on", h), vec![(xb[k], one), (psib[k], -m_x)], zero);
                m.add_le(
                    tag("psibar_off", h),
                    vec![(jv.w[k], one), (v, -one), (psib[k], m_slack_bar)],
                    m_slack_bar - cb,
                );
                m.add_pair(ComplementarityPair {
                    binary: psib[k],
                    on: LinExpr::var(xb[k]),
                    on_scale: bscale,
                    off: LinExpr::var(jv.w[k]).plus(v, -one).offset(cb),
                    off_scale: vscale,
                })
                .expect("fresh binary");
            }
        }

        let all: Vec<(VarId, S)> = (0..t).flat_map(supply).collect();
        m.add_ge(format!("demand[{j}]"), all.clone(), job.demand);
        // epsilon = 1: demand met exactly; epsilon = 0: v = 0.
        m.add_le(format!("eps_on[{j}]"), vec![(v, one), (epsilon, -m_v)], zero);
        let mut surplus_row = all.clone();
        surplus_row.push((epsilon, m_surplus));
        m.add_le(format!("eps_off[{j}]"), surplus_row, m_surplus + job.demand);
        let surplus = all
            .iter()
            .fold(LinExpr::new().offset(-job.demand), |e, &(id, _)| e.plus(id, one));
        m.add_pair(ComplementarityPair {
            binary: epsilon,
            on: LinExpr::var(v),
            on_scale: vscale,
            off: surplus,
            off_scale: bscale,
        })
        .expect("fresh binary");

        if opts.value_cuts {
            // Follower value E v - beta sum w, and revenue below cap prices.
            let mut value: Vec<(VarId, S)> = vec![(v, job.demand)];
            value.extend(jv.w.iter().map(|&w| (w, -beta)));
            m.add_row(format!("value[{j}]"), value.clone(), range.f_lo, range.f_hi);
            let mut rev = value;
            for (k, (&h, &c)) in job.slots.iter().zip(&job.cost).enumerate() {
                rev.push((jv.x[k], -(inst.price_cap[h] + c)));
                if let (Some(pb), Some(xb)) = (pb, &jv.x_bar) {
                    rev.push((xb[k], -(pb[h] + c)));
                }
            }
            m.add_le(format!("revenue[{j}]"), rev, zero);
        }

        big_m.push(bm);
        vars.push(jv);
    }

    for (h, terms) in load.into_iter().enumerate() {
        let mut row = vec![(gamma, one)];
        row.extend(terms.into_iter().map(|(id, c)| (id, -c)));
        m.add_ge(format!("peak[{h}]"), row, zero);
    }

    BilevelMip {
        model: m,
        index: MipIndex {
            prices,
            gamma,
            jobs: vars,
        },
        big_m,
        instance: inst.clone(),
        jobs,
    }
}

/// Follower duals read from a model point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualSolution<S> {
    pub v: Vec<S>,
    pub w: Vec<Vec<S>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extracted<S> {
    pub prices: Vec<S>,
    pub schedule: Schedule<S>,
    pub duals: DualSolution<S>,
    pub gamma: S,
}

/// Feasibility tolerance of [`extract_solution`].
pub const EXTRACT_TOL: f64 = 1e-6;

/// Reads prices, schedule, duals and peak from a model point.
///
/// The point must satisfy every row to [`EXTRACT_TOL`] (relative) and the
/// peak variable must equal the largest leader load. With `kappa = 0` the
/// peak carries no cost and is reported as the load maximum.
pub fn extract_solution<S: Scalar>(mip: &BilevelMip<S>, values: &[S]) -> Result<Extracted<S>, ReformError> {
    let n = mip.model.num_vars();
    if values.len() != n {
        return Err(ReformError::Length {
            got: values.len(),
            want: n,
        });
    }
    let tol = S::lit(EXTRACT_TOL);
    if let Some(v) = mip.model.worst_violation(values, tol) {
        return Err(ReformError::Infeasible(v.to_string()));
    }
    let res = mip.model.complementarity_residual(values);
    if res > tol * S::one().max(mip.big_m.iter().fold(S::zero(), |a, b| a.max(b.vmax))) {
        return Err(ReformError::Infeasible(
            Violation::Complementarity {
                binary: "pair".into(),
                amount: res,
            }
            .to_string(),
        ));
    }
    let idx = &mip.index;
    let clamp = |v: S, hi: S| v.max(S::zero()).min(hi);
    let prices: Vec<S> = idx
        .prices
        .iter()
        .zip(&mip.instance.price_cap)
        .map(|(id, &cap)| clamp(values[id.index()], cap))
        .collect();
    let read = |ids: &[VarId], hi: S| -> Vec<S> { ids.iter().map(|id| clamp(values[id.index()], hi)).collect() };
    let x: Vec<Vec<S>> = idx.jobs.iter().zip(&mip.jobs).map(|(jv, j)| read(&jv.x, j.beta)).collect();
    let x_bar = mip.competitive().then(|| {
        idx.jobs
            .iter()
            .zip(&mip.jobs)
            .map(|(jv, j)| read(jv.x_bar.as_ref().unwrap(), j.beta))
            .collect()
    });
    let duals = DualSolution {
        v: idx.jobs.iter().map(|jv| values[jv.v.index()].max(S::zero())).collect(),
        w: idx.jobs.iter().map(|jv| read(&jv.w, S::infinity())).collect(),
    };
    let schedule = Schedule { x, x_bar };
    let load_peak = peak(&schedule.leader_load(&mip.jobs, mip.instance.horizon));
    let mut gamma = values[idx.gamma.index()];
    if mip.instance.kappa == S::zero() {
        gamma = load_peak;
    } else if (gamma - load_peak).abs() > tol * S::one().max(load_peak) {
        return Err(ReformError::Peak {
            gamma: gamma.as_f64(),
            load: load_peak.as_f64(),
        });
    }
    Ok(Extracted {
        prices,
        schedule,
        duals,
        gamma,
    })
}

/// Full model point for leader prices and a follower schedule, with duals
/// from the follower's KKT certificate and binaries set to match.
pub fn point_from<S: Scalar>(mip: &BilevelMip<S>, prices: &[S], schedule: &Schedule<S>) -> Result<Vec<S>, ReformError> {
    let cert = kkt_certificate(&mip.instance, prices, schedule)?;
    let mut out = vec![S::zero(); mip.model.num_vars()];
    let idx = &mip.index;
    for (id, &p) in idx.prices.iter().zip(prices) {
        out[id.index()] = p;
    }
    let bit = |b: bool| if b { S::one() } else { S::zero() };
    for (j, jv) in idx.jobs.iter().enumerate() {
        let v = cert.marginal[j];
        out[jv.v.index()] = v;
        out[jv.epsilon.index()] = bit(v > S::zero());
        for k in 0..jv.x.len() {
            let x = schedule.x[j][k];
            let w = cert.capacity_dual[j][k];
            out[jv.x[k].index()] = x;
            out[jv.w[k].index()] = w;
            out[jv.psi[k].index()] = bit(x > S::zero());
            out[jv.xi[k].index()] = bit(w > S::zero());
            if let (Some(xb), Some(psib), Some(sb)) = (&jv.x_bar, &jv.psi_bar, &schedule.x_bar) {
                out[xb[k].index()] = sb[j][k];
                out[psib[k].index()] = bit(sb[j][k] > S::zero());
            }
        }
    }
    out[idx.gamma.index()] = peak(&schedule.leader_load(&mip.jobs, mip.instance.horizon));
    Ok(out)
}

/// The point where the leader charges the cap and the follower responds;
/// always feasible, so a safe first incumbent.
pub fn cap_price_point<S: Scalar>(mip: &BilevelMip<S>) -> Result<Vec<S>, ReformError> {
    let prices = mip.instance.price_cap.clone();
    let resp = optimistic_response(&mip.instance, &prices)?;
    point_from(mip, &prices, &resp.schedule)
}

/// Tolerance of the follower-optimality check on incumbents.
pub const FOLLOWER_TOL: f64 = 1e-7;

/// Engine hook that keeps incumbents honest.
///
/// `verify` snaps near-bound schedule values, confirms the schedule is a
/// follower optimum at the candidate prices and rebuilds an exact point
/// from it. `propose` takes the LP point's prices and the follower optimum
/// most favorable to the leader at those prices.
pub struct BilevelHook<'a, S> {
    pub mip: &'a BilevelMip<S>,
    pub rejected: usize,
}

impl<'a, S: Scalar> BilevelHook<'a, S> {
    pub fn new(mip: &'a BilevelMip<S>) -> Self {
        Self { mip, rejected: 0 }
    }

    fn read(&self, values: &[S]) -> (Vec<S>, Schedule<S>) {
        let idx = &self.mip.index;
        let snap_tol = S::lit(1e-9);
        let snap = |v: S, beta: S| {
            let v = v.max(S::zero()).min(beta);
            if v <= snap_tol * beta {
                S::zero()
            } else if v >= beta - snap_tol * beta {
                beta
            } else {
                v
            }
        };
        let prices = idx
            .prices
            .iter()
            .zip(&self.mip.instance.price_cap)
            .map(|(id, &cap)| values[id.index()].max(S::zero()).min(cap))
            .collect();
        let row = |ids: &[VarId], beta: S| ids.iter().map(|id| snap(values[id.index()], beta)).collect();
        let x = idx.jobs.iter().zip(&self.mip.jobs).map(|(jv, j)| row(&jv.x, j.beta)).collect();
        let x_bar = self.mip.competitive().then(|| {
            idx.jobs
                .iter()
                .zip(&self.mip.jobs)
                .map(|(jv, j)| row(jv.x_bar.as_ref().unwrap(), j.beta))
                .collect()
        });
        (prices, Schedule { x, x_bar })
    }
}

impl<'a, S: Scalar> peakgrid_milp::IncumbentHook<S> for BilevelHook<'a, S> {
    fn verify(&mut self, _model: &MilpModel<S>, values: &[S]) -> Option<Vec<S>> {
        let (prices, schedule) = self.read(values);
        let inst = &self.mip.instance;
        let best = best_response(inst, &prices).ok()?;
        let got = follower_objective(inst, &prices, &schedule);
        let scale = S::one().max(best.objective.abs());
        if got - best.objective > S::lit(FOLLOWER_TOL) * scale {
            self.rejected += 1;
            log::debug!("candidate rejected: follower gains {}", (got - best.objective).as_f64());
            return None;
        }
        point_from(self.mip, &prices, &schedule).ok()
    }

    fn propose(&mut self, _model: &MilpModel<S>, lp_values: &[S]) -> Option<Vec<S>> {
        let (prices, _) = self.read(lp_values);
        let resp = optimistic_response(&self.mip.instance, &prices).ok()?;
        point_from(self.mip, &prices, &resp.schedule).ok()
    }
}
