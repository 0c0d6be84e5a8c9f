//! Exact lower-level response.
//!
//! For fixed prices the follower problem separates per job into a
//! continuous knapsack: fill the cheapest slots at full power until the
//! demand is met. Equal unit costs go to the earliest slot.

use peakgrid_milp::{LpSolver, LpStatus, MilpModel, Sense, VarId};
use serde::{Deserialize, Serialize};

use crate::model::{Instance, JobView, ModelError, Schedule};
use crate::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FollowerSolution<S> {
    pub schedule: Schedule<S>,
    pub objective: S,
    /// Dual of each job's demand row.
    pub marginal: Vec<S>,
    /// Dual of each job's per-slot capacity row.
    pub capacity_dual: Vec<Vec<S>>,
}

/// Unit cost of each available slot of `job`, the cheaper supplier's price
/// included, and whether the leader supplies it (leader wins ties).
fn unit_costs<S: Scalar>(job: &JobView<S>, prices: &[S], competitor: Option<&[S]>) -> Vec<(S, bool)> {
    job.slots
        .iter()
        .zip(&job.cost)
        .map(|(&h, &c)| match competitor {
            Some(pb) if pb[h] < prices[h] => (pb[h] + c, false),
            _ => (prices[h] + c, true),
        })
        .collect()
}

fn fill<S: Scalar>(job: &JobView<S>, costs: &[(S, bool)]) -> (Vec<S>, S, Vec<S>) {
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_by(|&a, &b| costs[a].0.partial_cmp(&costs[b].0).unwrap().then(a.cmp(&b)));
    let mut x = vec![S::zero(); costs.len()];
    let mut left = job.demand;
    let mut v = S::zero();
    for &k in &order {
        if left <= S::zero() {
            break;
        }
        let q = job.beta.min(left);
        x[k] = q;
        left -= q;
        v = costs[k].0;
    }
    let w = x
        .iter()
        .zip(costs)
        .map(|(&xk, &(c, _))| if xk >= job.beta { (v - c).max(S::zero()) } else { S::zero() })
        .collect();
    (x, v, w)
}

fn respond<S: Scalar>(inst: &Instance<S>, prices: &[S], competitor: Option<&[S]>) -> FollowerSolution<S> {
    let jobs = inst.jobs();
    let mut schedule = Schedule::zeros(&jobs, competitor.is_some());
    let mut objective = S::zero();
    let mut marginal = Vec::with_capacity(jobs.len());
    let mut capacity_dual = Vec::with_capacity(jobs.len());
    for (i, job) in jobs.iter().enumerate() {
        let costs = unit_costs(job, prices, competitor);
        let (x, v, w) = fill(job, &costs);
        for (k, (&q, &(c, leader))) in x.iter().zip(&costs).enumerate() {
            objective += c * q;
            if leader {
                schedule.x[i][k] = q;
            } else if let Some(xb) = schedule.x_bar.as_mut() {
                xb[i][k] = q;
            }
        }
        marginal.push(v);
        capacity_dual.push(w);
    }
    FollowerSolution {
        schedule,
        objective,
        marginal,
        capacity_dual,
    }
}

/// Follower optimum when only the leader supplies energy.
pub fn best_response_mp<S: Scalar>(inst: &Instance<S>, prices: &[S]) -> Result<FollowerSolution<S>, ModelError> {
    inst.check_prices(prices)?;
    Ok(respond(inst, prices, None))
}

/// Follower optimum with the competitor's fixed prices available; a slot is
/// bought from the leader unless the competitor is strictly cheaper.
pub fn best_response_cp<S: Scalar>(inst: &Instance<S>, prices: &[S]) -> Result<FollowerSolution<S>, ModelError> {
    inst.check_prices(prices)?;
    let pb = inst.competitor()?;
    Ok(respond(inst, prices, Some(pb)))
}

/// Response in the mode the instance carries.
pub fn best_response<S: Scalar>(inst: &Instance<S>, prices: &[S]) -> Result<FollowerSolution<S>, ModelError> {
    if inst.competitor_prices.is_some() {
        best_response_cp(inst, prices)
    } else {
        best_response_mp(inst, prices)
    }
}

/// Among all follower optima at `prices`, the schedule best for the
/// leader: largest `sum p x - kappa * peak`. Slots whose unit cost ties
/// the job's marginal cost (within a relative `1e-9`) may take any amount,
/// cheaper slots are full and dearer ones empty; in the competitive model
/// a slot may be split between suppliers only when their prices tie.
pub fn optimistic_response<S: Scalar>(inst: &Instance<S>, prices: &[S]) -> Result<FollowerSolution<S>, ModelError> {
    let best = best_response(inst, prices)?;
    let pb = inst.competitor_prices.as_deref();
    let jobs = inst.jobs();
    let zero = S::zero();
    let one = S::one();
    let mut lp = MilpModel::new("optimistic", Sense::Maximize);
    let gamma = lp.add_continuous("gamma", zero, S::infinity(), -inst.kappa);
    let mut load: Vec<Vec<(VarId, S)>> = vec![Vec::new(); inst.horizon];
    let mut ids: Vec<Vec<(VarId, Option<VarId>)>> = Vec::with_capacity(jobs.len());
    for (j, job) in jobs.iter().enumerate() {
        let v = best.marginal[j];
        let tol = S::lit(1e-9) * one.max(v.abs());
        let mut row = Vec::new();
        let mut demand = Vec::new();
        for (&h, &c) in job.slots.iter().zip(&job.cost) {
            let lead = prices[h] + c;
            let comp = pb.map(|pb| pb[h] + c);
            let cheapest = comp.map_or(lead, |cb| lead.min(cb));
            let (lo, hi) = if cheapest < v - tol {
                (job.beta, job.beta)
            } else if cheapest <= v + tol {
                (zero, job.beta)
            } else {
                (zero, zero)
            };
            let usable = |cost: S| if cost <= cheapest + tol { hi } else { zero };
            let x = lp.add_continuous(format!("x[{j},{h}]"), zero, usable(lead), prices[h]);
            load[h].push((x, one));
            demand.push((x, one));
            let xb = comp.map(|cb| {
                let xb = lp.add_continuous(format!("xbar[{j},{h}]"), zero, usable(cb), zero);
                demand.push((xb, one));
                lp.add_row(format!("slot[{j},{h}]"), vec![(x, one), (xb, one)], lo, hi);
                xb
            });
            if xb.is_none() && lo > zero {
                lp.vars[x.index()].lower = lo;
            }
            row.push((x, xb));
        }
        lp.add_eq(format!("demand[{j}]"), demand, job.demand);
        ids.push(row);
    }
    for (h, terms) in load.into_iter().enumerate() {
        let mut row = vec![(gamma, one)];
        row.extend(terms.into_iter().map(|(id, c)| (id, -c)));
        lp.add_ge(format!("peak[{h}]"), row, zero);
    }
    let mut solver = LpSolver::new(&lp);
    if solver.solve() != LpStatus::Optimal {
        return Ok(best);
    }
    let vals = solver.primal();
    let mut schedule = Schedule::zeros(&jobs, pb.is_some());
    for (j, job) in jobs.iter().enumerate() {
        for (k, &(x, xb)) in ids[j].iter().enumerate() {
            schedule.x[j][k] = vals[x.index()].max(zero).min(job.beta);
            if let (Some(xb), Some(sb)) = (xb, schedule.x_bar.as_mut()) {
                sb[j][k] = vals[xb.index()].max(zero).min(job.beta);
            }
        }
    }
    let objective = follower_objective(inst, prices, &schedule);
    Ok(FollowerSolution {
        schedule,
        objective,
        marginal: best.marginal,
        capacity_dual: best.capacity_dual,
    })
}

/// Total disutility `sum (p + C) x + sum (p_bar + C) x_bar`.
pub fn follower_objective<S: Scalar>(inst: &Instance<S>, prices: &[S], schedule: &Schedule<S>) -> S {
    let jobs = inst.jobs();
    let mut total = S::zero();
    for (i, job) in jobs.iter().enumerate() {
        for (k, (&h, &c)) in job.slots.iter().zip(&job.cost).enumerate() {
            total += (prices[h] + c) * schedule.x[i][k];
            if let (Some(xb), Some(pb)) = (&schedule.x_bar, &inst.competitor_prices) {
                total += (pb[h] + c) * xb[i][k];
            }
        }
    }
    total
}

/// Dual certificate for a schedule and the scaled KKT residual it leaves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate<S> {
    pub marginal: Vec<S>,
    pub capacity_dual: Vec<Vec<S>>,
    pub residual: S,
}

/// Builds duals `(v, w)` for `schedule` at `prices` and measures how far
/// the pair is from satisfying the follower's KKT conditions: primal and
/// dual feasibility plus complementary slackness. Cost-like terms are
/// scaled by `max(1, largest unit cost)`, energy-like terms by
/// `max(1, power cap)`.
pub fn kkt_certificate<S: Scalar>(
    inst: &Instance<S>,
    prices: &[S],
    schedule: &Schedule<S>,
) -> Result<Certificate<S>, ModelError> {
    inst.check_prices(prices)?;
    let jobs = inst.jobs();
    schedule.check_shape(&jobs)?;
    let pb = match &schedule.x_bar {
        Some(_) => Some(inst.competitor()?),
        None => None,
    };
    let tiny = S::lit(1e-12);
    let mut marginal = Vec::new();
    let mut capacity_dual = Vec::new();
    let mut residual = S::zero();
    for (i, job) in jobs.iter().enumerate() {
        let x = &schedule.x[i];
        let xb = schedule.x_bar.as_ref().map(|xb| &xb[i]);
        let c: Vec<S> = job.slots.iter().zip(&job.cost).map(|(&h, &d)| prices[h] + d).collect();
        let cb: Option<Vec<S>> = pb.map(|pb| job.slots.iter().zip(&job.cost).map(|(&h, &d)| pb[h] + d).collect());
        let cscale = c
            .iter()
            .chain(cb.iter().flatten())
            .fold(S::one(), |a, &v| a.max(v.abs()));
        let bscale = S::one().max(job.beta);
        let used = |k: usize| x[k] + xb.map_or(S::zero(), |r| r[k]);
        let total: S = (0..c.len()).map(used).sum();
        // Marginal: most expensive unit actually bought, unless demand is
        // over-covered, in which case it must vanish.
        let mut v = S::zero();
        if total <= job.demand + tiny * bscale {
            for k in 0..c.len() {
                if x[k] > tiny * bscale {
                    v = v.max(c[k]);
                }
                if let (Some(r), Some(cb)) = (xb, &cb) {
                    if r[k] > tiny * bscale {
                        v = v.max(cb[k]);
                    }
                }
            }
        }
        let mut w = vec![S::zero(); c.len()];
        let mut worst = S::zero();
        for k in 0..c.len() {
            let cheapest = cb.as_ref().map_or(c[k], |cb| c[k].min(cb[k]));
            if used(k) >= job.beta - tiny * bscale {
                w[k] = (v - cheapest).max(S::zero());
            }
            let r = c[k] - v + w[k];
            worst = worst.max((-r).max(S::zero()) / cscale);
            worst = worst.max((x[k] * r).abs() / (cscale * bscale));
            worst = worst.max((-x[k]).max(S::zero()) / bscale);
            if let (Some(xr), Some(cb)) = (xb, &cb) {
                let rb = cb[k] - v + w[k];
                worst = worst.max((-rb).max(S::zero()) / cscale);
                worst = worst.max((xr[k] * rb).abs() / (cscale * bscale));
                worst = worst.max((-xr[k]).max(S::zero()) / bscale);
            }
            worst = worst.max((used(k) - job.beta).max(S::zero()) / bscale);
            worst = worst.max((w[k] * (job.beta - used(k))).abs() / (cscale * bscale));
        }
        worst = worst.max((job.demand - total).max(S::zero()) / bscale);
        worst = worst.max((v * (total - job.demand)).abs() / (cscale * bscale));
        residual = residual.max(worst);
        marginal.push(v);
        capacity_dual.push(w);
    }
    Ok(Certificate {
        marginal,
        capacity_dual,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Customer, Job};

    fn inst(lambda: f64, e: f64, b: f64, tb: usize, te: usize, h: usize) -> Instance<f64> {
        Instance {
            horizon: h,
            price_cap: vec![10.0; h],
            kappa: 0.0,
            competitor_prices: None,
            customers: vec![Customer {
                id: "c".into(),
                lambda,
                jobs: vec![Job {
                    appliance: "a".into(),
                    demand: e,
                    power_cap: b,
                    tw_begin: tb,
                    tw_end: te,
                }],
            }],
        }
    }

    #[test]
    fn knapsack_example() {
        let i = inst(1.0, 3.0, 2.0, 0, 2, 3);
        let s = best_response_mp(&i, &[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(s.schedule.x[0], vec![1.0, 2.0, 0.0]);
        assert_eq!(s.objective, 8.0);
        assert_eq!(s.marginal[0], 3.0);
        let bc = Schedule {
            x: vec![vec![2.0, 1.0, 0.0]],
            x_bar: None,
        };
        assert_eq!(follower_objective(&i, &[3.0, 1.0, 2.0], &bc), 8.5);
        let cert = kkt_certificate(&i, &[3.0, 1.0, 2.0], &s.schedule).unwrap();
        assert!(cert.residual <= 1e-12);
        assert!(kkt_certificate(&i, &[3.0, 1.0, 2.0], &bc).unwrap().residual > 1e-3);
    }

    #[test]
    fn flat_prices_fill_earliest() {
        let i = inst(0.0, 3.0, 2.0, 0, 2, 3);
        let s = best_response_mp(&i, &[5.0; 3]).unwrap();
        assert_eq!(s.schedule.x[0], vec![2.0, 1.0, 0.0]);
    }

    #[test]
    fn competitive_cases() {
        let mut i = inst(0.0, 2.0, 2.0, 0, 1, 2);
        i.competitor_prices = Some(vec![9.0, 4.0]);
        let s = best_response_cp(&i, &[3.0, 9.0]).unwrap();
        assert_eq!(s.schedule.x[0], vec![2.0, 0.0]);
        assert_eq!(s.schedule.x_bar.as_ref().unwrap()[0], vec![0.0, 0.0]);

        i.competitor_prices = Some(vec![4.0, 4.0]);
        let s = best_response_cp(&i, &[5.0, 5.0]).unwrap();
        assert_eq!(s.schedule.x[0], vec![0.0, 0.0]);
        assert_eq!(s.schedule.x_bar.as_ref().unwrap()[0], vec![2.0, 0.0]);

        let i = inst(1.0, 3.0, 2.0, 0, 2, 3).with_competitor_at_cap();
        let p = [3.0, 1.0, 2.0];
        let mut i2 = i.clone();
        i2.competitor_prices = Some(p.to_vec());
        let cp = best_response_cp(&i2, &p).unwrap();
        let mp = best_response_mp(&i, &p).unwrap();
        assert_eq!(cp.schedule.x, mp.schedule.x);
        assert!(cp.schedule.x_bar.unwrap()[0].iter().all(|&v| v == 0.0));
        assert!(matches!(
            best_response_cp(&inst(1.0, 3.0, 2.0, 0, 2, 3), &p),
            Err(ModelError::CompetitorPricesRequired)
        ));
    }

    #[test]
    fn optimistic_split_lowers_peak() {
        // C = (0, 2); at p = (10, 8) both slots cost 10 and the leader
        // prefers an even split when peaks are expensive.
        let mut i = inst(2.0, 1.0, 1.0, 0, 1, 2);
        i.kappa = 5.0;
        let s = optimistic_response(&i, &[10.0, 8.0]).unwrap();
        assert!((s.schedule.x[0][0] - 0.5).abs() < 1e-9);
        assert!((s.schedule.x[0][1] - 0.5).abs() < 1e-9);
        assert!((s.objective - 10.0).abs() < 1e-9);
        let b = best_response_mp(&i, &[10.0, 8.0]).unwrap();
        assert_eq!(b.schedule.x[0], vec![1.0, 0.0]);
    }

    #[test]
    fn zero_schedule_objective() {
        let i = inst(1.0, 3.0, 2.0, 0, 2, 3);
        let z = Schedule::zeros(&i.jobs(), false);
        assert_eq!(follower_objective(&i, &[1.0, 2.0, 3.0], &z), 0.0);
    }
}
