//! Cost decomposition and comparison with the base case.
//!
//! Energy the follower buys from the competitor is accounted as if it ran
//! in the job's preferred slots: its amount is laid out earliest-first in
//! the window and charged the delay cost of that layout. `ic_as_scheduled`
//! keeps the plain `sum C (x + x_bar)` figure for reference.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{peak, Instance, JobView, ModelError, Schedule};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("schedule infeasible for job {job}: {what}")]
    Infeasible { job: usize, what: String },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport<S> {
    /// Bill paid to the leader, `sum p x`.
    pub eb: S,
    /// Bill including competitor payments.
    pub eb_total: S,
    pub ic: S,
    pub ic_as_scheduled: S,
    /// `eb_total + ic`.
    pub tc: S,
    /// Leader-supplied peak.
    pub peak_load: S,
    /// Peak of leader plus competitor load.
    pub total_peak_load: S,
    pub peak_cost: S,
    pub revenue: S,
    pub net_revenue: S,
}

/// Cost shares relative to the base case's total cost, in percent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Percentages<S> {
    pub eb: S,
    pub ic: S,
    pub tc: S,
}

/// Energy `amount` laid out from the start of the window at full power.
fn earliest_fill<S: Scalar>(job: &JobView<S>, amount: S) -> Vec<S> {
    let mut left = amount;
    job.slots
        .iter()
        .map(|_| {
            let q = job.beta.min(left).max(S::zero());
            left -= q;
            q
        })
        .collect()
}

/// Cap prices with every job run as early as possible.
pub fn base_case<S: Scalar>(inst: &Instance<S>) -> Result<(Vec<S>, Schedule<S>, MetricsReport<S>), MetricsError> {
    let jobs = inst.jobs();
    let prices = inst.price_cap.clone();
    let mut schedule = Schedule::zeros(&jobs, inst.competitor_prices.is_some());
    for (i, job) in jobs.iter().enumerate() {
        schedule.x[i] = earliest_fill(job, job.demand);
    }
    let report = evaluate(inst, &prices, &schedule)?;
    Ok((prices, schedule, report))
}

/// Metrics of a feasible schedule at the given prices.
pub fn evaluate<S: Scalar>(inst: &Instance<S>, prices: &[S], schedule: &Schedule<S>) -> Result<MetricsReport<S>, MetricsError> {
    inst.check_prices(prices)?;
    let jobs = inst.jobs();
    schedule.check_shape(&jobs)?;
    let pb = match schedule.x_bar {
        Some(_) => Some(inst.competitor()?),
        None => None,
    };
    let tol = S::lit(1e-6);
    let mut r = MetricsReport::default();
    let mut competitor_bill = S::zero();
    for (i, job) in jobs.iter().enumerate() {
        let scale = S::one().max(job.beta);
        let mut total = S::zero();
        let mut bought = S::zero();
        for (k, (&h, &c)) in job.slots.iter().zip(&job.cost).enumerate() {
            let x = schedule.x[i][k];
            let xb = schedule.x_bar.as_ref().map_or(S::zero(), |xb| xb[i][k]);
            if x < -tol * scale || xb < -tol * scale || x + xb > job.beta + tol * scale {
                return Err(MetricsError::Infeasible {
                    job: i,
                    what: format!("slot {h} outside [0, power cap]"),
                });
            }
            r.eb += prices[h] * x;
            r.ic += c * x;
            r.ic_as_scheduled += c * (x + xb);
            if let Some(pb) = pb {
                competitor_bill += pb[h] * xb;
            }
            total += x + xb;
            bought += xb;
        }
        if total < job.demand - tol * S::one().max(job.demand) {
            return Err(MetricsError::Infeasible {
                job: i,
                what: "demand not met".into(),
            });
        }
        if bought > S::zero() {
            let fill = earliest_fill(job, bought);
            r.ic += fill.iter().zip(&job.cost).map(|(&q, &c)| q * c).sum::<S>();
        }
    }
    r.eb_total = r.eb + competitor_bill;
    r.tc = r.eb_total + r.ic;
    r.peak_load = peak(&schedule.leader_load(&jobs, inst.horizon));
    r.total_peak_load = peak(&schedule.total_load(&jobs, inst.horizon));
    r.peak_cost = inst.kappa * r.peak_load;
    r.revenue = r.eb;
    r.net_revenue = r.revenue - r.peak_cost;
    Ok(r)
}

/// Shares of `model` relative to the base case's total cost; `None` when
/// that total is zero.
pub fn compare<S: Scalar>(model: &MetricsReport<S>, bc: &MetricsReport<S>) -> Option<Percentages<S>> {
    if bc.tc <= S::zero() {
        return None;
    }
    let hundred = S::lit(100.0);
    let eb = hundred * model.eb_total / bc.tc;
    let ic = hundred * model.ic / bc.tc;
    Some(Percentages { eb, ic, tc: eb + ic })
}

/// Arithmetic mean, `None` for an empty input.
pub fn mean<S: Scalar>(values: impl IntoIterator<Item = S>) -> Option<S> {
    let mut n = 0usize;
    let mut sum = S::zero();
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / S::lit(n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Customer, Job};

    fn tiny(lambda: f64, kappa: f64) -> Instance<f64> {
        Instance {
            horizon: 3,
            price_cap: vec![10.0; 3],
            kappa,
            competitor_prices: None,
            customers: vec![Customer {
                id: "c".into(),
                lambda,
                jobs: vec![Job {
                    appliance: "a".into(),
                    demand: 3.0,
                    power_cap: 2.0,
                    tw_begin: 0,
                    tw_end: 2,
                }],
            }],
        }
    }

    #[test]
    fn base_case_example() {
        let (p, s, r) = base_case(&tiny(1.0, 1.0)).unwrap();
        assert_eq!(p, vec![10.0; 3]);
        assert_eq!(s.x[0], vec![2.0, 1.0, 0.0]);
        assert_eq!(r.ic, 1.5);
        assert_eq!(r.revenue, 30.0);
        assert_eq!(r.peak_load, 2.0);
        assert_eq!(r.net_revenue, 28.0);
        assert_eq!(r.tc, r.eb_total + r.ic);
        let pct = compare(&r, &r).unwrap();
        assert!((pct.eb + pct.ic - 100.0).abs() < 1e-12);
    }

    #[test]
    fn zero_lambda_and_empty() {
        let (_, _, r) = base_case(&tiny(0.0, 1.0)).unwrap();
        assert_eq!(r.ic, 0.0);
        assert_eq!(r.tc, r.eb);
        let mut e = tiny(0.0, 1.0);
        e.customers.clear();
        let (_, _, r) = base_case(&e).unwrap();
        assert_eq!(r, MetricsReport::default());
        assert!(compare(&r, &r).is_none());
    }

    #[test]
    fn competitor_energy_counts_at_preferred_slots() {
        let inst = tiny(1.0, 1.0).with_competitor_at_cap();
        let s = Schedule {
            x: vec![vec![0.0, 0.0, 1.0]],
            x_bar: Some(vec![vec![0.0, 2.0, 0.0]]),
        };
        let r = evaluate(&inst, &[10.0, 10.0, 4.0], &s).unwrap();
        assert_eq!(r.eb, 4.0);
        assert_eq!(r.eb_total, 24.0);
        // leader unit at slot 2 costs 3; competitor's 2 units run at slot 0
        assert_eq!(r.ic, 3.0);
        assert_eq!(r.ic_as_scheduled, 6.0);
        assert_eq!(r.peak_load, 1.0);
        assert_eq!(r.total_peak_load, 2.0);
    }

    #[test]
    fn infeasible_schedule_rejected() {
        let s = Schedule {
            x: vec![vec![1.0, 1.0, 0.0]],
            x_bar: None,
        };
        assert!(matches!(
            evaluate(&tiny(1.0, 1.0), &[1.0; 3], &s),
            Err(MetricsError::Infeasible { .. })
        ));
    }
}
