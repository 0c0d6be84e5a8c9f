//! Instances, prices and schedules.
//!
//! Slots are 0-based. A job may run in every slot `h` with
//! `tw_begin <= h <= tw_end` that also lies inside the horizon; the window
//! end may equal the horizon itself (the generator places windows flush
//! with the end of the day), in which case the last available slot is
//! `horizon - 1` while the delay cost still uses the nominal `tw_end`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Job<S> {
    pub appliance: String,
    pub demand: S,
    pub power_cap: S,
    pub tw_begin: usize,
    pub tw_end: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Customer<S> {
    pub id: String,
    pub lambda: S,
    pub jobs: Vec<Job<S>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance<S> {
    pub horizon: usize,
    pub price_cap: Vec<S>,
    pub kappa: S,
    pub competitor_prices: Option<Vec<S>>,
    pub customers: Vec<Customer<S>>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("slot {slot} outside the window [{begin}, {end}]")]
    OutsideWindow { slot: usize, begin: usize, end: usize },
    #[error("degenerate window [{0}, {0}]")]
    DegenerateWindow(usize),
    #[error("competitor prices required")]
    CompetitorPricesRequired,
    #[error("competitor prices not allowed for the monopoly model")]
    CompetitorPricesPresent,
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("price vector has length {got}, horizon is {want}")]
    PriceLength { got: usize, want: usize },
    #[error("schedule does not match the instance: {0}")]
    ScheduleShape(String),
}

/// Delay cost per unit of energy of running `job` in slot `h`:
/// `lambda * E * (h - tw_begin) / (tw_end - tw_begin)`.
pub fn inconvenience_cost<S: Scalar>(job: &Job<S>, lambda: S, h: usize) -> Result<S, ModelError> {
    if job.tw_end <= job.tw_begin {
        return Err(ModelError::DegenerateWindow(job.tw_begin));
    }
    if h < job.tw_begin || h > job.tw_end {
        return Err(ModelError::OutsideWindow {
            slot: h,
            begin: job.tw_begin,
            end: job.tw_end,
        });
    }
    let num = S::lit((h - job.tw_begin) as f64);
    let den = S::lit((job.tw_end - job.tw_begin) as f64);
    Ok(lambda * job.demand * num / den)
}

/// One job with its customer's coefficient and the per-slot data every
/// algorithm needs.
#[derive(Clone, Debug, PartialEq)]
pub struct JobView<S> {
    pub customer: usize,
    pub index: usize,
    pub lambda: S,
    pub demand: S,
    pub beta: S,
    pub tw_begin: usize,
    pub tw_end: usize,
    /// Available slots, ascending.
    pub slots: Vec<usize>,
    /// Delay cost of each available slot.
    pub cost: Vec<S>,
}

impl<S: Scalar> Instance<S> {
    pub fn num_jobs(&self) -> usize {
        self.customers.iter().map(|c| c.jobs.len()).sum()
    }

    /// Jobs in customer order, then job order. Assumes a valid instance.
    pub fn jobs(&self) -> Vec<JobView<S>> {
        let mut out = Vec::with_capacity(self.num_jobs());
        for (ci, c) in self.customers.iter().enumerate() {
            for (ji, j) in c.jobs.iter().enumerate() {
                let last = j.tw_end.min(self.horizon.saturating_sub(1));
                let slots: Vec<usize> = (j.tw_begin..=last).collect();
                let cost = slots
                    .iter()
                    .map(|&h| inconvenience_cost(j, c.lambda, h).unwrap_or(S::zero()))
                    .collect();
                out.push(JobView {
                    customer: ci,
                    index: ji,
                    lambda: c.lambda,
                    demand: j.demand,
                    beta: j.power_cap,
                    tw_begin: j.tw_begin,
                    tw_end: j.tw_end,
                    slots,
                    cost,
                });
            }
        }
        out
    }

    pub fn competitor(&self) -> Result<&[S], ModelError> {
        self.competitor_prices
            .as_deref()
            .ok_or(ModelError::CompetitorPricesRequired)
    }

    /// Copy with competitor prices pinned to the price cap.
    pub fn with_competitor_at_cap(&self) -> Self {
        let mut out = self.clone();
        out.competitor_prices = Some(self.price_cap.clone());
        out
    }

    pub fn with_kappa(&self, kappa: S) -> Self {
        let mut out = self.clone();
        out.kappa = kappa;
        out
    }

    pub fn check_prices(&self, prices: &[S]) -> Result<(), ModelError> {
        if prices.len() != self.horizon {
            return Err(ModelError::PriceLength {
                got: prices.len(),
                want: self.horizon,
            });
        }
        Ok(())
    }
}

/// Which invariant an instance breaks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    ZeroHorizon,
    PriceCapLength,
    NegativePriceCap,
    CompetitorLength,
    NegativeCompetitorPrice,
    NegativeKappa,
    NegativeLambda,
    NonPositiveDemand,
    NonPositivePowerCap,
    DegenerateWindow,
    WindowOutsideHorizon,
    DemandInfeasible,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::ZeroHorizon => "zero horizon",
            Rule::PriceCapLength => "price cap length",
            Rule::NegativePriceCap => "negative price cap",
            Rule::CompetitorLength => "competitor price length",
            Rule::NegativeCompetitorPrice => "negative competitor price",
            Rule::NegativeKappa => "negative kappa",
            Rule::NegativeLambda => "negative lambda",
            Rule::NonPositiveDemand => "non-positive demand",
            Rule::NonPositivePowerCap => "non-positive power cap",
            Rule::DegenerateWindow => "degenerate window",
            Rule::WindowOutsideHorizon => "window outside horizon",
            Rule::DemandInfeasible => "demand infeasible",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub customer: Option<String>,
    pub appliance: Option<String>,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.customer, &self.appliance) {
            (Some(c), Some(a)) => write!(f, "{c}/{a}: {}", self.rule),
            (Some(c), None) => write!(f, "{c}: {}", self.rule),
            _ => write!(f, "{}", self.rule),
        }
    }
}

fn finite_nonneg<S: Scalar>(v: S) -> bool {
    v.is_finite() && v >= S::zero()
}

/// Every broken invariant of `inst`; empty when the instance is valid.
pub fn validate<S: Scalar>(inst: &Instance<S>) -> Vec<Violation> {
    let mut out = Vec::new();
    let top = |rule| Violation {
        customer: None,
        appliance: None,
        rule,
    };
    if inst.horizon == 0 {
        out.push(top(Rule::ZeroHorizon));
    }
    if inst.price_cap.len() != inst.horizon {
        out.push(top(Rule::PriceCapLength));
    }
    if !inst.price_cap.iter().all(|&p| finite_nonneg(p)) {
        out.push(top(Rule::NegativePriceCap));
    }
    if let Some(c) = &inst.competitor_prices {
        if c.len() != inst.horizon {
            out.push(top(Rule::CompetitorLength));
        }
        if !c.iter().all(|&p| finite_nonneg(p)) {
            out.push(top(Rule::NegativeCompetitorPrice));
        }
    }
    if !finite_nonneg(inst.kappa) {
        out.push(top(Rule::NegativeKappa));
    }
    for c in &inst.customers {
        if !finite_nonneg(c.lambda) {
            out.push(Violation {
                customer: Some(c.id.clone()),
                appliance: None,
                rule: Rule::NegativeLambda,
            });
        }
        for j in &c.jobs {
            let mut bad = |rule| {
                out.push(Violation {
                    customer: Some(c.id.clone()),
                    appliance: Some(j.appliance.clone()),
                    rule,
                })
            };
            let demand_ok = j.demand.is_finite() && j.demand > S::zero();
            let beta_ok = j.power_cap.is_finite() && j.power_cap > S::zero();
            if !demand_ok {
                bad(Rule::NonPositiveDemand);
            }
            if !beta_ok {
                bad(Rule::NonPositivePowerCap);
            }
            if j.tw_end <= j.tw_begin {
                bad(Rule::DegenerateWindow);
                continue;
            }
            if j.tw_begin >= inst.horizon || j.tw_end > inst.horizon {
                bad(Rule::WindowOutsideHorizon);
                continue;
            }
            let width = j.tw_end.min(inst.horizon - 1) - j.tw_begin + 1;
            if demand_ok && beta_ok && j.demand > j.power_cap * S::lit(width as f64) {
                bad(Rule::DemandInfeasible);
            }
        }
    }
    out
}

/// Follower decision: power per job and available slot (same order as
/// [`Instance::jobs`] and each job's `slots`), plus competitor supply in
/// the competitive model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule<S> {
    pub x: Vec<Vec<S>>,
    pub x_bar: Option<Vec<Vec<S>>>,
}

impl<S: Scalar> Schedule<S> {
    pub fn zeros(jobs: &[JobView<S>], competitive: bool) -> Self {
        let z: Vec<Vec<S>> = jobs.iter().map(|j| vec![S::zero(); j.slots.len()]).collect();
        Self {
            x_bar: competitive.then(|| z.clone()),
            x: z,
        }
    }

    pub fn check_shape(&self, jobs: &[JobView<S>]) -> Result<(), ModelError> {
        let ok = |v: &Vec<Vec<S>>| v.len() == jobs.len() && v.iter().zip(jobs).all(|(r, j)| r.len() == j.slots.len());
        if !ok(&self.x) || self.x_bar.as_ref().map_or(false, |xb| !ok(xb)) {
            return Err(ModelError::ScheduleShape(format!(
                "expected {} jobs with window-sized rows",
                jobs.len()
            )));
        }
        Ok(())
    }

    /// Leader-served load per slot.
    pub fn leader_load(&self, jobs: &[JobView<S>], horizon: usize) -> Vec<S> {
        let mut load = vec![S::zero(); horizon];
        for (j, row) in jobs.iter().zip(&self.x) {
            for (&h, &v) in j.slots.iter().zip(row) {
                load[h] += v;
            }
        }
        load
    }

    /// Leader plus competitor load per slot.
    pub fn total_load(&self, jobs: &[JobView<S>], horizon: usize) -> Vec<S> {
        let mut load = self.leader_load(jobs, horizon);
        if let Some(xb) = &self.x_bar {
            for (j, row) in jobs.iter().zip(xb) {
                for (&h, &v) in j.slots.iter().zip(row) {
                    load[h] += v;
                }
            }
        }
        load
    }
}

pub fn peak<S: Scalar>(load: &[S]) -> S {
    load.iter().copied().fold(S::zero(), S::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn job(e: f64, b: f64, tb: usize, te: usize) -> Job<f64> {
        Job {
            appliance: "a".into(),
            demand: e,
            power_cap: b,
            tw_begin: tb,
            tw_end: te,
        }
    }

    fn single(j: Job<f64>, horizon: usize) -> Instance<f64> {
        Instance {
            horizon,
            price_cap: vec![10.0; horizon],
            kappa: 1.0,
            competitor_prices: None,
            customers: vec![Customer {
                id: "c".into(),
                lambda: 1.0,
                jobs: vec![j],
            }],
        }
    }

    #[test]
    fn delay_cost_examples() {
        let j = job(3.0, 2.0, 0, 2);
        assert_eq!(inconvenience_cost(&j, 7.0, 0).unwrap(), 0.0);
        assert_eq!(inconvenience_cost(&j, 1.0, 1).unwrap(), 1.5);
        assert_eq!(inconvenience_cost(&j, 1.0, 2).unwrap(), 3.0);
        assert!(matches!(
            inconvenience_cost(&j, 1.0, 3),
            Err(ModelError::OutsideWindow { .. })
        ));
        assert!(matches!(
            inconvenience_cost(&job(3.0, 2.0, 1, 1), 1.0, 1),
            Err(ModelError::DegenerateWindow(1))
        ));
    }

    #[test]
    fn validation_examples() {
        assert!(validate(&single(job(3.0, 2.0, 0, 2), 24)).is_empty());
        let v = validate(&single(job(10.0, 2.0, 0, 2), 24));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::DemandInfeasible);
        assert_eq!(v[0].rule.to_string(), "demand infeasible");
        let v = validate(&single(job(1.0, 2.0, 4, 4), 24));
        assert_eq!(v[0].rule, Rule::DegenerateWindow);
        let v = validate(&single(job(1.0, 2.0, 20, 25), 24));
        assert_eq!(v[0].rule, Rule::WindowOutsideHorizon);
        // Flush with the end of the day: slots 20..=23 available.
        let inst = single(job(8.0, 2.0, 20, 24), 24);
        assert!(validate(&inst).is_empty());
        assert_eq!(inst.jobs()[0].slots, vec![20, 21, 22, 23]);
    }

    #[test]
    fn json_field_names() {
        let inst = single(job(3.0, 2.0, 0, 2), 3);
        let s = serde_json::to_string(&inst).unwrap();
        for key in [
            "\"horizon\"",
            "\"price_cap\"",
            "\"kappa\"",
            "\"competitor_prices\":null",
            "\"customers\"",
            "\"id\"",
            "\"lambda\"",
            "\"jobs\"",
            "\"appliance\"",
            "\"demand\"",
            "\"power_cap\"",
            "\"tw_begin\"",
            "\"tw_end\"",
        ] {
            assert!(s.contains(key), "{key} missing in {s}");
        }
        let back: Instance<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, inst);
    }
}
