#![allow(dead_code)]

use peakgrid::model::{Customer, Instance, Job};
use proptest::prelude::*;

pub fn job(demand: f64, beta: f64, tw_begin: usize, tw_end: usize) -> Job<f64> {
    Job {
        appliance: "a".into(),
        demand,
        power_cap: beta,
        tw_begin,
        tw_end,
    }
}

pub fn instance(horizon: usize, cap: f64, kappa: f64, customers: Vec<(f64, Vec<Job<f64>>)>) -> Instance<f64> {
    Instance {
        horizon,
        price_cap: vec![cap; horizon],
        kappa,
        competitor_prices: None,
        customers: customers
            .into_iter()
            .enumerate()
            .map(|(i, (lambda, jobs))| Customer {
                id: format!("c{i}"),
                lambda,
                jobs,
            })
            .collect(),
    }
}

/// One job on `{0, 1}`, E = 1, beta = 1, lambda = 2, cap 10.
pub fn tiny(kappa: f64) -> Instance<f64> {
    instance(2, 10.0, kappa, vec![(2.0, vec![job(1.0, 1.0, 0, 1)])])
}

prop_compose! {
    fn arb_job(horizon: usize)(
        begin in 0..horizon - 1,
        len in 1usize..4,
        beta in 0.5f64..3.0,
        fill in 0.05f64..1.0,
    ) -> Job<f64> {
        let end = (begin + len).min(horizon - 1);
        let slots = (end - begin + 1) as f64;
        job(fill * beta * slots, beta, begin, end)
    }
}

prop_compose! {
    /// Up to `max_jobs` jobs on a horizon of 2 to `max_h` slots, windows
    /// of at most 4 slots, caps drawn per slot.
    pub fn arb_instance(max_h: usize, max_jobs: usize)(horizon in 2..=max_h)(
        jobs in prop::collection::vec((arb_job(horizon), 0.0f64..3.0), 1..=max_jobs),
        caps in prop::collection::vec(0.0f64..20.0, horizon),
        kappa in 0.0f64..10.0,
        horizon in Just(horizon),
    ) -> Instance<f64> {
        Instance {
            horizon,
            price_cap: caps,
            kappa,
            competitor_prices: None,
            customers: jobs
                .into_iter()
                .enumerate()
                .map(|(i, (j, lambda))| Customer { id: format!("c{i}"), lambda, jobs: vec![j] })
                .collect(),
        }
    }
}

/// Prices inside the caps, as fractions of each cap.
pub fn prices_within(inst: &Instance<f64>, frac: &[f64]) -> Vec<f64> {
    inst.price_cap.iter().zip(frac.iter().cycle()).map(|(c, f)| c * f).collect()
}

/// Best leader value over the price grid `{0, cap/steps, ..., cap}` per
/// slot, with the follower filling its cheapest slots first (earliest on
/// ties). Written independently of the crate's follower code.
pub fn grid_best(inst: &Instance<f64>, steps: usize) -> f64 {
    struct J {
        beta: f64,
        demand: f64,
        slots: Vec<(usize, f64)>,
    }
    let mut jobs = Vec::new();
    for c in &inst.customers {
        for j in &c.jobs {
            let last = j.tw_end.min(inst.horizon - 1);
            let slots = (j.tw_begin..=last)
                .map(|h| {
                    let delay = (h - j.tw_begin) as f64 / (j.tw_end - j.tw_begin) as f64;
                    (h, c.lambda * j.demand * delay)
                })
                .collect();
            jobs.push(J {
                beta: j.power_cap,
                demand: j.demand,
                slots,
            });
        }
    }
    let h_n = inst.horizon;
    let mut idx = vec![0usize; h_n];
    let mut p = vec![0.0; h_n];
    let mut load = vec![0.0; h_n];
    let mut order: Vec<(f64, usize)> = Vec::new();
    let mut best = f64::NEG_INFINITY;
    loop {
        for h in 0..h_n {
            p[h] = inst.price_cap[h] * idx[h] as f64 / steps as f64;
        }
        load.iter_mut().for_each(|l| *l = 0.0);
        let mut revenue = 0.0;
        for j in &jobs {
            order.clear();
            order.extend(j.slots.iter().map(|&(h, c)| (p[h] + c, h)));
            order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let mut left = j.demand;
            for &(_, h) in order.iter() {
                if left <= 0.0 {
                    break;
                }
                let q = j.beta.min(left);
                left -= q;
                load[h] += q;
                revenue += p[h] * q;
            }
        }
        let peak = load.iter().copied().fold(0.0, f64::max);
        best = best.max(revenue - inst.kappa * peak);
        let mut h = 0;
        loop {
            if h == h_n {
                return best;
            }
            idx[h] += 1;
            if idx[h] <= steps {
                break;
            }
            idx[h] = 0;
            h += 1;
        }
    }
}
