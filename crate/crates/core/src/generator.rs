//! Seeded random instances.
//!
//! Every customer and job draws from its own ChaCha stream keyed by the
//! seed and its position, so growing an instance never changes the draws
//! of the jobs it already had, and changing the window width changes only
//! the windows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Customer, Instance, Job};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("config field {field}: {reason}")]
    Config { field: &'static str, reason: String },
    #[error("window of {len} slots does not fit a horizon of {horizon}")]
    WindowTooLong { len: usize, horizon: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_customers: usize,
    pub jobs_per_customer: usize,
    pub horizon: usize,
    /// Window widths as a fraction of the minimum completion time.
    pub tww: Vec<f64>,
    pub beta_range: [f64; 2],
    pub demand_range: [f64; 2],
    pub lambda_range: [f64; 2],
    pub p_max: f64,
    pub kappa_set: Vec<f64>,
    pub seed: u64,
    pub instances_per_kappa: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_customers: 10,
            jobs_per_customer: 3,
            horizon: 24,
            tww: vec![0.2, 1.0],
            beta_range: [1.0, 3.0],
            demand_range: [2.0, 10.0],
            lambda_range: [5.0, 20.0],
            p_max: 100.0,
            kappa_set: vec![200.0, 400.0, 600.0, 800.0, 1000.0],
            seed: 1,
            instances_per_kappa: 10,
        }
    }
}

impl GeneratorConfig {
    /// Small variant used for quick experiments: 5 customers with 2 jobs.
    pub fn desk() -> Self {
        Self {
            n_customers: 5,
            jobs_per_customer: 2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let range = |field: &'static str, r: [f64; 2], allow_zero: bool| {
            let low_ok = if allow_zero { r[0] >= 0.0 } else { r[0] > 0.0 };
            if !(r[0].is_finite() && r[1].is_finite()) || r[0] > r[1] {
                Err(GenError::Config {
                    field,
                    reason: format!("min {} exceeds max {}", r[0], r[1]),
                })
            } else if !low_ok {
                Err(GenError::Config {
                    field,
                    reason: "lower bound must be positive".into(),
                })
            } else {
                Ok(())
            }
        };
        range("beta_range", self.beta_range, false)?;
        range("demand_range", self.demand_range, false)?;
        range("lambda_range", self.lambda_range, true)?;
        if self.horizon == 0 {
            return Err(GenError::Config {
                field: "horizon",
                reason: "must be positive".into(),
            });
        }
        if !(self.p_max >= 0.0 && self.p_max.is_finite()) {
            return Err(GenError::Config {
                field: "p_max",
                reason: "must be finite and non-negative".into(),
            });
        }
        if self.tww.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
            return Err(GenError::Config {
                field: "tww",
                reason: "widths must be finite and non-negative".into(),
            });
        }
        if self.kappa_set.iter().any(|&k| !(k >= 0.0 && k.is_finite())) {
            return Err(GenError::Config {
                field: "kappa_set",
                reason: "weights must be finite and non-negative".into(),
            });
        }
        Ok(())
    }
}

/// Minimum completion time `ceil(E / beta)` in slots.
pub fn mct(demand: f64, beta: f64) -> usize {
    // Guard against ratios like 6.000000000000001 from float division.
    ((demand / beta) - 1e-12).ceil().max(1.0) as usize
}

/// Window length `ceil((1 + tww) * MCT)`.
pub fn window_len(demand: f64, beta: f64, tww: f64) -> usize {
    ((1.0 + tww) * mct(demand, beta) as f64 - 1e-12).ceil() as usize
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        // Keep the stream position independent of the range.
        let _: f64 = rng.gen();
        r[0]
    } else {
        rng.gen_range(r[0]..=r[1])
    }
}

/// One instance from `config.seed` with the given peak weight and width.
pub fn generate(config: &GeneratorConfig, kappa: f64, tww: f64) -> Result<Instance<f64>, GenError> {
    config.validate()?;
    let h = config.horizon;
    let mut customers = Vec::with_capacity(config.n_customers);
    for n in 0..config.n_customers {
        let base = (n as u64) << 8;
        let lambda = uniform(&mut stream(config.seed, base), config.lambda_range);
        let mut jobs = Vec::with_capacity(config.jobs_per_customer);
        for a in 0..config.jobs_per_customer {
            let mut rng = stream(config.seed, base | (a as u64 + 1));
            let beta = uniform(&mut rng, config.beta_range);
            let demand = uniform(&mut rng, config.demand_range);
            let len = window_len(demand, beta, tww);
            if len > h {
                return Err(GenError::WindowTooLong { len, horizon: h });
            }
            let begin = rng.gen_range(0..=h - len);
            jobs.push(Job {
                appliance: format!("a{a}"),
                demand,
                power_cap: beta,
                tw_begin: begin,
                tw_end: begin + len,
            });
        }
        customers.push(Customer {
            id: format!("c{n}"),
            lambda,
            jobs,
        });
    }
    Ok(Instance {
        horizon: h,
        price_cap: vec![config.p_max; h],
        kappa,
        competitor_prices: None,
        customers,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchItem {
    pub kappa: f64,
    pub tww: f64,
    pub seed: u64,
    pub instance: Instance<f64>,
}

/// Full design: every weight and width over `instances_per_kappa` seeds
/// `seed, seed + 1, ...`, the same seeds for every weight and width.
pub fn batch(config: &GeneratorConfig) -> Result<Vec<BatchItem>, GenError> {
    config.validate()?;
    let mut out = Vec::new();
    for &kappa in &config.kappa_set {
        for &tww in &config.tww {
            for i in 0..config.instances_per_kappa {
                let seed = config.seed.wrapping_add(i as u64);
                let cfg = GeneratorConfig {
                    seed,
                    ..config.clone()
                };
                out.push(BatchItem {
                    kappa,
                    tww,
                    seed,
                    instance: generate(&cfg, kappa, tww)?,
                });
            }
        }
    }
    Ok(out)
}
