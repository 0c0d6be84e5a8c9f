//! Peak-aware bilevel electricity pricing.
//!
//! A leader sets hourly prices, customers schedule flexible jobs to
//! minimize bill plus delay cost, and the leader pays for its peak load.
//! The crate builds exact single-level MIPs for the monopoly and the
//! competitive setting, solves them with `peakgrid-milp`, and evaluates
//! the results against a no-flexibility base case.

pub mod follower;
pub mod generator;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod reformulation;

pub use peakgrid_milp::Scalar;

pub type Job = model::Job<f64>;
pub type Customer = model::Customer<f64>;
pub type Instance = model::Instance<f64>;
pub type Schedule = model::Schedule<f64>;
pub type JobView = model::JobView<f64>;
pub type FollowerSolution = follower::FollowerSolution<f64>;
pub type BilevelMip = reformulation::BilevelMip<f64>;
pub type Extracted = reformulation::Extracted<f64>;
pub type MetricsReport = metrics::MetricsReport<f64>;
