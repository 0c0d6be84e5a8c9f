//! Solving, verification and the experiment sweep.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use peakgrid_milp::{solve_with, SolveStatus, SolverLimits};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::follower::{best_response, follower_objective, kkt_certificate};
use crate::generator::{batch, BatchItem, GenError, GeneratorConfig};
use crate::metrics::{base_case, compare, evaluate, mean, MetricsError, MetricsReport, Percentages};
use crate::model::{peak, Instance, ModelError, Schedule};
use crate::reformulation::{build_cp_mip, build_mp_mip, cap_price_point, extract_solution, BilevelHook, ReformError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Reform(#[from] ReformError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error("solver: {0}")]
    Solver(String),
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Bc,
    Mp,
    Cp,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Bc => "bc",
            ModelKind::Mp => "mp",
            ModelKind::Cp => "cp",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverStatsOut {
    pub nodes: u64,
    pub lp_iterations: u64,
    pub incumbents: u32,
    pub wall_time: f64,
}

/// Everything a solve produced; self-contained so it can be re-verified.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub model: ModelKind,
    /// `Evaluated` for the base case, otherwise the search status.
    pub status: String,
    pub instance: Instance<f64>,
    pub prices: Vec<f64>,
    pub schedule: Schedule<f64>,
    pub gamma: f64,
    pub metrics: MetricsReport<f64>,
    pub objective: Option<f64>,
    pub best_bound: Option<f64>,
    pub gap: Option<f64>,
    pub stats: Option<SolverStatsOut>,
}

impl SolveRecord {
    pub fn solved(&self) -> bool {
        self.status == "Optimal" || self.status == "GapLimit" || self.status == "Evaluated"
    }
}

fn status_name(s: SolveStatus) -> String {
    format!("{s:?}")
}

/// Base case or one of the bilevel models on `inst`. The competitive model
/// needs competitor prices on the instance; the monopoly model refuses
/// them.
pub fn solve_instance(inst: &Instance<f64>, kind: ModelKind, limits: &SolverLimits) -> Result<SolveRecord, HarnessError> {
    if kind == ModelKind::Bc {
        let (prices, schedule, metrics) = base_case(inst)?;
        return Ok(SolveRecord {
            model: kind,
            status: "Evaluated".into(),
            instance: inst.clone(),
            prices,
            gamma: metrics.peak_load,
            schedule,
            metrics,
            objective: None,
            best_bound: None,
            gap: None,
            stats: None,
        });
    }
    let mip = match kind {
        ModelKind::Mp => build_mp_mip(inst)?,
        _ => build_cp_mip(inst)?,
    };
    let warm = cap_price_point(&mip)?;
    let mut hook = BilevelHook::new(&mip);
    let res = solve_with(&mip.model, limits, &mut hook, Some(&warm)).map_err(|e| HarnessError::Solver(e.to_string()))?;
    let values = res
        .values
        .as_ref()
        .ok_or_else(|| HarnessError::Solver(format!("no feasible point ({:?})", res.status)))?;
    let ex = extract_solution(&mip, values)?;
    let metrics = evaluate(inst, &ex.prices, &ex.schedule)?;
    info!(
        "{kind} kappa={} status={:?} obj={:.4} nodes={} time={:.2}s",
        inst.kappa,
        res.status,
        res.objective.unwrap_or(f64::NAN),
        res.stats.nodes,
        res.stats.wall_time
    );
    Ok(SolveRecord {
        model: kind,
        status: status_name(res.status),
        instance: inst.clone(),
        prices: ex.prices,
        schedule: ex.schedule,
        gamma: ex.gamma,
        metrics,
        objective: res.objective,
        best_bound: Some(res.best_bound),
        gap: res.gap,
        stats: Some(SolverStatsOut {
            nodes: res.stats.nodes,
            lp_iterations: res.stats.lp_iterations,
            incumbents: res.stats.incumbents,
            wall_time: res.stats.wall_time,
        }),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail,
        });
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail)?;
        }
        Ok(())
    }
}

/// Tolerances used by [`verify_result`].
pub const VERIFY_OBJ_TOL: f64 = 1e-6;
pub const VERIFY_KKT_TOL: f64 = 1e-8;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

/// Re-checks a record from scratch: follower optimality at the reported
/// prices, the KKT certificate, the strong-duality identity, the peak, the
/// competitor dominance rule and the reported metrics.
pub fn verify_result(rec: &SolveRecord) -> VerifyReport {
    let mut rep = VerifyReport::default();
    let inst = &rec.instance;
    let jobs = inst.jobs();
    if let Err(e) = inst.check_prices(&rec.prices).and_then(|_| rec.schedule.check_shape(&jobs)) {
        rep.push("shape", false, e.to_string());
        return rep;
    }
    let in_range = rec
        .prices
        .iter()
        .zip(&inst.price_cap)
        .all(|(&p, &cap)| p >= -1e-9 && p <= cap + 1e-9);
    rep.push("price bounds", in_range, "0 <= p <= p_max".into());

    match evaluate(inst, &rec.prices, &rec.schedule) {
        Ok(m) => {
            let worst = [
                rel(m.eb, rec.metrics.eb),
                rel(m.ic, rec.metrics.ic),
                rel(m.tc, rec.metrics.tc),
                rel(m.net_revenue, rec.metrics.net_revenue),
                rel(m.peak_load, rec.metrics.peak_load),
            ]
            .into_iter()
            .fold(0.0, f64::max);
            rep.push("metrics", worst <= VERIFY_OBJ_TOL, format!("largest relative difference {worst:.3e}"));
        }
        Err(e) => rep.push("metrics", false, e.to_string()),
    }

    let load_peak = peak(&rec.schedule.leader_load(&jobs, inst.horizon));
    let dg = (rec.gamma - load_peak).abs() / 1f64.max(load_peak);
    rep.push("peak", dg <= VERIFY_OBJ_TOL, format!("gamma {} vs max load {}", rec.gamma, load_peak));

    if rec.model == ModelKind::Bc {
        return rep;
    }

    if let (Some(_), Ok(pb)) = (&rec.schedule.x_bar, inst.competitor()) {
        let mut worst = 0.0f64;
        for (j, job) in jobs.iter().enumerate() {
            for (k, &h) in job.slots.iter().enumerate() {
                if rec.prices[h] > pb[h] + 1e-9 {
                    worst = worst.max(rec.schedule.x[j][k]);
                }
            }
        }
        rep.push(
            "dominance",
            worst <= 1e-9,
            if worst <= 1e-9 {
                "no leader supply where the competitor is cheaper".into()
            } else {
                format!("dominance violation: leader supplies {worst:.3e} where the competitor is cheaper")
            },
        );
    }

    match best_response(inst, &rec.prices) {
        Ok(best) => {
            let got = follower_objective(inst, &rec.prices, &rec.schedule);
            let d = rel(got, best.objective);
            rep.push(
                "follower",
                d <= VERIFY_OBJ_TOL,
                if d <= VERIFY_OBJ_TOL {
                    format!("objective {got:.6} matches best response")
                } else {
                    format!("follower response mismatch: schedule costs {got:.6}, best response {:.6}", best.objective)
                },
            );
        }
        Err(e) => rep.push("follower", false, e.to_string()),
    }

    match kkt_certificate(inst, &rec.prices, &rec.schedule) {
        Ok(cert) => {
            rep.push(
                "kkt",
                cert.residual <= VERIFY_KKT_TOL,
                format!("scaled residual {:.3e}", cert.residual),
            );
            // Linearized objective built from the certificate's duals.
            let mut lin = -inst.kappa * rec.gamma;
            for (j, job) in jobs.iter().enumerate() {
                lin += job.demand * cert.marginal[j];
                for (k, &c) in job.cost.iter().enumerate() {
                    lin -= job.beta * cert.capacity_dual[j][k] + c * rec.schedule.x[j][k];
                    if let (Some(xb), Ok(pb)) = (&rec.schedule.x_bar, inst.competitor()) {
                        lin -= (pb[job.slots[k]] + c) * xb[j][k];
                    }
                }
            }
            let direct = rec.metrics.revenue - inst.kappa * rec.gamma;
            let mut d = rel(lin, direct);
            if let Some(obj) = rec.objective {
                d = d.max(rel(obj, direct));
            }
            rep.push(
                "strong duality",
                d <= VERIFY_OBJ_TOL,
                format!("linearized {lin:.6}, revenue minus peak cost {direct:.6}"),
            );
        }
        Err(e) => rep.push("kkt", false, e.to_string()),
    }
    rep
}

/// Which models to run, with what limits, writing where.
#[derive(Clone, Debug)]
pub struct ExperimentPlan {
    pub generator: GeneratorConfig,
    pub limits: SolverLimits,
    pub models: Vec<ModelKind>,
    /// Worker threads across instances; 0 picks the machine default.
    pub threads: usize,
    pub out: Option<PathBuf>,
}

impl ExperimentPlan {
    pub fn new(generator: GeneratorConfig, limits: SolverLimits) -> Self {
        Self {
            generator,
            limits,
            models: vec![ModelKind::Bc, ModelKind::Mp, ModelKind::Cp],
            threads: 0,
            out: None,
        }
    }
}

/// Results of one generated instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceRun {
    pub kappa: f64,
    pub tww: f64,
    pub seed: u64,
    pub bc: Option<SolveRecord>,
    pub mp: Option<SolveRecord>,
    pub cp: Option<SolveRecord>,
}

impl InstanceRun {
    pub fn get(&self, kind: ModelKind) -> Option<&SolveRecord> {
        match kind {
            ModelKind::Bc => self.bc.as_ref(),
            ModelKind::Mp => self.mp.as_ref(),
            ModelKind::Cp => self.cp.as_ref(),
        }
    }
}

fn run_one(item: &BatchItem, plan: &ExperimentPlan) -> InstanceRun {
    let attempt = |kind: ModelKind| -> Option<SolveRecord> {
        if !plan.models.contains(&kind) {
            return None;
        }
        let inst = if kind == ModelKind::Cp {
            item.instance.with_competitor_at_cap()
        } else {
            item.instance.clone()
        };
        match solve_instance(&inst, kind, &plan.limits) {
            Ok(r) => Some(r),
            Err(e) => {
                warn!("{kind} kappa={} tww={} seed={}: {e}", item.kappa, item.tww, item.seed);
                None
            }
        }
    };
    // Always have the base case: it is the denominator of every table.
    let bc = solve_instance(&item.instance, ModelKind::Bc, &plan.limits).ok();
    InstanceRun {
        kappa: item.kappa,
        tww: item.tww,
        seed: item.seed,
        bc,
        mp: attempt(ModelKind::Mp),
        cp: attempt(ModelKind::Cp),
    }
}

/// Generates the design, solves every instance and, when an output
/// directory is set, writes per-instance results and the CSV tables.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Vec<InstanceRun>, HarnessError> {
    let items = batch(&plan.generator)?;
    info!("{} instances", items.len());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.threads)
        .build()
        .map_err(|e| HarnessError::Solver(e.to_string()))?;
    let runs: Vec<InstanceRun> = pool.install(|| items.par_iter().map(|it| run_one(it, plan)).collect());
    if let Some(dir) = &plan.out {
        write_outputs(dir, &plan.generator, &runs)?;
    }
    Ok(runs)
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T, HarnessError> {
    r.map_err(|e| HarnessError::Io(path.to_path_buf(), e))
}

/// Writes `results/*.json` and all CSV tables under `dir`.
pub fn write_outputs(dir: &Path, config: &GeneratorConfig, runs: &[InstanceRun]) -> Result<(), HarnessError> {
    let res_dir = dir.join("results");
    io(&res_dir, fs::create_dir_all(&res_dir))?;
    for r in runs {
        for kind in [ModelKind::Bc, ModelKind::Mp, ModelKind::Cp] {
            if let Some(rec) = r.get(kind) {
                let path = res_dir.join(format!("tww{}_k{}_s{}_{kind}.json", r.tww, r.kappa, r.seed));
                io(&path, fs::write(&path, serde_json::to_string_pretty(rec)?))?;
            }
        }
    }
    for (i, &tww) in config.tww.iter().enumerate() {
        let sel: Vec<&InstanceRun> = runs.iter().filter(|r| r.tww == tww).collect();
        let n = config.tww.len();
        write_csv(&dir.join(format!("table{}.csv", i + 1)), &cost_table(&config.kappa_set, &sel))?;
        write_csv(&dir.join(format!("table{}.csv", n + i + 1)), &time_table(&config.kappa_set, &sel))?;
    }
    write_csv(&dir.join("figures.csv"), &figures_table(config, runs))?;
    write_csv(&dir.join("loadcurve.csv"), &load_curve_table(config, runs))?;
    Ok(())
}

type Table = Vec<Vec<String>>;

fn write_csv(path: &Path, rows: &Table) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| HarnessError::Io(path.to_path_buf(), e))?;
    Ok(())
}

fn cell(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| format!("{v:.2}"))
}

fn pct(r: &InstanceRun, kind: ModelKind) -> Option<Percentages<f64>> {
    compare(&r.get(kind)?.metrics, &r.bc.as_ref()?.metrics)
}

pub const COST_HEADER: [&str; 7] = ["κ", "MP_EB", "MP_IC", "MP_TC", "CP_EB", "CP_IC", "CP_TC"];
pub const TIME_HEADER: [&str; 7] = [
    "κ",
    "avg_time_MP",
    "avg_time_CP",
    "avg_gap_MP",
    "avg_gap_CP",
    "unsolved_MP",
    "unsolved_CP",
];

/// Average cost shares per weight, plus an overall `Average` row.
pub fn cost_rows(kappas: &[f64], runs: &[&InstanceRun]) -> Vec<(String, [Option<f64>; 6])> {
    let shares = |sel: &[&InstanceRun]| -> [Option<f64>; 6] {
        let mut out = [None; 6];
        for (m, kind) in [ModelKind::Mp, ModelKind::Cp].into_iter().enumerate() {
            let p: Vec<Percentages<f64>> = sel.iter().filter_map(|r| pct(r, kind)).collect();
            out[3 * m] = mean(p.iter().map(|p| p.eb));
            out[3 * m + 1] = mean(p.iter().map(|p| p.ic));
            out[3 * m + 2] = mean(p.iter().map(|p| p.tc));
        }
        out
    };
    let mut rows: Vec<(String, [Option<f64>; 6])> = kappas
        .iter()
        .map(|&k| {
            let sel: Vec<&InstanceRun> = runs.iter().copied().filter(|r| r.kappa == k).collect();
            (format!("{k}"), shares(&sel))
        })
        .collect();
    rows.push(("Average".into(), shares(runs)));
    rows
}

fn cost_table(kappas: &[f64], runs: &[&InstanceRun]) -> Table {
    let mut t = vec![COST_HEADER.iter().map(|s| s.to_string()).collect()];
    for (label, vals) in cost_rows(kappas, runs) {
        let mut row = vec![label];
        row.extend(vals.iter().map(|&v| cell(v)));
        t.push(row);
    }
    t
}

/// Per weight: mean wall time of solved runs, mean gap (percent) of
/// unsolved runs and the unsolved count, for MP then CP.
pub fn time_rows(kappas: &[f64], runs: &[&InstanceRun]) -> Vec<(f64, [Option<f64>; 4], [usize; 2])> {
    kappas
        .iter()
        .map(|&k| {
            let mut vals = [None; 4];
            let mut unsolved = [0; 2];
            for (m, kind) in [ModelKind::Mp, ModelKind::Cp].into_iter().enumerate() {
                let recs: Vec<&SolveRecord> = runs.iter().filter(|r| r.kappa == k).filter_map(|r| r.get(kind)).collect();
                let time = |r: &&SolveRecord| r.stats.as_ref().map_or(0.0, |s| s.wall_time);
                vals[m] = mean(recs.iter().filter(|r| r.solved()).map(time));
                let open: Vec<&&SolveRecord> = recs.iter().filter(|r| !r.solved()).collect();
                unsolved[m] = open.len();
                vals[2 + m] = if recs.is_empty() {
                    None
                } else {
                    Some(mean(open.iter().map(|r| 100.0 * r.gap.unwrap_or(f64::INFINITY))).unwrap_or(0.0))
                };
            }
            (k, vals, unsolved)
        })
        .collect()
}

fn time_table(kappas: &[f64], runs: &[&InstanceRun]) -> Table {
    let mut t = vec![TIME_HEADER.iter().map(|s| s.to_string()).collect()];
    for (k, vals, unsolved) in time_rows(kappas, runs) {
        let mut row = vec![format!("{k}")];
        row.extend(vals.iter().map(|&v| cell(v)));
        row.extend(unsolved.iter().map(|u| u.to_string()));
        t.push(row);
    }
    t
}

fn figures_table(config: &GeneratorConfig, runs: &[InstanceRun]) -> Table {
    let mut t = vec![[
        "tww",
        "κ",
        "BC_peak_cost",
        "MP_peak_cost",
        "CP_peak_cost",
        "BC_peak_load",
        "MP_peak_load",
        "CP_peak_load",
        "BC_net_revenue",
        "MP_net_revenue",
        "CP_net_revenue",
        "CP_total_peak_load",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()];
    let kinds = [ModelKind::Bc, ModelKind::Mp, ModelKind::Cp];
    for &tww in &config.tww {
        for &k in &config.kappa_set {
            let sel: Vec<&InstanceRun> = runs.iter().filter(|r| r.tww == tww && r.kappa == k).collect();
            let avg = |kind: ModelKind, f: fn(&MetricsReport<f64>) -> f64| {
                mean(sel.iter().filter_map(|r| r.get(kind)).map(|r| f(&r.metrics)))
            };
            let mut row = vec![format!("{tww}"), format!("{k}")];
            row.extend(kinds.iter().map(|&m| cell(avg(m, |r| r.peak_cost))));
            row.extend(kinds.iter().map(|&m| cell(avg(m, |r| r.peak_load))));
            row.extend(kinds.iter().map(|&m| cell(avg(m, |r| r.net_revenue))));
            row.push(cell(avg(ModelKind::Cp, |r| r.total_peak_load)));
            t.push(row);
        }
    }
    t
}

/// Load and price per slot for the first seed of each width, every weight
/// and model.
fn load_curve_table(config: &GeneratorConfig, runs: &[InstanceRun]) -> Table {
    let mut t = vec![["tww", "κ", "model", "slot", "leader_load", "competitor_load", "price"]
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()];
    for &tww in &config.tww {
        for &k in &config.kappa_set {
            let Some(r) = runs.iter().find(|r| r.tww == tww && r.kappa == k && r.seed == config.seed) else {
                continue;
            };
            for kind in [ModelKind::Bc, ModelKind::Mp, ModelKind::Cp] {
                let Some(rec) = r.get(kind) else { continue };
                let jobs = rec.instance.jobs();
                let lead = rec.schedule.leader_load(&jobs, rec.instance.horizon);
                let total = rec.schedule.total_load(&jobs, rec.instance.horizon);
                for h in 0..rec.instance.horizon {
                    t.push(vec![
                        format!("{tww}"),
                        format!("{k}"),
                        kind.to_string(),
                        h.to_string(),
                        format!("{:.4}", lead[h]),
                        format!("{:.4}", total[h] - lead[h]),
                        format!("{:.4}", rec.prices[h]),
                    ]);
                }
            }
        }
    }
    t
}
