mod common;

use std::fs;

use common::{instance, job, tiny};
use peakgrid::generator::GeneratorConfig;
use peakgrid::harness::{
    run_experiment, solve_instance, time_rows, verify_result, ExperimentPlan, InstanceRun, ModelKind, COST_HEADER,
    TIME_HEADER,
};
use peakgrid_milp::SolverLimits;

fn two_job() -> peakgrid::Instance {
    instance(
        4,
        10.0,
        3.0,
        vec![(1.0, vec![job(3.0, 2.0, 0, 2)]), (0.5, vec![job(2.0, 1.5, 1, 3)])],
    )
}

fn failed(rec: &peakgrid::harness::SolveRecord) -> Vec<String> {
    verify_result(rec).failures().map(|c| c.detail.clone()).collect()
}

#[test]
fn solved_records_verify() {
    let limits = SolverLimits::default();
    for kind in [ModelKind::Bc, ModelKind::Mp] {
        let rec = solve_instance(&two_job(), kind, &limits).unwrap();
        assert!(verify_result(&rec).passed(), "{kind}: {}", verify_result(&rec));
    }
    let rec = solve_instance(&two_job().with_competitor_at_cap(), ModelKind::Cp, &limits).unwrap();
    assert!(verify_result(&rec).passed(), "{}", verify_result(&rec));
    let bc = solve_instance(&tiny(1.0), ModelKind::Bc, &limits).unwrap();
    assert_eq!(bc.status, "Evaluated");
    assert!(bc.stats.is_none());
}

#[test]
fn tampered_price_is_caught() {
    let mut rec = solve_instance(&tiny(5.0), ModelKind::Mp, &SolverLimits::default()).unwrap();
    rec.prices[1] = 2.0;
    let f = failed(&rec);
    assert!(f.iter().any(|d| d.contains("follower response mismatch")), "{f:?}");
}

#[test]
fn leader_supply_above_competitor_is_caught() {
    let mut rec = solve_instance(&two_job().with_competitor_at_cap(), ModelKind::Cp, &SolverLimits::default()).unwrap();
    let (j, k) = rec
        .schedule
        .x
        .iter()
        .enumerate()
        .find_map(|(j, row)| row.iter().position(|&x| x > 0.1).map(|k| (j, k)))
        .unwrap();
    let h = rec.instance.jobs()[j].slots[k];
    rec.instance.competitor_prices.as_mut().unwrap()[h] = rec.prices[h] - 1.0;
    let f = failed(&rec);
    assert!(f.iter().any(|d| d.contains("dominance violation")), "{f:?}");
}

fn tiny_plan(dir: &std::path::Path) -> ExperimentPlan {
    let cfg = GeneratorConfig {
        n_customers: 2,
        jobs_per_customer: 2,
        kappa_set: vec![200.0, 600.0],
        instances_per_kappa: 2,
        ..GeneratorConfig::default()
    };
    let mut plan = ExperimentPlan::new(cfg, SolverLimits::default().with_node_limit(2000));
    plan.threads = 1;
    plan.out = Some(dir.to_path_buf());
    plan
}

#[test]
fn experiment_writes_tables_deterministically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let runs = run_experiment(&tiny_plan(a.path())).unwrap();
    run_experiment(&tiny_plan(b.path())).unwrap();
    assert_eq!(runs.len(), 8);
    for r in &runs {
        for kind in [ModelKind::Bc, ModelKind::Mp, ModelKind::Cp] {
            assert!(verify_result(r.get(kind).unwrap()).passed());
        }
    }
    for name in ["table1.csv", "table2.csv", "figures.csv", "loadcurve.csv"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let t1 = fs::read_to_string(a.path().join("table1.csv")).unwrap();
    assert_eq!(t1.lines().next().unwrap(), COST_HEADER.join(","));
    assert_eq!(t1.lines().last().unwrap().split(',').next(), Some("Average"));
    let t3 = fs::read_to_string(a.path().join("table3.csv")).unwrap();
    assert_eq!(t3.lines().next().unwrap(), TIME_HEADER.join(","));
    assert_eq!(t3.lines().count(), 3);
    let results = fs::read_dir(a.path().join("results")).unwrap().count();
    assert_eq!(results, 8 * 3);
}

#[test]
fn unsolved_runs_report_gap() {
    let inst = peakgrid::generator::generate(&GeneratorConfig::desk(), 1000.0, 1.0).unwrap();
    let limits = SolverLimits::default().with_node_limit(3);
    let mp = solve_instance(&inst, ModelKind::Mp, &limits).unwrap();
    assert_eq!(mp.status, "NodeLimit");
    assert!(!mp.solved());
    let gap = mp.gap.unwrap();
    assert!(gap > 0.0);
    assert!(verify_result(&mp).passed(), "{}", verify_result(&mp));
    let run = InstanceRun {
        kappa: 1000.0,
        tww: 1.0,
        seed: 1,
        bc: None,
        mp: Some(mp),
        cp: None,
    };
    let rows = time_rows(&[1000.0], &[&run]);
    let (_, vals, unsolved) = rows[0];
    assert_eq!(unsolved, [1, 0]);
    assert_eq!(vals[0], None);
    assert!((vals[2].unwrap() - 100.0 * gap).abs() < 1e-9);
}
