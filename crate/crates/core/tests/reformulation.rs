mod common;

use common::{arb_instance, grid_best, instance, job, prices_within, tiny};
use peakgrid::follower::{best_response, optimistic_response};
use peakgrid::generator::{generate, GeneratorConfig};
use peakgrid::harness::{solve_instance, ModelKind};
use peakgrid::model::{peak, Instance};
use peakgrid::reformulation::{
    build_cp_mip, build_cp_mip_with, build_mp_mip, build_mp_mip_with, cap_price_point, compute_big_ms, expected_size, extract_solution,
    point_from, BilevelHook, MipOptions,
};
use peakgrid_milp::{solve_with, SolverLimits, VarKind};
use proptest::prelude::*;

fn limits() -> SolverLimits {
    SolverLimits::default()
}

fn net(inst: &Instance<f64>, kind: ModelKind) -> f64 {
    let rec = solve_instance(inst, kind, &limits()).unwrap();
    assert_eq!(rec.status, "Optimal");
    rec.metrics.net_revenue
}

fn small(seed: u64, kappa: f64) -> Instance<f64> {
    let cfg = GeneratorConfig {
        n_customers: 3,
        jobs_per_customer: 1,
        seed,
        ..GeneratorConfig::default()
    };
    generate(&cfg, kappa, 0.2).unwrap()
}

#[test]
fn big_m_formulas() {
    let inst = instance(3, 10.0, 0.0, vec![(1.0, vec![job(3.0, 2.0, 0, 2)])]);
    let m = compute_big_ms(&inst)[0];
    assert_eq!((m.vmax, m.m1, m.m2, m.m3), (13.0, 26.0, 13.0, 13.0));
    let flat = instance(3, 0.0, 0.0, vec![(0.0, vec![job(3.0, 2.0, 0, 2)])]);
    let m = compute_big_ms(&flat)[0];
    assert_eq!((m.vmax, m.m1), (0.0, 2.0));
}

#[test]
fn two_slot_model_size() {
    let mip = build_mp_mip(&tiny(1.0)).unwrap();
    // 2 p, gamma, 2 x, 2 w, v, 2 psi, 2 xi, eps.
    assert_eq!(mip.model.num_vars(), 13);
    // 2 peak, 3 primal, 2 dual, 4 xi, 4 psi and 2 eps rows.
    assert_eq!(mip.model.num_constraints(), 17);
    assert_eq!(mip.model.num_binaries(), 5);
}

#[test]
fn hand_solved_optima() {
    let rec = solve_instance(&tiny(1.0), ModelKind::Mp, &limits()).unwrap();
    assert!((rec.metrics.net_revenue - 9.0).abs() < 1e-6);
    assert!((rec.prices[0] - 10.0).abs() < 1e-6);
    assert!((rec.schedule.x[0][0] - 1.0).abs() < 1e-6);
    assert!((rec.gamma - 1.0).abs() < 1e-6);

    let rec = solve_instance(&tiny(5.0), ModelKind::Mp, &limits()).unwrap();
    assert!((rec.metrics.net_revenue - 6.5).abs() < 1e-6);
    assert!((rec.prices[0] - 10.0).abs() < 1e-6 && (rec.prices[1] - 8.0).abs() < 1e-6);
    assert!((rec.schedule.x[0][0] - 0.5).abs() < 1e-6 && (rec.schedule.x[0][1] - 0.5).abs() < 1e-6);
    assert!((rec.gamma - 0.5).abs() < 1e-6);
}

#[test]
fn free_peak_and_no_delay_sells_everything_at_cap() {
    let mut inst = small(4, 0.0);
    for c in &mut inst.customers {
        c.lambda = 0.0;
    }
    let total: f64 = inst.customers.iter().flat_map(|c| &c.jobs).map(|j| j.demand).sum();
    let got = net(&inst, ModelKind::Mp);
    assert!((got - total * 100.0).abs() < 1e-6 * got);
}

#[test]
fn empty_instance_is_trivial() {
    let inst = instance(4, 10.0, 3.0, vec![]);
    let rec = solve_instance(&inst, ModelKind::Mp, &limits()).unwrap();
    assert_eq!(rec.objective, Some(0.0));
    assert_eq!(rec.gamma, 0.0);
}

fn solve_with_options(inst: &Instance<f64>, opts: &MipOptions<f64>) -> f64 {
    let mip = if inst.competitor_prices.is_some() {
        build_cp_mip_with(inst, opts)
    } else {
        build_mp_mip_with(inst, opts)
    }
    .unwrap();
    let warm = cap_price_point(&mip).unwrap();
    let mut hook = BilevelHook::new(&mip);
    let res = solve_with(&mip.model, &limits(), &mut hook, Some(&warm)).unwrap();
    assert!(res.status.is_proven());
    res.objective.unwrap()
}

#[test]
fn doubling_big_ms_keeps_the_optimum() {
    let doubled = MipOptions {
        m_scale: 2.0,
        tighten: false,
        value_cuts: false,
    };
    for seed in 1..=4 {
        for inst in [small(seed, 400.0), small(seed, 800.0).with_competitor_at_cap()] {
            let base = solve_with_options(&inst, &MipOptions::default());
            let wide = solve_with_options(&inst, &doubled);
            assert!((wide - base).abs() < 1e-6 * base.abs().max(1.0), "seed {seed}: {base} vs {wide}");
        }
    }
}

#[test]
fn doubling_big_ms_on_competitor_ties() {
    // Competitor prices inside the leader's range make both suppliers'
    // duals matter.
    for seed in 1..=6 {
        let mut inst = small(seed, 300.0);
        inst.competitor_prices = Some((0..inst.horizon).map(|h| 40.0 + 5.0 * (h % 7) as f64).collect());
        let base = solve_with_options(&inst, &MipOptions::default());
        let wide = solve_with_options(
            &inst,
            &MipOptions {
                m_scale: 2.0,
                tighten: false,
                value_cuts: false,
            },
        );
        assert!((wide - base).abs() < 1e-6 * base.abs().max(1.0), "seed {seed}: {base} vs {wide}");
    }
}

#[test]
fn expensive_competitor_changes_nothing() {
    for seed in 1..=3 {
        let inst = small(seed, 600.0);
        let mut cp = inst.clone();
        cp.competitor_prices = Some(vec![1000.0; inst.horizon]);
        let rec = solve_instance(&cp, ModelKind::Cp, &limits()).unwrap();
        assert!(rec.schedule.x_bar.as_ref().unwrap().iter().flatten().all(|&v| v < 1e-9));
        let mp = net(&inst, ModelKind::Mp);
        assert!((rec.metrics.net_revenue - mp).abs() < 1e-6 * mp.abs().max(1.0));
    }
}

#[test]
fn free_competitor_takes_all_load() {
    let mut inst = instance(3, 10.0, 1.0, vec![(1.0, vec![job(3.0, 2.0, 0, 2)])]);
    inst.competitor_prices = Some(vec![0.0; 3]);
    let rec = solve_instance(&inst, ModelKind::Cp, &limits()).unwrap();
    assert!(rec.metrics.revenue.abs() < 1e-9);
    assert!(rec.gamma.abs() < 1e-9);
    let served: f64 = rec.schedule.x_bar.unwrap().iter().flatten().sum();
    assert!((served - 3.0).abs() < 1e-9);
}

#[test]
fn competitive_optimum_dominates_monopoly() {
    for seed in 1..=20 {
        let inst = small(seed, 200.0 * (1 + seed % 5) as f64);
        let mp = net(&inst, ModelKind::Mp);
        let cp = net(&inst.with_competitor_at_cap(), ModelKind::Cp);
        assert!(cp >= mp - 1e-6 * mp.abs().max(1.0), "seed {seed}: cp {cp} < mp {mp}");
    }
}

#[test]
fn monopoly_model_refuses_competitor_prices() {
    let inst = tiny(1.0).with_competitor_at_cap();
    assert!(build_mp_mip(&inst).is_err());
    assert_eq!(build_cp_mip(&tiny(1.0)).unwrap_err().to_string(), "competitor prices required");
}

#[test]
fn extraction_rejects_a_tampered_point() {
    let inst = small(2, 400.0);
    let mip = build_mp_mip(&inst).unwrap();
    let mut point = cap_price_point(&mip).unwrap();
    point[mip.index.gamma.index()] += 1.0;
    assert!(extract_solution(&mip, &point).is_err());
    let mut point = cap_price_point(&mip).unwrap();
    point[mip.index.jobs[0].x[0].index()] += 0.5;
    assert!(extract_solution(&mip, &point).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn sizes_match_closed_form(inst in arb_instance(8, 4), cuts in any::<bool>()) {
        let opts = MipOptions { value_cuts: cuts, ..MipOptions::default() };
        let mp = build_mp_mip_with(&inst, &opts).unwrap();
        prop_assert_eq!(expected_size(&inst, false, &opts), (mp.model.num_vars(), mp.model.num_constraints()));
        let cpi = inst.with_competitor_at_cap();
        let cp = build_cp_mip(&cpi).unwrap();
        prop_assert_eq!(expected_size(&cpi, true, &MipOptions::default()), (cp.model.num_vars(), cp.model.num_constraints()));
        // Every binary sits in exactly one complementarity pair.
        for model in [&mp.model, &cp.model] {
            let bins: Vec<usize> = model.binaries().map(|b| b.index()).collect();
            let mut paired: Vec<usize> = model.pairs.iter().map(|p| p.binary.index()).collect();
            paired.sort();
            prop_assert_eq!(bins, paired);
            prop_assert!(model.vars.iter().filter(|v| v.kind == VarKind::Binary).count() == model.pairs.len());
        }
    }

    /// At a follower response the linearized objective is revenue minus
    /// peak cost, and the point reads back unchanged.
    #[test]
    fn strong_duality_and_round_trip(
        inst in arb_instance(6, 3),
        frac in prop::collection::vec(0.0f64..=1.0, 6),
        competitive in any::<bool>(),
    ) {
        let inst = if competitive { inst.with_competitor_at_cap() } else { inst };
        let p = prices_within(&inst, &frac);
        let mip = if competitive { build_cp_mip(&inst) } else { build_mp_mip(&inst) }.unwrap();
        for sched in [best_response(&inst, &p).unwrap().schedule, optimistic_response(&inst, &p).unwrap().schedule] {
            let point = point_from(&mip, &p, &sched).unwrap();
            prop_assert!(mip.model.worst_violation(&point, 1e-7).is_none());
            prop_assert!(mip.model.complementarity_residual(&point) <= 1e-9);
            let jobs = inst.jobs();
            let revenue: f64 = jobs
                .iter()
                .zip(&sched.x)
                .flat_map(|(j, row)| j.slots.iter().zip(row).map(|(&h, &x)| p[h] * x))
                .sum();
            let gamma = peak(&sched.leader_load(&jobs, inst.horizon));
            let want = revenue - inst.kappa * gamma;
            let lin = mip.model.objective_value(&point);
            prop_assert!((lin - want).abs() <= 1e-6 * want.abs().max(1.0), "{} vs {}", lin, want);

            let ex = extract_solution(&mip, &point).unwrap();
            prop_assert_eq!(&ex.prices, &p);
            prop_assert_eq!(&ex.schedule, &sched);
            prop_assert_eq!(ex.gamma, gamma);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn optimum_beats_the_price_grid(inst in arb_instance(3, 2)) {
        let rec = solve_instance(&inst, ModelKind::Mp, &limits()).unwrap();
        prop_assert_eq!(&rec.status, "Optimal");
        let grid = grid_best(&inst, 20);
        let got = rec.objective.unwrap();
        prop_assert!(got >= grid - 1e-6, "mip {} below grid {}", got, grid);
    }
}
