mod common;

use cgpp::bounds::{exact_solve, l1_lower_bound, l2_lower_bound};
use cgpp::estimator::{estimate_distribution, silverman_bandwidth, KdeEstimator, MemoryWindow, TypeDistribution};
use cgpp::lp::{solve_rmp_lp, RmpLp};
use cgpp::model::{validate_pattern, Instance, Pattern};
use cgpp::planner::{generate_plan, solve_integer_plan, DemandForecast};
use cgpp::policy::{run_policy, PolicyKind, PolicyParams};
use cgpp::pricing::{knapsack_profile, solve_pricing};
use cgpp::{solve_offline, PlannerConfig};
use rand::Rng;

use common::{brute_force_bins, dual_vertex_optimum, random_instance, random_rmp, rng};

#[test]
fn exact_solver_matches_brute_force() {
    let mut r = rng(11);
    for _ in 0..150 {
        let inst = random_instance(&mut r, 9, 5, 20);
        let exact = exact_solve(&inst).unwrap();
        assert_eq!(exact.bins as usize, brute_force_bins(&inst), "{}", inst.to_text());
        let mut load = vec![0u32; exact.bins as usize];
        for (s, &b) in inst.item_sizes().zip(&exact.assignment) {
            load[b] += s;
        }
        assert!(load.iter().all(|&l| l > 0 && l <= inst.capacity()));
        assert!(l1_lower_bound(&inst) <= l2_lower_bound(&inst));
        assert!(l2_lower_bound(&inst) <= exact.bins);
    }
}

#[test]
fn small_lps_match_vertex_enumeration() {
    let mut r = rng(12);
    for _ in 0..300 {
        let rmp = random_rmp(&mut r, 4, 6);
        let res = solve_rmp_lp(&RmpLp {
            columns: rmp.columns.clone(),
            demands: rmp.demands.clone(),
        })
        .unwrap();
        let oracle = dual_vertex_optimum(&rmp.columns, &rmp.demands);
        assert!((res.objective - oracle).abs() <= 1e-6, "{rmp:?}: {} vs {oracle}", res.objective);
    }
}

#[test]
fn scaling_demands_scales_objective_and_keeps_duals() {
    let mut r = rng(13);
    for _ in 0..200 {
        let rmp = random_rmp(&mut r, 6, 20);
        let base = solve_rmp_lp(&RmpLp {
            columns: rmp.columns.clone(),
            demands: rmp.demands.clone(),
        })
        .unwrap();
        let scaled = solve_rmp_lp(&RmpLp {
            columns: rmp.columns.clone(),
            demands: rmp.demands.iter().map(|q| q * 4.0).collect(),
        })
        .unwrap();
        assert!((scaled.objective - 4.0 * base.objective).abs() <= 1e-9 * base.objective.max(1.0));
        for (a, b) in base.duals.iter().zip(&scaled.duals) {
            assert!((a - b).abs() <= 1e-12, "{rmp:?}");
        }
    }
}

#[test]
fn lp_is_deterministic() {
    let mut r = rng(14);
    let rmp = random_rmp(&mut r, 6, 40);
    let problem = RmpLp {
        columns: rmp.columns,
        demands: rmp.demands,
    };
    assert_eq!(solve_rmp_lp(&problem).unwrap(), solve_rmp_lp(&problem).unwrap());
}

#[test]
fn priced_patterns_fit() {
    let mut r = rng(15);
    for _ in 0..300 {
        let inst = random_instance(&mut r, 30, 6, 40);
        let duals: Vec<f64> = (0..inst.num_types()).map(|_| r.random_range(0.0..1.0)).collect();
        let priced = solve_pricing(&duals, &inst);
        if !priced.pattern.is_zero() {
            validate_pattern(&priced.pattern, &inst).unwrap();
        }
        let profile = knapsack_profile(&duals, &inst);
        assert!(profile.windows(2).all(|w| w[0] <= w[1]));
        assert!((profile[inst.capacity() as usize] - priced.value).abs() <= 1e-9);
    }
}

#[test]
fn plans_cover_real_demand() {
    let mut r = rng(16);
    let config = PlannerConfig::default();
    for _ in 0..100 {
        let inst = random_instance(&mut r, 40, 8, 100);
        let q: Vec<f64> = inst
            .type_counts()
            .iter()
            .map(|&c| if r.random_range(0..5) == 0 { 0.0 } else { f64::from(c) * r.random_range(0.2..4.0) })
            .collect();
        let report = generate_plan(&inst, &DemandForecast::new(q.clone()).unwrap(), &config).unwrap();
        assert!(report.converged);
        assert!(report.lp_trace.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        let cover = report.plan.coverage(inst.num_types());
        for (c, &want) in cover.iter().zip(&q) {
            assert!(*c as f64 >= want - 1e-9, "coverage {cover:?} demand {q:?}");
        }
        let total = f64::from(report.plan.total_quota());
        assert!(total >= report.lp_objective - 1e-9);
        for e in report.plan.entries() {
            validate_pattern(&e.pattern, &inst).unwrap();
        }
    }
}

#[test]
fn ceiling_rounding_bounds_the_lp() {
    let mut r = rng(17);
    let limited = PlannerConfig {
        ip_node_limit: 1,
        ..PlannerConfig::default()
    };
    for _ in 0..100 {
        let rmp = random_rmp(&mut r, 6, 20);
        let lp = solve_rmp_lp(&RmpLp {
            columns: rmp.columns.clone(),
            demands: rmp.demands.clone(),
        })
        .unwrap();
        let quotas = solve_integer_plan(&rmp.columns, &DemandForecast::new(rmp.demands.clone()).unwrap(), &limited).unwrap();
        let total: u32 = quotas.iter().sum();
        assert!(f64::from(total) >= lp.objective - 1e-9);
        for (t, &q) in rmp.demands.iter().enumerate() {
            let cover: u32 = rmp.columns.iter().zip(&quotas).map(|(c, z)| c.count(t) * z).sum();
            assert!(f64::from(cover) >= q - 1e-9);
        }
    }
}

#[test]
fn offline_identical_items() {
    let inst = Instance::from_item_sizes(10, &[5; 10]).unwrap();
    let off = solve_offline(&inst, &PlannerConfig::default()).unwrap();
    assert_eq!(off.solution.num_bins(), 5);
    assert_eq!(off.histogram, vec![(Pattern::new(vec![2]), 5)]);
}

#[test]
fn known_distribution_over_whole_sequence_stays_near_plan() {
    let mut r = rng(18);
    for _ in 0..60 {
        let inst = random_instance(&mut r, 200, 6, 50);
        let off = solve_offline(&inst, &PlannerConfig::default()).unwrap();
        let planned = off.report.plan.total_quota() as usize;
        let params = PolicyParams {
            section_length: inst.len(),
            memory_length: 1,
            prior: Some(TypeDistribution::empirical(&inst).unwrap()),
            ..PolicyParams::default()
        };
        let run = run_policy(PolicyKind::CgppL, &inst, &params).unwrap();
        assert!(
            run.solution.num_bins() <= planned + inst.num_types(),
            "{} bins against a {planned}-bin plan\n{}",
            run.solution.num_bins(),
            inst.to_text()
        );
    }
}

/// Direct evaluation of the Gaussian mixture at the type sizes.
fn kde_oracle(window: &[u32], sizes: &[u32], bandwidth: f64) -> Vec<f64> {
    let dens: Vec<f64> = sizes
        .iter()
        .map(|&s| {
            window
                .iter()
                .map(|&w| {
                    let z = (f64::from(s) - f64::from(w)) / bandwidth;
                    (-z * z / 2.0).exp()
                })
                .sum()
        })
        .collect();
    let total: f64 = dens.iter().sum();
    dens.iter().map(|d| d / total).collect()
}

#[test]
fn kde_tracks_coarse_uniform_draws() {
    let sizes: Vec<u32> = (1..=9).map(|k| k * 10).collect();
    let inst = Instance::new(100, &sizes, vec![]).unwrap();
    let seeds = 400;
    let mut within = 0;
    for seed in 0..seeds {
        let mut r = rng(1000 + seed);
        let mut window = MemoryWindow::new(250);
        let mut drawn = Vec::new();
        for _ in 0..250 {
            let t = r.random_range(0..9);
            window.push(t);
            drawn.push(sizes[t]);
        }
        let h = silverman_bandwidth(&window, &inst);
        let est = estimate_distribution(&window, &inst, h).unwrap();
        let oracle = kde_oracle(&drawn, &sizes, h);
        for (a, b) in est.probs().iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-12);
        }
        let worst = est.probs().iter().map(|p| (p - 1.0 / 9.0).abs()).fold(0.0, f64::max);
        if worst <= 0.1 {
            within += 1;
        }
    }
    assert!(within as f64 >= 0.95 * seeds as f64, "{within} of {seeds} seeds within 0.1");
}

#[test]
fn incremental_kde_matches_direct_evaluation() {
    let mut r = rng(19);
    let inst = random_instance(&mut r, 1, 8, 100);
    let sizes = inst.sizes();
    let k = 50;
    let mut est = KdeEstimator::new(&inst, k);
    let mut recent: Vec<u32> = Vec::new();
    for step in 0..400 {
        let t = r.random_range(0..sizes.len());
        est.observe(t);
        recent.push(sizes[t]);
        if recent.len() > k {
            recent.remove(0);
        }
        if step % 7 == 0 {
            let got = est.distribution().unwrap();
            let want = kde_oracle(&recent, &sizes, est.bandwidth());
            for (a, b) in got.probs().iter().zip(&want) {
                assert!((a - b).abs() <= 1e-9, "step {step}: {:?} vs {want:?}", got.probs());
            }
        }
    }
}
