use std::sync::Arc;

use proptest::prelude::*;

use olpi_core::drone::{bundled_scenario, heuristic_base_policy, DroneProblem};
use olpi_core::generators::{check_consistency, OverlayGenerator, TabularGenerator};
use olpi_core::graph::{GraphProblem, RandomGraphParams};
use olpi_core::mda::{hungarian_2d_assignment, permutations, random_instance, MdaProblem};
use olpi_core::model::{
    rollout_policy, same_trajectory, trajectory_cost, ControlBounds, ControlProblem, FnPolicy,
    SharedPolicy, Trajectory,
};
use olpi_core::online::{
    multiagent_minimize, run_online_pi, CoordinateOrder, FullControlSet, MultiagentConfig,
    OnlineOptions,
};
use olpi_core::rng;

fn first_control(g: &GraphProblem) -> SharedPolicy<GraphProblem> {
    let g = g.clone();
    Arc::new(FnPolicy::new(move |k, x: &String| g.controls(k, x).and_then(|c| c.into_iter().next())))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn online_pi_is_monotone_on_random_graphs(seed in any::<u64>(), horizon in 1usize..6, integer in any::<bool>()) {
        let p = RandomGraphParams { horizon, max_states: 6, max_controls: 4, integer_costs: integer };
        let g = GraphProblem::random(&p, seed);
        let base = first_control(&g);
        let opts = OnlineOptions { max_iters: 8, slack: 1e-12, ..OnlineOptions::default() };
        let h = run_online_pi(&g, &g.initial_state(), base.clone(), &OverlayGenerator::new(base), &FullControlSet, &opts).unwrap();
        prop_assert!(!h.has_improvement_violation());
        prop_assert!(h.converged_at.is_some());
        let last = h.entries.len() - 1;
        prop_assert!(same_trajectory(&g, &h.entries[last].trajectory, &h.entries[last - 1].trajectory));
    }

    #[test]
    fn tabular_replay_is_consistent_on_random_mda_trajectories(seed in any::<u64>(), n in 1usize..6, m in 1usize..6) {
        let p = MdaProblem::new(random_instance(n, m, seed).unwrap());
        let t = p.random_trajectory(seed);
        let report = check_consistency(&p, &TabularGenerator, &t, seed).unwrap();
        prop_assert!(report.passed());
        prop_assert_eq!(report.stages_checked, n);
    }

    #[test]
    fn hungarian_is_optimal(seed in any::<u64>(), m in 1usize..6) {
        let mut r = rng::stream(seed, "prop-hungarian", 0);
        let c: Vec<Vec<f64>> = (0..m).map(|_| (0..m).map(|_| rand::Rng::random_range(&mut r, -5.0..5.0)).collect()).collect();
        let (a, total) = hungarian_2d_assignment(&c).unwrap();
        let best = permutations(m)
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| c[i][j]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        prop_assert!((total - best).abs() <= 1e-12 * best.abs().max(1.0));
        let direct: f64 = a.iter().enumerate().map(|(i, &j)| c[i][j]).sum();
        prop_assert_eq!(direct, total);
    }

    #[test]
    fn saturation_never_moves_admissible_controls(u in prop::collection::vec(-3.0f64..3.0, 4)) {
        let b = ControlBounds::uniform(4, -2.0, 2.0);
        let mut v = u.clone();
        b.saturate(&mut v);
        prop_assert!(b.contains(&v));
        if b.contains(&u) {
            prop_assert_eq!(v, u);
        }
    }

    #[test]
    fn multiagent_counts_are_bounded(seed in any::<u64>(), dim in 1usize..7, half in 0i32..4) {
        let offsets: Vec<i32> = (-half..=half).collect();
        let cfg = MultiagentConfig::uniform(dim, 0.3, offsets.clone(), CoordinateOrder::Ascending);
        let b = ControlBounds::uniform(dim, -1.0, 1.0);
        let mut r = rng::stream(seed, "prop-ma", 0);
        let inc: Vec<f64> = (0..dim).map(|_| rand::Rng::random_range(&mut r, -1.0..=1.0)).collect();
        let order: Vec<usize> = (0..dim).collect();
        let out = multiagent_minimize(|u| b.contains(u), &inc, &cfg, &order, 0.0, 0, |c| {
            Ok(c.iter().map(|u| u.iter().map(|v| (v - 0.2).powi(2)).sum()).collect())
        }).unwrap();
        prop_assert_eq!(out.evaluated, out.per_coordinate.iter().sum::<usize>());
        prop_assert!(out.evaluated <= offsets.len() * dim);
        prop_assert!(b.contains(&out.control));
        let inc_value: f64 = inc.iter().map(|v| (v - 0.2).powi(2)).sum();
        prop_assert!(out.value <= inc_value);
    }

    #[test]
    fn drone_trajectories_survive_json(seed in 0u64..1000) {
        let p = DroneProblem::new(bundled_scenario("single-2").unwrap()).unwrap();
        let mut x0 = p.initial_state();
        x0[3] = rng::unit_f64(rng::mix64(seed)) - 0.5;
        let t = rollout_policy(&p, &heuristic_base_policy(p.scenario()), &x0).unwrap();
        let back: Trajectory<Vec<f64>, Vec<f64>> = Trajectory::from_json(&t.to_json().unwrap()).unwrap();
        prop_assert!(same_trajectory(&p, &t, &back));
        prop_assert_eq!(trajectory_cost(&p, &back).unwrap(), trajectory_cost(&p, &t).unwrap());
    }
}
