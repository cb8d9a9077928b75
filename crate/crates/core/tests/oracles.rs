use std::sync::Arc;

use olpi_core::exact::{
    brute_force_optimal, evaluate_policy, exact_policy_iteration, solve_dp, EnumerableProblem,
    DEFAULT_BRUTE_FORCE_CAP,
};
use olpi_core::generators::{OverlayGenerator, OverrideGenerator};
use olpi_core::graph::{GraphProblem, RandomGraphParams};
use olpi_core::mda::{brute_force_mda, random_instance, run_mda, MdaProblem};
use olpi_core::model::{trajectory_cost, ControlProblem, FnPolicy, SharedPolicy};
use olpi_core::online::{run_online_pi, FullControlSet, OnlineOptions};
use olpi_core::Error;

fn first_control(g: &GraphProblem) -> SharedPolicy<GraphProblem> {
    let g = g.clone();
    Arc::new(FnPolicy::new(move |k, x: &String| g.controls(k, x).and_then(|c| c.into_iter().next())))
}

fn counterexample_base() -> SharedPolicy<GraphProblem> {
    Arc::new(FnPolicy::new(|_k, x: &String| {
        Some(match x.as_str() {
            "x0" => "u0",
            "x1" => "u1",
            _ => "u1'",
        }
        .to_string())
    }))
}

#[test]
fn counterexample_end_to_end() {
    let g = GraphProblem::two_stage_counterexample();
    let x0 = g.initial_state();
    let ep = EnumerableProblem::reachable(&g, x0.clone()).unwrap();
    let (table, _) = solve_dp(&ep).unwrap();
    assert_eq!(table.value(&g, 0, &x0), Some(15.0));
    let (bf, t) = brute_force_optimal(&g, &x0, DEFAULT_BRUTE_FORCE_CAP).unwrap();
    assert_eq!(bf, 15.0);
    assert_eq!(t.controls, vec!["u0'", "u1'"]);
    let j0 = evaluate_policy(&ep, &counterexample_base()).unwrap();
    assert_eq!(j0.value(&g, 0, &x0), Some(20.0));

    let good = run_online_pi(
        &g,
        &x0,
        counterexample_base(),
        &OverlayGenerator::new(counterexample_base()),
        &FullControlSet,
        &OnlineOptions::default(),
    )
    .unwrap();
    assert_eq!(good.costs(), vec![20.0, 15.0, 15.0]);

    let bad = OverrideGenerator::new(
        OverlayGenerator::new(counterexample_base()),
        vec![(1, "x1'".to_string(), "u1''".to_string())],
    );
    let opts = OnlineOptions {
        allow_inconsistent: true,
        ..OnlineOptions::default()
    };
    let h = run_online_pi(&g, &x0, counterexample_base(), &bad, &FullControlSet, &opts).unwrap();
    assert_eq!(h.costs(), vec![20.0, 25.0, 20.0, 20.0]);
    assert!(h.has_improvement_violation());
}

#[test]
fn exact_pi_reaches_dp_within_horizon() {
    for seed in 0..20 {
        let p = RandomGraphParams {
            horizon: 1 + (seed as usize % 5),
            max_states: 6,
            max_controls: 4,
            integer_costs: seed % 3 == 0,
        };
        let g = GraphProblem::random(&p, 1000 + seed);
        let ep = EnumerableProblem::reachable(&g, g.initial_state()).unwrap();
        let (opt, _) = solve_dp(&ep).unwrap();
        let records = exact_policy_iteration(&ep, &first_control(&g), p.horizon).unwrap();
        let last = records.last().unwrap();
        let diff = last.table.max_abs_diff(&opt).unwrap();
        assert!(diff <= 1e-9, "seed {seed}: {diff}");
        for w in records.windows(2) {
            for (a, b) in w[0].table.stages.iter().zip(&w[1].table.stages) {
                for (key, va) in a {
                    assert!(b[key] <= va + 1e-9);
                }
            }
        }
    }
}

#[test]
fn online_pi_on_graphs_never_beats_the_optimum() {
    for seed in 0..15 {
        let p = RandomGraphParams {
            horizon: 4,
            max_states: 5,
            max_controls: 3,
            integer_costs: false,
        };
        let g = GraphProblem::random(&p, 50 + seed);
        let x0 = g.initial_state();
        let (jstar, _) = brute_force_optimal(&g, &x0, DEFAULT_BRUTE_FORCE_CAP).unwrap();
        let base = first_control(&g);
        let h = run_online_pi(
            &g,
            &x0,
            base.clone(),
            &OverlayGenerator::new(base),
            &FullControlSet,
            &OnlineOptions::default(),
        )
        .unwrap();
        assert!(h.final_cost() >= jstar - 1e-12);
        assert!(h.costs()[0] >= h.final_cost());
    }
}

#[test]
fn mda_oracles_agree_and_bound_the_online_result() {
    for seed in 0..10 {
        let p = MdaProblem::new(random_instance(3, 3, seed).unwrap().materialize().unwrap());
        let (bf, matchings) = brute_force_mda(p.instance(), DEFAULT_BRUTE_FORCE_CAP).unwrap();
        let ep = EnumerableProblem::reachable(&p, p.initial_state()).unwrap();
        let (table, _) = solve_dp(&ep).unwrap();
        assert_eq!(table.value(&p, 0, &p.initial_state()), Some(bf));
        assert_eq!(p.terminal_cost(&matchings), bf);
        let h = run_mda(&p, &p.random_trajectory(seed), 10, seed).unwrap();
        assert!(h.final_cost() >= bf);
        let t = &h.entries.last().unwrap().trajectory;
        assert_eq!(trajectory_cost(&p, t).unwrap(), h.final_cost());
    }
}

#[test]
fn oversized_searches_are_refused() {
    let g = GraphProblem::random(
        &RandomGraphParams {
            horizon: 12,
            max_states: 3,
            max_controls: 4,
            integer_costs: true,
        },
        4,
    );
    match brute_force_optimal(&g, &g.initial_state(), 10.0) {
        Err(Error::CapExceeded { estimate, cap }) => {
            assert!(estimate > cap);
        }
        other => panic!("unexpected {:?}", other.map(|r| r.0)),
    }
}
