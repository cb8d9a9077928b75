//! Multidimensional assignment as an N-stage control problem.
//!
//! Layers `0..=N` each hold `m` nodes. The state at stage `k` is the list of
//! the first `k` layer-to-layer matchings; the control is the next matching
//! (a permutation, `u[i] = j` pairs node `i` of layer `k` with node `j` of
//! layer `k+1`). Stage costs are zero and the terminal cost is the total
//! cost of the `m` groupings.
//!
//! Grouping costs are summed after sorting, so the cost of an assignment
//! does not depend on the order in which its groupings are listed. This
//! makes cost comparisons between iterations exact.

mod hungarian;
mod instance;

use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::generators::{ReplayPolicy, TabularGenerator};
use crate::model::{checked_action, ControlProblem, SharedPolicy, Trajectory};
use crate::online::{
    improve_trajectory, run_online_pi, ControlSetBuilder, IterationHistory, OnlineOptions,
    Selection, StageContext,
};
use crate::par;
use crate::rng::{self, StreamRng};

pub use hungarian::hungarian_2d_assignment;
pub use instance::{random_instance, CostSource, MdaInstance, MAX_TABLE_ENTRIES};

pub type MdaState = Vec<Vec<usize>>;
pub type MdaControl = Vec<usize>;

/// All permutations of `0..m` in lexicographic order.
pub fn permutations(m: usize) -> Vec<Vec<usize>> {
    let mut cur: Vec<usize> = (0..m).collect();
    let mut out = vec![cur.clone()];
    loop {
        let Some(i) = (1..m).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..m).rev().find(|&j| cur[j] > cur[i - 1]).expect("pivot exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
        out.push(cur.clone());
    }
}

fn is_permutation(u: &[usize], m: usize) -> bool {
    if u.len() != m {
        return false;
    }
    let mut seen = vec![false; m];
    for &j in u {
        if j >= m || seen[j] {
            return false;
        }
        seen[j] = true;
    }
    true
}

/// Sum after sorting ascending.
pub fn canonical_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

/// The node tuples of the `m` groupings traced by `matchings`, starting
/// from each layer-0 node in turn.
pub fn groupings(m: usize, matchings: &[Vec<usize>]) -> Vec<Vec<usize>> {
    (0..m)
        .map(|a| {
            let mut t = Vec::with_capacity(matchings.len() + 1);
            t.push(a);
            for u in matchings {
                t.push(u[*t.last().expect("nonempty")]);
            }
            t
        })
        .collect()
}

/// Total cost of a complete assignment.
pub fn assignment_cost(instance: &MdaInstance, matchings: &[Vec<usize>]) -> f64 {
    canonical_sum(
        groupings(instance.width(), matchings)
            .iter()
            .map(|t| instance.grouping_cost(t))
            .collect(),
    )
}

#[derive(Clone, Debug)]
pub struct MdaProblem {
    instance: Arc<MdaInstance>,
}

impl MdaProblem {
    pub fn new(instance: MdaInstance) -> Self {
        MdaProblem {
            instance: Arc::new(instance),
        }
    }

    pub fn instance(&self) -> &MdaInstance {
        &self.instance
    }

    /// The artificial initial state: no matchings yet.
    pub fn initial_state(&self) -> MdaState {
        Vec::new()
    }

    /// Trajectory built from uniformly random matchings.
    pub fn random_trajectory(&self, seed: u64) -> Trajectory<MdaState, MdaControl> {
        let mut r = rng::stream(seed, "mda-initial", 0);
        let m = self.instance.width();
        let mut states = vec![self.initial_state()];
        let mut controls = Vec::new();
        for _ in 0..self.instance.stages() {
            let mut u: Vec<usize> = (0..m).collect();
            u.shuffle(&mut r);
            let mut next = states.last().expect("nonempty").clone();
            next.push(u.clone());
            controls.push(u);
            states.push(next);
        }
        Trajectory::new(states, controls)
    }
}

/// Enumerating U_k(x) is capped at m = 8 (40320 permutations).
const MAX_ENUMERABLE_WIDTH: usize = 8;

impl ControlProblem for MdaProblem {
    type State = MdaState;
    type Control = MdaControl;

    fn horizon(&self) -> usize {
        self.instance.stages()
    }

    fn step(&self, _k: usize, x: &MdaState, u: &MdaControl) -> MdaState {
        let mut next = x.clone();
        next.push(u.clone());
        next
    }

    fn stage_cost(&self, _k: usize, _x: &MdaState, _u: &MdaControl) -> f64 {
        0.0
    }

    fn terminal_cost(&self, x: &MdaState) -> f64 {
        assignment_cost(&self.instance, x)
    }

    fn admits(&self, k: usize, x: &MdaState, u: &MdaControl) -> bool {
        x.len() == k && is_permutation(u, self.instance.width())
    }

    fn controls(&self, _k: usize, _x: &MdaState) -> Option<Vec<MdaControl>> {
        let m = self.instance.width();
        (m <= MAX_ENUMERABLE_WIDTH).then(|| permutations(m))
    }

    fn encode_state(&self, x: &MdaState) -> Vec<u8> {
        x.iter()
            .flatten()
            .flat_map(|&j| (j as u16).to_le_bytes())
            .collect()
    }

    fn encode_control(&self, u: &MdaControl) -> Vec<u8> {
        u.iter().flat_map(|&j| (j as u16).to_le_bytes()).collect()
    }
}

/// Improvement step that builds the m×m arc-cost matrix (entry `(i, j)`
/// is the grouping formed by the new prefix ending at `i`, the arc
/// `(i, j)`, and the policy's suffix from `j`) and solves it with the
/// Hungarian method. The solution replaces the incumbent only if its exact
/// cost is strictly lower.
///
/// The matrix is exact when the policy's later controls do not depend on
/// the state, as with the tabular generator. Otherwise it is a heuristic,
/// but the final comparison still uses exact costs.
#[derive(Clone, Copy, Debug, Default)]
pub struct HungarianStage;

impl ControlSetBuilder<MdaProblem> for HungarianStage {
    fn select(
        &self,
        ctx: &StageContext<'_, MdaProblem>,
        _rng: &mut StreamRng,
    ) -> Result<Selection<MdaControl>> {
        let problem = ctx.problem;
        let inst = problem.instance();
        let (n, m, k) = (inst.stages(), inst.width(), ctx.stage);
        if !problem.admits(k, ctx.state, ctx.incumbent) {
            return Err(Error::InfeasibleCandidate {
                stage: k,
                candidate: format!("{:?}", ctx.incumbent),
            });
        }

        let mut y = problem.step(k, ctx.state, ctx.incumbent);
        let mut suffix = Vec::with_capacity(n - k - 1);
        for j in k + 1..n {
            let u = checked_action(problem, ctx.policy, j, &y)?;
            y = problem.step(j, &y, &u);
            suffix.push(u);
        }

        let mut prefix_at = vec![Vec::new(); m];
        for t in groupings(m, ctx.state) {
            let end = *t.last().expect("nonempty");
            prefix_at[end] = t;
        }
        let tails: Vec<Vec<usize>> = (0..m)
            .map(|j| {
                let mut t = vec![j];
                for u in &suffix {
                    t.push(u[*t.last().expect("nonempty")]);
                }
                t
            })
            .collect();
        let entries = par::map_indexed(m * m, |idx| {
            let (i, j) = (idx / m, idx % m);
            let mut tuple = prefix_at[i].clone();
            tuple.extend_from_slice(&tails[j]);
            inst.grouping_cost(&tuple)
        });
        let matrix: Vec<Vec<f64>> = entries.chunks(m).map(<[f64]>::to_vec).collect();
        let (best, _) = hungarian_2d_assignment(&matrix)?;
        let mut sel = ctx.minimize(vec![ctx.incumbent.clone(), best])?;
        sel.candidates_evaluated = m * m;
        Ok(sel)
    }
}

/// One improvement sweep against the replay of `current`.
pub fn mda_improvement_sweep(
    problem: &MdaProblem,
    current: &Trajectory<MdaState, MdaControl>,
) -> Result<Trajectory<MdaState, MdaControl>> {
    let policy = ReplayPolicy::new(current.controls.clone());
    let mut r = rng::stream(0, "mda-sweep", 0);
    Ok(improve_trajectory(problem, &policy, &problem.initial_state(), &HungarianStage, 0.0, &mut r)?
        .trajectory)
}

/// On-line PI from the replay of `initial`, with the tabular generator and
/// the Hungarian improvement step.
pub fn run_mda(
    problem: &MdaProblem,
    initial: &Trajectory<MdaState, MdaControl>,
    max_iters: usize,
    seed: u64,
) -> Result<IterationHistory<MdaState, MdaControl>> {
    let pi0: SharedPolicy<MdaProblem> = Arc::new(ReplayPolicy::new(initial.controls.clone()));
    let options = OnlineOptions {
        max_iters,
        tie_tol: 0.0,
        slack: 0.0,
        seed,
        ..OnlineOptions::default()
    };
    run_online_pi(
        problem,
        &problem.initial_state(),
        pi0,
        &TabularGenerator,
        &HungarianStage,
        &options,
    )
}

/// Exhaustive minimum over all (m!)^N assignments. Ties keep the
/// lexicographically first sequence of matchings.
pub fn brute_force_mda(instance: &MdaInstance, cap: f64) -> Result<(f64, Vec<MdaControl>)> {
    let (n, m) = (instance.stages(), instance.width());
    let perms = permutations(m);
    let estimate = (perms.len() as f64).powi(n as i32);
    if estimate > cap {
        return Err(Error::CapExceeded { estimate, cap });
    }

    struct Search<'a> {
        inst: &'a MdaInstance,
        perms: &'a [Vec<usize>],
        tuples: Vec<Vec<usize>>,
        chosen: Vec<usize>,
        best: (f64, Vec<usize>),
    }

    impl Search<'_> {
        fn go(&mut self, depth: usize) {
            if depth == self.inst.stages() {
                let cost = canonical_sum(self.tuples.iter().map(|t| self.inst.grouping_cost(t)).collect());
                if cost < self.best.0 {
                    self.best = (cost, self.chosen.clone());
                }
                return;
            }
            for pi in 0..self.perms.len() {
                for t in &mut self.tuples {
                    let last = t[depth];
                    t.push(self.perms[pi][last]);
                }
                self.chosen.push(pi);
                self.go(depth + 1);
                self.chosen.pop();
                for t in &mut self.tuples {
                    t.pop();
                }
            }
        }
    }

    let results = par::map_indexed(perms.len(), |first| {
        let mut s = Search {
            inst: instance,
            perms: &perms,
            tuples: (0..m).map(|a| vec![a, perms[first][a]]).collect(),
            chosen: vec![first],
            best: (f64::INFINITY, Vec::new()),
        };
        s.go(1);
        s.best
    });
    let (cost, chosen) = results
        .into_iter()
        .fold((f64::INFINITY, Vec::new()), |acc, r| if r.0 < acc.0 { r } else { acc });
    Ok((cost, chosen.into_iter().map(|i| perms[i].clone()).collect()))
}

/// 100·(J − J*)/J*.
pub fn gap_percent(cost: f64, optimum: f64) -> f64 {
    100.0 * (cost - optimum) / optimum
}

/// CSV with columns `iteration,cost,gap_percent,cost_ratio`; the gap is left
/// blank when no optimum is known, and the ratio is J_ℓ/J_0.
pub fn results_csv<S, U>(history: &IterationHistory<S, U>, optimum: Option<f64>) -> String {
    let mut out = String::from("iteration,cost,gap_percent,cost_ratio\n");
    let base = history.entries.first().map_or(f64::NAN, |e| e.cost);
    for e in &history.entries {
        let gap = optimum.map(|o| gap_percent(e.cost, o).to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", e.iteration, e.cost, gap, e.cost / base);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{solve_dp, EnumerableProblem, DEFAULT_BRUTE_FORCE_CAP};
    use crate::model::{rollout_policy, same_trajectory, trajectory_cost};
    use crate::online::FullControlSet;

    #[test]
    fn permutations_are_lexicographic() {
        assert_eq!(permutations(1), vec![vec![0]]);
        let p = permutations(3);
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], vec![0, 1, 2]);
        assert_eq!(p[1], vec![0, 2, 1]);
        assert_eq!(p[5], vec![2, 1, 0]);
        assert_eq!(permutations(5).len(), 120);
    }

    #[test]
    fn two_by_two_cost_is_sum_of_table_entries() {
        // N = 2, m = 2: 8 tuples, row-major.
        let costs: Vec<f64> = (0..8).map(|i| f64::from(i) * 1.5).collect();
        let inst = MdaInstance::table(2, 2, costs).unwrap();
        let p = MdaProblem::new(inst);
        let matchings = vec![vec![1, 0], vec![0, 1]];
        // groupings (0,1,1) -> idx 3 and (1,0,0) -> idx 4
        assert_eq!(p.terminal_cost(&matchings), 3.0 * 1.5 + 4.0 * 1.5);
        let (best, _) = brute_force_mda(p.instance(), 1e3).unwrap();
        // the four assignments cost 0+7, 1+6, 2+5, 3+4 (× 1.5)
        assert_eq!(best, 10.5);
    }

    #[test]
    fn single_node_layers_have_one_assignment() {
        let p = MdaProblem::new(random_instance(3, 1, 2).unwrap());
        let t = p.random_trajectory(0);
        let (best, a) = brute_force_mda(p.instance(), 10.0).unwrap();
        assert_eq!(a, vec![vec![0]; 3]);
        assert_eq!(trajectory_cost(&p, &t).unwrap(), best);
    }

    #[test]
    fn brute_force_agrees_with_dp_on_the_reduction() {
        for seed in 0..6 {
            let inst = random_instance(3, 3, seed).unwrap().materialize().unwrap();
            let p = MdaProblem::new(inst);
            let (bf, _) = brute_force_mda(p.instance(), DEFAULT_BRUTE_FORCE_CAP).unwrap();
            let ep = EnumerableProblem::reachable(&p, p.initial_state()).unwrap();
            let (table, _) = solve_dp(&ep).unwrap();
            assert_eq!(table.value(&p, 0, &p.initial_state()).unwrap(), bf, "seed {seed}");
        }
    }

    #[test]
    fn sweep_matches_generic_engine_with_full_enumeration() {
        for seed in 0..12 {
            let p = MdaProblem::new(random_instance(4, 3, seed).unwrap());
            let t0 = p.random_trajectory(seed);
            let fast = mda_improvement_sweep(&p, &t0).unwrap();
            let policy = ReplayPolicy::new(t0.controls.clone());
            let mut r = rng::stream(0, "t", 0);
            let slow = improve_trajectory(&p, &policy, &p.initial_state(), &FullControlSet, 0.0, &mut r)
                .unwrap()
                .trajectory;
            assert_eq!(
                trajectory_cost(&p, &fast).unwrap(),
                trajectory_cost(&p, &slow).unwrap(),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn sweep_never_worsens_and_keeps_optimum() {
        for seed in 0..10 {
            let p = MdaProblem::new(random_instance(4, 3, seed).unwrap());
            let t0 = p.random_trajectory(seed);
            let t1 = mda_improvement_sweep(&p, &t0).unwrap();
            assert!(trajectory_cost(&p, &t1).unwrap() <= trajectory_cost(&p, &t0).unwrap());

            let (best, matchings) = brute_force_mda(p.instance(), DEFAULT_BRUTE_FORCE_CAP).unwrap();
            let opt = rollout_policy(&p, &ReplayPolicy::new(matchings), &p.initial_state()).unwrap();
            let again = mda_improvement_sweep(&p, &opt).unwrap();
            assert_eq!(trajectory_cost(&p, &again).unwrap(), best);
            assert!(same_trajectory(&p, &again, &opt));
        }
    }

    #[test]
    fn run_is_monotone_and_halts_at_a_fixed_point() {
        let p = MdaProblem::new(random_instance(5, 4, 1).unwrap());
        let h = run_mda(&p, &p.random_trajectory(1), 20, 1).unwrap();
        let c = h.costs();
        assert!(c.windows(2).all(|w| w[1] <= w[0]), "{c:?}");
        let last = h.converged_at.expect("fixed point");
        assert_eq!(c[last], c[last - 1]);
        assert!(c[0] > c[last]);
        let csv = results_csv(&h, None);
        assert!(csv.starts_with("iteration,cost,gap_percent,cost_ratio\n0,"));
        assert!(csv.lines().nth(1).unwrap().ends_with(",,1"));
    }

    #[test]
    fn cap_is_enforced() {
        let inst = random_instance(6, 5, 0).unwrap();
        assert!(matches!(
            brute_force_mda(&inst, DEFAULT_BRUTE_FORCE_CAP),
            Err(Error::CapExceeded { .. })
        ));
    }
}
