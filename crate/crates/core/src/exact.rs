//! Exact dynamic programming, exact policy iteration and brute-force search
//! on problems with finite control sets.
//!
//! These are the ground-truth oracles for the on-line engine.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{checked_action, ControlProblem, CostToGoTable, Policy, Trajectory};
use crate::par;

pub const DEFAULT_BRUTE_FORCE_CAP: f64 = 1e7;

type Encoder<S> = Arc<dyn Fn(&S) -> Vec<u8> + Send + Sync>;

/// Policy stored as a per-stage lookup table keyed by state encoding.
#[derive(Clone)]
pub struct TablePolicy<S, U> {
    stages: Vec<HashMap<Vec<u8>, U>>,
    encode: Encoder<S>,
}

impl<S, U> TablePolicy<S, U> {
    pub fn empty<P>(problem: &P) -> Self
    where
        P: ControlProblem<State = S, Control = U> + Clone + Send + 'static,
    {
        let p = problem.clone();
        TablePolicy {
            stages: (0..problem.horizon()).map(|_| HashMap::new()).collect(),
            encode: Arc::new(move |x| p.encode_state(x)),
        }
    }

    pub fn set(&mut self, k: usize, encoded_state: Vec<u8>, u: U) {
        self.stages[k].insert(encoded_state, u);
    }

    pub fn get(&self, k: usize, encoded_state: &[u8]) -> Option<&U> {
        self.stages.get(k)?.get(encoded_state)
    }

    /// Whether both tables define the same states and agree on every one.
    pub fn same_as<P>(&self, other: &TablePolicy<S, U>, problem: &P) -> bool
    where
        P: ControlProblem<State = S, Control = U>,
    {
        self.stages.len() == other.stages.len()
            && self.stages.iter().zip(&other.stages).all(|(a, b)| {
                a.len() == b.len()
                    && a.iter().all(|(key, u)| {
                        b.get(key).is_some_and(|v| problem.same_control(u, v))
                    })
            })
    }
}

impl<S, U: Clone + Send + Sync> Policy<S, U> for TablePolicy<S, U> {
    fn act(&self, k: usize, x: &S) -> Option<U> {
        self.stages.get(k)?.get(&(self.encode)(x)).cloned()
    }

    fn stages(&self) -> Option<usize> {
        Some(self.stages.len())
    }
}

/// A control problem together with the per-stage list of states over which
/// exact methods sweep.
pub struct EnumerableProblem<'a, P: ControlProblem> {
    pub problem: &'a P,
    pub initial: P::State,
    pub states: Vec<Vec<P::State>>,
}

impl<'a, P: ControlProblem> EnumerableProblem<'a, P> {
    /// Enumerates the states reachable from `x0` by forward closure.
    pub fn reachable(problem: &'a P, x0: P::State) -> Result<Self> {
        let n = problem.horizon();
        let mut states = Vec::with_capacity(n + 1);
        states.push(vec![x0.clone()]);
        for k in 0..n {
            let mut seen = HashSet::new();
            let mut next = Vec::new();
            for x in &states[k] {
                for u in problem.controls(k, x).ok_or(Error::NotEnumerable { stage: k })? {
                    let y = problem.step(k, x, &u);
                    if seen.insert(problem.encode_state(&y)) {
                        next.push(y);
                    }
                }
            }
            states.push(next);
        }
        Ok(EnumerableProblem {
            problem,
            initial: x0,
            states,
        })
    }

    /// Uses caller-provided stage lists; they must contain every state
    /// reachable from `x0`.
    pub fn with_states(problem: &'a P, x0: P::State, states: Vec<Vec<P::State>>) -> Result<Self> {
        if states.len() != problem.horizon() + 1 {
            return Err(Error::Dimension {
                expected: problem.horizon() + 1,
                actual: states.len(),
            });
        }
        Ok(EnumerableProblem {
            problem,
            initial: x0,
            states,
        })
    }

    pub fn horizon(&self) -> usize {
        self.problem.horizon()
    }

    pub fn state_count(&self) -> usize {
        self.states.iter().map(Vec::len).sum()
    }

    fn lookup(&self, table: &CostToGoTable, k: usize, x: &P::State) -> Result<f64> {
        table
            .value(self.problem, k, x)
            .ok_or_else(|| Error::UnknownState {
                stage: k,
                state: format!("{x:?}"),
            })
    }

    fn terminal_stage(&self) -> CostToGoTable {
        let n = self.horizon();
        let mut table = CostToGoTable::with_horizon(n);
        for x in &self.states[n] {
            table.insert(n, self.problem.encode_state(x), self.problem.terminal_cost(x));
        }
        table
    }

    fn q_value(&self, table: &CostToGoTable, k: usize, x: &P::State, u: &P::Control) -> Result<f64> {
        let p = self.problem;
        Ok(p.stage_cost(k, x, u) + self.lookup(table, k + 1, &p.step(k, x, u))?)
    }
}

/// Backward DP. Returns J*_k over the enumerated states and a policy
/// attaining the minimum, ties going to the first control in enumeration
/// order.
pub fn solve_dp<P>(ep: &EnumerableProblem<'_, P>) -> Result<(CostToGoTable, TablePolicy<P::State, P::Control>)>
where
    P: ControlProblem + Clone + Send + 'static,
{
    let p = ep.problem;
    let mut table = ep.terminal_stage();
    let mut policy = TablePolicy::empty(p);
    for k in (0..ep.horizon()).rev() {
        let rows = par::try_map(&ep.states[k], |x| -> Result<_> {
            let mut best: Option<(f64, P::Control)> = None;
            for u in p.controls(k, x).ok_or(Error::NotEnumerable { stage: k })? {
                let q = ep.q_value(&table, k, x, &u)?;
                if best.as_ref().is_none_or(|(b, _)| q < *b) {
                    best = Some((q, u));
                }
            }
            Ok((p.encode_state(x), best))
        })?;
        for (key, best) in rows {
            // states without controls are dead ends; leave them out
            if let Some((v, u)) = best {
                table.insert(k, key.clone(), v);
                policy.set(k, key, u);
            }
        }
    }
    Ok((table, policy))
}

/// Exact policy evaluation J_{k,π} over every enumerated state.
pub fn evaluate_policy<P, Q>(ep: &EnumerableProblem<'_, P>, policy: &Q) -> Result<CostToGoTable>
where
    P: ControlProblem,
    Q: Policy<P::State, P::Control> + ?Sized,
{
    let p = ep.problem;
    let mut table = ep.terminal_stage();
    for k in (0..ep.horizon()).rev() {
        let rows = par::try_map(&ep.states[k], |x| -> Result<_> {
            let u = checked_action(p, policy, k, x)?;
            Ok((p.encode_state(x), ep.q_value(&table, k, x, &u)?))
        })?;
        for (key, v) in rows {
            table.insert(k, key, v);
        }
    }
    Ok(table)
}

pub struct PiRecord<S, U> {
    pub policy: Arc<TablePolicy<S, U>>,
    pub table: CostToGoTable,
}

/// Exact PI from `pi0`. Record 0 is `pi0` and its evaluation; each further
/// record is one improvement step against the previous evaluation. The
/// improvement keeps the incumbent control unless another one is strictly
/// better (then the first such in enumeration order). Stops once an
/// iteration reproduces its predecessor or after `max_iters` iterations.
pub fn exact_policy_iteration<P, Q>(
    ep: &EnumerableProblem<'_, P>,
    pi0: &Q,
    max_iters: usize,
) -> Result<Vec<PiRecord<P::State, P::Control>>>
where
    P: ControlProblem + Clone + Send + 'static,
    Q: Policy<P::State, P::Control> + ?Sized,
{
    let p = ep.problem;
    let mut current = TablePolicy::empty(p);
    for k in 0..ep.horizon() {
        for x in &ep.states[k] {
            current.set(k, p.encode_state(x), checked_action(p, pi0, k, x)?);
        }
    }
    let table = evaluate_policy(ep, &current)?;
    let mut records = vec![PiRecord {
        policy: Arc::new(current),
        table,
    }];

    for _ in 0..max_iters {
        let last = records.last().expect("nonempty");
        let mut next = TablePolicy::empty(p);
        for k in 0..ep.horizon() {
            let rows = par::try_map(&ep.states[k], |x| -> Result<_> {
                let key = p.encode_state(x);
                let incumbent = last
                    .policy
                    .get(k, &key)
                    .cloned()
                    .ok_or_else(|| Error::UnknownState {
                        stage: k,
                        state: format!("{x:?}"),
                    })?;
                let mut best_q = ep.q_value(&last.table, k, x, &incumbent)?;
                let mut best = incumbent;
                for u in p.controls(k, x).ok_or(Error::NotEnumerable { stage: k })? {
                    let q = ep.q_value(&last.table, k, x, &u)?;
                    if q < best_q {
                        best_q = q;
                        best = u;
                    }
                }
                Ok((key, best))
            })?;
            for (key, u) in rows {
                next.set(k, key, u);
            }
        }
        let table = evaluate_policy(ep, &next)?;
        let fixed = next.same_as(&last.policy, p);
        records.push(PiRecord {
            policy: Arc::new(next),
            table,
        });
        if fixed {
            break;
        }
    }
    Ok(records)
}

/// Exhaustive search over all control sequences from `x0`.
///
/// The sequence count is estimated along the first branch before searching;
/// estimates above `cap` are refused.
pub fn brute_force_optimal<P: ControlProblem>(
    problem: &P,
    x0: &P::State,
    cap: f64,
) -> Result<(f64, Trajectory<P::State, P::Control>)> {
    let n = problem.horizon();
    let mut estimate = 1.0f64;
    let mut x = x0.clone();
    for k in 0..n {
        let us = problem.controls(k, &x).ok_or(Error::NotEnumerable { stage: k })?;
        estimate *= us.len().max(1) as f64;
        match us.into_iter().next() {
            Some(u) => x = problem.step(k, &x, &u),
            None => break,
        }
    }
    if estimate > cap {
        return Err(Error::CapExceeded { estimate, cap });
    }

    struct Search<'p, P: ControlProblem> {
        problem: &'p P,
        states: Vec<P::State>,
        controls: Vec<P::Control>,
        best: Option<(f64, Trajectory<P::State, P::Control>)>,
    }

    impl<P: ControlProblem> Search<'_, P> {
        fn visit(&mut self, k: usize, acc: f64) -> Result<()> {
            let n = self.problem.horizon();
            let x = self.states[k].clone();
            if k == n {
                let total = acc + self.problem.terminal_cost(&x);
                if self.best.as_ref().is_none_or(|(b, _)| total < *b) {
                    self.best = Some((
                        total,
                        Trajectory::new(self.states.clone(), self.controls.clone()),
                    ));
                }
                return Ok(());
            }
            let us = self
                .problem
                .controls(k, &x)
                .ok_or(Error::NotEnumerable { stage: k })?;
            for u in us {
                let g = self.problem.stage_cost(k, &x, &u);
                let y = self.problem.step(k, &x, &u);
                self.states.push(y);
                self.controls.push(u);
                self.visit(k + 1, acc + g)?;
                self.states.pop();
                self.controls.pop();
            }
            Ok(())
        }
    }

    let mut search = Search {
        problem,
        states: vec![x0.clone()],
        controls: Vec::new(),
        best: None,
    };
    search.visit(0, 0.0)?;
    search.best.ok_or(Error::NotEnumerable { stage: 0 })
}
