//! Finite staged graphs as control problems.
//!
//! States are node names, controls are arc labels. An arc is available at a
//! given stage from a given node; its label must be unique among the arcs
//! leaving that node at that stage.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ControlProblem;
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcSpec {
    pub stage: usize,
    pub from: String,
    pub to: String,
    pub control: String,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub horizon: usize,
    pub initial: String,
    pub arcs: Vec<ArcSpec>,
    /// Terminal costs; nodes not listed cost 0.
    #[serde(default)]
    pub terminal: BTreeMap<String, f64>,
}

#[derive(Debug)]
struct Inner {
    spec: GraphSpec,
    // (stage, node) -> arc indices in declaration order
    out: HashMap<(usize, String), Vec<usize>>,
}

#[derive(Clone, Debug)]
pub struct GraphProblem {
    inner: Arc<Inner>,
}

impl GraphProblem {
    pub fn new(spec: GraphSpec) -> Result<Self> {
        if spec.horizon == 0 {
            return Err(Error::schema("horizon", "must be positive"));
        }
        let mut out: HashMap<(usize, String), Vec<usize>> = HashMap::new();
        for (i, a) in spec.arcs.iter().enumerate() {
            if a.stage >= spec.horizon {
                return Err(Error::schema(
                    format!("arcs[{i}].stage"),
                    format!("stage {} not below horizon {}", a.stage, spec.horizon),
                ));
            }
            if !a.cost.is_finite() {
                return Err(Error::schema(format!("arcs[{i}].cost"), "must be finite"));
            }
            let list = out.entry((a.stage, a.from.clone())).or_default();
            if list.iter().any(|&j| spec.arcs[j].control == a.control) {
                return Err(Error::schema(
                    format!("arcs[{i}].control"),
                    format!("duplicate control `{}` leaving `{}`", a.control, a.from),
                ));
            }
            list.push(i);
        }
        Ok(GraphProblem {
            inner: Arc::new(Inner { spec, out }),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        GraphProblem::new(serde_json::from_str(text)?)
    }

    pub fn spec(&self) -> &GraphSpec {
        &self.inner.spec
    }

    pub fn initial_state(&self) -> String {
        self.inner.spec.initial.clone()
    }

    fn arc(&self, k: usize, x: &str, u: &str) -> Option<&ArcSpec> {
        let spec = &self.inner.spec;
        self.inner
            .out
            .get(&(k, x.to_string()))?
            .iter()
            .map(|&i| &spec.arcs[i])
            .find(|a| a.control == u)
    }

    /// Five-node, two-stage graph in which a consistent generator improves
    /// the base policy from 20 to the optimum 15, while the inconsistent
    /// choice `u1''` at `x1'` costs 25.
    ///
    /// ```text
    ///   x0 --u0 (10)--> x1  --u1 (10)---> x2
    ///   x0 --u0' (5)--> x1' --u1' (10)--> x2'
    ///                   x1' --u1'' (20)-> x2
    /// ```
    pub fn two_stage_counterexample() -> Self {
        let arc = |stage, from: &str, to: &str, control: &str, cost| ArcSpec {
            stage,
            from: from.into(),
            to: to.into(),
            control: control.into(),
            cost,
        };
        GraphProblem::new(GraphSpec {
            horizon: 2,
            initial: "x0".into(),
            arcs: vec![
                arc(0, "x0", "x1", "u0", 10.0),
                arc(0, "x0", "x1'", "u0'", 5.0),
                arc(1, "x1", "x2", "u1", 10.0),
                arc(1, "x1'", "x2'", "u1'", 10.0),
                arc(1, "x1'", "x2", "u1''", 20.0),
            ],
            terminal: BTreeMap::new(),
        })
        .expect("static graph is valid")
    }

    /// Random layered graph: stage k has between 1 and `max_states` nodes
    /// (exactly one at stage 0), every node has between 1 and `max_controls`
    /// outgoing arcs to uniformly chosen next-stage nodes.
    pub fn random(params: &RandomGraphParams, seed: u64) -> Self {
        let mut r = rng::stream(seed, "random-graph", 0);
        let n = params.horizon;
        let counts: Vec<usize> = (0..=n)
            .map(|k| if k == 0 { 1 } else { r.random_range(1..=params.max_states) })
            .collect();
        let name = |k: usize, i: usize| format!("s{k}.{i}");
        let cost = |r: &mut rng::StreamRng| {
            if params.integer_costs {
                f64::from(r.random_range(0u32..20))
            } else {
                r.random::<f64>() * 10.0
            }
        };
        let mut arcs = Vec::new();
        for k in 0..n {
            for i in 0..counts[k] {
                let c = r.random_range(1..=params.max_controls);
                for a in 0..c {
                    let to = r.random_range(0..counts[k + 1]);
                    arcs.push(ArcSpec {
                        stage: k,
                        from: name(k, i),
                        to: name(k + 1, to),
                        control: format!("a{a}"),
                        cost: cost(&mut r),
                    });
                }
            }
        }
        let terminal = (0..counts[n]).map(|i| (name(n, i), cost(&mut r))).collect();
        GraphProblem::new(GraphSpec {
            horizon: n,
            initial: name(0, 0),
            arcs,
            terminal,
        })
        .expect("generated graph is valid")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomGraphParams {
    pub horizon: usize,
    pub max_states: usize,
    pub max_controls: usize,
    pub integer_costs: bool,
}

impl ControlProblem for GraphProblem {
    type State = String;
    type Control = String;

    fn horizon(&self) -> usize {
        self.inner.spec.horizon
    }

    fn step(&self, k: usize, x: &String, u: &String) -> String {
        match self.arc(k, x, u) {
            Some(a) => a.to.clone(),
            None => panic!("no arc `{u}` from `{x}` at stage {k}"),
        }
    }

    fn stage_cost(&self, k: usize, x: &String, u: &String) -> f64 {
        self.arc(k, x, u).map_or(f64::INFINITY, |a| a.cost)
    }

    fn terminal_cost(&self, x: &String) -> f64 {
        self.inner.spec.terminal.get(x).copied().unwrap_or(0.0)
    }

    fn admits(&self, k: usize, x: &String, u: &String) -> bool {
        self.arc(k, x, u).is_some()
    }

    fn controls(&self, k: usize, x: &String) -> Option<Vec<String>> {
        let spec = &self.inner.spec;
        Some(
            self.inner
                .out
                .get(&(k, x.clone()))
                .map(|v| v.iter().map(|&i| spec.arcs[i].control.clone()).collect())
                .unwrap_or_default(),
        )
    }

    fn encode_state(&self, x: &String) -> Vec<u8> {
        x.as_bytes().to_vec()
    }

    fn encode_control(&self, u: &String) -> Vec<u8> {
        u.as_bytes().to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counterexample_structure() {
        let g = GraphProblem::two_stage_counterexample();
        assert_eq!(g.horizon(), 2);
        assert_eq!(g.controls(0, &"x0".into()).unwrap(), vec!["u0", "u0'"]);
        assert_eq!(g.controls(1, &"x1'".into()).unwrap(), vec!["u1'", "u1''"]);
        assert_eq!(g.step(1, &"x1'".into(), &"u1''".into()), "x2");
        assert!(!g.admits(1, &"x1".into(), &"u1'".into()));
    }

    #[test]
    fn duplicate_controls_are_rejected() {
        let arc = ArcSpec {
            stage: 0,
            from: "a".into(),
            to: "b".into(),
            control: "u".into(),
            cost: 1.0,
        };
        let spec = GraphSpec {
            horizon: 1,
            initial: "a".into(),
            arcs: vec![arc.clone(), arc],
            terminal: BTreeMap::new(),
        };
        match GraphProblem::new(spec) {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "arcs[1].control"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn random_graph_is_deterministic() {
        let p = RandomGraphParams {
            horizon: 4,
            max_states: 5,
            max_controls: 3,
            integer_costs: true,
        };
        assert_eq!(GraphProblem::random(&p, 9).spec(), GraphProblem::random(&p, 9).spec());
        assert_ne!(GraphProblem::random(&p, 9).spec(), GraphProblem::random(&p, 10).spec());
    }
}
