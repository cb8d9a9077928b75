use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{mix64, unit_f64};

/// Largest dense table [`MdaInstance::materialize`] will build.
pub const MAX_TABLE_ENTRIES: usize = 1 << 24;

#[derive(Clone, Debug, PartialEq)]
pub enum CostSource {
    /// Uniform [0, 1) costs from a counter-based hash of `(seed, tuple)`.
    Prf { seed: u64 },
    /// Dense table of length m^(N+1), indexed row-major by the tuple
    /// (the layer-0 node is the most significant digit).
    Table(Vec<f64>),
}

/// An (N+1)-layer, m-node-per-layer multidimensional assignment instance.
#[derive(Clone, Debug, PartialEq)]
pub struct MdaInstance {
    n: usize,
    m: usize,
    source: CostSource,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    #[serde(rename = "N")]
    n: usize,
    m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cost_table: Option<Vec<f64>>,
}

fn table_len(n: usize, m: usize) -> Option<usize> {
    m.checked_pow(u32::try_from(n + 1).ok()?)
}

impl MdaInstance {
    pub fn prf(n: usize, m: usize, seed: u64) -> Result<Self> {
        Self::check_dims(n, m)?;
        Ok(MdaInstance {
            n,
            m,
            source: CostSource::Prf { seed },
        })
    }

    pub fn table(n: usize, m: usize, costs: Vec<f64>) -> Result<Self> {
        Self::check_dims(n, m)?;
        let expected = table_len(n, m).ok_or_else(|| Error::schema("cost_table", "too large"))?;
        if costs.len() != expected {
            return Err(Error::schema(
                "cost_table",
                format!("expected {expected} entries, got {}", costs.len()),
            ));
        }
        if let Some(i) = costs.iter().position(|c| !c.is_finite()) {
            return Err(Error::schema(format!("cost_table[{i}]"), "must be finite"));
        }
        Ok(MdaInstance {
            n,
            m,
            source: CostSource::Table(costs),
        })
    }

    fn check_dims(n: usize, m: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::schema("N", "must be at least 1"));
        }
        if m == 0 {
            return Err(Error::schema("m", "must be at least 1"));
        }
        if m > u16::MAX as usize {
            return Err(Error::schema("m", "too large"));
        }
        Ok(())
    }

    /// Number of stages N (there are N+1 layers).
    pub fn stages(&self) -> usize {
        self.n
    }

    /// Nodes per layer.
    pub fn width(&self) -> usize {
        self.m
    }

    pub fn source(&self) -> &CostSource {
        &self.source
    }

    /// Cost of the grouping that visits `tuple[l]` in layer `l`.
    pub fn grouping_cost(&self, tuple: &[usize]) -> f64 {
        debug_assert_eq!(tuple.len(), self.n + 1);
        match &self.source {
            CostSource::Prf { seed } => prf_cost(*seed, tuple),
            CostSource::Table(t) => t[tuple.iter().fold(0, |acc, &i| acc * self.m + i)],
        }
    }

    /// Dense-table copy with identical costs.
    pub fn materialize(&self) -> Result<Self> {
        let len = table_len(self.n, self.m)
            .filter(|&l| l <= MAX_TABLE_ENTRIES)
            .ok_or_else(|| Error::schema("cost_table", "instance too large to tabulate"))?;
        if let CostSource::Table(_) = self.source {
            return Ok(self.clone());
        }
        let mut tuple = vec![0; self.n + 1];
        let costs = (0..len)
            .map(|mut idx| {
                for slot in tuple.iter_mut().rev() {
                    *slot = idx % self.m;
                    idx /= self.m;
                }
                self.grouping_cost(&tuple)
            })
            .collect();
        MdaInstance::table(self.n, self.m, costs)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = match &self.source {
            CostSource::Prf { seed } => InstanceFile {
                n: self.n,
                m: self.m,
                seed: Some(*seed),
                cost_table: None,
            },
            CostSource::Table(t) => InstanceFile {
                n: self.n,
                m: self.m,
                seed: None,
                cost_table: Some(t.clone()),
            },
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: InstanceFile = serde_json::from_str(text)?;
        match (f.seed, f.cost_table) {
            (Some(seed), None) => MdaInstance::prf(f.n, f.m, seed),
            (None, Some(t)) => MdaInstance::table(f.n, f.m, t),
            _ => Err(Error::schema("", "exactly one of `seed` and `cost_table` is required")),
        }
    }
}

fn prf_cost(seed: u64, tuple: &[usize]) -> f64 {
    let mut h = mix64(seed ^ 0x6d64_615f_636f_7374);
    for &i in tuple {
        h = mix64(h ^ (i as u64).wrapping_add(1).wrapping_mul(0xA076_1D64_78BD_642F));
    }
    unit_f64(h)
}

/// Seeded instance with uniform [0, 1) grouping costs; needs O(1) memory.
pub fn random_instance(n: usize, m: usize, seed: u64) -> Result<MdaInstance> {
    MdaInstance::prf(n, m, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn prf_is_deterministic_and_in_range() {
        let a = random_instance(4, 3, 9).unwrap();
        let b = random_instance(4, 3, 9).unwrap();
        let c = random_instance(4, 3, 10).unwrap();
        let t = [0, 2, 1, 1, 0];
        assert_eq!(a.grouping_cost(&t), b.grouping_cost(&t));
        assert_ne!(a.grouping_cost(&t), c.grouping_cost(&t));
        let v = a.grouping_cost(&t);
        assert!((0.0..1.0).contains(&v));
    }

    #[test]
    fn prf_has_no_collisions_on_many_tuples() {
        let inst = random_instance(9, 4, 1).unwrap();
        let mut seen = HashSet::new();
        let mut tuple = vec![0; 10];
        for mut idx in 0..100_000usize {
            for slot in tuple.iter_mut() {
                *slot = idx % 4;
                idx /= 4;
            }
            assert!(seen.insert(inst.grouping_cost(&tuple).to_bits()));
        }
    }

    #[test]
    fn large_instance_is_queryable() {
        let inst = random_instance(12, 6, 3).unwrap();
        let v = inst.grouping_cost(&[5; 13]);
        assert!((0.0..1.0).contains(&v));
        assert!(inst.materialize().is_err());
    }

    #[test]
    fn materialize_preserves_costs() {
        let p = random_instance(2, 3, 4).unwrap();
        let t = p.materialize().unwrap();
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    assert_eq!(p.grouping_cost(&[a, b, c]), t.grouping_cost(&[a, b, c]));
                }
            }
        }
    }

    #[test]
    fn json_round_trip_and_schema_errors() {
        let p = random_instance(3, 2, 5).unwrap();
        assert_eq!(MdaInstance::from_json(&p.to_json().unwrap()).unwrap(), p);
        let t = p.materialize().unwrap();
        assert_eq!(MdaInstance::from_json(&t.to_json().unwrap()).unwrap(), t);
        assert!(matches!(
            MdaInstance::from_json(r#"{"N":1,"m":2,"cost_table":[1,2,3]}"#),
            Err(Error::Schema { .. })
        ));
        assert!(MdaInstance::from_json(r#"{"N":1,"m":2}"#).is_err());
        assert!(MdaInstance::from_json(r#"{"N":0,"m":2,"seed":1}"#).is_err());
    }
}
