//! Versioned JSON files. Every file is an object with a top-level `"v"`
//! field; keys are written in sorted order so equal values give equal bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{Activity, Plan, Slot, UnitId};
use crate::search::RunTrace;

pub const SCHEMA_VERSION: u64 = 1;

pub fn to_versioned_string<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    let Value::Object(map) = &mut v else {
        return Err(Error::Config("only objects can be written as versioned files".into()));
    };
    map.insert("v".into(), Value::from(SCHEMA_VERSION));
    let mut text = serde_json::to_string(&v)?;
    text.push('\n');
    Ok(text)
}

/// Parses a versioned document; `path` only labels errors.
pub fn from_versioned_str<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    let json = |source| Error::Json { path: path.to_path_buf(), source };
    let mut v: Value = serde_json::from_str(text).map_err(json)?;
    let found = match v.as_object_mut().and_then(|m| m.remove("v")) {
        Some(Value::Number(n)) => n.as_u64().unwrap_or(0),
        _ => 0,
    };
    if found != SCHEMA_VERSION {
        return Err(Error::SchemaVersion { path: path.to_path_buf(), found, expected: SCHEMA_VERSION });
    }
    serde_json::from_value(v).map_err(json)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let text = to_versioned_string(value)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    from_versioned_str(&text, path)
}

/// Units whose matching or activities changed from the previous state.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanDelta {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub matching: BTreeMap<UnitId, Slot>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub activities: BTreeMap<UnitId, Vec<Activity>>,
}

impl PlanDelta {
    pub fn between(prev: &Plan, next: &Plan) -> Self {
        let mut d = PlanDelta::default();
        for (u, s) in &next.matching {
            if prev.matching.get(u) != Some(s) {
                d.matching.insert(*u, *s);
            }
        }
        for (u, a) in &next.activities {
            if prev.activities.get(u) != Some(a) {
                d.activities.insert(*u, a.clone());
            }
        }
        d
    }

    pub fn apply(&self, plan: &Plan) -> Plan {
        let mut p = plan.clone();
        p.matching.extend(self.matching.iter().map(|(u, s)| (*u, *s)));
        p.activities.extend(self.activities.iter().map(|(u, a)| (*u, a.clone())));
        p
    }
}

/// On-disk form of a [`RunTrace`]: the initial plan followed by deltas.
/// Relies on every state keeping the same set of units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub instance: String,
    pub seed: u64,
    pub feasible: bool,
    pub n_iterations: usize,
    pub proposals: u64,
    pub costs: Vec<f64>,
    pub reached_at: Vec<u64>,
    pub initial: Plan,
    pub deltas: Vec<PlanDelta>,
}

impl TraceFile {
    pub fn new(instance: impl Into<String>, trace: &RunTrace) -> Self {
        TraceFile {
            instance: instance.into(),
            seed: trace.seed,
            feasible: trace.feasible,
            n_iterations: trace.n_iterations,
            proposals: trace.proposals,
            costs: trace.costs.clone(),
            reached_at: trace.reached_at.clone(),
            initial: trace.plans.first().cloned().unwrap_or_default(),
            deltas: trace.plans.windows(2).map(|w| PlanDelta::between(&w[0], &w[1])).collect(),
        }
    }

    pub fn plans(&self) -> Vec<Plan> {
        let mut plans = Vec::with_capacity(self.deltas.len() + 1);
        plans.push(self.initial.clone());
        for d in &self.deltas {
            let next = d.apply(plans.last().expect("non-empty"));
            plans.push(next);
        }
        plans
    }

    /// Plans at the given ascending state indices, without keeping the rest.
    pub fn plans_at(&self, indices: &[usize]) -> Vec<Plan> {
        let mut out = Vec::with_capacity(indices.len());
        let mut current = self.initial.clone();
        let mut at = 0;
        for &i in indices {
            while at < i {
                current = self.deltas[at].apply(&current);
                at += 1;
            }
            out.push(current.clone());
        }
        out
    }

    pub fn into_trace(self) -> RunTrace {
        RunTrace {
            plans: self.plans(),
            costs: self.costs,
            feasible: self.feasible,
            n_iterations: self.n_iterations,
            proposals: self.proposals,
            reached_at: self.reached_at,
            wall_time_seconds: 0.0,
            seed: self.seed,
        }
    }
}
