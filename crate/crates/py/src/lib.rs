//! Python module `tusp`: instances, plans, search, activity graphs, trained
//! models and the runtime estimate. Objects cross the boundary as wrapper
//! classes or JSON text.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyIOError, PyIndexError, PyValueError};
use pyo3::prelude::*;

use tusp_core::error::Error;
use tusp_core::gnn::Confusion;
use tusp_core::graph::{extract_features, plan_to_graph, FeatureSet, LabelAlphabet};
use tusp_core::instance_gen::{generate_instance as generate, ScenarioConfig};
use tusp_core::model::{TrainUnit, UnitType};
use tusp_core::pipeline::initial_plan;
use tusp_core::policy::{estimate_expected_runtime, FeasibilityScorer, RuntimeModel};
use tusp_core::search::{ls_run, LsParams, RunTrace};
use tusp_core::validate::{plan_cost, validate_plan};
use tusp_core::{dataset, initial, io, model};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(module = "tusp", frozen)]
struct Instance {
    inner: model::Instance,
}

#[pymethods]
impl Instance {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: model::Instance = serde_json::from_str(text).map_err(json_err)?;
        inner.check().map_err(py_err)?;
        Ok(Instance { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }

    #[getter]
    fn n_units(&self) -> usize {
        self.inner.n_units()
    }

    #[getter]
    fn horizon(&self) -> i64 {
        self.inner.horizon
    }

    #[getter]
    fn n_tasks(&self) -> usize {
        self.inner.tasks.len()
    }

    /// Maximum matching followed by the greedy service schedule.
    fn initial_plan(&self) -> PyResult<Plan> {
        Ok(Plan { inner: initial_plan(&self.inner).map_err(py_err)? })
    }

    /// Violations of `plan` as `(kind, weight, detail)` tuples.
    fn validate(&self, plan: &Plan) -> PyResult<Vec<(String, f64, String)>> {
        let v = validate_plan(&self.inner, &plan.inner).map_err(py_err)?;
        Ok(v.into_iter()
            .map(|x| (serde_json::to_value(x.kind).ok().and_then(|k| k.as_str().map(String::from)).unwrap_or_default(), x.weight, x.detail))
            .collect())
    }

    fn cost(&self, plan: &Plan) -> PyResult<f64> {
        Ok(plan_cost(&validate_plan(&self.inner, &plan.inner).map_err(py_err)?))
    }

    fn __repr__(&self) -> String {
        format!("Instance(units={}, tasks={}, horizon={})", self.inner.n_units(), self.inner.tasks.len(), self.inner.horizon)
    }
}

#[pyclass(module = "tusp", frozen)]
struct Plan {
    inner: model::Plan,
}

#[pymethods]
impl Plan {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Plan { inner: serde_json::from_str(text).map_err(json_err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }

    #[getter]
    fn n_activities(&self) -> usize {
        self.inner.n_activities()
    }

    fn graph(&self) -> ActivityGraph {
        ActivityGraph { inner: plan_to_graph(&self.inner) }
    }
}

#[pyclass(module = "tusp", frozen)]
struct ActivityGraph {
    inner: tusp_core::graph::ActivityGraph,
}

#[pymethods]
impl ActivityGraph {
    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.nodes.iter().map(|n| n.label.clone()).collect()
    }

    /// `(from, to, class)` triples.
    #[getter]
    fn edges(&self) -> Vec<(usize, usize, String)> {
        self.inner
            .edges
            .iter()
            .map(|e| {
                let class = serde_json::to_value(e.edge_class).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
                (e.from, e.to, class)
            })
            .collect()
    }

    /// Node features over an alphabet built from this graph alone, as rows.
    #[pyo3(signature = (horizon, with_time=true))]
    fn features(&self, horizon: i64, with_time: bool) -> Vec<Vec<f64>> {
        let alphabet = LabelAlphabet::build([&self.inner]);
        let set = if with_time { FeatureSet::LabelsAndTime } else { FeatureSet::Labels };
        let m = extract_features(&self.inner, &alphabet, horizon, set);
        (0..m.rows).map(|i| m.row(i).to_vec()).collect()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }
}

#[pyclass(module = "tusp", frozen)]
struct Trace {
    inner: RunTrace,
}

#[pymethods]
impl Trace {
    #[getter]
    fn feasible(&self) -> bool {
        self.inner.feasible
    }

    #[getter]
    fn costs(&self) -> Vec<f64> {
        self.inner.costs.clone()
    }

    #[getter]
    fn n_iterations(&self) -> usize {
        self.inner.n_iterations
    }

    #[getter]
    fn proposals(&self) -> u64 {
        self.inner.proposals
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn plan(&self, index: usize) -> PyResult<Plan> {
        self.inner
            .plans
            .get(index)
            .map(|p| Plan { inner: p.clone() })
            .ok_or_else(|| PyIndexError::new_err(format!("trace has {} states", self.inner.len())))
    }

    /// Look-ahead labels of every state.
    fn labels(&self, look_ahead: usize) -> Vec<u32> {
        dataset::label_costs(&self.inner.costs, look_ahead).into_iter().map(u32::from).collect()
    }
}

#[pyclass(module = "tusp", frozen)]
struct Model {
    inner: tusp_core::gnn::Model,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner: tusp_core::gnn::Model = io::read_json(path).map_err(py_err)?;
        inner.check().map_err(py_err)?;
        Ok(Model { inner })
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    /// Probability that the search from `plan` ends feasible.
    fn score(&self, instance: &Instance, plan: &Plan) -> PyResult<f64> {
        FeasibilityScorer::score(&self.inner, &instance.inner, &plan.inner).map_err(py_err)
    }
}

/// A generated instance; `config_json` overrides the default scenario.
#[pyfunction]
#[pyo3(signature = (n_units=8, seed=0, config_json=None))]
fn generate_instance(n_units: usize, seed: u64, config_json: Option<&str>) -> PyResult<Instance> {
    let mut config = match config_json {
        Some(text) => serde_json::from_str(text).map_err(json_err)?,
        None => ScenarioConfig::desk(n_units, seed),
    };
    config.seed = seed;
    Ok(Instance { inner: generate(&config).map_err(py_err)? })
}

/// Local search from the initial plan, capped at `max_iterations` proposals.
#[pyfunction]
#[pyo3(signature = (instance, max_iterations=1500, seed=0))]
fn solve(py: Python<'_>, instance: &Instance, max_iterations: u64, seed: u64) -> PyResult<Trace> {
    let inst = instance.inner.clone();
    let trace = py
        .detach(move || ls_run(&inst, &initial_plan(&inst)?, &LsParams::desk(max_iterations, seed)))
        .map_err(py_err)?;
    Ok(Trace { inner: trace })
}

/// Maximum matching of `(type, subtype)` units to slots: unit index -> slot index.
#[pyfunction]
fn match_units(units: Vec<(String, u32)>, slots: Vec<(String, u32)>) -> BTreeMap<usize, usize> {
    let units: Vec<TrainUnit> = units
        .into_iter()
        .enumerate()
        .map(|(i, (t, s))| TrainUnit::new(i as u32, UnitType::new(t), s))
        .collect();
    let slots: Vec<(UnitType, u32)> = slots.into_iter().map(|(t, s)| (UnitType::new(t), s)).collect();
    initial::hopcroft_karp_match(&units, &slots)
        .into_iter()
        .map(|(u, j)| (u as usize, j))
        .collect()
}

#[pyfunction]
fn label_costs(costs: Vec<f64>, look_ahead: usize) -> Vec<u32> {
    dataset::label_costs(&costs, look_ahead).into_iter().map(u32::from).collect()
}

/// Expected runtime with and without the policy, from a confusion matrix
/// `(tn, fp, fn, tp)` and the mean times of each outcome.
#[pyfunction]
#[pyo3(signature = (confusion, prior_feasible, t_feasible, t_infeasible, t_decision))]
fn estimate_runtime(
    confusion: (u64, u64, u64, u64),
    prior_feasible: f64,
    t_feasible: f64,
    t_infeasible: f64,
    t_decision: f64,
) -> PyResult<BTreeMap<String, f64>> {
    let (true_neg, false_pos, false_neg, true_pos) = confusion;
    let c = Confusion { true_neg, false_pos, false_neg, true_pos };
    let rm = RuntimeModel::from_confusion(&c, prior_feasible, t_feasible, t_infeasible, t_decision);
    let e = estimate_expected_runtime(&rm).map_err(py_err)?;
    Ok(BTreeMap::from([
        ("t_without".to_string(), e.t_without),
        ("t_with".to_string(), e.t_with),
        ("reduction_fraction".to_string(), e.reduction_fraction),
    ]))
}

#[pymodule]
fn tusp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Instance>()?;
    m.add_class::<Plan>()?;
    m.add_class::<ActivityGraph>()?;
    m.add_class::<Trace>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(generate_instance, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(match_units, m)?)?;
    m.add_function(wrap_pyfunction!(label_costs, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_runtime, m)?)?;
    Ok(())
}
