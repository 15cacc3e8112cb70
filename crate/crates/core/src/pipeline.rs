//! Stages from scenario to runtime estimate, in memory and file-based.
//!
//! Every stage is deterministic in its inputs and seeds. Wall-clock times
//! never enter an artifact; file stages append them to `timings.log` next to
//! their outputs.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{balance_and_split, label_costs, DatasetSplit, LabeledExample, Sampling, SplitConfig};
use crate::error::{Error, Result};
use crate::gnn::{evaluate, fit, Architecture, Confusion, GraphInput, Metrics, Model, TrainParams};
use crate::graph::{plan_to_graph, ActivityGraph, FeatureSet};
use crate::initial::{build_initial_plan, initial_matching};
use crate::instance_gen::{generate_instance, ScenarioConfig};
use crate::io::{read_json, write_json, TraceFile};
use crate::model::{Instance, Minutes, Plan};
use crate::policy::{estimate_expected_runtime, policy_run, FeasibilityScorer, PolicyConfig, RuntimeEstimate, RuntimeModel, Verdict};
use crate::search::{ls_run, LsParams, RunTrace};

/// Seed of item `index` in a stage seeded with `base` (SplitMix64 finaliser).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// `n` instances, the `i`-th generated with `derive_seed(seed, i)`.
pub fn generate(scenario: &ScenarioConfig, n: usize, seed: u64) -> Result<Vec<(u64, Instance)>> {
    (0..n as u64)
        .map(|i| {
            let s = derive_seed(seed, i);
            let config = ScenarioConfig { seed: s, ..scenario.clone() };
            Ok((s, generate_instance(&config)?))
        })
        .collect()
}

pub fn initial_plan(instance: &Instance) -> Result<Plan> {
    build_initial_plan(instance, &initial_matching(instance))
}

/// Searches every instance from its initial plan; run `i` uses
/// `derive_seed(seed, i)`. Results keep the input order.
pub fn solve_all(instances: &[Instance], ls: &LsParams, seed: u64, jobs: usize) -> Result<Vec<RunTrace>> {
    pool(jobs)?.install(|| {
        instances
            .par_iter()
            .enumerate()
            .map(|(i, inst)| {
                let params = LsParams { seed: derive_seed(seed, i as u64), ..ls.clone() };
                ls_run(inst, &initial_plan(inst)?, &params)
            })
            .collect()
    })
}

pub fn label_traces<'a>(costs: impl IntoIterator<Item = &'a [f64]>, look_ahead: usize) -> Vec<Vec<LabeledExample>> {
    costs
        .into_iter()
        .enumerate()
        .map(|(run, c)| {
            label_costs(c, look_ahead)
                .into_iter()
                .enumerate()
                .map(|(iteration, label)| LabeledExample { run, iteration, label })
                .collect()
        })
        .collect()
}

/// Activity graphs of `examples`, fetching plans per run through `plans_of`.
pub fn example_graphs(
    examples: &[LabeledExample],
    mut plans_of: impl FnMut(usize, &[usize]) -> Result<Vec<Plan>>,
    horizon_of: impl Fn(usize) -> Minutes,
) -> Result<Vec<(ActivityGraph, Minutes, u8)>> {
    let mut by_run: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for e in examples {
        by_run.entry(e.run).or_default().push(e.iteration);
    }
    let mut graphs: BTreeMap<(usize, usize), ActivityGraph> = BTreeMap::new();
    for (run, mut its) in by_run {
        its.sort_unstable();
        its.dedup();
        for (it, plan) in its.iter().zip(plans_of(run, &its)?) {
            graphs.insert((run, *it), plan_to_graph(&plan));
        }
    }
    Ok(examples
        .iter()
        .map(|e| (graphs[&(e.run, e.iteration)].clone(), horizon_of(e.run), e.label))
        .collect())
}

pub fn model_inputs(model: &Model, graphs: &[(ActivityGraph, Minutes, u8)]) -> Vec<(GraphInput, u8)> {
    graphs.iter().map(|(g, h, y)| (model.graph_input(g, *h), *y)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub feature_set: FeatureSet,
    pub params: TrainParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            architecture: Architecture::default(),
            feature_set: FeatureSet::LabelsAndTime,
            params: TrainParams::default(),
        }
    }
}

// ---------------------------------------------------------------------------
// Desk-scale experiment

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub n_instances: usize,
    pub ls: LsParams,
    pub look_ahead: usize,
    pub split: SplitConfig,
    pub train: TrainConfig,
    /// One split and model initialisation per entry.
    pub repetition_seeds: Vec<u64>,
    pub seed: u64,
    pub jobs: usize,
}

impl ExperimentConfig {
    /// Initial-solution models on 200 instances of eight units.
    pub fn desk() -> Self {
        ExperimentConfig {
            scenario: ScenarioConfig::desk(8, 0),
            n_instances: 200,
            ls: LsParams::desk(1500, 0),
            look_ahead: usize::MAX / 2,
            split: SplitConfig {
                sampling: Sampling::InitialOnly,
                per_run_cap: 1,
                test_fraction: 0.3,
                balance_test: true,
                seed: 0,
            },
            train: TrainConfig {
                params: TrainParams { learning_rate: 1e-3, epochs: 60, batch_size: 50, ..TrainParams::default() },
                ..TrainConfig::default()
            },
            repetition_seeds: vec![1, 2, 3, 4, 5],
            seed: 2024,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Repetition {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub with_time: Metrics,
    pub labels_only: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub n_instances: usize,
    pub n_feasible_runs: usize,
    pub repetitions: Vec<Repetition>,
    pub mean_balanced_accuracy_with_time: f64,
    pub mean_balanced_accuracy_labels_only: f64,
}

/// Generates, solves, then trains and tests a temporal-feature model and a
/// label-only model on the same run-level split for every repetition seed.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let instances: Vec<Instance> = generate(&config.scenario, config.n_instances, config.seed)?
        .into_iter()
        .map(|(_, i)| i)
        .collect();
    let traces = solve_all(&instances, &config.ls, config.seed, config.jobs)?;
    let labeled = label_traces(traces.iter().map(|t| t.costs.as_slice()), config.look_ahead);
    let mut repetitions = Vec::new();
    for &seed in &config.repetition_seeds {
        let split = balance_and_split(&labeled, &SplitConfig { seed, ..config.split.clone() })?;
        let plans_of = |run: usize, its: &[usize]| -> Result<Vec<Plan>> { Ok(its.iter().map(|&i| traces[run].plans[i].clone()).collect()) };
        let horizon_of = |run: usize| instances[run].horizon;
        let train = example_graphs(&split.train, plans_of, horizon_of)?;
        let test = example_graphs(&split.test, plans_of, horizon_of)?;
        let mut metrics = Vec::new();
        for feature_set in [FeatureSet::LabelsAndTime, FeatureSet::Labels] {
            let refs: Vec<_> = train.iter().map(|(g, h, y)| (g, *h, *y)).collect();
            let params = TrainParams { seed, ..config.train.params.clone() };
            let (model, _) = fit(&refs, &config.train.architecture, feature_set, &params)?;
            metrics.push(evaluate(&model, &model_inputs(&model, &test))?);
        }
        repetitions.push(Repetition {
            seed,
            n_train: split.train.len(),
            n_test: split.test.len(),
            with_time: metrics[0],
            labels_only: metrics[1],
        });
    }
    let mean = |f: fn(&Repetition) -> f64| repetitions.iter().map(f).sum::<f64>() / repetitions.len().max(1) as f64;
    Ok(ExperimentReport {
        n_instances: instances.len(),
        n_feasible_runs: traces.iter().filter(|t| t.feasible).count(),
        mean_balanced_accuracy_with_time: mean(|r| r.with_time.balanced_accuracy),
        mean_balanced_accuracy_labels_only: mean(|r| r.labels_only.balanced_accuracy),
        repetitions,
    })
}

// ---------------------------------------------------------------------------
// Policy simulation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub instance: String,
    pub seed: u64,
    pub ls_feasible: bool,
    pub ls_iterations: usize,
    pub ls_proposals: u64,
    /// Proposals spent when the plain run reached the decision point.
    pub ls_decision_proposals: Option<u64>,
    pub verdict: Verdict,
    pub iterations: usize,
    pub proposals: u64,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub n: usize,
    /// Fraction of instances where the policy's feasible/infeasible verdict
    /// equals the plain run's.
    pub verdict_agreement: f64,
    /// Truth: plain run feasible. Prediction: run not halted by the policy.
    pub decision_confusion: Confusion,
    pub runtime_model: RuntimeModel,
    /// Chain estimate built from the observed quantities (times in proposals).
    pub estimate: Option<RuntimeEstimate>,
    pub measured_t_without: f64,
    pub measured_t_with: f64,
    pub measured_reduction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub policy: PolicyConfig,
    pub ls: LsParams,
    pub seed: u64,
    pub entries: Vec<PolicyEntry>,
    pub summary: PolicySummary,
}

/// Plain search and policy-controlled search with the same seed on every
/// instance; `scorer_of(i)` supplies the scorer for instance `i`.
pub fn simulate_policy<S: FeasibilityScorer + Sync>(
    instances: &[(String, Instance)],
    scorer_of: impl Fn(usize) -> S + Sync,
    ls: &LsParams,
    policy: &PolicyConfig,
    seed: u64,
    jobs: usize,
) -> Result<PolicyReport> {
    policy.check()?;
    let k = policy.decision_iteration;
    let entries: Vec<PolicyEntry> = pool(jobs)?.install(|| {
        instances
            .par_iter()
            .enumerate()
            .map(|(i, (name, inst))| {
                let s = derive_seed(seed, i as u64);
                let params = LsParams { seed: s, ..ls.clone() };
                let initial = initial_plan(inst)?;
                let plain = ls_run(inst, &initial, &params)?;
                let scorer = scorer_of(i);
                let out = policy_run(inst, &initial, &scorer, &params, policy)?;
                Ok(PolicyEntry {
                    instance: name.clone(),
                    seed: s,
                    ls_feasible: plain.feasible,
                    ls_iterations: plain.n_iterations,
                    ls_proposals: plain.proposals,
                    ls_decision_proposals: plain.reached_at.get(k).copied(),
                    verdict: out.verdict,
                    iterations: out.iterations,
                    proposals: out.proposals,
                    scores: out.scores,
                })
            })
            .collect::<Result<_>>()
    })?;
    let summary = summarize_policy(&entries);
    Ok(PolicyReport { policy: policy.clone(), ls: ls.clone(), seed, entries, summary })
}

pub fn summarize_policy(entries: &[PolicyEntry]) -> PolicySummary {
    let n = entries.len();
    let mean = |xs: Vec<f64>| if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 };
    let mut c = Confusion::default();
    for e in entries {
        c.add(u8::from(e.ls_feasible), u8::from(e.verdict != Verdict::InfeasiblePredicted));
    }
    let agree = entries.iter().filter(|e| e.verdict.is_feasible() == e.ls_feasible).count();
    let n_feasible = entries.iter().filter(|e| e.ls_feasible).count();
    let t_feasible = mean(entries.iter().filter(|e| e.ls_feasible).map(|e| e.ls_proposals as f64).collect());
    let t_infeasible = mean(entries.iter().filter(|e| !e.ls_feasible).map(|e| e.ls_proposals as f64).collect());
    let decision: Vec<f64> = entries.iter().filter_map(|e| e.ls_decision_proposals.map(|p| p as f64)).collect();
    let t_decision = if decision.is_empty() { t_infeasible } else { mean(decision) };
    let runtime_model = RuntimeModel::from_confusion(&c, ratio(n_feasible, n), t_feasible, t_infeasible, t_decision);
    let t_without = mean(entries.iter().map(|e| e.ls_proposals as f64).collect());
    let t_with = mean(entries.iter().map(|e| e.proposals as f64).collect());
    PolicySummary {
        n,
        verdict_agreement: ratio(agree, n),
        decision_confusion: c,
        estimate: estimate_expected_runtime(&runtime_model).ok(),
        runtime_model,
        measured_t_without: t_without,
        measured_t_with: t_with,
        measured_reduction: if t_without > 0.0 { 1.0 - t_with / t_without } else { 0.0 },
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

// ---------------------------------------------------------------------------
// File stages

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub file: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenIndex {
    pub scenario: ScenarioConfig,
    pub seed: u64,
    pub instances: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveEntry {
    pub file: String,
    pub instance: String,
    pub seed: u64,
    pub feasible: bool,
    pub n_iterations: usize,
    pub proposals: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveIndex {
    pub ls: LsParams,
    pub seed: u64,
    pub traces: Vec<SolveEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub traces: Vec<String>,
    pub look_ahead: usize,
    pub split_config: SplitConfig,
    pub split: DatasetSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub manifest: String,
    pub config: TrainConfig,
    pub k: usize,
    pub n_train: usize,
    pub loss_curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub manifest: String,
    pub n_test: usize,
    pub metrics: Metrics,
}

/// Input of the `estimate` stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    pub confusion: Confusion,
    pub prior_feasible: f64,
    pub t_feasible: f64,
    pub t_infeasible: f64,
    pub t_decision: f64,
}

impl EstimateConfig {
    /// The reference fold and timings of the source study.
    pub fn reference() -> Self {
        EstimateConfig {
            confusion: Confusion { true_neg: 543, false_pos: 250, false_neg: 284, true_pos: 523 },
            prior_feasible: 0.28,
            t_feasible: 157.0,
            t_infeasible: 300.0,
            t_decision: 80.0,
        }
    }

    pub fn runtime_model(&self) -> RuntimeModel {
        RuntimeModel::from_confusion(&self.confusion, self.prior_feasible, self.t_feasible, self.t_infeasible, self.t_decision)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub config: EstimateConfig,
    pub runtime_model: RuntimeModel,
    pub estimate: RuntimeEstimate,
}

fn display(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Appends a wall-time line to `<dir>/timings.log`.
pub fn log_timing(dir: &Path, stage: &str, what: &str, seconds: f64) -> Result<()> {
    let path = dir.join("timings.log");
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|source| Error::Io { path: path.clone(), source })?;
    writeln!(f, "{stage}\t{what}\t{seconds:.6}").map_err(|source| Error::Io { path, source })
}

pub fn stage_gen(scenario: &ScenarioConfig, n: usize, seed: u64, out: &Path) -> Result<GenIndex> {
    let started = Instant::now();
    let dir = out.join("instances");
    let mut entries = Vec::new();
    for (i, (s, inst)) in generate(scenario, n, seed)?.into_iter().enumerate() {
        let file = dir.join(format!("instance_{i:04}.json"));
        write_json(&file, &inst)?;
        entries.push(FileEntry { file: display(&file), seed: s });
    }
    let index = GenIndex { scenario: scenario.clone(), seed, instances: entries };
    write_json(dir.join("index.json"), &index)?;
    log_timing(&dir, "gen", "all", started.elapsed().as_secs_f64())?;
    Ok(index)
}

pub fn load_instances(index_path: &Path) -> Result<Vec<(String, Instance)>> {
    let index: GenIndex = read_json(index_path)?;
    index
        .instances
        .iter()
        .map(|e| Ok((e.file.clone(), read_json(&e.file)?)))
        .collect()
}

pub fn stage_solve(instances_index: &Path, ls: &LsParams, seed: u64, jobs: usize, out: &Path) -> Result<SolveIndex> {
    let instances = load_instances(instances_index)?;
    let dir = out.join("traces");
    std::fs::create_dir_all(&dir).map_err(|source| Error::Io { path: dir.clone(), source })?;
    let results: Vec<(SolveEntry, f64)> = pool(jobs)?.install(|| {
        instances
            .par_iter()
            .enumerate()
            .map(|(i, (name, inst))| {
                let s = derive_seed(seed, i as u64);
                let trace = ls_run(inst, &initial_plan(inst)?, &LsParams { seed: s, ..ls.clone() })?;
                let file = dir.join(format!("trace_{i:04}.json"));
                write_json(&file, &TraceFile::new(name.clone(), &trace))?;
                let entry = SolveEntry {
                    file: display(&file),
                    instance: name.clone(),
                    seed: s,
                    feasible: trace.feasible,
                    n_iterations: trace.n_iterations,
                    proposals: trace.proposals,
                };
                Ok((entry, trace.wall_time_seconds))
            })
            .collect::<Result<_>>()
    })?;
    for (e, secs) in &results {
        log_timing(&dir, "solve", &e.file, *secs)?;
    }
    let index = SolveIndex { ls: ls.clone(), seed, traces: results.into_iter().map(|r| r.0).collect() };
    write_json(dir.join("index.json"), &index)?;
    Ok(index)
}

pub fn stage_build_dataset(traces_index: &Path, look_ahead: usize, split_config: &SplitConfig, out: &Path) -> Result<DatasetManifest> {
    let index: SolveIndex = read_json(traces_index)?;
    let costs: Vec<Vec<f64>> = index
        .traces
        .iter()
        .map(|e| Ok(read_json::<TraceFile>(&e.file)?.costs))
        .collect::<Result<_>>()?;
    let labeled = label_traces(costs.iter().map(Vec::as_slice), look_ahead);
    let split = balance_and_split(&labeled, split_config)?;
    let manifest = DatasetManifest {
        traces: index.traces.iter().map(|e| e.file.clone()).collect(),
        look_ahead,
        split_config: split_config.clone(),
        split,
    };
    write_json(out.join("dataset.json"), &manifest)?;
    Ok(manifest)
}

/// Graphs of a manifest's examples, reading each trace and instance once.
pub fn manifest_graphs(manifest: &DatasetManifest, examples: &[LabeledExample]) -> Result<Vec<(ActivityGraph, Minutes, u8)>> {
    let mut horizons: BTreeMap<usize, Minutes> = BTreeMap::new();
    let graphs = example_graphs(
        examples,
        |run, its| {
            let path = manifest
                .traces
                .get(run)
                .ok_or_else(|| Error::Config(format!("manifest has no trace for run {run}")))?;
            let trace: TraceFile = read_json(path)?;
            let inst: Instance = read_json(&trace.instance)?;
            horizons.insert(run, inst.horizon);
            if its.last().is_some_and(|&i| i > trace.deltas.len()) {
                return Err(Error::Config(format!("{path}: state index out of range")));
            }
            Ok(trace.plans_at(its))
        },
        |_| 0,
    )?;
    // Horizons are only known once each run's instance was read.
    Ok(graphs
        .into_iter()
        .zip(examples)
        .map(|((g, _, y), e)| (g, horizons[&e.run], y))
        .collect())
}

pub fn stage_train(manifest_path: &Path, config: &TrainConfig, out: &Path) -> Result<(Model, TrainReport)> {
    let started = Instant::now();
    let manifest: DatasetManifest = read_json(manifest_path)?;
    let train = manifest_graphs(&manifest, &manifest.split.train)?;
    let refs: Vec<_> = train.iter().map(|(g, h, y)| (g, *h, *y)).collect();
    let (model, curve) = fit(&refs, &config.architecture, config.feature_set, &config.params)?;
    let report = TrainReport {
        manifest: display(manifest_path),
        config: config.clone(),
        k: model.k,
        n_train: train.len(),
        loss_curve: curve,
    };
    write_json(out.join("model.json"), &model)?;
    write_json(out.join("train_report.json"), &report)?;
    log_timing(out, "train", "all", started.elapsed().as_secs_f64())?;
    Ok((model, report))
}

pub fn stage_eval(model_path: &Path, manifest_path: &Path, out: &Path) -> Result<EvalReport> {
    let model: Model = read_json(model_path)?;
    model.check()?;
    let manifest: DatasetManifest = read_json(manifest_path)?;
    let test = manifest_graphs(&manifest, &manifest.split.test)?;
    let metrics = evaluate(&model, &model_inputs(&model, &test))?;
    let report = EvalReport {
        model: display(model_path),
        manifest: display(manifest_path),
        n_test: test.len(),
        metrics,
    };
    write_json(out.join("metrics.json"), &report)?;
    Ok(report)
}

pub fn stage_policy_sim(
    instances_index: &Path,
    model_path: &Path,
    ls: &LsParams,
    policy: &PolicyConfig,
    seed: u64,
    jobs: usize,
    out: &Path,
) -> Result<PolicyReport> {
    let started = Instant::now();
    let instances = load_instances(instances_index)?;
    let model: Model = read_json(model_path)?;
    model.check()?;
    let report = simulate_policy(&instances, |_| &model, ls, policy, seed, jobs)?;
    write_json(out.join("policy_report.json"), &report)?;
    log_timing(out, "policy-sim", "all", started.elapsed().as_secs_f64())?;
    Ok(report)
}

pub fn stage_estimate(config: &EstimateConfig, out: &Path) -> Result<EstimateReport> {
    let runtime_model = config.runtime_model();
    let estimate = estimate_expected_runtime(&runtime_model)?;
    let report = EstimateReport { config: config.clone(), runtime_model, estimate };
    write_json(out.join("estimate.json"), &report)?;
    Ok(report)
}

/// Paths of the standard layout under one output directory.
pub fn layout(out: &Path) -> [PathBuf; 3] {
    [
        out.join("instances").join("index.json"),
        out.join("traces").join("index.json"),
        out.join("dataset.json"),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ() {
        let s: std::collections::BTreeSet<u64> = (0..1000).map(|i| derive_seed(7, i)).collect();
        assert_eq!(s.len(), 1000);
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
        assert_ne!(derive_seed(7, 3), derive_seed(8, 3));
    }

    #[test]
    fn reference_estimate_is_finite() {
        let r = estimate_expected_runtime(&EstimateConfig::reference().runtime_model()).unwrap();
        assert!((r.t_without - 259.96).abs() < 1e-9);
        assert!(r.t_with.is_finite());
    }
}
