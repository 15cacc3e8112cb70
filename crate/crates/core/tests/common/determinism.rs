//! Runs every file stage into one directory and snapshots the artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use tusp_core::dataset::SplitConfig;
use tusp_core::gnn::{Architecture, TrainParams};
use tusp_core::graph::FeatureSet;
use tusp_core::instance_gen::ScenarioConfig;
use tusp_core::pipeline::*;
use tusp_core::search::LsParams;

pub type Snapshot = BTreeMap<PathBuf, Vec<u8>>;

/// Every file under `dir` except wall-time logs, keyed by relative path.
pub fn snapshot(dir: &Path) -> Snapshot {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "timings.log" {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// gen, solve, build-dataset, train, eval, policy-sim and estimate, plus a
/// miniature experiment, all under `out`.
pub fn all_stages(out: &Path) {
    let [inst_index, trace_index, manifest] = layout(out);
    stage_gen(&ScenarioConfig::desk(9, 0), 14, 5, out).unwrap();
    let ls = LsParams::desk(300, 0);
    stage_solve(&inst_index, &ls, 5, 2, out).unwrap();
    let split = SplitConfig { seed: 5, ..SplitConfig::default() };
    stage_build_dataset(&trace_index, 20, &split, out).unwrap();
    let train = TrainConfig {
        architecture: Architecture::default(),
        feature_set: FeatureSet::LabelsAndTime,
        params: TrainParams { epochs: 2, seed: 5, ..TrainParams::default() },
    };
    stage_train(&manifest, &train, out).unwrap();
    let model = out.join("model.json");
    stage_eval(&model, &manifest, out).unwrap();
    let policy = tusp_core::policy::PolicyConfig { decision_iteration: 20, ..Default::default() };
    stage_policy_sim(&inst_index, &model, &ls, &policy, 5, 2, out).unwrap();
    stage_estimate(&EstimateConfig::reference(), out).unwrap();

    let mut exp = ExperimentConfig::desk();
    exp.n_instances = 24;
    exp.ls = LsParams::desk(300, 0);
    exp.repetition_seeds = vec![1, 2];
    exp.train.params.epochs = 2;
    exp.jobs = 2;
    let report = run_experiment(&exp).unwrap();
    tusp_core::io::write_json(out.join("experiment.json"), &report).unwrap();
}

/// Runs all stages `reruns` times in the same directory; returns the number
/// of artifacts and the names of those that changed between runs.
pub fn rerun(reruns: usize) -> (usize, Vec<String>) {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("out");
    let mut first: Option<Snapshot> = None;
    let mut changed = Vec::new();
    for _ in 0..reruns {
        if out.exists() {
            fs::remove_dir_all(&out).unwrap();
        }
        all_stages(&out);
        let snap = snapshot(&out);
        match &first {
            None => first = Some(snap),
            Some(f) => {
                let keys: std::collections::BTreeSet<_> = f.keys().chain(snap.keys()).collect();
                for k in keys {
                    if f.get(k) != snap.get(k) {
                        changed.push(k.display().to_string());
                    }
                }
            }
        }
    }
    (first.map_or(0, |f| f.len()), changed)
}
