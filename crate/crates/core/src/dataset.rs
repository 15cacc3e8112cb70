//! Training data from local-search runs: look-ahead labels, per-run
//! sampling, a run-level train/test split, class balancing and batching.

use std::collections::BTreeSet;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::RunTrace;

/// A graph of run `run` at iteration `iteration`, with its class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LabeledExample {
    pub run: usize,
    pub iteration: usize,
    pub label: u8,
}

/// `y_i = 1` iff the plan `W` steps ahead (clamped to the last plan) has zero cost.
pub fn label_costs(costs: &[f64], look_ahead: usize) -> Vec<u8> {
    let Some(last) = costs.len().checked_sub(1) else {
        return Vec::new();
    };
    (0..costs.len())
        .map(|i| u8::from(costs[last.min(i + look_ahead)] == 0.0))
        .collect()
}

pub fn label_run(trace: &RunTrace, run: usize, look_ahead: usize) -> Vec<LabeledExample> {
    label_costs(&trace.costs, look_ahead)
        .into_iter()
        .enumerate()
        .map(|(iteration, label)| LabeledExample { run, iteration, label })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Sampling {
    /// Every graph of the run is a candidate.
    All,
    /// Graphs `0..=floor(fraction * N_l)` only.
    FirstFraction { fraction: f64 },
    /// The initial solution only.
    InitialOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub sampling: Sampling,
    /// At most this many graphs per run, drawn uniformly without replacement.
    pub per_run_cap: usize,
    pub test_fraction: f64,
    /// Undersample the test split too, so that its metrics are on balanced data.
    pub balance_test: bool,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            sampling: Sampling::All,
            per_run_cap: 32,
            test_fraction: 0.25,
            balance_test: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
    pub train_runs: Vec<usize>,
    pub test_runs: Vec<usize>,
}

impl DatasetSplit {
    pub fn class_counts(examples: &[LabeledExample]) -> [usize; 2] {
        let pos = examples.iter().filter(|e| e.label == 1).count();
        [examples.len() - pos, pos]
    }
}

fn candidates(run: &[LabeledExample], sampling: Sampling) -> Vec<LabeledExample> {
    match sampling {
        Sampling::All => run.to_vec(),
        Sampling::InitialOnly => run.iter().filter(|e| e.iteration == 0).copied().collect(),
        Sampling::FirstFraction { fraction } => {
            let n_l = run.iter().map(|e| e.iteration).max().unwrap_or(0);
            let last = (fraction * n_l as f64).floor() as usize;
            run.iter().filter(|e| e.iteration <= last).copied().collect()
        }
    }
}

fn undersample(examples: Vec<LabeledExample>, rng: &mut ChaCha8Rng) -> Vec<LabeledExample> {
    let (mut pos, mut neg): (Vec<_>, Vec<_>) = examples.into_iter().partition(|e| e.label == 1);
    let keep = pos.len().min(neg.len());
    for class in [&mut pos, &mut neg] {
        if class.len() > keep {
            class.shuffle(rng);
            class.truncate(keep);
        }
    }
    let mut out: Vec<_> = pos.into_iter().chain(neg).collect();
    out.sort();
    out
}

/// Samples per run, splits runs into train and test (stratified by whether
/// the run ended feasible), then undersamples the majority class.
pub fn balance_and_split(runs: &[Vec<LabeledExample>], config: &SplitConfig) -> Result<DatasetSplit> {
    if !(0.0..1.0).contains(&config.test_fraction) {
        return Err(Error::Config("test_fraction must lie in [0, 1)".into()));
    }
    if config.per_run_cap == 0 {
        return Err(Error::Config("per_run_cap must be positive".into()));
    }
    if let Sampling::FirstFraction { fraction } = config.sampling {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::Config("sampling fraction must lie in [0, 1]".into()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut sampled: Vec<Vec<LabeledExample>> = Vec::with_capacity(runs.len());
    for run in runs {
        let cands = candidates(run, config.sampling);
        let picked = if cands.len() > config.per_run_cap {
            let mut idx = index::sample(&mut rng, cands.len(), config.per_run_cap).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| cands[i]).collect()
        } else {
            cands
        };
        sampled.push(picked);
    }
    let labels: BTreeSet<u8> = sampled.iter().flatten().map(|e| e.label).collect();
    if labels.len() < 2 {
        return Err(Error::Config("the corpus holds a single class; cannot balance".into()));
    }

    // A run is "feasible" if any of its sampled graphs is labelled 1.
    let (mut good, mut bad): (Vec<usize>, Vec<usize>) =
        (0..runs.len()).partition(|&r| sampled[r].iter().any(|e| e.label == 1));
    let mut train_runs = Vec::new();
    let mut test_runs = Vec::new();
    for group in [&mut good, &mut bad] {
        group.shuffle(&mut rng);
        let n_test = (config.test_fraction * group.len() as f64).round() as usize;
        // Keep at least one run of each kind for training.
        let n_test = n_test.min(group.len().saturating_sub(1));
        test_runs.extend_from_slice(&group[..n_test]);
        train_runs.extend_from_slice(&group[n_test..]);
    }
    train_runs.sort_unstable();
    test_runs.sort_unstable();

    let gather = |ids: &[usize]| -> Vec<LabeledExample> { ids.iter().flat_map(|&r| sampled[r].iter().copied()).collect() };
    let train = gather(&train_runs);
    if DatasetSplit::class_counts(&train).contains(&0) {
        return Err(Error::Config("the training split holds a single class".into()));
    }
    let train = undersample(train, &mut rng);
    let mut test = gather(&test_runs);
    if config.balance_test {
        test = undersample(test, &mut rng);
    }
    Ok(DatasetSplit { train, test, train_runs, test_runs })
}

/// A fresh permutation of `0..m` per `(seed, epoch)`, cut into batches of
/// `b`; the last batch may be short.
pub fn make_batches(m: usize, b: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng);
    order.chunks(b.max(1)).map(<[usize]>::to_vec).collect()
}
