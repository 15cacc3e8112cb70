use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use tusp_core::dataset::SplitConfig;
use tusp_core::error::Result;
use tusp_core::graph::FeatureSet;
use tusp_core::instance_gen::ScenarioConfig;
use tusp_core::io::{read_json, write_json};
use tusp_core::pipeline::{self, EstimateConfig, ExperimentConfig, TrainConfig};
use tusp_core::policy::PolicyConfig;
use tusp_core::search::LsParams;

#[derive(Parser)]
#[command(name = "tusp", version, about = "Train unit shunting: generate, solve, learn, and stop early")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Versioned JSON configuration for the stage.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct Budget {
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Cap on proposed moves per run.
    #[arg(long)]
    iterations: Option<u64>,
    /// Wall-clock limit per run, in seconds.
    #[arg(long)]
    wall_seconds: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate instances from a scenario.
    Gen {
        #[command(flatten)]
        common: Common,
        /// Number of instances.
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Units per instance when no scenario config is given.
        #[arg(long, default_value_t = 8)]
        units: usize,
    },
    /// Run the local search on every instance and write traces.
    Solve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        budget: Budget,
        /// Instance index written by `gen` (default: <out>/instances/index.json).
        #[arg(long)]
        instances: Option<PathBuf>,
    },
    /// Label traces, sample, split by run and balance.
    BuildDataset {
        #[command(flatten)]
        common: Common,
        /// Trace index written by `solve` (default: <out>/traces/index.json).
        #[arg(long)]
        traces: Option<PathBuf>,
        #[arg(long)]
        look_ahead: Option<usize>,
    },
    /// Train a classifier on a dataset manifest.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, value_enum)]
        features: Option<Features>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Evaluate a model on the test split of a manifest.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Run plain and policy-controlled searches side by side.
    PolicySim {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        budget: Budget,
        #[arg(long)]
        instances: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Expected runtime with and without the policy.
    Estimate {
        #[command(flatten)]
        common: Common,
    },
    /// Generate, solve and compare temporal against label-only models.
    Experiment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        instances: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Features {
    Labels,
    LabelsAndTime,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DatasetConfig {
    look_ahead: usize,
    split: SplitConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig { look_ahead: 150, split: SplitConfig::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PolicySimConfig {
    ls: LsParams,
    policy: PolicyConfig,
}

fn load_or<T: DeserializeOwned>(path: &Option<PathBuf>, default: impl FnOnce() -> T) -> Result<T> {
    match path {
        Some(p) => read_json(p),
        None => Ok(default()),
    }
}

fn apply_budget(ls: &mut LsParams, budget: &Budget) {
    if let Some(i) = budget.iterations {
        ls.max_iterations = Some(i);
    }
    if let Some(w) = budget.wall_seconds {
        ls.max_runtime_seconds = w;
    }
}

fn print_seeds(stage: &str, base: u64, seeds: impl IntoIterator<Item = u64>) {
    let list: Vec<String> = seeds.into_iter().map(|s| s.to_string()).collect();
    println!("{stage}: base seed {base}; seeds [{}]", list.join(", "));
}

fn or_default(path: &Option<PathBuf>, fallback: PathBuf) -> PathBuf {
    path.clone().unwrap_or(fallback)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { common, n, units } => {
            let scenario = load_or(&common.config, || ScenarioConfig::desk(units, 0))?;
            let index = pipeline::stage_gen(&scenario, n, common.seed, &common.out)?;
            print_seeds("gen", common.seed, index.instances.iter().map(|e| e.seed));
            println!("wrote {} instances to {}", index.instances.len(), common.out.join("instances").display());
        }
        Command::Solve { common, budget, instances } => {
            let mut ls = load_or(&common.config, || LsParams::desk(1500, 0))?;
            apply_budget(&mut ls, &budget);
            let [inst_index, ..] = pipeline::layout(&common.out);
            let index = pipeline::stage_solve(&or_default(&instances, inst_index), &ls, common.seed, budget.jobs, &common.out)?;
            print_seeds("solve", common.seed, index.traces.iter().map(|e| e.seed));
            let feasible = index.traces.iter().filter(|e| e.feasible).count();
            println!("{feasible}/{} runs feasible", index.traces.len());
        }
        Command::BuildDataset { common, traces, look_ahead } => {
            let mut cfg = load_or(&common.config, DatasetConfig::default)?;
            cfg.split.seed = common.seed;
            if let Some(w) = look_ahead {
                cfg.look_ahead = w;
            }
            let [_, trace_index, _] = pipeline::layout(&common.out);
            let m = pipeline::stage_build_dataset(&or_default(&traces, trace_index), cfg.look_ahead, &cfg.split, &common.out)?;
            print_seeds("build-dataset", common.seed, [cfg.split.seed]);
            println!("train {} examples from {} runs; test {} from {} runs", m.split.train.len(), m.split.train_runs.len(), m.split.test.len(), m.split.test_runs.len());
        }
        Command::Train { common, dataset, features, epochs } => {
            let mut cfg = load_or(&common.config, TrainConfig::default)?;
            cfg.params.seed = common.seed;
            if let Some(f) = features {
                cfg.feature_set = match f {
                    Features::Labels => FeatureSet::Labels,
                    Features::LabelsAndTime => FeatureSet::LabelsAndTime,
                };
            }
            if let Some(e) = epochs {
                cfg.params.epochs = e;
            }
            let [.., manifest] = pipeline::layout(&common.out);
            let (model, report) = pipeline::stage_train(&or_default(&dataset, manifest), &cfg, &common.out)?;
            print_seeds("train", common.seed, [cfg.params.seed]);
            println!("k = {}, {} training graphs, final loss {:.4}", model.k, report.n_train, report.loss_curve.last().copied().unwrap_or(f64::NAN));
        }
        Command::Eval { common, model, dataset } => {
            let [.., manifest] = pipeline::layout(&common.out);
            let model_path = or_default(&model, common.out.join("model.json"));
            let r = pipeline::stage_eval(&model_path, &or_default(&dataset, manifest), &common.out)?;
            print_seeds("eval", common.seed, []);
            let m = r.metrics;
            println!("n = {}  ACC {:.3}  TPR {:.3}  TNR {:.3}  balanced {:.3}", r.n_test, m.accuracy, m.tpr, m.tnr, m.balanced_accuracy);
        }
        Command::PolicySim { common, budget, instances, model } => {
            let mut cfg = load_or(&common.config, || PolicySimConfig { ls: LsParams::desk(1500, 0), policy: PolicyConfig::default() })?;
            apply_budget(&mut cfg.ls, &budget);
            let [inst_index, ..] = pipeline::layout(&common.out);
            let model_path = or_default(&model, common.out.join("model.json"));
            let r = pipeline::stage_policy_sim(&or_default(&instances, inst_index), &model_path, &cfg.ls, &cfg.policy, common.seed, budget.jobs, &common.out)?;
            print_seeds("policy-sim", common.seed, r.entries.iter().map(|e| e.seed));
            let s = &r.summary;
            println!(
                "verdict agreement {:.3}; measured reduction {:.1}%; estimated {}",
                s.verdict_agreement,
                100.0 * s.measured_reduction,
                s.estimate.map_or("n/a".into(), |e| format!("{:.1}%", 100.0 * e.reduction_fraction))
            );
        }
        Command::Estimate { common } => {
            let cfg = load_or(&common.config, EstimateConfig::reference)?;
            let r = pipeline::stage_estimate(&cfg, &common.out)?;
            print_seeds("estimate", common.seed, []);
            let (m, e) = (r.runtime_model, r.estimate);
            println!("TPR {:.4}  TNR {:.4}  FPR {:.4}  FNR {:.4}", m.tpr, m.tnr, m.fpr, m.fnr);
            println!("t_without {:.2}  t_with {:.2}  reduction {:.2}%", e.t_without, e.t_with, 100.0 * e.reduction_fraction);
        }
        Command::Experiment { common, jobs, instances } => {
            let mut cfg = load_or(&common.config, ExperimentConfig::desk)?;
            cfg.seed = common.seed;
            if let Some(j) = jobs {
                cfg.jobs = j;
            }
            if let Some(n) = instances {
                cfg.n_instances = n;
            }
            let started = std::time::Instant::now();
            let report = pipeline::run_experiment(&cfg)?;
            write_json(common.out.join("experiment.json"), &report)?;
            pipeline::log_timing(&common.out, "experiment", "all", started.elapsed().as_secs_f64())?;
            print_seeds("experiment", common.seed, cfg.repetition_seeds.iter().copied());
            for r in &report.repetitions {
                println!("seed {}: with time {:.3}, labels only {:.3}", r.seed, r.with_time.balanced_accuracy, r.labels_only.balanced_accuracy);
            }
            println!(
                "mean balanced accuracy: with time {:.3}, labels only {:.3}",
                report.mean_balanced_accuracy_with_time, report.mean_balanced_accuracy_labels_only
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
