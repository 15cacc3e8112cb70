//! Trains temporal-feature and label-only classifiers on initial solutions
//! of generated desk-scale instances and prints their test metrics.
//!
//! Usage: desk_experiment [n_instances] [epochs]

use std::time::Instant;

use tusp_core::pipeline::{run_experiment, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let mut config = ExperimentConfig::desk();
    if let Some(n) = args.next() {
        config.n_instances = n.parse()?;
    }
    if let Some(e) = args.next() {
        config.train.params.epochs = e.parse()?;
    }
    let started = Instant::now();
    let report = run_experiment(&config)?;
    println!("instances {} feasible runs {}", report.n_instances, report.n_feasible_runs);
    for r in &report.repetitions {
        println!(
            "seed {}: train {} test {}  with time {:.3}  labels only {:.3}",
            r.seed, r.n_train, r.n_test, r.with_time.balanced_accuracy, r.labels_only.balanced_accuracy
        );
    }
    println!(
        "mean balanced accuracy: with time {:.3}, labels only {:.3} ({:.1} s)",
        report.mean_balanced_accuracy_with_time,
        report.mean_balanced_accuracy_labels_only,
        started.elapsed().as_secs_f64()
    );
    Ok(())
}
