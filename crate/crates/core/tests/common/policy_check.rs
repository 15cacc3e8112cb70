//! Policy runs against plain runs on seeded desk instances.

use tusp_core::instance_gen::ScenarioConfig;
use tusp_core::model::Instance;
use tusp_core::pipeline::{generate, simulate_policy, PolicyReport};
use tusp_core::policy::{Aggregator, ConstantScorer, PolicyConfig};
use tusp_core::search::LsParams;

pub struct PolicyCheck {
    pub n: usize,
    pub n_feasible: usize,
    /// Plain and policy verdicts agree when the threshold is never reached.
    pub no_halt_agreement: usize,
    pub no_halt_halts: usize,
    pub perfect: PolicyReport,
}

pub fn instances(n: usize, seed: u64) -> Vec<(String, Instance)> {
    generate(&ScenarioConfig::desk(8, 0), n, seed)
        .unwrap()
        .into_iter()
        .enumerate()
        .map(|(i, (_, inst))| (format!("instance_{i:04}"), inst))
        .collect()
}

pub fn policy(k: usize, alpha_if: f64) -> PolicyConfig {
    PolicyConfig { decision_iteration: k, alpha_if, aggregator: Aggregator::MeanOverZeroToK, look_ahead: 150 }
}

pub fn run(n: usize, seed: u64, iterations: u64, k: usize) -> PolicyCheck {
    let insts = instances(n, seed);
    let ls = LsParams::desk(iterations, 0);
    let open = simulate_policy(&insts, |_| ConstantScorer(0.5), &ls, &policy(k, 1e-9), seed, 1).unwrap();
    let no_halt_agreement = open.entries.iter().filter(|e| e.verdict.is_feasible() == e.ls_feasible).count();
    let no_halt_halts = open.entries.iter().filter(|e| e.verdict == tusp_core::policy::Verdict::InfeasiblePredicted).count();
    let truth: Vec<bool> = open.entries.iter().map(|e| e.ls_feasible).collect();
    let perfect = simulate_policy(
        &insts,
        |i| ConstantScorer(if truth[i] { 1.0 } else { 0.0 }),
        &ls,
        &policy(k, 0.5),
        seed,
        1,
    )
    .unwrap();
    PolicyCheck { n, n_feasible: truth.iter().filter(|&&f| f).count(), no_halt_agreement, no_halt_halts, perfect }
}

impl PolicyCheck {
    /// Relative gap between the measured and the estimated time saving.
    pub fn saving_gap(&self) -> f64 {
        let s = &self.perfect.summary;
        let est = s.estimate.expect("estimate defined").reduction_fraction;
        (s.measured_reduction - est).abs() / est.abs()
    }
}
