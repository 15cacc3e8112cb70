//! Early termination of a search run from feasibility scores, and the
//! expected-runtime estimate of such a policy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{Confusion, Model};
use crate::graph::plan_to_graph;
use crate::model::{Instance, Plan};
use crate::search::{LsParams, Search, Step};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Aggregator {
    /// Mean of the scores of states `0..=K`, checked once at `K`.
    MeanOverZeroToK,
    /// Mean of the scores so far, checked at every state up to `K`.
    PerIteration,
    /// Mean of the last `window` scores, checked once at `K`.
    MovingAverage { window: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// Decision point `K`, counted in accepted states.
    pub decision_iteration: usize,
    pub alpha_if: f64,
    pub aggregator: Aggregator,
    /// Look-ahead the scoring model was trained with; informational.
    pub look_ahead: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            decision_iteration: 200,
            alpha_if: 0.5,
            aggregator: Aggregator::MeanOverZeroToK,
            look_ahead: 150,
        }
    }
}

impl PolicyConfig {
    pub fn check(&self) -> Result<()> {
        if self.decision_iteration == 0 {
            return Err(Error::Config("decision iteration must be at least 1".into()));
        }
        if !(self.alpha_if > 0.0 && self.alpha_if < 1.0) {
            return Err(Error::Config(format!("alpha_if {} outside (0, 1)", self.alpha_if)));
        }
        if let Aggregator::MovingAverage { window: 0 } = self.aggregator {
            return Err(Error::Config("moving-average window must be positive".into()));
        }
        Ok(())
    }
}

/// Scores a plan with the probability that its run ends feasible.
pub trait FeasibilityScorer {
    fn score(&self, instance: &Instance, plan: &Plan) -> Result<f64>;
}

impl FeasibilityScorer for Model {
    fn score(&self, instance: &Instance, plan: &Plan) -> Result<f64> {
        let input = self.graph_input(&plan_to_graph(plan), instance.horizon);
        Model::score(self, &input)
    }
}

/// Returns the same score for every plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantScorer(pub f64);

impl FeasibilityScorer for ConstantScorer {
    fn score(&self, _: &Instance, _: &Plan) -> Result<f64> {
        Ok(self.0)
    }
}

impl<S: FeasibilityScorer + ?Sized> FeasibilityScorer for &S {
    fn score(&self, instance: &Instance, plan: &Plan) -> Result<f64> {
        (**self).score(instance, plan)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Feasible,
    InfeasiblePredicted,
    InfeasibleBudget,
}

impl Verdict {
    pub fn is_feasible(self) -> bool {
        self == Verdict::Feasible
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyOutcome {
    pub verdict: Verdict,
    /// Index of the last state reached.
    pub iterations: usize,
    pub proposals: u64,
    #[serde(skip)]
    pub wall_time_seconds: f64,
    pub scores: Vec<f64>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Runs the search from `initial`, scoring each state up to the decision
/// point and halting when the aggregated score is at most `alpha_if`.
pub fn policy_run(
    instance: &Instance,
    initial: &Plan,
    scorer: &dyn FeasibilityScorer,
    ls_params: &LsParams,
    policy: &PolicyConfig,
) -> Result<PolicyOutcome> {
    policy.check()?;
    let mut search = Search::new(instance, initial, ls_params)?;
    let k = policy.decision_iteration;
    let mut scores = Vec::new();
    let verdict = loop {
        if search.current_cost() == 0.0 {
            break Verdict::Feasible;
        }
        let i = search.index();
        if i <= k {
            scores.push(scorer.score(instance, search.current_plan())?);
            let aggregate = match policy.aggregator {
                Aggregator::PerIteration => Some(mean(&scores)),
                Aggregator::MeanOverZeroToK if i == k => Some(mean(&scores)),
                Aggregator::MovingAverage { window } if i == k => Some(mean(&scores[scores.len().saturating_sub(window)..])),
                _ => None,
            };
            if aggregate.is_some_and(|g| g <= policy.alpha_if) {
                break Verdict::InfeasiblePredicted;
            }
        }
        if search.advance() == Step::BudgetExhausted {
            break Verdict::InfeasibleBudget;
        }
    };
    Ok(PolicyOutcome {
        verdict,
        iterations: search.index(),
        proposals: search.proposals(),
        wall_time_seconds: search.elapsed_seconds(),
        scores,
    })
}

/// Trailing moving average; the first `window - 1` entries average what is
/// available.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    (0..xs.len())
        .map(|i| mean(&xs[(i + 1).saturating_sub(window)..=i]))
        .collect()
}

/// Smoothed scores of every state of a trace.
pub fn score_curve(scorer: &dyn FeasibilityScorer, instance: &Instance, plans: &[Plan], window: usize) -> Result<Vec<f64>> {
    let raw = plans.iter().map(|p| scorer.score(instance, p)).collect::<Result<Vec<_>>>()?;
    Ok(moving_average(&raw, window))
}

/// Inputs of the expected-runtime estimate. Times share one unit (seconds,
/// or proposals for machine-independent runs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuntimeModel {
    pub prior_feasible: f64,
    pub t_feasible: f64,
    pub t_infeasible: f64,
    pub t_decision: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub fpr: f64,
    pub fnr: f64,
}

impl RuntimeModel {
    /// Rates normalised by the true class of each row of `confusion`.
    pub fn from_confusion(c: &Confusion, prior_feasible: f64, t_feasible: f64, t_infeasible: f64, t_decision: f64) -> Self {
        RuntimeModel {
            prior_feasible,
            t_feasible,
            t_infeasible,
            t_decision,
            tpr: c.tpr(),
            tnr: c.tnr(),
            fpr: c.fpr(),
            fnr: c.fnr(),
        }
    }

    /// A classifier that never halts a run.
    pub fn never_halting(prior_feasible: f64, t_feasible: f64, t_infeasible: f64, t_decision: f64) -> Self {
        RuntimeModel { prior_feasible, t_feasible, t_infeasible, t_decision, tpr: 1.0, tnr: 0.0, fpr: 1.0, fnr: 0.0 }
    }

    pub fn check(&self) -> Result<()> {
        let probs = [self.prior_feasible, self.tpr, self.tnr, self.fpr, self.fnr];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("probabilities must lie in [0, 1]".into()));
        }
        if (self.tpr + self.fnr - 1.0).abs() > 1e-9 || (self.tnr + self.fpr - 1.0).abs() > 1e-9 {
            return Err(Error::Config("TPR + FNR and TNR + FPR must both equal 1".into()));
        }
        if [self.t_feasible, self.t_infeasible, self.t_decision].iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Config("times must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuntimeEstimate {
    pub t_without: f64,
    pub t_with: f64,
    pub reduction_fraction: f64,
}

/// Expected time per instance with and without the policy.
///
/// Each attempt draws its true class from the prior. A feasible attempt
/// completes with probability TPR and otherwise is halted at the decision
/// point and retried from scratch; an infeasible attempt is halted (TNR) or
/// runs to its full budget (FPR). Solving `E = p(TPR t_f + FNR (t_d + E)) +
/// (1 - p)(TNR t_d + FPR t_inf)` for `E` gives the closed form below.
pub fn estimate_expected_runtime(rm: &RuntimeModel) -> Result<RuntimeEstimate> {
    rm.check()?;
    let p = rm.prior_feasible;
    let t_without = p * rm.t_feasible + (1.0 - p) * rm.t_infeasible;
    let retry = p * rm.fnr;
    if retry >= 1.0 - 1e-15 {
        return Err(Error::Divergent(format!("every attempt is retried (p_f * FNR = {retry})")));
    }
    let first = p * (rm.tpr * rm.t_feasible + rm.fnr * rm.t_decision)
        + (1.0 - p) * (rm.tnr * rm.t_decision + rm.fpr * rm.t_infeasible);
    let t_with = first / (1.0 - retry);
    Ok(RuntimeEstimate {
        t_without,
        t_with,
        reduction_fraction: 1.0 - t_with / t_without,
    })
}
