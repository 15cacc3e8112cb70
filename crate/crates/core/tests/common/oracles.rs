//! Independent reimplementations for matching, labelling, balancing and the
//! runtime chain.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tusp_core::dataset::{balance_and_split, label_costs, LabeledExample, Sampling, SplitConfig};
use tusp_core::initial::hopcroft_karp_match;
use tusp_core::model::{TrainUnit, UnitType};
use tusp_core::policy::RuntimeModel;

// ---------------------------------------------------------------- matching

/// Largest matching by trying every assignment, memoised on the set of used slots.
pub fn exhaustive_max_matching(units: &[TrainUnit], slots: &[(UnitType, u32)]) -> usize {
    fn go(i: usize, used: u32, units: &[TrainUnit], slots: &[(UnitType, u32)], memo: &mut HashMap<(usize, u32), usize>) -> usize {
        if i == units.len() {
            return 0;
        }
        if let Some(&v) = memo.get(&(i, used)) {
            return v;
        }
        let mut best = go(i + 1, used, units, slots, memo);
        for (j, s) in slots.iter().enumerate() {
            if used & (1 << j) == 0 && s.0 == units[i].unit_type && s.1 == units[i].subtype_carriages {
                best = best.max(1 + go(i + 1, used | (1 << j), units, slots, memo));
            }
        }
        memo.insert((i, used), best);
        best
    }
    go(0, 0, units, slots, &mut HashMap::new())
}

pub struct MatchingComparison {
    pub cases: usize,
    pub disagreements: usize,
    pub invalid: usize,
}

pub fn compare_matchings(cases: usize, seed: u64) -> MatchingComparison {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = MatchingComparison { cases, disagreements: 0, invalid: 0 };
    for _ in 0..cases {
        let n_types = rng.gen_range(1..=3);
        let kind = |rng: &mut ChaCha8Rng| (UnitType::new(["A", "B", "C"][rng.gen_range(0..n_types)]), rng.gen_range(3..=4));
        let units: Vec<TrainUnit> = (0..rng.gen_range(0..=7))
            .map(|i| {
                let (t, s) = kind(&mut rng);
                TrainUnit::new(i + 10, t, s)
            })
            .collect();
        let slots: Vec<(UnitType, u32)> = (0..rng.gen_range(0..=7)).map(|_| kind(&mut rng)).collect();
        let m = hopcroft_karp_match(&units, &slots);
        let distinct: BTreeSet<usize> = m.values().copied().collect();
        let valid = distinct.len() == m.len()
            && m.iter().all(|(id, &j)| {
                let u = units.iter().find(|u| u.id == *id).unwrap();
                j < slots.len() && slots[j] == u.kind()
            });
        out.invalid += usize::from(!valid);
        out.disagreements += usize::from(m.len() != exhaustive_max_matching(&units, &slots));
    }
    out
}

// ---------------------------------------------------------------- labels

/// The label of graph `i`: feasibility of the graph `W` steps later, or of
/// the last graph if the run ends first.
pub fn reference_labels(costs: &[f64], w: usize) -> Vec<u8> {
    let n_l = costs.len() - 1;
    let mut out = Vec::new();
    for i in 0..=n_l {
        let j = if w + i < n_l { w + i } else { n_l };
        out.push(if costs[j] == 0.0 { 1 } else { 0 });
    }
    out
}

/// Search-like costs: positive throughout, zero at the end of a feasible run.
pub fn synthetic_costs(rng: &mut ChaCha8Rng, n_l: usize, feasible: bool) -> Vec<f64> {
    let mut c: Vec<f64> = (0..=n_l).map(|_| rng.gen_range(1..=9) as f64).collect();
    if feasible {
        c[n_l] = 0.0;
    }
    c
}

pub struct LabelComparison {
    pub traces: usize,
    pub disagreements: usize,
    pub uniform_violations: usize,
}

pub fn compare_labels(traces: usize, seed: u64) -> LabelComparison {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = LabelComparison { traces, disagreements: 0, uniform_violations: 0 };
    for _ in 0..traces {
        let n_l = rng.gen_range(0..=50);
        let feasible = rng.gen_bool(0.4);
        let mut costs = synthetic_costs(&mut rng, n_l, feasible);
        // Occasional interior zeros exercise the rule beyond search-shaped runs.
        if rng.gen_bool(0.2) {
            let k = rng.gen_range(0..=n_l);
            costs[k] = 0.0;
        }
        let w = rng.gen_range(0..=60);
        let got = label_costs(&costs, w);
        if got != reference_labels(&costs, w) {
            out.disagreements += 1;
        }
        if w >= n_l {
            let last = u8::from(costs[n_l] == 0.0);
            if got.iter().any(|&y| y != last) {
                out.uniform_violations += 1;
            }
        }
    }
    out
}

// ---------------------------------------------------------------- balance

pub struct BalanceCheck {
    pub corpora: usize,
    pub failures: Vec<String>,
}

pub fn check_balance(corpora: usize, seed: u64) -> BalanceCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = BalanceCheck { corpora, failures: Vec::new() };
    let mut done = 0;
    while done < corpora {
        let n_runs = rng.gen_range(6..=40);
        let p = rng.gen_range(0.2..0.8);
        let w = rng.gen_range(0..=30);
        let runs: Vec<Vec<LabeledExample>> = (0..n_runs)
            .map(|run| {
                let n_l = rng.gen_range(0..=80);
                let feasible = rng.gen_bool(p);
                let costs = synthetic_costs(&mut rng, n_l, feasible);
                label_costs(&costs, w)
                    .into_iter()
                    .enumerate()
                    .map(|(iteration, label)| LabeledExample { run, iteration, label })
                    .collect()
            })
            .collect();
        let sampling = *[Sampling::All, Sampling::FirstFraction { fraction: 0.5 }, Sampling::InitialOnly]
            .choose(&mut rng)
            .unwrap();
        let cap = rng.gen_range(1..=20);
        let config = SplitConfig {
            sampling,
            per_run_cap: cap,
            test_fraction: rng.gen_range(0.0..0.5),
            balance_test: rng.gen_bool(0.5),
            seed: rng.gen(),
        };
        // Single-class corpora are rejected by design; draw another.
        let Ok(split) = balance_and_split(&runs, &config) else { continue };
        done += 1;

        let mut fail = |why: String| out.failures.push(format!("corpus {done}: {why}"));
        let pos = split.train.iter().filter(|e| e.label == 1).count();
        if split.train.is_empty() || 2 * pos != split.train.len() {
            fail(format!("train has {pos} positives of {}", split.train.len()));
        }
        let train_runs: BTreeSet<usize> = split.train.iter().map(|e| e.run).collect();
        let test_runs: BTreeSet<usize> = split.test.iter().map(|e| e.run).collect();
        if train_runs.intersection(&test_runs).next().is_some() {
            fail("a run feeds both splits".into());
        }
        let declared: BTreeSet<usize> = split.train_runs.iter().copied().collect();
        if !train_runs.is_subset(&declared) || split.test_runs.iter().any(|r| declared.contains(r)) {
            fail("run lists disagree with examples".into());
        }
        let mut per_run: BTreeMap<usize, usize> = BTreeMap::new();
        for e in split.train.iter().chain(&split.test) {
            *per_run.entry(e.run).or_default() += 1;
        }
        if per_run.values().any(|&c| c > cap) {
            fail(format!("a run exceeds the cap of {cap}"));
        }
        for e in split.train.iter().chain(&split.test) {
            if runs[e.run][e.iteration] != *e {
                fail("example not taken from its run".into());
            }
        }
        if config.balance_test {
            let tp = split.test.iter().filter(|e| e.label == 1).count();
            if 2 * tp != split.test.len() {
                fail("balanced test split is not 50/50".into());
            }
        }
    }
    out
}

// ---------------------------------------------------------------- runtime chain

/// Mean total time over `samples` instances, each retried after a halted
/// feasible attempt.
pub fn monte_carlo_runtime(rm: &RuntimeModel, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..samples {
        let mut t = 0.0;
        loop {
            if rng.gen::<f64>() < rm.prior_feasible {
                if rng.gen::<f64>() < rm.tpr {
                    t += rm.t_feasible;
                    break;
                }
                t += rm.t_decision;
            } else {
                t += if rng.gen::<f64>() < rm.tnr { rm.t_decision } else { rm.t_infeasible };
                break;
            }
        }
        total += t;
    }
    total / samples as f64
}

pub fn random_runtime_model(rng: &mut ChaCha8Rng) -> RuntimeModel {
    let tpr = rng.gen_range(0.3..1.0);
    let tnr = rng.gen_range(0.0..1.0);
    RuntimeModel {
        prior_feasible: rng.gen_range(0.05..0.95),
        t_feasible: rng.gen_range(10.0..300.0),
        t_infeasible: rng.gen_range(100.0..400.0),
        t_decision: rng.gen_range(5.0..100.0),
        tpr,
        tnr,
        fpr: 1.0 - tnr,
        fnr: 1.0 - tpr,
    }
}
