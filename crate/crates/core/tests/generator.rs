use std::collections::BTreeMap;

use tusp_core::instance_gen::{generate_instance, ScenarioConfig};

/// Pearson statistic of observed counts against expected probabilities.
fn chi_square(observed: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = observed.iter().sum();
    observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = p * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum()
}

// Upper 0.001 quantiles of the chi-square distribution.
const CRITICAL_DF2: f64 = 13.816;
const CRITICAL_DF3: f64 = 16.266;

#[test]
fn unit_mix_and_task_counts_follow_the_scenario() {
    let base = ScenarioConfig::desk(21, 0);
    let mut kinds: BTreeMap<(String, u32), u64> = BTreeMap::new();
    let mut task_counts = vec![0u64; 3];
    for seed in 0..1000 {
        let inst = generate_instance(&ScenarioConfig { seed, ..base.clone() }).unwrap();
        assert_eq!(inst.n_units(), 21);
        for u in inst.units() {
            *kinds.entry((u.unit_type.0.clone(), u.subtype_carriages)).or_default() += 1;
            let n = inst.tasks_of(u.id).count();
            let mut distinct: Vec<_> = inst.tasks_of(u.id).map(|t| t.task_kind).collect();
            distinct.sort();
            distinct.dedup();
            assert_eq!(distinct.len(), n, "unit {} got a task kind twice", u.id);
            task_counts[n] += 1;
        }
    }
    let mut observed = Vec::new();
    let mut probs = Vec::new();
    for m in &base.unit_type_mix {
        observed.push(kinds.get(&(m.unit_type.0.clone(), m.subtype)).copied().unwrap_or(0));
        probs.push(m.probability);
    }
    assert_eq!(observed.iter().sum::<u64>(), 21_000, "unexpected unit kinds: {kinds:?}");
    let x = chi_square(&observed, &probs);
    assert!(x < CRITICAL_DF3, "unit mix chi-square {x}: {observed:?}");

    let x = chi_square(&task_counts, &base.task_count_distribution);
    assert!(x < CRITICAL_DF2, "task count chi-square {x}: {task_counts:?}");
}

#[test]
fn arrival_and_departure_windows_carry_their_mass() {
    let base = ScenarioConfig::desk(8, 0);
    let (mut early_arrivals, mut arrivals, mut late_departures, mut departures) = (0u64, 0u64, 0u64, 0u64);
    for seed in 0..1000 {
        let inst = generate_instance(&ScenarioConfig { seed, ..base.clone() }).unwrap();
        for a in &inst.arrivals {
            assert!((420..=840).contains(&a.time));
            arrivals += 1;
            // The shared endpoint 600 belongs to both windows; count it with neither.
            if a.time < 600 {
                early_arrivals += 1;
            }
        }
        for d in &inst.departures {
            assert!((840..=1380).contains(&d.time));
            departures += 1;
            if d.time > 1080 {
                late_departures += 1;
            }
        }
    }
    // P(t < 600) = 0.6 * 180/181; P(t > 1080) = 0.6 * 300/301.
    let p_early = 0.6 * 180.0 / 181.0;
    let p_late = 0.6 * 300.0 / 301.0;
    let x = chi_square(&[early_arrivals, arrivals - early_arrivals], &[p_early, 1.0 - p_early]);
    assert!(x < 10.828, "arrival windows chi-square {x}");
    let x = chi_square(&[late_departures, departures - late_departures], &[p_late, 1.0 - p_late]);
    assert!(x < 10.828, "departure windows chi-square {x}");
}
