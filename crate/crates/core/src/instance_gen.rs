//! Random instance generation from a scenario description.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    gateway, track, Approach, ArrivingTrain, DepartingTrain, Instance, Minutes, ServiceTask,
    TaskKind, TrackFunction, TrainUnit, UnitType, Yard, DEFAULT_HORIZON,
};

const PROBABILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitMix {
    pub unit_type: UnitType,
    pub subtype: u32,
    pub probability: f64,
}

/// One piece of a piecewise-uniform time distribution; both ends inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub window_start: Minutes,
    pub window_end: Minutes,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOption {
    pub task_kind: TaskKind,
    pub duration: Minutes,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n_units: usize,
    pub unit_type_mix: Vec<UnitMix>,
    pub arrival_time_distribution: Vec<TimeWindow>,
    pub departure_time_distribution: Vec<TimeWindow>,
    /// Distribution of the kind of each task a unit receives.
    pub tasks_per_unit: Vec<TaskOption>,
    /// `task_count_distribution[k]` is the probability that a unit gets `k`
    /// distinct tasks.
    #[serde(default = "one_task_each")]
    pub task_count_distribution: Vec<f64>,
    pub max_composition_length: usize,
    pub seed: u64,
    #[serde(default = "default_horizon")]
    pub horizon: Minutes,
    #[serde(default = "desk_yard")]
    pub yard: Yard,
}

fn one_task_each() -> Vec<f64> {
    vec![0.0, 1.0]
}

fn default_horizon() -> Minutes {
    DEFAULT_HORIZON
}

/// Six-track yard: gateway, cleaning track, inspection track, two dead-end
/// parking tracks and one through parking track.
pub fn desk_yard() -> Yard {
    use TrackFunction::*;
    Yard::new(
        vec![
            gateway(0, 200),
            track(1, 12, Approach::BothEnds, &[Cleaning]),
            track(2, 12, Approach::BothEnds, &[InspectionA, InspectionB]),
            track(3, 12, Approach::SingleEnd, &[Parking]),
            track(4, 12, Approach::SingleEnd, &[Parking]),
            track(5, 10, Approach::BothEnds, &[Parking]),
        ],
        [(0, 1), (0, 2), (1, 3), (2, 4), (1, 5), (2, 5)],
    )
}

impl ScenarioConfig {
    /// Two unit types with sub-types 4 and 6, three service tasks, a morning
    /// arrival peak and an evening departure peak.
    pub fn desk(n_units: usize, seed: u64) -> Self {
        let mix = |t: &str, s, p| UnitMix { unit_type: UnitType::new(t), subtype: s, probability: p };
        let win = |a, b, m| TimeWindow { window_start: a, window_end: b, mass: m };
        ScenarioConfig {
            n_units,
            unit_type_mix: vec![mix("SLT", 4, 0.3), mix("SLT", 6, 0.2), mix("VIRM", 4, 0.3), mix("VIRM", 6, 0.2)],
            arrival_time_distribution: vec![win(420, 600, 0.6), win(600, 840, 0.4)],
            departure_time_distribution: vec![win(840, 1080, 0.4), win(1080, 1380, 0.6)],
            tasks_per_unit: vec![
                TaskOption { task_kind: TaskKind::Cleaning, duration: 60, probability: 0.5 },
                TaskOption { task_kind: TaskKind::InspectionA, duration: 90, probability: 0.25 },
                TaskOption { task_kind: TaskKind::InspectionB, duration: 45, probability: 0.25 },
            ],
            task_count_distribution: vec![0.2, 0.5, 0.3],
            max_composition_length: 3,
            seed,
            horizon: DEFAULT_HORIZON,
            yard: desk_yard(),
        }
    }

    pub fn check(&self) -> Result<()> {
        let sums_to_one = |name: &str, ps: &mut dyn Iterator<Item = f64>| -> Result<()> {
            let mut total = 0.0;
            for p in ps {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Config(format!("{name}: probability {p} outside [0, 1]")));
                }
                total += p;
            }
            if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
                return Err(Error::Config(format!("{name}: probabilities sum to {total}")));
            }
            Ok(())
        };
        if self.n_units == 0 {
            return Err(Error::Config("n_units must be at least 1".into()));
        }
        if self.max_composition_length == 0 {
            return Err(Error::Config("max_composition_length must be at least 1".into()));
        }
        sums_to_one("unit_type_mix", &mut self.unit_type_mix.iter().map(|m| m.probability))?;
        sums_to_one("arrival_time_distribution", &mut self.arrival_time_distribution.iter().map(|w| w.mass))?;
        sums_to_one("departure_time_distribution", &mut self.departure_time_distribution.iter().map(|w| w.mass))?;
        sums_to_one("tasks_per_unit", &mut self.tasks_per_unit.iter().map(|t| t.probability))?;
        sums_to_one("task_count_distribution", &mut self.task_count_distribution.iter().copied())?;
        if self.task_count_distribution.len() > self.tasks_per_unit.len() + 1 {
            return Err(Error::Config("more tasks per unit than task kinds".into()));
        }
        for w in self.arrival_time_distribution.iter().chain(&self.departure_time_distribution) {
            if w.window_start > w.window_end || w.window_start < 0 || w.window_end > self.horizon {
                return Err(Error::Config(format!(
                    "time window [{}, {}] outside [0, {}]",
                    w.window_start, w.window_end, self.horizon
                )));
            }
        }
        let earliest_arrival = self
            .arrival_time_distribution
            .iter()
            .filter(|w| w.mass > 0.0)
            .map(|w| w.window_start)
            .min()
            .unwrap_or(0);
        if let Some(w) = self
            .departure_time_distribution
            .iter()
            .find(|w| w.mass > 0.0 && w.window_end <= earliest_arrival)
        {
            return Err(Error::Config(format!(
                "departure window [{}, {}] lies entirely before the first arrivals",
                w.window_start, w.window_end
            )));
        }
        for m in &self.unit_type_mix {
            if m.subtype == 0 {
                return Err(Error::Config("subtype must be positive".into()));
            }
        }
        for t in &self.tasks_per_unit {
            if t.duration <= 0 {
                return Err(Error::Config("task durations must be positive".into()));
            }
        }
        let mut kinds: Vec<TaskKind> = self.tasks_per_unit.iter().map(|t| t.task_kind).collect();
        kinds.sort_unstable();
        if kinds.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("task kinds listed twice".into()));
        }
        Ok(())
    }
}

fn draw_time(rng: &mut ChaCha8Rng, windows: &[TimeWindow]) -> Result<Minutes> {
    let pick = WeightedIndex::new(windows.iter().map(|w| w.mass))
        .map_err(|e| Error::Config(format!("time distribution: {e}")))?;
    let w = &windows[pick.sample(rng)];
    Ok(rng.gen_range(w.window_start..=w.window_end))
}

/// Splits `items` into consecutive groups of random size in `1..=max_len`.
fn chop<T: Clone>(rng: &mut ChaCha8Rng, items: &[T], max_len: usize) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    let mut rest = items;
    while !rest.is_empty() {
        let n = rng.gen_range(1..=max_len.min(rest.len()));
        out.push(rest[..n].to_vec());
        rest = &rest[n..];
    }
    out
}

pub fn generate_instance(config: &ScenarioConfig) -> Result<Instance> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mix = WeightedIndex::new(config.unit_type_mix.iter().map(|m| m.probability))
        .map_err(|e| Error::Config(format!("unit_type_mix: {e}")))?;
    let kinds: Vec<usize> = (0..config.n_units).map(|_| mix.sample(&mut rng)).collect();

    // Units of one type may share a composition, whatever their sub-type.
    let mut by_type: BTreeMap<&UnitType, Vec<usize>> = BTreeMap::new();
    for (i, &k) in kinds.iter().enumerate() {
        by_type.entry(&config.unit_type_mix[k].unit_type).or_default().push(i);
    }

    let mut arrivals: Vec<(Minutes, Vec<usize>)> = Vec::new();
    for members in by_type.values() {
        let mut members = members.clone();
        members.shuffle(&mut rng);
        for group in chop(&mut rng, &members, config.max_composition_length) {
            arrivals.push((draw_time(&mut rng, &config.arrival_time_distribution)?, group));
        }
    }
    arrivals.sort_by_key(|(t, _)| *t);

    // Ids follow arrival order.
    let mut unit_id = vec![0u32; config.n_units];
    let mut next = 1;
    for (_, group) in &arrivals {
        for &i in group {
            unit_id[i] = next;
            next += 1;
        }
    }
    let make_unit = |i: usize| {
        let m = &config.unit_type_mix[kinds[i]];
        TrainUnit::new(unit_id[i], m.unit_type.clone(), m.subtype)
    };

    let mut departures: Vec<DepartingTrain> = Vec::new();
    for members in by_type.values() {
        let mut members = members.clone();
        members.shuffle(&mut rng);
        for group in chop(&mut rng, &members, config.max_composition_length) {
            departures.push(DepartingTrain {
                required_types: group.iter().map(|&i| make_unit(i).kind()).collect(),
                time: draw_time(&mut rng, &config.departure_time_distribution)?,
            });
        }
    }
    departures.sort_by_key(|d| d.time);

    let arrivals: Vec<ArrivingTrain> = arrivals
        .into_iter()
        .map(|(time, group)| ArrivingTrain {
            composition: group.into_iter().map(make_unit).collect(),
            time,
        })
        .collect();

    let counts = WeightedIndex::new(&config.task_count_distribution)
        .map_err(|e| Error::Config(format!("task_count_distribution: {e}")))?;
    let mut tasks = Vec::new();
    for unit in arrivals.iter().flat_map(|a| &a.composition) {
        let n = counts.sample(&mut rng);
        let mut weights: Vec<f64> = config.tasks_per_unit.iter().map(|t| t.probability).collect();
        for _ in 0..n {
            if weights.iter().all(|&w| w <= 0.0) {
                break;
            }
            let pick = WeightedIndex::new(&weights)
                .map_err(|e| Error::Config(format!("tasks_per_unit: {e}")))?
                .sample(&mut rng);
            weights[pick] = 0.0;
            let opt = &config.tasks_per_unit[pick];
            tasks.push(ServiceTask { unit_id: unit.id, task_kind: opt.task_kind, duration: opt.duration });
        }
    }

    let instance = Instance {
        yard: config.yard.clone(),
        arrivals,
        departures,
        tasks,
        horizon: config.horizon,
    };
    instance.check()?;
    Ok(instance)
}
