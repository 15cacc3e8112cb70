//! Simulated-annealing local search over shunting plans.
//!
//! Neighbourhoods (operator ids):
//!
//! | id | move |
//! |----|------|
//! | 1 | swap the departure slots of two units of equal type and sub-type |
//! | 2 | move one service to another track offering that service |
//! | 3 | shift one service start by ±δ |
//! | 4 | move one unit to another parking track |
//! | 5 | swap the requested entry times of two units parked on one track |
//! | 6 | send one movement through a different neighbouring track |
//! | 7 | shift the start of one movement into parking or out to the gateway by ±δ |
//! | 8 | rebuild one unit's itinerary greedily against all other units |
//!
//! Only accepted states are recorded in the trace.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, Minutes, Plan, TrackFunction, TrackId, UnitId};
use crate::schedule::{greedy_itinerary, Context, Occupancy, Purpose, Schedule};
use crate::validate::{plan_cost, validate_plan};

pub const N_OPERATORS: u8 = 8;
/// Random operator applications used to perturb the best plan on restart.
pub const RESTART_MOVES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsParams {
    /// `null` in files means no limit.
    #[serde(with = "unlimited")]
    pub max_runtime_seconds: f64,
    /// Cap on proposed moves; makes runs independent of machine speed.
    #[serde(default)]
    pub max_iterations: Option<u64>,
    #[serde(with = "unlimited")]
    pub restart_patience_seconds: f64,
    /// Proposals without improvement before a restart.
    #[serde(default)]
    pub restart_patience_iterations: Option<u64>,
    pub initial_temperature: f64,
    pub cooling_rate: f64,
    /// δ for the time-shift operators.
    #[serde(default = "default_shift")]
    pub shift_minutes: Minutes,
    pub seed: u64,
}

/// Infinite limits are written as `null`, which JSON can represent.
mod unlimited {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

fn default_shift() -> Minutes {
    10
}

impl Default for LsParams {
    fn default() -> Self {
        LsParams {
            max_runtime_seconds: 300.0,
            max_iterations: None,
            restart_patience_seconds: 30.0,
            restart_patience_iterations: None,
            initial_temperature: 10.0,
            cooling_rate: 0.999,
            shift_minutes: default_shift(),
            seed: 0,
        }
    }
}

impl LsParams {
    /// Iteration-capped parameters for small instances.
    pub fn desk(max_iterations: u64, seed: u64) -> Self {
        LsParams {
            max_runtime_seconds: f64::INFINITY,
            max_iterations: Some(max_iterations),
            restart_patience_seconds: f64::INFINITY,
            restart_patience_iterations: Some(250),
            initial_temperature: 1.0,
            cooling_rate: 0.995,
            shift_minutes: default_shift(),
            seed,
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.cooling_rate > 0.0 && self.cooling_rate < 1.0) {
            return Err(Error::Config(format!("cooling_rate {} outside (0, 1)", self.cooling_rate)));
        }
        if !(self.initial_temperature > 0.0) || !(self.max_runtime_seconds > 0.0) || !(self.restart_patience_seconds > 0.0) {
            return Err(Error::Config("temperature and time limits must be positive".into()));
        }
        Ok(())
    }
}

/// The states visited by one search run. `plans[0]` is the initial plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub plans: Vec<Plan>,
    pub costs: Vec<f64>,
    pub feasible: bool,
    /// Index of the last recorded state.
    pub n_iterations: usize,
    /// Moves proposed, the machine-independent clock of the run.
    pub proposals: u64,
    /// Proposals spent when each state was reached.
    pub reached_at: Vec<u64>,
    /// Kept out of trace files so they stay reproducible.
    #[serde(skip)]
    pub wall_time_seconds: f64,
    pub seed: u64,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.plans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plans.is_empty()
    }
}

/// Result of asking the search for its next state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Moved,
    BudgetExhausted,
}

/// A neighbour, or `Identity` when the operator does not apply.
#[derive(Debug, Clone, PartialEq)]
pub enum Move {
    Neighbor(Plan),
    Identity(Plan),
}

impl Move {
    pub fn plan(&self) -> &Plan {
        match self {
            Move::Neighbor(p) | Move::Identity(p) => p,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Move::Identity(_))
    }
}

fn where_before(ctx: &Context<'_>, schedule: &Schedule, unit: UnitId, stop: usize) -> TrackId {
    if stop == 0 {
        ctx.gateway
    } else {
        schedule.itineraries[&unit].stops[stop - 1].track
    }
}

fn shift(rng: &mut ChaCha8Rng, delta: Minutes) -> Minutes {
    if rng.gen_bool(0.5) {
        delta
    } else {
        -delta
    }
}

/// Applies operator `op` to `schedule`; `None` when it is inapplicable.
pub(crate) fn apply(
    ctx: &Context<'_>,
    schedule: &Schedule,
    op: u8,
    delta: Minutes,
    rng: &mut ChaCha8Rng,
) -> Option<Schedule> {
    let yard = &ctx.instance.yard;
    let mut s = schedule.clone();
    let stops_where = |pred: &dyn Fn(&Purpose) -> bool| -> Vec<(UnitId, usize)> {
        schedule
            .itineraries
            .iter()
            .flat_map(|(&u, it)| {
                it.stops
                    .iter()
                    .enumerate()
                    .filter(|(_, st)| pred(&st.purpose))
                    .map(move |(i, _)| (u, i))
            })
            .collect()
    };
    let is_service = |p: &Purpose| matches!(p, Purpose::Service { .. });
    let is_parking = |p: &Purpose| matches!(p, Purpose::Parking);
    match op {
        1 => {
            let units: Vec<_> = ctx.instance.units().collect();
            let mut pairs = Vec::new();
            for (i, a) in units.iter().enumerate() {
                for b in &units[i + 1..] {
                    if a.unit_type == b.unit_type
                        && a.subtype_carriages == b.subtype_carriages
                        && schedule.matching[&a.id] != schedule.matching[&b.id]
                    {
                        pairs.push((a.id, b.id));
                    }
                }
            }
            let &(a, b) = pairs.choose(rng)?;
            let sa = s.matching[&a];
            let sb = s.matching[&b];
            s.matching.insert(a, sb);
            s.matching.insert(b, sa);
            for u in [a, b] {
                if let Some(it) = s.itineraries.get_mut(&u) {
                    it.exit_at = None;
                }
            }
        }
        2 => {
            let candidates: Vec<(UnitId, usize, Vec<TrackId>)> = stops_where(&is_service)
                .into_iter()
                .filter_map(|(u, i)| {
                    let st = schedule.itineraries[&u].stops[i];
                    let Purpose::Service { task, .. } = st.purpose else { return None };
                    let others: Vec<TrackId> = yard
                        .tracks_with(task.function())
                        .into_iter()
                        .filter(|&t| t != st.track)
                        .collect();
                    (!others.is_empty()).then_some((u, i, others))
                })
                .collect();
            let (u, i, others) = candidates.choose(rng)?;
            let st = &mut s.itineraries.get_mut(u)?.stops[*i];
            st.track = *others.choose(rng)?;
            st.via = None;
        }
        3 => {
            let &(u, i) = stops_where(&is_service).choose(rng)?;
            let d = shift(rng, delta);
            s.itineraries.get_mut(&u)?.stops[i].at += d;
        }
        4 => {
            let parking = yard.tracks_with(TrackFunction::Parking);
            if parking.len() < 2 {
                return None;
            }
            let &(u, i) = stops_where(&is_parking).choose(rng)?;
            let cur = schedule.itineraries[&u].stops[i].track;
            let others: Vec<TrackId> = parking.into_iter().filter(|&t| t != cur).collect();
            let st = &mut s.itineraries.get_mut(&u)?.stops[i];
            st.track = *others.choose(rng)?;
            st.via = None;
        }
        5 => {
            let parked = stops_where(&is_parking);
            let mut pairs = Vec::new();
            for (k, &(u, i)) in parked.iter().enumerate() {
                for &(v, j) in &parked[k + 1..] {
                    let (a, b) = (&schedule.itineraries[&u].stops[i], &schedule.itineraries[&v].stops[j]);
                    if u != v && a.track == b.track && a.at != b.at {
                        pairs.push(((u, i), (v, j)));
                    }
                }
            }
            let &((u, i), (v, j)) = pairs.choose(rng)?;
            let (au, av) = (s.itineraries[&u].stops[i].at, s.itineraries[&v].stops[j].at);
            s.itineraries.get_mut(&u)?.stops[i].at = av;
            s.itineraries.get_mut(&v)?.stops[j].at = au;
        }
        6 => {
            // (unit, stop index or None for the exit leg, origin, destination)
            let mut legs: Vec<(UnitId, Option<usize>, TrackId, TrackId)> = Vec::new();
            for (&u, it) in &schedule.itineraries {
                for (i, st) in it.stops.iter().enumerate() {
                    legs.push((u, Some(i), where_before(ctx, schedule, u, i), st.track));
                }
                let last = it.stops.last().map_or(ctx.gateway, |st| st.track);
                legs.push((u, None, last, ctx.gateway));
            }
            let options: Vec<_> = legs
                .into_iter()
                .filter(|&(_, _, from, to)| from != to)
                .filter_map(|(u, i, from, to)| {
                    let current = match i {
                        Some(i) => schedule.itineraries[&u].stops[i].via,
                        None => schedule.itineraries[&u].exit_via,
                    };
                    let vias: Vec<Option<TrackId>> = yard
                        .neighbors(from)
                        .into_iter()
                        .filter(|&n| n != to)
                        .map(Some)
                        .chain(current.map(|_| None))
                        .filter(|&v| v != current)
                        .collect();
                    (!vias.is_empty()).then_some((u, i, vias))
                })
                .collect();
            let (u, i, vias) = options.choose(rng)?;
            let via = *vias.choose(rng)?;
            let it = s.itineraries.get_mut(u)?;
            match i {
                Some(i) => it.stops[*i].via = via,
                None => it.exit_via = via,
            }
        }
        7 => {
            let parked = stops_where(&is_parking);
            let n_exits = schedule.itineraries.len();
            if parked.is_empty() && n_exits == 0 {
                return None;
            }
            let pick = rng.gen_range(0..parked.len() + n_exits);
            let d = shift(rng, delta);
            if pick < parked.len() {
                let (u, i) = parked[pick];
                s.itineraries.get_mut(&u)?.stops[i].at += d;
            } else {
                let u = *schedule.itineraries.keys().nth(pick - parked.len())?;
                let current = {
                    let acts = ctx.materialize_unit(u, schedule.matching[&u], &schedule.itineraries[&u]);
                    exit_start(ctx, &acts)?
                };
                s.itineraries.get_mut(&u)?.exit_at = Some(current + d);
            }
        }
        8 => {
            let units: Vec<UnitId> = schedule.itineraries.keys().copied().collect();
            let &u = units.choose(rng)?;
            let plan = ctx.materialize(schedule);
            let occ = Occupancy::from_plan(ctx, &plan, Some(u));
            let fresh = greedy_itinerary(ctx, u, schedule.matching[&u], &occ);
            if fresh == schedule.itineraries[&u] {
                return None;
            }
            s.itineraries.insert(u, fresh);
        }
        _ => return None,
    }
    (s != *schedule).then_some(s)
}

/// Start of the last movement into the gateway, if any.
fn exit_start(ctx: &Context<'_>, acts: &[crate::model::Activity]) -> Option<Minutes> {
    acts.iter()
        .rev()
        .find(|a| a.kind == crate::model::ActivityKind::Movement && a.track_id == Some(ctx.gateway))
        .map(|a| a.start)
        .or_else(|| acts.last().map(|a| a.start))
}

/// Applies operator `op_id` (1 to 8) to `plan` without modifying it.
pub fn apply_operator(instance: &Instance, plan: &Plan, op_id: u8, delta: Minutes, rng: &mut ChaCha8Rng) -> Result<Move> {
    if !(1..=N_OPERATORS).contains(&op_id) {
        return Err(Error::Config(format!("unknown operator {op_id}")));
    }
    crate::validate::check_structure(instance, plan)?;
    let ctx = Context::new(instance)?;
    let schedule = ctx.parse(plan)?;
    Ok(match apply(&ctx, &schedule, op_id, delta, rng) {
        Some(next) => Move::Neighbor(ctx.materialize(&next)),
        None => Move::Identity(plan.clone()),
    })
}

fn evaluate(instance: &Instance, plan: &Plan) -> f64 {
    validate_plan(instance, plan).map_or(f64::INFINITY, |v| plan_cost(&v))
}

/// One search run, advanced state by state.
pub struct Search<'a> {
    ctx: Context<'a>,
    params: LsParams,
    rng: ChaCha8Rng,
    current: Schedule,
    current_cost: f64,
    best: Schedule,
    best_cost: f64,
    temperature: f64,
    last_improvement: u64,
    last_improvement_at: Instant,
    started: Instant,
    trace: RunTrace,
}

impl<'a> Search<'a> {
    pub fn new(instance: &'a Instance, initial: &Plan, params: &LsParams) -> Result<Self> {
        params.check()?;
        crate::validate::check_structure(instance, initial)?;
        let ctx = Context::new(instance)?;
        let current = ctx.parse(initial)?;
        let cost = evaluate(instance, initial);
        let now = Instant::now();
        Ok(Search {
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            best: current.clone(),
            best_cost: cost,
            current,
            current_cost: cost,
            temperature: params.initial_temperature,
            last_improvement: 0,
            last_improvement_at: now,
            started: now,
            trace: RunTrace {
                plans: vec![initial.clone()],
                costs: vec![cost],
                feasible: cost == 0.0,
                n_iterations: 0,
                proposals: 0,
                reached_at: vec![0],
                wall_time_seconds: 0.0,
                seed: params.seed,
            },
            params: params.clone(),
            ctx,
        })
    }

    pub fn current_plan(&self) -> &Plan {
        self.trace.plans.last().expect("trace is never empty")
    }

    pub fn current_cost(&self) -> f64 {
        self.current_cost
    }

    /// Index of the current state in the trace.
    pub fn index(&self) -> usize {
        self.trace.plans.len() - 1
    }

    pub fn proposals(&self) -> u64 {
        self.trace.proposals
    }

    pub fn elapsed_seconds(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    fn exhausted(&self) -> bool {
        self.params.max_iterations.is_some_and(|m| self.trace.proposals >= m)
            || self.elapsed_seconds() >= self.params.max_runtime_seconds
    }

    fn stagnant(&self) -> bool {
        self.params
            .restart_patience_iterations
            .is_some_and(|p| self.trace.proposals - self.last_improvement >= p)
            || self.last_improvement_at.elapsed().as_secs_f64() >= self.params.restart_patience_seconds
    }

    fn record(&mut self, schedule: Schedule, plan: Plan, cost: f64) {
        if cost < self.best_cost {
            self.best_cost = cost;
            self.best = schedule.clone();
            self.last_improvement = self.trace.proposals;
            self.last_improvement_at = Instant::now();
        }
        self.current = schedule;
        self.current_cost = cost;
        self.trace.plans.push(plan);
        self.trace.costs.push(cost);
        self.trace.reached_at.push(self.trace.proposals);
    }

    fn restart(&mut self) {
        let mut s = self.best.clone();
        let mut applied = 0;
        let mut attempts = 0;
        while applied < RESTART_MOVES && attempts < 10 * RESTART_MOVES {
            attempts += 1;
            let op = self.rng.gen_range(1..=N_OPERATORS);
            if let Some(next) = apply(&self.ctx, &s, op, self.params.shift_minutes, &mut self.rng) {
                s = next;
                applied += 1;
            }
        }
        let plan = self.ctx.materialize(&s);
        let cost = evaluate(self.ctx.instance, &plan);
        self.last_improvement = self.trace.proposals;
        self.last_improvement_at = Instant::now();
        self.record(s, plan, cost);
    }

    /// Proposes moves until one is accepted or the budget runs out.
    pub fn advance(&mut self) -> Step {
        loop {
            if self.exhausted() {
                return Step::BudgetExhausted;
            }
            if self.stagnant() {
                self.restart();
                return Step::Moved;
            }
            self.trace.proposals += 1;
            let op = self.rng.gen_range(1..=N_OPERATORS);
            let cand = apply(&self.ctx, &self.current, op, self.params.shift_minutes, &mut self.rng);
            let temperature = self.temperature;
            self.temperature *= self.params.cooling_rate;
            let Some(cand) = cand else { continue };
            let plan = self.ctx.materialize(&cand);
            let cost = evaluate(self.ctx.instance, &plan);
            let delta = cost - self.current_cost;
            let accept = delta <= 0.0 || self.rng.gen::<f64>() < (-delta / temperature).exp();
            if accept {
                self.record(cand, plan, cost);
                return Step::Moved;
            }
        }
    }

    pub fn finish(mut self) -> RunTrace {
        self.trace.feasible = self.current_cost == 0.0;
        self.trace.n_iterations = self.trace.plans.len() - 1;
        self.trace.wall_time_seconds = self.elapsed_seconds();
        self.trace
    }
}

/// Runs the search until a feasible plan is found or the budget is spent.
pub fn ls_run(instance: &Instance, initial: &Plan, params: &LsParams) -> Result<RunTrace> {
    let mut search = Search::new(instance, initial, params)?;
    while search.current_cost() > 0.0 {
        if search.advance() == Step::BudgetExhausted {
            break;
        }
    }
    Ok(search.finish())
}

/// Instance to trace in one call: matching, greedy plan, search.
pub fn solve_instance(instance: &Instance, params: &LsParams) -> Result<RunTrace> {
    let matching = crate::initial::initial_matching(instance);
    let initial = crate::initial::build_initial_plan(instance, &matching)?;
    ls_run(instance, &initial, params)
}
