//! Compact per-unit itineraries and their expansion into activity chains.
//!
//! The local search edits itineraries (which tracks a unit visits and when it
//! wants to be there) and re-derives the activities, so every neighbour is a
//! well-formed chain even when it is infeasible.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{
    Activity, ActivityKind, Instance, Minutes, Plan, RouteTable, Slot, TaskKind, TrackFunction,
    TrackId, UnitId, BOOKKEEPING_MINUTES, MINUTES_PER_HOP,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Service { task: TaskKind, duration: Minutes },
    Parking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stop {
    pub purpose: Purpose,
    pub track: TrackId,
    /// Requested start of the stop; the unit may arrive later.
    pub at: Minutes,
    /// Detour through this neighbour-of-origin on the way in.
    pub via: Option<TrackId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Itinerary {
    pub stops: Vec<Stop>,
    /// Requested start of the final movement to the gateway; `None` leaves just in time.
    pub exit_at: Option<Minutes>,
    pub exit_via: Option<TrackId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Schedule {
    pub matching: BTreeMap<UnitId, Slot>,
    pub itineraries: BTreeMap<UnitId, Itinerary>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct UnitInfo {
    pub arrival: Minutes,
    pub split: bool,
    pub length: u32,
}

/// Instance data the schedule code looks up repeatedly.
#[derive(Debug, Clone)]
pub struct Context<'a> {
    pub instance: &'a Instance,
    pub routes: RouteTable,
    pub gateway: TrackId,
    pub(crate) units: BTreeMap<UnitId, UnitInfo>,
}

impl<'a> Context<'a> {
    pub fn new(instance: &'a Instance) -> Result<Self> {
        let gateway = instance
            .yard
            .gateway()
            .ok_or_else(|| Error::Instance("yard has no gateway".into()))?;
        let units = instance
            .arrivals
            .iter()
            .flat_map(|a| {
                a.composition.iter().map(move |u| {
                    (
                        u.id,
                        UnitInfo {
                            arrival: a.time,
                            split: a.composition.len() > 1,
                            length: u.length,
                        },
                    )
                })
            })
            .collect();
        Ok(Context {
            instance,
            routes: instance.yard.routes(),
            gateway,
            units,
        })
    }

    pub fn unit_length(&self, id: UnitId) -> u32 {
        self.units.get(&id).map_or(0, |u| u.length)
    }

    pub fn hops(&self, from: TrackId, to: TrackId) -> Minutes {
        self.routes.path(from, to).map_or(0, |p| p.len() as Minutes - 1)
    }

    fn departure(&self, slot: Slot) -> (Minutes, bool) {
        let d = &self.instance.departures[slot.departure_index];
        (d.time, d.required_types.len() > 1)
    }

    fn route(&self, from: TrackId, via: Option<TrackId>, to: TrackId) -> Vec<TrackId> {
        self.routes
            .path_via(from, via, to)
            .unwrap_or_else(|| vec![from, to])
    }

    /// Time the unit is ready to leave the gateway after arriving.
    pub fn ready_time(&self, id: UnitId) -> Minutes {
        let u = self.units[&id];
        u.arrival + if u.split { BOOKKEEPING_MINUTES } else { 0 }
    }

    /// Latest start of the exit movement from `from` that still departs on time.
    pub fn exit_deadline(&self, slot: Slot, from: TrackId) -> Minutes {
        let (due, combine) = self.departure(slot);
        due - if combine { BOOKKEEPING_MINUTES } else { 0 } - self.hops(from, self.gateway) * MINUTES_PER_HOP
    }

    /// Expands one unit's itinerary into its activity chain.
    pub fn materialize_unit(&self, id: UnitId, slot: Slot, it: &Itinerary) -> Vec<Activity> {
        let info = self.units[&id];
        let gw = self.gateway;
        let mut acts = vec![Activity::at(ActivityKind::Arrival, info.arrival, info.arrival, gw)];
        let mut t = info.arrival;
        if info.split {
            acts.push(Activity::at(ActivityKind::Split, t, t + BOOKKEEPING_MINUTES, gw));
            t += BOOKKEEPING_MINUTES;
        }
        let mut loc = gw;
        let mut open_parking: Option<usize> = None;
        let close = |acts: &mut Vec<Activity>, open: &mut Option<usize>, at: Minutes| {
            if let Some(i) = open.take() {
                acts[i].end = at.max(acts[i].start);
            }
        };

        for stop in &it.stops {
            let path = self.route(loc, stop.via, stop.track);
            let begin = if path.len() > 1 {
                let travel = (path.len() as Minutes - 1) * MINUTES_PER_HOP;
                let start = t.max(stop.at - travel);
                close(&mut acts, &mut open_parking, start);
                let mv = Activity::movement(start, path);
                t = mv.end;
                acts.push(mv);
                t
            } else {
                let begin = t.max(stop.at);
                close(&mut acts, &mut open_parking, begin);
                begin
            };
            loc = stop.track;
            match stop.purpose {
                Purpose::Service { task, duration } => {
                    acts.push(Activity::service(begin, begin + duration, stop.track, task));
                    t = begin + duration;
                }
                Purpose::Parking => {
                    open_parking = Some(acts.len());
                    acts.push(Activity::at(ActivityKind::Parking, begin, begin, stop.track));
                    t = begin;
                }
            }
        }

        let (due, combine) = self.departure(slot);
        let path = self.route(loc, it.exit_via, gw);
        let hops = path.len() as Minutes - 1;
        let default_exit = due - if combine { BOOKKEEPING_MINUTES } else { 0 } - hops * MINUTES_PER_HOP;
        let leave = t.max(it.exit_at.unwrap_or(default_exit));
        close(&mut acts, &mut open_parking, leave);
        if hops > 0 {
            let mv = Activity::movement(leave, path);
            t = mv.end;
            acts.push(mv);
        }
        if combine {
            let start = t.max(due - BOOKKEEPING_MINUTES);
            acts.push(Activity::at(ActivityKind::Combine, start, start + BOOKKEEPING_MINUTES, gw));
            t = start + BOOKKEEPING_MINUTES;
        }
        let dep = t.max(due);
        acts.push(Activity::at(ActivityKind::Departure, dep, dep, gw));
        acts
    }

    pub fn materialize(&self, schedule: &Schedule) -> Plan {
        let activities = schedule
            .itineraries
            .iter()
            .map(|(&id, it)| (id, self.materialize_unit(id, schedule.matching[&id], it)))
            .collect();
        Plan {
            matching: schedule.matching.clone(),
            activities,
        }
    }

    /// Recovers itineraries from an activity chain.
    pub fn parse(&self, plan: &Plan) -> Result<Schedule> {
        let mut itineraries = BTreeMap::new();
        for (&id, acts) in &plan.activities {
            let slot = *plan
                .matching
                .get(&id)
                .ok_or_else(|| Error::Structural(format!("unit {id} unmatched")))?;
            if !self.units.contains_key(&id) {
                return Err(Error::Structural(format!("unknown unit {id}")));
            }
            let mut it = Itinerary::default();
            let mut loc = self.gateway;
            let mut via = None;
            let mut exit = None;
            for a in acts {
                match a.kind {
                    ActivityKind::Movement => {
                        let dest = a.track_id.or_else(|| a.path.last().copied()).unwrap_or(loc);
                        via = match self.routes.path(loc, dest) {
                            Some(p) if p == a.path.as_slice() => None,
                            _ => a.path.get(1).copied().filter(|&v| v != dest),
                        };
                        if dest == self.gateway {
                            exit = Some((a.start, via));
                        }
                        loc = dest;
                    }
                    ActivityKind::Service | ActivityKind::Parking => {
                        let track = a.track_id.unwrap_or(loc);
                        let purpose = match (a.kind, a.task_kind) {
                            (ActivityKind::Service, Some(task)) => Purpose::Service {
                                task,
                                duration: a.duration().max(1),
                            },
                            _ => Purpose::Parking,
                        };
                        it.stops.push(Stop { purpose, track, at: a.start, via: via.take() });
                        exit = None;
                        loc = track;
                    }
                    _ => {}
                }
            }
            if let Some((start, exit_via)) = exit {
                it.exit_via = exit_via;
                let hops = self.route(loc, exit_via, self.gateway).len() as Minutes - 1;
                let (due, combine) = self.departure(slot);
                let default_exit = due - if combine { BOOKKEEPING_MINUTES } else { 0 } - hops * MINUTES_PER_HOP;
                if start != default_exit {
                    it.exit_at = Some(start);
                }
            }
            itineraries.insert(id, it);
        }
        Ok(Schedule {
            matching: plan.matching.clone(),
            itineraries,
        })
    }
}

/// Resource usage of already scheduled units, used by greedy insertion.
#[derive(Debug, Clone, Default)]
pub struct Occupancy {
    services: BTreeMap<TrackId, Vec<(Minutes, Minutes)>>,
    stays: BTreeMap<TrackId, Vec<(Minutes, Minutes, u32)>>,
}

impl Occupancy {
    pub fn from_plan(ctx: &Context<'_>, plan: &Plan, skip: Option<UnitId>) -> Self {
        let mut occ = Occupancy::default();
        for (&id, acts) in &plan.activities {
            if Some(id) != skip {
                occ.add(ctx, id, acts);
            }
        }
        occ
    }

    pub fn add(&mut self, ctx: &Context<'_>, id: UnitId, acts: &[Activity]) {
        for a in acts.iter().filter(|a| a.kind == ActivityKind::Service) {
            if let Some(t) = a.track_id {
                self.services.entry(t).or_default().push((a.start, a.end));
            }
        }
        let len = ctx.unit_length(id);
        let mut plan = Plan::default();
        plan.activities.insert(id, acts.to_vec());
        for s in crate::validate::stays(ctx.instance, &plan) {
            self.stays.entry(s.track).or_default().push((s.enter, s.leave, len));
        }
    }

    /// Earliest start at or after `ready` with `track` free of services for `duration`.
    pub fn earliest_service_slot(&self, track: TrackId, ready: Minutes, duration: Minutes) -> Minutes {
        let mut busy: Vec<(Minutes, Minutes)> = self.services.get(&track).cloned().unwrap_or_default();
        busy.sort_unstable();
        let mut s = ready;
        for (b0, b1) in busy {
            if s + duration <= b0 {
                break;
            }
            if b1 > s {
                s = b1;
            }
        }
        s
    }

    /// Highest total length parked on `track` at any point of `[from, to)`.
    pub fn peak_load(&self, track: TrackId, from: Minutes, to: Minutes) -> u32 {
        let Some(stays) = self.stays.get(&track) else { return 0 };
        let mut points: Vec<Minutes> = vec![from];
        points.extend(stays.iter().map(|s| s.0).filter(|&t| t > from && t < to));
        points
            .into_iter()
            .map(|t| stays.iter().filter(|s| s.0 <= t && t < s.1).map(|s| s.2).sum())
            .max()
            .unwrap_or(0)
    }
}

/// Greedy itinerary for one unit against the units already in `occ`:
/// each task on the compatible track finishing earliest, then the first
/// parking track with room until departure.
pub fn greedy_itinerary(ctx: &Context<'_>, id: UnitId, slot: Slot, occ: &Occupancy) -> Itinerary {
    let yard = &ctx.instance.yard;
    let mut t = ctx.ready_time(id);
    let mut loc = ctx.gateway;
    let mut stops = Vec::new();
    for task in ctx.instance.tasks_of(id) {
        let mut best: Option<(Minutes, TrackId, Minutes)> = None;
        for track in yard.tracks_with(task.task_kind.function()) {
            let ready = t + ctx.hops(loc, track) * MINUTES_PER_HOP;
            let start = occ.earliest_service_slot(track, ready, task.duration);
            let finish = start + task.duration;
            if best.map_or(true, |(f, _, _)| finish < f) {
                best = Some((finish, track, start));
            }
        }
        let Some((finish, track, start)) = best else { continue };
        stops.push(Stop {
            purpose: Purpose::Service { task: task.task_kind, duration: task.duration },
            track,
            at: start,
            via: None,
        });
        t = finish;
        loc = track;
    }

    let length = ctx.unit_length(id);
    let mut fallback: Option<(i64, TrackId, Minutes)> = None;
    let mut chosen = None;
    for track in yard.tracks_with(TrackFunction::Parking) {
        let begin = t + ctx.hops(loc, track) * MINUTES_PER_HOP;
        let end = ctx.exit_deadline(slot, track).max(begin);
        let cap = yard.track(track).map_or(0, |tr| tr.capacity);
        let room = cap as i64 - occ.peak_load(track, begin, end.max(begin + 1)) as i64;
        if room >= length as i64 {
            chosen = Some((track, begin));
            break;
        }
        if fallback.map_or(true, |(r, _, _)| room > r) {
            fallback = Some((room, track, begin));
        }
    }
    if let Some((track, begin)) = chosen.or(fallback.map(|(_, tr, b)| (tr, b))) {
        stops.push(Stop { purpose: Purpose::Parking, track, at: begin, via: None });
    }
    Itinerary { stops, exit_at: None, exit_via: None }
}
