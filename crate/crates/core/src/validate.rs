//! Plan feasibility checks.
//!
//! A unit is located on the gateway from its arrival, in transit during a
//! movement and on the movement's destination afterwards. Parking, service
//! and bookkeeping activities must take place where the unit currently is.
//! Occupancy is counted over half-open presence intervals.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::model::{
    ActivityKind, Approach, Instance, Minutes, Plan, TrackId, UnitId, Violation, ViolationKind,
    MINUTES_PER_HOP,
};

/// A maximal interval during which a unit sits on one track.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stay {
    pub unit: UnitId,
    pub track: TrackId,
    pub enter: Minutes,
    pub leave: Minutes,
}

/// Rejects plans that refer to units, tracks or departures the instance lacks.
pub fn check_structure(instance: &Instance, plan: &Plan) -> Result<()> {
    let units: BTreeSet<UnitId> = instance.units().map(|u| u.id).collect();
    for id in plan.activities.keys().chain(plan.matching.keys()) {
        if !units.contains(id) {
            return Err(Error::Structural(format!("unknown unit {id}")));
        }
    }
    for id in &units {
        if !plan.activities.contains_key(id) || !plan.matching.contains_key(id) {
            return Err(Error::Structural(format!("unit {id} missing from plan")));
        }
    }
    for (id, slot) in &plan.matching {
        let dep = instance
            .departures
            .get(slot.departure_index)
            .ok_or_else(|| Error::Structural(format!("unit {id}: unknown departure {}", slot.departure_index)))?;
        if slot.slot >= dep.required_types.len() {
            return Err(Error::Structural(format!("unit {id}: slot {} out of range", slot.slot)));
        }
    }
    let has_track = |t: TrackId| instance.yard.track(t).is_some();
    for (id, acts) in &plan.activities {
        let (Some(first), Some(last)) = (acts.first(), acts.last()) else {
            return Err(Error::Structural(format!("unit {id} has no activities")));
        };
        if first.kind != ActivityKind::Arrival || last.kind != ActivityKind::Departure || acts.len() < 2 {
            return Err(Error::Structural(format!("unit {id} must start with arrival and end with departure")));
        }
        for (i, a) in acts.iter().enumerate() {
            let interior = i != 0 && i + 1 != acts.len();
            if interior && matches!(a.kind, ActivityKind::Arrival | ActivityKind::Departure) {
                return Err(Error::Structural(format!("unit {id}: {:?} in the middle of the chain", a.kind)));
            }
            match a.track_id {
                Some(t) if !has_track(t) => {
                    return Err(Error::Structural(format!("unit {id}: unknown track {t}")))
                }
                None if a.kind != ActivityKind::Movement => {
                    return Err(Error::Structural(format!("unit {id}: {:?} without track", a.kind)))
                }
                _ => {}
            }
            if let Some(t) = a.path.iter().find(|&&t| !has_track(t)) {
                return Err(Error::Structural(format!("unit {id}: unknown track {t} in path")));
            }
            if a.kind == ActivityKind::Service && a.task_kind.is_none() {
                return Err(Error::Structural(format!("unit {id}: service without task kind")));
            }
        }
    }
    Ok(())
}

/// Presence intervals per unit, derived from the activity chain.
pub fn stays(instance: &Instance, plan: &Plan) -> Vec<Stay> {
    let gateway = instance.yard.gateway().unwrap_or_default();
    let mut out = Vec::new();
    for (&unit, acts) in &plan.activities {
        let mut here: Option<(TrackId, Minutes)> = None;
        let close = |here: &mut Option<(TrackId, Minutes)>, at: Minutes, out: &mut Vec<Stay>| {
            if let Some((track, enter)) = here.take() {
                if at > enter {
                    out.push(Stay { unit, track, enter, leave: at });
                }
            }
        };
        for a in acts {
            match a.kind {
                ActivityKind::Arrival => {
                    close(&mut here, a.start, &mut out);
                    here = Some((a.track_id.unwrap_or(gateway), a.start));
                }
                ActivityKind::Movement => {
                    close(&mut here, a.start, &mut out);
                    if let Some(dest) = a.track_id.or_else(|| a.path.last().copied()) {
                        here = Some((dest, a.end));
                    }
                }
                ActivityKind::Departure => {
                    close(&mut here, a.start, &mut out);
                }
                _ => {
                    let t = a.track_id.unwrap_or(gateway);
                    match here {
                        Some((cur, _)) if cur == t => {}
                        _ => {
                            close(&mut here, a.start, &mut out);
                            here = Some((t, a.start));
                        }
                    }
                }
            }
        }
    }
    // Merge back-to-back stays of one unit on one track.
    out.sort_by_key(|s| (s.unit, s.enter, s.track));
    let mut merged: Vec<Stay> = Vec::with_capacity(out.len());
    for s in out {
        match merged.last_mut() {
            Some(m) if m.unit == s.unit && m.track == s.track && m.leave == s.enter => m.leave = s.leave,
            _ => merged.push(s),
        }
    }
    merged
}

/// Every constraint violation of `plan`; an empty list means the plan is feasible.
pub fn validate_plan(instance: &Instance, plan: &Plan) -> Result<Vec<Violation>> {
    check_structure(instance, plan)?;
    let mut out = Vec::new();
    check_matching(instance, plan, &mut out);
    check_timing(instance, plan, &mut out);
    check_routes(instance, plan, &mut out);
    check_tasks(instance, plan, &mut out);
    let stays = stays(instance, plan);
    check_capacity(instance, plan, &stays, &mut out);
    check_crossings(instance, &stays, &mut out);
    check_facilities(plan, &mut out);
    out.sort_by(|a, b| (a.kind, &a.detail).cmp(&(b.kind, &b.detail)));
    Ok(out)
}

/// Sum of violation weights.
pub fn plan_cost(violations: &[Violation]) -> f64 {
    violations.iter().fold(0.0, |acc, v| acc + v.weight)
}

fn check_matching(instance: &Instance, plan: &Plan, out: &mut Vec<Violation>) {
    let mut used: BTreeMap<_, Vec<UnitId>> = BTreeMap::new();
    for (&id, slot) in &plan.matching {
        used.entry(*slot).or_default().push(id);
        let unit = instance.unit(id).expect("structure checked");
        let want = &instance.departures[slot.departure_index].required_types[slot.slot];
        if unit.unit_type != want.0 || unit.subtype_carriages != want.1 {
            out.push(Violation::new(
                ViolationKind::MatchingTypeMismatch,
                format!("unit {id} ({}, {}) in slot requiring ({}, {})", unit.unit_type, unit.subtype_carriages, want.0, want.1),
            ));
        }
    }
    for (slot, ids) in used {
        if ids.len() > 1 {
            out.push(Violation::new(
                ViolationKind::MatchingTypeMismatch,
                format!("departure {} slot {} shared by units {ids:?}", slot.departure_index, slot.slot),
            ));
        }
    }
}

fn check_timing(instance: &Instance, plan: &Plan, out: &mut Vec<Violation>) {
    for (&id, acts) in &plan.activities {
        let arrival_time = instance
            .arrival_of(id)
            .map(|i| instance.arrivals[i].time)
            .expect("structure checked");
        let first = &acts[0];
        if first.start != arrival_time || first.end != arrival_time {
            out.push(Violation::new(
                ViolationKind::TimeOrder,
                format!("unit {id} arrival at {} instead of {arrival_time}", first.start),
            ));
        }
        for (i, a) in acts.iter().enumerate() {
            let bookkeeping = matches!(a.kind, ActivityKind::Split | ActivityKind::Combine | ActivityKind::Turn);
            if a.end < a.start || (bookkeeping && a.end == a.start) {
                out.push(Violation::new(
                    ViolationKind::TimeOrder,
                    format!("unit {id} activity {i} spans [{}, {}]", a.start, a.end),
                ));
            }
            if a.start < 0 || a.end > instance.horizon {
                out.push(Violation::new(
                    ViolationKind::TimeOrder,
                    format!("unit {id} activity {i} outside horizon"),
                ));
            }
            if let Some(next) = acts.get(i + 1) {
                if next.start < a.end {
                    out.push(Violation::new(
                        ViolationKind::TimeOrder,
                        format!("unit {id} activity {} starts before activity {i} ends", i + 1),
                    ));
                }
            }
        }
        let slot = plan.matching[&id];
        let due = instance.departures[slot.departure_index].time;
        let last = acts.last().expect("structure checked");
        if last.end != due {
            out.push(Violation::new(
                ViolationKind::DepartureLate,
                format!("unit {id} departs at {} instead of {due}", last.end),
            ));
        }
    }
}

fn check_routes(instance: &Instance, plan: &Plan, out: &mut Vec<Violation>) {
    let yard = &instance.yard;
    let gateway = yard.gateway().unwrap_or_default();
    for (&id, acts) in &plan.activities {
        let mut loc = gateway;
        for (i, a) in acts.iter().enumerate() {
            let mut bad = |why: &str| {
                out.push(Violation::new(ViolationKind::RouteInvalid, format!("unit {id} activity {i}: {why}")))
            };
            match a.kind {
                ActivityKind::Movement => {
                    let p = &a.path;
                    if p.len() < 2 {
                        bad("movement without a hop");
                    } else {
                        if p[0] != loc {
                            bad("movement does not start where the unit is");
                        }
                        if p.windows(2).any(|w| !yard.are_adjacent(w[0], w[1])) {
                            bad("movement crosses non-adjacent tracks");
                        }
                        if a.track_id.is_some_and(|t| t != p[p.len() - 1]) {
                            bad("movement destination differs from path end");
                        }
                        if a.duration() != (p.len() as Minutes - 1) * MINUTES_PER_HOP {
                            bad("movement duration does not match its hops");
                        }
                    }
                    if let Some(dest) = a.track_id.or_else(|| p.last().copied()) {
                        loc = dest;
                    }
                }
                _ => {
                    let t = a.track_id.expect("structure checked");
                    if matches!(a.kind, ActivityKind::Arrival | ActivityKind::Departure) && t != gateway {
                        bad("arrival and departure happen on the gateway");
                    }
                    if t != loc {
                        bad("activity on a track the unit has not moved to");
                    }
                    loc = t;
                }
            }
        }
    }
}

fn check_tasks(instance: &Instance, plan: &Plan, out: &mut Vec<Violation>) {
    let mut needed: BTreeMap<(UnitId, crate::model::TaskKind), Vec<Minutes>> = BTreeMap::new();
    for t in &instance.tasks {
        needed.entry((t.unit_id, t.task_kind)).or_default().push(t.duration);
    }
    let mut done: BTreeMap<(UnitId, crate::model::TaskKind), Vec<Minutes>> = BTreeMap::new();
    for (&id, acts) in &plan.activities {
        for a in acts.iter().filter(|a| a.kind == ActivityKind::Service) {
            let kind = a.task_kind.expect("structure checked");
            let track = instance.yard.track(a.track_id.expect("structure checked")).expect("structure checked");
            if !track.has(kind.function()) {
                out.push(Violation::new(
                    ViolationKind::TaskUnscheduled,
                    format!("unit {id} {} on track {} without that facility", kind.code(), track.id),
                ));
                continue;
            }
            done.entry((id, kind)).or_default().push(a.duration());
        }
    }
    let keys: BTreeSet<_> = needed.keys().chain(done.keys()).copied().collect();
    for key in keys {
        let mut want = needed.get(&key).cloned().unwrap_or_default();
        let mut have = done.get(&key).cloned().unwrap_or_default();
        want.sort_unstable();
        have.sort_unstable();
        if want != have {
            out.push(Violation::new(
                ViolationKind::TaskUnscheduled,
                format!("unit {} {}: required durations {want:?}, scheduled {have:?}", key.0, key.1.code()),
            ));
        }
    }
}

fn check_capacity(instance: &Instance, plan: &Plan, stays: &[Stay], out: &mut Vec<Violation>) {
    let _ = plan;
    for track in &instance.yard.tracks {
        let here: Vec<&Stay> = stays.iter().filter(|s| s.track == track.id).collect();
        let mut events: Vec<Minutes> = here.iter().flat_map(|s| [s.enter, s.leave]).collect();
        events.sort_unstable();
        events.dedup();
        let mut overloaded_since: Option<(Minutes, u32)> = None;
        for &t in &events {
            let load: u32 = here
                .iter()
                .filter(|s| s.enter <= t && t < s.leave)
                .map(|s| instance.unit(s.unit).map_or(0, |u| u.length))
                .sum();
            match (load > track.capacity, overloaded_since) {
                (true, None) => overloaded_since = Some((t, load)),
                (true, Some((since, peak))) => overloaded_since = Some((since, peak.max(load))),
                (false, Some((since, peak))) => {
                    out.push(Violation::new(
                        ViolationKind::TrackCapacity,
                        format!("track {} holds {peak} > {} from {since} to {t}", track.id, track.capacity),
                    ));
                    overloaded_since = None;
                }
                (false, None) => {}
            }
        }
    }
}

fn check_crossings(instance: &Instance, stays: &[Stay], out: &mut Vec<Violation>) {
    for track in instance.yard.tracks.iter().filter(|t| t.approach == Approach::SingleEnd) {
        let here: Vec<&Stay> = stays.iter().filter(|s| s.track == track.id).collect();
        for u in &here {
            for v in &here {
                if u.unit != v.unit && u.enter < v.enter && v.enter < u.leave && u.leave < v.leave {
                    out.push(Violation::new(
                        ViolationKind::CrossingOrder,
                        format!("unit {} blocked by unit {} on track {} at {}", u.unit, v.unit, track.id, u.leave),
                    ));
                }
            }
        }
    }
}

fn check_facilities(plan: &Plan, out: &mut Vec<Violation>) {
    let mut services: Vec<(TrackId, Minutes, Minutes, UnitId)> = plan
        .activities
        .iter()
        .flat_map(|(&id, acts)| {
            acts.iter()
                .filter(|a| a.kind == ActivityKind::Service)
                .map(move |a| (a.track_id.unwrap_or_default(), a.start, a.end, id))
        })
        .collect();
    services.sort_unstable();
    for (i, a) in services.iter().enumerate() {
        for b in &services[i + 1..] {
            if b.0 != a.0 {
                break;
            }
            if a.1 < b.2 && b.1 < a.2 {
                out.push(Violation::new(
                    ViolationKind::FacilityOverlap,
                    format!("track {}: unit {} [{}, {}] overlaps unit {} [{}, {}]", a.0, a.3, a.1, a.2, b.3, b.1, b.2),
                ));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;

    fn yard() -> Yard {
        Yard::new(
            vec![
                gateway(0, 100),
                track(1, 10, Approach::BothEnds, &[TrackFunction::Parking, TrackFunction::Cleaning]),
                track(2, 20, Approach::SingleEnd, &[TrackFunction::Parking]),
            ],
            [(0, 1), (0, 2)],
        )
    }

    fn two_unit_instance() -> Instance {
        let a = UnitType::new("A");
        let mut inst = Instance::empty(yard());
        inst.arrivals = vec![
            ArrivingTrain { composition: vec![TrainUnit::new(1, a.clone(), 6)], time: 10 },
            ArrivingTrain { composition: vec![TrainUnit::new(2, a.clone(), 6)], time: 20 },
        ];
        inst.departures = vec![
            DepartingTrain { required_types: vec![(a.clone(), 6)], time: 200 },
            DepartingTrain { required_types: vec![(a, 6)], time: 300 },
        ];
        inst
    }

    fn park(arrive: Minutes, track: TrackId, leave: Minutes, depart: Minutes) -> Vec<Activity> {
        vec![
            Activity::at(ActivityKind::Arrival, arrive, arrive, 0),
            Activity::movement(arrive, vec![0, track]),
            Activity::at(ActivityKind::Parking, arrive + 2, leave, track),
            Activity::movement(leave, vec![track, 0]),
            Activity::at(ActivityKind::Departure, depart, depart, 0),
        ]
    }

    fn plan(u1: Vec<Activity>, u2: Vec<Activity>) -> Plan {
        let mut p = Plan::default();
        p.matching.insert(1, Slot { departure_index: 0, slot: 0 });
        p.matching.insert(2, Slot { departure_index: 1, slot: 0 });
        p.activities.insert(1, u1);
        p.activities.insert(2, u2);
        p
    }

    fn kinds(v: &[Violation]) -> Vec<ViolationKind> {
        v.iter().map(|v| v.kind).collect()
    }

    #[test]
    fn empty_instance_is_feasible() {
        let inst = Instance::empty(yard());
        assert!(validate_plan(&inst, &Plan::default()).unwrap().is_empty());
    }

    #[test]
    fn feasible_two_unit_plan() {
        let inst = two_unit_instance();
        let p = plan(park(10, 2, 198, 200), park(20, 1, 298, 300));
        assert_eq!(validate_plan(&inst, &p).unwrap(), vec![]);
    }

    #[test]
    fn overfull_track() {
        let inst = two_unit_instance();
        let p = plan(park(10, 1, 198, 200), park(20, 1, 298, 300));
        assert_eq!(kinds(&validate_plan(&inst, &p).unwrap()), vec![ViolationKind::TrackCapacity]);
    }

    #[test]
    fn lifo_blocking() {
        let inst = two_unit_instance();
        // unit 1 enters first and must leave first, but unit 2 is still behind it.
        let p = plan(park(10, 2, 198, 200), park(20, 2, 298, 300));
        assert_eq!(kinds(&validate_plan(&inst, &p).unwrap()), vec![ViolationKind::CrossingOrder]);
    }

    #[test]
    fn late_departure_and_dangling_ids() {
        let inst = two_unit_instance();
        let mut u1 = park(10, 2, 198, 200);
        u1[4].start = 205;
        u1[4].end = 205;
        let p = plan(u1, park(20, 1, 298, 300));
        let v = validate_plan(&inst, &p).unwrap();
        assert_eq!(kinds(&v), vec![ViolationKind::DepartureLate]);
        assert_eq!(plan_cost(&v), 5.0);

        let mut bad = plan(park(10, 2, 198, 200), park(20, 9, 298, 300));
        assert!(matches!(validate_plan(&inst, &bad), Err(Error::Structural(_))));
        bad.activities.get_mut(&2).unwrap()[2].track_id = Some(1);
        bad.matching.insert(7, Slot { departure_index: 0, slot: 0 });
        assert!(matches!(validate_plan(&inst, &bad), Err(Error::Structural(_))));
    }

    #[test]
    fn teleport_and_bad_hop() {
        let inst = two_unit_instance();
        let mut u2 = park(20, 1, 298, 300);
        u2[1] = Activity::movement(20, vec![0, 2]);
        let p = plan(park(10, 2, 198, 200), u2);
        let v = validate_plan(&inst, &p).unwrap();
        assert!(kinds(&v).contains(&ViolationKind::RouteInvalid));

        let mut u2 = park(20, 2, 298, 300);
        u2[1] = Activity::movement(20, vec![0, 1, 2]);
        let p = plan(park(10, 1, 198, 200), u2);
        let v = validate_plan(&inst, &p).unwrap();
        assert!(kinds(&v).iter().all(|k| *k == ViolationKind::RouteInvalid || *k == ViolationKind::TimeOrder));
        assert!(kinds(&v).contains(&ViolationKind::RouteInvalid));
    }

    #[test]
    fn cost_sums_weights() {
        assert_eq!(plan_cost(&[]), 0.0);
        let one = vec![Violation { kind: ViolationKind::TrackCapacity, weight: 3.0, detail: String::new() }];
        assert_eq!(plan_cost(&one), 3.0);
        let mixed: Vec<Violation> = [1.0, 1.0, 2.0, 5.0]
            .iter()
            .map(|&w| Violation { kind: ViolationKind::TimeOrder, weight: w, detail: String::new() })
            .collect();
        assert_eq!(plan_cost(&mixed), 9.0);
    }
}
