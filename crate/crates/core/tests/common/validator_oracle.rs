//! Minute-by-minute feasibility oracle and a generator of small, nearly
//! feasible plans for it.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tusp_core::model::*;
use tusp_core::validate::validate_plan;

/// Where each unit is at each minute, simulated from its activity chain.
/// `None` means in transit or outside the yard.
fn positions(plan: &Plan, gateway: TrackId, t0: Minutes, t1: Minutes) -> BTreeMap<UnitId, Vec<Option<TrackId>>> {
    let mut out = BTreeMap::new();
    for (&id, acts) in &plan.activities {
        let mut row = vec![None; (t1 - t0) as usize];
        let mut set = |from: Minutes, to: Minutes, v: Option<TrackId>| {
            for m in from.max(t0)..to.min(t1) {
                row[(m - t0) as usize] = v;
            }
        };
        for a in acts {
            match a.kind {
                ActivityKind::Arrival => set(a.start, t1, Some(gateway)),
                ActivityKind::Movement => {
                    set(a.start, t1, None);
                    set(a.end, t1, a.path.last().copied());
                }
                ActivityKind::Departure => set(a.start, t1, None),
                _ => {}
            }
        }
        out.insert(id, row);
    }
    out
}

pub fn oracle_feasible(inst: &Instance, plan: &Plan) -> bool {
    let yard = &inst.yard;
    let gateway = yard.gateway().unwrap();
    let unit = |id: UnitId| inst.units().find(|u| u.id == id).unwrap();

    // Matching: right kinds, no slot used twice.
    let mut used = Vec::new();
    for (&id, s) in &plan.matching {
        let want = &inst.departures[s.departure_index].required_types[s.slot];
        if unit(id).kind() != *want || used.contains(s) {
            return false;
        }
        used.push(*s);
    }

    // Each chain on its own: times, route, services.
    let mut done: Vec<(UnitId, TaskKind, Minutes)> = Vec::new();
    for (&id, acts) in &plan.activities {
        let arrival = inst.arrivals.iter().find(|a| a.composition.iter().any(|u| u.id == id)).unwrap();
        if acts[0].start != arrival.time || acts[0].end != arrival.time {
            return false;
        }
        let due = inst.departures[plan.matching[&id].departure_index].time;
        if acts.last().unwrap().end != due {
            return false;
        }
        let mut loc = gateway;
        let mut clock = Minutes::MIN;
        for a in acts {
            if a.start < clock || a.end < a.start || a.start < 0 || a.end > inst.horizon {
                return false;
            }
            if matches!(a.kind, ActivityKind::Split | ActivityKind::Combine | ActivityKind::Turn) && a.end == a.start {
                return false;
            }
            clock = a.end;
            if a.kind == ActivityKind::Movement {
                let p = &a.path;
                if p.len() < 2 || p[0] != loc || a.track_id != Some(p[p.len() - 1]) {
                    return false;
                }
                for w in p.windows(2) {
                    let (x, y) = (w[0].min(w[1]), w[0].max(w[1]));
                    if !yard.adjacency.iter().any(|&(a, b)| a == x && b == y) {
                        return false;
                    }
                }
                if a.end - a.start != 2 * (p.len() as Minutes - 1) {
                    return false;
                }
                loc = p[p.len() - 1];
                continue;
            }
            let t = a.track_id.unwrap();
            if t != loc || (matches!(a.kind, ActivityKind::Arrival | ActivityKind::Departure) && t != gateway) {
                return false;
            }
            if a.kind == ActivityKind::Service {
                let k = a.task_kind.unwrap();
                if !yard.tracks.iter().any(|tr| tr.id == t && tr.functions.contains(&k.function())) {
                    return false;
                }
                done.push((id, k, a.end - a.start));
            }
        }
    }
    let mut want: Vec<(UnitId, TaskKind, Minutes)> = inst.tasks.iter().map(|t| (t.unit_id, t.task_kind, t.duration)).collect();
    want.sort();
    done.sort();
    if want != done {
        return false;
    }

    // The yard, one minute at a time.
    let t0 = -2;
    let t1 = inst.horizon + 2;
    let pos = positions(plan, gateway, t0, t1);
    let mut entered: BTreeMap<UnitId, Minutes> = BTreeMap::new();
    for m in t0..t1 {
        let i = (m - t0) as usize;
        for track in &yard.tracks {
            let here: Vec<UnitId> = pos.iter().filter(|(_, r)| r[i] == Some(track.id)).map(|(&u, _)| u).collect();
            if here.iter().map(|&u| unit(u).length).sum::<u32>() > track.capacity {
                return false;
            }
            let servicing = plan
                .activities
                .values()
                .flatten()
                .filter(|a| a.kind == ActivityKind::Service && a.track_id == Some(track.id) && a.start <= m && m < a.end)
                .count();
            if servicing > 1 {
                return false;
            }
            if track.approach == Approach::SingleEnd && i > 0 {
                // A unit leaving must not have anyone behind it who stays.
                let was: Vec<UnitId> = pos.iter().filter(|(_, r)| r[i - 1] == Some(track.id)).map(|(&u, _)| u).collect();
                for &u in was.iter().filter(|u| !here.contains(u)) {
                    if here.iter().any(|v| was.contains(v) && entered[v] > entered[&u]) {
                        return false;
                    }
                }
            }
        }
        for (&u, r) in &pos {
            if r[i].is_some() && (i == 0 || r[i - 1] != r[i]) {
                entered.insert(u, m);
            }
        }
    }
    true
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let all = [TrackFunction::Parking, TrackFunction::Cleaning, TrackFunction::InspectionA];
    let mut tracks = vec![gateway(0, rng.gen_range(4..=12))];
    for id in 1..=2 {
        let funcs: Vec<TrackFunction> = all.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
        let approach = if rng.gen_bool(0.5) { Approach::SingleEnd } else { Approach::BothEnds };
        tracks.push(track(id, rng.gen_range(4..=8), approach, &funcs));
    }
    let pairs = if rng.gen_bool(0.5) { vec![(0, 1), (0, 2)] } else { vec![(0, 1), (1, 2)] };
    let yard = Yard::new(tracks, pairs);

    let kinds = [(UnitType::new("A"), 3), (UnitType::new("A"), 4), (UnitType::new("B"), 3)];
    let n = rng.gen_range(1..=3);
    let units: Vec<TrainUnit> = (0..n)
        .map(|i| {
            let (t, s) = kinds.choose(rng).unwrap().clone();
            TrainUnit::new(i as UnitId + 1, t, s)
        })
        .collect();
    let mut inst = Instance::empty(yard);
    inst.horizon = 240;
    let mut times: Vec<Minutes> = (0..n).map(|_| rng.gen_range(0..=40)).collect();
    times.sort_unstable();
    inst.arrivals = units.iter().zip(times).map(|(u, t)| ArrivingTrain { composition: vec![u.clone()], time: t }).collect();
    let mut order: Vec<&TrainUnit> = units.iter().collect();
    order.shuffle(rng);
    if n >= 2 && rng.gen_bool(0.3) {
        let (a, b) = (order[0].kind(), order[1].kind());
        inst.departures.push(DepartingTrain { required_types: vec![a, b], time: rng.gen_range(100..=200) });
        order.drain(..2);
    }
    for u in order {
        inst.departures.push(DepartingTrain { required_types: vec![u.kind()], time: rng.gen_range(100..=200) });
    }
    let available: Vec<TaskKind> = [TaskKind::Cleaning, TaskKind::InspectionA]
        .into_iter()
        .filter(|k| !inst.yard.tracks_with(k.function()).is_empty())
        .collect();
    for _ in 0..rng.gen_range(0..=2) {
        if let Some(&k) = available.choose(rng) {
            let u = units.choose(rng).unwrap().id;
            inst.tasks.push(ServiceTask { unit_id: u, task_kind: k, duration: rng.gen_range(10..=40) });
        }
    }
    inst.check().expect("generated instance is valid");
    inst
}

/// A plan built from reasonable choices, with occasional deliberate slips.
fn random_plan(inst: &Instance, rng: &mut ChaCha8Rng) -> Plan {
    let slip = |rng: &mut ChaCha8Rng| rng.gen_bool(0.04);
    let yard = &inst.yard;
    let mut plan = Plan::default();

    let slots = inst.departure_slots();
    let mut free: Vec<usize> = (0..slots.len()).collect();
    free.shuffle(rng);
    for u in inst.units() {
        let pick = free.iter().position(|&j| slots[j].1 == u.kind()).filter(|_| !slip(rng));
        let j = match pick {
            Some(p) => free.remove(p),
            None => rng.gen_range(0..slots.len()),
        };
        let ((d, s), _) = slots[j];
        plan.matching.insert(u.id, Slot { departure_index: d, slot: s });
    }

    let route = |rng: &mut ChaCha8Rng, from: TrackId, to: TrackId| {
        if rng.gen_bool(0.03) {
            vec![from, to]
        } else {
            yard.shortest_path(from, to).unwrap()
        }
    };
    for a in &inst.arrivals {
        for u in &a.composition {
            let due = inst.departures[plan.matching[&u.id].departure_index].time;
            let mut acts = vec![Activity::at(ActivityKind::Arrival, a.time, a.time, 0)];
            if slip(rng) {
                acts[0].start += 1;
                acts[0].end += 1;
            }
            let (mut loc, mut now) = (0, a.time);
            let mut stops: Vec<Option<&ServiceTask>> = inst.tasks_of(u.id).map(Some).collect();
            if stops.is_empty() || rng.gen_bool(0.3) {
                stops.push(None);
            }
            stops.shuffle(rng);
            for stop in stops {
                let (track, act_len) = match stop {
                    Some(task) if !slip(rng) => {
                        let t = *yard.tracks_with(task.task_kind.function()).choose(rng).unwrap();
                        (t, task.duration)
                    }
                    Some(task) => (rng.gen_range(1..=2), task.duration),
                    None => (rng.gen_range(1..=2), rng.gen_range(5..=60)),
                };
                if track != loc {
                    let m = Activity::movement(now + rng.gen_range(0..=15), route(rng, loc, track));
                    now = m.end;
                    acts.push(m);
                    loc = track;
                }
                if rng.gen_bool(0.1) {
                    let len = if slip(rng) { 0 } else { 3 };
                    acts.push(Activity::at(ActivityKind::Turn, now, now + len, loc));
                    now += len;
                }
                let act = match stop {
                    Some(task) => Activity::service(now, now + act_len, loc, task.task_kind),
                    None => Activity::at(ActivityKind::Parking, now, now + act_len, loc),
                };
                now = act.end;
                acts.push(act);
            }
            let back = route(rng, loc, 0);
            let travel = 2 * (back.len() as Minutes - 1);
            let leave = (due - travel - rng.gen_range(0..=10)).max(now);
            if leave > now {
                acts.push(Activity::at(ActivityKind::Parking, now, leave, loc));
            }
            acts.push(Activity::movement(leave, back));
            let depart = if slip(rng) { due + 1 } else { due };
            acts.push(Activity::at(ActivityKind::Departure, depart, depart, 0));
            plan.activities.insert(u.id, acts);
        }
    }
    plan
}

pub struct Comparison {
    pub cases: usize,
    pub feasible: usize,
    pub disagreements: usize,
    /// How often each violation kind was reported, as a coverage check.
    pub kinds: BTreeMap<ViolationKind, usize>,
}

pub fn compare(cases: usize, seed: u64) -> Comparison {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Comparison { cases, feasible: 0, disagreements: 0, kinds: BTreeMap::new() };
    for _ in 0..cases {
        let inst = random_instance(&mut rng);
        let plan = random_plan(&inst, &mut rng);
        let violations = validate_plan(&inst, &plan).expect("plan is structurally valid");
        for v in &violations {
            *out.kinds.entry(v.kind).or_default() += 1;
        }
        let fast = violations.is_empty();
        let slow = oracle_feasible(&inst, &plan);
        out.feasible += slow as usize;
        if fast != slow {
            out.disagreements += 1;
            if out.disagreements == 1 {
                eprintln!("disagreement: validator {fast}, oracle {slow}\n{inst:?}\n{plan:?}");
            }
        }
    }
    out
}
