//! Initial solutions: a maximum matching of arriving units to departure
//! slots followed by a greedy service schedule.

use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};
use crate::model::{Instance, Plan, Slot, TrainUnit, UnitId, UnitType};
use crate::schedule::{greedy_itinerary, Context, Occupancy, Schedule};

const NIL: usize = usize::MAX;

/// Maximum-cardinality matching between units and slots of equal
/// `(unit_type, subtype)`, by Hopcroft-Karp. Returns `unit id -> slot index`.
pub fn hopcroft_karp_match(
    units: &[TrainUnit],
    slots: &[(UnitType, u32)],
) -> BTreeMap<UnitId, usize> {
    let adj: Vec<Vec<usize>> = units
        .iter()
        .map(|u| {
            slots
                .iter()
                .enumerate()
                .filter(|(_, s)| s.0 == u.unit_type && s.1 == u.subtype_carriages)
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    let mut hk = HopcroftKarp::new(adj, slots.len());
    hk.run();
    hk.pair_left
        .iter()
        .enumerate()
        .filter(|(_, &j)| j != NIL)
        .map(|(i, &j)| (units[i].id, j))
        .collect()
}

struct HopcroftKarp {
    adj: Vec<Vec<usize>>,
    pair_left: Vec<usize>,
    pair_right: Vec<usize>,
    dist: Vec<usize>,
}

impl HopcroftKarp {
    fn new(adj: Vec<Vec<usize>>, n_right: usize) -> Self {
        let n_left = adj.len();
        HopcroftKarp {
            adj,
            pair_left: vec![NIL; n_left],
            pair_right: vec![NIL; n_right],
            dist: vec![0; n_left],
        }
    }

    fn run(&mut self) -> usize {
        let mut size = 0;
        while self.bfs() {
            for u in 0..self.adj.len() {
                if self.pair_left[u] == NIL && self.dfs(u) {
                    size += 1;
                }
            }
        }
        size
    }

    /// Layers the free left vertices; true if an augmenting path exists.
    fn bfs(&mut self) -> bool {
        let mut queue = VecDeque::new();
        for u in 0..self.adj.len() {
            if self.pair_left[u] == NIL {
                self.dist[u] = 0;
                queue.push_back(u);
            } else {
                self.dist[u] = NIL;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adj[u] {
                match self.pair_right[v] {
                    NIL => found = true,
                    w if self.dist[w] == NIL => {
                        self.dist[w] = self.dist[u] + 1;
                        queue.push_back(w);
                    }
                    _ => {}
                }
            }
        }
        found
    }

    fn dfs(&mut self, u: usize) -> bool {
        for k in 0..self.adj[u].len() {
            let v = self.adj[u][k];
            let w = self.pair_right[v];
            if w == NIL || (self.dist[w] == self.dist[u] + 1 && self.dfs(w)) {
                self.pair_left[u] = v;
                self.pair_right[v] = u;
                return true;
            }
        }
        self.dist[u] = NIL;
        false
    }
}

/// Matches every unit of the instance to a departure slot.
pub fn initial_matching(instance: &Instance) -> BTreeMap<UnitId, Slot> {
    let units: Vec<TrainUnit> = instance.units().cloned().collect();
    let slots = instance.departure_slots();
    let kinds: Vec<(UnitType, u32)> = slots.iter().map(|(_, k)| k.clone()).collect();
    hopcroft_karp_match(&units, &kinds)
        .into_iter()
        .map(|(u, j)| {
            let (d, s) = slots[j].0;
            (u, Slot { departure_index: d, slot: s })
        })
        .collect()
}

/// Greedy schedule on top of `matching`; units are inserted in arrival order.
pub fn build_initial_schedule(ctx: &Context<'_>, matching: &BTreeMap<UnitId, Slot>) -> Result<Schedule> {
    let mut schedule = Schedule {
        matching: matching.clone(),
        itineraries: BTreeMap::new(),
    };
    let mut occ = Occupancy::default();
    for unit in ctx.instance.units() {
        let slot = *matching
            .get(&unit.id)
            .ok_or_else(|| Error::Structural(format!("unit {} is not matched", unit.id)))?;
        let it = greedy_itinerary(ctx, unit.id, slot, &occ);
        occ.add(ctx, unit.id, &ctx.materialize_unit(unit.id, slot, &it));
        schedule.itineraries.insert(unit.id, it);
    }
    Ok(schedule)
}

pub fn build_initial_plan(instance: &Instance, matching: &BTreeMap<UnitId, Slot>) -> Result<Plan> {
    let ctx = Context::new(instance)?;
    let schedule = build_initial_schedule(&ctx, matching)?;
    Ok(ctx.materialize(&schedule))
}
