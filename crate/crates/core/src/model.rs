//! Yard, train units, instances and plans.
//!
//! Times are integer minutes from the start of the planning day. Lengths are
//! measured in carriages, so a unit's length equals its sub-type.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Minutes = i64;
pub type UnitId = u32;
pub type TrackId = u32;

/// Travel time for one hop between adjacent tracks.
pub const MINUTES_PER_HOP: Minutes = 2;
/// Duration of split, combine and turn activities.
pub const BOOKKEEPING_MINUTES: Minutes = 3;
pub const DEFAULT_HORIZON: Minutes = 1440;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnitType(pub String);

impl UnitType {
    pub fn new(name: impl Into<String>) -> Self {
        UnitType(name.into())
    }
}

impl std::fmt::Display for UnitType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainUnit {
    pub id: UnitId,
    pub unit_type: UnitType,
    pub subtype_carriages: u32,
    pub length: u32,
}

impl TrainUnit {
    pub fn new(id: UnitId, unit_type: UnitType, subtype_carriages: u32) -> Self {
        TrainUnit {
            id,
            unit_type,
            subtype_carriages,
            length: subtype_carriages,
        }
    }

    pub fn kind(&self) -> (UnitType, u32) {
        (self.unit_type.clone(), self.subtype_carriages)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    BothEnds,
    SingleEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackFunction {
    Parking,
    Cleaning,
    InspectionA,
    InspectionB,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Cleaning,
    InspectionA,
    InspectionB,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::Cleaning, TaskKind::InspectionA, TaskKind::InspectionB];

    pub fn function(self) -> TrackFunction {
        match self {
            TaskKind::Cleaning => TrackFunction::Cleaning,
            TaskKind::InspectionA => TrackFunction::InspectionA,
            TaskKind::InspectionB => TrackFunction::InspectionB,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            TaskKind::Cleaning => "cleaning",
            TaskKind::InspectionA => "inspection_a",
            TaskKind::InspectionB => "inspection_b",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Track {
    pub id: TrackId,
    pub capacity: u32,
    pub approach: Approach,
    pub functions: BTreeSet<TrackFunction>,
    pub is_gateway: bool,
}

impl Track {
    pub fn has(&self, function: TrackFunction) -> bool {
        self.functions.contains(&function)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Yard {
    pub tracks: Vec<Track>,
    /// Unordered pairs, stored with the lower id first.
    pub adjacency: BTreeSet<(TrackId, TrackId)>,
}

impl Yard {
    pub fn new(tracks: Vec<Track>, pairs: impl IntoIterator<Item = (TrackId, TrackId)>) -> Self {
        let adjacency = pairs.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        Yard { tracks, adjacency }
    }

    pub fn track(&self, id: TrackId) -> Option<&Track> {
        self.tracks.iter().find(|t| t.id == id)
    }

    pub fn gateway(&self) -> Option<TrackId> {
        self.tracks.iter().find(|t| t.is_gateway).map(|t| t.id)
    }

    pub fn are_adjacent(&self, a: TrackId, b: TrackId) -> bool {
        self.adjacency.contains(&(a.min(b), a.max(b)))
    }

    /// Neighbours in ascending id order.
    pub fn neighbors(&self, id: TrackId) -> Vec<TrackId> {
        let mut out: Vec<TrackId> = self
            .adjacency
            .iter()
            .filter_map(|&(a, b)| {
                if a == id {
                    Some(b)
                } else if b == id {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn tracks_with(&self, function: TrackFunction) -> Vec<TrackId> {
        let mut ids: Vec<TrackId> = self
            .tracks
            .iter()
            .filter(|t| t.has(function))
            .map(|t| t.id)
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Breadth-first shortest path, preferring lower track ids on ties.
    pub fn shortest_path(&self, from: TrackId, to: TrackId) -> Option<Vec<TrackId>> {
        if from == to {
            return Some(vec![from]);
        }
        let mut prev: HashMap<TrackId, TrackId> = HashMap::new();
        let mut queue = VecDeque::from([from]);
        prev.insert(from, from);
        while let Some(cur) = queue.pop_front() {
            for next in self.neighbors(cur) {
                if prev.contains_key(&next) {
                    continue;
                }
                prev.insert(next, cur);
                if next == to {
                    let mut path = vec![to];
                    let mut at = to;
                    while at != from {
                        at = prev[&at];
                        path.push(at);
                    }
                    path.reverse();
                    return Some(path);
                }
                queue.push_back(next);
            }
        }
        None
    }

    pub fn routes(&self) -> RouteTable {
        RouteTable::new(self)
    }

    fn check(&self) -> Result<()> {
        let gateways = self.tracks.iter().filter(|t| t.is_gateway).count();
        if gateways != 1 {
            return Err(Error::Instance(format!("yard has {gateways} gateway tracks, expected 1")));
        }
        let ids: BTreeSet<TrackId> = self.tracks.iter().map(|t| t.id).collect();
        if ids.len() != self.tracks.len() {
            return Err(Error::Instance("duplicate track id".into()));
        }
        for &(a, b) in &self.adjacency {
            if !ids.contains(&a) || !ids.contains(&b) || a == b {
                return Err(Error::Instance(format!("bad adjacency pair ({a}, {b})")));
            }
        }
        let gw = self.gateway().expect("checked above");
        for t in &self.tracks {
            if self.shortest_path(t.id, gw).is_none() {
                return Err(Error::Instance(format!("track {} cannot reach the gateway", t.id)));
            }
            if t.capacity == 0 {
                return Err(Error::Instance(format!("track {} has zero capacity", t.id)));
            }
        }
        Ok(())
    }
}

/// All-pairs shortest paths of a yard, computed once.
#[derive(Debug, Clone)]
pub struct RouteTable {
    ids: Vec<TrackId>,
    paths: Vec<Vec<Option<Vec<TrackId>>>>,
}

impl RouteTable {
    pub fn new(yard: &Yard) -> Self {
        let mut ids: Vec<TrackId> = yard.tracks.iter().map(|t| t.id).collect();
        ids.sort_unstable();
        let paths = ids
            .iter()
            .map(|&a| ids.iter().map(|&b| yard.shortest_path(a, b)).collect())
            .collect();
        RouteTable { ids, paths }
    }

    fn index(&self, id: TrackId) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    pub fn path(&self, from: TrackId, to: TrackId) -> Option<&[TrackId]> {
        let (i, j) = (self.index(from)?, self.index(to)?);
        self.paths[i][j].as_deref()
    }

    /// Path from `from` to `to` that first visits `via`.
    pub fn path_via(&self, from: TrackId, via: Option<TrackId>, to: TrackId) -> Option<Vec<TrackId>> {
        match via {
            Some(v) if v != from && v != to => {
                let mut p = self.path(from, v)?.to_vec();
                p.extend_from_slice(&self.path(v, to)?[1..]);
                Some(p)
            }
            _ => self.path(from, to).map(<[TrackId]>::to_vec),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceTask {
    pub unit_id: UnitId,
    pub task_kind: TaskKind,
    pub duration: Minutes,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrivingTrain {
    pub composition: Vec<TrainUnit>,
    pub time: Minutes,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepartingTrain {
    pub required_types: Vec<(UnitType, u32)>,
    pub time: Minutes,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub yard: Yard,
    pub arrivals: Vec<ArrivingTrain>,
    pub departures: Vec<DepartingTrain>,
    pub tasks: Vec<ServiceTask>,
    pub horizon: Minutes,
}

impl Instance {
    pub fn empty(yard: Yard) -> Self {
        Instance {
            yard,
            arrivals: Vec::new(),
            departures: Vec::new(),
            tasks: Vec::new(),
            horizon: DEFAULT_HORIZON,
        }
    }

    /// All units in arrival order.
    pub fn units(&self) -> impl Iterator<Item = &TrainUnit> {
        self.arrivals.iter().flat_map(|a| a.composition.iter())
    }

    pub fn n_units(&self) -> usize {
        self.arrivals.iter().map(|a| a.composition.len()).sum()
    }

    pub fn unit(&self, id: UnitId) -> Option<&TrainUnit> {
        self.units().find(|u| u.id == id)
    }

    /// Arriving train index of a unit.
    pub fn arrival_of(&self, id: UnitId) -> Option<usize> {
        self.arrivals
            .iter()
            .position(|a| a.composition.iter().any(|u| u.id == id))
    }

    pub fn tasks_of(&self, id: UnitId) -> impl Iterator<Item = &ServiceTask> {
        self.tasks.iter().filter(move |t| t.unit_id == id)
    }

    /// Departure slots flattened in (departure, position) order.
    pub fn departure_slots(&self) -> Vec<((usize, usize), (UnitType, u32))> {
        self.departures
            .iter()
            .enumerate()
            .flat_map(|(d, dep)| {
                dep.required_types
                    .iter()
                    .enumerate()
                    .map(move |(s, k)| ((d, s), k.clone()))
            })
            .collect()
    }

    /// Checks every instance invariant.
    pub fn check(&self) -> Result<()> {
        self.yard.check()?;
        if self.horizon <= 0 {
            return Err(Error::Instance("horizon must be positive".into()));
        }
        let max_len = self.units().map(|u| u.length).max().unwrap_or(0);
        for t in &self.yard.tracks {
            if !t.functions.is_empty() && t.capacity < max_len {
                return Err(Error::Instance(format!(
                    "track {} capacity {} below largest unit length {max_len}",
                    t.id, t.capacity
                )));
            }
        }
        let mut seen = BTreeSet::new();
        for u in self.units() {
            if !seen.insert(u.id) {
                return Err(Error::Instance(format!("duplicate unit id {}", u.id)));
            }
            if u.length != u.subtype_carriages || u.length == 0 {
                return Err(Error::Instance(format!("unit {} length/subtype mismatch", u.id)));
            }
        }
        let in_horizon = |t: Minutes| (0..=self.horizon).contains(&t);
        if self.arrivals.windows(2).any(|w| w[0].time > w[1].time) {
            return Err(Error::Instance("arrivals not sorted by time".into()));
        }
        if self.arrivals.iter().any(|a| !in_horizon(a.time) || a.composition.is_empty())
            || self.departures.iter().any(|d| !in_horizon(d.time) || d.required_types.is_empty())
        {
            return Err(Error::Instance("train outside horizon or empty composition".into()));
        }
        let mut arriving: BTreeMap<(UnitType, u32), i64> = BTreeMap::new();
        for u in self.units() {
            *arriving.entry(u.kind()).or_default() += 1;
        }
        for d in &self.departures {
            for k in &d.required_types {
                *arriving.entry(k.clone()).or_default() -= 1;
            }
        }
        if arriving.values().any(|&c| c != 0) {
            return Err(Error::Instance("arriving and departing unit kinds differ".into()));
        }
        for t in &self.tasks {
            if t.duration <= 0 {
                return Err(Error::Instance(format!("task of unit {} has non-positive duration", t.unit_id)));
            }
            if !seen.contains(&t.unit_id) {
                return Err(Error::Instance(format!("task refers to unknown unit {}", t.unit_id)));
            }
            if self.yard.tracks_with(t.task_kind.function()).is_empty() {
                return Err(Error::Instance(format!("no track can host {}", t.task_kind.code())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityKind {
    Arrival,
    Movement,
    Parking,
    Service,
    Split,
    Combine,
    Turn,
    Departure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Activity {
    pub kind: ActivityKind,
    pub start: Minutes,
    pub end: Minutes,
    /// Where the activity happens; for movements, the destination.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track_id: Option<TrackId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_kind: Option<TaskKind>,
    /// Tracks traversed by a movement, origin and destination included.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub path: Vec<TrackId>,
}

impl Activity {
    pub fn at(kind: ActivityKind, start: Minutes, end: Minutes, track: TrackId) -> Self {
        Activity {
            kind,
            start,
            end,
            track_id: Some(track),
            task_kind: None,
            path: Vec::new(),
        }
    }

    pub fn service(start: Minutes, end: Minutes, track: TrackId, task: TaskKind) -> Self {
        Activity {
            task_kind: Some(task),
            ..Activity::at(ActivityKind::Service, start, end, track)
        }
    }

    pub fn movement(start: Minutes, path: Vec<TrackId>) -> Self {
        let hops = path.len().saturating_sub(1) as Minutes;
        Activity {
            kind: ActivityKind::Movement,
            start,
            end: start + hops * MINUTES_PER_HOP,
            track_id: path.last().copied(),
            task_kind: None,
            path,
        }
    }

    pub fn duration(&self) -> Minutes {
        self.end - self.start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Slot {
    pub departure_index: usize,
    pub slot: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub matching: BTreeMap<UnitId, Slot>,
    pub activities: BTreeMap<UnitId, Vec<Activity>>,
}

impl Plan {
    pub fn n_activities(&self) -> usize {
        self.activities.values().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    TrackCapacity,
    CrossingOrder,
    FacilityOverlap,
    TaskUnscheduled,
    DepartureLate,
    MatchingTypeMismatch,
    RouteInvalid,
    TimeOrder,
}

impl ViolationKind {
    pub fn default_weight(self) -> f64 {
        match self {
            ViolationKind::DepartureLate => 5.0,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub weight: f64,
    pub detail: String,
}

impl Violation {
    pub fn new(kind: ViolationKind, detail: impl Into<String>) -> Self {
        Violation {
            kind,
            weight: kind.default_weight(),
            detail: detail.into(),
        }
    }
}

/// Tracks used by the examples and the default scenario.
pub fn track(id: TrackId, capacity: u32, approach: Approach, functions: &[TrackFunction]) -> Track {
    Track {
        id,
        capacity,
        approach,
        functions: functions.iter().copied().collect(),
        is_gateway: false,
    }
}

pub fn gateway(id: TrackId, capacity: u32) -> Track {
    Track {
        id,
        capacity,
        approach: Approach::BothEnds,
        functions: BTreeSet::new(),
        is_gateway: true,
    }
}
