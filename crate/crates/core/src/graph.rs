//! Activity graphs of plans and their node-feature matrices.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::model::{ActivityKind, Minutes, Plan, TrackId, UnitId};

pub const UNKNOWN_LABEL: &str = "UNK";
/// Columns appended after the label block: start, end, duration, neighbour gap.
pub const TEMPORAL_COLUMNS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeClass {
    /// Consecutive activities of one unit.
    UnitOrder,
    /// Consecutive movements in the yard.
    MovementOrder,
    /// Consecutive services on one track.
    FacilityOrder,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub label: String,
    pub start: Minutes,
    pub end: Minutes,
    pub unit_ids: Vec<UnitId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub edge_class: EdgeClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl ActivityGraph {
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    /// Undirected neighbour lists, ignoring edge classes and self-loops.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n()];
        for e in &self.edges {
            if e.from != e.to {
                adj[e.from].push(e.to);
                adj[e.to].push(e.from);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Dense symmetric 0/1 adjacency with a zero diagonal.
    pub fn adjacency_matrix(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n()]; self.n()];
        for (i, list) in self.neighbors().iter().enumerate() {
            for &j in list {
                a[i][j] = 1.0;
            }
        }
        a
    }

    pub fn count(&self, class: EdgeClass) -> usize {
        self.edges.iter().filter(|e| e.edge_class == class).count()
    }
}

pub fn activity_label(kind: ActivityKind, track: Option<TrackId>, task: Option<crate::model::TaskKind>) -> String {
    let t = track.map_or_else(|| "?".to_string(), |t| t.to_string());
    match kind {
        ActivityKind::Arrival => "A".into(),
        ActivityKind::Departure => "D".into(),
        ActivityKind::Movement => "M".into(),
        ActivityKind::Parking => format!("P#{t}"),
        ActivityKind::Service => format!("S#{}#{t}", task.map_or("?", |k| k.code())),
        ActivityKind::Split => "SP".into(),
        ActivityKind::Combine => "C".into(),
        ActivityKind::Turn => "T".into(),
    }
}

/// One node per activity; nodes are listed in topological order, ties broken
/// by (start, label, lowest unit id).
pub fn plan_to_graph(plan: &Plan) -> ActivityGraph {
    struct Raw {
        node: Node,
        kind: ActivityKind,
        track: Option<TrackId>,
        unit: UnitId,
        pos: usize,
    }
    let mut raw: Vec<Raw> = Vec::with_capacity(plan.n_activities());
    for (&unit, acts) in &plan.activities {
        for (pos, a) in acts.iter().enumerate() {
            raw.push(Raw {
                node: Node {
                    label: activity_label(a.kind, a.track_id, a.task_kind),
                    start: a.start,
                    end: a.end,
                    unit_ids: vec![unit],
                },
                kind: a.kind,
                track: a.track_id,
                unit,
                pos,
            });
        }
    }

    let mut edges: Vec<Edge> = Vec::new();
    for w in (0..raw.len()).collect::<Vec<_>>().windows(2) {
        if raw[w[0]].unit == raw[w[1]].unit {
            edges.push(Edge { from: w[0], to: w[1], edge_class: EdgeClass::UnitOrder });
        }
    }
    let chain_key = |i: &usize| (raw[*i].node.start, raw[*i].unit, raw[*i].pos);
    let mut moves: Vec<usize> = (0..raw.len()).filter(|&i| raw[i].kind == ActivityKind::Movement).collect();
    moves.sort_by_key(chain_key);
    for w in moves.windows(2) {
        edges.push(Edge { from: w[0], to: w[1], edge_class: EdgeClass::MovementOrder });
    }
    let mut by_track: BTreeMap<Option<TrackId>, Vec<usize>> = BTreeMap::new();
    for i in (0..raw.len()).filter(|&i| raw[i].kind == ActivityKind::Service) {
        by_track.entry(raw[i].track).or_default().push(i);
    }
    for services in by_track.values_mut() {
        services.sort_by_key(chain_key);
        for w in services.windows(2) {
            edges.push(Edge { from: w[0], to: w[1], edge_class: EdgeClass::FacilityOrder });
        }
    }

    // Kahn's algorithm with a priority queue over the tie-break key.
    let n = raw.len();
    let mut indegree = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in &edges {
        indegree[e.to] += 1;
        out[e.from].push(e.to);
    }
    let key = |i: usize| Reverse((raw[i].node.start, raw[i].node.label.clone(), raw[i].unit, i));
    let mut heap: BinaryHeap<_> = (0..n).filter(|&i| indegree[i] == 0).map(key).collect();
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    while order.len() < n {
        let next = match heap.pop() {
            Some(Reverse((_, _, _, i))) => i,
            // Cycles only arise from chains whose times run backwards.
            None => (0..n).filter(|&i| !placed[i]).min_by_key(|&i| key(i).0).expect("nodes remain"),
        };
        if placed[next] {
            continue;
        }
        placed[next] = true;
        order.push(next);
        for &m in &out[next] {
            indegree[m] = indegree[m].saturating_sub(1);
            if indegree[m] == 0 && !placed[m] {
                heap.push(key(m));
            }
        }
    }
    let mut new_index = vec![0; n];
    for (new, &old) in order.iter().enumerate() {
        new_index[old] = new;
    }
    let mut edges: Vec<Edge> = edges
        .into_iter()
        .map(|e| Edge { from: new_index[e.from], to: new_index[e.to], edge_class: e.edge_class })
        .collect();
    edges.sort();
    let mut slots: Vec<Option<Node>> = raw.into_iter().map(|r| Some(r.node)).collect();
    let nodes = order.iter().map(|&i| slots[i].take().expect("each node placed once")).collect();
    ActivityGraph { nodes, edges }
}

/// Node labels seen in a training corpus; index 0 is reserved for unknown labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelAlphabet {
    pub labels: Vec<String>,
}

impl LabelAlphabet {
    pub fn build<'a>(graphs: impl IntoIterator<Item = &'a ActivityGraph>) -> Self {
        let mut labels: Vec<String> = graphs
            .into_iter()
            .flat_map(|g| g.nodes.iter().map(|n| n.label.clone()))
            .filter(|l| l != UNKNOWN_LABEL)
            .collect();
        labels.sort();
        labels.dedup();
        labels.insert(0, UNKNOWN_LABEL.to_string());
        LabelAlphabet { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index(&self, label: &str) -> usize {
        self.labels[1..]
            .binary_search_by(|l| l.as_str().cmp(label))
            .map_or(0, |i| i + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    Labels,
    LabelsAndTime,
}

impl FeatureSet {
    pub fn width(self, alphabet: &LabelAlphabet) -> usize {
        match self {
            FeatureSet::Labels => alphabet.len(),
            FeatureSet::LabelsAndTime => alphabet.len() + TEMPORAL_COLUMNS,
        }
    }
}

/// Row-major `rows x cols` node features.
pub type FeatureMatrix = crate::matrix::Matrix;

/// One-hot labels, optionally followed by start, time-to-end, duration and
/// mean absolute start gap to neighbours, all divided by `horizon`.
pub fn extract_features(graph: &ActivityGraph, alphabet: &LabelAlphabet, horizon: Minutes, set: FeatureSet) -> FeatureMatrix {
    let cols = set.width(alphabet);
    let n = graph.n();
    let h = horizon.max(1) as f64;
    let mut data = vec![0.0; n * cols];
    let neighbors = graph.neighbors();
    for (i, node) in graph.nodes.iter().enumerate() {
        let row = &mut data[i * cols..(i + 1) * cols];
        row[alphabet.index(&node.label)] = 1.0;
        if set == FeatureSet::LabelsAndTime {
            let base = alphabet.len();
            row[base] = node.start as f64 / h;
            row[base + 1] = (horizon - node.end) as f64 / h;
            row[base + 2] = (node.end - node.start) as f64 / h;
            let adj = &neighbors[i];
            row[base + 3] = if adj.is_empty() {
                0.0
            } else {
                adj.iter()
                    .map(|&j| (graph.nodes[j].start - node.start).abs() as f64)
                    .sum::<f64>()
                    / adj.len() as f64
                    / h
            };
        }
    }
    FeatureMatrix { rows: n, cols, data }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activity, ActivityKind, Slot, TaskKind};

    fn skeleton(arrive: Minutes, park: TrackId, leave: Minutes, depart: Minutes) -> Vec<Activity> {
        vec![
            Activity::at(ActivityKind::Arrival, arrive, arrive, 0),
            Activity::movement(arrive, vec![0, park]),
            Activity::at(ActivityKind::Parking, arrive + 2, leave, park),
            Activity::movement(leave, vec![park, 0]),
            Activity::at(ActivityKind::Departure, depart, depart, 0),
        ]
    }

    #[test]
    fn single_unit_graph() {
        let mut p = Plan::default();
        p.matching.insert(1, Slot { departure_index: 0, slot: 0 });
        p.activities.insert(1, skeleton(10, 3, 100, 102));
        let g = plan_to_graph(&p);
        assert_eq!(g.n(), 5);
        assert_eq!(g.count(EdgeClass::UnitOrder), 4);
        assert_eq!(g.count(EdgeClass::MovementOrder), 1);
        assert_eq!(g.count(EdgeClass::FacilityOrder), 0);
        let labels: Vec<&str> = g.nodes.iter().map(|n| n.label.as_str()).collect();
        assert_eq!(labels, ["A", "M", "P#3", "M", "D"]);
    }

    #[test]
    fn facility_edge_points_forward() {
        let mut p = Plan::default();
        for (u, s) in [(1u32, 50), (2, 20)] {
            let mut acts = skeleton(10, 1, 200, 202);
            acts[2] = Activity::service(s, s + 10, 1, TaskKind::Cleaning);
            acts.insert(3, Activity::at(ActivityKind::Parking, s + 10, 200, 1));
            p.activities.insert(u, acts);
        }
        let g = plan_to_graph(&p);
        let f: Vec<&Edge> = g.edges.iter().filter(|e| e.edge_class == EdgeClass::FacilityOrder).collect();
        assert_eq!(f.len(), 1);
        assert_eq!(g.nodes[f[0].from].start, 20);
        assert_eq!(g.nodes[f[0].to].start, 50);
        assert!(g.edges.iter().all(|e| e.from < e.to));
    }

    #[test]
    fn temporal_columns() {
        let g = ActivityGraph {
            nodes: [0, 60, 120]
                .iter()
                .map(|&s| Node { label: "M".into(), start: s, end: s, unit_ids: vec![1] })
                .collect(),
            edges: vec![
                Edge { from: 0, to: 1, edge_class: EdgeClass::UnitOrder },
                Edge { from: 1, to: 2, edge_class: EdgeClass::UnitOrder },
            ],
        };
        let alphabet = LabelAlphabet::build([&g]);
        assert_eq!(alphabet.labels, ["UNK", "M"]);
        let x = extract_features(&g, &alphabet, 1440, FeatureSet::LabelsAndTime);
        assert_eq!(x.cols, 6);
        assert_eq!(x.get(0, 2), 0.0);
        assert_eq!(x.get(1, 4), 0.0);
        assert!((x.get(1, 5) - 60.0 / 1440.0).abs() < 1e-15);
        assert_eq!(x.get(0, 1), 1.0);
        assert_eq!(alphabet.index("P#9"), 0);
    }
}
