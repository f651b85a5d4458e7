//! Undirected weighted link graphs and the label-setting path searches
//! (widest path and minimum-hop) shared by topology control and routing.

use std::cmp::Ordering;
use std::collections::{BTreeMap, VecDeque};

use crate::error::TopologyError;
use crate::model::NodeId;

/// A usable link with its prediction-derived weight (megabits).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedEdge {
    pub u: NodeId,
    pub v: NodeId,
    pub w: f64,
    /// Link rate in Mb/s.
    pub r: f64,
    /// Predicted available duration in seconds.
    pub t_a: f64,
}

impl WeightedEdge {
    pub fn new(u: NodeId, v: NodeId, w: f64) -> Self {
        let (u, v) = if u <= v { (u, v) } else { (v, u) };
        Self {
            u,
            v,
            w,
            r: 0.0,
            t_a: 0.0,
        }
    }

    pub fn other(&self, x: NodeId) -> NodeId {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }
}

/// Symmetric adjacency over dense node ids `0..n`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinkGraph {
    adj: Vec<BTreeMap<NodeId, WeightedEdge>>,
}

impl LinkGraph {
    pub fn new(n: usize) -> Self {
        Self {
            adj: vec![BTreeMap::new(); n],
        }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = WeightedEdge>) -> Self {
        let mut g = Self::new(n);
        for e in edges {
            g.add_edge(e);
        }
        g
    }

    /// Builds a graph from per-endpoint weight reports `(from, to, w)`.
    /// Both directions must be reported with bit-identical weights.
    pub fn from_arcs(n: usize, arcs: &[(NodeId, NodeId, f64)]) -> Result<Self, TopologyError> {
        let mut seen: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
        for &(a, b, w) in arcs {
            seen.insert((a, b), w);
        }
        let mut g = Self::new(n);
        for (&(a, b), &w) in &seen {
            match seen.get(&(b, a)) {
                Some(&back) if back.to_bits() == w.to_bits() => {
                    if a < b {
                        g.add_edge(WeightedEdge::new(a, b, w));
                    }
                }
                _ => return Err(TopologyError::AsymmetricWeight(a, b)),
            }
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, e: WeightedEdge) {
        assert!(e.u != e.v, "self-loop at {}", e.u);
        self.adj[e.u].insert(e.v, e);
        self.adj[e.v].insert(e.u, e);
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeMap::len).sum::<usize>() / 2
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.adj[u].len()
    }

    pub fn neighbors(&self, u: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adj[u].keys().copied()
    }

    pub fn incident(&self, u: NodeId) -> impl Iterator<Item = (NodeId, &WeightedEdge)> + '_ {
        self.adj[u].iter().map(|(&v, e)| (v, e))
    }

    pub fn edge(&self, u: NodeId, v: NodeId) -> Option<&WeightedEdge> {
        self.adj.get(u)?.get(&v)
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.edge(u, v).is_some()
    }

    /// Each undirected edge once, ordered by `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = &WeightedEdge> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, m)| m.range(u + 1..).map(|(_, e)| e))
    }

    pub fn filter(&self, mut keep: impl FnMut(&WeightedEdge) -> bool) -> LinkGraph {
        LinkGraph::from_edges(
            self.node_count(),
            self.edges().filter(|e| keep(e)).copied().collect::<Vec<_>>(),
        )
    }

    pub fn is_subgraph_of(&self, other: &LinkGraph) -> bool {
        self.node_count() == other.node_count() && self.edges().all(|e| other.has_edge(e.u, e.v))
    }

    /// Connected-component label per node; labels are the smallest node id
    /// in the component.
    pub fn components(&self) -> Vec<NodeId> {
        let n = self.node_count();
        let mut label = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = s;
            queue.push_back(s);
            while let Some(x) = queue.pop_front() {
                for y in self.neighbors(x) {
                    if label[y] == usize::MAX {
                        label[y] = s;
                        queue.push_back(y);
                    }
                }
            }
        }
        label
    }
}

/// A route with its bottleneck weight and hop count.
#[derive(Debug, Clone, PartialEq)]
pub struct PathInfo {
    pub nodes: Vec<NodeId>,
    /// Minimum edge weight along the path; infinite for the empty path.
    pub weight: f64,
    pub hops: usize,
}

impl PathInfo {
    pub fn links(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes.windows(2).map(|w| (w[0], w[1]))
    }

    /// Recomputes the bottleneck weight from `graph`; `None` if a link is missing.
    pub fn weight_in(&self, graph: &LinkGraph) -> Option<f64> {
        self.links()
            .map(|(a, b)| graph.edge(a, b).map(|e| e.w))
            .try_fold(f64::INFINITY, |acc, w| w.map(|w| acc.min(w)))
    }
}

/// Which path a search prefers. Both end with the same reversal-invariant
/// key (the sorted node-id list of the path) so `u → v` and `v → u` agree
/// under exact ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathOrder {
    /// Larger bottleneck, then fewer hops, then smaller sorted node ids.
    Widest,
    /// Fewer hops, then larger bottleneck, then smaller sorted node ids.
    MinHop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathLabel {
    pub weight: f64,
    pub hops: usize,
    key: Vec<NodeId>,
}

impl PathLabel {
    fn source(s: NodeId) -> Self {
        Self {
            weight: f64::INFINITY,
            hops: 0,
            key: vec![s],
        }
    }

    fn extend(&self, via: &WeightedEdge, to: NodeId) -> Self {
        let mut key = self.key.clone();
        let at = key.partition_point(|&k| k < to);
        key.insert(at, to);
        Self {
            weight: self.weight.min(via.w),
            hops: self.hops + 1,
            key,
        }
    }

    /// `Less` means `self` is preferred.
    pub fn compare(&self, other: &Self, order: PathOrder) -> Ordering {
        let by_weight = other.weight.total_cmp(&self.weight);
        let by_hops = self.hops.cmp(&other.hops);
        let primary = match order {
            PathOrder::Widest => by_weight.then(by_hops),
            PathOrder::MinHop => by_hops.then(by_weight),
        };
        primary.then_with(|| self.key.cmp(&other.key))
    }
}

/// Result of a single-source search: the preferred label and predecessor
/// of every reached node.
#[derive(Debug, Clone)]
pub struct SearchTree {
    pub source: NodeId,
    pub labels: Vec<Option<PathLabel>>,
    pub parent: Vec<Option<NodeId>>,
}

impl SearchTree {
    pub fn path_to(&self, dst: NodeId) -> Option<PathInfo> {
        let label = self.labels.get(dst)?.as_ref()?;
        let mut nodes = vec![dst];
        let mut x = dst;
        while let Some(p) = self.parent[x] {
            nodes.push(p);
            x = p;
        }
        nodes.reverse();
        Some(PathInfo {
            nodes,
            weight: label.weight,
            hops: label.hops,
        })
    }
}

/// Label-setting search from `src`. Every node starts unreached (so
/// zero-weight links are still usable); the source carries an infinite
/// bottleneck. At each round the best unvisited label is settled and its
/// links relaxed; a label is replaced only by a strictly preferred one.
pub fn search(graph: &LinkGraph, src: NodeId, order: PathOrder) -> SearchTree {
    let n = graph.node_count();
    let mut labels: Vec<Option<PathLabel>> = vec![None; n];
    let mut parent = vec![None; n];
    let mut visited = vec![false; n];
    labels[src] = Some(PathLabel::source(src));
    loop {
        let current = (0..n)
            .filter(|&x| !visited[x])
            .filter_map(|x| labels[x].as_ref().map(|l| (x, l)))
            .min_by(|a, b| a.1.compare(b.1, order))
            .map(|(x, _)| x);
        let Some(current) = current else { break };
        visited[current] = true;
        let here = labels[current].clone().expect("settled nodes carry a label");
        for (y, e) in graph.incident(current) {
            if visited[y] {
                continue;
            }
            let cand = here.extend(e, y);
            let better = match &labels[y] {
                None => true,
                Some(old) => cand.compare(old, order) == Ordering::Less,
            };
            if better {
                labels[y] = Some(cand);
                parent[y] = Some(current);
            }
        }
    }
    SearchTree {
        source: src,
        labels,
        parent,
    }
}

pub fn widest_path(graph: &LinkGraph, src: NodeId, dst: NodeId) -> Option<PathInfo> {
    search(graph, src, PathOrder::Widest).path_to(dst)
}

pub fn min_hop_path(graph: &LinkGraph, src: NodeId, dst: NodeId) -> Option<PathInfo> {
    search(graph, src, PathOrder::MinHop).path_to(dst)
}
