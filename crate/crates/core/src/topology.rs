//! Prediction-based cognitive topology control.
//!
//! Every node runs a localized widest-path search over its closed one-hop
//! neighborhood and keeps only the neighbors that are first hops of the
//! resulting most reliable paths. Links are weighted by the traffic volume
//! they can carry before they are predicted to fail, less one re-routing
//! penalty.

use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;

use crate::error::TopologyError;
use crate::graph::{search, LinkGraph, PathInfo, PathOrder, WeightedEdge};
use crate::model::NodeId;

/// `r · max(t_a − δ, 0)` in megabits, with `t_a` capped at `cap` seconds.
pub fn edge_weight(t_a: f64, rate: f64, delta: f64, cap: f64) -> f64 {
    rate * (t_a.min(cap) - delta).max(0.0)
}

/// The closed one-hop neighborhood of `center` with every edge among its
/// members, relabeled to local indices (the center is index 0).
#[derive(Debug, Clone)]
pub struct LocalGraph {
    pub center: NodeId,
    /// Global ids; `members[0] == center`, the rest ascending.
    pub members: Vec<NodeId>,
    pub graph: LinkGraph,
}

impl LocalGraph {
    pub fn extract(original: &LinkGraph, center: NodeId) -> Self {
        let mut members = vec![center];
        members.extend(original.neighbors(center));
        let index = |g: NodeId| members.iter().position(|&m| m == g);
        let mut graph = LinkGraph::new(members.len());
        for (i, &a) in members.iter().enumerate() {
            for (b, e) in original.incident(a) {
                if let Some(j) = index(b) {
                    if i < j {
                        graph.add_edge(WeightedEdge {
                            u: i,
                            v: j,
                            ..*e
                        });
                    }
                }
            }
        }
        Self {
            center,
            members,
            graph,
        }
    }
}

/// Output of one node's localized search.
#[derive(Debug, Clone)]
pub struct LocalResult {
    pub center: NodeId,
    /// Most reliable path from the center to each neighbor, in global ids.
    pub paths: Vec<PathInfo>,
    /// First hops of those paths.
    pub preserved: BTreeSet<NodeId>,
}

/// Widest-path search from the center over its local graph, then neighbor
/// selection.
pub fn widest_paths_local(g: &LocalGraph) -> LocalResult {
    let tree = search(&g.graph, 0, PathOrder::Widest);
    let mut paths = Vec::with_capacity(g.members.len().saturating_sub(1));
    let mut preserved = BTreeSet::new();
    for local in 1..g.members.len() {
        let mut p = tree
            .path_to(local)
            .expect("every member is adjacent to the center");
        for x in p.nodes.iter_mut() {
            *x = g.members[*x];
        }
        preserved.insert(p.nodes[1]);
        paths.push(p);
    }
    LocalResult {
        center: g.center,
        paths,
        preserved,
    }
}

/// Neighbor sets each node would keep on its own, indexed by node id.
pub fn preserved_sets(original: &LinkGraph) -> Vec<BTreeSet<NodeId>> {
    (0..original.node_count())
        .into_par_iter()
        .map(|u| widest_paths_local(&LocalGraph::extract(original, u)).preserved)
        .collect()
}

/// Pairs `(u, v)` where `u` keeps `v` but `v` drops `u`.
pub fn one_sided_pairs(preserved: &[BTreeSet<NodeId>]) -> Vec<(NodeId, NodeId)> {
    preserved
        .iter()
        .enumerate()
        .flat_map(|(u, set)| {
            set.iter()
                .filter(move |&&v| !preserved[v].contains(&u))
                .map(move |&v| (u, v))
        })
        .collect()
}

/// How per-node decisions become one undirected topology.
///
/// Localized searches at the two ends of a link see different
/// neighborhoods (a three-hop detour can lie inside one and not the other),
/// so the per-node relations can disagree. Dropping a link when either end
/// drops it, or keeping it when either end keeps it, both still retain a
/// path of at-least-as-heavy links for every original link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SymmetryRule {
    /// Keep a link only if both ends keep it.
    #[default]
    MutualConsent,
    /// Keep a link if either end keeps it.
    Either,
    /// Reject any disagreement.
    Strict,
}

/// The reduced topology plus the disagreements the rule resolved.
#[derive(Debug, Clone)]
pub struct Topology {
    pub graph: LinkGraph,
    pub rule: SymmetryRule,
    pub one_sided: Vec<(NodeId, NodeId)>,
}

impl Topology {
    pub fn neighbors(&self, u: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.graph.neighbors(u)
    }
}

pub fn build_topology(original: &LinkGraph) -> Topology {
    build_topology_with(original, SymmetryRule::MutualConsent)
        .expect("only the strict rule can fail")
}

pub fn build_topology_with(original: &LinkGraph, rule: SymmetryRule) -> Result<Topology, TopologyError> {
    let preserved = preserved_sets(original);
    let one_sided = one_sided_pairs(&preserved);
    if rule == SymmetryRule::Strict {
        if let Some(&(u, v)) = one_sided.first() {
            return Err(TopologyError::Asymmetric(u, v));
        }
    }
    let graph = original.filter(|e| {
        let a = preserved[e.u].contains(&e.v);
        let b = preserved[e.v].contains(&e.u);
        match rule {
            SymmetryRule::MutualConsent | SymmetryRule::Strict => a && b,
            SymmetryRule::Either => a || b,
        }
    });
    Ok(Topology {
        graph,
        rule,
        one_sided,
    })
}

/// Every original component spans exactly one component of the result.
pub fn check_connectivity(original: &LinkGraph, result: &Topology) -> bool {
    let before = original.components();
    let after = result.graph.components();
    before.len() == after.len() && before == after
}

/// `v ∈ N(u) ⇔ u ∈ N(v)` and every kept link exists in the original.
pub fn check_symmetry(original: &LinkGraph, result: &Topology) -> bool {
    let g = &result.graph;
    (0..g.node_count()).all(|u| g.neighbors(u).all(|v| g.has_edge(v, u)))
        && g.is_subgraph_of(original)
}

/// Best bottleneck weight from `src` to every node, `None` if unreachable.
pub fn reliable_weights(graph: &LinkGraph, src: NodeId) -> Vec<Option<f64>> {
    search(graph, src, PathOrder::Widest)
        .labels
        .into_iter()
        .map(|l| l.map(|l| l.weight))
        .collect()
}

/// Ratio of the best `u`-`v` bottleneck in the result to that in the
/// original. Two equal weights (including two zeros) give exactly 1.
pub fn spanner_factor(
    original: &LinkGraph,
    result: &Topology,
    u: NodeId,
    v: NodeId,
) -> Result<f64, TopologyError> {
    let before = reliable_weights(original, u)[v].ok_or(TopologyError::Disconnected(u, v))?;
    let after = reliable_weights(&result.graph, u)[v].unwrap_or(0.0);
    Ok(if after == before { 1.0 } else { after / before })
}

/// Expected resulting-to-original degree ratio `H(n) / n`.
pub fn control_intensity_formula(n: usize) -> Result<f64, TopologyError> {
    if n == 0 {
        return Err(TopologyError::ZeroDegree);
    }
    Ok(harmonic_ratio(n as u128).unwrap_or_else(|| {
        let harmonic: f64 = (1..=n).rev().map(|i| 1.0 / i as f64).sum();
        harmonic / n as f64
    }))
}

/// `H(n) / n` as an exact fraction rounded once, while it fits in `u128`.
fn harmonic_ratio(n: u128) -> Option<f64> {
    fn gcd(mut a: u128, mut b: u128) -> u128 {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    }
    let (mut num, mut den) = (0u128, 1u128);
    for i in 1..=n {
        // num/den + 1/i
        let g = gcd(den, i);
        let l = den.checked_mul(i / g)?;
        num = num.checked_mul(i / g)?.checked_add(l / i)?;
        den = l;
        let g = gcd(num, den);
        num /= g;
        den /= g;
    }
    let den = den.checked_mul(n)?;
    let g = gcd(num, den);
    let (num, den) = (num / g, den / g);
    // Exact conversion keeps the single division correctly rounded.
    (num < 1 << 53 && den < 1 << 53).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyStats {
    /// Original degree per node.
    pub n: Vec<usize>,
    /// Resulting degree per node.
    pub phi: Vec<usize>,
    pub avg_degree_before: f64,
    pub avg_degree_after: f64,
    pub max_degree_before: usize,
    pub max_degree_after: usize,
    /// Mean of `phi / n` over nodes with `n ≥ 1`; `None` if there are none.
    pub control_intensity: Option<f64>,
}

pub fn stats(original: &LinkGraph, result: &Topology) -> TopologyStats {
    let count = original.node_count();
    let n: Vec<usize> = (0..count).map(|u| original.degree(u)).collect();
    let phi: Vec<usize> = (0..count).map(|u| result.graph.degree(u)).collect();
    let avg = |v: &[usize]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<usize>() as f64 / v.len() as f64
        }
    };
    let ratios: Vec<f64> = n
        .iter()
        .zip(&phi)
        .filter(|(&n, _)| n > 0)
        .map(|(&n, &p)| p as f64 / n as f64)
        .collect();
    TopologyStats {
        avg_degree_before: avg(&n),
        avg_degree_after: avg(&phi),
        max_degree_before: n.iter().copied().max().unwrap_or(0),
        max_degree_after: phi.iter().copied().max().unwrap_or(0),
        control_intensity: (!ratios.is_empty())
            .then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
        n,
        phi,
    }
}

/// Edge list `(u, v, w, t_a)`.
pub fn write_topology_csv<W: Write>(topology: &Topology, w: W) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["u", "v", "w", "t_a"])?;
    for e in topology.graph.edges() {
        wr.write_record([
            e.u.to_string(),
            e.v.to_string(),
            e.w.to_string(),
            e.t_a.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Per-node `(id, n, phi)`.
pub fn write_stats_csv<W: Write>(s: &TopologyStats, w: W) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["id", "n", "phi"])?;
    for (id, (n, phi)) in s.n.iter().zip(&s.phi).enumerate() {
        wr.write_record([id.to_string(), n.to_string(), phi.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}
