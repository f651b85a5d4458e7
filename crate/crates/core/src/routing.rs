//! Route discovery on a (possibly reduced) topology and the replay of flows
//! against ground-truth link failures.
//!
//! Discovery only traverses links present in the topology in force, which
//! is exactly the effect of dropping route requests from transmitters that
//! are not in the receiver's neighbor set. Repair is a full re-discovery and
//! costs the flow one re-routing penalty of downtime.

use std::fmt;
use std::io::Write;

use crate::graph::{min_hop_path, widest_path, LinkGraph, PathInfo};
use crate::mobility::History;
use crate::model::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    /// Minimum hop count (first route request to arrive).
    ShortestPath,
    /// Maximum bottleneck weight.
    ReliablePath,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::ShortestPath => "SP",
            Metric::ReliablePath => "RPTa",
        })
    }
}

pub fn find_route(graph: &LinkGraph, src: NodeId, dst: NodeId, metric: Metric) -> Option<PathInfo> {
    match metric {
        Metric::ShortestPath => min_hop_path(graph, src, dst),
        Metric::ReliablePath => widest_path(graph, src, dst),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flow {
    pub id: usize,
    pub src: NodeId,
    pub dst: NodeId,
    pub start: f64,
    pub end: f64,
    pub metric: Metric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteEventKind {
    Established,
    Broken,
    Rerouted,
    Unreachable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteEvent {
    pub flow: usize,
    pub t: f64,
    pub kind: RouteEventKind,
    pub path: Option<PathInfo>,
}

/// Topologies in force from a given tick onward.
#[derive(Debug, Clone, Default)]
pub struct TopologySchedule {
    entries: Vec<(u64, LinkGraph)>,
}

impl TopologySchedule {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a topology taking effect at `tick`; ticks must increase.
    pub fn push(&mut self, tick: u64, graph: LinkGraph) {
        if let Some((last, _)) = self.entries.last() {
            assert!(tick > *last, "schedule ticks must increase");
        }
        self.entries.push((tick, graph));
    }

    pub fn at(&self, tick: u64) -> Option<&LinkGraph> {
        let i = self.entries.partition_point(|(t, _)| *t <= tick);
        i.checked_sub(1).map(|i| &self.entries[i].1)
    }

    fn is_refresh(&self, tick: u64) -> bool {
        self.entries.binary_search_by_key(&tick, |(t, _)| *t).is_ok()
    }

    pub fn first_tick(&self) -> Option<u64> {
        self.entries.first().map(|(t, _)| *t)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    pub range: f64,
    pub delta: f64,
    pub per_hop_delay_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSummary {
    pub flow: usize,
    pub metric: Metric,
    pub reroutes: usize,
    pub downtime_s: f64,
    pub uptime_s: f64,
    pub delivered_mb: f64,
    /// Delivered volume over the flow duration, Mb/s.
    pub throughput_proxy: f64,
    pub delay_proxy_ms: f64,
    pub hops_initial: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct FlowRun {
    pub events: Vec<RouteEvent>,
    pub summaries: Vec<FlowSummary>,
}

fn path_alive(history: &History, path: &PathInfo, tick: u64, range: f64) -> bool {
    path.links().all(|(a, b)| history.link_alive(a, b, tick, range))
}

/// Share of airtime a path gets: `1 / max(1, mean degree along path / 2)`.
fn contention_factor(graph: &LinkGraph, path: &PathInfo) -> f64 {
    let mean = path.nodes.iter().map(|&x| graph.degree(x)).sum::<usize>() as f64
        / path.nodes.len() as f64;
    1.0 / (mean / 2.0).max(1.0)
}

fn bottleneck_rate(graph: &LinkGraph, path: &PathInfo) -> f64 {
    path.links()
        .filter_map(|(a, b)| graph.edge(a, b).map(|e| e.r))
        .fold(f64::INFINITY, f64::min)
}

enum State {
    /// Route in use; traffic resumes at `resume`.
    Active {
        path: PathInfo,
        rate: f64,
        resume: u64,
    },
    /// No route; `after_break` distinguishes repair from first discovery.
    Waiting { after_break: bool },
}

/// Replays each flow tick by tick over the recorded trajectory. A route
/// breaks as soon as ground truth kills any of its links; repair uses the
/// topology in force, minus links that are already dead, and is retried at
/// every topology refresh while nothing is found.
pub fn run_flows(
    history: &History,
    flows: &[Flow],
    schedule: &TopologySchedule,
    params: FlowParams,
) -> FlowRun {
    let mut run = FlowRun::default();
    let dt = history.time_step;
    let delta_ticks = (params.delta / dt).round() as u64;
    for flow in flows {
        let start = (flow.start / dt).round() as u64;
        let end = ((flow.end / dt).round() as u64).min(history.last_tick());
        let discover = |tick: u64| -> Option<(PathInfo, f64)> {
            let topo = schedule.at(tick)?;
            let usable = topo.filter(|e| history.link_alive(e.u, e.v, tick, params.range));
            let path = find_route(&usable, flow.src, flow.dst, flow.metric)?;
            let rate = bottleneck_rate(topo, &path);
            Some((path, rate))
        };
        let mut events = Vec::new();
        let mut push = |tick: u64, kind, path: Option<&PathInfo>| {
            events.push(RouteEvent {
                flow: flow.id,
                t: history.time(tick),
                kind,
                path: path.cloned(),
            })
        };
        let mut state = State::Waiting { after_break: false };
        let mut reroutes = 0usize;
        let mut up_ticks = 0u64;
        let mut delivered = 0.0;
        let mut hop_ticks = 0u64;
        let mut hops_initial = None;

        for tick in start..end {
            let broken = matches!(
                &state,
                State::Active { path, .. } if !path_alive(history, path, tick, params.range)
            );
            if broken {
                let old = std::mem::replace(&mut state, State::Waiting { after_break: true });
                if let State::Active { path, .. } = old {
                    push(tick, RouteEventKind::Broken, Some(&path));
                    reroutes += 1;
                    match discover(tick) {
                        Some((path, rate)) => {
                            push(tick, RouteEventKind::Rerouted, Some(&path));
                            state = State::Active {
                                path,
                                rate,
                                resume: tick + delta_ticks,
                            };
                        }
                        None => push(tick, RouteEventKind::Unreachable, None),
                    }
                }
            } else if let State::Waiting { after_break } = state {
                if tick == start || schedule.is_refresh(tick) {
                    match discover(tick) {
                        Some((path, rate)) => {
                            let (kind, resume) = if after_break {
                                (RouteEventKind::Rerouted, tick + delta_ticks)
                            } else {
                                hops_initial = Some(path.hops);
                                (RouteEventKind::Established, tick)
                            };
                            push(tick, kind, Some(&path));
                            state = State::Active { path, rate, resume };
                        }
                        None if tick == start => push(tick, RouteEventKind::Unreachable, None),
                        None => {}
                    }
                }
            }
            if let State::Active { path, rate, resume } = &state {
                if tick >= *resume {
                    up_ticks += 1;
                    hop_ticks += path.hops as u64;
                    let topo = schedule.at(tick).expect("active flows have a topology");
                    delivered += rate * dt * contention_factor(topo, path);
                }
            }
        }

        let duration_ticks = end.saturating_sub(start);
        let duration = duration_ticks as f64 * dt;
        let delay_proxy_ms = if delivered > 0.0 {
            params.per_hop_delay_ms * hop_ticks as f64 / up_ticks as f64
                + 1000.0 * params.delta * reroutes as f64 / delivered
        } else {
            f64::INFINITY
        };
        run.events.extend(events);
        run.summaries.push(FlowSummary {
            flow: flow.id,
            metric: flow.metric,
            reroutes,
            downtime_s: (duration_ticks - up_ticks) as f64 * dt,
            uptime_s: up_ticks as f64 * dt,
            delivered_mb: delivered,
            throughput_proxy: if duration > 0.0 { delivered / duration } else { 0.0 },
            delay_proxy_ms,
            hops_initial,
        });
    }
    run
}

/// Per-flow rows `(flow, metric, reroutes, downtime_s, throughput_proxy,
/// delay_proxy_ms, hops_initial)`.
pub fn write_flows_csv<W: Write>(summaries: &[FlowSummary], w: W) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record([
        "flow",
        "metric",
        "reroutes",
        "downtime_s",
        "throughput_proxy",
        "delay_proxy_ms",
        "hops_initial",
    ])?;
    for s in summaries {
        wr.write_record([
            s.flow.to_string(),
            s.metric.to_string(),
            s.reroutes.to_string(),
            s.downtime_s.to_string(),
            s.throughput_proxy.to_string(),
            s.delay_proxy_ms.to_string(),
            s.hops_initial.map(|h| h.to_string()).unwrap_or_default(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::WeightedEdge;
    use crate::mobility::{MotionParams, World};
    use crate::model::{BoundaryPolicy, NodeState, Vec2};

    fn motion() -> MotionParams {
        MotionParams {
            width: 1000.0,
            height: 1000.0,
            v_max: 0.0,
            lambda: 1.0 / 60.0,
            boundary: BoundaryPolicy::Reflect,
            time_step: 0.1,
        }
    }

    fn still(id: NodeId, x: f64, y: f64) -> NodeState {
        NodeState {
            id,
            pos: Vec2::new(x, y),
            vel: Vec2::ZERO,
            epoch_remaining: f64::INFINITY,
        }
    }

    fn edge(u: NodeId, v: NodeId, w: f64) -> WeightedEdge {
        WeightedEdge {
            r: 2.0,
            ..WeightedEdge::new(u, v, w)
        }
    }

    fn params() -> FlowParams {
        FlowParams {
            range: 300.0,
            delta: 1.0,
            per_hop_delay_ms: 5.0,
        }
    }

    #[test]
    fn direct_neighbor_is_one_hop() {
        let g = LinkGraph::from_edges(3, [edge(0, 1, 1.0), edge(1, 2, 9.0), edge(0, 2, 9.0)]);
        for m in [Metric::ShortestPath, Metric::ReliablePath] {
            let p = find_route(&g, 0, 2, m).unwrap();
            assert_eq!(p.hops, 1);
        }
    }

    #[test]
    fn triangle_metrics_differ() {
        let g = LinkGraph::from_edges(3, [edge(0, 1, 5.0), edge(0, 2, 10.0), edge(2, 1, 8.0)]);
        assert_eq!(find_route(&g, 0, 1, Metric::ShortestPath).unwrap().nodes, vec![0, 1]);
        let r = find_route(&g, 0, 1, Metric::ReliablePath).unwrap();
        assert_eq!(r.nodes, vec![0, 2, 1]);
        assert_eq!(r.weight, 8.0);
    }

    #[test]
    fn disconnected_is_unreachable() {
        let g = LinkGraph::from_edges(3, [edge(0, 1, 1.0)]);
        assert!(find_route(&g, 0, 2, Metric::ShortestPath).is_none());
        assert!(find_route(&g, 0, 2, Metric::ReliablePath).is_none());
    }

    #[test]
    fn static_network_never_reroutes() {
        let h = World::from_states(
            motion(),
            vec![still(0, 0.0, 0.0), still(1, 200.0, 0.0), still(2, 400.0, 0.0)],
            vec![],
            0,
        )
        .simulate(200);
        let mut sched = TopologySchedule::new();
        sched.push(0, LinkGraph::from_edges(3, [edge(0, 1, 10.0), edge(1, 2, 10.0)]));
        let flows = [Flow {
            id: 0,
            src: 0,
            dst: 2,
            start: 0.0,
            end: 20.0,
            metric: Metric::ShortestPath,
        }];
        let run = run_flows(&h, &flows, &sched, params());
        let s = &run.summaries[0];
        assert_eq!(s.reroutes, 0);
        assert_eq!(s.downtime_s, 0.0);
        assert_eq!(s.hops_initial, Some(2));
        assert_eq!(run.events.len(), 1);
        assert_eq!(run.events[0].kind, RouteEventKind::Established);
        // Degrees along 0-1-2 are 1, 2, 1: no contention discount.
        assert!((s.throughput_proxy - 2.0).abs() < 1e-12);
        assert!((s.delay_proxy_ms - 10.0).abs() < 1e-12);
    }

    #[test]
    fn lone_path_breaks_then_unreachable() {
        let mut nodes = vec![still(0, 0.0, 0.0), still(1, 250.0, 0.0)];
        nodes[1].vel = Vec2::new(10.0, 0.0);
        let h = World::from_states(motion(), nodes, vec![], 0).simulate(200);
        let mut sched = TopologySchedule::new();
        sched.push(0, LinkGraph::from_edges(2, [edge(0, 1, 10.0)]));
        let flows = [Flow {
            id: 7,
            src: 0,
            dst: 1,
            start: 0.0,
            end: 20.0,
            metric: Metric::ReliablePath,
        }];
        let run = run_flows(&h, &flows, &sched, params());
        let kinds: Vec<_> = run.events.iter().map(|e| e.kind).collect();
        assert_eq!(
            kinds,
            vec![
                RouteEventKind::Established,
                RouteEventKind::Broken,
                RouteEventKind::Unreachable
            ]
        );
        // Range exit at 250 + 10t > 300 -> first dead tick is t = 5.1.
        assert!((run.events[1].t - 5.1).abs() < 1e-9);
        let s = &run.summaries[0];
        assert_eq!(s.reroutes, 1);
        assert!((s.uptime_s + s.downtime_s - 20.0).abs() < 1e-12);
        assert!((s.uptime_s - 5.1).abs() < 1e-9);
    }

    #[test]
    fn schedule_lookup() {
        let mut s = TopologySchedule::new();
        assert!(s.at(0).is_none());
        s.push(5, LinkGraph::new(1));
        s.push(10, LinkGraph::new(2));
        assert!(s.at(4).is_none());
        assert_eq!(s.at(5).unwrap().node_count(), 1);
        assert_eq!(s.at(9).unwrap().node_count(), 1);
        assert_eq!(s.at(100).unwrap().node_count(), 2);
        assert!(s.is_refresh(10) && !s.is_refresh(11));
    }

    #[test]
    fn flows_csv_header() {
        let mut buf = Vec::new();
        write_flows_csv(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap().trim_end(),
            "flow,metric,reroutes,downtime_s,throughput_proxy,delay_proxy_ms,hops_initial"
        );
    }
}
