//! Five-node scenario: a relay heading into a primary user's disc versus a
//! relay moving away from it.

use pctc::mobility::{MotionParams, World};
use pctc::model::{NodeState, PrimaryUser, ScenarioConfig, Vec2};
use pctc::routing::{run_flows, Flow, FlowParams, Metric, RouteEventKind, TopologySchedule};
use pctc::sim::snapshots;

const SRC: usize = 0;
const TOWARD_PU: usize = 1;
const AWAY: usize = 2;
const DST: usize = 3;
const SPARE: usize = 4;

fn node(id: usize, x: f64, y: f64, vx: f64, vy: f64) -> NodeState {
    NodeState {
        id,
        pos: Vec2::new(x, y),
        vel: Vec2::new(vx, vy),
        epoch_remaining: f64::INFINITY,
    }
}

fn scenario() -> (ScenarioConfig, World) {
    let pu = PrimaryUser {
        id: 0,
        pos: Vec2::new(210.0, 420.0),
        rho: 60.0,
    };
    let cfg = ScenarioConfig {
        n_nodes: 5,
        primary_users: vec![pu],
        sim_duration: 60.0,
        ..ScenarioConfig::default()
    };
    let nodes = vec![
        node(SRC, 0.0, 250.0, 0.0, 0.0),
        // Reaches the disc edge (y = 360) at t = 35 s.
        node(TOWARD_PU, 210.0, 290.0, 0.0, 2.0),
        node(AWAY, 120.0, 150.0, 0.0, -0.5),
        node(DST, 420.0, 250.0, 0.0, 0.0),
        node(SPARE, 300.0, 150.0, 0.0, 0.0),
    ];
    let world = World::from_states(MotionParams::from(&cfg), nodes, cfg.primary_users.clone(), 7);
    (cfg, world)
}

fn flow(metric: Metric, start: f64, end: f64) -> Flow {
    Flow {
        id: 0,
        src: SRC,
        dst: DST,
        start,
        end,
        metric,
    }
}

#[test]
fn cognitive_route_avoids_the_relay_entering_the_pu() {
    let (cfg, world) = scenario();
    let history = world.simulate(cfg.total_ticks());
    let snaps = snapshots(&history, &cfg, 7).unwrap();
    let mut original = TopologySchedule::new();
    let mut reduced = TopologySchedule::new();
    for s in &snaps {
        original.push(s.tick, s.original.clone());
        reduced.push(s.tick, s.reduced.clone());
    }
    let first = &snaps[0];
    assert!(!first.original.has_edge(SRC, DST));
    assert!(!first.original.has_edge(AWAY, DST));
    assert!(first.original.has_edge(SRC, TOWARD_PU));
    assert!(first.original.has_edge(SRC, AWAY));
    let toward = first.original.edge(SRC, TOWARD_PU).unwrap().t_a;
    let away = first.original.edge(SRC, AWAY).unwrap().t_a;
    assert!(away > toward, "{away} vs {toward}");

    let start = history.time(first.tick);
    let params = FlowParams {
        range: cfg.tx_range,
        delta: cfg.delta,
        per_hop_delay_ms: cfg.per_hop_delay_ms,
    };

    let sp = run_flows(&history, &[flow(Metric::ShortestPath, start, 60.0)], &original, params);
    let established = &sp.events[0];
    assert_eq!(established.kind, RouteEventKind::Established);
    assert_eq!(established.path.as_ref().unwrap().nodes, vec![SRC, TOWARD_PU, DST]);
    let broken: Vec<_> = sp.events.iter().filter(|e| e.kind == RouteEventKind::Broken).collect();
    assert_eq!(broken.len(), 1);
    assert!((broken[0].t - 35.0).abs() <= 0.1 + 1e-9, "broke at {}", broken[0].t);
    assert_eq!(sp.summaries[0].reroutes, 1);

    let rpt = run_flows(&history, &[flow(Metric::ReliablePath, start, 60.0)], &reduced, params);
    assert_eq!(rpt.events.len(), 1);
    assert_eq!(rpt.events[0].path.as_ref().unwrap().nodes, vec![SRC, AWAY, SPARE, DST]);
    assert_eq!(rpt.summaries[0].reroutes, 0);
    assert_eq!(rpt.summaries[0].downtime_s, 0.0);
    assert!(rpt.summaries[0].throughput_proxy > sp.summaries[0].throughput_proxy);
}

#[test]
fn pctc_keeps_the_reliable_path_weights() {
    let (cfg, world) = scenario();
    let history = world.simulate(cfg.total_ticks());
    for s in snapshots(&history, &cfg, 7).unwrap() {
        for u in 0..cfg.n_nodes {
            assert_eq!(
                pctc::topology::reliable_weights(&s.original, u),
                pctc::topology::reliable_weights(&s.reduced, u)
            );
        }
    }
}
