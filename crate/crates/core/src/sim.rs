//! Experiment engine: mobility → prediction → topology control → routing,
//! with presets for the prediction-accuracy, topology and end-to-end
//! experiments, and CSV output.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{ConfigError, SimError};
use crate::graph::{LinkGraph, WeightedEdge};
use crate::mobility::{DeathCause, History, LinkLifetimeRecord, Pair, World};
use crate::model::{NodeId, ScenarioConfig, Vec2};
use crate::prediction::{
    calibrate_zeta, fit_quadratic, predict_link, HorizonObservation, PredictionParams, QuadFit,
    ZetaEstimate,
};
use crate::routing::{run_flows, Flow, FlowParams, FlowSummary, Metric, TopologySchedule};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::stats::{aggregate, median, pearson, Summary};
use crate::topology::{
    build_topology, check_connectivity, check_symmetry, edge_weight, spanner_factor, stats,
    widest_paths_local, LocalGraph,
};

pub const CONFIDENCE: f64 = 0.95;

type TrialGetter = fn(&TrialOutput) -> f64;

/// Link graph of every currently usable link, weighted from predictions.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub tick: u64,
    pub original: LinkGraph,
    /// PCTC result over `original`.
    pub reduced: LinkGraph,
    pub one_sided: usize,
}

/// Predicts every link alive at `tick` from the three samples ending there.
/// Prediction failures (only possible with noisy samples) yield `t_a = 0`.
pub fn predicted_graph(
    history: &History,
    cfg: &ScenarioConfig,
    tick: u64,
    mut noise: Option<&mut ChaCha8Rng>,
) -> Result<LinkGraph, SimError> {
    let n = history.n_nodes;
    let t = history.time(tick);
    let times = [t - 2.0 * cfg.sample_spacing, t - cfg.sample_spacing, t];
    let params = PredictionParams::from_config(cfg);
    let mut fit = |pair: Pair| -> Result<Option<QuadFit>, SimError> {
        let noise = match noise.as_deref_mut() {
            Some(rng) if cfg.noise_std > 0.0 => Some((cfg.noise_std, rng)),
            _ => None,
        };
        let samples = history.sample_distances(pair, times, noise)?;
        Ok(fit_quadratic(&samples).ok())
    };
    let n_pu = history.primary_users.len();
    let mut pu_fits: Vec<Vec<Option<QuadFit>>> = Vec::with_capacity(n);
    for u in 0..n {
        let mut row = Vec::with_capacity(n_pu);
        for j in 0..n_pu {
            row.push(fit(Pair::NodePu(u, j))?);
        }
        pu_fits.push(row);
    }
    let mut g = LinkGraph::new(n);
    for u in 0..n {
        for v in u + 1..n {
            if !history.link_alive(u, v, tick, cfg.tx_range) {
                continue;
            }
            let pair_fit = fit(Pair::Nodes(u, v))?;
            let ends: Option<Vec<[QuadFit; 2]>> = (0..n_pu)
                .map(|j| Some([pu_fits[u][j]?, pu_fits[v][j]?]))
                .collect();
            let t_a = match (pair_fit, ends) {
                (Some(pf), Some(ends)) => {
                    let inside = vec![[false, false]; n_pu];
                    predict_link(&pf, &ends, &inside, &params)
                        .map(|p| p.t_a)
                        .unwrap_or(0.0)
                }
                _ => 0.0,
            };
            g.add_edge(WeightedEdge {
                u,
                v,
                w: edge_weight(t_a, cfg.rate, cfg.delta, cfg.sim_duration),
                r: cfg.rate,
                t_a,
            });
        }
    }
    Ok(g)
}

/// Ticks at which topology control runs: the first once three samples
/// exist, then every `topology_period`.
pub fn refresh_ticks(history: &History, cfg: &ScenarioConfig) -> Vec<u64> {
    let first = (2.0 * cfg.sample_spacing / cfg.time_step).round() as u64;
    let period = ((cfg.topology_period / cfg.time_step).round() as u64).max(1);
    (0..)
        .map(|k| first + k * period)
        .take_while(|&t| t <= history.last_tick())
        .collect()
}

pub fn simulate_world(cfg: &ScenarioConfig, seed: u64) -> Result<History, SimError> {
    Ok(World::new(cfg, seed)?.simulate(cfg.total_ticks()))
}

pub fn snapshots(
    history: &History,
    cfg: &ScenarioConfig,
    seed: u64,
) -> Result<Vec<Snapshot>, SimError> {
    let mut noise = stream_rng(seed, Stream::Measurement, 0);
    refresh_ticks(history, cfg)
        .into_iter()
        .map(|tick| {
            let original = predicted_graph(history, cfg, tick, Some(&mut noise))?;
            let topo = build_topology(&original);
            Ok(Snapshot {
                tick,
                one_sided: topo.one_sided.len(),
                reduced: topo.graph,
                original,
            })
        })
        .collect()
}

/// Index of lifetime records by link for residual-lifetime lookups.
struct LifetimeIndex<'a> {
    by_link: HashMap<(NodeId, NodeId), Vec<&'a LinkLifetimeRecord>>,
}

impl<'a> LifetimeIndex<'a> {
    fn new(records: &'a [LinkLifetimeRecord]) -> Self {
        let mut by_link: HashMap<_, Vec<_>> = HashMap::new();
        for r in records {
            by_link.entry((r.u, r.v)).or_default().push(r);
        }
        Self { by_link }
    }

    /// The lifetime covering time `t`, if the link is alive then.
    fn covering(&self, u: NodeId, v: NodeId, t: f64) -> Option<&'a LinkLifetimeRecord> {
        let eps = 1e-9;
        self.by_link
            .get(&(u.min(v), u.max(v)))?
            .iter()
            .copied()
            .find(|r| r.birth <= t + eps && (t < r.death - eps || r.cause == DeathCause::SimEnd))
    }
}

/// One point of the predicted-vs-real duration scatter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionPair {
    pub u: NodeId,
    pub v: NodeId,
    pub t_pred: f64,
    pub t_a: f64,
    /// Real residual lifetime from `t_pred`.
    pub t_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TopologyKind {
    Original,
    Pctc,
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TopologyKind::Original => "original",
            TopologyKind::Pctc => "pctc",
        })
    }
}

pub const ROUTING_COMBOS: [(Metric, TopologyKind); 4] = [
    (Metric::ShortestPath, TopologyKind::Original),
    (Metric::ShortestPath, TopologyKind::Pctc),
    (Metric::ReliablePath, TopologyKind::Original),
    (Metric::ReliablePath, TopologyKind::Pctc),
];

/// Per-trial topology figures, each averaged over refresh snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TopologyRow {
    pub avg_degree_before: f64,
    pub avg_degree_after: f64,
    pub max_degree_before: f64,
    pub max_degree_after: f64,
    /// Mean capped `t_a` over all original links.
    pub mean_ta_all: f64,
    /// Mean capped `t_a` over links kept by PCTC.
    pub mean_ta_kept: f64,
    /// Mean real residual lifetime of original links at refresh time.
    pub duration_before: f64,
    pub duration_after: f64,
    pub one_sided: usize,
    pub connectivity_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingRow {
    pub metric: Metric,
    pub topology: TopologyKind,
    pub flows: Vec<FlowSummary>,
}

impl RoutingRow {
    pub fn reroutes(&self) -> usize {
        self.flows.iter().map(|f| f.reroutes).sum()
    }

    pub fn mean_throughput(&self) -> f64 {
        self.flows.iter().map(|f| f.throughput_proxy).sum::<f64>() / self.flows.len().max(1) as f64
    }

    pub fn mean_delay(&self) -> f64 {
        let finite: Vec<f64> = self
            .flows
            .iter()
            .map(|f| f.delay_proxy_ms)
            .filter(|d| d.is_finite())
            .collect();
        if finite.is_empty() {
            f64::INFINITY
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        }
    }

    pub fn downtime(&self) -> f64 {
        self.flows.iter().map(|f| f.downtime_s).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutput {
    pub sweep_value: f64,
    pub trial: usize,
    pub seed: u64,
    pub predictions: Vec<PredictionPair>,
    pub horizons: Vec<HorizonObservation>,
    pub topology: TopologyRow,
    pub routing: Vec<RoutingRow>,
}

/// What a trial computes beyond the shared simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialPlan {
    pub predictions: bool,
    pub topology: bool,
    pub routing: bool,
}

impl TrialPlan {
    pub const ALL: TrialPlan = TrialPlan {
        predictions: true,
        topology: true,
        routing: true,
    };
}

fn random_flows(cfg: &ScenarioConfig, seed: u64) -> Vec<(NodeId, NodeId)> {
    if cfg.n_nodes < 2 {
        return Vec::new();
    }
    let mut rng = stream_rng(seed, Stream::Flows, 0);
    (0..cfg.n_flows)
        .map(|_| {
            let src = rng.random_range(0..cfg.n_nodes);
            let mut dst = rng.random_range(0..cfg.n_nodes - 1);
            if dst >= src {
                dst += 1;
            }
            (src, dst)
        })
        .collect()
}

pub fn run_trial(
    cfg: &ScenarioConfig,
    seed: u64,
    sweep_value: f64,
    trial: usize,
    plan: TrialPlan,
) -> Result<TrialOutput, SimError> {
    let history = simulate_world(cfg, seed)?;
    let snaps = snapshots(&history, cfg, seed)?;
    let records = history.record_lifetimes(cfg.tx_range);
    let index = LifetimeIndex::new(&records);
    let cap = cfg.sim_duration;
    let end = history.end_time();

    let mut predictions = Vec::new();
    let mut horizons = Vec::new();
    if plan.predictions {
        let mut used: HashMap<(NodeId, NodeId, u64), ()> = HashMap::new();
        let params = PredictionParams::from_config(cfg);
        for s in &snaps {
            let t = history.time(s.tick);
            for e in s.original.edges() {
                let Some(rec) = index.covering(e.u, e.v, t) else { continue };
                if rec.cause != DeathCause::SimEnd
                    && used.insert((e.u, e.v, rec.birth.to_bits()), ()).is_none()
                {
                    predictions.push(PredictionPair {
                        u: e.u,
                        v: e.v,
                        t_pred: t,
                        t_a: e.t_a,
                        t_r: rec.death - t,
                    });
                }
                // Mobility-only horizon for the empirical ζ estimate.
                let times = [t - 2.0 * cfg.sample_spacing, t - cfg.sample_spacing, t];
                let Ok(samples) = history.sample_distances(Pair::Nodes(e.u, e.v), times, None) else {
                    continue;
                };
                let Ok(fit) = fit_quadratic(&samples) else { continue };
                let Ok(t_p) = crate::prediction::solve_crossing(
                    &fit,
                    params.range,
                    crate::prediction::CrossingMode::Exit,
                ) else {
                    continue;
                };
                let at = t + t_p;
                if t_p.is_finite() && at <= end {
                    let Ok(k) = history.tick_of((at / cfg.time_step).round() * cfg.time_step) else {
                        continue;
                    };
                    let changed = history.velocity_changed_between(e.u, t, at)
                        || history.velocity_changed_between(e.v, t, at);
                    let survived = index
                        .covering(e.u, e.v, t)
                        .is_some_and(|r| r.death >= history.time(k) || r.cause == DeathCause::SimEnd);
                    horizons.push(HorizonObservation {
                        horizon: t_p,
                        velocity_changed: changed,
                        survived,
                    });
                }
            }
        }
    }

    let mut topology = TopologyRow {
        connectivity_ok: true,
        ..Default::default()
    };
    if plan.topology && !snaps.is_empty() {
        let mut ta_all = Vec::new();
        let mut ta_kept = Vec::new();
        let mut dur_all = Vec::new();
        let mut dur_kept = Vec::new();
        for s in &snaps {
            let t = history.time(s.tick);
            let topo = crate::topology::Topology {
                graph: s.reduced.clone(),
                rule: Default::default(),
                one_sided: Vec::new(),
            };
            let st = stats(&s.original, &topo);
            topology.avg_degree_before += st.avg_degree_before;
            topology.avg_degree_after += st.avg_degree_after;
            topology.max_degree_before += st.max_degree_before as f64;
            topology.max_degree_after += st.max_degree_after as f64;
            topology.one_sided += s.one_sided;
            topology.connectivity_ok &= check_connectivity(&s.original, &topo);
            for e in s.original.edges() {
                let kept = s.reduced.has_edge(e.u, e.v);
                let ta = e.t_a.min(cap);
                let dur = index.covering(e.u, e.v, t).map_or(0.0, |r| r.death - t);
                ta_all.push(ta);
                dur_all.push(dur);
                if kept {
                    ta_kept.push(ta);
                    dur_kept.push(dur);
                }
            }
        }
        let k = snaps.len() as f64;
        topology.avg_degree_before /= k;
        topology.avg_degree_after /= k;
        topology.max_degree_before /= k;
        topology.max_degree_after /= k;
        let mean = |v: &[f64]| {
            if v.is_empty() {
                0.0
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        topology.mean_ta_all = mean(&ta_all);
        topology.mean_ta_kept = mean(&ta_kept);
        topology.duration_before = mean(&dur_all);
        topology.duration_after = mean(&dur_kept);
    }

    let mut routing = Vec::new();
    if plan.routing && !snaps.is_empty() {
        let mut original = TopologySchedule::new();
        let mut reduced = TopologySchedule::new();
        for s in &snaps {
            original.push(s.tick, s.original.clone());
            reduced.push(s.tick, s.reduced.clone());
        }
        let start = history.time(snaps[0].tick);
        let pairs = random_flows(cfg, seed);
        let params = FlowParams {
            range: cfg.tx_range,
            delta: cfg.delta,
            per_hop_delay_ms: cfg.per_hop_delay_ms,
        };
        for (metric, kind) in ROUTING_COMBOS {
            let flows: Vec<Flow> = pairs
                .iter()
                .enumerate()
                .map(|(id, &(src, dst))| Flow {
                    id,
                    src,
                    dst,
                    start,
                    end,
                    metric,
                })
                .collect();
            let schedule = match kind {
                TopologyKind::Original => &original,
                TopologyKind::Pctc => &reduced,
            };
            let run = run_flows(&history, &flows, schedule, params);
            routing.push(RoutingRow {
                metric,
                topology: kind,
                flows: run.summaries,
            });
        }
    }

    Ok(TrialOutput {
        sweep_value,
        trial,
        seed,
        predictions,
        horizons,
        topology,
        routing,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    Fig2Prediction,
    Fig3Topology,
    Fig4EndToEnd,
    PropertiesSuite,
}

impl FromStr for PresetName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "fig2_prediction" => PresetName::Fig2Prediction,
            "fig3_topology" => PresetName::Fig3Topology,
            "fig4_endtoend" => PresetName::Fig4EndToEnd,
            "properties_suite" => PresetName::PropertiesSuite,
            other => return Err(format!("unknown preset `{other}`")),
        })
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PresetName::Fig2Prediction => "fig2_prediction",
            PresetName::Fig3Topology => "fig3_topology",
            PresetName::Fig4EndToEnd => "fig4_endtoend",
            PresetName::PropertiesSuite => "properties_suite",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    NNodes(Vec<usize>),
    VMax(Vec<f64>),
}

impl Sweep {
    fn key(&self) -> &'static str {
        match self {
            Sweep::NNodes(_) => "n_nodes",
            Sweep::VMax(_) => "v_max",
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            Sweep::NNodes(v) => v.iter().map(|&x| x as f64).collect(),
            Sweep::VMax(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPreset {
    pub name: PresetName,
    /// `key = value` overrides applied on top of the base config.
    pub overrides: Vec<(String, String)>,
    pub trials: usize,
    pub sweep: Option<Sweep>,
}

impl ExperimentPreset {
    pub fn standard(name: PresetName) -> Self {
        let (trials, sweep) = match name {
            PresetName::Fig2Prediction => (10, None),
            PresetName::Fig3Topology => (100, Some(Sweep::NNodes(vec![20, 40, 60]))),
            PresetName::Fig4EndToEnd => (100, Some(Sweep::VMax(vec![5.0, 10.0, 15.0, 20.0]))),
            PresetName::PropertiesSuite => (200, None),
        };
        Self {
            name,
            overrides: Vec::new(),
            trials,
            sweep,
        }
    }

    fn plan(&self) -> TrialPlan {
        TrialPlan {
            predictions: self.name == PresetName::Fig2Prediction,
            topology: self.name == PresetName::Fig3Topology,
            routing: self.name == PresetName::Fig4EndToEnd,
        }
    }
}

/// Resolves the preset against `base` and checks the result.
pub fn resolve_config(preset: &ExperimentPreset, base: &ScenarioConfig) -> Result<ScenarioConfig, SimError> {
    let mut cfg = base.clone();
    for (k, v) in &preset.overrides {
        cfg.set(k, v)?;
    }
    let violations = cfg.validate();
    if !violations.is_empty() {
        return Err(ConfigError::Invalid(violations).into());
    }
    if preset.trials == 0 {
        return Err(ConfigError::BadValue {
            line: 0,
            key: "trials".into(),
            reason: "must be >= 1".into(),
        }
        .into());
    }
    Ok(cfg)
}

/// Everything a preset run produced.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub preset: ExperimentPreset,
    pub config: ScenarioConfig,
    pub trials: Vec<TrialOutput>,
    pub properties: Vec<PropertyRow>,
}

impl MetricsReport {
    pub fn sweep_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.trials.iter().map(|t| t.sweep_value).collect();
        v.dedup();
        v
    }

    pub fn trials_at(&self, sweep_value: f64) -> impl Iterator<Item = &TrialOutput> + '_ {
        self.trials.iter().filter(move |t| t.sweep_value == sweep_value)
    }

    pub fn prediction_pairs(&self) -> Vec<PredictionPair> {
        self.trials.iter().flat_map(|t| t.predictions.iter().copied()).collect()
    }

    /// Pearson correlation between predicted and real durations.
    pub fn prediction_correlation(&self) -> f64 {
        let p = self.prediction_pairs();
        let ta: Vec<f64> = p.iter().map(|x| x.t_a.min(self.config.sim_duration)).collect();
        let tr: Vec<f64> = p.iter().map(|x| x.t_r).collect();
        pearson(&ta, &tr)
    }

    pub fn median_prediction_error(&self) -> f64 {
        let d: Vec<f64> = self
            .prediction_pairs()
            .iter()
            .map(|x| x.t_a.min(self.config.sim_duration) - x.t_r)
            .collect();
        median(&d)
    }

    pub fn zeta_estimate(&self) -> Option<ZetaEstimate> {
        let all: Vec<HorizonObservation> =
            self.trials.iter().flat_map(|t| t.horizons.iter().copied()).collect();
        calibrate_zeta(&all).ok()
    }

    /// Aggregate of `f` over the trials of one sweep point.
    pub fn summarize(&self, sweep_value: f64, f: impl Fn(&TrialOutput) -> f64) -> Summary {
        let rows: Vec<f64> = self.trials_at(sweep_value).map(f).collect();
        aggregate(&rows, CONFIDENCE)
    }

    pub fn write_outputs(&self, dir: &Path) -> Result<(), SimError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("manifest.txt"), self.manifest())?;
        match self.preset.name {
            PresetName::Fig2Prediction => self.write_fig2(dir),
            PresetName::Fig3Topology => self.write_fig3(dir),
            PresetName::Fig4EndToEnd => self.write_fig4(dir),
            PresetName::PropertiesSuite => self.write_properties(dir),
        }
    }

    pub fn manifest(&self) -> String {
        let sweep = match &self.preset.sweep {
            Some(s) => format!(
                "{} = {}",
                s.key(),
                s.values().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
            ),
            None => "none".to_string(),
        };
        format!(
            "preset: {}\ntrials: {}\nsweep: {}\ncrate_version: {}\n\n{}",
            self.preset.name,
            self.preset.trials,
            sweep,
            env!("CARGO_PKG_VERSION"),
            self.config.to_kv_string()
        )
    }

    fn write_fig2(&self, dir: &Path) -> Result<(), SimError> {
        let mut wr = csv::Writer::from_path(dir.join("predictions.csv"))?;
        wr.write_record(["trial", "u", "v", "t_pred", "t_a", "t_r"])?;
        for t in &self.trials {
            for p in &t.predictions {
                wr.write_record([
                    t.trial.to_string(),
                    p.u.to_string(),
                    p.v.to_string(),
                    p.t_pred.to_string(),
                    p.t_a.to_string(),
                    p.t_r.to_string(),
                ])?;
            }
        }
        wr.flush()?;
        let mut wr = csv::Writer::from_path(dir.join("prediction_summary.csv"))?;
        wr.write_record(["pairs", "pearson", "median_ta_minus_tr", "zeta_hat", "zeta_lo", "zeta_hi", "zeta_n"])?;
        let z = self.zeta_estimate();
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        wr.write_record([
            self.prediction_pairs().len().to_string(),
            self.prediction_correlation().to_string(),
            self.median_prediction_error().to_string(),
            opt(z.map(|z| z.zeta)),
            opt(z.map(|z| z.lower)),
            opt(z.map(|z| z.upper)),
            opt(z.map(|z| z.count as f64)),
        ])?;
        wr.flush()?;
        Ok(())
    }

    fn write_fig3(&self, dir: &Path) -> Result<(), SimError> {
        let mut wr = csv::Writer::from_path(dir.join("topology_trials.csv"))?;
        wr.write_record([
            "n_nodes",
            "trial",
            "avg_degree_before",
            "avg_degree_after",
            "max_degree_before",
            "max_degree_after",
            "mean_ta_all",
            "mean_ta_kept",
            "duration_before",
            "duration_after",
            "one_sided",
            "connectivity_ok",
        ])?;
        for t in &self.trials {
            let r = &t.topology;
            wr.write_record([
                t.sweep_value.to_string(),
                t.trial.to_string(),
                r.avg_degree_before.to_string(),
                r.avg_degree_after.to_string(),
                r.max_degree_before.to_string(),
                r.max_degree_after.to_string(),
                r.mean_ta_all.to_string(),
                r.mean_ta_kept.to_string(),
                r.duration_before.to_string(),
                r.duration_after.to_string(),
                r.one_sided.to_string(),
                r.connectivity_ok.to_string(),
            ])?;
        }
        wr.flush()?;
        let metrics: [(&str, TrialGetter); 8] = [
            ("avg_degree_before", |t| t.topology.avg_degree_before),
            ("avg_degree_after", |t| t.topology.avg_degree_after),
            ("max_degree_before", |t| t.topology.max_degree_before),
            ("max_degree_after", |t| t.topology.max_degree_after),
            ("mean_ta_all", |t| t.topology.mean_ta_all),
            ("mean_ta_kept", |t| t.topology.mean_ta_kept),
            ("duration_before", |t| t.topology.duration_before),
            ("duration_after", |t| t.topology.duration_after),
        ];
        self.write_summary(dir, "topology_summary.csv", "n_nodes", &metrics)
    }

    fn write_fig4(&self, dir: &Path) -> Result<(), SimError> {
        let mut wr = csv::Writer::from_path(dir.join("flows.csv"))?;
        wr.write_record([
            "v_max",
            "trial",
            "topology",
            "flow",
            "metric",
            "reroutes",
            "downtime_s",
            "throughput_proxy",
            "delay_proxy_ms",
            "hops_initial",
        ])?;
        for t in &self.trials {
            for row in &t.routing {
                for f in &row.flows {
                    wr.write_record([
                        t.sweep_value.to_string(),
                        t.trial.to_string(),
                        row.topology.to_string(),
                        f.flow.to_string(),
                        f.metric.to_string(),
                        f.reroutes.to_string(),
                        f.downtime_s.to_string(),
                        f.throughput_proxy.to_string(),
                        f.delay_proxy_ms.to_string(),
                        f.hops_initial.map(|h| h.to_string()).unwrap_or_default(),
                    ])?;
                }
            }
        }
        wr.flush()?;
        let mut wr = csv::Writer::from_path(dir.join("routing_summary.csv"))?;
        wr.write_record(["v_max", "metric", "topology", "quantity", "mean", "ci_half_width", "n"])?;
        for sv in self.sweep_values() {
            for (i, (metric, kind)) in ROUTING_COMBOS.iter().enumerate() {
                type Getter = fn(&RoutingRow) -> f64;
                let quantities: [(&str, Getter); 4] = [
                    ("reroutes", |r| r.reroutes() as f64),
                    ("throughput_proxy", RoutingRow::mean_throughput),
                    ("delay_proxy_ms", RoutingRow::mean_delay),
                    ("downtime_s", RoutingRow::downtime),
                ];
                for (name, get) in quantities {
                    let rows: Vec<f64> = self
                        .trials_at(sv)
                        .filter_map(|t| t.routing.get(i).map(get))
                        .filter(|x| x.is_finite())
                        .collect();
                    let s = aggregate(&rows, CONFIDENCE);
                    wr.write_record([
                        sv.to_string(),
                        metric.to_string(),
                        kind.to_string(),
                        name.to_string(),
                        s.mean.to_string(),
                        s.half_width.map(|h| h.to_string()).unwrap_or_default(),
                        s.n.to_string(),
                    ])?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }

    fn write_summary(
        &self,
        dir: &Path,
        file: &str,
        sweep_key: &str,
        metrics: &[(&str, TrialGetter)],
    ) -> Result<(), SimError> {
        let mut wr = csv::Writer::from_path(dir.join(file))?;
        wr.write_record([sweep_key, "quantity", "mean", "ci_half_width", "n"])?;
        for sv in self.sweep_values() {
            for (name, get) in metrics {
                let s = self.summarize(sv, get);
                wr.write_record([
                    sv.to_string(),
                    name.to_string(),
                    s.mean.to_string(),
                    s.half_width.map(|h| h.to_string()).unwrap_or_default(),
                    s.n.to_string(),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    fn write_properties(&self, dir: &Path) -> Result<(), SimError> {
        let mut wr = csv::Writer::from_path(dir.join("properties.csv"))?;
        wr.write_record([
            "graph",
            "n",
            "edges",
            "kept_edges",
            "connectivity_ok",
            "symmetry_ok",
            "one_sided",
            "pairs_checked",
            "spanner_ok",
        ])?;
        for p in &self.properties {
            wr.write_record([
                p.graph.to_string(),
                p.n.to_string(),
                p.edges.to_string(),
                p.kept_edges.to_string(),
                p.connectivity_ok.to_string(),
                p.symmetry_ok.to_string(),
                p.one_sided.to_string(),
                p.pairs_checked.to_string(),
                p.spanner_ok.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Runs every trial of a preset (in parallel) and collects the results in
/// sweep-then-trial order.
pub fn run_preset(preset: &ExperimentPreset, base: &ScenarioConfig) -> Result<MetricsReport, SimError> {
    let cfg = resolve_config(preset, base)?;
    if preset.name == PresetName::PropertiesSuite {
        let max_nodes = cfg.n_nodes.max(5);
        let properties = properties_suite(preset.trials, max_nodes, &cfg);
        return Ok(MetricsReport {
            preset: preset.clone(),
            config: cfg,
            trials: Vec::new(),
            properties,
        });
    }
    let points: Vec<(usize, f64, ScenarioConfig)> = match &preset.sweep {
        None => vec![(0, f64::NAN, cfg.clone())],
        Some(sweep) => sweep
            .values()
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                let mut c = cfg.clone();
                c.set(sweep.key(), &v.to_string())?;
                let violations = c.validate();
                if !violations.is_empty() {
                    return Err(SimError::from(ConfigError::Invalid(violations)));
                }
                Ok((i, v, c))
            })
            .collect::<Result<_, _>>()?,
    };
    let jobs: Vec<(usize, f64, &ScenarioConfig, usize)> = points
        .iter()
        .flat_map(|(i, v, c)| (0..preset.trials).map(move |t| (*i, *v, c, t)))
        .collect();
    let plan = preset.plan();
    let trials = jobs
        .par_iter()
        .map(|&(point, value, c, trial)| {
            let seed = derive_seed(c.rng_seed, Stream::Trial, ((point as u64) << 32) | trial as u64);
            run_trial(c, seed, value, trial, plan)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MetricsReport {
        preset: preset.clone(),
        config: cfg,
        trials,
        properties: Vec::new(),
    })
}

/// Uniform node positions with links between pairs within `range` and
/// i.i.d. weights in (0, 1].
pub fn random_geometric_graph<R: Rng>(
    n: usize,
    width: f64,
    height: f64,
    range: f64,
    rng: &mut R,
) -> (Vec<Vec2>, LinkGraph) {
    let pts: Vec<Vec2> = (0..n)
        .map(|_| Vec2::new(rng.random_range(0.0..=width), rng.random_range(0.0..=height)))
        .collect();
    let mut g = LinkGraph::new(n);
    for u in 0..n {
        for v in u + 1..n {
            if pts[u].dist(pts[v]) <= range {
                let w = 1.0 - rng.random::<f64>();
                g.add_edge(WeightedEdge::new(u, v, w));
            }
        }
    }
    (pts, g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyRow {
    pub graph: usize,
    pub n: usize,
    pub edges: usize,
    pub kept_edges: usize,
    pub connectivity_ok: bool,
    pub symmetry_ok: bool,
    /// Links on which the two endpoints' own decisions disagreed.
    pub one_sided: usize,
    pub pairs_checked: usize,
    pub spanner_ok: bool,
}

impl PropertyRow {
    pub fn ok(&self) -> bool {
        self.connectivity_ok && self.symmetry_ok && self.spanner_ok
    }
}

/// Generates `graphs` random geometric graphs with `n ∈ [5, max_nodes]` in
/// the configured area and range, and checks connectivity, symmetry and the
/// unit spanner factor on every connected pair.
pub fn properties_suite(graphs: usize, max_nodes: usize, cfg: &ScenarioConfig) -> Vec<PropertyRow> {
    (0..graphs)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.rng_seed, Stream::Weights, i as u64);
            let n = rng.random_range(5..=max_nodes.max(5));
            let (_, g) = random_geometric_graph(n, cfg.area_width, cfg.area_height, cfg.tx_range, &mut rng);
            let t = build_topology(&g);
            let comps = g.components();
            let mut pairs = 0;
            let mut spanner_ok = true;
            for u in 0..n {
                for v in u + 1..n {
                    if comps[u] == comps[v] {
                        pairs += 1;
                        spanner_ok &= spanner_factor(&g, &t, u, v).is_ok_and(|s| s == 1.0);
                    }
                }
            }
            PropertyRow {
                graph: i,
                n,
                edges: g.edge_count(),
                kept_edges: t.graph.edge_count(),
                connectivity_ok: check_connectivity(&g, &t),
                symmetry_ok: check_symmetry(&g, &t),
                one_sided: t.one_sided.len() / 2 + t.one_sided.len() % 2,
                pairs_checked: pairs,
                spanner_ok,
            }
        })
        .collect()
}

/// Complete graph on a center (id 0) and `n` neighbors with i.i.d.
/// Uniform(0, 1) weights.
pub fn complete_local_graph<R: Rng>(n: usize, rng: &mut R) -> LinkGraph {
    let mut g = LinkGraph::new(n + 1);
    for u in 0..=n {
        for v in u + 1..=n {
            g.add_edge(WeightedEdge::new(u, v, rng.random::<f64>()));
        }
    }
    g
}

/// Empirical mean of `φ / n` for the center of complete local graphs.
pub fn control_intensity_trials(n: usize, trials: usize, seed: u64) -> f64 {
    let total: f64 = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, Stream::Weights, i as u64);
            let g = complete_local_graph(n, &mut rng);
            let r = widest_paths_local(&LocalGraph::extract(&g, 0));
            r.preserved.len() as f64 / n as f64
        })
        .sum();
    total / trials as f64
}

/// Per-sweep-point mean of a trial quantity, for quick reporting.
pub fn means_by_sweep(report: &MetricsReport, f: impl Fn(&TrialOutput) -> f64) -> BTreeMap<String, f64> {
    report
        .sweep_values()
        .into_iter()
        .map(|v| (v.to_string(), report.summarize(v, &f).mean))
        .collect()
}
