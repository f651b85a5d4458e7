//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use pctc::graph::LinkGraph;
use pctc::mobility::History;
use pctc::model::{ScenarioConfig, Vec2};
use pctc::prediction::{
    availability_probability, fit_quadratic, solve_crossing, CrossingMode, DistanceSample,
};
use pctc::rng::{stream_rng, Stream};
use pctc::routing::{find_route, Metric};
use pctc::sim::{
    control_intensity_trials, predicted_graph, random_geometric_graph, refresh_ticks, run_preset,
    simulate_world, ExperimentPreset, PresetName, Sweep, CONFIDENCE,
};
use pctc::stats::aggregate;
use pctc::topology::{
    build_topology, check_connectivity, check_symmetry, control_intensity_formula, spanner_factor,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within_budget(elapsed: Duration, budget_s: f64) -> (bool, String) {
    let s = elapsed.as_secs_f64();
    (s < budget_s, format!("runtime {s:.2}s (< {budget_s}s)"))
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn quadratic_fit_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = stream_rng(101, Stream::Measurement, 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let t0 = rng.random_range(0.0..1000.0);
        let t1 = t0 + rng.random_range(0.01..10.0);
        let t2 = t1 + rng.random_range(0.01..10.0);
        let d = [
            rng.random_range(0.0..1000.0),
            rng.random_range(0.0..1000.0),
            rng.random_range(0.0..1000.0),
        ];
        let samples = [
            DistanceSample { t: t0, d: d[0] },
            DistanceSample { t: t1, d: d[1] },
            DistanceSample { t: t2, d: d[2] },
        ];
        let fit = fit_quadratic(&samples).expect("valid triple");
        for (s, &di) in samples.iter().zip(&d) {
            let want = di * di;
            let got = fit.eval(s.t - t0);
            let err = (got - want).abs() / want.max(1.0);
            worst = worst.max(err);
        }
    }
    let (fast, time) = within_budget(start.elapsed(), 1.0);
    outcome(worst <= 1e-9 && fast, format!("max rel err {worst:.2e}; {time}"))
}

/// First time `t > 0` (from the third sample) at which `|p + v t| = r`
/// along the requested direction, from the straight-line geometry.
fn circle_crossing(p: Vec2, v: Vec2, r: f64, mode: CrossingMode) -> f64 {
    let a = v.dot(v);
    let b = 2.0 * p.dot(v);
    let c = p.dot(p) - r * r;
    let disc = b * b - 4.0 * a * c;
    if a == 0.0 || disc < 0.0 {
        return f64::INFINITY;
    }
    let sq = disc.sqrt();
    match mode {
        CrossingMode::Exit => ((-b + sq) / (2.0 * a)).max(0.0),
        CrossingMode::Entry => {
            let t = (-b - sq) / (2.0 * a);
            if t >= 0.0 {
                t
            } else {
                f64::INFINITY
            }
        }
    }
}

fn crossing_from_samples(p2: Vec2, v: Vec2, spacing: f64, r: f64, mode: CrossingMode) -> f64 {
    let samples = [0, 1, 2].map(|k| {
        let t = k as f64 * spacing;
        DistanceSample {
            t,
            d: (p2 + v * (t - 2.0 * spacing)).norm(),
        }
    });
    let fit = fit_quadratic(&samples).expect("fit");
    solve_crossing(&fit, r, mode).expect("precondition holds")
}

fn kinematics_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = stream_rng(202, Stream::NodeMotion, 0);
    let (range, rho, spacing) = (300.0, 50.0, 1.0);
    let mut worst_exit = 0.0f64;
    let mut worst_entry = 0.0f64;
    let mut mismatched = 0;
    let mut entries = 0;
    for _ in 0..500 {
        let speed = rng.random_range(0.5..40.0);
        let v = Vec2::from_polar(speed, rng.random_range(0.0..std::f64::consts::TAU));
        // Exit: relative position inside the range at the newest sample.
        let p = Vec2::from_polar(
            rng.random_range(0.0..0.99) * range,
            rng.random_range(0.0..std::f64::consts::TAU),
        );
        let got = crossing_from_samples(p, v, spacing, range, CrossingMode::Exit);
        let want = circle_crossing(p, v, range, CrossingMode::Exit);
        worst_exit = worst_exit.max((got - want).abs());

        // Entry: node outside the PU disc, aimed near its center.
        let q = Vec2::from_polar(
            rng.random_range(1.05..6.0) * rho,
            rng.random_range(0.0..std::f64::consts::TAU),
        );
        let aim = Vec2::from_polar(
            rng.random_range(0.0..1.5) * rho,
            rng.random_range(0.0..std::f64::consts::TAU),
        );
        let u = (aim - q) * (speed / (aim - q).norm());
        let got = crossing_from_samples(q, u, spacing, rho, CrossingMode::Entry);
        let want = circle_crossing(q, u, rho, CrossingMode::Entry);
        if want.is_finite() {
            entries += 1;
            worst_entry = worst_entry.max((got - want).abs());
        } else if got.is_finite() {
            mismatched += 1;
        }
    }
    let (fast, time) = within_budget(start.elapsed(), 1.0);
    outcome(
        worst_exit <= 1e-6 && worst_entry <= 1e-6 && mismatched == 0 && entries > 0 && fast,
        format!(
            "max |err| exit {worst_exit:.2e}s, entry {worst_entry:.2e}s over {entries} entries, \
             {mismatched} spurious entries; {time}"
        ),
    )
}

fn availability_values() -> Outcome {
    let l60 = availability_probability(60.0, 1.0 / 60.0, 0.0, 0.5);
    let l0 = availability_probability(0.0, 1.0 / 60.0, 0.0, 0.5);
    let linf = availability_probability(f64::INFINITY, 1.0 / 60.0, 0.0, 0.5);
    outcome(
        (l60 - 0.68394).abs() <= 1e-5 && l0 == 1.0 && linf == 0.5,
        format!("L(60) = {l60:.6}, L(0) = {l0}, L(inf) = {linf}"),
    )
}

fn intensity_formula_values() -> Outcome {
    let got = [1, 2, 4].map(|n| control_intensity_formula(n).unwrap());
    outcome(
        got == [1.0, 0.75, 25.0 / 48.0],
        format!("n=1: {}, n=2: {}, n=4: {}", got[0], got[1], got[2]),
    )
}

/// Best bottleneck over every simple path from `s` to `t`.
fn brute_force_bottleneck(g: &LinkGraph, s: usize, t: usize) -> Option<f64> {
    fn dfs(g: &LinkGraph, u: usize, t: usize, w: f64, seen: &mut [bool], best: &mut Option<f64>) {
        if u == t {
            *best = Some(best.map_or(w, |b: f64| b.max(w)));
            return;
        }
        for (v, e) in g.incident(u) {
            if !seen[v] {
                seen[v] = true;
                dfs(g, v, t, w.min(e.w), seen, best);
                seen[v] = false;
            }
        }
    }
    let mut seen = vec![false; g.node_count()];
    seen[s] = true;
    let mut best = None;
    dfs(g, s, t, f64::INFINITY, &mut seen, &mut best);
    best
}

fn properties_suite() -> Outcome {
    let start = Instant::now();
    let graphs = 200;
    let mut connectivity = 0;
    let mut symmetry = 0;
    let mut one_sided_graphs = 0;
    let mut small = 0;
    let mut spanner_fail = 0;
    let mut pairs = 0;
    for i in 0..graphs {
        let mut rng = stream_rng(303, Stream::Weights, i as u64);
        // Cover small graphs densely so the exhaustive oracle sees many.
        let n = if i % 2 == 0 {
            rng.random_range(5..=10)
        } else {
            rng.random_range(5..=30)
        };
        let (_, g) = random_geometric_graph(n, 500.0, 500.0, 300.0, &mut rng);
        let t = build_topology(&g);
        connectivity += check_connectivity(&g, &t) as usize;
        symmetry += check_symmetry(&g, &t) as usize;
        one_sided_graphs += !t.one_sided.is_empty() as usize;
        if n <= 10 {
            small += 1;
            for u in 0..n {
                for v in u + 1..n {
                    let Some(best) = brute_force_bottleneck(&g, u, v) else { continue };
                    pairs += 1;
                    let kept = brute_force_bottleneck(&t.graph, u, v).unwrap_or(0.0);
                    let factor = spanner_factor(&g, &t, u, v).unwrap();
                    if !rel_close(kept, best, 1e-12) || factor != 1.0 {
                        spanner_fail += 1;
                    }
                }
            }
        }
    }
    let (fast, time) = within_budget(start.elapsed(), 120.0);
    outcome(
        connectivity == graphs && symmetry == graphs && spanner_fail == 0 && small > 0 && fast,
        format!(
            "connectivity {connectivity}/{graphs}, symmetry {symmetry}/{graphs}, spanner \
             failures {spanner_fail}/{pairs} pairs on {small} graphs with n<=10 \
             (raw per-node decisions disagreed on {one_sided_graphs} graphs); {time}"
        ),
    )
}

fn control_intensity() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [5, 10, 20] {
        let got = control_intensity_trials(n, 2000, 404 + n as u64);
        let want = control_intensity_formula(n).unwrap();
        pass &= (got - want).abs() <= 0.05;
        parts.push(format!("n={n}: {got:.3} vs H(n)/n {want:.3}"));
    }
    let (fast, time) = within_budget(start.elapsed(), 30.0);
    outcome(pass && fast, format!("{}; {time}", parts.join(", ")))
}

fn topology_trend() -> Outcome {
    let start = Instant::now();
    let preset = ExperimentPreset {
        name: PresetName::Fig3Topology,
        overrides: Vec::new(),
        trials: 30,
        sweep: Some(Sweep::NNodes(vec![20, 40, 60])),
    };
    let report = run_preset(&preset, &ScenarioConfig::default()).expect("preset runs");
    let mut pass = true;
    let mut parts = Vec::new();
    for n in report.sweep_values() {
        let avg_b = report.summarize(n, |t| t.topology.avg_degree_before);
        let avg_a = report.summarize(n, |t| t.topology.avg_degree_after);
        let max_b = report.summarize(n, |t| t.topology.max_degree_before);
        let max_a = report.summarize(n, |t| t.topology.max_degree_after);
        let below = |b: &pctc::stats::Summary, a: &pctc::stats::Summary| {
            a.mean < b.mean && (a.disjoint(b) || b.mean - a.mean > 0.5)
        };
        let trials: Vec<_> = report.trials_at(n).collect();
        let ta_ok = trials
            .iter()
            .filter(|t| t.topology.mean_ta_kept >= t.topology.mean_ta_all)
            .count();
        let frac = ta_ok as f64 / trials.len() as f64;
        pass &= below(&avg_b, &avg_a) && below(&max_b, &max_a) && frac >= 0.9;
        parts.push(format!(
            "n={n}: avg {:.2}->{:.2}, max {:.2}->{:.2}, T_a kept>=all {:.0}%",
            avg_b.mean,
            avg_a.mean,
            max_b.mean,
            max_a.mean,
            frac * 100.0
        ));
    }
    let (fast, time) = within_budget(start.elapsed(), 300.0);
    outcome(pass && fast, format!("{}; {time}", parts.join("; ")))
}

fn prediction_trend() -> Outcome {
    let preset = ExperimentPreset::standard(PresetName::Fig2Prediction);
    let report = run_preset(&preset, &ScenarioConfig::default()).expect("preset runs");
    let pairs = report.prediction_pairs().len();
    let r = report.prediction_correlation();
    let med = report.median_prediction_error();
    let zeta = report
        .zeta_estimate()
        .map(|z| format!("{:.3} [{:.3}, {:.3}]", z.zeta, z.lower, z.upper))
        .unwrap_or_else(|| "n/a".into());
    outcome(
        pairs >= 300 && r > 0.3,
        format!("{pairs} lifetimes, pearson {r:.3}, median(T_a - T_r) {med:.2}s, empirical zeta {zeta}"),
    )
}

fn routing_corollary() -> Outcome {
    let mut checked = 0;
    let mut mismatches = 0;
    for i in 0..100u64 {
        let cfg = ScenarioConfig {
            rng_seed: 500 + i,
            sim_duration: 10.0,
            ..ScenarioConfig::default()
        };
        let history: History = simulate_world(&cfg, cfg.rng_seed).expect("simulates");
        let tick = refresh_ticks(&history, &cfg)[0];
        let mut noise: Option<&mut ChaCha8Rng> = None;
        let g = predicted_graph(&history, &cfg, tick, noise.take()).expect("predicts");
        let t = build_topology(&g);
        let mut rng = stream_rng(cfg.rng_seed, Stream::Flows, 0);
        for _ in 0..20 {
            let s = rng.random_range(0..cfg.n_nodes);
            let d = rng.random_range(0..cfg.n_nodes);
            if s == d {
                continue;
            }
            let before = find_route(&g, s, d, Metric::ReliablePath).map(|p| p.weight);
            let after = find_route(&t.graph, s, d, Metric::ReliablePath).map(|p| p.weight);
            checked += 1;
            mismatches += (before != after) as usize;
        }
    }
    outcome(
        mismatches == 0 && checked > 0,
        format!("{mismatches} mismatches over {checked} pairs in 100 scenarios"),
    )
}

fn routing_trend() -> Outcome {
    let start = Instant::now();
    let preset = ExperimentPreset {
        trials: 100,
        ..ExperimentPreset::standard(PresetName::Fig4EndToEnd)
    };
    let report = run_preset(&preset, &ScenarioConfig::default()).expect("preset runs");
    // Combos are ordered SP/original, SP/pctc, RPTa/original, RPTa/pctc.
    let (sp_orig, rpta_pctc) = (0, 3);
    let total = report.trials.len();
    let fewer = report
        .trials
        .iter()
        .filter(|t| t.routing[rpta_pctc].reroutes() <= t.routing[sp_orig].reroutes())
        .count();
    let frac = fewer as f64 / total as f64;
    let mut per_v = BTreeMap::new();
    for v in report.sweep_values() {
        let trials: Vec<_> = report.trials_at(v).collect();
        let k = trials
            .iter()
            .filter(|t| t.routing[rpta_pctc].reroutes() <= t.routing[sp_orig].reroutes())
            .count();
        per_v.insert(v.to_string(), format!("{}%", 100 * k / trials.len()));
    }
    let tp = |combo: usize| {
        let rows: Vec<f64> = report
            .trials_at(20.0)
            .map(|t| t.routing[combo].mean_throughput())
            .collect();
        aggregate(&rows, CONFIDENCE)
    };
    let (a, b) = (tp(rpta_pctc), tp(sp_orig));
    let throughput_ok = a.mean > b.mean && a.disjoint(&b);
    let (fast, time) = within_budget(start.elapsed(), 600.0);
    outcome(
        frac >= 0.7 && throughput_ok && fast,
        format!(
            "reroutes RPTa/pctc <= SP/original in {:.0}% of {total} trials {per_v:?}; \
             throughput at v_max=20: {:.4} +- {:.4} vs {:.4} +- {:.4}; {time}",
            frac * 100.0,
            a.mean,
            a.half_width.unwrap_or(f64::NAN),
            b.mean,
            b.half_width.unwrap_or(f64::NAN),
        ),
    )
}

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn determinism() -> Outcome {
    let presets = [
        ExperimentPreset {
            trials: 2,
            ..ExperimentPreset::standard(PresetName::Fig2Prediction)
        },
        ExperimentPreset {
            trials: 3,
            sweep: Some(Sweep::NNodes(vec![20, 30])),
            ..ExperimentPreset::standard(PresetName::Fig3Topology)
        },
        ExperimentPreset {
            trials: 3,
            sweep: Some(Sweep::VMax(vec![5.0, 20.0])),
            ..ExperimentPreset::standard(PresetName::Fig4EndToEnd)
        },
        ExperimentPreset {
            trials: 20,
            ..ExperimentPreset::standard(PresetName::PropertiesSuite)
        },
    ];
    let cfg = ScenarioConfig {
        sim_duration: 60.0,
        noise_std: 0.5,
        ..ScenarioConfig::default()
    };
    let mut identical = 0;
    let mut files = 0;
    for preset in &presets {
        let runs: Vec<_> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().unwrap();
                run_preset(preset, &cfg).unwrap().write_outputs(dir.path()).unwrap();
                read_dir_bytes(dir.path())
            })
            .collect();
        files += runs[0].len();
        identical += (runs[0] == runs[1] && !runs[0].is_empty()) as usize;
    }
    outcome(
        identical == presets.len(),
        format!("{identical}/{} presets byte-identical ({files} files)", presets.len()),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 11] = [
        ("quadratic fit exactness", quadratic_fit_exactness),
        ("kinematics oracle", kinematics_oracle),
        ("availability probability values", availability_values),
        ("control intensity formula values", intensity_formula_values),
        ("connectivity, symmetry and spanner properties", properties_suite),
        ("empirical control intensity", control_intensity),
        ("degree reduction and link duration trend", topology_trend),
        ("prediction accuracy trend", prediction_trend),
        ("reliable path weight preserved", routing_corollary),
        ("end-to-end re-route and throughput trend", routing_trend),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        failed += !o.pass as usize;
        println!(
            "criterion {:>2} {}: {name}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
