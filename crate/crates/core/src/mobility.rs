//! Random-walk mobility with exponentially distributed epochs, the recorded
//! ground-truth trajectory, and the link-lifetime bookkeeping built on it.
//!
//! Each node owns its RNG stream. Epoch expiry inside an integration step is
//! handled by sub-stepping, so motion is exactly piecewise linear (up to wall
//! reflections, which flip a velocity component without starting an epoch).

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::MobilityError;
use crate::model::{BoundaryPolicy, NodeId, NodeState, PrimaryUser, ScenarioConfig, Vec2};
use crate::prediction::DistanceSample;
use crate::rng::{stream_rng, Stream};

const PLACEMENT_ATTEMPTS: usize = 100_000;

/// The subset of [`ScenarioConfig`] that drives motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionParams {
    pub width: f64,
    pub height: f64,
    pub v_max: f64,
    pub lambda: f64,
    pub boundary: BoundaryPolicy,
    pub time_step: f64,
}

impl From<&ScenarioConfig> for MotionParams {
    fn from(c: &ScenarioConfig) -> Self {
        Self {
            width: c.area_width,
            height: c.area_height,
            v_max: c.v_max,
            lambda: c.lambda,
            boundary: c.boundary_policy,
            time_step: c.time_step,
        }
    }
}

/// Draws a fresh epoch: heading ~ U[0, 2π), speed ~ U[0, v_max],
/// duration ~ Exp(λ).
pub fn draw_epoch<R: Rng + ?Sized>(rng: &mut R, v_max: f64, lambda: f64) -> (Vec2, f64) {
    let heading = rng.random_range(0.0..std::f64::consts::TAU);
    let speed = if v_max > 0.0 {
        rng.random_range(0.0..=v_max)
    } else {
        0.0
    };
    let epoch = Exp::new(lambda)
        .expect("lambda validated positive")
        .sample(rng);
    (Vec2::from_polar(speed, heading), epoch)
}

fn fold(mut x: f64, mut v: f64, limit: f64, policy: BoundaryPolicy) -> (f64, f64) {
    match policy {
        BoundaryPolicy::Wrap => (x.rem_euclid(limit), v),
        BoundaryPolicy::Reflect => {
            loop {
                if x < 0.0 {
                    x = -x;
                    v = -v;
                } else if x > limit {
                    x = 2.0 * limit - x;
                    v = -v;
                } else {
                    break;
                }
            }
            (x, v)
        }
    }
}

/// A live set of cognitive users advancing in time.
#[derive(Debug, Clone)]
pub struct World {
    pub params: MotionParams,
    pub nodes: Vec<NodeState>,
    pub primary_users: Vec<PrimaryUser>,
    rngs: Vec<ChaCha8Rng>,
    time: f64,
    /// Times at which each node drew a new epoch (excluding t = 0).
    epoch_changes: Vec<Vec<f64>>,
}

impl World {
    /// Places `n_nodes` uniformly over the area outside every PU disc and
    /// starts each on a fresh epoch.
    pub fn new(cfg: &ScenarioConfig, seed: u64) -> Result<Self, MobilityError> {
        let params = MotionParams::from(cfg);
        let mut place = stream_rng(seed, Stream::Placement, 0);
        let mut rngs: Vec<ChaCha8Rng> = (0..cfg.n_nodes)
            .map(|i| stream_rng(seed, Stream::NodeMotion, i as u64))
            .collect();
        let mut nodes = Vec::with_capacity(cfg.n_nodes);
        for (id, rng) in rngs.iter_mut().enumerate() {
            let pos = (0..PLACEMENT_ATTEMPTS)
                .map(|_| {
                    Vec2::new(
                        place.random_range(0.0..=params.width),
                        place.random_range(0.0..=params.height),
                    )
                })
                .find(|p| !cfg.primary_users.iter().any(|pu| pu.covers(*p)))
                .ok_or(MobilityError::PlacementFailed(id))?;
            let (vel, epoch) = draw_epoch(rng, params.v_max, params.lambda);
            nodes.push(NodeState {
                id,
                pos,
                vel,
                epoch_remaining: epoch,
            });
        }
        Ok(Self {
            params,
            epoch_changes: vec![Vec::new(); nodes.len()],
            nodes,
            primary_users: cfg.primary_users.clone(),
            rngs,
            time: 0.0,
        })
    }

    /// Builds a world from explicit states, for hand-made scenarios.
    pub fn from_states(
        params: MotionParams,
        nodes: Vec<NodeState>,
        primary_users: Vec<PrimaryUser>,
        seed: u64,
    ) -> Self {
        let rngs = (0..nodes.len())
            .map(|i| stream_rng(seed, Stream::NodeMotion, i as u64))
            .collect();
        Self {
            params,
            epoch_changes: vec![Vec::new(); nodes.len()],
            nodes,
            primary_users,
            rngs,
            time: 0.0,
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn epoch_changes(&self) -> &[Vec<f64>] {
        &self.epoch_changes
    }

    /// Advances every node by `dt` seconds.
    pub fn step(&mut self, dt: f64) {
        let p = self.params;
        let t0 = self.time;
        for ((node, rng), changes) in self
            .nodes
            .iter_mut()
            .zip(self.rngs.iter_mut())
            .zip(self.epoch_changes.iter_mut())
        {
            let mut left = dt;
            while left > 0.0 {
                let s = left.min(node.epoch_remaining);
                let moved = node.pos + node.vel * s;
                let (x, vx) = fold(moved.x, node.vel.x, p.width, p.boundary);
                let (y, vy) = fold(moved.y, node.vel.y, p.height, p.boundary);
                node.pos = Vec2::new(x, y);
                node.vel = Vec2::new(vx, vy);
                node.epoch_remaining -= s;
                left -= s;
                if node.epoch_remaining <= 0.0 {
                    let (vel, epoch) = draw_epoch(rng, p.v_max, p.lambda);
                    node.vel = vel;
                    node.epoch_remaining = epoch;
                    changes.push(t0 + (dt - left));
                }
            }
        }
        self.time += dt;
    }

    /// Runs `ticks` integration steps and returns the full trajectory,
    /// including the initial snapshot.
    pub fn simulate(mut self, ticks: u64) -> History {
        let n = self.nodes.len();
        let mut positions = Vec::with_capacity(n * (ticks as usize + 1));
        let mut velocities = Vec::with_capacity(n * (ticks as usize + 1));
        let mut snapshot = |w: &World| {
            positions.extend(w.nodes.iter().map(|s| s.pos));
            velocities.extend(w.nodes.iter().map(|s| s.vel));
        };
        snapshot(&self);
        for k in 1..=ticks {
            self.step(self.params.time_step);
            // Re-anchor to the tick grid so long runs don't drift.
            self.time = k as f64 * self.params.time_step;
            snapshot(&self);
        }
        History {
            time_step: self.params.time_step,
            n_nodes: n,
            ticks: ticks + 1,
            positions,
            velocities,
            primary_users: self.primary_users,
            epoch_changes: self.epoch_changes,
        }
    }
}

/// Ground-truth trajectory sampled every `time_step` seconds.
#[derive(Debug, Clone)]
pub struct History {
    pub time_step: f64,
    pub n_nodes: usize,
    /// Number of recorded snapshots (tick 0 inclusive).
    pub ticks: u64,
    positions: Vec<Vec2>,
    velocities: Vec<Vec2>,
    pub primary_users: Vec<PrimaryUser>,
    epoch_changes: Vec<Vec<f64>>,
}

/// What a distance is measured between.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pair {
    Nodes(NodeId, NodeId),
    NodePu(NodeId, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeathCause {
    RangeExit,
    PuInterference,
    SimEnd,
}

impl DeathCause {
    pub fn as_str(self) -> &'static str {
        match self {
            DeathCause::RangeExit => "range_exit",
            DeathCause::PuInterference => "pu_interference",
            DeathCause::SimEnd => "sim_end",
        }
    }
}

/// A maximal interval during which a link was usable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkLifetimeRecord {
    pub u: NodeId,
    pub v: NodeId,
    pub birth: f64,
    pub death: f64,
    pub cause: DeathCause,
}

impl LinkLifetimeRecord {
    pub fn duration(&self) -> f64 {
        self.death - self.birth
    }
}

impl History {
    pub fn time(&self, tick: u64) -> f64 {
        tick as f64 * self.time_step
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.ticks - 1)
    }

    pub fn last_tick(&self) -> u64 {
        self.ticks - 1
    }

    /// Maps a time onto the recorded grid.
    pub fn tick_of(&self, t: f64) -> Result<u64, MobilityError> {
        let k = (t / self.time_step).round();
        if k.is_nan() || k < 0.0 || k as u64 >= self.ticks {
            return Err(MobilityError::NotSimulated {
                t,
                end: self.end_time(),
            });
        }
        if (k * self.time_step - t).abs() > 1e-9 * t.abs().max(1.0) {
            return Err(MobilityError::OffGrid(t));
        }
        Ok(k as u64)
    }

    pub fn position(&self, node: NodeId, tick: u64) -> Vec2 {
        self.positions[tick as usize * self.n_nodes + node]
    }

    pub fn velocity(&self, node: NodeId, tick: u64) -> Vec2 {
        self.velocities[tick as usize * self.n_nodes + node]
    }

    pub fn epoch_changes(&self, node: NodeId) -> &[f64] {
        &self.epoch_changes[node]
    }

    /// True when `node` changed velocity (new epoch) in `(from, to]`.
    pub fn velocity_changed_between(&self, node: NodeId, from: f64, to: f64) -> bool {
        let c = &self.epoch_changes[node];
        let i = c.partition_point(|&t| t <= from);
        i < c.len() && c[i] <= to
    }

    pub fn distance(&self, pair: Pair, tick: u64) -> Result<f64, MobilityError> {
        match pair {
            Pair::Nodes(u, v) => {
                self.check_node(u)?;
                self.check_node(v)?;
                Ok(self.position(u, tick).dist(self.position(v, tick)))
            }
            Pair::NodePu(u, j) => {
                self.check_node(u)?;
                let pu = self
                    .primary_users
                    .get(j)
                    .ok_or(MobilityError::UnknownPrimaryUser(j))?;
                Ok(self.position(u, tick).dist(pu.pos))
            }
        }
    }

    fn check_node(&self, u: NodeId) -> Result<(), MobilityError> {
        if u < self.n_nodes {
            Ok(())
        } else {
            Err(MobilityError::UnknownNode(u))
        }
    }

    /// True when `node` is outside every PU interference disc.
    pub fn clear_of_pus(&self, node: NodeId, tick: u64) -> bool {
        let p = self.position(node, tick);
        !self.primary_users.iter().any(|pu| pu.covers(p))
    }

    /// Link predicate: within range and both endpoints clear of every PU.
    pub fn link_alive(&self, u: NodeId, v: NodeId, tick: u64, range: f64) -> bool {
        self.position(u, tick).dist(self.position(v, tick)) <= range
            && self.clear_of_pus(u, tick)
            && self.clear_of_pus(v, tick)
    }

    /// Three ground-truth distance measurements, optionally perturbed by
    /// zero-mean Gaussian noise (results are folded to stay nonnegative).
    pub fn sample_distances(
        &self,
        pair: Pair,
        times: [f64; 3],
        noise: Option<(f64, &mut ChaCha8Rng)>,
    ) -> Result<[DistanceSample; 3], MobilityError> {
        let spacing = times[1] - times[0];
        let tol = 1e-9 * spacing.abs().max(1.0);
        if spacing.is_nan() || spacing <= 0.0 || ((times[2] - times[1]) - spacing).abs() > tol {
            return Err(MobilityError::BadSampleTimes(times));
        }
        let mut out = [DistanceSample { t: 0.0, d: 0.0 }; 3];
        let mut noise = noise.filter(|(std, _)| *std > 0.0);
        for (slot, &t) in out.iter_mut().zip(times.iter()) {
            let tick = self.tick_of(t)?;
            let mut d = self.distance(pair, tick)?;
            if let Some((std, rng)) = noise.as_mut() {
                d = (d + Normal::new(0.0, *std).expect("finite std").sample(*rng)).abs();
            }
            *slot = DistanceSample { t, d };
        }
        Ok(out)
    }

    /// Scans the whole trajectory and returns every maximal alive interval,
    /// ordered by (birth, u, v).
    pub fn record_lifetimes(&self, range: f64) -> Vec<LinkLifetimeRecord> {
        let n = self.n_nodes;
        let mut open: Vec<Option<f64>> = vec![None; n * n];
        let mut out = Vec::new();
        let mut clear = vec![true; n];
        for tick in 0..self.ticks {
            let t = self.time(tick);
            for (u, c) in clear.iter_mut().enumerate() {
                *c = self.clear_of_pus(u, tick);
            }
            for u in 0..n {
                for v in u + 1..n {
                    let in_range = self.position(u, tick).dist(self.position(v, tick)) <= range;
                    let alive = in_range && clear[u] && clear[v];
                    let slot = &mut open[u * n + v];
                    match (*slot, alive) {
                        (None, true) => *slot = Some(t),
                        (Some(birth), false) => {
                            let cause = if !clear[u] || !clear[v] {
                                DeathCause::PuInterference
                            } else {
                                DeathCause::RangeExit
                            };
                            out.push(LinkLifetimeRecord {
                                u,
                                v,
                                birth,
                                death: t,
                                cause,
                            });
                            *slot = None;
                        }
                        _ => {}
                    }
                }
            }
        }
        let end = self.end_time();
        for u in 0..n {
            for v in u + 1..n {
                if let Some(birth) = open[u * n + v] {
                    out.push(LinkLifetimeRecord {
                        u,
                        v,
                        birth,
                        death: end,
                        cause: DeathCause::SimEnd,
                    });
                }
            }
        }
        out.sort_by(|a, b| {
            a.birth
                .total_cmp(&b.birth)
                .then(a.u.cmp(&b.u))
                .then(a.v.cmp(&b.v))
        });
        out
    }

    /// CSV rows `(t, node_id, x, y, vx, vy)` for every tick.
    pub fn write_trajectory_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "node_id", "x", "y", "vx", "vy"])?;
        for tick in 0..self.ticks {
            let t = self.time(tick);
            for u in 0..self.n_nodes {
                let p = self.position(u, tick);
                let v = self.velocity(u, tick);
                wr.write_record([
                    t.to_string(),
                    u.to_string(),
                    p.x.to_string(),
                    p.y.to_string(),
                    v.x.to_string(),
                    v.y.to_string(),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}
