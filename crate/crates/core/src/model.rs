//! Shared domain types and scenario configuration.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use crate::error::ConfigError;

pub type NodeId = usize;
pub type PuId = usize;

/// A point or displacement in the plane, in meters (or m/s for velocities).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(radius: f64, angle: f64) -> Self {
        Self::new(radius * angle.cos(), radius * angle.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

/// Kinematic state of one cognitive user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeState {
    pub id: NodeId,
    pub pos: Vec2,
    pub vel: Vec2,
    /// Seconds left in the current mobility epoch. `f64::INFINITY` pins the
    /// velocity forever, which hand-built scenarios use.
    pub epoch_remaining: f64,
}

/// A stationary licensed transmitter and its protected disc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimaryUser {
    pub id: PuId,
    pub pos: Vec2,
    /// Interference boundary radius in meters.
    pub rho: f64,
}

impl PrimaryUser {
    /// True when `p` is on or inside the interference boundary.
    pub fn covers(&self, p: Vec2) -> bool {
        self.pos.dist(p) <= self.rho
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryPolicy {
    #[default]
    Reflect,
    Wrap,
}

impl fmt::Display for BoundaryPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryPolicy::Reflect => "reflect",
            BoundaryPolicy::Wrap => "wrap",
        })
    }
}

impl FromStr for BoundaryPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "reflect" => Ok(BoundaryPolicy::Reflect),
            "wrap" => Ok(BoundaryPolicy::Wrap),
            other => Err(format!("expected `reflect` or `wrap`, got `{other}`")),
        }
    }
}

/// Everything a trial needs. Units are meters, seconds and Mb/s throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub area_width: f64,
    pub area_height: f64,
    pub n_nodes: usize,
    pub primary_users: Vec<PrimaryUser>,
    pub v_max: f64,
    /// Epoch rate; the mean epoch is `1 / lambda`.
    pub lambda: f64,
    pub tx_range: f64,
    pub rate: f64,
    /// Re-routing penalty.
    pub delta: f64,
    pub tau: f64,
    pub zeta: f64,
    pub sample_spacing: f64,
    pub topology_period: f64,
    pub sim_duration: f64,
    pub rng_seed: u64,
    pub boundary_policy: BoundaryPolicy,
    /// Ground-truth integration step.
    pub time_step: f64,
    /// Standard deviation of additive Gaussian distance noise.
    pub noise_std: f64,
    pub n_flows: usize,
    pub per_hop_delay_ms: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            area_width: 500.0,
            area_height: 500.0,
            n_nodes: 30,
            primary_users: vec![
                PrimaryUser {
                    id: 0,
                    pos: Vec2::new(125.0, 375.0),
                    rho: 50.0,
                },
                PrimaryUser {
                    id: 1,
                    pos: Vec2::new(375.0, 125.0),
                    rho: 50.0,
                },
            ],
            v_max: 10.0,
            lambda: 1.0 / 60.0,
            tx_range: 300.0,
            rate: 2.0,
            delta: 1.0,
            tau: 0.0,
            zeta: 0.5,
            sample_spacing: 1.0,
            topology_period: 5.0,
            sim_duration: 300.0,
            rng_seed: 1,
            boundary_policy: BoundaryPolicy::Reflect,
            time_step: 0.1,
            noise_std: 0.0,
            n_flows: 5,
            per_hop_delay_ms: 5.0,
        }
    }
}

/// One failed invariant of a [`ScenarioConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

const KEYS: &[&str] = &[
    "area_width",
    "area_height",
    "n_nodes",
    "primary_users",
    "v_max",
    "lambda",
    "tx_range",
    "rate",
    "delta",
    "tau",
    "zeta",
    "sample_spacing",
    "topology_period",
    "sim_duration",
    "rng_seed",
    "boundary_policy",
    "time_step",
    "noise_std",
    "n_flows",
    "per_hop_delay_ms",
];

impl ScenarioConfig {
    /// Checks every invariant and reports each failure by field name.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut check = |ok: bool, field: &str, message: &str| {
            if !ok {
                out.push(Violation {
                    field: field.to_string(),
                    message: message.to_string(),
                });
            }
        };
        let pos = |v: f64| v.is_finite() && v > 0.0;
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;

        check(pos(self.area_width), "area_width", "must be > 0");
        check(pos(self.area_height), "area_height", "must be > 0");
        check(nonneg(self.v_max), "v_max", "must be >= 0");
        check(pos(self.lambda), "lambda", "must be > 0");
        check(pos(self.tx_range), "tx_range", "must be > 0");
        check(pos(self.rate), "rate", "must be > 0");
        check(nonneg(self.delta), "delta", "must be >= 0");
        check(nonneg(self.tau), "tau", "must be >= 0");
        check(
            (0.0..=1.0).contains(&self.zeta),
            "zeta",
            "must lie in [0, 1]",
        );
        check(pos(self.sample_spacing), "sample_spacing", "must be > 0");
        check(pos(self.topology_period), "topology_period", "must be > 0");
        check(pos(self.sim_duration), "sim_duration", "must be > 0");
        check(pos(self.time_step), "time_step", "must be > 0");
        check(nonneg(self.noise_std), "noise_std", "must be >= 0");
        check(nonneg(self.per_hop_delay_ms), "per_hop_delay_ms", "must be >= 0");
        if pos(self.time_step) && pos(self.sample_spacing) {
            check(
                on_grid(self.sample_spacing, self.time_step),
                "sample_spacing",
                "must be a whole multiple of time_step",
            );
        }
        if pos(self.time_step) && pos(self.topology_period) {
            check(
                on_grid(self.topology_period, self.time_step),
                "topology_period",
                "must be a whole multiple of time_step",
            );
        }
        for (i, pu) in self.primary_users.iter().enumerate() {
            check(
                pu.rho.is_finite() && pu.rho > 0.0,
                &format!("primary_users[{i}].rho"),
                "must be > 0",
            );
            check(
                pu.pos.is_finite(),
                &format!("primary_users[{i}].pos"),
                "must be finite",
            );
        }
        out
    }

    pub fn mean_epoch(&self) -> f64 {
        1.0 / self.lambda
    }

    /// Number of integration ticks covering `sim_duration`.
    pub fn total_ticks(&self) -> u64 {
        (self.sim_duration / self.time_step).round() as u64
    }

    /// Parses `key = value` lines on top of the defaults. Blank lines and
    /// `#` comments are skipped.
    pub fn from_kv_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ScenarioConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax {
                line: idx + 1,
                text: raw.to_string(),
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| match e {
                    ConfigError::BadValue { key, reason, .. } => ConfigError::BadValue {
                        line: idx + 1,
                        key,
                        reason,
                    },
                    ConfigError::UnknownKey { key, .. } => {
                        ConfigError::UnknownKey { line: idx + 1, key }
                    }
                    other => other,
                })?;
        }
        Ok(cfg)
    }

    /// Applies a single override; used both by the file parser and the CLI.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: fmt::Display,
        {
            value.parse::<T>().map_err(|e| ConfigError::BadValue {
                line: 0,
                key: key.to_string(),
                reason: e.to_string(),
            })
        }
        match key {
            "area_width" => self.area_width = num(key, value)?,
            "area_height" => self.area_height = num(key, value)?,
            "n_nodes" => self.n_nodes = num(key, value)?,
            "primary_users" => self.primary_users = parse_primary_users(value)?,
            "v_max" => self.v_max = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "tx_range" => self.tx_range = num(key, value)?,
            "rate" => self.rate = num(key, value)?,
            "delta" => self.delta = num(key, value)?,
            "tau" => self.tau = num(key, value)?,
            "zeta" => self.zeta = num(key, value)?,
            "sample_spacing" => self.sample_spacing = num(key, value)?,
            "topology_period" => self.topology_period = num(key, value)?,
            "sim_duration" => self.sim_duration = num(key, value)?,
            "rng_seed" => self.rng_seed = num(key, value)?,
            "boundary_policy" => self.boundary_policy = num(key, value)?,
            "time_step" => self.time_step = num(key, value)?,
            "noise_std" => self.noise_std = num(key, value)?,
            "n_flows" => self.n_flows = num(key, value)?,
            "per_hop_delay_ms" => self.per_hop_delay_ms = num(key, value)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line: 0,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Renders the config in the same `key = value` format `from_kv_str` reads.
    pub fn to_kv_string(&self) -> String {
        let pus = self
            .primary_users
            .iter()
            .map(|p| format!("{}:{}:{}", p.pos.x, p.pos.y, p.rho))
            .collect::<Vec<_>>()
            .join(";");
        let values: [String; 20] = [
            self.area_width.to_string(),
            self.area_height.to_string(),
            self.n_nodes.to_string(),
            pus,
            self.v_max.to_string(),
            self.lambda.to_string(),
            self.tx_range.to_string(),
            self.rate.to_string(),
            self.delta.to_string(),
            self.tau.to_string(),
            self.zeta.to_string(),
            self.sample_spacing.to_string(),
            self.topology_period.to_string(),
            self.sim_duration.to_string(),
            self.rng_seed.to_string(),
            self.boundary_policy.to_string(),
            self.time_step.to_string(),
            self.noise_std.to_string(),
            self.n_flows.to_string(),
            self.per_hop_delay_ms.to_string(),
        ];
        KEYS.iter()
            .zip(values.iter())
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

fn on_grid(value: f64, step: f64) -> bool {
    let k = (value / step).round();
    k >= 1.0 && (k * step - value).abs() <= 1e-9 * value.max(1.0)
}

/// `x:y:rho` entries separated by `;`. An empty value means no PUs.
fn parse_primary_users(value: &str) -> Result<Vec<PrimaryUser>, ConfigError> {
    let bad = |reason: String| ConfigError::BadValue {
        line: 0,
        key: "primary_users".to_string(),
        reason,
    };
    value
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .enumerate()
        .map(|(id, entry)| {
            let parts: Vec<&str> = entry.split(':').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(bad(format!("`{entry}` is not x:y:rho")));
            }
            let mut nums = [0.0; 3];
            for (slot, part) in nums.iter_mut().zip(&parts) {
                *slot = part
                    .parse()
                    .map_err(|e| bad(format!("`{part}`: {e}")))?;
            }
            Ok(PrimaryUser {
                id,
                pos: Vec2::new(nums[0], nums[1]),
                rho: nums[2],
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let cfg = ScenarioConfig::default();
        assert!(cfg.validate().is_empty());
        assert_eq!(cfg.area_width, 500.0);
        assert_eq!(cfg.mean_epoch(), 60.0);
        assert_eq!(cfg.tx_range, 300.0);
        assert_eq!(cfg.rate, 2.0);
    }

    #[test]
    fn zero_rho_is_reported() {
        let mut cfg = ScenarioConfig::default();
        cfg.primary_users[1].rho = 0.0;
        let v = cfg.validate();
        assert_eq!(v.len(), 1);
        assert!(v[0].field.contains("rho"));
    }

    #[test]
    fn zeta_out_of_range_is_reported() {
        let cfg = ScenarioConfig {
            zeta: 1.5,
            ..Default::default()
        };
        let v = cfg.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "zeta");
    }

    #[test]
    fn kv_round_trip() {
        let mut cfg = ScenarioConfig {
            n_nodes: 17,
            boundary_policy: BoundaryPolicy::Wrap,
            ..Default::default()
        };
        cfg.primary_users.truncate(1);
        let back = ScenarioConfig::from_kv_str(&cfg.to_kv_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = ScenarioConfig::from_kv_str("v_max = 3\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { line: 2, .. }));
    }

    #[test]
    fn empty_primary_users() {
        let cfg = ScenarioConfig::from_kv_str("primary_users =\n").unwrap();
        assert!(cfg.primary_users.is_empty());
    }

    #[test]
    fn misaligned_spacing() {
        let cfg = ScenarioConfig {
            sample_spacing: 0.25,
            ..Default::default()
        };
        assert_eq!(cfg.validate()[0].field, "sample_spacing");
    }
}
