//! Cognitive link-availability prediction.
//!
//! Under constant velocities the squared distance between two points is a
//! quadratic in time, `d² = αT² + βT + γ`, recovered exactly from three
//! samples. Its crossings of the transmission range (exit) and of each PU
//! interference radius (entry) give the predicted horizons, each weighted by
//! the probability that no velocity change invalidates it. The link's
//! available duration is the minimum of those weighted horizons.

use crate::error::PredictionError;

/// Tiny negative `alpha` values below this magnitude are rounding noise.
pub const EPS_FIT: f64 = 1e-9;

/// Relative slack used when deciding which side of a boundary a pair is on.
const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceSample {
    pub t: f64,
    pub d: f64,
}

/// Coefficients of the squared-distance quadratic in a timebase with `t_0 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadFit {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Time of the last sample, `t_2 - t_0`.
    pub t2_offset: f64,
}

impl QuadFit {
    pub fn eval(&self, t: f64) -> f64 {
        (self.alpha * t + self.beta) * t + self.gamma
    }

    /// Squared distance at the newest sample.
    pub fn current(&self) -> f64 {
        self.eval(self.t2_offset)
    }
}

/// Interpolates the three squared distances exactly (Newton divided
/// differences on the shifted timebase).
pub fn fit_quadratic(samples: &[DistanceSample; 3]) -> Result<QuadFit, PredictionError> {
    let times = [samples[0].t, samples[1].t, samples[2].t];
    if !(times[0] < times[1] && times[1] < times[2]) {
        return Err(PredictionError::SampleTimes(times));
    }
    if let Some(s) = samples.iter().find(|s| s.d.is_nan() || s.d < 0.0) {
        return Err(PredictionError::NegativeDistance(s.d));
    }
    let s1 = times[1] - times[0];
    let s2 = times[2] - times[0];
    let [y0, y1, y2] = samples.map(|s| s.d * s.d);
    let f01 = (y1 - y0) / s1;
    let f12 = (y2 - y1) / (s2 - s1);
    let mut alpha = (f12 - f01) / s2;
    if alpha < 0.0 && alpha > -EPS_FIT {
        alpha = 0.0;
    }
    let beta = f01 - alpha * s1;
    Ok(QuadFit {
        alpha,
        beta,
        gamma: y0,
        t2_offset: s2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingMode {
    /// Leaving a disc the pair is currently inside (range `R`).
    Exit,
    /// Entering a disc the node is currently outside (PU radius `ρ`).
    Entry,
}

impl CrossingMode {
    fn name(self) -> &'static str {
        match self {
            CrossingMode::Exit => "exit",
            CrossingMode::Entry => "entry",
        }
    }
}

/// Real roots of `a x² + b x + c`, ascending. A double root appears once.
fn real_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b == 0.0 { vec![] } else { vec![-c / b] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    if disc == 0.0 {
        return vec![-b / (2.0 * a)];
    }
    // f64::signum(0.0) is 1.0, so q is never zero here.
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let (r1, r2) = (q / a, c / q);
    if r1 <= r2 {
        vec![r1, r2]
    } else {
        vec![r2, r1]
    }
}

/// Time from `t_2` until the fitted trajectory crosses `radius`, or
/// infinity if it never does. Results are clamped at 0.
pub fn solve_crossing(fit: &QuadFit, radius: f64, mode: CrossingMode) -> Result<f64, PredictionError> {
    let r2 = radius * radius;
    let c = fit.gamma - r2;
    let t2 = fit.t2_offset;
    let now = fit.current() - r2;
    let tol = BOUNDARY_TOL * r2.max(1.0);
    let precondition = |expected| PredictionError::Precondition {
        mode: mode.name(),
        radius,
        expected,
    };
    match mode {
        CrossingMode::Exit if now > tol => return Err(precondition("inside")),
        CrossingMode::Entry if now < -tol => return Err(precondition("outside")),
        _ => {}
    }
    let slope = |t: f64| 2.0 * fit.alpha * t + fit.beta;
    // Outward crossings have positive slope; inward ones non-positive, which
    // counts a tangential touch of the PU boundary as entering it.
    let crossings: Vec<f64> = real_roots(fit.alpha, fit.beta, c)
        .into_iter()
        .filter(|&t| match mode {
            CrossingMode::Exit => slope(t) > 0.0,
            CrossingMode::Entry => slope(t) <= 0.0,
        })
        .collect();
    if let Some(t) = crossings.iter().find(|&&t| t >= t2) {
        return Ok((t - t2).max(0.0));
    }
    // A crossing in the past while sitting (within tolerance) beyond the
    // boundary means the crossing is happening now.
    if crossings.iter().any(|&t| t < t2) && on_far_side(now, mode) {
        return Ok(0.0);
    }
    Ok(f64::INFINITY)
}

fn on_far_side(now: f64, mode: CrossingMode) -> bool {
    match mode {
        CrossingMode::Exit => now > 0.0,
        CrossingMode::Entry => now < 0.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionParams {
    pub lambda: f64,
    pub tau: f64,
    pub zeta: f64,
    /// Transmission range `R`.
    pub range: f64,
    /// Interference radius of each PU, indexed like the PU fits.
    pub rho: Vec<f64>,
}

impl PredictionParams {
    pub fn from_config(cfg: &crate::model::ScenarioConfig) -> Self {
        Self {
            lambda: cfg.lambda,
            tau: cfg.tau,
            zeta: cfg.zeta,
            range: cfg.tx_range,
            rho: cfg.primary_users.iter().map(|p| p.rho).collect(),
        }
    }
}

/// Probability that a predicted horizon is realized despite random
/// velocity changes: `e^{-λt} e^{-λτ} + ζ (1 - e^{-λt})`.
pub fn availability_probability(t_horizon: f64, lambda: f64, tau: f64, zeta: f64) -> f64 {
    if t_horizon == f64::INFINITY {
        return zeta;
    }
    let stay = (-lambda * t_horizon).exp();
    stay * (-lambda * tau).exp() + zeta * (1.0 - stay)
}

/// Horizon times probability, with `∞ · p = ∞` for `p > 0` and anything
/// times zero probability equal to zero.
pub fn weighted_horizon(t: f64, l: f64) -> f64 {
    if l == 0.0 || t == 0.0 {
        0.0
    } else {
        t * l
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PuHorizon {
    pub t_hat: f64,
    pub l_that: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkPrediction {
    pub t_p: f64,
    pub l_tp: f64,
    /// One entry per PU, holding the horizon of each link endpoint.
    pub pu: Vec<[PuHorizon; 2]>,
    pub t_a: f64,
}

impl LinkPrediction {
    /// Every candidate `t · L` that enters the minimum.
    pub fn components(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(weighted_horizon(self.t_p, self.l_tp)).chain(
            self.pu
                .iter()
                .flat_map(|ends| ends.iter().map(|h| weighted_horizon(h.t_hat, h.l_that))),
        )
    }
}

/// Combines the mobility horizon of the pair with the PU-entry horizon of
/// each endpoint for each PU. `inside[j][i]` marks endpoint `i` as already
/// inside PU `j`'s disc, which forces that horizon (and so `t_a`) to 0.
pub fn predict_link(
    pair_fit: &QuadFit,
    pu_fits: &[[QuadFit; 2]],
    inside: &[[bool; 2]],
    params: &PredictionParams,
) -> Result<LinkPrediction, PredictionError> {
    if pu_fits.len() != params.rho.len() || inside.len() != params.rho.len() {
        return Err(PredictionError::PuCountMismatch(
            pu_fits.len().min(inside.len()),
            params.rho.len(),
        ));
    }
    let prob = |t| availability_probability(t, params.lambda, params.tau, params.zeta);
    let t_p = solve_crossing(pair_fit, params.range, CrossingMode::Exit)?;
    let mut pu = Vec::with_capacity(pu_fits.len());
    for ((fits, flags), &rho) in pu_fits.iter().zip(inside).zip(&params.rho) {
        let mut ends = [PuHorizon {
            t_hat: 0.0,
            l_that: prob(0.0),
        }; 2];
        for i in 0..2 {
            if !flags[i] {
                let t_hat = solve_crossing(&fits[i], rho, CrossingMode::Entry)?;
                ends[i] = PuHorizon {
                    t_hat,
                    l_that: prob(t_hat),
                };
            }
        }
        pu.push(ends);
    }
    let mut out = LinkPrediction {
        t_p,
        l_tp: prob(t_p),
        pu,
        t_a: f64::INFINITY,
    };
    out.t_a = out.components().fold(f64::INFINITY, f64::min);
    Ok(out)
}

/// Outcome of one prediction, for estimating ζ empirically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonObservation {
    pub horizon: f64,
    /// Some endpoint drew a new velocity before the horizon elapsed.
    pub velocity_changed: bool,
    /// The link was still alive when the horizon elapsed.
    pub survived: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaEstimate {
    pub zeta: f64,
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

pub const ZETA_MIN_OBSERVATIONS: usize = 100;

/// Fraction of links that outlived their predicted horizon although a
/// velocity change happened first, with a 95% normal-approximation interval.
pub fn calibrate_zeta(observations: &[HorizonObservation]) -> Result<ZetaEstimate, PredictionError> {
    let qualifying: Vec<_> = observations
        .iter()
        .filter(|o| o.velocity_changed && o.horizon.is_finite())
        .collect();
    let n = qualifying.len();
    if n < ZETA_MIN_OBSERVATIONS {
        return Err(PredictionError::InsufficientData {
            have: n,
            need: ZETA_MIN_OBSERVATIONS,
        });
    }
    let p = qualifying.iter().filter(|o| o.survived).count() as f64 / n as f64;
    let half = 1.959_963_984_540_054 * (p * (1.0 - p) / n as f64).sqrt();
    Ok(ZetaEstimate {
        zeta: p,
        lower: (p - half).max(0.0),
        upper: (p + half).min(1.0),
        count: n,
    })
}
