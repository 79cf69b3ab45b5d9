//! Coin-tossing chain paths and their exit times.
//!
//! A chain is simulated on the grid `0, h, 2h, …` by `X_{(k+1)h} = X_{kh} ±
//! a_h(X_{kh})` with fair signs, then linearly interpolated. Accessible
//! boundaries are absorbing; a vanishing scale factor at an interior point
//! freezes the path for all later times. Hitting times distinguish a genuine
//! `+∞` (the path provably never reaches the level) from censoring at the
//! simulated horizon.

use crate::error::{Error, Result};
use crate::rng::CoinStream;
use crate::scale::ScaleFactorScheme;
use crate::space::{Boundary, StateSpace};

/// Hard cap on stored path length.
pub const MAX_PATH_STEPS: u64 = 100_000_000;

/// A time in `[0, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtendedTime(f64);

impl ExtendedTime {
    pub fn new(t: f64) -> Result<Self> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::domain(format!("extended time must be in [0, ∞], got {t}")));
        }
        Ok(ExtendedTime(t))
    }

    pub fn infinity() -> Self {
        ExtendedTime(f64::INFINITY)
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    pub fn is_infinite(&self) -> bool {
        self.0.is_infinite()
    }

    /// `t ↦ t/(1+t)` with `∞ ↦ 1`: the embedding behind the metric on `[0, ∞]`.
    pub fn compactify(&self) -> f64 {
        if self.0.is_infinite() {
            1.0
        } else {
            self.0 / (1.0 + self.0)
        }
    }
}

/// The metric `d(s, t) = |s/(1+s) − t/(1+t)|` on `[0, ∞]`, with values in `[0, 1]`.
pub fn compactified_distance(s: ExtendedTime, t: ExtendedTime) -> f64 {
    (s.compactify() - t.compactify()).abs()
}

/// Observation of a hitting time from a finite simulation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExitTime {
    /// The level was hit at this time.
    Finite(f64),
    /// The path provably never hits the level (absorbed elsewhere or frozen).
    Infinite,
    /// Simulation stopped at `horizon` without resolving the hit: the value
    /// is only known to exceed it.
    Censored { horizon: f64 },
}

impl ExitTime {
    /// The observation as a point of `[0, ∞]`, when it determines one.
    pub fn as_extended(&self) -> Option<ExtendedTime> {
        match self {
            ExitTime::Finite(t) => Some(ExtendedTime(*t)),
            ExitTime::Infinite => Some(ExtendedTime::infinity()),
            ExitTime::Censored { .. } => None,
        }
    }

    /// `min(value, cap)`; well defined for every observation with `cap` at or
    /// below the censoring horizon.
    pub fn truncated(&self, cap: f64) -> f64 {
        match self {
            ExitTime::Finite(t) => t.min(cap),
            ExitTime::Infinite => cap,
            ExitTime::Censored { .. } => cap,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExitTime::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            ExitTime::Finite(t) => Some(*t),
            _ => None,
        }
    }
}

/// A simulated chain path: grid values plus linear interpolation.
#[derive(Clone, Debug)]
pub struct ChainPath {
    space: StateSpace,
    h: f64,
    values: Vec<f64>,
    absorbed: Option<(Boundary, usize)>,
    frozen_from: Option<usize>,
}

impl ChainPath {
    /// Assemble a path from raw grid values (for constructed test paths and
    /// external ingestion). Values must be finite and inside the space.
    pub fn from_grid_values(
        space: StateSpace,
        h: f64,
        values: Vec<f64>,
        absorbed: Option<(Boundary, usize)>,
    ) -> Result<Self> {
        if !(h > 0.0) || values.is_empty() {
            return Err(Error::domain("need h > 0 and at least the starting value"));
        }
        if values.iter().any(|v| !v.is_finite() || !space.contains(*v)) {
            return Err(Error::domain("path values must be finite and inside the state space"));
        }
        Ok(ChainPath { space, h, values, absorbed, frozen_from: None })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn y0(&self) -> f64 {
        self.values[0]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    /// Boundary and step index of absorption, if absorbed.
    pub fn absorbed_at(&self) -> Option<(Boundary, usize)> {
        self.absorbed
    }

    /// Step index from which the path is constant at an interior point.
    pub fn frozen_from(&self) -> Option<usize> {
        self.frozen_from
    }

    /// Time covered by explicit grid values.
    pub fn covered_time(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.h
    }

    /// Whether the path is constant for all times past its last grid value.
    pub fn constant_past_horizon(&self) -> bool {
        self.absorbed.is_some() || self.frozen_from.is_some()
    }

    /// Exit-time observations `(lower, upper)` for the two boundaries.
    pub fn exit_times(&self) -> (ExitTime, ExitTime) {
        match self.absorbed {
            Some((Boundary::Lower, k)) => {
                (ExitTime::Finite(k as f64 * self.h), ExitTime::Infinite)
            }
            Some((Boundary::Upper, k)) => {
                (ExitTime::Infinite, ExitTime::Finite(k as f64 * self.h))
            }
            None => {
                if self.frozen_from.is_some() {
                    (ExitTime::Infinite, ExitTime::Infinite)
                } else {
                    let horizon = self.covered_time();
                    (ExitTime::Censored { horizon }, ExitTime::Censored { horizon })
                }
            }
        }
    }
}

/// Simulate a chain until absorption, an interior freeze, or `⌈T/h⌉` steps.
///
/// Deterministic in `(scheme, y0, h, horizon_t, seed)`; the path is driven
/// by the coin stream of path 0 of `seed`, so it coincides with the first
/// path of a Monte-Carlo run using `seed` as base seed.
pub fn simulate_chain(
    scheme: &ScaleFactorScheme,
    y0: f64,
    h: f64,
    horizon_t: f64,
    seed: u64,
) -> Result<ChainPath> {
    simulate_chain_from_stream(scheme, y0, h, horizon_t, CoinStream::for_path(seed, 0))
}

/// [`simulate_chain`] with an explicit coin stream.
pub(crate) fn simulate_chain_from_stream(
    scheme: &ScaleFactorScheme,
    y0: f64,
    h: f64,
    horizon_t: f64,
    mut stream: CoinStream,
) -> Result<ChainPath> {
    scheme.validate_h(h)?;
    if !scheme.space().contains_interior(y0) {
        return Err(Error::domain(format!("starting point {y0} is not interior")));
    }
    if !(horizon_t > 0.0) {
        return Err(Error::domain("horizon must be positive"));
    }
    let n_steps = (horizon_t / h).ceil() as u64;
    if n_steps > MAX_PATH_STEPS {
        return Err(Error::domain(format!(
            "horizon needs {n_steps} steps, above the cap of {MAX_PATH_STEPS}"
        )));
    }

    let mut values = Vec::with_capacity((n_steps + 1) as usize);
    values.push(y0);
    let mut absorbed = None;
    let mut frozen_from = None;
    let mut x = y0;

    for k in 0..n_steps {
        let a = scheme.scale_factor(h, x)?;
        if a == 0.0 {
            frozen_from = Some(k as usize);
            break;
        }
        let up = stream.next_coin();
        let next = if up { x + a } else { x - a };
        match classify_step(scheme.space(), x, a, next)? {
            StepOutcome::Interior(v) => {
                values.push(v);
                x = v;
            }
            StepOutcome::Absorbed(boundary, v) => {
                values.push(v);
                absorbed = Some((boundary, (k + 1) as usize));
                break;
            }
        }
    }

    Ok(ChainPath { space: scheme.space().clone(), h, values, absorbed, frozen_from })
}

pub(crate) enum StepOutcome {
    Interior(f64),
    Absorbed(Boundary, f64),
}

/// Classify a proposed step, snapping floating-point residue at an absorbing
/// boundary and rejecting genuine departures from the state space.
pub(crate) fn classify_step(
    space: &StateSpace,
    x: f64,
    a: f64,
    next: f64,
) -> Result<StepOutcome> {
    let l = space.l();
    let r = space.r();
    let snap = 16.0 * f64::EPSILON * (x.abs() + a).max(1.0);
    if next <= l {
        if next < l - snap || !space.lower_included() {
            return Err(Error::SchemeIntegrity(format!(
                "step from {x} with radius {a} leaves the state space at {next}"
            )));
        }
        return Ok(StepOutcome::Absorbed(Boundary::Lower, l));
    }
    if next >= r {
        if next > r + snap || !space.upper_included() {
            return Err(Error::SchemeIntegrity(format!(
                "step from {x} with radius {a} leaves the state space at {next}"
            )));
        }
        return Ok(StepOutcome::Absorbed(Boundary::Upper, r));
    }
    Ok(StepOutcome::Interior(next))
}

/// Value of the interpolated path at time `t`.
///
/// Exact at grid points; past the horizon the value is the constant
/// absorption/freeze level when one exists, an error otherwise.
pub fn path_value(path: &ChainPath, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("time must be nonnegative, got {t}")));
    }
    let covered = path.covered_time();
    if t > covered {
        if path.constant_past_horizon() {
            return Ok(*path.values.last().unwrap());
        }
        return Err(Error::OutOfHorizon { t, covered });
    }
    let s = t / path.h;
    let k = s.floor() as usize;
    if k + 1 >= path.values.len() {
        return Ok(*path.values.last().unwrap());
    }
    let frac = s - k as f64;
    Ok(path.values[k] + frac * (path.values[k + 1] - path.values[k]))
}

/// First time the interpolated path equals `b`.
///
/// At a boundary this is the grid time of the first boundary visit (the
/// interpolation cannot overshoot a boundary). Interior crossings are solved
/// exactly on the bridging segment. Returns [`ExitTime::Censored`] when the
/// simulation ended unresolved.
pub fn hitting_time(path: &ChainPath, b: f64) -> Result<ExitTime> {
    let space = &path.space;
    if !(b >= space.l() && b <= space.r()) || b.is_nan() {
        return Err(Error::domain(format!("level {b} is outside the closed state space")));
    }
    let h = path.h;
    let vs = &path.values;
    if vs[0] == b {
        return Ok(ExitTime::Finite(0.0));
    }
    for k in 0..vs.len() - 1 {
        let (v0, v1) = (vs[k], vs[k + 1]);
        if v1 == b {
            return Ok(ExitTime::Finite((k + 1) as f64 * h));
        }
        if (v0 < b) != (v1 < b) {
            // strict crossing inside the segment
            let frac = (b - v0) / (v1 - v0);
            return Ok(ExitTime::Finite((k as f64 + frac) * h));
        }
    }
    if path.constant_past_horizon() {
        Ok(ExitTime::Infinite)
    } else {
        Ok(ExitTime::Censored { horizon: path.covered_time() })
    }
}
