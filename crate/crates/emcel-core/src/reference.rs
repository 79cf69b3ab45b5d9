//! Closed-form benchmark laws for exit times.
//!
//! These are the yardsticks the Monte-Carlo estimates are compared against:
//! the zero-hitting law of a squared Bessel process (through the regularized
//! incomplete gamma function), the CEV absorption law obtained from it by a
//! power scale map, and the classical eigenfunction series for Brownian exit
//! from a bounded interval.
//!
//! The gamma identity behind [`besq_hit_zero_law`] is standard but not
//! assumed blindly: the acceptance suite validates it against a fine-step
//! chain simulation before anything else relies on it.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::special::reg_gamma_upper;

/// A reference distribution on `[0, ∞)` with total mass `P(H < ∞) ≤ 1`.
#[derive(Clone)]
pub struct ReferenceLaw {
    cdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    total_mass_finite: f64,
    description: String,
}

impl std::fmt::Debug for ReferenceLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ReferenceLaw({})", self.description)
    }
}

impl ReferenceLaw {
    pub fn new(
        cdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        total_mass_finite: f64,
        description: impl Into<String>,
    ) -> Self {
        ReferenceLaw { cdf, total_mass_finite, description: description.into() }
    }

    /// `F(t) = P(H ≤ t)`, clamped to `[0, total_mass_finite]`.
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        (self.cdf)(t).clamp(0.0, self.total_mass_finite)
    }

    pub fn total_mass_finite(&self) -> f64 {
        self.total_mass_finite
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// Smallest `t` with `F(t) ≥ q`, by bisection (for sampling in tests and
    /// diagnostics). Requires `q < total_mass_finite`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&q) || q >= self.total_mass_finite {
            return Err(Error::domain(format!("quantile level {q} not attained")));
        }
        if q == 0.0 {
            return Ok(0.0);
        }
        let mut hi = 1.0;
        let mut guard = 0;
        while self.cdf(hi) < q {
            hi *= 2.0;
            guard += 1;
            if guard > 400 {
                return Err(Error::numerical("quantile bracket expansion failed"));
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) < q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// The power scale map linking the CEV diffusion to a squared Bessel process.
#[derive(Clone, Copy, Debug)]
pub struct BesqTransform {
    /// Squared-Bessel dimension `δ = 2 − 1/(1−p) < 2`.
    pub delta: f64,
    coef: f64,
    expo: f64,
}

impl BesqTransform {
    /// `s(z) = (2−δ)^{δ−2} z^{1−δ/2}`: maps the squared Bessel process to the
    /// CEV diffusion in natural scale.
    pub fn scale(&self, z: f64) -> f64 {
        self.coef * z.powf(self.expo)
    }

    /// Inverse map `s⁻¹(y)`.
    pub fn scale_inverse(&self, y: f64) -> f64 {
        (y / self.coef).powf(1.0 / self.expo)
    }
}

/// Dimension and scale map of the squared Bessel process whose zero-hitting
/// time coincides with the CEV absorption time: `p = 1 − 1/(2−δ)`.
pub fn cev_to_besq(p: f64) -> Result<BesqTransform> {
    if !(p < 1.0) {
        return Err(Error::domain(format!("the CEV exponent must satisfy p < 1, got {p}")));
    }
    let delta = 2.0 - 1.0 / (1.0 - p);
    let expo = 1.0 - delta / 2.0;
    let coef = (2.0 - delta).powf(delta - 2.0);
    Ok(BesqTransform { delta, coef, expo })
}

/// Law of the first time a squared Bessel process of dimension `δ < 2`
/// started at `z0 > 0` hits zero: `F(t) = Q(1 − δ/2, z0/(2t))`.
pub fn besq_hit_zero_law(delta: f64, z0: f64) -> Result<ReferenceLaw> {
    if !(delta < 2.0) {
        return Err(Error::domain(format!(
            "zero is accessible only for dimension δ < 2, got {delta}"
        )));
    }
    if !(z0 > 0.0) {
        return Err(Error::domain(format!("starting point must be positive, got {z0}")));
    }
    let nu = 1.0 - delta / 2.0;
    let cdf = move |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        reg_gamma_upper(nu, z0 / (2.0 * t)).unwrap_or(f64::NAN)
    };
    Ok(ReferenceLaw::new(
        Arc::new(cdf),
        1.0,
        format!("squared-Bessel({delta}) zero hitting from {z0}"),
    ))
}

/// Law of the CEV absorption time at the origin, via the squared-Bessel
/// transform: `H_0` of `dY = Y^p dW` started at `y0 > 0`.
pub fn cev_absorption_law(p: f64, y0: f64) -> Result<ReferenceLaw> {
    if !(y0 > 0.0) {
        return Err(Error::domain(format!("starting point must be positive, got {y0}")));
    }
    let transform = cev_to_besq(p)?;
    let z0 = transform.scale_inverse(y0);
    let inner = besq_hit_zero_law(transform.delta, z0)?;
    Ok(ReferenceLaw::new(
        Arc::new(move |t| inner.cdf(t)),
        1.0,
        format!("CEV(p = {p}) absorption at 0 from {y0}"),
    ))
}

/// Exit law of standard Brownian motion from `(a, b)` started at `y0`:
/// the cdf of `H_a ∧ H_b` (eigenfunction series) and the probability of
/// leaving through the lower endpoint.
pub fn bm_exit_interval_law(y0: f64, a: f64, b: f64) -> Result<(ReferenceLaw, f64)> {
    if !(a < y0 && y0 < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::domain(format!(
            "need finite a < y0 < b, got a = {a}, y0 = {y0}, b = {b}"
        )));
    }
    let length = b - a;
    let x = y0 - a;
    let p_lower = (b - y0) / length;
    let cdf = move |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        let decay = std::f64::consts::PI * std::f64::consts::PI * t / (2.0 * length * length);
        let mut survival = 0.0;
        let mut k = 1u64;
        loop {
            let kf = k as f64;
            let amplitude = 4.0 / (kf * std::f64::consts::PI);
            let bound = amplitude * (-kf * kf * decay).exp();
            if bound < 1e-12 && k > 1 {
                break;
            }
            survival +=
                amplitude * (kf * std::f64::consts::PI * x / length).sin() * (-kf * kf * decay).exp();
            k += 2; // odd modes only
            if k > 20_000_000 {
                break;
            }
        }
        1.0 - survival
    };
    Ok((
        ReferenceLaw::new(
            Arc::new(cdf),
            1.0,
            format!("Brownian exit from ({a}, {b}) started at {y0}"),
        ),
        p_lower,
    ))
}
