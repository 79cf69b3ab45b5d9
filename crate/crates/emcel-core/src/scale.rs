//! Scale-factor families `a_h` and their boundary thresholds.
//!
//! A scheme assigns to each step size `h` a function `y ↦ a_h(y)` with
//! `a_h = 0` on the boundary and `y ± a_h(y)` inside the state space. The
//! EMCEL family picks the radius whose kernel integral equals `h` exactly,
//! clamping to the boundary inside the threshold layers `(l, l_h]` and
//! `[r_h, r)`; the weak Euler family for CEV uses `min(√h·y^p, y)`; the
//! truncated family switches EMCEL off below a level `l̄_h > l_h`, which
//! keeps path convergence but destroys exit-time convergence.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::measure::{self, kernel_integral, KernelClosedForm, SpeedMeasure};
use crate::solve;
use crate::space::{Endpoint, Side, StateSpace};

/// Absolute tolerance for the EMCEL root, scaled by `max(1, |y|)`.
const ROOT_TOL: f64 = 1e-12;
/// Relative tolerance for boundary thresholds.
const THRESHOLD_REL_TOL: f64 = 1e-12;
/// Cap on the memo cache for quadrature-backed EMCEL evaluations.
const MEMO_CAP: usize = 1 << 20;

/// How the truncation level `l̄_h` of the truncated-EMCEL family is chosen.
#[derive(Clone)]
pub enum TruncationRule {
    /// `l̄_h = l + 2(l_h − l)`: above `l_h`, shrinking to `l` as `h ↓ 0`.
    DoubleThresholdGap,
    /// User-supplied `h ↦ l̄_h`.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

/// The scale-factor family.
#[derive(Clone)]
pub enum SchemeKind {
    /// Kernel integral of the step equals `h` (clamped near boundaries).
    Emcel,
    /// `a_h(y) = min(√h·y^p, y)` for the CEV diffusion.
    WeakEulerCev { p: f64 },
    /// EMCEL above `l̄_h`, zero below.
    TruncatedEmcel { rule: TruncationRule },
    /// Arbitrary `(h, y) ↦ a`. Not validated beyond simulation-time checks.
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SchemeKind::Emcel => write!(f, "Emcel"),
            SchemeKind::WeakEulerCev { p } => write!(f, "WeakEulerCev {{ p: {p} }}"),
            SchemeKind::TruncatedEmcel { .. } => write!(f, "TruncatedEmcel"),
            SchemeKind::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// A scale-factor family bound to a speed measure and state space.
///
/// Immutable after construction; internal caches are synchronized and do not
/// affect results.
pub struct ScaleFactorScheme {
    kind: SchemeKind,
    measure: SpeedMeasure,
    space: StateSpace,
    h_max: f64,
    thresholds: Mutex<HashMap<u64, (f64, f64)>>,
    memo: Mutex<HashMap<(u64, i128), f64>>,
}

impl std::fmt::Debug for ScaleFactorScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScaleFactorScheme")
            .field("kind", &self.kind)
            .field("space", &self.space)
            .field("h_max", &self.h_max)
            .finish()
    }
}

impl Clone for ScaleFactorScheme {
    fn clone(&self) -> Self {
        ScaleFactorScheme {
            kind: self.kind.clone(),
            measure: self.measure.clone(),
            space: self.space.clone(),
            h_max: self.h_max,
            thresholds: Mutex::new(HashMap::new()),
            memo: Mutex::new(HashMap::new()),
        }
    }
}

impl ScaleFactorScheme {
    pub fn new(
        kind: SchemeKind,
        measure: SpeedMeasure,
        space: StateSpace,
        h_max: f64,
    ) -> Result<Self> {
        if !(h_max > 0.0 && h_max <= 1.0) {
            return Err(Error::domain(format!(
                "h_max must lie in (0, 1], got {h_max}"
            )));
        }
        measure.validate_for(&space)?;
        match &kind {
            SchemeKind::WeakEulerCev { p } => {
                if !(*p < 1.0) {
                    return Err(Error::domain(format!(
                        "weak Euler CEV scale requires p < 1, got {p}"
                    )));
                }
                if space != StateSpace::nonnegative_halfline() {
                    return Err(Error::domain(
                        "the weak Euler CEV scale factors are defined on [0, ∞)",
                    ));
                }
            }
            SchemeKind::TruncatedEmcel { .. } => {
                if !space.lower().is_finite() || !space.lower_included() {
                    return Err(Error::domain(
                        "the truncated scheme needs a finite absorbing lower boundary",
                    ));
                }
            }
            _ => {}
        }
        Ok(ScaleFactorScheme {
            kind,
            measure,
            space,
            h_max,
            thresholds: Mutex::new(HashMap::new()),
            memo: Mutex::new(HashMap::new()),
        })
    }

    /// EMCEL scheme for an arbitrary measure.
    pub fn emcel(measure: SpeedMeasure, space: StateSpace, h_max: f64) -> Result<Self> {
        ScaleFactorScheme::new(SchemeKind::Emcel, measure, space, h_max)
    }

    /// Weak Euler scheme for the CEV diffusion with exponent `p`.
    pub fn weak_euler_cev(p: f64, h_max: f64) -> Result<Self> {
        ScaleFactorScheme::new(
            SchemeKind::WeakEulerCev { p },
            measure::cev_speed_measure(p, false)?,
            measure::cev_state_space(false),
            h_max,
        )
    }

    /// Truncated EMCEL with the default rule `l̄_h = l + 2(l_h − l)`.
    pub fn truncated_emcel(measure: SpeedMeasure, space: StateSpace, h_max: f64) -> Result<Self> {
        ScaleFactorScheme::new(
            SchemeKind::TruncatedEmcel { rule: TruncationRule::DoubleThresholdGap },
            measure,
            space,
            h_max,
        )
    }

    pub fn kind(&self) -> &SchemeKind {
        &self.kind
    }

    pub fn measure(&self) -> &SpeedMeasure {
        &self.measure
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    /// Validate a step size for simulation and condition audits.
    pub fn validate_h(&self, h: f64) -> Result<()> {
        if !(h > 0.0 && h < self.h_max) {
            return Err(Error::domain(format!(
                "step size must lie in (0, h_max) = (0, {}), got {h}",
                self.h_max
            )));
        }
        Ok(())
    }

    /// The scale factor `a_h(y)`, defined on all of `I` (zero on included
    /// boundaries).
    pub fn scale_factor(&self, h: f64, y: f64) -> Result<f64> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::domain(format!("step size must be positive, got {h}")));
        }
        if !self.space.contains_interior(y) {
            if self.space.contains(y) {
                return Ok(0.0); // absorbing boundary
            }
            return Err(Error::domain(format!(
                "scale factor requested outside the state space, y = {y}"
            )));
        }
        match &self.kind {
            SchemeKind::Emcel => self.emcel_value(h, y),
            SchemeKind::WeakEulerCev { p } => weak_euler_cev_scale(*p, y, h),
            SchemeKind::TruncatedEmcel { .. } => {
                let lbar = self.truncation_level(h)?;
                if y < lbar {
                    Ok(0.0)
                } else {
                    self.emcel_value(h, y)
                }
            }
            SchemeKind::Custom(f) => Ok(f(h, y)),
        }
    }

    /// Kernel integral at the scheme's own step: `K(y, a_h(y))`.
    pub fn kernel_at_step(&self, h: f64, y: f64) -> Result<f64> {
        let a = self.scale_factor(h, y)?;
        Ok(kernel_integral(&self.measure, &self.space, y, a)?.value)
    }

    /// Truncation level `l̄_h` of a truncated scheme.
    pub fn truncation_level(&self, h: f64) -> Result<f64> {
        let rule = match &self.kind {
            SchemeKind::TruncatedEmcel { rule } => rule,
            _ => return Err(Error::domain("not a truncated scheme")),
        };
        let (l_h, _) = self.thresholds_f64(h)?;
        let l = self.space.l();
        let lbar = match rule {
            TruncationRule::DoubleThresholdGap => l + 2.0 * (l_h - l),
            TruncationRule::Custom(f) => f(h),
        };
        if !(lbar > l_h) {
            return Err(Error::domain(format!(
                "truncation level {lbar} must exceed the boundary threshold {l_h}"
            )));
        }
        Ok(lbar)
    }

    /// `(l_h, r_h)` as floats with `±∞` for infinite endpoints.
    pub fn thresholds_f64(&self, h: f64) -> Result<(f64, f64)> {
        if let Some(&cached) = self.thresholds.lock().unwrap().get(&h.to_bits()) {
            return Ok(cached);
        }
        let lower = self.threshold_value(h, Side::Lower)?;
        let upper = self.threshold_value(h, Side::Upper)?;
        let pair = (lower, upper);
        self.thresholds.lock().unwrap().insert(h.to_bits(), pair);
        Ok(pair)
    }

    fn threshold_value(&self, h: f64, side: Side) -> Result<f64> {
        let endpoint = self.space.endpoint(side);
        let boundary = match endpoint.finite() {
            None => return Ok(endpoint.as_f64()),
            Some(b) => b,
        };

        // analytic shortcut for the CEV closed form: K(a, a) = a^{2(1−p)}·g_p(1)
        if side == Side::Lower && boundary == 0.0 {
            if let (Some(KernelClosedForm::CevPower { p }), true) =
                (self.measure.kernel_closed_form(), self.measure.atoms().is_empty())
            {
                let q = 2.0 * (1.0 - *p);
                let gp1 = measure::cev_kernel(*p, 1.0, 1.0);
                return Ok((h / gp1).powf(1.0 / q));
            }
        }

        let span = 0.5 * (self.space.r() - self.space.l());
        let kernel_on_diagonal = |a: f64| -> f64 {
            let y = match side {
                Side::Lower => boundary + a,
                Side::Upper => boundary - a,
            };
            kernel_integral(&self.measure, &self.space, y, a)
                .map(|k| k.value)
                .unwrap_or(f64::NAN)
        };

        let a0 = if span.is_finite() { 0.5 * span } else { 1.0 };
        let found = match solve::expand_bracket(&kernel_on_diagonal, a0, span, h)? {
            solve::Bracket::Found(_, hi) => hi,
            solve::Bracket::Below(_) => {
                // no admissible radius reaches h: threshold degenerates to the
                // boundary itself and the whole interval is root-solvable
                return Ok(boundary);
            }
        };
        // shrink geometrically to bracket the smallest qualifying radius
        let mut hi = found;
        let mut lo = 0.5 * hi;
        let mut guard = 0usize;
        while kernel_on_diagonal(lo) >= h {
            hi = lo;
            lo *= 0.5;
            guard += 1;
            if guard > 1200 || lo == 0.0 {
                // kernel stays ≥ h arbitrarily close to the boundary:
                // inaccessible-side behavior, threshold sits at the boundary
                return Ok(boundary);
            }
        }
        let a_star = solve::bisect_monotone_log(kernel_on_diagonal, lo, hi, h, THRESHOLD_REL_TOL);
        Ok(match side {
            Side::Lower => boundary + a_star,
            Side::Upper => boundary - a_star,
        })
    }

    /// Interesting levels near which condition audits refine their grids.
    pub fn critical_levels(&self, h: f64) -> Result<Vec<f64>> {
        let (l_h, r_h) = self.thresholds_f64(h)?;
        let mut levels = Vec::new();
        if l_h.is_finite() {
            levels.push(l_h);
        }
        if r_h.is_finite() {
            levels.push(r_h);
        }
        match &self.kind {
            SchemeKind::WeakEulerCev { p } => {
                levels.push(h.powf(1.0 / (2.0 * (1.0 - *p))));
            }
            SchemeKind::TruncatedEmcel { .. } => {
                levels.push(self.truncation_level(h)?);
            }
            _ => {}
        }
        Ok(levels)
    }

    /// The EMCEL radius at `(h, y)`, `y` strictly interior.
    fn emcel_value(&self, h: f64, y: f64) -> Result<f64> {
        // closed-form measures invert without quadrature
        if self.measure.atoms().is_empty() {
            match self.measure.kernel_closed_form() {
                Some(KernelClosedForm::CevPower { p }) => {
                    return Ok(emcel_cev_value(*p, y, h));
                }
                Some(KernelClosedForm::ConstantDensity { coef }) if *coef > 0.0 => {
                    // K(y, a) = c a²/2 while the window stays interior, so the
                    // unclipped root is √(2h/c), capped at the nearer boundary
                    let root = (2.0 * h / coef).sqrt();
                    let a = root.min(self.space.interior_radius(y));
                    if a < root {
                        self.check_boundary_step(y, a)?;
                    }
                    return Ok(a);
                }
                _ => {}
            }
        }

        let l = self.space.l();
        let r = self.space.r();
        let (l_h, r_h) = self.thresholds_f64(h)?;
        let in_lower_clamp = l.is_finite() && y <= l_h;
        let in_upper_clamp = r.is_finite() && y >= r_h;
        if in_lower_clamp || in_upper_clamp {
            let a = match (in_lower_clamp, in_upper_clamp) {
                (true, false) => y - l,
                (false, true) => r - y,
                _ => (y - l).min(r - y),
            };
            self.check_boundary_step(y, a)?;
            return Ok(a);
        }

        let key = (h.to_bits(), quantize(y));
        if let Some(&a) = self.memo.lock().unwrap().get(&key) {
            return Ok(a);
        }

        let cap = self.space.interior_radius(y);
        let phi = |a: f64| -> f64 {
            kernel_integral(&self.measure, &self.space, y, a)
                .map(|k| k.value)
                .unwrap_or(f64::NAN)
        };
        let a0 = if cap.is_finite() { 0.5 * cap } else { 1.0 };
        let a = match solve::expand_bracket(&phi, a0.min(1.0).max(f64::MIN_POSITIVE), cap, h)? {
            solve::Bracket::Found(lo, hi) => {
                solve::bisect_monotone(phi, lo, hi, h, ROOT_TOL * y.abs().max(1.0))
            }
            solve::Bracket::Below(_) => {
                // kernel never reaches h on the admissible range: the step
                // spans to the nearer boundary (degenerate-threshold case)
                if !cap.is_finite() {
                    return Err(Error::numerical(
                        "kernel integral stays below h on an unbounded range; \
                         the speed measure violates local positivity",
                    ));
                }
                self.check_boundary_step(y, cap)?;
                cap
            }
        };
        let mut memo = self.memo.lock().unwrap();
        if memo.len() < MEMO_CAP {
            memo.insert(key, a);
        }
        Ok(a)
    }

    /// A clamped step lands exactly on a boundary; that boundary must belong
    /// to the state space (accessible boundaries are absorbing).
    fn check_boundary_step(&self, y: f64, a: f64) -> Result<()> {
        let hits_lower = y - a <= self.space.l();
        let hits_upper = y + a >= self.space.r();
        if (hits_lower && !self.space.lower_included())
            || (hits_upper && !self.space.upper_included())
        {
            return Err(Error::SchemeIntegrity(format!(
                "the EMCEL step from y = {y} reaches an excluded boundary; \
                 an accessible boundary must belong to the state space"
            )));
        }
        Ok(())
    }
}

fn quantize(y: f64) -> i128 {
    (y * 1e12).round() as i128
}

/// EMCEL radius for the CEV measure `2u^{−2p}du` on `[0, ∞)`:
/// solves `K(y, a) = h` through the scale-invariant form `K = y^{2(1−p)} g_p(a/y)`,
/// clamping to `a = y` when `y ≤ l_h`.
pub(crate) fn emcel_cev_value(p: f64, y: f64, h: f64) -> f64 {
    let q = 2.0 * (1.0 - p);
    let z = if p == 0.5 { h / y } else { h / y.powf(q) };
    let gp1 = measure::cev_kernel(p, 1.0, 1.0);
    if z >= gp1 {
        return y; // boundary layer: the step reaches the origin
    }
    let x = if p == 0.5 {
        cev_half_inverse(z)
    } else {
        let g = |x: f64| measure::cev_kernel(p, 1.0, x);
        solve::bisect_monotone(g, 0.0, 1.0, z, 1e-15)
    };
    x * y
}

/// Degree-20 reversion of `v ↦ Σ_{k≥1} v^k/(k(2k−1))`; exact rational
/// coefficients rounded to f64. Valid for arguments up to ≈ 0.35 at
/// full double precision.
pub(crate) const INVERSE_SERIES: [f64; 20] = [
    1.0,
    -0.16666666666666666,    // -1/6
    -0.011111111111111112,   // -1/90
    -0.0033068783068783067,  // -5/1512
    -0.0012610229276895943,  // -143/113400
    -0.0005527497194163861,
    -0.0002649029395061141,
    -0.00013508433316634374,
    -7.210617667053328e-5,
    -3.986291151981394e-5,
    -2.2658012319999058e-5,
    -1.3172165110500134e-5,
    -7.801707993627744e-6,
    -4.693914929288627e-6,
    -2.8621519122097084e-6,
    -1.7654952912551107e-6,
    -1.1000544223338188e-6,
    -6.915265142255879e-7,
    -4.3814066606038907e-7,
    -2.795514600806103e-7,
];

/// Threshold between the series and bisection branches of [`cev_half_inverse`].
pub(crate) const CEV_HALF_SERIES_CUT: f64 = 0.35;

/// Inverse of `x ↦ (1+x)ln(1+x) + (1−x)ln(1−x)` on `(0, 2 ln 2]`.
///
/// This is the EMCEL step equation for the CEV measure with `p = 1/2` in
/// scale-invariant form. The hot simulation loops share this exact function,
/// so scalar and batched runs agree bit for bit.
pub(crate) fn cev_half_inverse(z: f64) -> f64 {
    debug_assert!(z > 0.0 && z <= 2.0 * std::f64::consts::LN_2);
    if z <= CEV_HALF_SERIES_CUT {
        let mut acc = INVERSE_SERIES[19];
        for k in (0..19).rev() {
            acc = acc * z + INVERSE_SERIES[k];
        }
        return (z * acc).sqrt();
    }
    let g = |x: f64| (1.0 + x) * x.ln_1p() + (1.0 - x) * (-x).ln_1p();
    solve::bisect_monotone(g, 0.5, 1.0, z, 1e-16)
}

/// The EMCEL scale factor `â_h(y)`.
///
/// For `y` in `(l_h, r_h)` this is the unique root of `K(y, a) = h`; inside
/// the boundary layers it equals the distance to the boundary.
pub fn emcel_scale(scheme: &ScaleFactorScheme, y: f64, h: f64) -> Result<f64> {
    match scheme.kind() {
        SchemeKind::Emcel => {}
        _ => return Err(Error::domain("emcel_scale requires an EMCEL scheme")),
    }
    require_interior(scheme, y)?;
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::domain(format!("step size must be positive, got {h}")));
    }
    scheme.scale_factor(h, y)
}

/// Boundary threshold `l_h` or `r_h` as an extended real.
pub fn boundary_threshold(scheme: &ScaleFactorScheme, h: f64, side: Side) -> Result<Endpoint> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::domain(format!("step size must be positive, got {h}")));
    }
    let (l_h, r_h) = scheme.thresholds_f64(h)?;
    let v = match side {
        Side::Lower => l_h,
        Side::Upper => r_h,
    };
    Ok(if v == f64::NEG_INFINITY {
        Endpoint::NegInf
    } else if v == f64::INFINITY {
        Endpoint::PosInf
    } else {
        Endpoint::Finite(v)
    })
}

/// Membership in the admissible set: `(l_h, r_h)` plus every interior point
/// whose step stays strictly interior.
pub fn admissible_set_contains(scheme: &ScaleFactorScheme, h: f64, y: f64) -> Result<bool> {
    require_interior(scheme, y)?;
    let (l_h, r_h) = scheme.thresholds_f64(h)?;
    if l_h < y && y < r_h {
        return Ok(true);
    }
    let a = scheme.scale_factor(h, y)?;
    Ok(scheme.space().contains_interior(y - a) && scheme.space().contains_interior(y + a))
}

/// Weak Euler scale factor for the CEV diffusion: `min(√h·y^p, y)`.
pub fn weak_euler_cev_scale(p: f64, y: f64, h: f64) -> Result<f64> {
    if !(p < 1.0) {
        return Err(Error::domain(format!("weak Euler CEV scale requires p < 1, got {p}")));
    }
    if !(y >= 0.0) {
        return Err(Error::domain(format!("the CEV state space is [0, ∞), got y = {y}")));
    }
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::domain(format!("step size must lie in (0, 1), got {h}")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let diffusive = if p == 0.5 {
        h.sqrt() * y.sqrt()
    } else {
        h.sqrt() * y.powf(p)
    };
    Ok(diffusive.min(y))
}

/// Truncated-EMCEL scale factor: zero below `l̄_h`, EMCEL above.
pub fn truncated_emcel_scale(scheme: &ScaleFactorScheme, y: f64, h: f64) -> Result<f64> {
    match scheme.kind() {
        SchemeKind::TruncatedEmcel { .. } => {}
        _ => return Err(Error::domain("truncated_emcel_scale requires a truncated scheme")),
    }
    require_interior(scheme, y)?;
    scheme.scale_factor(h, y)
}

fn require_interior(scheme: &ScaleFactorScheme, y: f64) -> Result<()> {
    if !scheme.space().contains_interior(y) {
        return Err(Error::domain(format!(
            "y = {y} is not in the interior of the state space"
        )));
    }
    Ok(())
}

/// One row of the diagnostic dump: the scale factor and its kernel integral.
#[derive(Clone, Copy, Debug)]
pub struct ScaleDumpRow {
    pub y: f64,
    pub a: f64,
    pub kernel: f64,
}

/// Evaluate the scheme on a grid for diagnostics.
pub fn scale_dump(scheme: &ScaleFactorScheme, h: f64, grid: &[f64]) -> Result<Vec<ScaleDumpRow>> {
    grid.iter()
        .map(|&y| {
            let a = scheme.scale_factor(h, y)?;
            let kernel = kernel_integral(scheme.measure(), scheme.space(), y, a)
                .map(|k| k.value)
                .unwrap_or(f64::NAN);
            Ok(ScaleDumpRow { y, a, kernel })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{brownian_measure, cev_speed_measure, cev_state_space, sticky_brownian_measure};
    use crate::rng::mix_seed;
    use approx::assert_relative_eq;

    const LN2: f64 = std::f64::consts::LN_2;

    fn brownian_emcel() -> ScaleFactorScheme {
        ScaleFactorScheme::emcel(brownian_measure(), StateSpace::real_line(), 1.0).unwrap()
    }

    fn cev_emcel(p: f64) -> ScaleFactorScheme {
        ScaleFactorScheme::emcel(cev_speed_measure(p, false).unwrap(), cev_state_space(false), 1.0)
            .unwrap()
    }

    #[test]
    fn brownian_step_is_sqrt_h() {
        let scheme = brownian_emcel();
        for y in [-3.0, 0.0, 7.5] {
            let a = emcel_scale(&scheme, y, 0.01).unwrap();
            assert!((a - 0.1).abs() < 1e-11, "a = {a}");
        }
    }

    #[test]
    fn cev_clamp_branch_agrees_with_root() {
        // l_h = h/(2 log 2) = 1 at h = 2 log 2, so y = 1 sits on the clamp edge
        let scheme = cev_emcel(0.5);
        let a = emcel_scale(&scheme, 1.0, 2.0 * LN2).unwrap();
        assert_relative_eq!(a, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn sticky_atom_shifts_the_root() {
        // kernel at the atom: a² + a, root of a² + a = 0.02
        let m = sticky_brownian_measure(0.0, 2.0).unwrap();
        let scheme = ScaleFactorScheme::emcel(m, StateSpace::real_line(), 1.0).unwrap();
        let a = emcel_scale(&scheme, 0.0, 0.02).unwrap();
        let expect = (-1.0 + 1.08f64.sqrt()) / 2.0;
        assert!((a - expect).abs() < 1e-12, "a = {a}, expect = {expect}");
    }

    #[test]
    fn boundary_point_is_rejected() {
        let scheme = cev_emcel(0.5);
        assert!(matches!(emcel_scale(&scheme, 0.0, 0.01), Err(Error::Domain(_))));
        // but the family itself vanishes there
        assert_eq!(scheme.scale_factor(0.01, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn cev_thresholds_match_the_closed_forms() {
        let h = 0.01;
        let scheme = cev_emcel(0.5);
        let l_h = boundary_threshold(&scheme, h, Side::Lower).unwrap().finite().unwrap();
        assert_relative_eq!(l_h, h / (2.0 * LN2), max_relative = 1e-10);
        assert_eq!(boundary_threshold(&scheme, h, Side::Upper).unwrap(), Endpoint::PosInf);

        let p = 0.25;
        let scheme = cev_emcel(p);
        let l_h = boundary_threshold(&scheme, h, Side::Lower).unwrap().finite().unwrap();
        let expect = ((2.0 * p - 1.0) * (1.0 - p) / (1.0 - 2f64.powf(1.0 - 2.0 * p)) * h)
            .powf(1.0 / (2.0 * (1.0 - p)));
        assert_relative_eq!(l_h, expect, max_relative = 1e-10);
    }

    #[test]
    fn infinite_boundaries_have_infinite_thresholds() {
        let scheme = brownian_emcel();
        assert_eq!(boundary_threshold(&scheme, 0.3, Side::Lower).unwrap(), Endpoint::NegInf);
        assert_eq!(boundary_threshold(&scheme, 0.3, Side::Upper).unwrap(), Endpoint::PosInf);
    }

    #[test]
    fn generic_threshold_solver_matches_cev_closed_form() {
        // same thresholds with the closed form stripped (quadrature + log bisection)
        let h = 0.01;
        for p in [0.5, 0.25] {
            let m = cev_speed_measure(p, false).unwrap().without_closed_form();
            let scheme = ScaleFactorScheme::emcel(m, cev_state_space(false), 1.0).unwrap();
            let l_h = boundary_threshold(&scheme, h, Side::Lower).unwrap().finite().unwrap();
            let closed = cev_emcel(p);
            let expect = boundary_threshold(&closed, h, Side::Lower).unwrap().finite().unwrap();
            assert_relative_eq!(l_h, expect, max_relative = 1e-8);
        }
    }

    #[test]
    fn admissible_set_branches() {
        let h = 0.01;
        let scheme = cev_emcel(0.5);
        let l_h = h / (2.0 * LN2);
        // inside (l_h, r_h)
        assert!(admissible_set_contains(&scheme, h, 1.0).unwrap());
        // clamp layer: step reaches the boundary, not interior, and below l_h
        assert!(!admissible_set_contains(&scheme, h, 0.5 * l_h).unwrap());

        // weak Euler at y = 2h: a = sqrt(h y) < y, both ends interior
        let weak = ScaleFactorScheme::weak_euler_cev(0.5, 1.0).unwrap();
        assert!(admissible_set_contains(&weak, h, 2.0 * h).unwrap());
        // and even below l_h the weak Euler step keeps points admissible only
        // via the threshold interval, not the step (a = y there)
        assert!(!admissible_set_contains(&weak, h, 0.5 * l_h).unwrap());
    }

    #[test]
    fn weak_euler_formula() {
        assert_relative_eq!(weak_euler_cev_scale(0.5, 1.0, 0.04).unwrap(), 0.2);
        assert_relative_eq!(weak_euler_cev_scale(0.5, 0.01, 0.04).unwrap(), 0.01);
        assert_eq!(weak_euler_cev_scale(0.5, 0.0, 0.04).unwrap(), 0.0);
        assert!(weak_euler_cev_scale(1.0, 1.0, 0.04).is_err());
        assert!(weak_euler_cev_scale(0.5, -1.0, 0.04).is_err());
    }

    #[test]
    fn weak_euler_min_and_piecewise_forms_agree() {
        // min(√h y^p, y) vs the explicit two-branch definition
        for trial in 0..10_000u64 {
            let u = mix_seed(99, trial);
            let p = -2.0 + 2.9 * ldexp_frac(u, 0);
            let y = 1e-4 + 10.0 * ldexp_frac(u, 21);
            let h = 1e-6 + 0.99 * ldexp_frac(u, 42);
            let a = weak_euler_cev_scale(p, y, h).unwrap();
            let cutoff = h.powf(1.0 / (2.0 * (1.0 - p)));
            let piecewise = if y > cutoff {
                if p == 0.5 { h.sqrt() * y.sqrt() } else { h.sqrt() * y.powf(p) }
            } else {
                y
            };
            assert!(
                (a - piecewise).abs() <= 1e-12 * piecewise.abs().max(1e-12),
                "p={p} y={y} h={h}: {a} vs {piecewise}"
            );
        }
    }

    fn ldexp_frac(bits: u64, shift: u32) -> f64 {
        ((bits >> shift) & 0x1F_FFFF) as f64 / (0x20_0000 as f64)
    }

    #[test]
    fn truncated_scheme_branches() {
        let h = 0.01;
        let m = cev_speed_measure(0.5, false).unwrap();
        let scheme = ScaleFactorScheme::truncated_emcel(m, cev_state_space(false), 1.0).unwrap();
        let lbar = scheme.truncation_level(h).unwrap();
        assert_relative_eq!(lbar, h / LN2, max_relative = 1e-10); // 2·l_h

        // below the truncation level the factor vanishes
        assert_eq!(truncated_emcel_scale(&scheme, 0.5 * lbar, h).unwrap(), 0.0);

        // at and above it matches EMCEL
        let emcel = cev_emcel(0.5);
        for y in [lbar, lbar * 1.001, 0.5, 2.0] {
            let t = truncated_emcel_scale(&scheme, y, h).unwrap();
            let e = emcel_scale(&emcel, y, h).unwrap();
            assert_eq!(t, e, "y = {y}");
        }

        // just above l̄_h the step is positive and never reaches the boundary
        let y = lbar * (1.0 + 1e-9);
        let a = truncated_emcel_scale(&scheme, y, h).unwrap();
        assert!(a > 0.0 && y - a > 0.0);
    }

    #[test]
    fn truncated_scheme_never_jumps_to_the_boundary() {
        let h = 0.05;
        let m = cev_speed_measure(0.5, false).unwrap();
        let scheme = ScaleFactorScheme::truncated_emcel(m, cev_state_space(false), 1.0).unwrap();
        let mut y = 1e-6;
        while y < 3.0 {
            let a = scheme.scale_factor(h, y).unwrap();
            assert!(a == 0.0 || y - a > 0.0, "y = {y}, a = {a}");
            y *= 1.37;
        }
    }

    #[test]
    fn custom_truncation_must_exceed_threshold() {
        let m = cev_speed_measure(0.5, false).unwrap();
        let scheme = ScaleFactorScheme::new(
            SchemeKind::TruncatedEmcel {
                rule: TruncationRule::Custom(Arc::new(|h| h * 1e-3)),
            },
            m,
            cev_state_space(false),
            1.0,
        )
        .unwrap();
        assert!(scheme.truncation_level(0.01).is_err());
    }

    #[test]
    fn kernel_identity_holds_on_the_root_branch() {
        // |K(y, â_h(y)) − h| below root tolerance, for several measures
        let schemes = vec![
            brownian_emcel(),
            cev_emcel(0.5),
            cev_emcel(0.25),
            ScaleFactorScheme::emcel(
                sticky_brownian_measure(1.0, 0.7).unwrap(),
                StateSpace::real_line(),
                1.0,
            )
            .unwrap(),
        ];
        for scheme in &schemes {
            for &h in &[0.1, 0.01, 1e-4] {
                let (l_h, r_h) = scheme.thresholds_f64(h).unwrap();
                for &y in &[0.3, 0.9, 1.4, 3.7] {
                    if y <= l_h || y >= r_h {
                        continue;
                    }
                    let k = scheme.kernel_at_step(h, y).unwrap();
                    assert!(
                        (k - h).abs() < 1e-10,
                        "{scheme:?} h={h} y={y}: kernel = {k}"
                    );
                }
            }
        }
    }

    #[test]
    fn clamp_layer_returns_exact_distance() {
        let scheme = cev_emcel(0.5);
        let h = 0.01;
        let l_h = h / (2.0 * LN2);
        for frac in [0.1, 0.5, 0.99] {
            let y = frac * l_h;
            assert_eq!(emcel_scale(&scheme, y, h).unwrap(), y);
        }
    }

    #[test]
    fn cev_half_inverse_matches_reference_values() {
        // 40-digit reference roots of (1+x)log(1+x) + (1−x)log(1−x) = z,
        // straddling the series/bisection switch at z = 0.35
        let cases = [
            (1e-9, 3.1622776599048562921e-5),
            (1e-6, 9.9999991666665761626e-4),
            (1e-4, 9.9999166657638650701e-3),
            (0.01, 0.09991657614743802687),
            (0.1, 0.31356319672993365041),
            (0.3, 0.53354444851857393705),
            (0.34999, 0.57362068283395076749),
            (0.35001, 0.57363599878824436121),
            (0.5, 0.67578615570036460617),
            (0.9, 0.86801501360309969812),
            (1.2, 0.96249315623601297885),
            (1.38, 0.99929696049358809813),
        ];
        for (z, expect) in cases {
            let x = cev_half_inverse(z);
            assert!(
                (x - expect).abs() <= 1e-13 * expect,
                "z = {z}: x = {x:.17}, expect {expect:.17}"
            );
        }
    }

    #[test]
    fn cev_half_inverse_round_trips_where_conditioning_allows() {
        let g = |x: f64| (1.0 + x) * x.ln_1p() + (1.0 - x) * (-x).ln_1p();
        let mut z = 1e-3;
        while z < 1.3 {
            let x = cev_half_inverse(z);
            let back = g(x);
            // evaluating g loses ~eps·x to cancellation of the leading terms
            let tol = 1e-12 * z + 64.0 * f64::EPSILON * x;
            assert!((back - z).abs() <= tol, "z = {z}: g(inv) = {back}");
            z *= 1.11;
        }
    }

    #[test]
    fn scale_dump_rows() {
        let scheme = brownian_emcel();
        let rows = scale_dump(&scheme, 0.04, &[-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(rows.len(), 3);
        for r in rows {
            assert!((r.a - 0.2).abs() < 1e-11);
            assert!((r.kernel - 0.04).abs() < 1e-12);
        }
    }

    #[test]
    fn h_max_is_validated() {
        assert!(ScaleFactorScheme::emcel(brownian_measure(), StateSpace::real_line(), 0.0).is_err());
        assert!(ScaleFactorScheme::emcel(brownian_measure(), StateSpace::real_line(), 1.5).is_err());
        let s = brownian_emcel();
        assert!(s.validate_h(0.5).is_ok());
        assert!(s.validate_h(1.0).is_err());
        assert!(s.validate_h(0.0).is_err());
    }
}
