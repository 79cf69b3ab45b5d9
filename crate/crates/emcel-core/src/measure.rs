//! Speed measures and the triangular-kernel integral.
//!
//! A speed measure is an absolutely continuous density on the interior of the
//! state space plus finitely many atoms (sticky points). The central quantity
//! is the kernel integral
//!
//! ```text
//! K(y, a) = 1/2 ∫_(y−a, y+a) (a − |u − y|) m(du)
//! ```
//!
//! which equals the expected exit time of the diffusion from `(y−a, y+a)`
//! started at `y`. Every scheme in this crate is built from it: the EMCEL
//! step solves `K(y, a) = h`, the boundary thresholds are defined through it
//! and the accuracy conditions compare it against `h`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quad;
use crate::space::StateSpace;

/// A point mass of the speed measure at an interior point (a sticky point of
/// the diffusion).
#[derive(Clone, Copy, Debug)]
pub struct Atom {
    pub position: f64,
    pub mass: f64,
}

/// The absolutely continuous part of a speed measure.
#[derive(Clone)]
pub enum Density {
    Zero,
    /// `c · du`.
    Constant(f64),
    /// `coef · u^exponent` on `(0, ∞)`, or `coef · |u|^exponent` on `ℝ∖{0}`
    /// when `absolute` is set.
    Power {
        coef: f64,
        exponent: f64,
        absolute: bool,
    },
    /// Piecewise-linear interpolation between sorted `(x, density)` samples;
    /// zero outside the sampled range.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for Density {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Density::Zero => write!(f, "Zero"),
            Density::Constant(c) => write!(f, "Constant({c})"),
            Density::Power { coef, exponent, absolute } => {
                write!(f, "Power {{ coef: {coef}, exponent: {exponent}, absolute: {absolute} }}")
            }
            Density::PiecewiseLinear { knots } => {
                write!(f, "PiecewiseLinear {{ {} knots }}", knots.len())
            }
            Density::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Density {
    /// Pointwise value; `+∞` is allowed at isolated points.
    pub fn value(&self, u: f64) -> f64 {
        match self {
            Density::Zero => 0.0,
            Density::Constant(c) => *c,
            Density::Power { coef, exponent, absolute } => {
                if *absolute {
                    if u == 0.0 {
                        if *exponent < 0.0 {
                            f64::INFINITY
                        } else if *exponent == 0.0 {
                            *coef
                        } else {
                            0.0
                        }
                    } else {
                        coef * u.abs().powf(*exponent)
                    }
                } else if u > 0.0 {
                    coef * u.powf(*exponent)
                } else {
                    0.0
                }
            }
            Density::PiecewiseLinear { knots } => {
                let n = knots.len();
                if n == 0 || u < knots[0].0 || u > knots[n - 1].0 {
                    return 0.0;
                }
                let idx = knots.partition_point(|k| k.0 <= u);
                if idx == 0 {
                    return knots[0].1;
                }
                if idx == n {
                    return knots[n - 1].1;
                }
                let (x0, d0) = knots[idx - 1];
                let (x1, d1) = knots[idx];
                if x1 == x0 {
                    return d0;
                }
                d0 + (d1 - d0) * (u - x0) / (x1 - x0)
            }
            Density::Custom(f) => f(u),
        }
    }

    /// `∫_lo^hi density du`, possibly `+∞`. Analytic where the form allows.
    fn mass(&self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo < hi) {
            return Ok(0.0);
        }
        match self {
            Density::Zero => Ok(0.0),
            Density::Constant(c) => Ok(if hi.is_infinite() || lo.is_infinite() {
                if *c == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                c * (hi - lo)
            }),
            Density::Power { coef, exponent, absolute } => {
                if *absolute {
                    // split at the origin and reuse the one-sided form
                    let one_sided = Density::Power { coef: *coef, exponent: *exponent, absolute: false };
                    let pos = one_sided.mass(lo.max(0.0), hi)?;
                    let neg = one_sided.mass((-hi).max(0.0), -lo)?;
                    Ok(pos + neg)
                } else {
                    Ok(power_mass(*coef, *exponent, lo.max(0.0), hi))
                }
            }
            Density::PiecewiseLinear { knots } => {
                let mut total = 0.0;
                for w in knots.windows(2) {
                    let (x0, d0) = w[0];
                    let (x1, d1) = w[1];
                    let a = lo.max(x0);
                    let b = hi.min(x1);
                    if a < b {
                        let da = self::lerp(x0, d0, x1, d1, a);
                        let db = self::lerp(x0, d0, x1, d1, b);
                        total += 0.5 * (da + db) * (b - a);
                    }
                }
                Ok(total)
            }
            Density::Custom(f) => {
                if lo.is_infinite() || hi.is_infinite() {
                    return Err(Error::domain(
                        "custom densities cannot be integrated over unbounded intervals",
                    ));
                }
                let out = quad::integrate(
                    &|u| f(u),
                    lo,
                    hi,
                    &[],
                    &[lo, hi],
                    quad::ABS_TOL,
                    quad::REL_TOL,
                )?;
                Ok(out.value)
            }
        }
    }
}

fn lerp(x0: f64, d0: f64, x1: f64, d1: f64, x: f64) -> f64 {
    d0 + (d1 - d0) * (x - x0) / (x1 - x0)
}

/// `∫_lo^hi coef·u^e du` on `(0,∞)`, `lo ≥ 0`.
fn power_mass(coef: f64, e: f64, lo: f64, hi: f64) -> f64 {
    if coef == 0.0 || !(lo < hi) {
        return 0.0;
    }
    let s = e + 1.0;
    if s > 0.0 {
        if hi.is_infinite() {
            return f64::INFINITY;
        }
        coef * (hi.powf(s) - lo.powf(s)) / s
    } else if s == 0.0 {
        if lo == 0.0 || hi.is_infinite() {
            f64::INFINITY
        } else {
            coef * (hi / lo).ln()
        }
    } else {
        if lo == 0.0 {
            return f64::INFINITY;
        }
        coef * (hi.powf(s) - lo.powf(s)) / s
    }
}

/// Closed-form evaluators for the density part of the kernel integral.
#[derive(Clone)]
pub enum KernelClosedForm {
    /// Constant density `c·du`: half a (boundary-clipped) triangle area.
    ConstantDensity { coef: f64 },
    /// CEV density `2u^{−2p}` on `(0, ∞)`.
    CevPower { p: f64 },
    /// Arbitrary `(y, a) → value` for the density part.
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for KernelClosedForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelClosedForm::ConstantDensity { coef } => {
                write!(f, "ConstantDensity {{ coef: {coef} }}")
            }
            KernelClosedForm::CevPower { p } => write!(f, "CevPower {{ p: {p} }}"),
            KernelClosedForm::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Value of the kernel integral together with a numerical error bound
/// (zero when a closed form or exact atom arithmetic produced it).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    pub quadrature_error_bound: f64,
}

impl KernelValue {
    fn exact(value: f64) -> Self {
        KernelValue { value, quadrature_error_bound: 0.0 }
    }

    pub fn is_divergent(&self) -> bool {
        self.value.is_infinite()
    }
}

/// A speed measure: density, atoms and an optional closed form for the
/// kernel integral of the density part.
#[derive(Clone, Debug)]
pub struct SpeedMeasure {
    density: Density,
    atoms: Vec<Atom>,
    kernel_closed_form: Option<KernelClosedForm>,
    /// Interior points where the density may be unbounded; quadrature
    /// subdivides geometrically toward them.
    singular_points: Vec<f64>,
}

impl SpeedMeasure {
    pub fn new(density: Density, atoms: Vec<Atom>) -> Result<Self> {
        let mut sorted = atoms.clone();
        sorted.sort_by(|a, b| a.position.total_cmp(&b.position));
        for w in sorted.windows(2) {
            if w[0].position == w[1].position {
                return Err(Error::domain(format!(
                    "duplicate atom position {}",
                    w[0].position
                )));
            }
        }
        for a in &sorted {
            if !(a.mass > 0.0) || !a.position.is_finite() {
                return Err(Error::domain(format!(
                    "atom at {} must have finite position and positive mass",
                    a.position
                )));
            }
        }
        Ok(SpeedMeasure {
            density,
            atoms: sorted,
            kernel_closed_form: None,
            singular_points: Vec::new(),
        })
    }

    pub fn with_closed_form(mut self, form: KernelClosedForm) -> Self {
        self.kernel_closed_form = Some(form);
        self
    }

    pub fn with_singular_points(mut self, points: Vec<f64>) -> Self {
        self.singular_points = points;
        self
    }

    /// Copy with the closed form removed, forcing numeric quadrature.
    pub fn without_closed_form(&self) -> Self {
        let mut m = self.clone();
        m.kernel_closed_form = None;
        m
    }

    pub fn density(&self) -> &Density {
        &self.density
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn kernel_closed_form(&self) -> Option<&KernelClosedForm> {
        self.kernel_closed_form.as_ref()
    }

    /// Check atom admissibility for a given state space: positions must be
    /// strictly interior.
    pub fn validate_for(&self, space: &StateSpace) -> Result<()> {
        for a in &self.atoms {
            if !space.contains_interior(a.position) {
                return Err(Error::domain(format!(
                    "atom position {} is not in the interior of the state space",
                    a.position
                )));
            }
        }
        Ok(())
    }

    /// Sampled check of local finiteness and positivity: splits `[lo, hi]`
    /// into `n` pieces, each of which must carry finite positive mass.
    pub fn validate_locally_finite(&self, lo: f64, hi: f64, n: usize) -> Result<()> {
        if !(lo < hi) || n == 0 {
            return Err(Error::domain("need lo < hi and n >= 1"));
        }
        let step = (hi - lo) / n as f64;
        for i in 0..n {
            let a = lo + i as f64 * step;
            let b = if i + 1 == n { hi } else { a + step };
            let mass = measure_of_interval(self, a, b)?;
            if !(mass > 0.0) {
                return Err(Error::domain(format!(
                    "speed measure vanishes on ({a}, {b}); the diffusion would not be regular"
                )));
            }
            if mass.is_infinite() {
                return Err(Error::domain(format!(
                    "speed measure is infinite on the compact ({a}, {b})"
                )));
            }
        }
        Ok(())
    }
}

/// Triangular-kernel integral `K(y, a)`, atoms handled exactly and the
/// density part through a closed form when installed, quadrature otherwise.
///
/// A divergent integral (an endpoint with non-integrable kernel mass) is
/// reported as `+∞`, not as an error.
pub fn kernel_integral(
    m: &SpeedMeasure,
    space: &StateSpace,
    y: f64,
    a: f64,
) -> Result<KernelValue> {
    if !space.contains_interior(y) {
        return Err(Error::domain(format!(
            "kernel integral requires y in the interior, got {y}"
        )));
    }
    if !(a >= 0.0) {
        return Err(Error::domain(format!("kernel radius must be >= 0, got {a}")));
    }
    if a == 0.0 {
        return Ok(KernelValue::exact(0.0));
    }

    let density_part = match &m.kernel_closed_form {
        Some(KernelClosedForm::ConstantDensity { coef }) => {
            KernelValue::exact(constant_density_kernel(*coef, space, y, a))
        }
        Some(KernelClosedForm::CevPower { p }) => KernelValue::exact(cev_kernel(*p, y, a)),
        Some(KernelClosedForm::Custom(f)) => KernelValue::exact(f(y, a)),
        None => kernel_quadrature(m, space, y, a)?,
    };

    let mut atom_part = 0.0;
    for at in &m.atoms {
        let w = a - (at.position - y).abs();
        if w > 0.0 {
            atom_part += 0.5 * at.mass * w;
        }
    }

    Ok(KernelValue {
        value: density_part.value + atom_part,
        quadrature_error_bound: density_part.quadrature_error_bound,
    })
}

/// `m((lo, hi))`: density mass plus atoms strictly inside the open interval.
/// May be `+∞`.
pub fn measure_of_interval(m: &SpeedMeasure, lo: f64, hi: f64) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::domain(format!(
            "measure_of_interval requires lo < hi, got {lo}, {hi}"
        )));
    }
    let mut total = m.density.mass(lo, hi)?;
    for a in &m.atoms {
        if lo < a.position && a.position < hi {
            total += a.mass;
        }
    }
    Ok(total)
}

fn kernel_quadrature(m: &SpeedMeasure, space: &StateSpace, y: f64, a: f64) -> Result<KernelValue> {
    let lo = (y - a).max(space.l());
    let hi = (y + a).min(space.r());
    if !(lo < hi) {
        return Ok(KernelValue::exact(0.0));
    }

    let mut splits: Vec<f64> = vec![y];
    let mut singular: Vec<f64> = Vec::new();
    // boundaries reached by the window are treated as potentially singular
    if lo == space.l() {
        singular.push(lo);
    }
    if hi == space.r() {
        singular.push(hi);
    }
    for &s in &m.singular_points {
        if s > lo && s < hi {
            splits.push(s);
            singular.push(s);
        } else if s == lo || s == hi {
            singular.push(s);
        }
    }
    if let Density::PiecewiseLinear { knots } = &m.density {
        splits.extend(knots.iter().map(|k| k.0).filter(|&x| x > lo && x < hi));
    }
    splits.sort_by(f64::total_cmp);
    splits.dedup();

    let density = &m.density;
    let integrand = move |u: f64| (a - (u - y).abs()) * density.value(u);
    let out = quad::integrate(&integrand, lo, hi, &splits, &singular, quad::ABS_TOL, quad::REL_TOL)?;
    Ok(KernelValue {
        value: 0.5 * out.value,
        quadrature_error_bound: 0.5 * out.error,
    })
}

/// Kernel of `c·du` clipped to the state space: `(c/2)`× triangle area.
fn constant_density_kernel(c: f64, space: &StateSpace, y: f64, a: f64) -> f64 {
    let clip = |excess: f64| {
        if excess > 0.0 {
            0.5 * excess * excess
        } else {
            0.0
        }
    };
    // excess of the triangle hanging over each boundary
    let lower_excess = match space.lower().finite() {
        Some(l) => a - (y - l),
        None => f64::NEG_INFINITY,
    };
    let upper_excess = match space.upper().finite() {
        Some(r) => a - (r - y),
        None => f64::NEG_INFINITY,
    };
    let area = a * a - clip(lower_excess) - clip(upper_excess);
    0.5 * c * area
}

/// Closed-form kernel for the CEV density `2u^{−2p}` on `(0, ∞)`, any p < 1.
///
/// For `a ≤ y` this is the textbook formula; a series in `a/y` replaces it
/// when `a/y ≤ 1/2` to avoid cancellation. For `a > y` the window is clipped
/// at the origin: the value is `+∞` when `p ≥ 1/2` (non-integrable kernel
/// mass at 0) and evaluates in closed form otherwise.
pub(crate) fn cev_kernel(p: f64, y: f64, a: f64) -> f64 {
    debug_assert!(y > 0.0 && a >= 0.0);
    if a == 0.0 {
        return 0.0;
    }
    if a <= y {
        let x = a / y;
        if x <= 0.5 {
            return cev_kernel_series(p, y, x);
        }
        if p == 0.5 {
            // (y+a)·ln(1+a/y) + (y−a)·ln(1−a/y), with 0·ln 0 = 0 at a = y
            let up = (y + a) * x.ln_1p();
            let down = if a == y { 0.0 } else { (y - a) * (-x).ln_1p() };
            return up + down;
        }
        let q = 2.0 * (1.0 - p);
        let d = 2.0 * (2.0 * p - 1.0) * (1.0 - p);
        let bracket = 2.0 - (1.0 + x).powf(q) - (1.0 - x).powf(q);
        return y.powf(q) * bracket / d;
    }
    // a > y: window clipped to (0, y + a)
    if p >= 0.5 {
        return f64::INFINITY;
    }
    let s = 1.0 - 2.0 * p;
    let t = 2.0 - 2.0 * p;
    let i1 = (a - y) * y.powf(s) / s + y.powf(t) / t;
    let i2 = (a + y) * ((y + a).powf(s) - y.powf(s)) / s - ((y + a).powf(t) - y.powf(t)) / t;
    i1 + i2
}

/// Series `y^{2(1−p)} Σ_{j≥1} e_j x^{2j}` for the CEV kernel, `x = a/y ≤ 1/2`.
fn cev_kernel_series(p: f64, y: f64, x: f64) -> f64 {
    let q = 2.0 * (1.0 - p);
    let x2 = x * x;
    let mut coeff = 1.0; // e_1
    let mut term = x2;
    let mut sum = term;
    for j in 2..200 {
        let jj = 2.0 * j as f64;
        coeff *= (q - jj + 2.0) * (q - jj + 1.0) / ((jj - 1.0) * jj);
        term *= x2;
        let contrib = coeff * term;
        sum += contrib;
        if contrib.abs() < f64::EPSILON * sum.abs() {
            break;
        }
    }
    if p == 0.5 {
        y * sum
    } else {
        y.powf(q) * sum
    }
}

/// Brownian-motion speed measure `2·du` with the exact triangle closed form.
pub fn brownian_measure() -> SpeedMeasure {
    SpeedMeasure::new(Density::Constant(2.0), Vec::new())
        .expect("constant density is always valid")
        .with_closed_form(KernelClosedForm::ConstantDensity { coef: 2.0 })
}

/// Brownian motion plus one sticky atom.
pub fn sticky_brownian_measure(position: f64, mass: f64) -> Result<SpeedMeasure> {
    Ok(
        SpeedMeasure::new(Density::Constant(2.0), vec![Atom { position, mass }])?
            .with_closed_form(KernelClosedForm::ConstantDensity { coef: 2.0 }),
    )
}

/// CEV speed measure `2u^{−2p}·du` on `(0, ∞)` with its closed-form kernel
/// installed, or — with `extended` — `2|u|^{−2p}·du` on `ℝ∖{0}` (no closed
/// form, only allowed for `p < 1/2` where the extension stays locally finite).
pub fn cev_speed_measure(p: f64, extended: bool) -> Result<SpeedMeasure> {
    if !(p < 1.0) {
        return Err(Error::domain(format!(
            "CEV exponent must satisfy p < 1 (the origin is inaccessible otherwise), got {p}"
        )));
    }
    if extended {
        if !(p < 0.5) {
            return Err(Error::domain(format!(
                "the extended CEV measure requires p < 1/2 (local finiteness at 0), got {p}"
            )));
        }
        return Ok(SpeedMeasure::new(
            Density::Power { coef: 2.0, exponent: -2.0 * p, absolute: true },
            Vec::new(),
        )?
        .with_singular_points(vec![0.0]));
    }
    Ok(SpeedMeasure::new(
        Density::Power { coef: 2.0, exponent: -2.0 * p, absolute: false },
        Vec::new(),
    )?
    .with_closed_form(KernelClosedForm::CevPower { p }))
}

/// State space matching [`cev_speed_measure`]: `[0, ∞)` or all of `ℝ`.
pub fn cev_state_space(extended: bool) -> StateSpace {
    if extended {
        StateSpace::real_line()
    } else {
        StateSpace::nonnegative_halfline()
    }
}

/// Speed measure from tabulated `(x, density)` samples plus atoms.
pub fn tabulated_measure(knots: Vec<(f64, f64)>, atoms: Vec<Atom>) -> Result<SpeedMeasure> {
    if knots.len() < 2 {
        return Err(Error::domain("need at least two density samples"));
    }
    for w in knots.windows(2) {
        if !(w[0].0 < w[1].0) {
            return Err(Error::domain("density sample points must be strictly increasing"));
        }
    }
    if knots.iter().any(|k| !(k.1 >= 0.0) || !k.1.is_finite()) {
        return Err(Error::domain("density samples must be finite and nonnegative"));
    }
    SpeedMeasure::new(Density::PiecewiseLinear { knots }, atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::StateSpace;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const LN2: f64 = std::f64::consts::LN_2;

    fn kernel(m: &SpeedMeasure, space: &StateSpace, y: f64, a: f64) -> f64 {
        kernel_integral(m, space, y, a).unwrap().value
    }

    #[test]
    fn brownian_unit_triangle() {
        // m = 2·du on R, y = 0, a = 1: the triangle has area 1
        let m = brownian_measure();
        let space = StateSpace::real_line();
        assert_relative_eq!(kernel(&m, &space, 0.0, 1.0), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn cev_half_matches_log_formula() {
        // 2u^{-1}du on (0,∞), y = a = 1: (y+a)log(1+a/y) + (y−a)log(1−a/y) = 2 log 2
        let m = cev_speed_measure(0.5, false).unwrap();
        let space = cev_state_space(false);
        assert_relative_eq!(kernel(&m, &space, 1.0, 1.0), 2.0 * LN2, max_relative = 1e-14);
    }

    #[test]
    fn pure_atom_at_center() {
        let m = SpeedMeasure::new(Density::Zero, vec![Atom { position: 0.0, mass: 2.0 }]).unwrap();
        let space = StateSpace::real_line();
        assert_relative_eq!(kernel(&m, &space, 0.0, 1.0), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn density_plus_atom_is_additive() {
        let m = sticky_brownian_measure(0.0, 2.0).unwrap();
        let space = StateSpace::real_line();
        // 0.25 from the density triangle + 0.5 from the atom
        assert_relative_eq!(kernel(&m, &space, 0.0, 0.5), 0.75, max_relative = 1e-14);
    }

    #[test]
    fn interval_masses() {
        let brownian = brownian_measure();
        assert_relative_eq!(measure_of_interval(&brownian, 0.0, 3.0).unwrap(), 6.0);

        // CEV p=1/2 has infinite mass near the origin
        let cev = cev_speed_measure(0.5, false).unwrap();
        assert!(measure_of_interval(&cev, 0.0, 1.0).unwrap().is_infinite());

        let atom_only =
            SpeedMeasure::new(Density::Zero, vec![Atom { position: 0.5, mass: 3.0 }]).unwrap();
        assert_eq!(measure_of_interval(&atom_only, 0.0, 1.0).unwrap(), 3.0);
        // open interval: an atom on the endpoint does not count
        assert_eq!(measure_of_interval(&atom_only, 0.5, 1.0).unwrap(), 0.0);

        assert!(measure_of_interval(&brownian, 1.0, 1.0).is_err());
    }

    #[test]
    fn cev_constructor_variants() {
        let half = cev_speed_measure(0.5, false).unwrap();
        assert!(matches!(half.kernel_closed_form(), Some(KernelClosedForm::CevPower { .. })));
        assert_relative_eq!(half.density().value(2.0), 1.0);

        // p = 0 is Brownian motion on the half line
        let bm = cev_speed_measure(0.0, false).unwrap();
        assert_relative_eq!(bm.density().value(7.0), 2.0);

        // extended p = −1: density 2u² on ℝ∖{0}, no closed form
        let ext = cev_speed_measure(-1.0, true).unwrap();
        assert!(ext.kernel_closed_form().is_none());
        assert_relative_eq!(ext.density().value(-3.0), 18.0);
        assert_relative_eq!(ext.density().value(3.0), 18.0);

        assert!(cev_speed_measure(1.0, false).is_err());
        assert!(cev_speed_measure(0.5, true).is_err());
        assert!(cev_speed_measure(0.75, true).is_err());
    }

    #[test]
    fn kernel_rejects_exterior_y() {
        let m = cev_speed_measure(0.5, false).unwrap();
        let space = cev_state_space(false);
        assert!(kernel_integral(&m, &space, 0.0, 0.5).is_err());
        assert!(kernel_integral(&m, &space, -1.0, 0.5).is_err());
        assert!(kernel_integral(&m, &space, 1.0, -0.5).is_err());
    }

    #[test]
    fn cev_kernel_divergence_past_origin() {
        // window reaching past the accessible origin: infinite for p ≥ 1/2
        let m = cev_speed_measure(0.5, false).unwrap();
        let space = cev_state_space(false);
        assert!(kernel(&m, &space, 1.0, 2.0).is_infinite());
        // and finite for p < 1/2, matching quadrature
        let m = cev_speed_measure(0.25, false).unwrap();
        let space = cev_state_space(false);
        let closed = kernel(&m, &space, 1.0, 2.0);
        let numeric = kernel(&m.without_closed_form(), &space, 1.0, 2.0);
        assert_relative_eq!(closed, numeric, max_relative = 1e-8);
    }

    #[test]
    fn closed_form_matches_quadrature_on_grid() {
        // relative 1e-8 across y ∈ [0.1, 10], a ≤ y, several exponents
        for p in [0.5, 0.25, 0.75, 0.0, -1.0] {
            let m = cev_speed_measure(p, false).unwrap();
            let numeric = m.without_closed_form();
            let space = cev_state_space(false);
            for &y in &[0.1, 0.5, 1.0, 3.0, 10.0] {
                for frac in [0.1, 0.4, 0.7, 1.0] {
                    let a = frac * y;
                    let c = kernel(&m, &space, y, a);
                    let n = kernel(&numeric, &space, y, a);
                    assert_relative_eq!(c, n, max_relative = 1e-8);
                }
            }
        }
    }

    #[test]
    fn extended_cev_is_symmetric_and_finite_across_origin() {
        let m = cev_speed_measure(0.25, true).unwrap();
        let space = cev_state_space(true);
        let v = kernel(&m, &space, 0.5, 1.0); // window (−0.5, 1.5) across the singularity
        assert!(v.is_finite() && v > 0.0);
        let mirrored = kernel(&m, &space, -0.5, 1.0);
        assert_relative_eq!(v, mirrored, max_relative = 1e-7);
    }

    #[test]
    fn tabulated_density_kernel_and_mass() {
        // triangle-shaped density on [0, 2] peaking at 1 with value 2
        let m = tabulated_measure(vec![(0.0, 0.0), (1.0, 2.0), (2.0, 0.0)], Vec::new()).unwrap();
        assert_relative_eq!(measure_of_interval(&m, 0.0, 2.0).unwrap(), 2.0);
        assert_relative_eq!(measure_of_interval(&m, -5.0, 5.0).unwrap(), 2.0);
        let space = StateSpace::real_line();
        // quadrature is exact for piecewise-quadratic integrands
        let v = kernel(&m, &space, 1.0, 0.5);
        // 1/2 ∫_{0.5}^{1.5} (0.5−|u−1|)·d(u) du with d piecewise linear peak 2
        // by symmetry: ∫_{0.5}^{1} (u−0.5)·2u du = [2u³/3 − u²/2]_{0.5}^{1}
        let left: f64 = (2.0 / 3.0 - 0.5) - (2.0 * 0.125 / 3.0 - 0.125);
        let expect = left; // two halves, each times 1/2: 0.5·(left + right) with right = left
        assert_relative_eq!(v, expect, max_relative = 1e-12);

        assert!(tabulated_measure(vec![(0.0, 1.0)], Vec::new()).is_err());
        assert!(tabulated_measure(vec![(0.0, 1.0), (0.0, 2.0)], Vec::new()).is_err());
        assert!(tabulated_measure(vec![(0.0, 1.0), (1.0, -2.0)], Vec::new()).is_err());
    }

    #[test]
    fn atom_validation() {
        assert!(SpeedMeasure::new(
            Density::Zero,
            vec![Atom { position: 1.0, mass: 1.0 }, Atom { position: 1.0, mass: 2.0 }]
        )
        .is_err());
        assert!(SpeedMeasure::new(Density::Zero, vec![Atom { position: 1.0, mass: 0.0 }]).is_err());

        let m = SpeedMeasure::new(Density::Zero, vec![Atom { position: 0.0, mass: 1.0 }]).unwrap();
        let halfline = StateSpace::nonnegative_halfline();
        assert!(m.validate_for(&halfline).is_err());
        assert!(m.validate_for(&StateSpace::real_line()).is_ok());
    }

    #[test]
    fn local_finiteness_probe() {
        let bm = brownian_measure();
        assert!(bm.validate_locally_finite(0.1, 2.0, 8).is_ok());
        let cev = cev_speed_measure(0.5, false).unwrap();
        assert!(cev.validate_locally_finite(0.1, 2.0, 8).is_ok());
        assert!(cev.validate_locally_finite(0.0, 1.0, 4).is_err()); // infinite near 0
        let zero = SpeedMeasure::new(Density::Zero, Vec::new()).unwrap();
        assert!(zero.validate_locally_finite(0.0, 1.0, 2).is_err());
    }

    proptest! {
        // K is nondecreasing in the radius
        #[test]
        fn kernel_monotone_in_radius(y in 0.2f64..5.0, a1 in 0.01f64..1.0, a2 in 0.01f64..1.0) {
            let m = cev_speed_measure(0.5, false).unwrap();
            let space = cev_state_space(false);
            let (lo, hi) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
            let (lo, hi) = (lo.min(y), hi.min(y));
            let klo = kernel(&m, &space, y, lo);
            let khi = kernel(&m, &space, y, hi);
            prop_assert!(khi >= klo - 1e-12);
        }

        // linearity: doubling the density doubles the kernel, and the
        // density+atom kernel is the sum of the parts
        #[test]
        fn kernel_linear_in_measure(y in -2.0f64..2.0, a in 0.01f64..2.0, mass in 0.1f64..5.0) {
            let space = StateSpace::real_line();
            let single = SpeedMeasure::new(Density::Constant(2.0), Vec::new()).unwrap();
            let double = SpeedMeasure::new(Density::Constant(4.0), Vec::new()).unwrap();
            let atom = SpeedMeasure::new(Density::Zero, vec![Atom { position: 0.0, mass }]).unwrap();
            let combined = SpeedMeasure::new(Density::Constant(2.0), vec![Atom { position: 0.0, mass }]).unwrap();
            let ks = kernel(&single, &space, y, a);
            let kd = kernel(&double, &space, y, a);
            let ka = kernel(&atom, &space, y, a);
            let kc = kernel(&combined, &space, y, a);
            prop_assert!((kd - 2.0 * ks).abs() < 1e-10 * (1.0 + kd.abs()));
            prop_assert!((kc - (ks + ka)).abs() < 1e-10 * (1.0 + kc.abs()));
        }
    }
}
