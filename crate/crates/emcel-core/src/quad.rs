//! Adaptive quadrature with declared singular points.
//!
//! Plain segments use adaptive Simpson. Segments abutting a singular point
//! are integrated over geometrically shrinking shells toward it, which both
//! handles integrable endpoint singularities and *witnesses* divergence: if
//! the shell contributions stop decreasing, the integral is reported as +∞
//! rather than silently truncated.

use crate::error::{Error, Result};

pub(crate) const ABS_TOL: f64 = 1e-12;
pub(crate) const REL_TOL: f64 = 1e-10;

const MAX_DEPTH: u32 = 60;
const MAX_SHELLS: usize = 1100;
const STALL_SHELLS: usize = 50;

#[derive(Clone, Copy, Debug)]
pub(crate) struct QuadOutcome {
    pub value: f64, // +inf when the integral diverges
    pub error: f64,
}

/// Integrate `f` over `(lo, hi)` splitting at `splits` (sorted, strictly
/// inside). Points listed in `singular` (and only those) may carry
/// non-integrable behavior; each must equal `lo`, `hi` or one of the splits.
pub(crate) fn integrate(
    f: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    splits: &[f64],
    singular: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadOutcome> {
    if !(lo < hi) {
        return Ok(QuadOutcome { value: 0.0, error: 0.0 });
    }
    let mut points = Vec::with_capacity(splits.len() + 2);
    points.push(lo);
    points.extend(splits.iter().copied().filter(|&s| s > lo && s < hi));
    points.push(hi);

    let is_singular = |x: f64| singular.iter().any(|&s| s == x);

    let mut value = 0.0;
    let mut error = 0.0;
    let seg_tol = abs_tol / points.len() as f64;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let out = segment(f, a, b, is_singular(a), is_singular(b), seg_tol, rel_tol)?;
        if out.value.is_infinite() {
            return Ok(QuadOutcome { value: f64::INFINITY, error: f64::INFINITY });
        }
        value += out.value;
        error += out.error;
    }
    Ok(QuadOutcome { value, error })
}

fn segment(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    singular_lo: bool,
    singular_hi: bool,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadOutcome> {
    match (singular_lo, singular_hi) {
        (false, false) => simpson_segment(f, a, b, abs_tol, rel_tol),
        (true, false) => shells(f, a, b, true, abs_tol, rel_tol),
        (false, true) => shells(f, a, b, false, abs_tol, rel_tol),
        (true, true) => {
            let m = 0.5 * (a + b);
            let left = shells(f, a, m, true, 0.5 * abs_tol, rel_tol)?;
            if left.value.is_infinite() {
                return Ok(left);
            }
            let right = shells(f, m, b, false, 0.5 * abs_tol, rel_tol)?;
            Ok(QuadOutcome {
                value: left.value + right.value,
                error: left.error + right.error,
            })
        }
    }
}

/// Geometric shells toward the singular endpoint.
fn shells(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    toward_lo: bool,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadOutcome> {
    let width = b - a;
    let mut total = 0.0;
    let mut error = 0.0;
    let mut prev: Option<f64> = None;
    let mut stalled = 0usize;
    let mut frac = 1.0;
    for _ in 0..MAX_SHELLS {
        let next_frac = frac * 0.5;
        let (s_lo, s_hi) = if toward_lo {
            (a + width * next_frac, a + width * frac)
        } else {
            (b - width * frac, b - width * next_frac)
        };
        if !(s_lo < s_hi) {
            break; // exhausted floating point toward the singularity
        }
        let shell = simpson_segment(f, s_lo, s_hi, abs_tol * next_frac.max(1e-6), rel_tol)?;
        if shell.value.is_infinite() {
            return Ok(shell);
        }
        total += shell.value;
        error += shell.error;
        if total.abs() > 1e300 {
            return Ok(QuadOutcome { value: f64::INFINITY, error: f64::INFINITY });
        }
        let mag = shell.value.abs();
        if let Some(p) = prev {
            if mag >= 0.999 * p && mag > 0.0 {
                stalled += 1;
                if stalled >= STALL_SHELLS {
                    // contributions not decaying: divergent by the Cauchy test
                    return Ok(QuadOutcome { value: f64::INFINITY, error: f64::INFINITY });
                }
            } else {
                stalled = 0;
            }
            // tail estimate from the measured decay ratio
            let ratio = if p > 0.0 { (mag / p).min(0.99) } else { 0.0 };
            let tail = mag * ratio / (1.0 - ratio);
            if tail < abs_tol.max(rel_tol * total.abs()) && mag < abs_tol.max(rel_tol * total.abs()) {
                return Ok(QuadOutcome { value: total, error: error + tail });
            }
        }
        prev = Some(mag);
        frac = next_frac;
    }
    Ok(QuadOutcome { value: total, error })
}

fn simpson_segment(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadOutcome> {
    let m = 0.5 * (a + b);
    let fa = eval(f, a)?;
    let fm = eval(f, m)?;
    let fb = eval(f, b)?;
    if fa.is_infinite() || fm.is_infinite() || fb.is_infinite() {
        return Ok(QuadOutcome { value: f64::INFINITY, error: f64::INFINITY });
    }
    let whole = simpson(a, b, fa, fm, fb);
    adapt(f, a, b, fa, fm, fb, whole, abs_tol.max(rel_tol * whole.abs()), MAX_DEPTH)
}

#[inline]
fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn eval(f: &dyn Fn(f64) -> f64, x: f64) -> Result<f64> {
    let v = f(x);
    if v.is_nan() {
        return Err(Error::numerical(format!("integrand returned NaN at {x}")));
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn adapt(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<QuadOutcome> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = eval(f, lm)?;
    let frm = eval(f, rm)?;
    if flm.is_infinite() || frm.is_infinite() {
        return Ok(QuadOutcome { value: f64::INFINITY, error: f64::INFINITY });
    }
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || (m <= a || m >= b) {
        return Ok(QuadOutcome {
            value: left + right + delta / 15.0,
            error: delta.abs() / 15.0,
        });
    }
    let l = adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    if l.value.is_infinite() {
        return Ok(l);
    }
    let r = adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Ok(QuadOutcome {
        value: l.value + r.value,
        error: l.error + r.error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(f: impl Fn(f64) -> f64, lo: f64, hi: f64, singular: &[f64]) -> f64 {
        integrate(&f, lo, hi, &[], singular, ABS_TOL, REL_TOL)
            .unwrap()
            .value
    }

    #[test]
    fn polynomial_is_exact() {
        let v = quad(|x| 3.0 * x * x, 0.0, 2.0, &[]);
        assert!((v - 8.0).abs() < 1e-12);
    }

    #[test]
    fn integrable_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let v = quad(|x| x.powf(-0.5), 0.0, 1.0, &[0.0]);
        assert!((v - 2.0).abs() < 1e-9, "v = {v}");
    }

    #[test]
    fn log_divergence_is_reported_infinite() {
        // ∫_0^1 2/x dx = ∞, shells contribute a constant each
        let v = quad(|x| 2.0 / x, 0.0, 1.0, &[0.0]);
        assert!(v.is_infinite());
    }

    #[test]
    fn power_divergence_is_reported_infinite() {
        let v = quad(|x| x.powf(-1.5), 0.0, 1.0, &[0.0]);
        assert!(v.is_infinite());
    }

    #[test]
    fn splits_handle_kinks() {
        // ∫_{-1}^{1} |x| dx = 1, kink declared as split
        let v = integrate(&|x: f64| x.abs(), -1.0, 1.0, &[0.0], &[], ABS_TOL, REL_TOL)
            .unwrap()
            .value;
        assert!((v - 1.0).abs() < 1e-13);
    }

    #[test]
    fn singular_interior_point_both_sides() {
        // ∫_{-1}^{1} |x|^{-1/2} dx = 4 with singularity at the split point
        let v = integrate(
            &|x: f64| x.abs().powf(-0.5),
            -1.0,
            1.0,
            &[0.0],
            &[0.0],
            ABS_TOL,
            REL_TOL,
        )
        .unwrap()
        .value;
        assert!((v - 4.0).abs() < 1e-8, "v = {v}");
    }
}
