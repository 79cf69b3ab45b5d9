//! Root finding on monotone functions.
//!
//! The integral equations solved in this crate all involve functions that are
//! continuous and nondecreasing in the unknown, so unconditionally convergent
//! bisection is used throughout; a log-space variant keeps relative accuracy
//! for roots spanning many orders of magnitude.

use crate::error::{Error, Result};

pub(crate) const MAX_ITER: usize = 200;

/// Bisection on `[lo, hi]` for a nondecreasing `f` with `f(lo) ≤ target ≤ f(hi)`,
/// to absolute tolerance `tol` on the argument.
pub(crate) fn bisect_monotone<F>(f: F, mut lo: f64, mut hi: f64, target: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    for _ in 0..MAX_ITER {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // interval exhausted in floating point
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Bisection in `log(a)` for a nondecreasing `f` on `(0, hi]`; achieves
/// *relative* accuracy `rel_tol` on the root. `f(lo) ≤ target ≤ f(hi)` with
/// `lo > 0` is required.
pub(crate) fn bisect_monotone_log<F>(f: F, lo: f64, hi: f64, target: f64, rel_tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let mut llo = lo.ln();
    let mut lhi = hi.ln();
    let ltol = rel_tol.ln_1p(); // log(1 + rel_tol)
    for _ in 0..MAX_ITER {
        if lhi - llo <= ltol {
            break;
        }
        let lmid = 0.5 * (llo + lhi);
        if f(lmid.exp()) < target {
            llo = lmid;
        } else {
            lhi = lmid;
        }
    }
    (0.5 * (llo + lhi)).exp()
}

/// Outcome of a bracket search for `f(a) ≥ target` on `(0, a_cap]`.
pub(crate) enum Bracket {
    /// `f(bracket.0) < target ≤ f(bracket.1)`.
    Found(f64, f64),
    /// `f` stays below `target` on the whole range (sup value returned).
    Below(f64),
}

/// Expand geometrically from `a0` until a nondecreasing `f` reaches `target`,
/// capping at `a_cap` (which may be `+∞` if `f` is known to be unbounded).
pub(crate) fn expand_bracket<F>(f: F, a0: f64, a_cap: f64, target: f64) -> Result<Bracket>
where
    F: Fn(f64) -> f64,
{
    debug_assert!(a0 > 0.0);
    let mut lo = 0.0;
    let mut a = a0.min(a_cap);
    for _ in 0..MAX_ITER {
        let v = f(a);
        if v.is_nan() {
            return Err(Error::numerical(format!(
                "monotone bracket search hit NaN at a = {a}"
            )));
        }
        if v >= target {
            return Ok(Bracket::Found(lo, a));
        }
        if a >= a_cap {
            return Ok(Bracket::Below(v));
        }
        lo = a;
        a = (a * 2.0).min(a_cap);
    }
    Err(Error::numerical(
        "bracket expansion did not reach the target within the iteration cap",
    ))
}
