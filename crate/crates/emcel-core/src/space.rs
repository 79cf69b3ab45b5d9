//! State spaces: intervals with possibly infinite endpoints.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// An extended-real interval endpoint.
///
/// Kept as an explicit sum type rather than a sentinel float so that the
/// "infinite endpoints are never part of the state space" invariant is
/// checkable by construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Endpoint {
    NegInf,
    Finite(f64),
    PosInf,
}

impl Endpoint {
    pub fn is_finite(&self) -> bool {
        matches!(self, Endpoint::Finite(_))
    }

    /// Finite value, if any.
    pub fn finite(&self) -> Option<f64> {
        match self {
            Endpoint::Finite(v) => Some(*v),
            _ => None,
        }
    }

    /// The endpoint as an f64 with `±inf` for the infinite variants.
    pub fn as_f64(&self) -> f64 {
        match self {
            Endpoint::NegInf => f64::NEG_INFINITY,
            Endpoint::Finite(v) => *v,
            Endpoint::PosInf => f64::INFINITY,
        }
    }
}

/// Which endpoint of the interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Lower,
    Upper,
}

/// A boundary point reached by a path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    Lower,
    Upper,
}

/// The state space `I` of a diffusion: an interval with endpoints `l < r`,
/// each either belonging to `I` or not. An accessible boundary is absorbing
/// and must be part of `I`; infinite endpoints never are.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    lower: Endpoint,
    upper: Endpoint,
    lower_included: bool,
    upper_included: bool,
}

impl StateSpace {
    pub fn new(
        lower: Endpoint,
        upper: Endpoint,
        lower_included: bool,
        upper_included: bool,
    ) -> Result<Self> {
        if !(lower.as_f64() < upper.as_f64()) {
            return Err(Error::domain(format!(
                "interval endpoints must satisfy l < r, got {lower:?}, {upper:?}"
            )));
        }
        if (lower_included && !lower.is_finite()) || (upper_included && !upper.is_finite()) {
            return Err(Error::domain(
                "an infinite endpoint cannot belong to the state space",
            ));
        }
        Ok(StateSpace {
            lower,
            upper,
            lower_included,
            upper_included,
        })
    }

    /// The whole real line.
    pub fn real_line() -> Self {
        StateSpace {
            lower: Endpoint::NegInf,
            upper: Endpoint::PosInf,
            lower_included: false,
            upper_included: false,
        }
    }

    /// The half line `[0, ∞)` with an absorbing origin.
    pub fn nonnegative_halfline() -> Self {
        StateSpace {
            lower: Endpoint::Finite(0.0),
            upper: Endpoint::PosInf,
            lower_included: true,
            upper_included: false,
        }
    }

    /// Closed interval `[l, r]`, both boundaries absorbing.
    pub fn closed(l: f64, r: f64) -> Result<Self> {
        StateSpace::new(Endpoint::Finite(l), Endpoint::Finite(r), true, true)
    }

    pub fn lower(&self) -> Endpoint {
        self.lower
    }

    pub fn upper(&self) -> Endpoint {
        self.upper
    }

    pub fn endpoint(&self, side: Side) -> Endpoint {
        match side {
            Side::Lower => self.lower,
            Side::Upper => self.upper,
        }
    }

    pub fn lower_included(&self) -> bool {
        self.lower_included
    }

    pub fn upper_included(&self) -> bool {
        self.upper_included
    }

    /// `l` as an f64 (−∞ allowed).
    pub fn l(&self) -> f64 {
        self.lower.as_f64()
    }

    /// `r` as an f64 (+∞ allowed).
    pub fn r(&self) -> f64 {
        self.upper.as_f64()
    }

    /// Strict interior `(l, r)`.
    pub fn contains_interior(&self, y: f64) -> bool {
        y.is_finite() && self.l() < y && y < self.r()
    }

    /// Membership in `I` itself, honoring endpoint inclusion.
    pub fn contains(&self, y: f64) -> bool {
        if self.contains_interior(y) {
            return true;
        }
        (self.lower_included && y == self.l()) || (self.upper_included && y == self.r())
    }

    /// Distance from `y` to the nearer endpoint; `+∞` on the full line.
    pub fn interior_radius(&self, y: f64) -> f64 {
        (y - self.l()).min(self.r() - y)
    }

    pub fn boundary_value(&self, boundary: Boundary) -> Endpoint {
        match boundary {
            Boundary::Lower => self.lower,
            Boundary::Upper => self.upper,
        }
    }
}
