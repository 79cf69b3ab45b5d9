//! Simulation of one-dimensional continuous strong Markov processes in
//! natural scale ("general diffusions") through coin-tossing Markov chains.
//!
//! A diffusion is described by its state space and speed measure. A scheme is
//! a family of scale factors `a_h`: the chain moves from `y` to `y ± a_h(y)`
//! with probability 1/2 each, and is linearly interpolated in time. The crate
//! provides
//!
//! * speed measures with densities and atoms, and the triangular-kernel
//!   integral that controls the expected one-step duration
//!   ([`kernel_integral`]),
//! * scale-factor families: EMCEL (the step solves `kernel = h`), the weak
//!   Euler scheme for CEV diffusions, a truncated-EMCEL family whose exit
//!   times fail to converge, and custom factors ([`ScaleFactorScheme`]),
//! * numerical audits of the accuracy conditions (A), (B) and (D)
//!   ([`conditions`]),
//! * chain simulation with exit- and hitting-time extraction ([`chain`]),
//! * closed-form reference laws (CEV absorption, squared-Bessel zero
//!   hitting, Brownian interval exit) ([`reference`]),
//! * Monte-Carlo estimation of exit-time laws with truncated
//!   Kolmogorov-Smirnov distances ([`montecarlo`]).
//!
//! All types are immutable after construction and safe to share across
//! threads; all randomness is derived deterministically from explicit seeds.

pub mod chain;
pub mod conditions;
mod engine;
pub mod error;
pub mod measure;
pub mod montecarlo;
mod quad;
pub mod reference;
pub mod rng;
pub mod scale;
mod solve;
pub mod space;
pub mod special;

pub use chain::{
    compactified_distance, hitting_time, path_value, simulate_chain, ChainPath, ExitTime,
    ExtendedTime,
};
pub use conditions::{
    check_condition_a, check_condition_b, check_condition_d, ConditionFit, ConditionKind,
    ConditionOptions, ConditionReport, ConditionRow, TrendPolicy,
};
pub use error::{Error, Result};
pub use measure::{
    brownian_measure, cev_speed_measure, kernel_integral, measure_of_interval,
    sticky_brownian_measure, tabulated_measure, Atom, Density, KernelClosedForm, KernelValue,
    SpeedMeasure,
};
pub use montecarlo::{
    estimate_exit_law, expected_functional, ks_distance_truncated, EmpiricalLaw, ExitLawEstimate,
};
pub use reference::{
    besq_hit_zero_law, bm_exit_interval_law, cev_absorption_law, cev_to_besq, BesqTransform,
    ReferenceLaw,
};
pub use rng::{mix_seed, splitmix64, CoinStream, RNG_DESCRIPTION};
pub use scale::{
    admissible_set_contains, boundary_threshold, emcel_scale, scale_dump, truncated_emcel_scale,
    weak_euler_cev_scale, ScaleDumpRow, SchemeKind, ScaleFactorScheme, TruncationRule,
};
pub use space::{Boundary, Endpoint, Side, StateSpace};
