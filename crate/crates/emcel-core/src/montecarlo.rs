//! Monte-Carlo estimation of exit-time laws.
//!
//! Paths are simulated with deterministic per-path seeds and reduced in a
//! fixed pairwise order, so every estimate is reproducible bit for bit
//! independently of thread count. Censored observations (paths alive at the
//! horizon) enter the truncated statistics only through their mass beyond
//! `T`; nothing is imputed.

use rayon::prelude::*;

use crate::chain::{ChainPath, ExitTime};
use crate::engine;
use crate::error::{Error, Result};
use crate::reference::ReferenceLaw;
use crate::rng::mix_seed;
use crate::scale::ScaleFactorScheme;

/// Empirical distribution of a hitting time on `[0, ∞]` with explicit
/// censoring at a horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalLaw {
    finite: Vec<f64>, // sorted
    n_infinite: usize,
    n_censored_beyond_t: usize,
    horizon_t: f64,
    n_total: usize,
}

impl EmpiricalLaw {
    pub fn from_observations<I>(observations: I, horizon_t: f64) -> Result<Self>
    where
        I: IntoIterator<Item = ExitTime>,
    {
        if !(horizon_t > 0.0) {
            return Err(Error::domain("horizon must be positive"));
        }
        let mut finite = Vec::new();
        let mut n_infinite = 0;
        let mut n_censored = 0;
        for obs in observations {
            match obs {
                ExitTime::Finite(t) => finite.push(t),
                ExitTime::Infinite => n_infinite += 1,
                ExitTime::Censored { .. } => n_censored += 1,
            }
        }
        finite.sort_by(f64::total_cmp);
        let n_total = finite.len() + n_infinite + n_censored;
        if n_total == 0 {
            return Err(Error::domain("need at least one observation"));
        }
        Ok(EmpiricalLaw {
            finite,
            n_infinite,
            n_censored_beyond_t: n_censored,
            horizon_t,
            n_total,
        })
    }

    /// Empirical cdf at `t`; meaningful for `t` up to the horizon.
    pub fn cdf(&self, t: f64) -> f64 {
        let count = self.finite.partition_point(|&s| s <= t);
        count as f64 / self.n_total as f64
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn n_finite(&self) -> usize {
        self.finite.len()
    }

    pub fn n_infinite(&self) -> usize {
        self.n_infinite
    }

    pub fn n_censored_beyond_t(&self) -> usize {
        self.n_censored_beyond_t
    }

    pub fn horizon_t(&self) -> f64 {
        self.horizon_t
    }

    /// Sorted finite hitting times.
    pub fn finite_samples(&self) -> &[f64] {
        &self.finite
    }
}

/// Empirical laws of the two boundary hitting times and of their minimum.
#[derive(Clone, Debug, PartialEq)]
pub struct ExitLawEstimate {
    pub lower: EmpiricalLaw,
    pub upper: EmpiricalLaw,
    pub first_exit: EmpiricalLaw,
}

/// Estimate the joint boundary-exit law from `n_paths` simulated chains.
///
/// Path `i` uses the seed `mix_seed(base_seed, i)`; results are independent
/// of threading.
pub fn estimate_exit_law(
    scheme: &ScaleFactorScheme,
    y0: f64,
    h: f64,
    n_paths: usize,
    horizon_t: f64,
    base_seed: u64,
) -> Result<ExitLawEstimate> {
    if n_paths == 0 {
        return Err(Error::domain("need at least one path"));
    }
    let pairs = engine::sample_exit_pairs(scheme, y0, h, n_paths, horizon_t, base_seed)?;
    let lower = EmpiricalLaw::from_observations(pairs.iter().map(|p| p.0), horizon_t)?;
    let upper = EmpiricalLaw::from_observations(pairs.iter().map(|p| p.1), horizon_t)?;
    let first_exit =
        EmpiricalLaw::from_observations(pairs.iter().map(|p| first_of(p.0, p.1)), horizon_t)?;
    Ok(ExitLawEstimate { lower, upper, first_exit })
}

fn first_of(a: ExitTime, b: ExitTime) -> ExitTime {
    use ExitTime::*;
    match (a, b) {
        (Finite(s), Finite(t)) => Finite(s.min(t)),
        (Finite(s), _) | (_, Finite(s)) => Finite(s),
        (Censored { horizon: h1 }, Censored { horizon: h2 }) => {
            Censored { horizon: h1.min(h2) }
        }
        (Censored { horizon }, Infinite) | (Infinite, Censored { horizon }) => {
            Censored { horizon }
        }
        (Infinite, Infinite) => Infinite,
    }
}

/// Kolmogorov–Smirnov distance between the empirical law and a reference,
/// restricted to `[0, t_max]` with `t_max` at or below the censoring horizon.
pub fn ks_distance_truncated(
    emp: &EmpiricalLaw,
    law: &ReferenceLaw,
    t_max: f64,
) -> Result<f64> {
    if !(t_max > 0.0 && t_max <= emp.horizon_t) {
        return Err(Error::domain(format!(
            "t_max must lie in (0, horizon] = (0, {}], got {t_max}",
            emp.horizon_t
        )));
    }
    let n = emp.n_total as f64;
    let upto = emp.finite.partition_point(|&s| s <= t_max);
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < upto {
        let t = emp.finite[i];
        let mut j = i + 1;
        while j < upto && emp.finite[j] == t {
            j += 1;
        }
        let before = i as f64 / n;
        let after = j as f64 / n;
        let f = law.cdf(t);
        d = d.max((after - f).abs()).max((f - before).abs());
        i = j;
    }
    // plateau from the last jump to t_max, and the case of no jumps at all
    let f_end = law.cdf(t_max);
    let emp_end = upto as f64 / n;
    Ok(d.max((f_end - emp_end).abs()))
}

/// Sample mean and standard error of a bounded functional of
/// `(H_lower, H_upper, path)` over `n_paths` simulated chains.
///
/// The functional receives the exit-time observations (censored at the
/// horizon) and the full interpolated path.
pub fn expected_functional<F>(
    scheme: &ScaleFactorScheme,
    y0: f64,
    h: f64,
    n_paths: usize,
    functional: F,
    horizon_t: f64,
    base_seed: u64,
) -> Result<(f64, f64)>
where
    F: Fn(&ExitTime, &ExitTime, &ChainPath) -> f64 + Sync,
{
    if n_paths < 2 {
        return Err(Error::domain("need at least two paths for a standard error"));
    }
    let values: Result<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .with_min_len(64)
        .map(|i| {
            let path = crate::chain::simulate_chain_from_stream(
                scheme,
                y0,
                h,
                horizon_t,
                crate::rng::CoinStream::from_seed(mix_seed(base_seed, i as u64)),
            )?;
            let (lo, hi) = path.exit_times();
            Ok(functional(&lo, &hi, &path))
        })
        .collect();
    let values = values?;
    let n = values.len() as f64;
    let mean = pairwise_sum(&values) / n;
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Summation in a fixed binary-tree order: deterministic and more accurate
/// than a running sum.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
