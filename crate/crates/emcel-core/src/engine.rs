//! Streaming exit-time samplers.
//!
//! Monte-Carlo estimation needs only the two boundary hitting times of each
//! path, so paths are never stored. The workhorse configuration — the CEV
//! measure with `p = 1/2` under (possibly truncated) EMCEL — additionally
//! runs eight paths at a time through branch-free lanes that the compiler
//! vectorizes; the lane kernel reuses the exact scalar step arithmetic, so
//! batched and scalar simulations of the same path agree bit for bit. Every
//! other scheme goes through a scalar driver built on the public scale-factor
//! interface.

use rayon::prelude::*;

use crate::chain::{classify_step, ExitTime, StepOutcome, MAX_PATH_STEPS};
use crate::error::{Error, Result};
use crate::measure::KernelClosedForm;
use crate::rng::CoinStream;
use crate::scale::{
    emcel_cev_value, ScaleFactorScheme, SchemeKind, CEV_HALF_SERIES_CUT, INVERSE_SERIES,
};
use crate::space::Boundary;

const LANES: usize = 8;
const CHUNK: usize = 8192;

pub(crate) type ExitPair = (ExitTime, ExitTime);

/// Simulate `n_paths` chains and collect their `(lower, upper)` exit-time
/// observations in path order. Deterministic in the arguments regardless of
/// thread count or scheduling.
pub(crate) fn sample_exit_pairs(
    scheme: &ScaleFactorScheme,
    y0: f64,
    h: f64,
    n_paths: usize,
    horizon_t: f64,
    base_seed: u64,
) -> Result<Vec<ExitPair>> {
    scheme.validate_h(h)?;
    if !scheme.space().contains_interior(y0) {
        return Err(Error::domain(format!("starting point {y0} is not interior")));
    }
    if !(horizon_t > 0.0) {
        return Err(Error::domain("horizon must be positive"));
    }
    let n_steps = (horizon_t / h).ceil() as u64;
    if n_steps == 0 || n_steps > MAX_PATH_STEPS * 100 {
        return Err(Error::domain(format!("horizon of {n_steps} steps is out of range")));
    }

    let lane_kernel = cev_half_lane_kernel(scheme, h)?;
    let starts: Vec<usize> = (0..n_paths).step_by(CHUNK).collect();
    let chunks: Result<Vec<Vec<ExitPair>>> = starts
        .par_iter()
        .map(|&start| {
            let end = (start + CHUNK).min(n_paths);
            match lane_kernel {
                Some(lbar) => Ok(run_cev_half_lanes(y0, h, n_steps, base_seed, lbar, start..end)),
                None => (start..end)
                    .map(|i| scalar_exit_pair(scheme, y0, h, n_steps, base_seed, i as u64))
                    .collect(),
            }
        })
        .collect();
    let mut out = Vec::with_capacity(n_paths);
    for c in chunks? {
        out.extend(c);
    }
    Ok(out)
}

/// One path through the generic scheme interface.
fn scalar_exit_pair(
    scheme: &ScaleFactorScheme,
    y0: f64,
    h: f64,
    n_steps: u64,
    base_seed: u64,
    path_index: u64,
) -> Result<ExitPair> {
    let mut stream = CoinStream::for_path(base_seed, path_index);
    let mut x = y0;
    for k in 0..n_steps {
        let a = scheme.scale_factor(h, x)?;
        if a == 0.0 {
            return Ok((ExitTime::Infinite, ExitTime::Infinite));
        }
        let up = stream.next_coin();
        let next = if up { x + a } else { x - a };
        match classify_step(scheme.space(), x, a, next)? {
            StepOutcome::Interior(v) => x = v,
            StepOutcome::Absorbed(Boundary::Lower, _) => {
                return Ok((ExitTime::Finite((k + 1) as f64 * h), ExitTime::Infinite));
            }
            StepOutcome::Absorbed(Boundary::Upper, _) => {
                return Ok((ExitTime::Infinite, ExitTime::Finite((k + 1) as f64 * h)));
            }
        }
    }
    let horizon = n_steps as f64 * h;
    Ok((ExitTime::Censored { horizon }, ExitTime::Censored { horizon }))
}

/// Detect the batched configuration: EMCEL (plain or truncated) for the CEV
/// closed-form measure with `p = 1/2` and no atoms. Returns the freeze level
/// (`0` for the plain scheme, where it is unreachable).
fn cev_half_lane_kernel(scheme: &ScaleFactorScheme, h: f64) -> Result<Option<f64>> {
    if !scheme.measure().atoms().is_empty() {
        return Ok(None);
    }
    match (scheme.kind(), scheme.measure().kernel_closed_form()) {
        (SchemeKind::Emcel, Some(KernelClosedForm::CevPower { p })) if *p == 0.5 => Ok(Some(0.0)),
        (SchemeKind::TruncatedEmcel { .. }, Some(KernelClosedForm::CevPower { p }))
            if *p == 0.5 =>
        {
            Ok(Some(scheme.truncation_level(h)?))
        }
        _ => Ok(None),
    }
}

/// Eight-lane driver for the CEV `p = 1/2` EMCEL step `a = y·G(h/y)`.
///
/// The fast region `h/y < CEV_HALF_SERIES_CUT` is branch-free per lane and
/// uses the same series Horner as the scalar inverse; boundary-layer steps,
/// truncation freezes and horizon hits are rare events handled per lane with
/// the exact scalar arithmetic.
fn run_cev_half_lanes(
    y0: f64,
    h: f64,
    n_steps: u64,
    base_seed: u64,
    lbar: f64,
    range: std::ops::Range<usize>,
) -> Vec<ExitPair> {
    let first = range.start;
    let n = range.len();
    let mut out: Vec<ExitPair> = vec![(ExitTime::Infinite, ExitTime::Infinite); n];
    let horizon = n_steps as f64 * h;
    let censored = (ExitTime::Censored { horizon }, ExitTime::Censored { horizon });

    const IDLE: f64 = 1e30; // parks inactive lanes far from every event

    let mut y = [IDLE; LANES];
    let mut streams: Vec<Option<CoinStream>> = (0..LANES).map(|_| None).collect();
    let mut buf = [0u64; LANES];
    let mut used = [64u32; LANES];
    let mut k = [0u64; LANES];
    let mut slot = [usize::MAX; LANES];
    let mut next_local = 0usize;
    let mut n_alive = 0usize;

    macro_rules! load_lane {
        ($lane:expr) => {{
            let lane = $lane;
            if next_local < n {
                streams[lane] = Some(CoinStream::for_path(base_seed, (first + next_local) as u64));
                buf[lane] = 0;
                used[lane] = 64;
                k[lane] = 0;
                slot[lane] = next_local;
                y[lane] = y0;
                next_local += 1;
                n_alive += 1;
            } else {
                streams[lane] = None;
                slot[lane] = usize::MAX;
                k[lane] = 0;
                y[lane] = IDLE;
            }
        }};
    }
    for lane in 0..LANES {
        load_lane!(lane);
    }

    while n_alive > 0 {
        // fast-region step for all lanes (vectorizes: div, fma chain, sqrt)
        let mut z = [0.0f64; LANES];
        for i in 0..LANES {
            z[i] = h / y[i];
        }
        let mut acc = [INVERSE_SERIES[19]; LANES];
        for c in (0..19).rev() {
            for i in 0..LANES {
                acc[i] = acc[i] * z[i] + INVERSE_SERIES[c];
            }
        }
        let mut a = [0.0f64; LANES];
        for i in 0..LANES {
            a[i] = (z[i] * acc[i]).sqrt() * y[i];
        }

        // coins: one predictable refill branch per lane
        let mut up = [false; LANES];
        for i in 0..LANES {
            if used[i] == 64 {
                if let Some(s) = streams[i].as_mut() {
                    buf[i] = s.next_word();
                }
                used[i] = 0;
            }
            up[i] = (buf[i] >> used[i]) & 1 == 1;
            used[i] += 1;
        }

        let mut y_new = [0.0f64; LANES];
        for i in 0..LANES {
            let signed = if up[i] { a[i] } else { -a[i] };
            y_new[i] = y[i] + signed;
        }

        let mut events = 0u32;
        for i in 0..LANES {
            let ev = z[i] >= CEV_HALF_SERIES_CUT || y[i] < lbar || k[i] + 1 >= n_steps;
            events |= (ev as u32) << i;
        }

        if events == 0 {
            for i in 0..LANES {
                y[i] = y_new[i];
            }
            for i in 0..LANES {
                k[i] += 1;
            }
            continue;
        }

        for i in 0..LANES {
            if events & (1 << i) == 0 {
                y[i] = y_new[i];
                k[i] += 1;
                continue;
            }
            if slot[i] == usize::MAX {
                k[i] = 0; // idle lane, nothing to do
                continue;
            }
            let mut finished: Option<ExitPair> = None;
            if y[i] < lbar {
                // truncated family: scale factor vanishes, the path freezes
                finished = Some((ExitTime::Infinite, ExitTime::Infinite));
            } else {
                // exact scalar step (series or bisection branch, clamp at y)
                let exact_a = emcel_cev_value(0.5, y[i], h);
                let next = if up[i] { y[i] + exact_a } else { y[i] - exact_a };
                if next <= 0.0 {
                    finished =
                        Some((ExitTime::Finite((k[i] + 1) as f64 * h), ExitTime::Infinite));
                } else {
                    y[i] = next;
                    k[i] += 1;
                    if k[i] >= n_steps {
                        finished = Some(censored);
                    }
                }
            }
            if let Some(pair) = finished {
                out[slot[i]] = pair;
                n_alive -= 1;
                load_lane!(i);
            }
        }
    }
    out
}
