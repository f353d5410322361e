//! Post-processing of recorded signals.

use std::f64::consts::PI;

use crate::error::{ensure_positive, Error, Result};

/// Minimum number of whole periods required by [`ripple_amplitude`].
pub const MIN_PERIODS: usize = 10;

/// Amplitude of the `f`-hertz component of `signal` sampled every `dt`.
///
/// Projects the trailing whole number of periods onto `sin` and `cos` at `f`.
/// The window is exact when `1/(f·dt)` is an integer.
pub fn ripple_amplitude(signal: &[f64], dt: f64, f: f64) -> Result<f64> {
    ensure_positive("dt", dt)?;
    ensure_positive("f", f)?;
    let samples_per_period = 1.0 / (f * dt);
    let needed = (MIN_PERIODS as f64 * samples_per_period).ceil() as usize;
    let periods = (signal.len() as f64 / samples_per_period).floor();
    if periods < MIN_PERIODS as f64 {
        return Err(Error::SignalTooShort {
            needed,
            got: signal.len(),
        });
    }
    let n = ((periods * samples_per_period).round() as usize).min(signal.len());
    let window = &signal[signal.len() - n..];
    let w = 2.0 * PI * f * dt;
    let (mut a, mut b) = (0.0, 0.0);
    for (k, x) in window.iter().enumerate() {
        let (s, c) = (w * k as f64).sin_cos();
        a += x * s;
        b += x * c;
    }
    Ok(2.0 / n as f64 * a.hypot(b))
}

/// Time from `t_start` until `x` stays within `band·|target|` of `target`.
///
/// `None` when the signal is still outside the band at its last sample.
pub fn settling_time(t: &[f64], x: &[f64], target: f64, band: f64, t_start: f64) -> Option<f64> {
    let tol = band * target.abs();
    let outside = |v: f64| !((v - target).abs() <= tol);
    let first = t.iter().position(|&ti| ti >= t_start)?;
    if outside(*x.last()?) {
        return None;
    }
    let last_out = (first..x.len()).rev().find(|&k| outside(x[k]));
    Some(match last_out {
        None => 0.0,
        Some(k) => t[k + 1] - t_start,
    })
}

/// Peak-to-peak of a slice.
pub fn peak_to_peak(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if x.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// True when the last tenth of `x` swings at least 90 % as much as the tenth
/// before it and more than 1 % of `|reference|`.
pub fn sustained_oscillation(x: &[f64], reference: f64) -> bool {
    let w = x.len() / 10;
    if w < 2 {
        return false;
    }
    let last = peak_to_peak(&x[x.len() - w..]);
    let prev = peak_to_peak(&x[x.len() - 2 * w..x.len() - w]);
    last >= 0.9 * prev && last > 0.01 * reference.abs()
}

/// `|i_1 − i_2| / mean(|i_1|, |i_2|)`.
pub fn sharing_error(i1: f64, i2: f64) -> Option<f64> {
    let mean = 0.5 * (i1.abs() + i2.abs());
    (mean > 0.0).then(|| (i1 - i2).abs() / mean)
}
