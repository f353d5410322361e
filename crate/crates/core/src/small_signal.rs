//! Linearized analysis of the DC series-module current loop.
//!
//! Polynomials are stored as coefficient slices in descending powers of `s`.

use num_complex::Complex64;

use crate::error::{ensure_finite, ensure_positive, Error, Result};

/// Half-width of the band around the stability boundary reported as marginal.
pub const MARGINAL_BAND: f64 = 1e-9;

/// Parameters of the single-loop linear model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallSignalParams {
    pub l: f64,
    pub r: f64,
    pub c: f64,
    pub k_p: f64,
    pub k_i: f64,
    pub k_l: f64,
    pub k_c: f64,
    pub k_r: f64,
    /// Loop impedance seen by the virtual-inertia voltage loop.
    pub z: f64,
}

impl SmallSignalParams {
    pub fn validate(&self) -> Result<()> {
        ensure_finite(
            "small-signal parameters",
            &[
                self.l, self.r, self.c, self.k_p, self.k_i, self.k_l, self.k_c, self.k_r, self.z,
            ],
        )?;
        ensure_positive("l", self.l)?;
        ensure_positive("c", self.c)?;
        ensure_positive("z", self.z)?;
        if self.r < 0.0 {
            return Err(Error::Negative {
                name: "r",
                value: self.r,
            });
        }
        Ok(())
    }

    /// `K_C − K_r`.
    pub fn kappa(&self) -> f64 {
        self.k_c - self.k_r
    }
}

/// Ratio of two polynomials in `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTF {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

impl RationalTF {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        ensure_finite("transfer function", &num)?;
        ensure_finite("transfer function", &den)?;
        match den.first() {
            Some(&d) if d != 0.0 => Ok(RationalTF { num, den }),
            _ => Err(Error::ZeroLeadingCoefficient),
        }
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        polyval(&self.num, s) / polyval(&self.den, s)
    }

    pub fn eval_freq(&self, f_hz: f64) -> Complex64 {
        self.eval(Complex64::new(0.0, 2.0 * std::f64::consts::PI * f_hz))
    }
}

/// Horner evaluation of a descending-power polynomial.
pub fn polyval(coeffs: &[f64], s: Complex64) -> Complex64 {
    coeffs
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

/// Closed loop `ĩ/ĩ_ref` with both sides multiplied through by `s`.
///
/// Numerator `K_L s² + K_p s + K_i`, denominator
/// `(L + K_L) s² + (R + K_p − (K_C − K_r)/C) s + K_i + 1/C`.
pub fn closed_loop_tf(p: &SmallSignalParams) -> Result<RationalTF> {
    p.validate()?;
    RationalTF::new(
        vec![p.k_l, p.k_p, p.k_i],
        vec![
            p.l + p.k_l,
            p.r + p.k_p - p.kappa() / p.c,
            p.k_i + 1.0 / p.c,
        ],
    )
}

/// Characteristic polynomial `[L, R + K_p + K_L − (K_C − K_r)/C, K_i + 1/C]`.
pub fn characteristic_poly(p: &SmallSignalParams) -> [f64; 3] {
    [
        p.l,
        p.r + p.k_p + p.k_l - p.kappa() / p.c,
        p.k_i + 1.0 / p.c,
    ]
}

/// Both roots of `a2 s² + a1 s + a0`.
pub fn poles(poly: [f64; 3]) -> Result<[Complex64; 2]> {
    let [a2, a1, a0] = poly;
    ensure_finite("polynomial", &poly)?;
    if a2 == 0.0 {
        return Err(Error::ZeroLeadingCoefficient);
    }
    let disc = a1 * a1 - 4.0 * a2 * a0;
    if disc >= 0.0 {
        let sign = if a1 >= 0.0 { 1.0 } else { -1.0 };
        let q = -0.5 * (a1 + sign * disc.sqrt());
        if q == 0.0 {
            // a1 = 0 and a0 = 0: double root at the origin.
            return Ok([Complex64::new(0.0, 0.0); 2]);
        }
        Ok([Complex64::new(q / a2, 0.0), Complex64::new(a0 / q, 0.0)])
    } else {
        let re = -a1 / (2.0 * a2);
        let im = (-disc).sqrt() / (2.0 * a2.abs());
        Ok([Complex64::new(re, im), Complex64::new(re, -im)])
    }
}

/// `K_C − K_r < (R + K_p + K_L)·C`.
pub fn is_stable_condition(p: &SmallSignalParams) -> bool {
    p.kappa() < (p.r + p.k_p + p.k_l) * p.c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityVerdict {
    Stable,
    Marginal,
    Unstable,
}

/// Three-way form of [`is_stable_condition`] with a marginal band.
pub fn stability_verdict(p: &SmallSignalParams) -> StabilityVerdict {
    let margin = (p.r + p.k_p + p.k_l) * p.c - p.kappa();
    if margin.abs() <= MARGINAL_BAND {
        StabilityVerdict::Marginal
    } else if margin > 0.0 {
        StabilityVerdict::Stable
    } else {
        StabilityVerdict::Unstable
    }
}

/// `K_C` at which the stability margin reaches zero, with the other gains fixed.
pub fn critical_k_c(p: &SmallSignalParams) -> f64 {
    (p.r + p.k_p + p.k_l) * p.c + p.k_r
}

/// DC-link voltage response `−1/((C + K_C/Z)·s)`.
pub fn vic_tf(c: f64, k_c: f64, z: f64) -> Result<RationalTF> {
    ensure_positive("c", c)?;
    ensure_positive("z", z)?;
    RationalTF::new(vec![-1.0], vec![c + k_c / z, 0.0])
}

/// `K_C < Z·C`.
pub fn vic_stable(c: f64, k_c: f64, z: f64) -> bool {
    k_c < z * c
}

/// DC-link voltage response with the ripple term fed forward through a
/// first-order high-pass of cutoff `omega_c`:
/// `−((1 − K_r)s + ω_c)/(C s² + C ω_c s)`.
pub fn ripple_mitigated_tf(c: f64, k_r: f64, omega_c: f64) -> Result<RationalTF> {
    ensure_positive("c", c)?;
    ensure_positive("omega_c", omega_c)?;
    RationalTF::new(vec![-(1.0 - k_r), -omega_c], vec![c, c * omega_c, 0.0])
}

/// Real pole `−R/(L + K_L)` of the current loop.
pub fn current_loop_pole(r: f64, l: f64, k_l: f64) -> Result<f64> {
    ensure_positive("l + k_l", l + k_l)?;
    Ok(-r / (l + k_l))
}

/// One row of a Bode table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodePoint {
    pub f_hz: f64,
    pub gain_db: f64,
    pub phase_deg: f64,
}

/// Log-spaced frequency grid from `f_min` to `f_max` inclusive.
pub fn log_grid(f_min: f64, f_max: f64, points: usize) -> Result<Vec<f64>> {
    ensure_positive("f_min", f_min)?;
    ensure_positive("f_max", f_max)?;
    if points < 2 {
        return Err(Error::NonPositive {
            name: "points - 1",
            value: points as f64 - 1.0,
        });
    }
    if f_max <= f_min {
        return Err(Error::NonPositive {
            name: "f_max - f_min",
            value: f_max - f_min,
        });
    }
    let (a, b) = (f_min.log10(), f_max.log10());
    let n = (points - 1) as f64;
    Ok((0..points)
        .map(|k| match k {
            0 => f_min,
            k if k == points - 1 => f_max,
            k => 10f64.powf(a + (b - a) * k as f64 / n),
        })
        .collect())
}

/// Gain (dB) and unwrapped phase (degrees) on a log grid.
pub fn bode_sample(
    tf: &RationalTF,
    f_min: f64,
    f_max: f64,
    points: usize,
) -> Result<Vec<BodePoint>> {
    let grid = log_grid(f_min, f_max, points)?;
    let mut out: Vec<BodePoint> = Vec::with_capacity(points);
    for f in grid {
        let h = tf.eval_freq(f);
        let mut phase = h.arg().to_degrees();
        if let Some(prev) = out.last() {
            phase -= 360.0 * ((phase - prev.phase_deg) / 360.0).round();
        }
        out.push(BodePoint {
            f_hz: f,
            gain_db: 20.0 * h.norm().log10(),
            phase_deg: phase,
        });
    }
    Ok(out)
}

/// Characteristic polynomial of the loop when the ripple measurement is a
/// first-order high-pass `s/(s + ω_c)` of `V_dc` rather than a pure
/// derivative. Cubic, descending powers.
pub fn filtered_characteristic_poly(p: &SmallSignalParams, omega_c: f64) -> Result<[f64; 4]> {
    p.validate()?;
    ensure_positive("omega_c", omega_c)?;
    let b2 = p.l + p.k_l;
    let b1 = p.r + p.k_p - p.k_c / p.c;
    let b0 = p.k_i + 1.0 / p.c;
    Ok([
        b2,
        omega_c * b2 + b1,
        omega_c * b1 + b0 + p.k_r / p.c,
        omega_c * b0,
    ])
}

/// Routh–Hurwitz test for a cubic with positive leading coefficient.
pub fn cubic_is_hurwitz(poly: [f64; 4]) -> bool {
    let [a3, a2, a1, a0] = poly;
    a3 > 0.0 && a2 > 0.0 && a1 > 0.0 && a0 > 0.0 && a2 * a1 > a3 * a0
}

/// All complex roots of a polynomial by Durand–Kerner iteration.
pub fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    ensure_finite("polynomial", coeffs)?;
    let lead = match coeffs.first() {
        Some(&c) if c != 0.0 => c,
        _ => return Err(Error::ZeroLeadingCoefficient),
    };
    let monic: Vec<f64> = coeffs.iter().map(|c| c / lead).collect();
    let n = monic.len() - 1;
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32)).collect();
    for _ in 0..2000 {
        let mut delta: f64 = 0.0;
        for i in 0..n {
            let num = polyval(&monic, z[i]);
            let den = (0..n)
                .filter(|&j| j != i)
                .fold(Complex64::new(1.0, 0.0), |acc, j| acc * (z[i] - z[j]));
            let step = num / den;
            if step.is_finite() {
                z[i] -= step;
                delta = delta.max(step.norm() / z[i].norm().max(1.0));
            }
        }
        if delta < 1e-15 {
            break;
        }
    }
    Ok(z)
}
