//! Phasor algebra and line impedances.
//!
//! Phasors are stored in rectangular form; polar form is only produced or
//! consumed at the API boundary. All quantities are SI (volts, amps, ohms).

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex AC quantity (voltage or current), positive-sequence equivalent.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Phasor(Complex64);

impl Phasor {
    pub const ZERO: Phasor = Phasor(Complex64::new(0.0, 0.0));

    pub const fn new(re: f64, im: f64) -> Self {
        Phasor(Complex64::new(re, im))
    }

    /// Builds a phasor from magnitude and angle (radians).
    pub fn from_polar(magnitude: f64, angle: f64) -> Result<Self> {
        if magnitude < 0.0 || magnitude.is_nan() {
            return Err(Error::NegativeMagnitude(magnitude));
        }
        Ok(Phasor(Complex64::from_polar(magnitude, angle)))
    }

    pub fn re(self) -> f64 {
        self.0.re
    }

    pub fn im(self) -> f64 {
        self.0.im
    }

    pub fn magnitude(self) -> f64 {
        self.0.norm()
    }

    /// Angle in radians, in `(-π, π]`.
    pub fn angle(self) -> f64 {
        self.0.arg()
    }

    pub fn to_polar(self) -> (f64, f64) {
        (self.magnitude(), self.angle())
    }

    pub fn conj(self) -> Self {
        Phasor(self.0.conj())
    }

    pub fn scale(self, k: f64) -> Self {
        Phasor(self.0 * k)
    }

    pub fn as_complex(self) -> Complex64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.re.is_finite() && self.0.im.is_finite()
    }
}

impl From<Complex64> for Phasor {
    fn from(c: Complex64) -> Self {
        Phasor(c)
    }
}

impl fmt::Display for Phasor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.6}∠{:.4}°",
            self.magnitude(),
            self.angle() * 180.0 / PI
        )
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $op:tt) => {
        impl $tr for Phasor {
            type Output = Phasor;
            fn $m(self, rhs: Phasor) -> Phasor {
                Phasor(self.0 $op rhs.0)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);
binop!(Div, div, /);

impl Neg for Phasor {
    type Output = Phasor;
    fn neg(self) -> Phasor {
        Phasor(-self.0)
    }
}

/// Series line impedance `R + jX` at the nominal grid frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Impedance {
    pub r: f64,
    pub x: f64,
}

impl Impedance {
    pub const fn new(r: f64, x: f64) -> Self {
        Impedance { r, x }
    }

    /// Impedance of an R-L line at angular frequency `omega` (rad/s).
    pub fn from_rl(r: f64, l: f64, omega: f64) -> Self {
        Impedance { r, x: omega * l }
    }

    pub fn magnitude(self) -> f64 {
        self.r.hypot(self.x)
    }

    /// Inductance equivalent to the reactance at `omega`.
    pub fn inductance(self, omega: f64) -> f64 {
        self.x / omega
    }

    pub fn as_phasor(self) -> Phasor {
        Phasor::new(self.r, self.x)
    }

    pub(crate) fn checked(self) -> Result<Self> {
        if self.magnitude() > 0.0 && self.r.is_finite() && self.x.is_finite() {
            Ok(self)
        } else {
            Err(Error::ZeroImpedance)
        }
    }
}

/// Angle of the line impedance, `atan2(X, R)`.
pub fn impedance_angle(z: Impedance) -> Result<f64> {
    let z = z.checked()?;
    Ok(z.x.atan2(z.r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn polar_examples() {
        let p = Phasor::from_polar(1.0, 0.0).unwrap();
        assert_eq!((p.re(), p.im()), (1.0, 0.0));
        let p = Phasor::from_polar(2.0, FRAC_PI_2).unwrap();
        assert!(close(p.re(), 0.0, 1e-15) && close(p.im(), 2.0, 1e-15));
        let p = Phasor::from_polar(0.5, PI).unwrap();
        assert!(close(p.re(), -0.5, 1e-15) && close(p.im(), 0.0, 1e-15));
    }

    #[test]
    fn negative_magnitude_rejected() {
        assert_eq!(
            Phasor::from_polar(-1.0, 0.0),
            Err(Error::NegativeMagnitude(-1.0))
        );
    }

    #[test]
    fn impedance_angle_examples() {
        assert_eq!(impedance_angle(Impedance::new(1.0, 0.0)).unwrap(), 0.0);
        assert!(close(
            impedance_angle(Impedance::new(0.0, 1.0)).unwrap(),
            FRAC_PI_2,
            1e-15
        ));
        assert!(close(
            impedance_angle(Impedance::new(1.0, 1.0)).unwrap(),
            FRAC_PI_4,
            1e-15
        ));
        assert_eq!(
            impedance_angle(Impedance::new(0.0, 0.0)),
            Err(Error::ZeroImpedance)
        );
    }

    proptest! {
        #[test]
        fn polar_round_trip(m in 1e-6f64..1e6, a in -3.1f64..3.1) {
            let (m2, a2) = Phasor::from_polar(m, a).unwrap().to_polar();
            prop_assert!(((m2 - m) / m).abs() < 1e-12);
            prop_assert!((a2 - a).abs() < 1e-12);
        }

        #[test]
        fn product_magnitudes_and_angles(
            m1 in 1e-3f64..1e3, a1 in -3.0f64..3.0,
            m2 in 1e-3f64..1e3, a2 in -3.0f64..3.0,
        ) {
            let p = Phasor::from_polar(m1, a1).unwrap() * Phasor::from_polar(m2, a2).unwrap();
            prop_assert!(((p.magnitude() - m1 * m2) / (m1 * m2)).abs() < 1e-12);
            let d = (p.angle() - (a1 + a2)).rem_euclid(2.0 * PI);
            prop_assert!(d < 1e-12 || 2.0 * PI - d < 1e-12);
            let c = Phasor::from_polar(m1, a1).unwrap().conj();
            prop_assert!((c.magnitude() - m1).abs() <= 1e-12 * m1);
        }

        #[test]
        fn impedance_angle_scale_invariant(r in 0.0f64..10.0, x in -10.0f64..10.0, k in 1e-3f64..1e3) {
            prop_assume!(r.hypot(x) > 1e-9);
            let a = impedance_angle(Impedance::new(r, x)).unwrap();
            let b = impedance_angle(Impedance::new(k * r, k * x)).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(a > -FRAC_PI_2 - 1e-15 && a <= FRAC_PI_2);
        }
    }
}
