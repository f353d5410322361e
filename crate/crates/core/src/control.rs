//! Discrete-time series-module controllers.
//!
//! Both controllers run once per simulation tick with the tick length as the
//! sample time. Integrators use conditional integration: while an output is
//! saturated the integrator keeps the value it had when saturation began.
//! Derivatives are backward differences of stored samples and are zero on the
//! first call.

use std::f64::consts::PI;

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::phasor::Phasor;
use crate::powerflow::DqInjection;

/// Default proportional gain (V/A).
pub const DEFAULT_KP: f64 = 100.0;
/// Default integral gain (V/(A·s)).
pub const DEFAULT_KI: f64 = 50.0;
/// Injection limit as a fraction of the nominal line voltage.
pub const DEFAULT_V_MAX_FRACTION: f64 = 0.1;
/// Cutoff of the ripple-isolation filter (Hz).
pub const DEFAULT_RIPPLE_CUTOFF_HZ: f64 = 10.0;

/// One PI axis with clamp and conditional integration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct PiAxis {
    integrator: f64,
}

impl PiAxis {
    /// Returns the saturated output; `extra` is added before saturation.
    fn step(&mut self, kp: f64, ki: f64, error: f64, extra: f64, dt: f64, v_max: f64) -> f64 {
        let candidate = self.integrator + error * dt;
        let v = kp * error + ki * candidate + extra;
        if v > v_max {
            v_max
        } else if v < -v_max {
            -v_max
        } else {
            self.integrator = candidate;
            v
        }
    }
}

/// State of an AC series module: dq PI current loop.
#[derive(Debug, Clone, PartialEq)]
pub struct AcSeriesModuleState {
    pub kp: f64,
    pub ki: f64,
    pub v_max: f64,
    d: PiAxis,
    q: PiAxis,
    pub last: DqInjection,
}

impl AcSeriesModuleState {
    pub fn new(kp: f64, ki: f64, v_max: f64) -> Result<Self> {
        check_gain("kp", kp)?;
        check_gain("ki", ki)?;
        check_gain("v_max", v_max)?;
        Ok(AcSeriesModuleState {
            kp,
            ki,
            v_max,
            d: PiAxis::default(),
            q: PiAxis::default(),
            last: DqInjection::default(),
        })
    }

    /// Default gains with the injection limit at 10 % of `v_nominal`.
    pub fn with_defaults(v_nominal: f64) -> Self {
        Self::new(DEFAULT_KP, DEFAULT_KI, DEFAULT_V_MAX_FRACTION * v_nominal)
            .expect("default gains are valid")
    }

    pub fn integrators(&self) -> (f64, f64) {
        (self.d.integrator, self.q.integrator)
    }

    pub fn reset(&mut self) {
        self.d = PiAxis::default();
        self.q = PiAxis::default();
        self.last = DqInjection::default();
    }
}

fn check_gain(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Negative { name, value: v })
    }
}

/// `(P_ref/|V|, Q_ref/|V|)`.
pub fn ac_reference_currents(p_ref: f64, q_ref: f64, v_mag: f64) -> Result<(f64, f64)> {
    if v_mag <= 0.0 || !v_mag.is_finite() {
        return Err(Error::ZeroVoltage(v_mag));
    }
    Ok((p_ref / v_mag, q_ref / v_mag))
}

/// One tick of the dq PI law with mismatch feedforward.
pub fn ac_pi_step(
    state: &mut AcSeriesModuleState,
    i_ref: (f64, f64),
    i_meas: (f64, f64),
    feedforward: (f64, f64),
    dt: f64,
) -> Result<DqInjection> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::NonPositiveStep(dt));
    }
    ensure_finite(
        "ac_pi_step",
        &[
            i_ref.0,
            i_ref.1,
            i_meas.0,
            i_meas.1,
            feedforward.0,
            feedforward.1,
        ],
    )?;
    let (kp, ki, vm) = (state.kp, state.ki, state.v_max);
    let v_d = state
        .d
        .step(kp, ki, i_ref.0 - i_meas.0, feedforward.0, dt, vm);
    let v_q = state
        .q
        .step(kp, ki, i_ref.1 - i_meas.1, feedforward.1, dt, vm);
    state.last = DqInjection::new(v_d, v_q);
    Ok(state.last)
}

/// Phase and magnitude mismatch corrections `(v_m,d, v_m,q)`.
///
/// `delta_theta` is the feeder-to-bus phase error and `delta` the feeder angle.
pub fn mismatch_feedforward(
    v_mag: f64,
    v_bus: Phasor,
    v_feeder: Phasor,
    delta_theta: f64,
    delta: f64,
) -> (f64, f64) {
    let chord = 2.0 * v_mag * (delta_theta / 2.0).sin();
    let v_m_d = chord * delta.cos();
    let v_m_q = (v_feeder - v_bus).magnitude() + chord * delta.sin();
    (v_m_d, v_m_q)
}

/// State of a DC series module.
#[derive(Debug, Clone, PartialEq)]
pub struct DcSeriesModuleState {
    pub kp: f64,
    pub ki: f64,
    pub k_r: f64,
    pub k_c: f64,
    pub k_l: f64,
    pub v_max: f64,
    pi: PiAxis,
    prev_error: Option<f64>,
    prev_v_dc: Option<f64>,
    pub last: f64,
}

/// Gains of a DC series module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcGains {
    pub kp: f64,
    pub ki: f64,
    pub k_r: f64,
    pub k_c: f64,
    pub k_l: f64,
}

impl Default for DcGains {
    fn default() -> Self {
        DcGains {
            kp: DEFAULT_KP,
            ki: DEFAULT_KI,
            k_r: 0.0,
            k_c: 0.0,
            k_l: 0.0,
        }
    }
}

impl DcSeriesModuleState {
    pub fn new(gains: DcGains, v_max: f64) -> Result<Self> {
        check_gain("kp", gains.kp)?;
        check_gain("ki", gains.ki)?;
        check_gain("k_r", gains.k_r)?;
        check_gain("k_c", gains.k_c)?;
        check_gain("k_l", gains.k_l)?;
        check_gain("v_max", v_max)?;
        Ok(DcSeriesModuleState {
            kp: gains.kp,
            ki: gains.ki,
            k_r: gains.k_r,
            k_c: gains.k_c,
            k_l: gains.k_l,
            v_max,
            pi: PiAxis::default(),
            prev_error: None,
            prev_v_dc: None,
            last: 0.0,
        })
    }

    pub fn gains(&self) -> DcGains {
        DcGains {
            kp: self.kp,
            ki: self.ki,
            k_r: self.k_r,
            k_c: self.k_c,
            k_l: self.k_l,
        }
    }

    pub fn integrator(&self) -> f64 {
        self.pi.integrator
    }

    pub fn reset(&mut self) {
        self.pi = PiAxis::default();
        self.prev_error = None;
        self.prev_v_dc = None;
        self.last = 0.0;
    }
}

/// Inputs of one DC controller tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcMeasurements {
    pub i_ref: f64,
    pub i_meas: f64,
    pub v_ripple_meas: f64,
    pub v_dc: f64,
    pub v_mismatch: f64,
}

/// One tick of the DC injection law: PI, ripple feedforward, virtual inertia
/// and mismatch feedforward, saturated to `±v_max`.
pub fn dc_injection_step(
    state: &mut DcSeriesModuleState,
    m: DcMeasurements,
    dt: f64,
) -> Result<f64> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::NonPositiveStep(dt));
    }
    ensure_finite(
        "dc_injection_step",
        &[m.i_ref, m.i_meas, m.v_ripple_meas, m.v_dc, m.v_mismatch],
    )?;
    let e = m.i_ref - m.i_meas;
    let de_dt = state.prev_error.map_or(0.0, |p| (e - p) / dt);
    let dv_dt = state.prev_v_dc.map_or(0.0, |p| (m.v_dc - p) / dt);
    let extra = -state.k_r * m.v_ripple_meas
        + virtual_inertia_term(state.k_c, state.k_l, dv_dt, de_dt)
        + m.v_mismatch;
    let (kp, ki, vm) = (state.kp, state.ki, state.v_max);
    let v = state.pi.step(kp, ki, e, extra, dt, vm);
    state.prev_error = Some(e);
    state.prev_v_dc = Some(m.v_dc);
    state.last = v;
    Ok(v)
}

/// `K_C·dV_dc/dt + K_L·de/dt`.
pub fn virtual_inertia_term(k_c: f64, k_l: f64, dvdc_dt: f64, de_dt: f64) -> f64 {
    k_c * dvdc_dt + k_l * de_dt
}

/// `|V_i − V_j|`.
pub fn dc_mismatch(v_i: f64, v_j: f64) -> f64 {
    (v_i - v_j).abs()
}

/// Droop law `V0 − m·i`.
pub fn droop_step(v0: f64, slope: f64, i_meas: f64) -> f64 {
    v0 - slope * i_meas
}

/// First-order low-pass filter, exactly discretized for a held input.
///
/// The high-pass output is `x − low_pass(x)`, so the two paths sum to the
/// input sample by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderFilter {
    alpha: f64,
    y: Option<f64>,
}

impl FirstOrderFilter {
    pub fn new(cutoff_hz: f64, dt: f64) -> Result<Self> {
        ensure_positive("cutoff_hz", cutoff_hz)?;
        ensure_positive("dt", dt)?;
        Ok(FirstOrderFilter {
            alpha: 1.0 - (-2.0 * PI * cutoff_hz * dt).exp(),
            y: None,
        })
    }

    /// Advances the filter and returns the low-pass output. The first sample
    /// initializes the state, so a constant input yields zero high-pass output.
    pub fn low_pass(&mut self, x: f64) -> f64 {
        let y = match self.y {
            None => x,
            Some(y) => y + self.alpha * (x - y),
        };
        self.y = Some(y);
        y
    }

    pub fn high_pass(&mut self, x: f64) -> f64 {
        x - self.low_pass(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dc_state(gains: DcGains) -> DcSeriesModuleState {
        DcSeriesModuleState::new(gains, 1e9).unwrap()
    }

    fn meas(i_ref: f64, i_meas: f64) -> DcMeasurements {
        DcMeasurements {
            i_ref,
            i_meas,
            v_ripple_meas: 0.0,
            v_dc: 400.0,
            v_mismatch: 0.0,
        }
    }

    const ZERO: DcGains = DcGains {
        kp: 0.0,
        ki: 0.0,
        k_r: 0.0,
        k_c: 0.0,
        k_l: 0.0,
    };

    #[test]
    fn reference_currents() {
        assert_eq!(
            ac_reference_currents(2300.0, 0.0, 230.0).unwrap(),
            (10.0, 0.0)
        );
        assert_eq!(ac_reference_currents(0.0, 0.0, 7.0).unwrap(), (0.0, 0.0));
        assert_eq!(
            ac_reference_currents(1000.0, 500.0, 100.0).unwrap(),
            (10.0, 5.0)
        );
        assert!(matches!(
            ac_reference_currents(1.0, 1.0, 0.0),
            Err(Error::ZeroVoltage(_))
        ));
    }

    #[test]
    fn ac_pi_examples() {
        let mut s = AcSeriesModuleState::new(100.0, 50.0, 1e3).unwrap();
        let v = ac_pi_step(&mut s, (0.01, 0.0), (0.0, 0.0), (0.0, 0.0), 1e-4).unwrap();
        assert!((v.v_d - 1.00005).abs() < 1e-12);
        assert_eq!(v.v_q, 0.0);

        let mut s = AcSeriesModuleState::new(100.0, 50.0, 1e3).unwrap();
        let v = ac_pi_step(&mut s, (3.0, -2.0), (3.0, -2.0), (0.0, 0.0), 1e-4).unwrap();
        assert_eq!(v, DqInjection::new(0.0, 0.0));
        assert_eq!(s.integrators(), (0.0, 0.0));

        assert!(ac_pi_step(&mut s, (f64::NAN, 0.0), (0.0, 0.0), (0.0, 0.0), 1e-4).is_err());
        assert!(ac_pi_step(&mut s, (0.0, 0.0), (0.0, 0.0), (0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn ac_pi_constant_error_ramps_then_saturates() {
        let (kp, ki, e, dt) = (100.0, 50.0, 0.1, 1e-4);
        let mut s = AcSeriesModuleState::new(kp, ki, 10.5).unwrap();
        let mut last = 0.0;
        for n in 1..=3000 {
            let v = ac_pi_step(&mut s, (e, 0.0), (0.0, 0.0), (0.0, 0.0), dt)
                .unwrap()
                .v_d;
            // Closed-form discrete integration: kp·e + ki·e·n·dt.
            let unsat = kp * e + ki * e * n as f64 * dt;
            if unsat <= 10.5 {
                assert!((v - unsat).abs() < 1e-9);
            } else {
                assert_eq!(v, 10.5);
            }
            last = v;
        }
        assert_eq!(last, 10.5);
    }

    #[test]
    fn anti_windup_freezes_integrator() {
        let mut s = AcSeriesModuleState::new(1.0, 10.0, 2.0).unwrap();
        let dt = 1e-3;
        // Drive towards saturation.
        let mut at_entry = None;
        for _ in 0..500 {
            let before = s.integrators().0;
            let v = ac_pi_step(&mut s, (1.5, 0.0), (0.0, 0.0), (0.0, 0.0), dt)
                .unwrap()
                .v_d;
            if v == 2.0 && at_entry.is_none() {
                at_entry = Some(before);
            }
        }
        let entry = at_entry.expect("saturated");
        assert_eq!(s.integrators().0, entry);
        // Leave saturation with a small error: integrator resumes from the entry value.
        let v = ac_pi_step(&mut s, (0.0, 0.0), (0.0, 0.0), (0.0, 0.0), dt)
            .unwrap()
            .v_d;
        assert!(v.abs() < 2.0);
        assert_eq!(s.integrators().0, entry);
    }

    #[test]
    fn mismatch_examples() {
        let v = Phasor::new(230.0, 0.0);
        assert_eq!(mismatch_feedforward(230.0, v, v, 0.0, 0.0), (0.0, 0.0));
        let (d, q) = mismatch_feedforward(230.0, Phasor::new(225.0, 0.0), v, 0.0, 0.0);
        assert_eq!(d, 0.0);
        assert!((q - 5.0).abs() < 1e-12);
        let (d, q) = mismatch_feedforward(230.0, v, v, 0.02, 0.0);
        assert!((d - 4.599_923_334_068_99).abs() < 1e-9);
        assert_eq!(q, 0.0);
    }

    #[test]
    fn dc_injection_examples() {
        let mut s = dc_state(ZERO);
        let mut m = meas(3.0, 1.0);
        m.v_mismatch = 5.0;
        assert_eq!(dc_injection_step(&mut s, m, 1e-4).unwrap(), 5.0);

        let mut s = dc_state(DcGains { k_r: 1.0, ..ZERO });
        let mut m = meas(0.0, 0.0);
        m.v_ripple_meas = 2.0;
        assert_eq!(dc_injection_step(&mut s, m, 1e-4).unwrap(), -2.0);

        let mut s = dc_state(DcGains {
            kp: 100.0,
            ki: 50.0,
            ..ZERO
        });
        let v = dc_injection_step(&mut s, meas(0.01, 0.0), 1e-4).unwrap();
        assert!((v - 1.00005).abs() < 1e-12);

        let mut m = meas(0.0, 0.0);
        m.v_dc = f64::INFINITY;
        assert!(dc_injection_step(&mut s, m, 1e-4).is_err());
    }

    #[test]
    fn dc_saturation_clamps() {
        let mut s = DcSeriesModuleState::new(DcGains::default(), 40.0).unwrap();
        assert_eq!(
            dc_injection_step(&mut s, meas(10.0, 0.0), 1e-4).unwrap(),
            40.0
        );
        assert_eq!(s.integrator(), 0.0);
        assert_eq!(
            dc_injection_step(&mut s, meas(-10.0, 0.0), 1e-4).unwrap(),
            -40.0
        );
    }

    #[test]
    fn inertia_term_examples() {
        assert_eq!(virtual_inertia_term(0.0, 0.0, 123.0, -7.0), 0.0);
        assert!((virtual_inertia_term(0.01, 0.0, 100.0, 0.0) - 1.0).abs() < 1e-15);
        assert!((virtual_inertia_term(0.0, 0.001, 0.0, 500.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn inertia_terms_vanish_on_constant_signals() {
        let mut s = dc_state(DcGains {
            kp: 0.0,
            ki: 0.0,
            k_r: 0.0,
            k_c: 0.5,
            k_l: 0.2,
        });
        let m = meas(2.0, 1.0);
        for _ in 0..5 {
            assert_eq!(dc_injection_step(&mut s, m, 1e-4).unwrap(), 0.0);
        }
        // A step in V_dc shows up once through K_C, then vanishes again.
        let mut m2 = m;
        m2.v_dc = 401.0;
        let v = dc_injection_step(&mut s, m2, 1e-4).unwrap();
        assert!((v - 0.5 * 1.0 / 1e-4).abs() < 1e-6);
        assert_eq!(dc_injection_step(&mut s, m2, 1e-4).unwrap(), 0.0);
    }

    #[test]
    fn mismatch_and_droop_examples() {
        assert_eq!(dc_mismatch(400.0, 400.0), 0.0);
        assert_eq!(dc_mismatch(400.0, 395.0), 5.0);
        assert_eq!(dc_mismatch(395.0, 400.0), 5.0);
        assert_eq!(droop_step(400.0, 0.5, 10.0), 395.0);
        assert_eq!(droop_step(400.0, 0.0, 77.0), 400.0);
        assert!((droop_step(230.0, 0.1, -10.0) - 231.0).abs() < 1e-12);
    }

    #[test]
    fn filter_paths_sum_to_input() {
        let mut lp = FirstOrderFilter::new(10.0, 1e-4).unwrap();
        let mut hp = FirstOrderFilter::new(10.0, 1e-4).unwrap();
        assert_eq!(hp.high_pass(400.0), 0.0);
        lp.low_pass(400.0);
        for n in 0..1000 {
            let x = 400.0 + 5.0 * (2.0 * PI * 100.0 * n as f64 * 1e-4).sin();
            let a = lp.low_pass(x);
            let b = hp.high_pass(x);
            assert!((a + b - x).abs() < 1e-9);
        }
        // 100 Hz passes a 10 Hz high-pass almost unattenuated.
        let mut hp = FirstOrderFilter::new(10.0, 1e-4).unwrap();
        let mut peak: f64 = 0.0;
        for n in 0..20000 {
            let x = (2.0 * PI * 100.0 * n as f64 * 1e-4).sin();
            let y = hp.high_pass(x);
            if n > 10000 {
                peak = peak.max(y.abs());
            }
        }
        assert!(peak > 0.98 && peak < 1.01);
    }

    proptest! {
        #[test]
        fn zero_gains_pass_mismatch_through(v in -30.0f64..30.0, i in -50.0f64..50.0, r in -5.0f64..5.0) {
            let mut s = dc_state(ZERO);
            let mut m = meas(i, -i);
            m.v_mismatch = v;
            m.v_ripple_meas = r;
            prop_assert_eq!(dc_injection_step(&mut s, m, 1e-4).unwrap(), v);
        }

        #[test]
        fn pi_is_linear_in_error(alpha in -10.0f64..10.0, errs in proptest::collection::vec(-1.0f64..1.0, 1..50)) {
            let mut a = AcSeriesModuleState::new(100.0, 50.0, 1e12).unwrap();
            let mut b = AcSeriesModuleState::new(100.0, 50.0, 1e12).unwrap();
            for e in errs {
                let va = ac_pi_step(&mut a, (e, -e), (0.0, 0.0), (0.0, 0.0), 1e-4).unwrap();
                let vb = ac_pi_step(&mut b, (alpha * e, -alpha * e), (0.0, 0.0), (0.0, 0.0), 1e-4).unwrap();
                prop_assert!((vb.v_d - alpha * va.v_d).abs() <= 1e-9 * (1.0 + vb.v_d.abs()));
                prop_assert!((vb.v_q - alpha * va.v_q).abs() <= 1e-9 * (1.0 + vb.v_q.abs()));
            }
        }
    }
}
