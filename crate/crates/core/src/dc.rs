//! DC-link and DC line dynamics, load models and sizing formulas.

use std::f64::consts::PI;

use crate::error::{ensure_finite, ensure_positive, Error, Result};

/// Default voltage floor used by constant-power loads.
pub const DEFAULT_CPL_FLOOR: f64 = 1.0;

/// Hub voltage and the current of one measured line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcPlantState {
    pub v_dc: f64,
    pub i_meas: f64,
}

impl DcPlantState {
    pub fn new(v_dc: f64, i_meas: f64) -> Self {
        DcPlantState { v_dc, i_meas }
    }

    pub fn is_finite(&self) -> bool {
        self.v_dc.is_finite() && self.i_meas.is_finite()
    }
}

/// Load attached to a DC node. Currents are drawn from the node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadModel {
    Resistive {
        r: f64,
    },
    ConstantPower {
        p: f64,
    },
    ConstantCurrent {
        i: f64,
    },
    /// Sinusoidal current `ΔI·sin(ωt)`.
    RippleSource {
        delta_i: f64,
        omega: f64,
    },
}

impl LoadModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LoadModel::Resistive { r } => ensure_positive("r", r),
            LoadModel::ConstantPower { p } => ensure_finite("p", &[p]),
            LoadModel::ConstantCurrent { i } => ensure_finite("i", &[i]),
            LoadModel::RippleSource { delta_i, omega } => {
                ensure_finite("delta_i", &[delta_i])?;
                ensure_positive("omega", omega)
            }
        }
    }

    /// Current drawn at node voltage `v` and time `t`.
    pub fn current(&self, v: f64, t: f64, v_floor: f64) -> f64 {
        match *self {
            LoadModel::Resistive { r } => v / r,
            LoadModel::ConstantPower { p } => cpl_current(p, v, v_floor),
            LoadModel::ConstantCurrent { i } => i,
            LoadModel::RippleSource { delta_i, omega } => delta_i * (omega * t).sin(),
        }
    }
}

/// `dV_dc/dt = (I_dc − i_meas)/C`.
pub fn dc_link_derivative(c: f64, i_dc: f64, i_meas: f64) -> Result<f64> {
    ensure_positive("c", c)?;
    Ok((i_dc - i_meas) / c)
}

/// `di/dt = (V_dc − v_inj − R·i)/L`.
pub fn line_current_derivative(l: f64, r: f64, i: f64, v_dc: f64, v_inj: f64) -> Result<f64> {
    ensure_positive("l", l)?;
    Ok((v_dc - v_inj - r * i) / l)
}

/// `P / max(V, v_floor)`.
pub fn cpl_current(p: f64, v: f64, v_floor: f64) -> f64 {
    p / v.max(v_floor)
}

/// Ripple amplitude `ΔI/(ω·C)` on a capacitor.
pub fn ripple_voltage(delta_i: f64, omega: f64, c: f64) -> Result<f64> {
    ensure_positive("omega", omega)?;
    ensure_positive("c", c)?;
    Ok(delta_i / (omega * c))
}

pub fn effective_ripple(delta_v_ripple: f64, v_series: f64) -> f64 {
    delta_v_ripple - v_series
}

/// Capacitance index `ΔI/(ω·ΔV_eff)`.
pub fn required_capacitance(delta_i: f64, omega: f64, delta_v_effective: f64) -> Result<f64> {
    ensure_positive("omega", omega)?;
    ensure_positive("delta_v_effective", delta_v_effective)?;
    Ok(delta_i / (omega * delta_v_effective))
}

/// Hold-up times in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoldupTime {
    /// `2C(V_init² − V_min²)/P`.
    pub capacitor: f64,
    pub battery: f64,
    pub total: f64,
    /// `½C(V_init² − V_min²)/P`, the stored-energy figure.
    pub capacitor_energy_based: f64,
}

pub fn holdup_time(
    c: f64,
    v_init: f64,
    v_min: f64,
    p_load: f64,
    q_battery: f64,
    v_battery: f64,
) -> Result<HoldupTime> {
    ensure_positive("p_load", p_load)?;
    if !(v_min >= 0.0) {
        return Err(Error::Negative {
            name: "v_min",
            value: v_min,
        });
    }
    if !(v_init >= v_min) {
        return Err(Error::Negative {
            name: "v_init - v_min",
            value: v_init - v_min,
        });
    }
    let dv2 = v_init * v_init - v_min * v_min;
    let capacitor = 2.0 * c * dv2 / p_load;
    let battery = q_battery * v_battery / p_load;
    Ok(HoldupTime {
        capacitor,
        battery,
        total: capacitor + battery,
        capacitor_energy_based: 0.5 * c * dv2 / p_load,
    })
}

/// One classical RK4 step of `y' = f(y)` with inputs held over the step.
///
/// `f` writes the derivative of its first argument into the second.
pub fn rk4_step<F>(y: &mut [f64], dt: f64, mut f: F)
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    f(y, &mut k1);
    for j in 0..n {
        tmp[j] = y[j] + 0.5 * dt * k1[j];
    }
    f(&tmp, &mut k2);
    for j in 0..n {
        tmp[j] = y[j] + 0.5 * dt * k2[j];
    }
    f(&tmp, &mut k3);
    for j in 0..n {
        tmp[j] = y[j] + dt * k3[j];
    }
    f(&tmp, &mut k4);
    for j in 0..n {
        y[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
}

/// Advances `(V_dc, i_meas)` one RK4 step. `derivatives` returns
/// `(dV_dc/dt, di/dt)` for a trial state.
pub fn integrate_step<F>(state: DcPlantState, mut derivatives: F, dt: f64) -> Result<DcPlantState>
where
    F: FnMut(DcPlantState) -> (f64, f64),
{
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::NonPositiveStep(dt));
    }
    let mut y = [state.v_dc, state.i_meas];
    rk4_step(&mut y, dt, |s, d| {
        let (a, b) = derivatives(DcPlantState::new(s[0], s[1]));
        d[0] = a;
        d[1] = b;
    });
    let next = DcPlantState::new(y[0], y[1]);
    if !next.is_finite() {
        return Err(Error::NonFinite("dc plant state"));
    }
    Ok(next)
}

/// Angular frequency of `f` hertz.
pub fn omega_of(f_hz: f64) -> f64 {
    2.0 * PI * f_hz
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn link_derivative_examples() {
        assert_eq!(dc_link_derivative(1e-3, 1.0, 1.0).unwrap(), 0.0);
        assert!((dc_link_derivative(1e-3, 2.0, 1.0).unwrap() - 1000.0).abs() < 1e-9);
        assert!((dc_link_derivative(2e-3, 0.0, 1.0).unwrap() + 500.0).abs() < 1e-9);
        assert!(dc_link_derivative(0.0, 1.0, 0.0).is_err());
        assert!(dc_link_derivative(-1e-3, 1.0, 0.0).is_err());
    }

    #[test]
    fn line_derivative_examples() {
        let (l, r, v, vi) = (1e-3, 0.1, 400.0, 10.0);
        let i_eq = (v - vi) / r;
        assert!(line_current_derivative(l, r, i_eq, v, vi).unwrap().abs() < 1e-6);
        assert!((line_current_derivative(1e-3, 0.1, 0.0, 400.0, 0.0).unwrap() - 4e5).abs() < 1e-6);
        assert!(
            line_current_derivative(1e-3, 0.1, 10.0, 1.0, 0.0)
                .unwrap()
                .abs()
                < 1e-9
        );
        assert!(line_current_derivative(0.0, 0.1, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn cpl_examples() {
        assert_eq!(cpl_current(1000.0, 400.0, 1.0), 2.5);
        assert_eq!(cpl_current(0.0, 123.0, 1.0), 0.0);
        assert_eq!(cpl_current(10.0, 0.0, 1.0), 10.0);
        let h = 1e-3;
        let didv =
            (cpl_current(1000.0, 400.0 + h, 1.0) - cpl_current(1000.0, 400.0 - h, 1.0)) / (2.0 * h);
        assert!(rel(didv, -6.25e-3) < 1e-6);
    }

    #[test]
    fn ripple_examples() {
        let w = omega_of(100.0);
        assert!((ripple_voltage(1.0, w, 300e-6).unwrap() - 5.305).abs() < 5e-4);
        assert_eq!(ripple_voltage(0.0, w, 300e-6).unwrap(), 0.0);
        assert!((ripple_voltage(1.0, w, 600e-6).unwrap() - 2.653).abs() < 5e-4);
        assert!(ripple_voltage(1.0, 0.0, 1e-3).is_err());
        assert!(ripple_voltage(1.0, w, 0.0).is_err());

        assert_eq!(effective_ripple(5.305, 5.305), 0.0);
        assert_eq!(effective_ripple(5.305, 0.0), 5.305);
        assert_eq!(effective_ripple(5.0, 2.0), 3.0);

        assert!(rel(required_capacitance(1.0, w, 5.305).unwrap(), 300e-6) < 1e-4);
        assert!(rel(required_capacitance(1.0, w, 10.61).unwrap(), 150e-6) < 1e-4);
        let a = required_capacitance(1.0, w, 3.0).unwrap();
        let b = required_capacitance(1.0, w, 6.0).unwrap();
        assert!(rel(b, a / 2.0) < 1e-15);
        assert!(required_capacitance(1.0, w, 0.0).is_err());
    }

    #[test]
    fn holdup_examples() {
        let h = holdup_time(300e-6, 400.0, 360.0, 1000.0, 36000.0, 48.0).unwrap();
        assert!(rel(h.capacitor, 0.01824) < 1e-15);
        assert_eq!(h.battery, 1728.0);
        assert_eq!(h.total, h.capacitor + h.battery);
        assert!(rel(h.capacitor_energy_based, 0.01824 / 4.0) < 1e-15);
        let h = holdup_time(300e-6, 360.0, 360.0, 1000.0, 0.0, 48.0).unwrap();
        assert_eq!(h.capacitor, 0.0);
        assert!(holdup_time(300e-6, 400.0, 360.0, 0.0, 1.0, 1.0).is_err());
        assert!(holdup_time(300e-6, 300.0, 360.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn integrate_examples() {
        let s = DcPlantState::new(400.0, 3.0);
        assert_eq!(integrate_step(s, |_| (0.0, 0.0), 1e-4).unwrap(), s);

        let c = 1e-3;
        let s = integrate_step(
            DcPlantState::new(0.0, 0.0),
            |_| (dc_link_derivative(c, 1.0, 0.0).unwrap(), 0.0),
            1e-3,
        )
        .unwrap();
        assert!((s.v_dc - 1.0).abs() < 1e-15);

        assert!(integrate_step(s, |_| (0.0, 0.0), 0.0).is_err());
        assert!(integrate_step(s, |_| (f64::NAN, 0.0), 1e-3).is_err());
    }

    #[test]
    fn rl_step_matches_analytic() {
        let (l, r, v) = (1e-3, 0.1, 10.0);
        let dt = l / (100.0 * r);
        let mut s = DcPlantState::new(v, 0.0);
        let mut worst: f64 = 0.0;
        for n in 1..=2000 {
            s = integrate_step(
                s,
                |st| {
                    (
                        0.0,
                        line_current_derivative(l, r, st.i_meas, v, 0.0).unwrap(),
                    )
                },
                dt,
            )
            .unwrap();
            let t = n as f64 * dt;
            let exact = v / r * (1.0 - (-r * t / l).exp());
            worst = worst.max(rel(s.i_meas, exact));
        }
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn lossless_lc_conserves_energy() {
        let (l, c): (f64, f64) = (1e-3, 1e-3);
        let dt = (l * c).sqrt() / 50.0;
        let energy = |s: DcPlantState| 0.5 * c * s.v_dc * s.v_dc + 0.5 * l * s.i_meas * s.i_meas;
        let mut s = DcPlantState::new(400.0, 0.0);
        let e0 = energy(s);
        for _ in 0..10_000 {
            s = integrate_step(
                s,
                |st| {
                    (
                        dc_link_derivative(c, 0.0, st.i_meas).unwrap(),
                        line_current_derivative(l, 0.0, st.i_meas, st.v_dc, 0.0).unwrap(),
                    )
                },
                dt,
            )
            .unwrap();
        }
        assert!(rel(energy(s), e0) < 1e-6);
    }

    #[test]
    fn load_validation() {
        assert!(LoadModel::Resistive { r: 0.0 }.validate().is_err());
        assert!(LoadModel::RippleSource {
            delta_i: 1.0,
            omega: 0.0
        }
        .validate()
        .is_err());
        assert!(LoadModel::ConstantPower { p: f64::NAN }.validate().is_err());
        assert!(LoadModel::ConstantCurrent { i: -3.0 }.validate().is_ok());
        assert_eq!(
            LoadModel::Resistive { r: 40.0 }.current(400.0, 0.0, 1.0),
            10.0
        );
    }

    proptest! {
        #[test]
        fn ripple_sizing_inverse(di in 1e-3f64..100.0, f in 1.0f64..1e4, c in 1e-6f64..1e-1) {
            let w = omega_of(f);
            let dv = ripple_voltage(di, w, c).unwrap();
            prop_assert!(rel(required_capacitance(di, w, dv).unwrap(), c) < 1e-12);
            prop_assert_eq!(effective_ripple(dv, dv), 0.0);
        }

        #[test]
        fn cpl_has_negative_incremental_resistance(p in 1.0f64..1e5, v in 2.0f64..1e3) {
            let h = 1e-4 * v;
            let di = cpl_current(p, v + h, 1.0) - cpl_current(p, v - h, 1.0);
            prop_assert!(di < 0.0);
        }
    }
}
