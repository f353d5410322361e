//! Steady-state AC power flow of one feeder into the hub bus.
//!
//! The exact phasor route ([`line_current`] + [`feeder_power_exact`]) is the
//! model of record. The closed form, the small-angle dq form and the decoupling
//! sensitivities are separate evaluators; [`closed_form_gap`] quantifies how far
//! the closed form sits from the exact route at a given operating point.
//!
//! Angles are measured against the bus voltage (`δ_bus = 0`) unless passed
//! explicitly.

use crate::error::Result;
use crate::phasor::{impedance_angle, Impedance, Phasor};

/// Active and reactive power pair (W, var).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PowerPair {
    pub p: f64,
    pub q: f64,
}

impl PowerPair {
    pub fn new(p: f64, q: f64) -> Self {
        PowerPair { p, q }
    }

    pub fn apparent(self) -> f64 {
        self.p.hypot(self.q)
    }
}

/// Series injection expressed in the bus-aligned dq frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DqInjection {
    pub v_d: f64,
    pub v_q: f64,
}

impl DqInjection {
    pub fn new(v_d: f64, v_q: f64) -> Self {
        DqInjection { v_d, v_q }
    }
}

/// `I = (V_k − V_bus − V_inj) / Z`.
pub fn line_current(
    v_feeder: Phasor,
    v_bus: Phasor,
    v_inj: Phasor,
    z: Impedance,
) -> Result<Phasor> {
    let z = z.checked()?;
    Ok((v_feeder - v_bus - v_inj) / z.as_phasor())
}

/// `P + jQ = V · I*`.
pub fn feeder_power_exact(v_feeder: Phasor, i_line: Phasor) -> PowerPair {
    let s = v_feeder * i_line.conj();
    PowerPair::new(s.re(), s.im())
}

/// Closed-form active/reactive power including the injection terms, evaluated
/// exactly as written (bus-angle difference `δ_k − δ_bus`).
pub fn feeder_power_closed_form(
    v_feeder_mag: f64,
    v_bus_mag: f64,
    delta_feeder: f64,
    delta_bus: f64,
    z: Impedance,
    v_inj: Phasor,
    i_line: Phasor,
) -> Result<PowerPair> {
    let angle_z = impedance_angle(z)?;
    let k = v_feeder_mag * v_bus_mag / z.magnitude();
    let d = delta_feeder - delta_bus;
    let inj = v_inj.magnitude() * i_line.magnitude();
    let rel = v_inj.angle() - i_line.angle();
    let p = k * (angle_z.cos() * d.cos() + angle_z.sin() * d.sin()) + inj * rel.cos();
    let q = k * (angle_z.sin() * d.cos() - angle_z.cos() * d.sin()) + inj * rel.sin();
    Ok(PowerPair::new(p, q))
}

/// Cross-coupling corrections `(ΔP, ΔQ)` of the dq approximation.
pub fn cross_coupling_terms(
    v_feeder_mag: f64,
    delta_feeder: f64,
    z: Impedance,
    inj: DqInjection,
) -> Result<(f64, f64)> {
    let angle_z = impedance_angle(z)?;
    let (s, c) = angle_z.sin_cos();
    let k = v_feeder_mag / z.magnitude();
    let d = delta_feeder;
    let dp = -k * inj.v_q * c + k * inj.v_d * s * d - k * inj.v_q * c * d;
    let dq = k * inj.v_d * s + k * inj.v_q * c * d - k * inj.v_d * s * d;
    Ok((dp, dq))
}

/// Small-angle dq approximation of the feeder powers, cross terms included.
pub fn approx_power_dq(
    v_feeder_mag: f64,
    v_bus_mag: f64,
    delta_feeder: f64,
    z: Impedance,
    inj: DqInjection,
) -> Result<PowerPair> {
    let angle_z = impedance_angle(z)?;
    let (s, c) = angle_z.sin_cos();
    let zm = z.magnitude();
    let (dp, dq) = cross_coupling_terms(v_feeder_mag, delta_feeder, z, inj)?;
    let p = v_feeder_mag * v_bus_mag / zm * (c + s * delta_feeder)
        + v_feeder_mag * inj.v_d / zm * c
        + dp;
    let q =
        v_feeder_mag * (v_feeder_mag - v_bus_mag) / zm * s + v_feeder_mag * inj.v_q / zm * s + dq;
    Ok(PowerPair::new(p, q))
}

/// Decoupling sensitivities `[[∂P/∂v_d, ∂P/∂v_q], [∂Q/∂v_d, ∂Q/∂v_q]]`.
pub fn sensitivity_matrix(v_feeder_mag: f64, z: Impedance) -> Result<[[f64; 2]; 2]> {
    let angle_z = impedance_angle(z)?;
    let (s, c) = angle_z.sin_cos();
    let k = v_feeder_mag / z.magnitude();
    Ok([[k * c, -k * s], [k * s, k * c]])
}

/// Exact and closed-form powers side by side at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormGap {
    pub exact: PowerPair,
    pub closed_form: PowerPair,
}

impl ClosedFormGap {
    /// `|S_closed − S_exact| / |S_exact|`, or `None` when no power flows.
    pub fn relative(&self) -> Option<f64> {
        let base = self.exact.apparent();
        if base > 0.0 {
            let dp = self.closed_form.p - self.exact.p;
            let dq = self.closed_form.q - self.exact.q;
            Some(dp.hypot(dq) / base)
        } else {
            None
        }
    }
}

/// Evaluates both routes for a feeder with the given injection and line current.
pub fn closed_form_gap(
    v_feeder: Phasor,
    v_bus: Phasor,
    v_inj: Phasor,
    i_line: Phasor,
    z: Impedance,
) -> Result<ClosedFormGap> {
    let exact = feeder_power_exact(v_feeder, i_line);
    let closed_form = feeder_power_closed_form(
        v_feeder.magnitude(),
        v_bus.magnitude(),
        v_feeder.angle(),
        v_bus.angle(),
        z,
        v_inj,
        i_line,
    )?;
    Ok(ClosedFormGap { exact, closed_form })
}
