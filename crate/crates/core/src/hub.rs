//! Hub power accounting: AFE, DC feeder power, bus balance and BESS.

use std::f64::consts::SQRT_2;

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::powerflow::PowerPair;

/// Averaged AFE operating point in a grid-aligned dq frame (peak phase quantities).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AfeState {
    pub v_d: f64,
    pub v_q: f64,
    pub i_d: f64,
    pub i_q: f64,
    pub v_dc: f64,
    pub i_afe_dc: f64,
}

impl AfeState {
    /// Operating point for a DC-side current `i_afe_dc` at `v_dc`, with the
    /// frame aligned to an AC bus of RMS phase voltage `v_bus_rms`.
    ///
    /// The AC-side active power is the DC-side power divided by `loss_factor`.
    pub fn aligned(
        v_bus_rms: f64,
        v_dc: f64,
        i_afe_dc: f64,
        q_ref: f64,
        loss_factor: f64,
    ) -> Result<Self> {
        ensure_positive("v_bus_rms", v_bus_rms)?;
        ensure_positive("loss_factor", loss_factor)?;
        let v_d = SQRT_2 * v_bus_rms;
        let p_ac = v_dc * i_afe_dc / loss_factor;
        Ok(AfeState {
            v_d,
            v_q: 0.0,
            i_d: p_ac / (1.5 * v_d),
            i_q: q_ref / (1.5 * v_d),
            v_dc,
            i_afe_dc,
        })
    }

    pub fn ac_power(&self) -> PowerPair {
        afe_power(self.v_d, self.v_q, self.i_d, self.i_q)
    }

    pub fn dc_power(&self) -> f64 {
        self.v_dc * self.i_afe_dc
    }
}

/// `P = 1.5(v_d i_d + v_q i_q)`, `Q = 1.5(v_d i_q − v_q i_d)`.
pub fn afe_power(v_d: f64, v_q: f64, i_d: f64, i_q: f64) -> PowerPair {
    PowerPair::new(1.5 * (v_d * i_d + v_q * i_q), 1.5 * (v_d * i_q - v_q * i_d))
}

/// `1.5·v_d·i_d`.
pub fn afe_power_aligned(v_d: f64, i_d: f64) -> f64 {
    1.5 * (v_d * i_d)
}

/// `(V_dc + v_inj)·i_line`.
pub fn dc_feeder_power(v_dc: f64, v_inj: f64, i_line: f64) -> f64 {
    (v_dc + v_inj) * i_line
}

/// `P_afe + P_bess − ΣP_k`.
pub fn bus_balance_residual(p_afe_dc: f64, p_bess: f64, dc_feeder_powers: &[f64]) -> f64 {
    p_afe_dc + p_bess - dc_feeder_powers.iter().sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialPower {
    pub p_transfer: f64,
    pub p_series: f64,
    /// `|P_series/P_transfer|`, absent when no power is transferred.
    pub fraction: Option<f64>,
}

pub fn partial_power_metrics(v_bus: f64, v_inj: f64, i_line: f64) -> Result<PartialPower> {
    ensure_positive("v_bus", v_bus)?;
    ensure_finite("partial power", &[v_inj, i_line])?;
    let p_transfer = v_bus * i_line;
    let p_series = v_inj * i_line;
    let fraction = (i_line != 0.0).then(|| (v_inj / v_bus).abs());
    Ok(PartialPower {
        p_transfer,
        p_series,
        fraction,
    })
}

/// Battery bank. Positive power is discharge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BessState {
    pub charge: f64,
    pub capacity: f64,
    pub voltage: f64,
    pub power_limit: f64,
    pub power: f64,
}

impl BessState {
    pub fn new(capacity: f64, voltage: f64, power_limit: f64, soc: f64) -> Result<Self> {
        ensure_positive("capacity", capacity)?;
        ensure_positive("voltage", voltage)?;
        ensure_finite("power_limit", &[power_limit])?;
        if power_limit < 0.0 {
            return Err(Error::Negative {
                name: "power_limit",
                value: power_limit,
            });
        }
        if !(0.0..=1.0).contains(&soc) {
            return Err(Error::InvalidScenario(format!(
                "state of charge must be in [0, 1], got {soc}"
            )));
        }
        Ok(BessState {
            charge: soc * capacity,
            capacity,
            voltage,
            power_limit,
            power: 0.0,
        })
    }

    pub fn soc(&self) -> f64 {
        self.charge / self.capacity
    }
}

/// Delivers as much of `p_request` as the power limit and stored charge allow.
pub fn bess_step(state: BessState, p_request: f64, dt: f64) -> Result<BessState> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::NonPositiveStep(dt));
    }
    ensure_finite("p_request", &[p_request])?;
    let mut p = p_request.clamp(-state.power_limit, state.power_limit);
    let max_discharge = state.charge * state.voltage / dt;
    let max_charge = (state.capacity - state.charge) * state.voltage / dt;
    p = p.clamp(-max_charge, max_discharge);
    let charge = (state.charge - p * dt / state.voltage).clamp(0.0, state.capacity);
    Ok(BessState {
        charge,
        power: p,
        ..state
    })
}

/// DC-link voltage regulator of the AFE: PI on `V_ref − V_dc` commanding the
/// DC-side current, limited to `±power_limit/V_dc`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AfeController {
    pub v_ref: f64,
    pub kp: f64,
    pub ki: f64,
    pub power_limit: f64,
    integrator: f64,
}

impl AfeController {
    pub fn new(v_ref: f64, kp: f64, ki: f64, power_limit: f64) -> Result<Self> {
        ensure_positive("v_ref", v_ref)?;
        ensure_positive("power_limit", power_limit)?;
        ensure_finite("afe gains", &[kp, ki])?;
        Ok(AfeController {
            v_ref,
            kp,
            ki,
            power_limit,
            integrator: 0.0,
        })
    }

    /// Starts the integrator at a known operating current.
    pub fn preload(&mut self, i_afe_dc: f64) {
        if self.ki != 0.0 {
            self.integrator = i_afe_dc / self.ki;
        }
    }

    pub fn step(&mut self, v_dc: f64, dt: f64) -> f64 {
        let e = self.v_ref - v_dc;
        let limit = self.power_limit / v_dc.max(1e-9);
        let candidate = self.integrator + e * dt;
        let i = self.kp * e + self.ki * candidate;
        if i > limit {
            limit
        } else if i < -limit {
            -limit
        } else {
            self.integrator = candidate;
            i
        }
    }
}
