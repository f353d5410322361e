//! Static description of the star network around the hub.

use crate::control::{DEFAULT_KI, DEFAULT_KP, DEFAULT_RIPPLE_CUTOFF_HZ, DEFAULT_V_MAX_FRACTION};
use crate::dc::LoadModel;
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::phasor::{Impedance, Phasor};

/// How a feeder's series module is driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ControlMode {
    #[default]
    SeriesModule,
    /// Emulates a drooping source: `v_inj = −m·i`.
    Droop,
    /// Module output held at zero (slack feeder).
    None,
}

/// Per-feeder controller settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    pub mode: ControlMode,
    pub kp: f64,
    pub ki: f64,
    pub k_r: f64,
    pub k_c: f64,
    pub k_l: f64,
    /// Injection limit; `None` means 10 % of the feeder's nominal voltage.
    pub v_max: Option<f64>,
    pub droop_slope: f64,
    pub mismatch_feedforward: bool,
    pub ripple_cutoff_hz: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            mode: ControlMode::SeriesModule,
            kp: DEFAULT_KP,
            ki: DEFAULT_KI,
            k_r: 0.0,
            k_c: 0.0,
            k_l: 0.0,
            v_max: None,
            droop_slope: 0.0,
            mismatch_feedforward: false,
            ripple_cutoff_hz: DEFAULT_RIPPLE_CUTOFF_HZ,
        }
    }
}

impl ControllerConfig {
    pub fn v_max_for(&self, v_nominal: f64) -> f64 {
        self.v_max
            .unwrap_or(DEFAULT_V_MAX_FRACTION * v_nominal.abs())
    }

    fn validate(&self, id: &str) -> Result<()> {
        let fields = [
            ("kp", self.kp),
            ("ki", self.ki),
            ("k_r", self.k_r),
            ("k_c", self.k_c),
            ("k_l", self.k_l),
            ("droop_slope", self.droop_slope),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidScenario(format!(
                    "controller {id}: {name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if let Some(v) = self.v_max {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidScenario(format!(
                    "controller {id}: v_max must be finite and non-negative, got {v}"
                )));
            }
        }
        ensure_positive("ripple_cutoff_hz", self.ripple_cutoff_hz)
    }
}

/// AC feeder: a source behind a series impedance, connected to the hub's AC bus.
#[derive(Debug, Clone, PartialEq)]
pub struct AcFeeder {
    pub id: String,
    /// RMS phase voltage magnitude of the source.
    pub v_mag: f64,
    pub angle: f64,
    pub z: Impedance,
    pub p_ref: f64,
    pub q_ref: f64,
    pub control: ControllerConfig,
}

impl AcFeeder {
    pub fn source(&self) -> Phasor {
        Phasor::new(self.v_mag * self.angle.cos(), self.v_mag * self.angle.sin())
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("v_mag", self.v_mag)?;
        ensure_finite("ac feeder", &[self.angle, self.p_ref, self.q_ref])?;
        check_line(&self.id, self.z.r, self.z.x, "x")?;
        self.control.validate(&self.id)
    }
}

/// DC feeder: a remote source behind an R-L line, connected to the DC hub.
///
/// Positive current flows from the remote source into the hub.
#[derive(Debug, Clone, PartialEq)]
pub struct DcFeeder {
    pub id: String,
    pub v_source: f64,
    pub r: f64,
    pub l: f64,
    pub i_ref: f64,
    /// Load drawn from the hub at this feeder's port.
    pub load: Option<LoadModel>,
    pub control: ControllerConfig,
}

impl DcFeeder {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("v_source", self.v_source)?;
        ensure_finite("dc feeder", &[self.i_ref])?;
        check_line(&self.id, self.r, self.l, "l")?;
        if let Some(load) = &self.load {
            load.validate()?;
        }
        self.control.validate(&self.id)
    }
}

fn check_line(id: &str, r: f64, storage: f64, name: &str) -> Result<()> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::InvalidScenario(format!(
            "feeder {id}: resistance must be finite and non-negative, got {r}"
        )));
    }
    if !(storage.is_finite() && storage > 0.0) {
        return Err(Error::InvalidScenario(format!(
            "feeder {id}: {name} must be positive, got {storage}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AfeMode {
    /// PI loop on the DC-link voltage commanding the AFE's DC current.
    Pi { kp: f64, ki: f64 },
    /// DC-link voltage held at its nominal value; the AFE current closes the balance.
    Stiff,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AfeConfig {
    pub mode: AfeMode,
    pub power_limit: f64,
    /// DC-side power over AC-side power; 1 is lossless.
    pub loss_factor: f64,
    pub q_ref: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BessConfig {
    pub capacity: f64,
    pub voltage: f64,
    pub power_limit: f64,
    pub soc_init: f64,
    /// Constant discharge request (W); negative charges.
    pub p_request: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HubParams {
    pub v_dc: f64,
    pub c_dc: f64,
    /// RMS phase voltage of the AC bus; its angle is the reference.
    pub v_bus_ac: f64,
    pub afe: AfeConfig,
    pub bess: Option<BessConfig>,
}

impl HubParams {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("v_dc", self.v_dc)?;
        ensure_positive("c_dc", self.c_dc)?;
        ensure_positive("v_bus_ac", self.v_bus_ac)?;
        ensure_positive("power_limit", self.afe.power_limit)?;
        ensure_positive("loss_factor", self.afe.loss_factor)?;
        ensure_finite("q_ref", &[self.afe.q_ref])?;
        if let AfeMode::Pi { kp, ki } = self.afe.mode {
            ensure_finite("afe gains", &[kp, ki])?;
        }
        if let Some(b) = &self.bess {
            ensure_positive("capacity", b.capacity)?;
            ensure_positive("voltage", b.voltage)?;
            ensure_finite("bess", &[b.power_limit, b.p_request])?;
            if !(0.0..=1.0).contains(&b.soc_init) {
                return Err(Error::InvalidScenario(format!(
                    "bess soc_init must be in [0, 1], got {}",
                    b.soc_init
                )));
            }
        }
        Ok(())
    }
}

/// Feeders grouped by kind.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Network {
    pub ac_feeders: Vec<AcFeeder>,
    pub dc_feeders: Vec<DcFeeder>,
}

/// Index of a feeder within its group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeederRef {
    Ac(usize),
    Dc(usize),
}

impl Network {
    pub fn find(&self, id: &str) -> Option<FeederRef> {
        if let Some(k) = self.ac_feeders.iter().position(|f| f.id == id) {
            return Some(FeederRef::Ac(k));
        }
        self.dc_feeders
            .iter()
            .position(|f| f.id == id)
            .map(FeederRef::Dc)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids: Vec<&str> = self
            .ac_feeders
            .iter()
            .map(|f| f.id.as_str())
            .chain(self.dc_feeders.iter().map(|f| f.id.as_str()))
            .collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidScenario(format!(
                "duplicate feeder id {}",
                w[0]
            )));
        }
        for f in &self.ac_feeders {
            f.validate()?;
        }
        for f in &self.dc_feeders {
            f.validate()?;
        }
        Ok(())
    }
}
