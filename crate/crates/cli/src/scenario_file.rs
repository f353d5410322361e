//! JSON scenario documents.
//!
//! Every quantity carries its unit in the key name. Optional keys are filled
//! by [`ScenarioFile::with_defaults`], which also records each value it
//! supplied; the filled document is the canonical form.

use std::collections::BTreeMap;

use gridrouter::dc::{LoadModel, DEFAULT_CPL_FLOOR};
use gridrouter::network::{
    AcFeeder, AfeConfig, AfeMode, BessConfig, ControlMode, ControllerConfig, DcFeeder, HubParams,
    Network,
};
use gridrouter::sim::{Event, EventKind, LineChange, Scenario, SimSettings};
use gridrouter::Impedance;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub const DEFAULT_DT_S: f64 = 1e-4;
pub const DEFAULT_FREQUENCY_HZ: f64 = 50.0;
pub const DEFAULT_COLLAPSE_FRACTION: f64 = 0.5;
pub const DEFAULT_V_BUS_AC_VOLT: f64 = 230.0;
pub const DEFAULT_AFE_KP: f64 = 1.0;
pub const DEFAULT_AFE_KI: f64 = 20.0;
pub const DEFAULT_AFE_POWER_LIMIT_WATT: f64 = 1e6;
pub const DEFAULT_SETTLING_BAND: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema: u32,
    pub name: String,
    pub sim: SimSection,
    pub hub: HubSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub controllers: BTreeMap<String, ControllerSection>,
    #[serde(default)]
    pub events: Vec<EventSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub duration_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collapse_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpl_floor_volt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HubSection {
    pub v_dc_volt: f64,
    pub c_dc_farad: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_bus_ac_volt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub afe: Option<AfeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bess: Option<BessSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AfeModeName {
    Pi,
    Stiff,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AfeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<AfeModeName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kp_amp_per_volt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ki_amp_per_volt_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_limit_watt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_ref_var: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BessSection {
    pub capacity_coulomb: f64,
    pub voltage_volt: f64,
    pub power_limit_watt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub soc_init: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_request_watt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    #[serde(default)]
    pub ac_feeders: Vec<AcFeederSection>,
    #[serde(default)]
    pub dc_feeders: Vec<DcFeederSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcFeederSection {
    pub id: String,
    /// RMS phase voltage of the source.
    pub v_volt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_rad: Option<f64>,
    pub r_ohm: f64,
    pub x_ohm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_ref_watt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_ref_var: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcFeederSection {
    pub id: String,
    pub v_volt: f64,
    pub r_ohm: f64,
    pub l_henry: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_ref_amp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load: Option<LoadSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LoadSection {
    Resistive { r_ohm: f64 },
    ConstantPower { p_watt: f64 },
    ConstantCurrent { i_amp: f64 },
    Ripple { delta_i_amp: f64, frequency_hz: f64 },
}

impl LoadSection {
    fn to_model(self) -> LoadModel {
        match self {
            LoadSection::Resistive { r_ohm } => LoadModel::Resistive { r: r_ohm },
            LoadSection::ConstantPower { p_watt } => LoadModel::ConstantPower { p: p_watt },
            LoadSection::ConstantCurrent { i_amp } => LoadModel::ConstantCurrent { i: i_amp },
            LoadSection::Ripple {
                delta_i_amp,
                frequency_hz,
            } => LoadModel::RippleSource {
                delta_i: delta_i_amp,
                omega: 2.0 * std::f64::consts::PI * frequency_hz,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    SeriesModule,
    Droop,
    None,
}

impl From<ModeName> for ControlMode {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::SeriesModule => ControlMode::SeriesModule,
            ModeName::Droop => ControlMode::Droop,
            ModeName::None => ControlMode::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kp_ohm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ki_ohm_per_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_c_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_l_henry: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_max_volt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub droop_ohm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mismatch_feedforward: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ripple_cutoff_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventSection {
    PRefStep {
        t_s: f64,
        feeder: String,
        p_watt: f64,
    },
    QRefStep {
        t_s: f64,
        feeder: String,
        q_var: f64,
    },
    IRefStep {
        t_s: f64,
        feeder: String,
        i_amp: f64,
    },
    /// `load: null` removes the port load.
    LoadStep {
        t_s: f64,
        feeder: String,
        #[serde(default)]
        load: Option<LoadSection>,
    },
    VoltageSag {
        t_s: f64,
        feeder: String,
        fraction: f64,
        duration_s: f64,
    },
    RippleEnable {
        t_s: f64,
        feeder: String,
        delta_i_amp: f64,
        frequency_hz: f64,
    },
    /// AC feeders take `x_ohm`, DC feeders `l_henry`.
    ImpedanceChange {
        t_s: f64,
        feeder: String,
        r_ohm: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x_ohm: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        l_henry: Option<f64>,
    },
    FeederBypass {
        t_s: f64,
        feeder: String,
    },
}

impl EventSection {
    pub fn t_s(&self) -> f64 {
        match self {
            EventSection::PRefStep { t_s, .. }
            | EventSection::QRefStep { t_s, .. }
            | EventSection::IRefStep { t_s, .. }
            | EventSection::LoadStep { t_s, .. }
            | EventSection::VoltageSag { t_s, .. }
            | EventSection::RippleEnable { t_s, .. }
            | EventSection::ImpedanceChange { t_s, .. }
            | EventSection::FeederBypass { t_s, .. } => *t_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settling_band: Option<f64>,
    /// Start of the window used for steady-state and ripple metrics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady_state_from_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ripple_frequency_hz: Option<f64>,
    /// DC feeder whose loop parameters feed the stability block.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability_feeder: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vic_z_ohm: Option<f64>,
    /// Rerun with series-module feeders switched to droop.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub droop_comparison: Option<bool>,
    /// Rerun with every `k_r` set to zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ripple_comparison: Option<bool>,
}

/// A value supplied by [`ScenarioFile::with_defaults`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefaultApplied {
    pub field: String,
    pub value: Value,
}

/// Decodes a scenario document, reporting the offending field on failure.
pub fn parse_str(text: &str) -> Result<ScenarioFile> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = match e.path().to_string() {
            p if p == "." => "<root>".to_string(),
            p => p,
        };
        let inner = e.into_inner();
        CliError::Schema {
            field,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    if file.schema != SCHEMA_VERSION {
        return Err(CliError::invalid(
            "schema",
            format!(
                "unsupported schema version {}, expected {SCHEMA_VERSION}",
                file.schema
            ),
        ));
    }
    Ok(file)
}

pub fn parse_file(path: &std::path::Path) -> Result<(ScenarioFile, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| CliError::invalid("<root>", format!("not UTF-8: {e}")))?;
    Ok((parse_str(text)?, bytes))
}

/// Parses, fills defaults and builds the engine scenario.
pub fn parse_scenario(text: &str) -> Result<(Scenario, Vec<DefaultApplied>)> {
    let (filled, defaults) = parse_str(text)?.with_defaults()?;
    Ok((filled.to_scenario()?, defaults))
}

struct Filler {
    applied: Vec<DefaultApplied>,
}

impl Filler {
    fn fill<T: Clone + Serialize>(
        &mut self,
        slot: &mut Option<T>,
        field: impl Into<String>,
        value: T,
    ) -> T {
        if slot.is_none() {
            self.applied.push(DefaultApplied {
                field: field.into(),
                value: serde_json::to_value(&value).unwrap_or(Value::Null),
            });
            *slot = Some(value);
        }
        slot.clone().expect("just filled")
    }
}

impl ScenarioFile {
    /// Canonical form: every optional key present, controllers listed for
    /// every feeder.
    pub fn with_defaults(&self) -> Result<(ScenarioFile, Vec<DefaultApplied>)> {
        let mut f = self.clone();
        let mut d = Filler {
            applied: Vec::new(),
        };

        d.fill(&mut f.sim.dt_s, "sim.dt_s", DEFAULT_DT_S);
        d.fill(
            &mut f.sim.frequency_hz,
            "sim.frequency_hz",
            DEFAULT_FREQUENCY_HZ,
        );
        d.fill(
            &mut f.sim.collapse_fraction,
            "sim.collapse_fraction",
            DEFAULT_COLLAPSE_FRACTION,
        );
        d.fill(
            &mut f.sim.cpl_floor_volt,
            "sim.cpl_floor_volt",
            DEFAULT_CPL_FLOOR,
        );

        d.fill(
            &mut f.hub.v_bus_ac_volt,
            "hub.v_bus_ac_volt",
            DEFAULT_V_BUS_AC_VOLT,
        );
        let mut afe = f.hub.afe.take().unwrap_or_default();
        let mode = d.fill(&mut afe.mode, "hub.afe.mode", AfeModeName::Pi);
        if mode == AfeModeName::Pi {
            d.fill(
                &mut afe.kp_amp_per_volt,
                "hub.afe.kp_amp_per_volt",
                DEFAULT_AFE_KP,
            );
            d.fill(
                &mut afe.ki_amp_per_volt_s,
                "hub.afe.ki_amp_per_volt_s",
                DEFAULT_AFE_KI,
            );
        }
        d.fill(
            &mut afe.power_limit_watt,
            "hub.afe.power_limit_watt",
            DEFAULT_AFE_POWER_LIMIT_WATT,
        );
        d.fill(&mut afe.loss_factor, "hub.afe.loss_factor", 1.0);
        d.fill(&mut afe.q_ref_var, "hub.afe.q_ref_var", 0.0);
        f.hub.afe = Some(afe);
        if let Some(b) = &mut f.hub.bess {
            d.fill(&mut b.soc_init, "hub.bess.soc_init", 1.0);
            d.fill(&mut b.p_request_watt, "hub.bess.p_request_watt", 0.0);
        }

        let mut nominal = BTreeMap::new();
        for (k, a) in f.network.ac_feeders.iter_mut().enumerate() {
            let p = format!("network.ac_feeders[{k}]");
            d.fill(&mut a.angle_rad, format!("{p}.angle_rad"), 0.0);
            d.fill(&mut a.p_ref_watt, format!("{p}.p_ref_watt"), 0.0);
            d.fill(&mut a.q_ref_var, format!("{p}.q_ref_var"), 0.0);
            nominal.insert(a.id.clone(), a.v_volt);
        }
        for (k, dcf) in f.network.dc_feeders.iter_mut().enumerate() {
            d.fill(
                &mut dcf.i_ref_amp,
                format!("network.dc_feeders[{k}].i_ref_amp"),
                0.0,
            );
            nominal.insert(dcf.id.clone(), dcf.v_volt);
        }

        if let Some(id) = f.controllers.keys().find(|id| !nominal.contains_key(*id)) {
            return Err(CliError::invalid(
                format!("controllers.{id}"),
                "no feeder with this id",
            ));
        }
        let base = ControllerConfig::default();
        for (id, v) in &nominal {
            let c = f.controllers.entry(id.clone()).or_default();
            let p = format!("controllers.{id}");
            d.fill(&mut c.mode, format!("{p}.mode"), ModeName::SeriesModule);
            d.fill(&mut c.kp_ohm, format!("{p}.kp_ohm"), base.kp);
            d.fill(&mut c.ki_ohm_per_s, format!("{p}.ki_ohm_per_s"), base.ki);
            d.fill(&mut c.k_r, format!("{p}.k_r"), base.k_r);
            d.fill(&mut c.k_c_s, format!("{p}.k_c_s"), base.k_c);
            d.fill(&mut c.k_l_henry, format!("{p}.k_l_henry"), base.k_l);
            d.fill(
                &mut c.v_max_volt,
                format!("{p}.v_max_volt"),
                base.v_max_for(*v),
            );
            d.fill(&mut c.droop_ohm, format!("{p}.droop_ohm"), base.droop_slope);
            d.fill(
                &mut c.mismatch_feedforward,
                format!("{p}.mismatch_feedforward"),
                base.mismatch_feedforward,
            );
            d.fill(
                &mut c.ripple_cutoff_hz,
                format!("{p}.ripple_cutoff_hz"),
                base.ripple_cutoff_hz,
            );
        }

        let mut out = f.output.take().unwrap_or_default();
        d.fill(&mut out.sample_every, "output.sample_every", 1);
        f.output = Some(out);

        let mut an = f.analysis.take().unwrap_or_default();
        d.fill(
            &mut an.settling_band,
            "analysis.settling_band",
            DEFAULT_SETTLING_BAND,
        );
        d.fill(
            &mut an.steady_state_from_s,
            "analysis.steady_state_from_s",
            0.5 * f.sim.duration_s,
        );
        if an.ripple_frequency_hz.is_none() {
            let first_ripple = f.events.iter().find_map(|e| match e {
                EventSection::RippleEnable { frequency_hz, .. } => Some(*frequency_hz),
                _ => None,
            });
            let from_load = f.network.dc_feeders.iter().find_map(|x| match x.load {
                Some(LoadSection::Ripple { frequency_hz, .. }) => Some(frequency_hz),
                _ => None,
            });
            if let Some(hz) = first_ripple.or(from_load) {
                d.fill(
                    &mut an.ripple_frequency_hz,
                    "analysis.ripple_frequency_hz",
                    hz,
                );
            }
        }
        if an.stability_feeder.is_none() {
            let first_sm = f.network.dc_feeders.iter().find(|x| {
                f.controllers.get(&x.id).and_then(|c| c.mode) == Some(ModeName::SeriesModule)
            });
            if let Some(x) = first_sm {
                d.fill(
                    &mut an.stability_feeder,
                    "analysis.stability_feeder",
                    x.id.clone(),
                );
            }
        }
        if an.vic_z_ohm.is_none() {
            let r = an
                .stability_feeder
                .as_ref()
                .and_then(|id| f.network.dc_feeders.iter().find(|x| &x.id == id))
                .map(|x| x.r_ohm);
            if let Some(r) = r.filter(|r| *r > 0.0) {
                d.fill(&mut an.vic_z_ohm, "analysis.vic_z_ohm", r);
            }
        }
        d.fill(&mut an.droop_comparison, "analysis.droop_comparison", false);
        d.fill(
            &mut an.ripple_comparison,
            "analysis.ripple_comparison",
            false,
        );
        f.analysis = Some(an);

        Ok((f, d.applied))
    }

    /// Pretty JSON of the filled document, with a trailing newline.
    pub fn to_canonical_string(&self) -> Result<String> {
        let (filled, _) = self.with_defaults()?;
        let mut s = serde_json::to_string_pretty(&filled).expect("scenario documents serialize");
        s.push('\n');
        Ok(s)
    }

    /// Builds the engine scenario from a filled document.
    pub fn to_scenario(&self) -> Result<Scenario> {
        let (f, _) = self.with_defaults()?;
        f.check_ranges()?;

        let sim = SimSettings {
            duration: f.sim.duration_s,
            dt: f.sim.dt_s.unwrap(),
            frequency_hz: f.sim.frequency_hz.unwrap(),
            collapse_fraction: f.sim.collapse_fraction.unwrap(),
            cpl_floor: f.sim.cpl_floor_volt.unwrap(),
            sample_every: f.output.as_ref().and_then(|o| o.sample_every).unwrap(),
        };
        let afe = f.hub.afe.as_ref().unwrap();
        let hub = HubParams {
            v_dc: f.hub.v_dc_volt,
            c_dc: f.hub.c_dc_farad,
            v_bus_ac: f.hub.v_bus_ac_volt.unwrap(),
            afe: AfeConfig {
                mode: match afe.mode.unwrap() {
                    AfeModeName::Pi => AfeMode::Pi {
                        kp: afe.kp_amp_per_volt.unwrap(),
                        ki: afe.ki_amp_per_volt_s.unwrap(),
                    },
                    AfeModeName::Stiff => AfeMode::Stiff,
                },
                power_limit: afe.power_limit_watt.unwrap(),
                loss_factor: afe.loss_factor.unwrap(),
                q_ref: afe.q_ref_var.unwrap(),
            },
            bess: f.hub.bess.as_ref().map(|b| BessConfig {
                capacity: b.capacity_coulomb,
                voltage: b.voltage_volt,
                power_limit: b.power_limit_watt,
                soc_init: b.soc_init.unwrap(),
                p_request: b.p_request_watt.unwrap(),
            }),
        };
        let control = |id: &str| {
            let c = &f.controllers[id];
            ControllerConfig {
                mode: c.mode.unwrap().into(),
                kp: c.kp_ohm.unwrap(),
                ki: c.ki_ohm_per_s.unwrap(),
                k_r: c.k_r.unwrap(),
                k_c: c.k_c_s.unwrap(),
                k_l: c.k_l_henry.unwrap(),
                v_max: c.v_max_volt,
                droop_slope: c.droop_ohm.unwrap(),
                mismatch_feedforward: c.mismatch_feedforward.unwrap(),
                ripple_cutoff_hz: c.ripple_cutoff_hz.unwrap(),
            }
        };
        let network = Network {
            ac_feeders: f
                .network
                .ac_feeders
                .iter()
                .map(|a| AcFeeder {
                    id: a.id.clone(),
                    v_mag: a.v_volt,
                    angle: a.angle_rad.unwrap(),
                    z: Impedance::new(a.r_ohm, a.x_ohm),
                    p_ref: a.p_ref_watt.unwrap(),
                    q_ref: a.q_ref_var.unwrap(),
                    control: control(&a.id),
                })
                .collect(),
            dc_feeders: f
                .network
                .dc_feeders
                .iter()
                .map(|x| DcFeeder {
                    id: x.id.clone(),
                    v_source: x.v_volt,
                    r: x.r_ohm,
                    l: x.l_henry,
                    i_ref: x.i_ref_amp.unwrap(),
                    load: x.load.map(LoadSection::to_model),
                    control: control(&x.id),
                })
                .collect(),
        };
        let mut events = Vec::with_capacity(f.events.len());
        for (k, e) in f.events.iter().enumerate() {
            events.push(f.event(k, e)?);
        }
        let scenario = Scenario {
            name: f.name.clone(),
            sim,
            hub,
            network,
            events,
        };
        scenario
            .validate()
            .map_err(|e| CliError::invalid("<scenario>", e.to_string()))?;
        Ok(scenario)
    }

    fn event(&self, k: usize, e: &EventSection) -> Result<Event> {
        let at = |field: &str| format!("events[{k}].{field}");
        let kind = match e.clone() {
            EventSection::PRefStep { feeder, p_watt, .. } => {
                EventKind::PRefStep { feeder, p: p_watt }
            }
            EventSection::QRefStep { feeder, q_var, .. } => {
                EventKind::QRefStep { feeder, q: q_var }
            }
            EventSection::IRefStep { feeder, i_amp, .. } => {
                EventKind::IRefStep { feeder, i: i_amp }
            }
            EventSection::LoadStep { feeder, load, .. } => EventKind::LoadStep {
                feeder,
                load: load.map(LoadSection::to_model),
            },
            EventSection::VoltageSag {
                feeder,
                fraction,
                duration_s,
                ..
            } => EventKind::VoltageSag {
                feeder,
                fraction,
                duration: duration_s,
            },
            EventSection::RippleEnable {
                feeder,
                delta_i_amp,
                frequency_hz,
                ..
            } => EventKind::RippleEnable {
                feeder,
                delta_i: delta_i_amp,
                frequency_hz,
            },
            EventSection::ImpedanceChange {
                feeder,
                r_ohm,
                x_ohm,
                l_henry,
                ..
            } => {
                let line = match (x_ohm, l_henry) {
                    (Some(x), None) => LineChange::Ac(Impedance::new(r_ohm, x)),
                    (None, Some(l)) => LineChange::Dc { r: r_ohm, l },
                    _ => {
                        return Err(CliError::invalid(
                            at("x_ohm"),
                            "give exactly one of x_ohm or l_henry",
                        ))
                    }
                };
                EventKind::ImpedanceChange { feeder, line }
            }
            EventSection::FeederBypass { feeder, .. } => EventKind::FeederBypass { feeder },
        };
        let feeder = kind.feeder();
        let known = self.network.ac_feeders.iter().any(|a| a.id == feeder)
            || self.network.dc_feeders.iter().any(|x| x.id == feeder);
        if !known {
            return Err(CliError::invalid(
                at("feeder"),
                format!("no feeder with id {feeder:?}"),
            ));
        }
        Ok(Event { t: e.t_s(), kind })
    }

    /// Range checks that name the offending field.
    fn check_ranges(&self) -> Result<()> {
        let mut c = Checks(Ok(()));
        c.positive("sim.duration_s", self.sim.duration_s);
        c.positive("sim.dt_s", self.sim.dt_s.unwrap());
        c.positive("sim.frequency_hz", self.sim.frequency_hz.unwrap());
        c.positive("sim.cpl_floor_volt", self.sim.cpl_floor_volt.unwrap());
        c.positive("hub.v_dc_volt", self.hub.v_dc_volt);
        c.positive("hub.c_dc_farad", self.hub.c_dc_farad);
        c.positive("hub.v_bus_ac_volt", self.hub.v_bus_ac_volt.unwrap());
        if let Some(a) = &self.hub.afe {
            c.positive("hub.afe.power_limit_watt", a.power_limit_watt.unwrap());
            c.positive("hub.afe.loss_factor", a.loss_factor.unwrap());
        }
        if let Some(b) = &self.hub.bess {
            c.positive("hub.bess.capacity_coulomb", b.capacity_coulomb);
            c.positive("hub.bess.voltage_volt", b.voltage_volt);
            c.non_negative("hub.bess.power_limit_watt", b.power_limit_watt);
        }
        for (k, a) in self.network.ac_feeders.iter().enumerate() {
            c.positive(&format!("network.ac_feeders[{k}].v_volt"), a.v_volt);
            c.non_negative(&format!("network.ac_feeders[{k}].r_ohm"), a.r_ohm);
            c.positive(&format!("network.ac_feeders[{k}].x_ohm"), a.x_ohm);
        }
        for (k, x) in self.network.dc_feeders.iter().enumerate() {
            c.positive(&format!("network.dc_feeders[{k}].v_volt"), x.v_volt);
            c.non_negative(&format!("network.dc_feeders[{k}].r_ohm"), x.r_ohm);
            c.positive(&format!("network.dc_feeders[{k}].l_henry"), x.l_henry);
        }
        for (id, ctl) in &self.controllers {
            let p = |n: &str| format!("controllers.{id}.{n}");
            c.non_negative(&p("kp_ohm"), ctl.kp_ohm.unwrap());
            c.non_negative(&p("ki_ohm_per_s"), ctl.ki_ohm_per_s.unwrap());
            c.non_negative(&p("k_r"), ctl.k_r.unwrap());
            c.non_negative(&p("k_c_s"), ctl.k_c_s.unwrap());
            c.non_negative(&p("k_l_henry"), ctl.k_l_henry.unwrap());
            c.non_negative(&p("v_max_volt"), ctl.v_max_volt.unwrap());
            c.non_negative(&p("droop_ohm"), ctl.droop_ohm.unwrap());
            c.positive(&p("ripple_cutoff_hz"), ctl.ripple_cutoff_hz.unwrap());
        }
        if let Some(n) = self.output.as_ref().and_then(|o| o.sample_every) {
            if n == 0 {
                c.fail("output.sample_every", "must be at least 1");
            }
        }
        if let Some(an) = &self.analysis {
            c.positive("analysis.settling_band", an.settling_band.unwrap());
            if let Some(id) = &an.stability_feeder {
                if !self.network.dc_feeders.iter().any(|x| &x.id == id) {
                    c.fail("analysis.stability_feeder", "must name a DC feeder");
                }
            }
            if let Some(z) = an.vic_z_ohm {
                c.positive("analysis.vic_z_ohm", z);
            }
        }
        c.0
    }
}

struct Checks(Result<()>);

impl Checks {
    fn fail(&mut self, field: &str, msg: &str) {
        if self.0.is_ok() {
            self.0 = Err(CliError::invalid(field, msg));
        }
    }

    fn positive(&mut self, field: &str, v: f64) {
        if !(v.is_finite() && v > 0.0) {
            self.fail(field, &format!("must be positive, got {v}"));
        }
    }

    fn non_negative(&mut self, field: &str, v: f64) {
        if !(v.is_finite() && v >= 0.0) {
            self.fail(field, &format!("must be non-negative, got {v}"));
        }
    }
}

/// Replaces the value at a dotted path (`controllers.f1.k_c_s`,
/// `network.dc_feeders.0.r_ohm`) in a JSON document.
pub fn set_path(doc: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut cur = doc;
    for part in path.split('.') {
        cur = match cur {
            Value::Object(m) => m.get_mut(part),
            Value::Array(a) => part.parse::<usize>().ok().and_then(|k| a.get_mut(k)),
            _ => None,
        }
        .ok_or_else(|| CliError::invalid(path, "no such parameter in the scenario"))?;
    }
    if cur.is_object() || cur.is_array() {
        return Err(CliError::invalid(path, "path names a section, not a value"));
    }
    *cur = value;
    Ok(())
}
