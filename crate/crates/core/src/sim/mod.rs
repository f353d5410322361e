//! Fixed-step time-domain simulation of a hub scenario.
//!
//! Each tick runs, in order: due events, a snapshot of the measured state,
//! the controllers (which only see the snapshot), hub balance, recording,
//! and one RK4 step of the line and DC-link dynamics with all controller
//! outputs held.
//!
//! AC lines are integrated as dynamic phasors in the bus-aligned frame,
//! `L·dI/dt = V_k − V_bus − V_inj − (R + jX)·I`, whose equilibrium is the
//! algebraic phasor solution.

pub mod analysis;

use num_complex::Complex64;

use crate::control::{
    ac_pi_step, ac_reference_currents, dc_injection_step, droop_step, mismatch_feedforward,
    AcSeriesModuleState, DcGains, DcMeasurements, DcSeriesModuleState, FirstOrderFilter,
};
use crate::dc::{rk4_step, LoadModel};
use crate::error::{ensure_positive, Error, Result};
use crate::hub::{
    bess_step, bus_balance_residual, dc_feeder_power, AfeController, AfeState, BessState,
};
use crate::network::{AfeMode, ControlMode, FeederRef, HubParams, Network};
use crate::phasor::{impedance_angle, Impedance, Phasor};
use crate::powerflow::{closed_form_gap, feeder_power_exact};

/// Solver and termination settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub duration: f64,
    pub dt: f64,
    pub frequency_hz: f64,
    /// Collapse is declared when `V_dc` falls below this fraction of nominal.
    pub collapse_fraction: f64,
    pub cpl_floor: f64,
    /// Record every n-th tick.
    pub sample_every: usize,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            duration: 0.1,
            dt: 1e-4,
            frequency_hz: 50.0,
            collapse_fraction: 0.5,
            cpl_floor: crate::dc::DEFAULT_CPL_FLOOR,
            sample_every: 1,
        }
    }
}

/// Line parameters after an impedance change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LineChange {
    Ac(Impedance),
    Dc { r: f64, l: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    /// AC: active power reference. DC: current reference `P/V_source`.
    PRefStep {
        feeder: String,
        p: f64,
    },
    QRefStep {
        feeder: String,
        q: f64,
    },
    IRefStep {
        feeder: String,
        i: f64,
    },
    LoadStep {
        feeder: String,
        load: Option<LoadModel>,
    },
    /// Source magnitude scaled by `1 − fraction` for `duration` seconds.
    VoltageSag {
        feeder: String,
        fraction: f64,
        duration: f64,
    },
    /// Adds a sinusoidal current draw at the feeder's hub port.
    RippleEnable {
        feeder: String,
        delta_i: f64,
        frequency_hz: f64,
    },
    ImpedanceChange {
        feeder: String,
        line: LineChange,
    },
    FeederBypass {
        feeder: String,
    },
}

impl EventKind {
    pub fn feeder(&self) -> &str {
        match self {
            EventKind::PRefStep { feeder, .. }
            | EventKind::QRefStep { feeder, .. }
            | EventKind::IRefStep { feeder, .. }
            | EventKind::LoadStep { feeder, .. }
            | EventKind::VoltageSag { feeder, .. }
            | EventKind::RippleEnable { feeder, .. }
            | EventKind::ImpedanceChange { feeder, .. }
            | EventKind::FeederBypass { feeder } => feeder,
        }
    }

    /// True for events that move a tracking reference.
    pub fn is_reference_step(&self) -> bool {
        matches!(
            self,
            EventKind::PRefStep { .. } | EventKind::QRefStep { .. } | EventKind::IRefStep { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub sim: SimSettings,
    pub hub: HubParams,
    pub network: Network,
    pub events: Vec<Event>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("duration", self.sim.duration)?;
        ensure_positive("dt", self.sim.dt)?;
        ensure_positive("frequency_hz", self.sim.frequency_hz)?;
        ensure_positive("cpl_floor", self.sim.cpl_floor)?;
        if !(0.0..1.0).contains(&self.sim.collapse_fraction) {
            return Err(invalid(format!(
                "collapse_fraction must be in [0, 1), got {}",
                self.sim.collapse_fraction
            )));
        }
        if self.sim.sample_every == 0 {
            return Err(invalid("sample_every must be at least 1".into()));
        }
        self.hub.validate()?;
        self.network.validate()?;
        let mut prev = 0.0;
        for (k, e) in self.events.iter().enumerate() {
            if !(e.t >= prev && e.t <= self.sim.duration) {
                return Err(invalid(format!(
                    "event {k}: time {} is out of order or outside [0, {}]",
                    e.t, self.sim.duration
                )));
            }
            prev = e.t;
            self.validate_event(k, &e.kind)?;
        }
        Ok(())
    }

    fn validate_event(&self, k: usize, e: &EventKind) -> Result<()> {
        let target = self
            .network
            .find(e.feeder())
            .ok_or_else(|| invalid(format!("event {k}: unknown feeder {}", e.feeder())))?;
        let dc_only = |what: &str| match target {
            FeederRef::Dc(_) => Ok(()),
            FeederRef::Ac(_) => Err(invalid(format!(
                "event {k}: {what} applies to DC feeders only"
            ))),
        };
        match e {
            EventKind::PRefStep { p, .. } => finite(k, *p),
            EventKind::QRefStep { q, .. } => match target {
                FeederRef::Ac(_) => finite(k, *q),
                FeederRef::Dc(_) => Err(invalid(format!(
                    "event {k}: q_ref_step applies to AC feeders only"
                ))),
            },
            EventKind::IRefStep { i, .. } => {
                dc_only("i_ref_step")?;
                finite(k, *i)
            }
            EventKind::LoadStep { load, .. } => {
                dc_only("load_step")?;
                load.map_or(Ok(()), |l| l.validate())
            }
            EventKind::VoltageSag {
                fraction, duration, ..
            } => {
                if !(*fraction > 0.0 && *fraction <= 1.0) {
                    return Err(invalid(format!(
                        "event {k}: sag fraction must be in (0, 1]"
                    )));
                }
                ensure_positive("sag duration", *duration)
            }
            EventKind::RippleEnable {
                delta_i,
                frequency_hz,
                ..
            } => {
                dc_only("ripple_enable")?;
                finite(k, *delta_i)?;
                ensure_positive("ripple frequency_hz", *frequency_hz)
            }
            EventKind::ImpedanceChange { line, .. } => match (target, line) {
                (FeederRef::Ac(_), LineChange::Ac(z)) if z.r >= 0.0 && z.x > 0.0 => Ok(()),
                (FeederRef::Dc(_), LineChange::Dc { r, l }) if *r >= 0.0 && *l > 0.0 => Ok(()),
                _ => Err(invalid(format!(
                    "event {k}: impedance_change does not fit feeder {}",
                    e.feeder()
                ))),
            },
            EventKind::FeederBypass { .. } => Ok(()),
        }
    }

    /// Number of integration steps.
    pub fn steps(&self) -> usize {
        (self.sim.duration / self.sim.dt).round() as usize
    }
}

fn invalid(msg: String) -> Error {
    Error::InvalidScenario(msg)
}

fn finite(k: usize, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("event {k}: non-finite value")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Completed,
    /// `V_dc` fell below the collapse floor at this tick.
    Collapsed {
        tick: usize,
    },
    /// The state became non-finite at this tick.
    Diverged {
        tick: usize,
    },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Completed => "completed",
            Verdict::Collapsed { .. } => "collapsed",
            Verdict::Diverged { .. } => "diverged",
        }
    }

    pub fn tick(&self) -> Option<usize> {
        match *self {
            Verdict::Completed => None,
            Verdict::Collapsed { tick } | Verdict::Diverged { tick } => Some(tick),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    /// Evaluate the closed-form AC power expressions alongside the exact route.
    pub compare_closed_form: bool,
}

/// Recorded signals sharing one time base.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub sample_period: f64,
    pub verdict: Verdict,
    /// Time of the last reference step, if any occurred.
    pub last_reference_step: Option<f64>,
    /// Largest relative gap between closed-form and exact AC powers.
    pub closed_form_max_rel_gap: Option<f64>,
    /// Largest `V_dc·|i|` seen on any DC feeder.
    pub peak_transfer_power: f64,
}

impl Trace {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|k| self.columns[k].as_slice())
    }

    pub fn time(&self) -> &[f64] {
        &self.columns[0]
    }

    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

struct DcRuntime {
    v_source: f64,
    sag: f64,
    r: f64,
    l: f64,
    i_ref: f64,
    load: Option<LoadModel>,
    ripples: Vec<LoadModel>,
    bypassed: bool,
    mode: ControlMode,
    droop_slope: f64,
    mismatch: bool,
    ctrl: DcSeriesModuleState,
    lpf: FirstOrderFilter,
    v_inj: f64,
}

impl DcRuntime {
    fn v_remote(&self) -> f64 {
        self.v_source * self.sag
    }

    fn port_current(&self, v: f64, t: f64, floor: f64) -> f64 {
        let base = self.load.map_or(0.0, |l| l.current(v, t, floor));
        self.ripples
            .iter()
            .fold(base, |acc, r| acc + r.current(v, t, floor))
    }
}

struct AcRuntime {
    v_mag: f64,
    angle: f64,
    sag: f64,
    z: Impedance,
    p_ref: f64,
    q_ref: f64,
    bypassed: bool,
    mode: ControlMode,
    droop_slope: f64,
    mismatch: bool,
    ctrl: AcSeriesModuleState,
    v_inj: Phasor,
}

impl AcRuntime {
    fn source(&self) -> Phasor {
        let m = self.v_mag * self.sag;
        Phasor::new(m * self.angle.cos(), m * self.angle.sin())
    }

    /// Maps a dq command onto the injected phasor so that, to first order,
    /// `ΔP + jΔQ = |V_k|/|Z|·(v_d + j·v_q)`.
    fn injection_phasor(&self, v_d: f64, v_q: f64) -> Phasor {
        let rot = impedance_angle(self.z).unwrap_or(0.0) + self.angle;
        let c = -Complex64::from_polar(1.0, rot) * Complex64::new(v_d, -v_q);
        Phasor::from(c)
    }
}

struct Hub {
    v_nominal: f64,
    c: f64,
    stiff: bool,
    afe: Option<AfeController>,
    loss_factor: f64,
    q_ref: f64,
    v_bus_ac: f64,
    bess: Option<(BessState, f64)>,
}

/// Inputs held constant across one integration step.
struct Held {
    dc_v_inj: Vec<f64>,
    ac_v_inj: Vec<Phasor>,
    i_afe: f64,
    i_bess: f64,
}

/// Runs a validated scenario to completion or termination.
pub fn run_scenario(s: &Scenario) -> Result<Trace> {
    run_scenario_with(s, RunOptions::default())
}

pub fn run_scenario_with(s: &Scenario, opts: RunOptions) -> Result<Trace> {
    s.validate()?;
    let dt = s.sim.dt;
    let omega = 2.0 * std::f64::consts::PI * s.sim.frequency_hz;

    let mut dc: Vec<DcRuntime> = Vec::with_capacity(s.network.dc_feeders.len());
    for f in &s.network.dc_feeders {
        let c = &f.control;
        dc.push(DcRuntime {
            v_source: f.v_source,
            sag: 1.0,
            r: f.r,
            l: f.l,
            i_ref: f.i_ref,
            load: f.load,
            ripples: Vec::new(),
            bypassed: false,
            mode: c.mode,
            droop_slope: c.droop_slope,
            mismatch: c.mismatch_feedforward,
            ctrl: DcSeriesModuleState::new(
                DcGains {
                    kp: c.kp,
                    ki: c.ki,
                    k_r: c.k_r,
                    k_c: c.k_c,
                    k_l: c.k_l,
                },
                c.v_max_for(f.v_source),
            )?,
            lpf: FirstOrderFilter::new(c.ripple_cutoff_hz, dt)?,
            v_inj: 0.0,
        });
    }
    let mut ac: Vec<AcRuntime> = Vec::with_capacity(s.network.ac_feeders.len());
    for f in &s.network.ac_feeders {
        let c = &f.control;
        ac.push(AcRuntime {
            v_mag: f.v_mag,
            angle: f.angle,
            sag: 1.0,
            z: f.z,
            p_ref: f.p_ref,
            q_ref: f.q_ref,
            bypassed: false,
            mode: c.mode,
            droop_slope: c.droop_slope,
            mismatch: c.mismatch_feedforward,
            ctrl: AcSeriesModuleState::new(c.kp, c.ki, c.v_max_for(f.v_mag))?,
            v_inj: Phasor::ZERO,
        });
    }

    let mut hub = Hub {
        v_nominal: s.hub.v_dc,
        c: s.hub.c_dc,
        stiff: matches!(s.hub.afe.mode, AfeMode::Stiff),
        afe: match s.hub.afe.mode {
            AfeMode::Pi { kp, ki } => Some(AfeController::new(
                s.hub.v_dc,
                kp,
                ki,
                s.hub.afe.power_limit,
            )?),
            AfeMode::Stiff => None,
        },
        loss_factor: s.hub.afe.loss_factor,
        q_ref: s.hub.afe.q_ref,
        v_bus_ac: s.hub.v_bus_ac,
        bess: match &s.hub.bess {
            Some(b) => Some((
                BessState::new(b.capacity, b.voltage, b.power_limit, b.soc_init)?,
                b.p_request,
            )),
            None => None,
        },
    };
    let v_bus = Phasor::new(s.hub.v_bus_ac, 0.0);

    // Sums over feeders run in id order so that the trace does not depend on
    // the order feeders are listed in.
    let dc_order = sorted_order(s.network.dc_feeders.iter().map(|f| f.id.as_str()));
    let ac_order = sorted_order(s.network.ac_feeders.iter().map(|f| f.id.as_str()));

    // State layout: [V_dc?] [i_dc...] [re(I_ac), im(I_ac)...]
    let v_slot = usize::from(!hub.stiff);
    let dc_base = v_slot;
    let ac_base = dc_base + dc.len();
    let mut y = vec![0.0; ac_base + 2 * ac.len()];
    if !hub.stiff {
        y[0] = hub.v_nominal;
    }
    for (k, f) in dc.iter().enumerate() {
        if f.r > 0.0 {
            y[dc_base + k] = (f.v_remote() - hub.v_nominal) / f.r;
        }
    }
    for (k, f) in ac.iter().enumerate() {
        let i0 = (f.source() - v_bus) / f.z.as_phasor();
        y[ac_base + 2 * k] = i0.re();
        y[ac_base + 2 * k + 1] = i0.im();
    }

    let mut rec = Recorder::new(s);
    let mut sags: Vec<(f64, FeederRef)> = Vec::new();
    let mut next_event = 0;
    let mut last_reference_step = None;
    let mut gap_max: Option<f64> = None;
    let mut peak_transfer: f64 = 0.0;
    let steps = s.steps();
    let mut verdict = Verdict::Completed;

    for n in 0..=steps {
        let t = n as f64 * dt;

        // Events due at or before this tick; sags ending now are restored first.
        sags.retain(|&(end, target)| {
            if end <= t + 1e-9 * dt {
                match target {
                    FeederRef::Dc(k) => dc[k].sag = 1.0,
                    FeederRef::Ac(k) => ac[k].sag = 1.0,
                }
                false
            } else {
                true
            }
        });
        while next_event < s.events.len() && s.events[next_event].t <= t + 1e-9 * dt {
            let e = &s.events[next_event];
            if e.kind.is_reference_step() {
                last_reference_step = Some(t);
            }
            apply_event(&s.network, &mut dc, &mut ac, &mut sags, e, t);
            next_event += 1;
        }

        // Snapshot.
        let v_hub = if hub.stiff { hub.v_nominal } else { y[0] };
        let i_dc: Vec<f64> = (0..dc.len()).map(|k| y[dc_base + k]).collect();
        let i_ac: Vec<Phasor> = (0..ac.len())
            .map(|k| Phasor::new(y[ac_base + 2 * k], y[ac_base + 2 * k + 1]))
            .collect();
        let s_ac: Vec<_> = ac
            .iter()
            .zip(&i_ac)
            .map(|(f, &i)| feeder_power_exact(f.source(), i))
            .collect();

        // Controllers.
        for (k, f) in dc.iter_mut().enumerate() {
            let d = f.v_remote() - v_hub;
            let lp = f.lpf.low_pass(d);
            let hp = d - lp;
            f.v_inj = if f.bypassed {
                0.0
            } else {
                match f.mode {
                    ControlMode::SeriesModule => dc_injection_step(
                        &mut f.ctrl,
                        DcMeasurements {
                            i_ref: f.i_ref,
                            i_meas: i_dc[k],
                            v_ripple_meas: hp,
                            v_dc: v_hub,
                            v_mismatch: if f.mismatch { -lp } else { 0.0 },
                        },
                        dt,
                    )?,
                    ControlMode::Droop => {
                        let vm = f.ctrl.v_max;
                        (droop_step(f.v_remote(), f.droop_slope, i_dc[k]) - f.v_remote())
                            .clamp(-vm, vm)
                    }
                    ControlMode::None => 0.0,
                }
            };
        }
        for (k, f) in ac.iter_mut().enumerate() {
            let src = f.source();
            let vk = src.magnitude();
            f.v_inj = if f.bypassed {
                Phasor::ZERO
            } else {
                match f.mode {
                    ControlMode::SeriesModule => {
                        let i_ref = ac_reference_currents(f.p_ref, f.q_ref, vk)?;
                        let i_meas = (s_ac[k].p / vk, s_ac[k].q / vk);
                        let ff = if f.mismatch {
                            mismatch_feedforward(vk, v_bus, src, f.angle, f.angle)
                        } else {
                            (0.0, 0.0)
                        };
                        let cmd = ac_pi_step(&mut f.ctrl, i_ref, i_meas, ff, dt)?;
                        f.injection_phasor(cmd.v_d, cmd.v_q)
                    }
                    ControlMode::Droop => {
                        let vm = f.ctrl.v_max;
                        let v_d = (-f.droop_slope * s_ac[k].p / vk).clamp(-vm, vm);
                        f.injection_phasor(v_d, 0.0)
                    }
                    ControlMode::None => Phasor::ZERO,
                }
            };
        }

        // Hub balance.
        let p_bess = match &mut hub.bess {
            Some((b, p_req)) => {
                *b = bess_step(*b, *p_req, dt)?;
                b.power
            }
            None => 0.0,
        };
        let mut p_out: Vec<f64> = Vec::with_capacity(2 * dc.len() + ac.len());
        for &k in &dc_order {
            p_out.push(dc_feeder_power(v_hub, -dc[k].v_inj, -i_dc[k]));
        }
        for &k in &dc_order {
            p_out.push(v_hub * dc[k].port_current(v_hub, t, s.sim.cpl_floor));
        }
        for &k in &ac_order {
            p_out.push(-(ac[k].v_inj * i_ac[k].conj()).re());
        }
        let i_afe = match &mut hub.afe {
            Some(ctrl) => ctrl.step(v_hub, dt),
            None => (p_out.iter().sum::<f64>() - p_bess) / v_hub,
        };
        let p_afe_dc = v_hub * i_afe;
        let residual = bus_balance_residual(p_afe_dc, p_bess, &p_out);
        let afe_state = AfeState::aligned(hub.v_bus_ac, v_hub, i_afe, hub.q_ref, hub.loss_factor)?;

        for &k in &dc_order {
            peak_transfer = peak_transfer.max((v_hub * i_dc[k]).abs());
        }
        if opts.compare_closed_form {
            for (k, f) in ac.iter().enumerate() {
                let g = closed_form_gap(f.source(), v_bus, f.v_inj, i_ac[k], f.z)?;
                if let Some(r) = g.relative() {
                    gap_max = Some(gap_max.map_or(r, |m: f64| m.max(r)));
                }
            }
        }

        if n % s.sim.sample_every == 0 {
            rec.push(
                t, &dc, &i_dc, v_hub, &ac, &s_ac, &afe_state, p_bess, &hub, residual,
            );
        }
        if n == steps {
            break;
        }

        // Integrate.
        let held = Held {
            dc_v_inj: dc.iter().map(|f| f.v_inj).collect(),
            ac_v_inj: ac.iter().map(|f| f.v_inj).collect(),
            i_afe,
            i_bess: p_bess / v_hub,
        };
        let floor = s.sim.cpl_floor;
        let mut stage = 0;
        rk4_step(&mut y, dt, |st, dy| {
            // Stage times t, t + dt/2, t + dt/2, t + dt.
            let tau = match stage {
                0 => t,
                1 | 2 => t + 0.5 * dt,
                _ => t + dt,
            };
            stage += 1;
            let v = if hub.stiff { hub.v_nominal } else { st[0] };
            let mut net = 0.0;
            for &k in &dc_order {
                let f = &dc[k];
                let i = st[dc_base + k];
                let vi = held.dc_v_inj[k];
                dy[dc_base + k] = (f.v_remote() + vi - v - f.r * i) / f.l;
                net += i - vi * i / v - f.port_current(v, tau, floor);
            }
            for &k in &ac_order {
                let f = &ac[k];
                let i = Complex64::new(st[ac_base + 2 * k], st[ac_base + 2 * k + 1]);
                let vin = held.ac_v_inj[k].as_complex();
                let l = f.z.x / omega;
                let di = (f.source().as_complex()
                    - v_bus.as_complex()
                    - vin
                    - Complex64::new(f.z.r, f.z.x) * i)
                    / l;
                dy[ac_base + 2 * k] = di.re;
                dy[ac_base + 2 * k + 1] = di.im;
                net += (vin * i.conj()).re / v;
            }
            if !hub.stiff {
                dy[0] = (net + held.i_afe + held.i_bess) / hub.c;
            }
        });

        if y.iter().any(|v| !v.is_finite()) {
            verdict = Verdict::Diverged { tick: n + 1 };
            break;
        }
        if !hub.stiff && y[0] < s.sim.collapse_fraction * hub.v_nominal {
            verdict = Verdict::Collapsed { tick: n + 1 };
            break;
        }
    }

    Ok(Trace {
        names: rec.names,
        columns: rec.columns,
        sample_period: dt * s.sim.sample_every as f64,
        verdict,
        last_reference_step,
        closed_form_max_rel_gap: gap_max,
        peak_transfer_power: peak_transfer,
    })
}

fn sorted_order<'a>(ids: impl Iterator<Item = &'a str>) -> Vec<usize> {
    let mut v: Vec<(usize, &str)> = ids.enumerate().collect();
    v.sort_by(|a, b| a.1.cmp(b.1));
    v.into_iter().map(|(k, _)| k).collect()
}

fn apply_event(
    net: &Network,
    dc: &mut [DcRuntime],
    ac: &mut [AcRuntime],
    sags: &mut Vec<(f64, FeederRef)>,
    e: &Event,
    t: f64,
) {
    let target = net
        .find(e.kind.feeder())
        .expect("validated feeder reference");
    match (&e.kind, target) {
        (EventKind::PRefStep { p, .. }, FeederRef::Ac(k)) => ac[k].p_ref = *p,
        (EventKind::PRefStep { p, .. }, FeederRef::Dc(k)) => dc[k].i_ref = *p / dc[k].v_source,
        (EventKind::QRefStep { q, .. }, FeederRef::Ac(k)) => ac[k].q_ref = *q,
        (EventKind::IRefStep { i, .. }, FeederRef::Dc(k)) => dc[k].i_ref = *i,
        (EventKind::LoadStep { load, .. }, FeederRef::Dc(k)) => dc[k].load = *load,
        (
            EventKind::VoltageSag {
                fraction, duration, ..
            },
            target,
        ) => {
            match target {
                FeederRef::Dc(k) => dc[k].sag = 1.0 - fraction,
                FeederRef::Ac(k) => ac[k].sag = 1.0 - fraction,
            }
            sags.push((t + duration, target));
        }
        (
            EventKind::RippleEnable {
                delta_i,
                frequency_hz,
                ..
            },
            FeederRef::Dc(k),
        ) => dc[k].ripples.push(LoadModel::RippleSource {
            delta_i: *delta_i,
            omega: 2.0 * std::f64::consts::PI * frequency_hz,
        }),
        (
            EventKind::ImpedanceChange {
                line: LineChange::Dc { r, l },
                ..
            },
            FeederRef::Dc(k),
        ) => {
            dc[k].r = *r;
            dc[k].l = *l;
        }
        (
            EventKind::ImpedanceChange {
                line: LineChange::Ac(z),
                ..
            },
            FeederRef::Ac(k),
        ) => ac[k].z = *z,
        (EventKind::FeederBypass { .. }, FeederRef::Dc(k)) => {
            dc[k].bypassed = true;
            dc[k].ctrl.reset();
        }
        (EventKind::FeederBypass { .. }, FeederRef::Ac(k)) => {
            ac[k].bypassed = true;
            ac[k].ctrl.reset();
        }
        _ => unreachable!("event kinds are checked against feeder kinds during validation"),
    }
}

struct Recorder {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Recorder {
    fn new(s: &Scenario) -> Self {
        let mut names = vec!["t_s".to_string()];
        for f in &s.network.dc_feeders {
            names.push(format!("i_{}_amp", f.id));
            names.push(format!("v_inj_{}_volt", f.id));
            names.push(format!("p_{}_watt", f.id));
        }
        for f in &s.network.ac_feeders {
            names.push(format!("p_{}_watt", f.id));
            names.push(format!("q_{}_var", f.id));
            names.push(format!("v_inj_d_{}_volt", f.id));
            names.push(format!("v_inj_q_{}_volt", f.id));
        }
        for n in [
            "v_dc_volt",
            "i_afe_amp",
            "p_afe_dc_watt",
            "p_afe_ac_watt",
            "q_afe_ac_var",
            "p_bess_watt",
        ] {
            names.push(n.to_string());
        }
        if s.hub.bess.is_some() {
            names.push("soc".to_string());
        }
        names.push("residual_watt".to_string());
        let columns = vec![Vec::new(); names.len()];
        Recorder { names, columns }
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        t: f64,
        dc: &[DcRuntime],
        i_dc: &[f64],
        v_hub: f64,
        ac: &[AcRuntime],
        s_ac: &[crate::powerflow::PowerPair],
        afe: &AfeState,
        p_bess: f64,
        hub: &Hub,
        residual: f64,
    ) {
        let mut row = vec![t];
        for (f, &i) in dc.iter().zip(i_dc) {
            row.extend([i, f.v_inj, v_hub * i]);
        }
        for (f, s) in ac.iter().zip(s_ac) {
            row.extend([s.p, s.q, f.v_inj.re(), f.v_inj.im()]);
        }
        let ac_p = afe.ac_power();
        row.extend([v_hub, afe.i_afe_dc, afe.dc_power(), ac_p.p, ac_p.q, p_bess]);
        if let Some((b, _)) = hub.bess {
            row.push(b.soc());
        }
        row.push(residual);
        for (c, v) in self.columns.iter_mut().zip(row) {
            c.push(v);
        }
    }
}
