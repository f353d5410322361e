//! Summary metrics computed from a finished run.

use gridrouter::hub::partial_power_metrics;
use gridrouter::network::{ControlMode, FeederRef};
use gridrouter::sim::analysis::{
    ripple_amplitude, settling_time, sharing_error, sustained_oscillation,
};
use gridrouter::sim::{EventKind, Scenario, Trace};
use gridrouter::small_signal::{
    characteristic_poly, closed_loop_tf, critical_k_c, cubic_is_hurwitz, current_loop_pole,
    filtered_characteristic_poly, is_stable_condition, poles, stability_verdict, vic_stable,
    SmallSignalParams, StabilityVerdict,
};
use serde::Serialize;

use crate::error::Result;
use crate::scenario_file::{AnalysisSection, DefaultApplied};

/// Fraction of the run, counted from the end, used for "final" averages
/// when the steady-state window is empty.
const TAIL_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeederMetrics {
    pub id: String,
    pub kind: &'static str,
    pub mode: &'static str,
    /// Final current reference (DC, amperes) or active-power reference (AC, watts).
    pub reference: f64,
    pub settling_time_s: Option<f64>,
    pub steady_state_error: Option<f64>,
    /// AC only: relative error of reactive power against its final reference.
    pub q_steady_state_error: Option<f64>,
    pub ripple_amplitude: Option<f64>,
    pub partial_power_fraction: Option<f64>,
    pub p_series_watt: Option<f64>,
    pub p_transfer_watt: Option<f64>,
    pub sustained_oscillation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HubMetrics {
    pub v_dc_final_volt: Option<f64>,
    pub v_dc_ripple_volt: Option<f64>,
    pub residual_max_abs_watt: Option<f64>,
    /// Largest steady-window residual over the peak transfer power.
    pub residual_max_rel: Option<f64>,
    pub peak_transfer_power_watt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharingMetrics {
    pub feeders: [String; 2],
    /// Sharing error of the scenario as written.
    pub configured: Option<f64>,
    /// Same scenario with series-module feeders switched to droop.
    pub droop: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RippleComparison {
    pub feeder: String,
    pub amplitude_with_k_r: Option<f64>,
    pub amplitude_without_k_r: Option<f64>,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamsEcho {
    pub l_henry: f64,
    pub r_ohm: f64,
    pub c_farad: f64,
    pub kp_ohm: f64,
    pub ki_ohm_per_s: f64,
    pub k_l_henry: f64,
    pub k_c_s: f64,
    pub k_r: f64,
    pub z_ohm: f64,
}

impl ParamsEcho {
    pub fn to_params(self) -> SmallSignalParams {
        SmallSignalParams {
            l: self.l_henry,
            r: self.r_ohm,
            c: self.c_farad,
            k_p: self.kp_ohm,
            k_i: self.ki_ohm_per_s,
            k_l: self.k_l_henry,
            k_c: self.k_c_s,
            k_r: self.k_r,
            z: self.z_ohm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferFunction {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilteredLoop {
    pub ripple_cutoff_hz: f64,
    pub characteristic_poly: [f64; 4],
    pub hurwitz: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub params: ParamsEcho,
    pub characteristic_poly: [f64; 3],
    pub closed_loop_tf: TransferFunction,
    /// `[re, im]` pairs.
    pub poles: Vec<[f64; 2]>,
    pub max_pole_re: f64,
    pub stability_condition: bool,
    pub verdict: &'static str,
    pub critical_k_c_s: f64,
    pub vic_stable: bool,
    pub current_loop_pole: f64,
    pub filtered: FilteredLoop,
}

pub fn stability_report(echo: ParamsEcho, ripple_cutoff_hz: f64) -> Result<StabilityReport> {
    let p = echo.to_params();
    p.validate()?;
    let tf = closed_loop_tf(&p)?;
    let poly = characteristic_poly(&p);
    let roots = poles(poly)?;
    let filtered = filtered_characteristic_poly(&p, 2.0 * std::f64::consts::PI * ripple_cutoff_hz)?;
    Ok(StabilityReport {
        params: echo,
        characteristic_poly: poly,
        closed_loop_tf: TransferFunction {
            num: tf.num,
            den: tf.den,
        },
        poles: roots.iter().map(|r| [r.re, r.im]).collect(),
        max_pole_re: roots.iter().map(|r| r.re).fold(f64::NEG_INFINITY, f64::max),
        stability_condition: is_stable_condition(&p),
        verdict: match stability_verdict(&p) {
            StabilityVerdict::Stable => "stable",
            StabilityVerdict::Marginal => "marginal",
            StabilityVerdict::Unstable => "unstable",
        },
        critical_k_c_s: critical_k_c(&p),
        vic_stable: vic_stable(p.c, p.k_c, p.z),
        current_loop_pole: current_loop_pole(p.r, p.l, p.k_l)?,
        filtered: FilteredLoop {
            ripple_cutoff_hz,
            characteristic_poly: filtered,
            hurwitz: cubic_is_hurwitz(filtered),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outputs {
    pub trace_csv: String,
    pub report_json: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    /// SHA-256 of the scenario file bytes.
    pub scenario_digest: String,
    /// SHA-256 of the trace CSV bytes.
    pub trace_digest: String,
    pub verdict: &'static str,
    pub verdict_tick: Option<usize>,
    pub defaults_applied: Vec<DefaultApplied>,
    pub metrics: Metrics,
    pub outputs: Option<Outputs>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub feeders: Vec<FeederMetrics>,
    pub hub: HubMetrics,
    pub closed_form_max_rel_gap: Option<f64>,
    pub stability: Option<StabilityReport>,
    pub sharing: Option<SharingMetrics>,
    pub ripple_comparison: Option<Vec<RippleComparison>>,
}

impl Metrics {
    /// Flat `(column, value)` pairs for sweep tables. Absent values are empty.
    pub fn flatten(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let num = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        if let Some(s) = &self.stability {
            out.push((
                "stability_condition".into(),
                s.stability_condition.to_string(),
            ));
            out.push(("vic_stable".into(), s.vic_stable.to_string()));
            out.push(("max_pole_re".into(), num(Some(s.max_pole_re))));
        }
        for f in &self.feeders {
            let id = &f.id;
            out.push((format!("{id}_settling_time_s"), num(f.settling_time_s)));
            out.push((
                format!("{id}_steady_state_error"),
                num(f.steady_state_error),
            ));
            out.push((format!("{id}_ripple_amplitude"), num(f.ripple_amplitude)));
            out.push((
                format!("{id}_partial_power_fraction"),
                num(f.partial_power_fraction),
            ));
            out.push((
                format!("{id}_sustained_oscillation"),
                f.sustained_oscillation.to_string(),
            ));
        }
        out.push(("residual_max_rel".into(), num(self.hub.residual_max_rel)));
        out.push(("v_dc_final_volt".into(), num(self.hub.v_dc_final_volt)));
        if let Some(s) = &self.sharing {
            out.push(("sharing_error".into(), num(s.configured)));
            out.push(("sharing_error_droop".into(), num(s.droop)));
        }
        if let Some(g) = self.closed_form_max_rel_gap {
            out.push(("closed_form_max_rel_gap".into(), num(Some(g))));
        }
        out
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn mode_name(m: ControlMode) -> &'static str {
    match m {
        ControlMode::SeriesModule => "series_module",
        ControlMode::Droop => "droop",
        ControlMode::None => "none",
    }
}

/// `(p_ref, q_ref, last step time)` per AC feeder.
type AcRefs = Vec<(f64, f64, Option<f64>)>;
/// `(i_ref, last step time)` per DC feeder.
type DcRefs = Vec<(f64, Option<f64>)>;

/// Final references and the time of each feeder's last reference step.
fn final_references(s: &Scenario) -> (AcRefs, DcRefs) {
    let mut ac: AcRefs = s
        .network
        .ac_feeders
        .iter()
        .map(|f| (f.p_ref, f.q_ref, None))
        .collect();
    let mut dc: DcRefs = s
        .network
        .dc_feeders
        .iter()
        .map(|f| (f.i_ref, None))
        .collect();
    for e in &s.events {
        match (&e.kind, s.network.find(e.kind.feeder())) {
            (EventKind::PRefStep { p, .. }, Some(FeederRef::Ac(k))) => {
                ac[k] = (*p, ac[k].1, Some(e.t))
            }
            (EventKind::QRefStep { q, .. }, Some(FeederRef::Ac(k))) => {
                ac[k] = (ac[k].0, *q, Some(e.t))
            }
            (EventKind::PRefStep { p, .. }, Some(FeederRef::Dc(k))) => {
                dc[k] = (*p / s.network.dc_feeders[k].v_source, Some(e.t))
            }
            (EventKind::IRefStep { i, .. }, Some(FeederRef::Dc(k))) => dc[k] = (*i, Some(e.t)),
            _ => {}
        }
    }
    (ac, dc)
}

/// Indices of the steady-state window; the last tenth of the run when the
/// configured window holds fewer than two samples.
fn window(t: &[f64], from: f64) -> std::ops::Range<usize> {
    let start = t.iter().position(|&x| x >= from).unwrap_or(t.len());
    if t.len() - start >= 2 {
        start..t.len()
    } else {
        let tail = ((t.len() as f64 * TAIL_FRACTION).ceil() as usize)
            .max(1)
            .min(t.len());
        t.len() - tail..t.len()
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn rel_error(x: &[f64], target: f64) -> Option<f64> {
    if x.is_empty() || target == 0.0 {
        return None;
    }
    finite((mean(x) - target).abs() / target.abs())
}

/// Metrics from one run. `reruns` supplies the droop and `K_r = 0` runs
/// when the analysis section asks for them.
pub fn compute_metrics(
    s: &Scenario,
    an: &AnalysisSection,
    trace: &Trace,
    droop_run: Option<&Trace>,
    no_ripple_feedforward_run: Option<&Trace>,
) -> Result<Metrics> {
    let t = trace.time();
    let win = window(t, an.steady_state_from_s.unwrap_or(0.0));
    let band = an
        .settling_band
        .unwrap_or(crate::scenario_file::DEFAULT_SETTLING_BAND);
    let dt = trace.sample_period;
    let ripple = |x: &[f64]| -> Option<f64> {
        let f = an.ripple_frequency_hz?;
        ripple_amplitude(&x[win.clone()], dt, f)
            .ok()
            .and_then(finite)
    };
    let col = |tr: &Trace, name: String| -> Vec<f64> {
        tr.column(&name).map(<[f64]>::to_vec).unwrap_or_default()
    };
    let v_dc = col(trace, "v_dc_volt".into());
    let (ac_refs, dc_refs) = final_references(s);

    let mut feeders = Vec::new();
    for (k, f) in s.network.dc_feeders.iter().enumerate() {
        let (i_ref, stepped) = dc_refs[k];
        let i = col(trace, format!("i_{}_amp", f.id));
        let v_inj = col(trace, format!("v_inj_{}_volt", f.id));
        let pp = match (i.last(), v_inj.last(), v_dc.last()) {
            (Some(&i), Some(&vi), Some(&v)) => partial_power_metrics(v, vi, i).ok(),
            _ => None,
        };
        feeders.push(FeederMetrics {
            id: f.id.clone(),
            kind: "dc",
            mode: mode_name(f.control.mode),
            reference: i_ref,
            settling_time_s: settling_time(t, &i, i_ref, band, stepped.unwrap_or(0.0)),
            steady_state_error: rel_error(&i[win.clone()], i_ref),
            q_steady_state_error: None,
            ripple_amplitude: ripple(&i),
            partial_power_fraction: pp.and_then(|m| m.fraction),
            p_series_watt: pp.and_then(|m| finite(m.p_series)),
            p_transfer_watt: pp.and_then(|m| finite(m.p_transfer)),
            sustained_oscillation: sustained_oscillation(&i, i_ref),
        });
    }
    for (k, f) in s.network.ac_feeders.iter().enumerate() {
        let (p_ref, q_ref, stepped) = ac_refs[k];
        let p = col(trace, format!("p_{}_watt", f.id));
        let q = col(trace, format!("q_{}_var", f.id));
        let vd = col(trace, format!("v_inj_d_{}_volt", f.id));
        let vq = col(trace, format!("v_inj_q_{}_volt", f.id));
        let fraction = match (vd.last(), vq.last()) {
            (Some(d), Some(q)) => finite(d.hypot(*q) / s.hub.v_bus_ac),
            _ => None,
        };
        feeders.push(FeederMetrics {
            id: f.id.clone(),
            kind: "ac",
            mode: mode_name(f.control.mode),
            reference: p_ref,
            settling_time_s: settling_time(t, &p, p_ref, band, stepped.unwrap_or(0.0)),
            steady_state_error: rel_error(&p[win.clone()], p_ref),
            q_steady_state_error: rel_error(&q[win.clone()], q_ref),
            ripple_amplitude: None,
            partial_power_fraction: fraction,
            p_series_watt: None,
            p_transfer_watt: p.last().copied().and_then(finite),
            sustained_oscillation: sustained_oscillation(&p, p_ref),
        });
    }

    let residual = col(trace, "residual_watt".into());
    let peak = finite(trace.peak_transfer_power);
    let steady_residual = residual[win.clone()]
        .iter()
        .fold(0.0f64, |m, r| m.max(r.abs()));
    let hub = HubMetrics {
        v_dc_final_volt: v_dc.last().copied().and_then(finite),
        v_dc_ripple_volt: ripple(&v_dc),
        residual_max_abs_watt: finite(residual.iter().fold(0.0f64, |m, r| m.max(r.abs()))),
        residual_max_rel: peak
            .filter(|p| *p > 0.0)
            .and_then(|p| finite(steady_residual / p)),
        peak_transfer_power_watt: peak,
    };

    let stability = match (&an.stability_feeder, an.vic_z_ohm) {
        (Some(id), Some(z)) => {
            let f = s
                .network
                .dc_feeders
                .iter()
                .find(|f| &f.id == id)
                .expect("stability feeder checked during parsing");
            let c = &f.control;
            let echo = ParamsEcho {
                l_henry: f.l,
                r_ohm: f.r,
                c_farad: s.hub.c_dc,
                kp_ohm: c.kp,
                ki_ohm_per_s: c.ki,
                k_l_henry: c.k_l,
                k_c_s: c.k_c,
                k_r: c.k_r,
                z_ohm: z,
            };
            Some(stability_report(echo, c.ripple_cutoff_hz)?)
        }
        _ => None,
    };

    // Only meaningful when the first two DC feeders are asked for the same current.
    let sharing =
        if s.network.dc_feeders.len() >= 2 && dc_refs[0].0 == dc_refs[1].0 && dc_refs[0].0 != 0.0 {
            let ids = [
                s.network.dc_feeders[0].id.clone(),
                s.network.dc_feeders[1].id.clone(),
            ];
            let share = |tr: &Trace| -> Option<f64> {
                let w = window(tr.time(), an.steady_state_from_s.unwrap_or(0.0));
                let a = col(tr, format!("i_{}_amp", ids[0]));
                let b = col(tr, format!("i_{}_amp", ids[1]));
                if a.len() < w.end || b.len() < w.end {
                    return None;
                }
                sharing_error(mean(&a[w.clone()]), mean(&b[w])).and_then(finite)
            };
            Some(SharingMetrics {
                configured: share(trace),
                droop: droop_run.and_then(share),
                feeders: ids,
            })
        } else {
            None
        };

    let ripple_comparison = no_ripple_feedforward_run.map(|base| {
        s.network
            .dc_feeders
            .iter()
            .map(|f| {
                let name = format!("i_{}_amp", f.id);
                let with = ripple(&col(trace, name.clone()));
                let without = if base.len() == trace.len() {
                    ripple(&col(base, name))
                } else {
                    None
                };
                RippleComparison {
                    feeder: f.id.clone(),
                    amplitude_with_k_r: with,
                    amplitude_without_k_r: without,
                    ratio: match (with, without) {
                        (Some(a), Some(b)) if b > 0.0 => finite(a / b),
                        _ => None,
                    },
                }
            })
            .collect()
    });

    Ok(Metrics {
        feeders,
        hub,
        closed_form_max_rel_gap: trace.closed_form_max_rel_gap.and_then(finite),
        stability,
        sharing,
        ripple_comparison,
    })
}
