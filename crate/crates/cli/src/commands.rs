//! Subcommand bodies. `main` only parses arguments and maps results to exit codes.

use std::path::{Path, PathBuf};

use gridrouter::network::ControlMode;
use gridrouter::sim::{run_scenario_with, RunOptions, Scenario, Trace, Verdict};
use gridrouter::small_signal::{bode_sample, ripple_mitigated_tf, vic_tf};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::report::{
    compute_metrics, stability_report, Metrics, Outputs, ParamsEcho, RunReport, StabilityReport,
};
use crate::scenario_file::{parse_file, set_path, DefaultApplied, ScenarioFile};

pub const THREADS_ENV: &str = "GRIDROUTER_THREADS";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Trace as RFC 4180 CSV with shortest round-trip floats.
pub fn trace_csv(trace: &Trace) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&trace.names)?;
    let mut row = Vec::with_capacity(trace.names.len());
    for k in 0..trace.len() {
        row.clear();
        row.extend(trace.columns.iter().map(|c| format!("{:?}", c[k])));
        w.write_record(&row)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Usage(format!("csv buffer: {e}")))
}

/// A parsed scenario with its run and metrics.
pub struct Evaluation {
    pub scenario: Scenario,
    pub defaults: Vec<DefaultApplied>,
    pub trace: Trace,
    pub metrics: Metrics,
}

/// Runs a scenario document and any comparison reruns it asks for.
pub fn evaluate(file: &ScenarioFile, compare_closed_form: bool) -> Result<Evaluation> {
    let (filled, defaults) = file.with_defaults()?;
    let scenario = filled.to_scenario()?;
    let an = filled.analysis.clone().unwrap_or_default();
    let opts = RunOptions {
        compare_closed_form,
    };
    let trace = run_scenario_with(&scenario, opts)?;

    let droop = if an.droop_comparison == Some(true) {
        let mut s = scenario.clone();
        for f in &mut s.network.dc_feeders {
            if f.control.mode == ControlMode::SeriesModule {
                f.control.mode = ControlMode::Droop;
            }
        }
        Some(run_scenario_with(&s, RunOptions::default())?)
    } else {
        None
    };
    let no_kr = if an.ripple_comparison == Some(true) {
        let mut s = scenario.clone();
        for f in &mut s.network.dc_feeders {
            f.control.k_r = 0.0;
        }
        Some(run_scenario_with(&s, RunOptions::default())?)
    } else {
        None
    };
    let metrics = compute_metrics(&scenario, &an, &trace, droop.as_ref(), no_kr.as_ref())?;
    Ok(Evaluation {
        scenario,
        defaults,
        trace,
        metrics,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Writes `<name>.trace.csv` and `<name>.report.json` into `out_dir`.
pub fn cmd_simulate(path: &Path, out_dir: &Path, compare_closed_form: bool) -> Result<RunReport> {
    let (file, bytes) = parse_file(path)?;
    let ev = evaluate(&file, compare_closed_form)?;
    ensure_dir(out_dir)?;
    let csv_path = out_dir.join(format!("{}.trace.csv", ev.scenario.name));
    let report_path = out_dir.join(format!("{}.report.json", ev.scenario.name));
    let csv = trace_csv(&ev.trace)?;
    write(&csv_path, &csv)?;
    let report = RunReport {
        scenario: ev.scenario.name.clone(),
        scenario_digest: sha256_hex(&bytes),
        trace_digest: sha256_hex(&csv),
        verdict: ev.trace.verdict.label(),
        verdict_tick: ev.trace.verdict.tick(),
        defaults_applied: ev.defaults,
        metrics: ev.metrics,
        outputs: Some(Outputs {
            trace_csv: csv_path.display().to_string(),
            report_json: report_path.display().to_string(),
        }),
    };
    write(&report_path, &to_json(&report))?;
    Ok(report)
}

/// Exit code contract: 0 completed, 2 collapsed, 3 diverged.
pub fn exit_code(verdict: &str) -> i32 {
    match verdict {
        "completed" => 0,
        "collapsed" => 2,
        "diverged" => 3,
        _ => 1,
    }
}

pub fn verdict_exit_code(v: Verdict) -> i32 {
    exit_code(v.label())
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("reports serialize");
    out.push(b'\n');
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityOutput {
    pub defaults_applied: Vec<DefaultApplied>,
    #[serde(flatten)]
    pub report: StabilityReport,
    pub bode_csv: Option<String>,
}

/// Parameter keys accepted by `stability --params`.
pub const PARAM_KEYS: [&str; 10] = [
    "l_henry",
    "r_ohm",
    "c_farad",
    "kp_ohm",
    "ki_ohm_per_s",
    "k_l_henry",
    "k_c_s",
    "k_r",
    "z_ohm",
    "ripple_cutoff_hz",
];

/// Parses `key=value,key=value`. `l_henry`, `r_ohm` and `c_farad` are required.
pub fn parse_params(spec: &str) -> Result<(ParamsEcho, f64, Vec<DefaultApplied>)> {
    let mut given = std::collections::BTreeMap::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("expected key=value, got {item:?}")))?;
        let k = k.trim();
        if !PARAM_KEYS.contains(&k) {
            return Err(CliError::invalid(
                k,
                format!(
                    "unknown parameter; expected one of {}",
                    PARAM_KEYS.join(", ")
                ),
            ));
        }
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| CliError::invalid(k, format!("not a number: {v:?}")))?;
        given.insert(k.to_string(), v);
    }
    let mut defaults = Vec::new();
    let mut get = |k: &str, default: Option<f64>| -> Result<f64> {
        match (given.get(k), default) {
            (Some(v), _) => Ok(*v),
            (None, Some(d)) => {
                defaults.push(DefaultApplied {
                    field: k.to_string(),
                    value: Value::from(d),
                });
                Ok(d)
            }
            (None, None) => Err(CliError::invalid(k, "required")),
        }
    };
    let base = gridrouter::network::ControllerConfig::default();
    let echo = ParamsEcho {
        l_henry: get("l_henry", None)?,
        r_ohm: get("r_ohm", None)?,
        c_farad: get("c_farad", None)?,
        kp_ohm: get("kp_ohm", Some(base.kp))?,
        ki_ohm_per_s: get("ki_ohm_per_s", Some(base.ki))?,
        k_l_henry: get("k_l_henry", Some(0.0))?,
        k_c_s: get("k_c_s", Some(0.0))?,
        k_r: get("k_r", Some(0.0))?,
        z_ohm: get("z_ohm", Some(1.0))?,
    };
    let cutoff = get("ripple_cutoff_hz", Some(base.ripple_cutoff_hz))?;
    Ok((echo, cutoff, defaults))
}

/// Stability parameters from a scenario's analysis section.
pub fn params_from_scenario(path: &Path) -> Result<(ParamsEcho, f64, Vec<DefaultApplied>)> {
    let (file, _) = parse_file(path)?;
    let (filled, defaults) = file.with_defaults()?;
    let scenario = filled.to_scenario()?;
    let an = filled.analysis.unwrap_or_default();
    let id = an.stability_feeder.ok_or_else(|| {
        CliError::invalid(
            "analysis.stability_feeder",
            "scenario has no series-module DC feeder",
        )
    })?;
    let z = an.vic_z_ohm.ok_or_else(|| {
        CliError::invalid(
            "analysis.vic_z_ohm",
            "required when the feeder has no resistance",
        )
    })?;
    let f = scenario
        .network
        .dc_feeders
        .iter()
        .find(|f| f.id == id)
        .expect("checked during parsing");
    let c = &f.control;
    Ok((
        ParamsEcho {
            l_henry: f.l,
            r_ohm: f.r,
            c_farad: scenario.hub.c_dc,
            kp_ohm: c.kp,
            ki_ohm_per_s: c.ki,
            k_l_henry: c.k_l,
            k_c_s: c.k_c,
            k_r: c.k_r,
            z_ohm: z,
        },
        c.ripple_cutoff_hz,
        defaults,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodeGrid {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub points: usize,
}

impl Default for BodeGrid {
    fn default() -> Self {
        BodeGrid {
            f_min_hz: 0.1,
            f_max_hz: 10_000.0,
            points: 200,
        }
    }
}

/// DC-link voltage response of the baseline, ripple-mitigated and
/// inertia-enhanced configurations, one row per frequency.
pub fn bode_csv(p: &ParamsEcho, ripple_cutoff_hz: f64, grid: BodeGrid) -> Result<Vec<u8>> {
    let omega_c = 2.0 * std::f64::consts::PI * ripple_cutoff_hz;
    let tfs = [
        vic_tf(p.c_farad, 0.0, p.z_ohm)?,
        ripple_mitigated_tf(p.c_farad, p.k_r, omega_c)?,
        vic_tf(p.c_farad, p.k_c_s, p.z_ohm)?,
    ];
    let tables = tfs
        .iter()
        .map(|tf| bode_sample(tf, grid.f_min_hz, grid.f_max_hz, grid.points))
        .collect::<gridrouter::Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "f_hz",
        "baseline_gain_db",
        "baseline_phase_deg",
        "ripple_mitigated_gain_db",
        "ripple_mitigated_phase_deg",
        "inertia_enhanced_gain_db",
        "inertia_enhanced_phase_deg",
    ])?;
    for k in 0..grid.points {
        let mut row = vec![format!("{:?}", tables[0][k].f_hz)];
        for t in &tables {
            row.push(format!("{:?}", t[k].gain_db));
            row.push(format!("{:?}", t[k].phase_deg));
        }
        w.write_record(&row)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Usage(format!("csv buffer: {e}")))
}

pub fn cmd_stability(
    params: (ParamsEcho, f64, Vec<DefaultApplied>),
    bode: Option<(&Path, BodeGrid)>,
) -> Result<StabilityOutput> {
    let (echo, cutoff, defaults) = params;
    let report = stability_report(echo, cutoff)?;
    let bode_csv = match bode {
        Some((path, grid)) => {
            write(path, &bode_csv(&echo, cutoff, grid)?)?;
            Some(path.display().to_string())
        }
        None => None,
    };
    Ok(StabilityOutput {
        defaults_applied: defaults,
        report,
        bode_csv,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub scenario: String,
    pub scenario_digest: String,
    pub param: String,
    pub rows: usize,
    pub csv: String,
    pub csv_digest: String,
}

fn threads() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
}

/// Sweep table rows: header then one row per value, in the given order.
pub fn sweep_table(file: &ScenarioFile, param: &str, values: &[f64]) -> Result<Vec<u8>> {
    if values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value".into()));
    }
    let canonical: Value =
        serde_json::from_str(&file.to_canonical_string()?).expect("canonical form is JSON");
    let mut docs = Vec::with_capacity(values.len());
    for &v in values {
        let mut doc = canonical.clone();
        let number = serde_json::Number::from_f64(v)
            .ok_or_else(|| CliError::invalid(param, format!("non-finite sweep value {v}")))?;
        set_path(&mut doc, param, Value::Number(number))?;
        let f: ScenarioFile =
            serde_json::from_value(doc).map_err(|e| CliError::invalid(param, e.to_string()))?;
        docs.push(f);
    }
    let run = |f: &ScenarioFile| evaluate(f, false);
    let results: Vec<Result<Evaluation>> = match threads() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?
            .install(|| docs.par_iter().map(run).collect()),
        None => docs.par_iter().map(run).collect(),
    };

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Option<Vec<String>> = None;
    for (v, r) in values.iter().zip(results) {
        let ev = r?;
        let flat = ev.metrics.flatten();
        if header.is_none() {
            let mut h = vec![param.to_string(), "verdict".into(), "verdict_tick".into()];
            h.extend(flat.iter().map(|(k, _)| k.clone()));
            w.write_record(&h)?;
            header = Some(h);
        }
        let mut row = vec![
            format!("{v:?}"),
            ev.trace.verdict.label().to_string(),
            ev.trace
                .verdict
                .tick()
                .map(|t| t.to_string())
                .unwrap_or_default(),
        ];
        row.extend(flat.into_iter().map(|(_, v)| v));
        w.write_record(&row)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Usage(format!("csv buffer: {e}")))
}

pub fn cmd_sweep(path: &Path, param: &str, values: &[f64], out_dir: &Path) -> Result<SweepReport> {
    let (file, bytes) = parse_file(path)?;
    let table = sweep_table(&file, param, values)?;
    ensure_dir(out_dir)?;
    let out: PathBuf = out_dir.join(format!("{}.sweep.csv", file.name));
    write(&out, &table)?;
    Ok(SweepReport {
        scenario: file.name.clone(),
        scenario_digest: sha256_hex(&bytes),
        param: param.to_string(),
        rows: values.len(),
        csv: out.display().to_string(),
        csv_digest: sha256_hex(&table),
    })
}

/// Parses `--values`: a comma list, or `start:stop:count` for an evenly spaced range.
pub fn parse_values(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let a: f64 = parse_num(parts[0])?;
        let b: f64 = parse_num(parts[1])?;
        let n: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad point count {:?}", parts[2])))?;
        return Ok(match n {
            0 => Vec::new(),
            1 => vec![a],
            n => (0..n)
                .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
                .collect(),
        });
    }
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_num)
        .collect()
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("not a number: {s:?}")))
}

pub fn print_json<T: Serialize>(v: &T) {
    println!(
        "{}",
        String::from_utf8(to_json(v))
            .expect("JSON is UTF-8")
            .trim_end()
    );
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_example_coefficients() {
        let (echo, cutoff, defaults) = parse_params("l_henry=1e-3,r_ohm=0.1,c_farad=1e-3").unwrap();
        let out = cmd_stability((echo, cutoff, defaults), None).unwrap();
        assert_eq!(out.report.characteristic_poly, [1e-3, 100.1, 1050.0]);
        assert_eq!(out.report.verdict, "stable");
        assert!(out.defaults_applied.iter().any(|d| d.field == "kp_ohm"));
    }

    #[test]
    fn vic_predicate_false_at_twice_zc() {
        let (echo, c, d) =
            parse_params("l_henry=1e-3,r_ohm=0.1,c_farad=1e-3,z_ohm=2,k_c_s=0.004").unwrap();
        assert!(!cmd_stability((echo, c, d), None).unwrap().report.vic_stable);
    }

    #[test]
    fn params_errors() {
        assert!(parse_params("r_ohm=0.1,c_farad=1e-3").is_err());
        assert!(parse_params("l_henry=1e-3,r_ohm=0.1,c_farad=1e-3,bogus=1").is_err());
        assert!(parse_params("l_henry=x,r_ohm=0.1,c_farad=1e-3").is_err());
        let (e, c, d) = parse_params("l_henry=1e-3,r_ohm=0.1,c_farad=-1").unwrap();
        assert!(cmd_stability((e, c, d), None).is_err());
    }

    #[test]
    fn bode_rows_increase() {
        let (echo, cutoff, _) =
            parse_params("l_henry=1e-3,r_ohm=0.1,c_farad=1e-3,k_c_s=5e-4,k_r=0.8").unwrap();
        let bytes = bode_csv(&echo, cutoff, BodeGrid::default()).unwrap();
        let mut r = csv::Reader::from_reader(bytes.as_slice());
        let f: Vec<f64> = r
            .records()
            .map(|x| x.unwrap()[0].parse().unwrap())
            .collect();
        assert_eq!(f.len(), 200);
        assert!(f.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn values_lists_and_ranges() {
        assert_eq!(parse_values("1, 2,3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_values("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_values("0:1:0").unwrap().is_empty());
        assert!(parse_values("a").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code("completed"), 0);
        assert_eq!(exit_code("collapsed"), 2);
        assert_eq!(exit_code("diverged"), 3);
    }
}
