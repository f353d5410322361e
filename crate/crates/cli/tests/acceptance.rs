//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use gridrouter::dc::{holdup_time, rk4_step};
use gridrouter::powerflow::{approx_power_dq, feeder_power_exact, sensitivity_matrix};
use gridrouter::small_signal::{
    characteristic_poly, is_stable_condition, poles, SmallSignalParams,
};
use gridrouter::{DqInjection, Impedance, Phasor};
use gridrouter_cli::commands::{
    bode_csv, cmd_simulate, evaluate, parse_params, trace_csv, BodeGrid,
};
use gridrouter_cli::scenario_file::{parse_file, ScenarioFile};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const SEED: u64 = 0x5eed_0001;

/// Ripple ratio (K_r on / K_r off) of the downstream feeder from the
/// reference run of `dc_ripple_100hz`.
const RIPPLE_RATIO_GOLDEN: f64 = 0.07277003897702042;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn load(name: &str) -> ScenarioFile {
    parse_file(&scenarios_dir().join(format!("{name}.json")))
        .unwrap_or_else(|e| panic!("{name}: {e}"))
        .0
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn c01_decoupling_sensitivities() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..1000 {
        let v = rng.gen_range(100.0..400.0);
        let zm = rng.gen_range(0.05..2.0);
        let ang: f64 = rng.gen_range(0.1..1.5);
        let z = Impedance::new(zm * ang.cos(), zm * ang.sin());
        let delta = rng.gen_range(-0.05..0.05);
        let (vd, vq) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let h = 1e-6 * v;
        let p =
            |vd: f64, vq: f64| approx_power_dq(v, v, delta, z, DqInjection::new(vd, vq)).unwrap();
        let (pd_hi, pd_lo) = (p(vd + h, vq), p(vd - h, vq));
        let (pq_hi, pq_lo) = (p(vd, vq + h), p(vd, vq - h));
        let fd = [
            [
                (pd_hi.p - pd_lo.p) / (2.0 * h),
                (pq_hi.p - pq_lo.p) / (2.0 * h),
            ],
            [
                (pd_hi.q - pd_lo.q) / (2.0 * h),
                (pq_hi.q - pq_lo.q) / (2.0 * h),
            ],
        ];
        let m = sensitivity_matrix(v, z).unwrap();
        let scale = v / zm;
        let err = (0..4)
            .map(|k| (fd[k / 2][k % 2] - m[k / 2][k % 2]).abs() / scale)
            .fold(0.0, f64::max);
        worst = worst.max(err);
        if err > 1e-4 {
            failures += 1;
        }
    }
    outcome(
        failures == 0,
        format!("{failures}/1000 points outside 1e-4, worst relative error {worst:.3e}"),
    )
}

fn c02_predicate_vs_roots() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED + 2);
    let mut checked = 0;
    let mut disagreements = 0;
    while checked < 1000 {
        let mut p = SmallSignalParams {
            l: rng.gen_range(1e-4..1e-1),
            r: rng.gen_range(0.0..2.0),
            c: rng.gen_range(1e-5..1e-2),
            k_p: rng.gen_range(0.0..200.0),
            k_i: rng.gen_range(0.0..200.0),
            k_l: rng.gen_range(0.0..0.05),
            k_c: 0.0,
            k_r: rng.gen_range(0.0..1.0),
            z: rng.gen_range(0.1..10.0),
        };
        p.k_c = p.k_r + (p.r + p.k_p + p.k_l) * p.c * rng.gen_range(0.0..2.0);
        let margin = (p.r + p.k_p + p.k_l) * p.c - (p.k_c - p.k_r);
        if margin.abs() <= 1e-9 {
            continue;
        }
        checked += 1;
        let max_re = poles(characteristic_poly(&p))
            .unwrap()
            .iter()
            .map(|s| s.re)
            .fold(f64::NEG_INFINITY, f64::max);
        if is_stable_condition(&p) != (max_re < 0.0) {
            disagreements += 1;
        }
    }
    outcome(
        disagreements == 0,
        format!("{disagreements}/1000 disagreements"),
    )
}

fn c03_closed_loop_tracking() -> Outcome {
    let stable = evaluate(&load("dc_power_tracking"), false).unwrap();
    let f1 = &stable.metrics.feeders[0];
    let settle = f1.settling_time_s;
    let settled = stable.trace.verdict.label() == "completed" && settle.is_some_and(|t| t <= 0.040);

    let file = load("dc_power_tracking_unstable");
    let unstable = evaluate(&file, false).unwrap();
    let s = unstable.metrics.stability.as_ref().unwrap();
    let p = s.params;
    let bound = (p.r_ohm + p.kp_ohm + p.k_l_henry) * p.c_farad;
    let kappa = p.k_c_s - p.k_r;
    let oscillates = unstable.trace.verdict.label() == "diverged"
        || unstable.metrics.feeders[0].sustained_oscillation;
    outcome(
        settled && kappa >= 2.0 * bound && oscillates,
        format!(
            "settling {settle:?} s; K_C - K_r = {kappa} vs bound {bound}: verdict {}, sustained oscillation {}",
            unstable.trace.verdict.label(),
            unstable.metrics.feeders[0].sustained_oscillation
        ),
    )
}

fn c04_ripple_mitigation() -> Outcome {
    let ev = evaluate(&load("dc_ripple_100hz"), false).unwrap();
    let cmp = ev.metrics.ripple_comparison.unwrap();
    let f2 = cmp.iter().find(|c| c.feeder == "f2").unwrap();
    let ratio = f2.ratio.unwrap_or(f64::INFINITY);
    outcome(
        ratio <= 0.2 && rel(ratio, RIPPLE_RATIO_GOLDEN) <= 1e-6,
        format!("downstream ripple ratio {ratio:.5} (golden {RIPPLE_RATIO_GOLDEN:.5})"),
    )
}

fn c05_partial_power_fraction() -> Outcome {
    let ev = evaluate(&load("partial_power_hub"), false).unwrap();
    let f = &ev.metrics.feeders[0];
    let ratio = f.p_series_watt.unwrap() / f.p_transfer_watt.unwrap();
    let fraction = f.partial_power_fraction.unwrap();
    outcome(
        (ratio - 0.10).abs() <= 1e-12 && (fraction - 0.10).abs() <= 1e-12,
        format!("P_series/P_transfer = {ratio:?}, |v_inj|/V = {fraction:?}"),
    )
}

fn c06_conservation() -> Outcome {
    let mut worst: f64 = 0.0;
    for name in ["partial_power_hub", "hybrid_hub_balance"] {
        let ev = evaluate(&load(name), false).unwrap();
        let peak = ev.trace.peak_transfer_power;
        for r in ev.trace.column("residual_watt").unwrap() {
            worst = worst.max(r.abs() / peak);
        }
    }
    let (l, c) = (1e-3, 1e-3);
    let energy = |y: &[f64]| 0.5 * l * y[0] * y[0] + 0.5 * c * y[1] * y[1];
    let mut y = vec![2.0, 100.0];
    let e0 = energy(&y);
    for _ in 0..10_000 {
        rk4_step(&mut y, 1e-5, |s, d| {
            d[0] = s[1] / l;
            d[1] = -s[0] / c;
        });
    }
    let drift = rel(energy(&y), e0);
    outcome(
        worst <= 1e-9 && drift <= 1e-6,
        format!("max |residual|/peak {worst:.3e}; LC energy drift {drift:.3e}"),
    )
}

fn c07_apparent_power_identity() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED + 7);
    let mut worst: f64 = 0.0;
    for _ in 0..100_000 {
        let v = Phasor::new(rng.gen_range(-500.0..500.0), rng.gen_range(-500.0..500.0));
        let i = Phasor::new(rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0));
        let s = feeder_power_exact(v, i);
        let lhs = s.p * s.p + s.q * s.q;
        let rhs = v.magnitude().powi(2) * i.magnitude().powi(2);
        if rhs > 0.0 {
            worst = worst.max(rel(lhs, rhs));
        }
    }
    outcome(
        worst <= 1e-9,
        format!("worst relative error {worst:.3e} over 1e5 samples"),
    )
}

fn ulps(a: f64, b: f64) -> u64 {
    (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
}

fn c08_holdup() -> Outcome {
    let h = holdup_time(300e-6, 400.0, 360.0, 1000.0, 36000.0, 48.0).unwrap();
    let (cap, bat) = (ulps(h.capacitor, 0.01824), ulps(h.battery, 1728.0));
    outcome(
        cap <= 1 && bat == 0,
        format!(
            "t_cap = {:?} ({cap} ulp), t_batt = {:?} ({bat} ulp)",
            h.capacitor, h.battery
        ),
    )
}

fn c09_droop_vs_series_module() -> Outcome {
    let ev = evaluate(&load("droop_vs_sm_load_step"), false).unwrap();
    let s = ev.metrics.sharing.unwrap();
    let (sm, droop) = (s.configured.unwrap(), s.droop.unwrap());
    outcome(
        sm <= 0.01 && droop >= 10.0 * sm,
        format!("series module {sm:.3e}, droop {droop:.3e}"),
    )
}

fn c10_virtual_inertia_bode() -> Outcome {
    let (c, k_c, z): (f64, f64, f64) = (300e-6, 2e-4, 1.0);
    let (echo, cutoff, _) = parse_params(&format!(
        "l_henry=1e-2,r_ohm=0.5,c_farad={c},k_c_s={k_c},z_ohm={z},k_r=0.9"
    ))
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bode.csv");
    gridrouter_cli::commands::cmd_stability(
        (echo, cutoff, Vec::new()),
        Some((&path, BodeGrid::default())),
    )
    .unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(bytes, bode_csv(&echo, cutoff, BodeGrid::default()).unwrap());
    let expected = 20.0 * ((c + k_c / z) / c).log10();
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    let header = rdr.headers().unwrap().clone();
    let col = |n: &str| header.iter().position(|h| h == n).unwrap();
    let (f, base, vic) = (
        col("f_hz"),
        col("baseline_gain_db"),
        col("inertia_enhanced_gain_db"),
    );
    let mut worst: f64 = 0.0;
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        if rec[f].parse::<f64>().unwrap() > 10.0 {
            continue;
        }
        let drop = rec[base].parse::<f64>().unwrap() - rec[vic].parse::<f64>().unwrap();
        worst = worst.max((drop - expected).abs());
        rows += 1;
    }
    outcome(
        rows > 0 && worst <= 1e-6,
        format!("expected {expected:.6} dB, worst deviation {worst:.3e} dB over {rows} rows below 10 Hz"),
    )
}

fn c11_determinism() -> Outcome {
    let mut names: Vec<PathBuf> = std::fs::read_dir(scenarios_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    names.sort();
    let mut mismatched = Vec::new();
    for p in &names {
        let file = parse_file(p).unwrap().0;
        let a = trace_csv(&evaluate(&file, false).unwrap().trace).unwrap();
        let b = trace_csv(&evaluate(&file, false).unwrap().trace).unwrap();
        if gridrouter_cli::commands::sha256_hex(&a) != gridrouter_cli::commands::sha256_hex(&b) {
            mismatched.push(p.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    outcome(
        mismatched.is_empty() && !names.is_empty(),
        format!("{} scenarios, mismatched: {mismatched:?}", names.len()),
    )
}

fn c12_closed_form_report() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let report = cmd_simulate(
        &scenarios_dir().join("ac_power_tracking.json"),
        dir.path(),
        true,
    )
    .unwrap();
    let text = std::fs::read_to_string(dir.path().join("ac_power_tracking.report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    let gap = json["metrics"]["closed_form_max_rel_gap"].as_f64();
    outcome(
        gap.is_some() && report.metrics.closed_form_max_rel_gap == gap,
        format!("max relative gap {gap:?} (reported, not bounded)"),
    )
}

fn main() {
    let criteria: [(&str, Option<Duration>, fn() -> Outcome); 12] = [
        (
            "decoupling sensitivities",
            Some(Duration::from_secs(1)),
            c01_decoupling_sensitivities,
        ),
        (
            "stability predicate vs roots",
            Some(Duration::from_secs(1)),
            c02_predicate_vs_roots,
        ),
        (
            "closed-loop tracking",
            Some(Duration::from_secs(5)),
            c03_closed_loop_tracking,
        ),
        (
            "ripple mitigation",
            Some(Duration::from_secs(5)),
            c04_ripple_mitigation,
        ),
        ("partial-power fraction", None, c05_partial_power_fraction),
        ("conservation", None, c06_conservation),
        ("apparent-power identity", None, c07_apparent_power_identity),
        ("hold-up formula", None, c08_holdup),
        (
            "droop vs series module",
            Some(Duration::from_secs(5)),
            c09_droop_vs_series_module,
        ),
        ("virtual-inertia bode", None, c10_virtual_inertia_bode),
        ("determinism", None, c11_determinism),
        (
            "closed-form discrepancy report",
            None,
            c12_closed_form_report,
        ),
    ];
    let mut failed = 0;
    for (k, (name, budget, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let o = run();
        let took = t0.elapsed();
        let in_time = budget.is_none_or(|b| took <= b);
        let pass = o.pass && in_time;
        if !pass {
            failed += 1;
        }
        let timing = match budget {
            Some(b) if !in_time => format!(
                "{:.2} s, over the {:.0} s budget",
                took.as_secs_f64(),
                b.as_secs_f64()
            ),
            _ => format!("{:.2} s", took.as_secs_f64()),
        };
        println!(
            "{} {:>2} {name}: {} [{timing}]",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            o.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
