use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gridrouter_cli::commands::{
    cmd_simulate, cmd_stability, cmd_sweep, exit_code, params_from_scenario, parse_params,
    parse_values, print_json, BodeGrid,
};
use gridrouter_cli::CliError;

/// Simulate hybrid AC/DC hubs steered by series voltage-injection modules.
#[derive(Parser)]
#[command(name = "gridrouter", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write its trace CSV and report JSON.
    Simulate {
        file: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Also track the closed-form AC power expressions against the exact ones.
        #[arg(long)]
        compare_closed_form: bool,
    },
    /// Linear stability of one DC feeder's current loop.
    Stability(StabilityArgs),
    /// Run a scenario once per value of one parameter.
    Sweep {
        file: PathBuf,
        /// Dotted path into the canonical scenario, e.g. `controllers.f1.k_c_s`.
        #[arg(long)]
        param: String,
        /// `v1,v2,...` or `start:stop:count`.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct StabilityArgs {
    #[arg(long, conflicts_with = "params", required_unless_present = "params")]
    scenario: Option<PathBuf>,
    /// `l_henry=..,r_ohm=..,c_farad=..[,kp_ohm=..,ki_ohm_per_s=..,k_l_henry=..,k_c_s=..,k_r=..,z_ohm=..,ripple_cutoff_hz=..]`
    #[arg(long)]
    params: Option<String>,
    /// Write baseline, ripple-mitigated and inertia-enhanced Bode tables here.
    #[arg(long)]
    bode: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    f_min: f64,
    #[arg(long, default_value_t = 10_000.0)]
    f_max: f64,
    #[arg(long, default_value_t = 200)]
    points: usize,
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.cmd {
        Cmd::Simulate {
            file,
            out,
            compare_closed_form,
        } => {
            let r = cmd_simulate(&file, &out, compare_closed_form)?;
            print_json(&r);
            Ok(exit_code(r.verdict) as u8)
        }
        Cmd::Stability(a) => {
            let params = match (&a.scenario, &a.params) {
                (Some(path), _) => params_from_scenario(path)?,
                (None, Some(spec)) => parse_params(spec)?,
                (None, None) => unreachable!("clap enforces one source"),
            };
            let grid = BodeGrid {
                f_min_hz: a.f_min,
                f_max_hz: a.f_max,
                points: a.points,
            };
            let out = cmd_stability(params, a.bode.as_deref().map(|p| (p, grid)))?;
            print_json(&out);
            Ok(0)
        }
        Cmd::Sweep {
            file,
            param,
            values,
            out,
        } => {
            let values = parse_values(&values)?;
            let r = cmd_sweep(&file, &param, &values, &out)?;
            print_json(&r);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
