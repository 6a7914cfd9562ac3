//! Command-line front end of `nlslab`: configuration ingestion, subcommand
//! dispatch, atomic output writing and exit codes.
//!
//! Exit codes: `0` success or PASS, `1` numerical failure, `2` experiment
//! FAIL, `3` inconclusive experiment, `64` configuration error.

pub mod config;
mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use nlslab::dynamics::{classify, conservation_check, evolve, virial_check};
use nlslab::experiment::{run_instability, run_stability_contrast, ExperimentRun, Outcome, SweepReport};
use nlslab::field::{field_to_csv, GridMetadata};
use nlslab::groundstate::compute;
use nlslab::nonlinearity::check_admissibility;
use nlslab::rescale::scan;
use nlslab::variational::variational_report;
use nlslab::{Error, Grid};
use serde_json::json;

use config::{ConfigError, LabConfig};
use output::Output;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERIC: i32 = 1;
pub const EXIT_CONFIG: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "nlslab", version, about = "Standing-wave instability lab for focusing NLS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config; defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for reports and CSV files.
    #[arg(long, global = true, env = "NLSLAB_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// `dotted.key=value`, applied after the config file. Repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Compute and certify the ground state.
    Groundstate,
    /// Scan S, Q and I along the dilation of a seed profile.
    ScanLambda,
    /// Estimate the Nehari, Pohozaev-manifold and mountain-pass levels.
    Variational,
    /// Evolve an initial profile.
    Evolve,
    /// Run the instability experiment from a dilated ground state.
    Instability,
    /// Run the subcritical stability contrast.
    StabilityContrast,
    /// Check the growth assumptions on the nonlinearity.
    Admissibility,
}

enum Failure {
    Config(String),
    Numeric(Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Configuration(msg) => Failure::Config(msg),
            other => Failure::Numeric(other),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numeric(Error::Numeric(format!("output: {e}")))
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn parse_and_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(Failure::Config(msg)) => {
            eprintln!("nlslab: configuration error: {msg}");
            EXIT_CONFIG
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("nlslab: {e}");
            EXIT_NUMERIC
        }
    }
}

fn run(cli: &Cli) -> Result<i32, Failure> {
    let config = LabConfig::load(cli.config.as_deref(), &cli.overrides)?;
    let dir = cli
        .output_dir
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("nlslab-out"));
    let out = Output::new(dir)?;
    let model = config.model()?;
    match cli.command {
        Command::Admissibility => {
            let report = check_admissibility(&model, config.sample_range, Some(config.omega));
            out.json("admissibility.json", &report)?;
            println!("supercritical: {}, borderline: {}", report.supercritical, report.borderline);
            Ok(EXIT_OK)
        }
        Command::Groundstate => {
            let grid = Grid::new(config.grid)?;
            let gs = compute(&model, config.omega, &grid, config.petviashvili)?;
            out.text("ground_state.csv", &field_to_csv(&gs.field))?;
            out.json("ground_state.json", &json!({ "summary": gs.summary(), "grid": GridMetadata::of(&grid) }))?;
            println!("m = {:.15e} ({:?}, residual {:.2e})", gs.level_m, gs.method, gs.residual_rel);
            Ok(EXIT_OK)
        }
        Command::ScanLambda => {
            let grid = Grid::new(config.grid)?;
            let gs = compute(&model, config.omega, &grid, config.petviashvili).ok();
            let seed = config.scan_seed.build(&grid, gs.as_ref().map(|g| &g.field))?;
            let s = scan(&seed, &model, config.omega, config.lambda_range)?;
            out.text("scan.csv", &s.to_csv())?;
            out.json("scan.json", &s.summary())?;
            println!("lambda0 = {:?}, lambda1 = {:?}", s.lambda0, s.lambda1);
            Ok(EXIT_OK)
        }
        Command::Variational => {
            let grid = Grid::new(config.grid)?;
            let gs = compute(&model, config.omega, &grid, config.petviashvili)?;
            let r = variational_report(&config.family, &gs.field, gs.level_m, &model, config.omega)?;
            out.text("members.csv", &r.members_csv())?;
            out.json("variational.json", &r)?;
            println!("m = {:.12e}, d_omega = {:.12e}, d_M = {:.12e}, c = {:.12e}", r.m_ref, r.d_omega_est, r.d_m_est, r.c_est);
            Ok(EXIT_OK)
        }
        Command::Evolve => {
            let grid = Grid::new(config.grid)?;
            let gs = compute(&model, config.omega, &grid, config.petviashvili).ok();
            let u0 = config.evolve.initial.build(&grid, gs.as_ref().map(|g| &g.field))?;
            let controls = config.evolve.controls;
            let record = evolve(&u0, &model, config.omega, &controls)?;
            let m = gs.as_ref().map(|g| g.level_m);
            let delta = m.map(|m| m - record.initial().report.action).filter(|d| *d > 0.0);
            let verdict = classify(&record, &controls, delta);
            let (mass_drift, action_drift) = conservation_check(&record);
            out.text("trajectory.csv", &record.to_csv(m))?;
            out.json(
                "evolve.json",
                &json!({
                    "verdict": verdict,
                    "termination": record.termination,
                    "final_time": record.final_time,
                    "steps": record.step_sizes.len(),
                    "rejected_steps": record.rejected_steps,
                    "mass_drift": mass_drift,
                    "action_drift": action_drift,
                    "virial_error": virial_check(&record).ok(),
                }),
            )?;
            println!("{:?} at t = {} ({:?})", verdict.status, record.final_time, record.termination);
            Ok(EXIT_OK)
        }
        Command::Instability => {
            let base = config.experiment(&config.instability);
            if config.instability.sweep.is_empty() {
                let run = run_instability(&base)?;
                write_run(&out, &run, "")?;
                Ok(announce(&run))
            } else {
                let mut lambdas = config.instability.sweep.clone();
                lambdas.push(base.lambda);
                lambdas.sort_by(f64::total_cmp);
                lambdas.dedup();
                let (sweep, runs) = nlslab::experiment::run_sweep(&base, &lambdas)?;
                for run in &runs {
                    write_run(&out, run, &format!("_lambda{}", run.report.lambda))?;
                }
                out.json("sweep.json", &sweep)?;
                Ok(sweep_code(&sweep))
            }
        }
        Command::StabilityContrast => {
            let run = run_stability_contrast(&config.experiment(&config.stability_contrast))?;
            write_run(&out, &run, "")?;
            Ok(announce(&run))
        }
    }
}

fn write_run(out: &Output, run: &ExperimentRun, suffix: &str) -> Result<(), Failure> {
    out.text(&format!("trajectory{suffix}.csv"), &run.trajectory_csv())?;
    if let Some(csv) = &run.variational_members_csv {
        out.text(&format!("members{suffix}.csv"), csv)?;
    }
    out.json(&format!("report{suffix}.json"), &run.report)?;
    Ok(())
}

fn announce(run: &ExperimentRun) -> i32 {
    let r = &run.report;
    let label = match r.outcome {
        Outcome::Pass => "PASS",
        Outcome::Fail => "FAIL",
        Outcome::Inconclusive => "INCONCLUSIVE",
    };
    println!("{label}: {:?}, gradient ratio {:.1}, delta {:?}", r.verdict.status, r.verdict.grad_ratio, r.delta);
    r.outcome.exit_code()
}

fn sweep_code(sweep: &SweepReport) -> i32 {
    let monotone = sweep.delta_increasing && sweep.t_estimate_decreasing;
    for e in &sweep.entries {
        println!("lambda {}: delta {:?}, T {:?}, {:?}", e.lambda, e.delta, e.t_estimate, e.outcome);
    }
    if sweep.entries.iter().any(|e| e.outcome == Outcome::Fail) || !monotone {
        Outcome::Fail.exit_code()
    } else if sweep.entries.iter().all(|e| e.outcome == Outcome::Pass) {
        Outcome::Pass.exit_code()
    } else {
        Outcome::Inconclusive.exit_code()
    }
}
