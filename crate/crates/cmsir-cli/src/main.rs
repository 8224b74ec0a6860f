//! `cmsir` — SIR epidemics on configuration-model random graphs.
//!
//! Exit codes: 0 success, 2 validation failure, 3 solver failure,
//! 4 threshold failure (`verify`/`converge`), 1 other errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cmsir::config::{parse_config, Config};
use cmsir::error::Error;
use cmsir::limit::{self, Mode};
use cmsir::model::{basic_reproductive_ratio, validate_population, ValidationOptions};
use cmsir::report;
use cmsir::simulate::{detect_t_star, run_epidemic};
use cmsir::volterra::verify_equivalences;

#[derive(Parser)]
#[command(name = "cmsir", version, about = "SIR epidemics on configuration-model random graphs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's replica count (converge).
    #[arg(long)]
    replicas: Option<usize>,
    /// Override the config's population sizes (converge), e.g. 1000,10000.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the population against the model assumptions.
    Validate(CommonArgs),
    /// Run one epidemic; write trajectory.csv and summary.json.
    Simulate(CommonArgs),
    /// Solve the deterministic limit; write limit.csv and limit.json.
    Limit(CommonArgs),
    /// Cross-verify the integral representations; write verify.json.
    Verify(CommonArgs),
    /// Monte Carlo convergence study; write ensemble.json and replicas.csv.
    Converge(CommonArgs),
    /// Print the basic reproductive ratio and the final-size root.
    R0(CommonArgs),
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Validation(_)
        | Error::NotADistribution(_)
        | Error::NoSusceptibles
        | Error::UnreachableThreshold { .. }
        | Error::ThresholdOutsideRange { .. }
        | Error::DegenerateConfig(_) => 2,
        Error::SolverStalled(_)
        | Error::PicardDiverged { .. }
        | Error::NoMajorOutbreak
        | Error::DegenerateProfile
        | Error::InvalidProfile(_)
        | Error::InfectivePressureAtZero
        | Error::NoAlignmentPoint
        | Error::NoOutbreaksObserved => 3,
        Error::Io(_) => 1,
    }
}

fn load(args: &CommonArgs) -> cmsir::Result<Config> {
    let mut cfg = parse_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(replicas) = args.replicas {
        cfg.replicas = replicas;
    }
    if let Some(sizes) = &args.sizes {
        cfg.sizes = sizes.clone();
    }
    if cfg.threads.is_none() {
        if let Ok(v) = std::env::var("CMSIR_THREADS") {
            cfg.threads = v.parse::<usize>().ok();
        }
    }
    Ok(cfg)
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> cmsir::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn cmd_validate(args: &CommonArgs) -> cmsir::Result<u8> {
    let cfg = load(args)?;
    let pop = cfg.population()?;
    let report = validate_population(&pop, &cfg.rates, &ValidationOptions::default());
    print!("{}", report::to_json_pretty(&report)?);
    Ok(if report.ok { 0 } else { 2 })
}

fn cmd_simulate(args: &CommonArgs) -> cmsir::Result<u8> {
    let cfg = load(args)?;
    let pop = cfg.population()?;
    let outcome = run_epidemic(&pop, &cfg.rates, cfg.seed, &cfg.run_opts())?;
    let t_star = match cfg.s0 {
        Some(s0) => detect_t_star(&outcome.trajectory, s0)?,
        None => None,
    };
    let mut csv = Vec::new();
    report::write_trajectory_csv(&mut csv, &outcome.trajectory)?;
    write_file(&args.out, "trajectory.csv", &csv)?;
    let summary = report::SimSummary::new(&outcome, t_star);
    write_file(
        &args.out,
        "summary.json",
        report::to_json_pretty(&summary)?.as_bytes(),
    )?;
    println!(
        "wrote {} and {}",
        args.out.join("trajectory.csv").display(),
        args.out.join("summary.json").display()
    );
    Ok(0)
}

/// In the small-seed regime an unspecified threshold defaults to just below
/// the initial susceptible fraction.
fn default_s0(alpha_s: f64) -> f64 {
    0.99 * alpha_s
}

fn solve_limit(cfg: &Config) -> cmsir::Result<(limit::ThetaPath<f64>, limit::VPaths<f64>, Mode)> {
    let profile = cfg.limit_profile()?;
    let mode = if profile.mu_i > 0.0 {
        Mode::Major
    } else {
        Mode::Shifted
    };
    let s0 = match mode {
        Mode::Major => cfg.s0,
        Mode::Shifted => Some(cfg.s0.unwrap_or_else(|| default_s0(profile.alpha_s))),
    };
    let path = limit::solve_theta(&profile, &cfg.rates, mode, s0, &cfg.controls)?;
    let v = limit::solve_v_paths(&path, &profile, &cfg.rates, &cfg.controls)?;
    Ok((path, v, mode))
}

fn cmd_limit(args: &CommonArgs) -> cmsir::Result<u8> {
    let cfg = load(args)?;
    let profile = cfg.limit_profile()?;
    let (path, v, mode) = solve_limit(&cfg)?;
    let lf = limit::LimitFunctions::new(&profile, &cfg.rates)?;
    let mut csv = Vec::new();
    report::write_limit_csv(&mut csv, &path, &v, &lf)?;
    write_file(&args.out, "limit.csv", &csv)?;
    let summary = report::LimitSummary {
        theta_inf: path.theta_inf,
        final_size: lf.v_s(path.theta_inf),
        r0: basic_reproductive_ratio(&profile, &cfg.rates)?,
        mode,
        s0: path.s0,
    };
    write_file(
        &args.out,
        "limit.json",
        report::to_json_pretty(&summary)?.as_bytes(),
    )?;
    println!(
        "wrote {} and {}",
        args.out.join("limit.csv").display(),
        args.out.join("limit.json").display()
    );
    Ok(0)
}

fn cmd_verify(args: &CommonArgs) -> cmsir::Result<u8> {
    let cfg = load(args)?;
    let profile = cfg.limit_profile()?;
    let report = verify_equivalences(
        &profile,
        &cfg.rates,
        cfg.t_max,
        cfg.verify_tol,
        cfg.tol,
        cfg.max_iter,
        &cfg.controls,
    )?;
    write_file(
        &args.out,
        "verify.json",
        report::to_json_pretty(&report)?.as_bytes(),
    )?;
    println!(
        "wrote {} (max residual {}, tol {})",
        args.out.join("verify.json").display(),
        report.max_residual(),
        report.tol
    );
    Ok(if report.pass { 0 } else { 4 })
}

fn cmd_converge(args: &CommonArgs) -> cmsir::Result<u8> {
    let cfg = load(args)?;
    let mut ensemble_cfg = cfg.ensemble()?;
    if ensemble_cfg.s0.is_none() {
        let profile = cfg.limit_profile()?;
        if profile.mu_i == 0.0 {
            ensemble_cfg.s0 = Some(default_s0(profile.alpha_s));
        }
    }
    let report = cmsir::ensemble::run_ensemble(&ensemble_cfg)?;
    let (json, csv) = report::ensemble_artifacts(&report)?;
    write_file(&args.out, "ensemble.json", json.as_bytes())?;
    write_file(&args.out, "replicas.csv", csv.as_bytes())?;
    for check in &report.checks {
        println!(
            "{} {} ({})",
            if check.pass { "pass" } else { "FAIL" },
            check.name,
            check.detail
        );
    }
    Ok(if report.pass { 0 } else { 4 })
}

fn cmd_r0(args: &CommonArgs) -> cmsir::Result<u8> {
    let cfg = load(args)?;
    let profile = cfg.limit_profile()?;
    let r0 = basic_reproductive_ratio(&profile, &cfg.rates)?;
    println!("R0={r0}");
    match limit::find_theta_infinity(&profile, &cfg.rates) {
        Ok(theta_inf) => println!("theta_inf={theta_inf}"),
        Err(Error::NoMajorOutbreak) => {}
        Err(e) => return Err(e),
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Validate(a) => cmd_validate(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Limit(a) => cmd_limit(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Converge(a) => cmd_converge(a),
        Cmd::R0(a) => cmd_r0(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
