//! The `bo-lab` command line.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 numerical failure
//! (divergence, instability, or a failed check). Environment: `BO_LAB_OUT`
//! sets the output root, `BO_LAB_THREADS` the worker count.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use super::fieldfile::{read_field, write_field, FieldData};
use super::manifest::{read_manifest, stale_artifacts, RunDir};
use super::svg::{line_plot, Series};
use super::verify::{run_suite, Suite};
use crate::banded::Quadrature;
use crate::checks::Check;
use crate::counterexamples::{prop51_sweep, prop52_sweep, CounterexampleReport};
use crate::error::{LabError, Result};
use crate::families::{suite_member, TestFamily};
use crate::norms::{
    b0_norm_with, fsigma_norm_with, hsigma_tilde_norm_with, nsigma_norm_with, xk_norm, yk_norm,
    zk_norm_with, NormReport, SplitEffort, SplitOptions,
};
use crate::solver::{
    contraction_monitor, final_time_distance, oracle_order, picard_solve, reference_solve,
    snapshot_csv, ContractionVerdict, IterationTrace, SolverConfig,
};
use crate::spectral::SpectralField;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "bo-lab",
    version,
    about = "Pseudo-spectral lab for the complex Benjamin-Ono equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Picard solve from a configuration and data; writes a run directory.
    Solve(SolveArgs),
    /// Evaluates one norm of a field file.
    Norms(NormsArgs),
    /// Runs a seeded property suite.
    Verify(VerifyArgs),
    /// Sweeps one of the two counterexample constructions over k.
    Counterexample(CounterexampleArgs),
    /// Summarizes a run directory and checks its artifacts against the manifest.
    Report(ReportArgs),
}

#[derive(clap::Args, Debug)]
struct SolveArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Standard datum name, `zero`, or a field file.
    #[arg(long)]
    data: Option<String>,
    /// Regularity of the reported `sup_t ||u(t)||` norm.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long = "epsilon-bar")]
    epsilon_bar: Option<f64>,
    /// Time step; must divide T.
    #[arg(long)]
    dt: Option<f64>,
    /// Also run the Runge-Kutta reference solver and its order study.
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum NormName {
    B0,
    Hsigma,
    X,
    Y,
    Z,
    /// `Z_0`, the same as `z --k 0`.
    Z0,
    F,
    N,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Effort {
    Baselines,
    Optimize,
}

#[derive(clap::Args, Debug, Serialize)]
struct NormsArgs {
    /// Field file.
    input: PathBuf,
    #[arg(long, value_enum)]
    norm: NormName,
    #[arg(long, default_value_t = 0)]
    k: i32,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, value_enum, default_value_t = Effort::Optimize)]
    effort: Effort,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug, Serialize)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: Suite,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
enum Which {
    #[value(name = "51")]
    #[serde(rename = "51")]
    LogLoss,
    #[value(name = "52")]
    #[serde(rename = "52")]
    Sharpness,
}

#[derive(clap::Args, Debug, Serialize)]
struct CounterexampleArgs {
    #[arg(long, value_enum)]
    which: Which,
    /// Inclusive range `a:b`.
    #[arg(long = "k-range")]
    k_range: String,
    #[arg(long, default_value_t = 2)]
    step: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct ReportArgs {
    /// Run directory containing `manifest.json`.
    run: PathBuf,
}

/// Data source of a solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    /// A member of the standard suite scaled to `target` in the `H~^0` proxy.
    Suite {
        name: String,
        target: f64,
    },
    /// A generator, optionally rescaled to `target`.
    Family {
        family: TestFamily,
        target: Option<f64>,
    },
    /// A line field file on the solver grid.
    File {
        path: PathBuf,
    },
    Zero,
}

/// Configuration document of `solve`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub solver: SolverConfig,
    pub data: DataSpec,
    pub sigma: f64,
    pub oracle: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            data: DataSpec::Suite {
                name: "gaussian".into(),
                target: 0.04,
            },
            sigma: 0.0,
            oracle: false,
        }
    }
}

/// Parses a configuration document; errors carry the line and column.
pub fn parse_solve_config(text: &str, origin: &str) -> Result<SolveConfig> {
    let config: SolveConfig =
        serde_json::from_str(text).map_err(|e| LabError::Config(format!("{origin}: {e}")))?;
    config.solver.validate()?;
    Ok(config)
}

fn resolve_data(spec: &DataSpec, solver: &SolverConfig) -> Result<SpectralField> {
    let grid = solver.frequency_grid()?;
    match spec {
        DataSpec::Suite { name, target } => suite_member(grid, *target, name),
        DataSpec::Family { family, target } => {
            let f = family.generate(grid)?;
            match target {
                Some(t) => crate::families::normalize_h0(&f, *t),
                None => Ok(f),
            }
        }
        DataSpec::File { path } => match read_field(path)? {
            FieldData::Line(f) => Ok(f),
            FieldData::SpaceTime(_) => Err(LabError::Config(format!(
                "{} holds a space-time field; initial data must be a line field",
                path.display()
            ))),
        },
        DataSpec::Zero => Ok(SpectralField::zeros(grid)),
    }
}

/// Entry point: parses `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    let outcome = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Norms(a) => norms(a),
        Command::Verify(a) => verify(a),
        Command::Counterexample(a) => counterexample(a),
        Command::Report(a) => report(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<()> {
    let Some(raw) = std::env::var_os("BO_LAB_THREADS") else {
        return Ok(());
    };
    let text = raw.to_string_lossy();
    let n: usize = text.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        LabError::Config(format!(
            "BO_LAB_THREADS must be a positive integer, got '{text}'"
        ))
    })?;
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn pretty(v: &impl Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn decay_plot(trace: &IterationTrace) -> String {
    let pts = trace
        .records
        .iter()
        .map(|r| (r.n as f64, r.diff_f0))
        .collect();
    line_plot(
        "Picard iterate differences",
        "n",
        "d_n (F^0 proxy)",
        &[Series::new("d_n", pts)],
        true,
    )
}

fn solve(a: SolveArgs) -> Result<i32> {
    let mut config = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| LabError::Config(format!("cannot read {}: {e}", p.display())))?;
            parse_solve_config(&text, &p.display().to_string())?
        }
        None => SolveConfig::default(),
    };
    if let Some(d) = &a.data {
        config.data = if d == "zero" {
            DataSpec::Zero
        } else if Path::new(d).exists() {
            DataSpec::File { path: d.into() }
        } else {
            DataSpec::Suite {
                name: d.clone(),
                target: 0.04,
            }
        };
    }
    if let Some(s) = a.sigma {
        config.sigma = s;
    }
    if let Some(e) = a.epsilon_bar {
        config.solver.epsilon_bar = e;
    }
    if let Some(dt) = a.dt {
        config.solver = config.solver.with_dt(dt)?;
    }
    config.oracle |= a.oracle;
    config.solver.validate()?;
    if !(config.sigma >= 0.0) {
        return Err(LabError::Config(format!(
            "sigma must be >= 0, got {}",
            config.sigma
        )));
    }
    let phi = resolve_data(&config.data, &config.solver)?;
    let mut run = RunDir::create("solve", &config, a.out.as_deref())?;
    run.write("config.json", pretty(&config)?)?;
    write_field(
        &run.path().join("data.bofield"),
        &FieldData::Line(phi.clone()),
        "solve input",
    )?;
    let (u, trace) = match picard_solve(&phi, &config.solver) {
        Ok(r) => r,
        Err(LabError::Divergence { trace }) => {
            run.write("trace.csv", trace.to_csv())?;
            run.write("trace.json", pretty(&*trace)?)?;
            run.write("decay.svg", decay_plot(&trace))?;
            let dir = run.path().display().to_string();
            run.finish()?;
            eprintln!(
                "error: Picard iteration diverged after {} iterations; trace in {dir}",
                trace.iterations()
            );
            return Ok(EXIT_NUMERICAL);
        }
        Err(e) => return Err(e),
    };
    let verdict = match contraction_monitor(&trace) {
        Ok(v) => v,
        // Converged before the fit window: nothing to contract.
        Err(LabError::InsufficientData(_)) if trace.converged => ContractionVerdict {
            fitted_ratio: 0.0,
            monotone: true,
            pass: true,
        },
        Err(e) => return Err(e),
    };
    let opts = SplitOptions::baselines();
    let mut sup_hsigma: f64 = 0.0;
    for it in 0..u.nt() {
        sup_hsigma =
            sup_hsigma.max(hsigma_tilde_norm_with(&u.time_slice(it)?, config.sigma, &opts)?.value);
    }
    run.write("trace.csv", trace.to_csv())?;
    run.write("trace.json", pretty(&trace)?)?;
    run.write("snapshots.csv", snapshot_csv(&u.in_physical())?)?;
    let solution = run.path().join("solution.bofield");
    write_field(
        &solution,
        &FieldData::SpaceTime(u.clone()),
        "picard solution",
    )?;
    run.write("decay.svg", decay_plot(&trace))?;
    if let Some(m) = &trace.m_curve {
        let raw = m.t.iter().copied().zip(m.raw.iter().copied()).collect();
        let env =
            m.t.iter()
                .copied()
                .zip(m.envelope.iter().copied())
                .collect();
        let plot = line_plot(
            "M(T)",
            "T",
            "M",
            &[Series::new("raw", raw), Series::new("envelope", env)],
            false,
        );
        run.write("m_curve.svg", plot)?;
    }
    let mut checks = vec![
        Check::at_least("converged", f64::from(u8::from(trace.converged)), 1.0),
        Check::at_least(
            "data below epsilon_bar",
            f64::from(u8::from(trace.admissible)),
            1.0,
        ),
        Check::at_least(
            "contraction monitor",
            f64::from(u8::from(verdict.pass)),
            1.0,
        ),
    ];
    if let Some(r) = &trace.residual {
        checks.push(Check::at_most(
            "fixed-point defect",
            r.fixed_point_defect,
            1e-7,
        ));
    }
    if let Some(c) = &trace.conservation {
        checks.push(Check::at_most("mass drift", c.mass_drift, 1e-8));
        if let Some(l2) = c.l2_drift {
            checks.push(Check::at_most("L2 drift", l2, 1e-6));
        }
    }
    let mut oracle = serde_json::Value::Null;
    if config.oracle {
        let reference = reference_solve(&phi, &config.solver)?;
        let distance = final_time_distance(&u, &reference)?;
        let order = oracle_order(&phi, &config.solver)?;
        checks.push(Check::at_most(
            "relative distance to the reference solver at t = T",
            distance,
            1e-6,
        ));
        oracle = serde_json::json!({ "final_time_distance": distance, "order": order });
    }
    let summary = serde_json::json!({
        "iterations": trace.iterations(),
        "converged": trace.converged,
        "data_h0": trace.data_h0,
        "admissible": trace.admissible,
        "contraction": verdict,
        "residual": trace.residual,
        "conservation": trace.conservation,
        "dichotomy": trace.dichotomy,
        "sigma": config.sigma,
        "sup_hsigma": sup_hsigma,
        "oracle": oracle,
        "checks": checks,
    });
    run.write("residual.json", pretty(&summary)?)?;
    let mut text = String::new();
    for c in &checks {
        let _ = writeln!(text, "{c}");
    }
    run.write("checks.txt", &text)?;
    let dir = run.path().display().to_string();
    run.finish()?;
    print!("{text}");
    println!("run directory: {dir}");
    Ok(if checks.iter().all(|c| c.pass) {
        EXIT_OK
    } else {
        EXIT_NUMERICAL
    })
}

fn norms(a: NormsArgs) -> Result<i32> {
    let field = read_field(&a.input)?;
    let opts = match a.effort {
        Effort::Baselines => SplitOptions::baselines(),
        Effort::Optimize => SplitOptions {
            effort: SplitEffort::Optimize,
            ..SplitOptions::default()
        },
    };
    let line = |f: &FieldData| match f {
        FieldData::Line(s) => Ok(s.clone()),
        FieldData::SpaceTime(_) => Err(LabError::Config(
            format!("--norm {:?} needs a line field", a.norm).to_lowercase(),
        )),
    };
    let space_time = |f: &FieldData| match f {
        FieldData::SpaceTime(u) => Ok(u.in_frequency()),
        FieldData::Line(_) => Err(LabError::Config(
            format!("--norm {:?} needs a space-time field", a.norm).to_lowercase(),
        )),
    };
    let report: NormReport = match a.norm {
        NormName::B0 => b0_norm_with(&line(&field)?, &opts)?.0,
        NormName::Hsigma => hsigma_tilde_norm_with(&line(&field)?, a.sigma, &opts)?,
        NormName::X => xk_norm(&space_time(&field)?, a.k)?,
        NormName::Y => yk_norm(&space_time(&field)?, a.k)?,
        NormName::Z => zk_norm_with(&space_time(&field)?, a.k, &opts)?.0,
        NormName::Z0 => zk_norm_with(&space_time(&field)?, 0, &opts)?.0,
        NormName::F => fsigma_norm_with(&space_time(&field)?, a.sigma, &opts)?,
        NormName::N => nsigma_norm_with(&space_time(&field)?, a.sigma, &opts)?,
    };
    let mut run = RunDir::create("norms", &a, a.out.as_deref())?;
    run.write("norm.json", report.to_json())?;
    run.write("breakdown.csv", report.to_csv())?;
    run.finish()?;
    println!("{} {:.16e}", report.name, report.value);
    Ok(EXIT_OK)
}

fn verify(a: VerifyArgs) -> Result<i32> {
    let report = run_suite(a.suite, a.seed)?;
    let text = report.to_text();
    let mut run = RunDir::create("verify", &a, a.out.as_deref())?;
    run.write("verify.txt", &text)?;
    run.write("verify.json", pretty(&report)?)?;
    run.finish()?;
    print!("{text}");
    Ok(if report.pass() {
        EXIT_OK
    } else {
        EXIT_NUMERICAL
    })
}

/// Parses `a:b` into `a, a + step, ..., <= b`.
pub fn parse_k_range(text: &str, step: usize) -> Result<Vec<i32>> {
    let bad = || {
        LabError::Config(format!(
            "--k-range expects a:b with integers a <= b, got '{text}'"
        ))
    };
    let (a, b) = text.split_once(':').ok_or_else(bad)?;
    let (a, b): (i32, i32) = (
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    );
    if a > b {
        return Err(LabError::Config(format!("--k-range {text} is empty")));
    }
    if step == 0 {
        return Err(LabError::Config("--step must be positive".into()));
    }
    Ok((a..=b).step_by(step).collect())
}

fn ratio_plot(report: &CounterexampleReport) -> String {
    let pts = report
        .rows
        .iter()
        .map(|r| (f64::from(r.k), r.ratio))
        .collect();
    line_plot(
        &format!("construction {}: ratio against k", report.which),
        "k",
        "ratio",
        &[Series::new("ratio", pts)],
        true,
    )
}

fn counterexample(a: CounterexampleArgs) -> Result<i32> {
    let ks = parse_k_range(&a.k_range, a.step)?;
    let q = Quadrature::default();
    let report = match a.which {
        Which::LogLoss => prop51_sweep(&ks, &q)?,
        Which::Sharpness => prop52_sweep(&ks, a.sigma, &q)?,
    };
    let mut run = RunDir::create("counterexample", &a, a.out.as_deref())?;
    run.write("report.json", report.to_json())?;
    run.write("ratios.csv", report.to_csv())?;
    run.write("ratio.svg", ratio_plot(&report))?;
    let dir = run.path().display().to_string();
    run.finish()?;
    print!("{}", report.to_csv());
    for c in &report.checks {
        println!("{c}");
    }
    println!("run directory: {dir}");
    Ok(if report.pass { EXIT_OK } else { EXIT_NUMERICAL })
}

fn report(a: ReportArgs) -> Result<i32> {
    let manifest = read_manifest(&a.run)?;
    let stale = stale_artifacts(&a.run, &manifest);
    println!(
        "run {} ({}), version {}",
        manifest.run_id, manifest.subcommand, manifest.version
    );
    println!("config sha256 {}", manifest.config_sha256);
    println!("duration {:.3} s", manifest.duration_seconds);
    for art in &manifest.artifacts {
        let mark = if stale.contains(&art.name) {
            "MODIFIED"
        } else {
            "ok"
        };
        println!("  {:<16} {} {mark}", art.name, &art.sha256[..16]);
    }
    let read = |name: &str| fs::read_to_string(a.run.join(name)).unwrap_or_default();
    match manifest.subcommand.as_str() {
        "solve" => print!("{}", read("checks.txt")),
        "verify" => print!("{}", read("verify.txt")),
        "norms" => {
            let r: NormReport = serde_json::from_str(&read("norm.json"))?;
            println!("{} {:.16e}", r.name, r.value);
        }
        "counterexample" => {
            let r: CounterexampleReport = serde_json::from_str(&read("report.json"))?;
            for c in &r.checks {
                println!("{c}");
            }
        }
        _ => {}
    }
    if !stale.is_empty() {
        return Err(LabError::Config(format!(
            "artifacts differ from the manifest: {}",
            stale.join(", ")
        )));
    }
    Ok(EXIT_OK)
}
