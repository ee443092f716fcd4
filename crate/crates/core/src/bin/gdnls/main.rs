//! Command-line front end: soliton, critical, evolve, sweep and check.

mod config;
mod output;

use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use gdnls::checks::{all_pass, coercivity_check, critical_checks, full_suite, operator_checks, soliton_checks, spectrum_checks, Check};
use gdnls::conserved::conserved_set;
use gdnls::critical::{critical_constants, CriticalData};
use gdnls::evolve::EvolveConfig;
use gdnls::experiment::{perturbed_run, RunReport, RunSpec, Status};
use gdnls::numerics::Grid;
use gdnls::soliton::soliton_field;
use gdnls::virial::VirialRecord;
use gdnls::Error;

use config::{RawConfig, Resolved};
use output::{Manifest, Sink};

#[derive(Parser)]
#[command(name = "gdnls", version, about = "Solitary waves of i u_t + u_xx + i |u|^{2 sigma} u_x = 0")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Profile samples, conserved quantities and the identity checks
    Soliton(RawConfig),
    /// Threshold z0, null direction, kappa0, b1, b2, spectrum and coercivity
    Critical(RawConfig),
    /// Perturbed run with orbit, modulation and virial series
    Evolve(RawConfig),
    /// Evolve at the critical speed for each amplitude in --delta1-list
    Sweep(RawConfig),
    /// Full identity suite at the configured point
    Check(RawConfig),
}

/// Exit code and message; 0 success, 2 configuration, 3 failed check, 4 solver abort.
struct Fail(u8, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Fail {
        let code = match e {
            Error::Config(_) | Error::DomainViolation(_) | Error::InvalidGrid(_) | Error::CutoffTooLarge { .. } | Error::StepTooLarge { .. } | Error::TruncationTooSmall(_) => 2,
            Error::Kappa0Mismatch { .. } | Error::SymmetryViolation { .. } | Error::NotDegenerate { .. } => 3,
            _ => 4,
        };
        Fail(code, e.to_string())
    }
}

type Run = std::result::Result<(), Fail>;

const CHECK_COLUMNS: [&str; 4] = ["name", "value", "tol", "pass"];

fn manifest(sink: &mut Sink, command: &str, cfg: &impl Serialize, status: &str, notes: &[String]) -> Result<(), Error> {
    let mut files = sink.files.clone();
    files.push("manifest.json".into());
    let m = Manifest { tool: "gdnls", version: output::version(), schema: output::SCHEMA, command, config: cfg, files: &files, status, notes };
    sink.document("manifest", &m)
}

fn print_checks(checks: &[Check]) {
    for c in checks {
        println!("{:<4} {:<48} {:>12.4e} (bound {:.1e})", if c.pass { "ok" } else { "FAIL" }, c.name, c.value, c.tol);
    }
}

/// Notes for σ outside the window where the threshold machinery applies.
fn regime_note(sigma: f64) -> Option<String> {
    if sigma <= 1.0 {
        Some("stable for all |c| < 2 sqrt(omega) when sigma <= 1; critical machinery skipped".into())
    } else if sigma >= 2.0 {
        Some("unstable regime sigma >= 2; z0 undefined; critical machinery skipped".into())
    } else {
        None
    }
}

#[derive(Serialize)]
struct ProfileRow {
    x: f64,
    re: f64,
    im: f64,
    abs: f64,
}

fn cmd_soliton(raw: &RawConfig) -> Run {
    let cfg = Resolved::from_raw(raw)?;
    let p = cfg.params();
    let grid = cfg.grid()?;
    let phi = soliton_field(&p, &grid)?;
    let mut sink = Sink::new(&cfg.output_dir, cfg.format)?;
    let rows: Vec<ProfileRow> = phi.values().iter().enumerate().map(|(j, z)| ProfileRow { x: grid.x(j), re: z.re, im: z.im, abs: z.norm() }).collect();
    sink.table("profile", &["x", "re", "im", "abs"], &rows)?;
    let q = conserved_set(&phi, p.sigma)?;
    sink.table("conserved", &["m", "p", "e", "j"], &[q])?;
    let checks = soliton_checks(&p, &grid)?;
    sink.table("checks", &CHECK_COLUMNS, &checks)?;
    print_checks(&checks);
    let ok = all_pass(&checks);
    let notes: Vec<String> = regime_note(p.sigma).into_iter().collect();
    manifest(&mut sink, "soliton", &cfg, if ok { "pass" } else { "fail" }, &notes)?;
    if ok {
        Ok(())
    } else {
        Err(Fail(3, "identity check failed".into()))
    }
}

fn spectral_checks(d: &CriticalData, n: usize) -> Result<Vec<Check>, Error> {
    let p = d.params();
    // dense eigenproblems are sized 2N; cap N for desk runtimes
    let grid = p.auto_grid(n.min(1024))?;
    let mut out = spectrum_checks(&p, &grid)?;
    out.push(coercivity_check(d, &grid)?);
    Ok(out)
}

fn cmd_critical(raw: &RawConfig) -> Run {
    let (sigma, omega) = Resolved::sigma_omega(raw);
    let out_dir = raw.output_dir.clone().unwrap_or_else(|| "gdnls-out".into());
    let format = raw.format.unwrap_or(config::Format::Csv);
    if let Some(note) = regime_note(sigma) {
        println!("note: {note}");
        let mut sink = Sink::new(&out_dir, format)?;
        let cfg = serde_json::json!({ "sigma": sigma, "omega": omega });
        manifest(&mut sink, "critical", &cfg, "skipped", &[note])?;
        return Ok(());
    }
    let d = critical_constants(sigma, omega)?;
    let raw = RawConfig { c: Some(config::Value::Word("critical".into())), ..raw.clone() };
    let cfg = Resolved::from_raw(&raw)?;
    let mut sink = Sink::new(&cfg.output_dir, cfg.format)?;
    sink.table(
        "critical",
        &["sigma", "omega", "z0", "c_crit", "a0", "mu", "nu", "kappa0", "kappa0_from_m", "kappa0_from_p", "b1", "b2", "m", "p", "det"],
        &[d],
    )?;
    let mut checks = critical_checks(&d)?;
    checks.extend(operator_checks(&d.params(), &cfg.grid()?, Some(&d))?);
    checks.extend(spectral_checks(&d, cfg.n)?);
    sink.table("checks", &CHECK_COLUMNS, &checks)?;
    println!("z0 = {:.15}  c = {:.12}  mu/nu = {:.12}  kappa0 = {:.10}  b1 = {:.10}  b2 = {:.10}", d.z0, d.c_crit, d.mu / d.nu, d.kappa0, d.b1, d.b2);
    print_checks(&checks);
    let ok = all_pass(&checks);
    manifest(&mut sink, "critical", &cfg, if ok { "pass" } else { "fail" }, &[])?;
    if ok {
        Ok(())
    } else {
        Err(Fail(3, "critical check failed".into()))
    }
}

#[derive(Serialize)]
struct SeriesRow {
    t: f64,
    #[serde(rename = "M")]
    m: f64,
    #[serde(rename = "P")]
    p: f64,
    #[serde(rename = "E")]
    e: f64,
    #[serde(rename = "J")]
    j: f64,
    theta: f64,
    y: f64,
    lambda: f64,
    eps_h1: f64,
    #[serde(rename = "I1")]
    i1: f64,
    #[serde(rename = "I2")]
    i2: f64,
    #[serde(rename = "I")]
    i: f64,
    orbit_dist: f64,
}

const SERIES_COLUMNS: [&str; 13] = ["t", "M", "P", "E", "J", "theta", "y", "lambda", "eps_h1", "I1", "I2", "I", "orbit_dist"];

impl From<&VirialRecord> for SeriesRow {
    fn from(r: &VirialRecord) -> Self {
        SeriesRow { t: r.t, m: r.m, p: r.p, e: r.e, j: r.j, theta: r.theta, y: r.y, lambda: r.lambda, eps_h1: r.eps_h1, i1: r.i1, i2: r.i2, i: r.i, orbit_dist: r.orbit_dist }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    status: Status,
    exit_time: Option<f64>,
    eps0: f64,
    delta1: f64,
    critical: bool,
    a_u0: f64,
    a_ratio: f64,
    a_ratio_first_order: f64,
    radius: f64,
    radius_capped: bool,
    c_tilde: Option<f64>,
    modulation_exit: &'a Option<(f64, String)>,
    abort: &'a Option<String>,
    decomposition: Option<DecompositionSummary>,
    b3: Option<f64>,
    i_bounded: bool,
}

#[derive(Serialize)]
struct DecompositionSummary {
    positive_fraction: f64,
    floor_fraction: f64,
    monotone: bool,
    remainder_constant: f64,
    max_remainder: f64,
}

fn summary(r: &RunReport) -> Summary<'_> {
    Summary {
        status: r.status,
        exit_time: r.exit_time,
        eps0: r.eps0,
        delta1: r.delta1,
        critical: r.critical,
        a_u0: r.a_u0,
        a_ratio: r.a_ratio,
        a_ratio_first_order: r.a_ratio_first_order,
        radius: r.radius,
        radius_capped: r.radius_capped,
        c_tilde: r.c_tilde,
        modulation_exit: &r.modulation_exit,
        abort: &r.abort,
        decomposition: r.decomposition.as_ref().map(|d| DecompositionSummary {
            positive_fraction: d.positive_fraction,
            floor_fraction: d.floor_fraction,
            monotone: d.monotone,
            remainder_constant: d.remainder_constant,
            max_remainder: d.max_remainder,
        }),
        b3: r.b3,
        i_bounded: r.i_bounded,
    }
}

fn run_spec(cfg: &Resolved, grid: &Grid, delta1: f64) -> RunSpec {
    RunSpec {
        params: cfg.params(),
        delta1,
        grid: grid.clone(),
        evolve: EvolveConfig { dt: cfg.dt, t_final: cfg.t, record_every: cfg.record_every, scheme: cfg.scheme.into(), ..Default::default() },
        radius: cfg.r,
    }
}

fn status_word(r: &RunReport) -> &'static str {
    match r.status {
        Status::Escaped => "escaped",
        Status::Stayed => "stayed",
        Status::Aborted => "aborted",
    }
}

fn write_run(dir: &Path, cfg: &Resolved, r: &RunReport) -> Result<(), Error> {
    let mut sink = Sink::new(dir, cfg.format)?;
    let rows: Vec<SeriesRow> = r.records.iter().map(SeriesRow::from).collect();
    sink.table("series", &SERIES_COLUMNS, &rows)?;
    sink.document("summary", &summary(r))?;
    let mut notes = Vec::new();
    if !r.critical {
        notes.push("rate decomposition not applicable: speed is not critical".into());
    }
    if r.radius_capped {
        notes.push(format!("cutoff radius capped at {:.3}", r.radius));
    }
    manifest(&mut sink, "evolve", cfg, status_word(r), &notes)
}

fn cmd_evolve(raw: &RawConfig) -> Run {
    let cfg = Resolved::from_raw(raw)?;
    let grid = cfg.grid()?;
    let r = perturbed_run(&run_spec(&cfg, &grid, cfg.delta1))?;
    write_run(&cfg.output_dir, &cfg, &r)?;
    let last = r.records.last().map_or(0.0, |x| x.t);
    println!("status {} at t = {last:.3} (orbit tube eps0 = {:.4e}); {} records in {}", status_word(&r), r.eps0, r.records.len(), cfg.output_dir.display());
    match &r.abort {
        Some(msg) => Err(Fail(4, msg.clone())),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct SweepRow {
    delta1: f64,
    status: String,
    exit_time: f64,
    a_ratio: f64,
    a_over_b2_delta1: f64,
    floor_fraction: f64,
    positive_fraction: f64,
    monotone: bool,
    b3: f64,
    remainder_constant: f64,
    error: String,
}

fn cmd_sweep(raw: &RawConfig) -> Run {
    let raw = RawConfig { c: Some(raw.c.clone().unwrap_or(config::Value::Word("critical".into()))), ..raw.clone() };
    let cfg = Resolved::from_raw(&raw)?;
    if cfg.delta1_list.is_empty() {
        return Err(Fail(2, "sweep needs a non-empty --delta1-list (e.g. --delta1-list 1e-2,1e-3)".into()));
    }
    let grid = cfg.grid()?;
    let b2 = critical_constants(cfg.sigma, cfg.omega).map(|d| d.b2).unwrap_or(f64::NAN);
    let results: Vec<(f64, std::result::Result<RunReport, Error>)> = cfg
        .delta1_list
        .par_iter()
        .map(|&d1| {
            let r = perturbed_run(&run_spec(&cfg, &grid, d1));
            if let Ok(rep) = &r {
                let dir = cfg.output_dir.join(format!("delta1_{d1:e}"));
                if let Err(e) = write_run(&dir, &Resolved { delta1: d1, ..cfg.clone() }, rep) {
                    return (d1, Err(e));
                }
            }
            (d1, r)
        })
        .collect();
    let rows: Vec<SweepRow> = results
        .iter()
        .map(|(d1, r)| match r {
            Ok(r) => {
                let dec = r.decomposition.as_ref();
                SweepRow {
                    delta1: *d1,
                    status: status_word(r).into(),
                    exit_time: r.exit_time.unwrap_or(f64::NAN),
                    a_ratio: r.a_ratio,
                    a_over_b2_delta1: r.a_u0 / (b2 * d1),
                    floor_fraction: dec.map_or(f64::NAN, |d| d.floor_fraction),
                    positive_fraction: dec.map_or(f64::NAN, |d| d.positive_fraction),
                    monotone: dec.is_some_and(|d| d.monotone),
                    b3: r.b3.unwrap_or(f64::NAN),
                    remainder_constant: dec.map_or(f64::NAN, |d| d.remainder_constant),
                    error: r.abort.clone().unwrap_or_default(),
                }
            }
            Err(e) => SweepRow {
                delta1: *d1,
                status: "error".into(),
                exit_time: f64::NAN,
                a_ratio: f64::NAN,
                a_over_b2_delta1: f64::NAN,
                floor_fraction: f64::NAN,
                positive_fraction: f64::NAN,
                monotone: false,
                b3: f64::NAN,
                remainder_constant: f64::NAN,
                error: e.to_string(),
            },
        })
        .collect();
    for r in &rows {
        println!("delta1 {:.1e}: {} at t = {:.3}, A/(b2 delta1) = {:.4}, b3 = {:.3e} {}", r.delta1, r.status, r.exit_time, r.a_over_b2_delta1, r.b3, r.error);
    }
    let mut sink = Sink::new(&cfg.output_dir, cfg.format)?;
    sink.table(
        "sweep",
        &["delta1", "status", "exit_time", "a_ratio", "a_over_b2_delta1", "floor_fraction", "positive_fraction", "monotone", "b3", "remainder_constant", "error"],
        &rows,
    )?;
    manifest(&mut sink, "sweep", &cfg, "done", &[])?;
    Ok(())
}

fn cmd_check(raw: &RawConfig) -> Run {
    let cfg = Resolved::from_raw(raw)?;
    let p = cfg.params();
    let mut checks = full_suite(&p, &cfg.grid()?)?;
    if p.sigma > 1.0 && p.sigma < 2.0 {
        checks.extend(spectral_checks(&critical_constants(p.sigma, p.omega)?, cfg.n)?);
    }
    print_checks(&checks);
    let mut sink = Sink::new(&cfg.output_dir, cfg.format)?;
    sink.table("checks", &CHECK_COLUMNS, &checks)?;
    let ok = all_pass(&checks);
    manifest(&mut sink, "check", &cfg, if ok { "pass" } else { "fail" }, &[])?;
    if ok {
        Ok(())
    } else {
        Err(Fail(3, "identity suite failed".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Soliton(f) | Cmd::Critical(f) | Cmd::Evolve(f) | Cmd::Sweep(f) | Cmd::Check(f) => RawConfig::load(f).map_err(Fail::from),
    }
    .and_then(|raw| match &cli.cmd {
        Cmd::Soliton(_) => cmd_soliton(&raw),
        Cmd::Critical(_) => cmd_critical(&raw),
        Cmd::Evolve(_) => cmd_evolve(&raw),
        Cmd::Sweep(_) => cmd_sweep(&raw),
        Cmd::Check(_) => cmd_check(&raw),
    });
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
