mod config;
mod output;

use std::process::ExitCode;

use anyhow::{anyhow, Result};
use chj_core::analysis::{
    ap_study, coincidence_probe, convergence_study, extinction_probe, flat_monotone_probe,
    jump_probe, negative_multiplier_probe, ua_study, ProbeKind, ProbeReport, StudyResult,
};
use chj_core::ap_solver::{run_limit_scheme, ApOptions, ApScheme, ApSolution};
use chj_core::field::Field;
use chj_core::hj_solver::{HjOptions, HjScheme, HjSolution, InvariantReport, Storage};
use chj_core::model::{BoundaryMode, ModelScenario};
use chj_core::setup::Setup;
use clap::{CommandFactory, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use config::{AuditMode, Overrides, RunConfig};
use output::{
    ap_trace_csv, audit_map, fields_csv, hj_trace_csv, json, write_atomic,
};

#[derive(Parser, Debug)]
#[command(name = "chj", version, about = "Constrained Hamilton-Jacobi and asymptotic-preserving solvers")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scheme (S) with trace, snapshots and audit report
    RunHj(Overrides),
    /// Scheme (S_ε) for one ε
    RunAp(Overrides),
    /// The ε → 0 limit of (S_ε)
    RunLimit(Overrides),
    /// Refinement study of (S) against a fine reference
    StudyConvergence(Overrides),
    /// (S_ε) against the limit scheme for a list of ε
    StudyAp(Overrides),
    /// (S_ε) at several steps against a fine reference, for every ε
    StudyUa(Overrides),
    /// Qualitative detectors (jump, flat_monotone, extinction, negative_i, coincidence)
    Probe(Overrides),
    /// Invariant audit plus randomized monotonicity checks
    Audit(Overrides),
}

const DEFAULT_CONVERGENCE_DTS: [f64; 4] = [8e-4, 2e-3, 4e-3, 1e-2];
const DEFAULT_UA_DTS: [f64; 3] = [1e-2, 3e-3, 1e-3];
const DEFAULT_DT_REF: f64 = 1e-4;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(command) = cli.command else {
        let _ = Cli::command().print_help();
        return ExitCode::from(1);
    };
    match dispatch(command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<u8> {
    let (overrides, run): (&Overrides, fn(&RunConfig) -> Result<u8>) = match &command {
        Command::RunHj(o) => (o, cmd_run_hj),
        Command::RunAp(o) => (o, cmd_run_ap),
        Command::RunLimit(o) => (o, cmd_run_limit),
        Command::StudyConvergence(o) => (o, cmd_study_convergence),
        Command::StudyAp(o) => (o, cmd_study_ap),
        Command::StudyUa(o) => (o, cmd_study_ua),
        Command::Probe(o) => (o, cmd_probe),
        Command::Audit(o) => (o, cmd_audit),
    };
    match overrides.resolve()? {
        Some(cfg) => {
            write_atomic(&cfg.output_dir, "run_config.json", &cfg.to_json())?;
            run(&cfg)
        }
        None => {
            let _ = Cli::command().print_help();
            Ok(1)
        }
    }
}

fn prepare(cfg: &RunConfig) -> Result<(ModelScenario, Setup)> {
    let scenario = cfg.scenario()?;
    let setup = cfg.scheme.build(&scenario)?;
    Ok((scenario, setup))
}

fn stride(cfg: &RunConfig, steps: usize) -> Storage {
    let k = if cfg.field_stride > 0 {
        cfg.field_stride
    } else {
        (steps / 200).max(1)
    };
    Storage::Stride(k)
}

fn run_hj(cfg: &RunConfig, scenario: &ModelScenario, setup: &Setup) -> Result<HjSolution> {
    let options = HjOptions {
        storage: stride(cfg, setup.disc.time.n_steps),
        ..Default::default()
    };
    Ok(HjScheme::new(scenario.clone(), setup.disc, setup.hamiltonian.clone())
        .with_options(options)
        .run()?)
}

fn run_ap(cfg: &RunConfig, scenario: &ModelScenario, setup: &Setup, eps: f64) -> Result<ApSolution> {
    let options = ApOptions {
        storage: stride(cfg, setup.disc.time.n_steps),
        ..Default::default()
    };
    Ok(ApScheme::new(
        scenario.clone(),
        setup.disc,
        setup.hamiltonian.quadrature_arc().clone(),
        eps,
    )?
    .with_options(options)
    .run()?)
}

fn write_hj(cfg: &RunConfig, sol: &HjSolution, prefix: &str) -> Result<()> {
    let dir = &cfg.output_dir;
    write_atomic(dir, &format!("{prefix}_trace.csv"), &hj_trace_csv(sol))?;
    write_atomic(
        dir,
        &format!("{prefix}_fields.csv"),
        &fields_csv(&sol.fields, &sol.disc.grid, sol.disc.dt()),
    )?;
    Ok(())
}

fn write_ap(cfg: &RunConfig, sol: &ApSolution) -> Result<()> {
    let dir = &cfg.output_dir;
    write_atomic(dir, "ap_trace.csv", &ap_trace_csv(sol))?;
    write_atomic(
        dir,
        "ap_fields.csv",
        &fields_csv(&sol.fields, &sol.disc.grid, sol.disc.dt()),
    )?;
    write_atomic(dir, "ap_diagnostics.json", &json(&sol.diagnostics()))?;
    Ok(())
}

fn verdict(report: &InvariantReport) -> String {
    if report.all_pass() {
        "pass".into()
    } else {
        format!("fail({})", report.failing().join(","))
    }
}

fn hj_summary(label: &str, cfg: &RunConfig, sol: &HjSolution) -> String {
    format!(
        "{label} {} {} dt={:e} dx={:.6e} steps={} I_final={:.10} audit={}",
        cfg.scenario,
        sol.hamiltonian.kind().label(),
        sol.disc.dt(),
        sol.disc.dx(),
        sol.completed_steps(),
        sol.multipliers.last().copied().unwrap_or(f64::NAN),
        verdict(&sol.audit)
    )
}

fn cmd_run_hj(cfg: &RunConfig) -> Result<u8> {
    let (scenario, setup) = prepare(cfg)?;
    let sol = run_hj(cfg, &scenario, &setup)?;
    write_hj(cfg, &sol, "hj")?;
    write_atomic(&cfg.output_dir, "audit.json", &json(&audit_map(&sol.audit)))?;
    for w in &sol.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}", hj_summary("run-hj", cfg, &sol));
    Ok(0)
}

fn cmd_run_limit(cfg: &RunConfig) -> Result<u8> {
    let (scenario, setup) = prepare(cfg)?;
    let options = HjOptions {
        storage: stride(cfg, setup.disc.time.n_steps),
        ..Default::default()
    };
    let sol = run_limit_scheme(
        &scenario,
        &setup.disc,
        setup.hamiltonian.quadrature_arc().clone(),
        options,
    )?;
    write_hj(cfg, &sol, "limit")?;
    println!("{}", hj_summary("run-limit", cfg, &sol));
    Ok(0)
}

fn cmd_run_ap(cfg: &RunConfig) -> Result<u8> {
    let eps = cfg.single_eps()?;
    let (scenario, setup) = prepare(cfg)?;
    let sol = run_ap(cfg, &scenario, &setup, eps)?;
    write_ap(cfg, &sol)?;
    println!(
        "run-ap {} eps={eps:e} dt={:e} dx={:.6e} steps={} J_final={:.10} min_v={:.6e}",
        cfg.scenario,
        sol.disc.dt(),
        sol.disc.dx(),
        sol.completed_steps(),
        sol.masses.last().copied().unwrap_or(f64::NAN),
        sol.min_v.last().copied().unwrap_or(f64::NAN)
    );
    Ok(0)
}

#[derive(Serialize)]
struct FitSummary<'a> {
    fitted_order_u: Option<f64>,
    #[serde(rename = "fitted_order_I")]
    fitted_order_i: Option<f64>,
    failures: Vec<(f64, Option<f64>, &'a str)>,
}

fn fit_summary(res: &StudyResult) -> FitSummary<'_> {
    FitSummary {
        fitted_order_u: res.fitted_order_u,
        fitted_order_i: res.fitted_order_i,
        failures: res
            .failures()
            .into_iter()
            .map(|r| (r.dt, r.eps, r.failure.as_deref().unwrap_or("")))
            .collect(),
    }
}

fn fmt_order(o: Option<f64>) -> String {
    o.map_or("n/a".into(), |v| format!("{v:.4}"))
}

fn cmd_study_convergence(cfg: &RunConfig) -> Result<u8> {
    let scenario = cfg.scenario()?;
    let dts = if cfg.dts.is_empty() {
        DEFAULT_CONVERGENCE_DTS.to_vec()
    } else {
        cfg.dts.clone()
    };
    let res = convergence_study(&scenario, &cfg.scheme, &dts, cfg.dt_ref.unwrap_or(DEFAULT_DT_REF))?;
    write_atomic(&cfg.output_dir, "convergence.csv", &res.to_csv())?;
    write_atomic(&cfg.output_dir, "convergence_fit.json", &json(&fit_summary(&res)))?;
    println!(
        "study-convergence {} {} rows={} order_u={} order_I={}",
        cfg.scenario,
        cfg.scheme.kind.label(),
        res.rows.len(),
        fmt_order(res.fitted_order_u),
        fmt_order(res.fitted_order_i)
    );
    Ok(if res.failures().is_empty() { 0 } else { 1 })
}

fn cmd_study_ap(cfg: &RunConfig) -> Result<u8> {
    let scenario = cfg.scenario()?;
    let default: Vec<f64> = (1..=8).map(|k| format!("1e-{k}").parse().unwrap()).collect();
    let eps = cfg.eps_values(&default);
    let res = ap_study(&scenario, &cfg.scheme, &eps)?;
    write_atomic(&cfg.output_dir, "ap_study.csv", &res.to_csv())?;
    write_atomic(&cfg.output_dir, "ap_study_fit.json", &json(&fit_summary(&res)))?;
    println!(
        "study-ap {} dt={:e} rows={} order_u={} order_I={}",
        cfg.scenario,
        cfg.scheme.dt,
        res.rows.len(),
        fmt_order(res.fitted_order_u),
        fmt_order(res.fitted_order_i)
    );
    Ok(if res.failures().is_empty() { 0 } else { 1 })
}

fn cmd_study_ua(cfg: &RunConfig) -> Result<u8> {
    let scenario = cfg.scenario()?;
    let dts = if cfg.dts.is_empty() {
        DEFAULT_UA_DTS.to_vec()
    } else {
        cfg.dts.clone()
    };
    let default: Vec<f64> = (0..=12).map(|k| format!("1e-{k}").parse().unwrap()).collect();
    let eps = cfg.eps_values(&default);
    let ua = ua_study(&scenario, &cfg.scheme, &dts, &eps, cfg.dt_ref.unwrap_or(DEFAULT_DT_REF))?;
    write_atomic(&cfg.output_dir, "ua_matrix.csv", &ua.to_csv())?;
    write_atomic(&cfg.output_dir, "ua_summary.json", &json(&ua))?;
    let sups: Vec<String> = ua
        .sup_by_dt
        .iter()
        .map(|(dt, u, _)| format!("{dt:e}:{u:.4e}"))
        .collect();
    println!(
        "study-ua {} rows={} sup_eps_err_u=[{}]",
        cfg.scenario,
        ua.result.rows.len(),
        sups.join(" ")
    );
    Ok(if ua.result.failures().is_empty() { 0 } else { 1 })
}

fn cmd_probe(cfg: &RunConfig) -> Result<u8> {
    let kind = cfg.probe.ok_or_else(|| anyhow!("probe needs --probe <kind>"))?;
    let (scenario, setup) = prepare(cfg)?;
    let report: ProbeReport = match kind {
        ProbeKind::Jump | ProbeKind::FlatMonotone | ProbeKind::NegativeMultiplier => {
            let sol = run_hj(cfg, &scenario, &setup)?;
            write_hj(cfg, &sol, "hj")?;
            match kind {
                ProbeKind::Jump => jump_probe(&sol, cfg.jump_ratio, 10.0 * setup.disc.dx()),
                ProbeKind::FlatMonotone => flat_monotone_probe(&sol),
                _ => negative_multiplier_probe(&sol),
            }
        }
        ProbeKind::Extinction => {
            let sol = run_ap(cfg, &scenario, &setup, cfg.single_eps()?)?;
            write_ap(cfg, &sol)?;
            extinction_probe(&sol, cfg.extinction_threshold)
        }
        ProbeKind::Coincidence => {
            let hj = run_hj(cfg, &scenario, &setup)?;
            let ap = run_ap(cfg, &scenario, &setup, cfg.single_eps()?)?;
            write_hj(cfg, &hj, "hj")?;
            write_ap(cfg, &ap)?;
            coincidence_probe(&hj, &ap, cfg.coincidence_tol)
        }
    };
    write_atomic(&cfg.output_dir, "probe.json", &json(&report))?;
    let q: Vec<String> = report
        .quantities
        .iter()
        .map(|(k, v)| format!("{k}={v:.6e}"))
        .collect();
    println!(
        "probe {} {:?} detected={} {}",
        cfg.scenario,
        kind,
        report.detected,
        q.join(" ")
    );
    Ok(0)
}

pub const MONOTONE_ORDER: &str = "random_monotone_order";
pub const MONOTONE_CONTRACTION: &str = "random_sup_nonexpansive";

/// Ordered pairs `u <= v` of fields whose slopes stay inside `[-S, S]`.
fn random_pair(rng: &mut ChaCha8Rng, n: usize, dx: f64, slope: f64) -> (Field, Field) {
    let l = 0.9 * slope;
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut a: f64 = rng.gen_range(-1.0..1.0);
    let mut gap: f64 = rng.gen_range(0.0..1.0);
    for _ in 0..n {
        u.push(a);
        v.push(a + gap);
        a += dx * rng.gen_range(-l..=l);
        gap = (gap + dx * rng.gen_range(-0.05 * l..=0.05 * l)).abs();
    }
    (Field::new(0, u), Field::new(0, v))
}

/// Checks `explicit_update` for order preservation and sup-norm
/// non-expansiveness on random ordered pairs. Under linear extrapolation the
/// two end nodes use ghost values and are left out.
fn random_monotone_checks(
    cfg: &RunConfig,
    scenario: &ModelScenario,
    setup: &Setup,
    report: &mut InvariantReport,
) -> Result<()> {
    let scheme = HjScheme::new(scenario.clone(), setup.disc, setup.hamiltonian.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let c = &scenario.constants;
    let n = setup.disc.grid.n_points;
    let dt = setup.disc.dt();
    for s in 0..cfg.property_samples {
        let (u, v) = random_pair(&mut rng, n, setup.disc.dx(), setup.disc.slope_cap);
        let m = rng.gen_range(c.i_min..=c.i_max);
        let mu = scheme.explicit_update(&u, m, dt)?;
        let mv = scheme.explicit_update(&v, m, dt)?;
        let (mu, mv) = match setup.disc.grid.boundary_mode {
            BoundaryMode::LinearExtrapolate => (interior(&mu), interior(&mv)),
            BoundaryMode::Shrink => (mu.values.clone(), mv.values.clone()),
        };
        let order = mu
            .iter()
            .zip(&mv)
            .map(|(a, b)| b - a)
            .fold(f64::INFINITY, f64::min);
        let gap_in = u
            .values
            .iter()
            .zip(&v.values)
            .map(|(a, b)| (b - a).abs())
            .fold(0.0, f64::max);
        let gap_out = mu
            .iter()
            .zip(&mv)
            .map(|(a, b)| (b - a).abs())
            .fold(0.0, f64::max);
        report.record(MONOTONE_ORDER, s, order, 1e-12);
        report.record(MONOTONE_CONTRACTION, s, gap_in - gap_out, 1e-12);
    }
    Ok(())
}

fn interior(f: &Field) -> Vec<f64> {
    let n = f.values.len();
    f.values[1.min(n)..n.saturating_sub(1).max(1.min(n))].to_vec()
}

fn cmd_audit(cfg: &RunConfig) -> Result<u8> {
    let (scenario, setup) = prepare(cfg)?;
    let options = HjOptions {
        storage: Storage::FinalOnly,
        ..Default::default()
    };
    let sol = HjScheme::new(scenario.clone(), setup.disc, setup.hamiltonian.clone())
        .with_options(options)
        .run()?;
    let mut report = sol.audit.clone();
    random_monotone_checks(cfg, &scenario, &setup, &mut report)?;
    write_atomic(&cfg.output_dir, "audit.json", &json(&audit_map(&report)))?;
    write_atomic(&cfg.output_dir, "hj_trace.csv", &hj_trace_csv(&sol))?;
    println!(
        "audit {} {} steps={} checks={} result={}",
        cfg.scenario,
        sol.hamiltonian.kind().label(),
        sol.completed_steps(),
        report.checks.len(),
        verdict(&report)
    );
    if cfg.audit_mode == AuditMode::Strict && !report.all_pass() {
        return Ok(2);
    }
    Ok(0)
}
