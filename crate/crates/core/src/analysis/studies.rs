use rayon::prelude::*;
use serde::Serialize;

use super::{err_i, err_u, fit_order, nesting, StudyResult, StudyRow};
use crate::ap_solver::{run_limit_scheme, ApOptions, ApScheme, ApSolution};
use crate::error::{Error, Result};
use crate::hj_solver::{HjOptions, HjScheme, HjSolution, Storage};
use crate::model::ModelScenario;
use crate::setup::{SchemeSpec, Setup};

/// Worker cap from `CHJ_THREADS`, else the available parallelism.
pub fn worker_count() -> usize {
    std::env::var("CHJ_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Maps `f` over `items` on a dedicated pool; output order follows input order.
fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    match rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
    {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

fn study_hj_options() -> HjOptions {
    HjOptions {
        storage: Storage::FinalOnly,
        ..Default::default()
    }
}

fn study_ap_options() -> ApOptions {
    ApOptions {
        storage: Storage::FinalOnly,
        ..Default::default()
    }
}

fn failed_row(setup: &Setup, eps: Option<f64>, e: &Error) -> StudyRow {
    StudyRow {
        dt: setup.disc.dt(),
        dx: setup.disc.dx(),
        eps,
        err_u: f64::NAN,
        err_i: f64::NAN,
        failure: Some(e.to_string()),
    }
}

fn compare(
    setup: &Setup,
    eps: Option<f64>,
    sol: &impl super::Trajectory,
    reference: &impl super::Trajectory,
) -> StudyRow {
    match err_u(sol, reference).and_then(|u| Ok((u, err_i(sol, reference)?))) {
        Ok((u, i)) => StudyRow {
            dt: setup.disc.dt(),
            dx: setup.disc.dx(),
            eps,
            err_u: u,
            err_i: i,
            failure: None,
        },
        Err(e) => failed_row(setup, eps, &e),
    }
}

fn check_reference(dts: &[f64], dt_ref: f64) -> Result<()> {
    if dts.is_empty() {
        return Err(Error::StudySetup("no time steps given".into()));
    }
    if let Some(bad) = dts.iter().find(|&&d| !(d > dt_ref)) {
        return Err(Error::StudySetup(format!(
            "reference step {dt_ref:e} must be below every study step (got {bad:e})"
        )));
    }
    Ok(())
}

/// Builds the reference and coarse setups and checks that every coarse grid
/// nests in the reference one.
fn nested_setups(
    scenario: &ModelScenario,
    spec: &SchemeSpec,
    dts: &[f64],
    dt_ref: f64,
) -> Result<(Setup, Vec<Setup>)> {
    check_reference(dts, dt_ref)?;
    let reference = spec.clone().with_dt(dt_ref).build(scenario)?;
    let coarse = dts
        .iter()
        .map(|&dt| {
            let s = spec.clone().with_dt(dt).build(scenario)?;
            nesting(&s.disc, &reference.disc)?;
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((reference, coarse))
}

fn hj_run(scenario: &ModelScenario, setup: &Setup) -> Result<HjSolution> {
    HjScheme::new(scenario.clone(), setup.disc, setup.hamiltonian.clone())
        .with_options(study_hj_options())
        .run()
}

fn ap_run(scenario: &ModelScenario, setup: &Setup, eps: f64) -> Result<ApSolution> {
    ApScheme::new(
        scenario.clone(),
        setup.disc,
        setup.hamiltonian.quadrature_arc().clone(),
        eps,
    )?
    .with_options(study_ap_options())
    .run()
}

/// Errors of scheme (S) at each of `dts` against one run at `dt_ref`.
/// Orders are fitted against `dt`, ignoring errors below ten root tolerances.
pub fn convergence_study(
    scenario: &ModelScenario,
    spec: &SchemeSpec,
    dts: &[f64],
    dt_ref: f64,
) -> Result<StudyResult> {
    let (reference, coarse) = nested_setups(scenario, spec, dts, dt_ref)?;
    let mut all = vec![reference.clone()];
    all.extend(coarse.iter().cloned());
    let mut runs = par_map(&all, |s| hj_run(scenario, s));
    let ref_sol = runs.remove(0)?;
    let floor = 10.0 * HjScheme::new(scenario.clone(), reference.disc, reference.hamiltonian.clone()).tol_root();
    let rows = coarse
        .iter()
        .zip(&runs)
        .map(|(setup, run)| match run {
            Ok(sol) => compare(setup, None, sol, &ref_sol),
            Err(e) => failed_row(setup, None, e),
        })
        .collect();
    Ok(StudyResult::by_dt(rows, floor))
}

/// Longest leading run (in the given order) on which `errs` strictly decrease.
pub(crate) fn decreasing_prefix(errs: &[f64]) -> usize {
    if errs.is_empty() {
        return 0;
    }
    let mut k = 1;
    while k < errs.len() && errs[k] < errs[k - 1] {
        k += 1;
    }
    k
}

/// Errors between (S_ε) and the limit scheme at one discretization, for
/// each ε. Orders are fitted against ε over the strictly decreasing run
/// that starts at the largest ε.
pub fn ap_study(scenario: &ModelScenario, spec: &SchemeSpec, eps_list: &[f64]) -> Result<StudyResult> {
    if eps_list.is_empty() {
        return Err(Error::StudySetup("no ε given".into()));
    }
    let setup = spec.build(scenario)?;
    let limit = run_limit_scheme(
        scenario,
        &setup.disc,
        setup.hamiltonian.quadrature_arc().clone(),
        study_hj_options(),
    )?;
    let runs = par_map(eps_list, |&e| ap_run(scenario, &setup, e));
    let mut rows: Vec<StudyRow> = eps_list
        .iter()
        .zip(&runs)
        .map(|(&e, run)| match run {
            Ok(sol) => compare(&setup, Some(e), sol, &limit),
            Err(err) => failed_row(&setup, Some(e), err),
        })
        .collect();
    rows.sort_by(|a, b| b.eps.unwrap_or(0.0).total_cmp(&a.eps.unwrap_or(0.0)));
    let errs: Vec<f64> = rows.iter().map(|r| r.err_u).collect();
    let pre = decreasing_prefix(&errs);
    let fit = |f: fn(&StudyRow) -> f64| {
        let pts: Vec<_> = rows[..pre].iter().map(|r| (r.eps.unwrap_or(0.0), f(r))).collect();
        fit_order(&pts, 0.0)
    };
    Ok(StudyResult {
        fitted_order_u: fit(|r| r.err_u),
        fitted_order_i: fit(|r| r.err_i),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UaSummary {
    /// One row per `(dt, ε)`.
    pub result: StudyResult,
    /// `(dt, sup_ε err_u, sup_ε err_I)` in increasing `dt`.
    pub sup_by_dt: Vec<(f64, f64, f64)>,
}

impl UaSummary {
    pub fn to_csv(&self) -> String {
        self.result.to_csv()
    }
}

/// Errors of (S_ε) at each `dt` against (S_ε) at `dt_ref`, for every ε.
pub fn ua_study(
    scenario: &ModelScenario,
    spec: &SchemeSpec,
    dts: &[f64],
    eps_list: &[f64],
    dt_ref: f64,
) -> Result<UaSummary> {
    if eps_list.is_empty() {
        return Err(Error::StudySetup("no ε given".into()));
    }
    let (reference, coarse) = nested_setups(scenario, spec, dts, dt_ref)?;
    // references first (the longest runs), then the coarse grid pairs
    let mut jobs: Vec<(Option<usize>, f64)> = eps_list.iter().map(|&e| (None, e)).collect();
    for k in 0..coarse.len() {
        jobs.extend(eps_list.iter().map(|&e| (Some(k), e)));
    }
    let mut runs = par_map(&jobs, |&(k, e)| {
        let setup = k.map_or(&reference, |k| &coarse[k]);
        ap_run(scenario, setup, e)
    });
    let coarse_runs = runs.split_off(eps_list.len());
    let refs = runs;

    let mut rows = Vec::with_capacity(coarse_runs.len());
    for ((k, e), run) in jobs[eps_list.len()..].iter().zip(&coarse_runs) {
        let setup = &coarse[k.expect("coarse job")];
        let idx = eps_list.iter().position(|x| x == e).expect("ε from the list");
        let row = match (run, &refs[idx]) {
            (Ok(sol), Ok(r)) => compare(setup, Some(*e), sol, r),
            (Err(err), _) | (_, Err(err)) => failed_row(setup, Some(*e), err),
        };
        rows.push(row);
    }
    let floor = 0.0;
    let result = StudyResult::by_dt(rows, floor);
    let mut sup_by_dt: Vec<(f64, f64, f64)> = Vec::new();
    for r in &result.rows {
        match sup_by_dt.last_mut() {
            Some(last) if last.0 == r.dt => {
                last.1 = nan_max(last.1, r.err_u);
                last.2 = nan_max(last.2, r.err_i);
            }
            _ => sup_by_dt.push((r.dt, r.err_u, r.err_i)),
        }
    }
    let sup_u: Vec<_> = sup_by_dt.iter().map(|s| (s.0, s.1)).collect();
    let sup_i: Vec<_> = sup_by_dt.iter().map(|s| (s.0, s.2)).collect();
    Ok(UaSummary {
        result: StudyResult {
            fitted_order_u: fit_order(&sup_u, 0.0),
            fitted_order_i: fit_order(&sup_i, 0.0),
            ..result
        },
        sup_by_dt,
    })
}

/// Maximum that lets a failed (NaN) entry dominate.
fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decreasing_prefix_stops_at_first_rise() {
        assert_eq!(decreasing_prefix(&[4.0, 2.0, 1.0, 1.0, 0.5]), 3);
        assert_eq!(decreasing_prefix(&[3.0, 2.0, 1.0]), 3);
        assert_eq!(decreasing_prefix(&[1.0]), 1);
        assert_eq!(decreasing_prefix(&[]), 0);
    }

    #[test]
    fn nan_dominates_sup() {
        assert!(nan_max(1.0, f64::NAN).is_nan());
        assert_eq!(nan_max(1.0, 2.0), 2.0);
    }
}
