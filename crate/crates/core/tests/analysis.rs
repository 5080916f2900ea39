use chj_core::analysis::{
    ap_study, coincidence_probe, convergence_study, err_i, err_u, extinction_probe, fit_order,
    flat_monotone_probe, jump_probe, negative_multiplier_probe, nesting, ua_study, ProbeKind,
    Trajectory,
};
use chj_core::ap_solver::{ApOptions, ApScheme};
use chj_core::field::Field;
use chj_core::hamiltonians::HamiltonianKind;
use chj_core::hj_solver::{HjOptions, HjScheme, Storage};
use chj_core::model::{
    builtin_scenario, Discretization, Domain, InitialData, ModelScenario, ScenarioOptions, TimeGrid,
    TraitGrid,
};
use chj_core::setup::SchemeSpec;
use chj_core::Error;
use proptest::prelude::*;

struct Synthetic {
    disc: Discretization,
    state: Field,
    path: Vec<f64>,
}

impl Trajectory for Synthetic {
    fn discretization(&self) -> &Discretization {
        &self.disc
    }
    fn final_state(&self) -> &Field {
        &self.state
    }
    fn multiplier_path(&self) -> &[f64] {
        &self.path
    }
}

fn disc(x0: f64, dx: f64, n_points: usize, n_steps: usize) -> Discretization {
    Discretization {
        time: TimeGrid::new(1.0, n_steps).unwrap(),
        grid: TraitGrid::new(x0, dx, n_points, Default::default()).unwrap(),
        domain: Domain::new(x0, x0 + dx * (n_points - 1) as f64).unwrap(),
        eta: 0.1,
        slope_cap: 2.0,
        cfl_constant: 1.0,
    }
}

fn synthetic(x0: f64, dx: f64, n_steps: usize, u: impl Fn(f64) -> f64, m: impl Fn(f64) -> f64) -> Synthetic {
    let n_points = ((2.0 - x0) / dx).round() as usize + 1;
    let d = disc(x0, dx, n_points, n_steps);
    let state = Field::sample(&d.grid, 0, &u);
    let dt = d.dt();
    let path = (1..=n_steps).map(|n| m(n as f64 * dt)).collect();
    Synthetic { disc: d, state, path }
}

fn scenario(name: &str, init: InitialData) -> ModelScenario {
    let opts = ScenarioOptions {
        init: Some(init),
        ..Default::default()
    };
    builtin_scenario(name, &opts).unwrap()
}

#[test]
fn nesting_reports_factors_and_origin() {
    let coarse = disc(-1.0, 0.1, 31, 10);
    let fine = disc(-1.5, 0.025, 141, 40);
    let n = nesting(&coarse, &fine).unwrap();
    assert_eq!((n.space, n.time, n.origin), (4, 4, 20));
    assert!(matches!(nesting(&coarse, &disc(-1.0, 0.03, 101, 40)), Err(Error::StudySetup(_))));
    assert!(matches!(nesting(&coarse, &disc(-1.0, 0.025, 121, 35)), Err(Error::StudySetup(_))));
    assert!(matches!(nesting(&coarse, &disc(-1.01, 0.025, 121, 40)), Err(Error::StudySetup(_))));
}

#[test]
fn field_error_is_the_sup_over_shared_nodes() {
    let reference = synthetic(-2.0, 0.01, 40, |x| x * x, |t| t);
    // off by 0.3 at x = 1 only; the fine node between coarse ones never counts
    let sol = synthetic(-2.0, 0.04, 10, |x| x * x + if (x - 1.0).abs() < 1e-9 { 0.3 } else { 0.0 }, |t| t);
    assert!((err_u(&sol, &reference).unwrap() - 0.3).abs() < 1e-12);
    assert_eq!(err_u(&reference, &reference).unwrap(), 0.0);
}

#[test]
fn multiplier_error_averages_the_reference_over_each_step() {
    // reference m = t on (t^{n-1}, t^n] averages to t^n - (3/8)·dt with four substeps
    let reference = synthetic(-2.0, 0.01, 40, |_| 0.0, |t| t);
    let sol = synthetic(-2.0, 0.04, 10, |_| 0.0, |t| t);
    let dt = 0.1;
    let expected = dt * 10.0 * (3.0 / 8.0) * dt;
    assert!((err_i(&sol, &reference).unwrap() - expected).abs() < 1e-14);
    assert_eq!(err_i(&sol, &sol).unwrap(), 0.0);
}

#[test]
fn study_setup_rejects_bad_reference_steps() {
    let sc = scenario("compliant", InitialData::Conv);
    let spec = SchemeSpec::default()
        .with_kind(HamiltonianKind::Ccs)
        .with_horizon(0.1);
    for (dts, dt_ref) in [(vec![1e-2], 3e-3), (vec![1e-2, 1e-3], 1e-3), (vec![], 1e-3)] {
        let r = convergence_study(&sc, &spec, &dts, dt_ref);
        assert!(matches!(r, Err(Error::StudySetup(_))), "{dts:?} {dt_ref}");
    }
    assert!(matches!(ap_study(&sc, &spec, &[]), Err(Error::StudySetup(_))));
    assert!(matches!(ua_study(&sc, &spec, &[1e-2], &[], 1e-3), Err(Error::StudySetup(_))));
}

#[test]
fn convergence_study_refines_toward_the_reference() {
    let sc = scenario("compliant", InitialData::Conv);
    let spec = SchemeSpec::default()
        .with_kind(HamiltonianKind::Ccs)
        .with_horizon(0.2);
    let res = convergence_study(&sc, &spec, &[1e-2, 4e-3, 2e-3], 1e-3).unwrap();
    assert!(res.failures().is_empty());
    let dts: Vec<f64> = res.rows.iter().map(|r| r.dt).collect();
    assert_eq!(dts, vec![2e-3, 4e-3, 1e-2]);
    assert!(res.rows.windows(2).all(|w| w[0].err_u < w[1].err_u), "{res:?}");
    assert!(res.rows.iter().all(|r| r.eps.is_none() && r.err_i.is_finite()));
    let csv = res.to_csv();
    assert!(csv.starts_with("dt,dx,eps,err_u,err_I\n"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn ua_study_reports_one_sup_per_step() {
    let sc = scenario("paper51", InitialData::NotConv);
    let spec = SchemeSpec::default()
        .with_kind(HamiltonianKind::ApLimit)
        .with_horizon(0.1);
    let eps = [1e-1, 1e-4, 1e-8];
    let ua = ua_study(&sc, &spec, &[1e-2, 5e-3], &eps, 1e-3).unwrap();
    assert_eq!(ua.result.rows.len(), 6);
    assert_eq!(ua.sup_by_dt.len(), 2);
    assert_eq!(ua.sup_by_dt[0].0, 5e-3);
    for (dt, su, si) in &ua.sup_by_dt {
        let rows = ua.result.rows.iter().filter(|r| r.dt == *dt);
        let mu = rows.clone().map(|r| r.err_u).fold(0.0, f64::max);
        let mi = rows.map(|r| r.err_i).fold(0.0, f64::max);
        assert_eq!((*su, *si), (mu, mi));
    }
    assert!(ua.sup_by_dt[0].1 <= ua.sup_by_dt[1].1);
}

#[test]
fn flat_run_is_detected_as_monotone() {
    let sc = scenario("compliant", InitialData::Conv);
    let setup = SchemeSpec::default()
        .with_kind(HamiltonianKind::Ccs)
        .with_horizon(0.2)
        .with_dt(1e-3)
        .build(&sc)
        .unwrap();
    let sol = HjScheme::new(sc, setup.disc, setup.hamiltonian).run().unwrap();
    let p = flat_monotone_probe(&sol);
    assert_eq!(p.kind, ProbeKind::FlatMonotone);
    assert!(p.detected && p.get("min_step").unwrap() >= 0.0);
    assert!(!negative_multiplier_probe(&sol).detected);
}

fn moving_optimum_runs(name: &str, horizon: f64, eps: f64) -> (chj_core::hj_solver::HjSolution, chj_core::ap_solver::ApSolution) {
    let sc = builtin_scenario(name, &ScenarioOptions::default()).unwrap();
    let mut spec = SchemeSpec::default().with_horizon(horizon).with_dt(1e-3);
    spec.slope_cap = 3.0;
    let setup = spec.build(&sc).unwrap();
    let hj = HjScheme::new(sc.clone(), setup.disc, setup.hamiltonian.clone())
        .with_options(HjOptions {
            storage: Storage::FinalOnly,
            ..Default::default()
        })
        .run()
        .unwrap();
    let ap = ApScheme::new(sc, setup.disc, setup.hamiltonian.quadrature_arc().clone(), eps)
        .unwrap()
        .with_options(ApOptions {
            storage: Storage::FinalOnly,
            ..Default::default()
        })
        .run()
        .unwrap();
    (hj, ap)
}

#[test]
fn slow_oscillation_keeps_both_schemes_together() {
    let (hj, ap) = moving_optimum_runs("oscillatory(0.5)", 1.0, 1e-8);
    let p = coincidence_probe(&hj, &ap, 5e-2);
    assert!(p.detected, "{p:?}");
    assert!(!negative_multiplier_probe(&hj).detected);
}

#[test]
fn square_wave_shows_extinction_negativity_and_a_jump() {
    let (hj, ap) = moving_optimum_runs("square_wave", 1.0, 1e-8);
    let ext = extinction_probe(&ap, 1e-3);
    assert!(ext.detected, "{ext:?}");
    let neg = negative_multiplier_probe(&hj);
    assert!(neg.detected, "{neg:?}");
    let jump = jump_probe(&hj, 10.0, 10.0 * hj.disc.dx());
    assert!(jump.get("max_increase").unwrap() > 0.0, "{jump:?}");
}

#[test]
fn coincidence_needs_matching_time_grids() {
    let (hj, ap) = moving_optimum_runs("oscillatory(0.5)", 0.1, 1e-8);
    let mut short = hj.clone();
    short.multipliers.pop();
    let p = coincidence_probe(&short, &ap, 1.0);
    assert!(!p.detected && p.get("sup_gap").unwrap().is_nan());
}

proptest! {
    #[test]
    fn field_error_is_a_metric(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0, k in 1.0f64..5.0) {
        let make = |s: f64| synthetic(-2.0, 0.05, 8, move |x| s * (k * x).sin(), move |t| s * t);
        let (x, y, z) = (make(a), make(b), make(c));
        let dxy = err_u(&x, &y).unwrap();
        prop_assert!((dxy - err_u(&y, &x).unwrap()).abs() < 1e-15);
        prop_assert!(dxy <= err_u(&x, &z).unwrap() + err_u(&z, &y).unwrap() + 1e-14);
        let ixy = err_i(&x, &y).unwrap();
        prop_assert!((ixy - err_i(&y, &x).unwrap()).abs() < 1e-15);
        prop_assert!(ixy <= err_i(&x, &z).unwrap() + err_i(&z, &y).unwrap() + 1e-14);
    }

    #[test]
    fn fit_recovers_a_power_law(p in 0.2f64..3.0, c in 1e-3f64..1e3) {
        let pts: Vec<(f64, f64)> = [1e-1f64, 3e-2, 1e-2, 3e-3].iter().map(|&h| (h, c * h.powf(p))).collect();
        let fitted = fit_order(&pts, 0.0).unwrap();
        prop_assert!((fitted - p).abs() < 1e-9);
    }
}
