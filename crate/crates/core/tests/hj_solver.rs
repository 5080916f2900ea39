use chj_core::field::Field;
use chj_core::hamiltonians::HamiltonianKind;
use chj_core::hj_solver::{audit, audit_invariants, HjOptions, HjScheme, HjSolution, Storage};
use chj_core::model::{builtin_scenario, InitialData, ModelScenario, ScenarioOptions};
use chj_core::setup::SchemeSpec;
use chj_core::Error;
use proptest::prelude::*;

fn compliant() -> ModelScenario {
    builtin_scenario("compliant", &ScenarioOptions::default()).unwrap()
}

fn paper51(init: InitialData) -> ModelScenario {
    let opts = ScenarioOptions {
        init: Some(init),
        ..Default::default()
    };
    builtin_scenario("paper51", &opts).unwrap()
}

fn scheme(sc: &ModelScenario, kind: HamiltonianKind, horizon: f64, dt: f64) -> HjScheme {
    let setup = SchemeSpec::default()
        .with_kind(kind)
        .with_horizon(horizon)
        .with_dt(dt)
        .build(sc)
        .unwrap();
    HjScheme::new(sc.clone(), setup.disc, setup.hamiltonian)
}

fn run(sc: &ModelScenario, kind: HamiltonianKind, horizon: f64, dt: f64) -> HjSolution {
    scheme(sc, kind, horizon, dt).run().unwrap()
}

#[test]
fn constant_field_moves_by_growth_only() {
    let sc = compliant();
    let s = scheme(&sc, HamiltonianKind::Ccs, 0.25, 1e-3);
    let init = s.initial_field();
    let u = Field::new(init.start, vec![0.7; init.len()]);
    let dt = 1e-3;
    let out = s.explicit_update(&u, 1.3, 0.1).unwrap();
    for (k, v) in out.values.iter().enumerate() {
        let x = s.disc.grid.node(out.start + k);
        let expected = 0.7 - dt * sc.r(0.1, x, 1.3);
        assert!((v - expected).abs() < 1e-15, "node {k}: {v} vs {expected}");
    }
}

#[test]
fn update_grows_with_the_multiplier_in_the_flat_setting() {
    let sc = compliant();
    let s = scheme(&sc, HamiltonianKind::Ccs, 0.25, 1e-3);
    let u = s.initial_field();
    let low = s.explicit_update(&u, 1.0, 1e-3).unwrap();
    let high = s.explicit_update(&u, 2.0, 1e-3).unwrap();
    for (a, b) in low.values.iter().zip(&high.values) {
        // R decreases by one unit of I and b does not depend on I
        assert!((b - a - 1e-3).abs() < 1e-14);
    }
}

#[test]
fn phi_is_nonpositive_at_the_previous_multiplier() {
    let sc = compliant();
    let s = scheme(&sc, HamiltonianKind::Ccs, 0.25, 1e-3);
    let sol = s.run().unwrap();
    let tol = s.tol_root();
    for n in [1usize, 10, 100, 249] {
        let u = sol.field(n).unwrap();
        let t_next = sol.disc.time.t(n + 1);
        let phi = s.phi(u, t_next, sol.multipliers[n - 1]).unwrap();
        assert!(phi <= tol, "step {n}: φ(I^n) = {phi}");
    }
}

#[test]
fn constraint_solve_brackets_and_zeroes_the_minimum() {
    let sc = compliant();
    let s = scheme(&sc, HamiltonianKind::CrandallLions, 0.25, 1e-3);
    let u = s.initial_field();
    let step = s.solve_constraint(&u, 1e-3, None).unwrap();
    assert!((0.0..=2.0).contains(&step.multiplier));
    assert!(step.residual <= s.tol_root());
    assert_eq!(step.field.min_with_index().0, 0.0);
    let phi_hi = s.phi(&u, 1e-3, step.multiplier + 0.5).unwrap();
    let phi_lo = s.phi(&u, 1e-3, step.multiplier - 0.5).unwrap();
    assert!(phi_lo < 0.0 && phi_hi > 0.0);
}

#[test]
fn flat_time_independent_runs_keep_the_multiplier_non_decreasing() {
    let sc = compliant();
    for kind in [HamiltonianKind::CrandallLions, HamiltonianKind::Upwind, HamiltonianKind::Ccs] {
        let sol = run(&sc, kind, 0.25, 1e-3);
        assert!(sol.multipliers.windows(2).all(|w| w[1] >= w[0]), "{kind:?}");
        assert!(sol.multipliers.iter().all(|i| (0.0..=2.0).contains(i)));
        for c in audit::SEVEN_CHECKS {
            let check = sol.audit.get(c).unwrap();
            assert!(check.pass, "{kind:?} {c}: {check:?}");
        }
    }
}

#[test]
fn every_stored_field_has_zero_minimum() {
    let sc = paper51(InitialData::NotConv);
    let sol = run(&sc, HamiltonianKind::P1, 0.2, 1e-3);
    for (n, f) in &sol.fields {
        if *n > 0 {
            assert_eq!(f.min_with_index().0, 0.0, "step {n}");
        }
        assert!(f.values.iter().all(|&v| v >= 0.0));
    }
    for r in &sol.trace {
        assert!(r.residual <= 1e-12 * 2.0, "step {}: residual {}", r.n, r.residual);
    }
}

#[test]
fn zero_step_run_returns_the_initial_field() {
    let sc = compliant();
    let s = scheme(&sc, HamiltonianKind::Ccs, 0.25, 1e-3).with_options(HjOptions {
        step_limit: Some(0),
        ..Default::default()
    });
    let sol = s.run().unwrap();
    assert!(sol.multipliers.is_empty());
    assert_eq!(sol.final_field(), &s.initial_field());
    // the initial field alone satisfies its own Lipschitz and coercivity budgets
    for c in [audit::LIPSCHITZ, audit::COERCIVITY] {
        assert!(sol.audit.get(c).is_some_and(|x| x.pass && x.evaluations > 0), "{c}");
    }
}

#[test]
fn reconstructions_match_the_grid_values() {
    let sc = compliant();
    let sol = run(&sc, HamiltonianKind::Ccs, 0.05, 1e-3);
    let grid = sol.disc.grid;
    let dt = sol.disc.dt();
    for n in [0usize, 7, 50] {
        let f = sol.field(n).unwrap();
        for i in [f.start + 3, f.start + f.len() / 2] {
            let u = sol.reconstruct_u(n as f64 * dt, grid.node(i)).unwrap();
            assert_eq!(u, f.values[i - f.start]);
        }
    }
    assert_eq!(sol.reconstruct_i(0.0).unwrap(), sol.multipliers[0]);
    assert_eq!(sol.reconstruct_i(3.5 * dt).unwrap(), sol.multipliers[3]);
    assert!(matches!(sol.reconstruct_u(1.0, 0.0), Err(Error::Range { .. })));
    assert!(matches!(sol.reconstruct_i(-0.1), Err(Error::Range { .. })));
}

#[test]
fn reconstruction_is_affine_in_time_within_a_step() {
    let sc = compliant();
    let sol = run(&sc, HamiltonianKind::Ccs, 0.05, 1e-3);
    let dt = sol.disc.dt();
    let x = sol.disc.grid.node(sol.disc.grid.n_points / 2 + 3);
    for n in [2usize, 20] {
        let t0 = n as f64 * dt;
        let a = sol.reconstruct_u(t0 + 0.25 * dt, x).unwrap();
        let m = sol.reconstruct_u(t0 + 0.5 * dt, x).unwrap();
        let b = sol.reconstruct_u(t0 + 0.75 * dt, x).unwrap();
        assert!((m - 0.5 * (a + b)).abs() < 1e-13, "{a} {m} {b}");
    }
}

#[test]
fn replayed_audit_matches_the_inline_one() {
    let sc = compliant();
    let sol = run(&sc, HamiltonianKind::Ccs, 0.1, 1e-3);
    let replay = audit_invariants(&sol, &sol.budget);
    for c in audit::SEVEN_CHECKS {
        assert_eq!(replay.get(c).map(|x| x.pass), sol.audit.get(c).map(|x| x.pass), "{c}");
    }
}

#[test]
fn convex_non_flat_scheme_can_lower_the_multiplier() {
    let sc = paper51(InitialData::NotConv);
    let sol = run(&sc, HamiltonianKind::P1, 0.5, 1e-2);
    let worst = sol.multipliers.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::min);
    assert!(worst < 0.0);
    // still within the jump budget
    assert!(worst >= -sol.budget.kappa * sol.disc.dt());
}

#[test]
fn undersized_slope_bound_overflows_with_location() {
    let sc = builtin_scenario("oscillatory(3)", &ScenarioOptions::default()).unwrap();
    let s = scheme(&sc, HamiltonianKind::P1, 0.2, 1e-4).with_options(HjOptions {
        storage: Storage::FinalOnly,
        ..Default::default()
    });
    match s.run() {
        Err(Error::SlopeOverflow { step: Some(n), node: Some(_), .. }) => assert!(n > 1),
        other => panic!("expected a located slope overflow, got {other:?}"),
    }
}

#[test]
fn moving_optimum_drives_the_multiplier_negative() {
    let sc = builtin_scenario("oscillatory(3)", &ScenarioOptions::default()).unwrap();
    let mut spec = SchemeSpec::default().with_horizon(1.5).with_dt(1e-3);
    spec.slope_cap = 3.0;
    let setup = spec.build(&sc).unwrap();
    let sol = HjScheme::new(sc, setup.disc, setup.hamiltonian).run().unwrap();
    assert!(sol.min_multiplier().unwrap() < 0.0);
}

fn ordered_pair(steps_u: &[f64], steps_g: &[f64], g0: f64, dx: f64) -> (Vec<f64>, Vec<f64>) {
    let mut u = vec![0.0];
    let mut g = vec![g0.abs()];
    for (a, b) in steps_u.iter().zip(steps_g) {
        u.push(u.last().unwrap() + dx * a);
        g.push((g.last().unwrap() + dx * b).max(0.0));
    }
    let w = u.iter().zip(&g).map(|(a, b)| a + b).collect();
    (u, w)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn explicit_update_is_monotone_and_non_expansive(
        slopes in prop::collection::vec((-0.9f64..0.9, -0.9f64..0.9), 400),
        g0 in 0.0f64..0.5,
        level in 1.0f64..2.0,
        ccs in any::<bool>(),
    ) {
        let sc = compliant();
        let kind = if ccs { HamiltonianKind::Ccs } else { HamiltonianKind::P1 };
        let s = scheme(&sc, kind, 0.25, 1e-3);
        let init = s.initial_field();
        let dx = s.disc.grid.dx;
        let n = init.len();
        let (su, sg): (Vec<f64>, Vec<f64>) = slopes[..n - 1].iter().copied().unzip();
        let (u, w) = ordered_pair(&su, &sg, g0, dx);
        let sup_in = u.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let lip = |v: &[f64]| v.windows(2).map(|p| (p[1] - p[0]).abs() / dx).fold(0.0, f64::max);
        let (lu, lw) = (lip(&u), lip(&w));
        let a = s.explicit_update(&Field::new(init.start, u), level, 0.1).unwrap();
        let b = s.explicit_update(&Field::new(init.start, w), level, 0.1).unwrap();
        // the two end nodes use extrapolated ghosts and are not covered
        for k in 1..a.len() - 1 {
            prop_assert!(a.values[k] <= b.values[k] + 1e-13);
            prop_assert!((a.values[k] - b.values[k]).abs() <= sup_in + 1e-13);
        }
        let grow = 1e-3 * sc.constants.k + 1e-9;
        prop_assert!(lip(&a.values[1..a.len() - 1]) <= lu + grow);
        prop_assert!(lip(&b.values[1..b.len() - 1]) <= lw + grow);
    }
}
