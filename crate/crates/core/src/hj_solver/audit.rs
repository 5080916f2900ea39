use std::collections::BTreeMap;

use serde::Serialize;

use crate::field::Field;
use crate::hamiltonians::{DiscreteHamiltonian, Setting};
use crate::model::{Discretization, ModelScenario, TraitGrid};

pub const LIPSCHITZ: &str = "lipschitz";
pub const COERCIVITY: &str = "coercivity";
pub const ARGMIN_GROWTH: &str = "argmin_growth";
pub const MULTIPLIER_BOUNDS: &str = "multiplier_bounds";
pub const JUMP_LOWER_BOUND: &str = "jump_lower_bound";
pub const SEMICONCAVITY: &str = "semiconcavity";
pub const HAMILTONIAN_LOWER_BOUND: &str = "hamiltonian_lower_bound";
pub const MULTIPLIER_MONOTONE: &str = "multiplier_monotone";
pub const CONSTRAINT_RESIDUAL: &str = "constraint_residual";

/// The seven qualitative properties of the scheme.
pub const SEVEN_CHECKS: [&str; 7] = [
    LIPSCHITZ,
    COERCIVITY,
    ARGMIN_GROWTH,
    MULTIPLIER_BOUNDS,
    JUMP_LOWER_BOUND,
    SEMICONCAVITY,
    HAMILTONIAN_LOWER_BOUND,
];

/// Bounds the scheme is expected to respect, derived from the scenario's
/// hypothesis constants and the discretization.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvariantBudget {
    pub lip_init: f64,
    pub k: f64,
    pub b_max: f64,
    pub i_min: f64,
    pub i_max: f64,
    pub a_lo: f64,
    pub a_hi: f64,
    pub b_lo: f64,
    pub b_hi: f64,
    pub init_curvature: f64,
    pub gamma: f64,
    pub beta: f64,
    pub kappa: f64,
    pub dx: f64,
    pub horizon: f64,
    /// `H(a̲, -a̲)` and `H(-a̅, a̅)` for the coercivity offsets.
    pub h_lower_envelope: f64,
    pub h_upper_envelope: f64,
    /// `C_Hη(Lip_x(T))` with the scenario's birth bound.
    pub c_final: f64,
    pub setting: Setting,
    /// Tolerance used for the residual and argmin-growth checks.
    pub tol: f64,
}

impl InvariantBudget {
    pub fn new(
        scenario: &ModelScenario,
        disc: &Discretization,
        ham: &DiscreteHamiltonian,
        tol: f64,
    ) -> Self {
        let c = &scenario.constants;
        let horizon = disc.time.horizon;
        let l_end = c.lip_init + c.k * horizon;
        let bound = |l: f64| {
            ham.subgradient_bound(l)
                .map(|v| c.b_max * v)
                .unwrap_or(f64::INFINITY)
        };
        let h = |p: f64, q: f64| ham.eval(p, q).unwrap_or(f64::INFINITY);
        let gamma = c.k + c.b_max * (-h(-l_end, l_end)).max(h(l_end, -l_end));
        let beta = 4.0 * bound(l_end);
        let c_final = bound(l_end);
        let mut budget = Self {
            lip_init: c.lip_init,
            k: c.k,
            b_max: c.b_max,
            i_min: c.i_min,
            i_max: c.i_max,
            a_lo: c.a_lo,
            a_hi: c.a_hi,
            b_lo: c.b_lo,
            b_hi: c.b_hi,
            init_curvature: c.init_curvature,
            gamma,
            beta,
            kappa: 0.0,
            dx: disc.grid.dx,
            horizon,
            h_lower_envelope: h(c.a_lo, -c.a_lo),
            h_upper_envelope: h(-c.a_hi, c.a_hi),
            c_final,
            setting: ham.setting(),
            tol,
        };
        budget.kappa = if budget.setting.is_flat() {
            c.k * c.k
        } else {
            c.k * c.k + c.k * budget.dx * budget.w(horizon) * c_final
        };
        budget
    }

    pub fn lip_x(&self, t: f64) -> f64 {
        self.lip_init + t * self.k
    }

    /// Semi-concavity budget `e^{βt}(γt + sup u_in'')`.
    pub fn w(&self, t: f64) -> f64 {
        if t == 0.0 {
            return self.init_curvature;
        }
        (self.beta * t).exp() * (self.gamma * t + self.init_curvature)
    }

    pub fn b_lo_t(&self, t: f64) -> f64 {
        self.b_lo - t * self.b_max * self.h_lower_envelope - t * self.k
    }

    pub fn b_hi_t(&self, t: f64) -> f64 {
        self.b_hi - t * self.b_max * self.h_upper_envelope + t * self.k
    }

    pub fn is_finite(&self) -> bool {
        [
            self.gamma,
            self.beta,
            self.kappa,
            self.c_final,
            self.h_lower_envelope,
            self.h_upper_envelope,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckSummary {
    pub pass: bool,
    /// Smallest observed `bound - value`; `None` when never evaluated.
    pub worst_margin: Option<f64>,
    pub first_violation_step: Option<usize>,
    pub violations: usize,
    pub evaluations: usize,
}

impl Default for CheckSummary {
    fn default() -> Self {
        Self {
            pass: true,
            worst_margin: None,
            first_violation_step: None,
            violations: 0,
            evaluations: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct InvariantReport {
    pub checks: BTreeMap<String, CheckSummary>,
    pub budget_finite: bool,
    pub max_shift: f64,
}

impl InvariantReport {
    /// Records a margin; values below `-slack` count as violations.
    pub fn record(&mut self, name: &str, step: usize, margin: f64, slack: f64) {
        let entry = self.checks.entry(name.to_string()).or_default();
        entry.evaluations += 1;
        let m = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        entry.worst_margin = Some(entry.worst_margin.map_or(m, |w| w.min(m)));
        if m < -slack {
            entry.violations += 1;
            entry.pass = false;
            entry.first_violation_step.get_or_insert(step);
        }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.values().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&CheckSummary> {
        self.checks.get(name)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|(_, c)| !c.pass)
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

fn rel_slack(bound: f64) -> f64 {
    1e-12 * bound.abs().max(1.0)
}

/// Incremental auditor fed by the time loop.
#[derive(Clone, Debug)]
pub struct Auditor {
    budget: InvariantBudget,
    grid: TraitGrid,
    check_monotone: bool,
    report: InvariantReport,
}

impl Auditor {
    pub fn new(budget: InvariantBudget, grid: TraitGrid, time_independent: bool) -> Self {
        let check_monotone = budget.setting.is_flat() && time_independent;
        let report = InvariantReport {
            budget_finite: budget.is_finite(),
            ..Default::default()
        };
        Self {
            budget,
            grid,
            check_monotone,
            report,
        }
    }

    pub fn budget(&self) -> &InvariantBudget {
        &self.budget
    }

    /// Field checks for `u^n`. `h` holds the numerical Hamiltonian of `u^n`
    /// on the nodes starting at the given index; `multiplier` is `I^n` for `n >= 1`.
    #[allow(clippy::too_many_arguments)]
    pub fn observe_field(
        &mut self,
        n: usize,
        t: f64,
        u: &Field,
        h: Option<(usize, &[f64])>,
        multiplier: Option<f64>,
        scenario: &ModelScenario,
        mass: f64,
    ) {
        let b = &self.budget;
        let dx = self.grid.dx;
        let v = &u.values;

        let lip = b.lip_x(t) * dx;
        let max_jump = v.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        self.report.record(LIPSCHITZ, n, lip - max_jump, rel_slack(lip));

        let (lo_off, hi_off) = (b.b_lo_t(t), b.b_hi_t(t));
        let mut coercive = f64::INFINITY;
        for (k, &val) in v.iter().enumerate() {
            let ax = self.grid.node(u.start + k).abs();
            coercive = coercive
                .min(val - (b.a_lo * ax + lo_off))
                .min(b.a_hi * ax + hi_off - val);
        }
        self.report.record(COERCIVITY, n, coercive, 1e-12);

        if b.setting.is_convex() {
            let w = b.w(t);
            let curv = v
                .windows(3)
                .map(|s| (s[0] - 2.0 * s[1] + s[2]) / (dx * dx))
                .fold(f64::NEG_INFINITY, f64::max);
            self.report.record(SEMICONCAVITY, n, w - curv, rel_slack(w));
        }

        if let Some((_, hv)) = h {
            let min_h = hv.iter().copied().fold(f64::INFINITY, f64::min);
            let floor = if b.setting.is_flat() {
                0.0
            } else {
                -dx * b.c_final * b.w(t) / b.b_max
            };
            self.report.record(HAMILTONIAN_LOWER_BOUND, n, min_h - floor, 1e-12);
        }

        if let Some(i) = multiplier {
            self.report.record(
                MULTIPLIER_BOUNDS,
                n,
                (i - (b.i_min - 1.0)).min(b.i_max - i),
                rel_slack(b.i_max),
            );
            let mut worst = f64::INFINITY;
            for (k, &val) in v.iter().enumerate() {
                if val == 0.0 {
                    let x = self.grid.node(u.start + k);
                    worst = worst.min(scenario.hj_rate(t, x, i, mass));
                }
            }
            if worst.is_finite() {
                self.report.record(ARGMIN_GROWTH, n, worst, b.tol);
            }
        }
    }

    /// Checks on the accepted multiplier `I^{n}` given `I^{n-1}`.
    pub fn observe_multiplier(
        &mut self,
        n: usize,
        previous: Option<f64>,
        current: f64,
        residual: f64,
        dt: f64,
    ) {
        self.report
            .record(CONSTRAINT_RESIDUAL, n, self.budget.tol - residual.abs(), 0.0);
        self.report.max_shift = self.report.max_shift.max(residual.abs());
        if let Some(p) = previous {
            let delta = current - p;
            self.report.record(
                JUMP_LOWER_BOUND,
                n,
                delta + self.budget.kappa * dt,
                rel_slack(self.budget.kappa * dt),
            );
            if self.check_monotone {
                self.report.record(MULTIPLIER_MONOTONE, n, delta, 0.0);
            }
        }
    }

    pub fn finish(self) -> InvariantReport {
        self.report
    }
}
