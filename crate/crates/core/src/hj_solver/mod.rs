//! Explicit monotone scheme for the constrained Hamilton-Jacobi problem.
//!
//! Each step applies `u_i - dt·b(x_i, I)·H(p_i, q_i) - dt·R(t, x_i, I)` and
//! picks the multiplier `I` so that the new minimum is zero.

pub mod audit;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{slopes, Field};
use crate::hamiltonians::DiscreteHamiltonian;
use crate::model::{Discretization, GrowthForm, ModelScenario, TraitGrid};
use crate::roots::{solve_increasing, BracketSettings};
use crate::stencil::{BirthTerm, GrowthTerm, MultiplierStencil};

pub use audit::{Auditor, CheckSummary, InvariantBudget, InvariantReport};

/// What to do when the discrete slopes leave the working box `[-S, S]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopePolicy {
    /// Keep going and record the first excursion with a retry hint.
    #[default]
    Record,
    /// Stop with a slope-overflow error at the first excursion.
    Abort,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Storage {
    #[default]
    All,
    /// Every k-th field plus the last one.
    Stride(usize),
    FinalOnly,
}

impl Storage {
    pub fn keeps(self, n: usize, last: usize) -> bool {
        n == 0
            || n == last
            || match self {
                Storage::All => true,
                Storage::Stride(k) => k > 0 && n % k == 0,
                Storage::FinalOnly => false,
            }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HjOptions {
    pub slope_policy: SlopePolicy,
    pub storage: Storage,
    /// Root tolerance; `None` uses `1e-12·max(1, |I_M|)`.
    pub tol_root: Option<f64>,
    pub max_doublings: usize,
    /// Run at most this many steps.
    pub step_limit: Option<usize>,
    /// Seed the root solve with the previous multiplier when the multiplier
    /// is known to be non-decreasing.
    pub monotone_start: bool,
}

impl Default for HjOptions {
    fn default() -> Self {
        Self {
            slope_policy: SlopePolicy::Record,
            storage: Storage::All,
            tol_root: None,
            max_doublings: 60,
            step_limit: None,
            monotone_start: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub n: usize,
    pub t: f64,
    pub multiplier: f64,
    pub min_u: f64,
    pub argmin_x: f64,
    /// `S` minus the largest slope of the new field.
    pub lip_margin: f64,
    /// `|φ(I)|` at the accepted multiplier.
    pub residual: f64,
    /// Amount subtracted to put the minimum at zero.
    pub shift: f64,
    pub evaluations: usize,
}

/// First time the input slopes exceeded the working bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopeExcursion {
    pub step: usize,
    pub t: f64,
    pub node: usize,
    pub slope: f64,
    /// Retry guess `L_in + (S - L_in)·T/t_fail`.
    pub suggested_cap: f64,
}

/// One accepted constraint solve.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintStep {
    pub multiplier: f64,
    pub field: Field,
    pub residual: f64,
    pub shift: f64,
    pub evaluations: usize,
}

/// Frozen per-step data handed to the constraint solve.
pub(crate) struct Prepared {
    pub stencil: MultiplierStencil,
    pub out_start: usize,
    /// Hamiltonian values of the input field on the output nodes.
    pub h_values: Vec<f64>,
    pub max_slope: f64,
    pub max_slope_node: usize,
}

/// A one-step operator `u ↦ (m ↦ update(u, m))`. Nodes where
/// `b(x_i, orient) < 0` use the mirrored stencil so the update stays monotone.
pub(crate) trait StepOperator {
    fn prepare(&self, u: &Field, t_next: f64, dt: f64, orient: f64) -> Result<Prepared>;
}

/// Multiplier at which the sign of `b` picks the stencil orientation: the
/// previous multiplier, or the middle of `[I_m, I_M]` before the first step.
pub(crate) fn orientation_multiplier(scenario: &ModelScenario, previous: Option<f64>) -> f64 {
    previous.unwrap_or(0.5 * (scenario.constants.i_min + scenario.constants.i_max))
}

/// The scheme's operator built on a discrete Hamiltonian.
pub(crate) struct HamiltonianOperator<'a> {
    pub scenario: &'a ModelScenario,
    pub ham: &'a DiscreteHamiltonian,
    pub grid: TraitGrid,
}

impl StepOperator for HamiltonianOperator<'_> {
    fn prepare(&self, u: &Field, t_next: f64, dt: f64, orient: f64) -> Result<Prepared> {
        let sl = slopes(u, self.grid.boundary_mode, self.grid.dx);
        let n = sl.left.len();
        let mut h_values = Vec::with_capacity(n);
        let mut max_slope = 0.0f64;
        let mut max_slope_node = sl.out_start;
        for k in 0..n {
            let (p, q) = (sl.left[k], sl.right[k]);
            let s = p.abs().max(q.abs());
            if s > max_slope {
                max_slope = s;
                max_slope_node = sl.out_start + k;
            }
            let x = self.grid.node(sl.out_start + k);
            let h = if self.scenario.b(x, orient) < 0.0 {
                self.ham.eval_unchecked(q, p)
            } else {
                self.ham.eval_unchecked(p, q)
            };
            if !h.is_finite() {
                return Err(Error::SlopeOverflow {
                    slope: s,
                    cap: self.ham.cap().unwrap_or(f64::INFINITY),
                    step: None,
                    node: Some(sl.out_start + k),
                });
            }
            h_values.push(h);
        }
        let xs: Vec<f64> = (0..n).map(|k| self.grid.node(sl.out_start + k)).collect();
        let extra = match self.scenario.growth_form {
            GrowthForm::Population => self.ham.quadrature().mass(),
            GrowthForm::Direct => 0.0,
        };
        let coefs: Vec<f64> = h_values.iter().map(|&h| dt * (h + extra)).collect();
        let base = u.values[sl.offset..sl.offset + n].to_vec();
        let stencil = MultiplierStencil::new(
            base,
            BirthTerm::pointwise(&self.scenario.birth, &xs, &coefs),
            GrowthTerm::new(self.scenario, t_next, &xs, dt),
        );
        Ok(Prepared {
            stencil,
            out_start: sl.out_start,
            h_values,
            max_slope,
            max_slope_node,
        })
    }
}

#[derive(Clone, Debug)]
pub struct HjSolution {
    pub scenario: ModelScenario,
    pub hamiltonian: DiscreteHamiltonian,
    pub disc: Discretization,
    pub options: HjOptions,
    /// Stored fields `u^n` keyed by step index.
    pub fields: BTreeMap<usize, Field>,
    /// `I^1, ..., I^N` (index `n - 1` holds `I^n`).
    pub multipliers: Vec<f64>,
    pub trace: Vec<StepRecord>,
    pub audit: InvariantReport,
    pub budget: InvariantBudget,
    pub slope_excursion: Option<SlopeExcursion>,
    /// Report-only conditions (technical step restrictions, full CFL).
    pub warnings: Vec<String>,
}

impl HjSolution {
    pub fn completed_steps(&self) -> usize {
        self.multipliers.len()
    }

    pub fn final_field(&self) -> &Field {
        self.fields
            .values()
            .next_back()
            .expect("initial field is always stored")
    }

    pub fn field(&self, n: usize) -> Option<&Field> {
        self.fields.get(&n)
    }

    /// Index windows of the stored fields.
    pub fn active_ranges(&self) -> BTreeMap<usize, std::ops::Range<usize>> {
        self.fields.iter().map(|(&n, f)| (n, f.range())).collect()
    }

    pub fn min_multiplier(&self) -> Option<f64> {
        self.multipliers.iter().copied().reduce(f64::min)
    }

    /// Piecewise-constant multiplier: `I^{n+1}` on `(t^n, t^{n+1}]`, and
    /// `I^1` at `t = 0`.
    pub fn reconstruct_i(&self, t: f64) -> Result<f64> {
        let time = self.disc.time;
        let steps = self.completed_steps();
        let t_end = time.t(steps);
        if steps == 0 || !(0.0..=t_end).contains(&t) {
            return Err(Error::Range {
                what: "reconstruction time",
                value: t,
                lo: 0.0,
                hi: t_end,
            });
        }
        Ok(self.multipliers[self.interval_of(t).min(steps - 1)])
    }

    /// Index `n` with `t ∈ (t^n, t^{n+1}]`; `0` for `t = 0`.
    fn interval_of(&self, t: f64) -> usize {
        let time = self.disc.time;
        let mut n = (t / time.dt()).ceil() as usize;
        n = n.clamp(1, time.n_steps);
        while n > 1 && t <= time.t(n - 1) {
            n -= 1;
        }
        while n < time.n_steps && t > time.t(n) {
            n += 1;
        }
        n - 1
    }

    /// `u_Δt(t, x)`: one sub-step of length `s = t - t^n` from the stored
    /// `u^n`, with linear interpolation in `x`. Grid times return the stored
    /// field directly.
    pub fn reconstruct_u(&self, t: f64, x: f64) -> Result<f64> {
        let time = self.disc.time;
        let steps = self.completed_steps();
        let t_end = time.t(steps);
        if !(0.0..=t_end).contains(&t) {
            return Err(Error::Range {
                what: "reconstruction time",
                value: t,
                lo: 0.0,
                hi: t_end,
            });
        }
        let grid = self.disc.grid;
        if t == 0.0 {
            return Ok(self.fields[&0].interpolate(&grid, x));
        }
        let n = self.interval_of(t);
        if t == time.t(n + 1) {
            if let Some(f) = self.fields.get(&(n + 1)) {
                return Ok(f.interpolate(&grid, x));
            }
        }
        let u = self.fields.get(&n).ok_or_else(|| {
            Error::Configuration(format!("field at step {n} was not stored"))
        })?;
        let s = t - time.t(n);
        let m = self.multipliers[n];
        let op = HamiltonianOperator {
            scenario: &self.scenario,
            ham: &self.hamiltonian,
            grid,
        };
        let orient = orientation_multiplier(&self.scenario, n.checked_sub(1).map(|k| self.multipliers[k]));
        let prep = op.prepare(u, t, s, orient)?;
        let sub = Field::new(prep.out_start, prep.stencil.values(m));
        Ok(sub.interpolate(&grid, x))
    }
}

/// Scheme configuration: scenario, grids, Hamiltonian and solver options.
#[derive(Clone, Debug)]
pub struct HjScheme {
    pub scenario: ModelScenario,
    pub disc: Discretization,
    pub hamiltonian: DiscreteHamiltonian,
    pub options: HjOptions,
}

impl HjScheme {
    pub fn new(scenario: ModelScenario, disc: Discretization, hamiltonian: DiscreteHamiltonian) -> Self {
        Self {
            scenario,
            disc,
            hamiltonian,
            options: HjOptions::default(),
        }
    }

    pub fn with_options(mut self, options: HjOptions) -> Self {
        self.options = options;
        self
    }

    pub fn tol_root(&self) -> f64 {
        self.options
            .tol_root
            .unwrap_or(1e-12 * self.scenario.constants.i_max.abs().max(1.0))
    }

    fn operator(&self) -> HamiltonianOperator<'_> {
        HamiltonianOperator {
            scenario: &self.scenario,
            ham: &self.hamiltonian,
            grid: self.disc.grid,
        }
    }

    /// Initial field `u^0` with its grid minimum moved to zero.
    pub fn initial_field(&self) -> Field {
        let mut u = Field::sample(&self.disc.grid, 0, |x| self.scenario.u_init(x));
        u.normalize_min();
        u
    }

    /// `u^{n+1, I}` before the constraint is applied.
    /// Stencils are oriented by the sign of `b(·, multiplier)`.
    pub fn explicit_update(&self, u: &Field, multiplier: f64, t_next: f64) -> Result<Field> {
        let prep = self.operator().prepare(u, t_next, self.disc.dt(), multiplier)?;
        Ok(Field::new(prep.out_start, prep.stencil.values(multiplier)))
    }

    /// Minimum of the explicit update at `multiplier`.
    pub fn phi(&self, u: &Field, t_next: f64, multiplier: f64) -> Result<f64> {
        let prep = self.operator().prepare(u, t_next, self.disc.dt(), multiplier)?;
        Ok(prep.stencil.min_value(multiplier).0)
    }

    fn bracket(&self) -> BracketSettings {
        let c = &self.scenario.constants;
        BracketSettings {
            lo: c.i_min - 2.0,
            hi: c.i_max + 1.0,
            floor: self.scenario.multiplier_floor,
            max_doublings: self.options.max_doublings,
            tol: self.tol_root(),
        }
    }

    fn uses_monotone_start(&self) -> bool {
        self.options.monotone_start
            && self.hamiltonian.setting().is_flat()
            && self.scenario.time_independent_growth
    }

    /// Multiplier and constrained field for one step.
    pub fn solve_constraint(
        &self,
        u: &Field,
        t_next: f64,
        previous: Option<f64>,
    ) -> Result<ConstraintStep> {
        let orient = orientation_multiplier(&self.scenario, previous);
        let prep = self.operator().prepare(u, t_next, self.disc.dt(), orient)?;
        let start = previous.filter(|_| self.uses_monotone_start());
        solve_prepared(&prep, &self.bracket(), start)
    }

    pub fn run(&self) -> Result<HjSolution> {
        run_with(self, &self.operator())
    }
}

fn solve_prepared(
    prep: &Prepared,
    bracket: &BracketSettings,
    start: Option<f64>,
) -> Result<ConstraintStep> {
    let root = solve_increasing(|m| prep.stencil.min_value(m).0, bracket, start)?;
    let mut field = Field::new(prep.out_start, prep.stencil.values(root.x));
    let shift = field.normalize_min();
    if !shift.is_finite() {
        return Err(Error::NonFinite {
            what: "updated field",
            step: 0,
        });
    }
    Ok(ConstraintStep {
        multiplier: root.x,
        field,
        residual: root.value.abs(),
        shift,
        evaluations: root.evaluations,
    })
}

/// Time loop shared by every operator that fits the multiplier stencil.
pub(crate) fn run_with<O: StepOperator>(scheme: &HjScheme, op: &O) -> Result<HjSolution> {
    let scenario = &scheme.scenario;
    let disc = scheme.disc;
    let grid = disc.grid;
    let time = disc.time;
    let dt = time.dt();
    let opts = scheme.options;
    let slope_cap = disc.slope_cap;
    let mass = scheme.hamiltonian.quadrature().mass();
    let steps = opts.step_limit.map_or(time.n_steps, |k| k.min(time.n_steps));
    let tol = scheme.tol_root();
    let bracket = scheme.bracket();
    let monotone = scheme.uses_monotone_start();

    let budget = InvariantBudget::new(scenario, &disc, &scheme.hamiltonian, tol);
    let mut auditor = Auditor::new(
        budget.clone(),
        grid,
        scenario.time_independent_growth,
    );

    let mut u = scheme.initial_field();
    let mut fields = BTreeMap::new();
    let mut multipliers = Vec::with_capacity(steps);
    let mut trace = Vec::with_capacity(steps);
    let mut excursion = None;
    let mut previous: Option<f64> = None;

    for n in 0..steps {
        let t = time.t(n);
        let t_next = time.t(n + 1);
        let orient = orientation_multiplier(scenario, previous);
        let prep = op.prepare(&u, t_next, dt, orient).map_err(|e| e.at_step(n))?;

        if prep.max_slope > slope_cap && excursion.is_none() {
            if opts.slope_policy == SlopePolicy::Abort {
                return Err(Error::SlopeOverflow {
                    slope: prep.max_slope,
                    cap: slope_cap,
                    step: Some(n),
                    node: Some(prep.max_slope_node),
                });
            }
            let l_in = scenario.constants.lip_init;
            let t_fail = t.max(dt);
            excursion = Some(SlopeExcursion {
                step: n,
                t,
                node: prep.max_slope_node,
                slope: prep.max_slope,
                suggested_cap: l_in + (slope_cap - l_in) * time.horizon / t_fail,
            });
        }

        auditor.observe_field(
            n,
            t,
            &u,
            Some((prep.out_start, &prep.h_values)),
            previous,
            scenario,
            mass,
        );
        if opts.storage.keeps(n, steps) {
            fields.insert(n, u.clone());
        }

        let start = previous.filter(|_| monotone);
        let step = solve_prepared(&prep, &bracket, start).map_err(|e| e.at_step(n + 1))?;
        auditor.observe_multiplier(n + 1, previous, step.multiplier, step.residual, dt);

        let (min_u, argmin) = step.field.min_with_index();
        trace.push(StepRecord {
            n: n + 1,
            t: t_next,
            multiplier: step.multiplier,
            min_u,
            argmin_x: grid.node(argmin),
            lip_margin: slope_cap - step.field.max_slope(grid.dx),
            residual: step.residual,
            shift: step.shift,
            evaluations: step.evaluations,
        });
        multipliers.push(step.multiplier);
        previous = Some(step.multiplier);
        u = step.field;
    }

    let t_last = time.t(steps);
    let last_h = op
        .prepare(&u, t_last, dt, orientation_multiplier(scenario, previous))
        .ok();
    auditor.observe_field(
        steps,
        t_last,
        &u,
        last_h.as_ref().map(|p| (p.out_start, p.h_values.as_slice())),
        previous,
        scenario,
        mass,
    );
    fields.insert(steps, u);

    Ok(HjSolution {
        scenario: scenario.clone(),
        hamiltonian: scheme.hamiltonian.clone(),
        disc,
        options: opts,
        fields,
        multipliers,
        trace,
        audit: auditor.finish(),
        warnings: technical_warnings(&budget, &scheme.hamiltonian, &disc, scenario),
        budget,
        slope_excursion: excursion,
    })
}

/// Report-only step restrictions of the convergence theory.
fn technical_warnings(
    budget: &InvariantBudget,
    ham: &DiscreteHamiltonian,
    disc: &Discretization,
    scenario: &ModelScenario,
) -> Vec<String> {
    let mut out = Vec::new();
    let dx = disc.dx();
    let horizon = disc.time.horizon;
    let c = &scenario.constants;
    if !budget.is_finite() {
        out.push("invariant budget is not finite for this run".to_string());
    }
    let l_inf = 14.0 * (c.lip_init + c.k * horizon) + 1.0;
    match ham.subgradient_bound(l_inf) {
        Ok(v) if disc.dt() * c.b_max * v <= dx => {}
        Ok(v) => out.push(format!(
            "full CFL dt·C(L∞) ≤ dx not met: L∞ = {l_inf:.3}, dt·C = {:.3e} > dx = {dx:.3e}",
            disc.dt() * c.b_max * v
        )),
        Err(_) => out.push(format!("C(L∞) is not finite for L∞ = {l_inf:.3}")),
    }
    let w_end = budget.w(horizon);
    let smooth_cap = 1.0 / (c.k * w_end * budget.c_final);
    if !(dx <= smooth_cap) {
        out.push(format!("dx = {dx:.3e} exceeds 1/(K·w_T·C) = {smooth_cap:.3e}"));
    }
    let exp_cap = 4.0 / (horizon.exp() + 1.0).powi(2);
    if dx > exp_cap {
        out.push(format!("dx = {dx:.3e} exceeds 4/(e^T+1)² = {exp_cap:.3e}"));
    }
    out
}

pub fn run_hj(
    scenario: &ModelScenario,
    disc: &Discretization,
    hamiltonian: &DiscreteHamiltonian,
) -> Result<HjSolution> {
    HjScheme::new(scenario.clone(), *disc, hamiltonian.clone()).run()
}

/// Replays the stored fields of `sol` against `budget`.
pub fn audit_invariants(sol: &HjSolution, budget: &InvariantBudget) -> InvariantReport {
    let grid = sol.disc.grid;
    let time = sol.disc.time;
    let mass = sol.hamiltonian.quadrature().mass();
    let mut auditor = Auditor::new(
        budget.clone(),
        grid,
        sol.scenario.time_independent_growth,
    );
    let op = HamiltonianOperator {
        scenario: &sol.scenario,
        ham: &sol.hamiltonian,
        grid,
    };
    for (&n, u) in &sol.fields {
        let t = time.t(n);
        let multiplier = n.checked_sub(1).map(|k| sol.multipliers[k]);
        let orient = orientation_multiplier(&sol.scenario, multiplier);
        let prep = op.prepare(u, t, time.dt(), orient).ok();
        auditor.observe_field(
            n,
            t,
            u,
            prep.as_ref().map(|p| (p.out_start, p.h_values.as_slice())),
            multiplier,
            &sol.scenario,
            mass,
        );
    }
    let mut previous = None;
    for rec in &sol.trace {
        auditor.observe_multiplier(rec.n, previous, rec.multiplier, rec.residual, time.dt());
        previous = Some(rec.multiplier);
    }
    auditor.finish()
}
