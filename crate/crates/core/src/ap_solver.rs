//! Asymptotic-preserving scheme for the ε-dependent integral model in the
//! variable `v = -ε ln n`, and its ε → 0 limit.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{slopes, Field};
use crate::hamiltonians::{DiscreteHamiltonian, HamiltonianKind, KernelQuadrature};
use crate::hj_solver::{
    orientation_multiplier, run_with, HjOptions, HjScheme, HjSolution, Prepared, StepOperator,
    Storage,
};
use crate::model::{BirthRate, Discretization, GrowthForm, ModelScenario, TraitGrid};
use crate::stencil::{BirthTerm, GrowthTerm, MultiplierStencil};

/// Linear interpolation of `v` at `x`, extrapolated from the end segments.
pub fn interp_at(v: &Field, grid: &TraitGrid, x: f64) -> f64 {
    v.interpolate(grid, x)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApOptions {
    pub storage: Storage,
    /// Largest admissible exponent in the operator.
    pub exp_cap: f64,
    pub max_iterations: usize,
    pub max_doublings: usize,
    pub step_limit: Option<usize>,
    /// Offset `c` in `v^0 = u_init + c·ε`.
    pub initial_shift: f64,
}

impl Default for ApOptions {
    fn default() -> Self {
        Self {
            storage: Storage::All,
            exp_cap: 700.0,
            max_iterations: 200,
            max_doublings: 60,
            step_limit: None,
            initial_shift: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ApStepRecord {
    pub n: usize,
    pub t: f64,
    pub mass: f64,
    pub ln_mass: f64,
    pub min_v: f64,
    pub argmin_x: f64,
    /// `min_i(v_i - ε ln ψ_i)/ε`, factored out of the exponential sum.
    pub stab_shift: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct ApSolution {
    pub eps: f64,
    pub disc: Discretization,
    pub fields: BTreeMap<usize, Field>,
    /// `J^1, ..., J^N`.
    pub masses: Vec<f64>,
    pub ln_masses: Vec<f64>,
    /// `min v^n` for `n = 0..=N`.
    pub min_v: Vec<f64>,
    pub trace: Vec<ApStepRecord>,
    /// Largest `|ṽ_{i,k} - v_i| / (ε|z_k|)` over far-field terms.
    pub far_slope: f64,
    /// `Lip_x(T) = L_in + K·T`, the bound the far-field slopes should respect.
    pub far_slope_bound: f64,
}

/// Run-level ranges for the a-priori AP bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ApDiagnostics {
    pub mass_min: f64,
    pub mass_max: f64,
    /// Range of `min v^n / ε` over `n >= 1`.
    pub min_v_over_eps_min: f64,
    pub min_v_over_eps_max: f64,
    pub far_slope: f64,
    pub far_slope_bound: f64,
}

impl ApDiagnostics {
    pub fn far_slope_ok(&self) -> bool {
        self.far_slope <= self.far_slope_bound
    }

    /// `lo <= J^n <= hi` for every step.
    pub fn mass_within(&self, lo: f64, hi: f64) -> bool {
        self.mass_min >= lo && self.mass_max <= hi
    }
}

impl ApSolution {
    pub fn diagnostics(&self) -> ApDiagnostics {
        let range = |it: &mut dyn Iterator<Item = f64>| {
            it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
        };
        let (mass_min, mass_max) = range(&mut self.masses.iter().copied());
        let (vlo, vhi) = range(&mut self.min_v.iter().skip(1).map(|m| m / self.eps));
        ApDiagnostics {
            mass_min,
            mass_max,
            min_v_over_eps_min: vlo,
            min_v_over_eps_max: vhi,
            far_slope: self.far_slope,
            far_slope_bound: self.far_slope_bound,
        }
    }

    pub fn final_field(&self) -> &Field {
        self.fields.values().next_back().expect("initial field is always stored")
    }

    pub fn completed_steps(&self) -> usize {
        self.masses.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApStep {
    pub field: Field,
    pub mass: f64,
    pub ln_mass: f64,
    pub stab_shift: f64,
    pub iterations: usize,
    pub far_slope: f64,
}

/// Operator data for `M_ε^J` frozen at one input field.
struct EpsPrepared {
    stencil: MultiplierStencil,
    out_start: usize,
    far_slope: f64,
}

#[derive(Clone, Debug)]
pub struct ApScheme {
    pub scenario: ModelScenario,
    pub disc: Discretization,
    pub quad: Arc<KernelQuadrature>,
    pub eps: f64,
    pub options: ApOptions,
}

impl ApScheme {
    pub fn new(
        scenario: ModelScenario,
        disc: Discretization,
        quad: Arc<KernelQuadrature>,
        eps: f64,
    ) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::Configuration(format!("ε must be positive (got {eps})")));
        }
        Ok(Self {
            scenario,
            disc,
            quad,
            eps,
            options: ApOptions::default(),
        })
    }

    pub fn with_options(mut self, options: ApOptions) -> Self {
        self.options = options;
        self
    }

    pub fn initial_field(&self) -> Field {
        let mut v = Field::sample(&self.disc.grid, 0, |x| self.scenario.u_init(x));
        v.normalize_min();
        let c = self.options.initial_shift * self.eps;
        for x in &mut v.values {
            *x += c;
        }
        v
    }

    /// Builds `J ↦ M_ε^J(v) - dt·R(t_next, ·, J)`; with `with_growth = false`
    /// the growth term is left out.
    fn prepare(
        &self,
        v: &Field,
        t_next: f64,
        orient: f64,
        with_growth: bool,
    ) -> Result<EpsPrepared> {
        let grid = self.disc.grid;
        let dx = grid.dx;
        let dt = self.disc.dt();
        let eps = self.eps;
        let quad = &self.quad;
        let nk = quad.n_side() as isize;
        let sl = slopes(v, grid.boundary_mode, dx);
        let n = sl.left.len();
        let cap = self.options.exp_cap;

        let direct = self.scenario.growth_form == GrowthForm::Direct && with_growth;
        let xs: Vec<f64> = (0..n).map(|k| grid.node(sl.out_start + k)).collect();
        let weights: Vec<f64> = (-nk..=nk).map(|k| dt * quad.weight(k)).collect();
        // |k| <= near uses one-sided slopes, beyond that the interpolated field
        let near = ((dx / (eps * quad.dz())).floor().min(nk as f64)) as isize;
        let mut far_slope = 0.0f64;
        let mut powers = vec![[1.0f64; 4]; near as usize + 1];
        // x_i + ε z_k sits `shift + frac` cells from x_i
        let ratio = eps * quad.dz() / dx;
        let offsets: Vec<(isize, f64)> = (-nk..=nk)
            .map(|k| {
                let c = k as f64 * ratio;
                let shift = c.floor();
                (shift as isize, c - shift)
            })
            .collect();
        let vals = &v.values;

        // `sign(point)` orients the near field, `emit` consumes one row entry
        let mut rows = |sign: &dyn Fn(f64) -> f64,
                        emit: &mut dyn FnMut(usize, f64, f64, f64)|
         -> Result<()> {
            for k_out in 0..n {
                let i = sl.out_start + k_out;
                let xi = xs[k_out];
                let vi = v.values[sl.offset + k_out];
                let (left, right) = (sl.left[k_out], sl.right[k_out]);
                let worst = near as f64 * quad.dz() * left.abs().max(right.abs());
                if worst > cap || worst.is_nan() {
                    return Err(Error::Stability {
                        step: 0,
                        node: i,
                        exponent: worst,
                    });
                }
                // e^{-k dz right}, e^{-k dz left}, e^{k dz right}, e^{k dz left}
                let base = [
                    (-quad.dz() * right).exp(),
                    (-quad.dz() * left).exp(),
                    (quad.dz() * right).exp(),
                    (quad.dz() * left).exp(),
                ];
                for k in 1..=near as usize {
                    for c in 0..4 {
                        powers[k][c] = powers[k - 1][c] * base[c];
                    }
                }
                for k in -nk..=nk {
                    let z = quad.z(k);
                    let point = xi + eps * z;
                    let sg = sign(point);
                    let factor = if k.abs() <= near {
                        let forward = (k >= 0) != (sg < 0.0);
                        let p = &powers[k.unsigned_abs()];
                        match (k >= 0, forward) {
                            (true, true) => p[0],
                            (true, false) => p[1],
                            (false, true) => p[2],
                            (false, false) => p[3],
                        }
                    } else {
                        let (shift, frac) = offsets[(k + nk) as usize];
                        let j = (sl.offset + k_out) as isize + shift;
                        let vt = if j >= 0 && (j as usize) + 1 < vals.len() {
                            let j = j as usize;
                            vals[j] + frac * (vals[j + 1] - vals[j])
                        } else {
                            v.interpolate(&grid, point)
                        };
                        let d = vt - vi;
                        far_slope = far_slope.max((d / (eps * z)).abs());
                        let expo = -d / eps;
                        if expo > cap || expo.is_nan() {
                            return Err(Error::Stability {
                                step: 0,
                                node: i,
                                exponent: expo,
                            });
                        }
                        expo.exp()
                    };
                    emit(k_out, point, weights[(k + nk) as usize] * factor, sg);
                }
                if direct {
                    emit(k_out, xi, -dt * quad.mass(), sign(xi));
                }
            }
            Ok(())
        };

        let birth = match &self.scenario.birth {
            BirthRate::Separable {
                trait_factor,
                mass_factor,
                ..
            } => {
                let g = mass_factor(orient).signum();
                let mut totals = vec![0.0; n];
                rows(&|x| g * trait_factor(x), &mut |r, _, c, sg| totals[r] += c * sg * g)?;
                BirthTerm::factored(&self.scenario.birth, totals).expect("separable rate")
            }
            BirthRate::General { .. } => {
                let mut entries: Vec<Vec<(f64, f64)>> = vec![Vec::new(); n];
                rows(&|x| self.scenario.b(x, orient), &mut |r, x, c, _| entries[r].push((x, c)))?;
                BirthTerm::from_rows(&self.scenario.birth, entries)
            }
        };
        let growth = GrowthTerm::new(&self.scenario, t_next, &xs, if with_growth { dt } else { 0.0 });
        let base = v.values[sl.offset..sl.offset + n].to_vec();
        Ok(EpsPrepared {
            stencil: MultiplierStencil::new(base, birth, growth),
            out_start: sl.out_start,
            far_slope,
        })
    }

    /// `M_ε^J(v)` without the growth term.
    pub fn apply_m_eps(&self, v: &Field, mass: f64) -> Result<Field> {
        let prep = self.prepare(v, 0.0, mass, false)?;
        Ok(Field::new(prep.out_start, prep.stencil.values(mass)))
    }

    /// `J - dx·Σ ψ(x_i) exp(-(M_ε^J(v)_i - dt·R(t_next, x_i, J))/ε)`.
    pub fn phi_ap(&self, v: &Field, t_next: f64, mass: f64) -> Result<f64> {
        let prep = self.prepare(v, t_next, mass, true)?;
        let w = prep.stencil.values(mass);
        let psi = self.log_weights(prep.out_start, w.len());
        let Some(lse) = log_sum(&w, &psi, self.eps) else {
            return Ok(mass);
        };
        let ln_sum = self.disc.dx().ln() + lse.ln_sum - lse.min / self.eps;
        if ln_sum > self.options.exp_cap {
            return Err(Error::Stability {
                step: 0,
                node: prep.out_start + lse.argmin,
                exponent: ln_sum,
            });
        }
        Ok(mass - ln_sum.exp())
    }

    fn log_weights(&self, start: usize, len: usize) -> Vec<f64> {
        let grid = self.disc.grid;
        (start..start + len)
            .map(|i| {
                let p = self.scenario.psi(grid.node(i));
                if p > 0.0 { p.ln() } else { f64::NEG_INFINITY }
            })
            .collect()
    }

    /// One step: the mass `J^{n+1}` solves `ln J = ln(dx Σ ψ e^{-v^{n+1}/ε})`.
    pub fn step(&self, v: &Field, t_next: f64, previous: Option<f64>) -> Result<ApStep> {
        let orient = orientation_multiplier(&self.scenario, previous);
        let prep = self.prepare(v, t_next, orient, true)?;
        let psi = self.log_weights(prep.out_start, prep.stencil.len());
        let y0 = previous
            .filter(|j| *j > 0.0)
            .unwrap_or_else(|| orientation_multiplier(&self.scenario, None).max(1e-3))
            .ln();
        let root = solve_mass(&prep.stencil, &psi, self.eps, self.disc.dx().ln(), y0, &self.options)?;
        Ok(ApStep {
            field: Field::new(prep.out_start, root.values),
            mass: root.ln_mass.exp(),
            ln_mass: root.ln_mass,
            stab_shift: root.stab_shift,
            iterations: root.iterations,
            far_slope: prep.far_slope,
        })
    }

    pub fn run(&self) -> Result<ApSolution> {
        let time = self.disc.time;
        let grid = self.disc.grid;
        let steps = self
            .options
            .step_limit
            .map_or(time.n_steps, |k| k.min(time.n_steps));
        let mut v = self.initial_field();
        let mut fields = BTreeMap::new();
        let mut masses = Vec::with_capacity(steps);
        let mut ln_masses = Vec::with_capacity(steps);
        let mut min_v = vec![v.min_with_index().0];
        let mut trace = Vec::with_capacity(steps);
        let mut far_slope = 0.0f64;
        let mut previous = None;
        for n in 0..steps {
            if self.options.storage.keeps(n, steps) {
                fields.insert(n, v.clone());
            }
            let t_next = time.t(n + 1);
            let step = self.step(&v, t_next, previous).map_err(|e| e.at_step(n + 1))?;
            let (m, argmin) = step.field.min_with_index();
            trace.push(ApStepRecord {
                n: n + 1,
                t: t_next,
                mass: step.mass,
                ln_mass: step.ln_mass,
                min_v: m,
                argmin_x: grid.node(argmin),
                stab_shift: step.stab_shift,
                iterations: step.iterations,
            });
            far_slope = far_slope.max(step.far_slope);
            masses.push(step.mass);
            ln_masses.push(step.ln_mass);
            min_v.push(m);
            previous = Some(step.mass).filter(|j| *j > 0.0);
            v = step.field;
        }
        fields.insert(steps, v);
        Ok(ApSolution {
            eps: self.eps,
            disc: self.disc,
            fields,
            masses,
            ln_masses,
            min_v,
            trace,
            far_slope,
            far_slope_bound: self.scenario.constants.lip_init + self.scenario.constants.k * time.horizon,
        })
    }
}

struct LogSum {
    /// `min_i (w_i - ε ln ψ_i)`.
    min: f64,
    argmin: usize,
    /// `ln Σ_i exp(-(w_i - ε ln ψ_i - min)/ε)`.
    ln_sum: f64,
    weights: Vec<f64>,
}

/// Stabilized `Σ ψ_i e^{-w_i/ε}`; `None` when every weight vanishes.
fn log_sum(w: &[f64], ln_psi: &[f64], eps: f64) -> Option<LogSum> {
    let mut min = f64::INFINITY;
    let mut argmin = 0;
    for (i, (&wi, &lp)) in w.iter().zip(ln_psi).enumerate() {
        if lp == f64::NEG_INFINITY {
            continue;
        }
        let a = wi - eps * lp;
        if a < min {
            min = a;
            argmin = i;
        }
    }
    if !min.is_finite() {
        return None;
    }
    let weights: Vec<f64> = w
        .iter()
        .zip(ln_psi)
        .map(|(&wi, &lp)| {
            if lp == f64::NEG_INFINITY {
                0.0
            } else {
                (-(wi - eps * lp - min) / eps).exp()
            }
        })
        .collect();
    let ln_sum = weights.iter().sum::<f64>().ln();
    Some(LogSum {
        min,
        argmin,
        ln_sum,
        weights,
    })
}

struct MassRoot {
    ln_mass: f64,
    values: Vec<f64>,
    stab_shift: f64,
    iterations: usize,
}

/// Safeguarded Newton on `G(y) = ε(y - ln dx - ln S) + min_i(w_i - ε ln ψ_i)`,
/// `y = ln J`, which is increasing in `y`.
fn solve_mass(
    stencil: &MultiplierStencil,
    ln_psi: &[f64],
    eps: f64,
    ln_dx: f64,
    y0: f64,
    opts: &ApOptions,
) -> Result<MassRoot> {
    let mut iterations = 0usize;
    let mut eval = |y: f64| -> Result<(f64, f64, Vec<f64>, f64)> {
        iterations += 1;
        let j = y.exp();
        let (w, dw) = stencil.values_and_derivs(j);
        let Some(ls) = log_sum(&w, ln_psi, eps) else {
            return Ok((f64::INFINITY, 0.0, w, 0.0));
        };
        let g = eps * (y - ln_dx - ls.ln_sum) + ls.min;
        let total: f64 = ls.weights.iter().sum();
        let dmin: f64 = ls
            .weights
            .iter()
            .zip(&dw)
            .map(|(p, d)| p * d)
            .sum::<f64>()
            / total;
        let dg = eps + j * dmin;
        if g.is_nan() {
            return Err(Error::NonFinite {
                what: "mass equation",
                step: 0,
            });
        }
        Ok((g, dg, w, ls.min / eps))
    };

    let first = eval(y0)?;
    if first.0 == f64::INFINITY && first.1 == 0.0 {
        // no weight anywhere: the mass is exactly zero
        return Ok(MassRoot {
            ln_mass: f64::NEG_INFINITY,
            values: stencil.values(0.0),
            stab_shift: f64::INFINITY,
            iterations,
        });
    }

    // G(a) < 0 < G(b) once both ends are known
    let (mut a, mut b) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut y = y0;
    let mut cur = first;
    let mut expand = 1.0;
    let mut doublings = 0;
    let mut rounds = 0;
    let mut last_step = f64::INFINITY;
    loop {
        let g = cur.0;
        if g == 0.0 {
            break;
        }
        if g < 0.0 {
            a = y;
        } else {
            b = y;
        }
        let newton = y - g / cur.1;
        // a sub-ulp Newton correction may round onto a bracket end
        if cur.1 > 0.0 && (newton - y).abs() <= 1e-15 * y.abs().max(1.0) {
            break;
        }
        let bracketed = a.is_finite() && b.is_finite();
        // inside a bracket, Newton must at least halve the previous step
        let fast = !bracketed || (newton - y).abs() <= 0.5 * last_step;
        let ok = cur.1 > 0.0 && newton.is_finite() && newton > a && newton < b && fast;
        let next = if ok {
            newton
        } else if bracketed {
            0.5 * (a + b)
        } else {
            doublings += 1;
            if doublings > opts.max_doublings {
                return Err(Error::NoRoot {
                    step: 0,
                    lo: a.exp(),
                    hi: b.exp(),
                    doublings: opts.max_doublings,
                });
            }
            expand *= 2.0;
            if g > 0.0 { y - expand } else { y + expand }
        };
        if next == y || (b - a).is_finite() && (b - a) <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0) {
            break;
        }
        rounds += 1;
        if rounds > opts.max_iterations {
            return Err(Error::NonFinite {
                what: "mass iteration did not settle",
                step: 0,
            });
        }
        last_step = (next - y).abs();
        y = next;
        cur = eval(y)?;
    }
    let (_, _, values, shift) = cur;
    Ok(MassRoot {
        ln_mass: y,
        values,
        stab_shift: shift,
        iterations,
    })
}

/// `M_0^I(u)_i = u_i - dt·b(x_i, I)·Σ_k w_k e^{-z_k s_{i,k}}`, with the
/// right slope for `k >= 0` and the left slope for `k <= -1` (mirrored where
/// `b(x_i, orient) < 0`).
pub(crate) struct LimitOperator<'a> {
    pub scenario: &'a ModelScenario,
    pub quad: &'a KernelQuadrature,
    pub grid: TraitGrid,
}

impl LimitOperator<'_> {
    /// `Σ_k w_k e^{-z_k s}` with direct exponentials.
    fn kernel_sum(&self, left: f64, right: f64) -> f64 {
        let q = self.quad;
        let mut s = q.center_weight();
        for (j, &w) in q.side_weights().iter().enumerate() {
            let z = (j + 1) as f64 * q.dz();
            s += w * (-z * right).exp() + w * (z * left).exp();
        }
        s
    }
}

impl StepOperator for LimitOperator<'_> {
    fn prepare(&self, u: &Field, t_next: f64, dt: f64, orient: f64) -> Result<Prepared> {
        let sl = slopes(u, self.grid.boundary_mode, self.grid.dx);
        let n = sl.left.len();
        let mass = self.quad.mass();
        let mut sums = Vec::with_capacity(n);
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
            let sum = if self.scenario.b(x, orient) < 0.0 {
                self.kernel_sum(q, p)
            } else {
                self.kernel_sum(p, q)
            };
            if !sum.is_finite() {
                return Err(Error::SlopeOverflow {
                    slope: s,
                    cap: f64::INFINITY,
                    step: None,
                    node: Some(sl.out_start + k),
                });
            }
            sums.push(sum);
        }
        let xs: Vec<f64> = (0..n).map(|k| self.grid.node(sl.out_start + k)).collect();
        let coefs: Vec<f64> = match self.scenario.growth_form {
            GrowthForm::Population => sums.iter().map(|&s| dt * s).collect(),
            GrowthForm::Direct => sums.iter().map(|&s| dt * s - dt * mass).collect(),
        };
        let base = u.values[sl.offset..sl.offset + n].to_vec();
        Ok(Prepared {
            stencil: MultiplierStencil::new(
                base,
                BirthTerm::pointwise(&self.scenario.birth, &xs, &coefs),
                GrowthTerm::new(self.scenario, t_next, &xs, dt),
            ),
            out_start: sl.out_start,
            h_values: sums.iter().map(|&s| s - mass).collect(),
            max_slope,
            max_slope_node,
        })
    }
}

/// `M_0^I(u)`, the limit operator without the growth term.
pub fn apply_m_zero(
    scenario: &ModelScenario,
    quad: &KernelQuadrature,
    grid: &TraitGrid,
    u: &Field,
    multiplier: f64,
    dt: f64,
) -> Result<Field> {
    let op = LimitOperator {
        scenario,
        quad,
        grid: *grid,
    };
    let sl = slopes(u, grid.boundary_mode, grid.dx);
    let out = (0..sl.left.len())
        .map(|k| {
            let x = grid.node(sl.out_start + k);
            let b = scenario.b(x, multiplier);
            let (p, q) = (sl.left[k], sl.right[k]);
            let sum = if b < 0.0 { op.kernel_sum(q, p) } else { op.kernel_sum(p, q) };
            if !sum.is_finite() {
                return Err(Error::SlopeOverflow {
                    slope: p.abs().max(q.abs()),
                    cap: f64::INFINITY,
                    step: None,
                    node: Some(sl.out_start + k),
                });
            }
            Ok(u.values[sl.offset + k] - dt * b * sum)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Field::new(sl.out_start, out))
}

/// The ε → 0 limit scheme, run through the constrained time loop.
pub fn run_limit_scheme(
    scenario: &ModelScenario,
    disc: &Discretization,
    quad: Arc<KernelQuadrature>,
    options: HjOptions,
) -> Result<HjSolution> {
    let ham = DiscreteHamiltonian::new(HamiltonianKind::ApLimit, quad.clone(), disc.eta);
    let scheme = HjScheme::new(scenario.clone(), *disc, ham).with_options(options);
    let op = LimitOperator {
        scenario,
        quad: &quad,
        grid: disc.grid,
    };
    run_with(&scheme, &op)
}

pub fn run_ap(
    scenario: &ModelScenario,
    disc: &Discretization,
    quad: Arc<KernelQuadrature>,
    eps: f64,
    options: ApOptions,
) -> Result<ApSolution> {
    ApScheme::new(scenario.clone(), *disc, quad, eps)?
        .with_options(options)
        .run()
}
