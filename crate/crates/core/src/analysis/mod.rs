//! Error norms on nested grids, refinement studies and qualitative probes.

mod probes;
mod studies;

use std::fmt::Write as _;

use serde::Serialize;

use crate::ap_solver::ApSolution;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::hj_solver::HjSolution;
use crate::model::Discretization;

pub use probes::{
    coincidence_probe, extinction_probe, flat_monotone_probe, jump_probe, negative_multiplier_probe,
    ProbeKind, ProbeReport,
};
pub use studies::{ap_study, convergence_study, ua_study, worker_count, UaSummary};

/// What the norms need from a finished run: the final field and the
/// multiplier sequence `m^1, ..., m^N`.
pub trait Trajectory {
    fn discretization(&self) -> &Discretization;
    fn final_state(&self) -> &Field;
    fn multiplier_path(&self) -> &[f64];
}

impl Trajectory for HjSolution {
    fn discretization(&self) -> &Discretization {
        &self.disc
    }

    fn final_state(&self) -> &Field {
        self.final_field()
    }

    fn multiplier_path(&self) -> &[f64] {
        &self.multipliers
    }
}

impl Trajectory for ApSolution {
    fn discretization(&self) -> &Discretization {
        &self.disc
    }

    fn final_state(&self) -> &Field {
        self.final_field()
    }

    fn multiplier_path(&self) -> &[f64] {
        &self.masses
    }
}

fn integer_ratio(coarse: f64, fine: f64, what: &str) -> Result<usize> {
    let r = coarse / fine;
    let k = r.round();
    if k < 1.0 || (r - k).abs() > 1e-6 * k {
        return Err(Error::StudySetup(format!(
            "{what} {coarse:e} is not an integer multiple of the reference {fine:e}"
        )));
    }
    Ok(k as usize)
}

/// Space and time refinement factors of `fine` over `coarse`, with the
/// index of `coarse`'s node 0 on the fine grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Nesting {
    pub space: usize,
    pub time: usize,
    pub origin: isize,
}

pub fn nesting(coarse: &Discretization, fine: &Discretization) -> Result<Nesting> {
    let time = integer_ratio(coarse.dt(), fine.dt(), "time step")?;
    if coarse.time.n_steps * time != fine.time.n_steps {
        return Err(Error::StudySetup(format!(
            "horizons differ: {} steps of {:e} against {} of {:e}",
            coarse.time.n_steps,
            coarse.dt(),
            fine.time.n_steps,
            fine.dt()
        )));
    }
    let space = integer_ratio(coarse.dx(), fine.dx(), "trait step")?;
    let shift = (coarse.grid.x0 - fine.grid.x0) / fine.dx();
    let origin = shift.round();
    if (shift - origin).abs() > 1e-6 {
        return Err(Error::StudySetup(format!(
            "grid origins {} and {} are not aligned",
            coarse.grid.x0, fine.grid.x0
        )));
    }
    Ok(Nesting {
        space,
        time,
        origin: origin as isize,
    })
}

/// Sup over `sol`'s final nodes of `|u_sol - u_ref|`, on nodes shared with
/// the reference.
pub fn err_u(sol: &impl Trajectory, reference: &impl Trajectory) -> Result<f64> {
    let nest = nesting(sol.discretization(), reference.discretization())?;
    let (u, r) = (sol.final_state(), reference.final_state());
    let mut worst = 0.0f64;
    let mut shared = 0usize;
    for (k, &val) in u.values.iter().enumerate() {
        let j = nest.origin + ((u.start + k) * nest.space) as isize;
        if j < 0 {
            continue;
        }
        if let Some(rv) = r.get(j as usize) {
            worst = worst.max((val - rv).abs());
            shared += 1;
        }
    }
    if shared == 0 {
        return Err(Error::StudySetup("final fields share no node".into()));
    }
    Ok(worst)
}

/// `dt·Σ_n |m_sol^n - m̄_ref^n|`, where `m̄_ref^n` averages the reference
/// step function over `(t^{n-1}, t^n]`.
pub fn err_i(sol: &impl Trajectory, reference: &impl Trajectory) -> Result<f64> {
    let nest = nesting(sol.discretization(), reference.discretization())?;
    let (m, r) = (sol.multiplier_path(), reference.multiplier_path());
    if r.len() < m.len() * nest.time {
        return Err(Error::StudySetup(format!(
            "reference has {} multipliers, {} needed",
            r.len(),
            m.len() * nest.time
        )));
    }
    let dt = sol.discretization().dt();
    let total: f64 = m
        .iter()
        .enumerate()
        .map(|(n, &v)| {
            let chunk = &r[n * nest.time..(n + 1) * nest.time];
            let avg = chunk.iter().sum::<f64>() / nest.time as f64;
            (v - avg).abs()
        })
        .sum();
    Ok(dt * total)
}

/// Least-squares slope of `ln y` against `ln x` over rows with finite
/// `y >= floor`; `None` with fewer than three such rows.
pub fn fit_order(points: &[(f64, f64)], floor: f64) -> Option<f64> {
    let kept: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && y.is_finite() && *y >= floor && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if kept.len() < 3 {
        return None;
    }
    let n = kept.len() as f64;
    let mx = kept.iter().map(|p| p.0).sum::<f64>() / n;
    let my = kept.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = kept.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = kept.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyRow {
    pub dt: f64,
    pub dx: f64,
    pub eps: Option<f64>,
    pub err_u: f64,
    pub err_i: f64,
    /// Set when the run failed; the errors are then NaN.
    pub failure: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StudyResult {
    pub rows: Vec<StudyRow>,
    pub fitted_order_u: Option<f64>,
    pub fitted_order_i: Option<f64>,
}

pub const STUDY_HEADER: &str = "dt,dx,eps,err_u,err_I";

/// Full-precision decimal used in every CSV.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

impl StudyResult {
    /// Sorts rows by `dt` (then `eps`) and fits orders against `dt`.
    pub fn by_dt(mut rows: Vec<StudyRow>, floor: f64) -> Self {
        rows.sort_by(|a, b| {
            a.dt.total_cmp(&b.dt)
                .then(a.eps.unwrap_or(0.0).total_cmp(&b.eps.unwrap_or(0.0)))
        });
        let u: Vec<_> = rows.iter().map(|r| (r.dt, r.err_u)).collect();
        let i: Vec<_> = rows.iter().map(|r| (r.dt, r.err_i)).collect();
        Self {
            fitted_order_u: fit_order(&u, floor),
            fitted_order_i: fit_order(&i, floor),
            rows,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(STUDY_HEADER);
        out.push('\n');
        for r in &self.rows {
            let eps = r.eps.map(fmt_num).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt_num(r.dt),
                fmt_num(r.dx),
                eps,
                fmt_num(r.err_u),
                fmt_num(r.err_i)
            );
        }
        out
    }

    pub fn failures(&self) -> Vec<&StudyRow> {
        self.rows.iter().filter(|r| r.failure.is_some()).collect()
    }
}
