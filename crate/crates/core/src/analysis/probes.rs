use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ap_solver::ApSolution;
use crate::error::Error;
use crate::hj_solver::HjSolution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Jump,
    FlatMonotone,
    Extinction,
    NegativeMultiplier,
    Coincidence,
}

impl std::str::FromStr for ProbeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "jump" => Ok(Self::Jump),
            "flat_monotone" | "monotone" => Ok(Self::FlatMonotone),
            "extinction" => Ok(Self::Extinction),
            "negative_i" | "negative_multiplier" | "negative" => Ok(Self::NegativeMultiplier),
            "coincidence" => Ok(Self::Coincidence),
            _ => Err(Error::Configuration(format!("unknown probe `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeReport {
    pub kind: ProbeKind,
    pub detected: bool,
    pub quantities: BTreeMap<String, f64>,
}

impl ProbeReport {
    fn new(kind: ProbeKind, detected: bool, quantities: &[(&str, f64)]) -> Self {
        Self {
            kind,
            detected,
            quantities: quantities.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.quantities.get(name).copied()
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

/// Largest single-step increase of `I` against the median step size. A jump
/// is reported when it exceeds `ratio` times that background and the
/// minimizer moves by more than `min_shift` within one step of it (the
/// relocation can precede the increase by a step).
pub fn jump_probe(sol: &HjSolution, ratio: f64, min_shift: f64) -> ProbeReport {
    let m = &sol.multipliers;
    if m.len() < 3 {
        return ProbeReport::new(ProbeKind::Jump, false, &[]);
    }
    let steps: Vec<f64> = m.windows(2).map(|w| w[1] - w[0]).collect();
    let (k, &up) = steps
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("at least two increments");
    let background = median(steps.iter().map(|d| d.abs()).collect());
    // trace[k] holds I^{k+1}; the jump is from step k+1 to k+2
    let before = sol.trace[k.saturating_sub(1)].argmin_x;
    let after = sol.trace[k + 1].argmin_x;
    let shift = (after - before).abs();
    let detected = up > 0.0 && up > ratio * background && shift > min_shift;
    ProbeReport::new(
        ProbeKind::Jump,
        detected,
        &[
            ("max_increase", up),
            ("background", background),
            ("step", (k + 2) as f64),
            ("t", sol.trace[k + 1].t),
            ("argmin_before", before),
            ("argmin_after", after),
        ],
    )
}

/// `min_n (I^{n+1} - I^n) >= 0`.
pub fn flat_monotone_probe(sol: &HjSolution) -> ProbeReport {
    let worst = sol
        .multipliers
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let worst = if worst.is_finite() { worst } else { 0.0 };
    ProbeReport::new(ProbeKind::FlatMonotone, worst >= 0.0, &[("min_step", worst)])
}

/// Final mass below `threshold` while `min v` stays above `100ε`.
pub fn extinction_probe(sol: &ApSolution, threshold: f64) -> ProbeReport {
    let j = sol.masses.last().copied().unwrap_or(f64::NAN);
    let min_v = sol.min_v.last().copied().unwrap_or(f64::NAN);
    let detected = j < threshold && min_v > 100.0 * sol.eps;
    ProbeReport::new(
        ProbeKind::Extinction,
        detected,
        &[("final_mass", j), ("final_min_v", min_v), ("threshold", threshold)],
    )
}

/// `min_n I^n < 0`.
pub fn negative_multiplier_probe(sol: &HjSolution) -> ProbeReport {
    let (n, low) = sol
        .multipliers
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map_or((0, f64::NAN), |(n, &v)| (n + 1, v));
    ProbeReport::new(
        ProbeKind::NegativeMultiplier,
        low < 0.0,
        &[("min_multiplier", low), ("step", n as f64)],
    )
}

/// `sup_n |I^n - J^n| <= tol` for runs on the same time grid.
pub fn coincidence_probe(hj: &HjSolution, ap: &ApSolution, tol: f64) -> ProbeReport {
    let same = hj.multipliers.len() == ap.masses.len() && hj.disc.dt() == ap.disc.dt();
    let gap = if same {
        hj.multipliers
            .iter()
            .zip(&ap.masses)
            .map(|(i, j)| (i - j).abs())
            .fold(0.0, f64::max)
    } else {
        f64::NAN
    };
    ProbeReport::new(
        ProbeKind::Coincidence,
        gap <= tol,
        &[("sup_gap", gap), ("tolerance", tol)],
    )
}
