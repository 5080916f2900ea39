use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Exact scheme on a shrinking index window; the grid carries one extra
    /// node per side and per time step.
    Shrink,
    /// Fixed grid; ghost values come from the end segments.
    #[default]
    LinearExtrapolate,
}

impl std::str::FromStr for BoundaryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "shrink" => Ok(Self::Shrink),
            "linear_extrapolate" | "extrapolate" | "linear" => Ok(Self::LinearExtrapolate),
            _ => Err(Error::Configuration(format!("unknown boundary mode `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
}

impl Domain {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Configuration(format!(
                "domain [{lo}, {hi}] is not a finite nonempty interval"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraitGrid {
    pub x0: f64,
    pub dx: f64,
    pub n_points: usize,
    pub boundary_mode: BoundaryMode,
}

impl TraitGrid {
    pub fn new(x0: f64, dx: f64, n_points: usize, boundary_mode: BoundaryMode) -> Result<Self> {
        if !(x0.is_finite() && dx.is_finite() && dx > 0.0) {
            return Err(Error::Configuration(format!(
                "trait grid needs finite x0 and dx > 0 (got x0 = {x0}, dx = {dx})"
            )));
        }
        if n_points < 3 {
            return Err(Error::Configuration(format!(
                "trait grid needs at least 3 nodes (got {n_points})"
            )));
        }
        Ok(Self {
            x0,
            dx,
            n_points,
            boundary_mode,
        })
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.node(i)).collect()
    }

    pub fn last(&self) -> f64 {
        self.node(self.n_points - 1)
    }

    /// Index window holding valid values after `step` time steps.
    pub fn active_range(&self, step: usize) -> Range<usize> {
        match self.boundary_mode {
            BoundaryMode::LinearExtrapolate => 0..self.n_points,
            BoundaryMode::Shrink => {
                let lo = step.min(self.n_points / 2);
                lo..self.n_points - lo
            }
        }
    }

    /// Cell index `i` (clamped to an end segment) and the local coordinate
    /// `(x - x_i)/dx`, which leaves [0, 1] only when extrapolating.
    #[inline]
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let s = (x - self.x0) / self.dx;
        let i = if s <= 0.0 {
            0
        } else {
            (s.floor() as usize).min(self.n_points - 2)
        };
        (i, s - i as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Configuration(format!(
                "time horizon must be positive (got {horizon})"
            )));
        }
        if n_steps == 0 {
            return Err(Error::Configuration("time grid needs n_steps >= 1".into()));
        }
        Ok(Self { horizon, n_steps })
    }

    /// Smallest grid whose step does not exceed `dt`.
    pub fn with_max_step(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Configuration(format!("dt must be positive (got {dt})")));
        }
        let n = (horizon / dt - 1e-9).ceil().max(1.0) as usize;
        Self::new(horizon, n)
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    #[inline]
    pub fn t(&self, n: usize) -> f64 {
        if n == self.n_steps {
            self.horizon
        } else {
            n as f64 * self.dt()
        }
    }
}
