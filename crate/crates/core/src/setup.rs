//! From a handful of run parameters to a ready Hamiltonian and grids.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{DiscreteHamiltonian, HamiltonianKind, KernelQuadrature};
use crate::model::{make_discretization, BoundaryMode, Discretization, Domain, ModelScenario};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZmaxPolicy {
    /// Use `zmax` as given.
    #[default]
    Fixed,
    /// Smallest `Z` with `tail(Z)·e^{Z·S} <= η/4`.
    TailBound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeSpec {
    pub kind: HamiltonianKind,
    pub horizon: f64,
    pub dt: f64,
    /// Working slope bound `S`.
    pub slope_cap: f64,
    pub dz: f64,
    pub zmax: f64,
    pub zmax_policy: ZmaxPolicy,
    pub boundary_mode: BoundaryMode,
    /// Overrides the scenario's computational domain.
    pub domain: Option<(f64, f64)>,
    /// Lax-Friedrichs viscosity; `None` derives it from `S`.
    pub theta: Option<f64>,
    /// Extend the Hamiltonian linearly beyond `[-S, S]`.
    pub linearize: bool,
    /// Birth-rate factor in the CFL constant.
    pub cfl_b_bound: f64,
}

impl Default for SchemeSpec {
    fn default() -> Self {
        Self {
            kind: HamiltonianKind::P1,
            horizon: 0.5,
            dt: 1e-3,
            slope_cap: 2.0,
            dz: 0.1,
            zmax: 8.0,
            zmax_policy: ZmaxPolicy::Fixed,
            boundary_mode: BoundaryMode::LinearExtrapolate,
            domain: None,
            theta: None,
            linearize: false,
            cfl_b_bound: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Setup {
    pub hamiltonian: DiscreteHamiltonian,
    pub disc: Discretization,
}

impl SchemeSpec {
    pub fn with_kind(mut self, kind: HamiltonianKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    fn hamiltonian(&self, quad: Arc<KernelQuadrature>, eta: f64) -> DiscreteHamiltonian {
        let mut h = DiscreteHamiltonian::new(self.kind, quad, eta)
            .with_working_slope(self.slope_cap)
            .with_b_bound(self.cfl_b_bound);
        if let Some(theta) = self.theta {
            h = h.with_theta(theta);
        }
        if self.linearize {
            h = h.linearize(self.slope_cap);
        }
        h
    }

    fn discretize(&self, ham: &DiscreteHamiltonian, scenario: &ModelScenario) -> Result<Discretization> {
        let (lo, hi) = self.domain.unwrap_or(scenario.domain);
        make_discretization(
            self.horizon,
            self.dt,
            self.slope_cap,
            ham,
            Domain::new(lo, hi)?,
            self.boundary_mode,
        )
    }

    pub fn build(&self, scenario: &ModelScenario) -> Result<Setup> {
        if !(self.cfl_b_bound > 0.0) {
            return Err(Error::Configuration(format!(
                "cfl_b_bound must be positive (got {})",
                self.cfl_b_bound
            )));
        }
        let b_max = scenario.constants.b_max;
        let quad = Arc::new(KernelQuadrature::new(&scenario.kernel, self.dz, self.zmax, b_max)?);
        let mut disc = self.discretize(&self.hamiltonian(quad.clone(), 1.0), scenario)?;
        let quad = match self.zmax_policy {
            ZmaxPolicy::Fixed => quad,
            ZmaxPolicy::TailBound => {
                let z = scenario
                    .kernel
                    .truncation_for(disc.eta, self.slope_cap, self.dz)
                    .ok_or_else(|| {
                        Error::Configuration("kernel tail never falls below η/4".into())
                    })?;
                let q = Arc::new(KernelQuadrature::new(&scenario.kernel, self.dz, z, b_max)?);
                disc = self.discretize(&self.hamiltonian(q.clone(), 1.0), scenario)?;
                q
            }
        };
        Ok(Setup {
            hamiltonian: self.hamiltonian(quad, disc.eta),
            disc,
        })
    }
}
