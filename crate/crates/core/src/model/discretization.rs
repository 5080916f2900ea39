use serde::Serialize;

use super::grid::{BoundaryMode, Domain, TimeGrid, TraitGrid};
use crate::error::{Error, Result};
use crate::hamiltonians::DiscreteHamiltonian;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Discretization {
    pub time: TimeGrid,
    pub grid: TraitGrid,
    pub domain: Domain,
    pub eta: f64,
    /// Working slope bound `S`.
    pub slope_cap: f64,
    /// `C_Hη(S)` used to tie `dx` to `dt`.
    pub cfl_constant: f64,
}

impl Discretization {
    pub fn dt(&self) -> f64 {
        self.time.dt()
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx
    }

    /// Nodes covering the physical domain (the final active window).
    pub fn domain_range(&self) -> std::ops::Range<usize> {
        self.grid.active_range(self.time.n_steps)
    }
}

/// `η = min(√dx, 1)`.
pub fn eta_for(dx: f64) -> f64 {
    dx.sqrt().min(1.0)
}

/// Builds grids with `dx = 2·dt·C_Hη(S)` covering `domain`.
pub fn make_discretization(
    horizon: f64,
    dt: f64,
    slope_cap: f64,
    hamiltonian: &DiscreteHamiltonian,
    domain: Domain,
    boundary_mode: BoundaryMode,
) -> Result<Discretization> {
    if !(slope_cap.is_finite() && slope_cap > 0.0) {
        return Err(Error::Configuration(format!("slope guess must be positive (got {slope_cap})")));
    }
    let time = TimeGrid::with_max_step(horizon, dt)?;
    let c = hamiltonian.lipschitz_bound(slope_cap)?;
    if !c.is_finite() {
        return Err(Error::Hamiltonian(format!("C_Hη({slope_cap}) is not finite")));
    }
    if c <= 0.0 {
        return Err(Error::Hamiltonian(format!(
            "C_Hη({slope_cap}) = {c} gives a degenerate trait step"
        )));
    }
    let dx = 2.0 * time.dt() * c;
    let width = domain.width();
    if dx > width {
        return Err(Error::Configuration(format!(
            "trait step {dx:.4e} exceeds the domain width {width}"
        )));
    }
    let cells = (width / dx - 1e-9).ceil() as usize;
    let (x0, n_points) = match boundary_mode {
        BoundaryMode::LinearExtrapolate => (domain.lo, cells + 1),
        BoundaryMode::Shrink => (
            domain.lo - time.n_steps as f64 * dx,
            cells + 1 + 2 * time.n_steps,
        ),
    };
    let grid = TraitGrid::new(x0, dx, n_points, boundary_mode)?;
    Ok(Discretization {
        time,
        grid,
        domain,
        eta: eta_for(dx),
        slope_cap,
        cfl_constant: c,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::hamiltonians::{HamiltonianKind, KernelQuadrature};
    use crate::model::Kernel;

    fn p1() -> DiscreteHamiltonian {
        let q = KernelQuadrature::new(&Kernel::gaussian(1.0), 0.1, 8.0, 1.0).unwrap();
        DiscreteHamiltonian::new(HamiltonianKind::P1, Arc::new(q), 1.0)
    }

    fn dom() -> Domain {
        Domain::new(-10.0, 10.0).unwrap()
    }

    #[test]
    fn reference_setting_gives_six_hundredths() {
        let d = make_discretization(0.5, 1e-3, 2.0, &p1(), dom(), BoundaryMode::LinearExtrapolate)
            .unwrap();
        assert!((d.dx() - 2e-3 * p1().lipschitz_bound(2.0).unwrap()).abs() < 1e-15);
        assert!((d.dx() - 6e-2).abs() < 5e-3, "dx = {}", d.dx());
        assert!(d.grid.last() >= 10.0);
        assert_eq!(d.eta, d.dx().sqrt());
    }

    #[test]
    fn cfl_holds_on_returned_grids() {
        for &dt in &[1e-2, 4e-3, 1e-3, 1e-4] {
            let h = p1();
            let d = make_discretization(0.5, dt, 2.0, &h, dom(), BoundaryMode::LinearExtrapolate)
                .unwrap();
            assert!(d.dt() * h.lipschitz_bound(2.0).unwrap() <= d.dx());
        }
    }

    #[test]
    fn shrink_adds_margins() {
        let d = make_discretization(0.1, 1e-2, 2.0, &p1(), dom(), BoundaryMode::Shrink).unwrap();
        let fixed = make_discretization(0.1, 1e-2, 2.0, &p1(), dom(), BoundaryMode::LinearExtrapolate)
            .unwrap();
        assert_eq!(d.grid.n_points, fixed.grid.n_points + 20);
        let last = d.grid.active_range(d.time.n_steps);
        assert_eq!(last.len(), fixed.grid.n_points);
        assert!((d.grid.node(last.start) + 10.0).abs() < 1e-12);
        assert_eq!(d.domain_range(), last);
    }

    #[test]
    fn zero_kernel_is_rejected() {
        let q = KernelQuadrature::from_weights(0.1, 0.0, vec![0.0; 10]);
        let h = DiscreteHamiltonian::new(HamiltonianKind::P1, Arc::new(q), 1.0);
        assert!(matches!(
            make_discretization(0.5, 1e-3, 2.0, &h, dom(), BoundaryMode::LinearExtrapolate),
            Err(Error::Hamiltonian(_))
        ));
    }

    #[test]
    fn oversized_step_is_rejected() {
        let narrow = Domain::new(0.0, 0.01).unwrap();
        assert!(matches!(
            make_discretization(0.5, 1e-2, 2.0, &p1(), narrow, BoundaryMode::LinearExtrapolate),
            Err(Error::Configuration(_))
        ));
    }
}
