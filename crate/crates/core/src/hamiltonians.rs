//! Kernel quadrature and numerical Hamiltonians.
//!
//! All kinds are assembled from two one-sided sums over the z-grid,
//! `h⁻(p) = Σ_{k≤-1} w_k e^{-z_k p} + w_0/2 - q/2` and its mirror `h⁺`,
//! whose sum is `H_η(p) = Σ_k w_k e^{-z_k p} - q`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Kernel;

/// Midpoint quadrature of an even kernel on `z_k = k·dz`, `|k| <= K`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelQuadrature {
    dz: f64,
    center: f64,
    /// `w_j = w_{-j}` for `j = 1..=K`.
    side: Vec<f64>,
    side_mass: f64,
    mass: f64,
}

impl KernelQuadrature {
    pub fn new(kernel: &Kernel, dz: f64, zmax: f64, b_max: f64) -> Result<Self> {
        if !(dz.is_finite() && dz > 0.0 && zmax.is_finite()) {
            return Err(Error::Configuration(format!(
                "quadrature needs finite dz > 0 and zmax (got dz = {dz}, zmax = {zmax})"
            )));
        }
        let n_side = (zmax / dz + 1e-9).floor();
        if n_side < 1.0 {
            return Err(Error::EmptyQuadrature { zmax, dz });
        }
        let n_side = n_side as usize;
        let side = (1..=n_side).map(|j| dz * kernel.density(j as f64 * dz)).collect();
        let quad = Self::from_weights(dz, dz * kernel.density(0.0), side);
        if b_max > 0.0 {
            let defect = (quad.mass - 1.0).abs();
            let allowed = 0.5 / b_max;
            if defect > allowed {
                return Err(Error::QuadratureAccuracy { defect, allowed });
            }
        }
        Ok(quad)
    }

    /// Raw weights (`side[j-1] = w_j = w_{-j}`) without any mass check.
    pub fn from_weights(dz: f64, center: f64, side: Vec<f64>) -> Self {
        let side_mass = horner(&side, 1.0);
        Self {
            dz,
            center,
            side,
            side_mass,
            mass: center + 2.0 * side_mass,
        }
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    pub fn n_side(&self) -> usize {
        self.side.len()
    }

    pub fn zmax(&self) -> f64 {
        self.side.len() as f64 * self.dz
    }

    /// Total mass `q = Σ_k w_k`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn center_weight(&self) -> f64 {
        self.center
    }

    /// Weight of node `k`, `|k| <= K`.
    pub fn weight(&self, k: isize) -> f64 {
        match k.unsigned_abs() {
            0 => self.center,
            j => self.side[j - 1],
        }
    }

    pub fn z(&self, k: isize) -> f64 {
        k as f64 * self.dz
    }

    pub fn side_weights(&self) -> &[f64] {
        &self.side
    }

    /// `Σ_{j≥1} w_j e^{j·dz·p}`, i.e. the sum over `k <= -1` of `w_k e^{-z_k p}`.
    #[inline]
    pub fn lower_sum(&self, p: f64) -> f64 {
        horner(&self.side, (self.dz * p).exp())
    }

    /// `d/dp` of [`Self::lower_sum`].
    #[inline]
    pub fn lower_sum_deriv(&self, p: f64) -> f64 {
        let r = (self.dz * p).exp();
        let mut acc = 0.0;
        for (j, w) in self.side.iter().enumerate().rev() {
            acc = acc * r + (j + 1) as f64 * w;
        }
        self.dz * acc * r
    }

    /// `Σ_k |z_k| w_k e^{|z_k| L}`.
    pub fn first_moment(&self, l: f64) -> f64 {
        2.0 * self.lower_sum_deriv(l)
    }
}

/// `Σ_{j=1}^{K} c_j r^j`.
#[inline]
fn horner(c: &[f64], r: f64) -> f64 {
    let mut acc = 0.0;
    for &w in c.iter().rev() {
        acc = acc * r + w;
    }
    acc * r
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Minus,
    Plus,
}

/// One-sided part of `H_η`; vanishes at `p = 0`.
pub fn h_half(quad: &KernelQuadrature, side: Side, p: f64) -> Result<f64> {
    let v = match side {
        Side::Minus => quad.lower_sum(p) - quad.side_mass,
        Side::Plus => quad.lower_sum(-p) - quad.side_mass,
    };
    finite_or_overflow(v, p.abs(), None)
}

fn finite_or_overflow(v: f64, slope: f64, cap: Option<f64>) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::SlopeOverflow {
            slope,
            cap: cap.unwrap_or(f64::INFINITY),
            step: None,
            node: None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianKind {
    CrandallLions,
    Upwind,
    LaxFriedrichs,
    P1,
    Ccs,
    ApLimit,
}

impl HamiltonianKind {
    pub const ALL: [HamiltonianKind; 6] = [
        Self::CrandallLions,
        Self::Upwind,
        Self::LaxFriedrichs,
        Self::P1,
        Self::Ccs,
        Self::ApLimit,
    ];

    pub fn setting(self) -> Setting {
        match self {
            Self::CrandallLions | Self::Upwind | Self::Ccs => Setting::Both,
            Self::LaxFriedrichs | Self::P1 | Self::ApLimit => Setting::Convex,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::CrandallLions => "cl",
            Self::Upwind => "upwind",
            Self::LaxFriedrichs => "lf",
            Self::P1 => "p1",
            Self::Ccs => "ccs",
            Self::ApLimit => "ap_limit",
        }
    }
}

impl std::str::FromStr for HamiltonianKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "cl" | "crandall_lions" => Ok(Self::CrandallLions),
            "upwind" | "upw" => Ok(Self::Upwind),
            "lf" | "lax_friedrichs" => Ok(Self::LaxFriedrichs),
            "p1" => Ok(Self::P1),
            "ccs" => Ok(Self::Ccs),
            "ap_limit" | "aplimit" | "ap" => Ok(Self::ApLimit),
            _ => Err(Error::Configuration(format!("unknown Hamiltonian kind `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Flat,
    Convex,
    Both,
}

impl Setting {
    pub fn is_flat(self) -> bool {
        matches!(self, Self::Flat | Self::Both)
    }

    pub fn is_convex(self) -> bool {
        matches!(self, Self::Convex | Self::Both)
    }
}

#[derive(Clone, Debug)]
pub struct DiscreteHamiltonian {
    kind: HamiltonianKind,
    quad: Arc<KernelQuadrature>,
    eta: f64,
    theta: f64,
    b_bound: f64,
    cap: Option<f64>,
}

impl DiscreteHamiltonian {
    /// Lax-Friedrichs gets the minimal viscosity for slopes in `[-1, 1]`;
    /// use [`Self::with_working_slope`] to widen it.
    pub fn new(kind: HamiltonianKind, quad: Arc<KernelQuadrature>, eta: f64) -> Self {
        let mut h = Self {
            kind,
            quad,
            eta,
            theta: 0.0,
            b_bound: 1.0,
            cap: None,
        };
        if kind == HamiltonianKind::LaxFriedrichs {
            h.theta = 0.5 * h.max_slope_derivative(1.0);
        }
        h
    }

    /// Sets the Lax-Friedrichs viscosity to `sup_{|m|<=S} |H_η'(m)| / 2`.
    pub fn with_working_slope(mut self, s: f64) -> Self {
        if self.kind == HamiltonianKind::LaxFriedrichs {
            self.theta = 0.5 * self.max_slope_derivative(s);
        }
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    /// Factor multiplying the subgradient bound in [`Self::lipschitz_bound`].
    pub fn with_b_bound(mut self, b: f64) -> Self {
        self.b_bound = b;
        self
    }

    /// Extends the one-sided sums tangentially outside `[-s, s]`.
    pub fn linearize(&self, s: f64) -> Self {
        assert!(s > 0.0, "linearization cap must be positive");
        Self {
            cap: Some(s),
            ..self.clone()
        }
    }

    pub fn kind(&self) -> HamiltonianKind {
        self.kind
    }

    pub fn setting(&self) -> Setting {
        self.kind.setting()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn b_bound(&self) -> f64 {
        self.b_bound
    }

    pub fn cap(&self) -> Option<f64> {
        self.cap
    }

    pub fn quadrature(&self) -> &KernelQuadrature {
        &self.quad
    }

    pub fn quadrature_arc(&self) -> &Arc<KernelQuadrature> {
        &self.quad
    }

    #[inline]
    fn lower(&self, p: f64) -> f64 {
        match self.cap {
            Some(s) if p.abs() > s => {
                let c = p.clamp(-s, s);
                self.quad.lower_sum(c) + (p - c) * self.quad.lower_sum_deriv(c)
            }
            _ => self.quad.lower_sum(p),
        }
    }

    #[inline]
    fn h_minus_raw(&self, p: f64) -> f64 {
        self.lower(p) - self.quad.side_mass
    }

    #[inline]
    fn h_plus_raw(&self, q: f64) -> f64 {
        self.lower(-q) - self.quad.side_mass
    }

    #[inline]
    fn full_raw(&self, p: f64) -> f64 {
        self.h_minus_raw(p) + self.h_plus_raw(p)
    }

    pub fn h_minus(&self, p: f64) -> Result<f64> {
        finite_or_overflow(self.h_minus_raw(p), p.abs(), self.cap)
    }

    pub fn h_plus(&self, q: f64) -> Result<f64> {
        finite_or_overflow(self.h_plus_raw(q), q.abs(), self.cap)
    }

    /// `H_η(p)` (linearized when a cap is set).
    pub fn full(&self, p: f64) -> Result<f64> {
        finite_or_overflow(self.full_raw(p), p.abs(), self.cap)
    }

    /// `H_η'(p)` (frozen beyond the cap).
    pub fn full_deriv(&self, p: f64) -> f64 {
        let c = match self.cap {
            Some(s) => p.clamp(-s, s),
            None => p,
        };
        self.quad.lower_sum_deriv(c) - self.quad.lower_sum_deriv(-c)
    }

    /// Numerical Hamiltonian at left slope `p` and right slope `q`; may be
    /// non-finite for huge slopes without a cap.
    #[inline]
    pub fn eval_unchecked(&self, p: f64, q: f64) -> f64 {
        match self.kind {
            HamiltonianKind::CrandallLions => self.full_raw(p.max(0.0)) + self.full_raw(q.min(0.0)),
            HamiltonianKind::Upwind => self.upwind(p, q),
            HamiltonianKind::LaxFriedrichs => {
                self.full_raw(0.5 * (p + q)) - self.theta * (q - p)
            }
            HamiltonianKind::P1 | HamiltonianKind::ApLimit => {
                self.h_minus_raw(p) + self.h_plus_raw(q)
            }
            HamiltonianKind::Ccs => {
                if p < q {
                    self.upwind(p, q)
                } else {
                    self.h_minus_raw(p) + self.h_plus_raw(q)
                }
            }
        }
    }

    #[inline]
    fn upwind(&self, p: f64, q: f64) -> f64 {
        self.full_raw(p.max(0.0)).max(self.full_raw(q.min(0.0)))
    }

    pub fn eval(&self, p: f64, q: f64) -> Result<f64> {
        finite_or_overflow(self.eval_unchecked(p, q), p.abs().max(q.abs()), self.cap)
    }

    /// `sup_{|m| <= L} |H_η'(m)|`, ignoring the cap.
    fn max_slope_derivative(&self, l: f64) -> f64 {
        self.quad.lower_sum_deriv(l) - self.quad.lower_sum_deriv(-l)
    }

    /// Majorant of `sup_{|p|,|q| <= L} (|∂_p H| + |∂_q H|)`.
    pub fn subgradient_bound(&self, l: f64) -> Result<f64> {
        if !(l >= 0.0) {
            return Err(Error::Hamiltonian(format!("slope bound must be >= 0, got {l}")));
        }
        let l = match self.cap {
            Some(s) => l.min(s),
            None => l,
        };
        let d = self.max_slope_derivative(l);
        let v = match self.kind {
            HamiltonianKind::CrandallLions => 2.0 * d,
            HamiltonianKind::Upwind => d,
            HamiltonianKind::LaxFriedrichs => d.max(2.0 * self.theta),
            HamiltonianKind::P1 | HamiltonianKind::ApLimit | HamiltonianKind::Ccs => {
                self.quad.first_moment(l)
            }
        };
        finite_or_overflow(v, l, self.cap)
    }

    /// `C_Hη(L)`: the subgradient majorant times the birth-rate bound.
    pub fn lipschitz_bound(&self, l: f64) -> Result<f64> {
        Ok(self.b_bound * self.subgradient_bound(l)?)
    }

    /// Dense-sampling estimate of the subgradient sum on `n × n` points of
    /// `[-L, L]²` with central differences.
    pub fn sampled_subgradient(&self, l: f64, n: usize) -> f64 {
        let h = 1e-6 * (1.0 + l);
        let step = 2.0 * l / (n.max(2) - 1) as f64;
        let mut best = 0.0f64;
        for a in 0..n {
            let p = -l + a as f64 * step;
            for c in 0..n {
                let q = -l + c as f64 * step;
                let dp = (self.eval_unchecked(p + h, q) - self.eval_unchecked(p - h, q)) / (2.0 * h);
                let dq = (self.eval_unchecked(p, q + h) - self.eval_unchecked(p, q - h)) / (2.0 * h);
                best = best.max(dp.abs() + dq.abs());
            }
        }
        best
    }
}
