use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::kernel::Kernel;

pub type TraitFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type BirthFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type FieldFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type GrowthFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Birth rate `b(x, I)`.
#[derive(Clone)]
pub enum BirthRate {
    /// `b(x, I) = trait_factor(x) · mass_factor(I)`.
    Separable {
        trait_factor: TraitFn,
        mass_factor: TraitFn,
        mass_factor_deriv: TraitFn,
    },
    General { rate: BirthFn, d_mass: BirthFn },
}

impl BirthRate {
    #[inline]
    pub fn eval(&self, x: f64, i: f64) -> f64 {
        match self {
            Self::Separable {
                trait_factor,
                mass_factor,
                ..
            } => trait_factor(x) * mass_factor(i),
            Self::General { rate, .. } => rate(x, i),
        }
    }

    #[inline]
    pub fn d_mass(&self, x: f64, i: f64) -> f64 {
        match self {
            Self::Separable {
                trait_factor,
                mass_factor_deriv,
                ..
            } => trait_factor(x) * mass_factor_deriv(i),
            Self::General { d_mass, .. } => d_mass(x, i),
        }
    }
}

/// Growth rate as a function of `(t, x, I)`.
#[derive(Clone)]
pub enum GrowthRate {
    /// `intercept(t, x) + slope(t, x) · I`.
    Affine { intercept: FieldFn, slope: FieldFn },
    General { rate: GrowthFn, d_mass: GrowthFn },
}

impl GrowthRate {
    #[inline]
    pub fn eval(&self, t: f64, x: f64, i: f64) -> f64 {
        match self {
            Self::Affine { intercept, slope } => intercept(t, x) + slope(t, x) * i,
            Self::General { rate, .. } => rate(t, x, i),
        }
    }

    #[inline]
    pub fn d_mass(&self, t: f64, x: f64, i: f64) -> f64 {
        match self {
            Self::Affine { slope, .. } => slope(t, x),
            Self::General { d_mass, .. } => d_mass(t, x, i),
        }
    }
}

/// How the stored growth rate enters the two problems.
///
/// `Population`: the stored rate is the net growth of the integral model and
/// the Hamilton-Jacobi problem uses `b·q + rate`. `Direct`: the stored rate is
/// used as-is by the Hamilton-Jacobi problem and the integral model uses
/// `rate - b·q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthForm {
    Population,
    Direct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisConstants {
    pub b_max: f64,
    pub b_lip: f64,
    pub k: f64,
    pub i_min: f64,
    pub i_max: f64,
    pub lip_init: f64,
    pub a_lo: f64,
    pub a_hi: f64,
    pub b_lo: f64,
    pub b_hi: f64,
    pub psi_min: f64,
    pub psi_max: f64,
    /// Upper bound on the second derivative of the initial data.
    pub init_curvature: f64,
}

#[derive(Clone)]
pub struct ModelScenario {
    pub name: String,
    pub birth: BirthRate,
    pub growth: GrowthRate,
    pub growth_form: GrowthForm,
    pub weight: TraitFn,
    pub initial: TraitFn,
    pub kernel: Kernel,
    pub domain: (f64, f64),
    pub constants: HypothesisConstants,
    pub time_independent_growth: bool,
    /// Multipliers must stay strictly above this value (e.g. a pole of `b`).
    pub multiplier_floor: f64,
}

impl fmt::Debug for ModelScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelScenario")
            .field("name", &self.name)
            .field("growth_form", &self.growth_form)
            .field("kernel", &self.kernel)
            .field("domain", &self.domain)
            .field("constants", &self.constants)
            .field("time_independent_growth", &self.time_independent_growth)
            .finish()
    }
}

impl ModelScenario {
    #[inline]
    pub fn b(&self, x: f64, i: f64) -> f64 {
        self.birth.eval(x, i)
    }

    #[inline]
    pub fn db_di(&self, x: f64, i: f64) -> f64 {
        self.birth.d_mass(x, i)
    }

    /// The stored growth rate.
    #[inline]
    pub fn r(&self, t: f64, x: f64, i: f64) -> f64 {
        self.growth.eval(t, x, i)
    }

    #[inline]
    pub fn dr_di(&self, t: f64, x: f64, i: f64) -> f64 {
        self.growth.d_mass(t, x, i)
    }

    #[inline]
    pub fn psi(&self, x: f64) -> f64 {
        (self.weight)(x)
    }

    #[inline]
    pub fn u_init(&self, x: f64) -> f64 {
        (self.initial)(x)
    }

    /// Growth rate of the Hamilton-Jacobi problem built on quadrature mass `mass`.
    pub fn hj_rate(&self, t: f64, x: f64, i: f64, mass: f64) -> f64 {
        match self.growth_form {
            GrowthForm::Population => self.b(x, i) * mass + self.r(t, x, i),
            GrowthForm::Direct => self.r(t, x, i),
        }
    }

    pub fn hj_rate_d(&self, t: f64, x: f64, i: f64, mass: f64) -> f64 {
        match self.growth_form {
            GrowthForm::Population => self.db_di(x, i) * mass + self.dr_di(t, x, i),
            GrowthForm::Direct => self.dr_di(t, x, i),
        }
    }

    /// Net growth rate of the integral model.
    pub fn population_rate(&self, t: f64, x: f64, i: f64, mass: f64) -> f64 {
        match self.growth_form {
            GrowthForm::Population => self.r(t, x, i),
            GrowthForm::Direct => self.r(t, x, i) - self.b(x, i) * mass,
        }
    }

    pub fn with_weight(mut self, weight: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.weight = Arc::new(weight);
        self
    }

    pub fn with_initial(mut self, initial: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.initial = Arc::new(initial);
        self
    }

    pub fn with_kernel(mut self, kernel: Kernel) -> Self {
        self.kernel = kernel;
        self
    }
}
