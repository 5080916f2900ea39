use std::fmt;
use std::sync::Arc;

use statrs::function::erf::erfc;

type Density = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Even mutation kernel of unit mass.
#[derive(Clone)]
pub struct Kernel {
    name: String,
    density: Density,
    laplace: Option<Density>,
    tail: Density,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.name)
            .field("analytic_laplace", &self.laplace.is_some())
            .finish()
    }
}

impl Kernel {
    /// Centered normal density with standard deviation `sigma`.
    pub fn gaussian(sigma: f64) -> Self {
        assert!(sigma > 0.0, "gaussian kernel needs sigma > 0");
        let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let two_var = 2.0 * sigma * sigma;
        Self {
            name: format!("gaussian({sigma})"),
            density: Arc::new(move |z| norm * (-(z * z) / two_var).exp()),
            laplace: Some(Arc::new(move |p| (0.5 * sigma * sigma * p * p).exp())),
            // padded so library rounding never turns the bound into an underestimate
            tail: Arc::new(move |zmax| {
                erfc(zmax / (sigma * std::f64::consts::SQRT_2)) * (1.0 + 1e-8)
            }),
        }
    }

    /// Uniform density on [-half_width, half_width].
    pub fn uniform(half_width: f64) -> Self {
        assert!(half_width > 0.0, "uniform kernel needs a positive half width");
        let a = half_width;
        Self {
            name: format!("uniform({a})"),
            density: Arc::new(move |z| if z.abs() <= a { 0.5 / a } else { 0.0 }),
            laplace: Some(Arc::new(move |p| {
                let s = a * p;
                if s.abs() < 1e-8 {
                    1.0 + s * s / 6.0
                } else {
                    s.sinh() / s
                }
            })),
            tail: Arc::new(move |zmax| (1.0 - zmax / a).max(0.0)),
        }
    }

    /// Kernel from closures; `density` must be even with unit mass.
    pub fn custom(
        name: impl Into<String>,
        density: impl Fn(f64) -> f64 + Send + Sync + 'static,
        tail_bound: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            density: Arc::new(density),
            laplace: None,
            tail: Arc::new(tail_bound),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn density(&self, z: f64) -> f64 {
        (self.density)(z.abs())
    }

    /// Closed-form bilateral Laplace transform `∫ K(z) e^{-zp} dz`, if known.
    pub fn laplace(&self, p: f64) -> Option<f64> {
        self.laplace.as_ref().map(|f| f(p))
    }

    /// Upper bound on the mass outside [-zmax, zmax].
    pub fn tail_bound(&self, zmax: f64) -> f64 {
        (self.tail)(zmax)
    }

    /// Smallest multiple of `dz` at which the exponentially weighted tail
    /// `tail_bound(Z)·e^{Z·slope}` falls below `eta/4`.
    pub fn truncation_for(&self, eta: f64, slope: f64, dz: f64) -> Option<f64> {
        let target = 0.25 * eta;
        (1..=100_000)
            .map(|k| k as f64 * dz)
            .find(|&z| self.tail_bound(z) * (z * slope).exp() <= target)
    }
}
