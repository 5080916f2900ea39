//! Per-step node maps `m ↦ base_i − birth_i(m) − growth_i(m)`.
//!
//! Every scheme freezes its multiplier-independent work (slopes, kernel
//! sums) into one of these once per time step, so that the scalar root
//! solves only re-evaluate `b` and `R`.

use crate::model::{BirthFn, BirthRate, GrowthFn, GrowthRate, ModelScenario, TraitFn};

pub(crate) enum BirthTerm {
    /// `totals_i · g(m)` for a separable birth rate.
    Factored {
        totals: Vec<f64>,
        factor: TraitFn,
        factor_deriv: TraitFn,
    },
    /// `Σ_j coefs_j · b(points_j, m)` over row `i` of a CSR layout.
    Sampled {
        offsets: Vec<usize>,
        points: Vec<f64>,
        coefs: Vec<f64>,
        rate: BirthFn,
        d_mass: BirthFn,
    },
}

impl BirthTerm {
    /// One sample per node: `coefs_i · b(xs_i, m)`.
    pub fn pointwise(birth: &BirthRate, xs: &[f64], coefs: &[f64]) -> Self {
        Self::from_rows(birth, xs.iter().zip(coefs).map(|(&x, &c)| [(x, c)]))
    }

    /// Separable rate with precomputed `totals_i = Σ_j coefs_j · trait_factor(points_j)`.
    pub fn factored(birth: &BirthRate, totals: Vec<f64>) -> Option<Self> {
        match birth {
            BirthRate::Separable {
                mass_factor,
                mass_factor_deriv,
                ..
            } => Some(Self::Factored {
                totals,
                factor: mass_factor.clone(),
                factor_deriv: mass_factor_deriv.clone(),
            }),
            BirthRate::General { .. } => None,
        }
    }

    pub fn from_rows<R, I>(birth: &BirthRate, rows: R) -> Self
    where
        R: IntoIterator<Item = I>,
        I: IntoIterator<Item = (f64, f64)>,
    {
        match birth {
            BirthRate::Separable {
                trait_factor,
                mass_factor,
                mass_factor_deriv,
            } => Self::Factored {
                totals: rows
                    .into_iter()
                    .map(|row| row.into_iter().map(|(x, c)| c * trait_factor(x)).sum())
                    .collect(),
                factor: mass_factor.clone(),
                factor_deriv: mass_factor_deriv.clone(),
            },
            BirthRate::General { rate, d_mass } => {
                let mut offsets = vec![0];
                let mut points = Vec::new();
                let mut coefs = Vec::new();
                for row in rows {
                    for (x, c) in row {
                        points.push(x);
                        coefs.push(c);
                    }
                    offsets.push(points.len());
                }
                Self::Sampled {
                    offsets,
                    points,
                    coefs,
                    rate: rate.clone(),
                    d_mass: d_mass.clone(),
                }
            }
        }
    }
}

pub(crate) enum GrowthTerm {
    /// `a_i + s_i·m`, already scaled by the time step.
    Affine { a: Vec<f64>, s: Vec<f64> },
    Sampled {
        t: f64,
        xs: Vec<f64>,
        scale: f64,
        rate: GrowthFn,
        d_mass: GrowthFn,
    },
}

impl GrowthTerm {
    /// `scale · R(t, x_i, m)` for the scenario's stored growth rate.
    pub fn new(scenario: &ModelScenario, t: f64, xs: &[f64], scale: f64) -> Self {
        match &scenario.growth {
            GrowthRate::Affine { intercept, slope } => Self::Affine {
                a: xs.iter().map(|&x| scale * intercept(t, x)).collect(),
                s: xs.iter().map(|&x| scale * slope(t, x)).collect(),
            },
            GrowthRate::General { rate, d_mass } => Self::Sampled {
                t,
                xs: xs.to_vec(),
                scale,
                rate: rate.clone(),
                d_mass: d_mass.clone(),
            },
        }
    }
}

pub(crate) struct MultiplierStencil {
    base: Vec<f64>,
    birth: BirthTerm,
    growth: GrowthTerm,
}

/// Multiplier-dependent scalars shared by all nodes.
#[derive(Clone, Copy)]
struct Frozen {
    g: f64,
    dg: f64,
}

impl MultiplierStencil {
    pub fn new(base: Vec<f64>, birth: BirthTerm, growth: GrowthTerm) -> Self {
        Self {
            base,
            birth,
            growth,
        }
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    fn freeze(&self, m: f64, with_deriv: bool) -> Frozen {
        match &self.birth {
            BirthTerm::Factored {
                factor,
                factor_deriv,
                ..
            } => Frozen {
                g: factor(m),
                dg: if with_deriv { factor_deriv(m) } else { 0.0 },
            },
            BirthTerm::Sampled { .. } => Frozen { g: 0.0, dg: 0.0 },
        }
    }

    #[inline]
    fn birth_at(&self, i: usize, m: f64, fz: Frozen) -> f64 {
        match &self.birth {
            BirthTerm::Factored { totals, .. } => totals[i] * fz.g,
            BirthTerm::Sampled {
                offsets,
                points,
                coefs,
                rate,
                ..
            } => (offsets[i]..offsets[i + 1])
                .map(|j| coefs[j] * rate(points[j], m))
                .sum(),
        }
    }

    #[inline]
    fn birth_deriv_at(&self, i: usize, m: f64, fz: Frozen) -> f64 {
        match &self.birth {
            BirthTerm::Factored { totals, .. } => totals[i] * fz.dg,
            BirthTerm::Sampled {
                offsets,
                points,
                coefs,
                d_mass,
                ..
            } => (offsets[i]..offsets[i + 1])
                .map(|j| coefs[j] * d_mass(points[j], m))
                .sum(),
        }
    }

    #[inline]
    fn growth_at(&self, i: usize, m: f64) -> f64 {
        match &self.growth {
            GrowthTerm::Affine { a, s } => a[i] + s[i] * m,
            GrowthTerm::Sampled {
                t, xs, scale, rate, ..
            } => scale * rate(*t, xs[i], m),
        }
    }

    #[inline]
    fn growth_deriv_at(&self, i: usize, m: f64) -> f64 {
        match &self.growth {
            GrowthTerm::Affine { s, .. } => s[i],
            GrowthTerm::Sampled {
                t,
                xs,
                scale,
                d_mass,
                ..
            } => scale * d_mass(*t, xs[i], m),
        }
    }

    pub fn values(&self, m: f64) -> Vec<f64> {
        let fz = self.freeze(m, false);
        (0..self.len())
            .map(|i| self.base[i] - self.birth_at(i, m, fz) - self.growth_at(i, m))
            .collect()
    }

    /// Minimum over nodes and its first index.
    pub fn min_value(&self, m: f64) -> (f64, usize) {
        let fz = self.freeze(m, false);
        let mut best = (f64::INFINITY, 0);
        for i in 0..self.len() {
            let v = self.base[i] - self.birth_at(i, m, fz) - self.growth_at(i, m);
            if v < best.0 || v.is_nan() {
                best = (v, i);
                if v.is_nan() {
                    break;
                }
            }
        }
        best
    }

    /// Values and multiplier derivatives at `m`.
    pub fn values_and_derivs(&self, m: f64) -> (Vec<f64>, Vec<f64>) {
        let fz = self.freeze(m, true);
        (0..self.len())
            .map(|i| {
                (
                    self.base[i] - self.birth_at(i, m, fz) - self.growth_at(i, m),
                    -self.birth_deriv_at(i, m, fz) - self.growth_deriv_at(i, m),
                )
            })
            .unzip()
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::model::{builtin_scenario, ScenarioOptions};

    #[test]
    fn factored_and_sampled_agree() {
        let s = builtin_scenario("paper51", &ScenarioOptions::default()).unwrap();
        let xs = [-2.0, -0.5, 0.3, 4.0];
        let coefs = [0.1, 0.2, 0.3, 0.4];
        let base = vec![1.0, 0.5, 0.2, 3.0];
        let factored = MultiplierStencil::new(
            base.clone(),
            BirthTerm::pointwise(&s.birth, &xs, &coefs),
            GrowthTerm::new(&s, 0.2, &xs, 0.01),
        );
        let b = s.birth.clone();
        let general = BirthRate::General {
            rate: Arc::new(move |x, i| b.eval(x, i)),
            d_mass: Arc::new({
                let b = s.birth.clone();
                move |x, i| b.d_mass(x, i)
            }),
        };
        let sampled = MultiplierStencil::new(
            base,
            BirthTerm::pointwise(&general, &xs, &coefs),
            GrowthTerm::new(&s, 0.2, &xs, 0.01),
        );
        for &m in &[-1.0, 0.0, 1.7] {
            let (a, da) = factored.values_and_derivs(m);
            let (b, db) = sampled.values_and_derivs(m);
            for i in 0..4 {
                assert!((a[i] - b[i]).abs() < 1e-14);
                assert!((da[i] - db[i]).abs() < 1e-14);
                let expected = [1.0, 0.5, 0.2, 3.0][i]
                    - coefs[i] * s.b(xs[i], m)
                    - 0.01 * s.r(0.2, xs[i], m);
                assert!((a[i] - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn min_value_reports_first_index() {
        let s = builtin_scenario("compliant", &ScenarioOptions::default()).unwrap();
        let xs = [0.0, 0.0, 0.0];
        let st = MultiplierStencil::new(
            vec![1.0, 0.0, 0.0],
            BirthTerm::pointwise(&s.birth, &xs, &[0.0; 3]),
            GrowthTerm::new(&s, 0.0, &xs, 0.0),
        );
        assert_eq!(st.min_value(1.0), (0.0, 1));
    }
}
