use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::kernel::Kernel;
use super::scenario::{BirthRate, GrowthForm, GrowthRate, HypothesisConstants, ModelScenario};
use crate::error::{Error, Result};

pub const SCENARIO_NAMES: [&str; 4] = ["paper51", "oscillatory", "square_wave", "compliant"];

const ALPHA_RANGE: (f64, f64) = (1e-3, 100.0);
const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialData {
    /// `sqrt(1 + x²) - 1`.
    #[default]
    Conv,
    /// Two local minima, near x = -3 and x = 2.
    NotConv,
}

impl std::str::FromStr for InitialData {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "conv" | "convex" => Ok(Self::Conv),
            "notconv" | "nonconvex" => Ok(Self::NotConv),
            _ => Err(Error::InvalidOverride {
                name: "init".into(),
                reason: format!("expected `conv` or `notconv`, got `{s}`"),
            }),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioOptions {
    /// Angular frequency of the moving optimum (`oscillatory` only).
    pub alpha: Option<f64>,
    pub init: Option<InitialData>,
    /// Evaluate the growth rate at t = 0 for all times (`paper51` only).
    pub frozen_time: Option<bool>,
}

pub fn u_conv(x: f64) -> f64 {
    (1.0 + x * x).sqrt() - 1.0
}

pub fn u_notconv(x: f64) -> f64 {
    let l = (1.0 + (x + 3.0).powi(2)).powf(0.25) - 1.0;
    let r = (2.0 + (x - 2.0).powi(2)).powf(0.25) - 1.0;
    l * r
}

/// Splits `oscillatory(3)` into a name and an inline alpha.
fn parse_name(name: &str) -> Result<(&str, Option<f64>)> {
    let name = name.trim();
    match name.split_once('(') {
        None => Ok((name, None)),
        Some((base, rest)) => {
            let inner = rest.strip_suffix(')').ok_or_else(|| Error::InvalidOverride {
                name: "alpha".into(),
                reason: format!("malformed scenario name `{name}`"),
            })?;
            let alpha = inner.trim().parse::<f64>().map_err(|e| Error::InvalidOverride {
                name: "alpha".into(),
                reason: format!("`{inner}`: {e}"),
            })?;
            Ok((base.trim(), Some(alpha)))
        }
    }
}

pub fn builtin_scenario(name: &str, options: &ScenarioOptions) -> Result<ModelScenario> {
    let (base, inline_alpha) = parse_name(name)?;
    let alpha = match (inline_alpha, options.alpha) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::InvalidOverride {
                name: "alpha".into(),
                reason: format!("name gives {a} but override gives {b}"),
            })
        }
        (a, b) => a.or(b),
    };
    if alpha.is_some() && base != "oscillatory" {
        return Err(Error::InvalidOverride {
            name: "alpha".into(),
            reason: format!("scenario `{base}` has no alpha parameter"),
        });
    }
    if options.frozen_time.is_some() && base != "paper51" {
        return Err(Error::InvalidOverride {
            name: "frozen_time".into(),
            reason: format!("scenario `{base}` has no frozen-time variant"),
        });
    }
    let init = options.init.unwrap_or_default();
    match base {
        "paper51" => Ok(paper51(init, options.frozen_time.unwrap_or(false))),
        "oscillatory" => {
            let alpha = alpha.unwrap_or(DEFAULT_ALPHA);
            if !(alpha.is_finite() && (ALPHA_RANGE.0..=ALPHA_RANGE.1).contains(&alpha)) {
                return Err(Error::InvalidOverride {
                    name: "alpha".into(),
                    reason: format!(
                        "{alpha} outside [{}, {}]",
                        ALPHA_RANGE.0, ALPHA_RANGE.1
                    ),
                });
            }
            Ok(oscillatory(alpha, init))
        }
        "square_wave" => Ok(square_wave(init)),
        "compliant" => Ok(compliant(init)),
        _ => Err(Error::UnknownScenario(name.to_string())),
    }
}

fn initial_fn(init: InitialData) -> Arc<dyn Fn(f64) -> f64 + Send + Sync> {
    match init {
        InitialData::Conv => Arc::new(u_conv),
        InitialData::NotConv => Arc::new(u_notconv),
    }
}

/// Lipschitz constant, coercivity envelope and curvature bound of the
/// initial data on `domain`.
struct InitBounds {
    lip: f64,
    a_lo: f64,
    a_hi: f64,
    b_lo: f64,
    b_hi: f64,
    curvature: f64,
}

fn init_bounds(init: InitialData, domain: (f64, f64)) -> InitBounds {
    match init {
        // sqrt(1+x²)-1 is 1-Lipschitz, lies between |x|/2 - 0.2 and |x|,
        // and has second derivative (1+x²)^{-3/2} <= 1.
        InitialData::Conv => InitBounds {
            lip: 1.0,
            a_lo: 0.5,
            a_hi: 1.0,
            b_lo: -0.2,
            b_hi: 0.0,
            curvature: 1.0,
        },
        InitialData::NotConv => {
            let n = 20_000;
            let h = (domain.1 - domain.0) / n as f64;
            let vals: Vec<f64> = (0..=n).map(|i| u_notconv(domain.0 + i as f64 * h)).collect();
            let lip = vals
                .windows(2)
                .map(|w| ((w[1] - w[0]) / h).abs())
                .fold(0.0, f64::max);
            let curvature = vals
                .windows(3)
                .map(|w| (w[0] - 2.0 * w[1] + w[2]) / (h * h))
                .fold(f64::NEG_INFINITY, f64::max);
            let u0 = u_notconv(0.0);
            InitBounds {
                lip: lip * 1.01,
                a_lo: 0.0,
                a_hi: lip * 1.01,
                b_lo: 0.0,
                b_hi: u0,
                curvature: curvature * 1.01,
            }
        }
    }
}

fn unit_weight() -> Arc<dyn Fn(f64) -> f64 + Send + Sync> {
    Arc::new(|_| 1.0)
}

fn paper51(init: InitialData, frozen_time: bool) -> ModelScenario {
    let domain = (-10.0, 10.0);
    let bounds = init_bounds(init, domain);
    let time_scale: Arc<dyn Fn(f64) -> f64 + Send + Sync> = if frozen_time {
        Arc::new(|_| 1.0)
    } else {
        Arc::new(|t| t + 1.0)
    };
    ModelScenario {
        name: if frozen_time { "paper51_frozen".into() } else { "paper51".into() },
        birth: BirthRate::Separable {
            trait_factor: Arc::new(|x| {
                let y = (x + 1.0) * (x + 1.0);
                (8.0 - y) / (1.0 + y)
            }),
            mass_factor: Arc::new(|i| 1.0 / (2.0 + i)),
            mass_factor_deriv: Arc::new(|i| -1.0 / ((2.0 + i) * (2.0 + i))),
        },
        growth: GrowthRate::Affine {
            intercept: Arc::new(|_, x| {
                let y = (x + 3.0) * (x + 3.0);
                -y / (1.0 + y)
            }),
            slope: Arc::new(move |t, x| -(x * x) / (1.0 + x * x) * time_scale(t)),
        },
        growth_form: GrowthForm::Population,
        weight: unit_weight(),
        initial: initial_fn(init),
        kernel: Kernel::gaussian(1.0),
        domain,
        // advisory: the model leaves the hypotheses far from x = -1
        constants: HypothesisConstants {
            b_max: 4.0,
            b_lip: 3.0,
            k: 3.0,
            i_min: 0.5,
            i_max: 3.0,
            lip_init: bounds.lip,
            a_lo: bounds.a_lo,
            a_hi: bounds.a_hi,
            b_lo: bounds.b_lo,
            b_hi: bounds.b_hi,
            psi_min: 1.0,
            psi_max: 1.0,
            init_curvature: bounds.curvature,
        },
        time_independent_growth: frozen_time,
        multiplier_floor: -2.0,
    }
}

fn moving_optimum(
    name: String,
    optimum: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    init: InitialData,
) -> ModelScenario {
    let domain = (-10.0, 10.0);
    let bounds = init_bounds(init, domain);
    ModelScenario {
        name,
        birth: BirthRate::Separable {
            trait_factor: Arc::new(|_| 2.0),
            mass_factor: Arc::new(|_| 1.0),
            mass_factor_deriv: Arc::new(|_| 0.0),
        },
        growth: GrowthRate::Affine {
            intercept: Arc::new(move |t, x| {
                let d = x - optimum(t);
                -d * d
            }),
            slope: Arc::new(|_, _| -1.0),
        },
        growth_form: GrowthForm::Population,
        weight: unit_weight(),
        initial: initial_fn(init),
        kernel: Kernel::gaussian(1.0),
        domain,
        constants: HypothesisConstants {
            b_max: 2.0,
            b_lip: 0.0,
            k: 1.0,
            i_min: 0.0,
            i_max: 2.0,
            lip_init: bounds.lip,
            a_lo: bounds.a_lo,
            a_hi: bounds.a_hi,
            b_lo: bounds.b_lo,
            b_hi: bounds.b_hi,
            psi_min: 1.0,
            psi_max: 1.0,
            init_curvature: bounds.curvature,
        },
        time_independent_growth: false,
        multiplier_floor: f64::NEG_INFINITY,
    }
}

fn oscillatory(alpha: f64, init: InitialData) -> ModelScenario {
    moving_optimum(
        format!("oscillatory({alpha})"),
        Arc::new(move |t| 3.0 * (alpha * t).sin()),
        init,
    )
}

fn square_wave(init: InitialData) -> ModelScenario {
    moving_optimum(
        "square_wave".into(),
        Arc::new(|t| {
            if t > 0.3 {
                6.0 * (3.0 * t - 0.9).sin().ceil()
            } else {
                0.0
            }
        }),
        init,
    )
}

fn compliant(init: InitialData) -> ModelScenario {
    let domain = (-10.0, 10.0);
    let bounds = init_bounds(init, domain);
    // |R| <= 3, |R_x| <= 3√3/8 and |R_xx| <= 2 for I in [0, 4]
    let k2 = 3.0 + 3.0 * 3f64.sqrt() / 8.0 + 2.0;
    ModelScenario {
        name: "compliant".into(),
        birth: BirthRate::Separable {
            trait_factor: Arc::new(|_| 1.0),
            mass_factor: Arc::new(|_| 1.0),
            mass_factor_deriv: Arc::new(|_| 0.0),
        },
        growth: GrowthRate::Affine {
            intercept: Arc::new(|_, x| 1.0 + 1.0 / (1.0 + x * x)),
            slope: Arc::new(|_, _| -1.0),
        },
        growth_form: GrowthForm::Direct,
        weight: unit_weight(),
        initial: initial_fn(init),
        kernel: Kernel::gaussian(1.0),
        domain,
        constants: HypothesisConstants {
            b_max: 1.0,
            b_lip: 0.0,
            k: k2,
            i_min: 1.0,
            i_max: 2.0,
            lip_init: bounds.lip,
            a_lo: bounds.a_lo,
            a_hi: bounds.a_hi,
            b_lo: bounds.b_lo,
            b_hi: bounds.b_hi,
            psi_min: 1.0,
            psi_max: 1.0,
            init_curvature: bounds.curvature,
        },
        time_independent_growth: true,
        multiplier_floor: f64::NEG_INFINITY,
    }
}
