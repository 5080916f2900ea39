use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chj_core::analysis::ProbeKind;
use chj_core::hamiltonians::HamiltonianKind;
use chj_core::model::{builtin_scenario, BoundaryMode, InitialData, ModelScenario, ScenarioOptions};
use chj_core::setup::{SchemeSpec, ZmaxPolicy};
use serde::{Deserialize, Deserializer, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditMode {
    /// Report failures in `audit.json` only.
    #[default]
    Report,
    /// Exit with status 2 when any check fails.
    Strict,
}

/// Everything a command needs; read from JSON, then patched by flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    pub init: Option<InitialData>,
    pub alpha: Option<f64>,
    pub frozen_time: Option<bool>,
    pub scheme: SchemeSpec,
    pub audit_mode: AuditMode,
    pub eps: Option<f64>,
    #[serde(deserialize_with = "eps_list_de")]
    pub eps_list: Vec<f64>,
    pub dts: Vec<f64>,
    pub dt_ref: Option<f64>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub probe: Option<ProbeKind>,
    /// Snapshots kept for the field CSVs; 0 picks about 200.
    pub field_stride: usize,
    pub property_samples: usize,
    pub extinction_threshold: f64,
    pub coincidence_tol: f64,
    pub jump_ratio: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: "paper51".into(),
            init: None,
            alpha: None,
            frozen_time: None,
            scheme: SchemeSpec::default(),
            audit_mode: AuditMode::Report,
            eps: None,
            eps_list: Vec::new(),
            dts: Vec::new(),
            dt_ref: None,
            output_dir: PathBuf::from("."),
            seed: 0,
            probe: None,
            field_stride: 0,
            property_samples: 200,
            extinction_threshold: 1e-3,
            coincidence_tol: 5e-2,
            jump_ratio: 10.0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Option<Self>> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    /// `None` for a blank document.
    pub fn parse(text: &str) -> Result<Option<Self>> {
        if text.trim().is_empty() {
            return Ok(None);
        }
        let cfg = serde_json::from_str(text).map_err(|e| {
            anyhow::anyhow!("line {}, column {}: {e}", e.line(), e.column())
        })?;
        Ok(Some(cfg))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn scenario(&self) -> Result<ModelScenario> {
        let options = ScenarioOptions {
            alpha: self.alpha,
            init: self.init,
            frozen_time: self.frozen_time,
        };
        Ok(builtin_scenario(&self.scenario, &options)?)
    }

    /// The single ε of an `run-ap` style command.
    pub fn single_eps(&self) -> Result<f64> {
        match (self.eps, self.eps_list.as_slice()) {
            (Some(e), _) => Ok(e),
            (None, [e]) => Ok(*e),
            (None, []) => bail!("this command needs --eps"),
            (None, _) => bail!("this command takes one ε, got a list"),
        }
    }

    pub fn eps_values(&self, default: &[f64]) -> Vec<f64> {
        if !self.eps_list.is_empty() {
            self.eps_list.clone()
        } else if let Some(e) = self.eps {
            vec![e]
        } else {
            default.to_vec()
        }
    }
}

fn eps_list_de<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        List(Vec<f64>),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::List(v) => Ok(v),
        Raw::Text(s) => parse_eps_list(&s).map_err(serde::de::Error::custom),
    }
}

/// `a..b` for every decade from `a` to `b`, or a comma-separated list.
pub fn parse_eps_list(s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    let Some((a, b)) = s.split_once("..") else {
        return parse_list(s);
    };
    let (ma, ea) = decimal_parts(a.trim())?;
    let (mb, eb) = decimal_parts(b.trim())?;
    let (va, vb) = (ma * 10f64.powi(ea), mb * 10f64.powi(eb));
    if !(va > 0.0 && vb > 0.0) {
        bail!("ε range `{s}` needs positive ends");
    }
    if (ma - mb).abs() > 1e-12 * ma.abs() {
        bail!("ε range `{s}` must span whole decades");
    }
    let step = if eb <= ea { -1 } else { 1 };
    let mut out = Vec::new();
    let mut e = ea;
    loop {
        out.push(format!("{ma}e{e}").parse::<f64>()?);
        if e == eb {
            break;
        }
        e += step;
    }
    Ok(out)
}

/// Normalizes a literal to `m × 10^e` with `1 <= m < 10`.
fn decimal_parts(s: &str) -> Result<(f64, i32)> {
    let v: f64 = s.parse().with_context(|| format!("`{s}` is not a number"))?;
    if !(v.is_finite() && v > 0.0) {
        bail!("`{s}` must be a positive number");
    }
    let text = format!("{v:e}");
    let (m, e) = text.split_once('e').expect("scientific format");
    Ok((m.parse()?, e.parse()?))
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .with_context(|| format!("`{}` is not a number", p.trim()))
        })
        .collect()
}

pub fn parse_domain(s: &str) -> Result<(f64, f64)> {
    match parse_list(s)?.as_slice() {
        [lo, hi] => Ok((*lo, *hi)),
        _ => bail!("domain takes `lo,hi`, got `{s}`"),
    }
}

/// Flags that override the config file.
#[derive(clap::Args, Clone, Debug, Default)]
pub struct Overrides {
    /// JSON run configuration
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<String>,
    /// conv or notconv
    #[arg(long)]
    pub init: Option<InitialData>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub frozen_time: Option<bool>,
    /// Final time
    #[arg(long = "T", visible_alias = "horizon")]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Working slope bound
    #[arg(long = "S", visible_alias = "slope-cap")]
    pub slope_cap: Option<f64>,
    /// `lo,hi`
    #[arg(long)]
    pub domain: Option<String>,
    /// cl, upwind, lf, p1, ccs or ap_limit
    #[arg(long)]
    pub ham: Option<HamiltonianKind>,
    #[arg(long)]
    pub dz: Option<f64>,
    #[arg(long)]
    pub zmax: Option<f64>,
    /// fixed or tail_bound
    #[arg(long)]
    pub zmax_policy: Option<String>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub linearize: bool,
    /// shrink or linear_extrapolate
    #[arg(long)]
    pub boundary_mode: Option<BoundaryMode>,
    #[arg(long)]
    pub cfl_b_bound: Option<f64>,
    /// One value, a comma list, or a decade range `a..b`
    #[arg(long)]
    pub eps: Option<String>,
    /// Comma-separated time steps
    #[arg(long)]
    pub dts: Option<String>,
    #[arg(long)]
    pub dt_ref: Option<f64>,
    /// Output directory
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Exit with status 2 when an audit check fails
    #[arg(long)]
    pub strict: bool,
    /// jump, flat_monotone, extinction, negative_i or coincidence
    #[arg(long)]
    pub probe: Option<ProbeKind>,
    #[arg(long)]
    pub field_stride: Option<usize>,
    #[arg(long)]
    pub property_samples: Option<usize>,
}

impl Overrides {
    /// File values first, then any flag given on the command line.
    pub fn resolve(&self) -> Result<Option<RunConfig>> {
        let mut c = match &self.config {
            Some(path) => match RunConfig::load(path)? {
                Some(c) => c,
                None => return Ok(None),
            },
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:expr),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { $field = v.into(); })*
            };
        }
        set!(
            scenario => c.scenario,
            horizon => c.scheme.horizon,
            dt => c.scheme.dt,
            slope_cap => c.scheme.slope_cap,
            ham => c.scheme.kind,
            dz => c.scheme.dz,
            zmax => c.scheme.zmax,
            boundary_mode => c.scheme.boundary_mode,
            cfl_b_bound => c.scheme.cfl_b_bound,
            out => c.output_dir,
            seed => c.seed,
            field_stride => c.field_stride,
            property_samples => c.property_samples,
        );
        if self.init.is_some() {
            c.init = self.init;
        }
        if self.alpha.is_some() {
            c.alpha = self.alpha;
        }
        if self.frozen_time.is_some() {
            c.frozen_time = self.frozen_time;
        }
        if self.theta.is_some() {
            c.scheme.theta = self.theta;
        }
        if self.probe.is_some() {
            c.probe = self.probe;
        }
        if self.dt_ref.is_some() {
            c.dt_ref = self.dt_ref;
        }
        if self.linearize {
            c.scheme.linearize = true;
        }
        if self.strict {
            c.audit_mode = AuditMode::Strict;
        }
        if let Some(d) = &self.domain {
            c.scheme.domain = Some(parse_domain(d)?);
        }
        if let Some(p) = &self.zmax_policy {
            c.scheme.zmax_policy = match p.to_ascii_lowercase().replace('-', "_").as_str() {
                "fixed" => ZmaxPolicy::Fixed,
                "tail_bound" | "tail" => ZmaxPolicy::TailBound,
                _ => bail!("unknown zmax policy `{p}`"),
            };
        }
        if let Some(e) = &self.eps {
            let list = parse_eps_list(e)?;
            if let [single] = list.as_slice() {
                c.eps = Some(*single);
                c.eps_list.clear();
            } else {
                c.eps = None;
                c.eps_list = list;
            }
        }
        if let Some(d) = &self.dts {
            c.dts = parse_list(d)?;
        }
        Ok(Some(c))
    }
}
