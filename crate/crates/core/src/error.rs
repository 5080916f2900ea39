use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("invalid override `{name}`: {reason}")]
    InvalidOverride { name: String, reason: String },

    #[error("quadrature mass defect {defect:.3e} exceeds the allowed {allowed:.3e}")]
    QuadratureAccuracy { defect: f64, allowed: f64 },

    #[error("quadrature has no nonzero node (zmax = {zmax}, dz = {dz})")]
    EmptyQuadrature { zmax: f64, dz: f64 },

    #[error(
        "slope {slope:.6e} overflows the Hamiltonian{} (cap {cap:.3e}); linearize or raise the slope cap",
        location(*step, *node)
    )]
    SlopeOverflow {
        slope: f64,
        cap: f64,
        step: Option<usize>,
        node: Option<usize>,
    },

    #[error("Hamiltonian error: {0}")]
    Hamiltonian(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("no multiplier root at step {step}: bracket [{lo:.6e}, {hi:.6e}] after {doublings} doublings")]
    NoRoot {
        step: usize,
        lo: f64,
        hi: f64,
        doublings: usize,
    },

    #[error("non-finite {what} at step {step}")]
    NonFinite { what: &'static str, step: usize },

    #[error("stability error at step {step}, node {node}: exponent {exponent:.6e} beyond cap")]
    Stability {
        step: usize,
        node: usize,
        exponent: f64,
    },

    #[error("{what} = {value} outside [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("study setup error: {0}")]
    StudySetup(String),
}

fn location(step: Option<usize>, node: Option<usize>) -> String {
    match (step, node) {
        (Some(n), Some(i)) => format!(" at step {n}, node {i}"),
        (Some(n), None) => format!(" at step {n}"),
        (None, Some(i)) => format!(" at node {i}"),
        (None, None) => String::new(),
    }
}

impl Error {
    /// Attaches a time-step index to errors raised inside a stencil loop.
    pub fn at_step(self, n: usize) -> Self {
        match self {
            Error::SlopeOverflow {
                slope,
                cap,
                step: None,
                node,
            } => Error::SlopeOverflow {
                slope,
                cap,
                step: Some(n),
                node,
            },
            Error::NoRoot {
                lo, hi, doublings, ..
            } => Error::NoRoot {
                step: n,
                lo,
                hi,
                doublings,
            },
            Error::NonFinite { what, .. } => Error::NonFinite { what, step: n },
            Error::Stability { node, exponent, .. } => Error::Stability {
                step: n,
                node,
                exponent,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
