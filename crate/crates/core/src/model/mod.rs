mod discretization;
mod grid;
mod kernel;
mod registry;
mod scenario;

pub use discretization::{eta_for, make_discretization, Discretization};
pub use grid::{BoundaryMode, Domain, TimeGrid, TraitGrid};
pub use kernel::Kernel;
pub use registry::{
    builtin_scenario, u_conv, u_notconv, InitialData, ScenarioOptions, SCENARIO_NAMES,
};
pub use scenario::{
    BirthFn, BirthRate, FieldFn, GrowthFn, GrowthForm, GrowthRate, HypothesisConstants,
    ModelScenario, TraitFn,
};
