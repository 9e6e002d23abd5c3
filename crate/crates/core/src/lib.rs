//! Multi-period stochastic covering location.
//!
//! The crate covers the whole pipeline for the general covering location
//! model with time-dependent data and a finite scenario set:
//!
//! * [`instance`]: problem data, validation, the random generator and the
//!   canonical JSON file format.
//! * [`lp`]: a dense bounded-variable primal simplex.
//! * [`model`]: solution types, objective evaluation, the exact second stage,
//!   LP relaxations and MPS / LP exports.
//! * [`lagrangian`]: the relaxation of the covering equalities, its two
//!   subproblems, feasible upper bounds and subgradient optimization.
//! * [`exact`]: exhaustive optimum, wait-and-see value and static counterpart
//!   for small instances.
//! * [`reductions`]: compiles classical covering models into instances.

pub mod exact;
pub mod instance;
pub mod lagrangian;
pub mod lp;
pub mod model;
pub mod reductions;
pub mod unimodular;

#[cfg(test)]
pub(crate) mod fixtures;

pub use instance::{generate, read_instance, write_instance, GeneratorConfig, Instance, InstanceError, Violation};
pub use lp::{solve_lp, LinearProgram, LpSolution, LpStatus, Sense};
pub use model::{
    evaluate, evaluate_first_stage, CellAssignment, FirstStageSolution, Formulation, Linking, ModelError,
    ModelVariant, SecondStageSolution,
};
pub use lagrangian::{run_heuristic, HeuristicConfig, Multipliers, RunReport, StopRule, Variant};
pub use exact::{solve_exact, static_counterpart, value_of_modeling, wait_and_see, ExactError, ExactResult, ValueOfModeling};
pub use reductions::{reduce, CaseModel, Reduction, SpecialCase};
