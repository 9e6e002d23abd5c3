//! Shared inputs for the solver benchmarks.

use covloc::{generate, GeneratorConfig, Instance};

/// A generated instance with the default recipe.
pub fn instance(n: usize, periods: usize, scenarios: usize, seed: u64) -> Instance {
    generate(&GeneratorConfig::new(n, periods, scenarios, seed)).expect("valid generator config")
}
