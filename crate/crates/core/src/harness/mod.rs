//! Scenario files, energy profiles, the Monte-Carlo runner and result output.

pub mod emit;
pub mod profile;
pub mod runner;
pub mod scenario;

pub use emit::{emit_results, parse_results, write_results, Format};
pub use profile::{bs_budgets_at, load_profiles, EnergyProfile, ProfileMix};
pub use runner::{run_scenario, scenario_profile, ResultRow, ResultTable, THREADS_ENV};
pub use scenario::Scenario;
