//! Macro-micro evolution: a genetic search over expression structures whose
//! surviving candidates have their parameters tuned by an inner genetic search.
//!
//! Both layers share the fitness `rho * fc + (1 - rho) * h` (lower is better)
//! where `fc` penalizes complexity above the target `tau` and `h` is the MSE
//! relative to the worst surviving expression of the generation.

mod config;
mod dataset;
mod engine;
mod individual;
mod micro;
mod report;
pub mod variation;

pub use config::{MicroConfig, MmeConfig};
pub use dataset::RegressionDataset;
pub use engine::{initial_population, macro_generation, remove_duplicates, run_mme, run_mme_with, GenerationStats};
pub use individual::{
    accuracy_h, assign_fitness, compute_mse, fc, fitness, fitness_value, rank_cmp, worst_mse, Individual, Mse,
};
pub use micro::micro_evolve;
pub use report::{read_results, sort_entries, write_results, MmeReport, ReportEntry, RESULTS_HEADER};
