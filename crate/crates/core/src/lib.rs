//! Monte Carlo laboratory for a priori versus post hoc theorizing: idea
//! universes, theory types, selection and publication, the
//! Darwinian/statistical learning decomposition, an exact oracle for small
//! discrete models, and deterministic parallel sweeps.

pub mod cli;
pub mod decomposition;
pub mod error;
pub mod figures;
pub mod io;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod sweep;
pub mod theorizing;
pub mod validation;

pub use cli::cli_main;
pub use decomposition::{check_identity, estimate_report, improvement_ratio, DecompositionReport};
pub use error::{Error, Result};
pub use model::{sample_universe, IdeaUniverse, ScalarDistribution, UniverseConfig};
pub use oracle::{enumerate_exact, mc_vs_oracle, DiscreteModelConfig};
pub use rng::RngSeed;
pub use sweep::{figure_preset, find_crossing, run_sweep, simulate_report, Execution, SweepConfig, SweepResult};
pub use theorizing::{ModelConfig, PolicyRule, Regime, TheoryType, TrialRecord};
