//! Fixed-confidence active ranking of n experts evaluated on d tasks.
//!
//! Experts are assumed totally ordered by entrywise dominance of their mean
//! performance rows. The crate provides:
//!
//! - an adaptive two-expert comparison that concentrates queries on
//!   high-gap tasks ([`duel`]),
//! - full ranking by binary insertion over noisy duels and best-expert
//!   identification by successive approximate max-search ([`rank`]),
//! - a Borda-score / uniform-task-sampling baseline ([`baseline`]),
//! - seeded, query-counting sampling oracles and instance generators
//!   ([`env`]), and
//! - a Monte Carlo harness with sweeps and CSV/JSON/SVG emission
//!   ([`harness`]).

pub mod baseline;
pub mod duel;
pub mod env;
pub mod harness;
pub mod model;
pub mod rank;

pub use baseline::{borda_best_expert, borda_duel, BordaConfig, BordaDuelState};
pub use duel::{compare, DuelConfig, DuelConstants, DuelOutcome, DuelTrace, GridCell};
pub use env::{
    derive_seed, gen_chain_instance, gen_sparse_instance, read_matrix, write_matrix, EnvError,
    NoiseModel, PairOracle, SamplingOracle,
};
pub use harness::{
    run_replications, sweep_dimension, sweep_sparsity, AlgoId, ExperimentConfig, ExperimentMode,
    HarnessError, InstanceSpec, Profile, RunRecord, SweepTable,
};
pub use model::{
    complexity_report, effective_sparsity, gap_profile, validate_instance, ComplexityReport,
    EffectiveSparsity, GapProfile, ModelError, MonotoneInstance, PerformanceMatrix,
};
pub use rank::{
    active_ranking, best_expert, binary_search, max_search, BestExpertResult, RankingResult,
};
