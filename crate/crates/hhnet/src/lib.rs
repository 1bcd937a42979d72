//! Estimation of within-household contact network distributions from
//! egocentric survey data.
//!
//! Surveyed household members report their own contacts to the other three
//! members, so each report covers half of the six dyads in a four-person
//! household. This crate estimates the full probability distribution over
//! all 64 possible contact networks from such reports by penalized maximum
//! likelihood, smoothing toward a dyad-independence model with a weight
//! selected by leave-one-out cross-validation. It also provides Fisher and
//! bootstrap uncertainty, conservative product intervals for the
//! independence model, a Monte-Carlo simulation-study harness, and ingestion
//! of diary-format survey files.
//!
//! Start with the runnable examples (`cargo run --example estimate_three_ways`)
//! or the `hhnet` binary, which exposes the pipeline as subcommands.

pub mod independence;
pub mod ingest;
pub mod likelihood;
pub mod network;
pub mod optim;
pub mod selection;
pub mod simulation;

pub use independence::{
    conservative_network_ci, exact_binomial_ci, independence_mle, penalty_for,
    product_distribution, DyadProbabilities, IndependenceError, IntervalVector,
};
pub use likelihood::{
    adjacency_penalty, exchangeability_penalty, hellinger_penalty, log_likelihood,
    LikelihoodError, Penalty, PenaltyChoice, PenalizedObjective, ProbabilityVector,
};
pub use network::{
    distinct_configurations, enumerate_configurations, exchangeability_orbits, Dyad, DyadVector,
    NetworkError, NetworkIndex, PartialObservation, Role,
};
pub use optim::{
    fisher_standard_errors, hessian_rank, maximize, FitOptions, FitResult, OptimError,
    UncertaintyResult,
};
pub use selection::{
    bootstrap, fit_full, loo_cross_validate, select_lambda, BootstrapResult, CvCurve, CvOptions,
    ScoreScale, SelectionError,
};
pub use simulation::{
    builtin_scenario, default_grid, lambda_range, run_study, run_study_with, RespondentFrequency,
    SimulationError, StudyConfig, StudyMetrics,
};
