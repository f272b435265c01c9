//! Bayesian sequential detection of multiple change points on network data.
//!
//! A network of sensors is modeled as a graph: every node emits a stream of
//! observations whose distribution switches at a random, geometrically
//! distributed change time, and every edge emits a stream that switches as
//! soon as either endpoint does. The crate computes exact posteriors over
//! the change times by belief propagation when the graph has no cycles,
//! turns them into sequential stopping rules with false-alarm guarantees,
//! and ships a simulation harness that measures detection delay against the
//! predicted asymptotics.

pub mod config;
pub mod detection;
pub mod experiment;
pub mod graph;
pub mod inference;
pub mod logsum;
pub mod model;
pub mod oracle;
pub mod theory;
pub mod rng;
pub mod validate;

pub use config::{parse_config, parse_config_str, ConfigError, ExperimentConfig, Functional, NMaxPolicy};
pub use detection::{
    auto_n_max, run_mp_rule, run_single_rule, DetectionError, DetectionSession, Rule,
    SessionStatus, StoppingOutcome, StoppingRuleSpec,
};
pub use experiment::{
    emit_csv, emit_trial_log, run_experiment, write_summary, AggregateRow, ExperimentError,
    ExperimentResult, TrialRecord, AGGREGATE_HEADER,
};
pub use graph::{GraphError, StatisticalGraph};
pub use inference::{
    node_posterior, pair_posterior, run_loopy_bp, run_tree_bp, run_tree_bp_rooted,
    subset_min_cdf, InferenceError, LikelihoodProfile, MessageTable, PairPosterior, PosteriorSet,
    TailAugmentedPrior,
};
pub use model::{
    build_model, normalize_subset, sample_change_points, sample_observations, sample_step,
    ChangePointAssignment, GeometricPrior, ModelError, NetworkModel, ObservationPanel, Phase,
    StepObservations, TwoPhaseDensity,
};
pub use oracle::{
    beyond_horizon_constancy_check, concentration_diagnostic, enumerate_joint_posterior,
    marginal_lr, ChangeHypothesis, ConcentrationSummary, JointPosteriorTable, OracleError,
    DEFAULT_CELL_BUDGET,
};
pub use rng::trial_rng;
pub use validate::{run_validation, CheckOutcome, ValidationReport};
pub use theory::{
    asymptotic_slope, info_functional, kl_divergence, kl_divergence_quadrature, prior_exponent,
    InformationRow, InformationSummary,
};
