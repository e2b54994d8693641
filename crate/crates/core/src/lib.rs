//! Simulation and inference for preferential attachment graphs whose
//! attachment weight `d(u) + a_t` carries a time-varying offset `a_t`.
//!
//! The observable is the leaf count `x_t` together with the vertex-step
//! indicators `y_t`. From these the crate computes exact conditional moments
//! of the leaf count, estimates the offset on intervals, and tests for,
//! counts, brackets and locates change points in it.

pub mod changepoint;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod moments;
pub mod process;
pub mod rng;
pub mod stats;

pub use changepoint::{
    locate, oracle_gap, pair_test, refine_interval, refine_window, scan, two_step_detect,
    CountMethod, LocateResult, RefineConfig, RefineResult, ScanConfig, ScanResult, TwoStepResult,
};
pub use error::{Error, Result};
pub use estimation::{
    confidence_interval, pivot, solve_a, standardized_residual, EstimateResult, SolveStatus,
    SolverConfig,
};
pub use experiments::{
    emit_qq, make_section4_design, run_replications, Analysis, ExperimentConfig, Scenario,
    SummaryStats,
};
pub use moments::{
    brute_force_moments, conditional_mean, conditional_moments, m_value, moment_path,
    step_matrix, MomentState, Moments, StepMatrix,
};
pub use process::{
    simulate_chain, simulate_chain_from, simulate_graph, transition_probs, ChainState,
    GraphState, LeafKernel, ParamSchedule, StepSchedule, Trace, A_MAX,
};
pub use stats::{chi2_1_quantile, normal_quantile};
