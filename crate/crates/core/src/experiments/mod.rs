//! Replicated simulation studies over preset designs.

mod design;
mod harness;
mod report;
mod summary;

pub use design::{make_section4_design, section4_steps, three_phase_schedule, Design, StepDesign};
pub use harness::{
    analyze, run_outcomes, run_replications, simulate_replication, summarize, Analysis,
    ExperimentConfig, RepOutcome, Scenario, ScenarioParams, Simulator,
};
pub use report::{
    write_cells_csv, write_experiment, write_locate_series, write_scan_series, write_tallies_csv,
};
pub use summary::{emit_qq, Cell, SummaryStats, QQ_MIN_SAMPLES};
