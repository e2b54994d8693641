//! Testing, counting, bracketing and locating change points of the offset.

mod locate;
mod refine;
mod scan;

pub use locate::{leaf_recursion, locate, locate_from_path, oracle_gap, oracle_peak, LocateResult};
pub use refine::{
    interval_contains, refine_interval, refine_window, selection_window, two_step_detect,
    RefineConfig, RefineResult, RefineStage, TwoStepResult,
};
pub use scan::{
    cuts, local_maxima, pair_test, ratio_count, scan, CountMethod, Counts, ScanConfig,
    ScanResult, MIN_INTERVAL,
};
