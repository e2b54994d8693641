//! Schedules, the leaf-count kernel and the two simulators.

mod chain;
mod graph;
mod kernel;
mod schedule;
mod trace;

pub use chain::{run_chain, simulate_chain, simulate_chain_from, ChainState};
pub use graph::{simulate_graph, GraphState};
pub use kernel::{transition_probs, LeafKernel};
pub use schedule::{min_density, ParamSchedule, StepKind, StepSchedule, A_MAX};
pub use trace::Trace;
