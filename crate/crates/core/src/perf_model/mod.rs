//! Resource estimates and the system timing model.

pub mod cost;
pub mod sim;

pub use cost::{estimate_resources, max_replication, CostTable, FormatCost, ResourceEstimate};
pub use sim::{
    compute_cycles, double_buffered_makespan, ideal_gflops, metrics, serial_makespan, simulate, FrequencyModel, IterationTimes, PerfError,
    SimReport,
};

/// Default utilization cap for replication.
pub const DEFAULT_CAP: f64 = 0.8;

/// The shipped cost file; equal to `CostTable::default()`.
pub const DEFAULT_COSTS: &str = include_str!("../../boards/default_costs.toml");
