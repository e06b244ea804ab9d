//! Averaged-dq simulation of a centralized MV-UPS data-center block on a weak
//! grid: a three-mode grid-forming supervisor (DC stiff bus, current-limited
//! fault ride-through with UPS-BESS buffering and rate-limited soft return,
//! droop/FFR grid-draw modulation) against two grid-following benchmarks,
//! plus an EMT-style abc cross-check and a swing-equation bulk-frequency
//! proxy.

pub mod blocks;
pub mod config;
pub mod controllers;
pub mod emt;
pub mod error;
pub mod metrics;
pub mod plant;
pub mod scenario;
pub mod sim;
pub mod studies;

pub use error::SimError;
pub use metrics::{fault_window_metrics, metrics_for, render_table, FaultMetrics, TableFormat};
pub use plant::{holdup_budget, Dq};
pub use scenario::{ControllerKind, Scenario};
pub use sim::{run_scenario, Trace, TraceRecord};
