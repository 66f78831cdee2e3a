//! Utilization-aware configuration allocation for coarse-grained
//! reconfigurable arrays, with an NBTI lifetime model.
//!
//! The pipeline is: [`workload`] (DFGs and traces) → [`mapper`] (greedy
//! placement into a virtual configuration) → [`allocation`] (pivot per
//! execution) → [`metrics`] (per-cell utilization) → [`aging`] (lifetime of
//! the hottest cell). [`fabric`] executes configurations and models the
//! reconfiguration logic; [`dse`] runs scenarios and sweeps.

pub mod aging;
pub mod allocation;
pub mod dse;
pub mod fabric;
pub mod mapper;
pub mod metrics;
pub mod workload;

pub use aging::{AgingError, AgingParams, UtilizationRate};
pub use allocation::{AllocationPolicy, PhysicalAllocation, Pivot, PivotScheduler};
pub use dse::{Preset, Scenario, ScenarioResult, SweepConfig};
pub use fabric::{ExecResult, MemoryModel, ReconfigPlan};
pub use mapper::{FabricDims, Placement, VirtualConfiguration};
pub use metrics::{UtilizationMap, UtilizationSummary, Weighting};
pub use workload::{Dfg, GeneratorParams, Opcode, Operation, TraceEntry, ValueRef, Workload};
