//! End-to-end SLO resource allocation for microservice chains.

pub mod alloc;
pub mod cli;
pub mod forecast;
pub mod graph;
pub mod llp;
pub mod mode;
pub mod scaling;
pub mod sim;
pub mod update;

pub use alloc::{
    allocate_chain, init_shared_slo, proportional_split, pslo_transform, AllocError,
    AllocationConfig, AllocationPlan, ChainPlan, ServiceAllocation,
};
pub use graph::{
    AbstractNode, Chain, ChainNode, CompositeKind, EntryPoint, GraphError, ServiceGraph,
    SharedIndex,
};
pub use forecast::{ForecastError, Forecaster, ForecasterSpec, Prediction};
pub use llp::{CurveShape, LlpError, LlpProfile};
pub use mode::{Mode, ModeError, ModeState, ModeTransition, OctModel, OscillationWindow};
pub use scaling::{
    apply_decisions, decide_hpa, decide_lsram, push_decision, HpaConfig, ScaleError, ScaleReason,
    ScalingDecision,
};
pub use sim::{
    run_simulation, synthesize_trace, Policy, SimConfig, SimError, SimOutput, SimReport,
    TraceKind, TraceParams, WorkloadTrace,
};
pub use update::{update_shared_slo, PlanController, TrafficShares, UpdateError, UpdatePolicy};
