//! Capacity-region model and discrete-event simulation of edge storage
//! systems, with tooling to measure how well the model predicts the system.

pub mod capacity;
pub mod cli;
pub mod error;
pub mod eval;
pub mod lp;
pub mod model;
pub mod seed;
pub mod sim;
pub mod workload;

pub use capacity::{
    check_coverage, max_load, region_sweep, service_cost, verdict, Assignment, CapacityModel,
    Coverage, ModelVerdict, SweepPoint,
};
pub use error::{Error, Result};
pub use model::{
    build_plan, serving_options, DemandVector, NodeId, ObjectId, Scheme, ServingOption,
    StoragePlan, StoredItem,
};
pub use workload::{
    aggregate, generate_trace, sample_demands, trace_to_demand, zipf_popularity, Behavior,
    Request, Trace, TruncatedNormal, UserId, Window, WorkloadSpec,
};
pub use sim::{
    mm1_drop_experiment, simulate, Mm1Summary, NodeStats, Routing, ServiceMode, SimConfig,
    SimResult,
};
pub use eval::{
    classify, geo_experiment, mcc, run_grid, scale_experiment, Confusion, CorrelationReport,
    ExperimentConfig, GeoSpec, GridReport, GridSpec, LabeledPair, ScaleSpec,
};
