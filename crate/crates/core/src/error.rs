use thiserror::Error;

use crate::model::{CapabilityId, TaskId};

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("task {task} requires capability {capability} but has no positive samples")]
    NoPositiveSamples { task: TaskId, capability: CapabilityId },

    #[error("learning program for capability {0} is infeasible")]
    InfeasibleLp(CapabilityId),

    #[error("learning program for capability {capability} stopped: {status:?}")]
    LearnerSolveFailed { capability: CapabilityId, status: crate::lp::SolveStatus },

    #[error("allocation problem is infeasible")]
    InfeasibleAllocation,

    #[error("allocation search hit its node limit{}", if incumbent.is_some() { " (best plan so far attached)" } else { " without a feasible plan" })]
    AllocationLimit { incumbent: Option<Box<crate::alloc::AllocationPlan>> },

    #[error("ground truth generation failed after {0} attempts")]
    GroundTruthRetries(usize),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed json in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
