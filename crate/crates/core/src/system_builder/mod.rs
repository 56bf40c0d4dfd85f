//! System assembly: board, batches, compute units, channels and the host
//! step plan.

pub mod batch;
pub mod board;
pub mod cu;
pub mod host;
pub mod interleave;

pub use batch::{element_bytes, plan_batch, plan_batch_bytes, BatchPlan};
pub use board::{BoardError, BoardSpec, Resources};
pub use cu::{
    assign_channels, build_cu, BuildOptions, ChannelRole, CuDesign, ModuleDesc, PortAssignment, MAX_DOUBLE_BUFFERED_CUS, SPLIT_BELOW_CUS,
};
pub use host::{host_plan, Action, ChannelSet, HostPlan, HostStep};
pub use interleave::{deinterleave, interleave};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BuildError {
    #[error("one element needs {element_bytes} bytes per lane block but a channel holds {capacity}")]
    ElementTooLarge { element_bytes: u64, capacity: u64 },
    #[error("{n_cu} CUs need {needed} HBM channels, only {available} exist")]
    ChannelExhausted { n_cu: usize, needed: usize, available: usize },
    #[error("{n_cu} CUs exceed the cap of {cap} with double buffering")]
    TooManyCus { n_cu: usize, cap: usize },
    #[error("inconsistent options: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Board(#[from] BoardError),
}
