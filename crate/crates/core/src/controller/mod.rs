//! Per-channel memory controller: request queues with write drain, FR-FCFS
//! scheduling under a closed-row policy, and refresh orchestration.

mod channel;
mod queue;
mod sched;

pub use channel::{
    ChannelController, ChannelStats, Completion, ControllerConfig, LatencyRecord, RankCounters,
    ShadowCounter,
};
pub use queue::{bits, enqueue_request, update_drain_mode, Enqueue, QueueConfig, QueueState, ReqKind, Request};
pub use sched::{frfcfs_pick, frfcfs_scan, next_command, sarp_conflict, Block};
