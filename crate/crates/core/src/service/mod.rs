//! Environment sessions for external agents over a line-delimited JSON
//! protocol, plus trajectory logging for offline datasets.

mod protocol;
mod server;
mod trajectory;

pub use protocol::{ErrorCode, ErrorReply, Handshake, Reply, Request, PROTOCOL_VERSION};
pub use server::{serve_stream, Server, ServerHandle, ServiceContext, Session};
pub use trajectory::{
    log_trajectories, read_trajectories, record_episode, DatasetSummary, LoggedEpisode, TrajectoryFile,
    TrajectoryHeader, TrajectoryRecord, TrajectoryWriter, TRAJECTORY_FORMAT, TRAJECTORY_VERSION,
};
