//! The migration controller: table polling and cloning, redirection
//! schedules over lagged command channels, the presenter that keeps the
//! client application unaware of the new VN, and the simulated run.

mod channel;
mod migrate;
mod presenter;
mod scenario;
mod schedule;
mod tables;
mod world;

use thiserror::Error;

use crate::topology::{Dpid, NodeId, PortNo};

pub use channel::{ChannelKind, CommandChannel, LagModel};
pub use migrate::{
    migrate, Counters, FlowStats, LoggedEvent, MigrationError, MigrationMetrics, MigrationOptions,
    MigrationTimeline, Strategy, SwitchOver, TraceRecord,
};
pub use presenter::{ClientEvent, Presented, PresenterState, SuppressReason, SwitchEvent};
pub use scenario::{reference_latency, Scenario, ScenarioError, TrafficSpec};
pub use schedule::{
    build_redirection_schedule, build_toggle_schedule, execute_schedule, Abort, Application, Command,
    CommandOp, CommandRecord, ExecOptions, ExecutionRecord, Ordering, Phase, PhaseKind, RedirectPoint,
    RedirectionSchedule, RollbackRecord, GATEWAY_PRIORITY,
};
pub use tables::{
    clone_tables, poll_flow_tables, translate_flow_mod, translate_predicate, translate_rule, CloneBatch,
    ClonePlan, TableSnapshot,
};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ControllerError {
    #[error("switch {0} is unreachable")]
    Unreachable(Dpid),
    #[error("switch node {0} has no datapath id")]
    NoDatapath(NodeId),
    #[error("datapath {0} is not in the mapping")]
    UnmappedSwitch(Dpid),
    #[error("port {port} of datapath {dpid} is not in the mapping")]
    UnmappedPort { dpid: Dpid, port: PortNo },
    #[error("redirect point {0} has no port toward the new VN")]
    MissingNewPort(Dpid),
}
