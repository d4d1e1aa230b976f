//! OpenFlow-style switch model: flow tables, flow-mods, the learning-switch
//! client application, and shared-VLAN delivery with dom0 buffering.

mod flow;
mod learning;
mod switch;

use serde::{Deserialize, Serialize};

use crate::simengine::FlowId;
use crate::topology::HostId;

pub use flow::{Action, FlowMod, FlowRule, FlowTable, Lookup, Match, ParseRuleError, RulePredicate};
pub use learning::{AppDecision, Forward, LearningConfig, LearningSwitch, MacTable};
pub use switch::{
    vlan_deliver, AppKind, DataplaneError, HypervisorBuffer, Ingress, InterfaceTable, PortState, SwitchRole,
    SwitchState, VlanOutcome,
};

/// Payload-free packet: enough to account for loss per flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Packet {
    pub id: u64,
    pub flow: FlowId,
    pub seq: u64,
    pub src: HostId,
    pub dst: HostId,
}
