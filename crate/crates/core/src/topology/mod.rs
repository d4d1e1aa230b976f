//! Substrate, VN and mapping data model plus the deterministic scenario builders.

mod build;
mod mapping;
mod model;
mod validate;

pub use build::{
    build_cross_aggregate_scenario, build_gateway_scenario, build_scenario, build_shared_vlan_scenario,
    BuildError, Latencies, VnShape,
};
pub use mapping::VnMapping;
pub use model::{
    Aggregate, AggregateId, Attachment, Dpid, Endpoint, GatewayPorts, HostId, Layout, Node, NodeId,
    NodeRole, PortNo, PortSpec, ScenarioTopology, SharedVlan, SubstrateLink, VirtualNetwork, VnEdge,
    VnSide,
};
pub use validate::{validate, Diagnostic};
