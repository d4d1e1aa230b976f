use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::tables::{translate_flow_mod, translate_rule};
use super::ControllerError;
use crate::dataplane::{FlowMod, FlowRule, Packet};
use crate::topology::{Dpid, PortNo, VnMapping, VnSide};

/// OpenFlow-style asynchronous event, as raised by a switch or as seen by
/// the client application after translation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "event")]
pub enum SwitchEvent {
    SwitchJoin { dpid: Dpid },
    SwitchLeave { dpid: Dpid },
    PortStatus { dpid: Dpid, port: PortNo, up: bool },
    PacketIn { dpid: Dpid, in_port: PortNo, packet: Packet },
    FlowRemoved { dpid: Dpid, rule: FlowRule },
}

/// Events delivered to the client have the same shape.
pub type ClientEvent = SwitchEvent;

impl SwitchEvent {
    pub fn dpid(&self) -> Dpid {
        match self {
            SwitchEvent::SwitchJoin { dpid }
            | SwitchEvent::SwitchLeave { dpid }
            | SwitchEvent::PortStatus { dpid, .. }
            | SwitchEvent::PacketIn { dpid, .. }
            | SwitchEvent::FlowRemoved { dpid, .. } => *dpid,
        }
    }

    /// Every `(dpid, port)` pair the event mentions.
    pub fn referenced_ports(&self) -> Vec<(Dpid, PortNo)> {
        match self {
            SwitchEvent::SwitchJoin { .. } | SwitchEvent::SwitchLeave { .. } => Vec::new(),
            SwitchEvent::PortStatus { dpid, port, .. } => vec![(*dpid, *port)],
            SwitchEvent::PacketIn { dpid, in_port, .. } => vec![(*dpid, *in_port)],
            SwitchEvent::FlowRemoved { dpid, rule } => {
                rule.matcher.in_port.into_iter().chain(rule.action.out_port()).map(|p| (*dpid, p)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuppressReason {
    /// Lifecycle or port events of the new VN.
    NewVnTopology,
    /// Port changes made by the migration itself.
    MigrationTopology,
    /// Gateways and other controller-owned switches.
    Infrastructure,
    /// Flow removals from the VN that is not currently serving traffic.
    InactiveSide,
    Unmapped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Presented {
    Deliver(ClientEvent),
    Suppressed(SuppressReason),
}

/// The transparency layer between the switches and the client application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresenterState {
    pub mapping: VnMapping,
    inverse: VnMapping,
    pub active: VnSide,
    /// Set once the migration starts; port events after this are its own.
    pub migrating: bool,
    old_dpids: BTreeSet<Dpid>,
    infrastructure: BTreeSet<Dpid>,
    suppressed: BTreeMap<SuppressReason, u64>,
}

impl PresenterState {
    pub fn new(mapping: VnMapping, infrastructure: impl IntoIterator<Item = Dpid>) -> Self {
        let inverse = mapping.inverse();
        let old_dpids = mapping.switches().map(|(o, _)| o).collect();
        PresenterState {
            mapping,
            inverse,
            active: VnSide::Old,
            migrating: false,
            old_dpids,
            infrastructure: infrastructure.into_iter().collect(),
            suppressed: BTreeMap::new(),
        }
    }

    pub fn side_of(&self, dpid: Dpid) -> Option<VnSide> {
        if self.old_dpids.contains(&dpid) {
            Some(VnSide::Old)
        } else if self.inverse.map_switch(dpid).is_some() {
            Some(VnSide::New)
        } else {
            None
        }
    }

    pub fn suppressed(&self) -> &BTreeMap<SuppressReason, u64> {
        &self.suppressed
    }

    pub fn unmapped_count(&self) -> u64 {
        self.suppressed.get(&SuppressReason::Unmapped).copied().unwrap_or(0)
    }

    fn suppress(&mut self, why: SuppressReason) -> Presented {
        *self.suppressed.entry(why).or_default() += 1;
        Presented::Suppressed(why)
    }

    /// Rewrites a switch event into the client's (old-VN) view, or hides it.
    pub fn translate(&mut self, event: &SwitchEvent) -> Presented {
        let dpid = event.dpid();
        if self.infrastructure.contains(&dpid) {
            return self.suppress(SuppressReason::Infrastructure);
        }
        match self.side_of(dpid) {
            None => self.suppress(SuppressReason::Unmapped),
            Some(VnSide::Old) => match event {
                SwitchEvent::PortStatus { .. } if self.migrating => self.suppress(SuppressReason::MigrationTopology),
                SwitchEvent::FlowRemoved { .. } if self.active == VnSide::New => {
                    self.suppress(SuppressReason::InactiveSide)
                }
                _ => Presented::Deliver(event.clone()),
            },
            Some(VnSide::New) => {
                let old = self.inverse.map_switch(dpid).expect("side_of checked");
                match event {
                    SwitchEvent::SwitchJoin { .. } | SwitchEvent::SwitchLeave { .. } | SwitchEvent::PortStatus { .. } => {
                        self.suppress(SuppressReason::NewVnTopology)
                    }
                    SwitchEvent::PacketIn { in_port, packet, .. } => match self.inverse.map_port(dpid, *in_port) {
                        Some(p) => Presented::Deliver(SwitchEvent::PacketIn { dpid: old, in_port: p, packet: *packet }),
                        None => self.suppress(SuppressReason::Unmapped),
                    },
                    SwitchEvent::FlowRemoved { rule, .. } => {
                        if self.active == VnSide::Old {
                            return self.suppress(SuppressReason::InactiveSide);
                        }
                        match translate_rule(rule, dpid, &self.inverse) {
                            Ok((_, r)) => Presented::Deliver(SwitchEvent::FlowRemoved { dpid: old, rule: r }),
                            Err(_) => self.suppress(SuppressReason::Unmapped),
                        }
                    }
                }
            }
        }
    }

    /// Sends client flow-mods, written against the old VN, to the physical
    /// switch whose event prompted them.
    pub fn route_commands(&self, physical: Dpid, mods: &[FlowMod]) -> Result<Vec<FlowMod>, ControllerError> {
        match self.side_of(physical) {
            Some(VnSide::Old) => Ok(mods.to_vec()),
            Some(VnSide::New) => {
                let old = self.inverse.map_switch(physical).expect("side_of checked");
                mods.iter().map(|m| translate_flow_mod(m, old, &self.mapping)).collect()
            }
            None => Err(ControllerError::UnmappedSwitch(physical)),
        }
    }

    /// Client port number to the port on the physical switch.
    pub fn physical_port(&self, physical: Dpid, client_port: PortNo) -> Option<PortNo> {
        match self.side_of(physical)? {
            VnSide::Old => Some(client_port),
            VnSide::New => {
                let old = self.inverse.map_switch(physical)?;
                self.mapping.map_port(old, client_port)
            }
        }
    }
}
