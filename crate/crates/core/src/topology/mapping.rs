use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Dpid, PortNo};

/// Old-VN to new-VN correspondence: switches and, per switch, ports.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VnMapping {
    switch_map: BTreeMap<Dpid, Dpid>,
    port_map: BTreeMap<Dpid, BTreeMap<PortNo, PortNo>>,
}

impl VnMapping {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_switch(&mut self, old: Dpid, new: Dpid) {
        self.switch_map.insert(old, new);
    }

    pub fn insert_port(&mut self, old_dpid: Dpid, old_port: PortNo, new_port: PortNo) {
        self.port_map.entry(old_dpid).or_default().insert(old_port, new_port);
    }

    pub fn remove_switch(&mut self, old: Dpid) -> Option<Dpid> {
        self.switch_map.remove(&old)
    }

    pub fn remove_port(&mut self, old_dpid: Dpid, old_port: PortNo) -> Option<PortNo> {
        self.port_map.get_mut(&old_dpid)?.remove(&old_port)
    }

    pub fn switches(&self) -> impl Iterator<Item = (Dpid, Dpid)> + '_ {
        self.switch_map.iter().map(|(a, b)| (*a, *b))
    }

    pub fn ports(&self, old_dpid: Dpid) -> impl Iterator<Item = (PortNo, PortNo)> + '_ {
        self.port_map
            .get(&old_dpid)
            .into_iter()
            .flat_map(|m| m.iter().map(|(a, b)| (*a, *b)))
    }

    pub fn port_map_keys(&self) -> impl Iterator<Item = Dpid> + '_ {
        self.port_map.keys().copied()
    }

    pub fn map_switch(&self, old: Dpid) -> Option<Dpid> {
        self.switch_map.get(&old).copied()
    }

    pub fn map_port(&self, old_dpid: Dpid, port: PortNo) -> Option<PortNo> {
        self.port_map.get(&old_dpid)?.get(&port).copied()
    }

    /// Maps an `(old dpid, old port)` pair into the new VN.
    pub fn map(&self, old_dpid: Dpid, port: PortNo) -> Option<(Dpid, PortNo)> {
        Some((self.map_switch(old_dpid)?, self.map_port(old_dpid, port)?))
    }

    /// Builds the reverse mapping (new VN to old VN). Lossless when both
    /// maps are bijections.
    pub fn inverse(&self) -> VnMapping {
        let mut inv = VnMapping::new();
        for (&old, &new) in &self.switch_map {
            inv.insert_switch(new, old);
            if let Some(ports) = self.port_map.get(&old) {
                for (&op, &np) in ports {
                    inv.insert_port(new, np, op);
                }
            }
        }
        inv
    }
}
