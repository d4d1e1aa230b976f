use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::channel::CommandChannel;
use super::ControllerError;
use crate::dataplane::{Action, FlowMod, FlowRule, RulePredicate, SwitchState};
use crate::simengine::{SimRng, SimTime};
use crate::topology::{Dpid, PortNo, VnMapping};

/// Point-in-time copy of the flow tables of the polled switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSnapshot {
    pub taken_at: SimTime,
    /// Every polled switch has an entry, empty tables included.
    pub tables: BTreeMap<Dpid, Vec<FlowRule>>,
}

impl TableSnapshot {
    pub fn rule_count(&self) -> usize {
        self.tables.values().map(Vec::len).sum()
    }
}

/// Copies the live rules of every switch. Fails before touching anything if
/// one of them is unreachable.
pub fn poll_flow_tables<'a>(
    switches: impl IntoIterator<Item = &'a SwitchState>,
    now: SimTime,
) -> Result<TableSnapshot, ControllerError> {
    let mut tables = BTreeMap::new();
    for sw in switches {
        let dpid = sw.dpid.ok_or(ControllerError::NoDatapath(sw.node))?;
        if !sw.reachable {
            return Err(ControllerError::Unreachable(dpid));
        }
        tables.insert(dpid, sw.table.live_rules(now).copied().collect());
    }
    Ok(TableSnapshot { taken_at: now, tables })
}

fn map_port(mapping: &VnMapping, from: Dpid, port: PortNo) -> Result<PortNo, ControllerError> {
    mapping.map_port(from, port).ok_or(ControllerError::UnmappedPort { dpid: from, port })
}

/// Rewrites the ports of a rule for the switch `from` maps to.
pub fn translate_rule(rule: &FlowRule, from: Dpid, mapping: &VnMapping) -> Result<(Dpid, FlowRule), ControllerError> {
    let to = mapping.map_switch(from).ok_or(ControllerError::UnmappedSwitch(from))?;
    let mut out = *rule;
    if let Some(p) = rule.matcher.in_port {
        out.matcher.in_port = Some(map_port(mapping, from, p)?);
    }
    if let Action::Output(p) = rule.action {
        out.action = Action::Output(map_port(mapping, from, p)?);
    }
    Ok((to, out))
}

pub fn translate_predicate(
    pred: &RulePredicate,
    from: Dpid,
    mapping: &VnMapping,
) -> Result<RulePredicate, ControllerError> {
    let mut out = *pred;
    if let Some(p) = pred.in_port {
        out.in_port = Some(map_port(mapping, from, p)?);
    }
    if let Some(p) = pred.out_port {
        out.out_port = Some(map_port(mapping, from, p)?);
    }
    Ok(out)
}

pub fn translate_flow_mod(m: &FlowMod, from: Dpid, mapping: &VnMapping) -> Result<FlowMod, ControllerError> {
    Ok(match m {
        FlowMod::Install { rule } => FlowMod::Install { rule: translate_rule(rule, from, mapping)?.1 },
        FlowMod::Update { predicate, action } => {
            let action = match action {
                Action::Output(p) => Action::Output(map_port(mapping, from, *p)?),
                Action::Drop => Action::Drop,
            };
            FlowMod::Update { predicate: translate_predicate(predicate, from, mapping)?, action }
        }
        FlowMod::Delete { predicate } => FlowMod::Delete { predicate: translate_predicate(predicate, from, mapping)? },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloneBatch {
    pub source: Dpid,
    pub target: Dpid,
    pub rules: Vec<FlowRule>,
    /// When the last install of this batch is confirmed.
    pub confirmed_at: SimTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClonePlan {
    pub issued_at: SimTime,
    pub batches: Vec<CloneBatch>,
    pub completion: SimTime,
}

impl ClonePlan {
    pub fn rule_count(&self) -> usize {
        self.batches.iter().map(|b| b.rules.len()).sum()
    }
}

/// Translates every snapshot rule and times the installs.
///
/// One controller thread sends the mods one after another, each taking
/// `per_rule_cost`; a switch's batch is confirmed one channel lag after its
/// last mod is sent. Every translation is checked before any timing is done.
pub fn clone_tables(
    snapshot: &TableSnapshot,
    mapping: &VnMapping,
    per_rule_cost: SimTime,
    channel: &CommandChannel,
    rng: &mut SimRng,
    issued_at: SimTime,
) -> Result<ClonePlan, ControllerError> {
    let mut translated = Vec::with_capacity(snapshot.tables.len());
    for (&dpid, rules) in &snapshot.tables {
        let target = mapping.map_switch(dpid).ok_or(ControllerError::UnmappedSwitch(dpid))?;
        let mut out = Vec::with_capacity(rules.len());
        for r in rules {
            out.push(translate_rule(r, dpid, mapping)?.1);
        }
        translated.push((dpid, target, out));
    }

    let mut cursor = issued_at;
    let mut completion = issued_at;
    let mut batches = Vec::with_capacity(translated.len());
    for (source, target, rules) in translated {
        let confirmed_at = if rules.is_empty() {
            cursor
        } else {
            cursor = SimTime(cursor.0 + per_rule_cost.0 * rules.len() as u64);
            cursor + channel.sample(rng)
        };
        completion = completion.max(confirmed_at);
        batches.push(CloneBatch { source, target, rules, confirmed_at });
    }
    Ok(ClonePlan { issued_at, batches, completion })
}
