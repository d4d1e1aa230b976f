use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Packet;
use crate::simengine::SimTime;
use crate::topology::{HostId, PortNo};

/// Match fields; `None` is a wildcard.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Match {
    pub in_port: Option<PortNo>,
    pub src: Option<HostId>,
    pub dst: Option<HostId>,
}

impl Match {
    pub fn in_port(port: PortNo) -> Self {
        Match { in_port: Some(port), ..Match::default() }
    }

    pub fn src(host: HostId) -> Self {
        Match { src: Some(host), ..Match::default() }
    }

    pub fn matches(&self, packet: &Packet, in_port: PortNo) -> bool {
        self.in_port.is_none_or(|p| p == in_port)
            && self.src.is_none_or(|s| s == packet.src)
            && self.dst.is_none_or(|d| d == packet.dst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Output(PortNo),
    Drop,
}

impl Action {
    pub fn out_port(&self) -> Option<PortNo> {
        match self {
            Action::Output(p) => Some(*p),
            Action::Drop => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowRule {
    pub priority: u16,
    pub matcher: Match,
    pub action: Action,
    /// Hard expiry, absolute simulated time.
    pub expiry: Option<SimTime>,
}

impl FlowRule {
    pub fn new(priority: u16, matcher: Match, action: Action) -> Self {
        FlowRule { priority, matcher, action, expiry: None }
    }

    pub fn expiring_at(mut self, t: SimTime) -> Self {
        self.expiry = Some(t);
        self
    }

    pub fn is_live(&self, now: SimTime) -> bool {
        self.expiry.is_none_or(|e| e > now)
    }
}

/// Outcome of a table lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    Output(PortNo),
    Drop,
    Miss,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Entry {
    rule: FlowRule,
    installed: u64,
}

/// Priority-ordered rules; ties go to the earliest installation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowTable {
    entries: Vec<Entry>,
    next_install: u64,
}

/// Exact-field conjunction over rule fields, used by update and delete.
///
/// `out_port` compares against the rule's output action.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RulePredicate {
    pub priority: Option<u16>,
    pub in_port: Option<PortNo>,
    pub src: Option<HostId>,
    pub dst: Option<HostId>,
    pub out_port: Option<PortNo>,
}

impl RulePredicate {
    pub fn holds(&self, rule: &FlowRule) -> bool {
        self.priority.is_none_or(|p| p == rule.priority)
            && self.in_port.is_none_or(|p| rule.matcher.in_port == Some(p))
            && self.src.is_none_or(|s| rule.matcher.src == Some(s))
            && self.dst.is_none_or(|d| rule.matcher.dst == Some(d))
            && self.out_port.is_none_or(|p| rule.action == Action::Output(p))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "op")]
pub enum FlowMod {
    /// Adds a rule; an existing rule with identical priority and match is replaced.
    Install { rule: FlowRule },
    /// Rewrites the action of every rule satisfying the predicate.
    Update { predicate: RulePredicate, action: Action },
    Delete { predicate: RulePredicate },
}

impl FlowMod {
    pub fn install(rule: FlowRule) -> Self {
        FlowMod::Install { rule }
    }
}

impl FlowTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rules in lookup order.
    pub fn rules(&self) -> impl Iterator<Item = &FlowRule> {
        self.entries.iter().map(|e| &e.rule)
    }

    pub fn live_rules(&self, now: SimTime) -> impl Iterator<Item = &FlowRule> {
        self.rules().filter(move |r| r.is_live(now))
    }

    pub fn lookup(&self, packet: &Packet, in_port: PortNo, now: SimTime) -> Lookup {
        self.entries
            .iter()
            .find(|e| e.rule.is_live(now) && e.rule.matcher.matches(packet, in_port))
            .map_or(Lookup::Miss, |e| match e.rule.action {
                Action::Output(p) => Lookup::Output(p),
                Action::Drop => Lookup::Drop,
            })
    }

    /// Inserts or replaces; returns 1.
    pub fn install(&mut self, rule: FlowRule) -> usize {
        self.entries.retain(|e| !(e.rule.priority == rule.priority && e.rule.matcher == rule.matcher));
        let installed = self.next_install;
        self.next_install += 1;
        let pos = self
            .entries
            .iter()
            .position(|e| e.rule.priority < rule.priority)
            .unwrap_or(self.entries.len());
        self.entries.insert(pos, Entry { rule, installed });
        1
    }

    pub fn update(&mut self, predicate: &RulePredicate, action: Action) -> usize {
        let mut n = 0;
        for e in self.entries.iter_mut().filter(|e| predicate.holds(&e.rule)) {
            e.rule.action = action;
            n += 1;
        }
        n
    }

    pub fn delete(&mut self, predicate: &RulePredicate) -> usize {
        let before = self.entries.len();
        self.entries.retain(|e| !predicate.holds(&e.rule));
        before - self.entries.len()
    }

    /// Removes and returns rules whose hard expiry has passed.
    pub fn remove_expired(&mut self, now: SimTime) -> Vec<FlowRule> {
        let mut gone = Vec::new();
        self.entries.retain(|e| {
            if e.rule.is_live(now) {
                true
            } else {
                gone.push(e.rule);
                false
            }
        });
        gone
    }

    /// Line-oriented snapshot, one rule per line in lookup order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in self.rules() {
            s.push_str(&r.to_string());
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<FlowTable, ParseRuleError> {
        let mut t = FlowTable::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            t.install(line.parse()?);
        }
        Ok(t)
    }
}

fn fmt_opt<T: fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "*".to_string(), |x| x.to_string())
}

impl fmt::Display for FlowRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "priority={} in_port={} src={} dst={} actions={}",
            self.priority,
            fmt_opt(self.matcher.in_port),
            fmt_opt(self.matcher.src),
            fmt_opt(self.matcher.dst),
            match self.action {
                Action::Output(p) => format!("output:{p}"),
                Action::Drop => "drop".to_string(),
            }
        )?;
        if let Some(e) = self.expiry {
            write!(f, " hard_expiry_us={}", e.0)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("cannot parse flow rule `{line}`: {reason}")]
pub struct ParseRuleError {
    pub line: String,
    pub reason: String,
}

impl FromStr for FlowRule {
    type Err = ParseRuleError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| ParseRuleError { line: line.to_string(), reason: reason.to_string() };
        let mut priority = None;
        let mut matcher = Match::default();
        let mut action = None;
        let mut expiry = None;
        let host = |v: &str| -> Result<Option<HostId>, ParseRuleError> {
            if v == "*" {
                return Ok(None);
            }
            let n: u32 = v.strip_prefix('h').and_then(|d| d.parse().ok()).ok_or_else(|| err("bad host"))?;
            if n == 0 {
                return Err(err("host numbers start at 1"));
            }
            Ok(Some(HostId(n - 1)))
        };
        let port = |v: &str| -> Result<Option<PortNo>, ParseRuleError> {
            if v == "*" {
                return Ok(None);
            }
            v.parse().map(|p| Some(PortNo(p))).map_err(|_| err("bad port"))
        };
        for field in line.split_whitespace() {
            let (k, v) = field.split_once('=').ok_or_else(|| err("expected key=value"))?;
            match k {
                "priority" => priority = Some(v.parse().map_err(|_| err("bad priority"))?),
                "in_port" => matcher.in_port = port(v)?,
                "src" => matcher.src = host(v)?,
                "dst" => matcher.dst = host(v)?,
                "actions" => {
                    action = Some(if v == "drop" {
                        Action::Drop
                    } else {
                        let p = v.strip_prefix("output:").ok_or_else(|| err("bad action"))?;
                        Action::Output(PortNo(p.parse().map_err(|_| err("bad output port"))?))
                    })
                }
                "hard_expiry_us" => expiry = Some(SimTime(v.parse().map_err(|_| err("bad expiry"))?)),
                _ => return Err(err("unknown field")),
            }
        }
        Ok(FlowRule {
            priority: priority.ok_or_else(|| err("missing priority"))?,
            matcher,
            action: action.ok_or_else(|| err("missing actions"))?,
            expiry,
        })
    }
}
