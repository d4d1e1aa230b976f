//! Deterministic simulator and library for migrating virtual networks
//! between disjoint switch sets on an SDN substrate.

pub mod dataplane;
pub mod simengine;
pub mod topology;
pub mod controller;
pub mod analysis;
pub mod cli;
