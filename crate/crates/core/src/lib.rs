//! Simulator and protocol library for synchronous KT1 LOCAL networks.

pub mod exec;
pub mod harness;
pub mod gossipspanner;
pub mod netgraph;
pub mod clustercomm;
pub mod bfscover;
pub mod covers;
pub mod simengine;
