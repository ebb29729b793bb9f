//! Cover-based BFS: a `(κ, 2)`-neighborhood cover is built first, then the
//! BFS tree grows one layer per fixed-length phase. In each phase frontier
//! nodes ping their cover clusters, pinged clusters gather and redistribute
//! 2-hop views, and every frontier node sends exploration messages along
//! exactly its edges of the lexicographically-first minimal outgoing edge
//! set of the current tree.

mod construction;
mod election;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covers::CoverError;
use crate::netgraph::{oracle_bfs, Graph, NodeId};
use crate::simengine::SimError;

pub use construction::{
    bfs_construction, bfs_construction_on, BfsCoverRun, BfsOptions, PingPolicy, COVER_W,
};
pub use election::{
    candidate_probability, randomized_leader_election, ElectionOptions, ElectionResult, RandomizedElection,
    CANDIDATE_FACTOR,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BfsError {
    #[error("root {0} is not in the graph")]
    UnknownRoot(NodeId),
    #[error(transparent)]
    Cover(#[from] CoverError),
    #[error(transparent)]
    Sim(#[from] SimError),
    /// Monte Carlo failure: a frontier node could not see its 2-hop
    /// neighborhood in any of its cover clusters.
    #[error("node {node} has no view of neighbor {missing}'s neighborhood")]
    IncompleteView { node: NodeId, missing: NodeId },
    #[error("exploration did not reach node {0}")]
    Unreached(NodeId),
    #[error("no node became a candidate")]
    NoCandidates,
}

/// `κ = ⌈2 log₂ n⌉`, at least 1.
pub fn cover_kappa(n: usize) -> u32 {
    (2 * crate::netgraph::log2_ceil(n)).max(1)
}

/// Rooted spanning BFS tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BfsTree {
    pub root: NodeId,
    #[serde(rename = "parent_map")]
    pub parent: BTreeMap<NodeId, NodeId>,
    #[serde(rename = "layers")]
    pub layer: BTreeMap<NodeId, u32>,
}

impl BfsTree {
    pub fn depth(&self) -> u32 {
        self.layer.values().copied().max().unwrap_or(0)
    }

    pub fn children(&self) -> BTreeMap<NodeId, Vec<NodeId>> {
        let mut out: BTreeMap<NodeId, Vec<NodeId>> =
            self.layer.keys().map(|&v| (v, Vec::new())).collect();
        for (&v, &p) in &self.parent {
            out.entry(p).or_default().push(v);
        }
        out
    }

    /// Checks that the tree spans `g`, uses only graph edges, is layered
    /// consistently, and that layers equal hop distances from the root.
    pub fn verify(&self, g: &Graph) -> Result<(), String> {
        let dist = oracle_bfs(g, self.root).map_err(|e| e.to_string())?;
        if self.layer.len() != g.n() {
            return Err(format!("tree spans {} of {} nodes", self.layer.len(), g.n()));
        }
        if self.parent.contains_key(&self.root) || self.parent.len() + 1 != g.n() {
            return Err("parent map must cover exactly the non-root nodes".into());
        }
        for (&v, &layer) in &self.layer {
            if dist.get(v) != Some(layer) {
                return Err(format!("node {v}: layer {layer}, distance {:?}", dist.get(v)));
            }
            if v == self.root {
                continue;
            }
            let p = *self.parent.get(&v).ok_or(format!("node {v} has no parent"))?;
            if !g.has_edge(v, p) {
                return Err(format!("parent edge ({v}, {p}) is not a graph edge"));
            }
            if self.layer.get(&p) != Some(&(layer - 1)) {
                return Err(format!("parent {p} of {v} is not on the previous layer"));
            }
        }
        Ok(())
    }
}
