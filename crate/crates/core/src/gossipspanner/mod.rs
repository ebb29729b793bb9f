//! Deterministic global approach: gossip-based 1-local broadcast, the
//! spanner `H` formed by the activated links, BFS and leader election run
//! on `H`, and a collect-solve-broadcast solver for global problems.

mod detbfs;
mod election;
mod global;
mod gossip;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustercomm::ClusterError;
use crate::exec::{self, ExecMode};
use crate::netgraph::{write_edge_list, Graph, GraphError, NodeId};
use crate::simengine::SimError;

pub use detbfs::{deterministic_bfs, deterministic_bfs_on, DeterministicBfs, SpannerBfsRun};
pub use election::{
    deterministic_leader_election, deterministic_leader_election_on, DeterministicElection,
    SpannerElectionRun, DET_ELECTION_CONSTANT,
};
pub use global::{canonical_mst, global_pipeline, solve_global, GlobalPipeline, GlobalProblem, GlobalRun};
pub use gossip::{
    extract_spanner, haeupler_local_broadcast, haeupler_local_broadcast_traced, iteration_budget,
    iteration_start, GossipMsg, LocalBroadcastRun,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GossipError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("1-local broadcast needed more than {budget} iterations")]
    IterationBudget { budget: u32 },
    #[error("spanner is not a connected spanning subgraph: {0}")]
    Spanner(#[from] GraphError),
    #[error("source {0} is not in the graph")]
    UnknownSource(NodeId),
    #[error("distributed run ended without a result at node {0}")]
    Incomplete(NodeId),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

/// The subgraph `H` of activated links.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Spanner {
    /// Undirected edges as `(min, max)`.
    pub edges: BTreeSet<(NodeId, NodeId)>,
    /// Final iteration count `I`.
    pub iterations: u32,
}

impl Spanner {
    pub fn size(&self) -> usize {
        self.edges.len()
    }

    /// `H` as a graph on the node set of `g`.
    pub fn graph(&self, g: &Graph) -> Result<Graph, GraphError> {
        Graph::from_edges(g.ids().iter().copied(), self.edges.iter().copied())
    }

    /// Edge-list text of `H`, in the same format as graph files.
    pub fn to_edge_list(&self, g: &Graph) -> Result<String, GraphError> {
        Ok(write_edge_list(&self.graph(g)?))
    }

    /// Largest `H`-distance between the endpoints of a `G`-edge.
    pub fn max_stretch(&self, g: &Graph, mode: ExecMode) -> Result<u32, GraphError> {
        let h = self.graph(g)?;
        let slots: Vec<usize> = (0..g.n()).collect();
        let per_node = exec::map(mode, &slots, |&s| {
            let dist = h.bfs_slots(s);
            g.slot_neighbors(s)
                .iter()
                .map(|&t| dist[t as usize])
                .max()
                .unwrap_or(0)
        });
        Ok(per_node.into_iter().max().unwrap_or(0))
    }
}
