use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::detbfs::deterministic_bfs_on;
use super::election::deterministic_leader_election_on;
use super::gossip::haeupler_local_broadcast;
use super::GossipError;
use crate::bfscover::BfsTree;
use crate::clustercomm::{broadcast, convergecast, ClusterTree};
use crate::netgraph::{Graph, NodeId};
use crate::simengine::RunMetrics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalProblem {
    /// Minimum spanning tree under the weight `(min id, max id)`.
    Mst,
    /// Every node learns the full edge set.
    TopologyDump,
}

impl fmt::Display for GlobalProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GlobalProblem::Mst => "mst",
            GlobalProblem::TopologyDump => "topology_dump",
        })
    }
}

impl FromStr for GlobalProblem {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mst" => Ok(GlobalProblem::Mst),
            "topology_dump" => Ok(GlobalProblem::TopologyDump),
            other => Err(format!("unknown global problem `{other}`")),
        }
    }
}

/// Kruskal over edges ordered by `(min id, max id)`. With distinct
/// weights the MST is unique.
pub fn canonical_mst(edges: &BTreeSet<(NodeId, NodeId)>) -> BTreeSet<(NodeId, NodeId)> {
    let ids: BTreeSet<NodeId> = edges.iter().flat_map(|&(u, v)| [u, v]).collect();
    let index: BTreeMap<NodeId, usize> = ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut parent: Vec<usize> = (0..ids.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut out = BTreeSet::new();
    for &(u, v) in edges {
        let (a, b) = (find(&mut parent, index[&u]), find(&mut parent, index[&v]));
        if a != b {
            parent[a] = b;
            out.insert((u, v));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct GlobalRun {
    pub problem: GlobalProblem,
    /// The solution computed at the root.
    pub solution: BTreeSet<(NodeId, NodeId)>,
    /// Each node's incident solution edges, as learned from the broadcast.
    pub incident: BTreeMap<NodeId, Vec<NodeId>>,
    pub convergecast_messages: u64,
    pub broadcast_messages: u64,
    pub comm_rounds: u64,
    pub metrics: RunMetrics,
    pub trace_hash: u64,
}

/// Convergecasts every node's adjacency up `tree`, solves at the root and
/// broadcasts the solution back down.
pub fn solve_global(
    g: &Graph,
    tree: &BfsTree,
    problem: GlobalProblem,
) -> Result<GlobalRun, GossipError> {
    let ctree = ClusterTree::from_parents(tree.root, tree.parent.clone())?;
    let payloads: BTreeMap<NodeId, Vec<(NodeId, Arc<[NodeId]>)>> = g
        .ids()
        .iter()
        .enumerate()
        .map(|(s, &v)| (v, vec![(v, Arc::clone(g.neighbors_at(s)))]))
        .collect();
    let up = convergecast(g, &ctree, &payloads, |mut a, b| {
        a.extend(b);
        a
    })?;
    let edges: BTreeSet<(NodeId, NodeId)> = up
        .at_root
        .iter()
        .flat_map(|(v, nbrs)| nbrs.iter().map(move |&u| (u.min(*v), u.max(*v))))
        .collect();
    let solution = match problem {
        GlobalProblem::Mst => canonical_mst(&edges),
        GlobalProblem::TopologyDump => edges,
    };
    let down = broadcast(g, &ctree, solution.clone())?;
    let incident = down
        .delivered
        .iter()
        .map(|(&v, sol)| {
            let mine = sol
                .iter()
                .filter_map(|&(a, b)| match (a == v, b == v) {
                    (true, _) => Some(b),
                    (_, true) => Some(a),
                    _ => None,
                })
                .collect();
            (v, mine)
        })
        .collect();
    let mut metrics = up.metrics.clone();
    metrics.absorb(&down.metrics);
    Ok(GlobalRun {
        problem,
        solution,
        incident,
        convergecast_messages: up.metrics.messages_total,
        broadcast_messages: down.metrics.messages_total,
        comm_rounds: up.comm_rounds + down.comm_rounds,
        metrics,
        trace_hash: up.trace_hash ^ down.trace_hash.rotate_left(1),
    })
}

#[derive(Debug, Clone)]
pub struct GlobalPipeline {
    pub leader: NodeId,
    pub run: GlobalRun,
    /// All four stages together.
    pub metrics: RunMetrics,
    pub trace_hash: u64,
}

/// Spanner, leader election on it, BFS from the leader, then the
/// collect-solve-broadcast step over that tree.
pub fn global_pipeline(g: &Graph, problem: GlobalProblem) -> Result<GlobalPipeline, GossipError> {
    let gossip = haeupler_local_broadcast(g)?;
    let election = deterministic_leader_election_on(g, &gossip.spanner)?;
    let leader = election
        .leader
        .ok_or_else(|| GossipError::Incomplete(*election.outputs.keys().next().expect("non-empty")))?;
    let bfs = deterministic_bfs_on(g, &gossip.spanner, leader)?;
    let run = solve_global(g, &bfs.tree, problem)?;
    let mut metrics = gossip.metrics.clone();
    let mut trace_hash = 0u64;
    for (m, h) in [
        (&election.metrics, election.trace_hash),
        (&bfs.metrics, bfs.trace_hash),
        (&run.metrics, run.trace_hash),
    ] {
        metrics.absorb(m);
        trace_hash = trace_hash.rotate_left(1) ^ h;
    }
    Ok(GlobalPipeline {
        leader,
        trace_hash: trace_hash.rotate_left(1) ^ gossip.trace_hash,
        run,
        metrics,
    })
}
