//! Immutable network topology, deterministic generators and centralized
//! oracles used to check distributed outputs.

mod edgelist;
mod gen;
mod oracle;

use std::collections::VecDeque;
use std::sync::Arc;

use thiserror::Error;

pub use edgelist::{read_edge_list, write_edge_list};
pub use gen::{generate_graph, grid_shape, GraphFamily, GraphGenSpec, IdScheme};
pub use oracle::{diameter, diameter_with, oracle_bfs, DistanceMap};

/// Node identifier. Identifiers are unique and drawn from `[1, n^3]`.
pub type NodeId = u64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph must contain at least one node")]
    Empty,
    #[error("duplicate node id {0}")]
    DuplicateId(NodeId),
    #[error("node id {id} outside the id space [1, {max}]")]
    IdOutOfRange { id: NodeId, max: u64 },
    #[error("self-loop at node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(NodeId, NodeId),
    #[error("edge ({0}, {1}) references an unknown node")]
    UnknownEndpoint(NodeId, NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("erdos-renyi sampling produced no connected graph after {0} attempts")]
    RetriesExhausted(u32),
    #[error("edge list parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Undirected, connected, simple graph over sparse node identifiers.
///
/// Nodes are stored in ascending id order; the position of a node in that
/// order is its *slot*. Neighbor lists are sorted by id so that
/// "lexicographically first edge" has a single meaning everywhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    ids: Vec<NodeId>,
    adjacency: Vec<Arc<[NodeId]>>,
    slot_adjacency: Vec<Box<[u32]>>,
    m: usize,
}

impl Graph {
    /// Builds a graph from a node set and an undirected edge list, checking
    /// every structural invariant (including connectivity).
    pub fn from_edges(
        ids: impl IntoIterator<Item = NodeId>,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self, GraphError> {
        let mut ids: Vec<NodeId> = ids.into_iter().collect();
        if ids.is_empty() {
            return Err(GraphError::Empty);
        }
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::DuplicateId(w[0]));
        }
        let n = ids.len() as u64;
        let max = n.saturating_mul(n).saturating_mul(n);
        if let Some(&id) = ids.iter().find(|&&id| id == 0 || id > max) {
            return Err(GraphError::IdOutOfRange { id, max });
        }

        let mut lists: Vec<Vec<NodeId>> = vec![Vec::new(); ids.len()];
        let mut m = 0;
        for (u, v) in edges {
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            let (su, sv) = match (ids.binary_search(&u), ids.binary_search(&v)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => return Err(GraphError::UnknownEndpoint(u, v)),
            };
            lists[su].push(v);
            lists[sv].push(u);
            m += 1;
        }
        for (slot, list) in lists.iter_mut().enumerate() {
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                let (a, b) = (ids[slot].min(w[0]), ids[slot].max(w[0]));
                return Err(GraphError::DuplicateEdge(a, b));
            }
        }
        let slot_adjacency = lists
            .iter()
            .map(|list| {
                list.iter()
                    .map(|v| ids.binary_search(v).expect("endpoint checked") as u32)
                    .collect()
            })
            .collect();
        let graph = Graph {
            ids,
            adjacency: lists.into_iter().map(Arc::from).collect(),
            slot_adjacency,
            m,
        };
        if !graph.is_connected() {
            return Err(GraphError::Disconnected);
        }
        Ok(graph)
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Node ids in ascending order.
    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.slot(id).is_some()
    }

    pub fn slot(&self, id: NodeId) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    pub fn id_at(&self, slot: usize) -> NodeId {
        self.ids[slot]
    }

    pub fn neighbors(&self, id: NodeId) -> Option<&[NodeId]> {
        self.slot(id).map(|s| &*self.adjacency[s])
    }

    /// Shared handle to a node's sorted neighbor list.
    pub fn neighbors_at(&self, slot: usize) -> &Arc<[NodeId]> {
        &self.adjacency[slot]
    }

    /// Neighbor slots of `slot`, ascending.
    pub(crate) fn slot_neighbors(&self, slot: usize) -> &[u32] {
        &self.slot_adjacency[slot]
    }

    pub fn degree(&self, id: NodeId) -> Option<usize> {
        self.neighbors(id).map(<[NodeId]>::len)
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.neighbors(u)
            .is_some_and(|list| list.binary_search(&v).is_ok())
    }

    /// Every undirected edge once, as `(min, max)` in ascending pair order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.ids.iter().zip(&self.adjacency).flat_map(|(&u, list)| {
            list.iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(s) = queue.pop_front() {
            for &t in self.slot_adjacency[s].iter() {
                let t = t as usize;
                if !seen[t] {
                    seen[t] = true;
                    count += 1;
                    queue.push_back(t);
                }
            }
        }
        count == self.n()
    }

    /// Hop distances from `slot` to every slot, in slot order.
    pub(crate) fn bfs_slots(&self, slot: usize) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.n()];
        let mut queue = VecDeque::with_capacity(self.n());
        dist[slot] = 0;
        queue.push_back(slot);
        while let Some(s) = queue.pop_front() {
            let next = dist[s] + 1;
            for &t in self.slot_adjacency[s].iter() {
                let t = t as usize;
                if dist[t] == u32::MAX {
                    dist[t] = next;
                    queue.push_back(t);
                }
            }
        }
        dist
    }
}

/// `⌈log₂ n⌉`, with `log2_ceil(1) == 0`.
pub fn log2_ceil(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_structural_violations() {
        assert_eq!(Graph::from_edges([], []), Err(GraphError::Empty));
        assert_eq!(
            Graph::from_edges([1, 1], [(1, 1)]),
            Err(GraphError::DuplicateId(1))
        );
        assert_eq!(
            Graph::from_edges([1, 2], [(1, 1)]),
            Err(GraphError::SelfLoop(1))
        );
        assert_eq!(
            Graph::from_edges([1, 2], [(1, 2), (2, 1)]),
            Err(GraphError::DuplicateEdge(1, 2))
        );
        assert_eq!(
            Graph::from_edges([1, 2, 3], [(1, 2)]),
            Err(GraphError::Disconnected)
        );
        assert_eq!(
            Graph::from_edges([1, 9], [(1, 9)]),
            Err(GraphError::IdOutOfRange { id: 9, max: 8 })
        );
        assert_eq!(
            Graph::from_edges([1, 2], [(1, 5)]),
            Err(GraphError::UnknownEndpoint(1, 5))
        );
    }

    #[test]
    fn adjacency_is_sorted_and_symmetric() {
        let g = Graph::from_edges([3, 1, 2], [(3, 1), (2, 3)]).unwrap();
        assert_eq!(g.ids(), &[1, 2, 3]);
        assert_eq!(g.neighbors(3).unwrap(), &[1, 2]);
        assert!(g.has_edge(1, 3) && g.has_edge(3, 1));
        assert!(!g.has_edge(1, 2));
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(1, 3), (2, 3)]);
    }

    #[test]
    fn log2_ceil_values() {
        assert_eq!(log2_ceil(1), 0);
        assert_eq!(log2_ceil(2), 1);
        assert_eq!(log2_ceil(3), 2);
        assert_eq!(log2_ceil(128), 7);
        assert_eq!(log2_ceil(129), 8);
        assert_eq!(log2_ceil(4096), 12);
    }
}
