//! Communication inside clusters that come with a spanning tree:
//! broadcast, convergecast, augmentation with a minimal outgoing edge set,
//! and depth-bounded BFS exploration that grows a cluster one layer at a
//! time.

mod explore;
mod primitives;

use std::collections::{BTreeMap, BTreeSet};

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netgraph::{Graph, NodeId};
use crate::simengine::SimError;

pub use explore::{bfs_exploration, ExplorationRun};
pub(crate) use explore::{
    exploration_window, ExploreMsg, ExploreNode, ExploreOutcome,
};
pub use primitives::{
    broadcast, compute_augmented_tree, convergecast, AugmentedRun, BroadcastRun, ConvergecastRun,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClusterError {
    #[error("node {0} is not in the graph")]
    UnknownNode(NodeId),
    #[error("tree edge ({0}, {1}) is not a graph edge")]
    NonEdge(NodeId, NodeId),
    #[error("parent links of {0} do not lead to the root")]
    NotATree(NodeId),
    #[error("root {0} must not have a parent")]
    RootHasParent(NodeId),
    #[error("exploration depth must be at least 1")]
    InvalidDepth,
    #[error("member {0} holds no payload")]
    MissingPayload(NodeId),
    #[error("root did not hear from every child within the round budget")]
    Incomplete,
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Rooted spanning tree of a cluster `C`. Serialized as
/// `{root, parent_map, depth}`; the other fields are derived.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "TreeRepr", try_from = "TreeRepr")]
pub struct ClusterTree {
    pub root: NodeId,
    pub parent: BTreeMap<NodeId, NodeId>,
    pub children: BTreeMap<NodeId, Vec<NodeId>>,
    pub level: BTreeMap<NodeId, u32>,
    pub depth: u32,
    pub members: BTreeSet<NodeId>,
}

#[derive(Serialize, Deserialize)]
struct TreeRepr {
    root: NodeId,
    parent_map: BTreeMap<NodeId, NodeId>,
    depth: u32,
}

impl From<ClusterTree> for TreeRepr {
    fn from(t: ClusterTree) -> Self {
        TreeRepr {
            root: t.root,
            parent_map: t.parent,
            depth: t.depth,
        }
    }
}

impl TryFrom<TreeRepr> for ClusterTree {
    type Error = String;

    fn try_from(r: TreeRepr) -> Result<Self, String> {
        let t = ClusterTree::from_parents(r.root, r.parent_map).map_err(|e| e.to_string())?;
        if t.depth != r.depth {
            return Err(format!("declared depth {} but tree has depth {}", r.depth, t.depth));
        }
        Ok(t)
    }
}

impl ClusterTree {
    pub fn singleton(root: NodeId) -> Self {
        ClusterTree {
            root,
            parent: BTreeMap::new(),
            children: BTreeMap::from([(root, Vec::new())]),
            level: BTreeMap::from([(root, 0)]),
            depth: 0,
            members: BTreeSet::from([root]),
        }
    }

    /// Builds a tree from parent links; every non-root member must reach
    /// the root by following them.
    pub fn from_parents(
        root: NodeId,
        parent: BTreeMap<NodeId, NodeId>,
    ) -> Result<Self, ClusterError> {
        if parent.contains_key(&root) {
            return Err(ClusterError::RootHasParent(root));
        }
        let mut level: BTreeMap<NodeId, u32> = BTreeMap::from([(root, 0)]);
        let mut path = Vec::new();
        for &v in parent.keys() {
            let mut cur = v;
            while !level.contains_key(&cur) {
                if path.len() > parent.len() {
                    return Err(ClusterError::NotATree(v));
                }
                path.push(cur);
                cur = *parent.get(&cur).ok_or(ClusterError::NotATree(v))?;
            }
            let mut d = level[&cur];
            while let Some(u) = path.pop() {
                d += 1;
                level.insert(u, d);
            }
        }
        let mut children: BTreeMap<NodeId, Vec<NodeId>> =
            level.keys().map(|&v| (v, Vec::new())).collect();
        for (&v, &p) in &parent {
            children.get_mut(&p).expect("parent has a level").push(v);
        }
        Ok(ClusterTree {
            root,
            depth: level.values().copied().max().unwrap_or(0),
            members: level.keys().copied().collect(),
            parent,
            children,
            level,
        })
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.members.contains(&v)
    }

    pub fn children_of(&self, v: NodeId) -> &[NodeId] {
        self.children.get(&v).map_or(&[], Vec::as_slice)
    }

    /// Checks that every member is a node of `g` and every tree edge is a
    /// graph edge.
    pub fn validate_in(&self, g: &Graph) -> Result<(), ClusterError> {
        if let Some(&v) = self.members.iter().find(|&&v| !g.contains(v)) {
            return Err(ClusterError::UnknownNode(v));
        }
        match self.parent.iter().find(|(&v, &p)| !g.has_edge(v, p)) {
            Some((&v, &p)) => Err(ClusterError::NonEdge(v, p)),
            None => Ok(()),
        }
    }
}

/// One edge per outer-boundary node of a cluster.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutgoingEdgeSet {
    /// `(inside, outside)` pairs in ascending order.
    pub edges: Vec<(NodeId, NodeId)>,
    pub boundary: BTreeSet<NodeId>,
}

impl OutgoingEdgeSet {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Extension edges whose inside endpoint is `v`.
    pub fn edges_of(&self, v: NodeId) -> &[(NodeId, NodeId)] {
        edges_from(&self.edges, v)
    }
}

/// Slice of a sorted `(inside, outside)` list with inside endpoint `v`.
pub(crate) fn edges_from(edges: &[(NodeId, NodeId)], v: NodeId) -> &[(NodeId, NodeId)] {
    let lo = edges.partition_point(|e| e.0 < v);
    let hi = edges.partition_point(|e| e.0 <= v);
    &edges[lo..hi]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedClusterTree {
    pub base: ClusterTree,
    pub extension_edges: OutgoingEdgeSet,
}

/// Computes a minimal outgoing edge set from the root's view of a cluster:
/// every member with its full neighbor list.
///
/// With `lexicographic`, each boundary node `w` is matched to the edge
/// `(u, w)` minimizing `(min(u, w), max(u, w))`; otherwise to the first
/// such edge in view order.
pub fn minimal_outgoing_edge_set(
    root_view: &[(NodeId, Vec<NodeId>)],
    lexicographic: bool,
) -> OutgoingEdgeSet {
    let members: BTreeSet<NodeId> = root_view.iter().map(|(v, _)| *v).collect();
    let edges = outgoing_edges(
        root_view.iter().map(|(v, nbrs)| (*v, nbrs.as_slice())),
        |v| members.contains(&v),
        lexicographic,
    );
    OutgoingEdgeSet {
        boundary: edges.iter().map(|&(_, w)| w).collect(),
        edges,
    }
}

pub(crate) fn outgoing_edges<'a>(
    view: impl IntoIterator<Item = (NodeId, &'a [NodeId])>,
    is_member: impl Fn(NodeId) -> bool,
    lexicographic: bool,
) -> Vec<(NodeId, NodeId)> {
    let key = |u: NodeId, w: NodeId| (u.min(w), u.max(w));
    let mut best: FxHashMap<NodeId, NodeId> = FxHashMap::default();
    for (u, nbrs) in view {
        for &w in nbrs {
            if is_member(w) {
                continue;
            }
            best.entry(w)
                .and_modify(|cur| {
                    if lexicographic && key(u, w) < key(*cur, w) {
                        *cur = u;
                    }
                })
                .or_insert(u);
        }
    }
    let mut edges: Vec<(NodeId, NodeId)> = best.into_iter().map(|(w, u)| (u, w)).collect();
    edges.sort_unstable();
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_parents_computes_levels() {
        let t = ClusterTree::from_parents(1, BTreeMap::from([(2, 1), (3, 2), (4, 1)])).unwrap();
        assert_eq!(t.depth, 2);
        assert_eq!(t.level[&3], 2);
        assert_eq!(t.children_of(1), &[2, 4]);
        assert_eq!(t.size(), 4);
    }

    #[test]
    fn from_parents_rejects_cycles_and_dangling_links() {
        let cyc = ClusterTree::from_parents(1, BTreeMap::from([(2, 3), (3, 2)]));
        assert!(matches!(cyc, Err(ClusterError::NotATree(_))));
        let dangling = ClusterTree::from_parents(1, BTreeMap::from([(2, 7)]));
        assert!(matches!(dangling, Err(ClusterError::NotATree(2))));
        let rooted = ClusterTree::from_parents(1, BTreeMap::from([(1, 2)]));
        assert_eq!(rooted, Err(ClusterError::RootHasParent(1)));
    }

    #[test]
    fn json_shape_round_trips() {
        let t = ClusterTree::from_parents(1, BTreeMap::from([(2, 1), (3, 2)])).unwrap();
        let json = serde_json::to_value(&t).unwrap();
        assert_eq!(json["depth"], 2);
        assert_eq!(json["parent_map"]["3"], 2);
        assert_eq!(serde_json::from_value::<ClusterTree>(json).unwrap(), t);
    }

    #[test]
    fn outgoing_edges_examples() {
        // C = {a} inside triangle {a, b, c}, a=1 b=2 c=3.
        let set = minimal_outgoing_edge_set(&[(1, vec![2, 3])], true);
        assert_eq!(set.edges, vec![(1, 2), (1, 3)]);
        // C = {a, b} on path a-b-c.
        let set = minimal_outgoing_edge_set(&[(1, vec![2]), (2, vec![1, 3])], true);
        assert_eq!(set.edges, vec![(2, 3)]);
        assert_eq!(set.boundary, BTreeSet::from([3]));
        // Boundary node 9 adjacent to members 5 and 2.
        let view = [(5, vec![2, 9]), (2, vec![5, 9])];
        assert_eq!(minimal_outgoing_edge_set(&view, true).edges, vec![(2, 9)]);
        assert_eq!(minimal_outgoing_edge_set(&view, false).edges, vec![(5, 9)]);
    }

    #[test]
    fn edges_from_slices_by_inside_endpoint() {
        let edges = [(1, 5), (2, 6), (2, 7), (4, 8)];
        assert_eq!(edges_from(&edges, 2), &[(2, 6), (2, 7)]);
        assert!(edges_from(&edges, 3).is_empty());
    }
}
