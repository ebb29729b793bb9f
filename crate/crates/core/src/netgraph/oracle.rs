use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Graph, GraphError, NodeId};
use crate::exec::{self, ExecMode};

/// Exact hop distances from a root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceMap {
    pub root: NodeId,
    pub dist: BTreeMap<NodeId, u32>,
}

impl DistanceMap {
    pub fn get(&self, v: NodeId) -> Option<u32> {
        self.dist.get(&v).copied()
    }

    pub fn max(&self) -> u32 {
        self.dist.values().copied().max().unwrap_or(0)
    }

    /// `|dist[u] − dist[v]| ≤ 1` across every edge of `g`.
    pub fn is_lipschitz(&self, g: &Graph) -> bool {
        g.edges().all(|(u, v)| match (self.get(u), self.get(v)) {
            (Some(a), Some(b)) => a.abs_diff(b) <= 1,
            _ => false,
        })
    }
}

pub fn oracle_bfs(g: &Graph, root: NodeId) -> Result<DistanceMap, GraphError> {
    let slot = g.slot(root).ok_or(GraphError::UnknownNode(root))?;
    let dist = g.bfs_slots(slot);
    Ok(DistanceMap {
        root,
        dist: g.ids().iter().copied().zip(dist).collect(),
    })
}

/// Diameter by one BFS sweep per node.
pub fn diameter(g: &Graph) -> u32 {
    diameter_with(g, ExecMode::default())
}

pub fn diameter_with(g: &Graph, mode: ExecMode) -> u32 {
    let slots: Vec<usize> = (0..g.n()).collect();
    exec::map(mode, &slots, |&s| g.bfs_slots(s).into_iter().max().unwrap_or(0))
        .into_iter()
        .max()
        .unwrap_or(0)
}
