use std::collections::VecDeque;

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use super::{Cover, MESSAGE_CONSTANT, SPARSITY_CONSTANT};
use crate::exec::{self, ExecMode};
use crate::netgraph::{Graph, NodeId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    pub max_depth: u32,
    pub depth_ok: bool,
    pub max_membership: usize,
    /// `c_s · κ · n^(1/κ) · ln n`.
    pub membership_bound: f64,
    pub sparsity_ok: bool,
    pub neighborhood_ok: bool,
    /// Nodes whose `W`-ball lies inside no single cluster.
    pub uncovered: Vec<NodeId>,
}

fn kappa_root_log(n: usize, kappa: u32) -> f64 {
    let nf = n as f64;
    f64::from(kappa) * nf.powf(1.0 / f64::from(kappa)) * nf.ln().max(1.0)
}

/// Sparsity target `c_s · κ · n^(1/κ) · ln n` (with `ln n` floored at 1).
pub fn membership_bound(n: usize, kappa: u32) -> f64 {
    SPARSITY_CONSTANT * kappa_root_log(n, kappa)
}

/// Construction message target `c_m · n · κ² · W · n^(1/κ) · ln n`.
pub fn message_bound(n: usize, kappa: u32, w: u32) -> f64 {
    MESSAGE_CONSTANT * n as f64 * f64::from(kappa) * f64::from(w) * kappa_root_log(n, kappa)
}

/// Centralized check of the depth, sparsity and neighborhood properties.
pub fn verify_cover(cover: &Cover, g: &Graph) -> CoverReport {
    verify_cover_with(cover, g, ExecMode::default())
}

pub fn verify_cover_with(cover: &Cover, g: &Graph, mode: ExecMode) -> CoverReport {
    let kappa = cover.params.kappa;
    let w = cover.params.w;
    let max_depth = cover.clusters.iter().map(|c| c.depth).max().unwrap_or(0);
    let max_membership = cover.max_membership();
    let membership_bound = membership_bound(g.n(), kappa);

    let slots: Vec<usize> = (0..g.n()).collect();
    let ok = exec::map(mode, &slots, |&s| {
        let v = g.id_at(s);
        let Some(indices) = cover.membership.get(&v) else {
            return false;
        };
        let ball = ball_slots(g, s, w);
        indices.iter().any(|&i| {
            let c = &cover.clusters[i];
            ball.iter().all(|&t| c.contains(g.id_at(t)))
        })
    });
    let uncovered: Vec<NodeId> = slots
        .iter()
        .zip(ok)
        .filter(|(_, ok)| !ok)
        .map(|(&s, _)| g.id_at(s))
        .collect();

    CoverReport {
        max_depth,
        depth_ok: max_depth <= 2 * kappa * w,
        max_membership,
        membership_bound,
        sparsity_ok: max_membership as f64 <= membership_bound,
        neighborhood_ok: uncovered.is_empty(),
        uncovered,
    }
}

fn ball_slots(g: &Graph, s: usize, radius: u32) -> Vec<usize> {
    let mut seen = FxHashSet::from_iter([s]);
    let mut ball = vec![s];
    let mut queue = VecDeque::from([(s, 0u32)]);
    while let Some((u, d)) = queue.pop_front() {
        if d == radius {
            continue;
        }
        for &t in g.slot_neighbors(u) {
            let t = t as usize;
            if seen.insert(t) {
                ball.push(t);
                queue.push_back((t, d + 1));
            }
        }
    }
    ball
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustercomm::bfs_exploration;
    use crate::covers::CoverParams;
    use crate::netgraph::{generate_graph, GraphFamily, GraphGenSpec};

    fn ball_cover(g: &Graph, w: u32) -> Cover {
        let clusters = g
            .ids()
            .iter()
            .map(|&v| bfs_exploration(g, v, 2 * w).unwrap().tree)
            .collect();
        Cover::from_clusters(CoverParams::new(1, w, 0), clusters)
    }

    #[test]
    fn double_balls_cover_every_node() {
        let g = generate_graph(&GraphGenSpec::new(GraphFamily::Grid, 36)).unwrap();
        let report = verify_cover(&ball_cover(&g, 1), &g);
        assert!(report.neighborhood_ok && report.depth_ok);
        assert_eq!(report.max_depth, 2);
    }

    #[test]
    fn missing_node_is_reported() {
        let g = generate_graph(&GraphGenSpec::new(GraphFamily::Path, 6)).unwrap();
        let mut cover = ball_cover(&g, 1);
        cover.clusters.retain(|c| !c.contains(6));
        let cover = Cover::from_clusters(cover.params, cover.clusters);
        let report = verify_cover(&cover, &g);
        assert!(!report.neighborhood_ok);
        assert!(report.uncovered.contains(&6));
    }

    #[test]
    fn modes_agree() {
        let g = generate_graph(&GraphGenSpec::new(GraphFamily::Cycle, 20)).unwrap();
        let cover = ball_cover(&g, 2);
        assert_eq!(
            verify_cover_with(&cover, &g, ExecMode::Sequential),
            verify_cover_with(&cover, &g, ExecMode::Parallel)
        );
    }
}
