use std::collections::BTreeMap;

use crate::bfscover::BfsTree;
use crate::netgraph::{Graph, NodeId};
use crate::simengine::{self, Category, Incoming, ModeConfig, Payload, Protocol, RunMetrics, StepCtx};

#[derive(Debug, Clone, Copy)]
struct Flood;

impl Payload for Flood {
    fn category(&self) -> Category {
        Category::Exploration
    }

    fn digest(&self) -> u64 {
        0xf100d
    }
}

struct FloodNode {
    is_root: bool,
    joined: Option<(Option<NodeId>, u32)>,
}

impl Protocol for FloodNode {
    type Msg = Flood;
    type Output = Option<(Option<NodeId>, u32)>;

    fn step(&mut self, ctx: &mut StepCtx<'_, Flood>, inbox: Vec<Incoming<Flood>>) {
        if self.joined.is_some() {
            return;
        }
        let joined = if self.is_root {
            (None, 0)
        } else {
            let Some(parent) = inbox.iter().map(|m| m.from).min() else {
                return;
            };
            (Some(parent), (ctx.round() - 1) as u32)
        };
        self.joined = Some(joined);
        let nbrs = std::sync::Arc::clone(ctx.neighbors());
        for &w in nbrs.iter() {
            ctx.send(w, Flood);
        }
    }

    fn finish(self) -> Self::Output {
        self.joined
    }
}

#[derive(Debug, Clone)]
pub struct FloodRun {
    pub tree: BfsTree,
    pub metrics: RunMetrics,
    pub trace_hash: u64,
}

/// Classic flooding BFS: every node forwards to all of its neighbors on
/// first receipt and keeps the smallest-id first sender as parent. Sends
/// exactly `2m` messages.
pub fn flood_baseline_bfs(g: &Graph, root: NodeId) -> Result<FloodRun, simengine::SimError> {
    let out = simengine::run(g, &ModeConfig::default(), |ctx| FloodNode {
        is_root: ctx.id == root,
        joined: None,
    })?;
    let metrics = out.metrics.clone();
    let trace_hash = out.trace_hash;
    let mut parent = BTreeMap::new();
    let mut layer = BTreeMap::new();
    for (v, joined) in out.into_outputs() {
        if let Some((p, l)) = joined {
            layer.insert(v, l);
            if let Some(p) = p {
                parent.insert(v, p);
            }
        }
    }
    Ok(FloodRun {
        tree: BfsTree {
            root,
            parent,
            layer,
        },
        metrics,
        trace_hash,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{generate_graph, GraphFamily, GraphGenSpec};

    fn flood(family: GraphFamily, n: usize) -> (Graph, FloodRun) {
        let g = generate_graph(&GraphGenSpec::new(family, n)).unwrap();
        let run = flood_baseline_bfs(&g, 1).unwrap();
        run.tree.verify(&g).unwrap();
        (g, run)
    }

    #[test]
    fn hand_counts() {
        assert_eq!(flood(GraphFamily::Path, 3).1.metrics.messages_total, 4);
        assert_eq!(flood(GraphFamily::Complete, 4).1.metrics.messages_total, 12);
        assert_eq!(flood(GraphFamily::Path, 1).1.metrics.messages_total, 0);
    }

    #[test]
    fn two_per_edge() {
        let (g, run) = flood(GraphFamily::Complete, 128);
        assert_eq!(run.metrics.messages_total, 2 * g.m() as u64);
        assert_eq!(run.metrics.messages_total, 16256);
    }
}
