use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use rustc_hash::{FxHashMap, FxHashSet};

use super::gossip::{haeupler_local_broadcast, LocalBroadcastRun};
use super::{GossipError, Spanner};
use crate::bfscover::BfsTree;
use crate::netgraph::{Graph, NodeId};
use crate::simengine::{
    self, Bundle, Category, Incoming, ModeConfig, Payload, Protocol, RunMetrics, Shared, StepCtx,
};

type Topology = (NodeId, Arc<[NodeId]>);

#[derive(Debug, Clone)]
enum HMsg {
    Flood,
    Report(Bundle<Topology>),
    Tree(Shared<BfsTree>),
}

impl Payload for HMsg {
    fn category(&self) -> Category {
        match self {
            HMsg::Flood => Category::Exploration,
            _ => Category::ClusterTree,
        }
    }

    fn digest(&self) -> u64 {
        match self {
            HMsg::Flood => 0xf1,
            HMsg::Report(b) => b.digest(),
            HMsg::Tree(t) => t.digest(),
        }
    }
}

struct HNode<'a> {
    h_nbrs: &'a [NodeId],
    is_root: bool,
    parent: Option<NodeId>,
    joined: Option<u64>,
    flood_from: FxHashSet<NodeId>,
    children: Option<Vec<NodeId>>,
    parts: Vec<Bundle<Topology>>,
    reported: bool,
    tree: Option<Shared<BfsTree>>,
}

/// Exact BFS tree of `G` from the collected topology; the parent of `v`
/// is its smallest-id neighbor on the previous layer.
fn local_bfs(root: NodeId, topology: &FxHashMap<NodeId, Arc<[NodeId]>>) -> BfsTree {
    let mut layer = BTreeMap::from([(root, 0u32)]);
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        let d = layer[&u];
        for &w in topology[&u].iter() {
            if !layer.contains_key(&w) {
                layer.insert(w, d + 1);
                queue.push_back(w);
            }
        }
    }
    let parent = layer
        .iter()
        .filter(|(_, &d)| d > 0)
        .map(|(&v, &d)| {
            let p = topology[&v]
                .iter()
                .copied()
                .filter(|x| layer.get(x) == Some(&(d - 1)))
                .min()
                .expect("a neighbor on the previous layer");
            (v, p)
        })
        .collect();
    BfsTree {
        root,
        parent,
        layer,
    }
}

impl HNode<'_> {
    fn try_report(&mut self, ctx: &mut StepCtx<'_, HMsg>) {
        let Some(children) = &self.children else {
            return;
        };
        if self.reported || self.parts.len() < children.len() {
            return;
        }
        self.reported = true;
        let own = (ctx.id(), Arc::clone(ctx.neighbors()));
        let bundle = Bundle::join(own, std::mem::take(&mut self.parts));
        match self.parent {
            Some(p) => ctx.send(p, HMsg::Report(bundle)),
            None => {
                let topology = bundle.iter().map(|(v, n)| (*v, Arc::clone(n))).collect();
                let tree = Shared::new(local_bfs(ctx.id(), &topology));
                self.deliver(ctx, tree);
            }
        }
    }

    fn deliver(&mut self, ctx: &mut StepCtx<'_, HMsg>, tree: Shared<BfsTree>) {
        for &c in self.children.as_deref().unwrap_or_default() {
            ctx.send(c, HMsg::Tree(tree.clone()));
        }
        self.tree = Some(tree);
    }
}

impl Protocol for HNode<'_> {
    type Msg = HMsg;
    type Output = (Option<NodeId>, Option<Shared<BfsTree>>);

    fn step(&mut self, ctx: &mut StepCtx<'_, HMsg>, inbox: Vec<Incoming<HMsg>>) {
        let round = ctx.round();
        if self.is_root && self.joined.is_none() {
            self.joined = Some(round);
            for &w in self.h_nbrs {
                ctx.send(w, HMsg::Flood);
            }
        }
        let mut tree = None;
        for m in inbox {
            match m.msg {
                HMsg::Flood => {
                    self.flood_from.insert(m.from);
                }
                HMsg::Report(b) => self.parts.push(b),
                HMsg::Tree(t) => tree = Some(t),
            }
        }
        if self.joined.is_none() && !self.flood_from.is_empty() {
            self.parent = self.flood_from.iter().copied().min();
            self.joined = Some(round);
            // Every neighbor except the parent hears from us, so each node
            // can tell its children apart by their silence.
            for &w in self.h_nbrs {
                if Some(w) != self.parent {
                    ctx.send(w, HMsg::Flood);
                }
            }
        }
        if self.children.is_none() && self.joined.is_some_and(|t| round >= t + 2) {
            let children = self
                .h_nbrs
                .iter()
                .copied()
                .filter(|w| Some(*w) != self.parent && !self.flood_from.contains(w))
                .collect();
            self.children = Some(children);
        } else if let Some(t) = self.joined.filter(|_| self.children.is_none()) {
            ctx.wake_at(t + 2);
        }
        self.try_report(ctx);
        if let Some(t) = tree {
            self.deliver(ctx, t);
        }
    }

    fn finish(self) -> Self::Output {
        (self.parent, self.tree)
    }
}

#[derive(Debug, Clone)]
pub struct SpannerBfsRun {
    /// BFS tree of `G`, known at every node.
    pub tree: BfsTree,
    /// Flooding tree `T_H` on the spanner.
    pub h_parent: BTreeMap<NodeId, NodeId>,
    pub flood_messages: u64,
    pub metrics: RunMetrics,
    pub comm_rounds: u64,
    pub trace_hash: u64,
}

/// Flooding BFS on `H` from `source`, convergecast of every node's
/// `G`-neighborhood over `T_H`, a local BFS of `G` at the source, and a
/// broadcast of the result over `T_H`.
pub fn deterministic_bfs_on(
    g: &Graph,
    spanner: &Spanner,
    source: NodeId,
) -> Result<SpannerBfsRun, GossipError> {
    if !g.contains(source) {
        return Err(GossipError::UnknownSource(source));
    }
    let h = spanner.graph(g)?;
    let out = simengine::run(g, &ModeConfig::default(), |ctx| HNode {
        h_nbrs: h.neighbors(ctx.id).expect("same node set"),
        is_root: ctx.id == source,
        parent: None,
        joined: None,
        flood_from: FxHashSet::default(),
        children: None,
        parts: Vec::new(),
        reported: false,
        tree: None,
    })?;
    let metrics = out.metrics.clone();
    let comm_rounds = out.last_send_round;
    let trace_hash = out.trace_hash;
    let mut h_parent = BTreeMap::new();
    let mut tree = None;
    for (v, (parent, t)) in out.into_outputs() {
        if let Some(p) = parent {
            h_parent.insert(v, p);
        }
        let t = t.ok_or(GossipError::Incomplete(v))?;
        tree.get_or_insert(t);
    }
    let tree = tree.expect("non-empty graph");
    Ok(SpannerBfsRun {
        tree: (*tree).clone(),
        h_parent,
        flood_messages: metrics.messages(Category::Exploration),
        metrics,
        comm_rounds,
        trace_hash,
    })
}

#[derive(Debug, Clone)]
pub struct DeterministicBfs {
    pub gossip: LocalBroadcastRun,
    pub bfs: SpannerBfsRun,
    /// Gossip followed by the BFS stage.
    pub metrics: RunMetrics,
    pub trace_hash: u64,
}

impl DeterministicBfs {
    pub fn tree(&self) -> &BfsTree {
        &self.bfs.tree
    }
}

/// Full deterministic pipeline: spanner construction, then BFS on it.
pub fn deterministic_bfs(g: &Graph, source: NodeId) -> Result<DeterministicBfs, GossipError> {
    if !g.contains(source) {
        return Err(GossipError::UnknownSource(source));
    }
    let gossip = haeupler_local_broadcast(g)?;
    let bfs = deterministic_bfs_on(g, &gossip.spanner, source)?;
    let mut metrics = gossip.metrics.clone();
    metrics.absorb(&bfs.metrics);
    let trace_hash = gossip.trace_hash ^ bfs.trace_hash.rotate_left(1);
    Ok(DeterministicBfs {
        gossip,
        bfs,
        metrics,
        trace_hash,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{generate_graph, GraphFamily, GraphGenSpec};

    #[test]
    fn path_from_end() {
        let g = generate_graph(&GraphGenSpec::new(GraphFamily::Path, 6)).unwrap();
        let run = deterministic_bfs(&g, 1).unwrap();
        let expected: BTreeMap<_, _> = (2..=6).map(|v| (v, v - 1)).collect();
        assert_eq!(run.tree().parent, expected);
    }

    #[test]
    fn complete_graph_is_a_star() {
        let g = generate_graph(&GraphGenSpec::new(GraphFamily::Complete, 4)).unwrap();
        let run = deterministic_bfs(&g, 1).unwrap();
        assert!(run.tree().parent.values().all(|&p| p == 1));
    }

    #[test]
    fn grid_corner_layers_are_manhattan() {
        let g = generate_graph(&GraphGenSpec::new(GraphFamily::Grid, 64)).unwrap();
        let run = deterministic_bfs(&g, 1).unwrap();
        run.tree().verify(&g).unwrap();
        for (&v, &layer) in &run.tree().layer {
            let (r, c) = ((v - 1) / 8, (v - 1) % 8);
            assert_eq!(u64::from(layer), r + c);
        }
    }

    #[test]
    fn stage_costs() {
        let g = generate_graph(&GraphGenSpec::new(GraphFamily::ErdosRenyi { p: 0.1 }, 80).with_seed(9))
            .unwrap();
        let run = deterministic_bfs(&g, g.ids()[7]).unwrap();
        run.tree().verify(&g).unwrap();
        let n = g.n() as u64;
        let e_h = run.gossip.spanner.size() as u64;
        assert!(run.bfs.flood_messages <= 2 * e_h);
        assert_eq!(run.bfs.metrics.messages(Category::ClusterTree), 2 * (n - 1));
        let hg = run.gossip.spanner.graph(&g).unwrap();
        let d_h = crate::netgraph::oracle_bfs(&hg, g.ids()[7]).unwrap();
        for (&v, &p) in &run.bfs.h_parent {
            assert!(hg.has_edge(v, p));
            assert_eq!(d_h.get(v), d_h.get(p).map(|d| d + 1));
        }
    }

    #[test]
    fn single_node() {
        let g = generate_graph(&GraphGenSpec::new(GraphFamily::Path, 1)).unwrap();
        let run = deterministic_bfs(&g, 1).unwrap();
        assert_eq!(run.tree().layer, BTreeMap::from([(1, 0)]));
        assert_eq!(run.metrics.messages_total, 0);
    }
}
