use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use rustc_hash::FxHashMap;

use super::{GossipError, Spanner};
use crate::netgraph::{log2_ceil, Graph, NodeId};
use crate::simengine::{
    self, Category, GossipRole, Incoming, ModeConfig, Payload, Protocol, RunMetrics, Shared,
    StepCtx, TraceEntry,
};

/// Iteration budget `⌈4 log₂ n⌉ + 4` given to every node.
pub fn iteration_budget(n: usize) -> u32 {
    4 * log2_ceil(n) + 4
}

/// First gossip round of iteration `i`: iteration `j` lasts `4j` rounds.
pub fn iteration_start(i: u32) -> u64 {
    let i = u64::from(i);
    1 + 2 * i * (i - 1)
}

/// Iteration containing gossip round `r`, and the offset within it.
fn locate(r: u64) -> (u32, u64) {
    let mut i = 1;
    while iteration_start(i + 1) <= r {
        i += 1;
    }
    (i, r - iteration_start(i))
}

/// Index into `l_1, …, l_i` (0-based) activated at offset `t` of iteration
/// `i`: batches run `l_i..l_1`, `l_1..l_i`, `l_i..l_1`, `l_1..l_i`.
pub(crate) fn scheduled_link(i: u32, t: u64) -> usize {
    let i = u64::from(i);
    let (batch, s) = (t / i, t % i);
    (if batch % 2 == 0 { i - 1 - s } else { s }) as usize
}

/// Rumor set, one bit per node slot. A rumor is a node's id together with
/// its neighbor list, both recoverable from the slot.
#[derive(Debug, Clone)]
pub struct GossipMsg {
    role: GossipRole,
    known: Shared<FixedBitSet>,
}

impl Payload for GossipMsg {
    fn category(&self) -> Category {
        Category::Gossip
    }

    fn digest(&self) -> u64 {
        self.known.digest() ^ matches!(self.role, GossipRole::Respond) as u64
    }

    fn gossip_role(&self) -> Option<GossipRole> {
        Some(self.role)
    }
}

struct GossipNode<'a> {
    slot_of: &'a FxHashMap<NodeId, u32>,
    budget: u32,
    known: FixedBitSet,
    snapshot: Option<Shared<FixedBitSet>>,
    links: Vec<NodeId>,
    active: bool,
    exceeded: bool,
}

impl GossipNode<'_> {
    fn merge(&mut self, other: &FixedBitSet) {
        if !other.is_subset(&self.known) {
            self.known.union_with(other);
            self.snapshot = None;
        }
    }

    fn snapshot(&mut self) -> Shared<FixedBitSet> {
        self.snapshot
            .get_or_insert_with(|| Shared::new(self.known.clone()))
            .clone()
    }

    /// Lowest-id neighbor whose rumor is still missing.
    fn first_missing(&self, nbrs: &[NodeId]) -> Option<NodeId> {
        nbrs.iter()
            .copied()
            .find(|v| !self.known.contains(self.slot_of[v] as usize))
    }
}

pub(crate) struct NodeGossip {
    pub known: FixedBitSet,
    pub links: Vec<NodeId>,
    pub exceeded: bool,
}

impl Protocol for GossipNode<'_> {
    type Msg = GossipMsg;
    type Output = NodeGossip;

    fn step(&mut self, ctx: &mut StepCtx<'_, GossipMsg>, inbox: Vec<Incoming<GossipMsg>>) {
        // Responders answer with the set held at the start of the gossip
        // round, so an exchange moves rumors across one link only.
        for m in &inbox {
            if m.msg.role == GossipRole::Initiate {
                let known = self.snapshot();
                ctx.send(m.from, GossipMsg { role: GossipRole::Respond, known });
            }
        }
        for m in &inbox {
            self.merge(&m.msg.known);
        }

        let e = ctx.round();
        if !self.active {
            return;
        }
        if e % 2 == 0 {
            ctx.wake_at(e + 1);
            return;
        }
        let (i, t) = locate((e + 1) / 2);
        if t == 0 {
            let nbrs = Arc::clone(ctx.neighbors());
            match self.first_missing(&nbrs) {
                None => {
                    self.active = false;
                    return;
                }
                Some(_) if i > self.budget => {
                    self.exceeded = true;
                    self.active = false;
                    return;
                }
                Some(v) => self.links.push(v),
            }
        }
        let dst = self.links[scheduled_link(i, t)];
        let known = self.snapshot();
        ctx.send(dst, GossipMsg { role: GossipRole::Initiate, known });
        ctx.wake_at(e + 2);
    }

    fn finish(self) -> NodeGossip {
        NodeGossip {
            known: self.known,
            links: self.links,
            exceeded: self.exceeded,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LocalBroadcastRun {
    pub spanner: Spanner,
    /// `E_v` per node, in activation order.
    pub links: BTreeMap<NodeId, Vec<NodeId>>,
    /// Every node holds every neighbor's rumor.
    pub complete: bool,
    /// Gossip rounds used (each spans two engine rounds: activation and
    /// response).
    pub gossip_rounds: u64,
    pub metrics: RunMetrics,
    pub trace_hash: u64,
}

/// Runs the iterated 1-local broadcast in gossip mode. In iteration `i`
/// every node whose `R_v` is non-empty appends the link to its lowest-id
/// missing neighbor and then replays its links in four batches
/// (`l_i..l_1`, `l_1..l_i`, twice), exchanging all known rumors on every
/// activation. Nodes with `R_v = ∅` only respond.
pub fn haeupler_local_broadcast(g: &Graph) -> Result<LocalBroadcastRun, GossipError> {
    gossip_run(g, false).map(|(run, _)| run)
}

/// [`haeupler_local_broadcast`] that also returns the envelope trace, for
/// offline [`gossip_check`](crate::simengine::gossip_check) audits.
pub fn haeupler_local_broadcast_traced(g: &Graph) -> Result<(LocalBroadcastRun, Vec<TraceEntry>), GossipError> {
    gossip_run(g, true).map(|(run, trace)| (run, trace.unwrap_or_default()))
}

fn gossip_run(g: &Graph, record_trace: bool) -> Result<(LocalBroadcastRun, Option<Vec<TraceEntry>>), GossipError> {
    let slot_of: FxHashMap<NodeId, u32> = g
        .ids()
        .iter()
        .enumerate()
        .map(|(s, &v)| (v, s as u32))
        .collect();
    let budget = iteration_budget(g.n());
    let cfg = ModeConfig {
        gossip_mode: true,
        record_trace,
        ..ModeConfig::default()
    };
    let mut out = simengine::run(g, &cfg, |ctx| {
        let mut known = FixedBitSet::with_capacity(g.n());
        known.insert(slot_of[&ctx.id] as usize);
        GossipNode {
            slot_of: &slot_of,
            budget,
            known,
            snapshot: None,
            links: Vec::new(),
            active: true,
            exceeded: false,
        }
    })?;
    let trace = out.trace.take();
    let metrics = out.metrics.clone();
    let trace_hash = out.trace_hash;
    let gossip_rounds = out.last_send_round.div_ceil(2);

    let mut links = BTreeMap::new();
    let mut edges = BTreeSet::new();
    let mut complete = true;
    let mut exceeded = false;
    for (v, node) in out.into_outputs() {
        let nbrs = g.neighbors(v).expect("output for a graph node");
        complete &= nbrs
            .iter()
            .all(|u| node.known.contains(slot_of[u] as usize));
        exceeded |= node.exceeded;
        edges.extend(node.links.iter().map(|&u| (u.min(v), u.max(v))));
        links.insert(v, node.links);
    }
    if exceeded {
        return Err(GossipError::IterationBudget { budget });
    }
    let iterations = links.values().map(Vec::len).max().unwrap_or(0) as u32;
    let run = LocalBroadcastRun {
        spanner: Spanner { edges, iterations },
        links,
        complete,
        gossip_rounds,
        metrics,
        trace_hash,
    };
    Ok((run, trace))
}

/// `H = ⋃_v E_v`. Purely local: each node already knows its own links.
pub fn extract_spanner(run: &LocalBroadcastRun) -> Spanner {
    run.spanner.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{generate_graph, GraphFamily, GraphGenSpec};
    use crate::simengine::gossip_check;

    #[test]
    fn schedule_shape() {
        assert_eq!(iteration_start(1), 1);
        assert_eq!(iteration_start(2), 5);
        assert_eq!(iteration_start(3), 13);
        assert_eq!(locate(4), (1, 3));
        assert_eq!(locate(5), (2, 0));
        assert_eq!(locate(12), (2, 7));
        let order: Vec<usize> = (0..12).map(|t| scheduled_link(3, t)).collect();
        assert_eq!(order, [2, 1, 0, 0, 1, 2, 2, 1, 0, 0, 1, 2]);
        assert_eq!(iteration_budget(256), 36);
    }

    #[test]
    fn single_edge() {
        let g = Graph::from_edges([1, 2], [(1, 2)]).unwrap();
        let run = haeupler_local_broadcast(&g).unwrap();
        assert!(run.complete);
        assert_eq!(run.spanner.iterations, 1);
        assert_eq!(run.spanner.edges, BTreeSet::from([(1, 2)]));
        assert_eq!(run.links[&1], vec![2]);
        assert_eq!(run.links[&2], vec![1]);
    }

    #[test]
    fn triangle_finishes_in_one_iteration() {
        // Iteration 1: 1→2, 2→1, 3→1. After the first exchange 1 and 2 know
        // each other and 1 and 3 know each other; the second activation
        // carries 2's rumor to 3 via 1 and back.
        let g = Graph::from_edges([1, 2, 3], [(1, 2), (1, 3), (2, 3)]).unwrap();
        let run = haeupler_local_broadcast(&g).unwrap();
        assert!(run.complete);
        assert_eq!(run.spanner.iterations, 1);
        assert_eq!(run.spanner.edges, BTreeSet::from([(1, 2), (1, 3)]));
        assert_eq!(run.gossip_rounds, 4);
    }

    #[test]
    fn star_leaves_learn_center_in_iteration_one() {
        let g = generate_graph(&GraphGenSpec::new(GraphFamily::Star, 9)).unwrap();
        let run = haeupler_local_broadcast(&g).unwrap();
        assert!(run.complete);
        for leaf in 2..=9 {
            assert_eq!(run.links[&leaf], vec![1]);
        }
        // The center's only link is to its lowest-id leaf; every leaf
        // activates the center in round 1, so it learns all leaves at once.
        assert_eq!(run.links[&1], vec![2]);
        assert_eq!(run.spanner.iterations, 1);
    }

    #[test]
    fn path_spanner_is_the_path() {
        let g = generate_graph(&GraphGenSpec::new(GraphFamily::Path, 12)).unwrap();
        let run = haeupler_local_broadcast(&g).unwrap();
        assert_eq!(run.spanner.edges, g.edges().collect());
    }

    #[test]
    fn never_violates_gossip_rules() {
        let g = generate_graph(&GraphGenSpec::new(GraphFamily::ErdosRenyi { p: 0.2 }, 40).with_seed(3))
            .unwrap();
        let (run, trace) = haeupler_local_broadcast_traced(&g).unwrap();
        assert!(!trace.is_empty());
        assert_eq!(trace.len() as u64, run.metrics.messages_total);
        assert!(gossip_check(&trace).is_ok());
    }

    #[test]
    fn exchanges_move_rumors_one_hop() {
        // 3×3 grid with scattered ids: with two-hop responses this finished
        // in one iteration and left an edge at H-distance 5.
        let edges = [
            (2, 18), (2, 229), (2, 392), (18, 85), (85, 229), (85, 624),
            (229, 461), (229, 616), (305, 461), (305, 616), (392, 461), (616, 624),
        ];
        let g = Graph::from_edges([2, 18, 85, 229, 305, 392, 461, 616, 624], edges).unwrap();
        let run = haeupler_local_broadcast(&g).unwrap();
        assert!(run.complete);
        let stretch = run.spanner.max_stretch(&g, crate::exec::ExecMode::Sequential).unwrap();
        assert!(stretch <= 4 * run.spanner.iterations);
    }
}
