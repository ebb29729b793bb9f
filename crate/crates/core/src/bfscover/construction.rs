use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use super::{cover_kappa, BfsError, BfsTree};
use crate::covers::{cover_construction, ClusterKey, CoverParams, CoverRun, LocalCluster};
use crate::netgraph::{Graph, NodeId};
use crate::simengine::{
    self, Bundle, Category, Incoming, ModeConfig, Payload, Protocol, RunMetrics, Shared, StepCtx,
    Tag,
};

/// Cover parameter `W` used by the BFS construction.
pub const COVER_W: u32 = 2;

/// Which cover clusters a frontier node pings in each phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PingPolicy {
    /// Every cluster the node belongs to.
    #[default]
    EveryCluster,
    /// Only the first cluster that covered the node during construction
    /// (it contains the node's whole 2-hop neighborhood).
    CoveringCluster,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BfsOptions {
    pub seed: u64,
    pub ping_policy: PingPolicy,
    /// Record, per cover cluster, the distinct phases with cluster traffic.
    pub record_activity: bool,
}

/// Per-stage clock of the BFS phases.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PhaseClock {
    /// Stage unit `P = 2κW`, the maximum cover-tree depth.
    pub unit: u64,
    pub base: u64,
}

impl PhaseClock {
    pub(crate) fn for_cover(params: &CoverParams) -> Self {
        PhaseClock {
            unit: u64::from(2 * params.kappa * params.w),
            base: 1,
        }
    }

    /// A phase lasts `4P + 1` rounds: `P` for pings, `3P` for the cluster
    /// broadcast-convergecast-broadcast, and one for exploration delivery.
    pub(crate) fn length(&self) -> u64 {
        4 * self.unit + 1
    }

    pub(crate) fn start(&self, phase: u32) -> u64 {
        self.base + u64::from(phase - 1) * self.length()
    }
}

type Entry = (NodeId, bool, Arc<[NodeId]>);
type View = FxHashMap<NodeId, (bool, Arc<[NodeId]>)>;

#[derive(Debug, Clone)]
pub(crate) enum Body {
    Ping {
        cluster: ClusterKey,
        phase: u32,
        origin: NodeId,
    },
    Trigger {
        cluster: ClusterKey,
        phase: u32,
    },
    Report {
        cluster: ClusterKey,
        phase: u32,
        view: Bundle<Entry>,
    },
    Aggregate {
        cluster: ClusterKey,
        phase: u32,
        view: Shared<View>,
    },
    Explore {
        phase: u32,
    },
    Done,
    Halt,
}

#[derive(Debug, Clone)]
pub(crate) struct BfsMsg {
    /// Root of the BFS execution this message belongs to.
    pub exec: NodeId,
    pub body: Body,
}

impl Payload for BfsMsg {
    fn category(&self) -> Category {
        match self.body {
            Body::Explore { .. } => Category::Exploration,
            Body::Done | Body::Halt => Category::Control,
            _ => Category::ClusterTree,
        }
    }

    fn digest(&self) -> u64 {
        let body = match &self.body {
            Body::Ping {
                cluster,
                phase,
                origin,
            } => cluster.channel() ^ u64::from(*phase) << 48 ^ origin.rotate_left(13),
            Body::Trigger { cluster, phase } => cluster.channel() ^ u64::from(*phase) << 40,
            Body::Report { view, .. } => view.digest(),
            Body::Aggregate { view, .. } => view.digest().rotate_left(7),
            Body::Explore { phase } => u64::from(*phase) | 1 << 62,
            Body::Done => 0xd0,
            Body::Halt => 0x4a,
        };
        body ^ self.exec.rotate_left(31)
    }

    fn tag(&self) -> Option<Tag> {
        match &self.body {
            Body::Ping { cluster, phase, .. }
            | Body::Trigger { cluster, phase }
            | Body::Report { cluster, phase, .. }
            | Body::Aggregate { cluster, phase, .. } => Some(Tag {
                channel: cluster.channel(),
                epoch: *phase,
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Timer {
    Trigger(u16, u32),
    Compute(u32),
}

struct Gather {
    waiting: usize,
    parts: Vec<Bundle<Entry>>,
}

#[derive(Default)]
struct ExecState {
    layer: Option<u32>,
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    frontier_phase: Option<u32>,
    views: Vec<Shared<View>>,
    /// Last phase in which a ping for the cluster was forwarded (or, at a
    /// cluster root, received).
    pinged: FxHashMap<u16, u32>,
    gathers: FxHashMap<u16, Gather>,
    computed: bool,
    done_from: usize,
    done_sent: bool,
    halted: bool,
}

/// Final knowledge of one node about one BFS execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ExecOutcome {
    pub layer: Option<u32>,
    pub parent: Option<NodeId>,
    pub halted: bool,
}

pub(crate) struct BfsNode<'a> {
    clock: PhaseClock,
    local: &'a [LocalCluster],
    ping_set: Vec<u16>,
    /// Executions rooted at this node, started in the first round.
    roots: Vec<NodeId>,
    execs: FxHashMap<NodeId, ExecState>,
    agenda: BTreeSet<(u64, NodeId, Timer)>,
    failure: Option<(NodeId, NodeId)>,
}

pub(crate) struct NodeOutput {
    pub execs: BTreeMap<NodeId, ExecOutcome>,
    pub failure: Option<(NodeId, NodeId)>,
}

impl<'a> BfsNode<'a> {
    pub(crate) fn new(
        clock: PhaseClock,
        local: &'a [LocalCluster],
        params: &CoverParams,
        policy: PingPolicy,
        roots: Vec<NodeId>,
    ) -> Self {
        let ping_set = match policy {
            PingPolicy::EveryCluster => (0..local.len() as u16).collect(),
            PingPolicy::CoveringCluster => local
                .iter()
                .position(|c| c.depth <= params.cover_radius(c.key.phase))
                .map(|i| vec![i as u16])
                .unwrap_or_else(|| (0..local.len() as u16).collect()),
        };
        BfsNode {
            clock,
            local,
            ping_set,
            roots,
            execs: FxHashMap::default(),
            agenda: BTreeSet::new(),
            failure: None,
        }
    }

    fn cluster_index(&self, key: &ClusterKey) -> Option<u16> {
        self.local
            .binary_search_by(|c| c.key.cmp(key))
            .ok()
            .map(|i| i as u16)
    }
}

/// Collects outgoing messages while a step's state is borrowed.
struct Out {
    me: NodeId,
    nbrs: Arc<[NodeId]>,
    msgs: Vec<(NodeId, BfsMsg)>,
}

impl Out {
    fn send(&mut self, dst: NodeId, exec: NodeId, body: Body) {
        self.msgs.push((dst, BfsMsg { exec, body }));
    }
}

impl BfsNode<'_> {
    fn begin_frontier(&mut self, out: &mut Out, exec: NodeId, phase: u32) {
        let start = self.clock.start(phase);
        let state = self.execs.get_mut(&exec).expect("exec state");
        state.frontier_phase = Some(phase);
        for &ci in &self.ping_set {
            let c = &self.local[ci as usize];
            if state.pinged.get(&ci) == Some(&phase) {
                continue;
            }
            state.pinged.insert(ci, phase);
            match c.parent {
                Some(p) => out.send(
                    p,
                    exec,
                    Body::Ping {
                        cluster: c.key,
                        phase,
                        origin: out.me,
                    },
                ),
                None => {
                    self.agenda
                        .insert((start + self.clock.unit, exec, Timer::Trigger(ci, phase)));
                }
            }
        }
        self.agenda
            .insert((start + 4 * self.clock.unit, exec, Timer::Compute(phase)));
    }

    fn on_ping(&mut self, out: &mut Out, exec: NodeId, ci: u16, phase: u32, origin: NodeId) {
        let c = &self.local[ci as usize];
        let state = self.execs.entry(exec).or_default();
        if state.pinged.get(&ci) == Some(&phase) {
            return;
        }
        state.pinged.insert(ci, phase);
        match c.parent {
            Some(p) => out.send(
                p,
                exec,
                Body::Ping {
                    cluster: c.key,
                    phase,
                    origin,
                },
            ),
            None => {
                let r = self.clock.start(phase) + self.clock.unit;
                self.agenda.insert((r, exec, Timer::Trigger(ci, phase)));
            }
        }
    }

    fn start_gather(&mut self, out: &mut Out, exec: NodeId, ci: u16, phase: u32) {
        let c = &self.local[ci as usize];
        for &child in &c.children {
            out.send(child, exec, Body::Trigger { cluster: c.key, phase });
        }
        let state = self.execs.entry(exec).or_default();
        state.gathers.insert(
            ci,
            Gather {
                waiting: c.children.len(),
                parts: Vec::new(),
            },
        );
        if c.children.is_empty() {
            self.complete_gather(out, exec, ci, phase);
        }
    }

    fn on_report(&mut self, out: &mut Out, exec: NodeId, ci: u16, phase: u32, view: Bundle<Entry>) {
        let state = self.execs.entry(exec).or_default();
        let Some(g) = state.gathers.get_mut(&ci) else {
            return;
        };
        g.parts.push(view);
        g.waiting -= 1;
        if g.waiting == 0 {
            self.complete_gather(out, exec, ci, phase);
        }
    }

    fn complete_gather(&mut self, out: &mut Out, exec: NodeId, ci: u16, phase: u32) {
        let c = &self.local[ci as usize];
        let state = self.execs.get_mut(&exec).expect("exec state");
        let g = state.gathers.remove(&ci).expect("gather in progress");
        let own = (out.me, state.layer.is_some(), Arc::clone(&out.nbrs));
        let bundle = Bundle::join(own, g.parts);
        match c.parent {
            Some(p) => out.send(
                p,
                exec,
                Body::Report {
                    cluster: c.key,
                    phase,
                    view: bundle,
                },
            ),
            None => {
                let mut view = View::default();
                view.reserve(bundle.len());
                for (v, in_bfs, nbrs) in bundle.iter() {
                    view.insert(*v, (*in_bfs, Arc::clone(nbrs)));
                }
                let shared = Shared::with_digest(view, bundle.digest());
                self.distribute(out, exec, ci, phase, shared);
            }
        }
    }

    fn distribute(&mut self, out: &mut Out, exec: NodeId, ci: u16, phase: u32, view: Shared<View>) {
        let c = &self.local[ci as usize];
        for &child in &c.children {
            out.send(
                child,
                exec,
                Body::Aggregate {
                    cluster: c.key,
                    phase,
                    view: view.clone(),
                },
            );
        }
        let state = self.execs.entry(exec).or_default();
        if state.frontier_phase == Some(phase) && state.layer.is_some() {
            state.views.push(view);
        }
    }

    /// Picks this node's edges of the lexicographically-first minimal
    /// outgoing edge set: for every non-tree neighbor `w`, the tree edge
    /// `(x, w)` minimizing `(min(x, w), max(x, w))`.
    fn compute(&mut self, out: &mut Out, exec: NodeId, phase: u32) {
        let me = out.me;
        let state = self.execs.get_mut(&exec).expect("exec state");
        if state.frontier_phase != Some(phase) || state.computed {
            return;
        }
        let views = std::mem::take(&mut state.views);
        let lookup = |v: NodeId| views.iter().find_map(|view| view.get(&v));
        let key = |x: NodeId, w: NodeId| (x.min(w), x.max(w));
        let nbrs = Arc::clone(&out.nbrs);
        for &w in nbrs.iter() {
            let Some((w_in, w_nbrs)) = lookup(w) else {
                self.failure.get_or_insert((me, w));
                continue;
            };
            if *w_in {
                continue;
            }
            let mut best: Option<NodeId> = None;
            for &x in w_nbrs.iter() {
                let in_bfs = if x == me {
                    true
                } else {
                    match lookup(x) {
                        Some((b, _)) => *b,
                        None => {
                            self.failure.get_or_insert((me, x));
                            false
                        }
                    }
                };
                if in_bfs && best.map_or(true, |b| key(x, w) < key(b, w)) {
                    best = Some(x);
                }
            }
            if best == Some(me) {
                out.send(w, exec, Body::Explore { phase });
                state.children.push(w);
            }
        }
        state.computed = true;
        self.check_done(out, exec);
    }

    fn check_done(&mut self, out: &mut Out, exec: NodeId) {
        let state = self.execs.get_mut(&exec).expect("exec state");
        if !state.computed || state.done_sent || state.done_from < state.children.len() {
            return;
        }
        state.done_sent = true;
        match state.parent {
            Some(p) => out.send(p, exec, Body::Done),
            None => {
                state.halted = true;
                for &c in &state.children {
                    out.send(c, exec, Body::Halt);
                }
            }
        }
    }

    fn handle(&mut self, out: &mut Out, from: NodeId, msg: BfsMsg) {
        let exec = msg.exec;
        let index = |key: &ClusterKey| self.cluster_index(key);
        match msg.body {
            Body::Ping {
                cluster,
                phase,
                origin,
            } => {
                if let Some(ci) = index(&cluster) {
                    self.on_ping(out, exec, ci, phase, origin);
                }
            }
            Body::Trigger { cluster, phase } => {
                if let Some(ci) = index(&cluster) {
                    self.start_gather(out, exec, ci, phase);
                }
            }
            Body::Report {
                cluster,
                phase,
                view,
            } => {
                if let Some(ci) = index(&cluster) {
                    self.on_report(out, exec, ci, phase, view);
                }
            }
            Body::Aggregate {
                cluster,
                phase,
                view,
            } => {
                if let Some(ci) = index(&cluster) {
                    self.distribute(out, exec, ci, phase, view);
                }
            }
            Body::Explore { phase } => {
                let state = self.execs.entry(exec).or_default();
                if state.layer.is_none() {
                    state.layer = Some(phase);
                    state.parent = Some(from);
                    self.begin_frontier(out, exec, phase + 1);
                }
            }
            Body::Done => {
                self.execs.entry(exec).or_default().done_from += 1;
                self.check_done(out, exec);
            }
            Body::Halt => {
                let state = self.execs.entry(exec).or_default();
                state.halted = true;
                for &c in &state.children {
                    out.send(c, exec, Body::Halt);
                }
            }
        }
    }
}

impl Protocol for BfsNode<'_> {
    type Msg = BfsMsg;
    type Output = NodeOutput;

    fn step(&mut self, ctx: &mut StepCtx<'_, BfsMsg>, inbox: Vec<Incoming<BfsMsg>>) {
        let round = ctx.round();
        let mut out = Out {
            me: ctx.id(),
            nbrs: Arc::clone(ctx.neighbors()),
            msgs: Vec::new(),
        };
        if round == self.clock.base {
            for exec in std::mem::take(&mut self.roots) {
                let state = self.execs.entry(exec).or_default();
                state.layer = Some(0);
                self.begin_frontier(&mut out, exec, 1);
            }
        }
        for m in inbox {
            self.handle(&mut out, m.from, m.msg);
        }
        while let Some(&(r, exec, timer)) = self.agenda.first() {
            if r > round {
                break;
            }
            self.agenda.pop_first();
            match timer {
                Timer::Trigger(ci, phase) => self.start_gather(&mut out, exec, ci, phase),
                Timer::Compute(phase) => self.compute(&mut out, exec, phase),
            }
        }
        for (dst, msg) in out.msgs {
            ctx.send(dst, msg);
        }
        if let Some(&(r, _, _)) = self.agenda.first() {
            ctx.wake_at(r);
        }
    }

    fn finish(self) -> NodeOutput {
        NodeOutput {
            execs: self
                .execs
                .into_iter()
                .map(|(exec, s)| {
                    (
                        exec,
                        ExecOutcome {
                            layer: s.layer,
                            parent: s.parent,
                            halted: s.halted,
                        },
                    )
                })
                .collect(),
            failure: self.failure,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BfsCoverRun {
    pub tree: BfsTree,
    pub cover: CoverRun,
    pub bfs_metrics: RunMetrics,
    /// Cover construction followed by the BFS phases.
    pub metrics: RunMetrics,
    /// Exploration messages received per node during the BFS phases.
    pub explore_receipts: BTreeMap<NodeId, u64>,
    /// Distinct phases with traffic, per cover cluster (when recorded).
    pub cluster_activity: BTreeMap<ClusterKey, usize>,
    /// Whether every node learned of termination.
    pub all_halted: bool,
    pub trace_hash: u64,
}

/// Builds a `(⌈2 log₂ n⌉, 2)`-cover, then the BFS tree rooted at `root`.
pub fn bfs_construction(g: &Graph, root: NodeId, options: &BfsOptions) -> Result<BfsCoverRun, BfsError> {
    if !g.contains(root) {
        return Err(BfsError::UnknownRoot(root));
    }
    let params = CoverParams::new(cover_kappa(g.n()), COVER_W, options.seed);
    let cover = cover_construction(g, &params)?;
    bfs_construction_on(g, root, cover, options)
}

/// BFS phases on top of an already constructed cover.
pub fn bfs_construction_on(
    g: &Graph,
    root: NodeId,
    cover: CoverRun,
    options: &BfsOptions,
) -> Result<BfsCoverRun, BfsError> {
    if !g.contains(root) {
        return Err(BfsError::UnknownRoot(root));
    }
    let params = cover.cover.params;
    let clock = PhaseClock::for_cover(&params);
    let cfg = ModeConfig {
        rng_seed: options.seed ^ 0x5eed_bf5,
        record_tags: options.record_activity,
        ..ModeConfig::default()
    };
    let locals = &cover.local;
    let out = simengine::run(g, &cfg, |ctx| {
        let slot = locals
            .binary_search_by_key(&ctx.id, |(v, _)| *v)
            .expect("every node has a local view");
        let roots = if ctx.id == root { vec![root] } else { Vec::new() };
        BfsNode::new(clock, &locals[slot].1, &params, options.ping_policy, roots)
    })?;

    let explore_receipts = g
        .ids()
        .iter()
        .map(|&v| (v, out.received(v, Category::Exploration)))
        .collect();
    let cluster_activity = out
        .tags
        .as_ref()
        .map(|tags| {
            let by_channel: FxHashMap<u64, ClusterKey> =
                cover.keys.iter().map(|k| (k.channel(), *k)).collect();
            tags.iter()
                .filter_map(|(ch, epochs)| Some((*by_channel.get(ch)?, epochs.len())))
                .collect()
        })
        .unwrap_or_default();
    let bfs_metrics = out.metrics.clone();
    let trace_hash = out.trace_hash ^ cover.trace_hash.rotate_left(1);

    let mut tree = BfsTree {
        root,
        parent: BTreeMap::new(),
        layer: BTreeMap::new(),
    };
    let mut all_halted = true;
    let mut failure = None;
    for (v, o) in out.into_outputs() {
        failure = failure.or(o.failure);
        let e = o.execs.get(&root).copied().ok_or(BfsError::Unreached(v))?;
        let layer = e.layer.ok_or(BfsError::Unreached(v))?;
        tree.layer.insert(v, layer);
        if let Some(p) = e.parent {
            tree.parent.insert(v, p);
        }
        all_halted &= e.halted;
    }
    if let Some((node, missing)) = failure {
        return Err(BfsError::IncompleteView { node, missing });
    }
    let mut metrics = cover.metrics.clone();
    metrics.absorb(&bfs_metrics);
    Ok(BfsCoverRun {
        tree,
        cover,
        bfs_metrics,
        metrics,
        explore_receipts,
        cluster_activity,
        all_halted,
        trace_hash,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{generate_graph, GraphFamily, GraphGenSpec, IdScheme};

    fn run(family: GraphFamily, n: usize, root_slot: usize, seed: u64) -> (Graph, BfsCoverRun) {
        let spec = GraphGenSpec::new(family, n)
            .with_ids(IdScheme::RandomPermutation)
            .with_seed(seed);
        let g = generate_graph(&spec).unwrap();
        let root = g.ids()[root_slot];
        let options = BfsOptions {
            seed,
            record_activity: true,
            ..BfsOptions::default()
        };
        let run = bfs_construction(&g, root, &options).unwrap();
        (g, run)
    }

    #[test]
    fn clock_layout() {
        let clock = PhaseClock::for_cover(&CoverParams::new(4, 2, 0));
        assert_eq!(clock.unit, 16);
        assert_eq!(clock.length(), 65);
        assert_eq!(clock.start(1), 1);
        assert_eq!(clock.start(3), 131);
    }

    #[test]
    fn path_from_an_end() {
        let g = generate_graph(&GraphGenSpec::new(GraphFamily::Path, 4)).unwrap();
        let run = bfs_construction(&g, 1, &BfsOptions::default()).unwrap();
        assert_eq!(run.tree.layer, BTreeMap::from([(1, 0), (2, 1), (3, 2), (4, 3)]));
        assert!(run.all_halted);
    }

    #[test]
    fn star_from_center() {
        let g = generate_graph(&GraphGenSpec::new(GraphFamily::Star, 9)).unwrap();
        let run = bfs_construction(&g, 1, &BfsOptions::default()).unwrap();
        assert_eq!(run.tree.depth(), 1);
        run.tree.verify(&g).unwrap();
    }

    #[test]
    fn single_node() {
        let g = generate_graph(&GraphGenSpec::new(GraphFamily::Path, 1)).unwrap();
        let run = bfs_construction(&g, 1, &BfsOptions::default()).unwrap();
        assert_eq!(run.tree.layer, BTreeMap::from([(1, 0)]));
        assert!(run.all_halted);
        assert_eq!(
            bfs_construction(&g, 2, &BfsOptions::default()).unwrap_err(),
            BfsError::UnknownRoot(2)
        );
    }

    #[test]
    fn exact_layers_and_one_join() {
        for (family, n) in [
            (GraphFamily::Grid, 100),
            (GraphFamily::ErdosRenyi { p: 0.06 }, 120),
            (GraphFamily::BalancedBinaryTree, 90),
            (GraphFamily::Cycle, 41),
        ] {
            let (g, run) = run(family, n, n / 2, 3);
            run.tree.verify(&g).unwrap();
            for (&v, &k) in &run.explore_receipts {
                assert_eq!(k, u64::from(v != run.tree.root), "{family} node {v}");
            }
            assert!(run.all_halted);
            let bound = 4 * run.cover.cover.params.kappa * COVER_W + 1;
            assert!(run.cluster_activity.values().all(|&a| a as u32 <= bound));
        }
    }

    #[test]
    fn covering_cluster_policy_agrees() {
        let g = generate_graph(&GraphGenSpec::new(GraphFamily::Grid, 64).with_seed(2)).unwrap();
        let every = bfs_construction(&g, 5, &BfsOptions::default()).unwrap();
        let options = BfsOptions {
            ping_policy: PingPolicy::CoveringCluster,
            ..BfsOptions::default()
        };
        let covering = bfs_construction(&g, 5, &options).unwrap();
        assert_eq!(every.tree, covering.tree);
        assert!(covering.metrics.messages_total <= every.metrics.messages_total);
    }
}
