use std::collections::BTreeMap;
use std::sync::Arc;

use rustc_hash::FxHashSet;

use super::{edges_from, outgoing_edges, ClusterError, ClusterTree};
use crate::netgraph::{Graph, NodeId};
use crate::simengine::{
    self, Bundle, Category, Incoming, ModeConfig, Payload, Protocol, RunMetrics, Shared, StepCtx,
};

/// First round of sub-phase `k` (1-based) of an exploration that starts in
/// round `base`. Sub-phase `k` lasts `2k + 3` rounds.
pub(crate) fn sub_phase_start(base: u64, k: u32) -> u64 {
    let k = u64::from(k);
    base + (k - 1) * (k + 3)
}

/// Total clock budget of an exploration to depth `h`.
pub(crate) fn exploration_window(h: u32) -> u64 {
    let h = u64::from(h);
    h * h + 4 * h
}

/// A frontier member's id and neighbor list.
pub(crate) type FrontierEntry = Option<(NodeId, Arc<[NodeId]>)>;

#[derive(Debug, Clone)]
pub(crate) enum ExploreMsg {
    /// Convergecast of frontier neighborhoods towards the root.
    Report(Bundle<FrontierEntry>),
    /// Root's edge plan for sub-phase `k`, broadcast down the tree.
    Plan {
        k: u32,
        more: bool,
        edges: Shared<Vec<(NodeId, NodeId)>>,
    },
    /// Invitation to join at depth `k`; the sender becomes the parent.
    Explore { k: u32, more: bool },
}

impl ExploreMsg {
    pub(crate) fn category(&self) -> Category {
        match self {
            ExploreMsg::Explore { .. } => Category::Exploration,
            _ => Category::ClusterTree,
        }
    }

    pub(crate) fn digest(&self) -> u64 {
        match self {
            ExploreMsg::Report(b) => b.digest(),
            ExploreMsg::Plan { k, more, edges } => {
                edges.digest() ^ (u64::from(*k) << 1 | u64::from(*more))
            }
            ExploreMsg::Explore { k, more } => u64::from(*k) << 1 | u64::from(*more),
        }
    }
}

struct RootState {
    members: FxHashSet<NodeId>,
}

/// One node's part in one exploration instance: layer `k` is added during
/// sub-phase `k`. At the start of each sub-phase the current tree
/// convergecasts the neighbor lists of the newest layer, the root picks a
/// lexicographic minimal outgoing edge set and broadcasts it, and every
/// frontier member sends `Explore` along its own plan edges.
pub(crate) struct ExploreNode {
    base: u64,
    h: u32,
    depth: u32,
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    next_k: Option<u32>,
    current_k: u32,
    waiting: usize,
    gathered: Vec<Bundle<FrontierEntry>>,
    root: Option<RootState>,
}

/// What an instance left behind at one node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ExploreOutcome {
    pub depth: u32,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
}

impl ExploreNode {
    pub(crate) fn root(me: NodeId, base: u64, h: u32) -> Self {
        ExploreNode {
            base,
            h,
            depth: 0,
            parent: None,
            children: Vec::new(),
            next_k: Some(1),
            current_k: 0,
            waiting: 0,
            gathered: Vec::new(),
            root: Some(RootState {
                members: FxHashSet::from_iter([me]),
            }),
        }
    }

    /// Join on receipt of `Explore { k, more }` from `from`.
    pub(crate) fn joined(from: NodeId, k: u32, more: bool, base: u64, h: u32) -> Self {
        ExploreNode {
            base,
            h,
            depth: k,
            parent: Some(from),
            children: Vec::new(),
            next_k: more.then_some(k + 1),
            current_k: k,
            waiting: 0,
            gathered: Vec::new(),
            root: None,
        }
    }

    pub(crate) fn outcome(&self) -> ExploreOutcome {
        ExploreOutcome {
            depth: self.depth,
            parent: self.parent,
            children: self.children.clone(),
        }
    }

    /// Round in which the node must next be stepped without mail.
    pub(crate) fn wake_round(&self) -> Option<u64> {
        self.next_k.map(|k| sub_phase_start(self.base, k))
    }

    /// Called in the round returned by [`Self::wake_round`].
    pub(crate) fn on_wake(
        &mut self,
        me: NodeId,
        nbrs: &Arc<[NodeId]>,
        send: &mut impl FnMut(NodeId, ExploreMsg),
    ) {
        let Some(k) = self.next_k.take() else {
            return;
        };
        self.current_k = k;
        self.waiting = self.children.len();
        self.gathered.clear();
        if self.waiting == 0 {
            self.report(me, nbrs, send);
        }
    }

    pub(crate) fn on_msg(
        &mut self,
        me: NodeId,
        nbrs: &Arc<[NodeId]>,
        msg: ExploreMsg,
        send: &mut impl FnMut(NodeId, ExploreMsg),
    ) {
        match msg {
            ExploreMsg::Report(b) => {
                self.gathered.push(b);
                self.waiting -= 1;
                if self.waiting == 0 {
                    self.report(me, nbrs, send);
                }
            }
            ExploreMsg::Plan { k, more, edges } => self.apply_plan(me, k, more, edges, send),
            // Already a member: the minimal outgoing edge set never targets one.
            ExploreMsg::Explore { .. } => {}
        }
    }

    fn report(&mut self, me: NodeId, nbrs: &Arc<[NodeId]>, send: &mut impl FnMut(NodeId, ExploreMsg)) {
        let k = self.current_k;
        let own = (self.depth + 1 == k).then(|| (me, Arc::clone(nbrs)));
        let bundle = Bundle::join(own, std::mem::take(&mut self.gathered));
        match (self.parent, self.root.as_mut()) {
            (Some(p), _) => send(p, ExploreMsg::Report(bundle)),
            (None, Some(root)) => {
                let members = &root.members;
                let plan = outgoing_edges(
                    bundle.iter().flatten().map(|(v, nbrs)| (*v, &nbrs[..])),
                    |w| members.contains(&w),
                    true,
                );
                if plan.is_empty() {
                    return;
                }
                root.members.extend(plan.iter().map(|&(_, w)| w));
                let more = k < self.h;
                self.apply_plan(me, k, more, Shared::new(plan), send);
            }
            (None, None) => unreachable!("non-root member without parent"),
        }
    }

    fn apply_plan(
        &mut self,
        me: NodeId,
        k: u32,
        more: bool,
        edges: Shared<Vec<(NodeId, NodeId)>>,
        send: &mut impl FnMut(NodeId, ExploreMsg),
    ) {
        for &c in &self.children {
            send(
                c,
                ExploreMsg::Plan {
                    k,
                    more,
                    edges: edges.clone(),
                },
            );
        }
        for &(_, w) in edges_from(&edges, me) {
            send(w, ExploreMsg::Explore { k, more });
            self.children.push(w);
        }
        self.next_k = more.then_some(k + 1);
    }
}

#[derive(Debug, Clone)]
struct Wrapped(ExploreMsg);

impl Payload for Wrapped {
    fn category(&self) -> Category {
        self.0.category()
    }

    fn digest(&self) -> u64 {
        self.0.digest()
    }
}

struct SingleExplore {
    h: u32,
    state: Option<ExploreNode>,
}

impl Protocol for SingleExplore {
    type Msg = Wrapped;
    type Output = Option<ExploreOutcome>;

    fn step(&mut self, ctx: &mut StepCtx<'_, Wrapped>, inbox: Vec<Incoming<Wrapped>>) {
        let me = ctx.id();
        let nbrs = Arc::clone(ctx.neighbors());
        let round = ctx.round();
        let h = self.h;
        let mut send = |dst, m| ctx.send(dst, Wrapped(m));
        if let Some(state) = self.state.as_mut() {
            if state.wake_round() == Some(round) {
                state.on_wake(me, &nbrs, &mut send);
            }
        }
        for m in inbox {
            match (&mut self.state, m.msg.0) {
                (None, ExploreMsg::Explore { k, more }) => {
                    self.state = Some(ExploreNode::joined(m.from, k, more, 1, h));
                }
                (Some(state), msg) => state.on_msg(me, &nbrs, msg, &mut send),
                (None, _) => {}
            }
        }
        if let Some(r) = self.state.as_ref().and_then(ExploreNode::wake_round) {
            ctx.wake_at(r);
        }
    }

    fn finish(self) -> Option<ExploreOutcome> {
        self.state.map(|s| s.outcome())
    }
}

#[derive(Debug, Clone)]
pub struct ExplorationRun {
    pub tree: ClusterTree,
    pub metrics: RunMetrics,
    /// Exploration messages received per node.
    pub explore_receipts: BTreeMap<NodeId, u64>,
}

/// Grows the BFS tree of the `h`-ball around `root` one layer per
/// sub-phase. At most `4·|C|·h` messages and `h² + 4h` rounds.
pub fn bfs_exploration(g: &Graph, root: NodeId, h: u32) -> Result<ExplorationRun, ClusterError> {
    if h < 1 {
        return Err(ClusterError::InvalidDepth);
    }
    if !g.contains(root) {
        return Err(ClusterError::UnknownNode(root));
    }
    let cfg = ModeConfig {
        max_rounds: exploration_window(h) + 1,
        ..ModeConfig::default()
    };
    let out = simengine::run(g, &cfg, |ctx| SingleExplore {
        h,
        state: (ctx.id == root).then(|| ExploreNode::root(root, 1, h)),
    })?;
    let explore_receipts = g
        .ids()
        .iter()
        .map(|&v| (v, out.received(v, Category::Exploration)))
        .collect();
    let metrics = out.metrics.clone();
    let parents: BTreeMap<NodeId, NodeId> = out
        .into_outputs()
        .into_iter()
        .filter_map(|(v, o)| Some((v, o?.parent?)))
        .collect();
    Ok(ExplorationRun {
        tree: ClusterTree::from_parents(root, parents)?,
        metrics,
        explore_receipts,
    })
}
