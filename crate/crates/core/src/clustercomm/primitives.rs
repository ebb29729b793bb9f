use std::collections::BTreeMap;
use std::hash::Hash;
use std::sync::Arc;

use super::{
    edges_from, outgoing_edges, AugmentedClusterTree, ClusterError, ClusterTree, OutgoingEdgeSet,
};
use crate::netgraph::{Graph, NodeId};
use crate::simengine::{
    self, Bundle, Category, Incoming, ModeConfig, Payload, Protocol, RunMetrics, Shared, StepCtx,
};

/// Sends `value` over tree edges.
#[derive(Debug)]
struct Carry<T> {
    category: Category,
    value: Shared<T>,
}

impl<T> Clone for Carry<T> {
    fn clone(&self) -> Self {
        Carry {
            category: self.category,
            value: self.value.clone(),
        }
    }
}

impl<T> Payload for Carry<T> {
    fn category(&self) -> Category {
        self.category
    }

    fn digest(&self) -> u64 {
        self.value.digest()
    }
}

#[derive(Debug, Clone)]
pub struct BroadcastRun<T> {
    /// Value held by each member after the run.
    pub delivered: BTreeMap<NodeId, T>,
    pub metrics: RunMetrics,
    /// Rounds in which some message was sent.
    pub comm_rounds: u64,
    pub trace_hash: u64,
}

struct BroadcastNode<'t, T> {
    tree: &'t ClusterTree,
    value: Option<Shared<T>>,
}

impl<T> Protocol for BroadcastNode<'_, T> {
    type Msg = Carry<T>;
    type Output = Option<Shared<T>>;

    fn step(&mut self, ctx: &mut StepCtx<'_, Carry<T>>, inbox: Vec<Incoming<Carry<T>>>) {
        if let Some(m) = inbox.into_iter().next() {
            self.value = Some(m.msg.value);
        }
        if let Some(value) = &self.value {
            for &c in self.tree.children_of(ctx.id()) {
                ctx.send(
                    c,
                    Carry {
                        category: Category::ClusterTree,
                        value: value.clone(),
                    },
                );
            }
        }
    }

    fn finish(self) -> Self::Output {
        self.value
    }
}

/// Root-to-leaves broadcast over a cluster tree: `|C| − 1` messages and
/// `depth` rounds.
pub fn broadcast<T: Hash + Clone>(
    g: &Graph,
    tree: &ClusterTree,
    payload: T,
) -> Result<BroadcastRun<T>, ClusterError> {
    tree.validate_in(g)?;
    let root_value = Shared::new(payload);
    let out = simengine::run(g, &ModeConfig::default(), |ctx| BroadcastNode {
        tree,
        value: (ctx.id == tree.root).then(|| root_value.clone()),
    })?;
    let comm_rounds = out.last_send_round;
    let trace_hash = out.trace_hash;
    let metrics = out.metrics.clone();
    let delivered = out
        .into_outputs()
        .into_iter()
        .filter(|(v, _)| tree.contains(*v))
        .map(|(v, value)| value.map(|x| (v, (*x).clone())).ok_or(ClusterError::Incomplete))
        .collect::<Result<_, _>>()?;
    Ok(BroadcastRun {
        delivered,
        metrics,
        comm_rounds,
        trace_hash,
    })
}

#[derive(Debug, Clone)]
pub struct ConvergecastRun<T> {
    /// Combination of every member's payload, as held by the root.
    pub at_root: T,
    pub metrics: RunMetrics,
    pub comm_rounds: u64,
    pub trace_hash: u64,
}

struct ConvergeNode<'t, T, F> {
    tree: &'t ClusterTree,
    combine: &'t F,
    acc: Option<T>,
    waiting: usize,
    sent: bool,
}

impl<T: Hash + Clone, F: Fn(T, T) -> T> Protocol for ConvergeNode<'_, T, F> {
    type Msg = Carry<T>;
    type Output = Option<T>;

    fn step(&mut self, ctx: &mut StepCtx<'_, Carry<T>>, inbox: Vec<Incoming<Carry<T>>>) {
        let Some(mut acc) = self.acc.take() else {
            return;
        };
        for m in inbox {
            acc = (self.combine)(acc, (*m.msg.value).clone());
            self.waiting -= 1;
        }
        if self.waiting == 0 && !self.sent {
            if let Some(&p) = self.tree.parent.get(&ctx.id()) {
                self.sent = true;
                ctx.send(
                    p,
                    Carry {
                        category: Category::ClusterTree,
                        value: Shared::new(acc.clone()),
                    },
                );
            }
        }
        self.acc = Some(acc);
    }

    fn finish(self) -> Option<T> {
        (self.waiting == 0).then_some(self.acc).flatten()
    }
}

/// Leaves-to-root aggregation: each inner node waits for one message per
/// child, combines, and forwards. `|C| − 1` messages, `depth` rounds.
pub fn convergecast<T, F>(
    g: &Graph,
    tree: &ClusterTree,
    payloads: &BTreeMap<NodeId, T>,
    combine: F,
) -> Result<ConvergecastRun<T>, ClusterError>
where
    T: Hash + Clone,
    F: Fn(T, T) -> T,
{
    tree.validate_in(g)?;
    if let Some(&v) = tree.members.iter().find(|v| !payloads.contains_key(v)) {
        return Err(ClusterError::MissingPayload(v));
    }
    let out = simengine::run(g, &ModeConfig::default(), |ctx| ConvergeNode {
        tree,
        combine: &combine,
        acc: tree
            .contains(ctx.id)
            .then(|| payloads[&ctx.id].clone()),
        waiting: tree.children_of(ctx.id).len(),
        sent: false,
    })?;
    if out.last_send_round > u64::from(tree.depth) {
        return Err(ClusterError::Incomplete);
    }
    let comm_rounds = out.last_send_round;
    let trace_hash = out.trace_hash;
    let metrics = out.metrics.clone();
    let at_root = out
        .into_outputs()
        .into_iter()
        .find(|(v, _)| *v == tree.root)
        .and_then(|(_, acc)| acc)
        .ok_or(ClusterError::Incomplete)?;
    Ok(ConvergecastRun {
        at_root,
        metrics,
        comm_rounds,
        trace_hash,
    })
}

type View = (NodeId, Arc<[NodeId]>);

#[derive(Debug, Clone)]
enum AugmentMsg {
    Gather(Bundle<View>),
    Extension(Shared<Vec<(NodeId, NodeId)>>),
    Notify,
}

impl Payload for AugmentMsg {
    fn category(&self) -> Category {
        Category::ClusterTree
    }

    fn digest(&self) -> u64 {
        match self {
            AugmentMsg::Gather(b) => b.digest(),
            AugmentMsg::Extension(e) => e.digest(),
            AugmentMsg::Notify => 0x4e4f,
        }
    }
}

#[derive(Debug, Default)]
struct AugmentOutput {
    extension: Vec<(NodeId, NodeId)>,
    /// Inside endpoint that notified this (boundary) node.
    notified_by: Option<NodeId>,
}

struct AugmentNode<'t> {
    tree: &'t ClusterTree,
    member: bool,
    reported: bool,
    gathered: Vec<Bundle<View>>,
    out: AugmentOutput,
}

impl AugmentNode<'_> {
    fn adopt(&mut self, ctx: &mut StepCtx<'_, AugmentMsg>, plan: Shared<Vec<(NodeId, NodeId)>>) {
        let me = ctx.id();
        for &c in self.tree.children_of(me) {
            ctx.send(c, AugmentMsg::Extension(plan.clone()));
        }
        self.out.extension = edges_from(&plan, me).to_vec();
        for &(_, w) in edges_from(&plan, me) {
            ctx.send(w, AugmentMsg::Notify);
        }
    }
}

impl Protocol for AugmentNode<'_> {
    type Msg = AugmentMsg;
    type Output = AugmentOutput;

    fn step(&mut self, ctx: &mut StepCtx<'_, AugmentMsg>, inbox: Vec<Incoming<AugmentMsg>>) {
        let me = ctx.id();
        for m in inbox {
            match m.msg {
                AugmentMsg::Gather(b) => self.gathered.push(b),
                AugmentMsg::Extension(plan) => self.adopt(ctx, plan),
                AugmentMsg::Notify => self.out.notified_by = Some(m.from),
            }
        }
        if !self.member || self.reported || self.gathered.len() < self.tree.children_of(me).len() {
            return;
        }
        self.reported = true;
        let view = Bundle::join(
            (me, Arc::clone(ctx.neighbors())),
            std::mem::take(&mut self.gathered),
        );
        match self.tree.parent.get(&me) {
            Some(&p) => ctx.send(p, AugmentMsg::Gather(view)),
            None => {
                let tree = self.tree;
                let plan = outgoing_edges(
                    view.iter().map(|(v, nbrs)| (*v, &nbrs[..])),
                    |v| tree.contains(v),
                    true,
                );
                self.adopt(ctx, Shared::new(plan));
            }
        }
    }

    fn finish(self) -> AugmentOutput {
        self.out
    }
}

#[derive(Debug, Clone)]
pub struct AugmentedRun {
    pub augmented: AugmentedClusterTree,
    /// For each boundary node, the member that notified it.
    pub notified: BTreeMap<NodeId, NodeId>,
    pub metrics: RunMetrics,
    pub comm_rounds: u64,
    pub trace_hash: u64,
}

/// Convergecast of every member's `(id, neighbors)`, root-side computation
/// of the lexicographic minimal outgoing edge set, broadcast of that set,
/// and one notification per extension edge to its outside endpoint.
pub fn compute_augmented_tree(g: &Graph, tree: &ClusterTree) -> Result<AugmentedRun, ClusterError> {
    tree.validate_in(g)?;
    let out = simengine::run(g, &ModeConfig::default(), |ctx| AugmentNode {
        tree,
        member: tree.contains(ctx.id),
        reported: false,
        gathered: Vec::new(),
        out: AugmentOutput::default(),
    })?;
    let comm_rounds = out.last_send_round;
    let trace_hash = out.trace_hash;
    let metrics = out.metrics.clone();
    let mut edges = Vec::new();
    let mut notified = BTreeMap::new();
    for (v, o) in out.into_outputs() {
        edges.extend(o.extension);
        if let Some(u) = o.notified_by {
            notified.insert(v, u);
        }
    }
    edges.sort_unstable();
    Ok(AugmentedRun {
        augmented: AugmentedClusterTree {
            base: tree.clone(),
            extension_edges: OutgoingEdgeSet {
                boundary: edges.iter().map(|&(_, w)| w).collect(),
                edges,
            },
        },
        notified,
        metrics,
        comm_rounds,
        trace_hash,
    })
}
