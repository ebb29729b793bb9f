//! Randomized sparse `(κ, W)`-neighborhood covers built from concurrent
//! depth-bounded BFS explorations, and a centralized verifier.

mod verify;

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustercomm::{
    exploration_window, ClusterError, ClusterTree, ExploreMsg, ExploreNode, ExploreOutcome,
};
use crate::netgraph::{Graph, NodeId};
use crate::simengine::{
    self, Category, Incoming, ModeConfig, Payload, Protocol, RunMetrics, SimError, StepCtx, Tag,
};

pub use verify::{membership_bound, message_bound, verify_cover, verify_cover_with, CoverReport};

/// Calibrated sparsity constant `c_s`: max membership is expected to stay
/// below `c_s · κ · n^(1/κ) · ln n`. Worst observed ratio over seven
/// families at n ≤ 1024 was 0.48.
pub const SPARSITY_CONSTANT: f64 = 0.75;

/// Calibrated message constant `c_m`: construction messages are expected
/// to stay below `c_m · n · κ² · W · n^(1/κ) · ln n`. Worst observed
/// ratio was 0.75 (paths at n = 64).
pub const MESSAGE_CONSTANT: f64 = 1.0;

/// Multiplier on `ln n` in the source-sampling probability.
pub const SAMPLING_FACTOR: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoverError {
    #[error("kappa and W must both be at least 1")]
    InvalidParams,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("exploration produced an invalid cluster tree: {0}")]
    Tree(#[from] ClusterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverParams {
    pub kappa: u32,
    #[serde(rename = "W")]
    pub w: u32,
    pub seed: u64,
}

impl CoverParams {
    pub fn new(kappa: u32, w: u32, seed: u64) -> Self {
        CoverParams { kappa, w, seed }
    }

    pub fn validate(&self) -> Result<(), CoverError> {
        if self.kappa == 0 || self.w == 0 {
            return Err(CoverError::InvalidParams);
        }
        Ok(())
    }

    /// Exploration depth of phase `i`: `2(κ − i + 1)W`.
    pub fn depth(&self, phase: u32) -> u32 {
        2 * (self.kappa - phase + 1) * self.w
    }

    /// Join depth up to which a phase-`i` cluster covers a node: `2(κ − i)W`.
    pub fn cover_radius(&self, phase: u32) -> u32 {
        2 * (self.kappa - phase) * self.w
    }

    /// Source probability of an uncovered node in phase `i`.
    pub fn source_probability(&self, phase: u32, n: usize) -> f64 {
        if phase >= self.kappa {
            return 1.0;
        }
        let n = n as f64;
        let exponent = (f64::from(phase) - f64::from(self.kappa)) / f64::from(self.kappa);
        (n.powf(exponent) * SAMPLING_FACTOR * n.ln()).min(1.0)
    }

    /// First round of phase `i` (1-based) when the construction starts in
    /// round 1.
    pub fn phase_start(&self, phase: u32) -> u64 {
        1 + (1..phase).map(|j| exploration_window(self.depth(j))).sum::<u64>()
    }

    /// Rounds reserved for the whole construction.
    pub fn total_rounds(&self) -> u64 {
        self.phase_start(self.kappa + 1) - 1
    }
}

/// Identifies a cluster: its source and the phase that created it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClusterKey {
    pub phase: u32,
    pub source: NodeId,
}

impl ClusterKey {
    /// Compact channel id for per-cluster traffic tagging.
    pub fn channel(&self) -> u64 {
        self.source << 8 | u64::from(self.phase)
    }
}

/// A node's own knowledge about one cluster it belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalCluster {
    pub key: ClusterKey,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cover {
    pub params: CoverParams,
    pub clusters: Vec<ClusterTree>,
    /// Node id → indices into `clusters`.
    pub membership: BTreeMap<NodeId, Vec<usize>>,
}

impl Cover {
    /// Builds the membership index from a cluster list.
    pub fn from_clusters(params: CoverParams, clusters: Vec<ClusterTree>) -> Self {
        let mut membership: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
        for (i, c) in clusters.iter().enumerate() {
            for &v in &c.members {
                membership.entry(v).or_default().push(i);
            }
        }
        Cover {
            params,
            clusters,
            membership,
        }
    }

    pub fn max_membership(&self) -> usize {
        self.membership.values().map(Vec::len).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone)]
pub struct CoverRun {
    pub cover: Cover,
    pub keys: Vec<ClusterKey>,
    /// Per-node cluster knowledge, ascending by node id.
    pub local: Vec<(NodeId, Vec<LocalCluster>)>,
    pub metrics: RunMetrics,
    pub trace_hash: u64,
}

#[derive(Debug, Clone)]
struct CoverMsg {
    key: ClusterKey,
    inner: ExploreMsg,
}

impl Payload for CoverMsg {
    fn category(&self) -> Category {
        self.inner.category()
    }

    fn digest(&self) -> u64 {
        self.inner.digest() ^ self.key.channel().rotate_left(29)
    }

    fn tag(&self) -> Option<Tag> {
        Some(Tag {
            channel: self.key.channel(),
            epoch: self.key.phase,
        })
    }
}

struct CoverNode<'a> {
    params: &'a CoverParams,
    /// `starts[i - 1]` is the first round of phase `i`; the last entry is
    /// one past the final round.
    starts: &'a [u64],
    n: usize,
    covered: bool,
    instances: BTreeMap<ClusterKey, ExploreNode>,
    agenda: std::collections::BTreeSet<(u64, ClusterKey)>,
}

impl CoverNode<'_> {
    fn phase_at(&self, round: u64) -> Option<u32> {
        let i = self.starts[..self.params.kappa as usize].binary_search(&round).ok()?;
        Some(i as u32 + 1)
    }

    fn schedule(&mut self, key: ClusterKey) {
        if let Some(r) = self.instances.get(&key).and_then(ExploreNode::wake_round) {
            self.agenda.insert((r, key));
        }
    }
}

impl Protocol for CoverNode<'_> {
    type Msg = CoverMsg;
    type Output = (bool, Vec<(ClusterKey, ExploreOutcome)>);

    fn step(&mut self, ctx: &mut StepCtx<'_, CoverMsg>, inbox: Vec<Incoming<CoverMsg>>) {
        let me = ctx.id();
        let nbrs = Arc::clone(ctx.neighbors());
        let round = ctx.round();
        let params = *self.params;

        if !self.covered {
            if let Some(phase) = self.phase_at(round) {
                let p = params.source_probability(phase, self.n);
                if p >= 1.0 || ctx.rng().gen_bool(p) {
                    self.covered = true;
                    let key = ClusterKey { phase, source: me };
                    let base = self.starts[phase as usize - 1];
                    self.instances
                        .insert(key, ExploreNode::root(me, base, params.depth(phase)));
                    self.schedule(key);
                }
            }
        }

        let mut out: Vec<(NodeId, CoverMsg)> = Vec::new();
        while let Some(&(r, key)) = self.agenda.first() {
            if r > round {
                break;
            }
            self.agenda.pop_first();
            let inst = self.instances.get_mut(&key).expect("scheduled instance");
            if inst.wake_round() == Some(round) {
                inst.on_wake(me, &nbrs, &mut |dst, inner| out.push((dst, CoverMsg { key, inner })));
                self.schedule(key);
            }
        }

        for m in inbox {
            let key = m.msg.key;
            match (self.instances.get_mut(&key), m.msg.inner) {
                (Some(inst), inner) => {
                    inst.on_msg(me, &nbrs, inner, &mut |dst, inner| {
                        out.push((dst, CoverMsg { key, inner }))
                    });
                }
                (None, ExploreMsg::Explore { k, more }) => {
                    let base = self.starts[key.phase as usize - 1];
                    let inst = ExploreNode::joined(m.from, k, more, base, params.depth(key.phase));
                    self.instances.insert(key, inst);
                    if k <= params.cover_radius(key.phase) {
                        self.covered = true;
                    }
                }
                (None, _) => {}
            }
            self.schedule(key);
        }
        for (dst, msg) in out {
            ctx.send(dst, msg);
        }

        if let Some(&(r, _)) = self.agenda.first() {
            ctx.wake_at(r);
        }
        if !self.covered {
            let later = &self.starts[..params.kappa as usize];
            if let Some(&next) = later.iter().find(|&&s| s > round) {
                ctx.wake_at(next);
            }
        }
        let end = self.starts[params.kappa as usize] - 1;
        if round < end {
            ctx.wake_at(end);
        }
    }

    fn finish(self) -> Self::Output {
        let clusters = self
            .instances
            .into_iter()
            .map(|(k, inst)| (k, inst.outcome()))
            .collect();
        (self.covered, clusters)
    }
}

/// Runs the `κ`-phase construction. In phase `i` every uncovered node
/// becomes a source with [`CoverParams::source_probability`] and explores
/// to depth `2(κ − i + 1)W`; nodes reached within `2(κ − i)W` hops become
/// covered. Every phase has a fixed clock window, so the construction
/// takes exactly [`CoverParams::total_rounds`] rounds.
pub fn cover_construction(g: &Graph, params: &CoverParams) -> Result<CoverRun, CoverError> {
    params.validate()?;
    let cfg = ModeConfig {
        rng_seed: params.seed,
        max_rounds: params.total_rounds() + 1,
        ..ModeConfig::default()
    };
    let n = g.n();
    let starts: Vec<u64> = (1..=params.kappa + 1).map(|i| params.phase_start(i)).collect();
    let out = simengine::run(g, &cfg, |_| CoverNode {
        params,
        starts: &starts,
        n,
        covered: false,
        instances: BTreeMap::new(),
        agenda: Default::default(),
    })?;
    let metrics = out.metrics.clone();
    let trace_hash = out.trace_hash;

    let mut parents: BTreeMap<ClusterKey, BTreeMap<NodeId, NodeId>> = BTreeMap::new();
    let mut local = Vec::with_capacity(n);
    for (v, (_, instances)) in out.into_outputs() {
        let mut mine = Vec::with_capacity(instances.len());
        for (key, o) in instances {
            let entry = parents.entry(key).or_default();
            if let Some(p) = o.parent {
                entry.insert(v, p);
            }
            mine.push(LocalCluster {
                key,
                parent: o.parent,
                children: o.children,
                depth: o.depth,
            });
        }
        local.push((v, mine));
    }
    let mut keys = Vec::with_capacity(parents.len());
    let mut clusters = Vec::with_capacity(parents.len());
    for (key, parent) in parents {
        keys.push(key);
        clusters.push(ClusterTree::from_parents(key.source, parent)?);
    }
    Ok(CoverRun {
        cover: Cover::from_clusters(*params, clusters),
        keys,
        local,
        metrics,
        trace_hash,
    })
}
