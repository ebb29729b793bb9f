//! Deterministic lockstep executor for the synchronous KT1 LOCAL model.
//!
//! Each round every scheduled node (i) receives all messages sent to it in
//! the previous round, (ii) computes locally and (iii) sends messages to
//! neighbors. Messages are unbounded in size; every envelope is counted
//! exactly once. Nodes that have nothing to do sleep until a message
//! arrives or a requested wake-up round is reached, and idle rounds are
//! skipped without changing the round count.

mod engine;
mod gossip;
mod payload;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netgraph::NodeId;

pub use engine::{run, Incoming, NodeContext, Protocol, RunOutcome, StepCtx};
pub use gossip::{gossip_check, GossipAuditor, GossipViolation, ViolationKind};
pub use payload::{digest_of, Bundle, Shared};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Exploration,
    ClusterTree,
    Gossip,
    Control,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Exploration,
        Category::ClusterTree,
        Category::Gossip,
        Category::Control,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Category::Exploration => "exploration",
            Category::ClusterTree => "cluster_tree",
            Category::Gossip => "gossip",
            Category::Control => "control",
        }
    }
}

/// Side of a gossip link activation carried by an envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GossipRole {
    /// The sender activates the link this round.
    Initiate,
    /// The sender answers an activation it received in the previous round.
    Respond,
}

/// Optional per-envelope label used to measure how many distinct epochs
/// (e.g. phases) a logical channel (e.g. one cluster tree) was used in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Tag {
    pub channel: u64,
    pub epoch: u32,
}

/// Message contents understood by the engine.
pub trait Payload: Clone {
    fn category(&self) -> Category;

    /// Cheap content fingerprint folded into the run's trace hash.
    fn digest(&self) -> u64;

    fn tag(&self) -> Option<Tag> {
        None
    }

    fn gossip_role(&self) -> Option<GossipRole> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeConfig {
    /// Enforce the gossip restriction: one link activation per node per round.
    pub gossip_mode: bool,
    pub max_rounds: u64,
    pub rng_seed: u64,
    /// Keep every envelope header in [`RunOutcome::trace`].
    pub record_trace: bool,
    /// Collect distinct tag epochs per channel in [`RunOutcome::tags`].
    pub record_tags: bool,
}

impl Default for ModeConfig {
    fn default() -> Self {
        ModeConfig {
            gossip_mode: false,
            max_rounds: 50_000_000,
            rng_seed: 0,
            record_trace: false,
            record_tags: false,
        }
    }
}

impl ModeConfig {
    pub fn seeded(rng_seed: u64) -> Self {
        ModeConfig {
            rng_seed,
            ..Self::default()
        }
    }
}

/// Round and message complexity of a run (or of several runs executed
/// back to back, see [`RunMetrics::absorb`]).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub rounds: u64,
    pub messages_total: u64,
    pub messages_by_category: BTreeMap<Category, u64>,
}

impl Default for RunMetrics {
    fn default() -> Self {
        RunMetrics {
            rounds: 0,
            messages_total: 0,
            messages_by_category: Category::ALL.iter().map(|&c| (c, 0)).collect(),
        }
    }
}

impl RunMetrics {
    pub fn messages(&self, category: Category) -> u64 {
        self.messages_by_category.get(&category).copied().unwrap_or(0)
    }

    pub(crate) fn count(&mut self, category: Category) {
        self.messages_total += 1;
        *self.messages_by_category.entry(category).or_insert(0) += 1;
    }

    /// Appends a run that started right after this one ended.
    pub fn absorb(&mut self, later: &RunMetrics) {
        self.rounds += later.rounds;
        self.messages_total += later.messages_total;
        for (&c, &k) in &later.messages_by_category {
            *self.messages_by_category.entry(c).or_insert(0) += k;
        }
    }
}

/// Header of one sent envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub round: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub category: Category,
    pub tag: Option<Tag>,
    pub gossip: Option<GossipRole>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("round {round}: node {src} sent to non-neighbor {dst}")]
    NonNeighbor { round: u64, src: NodeId, dst: NodeId },
    #[error("run exceeded {max_rounds} rounds")]
    Timeout { max_rounds: u64 },
    #[error("gossip restriction violated: {0}")]
    Gossip(GossipViolation),
}
