use std::fmt;

use rustc_hash::{FxHashMap, FxHashSet};

use super::{GossipRole, TraceEntry};
use crate::netgraph::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// The node activated more than one link in the round.
    MultipleActivations,
    /// A response was sent over a link that was not activated towards the
    /// sender in the previous round (or was already answered).
    UnsolicitedResponse,
    /// A message without a gossip role was sent in gossip mode.
    NotGossip,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GossipViolation {
    pub round: u64,
    pub node: NodeId,
    pub links: Vec<NodeId>,
    pub kind: ViolationKind,
}

impl fmt::Display for GossipViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} by node {} in round {} over links to {:?}",
            self.kind, self.node, self.round, self.links
        )
    }
}

/// Online checker for the gossip restriction. Envelopes must be observed
/// in non-decreasing round order.
#[derive(Debug, Default)]
pub struct GossipAuditor {
    round: u64,
    activated: FxHashMap<NodeId, NodeId>,
    answerable: FxHashSet<(NodeId, NodeId)>,
}

impl GossipAuditor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(
        &mut self,
        round: u64,
        src: NodeId,
        dst: NodeId,
        role: Option<GossipRole>,
    ) -> Result<(), GossipViolation> {
        if round != self.round {
            self.answerable.clear();
            if round == self.round + 1 {
                self.answerable.extend(self.activated.drain());
            }
            self.activated.clear();
            self.round = round;
        }
        let violation = |kind, links| GossipViolation {
            round,
            node: src,
            links,
            kind,
        };
        match role {
            None => Err(violation(ViolationKind::NotGossip, vec![dst])),
            Some(GossipRole::Initiate) => match self.activated.get(&src) {
                Some(&first) if first != dst => {
                    Err(violation(ViolationKind::MultipleActivations, vec![first, dst]))
                }
                _ => {
                    self.activated.insert(src, dst);
                    Ok(())
                }
            },
            Some(GossipRole::Respond) => {
                if self.answerable.remove(&(dst, src)) {
                    Ok(())
                } else {
                    Err(violation(ViolationKind::UnsolicitedResponse, vec![dst]))
                }
            }
        }
    }
}

/// Checks a recorded trace against the gossip restriction.
pub fn gossip_check(trace: &[TraceEntry]) -> Result<(), GossipViolation> {
    let mut auditor = GossipAuditor::new();
    trace
        .iter()
        .try_for_each(|e| auditor.observe(e.round, e.src, e.dst, e.gossip))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simengine::Category;

    fn entry(round: u64, src: NodeId, dst: NodeId, role: GossipRole) -> TraceEntry {
        TraceEntry {
            round,
            src,
            dst,
            category: Category::Gossip,
            tag: None,
            gossip: Some(role),
        }
    }

    #[test]
    fn idle_round_is_fine() {
        assert!(gossip_check(&[]).is_ok());
    }

    #[test]
    fn two_activations_violate() {
        let trace = [
            entry(1, 1, 2, GossipRole::Initiate),
            entry(1, 1, 3, GossipRole::Initiate),
        ];
        let v = gossip_check(&trace).unwrap_err();
        assert_eq!(v.kind, ViolationKind::MultipleActivations);
        assert_eq!((v.round, v.node, v.links.clone()), (1, 1, vec![2, 3]));
    }

    #[test]
    fn star_leaves_may_all_activate_center() {
        let mut trace: Vec<_> = (2..=5).map(|leaf| entry(1, leaf, 1, GossipRole::Initiate)).collect();
        trace.push(entry(1, 1, 2, GossipRole::Initiate));
        trace.extend((2..=5).map(|leaf| entry(2, 1, leaf, GossipRole::Respond)));
        trace.push(entry(2, 2, 1, GossipRole::Respond));
        assert!(gossip_check(&trace).is_ok());
    }

    #[test]
    fn responses_need_a_fresh_activation() {
        let stale = [
            entry(1, 1, 2, GossipRole::Initiate),
            entry(3, 2, 1, GossipRole::Respond),
        ];
        assert_eq!(
            gossip_check(&stale).unwrap_err().kind,
            ViolationKind::UnsolicitedResponse
        );
        let twice = [
            entry(1, 1, 2, GossipRole::Initiate),
            entry(2, 2, 1, GossipRole::Respond),
            entry(2, 2, 1, GossipRole::Respond),
        ];
        assert!(gossip_check(&twice).is_err());
    }
}
