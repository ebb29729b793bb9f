use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::construction::{BfsNode, PhaseClock, COVER_W};
use super::{cover_kappa, BfsError, PingPolicy};
use crate::covers::{cover_construction, CoverParams};
use crate::netgraph::{Graph, NodeId};
use crate::simengine::{self, ModeConfig, RunMetrics};

/// `c_e`: each node becomes a candidate with probability
/// `min(1, c_e · ln n / n_estimate)`.
pub const CANDIDATE_FACTOR: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElectionOptions {
    pub seed: u64,
    /// Shared estimate of `n`; the true size when absent.
    pub n_estimate: Option<usize>,
    /// Candidates used instead of sampling.
    pub forced_candidates: Option<Vec<NodeId>>,
    /// Defaults to [`PingPolicy::CoveringCluster`]; pinging every
    /// cluster multiplies the per-candidate cost by the membership.
    pub ping_policy: PingPolicy,
}

impl Default for ElectionOptions {
    fn default() -> Self {
        ElectionOptions {
            seed: 0,
            n_estimate: None,
            forced_candidates: None,
            ping_policy: PingPolicy::CoveringCluster,
        }
    }
}

/// Serialized result of one election.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElectionResult {
    /// The common output, if all nodes agree.
    pub leader: Option<NodeId>,
    pub unanimous: bool,
    pub candidates: Vec<NodeId>,
}

#[derive(Debug, Clone)]
pub struct RandomizedElection {
    pub result: ElectionResult,
    /// Each node's adopted leader (`None` if no execution spanned it).
    pub outputs: BTreeMap<NodeId, Option<NodeId>>,
    pub cover_metrics: RunMetrics,
    pub metrics: RunMetrics,
    pub trace_hash: u64,
}

impl RandomizedElection {
    /// Unanimous on the largest candidate.
    pub fn succeeded(&self) -> bool {
        self.result.unanimous && self.result.leader == self.result.candidates.last().copied()
    }
}

/// Candidate probability `min(1, c_e · ln n / n_estimate)` for the shared
/// estimate.
pub fn candidate_probability(n_estimate: usize) -> f64 {
    let n = n_estimate.max(2) as f64;
    (CANDIDATE_FACTOR * n.ln() / n).min(1.0)
}

fn sample_candidates(g: &Graph, options: &ElectionOptions) -> Vec<NodeId> {
    let p = candidate_probability(options.n_estimate.unwrap_or(g.n()));
    g.ids()
        .iter()
        .copied()
        .filter(|&v| {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ v.wrapping_mul(0x9e37_79b9_7f4a_7c15));
            rng.gen_bool(p)
        })
        .collect()
}

/// Samples candidates, builds one shared cover, then runs every
/// candidate's BFS concurrently in a single simulation. Each node adopts
/// the largest candidate whose execution spanned it.
pub fn randomized_leader_election(
    g: &Graph,
    options: &ElectionOptions,
) -> Result<RandomizedElection, BfsError> {
    let mut candidates = match &options.forced_candidates {
        Some(c) => c.clone(),
        None => sample_candidates(g, options),
    };
    candidates.sort_unstable();
    candidates.dedup();
    if let Some(&v) = candidates.iter().find(|&&v| !g.contains(v)) {
        return Err(BfsError::UnknownRoot(v));
    }
    if candidates.is_empty() {
        return Err(BfsError::NoCandidates);
    }

    let params = CoverParams::new(cover_kappa(g.n()), COVER_W, options.seed);
    let cover = cover_construction(g, &params)?;
    let clock = PhaseClock::for_cover(&params);
    let cfg = ModeConfig::seeded(options.seed ^ 0x1eade7);
    let locals = &cover.local;
    let out = simengine::run(g, &cfg, |ctx| {
        let slot = locals
            .binary_search_by_key(&ctx.id, |(v, _)| *v)
            .expect("every node has a local view");
        let roots = if candidates.binary_search(&ctx.id).is_ok() {
            vec![ctx.id]
        } else {
            Vec::new()
        };
        BfsNode::new(clock, &locals[slot].1, &params, options.ping_policy, roots)
    })?;

    let mut metrics = cover.metrics.clone();
    metrics.absorb(&out.metrics);
    let trace_hash = cover.trace_hash ^ out.trace_hash.rotate_left(1);
    let outputs: BTreeMap<NodeId, Option<NodeId>> = out
        .into_outputs()
        .into_iter()
        .map(|(v, o)| {
            let best = o
                .execs
                .iter()
                .filter(|(_, e)| e.layer.is_some())
                .map(|(&c, _)| c)
                .max();
            (v, best)
        })
        .collect();
    let first = outputs.values().next().copied().flatten();
    let unanimous = first.is_some() && outputs.values().all(|&o| o == first);
    Ok(RandomizedElection {
        result: ElectionResult {
            leader: if unanimous { first } else { None },
            unanimous,
            candidates,
        },
        outputs,
        cover_metrics: cover.metrics,
        metrics,
        trace_hash,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{generate_graph, GraphFamily, GraphGenSpec, IdScheme};

    #[test]
    fn probability_is_capped() {
        assert_eq!(candidate_probability(8), 1.0);
        let p = candidate_probability(1024);
        assert!((p - 8.0 * 1024f64.ln() / 1024.0).abs() < 1e-12);
    }

    #[test]
    fn forced_single_candidate() {
        let g = generate_graph(&GraphGenSpec::new(GraphFamily::Grid, 36)).unwrap();
        let options = ElectionOptions {
            forced_candidates: Some(vec![14]),
            ..ElectionOptions::default()
        };
        let run = randomized_leader_election(&g, &options).unwrap();
        assert_eq!(run.result.leader, Some(14));
        assert!(run.succeeded());
    }

    #[test]
    fn two_candidates_max_wins() {
        let spec = GraphGenSpec::new(GraphFamily::ErdosRenyi { p: 0.05 }, 120)
            .with_ids(IdScheme::RandomPermutation)
            .with_seed(4);
        let g = generate_graph(&spec).unwrap();
        let (a, b) = (g.ids()[3], g.ids()[77]);
        let options = ElectionOptions {
            forced_candidates: Some(vec![a, b]),
            ..ElectionOptions::default()
        };
        let run = randomized_leader_election(&g, &options).unwrap();
        assert_eq!(run.result.leader, Some(a.max(b)));
        assert_eq!(run.result.candidates, vec![a.min(b), a.max(b)]);
    }

    #[test]
    fn zero_candidates_is_a_failure() {
        let g = generate_graph(&GraphGenSpec::new(GraphFamily::Path, 3)).unwrap();
        let options = ElectionOptions {
            forced_candidates: Some(vec![]),
            ..ElectionOptions::default()
        };
        assert_eq!(
            randomized_leader_election(&g, &options).unwrap_err(),
            BfsError::NoCandidates
        );
    }

    #[test]
    fn result_json_shape() {
        let r = ElectionResult {
            leader: Some(9),
            unanimous: true,
            candidates: vec![2, 9],
        };
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["leader"], 9);
        assert_eq!(json["unanimous"], true);
    }

    #[test]
    fn both_ping_policies_elect_the_same_leader() {
        let spec = GraphGenSpec::new(GraphFamily::Grid, 49)
            .with_ids(IdScheme::RandomPermutation)
            .with_seed(2);
        let g = generate_graph(&spec).unwrap();
        let covering = randomized_leader_election(&g, &ElectionOptions { seed: 5, ..ElectionOptions::default() }).unwrap();
        let literal = randomized_leader_election(
            &g,
            &ElectionOptions {
                seed: 5,
                ping_policy: PingPolicy::EveryCluster,
                ..ElectionOptions::default()
            },
        )
        .unwrap();
        assert!(covering.succeeded() && literal.succeeded());
        assert_eq!(covering.result, literal.result);
        assert!(covering.metrics.messages_total <= literal.metrics.messages_total);
    }
}
