use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{flood_baseline_bfs, message_ratio, Algo, ExperimentConfig, HarnessError};
use crate::bfscover::{
    bfs_construction, cover_kappa, randomized_leader_election, BfsOptions, BfsTree,
    ElectionOptions, PingPolicy, COVER_W,
};
use crate::covers::{cover_construction, message_bound, verify_cover, CoverParams};
use crate::exec::ExecMode;
use crate::gossipspanner::{
    canonical_mst, deterministic_bfs, deterministic_leader_election, global_pipeline,
    haeupler_local_broadcast, iteration_budget, GlobalProblem, LocalBroadcastRun,
    DET_ELECTION_CONSTANT,
};
use crate::netgraph::{diameter, generate_graph, log2_ceil, Graph, GraphGenSpec, NodeId};
use crate::simengine::{Category, RunMetrics};

/// Named pass/fail checks of one trial; failures carry diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub checks: BTreeMap<String, bool>,
    pub diagnostics: Vec<String>,
}

impl Verdict {
    fn check(&mut self, name: &str, ok: bool, detail: impl FnOnce() -> String) {
        self.checks.insert(name.to_string(), ok);
        if !ok {
            self.diagnostics.push(format!("{name}: {}", detail()));
        }
    }

    fn fail(&mut self, name: &str, detail: String) {
        self.check(name, false, || detail);
    }

    fn tree(&mut self, tree: &BfsTree, g: &Graph) {
        let res = tree.verify(g);
        self.check("bfs_exact", res.is_ok(), || res.unwrap_err());
    }

    fn finish(mut self) -> Self {
        self.pass = !self.checks.is_empty() && self.checks.values().all(|&ok| ok);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub algo: Algo,
    pub seed: u64,
    pub graph: GraphGenSpec,
    pub n: usize,
    pub m: usize,
    pub diameter: u32,
    pub metrics: RunMetrics,
    /// `messages / (n · ⌈log₂ n⌉^k)` for the algorithm's `k`.
    pub message_ratio: Option<f64>,
    /// `rounds` over the algorithm's advertised round shape.
    pub round_ratio: f64,
    pub trace_hash: u64,
    pub verdict: Verdict,
    /// Algorithm-specific measurements (spanner size, candidates, ...).
    pub extra: BTreeMap<String, f64>,
    /// Full outputs, when requested.
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub output: Value,
}

fn root_of(cfg: &ExperimentConfig, g: &Graph) -> NodeId {
    cfg.root.filter(|&r| g.contains(r)).unwrap_or(g.ids()[0])
}

fn spanner_checks(v: &mut Verdict, extra: &mut BTreeMap<String, f64>, g: &Graph, run: &LocalBroadcastRun) {
    let n = g.n();
    let l = log2_ceil(n) as usize;
    let h = &run.spanner;
    v.check("gossip_complete", run.complete, || "some neighbor rumor missing".into());
    v.check("iteration_budget", h.iterations <= iteration_budget(n), || {
        format!("I = {} > {}", h.iterations, iteration_budget(n))
    });
    v.check("spanner_size", h.size() <= (2 * n * l).max(n - 1) && h.size() <= n * h.iterations as usize, || {
        format!("|E(H)| = {}", h.size())
    });
    match h.max_stretch(g, ExecMode::Sequential) {
        Ok(s) => {
            extra.insert("max_stretch".into(), f64::from(s));
            v.check("stretch", s <= 4 * h.iterations, || format!("stretch {s} > 4·{}", h.iterations));
        }
        Err(e) => v.fail("stretch", e.to_string()),
    }
    extra.insert("spanner_edges".into(), h.size() as f64);
    extra.insert("iterations".into(), f64::from(h.iterations));
    extra.insert("gossip_rounds".into(), run.gossip_rounds as f64);
}

/// Runs and verifies one trial of `cfg` with `seed`.
pub fn run_trial(cfg: &ExperimentConfig, seed: u64) -> Result<TrialRecord, HarnessError> {
    let spec = cfg.graph_for(seed);
    let g = generate_graph(&spec)?;
    let n = g.n();
    let root = root_of(cfg, &g);
    let mut v = Verdict::default();
    let mut extra = BTreeMap::new();
    let mut output = Value::Null;
    let mut metrics = RunMetrics::default();
    let mut trace_hash = 0;

    match cfg.algo {
        Algo::BfsCover => {
            let options = BfsOptions {
                seed,
                ping_policy: cfg.ping_policy.unwrap_or_default(),
                record_activity: true,
            };
            match bfs_construction(&g, root, &options) {
                Ok(run) => {
                    v.tree(&run.tree, &g);
                    let bad: Vec<_> = run
                        .explore_receipts
                        .iter()
                        .filter(|(&u, &k)| k != u64::from(u != root))
                        .collect();
                    v.check("one_join", bad.is_empty(), || format!("receipts {bad:?}"));
                    let bound = 4 * cover_kappa(n) * COVER_W + 1;
                    let busiest = run.cluster_activity.values().copied().max().unwrap_or(0);
                    v.check("cluster_activity", busiest as u32 <= bound, || {
                        format!("{busiest} active phases > {bound}")
                    });
                    v.check("halted", run.all_halted, || "termination not reached".into());
                    extra.insert("cover_messages".into(), run.cover.metrics.messages_total as f64);
                    extra.insert("max_cluster_phases".into(), busiest as f64);
                    metrics = run.metrics.clone();
                    trace_hash = run.trace_hash;
                    output = json!({ "tree": run.tree });
                }
                Err(e) => v.fail("run", e.to_string()),
            }
        }
        Algo::BfsSpanner => match deterministic_bfs(&g, root) {
            Ok(run) => {
                v.tree(run.tree(), &g);
                spanner_checks(&mut v, &mut extra, &g, &run.gossip);
                let e_h = run.gossip.spanner.size() as u64;
                v.check("flood_on_h", run.bfs.flood_messages <= 2 * e_h, || {
                    format!("{} flood messages > 2·{e_h}", run.bfs.flood_messages)
                });
                metrics = run.metrics.clone();
                trace_hash = run.trace_hash;
                output = json!({ "tree": run.bfs.tree });
            }
            Err(e) => v.fail("run", e.to_string()),
        },
        Algo::LeRand => {
            let options = ElectionOptions {
                seed,
                n_estimate: cfg.n_estimate,
                forced_candidates: None,
                ping_policy: cfg.ping_policy.unwrap_or(PingPolicy::CoveringCluster),
            };
            match randomized_leader_election(&g, &options) {
                Ok(run) => {
                    v.check("unanimous_max_candidate", run.succeeded(), || {
                        format!("outputs disagree or miss the largest candidate: {:?}", run.result)
                    });
                    extra.insert("candidates".into(), run.result.candidates.len() as f64);
                    metrics = run.metrics.clone();
                    trace_hash = run.trace_hash;
                    output = json!({ "election": run.result });
                }
                Err(e) => v.fail("unanimous_max_candidate", e.to_string()),
            }
        }
        Algo::LeDet => match deterministic_leader_election(&g) {
            Ok(run) => {
                let max = g.ids().iter().copied().max();
                v.check("unanimous_max_id", run.leader() == max, || {
                    format!("leader {:?}, max id {max:?}", run.leader())
                });
                spanner_checks(&mut v, &mut extra, &g, &run.gossip);
                let stage = run.election.metrics.messages_total as f64;
                let bound = DET_ELECTION_CONSTANT
                    * run.gossip.spanner.size() as f64
                    * f64::from(log2_ceil(n).max(1));
                v.check("election_messages", stage <= bound, || format!("{stage} > {bound:.0}"));
                extra.insert("election_messages".into(), stage);
                metrics = run.metrics.clone();
                trace_hash = run.trace_hash;
                output = json!({ "leader": run.leader() });
            }
            Err(e) => v.fail("run", e.to_string()),
        },
        Algo::CoverOnly => {
            let params = CoverParams::new(cover_kappa(n), COVER_W, seed);
            match cover_construction(&g, &params) {
                Ok(run) => {
                    let report = verify_cover(&run.cover, &g);
                    v.check("depth", report.depth_ok, || format!("max depth {}", report.max_depth));
                    v.check("neighborhood", report.neighborhood_ok, || {
                        format!("uncovered {:?}", report.uncovered)
                    });
                    v.check("sparsity", report.sparsity_ok, || {
                        format!("membership {} > {:.1}", report.max_membership, report.membership_bound)
                    });
                    let mb = message_bound(n, params.kappa, params.w);
                    let sent = run.metrics.messages_total as f64;
                    v.check("cover_messages", sent <= mb, || format!("{sent} > {mb:.0}"));
                    extra.insert("clusters".into(), run.cover.clusters.len() as f64);
                    extra.insert("max_membership".into(), report.max_membership as f64);
                    metrics = run.metrics.clone();
                    trace_hash = run.trace_hash;
                    output = json!({ "report": report });
                }
                Err(e) => v.fail("run", e.to_string()),
            }
        }
        Algo::SpannerOnly => match haeupler_local_broadcast(&g) {
            Ok(run) => {
                spanner_checks(&mut v, &mut extra, &g, &run);
                metrics = run.metrics.clone();
                trace_hash = run.trace_hash;
                output = json!({ "spanner": run.spanner });
            }
            Err(e) => v.fail("run", e.to_string()),
        },
        Algo::GlobalMst => match global_pipeline(&g, GlobalProblem::Mst) {
            Ok(pipeline) => {
                let (leader, run) = (pipeline.leader, &pipeline.run);
                let oracle = canonical_mst(&g.edges().collect());
                v.check("mst_matches_oracle", run.solution == oracle, || "solution differs".into());
                let n1 = n as u64 - 1;
                v.check("collect_messages", run.convergecast_messages <= n1, || {
                    format!("{} > {n1}", run.convergecast_messages)
                });
                v.check("broadcast_messages", run.broadcast_messages <= n1, || {
                    format!("{} > {n1}", run.broadcast_messages)
                });
                extra.insert("leader".into(), leader as f64);
                metrics = pipeline.metrics.clone();
                trace_hash = pipeline.trace_hash;
                output = json!({ "leader": leader, "mst": run.solution });
            }
            Err(e) => v.fail("run", e.to_string()),
        },
        Algo::FloodBaseline => match flood_baseline_bfs(&g, root) {
            Ok(run) => {
                v.tree(&run.tree, &g);
                let two_m = 2 * g.m() as u64;
                v.check("two_per_edge", run.metrics.messages_total == two_m, || {
                    format!("{} != {two_m}", run.metrics.messages_total)
                });
                metrics = run.metrics.clone();
                trace_hash = run.trace_hash;
                output = json!({ "tree": run.tree });
            }
            Err(e) => v.fail("run", e.to_string()),
        },
    }

    let d = diameter(&g);
    extra.insert(
        "exploration_messages".into(),
        metrics.messages(Category::Exploration) as f64,
    );
    Ok(TrialRecord {
        algo: cfg.algo,
        seed,
        graph: spec,
        n,
        m: g.m(),
        diameter: d,
        message_ratio: cfg
            .algo
            .message_exponent()
            .map(|k| message_ratio(metrics.messages_total, n, k)),
        round_ratio: metrics.rounds as f64 / cfg.algo.round_scale(n, d),
        metrics,
        trace_hash,
        verdict: v.finish(),
        extra,
        output: if cfg.include_outputs { output } else { Value::Null },
    })
}
