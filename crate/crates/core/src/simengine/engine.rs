use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::hash::Hasher;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHasher;

use super::gossip::GossipAuditor;
use super::{Category, ModeConfig, Payload, RunMetrics, SimError, Tag, TraceEntry};
use crate::netgraph::{Graph, NodeId};

/// A node's initial KT1 knowledge: its own id and its neighbors' ids.
#[derive(Debug, Clone)]
pub struct NodeContext {
    pub id: NodeId,
    pub neighbors: Arc<[NodeId]>,
}

#[derive(Debug, Clone)]
pub struct Incoming<M> {
    pub from: NodeId,
    pub msg: M,
}

/// Per-node program.
///
/// `step` runs in every round in which the node has mail or a wake-up
/// request falls due (and in round 1 for everyone). A node that neither
/// sends nor asks to be woken sleeps until its next message arrives.
pub trait Protocol {
    type Msg: Payload;
    type Output;

    fn step(&mut self, ctx: &mut StepCtx<'_, Self::Msg>, inbox: Vec<Incoming<Self::Msg>>);

    fn finish(self) -> Self::Output;
}

pub struct StepCtx<'a, M> {
    node: &'a NodeContext,
    round: u64,
    outbox: &'a mut Vec<(NodeId, M)>,
    wake: Option<u64>,
    rng: &'a mut ChaCha8Rng,
}

impl<M> StepCtx<'_, M> {
    pub fn id(&self) -> NodeId {
        self.node.id
    }

    pub fn neighbors(&self) -> &Arc<[NodeId]> {
        &self.node.neighbors
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn send(&mut self, dst: NodeId, msg: M) {
        self.outbox.push((dst, msg));
    }

    /// Requests a step in round `r` even without mail. The earliest request
    /// made during one step wins; requests for past rounds mean "next round".
    pub fn wake_at(&mut self, r: u64) {
        let r = r.max(self.round + 1);
        self.wake = Some(self.wake.map_or(r, |w| w.min(r)));
    }

    pub fn wake_next(&mut self) {
        self.wake_at(self.round + 1);
    }

    /// Per-node stream derived from `(rng_seed, id)`.
    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        self.rng
    }
}

/// Result of one run.
#[derive(Debug)]
pub struct RunOutcome<O> {
    /// Outputs in ascending node-id order.
    pub outputs: Vec<(NodeId, O)>,
    pub metrics: RunMetrics,
    /// Last round in which any message was sent (0 if none was).
    pub last_send_round: u64,
    /// Order-sensitive fingerprint of every envelope header and digest.
    pub trace_hash: u64,
    pub trace: Option<Vec<TraceEntry>>,
    /// Distinct epochs observed per tag channel.
    pub tags: Option<BTreeMap<u64, BTreeSet<u32>>>,
    received: Vec<[u64; 4]>,
    ids: Vec<NodeId>,
}

impl<O> RunOutcome<O> {
    pub fn output(&self, id: NodeId) -> Option<&O> {
        let slot = self.ids.binary_search(&id).ok()?;
        Some(&self.outputs[slot].1)
    }

    /// Messages of `category` delivered to `id` during the run.
    pub fn received(&self, id: NodeId, category: Category) -> u64 {
        self.ids
            .binary_search(&id)
            .map_or(0, |s| self.received[s][category.index()])
    }

    pub fn into_outputs(self) -> Vec<(NodeId, O)> {
        self.outputs
    }
}

fn node_seed(seed: u64, id: NodeId) -> u64 {
    let mut h = FxHasher::default();
    h.write_u64(seed);
    h.write_u64(id);
    h.finish() ^ seed.rotate_left(17)
}

/// Executes `make(ctx)`'s program at every node until quiescence: no
/// message in flight and no pending wake-up. The reported round count
/// includes the round in which the last messages are delivered.
pub fn run<P, F>(g: &Graph, config: &ModeConfig, mut make: F) -> Result<RunOutcome<P::Output>, SimError>
where
    P: Protocol,
    F: FnMut(&NodeContext) -> P,
{
    let n = g.n();
    let ids = g.ids().to_vec();
    let contexts: Vec<NodeContext> = (0..n)
        .map(|s| NodeContext {
            id: ids[s],
            neighbors: Arc::clone(g.neighbors_at(s)),
        })
        .collect();
    let mut programs: Vec<P> = contexts.iter().map(&mut make).collect();
    let mut rngs: Vec<ChaCha8Rng> = ids
        .iter()
        .map(|&id| ChaCha8Rng::seed_from_u64(node_seed(config.rng_seed, id)))
        .collect();

    let mut metrics = RunMetrics::default();
    let mut received = vec![[0u64; 4]; n];
    let mut trace = config.record_trace.then(Vec::new);
    let mut tags = config.record_tags.then(BTreeMap::<u64, BTreeSet<u32>>::new);
    let mut auditor = config.gossip_mode.then(GossipAuditor::new);
    let mut hasher = FxHasher::default();
    let mut last_send_round = 0;

    let mut inboxes: Vec<Vec<Incoming<P::Msg>>> = (0..n).map(|_| Vec::new()).collect();
    let mut wake = vec![0u64; n];
    let mut timers: BinaryHeap<Reverse<(u64, u32)>> = BinaryHeap::new();
    let mut mark = vec![0u64; n];
    let mut scheduled: Vec<u32> = (0..n as u32).collect();
    let mut in_flight: Vec<(u32, Incoming<P::Msg>)> = Vec::new();
    let mut outbox: Vec<(NodeId, P::Msg)> = Vec::new();
    let mut round = 1u64;

    loop {
        scheduled.sort_unstable();
        for &slot in &scheduled {
            let s = slot as usize;
            let inbox = std::mem::take(&mut inboxes[s]);
            let mut ctx = StepCtx {
                node: &contexts[s],
                round,
                outbox: &mut outbox,
                wake: None,
                rng: &mut rngs[s],
            };
            programs[s].step(&mut ctx, inbox);
            let requested = ctx.wake;

            let src = ids[s];
            let nbrs = g.neighbors_at(s);
            for (dst, msg) in outbox.drain(..) {
                let pos = nbrs
                    .binary_search(&dst)
                    .map_err(|_| SimError::NonNeighbor { round, src, dst })?;
                let d = g.slot_neighbors(s)[pos];
                let category = msg.category();
                metrics.count(category);
                received[d as usize][category.index()] += 1;
                last_send_round = round;
                hasher.write_u64(round);
                hasher.write_u64(src);
                hasher.write_u64(dst);
                hasher.write_u8(category as u8);
                hasher.write_u64(msg.digest());
                let tag = msg.tag();
                let role = msg.gossip_role();
                if let (Some(map), Some(Tag { channel, epoch })) = (tags.as_mut(), tag) {
                    map.entry(channel).or_default().insert(epoch);
                }
                if let Some(a) = auditor.as_mut() {
                    a.observe(round, src, dst, role).map_err(SimError::Gossip)?;
                }
                if let Some(t) = trace.as_mut() {
                    t.push(TraceEntry {
                        round,
                        src,
                        dst,
                        category,
                        tag,
                        gossip: role,
                    });
                }
                in_flight.push((d, Incoming { from: src, msg }));
            }

            match requested {
                Some(r) => {
                    wake[s] = r;
                    timers.push(Reverse((r, slot)));
                }
                None => wake[s] = 0,
            }
        }
        scheduled.clear();

        let next = if in_flight.is_empty() {
            while let Some(&Reverse((r, s))) = timers.peek() {
                if wake[s as usize] == r {
                    break;
                }
                timers.pop();
            }
            match timers.peek() {
                Some(&Reverse((r, _))) => r,
                None => break,
            }
        } else {
            round + 1
        };
        if next > config.max_rounds {
            return Err(SimError::Timeout {
                max_rounds: config.max_rounds,
            });
        }
        round = next;

        for (d, inc) in in_flight.drain(..) {
            let s = d as usize;
            inboxes[s].push(inc);
            if mark[s] != round {
                mark[s] = round;
                scheduled.push(d);
            }
        }
        while let Some(&Reverse((r, slot))) = timers.peek() {
            if r > round {
                break;
            }
            timers.pop();
            let s = slot as usize;
            if wake[s] == r {
                wake[s] = 0;
                if mark[s] != round {
                    mark[s] = round;
                    scheduled.push(slot);
                }
            }
        }
    }

    metrics.rounds = round;
    Ok(RunOutcome {
        outputs: ids.iter().copied().zip(programs.into_iter().map(P::finish)).collect(),
        metrics,
        last_send_round,
        trace_hash: hasher.finish(),
        trace,
        tags,
        received,
        ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{generate_graph, GraphFamily, GraphGenSpec};

    #[derive(Clone)]
    struct Ping;

    impl Payload for Ping {
        fn category(&self) -> Category {
            Category::Control
        }
        fn digest(&self) -> u64 {
            1
        }
    }

    /// Sends `Ping` to every neighbor once, on first step or first receipt.
    struct Flood {
        root: bool,
        done: bool,
    }

    impl Protocol for Flood {
        type Msg = Ping;
        type Output = bool;

        fn step(&mut self, ctx: &mut StepCtx<'_, Ping>, inbox: Vec<Incoming<Ping>>) {
            if !self.done && (self.root || !inbox.is_empty()) {
                self.done = true;
                for &v in ctx.neighbors().clone().iter() {
                    ctx.send(v, Ping);
                }
            }
        }

        fn finish(self) -> bool {
            self.done
        }
    }

    struct Silent;

    impl Protocol for Silent {
        type Msg = Ping;
        type Output = ();
        fn step(&mut self, _: &mut StepCtx<'_, Ping>, _: Vec<Incoming<Ping>>) {}
        fn finish(self) {}
    }

    fn gen(family: GraphFamily, n: usize) -> Graph {
        generate_graph(&GraphGenSpec::new(family, n)).unwrap()
    }

    #[test]
    fn empty_protocol_takes_one_round() {
        let out = run(&gen(GraphFamily::Path, 5), &ModeConfig::default(), |_| Silent).unwrap();
        assert_eq!((out.metrics.rounds, out.metrics.messages_total), (1, 0));
        assert_eq!(out.last_send_round, 0);
    }

    #[test]
    fn single_edge_exchange_delivers_next_round() {
        let g = gen(GraphFamily::Path, 2);
        let out = run(&g, &ModeConfig::default(), |_| Flood { root: true, done: false }).unwrap();
        assert_eq!((out.metrics.rounds, out.metrics.messages_total), (2, 2));
        assert_eq!(out.received(1, Category::Control), 1);
    }

    #[test]
    fn flooding_k4_sends_two_per_edge() {
        let g = gen(GraphFamily::Complete, 4);
        let cfg = ModeConfig {
            record_trace: true,
            ..ModeConfig::default()
        };
        let out = run(&g, &cfg, |c| Flood { root: c.id == 1, done: false }).unwrap();
        assert_eq!(out.metrics.messages_total, 2 * g.m() as u64);
        assert_eq!(out.trace.as_ref().unwrap().len() as u64, out.metrics.messages_total);
        assert!(out.outputs.iter().all(|(_, done)| *done));
    }

    #[test]
    fn non_neighbor_send_faults() {
        struct Rogue;
        impl Protocol for Rogue {
            type Msg = Ping;
            type Output = ();
            fn step(&mut self, ctx: &mut StepCtx<'_, Ping>, _: Vec<Incoming<Ping>>) {
                if ctx.id() == 1 {
                    ctx.send(3, Ping);
                }
            }
            fn finish(self) {}
        }
        let err = run(&gen(GraphFamily::Path, 3), &ModeConfig::default(), |_| Rogue).unwrap_err();
        assert_eq!(err, SimError::NonNeighbor { round: 1, src: 1, dst: 3 });
    }

    #[test]
    fn timers_fast_forward_and_timeout() {
        struct Sleeper(u64);
        impl Protocol for Sleeper {
            type Msg = Ping;
            type Output = ();
            fn step(&mut self, ctx: &mut StepCtx<'_, Ping>, _: Vec<Incoming<Ping>>) {
                if ctx.round() < self.0 {
                    ctx.wake_at(self.0);
                }
            }
            fn finish(self) {}
        }
        let g = gen(GraphFamily::Path, 2);
        let out = run(&g, &ModeConfig::default(), |_| Sleeper(1000)).unwrap();
        assert_eq!(out.metrics.rounds, 1000);
        let cfg = ModeConfig {
            max_rounds: 10,
            ..ModeConfig::default()
        };
        assert_eq!(
            run(&g, &cfg, |_| Sleeper(1000)).unwrap_err(),
            SimError::Timeout { max_rounds: 10 }
        );
    }

    #[test]
    fn rng_streams_are_reproducible() {
        use rand::Rng;
        struct Draw(u64);
        impl Protocol for Draw {
            type Msg = Ping;
            type Output = u64;
            fn step(&mut self, ctx: &mut StepCtx<'_, Ping>, _: Vec<Incoming<Ping>>) {
                self.0 = ctx.rng().gen();
            }
            fn finish(self) -> u64 {
                self.0
            }
        }
        let g = gen(GraphFamily::Cycle, 6);
        let a = run(&g, &ModeConfig::seeded(4), |_| Draw(0)).unwrap().into_outputs();
        let b = run(&g, &ModeConfig::seeded(4), |_| Draw(0)).unwrap().into_outputs();
        let c = run(&g, &ModeConfig::seeded(5), |_| Draw(0)).unwrap().into_outputs();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a[0].1, a[1].1);
    }
}
