//! Synchronous bandwidth-limited round engine.
//!
//! A round calls the handler once per active node. Messages queued in round r
//! become visible in round r+1. Each directed edge carries at most `budget`
//! bits per round; in strict mode exceeding it is an error, otherwise it is
//! only recorded.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetConfig {
    /// Budget constant: B = ceil(c_b * log2 n).
    pub c_b: f64,
    pub strict: bool,
    pub seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig { c_b: 4.0, strict: true, seed: 0 }
    }
}

pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// Bit widths of the message field kinds for a given graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Widths {
    pub color: u32,
    pub id: u32,
    pub count: u32,
}

impl Widths {
    pub fn for_graph(n: usize, delta: usize) -> Self {
        Widths {
            color: ceil_log2(delta as u64 + 2).max(1),
            id: ceil_log2(n as u64).max(1),
            count: ceil_log2(delta as u64 + 1).max(1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Color(u32),
    Id(NodeId),
    Count(u32),
    Bit(bool),
    /// Free-form value charged at an explicit width.
    Word { value: u64, bits: u8 },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Msg(pub SmallVec<[Field; 3]>);

impl Msg {
    pub fn new() -> Self {
        Msg(SmallVec::new())
    }

    pub fn one(f: Field) -> Self {
        let mut m = Msg::new();
        m.0.push(f);
        m
    }

    pub fn with(mut self, f: Field) -> Self {
        self.0.push(f);
        self
    }

    pub fn bits(&self, w: &Widths) -> u32 {
        self.0
            .iter()
            .map(|f| match f {
                Field::Color(_) => w.color,
                Field::Id(_) => w.id,
                Field::Count(_) => w.count,
                Field::Bit(_) => 1,
                Field::Word { bits, .. } => *bits as u32,
            })
            .sum()
    }

    pub fn color(&self, i: usize) -> Option<u32> {
        match self.0.get(i) {
            Some(Field::Color(c)) => Some(*c),
            _ => None,
        }
    }

    pub fn id(&self, i: usize) -> Option<NodeId> {
        match self.0.get(i) {
            Some(Field::Id(c)) => Some(*c),
            _ => None,
        }
    }

    pub fn count(&self, i: usize) -> Option<u32> {
        match self.0.get(i) {
            Some(Field::Count(c)) => Some(*c),
            _ => None,
        }
    }

    pub fn bit(&self, i: usize) -> Option<bool> {
        match self.0.get(i) {
            Some(Field::Bit(b)) => Some(*b),
            _ => None,
        }
    }

    pub fn word(&self, i: usize) -> Option<u64> {
        match self.0.get(i) {
            Some(Field::Word { value, .. }) => Some(*value),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Default)]
struct Outbox {
    broadcast: Vec<Msg>,
    direct: Vec<(NodeId, Msg)>,
}

/// The view a handler gets of its node: its id, neighbors, inbox, randomness
/// and outbox. Nothing else is reachable from here.
pub struct NodeCtx<'a> {
    id: NodeId,
    round: u64,
    seed: u64,
    neighbors: &'a [NodeId],
    prev: &'a [Outbox],
    direct_in: &'a [(NodeId, Msg)],
    rng: Option<ChaCha8Rng>,
    out: Outbox,
    bad_dest: Option<NodeId>,
}

impl<'a> NodeCtx<'a> {
    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn neighbors(&self) -> &'a [NodeId] {
        self.neighbors
    }

    /// Messages delivered this round: broadcasts from neighbors, then direct sends.
    pub fn inbox(&self) -> impl Iterator<Item = (NodeId, &'a Msg)> + '_ {
        let prev = self.prev;
        self.neighbors
            .iter()
            .flat_map(move |&w| prev[w as usize].broadcast.iter().map(move |m| (w, m)))
            .chain(self.direct_in.iter().map(|(f, m)| (*f, m)))
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        let (seed, id, round) = (self.seed, self.id, self.round);
        self.rng.get_or_insert_with(|| rng::node_stream(seed, id, round))
    }

    pub fn broadcast(&mut self, m: Msg) {
        self.out.broadcast.push(m);
    }

    pub fn send(&mut self, to: NodeId, m: Msg) {
        if self.neighbors.binary_search(&to).is_err() {
            self.bad_dest.get_or_insert(to);
            return;
        }
        self.out.direct.push((to, m));
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BandwidthReport {
    pub budget: u32,
    pub max_bits: u32,
    pub total_rounds: u64,
    pub per_phase: BTreeMap<String, u64>,
    pub messages: u64,
    pub total_bits: u64,
    /// Edge-rounds that exceeded the budget (only possible outside strict mode).
    pub overruns: u64,
}

pub struct Network<'g> {
    g: &'g Graph,
    cfg: NetConfig,
    widths: Widths,
    budget: u32,
    round: u64,
    phase: String,
    prev: Vec<Outbox>,
    direct_in: Vec<Vec<(NodeId, Msg)>>,
    report: BandwidthReport,
}

impl<'g> Network<'g> {
    pub fn new(g: &'g Graph, cfg: NetConfig) -> Self {
        let budget = (cfg.c_b * (g.n().max(2) as f64).log2()).ceil() as u32;
        Network {
            g,
            widths: Widths::for_graph(g.n(), g.delta()),
            budget,
            round: 0,
            phase: "init".into(),
            prev: vec![Outbox::default(); g.n()],
            direct_in: vec![Vec::new(); g.n()],
            report: BandwidthReport { budget, ..Default::default() },
            cfg,
        }
    }

    pub fn graph(&self) -> &'g Graph {
        self.g
    }

    pub fn widths(&self) -> Widths {
        self.widths
    }

    pub fn budget(&self) -> u32 {
        self.budget
    }

    pub fn seed(&self) -> u64 {
        self.cfg.seed
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn set_phase(&mut self, phase: &str) {
        self.phase = phase.to_string();
    }

    pub fn phase(&self) -> &str {
        &self.phase
    }

    pub fn audit(&self) -> BandwidthReport {
        self.report.clone()
    }

    /// Charges rounds whose traffic was accounted elsewhere.
    pub fn charge(&mut self, rounds: u64, bits: u32) -> Result<()> {
        self.note_bits((0, 0), bits)?;
        self.round += rounds;
        self.report.total_rounds += rounds;
        *self.report.per_phase.entry(self.phase.clone()).or_insert(0) += rounds;
        Ok(())
    }

    /// Runs `f` once per item as if all ran side by side: the round counter
    /// advances by the longest branch, not the sum. Branches should touch
    /// disjoint node sets.
    pub fn in_parallel<I, T>(&mut self, items: impl IntoIterator<Item = I>, mut f: impl FnMut(&mut Self, I) -> Result<T>) -> Result<Vec<T>> {
        let start = self.round;
        let total = self.report.total_rounds;
        let phase_start = self.report.per_phase.get(&self.phase).copied().unwrap_or(0);
        let mut longest = 0;
        let mut out = Vec::new();
        for item in items {
            out.push(f(self, item)?);
            longest = longest.max(self.round - start);
            self.round = start;
            self.report.total_rounds = total;
            self.report.per_phase.insert(self.phase.clone(), phase_start);
        }
        self.round += longest;
        self.report.total_rounds += longest;
        *self.report.per_phase.entry(self.phase.clone()).or_insert(0) += longest;
        Ok(out)
    }

    fn note_bits(&mut self, edge: (NodeId, NodeId), bits: u32) -> Result<()> {
        if bits > self.budget {
            if self.cfg.strict {
                return Err(Error::BudgetExceeded { edge, bits, budget: self.budget });
            }
            self.report.overruns += 1;
        }
        self.report.max_bits = self.report.max_bits.max(bits);
        Ok(())
    }

    /// Runs one synchronous round over all nodes.
    pub fn run_round<S>(&mut self, states: &mut [S], handler: impl Fn(&mut NodeCtx, &mut S)) -> Result<()> {
        let all: Vec<NodeId> = self.g.nodes().collect();
        self.run_round_on(&all, states, handler)
    }

    /// Runs one synchronous round in which only `active` nodes execute. Inactive
    /// nodes still receive, and their mail is dropped unless read next round.
    pub fn run_round_on<S>(&mut self, active: &[NodeId], states: &mut [S], handler: impl Fn(&mut NodeCtx, &mut S)) -> Result<()> {
        assert_eq!(states.len(), self.g.n());
        let mut outs: Vec<(NodeId, Outbox)> = Vec::with_capacity(active.len());
        for &v in active {
            let mut ctx = NodeCtx {
                id: v,
                round: self.round,
                seed: self.cfg.seed,
                neighbors: self.g.neighbors(v),
                prev: &self.prev,
                direct_in: &self.direct_in[v as usize],
                rng: None,
                out: Outbox::default(),
                bad_dest: None,
            };
            handler(&mut ctx, &mut states[v as usize]);
            if let Some(to) = ctx.bad_dest {
                return Err(Error::NotNeighbor { from: v, to });
            }
            if !ctx.out.broadcast.is_empty() || !ctx.out.direct.is_empty() {
                outs.push((v, ctx.out));
            }
        }
        // Barrier: audit, then swap mailboxes.
        for o in &mut self.prev {
            o.broadcast.clear();
        }
        for d in &mut self.direct_in {
            d.clear();
        }
        let w = self.widths;
        for (v, out) in outs {
            let b: u32 = out.broadcast.iter().map(|m| m.bits(&w)).sum();
            let deg = self.g.degree(v) as u64;
            if b > 0 {
                self.report.total_bits += b as u64 * deg;
                self.report.messages += out.broadcast.len() as u64 * deg;
            }
            let mut per: BTreeMap<NodeId, u32> = BTreeMap::new();
            for (to, m) in &out.direct {
                *per.entry(*to).or_insert(0) += m.bits(&w);
                self.report.total_bits += m.bits(&w) as u64;
                self.report.messages += 1;
            }
            let mut worst = (b, self.g.neighbors(v).first().copied().unwrap_or(v));
            for (&to, &bits) in &per {
                if b + bits > worst.0 {
                    worst = (b + bits, to);
                }
            }
            if worst.0 > 0 {
                self.note_bits((v, worst.1), worst.0)?;
            }
            for (to, m) in out.direct {
                self.direct_in[to as usize].push((v, m));
            }
            self.prev[v as usize].broadcast = out.broadcast;
        }
        self.round += 1;
        self.report.total_rounds += 1;
        *self.report.per_phase.entry(self.phase.clone()).or_insert(0) += 1;
        Ok(())
    }

    /// Direct messages waiting for `v` in the next round.
    pub fn peek_direct(&self, v: NodeId) -> &[(NodeId, Msg)] {
        &self.direct_in[v as usize]
    }

    /// Drops all undelivered mail, so a new protocol starts from a clean slate.
    pub fn flush(&mut self) {
        for o in &mut self.prev {
            o.broadcast.clear();
        }
        for d in &mut self.direct_in {
            d.clear();
        }
    }

    /// Aggregates values held by the members of `ac` at `leader` along a BFS
    /// tree of G[ac] (members unreachable inside the AC hang off a one-hop
    /// outside relay). Min, max and sum combine at every hop; union forwards
    /// distinct items, at most floor(B / width) per edge per round. Returns the
    /// aggregate and the rounds consumed.
    pub fn clique_aggregate(&mut self, ac: &[NodeId], leader: NodeId, values: &[(NodeId, Vec<u64>)], op: Aggregate, width: u32) -> Result<(Vec<u64>, u64)> {
        if width > self.budget {
            return Err(Error::BudgetExceeded { edge: (leader, leader), bits: width, budget: self.budget });
        }
        let parent = self.tree(ac, leader)?;
        let depth_of = |mut v: NodeId| {
            let mut d = 0u32;
            while v != leader {
                v = parent[&v];
                d += 1;
            }
            d
        };
        let mut pending: BTreeMap<NodeId, Vec<u64>> = BTreeMap::new();
        for (v, vals) in values {
            pending.entry(*v).or_default().extend(vals.iter().copied());
        }
        let rounds;
        match op {
            Aggregate::Min | Aggregate::Max | Aggregate::Sum => {
                let fold = |a: u64, b: u64| match op {
                    Aggregate::Min => a.min(b),
                    Aggregate::Max => a.max(b),
                    _ => a + b,
                };
                let mut acc: BTreeMap<NodeId, u64> = BTreeMap::new();
                for (v, vals) in &pending {
                    if let Some(x) = vals.iter().copied().reduce(fold) {
                        acc.insert(*v, x);
                    }
                }
                let maxd = acc.keys().map(|&v| depth_of(v)).max().unwrap_or(0);
                // Deepest level first: each node folds its children and forwards.
                for d in (1..=maxd).rev() {
                    let level: Vec<NodeId> = acc.keys().copied().filter(|&v| depth_of(v) == d).collect();
                    for v in level {
                        let x = acc.remove(&v).unwrap();
                        let bits = if op == Aggregate::Sum { ceil_log2(x + 1).max(width) } else { width };
                        self.note_bits((v, parent[&v]), bits)?;
                        let p = parent[&v];
                        let y = acc.get(&p).map_or(x, |&y| fold(x, y));
                        acc.insert(p, y);
                    }
                }
                rounds = maxd as u64;
                let out = acc.get(&leader).map(|&x| vec![x]).unwrap_or_default();
                self.report.total_bits += width as u64 * values.len() as u64;
                self.charge(rounds, 0)?;
                return Ok((out, rounds));
            }
            Aggregate::Union => {
                let k = (self.budget / width.max(1)).max(1) as usize;
                let mut queue: BTreeMap<NodeId, std::collections::BTreeSet<u64>> = BTreeMap::new();
                let mut seen: BTreeMap<NodeId, std::collections::BTreeSet<u64>> = BTreeMap::new();
                let mut got = std::collections::BTreeSet::new();
                for (v, vals) in pending {
                    if v == leader {
                        got.extend(vals);
                    } else {
                        seen.entry(v).or_default().extend(vals.iter().copied());
                        queue.entry(v).or_default().extend(vals);
                    }
                }
                let mut r = 0u64;
                while queue.values().any(|q| !q.is_empty()) {
                    r += 1;
                    let mut moves: Vec<(NodeId, Vec<u64>)> = Vec::new();
                    for (&v, q) in queue.iter_mut() {
                        let batch: Vec<u64> = q.iter().copied().take(k).collect();
                        for x in &batch {
                            q.remove(x);
                        }
                        if !batch.is_empty() {
                            self.report.max_bits = self.report.max_bits.max(batch.len() as u32 * width);
                            self.report.total_bits += (batch.len() as u32 * width) as u64;
                            moves.push((v, batch));
                        }
                    }
                    for (v, batch) in moves {
                        let p = parent[&v];
                        for x in batch {
                            if p == leader {
                                got.insert(x);
                            } else if seen.entry(p).or_default().insert(x) {
                                queue.entry(p).or_default().insert(x);
                            }
                        }
                    }
                }
                rounds = r;
                self.charge(rounds, 0)?;
                Ok((got.into_iter().collect(), rounds))
            }
        }
    }

    /// Parent pointers of a BFS tree rooted at `leader` spanning `ac`.
    fn tree(&self, ac: &[NodeId], leader: NodeId) -> Result<BTreeMap<NodeId, NodeId>> {
        let g = self.g;
        let inside: std::collections::BTreeSet<NodeId> = ac.iter().copied().collect();
        let mut parent = BTreeMap::new();
        parent.insert(leader, leader);
        let mut frontier = vec![leader];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for &v in &frontier {
                for &w in g.neighbors(v) {
                    if inside.contains(&w) && !parent.contains_key(&w) {
                        parent.insert(w, v);
                        next.push(w);
                    }
                }
            }
            frontier = next;
        }
        // Stragglers: attach through any outside neighbor adjacent to the tree.
        for &v in ac {
            if parent.contains_key(&v) {
                continue;
            }
            let relay = g.neighbors(v).iter().copied().find(|&w| g.neighbors(w).iter().any(|x| parent.contains_key(x) && inside.contains(x)));
            match relay {
                Some(w) => {
                    let up = *g.neighbors(w).iter().find(|x| parent.contains_key(x) && inside.contains(x)).unwrap();
                    parent.entry(w).or_insert(up);
                    parent.insert(v, w);
                }
                None => return Err(Error::Structural(format!("node {v} is more than one outside hop from the AC tree"))),
            }
        }
        Ok(parent)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Aggregate {
    Min,
    Max,
    Sum,
    Union,
}
