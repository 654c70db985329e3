//! Partial colorings, palettes, slack generation, the deg+1-list color trial
//! solver, graytone coloring and same-coloring of node pairs.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use serde::Serialize;

use crate::colorset::ColorSet;
use crate::congest::{Field, Msg, Network};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

/// Colors are `1..=Delta`; 0 means uncolored.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ColoringState {
    pub delta: u32,
    pub colors: Vec<u32>,
}

impl ColoringState {
    pub fn new(g: &Graph) -> Self {
        ColoringState { delta: g.delta() as u32, colors: vec![0; g.n()] }
    }

    pub fn color(&self, v: NodeId) -> u32 {
        self.colors[v as usize]
    }

    pub fn is_colored(&self, v: NodeId) -> bool {
        self.colors[v as usize] != 0
    }

    /// Psi(v): colors of `1..=Delta` not used by colored neighbors.
    pub fn palette(&self, g: &Graph, v: NodeId) -> ColorSet {
        let mut p = ColorSet::full(self.delta);
        for &w in g.neighbors(v) {
            p.remove(self.colors[w as usize]);
        }
        p
    }

    pub fn assign(&mut self, g: &Graph, v: NodeId, c: u32) -> Result<()> {
        if c == 0 || c > self.delta {
            return Err(Error::Structural(format!("color {c} out of range for node {v}")));
        }
        if let Some(&w) = g.neighbors(v).iter().find(|&&w| self.colors[w as usize] == c) {
            return Err(Error::Structural(format!("nodes {v} and {w} would share color {c}")));
        }
        self.colors[v as usize] = c;
        Ok(())
    }

    pub fn uncolored(&self) -> Vec<NodeId> {
        (0..self.colors.len() as NodeId).filter(|&v| !self.is_colored(v)).collect()
    }

    /// Uncolored neighbors of `v` inside `mask`.
    pub fn uncolored_degree(&self, g: &Graph, v: NodeId, mask: &[bool]) -> usize {
        g.neighbors(v).iter().filter(|&&w| mask[w as usize] && !self.is_colored(w)).count()
    }

    /// |Psi(v)| minus the uncolored neighbors in `mask`.
    pub fn slack(&self, g: &Graph, v: NodeId, mask: &[bool]) -> i64 {
        self.palette(g, v).len() as i64 - self.uncolored_degree(g, v, mask) as i64
    }

    /// Partial properness: no edge with both ends sharing a color.
    pub fn check_partial(&self, g: &Graph) -> Result<()> {
        for (u, v) in g.edges() {
            let c = self.colors[u as usize];
            if c != 0 && c == self.colors[v as usize] {
                return Err(Error::Structural(format!("edge ({u}, {v}) monochromatic with color {c}")));
            }
        }
        Ok(())
    }
}

pub fn mask_of(n: usize, set: &[NodeId]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &v in set {
        m[v as usize] = true;
    }
    m
}

#[derive(Clone, Debug, Default)]
struct TrialState {
    active: bool,
    tried: u32,
    kept: bool,
}

/// One trial of random colors: each node of `s` is active with probability
/// `activation` and tries a uniform color of `1..=chi`; it keeps the color iff
/// no neighbor tried the same one and no colored neighbor holds it. Two rounds.
/// Returns the nodes that kept a color.
pub fn slack_generation(net: &mut Network, st: &mut ColoringState, s: &[NodeId], chi: u32, activation: f64) -> Result<Vec<NodeId>> {
    let g = net.graph();
    let chi = chi.clamp(1, st.delta);
    let mut ts: Vec<TrialState> = vec![TrialState::default(); g.n()];
    net.flush();
    net.run_round_on(s, &mut ts, |ctx, t| {
        if ctx.rng().gen_bool(activation.clamp(0.0, 1.0)) {
            t.active = true;
            t.tried = ctx.rng().gen_range(1..=chi);
            ctx.broadcast(Msg::one(Field::Color(t.tried)));
        }
    })?;
    let colors = &st.colors;
    net.run_round_on(s, &mut ts, |ctx, t| {
        if !t.active {
            return;
        }
        let clash = ctx.inbox().any(|(_, m)| m.color(0) == Some(t.tried));
        let held = ctx.neighbors().iter().any(|&w| colors[w as usize] == t.tried);
        if !clash && !held {
            t.kept = true;
            ctx.broadcast(Msg::one(Field::Color(t.tried)));
        }
    })?;
    let mut kept = Vec::new();
    for &v in s {
        let t = &ts[v as usize];
        if t.kept {
            st.assign(g, v, t.tried)?;
            kept.push(v);
        }
    }
    Ok(kept)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct D1lcStats {
    pub instances: u64,
    pub nodes: u64,
    pub iterations: u64,
    pub max_iterations: u64,
}

impl D1lcStats {
    pub fn add(&mut self, o: &D1lcStats) {
        self.instances += o.instances;
        self.nodes += o.nodes;
        self.iterations += o.iterations;
        self.max_iterations = self.max_iterations.max(o.max_iterations);
    }
}

#[derive(Clone, Debug, Default)]
struct D1State {
    list: Option<ColorSet>,
    tried: u32,
    done: bool,
}

pub fn d1lc_cap(n: usize) -> u64 {
    200 + 40 * (n.max(2) as f64).log2().ceil() as u64
}

/// Colors every node of `h` (uncolored) from its list by repeated random
/// color trials. Lists default to palettes and are always intersected with
/// them. Requires |list(v)| >= deg_h(v) + 1. Output is re-verified.
pub fn solve_d1lc(net: &mut Network, st: &mut ColoringState, h: &[NodeId], lists: Option<Vec<ColorSet>>) -> Result<D1lcStats> {
    let g = net.graph();
    let mask = mask_of(g.n(), h);
    let mut ds: Vec<D1State> = vec![D1State::default(); g.n()];
    for (k, &v) in h.iter().enumerate() {
        if st.is_colored(v) {
            return Err(Error::Structural(format!("d1LC input node {v} already colored")));
        }
        let mut l = st.palette(g, v);
        if let Some(ls) = &lists {
            l = l.intersect(&ls[k]);
        }
        if l.len() < st.uncolored_degree(g, v, &mask) + 1 {
            return Err(Error::NotD1lc(v));
        }
        ds[v as usize].list = Some(l);
    }
    let mut stats = D1lcStats { instances: 1, nodes: h.len() as u64, ..Default::default() };
    if h.is_empty() {
        return Ok(stats);
    }
    let cap = d1lc_cap(g.n());
    net.flush();
    let mut remaining: Vec<NodeId> = h.to_vec();
    while !remaining.is_empty() {
        if stats.iterations >= cap {
            return Err(Error::D1lcStalled(cap as usize));
        }
        stats.iterations += 1;
        // Prune by last round's announcements, then try.
        net.run_round_on(h, &mut ds, |ctx, s| {
            let kept: Vec<u32> = ctx.inbox().filter(|(_, m)| m.bit(1) == Some(true)).filter_map(|(_, m)| m.color(0)).collect();
            let l = s.list.as_mut().unwrap();
            for c in kept {
                l.remove(c);
            }
            if !s.done {
                s.tried = l.sample(ctx.rng()).expect("list non-empty by the deg+1 condition");
                ctx.broadcast(Msg::one(Field::Color(s.tried)).with(Field::Bit(false)));
            }
        })?;
        net.run_round_on(&remaining, &mut ds, |ctx, s| {
            let clash = ctx.inbox().any(|(_, m)| m.bit(1) == Some(false) && m.color(0) == Some(s.tried));
            if !clash {
                s.done = true;
                ctx.broadcast(Msg::one(Field::Color(s.tried)).with(Field::Bit(true)));
            }
        })?;
        let mut next = Vec::with_capacity(remaining.len());
        for &v in &remaining {
            let s = &ds[v as usize];
            if s.done {
                st.assign(g, v, s.tried)?;
            } else {
                next.push(v);
            }
        }
        remaining = next;
    }
    stats.max_iterations = stats.iterations;
    for &v in h {
        if !st.is_colored(v) || !g.neighbors(v).iter().all(|&w| st.color(w) != st.color(v)) {
            return Err(Error::Structural(format!("d1LC output invalid at node {v}")));
        }
    }
    Ok(stats)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Tone {
    Gray,
    Grayish,
    None,
}

/// Gray: unit slack in G[set] (an uncolored neighbor outside `set` is colored
/// later and counts as slack). Grayish: not gray, with a gray neighbor in `set`.
pub fn tones(g: &Graph, st: &ColoringState, set: &[NodeId]) -> Vec<Tone> {
    let mask = mask_of(g.n(), set);
    let gray: Vec<bool> = set.iter().map(|&v| st.slack(g, v, &mask) >= 1).collect();
    let mut is_gray = vec![false; g.n()];
    for (k, &v) in set.iter().enumerate() {
        is_gray[v as usize] = gray[k];
    }
    set.iter()
        .enumerate()
        .map(|(k, &v)| {
            if gray[k] {
                Tone::Gray
            } else if g.neighbors(v).iter().any(|&w| is_gray[w as usize]) {
                Tone::Grayish
            } else {
                Tone::None
            }
        })
        .collect()
}

/// Two d1LC instances: grayish nodes first, then gray ones.
pub fn graytone_color(net: &mut Network, st: &mut ColoringState, set: &[NodeId]) -> Result<D1lcStats> {
    let g = net.graph();
    let set: Vec<NodeId> = set.iter().copied().filter(|&v| !st.is_colored(v)).collect();
    let t = tones(g, st, &set);
    if let Some(k) = t.iter().position(|&x| x == Tone::None) {
        return Err(Error::NotGraytone(set[k]));
    }
    // One round to learn the tones of neighbors.
    net.charge(1, 1)?;
    let grayish: Vec<NodeId> = set.iter().zip(&t).filter(|(_, &x)| x == Tone::Grayish).map(|(&v, _)| v).collect();
    let gray: Vec<NodeId> = set.iter().zip(&t).filter(|(_, &x)| x == Tone::Gray).map(|(&v, _)| v).collect();
    let mut stats = solve_d1lc(net, st, &grayish, None)?;
    stats.add(&solve_d1lc(net, st, &gray, None)?);
    Ok(stats)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LayerStats {
    pub layers: usize,
    pub roots: usize,
    pub d1lc: D1lcStats,
}

/// Escalation beyond graytone: BFS layers inside `set` from its gray nodes,
/// colored farthest layer first, so every non-root keeps an uncolored
/// neighbor one layer closer. Fails with NotGraytone on a node no root reaches.
pub fn layered_color(net: &mut Network, st: &mut ColoringState, set: &[NodeId]) -> Result<LayerStats> {
    let g = net.graph();
    let set: Vec<NodeId> = set.iter().copied().filter(|&v| !st.is_colored(v)).collect();
    let mask = mask_of(g.n(), &set);
    let mut layer = vec![usize::MAX; g.n()];
    let mut q = VecDeque::new();
    for &v in &set {
        if st.slack(g, v, &mask) >= 1 {
            layer[v as usize] = 0;
            q.push_back(v);
        }
    }
    let roots = q.len();
    while let Some(v) = q.pop_front() {
        for &w in g.neighbors(v) {
            if mask[w as usize] && layer[w as usize] == usize::MAX {
                layer[w as usize] = layer[v as usize] + 1;
                q.push_back(w);
            }
        }
    }
    if let Some(&v) = set.iter().find(|&&v| layer[v as usize] == usize::MAX) {
        return Err(Error::NotGraytone(v));
    }
    let depth = set.iter().map(|&v| layer[v as usize]).max().map_or(0, |d| d + 1);
    net.charge(depth as u64, 1)?;
    let mut by: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
    for &v in &set {
        by.entry(layer[v as usize]).or_default().push(v);
    }
    let mut stats = LayerStats { layers: depth, roots, ..Default::default() };
    for (_, nodes) in by.into_iter().rev() {
        stats.d1lc.add(&solve_d1lc(net, st, &nodes, None)?);
    }
    Ok(stats)
}

/// Two non-adjacent nodes to be same-colored. `a` samples, `b` checks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairNode {
    pub a: NodeId,
    pub b: NodeId,
    /// Common neighbors used to forward messages between a and b.
    pub relays: Vec<NodeId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    /// Each endpoint keeps its own list; rejected samples are not remembered.
    Independent,
    /// The sampler also drops colors the partner rejected.
    Joint,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PairStats {
    pub iterations: u64,
    /// Per iteration: (uncolored pairs at start, pairs colored).
    pub per_iteration: Vec<(u64, u64)>,
    pub min_list: usize,
    pub min_joint: usize,
}

/// The virtual pair graph: one vertex per pair, an edge when any G-edge joins
/// their endpoints.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairGraph {
    pub adj: Vec<Vec<usize>>,
    pub max_degree: usize,
}

pub fn pair_graph(g: &Graph, pairs: &[PairNode]) -> PairGraph {
    let mut owner: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    for (i, p) in pairs.iter().enumerate() {
        owner.entry(p.a).or_default().push(i);
        owner.entry(p.b).or_default().push(i);
    }
    let mut adj = vec![Vec::new(); pairs.len()];
    for (i, p) in pairs.iter().enumerate() {
        for &x in &[p.a, p.b] {
            for w in g.neighbors(x) {
                if let Some(js) = owner.get(w) {
                    for &j in js {
                        if j != i {
                            adj[i].push(j);
                        }
                    }
                }
            }
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    let max_degree = adj.iter().map(|a| a.len()).max().unwrap_or(0);
    PairGraph { adj, max_degree }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HpCheck {
    pub max_degree: usize,
    pub z_induced_degree: usize,
    pub min_list: usize,
    pub min_joint: usize,
}

/// H_P for triples (pairs a = x_C, b = z_C, relay y_C). Asserts the degree
/// bound Delta/9, the z-induced degree bound Delta/10, list sizes >= 4Delta/5,
/// joint lists >= 3Delta/5, and the deg+1 property.
pub fn build_hp(g: &Graph, st: &ColoringState, pairs: &[PairNode]) -> Result<(PairGraph, HpCheck)> {
    let d = g.delta() as f64;
    for p in pairs {
        if g.has_edge(p.a, p.b) || st.is_colored(p.a) || st.is_colored(p.b) {
            return Err(Error::Structural(format!("pair ({}, {}) adjacent or precolored", p.a, p.b)));
        }
        if p.relays.is_empty() || p.relays.iter().any(|&r| !g.has_edge(r, p.a) || !g.has_edge(r, p.b)) {
            return Err(Error::RelayUnavailable((p.a, p.b)));
        }
    }
    let hp = pair_graph(g, pairs);
    if hp.max_degree as f64 > d / 9.0 {
        return Err(Error::DegreeBoundViolated { max: hp.max_degree, bound: d / 9.0 });
    }
    let zs: Vec<NodeId> = pairs.iter().map(|p| p.b).collect();
    let zmask = mask_of(g.n(), &zs);
    let z_induced = zs.iter().map(|&z| g.neighbors(z).iter().filter(|&&w| zmask[w as usize]).count()).max().unwrap_or(0);
    if z_induced as f64 > d / 10.0 {
        return Err(Error::DegreeBoundViolated { max: z_induced, bound: d / 10.0 });
    }
    let mut min_list = usize::MAX;
    let mut min_joint = usize::MAX;
    for (i, p) in pairs.iter().enumerate() {
        let la = st.palette(g, p.a);
        let lb = st.palette(g, p.b);
        min_list = min_list.min(la.len()).min(lb.len());
        let j = la.intersection_len(&lb);
        min_joint = min_joint.min(j);
        if j < hp.adj[i].len() + 1 {
            return Err(Error::NotD1lc(p.a));
        }
    }
    if !pairs.is_empty() && (min_list as f64) < 4.0 * d / 5.0 {
        return Err(Error::Structural(format!("pair list of size {min_list} below 4Delta/5")));
    }
    if !pairs.is_empty() && (min_joint as f64) < 3.0 * d / 5.0 {
        return Err(Error::Structural(format!("joint pair list of size {min_joint} below 3Delta/5")));
    }
    let check = HpCheck { max_degree: hp.max_degree, z_induced_degree: z_induced, min_list: min_list.min(g.delta()), min_joint: min_joint.min(g.delta()) };
    Ok((hp, check))
}

#[derive(Clone, Debug, Default)]
struct PairState {
    /// (pair index, is sampler) for endpoints.
    end: Option<(usize, bool)>,
    partner: NodeId,
    relay: NodeId,
    list: Option<ColorSet>,
    cand: u32,
    agreed: bool,
    my_conflict: bool,
    other_conflict: bool,
    done: bool,
    announce: bool,
    /// Relay role: (sampler, checker) pairs this node forwards for.
    relay_for: Vec<(NodeId, NodeId)>,
}

const TRY: u64 = 0;
const KEPT: u64 = 1;

fn tagged(c: u32, tag: u64) -> Msg {
    Msg::one(Field::Color(c)).with(Field::Word { value: tag, bits: 1 })
}

/// Same-colors every pair by repeated trials. Per iteration: the sampler a
/// draws c from L(a) and sends it through the relay to b (2 rounds); b checks
/// c in L(b) and answers through the relay (2 rounds); both endpoints announce
/// the try (1 round); conflict bits cross through the relay (2 rounds); kept
/// colors are announced with the next draw, and a try of a color that a
/// neighbor just took counts as a conflict. Lists are pruned by colored G-neighbors.
pub fn pair_color(net: &mut Network, st: &mut ColoringState, pairs: &[PairNode], mode: PairMode, assert_alg4_bounds: bool) -> Result<PairStats> {
    let g = net.graph();
    let d = g.delta() as f64;
    let mut ps: Vec<PairState> = vec![PairState::default(); g.n()];
    let mut involved = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        if g.has_edge(p.a, p.b) {
            return Err(Error::Structural(format!("pair ({}, {}) is adjacent", p.a, p.b)));
        }
        let relay = *p
            .relays
            .iter()
            .find(|&&r| g.has_edge(r, p.a) && g.has_edge(r, p.b))
            .ok_or(Error::RelayUnavailable((p.a, p.b)))?;
        for (x, other, sampler) in [(p.a, p.b, true), (p.b, p.a, false)] {
            let s = &mut ps[x as usize];
            if s.end.is_some() {
                return Err(Error::Structural(format!("node {x} is in two pairs")));
            }
            s.end = Some((i, sampler));
            s.partner = other;
            s.relay = relay;
            s.list = Some(st.palette(g, x));
            involved.push(x);
        }
        ps[relay as usize].relay_for.push((p.a, p.b));
        involved.push(relay);
    }
    involved.sort_unstable();
    involved.dedup();
    // d1LC property on the virtual graph, with joint lists.
    let hp = pair_graph(g, pairs);
    for (i, p) in pairs.iter().enumerate() {
        let j = st.palette(g, p.a).intersection_len(&st.palette(g, p.b));
        if j < hp.adj[i].len() + 1 {
            return Err(Error::NotD1lc(p.a));
        }
    }
    let mut stats = PairStats { min_list: usize::MAX, min_joint: usize::MAX, ..Default::default() };
    let cap = d1lc_cap(g.n());
    let mut left = pairs.len();
    net.flush();
    while left > 0 {
        if stats.iterations >= cap {
            return Err(Error::D1lcStalled(cap as usize));
        }
        stats.iterations += 1;
        for p in pairs {
            if !ps[p.a as usize].done {
                let la = ps[p.a as usize].list.as_ref().unwrap();
                let lb = ps[p.b as usize].list.as_ref().unwrap();
                let (l, j) = (la.len().min(lb.len()), la.intersection_len(lb));
                stats.min_list = stats.min_list.min(l);
                stats.min_joint = stats.min_joint.min(j);
                if assert_alg4_bounds && ((l as f64) < 4.0 * d / 5.0 || (j as f64) < 3.0 * d / 5.0) {
                    return Err(Error::Structural(format!("pair ({}, {}) lists {l}/{j} below 4Delta/5 / 3Delta/5", p.a, p.b)));
                }
            }
        }
        // R1: samplers draw and send to the relay; endpoints colored in the
        // previous iteration announce their color, read by neighbors in R2.
        net.run_round_on(&involved, &mut ps, |ctx, s| {
            if std::mem::take(&mut s.announce) {
                ctx.broadcast(tagged(s.cand, KEPT));
            }
            s.agreed = false;
            s.my_conflict = false;
            s.other_conflict = false;
            if let Some((_, true)) = s.end {
                if !s.done {
                    s.cand = s.list.as_ref().unwrap().sample(ctx.rng()).expect("non-empty list");
                    ctx.send(s.relay, Msg::one(Field::Color(s.cand)));
                }
            }
        })?;
        // R2: relays forward to the checker.
        net.run_round_on(&involved, &mut ps, |ctx, s| {
            prune_kept(ctx, s);
            forward(ctx, s);
        })?;
        // R3: checker decides and answers through the relay.
        net.run_round_on(&involved, &mut ps, |ctx, s| {
            if let Some((_, false)) = s.end {
                if !s.done {
                    let got = ctx.inbox().find(|(f, m)| *f == s.relay && m.0.len() == 1).and_then(|(_, m)| m.color(0));
                    if let Some(c) = got {
                        s.cand = c;
                        s.agreed = s.list.as_ref().unwrap().contains(c);
                        ctx.send(s.relay, Msg::one(Field::Bit(s.agreed)));
                    }
                }
            }
        })?;
        // R4: relays forward the answer.
        net.run_round_on(&involved, &mut ps, |ctx, s| forward(ctx, s))?;
        // R5: both endpoints announce the try.
        net.run_round_on(&involved, &mut ps, |ctx, s| {
            if let Some((_, true)) = s.end {
                if !s.done {
                    let ok = ctx.inbox().find(|(f, m)| *f == s.relay && m.0.len() == 1).and_then(|(_, m)| m.bit(0));
                    s.agreed = ok == Some(true);
                    if ok == Some(false) && mode == PairMode::Joint {
                        let c = s.cand;
                        s.list.as_mut().unwrap().remove(c);
                    }
                }
            }
            if s.end.is_some() && !s.done && s.agreed {
                ctx.broadcast(tagged(s.cand, TRY));
            }
        })?;
        // R6: each endpoint checks neighbors' tries and sends its conflict bit.
        net.run_round_on(&involved, &mut ps, |ctx, s| {
            if s.end.is_some() && !s.done && s.agreed {
                let c = s.cand;
                s.my_conflict = ctx.inbox().any(|(_, m)| m.word(1) == Some(TRY) && m.color(0) == Some(c)) || !s.list.as_ref().unwrap().contains(c);
                ctx.send(s.relay, Msg::one(Field::Bit(s.my_conflict)));
            }
        })?;
        // R7: relays cross the conflict bits.
        net.run_round_on(&involved, &mut ps, |ctx, s| forward(ctx, s))?;
        // Decide locally; announcements go out with the next R1.
        let mut colored = 0u64;
        let start = left as u64;
        for p in pairs {
            let (sa, sb) = (&ps[p.a as usize], &ps[p.b as usize]);
            if sa.done || !sa.agreed {
                continue;
            }
            let ra = relay_bit(net, p.a, sa.relay);
            let rb = relay_bit(net, p.b, sb.relay);
            // Each endpoint sees its own bit and the forwarded one.
            let ok = !sa.my_conflict && !sb.my_conflict && ra == Some(false) && rb == Some(false);
            if ok {
                let c = sa.cand;
                st.assign(g, p.a, c)?;
                st.assign(g, p.b, c)?;
                for x in [p.a, p.b] {
                    ps[x as usize].done = true;
                    ps[x as usize].announce = true;
                }
                colored += 1;
                left -= 1;
            }
        }
        stats.per_iteration.push((start, colored));
    }
    if stats.min_list == usize::MAX {
        stats.min_list = 0;
        stats.min_joint = 0;
    }
    for p in pairs {
        if st.color(p.a) == 0 || st.color(p.a) != st.color(p.b) {
            return Err(Error::Structural(format!("pair ({}, {}) not same-colored", p.a, p.b)));
        }
    }
    st.check_partial(g)?;
    Ok(stats)
}

/// Relays pass on whatever their endpoints sent them this round.
fn forward(ctx: &mut crate::congest::NodeCtx, s: &mut PairState) {
    if s.relay_for.is_empty() {
        return;
    }
    let msgs: Vec<(NodeId, Msg)> = ctx.inbox().filter(|(_, m)| m.word(1).is_none()).map(|(f, m)| (f, m.clone())).collect();
    for (from, m) in msgs {
        for &(a, b) in &s.relay_for {
            if from == a {
                ctx.send(b, m.clone());
            } else if from == b {
                ctx.send(a, m.clone());
            }
        }
    }
}

fn prune_kept(ctx: &mut crate::congest::NodeCtx, s: &mut PairState) {
    if let Some(l) = s.list.as_mut() {
        let kept: Vec<u32> = ctx.inbox().filter(|(_, m)| m.word(1) == Some(KEPT)).filter_map(|(_, m)| m.color(0)).collect();
        for c in kept {
            l.remove(c);
        }
    }
}

/// The conflict bit the relay forwarded to `x` in the last round.
fn relay_bit(net: &Network, x: NodeId, relay: NodeId) -> Option<bool> {
    net.peek_direct(x).iter().find(|(f, m)| *f == relay && m.0.len() == 1).and_then(|(_, m)| m.bit(0))
}
