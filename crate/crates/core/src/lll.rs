//! Lovasz Local Lemma instances over independent variables, a parallel
//! resampling solver, the concrete sampling instances used to create slack
//! and find triples, and two-set slack coloring.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::coloring::ColoringState;
use crate::congest::{Field, Msg, Network};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Dist {
    /// 1 with probability p, else 0.
    Bernoulli(f64),
    /// Uniform over `0..k`.
    Uniform(u32),
}

impl Dist {
    pub fn sample(&self, r: &mut ChaCha8Rng) -> u32 {
        match *self {
            Dist::Bernoulli(p) => u32::from(r.gen_bool(p.clamp(0.0, 1.0))),
            Dist::Uniform(k) => r.gen_range(0..k.max(1)),
        }
    }

    pub fn in_range(&self, x: u32) -> bool {
        match *self {
            Dist::Bernoulli(_) => x <= 1,
            Dist::Uniform(k) => x < k.max(1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Var {
    pub dist: Dist,
    pub home: NodeId,
}

pub type Pred<'a> = Box<dyn Fn(&[u32]) -> bool + 'a>;

pub struct Event<'a> {
    pub kind: &'static str,
    pub home: NodeId,
    /// Variables the predicate reads. Sorted.
    pub vbl: Vec<usize>,
    pub holds: Pred<'a>,
    /// Disjoint halves of `vbl` when the event is the intersection of two
    /// events over them; the solver then resamples one half at a time.
    pub halves: Option<[Vec<usize>; 2]>,
}

pub struct LllInstance<'a> {
    pub label: &'static str,
    pub vars: Vec<Var>,
    pub events: Vec<Event<'a>>,
    /// Notes about degenerate input, for reports.
    pub flags: Vec<String>,
}

impl<'a> LllInstance<'a> {
    pub fn new(label: &'static str) -> Self {
        LllInstance { label, vars: Vec::new(), events: Vec::new(), flags: Vec::new() }
    }

    pub fn add_var(&mut self, dist: Dist, home: NodeId) -> usize {
        self.vars.push(Var { dist, home });
        self.vars.len() - 1
    }

    pub fn add_event(&mut self, kind: &'static str, home: NodeId, mut vbl: Vec<usize>, holds: Pred<'a>) -> usize {
        vbl.sort_unstable();
        vbl.dedup();
        self.events.push(Event { kind, home, vbl, holds, halves: None });
        self.events.len() - 1
    }

    fn var_events(&self) -> Vec<Vec<usize>> {
        let mut ve = vec![Vec::new(); self.vars.len()];
        for (i, e) in self.events.iter().enumerate() {
            for &x in &e.vbl {
                ve[x].push(i);
            }
        }
        ve
    }

    /// Maximum number of other events sharing a variable with an event.
    pub fn dependency_degree(&self) -> usize {
        let ve = self.var_events();
        let mut best = 0;
        let mut seen = vec![usize::MAX; self.events.len()];
        for (i, e) in self.events.iter().enumerate() {
            let mut k = 0;
            for &x in &e.vbl {
                for &j in &ve[x] {
                    if j != i && seen[j] != i {
                        seen[j] = i;
                        k += 1;
                    }
                }
            }
            best = best.max(k);
        }
        best
    }

    /// Largest graph distance from an event's home to the home of one of its
    /// variables. None if some variable lives more than two hops away.
    pub fn locality(&self, g: &Graph) -> Option<usize> {
        let mut worst = 0;
        for e in &self.events {
            for &x in &e.vbl {
                worst = worst.max(dist_upto2(g, e.home, self.vars[x].home)?);
            }
        }
        Some(worst)
    }

    pub fn violated(&self, a: &[u32]) -> Vec<usize> {
        (0..self.events.len()).filter(|&i| (self.events[i].holds)(a)).collect()
    }

    pub fn sample_all(&self, r: &mut ChaCha8Rng) -> Vec<u32> {
        self.vars.iter().map(|v| v.dist.sample(r)).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolveStats {
    pub events: usize,
    pub vars: usize,
    pub iterations: usize,
    pub resamples: u64,
    pub initially_violated: usize,
    pub dependency_degree: usize,
    /// One line per resampled event: "event_id var var ...".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<String>>,
}

/// Parallel resampling: sample everything; while some event holds, pick a
/// maximal set of violated events with disjoint variables (lowest index
/// first) and resample their variables. The result is re-checked against
/// every event before it is returned.
pub fn solve_resampling(inst: &LllInstance, seed: u64, cap: usize, trace: bool) -> Result<(Vec<u32>, SolveStats)> {
    let mut r = rng::stream(&[seed, rng::tag(inst.label)]);
    let mut a = inst.sample_all(&mut r);
    let ve = inst.var_events();
    let mut stats = SolveStats { events: inst.events.len(), vars: inst.vars.len(), trace: trace.then(Vec::new), ..Default::default() };
    let mut bad: BTreeSet<usize> = inst.violated(&a).into_iter().collect();
    stats.initially_violated = bad.len();
    let mut used = vec![false; inst.vars.len()];
    while !bad.is_empty() {
        if stats.iterations >= cap {
            return Err(Error::IterationCapExceeded { iterations: stats.iterations, violating: bad.into_iter().collect() });
        }
        let mut chosen = Vec::new();
        for &i in &bad {
            let e = &inst.events[i];
            if e.vbl.iter().all(|&x| !used[x]) {
                for &x in &e.vbl {
                    used[x] = true;
                }
                chosen.push(i);
            }
        }
        let mut changed = Vec::new();
        for &i in &chosen {
            let e = &inst.events[i];
            let vars: &[usize] = match &e.halves {
                Some(h) => &h[(stats.iterations + i) % 2],
                None => &e.vbl,
            };
            for &x in vars {
                a[x] = inst.vars[x].dist.sample(&mut r);
                changed.push(x);
            }
            stats.resamples += 1;
            if let Some(t) = stats.trace.as_mut() {
                let mut line = i.to_string();
                for x in vars {
                    let _ = write!(line, " {x}");
                }
                t.push(line);
            }
            for &x in &e.vbl {
                used[x] = false;
            }
        }
        stats.iterations += 1;
        let mut recheck: BTreeSet<usize> = chosen.into_iter().collect();
        for x in changed {
            recheck.extend(ve[x].iter().copied());
        }
        for i in recheck {
            if (inst.events[i].holds)(&a) {
                bad.insert(i);
            } else {
                bad.remove(&i);
            }
        }
    }
    let still = inst.violated(&a);
    if !still.is_empty() {
        return Err(Error::Structural(format!("{}: resampling output violates {} event(s)", inst.label, still.len())));
    }
    if let Some((x, _)) = a.iter().enumerate().find(|(x, &v)| !inst.vars[*x].dist.in_range(v)) {
        return Err(Error::Structural(format!("{}: variable {x} out of range", inst.label)));
    }
    Ok((a, stats))
}

fn dist_upto2(g: &Graph, u: NodeId, v: NodeId) -> Option<usize> {
    if u == v {
        return Some(0);
    }
    if g.has_edge(u, v) {
        return Some(1);
    }
    let (a, b) = (g.neighbors(u), g.neighbors(v));
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return Some(2),
        }
    }
    None
}

/// Charges the rounds of a solve on the network: each iteration is one round
/// of evaluating and announcing violations plus one of resampling, within the
/// locality radius.
pub fn charge_solve(net: &mut Network, stats: &SolveStats, locality: u64) -> Result<()> {
    net.charge((stats.iterations as u64 + 1) * 2 * locality.max(1), net.widths().count)
}

/// Parameters of the slack-set sampling instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlackParams {
    pub p: f64,
    pub mu: f64,
}

impl SlackParams {
    /// p = min(c * L^4 * log2(Delta) / Delta, 1/64) with L = log2 log2 n, c = 2.
    pub fn for_graph(n: usize, delta: usize) -> Self {
        Self::with_constant(n, delta, 2.0)
    }

    pub fn with_constant(n: usize, delta: usize, c: f64) -> Self {
        let l = (n.max(4) as f64).log2().log2();
        let d = delta.max(2) as f64;
        let p = (c * l.powi(4) * d.log2() / d).min(1.0 / 64.0);
        SlackParams { p, mu: p * d }
    }
}

/// Non-edges among the marked members of `nb` (sorted neighbor list).
pub fn sampled_non_edges(g: &Graph, nb: &[NodeId], take: impl Fn(NodeId) -> bool) -> u64 {
    let s: Vec<NodeId> = nb.iter().copied().filter(|&w| take(w)).collect();
    let mut k = 0u64;
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            if !g.has_edge(s[i], s[j]) {
                k += 1;
            }
        }
    }
    k
}

pub struct SlackSetLll<'a> {
    pub inst: LllInstance<'a>,
    /// Variable of each node of U.
    pub var_of: Vec<Option<usize>>,
    /// Non-edge fraction alpha_v of each node of U' (same order as `u_prime`).
    pub alpha: Vec<f64>,
}

/// Sampling U into S with probability p. Events: E_v (v in `watch`): at least
/// 4 mu sampled neighbors; E_C: at least 4 mu sampled nodes in V(M_C); E'_v
/// (v in U'): fewer than alpha_v mu^2 / 2 non-edges in G[S cap N(v)], where
/// alpha_v is v's non-edge count inside N(v) cap U over Delta^2.
pub fn build_slack_set_lll<'a>(g: &'a Graph, u: &[NodeId], u_prime: &[NodeId], watch: &[NodeId], matchings: &[Vec<(NodeId, NodeId)>], prm: SlackParams) -> SlackSetLll<'a> {
    let mut inst = LllInstance::new("slack_set");
    let mut var_of = vec![None; g.n()];
    for &v in u {
        var_of[v as usize] = Some(inst.add_var(Dist::Bernoulli(prm.p), v));
    }
    let d = g.delta() as f64;
    let cap = 4.0 * prm.mu;
    let vo = std::rc::Rc::new(var_of.clone());
    for &v in watch {
        let vars: Vec<usize> = g.neighbors(v).iter().filter_map(|&w| var_of[w as usize]).collect();
        let vv = vars.clone();
        inst.add_event("E_v", v, vars, Box::new(move |a| vv.iter().filter(|&&x| a[x] == 1).count() as f64 >= cap));
    }
    for m in matchings {
        let mut nodes: Vec<NodeId> = m.iter().flat_map(|&(h, t)| [h, t]).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let vars: Vec<usize> = nodes.iter().filter_map(|&w| var_of[w as usize]).collect();
        let vv = vars.clone();
        let home = m.first().map_or(0, |x| x.0);
        inst.add_event("E_C", home, vars, Box::new(move |a| vv.iter().filter(|&&x| a[x] == 1).count() as f64 >= cap));
    }
    let mut alpha = Vec::with_capacity(u_prime.len());
    let in_u = {
        let mut m = vec![false; g.n()];
        for &v in u {
            m[v as usize] = true;
        }
        m
    };
    for &v in u_prime {
        let nb: Vec<NodeId> = g.neighbors(v).iter().copied().filter(|&w| in_u[w as usize]).collect();
        let total = sampled_non_edges(g, &nb, |_| true);
        let a_v = total as f64 / (d * d);
        alpha.push(a_v);
        let thr = a_v * prm.mu * prm.mu / 2.0;
        let vars: Vec<usize> = nb.iter().filter_map(|&w| var_of[w as usize]).collect();
        let vo = vo.clone();
        inst.add_event(
            "E'_v",
            v,
            vars,
            Box::new(move |a| (sampled_non_edges(g, &nb, |w| vo[w as usize].is_some_and(|x| a[x] == 1)) as f64) < thr),
        );
    }
    SlackSetLll { inst, var_of, alpha }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TwoSetStats {
    pub attempts: u32,
    pub colored: usize,
    pub w_size: usize,
    pub failed: usize,
    pub max_colored_neighbors: usize,
    pub s_degree: usize,
}

/// Does `v` have two neighbors sharing a color (unit slack for good)?
pub fn has_repeat(g: &Graph, st: &ColoringState, v: NodeId) -> bool {
    let mut seen = BTreeSet::new();
    g.neighbors(v).iter().map(|&w| st.color(w)).filter(|&c| c != 0).any(|c| !seen.insert(c))
}

#[derive(Clone, Debug, Default)]
struct TrialColor {
    tried: u32,
    kept: bool,
}

/// One random color trial over `s` with colors `lo..=hi`; proper with
/// respect to all colored nodes. Two rounds.
fn trial(net: &mut Network, st: &mut ColoringState, s: &[NodeId], lo: u32, hi: u32) -> Result<Vec<NodeId>> {
    let g = net.graph();
    let mut ts: Vec<TrialColor> = vec![TrialColor::default(); g.n()];
    net.flush();
    net.run_round_on(s, &mut ts, |ctx, t| {
        t.tried = ctx.rng().gen_range(lo..=hi);
        ctx.broadcast(Msg::one(Field::Color(t.tried)));
    })?;
    let colors = &st.colors;
    net.run_round_on(s, &mut ts, |ctx, t| {
        let clash = ctx.inbox().any(|(_, m)| m.color(0) == Some(t.tried)) || ctx.neighbors().iter().any(|&w| colors[w as usize] == t.tried);
        if !clash {
            t.kept = true;
            ctx.broadcast(Msg::one(Field::Color(t.tried)));
        }
    })?;
    let mut out = Vec::new();
    for &v in s {
        if ts[v as usize].kept {
            st.assign(g, v, ts[v as usize].tried)?;
            out.push(v);
        }
    }
    Ok(out)
}

/// Colors a subset of S1 (palette 1..=chi) and then of S2 (chi+1..=2chi) so
/// that every node of W sees two same-colored neighbors. Retries on fresh
/// randomness up to `cap` attempts, then reports the failing W nodes (the
/// last attempt's coloring is kept).
pub fn two_set_slack_color(net: &mut Network, st: &mut ColoringState, s1: &[NodeId], s2: &[NodeId], w: &[NodeId], chi: u32, cap: u32) -> Result<TwoSetStats> {
    let g = net.graph();
    let chi = chi.clamp(1, st.delta / 2);
    let mut in_s = vec![false; g.n()];
    for &v in s1.iter().chain(s2) {
        in_s[v as usize] = true;
    }
    let s_degree = g.nodes().map(|v| g.neighbors(v).iter().filter(|&&x| in_s[x as usize]).count()).max().unwrap_or(0);
    let mut stats = TwoSetStats { w_size: w.len(), s_degree, ..Default::default() };
    loop {
        stats.attempts += 1;
        let mut done = trial(net, st, s1, 1, chi)?;
        done.extend(trial(net, st, s2, chi + 1, 2 * chi)?);
        // Every W node counts repeated colors among its neighbors.
        net.charge(1, 1)?;
        let failed: Vec<NodeId> = w.iter().copied().filter(|&v| !has_repeat(g, st, v)).collect();
        stats.colored = done.len();
        stats.failed = failed.len();
        let colored_nb = g.nodes().map(|v| g.neighbors(v).iter().filter(|&&x| in_s[x as usize] && st.is_colored(x)).count()).max().unwrap_or(0);
        stats.max_colored_neighbors = colored_nb;
        if colored_nb > 2 * s_degree {
            return Err(Error::Structural(format!("{colored_nb} colored neighbors exceed 2 Delta_s = {}", 2 * s_degree)));
        }
        if failed.is_empty() {
            return Ok(stats);
        }
        if stats.attempts >= cap {
            return Err(Error::SlackFailed(failed));
        }
        for v in done {
            st.colors[v as usize] = 0;
        }
    }
}

/// Sampling probability of L1.
pub const Q_SAMPLE: f64 = 1.0 / 30.0;

/// x = q^2 (1-q)^3 Delta / 20: the useful-arc threshold of L1.
pub fn l1_threshold(delta: usize) -> f64 {
    let q = Q_SAMPLE;
    q * q * (1.0 - q).powi(3) * delta as f64 / 20.0
}

/// An important AC as the instances see it: its members' AC index and its
/// matching arcs (head in C, tail outside).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImportantAc {
    pub ac: usize,
    pub arcs: Vec<(NodeId, NodeId)>,
}

pub struct L1<'a> {
    pub inst: LllInstance<'a>,
    pub var_of: Vec<Option<usize>>,
}

/// L1: sample X into Z with probability q. E_v (v in O): |Z cap N(v)| > 3q
/// Delta. E_C (important C): fewer than x useful arcs, where an arc (v, u)
/// is useful if v is in X \ Z and u in Z.
pub fn build_l1<'a>(g: &'a Graph, x: &[NodeId], o_nodes: &[NodeId], important: &[ImportantAc]) -> L1<'a> {
    let mut inst = LllInstance::new("L1");
    let mut var_of = vec![None; g.n()];
    for &v in x {
        var_of[v as usize] = Some(inst.add_var(Dist::Bernoulli(Q_SAMPLE), v));
    }
    let d = g.delta() as f64;
    let lim = 3.0 * Q_SAMPLE * d;
    for &v in o_nodes {
        let vars: Vec<usize> = g.neighbors(v).iter().filter_map(|&w| var_of[w as usize]).collect();
        let vv = vars.clone();
        inst.add_event("E_v", v, vars, Box::new(move |a| vv.iter().filter(|&&k| a[k] == 1).count() as f64 > lim));
    }
    let thr = l1_threshold(g.delta());
    for c in important {
        let arcs: Vec<(usize, usize)> = c.arcs.iter().filter_map(|&(h, t)| Some((var_of[h as usize]?, var_of[t as usize]?))).collect();
        if arcs.is_empty() {
            inst.flags.push(format!("AC {} has no arc with both endpoints in X; its event always holds", c.ac));
        }
        let vars: Vec<usize> = arcs.iter().flat_map(|&(a, b)| [a, b]).collect();
        let home = c.arcs.iter().map(|x| x.0).max().unwrap_or(0);
        inst.add_event("E_C", home, vars, Box::new(move |a| (arcs.iter().filter(|&&(h, t)| a[h] == 0 && a[t] == 1).count() as f64) < thr));
    }
    L1 { inst, var_of }
}

/// Useful arcs of each important AC for a given Z (`in_z`) and X (`in_x`).
pub fn useful_arcs(important: &[ImportantAc], in_x: &[bool], in_z: &[bool]) -> Vec<Vec<(NodeId, NodeId)>> {
    important
        .iter()
        .map(|c| c.arcs.iter().copied().filter(|&(h, t)| in_x[h as usize] && !in_z[h as usize] && in_z[t as usize]).collect())
        .collect()
}

pub struct L2<'a> {
    pub inst: LllInstance<'a>,
    pub var_of: Vec<Option<usize>>,
}

/// L2: every z in Z flips a fair coin for Z1 (0) or Z2 (1). E_{C,i}: fewer
/// than x/3 of C's useful arcs have their tail in Z_i.
pub fn split_z_l2<'a>(g: &Graph, z: &[NodeId], useful: &[Vec<(NodeId, NodeId)>], important: &[ImportantAc], x_threshold: f64) -> L2<'a> {
    let mut inst = LllInstance::new("L2");
    let mut var_of = vec![None; g.n()];
    for &v in z {
        var_of[v as usize] = Some(inst.add_var(Dist::Uniform(2), v));
    }
    for (k, arcs) in useful.iter().enumerate() {
        let tails: Vec<usize> = arcs.iter().filter_map(|&(_, t)| var_of[t as usize]).collect();
        let home = important[k].arcs.iter().map(|x| x.0).max().unwrap_or(0);
        for side in 0..2u32 {
            let tv = tails.clone();
            inst.add_event("E_C_i", home, tails.clone(), Box::new(move |a| (tv.iter().filter(|&&x| a[x] == side).count() as f64) < x_threshold / 3.0));
        }
    }
    L2 { inst, var_of }
}

pub struct L3<'a> {
    pub inst: LllInstance<'a>,
    /// (AC position in `important`, head, tail) per variable.
    pub arc_of: Vec<(usize, NodeId, NodeId)>,
}

/// L3: every useful arc (v, z) of an important AC is activated with
/// probability p3. It is successful if activated and no other AC activated an
/// arc into z. E_C: no successful arc; it is the intersection of E_{C,1} and
/// E_{C,2} over the arcs into Z1 and Z2, and is resampled one half at a time.
pub fn build_l3<'a>(useful: &[Vec<(NodeId, NodeId)>], in_z1: &'a [bool], p3: f64) -> L3<'a> {
    let mut inst = LllInstance::new("L3");
    let mut arc_of = Vec::new();
    let mut into: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    for (k, arcs) in useful.iter().enumerate() {
        for &(h, t) in arcs {
            let x = inst.add_var(Dist::Bernoulli(p3.clamp(0.0, 1.0)), t);
            arc_of.push((k, h, t));
            into.entry(t).or_default().push(x);
        }
    }
    let mut first = 0;
    let arc_ref = std::rc::Rc::new(arc_of.clone());
    let into = std::rc::Rc::new(into);
    for arcs in useful {
        let mine: Vec<usize> = (first..first + arcs.len()).collect();
        first += arcs.len();
        let mut vbl: Vec<usize> = mine.clone();
        for &x in &mine {
            vbl.extend(into[&arc_ref[x].2].iter().copied());
        }
        let home = arcs.iter().map(|a| a.0).max().unwrap_or(0);
        let (ar, it) = (arc_ref.clone(), into.clone());
        let succ = move |a: &[u32], x: usize| a[x] == 1 && it[&ar[x].2].iter().all(|&y| y == x || a[y] == 0 || ar[y].0 == ar[x].0);
        let mine2 = mine.clone();
        let id = inst.add_event("E_C", home, vbl.clone(), Box::new(move |a| !mine2.iter().any(|&x| succ(a, x))));
        // Halves: own arcs into Z1 (with their competitors) and into Z2.
        let mut halves = [Vec::new(), Vec::new()];
        for &x in &mine {
            let side = usize::from(!in_z1[arc_ref[x].2 as usize]);
            halves[side].extend(into[&arc_ref[x].2].iter().copied());
        }
        for h in &mut halves {
            h.sort_unstable();
            h.dedup();
        }
        inst.events[id].halves = Some(halves);
    }
    L3 { inst, arc_of }
}

/// The lowest successful arc per AC, if any.
pub fn successful_arcs(l3: &L3, a: &[u32], acs: usize) -> Vec<Option<(NodeId, NodeId)>> {
    let mut into: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    for (x, &(_, _, t)) in l3.arc_of.iter().enumerate() {
        into.entry(t).or_default().push(x);
    }
    let mut best: Vec<Option<(NodeId, NodeId)>> = vec![None; acs];
    for (x, &(k, h, t)) in l3.arc_of.iter().enumerate() {
        let ok = a[x] == 1 && into[&t].iter().all(|&y| y == x || a[y] == 0 || l3.arc_of[y].0 == k);
        if ok && best[k].is_none_or(|b| (h, t) < b) {
            best[k] = Some((h, t));
        }
    }
    best
}
