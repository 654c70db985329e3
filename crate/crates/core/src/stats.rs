//! Monte Carlo suites behind `deltacolor stats` and the acceptance tests.
//! Each seeded run owns its graph and network; runs fan out over threads.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::acd::{validate_acd, AcDecomposition};
use crate::classify::{classify, q_fn, AcType};
use crate::coloring::{slack_generation, ColoringState};
use crate::congest::{NetConfig, Network};
use crate::error::{Error, Result};
use crate::generate::{generate, generate_instance, GeneratorSpec};
use crate::graph::{Graph, NodeId};
use crate::lll::{build_l3, build_slack_set_lll, SlackParams};
use crate::pipeline::{run, slack_check, RunConfig};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Slack,
    PairSuccess,
    LllL3,
    LllSlack,
    NonEdgeHitting,
    Matching,
}

impl Suite {
    pub const ALL: [Suite; 6] = [Suite::Slack, Suite::PairSuccess, Suite::LllL3, Suite::LllSlack, Suite::NonEdgeHitting, Suite::Matching];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Slack => "slack",
            Suite::PairSuccess => "pair-success",
            Suite::LllL3 => "lll-l3",
            Suite::LllSlack => "lll-slack",
            Suite::NonEdgeHitting => "non-edge-hitting",
            Suite::Matching => "matching",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::IllegalSpec(format!("unknown suite {s:?}; expected one of {}", Suite::ALL.map(|x| x.name()).join(", "))))
    }
}

/// CSV-ready output of a suite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub summary: String,
}

/// `f` applied to every item, across `available_parallelism` threads. Output
/// order matches input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len()).max(1);
    let next = AtomicUsize::new(0);
    let out: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *out[i].lock().unwrap() = Some(r);
            });
        }
    });
    out.into_iter().map(|m| m.into_inner().unwrap().expect("worker finished")).collect()
}

/// One SlackGeneration pass on V* u O of a planted instance, measured before
/// any retry.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlackSample {
    pub seed: u64,
    pub sparse: usize,
    pub sparse_without: usize,
    pub ordinary_acs: usize,
    pub acs_without: usize,
}

/// The planted sets serve as the decomposition (after validation), so the
/// measurement does not depend on the sampling heuristic of the ACD step.
pub fn slack_sample(spec: &GeneratorSpec, cfg: &RunConfig) -> Result<SlackSample> {
    let inst = generate_instance(spec)?;
    let g = &inst.graph;
    let acd = AcDecomposition::new(g.n(), cfg.eps, inst.planted.clone());
    let v = validate_acd(g, &acd, cfg.zeta);
    if !v.is_empty() {
        return Err(Error::InvariantViolated(v));
    }
    let mut net = Network::new(g, NetConfig { c_b: cfg.c_b, strict: cfg.strict_budget, seed: cfg.seed });
    let cls = classify(&mut net, &acd, cfg.q(g.n()))?;
    let sparse = cls.partition.sparse.clone();
    let mut s: Vec<NodeId> = sparse.iter().chain(&cls.partition.ordinary).copied().collect();
    s.sort_unstable();
    let ord: Vec<usize> = (0..cls.infos.len()).filter(|&i| cls.infos[i].ac_type == AcType::Ordinary).collect();
    let mut st = ColoringState::new(g);
    let chi = cfg.chi.unwrap_or(g.delta() as u32);
    slack_generation(&mut net, &mut st, &s, chi, cfg.activation)?;
    let sc = slack_check(g, &st, &sparse, &acd, &ord, &s);
    Ok(SlackSample { seed: cfg.seed, sparse: sparse.len(), sparse_without: sc.sparse_without.len(), ordinary_acs: ord.len(), acs_without: sc.acs_without.len() })
}

/// Per-iteration pair counts of the H_P pair coloring in one full run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairSample {
    pub seed: u64,
    pub proper: bool,
    /// (uncolored pairs at the start of the iteration, pairs colored in it).
    pub per_iteration: Vec<(u64, u64)>,
}

pub fn pair_sample(g: &Graph, cfg: &RunConfig) -> Result<PairSample> {
    let out = run(g, cfg)?;
    let proper = crate::graph::check_coloring(g, &out.colors).is_ok();
    let per_iteration = out.trace.pairs.get("triples").map(|p| p.per_iteration.clone()).unwrap_or_default();
    Ok(PairSample { seed: cfg.seed, proper, per_iteration })
}

/// Pr(E_C) for L3 on one important AC with `arcs` useful arcs into distinct
/// tails, each tail also reached by `competitors` arcs of other ACs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct L3Point {
    pub q: f64,
    pub p3: f64,
    pub arcs: usize,
    pub competitors: usize,
    pub trials: u64,
    pub hits: u64,
}

impl L3Point {
    pub fn rate(&self) -> f64 {
        self.hits as f64 / self.trials as f64
    }
}

/// Single-AC L3 instance at the given q: p3 = q / Delta and each tail has
/// Delta / q incoming arcs in total (the external-degree cap of large nodes).
pub fn l3_single_ac(delta: usize, q: f64, arcs: usize, trials: u64, seed: u64) -> L3Point {
    let p3 = (q / delta as f64).min(1.0);
    let competitors = ((delta as f64 / q).floor() as usize).saturating_sub(1);
    // Tails are 0..arcs; the own head is `arcs`; competitor AC k has head arcs + 1 + k.
    let own: Vec<(NodeId, NodeId)> = (0..arcs as NodeId).map(|z| (arcs as NodeId, z)).collect();
    let mut useful = vec![own];
    for k in 0..competitors {
        let h = (arcs + 1 + k) as NodeId;
        useful.push((0..arcs as NodeId).map(|z| (h, z)).collect());
    }
    let in_z1: Vec<bool> = (0..arcs + 1 + competitors).map(|z| z < arcs / 2).collect();
    let l3 = build_l3(&useful, &in_z1, p3);
    let ev = &l3.inst.events[0];
    let mut r = rng::stream(&[seed, rng::tag("l3_single_ac"), q.to_bits()]);
    let mut a = vec![0u32; l3.inst.vars.len()];
    let mut hits = 0;
    for _ in 0..trials {
        for &x in &ev.vbl {
            a[x] = l3.inst.vars[x].dist.sample(&mut r);
        }
        if (ev.holds)(&a) {
            hits += 1;
        }
    }
    L3Point { q, p3, arcs, competitors, trials, hits }
}

/// gamma = min over points of -ln(rate) / q: the largest gamma with every
/// measured rate <= exp(-gamma q). Zero if some rate is 1; infinite if all are 0.
pub fn fit_gamma(points: &[L3Point]) -> f64 {
    points.iter().map(|p| if p.hits == 0 { f64::INFINITY } else { -p.rate().ln() / p.q }).fold(f64::INFINITY, f64::min)
}

/// Pr(E'_v) for one node of the slack LLL, against exp(-alpha mu / 5) with
/// alpha = alpha_v and with alpha = 1 / (2 q(n)^2).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EPrimePoint {
    pub v: NodeId,
    pub alpha_v: f64,
    pub mu: f64,
    pub trials: u64,
    pub hits: u64,
    pub bound_alpha_v: f64,
    pub bound_q: f64,
}

impl EPrimePoint {
    pub fn rate(&self) -> f64 {
        self.hits as f64 / self.trials as f64
    }
}

/// U = U' = V; `probes` nodes drawn at random get `trials` samples each.
pub fn e_prime_rates(g: &Graph, probes: usize, trials: u64, seed: u64) -> Vec<EPrimePoint> {
    let n = g.n();
    let prm = SlackParams::for_graph(n, g.delta());
    let mut r = rng::stream(&[seed, rng::tag("e_prime")]);
    let mut nodes: Vec<NodeId> = g.nodes().collect();
    nodes.shuffle(&mut r);
    nodes.truncate(probes);
    nodes.sort_unstable();
    let all: Vec<NodeId> = g.nodes().collect();
    let lll = build_slack_set_lll(g, &all, &nodes, &[], &[], prm);
    let q = q_fn(n);
    let alpha_q = 1.0 / (2.0 * q * q);
    let mut a = vec![0u32; lll.inst.vars.len()];
    nodes
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let ev = &lll.inst.events[i];
            debug_assert_eq!(ev.home, v);
            let mut hits = 0;
            for _ in 0..trials {
                for &x in &ev.vbl {
                    a[x] = lll.inst.vars[x].dist.sample(&mut r);
                }
                if (ev.holds)(&a) {
                    hits += 1;
                }
            }
            let alpha_v = lll.alpha[i];
            EPrimePoint { v, alpha_v, mu: prm.mu, trials, hits, bound_alpha_v: (-alpha_v * prm.mu / 5.0).exp(), bound_q: (-alpha_q * prm.mu / 5.0).exp() }
        })
        .collect()
}

/// One (graph, p) pair of the non-edge hitting experiment: a G(x, edge_prob)
/// graph, nodes sampled with probability p, f = non-edges among the sample.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HitPoint {
    pub x: usize,
    pub edge_prob: f64,
    pub p: f64,
    pub non_edges: u64,
    pub trials: u64,
    /// Trials with f <= p^2 m / 2.
    pub hits: u64,
    /// exp(-p m / (5 |X|)).
    pub bound: f64,
}

impl HitPoint {
    pub fn rate(&self) -> f64 {
        self.hits as f64 / self.trials as f64
    }
}

pub fn non_edge_hitting(seed: u64, trials: u64) -> HitPoint {
    let mut r = rng::stream(&[seed, rng::tag("non_edge_hitting")]);
    let x = r.gen_range(16..=128usize);
    let edge_prob = r.gen_range(0.05..0.95);
    let p = r.gen_range(0.05..0.6);
    let mut adj = vec![0u128; x];
    for i in 0..x {
        for j in i + 1..x {
            if r.gen_bool(edge_prob) {
                adj[i] |= 1 << j;
                adj[j] |= 1 << i;
            }
        }
    }
    let edges: u64 = adj.iter().map(|a| a.count_ones() as u64).sum::<u64>() / 2;
    let non_edges = (x * (x - 1) / 2) as u64 - edges;
    let thr = p * p * non_edges as f64 / 2.0;
    let mut hits = 0;
    for _ in 0..trials {
        let mut s = 0u128;
        for i in 0..x {
            if r.gen_bool(p) {
                s |= 1 << i;
            }
        }
        let k = s.count_ones() as u64;
        let inside: u64 = (0..x).filter(|&i| s >> i & 1 == 1).map(|i| (adj[i] & s).count_ones() as u64).sum::<u64>() / 2;
        let f = k * k.saturating_sub(1) / 2 - inside;
        if f as f64 <= thr {
            hits += 1;
        }
    }
    HitPoint { x, edge_prob, p, non_edges, trials, hits, bound: (-p * non_edges as f64 / (5.0 * x as f64)).exp() }
}

/// A random bipartite graph (Y, U) with every y of degree >= k and every u of
/// degree <= 2k. Returns (|Y|, |U|, edges as (y, u)).
pub fn bipartite_claim_instance(seed: u64, k: usize, max_y: usize) -> (usize, usize, Vec<(usize, usize)>) {
    let mut r = rng::stream(&[seed, rng::tag("bipartite_claim"), k as u64]);
    let y = r.gen_range(1..=max_y);
    // Tight instances: just enough capacity on U for the Y-side degrees.
    let deg: Vec<usize> = (0..y).map(|_| k + r.gen_range(0..=k / 2)).collect();
    let total: usize = deg.iter().sum();
    let mut u = total.div_ceil(2 * k).max(k) + r.gen_range(0..=k);
    loop {
        let mut cap = vec![2 * k; u];
        let mut edges = Vec::with_capacity(total);
        let mut ok = true;
        for (yi, &dy) in deg.iter().enumerate() {
            let mut open: Vec<usize> = (0..u).filter(|&j| cap[j] > 0).collect();
            if open.len() < dy {
                ok = false;
                break;
            }
            // Prefer the fullest vertices half of the time to create contention.
            if r.gen_bool(0.5) {
                open.sort_by_key(|&j| (cap[j], j));
                open.truncate((2 * dy).min(open.len()));
            }
            for &j in open.choose_multiple(&mut r, dy) {
                cap[j] -= 1;
                edges.push((yi, j));
            }
        }
        if ok {
            return (y, u, edges);
        }
        u += k;
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

/// Runs a suite over seeds `spec.seed .. spec.seed + runs`. `trials` is the
/// per-point sample count of the probability suites.
pub fn run_suite(suite: Suite, spec: &GeneratorSpec, runs: u64, trials: u64) -> Result<Table> {
    let seeds: Vec<u64> = (spec.seed..spec.seed + runs).collect();
    match suite {
        Suite::Slack => {
            let res = par_map(&seeds, |&s| {
                let cfg = RunConfig { eps: spec.eps, seed: s, ..Default::default() };
                slack_sample(&GeneratorSpec { seed: s, ..spec.clone() }, &cfg)
            });
            let mut rows = Vec::new();
            for r in res {
                let s = r?;
                rows.push(vec![s.seed as f64, s.sparse as f64, s.sparse_without as f64, s.sparse_without as f64 / s.sparse.max(1) as f64, s.ordinary_acs as f64, s.acs_without as f64]);
            }
            let worst = rows.iter().map(|r| r[3]).fold(0.0, f64::max);
            let acs: f64 = rows.iter().map(|r| r[4]).sum();
            let bad: f64 = rows.iter().map(|r| r[5]).sum();
            Ok(Table {
                header: header(&["seed", "sparse", "sparse_without_slack", "fraction_without", "ordinary_acs", "acs_without_toehold"]),
                summary: format!("worst per-run fraction of sparse nodes without slack {worst:.4}; toehold present in {:.4} of (AC, seed) pairs", if acs > 0.0 { 1.0 - bad / acs } else { 1.0 }),
                rows,
            })
        }
        Suite::PairSuccess => {
            let res = par_map(&seeds, |&s| {
                let g = generate(&GeneratorSpec { seed: s, ..spec.clone() })?;
                pair_sample(&g, &RunConfig { eps: spec.eps, seed: s, ..Default::default() })
            });
            let mut rows = Vec::new();
            let (mut tries, mut wins) = (0u64, 0u64);
            for r in res {
                let s = r?;
                for (i, &(u, c)) in s.per_iteration.iter().enumerate() {
                    if u > 0 {
                        rows.push(vec![s.seed as f64, i as f64, u as f64, c as f64, c as f64 / u as f64]);
                        tries += u;
                        wins += c;
                    }
                }
            }
            let rates: Vec<f64> = rows.iter().map(|r| r[4]).collect();
            Ok(Table {
                header: header(&["seed", "iteration", "uncolored_pairs", "colored", "success_rate"]),
                summary: format!("mean per-iteration success rate {:.4}; pooled {wins}/{tries} = {:.4}", mean(&rates), wins as f64 / tries.max(1) as f64),
                rows,
            })
        }
        Suite::LllL3 => {
            let arcs = (spec.delta / 10).max(1);
            let qs = [4.0, 8.0, 16.0, 32.0, 64.0];
            let pts = par_map(&qs, |&q| l3_single_ac(spec.delta, q, arcs, trials, spec.seed));
            let gamma = fit_gamma(&pts);
            let rows = pts.iter().map(|p| vec![p.q, p.p3, p.arcs as f64, p.competitors as f64, p.trials as f64, p.rate(), (-gamma * p.q).exp()]).collect();
            Ok(Table { header: header(&["q", "p3", "arcs", "competitors", "trials", "pr_e_c", "fit_exp_minus_gamma_q"]), summary: format!("fitted gamma {gamma:.5}"), rows })
        }
        Suite::LllSlack => {
            let g = generate(spec)?;
            let pts = e_prime_rates(&g, runs as usize, trials, spec.seed);
            let worst = pts.iter().map(|p| p.rate() / p.bound_alpha_v).fold(0.0, f64::max);
            let rows = pts.iter().map(|p| vec![p.v as f64, p.alpha_v, p.mu, p.trials as f64, p.rate(), p.bound_alpha_v, p.bound_q]).collect();
            Ok(Table {
                header: header(&["node", "alpha_v", "mu", "trials", "pr_e_prime", "bound_alpha_v", "bound_alpha_q"]),
                summary: format!("worst measured / exp(-alpha_v mu / 5) = {worst:.4}"),
                rows,
            })
        }
        Suite::NonEdgeHitting => {
            let pts = par_map(&seeds, |&s| non_edge_hitting(s, trials));
            let over = pts.iter().filter(|p| p.rate() > p.bound).count();
            let rows = pts.iter().map(|p| vec![p.x as f64, p.edge_prob, p.p, p.non_edges as f64, p.trials as f64, p.rate(), p.bound]).collect();
            Ok(Table { header: header(&["x", "edge_prob", "p", "non_edges", "trials", "pr_low", "bound"]), summary: format!("{over} of {} pairs above the bound", pts.len()), rows })
        }
        Suite::Matching => {
            let k = spec.delta.max(1);
            let res = par_map(&seeds, |&s| {
                let (y, u, e) = bipartite_claim_instance(s, k, spec.n.max(1));
                (y, u, crate::matching::max_bipartite_matching(y, u, &e).len())
            });
            let short = res.iter().filter(|&&(y, _, m)| 2 * m < y).count();
            let rows = res.iter().map(|&(y, u, m)| vec![k as f64, y as f64, u as f64, m as f64]).collect();
            Ok(Table { header: header(&["k", "y", "u", "max_matching"]), summary: format!("{short} counterexamples to |M| >= |Y|/2"), rows })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_map_keeps_order() {
        let xs: Vec<u64> = (0..50).collect();
        assert_eq!(par_map(&xs, |&x| x * x), xs.iter().map(|x| x * x).collect::<Vec<_>>());
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn l3_rate_matches_closed_form() {
        // Pr(E_C) = (1 - p3 (1 - p3)^r)^m for independent tails.
        let p = l3_single_ac(64, 8.0, 6, 20_000, 1);
        let s = p.p3 * (1.0 - p.p3).powi(p.competitors as i32);
        let exact = (1.0 - s).powi(p.arcs as i32);
        let se = (exact * (1.0 - exact) / p.trials as f64).sqrt();
        assert!((p.rate() - exact).abs() < 5.0 * se, "{} vs {exact}", p.rate());
    }

    #[test]
    fn non_edge_point_is_consistent() {
        let h = non_edge_hitting(3, 2000);
        assert!(h.non_edges <= (h.x * (h.x - 1) / 2) as u64);
        assert!(h.bound > 0.0 && h.bound <= 1.0);
    }

    #[test]
    fn bipartite_instance_respects_degrees() {
        for seed in 0..20 {
            let (y, u, e) = bipartite_claim_instance(seed, 3, 40);
            let mut dy = vec![0; y];
            let mut du = vec![0; u];
            for &(a, b) in &e {
                dy[a] += 1;
                du[b] += 1;
            }
            assert!(dy.iter().all(|&d| d >= 3));
            assert!(du.iter().all(|&d| d <= 6));
        }
    }
}
