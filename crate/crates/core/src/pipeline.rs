//! End-to-end Delta-coloring: decomposition, classification, then the five
//! coloring phases with explicit escalation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::acd::{compute_acd, AcDecomposition, AcdStats};
use crate::brooks::brooks_color;
use crate::classify::{classify, q_fn, AcType, Classification, Level, NodeClass, Subtype};
use crate::coloring::{build_hp, graytone_color, layered_color, mask_of, pair_color, slack_generation, ColoringState, D1lcStats, PairMode, PairNode, PairStats};
use crate::congest::{NetConfig, Network};
use crate::error::{Error, Result};
use crate::graph::{validate_delta_colorable, Graph, NodeId};
use crate::lll::{self, ImportantAc, SlackParams, SolveStats};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub eps: f64,
    /// Sparsity constant of the decomposition check.
    pub zeta: f64,
    pub acd_retries: u32,
    /// Palette size of SlackGeneration; None means Delta.
    pub chi: Option<u32>,
    pub activation: f64,
    /// Overrides q(n) = 10 (log2 log2 n)^3.
    pub q_fn: Option<f64>,
    /// Constant c of the slack-set sampling probability.
    pub lll_c: f64,
    /// Constant c' of two-set slack coloring (recorded; the palettes are fixed halves).
    pub lll_c_prime: f64,
    /// t_high = t_high_factor * log2 n.
    pub t_high_factor: f64,
    pub t_low: usize,
    pub retry_cap: u32,
    pub lll_cap: usize,
    pub seed: u64,
    pub strict_budget: bool,
    pub c_b: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            eps: 1.0 / 172.0,
            zeta: 1.0 / 64.0,
            acd_retries: 5,
            chi: None,
            activation: 1.0 / 20.0,
            q_fn: None,
            lll_c: 2.0,
            lll_c_prime: 8.0,
            t_high_factor: 48.0,
            t_low: 3,
            retry_cap: 20,
            lll_cap: 200,
            seed: 0,
            strict_budget: true,
            c_b: 4.0,
        }
    }
}

impl RunConfig {
    pub fn t_high(&self, n: usize) -> f64 {
        self.t_high_factor * (n.max(2) as f64).log2()
    }

    pub fn q(&self, n: usize) -> f64 {
        self.q_fn.unwrap_or_else(|| q_fn(n))
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::IllegalSpec(format!("eps {} outside (0, 1)", self.eps)));
        }
        if (self.t_low as f64) > self.t_high(n) {
            return Err(Error::IllegalSpec(format!("t_low {} above t_high {:.1}", self.t_low, self.t_high(n))));
        }
        if !(self.activation > 0.0 && self.activation <= 1.0) {
            return Err(Error::IllegalSpec(format!("activation {} outside (0, 1]", self.activation)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Delta >= t_high: plain SlackGeneration for sparse and ordinary nodes.
    Large,
    /// t_low <= Delta < t_high: the sampling-instance path.
    Small,
    /// Delta < t_low: centralized oracle.
    Fallback,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Triple {
    pub ac: usize,
    pub x: NodeId,
    pub y: NodeId,
    pub z: NodeId,
}

/// The extreme value a check reached, its bound, and how often it ran.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub worst: f64,
    pub bound: f64,
    /// "le": worst is the maximum seen and must stay <= bound; "ge": minimum, >= bound.
    pub kind: &'static str,
    pub evaluations: u64,
}

/// Everything a run records besides the coloring.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Trace {
    pub regime: Option<Regime>,
    pub flags: Vec<String>,
    pub retries: BTreeMap<String, u32>,
    pub checks: BTreeMap<String, Check>,
    pub measures: BTreeMap<String, f64>,
    pub lll: BTreeMap<String, SolveStats>,
    pub d1lc: D1lcStats,
    pub pairs: BTreeMap<String, PairStats>,
    pub triples: Vec<Triple>,
    pub acd_stats: Option<AcdStats>,
    pub ac_count: usize,
    pub classes: BTreeMap<String, usize>,
    pub ac_types: BTreeMap<String, usize>,
    pub fallback: bool,
}

impl Trace {
    fn record(&mut self, name: &str, value: f64, bound: f64, kind: &'static str) -> Result<()> {
        let ok = if kind == "le" { value <= bound + 1e-9 } else { value >= bound - 1e-9 };
        let c = self.checks.entry(name.to_string()).or_insert(Check { worst: value, bound, kind, evaluations: 0 });
        c.evaluations += 1;
        c.bound = bound;
        c.worst = if kind == "le" { c.worst.max(value) } else { c.worst.min(value) };
        if ok {
            Ok(())
        } else {
            Err(Error::Structural(format!("check {name}: {value} vs bound {bound} ({kind})")))
        }
    }

    pub fn check_le(&mut self, name: &str, value: f64, bound: f64) -> Result<()> {
        self.record(name, value, bound, "le")
    }

    pub fn check_ge(&mut self, name: &str, value: f64, bound: f64) -> Result<()> {
        self.record(name, value, bound, "ge")
    }

    pub fn flag(&mut self, s: impl Into<String>) {
        self.flags.push(s.into());
    }

    fn retry(&mut self, name: &str) {
        *self.retries.entry(name.to_string()).or_insert(0) += 1;
    }
}

pub struct RunOutcome {
    pub colors: Vec<u32>,
    pub trace: Trace,
    pub audit: crate::congest::BandwidthReport,
    pub acd: Option<AcDecomposition>,
    pub classification: Option<Classification>,
}

/// Errors after which the run completes with the Brooks oracle instead.
fn escalates(e: &Error) -> bool {
    matches!(
        e,
        Error::NotGraytone(_) | Error::D1lcStalled(_) | Error::IterationCapExceeded { .. } | Error::SlackFailed(_) | Error::MatchingTooSmall { .. } | Error::DecompositionFailed(_)
    )
}

pub fn regime_of(g: &Graph, cfg: &RunConfig) -> Regime {
    let d = g.delta();
    if d < cfg.t_low {
        Regime::Fallback
    } else if d as f64 >= cfg.t_high(g.n()) {
        Regime::Large
    } else {
        Regime::Small
    }
}

/// The single entry point: a proper coloring with colors 1..=Delta.
pub fn run(g: &Graph, cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate(g.n())?;
    let verdict = validate_delta_colorable(g);
    if !verdict.accepted() {
        return Err(Error::NotColorable(format!("{verdict:?}")));
    }
    let mut net = Network::new(g, NetConfig { c_b: cfg.c_b, strict: cfg.strict_budget, seed: cfg.seed });
    let mut st = ColoringState::new(g);
    let mut tr = Trace::default();
    let regime = regime_of(g, cfg);
    tr.regime = Some(regime);
    if regime == Regime::Fallback {
        tr.flag(format!("fallback_oracle: Delta {} below t_low {}", g.delta(), cfg.t_low));
        tr.fallback = true;
        let colors = brooks_color(g)?;
        return Ok(RunOutcome { colors, trace: tr, audit: net.audit(), acd: None, classification: None });
    }
    let mut acd_out = None;
    let mut cls_out = None;
    let res = phases(&mut net, &mut st, &mut tr, cfg, regime, &mut acd_out, &mut cls_out);
    let colors = match res {
        Ok(()) => {
            if let Some(v) = st.uncolored().first() {
                return Err(Error::Structural(format!("node {v} left uncolored")));
            }
            st.colors
        }
        Err(e) if escalates(&e) => {
            tr.flag(format!("brooks_fallback: {e}"));
            tr.fallback = true;
            brooks_color(g)?
        }
        Err(e) => return Err(e),
    };
    Ok(RunOutcome { colors, trace: tr, audit: net.audit(), acd: acd_out, classification: cls_out })
}

fn phases(net: &mut Network, st: &mut ColoringState, tr: &mut Trace, cfg: &RunConfig, regime: Regime, acd_out: &mut Option<AcDecomposition>, cls_out: &mut Option<Classification>) -> Result<()> {
    let g = net.graph();
    net.set_phase("acd");
    let acd = match compute_acd(net, cfg.eps, cfg.zeta, cfg.acd_retries) {
        Ok((acd, stats)) => {
            tr.acd_stats = Some(stats);
            acd
        }
        Err(Error::DeltaTooSmall { eps, delta }) => {
            tr.flag(format!("sparse_only: eps*Delta/4 < 1 (eps {eps:.5}, Delta {delta}); every node treated as sparse"));
            AcDecomposition::all_sparse(g.n(), cfg.eps)
        }
        Err(e) => return Err(e),
    };
    tr.ac_count = acd.cliques.len();
    net.set_phase("classify");
    let q = cfg.q(g.n());
    let cls = classify(net, &acd, q)?;
    tr.classes = cls.partition.counts();
    for a in &cls.infos {
        *tr.ac_types.entry(format!("{:?}", a.ac_type).to_lowercase()).or_insert(0) += 1;
    }
    for a in cls.infos.iter().filter(|a| a.ac_type == AcType::Ordinary) {
        tr.check_ge("matching_size_over_delta", a.matching.len() as f64 / g.delta() as f64, 0.1)?;
    }
    *acd_out = Some(acd.clone());
    *cls_out = Some(cls.clone());

    net.set_phase("phase2");
    match regime {
        Regime::Large => phase2_large(net, st, tr, cfg, &acd, &cls)?,
        _ => phase2_small(net, st, tr, cfg, &acd, &cls)?,
    }
    net.set_phase("phase3");
    phase3_nice(net, st, tr, &acd, &cls)?;
    net.set_phase("phase4");
    phase4_levels(net, st, tr, &cls)?;
    net.set_phase("phase5");
    phase5_max(net, st, tr, &acd, &cls)?;
    Ok(())
}

/// Graytone completion of `set`, escalating to layered coloring.
fn complete(net: &mut Network, st: &mut ColoringState, tr: &mut Trace, set: &[NodeId], label: &str) -> Result<()> {
    match graytone_color(net, st, set) {
        Ok(s) => {
            tr.d1lc.add(&s);
            Ok(())
        }
        Err(Error::NotGraytone(v)) => {
            tr.flag(format!("{label}: node {v} not graytone; layered coloring"));
            let s = layered_color(net, st, set)?;
            tr.d1lc.add(&s.d1lc);
            Ok(())
        }
        Err(e) => Err(e),
    }
}

/// Sparse nodes lacking unit slack in G[V* u O], and ordinary ACs without an
/// uncolored node with unit slack there. These predict (dagger) and (double
/// dagger): coloring O first can only trade palette for uncolored degree.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SlackCheck {
    pub sparse_without: Vec<NodeId>,
    pub acs_without: Vec<usize>,
}

pub fn slack_check(g: &Graph, st: &ColoringState, sparse: &[NodeId], acd: &AcDecomposition, ordinary: &[usize], set: &[NodeId]) -> SlackCheck {
    let mask = mask_of(g.n(), set);
    let sparse_without = sparse.iter().copied().filter(|&v| !st.is_colored(v) && st.slack(g, v, &mask) < 1).collect();
    let acs_without = ordinary
        .iter()
        .copied()
        .filter(|&i| !acd.cliques[i].iter().any(|&v| !st.is_colored(v) && st.slack(g, v, &mask) >= 1))
        .collect();
    SlackCheck { sparse_without, acs_without }
}

pub fn phase2_large(net: &mut Network, st: &mut ColoringState, tr: &mut Trace, cfg: &RunConfig, acd: &AcDecomposition, cls: &Classification) -> Result<()> {
    let g = net.graph();
    let sparse = cls.partition.sparse.clone();
    let ordinary = cls.partition.ordinary.clone();
    let mut s: Vec<NodeId> = sparse.iter().chain(&ordinary).copied().collect();
    s.sort_unstable();
    if s.is_empty() {
        return Ok(());
    }
    let ord_acs: Vec<usize> = (0..cls.infos.len()).filter(|&i| cls.infos[i].ac_type == AcType::Ordinary).collect();
    let chi = cfg.chi.unwrap_or(g.delta() as u32);
    let mut attempt = 0;
    loop {
        attempt += 1;
        let kept = slack_generation(net, st, &s, chi, cfg.activation)?;
        let sc = slack_check(g, st, &sparse, acd, &ord_acs, &s);
        if attempt == 1 {
            tr.measures.insert("slackgen_sparse_without_slack".into(), sc.sparse_without.len() as f64 / sparse.len().max(1) as f64);
            tr.measures.insert("slackgen_acs_without_toehold".into(), sc.acs_without.len() as f64 / ord_acs.len().max(1) as f64);
        }
        if sc.sparse_without.is_empty() && sc.acs_without.is_empty() {
            break;
        }
        if attempt >= cfg.retry_cap {
            tr.flag(format!("phase2_large: slack properties still fail after {attempt} attempts ({} sparse, {} ACs)", sc.sparse_without.len(), sc.acs_without.len()));
            break;
        }
        tr.retry("slack_generation");
        for v in kept {
            st.colors[v as usize] = 0;
        }
    }
    complete(net, st, tr, &ordinary, "phase2_ordinary")?;
    complete(net, st, tr, &sparse, "phase2_sparse")?;
    Ok(())
}

/// Non-edges of G[N(v) cap keep].
fn non_edges_among(g: &Graph, v: NodeId, keep: &[bool], mark: &mut [bool]) -> u64 {
    let nb: Vec<NodeId> = g.neighbors(v).iter().copied().filter(|&w| keep[w as usize]).collect();
    for &w in &nb {
        mark[w as usize] = true;
    }
    let k = nb.len() as u64;
    let mut edges2 = 0u64;
    for &w in &nb {
        edges2 += g.neighbors(w).iter().filter(|&&x| mark[x as usize]).count() as u64;
    }
    for &w in &nb {
        mark[w as usize] = false;
    }
    k * k.saturating_sub(1) / 2 - edges2 / 2
}

fn solve_named(tr: &mut Trace, net: &mut Network, name: &str, inst: &lll::LllInstance, seed: u64, cap: usize) -> Result<Vec<u32>> {
    let (a, stats) = lll::solve_resampling(inst, seed, cap, false)?;
    let loc = inst.locality(net.graph()).unwrap_or(3) as u64;
    lll::charge_solve(net, &stats, loc)?;
    tr.lll.insert(name.to_string(), stats);
    Ok(a)
}

pub fn phase2_small(net: &mut Network, st: &mut ColoringState, tr: &mut Trace, cfg: &RunConfig, acd: &AcDecomposition, cls: &Classification) -> Result<()> {
    let g = net.graph();
    let d = g.delta();
    let df = d as f64;
    let q = cfg.q(g.n());
    let sparse = cls.partition.sparse.clone();
    let ordinary = cls.partition.ordinary.clone();
    let sub_of = |v: NodeId| acd.ac_of(v).and_then(|i| cls.infos[i].subtype);
    let o_small: Vec<NodeId> = ordinary.iter().copied().filter(|&v| sub_of(v) == Some(Subtype::Small)).collect();
    let o_imp: Vec<NodeId> = ordinary.iter().copied().filter(|&v| sub_of(v) == Some(Subtype::LargeImportant)).collect();
    let o_unimp: Vec<NodeId> = ordinary.iter().copied().filter(|&v| sub_of(v) == Some(Subtype::LargeUnimportant)).collect();
    let mut u: Vec<NodeId> = sparse.iter().chain(&ordinary).copied().collect();
    u.sort_unstable();
    if u.is_empty() {
        return Ok(());
    }
    let in_u = mask_of(g.n(), &u);
    let ord_acs: Vec<usize> = (0..cls.infos.len()).filter(|&i| cls.infos[i].ac_type == AcType::Ordinary).collect();

    // Step 1: slack for sparse and small nodes.
    let mut u_prime: Vec<NodeId> = sparse.iter().chain(&o_small).copied().filter(|&v| g.neighbors(v).iter().all(|&w| in_u[w as usize])).collect();
    u_prime.sort_unstable();
    let matchings: Vec<Vec<(NodeId, NodeId)>> = ord_acs.iter().map(|&i| cls.infos[i].matching.clone()).collect();
    let prm = SlackParams::with_constant(g.n(), d, cfg.lll_c);
    tr.measures.insert("slack_p".into(), prm.p);
    tr.measures.insert("slack_mu".into(), prm.mu);
    let l1 = lll::build_slack_set_lll(g, &u, &u_prime, &u, &matchings, prm);
    match solve_named(tr, net, "slack_s1", &l1.inst, cfg.seed ^ 1, cfg.lll_cap) {
        Ok(a1) => {
            let s1: Vec<NodeId> = u.iter().copied().filter(|&v| l1.var_of[v as usize].is_some_and(|x| a1[x] == 1)).collect();
            let in_s1 = mask_of(g.n(), &s1);
            let u2: Vec<NodeId> = u.iter().copied().filter(|&v| !in_s1[v as usize]).collect();
            let in_u2 = mask_of(g.n(), &u2);
            let mut mark = vec![false; g.n()];
            for &v in &u_prime {
                let before = non_edges_among(g, v, &in_u, &mut mark);
                let after = non_edges_among(g, v, &in_u2, &mut mark);
                if before > 0 {
                    tr.check_ge("s2_non_edge_supply_ratio", after as f64 / before as f64, 0.5)?;
                }
            }
            let l2 = lll::build_slack_set_lll(g, &u2, &u_prime, &u, &matchings, prm);
            let a2 = solve_named(tr, net, "slack_s2", &l2.inst, cfg.seed ^ 2, cfg.lll_cap)?;
            let s2: Vec<NodeId> = u2.iter().copied().filter(|&v| l2.var_of[v as usize].is_some_and(|x| a2[x] == 1)).collect();
            let w: Vec<NodeId> = u_prime.iter().copied().filter(|&v| g.degree(v) == d && !st.is_colored(v)).collect();
            if !w.is_empty() {
                let before: Vec<bool> = (0..g.n()).map(|v| st.is_colored(v as NodeId)).collect();
                match lll::two_set_slack_color(net, st, &s1, &s2, &w, (d / 2) as u32, cfg.retry_cap) {
                    Ok(s) => {
                        tr.retries.insert("two_set_slack".into(), s.attempts - 1);
                    }
                    Err(Error::SlackFailed(f)) => tr.flag(format!("two_set_slack: {} W-nodes without slack after cap", f.len())),
                    Err(e) => return Err(e),
                }
                let newly = |v: NodeId| st.is_colored(v) && !before[v as usize];
                let per_nb = u.iter().map(|&v| g.neighbors(v).iter().filter(|&&x| newly(x)).count()).max().unwrap_or(0);
                tr.check_le("step1_colored_per_neighborhood", per_nb as f64, 8.0 * prm.mu)?;
                for m in &matchings {
                    let k = m.iter().flat_map(|&(h, t)| [h, t]).collect::<BTreeSet<_>>().into_iter().filter(|&x| newly(x)).count();
                    tr.check_le("step1_colored_per_matching", k as f64, 8.0 * prm.mu)?;
                }
            }
        }
        Err(Error::IterationCapExceeded { iterations, violating }) => {
            // Below the scale where the instance is solvable: plain trial instead.
            tr.flag(format!("slack_lll: {} events still violated after {iterations} iterations; SlackGeneration used instead", violating.len()));
            slack_generation(net, st, &u, d as u32, cfg.activation)?;
        }
        Err(e) => return Err(e),
    }

    // Steps 2-4: triples for important ACs.
    let important: Vec<ImportantAc> = ord_acs
        .iter()
        .filter(|&&i| cls.infos[i].subtype == Some(Subtype::LargeImportant))
        .map(|&i| ImportantAc { ac: i, arcs: cls.infos[i].matching.clone() })
        .collect();
    if !important.is_empty() {
        let x: Vec<NodeId> = ordinary.iter().copied().filter(|&v| !st.is_colored(v) && sub_of(v).is_some_and(|s| s.is_large())).collect();
        triples_and_pairs(net, st, tr, cfg, acd, &ordinary, &x, &important, q)?;
    }

    // Step 5.
    let large_node = |v: NodeId| sub_of(v).is_some_and(|s| s.is_large());
    for &i in &ord_acs {
        if cls.infos[i].subtype == Some(Subtype::LargeUnimportant) {
            let outside = cls.infos[i].matching.iter().filter(|&&(_, t)| !large_node(t) && !st.is_colored(t)).count();
            tr.check_ge("unimportant_tails_outside_large", outside as f64, df / 60.0)?;
        }
    }
    complete(net, st, tr, &o_unimp, "step5_unimportant")?;
    let mut rest: Vec<NodeId> = o_imp.iter().chain(&o_small).chain(&sparse).copied().collect();
    rest.sort_unstable();
    complete(net, st, tr, &rest, "step5_rest")?;
    Ok(())
}

/// x_C: lowest-id uncolored node of C, not y, not adjacent to z, not in Z.
/// Returns it with the number of qualifying candidates.
pub fn select_triple_xc(g: &Graph, c: &[NodeId], y: NodeId, z: NodeId, in_z: &[bool], st: &ColoringState) -> Result<(NodeId, usize)> {
    let cand: Vec<NodeId> = c.iter().copied().filter(|&v| v != y && !st.is_colored(v) && !in_z[v as usize] && !g.has_edge(v, z) && g.has_edge(v, y)).collect();
    cand.first().map(|&x| (x, cand.len())).ok_or(Error::NoCandidate(c.first().copied().unwrap_or(0) as usize))
}

#[allow(clippy::too_many_arguments)]
fn triples_and_pairs(net: &mut Network, st: &mut ColoringState, tr: &mut Trace, cfg: &RunConfig, acd: &AcDecomposition, ordinary: &[NodeId], x: &[NodeId], important: &[ImportantAc], q: f64) -> Result<()> {
    let g = net.graph();
    let d = g.delta();
    let df = d as f64;
    let in_x = mask_of(g.n(), &x);
    let mut usable = Vec::new();
    for c in important {
        if c.arcs.iter().any(|&(h, t)| in_x[h as usize] && in_x[t as usize]) {
            usable.push(c.clone());
        } else {
            tr.flag(format!("L1: important AC {} has no arc inside X; no triple", c.ac));
        }
    }
    let l1 = lll::build_l1(g, x, ordinary, &usable);
    let a = solve_named(tr, net, "L1", &l1.inst, cfg.seed ^ 3, cfg.lll_cap)?;
    let z: Vec<NodeId> = x.iter().copied().filter(|&v| l1.var_of[v as usize].is_some_and(|k| a[k] == 1)).collect();
    let in_z = mask_of(g.n(), &z);
    for &v in ordinary {
        let k = g.neighbors(v).iter().filter(|&&w| in_z[w as usize]).count();
        tr.check_le("z_per_neighborhood", k as f64, df / 10.0)?;
    }
    let useful = lll::useful_arcs(&usable, &in_x, &in_z);
    let xt = lll::l1_threshold(d);
    tr.measures.insert("l1_threshold".into(), xt);
    let l2 = lll::split_z_l2(g, &z, &useful, &usable, xt);
    let a2 = solve_named(tr, net, "L2", &l2.inst, cfg.seed ^ 4, cfg.lll_cap)?;
    let z1: Vec<NodeId> = z.iter().copied().filter(|&v| l2.var_of[v as usize].is_some_and(|k| a2[k] == 0)).collect();
    let in_z1 = mask_of(g.n(), &z1);
    for arcs in &useful {
        let h1 = arcs.iter().filter(|&&(_, t)| in_z1[t as usize]).count();
        tr.check_ge("useful_arcs_per_half", h1.min(arcs.len() - h1) as f64, xt / 3.0)?;
    }
    let p3 = (q / df).min(1.0);
    tr.measures.insert("p3".into(), p3);
    let l3 = lll::build_l3(&useful, &in_z1, p3);
    tr.measures.insert("l3_dependency_degree".into(), l3.inst.dependency_degree() as f64);
    let a3 = solve_named(tr, net, "L3", &l3.inst, cfg.seed ^ 5, cfg.lll_cap)?;
    let succ = lll::successful_arcs(&l3, &a3, usable.len());
    let mut triples = Vec::new();
    let mut used = vec![false; g.n()];
    for (k, c) in usable.iter().enumerate() {
        let (y, zc) = succ[k].ok_or_else(|| Error::Structural(format!("L3 output leaves AC {} without a successful arc", c.ac)))?;
        let (xc, cands) = select_triple_xc(g, &acd.cliques[c.ac], y, zc, &in_z, st).map_err(|_| Error::NoCandidate(c.ac))?;
        tr.check_ge("triple_candidates_over_delta", cands as f64 / df, 0.5)?;
        for v in [xc, y, zc] {
            if used[v as usize] {
                return Err(Error::Structural(format!("triples overlap at node {v}")));
            }
            used[v as usize] = true;
        }
        triples.push(Triple { ac: c.ac, x: xc, y, z: zc });
    }
    net.charge(2, net.widths().id)?;
    let pairs: Vec<PairNode> = triples.iter().map(|t| PairNode { a: t.x, b: t.z, relays: vec![t.y] }).collect();
    let (_, hp) = build_hp(g, st, &pairs)?;
    tr.check_le("hp_max_degree", hp.max_degree as f64, df / 9.0)?;
    tr.check_le("hp_z_induced_degree", hp.z_induced_degree as f64, df / 10.0)?;
    tr.check_ge("hp_min_list", hp.min_list as f64, 4.0 * df / 5.0)?;
    tr.check_ge("hp_min_joint_list", hp.min_joint as f64, 3.0 * df / 5.0)?;
    let ps = pair_color(net, st, &pairs, PairMode::Independent, true)?;
    let (tries, wins) = ps.per_iteration.iter().fold((0, 0), |(a, b), &(s, c)| (a + s, b + c));
    if tries > 0 {
        tr.measures.insert("pair_success_rate".into(), wins as f64 / tries as f64);
    }
    tr.pairs.insert("triples".into(), ps);
    for t in &triples {
        if st.color(t.x) != st.color(t.z) || st.is_colored(t.y) {
            return Err(Error::Structural(format!("triple of AC {} not same-colored around an uncolored y", t.ac)));
        }
    }
    tr.triples = triples;
    Ok(())
}

pub fn phase3_nice(net: &mut Network, st: &mut ColoringState, tr: &mut Trace, acd: &AcDecomposition, cls: &Classification) -> Result<()> {
    let g = net.graph();
    let d = g.delta();
    let mut pairs = Vec::new();
    for (i, a) in cls.infos.iter().enumerate() {
        if !a.ac_type.is_nice() {
            continue;
        }
        let c = &acd.cliques[i];
        let has_special = c.iter().any(|&v| cls.partition.class_of(v) == NodeClass::Special && !st.is_colored(v));
        let has_low = c.iter().any(|&v| g.degree(v) < d);
        if has_special || has_low {
            continue;
        }
        // Hollow: same-color the lowest non-edge.
        let members: Vec<NodeId> = c.iter().copied().filter(|&v| cls.partition.class_of(v) == NodeClass::Nice).collect();
        let in_c = mask_of(g.n(), c);
        let found = members.iter().find_map(|&u| members.iter().find(|&&w| w > u && !g.has_edge(u, w)).map(|&w| (u, w)));
        let Some((u, w)) = found else {
            tr.flag(format!("phase3: nice AC {i} has no toehold"));
            continue;
        };
        let common: Vec<NodeId> = g.neighbors(u).iter().copied().filter(|&x| in_c[x as usize] && g.has_edge(x, w)).collect();
        tr.check_ge("hollow_pair_common_neighbors", common.len() as f64, d as f64 / 2.0)?;
        pairs.push(PairNode { a: u, b: w, relays: common });
    }
    if !pairs.is_empty() {
        let ps = pair_color(net, st, &pairs, PairMode::Joint, false)?;
        tr.pairs.insert("hollow".into(), ps);
    }
    let nice: Vec<NodeId> = cls.partition.nice.iter().copied().filter(|&v| !st.is_colored(v)).collect();
    complete(net, st, tr, &nice, "phase3")
}

pub fn phase4_levels(net: &mut Network, st: &mut ColoringState, tr: &mut Trace, cls: &Classification) -> Result<()> {
    for (&level, nodes) in &cls.partition.difficult {
        let Level::Finite(l) = level else { continue };
        for a in cls.infos.iter().filter(|a| a.level == Some(level)) {
            let s = a.special.expect("difficult ACs have special nodes");
            if st.is_colored(s) {
                return Err(Error::Structural(format!("special node {s} of a level-{l} AC colored before its level")));
            }
        }
        // No node of a higher level is colored yet.
        for (&other, ns) in &cls.partition.difficult {
            if other > level && ns.iter().any(|&v| st.is_colored(v)) {
                return Err(Error::Structural(format!("level {other} node colored before level {l}")));
            }
        }
        complete(net, st, tr, nodes, &format!("phase4_level_{l}"))?;
    }
    Ok(())
}

pub fn phase5_max(net: &mut Network, st: &mut ColoringState, tr: &mut Trace, acd: &AcDecomposition, cls: &Classification) -> Result<()> {
    let g = net.graph();
    let d = g.delta() as i64;
    let mut by_special: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    for (i, a) in cls.infos.iter().enumerate() {
        if a.level == Some(Level::Infinite) {
            by_special.entry(a.special.unwrap()).or_default().push(i);
        }
    }
    let mut pairs = Vec::new();
    let mut type1 = Vec::new();
    let mut e_set = Vec::new();
    for (&s, acs) in &by_special {
        if st.is_colored(s) {
            return Err(Error::PairFormationFailed(format!("special node {s} already colored")));
        }
        let in_c = |i: usize, v: NodeId| acd.part[v as usize] == Some(i as u32);
        if acs.len() == 1 {
            let i = acs[0];
            let c = &acd.cliques[i];
            let u = *c.iter().find(|&&v| !g.has_edge(s, v)).ok_or_else(|| Error::PairFormationFailed(format!("special {s} adjacent to all of AC {i}")))?;
            let relays: Vec<NodeId> = g.neighbors(s).iter().copied().filter(|&x| in_c(i, x) && g.has_edge(x, u)).collect();
            if relays.is_empty() {
                return Err(Error::PairFormationFailed(format!("type-1 pair ({s}, {u}) has no common neighbor")));
            }
            type1.push((pairs.len(), i));
            pairs.push(PairNode { a: s, b: u, relays });
        } else {
            let mut two = acs.clone();
            two.sort_by_key(|&i| (cls.infos[i].e, i));
            let (c1, c2) = (two[0], two[1]);
            let (e1, e2) = (cls.infos[c1].e, cls.infos[c2].e);
            let w1 = *g.neighbors(s).iter().find(|&&v| in_c(c1, v)).ok_or_else(|| Error::PairFormationFailed(format!("special {s} has no neighbor in AC {c1}")))?;
            let cands: Vec<NodeId> = g.neighbors(s).iter().copied().filter(|&v| in_c(c2, v) && !g.has_edge(v, w1)).collect();
            tr.check_ge("type2_candidates_minus_bound", cands.len() as f64 - (2 * e2 - e1) as f64, 0.0)?;
            let w2 = *cands.first().ok_or_else(|| Error::PairFormationFailed(format!("no type-2 partner for special {s}")))?;
            pairs.push(PairNode { a: w1, b: w2, relays: vec![s] });
            e_set.push(s);
        }
    }
    // Conflicts of a type-1 pair: colored neighbors plus nodes of adjacent pairs.
    let mut in_pair = vec![false; g.n()];
    for p in &pairs {
        in_pair[p.a as usize] = true;
        in_pair[p.b as usize] = true;
    }
    for &(k, i) in &type1 {
        let p = &pairs[k];
        let mut conf = BTreeSet::new();
        for x in [p.a, p.b] {
            for &w in g.neighbors(x) {
                if w != p.a && w != p.b && (st.is_colored(w) || in_pair[w as usize]) {
                    conf.insert(w);
                }
            }
        }
        tr.check_le("type1_conflicts_minus_bound", conf.len() as f64 - (d as i64 - cls.infos[i].e) as f64, 0.0)?;
    }
    if !pairs.is_empty() {
        net.charge(2, net.widths().id)?;
        let ps = pair_color(net, st, &pairs, PairMode::Joint, false)?;
        tr.pairs.insert("phase5".into(), ps);
    }
    let dinf: Vec<NodeId> = cls.partition.difficult.get(&Level::Infinite).cloned().unwrap_or_default();
    complete(net, st, tr, &dinf, "phase5_difficult")?;
    let mut rest: Vec<NodeId> = cls.partition.special.iter().copied().filter(|&v| !st.is_colored(v)).collect();
    rest.extend(e_set.iter().copied().filter(|&v| !st.is_colored(v)));
    rest.sort_unstable();
    rest.dedup();
    complete(net, st, tr, &rest, "phase5_special")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate, GeneratorSpec};
    use crate::graph::check_coloring;

    fn proper(g: &Graph, cfg: &RunConfig) -> RunOutcome {
        let out = run(g, cfg).unwrap();
        check_coloring(g, &out.colors).unwrap();
        assert!(out.colors.iter().all(|&c| c >= 1 && c as usize <= g.delta()));
        out
    }

    #[test]
    fn nice_clique_same_colors_the_non_edge() {
        let g = generate(&GeneratorSpec::nice_clique(5)).unwrap();
        let out = proper(&g, &RunConfig::default());
        let (u, w) = (0..g.n() as NodeId)
            .flat_map(|u| (u + 1..g.n() as NodeId).map(move |w| (u, w)))
            .find(|&(u, w)| !g.has_edge(u, w))
            .unwrap();
        assert_eq!(out.colors[u as usize], out.colors[w as usize]);
    }

    #[test]
    fn hollow_acs_same_color_their_non_edge() {
        let g = crate::graph::fixtures::hollow_pair(16);
        let out = proper(&g, &RunConfig { eps: 0.25, seed: 3, ..Default::default() });
        let c = &out.trace.checks["hollow_pair_common_neighbors"];
        assert_eq!(c.evaluations, 2);
        assert_eq!(out.colors[0], out.colors[1]);
        assert_eq!(out.colors[17], out.colors[18]);
    }

    #[test]
    fn small_delta_uses_oracle() {
        let g = crate::graph::fixtures::petersen();
        let cfg = RunConfig { t_low: 4, ..Default::default() };
        let out = proper(&g, &cfg);
        assert_eq!(out.trace.regime, Some(Regime::Fallback));
        assert!(out.trace.fallback);
    }

    #[test]
    fn random_regular_sparse_path() {
        let g = generate(&GeneratorSpec::random_regular(16, 300, 4)).unwrap();
        let out = proper(&g, &RunConfig { seed: 4, ..Default::default() });
        assert!(!out.trace.fallback, "{:?}", out.trace.flags);
    }

    #[test]
    fn difficult_chain_levels() {
        let g = generate(&GeneratorSpec::difficult_chain(33, 3, 0.25, 3)).unwrap();
        let out = proper(&g, &RunConfig { eps: 0.25, seed: 3, ..Default::default() });
        assert!(!out.trace.fallback, "{:?}", out.trace.flags);
    }

    #[test]
    fn rejects_complete_graph() {
        let g = crate::graph::fixtures::complete(6);
        assert!(matches!(run(&g, &RunConfig::default()), Err(Error::NotColorable(_))));
    }

    #[test]
    fn deterministic() {
        let g = generate(&GeneratorSpec::random_regular(12, 200, 9)).unwrap();
        let cfg = RunConfig { seed: 9, ..Default::default() };
        assert_eq!(run(&g, &cfg).unwrap().colors, run(&g, &cfg).unwrap().colors);
    }
}
