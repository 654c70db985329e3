//! AC typing (easy, difficult, nice, ordinary), special nodes, levels, the
//! node partition, per-AC boundary matchings and ordinary subtypes.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;

use crate::acd::AcDecomposition;
use crate::congest::{Aggregate, Field, Msg, Network};
use crate::error::{Error, Result};
use crate::graph::{neighborhood_non_edges, Graph, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AcType {
    Easy,
    Difficult,
    Nice,
    Ordinary,
}

impl AcType {
    /// Easy ACs are nice too.
    pub fn is_nice(self) -> bool {
        matches!(self, AcType::Easy | AcType::Nice)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Level {
    Finite(u32),
    Infinite,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Finite(l) => write!(f, "{l}"),
            Level::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Subtype {
    Small,
    LargeImportant,
    LargeUnimportant,
}

impl Subtype {
    pub fn is_large(self) -> bool {
        self != Subtype::Small
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AcInfo {
    pub size: usize,
    /// Delta - |C| + 1; negative only for oversized easy ACs.
    pub e: i64,
    pub ac_type: AcType,
    pub special: Option<NodeId>,
    pub level: Option<Level>,
    /// Arcs (head in C, tail outside).
    pub matching: Vec<(NodeId, NodeId)>,
    pub subtype: Option<Subtype>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NodeClass {
    Special,
    Difficult(Level),
    Nice,
    Ordinary,
    Sparse,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct NodePartition {
    /// Special nodes outside difficult ACs.
    pub special: Vec<NodeId>,
    pub difficult: BTreeMap<Level, Vec<NodeId>>,
    pub nice: Vec<NodeId>,
    pub ordinary: Vec<NodeId>,
    pub sparse: Vec<NodeId>,
    pub class: Vec<Option<NodeClass>>,
}

impl NodePartition {
    pub fn class_of(&self, v: NodeId) -> NodeClass {
        self.class[v as usize].expect("partition covers every node")
    }

    /// Sizes of the classes, for reports.
    pub fn counts(&self) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        m.insert("special".into(), self.special.len());
        m.insert("nice".into(), self.nice.len());
        m.insert("ordinary".into(), self.ordinary.len());
        m.insert("sparse".into(), self.sparse.len());
        for (l, v) in &self.difficult {
            m.insert(format!("difficult_{l}"), v.len());
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Classification {
    pub infos: Vec<AcInfo>,
    pub partition: NodePartition,
}

impl Classification {
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (i, a) in self.infos.iter().enumerate() {
            let ty = match a.ac_type {
                AcType::Easy => "easy",
                AcType::Difficult => "difficult",
                AcType::Nice => "nice",
                AcType::Ordinary => "ordinary",
            };
            let special = a.special.map_or("-".to_string(), |v| v.to_string());
            let level = a.level.map_or("-".to_string(), |l| l.to_string());
            let sub = match a.subtype {
                None => "-",
                Some(Subtype::Small) => "small",
                Some(Subtype::LargeImportant) => "large_important",
                Some(Subtype::LargeUnimportant) => "large_unimportant",
            };
            let _ = writeln!(s, "C {i}: size={} e={} type={ty} special={special} level={level} subtype={sub}", a.size, a.e);
        }
        s
    }
}

fn leader(c: &[NodeId]) -> NodeId {
    c[0]
}

/// Types every AC and picks special nodes (lowest-id intrusive neighbor).
pub fn classify_acs(net: &mut Network, acd: &AcDecomposition) -> Result<Vec<AcInfo>> {
    let g = net.graph();
    let d = g.delta();
    // Every node announces its AC index once.
    net.charge(1, net.widths().id)?;
    let inside: Vec<usize> = g
        .nodes()
        .map(|v| match acd.part[v as usize] {
            Some(i) => g.neighbors(v).iter().filter(|&&w| acd.part[w as usize] == Some(i)).count(),
            None => 0,
        })
        .collect();
    let id_w = net.widths().id;
    let sizes = net.in_parallel(acd.cliques.iter(), |net, c| {
        let ones: Vec<(NodeId, Vec<u64>)> = c.iter().map(|&v| (v, vec![1])).collect();
        Ok(net.clique_aggregate(c, leader(c), &ones, Aggregate::Sum, id_w)?.0[0] as usize)
    })?;
    let easy = net.in_parallel(acd.cliques.iter().zip(&sizes), |net, (c, &size)| {
        let flags: Vec<(NodeId, Vec<u64>)> = c
            .iter()
            .map(|&v| (v, vec![u64::from(g.degree(v) < d || inside[v as usize] + 1 < size)]))
            .collect();
        Ok(net.clique_aggregate(c, leader(c), &flags, Aggregate::Max, 1)?.0[0] == 1)
    })?;
    // Leaders push e_C down the tree and members forward it outside; outside
    // nodes answer with a flag if they are intrusive, members convergecast the min id.
    net.charge(5, net.widths().id)?;
    let mut infos = Vec::with_capacity(acd.cliques.len());
    let mut overlap: Vec<u32> = vec![0; g.n()];
    let mut specials = Vec::new();
    for (i, c) in acd.cliques.iter().enumerate() {
        let size = sizes[i];
        let e = d as i64 - size as i64 + 1;
        let mut special = None;
        if !easy[i] {
            let mut touched = Vec::new();
            for &v in c {
                for &w in g.neighbors(v) {
                    if acd.part[w as usize] != Some(i as u32) {
                        if overlap[w as usize] == 0 {
                            touched.push(w);
                        }
                        overlap[w as usize] += 1;
                    }
                }
            }
            special = touched.iter().copied().filter(|&w| overlap[w as usize] as i64 >= 2 * e).min();
            for w in touched {
                overlap[w as usize] = 0;
            }
        }
        specials.push(special);
        let ac_type = if easy[i] {
            AcType::Easy
        } else if special.is_some() {
            AcType::Difficult
        } else {
            AcType::Ordinary
        };
        infos.push(AcInfo { size, e, ac_type, special, level: None, matching: Vec::new(), subtype: None });
    }
    // Non-difficult ACs holding some special node become nice.
    for s in specials.iter().flatten() {
        if let Some(j) = acd.ac_of(*s) {
            if infos[j].ac_type == AcType::Ordinary {
                infos[j].ac_type = AcType::Nice;
            }
        }
    }
    net.charge(2, 1)?;
    for (i, a) in infos.iter().enumerate() {
        if a.ac_type != AcType::Easy {
            let c = &acd.cliques[i];
            let ok = a.e >= 1 && c.iter().all(|&v| g.degree(v) == d && inside[v as usize] + 1 == a.size);
            if !ok {
                return Err(Error::Structural(format!("non-easy AC {i} is not a proper clique with external degree {}", a.e)));
            }
        }
    }
    Ok(infos)
}

fn ceil_log2_i(e: i64) -> u32 {
    crate::congest::ceil_log2(e.max(1) as u64)
}

/// Levels for difficult ACs, the level-order check and the node partition.
pub fn assign_levels(g: &Graph, acd: &AcDecomposition, infos: &mut [AcInfo]) -> Result<NodePartition> {
    let difficult_ac = |v: NodeId, infos: &[AcInfo]| acd.ac_of(v).filter(|&j| infos[j].ac_type == AcType::Difficult);
    for i in 0..infos.len() {
        if infos[i].ac_type != AcType::Difficult {
            continue;
        }
        let s = infos[i].special.unwrap();
        infos[i].level = Some(match difficult_ac(s, infos) {
            Some(_) => Level::Finite(ceil_log2_i(infos[i].e)),
            None => Level::Infinite,
        });
    }
    for (i, a) in infos.iter().enumerate() {
        if let (Some(Level::Finite(l)), Some(s)) = (a.level, a.special) {
            let host = difficult_ac(s, infos).unwrap();
            let hl = infos[host].level.unwrap();
            if Level::Finite(l) >= hl {
                return Err(Error::LevelOrderViolated { ac: i, level: l.to_string(), host, host_level: hl.to_string() });
            }
        }
    }
    let mut p = NodePartition { class: vec![None; g.n()], ..Default::default() };
    let mut is_special = vec![false; g.n()];
    for a in infos.iter() {
        if let Some(s) = a.special {
            is_special[s as usize] = true;
        }
    }
    for v in g.nodes() {
        let cls = match acd.ac_of(v) {
            Some(j) if infos[j].ac_type == AcType::Difficult => NodeClass::Difficult(infos[j].level.unwrap()),
            _ if is_special[v as usize] => NodeClass::Special,
            Some(j) if infos[j].ac_type.is_nice() => NodeClass::Nice,
            Some(_) => NodeClass::Ordinary,
            None => NodeClass::Sparse,
        };
        match cls {
            NodeClass::Special => p.special.push(v),
            NodeClass::Difficult(l) => p.difficult.entry(l).or_default().push(v),
            NodeClass::Nice => p.nice.push(v),
            NodeClass::Ordinary => p.ordinary.push(v),
            NodeClass::Sparse => p.sparse.push(v),
        }
        p.class[v as usize] = Some(cls);
    }
    Ok(p)
}

#[derive(Clone, Debug, Default)]
struct MatchState {
    /// Head side: remaining outside candidates and the current partner.
    cand: Vec<NodeId>,
    partner: Option<NodeId>,
    asked: Option<NodeId>,
    /// Tail side: AC index -> accepted head.
    taken: BTreeMap<u32, NodeId>,
}

/// Randomized maximal matching between each given AC and its outside
/// boundary, all ACs in parallel. A tail may serve several ACs but accepts one
/// head per AC. Returns arcs per AC and the number of proposal iterations.
pub fn compute_matchings(net: &mut Network, acd: &AcDecomposition, acs: &[usize]) -> Result<(Vec<Vec<(NodeId, NodeId)>>, usize)> {
    let g = net.graph();
    let mut st: Vec<MatchState> = vec![MatchState::default(); g.n()];
    let mut heads = Vec::new();
    for &i in acs {
        for &v in &acd.cliques[i] {
            st[v as usize].cand = g.neighbors(v).iter().copied().filter(|&w| acd.part[w as usize] != Some(i as u32)).collect();
            heads.push(v);
        }
    }
    let part = &acd.part;
    net.flush();
    let mut iters = 0;
    loop {
        let proposing = heads.iter().any(|&v| st[v as usize].partner.is_none() && !st[v as usize].cand.is_empty());
        if !proposing {
            break;
        }
        iters += 1;
        // Heads propose.
        net.run_round(&mut st, |ctx, s| {
            if s.partner.is_none() && !s.cand.is_empty() {
                let k = ctx.rng().gen_range(0..s.cand.len());
                let t = s.cand[k];
                s.asked = Some(t);
                ctx.send(t, Msg::one(Field::Bit(true)));
            }
        })?;
        // Tails answer one proposal per AC.
        net.run_round(&mut st, |ctx, s| {
            let mut by_ac: BTreeMap<u32, Vec<NodeId>> = BTreeMap::new();
            for (from, _) in ctx.inbox() {
                by_ac.entry(part[from as usize].unwrap()).or_default().push(from);
            }
            for (ac, props) in by_ac {
                let winner = if s.taken.contains_key(&ac) { None } else { Some(props[ctx.rng().gen_range(0..props.len())]) };
                if let Some(w) = winner {
                    s.taken.insert(ac, w);
                }
                for h in props {
                    ctx.send(h, Msg::one(Field::Bit(Some(h) == winner)));
                }
            }
        })?;
        // Heads read answers; a refused tail is taken for this AC for good.
        net.run_round(&mut st, |ctx, s| {
            let ans: Vec<(NodeId, bool)> = ctx.inbox().map(|(f, m)| (f, m.bit(0).unwrap_or(false))).collect();
            for (from, ok) in ans {
                if Some(from) != s.asked {
                    continue;
                }
                if ok {
                    s.partner = Some(from);
                } else {
                    s.cand.retain(|&x| x != from);
                }
                s.asked = None;
            }
        })?;
    }
    let out = acs
        .iter()
        .map(|&i| acd.cliques[i].iter().filter_map(|&v| st[v as usize].partner.map(|t| (v, t))).collect())
        .collect();
    Ok((out, iters))
}

/// M_C for every ordinary AC, asserted to reach Delta/10; retried up to 3 times.
pub fn compute_matching_mc(net: &mut Network, acd: &AcDecomposition, infos: &mut [AcInfo]) -> Result<usize> {
    let g = net.graph();
    let ord: Vec<usize> = (0..infos.len()).filter(|&i| infos[i].ac_type == AcType::Ordinary).collect();
    for &i in &ord {
        let c = &acd.cliques[i];
        let mut cnt: BTreeMap<NodeId, i64> = BTreeMap::new();
        for &v in c {
            for &w in g.neighbors(v) {
                if acd.part[w as usize] != Some(i as u32) {
                    *cnt.entry(w).or_insert(0) += 1;
                }
            }
        }
        if let Some((&w, _)) = cnt.iter().find(|(_, &k)| k >= 2 * infos[i].e) {
            return Err(Error::Structural(format!("ordinary AC {i} has intrusive neighbor {w}")));
        }
    }
    let need = g.delta() as f64 / 10.0;
    let mut pending = ord.clone();
    let mut total_iters = 0;
    for _attempt in 0..3 {
        let (ms, it) = compute_matchings(net, acd, &pending)?;
        total_iters += it;
        let mut again = Vec::new();
        for (k, &i) in pending.iter().enumerate() {
            if (ms[k].len() as f64) < need {
                again.push(i);
            }
            infos[i].matching = ms[k].clone();
        }
        if again.is_empty() {
            return Ok(total_iters);
        }
        pending = again;
    }
    let i = pending[0];
    Err(Error::MatchingTooSmall { ac: i, size: infos[i].matching.len(), need })
}

/// q(n) = 10 (log2 log2 n)^3.
pub fn q_fn(n: usize) -> f64 {
    let ll = (n.max(4) as f64).log2().log2();
    10.0 * ll * ll * ll
}

/// Small iff |C| <= Delta - Delta/q; large ones are important iff at least
/// Delta/12 of their matching tails are large-ordinary nodes.
pub fn classify_ordinary(g: &Graph, acd: &AcDecomposition, infos: &mut [AcInfo], q: f64) {
    let d = g.delta() as f64;
    let mut large_node = vec![false; g.n()];
    for (i, a) in infos.iter_mut().enumerate() {
        if a.ac_type == AcType::Ordinary {
            let large = a.size as f64 > d - d / q;
            a.subtype = Some(if large { Subtype::LargeUnimportant } else { Subtype::Small });
            if large {
                for &v in &acd.cliques[i] {
                    large_node[v as usize] = true;
                }
            }
        }
    }
    for a in infos.iter_mut() {
        if a.subtype == Some(Subtype::LargeUnimportant) {
            let hits = a.matching.iter().filter(|&&(_, t)| large_node[t as usize]).count();
            if hits as f64 >= d / 12.0 {
                a.subtype = Some(Subtype::LargeImportant);
            }
        }
    }
}

/// Every node of an ordinary AC has >= e_C (Delta - 3 e_C) non-edges in its
/// neighborhood, and small ones >= Delta^2 / (2q).
pub fn check_ordinary_sparsity(g: &Graph, acd: &AcDecomposition, infos: &[AcInfo], q: f64) -> Result<()> {
    let d = g.delta() as f64;
    let mut mark = vec![false; g.n()];
    for (i, a) in infos.iter().enumerate() {
        let Some(sub) = a.subtype else { continue };
        let e = a.e as f64;
        let mut bound = (e * (d - 3.0 * e)).max(0.0);
        if sub == Subtype::Small {
            bound = bound.max(d * d / (2.0 * q));
        }
        let stop = bound.ceil() as u64;
        for &v in &acd.cliques[i] {
            let have = neighborhood_non_edges(g, v, stop, &mut mark);
            if (have as f64) < bound {
                return Err(Error::Structural(format!("ordinary node {v} of AC {i} has {have} non-edges, need {bound:.1}")));
            }
        }
    }
    Ok(())
}

/// Full classification: types, levels, partition, matchings and subtypes.
pub fn classify(net: &mut Network, acd: &AcDecomposition, q: f64) -> Result<Classification> {
    let g = net.graph();
    let mut infos = classify_acs(net, acd)?;
    let partition = assign_levels(g, acd, &mut infos)?;
    compute_matching_mc(net, acd, &mut infos)?;
    classify_ordinary(g, acd, &mut infos, q);
    // Each AC leader sums its tails in O_l.
    net.charge(2, net.widths().count)?;
    check_ordinary_sparsity(g, acd, &infos, q)?;
    Ok(Classification { infos, partition })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::congest::NetConfig;
    use crate::matching::max_bipartite_matching;

    /// Clique on `k` nodes starting at `off`.
    fn clique_edges(off: u32, k: u32, e: &mut Vec<(NodeId, NodeId)>) {
        for u in 0..k {
            for v in u + 1..k {
                e.push((off + u, off + v));
            }
        }
    }

    #[test]
    fn nice_clique_is_easy() {
        let g = crate::generate::generate(&crate::generate::GeneratorSpec::nice_clique(9)).unwrap();
        let acd = AcDecomposition::new(10, 0.5, vec![(0..10).collect()]);
        let mut net = Network::new(&g, NetConfig::default());
        let infos = classify_acs(&mut net, &acd).unwrap();
        assert_eq!(infos[0].ac_type, AcType::Easy);
    }

    #[test]
    fn intrusive_threshold() {
        // Delta = 5, C = K4 (e = 2). Node 4 adjacent to all four C nodes: 4 >= 2e.
        let mut e = Vec::new();
        clique_edges(0, 4, &mut e);
        for v in 0..4 {
            e.push((v, 4));
        }
        // Second external edge for each C node, to distinct fillers.
        for v in 0..4 {
            e.push((v, 5 + v));
        }
        // Make node 4 reach degree 5 and fillers somewhat connected.
        e.push((4, 5));
        let g = Graph::from_edges(9, &e).unwrap();
        assert_eq!(g.delta(), 5);
        let acd = AcDecomposition::new(9, 0.5, vec![(0..4).collect()]);
        let mut net = Network::new(&g, NetConfig::default());
        let mut infos = classify_acs(&mut net, &acd).unwrap();
        assert_eq!(infos[0].ac_type, AcType::Difficult);
        assert_eq!(infos[0].special, Some(4));
        let p = assign_levels(&g, &acd, &mut infos).unwrap();
        assert_eq!(infos[0].level, Some(Level::Infinite));
        assert_eq!(p.special, vec![4]);

        // Overlap 3 < 2e = 4 everywhere: ordinary.
        let mut e = Vec::new();
        clique_edges(0, 4, &mut e);
        e.extend([(0, 4), (1, 4), (2, 4), (0, 5), (1, 6), (2, 7), (3, 8), (3, 5)]);
        let g = Graph::from_edges(9, &e).unwrap();
        let mut net = Network::new(&g, NetConfig::default());
        let infos = classify_acs(&mut net, &acd).unwrap();
        assert_eq!(infos[0].ac_type, AcType::Ordinary);
    }

    #[test]
    fn level_formula() {
        assert_eq!(ceil_log2_i(1), 0);
        assert_eq!(ceil_log2_i(2), 1);
        assert_eq!(ceil_log2_i(3), 2);
        assert_eq!(ceil_log2_i(4), 2);
    }

    #[test]
    fn chain_levels() {
        use crate::generate::{generate_instance, GeneratorSpec};
        let inst = generate_instance(&GeneratorSpec::difficult_chain(33, 3, 0.25, 3)).unwrap();
        let g = &inst.graph;
        let acd = AcDecomposition::new(g.n(), 0.25, inst.planted.clone());
        let mut net = Network::new(g, NetConfig::default());
        let mut infos = classify_acs(&mut net, &acd).unwrap();
        let p = assign_levels(g, &acd, &mut infos).unwrap();
        let lv: Vec<_> = infos.iter().map(|a| a.level).collect();
        assert_eq!(lv, vec![Some(Level::Finite(0)), Some(Level::Finite(1)), Some(Level::Infinite)]);
        let total: usize = p.special.len() + p.nice.len() + p.ordinary.len() + p.sparse.len() + p.difficult.values().map(|v| v.len()).sum::<usize>();
        assert_eq!(total, g.n());
    }

    #[test]
    fn subtype_threshold_is_strict() {
        let d = 100usize;
        let q = 4.0;
        // |C| = Delta - Delta/q = 75 is small, 76 is large.
        let mk = |size: usize| AcInfo { size, e: (d - size + 1) as i64, ac_type: AcType::Ordinary, special: None, level: None, matching: vec![], subtype: None };
        let mut infos = vec![mk(75), mk(76)];
        let gd = fake_delta_graph(d);
        let acd = AcDecomposition::new(gd.n(), 0.1, vec![vec![], vec![]]);
        classify_ordinary(&gd, &acd, &mut infos, q);
        assert_eq!(infos[0].subtype, Some(Subtype::Small));
        assert_eq!(infos[1].subtype, Some(Subtype::LargeUnimportant));
    }

    fn fake_delta_graph(d: usize) -> Graph {
        let e: Vec<_> = (1..=d as u32).map(|v| (0, v)).collect();
        Graph::from_edges(d + 1, &e).unwrap()
    }

    #[test]
    fn lattice_matchings_are_large() {
        use crate::generate::{generate_instance, GeneratorSpec};
        let inst = generate_instance(&GeneratorSpec::ordinary_lattice(40, 6, 2, 5)).unwrap();
        let g = &inst.graph;
        let acd = AcDecomposition::new(g.n(), 0.25, inst.planted.clone());
        let mut net = Network::new(g, NetConfig { seed: 9, ..Default::default() });
        let mut infos = classify_acs(&mut net, &acd).unwrap();
        assign_levels(g, &acd, &mut infos).unwrap();
        compute_matching_mc(&mut net, &acd, &mut infos).unwrap();
        for (i, a) in infos.iter().enumerate() {
            assert_eq!(a.ac_type, AcType::Ordinary);
            let c = &acd.cliques[i];
            // Maximal: no unmatched head has an outside neighbor free for this AC.
            let used: std::collections::BTreeSet<NodeId> = a.matching.iter().map(|&(_, t)| t).collect();
            let heads: std::collections::BTreeSet<NodeId> = a.matching.iter().map(|&(h, _)| h).collect();
            assert_eq!(used.len(), a.matching.len());
            for &v in c {
                if !heads.contains(&v) {
                    for &w in g.neighbors(v) {
                        if acd.part[w as usize] != Some(i as u32) {
                            assert!(used.contains(&w), "not maximal at {v}-{w}");
                        }
                    }
                }
            }
            // Exact oracle for the maximum.
            let outside: Vec<NodeId> = c.iter().flat_map(|&v| g.neighbors(v).iter().copied()).filter(|&w| acd.part[w as usize] != Some(i as u32)).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
            let idx = |w: NodeId| outside.binary_search(&w).unwrap();
            let edges: Vec<(usize, usize)> = c.iter().enumerate().flat_map(|(k, &v)| g.neighbors(v).iter().filter(|&&w| acd.part[w as usize] != Some(i as u32)).map(move |&w| (k, w)).collect::<Vec<_>>()).map(|(k, w)| (k, idx(w))).collect();
            let max = max_bipartite_matching(c.len(), outside.len(), &edges).len();
            assert!(2 * a.matching.len() >= max);
            assert!(a.matching.len() as f64 >= 40.0 / 10.0);
        }
        assert!(net.audit().max_bits <= net.budget());
    }
}
