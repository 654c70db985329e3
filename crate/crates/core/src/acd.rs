//! Almost-clique decomposition: a weak decomposition found by neighborhood
//! similarity sampling, augmented and validated against the exact bounds.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;

use crate::congest::{Field, Msg, Network};
use crate::error::{Error, Result};
use crate::graph::{neighborhood_non_edges, Graph, NodeId};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AcDecomposition {
    pub eps: f64,
    pub cliques: Vec<Vec<NodeId>>,
    pub sparse: Vec<NodeId>,
    /// AC index per node, `None` for sparse nodes.
    pub part: Vec<Option<u32>>,
}

impl AcDecomposition {
    /// Builds the per-node index; members are sorted.
    pub fn new(n: usize, eps: f64, mut cliques: Vec<Vec<NodeId>>) -> Self {
        let mut part = vec![None; n];
        for (i, c) in cliques.iter_mut().enumerate() {
            c.sort_unstable();
            for &v in c.iter() {
                part[v as usize] = Some(i as u32);
            }
        }
        let sparse = (0..n as NodeId).filter(|&v| part[v as usize].is_none()).collect();
        AcDecomposition { eps, cliques, sparse, part }
    }

    /// Everything sparse; used when the scale is too small for dense parts.
    pub fn all_sparse(n: usize, eps: f64) -> Self {
        Self::new(n, eps, Vec::new())
    }

    pub fn ac_of(&self, v: NodeId) -> Option<usize> {
        self.part[v as usize].map(|i| i as usize)
    }

    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (i, c) in self.cliques.iter().enumerate() {
            let _ = write!(s, "C {i}:");
            for v in c {
                let _ = write!(s, " {v}");
            }
            s.push('\n');
        }
        s.push_str("SPARSE:");
        for v in &self.sparse {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
        s
    }
}

/// Parses the dump format: lines `C i: id id ...` (indices 0.. in order) and
/// one line `SPARSE: id ...`. The parts must partition `0..n`.
pub fn parse_acd_dump(text: &str, n: usize, eps: f64) -> Result<AcDecomposition> {
    let mut cliques: Vec<Vec<NodeId>> = Vec::new();
    let mut seen = vec![false; n];
    let mut saw_sparse = false;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (head, rest) = line.split_once(':').ok_or(Error::Parse { line: lineno, msg: "missing ':'".into() })?;
        let is_sparse = head.trim() == "SPARSE";
        if is_sparse {
            if saw_sparse {
                return Err(Error::Parse { line: lineno, msg: "second SPARSE line".into() });
            }
            saw_sparse = true;
        } else {
            let idx = head
                .trim()
                .strip_prefix("C ")
                .and_then(|t| t.trim().parse::<usize>().ok())
                .ok_or(Error::Parse { line: lineno, msg: format!("bad part header {head:?}") })?;
            if idx != cliques.len() {
                return Err(Error::Parse { line: lineno, msg: format!("expected part {}, got {idx}", cliques.len()) });
            }
        }
        let mut members = Vec::new();
        for tok in rest.split_whitespace() {
            let v: usize = tok.parse().map_err(|_| Error::Parse { line: lineno, msg: format!("bad node id {tok:?}") })?;
            if v >= n {
                return Err(Error::Parse { line: lineno, msg: format!("node {v} out of range") });
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::Parse { line: lineno, msg: format!("node {v} appears twice") });
            }
            members.push(v as NodeId);
        }
        if !is_sparse {
            cliques.push(members);
        }
    }
    if let Some(v) = seen.iter().position(|s| !s) {
        return Err(Error::Parse { line: 0, msg: format!("node {v} is in no part") });
    }
    Ok(AcDecomposition::new(n, eps, cliques))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Violation {
    NotPartition { node: NodeId },
    SizeLow { ac: usize, size: usize, bound: f64 },
    SizeHigh { ac: usize, size: usize, bound: f64 },
    InternalDegree { ac: usize, node: NodeId, inside: usize, bound: f64 },
    ExternalOverlap { ac: usize, node: NodeId, inside: usize, bound: f64 },
    NotSparse { node: NodeId, deficit: u64, bound: f64 },
    TooManyAdded { ac: usize, added: usize, bound: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotPartition { node } => write!(f, "node {node} not covered exactly once"),
            Violation::SizeLow { ac, size, bound } => write!(f, "(i) AC {ac} has size {size} < {bound:.2}"),
            Violation::SizeHigh { ac, size, bound } => write!(f, "(i) AC {ac} has size {size} > {bound:.2}"),
            Violation::InternalDegree { ac, node, inside, bound } => write!(f, "(ii) node {node} has {inside} < {bound:.2} neighbors in AC {ac}"),
            Violation::ExternalOverlap { ac, node, inside, bound } => write!(f, "(iii) outside node {node} has {inside} > {bound:.2} neighbors in AC {ac}"),
            Violation::NotSparse { node, deficit, bound } => write!(f, "sparse node {node} has neighborhood deficit {deficit} < {bound:.2}"),
            Violation::TooManyAdded { ac, added, bound } => write!(f, "AC {ac} gained {added} > {bound:.2} nodes in augmentation"),
        }
    }
}

/// Neighborhood deficit of `v`: C(Delta, 2) minus the edges inside N(v). Equals
/// the non-edges of N(v) when deg(v) = Delta. Counting stops at `stop_at`.
pub fn sparsity_deficit(g: &Graph, v: NodeId, stop_at: u64, mark: &mut [bool]) -> u64 {
    let d = g.delta() as u64;
    let k = g.degree(v) as u64;
    let missing = d * d.saturating_sub(1) / 2 - k * k.saturating_sub(1) / 2;
    if missing >= stop_at {
        return missing;
    }
    missing + neighborhood_non_edges(g, v, stop_at - missing, mark)
}

/// Checks partition, (i), (ii), (iii) and sparsity `zeta * eps^2 * Delta^2`.
pub fn validate_acd(g: &Graph, acd: &AcDecomposition, zeta: f64) -> Vec<Violation> {
    let n = g.n();
    let d = g.delta() as f64;
    let eps = acd.eps;
    let mut out = Vec::new();
    let mut cover = vec![0u32; n];
    for c in &acd.cliques {
        for &v in c {
            cover[v as usize] += 1;
        }
    }
    for &v in &acd.sparse {
        cover[v as usize] += 1;
    }
    for v in 0..n {
        if cover[v] != 1 || (acd.part.len() == n && acd.part[v].map(|i| !acd.cliques[i as usize].contains(&(v as NodeId))).unwrap_or(false)) {
            out.push(Violation::NotPartition { node: v as NodeId });
        }
    }
    if !out.is_empty() {
        return out;
    }
    let mut inside = vec![0usize; n];
    for (i, c) in acd.cliques.iter().enumerate() {
        let lo = (1.0 - eps / 4.0) * d;
        let hi = (1.0 + eps) * d;
        if (c.len() as f64) < lo {
            out.push(Violation::SizeLow { ac: i, size: c.len(), bound: lo });
        }
        if c.len() as f64 > hi {
            out.push(Violation::SizeHigh { ac: i, size: c.len(), bound: hi });
        }
        let mut touched = Vec::new();
        for &v in c {
            for &w in g.neighbors(v) {
                if inside[w as usize] == 0 {
                    touched.push(w);
                }
                inside[w as usize] += 1;
            }
        }
        let need = (1.0 - eps) * d;
        let cap = (1.0 - eps / 2.0) * d;
        for &v in c {
            if (inside[v as usize] as f64) < need {
                out.push(Violation::InternalDegree { ac: i, node: v, inside: inside[v as usize], bound: need });
            }
        }
        for &w in &touched {
            if acd.part[w as usize] != Some(i as u32) && inside[w as usize] as f64 > cap {
                out.push(Violation::ExternalOverlap { ac: i, node: w, inside: inside[w as usize], bound: cap });
            }
        }
        for &w in &touched {
            inside[w as usize] = 0;
        }
    }
    let bound = zeta * eps * eps * d * d;
    let stop = bound.ceil() as u64;
    let mut mark = vec![false; n];
    for &v in &acd.sparse {
        let def = sparsity_deficit(g, v, stop.max(1), &mut mark);
        if (def as f64) < bound {
            out.push(Violation::NotSparse { node: v, deficit: def, bound });
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AcdStats {
    pub attempts: u32,
    pub samples_per_node: usize,
    pub friend_edges: u64,
    pub weak_parts: usize,
    pub pruned_nodes: usize,
    pub max_added: usize,
    pub last_violation: Option<String>,
}

#[derive(Clone, Debug, Default)]
struct SimState {
    samples: Vec<NodeId>,
    hits: Vec<u32>,
    likes: Vec<bool>,
    friend: Vec<bool>,
    label: NodeId,
    changed: bool,
}

/// Weak decomposition (V', D_1..D_k) with parameter eps/4:
/// (a) |D_i| <= (1+eps/4)Delta, (b) each v in D_i has >= (1-eps/4)Delta
/// neighbors in D_i. Nodes sample k = ceil(4 log2 n) random neighbor ids and
/// share them; adjacent u, v are friends when each finds >= 3/4 of the other's
/// samples in its closed neighborhood. Parts are friend-graph components,
/// pruned until (a) and (b) hold.
pub fn compute_weak_decomposition(net: &mut Network, eps: f64, stats: &mut AcdStats) -> Result<(Vec<NodeId>, Vec<Vec<NodeId>>)> {
    let g = net.graph();
    let n = g.n();
    let delta = g.delta();
    if eps * delta as f64 / 4.0 < 1.0 {
        return Err(Error::DeltaTooSmall { eps, delta });
    }
    let k = (4.0 * (n.max(2) as f64).log2()).ceil() as usize;
    stats.samples_per_node = k;
    let w = net.widths();
    let per_msg = (net.budget() / w.id).max(1) as usize;
    let chunks = k.div_ceil(per_msg);
    let mut st: Vec<SimState> = g
        .nodes()
        .map(|v| SimState {
            hits: vec![0; g.degree(v)],
            likes: vec![false; g.degree(v)],
            friend: vec![false; g.degree(v)],
            label: v,
            ..Default::default()
        })
        .collect();
    net.flush();
    // Local scratch: stamp[x] == v + 1 marks x as in v's closed neighborhood.
    let stamp = std::cell::RefCell::new(vec![0 as NodeId; n]);
    // Sampling and sharing: chunk t is broadcast in round t and scored in t+1.
    for t in 0..=chunks {
        net.run_round(&mut st, |ctx, s| {
            let nb = ctx.neighbors();
            let me = ctx.id();
            if t == 0 && !nb.is_empty() {
                let r = ctx.rng();
                s.samples = (0..k).map(|_| nb[r.gen_range(0..nb.len())]).collect();
            }
            if t > 0 {
                let mut mark = stamp.borrow_mut();
                mark[me as usize] = me + 1;
                for &w in nb {
                    mark[w as usize] = me + 1;
                }
                // Only broadcasts arrive here, in neighbor order.
                let mut i = 0;
                for (from, m) in ctx.inbox() {
                    while nb[i] != from {
                        i += 1;
                    }
                    s.hits[i] += m.0.iter().filter(|f| matches!(f, Field::Id(x) if mark[*x as usize] == me + 1)).count() as u32;
                }
            }
            if t < chunks && !s.samples.is_empty() {
                let lo = t * per_msg;
                let hi = ((t + 1) * per_msg).min(k);
                let mut m = Msg::new();
                for &x in &s.samples[lo..hi] {
                    m.0.push(Field::Id(x));
                }
                ctx.broadcast(m);
            }
        })?;
    }
    let need = (3 * k).div_ceil(4) as u32;
    // Exchange like-bits so friendship is symmetric.
    for step in 0..2 {
        net.run_round(&mut st, |ctx, s| {
            let nb = ctx.neighbors();
            if step == 0 {
                for (i, &w) in nb.iter().enumerate() {
                    s.likes[i] = s.hits[i] >= need;
                    ctx.send(w, Msg::one(Field::Bit(s.likes[i])));
                }
            } else {
                let got: Vec<(usize, bool)> = ctx.inbox().map(|(f, m)| (nb.binary_search(&f).unwrap(), m.bit(0).unwrap_or(false))).collect();
                for (i, b) in got {
                    s.friend[i] = b && s.likes[i];
                }
            }
        })?;
    }
    stats.friend_edges = st.iter().map(|s| s.friend.iter().filter(|&&f| f).count() as u64).sum::<u64>() / 2;
    // Min-label propagation over friend edges.
    for s in &mut st {
        s.changed = true;
    }
    loop {
        net.run_round(&mut st, |ctx, s| {
            let nb = ctx.neighbors();
            let mut best = s.label;
            for (from, m) in ctx.inbox() {
                let i = nb.binary_search(&from).unwrap();
                if s.friend[i] {
                    best = best.min(m.id(0).unwrap());
                }
            }
            if best < s.label {
                s.label = best;
                s.changed = true;
            }
            if s.changed {
                ctx.broadcast(Msg::one(Field::Id(s.label)));
                s.changed = false;
            }
        })?;
        // One more quiet round means every label has been seen.
        if st.iter().all(|s| !s.changed) {
            let mut again = false;
            net.run_round(&mut st, |ctx, s| {
                let nb = ctx.neighbors();
                for (from, m) in ctx.inbox() {
                    let i = nb.binary_search(&from).unwrap();
                    if s.friend[i] && m.id(0).unwrap() < s.label {
                        s.label = m.id(0).unwrap();
                        s.changed = true;
                    }
                }
            })?;
            again |= st.iter().any(|s| s.changed);
            if !again {
                break;
            }
        }
    }
    let mut parts: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for v in g.nodes() {
        parts.entry(st[v as usize].label).or_default().push(v);
    }
    stats.weak_parts = parts.values().filter(|p| p.len() > 1).count();
    let (vprime, ds, pruned, iters) = prune(g, parts.into_values().collect(), eps);
    stats.pruned_nodes = pruned;
    net.charge(iters as u64, 1)?;
    Ok((vprime, ds))
}

/// Drops nodes violating (b) until none remain, then discards parts violating (a).
fn prune(g: &Graph, parts: Vec<Vec<NodeId>>, eps: f64) -> (Vec<NodeId>, Vec<Vec<NodeId>>, usize, usize) {
    let d = g.delta() as f64;
    let need = (1.0 - eps / 4.0) * d;
    let cap = (1.0 + eps / 4.0) * d;
    let n = g.n();
    let mut label: Vec<Option<usize>> = vec![None; n];
    for (i, p) in parts.iter().enumerate() {
        if p.len() as f64 >= need {
            for &v in p {
                label[v as usize] = Some(i);
            }
        }
    }
    let mut pruned = 0;
    let mut iters = 0;
    loop {
        iters += 1;
        let drop: Vec<NodeId> = g
            .nodes()
            .filter(|&v| match label[v as usize] {
                Some(i) => (g.neighbors(v).iter().filter(|&&w| label[w as usize] == Some(i)).count() as f64) < need,
                None => false,
            })
            .collect();
        if drop.is_empty() {
            break;
        }
        pruned += drop.len();
        for v in drop {
            label[v as usize] = None;
        }
    }
    let mut by: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
    for v in g.nodes() {
        if let Some(i) = label[v as usize] {
            by.entry(i).or_default().push(v);
        }
    }
    let mut ds = Vec::new();
    for (_, p) in by {
        if p.len() as f64 <= cap {
            ds.push(p);
        } else {
            for &v in &p {
                label[v as usize] = None;
            }
        }
    }
    let vprime = g.nodes().filter(|&v| label[v as usize].is_none()).collect();
    (vprime, ds, pruned, iters)
}

/// C_i = D_i plus the V' nodes with >= (1-eps)Delta neighbors in D_i.
/// Asserts |C_i \ D_i| <= eps*Delta/2 and every invariant of the result.
pub fn augment_decomposition(net: &mut Network, weak: &(Vec<NodeId>, Vec<Vec<NodeId>>), eps: f64, zeta: f64, stats: &mut AcdStats) -> Result<AcDecomposition> {
    let g = net.graph();
    let (vprime, ds) = weak;
    let d = g.delta() as f64;
    let mut label = vec![usize::MAX; g.n()];
    for (i, p) in ds.iter().enumerate() {
        for &v in p {
            label[v as usize] = i;
        }
    }
    // One round: every node announces its part index.
    net.charge(1, net.widths().id)?;
    let mut cliques = ds.clone();
    let join = (1.0 - eps) * d;
    let mut added = vec![0usize; ds.len()];
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &v in vprime {
        counts.clear();
        for &w in g.neighbors(v) {
            if label[w as usize] != usize::MAX {
                *counts.entry(label[w as usize]).or_insert(0) += 1;
            }
        }
        let hosts: Vec<usize> = counts.iter().filter(|(_, &c)| c as f64 >= join).map(|(&i, _)| i).collect();
        assert!(hosts.len() <= 1, "node {v} qualifies for {} parts", hosts.len());
        if let Some(&i) = hosts.first() {
            cliques[i].push(v);
            added[i] += 1;
        }
    }
    stats.max_added = added.iter().copied().max().unwrap_or(0);
    let bound = eps * d / 2.0;
    let over: Vec<Violation> = added
        .iter()
        .enumerate()
        .filter(|(_, &a)| a as f64 > bound)
        .map(|(ac, &a)| Violation::TooManyAdded { ac, added: a, bound })
        .collect();
    if !over.is_empty() {
        return Err(Error::InvariantViolated(over));
    }
    let acd = AcDecomposition::new(g.n(), eps, cliques);
    let v = validate_acd(g, &acd, zeta);
    if !v.is_empty() {
        return Err(Error::InvariantViolated(v));
    }
    Ok(acd)
}

/// Weak step plus augmentation, retried up to `retries` times.
pub fn compute_acd(net: &mut Network, eps: f64, zeta: f64, retries: u32) -> Result<(AcDecomposition, AcdStats)> {
    let mut stats = AcdStats::default();
    for _ in 0..retries.max(1) {
        stats.attempts += 1;
        let weak = compute_weak_decomposition(net, eps, &mut stats)?;
        match augment_decomposition(net, &weak, eps, zeta, &mut stats) {
            Ok(acd) => return Ok((acd, stats)),
            Err(Error::InvariantViolated(v)) => stats.last_violation = v.first().map(|x| x.to_string()),
            Err(e) => return Err(e),
        }
    }
    Err(Error::DecompositionFailed(format!("{} attempts, last: {}", stats.attempts, stats.last_violation.clone().unwrap_or_default())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::congest::NetConfig;
    use crate::graph::fixtures::complete;

    fn two_cliques(k: usize) -> Graph {
        let mut e = Vec::new();
        for off in [0, k as u32] {
            for u in 0..k as u32 {
                for v in u + 1..k as u32 {
                    e.push((off + u, off + v));
                }
            }
        }
        Graph::from_edges(2 * k, &e).unwrap()
    }

    #[test]
    fn disjoint_cliques_are_their_own_parts() {
        let g = two_cliques(17); // Delta = 16
        let mut net = Network::new(&g, NetConfig { seed: 1, ..Default::default() });
        let mut st = AcdStats::default();
        let (vp, ds) = compute_weak_decomposition(&mut net, 0.25, &mut st).unwrap();
        assert!(vp.is_empty());
        assert_eq!(ds.len(), 2);
        let acd = augment_decomposition(&mut net, &(vp, ds), 0.25, 1.0 / 64.0, &mut st).unwrap();
        assert_eq!(acd.cliques[0], (0..17).collect::<Vec<_>>());
        assert!(net.audit().max_bits <= net.budget());
    }

    #[test]
    fn too_small_scale_rejected() {
        let g = complete(6);
        let mut net = Network::new(&g, NetConfig::default());
        let r = compute_weak_decomposition(&mut net, 1.0 / 172.0, &mut AcdStats::default());
        assert!(matches!(r, Err(Error::DeltaTooSmall { .. })));
    }

    #[test]
    fn validator_flags() {
        // Degree-0 node placed in an AC fails (ii).
        let mut e = Vec::new();
        for u in 0..8u32 {
            for v in u + 1..8 {
                e.push((u, v));
            }
        }
        let g = Graph::from_edges(9, &e).unwrap();
        let acd = AcDecomposition::new(9, 0.25, vec![(0..9).collect()]);
        let v = validate_acd(&g, &acd, 1.0 / 64.0);
        assert!(v.iter().any(|x| matches!(x, Violation::InternalDegree { node: 8, .. })));
        // Part of size Delta/2 fails (i).
        let acd = AcDecomposition::new(9, 0.25, vec![(0..4).collect()]);
        let v = validate_acd(&g, &acd, 1.0 / 64.0);
        assert!(v.iter().any(|x| matches!(x, Violation::SizeLow { ac: 0, .. })));
    }

    #[test]
    fn dump_roundtrip() {
        let acd = AcDecomposition::new(6, 0.5, vec![vec![2, 0, 1], vec![4]]);
        let t = acd.dump();
        assert_eq!(t, "C 0: 0 1 2\nC 1: 4\nSPARSE: 3 5\n");
        assert_eq!(parse_acd_dump(&t, 6, 0.5).unwrap(), acd);
        assert!(parse_acd_dump("C 0: 0 1\nSPARSE: 1 2\n", 3, 0.5).is_err());
        assert!(parse_acd_dump("C 1: 0\nSPARSE: 1 2\n", 3, 0.5).is_err());
        assert!(parse_acd_dump("SPARSE: 0 1\n", 3, 0.5).is_err());
    }

    #[test]
    fn deficit_counts_degree_shortfall() {
        let g = complete(5);
        let mut mark = vec![false; 5];
        assert_eq!(sparsity_deficit(&g, 0, u64::MAX, &mut mark), 0);
    }
}
