//! Instance generators. Every kind checks its own structural promise and
//! retries with a derived seed (up to 100 attempts) before giving up.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenKind {
    RandomRegular,
    PlantedAcd,
    NiceClique,
    DifficultChain,
    OrdinaryLattice,
    RejectCase,
}

impl std::str::FromStr for GenKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "random_regular" => GenKind::RandomRegular,
            "planted_acd" => GenKind::PlantedAcd,
            "nice_clique" => GenKind::NiceClique,
            "difficult_chain" => GenKind::DifficultChain,
            "ordinary_lattice" => GenKind::OrdinaryLattice,
            "reject_case" => GenKind::RejectCase,
            _ => return Err(Error::IllegalSpec(format!("unknown generator {s:?}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GenKind,
    pub delta: usize,
    /// Total node count. Ignored by kinds whose size is determined by the
    /// other parameters; for planted_acd it includes the sparse filler.
    pub n: usize,
    /// Number of planted ACs (planted_acd, ordinary_lattice).
    pub acs: usize,
    /// External degree per planted AC. A single entry is broadcast to all ACs.
    pub ext: Vec<usize>,
    /// Layer count for difficult_chain.
    pub layers: usize,
    pub eps: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(kind: GenKind, delta: usize) -> Self {
        GeneratorSpec { kind, delta, n: 0, acs: 0, ext: vec![1], layers: 3, eps: 1.0 / 12.0, seed: 0 }
    }

    pub fn random_regular(delta: usize, n: usize, seed: u64) -> Self {
        GeneratorSpec { n, seed, ..Self::new(GenKind::RandomRegular, delta) }
    }

    pub fn planted_acd(delta: usize, n: usize, acs: usize, ext: Vec<usize>, eps: f64, seed: u64) -> Self {
        GeneratorSpec { n, acs, ext, eps, seed, ..Self::new(GenKind::PlantedAcd, delta) }
    }

    pub fn nice_clique(delta: usize) -> Self {
        Self::new(GenKind::NiceClique, delta)
    }

    pub fn difficult_chain(delta: usize, layers: usize, eps: f64, seed: u64) -> Self {
        GeneratorSpec { layers, eps, seed, ..Self::new(GenKind::DifficultChain, delta) }
    }

    pub fn ordinary_lattice(delta: usize, acs: usize, ext: usize, seed: u64) -> Self {
        GeneratorSpec { acs, ext: vec![ext], seed, ..Self::new(GenKind::OrdinaryLattice, delta) }
    }

    fn ext_of(&self, i: usize) -> usize {
        if self.ext.len() == 1 {
            self.ext[0]
        } else {
            self.ext[i]
        }
    }
}

/// A generated graph plus the node sets that were planted as almost-cliques.
#[derive(Clone, Debug)]
pub struct Instance {
    pub graph: Graph,
    pub planted: Vec<Vec<NodeId>>,
}

pub fn generate(spec: &GeneratorSpec) -> Result<Graph> {
    generate_instance(spec).map(|i| i.graph)
}

pub fn generate_instance(spec: &GeneratorSpec) -> Result<Instance> {
    validate(spec)?;
    let mut last = String::new();
    for attempt in 0..100u64 {
        let mut r = rng::stream(&[spec.seed, rng::tag("generate"), attempt]);
        let built = match spec.kind {
            GenKind::RandomRegular => random_regular(spec, &mut r),
            GenKind::PlantedAcd => planted_acd(spec, &mut r),
            GenKind::NiceClique => nice_clique(spec.delta),
            GenKind::DifficultChain => difficult_chain(spec, &mut r),
            GenKind::OrdinaryLattice => ordinary_lattice(spec, &mut r),
            GenKind::RejectCase => reject_case(spec),
        };
        match built {
            Ok(inst) if inst.graph.delta() == spec.delta => return Ok(inst),
            Ok(inst) => last = format!("max degree {} != {}", inst.graph.delta(), spec.delta),
            Err(Retry(msg)) => last = msg,
        }
    }
    Err(Error::IllegalSpec(format!("no valid {:?} instance in 100 attempts: {last}", spec.kind)))
}

struct Retry(String);

type Built = std::result::Result<Instance, Retry>;

fn illegal(msg: impl Into<String>) -> Result<()> {
    Err(Error::IllegalSpec(msg.into()))
}

fn validate(s: &GeneratorSpec) -> Result<()> {
    let d = s.delta;
    if s.ext.is_empty() {
        return illegal("ext must not be empty");
    }
    match s.kind {
        GenKind::RejectCase => {
            if d == 2 && (s.n < 3 || s.n % 2 == 0) {
                return illegal("reject_case with Delta = 2 needs an odd cycle length n >= 3");
            }
            if d < 2 {
                return illegal("reject_case needs Delta >= 2");
            }
            return Ok(());
        }
        _ if d < 3 => return illegal(format!("Delta = {d} < 3; odd cycles and K_(Delta+1) need kind reject_case")),
        _ => {}
    }
    match s.kind {
        GenKind::RandomRegular => {
            if s.n <= d + 1 {
                return illegal(format!("random_regular needs n > Delta + 1 (K_(Delta+1) needs reject_case), got n = {}", s.n));
            }
            if s.n * d % 2 == 1 {
                return illegal("n * Delta must be even");
            }
        }
        GenKind::PlantedAcd => {
            if s.acs == 0 {
                return illegal("planted_acd needs at least one AC");
            }
            if s.ext.len() != 1 && s.ext.len() != s.acs {
                return illegal("ext must have one entry or one per AC");
            }
            let mut in_acs = 0;
            let mut stubs = 0;
            for i in 0..s.acs {
                let e = s.ext_of(i);
                if e == 0 || e as f64 > s.eps * d as f64 {
                    return illegal(format!("AC {i}: external degree {e} outside [1, eps*Delta]"));
                }
                in_acs += d + 1 - e;
                stubs += (d + 1 - e) * e;
            }
            let sparse = s.n.saturating_sub(in_acs);
            if sparse < 2 * d + 2 || sparse * d < 2 * stubs {
                return illegal(format!("n = {} leaves {sparse} sparse nodes, too few to absorb {stubs} external edges", s.n));
            }
        }
        GenKind::NiceClique => {}
        GenKind::DifficultChain => {
            if s.layers == 0 || s.layers > 20 {
                return illegal("difficult_chain needs 1..=20 layers");
            }
            let top = 1usize << (s.layers - 1);
            if 2 * top + 1 > d || top as f64 > s.eps * d as f64 {
                return illegal(format!("external degree {top} of the last layer exceeds eps*Delta"));
            }
        }
        GenKind::OrdinaryLattice => {
            let e = s.ext_of(0);
            if s.acs < 2 || e == 0 || 2 * e + 1 > d {
                return illegal("ordinary_lattice needs >= 2 ACs and 1 <= e with 2e < Delta");
            }
            if s.acs * (d + 1 - e) * e % 2 == 1 {
                return illegal("total external degree must be even");
            }
            if s.acs == 2 && e > 1 {
                return illegal("two ACs with e > 1 would make every outside node intrusive");
            }
        }
        GenKind::RejectCase => unreachable!(),
    }
    Ok(())
}

fn key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Edge multiset with a multiplicity index, repaired by random switches.
struct Bag {
    edges: Vec<(NodeId, NodeId)>,
    count: HashMap<(NodeId, NodeId), u32>,
}

impl Bag {
    fn new() -> Self {
        Bag { edges: Vec::new(), count: HashMap::new() }
    }

    fn push(&mut self, a: NodeId, b: NodeId) {
        self.edges.push((a, b));
        *self.count.entry(key(a, b)).or_insert(0) += 1;
    }

    fn has(&self, a: NodeId, b: NodeId) -> bool {
        self.count.get(&key(a, b)).copied().unwrap_or(0) > 0
    }

    fn take(&mut self, i: usize) {
        let (a, b) = self.edges[i];
        let c = self.count.get_mut(&key(a, b)).unwrap();
        *c -= 1;
        if *c == 0 {
            self.count.remove(&key(a, b));
        }
    }

    fn set(&mut self, i: usize, a: NodeId, b: NodeId) {
        self.edges[i] = (a, b);
        *self.count.entry(key(a, b)).or_insert(0) += 1;
    }

    fn bad(&self, i: usize, same: &dyn Fn(NodeId, NodeId) -> bool) -> bool {
        let (a, b) = self.edges[i];
        same(a, b) || self.count[&key(a, b)] > 1
    }

    /// Removes loops (`same`) and parallel edges among `edges[from..]` by
    /// double-edge switches. With `bipartite`, tuples are oriented (left,
    /// right) and switches keep that orientation.
    fn repair(&mut self, from: usize, same: &dyn Fn(NodeId, NodeId) -> bool, bipartite: bool, r: &mut ChaCha8Rng) -> bool {
        let len = self.edges.len() - from;
        if len < 2 {
            return (from..self.edges.len()).all(|i| !self.bad(i, same));
        }
        let mut bad: Vec<usize> = (from..self.edges.len()).filter(|&i| self.bad(i, same)).collect();
        let mut budget = 200 * len + 10_000;
        while let Some(&i) = bad.last() {
            if !self.bad(i, same) {
                bad.pop();
                continue;
            }
            if budget == 0 {
                return false;
            }
            budget -= 1;
            let j = from + r.gen_range(0..len);
            if j == i {
                continue;
            }
            let (a, b) = self.edges[i];
            let (c, d) = self.edges[j];
            let (x, y) = if bipartite || r.gen_bool(0.5) { ((a, d), (c, b)) } else { ((a, c), (b, d)) };
            if same(x.0, x.1) || same(y.0, y.1) || key(x.0, x.1) == key(y.0, y.1) || self.has(x.0, x.1) || self.has(y.0, y.1) {
                continue;
            }
            let j_was_bad = self.bad(j, same);
            self.take(i);
            self.take(j);
            self.set(i, x.0, x.1);
            self.set(j, y.0, y.1);
            if j_was_bad {
                bad.retain(|&k| k != j);
            }
        }
        true
    }

    fn into_graph(self, n: usize) -> std::result::Result<Graph, Retry> {
        Graph::from_edges(n, &self.edges).map_err(|e| Retry(e.to_string()))
    }
}

/// Pairs stubs uniformly at random. An odd stub out is dropped.
fn pair_stubs(bag: &mut Bag, mut stubs: Vec<NodeId>, r: &mut ChaCha8Rng) {
    stubs.shuffle(r);
    for p in stubs.chunks_exact(2) {
        bag.push(p[0], p[1]);
    }
}

fn random_regular(s: &GeneratorSpec, r: &mut ChaCha8Rng) -> Built {
    let mut bag = Bag::new();
    let stubs: Vec<NodeId> = (0..s.n as NodeId).flat_map(|v| std::iter::repeat(v).take(s.delta)).collect();
    pair_stubs(&mut bag, stubs, r);
    if !bag.repair(0, &|a, b| a == b, false, r) {
        return Err(Retry("switch repair did not converge".into()));
    }
    Ok(Instance { graph: bag.into_graph(s.n)?, planted: vec![] })
}

fn add_clique(bag: &mut Bag, nodes: &[NodeId]) {
    for (i, &u) in nodes.iter().enumerate() {
        for &v in &nodes[i + 1..] {
            bag.push(u, v);
        }
    }
}

/// Cliques of size Delta+1-e_C, each member with e_C edges to the sparse part;
/// the sparse part is a near-regular random graph on the remaining nodes.
fn planted_acd(s: &GeneratorSpec, r: &mut ChaCha8Rng) -> Built {
    let d = s.delta;
    let mut bag = Bag::new();
    let mut planted = Vec::new();
    let mut next = 0 as NodeId;
    let mut ac_stubs = Vec::new();
    for i in 0..s.acs {
        let e = s.ext_of(i);
        let c: Vec<NodeId> = (next..next + (d + 1 - e) as NodeId).collect();
        next += c.len() as NodeId;
        add_clique(&mut bag, &c);
        for &v in &c {
            ac_stubs.extend(std::iter::repeat(v).take(e));
        }
        planted.push(c);
    }
    let first_sparse = next;
    let sparse: Vec<NodeId> = (first_sparse..s.n as NodeId).collect();
    let mut sparse_stubs: Vec<NodeId> = sparse.iter().flat_map(|&v| std::iter::repeat(v).take(d)).collect();
    sparse_stubs.shuffle(r);
    ac_stubs.shuffle(r);
    let from = bag.edges.len();
    let used = ac_stubs.len();
    for (&a, &b) in ac_stubs.iter().zip(&sparse_stubs) {
        bag.push(a, b);
    }
    if !bag.repair(from, &|_, _| false, true, r) {
        return Err(Retry("AC-to-sparse switch repair failed".into()));
    }
    let from = bag.edges.len();
    pair_stubs(&mut bag, sparse_stubs.split_off(used), r);
    if !bag.repair(from, &|a, b| a == b, false, r) {
        return Err(Retry("sparse switch repair failed".into()));
    }
    let g = bag.into_graph(s.n)?;
    // Promise: each planted AC is a clique whose members all have degree Delta.
    for c in &planted {
        if c.iter().any(|&v| g.degree(v) != d) {
            return Err(Retry("planted AC member lost degree".into()));
        }
    }
    Ok(Instance { graph: g, planted })
}

fn nice_clique(delta: usize) -> Built {
    let n = delta + 1;
    let mut bag = Bag::new();
    let all: Vec<NodeId> = (0..n as NodeId).collect();
    add_clique(&mut bag, &all);
    let i = bag.edges.iter().position(|&e| e == (0, 1)).unwrap();
    bag.edges.swap_remove(i);
    Ok(Instance { graph: bag.into_graph(n)?, planted: vec![all] })
}

/// Layers C_0..C_{L-1} with e = 1, 2, 4, ...; the first node of C_{i+1} is
/// joined to 2e_i nodes of C_i, and a filler node plays that role for the
/// last layer. Remaining external stubs go to filler nodes, at most 2e_i - 1
/// per (filler, AC), so fillers are never intrusive. Fillers also get a sparse
/// random graph among themselves.
fn difficult_chain(s: &GeneratorSpec, r: &mut ChaCha8Rng) -> Built {
    let d = s.delta;
    let layers = s.layers;
    let ext: Vec<usize> = (0..layers).map(|i| 1 << i).collect();
    let mut planted = Vec::new();
    let mut next = 0 as NodeId;
    for &e in &ext {
        let c: Vec<NodeId> = (next..next + (d + 1 - e) as NodeId).collect();
        next += c.len() as NodeId;
        planted.push(c);
    }
    let mut need = vec![0usize; next as usize];
    for (i, c) in planted.iter().enumerate() {
        for &v in c {
            need[v as usize] = ext[i];
        }
    }
    let mut special_edges = Vec::new();
    for i in 0..layers.saturating_sub(1) {
        let s_i = planted[i + 1][0];
        for &u in &planted[i][1..=2 * ext[i]] {
            special_edges.push((s_i, u));
            need[u as usize] -= 1;
        }
        need[s_i as usize] -= 2 * ext[i];
    }
    // Filler count: enough to respect the per-AC cap, and at least Delta.
    let mut fillers = d;
    for (i, c) in planted.iter().enumerate() {
        let stubs: usize = c.iter().map(|&v| need[v as usize]).sum();
        fillers = fillers.max(stubs.div_ceil(2 * ext[i] - 1) + 2);
    }
    let n = next as usize + fillers;
    let f0 = next;
    let mut bag = Bag::new();
    for c in &planted {
        add_clique(&mut bag, c);
    }
    for &(a, b) in &special_edges {
        bag.push(a, b);
    }
    let last = layers - 1;
    for &u in &planted[last][1..=2 * ext[last]] {
        bag.push(f0, u);
        need[u as usize] -= 1;
    }
    let mut fdeg = vec![0usize; fillers];
    fdeg[0] = 2 * ext[last];
    for (i, c) in planted.iter().enumerate() {
        // The special filler of the last layer takes no further edges there.
        let skip = usize::from(i == last) as NodeId;
        let mut order: Vec<NodeId> = (skip..fillers as NodeId).collect();
        order.shuffle(r);
        let mut k = 0usize;
        for &v in c {
            for _ in 0..need[v as usize] {
                // Round-robin: consecutive stubs of v land on distinct fillers.
                let f = order[k % order.len()];
                k += 1;
                bag.push(v, f0 + f);
                fdeg[f as usize] += 1;
            }
        }
    }
    let target = (d / 4).clamp(3, d);
    let mut stubs = Vec::new();
    for (f, &deg) in fdeg.iter().enumerate() {
        stubs.extend(std::iter::repeat(f0 + f as NodeId).take(target.min(d.saturating_sub(deg))));
    }
    let from = bag.edges.len();
    pair_stubs(&mut bag, stubs, r);
    if !bag.repair(from, &|a, b| a == b, false, r) {
        return Err(Retry("filler switch repair failed".into()));
    }
    let g = bag.into_graph(n)?;
    for (i, c) in planted.iter().enumerate() {
        if c.iter().any(|&v| g.degree(v) != d) {
            return Err(Retry(format!("layer {i} member has degree != Delta")));
        }
    }
    Ok(Instance { graph: g, planted })
}

/// t cliques of size Delta+1-e; external edges form a random e-regular
/// multigraph between distinct ACs, repaired to a simple one.
fn ordinary_lattice(s: &GeneratorSpec, r: &mut ChaCha8Rng) -> Built {
    let d = s.delta;
    let e = s.ext_of(0);
    let size = d + 1 - e;
    let n = s.acs * size;
    let mut bag = Bag::new();
    let mut planted = Vec::new();
    for i in 0..s.acs {
        let c: Vec<NodeId> = ((i * size) as NodeId..((i + 1) * size) as NodeId).collect();
        add_clique(&mut bag, &c);
        planted.push(c);
    }
    let stubs: Vec<NodeId> = (0..n as NodeId).flat_map(|v| std::iter::repeat(v).take(e)).collect();
    let from = bag.edges.len();
    pair_stubs(&mut bag, stubs, r);
    let same = move |a: NodeId, b: NodeId| a as usize / size == b as usize / size;
    if !bag.repair(from, &same, false, r) {
        return Err(Retry("lattice switch repair failed".into()));
    }
    let g = bag.into_graph(n)?;
    // No outside node may reach 2e neighbors in one AC.
    for c in &planted {
        let mut hits: HashMap<NodeId, usize> = HashMap::new();
        for &v in c {
            for &w in g.neighbors(v) {
                if !same(v, w) {
                    *hits.entry(w).or_insert(0) += 1;
                }
            }
        }
        if hits.values().any(|&h| h >= 2 * e) {
            return Err(Retry("intrusive neighbor appeared".into()));
        }
    }
    Ok(Instance { graph: g, planted })
}

fn reject_case(s: &GeneratorSpec) -> Built {
    let mut bag = Bag::new();
    if s.delta == 2 {
        for i in 0..s.n as NodeId {
            bag.push(i, (i + 1) % s.n as NodeId);
        }
        return Ok(Instance { graph: bag.into_graph(s.n)?, planted: vec![] });
    }
    let all: Vec<NodeId> = (0..=s.delta as NodeId).collect();
    add_clique(&mut bag, &all);
    Ok(Instance { graph: bag.into_graph(s.delta + 1)?, planted: vec![all] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{count_non_edges, validate_delta_colorable};

    #[test]
    fn nice_clique_shape() {
        let g = generate(&GeneratorSpec::nice_clique(5)).unwrap();
        assert_eq!(g.n(), 6);
        assert_eq!(g.m(), 14);
        assert!(!g.has_edge(0, 1));
        assert!(validate_delta_colorable(&g).accepted());
    }

    #[test]
    fn random_regular_deterministic() {
        let s = GeneratorSpec::random_regular(4, 10, 7);
        let a = generate(&s).unwrap();
        let b = generate(&s).unwrap();
        assert_eq!(a, b);
        assert!(a.nodes().all(|v| a.degree(v) == 4));
        let c = generate(&GeneratorSpec::random_regular(4, 10, 8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_regular_larger() {
        let g = generate(&GeneratorSpec::random_regular(32, 2000, 1)).unwrap();
        assert_eq!(g.m(), 32 * 1000);
        assert!(g.nodes().all(|v| g.degree(v) == 32));
    }

    #[test]
    fn difficult_chain_small() {
        let spec = GeneratorSpec { eps: 0.25, ..GeneratorSpec::difficult_chain(9, 2, 0.25, 3) };
        let inst = generate_instance(&spec).unwrap();
        let g = &inst.graph;
        assert_eq!(inst.planted[0].len(), 9);
        assert_eq!(inst.planted[1].len(), 8);
        let s0 = inst.planted[1][0];
        let hits = inst.planted[0].iter().filter(|&&u| g.has_edge(s0, u)).count();
        assert_eq!(hits, 2);
        for c in &inst.planted {
            assert_eq!(count_non_edges(g, c), 0);
        }
    }

    #[test]
    fn ordinary_lattice_shape() {
        let inst = generate_instance(&GeneratorSpec::ordinary_lattice(16, 4, 1, 5)).unwrap();
        let g = &inst.graph;
        assert_eq!(g.n(), 64);
        assert!(g.nodes().all(|v| g.degree(v) == 16));
        for c in &inst.planted {
            assert!(g.is_clique(c));
        }
    }

    #[test]
    fn planted_acd_shape() {
        let spec = GeneratorSpec::planted_acd(32, 600, 3, vec![1, 2], 0.25, 9);
        assert!(generate(&spec).is_err(), "ext length must match");
        let spec = GeneratorSpec::planted_acd(32, 600, 2, vec![1, 2], 0.25, 9);
        let inst = generate_instance(&spec).unwrap();
        assert_eq!(inst.planted[0].len(), 32);
        assert_eq!(inst.planted[1].len(), 31);
        for c in &inst.planted {
            assert!(inst.graph.is_clique(c));
        }
    }

    #[test]
    fn illegal_specs() {
        let too_big = GeneratorSpec::planted_acd(32, 600, 1, vec![5], 1.0 / 12.0, 0);
        assert!(matches!(generate(&too_big), Err(Error::IllegalSpec(_))));
        assert!(generate(&GeneratorSpec::random_regular(2, 11, 0)).is_err());
        assert!(generate(&GeneratorSpec::random_regular(4, 5, 0)).is_err());
        let k5 = GeneratorSpec { n: 5, ..GeneratorSpec::new(GenKind::RejectCase, 4) };
        assert!(!validate_delta_colorable(&generate(&k5).unwrap()).accepted());
        let c5 = GeneratorSpec { n: 5, ..GeneratorSpec::new(GenKind::RejectCase, 2) };
        assert_eq!(generate(&c5).unwrap().m(), 5);
    }
}
