//! Immutable simple undirected graph in CSR form, its text format, and small
//! exact helpers used throughout.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

pub type NodeId = u32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    nbrs: Vec<NodeId>,
    delta: usize,
}

impl Graph {
    /// Builds a graph from an edge list. Rejects self-loops, duplicate edges and
    /// out-of-range endpoints. Orientation of the input pairs does not matter.
    pub fn from_edges(n: usize, edges: &[(NodeId, NodeId)]) -> Result<Graph> {
        let mut deg = vec![0usize; n];
        for (i, &(u, v)) in edges.iter().enumerate() {
            if u as usize >= n || v as usize >= n {
                return Err(Error::Parse { line: i + 1, msg: format!("edge ({u}, {v}) out of range for n = {n}") });
            }
            if u == v {
                return Err(Error::Parse { line: i + 1, msg: format!("self-loop at {u}") });
            }
            deg[u as usize] += 1;
            deg[v as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &deg {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut nbrs = vec![0; offsets[n]];
        for &(u, v) in edges {
            nbrs[fill[u as usize]] = v;
            fill[u as usize] += 1;
            nbrs[fill[v as usize]] = u;
            fill[v as usize] += 1;
        }
        for v in 0..n {
            let row = &mut nbrs[offsets[v]..offsets[v + 1]];
            row.sort_unstable();
            if let Some(w) = row.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::Parse { line: 0, msg: format!("duplicate edge ({v}, {})", w[0]) });
            }
        }
        let delta = deg.iter().copied().max().unwrap_or(0);
        Ok(Graph { offsets, nbrs, delta })
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn m(&self) -> usize {
        self.nbrs.len() / 2
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.offsets[v as usize + 1] - self.offsets[v as usize]
    }

    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.nbrs[self.offsets[v as usize]..self.offsets[v as usize + 1]]
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        let (a, b) = if self.degree(u) <= self.degree(v) { (u, v) } else { (v, u) };
        self.neighbors(a).binary_search(&b).is_ok()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        0..self.n() as NodeId
    }

    /// Edges with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes().flat_map(move |u| self.neighbors(u).iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<NodeId>> {
        let mut seen = vec![false; self.n()];
        let mut out = Vec::new();
        for s in self.nodes() {
            if seen[s as usize] {
                continue;
            }
            seen[s as usize] = true;
            let mut comp = vec![s];
            let mut i = 0;
            while i < comp.len() {
                let v = comp[i];
                i += 1;
                for &w in self.neighbors(v) {
                    if !seen[w as usize] {
                        seen[w as usize] = true;
                        comp.push(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.m() * 12 + 16);
        let _ = writeln!(s, "{} {}", self.n(), self.delta);
        for (u, v) in self.edges() {
            let _ = writeln!(s, "{u} {v}");
        }
        s
    }

    /// Parses the graph file format: a header `n Delta`, then one `u v` line per
    /// edge with `u < v`. Blank lines are ignored. The declared Delta must equal
    /// the maximum degree.
    pub fn parse(text: &str) -> Result<Graph> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
        let [n, delta] = parse_pair(header, hl + 1)?;
        if n > 1 << 26 {
            return Err(Error::Parse { line: hl + 1, msg: format!("n = {n} too large") });
        }
        let mut edges = Vec::new();
        for (i, line) in lines {
            let [u, v] = parse_pair(line, i + 1)?;
            if u >= v {
                return Err(Error::Parse { line: i + 1, msg: format!("expected u < v, got {u} {v}") });
            }
            if v >= n {
                return Err(Error::Parse { line: i + 1, msg: format!("node {v} out of range") });
            }
            edges.push((u as NodeId, v as NodeId));
        }
        let g = Graph::from_edges(n as usize, &edges)?;
        if g.delta() != delta as usize {
            return Err(Error::Parse { line: hl + 1, msg: format!("header says Delta = {delta}, max degree is {}", g.delta()) });
        }
        Ok(g)
    }

    /// Induced subgraph check: is `s` a clique?
    pub fn is_clique(&self, s: &[NodeId]) -> bool {
        count_non_edges(self, s) == 0
    }
}

fn parse_pair(line: &str, lineno: usize) -> Result<[u64; 2]> {
    let mut it = line.split_whitespace();
    let mut next = || -> Result<u64> {
        let tok = it.next().ok_or(Error::Parse { line: lineno, msg: "expected two integers".into() })?;
        tok.parse::<u64>().map_err(|e| Error::Parse { line: lineno, msg: format!("{tok:?}: {e}") })
    };
    let a = next()?;
    let b = next()?;
    if it.next().is_some() {
        return Err(Error::Parse { line: lineno, msg: "trailing tokens".into() });
    }
    if a > u32::MAX as u64 || b > u32::MAX as u64 {
        return Err(Error::Parse { line: lineno, msg: "value exceeds u32".into() });
    }
    Ok([a, b])
}

/// Number of unordered pairs of `s` not joined by an edge. Duplicates in `s`
/// are ignored.
pub fn count_non_edges(g: &Graph, s: &[NodeId]) -> u64 {
    let mut mark = vec![false; g.n()];
    let mut k = 0u64;
    for &v in s {
        if !mark[v as usize] {
            mark[v as usize] = true;
            k += 1;
        }
    }
    let mut inside = 0u64;
    for v in 0..g.n() {
        if mark[v] {
            inside += g.neighbors(v as NodeId).iter().filter(|&&w| mark[w as usize]).count() as u64;
        }
    }
    k * k.saturating_sub(1) / 2 - inside / 2
}

/// Non-edges inside `N(v)`, counting stops once `stop_at` is reached.
/// `mark` must be all-false on entry and is restored.
pub fn neighborhood_non_edges(g: &Graph, v: NodeId, stop_at: u64, mark: &mut [bool]) -> u64 {
    let nb = g.neighbors(v);
    for &u in nb {
        mark[u as usize] = true;
    }
    let mut non = 0u64;
    let mut remaining = nb.len() as u64;
    for &u in nb {
        remaining -= 1;
        let adj_later = g.neighbors(u).iter().filter(|&&w| w > u && mark[w as usize]).count() as u64;
        let later = nb.iter().filter(|&&w| w > u).count() as u64;
        debug_assert_eq!(later, remaining);
        non += later - adj_later;
        if non >= stop_at {
            break;
        }
    }
    for &u in nb {
        mark[u as usize] = false;
    }
    non
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Accept,
    DeltaTooSmall(usize),
    CliqueComponent(Vec<NodeId>),
}

impl Verdict {
    pub fn accepted(&self) -> bool {
        matches!(self, Verdict::Accept)
    }
}

/// Accepts iff Delta >= 3 and no connected component is a clique on Delta+1 nodes.
pub fn validate_delta_colorable(g: &Graph) -> Verdict {
    if g.delta() < 3 {
        return Verdict::DeltaTooSmall(g.delta());
    }
    for comp in g.components() {
        if comp.len() == g.delta() + 1 && comp.iter().all(|&v| g.degree(v) == g.delta()) {
            return Verdict::CliqueComponent(comp);
        }
    }
    Verdict::Accept
}

/// Independent checker: every node colored from `1..=Delta`, every edge bichromatic.
/// Returns the first offending edge or node.
pub fn check_coloring(g: &Graph, colors: &[u32]) -> std::result::Result<(), ColoringDefect> {
    if colors.len() != g.n() {
        return Err(ColoringDefect::Length { expected: g.n(), got: colors.len() });
    }
    for v in g.nodes() {
        let c = colors[v as usize];
        if c == 0 || c as usize > g.delta() {
            return Err(ColoringDefect::BadColor { node: v, color: c });
        }
    }
    for (u, v) in g.edges() {
        if colors[u as usize] == colors[v as usize] {
            return Err(ColoringDefect::Monochromatic { u, v, color: colors[u as usize] });
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum ColoringDefect {
    Length { expected: usize, got: usize },
    BadColor { node: NodeId, color: u32 },
    Monochromatic { u: NodeId, v: NodeId, color: u32 },
}

impl std::fmt::Display for ColoringDefect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ColoringDefect::Length { expected, got } => write!(f, "expected {expected} colors, got {got}"),
            ColoringDefect::BadColor { node, color } => write!(f, "node {node} has color {color} outside [Delta]"),
            ColoringDefect::Monochromatic { u, v, color } => write!(f, "edge ({u}, {v}) is monochromatic with color {color}"),
        }
    }
}

/// Parses the coloring format: one `id color` line per node, any order, each
/// node exactly once.
pub fn parse_coloring(text: &str, n: usize) -> Result<Vec<u32>> {
    let mut colors = vec![0u32; n];
    let mut seen = vec![false; n];
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let [id, c] = parse_pair(line, i + 1)?;
        let id = id as usize;
        if id >= n {
            return Err(Error::Parse { line: i + 1, msg: format!("node {id} out of range") });
        }
        if seen[id] {
            return Err(Error::Parse { line: i + 1, msg: format!("node {id} listed twice") });
        }
        seen[id] = true;
        colors[id] = c as u32;
    }
    if let Some(v) = seen.iter().position(|s| !s) {
        return Err(Error::Parse { line: 0, msg: format!("node {v} has no color") });
    }
    Ok(colors)
}

pub fn coloring_to_text(colors: &[u32]) -> String {
    let mut s = String::with_capacity(colors.len() * 8);
    for (v, c) in colors.iter().enumerate() {
        let _ = writeln!(s, "{v} {c}");
    }
    s
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn csr_basics() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 1), (3, 0)]).unwrap();
        assert_eq!(g.n(), 4);
        assert_eq!(g.m(), 3);
        assert_eq!(g.delta(), 2);
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert!(g.has_edge(3, 0));
        assert!(!g.has_edge(2, 3));
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (0, 3), (1, 2)]);
    }

    #[test]
    fn rejects_loops_and_duplicates() {
        assert!(Graph::from_edges(3, &[(1, 1)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 1), (1, 0)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 3)]).is_err());
    }

    #[test]
    fn text_roundtrip() {
        let g = petersen();
        let t = g.to_text();
        assert!(t.starts_with("10 3\n"));
        assert_eq!(Graph::parse(&t).unwrap(), g);
    }

    #[test]
    fn parse_errors_carry_lines() {
        assert!(matches!(Graph::parse(""), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(Graph::parse("3 1\n1 0\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(Graph::parse("3 1\n0 1\n0 x\n"), Err(Error::Parse { line: 3, .. })));
        assert!(Graph::parse("3 2\n0 1\n").is_err());
        assert!(Graph::parse("3 1\n0 1 2\n").is_err());
    }

    #[test]
    fn non_edge_counts() {
        assert_eq!(count_non_edges(&complete(4), &[0, 1, 2, 3]), 0);
        let empty = Graph::from_edges(5, &[]).unwrap();
        assert_eq!(count_non_edges(&empty, &[0, 1, 2, 3, 4]), 10);
        assert_eq!(count_non_edges(&cycle(5), &[0, 1, 2, 3, 4]), 5);
        assert_eq!(count_non_edges(&cycle(5), &[0, 0, 1]), 0);
    }

    #[test]
    fn neighborhood_non_edges_matches_count() {
        let g = petersen();
        let mut mark = vec![false; g.n()];
        for v in g.nodes() {
            let full = neighborhood_non_edges(&g, v, u64::MAX, &mut mark);
            assert_eq!(full, count_non_edges(&g, g.neighbors(v)));
            assert!(mark.iter().all(|m| !m));
        }
        assert_eq!(neighborhood_non_edges(&complete(6), 0, u64::MAX, &mut vec![false; 6]), 0);
    }

    #[test]
    fn brooks_verdicts() {
        assert!(matches!(validate_delta_colorable(&complete(5)), Verdict::CliqueComponent(_)));
        assert_eq!(validate_delta_colorable(&cycle(5)), Verdict::DeltaTooSmall(2));
        assert_eq!(validate_delta_colorable(&petersen()), Verdict::Accept);
        // K4 as one component of a Delta = 4 graph is fine: it is not K5.
        let mut e = vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        e.extend([(4, 5), (4, 6), (4, 7), (4, 8)]);
        assert_eq!(validate_delta_colorable(&Graph::from_edges(9, &e).unwrap()), Verdict::Accept);
    }

    #[test]
    fn coloring_checker() {
        let g = cycle(4);
        assert_eq!(check_coloring(&g, &[1, 2, 1, 2]), Ok(()));
        assert!(matches!(check_coloring(&g, &[1, 1, 2, 1]), Err(ColoringDefect::Monochromatic { u: 0, v: 1, .. })));
        assert!(matches!(check_coloring(&g, &[1, 2, 3, 2]), Err(ColoringDefect::BadColor { node: 2, .. })));
        assert!(matches!(check_coloring(&g, &[1, 2]), Err(ColoringDefect::Length { .. })));
    }

    #[test]
    fn coloring_text_roundtrip() {
        let c = vec![3, 1, 2, 1];
        assert_eq!(parse_coloring(&coloring_to_text(&c), 4).unwrap(), c);
        assert!(parse_coloring("0 1\n0 2\n", 2).is_err());
        assert!(parse_coloring("0 1\n", 2).is_err());
        assert!(parse_coloring("5 1\n", 2).is_err());
    }
}
