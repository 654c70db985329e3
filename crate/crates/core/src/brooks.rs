//! Centralized Delta-coloring by the constructive proof of Brooks' theorem.
//! Used as the fallback oracle and as an existence checker in tests.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

/// BFS order of the nodes reachable from `root` inside `alive`.
fn bfs_order(g: &Graph, root: NodeId, alive: &[bool]) -> Vec<NodeId> {
    let mut seen = vec![false; g.n()];
    let mut order = vec![root];
    seen[root as usize] = true;
    let mut i = 0;
    while i < order.len() {
        let v = order[i];
        i += 1;
        for &w in g.neighbors(v) {
            if alive[w as usize] && !seen[w as usize] {
                seen[w as usize] = true;
                order.push(w);
            }
        }
    }
    order
}

fn smallest_free(g: &Graph, colors: &[u32], v: NodeId, k: u32) -> Option<u32> {
    let mut used = vec![false; k as usize + 1];
    for &w in g.neighbors(v) {
        let c = colors[w as usize];
        if c != 0 && c <= k {
            used[c as usize] = true;
        }
    }
    (1..=k).find(|&c| !used[c as usize])
}

/// Greedy in reverse BFS order, so every node but the root still has an
/// uncolored parent when it is colored.
fn greedy_reverse(g: &Graph, order: &[NodeId], colors: &mut [u32], k: u32) -> Result<()> {
    for &v in order.iter().rev() {
        if colors[v as usize] != 0 {
            continue;
        }
        colors[v as usize] = smallest_free(g, colors, v, k).ok_or_else(|| Error::Structural(format!("Brooks greedy stuck at node {v}")))?;
    }
    Ok(())
}

fn connected_without(g: &Graph, comp: &[NodeId], alive: &[bool], drop: &[NodeId]) -> bool {
    let mut a = alive.to_vec();
    for &x in drop {
        a[x as usize] = false;
    }
    let Some(&start) = comp.iter().find(|&&v| a[v as usize]) else { return true };
    bfs_order(g, start, &a).len() == comp.len() - drop.len()
}

/// A cut vertex of the component, if any (iterative Tarjan).
fn cut_vertex(g: &Graph, comp: &[NodeId], alive: &[bool]) -> Option<NodeId> {
    let n = g.n();
    let mut disc = vec![0u32; n];
    let mut low = vec![0u32; n];
    let mut t = 0u32;
    let root = comp[0];
    let mut stack: Vec<(NodeId, NodeId, usize)> = vec![(root, NodeId::MAX, 0)];
    t += 1;
    disc[root as usize] = t;
    low[root as usize] = t;
    let mut root_children = 0;
    let mut found = None;
    while let Some(&mut (v, parent, ref mut i)) = stack.last_mut() {
        let nb = g.neighbors(v);
        if *i < nb.len() {
            let w = nb[*i];
            *i += 1;
            if !alive[w as usize] || w == parent {
                continue;
            }
            if disc[w as usize] == 0 {
                t += 1;
                disc[w as usize] = t;
                low[w as usize] = t;
                if v == root {
                    root_children += 1;
                }
                stack.push((w, v, 0));
            } else {
                low[v as usize] = low[v as usize].min(disc[w as usize]);
            }
        } else {
            stack.pop();
            if let Some(&(p, _, _)) = stack.last() {
                low[p as usize] = low[p as usize].min(low[v as usize]);
                if p != root && low[v as usize] >= disc[p as usize] && found.is_none() {
                    found = Some(p);
                }
            }
        }
    }
    if root_children > 1 {
        return Some(root);
    }
    found
}

/// Colors one connected component (given as `comp`, all alive) with `k` colors.
fn color_component(g: &Graph, comp: &[NodeId], alive: &[bool], colors: &mut [u32], k: u32) -> Result<()> {
    let deg_in = |v: NodeId| g.neighbors(v).iter().filter(|&&w| alive[w as usize]).count();
    if let Some(&r) = comp.iter().find(|&&v| deg_in(v) < k as usize) {
        return greedy_reverse(g, &bfs_order(g, r, alive), colors, k);
    }
    // k-regular from here on.
    if comp.len() == k as usize + 1 {
        return Err(Error::NotColorable(format!("component containing {} is K_{}", comp[0], k + 1)));
    }
    if let Some(c) = cut_vertex(g, comp, alive) {
        let mut rest = alive.to_vec();
        rest[c as usize] = false;
        let mut done = vec![false; g.n()];
        for &s in comp {
            if s == c || done[s as usize] || !rest[s as usize] {
                continue;
            }
            let part = bfs_order(g, s, &rest);
            let mut sub = vec![false; g.n()];
            for &v in &part {
                sub[v as usize] = true;
                done[v as usize] = true;
            }
            sub[c as usize] = true;
            let mut local = vec![0u32; g.n()];
            greedy_reverse(g, &bfs_order(g, c, &sub), &mut local, k)?;
            // Rename colors so c gets the color it already has (or keeps this one).
            let want = if colors[c as usize] == 0 { local[c as usize] } else { colors[c as usize] };
            let have = local[c as usize];
            for &v in &part {
                let x = local[v as usize];
                colors[v as usize] = if x == have { want } else if x == want { have } else { x };
            }
            colors[c as usize] = want;
        }
        return Ok(());
    }
    // 2-connected, regular, not complete: a node v with non-adjacent
    // neighbors u, w such that removing u and w keeps the component connected.
    for &v in comp {
        let nb: Vec<NodeId> = g.neighbors(v).iter().copied().filter(|&w| alive[w as usize]).collect();
        for i in 0..nb.len() {
            for j in i + 1..nb.len() {
                let (u, w) = (nb[i], nb[j]);
                if g.has_edge(u, w) || !connected_without(g, comp, alive, &[u, w]) {
                    continue;
                }
                colors[u as usize] = 1;
                colors[w as usize] = 1;
                let mut a = alive.to_vec();
                a[u as usize] = false;
                a[w as usize] = false;
                return greedy_reverse(g, &bfs_order(g, v, &a), colors, k);
            }
        }
    }
    Err(Error::Structural("no Brooks triple in a 2-connected regular component".into()))
}

/// A proper coloring with colors 1..=Delta. Fails with NotColorable on a
/// K_{Delta+1} component, or for Delta <= 2 on anything not colorable with
/// Delta colors (odd cycles for Delta = 2).
pub fn brooks_color(g: &Graph) -> Result<Vec<u32>> {
    let k = g.delta() as u32;
    let mut colors = vec![0u32; g.n()];
    if k <= 2 {
        // Paths and cycles: 2-color by parity where possible.
        for comp in g.components() {
            if comp.len() == 1 {
                if k == 0 {
                    return Err(Error::NotColorable("isolated node with Delta = 0".into()));
                }
                colors[comp[0] as usize] = 1;
                continue;
            }
            if k < 2 {
                return Err(Error::NotColorable("an edge needs two colors".into()));
            }
            let mut q = VecDeque::from([comp[0]]);
            colors[comp[0] as usize] = 1;
            while let Some(v) = q.pop_front() {
                for &w in g.neighbors(v) {
                    if colors[w as usize] == 0 {
                        colors[w as usize] = 3 - colors[v as usize];
                        q.push_back(w);
                    } else if colors[w as usize] == colors[v as usize] {
                        return Err(Error::NotColorable(format!("odd cycle through {v}")));
                    }
                }
            }
        }
        return Ok(colors);
    }
    let alive = vec![true; g.n()];
    for comp in g.components() {
        color_component(g, &comp, &alive, &mut colors, k)?;
    }
    crate::graph::check_coloring(g, &colors).map_err(|d| Error::Structural(format!("Brooks output defect: {d:?}")))?;
    Ok(colors)
}
