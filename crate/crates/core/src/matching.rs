//! Exact maximum bipartite matching (Hopcroft-Karp).

use std::collections::VecDeque;

/// Maximum matching between `0..left` and `0..right`. `edges` are (l, r)
/// pairs; duplicates are harmless. Returns matched pairs sorted by left end.
pub fn max_bipartite_matching(left: usize, right: usize, edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut adj = vec![Vec::new(); left];
    for &(l, r) in edges {
        assert!(l < left && r < right, "edge ({l}, {r}) out of range");
        adj[l].push(r);
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    const FREE: usize = usize::MAX;
    let mut ml = vec![FREE; left];
    let mut mr = vec![FREE; right];
    let mut dist = vec![0usize; left];
    loop {
        // BFS layering from free left vertices.
        let mut q = VecDeque::new();
        for l in 0..left {
            if ml[l] == FREE {
                dist[l] = 0;
                q.push_back(l);
            } else {
                dist[l] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(l) = q.pop_front() {
            for &r in &adj[l] {
                let m = mr[r];
                if m == FREE {
                    found = true;
                } else if dist[m] == usize::MAX {
                    dist[m] = dist[l] + 1;
                    q.push_back(m);
                }
            }
        }
        if !found {
            break;
        }
        let mut it = vec![0usize; left];
        for l in 0..left {
            if ml[l] == FREE {
                augment(l, &adj, &mut ml, &mut mr, &mut dist, &mut it);
            }
        }
    }
    (0..left).filter(|&l| ml[l] != FREE).map(|l| (l, ml[l])).collect()
}

/// Iterative DFS along the layered graph.
fn augment(root: usize, adj: &[Vec<usize>], ml: &mut [usize], mr: &mut [usize], dist: &mut [usize], it: &mut [usize]) -> bool {
    const FREE: usize = usize::MAX;
    let mut stack = vec![root];
    while let Some(&l) = stack.last() {
        if it[l] == adj[l].len() {
            dist[l] = usize::MAX;
            stack.pop();
            continue;
        }
        let r = adj[l][it[l]];
        let m = mr[r];
        if m == FREE {
            // Flip the path recorded on the stack.
            for i in (0..stack.len()).rev() {
                let u = stack[i];
                let rr = adj[u][it[u]];
                ml[u] = rr;
                mr[rr] = u;
            }
            return true;
        }
        if dist[m] == dist[l] + 1 {
            stack.push(m);
        } else {
            it[l] += 1;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(left: usize, right: usize, edges: &[(usize, usize)]) -> usize {
        fn go(l: usize, left: usize, adj: &[Vec<usize>], used: &mut Vec<bool>) -> usize {
            if l == left {
                return 0;
            }
            let mut best = go(l + 1, left, adj, used);
            for &r in &adj[l] {
                if !used[r] {
                    used[r] = true;
                    best = best.max(1 + go(l + 1, left, adj, used));
                    used[r] = false;
                }
            }
            best
        }
        let mut adj = vec![Vec::new(); left];
        for &(l, r) in edges {
            adj[l].push(r);
        }
        go(0, left, &adj, &mut vec![false; right])
    }

    fn check(left: usize, right: usize, edges: &[(usize, usize)], m: &[(usize, usize)]) {
        let mut seen = vec![false; right];
        for &(l, r) in m {
            assert!(edges.contains(&(l, r)));
            assert!(!seen[r]);
            seen[r] = true;
        }
        assert!(m.windows(2).all(|w| w[0].0 < w[1].0));
        let _ = left;
    }

    #[test]
    fn k33() {
        let e: Vec<_> = (0..3).flat_map(|l| (0..3).map(move |r| (l, r))).collect();
        assert_eq!(max_bipartite_matching(3, 3, &e).len(), 3);
    }

    #[test]
    fn star() {
        let e = vec![(0, 0), (1, 0), (2, 0)];
        assert_eq!(max_bipartite_matching(3, 1, &e).len(), 1);
    }

    #[test]
    fn needs_augmenting_path() {
        let e = vec![(0, 0), (0, 1), (1, 0)];
        assert_eq!(max_bipartite_matching(2, 2, &e).len(), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(400))]
        #[test]
        fn agrees_with_brute_force(left in 0usize..=8, right in 0usize..=8, bits in proptest::collection::vec(any::<bool>(), 64)) {
            let mut e = Vec::new();
            for l in 0..left {
                for r in 0..right {
                    if bits[l * 8 + r] {
                        e.push((l, r));
                    }
                }
            }
            let m = max_bipartite_matching(left, right, &e);
            check(left, right, &e, &m);
            prop_assert_eq!(m.len(), brute(left, right, &e));
        }
    }
}
