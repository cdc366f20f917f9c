//! Fill-reducing ordering.

use std::collections::BTreeSet;

/// Minimum degree ordering on the adjacency graph of a symmetric pattern.
///
/// Eliminates, at every step, the uneliminated vertex with the fewest
/// uneliminated neighbours (ties broken by lowest index), adding the fill
/// clique explicitly. Returns `perm` with `perm[new] = old`.
///
/// `adjacency[v]` lists neighbours of `v`; self loops are ignored.
pub fn minimum_degree(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let mut adj: Vec<Vec<usize>> = adjacency
        .iter()
        .enumerate()
        .map(|(v, nb)| {
            let mut nb: Vec<usize> = nb.iter().copied().filter(|&u| u != v).collect();
            nb.sort_unstable();
            nb.dedup();
            nb
        })
        .collect();
    let mut queue: BTreeSet<(usize, usize)> = adj
        .iter()
        .enumerate()
        .map(|(v, nb)| (nb.len(), v))
        .collect();
    let mut eliminated = vec![false; n];
    let mut perm = Vec::with_capacity(n);
    let mut merged = Vec::new();

    while let Some((_, v)) = queue.pop_first() {
        eliminated[v] = true;
        perm.push(v);
        let clique = std::mem::take(&mut adj[v]);
        for &u in &clique {
            debug_assert!(!eliminated[u]);
            queue.remove(&(adj[u].len(), u));
            // adj[u] := (adj[u] ∪ clique) \ {u, v}
            merged.clear();
            let (a, b) = (&adj[u], &clique);
            let (mut i, mut j) = (0, 0);
            while i < a.len() || j < b.len() {
                let x = if i < a.len() { a[i] } else { usize::MAX };
                let y = if j < b.len() { b[j] } else { usize::MAX };
                let next = x.min(y);
                if x == next {
                    i += 1;
                }
                if y == next {
                    j += 1;
                }
                if next != u && next != v {
                    merged.push(next);
                }
            }
            std::mem::swap(&mut adj[u], &mut merged);
            queue.insert((adj[u].len(), u));
        }
    }
    perm
}

pub(crate) fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    inv
}
