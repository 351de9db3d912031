use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Minimum-degree elimination order of an undirected graph.
///
/// `adjacency[v]` lists the neighbours of `v` (self-loops are ignored).
/// The elimination graph is updated explicitly; ties are broken by vertex
/// index, so the order is deterministic.
pub(crate) fn minimum_degree(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let mut adj: Vec<Vec<usize>> = adjacency
        .iter()
        .enumerate()
        .map(|(v, nb)| {
            let mut list: Vec<usize> = nb.iter().copied().filter(|&u| u != v).collect();
            list.sort_unstable();
            list.dedup();
            list
        })
        .collect();
    let mut eliminated = vec![false; n];
    let mut mark = vec![usize::MAX; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        adj.iter().enumerate().map(|(v, l)| Reverse((l.len(), v))).collect();
    let mut order = Vec::with_capacity(n);

    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || deg != adj[v].len() {
            continue;
        }
        eliminated[v] = true;
        order.push(v);
        let clique = std::mem::take(&mut adj[v]);
        for &u in &clique {
            // adj[u] <- (adj[u] ∪ clique) \ {u, v}
            let list = &mut adj[u];
            list.retain(|&w| w != v);
            for &w in list.iter() {
                mark[w] = u;
            }
            for &w in &clique {
                if w != u && mark[w] != u {
                    list.push(w);
                    mark[w] = u;
                }
            }
            heap.push(Reverse((list.len(), u)));
        }
    }
    debug_assert_eq!(order.len(), n);
    order
}
