//! Bipartite graphs with bitset adjacency, complete bipartite subgraph
//! search, strong edge coloring and induced matchings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    fn new(bits: usize) -> Self {
        BitSet { words: vec![0; bits.div_ceil(64)] }
    }

    #[inline]
    fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    #[inline]
    fn contains(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn intersection_len(&self, other: &BitSet) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    fn intersect_into(&self, other: &BitSet, out: &mut BitSet) {
        for ((o, a), b) in out.words.iter_mut().zip(&self.words).zip(&other.words) {
            *o = a & b;
        }
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let t = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(k * 64 + t)
            })
        })
    }
}

/// Bipartite graph on `left + right` vertices with optional edge labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BipartiteGraph {
    left: usize,
    right: usize,
    adj: Vec<BitSet>,
    radj: Vec<BitSet>,
    labels: BTreeMap<(usize, usize), usize>,
}

impl BipartiteGraph {
    pub fn new(left: usize, right: usize) -> Self {
        BipartiteGraph {
            left,
            right,
            adj: vec![BitSet::new(right); left],
            radj: vec![BitSet::new(left); right],
            labels: BTreeMap::new(),
        }
    }

    pub fn from_edges(left: usize, right: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::new(left, right);
        for &(l, r) in edges {
            g.add_edge(l, r);
        }
        g
    }

    pub fn add_edge(&mut self, l: usize, r: usize) {
        self.adj[l].insert(r);
        self.radj[r].insert(l);
    }

    pub fn add_labeled_edge(&mut self, l: usize, r: usize, label: usize) {
        self.add_edge(l, r);
        self.labels.insert((l, r), label);
    }

    pub fn left_len(&self) -> usize {
        self.left
    }

    pub fn right_len(&self) -> usize {
        self.right
    }

    #[inline]
    pub fn has_edge(&self, l: usize, r: usize) -> bool {
        self.adj[l].contains(r)
    }

    pub fn label(&self, l: usize, r: usize) -> Option<usize> {
        self.labels.get(&(l, r)).copied()
    }

    /// Edges in lexicographic `(left, right)` order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.left)
            .flat_map(|l| self.adj[l].iter().map(move |r| (l, r)))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BitSet::len).sum()
    }

    pub fn left_degree(&self, l: usize) -> usize {
        self.adj[l].len()
    }

    pub fn right_degree(&self, r: usize) -> usize {
        self.radj[r].len()
    }

    pub fn left_neighbors(&self, l: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[l].iter()
    }

    pub fn right_neighbors(&self, r: usize) -> impl Iterator<Item = usize> + '_ {
        self.radj[r].iter()
    }

    /// Maximum degree over both sides.
    pub fn max_degree(&self) -> usize {
        let l = (0..self.left).map(|v| self.left_degree(v)).max().unwrap_or(0);
        let r = (0..self.right).map(|v| self.right_degree(v)).max().unwrap_or(0);
        l.max(r)
    }

    /// Edge list as CSV: `left,right` or `left,right,label` when labeled.
    pub fn to_csv(&self) -> String {
        let labeled = !self.labels.is_empty();
        let mut out = String::from(if labeled { "left,right,label\n" } else { "left,right\n" });
        for (l, r) in self.edges() {
            match self.label(l, r) {
                Some(v) if labeled => writeln!(out, "{l},{r},{v}").unwrap(),
                _ if labeled => writeln!(out, "{l},{r},").unwrap(),
                _ => writeln!(out, "{l},{r}").unwrap(),
            }
        }
        out
    }

    /// True iff every `(l, r)` with `l` in `lefts` and `r` in `rights` is an
    /// edge.
    pub fn is_complete_between(&self, lefts: &[usize], rights: &[usize]) -> bool {
        lefts.iter().all(|&l| rights.iter().all(|&r| self.has_edge(l, r)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BicliqueMode {
    /// Branch and bound; decides existence.
    Exact,
    /// Common-neighborhood greedy; may miss.
    Greedy,
}

/// Left and right vertex sets of a complete bipartite subgraph.
pub type Biclique = (Vec<usize>, Vec<usize>);

/// Searches for a `K_{b,b}`. `Ok(None)` means none exists (exact mode) or
/// none was found (greedy mode); an exhausted budget is an error.
pub fn find_complete_bipartite(
    g: &BipartiteGraph,
    b: usize,
    mode: BicliqueMode,
    budget: u64,
) -> Result<Option<Biclique>> {
    if b == 0 || b > g.left.min(g.right) {
        return Err(Error::Domain(format!(
            "K_{{{b},{b}}} does not fit a {}+{} graph",
            g.left, g.right
        )));
    }
    let mut order: Vec<usize> = (0..g.left).filter(|&l| g.left_degree(l) >= b).collect();
    order.sort_by_key(|&l| (std::cmp::Reverse(g.left_degree(l)), l));
    let found = match mode {
        BicliqueMode::Exact => {
            let mut search = BicliqueSearch {
                g,
                b,
                order: &order,
                chosen: Vec::with_capacity(b),
                nodes: 0,
                budget,
            };
            let mut full = BitSet::new(g.right);
            for r in 0..g.right {
                full.insert(r);
            }
            match search.extend(0, &full) {
                Ok(found) => found,
                Err(()) => return Err(Error::BudgetExhausted { budget }),
            }
        }
        BicliqueMode::Greedy => greedy_biclique(g, b, &order),
    };
    Ok(found.map(|(lefts, common)| {
        let rights: Vec<usize> = common.iter().take(b).collect();
        let mut lefts = lefts;
        lefts.sort_unstable();
        debug_assert!(g.is_complete_between(&lefts, &rights));
        (lefts, rights)
    }))
}

struct BicliqueSearch<'a> {
    g: &'a BipartiteGraph,
    b: usize,
    order: &'a [usize],
    chosen: Vec<usize>,
    nodes: u64,
    budget: u64,
}

impl BicliqueSearch<'_> {
    fn extend(&mut self, start: usize, common: &BitSet) -> std::result::Result<Option<(Vec<usize>, BitSet)>, ()> {
        if self.chosen.len() == self.b {
            return Ok(Some((self.chosen.clone(), common.clone())));
        }
        let need = self.b - self.chosen.len();
        let mut next = BitSet::new(self.g.right);
        for i in start..self.order.len() {
            if self.order.len() - i < need {
                break;
            }
            let v = self.order[i];
            common.intersect_into(&self.g.adj[v], &mut next);
            if next.len() < self.b {
                continue;
            }
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(());
            }
            self.chosen.push(v);
            if let Some(found) = self.extend(i + 1, &next)? {
                return Ok(Some(found));
            }
            self.chosen.pop();
        }
        Ok(None)
    }
}

fn greedy_biclique(g: &BipartiteGraph, b: usize, order: &[usize]) -> Option<(Vec<usize>, BitSet)> {
    for &start in order {
        let mut chosen = vec![start];
        let mut common = g.adj[start].clone();
        while chosen.len() < b {
            let best = order
                .iter()
                .filter(|v| !chosen.contains(v))
                .map(|&v| (common.intersection_len(&g.adj[v]), std::cmp::Reverse(v)))
                .max();
            let Some((_, std::cmp::Reverse(v))) = best else { break };
            let mut next = BitSet::new(g.right);
            common.intersect_into(&g.adj[v], &mut next);
            common = next;
            chosen.push(v);
        }
        if chosen.len() == b && common.len() >= b {
            return Some((chosen, common));
        }
    }
    None
}

/// A set of edges, pairwise disjoint and with no host edge joining two of
/// them.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InducedMatching {
    pub edges: Vec<(usize, usize)>,
}

impl InducedMatching {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Checks the definition against the host graph.
    pub fn is_induced_in(&self, g: &BipartiteGraph) -> bool {
        self.edges.iter().all(|&(l, r)| g.has_edge(l, r))
            && self.edges.iter().enumerate().all(|(i, &(l1, r1))| {
                self.edges[..i]
                    .iter()
                    .all(|&(l2, r2)| l1 != l2 && r1 != r2 && !g.has_edge(l1, r2) && !g.has_edge(l2, r1))
            })
    }
}

/// Greedy strong edge coloring. Edges are visited in lexicographic order;
/// each takes the smallest color not used by an edge at distance at most
/// one. Returns one color per edge of [`BipartiteGraph::edges`].
pub fn strong_edge_coloring(g: &BipartiteGraph) -> Vec<usize> {
    let edges = g.edges();
    let mut left_edges: Vec<Vec<usize>> = vec![Vec::new(); g.left];
    let mut right_edges: Vec<Vec<usize>> = vec![Vec::new(); g.right];
    for (id, &(l, r)) in edges.iter().enumerate() {
        left_edges[l].push(id);
        right_edges[r].push(id);
    }
    const UNCOLORED: usize = usize::MAX;
    let mut color = vec![UNCOLORED; edges.len()];
    let mut seen: Vec<usize> = Vec::new();
    for (id, &(l, r)) in edges.iter().enumerate() {
        // Conflicting edges touch a left neighbor of r or a right neighbor of l.
        let stamp = id;
        let mark = |e: usize, seen: &mut Vec<usize>| {
            let c = color[e];
            if c != UNCOLORED {
                seen[c] = stamp;
            }
        };
        for l2 in g.right_neighbors(r) {
            for &e in &left_edges[l2] {
                mark(e, &mut seen);
            }
        }
        for r2 in g.left_neighbors(l) {
            for &e in &right_edges[r2] {
                mark(e, &mut seen);
            }
        }
        let c = (0..seen.len()).find(|&c| seen[c] != stamp).unwrap_or(seen.len());
        if c == seen.len() {
            seen.push(usize::MAX);
        }
        color[id] = c;
    }
    color
}

/// Largest color class of the greedy strong edge coloring (smallest color
/// on ties).
pub fn strong_coloring_matching(g: &BipartiteGraph) -> InducedMatching {
    let edges = g.edges();
    let colors = strong_edge_coloring(g);
    let classes = colors.iter().max().map_or(0, |&c| c + 1);
    let mut sizes = vec![0usize; classes];
    for &c in &colors {
        sizes[c] += 1;
    }
    let Some(best) = (0..classes).max_by_key(|&c| (sizes[c], std::cmp::Reverse(c))) else {
        return InducedMatching::default();
    };
    InducedMatching {
        edges: edges
            .into_iter()
            .zip(colors)
            .filter(|&(_, c)| c == best)
            .map(|(e, _)| e)
            .collect(),
    }
}

/// Largest edge count accepted by [`max_induced_matching_exact`].
pub const EXACT_MATCHING_MAX_EDGES: usize = 24;

/// Maximum induced matching by exhaustive branching over edge subsets.
pub fn max_induced_matching_exact(g: &BipartiteGraph, budget: u64) -> Result<InducedMatching> {
    let edges = g.edges();
    let m = edges.len();
    if m > EXACT_MATCHING_MAX_EDGES {
        return Err(Error::Domain(format!(
            "exact induced matching supports at most {EXACT_MATCHING_MAX_EDGES} edges, got {m}"
        )));
    }
    let conflict: Vec<u32> = edges
        .iter()
        .map(|&(l1, r1)| {
            edges.iter().enumerate().fold(0u32, |mask, (j, &(l2, r2))| {
                let clash = l1 == l2 || r1 == r2 || g.has_edge(l1, r2) || g.has_edge(l2, r1);
                if clash {
                    mask | 1 << j
                } else {
                    mask
                }
            })
        })
        .collect();
    let mut best = 0u32;
    let mut nodes = 0u64;
    let all = if m == 32 { u32::MAX } else { (1u32 << m) - 1 };
    if !branch_independent(&conflict, all, 0, &mut best, &mut nodes, budget) {
        return Err(Error::BudgetExhausted { budget });
    }
    Ok(InducedMatching {
        edges: (0..m).filter(|&i| best >> i & 1 == 1).map(|i| edges[i]).collect(),
    })
}

/// Maximum independent set in the edge-conflict graph. False when the budget
/// runs out.
fn branch_independent(conflict: &[u32], cand: u32, chosen: u32, best: &mut u32, nodes: &mut u64, budget: u64) -> bool {
    *nodes += 1;
    if *nodes > budget {
        return false;
    }
    if cand == 0 {
        if chosen.count_ones() > best.count_ones() {
            *best = chosen;
        }
        return true;
    }
    if chosen.count_ones() + cand.count_ones() <= best.count_ones() {
        return true;
    }
    let v = cand.trailing_zeros() as usize;
    let bit = 1u32 << v;
    branch_independent(conflict, cand & !conflict[v] & !bit, chosen | bit, best, nodes, budget)
        && branch_independent(conflict, cand & !bit, chosen, best, nodes, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    const BUDGET: u64 = 1 << 30;

    fn complete(n: usize) -> BipartiteGraph {
        let edges: Vec<_> = (0..n).flat_map(|l| (0..n).map(move |r| (l, r))).collect();
        BipartiteGraph::from_edges(n, n, &edges)
    }

    fn matching(n: usize) -> BipartiteGraph {
        BipartiteGraph::from_edges(n, n, &(0..n).map(|i| (i, i)).collect::<Vec<_>>())
    }

    /// Brute force over all edge subsets.
    fn brute_max_induced(g: &BipartiteGraph) -> usize {
        let edges = g.edges();
        (0u32..1 << edges.len())
            .filter(|mask| {
                let m = InducedMatching {
                    edges: (0..edges.len()).filter(|i| mask >> i & 1 == 1).map(|i| edges[i]).collect(),
                };
                m.is_induced_in(g)
            })
            .map(u32::count_ones)
            .max()
            .unwrap_or(0) as usize
    }

    fn random_graph(r: &mut rng::Rng, left: usize, right: usize, m: usize) -> BipartiteGraph {
        let mut g = BipartiteGraph::new(left, right);
        while g.edge_count() < m.min(left * right) {
            let l = rng::below(r, left as u64) as usize;
            let rr = rng::below(r, right as u64) as usize;
            g.add_edge(l, rr);
        }
        g
    }

    #[test]
    fn bitset_basics() {
        let mut s = BitSet::new(130);
        for i in [0, 63, 64, 129] {
            s.insert(i);
        }
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![0, 63, 64, 129]);
        assert_eq!(s.len(), 4);
        assert!(s.contains(64) && !s.contains(65));
    }

    #[test]
    fn biclique_examples() {
        let k = find_complete_bipartite(&complete(3), 2, BicliqueMode::Exact, BUDGET).unwrap();
        assert_eq!(k, Some((vec![0, 1], vec![0, 1])));
        assert_eq!(find_complete_bipartite(&matching(4), 2, BicliqueMode::Exact, BUDGET).unwrap(), None);
        assert_eq!(find_complete_bipartite(&matching(4), 2, BicliqueMode::Greedy, BUDGET).unwrap(), None);
        assert!(find_complete_bipartite(&matching(4), 5, BicliqueMode::Exact, BUDGET).is_err());
        assert!(matches!(
            find_complete_bipartite(&complete(6), 4, BicliqueMode::Exact, 2),
            Err(Error::BudgetExhausted { .. })
        ));
    }

    #[test]
    fn exact_biclique_matches_brute_force() {
        let mut r = rng::seeded(5);
        for _ in 0..200 {
            let n = 3 + rng::below(&mut r, 4) as usize;
            let m = rng::below(&mut r, (n * n) as u64 + 1) as usize;
            let g = random_graph(&mut r, n, n, m);
            let exists = (0u32..1 << n).filter(|s| s.count_ones() == 2).any(|s| {
                let lefts: Vec<usize> = (0..n).filter(|i| s >> i & 1 == 1).collect();
                (0..n).filter(|&rr| lefts.iter().all(|&l| g.has_edge(l, rr))).count() >= 2
            });
            let exact = find_complete_bipartite(&g, 2, BicliqueMode::Exact, BUDGET).unwrap();
            assert_eq!(exact.is_some(), exists);
            if let Some((ls, rs)) = exact {
                assert!(g.is_complete_between(&ls, &rs));
            }
            if let Some((ls, rs)) = find_complete_bipartite(&g, 2, BicliqueMode::Greedy, BUDGET).unwrap() {
                assert!(exists && g.is_complete_between(&ls, &rs));
            }
        }
    }

    #[test]
    fn coloring_examples() {
        let single = BipartiteGraph::from_edges(1, 1, &[(0, 0)]);
        assert_eq!(strong_coloring_matching(&single).edges, vec![(0, 0)]);
        let path = BipartiteGraph::from_edges(2, 2, &[(0, 0), (1, 0), (1, 1)]);
        assert_eq!(path.max_degree(), 2);
        let m = strong_coloring_matching(&path);
        assert!(!m.is_empty() && m.is_induced_in(&path));
        assert_eq!(brute_max_induced(&path), 1);
        assert_eq!(strong_coloring_matching(&matching(5)).len(), 5);
    }

    #[test]
    fn exact_matching_examples() {
        let path = BipartiteGraph::from_edges(2, 2, &[(0, 0), (1, 0), (1, 1)]);
        assert_eq!(max_induced_matching_exact(&path, BUDGET).unwrap().len(), 1);
        assert_eq!(max_induced_matching_exact(&matching(3), BUDGET).unwrap().len(), 3);
        assert_eq!(max_induced_matching_exact(&complete(2), BUDGET).unwrap().len(), 1);
        assert!(max_induced_matching_exact(&complete(5), BUDGET).is_err());
    }

    #[test]
    fn exact_matching_matches_brute_force() {
        let mut r = rng::seeded(6);
        for _ in 0..100 {
            let m = 1 + rng::below(&mut r, 12) as usize;
            let g = random_graph(&mut r, 4, 4, m);
            let exact = max_induced_matching_exact(&g, BUDGET).unwrap();
            assert!(exact.is_induced_in(&g));
            assert_eq!(exact.len(), brute_max_induced(&g));
        }
    }

    #[test]
    fn coloring_classes_are_induced() {
        let mut r = rng::seeded(8);
        for _ in 0..50 {
            let m = 1 + rng::below(&mut r, 60) as usize;
            let g = random_graph(&mut r, 10, 12, m);
            let edges = g.edges();
            let colors = strong_edge_coloring(&g);
            let k = colors.iter().max().unwrap() + 1;
            let d = g.max_degree();
            assert!(k <= 2 * d * d);
            for c in 0..k {
                let class = InducedMatching {
                    edges: edges.iter().zip(&colors).filter(|(_, &cc)| cc == c).map(|(e, _)| *e).collect(),
                };
                assert!(class.is_induced_in(&g));
            }
        }
    }

    #[test]
    fn csv_export() {
        let mut g = BipartiteGraph::new(2, 2);
        g.add_labeled_edge(0, 1, 7);
        g.add_labeled_edge(1, 0, 3);
        assert_eq!(g.to_csv(), "left,right,label\n0,1,7\n1,0,3\n");
        assert_eq!(matching(2).to_csv(), "left,right\n0,0\n1,1\n");
    }
}
