//! Explicit code constructions from bipartite graphs.
//!
//! Identity codes come from complete bipartite subgraphs of the distinct-value
//! graph of a channel; equality codes come from induced matchings in the graph
//! of channel inputs whose output falls in a chosen value subset.

mod bipartite;

pub use bipartite::{
    find_complete_bipartite, max_induced_matching_exact, strong_coloring_matching,
    strong_edge_coloring, Biclique, BicliqueMode, BipartiteGraph, InducedMatching,
    EXACT_MATCHING_MAX_EDGES,
};

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChannelFunction, Code, TargetFunction};
use crate::rng;

/// One edge per distinct output value of `g`, placed at the value's first
/// row-major occurrence and labeled with the value.
pub fn distinct_value_graph(g: &ChannelFunction) -> BipartiteGraph {
    let mut graph = BipartiteGraph::new(g.inputs1(), g.inputs2());
    let mut seen = vec![false; g.outputs()];
    for x1 in 0..g.inputs1() {
        for x2 in 0..g.inputs2() {
            let y = g.get(x1, x2);
            if !seen[y] {
                seen[y] = true;
                graph.add_labeled_edge(x1, x2, y);
            }
        }
    }
    graph
}

/// Kővári–Sós–Turán upper bound on the Zarankiewicz number `Z_b(n)`:
/// `(b-1)^{1/b} (n-b+1) n^{1-1/b} + (b-1) n + 1`.
pub fn zarankiewicz_upper_bound(b: u32, n: u32) -> Result<f64> {
    if b == 0 || b > n {
        return Err(Error::Domain(format!("need 1 <= b <= n, got b={b}, n={n}")));
    }
    let (bf, nf) = (b as f64, n as f64);
    Ok((bf - 1.0).powf(1.0 / bf) * (nf - bf + 1.0) * nf.powf(1.0 - 1.0 / bf) + (bf - 1.0) * nf + 1.0)
}

/// Zero-error code for the `U x U` identity target from a `K_{U,U}` in the
/// distinct-value graph. Message pair `(u1, u2)` decodes to `u1 * U + u2`.
pub fn build_identity_code(g: &ChannelFunction, u: usize, mode: BicliqueMode, budget: u64) -> Result<Code> {
    if u == 0 || u > g.inputs1().min(g.inputs2()) {
        return Err(Error::DimensionMismatch(format!(
            "U={u} messages do not fit a {}x{} channel",
            g.inputs1(),
            g.inputs2()
        )));
    }
    let graph = distinct_value_graph(g);
    let (lefts, rights) = find_complete_bipartite(&graph, u, mode, budget)?.ok_or(Error::NotFound { b: u })?;
    let mut decoder = vec![0; g.outputs()];
    for (u1, &x1) in lefts.iter().enumerate() {
        for (u2, &x2) in rights.iter().enumerate() {
            decoder[g.get(x1, x2)] = u1 * u + u2;
        }
    }
    Ok(Code { f1: lefts, f2: rights, decoder })
}

/// Separation: communicate both messages with an identity code, then
/// evaluate the target at the receiver.
pub fn build_separation_code(a: &TargetFunction, g: &ChannelFunction, mode: BicliqueMode, budget: u64) -> Result<Code> {
    if a.rows() != a.cols() {
        return Err(Error::DimensionMismatch("separation needs a square target".into()));
    }
    let u = a.rows();
    let mut code = build_identity_code(g, u, mode, budget)?;
    code.decoder.iter_mut().for_each(|w| *w = 0);
    for (u1, &x1) in code.f1.iter().enumerate() {
        for (u2, &x2) in code.f2.iter().enumerate() {
            code.decoder[g.get(x1, x2)] = a.get(u1, u2);
        }
    }
    Ok(code)
}

/// Default ratio between the output alphabet and `U` in the equality graph.
pub const EQUALITY_ALPHABET_FACTOR: usize = 16;

/// Input-alphabet size `⌈200 U ln U⌉` at which the equality construction is
/// expected to succeed.
pub fn equality_regime_inputs(u: usize) -> usize {
    let uf = u as f64;
    (200.0 * uf * uf.ln()).ceil() as usize
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EqualityGraph {
    pub graph: BipartiteGraph,
    /// Sorted output values whose inputs form the edges.
    pub subset: Vec<usize>,
    pub k: usize,
}

/// Graph on channel inputs with an edge `(x1, x2)` iff `g(x1, x2)` lies in a
/// seeded uniform `k`-subset of the outputs, `k = ⌊Y / (16 U)⌋`.
pub fn equality_graph(g: &ChannelFunction, u: usize, subset_seed: u64) -> Result<EqualityGraph> {
    equality_graph_with_factor(g, u, subset_seed, EQUALITY_ALPHABET_FACTOR)
}

pub fn equality_graph_with_factor(g: &ChannelFunction, u: usize, subset_seed: u64, factor: usize) -> Result<EqualityGraph> {
    let required = factor * u;
    if u == 0 || g.outputs() < required {
        return Err(Error::AlphabetTooSmall { y: g.outputs(), required });
    }
    let k = g.outputs() / required;
    let mut r = rng::seeded(subset_seed);
    let mut subset = index::sample(&mut r, g.outputs(), k).into_vec();
    subset.sort_unstable();
    let mut member = vec![false; g.outputs()];
    for &y in &subset {
        member[y] = true;
    }
    let mut graph = BipartiteGraph::new(g.inputs1(), g.inputs2());
    for x1 in 0..g.inputs1() {
        for x2 in 0..g.inputs2() {
            if member[g.get(x1, x2)] {
                graph.add_edge(x1, x2);
            }
        }
    }
    Ok(EqualityGraph { graph, subset, k })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchingMode {
    /// Largest class of the greedy strong edge coloring.
    Greedy,
    /// Exhaustive maximum induced matching; small graphs only.
    Exact { budget: u64 },
}

/// Zero-error code for the `U x U` equality target: message `u` is sent as
/// the endpoints of the `u`-th edge of an induced matching, and outputs in
/// the chosen subset decode to 1.
pub fn build_equality_code(g: &ChannelFunction, u: usize, subset_seed: u64, mode: MatchingMode) -> Result<Code> {
    let eg = equality_graph(g, u, subset_seed)?;
    equality_code_from_graph(g, u, &eg, mode)
}

pub fn equality_code_from_graph(g: &ChannelFunction, u: usize, eg: &EqualityGraph, mode: MatchingMode) -> Result<Code> {
    let matching = match mode {
        MatchingMode::Greedy => strong_coloring_matching(&eg.graph),
        MatchingMode::Exact { budget } => max_induced_matching_exact(&eg.graph, budget)?,
    };
    if matching.len() < u {
        return Err(Error::MatchingTooSmall { found: matching.len(), required: u });
    }
    let mut decoder = vec![0; g.outputs()];
    for &y in &eg.subset {
        decoder[y] = 1;
    }
    let (f1, f2) = matching.edges[..u].iter().copied().unzip();
    Ok(Code { f1, f2, decoder })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{error_probability, ChannelKind, TargetKind};
    use num_rational::Ratio;

    const BUDGET: u64 = 1 << 30;

    fn channel(kind: ChannelKind) -> ChannelFunction {
        ChannelFunction::builtin(kind, 0, 0, 0).unwrap()
    }

    #[test]
    fn distinct_value_graph_examples() {
        let g = distinct_value_graph(&channel(ChannelKind::BinaryAdder));
        assert_eq!(g.edges(), vec![(0, 0), (0, 1), (1, 1)]);
        assert_eq!((g.label(0, 0), g.label(0, 1), g.label(1, 1)), (Some(0), Some(1), Some(2)));
        let g = distinct_value_graph(&channel(ChannelKind::BooleanOr));
        assert_eq!(g.edges(), vec![(0, 0), (0, 1)]);
        let constant = ChannelFunction::new(3, 3, 2, vec![0; 9]).unwrap();
        assert_eq!(distinct_value_graph(&constant).edges(), vec![(0, 0)]);
    }

    #[test]
    fn distinct_value_graph_counts_values() {
        let mut r = rng::seeded(3);
        for _ in 0..200 {
            let x = 2 + rng::below(&mut r, 5) as usize;
            let y = 2 + rng::below(&mut r, 7) as usize;
            let g = ChannelFunction::random_with(x, y, &mut r).unwrap();
            assert_eq!(distinct_value_graph(&g).edge_count(), g.distinct_outputs());
        }
    }

    #[test]
    fn zarankiewicz_examples() {
        assert!((zarankiewicz_upper_bound(2, 4).unwrap() - 11.0).abs() < 1e-12);
        assert!((zarankiewicz_upper_bound(1, 5).unwrap() - 1.0).abs() < 1e-12);
        assert!((zarankiewicz_upper_bound(2, 9).unwrap() - 34.0).abs() < 1e-12);
        assert!(zarankiewicz_upper_bound(3, 2).is_err());
    }

    #[test]
    fn identity_code_examples() {
        let all_distinct = ChannelFunction::from_fn(4, 4, 16, |a, b| a * 4 + b).unwrap();
        for u in 1..=4 {
            let code = build_identity_code(&all_distinct, u, BicliqueMode::Exact, BUDGET).unwrap();
            if u >= 2 {
                let id = TargetFunction::builtin(TargetKind::Identity, u, 0, 0).unwrap();
                assert_eq!(error_probability(&id, &all_distinct, &code).unwrap(), Ratio::from_integer(0));
            }
        }
        assert!(matches!(
            build_identity_code(&channel(ChannelKind::BinaryAdder), 2, BicliqueMode::Exact, BUDGET),
            Err(Error::NotFound { b: 2 })
        ));
        assert!(build_identity_code(&channel(ChannelKind::BinaryAdder), 3, BicliqueMode::Exact, BUDGET).is_err());
    }

    #[test]
    fn separation_code_computes_target() {
        let g = ChannelFunction::from_fn(3, 3, 9, |a, b| a * 3 + b).unwrap();
        let gt = TargetFunction::builtin(TargetKind::GreaterThan, 3, 0, 0).unwrap();
        let code = build_separation_code(&gt, &g, BicliqueMode::Exact, BUDGET).unwrap();
        assert_eq!(error_probability(&gt, &g, &code).unwrap(), Ratio::from_integer(0));
    }

    #[test]
    fn equality_graph_examples() {
        let g64 = ChannelFunction::new(2, 2, 64, vec![0, 1, 2, 3]).unwrap();
        assert_eq!(equality_graph(&g64, 4, 0).unwrap().k, 1);
        let g200 = ChannelFunction::new(2, 2, 200, vec![0, 1, 2, 3]).unwrap();
        let eg = equality_graph(&g200, 4, 9).unwrap();
        assert_eq!((eg.k, eg.subset.len()), (3, 3));
        assert_eq!(eg, equality_graph(&g200, 4, 9).unwrap());
        assert!(matches!(
            equality_graph(&channel(ChannelKind::BooleanOr), 4, 0),
            Err(Error::AlphabetTooSmall { y: 2, required: 64 })
        ));
    }

    #[test]
    fn equality_code_on_diagonal_channel() {
        // g(x, x) = 1 and 0 elsewhere; with Y = 32 and U = 2, k = 1.
        let diag = ChannelFunction::from_fn(3, 3, 32, |a, b| usize::from(a == b)).unwrap();
        let seed = (0..1000u64)
            .find(|&s| equality_graph(&diag, 2, s).unwrap().subset == vec![1])
            .expect("some seed picks value 1");
        let eq = TargetFunction::builtin(TargetKind::Equality, 2, 0, 0).unwrap();
        for mode in [MatchingMode::Greedy, MatchingMode::Exact { budget: BUDGET }] {
            let code = build_equality_code(&diag, 2, seed, mode).unwrap();
            assert_eq!((code.f1.clone(), code.f2.clone()), (vec![0, 1], vec![0, 1]));
            assert_eq!(error_probability(&eq, &diag, &code).unwrap(), Ratio::from_integer(0));
        }
        assert!(matches!(
            build_equality_code(&channel(ChannelKind::BooleanOr), 2, 0, MatchingMode::Greedy),
            Err(Error::AlphabetTooSmall { .. })
        ));
    }

    #[test]
    fn equality_regime_size() {
        assert_eq!(equality_regime_inputs(4), 1110);
    }
}
