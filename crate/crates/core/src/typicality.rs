//! Output statistics of an ordered submatrix and the Huffman-length typical
//! set built from them.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ChannelFunction;

/// The map `(v1, v2) -> s(v1, v2)` of an ordered `V1 x V2` submatrix of a
/// (possibly tensor-power) channel.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmatrixMap {
    /// Channel input word of each row.
    pub rows: Vec<usize>,
    /// Channel input word of each column.
    pub cols: Vec<usize>,
    /// Output words, row-major.
    pub values: Vec<usize>,
}

impl SubmatrixMap {
    pub fn from_channel(g: &ChannelFunction, rows: Vec<usize>, cols: Vec<usize>) -> Result<Self> {
        if rows.is_empty() || cols.is_empty() {
            return Err(Error::InvalidCardinality("submatrix needs at least one row and column".into()));
        }
        if rows.iter().any(|&x| x >= g.inputs1()) || cols.iter().any(|&x| x >= g.inputs2()) {
            return Err(Error::DimensionMismatch("submatrix index outside the channel".into()));
        }
        let values = rows
            .iter()
            .flat_map(|&x1| cols.iter().map(move |&x2| g.get(x1, x2)))
            .collect();
        Ok(SubmatrixMap { rows, cols, values })
    }

    pub fn size(&self) -> (usize, usize) {
        (self.rows.len(), self.cols.len())
    }

    pub fn get(&self, v1: usize, v2: usize) -> usize {
        self.values[v1 * self.cols.len() + v2]
    }
}

/// Exact probability mass function over output words, sorted by word.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pmf {
    pub symbols: Vec<usize>,
    pub probs: Vec<Ratio<u64>>,
}

impl Pmf {
    pub fn entropy_bits(&self) -> f64 {
        self.probs
            .iter()
            .map(|p| p.to_f64().unwrap())
            .filter(|&p| p > 0.0)
            .map(|p| -p * p.log2())
            .sum::<f64>()
            .max(0.0)
    }

    pub fn prob_of(&self, symbol: usize) -> Ratio<u64> {
        self.symbols
            .binary_search(&symbol)
            .map_or(Ratio::zero(), |k| self.probs[k])
    }
}

/// Distribution of `s(v1, v2)` for independent uniform `v1`, `v2`.
pub fn output_distribution(s: &SubmatrixMap) -> Pmf {
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for &y in &s.values {
        *counts.entry(y).or_default() += 1;
    }
    let total = s.values.len() as u64;
    Pmf {
        symbols: counts.keys().copied().collect(),
        probs: counts.values().map(|&c| Ratio::new(c, total)).collect(),
    }
}

/// Binary Huffman codeword lengths and the expected length `L`.
///
/// The two least probable nodes are merged first; ties go to the node created
/// earliest (leaves in symbol order, then internal nodes in merge order). A
/// one-symbol alphabet gets length 0.
pub fn huffman_lengths(probs: &[Ratio<u64>]) -> Result<(Vec<u32>, Ratio<u64>)> {
    if probs.is_empty() {
        return Err(Error::Domain("Huffman code of an empty distribution".into()));
    }
    let total = probs.iter().fold(Ratio::zero(), |acc: Ratio<u64>, p| acc + p);
    if total != Ratio::from_integer(1) {
        return Err(Error::Domain(format!("probabilities sum to {total}, not 1")));
    }
    let n = probs.len();
    let mut parent: Vec<usize> = vec![usize::MAX; n];
    let mut heap: BinaryHeap<Reverse<(Ratio<u64>, usize)>> =
        probs.iter().enumerate().map(|(i, &p)| Reverse((p, i))).collect();
    while heap.len() > 1 {
        let Reverse((pa, a)) = heap.pop().unwrap();
        let Reverse((pb, b)) = heap.pop().unwrap();
        let id = parent.len();
        parent.push(usize::MAX);
        parent[a] = id;
        parent[b] = id;
        heap.push(Reverse((pa + pb, id)));
    }
    // Parents are created after their children, so one backward pass works.
    let mut depth = vec![0u32; parent.len()];
    for v in (0..parent.len()).rev() {
        if parent[v] != usize::MAX {
            depth[v] = depth[parent[v]] + 1;
        }
    }
    let lengths: Vec<u32> = depth[..n].to_vec();
    let expected = probs
        .iter()
        .zip(&lengths)
        .fold(Ratio::zero(), |acc: Ratio<u64>, (p, &l)| acc + p * l as u64);
    Ok((lengths, expected))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypicalSet {
    pub epsilon: f64,
    /// `(row, col)` index pairs of the submatrix.
    pub pairs: Vec<(usize, usize)>,
    /// Output words `s(T)`.
    pub image: BTreeSet<usize>,
    /// Expected Huffman length.
    pub expected_length: f64,
    /// `H_S(y)` in bits.
    pub entropy: f64,
}

impl TypicalSet {
    /// `|T| >= ε/(1+ε) V1 V2`.
    pub fn covers_enough(&self, cells: usize) -> bool {
        self.pairs.len() as f64 >= self.epsilon / (1.0 + self.epsilon) * cells as f64 - 1e-9
    }

    /// `|s(T)| <= 2^((1+ε)(2+H))`.
    pub fn image_small_enough(&self) -> bool {
        self.image.len() as f64 <= ((1.0 + self.epsilon) * (2.0 + self.entropy)).exp2() * (1.0 + 1e-12)
    }
}

/// Pairs whose output word has Huffman length at most `(1+ε) L`.
pub fn typical_set(s: &SubmatrixMap, epsilon: f64) -> Result<TypicalSet> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let pmf = output_distribution(s);
    let (lengths, expected) = huffman_lengths(&pmf.probs)?;
    let expected_length = expected.to_f64().unwrap();
    let cutoff = (1.0 + epsilon) * expected_length + 1e-12;
    let short: Vec<usize> = pmf
        .symbols
        .iter()
        .zip(&lengths)
        .filter(|&(_, &l)| l as f64 <= cutoff)
        .map(|(&y, _)| y)
        .collect();
    let (v1, v2) = s.size();
    let pairs: Vec<(usize, usize)> = (0..v1)
        .flat_map(|i| (0..v2).map(move |j| (i, j)))
        .filter(|&(i, j)| short.binary_search(&s.get(i, j)).is_ok())
        .collect();
    let image: BTreeSet<usize> = pairs.iter().map(|&(i, j)| s.get(i, j)).collect();
    let set = TypicalSet { epsilon, pairs, image, expected_length, entropy: pmf.entropy_bits() };
    assert!(set.covers_enough(v1 * v2), "typical set too small: {set:?}");
    assert!(set.image_small_enough(), "typical set image too large: {set:?}");
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ChannelKind;
    use crate::rng;

    fn r(n: u64, d: u64) -> Ratio<u64> {
        Ratio::new(n, d)
    }

    fn adder_submatrix() -> SubmatrixMap {
        let add = ChannelFunction::builtin(ChannelKind::BinaryAdder, 0, 0, 0).unwrap();
        SubmatrixMap::from_channel(&add, vec![0, 1], vec![0, 1]).unwrap()
    }

    #[test]
    fn output_distribution_examples() {
        let pmf = output_distribution(&adder_submatrix());
        assert_eq!(pmf.symbols, vec![0, 1, 2]);
        assert_eq!(pmf.probs, vec![r(1, 4), r(1, 2), r(1, 4)]);
        let constant = SubmatrixMap { rows: vec![0, 1], cols: vec![0, 1, 2], values: vec![5; 6] };
        assert_eq!(output_distribution(&constant).probs, vec![r(1, 1)]);
        let single = SubmatrixMap { rows: vec![3], cols: vec![1], values: vec![9] };
        assert_eq!(output_distribution(&single).symbols, vec![9]);
    }

    #[test]
    fn huffman_examples() {
        let (l, e) = huffman_lengths(&[r(1, 2), r(1, 4), r(1, 4)]).unwrap();
        assert_eq!((l, e), (vec![1, 2, 2], r(3, 2)));
        assert_eq!(huffman_lengths(&[r(1, 1)]).unwrap(), (vec![0], r(0, 1)));
        let (l, e) = huffman_lengths(&[r(1, 4); 4]).unwrap();
        assert_eq!((l, e), (vec![2, 2, 2, 2], r(2, 1)));
        assert!(huffman_lengths(&[]).is_err());
        assert!(huffman_lengths(&[r(1, 2), r(1, 4)]).is_err());
    }

    #[test]
    fn typical_set_examples() {
        let t = typical_set(&adder_submatrix(), 1.0).unwrap();
        assert_eq!(t.pairs.len(), 4);
        assert_eq!(t.image.len(), 3);
        let constant = SubmatrixMap { rows: vec![0, 1], cols: vec![0, 1], values: vec![2; 4] };
        let t = typical_set(&constant, 0.3).unwrap();
        assert_eq!((t.pairs.len(), t.image.len()), (4, 1));
        assert!(typical_set(&constant, 0.0).is_err());
        assert!(typical_set(&constant, f64::NAN).is_err());
    }

    #[test]
    fn typical_set_on_random_tensor_square() {
        let mut rg = rng::seeded(21);
        for _ in 0..50 {
            let g = ChannelFunction::random_with(3, 4, &mut rg).unwrap().tensor_power(2).unwrap();
            let pick = |rg: &mut rng::Rng| (0..4).map(|_| rng::below(rg, 9) as usize).collect::<Vec<_>>();
            let s = SubmatrixMap::from_channel(&g, pick(&mut rg), pick(&mut rg)).unwrap();
            let t = typical_set(&s, 0.5).unwrap();
            assert!(t.covers_enough(16) && t.image_small_enough());
        }
    }

    /// Every assignment of lengths up to `max_len` satisfying Kraft's
    /// inequality is realizable by a prefix code.
    fn best_prefix_length(probs: &[f64], max_len: u32) -> f64 {
        let n = probs.len();
        let mut best = f64::INFINITY;
        let mut lens = vec![1u32; n];
        loop {
            let kraft: f64 = lens.iter().map(|&l| (-(l as f64)).exp2()).sum();
            if kraft <= 1.0 + 1e-12 {
                best = best.min(probs.iter().zip(&lens).map(|(p, &l)| p * l as f64).sum());
            }
            let mut k = 0;
            loop {
                if k == n {
                    return best;
                }
                lens[k] += 1;
                if lens[k] <= max_len {
                    break;
                }
                lens[k] = 1;
                k += 1;
            }
        }
    }

    #[test]
    fn huffman_is_optimal_and_within_one_bit() {
        let mut rg = rng::seeded(33);
        for _ in 0..300 {
            let n = 2 + rng::below(&mut rg, 3) as usize;
            let denom = 24u64;
            let mut counts = vec![1u64; n];
            for _ in 0..denom - n as u64 {
                counts[rng::below(&mut rg, n as u64) as usize] += 1;
            }
            let probs: Vec<Ratio<u64>> = counts.iter().map(|&c| r(c, denom)).collect();
            let (lens, expected) = huffman_lengths(&probs).unwrap();
            let pf: Vec<f64> = probs.iter().map(|p| p.to_f64().unwrap()).collect();
            let l = expected.to_f64().unwrap();
            assert!(l <= best_prefix_length(&pf, n as u32) + 1e-12);
            let h: f64 = pf.iter().map(|p| -p * p.log2()).sum();
            assert!(h <= l + 1e-12 && l <= h + 1.0 + 1e-12);
            let kraft: f64 = lens.iter().map(|&k| (-(k as f64)).exp2()).sum();
            assert!((kraft - 1.0).abs() < 1e-12);
        }
    }
}
