//! Finite target functions, deterministic channels, codes and their exact
//! evaluation.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Largest admissible channel output alphabet, including tensor powers.
pub const MAX_OUTPUTS: u64 = 1 << 32;
/// Largest admissible number of entries in a channel matrix.
pub const MAX_ENTRIES: u64 = 1 << 28;

/// A target function `a(u1, u2)` stored as a `U1 x U2` row-major matrix over
/// `[0, W)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "TargetRepr", into = "TargetRepr")]
pub struct TargetFunction {
    u1: usize,
    u2: usize,
    w: usize,
    entries: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct TargetRepr {
    #[serde(rename = "U1")]
    u1: usize,
    #[serde(rename = "U2")]
    u2: usize,
    #[serde(rename = "W")]
    w: usize,
    rows: Vec<Vec<usize>>,
}

impl TryFrom<TargetRepr> for TargetFunction {
    type Error = Error;

    fn try_from(r: TargetRepr) -> Result<Self> {
        let cols = check_rows(&r.rows, r.u1, r.u2, "target")?;
        debug_assert_eq!(cols, r.u2);
        TargetFunction::new(r.u1, r.u2, r.w, r.rows.into_iter().flatten().collect())
            .map_err(|e| Error::Schema(e.to_string()))
    }
}

impl From<TargetFunction> for TargetRepr {
    fn from(t: TargetFunction) -> Self {
        TargetRepr {
            u1: t.u1,
            u2: t.u2,
            w: t.w,
            rows: t.entries.chunks(t.u2).map(<[usize]>::to_vec).collect(),
        }
    }
}

fn check_rows(rows: &[Vec<usize>], n_rows: usize, n_cols: usize, what: &str) -> Result<usize> {
    if rows.len() != n_rows {
        return Err(Error::Schema(format!(
            "{what}: expected {n_rows} rows, found {}",
            rows.len()
        )));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != n_cols) {
        return Err(Error::Schema(format!(
            "{what}: row {bad} has {} entries, expected {n_cols}",
            rows[bad].len()
        )));
    }
    Ok(n_cols)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Identity,
    Equality,
    GreaterThan,
    Random,
}

impl TargetFunction {
    pub fn new(u1: usize, u2: usize, w: usize, entries: Vec<usize>) -> Result<Self> {
        if u1 == 0 || u2 == 0 || w == 0 {
            return Err(Error::InvalidCardinality(format!(
                "target dimensions must be positive (U1={u1}, U2={u2}, W={w})"
            )));
        }
        if entries.len() != u1 * u2 {
            return Err(Error::DimensionMismatch(format!(
                "target has {} entries, expected {}",
                entries.len(),
                u1 * u2
            )));
        }
        if let Some(&v) = entries.iter().find(|&&v| v >= w) {
            return Err(Error::InvalidCardinality(format!(
                "target entry {v} outside [0, {w})"
            )));
        }
        if w > u1 * u2 {
            return Err(Error::InvalidCardinality(format!(
                "range W={w} exceeds U1*U2={}",
                u1 * u2
            )));
        }
        Ok(TargetFunction { u1, u2, w, entries })
    }

    pub fn from_fn(u1: usize, u2: usize, w: usize, f: impl Fn(usize, usize) -> usize) -> Result<Self> {
        let entries = (0..u1)
            .flat_map(|i| (0..u2).map(move |j| (i, j)))
            .map(|(i, j)| f(i, j))
            .collect();
        Self::new(u1, u2, w, entries)
    }

    /// Built-in families: identity, equality, greater-than and uniformly
    /// random targets. `range` and `seed` are only read for `Random`.
    pub fn builtin(kind: TargetKind, u: usize, range: usize, seed: u64) -> Result<Self> {
        if u < 2 {
            return Err(Error::InvalidCardinality(format!("U must be at least 2, got {u}")));
        }
        match kind {
            TargetKind::Identity => Self::from_fn(u, u, u * u, |a, b| a * u + b),
            TargetKind::Equality => Self::from_fn(u, u, 2, |a, b| usize::from(a == b)),
            TargetKind::GreaterThan => Self::from_fn(u, u, 2, |a, b| usize::from(a > b)),
            TargetKind::Random => {
                if range < 2 || range > u * u {
                    return Err(Error::InvalidCardinality(format!(
                        "random target needs 2 <= W <= U^2, got W={range}, U={u}"
                    )));
                }
                let mut r = rng::seeded(seed);
                Self::random_with(u, range, &mut r)
            }
        }
    }

    /// Uniform i.i.d. target drawn from an existing generator.
    pub fn random_with(u: usize, w: usize, r: &mut rng::Rng) -> Result<Self> {
        let entries = (0..u * u).map(|_| rng::below(r, w as u64) as usize).collect();
        Self::new(u, u, w, entries)
    }

    pub fn rows(&self) -> usize {
        self.u1
    }

    pub fn cols(&self) -> usize {
        self.u2
    }

    pub fn range(&self) -> usize {
        self.w
    }

    #[inline]
    pub fn get(&self, u1: usize, u2: usize) -> usize {
        self.entries[u1 * self.u2 + u2]
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn row(&self, u1: usize) -> &[usize] {
        &self.entries[u1 * self.u2..(u1 + 1) * self.u2]
    }

    /// `h(w) = |a^{-1}(w)|` for every `w` in the range.
    pub fn histogram(&self) -> Vec<u64> {
        let mut h = vec![0u64; self.w];
        for &v in &self.entries {
            h[v] += 1;
        }
        h
    }

    pub fn is_normalized(&self) -> bool {
        let distinct_rows = (0..self.u1).all(|i| (0..i).all(|k| self.row(i) != self.row(k)));
        let col = |j: usize| (0..self.u1).map(move |i| self.get(i, j));
        let distinct_cols =
            (0..self.u2).all(|j| (0..j).all(|k| !col(j).eq(col(k))));
        distinct_rows && distinct_cols
    }

    /// Removes duplicate rows and columns, keeping first occurrences. If the
    /// surviving entries use fewer than `W` values and `W` would exceed the
    /// new `U1*U2`, values are relabeled to their order-preserving ranks.
    pub fn normalized(&self) -> TargetFunction {
        let mut keep_rows: Vec<usize> = Vec::new();
        for i in 0..self.u1 {
            if keep_rows.iter().all(|&k| self.row(k) != self.row(i)) {
                keep_rows.push(i);
            }
        }
        let col_of = |j: usize| keep_rows.iter().map(|&i| self.get(i, j)).collect::<Vec<_>>();
        let mut keep_cols: Vec<usize> = Vec::new();
        let mut seen: Vec<Vec<usize>> = Vec::new();
        for j in 0..self.u2 {
            let c = col_of(j);
            if !seen.contains(&c) {
                seen.push(c);
                keep_cols.push(j);
            }
        }
        let mut entries: Vec<usize> = keep_rows
            .iter()
            .flat_map(|&i| keep_cols.iter().map(move |&j| self.get(i, j)))
            .collect();
        let (u1, u2) = (keep_rows.len(), keep_cols.len());
        let mut w = self.w;
        if w > u1 * u2 {
            let mut used: Vec<usize> = entries.clone();
            used.sort_unstable();
            used.dedup();
            for e in entries.iter_mut() {
                *e = used.binary_search(e).expect("value present");
            }
            w = used.len().max(1);
        }
        TargetFunction { u1, u2, w, entries }
    }
}

impl fmt::Display for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.u1 {
            let row: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// A deterministic two-user channel `y = g(x1, x2)`, possibly describing
/// `uses` memoryless channel uses.
///
/// Inputs and outputs of tensor powers are big-endian digit strings: the
/// first channel use is the most significant digit.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ChannelRepr", into = "ChannelRepr")]
pub struct ChannelFunction {
    x1: usize,
    x2: usize,
    y: usize,
    uses: u32,
    entries: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct ChannelRepr {
    #[serde(rename = "X1")]
    x1: usize,
    #[serde(rename = "X2")]
    x2: usize,
    #[serde(rename = "Y")]
    y: usize,
    uses: u32,
    rows: Vec<Vec<usize>>,
}

impl TryFrom<ChannelRepr> for ChannelFunction {
    type Error = Error;

    fn try_from(r: ChannelRepr) -> Result<Self> {
        check_rows(&r.rows, r.x1, r.x2, "channel")?;
        let mut g = ChannelFunction::new(r.x1, r.x2, r.y, r.rows.into_iter().flatten().collect())
            .map_err(|e| Error::Schema(e.to_string()))?;
        if r.uses == 0 {
            return Err(Error::Schema("channel uses must be positive".into()));
        }
        g.uses = r.uses;
        Ok(g)
    }
}

impl From<ChannelFunction> for ChannelRepr {
    fn from(g: ChannelFunction) -> Self {
        ChannelRepr {
            x1: g.x1,
            x2: g.x2,
            y: g.y,
            uses: g.uses,
            rows: g.entries.chunks(g.x2).map(<[usize]>::to_vec).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    BinaryAdder,
    BooleanOr,
    Random,
}

impl ChannelFunction {
    pub fn new(x1: usize, x2: usize, y: usize, entries: Vec<usize>) -> Result<Self> {
        if x1 == 0 || x2 == 0 || y == 0 {
            return Err(Error::InvalidCardinality(format!(
                "channel dimensions must be positive (X1={x1}, X2={x2}, Y={y})"
            )));
        }
        if (x1 as u64) * (x2 as u64) > MAX_ENTRIES || y as u64 > MAX_OUTPUTS {
            return Err(Error::Overflow(format!("channel {x1}x{x2} over {y} outputs is too large")));
        }
        if entries.len() != x1 * x2 {
            return Err(Error::DimensionMismatch(format!(
                "channel has {} entries, expected {}",
                entries.len(),
                x1 * x2
            )));
        }
        if let Some(&v) = entries.iter().find(|&&v| v >= y) {
            return Err(Error::InvalidCardinality(format!(
                "channel entry {v} outside [0, {y})"
            )));
        }
        Ok(ChannelFunction { x1, x2, y, uses: 1, entries })
    }

    pub fn from_fn(x1: usize, x2: usize, y: usize, f: impl Fn(usize, usize) -> usize) -> Result<Self> {
        let entries = (0..x1)
            .flat_map(|i| (0..x2).map(move |j| (i, j)))
            .map(|(i, j)| f(i, j))
            .collect();
        Self::new(x1, x2, y, entries)
    }

    /// Built-in channels. `inputs`, `outputs` and `seed` are only read for
    /// `Random`, which yields a square `X x X` matrix.
    pub fn builtin(kind: ChannelKind, inputs: usize, outputs: usize, seed: u64) -> Result<Self> {
        match kind {
            ChannelKind::BinaryAdder => Self::new(2, 2, 3, vec![0, 1, 1, 2]),
            ChannelKind::BooleanOr => Self::new(2, 2, 2, vec![0, 1, 1, 1]),
            ChannelKind::Random => {
                if inputs < 2 || outputs < 2 {
                    return Err(Error::InvalidCardinality(format!(
                        "random channel needs X >= 2 and Y >= 2, got X={inputs}, Y={outputs}"
                    )));
                }
                let mut r = rng::seeded(seed);
                Self::random_with(inputs, outputs, &mut r)
            }
        }
    }

    /// Uniform i.i.d. `X x X` channel over `[0, Y)` from an existing generator.
    pub fn random_with(x: usize, y: usize, r: &mut rng::Rng) -> Result<Self> {
        if (x as u64).saturating_mul(x as u64) > MAX_ENTRIES {
            return Err(Error::Overflow(format!("random channel with X={x} is too large")));
        }
        let entries = (0..x * x).map(|_| rng::below(r, y as u64) as usize).collect();
        Self::new(x, x, y, entries)
    }

    pub fn inputs1(&self) -> usize {
        self.x1
    }

    pub fn inputs2(&self) -> usize {
        self.x2
    }

    pub fn outputs(&self) -> usize {
        self.y
    }

    pub fn uses(&self) -> u32 {
        self.uses
    }

    #[inline]
    pub fn get(&self, x1: usize, x2: usize) -> usize {
        self.entries[x1 * self.x2 + x2]
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn distinct_outputs(&self) -> usize {
        let mut v = self.entries.clone();
        v.sort_unstable();
        v.dedup();
        v.len()
    }

    /// The channel describing `n` memoryless uses of `self`.
    pub fn tensor_power(&self, n: u32) -> Result<ChannelFunction> {
        if self.uses != 1 {
            return Err(Error::Domain(format!(
                "tensor power needs a base channel, this one already has {} uses",
                self.uses
            )));
        }
        if n == 0 {
            return Err(Error::Domain("tensor power exponent must be positive".into()));
        }
        let too_big = || Error::Overflow(format!("{n}-fold use of a {}x{} channel over {} outputs", self.x1, self.x2, self.y));
        let x1n = (self.x1 as u64).checked_pow(n).ok_or_else(too_big)?;
        let x2n = (self.x2 as u64).checked_pow(n).ok_or_else(too_big)?;
        let yn = (self.y as u64).checked_pow(n).ok_or_else(too_big)?;
        if x1n.checked_mul(x2n).is_none_or(|e| e > MAX_ENTRIES) || yn > MAX_OUTPUTS {
            return Err(too_big());
        }
        let (x1n, x2n) = (x1n as usize, x2n as usize);
        let digits = |mut v: usize, base: usize| {
            let mut d = vec![0usize; n as usize];
            for slot in d.iter_mut().rev() {
                *slot = v % base;
                v /= base;
            }
            d
        };
        let cols: Vec<Vec<usize>> = (0..x2n).map(|j| digits(j, self.x2)).collect();
        let mut entries = Vec::with_capacity(x1n * x2n);
        for i in 0..x1n {
            let di = digits(i, self.x1);
            for dj in &cols {
                let out = di
                    .iter()
                    .zip(dj)
                    .fold(0usize, |acc, (&a, &b)| acc * self.y + self.get(a, b));
                entries.push(out);
            }
        }
        Ok(ChannelFunction { x1: x1n, x2: x2n, y: yn as usize, uses: n, entries })
    }

    /// Parallel composition: `self` used first, `other` second. Inputs and
    /// outputs are concatenated big-endian (`x = x_self * X_other + x_other`).
    pub fn tensor_product(&self, other: &ChannelFunction) -> Result<ChannelFunction> {
        let x1 = self.x1.checked_mul(other.x1);
        let x2 = self.x2.checked_mul(other.x2);
        let y = self.y.checked_mul(other.y);
        let (Some(x1), Some(x2), Some(y)) = (x1, x2, y) else {
            return Err(Error::Overflow("tensor product dimensions".into()));
        };
        let mut g = ChannelFunction::from_fn(x1, x2, y, |i, j| {
            let (ia, ib) = (i / other.x1, i % other.x1);
            let (ja, jb) = (j / other.x2, j % other.x2);
            self.get(ia, ja) * other.y + other.get(ib, jb)
        })?;
        g.uses = self.uses + other.uses;
        Ok(g)
    }
}

/// Encoders `f1`, `f2` and a decoder mapping every channel output to an
/// estimate of the target value.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Code {
    pub f1: Vec<usize>,
    pub f2: Vec<usize>,
    pub decoder: Vec<usize>,
}

impl Code {
    pub fn check_dimensions(&self, a: &TargetFunction, g: &ChannelFunction) -> Result<()> {
        let err = |m: String| Err(Error::DimensionMismatch(m));
        if self.f1.len() != a.rows() || self.f2.len() != a.cols() {
            return err(format!(
                "encoders cover {}x{} messages, target is {}x{}",
                self.f1.len(),
                self.f2.len(),
                a.rows(),
                a.cols()
            ));
        }
        if let Some(&x) = self.f1.iter().find(|&&x| x >= g.inputs1()) {
            return err(format!("encoder 1 emits {x}, channel has {} inputs", g.inputs1()));
        }
        if let Some(&x) = self.f2.iter().find(|&&x| x >= g.inputs2()) {
            return err(format!("encoder 2 emits {x}, channel has {} inputs", g.inputs2()));
        }
        if self.decoder.len() != g.outputs() {
            return err(format!(
                "decoder covers {} outputs, channel has {}",
                self.decoder.len(),
                g.outputs()
            ));
        }
        if let Some(&w) = self.decoder.iter().find(|&&w| w >= a.range()) {
            return err(format!("decoder emits {w}, target range is {}", a.range()));
        }
        Ok(())
    }

    /// Estimate produced for the message pair `(u1, u2)`.
    #[inline]
    pub fn estimate(&self, g: &ChannelFunction, u1: usize, u2: usize) -> usize {
        self.decoder[g.get(self.f1[u1], self.f2[u2])]
    }
}

/// Number of message pairs on which the code's estimate differs from the
/// target.
pub fn error_count(a: &TargetFunction, g: &ChannelFunction, code: &Code) -> Result<u64> {
    code.check_dimensions(a, g)?;
    let mut errors = 0u64;
    for u1 in 0..a.rows() {
        for u2 in 0..a.cols() {
            if code.estimate(g, u1, u2) != a.get(u1, u2) {
                errors += 1;
            }
        }
    }
    Ok(errors)
}

/// Exact error probability under independent uniform messages.
pub fn error_probability(a: &TargetFunction, g: &ChannelFunction, code: &Code) -> Result<Ratio<u64>> {
    let errors = error_count(a, g, code)?;
    Ok(Ratio::new(errors, (a.rows() * a.cols()) as u64))
}

/// A range partition whose preimages both carry at least `c * U1 * U2`
/// message pairs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceWitness {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
    pub preimage_sizes: (u64, u64),
}

/// Decides c-balancedness exactly by subset-sum over the value histogram.
/// Among all balanced partitions the one with the smallest first preimage is
/// returned.
pub fn is_c_balanced(a: &TargetFunction, c: Ratio<u64>) -> Result<Option<BalanceWitness>> {
    if *c.numer() == 0 || c > Ratio::new(1, 2) {
        return Err(Error::Domain(format!("c must lie in (0, 1/2], got {c}")));
    }
    let total = (a.rows() * a.cols()) as u64;
    let threshold = (c * Ratio::from_integer(total)).ceil().to_integer();
    if threshold > total - threshold {
        return Ok(None);
    }
    let hist = a.histogram();
    let items: Vec<usize> = (0..hist.len()).filter(|&w| hist[w] > 0).collect();
    let width = total as usize + 1;
    // reach[k] holds the sums attainable with the first k items.
    let mut reach: Vec<Vec<bool>> = Vec::with_capacity(items.len() + 1);
    let mut cur = vec![false; width];
    cur[0] = true;
    reach.push(cur.clone());
    for &w in &items {
        let h = hist[w] as usize;
        let mut next = cur.clone();
        for s in (h..width).rev() {
            if cur[s - h] {
                next[s] = true;
            }
        }
        reach.push(next.clone());
        cur = next;
    }
    let Some(mut s) = (threshold..=total - threshold).find(|&s| cur[s as usize]) else {
        return Ok(None);
    };
    let target = s;
    let mut first = Vec::new();
    for k in (1..=items.len()).rev() {
        if reach[k - 1][s as usize] {
            continue;
        }
        let w = items[k - 1];
        first.push(w);
        s -= hist[w];
    }
    debug_assert_eq!(s, 0);
    first.sort_unstable();
    let second: Vec<usize> = (0..a.range()).filter(|w| first.binary_search(w).is_err()).collect();
    Ok(Some(BalanceWitness {
        first,
        second,
        preimage_sizes: (target, total - target),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn target(kind: TargetKind, u: usize) -> TargetFunction {
        TargetFunction::builtin(kind, u, 0, 0).unwrap()
    }

    #[test]
    fn builtin_targets() {
        assert_eq!(target(TargetKind::Equality, 2).entries(), &[1, 0, 0, 1]);
        let id = target(TargetKind::Identity, 2);
        assert_eq!((id.entries(), id.range()), (&[0, 1, 2, 3][..], 4));
        assert_eq!(
            target(TargetKind::GreaterThan, 3).entries(),
            &[0, 0, 0, 1, 0, 0, 1, 1, 0]
        );
        let mut id = target(TargetKind::Identity, 7).entries().to_vec();
        id.sort_unstable();
        id.dedup();
        assert_eq!(id.len(), 49);
    }

    #[test]
    fn builtin_target_preconditions() {
        assert!(matches!(
            TargetFunction::builtin(TargetKind::Equality, 1, 0, 0),
            Err(Error::InvalidCardinality(_))
        ));
        assert!(TargetFunction::builtin(TargetKind::Random, 3, 10, 0).is_err());
        assert!(TargetFunction::builtin(TargetKind::Random, 3, 1, 0).is_err());
        assert!(TargetFunction::builtin(TargetKind::Random, 3, 9, 0).is_ok());
    }

    #[test]
    fn builtin_channels() {
        let add = ChannelFunction::builtin(ChannelKind::BinaryAdder, 0, 0, 0).unwrap();
        assert_eq!((add.entries(), add.outputs()), (&[0, 1, 1, 2][..], 3));
        let or = ChannelFunction::builtin(ChannelKind::BooleanOr, 0, 0, 0).unwrap();
        assert_eq!((or.entries(), or.outputs()), (&[0, 1, 1, 1][..], 2));
        let a = ChannelFunction::builtin(ChannelKind::Random, 2, 3, 99).unwrap();
        let b = ChannelFunction::builtin(ChannelKind::Random, 2, 3, 99).unwrap();
        assert_eq!(a, b);
        assert!(ChannelFunction::builtin(ChannelKind::Random, 1, 3, 0).is_err());
    }

    #[test]
    fn tensor_power_examples() {
        let or = ChannelFunction::builtin(ChannelKind::BooleanOr, 0, 0, 0).unwrap();
        let or2 = or.tensor_power(2).unwrap();
        assert_eq!((or2.inputs1(), or2.outputs(), or2.uses()), (4, 4, 2));
        assert_eq!(or2.get(1, 2), 3);
        assert_eq!(or.tensor_power(1).unwrap(), or);
        let add2 = ChannelFunction::builtin(ChannelKind::BinaryAdder, 0, 0, 0)
            .unwrap()
            .tensor_power(2)
            .unwrap();
        assert_eq!(add2.get(0, 3), 4);
        assert!(matches!(or2.tensor_power(2), Err(Error::Domain(_))));
        assert!(matches!(or.tensor_power(40), Err(Error::Overflow(_))));
    }

    #[test]
    fn error_probability_examples() {
        let eq10 = target(TargetKind::Equality, 10);
        let or = ChannelFunction::builtin(ChannelKind::BooleanOr, 0, 0, 0).unwrap();
        let constant = Code { f1: vec![0; 10], f2: vec![0; 10], decoder: vec![0, 0] };
        assert_eq!(error_probability(&eq10, &or, &constant).unwrap(), Ratio::new(1, 10));

        let eq2 = target(TargetKind::Equality, 2);
        let code = Code { f1: vec![0, 1], f2: vec![0, 1], decoder: vec![0, 0] };
        assert_eq!(error_probability(&eq2, &or, &code).unwrap(), Ratio::new(2, 4));

        let or2 = or.tensor_power(2).unwrap();
        let two_use = Code { f1: vec![1, 2], f2: vec![1, 2], decoder: vec![0, 1, 1, 0] };
        assert_eq!(error_probability(&eq2, &or2, &two_use).unwrap(), Ratio::from_integer(0));

        let short = Code { f1: vec![0], f2: vec![0, 1], decoder: vec![0, 0] };
        assert!(matches!(
            error_probability(&eq2, &or, &short),
            Err(Error::DimensionMismatch(_))
        ));
        let bad_input = Code { f1: vec![0, 2], f2: vec![0, 1], decoder: vec![0, 0] };
        assert!(error_probability(&eq2, &or, &bad_input).is_err());
    }

    #[test]
    fn balance_examples() {
        let c = Ratio::new(1, 4);
        let gt = target(TargetKind::GreaterThan, 4);
        let w = is_c_balanced(&gt, c).unwrap().unwrap();
        assert_eq!((w.first, w.second, w.preimage_sizes), (vec![1], vec![0], (6, 10)));
        assert_eq!(is_c_balanced(&target(TargetKind::Equality, 8), c).unwrap(), None);
        let w = is_c_balanced(&target(TargetKind::Equality, 4), c).unwrap().unwrap();
        assert_eq!((w.first, w.second, w.preimage_sizes), (vec![1], vec![0], (4, 12)));
        assert!(is_c_balanced(&gt, Ratio::new(2, 3)).is_err());
        assert!(is_c_balanced(&gt, Ratio::new(0, 1)).is_err());
    }

    #[test]
    fn normalization_removes_duplicates() {
        let a = TargetFunction::new(3, 3, 3, vec![0, 0, 1, 0, 0, 1, 2, 2, 1]).unwrap();
        assert!(!a.is_normalized());
        let n = a.normalized();
        assert!(n.is_normalized());
        assert_eq!((n.rows(), n.cols()), (2, 2));
        assert_eq!(n.entries(), &[0, 1, 2, 1]);
        let c = TargetFunction::new(2, 2, 4, vec![0, 3, 0, 3]).unwrap().normalized();
        assert_eq!((c.rows(), c.cols(), c.range(), c.entries()), (1, 2, 2, &[0usize, 1][..]));
    }

    #[test]
    fn rejects_out_of_range_entries() {
        assert!(TargetFunction::new(2, 2, 2, vec![0, 1, 2, 0]).is_err());
        assert!(ChannelFunction::new(2, 2, 2, vec![0, 1, 2, 0]).is_err());
        assert!(TargetFunction::new(2, 2, 5, vec![0, 1, 2, 0]).is_err());
    }

    fn exhaustive_balanced(a: &TargetFunction, c: Ratio<u64>) -> bool {
        let total = (a.rows() * a.cols()) as u64;
        let hist = a.histogram();
        (0u32..1 << a.range()).any(|mask| {
            let mass: u64 = (0..a.range()).filter(|w| mask >> w & 1 == 1).map(|w| hist[w]).sum();
            let t = Ratio::from_integer(total) * c;
            Ratio::from_integer(mass) >= t && Ratio::from_integer(total - mass) >= t
        })
    }

    #[test]
    fn balance_matches_exhaustive_partitions() {
        let cs = [Ratio::new(1, 2), Ratio::new(1, 3), Ratio::new(1, 4), Ratio::new(1, 10), Ratio::new(3, 7)];
        let mut r = rng::seeded(2024);
        for trial in 0..1000 {
            let u = 2 + rng::below(&mut r, 7) as usize;
            let w = 2 + rng::below(&mut r, 11).min((u * u - 2) as u64) as usize;
            let a = TargetFunction::random_with(u, w, &mut r).unwrap();
            let c = cs[trial % cs.len()];
            let got = is_c_balanced(&a, c).unwrap();
            assert_eq!(got.is_some(), exhaustive_balanced(&a, c), "trial {trial}: {a}");
            if let Some(wit) = got {
                let hist = a.histogram();
                let m1: u64 = wit.first.iter().map(|&w| hist[w]).sum();
                let m2: u64 = wit.second.iter().map(|&w| hist[w]).sum();
                assert_eq!((m1, m2), wit.preimage_sizes);
                assert_eq!(wit.first.len() + wit.second.len(), a.range());
            }
        }
    }

    fn small_channel() -> impl Strategy<Value = ChannelFunction> {
        (1usize..=3, 1usize..=3, 1usize..=3).prop_flat_map(|(x1, x2, y)| {
            proptest::collection::vec(0..y, x1 * x2)
                .prop_map(move |e| ChannelFunction::new(x1, x2, y, e).unwrap())
        })
    }

    proptest! {
        #[test]
        fn tensor_power_composes(g in small_channel(), a in 1u32..=2, b in 1u32..=2) {
            prop_assume!(a + b <= 3);
            let whole = g.tensor_power(a + b).unwrap();
            let split = g.tensor_power(a).unwrap().tensor_product(&g.tensor_power(b).unwrap()).unwrap();
            prop_assert_eq!(whole, split);
        }

        #[test]
        fn error_probability_is_exact(seed in any::<u64>(), u in 2usize..6, x in 2usize..5, y in 2usize..5) {
            let mut r = rng::seeded(seed);
            let a = TargetFunction::random_with(u, 3.min(u * u), &mut r).unwrap();
            let g = ChannelFunction::random_with(x, y, &mut r).unwrap();
            let code = Code {
                f1: (0..u).map(|_| rng::below(&mut r, x as u64) as usize).collect(),
                f2: (0..u).map(|_| rng::below(&mut r, x as u64) as usize).collect(),
                decoder: (0..y).map(|_| rng::below(&mut r, a.range() as u64) as usize).collect(),
            };
            let p = error_probability(&a, &g, &code).unwrap();
            prop_assert_eq!((u * u) as u64 % p.denom(), 0);
            let mut errs = 0u64;
            for (k, &target) in a.entries().iter().enumerate() {
                let (i, j) = (k / u, k % u);
                if code.decoder[g.entries()[code.f1[i] * x + code.f2[j]]] != target {
                    errs += 1;
                }
            }
            prop_assert_eq!(p, Ratio::new(errs, (u * u) as u64));
        }

        #[test]
        fn balance_is_monotone_in_c(seed in any::<u64>(), n in 1u64..=50, d in 2u64..=100) {
            prop_assume!(2 * n <= d);
            let mut r = rng::seeded(seed);
            let a = TargetFunction::random_with(5, 4, &mut r).unwrap();
            let c = Ratio::new(n, d);
            if is_c_balanced(&a, c).unwrap().is_some() {
                for smaller in [Ratio::new(1, d), c / 2, c * Ratio::new(9, 10)] {
                    if *smaller.numer() > 0 {
                        prop_assert!(is_c_balanced(&a, smaller).unwrap().is_some());
                    }
                }
            }
        }
    }
}
