//! Multi-shot rate quantities: conditional output entropies under
//! time-shared product inputs, the maximum output entropy `H*(G)`, the
//! asymptotic channel-use count for the identity function and the cut-set
//! comparison. All entropies are in bits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChannelFunction, TargetFunction};
use crate::rng;

const ROW_TOLERANCE: f64 = 1e-12;

/// Time-sharing weights `p(q)` with product inputs `p(x1|q) p(x2|q)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputDistribution {
    pub weights: Vec<f64>,
    pub p1: Vec<Vec<f64>>,
    pub p2: Vec<Vec<f64>>,
}

impl InputDistribution {
    pub fn product(p1: Vec<f64>, p2: Vec<f64>) -> Self {
        InputDistribution { weights: vec![1.0], p1: vec![p1], p2: vec![p2] }
    }

    pub fn uniform(x1: usize, x2: usize) -> Self {
        Self::product(vec![1.0 / x1 as f64; x1], vec![1.0 / x2 as f64; x2])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn validate(&self, g: &ChannelFunction) -> Result<()> {
        let q = self.weights.len();
        if q == 0 || self.p1.len() != q || self.p2.len() != q {
            return Err(Error::DimensionMismatch(format!(
                "time sharing over {q} symbols with {} and {} input rows",
                self.p1.len(),
                self.p2.len()
            )));
        }
        if self.p1.iter().any(|r| r.len() != g.inputs1()) || self.p2.iter().any(|r| r.len() != g.inputs2()) {
            return Err(Error::DimensionMismatch("input distribution does not match the channel".into()));
        }
        let stochastic = |v: &[f64]| {
            v.iter().all(|&p| p >= 0.0 && p.is_finite()) && (v.iter().sum::<f64>() - 1.0).abs() <= ROW_TOLERANCE
        };
        if !stochastic(&self.weights) || !self.p1.iter().all(|r| stochastic(r)) || !self.p2.iter().all(|r| stochastic(r)) {
            return Err(Error::Domain("input distribution is not stochastic".into()));
        }
        Ok(())
    }
}

/// `(H(y|q), H(y|x1,q), H(y|x2,q))` in bits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateTriple {
    pub h_y_q: f64,
    pub h_y_x1_q: f64,
    pub h_y_x2_q: f64,
}

impl RateTriple {
    fn as_array(&self) -> [f64; 3] {
        [self.h_y_q, self.h_y_x1_q, self.h_y_x2_q]
    }

    /// Per-channel-use rate `min(H(y|q)/2, H(y|x1,q), H(y|x2,q))` supported
    /// for the identity function: `n log` bits cover `log U` per user and
    /// `2 log U` jointly.
    pub fn identity_rate(&self) -> f64 {
        (self.h_y_q / 2.0).min(self.h_y_x1_q).min(self.h_y_x2_q)
    }
}

fn entropy_bits<'a>(probs: impl IntoIterator<Item = &'a f64>) -> f64 {
    probs
        .into_iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum::<f64>()
        .max(0.0)
}

/// Entropies for a single product input distribution (no time sharing).
fn product_triple(g: &ChannelFunction, p1: &[f64], p2: &[f64]) -> RateTriple {
    let y = g.outputs();
    let mut joint = vec![0.0; y];
    let mut cond = vec![0.0; y];
    let mut h_x1 = 0.0;
    for (a, &pa) in p1.iter().enumerate() {
        cond.iter_mut().for_each(|c| *c = 0.0);
        for (b, &pb) in p2.iter().enumerate() {
            let out = g.get(a, b);
            cond[out] += pb;
            joint[out] += pa * pb;
        }
        if pa > 0.0 {
            h_x1 += pa * entropy_bits(&cond);
        }
    }
    let mut h_x2 = 0.0;
    for (b, &pb) in p2.iter().enumerate() {
        if pb == 0.0 {
            continue;
        }
        cond.iter_mut().for_each(|c| *c = 0.0);
        for (a, &pa) in p1.iter().enumerate() {
            cond[g.get(a, b)] += pa;
        }
        h_x2 += pb * entropy_bits(&cond);
    }
    RateTriple { h_y_q: entropy_bits(&joint), h_y_x1_q: h_x1, h_y_x2_q: h_x2 }
}

/// Exact conditional entropies of `y = g(x1, x2)` under `d`.
pub fn rate_triple(g: &ChannelFunction, d: &InputDistribution) -> Result<RateTriple> {
    d.validate(g)?;
    let mut acc = [0.0; 3];
    for q in 0..d.len() {
        let t = product_triple(g, &d.p1[q], &d.p2[q]).as_array();
        for k in 0..3 {
            acc[k] += d.weights[q] * t[k];
        }
    }
    Ok(RateTriple { h_y_q: acc[0], h_y_x1_q: acc[1], h_y_x2_q: acc[2] })
}

/// Settings of the multistart alternating maximizer.
#[derive(Clone, Copy, Debug)]
pub struct OptimizerConfig {
    /// Number of starts; the first is the uniform distribution.
    pub starts: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { starts: 32, tolerance: 1e-9, max_iterations: 10_000, seed: 0 }
    }
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &mut [f64]) {
    let mut u = v.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumulative += ui;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
}

/// Objective `w . (H(y), H(y|x1), H(y|x2))` for product inputs, with the
/// gradient in the second input distribution. Natural-log units.
struct Objective<'a> {
    g: &'a ChannelFunction,
    weights: [f64; 3],
}

const LN_FLOOR: f64 = 1e-300;

impl Objective<'_> {
    fn value(&self, p1: &[f64], p2: &[f64]) -> f64 {
        let t = product_triple(self.g, p1, p2).as_array();
        (0..3).map(|k| self.weights[k] * t[k]).sum()
    }

    fn gradient_second(&self, p1: &[f64], p2: &[f64]) -> Vec<f64> {
        let g = self.g;
        let [wy, w1, w2] = self.weights;
        let mut joint = vec![0.0; g.outputs()];
        for (a, &pa) in p1.iter().enumerate() {
            for (b, &pb) in p2.iter().enumerate() {
                joint[g.get(a, b)] += pa * pb;
            }
        }
        let mut grad = vec![0.0; p2.len()];
        let mut cond = vec![0.0; g.outputs()];
        for (a, &pa) in p1.iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            cond.iter_mut().for_each(|c| *c = 0.0);
            for (b, &pb) in p2.iter().enumerate() {
                cond[g.get(a, b)] += pb;
            }
            for (b, gb) in grad.iter_mut().enumerate() {
                let out = g.get(a, b);
                *gb -= pa * (wy * joint[out].max(LN_FLOOR).ln() + w1 * cond[out].max(LN_FLOOR).ln());
            }
        }
        if w2 != 0.0 {
            for (b, gb) in grad.iter_mut().enumerate() {
                cond.iter_mut().for_each(|c| *c = 0.0);
                for (a, &pa) in p1.iter().enumerate() {
                    cond[g.get(a, b)] += pa;
                }
                let h: f64 = cond.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
                *gb += w2 * h;
            }
        }
        grad
    }
}

fn transpose(g: &ChannelFunction) -> ChannelFunction {
    ChannelFunction::from_fn(g.inputs2(), g.inputs1(), g.outputs(), |a, b| g.get(b, a))
        .expect("transpose of a valid channel")
}

/// Projected gradient ascent in `p2` with `p1` fixed; returns the new value.
fn ascend(obj: &Objective<'_>, p1: &[f64], p2: &mut Vec<f64>, tol: f64, budget: &mut usize) -> f64 {
    let mut value = obj.value(p1, p2);
    let mut step = 1.0;
    while *budget > 0 {
        *budget -= 1;
        let grad = obj.gradient_second(p1, p2);
        let mut improved = false;
        while step > 1e-14 {
            let mut cand: Vec<f64> = p2.iter().zip(&grad).map(|(p, d)| p + step * d).collect();
            project_simplex(&mut cand);
            let v = obj.value(p1, &cand);
            if v > value {
                let gain = v - value;
                *p2 = cand;
                value = v;
                improved = gain > tol;
                step *= 2.0;
                break;
            }
            step /= 2.0;
        }
        if !improved {
            break;
        }
    }
    value
}

/// Alternating maximization of `weights . (H(y), H(y|x1), H(y|x2))` over
/// product inputs from one start.
fn alternate(
    g: &ChannelFunction,
    gt: &ChannelFunction,
    weights: [f64; 3],
    mut p1: Vec<f64>,
    mut p2: Vec<f64>,
    cfg: &OptimizerConfig,
) -> (f64, Vec<f64>, Vec<f64>) {
    let forward = Objective { g, weights };
    let backward = Objective { g: gt, weights: [weights[0], weights[2], weights[1]] };
    let mut value = forward.value(&p1, &p2);
    let mut budget = cfg.max_iterations;
    while budget > 0 {
        ascend(&forward, &p1, &mut p2, cfg.tolerance, &mut budget);
        let v = ascend(&backward, &p2, &mut p1, cfg.tolerance, &mut budget);
        let gain = v - value;
        value = v.max(value);
        if gain < cfg.tolerance {
            break;
        }
    }
    (value, p1, p2)
}

fn random_simplex(r: &mut rng::Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| -rng::unit_open0(r).ln()).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

fn multistart(g: &ChannelFunction, weights: [f64; 3], cfg: &OptimizerConfig) -> (f64, Vec<f64>, Vec<f64>) {
    let gt = transpose(g);
    let mut r = rng::seeded(cfg.seed);
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    for start in 0..cfg.starts.max(1) {
        let (p1, p2) = if start == 0 {
            (vec![1.0 / g.inputs1() as f64; g.inputs1()], vec![1.0 / g.inputs2() as f64; g.inputs2()])
        } else {
            (random_simplex(&mut r, g.inputs1()), random_simplex(&mut r, g.inputs2()))
        };
        let found = alternate(g, &gt, weights, p1, p2, cfg);
        if best.as_ref().is_none_or(|b| found.0 > b.0) {
            best = Some(found);
        }
    }
    best.expect("at least one start")
}

/// Maximum output entropy with the maximizing product distribution.
pub fn max_output_entropy_with(g: &ChannelFunction, cfg: &OptimizerConfig) -> (f64, InputDistribution) {
    let (_, p1, p2) = multistart(g, [1.0, 0.0, 0.0], cfg);
    let h = product_triple(g, &p1, &p2).h_y_q;
    (h, InputDistribution::product(p1, p2))
}

/// `H*(G)`: the largest output entropy reachable with independent inputs.
pub fn max_output_entropy(g: &ChannelFunction) -> Result<f64> {
    if g.uses() != 1 {
        return Err(Error::Domain("maximum output entropy is defined on a base channel".into()));
    }
    Ok(max_output_entropy_with(g, &OptimizerConfig::default()).0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinUses {
    /// `⌈log2 U / rate⌉`, 0 for `U = 1`.
    pub n: u64,
    /// `log2 U / rate` before rounding.
    pub n_real: f64,
    pub rate: f64,
    pub witness: InputDistribution,
}

const CEIL_SLACK: f64 = 1e-6;

/// Relative slack absorbed when rounding an optimized real up to an integer.
pub fn ceil_with_slack(x: f64) -> u64 {
    (x * (1.0 - CEIL_SLACK)).ceil().max(0.0) as u64
}

/// Number of channel uses the rate region asks for to send the identity
/// function of `U x U` messages: the smallest `n` with `2 log U <= n H(y|q)`
/// and `log U <= n H(y|x_i, q)`, minimized over time-shared inputs.
///
/// This is an asymptotic-rate calculator; it does not produce a code.
pub fn min_uses_identity(g: &ChannelFunction, u: u64) -> Result<MinUses> {
    min_uses_identity_with(g, u, &OptimizerConfig::default())
}

pub fn min_uses_identity_with(g: &ChannelFunction, u: u64, cfg: &OptimizerConfig) -> Result<MinUses> {
    if u == 0 {
        return Err(Error::Domain("U must be positive".into()));
    }
    if u == 1 {
        return Ok(MinUses { n: 0, n_real: 0.0, rate: 0.0, witness: InputDistribution::uniform(g.inputs1(), g.inputs2()) });
    }
    let (h_star, _) = max_output_entropy_with(g, cfg);
    if h_star <= 1e-12 {
        return Err(Error::DegenerateChannel);
    }
    let (rate, witness) = best_identity_rate(g, cfg);
    if rate <= 1e-12 {
        return Err(Error::Domain(
            "one user cannot influence the output; the identity function is not computable".into(),
        ));
    }
    let n_real = (u as f64).log2() / rate;
    Ok(MinUses { n: ceil_with_slack(n_real), n_real, rate, witness })
}

struct Candidate {
    triple: [f64; 3],
    p1: Vec<f64>,
    p2: Vec<f64>,
}

fn scaled(t: &RateTriple) -> [f64; 3] {
    [t.h_y_q / 2.0, t.h_y_x1_q, t.h_y_x2_q]
}

/// Maximizes `min(H(y|q)/2, H(y|x1,q), H(y|x2,q))` over time-sharing
/// mixtures. Candidate product points are the maximizers of weighted sums
/// over a grid of weights; the best mixture of at most three of them is then
/// found exactly.
fn best_identity_rate(g: &ChannelFunction, cfg: &OptimizerConfig) -> (f64, InputDistribution) {
    const STEPS: usize = 8;
    let mut cands: Vec<Candidate> = Vec::new();
    for i in 0..=STEPS {
        for j in 0..=STEPS - i {
            let w = [i as f64 / STEPS as f64, j as f64 / STEPS as f64, (STEPS - i - j) as f64 / STEPS as f64];
            // Weights apply to (H(y)/2, H(y|x1), H(y|x2)).
            let (_, p1, p2) = multistart(g, [w[0] / 2.0, w[1], w[2]], cfg);
            let triple = scaled(&product_triple(g, &p1, &p2));
            if !cands.iter().any(|c| (0..3).all(|k| (c.triple[k] - triple[k]).abs() < 1e-12)) {
                cands.push(Candidate { triple, p1, p2 });
            }
        }
    }
    let max_q = (g.inputs1() * g.inputs2()).min(3);
    let mut best = (f64::NEG_INFINITY, vec![(0usize, 1.0f64)]);
    let mut consider = |value: f64, mix: Vec<(usize, f64)>| {
        if value > best.0 + 1e-15 {
            best = (value, mix);
        }
    };
    let min3 = |t: [f64; 3]| t[0].min(t[1]).min(t[2]);
    let mix_of = |parts: &[(usize, f64)]| {
        let mut t = [0.0; 3];
        for &(c, l) in parts {
            for k in 0..3 {
                t[k] += l * cands[c].triple[k];
            }
        }
        t
    };
    let n = cands.len();
    for a in 0..n {
        consider(min3(cands[a].triple), vec![(a, 1.0)]);
    }
    if max_q >= 2 {
        for a in 0..n {
            for b in a + 1..n {
                for l in pair_breakpoints(&cands[a].triple, &cands[b].triple) {
                    let parts = vec![(a, l), (b, 1.0 - l)];
                    consider(min3(mix_of(&parts)), parts);
                }
            }
        }
    }
    if max_q >= 3 {
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    if let Some((la, lb)) = triple_equalizer(&cands[a].triple, &cands[b].triple, &cands[c].triple) {
                        let parts = vec![(a, la), (b, lb), (c, 1.0 - la - lb)];
                        consider(min3(mix_of(&parts)), parts);
                    }
                }
            }
        }
    }
    let parts: Vec<(usize, f64)> = best.1.into_iter().filter(|&(_, l)| l > 0.0).collect();
    let total: f64 = parts.iter().map(|p| p.1).sum();
    let witness = InputDistribution {
        weights: parts.iter().map(|p| p.1 / total).collect(),
        p1: parts.iter().map(|p| cands[p.0].p1.clone()).collect(),
        p2: parts.iter().map(|p| cands[p.0].p2.clone()).collect(),
    };
    let rate = rate_triple(g, &witness).map_or(best.0, |t| t.identity_rate());
    (rate, witness)
}

/// Mixing weights `l` in `[0, 1]` for `l a + (1 - l) b` at which the minimum
/// of the three coordinates can peak.
fn pair_breakpoints(a: &[f64; 3], b: &[f64; 3]) -> Vec<f64> {
    let mut out = vec![0.0, 1.0];
    for i in 0..3 {
        for j in i + 1..3 {
            // f_k(l) = b_k + l (a_k - b_k)
            let slope = (a[i] - b[i]) - (a[j] - b[j]);
            if slope.abs() > 1e-15 {
                let l = (b[j] - b[i]) / slope;
                if (0.0..=1.0).contains(&l) {
                    out.push(l);
                }
            }
        }
    }
    out
}

/// Interior mixture of three points at which all coordinates agree.
fn triple_equalizer(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> Option<(f64, f64)> {
    // f_k = c_k + la (a_k - c_k) + lb (b_k - c_k); solve f0 = f1, f1 = f2.
    let row = |i: usize, j: usize| {
        (
            (a[i] - c[i]) - (a[j] - c[j]),
            (b[i] - c[i]) - (b[j] - c[j]),
            c[j] - c[i],
        )
    };
    let (m11, m12, r1) = row(0, 1);
    let (m21, m22, r2) = row(1, 2);
    let det = m11 * m22 - m12 * m21;
    if det.abs() < 1e-15 {
        return None;
    }
    let la = (r1 * m22 - m12 * r2) / det;
    let lb = (m11 * r2 - r1 * m21) / det;
    (la >= 0.0 && lb >= 0.0 && la + lb <= 1.0).then_some((la, lb))
}

/// `log2(W) / H*(G)`.
pub fn cutset_lower_bound(g: &ChannelFunction, w: u64) -> Result<f64> {
    if w == 0 {
        return Err(Error::Domain("W must be positive".into()));
    }
    if w == 1 {
        return Ok(0.0);
    }
    let h_star = max_output_entropy(g)?;
    if h_star <= 1e-12 {
        return Err(Error::DegenerateChannel);
    }
    Ok((w as f64).log2() / h_star)
}

/// Entropy of `a(u1, u2)` under independent uniform messages.
pub fn target_entropy(a: &TargetFunction) -> f64 {
    let total = (a.rows() * a.cols()) as f64;
    let probs: Vec<f64> = a.histogram().iter().map(|&h| h as f64 / total).collect();
    entropy_bits(&probs)
}

/// One row of the rates report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub u: u64,
    pub w: u64,
    pub n_min: u64,
    pub n_real: f64,
    pub h_star: f64,
    pub cutset_bound: f64,
    pub witness: InputDistribution,
}

/// Minimum identity channel uses, `H*` and the cut-set bound for a target
/// range of size `W`.
pub fn rate_report(g: &ChannelFunction, u: u64, w: u64) -> Result<RateReport> {
    let h_star = max_output_entropy(g)?;
    let uses = min_uses_identity(g, u)?;
    let cutset_bound = cutset_lower_bound(g, w)?;
    Ok(RateReport {
        u,
        w,
        n_min: uses.n,
        n_real: uses.n_real,
        h_star,
        cutset_bound,
        witness: uses.witness,
    })
}
