//! Seeded experiments on random channels and targets.
//!
//! Trial `i` of an experiment with seed `s` draws from ChaCha stream `i` of
//! seed `s` (see [`crate::rng`]), so a report depends only on its name,
//! parameters and seed, never on how trials were scheduled across threads.
//! When the whole sample space has at most 2^20 elements it is enumerated
//! instead of sampled and the report is marked exhaustive.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::{zero_feasible_search, Answer, SearchOptions};
use crate::graphcodes::{build_equality_code, build_identity_code, BicliqueMode, MatchingMode};
use crate::model::{error_count, is_c_balanced, ChannelFunction, TargetFunction, TargetKind};
use crate::rng;

/// Sample spaces up to this size are enumerated.
pub const EXHAUSTIVE_LIMIT: u64 = 1 << 20;

const WILSON_Z: f64 = 1.959_963_984_540_054;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub parameters: BTreeMap<String, String>,
    /// Decided trials: `successes + failures`.
    pub trials: u64,
    pub successes: u64,
    pub failures: u64,
    /// Trials whose checker ran out of budget; excluded from `trials`.
    pub unknown: u64,
    pub estimate: Ratio<u64>,
    pub wilson_ci_95: (f64, f64),
    /// Analytic bound the estimate is compared against, when one applies.
    pub analytic_bound: Option<f64>,
    pub seed: u64,
    pub exhaustive: bool,
    /// Additional named counts (e.g. trials balanced under any partition).
    pub counters: BTreeMap<String, u64>,
    /// Additional named statistics (e.g. a sample mean).
    pub statistics: BTreeMap<String, f64>,
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Outcome {
    Success,
    Failure,
    Unknown,
}

impl From<bool> for Outcome {
    fn from(b: bool) -> Self {
        if b {
            Outcome::Success
        } else {
            Outcome::Failure
        }
    }
}

struct Tally {
    successes: u64,
    failures: u64,
    unknown: u64,
}

fn tally(outcomes: &[Outcome]) -> Tally {
    let count = |o| outcomes.iter().filter(|&&x| x == o).count() as u64;
    Tally {
        successes: count(Outcome::Success),
        failures: count(Outcome::Failure),
        unknown: count(Outcome::Unknown),
    }
}

impl ExperimentReport {
    fn new(name: &str, parameters: BTreeMap<String, String>, seed: u64, exhaustive: bool, t: Tally) -> Self {
        let trials = t.successes + t.failures;
        ExperimentReport {
            name: name.to_string(),
            parameters,
            trials,
            successes: t.successes,
            failures: t.failures,
            unknown: t.unknown,
            estimate: if trials == 0 { Ratio::zero() } else { Ratio::new(t.successes, trials) },
            wilson_ci_95: wilson_interval(t.successes, trials),
            analytic_bound: None,
            seed,
            exhaustive,
            counters: BTreeMap::new(),
            statistics: BTreeMap::new(),
        }
    }

    pub fn estimate_f64(&self) -> f64 {
        *self.estimate.numer() as f64 / *self.estimate.denom() as f64
    }

    pub const CSV_HEADER: [&'static str; 12] = [
        "name",
        "parameters",
        "trials",
        "successes",
        "failures",
        "unknown",
        "estimate",
        "ci_lo",
        "ci_hi",
        "analytic_bound",
        "seed",
        "exhaustive",
    ];

    /// One tidy CSV record matching [`Self::CSV_HEADER`].
    pub fn csv_record(&self) -> Vec<String> {
        let params: Vec<String> = self.parameters.iter().map(|(k, v)| format!("{k}={v}")).collect();
        vec![
            self.name.clone(),
            params.join(";"),
            self.trials.to_string(),
            self.successes.to_string(),
            self.failures.to_string(),
            self.unknown.to_string(),
            self.estimate_f64().to_string(),
            self.wilson_ci_95.0.to_string(),
            self.wilson_ci_95.1.to_string(),
            self.analytic_bound.map_or(String::new(), |b| b.to_string()),
            self.seed.to_string(),
            self.exhaustive.to_string(),
        ]
    }
}

fn params(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// Runs `trial` on streams `0..trials` in parallel, in index order.
fn run_trials<T: Send>(seed: u64, trials: u64, trial: impl Fn(&mut rng::Rng) -> T + Sync) -> Vec<T> {
    (0..trials)
        .into_par_iter()
        .map(|i| trial(&mut rng::stream(seed, i)))
        .collect()
}

/// `base^exp` if it does not exceed [`EXHAUSTIVE_LIMIT`].
fn small_power(base: u64, exp: u64) -> Option<u64> {
    let mut acc: u64 = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
        if acc > EXHAUSTIVE_LIMIT {
            return None;
        }
    }
    Some(acc)
}

/// Big-endian base-`base` digits of `index`.
fn digits(mut index: u64, base: u64, len: usize) -> Vec<usize> {
    let mut d = vec![0usize; len];
    for slot in d.iter_mut().rev() {
        *slot = (index % base) as usize;
        index /= base;
    }
    d
}

/// Target family of a feasibility experiment. For `Random`, each trial draws
/// a fresh `U x U` target over `W` values and normalizes it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub kind: TargetKind,
    pub u: usize,
    pub w: usize,
}

/// Random `X x X` base channels over `Y` outputs, used `uses` times.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub x: usize,
    pub y: usize,
    pub uses: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Checker {
    /// Exact zero-error search (pruned mode).
    Exact,
    /// Identity code from a `K_{U,U}` of the distinct-value graph.
    IdentityConstruction,
    /// Equality code from a greedy induced matching.
    EqualityConstruction,
}

/// Fraction of random channels over which the target is computed with zero
/// error by the chosen checker.
pub fn feasibility_fraction(
    target: TargetSpec,
    channel: ChannelSpec,
    checker: Checker,
    trials: u64,
    seed: u64,
    budget: u64,
) -> Result<ExperimentReport> {
    let fixed_target = match target.kind {
        TargetKind::Random => None,
        kind => Some(TargetFunction::builtin(kind, target.u, target.w, 0)?.normalized()),
    };
    match (checker, target.kind) {
        (Checker::Exact, _) => {}
        (Checker::IdentityConstruction, TargetKind::Identity) => {}
        (Checker::EqualityConstruction, TargetKind::Equality) => {}
        _ => {
            return Err(Error::Domain(format!(
                "checker {checker:?} does not compute a {:?} target",
                target.kind
            )))
        }
    }
    if channel.x < 1 || channel.y < 1 || channel.uses < 1 {
        return Err(Error::InvalidCardinality("channel spec needs X, Y, uses >= 1".into()));
    }
    let check = |g: ChannelFunction, r: &mut rng::Rng| -> Result<Outcome> {
        let g = if channel.uses > 1 { g.tensor_power(channel.uses)? } else { g };
        let a = match &fixed_target {
            Some(a) => a.clone(),
            None => TargetFunction::random_with(target.u, target.w, r)?.normalized(),
        };
        match checker {
            Checker::Exact => {
                let verdict = zero_feasible_search(&a, &g, SearchOptions::pruned(budget))?;
                Ok(match verdict.feasible {
                    Answer::Feasible => Outcome::Success,
                    Answer::Infeasible => Outcome::Failure,
                    Answer::Unknown => Outcome::Unknown,
                })
            }
            Checker::IdentityConstruction => match build_identity_code(&g, target.u, BicliqueMode::Exact, budget) {
                Ok(code) => Ok(Outcome::from(error_count(&a, &g, &code)? == 0)),
                Err(Error::NotFound { .. }) => Ok(Outcome::Failure),
                Err(Error::BudgetExhausted { .. }) => Ok(Outcome::Unknown),
                Err(e) => Err(e),
            },
            Checker::EqualityConstruction => {
                let subset_seed = rand::RngCore::next_u64(r);
                match build_equality_code(&g, target.u, subset_seed, MatchingMode::Greedy) {
                    Ok(code) => Ok(Outcome::from(error_count(&a, &g, &code)? == 0)),
                    Err(Error::MatchingTooSmall { .. }) => Ok(Outcome::Failure),
                    Err(e) => Err(e),
                }
            }
        }
    };
    let cells = (channel.x * channel.x) as u64;
    let space = small_power(channel.y as u64, cells);
    let exhaustive = space.is_some() && target.kind != TargetKind::Random;
    let outcomes: Vec<Outcome> = if let (true, Some(count)) = (exhaustive, space) {
        (0..count)
            .into_par_iter()
            .map(|index| {
                let entries = digits(index, channel.y as u64, cells as usize);
                let g = ChannelFunction::new(channel.x, channel.x, channel.y, entries)?;
                check(g, &mut rng::stream(seed, index))
            })
            .collect::<Result<_>>()?
    } else {
        run_trials(seed, trials, |r| {
            let g = ChannelFunction::random_with(channel.x, channel.y, r)?;
            check(g, r)
        })
        .into_iter()
        .collect::<Result<_>>()?
    };
    let p = params(&[
        ("target", format!("{:?}", target.kind).to_lowercase()),
        ("U", target.u.to_string()),
        ("W", target.w.to_string()),
        ("X", channel.x.to_string()),
        ("Y", channel.y.to_string()),
        ("uses", channel.uses.to_string()),
        ("checker", format!("{checker:?}").to_lowercase()),
        ("budget", budget.to_string()),
        ("requested_trials", trials.to_string()),
    ]);
    Ok(ExperimentReport::new("feasibility_fraction", p, seed, exhaustive, tally(&outcomes)))
}

/// Probability that a uniformly random `X x X` channel over `Y` outputs has
/// at least `X^2 - X + 1` distinct entries.
pub fn distinct_entries_experiment(x: usize, y: usize, trials: u64, seed: u64) -> Result<ExperimentReport> {
    if x < 1 || y < 1 {
        return Err(Error::InvalidCardinality("need X >= 1 and Y >= 1".into()));
    }
    let needed = x * x - x + 1;
    let outcomes: Vec<Outcome> = run_trials(seed, trials, |r| {
        ChannelFunction::random_with(x, y, r).map(|g| Outcome::from(g.distinct_outputs() >= needed))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let p = params(&[("X", x.to_string()), ("Y", y.to_string()), ("needed", needed.to_string())]);
    let mut report = ExperimentReport::new("distinct_entries", p, seed, false, tally(&outcomes));
    let xf = x as f64;
    if y as f64 >= 3f64.exp() * xf.powi(3) {
        report.analytic_bound = Some(1.0 - (-(xf - 2.0)).exp());
    }
    Ok(report)
}

/// Inverse-CDF sample of a geometric variable on `{1, 2, ...}` with success
/// probability `p`.
pub fn sample_geometric(r: &mut rng::Rng, p: f64) -> u64 {
    if p >= 1.0 {
        return 1;
    }
    let u = rng::unit_open0(r);
    ((u.ln() / (1.0 - p).ln()).ceil() as u64).max(1)
}

/// Rounds needed to collect `n` distinct coupons out of `y`: a sum of
/// geometric variables with success probabilities `1 - (i-1)/y`.
pub fn sample_coupon_rounds(r: &mut rng::Rng, y: u64, n: u64) -> u64 {
    (1..=n).map(|i| sample_geometric(r, 1.0 - (i - 1) as f64 / y as f64)).sum()
}

/// Empirical `P(z > threshold)` for the coupon-collector variable `z`.
pub fn coupon_collector_sim(y: u64, n: u64, threshold: u64, trials: u64, seed: u64) -> Result<ExperimentReport> {
    if n > y || y == 0 {
        return Err(Error::Domain(format!("need N <= Y and Y >= 1, got N={n}, Y={y}")));
    }
    let rounds = run_trials(seed, trials, |r| sample_coupon_rounds(r, y, n));
    let outcomes: Vec<Outcome> = rounds.iter().map(|&z| Outcome::from(z > threshold)).collect();
    let p = params(&[("Y", y.to_string()), ("N", n.to_string()), ("threshold", threshold.to_string())]);
    let mut report = ExperimentReport::new("coupon_collector", p, seed, false, tally(&outcomes));
    if trials > 0 {
        let sum: u128 = rounds.iter().map(|&z| z as u128).sum();
        let sum_sq: u128 = rounds.iter().map(|&z| (z as u128) * (z as u128)).sum();
        let t = trials as f64;
        let mean = sum as f64 / t;
        let var = if trials > 1 { (sum_sq as f64 - t * mean * mean) / (t - 1.0) } else { 0.0 };
        report.statistics.insert("mean_rounds".into(), mean);
        report.statistics.insert("var_rounds".into(), var.max(0.0));
        let expected: f64 = (1..=n).map(|i| y as f64 / (y - i + 1) as f64).sum();
        report.statistics.insert("expected_rounds".into(), expected);
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailKind {
    /// `P(z > (1+γ)μ)`, or `P(z > t)` for exact tails.
    Upper,
    /// `P(z < (1-γ)μ)`, or `P(z < t)` for exact tails.
    Lower,
}

/// Multiplicative Chernoff bounds for sums of independent `{0,1}` variables:
/// `(e^γ / (1+γ)^(1+γ))^μ` for the upper tail and `exp(-μγ²/2)` for the
/// lower tail (`γ <= 1`).
pub fn chernoff_bound(kind: TailKind, mu: f64, gamma: f64) -> Result<f64> {
    if mu.is_nan() || gamma.is_nan() || mu <= 0.0 || gamma <= 0.0 {
        return Err(Error::Domain(format!("need mu > 0 and gamma > 0, got mu={mu}, gamma={gamma}")));
    }
    match kind {
        TailKind::Upper => Ok((mu * (gamma - (1.0 + gamma) * (1.0 + gamma).ln())).exp()),
        TailKind::Lower if gamma <= 1.0 => Ok((-mu * gamma * gamma / 2.0).exp()),
        TailKind::Lower => Err(Error::Domain(format!("lower-tail bound needs gamma <= 1, got {gamma}"))),
    }
}

fn big(r: Ratio<u64>) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

/// Exact `P(z > t)` or `P(z < t)` for `z ~ Binomial(n, p)`.
pub fn exact_binomial_tail(n: u32, p: Ratio<u64>, kind: TailKind, threshold: f64) -> Result<BigRational> {
    if p > Ratio::one() {
        return Err(Error::Domain(format!("p must lie in [0, 1], got {p}")));
    }
    let p = big(p);
    let q = BigRational::one() - &p;
    let mut total = BigRational::zero();
    let mut binom = BigInt::one();
    for k in 0..=n {
        if k > 0 {
            binom = binom * BigInt::from(n - k + 1) / BigInt::from(k);
        }
        let inside = match kind {
            TailKind::Upper => k as f64 > threshold,
            TailKind::Lower => (k as f64) < threshold,
        };
        if inside {
            let term = BigRational::from_integer(binom.clone()) * num_traits::pow(p.clone(), k as usize)
                * num_traits::pow(q.clone(), (n - k) as usize);
            total += term;
        }
    }
    Ok(total)
}

/// Fraction of uniformly random `U x U` targets over `W` values that are
/// c-balanced under the fixed split `{0, ..., ⌊W/2⌋ - 1}` versus the rest.
/// The `dp_balanced` counter records trials balanced under any partition.
pub fn balanced_fraction_experiment(u: usize, w: usize, c: Ratio<u64>, trials: u64, seed: u64) -> Result<ExperimentReport> {
    if *c.numer() == 0 || c > Ratio::new(1, 2) {
        return Err(Error::Domain(format!("c must lie in (0, 1/2], got {c}")));
    }
    if u < 1 || w < 2 || w > u * u {
        return Err(Error::InvalidCardinality(format!("need 2 <= W <= U^2, got U={u}, W={w}")));
    }
    let total = (u * u) as u64;
    let threshold = (c * Ratio::from_integer(total)).ceil().to_integer();
    let half = w / 2;
    let judge = |a: &TargetFunction| -> Result<(Outcome, bool)> {
        let mass: u64 = a.histogram()[..half].iter().sum();
        let fixed = mass >= threshold && total - mass >= threshold;
        let any = is_c_balanced(a, c)?.is_some();
        Ok((Outcome::from(fixed), any))
    };
    let space = small_power(w as u64, total);
    let results: Vec<(Outcome, bool)> = match space {
        Some(count) => (0..count)
            .into_par_iter()
            .map(|index| judge(&TargetFunction::new(u, u, w, digits(index, w as u64, total as usize))?))
            .collect::<Result<_>>()?,
        None => run_trials(seed, trials, |r| judge(&TargetFunction::random_with(u, w, r)?))
            .into_iter()
            .collect::<Result<_>>()?,
    };
    let outcomes: Vec<Outcome> = results.iter().map(|r| r.0).collect();
    let p = params(&[("U", u.to_string()), ("W", w.to_string()), ("c", c.to_string())]);
    let mut report = ExperimentReport::new("balanced_fraction", p, seed, space.is_some(), tally(&outcomes));
    report
        .counters
        .insert("dp_balanced".into(), results.iter().filter(|r| r.1).count() as u64);
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproximationBound {
    /// `(1-δ) ln(W(1-δ)) - (1-δ)`.
    pub alpha: f64,
    /// `2 U ln U - α U²`.
    pub exponent: f64,
    /// `exp(exponent)` clamped to `[0, 1]`.
    pub bound: f64,
    /// The unclamped bound is at least 1.
    pub vacuous: bool,
}

/// Upper bound on the probability that a fixed function is a
/// δ-approximation of a uniformly random `U x U` target over `W` values.
pub fn approximation_bound(u: u64, w: u64, delta: f64) -> Result<ApproximationBound> {
    let wf = w as f64;
    if w < 2 || !(delta > 0.0 && delta < 1.0 - 1.0 / wf) {
        return Err(Error::Domain(format!("need 0 < delta < 1 - 1/W, got delta={delta}, W={w}")));
    }
    let keep = 1.0 - delta;
    let alpha = keep * (wf * keep).ln() - keep;
    let uf = u as f64;
    let exponent = 2.0 * uf * uf.ln() - alpha * uf * uf;
    Ok(ApproximationBound {
        alpha,
        exponent,
        bound: exponent.exp().clamp(0.0, 1.0),
        vacuous: exponent >= 0.0,
    })
}

/// Probability that one fixed approximation agrees with a random target on
/// at least `(1-δ) U²` pairs, exactly, alongside `exp(-α U²)`.
pub fn approximation_single_map(u: u32, w: u64, delta: f64) -> Result<(BigRational, f64)> {
    let b = approximation_bound(u as u64, w, delta)?;
    let cells = u * u;
    let at_least = ((1.0 - delta) * cells as f64).ceil();
    let exact = exact_binomial_tail(cells, Ratio::new(1, w), TailKind::Upper, at_least - 0.5)?;
    Ok((exact, (-b.alpha * cells as f64).exp()))
}
