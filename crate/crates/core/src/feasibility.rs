//! Exact decision procedures for zero-error and δ-feasibility.
//!
//! A pair of encoders computes the target with zero error iff, on the ordered
//! submatrix of channel outputs they select, every output value is reached
//! only by message pairs sharing one target value. Both search modes test
//! exactly this condition; the decoder then maps each reached output to that
//! value and every unreached output to 0.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{error_count, ChannelFunction, Code, TargetFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// Incremental assignment of injective encoders with conflict pruning.
    Pruned,
    /// Enumeration of all encoder pairs.
    Naive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Answer {
    Feasible,
    Infeasible,
    /// The node budget ran out before the search was decided.
    Unknown,
}

impl Serialize for Answer {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Answer::Feasible => s.serialize_bool(true),
            Answer::Infeasible => s.serialize_bool(false),
            Answer::Unknown => s.serialize_str("unknown"),
        }
    }
}

impl<'de> Deserialize<'de> for Answer {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Bool(bool),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Bool(true) => Ok(Answer::Feasible),
            Raw::Bool(false) => Ok(Answer::Infeasible),
            Raw::Str(s) if s == "unknown" => Ok(Answer::Unknown),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("unexpected verdict {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityVerdict {
    pub feasible: Answer,
    pub code: Option<Code>,
    pub nodes: u64,
    pub mode: SearchMode,
}

#[derive(Clone, Copy, Debug)]
pub struct SearchOptions {
    pub mode: SearchMode,
    /// Maximum number of search nodes before answering `Unknown`.
    pub budget: u64,
    /// Naive mode only: restrict the enumeration to injective encoders.
    /// Pruned mode always searches injective encoders.
    pub injective_only: bool,
}

impl SearchOptions {
    pub fn pruned(budget: u64) -> Self {
        SearchOptions { mode: SearchMode::Pruned, budget, injective_only: true }
    }

    pub fn naive(budget: u64) -> Self {
        SearchOptions { mode: SearchMode::Naive, budget, injective_only: false }
    }
}

/// Output value -> target value bindings, reference counted for backtracking.
struct Bindings {
    value: Vec<usize>,
    count: Vec<u32>,
}

impl Bindings {
    fn new(outputs: usize) -> Self {
        Bindings { value: vec![0; outputs], count: vec![0; outputs] }
    }

    /// Binds `y` to `w`; false (and nothing recorded) on conflict.
    #[inline]
    fn bind(&mut self, y: usize, w: usize) -> bool {
        if self.count[y] == 0 {
            self.value[y] = w;
        } else if self.value[y] != w {
            return false;
        }
        self.count[y] += 1;
        true
    }

    #[inline]
    fn unbind(&mut self, y: usize) {
        self.count[y] -= 1;
    }

    fn decoder(&self) -> Vec<usize> {
        self.value
            .iter()
            .zip(&self.count)
            .map(|(&v, &c)| if c > 0 { v } else { 0 })
            .collect()
    }
}

/// Whether `(f1, f2)` admits a zero-error decoder, and that decoder.
pub fn zero_error_decoder(
    a: &TargetFunction,
    g: &ChannelFunction,
    f1: &[usize],
    f2: &[usize],
) -> Option<Vec<usize>> {
    let mut table = Bindings::new(g.outputs());
    for (u1, &x1) in f1.iter().enumerate() {
        for (u2, &x2) in f2.iter().enumerate() {
            if !table.bind(g.get(x1, x2), a.get(u1, u2)) {
                return None;
            }
        }
    }
    Some(table.decoder())
}

fn check_search_input(a: &TargetFunction, g: &ChannelFunction) -> Result<()> {
    if a.rows() > g.inputs1() || a.cols() > g.inputs2() {
        return Err(Error::DimensionMismatch(format!(
            "target is {}x{} but channel only has {}x{} inputs",
            a.rows(),
            a.cols(),
            g.inputs1(),
            g.inputs2()
        )));
    }
    if !a.is_normalized() {
        return Err(Error::Domain(
            "target has duplicate rows or columns; normalize it first".into(),
        ));
    }
    Ok(())
}

/// Decides whether `(A, G)` is 0-feasible.
pub fn zero_feasible_search(
    a: &TargetFunction,
    g: &ChannelFunction,
    opts: SearchOptions,
) -> Result<FeasibilityVerdict> {
    check_search_input(a, g)?;
    let (answer, code, nodes) = match opts.mode {
        SearchMode::Pruned => PrunedSearch::run(a, g, opts.budget),
        SearchMode::Naive => naive_search(a, g, opts.budget, opts.injective_only),
    };
    Ok(FeasibilityVerdict { feasible: answer, code, nodes, mode: opts.mode })
}

/// Advances `digits` as a base-`base` odometer; false after wrapping around.
fn odometer(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

fn is_injective(f: &[usize]) -> bool {
    (0..f.len()).all(|i| !f[..i].contains(&f[i]))
}

fn naive_search(
    a: &TargetFunction,
    g: &ChannelFunction,
    budget: u64,
    injective_only: bool,
) -> (Answer, Option<Code>, u64) {
    let mut nodes = 0u64;
    let mut f1 = vec![0usize; a.rows()];
    loop {
        if !injective_only || is_injective(&f1) {
            let mut f2 = vec![0usize; a.cols()];
            loop {
                if !injective_only || is_injective(&f2) {
                    nodes += 1;
                    if nodes > budget {
                        return (Answer::Unknown, None, nodes);
                    }
                    if let Some(decoder) = zero_error_decoder(a, g, &f1, &f2) {
                        let code = Code { f1: f1.clone(), f2, decoder };
                        return (Answer::Feasible, Some(code), nodes);
                    }
                }
                if !odometer(&mut f2, g.inputs2()) {
                    break;
                }
            }
        }
        if !odometer(&mut f1, g.inputs1()) {
            break;
        }
    }
    (Answer::Infeasible, None, nodes)
}

/// Rows first, then columns. Row assignments never conflict by themselves;
/// each column assignment binds the outputs it reaches in every row.
struct PrunedSearch<'a> {
    a: &'a TargetFunction,
    g: &'a ChannelFunction,
    f1: Vec<usize>,
    f2: Vec<usize>,
    used1: Vec<bool>,
    used2: Vec<bool>,
    table: Bindings,
    nodes: u64,
    budget: u64,
}

enum Step {
    Found,
    Exhausted,
    OutOfBudget,
}

impl<'a> PrunedSearch<'a> {
    fn run(a: &'a TargetFunction, g: &'a ChannelFunction, budget: u64) -> (Answer, Option<Code>, u64) {
        let mut s = PrunedSearch {
            a,
            g,
            f1: Vec::with_capacity(a.rows()),
            f2: Vec::with_capacity(a.cols()),
            used1: vec![false; g.inputs1()],
            used2: vec![false; g.inputs2()],
            table: Bindings::new(g.outputs()),
            nodes: 0,
            budget,
        };
        match s.assign_row() {
            Step::Found => {
                let code = Code { f1: s.f1.clone(), f2: s.f2.clone(), decoder: s.table.decoder() };
                (Answer::Feasible, Some(code), s.nodes)
            }
            Step::Exhausted => (Answer::Infeasible, None, s.nodes),
            Step::OutOfBudget => (Answer::Unknown, None, s.nodes),
        }
    }

    fn tick(&mut self) -> bool {
        self.nodes += 1;
        self.nodes <= self.budget
    }

    fn assign_row(&mut self) -> Step {
        if self.f1.len() == self.a.rows() {
            return self.assign_col();
        }
        for x1 in 0..self.g.inputs1() {
            if self.used1[x1] {
                continue;
            }
            if !self.tick() {
                return Step::OutOfBudget;
            }
            self.used1[x1] = true;
            self.f1.push(x1);
            match self.assign_row() {
                Step::Exhausted => {}
                done => return done,
            }
            self.f1.pop();
            self.used1[x1] = false;
        }
        Step::Exhausted
    }

    /// Binds column `j` to channel input `x2`; on conflict undoes partial
    /// bindings and returns false.
    fn bind_col(&mut self, j: usize, x2: usize) -> bool {
        for i in 0..self.f1.len() {
            let y = self.g.get(self.f1[i], x2);
            if !self.table.bind(y, self.a.get(i, j)) {
                for k in 0..i {
                    self.table.unbind(self.g.get(self.f1[k], x2));
                }
                return false;
            }
        }
        true
    }

    fn unbind_col(&mut self, x2: usize) {
        for i in 0..self.f1.len() {
            self.table.unbind(self.g.get(self.f1[i], x2));
        }
    }

    /// Consistent candidates for column `j`, those reusing the most existing
    /// bindings first.
    fn col_candidates(&self, j: usize) -> Vec<usize> {
        let mut scored: Vec<(usize, usize)> = Vec::new();
        let mut fresh: Vec<(usize, usize)> = Vec::with_capacity(self.f1.len());
        'cand: for x2 in 0..self.g.inputs2() {
            if self.used2[x2] {
                continue;
            }
            fresh.clear();
            let mut new_bindings = 0;
            for (i, &x1) in self.f1.iter().enumerate() {
                let y = self.g.get(x1, x2);
                let w = self.a.get(i, j);
                if self.table.count[y] > 0 {
                    if self.table.value[y] != w {
                        continue 'cand;
                    }
                } else if let Some(&(_, prev)) = fresh.iter().find(|(fy, _)| *fy == y) {
                    if prev != w {
                        continue 'cand;
                    }
                } else {
                    fresh.push((y, w));
                    new_bindings += 1;
                }
            }
            scored.push((new_bindings, x2));
        }
        scored.sort_unstable();
        scored.into_iter().map(|(_, x2)| x2).collect()
    }

    fn assign_col(&mut self) -> Step {
        let j = self.f2.len();
        if j == self.a.cols() {
            return Step::Found;
        }
        for x2 in self.col_candidates(j) {
            if !self.tick() {
                return Step::OutOfBudget;
            }
            if !self.bind_col(j, x2) {
                continue;
            }
            self.used2[x2] = true;
            self.f2.push(x2);
            match self.assign_col() {
                Step::Exhausted => {}
                done => return done,
            }
            self.f2.pop();
            self.used2[x2] = false;
            self.unbind_col(x2);
        }
        Step::Exhausted
    }
}

/// True iff the code's error probability is at most `delta`, compared
/// exactly.
pub fn check_code(a: &TargetFunction, g: &ChannelFunction, code: &Code, delta: Ratio<u64>) -> Result<bool> {
    let errors = error_count(a, g, code)?;
    Ok(Ratio::new(errors, (a.rows() * a.cols()) as u64) <= delta)
}

/// The function a code actually computes, on the encoders' ranges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApproxFunction {
    pub rows: usize,
    pub cols: usize,
    pub range: usize,
    /// `rows x cols`, row-major.
    pub entries: Vec<usize>,
    /// Message -> row index.
    pub map1: Vec<usize>,
    /// Message -> column index.
    pub map2: Vec<usize>,
    /// Row index -> channel input of encoder 1.
    pub inputs1: Vec<usize>,
    /// Column index -> channel input of encoder 2.
    pub inputs2: Vec<usize>,
    pub delta_achieved: Ratio<u64>,
}

impl ApproxFunction {
    pub fn get(&self, v1: usize, v2: usize) -> usize {
        self.entries[v1 * self.cols + v2]
    }

    /// Message pairs on which `a(u1, u2)` differs from the approximation.
    pub fn disagreements(&self, a: &TargetFunction) -> u64 {
        let mut n = 0;
        for u1 in 0..a.rows() {
            for u2 in 0..a.cols() {
                if a.get(u1, u2) != self.get(self.map1[u1], self.map2[u2]) {
                    n += 1;
                }
            }
        }
        n
    }

    /// Whether the inherited channel inputs compute this function with zero
    /// error over `g`, i.e. no output value is reached by two different
    /// function values.
    pub fn inherited_code_is_zero_error(&self, g: &ChannelFunction) -> bool {
        let mut table = Bindings::new(g.outputs());
        for v1 in 0..self.rows {
            for v2 in 0..self.cols {
                if !table.bind(g.get(self.inputs1[v1], self.inputs2[v2]), self.get(v1, v2)) {
                    return false;
                }
            }
        }
        true
    }
}

/// Distinct values of `f` in order of first occurrence, and the index of
/// each message's value among them.
fn compress(f: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut values: Vec<usize> = Vec::new();
    let map = f
        .iter()
        .map(|x| match values.iter().position(|v| v == x) {
            Some(k) => k,
            None => {
                values.push(*x);
                values.len() - 1
            }
        })
        .collect();
    (values, map)
}

/// Reads off `a_δ(f1(u1), f2(u2)) = φ(g(f1(u1), f2(u2)))` on the encoder
/// ranges.
pub fn extract_delta_approximation(
    a: &TargetFunction,
    g: &ChannelFunction,
    code: &Code,
) -> Result<ApproxFunction> {
    let errors = error_count(a, g, code)?;
    let (inputs1, map1) = compress(&code.f1);
    let (inputs2, map2) = compress(&code.f2);
    let entries = inputs1
        .iter()
        .flat_map(|&x1| inputs2.iter().map(move |&x2| code.decoder[g.get(x1, x2)]))
        .collect();
    Ok(ApproxFunction {
        rows: inputs1.len(),
        cols: inputs2.len(),
        range: a.range(),
        entries,
        map1,
        map2,
        inputs1,
        inputs2,
        delta_achieved: Ratio::new(errors, (a.rows() * a.cols()) as u64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{error_probability, ChannelKind, TargetKind};

    const BUDGET: u64 = 10_000_000;

    fn target(kind: TargetKind, u: usize) -> TargetFunction {
        TargetFunction::builtin(kind, u, 0, 0).unwrap()
    }

    fn channel(kind: ChannelKind) -> ChannelFunction {
        ChannelFunction::builtin(kind, 0, 0, 0).unwrap()
    }

    fn both(a: &TargetFunction, g: &ChannelFunction) -> (FeasibilityVerdict, FeasibilityVerdict) {
        (
            zero_feasible_search(a, g, SearchOptions::pruned(BUDGET)).unwrap(),
            zero_feasible_search(a, g, SearchOptions::naive(BUDGET)).unwrap(),
        )
    }

    fn two_use_code() -> Code {
        Code { f1: vec![1, 2], f2: vec![1, 2], decoder: vec![0, 1, 1, 0] }
    }

    #[test]
    fn equality_over_or_needs_two_uses() {
        let eq = target(TargetKind::Equality, 2);
        let or = channel(ChannelKind::BooleanOr);
        let (p, n) = both(&eq, &or);
        assert_eq!((p.feasible, n.feasible), (Answer::Infeasible, Answer::Infeasible));
        let or2 = or.tensor_power(2).unwrap();
        let (p, n) = both(&eq, &or2);
        assert_eq!((p.feasible, n.feasible), (Answer::Feasible, Answer::Feasible));
        for v in [p, n] {
            let code = v.code.unwrap();
            assert_eq!(error_probability(&eq, &or2, &code).unwrap(), Ratio::from_integer(0));
        }
        assert!(check_code(&eq, &or2, &two_use_code(), Ratio::from_integer(0)).unwrap());
    }

    #[test]
    fn identity_over_adder_is_infeasible() {
        let (p, n) = both(&target(TargetKind::Identity, 2), &channel(ChannelKind::BinaryAdder));
        assert_eq!((p.feasible, n.feasible), (Answer::Infeasible, Answer::Infeasible));
    }

    #[test]
    fn greater_than_over_adder() {
        let gt = target(TargetKind::GreaterThan, 2);
        let add = channel(ChannelKind::BinaryAdder);
        let (p, n) = both(&gt, &add);
        assert_eq!((p.feasible, n.feasible), (Answer::Feasible, Answer::Feasible));
        let code = Code { f1: vec![1, 0], f2: vec![0, 1], decoder: vec![1, 0, 0] };
        assert!(check_code(&gt, &add, &code, Ratio::from_integer(0)).unwrap());
        let approx = extract_delta_approximation(&gt, &add, &code).unwrap();
        assert_eq!(approx.delta_achieved, Ratio::from_integer(0));
        assert_eq!(approx.disagreements(&gt), 0);
        assert_eq!(approx.entries, gt.entries());
        assert!(approx.inherited_code_is_zero_error(&add));
    }

    #[test]
    fn check_code_threshold() {
        let eq = target(TargetKind::Equality, 10);
        let g = channel(ChannelKind::BooleanOr);
        let constant = Code { f1: vec![0; 10], f2: vec![0; 10], decoder: vec![0, 0] };
        assert!(check_code(&eq, &g, &constant, Ratio::new(1, 5)).unwrap());
        assert!(check_code(&eq, &g, &constant, Ratio::new(1, 10)).unwrap());
        assert!(!check_code(&eq, &g, &constant, Ratio::new(1, 20)).unwrap());
    }

    #[test]
    fn approximation_examples() {
        let eq2 = target(TargetKind::Equality, 2);
        let or2 = channel(ChannelKind::BooleanOr).tensor_power(2).unwrap();
        let approx = extract_delta_approximation(&eq2, &or2, &two_use_code()).unwrap();
        assert_eq!(approx.entries, eq2.entries());
        assert_eq!(approx.delta_achieved, Ratio::from_integer(0));
        assert!(approx.inherited_code_is_zero_error(&or2));

        let eq4 = target(TargetKind::Equality, 4);
        let or = channel(ChannelKind::BooleanOr);
        let constant = Code { f1: vec![0; 4], f2: vec![0; 4], decoder: vec![0, 0] };
        let approx = extract_delta_approximation(&eq4, &or, &constant).unwrap();
        assert_eq!((approx.rows, approx.cols, approx.entries.clone()), (1, 1, vec![0]));
        assert_eq!(approx.delta_achieved, Ratio::new(1, 4));
        assert_eq!(approx.disagreements(&eq4), 4);
    }

    #[test]
    fn budget_exhaustion_is_unknown() {
        let eq = target(TargetKind::Equality, 2);
        let or = channel(ChannelKind::BooleanOr);
        for opts in [SearchOptions::pruned(3), SearchOptions::naive(3)] {
            let v = zero_feasible_search(&eq, &or, opts).unwrap();
            assert_eq!(v.feasible, Answer::Unknown);
            assert!(v.code.is_none());
        }
    }

    #[test]
    fn preconditions() {
        let eq3 = target(TargetKind::Equality, 3);
        let or = channel(ChannelKind::BooleanOr);
        assert!(matches!(
            zero_feasible_search(&eq3, &or, SearchOptions::pruned(BUDGET)),
            Err(Error::DimensionMismatch(_))
        ));
        let dup = TargetFunction::new(2, 2, 2, vec![0, 1, 0, 1]).unwrap();
        assert!(matches!(
            zero_feasible_search(&dup, &or, SearchOptions::naive(BUDGET)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn verdict_json_shape() {
        let v = FeasibilityVerdict { feasible: Answer::Unknown, code: None, nodes: 7, mode: SearchMode::Pruned };
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"{"feasible":"unknown","code":null,"nodes":7,"mode":"pruned"}"#);
        let back: FeasibilityVerdict = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
        let t = FeasibilityVerdict { feasible: Answer::Feasible, ..v };
        assert!(serde_json::to_string(&t).unwrap().starts_with(r#"{"feasible":true"#));
    }
}
