//! Belief in the truth of `w` (the claim that the matrix is unsatisfiable)
//! from partial search.
//!
//! Search that has covered fraction `s` of the path space without finding an
//! open path is evidence for `w`. Given `w` the evidence has likelihood 1
//! below `s = 1`, so the posterior only needs the prior and the survival
//! probability `p(S >= s | ¬w)`. Survival comes either from an empirical
//! curve ([`SurvivalCurve`]) or from the analytic model in which `O` open
//! paths sit uniformly among the `M` complete paths ([`OpenPaths`]).

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{biguint_to_f64, ratio, ratio_u64, to_f64, Fraction};
use crate::generator::GeneratorConfig;
use crate::heuristics::HeuristicFlag;
use crate::matrix::{Matrix, PathCount};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeliefError {
    #[error("{name} = {value} is not a probability")]
    NotAProbability { name: &'static str, value: f64 },
    #[error("evidence has zero probability under both hypotheses")]
    DegenerateEvidence,
    #[error("open-path count {open} exceeds the {total} available paths")]
    OpenExceedsTotal { open: u64, total: String },
    #[error("open-path count must be at least 1")]
    ZeroOpen,
    #[error("path {j} is past the last possible first-open position {last}")]
    BeyondSupport { j: u64, last: u64 },
    #[error("invalid open-path distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid survival curve: {0}")]
    InvalidCurve(String),
}

fn check_probability(name: &'static str, value: f64) -> Result<f64, BeliefError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(BeliefError::NotAProbability { name, value })
    }
}

/// Prior probability that `w` is true.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Prior(f64);

impl Prior {
    pub fn new(p_w: f64) -> Result<Self, BeliefError> {
        check_probability("prior", p_w).map(Prior)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Prior {
    type Error = BeliefError;
    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Prior::new(value)
    }
}

impl From<Prior> for f64 {
    fn from(p: Prior) -> f64 {
        p.0
    }
}

/// Bayes' rule for a binary hypothesis.
pub fn posterior_general(prior: Prior, lik_true: f64, lik_false: f64) -> Result<f64, BeliefError> {
    check_probability("lik_true", lik_true)?;
    check_probability("lik_false", lik_false)?;
    let p = prior.value();
    let joint_true = lik_true * p;
    let denominator = joint_true + lik_false * (1.0 - p);
    if denominator <= 0.0 {
        return Err(BeliefError::DegenerateEvidence);
    }
    Ok(joint_true / denominator)
}

/// `p(w | S)` when the evidence is certain under `w`: `p / (p + surv·(1 − p))`.
pub fn posterior(prior: Prior, survival: f64) -> Result<f64, BeliefError> {
    check_probability("survival", survival)?;
    let p = prior.value();
    let denominator = p + survival * (1.0 - p);
    if denominator <= 0.0 {
        return Err(BeliefError::DegenerateEvidence);
    }
    Ok(p / denominator)
}

/// Exact counterpart of [`posterior`].
pub fn posterior_exact(prior: &Fraction, survival: &Fraction) -> Result<Fraction, BeliefError> {
    let one = Fraction::one();
    for (name, v) in [("prior", prior), ("survival", survival)] {
        if *v < Fraction::zero() || *v > one {
            return Err(BeliefError::NotAProbability { name, value: to_f64(v) });
        }
    }
    let denominator = prior + survival * (&one - prior);
    if denominator.is_zero() {
        return Err(BeliefError::DegenerateEvidence);
    }
    Ok(prior / denominator)
}

/// Probability that `searched` paths drawn without replacement from `total`
/// miss all `open` open paths: `C(total − searched, open) / C(total, open)`.
/// Zero once `searched > total − open`.
pub fn survival_analytic(total: &PathCount, open: u64, searched: &PathCount) -> Result<Fraction, BeliefError> {
    if open == 0 {
        return Err(BeliefError::ZeroOpen);
    }
    let o = BigUint::from(open);
    if o > *total {
        return Err(BeliefError::OpenExceedsTotal {
            open,
            total: total.to_string(),
        });
    }
    if *searched > total - &o {
        return Ok(Fraction::zero());
    }
    // Either product form gives the same ratio; iterate over the shorter one.
    //   Π_{i<open}     (total − searched − i) / (total − i)
    //   Π_{i<searched} (total − open − i)     / (total − i)
    let (terms, shift) = if o <= *searched {
        (o.clone(), searched.clone())
    } else {
        (searched.clone(), o)
    };
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    let mut i = BigUint::zero();
    while i < terms {
        let remaining = total - &i;
        num *= &remaining - &shift;
        den *= remaining;
        i += 1u32;
    }
    Ok(ratio(&num, &den))
}

/// Probability that, with `open` open paths uniformly placed among `remaining`
/// unexplored paths, the `j`-th newly searched path is the first open one.
pub fn first_open_pmf(remaining: u64, open: u64, j: u64) -> Result<Fraction, BeliefError> {
    if open == 0 {
        return Err(BeliefError::ZeroOpen);
    }
    if open > remaining {
        return Err(BeliefError::OpenExceedsTotal {
            open,
            total: remaining.to_string(),
        });
    }
    let last = remaining - open + 1;
    if j == 0 || j > last {
        return Err(BeliefError::BeyondSupport { j, last });
    }
    let miss_before = survival_analytic(&BigUint::from(remaining), open, &BigUint::from(j - 1))?;
    Ok(miss_before * ratio_u64(open, remaining - (j - 1)))
}

/// Probability of halting on the `j`-th new path. Halting requires `¬w`, so
/// this is the first-open probability scaled by `p(¬w | S)`.
pub fn halting_prob(posterior_not_w: f64, remaining: u64, open: u64, j: u64) -> Result<f64, BeliefError> {
    check_probability("posterior_not_w", posterior_not_w)?;
    Ok(to_f64(&first_open_pmf(remaining, open, j)?) * posterior_not_w)
}

/// Belief about the number of open paths given `¬w`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OpenPaths {
    Point(u64),
    /// `(count, probability)` pairs; probabilities sum to exactly 1.
    Distribution(Vec<(u64, Fraction)>),
}

impl OpenPaths {
    pub fn distribution(entries: Vec<(u64, Fraction)>) -> Result<Self, BeliefError> {
        let dist = OpenPaths::Distribution(entries);
        dist.validate()?;
        Ok(dist)
    }

    pub fn validate(&self) -> Result<(), BeliefError> {
        match self {
            OpenPaths::Point(0) => Err(BeliefError::ZeroOpen),
            OpenPaths::Point(_) => Ok(()),
            OpenPaths::Distribution(entries) => {
                if entries.is_empty() {
                    return Err(BeliefError::InvalidDistribution("no support".into()));
                }
                let mut sum = Fraction::zero();
                for (o, p) in entries {
                    if *o == 0 {
                        return Err(BeliefError::ZeroOpen);
                    }
                    if *p < Fraction::zero() {
                        return Err(BeliefError::InvalidDistribution(format!("negative weight on {o}")));
                    }
                    sum += p;
                }
                if !sum.is_one() {
                    return Err(BeliefError::InvalidDistribution(format!("weights sum to {sum}")));
                }
                Ok(())
            }
        }
    }

    /// `(count, probability)` view; a point mass yields a single entry.
    pub fn support(&self) -> Vec<(u64, Fraction)> {
        match self {
            OpenPaths::Point(o) => vec![(*o, Fraction::one())],
            OpenPaths::Distribution(entries) => entries.clone(),
        }
    }

    /// Largest supported count.
    pub fn max_open(&self) -> u64 {
        self.support().iter().map(|(o, _)| *o).max().unwrap_or(0)
    }
}

/// Survival averaged over a distribution of open-path counts.
pub fn survival_mixture(total: &PathCount, open: &OpenPaths, searched: &PathCount) -> Result<Fraction, BeliefError> {
    open.validate()?;
    open.support().iter().try_fold(Fraction::zero(), |acc, (o, p)| {
        Ok(acc + p * survival_analytic(total, *o, searched)?)
    })
}

/// Open-path model over a path space of known size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalyticModel {
    pub total: PathCount,
    pub open: OpenPaths,
}

impl AnalyticModel {
    pub fn new(total: PathCount, open: OpenPaths) -> Result<Self, BeliefError> {
        open.validate()?;
        if BigUint::from(open.max_open()) > total {
            return Err(BeliefError::OpenExceedsTotal {
                open: open.max_open(),
                total: total.to_string(),
            });
        }
        Ok(AnalyticModel { total, open })
    }

    pub fn survival(&self, searched: &PathCount) -> Result<Fraction, BeliefError> {
        survival_mixture(&self.total, &self.open, searched)
    }
}

/// `ln C(l − j, o) / C(l, o)` in floating point; `-inf` past the support.
pub(crate) fn ln_survival_f64(l: f64, o: f64, j: f64) -> f64 {
    if j <= 0.0 {
        return 0.0;
    }
    if j > l - o {
        return f64::NEG_INFINITY;
    }
    let terms = o.min(j);
    let shift = o.max(j);
    if terms <= 1.0e6 {
        let mut acc = 0.0;
        let mut i = 0.0;
        while i < terms {
            acc += (-shift / (l - i)).ln_1p();
            i += 1.0;
        }
        acc
    } else {
        libm::lgamma(l - j + 1.0) - libm::lgamma(l - j - o + 1.0) - libm::lgamma(l + 1.0) + libm::lgamma(l - o + 1.0)
    }
}

/// Empirical `p(S >= s | ¬w)` as a step function.
///
/// `steps` holds `(upto, value)` pairs with strictly increasing `upto`: the
/// survival is `value` of the first step with `s <= upto`, and 0 past the last
/// step. Survival at `s = 0` is always 1.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SurvivalCurve {
    steps: Vec<(Fraction, Fraction)>,
}

impl SurvivalCurve {
    pub fn from_steps(steps: Vec<(Fraction, Fraction)>) -> Result<Self, BeliefError> {
        let zero = Fraction::zero();
        let one = Fraction::one();
        for (i, (upto, value)) in steps.iter().enumerate() {
            if *upto < zero || *upto > one {
                return Err(BeliefError::InvalidCurve(format!("position {upto} outside [0, 1]")));
            }
            if *value < zero || *value > one {
                return Err(BeliefError::InvalidCurve(format!("value {value} outside [0, 1]")));
            }
            if let Some((prev_upto, prev_value)) = i.checked_sub(1).map(|p| &steps[p]) {
                if upto <= prev_upto {
                    return Err(BeliefError::InvalidCurve("positions must strictly increase".into()));
                }
                if value > prev_value {
                    return Err(BeliefError::InvalidCurve(format!("survival increases at {upto}")));
                }
            }
        }
        Ok(SurvivalCurve { steps })
    }

    /// Curve of the fraction explored at which each satisfiable instance
    /// revealed its open path: `survival(s) = #{d >= s} / #d` for `s > 0`.
    pub fn from_discoveries(discoveries: &[Fraction]) -> Self {
        let mut sorted = discoveries.to_vec();
        sorted.sort();
        let n = sorted.len() as u64;
        let mut steps: Vec<(Fraction, Fraction)> = Vec::new();
        for (i, d) in sorted.iter().enumerate() {
            if steps.last().is_some_and(|(upto, _)| upto == d) {
                continue;
            }
            steps.push((d.clone(), ratio_u64(n - i as u64, n)));
        }
        SurvivalCurve { steps }
    }

    pub fn steps(&self) -> &[(Fraction, Fraction)] {
        &self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn lookup(&self, s: &Fraction) -> Fraction {
        if *s <= Fraction::zero() {
            return Fraction::one();
        }
        self.steps
            .iter()
            .find(|(upto, _)| s <= upto)
            .map(|(_, v)| v.clone())
            .unwrap_or_else(Fraction::zero)
    }
}

pub fn survival_lookup(curve: &SurvivalCurve, s: &Fraction) -> Fraction {
    curve.lookup(s)
}

/// Where survival evidence comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum BeliefSource {
    Empirical(SurvivalCurve),
    /// Open-path distribution; the path space is the searched matrix's.
    Analytic(OpenPaths),
}

impl BeliefSource {
    /// `p(S >= searched/total | ¬w)` in floating point.
    pub fn survival(&self, searched: &PathCount, total: &PathCount) -> Result<f64, BeliefError> {
        match self {
            BeliefSource::Empirical(curve) => Ok(to_f64(&curve.lookup(&ratio(searched, total)))),
            BeliefSource::Analytic(open) => {
                open.validate()?;
                let (m, k) = (biguint_to_f64(total), biguint_to_f64(searched));
                Ok(open
                    .support()
                    .iter()
                    .map(|(o, p)| to_f64(p) * ln_survival_f64(m, *o as f64, k).exp())
                    .sum::<f64>()
                    .clamp(0.0, 1.0))
            }
        }
    }

    /// Lookahead model for the unexplored remainder after `searched` of
    /// `total` paths have been closed, with current posterior `p_w`.
    pub fn lookahead(&self, p_w: f64, searched: &PathCount, total: &PathCount) -> Result<Lookahead, BeliefError> {
        check_probability("posterior", p_w)?;
        let remaining = biguint_to_f64(&(total - searched));
        let m = biguint_to_f64(total);
        let k = biguint_to_f64(searched);
        let continuation = match self {
            BeliefSource::Analytic(open) => {
                open.validate()?;
                let mut weights: Vec<(f64, f64)> = open
                    .support()
                    .iter()
                    .map(|(o, p)| (*o as f64, to_f64(p) * ln_survival_f64(m, *o as f64, k).exp()))
                    .filter(|(_, w)| *w > 0.0)
                    .collect();
                let norm: f64 = weights.iter().map(|(_, w)| w).sum();
                weights.iter_mut().for_each(|(_, w)| *w /= norm);
                Continuation::Analytic { weights }
            }
            BeliefSource::Empirical(curve) => {
                let base = curve.lookup(&ratio(searched, total));
                let searched_big = num_bigint::BigInt::from(searched.clone());
                let total_big = num_bigint::BigInt::from(total.clone());
                let segments = if base.is_zero() {
                    Vec::new()
                } else {
                    curve
                        .steps()
                        .iter()
                        .filter_map(|(upto, value)| {
                            // Path j survives this step while j <= floor(upto·M) − k.
                            let reach =
                                (upto * Fraction::from_integer(total_big.clone())).floor().to_integer() - &searched_big;
                            (reach >= num_bigint::BigInt::one())
                                .then(|| (reach.to_f64().unwrap_or(f64::INFINITY), to_f64(&(value / &base))))
                        })
                        .collect()
                };
                Continuation::Empirical { segments }
            }
        };
        Ok(Lookahead {
            p_w,
            remaining,
            continuation,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Continuation {
    /// Conditional weights over open-path counts.
    Analytic { weights: Vec<(f64, f64)> },
    /// `(last j, conditional survival)` pieces with increasing last j.
    Empirical { segments: Vec<(f64, f64)> },
}

/// Beliefs about the next paths to be searched, given the current posterior.
///
/// `survive(j)` is `p(no open path among the next j | ¬w, S)`. Halting on
/// path `j` has probability `(1 − p_w)·(survive(j − 1) − survive(j))`, and the
/// posterior after `j` fruitless paths is `p_w / (p_w + (1 − p_w)·survive(j))`.
/// Path counts are carried as `f64`, exact up to 2^53.
#[derive(Debug, Clone, PartialEq)]
pub struct Lookahead {
    p_w: f64,
    remaining: f64,
    continuation: Continuation,
}

impl Lookahead {
    /// Analytic model on `remaining` unexplored paths with a point or mixed
    /// open-path count that is already conditioned on the search so far.
    pub fn analytic(p_w: f64, remaining: u64, open: &OpenPaths) -> Result<Self, BeliefError> {
        check_probability("posterior", p_w)?;
        open.validate()?;
        if open.max_open() > remaining {
            return Err(BeliefError::OpenExceedsTotal {
                open: open.max_open(),
                total: remaining.to_string(),
            });
        }
        let weights = open.support().iter().map(|(o, p)| (*o as f64, to_f64(p))).collect();
        Ok(Lookahead {
            p_w,
            remaining: remaining as f64,
            continuation: Continuation::Analytic { weights },
        })
    }

    pub fn posterior(&self) -> f64 {
        self.p_w
    }

    pub fn remaining(&self) -> f64 {
        self.remaining
    }

    pub fn survive(&self, j: f64) -> f64 {
        if j <= 0.0 {
            return 1.0;
        }
        match &self.continuation {
            Continuation::Analytic { weights } => {
                if weights.is_empty() {
                    return 1.0;
                }
                weights
                    .iter()
                    .map(|(o, w)| w * ln_survival_f64(self.remaining, *o, j).exp())
                    .sum()
            }
            Continuation::Empirical { segments } => {
                segments.iter().find(|(last, _)| j <= *last).map_or(0.0, |(_, v)| *v)
            }
        }
    }

    /// `Σ_{j=a}^{b} survive(j)` for integers `0 <= a <= b`.
    pub fn survive_sum(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return 0.0;
        }
        if b - a < 64.0 {
            let mut acc = 0.0;
            let mut j = a;
            while j <= b {
                acc += self.survive(j);
                j += 1.0;
            }
            return acc;
        }
        match &self.continuation {
            Continuation::Analytic { weights } => {
                if weights.is_empty() {
                    return b - a + 1.0;
                }
                // Hockey stick: Σ_{j=a}^{b} C(l−j, o) = C(l−a+1, o+1) − C(l−b, o+1),
                // and C(n+1, o+1) = (n+1)/(o+1)·C(n, o).
                let l = self.remaining;
                weights
                    .iter()
                    .map(|(o, w)| {
                        let head = (l - a + 1.0) * ln_survival_f64(l, *o, a).exp();
                        let tail = (l - b) * ln_survival_f64(l, *o, b + 1.0).exp();
                        w * (head - tail) / (o + 1.0)
                    })
                    .sum()
            }
            Continuation::Empirical { segments } => {
                let mut acc: f64 = if a <= 0.0 { 1.0 } else { 0.0 };
                let lo = a.max(1.0);
                let mut start: f64 = 1.0;
                for (last, value) in segments {
                    let from = start.max(lo);
                    let to = last.min(b);
                    if to >= from {
                        acc += (to - from + 1.0) * value;
                    }
                    start = last + 1.0;
                    if start > b {
                        break;
                    }
                }
                acc
            }
        }
    }

    /// `p(H | S, j)`.
    pub fn halting(&self, j: f64) -> f64 {
        (1.0 - self.p_w) * (self.survive(j - 1.0) - self.survive(j)).max(0.0)
    }

    /// `p(w | S, j)`: posterior after `j` more paths without an open one.
    pub fn posterior_after(&self, j: f64) -> f64 {
        let q = self.survive(j);
        let denominator = self.p_w + (1.0 - self.p_w) * q;
        if denominator <= 0.0 {
            1.0
        } else {
            self.p_w / denominator
        }
    }
}

/// Background context that a profile was measured under.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ContextTag {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_clauses: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lits_per_clause: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphabet_size: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default)]
    pub heuristic: HeuristicFlag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl ContextTag {
    pub fn generated(config: &GeneratorConfig, count: usize, heuristic: HeuristicFlag) -> Self {
        ContextTag {
            n_clauses: Some(config.n_clauses),
            lits_per_clause: Some(config.lits_per_clause),
            alphabet_size: Some(config.alphabet_size),
            seed: Some(config.seed),
            count: Some(count),
            heuristic,
            source: None,
        }
    }

    /// Differences between this context and an instance about to be judged
    /// with it. Empty when they agree.
    pub fn mismatches(&self, matrix: &Matrix, heuristic: HeuristicFlag) -> Vec<String> {
        let mut out = Vec::new();
        if self.heuristic != heuristic {
            out.push(format!(
                "profile heuristic {:?} but search uses {:?}",
                self.heuristic, heuristic
            ));
        }
        if let Some(n) = self.n_clauses {
            if n as usize != matrix.len() {
                out.push(format!(
                    "profile has {n} clauses per instance, matrix has {}",
                    matrix.len()
                ));
            }
        }
        if let Some(m) = self.lits_per_clause {
            if matrix.uniform_width() != Some(m as usize) {
                out.push(format!("profile has {m} literals per clause, matrix does not"));
            }
        }
        if let Some(a) = self.alphabet_size {
            if a != matrix.alphabet_size() {
                out.push(format!(
                    "profile alphabet {a}, matrix alphabet {}",
                    matrix.alphabet_size()
                ));
            }
        }
        out
    }
}
