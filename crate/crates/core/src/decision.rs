//! Expected-utility action choice and the net expected value of continuing
//! the search (NEVC) under time-dependent utility.
//!
//! Utilities are additive in delay: `u(A, outcome, t) = base − cost(t)`,
//! except under a hard deadline where every utility collapses to the
//! configured penalty once `t > D`. Searching `j` more paths takes model time
//! `t(j) = elapsed + j·τ`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::belief::Lookahead;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecisionError {
    #[error("need at least two actions, got {0}")]
    TooFewActions(usize),
    #[error("utility for {action} is not finite")]
    NonFinite { action: String },
    #[error("no utility for action {action} under hypothesis {hypothesis}")]
    MissingUtility { action: String, hypothesis: String },
    #[error("no threshold: {0}")]
    NoThreshold(String),
    #[error("lookahead of {x} paths is outside 1..={remaining}")]
    InvalidLookahead { x: f64, remaining: f64 },
    #[error("invalid hypothesis belief: {0}")]
    InvalidBelief(String),
    #[error("invalid time cost: {0}")]
    InvalidCost(String),
    #[error("utility spec: {0}")]
    Spec(String),
}

/// Binary-hypothesis utilities: one row per action, payoffs under `w` and `¬w`.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityModel {
    actions: Vec<String>,
    if_w: Vec<f64>,
    if_not_w: Vec<f64>,
}

impl UtilityModel {
    pub fn new<S: Into<String>>(rows: impl IntoIterator<Item = (S, f64, f64)>) -> Result<Self, DecisionError> {
        let mut model = UtilityModel {
            actions: Vec::new(),
            if_w: Vec::new(),
            if_not_w: Vec::new(),
        };
        for (name, u_w, u_not_w) in rows {
            let name = name.into();
            if !u_w.is_finite() || !u_not_w.is_finite() {
                return Err(DecisionError::NonFinite { action: name });
            }
            model.actions.push(name);
            model.if_w.push(u_w);
            model.if_not_w.push(u_not_w);
        }
        if model.actions.len() < 2 {
            return Err(DecisionError::TooFewActions(model.actions.len()));
        }
        Ok(model)
    }

    /// `A1` pays 1 when `w` holds, `A2` pays 1 when it does not.
    pub fn symmetric() -> Self {
        UtilityModel::new([("A1", 1.0, 0.0), ("A2", 0.0, 1.0)]).expect("valid")
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn action_name(&self, index: usize) -> &str {
        &self.actions[index]
    }

    pub fn base(&self, action: usize, w: bool) -> f64 {
        if w {
            self.if_w[action]
        } else {
            self.if_not_w[action]
        }
    }

    /// Applies `u ↦ scale·u + shift` to every base utility.
    pub fn affine(&self, scale: f64, shift: f64) -> Self {
        UtilityModel {
            actions: self.actions.clone(),
            if_w: self.if_w.iter().map(|u| scale * u + shift).collect(),
            if_not_w: self.if_not_w.iter().map(|u| scale * u + shift).collect(),
        }
    }

    /// General table over the hypotheses `w` and `~w`.
    pub fn to_table(&self) -> UtilityTable {
        let mut table = UtilityTable::new(self.actions.clone());
        for (i, name) in self.actions.iter().enumerate() {
            table.set(name, "w", self.if_w[i]);
            table.set(name, "~w", self.if_not_w[i]);
        }
        table
    }

    fn best_base(&self, w: bool) -> f64 {
        let row = if w { &self.if_w } else { &self.if_not_w };
        row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Utilities over arbitrary mutually exclusive hypotheses.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UtilityTable {
    actions: Vec<String>,
    values: BTreeMap<(String, String), f64>,
}

impl UtilityTable {
    pub fn new(actions: Vec<String>) -> Self {
        UtilityTable {
            actions,
            values: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, action: &str, hypothesis: &str, value: f64) {
        self.values.insert((action.to_string(), hypothesis.to_string()), value);
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    fn get(&self, action: &str, hypothesis: &str) -> Result<f64, DecisionError> {
        self.values
            .get(&(action.to_string(), hypothesis.to_string()))
            .copied()
            .ok_or_else(|| DecisionError::MissingUtility {
                action: action.into(),
                hypothesis: hypothesis.into(),
            })
    }
}

/// Probabilities over mutually exclusive hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisBelief {
    entries: Vec<(String, f64)>,
}

impl HypothesisBelief {
    pub fn new<S: Into<String>>(entries: impl IntoIterator<Item = (S, f64)>) -> Result<Self, DecisionError> {
        let entries: Vec<(String, f64)> = entries.into_iter().map(|(h, p)| (h.into(), p)).collect();
        if let Some((h, p)) = entries.iter().find(|(_, p)| !(0.0..=1.0).contains(p)) {
            return Err(DecisionError::InvalidBelief(format!("p({h}) = {p}")));
        }
        let sum: f64 = entries.iter().map(|(_, p)| p).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DecisionError::InvalidBelief(format!("probabilities sum to {sum}")));
        }
        Ok(HypothesisBelief { entries })
    }

    pub fn binary(p_w: f64) -> Result<Self, DecisionError> {
        HypothesisBelief::new([("w", p_w), ("~w", 1.0 - p_w)])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CostKind {
    Zero,
    Linear {
        rate: f64,
    },
    /// Every utility becomes `penalty` once `t > deadline`.
    Deadline {
        deadline: f64,
        penalty: f64,
    },
    /// `(from_t, cost)` steps, ascending in both; cost is 0 before the first.
    Table(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeCost {
    pub kind: CostKind,
    /// Model time per searched path.
    pub tau: f64,
}

impl TimeCost {
    pub fn new(kind: CostKind, tau: f64) -> Result<Self, DecisionError> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(DecisionError::InvalidCost(format!("tau must be positive, got {tau}")));
        }
        match &kind {
            CostKind::Zero => {}
            CostKind::Linear { rate } => {
                if !(rate.is_finite() && *rate >= 0.0) {
                    return Err(DecisionError::InvalidCost(format!(
                        "rate must be nonnegative, got {rate}"
                    )));
                }
            }
            CostKind::Deadline { deadline, penalty } => {
                if !(deadline.is_finite() && *deadline >= 0.0 && penalty.is_finite()) {
                    return Err(DecisionError::InvalidCost(
                        "deadline must be finite and nonnegative".into(),
                    ));
                }
            }
            CostKind::Table(steps) => {
                let mut prev = (0.0, 0.0);
                for &(t, c) in steps {
                    if !(t.is_finite() && c.is_finite()) || t < prev.0 || c < prev.1 || (t == 0.0 && c != 0.0) {
                        return Err(DecisionError::InvalidCost(
                            "table must start at zero cost and be nondecreasing".into(),
                        ));
                    }
                    prev = (t, c);
                }
            }
        }
        Ok(TimeCost { kind, tau })
    }

    pub fn zero() -> Self {
        TimeCost {
            kind: CostKind::Zero,
            tau: 1.0,
        }
    }

    pub fn linear(rate: f64, tau: f64) -> Result<Self, DecisionError> {
        TimeCost::new(CostKind::Linear { rate }, tau)
    }

    pub fn deadline(deadline: f64, penalty: f64, tau: f64) -> Result<Self, DecisionError> {
        TimeCost::new(CostKind::Deadline { deadline, penalty }, tau)
    }

    /// Time to search `paths` more paths starting at `elapsed`.
    pub fn time_after(&self, elapsed: f64, paths: f64) -> f64 {
        elapsed + paths * self.tau
    }

    /// Additive delay cost. Zero for the deadline kind, which collapses
    /// utilities instead.
    pub fn cost(&self, t: f64) -> f64 {
        match &self.kind {
            CostKind::Zero | CostKind::Deadline { .. } => 0.0,
            CostKind::Linear { rate } => rate * t,
            CostKind::Table(steps) => steps
                .iter()
                .take_while(|(from, _)| *from <= t)
                .last()
                .map_or(0.0, |s| s.1),
        }
    }

    /// `u(A, outcome, t)` for a base utility.
    pub fn utility(&self, base: f64, t: f64) -> f64 {
        match self.kind {
            CostKind::Deadline { deadline, penalty } if t > deadline => penalty,
            _ => base - self.cost(t),
        }
    }

    pub fn deadline_at(&self) -> Option<f64> {
        match self.kind {
            CostKind::Deadline { deadline, .. } => Some(deadline),
            _ => None,
        }
    }

    /// Splits `j ∈ [1, x]` into runs on which the best `¬w` payoff after `j`
    /// paths is `alpha + beta·j`.
    fn not_w_pieces(&self, best: f64, elapsed: f64, x: f64) -> Vec<Piece> {
        let tau = self.tau;
        let mut pieces = Vec::new();
        let mut push = |a: f64, b: f64, alpha: f64, beta: f64| {
            if b >= a {
                pieces.push(Piece { a, b, alpha, beta });
            }
        };
        match &self.kind {
            CostKind::Zero => push(1.0, x, best, 0.0),
            CostKind::Linear { rate } => push(1.0, x, best - rate * elapsed, -rate * tau),
            CostKind::Deadline { deadline, penalty } => {
                // Last j with elapsed + j·τ <= deadline.
                let last_ok = if elapsed > *deadline {
                    0.0
                } else {
                    ((deadline - elapsed) / tau).floor()
                };
                let split = last_ok.clamp(0.0, x);
                push(1.0, split, best, 0.0);
                push(split + 1.0, x, *penalty, 0.0);
            }
            CostKind::Table(steps) => {
                // First j whose time reaches each step, nudged to agree with cost().
                let mut breaks: Vec<f64> = steps
                    .iter()
                    .map(|&(from, _)| {
                        let mut first = ((from - elapsed) / tau).ceil();
                        while first > 1.0 && elapsed + (first - 1.0) * tau >= from {
                            first -= 1.0;
                        }
                        while elapsed + first * tau < from {
                            first += 1.0;
                        }
                        first
                    })
                    .filter(|&first| first > 1.0 && first <= x)
                    .collect();
                breaks.sort_by(f64::total_cmp);
                breaks.dedup();
                let mut start = 1.0;
                for first in breaks.into_iter().chain(std::iter::once(x + 1.0)) {
                    push(start, first - 1.0, best - self.cost(elapsed + start * tau), 0.0);
                    start = first;
                }
            }
        }
        pieces
    }
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    alpha: f64,
    beta: f64,
}

/// Expected utility of one action over mutually exclusive
/// hypotheses at delay `t`.
pub fn expected_utility(
    table: &UtilityTable,
    action: &str,
    beliefs: &HypothesisBelief,
    cost: &TimeCost,
    t: f64,
) -> Result<f64, DecisionError> {
    beliefs
        .entries
        .iter()
        .try_fold(0.0, |acc, (h, p)| Ok(acc + p * cost.utility(table.get(action, h)?, t)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub action: usize,
    pub expected_utility: f64,
}

/// Action maximizing `p·(u(A,w,t) − u(A,¬w,t)) + u(A,¬w,t)`. Ties go to the
/// lowest index.
pub fn best_action(p_w: f64, utilities: &UtilityModel, cost: &TimeCost, t: f64) -> Choice {
    let mut best = Choice {
        action: 0,
        expected_utility: f64::NEG_INFINITY,
    };
    for a in 0..utilities.len() {
        let u_w = cost.utility(utilities.base(a, true), t);
        let u_not = cost.utility(utilities.base(a, false), t);
        let eu = p_w * (u_w - u_not) + u_not;
        if eu > best.expected_utility {
            best = Choice {
                action: a,
                expected_utility: eu,
            };
        }
    }
    best
}

/// Posterior at which the two actions have equal expected utility. Requires
/// `A1` to be better under `w` and `A2` better under `¬w`.
pub fn threshold(utilities: &UtilityModel) -> Result<f64, DecisionError> {
    if utilities.len() != 2 {
        return Err(DecisionError::NoThreshold(format!(
            "{} actions, need exactly 2",
            utilities.len()
        )));
    }
    let gain_if_not = utilities.base(1, false) - utilities.base(0, false);
    let gain_if_w = utilities.base(0, true) - utilities.base(1, true);
    if gain_if_w <= 0.0 || gain_if_not <= 0.0 {
        let dominant = if gain_if_w <= 0.0 && gain_if_not >= 0.0 || gain_if_w >= 0.0 && gain_if_not <= 0.0 {
            "one action dominates"
        } else {
            "actions are not oriented as (right-if-w, right-if-not-w)"
        };
        return Err(DecisionError::NoThreshold(dominant.into()));
    }
    Ok(gain_if_not / (gain_if_not + gain_if_w))
}

/// `U(S, j)`: value of acting on posterior `p_w` at time `t`.
pub fn u_best(p_w: f64, utilities: &UtilityModel, cost: &TimeCost, t: f64) -> f64 {
    best_action(p_w, utilities, cost, t).expected_utility
}

/// NEVC of searching exactly one more path.
pub fn nevc_one(belief: &Lookahead, utilities: &UtilityModel, cost: &TimeCost, elapsed: f64) -> f64 {
    if belief.posterior() >= 1.0 {
        return settled_value(belief, utilities, cost, elapsed, 1.0);
    }
    nevc_multi(belief, utilities, cost, elapsed, 1.0).expect("one path lookahead")
}

/// NEVC of committing to `x` more paths unless an open path turns up first.
pub fn nevc_multi(
    belief: &Lookahead,
    utilities: &UtilityModel,
    cost: &TimeCost,
    elapsed: f64,
    x: f64,
) -> Result<f64, DecisionError> {
    let p = belief.posterior();
    if p >= 1.0 && x >= 1.0 {
        return Ok(settled_value(belief, utilities, cost, elapsed, x));
    }
    if !(x >= 1.0 && x <= belief.remaining() && x.fract() == 0.0) {
        return Err(DecisionError::InvalidLookahead {
            x,
            remaining: belief.remaining(),
        });
    }
    let best_not_w = utilities.best_base(false);
    let q_x = belief.survive(x);
    // Σ_j p(H|S,j)·max_A u(A,¬w,t(j)), piece by piece.
    let mut halt_value = 0.0;
    for piece in cost.not_w_pieces(best_not_w, elapsed, x) {
        let q_before = belief.survive(piece.a - 1.0);
        let q_end = belief.survive(piece.b);
        let mass = q_before - q_end;
        let mut value = piece.alpha * mass;
        if piece.beta != 0.0 {
            // Σ_{j=a}^{b} j·(q(j−1) − q(j)) = a·q(a−1) − b·q(b) + Σ_{j=a}^{b−1} q(j)
            let first_moment = piece.a * q_before - piece.b * q_end + belief.survive_sum(piece.a, piece.b - 1.0);
            value += piece.beta * first_moment;
        }
        halt_value += value;
    }
    halt_value *= 1.0 - p;
    let halt_mass = (1.0 - p) * (1.0 - q_x);
    let t_x = cost.time_after(elapsed, x);
    let continue_value = (1.0 - halt_mass) * u_best(belief.posterior_after(x), utilities, cost, t_x);
    Ok(halt_value + continue_value - u_best(p, utilities, cost, elapsed))
}

/// With `w` already certain, more search only costs time.
fn settled_value(belief: &Lookahead, utilities: &UtilityModel, cost: &TimeCost, elapsed: f64, x: f64) -> f64 {
    let p = belief.posterior();
    u_best(p, utilities, cost, cost.time_after(elapsed, x)) - u_best(p, utilities, cost, elapsed)
}

impl fmt::Display for TimeCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            CostKind::Zero => write!(f, "cost=zero")?,
            CostKind::Linear { rate } => write!(f, "cost=linear:{rate}")?,
            CostKind::Deadline { deadline, penalty } => write!(f, "cost=deadline:{deadline}:{penalty}")?,
            CostKind::Table(steps) => {
                let body: Vec<String> = steps.iter().map(|(t, c)| format!("{t}:{c}")).collect();
                write!(f, "cost=table:{}", body.join(","))?
            }
        }
        write!(f, "; tau={}", self.tau)
    }
}

/// Parsed form of the text format
/// `actions=A1,A2; u(A1,w)=…; u(A1,~w)=…; …; cost=linear:0.01|deadline:5.0:-10|zero; tau=…`.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilitySpec {
    pub utilities: UtilityModel,
    pub cost: TimeCost,
}

impl fmt::Display for UtilitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "actions={}", self.utilities.actions.join(","))?;
        for (i, name) in self.utilities.actions.iter().enumerate() {
            write!(
                f,
                "; u({name},w)={}; u({name},~w)={}",
                self.utilities.if_w[i], self.utilities.if_not_w[i]
            )?;
        }
        write!(f, "; {}", self.cost)
    }
}

fn spec_err(message: impl Into<String>) -> DecisionError {
    DecisionError::Spec(message.into())
}

fn parse_number(text: &str, what: &str) -> Result<f64, DecisionError> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| spec_err(format!("bad {what} {text:?}")))
}

fn parse_cost(text: &str) -> Result<CostKind, DecisionError> {
    let mut parts = text.splitn(2, ':');
    let kind = parts.next().unwrap_or_default().trim();
    let rest = parts.next();
    match (kind, rest) {
        ("zero", None) => Ok(CostKind::Zero),
        ("linear", Some(rate)) => Ok(CostKind::Linear {
            rate: parse_number(rate, "rate")?,
        }),
        ("deadline", Some(rest)) => {
            let (d, pen) = rest
                .split_once(':')
                .ok_or_else(|| spec_err("deadline needs D:penalty"))?;
            Ok(CostKind::Deadline {
                deadline: parse_number(d, "deadline")?,
                penalty: parse_number(pen, "penalty")?,
            })
        }
        ("table", Some(rest)) => rest
            .split(',')
            .map(|step| {
                let (t, c) = step.split_once(':').ok_or_else(|| spec_err("table steps are t:cost"))?;
                Ok((parse_number(t, "time")?, parse_number(c, "cost")?))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(CostKind::Table),
        _ => Err(spec_err(format!("unknown cost {text:?}"))),
    }
}

impl FromStr for UtilitySpec {
    type Err = DecisionError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut actions: Option<Vec<String>> = None;
        let mut values: BTreeMap<(String, bool), f64> = BTreeMap::new();
        let mut kind = CostKind::Zero;
        let mut tau = 1.0;
        for field in text.split(';').map(str::trim).filter(|f| !f.is_empty()) {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| spec_err(format!("expected key=value in {field:?}")))?;
            let key = key.trim();
            let value = value.trim();
            if key == "actions" {
                let names: Vec<String> = value.split(',').map(|s| s.trim().to_string()).collect();
                if names.iter().any(String::is_empty) {
                    return Err(spec_err("empty action name"));
                }
                actions = Some(names);
            } else if key == "cost" {
                kind = parse_cost(value)?;
            } else if key == "tau" {
                tau = parse_number(value, "tau")?;
            } else if let Some(inner) = key.strip_prefix("u(").and_then(|k| k.strip_suffix(')')) {
                let (action, outcome) = inner
                    .split_once(',')
                    .ok_or_else(|| spec_err(format!("expected u(action,w|~w) in {key:?}")))?;
                let w = match outcome.trim() {
                    "w" => true,
                    "~w" => false,
                    other => return Err(spec_err(format!("outcome must be w or ~w, got {other:?}"))),
                };
                values.insert((action.trim().to_string(), w), parse_number(value, "utility")?);
            } else {
                return Err(spec_err(format!("unknown key {key:?}")));
            }
        }
        let actions = actions.ok_or_else(|| spec_err("missing actions="))?;
        let mut rows = Vec::with_capacity(actions.len());
        for name in &actions {
            let get = |w: bool| {
                values
                    .get(&(name.clone(), w))
                    .copied()
                    .ok_or_else(|| DecisionError::MissingUtility {
                        action: name.clone(),
                        hypothesis: if w { "w".into() } else { "~w".into() },
                    })
            };
            rows.push((name.clone(), get(true)?, get(false)?));
        }
        if let Some(((extra, _), _)) = values.iter().find(|((a, _), _)| !actions.contains(a)) {
            return Err(spec_err(format!("utility given for undeclared action {extra:?}")));
        }
        Ok(UtilitySpec {
            utilities: UtilityModel::new(rows)?,
            cost: TimeCost::new(kind, tau)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::OpenPaths;

    fn zero() -> TimeCost {
        TimeCost::zero()
    }

    #[test]
    fn expected_utility_examples() {
        let model = UtilityModel::new([("A1", 1.0, 0.0), ("A2", 0.2, 0.7)]).unwrap();
        let table = model.to_table();
        let certain = HypothesisBelief::binary(1.0).unwrap();
        assert_eq!(expected_utility(&table, "A1", &certain, &zero(), 0.0).unwrap(), 1.0);
        let b = HypothesisBelief::binary(0.68).unwrap();
        assert!((expected_utility(&table, "A1", &b, &zero(), 0.0).unwrap() - 0.68).abs() < 1e-15);
        let linear = TimeCost::linear(0.5, 1.0).unwrap();
        let at0 = expected_utility(&table, "A2", &b, &linear, 0.0).unwrap();
        let at3 = expected_utility(&table, "A2", &b, &linear, 3.0).unwrap();
        assert!((at0 - at3 - 1.5).abs() < 1e-12);
        assert!(matches!(
            expected_utility(&table, "A3", &b, &zero(), 0.0),
            Err(DecisionError::MissingUtility { .. })
        ));
    }

    #[test]
    fn three_hypotheses() {
        let mut table = UtilityTable::new(vec!["go".into(), "stay".into()]);
        for (h, go, stay) in [("w1", 4.0, 1.0), ("w2", -2.0, 1.0), ("w3", 0.0, 1.0)] {
            table.set("go", h, go);
            table.set("stay", h, stay);
        }
        let b = HypothesisBelief::new([("w1", 0.5), ("w2", 0.25), ("w3", 0.25)]).unwrap();
        assert_eq!(expected_utility(&table, "go", &b, &zero(), 0.0).unwrap(), 1.5);
        assert!(HypothesisBelief::new([("w1", 0.5), ("w2", 0.4)]).is_err());
    }

    #[test]
    fn best_action_examples() {
        let sym = UtilityModel::symmetric();
        assert_eq!(best_action(0.4, &sym, &zero(), 0.0).action, 1);
        assert_eq!(best_action(0.6, &sym, &zero(), 0.0).action, 0);
        let model = UtilityModel::new([("A1", 3.0, -1.0), ("A2", 5.0, -4.0), ("A3", 0.0, 0.0)]).unwrap();
        assert_eq!(best_action(1.0, &model, &zero(), 0.0).action, 1);
        let p_star = threshold(&sym).unwrap();
        assert_eq!(p_star, 0.5);
        let at = best_action(p_star, &sym, &zero(), 0.0);
        assert_eq!(at.action, 0);
        assert!((at.expected_utility - 0.5).abs() < 1e-12);
    }

    #[test]
    fn threshold_examples() {
        let m = UtilityModel::new([("A1", 100.0, -50.0), ("A2", 0.0, 0.0)]).unwrap();
        assert!((threshold(&m).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let dom = UtilityModel::new([("A1", 2.0, 0.0), ("A2", 2.0, 1.0)]).unwrap();
        assert!(matches!(threshold(&dom), Err(DecisionError::NoThreshold(_))));
        let three = UtilityModel::new([("A", 1.0, 0.0), ("B", 0.0, 1.0), ("C", 0.5, 0.5)]).unwrap();
        assert!(threshold(&three).is_err());
    }

    #[test]
    fn u_best_examples() {
        let sym = UtilityModel::symmetric();
        assert!((u_best(0.68, &sym, &zero(), 0.0) - 0.68).abs() < 1e-15);
        let linear = TimeCost::linear(0.01, 2.0).unwrap();
        let j = 7.0;
        let t = linear.time_after(0.0, j);
        assert!((u_best(0.68, &sym, &linear, t) - (0.68 - 0.01 * 2.0 * 7.0)).abs() < 1e-12);
        let dl = TimeCost::deadline(5.0, -10.0, 1.0).unwrap();
        assert_eq!(u_best(0.68, &sym, &dl, dl.time_after(0.0, 6.0)), -10.0);
        assert_eq!(u_best(0.68, &sym, &dl, dl.time_after(0.0, 5.0)), 0.68);
    }

    #[test]
    fn nevc_one_example() {
        let la = Lookahead::analytic(0.5, 2, &OpenPaths::Point(1)).unwrap();
        let v = nevc_one(&la, &UtilityModel::symmetric(), &zero(), 0.0);
        assert!((v - 0.25).abs() < 1e-12, "{v}");
        assert_eq!(
            nevc_multi(&la, &UtilityModel::symmetric(), &zero(), 0.0, 1.0).unwrap(),
            v
        );
    }

    #[test]
    fn settled_search_only_costs_time() {
        let la = Lookahead::analytic(1.0, 0, &OpenPaths::Point(1));
        assert!(la.is_err());
        let la = Lookahead::analytic(1.0, 5, &OpenPaths::Point(1)).unwrap();
        let linear = TimeCost::linear(0.1, 1.0).unwrap();
        assert!((nevc_one(&la, &UtilityModel::symmetric(), &linear, 0.0) + 0.1).abs() < 1e-12);
    }

    #[test]
    fn lookahead_bounds() {
        let la = Lookahead::analytic(0.5, 3, &OpenPaths::Point(1)).unwrap();
        let sym = UtilityModel::symmetric();
        assert!(nevc_multi(&la, &sym, &zero(), 0.0, 4.0).is_err());
        assert!(nevc_multi(&la, &sym, &zero(), 0.0, 0.0).is_err());
        assert!(nevc_multi(&la, &sym, &zero(), 0.0, 3.0).is_ok());
    }

    #[test]
    fn steep_cost_makes_search_worthless() {
        let la = Lookahead::analytic(0.5, 8, &OpenPaths::Point(2)).unwrap();
        let steep = TimeCost::linear(10.0, 1.0).unwrap();
        for x in 1..=8 {
            assert!(nevc_multi(&la, &UtilityModel::symmetric(), &steep, 0.0, x as f64).unwrap() < 0.0);
        }
    }

    /// Reference: explicit per-path summation of the lookahead lottery.
    fn nevc_by_summation(la: &Lookahead, u: &UtilityModel, cost: &TimeCost, elapsed: f64, x: u64) -> f64 {
        let best_not_w = (0..u.len()).map(|a| u.base(a, false)).fold(f64::NEG_INFINITY, f64::max);
        let mut halt = 0.0;
        let mut mass = 0.0;
        for j in 1..=x {
            let h = la.halting(j as f64);
            mass += h;
            halt += h * cost.utility(best_not_w, cost.time_after(elapsed, j as f64));
        }
        let t_x = cost.time_after(elapsed, x as f64);
        halt + (1.0 - mass) * u_best(la.posterior_after(x as f64), u, cost, t_x)
            - u_best(la.posterior(), u, cost, elapsed)
    }

    #[test]
    fn piecewise_sums_match_explicit_summation() {
        let u = UtilityModel::new([("A1", 3.0, -2.0), ("A2", -1.0, 1.5)]).unwrap();
        let dist = OpenPaths::distribution(vec![
            (1, crate::exact::ratio_u64(1, 3)),
            (4, crate::exact::ratio_u64(2, 3)),
        ])
        .unwrap();
        let la = Lookahead::analytic(0.45, 300, &dist).unwrap();
        let costs = [
            TimeCost::zero(),
            TimeCost::linear(0.003, 0.5).unwrap(),
            TimeCost::deadline(40.0, -3.0, 0.25).unwrap(),
            TimeCost::new(CostKind::Table(vec![(0.0, 0.0), (10.0, 0.2), (60.0, 0.9)]), 0.5).unwrap(),
        ];
        for cost in &costs {
            for elapsed in [0.0, 7.5, 55.0] {
                for x in [1u64, 2, 17, 90, 150, 300] {
                    let fast = nevc_multi(&la, &u, cost, elapsed, x as f64).unwrap();
                    let slow = nevc_by_summation(&la, &u, cost, elapsed, x);
                    assert!(
                        (fast - slow).abs() < 1e-9,
                        "{cost} elapsed {elapsed} x {x}: {fast} vs {slow}"
                    );
                }
            }
        }
    }

    #[test]
    fn utility_text_round_trip() {
        let text = "actions=A1,A2; u(A1,w)=1; u(A1,~w)=0; u(A2,w)=0; u(A2,~w)=1; cost=linear:0.01; tau=2";
        let spec: UtilitySpec = text.parse().unwrap();
        assert_eq!(spec.utilities, UtilityModel::symmetric());
        assert_eq!(spec.cost, TimeCost::linear(0.01, 2.0).unwrap());
        assert_eq!(spec.to_string().parse::<UtilitySpec>().unwrap(), spec);

        let dl: UtilitySpec = "actions=a,b; u(a,w)=2; u(a,~w)=-1; u(b,w)=0; u(b,~w)=0; cost=deadline:5.0:-10"
            .parse()
            .unwrap();
        assert_eq!(dl.cost, TimeCost::deadline(5.0, -10.0, 1.0).unwrap());
        let z: UtilitySpec = "actions=a,b;u(a,w)=1;u(a,~w)=0;u(b,w)=0;u(b,~w)=1;cost=zero"
            .parse()
            .unwrap();
        assert_eq!(z.cost, TimeCost::zero());
    }

    #[test]
    fn utility_text_errors() {
        for bad in [
            "u(A1,w)=1",
            "actions=A1,A2; u(A1,w)=1; u(A1,~w)=0; u(A2,w)=0",
            "actions=A1,A2; u(A1,w)=1; u(A1,~w)=0; u(A2,w)=0; u(A2,~w)=x",
            "actions=A1,A2; u(A1,w)=1; u(A1,~w)=0; u(A2,w)=0; u(A2,~w)=1; cost=cubic:2",
            "actions=A1,A2; u(A1,w)=1; u(A1,~w)=0; u(A2,w)=0; u(A2,~w)=1; tau=0",
            "actions=A1,A2; u(A1,w)=1; u(A1,~w)=0; u(A2,w)=0; u(A2,~w)=1; u(A3,w)=1",
            "actions=A1; u(A1,w)=1; u(A1,~w)=0",
        ] {
            assert!(bad.parse::<UtilitySpec>().is_err(), "{bad}");
        }
    }
}
