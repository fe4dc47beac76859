//! The metareasoning loop: alternate budgeted search chunks with belief
//! updates, and act as soon as continuing has no positive net expected value.
//!
//! Every iteration computes the posterior from the explored fraction,
//! evaluates NEVC for the candidate lookaheads and either acts or searches
//! one more chunk. A proof in either direction ends the loop with certainty.
//! Elapsed time is model time `closed·τ`, so traces are reproducible.

use std::fmt;
use std::time::Instant;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{posterior, BeliefError, BeliefSource, OpenPaths, Prior};
use crate::decision::{best_action, nevc_multi, DecisionError, TimeCost, UtilityModel, UtilitySpec};
use crate::exact::{biguint_to_f64, ratio, BigNum, RatioRepr};
use crate::heuristics::HeuristicFlag;
use crate::matrix::{Matrix, PathCount};
use crate::profile::Profile;
use crate::search::{SearchError, SearchState, SearchStatus};

pub const TRACE_VERSION: u32 = 1;

/// Agreement required when replaying floating-point trace fields.
pub const REPLAY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("invalid controller config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Decision(#[from] DecisionError),
    #[error(transparent)]
    Search(#[from] SearchError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Policy {
    /// Look ahead exactly one chunk.
    Myopic,
    /// Continue if any of these lookaheads (in paths) has positive NEVC.
    MultiStep(Vec<u64>),
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Myopic => f.write_str("myopic"),
            Policy::MultiStep(xs) => {
                let xs: Vec<String> = xs.iter().map(u64::to_string).collect();
                write!(f, "multistep:{}", xs.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BeliefConfig {
    Empirical(Box<Profile>),
    Analytic { prior: Prior, open: OpenPaths },
}

impl BeliefConfig {
    pub fn prior(&self) -> Prior {
        match self {
            BeliefConfig::Empirical(profile) => profile.prior(),
            BeliefConfig::Analytic { prior, .. } => *prior,
        }
    }

    pub fn source(&self) -> BeliefSource {
        match self {
            BeliefConfig::Empirical(profile) => BeliefSource::Empirical(profile.curve().clone()),
            BeliefConfig::Analytic { open, .. } => BeliefSource::Analytic(open.clone()),
        }
    }

    /// Stable description used to detect replays under other parameters.
    pub fn describe(&self) -> String {
        match self {
            BeliefConfig::Empirical(profile) => {
                let mut text = String::new();
                for (s, v) in profile.curve().steps() {
                    text.push_str(&format!("{s}:{v};"));
                }
                format!(
                    "empirical prior={} curve={:016x}",
                    profile.prior_exact(),
                    fnv1a(text.as_bytes())
                )
            }
            BeliefConfig::Analytic { prior, open } => {
                let support: Vec<String> = open.support().iter().map(|(o, p)| format!("{o}:{p}")).collect();
                format!("analytic prior={} open={}", prior.value(), support.join(","))
            }
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    /// Paths searched per deliberation step.
    pub chunk: u64,
    pub policy: Policy,
    pub belief: BeliefConfig,
    pub utilities: UtilityModel,
    pub cost: TimeCost,
    pub heuristic: HeuristicFlag,
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        if self.chunk == 0 {
            return Err(ControllerError::InvalidConfig("chunk must be at least 1".into()));
        }
        if let Policy::MultiStep(xs) = &self.policy {
            if xs.is_empty() || xs.contains(&0) {
                return Err(ControllerError::InvalidConfig(
                    "lookaheads must be nonempty and at least 1".into(),
                ));
            }
        }
        if let BeliefConfig::Analytic { open, .. } = &self.belief {
            open.validate()?;
        }
        Ok(())
    }

    fn utility_spec(&self) -> String {
        UtilitySpec {
            utilities: self.utilities.clone(),
            cost: self.cost.clone(),
        }
        .to_string()
    }

    /// Lookaheads to evaluate with `remaining` unexplored paths.
    fn candidates(&self, remaining: &PathCount) -> Vec<u64> {
        let cap = remaining.to_u64().unwrap_or(u64::MAX);
        match &self.policy {
            Policy::Myopic => vec![self.chunk.min(cap)],
            Policy::MultiStep(xs) => xs.iter().map(|x| (*x).min(cap)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    NonpositiveEvc,
    ProofOfNotW,
    ProofOfW,
    DeadlineForced,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::NonpositiveEvc => "nonpositive_evc",
            StopReason::ProofOfNotW => "proof_of_not_w",
            StopReason::ProofOfW => "proof_of_w",
            StopReason::DeadlineForced => "deadline_forced",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub version: u32,
    pub utilities: String,
    pub chunk: u64,
    pub policy: String,
    pub belief: String,
    pub heuristic: HeuristicFlag,
    pub total: BigNum,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    /// Closed over total paths, unreduced.
    pub fraction: RatioRepr,
    pub posterior: f64,
    pub lookahead: Vec<u64>,
    pub nevc: Vec<f64>,
    pub t: f64,
    /// Advisory wall-clock microseconds since the run started.
    #[serde(default)]
    pub wall_us: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFinal {
    pub stop_reason: StopReason,
    pub action: String,
    pub eu: f64,
    pub fraction: RatioRepr,
    pub posterior: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTrace {
    pub header: TraceHeader,
    pub steps: Vec<TraceStep>,
    pub outcome: TraceFinal,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TraceLine {
    Header(TraceHeader),
    Step(TraceStep),
    Final(TraceFinal),
}

impl DecisionTrace {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let lines = std::iter::once(TraceLine::Header(self.header.clone()))
            .chain(self.steps.iter().cloned().map(TraceLine::Step))
            .chain(std::iter::once(TraceLine::Final(self.outcome.clone())));
        for line in lines {
            out.push_str(&serde_json::to_string(&line).expect("trace serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, ReplayError> {
        let mut header = None;
        let mut steps = Vec::new();
        let mut outcome = None;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let parsed: TraceLine =
                serde_json::from_str(line).map_err(|e| ReplayError::Malformed(format!("line {}: {e}", i + 1)))?;
            match (parsed, &header, &outcome) {
                (TraceLine::Header(h), None, None) if steps.is_empty() => header = Some(h),
                (TraceLine::Step(s), Some(_), None) => steps.push(s),
                (TraceLine::Final(f), Some(_), None) => outcome = Some(f),
                _ => return Err(ReplayError::Malformed(format!("line {}: out of order", i + 1))),
            }
        }
        match (header, outcome) {
            (Some(header), Some(outcome)) => Ok(DecisionTrace { header, steps, outcome }),
            (None, _) => Err(ReplayError::Malformed("missing header".into())),
            (_, None) => Err(ReplayError::Malformed("missing final record".into())),
        }
    }

    /// Explored fraction at which the controller stopped.
    pub fn stop_fraction(&self) -> f64 {
        self.outcome
            .fraction
            .to_fraction()
            .map_or(f64::NAN, |f| crate::exact::to_f64(&f))
    }
}

struct Snapshot {
    posterior: f64,
    t: f64,
}

fn snapshot(
    config: &ControllerConfig,
    source: &BeliefSource,
    closed: &PathCount,
    total: &PathCount,
) -> Result<Snapshot, ControllerError> {
    let survival = source.survival(closed, total)?;
    Ok(Snapshot {
        posterior: posterior(config.belief.prior(), survival)?,
        t: biguint_to_f64(closed) * config.cost.tau,
    })
}

fn evaluate(
    config: &ControllerConfig,
    source: &BeliefSource,
    closed: &PathCount,
    total: &PathCount,
    now: &Snapshot,
) -> Result<(Vec<u64>, Vec<f64>), ControllerError> {
    let lookahead = source.lookahead(now.posterior, closed, total)?;
    let xs = config.candidates(&(total - closed));
    let values = xs
        .iter()
        .map(|&x| nevc_multi(&lookahead, &config.utilities, &config.cost, now.t, x as f64))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((xs, values))
}

fn deadline_forces(config: &ControllerConfig, now: &Snapshot, remaining: &PathCount) -> bool {
    let next = config.chunk.min(remaining.to_u64().unwrap_or(u64::MAX)) as f64;
    config
        .cost
        .deadline_at()
        .is_some_and(|d| config.cost.time_after(now.t, next) > d)
}

/// Runs the controller on one matrix.
pub fn run(matrix: &Matrix, config: &ControllerConfig) -> Result<DecisionTrace, ControllerError> {
    config.validate()?;
    let started = Instant::now();
    let warnings = match &config.belief {
        BeliefConfig::Empirical(profile) => profile.context.mismatches(matrix, config.heuristic),
        BeliefConfig::Analytic { .. } => Vec::new(),
    };
    let mut state = SearchState::new(config.heuristic.apply(matrix));
    let total = state.total().clone();
    let header = TraceHeader {
        version: TRACE_VERSION,
        utilities: config.utility_spec(),
        chunk: config.chunk,
        policy: config.policy.to_string(),
        belief: config.belief.describe(),
        heuristic: config.heuristic,
        total: BigNum(total.clone()),
        warnings,
    };
    let source = config.belief.source();
    let mut steps = Vec::new();

    let outcome = loop {
        let closed = state.closed().clone();
        let fraction = RatioRepr::from_parts(&closed, &total);
        let t_now = biguint_to_f64(&closed) * config.cost.tau;
        match state.status() {
            SearchStatus::Running => {}
            status => {
                let (reason, p) = if matches!(status, SearchStatus::Exhausted) {
                    (StopReason::ProofOfW, 1.0)
                } else {
                    (StopReason::ProofOfNotW, 0.0)
                };
                let choice = best_action(p, &config.utilities, &config.cost, t_now);
                break TraceFinal {
                    stop_reason: reason,
                    action: config.utilities.action_name(choice.action).to_string(),
                    eu: choice.expected_utility,
                    fraction,
                    posterior: p,
                    t: t_now,
                };
            }
        }

        let now = snapshot(config, &source, &closed, &total)?;
        let forced = deadline_forces(config, &now, &(&total - &closed));
        let (lookahead, nevc) = if forced {
            (Vec::new(), Vec::new())
        } else {
            evaluate(config, &source, &closed, &total, &now)?
        };
        let stop = if forced {
            Some(StopReason::DeadlineForced)
        } else if nevc.iter().all(|v| *v <= 0.0) {
            Some(StopReason::NonpositiveEvc)
        } else {
            None
        };
        steps.push(TraceStep {
            step: steps.len(),
            fraction: fraction.clone(),
            posterior: now.posterior,
            lookahead,
            nevc,
            t: now.t,
            wall_us: started.elapsed().as_micros() as u64,
        });
        if let Some(reason) = stop {
            let choice = best_action(now.posterior, &config.utilities, &config.cost, now.t);
            break TraceFinal {
                stop_reason: reason,
                action: config.utilities.action_name(choice.action).to_string(),
                eu: choice.expected_utility,
                fraction,
                posterior: now.posterior,
                t: now.t,
            };
        }
        let chunk = BigUint::from(config.chunk).min(&total - &closed);
        state.step_search(&chunk)?;
    };

    Ok(DecisionTrace { header, steps, outcome })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error("malformed trace: {0}")]
    Malformed(String),
    #[error("trace diverges at step {step}: {detail}")]
    Inconsistent { step: usize, detail: String },
    #[error("final record disagrees: {0}")]
    FinalInconsistent(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReplayReport {
    /// Every step and the final decision were reproduced.
    Verified { steps: usize },
    /// The trace was produced under different parameters; nothing was checked.
    ParameterMismatch(Vec<String>),
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= REPLAY_TOLERANCE
}

/// Recomputes posterior, NEVC and the final decision of a trace under
/// `config`.
pub fn replay(trace: &DecisionTrace, config: &ControllerConfig) -> Result<ReplayReport, ReplayError> {
    let h = &trace.header;
    let mut mismatches = Vec::new();
    let mut differ = |name: &str, recorded: String, expected: String| {
        if recorded != expected {
            mismatches.push(format!("{name}: trace has {recorded:?}, replay uses {expected:?}"));
        }
    };
    differ("version", h.version.to_string(), TRACE_VERSION.to_string());
    differ("utilities", h.utilities.clone(), config.utility_spec());
    differ("chunk", h.chunk.to_string(), config.chunk.to_string());
    differ("policy", h.policy.clone(), config.policy.to_string());
    differ("belief", h.belief.clone(), config.belief.describe());
    differ("heuristic", h.heuristic.to_string(), config.heuristic.to_string());
    if !mismatches.is_empty() {
        return Ok(ReplayReport::ParameterMismatch(mismatches));
    }

    let total = &h.total.0;
    let source = config.belief.source();
    let mut previous: Option<crate::exact::Fraction> = None;
    for (i, step) in trace.steps.iter().enumerate() {
        let fail = |detail: String| ReplayError::Inconsistent { step: i, detail };
        if step.step != i {
            return Err(fail(format!("step number {}", step.step)));
        }
        if step.fraction.den.0 != *total || step.fraction.num.0 > *total {
            return Err(fail("fraction is not closed/total".into()));
        }
        let closed = &step.fraction.num.0;
        let fraction = ratio(closed, total);
        if previous.as_ref().is_some_and(|p| *p >= fraction) {
            return Err(fail("explored fraction did not increase".into()));
        }
        previous = Some(fraction);
        let now = snapshot(config, &source, closed, total).map_err(|e| fail(e.to_string()))?;
        if !close(now.posterior, step.posterior) {
            return Err(fail(format!(
                "posterior {} recomputes to {}",
                step.posterior, now.posterior
            )));
        }
        if !close(now.t, step.t) {
            return Err(fail(format!("time {} recomputes to {}", step.t, now.t)));
        }
        let forced = deadline_forces(config, &now, &(total - closed));
        let (xs, values) = if forced {
            (Vec::new(), Vec::new())
        } else {
            evaluate(config, &source, closed, total, &now).map_err(|e| fail(e.to_string()))?
        };
        if xs != step.lookahead || values.len() != step.nevc.len() {
            return Err(fail(format!("lookaheads {:?} recompute to {:?}", step.lookahead, xs)));
        }
        if let Some((recorded, fresh)) = step.nevc.iter().zip(&values).find(|(a, b)| !close(**a, **b)) {
            return Err(fail(format!("nevc {recorded} recomputes to {fresh}")));
        }
        let stops = forced || values.iter().all(|v| *v <= 0.0);
        let last = i + 1 == trace.steps.len();
        let continues = !matches!(
            trace.outcome.stop_reason,
            StopReason::NonpositiveEvc | StopReason::DeadlineForced
        );
        if stops != (last && !continues) {
            return Err(fail(format!("stop decision {stops} contradicts the trace")));
        }
    }

    let fin = &trace.outcome;
    let bad = |detail: String| ReplayError::FinalInconsistent(detail);
    let (expected_reason_ok, p) = match fin.stop_reason {
        StopReason::ProofOfW => (true, 1.0),
        StopReason::ProofOfNotW => (true, 0.0),
        StopReason::NonpositiveEvc | StopReason::DeadlineForced => {
            let last = trace
                .steps
                .last()
                .ok_or_else(|| bad("no steps before stopping".into()))?;
            let forced = last.nevc.is_empty();
            let consistent = (fin.stop_reason == StopReason::DeadlineForced) == forced;
            (consistent && last.fraction == fin.fraction, last.posterior)
        }
    };
    if !expected_reason_ok {
        return Err(bad(format!("{:?} does not match the last step", fin.stop_reason)));
    }
    if !close(fin.posterior, p) {
        return Err(bad(format!("posterior {} should be {p}", fin.posterior)));
    }
    let t = biguint_to_f64(&fin.fraction.num.0) * config.cost.tau;
    if !close(fin.t, t) {
        return Err(bad(format!("time {} should be {t}", fin.t)));
    }
    let choice = best_action(p, &config.utilities, &config.cost, t);
    if config.utilities.action_name(choice.action) != fin.action || !close(choice.expected_utility, fin.eu) {
        return Err(bad(format!(
            "action {} ({}) should be {} ({})",
            fin.action,
            fin.eu,
            config.utilities.action_name(choice.action),
            choice.expected_utility
        )));
    }
    if let Some(last) = trace.steps.last() {
        if matches!(fin.stop_reason, StopReason::ProofOfW | StopReason::ProofOfNotW)
            && fin.fraction.num.0 < last.fraction.num.0
        {
            return Err(bad("search went backwards before the proof".into()));
        }
    }
    if total.is_zero() && !trace.steps.is_empty() {
        return Err(bad("empty path space cannot have deliberation steps".into()));
    }
    Ok(ReplayReport::Verified {
        steps: trace.steps.len(),
    })
}
