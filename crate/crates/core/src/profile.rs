//! Search profiles: the prior `p(w | ξ)` and the empirical survival curve
//! `p(S >= s | ¬w, ξ)`, measured by running the prover over a corpus.

use std::fs;
use std::path::Path;
use std::time::Instant;

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{posterior, BeliefError, ContextTag, Prior, SurvivalCurve};
use crate::exact::{ratio, ratio_u64, to_f64, Fraction, RatioRepr};
use crate::heuristics::HeuristicFlag;
use crate::matrix::Matrix;
use crate::search::{SearchState, SearchStatus};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("no instance finished within the step cap")]
    NoCompletedInstances,
    #[error("malformed profile: {0}")]
    Malformed(String),
    #[error("profile format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn malformed(message: impl Into<String>) -> ProfileError {
    ProfileError::Malformed(message.into())
}

/// Outcome of one instance run to termination.
///
/// `wall_us` is advisory and ignored by equality.
#[derive(Debug, Clone, Eq)]
pub struct InstanceRecord {
    pub id: u64,
    pub satisfiable: bool,
    /// Explored fraction when the open path was found; 1 for unsatisfiable
    /// instances.
    pub discovery: Fraction,
    pub closures: u64,
    pub wall_us: u64,
}

impl PartialEq for InstanceRecord {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.satisfiable == other.satisfiable
            && self.discovery == other.discovery
            && self.closures == other.closures
    }
}

/// Runs one instance. `None` when it needs more than `closure_cap` closures.
pub fn run_instance(
    id: u64,
    matrix: &Matrix,
    heuristic: HeuristicFlag,
    closure_cap: Option<u64>,
) -> Option<InstanceRecord> {
    let started = Instant::now();
    let mut state = SearchState::new(heuristic.apply(matrix));
    let closures = if state.status().is_terminal() {
        0
    } else {
        state.run(closure_cap).expect("running")
    };
    let wall_us = started.elapsed().as_micros() as u64;
    match state.status() {
        SearchStatus::Running => None,
        SearchStatus::OpenFound(_) => Some(InstanceRecord {
            id,
            satisfiable: true,
            discovery: ratio(state.closed(), state.total()),
            closures,
            wall_us,
        }),
        SearchStatus::Exhausted => Some(InstanceRecord {
            id,
            satisfiable: false,
            discovery: Fraction::one(),
            closures,
            wall_us,
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CollectOptions {
    /// Instances needing more closures are excluded and counted.
    pub closure_cap: Option<u64>,
    /// Worker threads; 0 uses rayon's default.
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Profile {
    pub context: ContextTag,
    pub records: Vec<InstanceRecord>,
    /// Instances dropped for exceeding the closure cap.
    pub excluded: u64,
    prior: Fraction,
    curve: SurvivalCurve,
}

impl Profile {
    pub fn from_records(
        context: ContextTag,
        mut records: Vec<InstanceRecord>,
        excluded: u64,
    ) -> Result<Self, ProfileError> {
        if records.is_empty() {
            return Err(ProfileError::NoCompletedInstances);
        }
        records.sort_by_key(|r| r.id);
        let unsat = records.iter().filter(|r| !r.satisfiable).count() as u64;
        let prior = ratio_u64(unsat, records.len() as u64);
        let discoveries: Vec<Fraction> = records
            .iter()
            .filter(|r| r.satisfiable)
            .map(|r| r.discovery.clone())
            .collect();
        let curve = SurvivalCurve::from_discoveries(&discoveries);
        Ok(Profile {
            context,
            records,
            excluded,
            prior,
            curve,
        })
    }

    /// Exact `#unsatisfiable / #completed`.
    pub fn prior_exact(&self) -> &Fraction {
        &self.prior
    }

    pub fn prior(&self) -> Prior {
        Prior::new(to_f64(&self.prior)).expect("count ratio is a probability")
    }

    pub fn curve(&self) -> &SurvivalCurve {
        &self.curve
    }

    pub fn satisfiable_count(&self) -> usize {
        self.records.iter().filter(|r| r.satisfiable).count()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ProfileError> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProfileError> {
        Profile::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String, ProfileError> {
        let file = ProfileFile {
            format_version: FORMAT_VERSION,
            context: self.context.clone(),
            prior: RatioRepr::from_fraction(&self.prior),
            excluded: self.excluded,
            records: self
                .records
                .iter()
                .map(|r| RecordFile {
                    id: r.id,
                    sat: r.satisfiable,
                    frac: RatioRepr::from_fraction(&r.discovery),
                    closures: r.closures,
                    wall_us: Some(r.wall_us),
                })
                .collect(),
            curve: Some(
                self.curve
                    .steps()
                    .iter()
                    .map(|(s, v)| CurvePoint {
                        s: RatioRepr::from_fraction(s),
                        survival: RatioRepr::from_fraction(v),
                    })
                    .collect(),
            ),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self, ProfileError> {
        let file: ProfileFile = serde_json::from_str(text)?;
        if file.format_version != FORMAT_VERSION {
            return Err(ProfileError::VersionMismatch {
                found: file.format_version,
                expected: FORMAT_VERSION,
            });
        }
        let prior = file
            .prior
            .to_fraction()
            .ok_or_else(|| malformed("prior has zero denominator"))?;
        if prior < Fraction::zero() || prior > Fraction::one() {
            return Err(malformed(format!("prior {prior} outside [0, 1]")));
        }
        let mut records = Vec::with_capacity(file.records.len());
        for r in file.records {
            let discovery = r
                .frac
                .to_fraction()
                .ok_or_else(|| malformed(format!("record {}: zero denominator", r.id)))?;
            let valid = if r.sat {
                discovery >= Fraction::zero() && discovery < Fraction::one()
            } else {
                discovery.is_one()
            };
            if !valid {
                return Err(malformed(format!(
                    "record {}: fraction {discovery} inconsistent with sat={}",
                    r.id, r.sat
                )));
            }
            records.push(InstanceRecord {
                id: r.id,
                satisfiable: r.sat,
                discovery,
                closures: r.closures,
                wall_us: r.wall_us.unwrap_or(0),
            });
        }
        let profile = Profile::from_records(file.context, records, file.excluded)?;
        if profile.prior != prior {
            return Err(malformed(format!(
                "prior {prior} disagrees with records ({})",
                profile.prior
            )));
        }
        if let Some(points) = file.curve {
            let steps = points
                .into_iter()
                .map(|p| match (p.s.to_fraction(), p.survival.to_fraction()) {
                    (Some(s), Some(v)) => Ok((s, v)),
                    _ => Err(malformed("curve point has zero denominator")),
                })
                .collect::<Result<Vec<_>, _>>()?;
            let stored = SurvivalCurve::from_steps(steps)?;
            if stored != profile.curve {
                return Err(malformed("stored curve disagrees with records"));
            }
        }
        Ok(profile)
    }
}

/// Runs every instance to termination (or the cap) and builds the profile.
/// Results are ordered by instance index whatever the completion order.
pub fn collect(
    corpus: &[Matrix],
    heuristic: HeuristicFlag,
    mut context: ContextTag,
    options: CollectOptions,
) -> Result<Profile, ProfileError> {
    if corpus.is_empty() {
        return Err(ProfileError::EmptyCorpus);
    }
    context.heuristic = heuristic;
    let run = || -> Vec<Option<InstanceRecord>> {
        corpus
            .par_iter()
            .enumerate()
            .map(|(i, m)| run_instance(i as u64, m, heuristic, options.closure_cap))
            .collect()
    };
    let outcomes = if options.jobs == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .map_err(|e| malformed(format!("thread pool: {e}")))?
            .install(run)
    };
    let excluded = outcomes.iter().filter(|o| o.is_none()).count() as u64;
    Profile::from_records(context, outcomes.into_iter().flatten().collect(), excluded)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    format_version: u32,
    context: ContextTag,
    prior: RatioRepr,
    #[serde(default)]
    excluded: u64,
    records: Vec<RecordFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    curve: Option<Vec<CurvePoint>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordFile {
    id: u64,
    sat: bool,
    frac: RatioRepr,
    closures: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    wall_us: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurvePoint {
    s: RatioRepr,
    survival: RatioRepr,
}

/// One grid row of an exported curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub s: Fraction,
    pub survival: f64,
    /// `None` when the evidence is impossible under both hypotheses.
    pub posterior: Option<f64>,
}

pub const GRID_POINTS: u64 = 101;

/// Survival and posterior on the grid `s = 0.00, 0.01, …, 1.00`.
pub fn curve_rows(profile: &Profile, prior_override: Option<Prior>) -> Vec<CurveRow> {
    let prior = prior_override.unwrap_or_else(|| profile.prior());
    (0..GRID_POINTS)
        .map(|i| {
            let s = ratio_u64(i, GRID_POINTS - 1);
            let survival = to_f64(&profile.curve.lookup(&s));
            CurveRow {
                s,
                survival,
                posterior: posterior(prior, survival).ok(),
            }
        })
        .collect()
}

fn fixed(value: Option<f64>) -> String {
    value.map_or_else(|| "nan".to_string(), |v| format!("{v:.6}"))
}

/// CSV with header `s,survival,posterior`, six decimals per field.
pub fn export_curve_csv(profile: &Profile, prior_override: Option<Prior>) -> String {
    let mut out = String::from("s,survival,posterior\n");
    for row in curve_rows(profile, prior_override) {
        out.push_str(&format!(
            "{},{},{}\n",
            fixed(Some(to_f64(&row.s))),
            fixed(Some(row.survival)),
            fixed(row.posterior)
        ));
    }
    out
}

/// Side-by-side curves for the same corpus without and with presorting.
pub fn export_paired_csv(plain: &Profile, presorted: &Profile) -> String {
    let mut out = String::from("s,survival_none,posterior_none,survival_presort,posterior_presort\n");
    for (a, b) in curve_rows(plain, None).into_iter().zip(curve_rows(presorted, None)) {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fixed(Some(to_f64(&a.s))),
            fixed(Some(a.survival)),
            fixed(a.posterior),
            fixed(Some(b.survival)),
            fixed(b.posterior)
        ));
    }
    out
}
