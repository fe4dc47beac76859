//! Acceptance suite. Runs with a custom harness so each criterion prints one
//! PASS/FAIL line; exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use partial_proof::belief::ContextTag;
use partial_proof::belief::{first_open_pmf, posterior, survival_analytic, BeliefError, Lookahead, OpenPaths, Prior};
use partial_proof::controller::{
    self, BeliefConfig, ControllerConfig, DecisionTrace, Policy, ReplayReport, StopReason,
};
use partial_proof::decision::{best_action, nevc_multi, nevc_one, threshold, CostKind, TimeCost, UtilityModel};
use partial_proof::exact::{ratio, ratio_u64, to_f64, Fraction};
use partial_proof::generator::{generate, generate_corpus, GeneratorConfig};
use partial_proof::heuristics::{presort, HeuristicFlag};
use partial_proof::profile::{collect, CollectOptions, Profile};
use partial_proof::{brute_force_sat, total_paths, Matrix, SearchState, SearchStatus};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * ((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64)
}

/// Two actions, `A1` right under `w` and `A2` right under `¬w`.
fn oriented_model(rng: &mut ChaCha8Rng) -> UtilityModel {
    let (a, b) = (uniform(rng, -10.0, 10.0), uniform(rng, -10.0, 10.0));
    let (c, d) = (uniform(rng, -10.0, 10.0), uniform(rng, -10.0, 10.0));
    let (w_hi, w_lo) = if a > b { (a, b) } else { (b, a) };
    let (n_hi, n_lo) = if c > d { (c, d) } else { (d, c) };
    UtilityModel::new([("A1", w_hi, n_lo), ("A2", w_lo, n_hi)]).unwrap()
}

/// Arbitrary models, including dominated actions and a third option.
fn any_model(rng: &mut ChaCha8Rng, i: usize) -> UtilityModel {
    let mut row = |name: &'static str| (name, uniform(rng, -5.0, 5.0), uniform(rng, -5.0, 5.0));
    if i % 4 == 3 {
        UtilityModel::new([row("A1"), row("A2"), row("A3")]).unwrap()
    } else {
        UtilityModel::new([row("A1"), row("A2")]).unwrap()
    }
}

/// Mixed generator configs with at most 12 symbols. Long matrices over large
/// alphabets are left out: without subsumption the search on those grows
/// far beyond the time limit.
const MIXED: [(u32, u32, u32); 10] = [
    (6, 2, 3),
    (10, 3, 4),
    (20, 3, 4),
    (15, 3, 5),
    (25, 3, 6),
    (24, 3, 8),
    (12, 4, 6),
    (20, 2, 5),
    (24, 3, 12),
    (18, 2, 12),
];

fn mixed_corpus(seed: u64, count: usize) -> Vec<Matrix> {
    (0..count)
        .map(|i| {
            let (n, m, a) = MIXED[i % MIXED.len()];
            generate(&GeneratorConfig::new(n, m, a, seed.wrapping_add(i as u64))).unwrap()
        })
        .collect()
}

fn terminal(matrix: &Matrix) -> (SearchStatus, BigUint) {
    let mut state = SearchState::new(matrix.clone());
    if state.status().is_terminal() {
        return (state.status().clone(), BigUint::zero());
    }
    let mut pruned = BigUint::zero();
    state.advance(None, None, |_, p, _| pruned += p).unwrap();
    (state.status().clone(), pruned)
}

struct Oracle1 {
    unsat: Vec<(BigUint, BigUint)>,
}

fn criterion_1(store: &mut Oracle1) -> Outcome {
    let started = Instant::now();
    let corpus = mixed_corpus(0x5EED_0001, 500);
    let mut agree = 0;
    for m in &corpus {
        let truth = brute_force_sat(m).map_err(|e| e.to_string())?;
        let (status, pruned) = terminal(m);
        let found = match status {
            SearchStatus::OpenFound(_) => true,
            SearchStatus::Exhausted => {
                store.unsat.push((pruned, total_paths(m)));
                false
            }
            SearchStatus::Running => return Err("search stopped without a verdict".into()),
        };
        agree += usize::from(found == truth);
    }
    let elapsed = started.elapsed();
    check(
        agree == 500 && elapsed < Duration::from_secs(60),
        format!(
            "{agree}/500 agree with truth tables ({} unsatisfiable) in {:.1}s",
            store.unsat.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let prior = Prior::new(0.3).unwrap();
    let a = posterior(prior, 0.2).map_err(|e| e.to_string())?;
    let b = posterior(prior, 0.08).map_err(|e| e.to_string())?;
    check(
        (a - 0.681818).abs() <= 1e-4 && (b - 0.842697).abs() <= 1e-4,
        format!("posterior(0.3, 0.2) = {a:.6}, posterior(0.3, 0.08) = {b:.6}"),
    )
}

/// `C(n, k)` counted as subsets: Pascal's rule, no factorials.
fn pascal(limit: usize) -> Vec<Vec<BigUint>> {
    let mut rows: Vec<Vec<BigUint>> = vec![vec![BigUint::one()]];
    for n in 1..=limit {
        let prev = &rows[n - 1];
        let row = (0..=n)
            .map(|k| {
                let left = if k > 0 { prev[k - 1].clone() } else { BigUint::zero() };
                let right = prev.get(k).cloned().unwrap_or_default();
                left + right
            })
            .collect();
        rows.push(row);
    }
    rows
}

fn criterion_3() -> Outcome {
    let c = pascal(30);
    let mut checked = 0;
    for m in 1..=30usize {
        for (o, whole) in c[m].iter().enumerate().skip(1) {
            for k in 0..=(m - o) {
                let got =
                    survival_analytic(&BigUint::from(m), o as u64, &BigUint::from(k)).map_err(|e| e.to_string())?;
                if got != ratio(&c[m - k][o], whole) {
                    return Err(format!("survival mismatch at M={m}, O={o}, k={k}"));
                }
                checked += 1;
            }
        }
    }
    let mut sums = 0;
    for l in 1..=20u64 {
        for o in 1..=l {
            let mut total = Fraction::zero();
            for j in 1..=(l - o + 1) {
                total += first_open_pmf(l, o, j).map_err(|e| e.to_string())?;
            }
            if total != ratio_u64(1, 1) {
                return Err(format!("pmf sums to {total} at l={l}, O={o}"));
            }
            if !matches!(first_open_pmf(l, o, l - o + 2), Err(BeliefError::BeyondSupport { .. })) {
                return Err(format!("pmf accepts j beyond support at l={l}, O={o}"));
            }
            sums += 1;
        }
    }
    Ok(format!(
        "{checked} survival ratios exact, {sums} first-open pmfs sum to 1"
    ))
}

fn criterion_4(store: &Oracle1) -> Outcome {
    let conserved = store.unsat.iter().filter(|(pruned, total)| pruned == total).count();
    check(
        conserved == store.unsat.len() && !store.unsat.is_empty(),
        format!(
            "{conserved}/{} unsatisfiable instances prune exactly their path count",
            store.unsat.len()
        ),
    )
}

fn criterion_5() -> Outcome {
    let started = Instant::now();
    let config = GeneratorConfig::new(20, 3, 4, 2024);
    let corpus = generate_corpus(&config, 300).map_err(|e| e.to_string())?;
    let context = ContextTag::generated(&config, 300, HeuristicFlag::None);
    let profile =
        collect(&corpus, HeuristicFlag::None, context, CollectOptions::default()).map_err(|e| e.to_string())?;
    let prior = profile.prior().value();
    let grid: Vec<f64> = (0..=100)
        .map(|i| to_f64(&profile.curve().lookup(&ratio_u64(i, 100))))
        .collect();
    let nonincreasing = grid.windows(2).all(|w| w[1] <= w[0]);
    let elapsed = started.elapsed();
    check(
        (0.20..=0.45).contains(&prior)
            && nonincreasing
            && grid[0] == 1.0
            && grid[100] == 0.0
            && elapsed < Duration::from_secs(600),
        format!(
            "prior {prior:.4} over {} instances, survival {:.3} → {:.3} nonincreasing={nonincreasing}, {:.1}s",
            profile.records.len(),
            grid[0],
            grid[100],
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = rng(6);
    let zero = TimeCost::zero();
    let (mut agree, mut total) = (0, 0);
    for _ in 0..1000 {
        let model = oriented_model(&mut rng);
        let p_star = threshold(&model).map_err(|e| e.to_string())?;
        for i in 0..=20 {
            let p = i as f64 / 20.0;
            let chosen = best_action(p, &model, &zero, 0.0).action;
            let expected = if p > p_star { 0 } else { 1 };
            total += 1;
            // At the threshold both actions are optimal.
            if chosen == expected || (p - p_star).abs() < 1e-12 {
                agree += 1;
            }
        }
    }
    check(
        agree == total,
        format!("{agree}/{total} argmax choices agree with the threshold rule"),
    )
}

/// Value of acting now on `p`, with the oracle's own time-cost rules.
fn oracle_u(model: &UtilityModel, kind: &CostKind, p: f64, t: f64) -> f64 {
    let adjust = |base: f64| match kind {
        CostKind::Zero => base,
        CostKind::Linear { rate } => base - rate * t,
        CostKind::Deadline { deadline, penalty } => {
            if t > *deadline {
                *penalty
            } else {
                base
            }
        }
        CostKind::Table(_) => unreachable!("not exercised"),
    };
    (0..model.len())
        .map(|a| p * adjust(model.base(a, true)) + (1.0 - p) * adjust(model.base(a, false)))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// NEVC of `x` more paths by enumerating every placement of `o` open paths
/// among `l`.
fn enumeration_oracle(model: &UtilityModel, cost: &TimeCost, p: f64, l: u32, o: u32, x: u32, t0: f64) -> f64 {
    let t = |j: u32| t0 + f64::from(j) * cost.tau;
    let placements: Vec<u32> = (0u32..(1 << l)).filter(|mask| mask.count_ones() == o).collect();
    let first_open = |mask: u32| mask.trailing_zeros() + 1;
    let misses = placements.iter().filter(|&&mask| first_open(mask) > x).count() as f64 / placements.len() as f64;
    let post_x = p / (p + (1.0 - p) * misses);
    let continued = oracle_u(model, &cost.kind, post_x, t(x));
    let under_not_w: f64 = placements
        .iter()
        .map(|&mask| {
            let j = first_open(mask);
            if j <= x {
                oracle_u(model, &cost.kind, 0.0, t(j))
            } else {
                continued
            }
        })
        .sum::<f64>()
        / placements.len() as f64;
    p * continued + (1.0 - p) * under_not_w - oracle_u(model, &cost.kind, p, t0)
}

fn criterion_7() -> Outcome {
    let mut rng = rng(7);
    let models: Vec<UtilityModel> = (0..20).map(|i| any_model(&mut rng, i)).collect();
    let zero = TimeCost::zero();
    let mut worst = f64::INFINITY;
    for prior in (1..=9).map(|i| i as f64 / 10.0) {
        for model in &models {
            for l in 2..=10u64 {
                for o in 1..=l {
                    let belief = Lookahead::analytic(prior, l, &OpenPaths::Point(o)).map_err(|e| e.to_string())?;
                    worst = worst.min(nevc_one(&belief, model, &zero, 0.0));
                }
            }
        }
    }
    if worst < -1e-12 {
        return Err(format!("nevc_one reaches {worst:e}"));
    }

    let costs = [
        TimeCost::zero(),
        TimeCost::linear(0.05, 0.5).unwrap(),
        TimeCost::deadline(1.6, -4.0, 0.5).unwrap(),
        TimeCost::linear(1.0, 1.0).unwrap(),
    ];
    let mut max_err: f64 = 0.0;
    let mut cases = 0;
    for prior in [0.1, 0.35, 0.5, 0.8, 0.95] {
        for model in &models {
            for cost in &costs {
                for l in 1..=5u32 {
                    for o in 1..=l {
                        let belief = Lookahead::analytic(prior, l.into(), &OpenPaths::Point(o.into()))
                            .map_err(|e| e.to_string())?;
                        for x in 1..=l {
                            let got =
                                nevc_multi(&belief, model, cost, 0.25, f64::from(x)).map_err(|e| e.to_string())?;
                            max_err = max_err.max((got - enumeration_oracle(model, cost, prior, l, o, x, 0.25)).abs());
                            cases += 1;
                        }
                    }
                }
            }
        }
    }
    check(
        max_err <= 1e-9,
        format!(
            "min nevc_one {worst:.2e}; nevc_multi vs placement enumeration: {cases} cases, max error {max_err:.1e}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let config = GeneratorConfig::new(16, 3, 5, 808);
    let corpus = generate_corpus(&config, 150).map_err(|e| e.to_string())?;
    let context = ContextTag::generated(&config, 150, HeuristicFlag::None);
    let profile =
        collect(&corpus, HeuristicFlag::None, context, CollectOptions::default()).map_err(|e| e.to_string())?;
    let instance = (0..)
        .map(|i| generate(&config.with_seed(9000 + i)).unwrap())
        .find(|m| !brute_force_sat(m).unwrap())
        .expect("an unsatisfiable instance");
    let total = total_paths(&instance).to_string().parse::<f64>().unwrap();
    let chunk = (total / 40.0).ceil() as u64;
    let base = |cost: TimeCost| ControllerConfig {
        chunk,
        policy: Policy::MultiStep(vec![chunk, total as u64]),
        belief: BeliefConfig::Empirical(Box::new(profile.clone())),
        utilities: UtilityModel::symmetric(),
        cost,
        heuristic: HeuristicFlag::None,
    };
    let mut fractions = Vec::new();
    for rate in [0.0, 0.01, 0.1, 1.0] {
        let trace = controller::run(&instance, &base(TimeCost::linear(rate, 1.0 / total).unwrap()))
            .map_err(|e| e.to_string())?;
        fractions.push(trace.stop_fraction());
    }
    let monotone = fractions.windows(2).all(|w| w[1] <= w[0]);
    let forced = controller::run(&instance, &base(TimeCost::deadline(0.0, -1.0, 1.0 / total).unwrap()))
        .map_err(|e| e.to_string())?;
    let one_step = forced.steps.len() == 1 && forced.outcome.stop_reason == StopReason::DeadlineForced;
    let shown: Vec<String> = fractions.iter().map(|f| format!("{f:.3}")).collect();
    check(
        monotone && one_step,
        format!(
            "stop fractions for rates 0, 0.01, 0.1, 1: [{}]; deadline 0 gives {} step(s)",
            shown.join(", "),
            forced.steps.len()
        ),
    )
}

fn criterion_9() -> Outcome {
    let corpus = mixed_corpus(0x5EED_0009, 500);
    let (mut same, mut idempotent) = (0, 0);
    for m in &corpus {
        let sorted = presort(m);
        idempotent += usize::from(presort(&sorted) == sorted);
        let verdict = |s: SearchStatus| matches!(s, SearchStatus::OpenFound(_));
        same += usize::from(verdict(terminal(m).0) == verdict(terminal(&sorted).0));
    }
    check(
        same == 500 && idempotent == 500,
        format!("verdict unchanged on {same}/500, idempotent on {idempotent}/500"),
    )
}

fn criterion_10() -> Outcome {
    let config = GeneratorConfig::new(14, 3, 5, 1010);
    let corpus = generate_corpus(&config, 80).map_err(|e| e.to_string())?;
    let context = ContextTag::generated(&config, 80, HeuristicFlag::None);
    let profile =
        collect(&corpus, HeuristicFlag::None, context, CollectOptions::default()).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("profile.json");
    profile.save(&path).map_err(|e| e.to_string())?;
    let loaded = Profile::load(&path).map_err(|e| e.to_string())?;
    if loaded != profile {
        return Err("profile changed across save and load".into());
    }

    let mut verified = 0;
    let mut steps = 0;
    for i in 0..20u64 {
        let matrix = generate(&config.with_seed(5000 + i)).unwrap();
        let total = total_paths(&matrix).to_string().parse::<f64>().unwrap();
        let cost = match i % 4 {
            0 => TimeCost::zero(),
            1 => TimeCost::linear(0.05, 1.0 / total).unwrap(),
            2 => TimeCost::deadline(0.5, -2.0, 1.0 / total).unwrap(),
            _ => TimeCost::linear(0.002, 1.0 / total).unwrap(),
        };
        let belief = if i % 2 == 0 {
            BeliefConfig::Empirical(Box::new(loaded.clone()))
        } else {
            BeliefConfig::Analytic {
                prior: Prior::new(0.3).unwrap(),
                open: OpenPaths::Point(1 + i % 3),
            }
        };
        let chunk = (total / (10.0 + i as f64)).ceil() as u64;
        let run_config = ControllerConfig {
            chunk,
            policy: if i % 3 == 0 {
                Policy::Myopic
            } else {
                Policy::MultiStep(vec![chunk, 4 * chunk, total as u64])
            },
            belief,
            utilities: UtilityModel::new([("A1", 1.0 + i as f64 / 10.0, 0.0), ("A2", 0.0, 1.0)]).unwrap(),
            cost,
            heuristic: if i % 5 == 0 {
                HeuristicFlag::Presort
            } else {
                HeuristicFlag::None
            },
        };
        let trace = controller::run(&matrix, &run_config).map_err(|e| e.to_string())?;
        let reread = DecisionTrace::from_jsonl(&trace.to_jsonl()).map_err(|e| e.to_string())?;
        match controller::replay(&reread, &run_config) {
            Ok(ReplayReport::Verified { steps: n }) => {
                verified += 1;
                steps += n;
            }
            other => return Err(format!("run {i}: {other:?}")),
        }
    }
    check(
        verified == 20,
        format!("profile save/load identical; {verified}/20 traces replayed ({steps} steps, 0 inconsistencies)"),
    )
}

fn report(index: usize, name: &str, outcome: Outcome) -> bool {
    let (label, detail, ok) = match outcome {
        Ok(d) => ("PASS", d, true),
        Err(d) => ("FAIL", d, false),
    };
    println!("[{label}] criterion {index:>2} {name}: {detail}");
    ok
}

fn main() -> ExitCode {
    let mut oracle = Oracle1 { unsat: Vec::new() };
    let results = [
        report(1, "oracle equivalence", criterion_1(&mut oracle)),
        report(2, "worked posteriors", criterion_2()),
        report(3, "combinatorial identities", criterion_3()),
        report(4, "closure conservation", criterion_4(&oracle)),
        report(5, "full-scale profile", criterion_5()),
        report(6, "threshold equivalence", criterion_6()),
        report(7, "value of information", criterion_7()),
        report(8, "controller monotonicity", criterion_8()),
        report(9, "presort safety", criterion_9()),
        report(10, "round trips", criterion_10()),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
