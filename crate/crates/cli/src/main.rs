//! `partial-proof`: generate matrices, prove them, build survival profiles
//! and run the deliberation controller from the shell.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 proof budget
//! spent before a verdict, 4 context mismatch under `--strict`.

use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use partial_proof::belief::{posterior, ContextTag, OpenPaths, Prior};
use partial_proof::controller::{self, BeliefConfig, ControllerConfig, DecisionTrace, Policy, ReplayReport};
use partial_proof::decision::{best_action, threshold, UtilitySpec};
use partial_proof::exact::{format_fraction, parse_fraction, to_f64};
use partial_proof::generator::{generate_corpus, GeneratorConfig};
use partial_proof::heuristics::HeuristicFlag;
use partial_proof::profile::{collect, export_curve_csv, export_paired_csv, CollectOptions, Profile};
use partial_proof::{dimacs, Matrix, PathCount, SearchState, SearchStatus};

const EXIT_OK: u8 = 0;
const EXIT_INVALID: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_STRICT: u8 = 4;

#[derive(Parser)]
#[command(
    name = "partial-proof",
    version,
    about = "Anytime matrix-method proving with decision-theoretic stopping"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded corpus of random matrices as DIMACS files.
    Gen {
        #[command(flatten)]
        spec: GenSpec,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "instance")]
        prefix: String,
    },
    /// Search one DIMACS file for an open path.
    Prove {
        file: PathBuf,
        /// Maximum number of paths to close before reporting.
        #[arg(long, value_parser = parse_paths)]
        budget: Option<PathCount>,
        #[arg(long)]
        presort: bool,
    },
    /// Run a corpus to termination and save its survival profile as JSON.
    Profile {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        presort: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate a profile on a 101-point grid as CSV.
    Curve {
        #[arg(long)]
        profile: PathBuf,
        /// Prior used for the posterior column instead of the profile's own.
        #[arg(long)]
        prior: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Choose an action for a belief state.
    Decide {
        #[arg(long)]
        utility: String,
        #[arg(long, conflicts_with_all = ["prior", "survival", "profile", "fraction"])]
        posterior: Option<f64>,
        #[arg(long, requires = "survival", conflicts_with = "profile")]
        prior: Option<f64>,
        #[arg(long, requires = "prior")]
        survival: Option<f64>,
        #[arg(long, requires = "fraction")]
        profile: Option<PathBuf>,
        /// Explored fraction, `a/b` or decimal.
        #[arg(long, requires = "profile")]
        fraction: Option<String>,
        /// Elapsed time at which the action is taken.
        #[arg(long, default_value_t = 0.0)]
        t: f64,
    },
    /// Run the deliberation controller on one file and write its trace.
    Run {
        file: PathBuf,
        #[command(flatten)]
        controller: ControllerArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Refuse to run when the profile context does not match the file.
        #[arg(long)]
        strict: bool,
    },
    /// Recompute a trace under the given parameters.
    Replay {
        trace: PathBuf,
        #[command(flatten)]
        controller: ControllerArgs,
    },
    /// Profile one corpus with and without presorting, side by side.
    CompareHeuristic {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        out: PathBuf,
        /// Directory that receives `none.json` and `presort.json`.
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GenSpec {
    #[arg(long)]
    clauses: u32,
    #[arg(long)]
    lits: u32,
    #[arg(long)]
    alphabet: u32,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    count: usize,
}

#[derive(Args)]
struct CorpusArgs {
    /// Directory of `.cnf` files, taken in natural name order.
    #[arg(long, conflicts_with_all = ["clauses", "lits", "alphabet", "seed", "count"])]
    corpus: Option<PathBuf>,
    #[arg(long, required_unless_present = "corpus")]
    clauses: Option<u32>,
    #[arg(long, required_unless_present = "corpus")]
    lits: Option<u32>,
    #[arg(long, required_unless_present = "corpus")]
    alphabet: Option<u32>,
    #[arg(long, required_unless_present = "corpus")]
    seed: Option<u64>,
    #[arg(long, required_unless_present = "corpus")]
    count: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Give up on an instance after this many closures.
    #[arg(long)]
    closure_cap: Option<u64>,
}

#[derive(Args)]
struct ControllerArgs {
    #[arg(long)]
    utility: String,
    /// Paths searched between decisions.
    #[arg(long, default_value_t = 1)]
    chunk: u64,
    /// Candidate lookaheads in paths; myopic one-chunk lookahead when absent.
    #[arg(long, value_delimiter = ',')]
    lookahead: Option<Vec<u64>>,
    #[arg(long)]
    presort: bool,
    /// Empirical belief from a saved profile.
    #[arg(long, conflicts_with_all = ["prior", "open"])]
    profile: Option<PathBuf>,
    #[arg(long, required_unless_present = "profile")]
    prior: Option<f64>,
    /// Open-path count `O`, or a distribution `O1:p1,O2:p2,…`.
    #[arg(long)]
    open: Option<String>,
}

fn parse_paths(text: &str) -> Result<PathCount, String> {
    text.parse::<PathCount>().map_err(|e| format!("not a path count: {e}"))
}

fn heuristic(presort: bool) -> HeuristicFlag {
    if presort {
        HeuristicFlag::Presort
    } else {
        HeuristicFlag::None
    }
}

fn read_matrix(path: &Path) -> Result<Matrix> {
    let file = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    dimacs::parse(BufReader::new(file)).with_context(|| format!("{}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => io::stdout().write_all(text.as_bytes()).map_err(Into::into),
    }
}

fn load_profile(path: &Path) -> Result<Profile> {
    Profile::load(path).with_context(|| format!("cannot load profile {}", path.display()))
}

fn parse_open(text: &str) -> Result<OpenPaths> {
    if !text.contains(':') {
        let open = text
            .trim()
            .parse()
            .map_err(|_| anyhow!("bad open-path count {text:?}"))?;
        return Ok(OpenPaths::Point(open));
    }
    let entries = text
        .split(',')
        .map(|entry| {
            let (o, p) = entry
                .split_once(':')
                .ok_or_else(|| anyhow!("bad distribution entry {entry:?}"))?;
            let o = o.trim().parse().map_err(|_| anyhow!("bad open-path count {o:?}"))?;
            let p = parse_fraction(p).ok_or_else(|| anyhow!("bad probability {p:?}"))?;
            Ok((o, p))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OpenPaths::distribution(entries)?)
}

impl ControllerArgs {
    fn config(&self) -> Result<ControllerConfig> {
        let spec: UtilitySpec = self.utility.parse().context("bad utility spec")?;
        let belief = match (&self.profile, self.prior) {
            (Some(path), _) => BeliefConfig::Empirical(Box::new(load_profile(path)?)),
            (None, Some(prior)) => BeliefConfig::Analytic {
                prior: Prior::new(prior)?,
                open: parse_open(self.open.as_deref().unwrap_or("1"))?,
            },
            (None, None) => bail!("either --profile or --prior is required"),
        };
        let config = ControllerConfig {
            chunk: self.chunk,
            policy: self.lookahead.clone().map_or(Policy::Myopic, Policy::MultiStep),
            belief,
            utilities: spec.utilities,
            cost: spec.cost,
            heuristic: heuristic(self.presort),
        };
        config.validate()?;
        Ok(config)
    }
}

/// Natural order: shorter names first, so `x_10` follows `x_9`.
fn cnf_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot read {}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "cnf"))
        .collect();
    files.sort_by_key(|p| {
        let name = p
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        (name.len(), name)
    });
    Ok(files)
}

impl CorpusArgs {
    fn load(&self) -> Result<(Vec<Matrix>, ContextTag)> {
        if let Some(dir) = &self.corpus {
            let matrices = cnf_files(dir)?
                .iter()
                .map(|p| read_matrix(p))
                .collect::<Result<Vec<_>>>()?;
            if matrices.is_empty() {
                bail!("no .cnf files in {}", dir.display());
            }
            let context = ContextTag {
                count: Some(matrices.len()),
                source: Some(dir.display().to_string()),
                ..ContextTag::default()
            };
            return Ok((matrices, context));
        }
        let field = |name: &str| anyhow!("--{name} is required without --corpus");
        let config = GeneratorConfig::new(
            self.clauses.ok_or_else(|| field("clauses"))?,
            self.lits.ok_or_else(|| field("lits"))?,
            self.alphabet.ok_or_else(|| field("alphabet"))?,
            self.seed.ok_or_else(|| field("seed"))?,
        );
        let count = self.count.ok_or_else(|| field("count"))?;
        Ok((
            generate_corpus(&config, count)?,
            ContextTag::generated(&config, count, HeuristicFlag::None),
        ))
    }

    fn options(&self) -> CollectOptions {
        CollectOptions {
            closure_cap: self.closure_cap,
            jobs: self.jobs,
        }
    }
}

fn summarize(profile: &Profile) {
    eprintln!(
        "{} completed, {} satisfiable, {} excluded, prior {} ({:.6})",
        profile.records.len(),
        profile.satisfiable_count(),
        profile.excluded,
        format_fraction(profile.prior_exact()),
        profile.prior().value()
    );
}

fn gen(spec: &GenSpec, out: &Path, prefix: &str) -> Result<u8> {
    let config = GeneratorConfig::new(spec.clauses, spec.lits, spec.alphabet, spec.seed);
    let corpus = generate_corpus(&config, spec.count)?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    for (i, matrix) in corpus.iter().enumerate() {
        let path = out.join(format!("{prefix}_{i:04}.cnf"));
        fs::write(&path, dimacs::to_string(matrix)).with_context(|| format!("cannot write {}", path.display()))?;
    }
    eprintln!("wrote {} files to {}", corpus.len(), out.display());
    Ok(EXIT_OK)
}

fn prove(file: &Path, budget: Option<&PathCount>, presort: bool) -> Result<u8> {
    let matrix = heuristic(presort).apply(&read_matrix(file)?);
    let mut state = SearchState::new(matrix);
    let closures = if state.status().is_terminal() {
        0
    } else {
        state.advance(budget, None, |_, _, _| {})?.closures
    };
    let fraction = if *state.total() == PathCount::default() {
        parse_fraction("1").expect("one")
    } else {
        state.fraction_explored()?
    };
    let (label, code) = match state.status() {
        SearchStatus::Exhausted => ("W_TRUE", EXIT_OK),
        SearchStatus::OpenFound(_) => ("W_FALSE", EXIT_OK),
        SearchStatus::Running => ("RUNNING", EXIT_BUDGET),
    };
    println!("status: {label}");
    println!("fraction: {} ({:.6})", format_fraction(&fraction), to_f64(&fraction));
    println!("closed: {} of {}", state.closed(), state.total());
    println!("closures: {closures}");
    if let SearchStatus::OpenFound(witness) = state.status() {
        let lits: Vec<String> = witness.iter().map(|l| l.to_dimacs().to_string()).collect();
        println!("witness: {}", lits.join(" "));
    }
    Ok(code)
}

fn decide(
    utility: &str,
    direct: Option<f64>,
    prior_survival: Option<(f64, f64)>,
    profile_fraction: Option<(&Path, &str)>,
    t: f64,
) -> Result<u8> {
    let spec: UtilitySpec = utility.parse().context("bad utility spec")?;
    let p = match (direct, prior_survival, profile_fraction) {
        (Some(p), None, None) => Prior::new(p)?.value(),
        (None, Some((prior, survival)), None) => posterior(Prior::new(prior)?, survival)?,
        (None, None, Some((path, fraction))) => {
            let profile = load_profile(path)?;
            let s = parse_fraction(fraction).ok_or_else(|| anyhow!("bad fraction {fraction:?}"))?;
            if s > parse_fraction("1").expect("one") {
                bail!("fraction {fraction} exceeds 1");
            }
            posterior(profile.prior(), to_f64(&profile.curve().lookup(&s)))?
        }
        _ => bail!("give exactly one of --posterior, --prior with --survival, or --profile with --fraction"),
    };
    let choice = best_action(p, &spec.utilities, &spec.cost, t);
    println!("posterior: {p:.6}");
    println!("action: {}", spec.utilities.action_name(choice.action));
    println!("expected_utility: {:.6}", choice.expected_utility);
    match threshold(&spec.utilities) {
        Ok(p_star) => println!("threshold: {p_star:.6}"),
        Err(e) => println!("threshold: none ({e})"),
    }
    Ok(EXIT_OK)
}

fn run(file: &Path, args: &ControllerArgs, out: Option<&Path>, strict: bool) -> Result<u8> {
    let matrix = read_matrix(file)?;
    let config = args.config()?;
    if let BeliefConfig::Empirical(profile) = &config.belief {
        let warnings = profile.context.mismatches(&matrix, config.heuristic);
        for w in &warnings {
            eprintln!("warning: {w}");
        }
        if strict && !warnings.is_empty() {
            eprintln!("error: profile context does not match {}", file.display());
            return Ok(EXIT_STRICT);
        }
    }
    let trace = controller::run(&matrix, &config)?;
    emit(out, &trace.to_jsonl())?;
    let fin = &trace.outcome;
    eprintln!(
        "{} steps, stopped ({}) at {}/{} paths, action {} with expected utility {:.6}",
        trace.steps.len(),
        fin.stop_reason,
        fin.fraction.num.0,
        fin.fraction.den.0,
        fin.action,
        fin.eu
    );
    Ok(EXIT_OK)
}

fn replay(path: &Path, args: &ControllerArgs) -> Result<u8> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let trace = DecisionTrace::from_jsonl(&text)?;
    match controller::replay(&trace, &args.config()?)? {
        ReplayReport::Verified { steps } => {
            println!("verified: {steps} steps");
            Ok(EXIT_OK)
        }
        ReplayReport::ParameterMismatch(fields) => {
            for f in &fields {
                eprintln!("mismatch: {f}");
            }
            bail!("trace was recorded under different parameters")
        }
    }
}

fn profile(corpus: &CorpusArgs, presort: bool, out: &Path) -> Result<u8> {
    let (matrices, context) = corpus.load()?;
    let profile = collect(&matrices, heuristic(presort), context, corpus.options())?;
    profile
        .save(out)
        .with_context(|| format!("cannot write {}", out.display()))?;
    summarize(&profile);
    Ok(EXIT_OK)
}

fn compare(corpus: &CorpusArgs, out: &Path, profiles: Option<&Path>) -> Result<u8> {
    let (matrices, context) = corpus.load()?;
    let plain = collect(&matrices, HeuristicFlag::None, context.clone(), corpus.options())?;
    let sorted = collect(&matrices, HeuristicFlag::Presort, context, corpus.options())?;
    if let Some(dir) = profiles {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        plain.save(dir.join("none.json"))?;
        sorted.save(dir.join("presort.json"))?;
    }
    emit(Some(out), &export_paired_csv(&plain, &sorted))?;
    summarize(&plain);
    summarize(&sorted);
    Ok(EXIT_OK)
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Gen { spec, out, prefix } => gen(&spec, &out, &prefix),
        Command::Prove { file, budget, presort } => prove(&file, budget.as_ref(), presort),
        Command::Profile { corpus, presort, out } => profile(&corpus, presort, &out),
        Command::Curve { profile, prior, out } => {
            let loaded = load_profile(&profile)?;
            let prior = prior.map(Prior::new).transpose()?;
            emit(out.as_deref(), &export_curve_csv(&loaded, prior))?;
            Ok(EXIT_OK)
        }
        Command::Decide {
            utility,
            posterior,
            prior,
            survival,
            profile,
            fraction,
            t,
        } => decide(
            &utility,
            posterior,
            prior.zip(survival),
            profile.as_deref().zip(fraction.as_deref()),
            t,
        ),
        Command::Run {
            file,
            controller,
            out,
            strict,
        } => run(&file, &controller, out.as_deref(), strict),
        Command::Replay { trace, controller } => replay(&trace, &controller),
        Command::CompareHeuristic { corpus, out, profiles } => compare(&corpus, &out, profiles.as_deref()),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}
