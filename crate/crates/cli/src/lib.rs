//! Command-line front end: argument parsing, method routing and reports.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use negsound::data::{builtin_spec, check_spec, oracle_compliance, Compliance, DataMethod, DataReport, DataSpec, SpecKind};
use negsound::dot::{emit_dot, Overlay};
use negsound::games::{solve_omitting, GameError};
use negsound::generators::{gen_from_cnf, gen_from_digraph, gen_random, gen_structured, Cnf3, Digraph, RandomParams};
use negsound::ngt::{emit_ngt, parse_ngt, NgtDocument};
use negsound::oracle::{oracle_concurrent, oracle_omit, oracle_sound, OracleError, OracleVerdict};
use negsound::patterns::{det_soundness, DetVerdict, PatternError};
use negsound::races::{race, RaceError, RaceVerdict};
use negsound::semantics::parse_steps;
use negsound::weak::{deterministic_part, weak_soundness, WeakError};
use negsound::{classify, ClassFlags, Negotiation, NodeId, OmitInstance, DEFAULT_BUDGET};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "negsound", version, about = "Static analysis of negotiation diagrams")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// State budget for the explicit-state oracle.
    #[arg(long, global = true, default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
    /// Seed for the random generators.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Print machine-readable JSON reports.
    #[arg(long, global = true)]
    pub json: bool,
    /// Write output to a file instead of stdout.
    #[arg(short = 'o', long = "output", global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decide soundness.
    Check(CheckArgs),
    /// Print the class flags.
    Classify { file: PathBuf },
    /// Search a successful run including pairs and avoiding nodes.
    Omit(OmitArgs),
    /// Decide whether two nodes race.
    Race(RaceArgs),
    /// Check a data specification.
    Data(DataArgs),
    /// Generate a negotiation in NGT format.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Render the graph in DOT, optionally highlighting a witness.
    Dot {
        file: PathBuf,
        #[arg(long)]
        witness: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Auto,
    Patterns,
    Game,
    Weak,
    Oracle,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Auto => "auto",
            Method::Patterns => "patterns",
            Method::Game => "game",
            Method::Weak => "weak",
            Method::Oracle => "oracle",
        }
    }
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    /// Input files.
    pub files: Vec<PathBuf>,
    /// Check every file matching a glob pattern.
    #[arg(long)]
    pub glob: Option<String>,
    #[arg(long, value_enum, default_value_t = Method::Auto)]
    pub method: Method,
}

#[derive(Args, Debug)]
pub struct OmitArgs {
    pub file: PathBuf,
    /// Pairs to include, e.g. "(n0,a)(n2,b)".
    #[arg(long, default_value = "")]
    pub include: String,
    /// Comma-separated nodes to omit.
    #[arg(long, default_value = "")]
    pub omit: String,
    #[arg(long, value_enum, default_value_t = Method::Auto)]
    pub method: Method,
}

#[derive(Args, Debug)]
pub struct RaceArgs {
    pub file: PathBuf,
    pub m: String,
    pub n: String,
    #[arg(long, value_enum, default_value_t = Method::Auto)]
    pub method: Method,
}

#[derive(Args, Debug)]
pub struct DataArgs {
    pub file: PathBuf,
    /// Built-in analysis: inconsistent, weakly-redundant or never-destroyed.
    #[arg(long, requires = "var", conflicts_with = "spec")]
    pub kind: Option<String>,
    #[arg(long)]
    pub var: Option<String>,
    /// File with O1:/O2:/O: lines.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Method::Auto)]
    pub method: Method,
}

#[derive(Subcommand, Debug)]
pub enum GenKind {
    /// Gadget from a 3-CNF formula in DIMACS.
    Cnf { file: PathBuf },
    /// One-process negotiation from a whitespace edge list.
    Digraph {
        file: PathBuf,
        #[arg(long)]
        source: String,
        #[arg(long)]
        target: String,
    },
    /// Random negotiation with the requested class.
    Random {
        #[arg(long, default_value_t = 8)]
        nodes: usize,
        #[arg(long, default_value_t = 3)]
        procs: usize,
        #[arg(long, default_value_t = 2)]
        max_results: usize,
        #[arg(long)]
        cyclic: bool,
        #[arg(long)]
        nondeterministic: bool,
        #[arg(long)]
        weakly_nd: bool,
    },
    /// Large sound deterministic negotiation.
    Structured {
        #[arg(long, default_value_t = 1000)]
        nodes: usize,
        #[arg(long, default_value_t = 10)]
        procs: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Sound,
    Unsound,
    Complies,
    Violates,
    NoRace,
    Race,
    PlanFound,
    NoPlan,
    Done,
    InputError,
    Precondition,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Sound | Verdict::Complies | Verdict::NoRace | Verdict::PlanFound | Verdict::Done => EXIT_OK,
            Verdict::Unsound | Verdict::Violates | Verdict::Race | Verdict::NoPlan => EXIT_NEGATIVE,
            Verdict::InputError => EXIT_INPUT,
            Verdict::Precondition => EXIT_PRECONDITION,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Verdict::Sound => "sound",
            Verdict::Unsound => "unsound",
            Verdict::Complies => "complies",
            Verdict::Violates => "violates",
            Verdict::NoRace => "no race",
            Verdict::Race => "race",
            Verdict::PlanFound => "run found",
            Verdict::NoPlan => "no run",
            Verdict::Done => "done",
            Verdict::InputError => "input error",
            Verdict::Precondition => "precondition unmet",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub input: Option<String>,
    pub verdict: Verdict,
    pub method: Option<String>,
    pub route: Option<String>,
    pub witness: Option<String>,
    pub class: Option<ClassFlags>,
    pub elapsed_ms: f64,
    pub error: Option<String>,
    /// Generated NGT or DOT text.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub artifact: Option<String>,
}

impl Report {
    fn new(command: &str, input: Option<&Path>) -> Self {
        Report {
            command: command.into(),
            input: input.map(|p| p.display().to_string()),
            verdict: Verdict::Done,
            method: None,
            route: None,
            witness: None,
            class: None,
            elapsed_ms: 0.0,
            error: None,
            artifact: None,
        }
    }

    fn fail(mut self, verdict: Verdict, error: impl ToString) -> Self {
        self.verdict = verdict;
        self.error = Some(error.to_string());
        self
    }

    pub fn render(&self) -> String {
        if let Some(a) = &self.artifact {
            return a.clone();
        }
        let mut s = format!("{}: {}\n", self.input.as_deref().unwrap_or(&self.command), self.verdict.name());
        if let Some(m) = &self.method {
            match &self.route {
                Some(r) => s.push_str(&format!("  method: {m} ({r})\n")),
                None => s.push_str(&format!("  method: {m}\n")),
            }
        }
        if let Some(w) = &self.witness {
            s.push_str(&format!("  witness: {w}\n"));
        }
        if let Some(c) = &self.class {
            s.push_str(&format!("  class: {c}\n"));
        }
        if let Some(e) = &self.error {
            s.push_str(&format!("  error: {e}\n"));
        }
        s.push_str(&format!("  time: {:.3} ms\n", self.elapsed_ms));
        s
    }
}

/// Result of one invocation: exit code, reports, stdout text and
/// stderr diagnostics.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub reports: Vec<Report>,
    pub stdout: String,
    pub diagnostics: Vec<String>,
}

pub fn run_cli<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let (stdout, diagnostics) = if code == EXIT_OK { (text, vec![]) } else { (String::new(), vec![text]) };
            return Outcome { code, reports: vec![], stdout, diagnostics };
        }
    };
    run(&cli)
}

pub fn run(cli: &Cli) -> Outcome {
    let reports = match &cli.command {
        Command::Check(a) => match check_inputs(a) {
            Ok(files) => {
                let method = a.method;
                let budget = cli.budget;
                map_files(&files, |f| timed(|| check_file(f, method, budget)))
            }
            Err(e) => vec![Report::new("check", None).fail(Verdict::InputError, e)],
        },
        Command::Classify { file } => vec![timed(|| classify_file(file))],
        Command::Omit(a) => vec![timed(|| omit_file(a, cli.budget))],
        Command::Race(a) => vec![timed(|| race_file(a, cli.budget))],
        Command::Data(a) => vec![timed(|| data_file(a, cli.budget))],
        Command::Gen { kind } => vec![timed(|| generate(kind, cli.seed))],
        Command::Dot { file, witness } => vec![timed(|| dot_file(file, *witness))],
    };
    let code = reports.iter().map(|r| r.verdict.exit_code()).max().unwrap_or(EXIT_OK);
    let diagnostics: Vec<String> = reports
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("{}: {e}", r.input.as_deref().unwrap_or(&r.command))))
        .collect();
    let mut text = if cli.json {
        let v = if reports.len() == 1 && !matches!(cli.command, Command::Check(_)) {
            serde_json::to_string_pretty(&reports[0])
        } else {
            serde_json::to_string_pretty(&reports)
        };
        v.expect("reports serialize") + "\n"
    } else {
        reports.iter().filter(|r| r.verdict != Verdict::InputError || r.artifact.is_some()).map(Report::render).collect()
    };
    let mut outcome = Outcome { code, reports, stdout: String::new(), diagnostics };
    if let Some(path) = &cli.output {
        if let Err(e) = fs::write(path, &text) {
            outcome.diagnostics.push(format!("{}: {e}", path.display()));
            outcome.code = EXIT_INPUT;
        }
        text.clear();
    }
    outcome.stdout = text;
    outcome
}

fn timed(f: impl FnOnce() -> Report) -> Report {
    let t = Instant::now();
    let mut r = f();
    r.elapsed_ms = t.elapsed().as_secs_f64() * 1000.0;
    r
}

#[cfg(feature = "parallel")]
fn map_files(files: &[PathBuf], f: impl Fn(&PathBuf) -> Report + Sync + Send) -> Vec<Report> {
    use rayon::prelude::*;
    files.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_files(files: &[PathBuf], f: impl Fn(&PathBuf) -> Report) -> Vec<Report> {
    files.iter().map(f).collect()
}

fn check_inputs(a: &CheckArgs) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = a.files.clone();
    if let Some(g) = &a.glob {
        let mut matched: Vec<PathBuf> = glob::glob(g)?.collect::<Result<_, _>>()?;
        if matched.is_empty() {
            return Err(anyhow!("no files match '{g}'"));
        }
        matched.sort();
        files.extend(matched);
    }
    if files.is_empty() {
        return Err(anyhow!("no input files"));
    }
    Ok(files)
}

fn load(path: &Path) -> anyhow::Result<NgtDocument> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(parse_ngt(&text)?)
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// The method `auto` picks for a soundness check, with the reason.
pub fn route(c: &ClassFlags) -> (Method, &'static str) {
    if c.deterministic {
        (Method::Patterns, "deterministic → det-soundness")
    } else if c.acyclic && c.weakly_nd {
        (Method::Weak, "acyclic weakly non-deterministic → weak-soundness")
    } else {
        (Method::Oracle, "outside the fast classes → oracle")
    }
}

fn check_file(path: &Path, method: Method, budget: usize) -> Report {
    let r = Report::new("check", Some(path));
    let doc = match load(path) {
        Ok(d) => d,
        Err(e) => return r.fail(Verdict::InputError, format!("{e:#}")),
    };
    check_negotiation(r, &doc.neg, method, budget)
}

fn check_negotiation(mut r: Report, neg: &Negotiation, method: Method, budget: usize) -> Report {
    let class = classify(neg);
    r.class = Some(class);
    let m = if method == Method::Auto {
        let (m, why) = route(&class);
        r.route = Some(why.into());
        m
    } else {
        r.route = Some("forced".into());
        method
    };
    r.method = Some(m.name().into());
    match m {
        Method::Patterns => match det_soundness(neg) {
            Ok(DetVerdict::Sound) => r.verdict = Verdict::Sound,
            Ok(DetVerdict::Unsound(w)) => {
                r.verdict = Verdict::Unsound;
                r.witness = Some(w.render(neg));
            }
            Err(e @ PatternError::NotDeterministic) | Err(e @ PatternError::BudgetExceeded) => {
                return r.fail(Verdict::Precondition, e)
            }
        },
        Method::Weak | Method::Game => match weak_soundness(neg) {
            Ok(v) => {
                r.verdict = if v.is_sound() { Verdict::Sound } else { Verdict::Unsound };
                if !v.is_sound() {
                    r.witness = Some(v.render(neg, &deterministic_part(neg)));
                }
            }
            Err(e @ (WeakError::NotAcyclic | WeakError::NotWeaklyNd | WeakError::NotSingleNd(_))) => {
                return r.fail(Verdict::Precondition, e)
            }
            Err(e) => return r.fail(Verdict::Precondition, e),
        },
        Method::Oracle => match oracle_sound(neg, budget) {
            Ok(OracleVerdict::Sound) => r.verdict = Verdict::Sound,
            Ok(OracleVerdict::Unsound { run, stuck }) => {
                r.verdict = Verdict::Unsound;
                let kind = if stuck.is_deadlock(neg) { "deadlock" } else { "stuck" };
                r.witness = Some(format!("run {} reaches {kind} {}", run.render(neg), stuck.render(neg)));
            }
            Err(e @ OracleError::BudgetExceeded(_)) => return r.fail(Verdict::Precondition, e),
        },
        Method::Auto => unreachable!("auto is resolved above"),
    }
    r
}

fn classify_file(path: &Path) -> Report {
    let mut r = Report::new("classify", Some(path));
    match load(path) {
        Ok(doc) => {
            let c = classify(&doc.neg);
            r.class = Some(c);
            r.method = Some(route(&c).0.name().into());
            r.route = Some(route(&c).1.into());
            r
        }
        Err(e) => r.fail(Verdict::InputError, format!("{e:#}")),
    }
}

fn parse_nodes(neg: &Negotiation, text: &str) -> anyhow::Result<Vec<NodeId>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| neg.node_id(s).ok_or_else(|| anyhow!("unknown node '{s}'")))
        .collect()
}

fn omit_file(a: &OmitArgs, budget: usize) -> Report {
    let mut r = Report::new("omit", Some(&a.file));
    let parsed = load(&a.file).and_then(|doc| {
        let include = parse_steps(&doc.neg, &a.include).ok_or_else(|| anyhow!("bad include list '{}'", a.include))?;
        let omit = parse_nodes(&doc.neg, &a.omit)?;
        Ok((doc.neg, OmitInstance::new(include, omit)))
    });
    let (neg, inst) = match parsed {
        Ok(x) => x,
        Err(e) => return r.fail(Verdict::InputError, format!("{e:#}")),
    };
    let class = classify(&neg);
    r.class = Some(class);
    let game_ok = class.deterministic && class.acyclic;
    let m = match a.method {
        Method::Auto if game_ok => {
            r.route = Some("acyclic deterministic → omitting game".into());
            Method::Game
        }
        Method::Auto => {
            r.route = Some("outside the game class → oracle".into());
            Method::Oracle
        }
        Method::Game | Method::Oracle => {
            r.route = Some("forced".into());
            a.method
        }
        other => return r.fail(Verdict::InputError, format!("method {} does not apply to omit", other.name())),
    };
    r.method = Some(m.name().into());
    if m == Method::Game {
        match solve_omitting(&neg, &inst) {
            Ok(Some(plan)) => {
                r.verdict = Verdict::PlanFound;
                r.witness = Some(plan.render(&neg));
            }
            Ok(None) => r.verdict = Verdict::NoPlan,
            Err(e @ GameError::InvalidPair(_)) => return r.fail(Verdict::InputError, e),
            Err(e) => return r.fail(Verdict::Precondition, e),
        }
    } else {
        match oracle_omit(&neg, &inst, budget) {
            Ok(Some(run)) => {
                r.verdict = Verdict::PlanFound;
                r.witness = Some(format!("run {}", run.render(&neg)));
            }
            Ok(None) => r.verdict = Verdict::NoPlan,
            Err(e) => return r.fail(Verdict::Precondition, e),
        }
    }
    r
}

fn race_file(a: &RaceArgs, budget: usize) -> Report {
    let mut r = Report::new("race", Some(&a.file));
    let parsed = load(&a.file).and_then(|doc| {
        let m = doc.neg.node_id(&a.m).ok_or_else(|| anyhow!("unknown node '{}'", a.m))?;
        let n = doc.neg.node_id(&a.n).ok_or_else(|| anyhow!("unknown node '{}'", a.n))?;
        Ok((doc.neg, m, n))
    });
    let (neg, m, n) = match parsed {
        Ok(x) => x,
        Err(e) => return r.fail(Verdict::InputError, format!("{e:#}")),
    };
    let class = classify(&neg);
    r.class = Some(class);
    let fast_ok = class.deterministic && class.acyclic && det_soundness(&neg).map(|v| v.is_sound()).unwrap_or(false);
    let method = match a.method {
        Method::Auto if fast_ok => {
            r.route = Some("sound acyclic deterministic → fork search".into());
            Method::Patterns
        }
        Method::Auto => {
            r.route = Some("outside the race class → oracle".into());
            Method::Oracle
        }
        Method::Patterns | Method::Oracle => {
            r.route = Some("forced".into());
            a.method
        }
        other => return r.fail(Verdict::InputError, format!("method {} does not apply to race", other.name())),
    };
    r.method = Some(method.name().into());
    if method == Method::Patterns {
        match race(&neg, m, n) {
            Ok(RaceVerdict::Race(f)) => {
                r.verdict = Verdict::Race;
                r.witness = Some(f.render(&neg));
            }
            Ok(RaceVerdict::NoRace(why)) => {
                r.verdict = Verdict::NoRace;
                r.witness = Some(why.name().into());
            }
            Err(e @ (RaceError::NotDeterministic | RaceError::NotAcyclic | RaceError::NotSound)) => {
                return r.fail(Verdict::Precondition, e)
            }
            Err(e) => return r.fail(Verdict::Precondition, e),
        }
    } else {
        match oracle_concurrent(&neg, m, n, budget) {
            Ok(Some(c)) => {
                r.verdict = Verdict::Race;
                r.witness = Some(format!("reachable configuration {}", c.render(&neg)));
            }
            Ok(None) => r.verdict = Verdict::NoRace,
            Err(e) => return r.fail(Verdict::Precondition, e),
        }
    }
    r
}

fn data_file(a: &DataArgs, budget: usize) -> Report {
    let mut r = Report::new("data", Some(&a.file));
    let doc = match load(&a.file) {
        Ok(d) => d,
        Err(e) => return r.fail(Verdict::InputError, format!("{e:#}")),
    };
    let neg = &doc.neg;
    r.class = Some(classify(neg));
    if !matches!(a.method, Method::Auto | Method::Oracle) {
        return r.fail(Verdict::InputError, format!("method {} does not apply to data", a.method.name()));
    }
    let forced_oracle = a.method == Method::Oracle;
    let (method, violation) = if let Some(kind) = &a.kind {
        let Some(kind) = SpecKind::parse(kind) else {
            return r.fail(Verdict::InputError, format!("unknown analysis '{kind}'"));
        };
        let Some(d) = doc.data.as_ref() else {
            return r.fail(Verdict::InputError, "input has no label lines");
        };
        let var = a.var.as_deref().unwrap_or_default();
        let res = if forced_oracle && kind != SpecKind::Inconsistent {
            let Some(x) = d.var_id(var) else {
                return r.fail(Verdict::InputError, format!("unknown variable '{var}'"));
            };
            let spec = match kind {
                SpecKind::WeaklyRedundant => DataSpec::weakly_redundant(d, x),
                _ => DataSpec::never_destroyed(d, x),
            };
            oracle_compliance(neg, &spec, budget).map(|c| (DataMethod::Oracle, c))
        } else {
            match builtin_spec(d, kind, var, budget) {
                Ok(rep) => {
                    r.method = Some(rep.method.name().into());
                    r.verdict = if rep.finding.is_some() { Verdict::Violates } else { Verdict::Complies };
                    if rep.finding.is_some() {
                        r.witness = Some(DataReport::render(&rep, neg));
                    }
                    return r;
                }
                Err(e) => Err(e),
            }
        };
        match res {
            Ok((m, c)) => (m, c),
            Err(e) => return data_error(r, e),
        }
    } else if let Some(spec_path) = &a.spec {
        let spec = match read(spec_path).map_err(|e| format!("{e:#}")).and_then(|t| DataSpec::parse(neg, &t).map_err(|e| e.to_string())) {
            Ok(s) => s,
            Err(e) => return r.fail(Verdict::InputError, e),
        };
        let res = if forced_oracle {
            oracle_compliance(neg, &spec, budget).map(|c| (DataMethod::Oracle, c))
        } else {
            check_spec(neg, &spec, budget)
        };
        match res {
            Ok(x) => x,
            Err(e) => return data_error(r, e),
        }
    } else {
        return r.fail(Verdict::InputError, "give --kind with --var, or --spec");
    };
    r.method = Some(method.name().into());
    match violation {
        Compliance::Complies => r.verdict = Verdict::Complies,
        Compliance::Violates(v) => {
            r.verdict = Verdict::Violates;
            let s = |st: negsound::Step| format!("({},{})", neg.node_name(st.node), neg.result_name(st.result));
            r.witness = Some(format!("{} then {} in run {}", s(v.first), s(v.second), v.run.render(neg)));
        }
    }
    r
}

fn data_error(r: Report, e: negsound::data::DataError) -> Report {
    use negsound::data::DataError;
    match e {
        DataError::SpecSyntax { .. } | DataError::UnknownVariable(_) => r.fail(Verdict::InputError, e),
        _ => r.fail(Verdict::Precondition, e),
    }
}

fn generate(kind: &GenKind, seed: u64) -> Report {
    let r = Report::new("gen", None);
    let neg = match kind {
        GenKind::Cnf { file } => read(file)
            .and_then(|t| Ok(Cnf3::parse_dimacs(&t)?))
            .and_then(|f| Ok(gen_from_cnf(&f)?)),
        GenKind::Digraph { file, source, target } => read(file)
            .and_then(|t| Ok(Digraph::parse_edge_list(&t)?))
            .and_then(|g| Ok(gen_from_digraph(&g, source, target)?)),
        GenKind::Random { nodes, procs, max_results, cyclic, nondeterministic, weakly_nd } => {
            let p = RandomParams {
                nodes: *nodes,
                procs: *procs,
                max_results: *max_results,
                acyclic: !cyclic,
                deterministic: !nondeterministic,
                weakly_nd: *weakly_nd || !nondeterministic,
            };
            gen_random(&p, seed).map_err(Into::into)
        }
        GenKind::Structured { nodes, procs } => Ok(gen_structured(*nodes, *procs, seed)),
    };
    match neg {
        Ok(neg) => artifact(r, &neg, emit_ngt(&neg)),
        Err(e) => r.fail(Verdict::InputError, format!("{e:#}")),
    }
}

fn artifact(mut r: Report, neg: &Negotiation, text: String) -> Report {
    r.class = Some(classify(neg));
    r.artifact = Some(text);
    r
}

fn dot_file(path: &Path, witness: bool) -> Report {
    let mut r = Report::new("dot", Some(path));
    let doc = match load(path) {
        Ok(d) => d,
        Err(e) => return r.fail(Verdict::InputError, format!("{e:#}")),
    };
    let neg = &doc.neg;
    let mut overlays = Vec::new();
    if witness {
        if !neg.is_deterministic() {
            return r.fail(Verdict::Precondition, "witness overlays need a deterministic negotiation");
        }
        match det_soundness(neg) {
            Ok(DetVerdict::Unsound(w)) => {
                r.witness = Some(w.render(neg));
                overlays.push(Overlay::edges(format!("pattern {}", w.kind()), w.edges()));
            }
            Ok(DetVerdict::Sound) => {}
            Err(e) => return r.fail(Verdict::Precondition, e),
        }
    }
    let text = emit_dot(neg, &overlays);
    artifact(r, neg, text)
}
