use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use cayley_measure::cylinder::{CylinderSet, Rectangle, SiteConstraint, SpinSet};
use cayley_measure::extension::{continuity_probe, ContinuityVerdict, ExtensionHandle, Trust};
use cayley_measure::measure::{check_consistency, violation_ratio, CheckMode};
use cayley_measure::sample::CylinderSampler;
use cayley_measure::sigma_finite::{
    condition_2_7_check, cover_independence, sigma_extension, validate_cover, Agreement, Cover, CoverParts,
    SeriesOptions, SeriesOutcome, SeriesReport, Verdict,
};
use cayley_measure::specdsl::{parse_event_for, parse_spec, Model, ParseError};
use cayley_measure::tree::Vertex;
use cayley_measure::value::{fmt_rational, parse_rational, Ext, Rational};
use cayley_measure::Error;

#[derive(Parser)]
#[command(name = "cayley-measure", version, about = "Exact measures on Cayley-tree configuration spaces")]
struct Cli {
    /// Spec file describing the tree, spins, family and covers.
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    /// Tail tolerance for series, as p/q.
    #[arg(long, global = true)]
    tolerance: Option<String>,
    /// Maximum number of series terms.
    #[arg(long, global = true)]
    term_budget: Option<usize>,
    /// Partial-sum bound past which a series is reported as exceeding it, as p/q.
    #[arg(long, global = true)]
    bound: Option<String>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Only print the JSON result.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the spec, build the family and check every cover.
    Validate,
    /// Value of the extension on an event.
    Eval {
        #[arg(long)]
        event: String,
        /// Evaluate through this depth (at least the event's base depth).
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Check that every projection of the family matches the coarser measure.
    Consistency {
        #[arg(long)]
        depth: usize,
        /// Compare every pair of depths through full tables.
        #[arg(long)]
        exhaustive: bool,
    },
    /// Measures of the shrinking events {every site of V_n has spin VALUE}.
    ProbeEmpty {
        #[arg(long)]
        maxdepth: usize,
        #[arg(long, default_value_t = 0)]
        value: u64,
    },
    /// Cover-sum value of an event.
    SigmaEval {
        #[arg(long)]
        cover: String,
        #[arg(long)]
        event: String,
    },
    /// Cover-sum values under two covers.
    CoversCompare {
        /// Cover name; give exactly two.
        #[arg(long, required = true, action = clap::ArgAction::Append)]
        cover: Vec<String>,
        /// Event to compare on; seeded random events otherwise.
        #[arg(long)]
        event: Option<String>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
    /// Field value of an event against its cover sum.
    Condition27 {
        #[arg(long)]
        cover: String,
        #[arg(long)]
        event: String,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Eval { .. } => "eval",
            Command::Consistency { .. } => "consistency",
            Command::ProbeEmpty { .. } => "probe-empty",
            Command::SigmaEval { .. } => "sigma-eval",
            Command::CoversCompare { .. } => "covers-compare",
            Command::Condition27 { .. } => "condition27",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Ok = 0,
    Violation = 1,
    Usage = 2,
    Inconclusive = 3,
}

struct Output {
    status: Status,
    body: Value,
    summary: String,
}

enum Failure {
    Parse(ParseError),
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Self {
        Failure::Parse(e)
    }
}

type Run<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = cli.command.name();
    let (status, mut body, summary) = match run(&cli) {
        Ok(out) => (out.status, out.body, out.summary),
        Err(f) => failure(f),
    };
    body["command"] = json!(command);
    body["status"] = json!(match status {
        Status::Ok => "ok",
        Status::Violation => "violation",
        Status::Usage => "error",
        Status::Inconclusive => "inconclusive",
    });
    // A closed pipe (e.g. `| head`) is not an error worth a panic.
    let _ = writeln!(std::io::stdout(), "{body}");
    if !cli.json && !summary.is_empty() {
        eprintln!("{summary}");
    }
    ExitCode::from(status as u8)
}

fn failure(f: Failure) -> (Status, Value, String) {
    match f {
        Failure::Parse(e) => (
            Status::Usage,
            json!({"error": {"kind": "parse", "line": e.line, "column": e.column,
                             "message": e.message, "expected": e.expected}}),
            format!("parse error at {e}"),
        ),
        Failure::Usage(m) => (
            Status::Usage,
            json!({"error": {"kind": "usage", "message": m}}),
            format!("error: {m}"),
        ),
        Failure::Lib(e) => {
            let (status, kind) = match e {
                Error::Inconsistent(_) => (Status::Violation, "inconsistent"),
                _ => (Status::Usage, "invalid"),
            };
            (
                status,
                json!({"error": {"kind": kind, "message": e.to_string()}}),
                format!("error: {e}"),
            )
        }
    }
}

fn load(cli: &Cli) -> Run<Model> {
    let path = cli
        .spec
        .as_ref()
        .ok_or_else(|| Failure::Usage("--spec PATH is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_spec(&text)?.build()?)
}

fn rational_flag(name: &str, value: &Option<String>) -> Run<Option<Rational>> {
    value
        .as_deref()
        .map(|s| {
            parse_rational(s).ok_or_else(|| Failure::Usage(format!("--{name} expects an exact rational p/q, got '{s}'")))
        })
        .transpose()
}

fn options(cli: &Cli) -> Run<SeriesOptions> {
    let mut o = SeriesOptions::default();
    if let Some(t) = rational_flag("tolerance", &cli.tolerance)? {
        if t <= Rational::from_integer(0.into()) {
            return Err(Failure::Usage("--tolerance must be positive".into()));
        }
        o.tolerance = t;
    }
    if let Some(b) = rational_flag("bound", &cli.bound)? {
        o.bound = b;
    }
    if let Some(n) = cli.term_budget {
        o.term_budget = n;
    }
    Ok(o)
}

fn event(model: &Model, text: &str) -> Run<(String, CylinderSet)> {
    let expr = parse_event_for(text, model.family.spins())?;
    let set = expr.lower(model.family.spins())?;
    let depth = set.base_depth(&model.tree);
    if depth > model.tree.max_depth() {
        return Err(Failure::Lib(Error::DepthExceeded {
            requested: depth,
            max: model.tree.max_depth(),
        }));
    }
    Ok((expr.to_string(), set))
}

fn cover<'a>(model: &'a Model, name: &str) -> Run<&'a Cover> {
    model.cover(name).ok_or_else(|| {
        let names: Vec<&str> = model.covers.iter().map(|(n, _)| n.as_str()).collect();
        Failure::Usage(format!("unknown cover '{name}'; the spec declares: {}", names.join(", ")))
    })
}

fn q(r: &Rational) -> Value {
    json!(fmt_rational(r))
}

fn ext(e: &Ext) -> Value {
    json!(e.render())
}

fn run(cli: &Cli) -> Run<Output> {
    let model = load(cli)?;
    match &cli.command {
        Command::Validate => validate(&model),
        Command::Eval { event: text, depth } => eval(&model, text, *depth),
        Command::Consistency { depth, exhaustive } => consistency(&model, *depth, *exhaustive),
        Command::ProbeEmpty { maxdepth, value } => probe_empty(&model, *maxdepth, *value),
        Command::SigmaEval { cover: name, event: text } => sigma_eval(&model, &options(cli)?, name, text),
        Command::CoversCompare { cover: names, event: text, trials } => {
            covers_compare(&model, &options(cli)?, names, text.as_deref(), *trials, cli.seed)
        }
        Command::Condition27 { cover: name, event: text } => condition27(&model, &options(cli)?, name, text),
    }
}

fn validate(model: &Model) -> Run<Output> {
    let fam = &model.family;
    let mut covers = Vec::new();
    for (name, c) in &model.covers {
        let check = validate_cover(fam, c)?;
        covers.push(json!({
            "name": name,
            "cover": c.describe(),
            "parts": c.len(fam.spins()),
            "masses": check.masses.iter().map(q).collect::<Vec<_>>(),
            "all_parts_checked": check.complete,
        }));
    }
    let spins = match fam.spins() {
        SpinSet::Finite(s) => json!(s),
        SpinSet::Naturals => json!("nat"),
    };
    let summary = format!(
        "spec ok: k={}, {} family ({}), {} cover(s)",
        model.tree.order(),
        fam.describe(),
        fam.kind().name(),
        covers.len()
    );
    Ok(Output {
        status: Status::Ok,
        body: json!({
            "tree": {"k": model.tree.order(), "max_depth": model.tree.max_depth()},
            "spins": spins,
            "family": {"form": fam.describe(), "kind": fam.kind().name(),
                       "closed_form_consistent": fam.closed_form_consistent()},
            "covers": covers,
        }),
        summary,
    })
}

fn handle(model: &Model, depth: usize) -> Run<ExtensionHandle> {
    let depth = depth.max(1).min(model.family.defined_to());
    Ok(ExtensionHandle::auto(model.family.clone(), depth)?)
}

fn trust_json(h: &ExtensionHandle) -> Value {
    match h.trust() {
        Trust::ClosedForm => json!("closed-form"),
        Trust::Verified(d) => json!(format!("verified to depth {d}")),
    }
}

fn eval(model: &Model, text: &str, depth: Option<usize>) -> Run<Output> {
    let (canonical, set) = event(model, text)?;
    let base = set.base_depth(&model.tree);
    let depth = depth.unwrap_or(base);
    if depth < base {
        return Err(Failure::Usage(format!("--depth {depth} is below the event's base depth {base}")));
    }
    let h = handle(model, depth)?;
    let value = h.mu_at(&set, depth)?;
    Ok(Output {
        status: Status::Ok,
        summary: format!("mu({canonical}) = {} (through depth {depth})", value.render()),
        body: json!({"event": canonical, "base_depth": base, "depth": depth,
                     "value": ext(&value), "trust": trust_json(&h)}),
    })
}

fn consistency(model: &Model, depth: usize, exhaustive: bool) -> Run<Output> {
    let mode = if exhaustive { CheckMode::Exhaustive } else { CheckMode::Auto };
    let r = check_consistency(&model.family, depth, mode)?;
    let violation = r.first_violation.as_ref().map(|v| {
        json!({"coarse": v.coarse, "fine": v.fine, "base": v.base.to_string(),
               "projected": ext(&v.lhs), "coarse_value": ext(&v.rhs),
               "ratio": violation_ratio(v).as_ref().map(q)})
    });
    let status = if r.first_violation.is_some() {
        Status::Violation
    } else if r.passed() {
        Status::Ok
    } else {
        Status::Inconclusive
    };
    let summary = match &r.first_violation {
        Some(v) => format!(
            "INCONSISTENT: projecting depth {} to {} gives {} on {}, expected {}",
            v.fine,
            v.coarse,
            v.lhs.render(),
            v.base,
            v.rhs.render()
        ),
        None if r.passed() => format!("consistent to depth {} ({})", r.consistent_to, r.method.name()),
        None => format!(
            "verified only to depth {} of {} ({}, budget exhausted)",
            r.consistent_to,
            depth,
            r.method.name()
        ),
    };
    Ok(Output {
        status,
        summary,
        body: json!({"requested": depth, "consistent_to": r.consistent_to, "method": r.method.name(),
                     "passed": r.passed(), "budget_exhausted": r.budget_exhausted, "violation": violation}),
    })
}

fn probe_empty(model: &Model, maxdepth: usize, value: u64) -> Run<Output> {
    let spins = model.family.spins();
    spins.check(value)?;
    let h = handle(model, maxdepth)?;
    let tree = model.tree;
    let seq = |n: usize| -> cayley_measure::Result<CylinderSet> {
        let rect = tree
            .ball_vertices(n)?
            .try_fold(Rectangle::full(), |r, v| r.restrict(Vertex(v), &SiteConstraint::eq(value), spins))
            .expect("single-value constraints are satisfiable");
        Ok(CylinderSet::from_rects(spins, vec![rect]))
    };
    let report = continuity_probe(&h, seq, maxdepth)?;
    let verdict = match report.verdict {
        ContinuityVerdict::EmptyCertified { .. } => "empty-certified",
        ContinuityVerdict::StrictlyDecreasing => "strictly-decreasing",
        ContinuityVerdict::Constant => "constant",
        ContinuityVerdict::NonIncreasing => "non-increasing",
    };
    let values: Vec<Value> = report
        .values
        .iter()
        .map(|(n, v)| json!({"n": n, "value": ext(v)}))
        .collect();
    let listed: Vec<String> = report.values.iter().map(|(_, v)| v.render()).collect();
    Ok(Output {
        status: Status::Ok,
        summary: format!("values {} ({verdict})", listed.join(", ")),
        body: json!({"spin": value, "values": values, "verdict": verdict}),
    })
}

fn series_json(r: &SeriesReport) -> Value {
    let mut v = json!({"outcome": r.outcome.name(), "terms": r.terms_used,
                       "trace": r.trace.iter().take(16).map(q).collect::<Vec<_>>()});
    match &r.outcome {
        SeriesOutcome::Exact(x) => {
            v["value"] = q(x);
            v["tail_bound"] = json!("0");
        }
        SeriesOutcome::Converged { partial, tail_bound } => {
            v["partial"] = q(partial);
            v["tail_bound"] = q(tail_bound);
        }
        SeriesOutcome::DivergesBeyond { bound, partial } => {
            v["bound"] = q(bound);
            v["partial"] = q(partial);
        }
        SeriesOutcome::Inconclusive { partial } => v["partial"] = q(partial),
    }
    v
}

fn series_summary(r: &SeriesReport) -> String {
    match &r.outcome {
        SeriesOutcome::Exact(x) => format!("exact {} after {} terms", fmt_rational(x), r.terms_used),
        SeriesOutcome::Converged { partial, tail_bound } => format!(
            "{} after {} terms, tail below {}",
            fmt_rational(partial),
            r.terms_used,
            fmt_rational(tail_bound)
        ),
        SeriesOutcome::DivergesBeyond { bound, .. } => {
            format!("partial sums exceed {} after {} terms", fmt_rational(bound), r.terms_used)
        }
        SeriesOutcome::Inconclusive { partial } => format!(
            "inconclusive: partial sum {} after {} terms",
            fmt_rational(partial),
            r.terms_used
        ),
    }
}

fn series_status(o: &SeriesOutcome) -> Status {
    match o {
        SeriesOutcome::Exact(_) | SeriesOutcome::Converged { .. } => Status::Ok,
        _ => Status::Inconclusive,
    }
}

fn sigma_eval(model: &Model, opts: &SeriesOptions, name: &str, text: &str) -> Run<Output> {
    let (canonical, set) = event(model, text)?;
    let c = cover(model, name)?;
    let ext = sigma_extension(&model.family, c)?.with_options(opts.clone());
    let r = ext.evaluate(&set)?;
    Ok(Output {
        status: series_status(&r.outcome),
        summary: format!("sum over {name} of {canonical}: {}", series_summary(&r)),
        body: json!({"event": canonical, "cover": name, "series": series_json(&r)}),
    })
}

fn agreement_name(a: Agreement) -> &'static str {
    match a {
        Agreement::Exact => "exact",
        Agreement::WithinTails => "within-tails",
        Agreement::Disagree => "disagree",
        Agreement::Undetermined => "undetermined",
    }
}

fn covers_compare(
    model: &Model,
    opts: &SeriesOptions,
    names: &[String],
    text: Option<&str>,
    trials: usize,
    seed: u64,
) -> Run<Output> {
    if names.len() != 2 {
        return Err(Failure::Usage(format!("covers-compare needs exactly two --cover flags, got {}", names.len())));
    }
    let (a, b) = (cover(model, &names[0])?, cover(model, &names[1])?);
    let fam = &model.family;
    let events: Vec<CylinderSet> = match text {
        Some(t) => vec![event(model, t)?.1],
        None => {
            let mut sampler = CylinderSampler::new(1.min(fam.defined_to()));
            if fam.spins() == SpinSet::Naturals {
                let pin = [a, b].iter().find_map(|c| match c.parts() {
                    CoverParts::SiteSlices { vertex, .. } => Some(*vertex),
                    CoverParts::Explicit(_) => None,
                });
                sampler = sampler.pin(pin.unwrap_or(Vertex::ROOT));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..trials)
                .map(|_| sampler.sample(&mut rng, fam.spins(), &model.tree))
                .collect::<cayley_measure::Result<_>>()?
        }
    };
    let mut rows = Vec::new();
    let (mut disagree, mut undetermined) = (0, 0);
    for e in &events {
        let r = cover_independence(fam, a, b, e, opts)?;
        match r.agreement {
            Agreement::Disagree => disagree += 1,
            Agreement::Undetermined => undetermined += 1,
            _ => {}
        }
        rows.push(json!({"event": e.to_string(), "agreement": agreement_name(r.agreement),
                         "first": series_json(&r.first), "second": series_json(&r.second),
                         "double_sum": r.double_sum.as_ref().map(q)}));
    }
    let status = if disagree > 0 {
        Status::Violation
    } else if undetermined > 0 {
        Status::Inconclusive
    } else {
        Status::Ok
    };
    Ok(Output {
        status,
        summary: format!(
            "{} vs {}: {} event(s), {disagree} disagreement(s), {undetermined} undetermined",
            names[0],
            names[1],
            events.len()
        ),
        body: json!({"covers": names, "comparisons": rows, "disagreements": disagree,
                     "undetermined": undetermined}),
    })
}

fn condition27(model: &Model, opts: &SeriesOptions, name: &str, text: &str) -> Run<Output> {
    let (canonical, set) = event(model, text)?;
    let c = cover(model, name)?;
    let r = condition_2_7_check(&model.family, c, &set, opts)?;
    let status = match r.verdict {
        Verdict::Pass => Status::Ok,
        Verdict::Fail => Status::Violation,
        Verdict::Inconclusive => Status::Inconclusive,
    };
    Ok(Output {
        status,
        summary: format!(
            "{}: mu({canonical}) = {}, cover sum {}",
            r.verdict.name(),
            r.direct.render(),
            series_summary(&r.series)
        ),
        body: json!({"event": canonical, "cover": name, "verdict": r.verdict.name(),
                     "direct": ext(&r.direct), "series": series_json(&r.series)}),
    })
}
