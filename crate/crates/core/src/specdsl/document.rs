//! Sectioned spec files: `[tree]`, `[spins]`, `[family]`, `[covers]`.

use std::collections::HashMap;
use std::fmt;

use num::{One, Signed, Zero};

use super::error::ParseError;
use super::event::{parse_event_at, EventExpr};
use super::lexer::{Lexer, Tok};
use crate::cylinder::SpinSet;
use crate::error::{Error, Result};
use crate::measure::{DenseTable, MeasureFamily, TransitionKernel};
use crate::sigma_finite::{Cover, TailPolicy};
use crate::tree::{TreeGeometry, Vertex, DEFAULT_MAX_DEPTH};
use crate::value::{fmt_rational, Ext, Rational};
use crate::weights::Weights;

type PResult<T> = std::result::Result<T, ParseError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinSpec {
    Finite(u64),
    Naturals,
}

impl SpinSpec {
    pub fn spin_set(self) -> SpinSet {
        match self {
            SpinSpec::Finite(s) => SpinSet::Finite(s),
            SpinSpec::Naturals => SpinSet::Naturals,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyForm {
    Markov,
    /// Markov with every kernel row required to sum to one.
    MarkovProb,
    Product,
    Table,
}

impl FamilyForm {
    pub fn name(self) -> &'static str {
        match self {
            FamilyForm::Markov => "markov",
            FamilyForm::MarkovProb => "markov-prob",
            FamilyForm::Product => "product",
            FamilyForm::Table => "table",
        }
    }

    fn keys(self) -> &'static [&'static str] {
        match self {
            FamilyForm::Markov | FamilyForm::MarkovProb => &["root", "kernel", "default_row", "scale"],
            FamilyForm::Product => &["weights", "scale"],
            FamilyForm::Table => &["depth", "values", "scale"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilySpec {
    pub form: FamilyForm,
    pub root: Option<Weights>,
    pub kernel: Option<Vec<Weights>>,
    pub default_row: Option<Weights>,
    pub weights: Option<Weights>,
    pub depth: Option<usize>,
    pub values: Option<Vec<Rational>>,
    pub scale: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoverSpec {
    Slices(Vertex),
    Groups(Vertex, u64),
    Explicit(Vec<EventExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverEntry {
    pub name: String,
    pub spec: CoverSpec,
    pub tail: Option<TailPolicy>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecDocument {
    pub order: u32,
    pub max_depth: Option<usize>,
    pub spins: SpinSpec,
    pub family: FamilySpec,
    pub covers: Vec<CoverEntry>,
}

/// A spec lowered to library objects.
#[derive(Debug, Clone)]
pub struct Model {
    pub tree: TreeGeometry,
    pub family: MeasureFamily,
    pub covers: Vec<(String, Cover)>,
}

impl Model {
    pub fn cover(&self, name: &str) -> Option<&Cover> {
        self.covers.iter().find(|(n, _)| n == name).map(|(_, c)| c)
    }
}

impl SpecDocument {
    pub fn spin_set(&self) -> SpinSet {
        self.spins.spin_set()
    }

    pub fn build(&self) -> Result<Model> {
        let tree = TreeGeometry::with_max_depth(self.order, self.max_depth.unwrap_or(DEFAULT_MAX_DEPTH))?;
        let spins = self.spin_set();
        let f = &self.family;
        let missing = |key: &str| Error::InvalidParameter(format!("family is missing '{key}'"));
        let mut family = match f.form {
            FamilyForm::Markov | FamilyForm::MarkovProb => {
                let root = f.root.clone().ok_or_else(|| missing("root"))?;
                let rows = f.kernel.clone().unwrap_or_default();
                let kernel = match spins {
                    SpinSet::Finite(_) => TransitionKernel::finite(
                        rows.iter().map(finite_values).collect::<Result<_>>()?,
                    )?,
                    SpinSet::Naturals => TransitionKernel::naturals(
                        rows,
                        f.default_row.clone().ok_or_else(|| missing("default_row"))?,
                    )?,
                };
                MeasureFamily::markov(tree, root, kernel)?
            }
            FamilyForm::Product => {
                MeasureFamily::product(tree, spins, f.weights.clone().ok_or_else(|| missing("weights"))?)?
            }
            FamilyForm::Table => {
                let s = spins.size().ok_or(Error::FiniteSpinsRequired("table families"))?;
                let depth = f.depth.ok_or_else(|| missing("depth"))?;
                let values = f.values.as_ref().ok_or_else(|| missing("values"))?;
                MeasureFamily::from_table(tree, DenseTable::from_rationals(&tree, s, depth, values)?)?
            }
        };
        if let Some(c) = &f.scale {
            family = family.scaled(c)?;
        }
        let mut covers = Vec::with_capacity(self.covers.len());
        for entry in &self.covers {
            let cover = match &entry.spec {
                CoverSpec::Slices(v) => Cover::slices(*v),
                CoverSpec::Groups(v, g) => Cover::groups(*v, *g)?,
                CoverSpec::Explicit(events) => Cover::explicit(
                    events.iter().map(|e| e.lower(spins)).collect::<Result<_>>()?,
                ),
            };
            let cover = match &entry.tail {
                Some(t) => cover.with_tail(t.clone())?,
                None => cover,
            };
            covers.push((entry.name.clone(), cover));
        }
        Ok(Model { tree, family, covers })
    }
}

fn finite_values(w: &Weights) -> Result<Vec<Rational>> {
    if w.tail().is_some() {
        return Err(Error::InvalidParameter("tail descriptor on finite spins".into()));
    }
    w.prefix()
        .iter()
        .map(|x| x.finite().cloned().ok_or(Error::InvalidParameter("infinite weight".into())))
        .collect()
}

fn render_tail(t: &TailPolicy) -> String {
    match t {
        TailPolicy::None => String::new(),
        TailPolicy::Geometric { start: 0, first, ratio } => {
            format!("geom({},{})", fmt_rational(first), fmt_rational(ratio))
        }
        TailPolicy::Geometric { start, first, ratio } => {
            format!("geom({},{},{start})", fmt_rational(first), fmt_rational(ratio))
        }
    }
}

impl fmt::Display for SpecDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[tree]")?;
        writeln!(f, "k = {}", self.order)?;
        if let Some(d) = self.max_depth {
            writeln!(f, "max_depth = {d}")?;
        }
        writeln!(f, "\n[spins]")?;
        match self.spins {
            SpinSpec::Finite(s) => writeln!(f, "size = {s}")?,
            SpinSpec::Naturals => writeln!(f, "kind = nat")?,
        }
        let fam = &self.family;
        writeln!(f, "\n[family]")?;
        writeln!(f, "kind = {}", fam.form.name())?;
        if let Some(w) = &fam.root {
            writeln!(f, "root = {}", w.render())?;
        }
        if let Some(rows) = &fam.kernel {
            let rows: Vec<String> = rows.iter().map(Weights::render).collect();
            writeln!(f, "kernel = {}", rows.join("; "))?;
        }
        if let Some(w) = &fam.default_row {
            writeln!(f, "default_row = {}", w.render())?;
        }
        if let Some(w) = &fam.weights {
            writeln!(f, "weights = {}", w.render())?;
        }
        if let Some(d) = fam.depth {
            writeln!(f, "depth = {d}")?;
        }
        if let Some(vs) = &fam.values {
            let vs: Vec<String> = vs.iter().map(fmt_rational).collect();
            writeln!(f, "values = {}", vs.join(" "))?;
        }
        if let Some(c) = &fam.scale {
            writeln!(f, "scale = {}", fmt_rational(c))?;
        }
        if !self.covers.is_empty() {
            writeln!(f, "\n[covers]")?;
            for c in &self.covers {
                let value = match &c.spec {
                    CoverSpec::Slices(v) => format!("slices({v})"),
                    CoverSpec::Groups(v, g) => format!("groups({v},{g})"),
                    CoverSpec::Explicit(es) => {
                        es.iter().map(EventExpr::to_string).collect::<Vec<_>>().join("; ")
                    }
                };
                writeln!(f, "{} = {value}", c.name)?;
                if let Some(t) = &c.tail {
                    writeln!(f, "{}.tail = {}", c.name, render_tail(t))?;
                }
            }
        }
        Ok(())
    }
}

/// A `key = value` line with the position of its value.
#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    line: usize,
    key_col: usize,
    value_col: usize,
}

#[derive(Default)]
struct Sections {
    tree: Vec<Entry>,
    spins: Vec<Entry>,
    family: Vec<Entry>,
    covers: Vec<Entry>,
    headers: HashMap<&'static str, usize>,
}

const SECTIONS: &[&str] = &["[tree]", "[spins]", "[family]", "[covers]"];

fn split_lines(text: &str) -> PResult<Sections> {
    let mut out = Sections::default();
    let mut current: Option<&'static str> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        let col = content[..indent].chars().count() + 1;
        if trimmed.starts_with('[') {
            let name = SECTIONS
                .iter()
                .find(|s| **s == trimmed)
                .map(|s| &s[1..s.len() - 1])
                .ok_or_else(|| ParseError::new(line, col, format!("unknown section {trimmed}")).expecting(SECTIONS))?;
            if out.headers.insert(name, line).is_some() {
                return Err(ParseError::new(line, col, format!("duplicate section [{name}]")));
            }
            current = Some(name);
            continue;
        }
        let Some(eq) = trimmed.find('=') else {
            return Err(ParseError::new(line, col, "expected 'key = value'").expecting(&["="]));
        };
        let key = trimmed[..eq].trim().to_string();
        if key.is_empty() {
            return Err(ParseError::new(line, col, "missing key before '='"));
        }
        let after = &trimmed[eq + 1..];
        let lead = after.len() - after.trim_start().len();
        let value_col = col + trimmed[..eq + 1].chars().count() + after[..lead].chars().count();
        let entry = Entry {
            key,
            value: after.trim().to_string(),
            line,
            key_col: col,
            value_col,
        };
        let bucket = match current {
            Some("tree") => &mut out.tree,
            Some("spins") => &mut out.spins,
            Some("family") => &mut out.family,
            Some("covers") => &mut out.covers,
            _ => {
                return Err(ParseError::new(line, col, "key outside of a section").expecting(SECTIONS));
            }
        };
        if bucket.iter().any(|e| e.key == entry.key) {
            return Err(ParseError::new(line, col, format!("duplicate key '{}'", entry.key)));
        }
        bucket.push(entry);
    }
    Ok(out)
}

fn lexer(e: &Entry) -> Lexer {
    Lexer::new(&e.value, e.line, e.value_col)
}

fn key_error(e: &Entry, message: impl Into<String>) -> ParseError {
    ParseError::new(e.line, e.key_col, message)
}

fn single_number(e: &Entry) -> PResult<u64> {
    let mut l = lexer(e);
    let n = l.number()?;
    l.expect_eof(&[])?;
    Ok(n)
}

fn single_rational(e: &Entry) -> PResult<Rational> {
    let mut l = lexer(e);
    let q = l.rational()?;
    l.expect_eof(&[])?;
    Ok(q)
}

/// Whitespace-separated rationals with an optional trailing `geom(first,ratio)`.
fn weights_in(l: &mut Lexer, stop: Option<char>) -> PResult<Weights> {
    let mut prefix = Vec::new();
    let mut tail = None;
    loop {
        let t = l.peek()?.clone();
        match &t.tok {
            Tok::Eof => break,
            Tok::Sym(c) if Some(*c) == stop => break,
            Tok::Num(_) if tail.is_none() => prefix.push(l.rational()?),
            Tok::Word(w) if w == "geom" && tail.is_none() => {
                l.next()?;
                l.expect_sym('(')?;
                let first = l.rational()?;
                l.expect_sym(',')?;
                let ratio = l.rational()?;
                l.expect_sym(')')?;
                if ratio > Rational::one() {
                    return Err(ParseError::new(t.line, t.col, "geometric ratio must be at most 1"));
                }
                tail = Some((first, ratio));
            }
            _ => {
                let expected: &[&str] = if tail.is_some() {
                    &["end of weights"]
                } else {
                    &["rational", "geom"]
                };
                return Err(l.error_at("unexpected token in weights", expected));
            }
        }
    }
    let w = match tail {
        Some((first, ratio)) => Weights::with_tail(prefix, first, ratio),
        None if prefix.is_empty() => Weights::finite(vec![Rational::zero()]),
        None => Weights::finite(prefix),
    };
    w.map_err(|e| {
        let t = l.peek().map(|t| (t.line, t.col)).unwrap_or((0, 0));
        ParseError::new(t.0, t.1, e.to_string())
    })
}

fn weights(e: &Entry) -> PResult<Weights> {
    let mut l = lexer(e);
    let w = weights_in(&mut l, None)?;
    l.expect_eof(&[])?;
    Ok(w)
}

fn kernel_rows(e: &Entry) -> PResult<Vec<Weights>> {
    let mut l = lexer(e);
    let mut rows = vec![weights_in(&mut l, Some(';'))?];
    while l.eat_sym(';')? {
        rows.push(weights_in(&mut l, Some(';'))?);
    }
    l.expect_eof(&[";"])?;
    Ok(rows)
}

fn rationals(e: &Entry) -> PResult<Vec<Rational>> {
    let mut l = lexer(e);
    let mut out = Vec::new();
    while l.peek()?.tok != Tok::Eof {
        out.push(l.rational()?);
    }
    Ok(out)
}

fn site_arg(l: &mut Lexer) -> PResult<Vertex> {
    let t = l.next()?;
    match t.tok {
        Tok::Site(i) => Ok(Vertex(i)),
        other => Err(ParseError::new(
            t.line,
            t.col,
            format!("expected a site, found '{}'", other.describe()),
        )
        .expecting(&["x<n>"])),
    }
}

fn cover_spec(e: &Entry, spins: SpinSet) -> PResult<CoverSpec> {
    let mut l = lexer(e);
    if let Tok::Word(w) = &l.peek()?.tok {
        if w == "slices" || w == "groups" {
            let groups = w == "groups";
            l.next()?;
            l.expect_sym('(')?;
            let v = site_arg(&mut l)?;
            let spec = if groups {
                l.expect_sym(',')?;
                let (line, col) = {
                    let t = l.peek()?;
                    (t.line, t.col)
                };
                let g = l.number()?;
                if g == 0 {
                    return Err(ParseError::new(line, col, "group size must be positive"));
                }
                CoverSpec::Groups(v, g)
            } else {
                CoverSpec::Slices(v)
            };
            l.expect_sym(')')?;
            l.expect_eof(&[])?;
            return Ok(spec);
        }
    }
    let mut events = Vec::new();
    let mut offset = 0;
    for piece in e.value.split(';') {
        let lead = piece.len() - piece.trim_start().len();
        let col = e.value_col + e.value[..offset + lead].chars().count();
        events.push(parse_event_at(piece.trim(), e.line, col, Some(spins))?);
        offset += piece.len() + 1;
    }
    Ok(CoverSpec::Explicit(events))
}

fn tail_policy(e: &Entry) -> PResult<TailPolicy> {
    let mut l = lexer(e);
    match &l.peek()?.tok {
        Tok::Word(w) if w == "geom" => {}
        _ => return Err(l.error_at("expected a tail descriptor", &["geom"])),
    }
    l.next()?;
    l.expect_sym('(')?;
    let first = l.rational()?;
    l.expect_sym(',')?;
    let ratio = l.rational()?;
    let start = if l.eat_sym(',')? { l.number()? as usize } else { 0 };
    l.expect_sym(')')?;
    l.expect_eof(&[])?;
    if ratio >= Rational::one() {
        return Err(ParseError::new(e.line, e.value_col, "cover tail ratio must be below 1"));
    }
    Ok(TailPolicy::Geometric { start, first, ratio })
}

fn unknown_key(e: &Entry, allowed: &[&str]) -> ParseError {
    key_error(e, format!("unknown key '{}'", e.key)).expecting(allowed)
}

/// Parses and checks a spec file.
pub fn parse_spec(text: &str) -> PResult<SpecDocument> {
    let sections = split_lines(text)?;
    let missing_section = |name: &str| ParseError::new(1, 1, format!("missing section [{name}]"));

    let mut order = None;
    let mut max_depth = None;
    for e in &sections.tree {
        match e.key.as_str() {
            "k" => {
                let k = single_number(e)?;
                if k == 0 || k > u32::MAX as u64 {
                    return Err(ParseError::new(e.line, e.value_col, "tree order k must be at least 1"));
                }
                order = Some(k as u32);
            }
            "max_depth" => max_depth = Some(single_number(e)? as usize),
            _ => return Err(unknown_key(e, &["k", "max_depth"])),
        }
    }
    let tree_line = *sections.headers.get("tree").ok_or_else(|| missing_section("tree"))?;
    let order = order.ok_or_else(|| ParseError::new(tree_line, 1, "[tree] needs 'k'"))?;

    let mut spins = None;
    for e in &sections.spins {
        spins = Some(match e.key.as_str() {
            "size" => {
                let s = single_number(e)?;
                if s == 0 {
                    return Err(ParseError::new(e.line, e.value_col, "spin set must be non-empty"));
                }
                SpinSpec::Finite(s)
            }
            "kind" => {
                let mut l = lexer(e);
                match l.next()?.tok {
                    Tok::Word(w) if w == "nat" => {}
                    _ => return Err(ParseError::new(e.line, e.value_col, "unknown spin kind").expecting(&["nat"])),
                }
                l.expect_eof(&[])?;
                SpinSpec::Naturals
            }
            _ => return Err(unknown_key(e, &["size", "kind"])),
        });
        if sections.spins.len() > 1 {
            return Err(key_error(e, "give exactly one of 'size' or 'kind'"));
        }
    }
    let spins_line = *sections.headers.get("spins").ok_or_else(|| missing_section("spins"))?;
    let spins = spins.ok_or_else(|| ParseError::new(spins_line, 1, "[spins] needs 'size' or 'kind'"))?;

    let family_line = *sections.headers.get("family").ok_or_else(|| missing_section("family"))?;
    let family = parse_family(&sections.family, family_line, spins, order)?;

    let spin_set = spins.spin_set();
    let mut covers: Vec<CoverEntry> = Vec::new();
    let mut tails = Vec::new();
    for e in &sections.covers {
        if let Some(name) = e.key.strip_suffix(".tail") {
            tails.push((name.to_string(), e));
            continue;
        }
        if !e.key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(key_error(e, format!("invalid cover name '{}'", e.key)));
        }
        covers.push(CoverEntry {
            name: e.key.clone(),
            spec: cover_spec(e, spin_set)?,
            tail: None,
        });
    }
    for (name, e) in tails {
        let policy = tail_policy(e)?;
        let Some(c) = covers.iter_mut().find(|c| c.name == name) else {
            return Err(key_error(e, format!("tail for undeclared cover '{name}'")));
        };
        if matches!(c.spec, CoverSpec::Explicit(_)) {
            return Err(key_error(e, "tail descriptors apply to generated covers only"));
        }
        c.tail = Some(policy);
    }
    let doc = SpecDocument {
        order,
        max_depth,
        spins,
        family,
        covers,
    };
    doc.build()
        .map_err(|err| ParseError::new(family_line, 1, err.to_string()))?;
    Ok(doc)
}

fn parse_family(entries: &[Entry], header: usize, spins: SpinSpec, order: u32) -> PResult<FamilySpec> {
    let kind_entry = entries
        .iter()
        .find(|e| e.key == "kind")
        .ok_or_else(|| ParseError::new(header, 1, "[family] needs 'kind'"))?;
    let form = {
        let mut l = lexer(kind_entry);
        let t = l.next()?;
        let form = match &t.tok {
            Tok::Word(w) if w == "markov" => FamilyForm::Markov,
            Tok::Word(w) if w == "markov-prob" => FamilyForm::MarkovProb,
            Tok::Word(w) if w == "product" => FamilyForm::Product,
            Tok::Word(w) if w == "table" => FamilyForm::Table,
            _ => {
                return Err(ParseError::new(t.line, t.col, "unknown family kind")
                    .expecting(&["markov", "markov-prob", "product", "table"]))
            }
        };
        l.expect_eof(&[])?;
        form
    };
    let mut fam = FamilySpec {
        form,
        root: None,
        kernel: None,
        default_row: None,
        weights: None,
        depth: None,
        values: None,
        scale: None,
    };
    let mut at: HashMap<&str, &Entry> = HashMap::new();
    for e in entries.iter().filter(|e| e.key != "kind") {
        let Some(key) = form.keys().iter().find(|k| **k == e.key) else {
            let mut allowed = vec!["kind"];
            allowed.extend_from_slice(form.keys());
            return Err(key_error(e, format!("key '{}' does not apply to kind = {}", e.key, form.name()))
                .expecting(&allowed));
        };
        at.insert(key, e);
        match *key {
            "root" => fam.root = Some(weights(e)?),
            "kernel" => fam.kernel = Some(kernel_rows(e)?),
            "default_row" => fam.default_row = Some(weights(e)?),
            "weights" => fam.weights = Some(weights(e)?),
            "depth" => fam.depth = Some(single_number(e)? as usize),
            "values" => fam.values = Some(rationals(e)?),
            "scale" => {
                let c = single_rational(e)?;
                if !c.is_positive() {
                    return Err(ParseError::new(e.line, e.value_col, "scale must be positive"));
                }
                fam.scale = Some(c);
            }
            _ => unreachable!("keys are listed per form"),
        }
    }
    let require = |key: &str| -> PResult<()> {
        if at.contains_key(key) {
            Ok(())
        } else {
            Err(key_error(kind_entry, format!("kind = {} needs '{key}'", form.name())))
        }
    };
    match form {
        FamilyForm::Markov | FamilyForm::MarkovProb => {
            require("root")?;
            match spins {
                SpinSpec::Finite(_) => require("kernel")?,
                SpinSpec::Naturals => {
                    if !at.contains_key("default_row") {
                        return Err(key_error(
                            kind_entry,
                            "missing tail descriptor: markov families over the naturals need 'default_row'",
                        ));
                    }
                }
            }
        }
        FamilyForm::Product => require("weights")?,
        FamilyForm::Table => {
            if spins == SpinSpec::Naturals {
                return Err(key_error(kind_entry, "table families need finite spins"));
            }
            require("depth")?;
            require("values")?;
        }
    }
    if let SpinSpec::Finite(s) = spins {
        for key in ["root", "default_row", "weights"] {
            if let (Some(e), Some(w)) = (at.get(key), weight_field(&fam, key)) {
                check_finite_weights(e, w, s, key)?;
            }
        }
        if let (Some(e), Some(rows)) = (at.get("kernel"), &fam.kernel) {
            if rows.len() as u64 != s {
                return Err(ParseError::new(
                    e.line,
                    e.value_col,
                    format!("kernel has {} rows for {s} spins", rows.len()),
                ));
            }
            for (q, row) in rows.iter().enumerate() {
                check_finite_weights(e, row, s, &format!("kernel row {q}"))?;
                if row.explicit_len() as u64 != s {
                    return Err(ParseError::new(
                        e.line,
                        e.value_col,
                        format!("kernel row {q} has {} entries for {s} spins", row.explicit_len()),
                    ));
                }
            }
        }
        if let (Some(e), Some(vs), Some(depth)) = (at.get("values"), &fam.values, fam.depth) {
            let sites = TreeGeometry::new(order)
                .and_then(|t| t.ball_size(depth))
                .map_err(|err| ParseError::new(e.line, e.key_col, err.to_string()))?;
            let expected = u32::try_from(sites).ok().and_then(|n| s.checked_pow(n));
            if expected != Some(vs.len() as u64) {
                return Err(ParseError::new(
                    e.line,
                    e.value_col,
                    format!("table at depth {depth} needs {s}^{sites} values, found {}", vs.len()),
                ));
            }
        }
    }
    if form == FamilyForm::MarkovProb {
        let spin_set = spins.spin_set();
        let rows = fam.kernel.iter().flatten().chain(fam.default_row.iter());
        for (q, row) in rows.enumerate() {
            let total = row.total(spin_set);
            if total != Ext::one() {
                let e = at.get("kernel").or(at.get("default_row")).expect("rows were given");
                let label = if q < fam.kernel.as_ref().map_or(0, Vec::len) {
                    format!("kernel row {q}")
                } else {
                    "default_row".to_string()
                };
                return Err(ParseError::new(
                    e.line,
                    e.value_col,
                    format!("{label} sums to {}, not 1, under kind = markov-prob", total.render()),
                ));
            }
        }
    }
    Ok(fam)
}

fn weight_field<'a>(fam: &'a FamilySpec, key: &str) -> Option<&'a Weights> {
    match key {
        "root" => fam.root.as_ref(),
        "default_row" => fam.default_row.as_ref(),
        "weights" => fam.weights.as_ref(),
        _ => None,
    }
}

fn check_finite_weights(e: &Entry, w: &Weights, s: u64, label: &str) -> PResult<()> {
    if w.tail().is_some() {
        return Err(ParseError::new(
            e.line,
            e.value_col,
            format!("{label}: tail descriptors need kind = nat spins"),
        ));
    }
    if w.explicit_len() as u64 > s {
        return Err(ParseError::new(
            e.line,
            e.value_col,
            format!("{label} has {} entries for {s} spins", w.explicit_len()),
        ));
    }
    Ok(())
}
