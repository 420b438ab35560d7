//! Extensions of families with infinite or non-unit mass through disjoint
//! covers by finite-mass cylinders.
//!
//! For a cover `{A_n}` of `Ω` the candidate extension is
//! `μ^{(Ω)}(E) = Σ_n μ^{(A_n)}(E)`, where `μ^{(A)}` is the extension of the
//! finite family `μ_k^{(A)}(E_k) = μ_m(E_k ∩ A)`, `m = max(base(A), k)`.
//! Every term is non-negative, so partial sums only grow; a value is
//! reported as exact, as converged with a certified tail bound, as
//! exceeding a user bound, or as inconclusive.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num::{One, Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cylinder::{CylinderSet, SiteConstraint, SpinSet};
use crate::error::{Error, Result};
use crate::extension::ExtensionHandle;
use crate::measure::{check_consistency, CheckMode, ConsistencyReport, MeasureFamily, VolumeMeasure};
use crate::sample::CylinderSampler;
use crate::tree::Vertex;
use crate::value::{fmt_rational, int, pow2_neg, Ext, Rational};

pub const DEFAULT_TERM_BUDGET: usize = 1_000_000;
pub const DEFAULT_BOUND: i64 = 1000;
/// Exponent of the default tolerance `2^-40`.
pub const DEFAULT_TOLERANCE_EXP: u32 = 40;
const TRACE_LEN: usize = 64;
/// Generated slices whose masses are checked when a cover is validated.
const SPOT_CHECKED: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesOptions {
    pub tolerance: Rational,
    pub term_budget: usize,
    pub bound: Rational,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions {
            tolerance: pow2_neg(DEFAULT_TOLERANCE_EXP),
            term_budget: DEFAULT_TERM_BUDGET,
            bound: int(DEFAULT_BOUND),
        }
    }
}

/// Declared bound on the terms of a generated cover.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TailPolicy {
    None,
    /// `term_n ≤ first · ratio^(n - start)` for `n ≥ start`, `ratio < 1`.
    Geometric {
        start: usize,
        first: Rational,
        ratio: Rational,
    },
}

impl TailPolicy {
    /// Bound on `Σ_{n ≥ from} term_n`.
    fn bound_from(&self, from: usize) -> Option<Rational> {
        match self {
            TailPolicy::None => None,
            TailPolicy::Geometric { start, first, ratio } => {
                let skip = from.max(*start) - start;
                let head = first * num::pow(ratio.clone(), skip);
                let tail = head / (Rational::one() - ratio);
                // Terms before `start` are not covered by the descriptor.
                (from >= *start).then_some(tail)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoverParts {
    /// A finite list of pairwise-disjoint cylinders.
    Explicit(Vec<CylinderSet>),
    /// `A_n = {σ(vertex) ∈ {g·n, …, g·n + g − 1}}` with `g = group`.
    SiteSlices { vertex: Vertex, group: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cover {
    parts: CoverParts,
    tail: TailPolicy,
}

impl Cover {
    pub fn explicit(parts: Vec<CylinderSet>) -> Self {
        Cover {
            parts: CoverParts::Explicit(parts),
            tail: TailPolicy::None,
        }
    }

    /// One slice per spin value at `vertex`.
    pub fn slices(vertex: Vertex) -> Self {
        Cover {
            parts: CoverParts::SiteSlices { vertex, group: 1 },
            tail: TailPolicy::None,
        }
    }

    /// Slices of `group` consecutive spin values at `vertex`.
    pub fn groups(vertex: Vertex, group: u64) -> Result<Self> {
        if group == 0 {
            return Err(Error::InvalidParameter("slice group size must be positive".into()));
        }
        Ok(Cover {
            parts: CoverParts::SiteSlices { vertex, group },
            tail: TailPolicy::None,
        })
    }

    pub fn with_tail(mut self, tail: TailPolicy) -> Result<Self> {
        if let TailPolicy::Geometric { first, ratio, .. } = &tail {
            if first.is_negative() || ratio.is_negative() || *ratio >= Rational::one() {
                return Err(Error::InvalidParameter(format!(
                    "geometric tail needs first >= 0 and 0 <= ratio < 1, got {} and {}",
                    fmt_rational(first),
                    fmt_rational(ratio)
                )));
            }
        }
        self.tail = tail;
        Ok(self)
    }

    pub fn parts(&self) -> &CoverParts {
        &self.parts
    }

    pub fn tail(&self) -> &TailPolicy {
        &self.tail
    }

    /// Number of parts, or `None` for an infinite generator.
    pub fn len(&self, spins: SpinSet) -> Option<usize> {
        match &self.parts {
            CoverParts::Explicit(p) => Some(p.len()),
            CoverParts::SiteSlices { group, .. } => spins.size().map(|s| s.div_ceil(*group) as usize),
        }
    }

    pub fn is_empty(&self, spins: SpinSet) -> bool {
        self.len(spins) == Some(0)
    }

    /// `A_n`, or `None` past the end of a finite cover.
    pub fn part(&self, n: usize, spins: SpinSet) -> Option<CylinderSet> {
        match &self.parts {
            CoverParts::Explicit(p) => p.get(n).cloned(),
            CoverParts::SiteSlices { vertex, group } => {
                let lo = (n as u64).checked_mul(*group)?;
                let hi = lo.checked_add(*group)?;
                let hi = spins.size().map_or(hi, |s| hi.min(s));
                if lo >= hi {
                    return None;
                }
                let c = SiteConstraint::In((lo..hi).collect()).normalize(spins);
                CylinderSet::site(spins, *vertex, c).ok()
            }
        }
    }

    /// Count of leading parts outside of which `set` has no mass, when finite.
    fn support_end(&self, set: &CylinderSet) -> Option<usize> {
        match &self.parts {
            CoverParts::Explicit(p) => Some(p.len()),
            CoverParts::SiteSlices { vertex, group } => {
                if let Some(n) = self.len(set.spins()) {
                    return Some(n);
                }
                let mut last = 0u64;
                for r in set.rectangles() {
                    match r.constraint(*vertex) {
                        SiteConstraint::In(s) => last = last.max(s.iter().max()? / group + 1),
                        _ => return None,
                    }
                }
                Some(last as usize)
            }
        }
    }

    pub fn describe(&self) -> String {
        let base = match &self.parts {
            CoverParts::Explicit(p) => format!("explicit({} parts)", p.len()),
            CoverParts::SiteSlices { vertex, group: 1 } => format!("slices({vertex})"),
            CoverParts::SiteSlices { vertex, group } => format!("groups({vertex},{group})"),
        };
        match &self.tail {
            TailPolicy::None => base,
            TailPolicy::Geometric { start, first, ratio } => format!(
                "{base} tail=geom({},{}) from {start}",
                fmt_rational(first),
                fmt_rational(ratio)
            ),
        }
    }
}

/// Depth-indexed measures of a family, built once and shared.
#[derive(Debug)]
struct Volumes {
    family: MeasureFamily,
    cache: Mutex<HashMap<usize, Arc<VolumeMeasure>>>,
}

impl Volumes {
    fn new(family: MeasureFamily) -> Self {
        Volumes {
            family,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn at(&self, depth: usize) -> Result<Arc<VolumeMeasure>> {
        if let Some(v) = self.cache.lock().expect("volume cache").get(&depth) {
            return Ok(v.clone());
        }
        let v = Arc::new(self.family.at(depth)?);
        self.cache.lock().expect("volume cache").insert(depth, v.clone());
        Ok(v)
    }

    fn depth_of(&self, set: &CylinderSet) -> usize {
        set.base_depth(self.family.tree())
    }

    /// Field value `μ(E)` through the base of `E`.
    fn direct(&self, set: &CylinderSet) -> Result<Ext> {
        self.at(self.depth_of(set))?.measure(set)
    }

    /// `μ^{(A)}(E) = μ_m(E ∩ A)`, `m = max(base(E), base(A))`.
    fn conditioned(&self, set: &CylinderSet, part: &CylinderSet) -> Result<Rational> {
        let m = self.depth_of(set).max(self.depth_of(part));
        self.at(m)?
            .measure(&set.intersect(part))?
            .into_finite()
            .ok_or_else(|| Error::InfiniteMass(format!("cover part {part}")))
    }
}

fn finite_mass(v: &Volumes, set: &CylinderSet) -> Result<Rational> {
    v.direct(set)?
        .into_finite()
        .ok_or_else(|| Error::InfiniteMass(format!("{set} has infinite mass")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverCheck {
    /// Masses of every part (finite covers) or of the spot-checked prefix.
    pub masses: Vec<Rational>,
    /// Every part was checked.
    pub complete: bool,
}

/// Disjointness, exhaustion of `Ω`, and finite part masses.
pub fn validate_cover(fam: &MeasureFamily, cover: &Cover) -> Result<CoverCheck> {
    validate_with(&Volumes::new(fam.clone()), cover)
}

fn validate_with(v: &Volumes, cover: &Cover) -> Result<CoverCheck> {
    let spins = v.family.spins();
    let tree = v.family.tree();
    match &cover.parts {
        CoverParts::Explicit(parts) => {
            if parts.iter().any(|p| p.spins() != spins) {
                return Err(Error::SpinMismatch);
            }
            for i in 0..parts.len() {
                for j in i + 1..parts.len() {
                    if !parts[i].is_disjoint(&parts[j]) {
                        return Err(Error::NotDisjoint(i, j));
                    }
                }
            }
            let union = parts.iter().fold(CylinderSet::empty(spins), |a, p| a.union(p));
            if !union.is_full() && !union.semantic_eq(&CylinderSet::full(spins))? {
                return Err(Error::InvalidParameter(format!(
                    "cover parts do not exhaust the configuration space; uncovered: {}",
                    union.complement()?
                )));
            }
            let masses = parts.iter().map(|p| finite_mass(v, p)).collect::<Result<_>>()?;
            Ok(CoverCheck {
                masses,
                complete: true,
            })
        }
        CoverParts::SiteSlices { vertex, .. } => {
            if tree.level(*vertex) > v.family.defined_to() {
                return Err(Error::VertexOutOfRange(vertex.index()));
            }
            let count = cover.len(spins);
            let checked = count.unwrap_or(SPOT_CHECKED);
            let masses = (0..checked)
                .map_while(|n| cover.part(n, spins))
                .map(|p| finite_mass(v, &p))
                .collect::<Result<_>>()?;
            Ok(CoverCheck {
                masses,
                complete: count.is_some(),
            })
        }
    }
}

/// The finite family `{μ_k^{(A)}}` for a finite-mass cylinder `A`.
#[derive(Debug, Clone)]
pub struct ConditionalExtension {
    base: MeasureFamily,
    set: CylinderSet,
    mass: Rational,
    derived: MeasureFamily,
    report: ConsistencyReport,
}

/// Depth to which conditional families are checked by default.
pub const CONDITIONAL_PROBE_DEPTH: usize = 2;

pub fn conditional_family(fam: &MeasureFamily, set: &CylinderSet) -> Result<ConditionalExtension> {
    conditional_family_to(fam, set, CONDITIONAL_PROBE_DEPTH)
}

/// Builds `{μ_k^{(A)}}` and checks, for `k ≤ probe_depth`: constant mass
/// `μ(A)`, agreement of two evaluation depths `m`, and consistency.
pub fn conditional_family_to(
    fam: &MeasureFamily,
    set: &CylinderSet,
    probe_depth: usize,
) -> Result<ConditionalExtension> {
    if set.spins() != fam.spins() {
        return Err(Error::SpinMismatch);
    }
    let volumes = Volumes::new(fam.clone());
    let mass = finite_mass(&volumes, set)?;
    let derived = MeasureFamily::conditional(fam.clone(), set.clone())?;
    let probe_depth = probe_depth.min(derived.defined_to());
    let set_depth = volumes.depth_of(set);
    for k in 0..=probe_depth {
        let got = derived.at(k)?.mass()?;
        if got != Ext::Finite(mass.clone()) {
            return Err(Error::Inconsistent(format!(
                "conditional mass at depth {k} is {}, expected {}",
                got.render(),
                fmt_rational(&mass)
            )));
        }
        let m = set_depth.max(k);
        if m < derived.defined_to() {
            let near = derived.at_with_eval_depth(k, Some(m))?;
            let far = derived.at_with_eval_depth(k, Some(m + 1))?;
            for probe in probe_sets(fam, k)? {
                let (a, b) = (near.measure(&probe)?, far.measure(&probe)?);
                if a != b {
                    return Err(Error::Inconsistent(format!(
                        "conditional value of {probe} at depth {k} depends on the evaluation depth: {} at {m}, {} at {}",
                        a.render(),
                        b.render(),
                        m + 1
                    )));
                }
            }
        }
    }
    let report = check_consistency(&derived, probe_depth.max(1).min(derived.defined_to()), CheckMode::Auto)?;
    if let Some(v) = &report.first_violation {
        return Err(Error::Inconsistent(format!(
            "conditional family fails projection from depth {} to {} on {}",
            v.fine, v.coarse, v.base
        )));
    }
    Ok(ConditionalExtension {
        base: fam.clone(),
        set: set.clone(),
        mass,
        derived,
        report,
    })
}

/// Whole space and single-site events on `V_k`.
fn probe_sets(fam: &MeasureFamily, k: usize) -> Result<Vec<CylinderSet>> {
    let spins = fam.spins();
    let values = spins.size().unwrap_or(4).min(4);
    let mut out = vec![CylinderSet::full(spins)];
    for v in fam.tree().ball_vertices(k)? {
        for q in 0..values {
            out.push(CylinderSet::single_site(spins, Vertex(v), q)?);
        }
    }
    Ok(out)
}

impl ConditionalExtension {
    pub fn set(&self) -> &CylinderSet {
        &self.set
    }

    pub fn mass(&self) -> &Rational {
        &self.mass
    }

    pub fn family(&self) -> &MeasureFamily {
        &self.derived
    }

    pub fn base(&self) -> &MeasureFamily {
        &self.base
    }

    pub fn consistency(&self) -> &ConsistencyReport {
        &self.report
    }

    /// `μ^{(A)}(E)`.
    pub fn value(&self, event: &CylinderSet) -> Result<Rational> {
        Volumes::new(self.base.clone()).conditioned(event, &self.set)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestrictionReport {
    /// `μ^{(A)}(E)`.
    pub conditioned: Rational,
    /// `μ^{(A′)}(E ∩ A)`.
    pub via_superset: Rational,
    /// `μ(E ∩ A)` on the field.
    pub direct: Ext,
    pub holds: bool,
}

/// `μ^{(A′)}(E ∩ A) = μ^{(A)}(E) = μ(E ∩ A)` for `A ⊆ A′`.
pub fn restriction_identity_check(
    cond: &ConditionalExtension,
    superset: &CylinderSet,
    event: &CylinderSet,
) -> Result<RestrictionReport> {
    if !cond.set.is_subset(superset)? {
        return Err(Error::NotSubset(format!("{} is not contained in {superset}", cond.set)));
    }
    let wide = conditional_family(&cond.base, superset)?;
    let restricted = event.intersect(&cond.set);
    let conditioned = cond.value(event)?;
    let via_superset = wide.value(&restricted)?;
    let direct = Volumes::new(cond.base.clone()).direct(&restricted)?;
    Ok(RestrictionReport {
        holds: conditioned == via_superset && direct == Ext::Finite(conditioned.clone()),
        conditioned,
        via_superset,
        direct,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum SeriesOutcome {
    /// Only finitely many terms can be non-zero; the sum is exact.
    Exact(Rational),
    /// The value lies in `[partial, partial + tail_bound]`, `tail_bound < tolerance`.
    Converged { partial: Rational, tail_bound: Rational },
    /// Partial sums reached the user bound.
    DivergesBeyond { bound: Rational, partial: Rational },
    /// Term budget exhausted without a certificate.
    Inconclusive { partial: Rational },
}

impl SeriesOutcome {
    /// Certified interval containing the series value, if any.
    pub fn interval(&self) -> Option<(Rational, Rational)> {
        match self {
            SeriesOutcome::Exact(v) => Some((v.clone(), v.clone())),
            SeriesOutcome::Converged { partial, tail_bound } => {
                Some((partial.clone(), partial + tail_bound))
            }
            _ => None,
        }
    }

    pub fn partial(&self) -> &Rational {
        match self {
            SeriesOutcome::Exact(v) => v,
            SeriesOutcome::Converged { partial, .. }
            | SeriesOutcome::DivergesBeyond { partial, .. }
            | SeriesOutcome::Inconclusive { partial } => partial,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SeriesOutcome::Exact(_) => "exact",
            SeriesOutcome::Converged { .. } => "converged",
            SeriesOutcome::DivergesBeyond { .. } => "diverges-beyond",
            SeriesOutcome::Inconclusive { .. } => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesReport {
    pub outcome: SeriesOutcome,
    pub terms_used: usize,
    /// Leading partial sums in cover order.
    pub trace: Vec<Rational>,
}

/// `μ^{(Ω)}` for a family and a validated cover of `Ω`.
#[derive(Debug)]
pub struct SigmaFiniteExtension {
    volumes: Volumes,
    cover: Cover,
    check: CoverCheck,
    options: SeriesOptions,
}

pub fn sigma_extension(fam: &MeasureFamily, cover: &Cover) -> Result<SigmaFiniteExtension> {
    let volumes = Volumes::new(fam.clone());
    let check = validate_with(&volumes, cover)?;
    Ok(SigmaFiniteExtension {
        volumes,
        cover: cover.clone(),
        check,
        options: SeriesOptions::default(),
    })
}

impl SigmaFiniteExtension {
    pub fn with_options(mut self, options: SeriesOptions) -> Self {
        self.options = options;
        self
    }

    pub fn family(&self) -> &MeasureFamily {
        &self.volumes.family
    }

    pub fn cover(&self) -> &Cover {
        &self.cover
    }

    pub fn cover_check(&self) -> &CoverCheck {
        &self.check
    }

    pub fn options(&self) -> &SeriesOptions {
        &self.options
    }

    /// The verified conditional family of part `n`.
    pub fn part(&self, n: usize) -> Result<ConditionalExtension> {
        let spins = self.family().spins();
        let a = self
            .cover
            .part(n, spins)
            .ok_or_else(|| Error::InvalidParameter(format!("cover has no part {n}")))?;
        conditional_family(self.family(), &a)
    }

    /// `μ^{(A_n)}(E)`.
    pub fn term(&self, event: &CylinderSet, n: usize) -> Result<Rational> {
        match self.cover.part(n, event.spins()) {
            Some(a) => self.volumes.conditioned(event, &a),
            None => Ok(Rational::zero()),
        }
    }

    /// `Σ_n μ^{(A_n)}(E)` in cover order.
    pub fn evaluate(&self, event: &CylinderSet) -> Result<SeriesReport> {
        if event.spins() != self.family().spins() {
            return Err(Error::SpinMismatch);
        }
        let mut partial = Rational::zero();
        let mut trace = Vec::new();
        let push = |partial: &Rational, trace: &mut Vec<Rational>| {
            if trace.len() < TRACE_LEN {
                trace.push(partial.clone());
            }
        };
        if let Some(end) = self.cover.support_end(event) {
            for n in 0..end {
                partial += self.term(event, n)?;
                push(&partial, &mut trace);
            }
            return Ok(SeriesReport {
                outcome: SeriesOutcome::Exact(partial),
                terms_used: end,
                trace,
            });
        }
        // By finite additivity Σ_{n<N} μ(E ∩ A_n) + μ(E \ ∪_{n<N} A_n) = μ(E),
        // so a finite field value bounds every tail.
        let direct = self.volumes.direct(event)?.into_finite();
        let opts = &self.options;
        for n in 0..opts.term_budget {
            partial += self.term(event, n)?;
            push(&partial, &mut trace);
            let used = n + 1;
            if partial >= opts.bound {
                return Ok(SeriesReport {
                    outcome: SeriesOutcome::DivergesBeyond {
                        bound: opts.bound.clone(),
                        partial,
                    },
                    terms_used: used,
                    trace,
                });
            }
            let declared = self.cover.tail.bound_from(used);
            let from_field = direct.as_ref().map(|d| d - &partial);
            let tail = match (declared, from_field) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
            if let Some(t) = tail {
                if t < opts.tolerance {
                    return Ok(SeriesReport {
                        outcome: SeriesOutcome::Converged {
                            partial,
                            tail_bound: t,
                        },
                        terms_used: used,
                        trace,
                    });
                }
            }
        }
        Ok(SeriesReport {
            outcome: SeriesOutcome::Inconclusive { partial },
            terms_used: opts.term_budget,
            trace,
        })
    }

    /// Parts that can meet `E`, when finitely many can.
    fn relevant_parts(&self, event: &CylinderSet) -> Option<Vec<CylinderSet>> {
        let end = self.cover.support_end(event)?;
        (0..end).map(|n| self.cover.part(n, event.spins())).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Agreement {
    Exact,
    WithinTails,
    Disagree,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceReport {
    pub first: SeriesReport,
    pub second: SeriesReport,
    /// `Σ_n Σ_k μ(E ∩ A_n ∩ A′_k)` when both supports are finite.
    pub double_sum: Option<Rational>,
    pub agreement: Agreement,
}

/// Compares `μ^{(Ω)}(E)` under two covers.
pub fn cover_independence(
    fam: &MeasureFamily,
    first: &Cover,
    second: &Cover,
    event: &CylinderSet,
    options: &SeriesOptions,
) -> Result<IndependenceReport> {
    let a = sigma_extension(fam, first)?.with_options(options.clone());
    let b = sigma_extension(fam, second)?.with_options(options.clone());
    let (ra, rb) = (a.evaluate(event)?, b.evaluate(event)?);
    let double_sum = match (a.relevant_parts(event), b.relevant_parts(event)) {
        (Some(pa), Some(pb)) => {
            let mut total = Rational::zero();
            for x in &pa {
                let ex = event.intersect(x);
                for y in &pb {
                    total += a.volumes.conditioned(&ex, y)?;
                }
            }
            Some(total)
        }
        _ => None,
    };
    let agreement = match (&ra.outcome, &rb.outcome) {
        (SeriesOutcome::Exact(x), SeriesOutcome::Exact(y)) => {
            if x == y && double_sum.as_ref().is_none_or(|d| d == x) {
                Agreement::Exact
            } else {
                Agreement::Disagree
            }
        }
        (x, y) => match (x.interval(), y.interval()) {
            (Some((lo1, hi1)), Some((lo2, hi2))) => {
                if lo1 <= hi2 && lo2 <= hi1 {
                    Agreement::WithinTails
                } else {
                    Agreement::Disagree
                }
            }
            _ => Agreement::Undetermined,
        },
    };
    Ok(IndependenceReport {
        first: ra,
        second: rb,
        double_sum,
        agreement,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    /// A certified counterexample: the cover sum provably differs from `μ(E)`.
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub direct: Ext,
    pub series: SeriesReport,
    pub verdict: Verdict,
}

/// `μ(E) = Σ_n μ(E ∩ A_n)`: the field value against the cover sum.
pub fn condition_2_7_check(
    fam: &MeasureFamily,
    cover: &Cover,
    event: &CylinderSet,
    options: &SeriesOptions,
) -> Result<ConditionReport> {
    let ext = sigma_extension(fam, cover)?.with_options(options.clone());
    condition_with(&ext, event)
}

fn condition_with(ext: &SigmaFiniteExtension, event: &CylinderSet) -> Result<ConditionReport> {
    let direct = ext.volumes.direct(event)?;
    let series = ext.evaluate(event)?;
    let partial = series.outcome.partial();
    let verdict = match &direct {
        Ext::Infinite => match series.outcome.interval() {
            Some(_) => Verdict::Fail,
            None => Verdict::Inconclusive,
        },
        Ext::Finite(d) if partial > d => Verdict::Fail,
        Ext::Finite(d) => match series.outcome.interval() {
            Some((lo, hi)) if lo <= *d && *d <= hi => Verdict::Pass,
            Some(_) => Verdict::Fail,
            None => Verdict::Inconclusive,
        },
    };
    Ok(ConditionReport {
        direct,
        series,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremCover {
    pub cover: Cover,
    pub check: CoverCheck,
    /// Probe events on which the condition was re-verified.
    pub probes_passed: usize,
}

/// Lifts a finite-mass partition of `Ω_{n0}` to a cover of `Ω` and
/// re-verifies the sum condition on `probes` seeded random events.
pub fn theorem_4_3_cover(
    fam: &MeasureFamily,
    n0: usize,
    slices: &Cover,
    probes: usize,
    seed: u64,
) -> Result<TheoremCover> {
    let tree = fam.tree();
    let spins = fam.spins();
    let pinned = match &slices.parts {
        CoverParts::Explicit(parts) => {
            if let Some(p) = parts.iter().find(|p| p.base_depth(tree) > n0) {
                return Err(Error::BaseTooDeep {
                    base: p.base_depth(tree),
                    depth: n0,
                });
            }
            None
        }
        CoverParts::SiteSlices { vertex, .. } => {
            if tree.level(*vertex) > n0 {
                return Err(Error::BaseTooDeep {
                    base: tree.level(*vertex),
                    depth: n0,
                });
            }
            spins.size().is_none().then_some(*vertex)
        }
    };
    let ext = sigma_extension(fam, slices)?;
    let mut sampler = CylinderSampler::new(n0.max(1).min(fam.defined_to()));
    if let Some(v) = pinned {
        sampler = sampler.pin(v);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..probes {
        let e = sampler.sample(&mut rng, spins, tree)?;
        let r = condition_with(&ext, &e)?;
        if r.verdict != Verdict::Pass {
            return Err(Error::Inconsistent(format!(
                "sum condition {} on {e}: field value {}, cover sum {}",
                r.verdict.name(),
                r.direct.render(),
                fmt_rational(r.series.outcome.partial())
            )));
        }
    }
    Ok(TheoremCover {
        cover: slices.clone(),
        check: ext.check,
        probes_passed: probes,
    })
}

/// `c ·` (extension of the normalized family `μ_n / c`), with `c = μ_n(Ω_n)`
/// checked constant for `n ≤ depth`. A zero family yields the zero measure.
pub fn normalized_extension(fam: &MeasureFamily, depth: usize) -> Result<ExtensionHandle> {
    let depth = depth.min(fam.defined_to());
    let masses = fam.masses(depth)?;
    let c = masses[0]
        .finite()
        .cloned()
        .ok_or_else(|| Error::InfiniteMass("normalization needs a finite total mass".into()))?;
    if let Some((n, m)) = masses.iter().enumerate().find(|(_, m)| **m != Ext::Finite(c.clone())) {
        return Err(Error::Inconsistent(format!(
            "total mass {} at depth {n} differs from {} at depth 0",
            m.render(),
            fmt_rational(&c)
        )));
    }
    if c.is_zero() {
        return ExtensionHandle::auto(fam.clone(), depth.max(1))?.scaled(&Rational::zero());
    }
    ExtensionHandle::auto(fam.normalized_by(&c)?, depth.max(1))?.scaled(&c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::TransitionKernel;
    use crate::tree::TreeGeometry;
    use crate::value::ratio;
    use crate::weights::Weights;

    fn naturals() -> MeasureFamily {
        let g = TreeGeometry::new(2).unwrap();
        let root = Weights::constant(Ext::one(), SpinSet::Naturals);
        let row = Weights::with_tail(vec![], ratio(1, 2), ratio(1, 2)).unwrap();
        MeasureFamily::markov(g, root, TransitionKernel::naturals(vec![], row).unwrap()).unwrap()
    }

    fn site(v: usize, c: SiteConstraint) -> CylinderSet {
        CylinderSet::site(SpinSet::Naturals, Vertex(v), c).unwrap()
    }

    fn eq(v: usize, q: u64) -> CylinderSet {
        CylinderSet::single_site(SpinSet::Naturals, Vertex(v), q).unwrap()
    }

    #[test]
    fn slice_parts() {
        let c = Cover::groups(Vertex(0), 2).unwrap();
        assert_eq!(c.part(1, SpinSet::Naturals).unwrap(), site(0, SiteConstraint::In([2, 3].into())));
        assert_eq!(c.len(SpinSet::Finite(5)), Some(3));
        assert!(c.part(3, SpinSet::Finite(5)).is_none());
    }

    #[test]
    fn root_slice_is_a_single_term() {
        let ext = sigma_extension(&naturals(), &Cover::slices(Vertex(0))).unwrap();
        let r = ext.evaluate(&eq(0, 3)).unwrap();
        assert_eq!(r.outcome, SeriesOutcome::Exact(int(1)));
    }

    #[test]
    fn unpinned_event_exceeds_bound() {
        let ext = sigma_extension(&naturals(), &Cover::slices(Vertex(0))).unwrap();
        let r = ext.evaluate(&eq(1, 0)).unwrap();
        assert_eq!(
            r.outcome,
            SeriesOutcome::DivergesBeyond {
                bound: int(1000),
                partial: int(1000)
            }
        );
        assert_eq!(r.terms_used, 2000);
        assert!(r.trace.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn explicit_cover_must_exhaust() {
        let parts = vec![eq(0, 0), eq(0, 1)];
        let err = sigma_extension(&naturals(), &Cover::explicit(parts)).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
        let overlapping = vec![eq(0, 0), site(0, SiteConstraint::Any)];
        assert_eq!(
            sigma_extension(&naturals(), &Cover::explicit(overlapping)).unwrap_err(),
            Error::NotDisjoint(0, 1)
        );
    }

    #[test]
    fn conditional_family_on_a_root_value() {
        let c = conditional_family(&naturals(), &eq(0, 3)).unwrap();
        assert_eq!(c.mass(), &int(1));
        assert_eq!(c.value(&eq(1, 0)).unwrap(), ratio(1, 2));
        assert!(matches!(
            conditional_family(&naturals(), &eq(1, 0)),
            Err(Error::InfiniteMass(_))
        ));
    }

    #[test]
    fn declared_tail_certifies_convergence() {
        // Product with weights 2^-(q+1): slice q at the root has mass 2^-(q+1).
        let g = TreeGeometry::new(1).unwrap();
        let w = Weights::with_tail(vec![], ratio(1, 2), ratio(1, 2)).unwrap();
        let fam = MeasureFamily::product(g, SpinSet::Naturals, w).unwrap();
        let cover = Cover::slices(Vertex(0))
            .with_tail(TailPolicy::Geometric {
                start: 0,
                first: ratio(1, 2),
                ratio: ratio(1, 2),
            })
            .unwrap();
        let ext = sigma_extension(&fam, &cover).unwrap();
        let r = ext.evaluate(&eq(1, 0)).unwrap();
        match r.outcome {
            SeriesOutcome::Converged { partial, tail_bound } => {
                assert!(tail_bound < pow2_neg(40));
                assert!(partial <= ratio(1, 2) && ratio(1, 2) <= &partial + &tail_bound);
            }
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn zero_family_normalizes_to_zero() {
        let g = TreeGeometry::new(2).unwrap();
        let w = Weights::finite(vec![int(0), int(0)]).unwrap();
        let fam = MeasureFamily::product(g, SpinSet::Finite(2), w).unwrap();
        let h = normalized_extension(&fam, 2).unwrap();
        let e = CylinderSet::single_site(SpinSet::Finite(2), Vertex(0), 1).unwrap();
        assert_eq!(h.mu(&e).unwrap(), Ext::zero());
    }
}
