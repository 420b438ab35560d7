//! Configurations on the tree and the field of cylinder sets.
//!
//! A [`CylinderSet`] is stored as a finite union of [`Rectangle`]s, each of
//! which constrains finitely many sites to a set of spins. This form covers
//! both finite spin sets and the denumerable set `{0, 1, 2, …}`: complements
//! of finite constraints over the naturals are kept as `NotIn` constraints.
//!
//! All Boolean operations are semantic. Emptiness is decidable on canonical
//! rectangles (a rectangle is empty iff some site admits no spin), so
//! inclusion and equality reduce to emptiness of set differences.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::{BigInt, One, Zero};

use crate::error::{Error, Result};
use crate::tree::{TreeGeometry, Vertex};
use crate::value::Rational;

pub type Spin = u64;

/// Default cap on the number of atoms enumerated in one call (2^24).
pub const DEFAULT_ATOM_BUDGET: u128 = 1 << 24;

/// Default cap on the number of rectangles produced while normalizing.
pub const DEFAULT_RECT_BUDGET: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpinSet {
    /// `{0, …, s-1}`.
    Finite(u64),
    /// `{0, 1, 2, …}`.
    Naturals,
}

impl SpinSet {
    pub fn finite(size: u64) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidParameter("spin set must be non-empty".into()));
        }
        Ok(SpinSet::Finite(size))
    }

    pub fn size(&self) -> Option<u64> {
        match self {
            SpinSet::Finite(s) => Some(*s),
            SpinSet::Naturals => None,
        }
    }

    pub fn contains(&self, q: Spin) -> bool {
        match self {
            SpinSet::Finite(s) => q < *s,
            SpinSet::Naturals => true,
        }
    }

    pub fn check(&self, q: Spin) -> Result<()> {
        match self {
            SpinSet::Finite(s) if q >= *s => Err(Error::SpinOutOfRange { spin: q, size: *s }),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for SpinSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpinSet::Finite(s) => write!(f, "{{0..{}}}", s - 1),
            SpinSet::Naturals => f.write_str("N"),
        }
    }
}

/// Constraint on the spin at one site.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SiteConstraint {
    Any,
    In(BTreeSet<Spin>),
    NotIn(BTreeSet<Spin>),
}

impl SiteConstraint {
    pub fn eq(q: Spin) -> Self {
        SiteConstraint::In(BTreeSet::from([q]))
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, SiteConstraint::In(s) if s.is_empty())
    }

    pub fn admits(&self, q: Spin) -> bool {
        match self {
            SiteConstraint::Any => true,
            SiteConstraint::In(s) => s.contains(&q),
            SiteConstraint::NotIn(s) => !s.contains(&q),
        }
    }

    /// Finite spins: `NotIn` becomes `In` of the complement and `In` of
    /// everything becomes `Any`. Naturals: `NotIn(∅)` becomes `Any`.
    pub fn normalize(self, spins: SpinSet) -> Self {
        match (self, spins) {
            (SiteConstraint::NotIn(s), SpinSet::Finite(n)) => {
                SiteConstraint::In((0..n).filter(|q| !s.contains(q)).collect()).normalize(spins)
            }
            (SiteConstraint::In(s), SpinSet::Finite(n)) if s.len() as u64 == n => {
                SiteConstraint::Any
            }
            (SiteConstraint::NotIn(s), SpinSet::Naturals) if s.is_empty() => SiteConstraint::Any,
            (c, _) => c,
        }
    }

    pub fn intersect(&self, other: &Self, spins: SpinSet) -> Self {
        use SiteConstraint::*;
        let c = match (self, other) {
            (Any, c) | (c, Any) => c.clone(),
            (In(a), In(b)) => In(a.intersection(b).copied().collect()),
            (In(a), NotIn(b)) | (NotIn(b), In(a)) => In(a.difference(b).copied().collect()),
            (NotIn(a), NotIn(b)) => NotIn(a.union(b).copied().collect()),
        };
        c.normalize(spins)
    }

    pub fn union(&self, other: &Self, spins: SpinSet) -> Self {
        use SiteConstraint::*;
        let c = match (self, other) {
            (Any, _) | (_, Any) => Any,
            (In(a), In(b)) => In(a.union(b).copied().collect()),
            (In(a), NotIn(b)) | (NotIn(b), In(a)) => NotIn(b.difference(a).copied().collect()),
            (NotIn(a), NotIn(b)) => NotIn(a.intersection(b).copied().collect()),
        };
        c.normalize(spins)
    }

    /// `None` when the complement is empty (the constraint was `Any`).
    pub fn complement(&self, spins: SpinSet) -> Option<Self> {
        match self {
            SiteConstraint::Any => None,
            SiteConstraint::In(s) => Some(SiteConstraint::NotIn(s.clone()).normalize(spins)),
            SiteConstraint::NotIn(s) => Some(SiteConstraint::In(s.clone())),
        }
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        use SiteConstraint::*;
        match (self, other) {
            (_, Any) => true,
            (Any, _) => false,
            (In(a), In(b)) => a.is_subset(b),
            (In(a), NotIn(b)) => a.is_disjoint(b),
            (NotIn(_), In(_)) => false,
            (NotIn(a), NotIn(b)) => b.is_subset(a),
        }
    }

    /// Explicit list of admitted spins for finite spin sets.
    pub fn values(&self, spins: SpinSet) -> Option<Vec<Spin>> {
        match (self, spins) {
            (SiteConstraint::In(s), _) => Some(s.iter().copied().collect()),
            (c, SpinSet::Finite(n)) => Some((0..n).filter(|&q| c.admits(q)).collect()),
            _ => None,
        }
    }
}

/// A product of per-site constraints. Canonical rectangles store no `Any`
/// entries and no empty `In` sets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Rectangle {
    sites: BTreeMap<Vertex, SiteConstraint>,
}

impl Rectangle {
    /// The whole space.
    pub fn full() -> Self {
        Rectangle::default()
    }

    pub fn constraint(&self, v: Vertex) -> &SiteConstraint {
        self.sites.get(&v).unwrap_or(&SiteConstraint::Any)
    }

    pub fn sites(&self) -> impl Iterator<Item = (Vertex, &SiteConstraint)> + '_ {
        self.sites.iter().map(|(v, c)| (*v, c))
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn max_vertex(&self) -> Option<Vertex> {
        self.sites.keys().next_back().copied()
    }

    /// Constrains `v` further; `None` if the result is empty.
    pub fn restrict(mut self, v: Vertex, c: &SiteConstraint, spins: SpinSet) -> Option<Self> {
        let merged = self.constraint(v).intersect(c, spins);
        if merged.is_empty() {
            return None;
        }
        if merged == SiteConstraint::Any {
            self.sites.remove(&v);
        } else {
            self.sites.insert(v, merged);
        }
        Some(self)
    }

    pub fn intersect(&self, other: &Rectangle, spins: SpinSet) -> Option<Rectangle> {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .sites()
            .try_fold(large.clone(), |acc, (v, c)| acc.restrict(v, c, spins))
    }

    pub fn is_subset(&self, other: &Rectangle) -> bool {
        other.sites().all(|(v, c)| self.constraint(v).is_subset(c))
    }

    /// `self \ other` as pairwise-disjoint rectangles.
    pub fn minus(&self, other: &Rectangle, spins: SpinSet) -> Vec<Rectangle> {
        if self.intersect(other, spins).is_none() {
            return vec![self.clone()];
        }
        let mut out = Vec::new();
        let mut prefix = self.clone();
        for (v, c) in other.sites() {
            if let Some(not_c) = c.complement(spins) {
                if let Some(piece) = prefix.clone().restrict(v, &not_c, spins) {
                    out.push(piece);
                }
            }
            match prefix.restrict(v, c, spins) {
                Some(p) => prefix = p,
                None => break,
            }
        }
        out
    }

    pub fn contains(&self, config: &Configuration) -> bool {
        self.sites()
            .all(|(v, c)| config.get(v).is_some_and(|q| c.admits(q)))
    }

    pub fn base_depth(&self, tree: &TreeGeometry) -> usize {
        self.max_vertex().map_or(0, |v| tree.level(v))
    }
}

/// An element of the cylinder field: a finite union of rectangles over a
/// fixed spin set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CylinderSet {
    spins: SpinSet,
    rects: Vec<Rectangle>,
}

impl CylinderSet {
    pub fn empty(spins: SpinSet) -> Self {
        CylinderSet {
            spins,
            rects: Vec::new(),
        }
    }

    pub fn full(spins: SpinSet) -> Self {
        CylinderSet {
            spins,
            rects: vec![Rectangle::full()],
        }
    }

    /// `{σ : σ(x_m) = q}`.
    pub fn single_site(spins: SpinSet, m: Vertex, q: Spin) -> Result<Self> {
        Self::site(spins, m, SiteConstraint::eq(q))
    }

    pub fn site(spins: SpinSet, v: Vertex, c: SiteConstraint) -> Result<Self> {
        if let SiteConstraint::In(s) | SiteConstraint::NotIn(s) = &c {
            for &q in s {
                spins.check(q)?;
            }
        }
        Ok(Self::from_rects(
            spins,
            Rectangle::full().restrict(v, &c, spins).into_iter().collect(),
        ))
    }

    /// The cylinder over a configuration's base: `{σ : σ|_A = config}`.
    pub fn from_configuration(spins: SpinSet, config: &Configuration) -> Result<Self> {
        let mut r = Rectangle::full();
        for (v, q) in config.iter() {
            spins.check(q)?;
            r = r
                .restrict(v, &SiteConstraint::eq(q), spins)
                .expect("singletons are non-empty");
        }
        Ok(Self::from_rects(spins, vec![r]))
    }

    /// Union of atom cylinders, kept as one rectangle per atom.
    pub fn from_atoms(spins: SpinSet, atoms: &[Configuration]) -> Result<Self> {
        let mut rects = Vec::with_capacity(atoms.len());
        for a in atoms {
            rects.extend(Self::from_configuration(spins, a)?.rects);
        }
        Ok(Self::from_rects_unmerged(spins, rects))
    }

    /// Canonicalizes: merges rectangles that differ at a single site, drops
    /// subsumed ones, then sorts.
    pub fn from_rects(spins: SpinSet, rects: Vec<Rectangle>) -> Self {
        let mut rects = Self::from_rects_unmerged(spins, rects).rects;
        while let Some(merged) = merge_pass(&rects, spins) {
            rects = Self::from_rects_unmerged(spins, merged).rects;
        }
        CylinderSet { spins, rects }
    }

    /// Sorts, dedups and drops subsumed rectangles without merging.
    pub fn from_rects_unmerged(spins: SpinSet, mut rects: Vec<Rectangle>) -> Self {
        rects.sort();
        rects.dedup();
        // Larger rectangles have fewer constraints; test them first.
        rects.sort_by_key(|r| r.len());
        let mut kept: Vec<Rectangle> = Vec::with_capacity(rects.len());
        for r in rects {
            if !kept.iter().any(|k| r.is_subset(k)) {
                kept.push(r);
            }
        }
        kept.sort();
        CylinderSet { spins, rects: kept }
    }

    pub fn spins(&self) -> SpinSet {
        self.spins
    }

    pub fn rectangles(&self) -> &[Rectangle] {
        &self.rects
    }

    pub fn is_empty(&self) -> bool {
        self.rects.is_empty()
    }

    /// Structural test for the canonical form of `Ω`. A union that equals
    /// `Ω` without merging down to one rectangle reports `false`; use
    /// [`CylinderSet::semantic_eq`] against [`CylinderSet::full`] for that.
    pub fn is_full(&self) -> bool {
        self.rects.len() == 1 && self.rects[0].is_empty()
    }

    /// Smallest `n` such that every constrained vertex lies in `V_n`.
    pub fn base_depth(&self, tree: &TreeGeometry) -> usize {
        self.rects
            .iter()
            .map(|r| r.base_depth(tree))
            .max()
            .unwrap_or(0)
    }

    pub fn constrained_vertices(&self) -> BTreeSet<Vertex> {
        self.rects
            .iter()
            .flat_map(|r| r.sites().map(|(v, _)| v))
            .collect()
    }

    fn same_spins(&self, other: &Self) {
        assert_eq!(self.spins, other.spins, "cylinders over different spin sets");
    }

    pub fn union(&self, other: &Self) -> Self {
        self.same_spins(other);
        let rects = self.rects.iter().chain(&other.rects).cloned().collect();
        Self::from_rects(self.spins, rects)
    }

    pub fn intersect(&self, other: &Self) -> Self {
        self.same_spins(other);
        let mut rects = Vec::with_capacity(self.rects.len() * other.rects.len());
        for a in &self.rects {
            for b in &other.rects {
                rects.extend(a.intersect(b, self.spins));
            }
        }
        Self::from_rects(self.spins, rects)
    }

    pub fn complement(&self) -> Result<Self> {
        Self::full(self.spins).difference(self)
    }

    pub fn difference(&self, other: &Self) -> Result<Self> {
        self.same_spins(other);
        let pieces = subtract(&self.rects, &other.rects, self.spins, DEFAULT_RECT_BUDGET)?;
        Ok(Self::from_rects(self.spins, pieces))
    }

    /// Pairwise-disjoint rectangles whose union is this set.
    pub fn disjoint_parts(&self) -> Result<Vec<Rectangle>> {
        let mut out: Vec<Rectangle> = Vec::with_capacity(self.rects.len());
        for r in &self.rects {
            let pieces = subtract(std::slice::from_ref(r), &out, self.spins, DEFAULT_RECT_BUDGET)?;
            out.extend(pieces);
        }
        Ok(out)
    }

    pub fn is_subset(&self, other: &Self) -> Result<bool> {
        self.same_spins(other);
        for r in &self.rects {
            if !subtract(std::slice::from_ref(r), &other.rects, self.spins, DEFAULT_RECT_BUDGET)?
                .is_empty()
            {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.intersect(other).is_empty()
    }

    /// Semantic equality. Errors only when normalization exceeds the
    /// rectangle budget; the answer is never guessed.
    pub fn semantic_eq(&self, other: &Self) -> Result<bool> {
        Ok(self.is_subset(other)? && other.is_subset(self)?)
    }

    pub fn contains(&self, config: &Configuration) -> bool {
        self.rects.iter().any(|r| r.contains(config))
    }

    /// Atoms of the base of this set at depth `n`: every configuration on
    /// `V_n` whose cylinder lies inside the set, in increasing atom-index
    /// order.
    pub fn atoms(&self, tree: &TreeGeometry, n: usize) -> Result<Vec<Configuration>> {
        self.atoms_with_budget(tree, n, DEFAULT_ATOM_BUDGET)
    }

    pub fn atoms_with_budget(
        &self,
        tree: &TreeGeometry,
        n: usize,
        budget: u128,
    ) -> Result<Vec<Configuration>> {
        let s = self
            .spins
            .size()
            .ok_or(Error::FiniteSpinsRequired("atom enumeration"))?;
        let base = self.base_depth(tree);
        if base > n {
            return Err(Error::BaseTooDeep { base, depth: n });
        }
        let sites = tree.ball_size(n)?;
        check_atom_budget(s, sites, budget)?;
        let mut indices = Vec::new();
        for r in self.disjoint_parts()? {
            let choices: Vec<Vec<Spin>> = (0..sites)
                .map(|v| {
                    r.constraint(Vertex(v))
                        .values(self.spins)
                        .expect("finite spins")
                })
                .collect();
            for_each_product(&choices, |vals| indices.push(atom_index(vals, s)));
        }
        indices.sort_unstable();
        Ok(indices
            .into_iter()
            .map(|i| Configuration::from_dense(&atom_values(i, s, sites)))
            .collect())
    }

    /// Re-expresses the set as a union of full-base atoms at depth `n`.
    pub fn lift(&self, tree: &TreeGeometry, n: usize) -> Result<Self> {
        Self::from_atoms(self.spins, &self.atoms(tree, n)?)
    }
}

impl fmt::Display for CylinderSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.rects.is_empty() {
            return f.write_str("false");
        }
        for (i, r) in self.rects.iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            if r.is_empty() {
                f.write_str("true")?;
                continue;
            }
            for (j, (v, c)) in r.sites().enumerate() {
                if j > 0 {
                    f.write_str(" & ")?;
                }
                write_constraint(f, v, c)?;
            }
        }
        Ok(())
    }
}

fn write_constraint(f: &mut fmt::Formatter<'_>, v: Vertex, c: &SiteConstraint) -> fmt::Result {
    let list = |s: &BTreeSet<Spin>| {
        s.iter()
            .map(|q| q.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    match c {
        SiteConstraint::Any => write!(f, "true"),
        SiteConstraint::In(s) if s.len() == 1 => write!(f, "{v}={}", s.first().unwrap()),
        SiteConstraint::In(s) => write!(f, "{v} in {{{}}}", list(s)),
        SiteConstraint::NotIn(s) => write!(f, "{v} notin {{{}}}", list(s)),
    }
}

/// One round of merging: for some site `v`, rectangles identical away from
/// `v` are replaced by a single rectangle with the union of their `v`
/// constraints. `None` when nothing merges.
fn merge_pass(rects: &[Rectangle], spins: SpinSet) -> Option<Vec<Rectangle>> {
    let sites: BTreeSet<Vertex> = rects.iter().flat_map(|r| r.sites.keys().copied()).collect();
    for v in sites {
        let mut groups: BTreeMap<Rectangle, Vec<SiteConstraint>> = BTreeMap::new();
        for r in rects {
            let mut rest = r.clone();
            let c = rest.sites.remove(&v).unwrap_or(SiteConstraint::Any);
            groups.entry(rest).or_default().push(c);
        }
        if groups.len() == rects.len() {
            continue;
        }
        let merged = groups
            .into_iter()
            .map(|(mut rest, cs)| {
                let c = cs
                    .into_iter()
                    .reduce(|a, b| a.union(&b, spins))
                    .expect("non-empty group");
                if c != SiteConstraint::Any {
                    rest.sites.insert(v, c);
                }
                rest
            })
            .collect();
        return Some(merged);
    }
    None
}

/// Removes every rectangle of `cut` from `from`, returning disjoint pieces.
fn subtract(
    from: &[Rectangle],
    cut: &[Rectangle],
    spins: SpinSet,
    budget: usize,
) -> Result<Vec<Rectangle>> {
    let mut out = Vec::new();
    for r in from {
        let mut pieces = vec![r.clone()];
        for c in cut {
            pieces = pieces.iter().flat_map(|p| p.minus(c, spins)).collect();
            if pieces.len() > budget {
                return Err(Error::BudgetExceeded {
                    what: "cylinder normalization",
                    needed: pieces.len() as u128,
                    budget: budget as u128,
                });
            }
            if pieces.is_empty() {
                break;
            }
        }
        out.extend(pieces);
    }
    Ok(out)
}

pub(crate) fn check_atom_budget(s: u64, sites: usize, budget: u128) -> Result<u128> {
    let needed = u32::try_from(sites)
        .ok()
        .and_then(|e| (s as u128).checked_pow(e))
        .unwrap_or(u128::MAX);
    if needed > budget {
        return Err(Error::BudgetExceeded {
            what: "atom enumeration",
            needed,
            budget,
        });
    }
    Ok(needed)
}

/// Mixed-radix index of a configuration on `V_n`, vertex 0 least significant.
pub fn atom_index(values: &[Spin], s: u64) -> usize {
    values
        .iter()
        .rev()
        .fold(0usize, |acc, &q| acc * s as usize + q as usize)
}

pub fn atom_values(mut index: usize, s: u64, sites: usize) -> Vec<Spin> {
    (0..sites)
        .map(|_| {
            let q = (index % s as usize) as Spin;
            index /= s as usize;
            q
        })
        .collect()
}

/// Calls `f` on every element of the Cartesian product of `choices`, with
/// the first coordinate varying fastest.
pub(crate) fn for_each_product(choices: &[Vec<Spin>], mut f: impl FnMut(&[Spin])) {
    if choices.iter().any(|c| c.is_empty()) {
        return;
    }
    let mut pos = vec![0usize; choices.len()];
    let mut cur: Vec<Spin> = choices.iter().map(|c| c[0]).collect();
    loop {
        f(&cur);
        let mut i = 0;
        loop {
            if i == choices.len() {
                return;
            }
            pos[i] += 1;
            if pos[i] < choices[i].len() {
                cur[i] = choices[i][pos[i]];
                break;
            }
            pos[i] = 0;
            cur[i] = choices[i][0];
            i += 1;
        }
    }
}

/// A spin assignment on a finite set of vertices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Configuration {
    values: BTreeMap<Vertex, Spin>,
}

impl Configuration {
    pub fn new() -> Self {
        Self::default()
    }

    /// Assignment on vertices `0..values.len()`.
    pub fn from_dense(values: &[Spin]) -> Self {
        Configuration {
            values: values
                .iter()
                .enumerate()
                .map(|(i, &q)| (Vertex(i), q))
                .collect(),
        }
    }

    pub fn with(mut self, v: Vertex, q: Spin) -> Self {
        self.values.insert(v, q);
        self
    }

    pub fn set(&mut self, v: Vertex, q: Spin) {
        self.values.insert(v, q);
    }

    pub fn get(&self, v: Vertex) -> Option<Spin> {
        self.values.get(&v).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vertex, Spin)> + '_ {
        self.values.iter().map(|(v, q)| (*v, *q))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values on `0..n` if the base covers that range.
    pub fn dense_prefix(&self, n: usize) -> Option<Vec<Spin>> {
        (0..n).map(|i| self.get(Vertex(i))).collect()
    }

    pub fn restrict(&self, n: usize) -> Configuration {
        Configuration {
            values: self.values.range(..Vertex(n)).map(|(v, q)| (*v, *q)).collect(),
        }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.iter().map(|(v, q)| format!("{v}={q}")).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// Truncated value of the metric `ρ(σ, σ') = Σ_n 2^-n · 1[σ(x_n) ≠ σ'(x_n)]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RhoBound {
    /// Sum over the indices that were compared.
    pub partial: Rational,
    /// Upper bound on the contribution of the remaining indices.
    pub tail_bound: Rational,
}

impl RhoBound {
    pub fn upper(&self) -> Rational {
        &self.partial + &self.tail_bound
    }
}

fn pow2_weight(n: usize) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << n)
}

/// `ρ` truncated to the indices of `V_depth`. Both configurations must be
/// defined on the whole ball.
pub fn rho(
    a: &Configuration,
    b: &Configuration,
    tree: &TreeGeometry,
    depth: usize,
) -> Result<RhoBound> {
    let sites = tree.ball_size(depth)?;
    let mut partial = Rational::zero();
    for n in 0..sites {
        let (x, y) = match (a.get(Vertex(n)), b.get(Vertex(n))) {
            (Some(x), Some(y)) => (x, y),
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "configuration undefined at x{n}"
                )))
            }
        };
        if x != y {
            partial += pow2_weight(n);
        }
    }
    Ok(RhoBound {
        partial,
        tail_bound: Rational::new(BigInt::from(2), BigInt::one() << sites),
    })
}

/// Exact `ρ` for two configurations that agree everywhere outside their
/// (common) bases.
pub fn rho_eventually_equal(a: &Configuration, b: &Configuration) -> Result<RhoBound> {
    let sites: BTreeSet<Vertex> = a.iter().chain(b.iter()).map(|(v, _)| v).collect();
    let mut partial = Rational::zero();
    for v in sites {
        match (a.get(v), b.get(v)) {
            (Some(x), Some(y)) => {
                if x != y {
                    partial += pow2_weight(v.0);
                }
            }
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "bases differ at {v}; eventually-equal inputs need a common base"
                )))
            }
        }
    }
    Ok(RhoBound {
        partial,
        tail_bound: Rational::zero(),
    })
}

/// Two full-base cylinders at depth `n` whose intersection is the
/// single-site cylinder `{σ(x_m) = q}`.
///
/// `omega` and `nu` are configurations on `V_n` that agree only at `x_m`
/// (where both equal `q`). The literal cylinders over them are disjoint as
/// soon as `V_n` has a second site, so the pair is built at the level of
/// bases: `left` has base `{τ : τ(x_m) = q} ∪ {ω'}` and `right` has base
/// `{τ : τ(x_m) = q} ∪ {ν'}`, where `ω'`, `ν'` are `omega`, `nu` with the
/// spin at `x_m` changed. The two bases coincide exactly on the slice
/// `τ(x_m) = q`.
#[derive(Debug, Clone)]
pub struct GeneratorPair {
    pub omega: Configuration,
    pub nu: Configuration,
    pub left: CylinderSet,
    pub right: CylinderSet,
}

pub fn generator_decomposition(
    spins: SpinSet,
    tree: &TreeGeometry,
    m: Vertex,
    q: Spin,
    n: usize,
) -> Result<GeneratorPair> {
    spins.check(q)?;
    if tree.level(m) > n {
        return Err(Error::BaseTooDeep {
            base: tree.level(m),
            depth: n,
        });
    }
    let sites = tree.ball_size(n)?;
    let slice = CylinderSet::single_site(spins, m, q)?;
    if spins == SpinSet::Finite(1) {
        let omega = Configuration::from_dense(&vec![0; sites]);
        return Ok(GeneratorPair {
            nu: omega.clone(),
            omega,
            left: slice.clone(),
            right: slice,
        });
    }
    let build = |other: Spin| {
        let mut c = Configuration::from_dense(&vec![other; sites]);
        c.set(m, q);
        c
    };
    let omega = build(0);
    let nu = build(1);
    if sites == 1 {
        return Ok(GeneratorPair {
            omega,
            nu,
            left: slice.clone(),
            right: slice,
        });
    }
    let flipped = if q == 0 { 1 } else { 0 };
    let extra = |c: &Configuration| {
        CylinderSet::from_configuration(spins, &c.clone().with(m, flipped))
    };
    let left = slice.union(&extra(&omega)?);
    let right = slice.union(&extra(&nu)?);
    Ok(GeneratorPair {
        omega,
        nu,
        left,
        right,
    })
}
