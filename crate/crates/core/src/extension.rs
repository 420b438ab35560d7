//! The set function `μ` on the cylinder field induced by a consistent
//! family: `μ(E) = μ_n(base of E at V_n)`.

use std::collections::HashMap;
use std::sync::Mutex;

use num::{One, Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cylinder::{CylinderSet, Rectangle, SiteConstraint, SpinSet};
use crate::error::{Error, Result};
use crate::measure::{check_consistency, CheckMode, ConsistencyReport, MeasureFamily, Method};
use crate::sample::CylinderSampler;
use crate::tree::Vertex;
use crate::value::{fmt_rational, Ext, Rational};

/// How a handle came to trust its family.
#[derive(Debug, Clone, PartialEq)]
pub enum Trust {
    /// `check_consistency` passed up to this depth.
    Verified(usize),
    /// Consistency follows from the parameters (stochastic Markov rows,
    /// product weights of total one).
    ClosedForm,
}

#[derive(Debug)]
pub struct ExtensionHandle {
    family: MeasureFamily,
    trust: Trust,
    multiplier: Rational,
    cache: Mutex<HashMap<(String, usize), Ext>>,
}

impl Clone for ExtensionHandle {
    fn clone(&self) -> Self {
        Self::with_trust(self.family.clone(), self.trust.clone(), self.multiplier.clone())
    }
}

impl ExtensionHandle {
    fn with_trust(family: MeasureFamily, trust: Trust, multiplier: Rational) -> Self {
        ExtensionHandle {
            family,
            trust,
            multiplier,
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// Runs the automatic consistency check to `depth` and issues a handle
    /// valid for bases up to that depth.
    pub fn verified(family: MeasureFamily, depth: usize) -> Result<Self> {
        Self::verified_with(family, depth, CheckMode::Auto).map(|(h, _)| h)
    }

    pub fn verified_with(
        family: MeasureFamily,
        depth: usize,
        mode: CheckMode,
    ) -> Result<(Self, ConsistencyReport)> {
        // A single measure has no pairs to compare.
        let report = if depth == 0 {
            ConsistencyReport {
                requested: 0,
                consistent_to: 0,
                method: Method::Exhaustive,
                first_violation: None,
                budget_exhausted: false,
            }
        } else {
            check_consistency(&family, depth, mode)?
        };
        if let Some(v) = &report.first_violation {
            return Err(Error::Inconsistent(format!(
                "projection of depth {} onto depth {} differs on {}: {} vs {}",
                v.fine,
                v.coarse,
                v.base,
                v.lhs.render(),
                v.rhs.render()
            )));
        }
        if !report.passed() {
            return Err(Error::Inconsistent(format!(
                "consistency verified only to depth {} of {}",
                report.consistent_to, depth
            )));
        }
        Ok((Self::with_trust(family, Trust::Verified(depth), Rational::one()), report))
    }

    /// Handle for a family whose consistency is a closed-form fact.
    pub fn trusted(family: MeasureFamily) -> Result<Self> {
        if !family.closed_form_consistent() {
            return Err(Error::InvalidParameter(format!(
                "{} family is not consistent in closed form; verify it instead",
                family.describe()
            )));
        }
        Ok(Self::with_trust(family, Trust::ClosedForm, Rational::one()))
    }

    /// Verified handle when the closed form does not apply.
    pub fn auto(family: MeasureFamily, depth: usize) -> Result<Self> {
        if family.closed_form_consistent() {
            Self::trusted(family)
        } else {
            Self::verified(family, depth)
        }
    }

    /// Same family, every value multiplied by `c ≥ 0`.
    pub fn scaled(&self, c: &Rational) -> Result<Self> {
        if c.is_negative() {
            return Err(Error::InvalidParameter(format!(
                "scale factor must be non-negative, got {}",
                fmt_rational(c)
            )));
        }
        Ok(Self::with_trust(
            self.family.clone(),
            self.trust.clone(),
            &self.multiplier * c,
        ))
    }

    pub fn family(&self) -> &MeasureFamily {
        &self.family
    }

    pub fn trust(&self) -> &Trust {
        &self.trust
    }

    pub fn multiplier(&self) -> &Rational {
        &self.multiplier
    }

    /// Deepest base this handle evaluates.
    pub fn max_depth(&self) -> usize {
        match self.trust {
            Trust::Verified(d) => d,
            Trust::ClosedForm => self.family.defined_to(),
        }
    }

    /// `μ(E)` through the base of `E` at its own depth.
    pub fn mu(&self, set: &CylinderSet) -> Result<Ext> {
        let depth = set.base_depth(self.family.tree());
        self.mu_at(set, depth)
    }

    /// `μ(E)` through `μ_depth`; the depth must cover the base of `E`.
    pub fn mu_at(&self, set: &CylinderSet, depth: usize) -> Result<Ext> {
        if depth > self.max_depth() {
            return Err(Error::UnverifiedDepth {
                requested: depth,
                verified: self.max_depth(),
            });
        }
        let key = (set.to_string(), depth);
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(v.clone());
        }
        let value = self.mu_uncached(set, depth)?;
        self.cache.lock().expect("cache lock").insert(key, value.clone());
        Ok(value)
    }

    /// Evaluation bypassing the cache.
    pub fn mu_uncached(&self, set: &CylinderSet, depth: usize) -> Result<Ext> {
        if self.multiplier.is_zero() {
            return Ok(Ext::zero());
        }
        let raw = self.family.at(depth)?.measure(set)?;
        Ok(raw * Ext::Finite(self.multiplier.clone()))
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdditivityReport {
    pub union_value: Ext,
    pub sum: Ext,
    pub holds: bool,
}

/// `μ(∪ parts) = Σ μ(part)` for pairwise-disjoint parts.
pub fn additivity_check(h: &ExtensionHandle, parts: &[CylinderSet]) -> Result<AdditivityReport> {
    for i in 0..parts.len() {
        for j in i + 1..parts.len() {
            if !parts[i].is_disjoint(&parts[j]) {
                return Err(Error::NotDisjoint(i, j));
            }
        }
    }
    let spins = h.family().spins();
    let union = parts
        .iter()
        .fold(CylinderSet::empty(spins), |acc, p| acc.union(p));
    let union_value = h.mu(&union)?;
    let sum = parts.iter().map(|p| h.mu(p)).collect::<Result<Vec<_>>>()?.into_iter().sum();
    Ok(AdditivityReport {
        holds: union_value == sum,
        union_value,
        sum,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ContinuityVerdict {
    /// `seq(at)` is symbolically empty, so every later value is zero.
    EmptyCertified { at: usize },
    StrictlyDecreasing,
    Constant,
    NonIncreasing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityReport {
    pub values: Vec<(usize, Ext)>,
    pub verdict: ContinuityVerdict,
}

/// Values of `μ(seq(n))` for `n = 0..=max_n` along a decreasing sequence.
///
/// Emptiness of the limit is never inferred from the numbers; only a
/// symbolically empty term certifies it.
pub fn continuity_probe(
    h: &ExtensionHandle,
    seq: impl Fn(usize) -> Result<CylinderSet>,
    max_n: usize,
) -> Result<ContinuityReport> {
    let mut values = Vec::with_capacity(max_n + 1);
    let mut prev: Option<CylinderSet> = None;
    let mut empty_at = None;
    for n in 0..=max_n {
        let set = seq(n)?;
        if let Some(p) = &prev {
            if !set.is_subset(p)? {
                return Err(Error::NotSubset(format!("seq({n}) is not contained in seq({})", n - 1)));
            }
        }
        if set.is_empty() && empty_at.is_none() {
            empty_at = Some(n);
        }
        values.push((n, h.mu(&set)?));
        prev = Some(set);
    }
    let verdict = if let Some(at) = empty_at {
        ContinuityVerdict::EmptyCertified { at }
    } else if values.windows(2).all(|w| w[1].1 < w[0].1) {
        ContinuityVerdict::StrictlyDecreasing
    } else if values.windows(2).all(|w| w[1].1 == w[0].1) {
        ContinuityVerdict::Constant
    } else {
        ContinuityVerdict::NonIncreasing
    };
    Ok(ContinuityReport { values, verdict })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerApprox {
    /// `K ⊆ E` with finite constraints at every site of the truncation ball.
    pub compact: CylinderSet,
    /// Largest spin kept at truncated sites; `None` for finite spins.
    pub cutoff: Option<u64>,
    pub measure_set: Rational,
    pub measure_compact: Rational,
    /// `μ(E) − μ(K)`, exact.
    pub gap: Rational,
}

const MAX_CUTOFF: u64 = 1 << 24;

/// A compact cylinder inside `E` whose measure is within `eps` of `μ(E)`.
///
/// Finite spins: cylinders are clopen, so `K = E`. Naturals: every site of
/// `V_depth` is cut down to `{0, …, M}` with the smallest such `M`.
pub fn inner_compact_approx(
    h: &ExtensionHandle,
    set: &CylinderSet,
    eps: &Rational,
    depth: usize,
) -> Result<InnerApprox> {
    if !eps.is_positive() {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let depth = depth.max(set.base_depth(h.family().tree()));
    let total = h
        .mu_at(set, depth)?
        .into_finite()
        .ok_or_else(|| Error::InfiniteMass(format!("inner approximation of {set} needs finite mass")))?;
    if let SpinSet::Finite(_) = set.spins() {
        return Ok(InnerApprox {
            compact: set.clone(),
            cutoff: None,
            measure_compact: total.clone(),
            measure_set: total,
            gap: Rational::zero(),
        });
    }
    let sites: Vec<Vertex> = h.family().tree().ball_vertices(depth)?.map(Vertex).collect();
    let gap_at = |m: u64| -> Result<(CylinderSet, Rational)> {
        let k = truncate(set, &sites, m)?;
        let value = h
            .mu_at(&k, depth)?
            .into_finite()
            .expect("subset of a finite-mass set");
        Ok((k, &total - value))
    };
    let mut hi = 1u64;
    loop {
        if gap_at(hi)?.1 < *eps {
            break;
        }
        if hi >= MAX_CUTOFF {
            return Err(Error::InvalidParameter(format!(
                "gap stays above {} up to cutoff {MAX_CUTOFF}",
                fmt_rational(eps)
            )));
        }
        hi *= 2;
    }
    // Smallest cutoff meeting the tolerance; the gap is non-increasing in it.
    let mut lo = 0u64;
    if gap_at(0)?.1 < *eps {
        hi = 0;
    }
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if gap_at(mid)?.1 < *eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (compact, gap) = gap_at(hi)?;
    Ok(InnerApprox {
        compact,
        cutoff: Some(hi),
        measure_compact: &total - &gap,
        measure_set: total,
        gap,
    })
}

fn truncate(set: &CylinderSet, sites: &[Vertex], cutoff: u64) -> Result<CylinderSet> {
    let spins = set.spins();
    let range = SiteConstraint::In((0..=cutoff).collect());
    let rects: Vec<Rectangle> = set
        .rectangles()
        .iter()
        .filter_map(|r| {
            sites
                .iter()
                .try_fold(r.clone(), |acc, &v| acc.restrict(v, &range, spins))
        })
        .collect();
    Ok(CylinderSet::from_rects(spins, rects))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub set: CylinderSet,
    pub left: Ext,
    pub right: Ext,
    /// `right / left` when both are finite and `left ≠ 0`.
    pub ratio: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrosscheckReport {
    pub trials: usize,
    pub agreed: usize,
    pub first_witness: Option<Witness>,
}

impl CrosscheckReport {
    pub fn all_agree(&self) -> bool {
        self.first_witness.is_none()
    }
}

/// Compares two handles on `trials` seeded random cylinders.
pub fn uniqueness_crosscheck(
    h1: &ExtensionHandle,
    h2: &ExtensionHandle,
    trials: usize,
    seed: u64,
) -> Result<CrosscheckReport> {
    let spins = h1.family().spins();
    if spins != h2.family().spins() {
        return Err(Error::SpinMismatch);
    }
    let depth = h1.max_depth().min(h2.max_depth()).min(3);
    let mut sampler = CylinderSampler::new(depth);
    if spins == SpinSet::Naturals {
        sampler = sampler.pin_root();
    }
    let tree = *h1.family().tree();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CrosscheckReport {
        trials,
        agreed: 0,
        first_witness: None,
    };
    for _ in 0..trials {
        let set = sampler.sample(&mut rng, spins, &tree)?;
        let (left, right) = (h1.mu(&set)?, h2.mu(&set)?);
        if left == right {
            report.agreed += 1;
        } else if report.first_witness.is_none() {
            let ratio = match (&left, &right) {
                (Ext::Finite(a), Ext::Finite(b)) if !a.is_zero() => Some(b / a),
                _ => None,
            };
            report.first_witness = Some(Witness {
                set,
                left,
                right,
                ratio,
            });
        }
    }
    Ok(report)
}
