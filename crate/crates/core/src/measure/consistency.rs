//! Exact verification of `π_i(μ_j) = μ_i` along the chain of balls.

use std::collections::BTreeSet;

use super::family::{MeasureFamily, Source};
use super::table::DenseTable;
use crate::cylinder::{atom_values, check_atom_budget, Configuration, CylinderSet, SiteConstraint, SpinSet};
use crate::error::{Error, Result};
use crate::tree::Vertex;
use crate::value::{Ext, Rational};

/// Number of atom evaluations allowed per depth pair in the automatic mode.
pub const DEFAULT_CHECK_BUDGET: u128 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckMode {
    /// Closed form where the parameters decide it, otherwise atom-wise
    /// (finite spins) or probe-based (naturals) comparison.
    Auto,
    /// Materialize every table up to the requested depth and compare all
    /// pairs `i < j` atom by atom.
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ClosedForm,
    AtomWise,
    Exhaustive,
    /// Single-site probes only; passing is evidence, not proof.
    Probed,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::ClosedForm => "closed-form",
            Method::AtomWise => "atom-wise",
            Method::Exhaustive => "exhaustive",
            Method::Probed => "probed",
        }
    }
}

/// `π_coarse(μ_fine)(base) = lhs` differs from `μ_coarse(base) = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub coarse: usize,
    pub fine: usize,
    pub base: CylinderSet,
    pub lhs: Ext,
    pub rhs: Ext,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub requested: usize,
    /// Largest `d` such that every pair `i < j ≤ d` was verified.
    pub consistent_to: usize,
    pub method: Method,
    pub first_violation: Option<Violation>,
    /// Verification stopped early because of the atom budget.
    pub budget_exhausted: bool,
}

impl ConsistencyReport {
    pub fn passed(&self) -> bool {
        self.first_violation.is_none() && !self.budget_exhausted && self.consistent_to >= self.requested
    }
}

pub fn check_consistency(fam: &MeasureFamily, depth: usize, mode: CheckMode) -> Result<ConsistencyReport> {
    check_consistency_with_budget(fam, depth, mode, DEFAULT_CHECK_BUDGET)
}

pub fn check_consistency_with_budget(
    fam: &MeasureFamily,
    depth: usize,
    mode: CheckMode,
    budget: u128,
) -> Result<ConsistencyReport> {
    if depth == 0 {
        return Err(Error::InvalidParameter("consistency depth must be at least 1".into()));
    }
    if depth > fam.defined_to() {
        return Err(Error::FamilyDepth {
            requested: depth,
            max: fam.defined_to(),
        });
    }
    match mode {
        CheckMode::Exhaustive => exhaustive(fam, depth),
        CheckMode::Auto => {
            if fam.closed_form_consistent() {
                return Ok(ConsistencyReport {
                    requested: depth,
                    consistent_to: depth,
                    method: Method::ClosedForm,
                    first_violation: None,
                    budget_exhausted: false,
                });
            }
            if matches!(fam.source(), Source::Tables(_)) {
                return exhaustive(fam, depth);
            }
            match fam.spins() {
                SpinSet::Finite(_) => atom_wise(fam, depth, budget),
                SpinSet::Naturals => probed(fam, depth),
            }
        }
    }
}

fn report(depth: usize, method: Method, upto: usize, violation: Option<Violation>, budget: bool) -> ConsistencyReport {
    ConsistencyReport {
        requested: depth,
        consistent_to: upto,
        method,
        first_violation: violation,
        budget_exhausted: budget,
    }
}

/// Consecutive pairs suffice: projections compose, so `π_i(μ_j) = μ_i`
/// for all `i < j` follows from `π_i(μ_{i+1}) = μ_i` for every `i`.
fn atom_wise(fam: &MeasureFamily, depth: usize, budget: u128) -> Result<ConsistencyReport> {
    let s = fam.spins().size().expect("finite spins");
    for i in 0..depth {
        let sites = fam.tree().ball_size(i)?;
        let count = match check_atom_budget(s, sites, budget) {
            Ok(c) => c as usize,
            Err(_) => return Ok(report(depth, Method::AtomWise, i, None, true)),
        };
        let coarse = fam.at(i)?;
        let fine = fam.at(i + 1)?;
        for a in 0..count {
            let config = Configuration::from_dense(&atom_values(a, s, sites));
            let base = CylinderSet::from_configuration(fam.spins(), &config)?;
            let lhs = fine.measure(&base)?;
            let rhs = coarse.measure(&base)?;
            if lhs != rhs {
                let v = Violation {
                    coarse: i,
                    fine: i + 1,
                    base,
                    lhs,
                    rhs,
                };
                return Ok(report(depth, Method::AtomWise, i, Some(v), false));
            }
        }
    }
    Ok(report(depth, Method::AtomWise, depth, None, false))
}

fn exhaustive(fam: &MeasureFamily, depth: usize) -> Result<ConsistencyReport> {
    let s = fam
        .spins()
        .size()
        .ok_or(Error::FiniteSpinsRequired("exhaustive consistency check"))?;
    let tables: Vec<DenseTable> = (0..=depth)
        .map(|n| fam.at(n)?.to_table())
        .collect::<Result<_>>()?;
    for j in 1..=depth {
        for i in 0..j {
            let projected = tables[j].project(fam.tree(), i)?;
            if let Some(a) = projected.first_difference(&tables[i]) {
                let sites = fam.tree().ball_size(i)?;
                let config = Configuration::from_dense(&atom_values(a, s, sites));
                let v = Violation {
                    coarse: i,
                    fine: j,
                    base: CylinderSet::from_configuration(fam.spins(), &config)?,
                    lhs: Ext::Finite(projected.weight(a)),
                    rhs: Ext::Finite(tables[i].weight(a)),
                };
                return Ok(report(depth, Method::Exhaustive, j - 1, Some(v), false));
            }
        }
    }
    Ok(report(depth, Method::Exhaustive, depth, None, false))
}

/// Spins worth probing: every explicitly parameterized value plus a margin
/// past the point where all tails are in their regular pattern.
fn probe_spins(fam: &MeasureFamily) -> Vec<u64> {
    let horizon = match fam.source() {
        Source::Markov { root, kernel } => {
            let rows = kernel
                .distinct_rows()
                .iter()
                .map(|(_, r)| r.explicit_len())
                .max()
                .unwrap_or(0);
            root.explicit_len().max(rows).max(kernel.explicit_rows().len())
        }
        Source::Product(w) => w.explicit_len(),
        Source::Conditional { set, .. } => set
            .rectangles()
            .iter()
            .flat_map(|r| r.sites().map(|(_, c)| c.clone()).collect::<Vec<_>>())
            .flat_map(|c| match c {
                SiteConstraint::In(s) | SiteConstraint::NotIn(s) => s.into_iter().collect(),
                SiteConstraint::Any => Vec::new(),
            })
            .max()
            .map_or(0, |m| m as usize + 1),
        Source::Tables(_) => 0,
    };
    (0..(horizon as u64 + 3)).collect()
}

fn probed(fam: &MeasureFamily, depth: usize) -> Result<ConsistencyReport> {
    let spins = fam.spins();
    let values = probe_spins(fam);
    for i in 0..depth {
        let coarse = fam.at(i)?;
        let fine = fam.at(i + 1)?;
        let mut probes = vec![CylinderSet::full(spins)];
        for v in fam.tree().ball_vertices(i)? {
            for &q in &values {
                probes.push(CylinderSet::single_site(spins, Vertex(v), q)?);
            }
            let tail: BTreeSet<u64> = values.iter().copied().collect();
            probes.push(CylinderSet::site(spins, Vertex(v), SiteConstraint::NotIn(tail))?);
        }
        for base in probes {
            let lhs = fine.measure(&base)?;
            let rhs = coarse.measure(&base)?;
            if lhs != rhs {
                let v = Violation {
                    coarse: i,
                    fine: i + 1,
                    base,
                    lhs,
                    rhs,
                };
                return Ok(report(depth, Method::Probed, i, Some(v), false));
            }
        }
    }
    Ok(report(depth, Method::Probed, depth, None, false))
}

/// Ratio `lhs / rhs` of a violation when both sides are finite and non-zero.
pub fn violation_ratio(v: &Violation) -> Option<Rational> {
    match (&v.lhs, &v.rhs) {
        (Ext::Finite(a), Ext::Finite(b)) if *b != Rational::from_integer(0.into()) => Some(a / b),
        _ => None,
    }
}
