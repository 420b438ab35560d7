use std::sync::Arc;

use num::{One, Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::kernel::TransitionKernel;
use super::table::DenseTable;
use super::volume::VolumeMeasure;
use crate::cylinder::{CylinderSet, SpinSet};
use crate::error::{Error, Result};
use crate::tree::TreeGeometry;
use crate::value::{fmt_rational, Ext, Rational};
use crate::weights::Weights;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    Probability,
    Finite,
    SigmaFiniteCandidate,
}

impl FamilyKind {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::Probability => "probability",
            FamilyKind::Finite => "finite",
            FamilyKind::SigmaFiniteCandidate => "sigma-finite-candidate",
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Source {
    Markov {
        root: Weights,
        kernel: Arc<TransitionKernel>,
    },
    Product(Weights),
    /// `tables[i]` is the measure on `V_i`.
    Tables(Arc<Vec<DenseTable>>),
    /// `μ_k^{(A)}(E) = μ_m(E ∩ A)` with `m = max(base(A), k)`.
    Conditional {
        base: Box<MeasureFamily>,
        set: CylinderSet,
        set_depth: usize,
    },
}

/// A depth-indexed family `{μ_n}` of finite-volume measures.
///
/// Generators are deterministic: the same depth always yields the same
/// measure.
#[derive(Debug, Clone)]
pub struct MeasureFamily {
    tree: TreeGeometry,
    spins: SpinSet,
    source: Source,
    scale: Rational,
    kind: FamilyKind,
}

impl MeasureFamily {
    fn build(tree: TreeGeometry, spins: SpinSet, source: Source) -> Result<Self> {
        let mut fam = MeasureFamily {
            tree,
            spins,
            source,
            scale: Rational::one(),
            kind: FamilyKind::Probability,
        };
        fam.kind = fam.classify()?;
        Ok(fam)
    }

    fn classify(&self) -> Result<FamilyKind> {
        Ok(match self.at(0)?.mass()? {
            Ext::Infinite => FamilyKind::SigmaFiniteCandidate,
            Ext::Finite(m) if m.is_one() => FamilyKind::Probability,
            Ext::Finite(_) => FamilyKind::Finite,
        })
    }

    /// `μ_n = λ(σ(x0)) Π_edges P(σ(parent), σ(child))` on each ball.
    ///
    /// Consistent exactly when the kernel is stochastic on the spins that
    /// carry mass; non-stochastic kernels are allowed so that
    /// inconsistencies can be studied.
    pub fn markov(tree: TreeGeometry, root: Weights, kernel: TransitionKernel) -> Result<Self> {
        let spins = kernel.spins();
        Self::build(
            tree,
            spins,
            Source::Markov {
                root: root.fit(spins),
                kernel: Arc::new(kernel),
            },
        )
    }

    /// Independent sites with common weights.
    pub fn product(tree: TreeGeometry, spins: SpinSet, weights: Weights) -> Result<Self> {
        Self::build(tree, spins, Source::Product(weights.fit(spins)))
    }

    /// Family defined by a top table; lower depths are its projections.
    pub fn from_table(tree: TreeGeometry, top: DenseTable) -> Result<Self> {
        let spins = SpinSet::finite(top.spins())?;
        let tables = (0..=top.depth())
            .map(|i| top.project(&tree, i))
            .collect::<Result<Vec<_>>>()?;
        Self::build(tree, spins, Source::Tables(Arc::new(tables)))
    }

    /// Random probability table at depth `depth` together with all of its
    /// projections. Deterministic in `seed`.
    pub fn random_consistent(tree: TreeGeometry, spins: u64, depth: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let top = DenseTable::random(&tree, spins, depth, &mut rng)?;
        Self::from_table(tree, top)
    }

    pub(crate) fn conditional(base: MeasureFamily, set: CylinderSet) -> Result<Self> {
        let set_depth = set.base_depth(&base.tree);
        let (tree, spins) = (base.tree, base.spins);
        let mut fam = MeasureFamily {
            tree,
            spins,
            source: Source::Conditional {
                base: Box::new(base),
                set,
                set_depth,
            },
            scale: Rational::one(),
            kind: FamilyKind::Finite,
        };
        fam.kind = fam.classify()?;
        Ok(fam)
    }

    /// Multiplies every measure of the family by `c > 0`.
    pub fn scaled(&self, c: &Rational) -> Result<Self> {
        if !c.is_positive() {
            return Err(Error::InvalidParameter(format!(
                "scale factor must be positive, got {}",
                fmt_rational(c)
            )));
        }
        let mut fam = self.clone();
        fam.scale = &fam.scale * c;
        fam.kind = fam.classify()?;
        Ok(fam)
    }

    pub fn tree(&self) -> &TreeGeometry {
        &self.tree
    }

    pub fn spins(&self) -> SpinSet {
        self.spins
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn scale(&self) -> &Rational {
        &self.scale
    }

    pub(crate) fn source(&self) -> &Source {
        &self.source
    }

    /// Deepest depth the generator defines, if bounded.
    pub fn max_depth(&self) -> Option<usize> {
        match &self.source {
            Source::Tables(t) => Some(t.len() - 1),
            Source::Conditional { base, .. } => base.max_depth(),
            _ => None,
        }
    }

    pub fn defined_to(&self) -> usize {
        self.max_depth()
            .unwrap_or(usize::MAX)
            .min(self.tree.max_depth())
    }

    /// `μ_depth`.
    pub fn at(&self, depth: usize) -> Result<VolumeMeasure> {
        self.at_with_eval_depth(depth, None)
    }

    /// `μ_depth`, where conditional families evaluate through `μ_m` for the
    /// given `m` (at least the default `max(base(A), depth)`).
    pub fn at_with_eval_depth(&self, depth: usize, eval: Option<usize>) -> Result<VolumeMeasure> {
        if let Some(max) = self.max_depth() {
            if depth > max {
                return Err(Error::FamilyDepth {
                    requested: depth,
                    max,
                });
            }
        }
        let tree = self.tree;
        let mu = match &self.source {
            Source::Markov { root, kernel } => {
                VolumeMeasure::markov(tree, depth, root.clone(), kernel.clone(), None)?
            }
            Source::Product(w) => VolumeMeasure::product(tree, self.spins, depth, w.clone())?,
            Source::Tables(t) => VolumeMeasure::table(tree, t[depth].clone())?,
            Source::Conditional {
                base,
                set,
                set_depth,
            } => {
                let m = eval.unwrap_or(0).max(*set_depth).max(depth);
                VolumeMeasure::restricted(base.at(m)?, set.clone(), depth)?
            }
        };
        Ok(mu.scaled(&self.scale))
    }

    /// Total mass at each depth in `0..=depth`.
    pub fn masses(&self, depth: usize) -> Result<Vec<Ext>> {
        (0..=depth).map(|n| self.at(n)?.mass()).collect()
    }

    /// Consistency that follows from the parameters alone: stochastic Markov
    /// kernels, product weights of total one, and projected tables.
    pub fn closed_form_consistent(&self) -> bool {
        match &self.source {
            Source::Markov { kernel, .. } => kernel.is_stochastic(),
            Source::Product(w) => w.total(self.spins) == Ext::one(),
            Source::Tables(_) => false,
            Source::Conditional { .. } => false,
        }
    }

    /// Short description used in reports.
    pub fn describe(&self) -> String {
        let form = match &self.source {
            Source::Markov { .. } => "markov",
            Source::Product(_) => "product",
            Source::Tables(_) => "table",
            Source::Conditional { .. } => "conditional",
        };
        if self.scale.is_one() {
            form.to_string()
        } else {
            format!("{form} x {}", fmt_rational(&self.scale))
        }
    }

    /// The same family with every mass divided by `c`; `c` must be positive.
    pub fn normalized_by(&self, c: &Rational) -> Result<Self> {
        if c.is_zero() {
            return Err(Error::InvalidParameter("cannot normalize by zero".into()));
        }
        self.scaled(&(Rational::one() / c))
    }
}
