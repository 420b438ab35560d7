use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use num::{BigInt, Integer, One, ToPrimitive, Zero};

use super::kernel::TransitionKernel;
use super::table::DenseTable;
use crate::cylinder::{
    check_atom_budget, Configuration, CylinderSet, Rectangle, SiteConstraint, SpinSet,
    DEFAULT_ATOM_BUDGET,
};
use crate::error::{Error, Result};
use crate::tree::{TreeGeometry, Vertex};
use crate::value::{Ext, Rational};
use crate::weights::Weights;

#[derive(Debug, Clone)]
pub enum Form {
    Table(Arc<DenseTable>),
    /// Independent sites, every site weighted by the same `weights`.
    Product(Weights),
    /// `root(σ(x0)) · Π_edges P(σ(parent), σ(child)) · Π_{x ∈ W_n} boundary(σ(x))`.
    Markov {
        root: Weights,
        kernel: Arc<TransitionKernel>,
        boundary: Option<Weights>,
    },
    /// `B ↦ inner(B ∩ set)`, with `inner` living at a depth at least as large.
    Restricted {
        inner: Box<VolumeMeasure>,
        set: CylinderSet,
    },
}

/// A measure on `Φ^{V_n}`, evaluated on cylinders whose base lies in `V_n`.
#[derive(Debug, Clone)]
pub struct VolumeMeasure {
    tree: TreeGeometry,
    spins: SpinSet,
    depth: usize,
    scale: Rational,
    form: Form,
    free: OnceLock<Arc<FreeMessages>>,
}

/// Per-level messages of an unconstrained subtree in the Markov form.
#[derive(Debug)]
struct FreeMessages {
    /// `subtree[l](q)`: weight of the unconstrained subtree below a level-`l`
    /// vertex holding spin `q`.
    subtree: Vec<Weights>,
    /// `edge[l](q) = Σ_r P(q, r) · subtree[l](r)` for `l ≥ 1`.
    edge: Vec<Weights>,
}

impl VolumeMeasure {
    fn with_form(tree: TreeGeometry, spins: SpinSet, depth: usize, form: Form) -> Result<Self> {
        tree.ball_size(depth)?;
        Ok(VolumeMeasure {
            tree,
            spins,
            depth,
            scale: Rational::one(),
            form,
            free: OnceLock::new(),
        })
    }

    pub fn table(tree: TreeGeometry, table: DenseTable) -> Result<Self> {
        let spins = SpinSet::finite(table.spins())?;
        let depth = table.depth();
        Self::with_form(tree, spins, depth, Form::Table(Arc::new(table)))
    }

    pub fn product(tree: TreeGeometry, spins: SpinSet, depth: usize, weights: Weights) -> Result<Self> {
        Self::with_form(tree, spins, depth, Form::Product(weights.fit(spins)))
    }

    pub fn markov(
        tree: TreeGeometry,
        depth: usize,
        root: Weights,
        kernel: Arc<TransitionKernel>,
        boundary: Option<Weights>,
    ) -> Result<Self> {
        let spins = kernel.spins();
        Self::with_form(
            tree,
            spins,
            depth,
            Form::Markov {
                root: root.fit(spins),
                kernel,
                boundary,
            },
        )
    }

    /// `B ↦ inner(B ∩ set)` on `V_depth`.
    pub fn restricted(inner: VolumeMeasure, set: CylinderSet, depth: usize) -> Result<Self> {
        let base = set.base_depth(&inner.tree);
        if depth > inner.depth || base > inner.depth {
            return Err(Error::BaseTooDeep {
                base: base.max(depth),
                depth: inner.depth,
            });
        }
        let (tree, spins) = (inner.tree, inner.spins);
        Self::with_form(
            tree,
            spins,
            depth,
            Form::Restricted {
                inner: Box::new(inner),
                set,
            },
        )
    }

    pub fn scaled(mut self, c: &Rational) -> Self {
        self.scale = &self.scale * c;
        self
    }

    pub fn tree(&self) -> &TreeGeometry {
        &self.tree
    }

    pub fn spins(&self) -> SpinSet {
        self.spins
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn scale(&self) -> &Rational {
        &self.scale
    }

    pub fn form(&self) -> &Form {
        &self.form
    }

    /// Total mass `μ_n(Ω_n)`.
    pub fn mass(&self) -> Result<Ext> {
        self.measure(&CylinderSet::full(self.spins))
    }

    /// `μ_n(B)` for a cylinder whose base lies in `V_n`.
    pub fn measure(&self, set: &CylinderSet) -> Result<Ext> {
        if set.spins() != self.spins {
            return Err(Error::SpinMismatch);
        }
        let base = set.base_depth(&self.tree);
        if base > self.depth {
            return Err(Error::BaseTooDeep {
                base,
                depth: self.depth,
            });
        }
        let mut total = Ext::zero();
        for rect in set.disjoint_parts()? {
            total = total + self.measure_rect(&rect)?;
        }
        Ok(total)
    }

    /// Weight of a single configuration on `V_n`.
    pub fn atom(&self, config: &Configuration) -> Result<Ext> {
        self.measure(&CylinderSet::from_configuration(self.spins, config)?)
    }

    fn measure_rect(&self, rect: &Rectangle) -> Result<Ext> {
        let raw = match &self.form {
            Form::Table(t) => Ext::Finite(t.sum_rect(rect)),
            Form::Product(w) => self.product_rect(w, rect)?,
            Form::Markov { root, kernel, .. } => self.markov_rect(root, kernel, rect)?,
            Form::Restricted { inner, set } => {
                let piece = CylinderSet::from_rects(self.spins, vec![rect.clone()]);
                inner.measure(&piece.intersect(set))?
            }
        };
        Ok(&raw * &Ext::Finite(self.scale.clone()))
    }

    fn product_rect(&self, w: &Weights, rect: &Rectangle) -> Result<Ext> {
        let sites = self.tree.ball_size(self.depth)?;
        let free = (sites - rect.len()) as u32;
        let mut acc = w.total(self.spins).pow(free);
        for (_, c) in rect.sites() {
            acc = &acc * &w.sum_over(c, self.spins);
        }
        Ok(acc)
    }

    fn free_messages(&self, kernel: &TransitionKernel, boundary: &Option<Weights>) -> Arc<FreeMessages> {
        self.free
            .get_or_init(|| {
                let n = self.depth;
                let k = self.tree.order();
                let mut subtree = vec![Weights::constant(Ext::one(), self.spins); n + 1];
                let mut edge = vec![Weights::constant(Ext::one(), self.spins); n + 1];
                subtree[n] = boundary
                    .clone()
                    .unwrap_or_else(|| Weights::constant(Ext::one(), self.spins));
                for l in (0..n).rev() {
                    edge[l + 1] = kernel.apply(&SiteConstraint::Any, &subtree[l + 1]);
                    let children = if l == 0 { k + 1 } else { k };
                    subtree[l] = edge[l + 1].pow(children);
                }
                Arc::new(FreeMessages { subtree, edge })
            })
            .clone()
    }

    fn markov_rect(&self, root: &Weights, kernel: &TransitionKernel, rect: &Rectangle) -> Result<Ext> {
        let boundary = match &self.form {
            Form::Markov { boundary, .. } => boundary,
            _ => unreachable!("markov form"),
        };
        let free = self.free_messages(kernel, boundary);
        // Constrained vertices and all their ancestors.
        let mut closure: BTreeMap<Vertex, ()> = BTreeMap::new();
        closure.insert(Vertex::ROOT, ());
        for (v, _) in rect.sites() {
            let mut cur = Some(v);
            while let Some(u) = cur {
                if closure.insert(u, ()).is_some() && u != v {
                    break;
                }
                cur = self.tree.parent(u);
            }
        }
        let mut messages: BTreeMap<Vertex, Weights> = BTreeMap::new();
        for &v in closure.keys().rev() {
            let level = self.tree.level(v);
            let msg = if level == self.depth {
                free.subtree[level].clone()
            } else {
                let mut acc: Option<Weights> = None;
                let mut free_children = 0u32;
                for c in self.tree.children(v).map(Vertex) {
                    match messages.remove(&c) {
                        Some(m) => {
                            let s = kernel.apply(rect.constraint(c), &m);
                            acc = Some(match acc {
                                None => s,
                                Some(a) => a.mul(&s),
                            });
                        }
                        None => free_children += 1,
                    }
                }
                let free_part = free.edge[level + 1].pow(free_children);
                match acc {
                    None => free_part,
                    Some(a) => a.mul(&free_part),
                }
            };
            messages.insert(v, msg);
        }
        let root_msg = messages.remove(&Vertex::ROOT).expect("root is in the closure");
        Ok(root.mul(&root_msg).sum_over(rect.constraint(Vertex::ROOT), self.spins))
    }

    /// Marginal on `V_depth`: `B ↦ μ_n(π^{-1} B)`.
    ///
    /// Markov measures project in closed form by folding the discarded
    /// levels into boundary weights; with stochastic rows and no boundary
    /// the result has the same parameters.
    pub fn project(&self, depth: usize) -> Result<VolumeMeasure> {
        if depth > self.depth {
            return Err(Error::BaseTooDeep {
                base: depth,
                depth: self.depth,
            });
        }
        if depth == self.depth {
            return Ok(self.clone());
        }
        let projected = match &self.form {
            Form::Table(t) => VolumeMeasure::table(self.tree, t.project(&self.tree, depth)?)?,
            Form::Product(w) => {
                if w.total(self.spins) == Ext::one() {
                    VolumeMeasure::product(self.tree, self.spins, depth, w.clone())?
                } else {
                    return self.product_as_markov()?.project(depth);
                }
            }
            Form::Markov {
                root,
                kernel,
                boundary,
            } => {
                let free = self.free_messages(kernel, boundary);
                let b = &free.subtree[depth];
                let boundary = (!b.is_all_ones(self.spins)).then(|| b.clone());
                VolumeMeasure::markov(self.tree, depth, root.clone(), kernel.clone(), boundary)?
            }
            Form::Restricted { inner, set } => {
                VolumeMeasure::restricted((**inner).clone(), set.clone(), depth)?
            }
        };
        Ok(projected.scaled(&self.scale))
    }

    /// The same measure written in Markov form.
    pub fn product_as_markov(&self) -> Result<VolumeMeasure> {
        let Form::Product(w) = &self.form else {
            return Err(Error::InvalidParameter("not a product measure".into()));
        };
        let kernel = TransitionKernel::uniform_rows(w.clone(), self.spins)?;
        Ok(VolumeMeasure::markov(self.tree, self.depth, w.clone(), Arc::new(kernel), None)?
            .scaled(&self.scale))
    }

    /// Explicit table of every atom weight (finite spins, finite weights).
    pub fn to_table(&self) -> Result<DenseTable> {
        self.to_table_with_budget(DEFAULT_ATOM_BUDGET)
    }

    pub fn to_table_with_budget(&self, budget: u128) -> Result<DenseTable> {
        let s = self
            .spins
            .size()
            .ok_or(Error::FiniteSpinsRequired("materializing a table"))?;
        let sites = self.tree.ball_size(self.depth)?;
        check_atom_budget(s, sites, budget)?;
        match &self.form {
            Form::Table(t) => t.scaled(&self.scale),
            Form::Product(_) => self.product_as_markov()?.to_table_with_budget(budget),
            Form::Markov {
                root,
                kernel,
                boundary,
            } => self.markov_table(s, root, kernel, boundary.as_ref()),
            Form::Restricted { .. } => {
                let values = (0..check_atom_budget(s, sites, budget)? as usize)
                    .map(|i| {
                        let config =
                            Configuration::from_dense(&crate::cylinder::atom_values(i, s, sites));
                        self.atom(&config)?
                            .into_finite()
                            .ok_or_else(|| Error::InfiniteMass("atom weight".into()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                DenseTable::from_rationals(&self.tree, s, self.depth, &values)
            }
        }
    }

    fn markov_table(
        &self,
        s: u64,
        root: &Weights,
        kernel: &TransitionKernel,
        boundary: Option<&Weights>,
    ) -> Result<DenseTable> {
        let sites = self.tree.ball_size(self.depth)?;
        let leaves = self.tree.sphere_size(self.depth)?;
        let (root_num, root_den) = integer_row(root, s)?;
        let (mut kernel_nums, mut kernel_den) = (Vec::new(), BigInt::one());
        for q in 0..s {
            let (_, d) = integer_row(kernel.row(q), s)?;
            kernel_den = kernel_den.lcm(&d);
        }
        for q in 0..s {
            kernel_nums.push(scaled_row(kernel.row(q), s, &kernel_den)?);
        }
        let (bound_num, bound_den) = match boundary {
            Some(b) => integer_row(b, s)?,
            None => (vec![1u128; s as usize], BigInt::one()),
        };
        let parents: Vec<usize> = (0..sites)
            .map(|v| self.tree.parent(Vertex(v)).map_or(usize::MAX, |p| p.0))
            .collect();
        let first_leaf = sites - leaves;
        let mut table = vec![0u128; check_atom_budget(s, sites, u128::MAX)? as usize];
        let mut spins = vec![0usize; sites];
        let ctx = FillContext {
            s: s as usize,
            parents: &parents,
            first_leaf,
            root: &root_num,
            kernel: &kernel_nums,
            boundary: &bound_num,
        };
        fill(&ctx, 0, 0, 1, 1, &mut spins, &mut table)?;
        let edges = (sites - 1) as u32;
        let denominator = root_den * num::pow(kernel_den, edges as usize) * num::pow(bound_den, leaves);
        DenseTable::new(&self.tree, s, self.depth, table, denominator)?.scaled(&self.scale)
    }
}

struct FillContext<'a> {
    s: usize,
    parents: &'a [usize],
    first_leaf: usize,
    root: &'a [u128],
    kernel: &'a [Vec<u128>],
    boundary: &'a [u128],
}

fn fill(
    ctx: &FillContext<'_>,
    v: usize,
    index: usize,
    place: usize,
    acc: u128,
    spins: &mut [usize],
    table: &mut [u128],
) -> Result<()> {
    if v == ctx.parents.len() {
        table[index] = acc;
        return Ok(());
    }
    for q in 0..ctx.s {
        let mut w = if v == 0 {
            ctx.root[q]
        } else {
            ctx.kernel[spins[ctx.parents[v]]][q]
        };
        if v >= ctx.first_leaf {
            w = w
                .checked_mul(ctx.boundary[q])
                .ok_or(Error::Overflow("materializing a Markov table"))?;
        }
        let next = acc
            .checked_mul(w)
            .ok_or(Error::Overflow("materializing a Markov table"))?;
        spins[v] = q;
        fill(ctx, v + 1, index + q * place, place * ctx.s, next, spins, table)?;
    }
    Ok(())
}

/// Integer numerators over the least common denominator.
fn integer_row(w: &Weights, s: u64) -> Result<(Vec<u128>, BigInt)> {
    let vals = finite_values(w, s)?;
    let den = vals.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
    Ok((scaled_values(&vals, &den)?, den))
}

fn scaled_row(w: &Weights, s: u64, den: &BigInt) -> Result<Vec<u128>> {
    scaled_values(&finite_values(w, s)?, den)
}

fn finite_values(w: &Weights, s: u64) -> Result<Vec<Rational>> {
    (0..s)
        .map(|q| {
            w.get(q)
                .into_finite()
                .ok_or_else(|| Error::InfiniteMass("infinite weight in a table".into()))
        })
        .collect()
}

fn scaled_values(vals: &[Rational], den: &BigInt) -> Result<Vec<u128>> {
    vals.iter()
        .map(|v| {
            if v.is_zero() {
                return Ok(0);
            }
            (v.numer() * (den / v.denom()))
                .to_u128()
                .ok_or(Error::Overflow("converting weights to integers"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::ratio;

    fn binary_markov(depth: usize) -> VolumeMeasure {
        let g = TreeGeometry::new(2).unwrap();
        let kernel = TransitionKernel::finite(vec![
            vec![ratio(2, 3), ratio(1, 3)],
            vec![ratio(1, 3), ratio(2, 3)],
        ])
        .unwrap();
        let root = Weights::finite(vec![ratio(1, 2), ratio(1, 2)]).unwrap();
        VolumeMeasure::markov(g, depth, root, Arc::new(kernel), None).unwrap()
    }

    #[test]
    fn markov_atom_weight() {
        let mu = binary_markov(1);
        let atom = Configuration::from_dense(&[0, 0, 0, 0]);
        assert_eq!(mu.atom(&atom).unwrap(), Ext::Finite(ratio(4, 27)));
        assert_eq!(mu.mass().unwrap(), Ext::one());
    }

    #[test]
    fn markov_table_matches_dp() {
        let mu = binary_markov(2);
        let t = mu.to_table().unwrap();
        assert_eq!(t.len(), 1024);
        assert_eq!(t.total(), Rational::one());
        for i in [0usize, 1, 77, 512, 1023] {
            let c = Configuration::from_dense(&crate::cylinder::atom_values(i, 2, 10));
            assert_eq!(Ext::Finite(t.weight(i)), mu.atom(&c).unwrap());
        }
    }

    #[test]
    fn base_beyond_depth_is_rejected() {
        let mu = binary_markov(0);
        let c = CylinderSet::single_site(SpinSet::Finite(2), Vertex(1), 0).unwrap();
        assert!(matches!(mu.measure(&c), Err(Error::BaseTooDeep { .. })));
    }
}
