//! Seeded random cylinders for probes and cross-checks.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::cylinder::{CylinderSet, Rectangle, SiteConstraint, Spin, SpinSet};
use crate::error::Result;
use crate::tree::{TreeGeometry, Vertex};

#[derive(Debug, Clone)]
pub struct CylinderSampler {
    /// Constrained sites are drawn from `V_depth`.
    pub depth: usize,
    pub max_rects: usize,
    pub max_sites: usize,
    /// Spins drawn from `0..value_range` when the spin set is infinite.
    pub value_range: u64,
    /// Give every rectangle a finite `In` constraint at this vertex
    /// (finite-mass events for families with infinite weight there).
    pub pinned: Option<Vertex>,
}

impl CylinderSampler {
    pub fn new(depth: usize) -> Self {
        CylinderSampler {
            depth,
            max_rects: 3,
            max_sites: 4,
            value_range: 6,
            pinned: None,
        }
    }

    pub fn pin(mut self, v: Vertex) -> Self {
        self.pinned = Some(v);
        self
    }

    pub fn pin_root(self) -> Self {
        self.pin(Vertex::ROOT)
    }

    pub fn sample(&self, rng: &mut impl Rng, spins: SpinSet, tree: &TreeGeometry) -> Result<CylinderSet> {
        let sites: Vec<usize> = tree.ball_vertices(self.depth)?.collect();
        let rects = rng.gen_range(1..=self.max_rects);
        let mut out = Vec::with_capacity(rects);
        for _ in 0..rects {
            let count = rng.gen_range(1..=self.max_sites.min(sites.len()));
            let chosen: Vec<usize> = sites.choose_multiple(rng, count).copied().collect();
            let mut r = Some(Rectangle::full());
            if let Some(v) = self.pinned {
                let c = SiteConstraint::In(self.finite_set(rng, spins)).normalize(spins);
                r = r.and_then(|r| r.restrict(v, &c, spins));
            }
            for v in chosen {
                let c = self.constraint(rng, spins);
                r = r.and_then(|r| r.restrict(Vertex(v), &c, spins));
            }
            out.extend(r);
        }
        Ok(CylinderSet::from_rects(spins, out))
    }

    fn finite_set(&self, rng: &mut impl Rng, spins: SpinSet) -> BTreeSet<Spin> {
        let range = spins.size().unwrap_or(self.value_range).max(1);
        let n = rng.gen_range(1..=range.min(3));
        (0..n).map(|_| rng.gen_range(0..range)).collect()
    }

    fn constraint(&self, rng: &mut impl Rng, spins: SpinSet) -> SiteConstraint {
        match spins {
            SpinSet::Finite(s) => {
                let mut set: BTreeSet<Spin> = (0..s).filter(|_| rng.gen_bool(0.5)).collect();
                if set.is_empty() {
                    set.insert(rng.gen_range(0..s));
                }
                SiteConstraint::In(set).normalize(spins)
            }
            SpinSet::Naturals => {
                let set = self.finite_set(rng, spins);
                if rng.gen_bool(0.3) {
                    SiteConstraint::NotIn(set)
                } else {
                    SiteConstraint::In(set)
                }
            }
        }
    }

    /// A random cylinder split into two disjoint pieces `(E ∩ F, E \ F)`.
    pub fn split(
        &self,
        rng: &mut impl Rng,
        set: &CylinderSet,
        tree: &TreeGeometry,
    ) -> Result<(CylinderSet, CylinderSet)> {
        let cut = self.sample(rng, set.spins(), tree)?;
        Ok((set.intersect(&cut), set.difference(&cut)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic_and_within_depth() {
        let g = TreeGeometry::new(2).unwrap();
        let s = CylinderSampler::new(2);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20)
                .map(|_| s.sample(&mut rng, SpinSet::Finite(2), &g).unwrap())
                .collect::<Vec<_>>()
        };
        let a = draw(3);
        assert_eq!(a, draw(3));
        assert!(a.iter().all(|c| c.base_depth(&g) <= 2));
    }

    #[test]
    fn pinned_root_is_finite() {
        let g = TreeGeometry::new(2).unwrap();
        let s = CylinderSampler::new(1).pin_root();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let c = s.sample(&mut rng, SpinSet::Naturals, &g).unwrap();
            for r in c.rectangles() {
                assert!(matches!(r.constraint(Vertex::ROOT), SiteConstraint::In(_)));
            }
        }
    }
}
