use num::{BigInt, Integer, One, ToPrimitive, Zero};
use rand::Rng;

use crate::cylinder::{check_atom_budget, Rectangle, Spin, SpinSet};
use crate::error::{Error, Result};
use crate::tree::{TreeGeometry, Vertex};
use crate::value::Rational;

/// Explicit weights for every atom of `Φ^{V_n}` over a common denominator.
///
/// Atom `i` has weight `numerators[i] / denominator`, where `i` is the
/// mixed-radix index with vertex 0 as the least significant digit. Since
/// `V_i` is a prefix of `V_n` in breadth-first order, the marginal on `V_i`
/// of atom `i` is atom `i mod s^{|V_i|}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseTable {
    spins: u64,
    depth: usize,
    sites: usize,
    numerators: Vec<u128>,
    denominator: BigInt,
}

impl DenseTable {
    pub fn new(
        tree: &TreeGeometry,
        spins: u64,
        depth: usize,
        numerators: Vec<u128>,
        denominator: BigInt,
    ) -> Result<Self> {
        let sites = tree.ball_size(depth)?;
        let expected = check_atom_budget(spins, sites, u128::MAX)?;
        if numerators.len() as u128 != expected {
            return Err(Error::InvalidParameter(format!(
                "table at depth {depth} needs {expected} entries, got {}",
                numerators.len()
            )));
        }
        if denominator <= BigInt::zero() {
            return Err(Error::InvalidParameter("table denominator must be positive".into()));
        }
        Ok(DenseTable {
            spins,
            depth,
            sites,
            numerators,
            denominator,
        })
    }

    /// Builds a table from exact rational weights.
    pub fn from_rationals(
        tree: &TreeGeometry,
        spins: u64,
        depth: usize,
        values: &[Rational],
    ) -> Result<Self> {
        let den = values
            .iter()
            .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
        let mut nums = Vec::with_capacity(values.len());
        for v in values {
            if v < &Rational::zero() {
                return Err(Error::InvalidParameter("negative table weight".into()));
            }
            let n = (v.numer() * (&den / v.denom()))
                .to_u128()
                .ok_or(Error::Overflow("converting table weights"))?;
            nums.push(n);
        }
        Self::new(tree, spins, depth, nums, den)
    }

    /// A random probability table with small integer weights.
    pub fn random(tree: &TreeGeometry, spins: u64, depth: usize, rng: &mut impl Rng) -> Result<Self> {
        let sites = tree.ball_size(depth)?;
        let n = check_atom_budget(spins, sites, crate::cylinder::DEFAULT_ATOM_BUDGET)? as usize;
        let mut nums: Vec<u128> = (0..n).map(|_| rng.gen_range(0..=16u128)).collect();
        if nums.iter().all(|&x| x == 0) {
            nums[0] = 1;
        }
        let total: u128 = nums.iter().sum();
        Self::new(tree, spins, depth, nums, BigInt::from(total))
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn spins(&self) -> u64 {
        self.spins
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn len(&self) -> usize {
        self.numerators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.numerators.is_empty()
    }

    pub fn numerators(&self) -> &[u128] {
        &self.numerators
    }

    pub fn denominator(&self) -> &BigInt {
        &self.denominator
    }

    pub fn weight(&self, index: usize) -> Rational {
        Rational::new(BigInt::from(self.numerators[index]), self.denominator.clone())
    }

    pub fn total(&self) -> Rational {
        let mut acc = Accumulator::default();
        for &n in &self.numerators {
            acc.add(n);
        }
        Rational::new(acc.finish(), self.denominator.clone())
    }

    /// Marginal table on `V_depth`.
    pub fn project(&self, tree: &TreeGeometry, depth: usize) -> Result<DenseTable> {
        if depth > self.depth {
            return Err(Error::BaseTooDeep {
                base: depth,
                depth: self.depth,
            });
        }
        let sites = tree.ball_size(depth)?;
        let len = check_atom_budget(self.spins, sites, u128::MAX)? as usize;
        let mut out = vec![0u128; len];
        for (i, &n) in self.numerators.iter().enumerate() {
            let slot = &mut out[i % len];
            *slot = slot
                .checked_add(n)
                .ok_or(Error::Overflow("projecting a table"))?;
        }
        DenseTable::new(tree, self.spins, depth, out, self.denominator.clone())
    }

    /// Multiplies every weight by `num / den`.
    pub fn scaled(&self, c: &Rational) -> Result<DenseTable> {
        let num = c
            .numer()
            .to_u128()
            .ok_or(Error::Overflow("scaling a table"))?;
        let numerators = self
            .numerators
            .iter()
            .map(|&n| n.checked_mul(num))
            .collect::<Option<Vec<_>>>()
            .ok_or(Error::Overflow("scaling a table"))?;
        Ok(DenseTable {
            numerators,
            denominator: &self.denominator * c.denom(),
            ..self.clone()
        })
    }

    /// Sum of the weights of all atoms inside `rect`.
    pub fn sum_rect(&self, rect: &Rectangle) -> Rational {
        let spins = SpinSet::Finite(self.spins);
        let choices: Vec<Vec<Spin>> = (0..self.sites)
            .map(|v| {
                rect.constraint(Vertex(v))
                    .values(spins)
                    .expect("finite spins")
            })
            .collect();
        let mut acc = Accumulator::default();
        for_each_index(&choices, self.spins, |i| acc.add(self.numerators[i]));
        Rational::new(acc.finish(), self.denominator.clone())
    }

    /// Exact entrywise comparison; returns the first differing index.
    pub fn first_difference(&self, other: &DenseTable) -> Option<usize> {
        if self.len() != other.len() {
            return Some(0);
        }
        if self.denominator == other.denominator {
            return self
                .numerators
                .iter()
                .zip(&other.numerators)
                .position(|(a, b)| a != b);
        }
        (0..self.len()).find(|&i| {
            BigInt::from(self.numerators[i]) * &other.denominator
                != BigInt::from(other.numerators[i]) * &self.denominator
        })
    }
}

/// Visits the index of every atom in the product of `choices`, updating the
/// index incrementally.
fn for_each_index(choices: &[Vec<Spin>], s: u64, mut f: impl FnMut(usize)) {
    if choices.iter().any(|c| c.is_empty()) {
        return;
    }
    let places: Vec<usize> = (0..choices.len())
        .scan(1usize, |p, _| {
            let cur = *p;
            *p *= s as usize;
            Some(cur)
        })
        .collect();
    let mut pos = vec![0usize; choices.len()];
    let mut index: usize = choices
        .iter()
        .zip(&places)
        .map(|(c, p)| c[0] as usize * p)
        .sum();
    loop {
        f(index);
        let mut i = 0;
        loop {
            if i == choices.len() {
                return;
            }
            let old = choices[i][pos[i]] as usize;
            pos[i] += 1;
            if pos[i] < choices[i].len() {
                index = index - old * places[i] + choices[i][pos[i]] as usize * places[i];
                break;
            }
            pos[i] = 0;
            index = index - old * places[i] + choices[i][0] as usize * places[i];
            i += 1;
        }
    }
}

/// Sums `u128` values exactly, spilling into a big integer on overflow.
#[derive(Default)]
pub(crate) struct Accumulator {
    small: u128,
    big: BigInt,
}

impl Accumulator {
    pub(crate) fn add(&mut self, x: u128) {
        match self.small.checked_add(x) {
            Some(v) => self.small = v,
            None => {
                self.big += BigInt::from(self.small);
                self.small = x;
            }
        }
    }

    pub(crate) fn finish(self) -> BigInt {
        self.big + BigInt::from(self.small)
    }
}
