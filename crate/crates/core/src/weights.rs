//! Spin-indexed weight sequences with closed-form sums.
//!
//! A [`Weights`] value assigns an element of `[0, ∞]` to every spin. For
//! finite spin sets it is a plain vector. Over the naturals it is an explicit
//! prefix followed by a geometric tail `first · ratio^(q - len)` with
//! `0 ≤ ratio ≤ 1`; `ratio = 1` gives a constant tail. This class is closed
//! under the pointwise products and constrained sums that tree
//! marginalization needs, so every sum is exact.

use num::{One, Signed, Zero};

use crate::cylinder::{SiteConstraint, Spin, SpinSet};
use crate::error::{Error, Result};
use crate::value::{fmt_rational, Ext, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Tail {
    pub first: Ext,
    pub ratio: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Weights {
    prefix: Vec<Ext>,
    tail: Option<Tail>,
}

impl Weights {
    /// Finitely supported weights (zero beyond the list).
    pub fn finite(values: Vec<Rational>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| v.is_negative()) {
            return Err(Error::InvalidParameter(format!(
                "negative weight {}",
                fmt_rational(v)
            )));
        }
        Ok(Weights {
            prefix: values.into_iter().map(Ext::Finite).collect(),
            tail: None,
        })
    }

    /// Explicit prefix followed by `first · ratio^j` for `j = 0, 1, …`.
    pub fn with_tail(prefix: Vec<Rational>, first: Rational, ratio: Rational) -> Result<Self> {
        if first.is_negative() || ratio.is_negative() || ratio > Rational::one() {
            return Err(Error::InvalidParameter(format!(
                "geometric tail needs first >= 0 and 0 <= ratio <= 1, got ({}, {})",
                fmt_rational(&first),
                fmt_rational(&ratio)
            )));
        }
        let mut w = Self::finite(prefix)?;
        w.tail = Some(Tail {
            first: Ext::Finite(first),
            ratio,
        });
        Ok(w.normalized())
    }

    /// The same value at every spin.
    pub fn constant(c: Ext, spins: SpinSet) -> Self {
        match spins {
            SpinSet::Finite(s) => Weights {
                prefix: vec![c; s as usize],
                tail: None,
            },
            SpinSet::Naturals => Weights {
                prefix: Vec::new(),
                tail: Some(Tail {
                    first: c,
                    ratio: Rational::one(),
                }),
            }
            .normalized(),
        }
    }

    /// Explicit values followed by an optional constant tail.
    pub(crate) fn from_parts(prefix: Vec<Ext>, constant_tail: Option<Ext>) -> Self {
        Weights {
            prefix,
            tail: constant_tail.map(|first| Tail {
                first,
                ratio: Rational::one(),
            }),
        }
        .normalized()
    }

    /// True when every spin has weight exactly one.
    pub fn is_all_ones(&self, spins: SpinSet) -> bool {
        let one = Ext::one();
        match spins {
            SpinSet::Finite(s) => (0..s).all(|q| self.get(q) == one),
            SpinSet::Naturals => {
                self.prefix.iter().all(|x| *x == one)
                    && self
                        .tail
                        .as_ref()
                        .is_some_and(|t| t.first == one && t.ratio.is_one())
            }
        }
    }

    pub fn prefix(&self) -> &[Ext] {
        &self.prefix
    }

    pub fn tail(&self) -> Option<&Tail> {
        self.tail.as_ref()
    }

    /// Index from which the tail pattern applies.
    pub fn explicit_len(&self) -> usize {
        self.prefix.len()
    }

    fn normalized(mut self) -> Self {
        if let Some(t) = &self.tail {
            if t.first.is_zero() {
                self.tail = None;
            } else if t.ratio.is_zero() {
                let first = t.first.clone();
                self.tail = None;
                self.prefix.push(first);
            }
        }
        self
    }

    /// Pads or truncates to exactly the spins of a finite set.
    pub fn fit(mut self, spins: SpinSet) -> Self {
        if let SpinSet::Finite(s) = spins {
            self = self.extended(s as usize);
            self.prefix.truncate(s as usize);
            self.tail = None;
        }
        self
    }

    pub fn get(&self, q: Spin) -> Ext {
        let q = q as usize;
        if q < self.prefix.len() {
            return self.prefix[q].clone();
        }
        match &self.tail {
            None => Ext::zero(),
            Some(t) => tail_term(t, q - self.prefix.len()),
        }
    }

    /// Materializes the tail up to index `len`.
    fn extended(&self, len: usize) -> Self {
        if len <= self.prefix.len() {
            return self.clone();
        }
        let mut prefix = self.prefix.clone();
        prefix.extend((self.prefix.len()..len).map(|q| self.get(q as Spin)));
        let tail = self.tail.as_ref().map(|t| Tail {
            first: tail_term(t, len - self.prefix.len()),
            ratio: t.ratio.clone(),
        });
        Weights { prefix, tail }.normalized()
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Weights) -> Weights {
        let len = self.prefix.len().max(other.prefix.len());
        let (a, b) = (self.extended(len), other.extended(len));
        let prefix = a.prefix.iter().zip(&b.prefix).map(|(x, y)| x * y).collect();
        let tail = match (&a.tail, &b.tail) {
            (Some(x), Some(y)) => Some(Tail {
                first: &x.first * &y.first,
                ratio: &x.ratio * &y.ratio,
            }),
            _ => None,
        };
        Weights { prefix, tail }.normalized()
    }

    pub fn scale(&self, c: &Ext) -> Weights {
        self.mul(&Weights {
            prefix: Vec::new(),
            tail: Some(Tail {
                first: c.clone(),
                ratio: Rational::one(),
            }),
        })
    }

    pub fn pow(&self, e: u32) -> Weights {
        let prefix = self.prefix.iter().map(|x| x.pow(e)).collect();
        let tail = self.tail.as_ref().map(|t| Tail {
            first: t.first.pow(e),
            ratio: num::pow(t.ratio.clone(), e as usize),
        });
        Weights { prefix, tail }.normalized()
    }

    fn tail_sum(&self) -> Ext {
        match &self.tail {
            None => Ext::zero(),
            Some(t) => match &t.first {
                Ext::Infinite => Ext::Infinite,
                Ext::Finite(f) if f.is_zero() => Ext::zero(),
                Ext::Finite(_) if t.ratio.is_one() => Ext::Infinite,
                Ext::Finite(f) => Ext::Finite(f / (Rational::one() - &t.ratio)),
            },
        }
    }

    /// `Σ_q w(q)` over the spins admitted by `c`.
    pub fn sum_over(&self, c: &SiteConstraint, spins: SpinSet) -> Ext {
        match spins {
            SpinSet::Finite(s) => (0..s).filter(|&q| c.admits(q)).map(|q| self.get(q)).sum(),
            SpinSet::Naturals => match c {
                SiteConstraint::In(set) => set.iter().map(|&q| self.get(q)).sum(),
                SiteConstraint::Any => self.total(spins),
                SiteConstraint::NotIn(set) => {
                    let head: Ext = self
                        .prefix
                        .iter()
                        .enumerate()
                        .filter(|(q, _)| !set.contains(&(*q as Spin)))
                        .map(|(_, w)| w.clone())
                        .sum();
                    let tail = match self.tail_sum() {
                        Ext::Infinite => Ext::Infinite,
                        Ext::Finite(total) => {
                            let removed: Rational = set
                                .iter()
                                .filter(|&&q| q as usize >= self.prefix.len())
                                .filter_map(|&q| self.get(q).into_finite())
                                .sum();
                            Ext::Finite(total - removed)
                        }
                    };
                    head + tail
                }
            },
        }
    }

    pub fn total(&self, spins: SpinSet) -> Ext {
        match spins {
            SpinSet::Finite(_) => self.sum_over(&SiteConstraint::Any, spins),
            SpinSet::Naturals => self.prefix.iter().cloned().sum::<Ext>() + self.tail_sum(),
        }
    }

    /// Largest index with a possibly non-zero weight, if finitely supported.
    pub fn support_bound(&self) -> Option<usize> {
        if self.tail.is_some() {
            return None;
        }
        Some(self.prefix.len())
    }

    /// Canonical text: space-separated prefix and an optional
    /// `geom(first,ratio)` tail.
    pub fn render(&self) -> String {
        let mut parts: Vec<String> = self.prefix.iter().map(Ext::render).collect();
        if let Some(t) = &self.tail {
            parts.push(format!("geom({},{})", t.first.render(), fmt_rational(&t.ratio)));
        }
        if parts.is_empty() {
            "0".to_string()
        } else {
            parts.join(" ")
        }
    }

    pub fn is_finite_valued(&self) -> bool {
        self.prefix.iter().all(Ext::is_finite)
            && self.tail.as_ref().is_none_or(|t| t.first.is_finite())
    }
}

fn tail_term(t: &Tail, j: usize) -> Ext {
    match &t.first {
        Ext::Infinite => {
            if t.ratio.is_zero() && j > 0 {
                Ext::zero()
            } else {
                Ext::Infinite
            }
        }
        Ext::Finite(f) => Ext::Finite(f * num::pow(t.ratio.clone(), j)),
    }
}
