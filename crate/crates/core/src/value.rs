//! Exact non-negative values, possibly infinite.
//!
//! Measures in this crate take values in `[0, +∞]`. Arithmetic follows the
//! measure-theoretic convention `0 · ∞ = 0`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul};

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

/// Builds the rational `num / den`. Panics on a zero denominator.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// `2^-e` as an exact rational.
pub fn pow2_neg(e: u32) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << e as usize)
}

/// Renders a rational as `p/q`, or `p` when the denominator is one.
pub fn fmt_rational(q: &Rational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Parses `p/q` or an integer literal. Decimal points are rejected.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    let valid = |t: &str| {
        let t = t.strip_prefix('-').unwrap_or(t);
        !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit())
    };
    match s.split_once('/') {
        Some((n, d)) => {
            if !valid(n) || !valid(d) {
                return None;
            }
            let d: BigInt = d.parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(Rational::new(n.parse().ok()?, d))
        }
        None => {
            if !valid(s) {
                return None;
            }
            Some(Rational::from_integer(s.parse().ok()?))
        }
    }
}

/// An element of `[0, +∞]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Ext {
    Finite(Rational),
    Infinite,
}

impl Ext {
    pub fn zero() -> Self {
        Ext::Finite(Rational::zero())
    }

    pub fn one() -> Self {
        Ext::Finite(Rational::one())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Ext::Finite(q) if q.is_zero())
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Ext::Finite(_))
    }

    pub fn finite(&self) -> Option<&Rational> {
        match self {
            Ext::Finite(q) => Some(q),
            Ext::Infinite => None,
        }
    }

    pub fn into_finite(self) -> Option<Rational> {
        match self {
            Ext::Finite(q) => Some(q),
            Ext::Infinite => None,
        }
    }

    pub fn pow(&self, e: u32) -> Ext {
        match self {
            _ if e == 0 => Ext::one(),
            Ext::Finite(q) => Ext::Finite(num::pow(q.clone(), e as usize)),
            Ext::Infinite => Ext::Infinite,
        }
    }

    /// Subtraction of a finite amount; `None` if the result would be negative.
    pub fn checked_sub(&self, rhs: &Rational) -> Option<Ext> {
        match self {
            Ext::Infinite => Some(Ext::Infinite),
            Ext::Finite(q) => {
                let d = q - rhs;
                (!d.is_negative()).then_some(Ext::Finite(d))
            }
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Ext::Finite(q) => q.to_f64().unwrap_or(f64::NAN),
            Ext::Infinite => f64::INFINITY,
        }
    }

    /// `p/q` for finite values and `inf` otherwise.
    pub fn render(&self) -> String {
        match self {
            Ext::Finite(q) => fmt_rational(q),
            Ext::Infinite => "inf".to_string(),
        }
    }
}

impl From<Rational> for Ext {
    fn from(q: Rational) -> Self {
        debug_assert!(!q.is_negative(), "negative measure value {q}");
        Ext::Finite(q)
    }
}

impl fmt::Display for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl Add for Ext {
    type Output = Ext;
    fn add(self, rhs: Ext) -> Ext {
        match (self, rhs) {
            (Ext::Finite(a), Ext::Finite(b)) => Ext::Finite(a + b),
            _ => Ext::Infinite,
        }
    }
}

impl Add<&Ext> for &Ext {
    type Output = Ext;
    fn add(self, rhs: &Ext) -> Ext {
        match (self, rhs) {
            (Ext::Finite(a), Ext::Finite(b)) => Ext::Finite(a + b),
            _ => Ext::Infinite,
        }
    }
}

impl Mul for Ext {
    type Output = Ext;
    fn mul(self, rhs: Ext) -> Ext {
        &self * &rhs
    }
}

impl Mul<&Ext> for &Ext {
    type Output = Ext;
    fn mul(self, rhs: &Ext) -> Ext {
        match (self, rhs) {
            (Ext::Finite(a), Ext::Finite(b)) => Ext::Finite(a * b),
            (a, b) if a.is_zero() || b.is_zero() => Ext::zero(),
            _ => Ext::Infinite,
        }
    }
}

impl std::iter::Sum for Ext {
    fn sum<I: Iterator<Item = Ext>>(iter: I) -> Ext {
        iter.fold(Ext::zero(), |a, b| a + b)
    }
}

impl PartialOrd for Ext {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ext {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Ext::Finite(a), Ext::Finite(b)) => a.cmp(b),
            (Ext::Finite(_), Ext::Infinite) => Ordering::Less,
            (Ext::Infinite, Ext::Finite(_)) => Ordering::Greater,
            (Ext::Infinite, Ext::Infinite) => Ordering::Equal,
        }
    }
}
