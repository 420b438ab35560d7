use num::One;

use crate::cylinder::{SiteConstraint, Spin, SpinSet};
use crate::error::{Error, Result};
use crate::value::{Ext, Rational};
use crate::weights::Weights;

/// Transition weights `P(q, r)` along parent → child edges.
///
/// Over the naturals a kernel has finitely many explicit rows and a default
/// row used for every larger parent spin; each row is a [`Weights`] with a
/// geometric tail, which is what keeps marginal sums in closed form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TransitionKernel {
    spins: SpinSet,
    rows: Vec<Weights>,
    default_row: Option<Weights>,
}

impl TransitionKernel {
    /// A `s × s` kernel for finite spins.
    pub fn finite(rows: Vec<Vec<Rational>>) -> Result<Self> {
        let s = rows.len() as u64;
        let spins = SpinSet::finite(s)?;
        let mut out = Vec::with_capacity(rows.len());
        for (q, row) in rows.into_iter().enumerate() {
            if row.len() as u64 != s {
                return Err(Error::InvalidParameter(format!(
                    "kernel row {q} has {} entries, expected {s}",
                    row.len()
                )));
            }
            out.push(Weights::finite(row)?.fit(spins));
        }
        Ok(TransitionKernel {
            spins,
            rows: out,
            default_row: None,
        })
    }

    /// A kernel over the naturals: `rows[q]` for small `q`, `default_row`
    /// for every other parent spin.
    pub fn naturals(rows: Vec<Weights>, default_row: Weights) -> Result<Self> {
        for (q, row) in rows.iter().chain(std::iter::once(&default_row)).enumerate() {
            if !row.is_finite_valued() {
                return Err(Error::InvalidParameter(format!("kernel row {q} has infinite entries")));
            }
        }
        Ok(TransitionKernel {
            spins: SpinSet::Naturals,
            rows,
            default_row: Some(default_row),
        })
    }

    /// The same row for every parent spin.
    pub fn uniform_rows(row: Weights, spins: SpinSet) -> Result<Self> {
        match spins {
            SpinSet::Finite(s) => Ok(TransitionKernel {
                spins,
                rows: vec![row.fit(spins); s as usize],
                default_row: None,
            }),
            SpinSet::Naturals => Self::naturals(Vec::new(), row),
        }
    }

    pub fn spins(&self) -> SpinSet {
        self.spins
    }

    pub fn explicit_rows(&self) -> &[Weights] {
        &self.rows
    }

    pub fn default_row(&self) -> Option<&Weights> {
        self.default_row.as_ref()
    }

    pub fn row(&self, q: Spin) -> &Weights {
        self.rows
            .get(q as usize)
            .or(self.default_row.as_ref())
            .expect("spin within the kernel's domain")
    }

    pub fn entry(&self, q: Spin, r: Spin) -> Ext {
        self.row(q).get(r)
    }

    pub fn row_sum(&self, q: Spin) -> Ext {
        self.row(q).total(self.spins)
    }

    /// Every distinct row, each with a representative parent spin.
    pub fn distinct_rows(&self) -> Vec<(Spin, &Weights)> {
        let mut out: Vec<(Spin, &Weights)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(q, r)| (q as Spin, r))
            .collect();
        if let Some(d) = &self.default_row {
            out.push((self.rows.len() as Spin, d));
        }
        out
    }

    /// True when every row sums to exactly one.
    pub fn is_stochastic(&self) -> bool {
        let one = Ext::Finite(Rational::one());
        self.distinct_rows()
            .iter()
            .all(|(_, r)| r.total(self.spins) == one)
    }

    /// `q ↦ Σ_{r admitted by c} P(q, r) · message(r)`.
    pub fn apply(&self, c: &SiteConstraint, message: &Weights) -> Weights {
        let prefix: Vec<Ext> = self
            .rows
            .iter()
            .map(|row| row.mul(message).sum_over(c, self.spins))
            .collect();
        match &self.default_row {
            None => Weights::from_parts(prefix, None),
            Some(d) => {
                let c_val = d.mul(message).sum_over(c, self.spins);
                Weights::from_parts(prefix, Some(c_val))
            }
        }
    }

    pub fn render_rows(&self) -> String {
        self.rows
            .iter()
            .map(Weights::render)
            .collect::<Vec<_>>()
            .join("; ")
    }
}
