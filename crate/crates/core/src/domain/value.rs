//! Per-variable value lattices and the exact projection shared by all of them.

use std::fmt::Debug;
use std::hash::Hash;

use crate::ir::CmpOp;

/// One variable's abstract value. `meet`/`restrict` return `None` for the
/// empty set; a `Value` itself is never empty.
pub trait Value: Clone + Eq + Hash + Debug + Send + Sync + 'static {
    const NAME: &'static str;

    fn top() -> Self;
    fn constant(v: i64) -> Self;
    fn leq(&self, other: &Self) -> bool;
    fn join(&self, other: &Self) -> Self;
    fn meet(&self, other: &Self) -> Option<Self>;
    fn widen(&self, other: &Self) -> Self;
    fn contains(&self, v: i64) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn scale(&self, k: i64) -> Self;
    /// Keeps the values `v` for which `k·v op r` holds for some `r` in `rhs`.
    /// `op` is one of `<=`, `=`, `>=`.
    fn restrict(&self, k: i64, op: CmpOp, rhs: &Self) -> Option<Self>;
    /// Exact description of the concretization.
    fn projection(&self) -> Projection;
    fn render(&self) -> String;
}

/// The set `{ v ∈ [lo, hi] | v ≡ residue (mod modulus) }`; `None` bounds are
/// infinite and `modulus == 0` pins `v` to `residue`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Projection {
    pub lo: Option<i64>,
    pub hi: Option<i64>,
    pub modulus: i64,
    pub residue: i64,
}

impl Projection {
    pub fn all() -> Self {
        Projection {
            lo: None,
            hi: None,
            modulus: 1,
            residue: 0,
        }
    }

    pub fn contains(&self, v: i64) -> bool {
        self.lo.is_none_or(|lo| lo <= v)
            && self.hi.is_none_or(|hi| v <= hi)
            && congruent(v, self.residue, self.modulus)
    }

    /// Smallest member, `None` when unbounded below or empty.
    pub fn min(&self) -> Option<i64> {
        if self.modulus == 0 {
            return self.contains(self.residue).then_some(self.residue);
        }
        let lo = self.lo?;
        let v = align_up(lo, self.residue, self.modulus)?;
        self.hi.is_none_or(|hi| v <= hi).then_some(v)
    }

    /// Largest member, `None` when unbounded above or empty.
    pub fn max(&self) -> Option<i64> {
        if self.modulus == 0 {
            return self.contains(self.residue).then_some(self.residue);
        }
        let hi = self.hi?;
        let v = align_down(hi, self.residue, self.modulus)?;
        self.lo.is_none_or(|lo| lo <= v).then_some(v)
    }

    pub fn is_empty(&self) -> bool {
        if self.modulus == 0 {
            return !self.contains(self.residue);
        }
        match (self.lo, self.hi) {
            (Some(_), _) => self.min().is_none(),
            (None, Some(_)) => self.max().is_none(),
            (None, None) => false,
        }
    }

    /// Intersects with the inclusive bounds `[lo, hi]` (either may be open).
    pub fn clip(&self, lo: Option<i64>, hi: Option<i64>) -> Projection {
        let lo = match (self.lo, lo) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        let hi = match (self.hi, hi) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        Projection { lo, hi, ..*self }
    }

    /// Is every member inside `[lo, hi]`? True for the empty set.
    pub fn within(&self, lo: Option<i64>, hi: Option<i64>) -> bool {
        if self.is_empty() {
            return true;
        }
        let low_ok = match lo {
            None => true,
            Some(l) => self.min().is_some_and(|m| m >= l),
        };
        let high_ok = match hi {
            None => true,
            Some(h) => self.max().is_some_and(|m| m <= h),
        };
        low_ok && high_ok
    }

    /// Does some member lie inside `[lo, hi]`?
    pub fn meets(&self, lo: Option<i64>, hi: Option<i64>) -> bool {
        !self.clip(lo, hi).is_empty()
    }

    /// Members in increasing order; `None` if the set is infinite.
    pub fn members(&self) -> Option<Vec<i64>> {
        if self.is_empty() {
            return Some(Vec::new());
        }
        if self.modulus == 0 {
            return Some(vec![self.residue]);
        }
        let (lo, hi) = (self.min()?, self.max()?);
        let step = self.modulus as i128;
        let mut out = Vec::new();
        let mut v = lo as i128;
        while v <= hi as i128 {
            out.push(v as i64);
            v += step;
        }
        Some(out)
    }
}

pub(crate) fn congruent(v: i64, residue: i64, modulus: i64) -> bool {
    if modulus == 0 {
        v == residue
    } else {
        (v as i128 - residue as i128).rem_euclid(modulus as i128) == 0
    }
}

/// Smallest `x ≥ v` with `x ≡ r (mod m)`, `m ≥ 1`.
pub(crate) fn align_up(v: i64, r: i64, m: i64) -> Option<i64> {
    let d = (r as i128 - v as i128).rem_euclid(m as i128);
    i64::try_from(v as i128 + d).ok()
}

/// Largest `x ≤ v` with `x ≡ r (mod m)`, `m ≥ 1`.
pub(crate) fn align_down(v: i64, r: i64, m: i64) -> Option<i64> {
    let d = (v as i128 - r as i128).rem_euclid(m as i128);
    i64::try_from(v as i128 - d).ok()
}

pub(crate) fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// `(g, x, y)` with `a·x + b·y = g = gcd(a, b)`.
pub(crate) fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    if b == 0 {
        (a, 1, 0)
    } else {
        let (g, x, y) = ext_gcd(b, a.rem_euclid(b));
        (g, y, x - a.div_euclid(b) * y)
    }
}

pub(crate) fn floor_div(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

pub(crate) fn ceil_div(a: i128, b: i128) -> i128 {
    -floor_div(-a, b)
}
