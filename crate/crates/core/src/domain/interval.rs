//! Integer intervals with infinite bounds.

use std::fmt;

use super::value::{ceil_div, floor_div, Projection, Value};
use crate::ir::CmpOp;

/// `[lo, hi]` with `None` standing for `−∞` / `+∞`. Never empty.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Itv {
    lo: Option<i64>,
    hi: Option<i64>,
}

impl Itv {
    /// `None` when `lo > hi`.
    pub fn new(lo: Option<i64>, hi: Option<i64>) -> Option<Itv> {
        match (lo, hi) {
            (Some(l), Some(h)) if l > h => None,
            _ => Some(Itv { lo, hi }),
        }
    }

    pub fn range(lo: i64, hi: i64) -> Option<Itv> {
        Itv::new(Some(lo), Some(hi))
    }

    pub fn lo(&self) -> Option<i64> {
        self.lo
    }

    pub fn hi(&self) -> Option<i64> {
        self.hi
    }

    pub fn as_constant(&self) -> Option<i64> {
        match (self.lo, self.hi) {
            (Some(l), Some(h)) if l == h => Some(l),
            _ => None,
        }
    }

    fn with_lo(self, lo: i128) -> Option<Itv> {
        let lo = clamp_lo(lo);
        Itv::new(max_lo(self.lo, lo), self.hi)
    }

    fn with_hi(self, hi: i128) -> Option<Itv> {
        let hi = clamp_hi(hi);
        Itv::new(self.lo, min_hi(self.hi, hi))
    }
}

/// A lower bound that does not fit in `i64` is dropped (sound loosening).
fn clamp_lo(v: i128) -> Option<i64> {
    i64::try_from(v).ok()
}

fn clamp_hi(v: i128) -> Option<i64> {
    i64::try_from(v).ok()
}

fn max_lo(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, y) => x.or(y),
    }
}

fn min_hi(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, y) => x.or(y),
    }
}

impl Value for Itv {
    const NAME: &'static str = "interval";

    fn top() -> Self {
        Itv { lo: None, hi: None }
    }

    fn constant(v: i64) -> Self {
        Itv {
            lo: Some(v),
            hi: Some(v),
        }
    }

    fn leq(&self, other: &Self) -> bool {
        let lo_ok = match (other.lo, self.lo) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(o), Some(s)) => o <= s,
        };
        let hi_ok = match (other.hi, self.hi) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(o), Some(s)) => s <= o,
        };
        lo_ok && hi_ok
    }

    fn join(&self, other: &Self) -> Self {
        let lo = match (self.lo, other.lo) {
            (Some(a), Some(b)) => Some(a.min(b)),
            _ => None,
        };
        let hi = match (self.hi, other.hi) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        Itv { lo, hi }
    }

    fn meet(&self, other: &Self) -> Option<Self> {
        Itv::new(max_lo(self.lo, other.lo), min_hi(self.hi, other.hi))
    }

    fn widen(&self, other: &Self) -> Self {
        let lo = match (self.lo, other.lo) {
            (Some(a), Some(b)) if b >= a => Some(a),
            _ => None,
        };
        let hi = match (self.hi, other.hi) {
            (Some(a), Some(b)) if b <= a => Some(a),
            _ => None,
        };
        Itv { lo, hi }
    }

    fn contains(&self, v: i64) -> bool {
        self.lo.is_none_or(|l| l <= v) && self.hi.is_none_or(|h| v <= h)
    }

    fn add(&self, other: &Self) -> Self {
        let lo = match (self.lo, other.lo) {
            (Some(a), Some(b)) => clamp_lo(a as i128 + b as i128),
            _ => None,
        };
        let hi = match (self.hi, other.hi) {
            (Some(a), Some(b)) => clamp_hi(a as i128 + b as i128),
            _ => None,
        };
        Itv { lo, hi }
    }

    fn scale(&self, k: i64) -> Self {
        let mul = |b: Option<i64>| b.map(|b| b as i128 * k as i128);
        match k.signum() {
            0 => Itv::constant(0),
            1 => Itv {
                lo: mul(self.lo).and_then(clamp_lo),
                hi: mul(self.hi).and_then(clamp_hi),
            },
            _ => Itv {
                lo: mul(self.hi).and_then(clamp_lo),
                hi: mul(self.lo).and_then(clamp_hi),
            },
        }
    }

    fn restrict(&self, k: i64, op: CmpOp, rhs: &Self) -> Option<Self> {
        if k == 0 {
            let ok = match op {
                CmpOp::Le => rhs.hi.is_none_or(|h| 0 <= h),
                CmpOp::Ge => rhs.lo.is_none_or(|l| 0 >= l),
                _ => rhs.contains(0),
            };
            return ok.then_some(*self);
        }
        let k = k as i128;
        let mut out = *self;
        // k·v <= hi(rhs)
        if matches!(op, CmpOp::Le | CmpOp::Eq) {
            if let Some(h) = rhs.hi {
                out = if k > 0 {
                    out.with_hi(floor_div(h as i128, k))?
                } else {
                    out.with_lo(ceil_div(h as i128, k))?
                };
            }
        }
        // k·v >= lo(rhs)
        if matches!(op, CmpOp::Ge | CmpOp::Eq) {
            if let Some(l) = rhs.lo {
                out = if k > 0 {
                    out.with_lo(ceil_div(l as i128, k))?
                } else {
                    out.with_hi(floor_div(l as i128, k))?
                };
            }
        }
        Some(out)
    }

    fn projection(&self) -> Projection {
        Projection {
            lo: self.lo,
            hi: self.hi,
            modulus: 1,
            residue: 0,
        }
    }

    fn render(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Itv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.lo {
            Some(l) => write!(f, "[{l},")?,
            None => write!(f, "(-inf,")?,
        }
        match self.hi {
            Some(h) => write!(f, "{h}]"),
            None => write!(f, "+inf)"),
        }
    }
}
