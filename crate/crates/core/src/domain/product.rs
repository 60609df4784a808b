//! Reduced product of intervals and congruences.

use std::fmt;

use super::congruence::Cong;
use super::interval::Itv;
use super::value::{align_down, align_up, Projection, Value};
use crate::ir::CmpOp;

/// An interval paired with a congruence, kept reduced: interval bounds sit
/// on the congruence class, and a single remaining value is pinned on both
/// sides.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ItvCong {
    itv: Itv,
    cong: Cong,
}

impl ItvCong {
    /// Reduces the pair; `None` if the two sides share no value.
    pub fn reduce(itv: Itv, cong: Cong) -> Option<ItvCong> {
        if let Some(c) = cong.as_constant() {
            return itv.contains(c).then(|| ItvCong {
                itv: Itv::constant(c),
                cong,
            });
        }
        let (m, r) = (cong.modulus(), cong.residue());
        let lo = match itv.lo() {
            Some(l) => Some(align_up(l, r, m).unwrap_or(l)),
            None => None,
        };
        let hi = match itv.hi() {
            Some(h) => Some(align_down(h, r, m).unwrap_or(h)),
            None => None,
        };
        let itv = Itv::new(lo, hi)?;
        if !cong.contains_any(&itv) {
            return None;
        }
        match itv.as_constant() {
            Some(v) => Some(ItvCong {
                itv,
                cong: Cong::constant(v),
            }),
            None => Some(ItvCong { itv, cong }),
        }
    }

    pub fn itv(&self) -> Itv {
        self.itv
    }

    pub fn cong(&self) -> Cong {
        self.cong
    }

    fn lift(itv: Itv, cong: Cong) -> ItvCong {
        // Both sides over-approximate the same set, so they cannot be disjoint
        // unless that set is empty, which lifted operations never produce.
        ItvCong::reduce(itv, cong).unwrap_or(ItvCong {
            itv,
            cong: Cong::top(),
        })
    }
}

impl Cong {
    fn contains_any(&self, itv: &Itv) -> bool {
        let p = Projection {
            lo: itv.lo(),
            hi: itv.hi(),
            modulus: self.modulus(),
            residue: self.residue(),
        };
        !p.is_empty()
    }
}

impl Value for ItvCong {
    const NAME: &'static str = "product";

    fn top() -> Self {
        ItvCong {
            itv: Itv::top(),
            cong: Cong::top(),
        }
    }

    fn constant(v: i64) -> Self {
        ItvCong {
            itv: Itv::constant(v),
            cong: Cong::constant(v),
        }
    }

    fn leq(&self, other: &Self) -> bool {
        self.itv.leq(&other.itv) && self.cong.leq(&other.cong)
    }

    fn join(&self, other: &Self) -> Self {
        ItvCong::lift(self.itv.join(&other.itv), self.cong.join(&other.cong))
    }

    fn meet(&self, other: &Self) -> Option<Self> {
        ItvCong::reduce(self.itv.meet(&other.itv)?, self.cong.meet(&other.cong)?)
    }

    fn widen(&self, other: &Self) -> Self {
        ItvCong::lift(self.itv.widen(&other.itv), self.cong.widen(&other.cong))
    }

    fn contains(&self, v: i64) -> bool {
        self.itv.contains(v) && self.cong.contains(v)
    }

    fn add(&self, other: &Self) -> Self {
        ItvCong::lift(self.itv.add(&other.itv), self.cong.add(&other.cong))
    }

    fn scale(&self, k: i64) -> Self {
        ItvCong::lift(self.itv.scale(k), self.cong.scale(k))
    }

    fn restrict(&self, k: i64, op: CmpOp, rhs: &Self) -> Option<Self> {
        let itv = self.itv.restrict(k, op, &rhs.itv)?;
        let cong = self.cong.restrict(k, op, &rhs.cong)?;
        ItvCong::reduce(itv, cong)
    }

    fn projection(&self) -> Projection {
        Projection {
            lo: self.itv.lo(),
            hi: self.itv.hi(),
            modulus: self.cong.modulus(),
            residue: self.cong.residue(),
        }
    }

    fn render(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ItvCong {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}&{}", self.itv, self.cong)
    }
}
