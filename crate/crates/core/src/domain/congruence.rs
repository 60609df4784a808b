//! Integer congruences `x ≡ r (mod m)`.

use std::fmt;

use super::value::{congruent, ext_gcd, gcd, Projection, Value};
use crate::ir::CmpOp;

/// `(m, r)`: `m == 0` is the constant `r`; otherwise `0 <= r < m`, and
/// `(1, 0)` is every integer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Cong {
    modulus: i64,
    residue: i64,
}

impl Cong {
    /// Normalizes `r` into `[0, m)`; `m` is taken in absolute value. Values
    /// that cannot be represented fall back to top.
    pub fn new(modulus: i128, residue: i128) -> Cong {
        let m = modulus.abs();
        if m == 0 {
            return match i64::try_from(residue) {
                Ok(r) => Cong {
                    modulus: 0,
                    residue: r,
                },
                Err(_) => Cong::top(),
            };
        }
        match i64::try_from(m) {
            Ok(mi) => Cong {
                modulus: mi,
                residue: residue.rem_euclid(m) as i64,
            },
            Err(_) => Cong::top(),
        }
    }

    pub fn modulus(&self) -> i64 {
        self.modulus
    }

    pub fn residue(&self) -> i64 {
        self.residue
    }

    pub fn as_constant(&self) -> Option<i64> {
        (self.modulus == 0).then_some(self.residue)
    }

    /// Solutions of `k·v ≡ r (mod m)`; `m >= 1`.
    fn solve_linear(k: i128, r: i128, m: i128) -> Option<Cong> {
        let (g, x, _) = ext_gcd(k.rem_euclid(m), m);
        if r.rem_euclid(g) != 0 {
            return None;
        }
        let m2 = m / g;
        let v = ((r / g).rem_euclid(m2) * x.rem_euclid(m2)).rem_euclid(m2);
        Some(Cong::new(m2, v))
    }
}

impl Value for Cong {
    const NAME: &'static str = "congruence";

    fn top() -> Self {
        Cong {
            modulus: 1,
            residue: 0,
        }
    }

    fn constant(v: i64) -> Self {
        Cong {
            modulus: 0,
            residue: v,
        }
    }

    fn leq(&self, other: &Self) -> bool {
        if other.modulus == 0 {
            return self.modulus == 0 && self.residue == other.residue;
        }
        self.modulus % other.modulus == 0 && congruent(self.residue, other.residue, other.modulus)
    }

    fn join(&self, other: &Self) -> Self {
        let diff = self.residue as i128 - other.residue as i128;
        let m = gcd(gcd(self.modulus as i128, other.modulus as i128), diff);
        Cong::new(m, self.residue as i128)
    }

    fn meet(&self, other: &Self) -> Option<Self> {
        if self.modulus == 0 {
            return other.contains(self.residue).then_some(*self);
        }
        if other.modulus == 0 {
            return self.contains(other.residue).then_some(*other);
        }
        let (m1, r1) = (self.modulus as i128, self.residue as i128);
        let (m2, r2) = (other.modulus as i128, other.residue as i128);
        let (g, p, _) = ext_gcd(m1, m2);
        if (r2 - r1).rem_euclid(g) != 0 {
            return None;
        }
        let lcm = m1 / g * m2;
        if i64::try_from(lcm).is_err() {
            // Not representable; keep the finer operand (over-approximation).
            return Some(if m1 >= m2 { *self } else { *other });
        }
        let step = m2 / g;
        let t = (((r2 - r1) / g).rem_euclid(step) * p.rem_euclid(step)).rem_euclid(step);
        Some(Cong::new(lcm, r1 + m1 * t))
    }

    fn widen(&self, other: &Self) -> Self {
        self.join(other)
    }

    fn contains(&self, v: i64) -> bool {
        congruent(v, self.residue, self.modulus)
    }

    fn add(&self, other: &Self) -> Self {
        let m = gcd(self.modulus as i128, other.modulus as i128);
        Cong::new(m, self.residue as i128 + other.residue as i128)
    }

    fn scale(&self, k: i64) -> Self {
        if k == 0 {
            return Cong::constant(0);
        }
        Cong::new(
            self.modulus as i128 * k as i128,
            self.residue as i128 * k as i128,
        )
    }

    fn restrict(&self, k: i64, op: CmpOp, rhs: &Self) -> Option<Self> {
        let k = k as i128;
        match op {
            CmpOp::Eq => {
                let solved = if rhs.modulus == 0 {
                    let r = rhs.residue as i128;
                    if k == 0 {
                        return (r == 0).then_some(*self);
                    }
                    if r % k != 0 {
                        return None;
                    }
                    Cong::new(0, r / k)
                } else if k == 0 {
                    if rhs.contains(0) {
                        return Some(*self);
                    }
                    return None;
                } else {
                    Cong::solve_linear(k, rhs.residue as i128, rhs.modulus as i128)?
                };
                self.meet(&solved)
            }
            _ => {
                // Inequalities only bite when both sides are constants.
                match (self.as_constant(), rhs.as_constant()) {
                    (Some(v), Some(r)) => {
                        let lhs = k * v as i128;
                        let r = r as i128;
                        let holds = if op == CmpOp::Le { lhs <= r } else { lhs >= r };
                        holds.then_some(*self)
                    }
                    _ => Some(*self),
                }
            }
        }
    }

    fn projection(&self) -> Projection {
        Projection {
            lo: None,
            hi: None,
            modulus: self.modulus,
            residue: self.residue,
        }
    }

    fn render(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Cong {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.modulus, self.residue)
    }
}
