//! Abstract domains: the contract used by the game builder and three
//! non-relational instances (intervals, congruences, their reduced product).

pub mod congruence;
pub mod interval;
pub mod product;
pub mod value;

use std::fmt::{self, Debug};
use std::hash::Hash;
use std::marker::PhantomData;
use std::str::FromStr;

use crate::ir::{Assignment, CmpOp, Configuration, Guard, LinExpr, VarId};

pub use congruence::Cong;
pub use interval::Itv;
pub use product::ItvCong;
pub use value::{Projection, Value};

/// Outcome of a conservative guard test on `γ(a)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GuardStatus {
    /// No member satisfies the guard.
    EmptyCertain,
    /// Every member satisfies the guard.
    FullCertain,
    Mixed,
}

/// Lattice, widening and transformers over configurations of a fixed
/// variable set.
pub trait Domain: Clone + Send + Sync {
    type Elem: Clone + Eq + Hash + Debug + Send + Sync;

    fn name(&self) -> &'static str;
    fn num_vars(&self) -> usize;
    fn bottom(&self) -> Self::Elem;
    fn top(&self) -> Self::Elem;
    fn is_bottom(&self, a: &Self::Elem) -> bool;
    fn leq(&self, a: &Self::Elem, b: &Self::Elem) -> bool;
    fn equal(&self, a: &Self::Elem, b: &Self::Elem) -> bool {
        self.leq(a, b) && self.leq(b, a)
    }
    fn join(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn meet(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn widen(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn singleton(&self, sigma: &Configuration) -> Self::Elem;
    fn contains(&self, a: &Self::Elem, sigma: &Configuration) -> bool;
    fn assign(&self, a: &Self::Elem, c: &Assignment) -> Self::Elem;
    /// Over-approximates `g(γ(a))` by a single element.
    fn meet_guard(&self, a: &Self::Elem, g: &Guard) -> Self::Elem;
    /// Finite cover of `g(γ(a))`; bottoms are dropped.
    fn guard_split(&self, a: &Self::Elem, g: &Guard) -> Vec<Self::Elem> {
        let m = self.meet_guard(a, g);
        if self.is_bottom(&m) {
            Vec::new()
        } else {
            vec![m]
        }
    }
    fn guard_status(&self, a: &Self::Elem, g: &Guard) -> GuardStatus;
    /// Exact set of values `x` takes in `γ(a)`; `None` for bottom.
    fn project(&self, a: &Self::Elem, x: VarId) -> Option<Projection>;
    fn render(&self, a: &Self::Elem) -> String;
}

/// A map from variables to per-variable values, or bottom.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Env<V> {
    Bottom,
    Vals(Vec<V>),
}

impl<V: Value> Env<V> {
    pub fn values(&self) -> Option<&[V]> {
        match self {
            Env::Bottom => None,
            Env::Vals(v) => Some(v),
        }
    }
}

/// Non-relational domain lifted from a value lattice `V`.
#[derive(Clone, Debug)]
pub struct NonRelational<V> {
    names: Vec<String>,
    _value: PhantomData<fn() -> V>,
}

pub type IntervalDomain = NonRelational<Itv>;
pub type CongruenceDomain = NonRelational<Cong>;
pub type ProductDomain = NonRelational<ItvCong>;

impl<V: Value> NonRelational<V> {
    pub fn new(names: Vec<String>) -> Self {
        NonRelational {
            names,
            _value: PhantomData,
        }
    }

    /// Builds an element from per-variable values.
    pub fn from_values(&self, vals: Vec<V>) -> Env<V> {
        assert_eq!(vals.len(), self.names.len());
        Env::Vals(vals)
    }

    fn eval(vals: &[V], e: &LinExpr) -> V {
        e.terms()
            .iter()
            .fold(V::constant(e.constant), |acc, &(x, k)| {
                acc.add(&vals[x.0].scale(k))
            })
    }

    /// Abstract value of `e` minus its `x` term.
    fn eval_without(vals: &[V], e: &LinExpr, x: VarId) -> V {
        e.terms()
            .iter()
            .filter(|(y, _)| *y != x)
            .fold(V::constant(e.constant), |acc, &(y, k)| {
                acc.add(&vals[y.0].scale(k))
            })
    }
}

impl<V: Value> Domain for NonRelational<V> {
    type Elem = Env<V>;

    fn name(&self) -> &'static str {
        V::NAME
    }

    fn num_vars(&self) -> usize {
        self.names.len()
    }

    fn bottom(&self) -> Env<V> {
        Env::Bottom
    }

    fn top(&self) -> Env<V> {
        Env::Vals(vec![V::top(); self.names.len()])
    }

    fn is_bottom(&self, a: &Env<V>) -> bool {
        matches!(a, Env::Bottom)
    }

    fn leq(&self, a: &Env<V>, b: &Env<V>) -> bool {
        match (a, b) {
            (Env::Bottom, _) => true,
            (_, Env::Bottom) => false,
            (Env::Vals(x), Env::Vals(y)) => x.iter().zip(y).all(|(p, q)| p.leq(q)),
        }
    }

    fn equal(&self, a: &Env<V>, b: &Env<V>) -> bool {
        a == b
    }

    fn join(&self, a: &Env<V>, b: &Env<V>) -> Env<V> {
        match (a, b) {
            (Env::Bottom, o) | (o, Env::Bottom) => o.clone(),
            (Env::Vals(x), Env::Vals(y)) => {
                Env::Vals(x.iter().zip(y).map(|(p, q)| p.join(q)).collect())
            }
        }
    }

    fn meet(&self, a: &Env<V>, b: &Env<V>) -> Env<V> {
        match (a, b) {
            (Env::Vals(x), Env::Vals(y)) => x
                .iter()
                .zip(y)
                .map(|(p, q)| p.meet(q))
                .collect::<Option<Vec<_>>>()
                .map_or(Env::Bottom, Env::Vals),
            _ => Env::Bottom,
        }
    }

    fn widen(&self, a: &Env<V>, b: &Env<V>) -> Env<V> {
        match (a, b) {
            (Env::Bottom, o) | (o, Env::Bottom) => o.clone(),
            (Env::Vals(x), Env::Vals(y)) => {
                Env::Vals(x.iter().zip(y).map(|(p, q)| p.widen(q)).collect())
            }
        }
    }

    fn singleton(&self, sigma: &Configuration) -> Env<V> {
        Env::Vals(sigma.values().iter().map(|&v| V::constant(v)).collect())
    }

    fn contains(&self, a: &Env<V>, sigma: &Configuration) -> bool {
        match a {
            Env::Bottom => false,
            Env::Vals(x) => x.iter().zip(sigma.values()).all(|(p, &v)| p.contains(v)),
        }
    }

    fn assign(&self, a: &Env<V>, c: &Assignment) -> Env<V> {
        let Env::Vals(x) = a else {
            return Env::Bottom;
        };
        let mut out = x.clone();
        for (target, e) in c.targets() {
            out[target.0] = Self::eval(x, e);
        }
        Env::Vals(out)
    }

    fn meet_guard(&self, a: &Env<V>, g: &Guard) -> Env<V> {
        let Env::Vals(x) = a else {
            return Env::Bottom;
        };
        let mut vals = x.clone();
        for atom in &g.atoms {
            let Ok(c) = atom.constraint() else {
                // Constant folding overflowed; keep the element.
                continue;
            };
            if c.expr.is_constant() {
                let holds = match c.op {
                    CmpOp::Le => c.expr.constant <= 0,
                    CmpOp::Ge => c.expr.constant >= 0,
                    _ => c.expr.constant == 0,
                };
                if !holds {
                    return Env::Bottom;
                }
                continue;
            }
            for &(var, k) in c.expr.terms() {
                // k·var op -(rest)
                let rhs = Self::eval_without(&vals, &c.expr, var).scale(-1);
                match vals[var.0].restrict(k, c.op, &rhs) {
                    Some(v) => vals[var.0] = v,
                    None => return Env::Bottom,
                }
            }
        }
        Env::Vals(vals)
    }

    fn guard_status(&self, a: &Env<V>, g: &Guard) -> GuardStatus {
        let Env::Vals(x) = a else {
            return GuardStatus::EmptyCertain;
        };
        if self.is_bottom(&self.meet_guard(a, g)) {
            return GuardStatus::EmptyCertain;
        }
        let certain = g.atoms.iter().all(|atom| {
            let Ok(c) = atom.constraint() else {
                return false;
            };
            let p = Self::eval(x, &c.expr).projection();
            match c.op {
                CmpOp::Le => p.max().is_some_and(|m| m <= 0),
                CmpOp::Ge => p.min().is_some_and(|m| m >= 0),
                _ => p.min() == Some(0) && p.max() == Some(0),
            }
        });
        if certain {
            GuardStatus::FullCertain
        } else {
            GuardStatus::Mixed
        }
    }

    fn project(&self, a: &Env<V>, x: VarId) -> Option<Projection> {
        a.values().map(|v| v[x.0].projection())
    }

    fn render(&self, a: &Env<V>) -> String {
        match a {
            Env::Bottom => "bottom".to_string(),
            Env::Vals(x) => self
                .names
                .iter()
                .zip(x)
                .map(|(n, v)| format!("{n}:{}", v.render()))
                .collect::<Vec<_>>()
                .join(" "),
        }
    }
}

/// Runtime selector for the three shipped domains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DomainKind {
    Interval,
    Congruence,
    Product,
}

impl DomainKind {
    pub const ALL: [DomainKind; 3] = [
        DomainKind::Interval,
        DomainKind::Congruence,
        DomainKind::Product,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DomainKind::Interval => "interval",
            DomainKind::Congruence => "congruence",
            DomainKind::Product => "product",
        }
    }
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DomainKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "interval" => Ok(DomainKind::Interval),
            "congruence" => Ok(DomainKind::Congruence),
            "product" => Ok(DomainKind::Product),
            other => Err(format!("unknown domain `{other}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::Atom;

    fn names(ns: &[&str]) -> Vec<String> {
        ns.iter().map(|s| s.to_string()).collect()
    }

    fn itv(lo: i64, hi: i64) -> Itv {
        Itv::range(lo, hi).unwrap()
    }

    fn atom(l: LinExpr, op: CmpOp, r: LinExpr) -> Atom {
        Atom::new(l, op, r)
    }

    fn var(i: usize) -> LinExpr {
        LinExpr::var(VarId(i))
    }

    fn k(c: i64) -> LinExpr {
        LinExpr::constant(c)
    }

    #[test]
    fn tops_and_bottoms() {
        let d = IntervalDomain::new(names(&["x"]));
        assert_eq!(d.render(&d.top()), "x:(-inf,+inf)");
        assert!(d.is_bottom(&d.meet(&d.top(), &d.bottom())));
        let c = CongruenceDomain::new(names(&["x"]));
        assert_eq!(c.render(&c.top()), "x:(1,0)");
        assert!(!c.contains(&c.bottom(), &Configuration(vec![0])));
    }

    #[test]
    fn singletons_render() {
        let d = IntervalDomain::new(names(&["nrp", "ctr"]));
        let s = d.singleton(&Configuration(vec![0, 1]));
        assert_eq!(d.render(&s), "nrp:[0,0] ctr:[1,1]");
        let p = ProductDomain::new(names(&["x"]));
        assert_eq!(p.render(&p.singleton(&Configuration(vec![7]))), "x:[7,7]&(0,7)");
        let c = CongruenceDomain::new(names(&["x"]));
        assert_eq!(c.render(&c.singleton(&Configuration(vec![7]))), "x:(0,7)");
    }

    #[test]
    fn loop_guard_refines_counter() {
        // nrp index 0, ctr index 1
        let d = IntervalDomain::new(names(&["nrp", "ctr"]));
        let a = d.from_values(vec![Itv::new(Some(0), None).unwrap(), Itv::constant(1)]);
        let g = Guard::new(vec![
            atom(var(1), CmpOp::Eq, k(1)),
            atom(var(0), CmpOp::Lt, k(100)),
        ]);
        let split = d.guard_split(&a, &g);
        assert_eq!(split, vec![d.from_values(vec![itv(0, 99), Itv::constant(1)])]);
        assert_eq!(d.guard_status(&a, &g), GuardStatus::Mixed);
        let root = d.from_values(vec![Itv::constant(0), Itv::constant(1)]);
        assert_eq!(d.guard_status(&root, &g), GuardStatus::FullCertain);
        let exit = Guard::new(vec![atom(var(0), CmpOp::Ge, k(100))]);
        assert!(d.guard_split(&root, &exit).is_empty());
        assert_eq!(d.guard_status(&root, &exit), GuardStatus::EmptyCertain);
        let two = d.from_values(vec![Itv::constant(0), Itv::constant(2)]);
        let first = Guard::new(vec![atom(var(1), CmpOp::Eq, k(1))]);
        assert_eq!(d.guard_status(&two, &first), GuardStatus::EmptyCertain);
    }

    #[test]
    fn relational_guard_propagates_bounds() {
        let d = IntervalDomain::new(names(&["c", "i"]));
        let a = d.from_values(vec![itv(0, 5), itv(3, 10)]);
        let g = Guard::new(vec![atom(var(0), CmpOp::Ge, var(1))]);
        let got = d.meet_guard(&a, &g);
        // independent oracle: hull of satisfying pairs
        let pairs: Vec<(i64, i64)> = (0..=5)
            .flat_map(|c| (3..=10).map(move |i| (c, i)))
            .filter(|(c, i)| c >= i)
            .collect();
        let hull = |f: fn(&(i64, i64)) -> i64| {
            let vs: Vec<i64> = pairs.iter().map(f).collect();
            itv(*vs.iter().min().unwrap(), *vs.iter().max().unwrap())
        };
        assert_eq!(got, d.from_values(vec![hull(|p| p.0), hull(|p| p.1)]));
        assert_eq!(got, d.from_values(vec![itv(3, 5), itv(3, 5)]));
    }

    #[test]
    fn parallel_assignment_reads_prestate() {
        let d = IntervalDomain::new(names(&["x", "y"]));
        let a = d.from_values(vec![itv(0, 10), itv(0, 0)]);
        let neg = Assignment::new([(VarId(0), var(0).checked_scale(-1).unwrap())]);
        assert_eq!(d.assign(&a, &neg), d.from_values(vec![itv(-10, 0), itv(0, 0)]));
        let inc = Assignment::new([(VarId(0), var(0).checked_add(&k(1)).unwrap())]);
        let z = d.from_values(vec![Itv::constant(0), itv(0, 0)]);
        assert_eq!(d.assign(&z, &inc), d.from_values(vec![itv(1, 1), itv(0, 0)]));
        let swap = Assignment::new([(VarId(0), var(1)), (VarId(1), var(0))]);
        assert_eq!(d.assign(&a, &swap), d.from_values(vec![itv(0, 0), itv(0, 10)]));
    }

    #[test]
    fn congruence_guard_on_single_variable() {
        let d = CongruenceDomain::new(names(&["x"]));
        let g = Guard::new(vec![atom(var(0), CmpOp::Eq, k(4))]);
        let a = d.from_values(vec![Cong::new(2, 0)]);
        assert_eq!(d.meet_guard(&a, &g), d.from_values(vec![Cong::constant(4)]));
        let odd = d.from_values(vec![Cong::new(2, 1)]);
        assert_eq!(d.guard_status(&odd, &g), GuardStatus::EmptyCertain);
    }

    #[test]
    fn domain_kind_parses() {
        for k in DomainKind::ALL {
            assert_eq!(k.as_str().parse::<DomainKind>().unwrap(), k);
        }
        assert!("octagon".parse::<DomainKind>().is_err());
        assert_eq!(IntervalDomain::new(vec![]).name(), "interval");
        assert_eq!(ProductDomain::new(vec![]).name(), "product");
        assert_eq!(CongruenceDomain::new(vec![]).name(), "congruence");
    }
}
