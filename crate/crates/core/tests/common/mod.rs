//! Helpers shared by the integration targets.
#![allow(dead_code)]

use std::fmt::Write;
use std::path::PathBuf;

use probgame::domain::{Domain, GuardStatus};
use probgame::ir::{Assignment, Atom, CmpOp, Configuration, Guard, LinExpr, Program, VarId};
use probgame::parser::parse_program;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::Rng;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(format!("{name}.npp"))
}

pub fn fixture(name: &str) -> Program {
    let text = std::fs::read_to_string(fixture_path(name)).unwrap();
    parse_program(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Fixtures whose reachable state space the oracle enumerates.
pub const FEASIBLE: &[&str] = &[
    "coin",
    "fig1",
    "fig1_clipped",
    "fig3_left",
    "fig3_left_clipped",
    "fig4_left",
    "fig4_left_clipped",
    "fig4_right_small",
];

/// Fully ranged fixtures small enough to audit node by node.
pub const RANGED: &[&str] = &[
    "coin",
    "fig1_clipped",
    "fig3_left_clipped",
    "fig3_right_small",
    "fig4_left_clipped",
    "fig4_right_small",
];

pub const ALL: &[&str] = &[
    "coin",
    "fig1",
    "fig1_clipped",
    "fig1_unbounded",
    "fig3_left",
    "fig3_left_clipped",
    "fig3_right",
    "fig3_right_small",
    "fig4_left",
    "fig4_left_clipped",
    "fig4_right",
    "fig4_right_small",
];

// Domain laws over two variables, checked by enumeration on a box.

pub const BOX: i64 = 8;

pub fn names() -> Vec<String> {
    vec!["x".into(), "y".into()]
}

pub fn points() -> impl Iterator<Item = Configuration> {
    (-BOX..=BOX).flat_map(|a| (-BOX..=BOX).map(move |b| Configuration(vec![a, b])))
}

/// An element as the hull of some seed configurations, optionally widened
/// by a second hull.
#[derive(Clone, Debug)]
pub struct Recipe {
    seeds: Vec<(i64, i64)>,
    widen_by: Option<Vec<(i64, i64)>>,
    top: bool,
}

pub fn recipe() -> impl Strategy<Value = Recipe> {
    let pts = prop::collection::vec((-6i64..=6, -6i64..=6), 0..4);
    (pts.clone(), prop::option::weighted(0.3, pts), prop::bool::weighted(0.05)).prop_map(
        |(seeds, widen_by, top)| Recipe {
            seeds,
            widen_by,
            top,
        },
    )
}

fn hull<D: Domain>(d: &D, pts: &[(i64, i64)]) -> D::Elem {
    pts.iter().fold(d.bottom(), |acc, &(a, b)| {
        d.join(&acc, &d.singleton(&Configuration(vec![a, b])))
    })
}

pub fn build<D: Domain>(d: &D, r: &Recipe) -> D::Elem {
    if r.top {
        return d.top();
    }
    let a = hull(d, &r.seeds);
    match &r.widen_by {
        Some(more) => d.widen(&a, &d.join(&a, &hull(d, more))),
        None => a,
    }
}

fn members<D: Domain>(d: &D, a: &D::Elem) -> Vec<Configuration> {
    points().filter(|s| d.contains(a, s)).collect()
}

fn lin() -> impl Strategy<Value = LinExpr> {
    (-3i64..=3, -3i64..=3, -10i64..=10)
        .prop_map(|(cx, cy, c)| LinExpr::from_terms(c, [(VarId(0), cx), (VarId(1), cy)]).unwrap())
}

fn op() -> impl Strategy<Value = CmpOp> {
    prop_oneof![
        Just(CmpOp::Lt),
        Just(CmpOp::Le),
        Just(CmpOp::Eq),
        Just(CmpOp::Ge),
        Just(CmpOp::Gt)
    ]
}

pub fn guard() -> impl Strategy<Value = Guard> {
    prop::collection::vec((lin(), op(), lin()), 0..3)
        .prop_map(|atoms| Guard::new(atoms.into_iter().map(|(l, o, r)| Atom::new(l, o, r)).collect()))
}

pub fn assignment() -> impl Strategy<Value = Assignment> {
    (prop::option::of(lin()), prop::option::of(lin())).prop_map(|(x, y)| {
        let mut t = Vec::new();
        if let Some(e) = x {
            t.push((VarId(0), e));
        }
        if let Some(e) = y {
            t.push((VarId(1), e));
        }
        Assignment::new(t)
    })
}

pub fn chain() -> impl Strategy<Value = Vec<(i64, i64)>> {
    prop::collection::vec((-1000i64..=1000, -1000i64..=1000), 1..60)
}

pub fn check_join<D: Domain>(d: &D, a: &D::Elem, b: &D::Elem) -> Result<(), TestCaseError> {
    let j = d.join(a, b);
    prop_assert!(d.leq(a, &j) && d.leq(b, &j));
    prop_assert!(d.equal(&j, &d.join(b, a)));
    prop_assert!(d.equal(&d.join(a, a), a));
    prop_assert!(d.equal(&d.join(a, &d.bottom()), a));
    prop_assert!(d.equal(&d.join(a, &d.top()), &d.top()));
    if d.leq(a, b) {
        prop_assert!(d.equal(&j, b));
    }
    for s in members(d, a) {
        prop_assert!(d.contains(&j, &s));
    }
    Ok(())
}

pub fn check_meet<D: Domain>(d: &D, a: &D::Elem, b: &D::Elem) -> Result<(), TestCaseError> {
    let m = d.meet(a, b);
    prop_assert!(d.leq(&m, a) && d.leq(&m, b));
    prop_assert!(d.equal(&m, &d.meet(b, a)));
    prop_assert!(d.equal(&d.meet(a, &d.top()), a));
    prop_assert!(d.is_bottom(&d.meet(a, &d.bottom())));
    for s in points() {
        if d.contains(a, &s) && d.contains(b, &s) {
            prop_assert!(d.contains(&m, &s));
        }
    }
    Ok(())
}

pub fn check_order<D: Domain>(d: &D, a: &D::Elem, b: &D::Elem) -> Result<(), TestCaseError> {
    if d.leq(a, b) {
        for s in members(d, a) {
            prop_assert!(d.contains(b, &s));
        }
    }
    Ok(())
}

/// Law (i): both arguments are below the widening.
pub fn check_widen_bound<D: Domain>(d: &D, a: &D::Elem, b: &D::Elem) -> Result<(), TestCaseError> {
    let w = d.widen(a, b);
    prop_assert!(d.leq(a, &w));
    prop_assert!(d.leq(b, &w));
    Ok(())
}

/// Law (ii): `x_{i+1} = x_i ∇ (x_i ⊔ b_i)` increases strictly at most
/// `bound` times.
pub fn check_chain<D: Domain>(d: &D, steps: &[(i64, i64)], bound: usize) -> Result<(), TestCaseError> {
    let mut x = d.bottom();
    let mut increases = 0;
    for &(a, b) in steps {
        let v = d.singleton(&Configuration(vec![a, b]));
        let next = d.widen(&x, &d.join(&x, &v));
        prop_assert!(d.leq(&x, &next));
        if !d.leq(&next, &x) {
            increases += 1;
        }
        x = next;
    }
    prop_assert!(increases <= bound, "{} strict increases", increases);
    Ok(())
}

pub fn check_assign<D: Domain>(d: &D, a: &D::Elem, c: &Assignment) -> Result<(), TestCaseError> {
    let post = d.assign(a, c);
    for s in members(d, a) {
        let t = c.apply_unchecked(&s).unwrap();
        prop_assert!(d.contains(&post, &t), "{:?} -> {:?}", s, t);
    }
    Ok(())
}

pub fn check_guard<D: Domain>(d: &D, a: &D::Elem, g: &Guard) -> Result<(), TestCaseError> {
    let m = d.meet_guard(a, g);
    prop_assert!(d.leq(&m, a));
    let split = d.guard_split(a, g);
    let status = d.guard_status(a, g);
    for s in members(d, a) {
        if g.eval(&s).unwrap() {
            prop_assert!(d.contains(&m, &s));
            prop_assert!(split.iter().any(|p| d.contains(p, &s)));
            prop_assert!(status != GuardStatus::EmptyCertain);
        } else {
            prop_assert!(status != GuardStatus::FullCertain);
        }
    }
    Ok(())
}

pub fn check_projection<D: Domain>(d: &D, a: &D::Elem) -> Result<(), TestCaseError> {
    let px = d.project(a, VarId(0));
    let py = d.project(a, VarId(1));
    prop_assert_eq!(px.is_none(), d.is_bottom(a));
    if let (Some(px), Some(py)) = (px, py) {
        for s in points() {
            let inside = px.contains(s.get(VarId(0))) && py.contains(s.get(VarId(1)));
            prop_assert_eq!(inside, d.contains(a, &s));
        }
    }
    Ok(())
}

/// Intervals: each bound jumps to infinity at most once, plus the first
/// step off bottom.
pub const INTERVAL_CHAIN: usize = 1 + 2 * 2;
/// Congruences: the first two steps, then the modulus only shrinks to a
/// proper divisor of a difference below 4000 (at most 11 halvings).
pub const CONGRUENCE_CHAIN: usize = 1 + 2 * 12;
pub const PRODUCT_CHAIN: usize = 1 + 2 * (2 + 12);

// Random programs.

/// A random program text: up to three variables in `[0,20]`, up to four
/// commands with up to three updates each. Guards keep every update inside
/// the declared ranges.
pub fn random_program<R: Rng>(rng: &mut R) -> String {
    let nv = rng.gen_range(1..=3usize);
    let var = |i: usize| format!("v{i}");
    loop {
        let init: Vec<i64> = (0..nv).map(|_| rng.gen_range(0..=20)).collect();
        let mut text = String::from("int ");
        let decls: Vec<String> = (0..nv)
            .map(|i| format!("{} in [0,20] = {}", var(i), init[i]))
            .collect();
        text.push_str(&decls.join(", "));
        text.push_str(";\n");
        let nc = rng.gen_range(1..=4);
        for c in 0..nc {
            let mut atoms = Vec::new();
            for _ in 0..rng.gen_range(0..=2) {
                let x = rng.gen_range(0..nv);
                let op = ["<", "<=", "=", ">=", ">"][rng.gen_range(0..5)];
                if nv > 1 && rng.gen_bool(0.3) {
                    let y = (x + rng.gen_range(1..nv)) % nv;
                    atoms.push(format!("({} {op} {})", var(x), var(y)));
                } else {
                    atoms.push(format!("({} {op} {})", var(x), rng.gen_range(0..=20)));
                }
            }
            let mut lo = vec![0i64; nv];
            let mut hi = vec![20i64; nv];
            let nu = rng.gen_range(1..=3);
            let weights: Vec<u32> = (0..nu).map(|_| rng.gen_range(1..=4)).collect();
            let total: u32 = weights.iter().sum();
            let mut updates = Vec::new();
            for &w in &weights {
                let mut parts = Vec::new();
                for x in 0..nv {
                    if !rng.gen_bool(0.6) {
                        continue;
                    }
                    let rhs = match rng.gen_range(0..3) {
                        0 => rng.gen_range(0..=20).to_string(),
                        1 if nv > 1 => var((x + rng.gen_range(1..nv)) % nv),
                        _ => {
                            let k = [-2i64, -1, 1, 2][rng.gen_range(0..4)];
                            lo[x] = lo[x].max(-k);
                            hi[x] = hi[x].min(20 - k);
                            if k > 0 {
                                format!("{}+{k}", var(x))
                            } else {
                                format!("{}-{}", var(x), -k)
                            }
                        }
                    };
                    parts.push(format!("({}' = {rhs})", var(x)));
                }
                if parts.is_empty() {
                    parts.push(format!("({0}' = {0})", var(0)));
                }
                updates.push(format!("{w}/{total}:{}", parts.join(" & ")));
            }
            for x in 0..nv {
                if lo[x] > 0 {
                    atoms.push(format!("({} >= {})", var(x), lo[x]));
                }
                if hi[x] < 20 {
                    atoms.push(format!("({} <= {})", var(x), hi[x]));
                }
            }
            let guard = if atoms.is_empty() {
                "true".to_string()
            } else {
                atoms.join(" & ")
            };
            let _ = writeln!(text, "C{c}: {guard} -> {};", updates.join(" + "));
        }
        let mut reach = Vec::new();
        let mut final_at_init = true;
        for _ in 0..rng.gen_range(1..=2) {
            let x = rng.gen_range(0..nv);
            let k = rng.gen_range(0..=20);
            let op = ["=", "<=", ">="][rng.gen_range(0..3)];
            final_at_init &= match op {
                "=" => init[x] == k,
                "<=" => init[x] <= k,
                _ => init[x] >= k,
            };
            reach.push(format!("({} {op} {k})", var(x)));
        }
        if final_at_init {
            continue;
        }
        let _ = write!(text, "reach: {}", reach.join(" & "));
        return text;
    }
}
