//! Program representation: variables, configurations, linear expressions,
//! guards, assignments and guarded commands.
//!
//! All values are immutable once a [`Program`] has been validated. Integers
//! are 64-bit; overflow is reported instead of wrapping.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Index of a declared variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IrError {
    #[error("integer overflow while evaluating `{0}`")]
    Overflow(String),
    #[error("variable `{name}` takes value {value} outside its range [{lo},{hi}]")]
    RangeViolation {
        name: String,
        value: i64,
        lo: i64,
        hi: i64,
    },
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("duplicate command `{0}`")]
    DuplicateCommand(String),
    #[error("probabilities of command `{name}` sum to {sum}, expected 1")]
    BadProbabilitySum { name: String, sum: String },
    #[error("probability {prob} of command `{name}` is not in (0,1]")]
    BadProbability { name: String, prob: String },
    #[error("command `{0}` has no updates")]
    NoUpdates(String),
    #[error("empty range [{lo},{hi}] for variable `{name}`")]
    EmptyRange { name: String, lo: i64, hi: i64 },
    #[error("initial value {value} of `{name}` is outside its range [{lo},{hi}]")]
    InitOutOfRange {
        name: String,
        value: i64,
        lo: i64,
        hi: i64,
    },
    #[error("the initial configuration satisfies the reach condition")]
    InitSatisfiesReach,
    #[error("unknown variable index {0}")]
    UndeclaredVariable(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub range: Option<(i64, i64)>,
    pub init: i64,
}

impl VarDecl {
    pub fn new(name: impl Into<String>, range: Option<(i64, i64)>, init: i64) -> Self {
        VarDecl {
            name: name.into(),
            range,
            init,
        }
    }

    pub fn in_range(&self, v: i64) -> bool {
        match self.range {
            Some((lo, hi)) => lo <= v && v <= hi,
            None => true,
        }
    }
}

/// A total assignment of integer values to the declared variables,
/// indexed by [`VarId`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration(pub Vec<i64>);

impl Configuration {
    pub fn get(&self, v: VarId) -> i64 {
        self.0[v.0]
    }

    pub fn values(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `constant + Σ coeff·var`. Terms are kept sorted by variable with no zero
/// coefficients, so structural equality is semantic equality.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct LinExpr {
    pub constant: i64,
    terms: Vec<(VarId, i64)>,
}

impl LinExpr {
    pub fn constant(c: i64) -> Self {
        LinExpr {
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn var(v: VarId) -> Self {
        LinExpr {
            constant: 0,
            terms: vec![(v, 1)],
        }
    }

    /// Builds an expression, merging repeated variables. Fails on overflow.
    pub fn from_terms(
        constant: i64,
        terms: impl IntoIterator<Item = (VarId, i64)>,
    ) -> Result<Self, IrError> {
        let mut merged: BTreeMap<VarId, i64> = BTreeMap::new();
        for (v, c) in terms {
            let slot = merged.entry(v).or_insert(0);
            *slot = slot
                .checked_add(c)
                .ok_or_else(|| IrError::Overflow("coefficient".into()))?;
        }
        Ok(LinExpr {
            constant,
            terms: merged.into_iter().filter(|&(_, c)| c != 0).collect(),
        })
    }

    pub fn terms(&self) -> &[(VarId, i64)] {
        &self.terms
    }

    pub fn coeff(&self, v: VarId) -> i64 {
        self.terms
            .iter()
            .find(|(w, _)| *w == v)
            .map(|&(_, c)| c)
            .unwrap_or(0)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.terms.iter().map(|&(v, _)| v)
    }

    pub fn checked_add(&self, other: &LinExpr) -> Result<LinExpr, IrError> {
        let constant = self
            .constant
            .checked_add(other.constant)
            .ok_or_else(|| IrError::Overflow("constant".into()))?;
        LinExpr::from_terms(
            constant,
            self.terms.iter().chain(other.terms.iter()).copied(),
        )
    }

    pub fn checked_scale(&self, k: i64) -> Result<LinExpr, IrError> {
        let ovf = || IrError::Overflow("scaled expression".into());
        let constant = self.constant.checked_mul(k).ok_or_else(ovf)?;
        let mut terms = Vec::with_capacity(self.terms.len());
        for &(v, c) in &self.terms {
            terms.push((v, c.checked_mul(k).ok_or_else(ovf)?));
        }
        LinExpr::from_terms(constant, terms)
    }

    pub fn checked_sub(&self, other: &LinExpr) -> Result<LinExpr, IrError> {
        self.checked_add(&other.checked_scale(-1)?)
    }

    /// `constant + Σ coeff(x)·σ(x)`, failing on overflow.
    pub fn eval(&self, sigma: &Configuration) -> Result<i64, IrError> {
        let mut acc = self.constant;
        for &(v, c) in &self.terms {
            let x = *sigma
                .0
                .get(v.0)
                .ok_or(IrError::UndeclaredVariable(v.0))?;
            acc = c
                .checked_mul(x)
                .and_then(|t| acc.checked_add(t))
                .ok_or_else(|| IrError::Overflow(format!("{self:?} at {sigma:?}")))?;
        }
        Ok(acc)
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> impl fmt::Display + 'a {
        LinExprDisplay { expr: self, names }
    }
}

struct LinExprDisplay<'a> {
    expr: &'a LinExpr,
    names: &'a [String],
}

impl fmt::Display for LinExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for &(v, c) in self.expr.terms() {
            let name = &self.names[v.0];
            let mag = c.unsigned_abs();
            if first {
                if c < 0 {
                    write!(f, "-")?;
                }
            } else if c < 0 {
                write!(f, "-")?;
            } else {
                write!(f, "+")?;
            }
            if mag == 1 {
                write!(f, "{name}")?;
            } else {
                write!(f, "{mag}*{name}")?;
            }
            first = false;
        }
        let k = self.expr.constant;
        if first {
            write!(f, "{k}")
        } else if k > 0 {
            write!(f, "+{k}")
        } else if k < 0 {
            write!(f, "-{}", k.unsigned_abs())
        } else {
            Ok(())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Gt => lhs > rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub lhs: LinExpr,
    pub op: CmpOp,
    pub rhs: LinExpr,
}

/// An atom rewritten as `expr op 0` with `op ∈ {<=, =, >=}`; strict
/// comparisons are tightened by one (integers).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub expr: LinExpr,
    pub op: CmpOp,
}

impl Atom {
    pub fn new(lhs: LinExpr, op: CmpOp, rhs: LinExpr) -> Self {
        Atom { lhs, op, rhs }
    }

    pub fn holds(&self, sigma: &Configuration) -> Result<bool, IrError> {
        Ok(self.op.holds(self.lhs.eval(sigma)?, self.rhs.eval(sigma)?))
    }

    pub fn constraint(&self) -> Result<Constraint, IrError> {
        let diff = self.lhs.checked_sub(&self.rhs)?;
        let shift = |e: &LinExpr, k: i64| -> Result<LinExpr, IrError> {
            e.checked_add(&LinExpr::constant(k))
        };
        Ok(match self.op {
            CmpOp::Lt => Constraint {
                expr: shift(&diff, 1)?,
                op: CmpOp::Le,
            },
            CmpOp::Gt => Constraint {
                expr: shift(&diff, -1)?,
                op: CmpOp::Ge,
            },
            op => Constraint { expr: diff, op },
        })
    }

    /// The single variable this atom mentions, if it mentions exactly one.
    pub fn single_var(&self) -> Option<VarId> {
        let diff = self.lhs.checked_sub(&self.rhs).ok()?;
        match diff.terms() {
            [(v, _)] => Some(*v),
            _ => None,
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.lhs.vars().chain(self.rhs.vars())
    }

    /// Atoms whose disjunction is the complement of this one.
    pub fn negation(&self) -> Vec<Atom> {
        let with = |op| Atom::new(self.lhs.clone(), op, self.rhs.clone());
        match self.op {
            CmpOp::Lt => vec![with(CmpOp::Ge)],
            CmpOp::Le => vec![with(CmpOp::Gt)],
            CmpOp::Ge => vec![with(CmpOp::Lt)],
            CmpOp::Gt => vec![with(CmpOp::Le)],
            CmpOp::Eq => vec![with(CmpOp::Lt), with(CmpOp::Gt)],
        }
    }
}

/// Conjunction of atoms; the empty conjunction is `true`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Guard {
    pub atoms: Vec<Atom>,
}

impl Guard {
    pub fn tt() -> Self {
        Guard { atoms: Vec::new() }
    }

    pub fn new(atoms: Vec<Atom>) -> Self {
        Guard { atoms }
    }

    pub fn is_true(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn eval(&self, sigma: &Configuration) -> Result<bool, IrError> {
        for a in &self.atoms {
            if !a.holds(sigma)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// True when every atom mentions at most one variable.
    pub fn is_non_relational(&self) -> bool {
        self.atoms.iter().all(|a| {
            a.lhs
                .checked_sub(&a.rhs)
                .map(|d| d.terms().len() <= 1)
                .unwrap_or(false)
        })
    }
}

/// Parallel assignment: every right-hand side reads the pre-state.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Assignment {
    targets: Vec<(VarId, LinExpr)>,
}

impl Assignment {
    pub fn identity() -> Self {
        Assignment::default()
    }

    /// Later entries for the same variable replace earlier ones.
    pub fn new(targets: impl IntoIterator<Item = (VarId, LinExpr)>) -> Self {
        let map: BTreeMap<VarId, LinExpr> = targets.into_iter().collect();
        Assignment {
            targets: map.into_iter().collect(),
        }
    }

    pub fn targets(&self) -> &[(VarId, LinExpr)] {
        &self.targets
    }

    /// Applies the update without range checks.
    pub fn apply_unchecked(&self, sigma: &Configuration) -> Result<Configuration, IrError> {
        let mut next = sigma.clone();
        for (v, e) in &self.targets {
            next.0[v.0] = e.eval(sigma)?;
        }
        Ok(next)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Update {
    pub probability: BigRational,
    pub assignment: Assignment,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GuardedCommand {
    pub name: String,
    pub guard: Guard,
    pub updates: Vec<Update>,
}

impl GuardedCommand {
    pub fn check(&self) -> Result<(), IrError> {
        if self.updates.is_empty() {
            return Err(IrError::NoUpdates(self.name.clone()));
        }
        let mut sum = BigRational::zero();
        for u in &self.updates {
            if !u.probability.is_positive() || u.probability > BigRational::one() {
                return Err(IrError::BadProbability {
                    name: self.name.clone(),
                    prob: u.probability.to_string(),
                });
            }
            sum += &u.probability;
        }
        if !sum.is_one() {
            return Err(IrError::BadProbabilitySum {
                name: self.name.clone(),
                sum: sum.to_string(),
            });
        }
        Ok(())
    }
}

/// A validated nondeterministic probabilistic program with its reach
/// condition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    decls: Vec<VarDecl>,
    names: Vec<String>,
    init: Configuration,
    commands: Vec<GuardedCommand>,
    reach: Guard,
}

impl Program {
    pub fn new(
        decls: Vec<VarDecl>,
        commands: Vec<GuardedCommand>,
        reach: Guard,
    ) -> Result<Program, IrError> {
        let mut seen = HashSet::new();
        for d in &decls {
            if !seen.insert(d.name.clone()) {
                return Err(IrError::DuplicateVariable(d.name.clone()));
            }
            if let Some((lo, hi)) = d.range {
                if lo > hi {
                    return Err(IrError::EmptyRange {
                        name: d.name.clone(),
                        lo,
                        hi,
                    });
                }
                if !d.in_range(d.init) {
                    return Err(IrError::InitOutOfRange {
                        name: d.name.clone(),
                        value: d.init,
                        lo,
                        hi,
                    });
                }
            }
        }
        let n = decls.len();
        let check_expr = |e: &LinExpr| -> Result<(), IrError> {
            match e.vars().find(|v| v.0 >= n) {
                Some(v) => Err(IrError::UndeclaredVariable(v.0)),
                None => Ok(()),
            }
        };
        let check_guard = |g: &Guard| -> Result<(), IrError> {
            for a in &g.atoms {
                check_expr(&a.lhs)?;
                check_expr(&a.rhs)?;
            }
            Ok(())
        };
        let mut cmd_names = HashSet::new();
        for c in &commands {
            if !cmd_names.insert(c.name.clone()) {
                return Err(IrError::DuplicateCommand(c.name.clone()));
            }
            c.check()?;
            check_guard(&c.guard)?;
            for u in &c.updates {
                for (v, e) in u.assignment.targets() {
                    if v.0 >= n {
                        return Err(IrError::UndeclaredVariable(v.0));
                    }
                    check_expr(e)?;
                }
            }
        }
        check_guard(&reach)?;
        let init = Configuration(decls.iter().map(|d| d.init).collect());
        if reach.eval(&init)? {
            return Err(IrError::InitSatisfiesReach);
        }
        let names = decls.iter().map(|d| d.name.clone()).collect();
        Ok(Program {
            decls,
            names,
            init,
            commands,
            reach,
        })
    }

    pub fn decls(&self) -> &[VarDecl] {
        &self.decls
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn num_vars(&self) -> usize {
        self.decls.len()
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.names.iter().position(|n| n == name).map(VarId)
    }

    pub fn init(&self) -> &Configuration {
        &self.init
    }

    pub fn commands(&self) -> &[GuardedCommand] {
        &self.commands
    }

    pub fn reach(&self) -> &Guard {
        &self.reach
    }

    pub fn ranges(&self) -> Vec<Option<(i64, i64)>> {
        self.decls.iter().map(|d| d.range).collect()
    }

    /// True when every variable has a declared range.
    pub fn fully_ranged(&self) -> bool {
        self.decls.iter().all(|d| d.range.is_some())
    }

    pub fn eval_guard(&self, g: &Guard, sigma: &Configuration) -> Result<bool, IrError> {
        g.eval(sigma)
    }

    pub fn is_final(&self, sigma: &Configuration) -> Result<bool, IrError> {
        self.reach.eval(sigma)
    }

    /// `⟦c⟧(σ)`, rejecting results outside a declared range.
    pub fn apply_assignment(
        &self,
        c: &Assignment,
        sigma: &Configuration,
    ) -> Result<Configuration, IrError> {
        let next = c.apply_unchecked(sigma)?;
        for (v, _) in c.targets() {
            let d = &self.decls[v.0];
            let value = next.get(*v);
            if let Some((lo, hi)) = d.range {
                if value < lo || value > hi {
                    return Err(IrError::RangeViolation {
                        name: d.name.clone(),
                        value,
                        lo,
                        hi,
                    });
                }
            }
        }
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(v: &[i64]) -> Configuration {
        Configuration(v.to_vec())
    }

    fn x() -> VarId {
        VarId(0)
    }

    #[test]
    fn eval_expr_examples() {
        let e = LinExpr::from_terms(2, [(x(), 3)]).unwrap();
        assert_eq!(e.eval(&cfg(&[0])).unwrap(), 2);
        assert_eq!(LinExpr::constant(5).eval(&cfg(&[9, 9])).unwrap(), 5);
        // c - i + 2 with c = 0, i = 1
        let e = LinExpr::from_terms(2, [(VarId(0), 1), (VarId(1), -1)]).unwrap();
        assert_eq!(e.eval(&cfg(&[0, 1])).unwrap(), 1);
    }

    #[test]
    fn eval_expr_overflow_is_an_error() {
        let e = LinExpr::from_terms(1, [(x(), i64::MAX)]).unwrap();
        assert!(matches!(e.eval(&cfg(&[2])), Err(IrError::Overflow(_))));
        let e = LinExpr::from_terms(i64::MAX, [(x(), 1)]).unwrap();
        assert!(matches!(e.eval(&cfg(&[1])), Err(IrError::Overflow(_))));
    }

    #[test]
    fn repeated_terms_merge() {
        let e = LinExpr::from_terms(0, [(x(), 2), (x(), -2)]).unwrap();
        assert!(e.is_constant());
    }

    #[test]
    fn parallel_assignment_reads_pre_state() {
        // x <- 3x + 2, y <- y - x  on {x:2, y:0, c:0}
        let (xv, yv) = (VarId(0), VarId(1));
        let c = Assignment::new([
            (xv, LinExpr::from_terms(2, [(xv, 3)]).unwrap()),
            (yv, LinExpr::from_terms(0, [(yv, 1), (xv, -1)]).unwrap()),
        ]);
        assert_eq!(c.apply_unchecked(&cfg(&[2, 0, 0])).unwrap(), cfg(&[8, -2, 0]));
        assert_eq!(
            Assignment::identity().apply_unchecked(&cfg(&[4, 5])).unwrap(),
            cfg(&[4, 5])
        );
    }

    #[test]
    fn strict_atoms_tighten() {
        let a = Atom::new(LinExpr::var(x()), CmpOp::Lt, LinExpr::constant(100));
        let c = a.constraint().unwrap();
        assert_eq!(c.op, CmpOp::Le);
        assert_eq!(c.expr, LinExpr::from_terms(-99, [(x(), 1)]).unwrap());
    }

    #[test]
    fn program_validation() {
        let decls = vec![VarDecl::new("x", Some((0, 3)), 0)];
        let cmd = |name: &str, p: (i64, i64)| GuardedCommand {
            name: name.into(),
            guard: Guard::tt(),
            updates: vec![Update {
                probability: BigRational::new(p.0.into(), p.1.into()),
                assignment: Assignment::identity(),
            }],
        };
        let reach = Guard::new(vec![Atom::new(
            LinExpr::var(x()),
            CmpOp::Eq,
            LinExpr::constant(3),
        )]);
        assert!(Program::new(decls.clone(), vec![cmd("A", (1, 1))], reach.clone()).is_ok());
        assert!(matches!(
            Program::new(decls.clone(), vec![cmd("A", (1, 2))], reach.clone()),
            Err(IrError::BadProbabilitySum { .. })
        ));
        assert!(matches!(
            Program::new(
                decls.clone(),
                vec![cmd("A", (1, 1)), cmd("A", (1, 1))],
                reach.clone()
            ),
            Err(IrError::DuplicateCommand(_))
        ));
        let reach0 = Guard::new(vec![Atom::new(
            LinExpr::var(x()),
            CmpOp::Eq,
            LinExpr::constant(0),
        )]);
        assert_eq!(
            Program::new(decls.clone(), vec![cmd("A", (1, 1))], reach0),
            Err(IrError::InitSatisfiesReach)
        );
        let bad = vec![VarDecl::new("x", Some((1, 3)), 0)];
        assert!(matches!(
            Program::new(bad, vec![cmd("A", (1, 1))], reach),
            Err(IrError::InitOutOfRange { .. })
        ));
    }

    #[test]
    fn apply_assignment_checks_ranges() {
        let decls = vec![VarDecl::new("x", Some((0, 3)), 0)];
        let reach = Guard::new(vec![Atom::new(
            LinExpr::var(x()),
            CmpOp::Eq,
            LinExpr::constant(3),
        )]);
        let p = Program::new(
            decls,
            vec![GuardedCommand {
                name: "A".into(),
                guard: Guard::tt(),
                updates: vec![Update {
                    probability: BigRational::one(),
                    assignment: Assignment::identity(),
                }],
            }],
            reach,
        )
        .unwrap();
        let inc = Assignment::new([(x(), LinExpr::from_terms(1, [(x(), 1)]).unwrap())]);
        assert_eq!(p.apply_assignment(&inc, &cfg(&[2])).unwrap(), cfg(&[3]));
        assert!(matches!(
            p.apply_assignment(&inc, &cfg(&[3])),
            Err(IrError::RangeViolation { value: 4, .. })
        ));
    }

    #[test]
    fn negation_is_complement() {
        for op in [CmpOp::Lt, CmpOp::Le, CmpOp::Eq, CmpOp::Ge, CmpOp::Gt] {
            let a = Atom::new(LinExpr::var(x()), op, LinExpr::constant(2));
            let neg = a.negation();
            for v in -3..=6 {
                let s = cfg(&[v]);
                let any = neg.iter().any(|n| n.holds(&s).unwrap());
                assert_eq!(any, !a.holds(&s).unwrap(), "{op:?} at {v}");
            }
        }
    }
}
