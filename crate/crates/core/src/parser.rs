//! Parser and pretty-printer for the guarded-command language.
//!
//! ```text
//! int nrp = 0, ctr = 1;
//! A1: (ctr = 1) & (nrp < 100) -> 0.99:(nrp' = nrp+1) + 0.01:(ctr' = 2);
//! reach: (ctr = 3) & (nrp < 1)
//! ```
//!
//! Declarations may carry an inclusive range (`int x in [0,20] = 0;`).
//! Probabilities are decimal literals or fractions `p/q`, parsed exactly.
//! Multi-target updates are written `(x'=3*x+2)&(y'=y-x)` or
//! `(x'=3*x+2 & y'=y-x)` and are applied in parallel. `//` starts a comment.

use std::collections::{HashMap, HashSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::ir::{
    Assignment, Atom, CmpOp, Configuration, Guard, GuardedCommand, LinExpr, Program, Update,
    VarDecl, VarId,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    DuplicateName,
    BadProbabilitySum,
    InitOutOfRange,
    InitSatisfiesReach,
    UndeclaredVariable,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseErrorKind::Syntax => "syntax",
            ParseErrorKind::DuplicateName => "duplicate-name",
            ParseErrorKind::BadProbabilitySum => "bad-probability-sum",
            ParseErrorKind::InitOutOfRange => "init-out-of-range",
            ParseErrorKind::InitSatisfiesReach => "init-satisfies-reach",
            ParseErrorKind::UndeclaredVariable => "undeclared-variable",
        })
    }
}

/// Positions are 1-based.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{line}:{column}: {kind} error: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub kind: ParseErrorKind,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(String),
    Decimal(String),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Int(s) | Tok::Decimal(s) => write!(f, "`{s}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

const SYMBOLS: &[&str] = &[
    "->", "<=", ">=", "==", "&&", ";", ",", ":", "(", ")", "[", "]", "+", "-", "*", "/", "&", "'",
    "=", "<", ">",
];

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start_col = col;
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                i += 1;
                col += 1;
            }
            out.push(Token {
                tok: Tok::Ident(s),
                line,
                column: start_col,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                s.push(chars[i]);
                i += 1;
                col += 1;
            }
            let mut decimal = false;
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                decimal = true;
                s.push('.');
                i += 1;
                col += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    s.push(chars[i]);
                    i += 1;
                    col += 1;
                }
            }
            out.push(Token {
                tok: if decimal { Tok::Decimal(s) } else { Tok::Int(s) },
                line,
                column: start_col,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(sym) => {
                i += sym.len();
                col += sym.len();
                out.push(Token {
                    tok: Tok::Sym(sym),
                    line,
                    column: start_col,
                });
            }
            None => {
                return Err(ParseError {
                    line,
                    column: col,
                    message: format!("unexpected character `{c}`"),
                    kind: ParseErrorKind::Syntax,
                })
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    vars: HashMap<String, VarId>,
    decls: Vec<VarDecl>,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn here(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err_at(&self, t: &Token, kind: ParseErrorKind, message: impl Into<String>) -> ParseError {
        ParseError {
            line: t.line,
            column: t.column,
            message: message.into(),
            kind,
        }
    }

    fn syntax(&self, message: impl Into<String>) -> ParseError {
        let t = self.here().clone();
        let m = format!("{}, found {}", message.into(), t.tok);
        self.err_at(&t, ParseErrorKind::Syntax, m)
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<Token> {
        if self.is_sym(s) {
            Ok(self.bump())
        } else {
            Err(self.syntax(format!("expected `{s}`")))
        }
    }

    fn ident(&mut self) -> PResult<(String, Token)> {
        match self.peek().clone() {
            Tok::Ident(s) => Ok((s, self.bump())),
            _ => Err(self.syntax("expected identifier")),
        }
    }

    fn int_literal(&mut self) -> PResult<i64> {
        let neg = self.eat_sym("-");
        let t = self.here().clone();
        match &t.tok {
            Tok::Int(s) => {
                self.bump();
                let text = if neg { format!("-{s}") } else { s.clone() };
                text.parse::<i64>().map_err(|_| {
                    self.err_at(&t, ParseErrorKind::Syntax, "integer literal out of range")
                })
            }
            _ => Err(self.syntax("expected integer")),
        }
    }

    fn lookup(&self, name: &str, t: &Token) -> PResult<VarId> {
        self.vars.get(name).copied().ok_or_else(|| {
            self.err_at(
                t,
                ParseErrorKind::UndeclaredVariable,
                format!("undeclared variable `{name}`"),
            )
        })
    }

    fn overflow(&self, t: &Token) -> ParseError {
        self.err_at(t, ParseErrorKind::Syntax, "integer overflow in expression")
    }

    // expr := ["+"|"-"] term (("+"|"-") term)*
    fn expr(&mut self) -> PResult<LinExpr> {
        let start = self.here().clone();
        let mut acc = if self.eat_sym("-") {
            self.term()?
                .checked_scale(-1)
                .map_err(|_| self.overflow(&start))?
        } else {
            self.eat_sym("+");
            self.term()?
        };
        loop {
            let t = self.here().clone();
            if self.eat_sym("+") {
                let rhs = self.term()?;
                acc = acc.checked_add(&rhs).map_err(|_| self.overflow(&t))?;
            } else if self.eat_sym("-") {
                let rhs = self.term()?;
                acc = acc.checked_sub(&rhs).map_err(|_| self.overflow(&t))?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> PResult<LinExpr> {
        let mut acc = self.factor()?;
        loop {
            let t = self.here().clone();
            if !self.eat_sym("*") {
                return Ok(acc);
            }
            let rhs = self.factor()?;
            acc = if acc.is_constant() {
                rhs.checked_scale(acc.constant)
            } else if rhs.is_constant() {
                acc.checked_scale(rhs.constant)
            } else {
                return Err(self.err_at(&t, ParseErrorKind::Syntax, "non-linear product"));
            }
            .map_err(|_| self.overflow(&t))?;
        }
    }

    fn factor(&mut self) -> PResult<LinExpr> {
        let t = self.here().clone();
        match t.tok.clone() {
            Tok::Int(s) => {
                self.bump();
                let k = s.parse::<i64>().map_err(|_| {
                    self.err_at(&t, ParseErrorKind::Syntax, "integer literal out of range")
                })?;
                Ok(LinExpr::constant(k))
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(LinExpr::var(self.lookup(&name, &t)?))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Sym("-") => {
                self.bump();
                self.factor()?
                    .checked_scale(-1)
                    .map_err(|_| self.overflow(&t))
            }
            _ => Err(self.syntax("expected expression")),
        }
    }

    fn cmp_op(&mut self) -> PResult<CmpOp> {
        let op = match self.peek() {
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym("=") | Tok::Sym("==") => CmpOp::Eq,
            Tok::Sym(">=") => CmpOp::Ge,
            Tok::Sym(">") => CmpOp::Gt,
            _ => return Err(self.syntax("expected comparison operator")),
        };
        self.bump();
        Ok(op)
    }

    fn atom(&mut self) -> PResult<Atom> {
        if self.is_sym("(") {
            let save = self.pos;
            self.bump();
            if let Ok(a) = self.atom() {
                if self.eat_sym(")") {
                    return Ok(a);
                }
            }
            self.pos = save;
        }
        let lhs = self.expr()?;
        let op = self.cmp_op()?;
        let rhs = self.expr()?;
        Ok(Atom::new(lhs, op, rhs))
    }

    fn guard(&mut self) -> PResult<Guard> {
        if self.is_kw("true") {
            self.bump();
            return Ok(Guard::tt());
        }
        let mut atoms = vec![self.atom()?];
        while self.eat_sym("&") || self.eat_sym("&&") {
            atoms.push(self.atom()?);
        }
        Ok(Guard::new(atoms))
    }

    fn probability(&mut self) -> PResult<BigRational> {
        let t = self.here().clone();
        let value = match &t.tok {
            Tok::Int(s) => {
                self.bump();
                let num: BigInt = s.parse().expect("lexer yields digits");
                if self.eat_sym("/") {
                    let dt = self.here().clone();
                    let den: BigInt = match &dt.tok {
                        Tok::Int(d) => {
                            self.bump();
                            d.parse().expect("lexer yields digits")
                        }
                        _ => return Err(self.syntax("expected denominator")),
                    };
                    if den.is_zero() {
                        return Err(self.err_at(&dt, ParseErrorKind::Syntax, "zero denominator"));
                    }
                    BigRational::new(num, den)
                } else {
                    BigRational::from_integer(num)
                }
            }
            Tok::Decimal(s) => {
                self.bump();
                parse_decimal(s)
            }
            _ => return Err(self.syntax("expected probability")),
        };
        if value.is_zero() || value > BigRational::one() {
            return Err(self.err_at(
                &t,
                ParseErrorKind::BadProbabilitySum,
                format!("probability {value} is not in (0,1]"),
            ));
        }
        Ok(value)
    }

    fn assign(&mut self, out: &mut Vec<(VarId, LinExpr)>, seen: &mut HashSet<VarId>) -> PResult<()> {
        let (name, t) = self.ident()?;
        let v = self.lookup(&name, &t)?;
        self.expect_sym("'")?;
        self.expect_sym("=")?;
        let e = self.expr()?;
        if !seen.insert(v) {
            return Err(self.err_at(
                &t,
                ParseErrorKind::DuplicateName,
                format!("variable `{name}` assigned twice in one update"),
            ));
        }
        out.push((v, e));
        Ok(())
    }

    fn update(&mut self) -> PResult<Update> {
        let probability = self.probability()?;
        self.expect_sym(":")?;
        let mut targets = Vec::new();
        let mut seen = HashSet::new();
        if self.is_kw("true") {
            self.bump();
        } else {
            loop {
                self.expect_sym("(")?;
                self.assign(&mut targets, &mut seen)?;
                while self.eat_sym("&") {
                    self.assign(&mut targets, &mut seen)?;
                }
                self.expect_sym(")")?;
                if !(self.is_sym("&") && matches!(self.peek_at(1), Tok::Sym("("))) {
                    break;
                }
                self.bump();
            }
        }
        Ok(Update {
            probability,
            assignment: Assignment::new(targets),
        })
    }

    fn decl_list(&mut self) -> PResult<()> {
        self.bump(); // `int`
        loop {
            let (name, t) = self.ident()?;
            if self.vars.contains_key(&name) {
                return Err(self.err_at(
                    &t,
                    ParseErrorKind::DuplicateName,
                    format!("variable `{name}` declared twice"),
                ));
            }
            let range = if self.is_kw("in") {
                self.bump();
                self.expect_sym("[")?;
                let lo = self.int_literal()?;
                self.expect_sym(",")?;
                let hi = self.int_literal()?;
                self.expect_sym("]")?;
                if lo > hi {
                    return Err(self.err_at(&t, ParseErrorKind::Syntax, "empty range"));
                }
                Some((lo, hi))
            } else {
                None
            };
            self.expect_sym("=")?;
            let init = self.int_literal()?;
            let decl = VarDecl::new(name.clone(), range, init);
            if !decl.in_range(init) {
                return Err(self.err_at(
                    &t,
                    ParseErrorKind::InitOutOfRange,
                    format!("initial value {init} of `{name}` is outside its range"),
                ));
            }
            self.vars.insert(name, VarId(self.decls.len()));
            self.decls.push(decl);
            if !self.eat_sym(",") {
                break;
            }
        }
        self.expect_sym(";")?;
        Ok(())
    }

    fn program(&mut self) -> PResult<Program> {
        while self.is_kw("int") {
            self.decl_list()?;
        }
        let mut commands: Vec<GuardedCommand> = Vec::new();
        let mut names = HashSet::new();
        while !self.is_kw("reach") {
            if matches!(self.peek(), Tok::Eof) {
                return Err(self.syntax("expected `reach:` clause"));
            }
            let (name, t) = self.ident()?;
            if !names.insert(name.clone()) {
                return Err(self.err_at(
                    &t,
                    ParseErrorKind::DuplicateName,
                    format!("command `{name}` defined twice"),
                ));
            }
            self.expect_sym(":")?;
            let guard = self.guard()?;
            self.expect_sym("->")?;
            let mut updates = vec![self.update()?];
            while self.eat_sym("+") {
                updates.push(self.update()?);
            }
            self.expect_sym(";")?;
            let sum: BigRational = updates.iter().map(|u| u.probability.clone()).sum();
            if !sum.is_one() {
                return Err(self.err_at(
                    &t,
                    ParseErrorKind::BadProbabilitySum,
                    format!("probabilities of `{name}` sum to {sum}"),
                ));
            }
            commands.push(GuardedCommand {
                name,
                guard,
                updates,
            });
        }
        if commands.is_empty() {
            return Err(self.syntax("expected at least one command"));
        }
        let reach_tok = self.bump();
        self.expect_sym(":")?;
        let reach = self.guard()?;
        self.eat_sym(";");
        if !matches!(self.peek(), Tok::Eof) {
            return Err(self.syntax("expected end of input after `reach` clause"));
        }
        let init = Configuration(self.decls.iter().map(|d| d.init).collect());
        match reach.eval(&init) {
            Ok(true) => {
                return Err(self.err_at(
                    &reach_tok,
                    ParseErrorKind::InitSatisfiesReach,
                    "the initial configuration already satisfies the reach condition",
                ))
            }
            Ok(false) => {}
            Err(e) => return Err(self.err_at(&reach_tok, ParseErrorKind::Syntax, e.to_string())),
        }
        Program::new(self.decls.clone(), commands, reach)
            .map_err(|e| self.err_at(&reach_tok, ParseErrorKind::Syntax, e.to_string()))
    }
}

fn parse_decimal(s: &str) -> BigRational {
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    let digits: BigInt = format!("{int}{frac}").parse().expect("lexer yields digits");
    let den = num_traits::pow(BigInt::from(10), frac.len());
    BigRational::new(digits, den)
}

/// Parses a program from its textual form.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        vars: HashMap::new(),
        decls: Vec::new(),
    };
    p.program()
}

/// Renders a probability as a decimal literal when it has a finite decimal
/// expansion, otherwise as `p/q`.
pub fn format_probability(p: &BigRational) -> String {
    let den = p.denom().clone();
    let mut d = den.clone();
    let (two, five) = (BigInt::from(2), BigInt::from(5));
    let (mut twos, mut fives) = (0usize, 0usize);
    while (&d % &two).is_zero() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if !d.is_one() {
        return format!("{}/{}", p.numer(), den);
    }
    let digits = twos.max(fives);
    if digits == 0 {
        return p.numer().to_string();
    }
    let scaled = p.numer() * num_traits::pow(BigInt::from(10), digits) / &den;
    let s = format!("{:0>width$}", scaled.to_string(), width = digits + 1);
    let (a, b) = s.split_at(s.len() - digits);
    format!("{a}.{b}")
}

struct GuardDisplay<'a> {
    guard: &'a Guard,
    names: &'a [String],
}

impl fmt::Display for GuardDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.guard.is_true() {
            return f.write_str("true");
        }
        for (i, a) in self.guard.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(
                f,
                "({} {} {})",
                a.lhs.display(self.names),
                a.op.symbol(),
                a.rhs.display(self.names)
            )?;
        }
        Ok(())
    }
}

pub fn display_guard<'a>(guard: &'a Guard, names: &'a [String]) -> impl fmt::Display + 'a {
    GuardDisplay { guard, names }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.names();
        for d in self.decls() {
            match d.range {
                Some((lo, hi)) => writeln!(f, "int {} in [{lo},{hi}] = {};", d.name, d.init)?,
                None => writeln!(f, "int {} = {};", d.name, d.init)?,
            }
        }
        for c in self.commands() {
            write!(f, "{}: {} ->", c.name, display_guard(&c.guard, names))?;
            for (i, u) in c.updates.iter().enumerate() {
                if i > 0 {
                    write!(f, "\n    +")?;
                }
                write!(f, " {}:", format_probability(&u.probability))?;
                let targets = u.assignment.targets();
                if targets.is_empty() {
                    f.write_str("true")?;
                }
                for (j, (v, e)) in targets.iter().enumerate() {
                    if j > 0 {
                        f.write_str("&")?;
                    }
                    write!(f, "({}'={})", names[v.0], e.display(names))?;
                }
            }
            writeln!(f, ";")?;
        }
        writeln!(f, "reach: {}", display_guard(self.reach(), names))
    }
}
