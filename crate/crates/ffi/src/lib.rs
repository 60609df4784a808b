//! C ABI over the probgame analyzer.
//!
//! Programs live behind the opaque `PgProgram` handle. Every fallible call
//! returns a `PgStatus`; on failure `pg_last_error` describes the problem
//! for the calling thread. Strings returned by the library are released
//! with `pg_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use probgame::domain::DomainKind;
use probgame::game::WidenKey;
use probgame::ir::Program;
use probgame::mdp::oracle;
use probgame::parser::parse_program;
use probgame::refine::{analyze, Heuristic, Query, RefineConfig, RefinementReport};

/// Opaque parsed program.
pub struct PgProgram {
    program: Program,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidArgument = 4,
    OracleError = 5,
    AnalysisError = 6,
    /// The refinement loop ran out of rounds or candidates; bounds are valid.
    BudgetExhausted = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgDomain {
    Interval = 0,
    Congruence = 1,
    Product = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgQuery {
    Max = 0,
    Min = 1,
    Both = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgHeuristic {
    Mass = 0,
    Depth = 1,
    Mixed = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct PgAnalyzeConfig {
    pub domain: PgDomain,
    pub query: PgQuery,
    pub heuristic: PgHeuristic,
    pub candidates: u32,
    pub depth_threshold: u32,
    pub gap_target: f64,
    pub tol: f64,
    pub max_rounds: u32,
    pub node_budget: u64,
    /// Variable name for control-variable widening; NULL widens per command.
    pub widen_var: *const c_char,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PgConcrete {
    pub max: f64,
    pub min: f64,
    pub states: u64,
    pub configurations: u64,
}

/// Final bounds of an analysis; the fields of a query not asked for are NaN.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PgBounds {
    pub max_lower: f64,
    pub max_upper: f64,
    pub min_lower: f64,
    pub min_upper: f64,
    pub rounds: u32,
    pub game_nodes_max: u64,
    pub converged: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn guard(f: impl FnOnce() -> Result<PgStatus, (PgStatus, String)>) -> PgStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            PgStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (PgStatus, String)> {
    if p.is_null() {
        return Err((PgStatus::NullArgument, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (PgStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn null(what: &str) -> (PgStatus, String) {
    (PgStatus::NullArgument, format!("{what} is NULL"))
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn pg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses program text into a new handle stored in `*out`.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pg_program_parse(text: *const c_char, out: *mut *mut PgProgram) -> PgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = str_arg(text, "text")?;
        let program = parse_program(text).map_err(|e| (PgStatus::ParseError, e.to_string()))?;
        *out = Box::into_raw(Box::new(PgProgram { program }));
        Ok(PgStatus::Ok)
    })
}

/// Releases a handle; NULL is ignored.
///
/// # Safety
/// `p` must come from `pg_program_parse` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pg_program_free(p: *mut PgProgram) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of declared variables, or 0 for NULL.
///
/// # Safety
/// `p` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pg_program_num_vars(p: *const PgProgram) -> usize {
    p.as_ref().map_or(0, |p| p.program.num_vars())
}

/// Exact extremal reachability values by explicit enumeration.
///
/// # Safety
/// `p` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pg_concrete(
    p: *const PgProgram,
    max_states: u64,
    tol: f64,
    out: *mut PgConcrete,
) -> PgStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("program"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if !(tol > 0.0) {
            return Err((PgStatus::InvalidArgument, "tol must be positive".into()));
        }
        let r = oracle(&p.program, max_states as usize, tol)
            .map_err(|e| (PgStatus::OracleError, e.to_string()))?;
        *out = PgConcrete {
            max: r.max,
            min: r.min,
            states: r.states as u64,
            configurations: r.configurations as u64,
        };
        Ok(PgStatus::Ok)
    })
}

/// The command-line defaults: interval domain, both queries, mixed
/// heuristic, 15 candidates, depth 4, gap 0.01.
#[no_mangle]
pub extern "C" fn pg_analyze_config_default() -> PgAnalyzeConfig {
    let d = RefineConfig::default();
    PgAnalyzeConfig {
        domain: PgDomain::Interval,
        query: PgQuery::Both,
        heuristic: PgHeuristic::Mixed,
        candidates: d.candidates as u32,
        depth_threshold: d.depth_threshold as u32,
        gap_target: d.gap_target,
        tol: d.tol,
        max_rounds: d.max_rounds as u32,
        node_budget: d.node_budget as u64,
        widen_var: ptr::null(),
    }
}

unsafe fn run(p: *const PgProgram, cfg: *const PgAnalyzeConfig) -> Result<RefinementReport, (PgStatus, String)> {
    let p = p.as_ref().ok_or_else(|| null("program"))?;
    let c = cfg.as_ref().ok_or_else(|| null("config"))?;
    let bad = |m: &str| (PgStatus::InvalidArgument, m.to_string());
    if !(c.gap_target > 0.0) || !(c.tol > 0.0) {
        return Err(bad("gap_target and tol must be positive"));
    }
    if c.candidates == 0 || c.max_rounds == 0 || c.node_budget == 0 {
        return Err(bad("candidates, max_rounds and node_budget must be positive"));
    }
    let widen_key = if c.widen_var.is_null() {
        WidenKey::Command
    } else {
        let name = str_arg(c.widen_var, "widen_var")?;
        let v = p
            .program
            .var_id(name)
            .ok_or_else(|| bad(&format!("`{name}` is not a declared variable")))?;
        WidenKey::ControlVar(v)
    };
    let kind = match c.domain {
        PgDomain::Interval => DomainKind::Interval,
        PgDomain::Congruence => DomainKind::Congruence,
        PgDomain::Product => DomainKind::Product,
    };
    let config = RefineConfig {
        query: match c.query {
            PgQuery::Max => Query::Max,
            PgQuery::Min => Query::Min,
            PgQuery::Both => Query::Both,
        },
        heuristic: match c.heuristic {
            PgHeuristic::Mass => Heuristic::Mass,
            PgHeuristic::Depth => Heuristic::Depth,
            PgHeuristic::Mixed => Heuristic::Mixed,
        },
        candidates: c.candidates as usize,
        depth_threshold: c.depth_threshold as usize,
        gap_target: c.gap_target,
        tol: c.tol,
        max_rounds: c.max_rounds as usize,
        node_budget: c.node_budget as usize,
        widen_key,
        ..RefineConfig::default()
    };
    analyze(&p.program, kind, &config).map_err(|e| (PgStatus::AnalysisError, e.to_string()))
}

fn finish(r: &RefinementReport) -> PgStatus {
    if r.converged() {
        PgStatus::Ok
    } else {
        set_error("bounds did not meet the gap target within the round budget");
        PgStatus::BudgetExhausted
    }
}

/// Runs the refinement loop. `*out` is filled on `PG_STATUS_OK` and on
/// `PG_STATUS_BUDGET_EXHAUSTED`.
///
/// # Safety
/// `p` must be a live handle; `cfg` and `out` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pg_analyze(
    p: *const PgProgram,
    cfg: *const PgAnalyzeConfig,
    out: *mut PgBounds,
) -> PgStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = run(p, cfg)?;
        *out = PgBounds {
            max_lower: r.max.map_or(f64::NAN, |b| b.lower),
            max_upper: r.max.map_or(f64::NAN, |b| b.upper),
            min_lower: r.min.map_or(f64::NAN, |b| b.lower),
            min_upper: r.min.map_or(f64::NAN, |b| b.upper),
            rounds: r.rounds.len() as u32,
            game_nodes_max: r.game_nodes_max as u64,
            converged: r.converged(),
        };
        Ok(finish(&r))
    })
}

/// Like `pg_analyze`, returning the JSON report printed by the
/// command-line tool. Release it with `pg_string_free`.
///
/// # Safety
/// `p` must be a live handle; `cfg` and `out` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pg_analyze_json(
    p: *const PgProgram,
    cfg: *const PgAnalyzeConfig,
    out: *mut *mut c_char,
) -> PgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let r = run(p, cfg)?;
        let text = CString::new(r.to_json().to_string()).expect("JSON has no NUL bytes");
        *out = text.into_raw();
        Ok(finish(&r))
    })
}

/// Releases a string returned by the library; NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
