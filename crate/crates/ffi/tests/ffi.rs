use std::ffi::{CStr, CString};
use std::ptr;

use probgame_ffi::*;

const FIG1: &str = include_str!("../../core/fixtures/fig1.npp");
const FIG4_LEFT: &str = include_str!("../../core/fixtures/fig4_left.npp");

fn parse(text: &str) -> *mut PgProgram {
    let text = CString::new(text).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { pg_program_parse(text.as_ptr(), &mut p) }, PgStatus::Ok);
    assert!(!p.is_null());
    p
}

fn last_error() -> String {
    let e = pg_last_error();
    assert!(!e.is_null());
    unsafe { CStr::from_ptr(e) }.to_str().unwrap().to_string()
}

#[test]
fn concrete_values_of_fig1() {
    let p = parse(FIG1);
    assert_eq!(unsafe { pg_program_num_vars(p) }, 2);
    let mut out = PgConcrete::default();
    assert_eq!(unsafe { pg_concrete(p, 1_000_000, 1e-9, &mut out) }, PgStatus::Ok);
    assert!((out.max - 0.01).abs() < 1e-6);
    assert!(out.min.abs() < 1e-6);
    assert!(out.states > 400);
    assert!(pg_last_error().is_null());
    unsafe { pg_program_free(p) };
}

#[test]
fn analysis_with_control_variable_key() {
    let p = parse(FIG1);
    let var = CString::new("ctr").unwrap();
    let mut cfg = pg_analyze_config_default();
    cfg.query = PgQuery::Max;
    cfg.heuristic = PgHeuristic::Mass;
    cfg.widen_var = var.as_ptr();
    let mut b = PgBounds::default();
    assert_eq!(unsafe { pg_analyze(p, &cfg, &mut b) }, PgStatus::Ok);
    assert!(b.converged);
    assert!((b.max_lower - 0.01).abs() < 1e-6 && (b.max_upper - 0.01).abs() < 1e-6);
    assert!(b.min_lower.is_nan() && b.min_upper.is_nan());
    assert!(b.rounds >= 2 && b.game_nodes_max > 0);
    unsafe { pg_program_free(p) };
}

#[test]
fn json_report_matches_the_cli_schema() {
    let p = parse(FIG4_LEFT);
    let mut cfg = pg_analyze_config_default();
    cfg.domain = PgDomain::Product;
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { pg_analyze_json(p, &cfg, &mut s) }, PgStatus::Ok);
    let text = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { pg_string_free(s) };
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in ["query", "lower", "upper", "rounds", "game_nodes_max", "time_ms", "status"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["status"], "converged");
    assert_eq!(v["max"][0], 0.5);
    unsafe { pg_program_free(p) };
}

#[test]
fn budget_exhaustion_still_fills_bounds() {
    let p = parse(FIG1);
    let mut cfg = pg_analyze_config_default();
    cfg.max_rounds = 1;
    let mut b = PgBounds::default();
    assert_eq!(unsafe { pg_analyze(p, &cfg, &mut b) }, PgStatus::BudgetExhausted);
    assert!(!b.converged);
    assert!(b.max_lower <= b.max_upper);
    assert!(last_error().contains("round budget"));
    unsafe { pg_program_free(p) };
}

#[test]
fn error_codes() {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { pg_program_parse(ptr::null(), &mut p) }, PgStatus::NullArgument);
    assert!(last_error().contains("text"));

    let bad = CString::new("int x = 0; reach: (y = 1)").unwrap();
    assert_eq!(unsafe { pg_program_parse(bad.as_ptr(), &mut p) }, PgStatus::ParseError);
    assert!(p.is_null());
    assert!(!last_error().is_empty());

    let invalid = [0xffu8, 0];
    assert_eq!(
        unsafe { pg_program_parse(invalid.as_ptr().cast(), &mut p) },
        PgStatus::InvalidUtf8
    );

    let prog = parse(FIG1);
    let mut cfg = pg_analyze_config_default();
    let mut b = PgBounds::default();
    cfg.gap_target = 0.0;
    assert_eq!(unsafe { pg_analyze(prog, &cfg, &mut b) }, PgStatus::InvalidArgument);
    let unknown = CString::new("nope").unwrap();
    cfg = pg_analyze_config_default();
    cfg.widen_var = unknown.as_ptr();
    assert_eq!(unsafe { pg_analyze(prog, &cfg, &mut b) }, PgStatus::InvalidArgument);
    assert!(last_error().contains("nope"));
    cfg = pg_analyze_config_default();
    cfg.node_budget = 2;
    assert_eq!(unsafe { pg_analyze(prog, &cfg, &mut b) }, PgStatus::AnalysisError);
    assert_eq!(unsafe { pg_analyze(ptr::null(), &cfg, &mut b) }, PgStatus::NullArgument);

    let mut c = PgConcrete::default();
    assert_eq!(unsafe { pg_concrete(prog, 10, 1e-9, &mut c) }, PgStatus::OracleError);
    assert!(last_error().contains("oracle infeasible"));
    unsafe { pg_program_free(prog) };
    unsafe { pg_program_free(ptr::null_mut()) };
    unsafe { pg_string_free(ptr::null_mut()) };
}
