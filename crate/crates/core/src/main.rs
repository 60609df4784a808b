use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use probgame::domain::DomainKind;
use probgame::game::WidenKey;
use probgame::ir::Program;
use probgame::mdp::oracle;
use probgame::parser::parse_program;
use probgame::refine::{analyze, Heuristic, Interval, Query, RefineConfig, RefinementReport, Status};

#[derive(Parser)]
#[command(name = "probgame", version, about = "Bounds reachability probabilities of probabilistic programs with abstract games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Abstract, solve and refine until the bounds meet.
    Analyze(AnalyzeArgs),
    /// Exact values by explicit-state enumeration.
    Concrete(ConcreteArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    input: PathBuf,
    #[arg(long, default_value = "interval")]
    domain: DomainKind,
    #[arg(long, default_value = "both")]
    query: Query,
    #[arg(long, default_value = "mixed")]
    heuristic: Heuristic,
    /// Refinement candidates per round.
    #[arg(long, default_value_t = 15, value_parser = clap::value_parser!(u64).range(1..))]
    candidates: u64,
    /// Depth threshold of the depth and mixed heuristics.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    depth: u64,
    #[arg(long, default_value_t = 0.01)]
    gap_target: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    max_rounds: u64,
    /// Maximal number of Player 1 nodes per game.
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    node_budget: u64,
    /// `command` or `var:<name>`.
    #[arg(long, default_value = "command")]
    widen_key: String,
    /// Write the last game built as Graphviz DOT.
    #[arg(long)]
    emit_game: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ConcreteArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 1_000_000)]
    max_states: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

fn load(path: &PathBuf) -> Result<Program, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_program(&text).map_err(|e| format!("{}:{e}", path.display()))
}

fn widen_key(spec: &str, program: &Program) -> Result<WidenKey, String> {
    if spec == "command" {
        return Ok(WidenKey::Command);
    }
    match spec.strip_prefix("var:") {
        Some(name) => program
            .var_id(name)
            .map(WidenKey::ControlVar)
            .ok_or_else(|| format!("--widen-key: `{name}` is not a declared variable")),
        None => Err(format!("--widen-key: expected `command` or `var:<name>`, got `{spec}`")),
    }
}

fn print_table(r: &RefinementReport) {
    println!("domain {}  query {}", r.domain, r.query);
    println!("{:>5} {:>8} {:>8} {:>23} {:>23} {:>5}", "round", "nodes", "P1", "max [lo, up]", "min [lo, up]", "cands");
    let show = |b: Option<Interval>| match b {
        Some(b) => format!("[{:.6}, {:.6}]", b.lower, b.upper),
        None => "-".to_string(),
    };
    for x in &r.rounds {
        println!(
            "{:>5} {:>8} {:>8} {:>23} {:>23} {:>5}",
            x.round,
            x.game_nodes,
            x.player1_nodes,
            show(x.max),
            show(x.min),
            x.candidates.len()
        );
    }
    let status = match r.status {
        Status::Converged => "converged",
        Status::BudgetExhausted => "budget-exhausted",
    };
    println!("{status} after {} round(s), size {}, {:.1} ms", r.rounds.len(), r.game_nodes_max, r.time_ms);
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<ExitCode, String> {
    if !(a.gap_target > 0.0) || !(a.tol > 0.0) {
        return Err("--gap-target and --tol must be positive".into());
    }
    let program = load(&a.input)?;
    let cfg = RefineConfig {
        query: a.query,
        heuristic: a.heuristic,
        candidates: a.candidates as usize,
        depth_threshold: a.depth as usize,
        gap_target: a.gap_target,
        tol: a.tol,
        max_rounds: a.max_rounds as usize,
        node_budget: a.node_budget as usize,
        widen_key: widen_key(&a.widen_key, &program)?,
        emit_dot: a.emit_game.is_some(),
        ..RefineConfig::default()
    };
    let report = analyze(&program, a.domain, &cfg).map_err(|e| e.to_string())?;
    if let (Some(path), Some(dot)) = (&a.emit_game, &report.dot) {
        fs::write(path, dot).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report.to_json()).expect("report serializes"));
    } else {
        print_table(&report);
    }
    Ok(match report.status {
        Status::Converged => ExitCode::SUCCESS,
        Status::BudgetExhausted => ExitCode::from(2),
    })
}

fn cmd_concrete(a: ConcreteArgs) -> Result<ExitCode, String> {
    let program = load(&a.input)?;
    let r = oracle(&program, a.max_states, a.tol).map_err(|e| e.to_string())?;
    println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Concrete(a) => cmd_concrete(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(1)
    })
}
