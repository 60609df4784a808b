//! Refinement by delaying widenings: pick candidate nodes, suppress the
//! widenings that created their children, rebuild and re-solve.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::domain::{CongruenceDomain, Domain, DomainKind, IntervalDomain, ProductDomain};
use crate::game::dot::to_dot;
use crate::game::{build_game, BuildError, DelayConfig, Game, NodeId, TreePath, WidenKey};
use crate::ir::Program;
use crate::solver::{solve, GameValues, Kappa, SolveError, DEFAULT_MAX_ITERS, DEFAULT_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Query {
    Max,
    Min,
    Both,
}

impl Query {
    fn parts(self) -> &'static [Query] {
        match self {
            Query::Max => &[Query::Max],
            Query::Min => &[Query::Min],
            Query::Both => &[Query::Max, Query::Min],
        }
    }

    /// The `(lower, upper)` game modes bounding this query.
    pub fn kappas(self) -> (Kappa, Kappa) {
        match self {
            Query::Min => (Kappa::MinusMinus, Kappa::MinusPlus),
            _ => (Kappa::PlusMinus, Kappa::PlusPlus),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Query::Max => "max",
            Query::Min => "min",
            Query::Both => "both",
        }
    }
}

impl FromStr for Query {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max" => Ok(Query::Max),
            "min" => Ok(Query::Min),
            "both" => Ok(Query::Both),
            _ => Err(format!("unknown query `{s}` (expected max, min or both)")),
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Heuristic {
    Mass,
    Depth,
    Mixed,
}

impl FromStr for Heuristic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mass" => Ok(Heuristic::Mass),
            "depth" => Ok(Heuristic::Depth),
            "mixed" => Ok(Heuristic::Mixed),
            _ => Err(format!("unknown heuristic `{s}` (expected mass, depth or mixed)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Candidate {
    pub node: NodeId,
    pub path: String,
    pub depth: usize,
    pub mass: f64,
    pub gap: f64,
    pub score: f64,
    /// Tree paths of the widened children whose widening gets suppressed.
    #[serde(skip)]
    pub children: Vec<TreePath>,
}

/// Widened spanning-tree children of every element node.
fn widened_children<E>(game: &Game<E>) -> BTreeMap<NodeId, Vec<TreePath>> {
    let mut out: BTreeMap<NodeId, Vec<TreePath>> = BTreeMap::new();
    for t in game.widened_nodes() {
        let info = game.tree(t).expect("widened nodes carry tree info");
        if let Some(p) = info.parent_elem {
            out.entry(p).or_default().push(info.path.clone());
        }
    }
    out
}

fn candidate<E>(game: &Game<E>, node: NodeId, gap: f64, children: Vec<TreePath>) -> Candidate {
    let info = game.tree(node).expect("element nodes carry tree info");
    Candidate {
        node,
        path: info.path.to_string(),
        depth: info.depth,
        mass: info.mass,
        gap,
        score: info.mass * gap,
        children,
    }
}

/// Ranks nodes with a widened child and a positive local gap.
pub fn select_candidates<E>(
    game: &Game<E>,
    upper: &GameValues,
    lower: &GameValues,
    heuristic: Heuristic,
    n: usize,
    depth_threshold: usize,
) -> Vec<Candidate> {
    let children = widened_children(game);
    let gap = |v: NodeId| (upper.at(v) - lower.at(v)).max(0.0);
    let mut by_depth = Vec::new();
    let mut ranked = Vec::new();
    for (&node, kids) in &children {
        let c = candidate(game, node, gap(node), kids.clone());
        let shallow = c.depth < depth_threshold;
        match heuristic {
            Heuristic::Depth | Heuristic::Mixed if shallow => by_depth.push(c),
            Heuristic::Mass | Heuristic::Mixed if c.gap > 0.0 => ranked.push(c),
            _ => {}
        }
    }
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.depth.cmp(&b.depth))
            .then(a.node.cmp(&b.node))
    });
    ranked.truncate(n);
    by_depth.extend(ranked);
    by_depth.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.depth.cmp(&b.depth))
            .then(a.node.cmp(&b.node))
    });
    by_depth
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefineConfig {
    pub query: Query,
    pub heuristic: Heuristic,
    pub candidates: usize,
    pub depth_threshold: usize,
    pub gap_target: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub max_rounds: usize,
    pub node_budget: usize,
    pub widen_key: WidenKey,
    /// Widening delay applied before any refinement.
    pub initial_delay: usize,
    /// Keep the DOT rendering of the last game built.
    pub emit_dot: bool,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            query: Query::Both,
            heuristic: Heuristic::Mixed,
            candidates: 15,
            depth_threshold: 4,
            gap_target: 0.01,
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
            max_rounds: 10,
            node_budget: 100_000,
            widen_key: WidenKey::Command,
            initial_delay: 0,
            emit_dot: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64, slack: f64) -> bool {
        self.lower - slack <= x && x <= self.upper + slack
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Round {
    pub round: usize,
    pub game_nodes: usize,
    pub player1_nodes: usize,
    pub max: Option<Interval>,
    pub min: Option<Interval>,
    pub candidates: Vec<Candidate>,
    pub elapsed_ms: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    BudgetExhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefinementReport {
    pub domain: String,
    pub query: Query,
    pub rounds: Vec<Round>,
    pub max: Option<Interval>,
    pub min: Option<Interval>,
    pub status: Status,
    /// Largest number of Player 1 element nodes over all rounds.
    pub game_nodes_max: usize,
    pub time_ms: f64,
    #[serde(skip)]
    pub dot: Option<String>,
}

impl RefinementReport {
    fn empty(domain: &str, query: Query) -> Self {
        RefinementReport {
            domain: domain.to_string(),
            query,
            rounds: Vec::new(),
            max: None,
            min: None,
            status: Status::BudgetExhausted,
            game_nodes_max: 0,
            time_ms: 0.0,
            dot: None,
        }
    }

    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    /// The machine-readable summary printed by the command-line tool.
    pub fn to_json(&self) -> serde_json::Value {
        let pair = |b: Option<Interval>| match b {
            Some(b) => json!([b.lower, b.upper]),
            None => serde_json::Value::Null,
        };
        let (lower, upper) = match self.query {
            Query::Both => (
                json!({ "max": self.max.map(|b| b.lower), "min": self.min.map(|b| b.lower) }),
                json!({ "max": self.max.map(|b| b.upper), "min": self.min.map(|b| b.upper) }),
            ),
            q => {
                let b = self.bounds(q);
                (json!(b.map(|b| b.lower)), json!(b.map(|b| b.upper)))
            }
        };
        json!({
            "query": self.query,
            "domain": self.domain,
            "lower": lower,
            "upper": upper,
            "max": pair(self.max),
            "min": pair(self.min),
            "rounds": self.rounds,
            "game_nodes_max": self.game_nodes_max,
            "time_ms": self.time_ms,
            "status": self.status,
        })
    }

    /// Bounds for a single-sided query.
    pub fn bounds(&self, q: Query) -> Option<Interval> {
        match q {
            Query::Min => self.min,
            _ => self.max,
        }
    }
}

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("{source}")]
    Build {
        source: BuildError,
        partial: Box<RefinementReport>,
    },
    #[error("{source}")]
    Solve {
        source: SolveError,
        partial: Box<RefinementReport>,
    },
    #[error("gap target must be positive")]
    BadGapTarget,
}

impl RefineError {
    pub fn partial(&self) -> Option<&RefinementReport> {
        match self {
            RefineError::Build { partial, .. } | RefineError::Solve { partial, .. } => Some(partial),
            RefineError::BadGapTarget => None,
        }
    }
}

/// Solves the lower and upper game of one query.
fn solve_pair<E: Sync>(
    game: &Game<E>,
    q: Query,
    cfg: &RefineConfig,
) -> Result<(GameValues, GameValues), SolveError> {
    let (lo, hi) = q.kappas();
    let (l, h) = std::thread::scope(|scope| {
        let l = scope.spawn(|| solve(game, lo, &lo.default_target(), cfg.tol, cfg.max_iters));
        let h = solve(game, hi, &hi.default_target(), cfg.tol, cfg.max_iters);
        (l.join().expect("solver thread panicked"), h)
    });
    Ok((l?.values, h?.values))
}

/// Runs build, solve and candidate selection until the gap at the start node
/// closes, no candidates remain, or the round budget runs out.
pub fn refine_loop<D: Domain>(
    program: &Program,
    domain: &D,
    cfg: &RefineConfig,
) -> Result<RefinementReport, RefineError> {
    if cfg.gap_target <= 0.0 || cfg.gap_target.is_nan() {
        return Err(RefineError::BadGapTarget);
    }
    let clock = Instant::now();
    let mut report = RefinementReport::empty(domain.name(), cfg.query);
    let mut delay = DelayConfig {
        depth_threshold: cfg.initial_delay,
        widen_key: cfg.widen_key,
        ..DelayConfig::default()
    };
    for round in 1..=cfg.max_rounds.max(1) {
        let started = Instant::now();
        let game = match build_game(program, domain, &delay, cfg.node_budget) {
            Ok(g) => g,
            Err(source) => {
                report.time_ms = clock.elapsed().as_secs_f64() * 1e3;
                return Err(RefineError::Build {
                    source,
                    partial: Box::new(report),
                });
            }
        };
        let mut entry = Round {
            round,
            game_nodes: game.len(),
            player1_nodes: game.num_elements(),
            max: None,
            min: None,
            candidates: Vec::new(),
            elapsed_ms: 0.0,
        };
        let mut converged = true;
        let mut picked: BTreeMap<NodeId, Candidate> = BTreeMap::new();
        for &q in cfg.query.parts() {
            let (lower, upper) = match solve_pair(&game, q, cfg) {
                Ok(p) => p,
                Err(source) => {
                    report.time_ms = clock.elapsed().as_secs_f64() * 1e3;
                    return Err(RefineError::Solve {
                        source,
                        partial: Box::new(report),
                    });
                }
            };
            let s = game.start();
            let b = Interval {
                lower: lower.at(s),
                upper: upper.at(s).max(lower.at(s)),
            };
            if q == Query::Min {
                entry.min = Some(b);
            } else {
                entry.max = Some(b);
            }
            if b.gap() > cfg.gap_target {
                converged = false;
                for c in select_candidates(
                    &game,
                    &upper,
                    &lower,
                    cfg.heuristic,
                    cfg.candidates,
                    cfg.depth_threshold,
                ) {
                    match picked.get(&c.node) {
                        Some(old) if old.score >= c.score => {}
                        _ => {
                            picked.insert(c.node, c);
                        }
                    }
                }
            }
        }
        let mut chosen: Vec<Candidate> = picked.into_values().collect();
        chosen.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.node.cmp(&b.node)));
        report.game_nodes_max = report.game_nodes_max.max(entry.player1_nodes);
        report.max = entry.max;
        report.min = entry.min;
        if cfg.emit_dot {
            report.dot = Some(to_dot(&game, domain));
        }
        let before = delay.suppressed.len();
        if !converged {
            for c in &chosen {
                delay.suppressed.extend(c.children.iter().cloned());
            }
        }
        entry.candidates = chosen;
        entry.elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
        report.rounds.push(entry);
        if converged {
            report.status = Status::Converged;
            break;
        }
        if delay.suppressed.len() == before {
            break;
        }
    }
    report.time_ms = clock.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

/// Runs the refinement loop under the chosen domain.
pub fn analyze(
    program: &Program,
    kind: DomainKind,
    cfg: &RefineConfig,
) -> Result<RefinementReport, RefineError> {
    let names = program.names().to_vec();
    match kind {
        DomainKind::Interval => refine_loop(program, &IntervalDomain::new(names), cfg),
        DomainKind::Congruence => refine_loop(program, &CongruenceDomain::new(names), cfg),
        DomainKind::Product => refine_loop(program, &ProductDomain::new(names), cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{Node, TreeInfo};
    use crate::ir::VarId;
    use crate::parser::parse_program;

    const FIG1: &str = include_str!("../fixtures/fig1.npp");

    fn fig1_cfg() -> RefineConfig {
        RefineConfig {
            widen_key: WidenKey::ControlVar(VarId(1)),
            ..RefineConfig::default()
        }
    }

    #[test]
    fn fig1_max_query_converges_by_delaying() {
        let p = parse_program(FIG1).unwrap();
        let cfg = RefineConfig {
            query: Query::Max,
            heuristic: Heuristic::Mass,
            ..fig1_cfg()
        };
        let r = analyze(&p, DomainKind::Interval, &cfg).unwrap();
        assert!(r.converged(), "{r:?}");
        let b = r.max.unwrap();
        assert!((b.lower - 0.01).abs() < 1e-6 && (b.upper - 0.01).abs() < 1e-6);
        assert!(r.rounds.len() >= 2);
        let first = &r.rounds[0];
        assert!((first.max.unwrap().upper - 1.0).abs() < 1e-6);
        assert!(!first.candidates.is_empty());
    }

    #[test]
    fn rounds_are_deterministic() {
        let p = parse_program(FIG1).unwrap();
        let cfg = RefineConfig {
            max_rounds: 3,
            ..fig1_cfg()
        };
        let strip = |mut r: RefinementReport| {
            r.time_ms = 0.0;
            for x in &mut r.rounds {
                x.elapsed_ms = 0.0;
            }
            r
        };
        let a = strip(analyze(&p, DomainKind::Interval, &cfg).unwrap());
        let b = strip(analyze(&p, DomainKind::Interval, &cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn bounds_are_ordered_every_round() {
        let p = parse_program(FIG1).unwrap();
        for kind in DomainKind::ALL {
            let r = analyze(&p, kind, &fig1_cfg()).unwrap();
            for round in &r.rounds {
                for b in [round.max, round.min].into_iter().flatten() {
                    assert!(b.lower <= b.upper + 1e-9 && b.lower >= 0.0 && b.upper <= 1.0);
                }
            }
        }
    }

    fn chain_game(masses: &[f64]) -> (Game<u8>, GameValues, GameValues) {
        let mut g: Game<u8> = Game::empty(vec!["A".into()]);
        let root = g.push(Node::Elem(0));
        g.set_tree(root, info(None, TreePath::default(), 1.0, false));
        for (i, &m) in masses.iter().enumerate() {
            let path = TreePath::default().child(crate::game::Step {
                command: 0,
                split: 0,
                update: i,
            });
            let parent = g.push(Node::Elem(1 + 2 * i as u8));
            g.set_tree(parent, info(Some(root), path.clone(), m, false));
            let child = g.push(Node::Elem(2 + 2 * i as u8));
            let cpath = path.child(crate::game::Step {
                command: 0,
                split: 0,
                update: 0,
            });
            g.set_tree(child, info(Some(parent), cpath, m, true));
        }
        let n = g.len();
        let vals = |v: f64| GameValues {
            kappa: Kappa::PlusPlus,
            target: vec![0],
            values: vec![v; n],
            residual: 0.0,
            iterations: 1,
        };
        (g, vals(1.0), vals(0.5))
    }

    fn info(parent: Option<NodeId>, path: TreePath, mass: f64, widened: bool) -> TreeInfo {
        TreeInfo {
            parent: None,
            parent_elem: parent,
            creator: parent.map(|_| 0),
            depth: path.depth(),
            path,
            mass,
            widened,
        }
    }

    #[test]
    fn mass_orders_candidates() {
        let (g, up, lo) = chain_game(&[0.01, 0.99]);
        let c = select_candidates(&g, &up, &lo, Heuristic::Mass, 1, 0);
        assert_eq!(c.len(), 1);
        assert!((c[0].mass - 0.99).abs() < 1e-12);
        let all = select_candidates(&g, &up, &lo, Heuristic::Mass, 5, 0);
        assert_eq!(all.len(), 2);
        assert!(all[0].score >= all[1].score);
    }

    #[test]
    fn zero_gap_gives_no_candidates() {
        let (g, up, _) = chain_game(&[0.5, 0.5]);
        assert!(select_candidates(&g, &up, &up, Heuristic::Mass, 5, 0).is_empty());
    }

    #[test]
    fn depth_rule_ignores_the_gap() {
        let (g, up, _) = chain_game(&[0.5, 0.5]);
        let c = select_candidates(&g, &up, &up, Heuristic::Depth, 5, 2);
        assert_eq!(c.len(), 2);
        assert!(select_candidates(&g, &up, &up, Heuristic::Depth, 5, 1).is_empty());
    }

    #[test]
    fn non_positive_gap_target_is_rejected() {
        let p = parse_program(FIG1).unwrap();
        let cfg = RefineConfig {
            gap_target: 0.0,
            ..fig1_cfg()
        };
        assert!(matches!(
            analyze(&p, DomainKind::Interval, &cfg),
            Err(RefineError::BadGapTarget)
        ));
    }

    #[test]
    fn node_budget_error_keeps_partial_report() {
        let p = parse_program(FIG1).unwrap();
        let cfg = RefineConfig {
            node_budget: 2,
            ..fig1_cfg()
        };
        let e = analyze(&p, DomainKind::Interval, &cfg).unwrap_err();
        assert!(matches!(e, RefineError::Build { .. }));
        assert!(e.partial().unwrap().rounds.is_empty());
    }
}
