//! Value iteration for the four extremal reachability values of a game.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::game::{Game, NodeId, Owner, ACCEPT, REJECT};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITERS: usize = 1_000_000;

/// First sign: Player 1 maximizes or minimizes; second sign: Player 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Kappa {
    #[serde(rename = "++")]
    PlusPlus,
    #[serde(rename = "+-")]
    PlusMinus,
    #[serde(rename = "-+")]
    MinusPlus,
    #[serde(rename = "--")]
    MinusMinus,
}

impl Kappa {
    pub const ALL: [Kappa; 4] = [
        Kappa::PlusPlus,
        Kappa::PlusMinus,
        Kappa::MinusPlus,
        Kappa::MinusMinus,
    ];

    pub fn p1_max(self) -> bool {
        matches!(self, Kappa::PlusPlus | Kappa::PlusMinus)
    }

    pub fn p2_max(self) -> bool {
        matches!(self, Kappa::PlusPlus | Kappa::MinusPlus)
    }

    /// `{⊙}` for the max games, `{⊙,⊗}` for the min games.
    pub fn default_target(self) -> Vec<NodeId> {
        if self.p1_max() {
            vec![ACCEPT]
        } else {
            vec![ACCEPT, REJECT]
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Kappa::PlusPlus => "++",
            Kappa::PlusMinus => "+-",
            Kappa::MinusPlus => "-+",
            Kappa::MinusMinus => "--",
        }
    }
}

impl fmt::Display for Kappa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kappa {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "++" => Ok(Kappa::PlusPlus),
            "+-" | "+−" => Ok(Kappa::PlusMinus),
            "-+" | "−+" => Ok(Kappa::MinusPlus),
            "--" | "−−" => Ok(Kappa::MinusMinus),
            _ => Err(format!("unknown game mode `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameValues {
    pub kappa: Kappa,
    pub target: Vec<NodeId>,
    pub values: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

impl GameValues {
    pub fn at(&self, node: NodeId) -> f64 {
        self.values[node]
    }
}

/// One chosen successor per owned node; `None` for nodes the player does
/// not own or that have no successors.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Strategy {
    pub choice: Vec<Option<NodeId>>,
}

impl Strategy {
    pub fn get(&self, node: NodeId) -> Option<NodeId> {
        self.choice.get(node).copied().flatten()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Solution {
    pub values: GameValues,
    pub player1: Strategy,
    pub player2: Strategy,
}

impl Solution {
    /// Values and strategies keyed by node id.
    pub fn to_json(&self) -> serde_json::Value {
        let keyed = |s: &Strategy| -> BTreeMap<NodeId, NodeId> {
            s.choice
                .iter()
                .enumerate()
                .filter_map(|(i, c)| c.map(|c| (i, c)))
                .collect()
        };
        let values: BTreeMap<NodeId, f64> = self.values.values.iter().copied().enumerate().collect();
        serde_json::json!({
            "kappa": self.values.kappa,
            "target": self.values.target,
            "iterations": self.values.iterations,
            "residual": self.values.residual,
            "values": values,
            "player1": keyed(&self.player1),
            "player2": keyed(&self.player2),
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("value iteration did not converge after {} iterations (residual {:e})", .last.iterations, .last.residual)]
    NotConverged { last: Box<GameValues> },
    #[error("strategy has no choice at reachable node {0}")]
    PartialStrategy(NodeId),
    #[error("tolerance must be positive")]
    BadTolerance,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Op {
    Target,
    Max,
    Min,
    Random,
}

struct Arena {
    ops: Vec<Op>,
    succ: Vec<Vec<NodeId>>,
    dist: Vec<Vec<(NodeId, f64)>>,
}

impl Arena {
    fn new<E>(game: &Game<E>, target: &[NodeId], p1_max: bool, p2_max: bool) -> Arena {
        let n = game.len();
        let mut ops = Vec::with_capacity(n);
        let mut dist = Vec::with_capacity(n);
        for v in 0..n {
            let op = if target.contains(&v) {
                Op::Target
            } else {
                match game.owner(v) {
                    Owner::Player1 if p1_max => Op::Max,
                    Owner::Player1 => Op::Min,
                    Owner::Player2 if p2_max => Op::Max,
                    Owner::Player2 => Op::Min,
                    Owner::Random => Op::Random,
                }
            };
            ops.push(op);
            dist.push(if op == Op::Random {
                game.float_dist(v)
            } else {
                Vec::new()
            });
        }
        let succ = (0..n).map(|v| game.succ(v).to_vec()).collect();
        Arena { ops, succ, dist }
    }

    fn fixed(game_len: usize, target: &[NodeId], chosen: impl Fn(NodeId) -> Option<Option<NodeId>>, base: &Arena) -> Arena {
        let mut ops = base.ops.clone();
        let mut succ = base.succ.clone();
        for v in 0..game_len {
            if target.contains(&v) {
                ops[v] = Op::Target;
                continue;
            }
            if let Some(c) = chosen(v) {
                ops[v] = Op::Max;
                succ[v] = c.into_iter().collect();
            }
        }
        Arena {
            ops,
            succ,
            dist: base.dist.clone(),
        }
    }

    fn backup(&self, v: NodeId, x: &[f64]) -> f64 {
        match self.ops[v] {
            Op::Target => 1.0,
            Op::Random => self.dist[v].iter().map(|&(t, p)| p * x[t]).sum(),
            Op::Max => self.succ[v].iter().map(|&t| x[t]).fold(0.0, f64::max),
            Op::Min => {
                if self.succ[v].is_empty() {
                    0.0
                } else {
                    self.succ[v].iter().map(|&t| x[t]).fold(1.0, f64::min)
                }
            }
        }
    }

    /// Gauss-Seidel sweeps in node order from the all-zero vector.
    fn iterate(&self, tol: f64, max_iters: usize) -> (Vec<f64>, f64, usize, bool) {
        let n = self.ops.len();
        let mut x = vec![0.0; n];
        let mut residual = f64::INFINITY;
        for it in 1..=max_iters {
            residual = 0.0;
            for v in 0..n {
                let nv = self.backup(v, &x).clamp(0.0, 1.0);
                residual = residual.max((nv - x[v]).abs());
                x[v] = nv;
            }
            if residual < tol {
                return (x, residual, it, true);
            }
        }
        (x, residual, max_iters, false)
    }
}

/// Least fixed point of the Bellman operator for `kappa` and `target`,
/// plus memoryless non-randomized strategies for both players.
pub fn solve<E>(
    game: &Game<E>,
    kappa: Kappa,
    target: &[NodeId],
    tol: f64,
    max_iters: usize,
) -> Result<Solution, SolveError> {
    if tol <= 0.0 || tol.is_nan() {
        return Err(SolveError::BadTolerance);
    }
    let arena = Arena::new(game, target, kappa.p1_max(), kappa.p2_max());
    let (values, residual, iterations, converged) = arena.iterate(tol, max_iters);
    let gv = GameValues {
        kappa,
        target: target.to_vec(),
        values,
        residual,
        iterations,
    };
    if !converged {
        return Err(SolveError::NotConverged { last: Box::new(gv) });
    }
    let choice = extract(&arena, &gv.values, tol);
    let mut player1 = Strategy {
        choice: vec![None; game.len()],
    };
    let mut player2 = player1.clone();
    for (v, c) in choice.into_iter().enumerate() {
        match game.owner(v) {
            Owner::Player1 => player1.choice[v] = c,
            Owner::Player2 => player2.choice[v] = c,
            Owner::Random => {}
        }
    }
    Ok(Solution {
        values: gv,
        player1,
        player2,
    })
}

/// Minimizers take the lowest-index argmin. Maximizers pick among the
/// near-optimal successors one that makes progress toward the target, so
/// the pair does not stall in a loop of equally valued nodes.
fn extract(arena: &Arena, x: &[f64], tol: f64) -> Vec<Option<NodeId>> {
    let n = x.len();
    let eps = 100.0 * tol;
    let mut choice: Vec<Option<NodeId>> = vec![None; n];
    for v in 0..n {
        if arena.ops[v] == Op::Min && !arena.succ[v].is_empty() {
            let mut best = arena.succ[v][0];
            for &t in &arena.succ[v][1..] {
                if x[t] < x[best] {
                    best = t;
                }
            }
            choice[v] = Some(best);
        }
    }

    // Backward attractor over the chain with minimizer choices fixed and
    // maximizers restricted to near-optimal edges.
    let mut pred: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for v in 0..n {
        match arena.ops[v] {
            Op::Target => {}
            Op::Min => {
                if let Some(t) = choice[v] {
                    pred[t].push(v);
                }
            }
            Op::Max => {
                for &t in &arena.succ[v] {
                    if x[t] >= x[v] - eps {
                        pred[t].push(v);
                    }
                }
            }
            Op::Random => {
                for &(t, p) in &arena.dist[v] {
                    if p > 0.0 {
                        pred[t].push(v);
                    }
                }
            }
        }
    }
    let mut reached = vec![false; n];
    let mut queue = VecDeque::new();
    for v in 0..n {
        if arena.ops[v] == Op::Target {
            reached[v] = true;
            queue.push_back(v);
        }
    }
    while let Some(t) = queue.pop_front() {
        for &v in &pred[t] {
            if reached[v] {
                continue;
            }
            if arena.ops[v] == Op::Max {
                choice[v] = Some(t);
            }
            reached[v] = true;
            queue.push_back(v);
        }
    }
    for v in 0..n {
        if arena.ops[v] == Op::Max && choice[v].is_none() && !arena.succ[v].is_empty() {
            let mut best = arena.succ[v][0];
            for &t in &arena.succ[v][1..] {
                if x[t] > x[best] {
                    best = t;
                }
            }
            choice[v] = Some(best);
        }
    }
    choice
}

/// Value at the start node of the Markov chain obtained by fixing both
/// strategies.
pub fn evaluate_strategies<E>(
    game: &Game<E>,
    p1: &Strategy,
    p2: &Strategy,
    target: &[NodeId],
    tol: f64,
) -> Result<f64, SolveError> {
    evaluate_strategies_from(game, p1, p2, target, tol, DEFAULT_MAX_ITERS).map(|x| x[game.start()])
}

/// Like [`evaluate_strategies`], returning the value at every node.
pub fn evaluate_strategies_from<E>(
    game: &Game<E>,
    p1: &Strategy,
    p2: &Strategy,
    target: &[NodeId],
    tol: f64,
    max_iters: usize,
) -> Result<Vec<f64>, SolveError> {
    if tol <= 0.0 || tol.is_nan() {
        return Err(SolveError::BadTolerance);
    }
    // Reachable owned nodes must have a choice.
    let mut seen = vec![false; game.len()];
    let mut stack = vec![game.start()];
    seen[game.start()] = true;
    while let Some(v) = stack.pop() {
        if target.contains(&v) {
            continue;
        }
        let next: Vec<NodeId> = match game.owner(v) {
            Owner::Random => game.succ(v).to_vec(),
            owner => {
                if game.succ(v).is_empty() {
                    continue;
                }
                let s = if owner == Owner::Player1 { p1 } else { p2 };
                match s.get(v) {
                    Some(c) if game.succ(v).contains(&c) => vec![c],
                    _ => return Err(SolveError::PartialStrategy(v)),
                }
            }
        };
        for t in next {
            if !seen[t] {
                seen[t] = true;
                stack.push(t);
            }
        }
    }
    let base = Arena::new(game, target, true, true);
    let arena = Arena::fixed(
        game.len(),
        target,
        |v| match game.owner(v) {
            Owner::Player1 => Some(p1.get(v)),
            Owner::Player2 => Some(p2.get(v)),
            Owner::Random => None,
        },
        &base,
    );
    let (x, residual, iterations, converged) = arena.iterate(tol, max_iters);
    if !converged {
        return Err(SolveError::NotConverged {
            last: Box::new(GameValues {
                kappa: Kappa::PlusPlus,
                target: target.to_vec(),
                values: x,
                residual,
                iterations,
            }),
        });
    }
    Ok(x)
}
