//! Explicit MDP semantics of a program and exact-enough reachability values.
//! This is the brute-force oracle the abstract bounds are checked against.

use std::collections::{BTreeMap, HashMap, VecDeque};

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::ir::{Configuration, IrError, Program};
use crate::parser::format_probability;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("oracle infeasible: more than {limit} reachable configurations")]
    Infeasible { limit: usize },
    #[error(transparent)]
    Ir(#[from] IrError),
    #[error("value iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        values: Vec<f64>,
    },
}

/// One enabled command at a state; `command == None` is the implicit
/// self-loop closing a stuck state.
#[derive(Clone, Debug, PartialEq)]
pub struct Action {
    pub command: Option<usize>,
    pub dist: Vec<(usize, BigRational)>,
}

#[derive(Clone, Debug)]
pub struct Mdp {
    names: Vec<String>,
    command_names: Vec<String>,
    states: Vec<Configuration>,
    actions: Vec<Vec<Action>>,
    finals: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Max,
    Min,
}

/// Per-state values with one optimal action index per state (`None` on
/// final states).
#[derive(Clone, Debug)]
pub struct Solution {
    pub values: Vec<f64>,
    pub choice: Vec<Option<usize>>,
    pub iterations: usize,
    pub residual: f64,
}

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITERS: usize = 1_000_000;

/// Extremal reachability values of the initial configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub max: f64,
    pub min: f64,
    /// Nodes of the MDP: configurations plus action nodes.
    pub states: usize,
    pub configurations: usize,
}

pub fn oracle(program: &Program, max_states: usize, tol: f64) -> Result<OracleReport, MdpError> {
    let mdp = build_mdp(program, max_states)?;
    let max = mdp_reach(&mdp, Mode::Max, tol, DEFAULT_MAX_ITERS)?;
    let min = mdp_reach(&mdp, Mode::Min, tol, DEFAULT_MAX_ITERS)?;
    Ok(OracleReport {
        max: max.values[mdp.initial()],
        min: min.values[mdp.initial()],
        states: mdp.num_nodes(),
        configurations: mdp.num_configurations(),
    })
}

/// Breadth-first closure of the configurations reachable from the initial
/// one. Final states get no actions.
pub fn build_mdp(program: &Program, max_states: usize) -> Result<Mdp, MdpError> {
    let mut index: HashMap<Configuration, usize> = HashMap::new();
    let mut states = Vec::new();
    let mut actions: Vec<Vec<Action>> = Vec::new();
    let mut finals = Vec::new();
    let mut queue = VecDeque::new();

    let mut intern = |sigma: Configuration,
                      states: &mut Vec<Configuration>,
                      queue: &mut VecDeque<usize>|
     -> Result<usize, MdpError> {
        if let Some(&i) = index.get(&sigma) {
            return Ok(i);
        }
        if states.len() >= max_states {
            return Err(MdpError::Infeasible { limit: max_states });
        }
        let i = states.len();
        index.insert(sigma.clone(), i);
        states.push(sigma);
        queue.push_back(i);
        Ok(i)
    };

    intern(program.init().clone(), &mut states, &mut queue)?;
    while let Some(s) = queue.pop_front() {
        let sigma = states[s].clone();
        let is_final = program.is_final(&sigma)?;
        finals.push(is_final);
        let mut acts = Vec::new();
        if !is_final {
            for (ci, cmd) in program.commands().iter().enumerate() {
                if !program.eval_guard(&cmd.guard, &sigma)? {
                    continue;
                }
                let mut dist: BTreeMap<usize, BigRational> = BTreeMap::new();
                for u in &cmd.updates {
                    let next = program.apply_assignment(&u.assignment, &sigma)?;
                    let t = intern(next, &mut states, &mut queue)?;
                    *dist.entry(t).or_insert_with(BigRational::zero) += &u.probability;
                }
                acts.push(Action {
                    command: Some(ci),
                    dist: dist.into_iter().collect(),
                });
            }
            if acts.is_empty() {
                acts.push(Action {
                    command: None,
                    dist: vec![(s, BigRational::from_integer(1.into()))],
                });
            }
        }
        actions.push(acts);
    }

    Ok(Mdp {
        names: program.names().to_vec(),
        command_names: program.commands().iter().map(|c| c.name.clone()).collect(),
        states,
        actions,
        finals,
    })
}

impl Mdp {
    pub fn initial(&self) -> usize {
        0
    }

    pub fn states(&self) -> &[Configuration] {
        &self.states
    }

    pub fn actions(&self, s: usize) -> &[Action] {
        &self.actions[s]
    }

    pub fn is_final(&self, s: usize) -> bool {
        self.finals[s]
    }

    pub fn num_configurations(&self) -> usize {
        self.states.len()
    }

    /// Configuration nodes plus action nodes, i.e. the size of the arena
    /// `V₁ ∪ V_p`.
    pub fn num_nodes(&self) -> usize {
        self.states.len() + self.actions.iter().map(Vec::len).sum::<usize>()
    }

    fn float_dists(&self) -> Vec<Vec<Vec<(usize, f64)>>> {
        self.actions
            .iter()
            .map(|acts| {
                acts.iter()
                    .map(|a| {
                        a.dist
                            .iter()
                            .map(|(t, p)| (*t, p.to_f64().unwrap_or(0.0)))
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct JAction<'a> {
            command: &'a str,
            dist: Vec<(usize, String)>,
        }
        #[derive(Serialize)]
        struct JState<'a> {
            id: usize,
            values: BTreeMap<&'a str, i64>,
            #[serde(rename = "final")]
            is_final: bool,
            actions: Vec<JAction<'a>>,
        }
        let states: Vec<JState> = self
            .states
            .iter()
            .enumerate()
            .map(|(i, sigma)| JState {
                id: i,
                values: self
                    .names
                    .iter()
                    .map(String::as_str)
                    .zip(sigma.values().iter().copied())
                    .collect(),
                is_final: self.finals[i],
                actions: self.actions[i]
                    .iter()
                    .map(|a| JAction {
                        command: a
                            .command
                            .map_or("self-loop", |c| self.command_names[c].as_str()),
                        dist: a
                            .dist
                            .iter()
                            .map(|(t, p)| (*t, format_probability(p)))
                            .collect(),
                    })
                    .collect(),
            })
            .collect();
        serde_json::json!({ "initial": self.initial(), "states": states })
    }
}

fn expect(dist: &[(usize, f64)], values: &[f64]) -> f64 {
    dist.iter().map(|&(t, p)| p * values[t]).sum()
}

/// Gauss-Seidel value iteration from the zero vector.
pub fn mdp_reach(mdp: &Mdp, mode: Mode, tol: f64, max_iters: usize) -> Result<Solution, MdpError> {
    let dists = mdp.float_dists();
    let n = mdp.states.len();
    let mut values: Vec<f64> = (0..n).map(|s| if mdp.finals[s] { 1.0 } else { 0.0 }).collect();
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while residual >= tol {
        if iterations >= max_iters {
            return Err(MdpError::NotConverged {
                iterations,
                residual,
                values,
            });
        }
        iterations += 1;
        residual = 0.0;
        for s in 0..n {
            if mdp.finals[s] {
                continue;
            }
            let qs = dists[s].iter().map(|d| expect(d, &values));
            let v = match mode {
                Mode::Max => qs.fold(0.0, f64::max),
                Mode::Min => qs.fold(1.0, f64::min),
            };
            residual = residual.max((v - values[s]).abs());
            values[s] = v;
        }
    }
    let choice = match mode {
        Mode::Min => (0..n)
            .map(|s| {
                (!mdp.finals[s]).then(|| {
                    argbest(dists[s].iter().map(|d| expect(d, &values)), |a, b| a < b)
                })
            })
            .collect(),
        Mode::Max => max_choices(mdp, &dists, &values, 100.0 * tol),
    };
    Ok(Solution {
        values,
        choice,
        iterations,
        residual,
    })
}

/// Index of the first strictly best element.
fn argbest(it: impl Iterator<Item = f64>, better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (i, q) in it.enumerate() {
        if best.is_none_or(|(_, b)| better(q, b)) {
            best = Some((i, q));
        }
    }
    best.map_or(0, |(i, _)| i)
}

/// Value-optimal choices that also make progress towards the target, so a
/// maximizer never settles on an optimal-looking self-loop.
fn max_choices(
    mdp: &Mdp,
    dists: &[Vec<Vec<(usize, f64)>>],
    values: &[f64],
    eps: f64,
) -> Vec<Option<usize>> {
    let n = values.len();
    let optimal: Vec<Vec<usize>> = (0..n)
        .map(|s| {
            (0..dists[s].len())
                .filter(|&a| expect(&dists[s][a], values) >= values[s] - eps)
                .collect()
        })
        .collect();
    let mut choice: Vec<Option<usize>> = vec![None; n];
    let mut ranked: Vec<bool> = mdp.finals.clone();
    loop {
        let mut changed = false;
        for s in 0..n {
            if ranked[s] || values[s] <= eps {
                continue;
            }
            if let Some(&a) = optimal[s]
                .iter()
                .find(|&&a| dists[s][a].iter().any(|&(t, p)| p > 0.0 && ranked[t]))
            {
                choice[s] = Some(a);
                ranked[s] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    for s in 0..n {
        if !mdp.finals[s] && choice[s].is_none() {
            choice[s] = Some(optimal[s].first().copied().unwrap_or(0));
        }
    }
    choice
}

/// Reachability value of the Markov chain obtained by fixing one action per
/// state.
pub fn evaluate_policy(
    mdp: &Mdp,
    choice: &[Option<usize>],
    tol: f64,
    max_iters: usize,
) -> Result<Vec<f64>, MdpError> {
    let dists = mdp.float_dists();
    let n = mdp.states.len();
    let mut values: Vec<f64> = (0..n).map(|s| if mdp.finals[s] { 1.0 } else { 0.0 }).collect();
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while residual >= tol {
        if iterations >= max_iters {
            return Err(MdpError::NotConverged {
                iterations,
                residual,
                values,
            });
        }
        iterations += 1;
        residual = 0.0;
        for s in 0..n {
            if mdp.finals[s] {
                continue;
            }
            let a = choice[s].unwrap_or(0);
            let v = expect(&dists[s][a], &values);
            residual = residual.max((v - values[s]).abs());
            values[s] = v;
        }
    }
    Ok(values)
}
