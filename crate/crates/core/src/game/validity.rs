//! Brute-force audit of the valid-abstraction conditions on a built game.
//!
//! Structural conditions are checked exactly; containments are checked by
//! enumerating `γ(s) ∩ Σ_V` for every Player 1 node, which needs every
//! variable to be range-bounded.

use std::fmt;

use num_traits::One;
use thiserror::Error;

use super::builder::clipped_sets;
use super::{aggregate, Action, Game, Node, NodeId, ACCEPT, REJECT};
use crate::domain::Domain;
use crate::ir::{Configuration, Program};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    /// `⟨s,⊙⟩` edges for nodes meeting `F`.
    FinalProposal,
    /// `s → ⟨s,A⟩` when some state enables `A`.
    CommandProposal,
    /// Refined elements cover `g_A(γ(s))`.
    Coverage,
    /// `⟨s,A⟩ → ⊙` when `γ(s)` meets `F`.
    AcceptEdge,
    /// `⟨s,A⟩ → ⊗` when some state does not enable `A`.
    RejectEdge,
    /// `δ` agrees with `d` and sums to one.
    Distribution,
    /// `⊙` and `⊗` have no successors.
    Terminal,
    /// `s' ⊑ s` for probabilistic nodes.
    Refinement,
    /// `γ(d(⟨p,c⟩)) ⊇ c(γ(s'))`.
    Successor,
}

impl Condition {
    /// The label of the condition in the valid-abstraction definition.
    pub fn label(self) -> &'static str {
        match self {
            Condition::FinalProposal => "1(a)",
            Condition::CommandProposal => "1(b)",
            Condition::Coverage => "2(a)",
            Condition::AcceptEdge => "2(b)",
            Condition::RejectEdge => "2(c)",
            Condition::Distribution => "3",
            Condition::Terminal => "4",
            Condition::Refinement => "Vp(s'<=s)",
            Condition::Successor => "Vp(d)",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub node: NodeId,
    pub condition: Condition,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidityReport {
    pub violations: Vec<Violation>,
    pub nodes_checked: usize,
    pub configurations_checked: usize,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, c: Condition) -> bool {
        self.violations.iter().any(|v| v.condition == c)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CheckError {
    #[error("variable `{0}` has no declared range")]
    Unranged(String),
    #[error("node {node} concretizes to more than {budget} configurations")]
    TooLarge { node: NodeId, budget: usize },
}

/// Members of `γ(a) ∩ Σ_V`, at most `budget` of them.
fn enumerate<D: Domain>(
    domain: &D,
    ranges: &[Option<(i64, i64)>],
    a: &D::Elem,
    node: NodeId,
    budget: usize,
) -> Result<Vec<Configuration>, CheckError> {
    let Some(sets) = clipped_sets(domain, ranges, a) else {
        return Ok(Vec::new());
    };
    let mut members = Vec::with_capacity(sets.len());
    let mut total: usize = 1;
    for p in &sets {
        let m = p.members().ok_or(CheckError::TooLarge { node, budget })?;
        total = total.saturating_mul(m.len());
        if total > budget {
            return Err(CheckError::TooLarge { node, budget });
        }
        members.push(m);
    }
    let mut out = vec![Vec::with_capacity(sets.len())];
    for m in &members {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                m.iter().map(move |&v| {
                    let mut next = prefix.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }
    Ok(out.into_iter().map(Configuration).collect())
}

fn enables(program: &Program, action: Action, sigma: &Configuration) -> bool {
    match action {
        Action::Cmd(i) => program
            .eval_guard(&program.commands()[i].guard, sigma)
            .unwrap_or(false),
        Action::Stuck => {
            !program.is_final(sigma).unwrap_or(false)
                && !program
                    .commands()
                    .iter()
                    .any(|c| program.eval_guard(&c.guard, sigma).unwrap_or(false))
        }
    }
}

/// Audits every condition of a valid abstraction. `budget` caps the number
/// of configurations enumerated per node.
pub fn check_validity<D: Domain>(
    game: &Game<D::Elem>,
    program: &Program,
    domain: &D,
    budget: usize,
) -> Result<ValidityReport, CheckError> {
    for d in program.decls() {
        if d.range.is_none() {
            return Err(CheckError::Unranged(d.name.clone()));
        }
    }
    let ranges = program.ranges();
    let mut report = ValidityReport::default();
    let flag = |report: &mut ValidityReport, node, condition, detail: String| {
        report.violations.push(Violation {
            node,
            condition,
            detail,
        })
    };

    for t in [ACCEPT, REJECT] {
        if !game.succ(t).is_empty() {
            flag(&mut report, t, Condition::Terminal, "terminal node has successors".into());
        }
    }

    for s in 0..game.len() {
        let Some(elem) = game.elem(s) else { continue };
        report.nodes_checked += 1;
        let states = enumerate(domain, &ranges, elem, s, budget)?;
        report.configurations_checked += states.len();
        let is_final: Vec<bool> = states
            .iter()
            .map(|sigma| program.is_final(sigma).unwrap_or(false))
            .collect();
        let some_final = is_final.iter().any(|&f| f);
        let all_final = is_final.iter().all(|&f| f);

        let finals: Vec<NodeId> = game
            .succ(s)
            .iter()
            .copied()
            .filter(|&c| matches!(game.node(c), Node::Final { .. }))
            .collect();
        if some_final {
            match finals.first() {
                None => flag(&mut report, s, Condition::FinalProposal, "missing ⟨s,⊙⟩".into()),
                Some(&f) => {
                    if !game.succ(f).contains(&ACCEPT) {
                        flag(&mut report, f, Condition::FinalProposal, "⟨s,⊙⟩ ↛ ⊙".into());
                    }
                    if all_final && game.succ(s).len() != 1 {
                        flag(
                            &mut report,
                            s,
                            Condition::FinalProposal,
                            "γ(s) ⊆ F but s has other successors".into(),
                        );
                    }
                    if !all_final && !game.succ(f).contains(&f) {
                        flag(&mut report, f, Condition::FinalProposal, "missing ⟨s,⊙⟩ self-loop".into());
                    }
                }
            }
        }
        if !states.is_empty() && all_final {
            continue;
        }

        let cmds: Vec<(NodeId, Action)> = game
            .succ(s)
            .iter()
            .filter_map(|&c| match game.node(c) {
                Node::Cmd { action, .. } => Some((c, *action)),
                _ => None,
            })
            .collect();
        let mut actions: Vec<Action> = (0..program.commands().len()).map(Action::Cmd).collect();
        actions.push(Action::Stuck);
        for action in actions {
            let enabled: Vec<&Configuration> = states
                .iter()
                .filter(|sigma| enables(program, action, sigma))
                .collect();
            let node = cmds.iter().find(|(_, a)| *a == action).map(|(c, _)| *c);
            let Some(c) = node else {
                if !enabled.is_empty() {
                    flag(
                        &mut report,
                        s,
                        Condition::CommandProposal,
                        format!("missing ⟨s,{}⟩", game.action_name(action)),
                    );
                }
                continue;
            };
            if some_final && !game.succ(c).contains(&ACCEPT) {
                flag(&mut report, c, Condition::AcceptEdge, "missing ⟨s,A⟩ → ⊙".into());
            }
            if enabled.len() < states.len() && !game.succ(c).contains(&REJECT) {
                flag(&mut report, c, Condition::RejectEdge, "missing ⟨s,A⟩ → ⊗".into());
            }
            let probs: Vec<NodeId> = game
                .succ(c)
                .iter()
                .copied()
                .filter(|&p| matches!(game.node(p), Node::Prob { .. }))
                .collect();
            for sigma in &enabled {
                let covered = probs.iter().any(|&p| match game.node(p) {
                    Node::Prob { refined, .. } => domain.contains(refined, sigma),
                    _ => false,
                });
                if !covered {
                    flag(
                        &mut report,
                        c,
                        Condition::Coverage,
                        format!("{:?} not covered", sigma.values()),
                    );
                    break;
                }
            }
            for p in probs {
                check_prob(game, program, domain, &ranges, p, s, action, budget, &mut report)?;
            }
        }
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn check_prob<D: Domain>(
    game: &Game<D::Elem>,
    program: &Program,
    domain: &D,
    ranges: &[Option<(i64, i64)>],
    p: NodeId,
    s: NodeId,
    action: Action,
    budget: usize,
    report: &mut ValidityReport,
) -> Result<(), CheckError> {
    let Node::Prob { refined, d, .. } = game.node(p) else {
        return Ok(());
    };
    let elem = game.elem(s).expect("owner is an element node");
    let mut flag = |condition, detail: String| {
        report.violations.push(Violation {
            node: p,
            condition,
            detail,
        })
    };
    if !domain.leq(refined, elem) {
        flag(Condition::Refinement, "s' ⋢ s".into());
    }
    let probs: Vec<_> = match action {
        Action::Cmd(i) => program.commands()[i]
            .updates
            .iter()
            .map(|u| u.probability.clone())
            .collect(),
        Action::Stuck => vec![num_rational::BigRational::one()],
    };
    let total: num_rational::BigRational = game.dist(p).iter().map(|(_, q)| q.clone()).sum();
    if d.len() != probs.len() || game.dist(p) != aggregate(d, &probs).as_slice() || !total.is_one() {
        flag(Condition::Distribution, "δ disagrees with d".into());
    }
    if d.iter().any(|&t| game.elem(t).is_none()) {
        flag(Condition::Successor, "d maps to a non-element node".into());
        return Ok(());
    }
    for sigma in enumerate(domain, ranges, refined, p, budget)? {
        if !enables(program, action, &sigma) {
            continue;
        }
        for (u, &target) in d.iter().enumerate() {
            let next = match action {
                Action::Cmd(i) => {
                    match program.apply_assignment(&program.commands()[i].updates[u].assignment, &sigma) {
                        Ok(n) => n,
                        // Leaves Σ_V; the program itself is faulty there.
                        Err(_) => continue,
                    }
                }
                Action::Stuck => sigma.clone(),
            };
            if !domain.contains(game.elem(target).unwrap(), &next) {
                flag(
                    Condition::Successor,
                    format!("update {u} maps {:?} to {:?} outside d", sigma.values(), next.values()),
                );
                return Ok(());
            }
        }
    }
    Ok(())
}
