//! Worklist construction of a valid abstraction, with widening at
//! spanning-tree ancestors.

use std::collections::{HashMap, VecDeque};

use num_traits::ToPrimitive;
use thiserror::Error;

use super::{aggregate, Action, DelayConfig, Game, Node, NodeId, Step, TreeInfo, TreePath, WidenKey};
use super::{ACCEPT, REJECT};
use crate::domain::value::{ceil_div, floor_div};
use crate::domain::{Domain, GuardStatus, Projection};
use crate::ir::{Atom, CmpOp, Guard, LinExpr, Program, VarId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BuildError {
    #[error("game exceeds the node budget of {limit} Player 1 nodes")]
    NodeBudget { limit: usize },
    #[error("reach atom `{0}` mentions more than one variable")]
    RelationalReach(String),
}

/// Upper bound on the pieces tracked when computing where no command is
/// enabled; beyond it the remainder is kept as is.
const STUCK_PIECES: usize = 64;

/// Values each variable may take in `F`, as inclusive bounds; `None` when
/// `F` is empty.
#[derive(Clone, Debug)]
pub(crate) struct FinalBox {
    bounds: Option<Vec<(Option<i64>, Option<i64>)>>,
}

impl FinalBox {
    pub(crate) fn new(program: &Program) -> Result<FinalBox, BuildError> {
        let mut bounds = vec![(None, None); program.num_vars()];
        for atom in &program.reach().atoms {
            let Ok(c) = atom.constraint() else {
                return Err(BuildError::RelationalReach(format!("{atom:?}")));
            };
            match c.expr.terms() {
                [] => {
                    if !CmpOp::holds(c.op, c.expr.constant, 0) {
                        return Ok(FinalBox { bounds: None });
                    }
                }
                [(x, k)] => {
                    let (k, rhs) = (*k as i128, -(c.expr.constant as i128));
                    let mut lo = None;
                    let mut hi = None;
                    // k·x op rhs
                    let upper = |k: i128| floor_div(rhs, k);
                    let lower = |k: i128| ceil_div(rhs, k);
                    if matches!(c.op, CmpOp::Le | CmpOp::Eq) {
                        if k > 0 {
                            hi = Some(upper(k));
                        } else {
                            lo = Some(lower(k));
                        }
                    }
                    if matches!(c.op, CmpOp::Ge | CmpOp::Eq) {
                        if k > 0 {
                            lo = Some(lower(k));
                        } else {
                            hi = Some(upper(k));
                        }
                    }
                    let slot = &mut bounds[x.0];
                    if let Some(l) = lo {
                        let l = l.clamp(i64::MIN as i128, i64::MAX as i128) as i64;
                        slot.0 = Some(slot.0.map_or(l, |o: i64| o.max(l)));
                    }
                    if let Some(h) = hi {
                        let h = h.clamp(i64::MIN as i128, i64::MAX as i128) as i64;
                        slot.1 = Some(slot.1.map_or(h, |o: i64| o.min(h)));
                    }
                    if let (Some(l), Some(h)) = *slot {
                        if l > h {
                            return Ok(FinalBox { bounds: None });
                        }
                    }
                }
                _ => {
                    let names = program.names();
                    return Err(BuildError::RelationalReach(format!(
                        "{} {} {}",
                        atom.lhs.display(names),
                        atom.op.symbol(),
                        atom.rhs.display(names)
                    )));
                }
            }
        }
        Ok(FinalBox {
            bounds: Some(bounds),
        })
    }

    /// Does some member of the box `sets` lie in `F`?
    pub(crate) fn overlaps(&self, sets: &[Projection]) -> bool {
        match &self.bounds {
            None => false,
            Some(b) => sets.iter().zip(b).all(|(p, &(lo, hi))| p.meets(lo, hi)),
        }
    }

    /// Is every member of the box `sets` in `F`?
    pub(crate) fn covers(&self, sets: &[Projection]) -> bool {
        if sets.iter().any(Projection::is_empty) {
            return true;
        }
        match &self.bounds {
            None => false,
            Some(b) => sets.iter().zip(b).all(|(p, &(lo, hi))| p.within(lo, hi)),
        }
    }
}

/// Exact per-variable value sets of `γ(a) ∩ Σ_V`; `None` if empty.
pub(crate) fn clipped_sets<D: Domain>(
    domain: &D,
    ranges: &[Option<(i64, i64)>],
    a: &D::Elem,
) -> Option<Vec<Projection>> {
    let sets: Vec<Projection> = ranges
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let p = domain.project(a, VarId(i))?;
            Some(match r {
                Some((lo, hi)) => p.clip(Some(*lo), Some(*hi)),
                None => p,
            })
        })
        .collect::<Option<_>>()?;
    if sets.iter().any(Projection::is_empty) {
        None
    } else {
        Some(sets)
    }
}

pub(crate) fn range_guard(program: &Program) -> Guard {
    let mut atoms = Vec::new();
    for (i, r) in program.ranges().iter().enumerate() {
        if let Some((lo, hi)) = r {
            let x = LinExpr::var(VarId(i));
            atoms.push(Atom::new(x.clone(), CmpOp::Ge, LinExpr::constant(*lo)));
            atoms.push(Atom::new(x, CmpOp::Le, LinExpr::constant(*hi)));
        }
    }
    Guard::new(atoms)
}

/// Pieces covering the states of `γ(a)` outside `F` where no command is
/// enabled. Empty means no such state exists.
pub(crate) fn stuck_region<D: Domain>(
    domain: &D,
    program: &Program,
    ranges: &[Option<(i64, i64)>],
    a: &D::Elem,
    overlaps_final: bool,
) -> Vec<D::Elem> {
    let live = |e: &D::Elem| !domain.is_bottom(e) && clipped_sets(domain, ranges, e).is_some();
    let mut pieces: Vec<D::Elem> = if overlaps_final {
        program
            .reach()
            .atoms
            .iter()
            .flat_map(Atom::negation)
            .map(|n| domain.meet_guard(a, &Guard::new(vec![n])))
            .filter(|e| live(e))
            .collect()
    } else {
        vec![a.clone()]
    };
    for cmd in program.commands() {
        if pieces.is_empty() || pieces.len() > STUCK_PIECES {
            break;
        }
        let mut next = Vec::new();
        for q in &pieces {
            match domain.guard_status(q, &cmd.guard) {
                GuardStatus::FullCertain => {}
                GuardStatus::EmptyCertain => next.push(q.clone()),
                GuardStatus::Mixed => {
                    for atom in &cmd.guard.atoms {
                        for n in atom.negation() {
                            let e = domain.meet_guard(q, &Guard::new(vec![n]));
                            if live(&e) && !next.contains(&e) {
                                next.push(e);
                            }
                        }
                    }
                }
            }
        }
        pieces = next;
    }
    pieces
}

struct Builder<'a, D: Domain> {
    program: &'a Program,
    domain: &'a D,
    delay: &'a DelayConfig,
    budget: usize,
    game: Game<D::Elem>,
    index: HashMap<D::Elem, NodeId>,
    work: VecDeque<NodeId>,
    ranges: Vec<Option<(i64, i64)>>,
    range_guard: Guard,
    finals: FinalBox,
    elements: usize,
}

/// Builds the game breadth-first from `α({σ₀})`.
pub fn build_game<D: Domain>(
    program: &Program,
    domain: &D,
    delay: &DelayConfig,
    node_budget: usize,
) -> Result<Game<D::Elem>, BuildError> {
    let mut b = Builder {
        program,
        domain,
        delay,
        budget: node_budget,
        game: Game::empty(program.commands().iter().map(|c| c.name.clone()).collect()),
        index: HashMap::new(),
        work: VecDeque::new(),
        ranges: program.ranges(),
        range_guard: range_guard(program),
        finals: FinalBox::new(program)?,
        elements: 0,
    };
    let s0 = domain.singleton(program.init());
    b.intern(
        s0,
        TreeInfo {
            parent: None,
            parent_elem: None,
            creator: None,
            path: TreePath::default(),
            depth: 0,
            mass: 1.0,
            widened: false,
        },
    )?;
    while let Some(s) = b.work.pop_front() {
        b.gensuccs(s)?;
    }
    Ok(b.game)
}

impl<D: Domain> Builder<'_, D> {
    fn intern(&mut self, e: D::Elem, info: TreeInfo) -> Result<NodeId, BuildError> {
        if let Some(&id) = self.index.get(&e) {
            return Ok(id);
        }
        if self.elements >= self.budget {
            return Err(BuildError::NodeBudget { limit: self.budget });
        }
        self.elements += 1;
        let id = self.game.push(Node::Elem(e.clone()));
        self.game.set_tree(id, info);
        self.index.insert(e, id);
        self.work.push_back(id);
        Ok(id)
    }

    fn clip(&self, e: D::Elem) -> D::Elem {
        if self.range_guard.is_true() {
            e
        } else {
            self.domain.meet_guard(&e, &self.range_guard)
        }
    }

    fn elem(&self, id: NodeId) -> &D::Elem {
        self.game.elem(id).expect("element node")
    }

    fn info(&self, id: NodeId) -> &TreeInfo {
        self.game.tree(id).expect("element node has tree info")
    }

    fn gensuccs(&mut self, s: NodeId) -> Result<(), BuildError> {
        let elem = self.elem(s).clone();
        let Some(sets) = clipped_sets(self.domain, &self.ranges, &elem) else {
            // γ(s) ∩ Σ_V = ∅: nothing to propose.
            return Ok(());
        };
        let overlaps = self.finals.overlaps(&sets);
        let mut fopt = false;
        if overlaps {
            let f = self.game.push(Node::Final { owner: s });
            self.game.add_edge(s, f);
            self.game.add_edge(f, ACCEPT);
            if self.finals.covers(&sets) {
                return Ok(());
            }
            self.game.add_edge(f, f);
            fopt = true;
        }

        let program = self.program;
        let mut any_enabled = false;
        for (ci, cmd) in program.commands().iter().enumerate() {
            let status = self.domain.guard_status(&elem, &cmd.guard);
            if status == GuardStatus::EmptyCertain {
                continue;
            }
            any_enabled = true;
            let c = self.game.push(Node::Cmd {
                owner: s,
                action: Action::Cmd(ci),
            });
            self.game.add_edge(s, c);
            if status != GuardStatus::FullCertain {
                self.game.add_edge(c, REJECT);
            }
            if fopt {
                self.game.add_edge(c, ACCEPT);
            }
            let probs: Vec<_> = cmd.updates.iter().map(|u| u.probability.clone()).collect();
            for (si, refined) in self.domain.guard_split(&elem, &cmd.guard).into_iter().enumerate() {
                let mut d = Vec::with_capacity(cmd.updates.len());
                for (ui, u) in cmd.updates.iter().enumerate() {
                    let raw = self.clip(self.domain.assign(&refined, &u.assignment));
                    let path = self.info(s).path.child(Step {
                        command: ci,
                        split: si,
                        update: ui,
                    });
                    let (v, widened) = self.extrapolate(raw, s, ci, &path);
                    let info = TreeInfo {
                        parent: Some(c),
                        parent_elem: Some(s),
                        creator: Some(ci),
                        depth: path.depth(),
                        path,
                        mass: self.info(s).mass * u.probability.to_f64().unwrap_or(0.0),
                        widened,
                    };
                    d.push(self.intern(v, info)?);
                }
                let dist = aggregate(&d, &probs);
                let p = self.game.push(Node::Prob {
                    owner: s,
                    action: Action::Cmd(ci),
                    refined,
                    split: si,
                    d,
                });
                self.game.set_dist(p, dist);
                self.game.add_edge(c, p);
            }
        }

        let stuck = stuck_region(self.domain, program, &self.ranges, &elem, overlaps);
        if !stuck.is_empty() {
            let c = self.game.push(Node::Cmd {
                owner: s,
                action: Action::Stuck,
            });
            self.game.add_edge(s, c);
            if any_enabled || overlaps {
                self.game.add_edge(c, REJECT);
            }
            if fopt {
                self.game.add_edge(c, ACCEPT);
            }
            let refined = stuck
                .iter()
                .fold(self.domain.bottom(), |acc, e| self.domain.join(&acc, e));
            let p = self.game.push(Node::Prob {
                owner: s,
                action: Action::Stuck,
                refined,
                split: 0,
                d: vec![s],
            });
            self.game
                .set_dist(p, vec![(s, num_rational::BigRational::from_integer(1.into()))]);
            self.game.add_edge(c, p);
        }
        Ok(())
    }

    /// Widens `v` against the nearest matching spanning-tree ancestor of `s`
    /// unless widening is suppressed for the child at `path`.
    fn extrapolate(&self, v: D::Elem, s: NodeId, a: usize, path: &TreePath) -> (D::Elem, bool) {
        if path.depth() < self.delay.depth_threshold || self.delay.suppressed.contains(path) {
            return (v, false);
        }
        let anchor = match self.delay.widen_key {
            WidenKey::Command => {
                let mut t = Some(s);
                loop {
                    match t {
                        None => break None,
                        Some(id) if self.info(id).creator == Some(a) => break Some(id),
                        Some(id) => t = self.info(id).parent_elem,
                    }
                }
            }
            WidenKey::ControlVar(x) => match pinned(self.domain, &v, x) {
                None => None,
                Some(val) => {
                    let mut t = Some(s);
                    loop {
                        match t {
                            None => break None,
                            Some(id) if pinned(self.domain, self.elem(id), x) == Some(val) => {
                                break Some(id)
                            }
                            Some(id) => t = self.info(id).parent_elem,
                        }
                    }
                }
            },
        };
        match anchor {
            None => (v, false),
            Some(t) => {
                let te = self.elem(t);
                let w = self.clip(self.domain.widen(te, &self.domain.join(te, &v)));
                let widened = w != v;
                (w, widened)
            }
        }
    }
}

fn pinned<D: Domain>(domain: &D, e: &D::Elem, x: VarId) -> Option<i64> {
    let p = domain.project(e, x)?;
    match (p.min(), p.max()) {
        (Some(a), Some(b)) if a == b => Some(a),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{IntervalDomain, ProductDomain};
    use crate::game::Owner;
    use crate::parser::parse_program;

    const FIG1: &str = include_str!("../../fixtures/fig1.npp");

    fn fig1_game(delay: &DelayConfig) -> (Program, IntervalDomain, Game<<IntervalDomain as Domain>::Elem>) {
        let p = parse_program(FIG1).unwrap();
        let d = IntervalDomain::new(p.names().to_vec());
        let g = build_game(&p, &d, delay, 10_000).unwrap();
        (p, d, g)
    }

    fn find(g: &Game<<IntervalDomain as Domain>::Elem>, d: &IntervalDomain, label: &str) -> NodeId {
        (0..g.len())
            .find(|&i| g.elem(i).is_some_and(|e| d.render(e) == label))
            .unwrap_or_else(|| panic!("no node {label}"))
    }

    fn cmd_children(g: &Game<<IntervalDomain as Domain>::Elem>, s: NodeId) -> Vec<(String, Vec<NodeId>)> {
        g.succ(s)
            .iter()
            .filter_map(|&c| match g.node(c) {
                Node::Cmd { action, .. } => Some((g.action_name(*action).to_string(), g.succ(c).to_vec())),
                Node::Final { .. } => Some(("final".to_string(), g.succ(c).to_vec())),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn fig1_matches_the_hand_built_arena() {
        let ctr = VarId(1);
        let (_, d, g) = fig1_game(&DelayConfig::with_key(WidenKey::ControlVar(ctr)));
        let labels: Vec<String> = (0..g.len())
            .filter_map(|i| g.elem(i).map(|e| d.render(e)))
            .collect();
        assert_eq!(
            labels,
            [
                "nrp:[0,0] ctr:[1,1]",
                "nrp:[0,+inf) ctr:[1,1]",
                "nrp:[0,0] ctr:[2,2]",
                "nrp:[0,99] ctr:[2,2]",
                "nrp:[100,+inf) ctr:[3,3]",
                "nrp:[0,0] ctr:[3,3]",
                "nrp:[0,99] ctr:[3,3]",
            ]
        );
        let root = find(&g, &d, "nrp:[0,0] ctr:[1,1]");
        let root_cmds = cmd_children(&g, root);
        assert_eq!(root_cmds.len(), 1);
        assert_eq!(root_cmds[0].0, "A1");
        assert!(!root_cmds[0].1.contains(&REJECT));

        let head = find(&g, &d, "nrp:[0,+inf) ctr:[1,1]");
        let cmds = cmd_children(&g, head);
        assert_eq!(cmds.iter().map(|c| c.0.as_str()).collect::<Vec<_>>(), ["A1", "A2"]);
        assert!(cmds.iter().all(|c| c.1.contains(&REJECT)));
        let a1_prob = cmds[0].1.iter().copied().find(|&n| g.owner(n) == Owner::Random).unwrap();
        let Node::Prob { refined, .. } = g.node(a1_prob) else { panic!() };
        assert_eq!(d.render(refined), "nrp:[0,99] ctr:[1,1]");
        let back = g.float_dist(a1_prob).into_iter().find(|&(t, _)| t == head).unwrap();
        assert!((back.1 - 0.99).abs() < 1e-12);

        let fail = find(&g, &d, "nrp:[0,99] ctr:[3,3]");
        let fc = cmd_children(&g, fail);
        assert_eq!(fc[0].0, "final");
        assert_eq!(fc[1].0, "A5");
        assert!(fc[1].1.contains(&REJECT) && fc[1].1.contains(&ACCEPT));
    }

    #[test]
    fn widening_flags_and_paths() {
        let (_, d, g) = fig1_game(&DelayConfig::with_key(WidenKey::ControlVar(VarId(1))));
        let widened: Vec<String> = g.widened_nodes().map(|n| d.render(g.elem(n).unwrap())).collect();
        assert_eq!(widened, ["nrp:[0,+inf) ctr:[1,1]"]);
        let head = find(&g, &d, "nrp:[0,+inf) ctr:[1,1]");
        let info = g.tree(head).unwrap();
        assert_eq!(info.depth, 1);
        assert_eq!(info.path.0, vec![Step { command: 0, split: 0, update: 0 }]);
        assert!((info.mass - 0.99).abs() < 1e-12);
    }

    #[test]
    fn suppressed_path_keeps_the_raw_post_state() {
        let mut delay = DelayConfig::with_key(WidenKey::ControlVar(VarId(1)));
        delay
            .suppressed
            .insert(TreePath(vec![Step { command: 0, split: 0, update: 0 }]));
        let (_, d, g) = fig1_game(&delay);
        find(&g, &d, "nrp:[1,1] ctr:[1,1]");
    }

    #[test]
    fn large_threshold_gives_singletons() {
        let delay = DelayConfig {
            depth_threshold: 1000,
            ..DelayConfig::default()
        };
        let (_, d, g) = fig1_game(&delay);
        for i in 0..g.len() {
            if let Some(e) = g.elem(i) {
                for x in 0..2 {
                    let p = d.project(e, VarId(x)).unwrap();
                    assert_eq!(p.min(), p.max(), "{}", d.render(e));
                }
            }
        }
    }

    #[test]
    fn terminating_program_ends_in_accept() {
        let p = parse_program("int x = 0; A: (x = 0) -> 1:(x' = 1); reach: (x = 1)").unwrap();
        let d = IntervalDomain::new(p.names().to_vec());
        let g = build_game(&p, &d, &DelayConfig::default(), 100).unwrap();
        assert_eq!(g.num_elements(), 2);
        let s1 = (0..g.len()).find(|&i| g.elem(i).is_some() && i != g.start()).unwrap();
        let f = g.succ(s1)[0];
        assert_eq!(g.succ(f), [ACCEPT]);
        assert_eq!(g.succ(s1).len(), 1);
    }

    #[test]
    fn relational_reach_is_rejected() {
        let p = parse_program("int x = 0, y = 1; A: true -> 1:(x' = x); reach: (x = y)").unwrap();
        let d = IntervalDomain::new(p.names().to_vec());
        assert!(matches!(
            build_game(&p, &d, &DelayConfig::default(), 100),
            Err(BuildError::RelationalReach(_))
        ));
    }

    #[test]
    fn budget_is_enforced() {
        let p = parse_program("int x = 0; A: true -> 1:(x' = x+1); reach: (x < 0)").unwrap();
        let d = IntervalDomain::new(p.names().to_vec());
        let delay = DelayConfig {
            depth_threshold: usize::MAX,
            ..DelayConfig::default()
        };
        assert_eq!(
            build_game(&p, &d, &delay, 20).unwrap_err(),
            BuildError::NodeBudget { limit: 20 }
        );
    }

    #[test]
    fn stuck_states_get_the_implicit_loop() {
        let p = parse_program("int x = 0; A: (x = 0) -> 1:(x' = 2); reach: (x = 1)").unwrap();
        let d = ProductDomain::new(p.names().to_vec());
        let g = build_game(&p, &d, &DelayConfig::default(), 100).unwrap();
        let stuck: Vec<_> = (0..g.len())
            .filter(|&i| matches!(g.node(i), Node::Cmd { action: Action::Stuck, .. }))
            .collect();
        assert_eq!(stuck.len(), 1);
        // x = 2 is certainly stuck, so there is no reject edge
        assert!(!g.succ(stuck[0]).contains(&REJECT));
    }

    #[test]
    fn deterministic_numbering() {
        let delay = DelayConfig::default();
        let (_, d, a) = fig1_game(&delay);
        let (_, _, b) = fig1_game(&delay);
        assert_eq!(a.len(), b.len());
        for i in 0..a.len() {
            assert_eq!(a.node(i), b.node(i));
            assert_eq!(a.succ(i), b.succ(i));
        }
        let _ = d;
    }
}
